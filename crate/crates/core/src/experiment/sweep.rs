//! Seeded parameter sweeps with CSV output.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::baselines::{run_scheme, RunOptions, Scheme};
use crate::config::{parse_size, RunConfig};
use crate::error::Error;
use crate::metrics::RunResult;
use crate::simnet::FaultPlan;

pub const CSV_COLUMNS: [&str; 18] = [
    "scheme",
    "n",
    "nd",
    "r",
    "ds_bytes",
    "bs_bytes",
    "dl_lo",
    "dl_hi",
    "cr",
    "seed",
    "time_s",
    "cost_units",
    "control_bytes",
    "heartbeat_bytes",
    "elections",
    "supplements",
    "retransmits",
    "stalled",
];

/// One swept parameter and the values it takes.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub param: String,
    pub values: Vec<String>,
}

impl Axis {
    /// Parses `param=v1,v2,...`, checking every value.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let (param, values) = text.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("--sweep expects param=v1,v2,... (got '{text}')"))
        })?;
        let param = param.trim().to_string();
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("--sweep {param} has no values")));
        }
        let mut cfg = RunConfig::default();
        let mut scheme = Scheme::EdgeDis;
        for v in &values {
            apply_param(&mut cfg, &mut scheme, &param, v)?;
        }
        Ok(Axis { param, values })
    }
}

fn number<T: std::str::FromStr>(param: &str, value: &str) -> Result<T, Error> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("--{param}: cannot parse '{value}'")))
}

fn range(param: &str, value: &str) -> Result<(f64, f64), Error> {
    let (lo, hi) = value
        .split_once([':', '-'])
        .ok_or_else(|| Error::InvalidParameter(format!("--{param}: expected lo:hi (got '{value}')")))?;
    Ok((number(param, lo)?, number(param, hi)?))
}

/// Sets one named parameter. Names follow the command-line flags.
pub fn apply_param(
    cfg: &mut RunConfig,
    scheme: &mut Scheme,
    param: &str,
    value: &str,
) -> Result<(), Error> {
    match param {
        "scheme" => *scheme = value.parse()?,
        "n" => cfg.n = number(param, value)?,
        "nd" => cfg.nd = number(param, value)?,
        "r" => cfg.failure_rate = number(param, value)?,
        "ds" => cfg.data_size = parse_size(value)?,
        "bs" => cfg.block_size = parse_size(value)?,
        "dl-lo" => cfg.delay_lo_ms = number(param, value)?,
        "dl-hi" => cfg.delay_hi_ms = number(param, value)?,
        "dl" => (cfg.delay_lo_ms, cfg.delay_hi_ms) = range(param, value)?,
        "cr" => cfg.cost_ratio = number(param, value)?,
        "t" => cfg.coordinator_timeout_ms = number(param, value)?,
        "heartbeat-ms" => cfg.heartbeat_ms = number(param, value)?,
        "dist-timeout-ms" => cfg.distribution_timeout_ms = number(param, value)?,
        "trans-timeout-ms" => cfg.transmission_timeout_ms = number(param, value)?,
        "entry-fraction" => cfg.entry_fraction = number(param, value)?,
        "bw-range" => cfg.bw_range = range(param, value)?,
        "bw-lo" => cfg.bw_range.0 = number(param, value)?,
        "seed" => cfg.seed = number(param, value)?,
        other => {
            return Err(Error::InvalidParameter(format!("unknown sweep parameter '{other}'")))
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub scheme: Scheme,
    pub base: RunConfig,
    /// Seeds per sweep point; run `i` uses `base.seed + i`.
    pub runs: usize,
    pub axes: Vec<Axis>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            scheme: Scheme::EdgeDis,
            base: RunConfig::default(),
            runs: 1,
            axes: Vec::new(),
            out: None,
            trace: None,
        }
    }
}

impl SweepSpec {
    /// Every combination of axis values, first axis outermost.
    pub fn points(&self) -> Result<Vec<(Scheme, RunConfig)>, Error> {
        let mut points = vec![(self.scheme, self.base.clone())];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for (scheme, cfg) in &points {
                for v in &axis.values {
                    let (mut s, mut c) = (*scheme, cfg.clone());
                    apply_param(&mut c, &mut s, &axis.param, v)?;
                    next.push((s, c));
                }
            }
            points = next;
        }
        for (_, cfg) in &points {
            cfg.validate()?;
        }
        Ok(points)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub cfg: RunConfig,
    /// `None` marks the mean row of a sweep point.
    pub seed: Option<u64>,
    pub time_s: f64,
    pub cost: f64,
    pub control_bytes: f64,
    pub heartbeat_bytes: f64,
    pub elections: f64,
    pub supplements: f64,
    pub retransmits: f64,
    pub stalled: f64,
}

impl SweepRow {
    fn from_result(scheme: Scheme, cfg: &RunConfig, r: &RunResult) -> Self {
        SweepRow {
            scheme,
            cfg: cfg.clone(),
            seed: Some(cfg.seed),
            time_s: r.time_s,
            cost: r.cost,
            control_bytes: r.control_bytes as f64,
            heartbeat_bytes: r.heartbeat_bytes as f64,
            elections: r.elections as f64,
            supplements: r.supplements as f64,
            retransmits: r.retransmits as f64,
            stalled: if r.stalled { 1.0 } else { 0.0 },
        }
    }

    fn mean(rows: &[SweepRow]) -> Self {
        let k = rows.len() as f64;
        let avg = |f: fn(&SweepRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
        SweepRow {
            scheme: rows[0].scheme,
            cfg: rows[0].cfg.clone(),
            seed: None,
            time_s: avg(|r| r.time_s),
            cost: avg(|r| r.cost),
            control_bytes: avg(|r| r.control_bytes),
            heartbeat_bytes: avg(|r| r.heartbeat_bytes),
            elections: avg(|r| r.elections),
            supplements: avg(|r| r.supplements),
            retransmits: avg(|r| r.retransmits),
            stalled: avg(|r| r.stalled),
        }
    }

    pub fn is_mean(&self) -> bool {
        self.seed.is_none()
    }

    pub fn record(&self) -> Vec<String> {
        let num = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
        let c = &self.cfg;
        vec![
            self.scheme.name().to_string(),
            c.n.to_string(),
            format!("{}", c.nd),
            format!("{}", c.failure_rate),
            c.data_size.to_string(),
            c.block_size.to_string(),
            format!("{}", c.delay_lo_ms),
            format!("{}", c.delay_hi_ms),
            format!("{}", c.cost_ratio),
            self.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
            num(self.time_s),
            num(self.cost),
            num(self.control_bytes),
            num(self.heartbeat_bytes),
            num(self.elections),
            num(self.supplements),
            num(self.retransmits),
            num(self.stalled),
        ]
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    /// Per-run rows, each sweep point closed by its mean row.
    pub rows: Vec<SweepRow>,
    /// Concatenated event traces, when requested.
    pub trace: Option<String>,
}

impl SweepReport {
    pub fn any_stalled(&self) -> bool {
        self.rows.iter().any(|r| !r.is_mean() && r.stalled > 0.0)
    }

    pub fn means(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_mean())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            out.write_record(row.record())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, Error> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Runs every (point, seed) pair, in parallel, and returns rows in
/// (point, seed) order. Files named in the spec are written too.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport, Error> {
    if spec.runs == 0 {
        return Err(Error::InvalidParameter("--runs must be at least 1".into()));
    }
    let points = spec.points()?;
    let jobs: Vec<(usize, Scheme, RunConfig)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, (scheme, cfg))| {
            (0..spec.runs).map(move |i| {
                let mut c = cfg.clone();
                c.seed = cfg.seed + i as u64;
                (p, *scheme, c)
            })
        })
        .collect();
    let opts = RunOptions {
        trace: spec.trace.is_some(),
        monitor: false,
    };
    let results: Vec<(SweepRow, Option<String>)> = jobs
        .par_iter()
        .map(|(_, scheme, cfg)| {
            let out = run_scheme(*scheme, cfg, &FaultPlan::default(), opts)?;
            Ok((SweepRow::from_result(*scheme, cfg, &out.result), out.trace))
        })
        .collect::<Result<_, Error>>()?;

    let mut report = SweepReport::default();
    let mut trace = spec.trace.as_ref().map(|_| String::new());
    for chunk in results.chunks(spec.runs) {
        let rows: Vec<SweepRow> = chunk.iter().map(|(r, _)| r.clone()).collect();
        let mean = SweepRow::mean(&rows);
        report.rows.extend(rows);
        report.rows.push(mean);
        if let Some(buf) = trace.as_mut() {
            for (_, t) in chunk {
                buf.push_str(t.as_deref().unwrap_or(""));
            }
        }
    }
    report.trace = trace;

    if let Some(path) = &spec.out {
        report.write_csv(std::fs::File::create(path)?)?;
    }
    if let (Some(path), Some(t)) = (&spec.trace, &report.trace) {
        std::fs::write(path, t)?;
    }
    Ok(report)
}
