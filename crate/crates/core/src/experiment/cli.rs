//! Command-line parsing.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::baselines::Scheme;
use crate::config::parse_size;
use crate::error::Error;

use super::election::ElectionSpec;
use super::sweep::{Axis, SweepSpec};

#[derive(Debug, Parser)]
#[command(
    name = "edgedis-sim",
    version,
    about = "Simulate edge data dissemination and write one CSV row per run"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay the scripted coordinator-uniqueness scenario.
    Scenario {
        /// Write the scenario's event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Measure coordinator re-election time.
    ElectionBench(ElectionArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// edgedis, edgedis-rnd, datasync, gossip, raft or edda.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of edge servers.
    #[arg(long)]
    pub n: Option<usize>,
    /// Network density (edges per server).
    #[arg(long)]
    pub nd: Option<f64>,
    /// Block transmission failure rate in [0, 1].
    #[arg(long)]
    pub r: Option<f64>,
    /// Data size, e.g. 1GB or 64MB.
    #[arg(long)]
    pub ds: Option<String>,
    /// Block size, e.g. 512KB.
    #[arg(long)]
    pub bs: Option<String>,
    /// Lowest edge-to-edge delay in ms.
    #[arg(long = "dl-lo")]
    pub dl_lo: Option<f64>,
    /// Highest edge-to-edge delay in ms.
    #[arg(long = "dl-hi")]
    pub dl_hi: Option<f64>,
    /// Backhaul to edge cost ratio.
    #[arg(long)]
    pub cr: Option<f64>,
    /// Coordinator timeout in ms.
    #[arg(long)]
    pub t: Option<f64>,
    /// Coordinator heartbeat interval in ms.
    #[arg(long = "heartbeat-ms")]
    pub heartbeat_ms: Option<f64>,
    /// Cloud wait for a distribution completion, in ms.
    #[arg(long = "dist-timeout-ms")]
    pub dist_timeout_ms: Option<f64>,
    /// Sender wait for a block receipt before retransmitting, in ms.
    #[arg(long = "trans-timeout-ms")]
    pub trans_timeout_ms: Option<f64>,
    /// Share of edge servers fed directly by the cloud.
    #[arg(long = "entry-fraction")]
    pub entry_fraction: Option<f64>,
    /// Per-server bandwidth multipliers drawn from lo,hi.
    #[arg(long = "bw-range", value_name = "LO,HI")]
    pub bw_range: Option<String>,
    /// Simulated time after which an unfinished run counts as stalled.
    #[arg(long = "horizon-ms")]
    pub horizon_ms: Option<f64>,
    /// First seed; later runs use seed+1, seed+2, ...
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeds per sweep point.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Sweep a parameter, e.g. --sweep n=8,16,32. Repeat for a grid.
    #[arg(long, value_name = "PARAM=V1,V2,...")]
    pub sweep: Vec<String>,
    /// CSV output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event trace output file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ElectionArgs {
    /// Server counts, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_value = "8,16,32,64,128")]
    pub n_values: Vec<usize>,
    /// Coordinator timeouts in ms, comma separated.
    #[arg(long = "t", value_delimiter = ',', default_value = "250")]
    pub t_values: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "dl-lo")]
    pub dl_lo: Option<f64>,
    #[arg(long = "dl-hi")]
    pub dl_hi: Option<f64>,
    #[arg(long = "heartbeat-ms")]
    pub heartbeat_ms: Option<f64>,
    /// CSV output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Sweep(SweepSpec),
    Scenario { trace: Option<PathBuf> },
    ElectionBench { spec: ElectionSpec, out: Option<PathBuf> },
}

fn flag<T>(name: &str, r: Result<T, Error>) -> Result<T, Error> {
    r.map_err(|e| match e {
        Error::InvalidParameter(msg) => Error::InvalidParameter(format!("--{name}: {msg}")),
        other => other,
    })
}

impl RunArgs {
    pub fn into_spec(self) -> Result<SweepSpec, Error> {
        let mut spec = SweepSpec::default();
        let cfg = &mut spec.base;
        if let Some(s) = &self.scheme {
            spec.scheme = flag("scheme", s.parse::<Scheme>())?;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.nd {
            cfg.nd = v;
        }
        if let Some(v) = self.r {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("--r must be in [0, 1] (got {v})")));
            }
            cfg.failure_rate = v;
        }
        if let Some(v) = &self.ds {
            cfg.data_size = flag("ds", parse_size(v))?;
        }
        if let Some(v) = &self.bs {
            cfg.block_size = flag("bs", parse_size(v))?;
        }
        if let Some(v) = self.dl_lo {
            cfg.delay_lo_ms = v;
        }
        if let Some(v) = self.dl_hi {
            cfg.delay_hi_ms = v;
        }
        if let Some(v) = self.cr {
            cfg.cost_ratio = v;
        }
        if let Some(v) = self.t {
            cfg.coordinator_timeout_ms = v;
        }
        if let Some(v) = self.heartbeat_ms {
            cfg.heartbeat_ms = v;
        }
        if let Some(v) = self.dist_timeout_ms {
            cfg.distribution_timeout_ms = v;
        }
        if let Some(v) = self.trans_timeout_ms {
            cfg.transmission_timeout_ms = v;
        }
        if let Some(v) = self.entry_fraction {
            cfg.entry_fraction = v;
        }
        if let Some(v) = &self.bw_range {
            let (lo, hi) = v.split_once(',').ok_or_else(|| {
                Error::InvalidParameter(format!("--bw-range expects lo,hi (got '{v}')"))
            })?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("--bw-range: cannot parse '{s}'")))
            };
            cfg.bw_range = (parse(lo)?, parse(hi)?);
        }
        if let Some(v) = self.horizon_ms {
            cfg.horizon_ms = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.runs {
            if v == 0 {
                return Err(Error::InvalidParameter("--runs must be at least 1".into()));
            }
            spec.runs = v;
        }
        spec.base.validate()?;
        for s in &self.sweep {
            spec.axes.push(flag("sweep", Axis::parse(s))?);
        }
        spec.out = self.out;
        spec.trace = self.trace;
        Ok(spec)
    }
}

impl ElectionArgs {
    pub fn into_spec(self) -> Result<ElectionSpec, Error> {
        let mut spec = ElectionSpec {
            n_values: self.n_values,
            t_values: self.t_values,
            runs: self.runs,
            seed: self.seed,
            ..ElectionSpec::default()
        };
        if let Some(v) = self.dl_lo {
            spec.base.delay_lo_ms = v;
        }
        if let Some(v) = self.dl_hi {
            spec.base.delay_hi_ms = v;
        }
        if let Some(v) = self.heartbeat_ms {
            spec.base.heartbeat_ms = v;
        }
        spec.base.validate()?;
        if spec.n_values.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameter("--n: need at least 2 servers".into()));
        }
        if spec.t_values.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParameter("--t must be positive".into()));
        }
        Ok(spec)
    }
}

impl Cli {
    pub fn into_invocation(self) -> Result<Invocation, Error> {
        match self.command {
            None => Ok(Invocation::Sweep(self.run.into_spec()?)),
            Some(Command::Scenario { trace }) => Ok(Invocation::Scenario { trace }),
            Some(Command::ElectionBench(args)) => {
                let out = args.out.clone();
                Ok(Invocation::ElectionBench {
                    spec: args.into_spec()?,
                    out,
                })
            }
        }
    }
}

/// Parses a full argument list, program name first.
pub fn parse_config<I, T>(args: I) -> Result<Invocation, Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    cli.into_invocation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{RunConfig, GB, KB};

    fn sweep(args: &[&str]) -> Result<SweepSpec, Error> {
        let mut all = vec!["edgedis-sim"];
        all.extend_from_slice(args);
        match parse_config(all)? {
            Invocation::Sweep(s) => Ok(s),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_flags_gives_defaults() {
        let spec = sweep(&[]).unwrap();
        assert_eq!(spec.base, RunConfig::default());
        assert_eq!(spec.base.data_size, GB);
        assert_eq!(spec.base.block_size, 512 * KB);
        assert_eq!(spec.scheme, Scheme::EdgeDis);
        assert_eq!(spec.runs, 1);
    }

    #[test]
    fn flags_override() {
        let spec = sweep(&["--scheme", "edd-a", "--n", "64", "--ds", "64MB", "--dl-lo", "10", "--dl-hi", "25", "--runs", "3"]).unwrap();
        assert_eq!(spec.scheme, Scheme::Edda);
        assert_eq!(spec.base.n, 64);
        assert_eq!(spec.base.data_size, 64 << 20);
        assert_eq!((spec.base.delay_lo_ms, spec.base.delay_hi_ms), (10.0, 25.0));
        assert_eq!(spec.runs, 3);
    }

    #[test]
    fn sweep_flag() {
        let spec = sweep(&["--sweep", "n=8,16,32,64,128", "--runs", "2"]).unwrap();
        assert_eq!(spec.points().unwrap().len(), 5);
    }

    #[test]
    fn bad_values_name_the_flag() {
        let e = sweep(&["--r", "1.5"]).unwrap_err().to_string();
        assert!(e.contains("--r"), "{e}");
        let e = sweep(&["--nd", "0.5"]).unwrap_err().to_string();
        assert!(e.contains("nd"), "{e}");
        let e = sweep(&["--bogus", "1"]).unwrap_err().to_string();
        assert!(e.contains("--bogus"), "{e}");
        let e = sweep(&["--scheme", "paxos"]).unwrap_err().to_string();
        assert!(e.contains("--scheme"), "{e}");
    }

    #[test]
    fn subcommands() {
        let inv = parse_config(["edgedis-sim", "scenario"]).unwrap();
        assert_eq!(inv, Invocation::Scenario { trace: None });
        let inv = parse_config(["edgedis-sim", "election-bench", "--n", "8,128", "--runs", "5"]).unwrap();
        let Invocation::ElectionBench { spec, .. } = inv else {
            panic!("expected election bench");
        };
        assert_eq!(spec.n_values, vec![8, 128]);
        assert_eq!(spec.t_values, vec![250.0]);
        assert_eq!(spec.runs, 5);
    }
}
