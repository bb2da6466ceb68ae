//! Python module `edgedis`: run simulations, sweeps, the uniqueness scenario
//! and the election benchmark from Python.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use edgedis_core::config::{parse_size as core_parse_size, RunConfig as CoreConfig};
use edgedis_core::experiment::{self, ElectionSpec, SweepSpec};
use edgedis_core::simnet::{build_topology, FaultPlan};
use edgedis_core::{model, run_scheme, Error, RunOptions, Scheme};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(py_err)
}

#[pyclass(name = "RunConfig", module = "edgedis", from_py_object)]
#[derive(Clone)]
pub struct RunConfig {
    #[pyo3(get, set)]
    pub n: usize,
    #[pyo3(get, set)]
    pub nd: f64,
    #[pyo3(get, set)]
    pub r: f64,
    #[pyo3(get, set)]
    pub ds: u64,
    #[pyo3(get, set)]
    pub bs: u64,
    #[pyo3(get, set)]
    pub dl_lo: f64,
    #[pyo3(get, set)]
    pub dl_hi: f64,
    #[pyo3(get, set)]
    pub cr: f64,
    #[pyo3(get, set)]
    pub t: f64,
    #[pyo3(get, set)]
    pub heartbeat_ms: f64,
    #[pyo3(get, set)]
    pub dist_timeout_ms: f64,
    #[pyo3(get, set)]
    pub trans_timeout_ms: f64,
    #[pyo3(get, set)]
    pub entry_fraction: f64,
    #[pyo3(get, set)]
    pub bw_lo: f64,
    #[pyo3(get, set)]
    pub bw_hi: f64,
    #[pyo3(get, set)]
    pub seed: u64,
}

impl From<&CoreConfig> for RunConfig {
    fn from(c: &CoreConfig) -> Self {
        RunConfig {
            n: c.n,
            nd: c.nd,
            r: c.failure_rate,
            ds: c.data_size,
            bs: c.block_size,
            dl_lo: c.delay_lo_ms,
            dl_hi: c.delay_hi_ms,
            cr: c.cost_ratio,
            t: c.coordinator_timeout_ms,
            heartbeat_ms: c.heartbeat_ms,
            dist_timeout_ms: c.distribution_timeout_ms,
            trans_timeout_ms: c.transmission_timeout_ms,
            entry_fraction: c.entry_fraction,
            bw_lo: c.bw_range.0,
            bw_hi: c.bw_range.1,
            seed: c.seed,
        }
    }
}

impl RunConfig {
    fn to_core(&self) -> CoreConfig {
        CoreConfig {
            n: self.n,
            nd: self.nd,
            failure_rate: self.r,
            data_size: self.ds,
            block_size: self.bs,
            delay_lo_ms: self.dl_lo,
            delay_hi_ms: self.dl_hi,
            cost_ratio: self.cr,
            coordinator_timeout_ms: self.t,
            heartbeat_ms: self.heartbeat_ms,
            distribution_timeout_ms: self.dist_timeout_ms,
            transmission_timeout_ms: self.trans_timeout_ms,
            entry_fraction: self.entry_fraction,
            bw_range: (self.bw_lo, self.bw_hi),
            seed: self.seed,
            ..CoreConfig::default()
        }
    }
}

#[pymethods]
impl RunConfig {
    /// Defaults: n=32, nd=1.4, r=0, ds=1GB, bs=512KB, dl=[5,15], cr=20.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut cfg = RunConfig::from(&CoreConfig::default());
        if let Some(kw) = kwargs {
            let obj = Bound::new(kw.py(), cfg.clone())?;
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                if !obj.hasattr(key.as_str())? {
                    return Err(PyValueError::new_err(format!("unknown parameter '{key}'")));
                }
                obj.setattr(key.as_str(), v)?;
            }
            cfg = obj.borrow().clone();
        }
        Ok(cfg)
    }

    fn validate(&self) -> PyResult<()> {
        self.to_core().validate().map_err(py_err)
    }

    fn block_count(&self) -> PyResult<u32> {
        model::partition(self.ds, self.bs).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(n={}, nd={}, r={}, ds={}, bs={}, dl=[{}, {}], cr={}, seed={})",
            self.n, self.nd, self.r, self.ds, self.bs, self.dl_lo, self.dl_hi, self.cr, self.seed
        )
    }
}

#[pyclass(name = "RunResult", module = "edgedis", frozen, skip_from_py_object)]
pub struct RunResult {
    #[pyo3(get)]
    pub time_s: f64,
    #[pyo3(get)]
    pub cost: f64,
    #[pyo3(get)]
    pub control_bytes: u64,
    #[pyo3(get)]
    pub heartbeat_bytes: u64,
    #[pyo3(get)]
    pub elections: u64,
    #[pyo3(get)]
    pub supplements: u64,
    #[pyo3(get)]
    pub retransmits: u64,
    #[pyo3(get)]
    pub stalled: bool,
}

#[pymethods]
impl RunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(time_s={}, cost={}, control_bytes={}, heartbeat_bytes={}, stalled={})",
            self.time_s, self.cost, self.control_bytes, self.heartbeat_bytes, self.stalled
        )
    }
}

/// Runs one dissemination under `scheme` and returns its metrics.
#[pyfunction]
#[pyo3(signature = (scheme_name, config=None))]
fn run(py: Python<'_>, scheme_name: &str, config: Option<RunConfig>) -> PyResult<RunResult> {
    let s = scheme(scheme_name)?;
    let cfg = config.map(|c| c.to_core()).unwrap_or_default();
    let out = py
        .detach(|| run_scheme(s, &cfg, &FaultPlan::default(), RunOptions::default()))
        .map_err(py_err)?;
    let r = out.result;
    Ok(RunResult {
        time_s: r.time_s,
        cost: r.cost,
        control_bytes: r.control_bytes,
        heartbeat_bytes: r.heartbeat_bytes,
        elections: r.elections,
        supplements: r.supplements,
        retransmits: r.retransmits,
        stalled: r.stalled,
    })
}

/// Runs `runs` seeds of one configuration and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (scheme_name, config=None, runs=1))]
fn sweep_csv(py: Python<'_>, scheme_name: &str, config: Option<RunConfig>, runs: usize) -> PyResult<String> {
    let spec = SweepSpec {
        scheme: scheme(scheme_name)?,
        base: config.map(|c| c.to_core()).unwrap_or_default(),
        runs,
        ..SweepSpec::default()
    };
    py.detach(|| experiment::run_sweep(&spec).and_then(|r| r.to_csv()))
        .map_err(py_err)
}

#[pyfunction]
fn partition(data_size: u64, block_size: u64) -> PyResult<u32> {
    model::partition(data_size, block_size).map_err(py_err)
}

#[pyfunction]
fn majority(n: usize) -> PyResult<usize> {
    model::checked_majority(n).map_err(py_err)
}

#[pyfunction]
fn parse_size(text: &str) -> PyResult<u64> {
    core_parse_size(text).map_err(py_err)
}

/// Edges of the edge-server topology as (a, b) pairs with a < b.
#[pyfunction]
#[pyo3(signature = (n, nd, seed=1))]
fn topology_edges(n: usize, nd: f64, seed: u64) -> PyResult<Vec<(u32, u32)>> {
    let topo = build_topology(n, nd, seed).map_err(py_err)?;
    Ok(topo.edges().into_iter().map(|(a, b)| (a.0, b.0)).collect())
}

/// Re-election times in ms as a list of (n, t_ms, seed, election_ms, attempts).
#[pyfunction]
#[pyo3(signature = (n_values, t_values=vec![250.0], runs=20, seed=1))]
fn election_benchmark(
    py: Python<'_>,
    n_values: Vec<usize>,
    t_values: Vec<f64>,
    runs: usize,
    seed: u64,
) -> PyResult<Vec<(usize, f64, u64, f64, u64)>> {
    let spec = ElectionSpec {
        n_values,
        t_values,
        runs,
        seed,
        ..ElectionSpec::default()
    };
    let report = py
        .detach(|| experiment::run_election_benchmark(&spec))
        .map_err(py_err)?;
    Ok(report
        .samples
        .iter()
        .map(|s| (s.n, s.t_ms, s.seed, s.election_ms, s.attempts))
        .collect())
}

/// Replays the coordinator-uniqueness scenario. Returns (passed, coordinator
/// terms in order, report text).
#[pyfunction]
fn uniqueness_scenario() -> (bool, Vec<u64>, String) {
    let v = experiment::run_uniqueness_scenario();
    (v.passed(), v.coordinator_terms.clone(), v.to_string())
}

#[pyfunction]
fn schemes() -> Vec<&'static str> {
    Scheme::ALL.iter().map(|s| s.name()).collect()
}

#[pymodule]
fn edgedis(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RunConfig>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(partition, m)?)?;
    m.add_function(wrap_pyfunction!(majority, m)?)?;
    m.add_function(wrap_pyfunction!(parse_size, m)?)?;
    m.add_function(wrap_pyfunction!(topology_edges, m)?)?;
    m.add_function(wrap_pyfunction!(election_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(uniqueness_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(schemes, m)?)?;
    Ok(())
}
