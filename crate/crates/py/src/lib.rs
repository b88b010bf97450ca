//! Python bindings for the aeromob simulator.
//!
//! Runs release the GIL; metrics come back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aeromob::analysis::{self, AltitudeBins, AnalysisError, DistanceMode};
use aeromob::scenarios;
use aeromob::sim::{self, Mitigation, RunOptions, RunOutput, ScenarioConfig, SimError, SweepAxis};

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Runtime(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn analysis_err(e: AnalysisError) -> PyErr {
    match e {
        AnalysisError::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// A validated scenario configuration. Methods return new scenarios.
#[pyclass(name = "Scenario", module = "aeromob_py", frozen)]
struct Scenario {
    cfg: ScenarioConfig,
}

impl Scenario {
    fn checked(cfg: ScenarioConfig) -> PyResult<Self> {
        cfg.validate().map_err(sim_err)?;
        Ok(Self { cfg })
    }
}

#[pymethods]
impl Scenario {
    /// One of the packaged scenarios, see `scenario_names()`.
    #[staticmethod]
    fn load(name: &str) -> PyResult<Self> {
        Self::checked(scenarios::load(name).map_err(sim_err)?)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::checked(ScenarioConfig::from_json(text).map_err(sim_err)?)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text =
            std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        self.cfg.to_json()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.cfg.duration_s
    }

    fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.cfg.clone();
        cfg.seed = seed;
        Self { cfg }
    }

    fn with_duration(&self, duration_s: f64) -> PyResult<Self> {
        let mut cfg = self.cfg.clone();
        cfg.duration_s = duration_s;
        Self::checked(cfg)
    }

    /// Moves every UAV to the given flight altitude.
    fn with_altitude(&self, altitude_m: f64) -> PyResult<Self> {
        Self::checked(self.cfg.with_altitude(altitude_m))
    }

    fn with_mitigations(&self, names: Vec<String>) -> PyResult<Self> {
        let list = names
            .iter()
            .map(|n| n.parse::<Mitigation>().map_err(PyValueError::new_err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self { cfg: self.cfg.with_mitigations(&list) })
    }

    /// Reassigns PCIs so no two overlapping cells share one.
    fn replan_pcis(&self) -> PyResult<Self> {
        Ok(Self { cfg: self.cfg.replan_pcis().map_err(sim_err)? })
    }

    #[pyo3(signature = (record_trace = true))]
    fn run(&self, py: Python<'_>, record_trace: bool) -> PyResult<RunResult> {
        run(py, self, record_trace)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, seed={}, duration_s={})", self.cfg.name, self.cfg.seed, self.cfg.duration_s)
    }
}

#[pyclass(name = "RunResult", module = "aeromob_py", frozen)]
struct RunResult {
    out: RunOutput,
}

#[pymethods]
impl RunResult {
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_loads(py, &self.out.metrics_json())
    }

    fn metrics_json(&self) -> String {
        self.out.metrics_json()
    }

    fn events_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        analysis::write_event_log(&self.out.events, &mut buf).map_err(analysis_err)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    /// Empty unless the run recorded its trace.
    fn trace_csv(&self) -> String {
        String::from_utf8_lossy(&self.out.trace_csv).into_owned()
    }

    #[getter]
    fn event_count(&self) -> usize {
        self.out.events.len()
    }

    /// Writes the usual output files into `dir`.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        sim::write_outputs(&self.out, &dir).map_err(|e| PyIOError::new_err(format!("{}: {e}", dir.display())))
    }

    #[pyo3(signature = (t_pingpong_s = 2.0))]
    fn ho_summary<'py>(&self, py: Python<'py>, t_pingpong_s: f64) -> PyResult<Bound<'py, PyAny>> {
        let s = analysis::ho_summary(&self.out.events, t_pingpong_s).map_err(analysis_err)?;
        json_loads(py, &serde_json::to_string(&s).expect("summary serializes"))
    }
}

/// One point of a sweep; `result` is None when the run failed.
#[pyclass(name = "SweepPoint", module = "aeromob_py", frozen, get_all)]
struct SweepPoint {
    label: String,
    seed: u64,
    result: Option<Py<RunResult>>,
    error: Option<String>,
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    scenarios::names().collect()
}

#[pyfunction]
#[pyo3(signature = (scenario, record_trace = true))]
fn run(py: Python<'_>, scenario: &Scenario, record_trace: bool) -> PyResult<RunResult> {
    let cfg = &scenario.cfg;
    let out = py.detach(|| sim::run_with(cfg, &RunOptions { record_trace })).map_err(sim_err)?;
    Ok(RunResult { out })
}

/// Sweeps altitudes or replicates; failing points are reported, not raised.
#[pyfunction]
#[pyo3(signature = (scenario, altitudes = None, replicates = None, parallel = true, record_trace = false))]
fn run_sweep(
    py: Python<'_>,
    scenario: &Scenario,
    altitudes: Option<Vec<f64>>,
    replicates: Option<u32>,
    parallel: bool,
    record_trace: bool,
) -> PyResult<Vec<SweepPoint>> {
    let axis = match (altitudes, replicates) {
        (Some(a), None) => SweepAxis::Altitude(a),
        (None, Some(n)) => SweepAxis::Replicates(n),
        _ => return Err(PyValueError::new_err("give exactly one of altitudes or replicates")),
    };
    let cfg = &scenario.cfg;
    let runs = py.detach(|| sim::run_sweep(cfg, &axis, &RunOptions { record_trace }, parallel));
    runs.into_iter()
        .map(|r| {
            let (result, error) = match r.result {
                Ok(out) => (Some(Py::new(py, RunResult { out })?), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(SweepPoint { label: r.label, seed: r.seed, result, error })
        })
        .collect()
}

/// Strongest-cell statistics for an external trace.
///
/// Returns `{"nth_closest": {alt: [f1..f5]}, "changes_per_min": {alt: rate}}`.
/// `bin_width` of None gives one bin per distinct altitude.
#[pyfunction]
#[pyo3(signature = (trace_path, cells_path, bin_width = None, two_d = false))]
fn analyze_trace<'py>(
    py: Python<'py>,
    trace_path: PathBuf,
    cells_path: PathBuf,
    bin_width: Option<f64>,
    two_d: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let bins = match bin_width {
        Some(w) if !(w > 0.0) => return Err(PyValueError::new_err("bin_width must be positive")),
        Some(w) => AltitudeBins::Width(w),
        None => AltitudeBins::Exact,
    };
    let mode = if two_d { DistanceMode::TwoD } else { DistanceMode::ThreeD };
    let (nth, rates) = py
        .detach(|| {
            let trace = analysis::ingest_trace(&trace_path, &cells_path)?;
            let nth = analysis::nth_closest_strongest(&trace, bins, mode)?;
            Ok((nth, analysis::strongest_changes_per_minute(&trace, bins)))
        })
        .map_err(analysis_err)?;

    let nth_dict = PyDict::new(py);
    for (bin, fractions) in nth {
        nth_dict.set_item(bin.metres(), fractions.to_vec())?;
    }
    let rate_dict = PyDict::new(py);
    for (bin, r) in rates {
        rate_dict.set_item(bin.metres(), r.rate_per_min)?;
    }
    let out = PyDict::new(py);
    out.set_item("nth_closest", nth_dict)?;
    out.set_item("changes_per_min", rate_dict)?;
    Ok(out)
}

/// Handover summary of an events.csv file.
#[pyfunction]
#[pyo3(signature = (events_path, t_pingpong_s = 2.0))]
fn ho_summary<'py>(py: Python<'py>, events_path: PathBuf, t_pingpong_s: f64) -> PyResult<Bound<'py, PyAny>> {
    let file =
        std::fs::File::open(&events_path).map_err(|e| PyIOError::new_err(format!("{}: {e}", events_path.display())))?;
    let records = analysis::parse_event_log(file).map_err(analysis_err)?;
    let s = analysis::ho_summary(&records, t_pingpong_s).map_err(analysis_err)?;
    json_loads(py, &serde_json::to_string(&s).expect("summary serializes"))
}

#[pymodule]
pub fn aeromob_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<RunResult>()?;
    m.add_class::<SweepPoint>()?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_trace, m)?)?;
    m.add_function(wrap_pyfunction!(ho_summary, m)?)?;
    Ok(())
}
