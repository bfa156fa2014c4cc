//! Python bindings: scenarios, closed-loop runs, the Kalman observer, the QP
//! solver and the full plant.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use microflow::estimator::{KalmanFilter as CoreKalmanFilter, KfConfig};
use microflow::harness::{self, compare, metrics, sweep, validate, ControllerKind, PlantKind, SweepAxis};
use microflow::linmodel::DiscreteModel;
use microflow::plant::{PhysParams, Plant as CorePlant, PlantState};
use microflow::qpsolve::{self, QpProblem};
use microflow::units::{si_to_ul_s, ul_s_to_si};
use microflow::{Error, LINES};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Dimension(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn three(v: &[f64], what: &str) -> PyResult<[f64; LINES]> {
    v.try_into()
        .map_err(|_| PyValueError::new_err(format!("{what} needs {LINES} values, got {}", v.len())))
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> PyResult<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what}: every row needs {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// A simulation scenario. Built from a built-in name or a JSON document.
#[pyclass(module = "pymicroflow", skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: harness::Scenario,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self { inner: harness::builtin(name).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: harness::Scenario::from_json(text).map_err(to_py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration_s
    }

    #[setter]
    fn set_duration(&mut self, v: f64) {
        self.inner.duration_s = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.rng_seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.rng_seed = v;
    }

    /// Flow-meter noise standard deviation in µl/s.
    #[getter]
    fn noise(&self) -> f64 {
        self.inner.noise_std_ul_s
    }

    #[setter]
    fn set_noise(&mut self, v: f64) {
        self.inner.noise_std_ul_s = v;
    }

    /// "mpc" or "pi".
    #[getter]
    fn controller(&self) -> &'static str {
        self.inner.controller.as_str()
    }

    #[setter]
    fn set_controller(&mut self, v: &str) -> PyResult<()> {
        self.inner.controller = match v {
            "mpc" => ControllerKind::Mpc,
            "pi" => ControllerKind::Pi,
            _ => return Err(PyValueError::new_err(format!("unknown controller '{v}', expected 'mpc' or 'pi'"))),
        };
        Ok(())
    }

    /// Simulate against the linear model instead of the full plant.
    #[getter]
    fn linear_plant(&self) -> bool {
        self.inner.plant == PlantKind::Linear
    }

    #[setter]
    fn set_linear_plant(&mut self, v: bool) {
        self.inner.plant = if v { PlantKind::Linear } else { PlantKind::Full };
    }

    /// Set a tuning value: "N", "alpha" or "beta".
    fn set_tuning(&mut self, axis: &str, value: f64) -> PyResult<()> {
        let axis: SweepAxis = axis.parse().map_err(to_py_err)?;
        self.inner = axis.apply(&self.inner, value).map_err(to_py_err)?;
        Ok(())
    }

    /// References at time `t` in µl/s.
    fn reference(&self, t: f64) -> [f64; LINES] {
        self.inner.reference(t).map(si_to_ul_s)
    }

    fn run(&self, py: Python<'_>) -> PyResult<Trace> {
        let s = self.inner.clone();
        let inner = py.detach(move || harness::run_scenario(&s)).map_err(to_py_err)?;
        Ok(Trace { inner })
    }

    fn __repr__(&self) -> String {
        format!("Scenario('{}', {} s, {})", self.inner.name, self.inner.duration_s, self.inner.controller.as_str())
    }
}

/// Recorded closed-loop run. Flows in µl/s, pressures in Pa.
#[pyclass(module = "pymicroflow")]
struct Trace {
    inner: harness::Trace,
}

impl Trace {
    fn column(&self, f: impl Fn(&harness::Record) -> [f64; LINES]) -> Vec<[f64; LINES]> {
        self.inner.records.iter().map(f).collect()
    }
}

#[pymethods]
impl Trace {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// False when the run aborted; see `fault`.
    #[getter]
    fn completed(&self) -> bool {
        self.inner.completed()
    }

    #[getter]
    fn fault(&self) -> Option<String> {
        self.inner.fault.as_ref().map(|f| format!("t = {} s: {}", f.time, f.message))
    }

    #[getter]
    fn time(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.time).collect()
    }

    #[getter]
    fn references(&self) -> Vec<[f64; LINES]> {
        self.column(|r| r.refs.map(si_to_ul_s))
    }

    #[getter]
    fn true_flows(&self) -> Vec<[f64; LINES]> {
        self.column(|r| r.true_flows.map(si_to_ul_s))
    }

    #[getter]
    fn measured_flows(&self) -> Vec<[f64; LINES]> {
        self.column(|r| r.measured_flows.map(si_to_ul_s))
    }

    #[getter]
    fn estimated_flows(&self) -> Vec<[f64; LINES]> {
        self.column(|r| r.estimated_flows.map(si_to_ul_s))
    }

    #[getter]
    fn pressures(&self) -> Vec<[f64; LINES]> {
        self.column(|r| r.applied)
    }

    #[getter]
    fn status(&self) -> Vec<String> {
        self.inner.records.iter().map(|r| r.status.clone()).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let m = metrics::compute(&self.inner);
        from_json(py, &serde_json::to_string(&m).map_err(|e| to_py_err(e.into()))?)
    }

    /// Write trace.csv, solver_log.csv and run.json into `dir`.
    fn write(&self, dir: &str) -> PyResult<()> {
        let m = metrics::compute(&self.inner);
        self.inner.write_dir(std::path::Path::new(dir), &m).map_err(to_py_err)
    }
}

/// Kalman observer on the nominal reduced model. Flows in µl/s, pressures in Pa.
#[pyclass(module = "pymicroflow")]
struct KalmanFilter {
    inner: CoreKalmanFilter,
}

#[pymethods]
impl KalmanFilter {
    #[new]
    #[pyo3(signature = (beta = 1e-4, sample_period = 0.1))]
    fn new(beta: f64, sample_period: f64) -> PyResult<Self> {
        let model = DiscreteModel::from_params(&PhysParams::default(), sample_period).map_err(to_py_err)?;
        let cfg = KfConfig::with_beta(beta).map_err(to_py_err)?;
        Ok(Self { inner: CoreKalmanFilter::new(model, cfg).map_err(to_py_err)? })
    }

    /// One predict/update with the previous pressures and the measured flows.
    /// Returns the estimated flows.
    fn step(&mut self, u_prev: Vec<f64>, y: Vec<f64>) -> PyResult<[f64; LINES]> {
        let u = three(&u_prev, "u_prev")?;
        let y = three(&y, "y")?.map(ul_s_to_si);
        self.inner.step(&u, &y).map_err(to_py_err)?;
        Ok(self.flows())
    }

    fn flows(&self) -> [f64; LINES] {
        let s = self.inner.state();
        let y = &self.inner.model().h * &s.estimate;
        std::array::from_fn(|i| si_to_ul_s(y[i]))
    }

    #[getter]
    fn estimate(&self) -> Vec<f64> {
        self.inner.state().estimate.iter().copied().collect()
    }

    #[getter]
    fn covariance(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.state().covariance)
    }

    /// Normalized innovation squared of the last update.
    #[getter]
    fn nis(&self) -> f64 {
        self.inner.state().nis()
    }
}

/// Full nonlinear plant, starting at rest. Flows in µl/s, pressures in Pa.
#[pyclass(module = "pymicroflow")]
struct Plant {
    inner: CorePlant,
}

#[pymethods]
impl Plant {
    #[new]
    fn new() -> PyResult<Self> {
        let params = PhysParams::default().lumped().map_err(to_py_err)?;
        Ok(Self { inner: CorePlant::new(params, PlantState::rest()) })
    }

    /// Hold the regulator setpoints for `dt` seconds.
    fn advance(&mut self, setpoints: Vec<f64>, dt: f64) -> PyResult<()> {
        let u = three(&setpoints, "setpoints")?;
        self.inner.advance(&u, dt).map_err(to_py_err)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn chip_flows(&self) -> [f64; LINES] {
        self.inner.state().chip_flows().map(si_to_ul_s)
    }

    #[getter]
    fn junction_pressure(&self) -> f64 {
        self.inner.state().junction_pressure()
    }
}

/// Minimize ½zᵀHz + fᵀz subject to Az ≤ b. Returns a dict with z, status,
/// iterations, active_set and kkt_residual.
#[pyfunction]
#[pyo3(signature = (hessian, gradient, constraints = Vec::new(), bounds = Vec::new()))]
fn solve_qp<'py>(
    py: Python<'py>,
    hessian: Vec<Vec<f64>>,
    gradient: Vec<f64>,
    constraints: Vec<Vec<f64>>,
    bounds: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let d = gradient.len();
    let p = QpProblem::new(
        matrix(&hessian, d, "hessian")?,
        DVector::from_vec(gradient),
        matrix(&constraints, d, "constraints")?,
        DVector::from_vec(bounds),
    )
    .map_err(to_py_err)?;
    let s = qpsolve::solve(&p, None).map_err(to_py_err)?;
    let out = serde_json::json!({
        "z": s.z.as_slice(),
        "status": s.status.as_str(),
        "iterations": s.iterations,
        "active_set": s.active_set,
        "kkt_residual": s.kkt_residual,
        "objective": p.objective(&s.z),
    });
    from_json(py, &out.to_string())
}

#[pyfunction]
fn builtin_names() -> Vec<&'static str> {
    harness::BUILTIN_NAMES.to_vec()
}

/// Reduced-model audit against the full plant, as a dict.
#[pyfunction]
#[pyo3(signature = (sample_period = 0.1))]
fn validate_model<'py>(py: Python<'py>, sample_period: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| validate::validate_model(&PhysParams::default(), sample_period))
        .map_err(to_py_err)?;
    from_json(py, &serde_json::to_string(&r).map_err(|e| to_py_err(e.into()))?)
}

/// Run each scenario under MPC and PI. Returns one dict per run.
#[pyfunction]
fn compare_controllers<'py>(py: Python<'py>, scenarios: Vec<PyRef<'py, Scenario>>) -> PyResult<Bound<'py, PyAny>> {
    let list: Vec<harness::Scenario> = scenarios.iter().map(|s| s.inner.clone()).collect();
    let rows = py.detach(move || compare::compare(&list)).map_err(to_py_err)?;
    from_json(py, &serde_json::to_string(&rows).map_err(|e| to_py_err(e.into()))?)
}

/// Vary "N", "alpha" or "beta" over `values`. Returns (value, metrics) pairs.
#[pyfunction]
fn sweep_tuning<'py>(py: Python<'py>, scenario: PyRef<'py, Scenario>, axis: &str, values: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let axis: SweepAxis = axis.parse().map_err(to_py_err)?;
    let base = scenario.inner.clone();
    let points = py.detach(move || sweep::sweep(&base, axis, &values)).map_err(to_py_err)?;
    let out: Vec<serde_json::Value> = points
        .iter()
        .map(|p| serde_json::json!({ "value": p.value, "completed": p.completed, "metrics": p.metrics }))
        .collect();
    from_json(py, &serde_json::Value::Array(out).to_string())
}

#[pymodule]
fn pymicroflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Trace>()?;
    m.add_class::<KalmanFilter>()?;
    m.add_class::<Plant>()?;
    m.add_function(wrap_pyfunction!(solve_qp, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(validate_model, m)?)?;
    m.add_function(wrap_pyfunction!(compare_controllers, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_tuning, m)?)?;
    Ok(())
}
