//! Python bindings: `import tlb`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use tlb_core::analysis::audit;
use tlb_core::experiments::{two_regime_scenario, two_regime_steps_scenario};
use tlb_core::fluid::{self, certify};
use tlb_core::{AlphaRule, ControlParam, EngineError, EngineMode, PolicyState};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_error(e: EngineError) -> PyErr {
    match e {
        EngineError::Scenario(_) | EngineError::ModeUnsupported(_) => value_error(e),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Serializes through JSON so nested reports arrive as plain dicts and lists.
fn to_python<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn policy(ell: u32, delta: u32, alpha: f64, n: u32) -> PyResult<PolicyState> {
    let control = ControlParam::new(AlphaRule::Value(alpha), n).map_err(value_error)?;
    PolicyState::new(ell, delta, control).map_err(value_error)
}

/// Simulation scenario. Build it from JSON or from the built-in two-regime profile.
#[pyclass(module = "tlb", from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: tlb_core::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        tlb_core::Scenario::from_json(text).map(|inner| Self { inner }).map_err(value_error)
    }

    /// Two-regime profile with oscillating plateaus (thinning engine).
    #[staticmethod]
    #[pyo3(signature = (n=300, delta=3, seed=0))]
    fn two_regime(n: u32, delta: u32, seed: u64) -> Self {
        Self { inner: two_regime_scenario(n, delta, seed) }
    }

    /// Piecewise-constant two-regime profile (coupled engine).
    #[staticmethod]
    #[pyo3(signature = (n=300, delta=3, seed=0))]
    fn two_regime_steps(n: u32, delta: u32, seed: u64) -> Self {
        Self { inner: two_regime_steps_scenario(n, delta, seed) }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Copy at another system size.
    fn with_n(&self, n: u32) -> PyResult<Self> {
        let inner = self.inner.with_n(n);
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn delta(&self) -> u32 {
        self.inner.delta
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[setter]
    fn set_mode(&mut self, mode: &str) -> PyResult<()> {
        self.inner.mode = mode.parse::<EngineMode>().map_err(PyValueError::new_err)?;
        Ok(())
    }

    #[getter]
    fn intervals(&self) -> Vec<(f64, f64)> {
        self.inner.intervals.iter().map(|&[a, b]| (a, b)).collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n={}, delta={}, T={}, seed={}, mode='{}')",
            self.inner.n, self.inner.delta, self.inner.horizon, self.inner.seed, self.inner.mode
        )
    }
}

/// Pool occupancy `Q(0), Q(1), ...`: `Q(i)` pools hold at least `i` tasks.
#[pyclass(module = "tlb", from_py_object)]
#[derive(Clone)]
struct OccupancyMeasure {
    inner: tlb_core::OccupancyMeasure,
}

#[pymethods]
impl OccupancyMeasure {
    #[new]
    fn new(counts: Vec<u32>) -> PyResult<Self> {
        tlb_core::OccupancyMeasure::from_counts(counts).map(|inner| Self { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn empty(n: u32) -> PyResult<Self> {
        tlb_core::OccupancyMeasure::empty(n).map(|inner| Self { inner }).map_err(value_error)
    }

    /// From pool sizes: `sizes[k]` pools hold exactly `k` tasks.
    #[staticmethod]
    fn from_level_sizes(sizes: Vec<u32>) -> PyResult<Self> {
        tlb_core::OccupancyMeasure::from_level_sizes(&sizes).map(|inner| Self { inner }).map_err(value_error)
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    #[getter]
    fn counts(&self) -> Vec<u32> {
        self.inner.trimmed().to_vec()
    }

    fn count(&self, i: usize) -> u32 {
        self.inner.count(i)
    }

    fn q(&self, i: usize) -> f64 {
        self.inner.q(i)
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn tail_mass(&self, j: usize) -> PyResult<f64> {
        self.inner.tail_mass(j).map_err(value_error)
    }

    /// Adds a task to a pool holding `level - 1` tasks.
    fn apply_arrival(&mut self, level: usize) -> PyResult<()> {
        self.inner.apply_arrival(level).map_err(value_error)
    }

    /// Removes a task from a pool holding `level` tasks.
    fn apply_departure(&mut self, level: usize) -> PyResult<()> {
        self.inner.apply_departure(level).map_err(value_error)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("OccupancyMeasure({:?})", self.inner.trimmed())
    }
}

/// Result of one simulation run.
#[pyclass(module = "tlb")]
struct Trajectory {
    inner: tlb_core::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn arrivals(&self) -> u64 {
        self.inner.arrivals
    }

    #[getter]
    fn departures(&self) -> u64 {
        self.inner.departures
    }

    #[getter]
    fn final_ell(&self) -> u32 {
        self.inner.final_ell
    }

    #[getter]
    fn final_state(&self) -> OccupancyMeasure {
        OccupancyMeasure { inner: self.inner.final_state.clone() }
    }

    /// `(t, kind, level, ell_pre, ell_post)` per event.
    fn events(&self) -> Vec<(f64, &'static str, u32, u32, u32)> {
        self.inner.events.iter().map(|e| (e.t, e.kind.as_str(), e.level, e.ell_pre, e.ell_post)).collect()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.t).collect()
    }

    fn thresholds(&self) -> Vec<u32> {
        self.inner.samples.iter().map(|s| s.ell).collect()
    }

    fn total_mass(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.total_mass()).collect()
    }

    /// Sampled `q(i)`.
    fn q(&self, i: usize) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.occupancy.q(i)).collect()
    }

    fn counting_identity_holds(&self) -> bool {
        self.inner.counting_identity_holds()
    }

    /// Replays the log and re-checks every invariant.
    fn audit(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &audit(&self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.events.len()
    }
}

/// Fluid total mass `u(t)` solving `u' = lambda - mu u`.
#[pyclass(module = "tlb")]
struct FluidSolution {
    inner: fluid::FluidSolution,
    delta: u32,
}

#[pymethods]
impl FluidSolution {
    fn __call__(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    fn eval(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    fn rho(&self, t: f64) -> f64 {
        self.inner.rho(t)
    }

    /// Certificate for `[a, b]` at the scenario's step size.
    fn certify(&self, py: Python<'_>, a: f64, b: f64) -> PyResult<Py<PyAny>> {
        to_python(py, &certify(&self.inner, a, b, self.delta))
    }
}

/// Runs the scenario with its configured engine.
#[pyfunction]
fn run(py: Python<'_>, scenario: &Scenario) -> PyResult<Trajectory> {
    let s = scenario.inner.clone();
    let inner = py.detach(move || tlb_core::run(&s)).map_err(engine_error)?;
    Ok(Trajectory { inner })
}

/// Runs several seeds of one scenario, releasing the interpreter meanwhile.
#[pyfunction]
fn run_seeds(py: Python<'_>, scenario: &Scenario, seeds: Vec<u64>) -> PyResult<Vec<Trajectory>> {
    let base = scenario.inner.clone();
    let trajs = py.detach(move || {
        seeds
            .iter()
            .map(|&seed| tlb_core::run(&tlb_core::Scenario { seed, ..base.clone() }))
            .collect::<Result<Vec<_>, _>>()
    });
    Ok(trajs.map_err(engine_error)?.into_iter().map(|inner| Trajectory { inner }).collect())
}

/// Routes one arrival; returns `(target_level, band)`.
#[pyfunction]
#[pyo3(signature = (occupancy, ell, delta, u, alpha=0.5))]
fn dispatch(occupancy: &OccupancyMeasure, ell: u32, delta: u32, u: f64, alpha: f64) -> PyResult<(usize, String)> {
    if !(0.0..1.0).contains(&u) {
        return Err(PyValueError::new_err(format!("u={u} outside [0, 1)")));
    }
    let p = policy(ell, delta, alpha, occupancy.inner.n())?;
    let d = tlb_core::dispatch(&occupancy.inner, &p, u);
    let band = match d.band {
        tlb_core::Band::Low => "low",
        tlb_core::Band::Mid => "mid",
        tlb_core::Band::High => "high",
    };
    Ok((d.target_level, band.to_owned()))
}

/// Threshold step (`-delta`, `0` or `delta`) triggered by an arrival that finds `occupancy`.
#[pyfunction]
fn threshold_update(occupancy: &OccupancyMeasure, ell: u32, delta: u32, alpha: f64) -> PyResult<i64> {
    let p = policy(ell, delta, alpha, occupancy.inner.n())?;
    Ok(tlb_core::threshold_update(&occupancy.inner, &p))
}

#[pyfunction]
fn solve_u(scenario: &Scenario) -> PyResult<FluidSolution> {
    let inner = tlb_core::solve_u(&scenario.inner).map_err(value_error)?;
    Ok(FluidSolution { inner, delta: scenario.inner.delta })
}

#[pyfunction]
fn sigma(mu: f64, u_a: f64, rho_min: f64, rho_max: f64, m: u32, delta: u32) -> f64 {
    fluid::sigma(mu, u_a, rho_min, rho_max, m, delta)
}

#[pyfunction]
fn sigma_bd(mu: f64, u_a: f64, rho_max: f64, m: u32, delta: u32) -> f64 {
    fluid::sigma_bd(mu, u_a, rho_max, m, delta)
}

/// `n^gamma sup_{t <= T} |N(n t)/n - t|` for each `n`, one Poisson path per seed.
#[pyfunction]
#[pyo3(signature = (seed, n_list, gamma=0.0, horizon=1.0))]
fn fslln_diag(seed: u64, n_list: Vec<u64>, gamma: f64, horizon: f64) -> PyResult<Vec<(u64, f64)>> {
    tlb_core::fslln_diag(seed, &n_list, gamma, horizon).map_err(value_error)
}

#[pymodule]
fn tlb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<OccupancyMeasure>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<FluidSolution>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_seeds, m)?)?;
    m.add_function(wrap_pyfunction!(dispatch, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_update, m)?)?;
    m.add_function(wrap_pyfunction!(solve_u, m)?)?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_bd, m)?)?;
    m.add_function(wrap_pyfunction!(fslln_diag, m)?)?;
    Ok(())
}
