//! Python bindings: scenarios, pilots, closed forms, bounds, evaluation and
//! both pilot optimizers.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ristx::channel::{build_stats, Correlation, Scenario};
use ristx::crlb::{self, CrlbMode, Scheme};
use ristx::cxlinalg::CMat;
use ristx::estimation::{
    analytic_report, dft_pilot, lmmse_receivers, ls_receivers, objective_p1, simulate_training,
    Estimator, LinkParams, PilotSequence,
};
use ristx::experiment::parse_estimator;
use ristx::gd::{run_gd, GdConfig};
use ristx::pdd::{run_pdd, PddConfig};
use ristx::pilotfile::{read_pilot, write_pilot};

fn err(e: ristx::Error) -> PyErr {
    match e {
        ristx::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn estimator(s: &str) -> PyResult<Estimator> {
    parse_estimator(s).map_err(err)
}

#[pyclass(name = "Scenario", module = "ristx_py", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    /// i.i.d. channels at 80 m with −90 dBm noise everywhere.
    #[staticmethod]
    fn analysis(m_b: usize, m_r: usize, k_users: usize, p_max: f64) -> Self {
        Self { inner: Scenario::analysis(m_b, m_r, k_users, p_max) }
    }

    /// Correlated channels at 100 m, −90 dBm at the BS and −80 dBm at users.
    #[staticmethod]
    fn simulation(m_b: usize, m_r: usize, k_users: usize, p_max: f64) -> Self {
        Self { inner: Scenario::simulation(m_b, m_r, k_users, p_max) }
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn m_b(&self) -> usize {
        self.inner.m_b
    }
    #[getter]
    fn m_r(&self) -> usize {
        self.inner.m_r
    }
    #[getter]
    fn k_users(&self) -> usize {
        self.inner.k_users
    }
    #[getter]
    fn p_max(&self) -> f64 {
        self.inner.p_max
    }
    #[setter]
    fn set_p_max(&mut self, v: f64) {
        self.inner.p_max = v;
    }
    #[getter]
    fn d_b(&self) -> f64 {
        self.inner.d_b
    }
    #[setter]
    fn set_d_b(&mut self, v: f64) {
        self.inner.d_b = v;
    }
    #[getter]
    fn d_u(&self) -> Vec<f64> {
        self.inner.d_u.clone()
    }
    #[setter]
    fn set_d_u(&mut self, v: Vec<f64>) {
        self.inner.d_u = v;
    }
    #[getter]
    fn sigma_b_sq(&self) -> f64 {
        self.inner.sigma_b_sq
    }
    #[setter]
    fn set_sigma_b_sq(&mut self, v: f64) {
        self.inner.sigma_b_sq = v;
    }
    #[getter]
    fn sigma_u_sq(&self) -> Vec<f64> {
        self.inner.sigma_u_sq.clone()
    }
    #[setter]
    fn set_sigma_u_sq(&mut self, v: Vec<f64>) {
        self.inner.sigma_u_sq = v;
    }
    #[getter]
    fn gains_db(&self) -> f64 {
        self.inner.gains_db
    }
    #[setter]
    fn set_gains_db(&mut self, v: f64) {
        self.inner.gains_db = v;
    }
    /// Exponential correlation coefficient, 0 for i.i.d.
    #[getter]
    fn correlation(&self) -> f64 {
        match self.inner.correlation {
            Correlation::Uncorrelated => 0.0,
            Correlation::Exponential(c) => c,
        }
    }
    #[setter]
    fn set_correlation(&mut self, c: f64) {
        self.inner.correlation =
            if c == 0.0 { Correlation::Uncorrelated } else { Correlation::Exponential(c) };
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(m_b={}, m_r={}, k_users={}, p_max={})",
            self.inner.m_b, self.inner.m_r, self.inner.k_users, self.inner.p_max
        )
    }
}

#[pyclass(name = "PilotSequence", module = "ristx_py", skip_from_py_object)]
#[derive(Clone)]
struct PyPilot {
    inner: PilotSequence,
}

#[pymethods]
impl PyPilot {
    #[staticmethod]
    fn dft(m_r: usize, p_max: f64) -> Self {
        Self { inner: dft_pilot(m_r, p_max) }
    }

    /// Pilot from an `M_R x T` phase table (radians) and `T` amplitudes.
    #[staticmethod]
    fn from_phases(theta: Vec<Vec<f64>>, p: Vec<f64>) -> PyResult<Self> {
        let rows = theta.len();
        let cols = theta.first().map_or(0, |r| r.len());
        if theta.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("phase rows have different lengths"));
        }
        let m = nalgebra::DMatrix::from_fn(rows, cols, |i, j| theta[i][j]);
        PilotSequence::from_phases(&m, p).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<(Self, f64)> {
        let f = read_pilot(std::path::Path::new(path)).map_err(err)?;
        Ok((Self { inner: f.pilot }, f.p_max))
    }

    fn save(&self, path: &str, p_max: f64) -> PyResult<()> {
        write_pilot(std::path::Path::new(path), &self.inner, p_max).map_err(err)
    }

    fn theta(&self) -> Vec<Vec<f64>> {
        let t = self.inner.theta();
        (0..t.nrows()).map(|i| (0..t.ncols()).map(|j| t[(i, j)]).collect()).collect()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }
    #[getter]
    fn m_r(&self) -> usize {
        self.inner.m_r()
    }
    #[getter]
    fn slots(&self) -> usize {
        self.inner.slots()
    }

    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    fn is_feasible(&self, p_max: f64) -> bool {
        self.inner.is_feasible(p_max)
    }

    fn __repr__(&self) -> String {
        format!("PilotSequence(m_r={}, slots={}, energy={})", self.m_r(), self.slots(), self.energy())
    }
}

#[pyclass(name = "LinkParams", module = "ristx_py", skip_from_py_object, get_all, set_all)]
#[derive(Clone)]
struct PyLinkParams {
    rho_g: f64,
    rho_h: f64,
    sigma_b_sq: f64,
    sigma_u_sq: f64,
    m_r: f64,
    m_b: f64,
    p_max: f64,
}

impl PyLinkParams {
    fn to_core(&self) -> LinkParams {
        LinkParams {
            rho_g: self.rho_g,
            rho_h: self.rho_h,
            sigma_b_sq: self.sigma_b_sq,
            sigma_u_sq: self.sigma_u_sq,
            m_r: self.m_r,
            m_b: self.m_b,
            p_max: self.p_max,
        }
    }
}

#[pymethods]
impl PyLinkParams {
    #[new]
    fn new(rho_g: f64, rho_h: f64, sigma_b_sq: f64, sigma_u_sq: f64, m_r: f64, m_b: f64, p_max: f64) -> Self {
        Self { rho_g, rho_h, sigma_b_sq, sigma_u_sq, m_r, m_b, p_max }
    }

    #[staticmethod]
    #[pyo3(signature = (scenario, k = 0))]
    fn from_scenario(scenario: &PyScenario, k: usize) -> PyResult<Self> {
        let lp = LinkParams::from_scenario(&scenario.inner, k).map_err(err)?;
        Ok(Self {
            rho_g: lp.rho_g,
            rho_h: lp.rho_h,
            sigma_b_sq: lp.sigma_b_sq,
            sigma_u_sq: lp.sigma_u_sq,
            m_r: lp.m_r,
            m_b: lp.m_b,
            p_max: lp.p_max,
        })
    }
}

/// Outcome of either optimizer.
#[pyclass(name = "OptimizationResult", module = "ristx_py")]
struct PyOptResult {
    pilot: PilotSequence,
    objective: f64,
    objectives: Vec<f64>,
    converged: bool,
}

#[pymethods]
impl PyOptResult {
    #[getter]
    fn pilot(&self) -> PyPilot {
        PyPilot { inner: self.pilot.clone() }
    }
    #[getter]
    fn objective(&self) -> f64 {
        self.objective
    }
    /// Objective per outer iteration, starting point first.
    #[getter]
    fn objectives(&self) -> Vec<f64> {
        self.objectives.clone()
    }
    #[getter]
    fn converged(&self) -> bool {
        self.converged
    }
}

fn scheme(s: &str) -> PyResult<Scheme> {
    Scheme::parse(s).map_err(err)
}

#[pyfunction]
fn closed_form_nmse(scheme_name: &str, estimator_name: &str, lp: &PyLinkParams) -> PyResult<f64> {
    crlb::scheme_nmse(scheme(scheme_name)?, estimator(estimator_name)?, &lp.to_core()).map_err(err)
}

#[pyfunction]
fn crlb_ris_tx_nmse(lp: &PyLinkParams) -> PyResult<f64> {
    crlb::crlb_ris_tx_nmse(&lp.to_core(), CrlbMode::Averaged).map_err(err)
}

#[pyfunction]
fn crlb_cscd_nmse(lp: &PyLinkParams) -> PyResult<f64> {
    crlb::crlb_cscd_nmse(&lp.to_core()).map_err(err)
}

#[pyfunction]
fn watershed_mr(lp: &PyLinkParams) -> PyResult<f64> {
    crlb::watershed_mr(&lp.to_core()).map_err(err)
}

/// Objective with per-link LMMSE receivers.
#[pyfunction]
fn objective(scenario: &PyScenario, pilot: &PyPilot) -> PyResult<f64> {
    let stats = build_stats(&scenario.inner).map_err(err)?;
    let rx = lmmse_receivers(&pilot.inner, &stats).map_err(err)?;
    objective_p1(&pilot.inner, &stats, &rx).map_err(err)
}

/// Per-user NMSE, analytic when `trials == 0` and Monte Carlo otherwise.
/// Returns `(nmse, standard_errors)`; the errors are empty when analytic.
#[pyfunction]
#[pyo3(signature = (scenario, pilot, estimator_name = "lmmse", trials = 0))]
fn evaluate(
    scenario: &PyScenario,
    pilot: &PyPilot,
    estimator_name: &str,
    trials: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = &scenario.inner;
    let stats = build_stats(s).map_err(err)?;
    let rx = match estimator(estimator_name)? {
        Estimator::Lmmse => lmmse_receivers(&pilot.inner, &stats),
        Estimator::Ls => ls_receivers(&pilot.inner, s.m_b, s.k_users),
    }
    .map_err(err)?;
    let report = if trials == 0 {
        analytic_report(&pilot.inner, &stats, &rx)
    } else {
        simulate_training(&pilot.inner, &stats, &rx, s.seed, trials)
    }
    .map_err(err)?;
    let se = report
        .se
        .map(|v| v.iter().enumerate().map(|(k, e)| e / stats.cascaded_power(k)).collect())
        .unwrap_or_default();
    Ok((report.nmse, se))
}

#[pyfunction]
#[pyo3(name = "run_gd", signature = (scenario, max_outer_iters = None))]
fn py_run_gd(scenario: &PyScenario, max_outer_iters: Option<usize>) -> PyResult<PyOptResult> {
    let s = &scenario.inner;
    let stats = build_stats(s).map_err(err)?;
    let mut cfg = GdConfig { seed: s.seed, ..GdConfig::default() };
    if let Some(n) = max_outer_iters {
        cfg.max_outer_iters = n;
    }
    let r = run_gd(&stats, s.p_max, &cfg).map_err(err)?;
    Ok(PyOptResult {
        objective: r.objective(),
        objectives: r.objectives(),
        converged: r.converged,
        pilot: r.pilot,
    })
}

#[pyfunction]
#[pyo3(name = "run_pdd", signature = (scenario, max_outer = None))]
fn py_run_pdd(scenario: &PyScenario, max_outer: Option<usize>) -> PyResult<PyOptResult> {
    let s = &scenario.inner;
    let stats = build_stats(s).map_err(err)?;
    let mut cfg = PddConfig { seed: s.seed, ..PddConfig::default() };
    if let Some(n) = max_outer {
        cfg.max_outer = n;
    }
    let r = run_pdd(&stats, s.p_max, &cfg).map_err(err)?;
    let mut objectives = vec![r.initial_objective];
    objectives.extend(r.trace.iter().map(|it| it.objective));
    Ok(PyOptResult { objective: r.objective, objectives, converged: r.converged, pilot: r.pilot })
}

fn to_mat(rows: &[Vec<Complex64>]) -> PyResult<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

/// Solves `A X + X B = C` for nested lists of complex numbers.
#[pyfunction]
fn solve_sylvester(
    a: Vec<Vec<Complex64>>,
    b: Vec<Vec<Complex64>>,
    c: Vec<Vec<Complex64>>,
) -> PyResult<Vec<Vec<Complex64>>> {
    let x = ristx::cxlinalg::solve_sylvester(&to_mat(&a)?, &to_mat(&b)?, &to_mat(&c)?).map_err(err)?;
    Ok((0..x.nrows()).map(|i| (0..x.ncols()).map(|j| x[(i, j)]).collect()).collect())
}

#[pymodule]
fn ristx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyPilot>()?;
    m.add_class::<PyLinkParams>()?;
    m.add_class::<PyOptResult>()?;
    m.add_function(wrap_pyfunction!(closed_form_nmse, m)?)?;
    m.add_function(wrap_pyfunction!(crlb_ris_tx_nmse, m)?)?;
    m.add_function(wrap_pyfunction!(crlb_cscd_nmse, m)?)?;
    m.add_function(wrap_pyfunction!(watershed_mr, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_gd, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_pdd, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sylvester, m)?)?;
    Ok(())
}
