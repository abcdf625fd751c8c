//! Python module `decmac`: fading laws, the alternating-maximization
//! solver and its oracles.
//!
//! ```python
//! import decmac
//! r = decmac.solve([(decmac.Fading.exponential(1.0), 1.0)] * 2)
//! print(r.capacity, r.policies[0].powers[-1])
//! ```

use std::sync::Arc;

use decmac::{
    FadingDistribution, FadingGrid, InterferenceDistribution, Initialization, LambdaMode, Mass, Multiplier, PowerPolicy,
    SolverConfig, Termination, UserSpec,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(decmac, CalibrationError, PyException, "The multiplier search could not meet a power budget.");

fn to_py(e: decmac::Error) -> PyErr {
    match e {
        decmac::Error::InvalidArgument(msg) => PyValueError::new_err(msg),
        e @ decmac::Error::Calibration { .. } => CalibrationError::new_err(e.to_string()),
    }
}

fn grid_from(gains: Vec<f64>, probs: Vec<f64>) -> PyResult<Arc<FadingGrid>> {
    if gains.len() != probs.len() {
        return Err(PyValueError::new_err("gains and probs must have the same length"));
    }
    let atoms = gains.into_iter().zip(probs).map(|(g, p)| decmac::Atom::new(g, p)).collect();
    FadingGrid::from_atoms(atoms).map(Arc::new).map_err(to_py)
}

fn interference_from(values: Vec<f64>, probs: Vec<f64>) -> PyResult<InterferenceDistribution> {
    if values.len() != probs.len() {
        return Err(PyValueError::new_err("values and probs must have the same length"));
    }
    let atoms = values.into_iter().zip(probs).map(|(y, q)| Mass::new(y, q)).collect();
    InterferenceDistribution::from_atoms(atoms).map_err(to_py)
}

/// Distribution of a user's fading power gain.
#[pyclass(name = "Fading", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFading(FadingDistribution);

#[pymethods]
impl PyFading {
    /// Rayleigh fading with mean power gain `mean`.
    #[staticmethod]
    #[pyo3(signature = (mean = 1.0))]
    fn exponential(mean: f64) -> PyResult<Self> {
        let d = FadingDistribution::Exponential { mean };
        d.validate().map_err(to_py)?;
        Ok(PyFading(d))
    }

    #[staticmethod]
    fn deterministic(value: f64) -> PyResult<Self> {
        let d = FadingDistribution::Deterministic { value };
        d.validate().map_err(to_py)?;
        Ok(PyFading(d))
    }

    /// Finite law with strictly increasing `gains`.
    #[staticmethod]
    fn discrete(gains: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        let grid = grid_from(gains, probs)?;
        Ok(PyFading(FadingDistribution::Discrete { atoms: grid.atoms().to_vec() }))
    }

    /// `(gains, probs)` of the solver's grid for this law.
    #[pyo3(signature = (n_bins = decmac::fading::DEFAULT_BINS))]
    fn quantize(&self, n_bins: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let g = decmac::quantize(&self.0, n_bins).map_err(to_py)?;
        Ok((g.gains().collect(), g.probs().collect()))
    }

    fn __repr__(&self) -> String {
        match &self.0 {
            FadingDistribution::Exponential { mean } => format!("Fading.exponential({mean})"),
            FadingDistribution::Deterministic { value } => format!("Fading.deterministic({value})"),
            FadingDistribution::Discrete { atoms } => format!("Fading.discrete(<{} atoms>)", atoms.len()),
        }
    }
}

/// Solver settings; see the Rust `SolverConfig` for their meaning.
#[pyclass(name = "SolverConfig", skip_from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    #[pyo3(get, set)]
    n_bins: usize,
    #[pyo3(get, set)]
    max_atoms: usize,
    #[pyo3(get, set)]
    eps_rate: f64,
    #[pyo3(get, set)]
    eps_kkt: f64,
    #[pyo3(get, set)]
    eps_power: f64,
    #[pyo3(get, set)]
    delta: f64,
    /// `"bisection"` or `"paper-step"`.
    #[pyo3(get, set)]
    lambda_mode: String,
    #[pyo3(get, set)]
    max_outer_iters: usize,
    #[pyo3(get, set)]
    max_lambda_iters: usize,
    /// `"constant"` or `"two-level"`.
    #[pyo3(get, set)]
    init: String,
}

impl PySolverConfig {
    fn to_config(&self) -> PyResult<SolverConfig> {
        let lambda_mode = match self.lambda_mode.as_str() {
            "bisection" => LambdaMode::Bisection,
            "paper-step" => LambdaMode::PaperStep,
            other => return Err(PyValueError::new_err(format!("unknown lambda_mode {other:?}"))),
        };
        let init = match self.init.as_str() {
            "constant" => Initialization::Constant,
            "two-level" => Initialization::TwoLevel,
            other => return Err(PyValueError::new_err(format!("unknown init {other:?}"))),
        };
        let config = SolverConfig {
            n_bins: self.n_bins,
            max_atoms: self.max_atoms,
            eps_rate: self.eps_rate,
            eps_kkt: self.eps_kkt,
            eps_power: self.eps_power,
            delta: self.delta,
            lambda_mode,
            max_outer_iters: self.max_outer_iters,
            max_lambda_iters: self.max_lambda_iters,
            init,
        };
        config.validate().map_err(to_py)?;
        Ok(config)
    }
}

#[pymethods]
impl PySolverConfig {
    /// Keyword arguments override the defaults.
    #[new]
    #[pyo3(signature = (
        *, n_bins = None, max_atoms = None, eps_rate = None, eps_kkt = None, eps_power = None, delta = None,
        lambda_mode = None, max_outer_iters = None, max_lambda_iters = None, init = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_bins: Option<usize>,
        max_atoms: Option<usize>,
        eps_rate: Option<f64>,
        eps_kkt: Option<f64>,
        eps_power: Option<f64>,
        delta: Option<f64>,
        lambda_mode: Option<String>,
        max_outer_iters: Option<usize>,
        max_lambda_iters: Option<usize>,
        init: Option<String>,
    ) -> PyResult<Self> {
        let d = SolverConfig::default();
        let config = PySolverConfig {
            n_bins: n_bins.unwrap_or(d.n_bins),
            max_atoms: max_atoms.unwrap_or(d.max_atoms),
            eps_rate: eps_rate.unwrap_or(d.eps_rate),
            eps_kkt: eps_kkt.unwrap_or(d.eps_kkt),
            eps_power: eps_power.unwrap_or(d.eps_power),
            delta: delta.unwrap_or(d.delta),
            lambda_mode: lambda_mode.unwrap_or_else(|| "bisection".into()),
            max_outer_iters: max_outer_iters.unwrap_or(d.max_outer_iters),
            max_lambda_iters: max_lambda_iters.unwrap_or(d.max_lambda_iters),
            init: init.unwrap_or_else(|| "constant".into()),
        };
        config.to_config()?;
        Ok(config)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolverConfig(n_bins={}, max_atoms={}, eps_rate={:e}, eps_kkt={:e}, eps_power={:e}, delta={}, \
             lambda_mode={:?}, max_outer_iters={}, max_lambda_iters={}, init={:?})",
            self.n_bins,
            self.max_atoms,
            self.eps_rate,
            self.eps_kkt,
            self.eps_power,
            self.delta,
            self.lambda_mode,
            self.max_outer_iters,
            self.max_lambda_iters,
            self.init
        )
    }
}

/// One user's power as a function of its fading gain.
#[pyclass(name = "Policy", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPolicy(PowerPolicy);

#[pymethods]
impl PyPolicy {
    /// Policy with explicit per-atom powers on a discrete grid.
    #[new]
    fn new(gains: Vec<f64>, probs: Vec<f64>, powers: Vec<f64>, p_avg: f64) -> PyResult<Self> {
        let grid = grid_from(gains, probs)?;
        PowerPolicy::new(grid, powers, Multiplier::Finite(1.0), p_avg).map(PyPolicy).map_err(to_py)
    }

    #[getter]
    fn gains(&self) -> Vec<f64> {
        self.0.grid().gains().collect()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.grid().probs().collect()
    }

    #[getter]
    fn powers(&self) -> Vec<f64> {
        self.0.powers().to_vec()
    }

    /// Budget multiplier; `inf` for a zero budget.
    #[getter]
    fn multiplier(&self) -> f64 {
        self.0.lambda().value()
    }

    #[getter]
    fn p_avg(&self) -> f64 {
        self.0.p_avg()
    }

    fn average_power(&self) -> f64 {
        self.0.average_power()
    }

    fn is_monotone(&self) -> bool {
        self.0.check_monotone().monotone
    }

    fn has_single_threshold(&self) -> bool {
        self.0.has_single_threshold()
    }

    fn __len__(&self) -> usize {
        self.0.powers().len()
    }

    fn __repr__(&self) -> String {
        format!("Policy(<{} atoms>, p_avg={})", self.0.powers().len(), self.0.p_avg())
    }
}

#[pyclass(name = "SolveResult", frozen)]
struct PySolveResult(decmac::SolveResult);

#[pymethods]
impl PySolveResult {
    #[getter]
    fn policies(&self) -> Vec<PyPolicy> {
        self.0.policies.iter().cloned().map(PyPolicy).collect()
    }

    /// Budget multipliers; `inf` for zero budgets.
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.0.lambdas.iter().map(|l| l.value()).collect()
    }

    /// Sum-rate in nats after initialization and after every sweep.
    #[getter]
    fn rate_trajectory(&self) -> Vec<f64> {
        self.0.rate_trajectory.clone()
    }

    #[getter]
    fn capacity(&self) -> f64 {
        self.0.capacity
    }

    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.0.kkt_residual
    }

    /// `"converged"` or `"max_iters"`.
    #[getter]
    fn termination(&self) -> &'static str {
        match self.0.termination {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
        }
    }

    #[getter]
    fn outer_iters(&self) -> usize {
        self.0.outer_iters
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(capacity={}, outer_iters={}, termination={:?})",
            self.0.capacity,
            self.0.outer_iters,
            self.termination()
        )
    }
}

fn config_or_default(config: Option<PyRef<'_, PySolverConfig>>) -> PyResult<SolverConfig> {
    config.map_or_else(|| Ok(SolverConfig::default()), |c| c.to_config())
}

fn policies_of(policies: &[PyRef<'_, PyPolicy>]) -> Vec<PowerPolicy> {
    policies.iter().map(|p| p.0.clone()).collect()
}

/// Ergodic sum-capacity of users given as `(Fading, p_avg)` pairs, with
/// linear budgets. `warm_lambdas` seeds the multiplier searches.
#[pyfunction]
#[pyo3(signature = (users, config = None, warm_lambdas = None))]
fn solve(
    py: Python<'_>,
    users: Vec<(PyRef<'_, PyFading>, f64)>,
    config: Option<PyRef<'_, PySolverConfig>>,
    warm_lambdas: Option<Vec<f64>>,
) -> PyResult<PySolveResult> {
    let config = config_or_default(config)?;
    let problem: Vec<UserSpec> = users.iter().map(|(f, p)| UserSpec::new(f.0.clone(), *p)).collect();
    py.detach(|| decmac::am_solve_with(&problem, &config, warm_lambdas.as_deref()))
        .map(PySolveResult)
        .map_err(to_py)
}

/// `E ln(1 + sum_i V_i P_i(V_i))` in nats.
#[pyfunction]
#[pyo3(signature = (policies, max_atoms = decmac::interference::DEFAULT_MAX_ATOMS))]
fn sum_rate(policies: Vec<PyRef<'_, PyPolicy>>, max_atoms: usize) -> PyResult<f64> {
    decmac::sum_rate(&policies_of(&policies), max_atoms).map_err(to_py)
}

/// Largest relative violation of the stationarity conditions.
#[pyfunction]
#[pyo3(signature = (policies, lambdas, max_atoms = decmac::interference::DEFAULT_MAX_ATOMS))]
fn kkt_residual(policies: Vec<PyRef<'_, PyPolicy>>, lambdas: Vec<f64>, max_atoms: usize) -> PyResult<f64> {
    decmac::kkt_residual(&policies_of(&policies), &lambdas, max_atoms).map_err(to_py)
}

/// `(monotone, first_violation)` for per-atom powers on a sorted grid.
#[pyfunction]
fn check_monotone(powers: Vec<f64>) -> (bool, Option<usize>) {
    let m = decmac::check_monotone(&powers);
    (m.monotone, m.violation)
}

/// `E[1 / (1 + x + Y)]` for the discrete law of `Y`.
#[pyfunction]
fn eval_f(x: f64, values: Vec<f64>, probs: Vec<f64>) -> PyResult<f64> {
    decmac::eval_f(x, &interference_from(values, probs)?).map_err(to_py)
}

/// The `x >= 0` with `eval_f(x) = target`, or 0 when `target >= eval_f(0)`.
#[pyfunction]
fn invert_f(target: f64, values: Vec<f64>, probs: Vec<f64>) -> PyResult<f64> {
    decmac::invert_f(target, &interference_from(values, probs)?).map_err(to_py)
}

/// Single-user waterfilling: `(powers, capacity_nats)`.
#[pyfunction]
fn waterfilling(gains: Vec<f64>, probs: Vec<f64>, p_avg: f64) -> PyResult<(Vec<f64>, f64)> {
    let grid = grid_from(gains, probs)?;
    let (policy, capacity) = decmac::waterfilling_single_user(&grid, p_avg).map_err(to_py)?;
    Ok((policy.powers().to_vec(), capacity))
}

/// Exhaustive search on tiny discrete instances: `(powers, capacity_nats)`.
/// `grids` holds one `(gains, probs)` pair per user.
#[pyfunction]
#[pyo3(signature = (grids, budgets, power_grid_step = 0.01, power_max = 2.0))]
fn brute_force(
    py: Python<'_>,
    grids: Vec<(Vec<f64>, Vec<f64>)>,
    budgets: Vec<f64>,
    power_grid_step: f64,
    power_max: f64,
) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let grids = grids.into_iter().map(|(g, p)| grid_from(g, p)).collect::<PyResult<Vec<_>>>()?;
    let spec = decmac::BruteForceSpec { grids, power_grid_step, power_max };
    py.detach(|| decmac::brute_force_discrete(&spec, &budgets)).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "decmac")]
fn decmac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFading>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PySolveResult>()?;
    m.add("CalibrationError", m.py().get_type::<CalibrationError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sum_rate, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_residual, m)?)?;
    m.add_function(wrap_pyfunction!(check_monotone, m)?)?;
    m.add_function(wrap_pyfunction!(eval_f, m)?)?;
    m.add_function(wrap_pyfunction!(invert_f, m)?)?;
    m.add_function(wrap_pyfunction!(waterfilling, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    Ok(())
}
