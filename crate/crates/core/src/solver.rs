//! Alternating maximization of the ergodic sum-rate.
//!
//! One outer iteration ("sweep") visits the users in ascending index order.
//! User `j` freezes everyone else, builds the interference `Y_j` it sees,
//! and replaces its policy with the exact best response
//!
//! ```text
//! P_j(v) = f_j^{-1}(λ_j / v) / v,     f_j(x) = E[1 / (1 + x + Y_j)],
//! ```
//!
//! with `λ_j` calibrated so the policy spends exactly its budget. Sweeps
//! repeat until the sum-rate stops increasing.

use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fading::{quantize, FadingDistribution, FadingGrid, DEFAULT_BINS};
use crate::interference::{
    aggregate, build_interference, invert_from, InterferenceDistribution, DEFAULT_MAX_ATOMS,
};
use crate::policy::{Multiplier, PowerPolicy};

/// Budget match sought by the bisection search, relative to the budget.
/// Tighter than any sensible `eps_power` so that budget noise stays far
/// below the sum-rate stopping threshold.
const BISECTION_POWER_TOL: f64 = 1e-12;

/// Floor applied to budgets when forming relative tolerances.
const BUDGET_FLOOR: f64 = 1e-12;

/// How the multiplier `λ_j` is tuned to meet a user's budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// Bracket by geometric expansion from the previous multiplier, then
    /// bisect in `ln λ`.
    #[default]
    Bisection,
    /// Walk `λ` in steps of `delta` toward the budget, halving the step
    /// each time the walk changes direction.
    PaperStep,
}

/// Feasible starting point of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    /// `P_i(v) = p_avg_i` at every gain.
    #[default]
    Constant,
    /// Silent below the median gain, a constant level above it.
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Quantization bins per continuous fading distribution.
    pub n_bins: usize,
    /// Atom cap for interference and sum-power distributions.
    pub max_atoms: usize,
    /// A sweep that raises the sum-rate by less than this (nats) ends the
    /// iteration, provided the KKT residual is also below `eps_kkt`.
    pub eps_rate: f64,
    /// Largest relative stationarity violation accepted at convergence.
    pub eps_kkt: f64,
    /// Relative tolerance on meeting each power budget.
    pub eps_power: f64,
    /// Initial multiplier step in [`LambdaMode::PaperStep`].
    pub delta: f64,
    pub lambda_mode: LambdaMode,
    pub max_outer_iters: usize,
    pub max_lambda_iters: usize,
    pub init: Initialization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_bins: DEFAULT_BINS,
            max_atoms: DEFAULT_MAX_ATOMS,
            eps_rate: 1e-7,
            eps_kkt: 1e-8,
            eps_power: 1e-6,
            delta: 0.01,
            lambda_mode: LambdaMode::Bisection,
            max_outer_iters: 500,
            max_lambda_iters: 200,
            init: Initialization::Constant,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} must be positive, got {v}"))
            }
        };
        positive("eps_rate", self.eps_rate)?;
        positive("eps_kkt", self.eps_kkt)?;
        positive("eps_power", self.eps_power)?;
        positive("delta", self.delta)?;
        if self.n_bins == 0 {
            return invalid("n_bins must be at least 1");
        }
        if self.max_atoms < 2 {
            return invalid("max_atoms must be at least 2");
        }
        if self.max_outer_iters == 0 || self.max_lambda_iters == 0 {
            return invalid("iteration caps must be at least 1");
        }
        Ok(())
    }
}

/// One transmitter: its fading law and average power budget (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub distribution: FadingDistribution,
    pub p_avg: f64,
}

impl UserSpec {
    pub fn new(distribution: FadingDistribution, p_avg: f64) -> Self {
        UserSpec { distribution, p_avg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub policies: Vec<PowerPolicy>,
    pub lambdas: Vec<Multiplier>,
    /// Sum-rate after initialization followed by one entry per sweep.
    pub rate_trajectory: Vec<f64>,
    pub capacity: f64,
    pub kkt_residual: f64,
    pub termination: Termination,
    pub outer_iters: usize,
}

/// Ergodic sum-rate `E ln(1 + Σ_i V_i P_i(V_i))` in nats.
pub fn sum_rate(policies: &[PowerPolicy], max_atoms: usize) -> Result<f64> {
    if policies.is_empty() {
        return invalid("sum_rate needs at least one user");
    }
    if max_atoms < 2 {
        return invalid("max_atoms must be at least 2");
    }
    Ok(aggregate(policies, max_atoms).expect(f64::ln_1p))
}

/// Best-response powers on `grid` against interference `y` at multiplier
/// `lambda`. Atoms are visited in increasing gain, and each inversion
/// starts from the previous root, which lies to its left.
fn respond(y: &InterferenceDistribution, f0: f64, lambda: f64, grid: &FadingGrid) -> Vec<f64> {
    let mut x_prev = 0.0;
    grid.gains()
        .map(|v| {
            if v <= 0.0 {
                return 0.0;
            }
            let x = invert_from(lambda / v, y, f0, x_prev);
            x_prev = x;
            x / v
        })
        .collect()
}

fn expected(grid: &FadingGrid, powers: &[f64]) -> f64 {
    grid.probs().zip(powers).map(|(p, x)| p * x).sum()
}

/// User `j`'s best response to the frozen `others` at a fixed multiplier.
pub fn best_response(
    j: usize,
    others: &[&PowerPolicy],
    lambda_j: f64,
    grid_j: &Arc<FadingGrid>,
    p_avg_j: f64,
    max_atoms: usize,
) -> Result<PowerPolicy> {
    if !(lambda_j > 0.0 && lambda_j.is_finite()) {
        return invalid(format!("user {j}: multiplier must be positive, got {lambda_j}"));
    }
    let y = build_interference(others, max_atoms)?;
    let f0 = y.f_and_slope(0.0).0;
    let powers = respond(&y, f0, lambda_j, grid_j);
    PowerPolicy::new(grid_j.clone(), powers, Multiplier::Finite(lambda_j), p_avg_j)
}

/// Finds the multiplier at which user `j`'s best response spends its
/// budget `p_avg_j`, starting from `warm` (or 1 when absent).
pub fn calibrate_lambda(
    j: usize,
    others: &[&PowerPolicy],
    grid_j: &Arc<FadingGrid>,
    p_avg_j: f64,
    warm: Option<f64>,
    config: &SolverConfig,
) -> Result<(Multiplier, PowerPolicy)> {
    if !(p_avg_j.is_finite() && p_avg_j >= 0.0) {
        return invalid(format!("user {j}: budget must be nonnegative, got {p_avg_j}"));
    }
    if p_avg_j == 0.0 {
        let policy = PowerPolicy::new(grid_j.clone(), vec![0.0; grid_j.len()], Multiplier::ZeroBudget, 0.0)?;
        return Ok((Multiplier::ZeroBudget, policy));
    }
    let y = build_interference(others, config.max_atoms)?;
    let mut search = LambdaSearch::new(j, &y, grid_j, p_avg_j, config);
    let start = warm.filter(|l| l.is_finite() && *l > 0.0).unwrap_or(1.0);
    let (lambda, powers) = match config.lambda_mode {
        LambdaMode::Bisection => search.bisection(start)?,
        LambdaMode::PaperStep => search.paper_step(start)?,
    };
    let policy = PowerPolicy::new(grid_j.clone(), powers, Multiplier::Finite(lambda), p_avg_j)?;
    Ok((Multiplier::Finite(lambda), policy))
}

/// Multiplier search state for one user against fixed interference.
struct LambdaSearch<'a> {
    user: usize,
    y: &'a InterferenceDistribution,
    f0: f64,
    grid: &'a FadingGrid,
    target: f64,
    tol: f64,
    max_iters: usize,
    delta: f64,
    evals: usize,
    best: Option<(f64, f64, Vec<f64>)>,
}

impl<'a> LambdaSearch<'a> {
    fn new(user: usize, y: &'a InterferenceDistribution, grid: &'a FadingGrid, target: f64, config: &SolverConfig) -> Self {
        LambdaSearch {
            user,
            y,
            f0: y.f_and_slope(0.0).0,
            grid,
            target,
            tol: config.eps_power * target.max(BUDGET_FLOOR),
            max_iters: config.max_lambda_iters,
            delta: config.delta,
            evals: 0,
            best: None,
        }
    }

    /// Signed budget surplus `P̄ - p_avg` at `lambda`.
    fn eval(&mut self, lambda: f64) -> Result<f64> {
        if self.evals >= self.max_iters {
            return Err(self.failure());
        }
        self.evals += 1;
        let powers = respond(self.y, self.f0, lambda, self.grid);
        let surplus = expected(self.grid, &powers) - self.target;
        if self.best.as_ref().is_none_or(|(_, s, _)| surplus.abs() < s.abs()) {
            self.best = Some((lambda, surplus, powers));
        }
        Ok(surplus)
    }

    fn failure(&self) -> Error {
        let (lambda, surplus) = self.best.as_ref().map_or((f64::NAN, f64::NAN), |(l, s, _)| (*l, *s));
        Error::Calibration { user: self.user, lambda, achieved: self.target + surplus, target: self.target }
    }

    fn finish(&mut self) -> Result<(f64, Vec<f64>)> {
        match self.best.take() {
            Some((lambda, surplus, powers)) if surplus.abs() <= self.tol => Ok((lambda, powers)),
            best => {
                self.best = best;
                Err(self.failure())
            }
        }
    }

    fn bisection(&mut self, start: f64) -> Result<(f64, Vec<f64>)> {
        let tight = BISECTION_POWER_TOL * self.target.max(BUDGET_FLOOR);
        let surplus = self.eval(start)?;
        if surplus.abs() <= tight {
            return self.finish();
        }
        // Average power decreases in λ: a surplus means λ is too small.
        let (mut lo, mut hi) = (start, start);
        let mut factor = 1.05_f64;
        if surplus > 0.0 {
            loop {
                lo = hi;
                hi *= factor;
                if self.eval(hi)? <= 0.0 {
                    break;
                }
                factor *= factor;
            }
        } else {
            loop {
                hi = lo;
                lo /= factor;
                if lo <= 0.0 {
                    return Err(self.failure());
                }
                if self.eval(lo)? >= 0.0 {
                    break;
                }
                factor *= factor;
            }
        }
        if self.best.as_ref().is_some_and(|(_, s, _)| s.abs() <= tight) {
            return self.finish();
        }
        while hi / lo - 1.0 > 4.0 * f64::EPSILON {
            let mid = (lo * hi).sqrt();
            let surplus = match self.eval(mid) {
                Ok(s) => s,
                Err(_) => break,
            };
            if surplus.abs() <= tight {
                break;
            }
            if surplus > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.finish()
    }

    fn paper_step(&mut self, start: f64) -> Result<(f64, Vec<f64>)> {
        let mut lambda = start;
        let mut step = self.delta;
        let mut last_dir = 0.0_f64;
        loop {
            let surplus = self.eval(lambda)?;
            if surplus.abs() <= self.tol {
                return self.finish();
            }
            // Too much power: raise λ. Too little: lower it.
            let dir = if surplus > 0.0 { 1.0 } else { -1.0 };
            if last_dir != 0.0 && dir != last_dir {
                step *= 0.5;
            }
            last_dir = dir;
            while dir < 0.0 && lambda - step <= 0.0 {
                step *= 0.5;
            }
            lambda += dir * step;
        }
    }
}

/// Solves the problem with the default initialization and cold multipliers.
pub fn am_solve(problem: &[UserSpec], config: &SolverConfig) -> Result<SolveResult> {
    am_solve_with(problem, config, None)
}

/// Like [`am_solve`], optionally warm-starting each user's multiplier
/// search from `warm_lambdas`.
pub fn am_solve_with(problem: &[UserSpec], config: &SolverConfig, warm_lambdas: Option<&[f64]>) -> Result<SolveResult> {
    config.validate()?;
    if problem.is_empty() {
        return invalid("at least one user is required");
    }
    let mut grids = Vec::with_capacity(problem.len());
    for (i, u) in problem.iter().enumerate() {
        if !(u.p_avg.is_finite() && u.p_avg >= 0.0) {
            return invalid(format!("user {i}: budget must be nonnegative, got {}", u.p_avg));
        }
        grids.push(Arc::new(quantize(&u.distribution, config.n_bins)?));
    }
    let budgets: Vec<f64> = problem.iter().map(|u| u.p_avg).collect();
    let initial = grids
        .iter()
        .zip(&budgets)
        .map(|(g, &p)| match config.init {
            Initialization::Constant => PowerPolicy::constant(g.clone(), p),
            Initialization::TwoLevel => PowerPolicy::two_level(g.clone(), p),
        })
        .collect::<Result<Vec<_>>>()?;
    am_solve_from(initial, config, warm_lambdas)
}

/// Runs the iteration from explicit feasible starting policies; budgets
/// and grids are taken from the policies.
pub fn am_solve_from(
    initial: Vec<PowerPolicy>,
    config: &SolverConfig,
    warm_lambdas: Option<&[f64]>,
) -> Result<SolveResult> {
    config.validate()?;
    let k = initial.len();
    if k == 0 {
        return invalid("at least one user is required");
    }
    if let Some(w) = warm_lambdas {
        if w.len() != k {
            return invalid(format!("{} warm multipliers given for {k} users", w.len()));
        }
    }
    if let Some(i) = initial.iter().position(|p| !p.within_budget()) {
        return invalid(format!("initial policy of user {i} exceeds its budget"));
    }

    let mut policies = initial;
    let mut lambdas: Vec<Multiplier> = match warm_lambdas {
        Some(w) => w.iter().map(|&l| Multiplier::Finite(l)).collect(),
        None => vec![Multiplier::Finite(1.0); k],
    };
    let mut trajectory = vec![sum_rate(&policies, config.max_atoms)?];
    let mut termination = Termination::MaxIters;
    let mut outer_iters = 0;
    let mut kkt = f64::INFINITY;

    for n in 1..=config.max_outer_iters {
        for j in 0..k {
            let others: Vec<&PowerPolicy> = policies.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, p)| p).collect();
            let grid = policies[j].grid().clone();
            let (lambda, policy) = calibrate_lambda(j, &others, &grid, policies[j].p_avg(), lambdas[j].finite(), config)?;
            lambdas[j] = lambda;
            policies[j] = policy;
        }
        let rate = sum_rate(&policies, config.max_atoms)?;
        let gain = rate - trajectory[trajectory.len() - 1];
        trajectory.push(rate);
        outer_iters = n;
        // The sum-rate is flat to second order at the optimum, so a small
        // gain alone does not certify stationarity.
        let lambda_values: Vec<f64> = lambdas.iter().map(|l| l.value()).collect();
        kkt = kkt_residual(&policies, &lambda_values, config.max_atoms)?;
        debug!("sweep {n}: sum-rate {rate:.12} nats (gain {gain:.3e}), kkt residual {kkt:.3e}");
        if gain < config.eps_rate && kkt <= config.eps_kkt {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(SolveResult {
        capacity: trajectory[trajectory.len() - 1],
        policies,
        lambdas,
        rate_trajectory: trajectory,
        kkt_residual: kkt,
        termination,
        outer_iters,
    })
}

/// Worst relative violation of the stationarity condition
/// `v f_j(v P_j(v)) = λ_j` over atoms with positive power, folded with
/// violations of `v f_j(0) <= λ_j` on silent atoms.
///
/// Users whose multiplier is infinite (zero budget) or not positive are
/// skipped.
pub fn kkt_residual(policies: &[PowerPolicy], lambdas: &[f64], max_atoms: usize) -> Result<f64> {
    if policies.len() != lambdas.len() {
        return invalid(format!("{} multipliers given for {} users", lambdas.len(), policies.len()));
    }
    let mut residual = 0.0_f64;
    for (j, (policy, &lambda)) in policies.iter().zip(lambdas).enumerate() {
        if !(lambda.is_finite() && lambda > 0.0) {
            continue;
        }
        let others: Vec<&PowerPolicy> = policies.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, p)| p).collect();
        let y = build_interference(&others, max_atoms)?;
        let f0 = y.f_and_slope(0.0).0;
        for (v, &p) in policy.grid().gains().zip(policy.powers()) {
            let violation = if p > 0.0 {
                ((v * y.f_and_slope(v * p).0 - lambda) / lambda).abs()
            } else {
                (v * f0 / lambda - 1.0).max(0.0)
            };
            residual = residual.max(violation);
        }
    }
    Ok(residual)
}
