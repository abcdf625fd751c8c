//! Reference solutions that share no code path with the alternating
//! maximization: closed-form waterfilling for one user, exhaustive search
//! over power levels for tiny discrete instances, and the constant-power
//! baseline.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fading::FadingGrid;
use crate::interference::DEFAULT_MAX_ATOMS;
use crate::policy::{Multiplier, PowerPolicy};
use crate::solver::sum_rate;

/// Single-user optimum `P(v) = (1/λ - 1/v)^+` with `λ` chosen by
/// bisection so that the policy spends `p_avg`. Returns the policy and
/// its ergodic rate in nats.
pub fn waterfilling_single_user(grid: &Arc<FadingGrid>, p_avg: f64) -> Result<(PowerPolicy, f64)> {
    if !(p_avg.is_finite() && p_avg >= 0.0) {
        return invalid(format!("budget must be nonnegative, got {p_avg}"));
    }
    let v_max = grid.gains().fold(0.0, f64::max);
    if p_avg == 0.0 || v_max == 0.0 {
        let policy = PowerPolicy::new(grid.clone(), vec![0.0; grid.len()], Multiplier::ZeroBudget, p_avg)?;
        return Ok((policy, 0.0));
    }

    let level = |lambda: f64, v: f64| if v > lambda { 1.0 / lambda - 1.0 / v } else { 0.0 };
    let spent = |lambda: f64| grid.expect(|v| level(lambda, v));

    // spent(v_max) = 0 < p_avg; shrink until the budget is exceeded.
    let mut hi = v_max;
    let mut lo = v_max;
    while spent(lo) < p_avg {
        hi = lo;
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if spent(mid) > p_avg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = if (spent(lo) - p_avg).abs() <= (spent(hi) - p_avg).abs() { lo } else { hi };
    let powers: Vec<f64> = grid.gains().map(|v| level(lambda, v)).collect();
    let capacity = grid.atoms().iter().zip(&powers).map(|(a, p)| a.prob * (a.gain * p).ln_1p()).sum();
    let policy = PowerPolicy::new(grid.clone(), powers, Multiplier::Finite(lambda), p_avg)?;
    Ok((policy, capacity))
}

/// Sum-rate of per-atom powers by explicit enumeration of every joint
/// fading outcome. Exponential in the number of users; meant for tiny
/// instances.
pub fn enumerated_sum_rate(grids: &[Arc<FadingGrid>], powers: &[Vec<f64>]) -> Result<f64> {
    if grids.len() != powers.len() || grids.iter().zip(powers).any(|(g, p)| g.len() != p.len()) {
        return invalid("powers must match the grids atom for atom");
    }
    let mut rate = 0.0;
    let mut index = vec![0usize; grids.len()];
    loop {
        let mut prob = 1.0;
        let mut received = 0.0;
        for (u, &k) in index.iter().enumerate() {
            let a = grids[u].atoms()[k];
            prob *= a.prob;
            received += a.gain * powers[u][k];
        }
        rate += prob * received.ln_1p();

        let mut u = 0;
        loop {
            if u == grids.len() {
                return Ok(rate);
            }
            index[u] += 1;
            if index[u] < grids[u].len() {
                break;
            }
            index[u] = 0;
            u += 1;
        }
    }
}

/// A tiny discrete instance for [`brute_force_discrete`].
#[derive(Debug, Clone)]
pub struct BruteForceSpec {
    pub grids: Vec<Arc<FadingGrid>>,
    pub power_grid_step: f64,
    pub power_max: f64,
}

impl BruteForceSpec {
    pub const MAX_USERS: usize = 3;
    pub const MAX_ATOMS_PER_USER: usize = 3;
    pub const MAX_TOTAL_ATOMS: usize = 8;

    pub fn validate(&self, budgets: &[f64]) -> Result<()> {
        let k = self.grids.len();
        if k == 0 || k > Self::MAX_USERS {
            return invalid(format!("brute force supports 1 to {} users, got {k}", Self::MAX_USERS));
        }
        if let Some(g) = self.grids.iter().find(|g| g.len() > Self::MAX_ATOMS_PER_USER) {
            return invalid(format!(
                "brute force supports at most {} atoms per user, got {}",
                Self::MAX_ATOMS_PER_USER,
                g.len()
            ));
        }
        let total: usize = self.grids.iter().map(|g| g.len()).sum();
        if total > Self::MAX_TOTAL_ATOMS {
            return invalid(format!(
                "brute force supports at most {} atoms in total, got {total}",
                Self::MAX_TOTAL_ATOMS
            ));
        }
        if !(self.power_grid_step.is_finite() && self.power_grid_step > 0.0) {
            return invalid("power_grid_step must be positive");
        }
        if budgets.len() != k {
            return invalid(format!("{} budgets given for {k} users", budgets.len()));
        }
        if let Some(b) = budgets.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return invalid(format!("budgets must be nonnegative, got {b}"));
        }
        if budgets.iter().any(|&b| b > self.power_max) {
            return invalid("power_max must be at least every budget");
        }
        Ok(())
    }
}

struct Search<'a> {
    spec: &'a BruteForceSpec,
    budgets: &'a [f64],
    levels: usize,
    outcomes: Vec<(f64, Vec<usize>)>,
    powers: Vec<Vec<f64>>,
    used: Vec<f64>,
    best: (f64, Vec<Vec<f64>>),
}

impl Search<'_> {
    fn rate(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|(prob, idx)| {
                let received: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(u, &k)| self.spec.grids[u].atoms()[k].gain * self.powers[u][k])
                    .sum();
                prob * received.ln_1p()
            })
            .sum()
    }

    /// Assigns atom `k` of user `u`; the last atom of each user takes
    /// whatever budget is left.
    fn visit(&mut self, u: usize, k: usize) {
        if u == self.spec.grids.len() {
            let rate = self.rate();
            if rate > self.best.0 {
                self.best = (rate, self.powers.clone());
            }
            return;
        }
        let grid = &self.spec.grids[u];
        let last = grid.len() - 1;
        if k == last {
            let prob = grid.atoms()[last].prob;
            self.powers[u][last] = ((self.budgets[u] - self.used[u]) / prob).max(0.0);
            self.visit(u + 1, 0);
            return;
        }
        let prob = grid.atoms()[k].prob;
        let base = self.used[u];
        for level in 0..self.levels {
            let p = level as f64 * self.spec.power_grid_step;
            if base + prob * p > self.budgets[u] * (1.0 + 1e-12) {
                break;
            }
            self.powers[u][k] = p;
            self.used[u] = base + prob * p;
            self.visit(u, k + 1);
        }
        self.used[u] = base;
        self.powers[u][k] = 0.0;
    }
}

/// Exhaustive search over per-atom powers in `{0, step, 2 step, ..,
/// power_max}`, maximizing the enumerated sum-rate under the budgets.
///
/// The objective increases in every power, so each budget is spent in
/// full at the optimum: all atoms but the strongest range over the power
/// grid and the strongest atom absorbs the remaining budget. Returns the
/// best per-user powers and their sum-rate in nats.
pub fn brute_force_discrete(spec: &BruteForceSpec, budgets: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
    spec.validate(budgets)?;
    let levels = (spec.power_max / spec.power_grid_step + 1e-9).floor() as usize + 1;

    let mut outcomes = Vec::new();
    let mut index = vec![0usize; spec.grids.len()];
    'outer: loop {
        let prob = index.iter().enumerate().map(|(u, &k)| spec.grids[u].atoms()[k].prob).product();
        outcomes.push((prob, index.clone()));
        for u in 0..index.len() {
            index[u] += 1;
            if index[u] < spec.grids[u].len() {
                continue 'outer;
            }
            index[u] = 0;
        }
        break;
    }

    let powers: Vec<Vec<f64>> = spec.grids.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut search = Search {
        spec,
        budgets,
        levels,
        outcomes,
        used: vec![0.0; spec.grids.len()],
        best: (f64::NEG_INFINITY, powers.clone()),
        powers,
    };
    search.visit(0, 0);
    let (rate, best) = search.best;
    Ok((best, rate))
}

/// Sum-rate when every user transmits its budget at every gain.
pub fn constant_power_rate(grids: &[Arc<FadingGrid>], budgets: &[f64]) -> Result<f64> {
    if grids.len() != budgets.len() {
        return invalid(format!("{} budgets given for {} users", budgets.len(), grids.len()));
    }
    let policies = grids
        .iter()
        .zip(budgets)
        .map(|(g, &p)| PowerPolicy::constant(g.clone(), p))
        .collect::<Result<Vec<_>>>()?;
    sum_rate(&policies, DEFAULT_MAX_ATOMS)
}
