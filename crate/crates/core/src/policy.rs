//! Per-user power-control policies sampled on the user's fading grid.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fading::FadingGrid;

/// Relative slack allowed on the average-power budget.
pub const BUDGET_SLACK: f64 = 1e-6;

/// Tolerance on successive differences in [`check_monotone`].
pub const MONOTONE_TOL: f64 = 1e-9;

/// Lagrange multiplier attached to a user's power budget.
///
/// A zero budget has no finite multiplier: the user is silent at every
/// gain, which is what an infinite price on power would produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Finite(f64),
    ZeroBudget,
}

impl Multiplier {
    /// Numeric value, `+inf` for [`Multiplier::ZeroBudget`].
    pub fn value(self) -> f64 {
        match self {
            Multiplier::Finite(l) => l,
            Multiplier::ZeroBudget => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Multiplier::Finite(l) => Some(l),
            Multiplier::ZeroBudget => None,
        }
    }
}

/// Transmit power `P_i(v)` for every atom of the user's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPolicy {
    grid: Arc<FadingGrid>,
    powers: Vec<f64>,
    lambda: Multiplier,
    p_avg: f64,
}

impl PowerPolicy {
    pub fn new(grid: Arc<FadingGrid>, powers: Vec<f64>, lambda: Multiplier, p_avg: f64) -> Result<Self> {
        if powers.len() != grid.len() {
            return invalid(format!(
                "policy has {} powers but its grid has {} atoms",
                powers.len(),
                grid.len()
            ));
        }
        if let Some(k) = powers.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return invalid(format!("power at atom {k} must be finite and nonnegative, got {}", powers[k]));
        }
        if !(p_avg.is_finite() && p_avg >= 0.0) {
            return invalid(format!("power budget must be nonnegative, got {p_avg}"));
        }
        if let Multiplier::Finite(l) = lambda {
            if !(l.is_finite() && l >= 0.0) {
                return invalid(format!("multiplier must be nonnegative, got {l}"));
            }
        }
        Ok(PowerPolicy { grid, powers, lambda, p_avg })
    }

    /// Constant power `p_avg` at every gain; always meets its budget.
    pub fn constant(grid: Arc<FadingGrid>, p_avg: f64) -> Result<Self> {
        let powers = vec![p_avg; grid.len()];
        Self::new(grid, powers, Multiplier::Finite(1.0), p_avg)
    }

    /// Silent below the median gain and a constant level above it, scaled
    /// to spend exactly `p_avg`. A grid whose whole mass sits at or below
    /// the median falls back to constant power.
    pub fn two_level(grid: Arc<FadingGrid>, p_avg: f64) -> Result<Self> {
        let mut cumulative = 0.0;
        let mut first_on = grid.len();
        for (k, a) in grid.atoms().iter().enumerate() {
            if cumulative + a.prob > 0.5 + 1e-12 {
                first_on = k;
                break;
            }
            cumulative += a.prob;
        }
        let on_mass: f64 = grid.atoms()[first_on.min(grid.len())..].iter().map(|a| a.prob).sum();
        if first_on == 0 || on_mass <= 0.0 {
            return Self::constant(grid, p_avg);
        }
        let level = p_avg / on_mass;
        let powers = (0..grid.len()).map(|k| if k < first_on { 0.0 } else { level }).collect();
        Self::new(grid, powers, Multiplier::Finite(1.0), p_avg)
    }

    pub fn grid(&self) -> &Arc<FadingGrid> {
        &self.grid
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn lambda(&self) -> Multiplier {
        self.lambda
    }

    pub fn p_avg(&self) -> f64 {
        self.p_avg
    }

    pub fn average_power(&self) -> f64 {
        self.grid.atoms().iter().zip(&self.powers).map(|(a, p)| a.prob * p).sum()
    }

    /// Whether the average power stays within the budget plus [`BUDGET_SLACK`].
    pub fn within_budget(&self) -> bool {
        self.average_power() <= self.p_avg * (1.0 + BUDGET_SLACK)
    }

    /// Received-power samples `(v_k P(v_k), p_k)`.
    pub fn received(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.atoms().iter().zip(&self.powers).map(|(a, p)| (a.gain * p, a.prob))
    }

    pub fn check_monotone(&self) -> Monotonicity {
        check_monotone(&self.powers)
    }

    /// True when the zero-power atoms form a prefix of the sorted grid,
    /// i.e. the user is silent below one threshold gain and active above it.
    pub fn has_single_threshold(&self) -> bool {
        let first_on = self.powers.iter().position(|&p| p > 0.0).unwrap_or(self.powers.len());
        self.powers[first_on..].iter().all(|&p| p > 0.0)
    }
}

/// Average power `Σ p_k P(v_k)` of a policy.
pub fn average_power(policy: &PowerPolicy) -> f64 {
    policy.average_power()
}

/// Outcome of [`check_monotone`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monotonicity {
    pub monotone: bool,
    /// First index whose power drops below the previous positive power.
    pub violation: Option<usize>,
}

/// Checks that the positive entries of `powers` (ordered by increasing
/// gain) are nondecreasing, up to [`MONOTONE_TOL`].
pub fn check_monotone(powers: &[f64]) -> Monotonicity {
    let mut last_positive: Option<f64> = None;
    for (k, &p) in powers.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        if let Some(prev) = last_positive {
            if p - prev < -MONOTONE_TOL {
                return Monotonicity { monotone: false, violation: Some(k) };
            }
        }
        last_positive = Some(p);
    }
    Monotonicity { monotone: true, violation: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{quantize, Atom, FadingDistribution};

    fn two_state() -> Arc<FadingGrid> {
        Arc::new(FadingGrid::from_atoms(vec![Atom::new(0.5, 0.5), Atom::new(1.5, 0.5)]).unwrap())
    }

    #[test]
    fn average_power_examples() {
        let grid = Arc::new(quantize(&FadingDistribution::rayleigh(), 50).unwrap());
        let constant = PowerPolicy::constant(grid, 3.0).unwrap();
        assert!((average_power(&constant) - 3.0).abs() < 1e-12);

        let p = PowerPolicy::new(two_state(), vec![0.0, 2.0], Multiplier::Finite(1.0), 1.0).unwrap();
        assert_eq!(average_power(&p), 1.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(PowerPolicy::new(two_state(), vec![1.0], Multiplier::Finite(1.0), 1.0).is_err());
        assert!(PowerPolicy::new(two_state(), vec![1.0, -0.1], Multiplier::Finite(1.0), 1.0).is_err());
    }

    #[test]
    fn monotone_examples() {
        assert_eq!(check_monotone(&[0.0, 0.0, 1.0, 2.0]), Monotonicity { monotone: true, violation: None });
        assert_eq!(check_monotone(&[0.0, 2.0, 1.0, 3.0]), Monotonicity { monotone: false, violation: Some(2) });
        assert!(check_monotone(&[1.0, 1.0 - 1e-12, 2.0]).monotone);
    }

    #[test]
    fn two_level_is_feasible_and_thresholded() {
        let grid = Arc::new(quantize(&FadingDistribution::rayleigh(), 200).unwrap());
        let p = PowerPolicy::two_level(grid, 1.0).unwrap();
        assert!((p.average_power() - 1.0).abs() < 1e-12);
        assert!(p.has_single_threshold());
        assert_eq!(p.powers()[0], 0.0);
        assert_eq!(p.powers().iter().filter(|&&x| x == 0.0).count(), 100);

        let single = Arc::new(FadingGrid::from_atoms(vec![Atom::new(1.0, 1.0)]).unwrap());
        let p = PowerPolicy::two_level(single, 2.0).unwrap();
        assert_eq!(p.powers(), &[2.0]);
    }

    #[test]
    fn threshold_shape() {
        let g = Arc::new(
            FadingGrid::from_atoms(vec![Atom::new(0.5, 0.25), Atom::new(1.0, 0.25), Atom::new(2.0, 0.5)]).unwrap(),
        );
        let ok = PowerPolicy::new(g.clone(), vec![0.0, 1.0, 1.5], Multiplier::Finite(1.0), 1.0).unwrap();
        assert!(ok.has_single_threshold());
        let gap = PowerPolicy::new(g, vec![1.0, 0.0, 1.5], Multiplier::Finite(1.0), 1.0).unwrap();
        assert!(!gap.has_single_threshold());
    }
}
