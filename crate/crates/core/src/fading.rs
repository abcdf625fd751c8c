//! Fading-power distributions and their quantization into finite grids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Upper quantile at which unbounded supports are truncated. The tail
/// beyond it is folded into the last bin.
pub const TRUNCATION_QUANTILE: f64 = 1.0 - 1e-6;

/// Default number of quantization bins per user.
pub const DEFAULT_BINS: usize = 200;

const DISCRETE_MASS_TOL: f64 = 1e-12;
const GRID_MASS_TOL: f64 = 1e-10;

/// One point of a discrete fading distribution: a linear power gain and
/// its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub gain: f64,
    pub prob: f64,
}

impl Atom {
    pub fn new(gain: f64, prob: f64) -> Self {
        Atom { gain, prob }
    }
}

/// Distribution of one user's fading power gain `V = |H|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FadingDistribution {
    /// Rayleigh fading in amplitude, i.e. exponential in power.
    Exponential { mean: f64 },
    /// No fading: the gain is always `value`.
    Deterministic { value: f64 },
    /// Finite distribution; gains strictly increasing, masses summing to one.
    Discrete { atoms: Vec<Atom> },
}

impl FadingDistribution {
    /// Normalized Rayleigh fading, `dΨ(v) = e^{-v} dv`.
    pub fn rayleigh() -> Self {
        FadingDistribution::Exponential { mean: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FadingDistribution::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return invalid(format!("exponential mean must be positive, got {mean}"));
                }
            }
            FadingDistribution::Deterministic { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return invalid(format!("deterministic gain must be nonnegative, got {value}"));
                }
            }
            FadingDistribution::Discrete { atoms } => {
                validate_atoms(atoms, DISCRETE_MASS_TOL)?;
            }
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, FadingDistribution::Exponential { .. })
    }
}

fn validate_atoms(atoms: &[Atom], mass_tol: f64) -> Result<()> {
    if atoms.is_empty() {
        return invalid("distribution needs at least one atom");
    }
    let mut total = 0.0;
    for (k, a) in atoms.iter().enumerate() {
        if !(a.gain.is_finite() && a.gain >= 0.0) {
            return invalid(format!("atom {k}: gain must be finite and nonnegative, got {}", a.gain));
        }
        if !(a.prob > 0.0 && a.prob <= 1.0) {
            return invalid(format!("atom {k}: probability must lie in (0, 1], got {}", a.prob));
        }
        if k > 0 && a.gain <= atoms[k - 1].gain {
            return invalid(format!("atom {k}: gains must be strictly increasing"));
        }
        total += a.prob;
    }
    if (total - 1.0).abs() > mass_tol {
        return invalid(format!("atom probabilities sum to {total}, expected 1"));
    }
    Ok(())
}

/// A user's quantized fading distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingGrid {
    atoms: Vec<Atom>,
    source: FadingDistribution,
}

impl FadingGrid {
    pub fn new(atoms: Vec<Atom>, source: FadingDistribution) -> Result<Self> {
        validate_atoms(&atoms, GRID_MASS_TOL)?;
        Ok(FadingGrid { atoms, source })
    }

    /// Grid that is its own source distribution.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        let source = FadingDistribution::Discrete { atoms: atoms.clone() };
        Self::new(atoms, source)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn source(&self) -> &FadingDistribution {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.gain)
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.prob)
    }

    /// Expectation of `g(V)` under the grid.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.prob * g(a.gain)).sum()
    }
}

/// Quantizes `dist` into a finite grid.
///
/// Continuous distributions are split into `n_bins` equiprobable bins over
/// the support truncated at [`TRUNCATION_QUANTILE`]; each bin is
/// represented by the conditional mean of the distribution on it, so the
/// first moment is kept bin by bin. Deterministic distributions become a
/// single atom and discrete ones pass through unchanged.
pub fn quantize(dist: &FadingDistribution, n_bins: usize) -> Result<FadingGrid> {
    if n_bins == 0 {
        return invalid("n_bins must be at least 1");
    }
    dist.validate()?;
    let atoms = match dist {
        FadingDistribution::Deterministic { value } => vec![Atom::new(*value, 1.0)],
        FadingDistribution::Discrete { atoms } => atoms.clone(),
        FadingDistribution::Exponential { mean } => exponential_bins(*mean, n_bins),
    };
    FadingGrid::new(atoms, dist.clone())
}

/// Equiprobable bins of an exponential law. Bin `k` spans survival
/// probabilities `[1 - k/n, 1 - (k+1)/n]`; its conditional mean is
/// `mean + (a s_a - b s_b) / (s_a - s_b)` for edges `a, b` with survivals
/// `s_a, s_b`.
fn exponential_bins(mean: f64, n_bins: usize) -> Vec<Atom> {
    let n = n_bins as f64;
    let cutoff = -mean * (1.0 - TRUNCATION_QUANTILE).ln();
    let survival = |k: usize| 1.0 - k as f64 / n;
    let edge = |s: f64| -mean * s.ln();

    let mut atoms = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let s_lo = survival(k);
        let lo = edge(s_lo);
        let last = k + 1 == n_bins || edge(survival(k + 1)) >= cutoff;
        if last {
            // Everything above `lo`, truncated tail included.
            atoms.push(Atom::new(lo + mean, s_lo));
            break;
        }
        let s_hi = survival(k + 1);
        let hi = edge(s_hi);
        let mass = s_lo - s_hi;
        atoms.push(Atom::new(mean + (lo * s_lo - hi * s_hi) / mass, mass));
    }
    atoms
}

/// Mean gain `Σ p_k v_k` of a grid.
pub fn grid_mean(grid: &FadingGrid) -> f64 {
    grid.expect(|v| v)
}
