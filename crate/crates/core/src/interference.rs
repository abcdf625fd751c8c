//! Aggregate received power of a set of users and the marginal integral
//! `f(x) = E[1 / (1 + x + Y)]` that drives each best response.

use crate::error::{invalid, Result};
use crate::policy::PowerPolicy;

/// Default cap on the number of atoms kept in an aggregate distribution.
pub const DEFAULT_MAX_ATOMS: usize = 512;

/// One atom of a discrete distribution on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mass {
    pub value: f64,
    pub prob: f64,
}

impl Mass {
    pub fn new(value: f64, prob: f64) -> Self {
        Mass { value, prob }
    }
}

/// Distribution of the interference `Y_j = Σ_{i≠j} V_i P_i(V_i)` seen by
/// one user, or of the full received power when built over every user.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceDistribution {
    atoms: Vec<Mass>,
    exact: bool,
}

impl InterferenceDistribution {
    /// Builds a distribution from arbitrary atoms: sorts them and merges
    /// repeated values.
    pub fn from_atoms(atoms: Vec<Mass>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("distribution needs at least one atom");
        }
        if let Some(m) = atoms.iter().find(|m| !(m.value.is_finite() && m.value >= 0.0 && m.prob > 0.0)) {
            return invalid(format!("invalid atom ({}, {})", m.value, m.prob));
        }
        let total: f64 = atoms.iter().map(|m| m.prob).sum();
        if (total - 1.0).abs() > 1e-10 {
            return invalid(format!("atom masses sum to {total}, expected 1"));
        }
        Ok(InterferenceDistribution { atoms: sort_merge(atoms), exact: true })
    }

    /// No interference at all: a point mass at zero.
    pub fn silent() -> Self {
        InterferenceDistribution { atoms: vec![Mass::new(0.0, 1.0)], exact: true }
    }

    pub fn atoms(&self) -> &[Mass] {
        &self.atoms
    }

    /// False once any rebinning has merged distinct atoms.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|m| m.prob * m.value).sum()
    }

    /// `E g(Y)`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.atoms.iter().map(|m| m.prob * g(m.value)).sum()
    }

    /// `f(x)` and its derivative `f'(x) = -E[1 / (1 + x + Y)^2]`.
    pub(crate) fn f_and_slope(&self, x: f64) -> (f64, f64) {
        let mut f = 0.0;
        let mut slope = 0.0;
        for m in &self.atoms {
            let r = 1.0 / (1.0 + x + m.value);
            f += m.prob * r;
            slope -= m.prob * r * r;
        }
        (f, slope)
    }
}

fn sort_merge(mut atoms: Vec<Mass>) -> Vec<Mass> {
    atoms.sort_unstable_by(|a, b| a.value.total_cmp(&b.value));
    let mut merged: Vec<Mass> = Vec::with_capacity(atoms.len());
    for m in atoms {
        match merged.last_mut() {
            Some(last) if last.value == m.value => last.prob += m.prob,
            _ => merged.push(m),
        }
    }
    merged
}

/// Received-power distribution `v_k P(v_k)` of a single policy.
pub(crate) fn term_distribution(policy: &PowerPolicy) -> Vec<Mass> {
    sort_merge(policy.received().map(|(value, prob)| Mass::new(value, prob)).collect())
}

/// Compresses a sorted distribution to at most `max_atoms` atoms.
///
/// `[0, y_max]` is cut into `max_atoms / 2` cells of equal width in
/// `ln(1 + y)`, and the atoms of each cell are replaced by the two-point
/// Gauss rule for their own distribution: two atoms inside the cell that
/// reproduce its mass and first three moments. Expectations of smooth
/// functions such as `1 / (1 + x + y)` then carry an error of fourth order
/// in the cell width, and an atom crossing a cell boundary moves them only
/// by a correspondingly small amount. A cell whose atoms coincide keeps a
/// single atom.
fn rebin(atoms: &[Mass], max_atoms: usize) -> Vec<Mass> {
    let y_max = atoms.last().map_or(0.0, |m| m.value);
    let span = y_max.ln_1p();
    if span <= 0.0 {
        return vec![Mass::new(0.0, atoms.iter().map(|m| m.prob).sum())];
    }
    let cells = (max_atoms / 2).max(1);
    let width = span / cells as f64;
    let cell_of = |y: f64| ((y.ln_1p() / width) as usize).min(cells - 1);

    let mut out = Vec::with_capacity(max_atoms);
    let mut start = 0;
    while start < atoms.len() {
        let cell = cell_of(atoms[start].value);
        let end = start + atoms[start..].iter().take_while(|m| cell_of(m.value) == cell).count();
        gauss_pair(&atoms[start..end], &mut out);
        start = end;
    }
    sort_merge(out)
}

/// Appends the two-point Gauss rule of a sorted, non-empty group of atoms.
fn gauss_pair(group: &[Mass], out: &mut Vec<Mass>) {
    let (lo, hi) = (group[0].value, group[group.len() - 1].value);
    let mass: f64 = group.iter().map(|m| m.prob).sum();
    let mean = (group.iter().map(|m| m.prob * m.value).sum::<f64>() / mass).clamp(lo, hi);
    let central = |k: i32| group.iter().map(|m| m.prob * (m.value - mean).powi(k)).sum::<f64>() / mass;
    let var = central(2);
    if group.len() == 1 || var <= (1e-13 * (1.0 + mean)).powi(2) {
        out.push(Mass::new(mean, mass));
        return;
    }
    // Nodes are the roots of the degree-2 orthogonal polynomial of the
    // group, x^2 - (c3 / var) x - var in coordinates centred at the mean.
    let skew = central(3) / var;
    let disc = (skew * skew + 4.0 * var).sqrt();
    let (x1, x2) = ((skew - disc) / 2.0, (skew + disc) / 2.0);
    out.push(Mass::new((mean + x1).clamp(lo, hi), mass * x2 / (x2 - x1)));
    out.push(Mass::new((mean + x2).clamp(lo, hi), -mass * x1 / (x2 - x1)));
}

fn convolve(a: &[Mass], b: &[Mass]) -> Vec<Mass> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(Mass::new(x.value + y.value, x.prob * y.prob));
        }
    }
    sort_merge(out)
}

/// Sorts policies into the order in which they are convolved. The order is
/// fixed by each user's budget and grid (ties keep the given order), so it
/// neither depends on how distinct users are listed nor changes as the
/// powers evolve.
pub(crate) fn canonical_order<'a>(policies: impl IntoIterator<Item = &'a PowerPolicy>) -> Vec<&'a PowerPolicy> {
    let mut policies: Vec<&PowerPolicy> = policies.into_iter().collect();
    let key = |p: &PowerPolicy| (p.p_avg(), p.grid().expect(|v| v), p.grid().len());
    policies.sort_by(|a, b| {
        let (pa, ma, la) = key(a);
        let (pb, mb, lb) = key(b);
        pa.total_cmp(&pb).then(ma.total_cmp(&mb)).then(la.cmp(&lb))
    });
    policies
}

/// Distribution of the independent sum of the given policies' received
/// power, convolved in [`canonical_order`]. Whenever an intermediate result
/// exceeds `max_atoms` atoms it is rebinned.
pub(crate) fn aggregate<'a>(policies: impl IntoIterator<Item = &'a PowerPolicy>, max_atoms: usize) -> InterferenceDistribution {
    let mut exact = true;
    let mut acc = vec![Mass::new(0.0, 1.0)];
    for p in canonical_order(policies) {
        acc = convolve(&acc, &term_distribution(p));
        if acc.len() > max_atoms {
            acc = rebin(&acc, max_atoms);
            exact = false;
        }
    }
    InterferenceDistribution { atoms: acc, exact }
}

/// Distribution of `Σ_i V_i P_i(V_i)` over the given (independent) users.
/// An empty list yields the point mass at zero.
pub fn build_interference(policies: &[&PowerPolicy], max_atoms: usize) -> Result<InterferenceDistribution> {
    if max_atoms < 2 {
        return invalid("max_atoms must be at least 2");
    }
    Ok(aggregate(policies.iter().copied(), max_atoms))
}

/// `f(x) = Σ_m q_m / (1 + x + y_m)`, strictly decreasing in `x`.
pub fn eval_f(x: f64, y: &InterferenceDistribution) -> Result<f64> {
    if !(x >= 0.0) {
        return invalid(format!("f is defined for x >= 0, got {x}"));
    }
    Ok(y.f_and_slope(x).0)
}

/// Solves `f(x) = target` for `x >= 0`.
///
/// Returns zero when `target >= f(0)`. Otherwise the root lies in
/// `[0, 1/target]` because `f(x) <= 1/(1+x) < 1/x`; it is located by
/// Newton steps safeguarded by bisection on that bracket. `f` is convex
/// and decreasing, so Newton from the left never overshoots and the
/// bisection fallback only triggers on rounding trouble.
pub fn invert_f(target: f64, y: &InterferenceDistribution) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return invalid(format!("inversion target must be positive, got {target}"));
    }
    let f0 = y.f_and_slope(0.0).0;
    Ok(invert_from(target, y, f0, 0.0))
}

/// Inversion given `f0 = f(0)` and a starting guess, typically the root
/// for a neighbouring target.
pub(crate) fn invert_from(target: f64, y: &InterferenceDistribution, f0: f64, start: f64) -> f64 {
    if target >= f0 {
        return 0.0;
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0 / target;
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let (f, slope) = y.f_and_slope(x);
        let gap = f - target;
        if gap == 0.0 {
            return x;
        }
        if gap > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-12 || gap.abs() <= 1e-14 * target {
            return x;
        }
        let newton = x - gap / slope;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(atoms: &[(f64, f64)]) -> InterferenceDistribution {
        InterferenceDistribution::from_atoms(atoms.iter().map(|&(v, p)| Mass::new(v, p)).collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let silent = InterferenceDistribution::silent();
        assert_eq!(eval_f(3.0, &silent).unwrap(), 0.25);
        assert_eq!(eval_f(0.0, &dist(&[(1.0, 1.0)])).unwrap(), 0.5);
        let f = eval_f(1.0, &dist(&[(0.0, 0.5), (1.0, 0.5)])).unwrap();
        assert!((f - 5.0 / 12.0).abs() < 1e-15);
        assert!(eval_f(-1e-3, &silent).is_err());
    }

    #[test]
    fn invert_examples() {
        let silent = InterferenceDistribution::silent();
        assert!((invert_f(0.25, &silent).unwrap() - 3.0).abs() < 1e-12);

        let y = dist(&[(0.0, 0.5), (2.0, 0.5)]);
        assert_eq!(invert_f(1.0, &y).unwrap(), 0.0);
        assert_eq!(invert_f(2.0 / 3.0, &y).unwrap(), 0.0);
        // x^2 + 2x - 1 = 0
        let x = invert_f(0.5, &y).unwrap();
        assert!((x - (2f64.sqrt() - 1.0)).abs() < 1e-12);

        assert!(invert_f(0.0, &y).is_err());
        assert!(invert_f(-0.5, &y).is_err());
    }

    #[test]
    fn rebin_keeps_mass_and_mean() {
        let atoms: Vec<Mass> = (0..5000).map(|k| Mass::new((k as f64 * 0.37) % 41.0, 1.0 / 5000.0)).collect();
        let sorted = sort_merge(atoms);
        let mean: f64 = sorted.iter().map(|m| m.prob * m.value).sum();
        let binned = rebin(&sorted, 64);
        assert!(binned.len() <= 64);
        let mass: f64 = binned.iter().map(|m| m.prob).sum();
        let binned_mean: f64 = binned.iter().map(|m| m.prob * m.value).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((binned_mean - mean).abs() <= 1e-9 * mean);
        assert!(binned.windows(2).all(|w| w[0].value < w[1].value));
    }

    #[test]
    fn rebin_matches_three_moments() {
        let atoms: Vec<Mass> = (0..4000).map(|k| Mass::new(((k * k) % 997) as f64 / 50.0, 1.0 / 4000.0)).collect();
        let sorted = sort_merge(atoms);
        let binned = rebin(&sorted, 128);
        assert!(binned.len() <= 128);
        let moment = |a: &[Mass], k: i32| a.iter().map(|m| m.prob * m.value.powi(k)).sum::<f64>();
        for k in 0..=3 {
            let (exact, approx) = (moment(&sorted, k), moment(&binned, k));
            assert!((exact - approx).abs() <= 1e-10 * exact, "moment {k}: {exact} vs {approx}");
        }
        // A smooth integrand is reproduced far below the cell width.
        let f = |a: &[Mass]| a.iter().map(|m| m.prob / (1.0 + m.value)).sum::<f64>();
        assert!((f(&sorted) - f(&binned)).abs() < 1e-8);
    }

    #[test]
    fn rebin_reproduces_two_atom_cells() {
        let atoms = vec![Mass::new(0.0, 0.25), Mass::new(4.0, 0.75)];
        let binned = rebin(&atoms, 2);
        assert_eq!(binned.len(), 2);
        for (b, a) in binned.iter().zip(&atoms) {
            assert!((b.value - a.value).abs() < 1e-12 && (b.prob - a.prob).abs() < 1e-12, "{binned:?}");
        }
    }
}
