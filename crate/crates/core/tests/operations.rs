//! Worked examples for each public operation, checked against values
//! computed independently of the implementation.

use std::sync::Arc;

use decmac::*;

fn grid(atoms: &[(f64, f64)]) -> Arc<FadingGrid> {
    Arc::new(FadingGrid::from_atoms(atoms.iter().map(|&(g, p)| Atom::new(g, p)).collect()).unwrap())
}

fn policy(g: &Arc<FadingGrid>, powers: &[f64], p_avg: f64) -> PowerPolicy {
    PowerPolicy::new(g.clone(), powers.to_vec(), Multiplier::Finite(1.0), p_avg).unwrap()
}

/// Adaptive Simpson quadrature.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn rayleigh_four_bins_match_quadrature() {
    let g = quantize(&FadingDistribution::rayleigh(), 4).unwrap();
    let edges = [0.0, (4.0f64 / 3.0).ln(), 2f64.ln(), 4f64.ln(), 60.0];
    let density = |v: f64| v * (-v).exp();
    // Frozen from an independent quadrature run.
    let frozen = [0.13695378264465713, 0.47675185623545224, 1.0, 2.386294361119891];
    assert_eq!(g.len(), 4);
    for (k, a) in g.atoms().iter().enumerate() {
        assert!((a.prob - 0.25).abs() < 1e-15);
        let oracle = simpson(&density, edges[k], edges[k + 1], 1e-14) / 0.25;
        assert!((a.gain - oracle).abs() < 1e-10, "bin {k}: {} vs {oracle}", a.gain);
        assert!((a.gain - frozen[k]).abs() < 1e-12);
    }
}

#[test]
fn rayleigh_grid_mean_is_one() {
    let g = quantize(&FadingDistribution::rayleigh(), 64).unwrap();
    assert!((grid_mean(&g) - 1.0).abs() < 1e-4);
    let g = quantize(&FadingDistribution::rayleigh(), 1).unwrap();
    assert!((grid_mean(&g) - 1.0).abs() < 1e-5);
}

#[test]
fn interference_examples() {
    let y = build_interference(&[], 512).unwrap();
    assert_eq!(y.atoms(), &[Mass::new(0.0, 1.0)]);
    assert!(y.is_exact());

    let single = policy(&grid(&[(1.0, 1.0)]), &[2.0], 2.0);
    let y = build_interference(&[&single], 512).unwrap();
    assert_eq!(y.atoms(), &[Mass::new(2.0, 1.0)]);

    // Terms {0.1, 0.6} and {0.2, 0.8}: the four outcomes enumerated by hand.
    let a = policy(&grid(&[(0.5, 0.5), (1.5, 0.5)]), &[0.2, 0.4], 1.0);
    let b = policy(&grid(&[(0.5, 0.5), (1.0, 0.5)]), &[0.4, 0.8], 1.0);
    let y = build_interference(&[&a, &b], 512).unwrap();
    let expected = [0.3, 0.8, 0.9, 1.4];
    assert!(y.is_exact());
    assert_eq!(y.atoms().len(), 4);
    for (m, e) in y.atoms().iter().zip(expected) {
        assert!((m.value - e).abs() < 1e-15);
        assert!((m.prob - 0.25).abs() < 1e-15);
    }
}

#[test]
fn sum_rate_examples() {
    let det = grid(&[(1.0, 1.0)]);
    let one = policy(&det, &[1.0], 1.0);
    assert!((sum_rate(&[one.clone(), one.clone()], 512).unwrap() - 3f64.ln()).abs() < 1e-15);
    assert!((sum_rate(&[one], 512).unwrap() - 2f64.ln()).abs() < 1e-15);

    let g = grid(&[(0.5, 0.5), (2.0, 0.5)]);
    let wf = policy(&g, &[0.25, 1.75], 1.0);
    let r = sum_rate(&[wf], 512).unwrap();
    assert!((r - (0.5 * 1.125f64.ln() + 0.5 * 4.5f64.ln())).abs() < 1e-15);
    assert!((r - 0.8109).abs() < 1e-4);
}

#[test]
fn sum_rate_agrees_with_enumeration() {
    let grids = vec![
        grid(&[(0.5, 0.5), (1.5, 0.5)]),
        grid(&[(0.2, 0.25), (1.0, 0.25), (3.0, 0.5)]),
        grid(&[(0.7, 0.4), (1.1, 0.6)]),
    ];
    let powers = vec![vec![0.3, 1.7], vec![0.0, 1.2, 1.4], vec![0.5, 1.0]];
    let policies: Vec<PowerPolicy> = grids.iter().zip(&powers).map(|(g, p)| policy(g, p, 2.0)).collect();
    let fast = sum_rate(&policies, 512).unwrap();
    let slow = enumerated_sum_rate(&grids, &powers).unwrap();
    assert!((fast - slow).abs() < 1e-14);
}

#[test]
fn two_user_best_response_solves_the_quadratic() {
    // Frozen interferer: terms {0.1, 0.6} with equal mass. At atom v the
    // response x = v P solves t x^2 + (2.7 t - 1) x + 1.76 t - 1.35 = 0
    // with t = lambda / v.
    let other = policy(&grid(&[(0.5, 0.5), (1.5, 0.5)]), &[0.2, 0.4], 1.0);
    let own = grid(&[(0.5, 0.5), (2.0, 0.5)]);
    let lambda = 0.3;
    let p = best_response(0, &[&other], lambda, &own, 2.0, 512).unwrap();
    for (v, got) in own.gains().zip(p.powers()) {
        let t = lambda / v;
        let (a, b, c) = (t, 2.7 * t - 1.0, 1.76 * t - 1.35);
        let root = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((got - root / v).abs() < 1e-11, "v={v}: {got} vs {}", root / v);
    }
    assert!((p.powers()[0] - 0.7067177514850919).abs() < 1e-11);
    assert!((p.powers()[1] - 2.6630142600109643).abs() < 1e-11);
}

#[test]
fn calibration_matches_two_point_waterfilling() {
    let g = grid(&[(0.5, 0.5), (2.0, 0.5)]);
    let (lambda, p) = calibrate_lambda(0, &[], &g, 1.0, None, &SolverConfig::default()).unwrap();
    assert!((lambda.value() - 1.0 / 2.25).abs() < 1e-10);
    assert!((p.powers()[0] - 0.25).abs() < 1e-9);
    assert!((p.powers()[1] - 1.75).abs() < 1e-9);
    assert!((average_power(&p) - 1.0).abs() < 1e-10);
}

#[test]
fn kkt_examples() {
    let g = grid(&[(0.5, 0.5), (2.0, 0.5)]);
    let (wf, _) = waterfilling_single_user(&g, 1.0).unwrap();
    let lambda = wf.lambda().value();
    assert!(kkt_residual(std::slice::from_ref(&wf), &[lambda], 512).unwrap() <= 1e-10);
    assert!((average_power(&wf) - 1.0).abs() < 1e-10);

    // Constant power is not stationary under fading: v/(1+v) misses the
    // optimal multiplier 4/9 by 25% at v = 0.5 and by 50% at v = 2.
    let constant = PowerPolicy::constant(g, 1.0).unwrap();
    let r = kkt_residual(&[constant], &[lambda], 512).unwrap();
    assert!(r > 0.01);
    assert!((r - 0.5).abs() < 1e-10);
}

#[test]
fn am_solve_examples() {
    let config = SolverConfig::default();

    let det = vec![UserSpec::new(FadingDistribution::Deterministic { value: 1.0 }, 1.0); 2];
    let r = am_solve(&det, &config).unwrap();
    assert_eq!(r.termination, Termination::Converged);
    for p in &r.policies {
        assert!((p.powers()[0] - 1.0).abs() < 1e-10);
    }
    assert!((r.capacity - 3f64.ln()).abs() < 1e-10);

    let rayleigh = vec![UserSpec::new(FadingDistribution::rayleigh(), 1.0)];
    let r = am_solve(&rayleigh, &config).unwrap();
    let g = Arc::new(quantize(&FadingDistribution::rayleigh(), config.n_bins).unwrap());
    let (_, wf) = waterfilling_single_user(&g, 1.0).unwrap();
    assert!((r.capacity - wf).abs() < 1e-6);
}

#[test]
fn am_solve_matches_brute_force_on_two_state_users() {
    let atoms = vec![Atom::new(0.5, 0.5), Atom::new(1.5, 0.5)];
    let users = vec![UserSpec::new(FadingDistribution::Discrete { atoms: atoms.clone() }, 1.0); 2];
    let r = am_solve(&users, &SolverConfig::default()).unwrap();

    let g = grid(&[(0.5, 0.5), (1.5, 0.5)]);
    let spec = BruteForceSpec { grids: vec![g.clone(), g], power_grid_step: 0.01, power_max: 2.0 };
    let (_, brute) = brute_force_discrete(&spec, &[1.0, 1.0]).unwrap();
    // Frozen from an independent grid search at the same step.
    assert!((brute - 1.180122456649758).abs() < 1e-12);
    assert!(brute <= r.capacity + 1e-12);
    assert!(r.capacity - brute <= 1e-3);
    // Continuous optimum from an SQP run: 1.1801241881347906.
    assert!((r.capacity - 1.1801241881347906).abs() < 1e-8);
}

#[test]
fn zero_budget_user_is_silent() {
    let users = vec![
        UserSpec::new(FadingDistribution::rayleigh(), 1.0),
        UserSpec::new(FadingDistribution::rayleigh(), 0.0),
    ];
    let config = SolverConfig { n_bins: 50, ..SolverConfig::default() };
    let r = am_solve(&users, &config).unwrap();
    assert_eq!(r.lambdas[1], Multiplier::ZeroBudget);
    assert!(r.policies[1].powers().iter().all(|&p| p == 0.0));

    let single = am_solve(&users[..1], &config).unwrap();
    assert!((r.capacity - single.capacity).abs() < 1e-9);
}

#[test]
fn constant_power_is_a_lower_bound() {
    let config = SolverConfig { n_bins: 64, ..SolverConfig::default() };
    for k in 1..=3 {
        let users = vec![UserSpec::new(FadingDistribution::rayleigh(), 2.0); k];
        let r = am_solve(&users, &config).unwrap();
        let grids: Vec<_> = r.policies.iter().map(|p| p.grid().clone()).collect();
        let baseline = constant_power_rate(&grids, &vec![2.0; k]).unwrap();
        assert!(baseline <= r.capacity + 1e-9);
        assert_eq!(baseline, r.rate_trajectory[0]);
    }
}

#[test]
fn solver_errors() {
    assert!(am_solve(&[], &SolverConfig::default()).is_err());
    let users = vec![UserSpec::new(FadingDistribution::rayleigh(), -1.0)];
    assert!(am_solve(&users, &SolverConfig::default()).is_err());

    let silent = vec![UserSpec::new(FadingDistribution::Deterministic { value: 0.0 }, 1.0)];
    assert!(matches!(am_solve(&silent, &SolverConfig::default()), Err(Error::Calibration { .. })));

    let capped = SolverConfig { max_lambda_iters: 2, ..SolverConfig::default() };
    let users = vec![UserSpec::new(FadingDistribution::Deterministic { value: 1.0 }, 1e3)];
    assert!(matches!(am_solve(&users, &capped), Err(Error::Calibration { .. })));
}

#[test]
fn outer_cap_is_reported_not_raised() {
    let config = SolverConfig { max_outer_iters: 1, n_bins: 50, ..SolverConfig::default() };
    let users = vec![UserSpec::new(FadingDistribution::rayleigh(), 1.0); 2];
    let r = am_solve(&users, &config).unwrap();
    assert_eq!(r.termination, Termination::MaxIters);
    assert_eq!(r.outer_iters, 1);
    assert_eq!(r.rate_trajectory.len(), 2);
}
