//! The three experiments behind the command-line interface.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use decmac::{
    am_solve, am_solve_with, brute_force_discrete, quantize, waterfilling_single_user, BruteForceSpec, Error,
    SolveResult, Termination,
};
use log::{info, warn};

use crate::config::{ExperimentConfig, RateUnit};
use crate::output::{self, POLICIES_FILE, SUMMARY_FILE, SWEEP_FILE, TRAJECTORY_FILE};
use crate::CliError;

/// Largest capacity gap (nats) accepted by `compare-oracle`.
pub const ORACLE_GAP_TOL: f64 = 1e-3;

/// Cap on the number of power-grid points the brute-force oracle may visit,
/// counted before budget pruning.
const MAX_ORACLE_POINTS: f64 = 1e8;

/// Solves the configured problem and writes `policies.csv`,
/// `trajectory.csv` and `summary.json` into `out`. Nothing is written if
/// the solve fails.
pub fn run_solve(config: &ExperimentConfig, out: &Path) -> Result<SolveResult, CliError> {
    if config.sweep.is_some() {
        return Err(CliError::config("solve takes a configuration without [sweep]; use the sweep command"));
    }
    let result = am_solve(&config.problem(), &config.solver)?;
    info!(
        "capacity {:.9} nats after {} sweeps ({:?})",
        result.capacity, result.outer_iters, result.termination
    );
    output::write_files(
        out,
        &[
            (POLICIES_FILE, output::policies_csv(&result)),
            (TRAJECTORY_FILE, output::trajectory_csv(&result, config.rate_unit)),
            (SUMMARY_FILE, output::summary_json(&result, config.rate_unit)),
        ],
    )?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Converged,
    MaxIters,
    /// The multiplier search could not meet a budget.
    CalibrationFailed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Converged => "converged",
            PointStatus::MaxIters => "max_iters",
            PointStatus::CalibrationFailed => "calibration_failed",
        }
    }
}

/// One budget of a sweep. Rates are in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_avg_db: f64,
    pub capacity: f64,
    pub outer_iters: usize,
    pub kkt_residual: f64,
    pub status: PointStatus,
}

/// Solves every sweep point in ascending order, starting each solve from
/// the previous point's multipliers. A point that fails is recorded and
/// the next one starts cold.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let Some(range) = &config.sweep else {
        return Err(CliError::config("sweep requires a [sweep] section"));
    };
    let mut rows = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    for p_avg_db in range.points() {
        let row = match am_solve_with(&config.problem_at(p_avg_db), &config.solver, warm.as_deref()) {
            Ok(r) => {
                warm = Some(r.lambdas.iter().map(|l| l.value()).collect());
                let status = match r.termination {
                    Termination::Converged => PointStatus::Converged,
                    Termination::MaxIters => PointStatus::MaxIters,
                };
                SweepRow { p_avg_db, capacity: r.capacity, outer_iters: r.outer_iters, kkt_residual: r.kkt_residual, status }
            }
            Err(e @ Error::Calibration { .. }) => {
                warn!("{p_avg_db} dB: {e}");
                warm = None;
                SweepRow {
                    p_avg_db,
                    capacity: f64::NAN,
                    outer_iters: 0,
                    kkt_residual: f64::NAN,
                    status: PointStatus::CalibrationFailed,
                }
            }
            Err(e) => return Err(e.into()),
        };
        info!(
            "{p_avg_db} dB: capacity {:.9} nats, {} sweeps, {}",
            row.capacity,
            row.outer_iters,
            row.status.as_str()
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Runs [`sweep`] and writes `capacity_vs_pavg.csv` into `out`.
pub fn run_sweep(config: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>, CliError> {
    let rows = sweep(config)?;
    output::write_files(out, &[(SWEEP_FILE, output::sweep_csv(&rows, config.rate_unit))])?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Closed-form single-user waterfilling.
    Waterfilling,
    /// Exhaustive search over a power grid.
    BruteForce,
}

/// Capacities in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub oracle: OracleKind,
    pub am_capacity: f64,
    pub oracle_capacity: f64,
    pub gap: f64,
    pub pass: bool,
    pub unit: RateUnit,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = self.unit.as_str();
        let oracle = match self.oracle {
            OracleKind::Waterfilling => "waterfilling",
            OracleKind::BruteForce => "brute-force",
        };
        writeln!(f, "am_capacity      {} {unit}", output::real(self.unit.from_nats(self.am_capacity)))?;
        writeln!(f, "oracle_capacity  {} {unit} ({oracle})", output::real(self.unit.from_nats(self.oracle_capacity)))?;
        writeln!(f, "gap              {} {unit}", output::real(self.unit.from_nats(self.gap)))?;
        write!(
            f,
            "{} (tolerance {} nats)",
            if self.pass { "PASS" } else { "FAIL" },
            ORACLE_GAP_TOL
        )
    }
}

/// Compares the solver against an independent oracle on the configured
/// instance: waterfilling for one user, brute force on discrete fading for
/// two or more.
pub fn run_compare_oracle(config: &ExperimentConfig) -> Result<OracleReport, CliError> {
    if config.sweep.is_some() {
        return Err(CliError::config("compare-oracle takes a configuration without [sweep]"));
    }
    let problem = config.problem();
    let grids = problem
        .iter()
        .map(|u| quantize(&u.distribution, config.solver.n_bins).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;
    let budgets: Vec<f64> = problem.iter().map(|u| u.p_avg).collect();

    let (oracle, oracle_capacity) = if problem.len() == 1 {
        (OracleKind::Waterfilling, waterfilling_single_user(&grids[0], budgets[0])?.1)
    } else {
        if let Some(i) = problem.iter().position(|u| u.distribution.is_continuous()) {
            return Err(CliError::config(format!(
                "users[{i}]: the brute-force oracle needs discrete or deterministic fading"
            )));
        }
        let power_max = config.oracle.power_max.unwrap_or_else(|| {
            let min_prob = grids.iter().flat_map(|g| g.probs()).fold(1.0, f64::min);
            budgets.iter().fold(0.0, |a: f64, &b| a.max(b)) / min_prob
        });
        let spec = BruteForceSpec { grids: grids.clone(), power_grid_step: config.oracle.power_grid_step, power_max };
        spec.validate(&budgets).map_err(|e| CliError::config(format!("oracle: {e}")))?;
        let levels = (power_max / config.oracle.power_grid_step).floor() + 1.0;
        let free_atoms: usize = grids.iter().map(|g| g.len() - 1).sum();
        let points = levels.powi(free_atoms as i32);
        if points > MAX_ORACLE_POINTS {
            return Err(CliError::config(format!(
                "oracle: power grid has {points:.3e} points, above the limit of {MAX_ORACLE_POINTS:e}; \
                 raise oracle.power_grid_step or lower oracle.power_max"
            )));
        }
        (OracleKind::BruteForce, brute_force_discrete(&spec, &budgets)?.1)
    };

    let am = am_solve(&problem, &config.solver)?;
    let gap = (am.capacity - oracle_capacity).abs();
    Ok(OracleReport {
        oracle,
        am_capacity: am.capacity,
        oracle_capacity,
        gap,
        pass: gap <= ORACLE_GAP_TOL,
        unit: config.rate_unit,
    })
}
