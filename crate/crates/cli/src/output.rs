//! Result files. Reals are written with 17 significant digits so that
//! every value round-trips exactly.

use std::fs;
use std::path::Path;

use decmac::SolveResult;
use serde::Serialize;

use crate::config::RateUnit;
use crate::experiment::SweepRow;
use crate::CliError;

pub const POLICIES_FILE: &str = "policies.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_FILE: &str = "capacity_vs_pavg.csv";

/// Scientific notation with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    capacity: f64,
    unit: &'a str,
    /// `null` for a user with a zero budget, whose multiplier is infinite.
    lambdas: Vec<Option<f64>>,
    kkt_residual: f64,
    outer_iters: usize,
    termination: decmac::Termination,
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

/// `user,gain,prob,power`, one row per atom of every user's grid. Users
/// are numbered from 0 in configuration order.
pub fn policies_csv(result: &SolveResult) -> Vec<u8> {
    let rows = result.policies.iter().enumerate().flat_map(|(u, p)| {
        p.grid()
            .atoms()
            .iter()
            .zip(p.powers())
            .map(move |(a, &power)| vec![u.to_string(), real(a.gain), real(a.prob), real(power)])
    });
    csv_bytes(&["user", "gain", "prob", "power"], rows)
}

/// `iter,sum_rate`; iteration 0 is the initial policy.
pub fn trajectory_csv(result: &SolveResult, unit: RateUnit) -> Vec<u8> {
    let rows = result
        .rate_trajectory
        .iter()
        .enumerate()
        .map(|(n, &r)| vec![n.to_string(), real(unit.from_nats(r))]);
    csv_bytes(&["iter", "sum_rate"], rows)
}

pub fn summary_json(result: &SolveResult, unit: RateUnit) -> Vec<u8> {
    let summary = Summary {
        capacity: unit.from_nats(result.capacity),
        unit: unit.as_str(),
        lambdas: result.lambdas.iter().map(|l| l.finite()).collect(),
        kkt_residual: result.kkt_residual,
        outer_iters: result.outer_iters,
        termination: result.termination,
    };
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary is plain data");
    bytes.push(b'\n');
    bytes
}

/// `p_avg_db,capacity,outer_iters,kkt_residual,termination`. A point whose
/// multiplier search failed has `NaN` capacity and residual.
pub fn sweep_csv(rows: &[SweepRow], unit: RateUnit) -> Vec<u8> {
    let rows = rows.iter().map(|r| {
        vec![
            real(r.p_avg_db),
            real(unit.from_nats(r.capacity)),
            r.outer_iters.to_string(),
            real(r.kkt_residual),
            r.status.as_str().to_owned(),
        ]
    });
    csv_bytes(&["p_avg_db", "capacity", "outer_iters", "kkt_residual", "termination"], rows)
}

/// Creates `dir` if needed and writes each `(name, bytes)` pair into it.
pub fn write_files(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [1.0 / 3.0, std::f64::consts::PI, 1e-300, 6.02214076e23, 0.0] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let mantissa = s.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{s}");
        }
    }
}
