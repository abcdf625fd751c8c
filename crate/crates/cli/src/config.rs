//! Experiment configuration: a TOML document naming the users, solver
//! settings, an optional budget sweep and where to write results.
//!
//! ```toml
//! output_dir = "out/k2"
//! rate_unit = "nats"
//!
//! [[users]]
//! p_avg_db = 0.0
//! distribution = { kind = "exponential", mean = 1.0 }
//!
//! [[users]]
//! p_avg_db = 0.0
//! distribution = { kind = "exponential", mean = 1.0 }
//!
//! [solver]
//! n_bins = 200
//!
//! [sweep]
//! p_avg_db_start = -10.0
//! p_avg_db_stop = 20.0
//! p_avg_db_step = 1.0
//! ```

use std::path::{Path, PathBuf};

use decmac::{FadingDistribution, SolverConfig, UserSpec};
use serde::Deserialize;

use crate::CliError;

/// Unit for reported rates. Powers and multipliers are never rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    #[default]
    Nats,
    Bits,
}

impl RateUnit {
    /// Converts a rate in nats to this unit.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            RateUnit::Nats => nats,
            RateUnit::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateUnit::Nats => "nats",
            RateUnit::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub distribution: FadingDistribution,
    /// Average power budget in dB, `10 log10(p_avg)`. `-inf` is a zero
    /// budget.
    pub p_avg_db: f64,
}

/// Budgets `start, start + step, ..` up to `stop`, applied to every user.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub p_avg_db_start: f64,
    pub p_avg_db_stop: f64,
    pub p_avg_db_step: f64,
}

impl SweepConfig {
    /// Upper bound on the number of sweep points, against typos such as a
    /// step of `1e-9`.
    pub const MAX_POINTS: usize = 100_000;

    fn validate(&self) -> Result<(), CliError> {
        let (start, stop, step) = (self.p_avg_db_start, self.p_avg_db_stop, self.p_avg_db_step);
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(CliError::config("sweep bounds and step must be finite"));
        }
        if step <= 0.0 {
            return Err(CliError::config(format!("sweep.p_avg_db_step must be positive, got {step}")));
        }
        if stop < start {
            return Err(CliError::config(format!("empty sweep range: p_avg_db_stop {stop} < p_avg_db_start {start}")));
        }
        if (stop - start) / step >= Self::MAX_POINTS as f64 {
            return Err(CliError::config(format!("sweep has more than {} points", Self::MAX_POINTS)));
        }
        Ok(())
    }

    /// Sweep budgets in dB, ascending. The stop value is included when it
    /// lies on the step lattice up to rounding.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.p_avg_db_stop - self.p_avg_db_start) / self.p_avg_db_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.p_avg_db_start + i as f64 * self.p_avg_db_step).collect()
    }
}

/// Settings for `compare-oracle`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Spacing of the brute-force power grid.
    pub power_grid_step: f64,
    /// Largest power tried on any atom. Defaults to the largest power an
    /// atom can receive, `max_i p_avg_i / min_k prob_ik`.
    pub power_max: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { power_grid_step: 0.01, power_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub users: Vec<UserConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub rate_unit: RateUnit,
    #[serde(default)]
    pub oracle: OracleConfig,
}

/// `10^(db / 10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.users.is_empty() {
            return Err(CliError::config("users required"));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.distribution
                .validate()
                .map_err(|e| CliError::config(format!("users[{i}].distribution: {e}")))?;
            if u.p_avg_db.is_nan() || u.p_avg_db == f64::INFINITY {
                return Err(CliError::config(format!("users[{i}].p_avg_db must be finite or -inf")));
            }
        }
        self.solver.validate().map_err(|e| CliError::config(format!("solver: {e}")))?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        let step = self.oracle.power_grid_step;
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::config(format!("oracle.power_grid_step must be positive, got {step}")));
        }
        if let Some(max) = self.oracle.power_max {
            if !(max.is_finite() && max > 0.0) {
                return Err(CliError::config(format!("oracle.power_max must be positive, got {max}")));
            }
        }
        Ok(())
    }

    /// Users with their configured budgets converted to linear scale.
    pub fn problem(&self) -> Vec<UserSpec> {
        self.users
            .iter()
            .map(|u| UserSpec::new(u.distribution.clone(), db_to_linear(u.p_avg_db)))
            .collect()
    }

    /// Users with every budget set to `p_avg_db`.
    pub fn problem_at(&self, p_avg_db: f64) -> Vec<UserSpec> {
        let p_avg = db_to_linear(p_avg_db);
        self.users.iter().map(|u| UserSpec::new(u.distribution.clone(), p_avg)).collect()
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::config(e.message().to_owned() + &location(text, &e)))?;
    config.validate()?;
    Ok(config)
}

fn location(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_USER: &str = r#"
        [[users]]
        p_avg_db = 0.0
        distribution = { kind = "exponential", mean = 1.0 }
    "#;

    #[test]
    fn zero_db_is_unit_power() {
        let c = parse_config(ONE_USER).unwrap();
        assert_eq!(c.problem().len(), 1);
        assert_eq!(c.problem()[0].p_avg, 1.0);
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.rate_unit, RateUnit::Nats);
    }

    #[test]
    fn ten_db_is_ten() {
        let c = parse_config(&ONE_USER.replace("0.0", "10.0")).unwrap();
        assert!((c.problem()[0].p_avg - 10.0).abs() < 1e-12);
    }

    #[test]
    fn users_are_required() {
        for text in ["", "users = []", "rate_unit = \"bits\""] {
            let err = parse_config(text).unwrap_err().to_string();
            assert!(err.contains("users required"), "{err}");
        }
    }

    #[test]
    fn unknown_kind_is_named() {
        let err = parse_config(&ONE_USER.replace("exponential", "nakagami")).unwrap_err().to_string();
        assert!(err.contains("nakagami") && err.contains("line"), "{err}");
    }

    #[test]
    fn tolerances_must_be_positive() {
        for field in ["eps_rate", "eps_power", "eps_kkt", "delta"] {
            let text = format!("{ONE_USER}\n[solver]\n{field} = 0.0\n");
            let err = parse_config(&text).unwrap_err().to_string();
            assert!(err.contains(field), "{err}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse_config(&format!("{ONE_USER}\n[solver]\nn_bin = 10\n")).unwrap_err().to_string();
        assert!(err.contains("n_bin"), "{err}");
    }

    #[test]
    fn sweep_points_include_the_stop() {
        let s = SweepConfig { p_avg_db_start: -10.0, p_avg_db_stop: 10.0, p_avg_db_step: 5.0 };
        assert_eq!(s.points(), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
        let s = SweepConfig { p_avg_db_start: 0.0, p_avg_db_stop: 1.0, p_avg_db_step: 0.1 };
        assert_eq!(s.points().len(), 11);
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        let text = format!("{ONE_USER}\n[sweep]\np_avg_db_start = 5.0\np_avg_db_stop = 0.0\np_avg_db_step = 1.0\n");
        assert!(parse_config(&text).unwrap_err().to_string().contains("empty sweep range"));
        let text = format!("{ONE_USER}\n[sweep]\np_avg_db_start = 0.0\np_avg_db_stop = 5.0\np_avg_db_step = 0.0\n");
        assert!(parse_config(&text).unwrap_err().to_string().contains("p_avg_db_step"));
    }

    #[test]
    fn minus_infinity_is_a_zero_budget() {
        let c = parse_config(&ONE_USER.replace("0.0", "-inf")).unwrap();
        assert_eq!(c.problem()[0].p_avg, 0.0);
        assert!(parse_config(&ONE_USER.replace("0.0", "inf")).is_err());
        assert!(parse_config(&ONE_USER.replace("0.0", "nan")).is_err());
    }

    #[test]
    fn bits_divide_by_ln_two() {
        assert_eq!(RateUnit::Nats.from_nats(2.0), 2.0);
        assert!((RateUnit::Bits.from_nats(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
    }
}
