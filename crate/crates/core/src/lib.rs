//! Optimal decentralized power control for the fading Gaussian
//! multiple-access channel.
//!
//! Each of `K` transmitters observes only its own fading power gain `v_i`
//! and picks a transmit power `P_i(v_i)` under an average power budget.
//! The receiver knows every gain, so the achievable ergodic sum-rate is
//! `E ln(1 + Σ_i V_i P_i(V_i))`. The solver maximizes it by alternating
//! maximization: each user in turn plays its exact best response to the
//! others, obtained by inverting the marginal integral
//! `f_j(x) = E[1 / (1 + x + Y_j)]` over the aggregate interference `Y_j`.
//!
//! All expectations are finite sums over quantized fading grids
//! ([`fading`]) and discrete interference distributions
//! ([`interference`]). Rates are in nats.

pub mod error;
pub mod fading;
pub mod interference;
pub mod oracles;
pub mod policy;
pub mod solver;

pub use error::{Error, Result};
pub use fading::{grid_mean, quantize, Atom, FadingDistribution, FadingGrid};
pub use interference::{build_interference, eval_f, invert_f, InterferenceDistribution, Mass};
pub use oracles::{
    brute_force_discrete, constant_power_rate, enumerated_sum_rate, waterfilling_single_user, BruteForceSpec,
};
pub use policy::{average_power, check_monotone, Monotonicity, Multiplier, PowerPolicy};
pub use solver::{
    am_solve, am_solve_from, am_solve_with, best_response, calibrate_lambda, kkt_residual, sum_rate,
    Initialization, LambdaMode, SolveResult, SolverConfig, Termination, UserSpec,
};
