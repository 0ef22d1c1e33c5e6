//! Evolutionary market model: Kelly investors against a rival strategy in a
//! Markov environment.

mod checks;
mod dynamics;
mod model;
pub mod random;
mod report;
mod solve;

pub use checks::{check_k1, check_k2_markov, check_k2_markov_with, K1Check, K2Check, K1_THRESHOLD, K2_RANK_THRESHOLD};
pub use dynamics::{as_scalar_system, derivative_at_zero, lyapunov_exponent_exact, wealth_derivative, wealth_map};
pub use model::{check_simplex, MarketModel};
pub use report::{
    aggregate, evolutionary_stability_report, prepare_evolutionary, seed_outcome, EvolutionaryReport,
    EvolutionarySetup, SeedOutcome, KELLY_MATCH_TOLERANCE,
};
pub use solve::{
    solve_kelly, solve_kelly_checked, sup_distance, KellyMethod, KellySolution, AGREEMENT_TOLERANCE,
    CONTRACTION_TOLERANCE,
};
