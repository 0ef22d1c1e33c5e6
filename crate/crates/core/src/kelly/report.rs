use alloc::format;
use alloc::vec::Vec;

use super::checks::check_k2_markov;
use super::dynamics::{as_scalar_system, lyapunov_exponent_exact};
use super::model::MarketModel;
use crate::env::{OmegaStream, RandomSystem};
use crate::stability::{verify_exponential_convergence, SlopeFit, StabilityReport, Tolerances, Verdict};
use crate::{Error, Result};

/// A rival within this sup distance of `lambda*` is treated as `lambda*`.
pub const KELLY_MATCH_TOLERANCE: f64 = 1e-12;

/// Result of one simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub slope: Option<SlopeFit>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionaryReport {
    /// Exact Lyapunov exponent `c`.
    pub c_exact: f64,
    pub seeds: Vec<SeedOutcome>,
    /// Aggregate: `rate = c`, slope statistics across seeds, combined verdict.
    pub report: StabilityReport,
}

/// Validated inputs shared by every seed.
#[derive(Debug, Clone)]
pub struct EvolutionarySetup {
    pub system: RandomSystem,
    pub c_exact: f64,
}

/// Checks `a`, K1 and K2, and builds the scalar system and exact rate.
pub fn prepare_evolutionary(model: &MarketModel, a: f64) -> Result<EvolutionarySetup> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::NegativeWealth { x: a });
    }
    let k2 = check_k2_markov(model)?;
    if !k2.passes {
        return Err(Error::Usage(format!(
            "K2 fails: {}",
            k2.explanation.unwrap_or_default()
        )));
    }
    let system = as_scalar_system(model)?;
    let c_exact = if model.rival_is_kelly(KELLY_MATCH_TOLERANCE) {
        // Rounding alone must not decide the sign of the claimed rate.
        0.0
    } else {
        lyapunov_exponent_exact(model)?
    };
    Ok(EvolutionarySetup { system, c_exact })
}

/// Simulates one trajectory from `a` with the environment drawn from `seed`.
pub fn seed_outcome(
    setup: &EvolutionarySetup,
    a: f64,
    horizon: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<SeedOutcome> {
    let mut stream = OmegaStream::new(setup.system.chain().clone(), seed, 0);
    let r = verify_exponential_convergence(&setup.system, &[a], &mut stream, horizon, setup.c_exact, tol)?;
    Ok(SeedOutcome {
        seed,
        slope: r.slope,
        verdict: r.verdict,
    })
}

/// Combines per-seed outcomes: certified only if every seed is certified,
/// not-certified if any seed is, immediate convergence if all seeds merged.
pub fn aggregate(c_exact: f64, seeds: Vec<SeedOutcome>) -> EvolutionaryReport {
    let verdicts = || seeds.iter().map(|o| o.verdict);
    let verdict = if verdicts().all(|v| v == Verdict::ImmediateConvergence) {
        Verdict::ImmediateConvergence
    } else if verdicts().any(|v| v == Verdict::NotCertified) {
        Verdict::NotCertified
    } else if verdicts().any(|v| v == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::CertifiedStable
    };

    let fits: Vec<&SlopeFit> = seeds.iter().filter_map(|o| o.slope.as_ref()).collect();
    let slope = if fits.is_empty() {
        None
    } else {
        let n = fits.len() as f64;
        let mean = fits.iter().map(|f| f.slope).sum::<f64>() / n;
        let intercept = fits.iter().map(|f| f.intercept).sum::<f64>() / n;
        let stderr = if fits.len() > 1 {
            let var = fits.iter().map(|f| (f.slope - mean) * (f.slope - mean)).sum::<f64>() / (n - 1.0);
            libm::sqrt(var / n)
        } else {
            fits[0].stderr
        };
        Some(SlopeFit {
            slope: mean,
            intercept,
            stderr,
            samples: fits.iter().map(|f| f.samples).sum(),
            first_t: fits.iter().map(|f| f.first_t).min().unwrap_or(0),
            last_t: fits.iter().map(|f| f.last_t).max().unwrap_or(0),
        })
    };

    EvolutionaryReport {
        c_exact,
        report: StabilityReport {
            rate: c_exact,
            rate_stderr: 0.0,
            gamma: None,
            slope,
            verdict,
        },
        seeds,
    }
}

/// Runs the convergence check from `a` for every seed and aggregates.
pub fn evolutionary_stability_report(
    model: &MarketModel,
    a: f64,
    horizon: usize,
    seeds: &[u64],
    tol: &Tolerances,
) -> Result<EvolutionaryReport> {
    if seeds.is_empty() {
        return Err(Error::Usage("seed list is empty".into()));
    }
    let setup = prepare_evolutionary(model, a)?;
    let outcomes = seeds
        .iter()
        .map(|&seed| seed_outcome(&setup, a, horizon, seed, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(setup.c_exact, outcomes))
}
