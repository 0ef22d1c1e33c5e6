//! Stability certificates and rate estimators.
//!
//! Expectations are replaced by Birkhoff averages along realised environment
//! paths; an estimate is treated as negative only when it stays negative
//! after adding [`Tolerances::margin`] batch-means standard errors.

mod birkhoff;
mod contraction;
mod convergence;
mod fk;
mod holder;
mod linearization;
pub mod sampling;

pub use birkhoff::{batch_means, birkhoff_average, Estimate};
pub use contraction::{
    basin_radius, certify_contraction, closed_form_lipschitz, linearized_rate, log_products,
    BasinRadius, EstimationMethod, LipschitzData,
};
pub use convergence::{fit_slope, verify_exponential_convergence, SlopeFit};
pub use fk::{furstenberg_kesten, FkLadder, FkRung};
pub use holder::{check_holder, theorem2_rate, HolderCheck, HolderWitness, TransferredRate};
pub use linearization::{
    check_b3, find_contracting_neighborhood, LinearizationData, NeighborhoodSearch,
};

/// Numerical knobs shared by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Standard errors an estimate must clear to count as negative.
    pub margin: f64,
    /// Batches used for batch-means standard errors.
    pub batches: usize,
    /// Relative slack on a claimed rate when judging a fitted slope.
    pub slope_tolerance: f64,
    /// Fraction of leading samples dropped before fitting a slope.
    pub burn_in: f64,
    /// Distances below this are treated as underflowed and discarded.
    pub underflow: f64,
    /// Sample points per ball, shell or segment when approximating suprema.
    pub sup_samples: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            margin: 3.0,
            batches: 30,
            slope_tolerance: 0.15,
            burn_in: 0.2,
            underflow: 1e-300,
            sup_samples: 64,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedStable,
    NotCertified,
    Inconclusive,
    /// The trajectory starts on (or merges with) the equilibrium path.
    ImmediateConvergence,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CertifiedStable => "certified-stable",
            Verdict::NotCertified => "not-certified",
            Verdict::Inconclusive => "inconclusive",
            Verdict::ImmediateConvergence => "immediate-convergence",
        }
    }

    /// Verdict on the sign of an estimated rate.
    pub fn from_rate(mean: f64, stderr: f64, margin: f64) -> Self {
        if mean + margin * stderr < 0.0 {
            Verdict::CertifiedStable
        } else if mean - margin * stderr >= 0.0 {
            Verdict::NotCertified
        } else {
            Verdict::Inconclusive
        }
    }
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of a certificate or convergence check.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Estimated rate in nats per application of the law.
    pub rate: f64,
    pub rate_stderr: f64,
    /// Basin radius candidate `1 / sigma` when one was computed.
    pub gamma: Option<f64>,
    pub slope: Option<SlopeFit>,
    pub verdict: Verdict,
}

impl StabilityReport {
    pub(crate) fn from_rate(rate: Estimate, tol: &Tolerances) -> Self {
        Self {
            rate: rate.mean,
            rate_stderr: rate.stderr,
            gamma: None,
            slope: None,
            verdict: Verdict::from_rate(rate.mean, rate.stderr, tol.margin),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedStable
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_requires_margin() {
        assert_eq!(Verdict::from_rate(-0.1, 0.01, 3.0), Verdict::CertifiedStable);
        assert_eq!(Verdict::from_rate(-0.1, 0.04, 3.0), Verdict::Inconclusive);
        assert_eq!(Verdict::from_rate(0.0, 0.0, 3.0), Verdict::NotCertified);
        assert_eq!(Verdict::from_rate(-1.0, f64::INFINITY, 3.0), Verdict::Inconclusive);
    }
}
