use alloc::vec::Vec;

use super::{StabilityReport, Tolerances, Verdict};
use crate::env::{simulate_path, OmegaStream, RandomSystem};
use crate::linalg;
use crate::{Error, Result};

/// Least-squares line through `(t, ln rho_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical OLS standard error of the slope.
    pub stderr: f64,
    pub samples: usize,
    pub first_t: usize,
    pub last_t: usize,
}

impl SlopeFit {
    /// `slope -/+ z * stderr`.
    pub fn band(&self, z: f64) -> (f64, f64) {
        (self.slope - z * self.stderr, self.slope + z * self.stderr)
    }
}

/// OLS fit of `y` on `t`; needs at least three points.
pub fn fit_slope(points: &[(usize, f64)]) -> Option<SlopeFit> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let t_mean = points.iter().map(|(t, _)| *t as f64).sum::<f64>() / nf;
    let y_mean = points.iter().map(|(_, y)| *y).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, y) in points {
        let dt = *t as f64 - t_mean;
        sxx += dt * dt;
        sxy += dt * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let sse: f64 = points
        .iter()
        .map(|(t, y)| {
            let r = y - intercept - slope * *t as f64;
            r * r
        })
        .sum();
    Some(SlopeFit {
        slope,
        intercept,
        stderr: libm::sqrt(sse / (nf - 2.0) / sxx),
        samples: n,
        first_t: points[0].0,
        last_t: points[n - 1].0,
    })
}

/// Simulates `x_t^a` next to the equilibrium path and checks that
/// `ln rho(x_t^a, xbar_t)` decays at least as fast as `claimed_rate`, up to
/// the relative slack `tol.slope_tolerance`.
///
/// Distances below `tol.underflow` are discarded, then the leading
/// `tol.burn_in` fraction of the remaining samples is dropped before the fit.
/// A distance that is exactly zero before any underflow means the paths
/// merged.
pub fn verify_exponential_convergence(
    system: &RandomSystem,
    a: &[f64],
    stream: &mut OmegaStream,
    horizon: usize,
    claimed_rate: f64,
    tol: &Tolerances,
) -> Result<StabilityReport> {
    if !claimed_rate.is_finite() {
        return Err(Error::Usage("claimed rate must be finite".into()));
    }
    let path = simulate_path(system, a, stream, horizon)?;
    let merged = StabilityReport {
        rate: claimed_rate,
        rate_stderr: 0.0,
        gamma: None,
        slope: None,
        verdict: Verdict::ImmediateConvergence,
    };

    let mut points = Vec::with_capacity(path.len());
    let mut underflowed = false;
    for (t, s, x) in path.iter() {
        let rho = linalg::distance(x, system.fixed_point(s));
        if rho == 0.0 && !underflowed {
            return Ok(merged);
        }
        if rho < tol.underflow {
            underflowed = true;
            continue;
        }
        points.push((t, libm::log(rho)));
    }
    let skip = (points.len() as f64 * tol.burn_in) as usize;
    let fit = fit_slope(&points[skip..]);

    let verdict = match fit {
        None => Verdict::Inconclusive,
        Some(_) if claimed_rate >= 0.0 => Verdict::NotCertified,
        Some(f) if f.slope <= claimed_rate + libm::fabs(claimed_rate) * tol.slope_tolerance => {
            Verdict::CertifiedStable
        }
        Some(_) => Verdict::NotCertified,
    };
    Ok(StabilityReport {
        rate: claimed_rate,
        rate_stderr: 0.0,
        gamma: None,
        slope: fit,
        verdict,
    })
}
