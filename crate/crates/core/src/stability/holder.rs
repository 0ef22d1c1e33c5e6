use alloc::vec;
use alloc::vec::Vec;

use super::sampling::ball_points;
use super::{StabilityReport, Verdict};
use crate::env::{OmegaStream, RandomSystem};
use crate::linalg;
use crate::{Error, Result};

/// Point and cocycle step at which a Hölder ratio overflowed.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderWitness {
    /// Time of the environment window.
    pub t: usize,
    pub x: Vec<f64>,
    /// Cocycle length `j <= M` at which the ratio broke down.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderCheck {
    /// `H(T^t omega)`: largest ratio over the sampled ball and `0 <= j <= M`.
    pub h_values: Vec<f64>,
    /// Empirical `E |ln H|`.
    pub mean_abs_log_h: f64,
    pub satisfied: bool,
    pub witness: Option<HolderWitness>,
}

/// Samples `rho(C_j(x), C_j(xbar)) / rho(x, xbar)^b` for `0 <= j <= m` and
/// `x` in the ball of radius `kappa` around the fixed point.
pub fn check_holder(
    system: &RandomSystem,
    m: usize,
    b: f64,
    stream: &mut OmegaStream,
    horizon: usize,
    kappa: f64,
    samples: usize,
) -> Result<HolderCheck> {
    if !(b > 0.0 && kappa > 0.0) || samples == 0 || horizon == 0 {
        return Err(Error::Usage(
            "Hölder check needs b > 0, kappa > 0 and positive sample and horizon counts".into(),
        ));
    }
    let n = system.dimension();
    let steps = system.steps();
    let offsets = ball_points(n, samples);
    stream.realize((horizon + m) * steps + 1);

    let mut h_values = Vec::with_capacity(horizon);
    let mut x = vec![0.0; n];
    let mut xbar = vec![0.0; n];
    let mut next = vec![0.0; n];
    for t in 0..horizon {
        let s = stream.state(t * steps);
        let center = system.fixed_point(s).to_vec();
        let domain = system.domain(s);
        let mut h: f64 = 0.0;
        for u in &offsets {
            let start: Vec<f64> = center.iter().zip(u).map(|(c, v)| c + kappa * v).collect();
            let start = if domain.contains(&start) {
                start
            } else {
                let reflected: Vec<f64> = center.iter().zip(u).map(|(c, v)| c - kappa * v).collect();
                if !domain.contains(&reflected) {
                    continue;
                }
                reflected
            };
            let base = libm::pow(linalg::distance(&start, &center), b);
            x.copy_from_slice(&start);
            xbar.copy_from_slice(&center);
            for j in 0..=m {
                if j > 0 {
                    let window = stream.window((t + j - 1) * steps, steps + 1);
                    system.apply(&x, window, &mut next);
                    x.copy_from_slice(&next);
                    system.apply(&xbar, window, &mut next);
                    xbar.copy_from_slice(&next);
                }
                let ratio = linalg::distance(&x, &xbar) / base;
                if !ratio.is_finite() {
                    return Ok(HolderCheck {
                        mean_abs_log_h: f64::INFINITY,
                        h_values,
                        satisfied: false,
                        witness: Some(HolderWitness { t, x: start, step: j }),
                    });
                }
                h = h.max(ratio);
            }
        }
        h_values.push(h);
    }
    let mean_abs_log_h =
        h_values.iter().map(|h| libm::fabs(libm::log(*h))).sum::<f64>() / h_values.len() as f64;
    Ok(HolderCheck {
        satisfied: mean_abs_log_h.is_finite(),
        mean_abs_log_h,
        h_values,
        witness: None,
    })
}

/// Per-step rate implied for the original system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferredRate {
    pub d: f64,
    pub stderr: f64,
}

/// `d = b * c / M`: the per-step rate for the original system, given a
/// certified rate `c` for the `M`-step cocycle and a Hölder exponent `b`.
pub fn theorem2_rate(report_for_cm: &StabilityReport, m: usize, b: f64) -> Result<TransferredRate> {
    if report_for_cm.verdict != Verdict::CertifiedStable {
        return Err(Error::Usage(alloc::format!(
            "rate transfer needs a certified cocycle report, got {}",
            report_for_cm.verdict
        )));
    }
    if m == 0 || !(b > 0.0) {
        return Err(Error::Usage("rate transfer needs M >= 1 and b > 0".into()));
    }
    let scale = b / m as f64;
    Ok(TransferredRate {
        d: scale * report_for_cm.rate,
        stderr: scale * report_for_cm.rate_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentChain;
    use alloc::sync::Arc;

    fn doubling() -> RandomSystem {
        let chain = Arc::new(EnvironmentChain::new(&[vec![1.0]]).unwrap());
        RandomSystem::builder(chain, 1, |x, _, out| out[0] = 2.0 * x[0])
            .build()
            .unwrap()
    }

    fn certified(rate: f64) -> StabilityReport {
        StabilityReport {
            rate,
            rate_stderr: 0.03,
            gamma: None,
            slope: None,
            verdict: Verdict::CertifiedStable,
        }
    }

    #[test]
    fn identity_cocycle_ratio_is_one() {
        let sys = doubling();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let r = check_holder(&sys, 0, 1.0, &mut stream, 5, 0.5, 8).unwrap();
        assert!(r.h_values.iter().all(|h| *h == 1.0));
        assert!(r.satisfied);
    }

    #[test]
    fn linear_product() {
        let sys = doubling();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let r = check_holder(&sys, 3, 1.0, &mut stream, 5, 0.5, 8).unwrap();
        assert!(r.h_values.iter().all(|h| (h - 8.0).abs() < 1e-12));
        assert!((r.mean_abs_log_h - libm::log(8.0)).abs() < 1e-12);
    }

    #[test]
    fn overflow_gives_witness() {
        let chain = Arc::new(EnvironmentChain::new(&[vec![1.0]]).unwrap());
        let sys = RandomSystem::builder(chain, 1, |x, _, out| out[0] = x[0] * libm::exp(1e3 * x[0].abs()))
            .radius(1e-4)
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let r = check_holder(&sys, 2, 1.0, &mut stream, 3, 1.0, 4).unwrap();
        assert!(!r.satisfied);
        assert!(r.witness.is_some());
    }

    #[test]
    fn rate_transfer_arithmetic() {
        let d = theorem2_rate(&certified(-0.6), 3, 1.0).unwrap();
        assert!((d.d + 0.2).abs() < 1e-15);
        assert!((d.stderr - 0.01).abs() < 1e-15);
        let d = theorem2_rate(&certified(-0.6), 3, 0.5).unwrap();
        assert!((d.d + 0.1).abs() < 1e-15);
    }

    #[test]
    fn uncertified_rate_rejected() {
        let mut r = certified(0.1);
        r.verdict = Verdict::NotCertified;
        assert!(matches!(theorem2_rate(&r, 3, 1.0), Err(Error::Usage(_))));
    }
}
