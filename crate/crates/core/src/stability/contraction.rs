use alloc::vec::Vec;

use super::birkhoff::{batch_means, sample_along};
use super::{StabilityReport, Tolerances, Verdict};
use crate::env::{OmegaStream, RandomSystem};
use crate::linalg;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    SupremumOverGrid,
    ClosedForm,
    UserSupplied,
}

impl EstimationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimationMethod::SupremumOverGrid => "exact-supremum-over-grid",
            EstimationMethod::ClosedForm => "closed-form",
            EstimationMethod::UserSupplied => "user-supplied",
        }
    }
}

/// Local Lipschitz data along a realised path.
///
/// `l_values[i]` is `L(T^i omega)`, the constant for the step from time `i`
/// to `i + 1`; `delta_values[t]` is `delta(T^t omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzData {
    l_values: Vec<f64>,
    delta_values: Vec<f64>,
    method: EstimationMethod,
}

impl LipschitzData {
    pub fn new(l_values: Vec<f64>, delta_values: Vec<f64>, method: EstimationMethod) -> Result<Self> {
        if l_values.len() != delta_values.len() {
            return Err(Error::DimensionMismatch {
                what: "Lipschitz data",
                expected: l_values.len(),
                found: delta_values.len(),
            });
        }
        for (t, (&l, &d)) in l_values.iter().zip(&delta_values).enumerate() {
            if !(l.is_finite() && l > 0.0 && d.is_finite() && d > 0.0) {
                return Err(Error::NonFinite {
                    t,
                    state: 0,
                    context: "Lipschitz data must be positive and finite",
                });
            }
        }
        Ok(Self {
            l_values,
            delta_values,
            method,
        })
    }

    pub fn constant(l: f64, delta: f64, len: usize) -> Result<Self> {
        Self::new(alloc::vec![l; len], alloc::vec![delta; len], EstimationMethod::UserSupplied)
    }

    pub fn l_values(&self) -> &[f64] {
        &self.l_values
    }

    pub fn delta_values(&self) -> &[f64] {
        &self.delta_values
    }

    pub fn method(&self) -> EstimationMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.l_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l_values.is_empty()
    }
}

/// The system's closed-form bound `(L, delta)` evaluated along `stream`.
pub fn closed_form_lipschitz(
    system: &RandomSystem,
    stream: &mut OmegaStream,
    horizon: usize,
) -> Result<LipschitzData> {
    if system.lipschitz_bound(&alloc::vec![0; system.window_len()]).is_none() {
        return Err(Error::Usage("system carries no closed-form Lipschitz bound".into()));
    }
    let mut deltas = Vec::with_capacity(horizon);
    let ls = sample_along(
        stream,
        system.steps(),
        system.window_len(),
        horizon,
        "closed-form Lipschitz bound",
        |_, w| {
            let (l, d) = system.lipschitz_bound(w).expect("checked above");
            deltas.push(d);
            Ok(l)
        },
    )?;
    LipschitzData::new(ls, deltas, EstimationMethod::ClosedForm)
}

/// Certifies local contraction on average: `E ln L < 0` with the
/// integrability proxies `E|ln L|`, `E|ln delta|` finite.
pub fn certify_contraction(lipschitz: &LipschitzData, tol: &Tolerances) -> Result<StabilityReport> {
    if lipschitz.is_empty() {
        return Err(Error::Usage("Lipschitz data is empty".into()));
    }
    let logs: Vec<f64> = lipschitz.l_values.iter().map(|l| libm::log(*l)).collect();
    let n = logs.len() as f64;
    let abs_ln_l = logs.iter().map(|v| libm::fabs(*v)).sum::<f64>() / n;
    let abs_ln_delta = lipschitz
        .delta_values
        .iter()
        .map(|d| libm::fabs(libm::log(*d)))
        .sum::<f64>()
        / n;
    let mut report = StabilityReport::from_rate(batch_means(&logs, tol.batches), tol);
    if !(abs_ln_l.is_finite() && abs_ln_delta.is_finite()) {
        report.verdict = Verdict::NotCertified;
    }
    Ok(report)
}

/// Rate of the linearisation: Birkhoff average of `ln |F(omega)|` along the
/// system's application windows.
pub fn linearized_rate(
    system: &RandomSystem,
    stream: &mut OmegaStream,
    horizon: usize,
    tol: &Tolerances,
) -> Result<StabilityReport> {
    if !system.has_fixed_point_derivative() {
        return Err(Error::Usage("system has no derivative at the fixed point".into()));
    }
    let logs = sample_along(
        stream,
        system.steps(),
        system.window_len(),
        horizon,
        "log-norm of the fixed-point derivative",
        |_, w| {
            let f = system.fixed_point_derivative(w).expect("checked above");
            Ok(libm::log(linalg::operator_norm(&f)?))
        },
    )?;
    Ok(StabilityReport::from_rate(batch_means(&logs, tol.batches), tol))
}

/// Partial sums `S_t = ln L_1 + ... + ln L_t` with `S_0 = 0` (`L_0 := 1`).
pub fn log_products(lipschitz: &LipschitzData) -> Vec<f64> {
    let mut sums = Vec::with_capacity(lipschitz.len());
    let mut acc = 0.0;
    sums.push(acc);
    for l in lipschitz.l_values.iter().take(lipschitz.len().saturating_sub(1)) {
        acc += libm::log(*l);
        sums.push(acc);
    }
    sums
}

/// `sigma = sup_t L_t ... L_0 / delta_t` over the simulated horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinRadius {
    pub sigma: f64,
    pub log_sigma: f64,
    /// `1 / sigma`.
    pub gamma: f64,
    /// First time at which the supremum is attained.
    pub attained_at: usize,
    /// The running supremum did not grow over the second half of the horizon.
    pub stabilized: bool,
}

impl BasinRadius {
    /// First `t` violating `gamma <= delta_0` or `L_t ... L_1 gamma <= delta_t`,
    /// compared in log space with a relative slack of `1e-12`.
    pub fn first_violation(&self, lipschitz: &LipschitzData) -> Option<usize> {
        let log_gamma = -self.log_sigma;
        log_products(lipschitz)
            .iter()
            .zip(&lipschitz.delta_values)
            .position(|(s, d)| {
                let lhs = s + log_gamma;
                let rhs = libm::log(*d);
                lhs > rhs + 1e-12 * (1.0 + libm::fabs(rhs))
            })
    }
}

/// Finite-horizon basin radius candidate. Products are accumulated in log
/// space.
pub fn basin_radius(lipschitz: &LipschitzData) -> Result<BasinRadius> {
    if lipschitz.is_empty() {
        return Err(Error::Usage("Lipschitz data is empty".into()));
    }
    let sums = log_products(lipschitz);
    let mut log_sigma = f64::NEG_INFINITY;
    let mut attained_at = 0;
    for (t, (s, d)) in sums.iter().zip(&lipschitz.delta_values).enumerate() {
        let v = s - libm::log(*d);
        if v > log_sigma {
            log_sigma = v;
            attained_at = t;
        }
    }
    Ok(BasinRadius {
        sigma: libm::exp(log_sigma),
        log_sigma,
        gamma: libm::exp(-log_sigma),
        attained_at,
        stabilized: attained_at <= sums.len() / 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_contraction_certified() {
        let data = LipschitzData::constant(0.5, 1.0, 100).unwrap();
        let r = certify_contraction(&data, &Tolerances::default()).unwrap();
        assert!((r.rate - libm::log(0.5)).abs() < 1e-14);
        assert_eq!(r.verdict, Verdict::CertifiedStable);
    }

    #[test]
    fn unit_lipschitz_not_certified() {
        let data = LipschitzData::constant(1.0, 1.0, 100).unwrap();
        let r = certify_contraction(&data, &Tolerances::default()).unwrap();
        assert_eq!(r.rate, 0.0);
        assert_eq!(r.verdict, Verdict::NotCertified);
    }

    #[test]
    fn empty_is_usage_error() {
        let data = LipschitzData::constant(0.5, 1.0, 0).unwrap();
        assert!(matches!(
            certify_contraction(&data, &Tolerances::default()),
            Err(Error::Usage(_))
        ));
        assert!(matches!(basin_radius(&data), Err(Error::Usage(_))));
    }

    #[test]
    fn rejects_nonpositive_entries() {
        assert!(LipschitzData::new(vec![0.5, 0.0], vec![1.0, 1.0], EstimationMethod::UserSupplied).is_err());
        assert!(LipschitzData::new(vec![0.5], vec![1.0, 1.0], EstimationMethod::UserSupplied).is_err());
    }

    #[test]
    fn basin_sup_at_origin() {
        let b = basin_radius(&LipschitzData::constant(0.5, 1.0, 100).unwrap()).unwrap();
        assert_eq!(b.sigma, 1.0);
        assert_eq!(b.gamma, 1.0);
        assert_eq!(b.attained_at, 0);
        assert!(b.stabilized);
    }

    #[test]
    fn basin_transient_growth() {
        // L = 2 for the first four steps, then 0.1
        let ls: Vec<f64> = (0..100).map(|i| if i <= 3 { 2.0 } else { 0.1 }).collect();
        let data = LipschitzData::new(ls, vec![1.0; 100], EstimationMethod::UserSupplied).unwrap();
        let b = basin_radius(&data).unwrap();
        assert!((b.sigma - 16.0).abs() < 1e-12);
        assert!((b.gamma - 1.0 / 16.0).abs() < 1e-14);
        assert_eq!(b.attained_at, 4);
        assert_eq!(b.first_violation(&data), None);
    }

    #[test]
    fn basin_small_delta() {
        let b = basin_radius(&LipschitzData::constant(0.5, 0.5, 100).unwrap()).unwrap();
        assert!((b.sigma - 2.0).abs() < 1e-15);
        assert!((b.gamma - 0.5).abs() < 1e-15);
    }

    #[test]
    fn basin_divergence_flagged() {
        let b = basin_radius(&LipschitzData::constant(1.1, 1.0, 100).unwrap()).unwrap();
        assert!(!b.stabilized);
        assert_eq!(b.attained_at, 99);
    }

    #[test]
    fn violation_detected_for_larger_gamma() {
        let data = LipschitzData::constant(0.5, 0.5, 10).unwrap();
        let mut b = basin_radius(&data).unwrap();
        b.log_sigma -= 0.1;
        assert_eq!(b.first_violation(&data), Some(0));
    }
}
