use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::EnvironmentChain;
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Tolerance of the pathwise fixed-point identity `f(xbar(s), s, sigma) = xbar(sigma)`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

/// `law(x, window, out)`: writes `f(x, omega)` for the state window `(s_0, ..., s_steps)`.
pub type LawFn = dyn Fn(&[f64], &[usize], &mut [f64]) + Send + Sync;
/// Derivative of the law at the random fixed point, as a function of the window.
pub type FixedPointDerivativeFn = dyn Fn(&[usize]) -> Matrix + Send + Sync;
/// Derivative of the law at an arbitrary point.
pub type JacobianFn = dyn Fn(&[f64], &[usize]) -> Matrix + Send + Sync;
/// Closed-form local Lipschitz data `(L(omega), delta(omega))` for a window.
pub type LipschitzBoundFn = dyn Fn(&[usize]) -> (f64, f64) + Send + Sync;

/// Per-state admissible set `X(omega)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Whole,
    /// Coordinatewise lower bounds; a half-line in one dimension.
    Lower(Vec<f64>),
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Whole => x.iter().all(|v| v.is_finite()),
            Domain::Lower(lower) => x.iter().zip(lower).all(|(v, lo)| v.is_finite() && v >= lo),
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| v.is_finite() && v >= lo && v <= hi),
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            Domain::Whole => None,
            Domain::Lower(lower) => Some(lower.len()),
            Domain::Box { lower, upper } => Some(lower.len().max(upper.len())),
        }
    }
}

/// A random law of motion `x -> f(x, omega)` on `R^n` with a random fixed point.
///
/// `f` depends on the environment through a window of `steps + 1` consecutive
/// states; one application advances the environment by `steps`. Systems built
/// with [`RandomSystem::builder`] have `steps = 1`; [`compose_cocycle`]
/// produces longer windows.
#[derive(Clone)]
pub struct RandomSystem {
    chain: Arc<EnvironmentChain>,
    dimension: usize,
    steps: usize,
    law: Arc<LawFn>,
    domains: Vec<Domain>,
    fixed_points: Vec<Vec<f64>>,
    radii: Vec<f64>,
    fixed_point_derivative: Option<Arc<FixedPointDerivativeFn>>,
    jacobian: Option<Arc<JacobianFn>>,
    lipschitz_bound: Option<Arc<LipschitzBoundFn>>,
}

impl core::fmt::Debug for RandomSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RandomSystem")
            .field("dimension", &self.dimension)
            .field("steps", &self.steps)
            .field("domains", &self.domains)
            .field("fixed_points", &self.fixed_points)
            .field("radii", &self.radii)
            .field("has_derivative", &self.fixed_point_derivative.is_some())
            .finish_non_exhaustive()
    }
}

impl RandomSystem {
    pub fn builder<F>(chain: Arc<EnvironmentChain>, dimension: usize, law: F) -> SystemBuilder
    where
        F: Fn(&[f64], &[usize], &mut [f64]) + Send + Sync + 'static,
    {
        let states = chain.num_states();
        SystemBuilder {
            system: RandomSystem {
                chain,
                dimension,
                steps: 1,
                law: Arc::new(law),
                domains: vec![Domain::Whole; states],
                fixed_points: vec![vec![0.0; dimension]; states],
                radii: vec![1.0; states],
                fixed_point_derivative: None,
                jacobian: None,
                lipschitz_bound: None,
            },
        }
    }

    pub fn chain(&self) -> &Arc<EnvironmentChain> {
        &self.chain
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Environment steps consumed per application.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of states the law reads: `steps + 1`.
    pub fn window_len(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn apply(&self, x: &[f64], window: &[usize], out: &mut [f64]) {
        debug_assert_eq!(window.len(), self.window_len());
        (self.law)(x, window, out)
    }

    pub fn apply_vec(&self, x: &[f64], window: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.apply(x, window, &mut out);
        out
    }

    pub fn domain(&self, state: usize) -> &Domain {
        &self.domains[state]
    }

    pub fn fixed_point(&self, state: usize) -> &[f64] {
        &self.fixed_points[state]
    }

    /// User-declared neighbourhood radius `delta(omega)` for `state`.
    pub fn radius(&self, state: usize) -> f64 {
        self.radii[state]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn has_fixed_point_derivative(&self) -> bool {
        self.fixed_point_derivative.is_some()
    }

    /// `F(omega) = f'(xbar(omega), omega)` if the system carries it.
    pub fn fixed_point_derivative(&self, window: &[usize]) -> Option<Matrix> {
        self.fixed_point_derivative.as_ref().map(|d| d(window))
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn jacobian(&self, x: &[f64], window: &[usize]) -> Option<Matrix> {
        self.jacobian.as_ref().map(|j| j(x, window))
    }

    pub fn lipschitz_bound(&self, window: &[usize]) -> Option<(f64, f64)> {
        self.lipschitz_bound.as_ref().map(|b| b(window))
    }
}

pub struct SystemBuilder {
    system: RandomSystem,
}

impl SystemBuilder {
    /// Same domain in every state.
    pub fn domain(mut self, domain: Domain) -> Self {
        let n = self.system.domains.len();
        self.system.domains = vec![domain; n];
        self
    }

    pub fn domains(mut self, domains: Vec<Domain>) -> Self {
        self.system.domains = domains;
        self
    }

    /// Deterministic fixed point.
    pub fn fixed_point(mut self, point: Vec<f64>) -> Self {
        let n = self.system.fixed_points.len();
        self.system.fixed_points = vec![point; n];
        self
    }

    pub fn fixed_points(mut self, points: Vec<Vec<f64>>) -> Self {
        self.system.fixed_points = points;
        self
    }

    pub fn radius(mut self, radius: f64) -> Self {
        let n = self.system.radii.len();
        self.system.radii = vec![radius; n];
        self
    }

    pub fn radii(mut self, radii: Vec<f64>) -> Self {
        self.system.radii = radii;
        self
    }

    pub fn fixed_point_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(&[usize]) -> Matrix + Send + Sync + 'static,
    {
        self.system.fixed_point_derivative = Some(Arc::new(f));
        self
    }

    pub fn jacobian<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[usize]) -> Matrix + Send + Sync + 'static,
    {
        self.system.jacobian = Some(Arc::new(f));
        self
    }

    pub fn lipschitz_bound<F>(mut self, f: F) -> Self
    where
        F: Fn(&[usize]) -> (f64, f64) + Send + Sync + 'static,
    {
        self.system.lipschitz_bound = Some(Arc::new(f));
        self
    }

    /// Checks dimensions, the pathwise fixed-point identity on every positive
    /// transition, and that sampled domain points map into the successor domain.
    pub fn build(self) -> Result<RandomSystem> {
        let sys = self.system;
        let states = sys.chain.num_states();
        let n = sys.dimension;
        if n == 0 {
            return Err(Error::DimensionMismatch {
                what: "state space",
                expected: 1,
                found: 0,
            });
        }
        for (what, found) in [
            ("domains", sys.domains.len()),
            ("fixed points", sys.fixed_points.len()),
            ("radii", sys.radii.len()),
        ] {
            if found != states {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: states,
                    found,
                });
            }
        }
        for s in 0..states {
            if let Some(d) = sys.domains[s].dimension() {
                if d != n {
                    return Err(Error::DimensionMismatch {
                        what: "domain",
                        expected: n,
                        found: d,
                    });
                }
            }
            if sys.fixed_points[s].len() != n {
                return Err(Error::DimensionMismatch {
                    what: "fixed point",
                    expected: n,
                    found: sys.fixed_points[s].len(),
                });
            }
            if !sys.domains[s].contains(&sys.fixed_points[s]) {
                return Err(Error::InitialOutsideDomain { state: s });
            }
            if !(sys.radii[s].is_finite() && sys.radii[s] > 0.0) {
                return Err(Error::Usage(alloc::format!(
                    "radius for state {s} must be positive and finite"
                )));
            }
        }

        let mut out = vec![0.0; n];
        for s in 0..states {
            let probes = domain_probes(&sys.fixed_points[s], sys.radii[s], &sys.domains[s]);
            for sigma in sys.chain.successors(s) {
                let window = [s, sigma];
                sys.apply(&sys.fixed_points[s], &window, &mut out);
                let residual = linalg::distance(&out, &sys.fixed_points[sigma]);
                if !(residual <= FIXED_POINT_TOLERANCE) {
                    return Err(Error::FixedPointInconsistent {
                        from: s,
                        to: sigma,
                        residual,
                    });
                }
                for x in &probes {
                    sys.apply(x, &window, &mut out);
                    if !sys.domains[sigma].contains(&out) {
                        return Err(Error::DomainNotInvariant { from: s, to: sigma });
                    }
                }
            }
        }
        Ok(sys)
    }
}

/// Axis-aligned probes around the fixed point at a few multiples of the radius.
fn domain_probes(center: &[f64], radius: f64, domain: &Domain) -> Vec<Vec<f64>> {
    let mut probes = Vec::new();
    for axis in 0..center.len() {
        for scale in [0.1, 0.5, 1.0] {
            for sign in [1.0, -1.0] {
                let mut x = center.to_vec();
                x[axis] += sign * scale * radius;
                if domain.contains(&x) {
                    probes.push(x);
                }
            }
        }
    }
    probes
}

/// `C_M(., omega) = f_M o ... o f_1`: the `M`-step cocycle as a system whose
/// window spans `M * steps + 1` states.
///
/// The fixed point is unchanged. Derivatives compose by the chain rule, and a
/// closed-form Lipschitz bound `(L, delta)` of the base system becomes
/// `(L_1 ... L_M, min_t delta_t / (L_1 ... L_t))`.
pub fn compose_cocycle(system: &RandomSystem, m: usize) -> Result<RandomSystem> {
    if m == 0 {
        return Err(Error::Usage("cocycle length M must be at least 1".into()));
    }
    if m == 1 {
        return Ok(system.clone());
    }
    let n = system.dimension;
    let bs = system.steps;

    let base = system.clone();
    let law = move |x: &[f64], window: &[usize], out: &mut [f64]| {
        let mut current = x.to_vec();
        for j in 0..m {
            base.apply(&current, &window[j * bs..=(j + 1) * bs], out);
            current.copy_from_slice(out);
        }
    };

    let fixed_point_derivative = system.fixed_point_derivative.as_ref().map(|_| {
        let base = system.clone();
        Arc::new(move |window: &[usize]| {
            let mut product = Matrix::identity(n, n);
            for j in 0..m {
                let f = base
                    .fixed_point_derivative(&window[j * bs..=(j + 1) * bs])
                    .expect("base derivative present");
                product = f * product;
            }
            product
        }) as Arc<FixedPointDerivativeFn>
    });

    let jacobian = system.jacobian.as_ref().map(|_| {
        let base = system.clone();
        Arc::new(move |x: &[f64], window: &[usize]| {
            let mut product = Matrix::identity(n, n);
            let mut current = x.to_vec();
            let mut next = vec![0.0; n];
            for j in 0..m {
                let w = &window[j * bs..=(j + 1) * bs];
                let jac = base.jacobian(&current, w).expect("base jacobian present");
                product = jac * product;
                base.apply(&current, w, &mut next);
                core::mem::swap(&mut current, &mut next);
            }
            product
        }) as Arc<JacobianFn>
    });

    let lipschitz_bound = system.lipschitz_bound.as_ref().map(|_| {
        let base = system.clone();
        Arc::new(move |window: &[usize]| {
            let mut product = 1.0;
            let mut kappa = f64::INFINITY;
            for j in 0..m {
                let (l, delta) = base
                    .lipschitz_bound(&window[j * bs..=(j + 1) * bs])
                    .expect("base bound present");
                kappa = kappa.min(delta / product);
                product *= l;
            }
            (product, kappa)
        }) as Arc<LipschitzBoundFn>
    });

    Ok(RandomSystem {
        chain: system.chain.clone(),
        dimension: n,
        steps: bs * m,
        law: Arc::new(law),
        domains: system.domains.clone(),
        fixed_points: system.fixed_points.clone(),
        radii: system.radii.clone(),
        fixed_point_derivative,
        jacobian,
        lipschitz_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Arc<EnvironmentChain> {
        Arc::new(EnvironmentChain::new(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap())
    }

    fn scaled(chain: Arc<EnvironmentChain>) -> RandomSystem {
        // x -> a(s_0) x with a = (0.5, 1.5)
        RandomSystem::builder(chain, 1, |x, w, out| {
            out[0] = [0.5, 1.5][w[0]] * x[0];
        })
        .fixed_point_derivative(|w| Matrix::from_element(1, 1, [0.5, 1.5][w[0]]))
        .lipschitz_bound(|w| ([0.5, 1.5][w[0]], 1.0))
        .build()
        .unwrap()
    }

    #[test]
    fn inconsistent_fixed_point_rejected() {
        let err = RandomSystem::builder(chain(), 1, |x, _, out| out[0] = 0.5 * x[0] + 1.0)
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::FixedPointInconsistent { .. }));
    }

    #[test]
    fn random_fixed_point_accepted() {
        // x -> x - c(s_0) + c(s_1) has fixed point c(s)
        let c = [1.0, -2.0];
        let sys = RandomSystem::builder(chain(), 1, move |x, w, out| {
            out[0] = 0.5 * (x[0] - c[w[0]]) + c[w[1]];
        })
        .fixed_points(vec![vec![1.0], vec![-2.0]])
        .build()
        .unwrap();
        assert_eq!(sys.apply_vec(&[1.0], &[0, 1]), vec![-2.0]);
    }

    #[test]
    fn domain_escape_rejected() {
        let err = RandomSystem::builder(chain(), 1, |x, _, out| out[0] = -x[0])
            .domain(Domain::Lower(vec![0.0]))
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::DomainNotInvariant { .. }));
    }

    #[test]
    fn compose_one_is_identity() {
        let sys = scaled(chain());
        let c1 = compose_cocycle(&sys, 1).unwrap();
        for x in [-1.0, 0.3, 2.0] {
            for w in [[0, 0], [0, 1], [1, 0], [1, 1]] {
                assert_eq!(c1.apply_vec(&[x], &w), sys.apply_vec(&[x], &w));
            }
        }
    }

    #[test]
    fn compose_zero_is_usage_error() {
        assert!(matches!(compose_cocycle(&scaled(chain()), 0), Err(Error::Usage(_))));
    }

    #[test]
    fn composed_derivative_and_bound() {
        let c3 = compose_cocycle(&scaled(chain()), 3).unwrap();
        assert_eq!(c3.window_len(), 4);
        let w = [0, 1, 1, 0];
        let d = c3.fixed_point_derivative(&w).unwrap();
        assert!((d[(0, 0)] - 0.5 * 1.5 * 1.5).abs() < 1e-15);
        let (l, kappa) = c3.lipschitz_bound(&w).unwrap();
        assert!((l - 1.125).abs() < 1e-15);
        // delta_t / (L_1 ... L_t) for t = 0, 1, 2: 1, 2, 1/0.75
        assert!((kappa - 1.0).abs() < 1e-15);
        assert!((c3.apply_vec(&[2.0], &w)[0] - 2.25).abs() < 1e-15);
    }
}
