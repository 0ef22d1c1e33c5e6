use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::birkhoff::{batch_means, Estimate};
use super::contraction::{EstimationMethod, LipschitzData};
use super::sampling::{ball_points, shell_points};
use super::{StabilityReport, Tolerances, Verdict};
use crate::env::{Domain, OmegaStream, RandomSystem};
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Linearisation quantities along a path, one row per shrink level.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationData {
    /// Shrink factors `k = 1, 2, 4, ...`.
    pub levels: Vec<usize>,
    /// `|F(T^t omega)|`.
    pub f_norms: Vec<f64>,
    /// `g_k(T^t omega)`: sampled sup of the remainder ratio over `|h| <= delta / k`.
    pub gk: Vec<Vec<f64>>,
    /// `D_k = |F| + g_k`.
    pub dk: Vec<Vec<f64>>,
    /// `delta(T^t omega)` before shrinking.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSearch {
    /// Smallest `k` whose averaged `ln D_k` is negative with margin.
    pub k: Option<usize>,
    /// Report for the chosen level, or for the finest level if none qualified.
    pub report: StabilityReport,
    pub data: LinearizationData,
    /// `E ln D_k` estimate per level.
    pub level_estimates: Vec<(usize, Estimate)>,
}

impl NeighborhoodSearch {
    /// `(L, delta) = (D_k, delta / k)` for the chosen level: a local
    /// Lipschitz pair in the sense of contraction on average.
    pub fn lipschitz_data(&self) -> Option<LipschitzData> {
        let k = self.k?;
        let level = self.data.levels.iter().position(|l| *l == k)?;
        let deltas = self.data.deltas.iter().map(|d| d / k as f64).collect();
        LipschitzData::new(
            self.data.dk[level].clone(),
            deltas,
            EstimationMethod::SupremumOverGrid,
        )
        .ok()
    }
}

/// Picks `x = center + h`, or the reflection `center - h` if only that lies in
/// the domain.
fn admissible(center: &[f64], h: &[f64], domain: &Domain) -> Option<(Vec<f64>, Vec<f64>)> {
    let plus: Vec<f64> = center.iter().zip(h).map(|(c, v)| c + v).collect();
    if domain.contains(&plus) {
        return Some((plus, h.to_vec()));
    }
    let minus: Vec<f64> = center.iter().zip(h).map(|(c, v)| c - v).collect();
    if domain.contains(&minus) {
        return Some((minus, h.iter().map(|v| -v).collect()));
    }
    None
}

/// Searches `k = 1, 2, 4, ..., <= max_k` for a neighbourhood `|x - xbar| <= delta / k`
/// on which `D_k = |F| + g_k` contracts on average.
///
/// Each level samples `samples_per_omega` points in its own dyadic shell
/// `(delta / 2k, delta / k)`; level `k` takes the sup over its shell and all
/// finer ones, so `g_k` is exactly nonincreasing in `k`.
pub fn find_contracting_neighborhood(
    system: &RandomSystem,
    stream: &mut OmegaStream,
    horizon: usize,
    max_k: usize,
    samples_per_omega: usize,
    tol: &Tolerances,
) -> Result<NeighborhoodSearch> {
    if !system.has_fixed_point_derivative() {
        return Err(Error::Usage(
            "linearisation search needs the derivative at the fixed point".into(),
        ));
    }
    if max_k == 0 || samples_per_omega == 0 || horizon == 0 {
        return Err(Error::Usage(
            "max_k, samples_per_omega and horizon must be positive".into(),
        ));
    }
    let levels: Vec<usize> = (0..usize::BITS)
        .map(|l| 1usize << l)
        .take_while(|k| *k <= max_k)
        .collect();
    let n = system.dimension();
    let steps = system.steps();
    let wlen = system.window_len();
    let shell = shell_points(n, samples_per_omega);

    let mut f_norms = Vec::with_capacity(horizon);
    let mut deltas = Vec::with_capacity(horizon);
    let mut gk = vec![Vec::with_capacity(horizon); levels.len()];
    let mut dk = vec![Vec::with_capacity(horizon); levels.len()];
    let mut fx = vec![0.0; n];
    let mut f_center = vec![0.0; n];
    let mut fh = vec![0.0; n];
    let mut shell_sup = vec![0.0; levels.len()];
    stream.realize(horizon * steps + 1);

    for t in 0..horizon {
        let window = stream.window(t * steps, wlen);
        let s = window[0];
        let center = system.fixed_point(s);
        let delta = system.radius(s);
        let domain = system.domain(s);
        let f = system.fixed_point_derivative(window).expect("checked above");
        let f_norm = linalg::operator_norm(&f)?;
        system.apply(center, window, &mut f_center);

        for (l, k) in levels.iter().enumerate() {
            let scale = delta / *k as f64;
            let mut sup: f64 = 0.0;
            for u in &shell {
                let h0: Vec<f64> = u.iter().map(|v| v * scale).collect();
                let Some((x, h)) = admissible(center, &h0, domain) else {
                    continue;
                };
                system.apply(&x, window, &mut fx);
                linalg::mat_vec(&f, &h, &mut fh);
                let remainder: Vec<f64> = (0..n).map(|i| fx[i] - f_center[i] - fh[i]).collect();
                let ratio = linalg::norm(&remainder) / linalg::norm(&h);
                if !ratio.is_finite() {
                    return Err(Error::NonFinite {
                        t,
                        state: s,
                        context: "linearisation remainder",
                    });
                }
                sup = sup.max(ratio);
            }
            shell_sup[l] = sup;
        }
        // suffix maximum over finer shells
        let mut running: f64 = 0.0;
        for l in (0..levels.len()).rev() {
            running = running.max(shell_sup[l]);
            gk[l].push(running);
            dk[l].push(f_norm + running);
        }
        f_norms.push(f_norm);
        deltas.push(delta);
    }

    let mut level_estimates = Vec::with_capacity(levels.len());
    let mut chosen = None;
    for (l, k) in levels.iter().enumerate() {
        let logs: Vec<f64> = dk[l].iter().map(|d| libm::log(*d)).collect();
        if let Some(t) = logs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t,
                state: 0,
                context: "ln D_k",
            });
        }
        let est = batch_means(&logs, tol.batches);
        if chosen.is_none() && Verdict::from_rate(est.mean, est.stderr, tol.margin) == Verdict::CertifiedStable {
            chosen = Some(l);
        }
        level_estimates.push((*k, est));
    }

    let (k, report) = match chosen {
        Some(l) => (
            Some(levels[l]),
            StabilityReport::from_rate(level_estimates[l].1, tol),
        ),
        None => {
            let last = level_estimates[level_estimates.len() - 1].1;
            let mut r = StabilityReport::from_rate(last, tol);
            r.verdict = Verdict::Inconclusive;
            (None, r)
        }
    };
    Ok(NeighborhoodSearch {
        k,
        report,
        data: LinearizationData {
            levels,
            f_norms,
            gk,
            dk,
            deltas,
        },
        level_estimates,
    })
}

/// Derivative at `y`: the system's Jacobian if it has one, otherwise
/// finite differences (central where both neighbours are admissible).
fn derivative_at(
    system: &RandomSystem,
    y: &[f64],
    window: &[usize],
    domain: &Domain,
    step: f64,
) -> Option<Matrix> {
    if let Some(j) = system.jacobian(y, window) {
        return Some(j);
    }
    let n = y.len();
    let mut jac = Matrix::zeros(n, n);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for i in 0..n {
        let h = step * libm::fabs(y[i]).max(1.0);
        let mut yp = y.to_vec();
        yp[i] += h;
        let mut ym = y.to_vec();
        ym[i] -= h;
        let (hi, lo, width) = match (domain.contains(&yp), domain.contains(&ym)) {
            (true, true) => (yp, ym, 2.0 * h),
            (true, false) => (yp, y.to_vec(), h),
            (false, true) => (y.to_vec(), ym, h),
            (false, false) => return None,
        };
        system.apply(&hi, window, &mut plus);
        system.apply(&lo, window, &mut minus);
        for r in 0..n {
            jac[(r, i)] = (plus[r] - minus[r]) / width;
        }
    }
    Some(jac)
}

/// Lipschitz constants by the mean value inequality: `L_t` is the largest
/// derivative norm over a grid covering the ball of radius `delta(s_t)` around
/// the fixed point (intersected with the domain). The fixed point itself is
/// always on the grid.
pub fn check_b3(
    system: &RandomSystem,
    stream: &mut OmegaStream,
    horizon: usize,
    delta: &[f64],
    grid: usize,
    tol: &Tolerances,
) -> Result<LipschitzData> {
    let states = system.chain().num_states();
    if delta.len() != states {
        return Err(Error::DimensionMismatch {
            what: "per-state radius",
            expected: states,
            found: delta.len(),
        });
    }
    if grid < 2 {
        return Err(Error::Usage("grid needs at least two points".into()));
    }
    let n = system.dimension();
    let offsets: Vec<Vec<f64>> = if n == 1 {
        (0..grid)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (grid - 1) as f64])
            .collect()
    } else {
        ball_points(n, grid)
    };
    let steps = system.steps();
    let wlen = system.window_len();
    stream.realize(horizon * steps + 1);

    let mut ls = Vec::with_capacity(horizon);
    let mut ds = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let window = stream.window(t * steps, wlen);
        let s = window[0];
        let center = system.fixed_point(s);
        let domain = system.domain(s);
        let d = delta[s];
        let mut sup: f64 = 0.0;
        let points = core::iter::once(center.to_vec()).chain(offsets.iter().filter_map(|u| {
            let y: Vec<f64> = center.iter().zip(u).map(|(c, v)| c + d * v).collect();
            domain.contains(&y).then_some(y)
        }));
        for y in points {
            let jac = derivative_at(system, &y, window, domain, tol.fd_step).ok_or_else(|| {
                Error::Numerical(format!("derivative evaluation failed at {y:?} (t = {t})"))
            })?;
            let norm = linalg::operator_norm(&jac).map_err(|_| {
                Error::Numerical(format!("non-finite derivative at {y:?} (t = {t})"))
            })?;
            sup = sup.max(norm);
        }
        ls.push(sup);
        ds.push(d);
    }
    LipschitzData::new(ls, ds, EstimationMethod::SupremumOverGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentChain;
    use alloc::sync::Arc;

    fn single() -> Arc<EnvironmentChain> {
        Arc::new(EnvironmentChain::new(&[vec![1.0]]).unwrap())
    }

    #[test]
    fn linear_map_has_zero_remainder() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = 0.9 * x[0])
            .fixed_point_derivative(|_| Matrix::from_element(1, 1, 0.9))
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let r = find_contracting_neighborhood(&sys, &mut stream, 100, 8, 16, &Tolerances::default())
            .unwrap();
        assert_eq!(r.k, Some(1));
        assert!(r.data.gk.iter().flatten().all(|g| *g == 0.0));
        assert!((r.report.rate - libm::log(0.9)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_needs_k_two() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = 0.5 * x[0] + x[0] * x[0])
            .fixed_point_derivative(|_| Matrix::from_element(1, 1, 0.5))
            .radius(1.0)
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let r = find_contracting_neighborhood(&sys, &mut stream, 100, 16, 64, &Tolerances::default())
            .unwrap();
        assert_eq!(r.k, Some(2));
        for (l, k) in r.data.levels.iter().enumerate() {
            assert!(r.data.gk[l][0] <= 1.0 / *k as f64);
        }
        assert!(r.report.rate < 0.0);
    }

    #[test]
    fn missing_derivative_is_usage_error() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = 0.5 * x[0])
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        assert!(matches!(
            find_contracting_neighborhood(&sys, &mut stream, 100, 4, 8, &Tolerances::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn expanding_map_is_inconclusive() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = 1.5 * x[0])
            .fixed_point_derivative(|_| Matrix::from_element(1, 1, 1.5))
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let r = find_contracting_neighborhood(&sys, &mut stream, 100, 4, 8, &Tolerances::default())
            .unwrap();
        assert_eq!(r.k, None);
        assert_eq!(r.report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn b3_constant_derivative() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = 0.5 * x[0])
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let data = check_b3(&sys, &mut stream, 10, &[3.0], 64, &Tolerances::default()).unwrap();
        assert!(data.l_values().iter().all(|l| (l - 0.5).abs() < 1e-9));
        assert_eq!(data.method(), EstimationMethod::SupremumOverGrid);
    }

    #[test]
    fn b3_sine_peaks_at_fixed_point() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = libm::sin(0.9 * x[0]))
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let data = check_b3(&sys, &mut stream, 5, &[0.1], 64, &Tolerances::default()).unwrap();
        for l in data.l_values() {
            assert!((l - 0.9).abs() < 1e-9, "{l}");
        }
    }

    #[test]
    fn b3_uses_jacobian_when_present() {
        let sys = RandomSystem::builder(single(), 1, |x, _, out| out[0] = 0.5 * x[0] + x[0] * x[0])
            .jacobian(|x, _| Matrix::from_element(1, 1, 0.5 + 2.0 * x[0]))
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(sys.chain().clone(), 0, 0);
        let data = check_b3(&sys, &mut stream, 3, &[0.25], 5, &Tolerances::default()).unwrap();
        assert_eq!(data.l_values()[0], 1.0);
    }
}
