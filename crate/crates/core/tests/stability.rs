mod common;

use common::{chain, persistent_market};
use rdstab_core::env::*;
use rdstab_core::kelly::as_scalar_system;
use rdstab_core::linalg::Matrix;
use rdstab_core::stability::*;

/// `x -> a(s0) sin x`: Lipschitz `a(s0)` on the whole line.
fn damped_sine() -> RandomSystem {
    let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
    RandomSystem::builder(c, 1, |x, w, out| out[0] = [0.5, 1.2][w[0]] * x[0].sin())
        .fixed_point_derivative(|w| Matrix::from_element(1, 1, [0.5, 1.2][w[0]]))
        .lipschitz_bound(|w| ([0.5, 1.2][w[0]], 1.0))
        .radius(1.0)
        .build()
        .unwrap()
}

#[test]
fn certified_rate_bounds_slope_inside_basin() {
    let sys = damped_sine();
    let tol = Tolerances::default();
    for seed in 0..20 {
        let mut s = OmegaStream::new(sys.chain().clone(), seed, 0);
        let data = closed_form_lipschitz(&sys, &mut s, 10_000).unwrap();
        let cert = certify_contraction(&data, &tol).unwrap();
        assert!(cert.is_certified());
        let basin = basin_radius(&data).unwrap();
        assert_eq!(basin.first_violation(&data), None);
        let mut s = OmegaStream::new(sys.chain().clone(), seed, 0);
        let r = verify_exponential_convergence(&sys, &[0.9 * basin.gamma], &mut s, 10_000, cert.rate, &tol).unwrap();
        let slope = r.slope.unwrap().slope;
        assert!(slope <= cert.rate + cert.rate.abs() * 0.15, "seed {seed}: {slope} vs {}", cert.rate);
    }
}

#[test]
fn affine_law_needs_no_shrinking() {
    let c = chain(&[&[0.3, 0.7], &[0.6, 0.4]]);
    let a = [[0.4, -0.2, 0.1, 0.9], [0.8, 0.3, -0.3, 0.2]];
    let sys = RandomSystem::builder(c.clone(), 2, move |x, w, out| {
        let m = &a[w[0]];
        out[0] = m[0] * x[0] + m[1] * x[1];
        out[1] = m[2] * x[0] + m[3] * x[1];
    })
    .fixed_point_derivative(move |w| Matrix::from_row_slice(2, 2, &a[w[0]]))
    .build()
    .unwrap();
    let tol = Tolerances::default();
    let mut s = OmegaStream::new(c.clone(), 3, 0);
    let search = find_contracting_neighborhood(&sys, &mut s, 5_000, 8, 16, &tol).unwrap();
    let mut s = OmegaStream::new(c, 3, 0);
    let expected = linearized_rate(&sys, &mut s, 5_000, &tol).unwrap();
    assert!(expected.is_certified());
    assert_eq!(search.k, Some(1));
    assert!((search.report.rate - expected.rate).abs() <= 1e-12);
    for g in search.data.gk.iter().flatten() {
        assert!(*g <= 1e-12);
    }
}

#[test]
fn quadratic_needs_half_ball_and_shrinks_monotonically() {
    let c = chain(&[&[1.0]]);
    let sys = RandomSystem::builder(c.clone(), 1, |x, _, out| out[0] = 0.5 * x[0] + x[0] * x[0])
        .fixed_point_derivative(|_| Matrix::from_element(1, 1, 0.5))
        .radius(1.0)
        .build()
        .unwrap();
    let mut s = OmegaStream::new(c, 0, 0);
    let search = find_contracting_neighborhood(&sys, &mut s, 1_000, 16, 32, &Tolerances::default()).unwrap();
    assert_eq!(search.k, Some(2));
    let (_, est) = search.level_estimates.iter().find(|(k, _)| *k == 2).unwrap();
    assert!(est.mean < 0.0);
    for t in 0..search.data.f_norms.len() {
        for pair in search.data.gk.windows(2) {
            assert!(pair[1][t] <= pair[0][t]);
        }
    }
}

#[test]
fn market_neighbourhood_is_frozen() {
    let sys = as_scalar_system(&persistent_market()).unwrap();
    let mut s = OmegaStream::new(sys.chain().clone(), 42, 0);
    let search = find_contracting_neighborhood(&sys, &mut s, 10_000, 8, 16, &Tolerances::default()).unwrap();
    assert_eq!(search.k, Some(1));
    assert!((search.report.rate - -0.11743946568744146).abs() < 1e-12, "{}", search.report.rate);
    assert!(search.lipschitz_data().is_some());
}

#[test]
fn market_derivative_stays_below_closed_form_bound() {
    let m = persistent_market();
    let sys = as_scalar_system(&m).unwrap();
    let mut s = OmegaStream::new(sys.chain().clone(), 1, 0);
    let b3 = check_b3(&sys, &mut s, 2_000, &[1.0, 1.0], 65, &Tolerances::default()).unwrap();
    let mut s = OmegaStream::new(sys.chain().clone(), 1, 0);
    let closed = closed_form_lipschitz(&sys, &mut s, 2_000).unwrap();
    for (a, b) in b3.l_values().iter().zip(closed.l_values()) {
        assert!(a <= b, "{a} > {b}");
    }
}

#[test]
fn composed_market_is_holder_with_unit_exponent() {
    let sys = as_scalar_system(&persistent_market()).unwrap();
    let c4 = compose_cocycle(&sys, 4).unwrap();
    let mut s = OmegaStream::new(sys.chain().clone(), 8, 0);
    let h = check_holder(&sys, 4, 1.0, &mut s, 2_000, 0.5, 16).unwrap();
    assert!(h.satisfied);
    assert!(h.witness.is_none());
    assert_eq!(c4.steps(), 4);
}

fn rotation_scale(w: &[usize]) -> Matrix {
    let th: f64 = [0.3, 1.1][w[0]];
    let sc = [1.5, 0.6][w[0]];
    Matrix::from_row_slice(2, 2, &[th.cos() * sc, -th.sin() * sc, th.sin(), th.cos()])
}

#[test]
fn rotation_ladder_is_frozen() {
    let s = OmegaStream::new(chain(&[&[0.5, 0.5], &[0.5, 0.5]]), 42, 0);
    let ladder = furstenberg_kesten(rotation_scale, 1, &s, 256, 16).unwrap();
    assert!((ladder.rungs[0].estimate - 0.2027325540540821).abs() < 1e-12);
    assert!((ladder.limit - -0.003368420608785095).abs() < 1e-12);
    assert!(ladder.limit < ladder.rungs[0].estimate);
    for pair in ladder.rungs.windows(2) {
        assert!(pair[1].running_inf <= pair[0].running_inf);
        let slack = 3.0 * (pair[0].stderr.powi(2) + pair[1].stderr.powi(2)).sqrt();
        assert!(pair[1].estimate <= pair[0].running_inf + slack);
    }
}
