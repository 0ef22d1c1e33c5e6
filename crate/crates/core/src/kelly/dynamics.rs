use alloc::format;
use alloc::sync::Arc;
use alloc::vec;

use super::checks::check_k1;
use super::model::MarketModel;
use crate::env::{Domain, RandomSystem};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// `N(x)`, `D(x)` and their derivatives for the wealth-ratio law.
struct Terms {
    num: f64,
    den: f64,
    dnum: f64,
    dden: f64,
}

fn terms(model: &MarketModel, x: f64, s0: usize, s1: usize) -> Terms {
    let lam = &model.rival()[s0];
    let star = &model.kelly()[s0];
    let mu = &model.kelly_mu()[s1];
    let nu = &model.rival_mu()[s1];
    let mut t = Terms {
        num: 0.0,
        den: 0.0,
        dnum: 0.0,
        dden: 0.0,
    };
    for k in 0..model.assets() {
        let d = lam[k] * x + star[k];
        if d == 0.0 {
            // lambda_k = lambda*_k = 0: the asset is held by nobody.
            continue;
        }
        let a = mu[k] * lam[k] / d;
        let b = nu[k] * star[k] / d;
        t.num += a;
        t.den += b;
        t.dnum -= a * lam[k] / d;
        t.dden -= b * lam[k] / d;
    }
    t
}

/// Relative wealth of the rival group after one period, `x_{t+1} = f(x_t)`,
/// given the states `s0 = s_t` and `s1 = s_{t+1}`.
pub fn wealth_map(x: f64, s0: usize, s1: usize, model: &MarketModel) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::NegativeWealth { x });
    }
    Ok(wealth_step(model, x, s0, s1))
}

pub(crate) fn wealth_step(model: &MarketModel, x: f64, s0: usize, s1: usize) -> f64 {
    let t = terms(model, x, s0, s1);
    x * (t.num / t.den)
}

/// `f'(x)` for `x >= 0`.
pub fn wealth_derivative(x: f64, s0: usize, s1: usize, model: &MarketModel) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::NegativeWealth { x });
    }
    let t = terms(model, x, s0, s1);
    Ok(t.num / t.den + x * (t.dnum * t.den - t.num * t.dden) / (t.den * t.den))
}

/// `f'(0) = sum_k mu_k(s1) lambda_k(s0) / lambda*_k(s0)`.
///
/// Evaluated as `N(0) / D(0)`; `D(0) = sum_k nu_k(s1)` is 1 up to rounding,
/// and the ratio is exactly 1 when the rival plays `lambda*`.
pub fn derivative_at_zero(s0: usize, s1: usize, model: &MarketModel) -> f64 {
    let t = terms(model, 0.0, s0, s1);
    t.num / t.den
}

/// `c = sum_{s, sigma} pi(s) P(s, sigma) ln f'(0, s, sigma)`.
pub fn lyapunov_exponent_exact(model: &MarketModel) -> Result<f64> {
    let k1 = check_k1(model);
    if !k1.passes {
        return Err(Error::Usage(format!(
            "K1 fails: min Kelly weight {} is not positive",
            k1.witness
        )));
    }
    let chain = model.chain();
    let pi = chain.stationary();
    let mut c = 0.0;
    for s in 0..chain.num_states() {
        for sigma in chain.successors(s) {
            c += pi[s] * chain.p(s, sigma) * libm::log(derivative_at_zero(s, sigma, model));
        }
    }
    Ok(c)
}

/// The wealth-ratio dynamics as a one-dimensional system on `[0, inf)` with
/// fixed point 0, analytic derivatives and the bound `L = 2 / zeta(s0)^2`,
/// `delta = 1`.
pub fn as_scalar_system(model: &MarketModel) -> Result<RandomSystem> {
    let k1 = check_k1(model);
    if !k1.passes {
        return Err(Error::Usage(format!(
            "K1 fails: min Kelly weight {} is not positive",
            k1.witness
        )));
    }
    let model = Arc::new(model.clone());
    let law = model.clone();
    let fp = model.clone();
    let jac = model.clone();
    let bound = model.clone();
    RandomSystem::builder(model.chain().clone(), 1, move |x, w, out| {
        out[0] = wealth_step(&law, x[0], w[0], w[1]);
    })
    .domain(Domain::Lower(vec![0.0]))
    .fixed_point(vec![0.0])
    .fixed_point_derivative(move |w| Matrix::from_element(1, 1, derivative_at_zero(w[0], w[1], &fp)))
    .jacobian(move |x, w| {
        let d = wealth_derivative(x[0].max(0.0), w[0], w[1], &jac).unwrap_or(f64::NAN);
        Matrix::from_element(1, 1, d)
    })
    .lipschitz_bound(move |w| {
        let z = bound.zeta(w[0]);
        (2.0 / (z * z), 1.0)
    })
    .build()
}
