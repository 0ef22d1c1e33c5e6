use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::MarketModel;
use crate::linalg::{self, Matrix};
use crate::Result;

/// Kelly weights at or below this count as zero.
pub const K1_THRESHOLD: f64 = 1e-12;
/// Default relative singular-value threshold for the rank test.
pub const K2_RANK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K1Check {
    pub passes: bool,
    /// `min_s min_k lambda*_k(s)`.
    pub witness: f64,
    /// `min_s min_k (P R)_k(s)`, the sufficient-condition witness.
    pub sufficient_witness: f64,
    pub sufficient_passes: bool,
}

pub fn check_k1(model: &MarketModel) -> K1Check {
    let witness = (0..model.num_states())
        .map(|s| model.zeta(s))
        .fold(f64::INFINITY, f64::min);
    let chain = model.chain();
    let states = model.num_states();
    let mut sufficient = f64::INFINITY;
    for s in 0..states {
        for k in 0..model.assets() {
            let pr: f64 = (0..states).map(|sigma| chain.p(s, sigma) * model.dividends()[sigma][k]).sum();
            sufficient = sufficient.min(pr);
        }
    }
    K1Check {
        passes: witness > K1_THRESHOLD,
        witness,
        sufficient_witness: sufficient,
        sufficient_passes: sufficient > K1_THRESHOLD,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct K2Check {
    pub passes: bool,
    /// First state whose successor matrix is rank deficient.
    pub failing_state: Option<usize>,
    /// Smallest singular value of the successor matrix of each state
    /// (zero when there are fewer successors than assets).
    pub min_singular_values: Vec<f64>,
    /// All transition probabilities strictly positive.
    pub positive_transitions: bool,
    /// Smallest and largest transition probability.
    pub v: f64,
    pub big_v: f64,
    pub explanation: Option<String>,
}

/// Rank test on the rows `mu(sigma)`, `P(s, sigma) > 0`, for each state `s`,
/// with the default threshold.
pub fn check_k2_markov(model: &MarketModel) -> Result<K2Check> {
    check_k2_markov_with(model, K2_RANK_THRESHOLD)
}

pub fn check_k2_markov_with(model: &MarketModel, threshold: f64) -> Result<K2Check> {
    let chain = model.chain();
    let k = model.assets();
    let mut failing_state = None;
    let mut explanation = None;
    let mut mins = Vec::with_capacity(model.num_states());
    for s in 0..model.num_states() {
        let succ: Vec<usize> = chain.successors(s).collect();
        let (min, ok) = if succ.len() < k {
            if failing_state.is_none() {
                explanation = Some(format!(
                    "state {s} has {} successors, fewer than {k} assets, so rank {k} is impossible",
                    succ.len()
                ));
            }
            (0.0, false)
        } else {
            let m = Matrix::from_fn(succ.len(), k, |i, j| model.kelly_mu()[succ[i]][j]);
            let sv = linalg::singular_values(&m)?;
            let largest = sv.first().copied().unwrap_or(0.0);
            let smallest = sv.get(k - 1).copied().unwrap_or(0.0);
            let ok = smallest > threshold * largest;
            if !ok && failing_state.is_none() {
                explanation = Some(format!(
                    "state {s}: smallest singular value {smallest:e} of the successor matrix is below {threshold:e} relative to {largest:e}"
                ));
            }
            (smallest, ok)
        };
        if !ok && failing_state.is_none() {
            failing_state = Some(s);
        }
        mins.push(min);
    }
    let (v, big_v) = chain.transition_bounds();
    Ok(K2Check {
        passes: failing_state.is_none(),
        failing_state,
        min_singular_values: mins,
        positive_transitions: v > 0.0,
        v,
        big_v,
        explanation,
    })
}
