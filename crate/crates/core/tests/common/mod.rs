#![allow(dead_code)]

use std::sync::Arc;

use rdstab_core::env::EnvironmentChain;
use rdstab_core::kelly::MarketModel;

pub fn chain(p: &[&[f64]]) -> Arc<EnvironmentChain> {
    let rows: Vec<Vec<f64>> = p.iter().map(|r| r.to_vec()).collect();
    Arc::new(EnvironmentChain::new(&rows).unwrap())
}

/// Two states, moderately persistent, opposite dividend profiles.
pub fn sample_market() -> MarketModel {
    MarketModel::new(
        chain(&[&[0.7, 0.3], &[0.4, 0.6]]),
        0.5,
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        vec![vec![0.5, 0.5]; 2],
    )
    .unwrap()
}

/// Two very persistent states with nearly degenerate dividends; the rival
/// is driven out quickly and with little noise.
pub fn persistent_market() -> MarketModel {
    MarketModel::new(
        chain(&[&[0.98, 0.02], &[0.02, 0.98]]),
        0.05,
        vec![vec![0.99, 0.01], vec![0.01, 0.99]],
        vec![vec![0.5, 0.5]; 2],
    )
    .unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
