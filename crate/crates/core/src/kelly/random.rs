use alloc::sync::Arc;
use alloc::vec::Vec;

use super::checks::{check_k1, check_k2_markov};
use super::model::MarketModel;
use crate::env::{check_irreducible, EnvironmentChain};
use crate::rng::Substream;
use crate::{Error, Result};

/// Parameters of the random market generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModelSpec {
    pub states: (usize, usize),
    pub assets: (usize, usize),
    pub rate: (f64, f64),
    /// Chance that a transition entry is zeroed before normalisation.
    pub sparsity: f64,
    pub require_k2: bool,
    pub max_attempts: usize,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self {
            states: (1, 8),
            assets: (2, 5),
            rate: (0.05, 0.95),
            sparsity: 0.3,
            require_k2: false,
            max_attempts: 10_000,
        }
    }
}

/// Counts of rejected draws, by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rejections {
    pub reducible: usize,
    pub k1: usize,
    pub k2: usize,
}

impl Rejections {
    pub fn total(&self) -> usize {
        self.reducible + self.k1 + self.k2
    }
}

/// Uniform draw from the simplex (flat Dirichlet).
pub fn random_simplex(rng: &mut Substream, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.exponential()).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Stochastic matrix with rows drawn from the simplex and entries zeroed
/// with probability `sparsity`. May be reducible.
pub fn random_transition(rng: &mut Substream, states: usize, sparsity: f64) -> Vec<Vec<f64>> {
    (0..states)
        .map(|_| {
            let mut row = random_simplex(rng, states);
            for x in &mut row {
                if rng.uniform() < sparsity {
                    *x = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                let j = rng.range_inclusive(0, states - 1);
                row[j] = 1.0;
            } else {
                for x in &mut row {
                    *x /= sum;
                }
            }
            row
        })
        .collect()
}

/// A valid model with a random rival strategy. Draws failing irreducibility,
/// K1 or (when required) K2 are rejected and counted.
pub fn random_model(rng: &mut Substream, spec: &RandomModelSpec) -> Result<(MarketModel, Rejections)> {
    let mut rejections = Rejections::default();
    for _ in 0..spec.max_attempts {
        let states = rng.range_inclusive(spec.states.0, spec.states.1);
        let assets = rng.range_inclusive(spec.assets.0, spec.assets.1);
        let rate = spec.rate.0 + (spec.rate.1 - spec.rate.0) * rng.uniform();
        let transition = random_transition(rng, states, spec.sparsity);
        if check_irreducible(&transition).is_err() {
            rejections.reducible += 1;
            continue;
        }
        let dividends = (0..states).map(|_| random_simplex(rng, assets)).collect();
        let rival = (0..states).map(|_| random_simplex(rng, assets)).collect();
        let chain = Arc::new(EnvironmentChain::new(&transition)?);
        let model = MarketModel::new(chain, rate, dividends, rival)?;
        if !check_k1(&model).passes {
            rejections.k1 += 1;
            continue;
        }
        if spec.require_k2 && !check_k2_markov(&model)?.passes {
            rejections.k2 += 1;
            continue;
        }
        if rejections.total() > 0 {
            log::debug!(
                "random model accepted after {} rejections ({} reducible, {} K1, {} K2)",
                rejections.total(),
                rejections.reducible,
                rejections.k1,
                rejections.k2
            );
        }
        return Ok((model, rejections));
    }
    Err(Error::Numerical("random model generator exhausted its attempts".into()))
}
