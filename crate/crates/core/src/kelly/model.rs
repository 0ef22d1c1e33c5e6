use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::solve::{solve_kelly_checked, KellySolution};
use crate::env::{EnvironmentChain, SUM_TOLERANCE};
use crate::{Error, Result};

/// Two investor groups in a market of `K` assets driven by the environment
/// chain: Kelly investors using `lambda*` and rivals using `lambda`.
///
/// All strategies and relative dividends are per-state vectors in the unit
/// simplex. `lambda*` is always solved from the dividends, never supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    chain: Arc<EnvironmentChain>,
    rate: f64,
    assets: usize,
    dividends: Vec<Vec<f64>>,
    rival: Vec<Vec<f64>>,
    kelly: Vec<Vec<f64>>,
    /// `mu(s) = r lambda*(s) + (1 - r) R(s)`.
    kelly_mu: Vec<Vec<f64>>,
    /// `nu(s) = r lambda(s) + (1 - r) R(s)`.
    rival_mu: Vec<Vec<f64>>,
    iterations: usize,
}

/// Entries finite and nonnegative, sum within [`SUM_TOLERANCE`] of 1.
pub fn check_simplex(v: &[f64], what: &'static str, state: usize) -> Result<()> {
    if let Some((k, x)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::NotInSimplex {
            what,
            state,
            reason: format!("entry {k} = {x}"),
        });
    }
    let sum: f64 = v.iter().sum();
    if libm::fabs(sum - 1.0) > SUM_TOLERANCE {
        return Err(Error::NotInSimplex {
            what,
            state,
            reason: format!("entries sum to {sum}"),
        });
    }
    Ok(())
}

pub(crate) fn check_table(
    table: &[Vec<f64>],
    states: usize,
    assets: usize,
    what: &'static str,
) -> Result<()> {
    if table.len() != states {
        return Err(Error::DimensionMismatch {
            what,
            expected: states,
            found: table.len(),
        });
    }
    for (s, row) in table.iter().enumerate() {
        if row.len() != assets {
            return Err(Error::DimensionMismatch {
                what,
                expected: assets,
                found: row.len(),
            });
        }
        check_simplex(row, what, s)?;
    }
    Ok(())
}

fn blend(r: f64, strategy: &[Vec<f64>], dividends: &[Vec<f64>]) -> Vec<Vec<f64>> {
    strategy
        .iter()
        .zip(dividends)
        .map(|(l, d)| l.iter().zip(d).map(|(l, d)| r * l + (1.0 - r) * d).collect())
        .collect()
}

impl MarketModel {
    /// Validates the inputs and solves the Kelly strategy by both methods.
    pub fn new(
        chain: Arc<EnvironmentChain>,
        rate: f64,
        dividends: Vec<Vec<f64>>,
        rival: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let states = chain.num_states();
        let assets = dividends.first().map_or(0, |r| r.len());
        if assets < 2 {
            return Err(Error::DimensionMismatch {
                what: "asset count",
                expected: 2,
                found: assets,
            });
        }
        check_table(&dividends, states, assets, "dividends")?;
        check_table(&rival, states, assets, "rival strategy")?;
        let KellySolution {
            strategy: kelly,
            iterations,
        } = solve_kelly_checked(&chain, &dividends, rate)?;
        check_table(&kelly, states, assets, "Kelly strategy")?;
        Ok(Self {
            kelly_mu: blend(rate, &kelly, &dividends),
            rival_mu: blend(rate, &rival, &dividends),
            chain,
            rate,
            assets,
            dividends,
            rival,
            kelly,
            iterations,
        })
    }

    /// Same market with a different rival strategy.
    pub fn with_rival(&self, rival: Vec<Vec<f64>>) -> Result<Self> {
        check_table(&rival, self.chain.num_states(), self.assets, "rival strategy")?;
        Ok(Self {
            rival_mu: blend(self.rate, &rival, &self.dividends),
            rival,
            ..self.clone()
        })
    }

    /// Rival strategy `(1 - theta) lambda + theta lambda*`.
    pub fn rival_towards_kelly(&self, theta: f64) -> Result<Self> {
        let rival = self
            .rival
            .iter()
            .zip(&self.kelly)
            .map(|(l, k)| l.iter().zip(k).map(|(l, k)| (1.0 - theta) * l + theta * k).collect())
            .collect();
        self.with_rival(rival)
    }

    pub fn chain(&self) -> &Arc<EnvironmentChain> {
        &self.chain
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn num_states(&self) -> usize {
        self.chain.num_states()
    }

    pub fn dividends(&self) -> &[Vec<f64>] {
        &self.dividends
    }

    pub fn rival(&self) -> &[Vec<f64>] {
        &self.rival
    }

    pub fn kelly(&self) -> &[Vec<f64>] {
        &self.kelly
    }

    pub fn kelly_mu(&self) -> &[Vec<f64>] {
        &self.kelly_mu
    }

    pub fn rival_mu(&self) -> &[Vec<f64>] {
        &self.rival_mu
    }

    /// Contraction iterations used by the solver.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `zeta(s) = min_k lambda*_k(s)`.
    pub fn zeta(&self, state: usize) -> f64 {
        self.kelly[state].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `|lambda*(s) - r (P lambda*)(s) - (1 - r) (P R)(s)|_inf` over all states.
    pub fn kelly_residual(&self) -> f64 {
        let states = self.num_states();
        let mut worst: f64 = 0.0;
        for s in 0..states {
            for k in 0..self.assets {
                let expected: f64 = (0..states)
                    .map(|sigma| self.chain.p(s, sigma) * self.kelly_mu[sigma][k])
                    .sum();
                worst = worst.max(libm::fabs(self.kelly[s][k] - expected));
            }
        }
        worst
    }

    /// True when the rival strategy coincides with `lambda*` in every state
    /// to within `tol`.
    pub fn rival_is_kelly(&self, tol: f64) -> bool {
        self.rival
            .iter()
            .flatten()
            .zip(self.kelly.iter().flatten())
            .all(|(a, b)| libm::fabs(a - b) <= tol)
    }
}
