use alloc::vec;
use alloc::vec::Vec;

use super::model::check_table;
use crate::env::EnvironmentChain;
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Stopping threshold on the sup-norm change between iterates.
pub const CONTRACTION_TOLERANCE: f64 = 1e-14;
/// Largest tolerated gap between the two solution methods.
pub const AGREEMENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KellyMethod {
    /// Fixed-point iteration `lambda <- r P lambda + (1 - r) P R`.
    Contraction,
    /// Linear solve of `(I - r P) lambda = (1 - r) P R`.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KellySolution {
    /// `strategy[s][k] = lambda*_k(s)`.
    pub strategy: Vec<Vec<f64>>,
    /// Iterations used (zero for the direct method).
    pub iterations: usize,
}

/// `(P R)(s) = sum_sigma P(s, sigma) R(sigma)`.
fn expected_next(chain: &EnvironmentChain, table: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let states = chain.num_states();
    let k = table[0].len();
    (0..states)
        .map(|s| {
            (0..k)
                .map(|j| (0..states).map(|sigma| chain.p(s, sigma) * table[sigma][j]).sum())
                .collect()
        })
        .collect()
}

/// Generalised Kelly strategy: the unique solution of
/// `lambda*(s) = r E[lambda*(s_1) | s_0 = s] + (1 - r) E[R(s_1) | s_0 = s]`.
pub fn solve_kelly(
    chain: &EnvironmentChain,
    dividends: &[Vec<f64>],
    rate: f64,
    method: KellyMethod,
) -> Result<KellySolution> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidRate(rate));
    }
    let states = chain.num_states();
    let assets = dividends.first().map_or(0, |r| r.len());
    check_table(dividends, states, assets, "dividends")?;
    let pr = expected_next(chain, dividends);

    match method {
        KellyMethod::Contraction => {
            let mut current = pr.clone();
            let mut next = vec![vec![0.0; assets]; states];
            for iteration in 1..=MAX_ITERATIONS {
                let mut change: f64 = 0.0;
                for s in 0..states {
                    for k in 0..assets {
                        let ev: f64 = (0..states).map(|sigma| chain.p(s, sigma) * current[sigma][k]).sum();
                        next[s][k] = rate * ev + (1.0 - rate) * pr[s][k];
                        change = change.max(libm::fabs(next[s][k] - current[s][k]));
                    }
                }
                core::mem::swap(&mut current, &mut next);
                if change <= CONTRACTION_TOLERANCE {
                    return Ok(KellySolution {
                        strategy: current,
                        iterations: iteration,
                    });
                }
            }
            Err(Error::Numerical("Kelly contraction did not converge".into()))
        }
        KellyMethod::Direct => {
            let a = Matrix::identity(states, states) - chain.transition_matrix() * rate;
            let b = Matrix::from_fn(states, assets, |s, k| (1.0 - rate) * pr[s][k]);
            let x = linalg::solve(a, &b)?;
            Ok(KellySolution {
                strategy: (0..states)
                    .map(|s| (0..assets).map(|k| x[(s, k)]).collect())
                    .collect(),
                iterations: 0,
            })
        }
    }
}

/// Solves by both methods, fails if they differ by more than
/// [`AGREEMENT_TOLERANCE`], and returns the direct solution with the
/// contraction iteration count.
pub fn solve_kelly_checked(
    chain: &EnvironmentChain,
    dividends: &[Vec<f64>],
    rate: f64,
) -> Result<KellySolution> {
    let iterated = solve_kelly(chain, dividends, rate, KellyMethod::Contraction)?;
    let direct = solve_kelly(chain, dividends, rate, KellyMethod::Direct)?;
    let gap = sup_distance(&iterated.strategy, &direct.strategy);
    if gap > AGREEMENT_TOLERANCE {
        return Err(Error::MethodsDisagree { gap });
    }
    Ok(KellySolution {
        strategy: direct.strategy,
        iterations: iterated.iterations,
    })
}

pub fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| libm::fabs(x - y))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_returns_dividends() {
        let chain = EnvironmentChain::new(&[vec![1.0]]).unwrap();
        for method in [KellyMethod::Contraction, KellyMethod::Direct] {
            let sol = solve_kelly(&chain, &[vec![0.3, 0.7]], 0.6, method).unwrap();
            assert!((sol.strategy[0][0] - 0.3).abs() < 1e-14);
            assert!((sol.strategy[0][1] - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn rate_outside_unit_interval() {
        let chain = EnvironmentChain::new(&[vec![1.0]]).unwrap();
        for r in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                solve_kelly(&chain, &[vec![0.5, 0.5]], r, KellyMethod::Direct),
                Err(Error::InvalidRate(_))
            ));
        }
    }

    #[test]
    fn vanishing_rate_gives_expected_dividends() {
        let chain = EnvironmentChain::new(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let div = [vec![0.8, 0.2], vec![0.2, 0.8]];
        let sol = solve_kelly_checked(&chain, &div, 1e-8).unwrap();
        let pr = expected_next(&chain, &div);
        assert!(sup_distance(&sol.strategy, &pr) < 1e-7);
    }

    #[test]
    fn non_simplex_dividends() {
        let chain = EnvironmentChain::new(&[vec![1.0]]).unwrap();
        assert!(matches!(
            solve_kelly(&chain, &[vec![1.2, -0.2]], 0.5, KellyMethod::Direct),
            Err(Error::NotInSimplex { .. })
        ));
    }
}
