use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Allowed deviation of a transition row sum (or simplex sum) from 1.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Target residual `|pi P - pi|_inf` for the power iteration.
pub const STATIONARY_RESIDUAL: f64 = 1e-12;
const POWER_MAX_ITERATIONS: usize = 5_000_000;
const CROSS_CHECK_TOLERANCE: f64 = 1e-9;

/// Finite-state irreducible Markov chain realising the environment.
///
/// Paths of the chain started from its stationary law, together with the
/// left shift, form the stationary ergodic driving system.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentChain {
    num_states: usize,
    transition: Vec<f64>,
    cumulative: Vec<f64>,
    stationary: Vec<f64>,
    stationary_cumulative: Vec<f64>,
}

impl EnvironmentChain {
    /// Validates `transition` (row-stochastic, irreducible) and solves for
    /// the stationary distribution.
    pub fn new(transition: &[Vec<f64>]) -> Result<Self> {
        let stationary = stationary_distribution(transition)?;
        let num_states = transition.len();
        let flat: Vec<f64> = transition.iter().flatten().copied().collect();
        let mut cumulative = Vec::with_capacity(flat.len());
        for row in transition {
            let mut acc = 0.0;
            for p in row {
                acc += p;
                cumulative.push(acc);
            }
        }
        let mut stationary_cumulative = Vec::with_capacity(num_states);
        let mut acc = 0.0;
        for p in &stationary {
            acc += p;
            stationary_cumulative.push(acc);
        }
        Ok(Self {
            num_states,
            transition: flat,
            cumulative,
            stationary,
            stationary_cumulative,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn p(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.num_states + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.transition[from * self.num_states..(from + 1) * self.num_states]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// States reachable from `from` in one step.
    pub fn successors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(from)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(s, _)| s)
    }

    /// Smallest and largest transition probabilities.
    pub fn transition_bounds(&self) -> (f64, f64) {
        self.transition
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                (lo.min(p), hi.max(p))
            })
    }

    pub fn transition_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.num_states, self.num_states, &self.transition)
    }

    /// Next state given a uniform draw `u` in `[0, 1)`.
    pub fn sample_next(&self, from: usize, u: f64) -> usize {
        let row = &self.cumulative[from * self.num_states..(from + 1) * self.num_states];
        pick(row, u, self.row(from))
    }

    /// Initial state drawn from the stationary law.
    pub fn sample_initial(&self, u: f64) -> usize {
        pick(&self.stationary_cumulative, u, &self.stationary)
    }
}

fn pick(cumulative: &[f64], u: f64, weights: &[f64]) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    for (s, &c) in cumulative.iter().enumerate() {
        if target < c && weights[s] > 0.0 {
            return s;
        }
    }
    // rounding can leave `target` at the very top of the last interval
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Checks shape, entry range and row sums.
pub fn validate_transition(transition: &[Vec<f64>]) -> Result<()> {
    let n = transition.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            what: "transition matrix",
            expected: 1,
            found: 0,
        });
    }
    for (row, values) in transition.iter().enumerate() {
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                what: "transition row",
                expected: n,
                found: values.len(),
            });
        }
        for (col, &value) in values.iter().enumerate() {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(Error::InvalidProbability { row, col, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if libm::fabs(sum - 1.0) > SUM_TOLERANCE {
            return Err(Error::NonStochasticRow { row, sum });
        }
    }
    Ok(())
}

/// Every state must reach every other state through positive transitions.
pub fn check_irreducible(transition: &[Vec<f64>]) -> Result<()> {
    let n = transition.len();
    for from in 0..n {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(s) = queue.pop_front() {
            for (t, &p) in transition[s].iter().enumerate() {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        if let Some(unreachable) = seen.iter().position(|r| !r) {
            return Err(Error::Reducible { from, unreachable });
        }
    }
    Ok(())
}

/// Stationary law of an irreducible row-stochastic matrix.
///
/// Runs power iteration on the lazy chain `(P + I) / 2` (same invariant law,
/// always aperiodic) down to a residual of [`STATIONARY_RESIDUAL`], then
/// cross-checks against a direct solve of `(P^T - I) pi = 0`, `sum pi = 1`.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_transition(transition)?;
    check_irreducible(transition)?;
    let n = transition.len();

    let residual = |pi: &[f64]| -> f64 {
        (0..n)
            .map(|j| {
                let pj: f64 = (0..n).map(|i| pi[i] * transition[i][j]).sum();
                libm::fabs(pj - pi[j])
            })
            .fold(0.0, f64::max)
    };

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut converged = residual(&pi) <= STATIONARY_RESIDUAL;
    for _ in 0..POWER_MAX_ITERATIONS {
        if converged {
            break;
        }
        for j in 0..n {
            let pj: f64 = (0..n).map(|i| pi[i] * transition[i][j]).sum();
            next[j] = 0.5 * (pj + pi[j]);
        }
        let total: f64 = next.iter().sum();
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = q / total;
        }
        converged = residual(&pi) <= STATIONARY_RESIDUAL;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "power iteration did not reach residual {STATIONARY_RESIDUAL:e}"
        )));
    }

    let direct = direct_stationary(transition)?;
    let gap = pi
        .iter()
        .zip(&direct)
        .map(|(a, b)| libm::fabs(a - b))
        .fold(0.0, f64::max);
    if gap > CROSS_CHECK_TOLERANCE {
        return Err(Error::Numerical(format!(
            "stationary distribution cross-check failed: power iteration and linear solve differ by {gap:e}"
        )));
    }
    Ok(pi)
}

fn direct_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    let mut a = Matrix::from_fn(n, n, |i, j| {
        transition[j][i] - if i == j { 1.0 } else { 0.0 }
    });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = Matrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let x = linalg::solve(a, &b)?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state() {
        assert_eq!(stationary_distribution(&[vec![1.0]]).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_pair() {
        let pi = stationary_distribution(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_state_balance() {
        // pi0 * 0.3 = pi1 * 0.4, pi0 + pi1 = 1
        let pi = stationary_distribution(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        assert!((pi[0] - 4.0 / 7.0).abs() < 1e-11);
        assert!((pi[1] - 3.0 / 7.0).abs() < 1e-11);
    }

    #[test]
    fn periodic_chain_converges() {
        let pi = stationary_distribution(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_stochastic_row() {
        let err = stationary_distribution(&[vec![0.5, 0.49], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::NonStochasticRow { row: 0, .. }));
    }

    #[test]
    fn negative_entry() {
        let err = validate_transition(&[vec![1.1, -0.1], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::InvalidProbability { row: 0, col: 0, .. }));
    }

    #[test]
    fn reducible_names_state() {
        let err = stationary_distribution(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap_err();
        assert_eq!(
            err,
            Error::Reducible {
                from: 0,
                unreachable: 1
            }
        );
    }

    #[test]
    fn residual_meets_invariant() {
        let p = [
            vec![0.1, 0.6, 0.3],
            vec![0.0, 0.2, 0.8],
            vec![0.9, 0.05, 0.05],
        ];
        let pi = stationary_distribution(&p).unwrap();
        for j in 0..3 {
            let pj: f64 = (0..3).map(|i| pi[i] * p[i][j]).sum();
            assert!((pj - pi[j]).abs() <= 1e-10);
        }
        assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampling_respects_zero_entries() {
        let chain = EnvironmentChain::new(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        for k in 0..100 {
            let u = k as f64 / 100.0;
            assert_eq!(chain.sample_next(0, u), 1);
            assert_eq!(chain.sample_next(1, u), 0);
        }
        assert_eq!(chain.sample_next(0, 0.999_999_999_999), 1);
    }
}
