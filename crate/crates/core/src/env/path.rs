use alloc::vec::Vec;

use super::{OmegaStream, RandomSystem};
use crate::{Error, Result};

/// A simulated trajectory `x_0, ..., x_T` with the environment states it saw.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dimension: usize,
    /// `states[t]` is the environment state at the start of step `t + 1`.
    states: Vec<usize>,
    values: Vec<f64>,
}

impl Path {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of points, `T + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn value(&self, t: usize) -> &[f64] {
        &self.values[t * self.dimension..(t + 1) * self.dimension]
    }

    pub fn state(&self, t: usize) -> usize {
        self.states[t]
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        self.values
            .chunks_exact(self.dimension)
            .zip(&self.states)
            .enumerate()
            .map(|(t, (x, &s))| (t, s, x))
    }
}

/// Iterates `x_{t+1} = f(x_t, T^t omega)` from `x_0 = a` for `horizon` steps.
pub fn simulate_path(
    system: &RandomSystem,
    a: &[f64],
    stream: &mut OmegaStream,
    horizon: usize,
) -> Result<Path> {
    let n = system.dimension();
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial point",
            expected: n,
            found: a.len(),
        });
    }
    let steps = system.steps();
    let wlen = system.window_len();
    stream.realize(horizon * steps + 1);

    let s0 = stream.state(0);
    if !system.domain(s0).contains(a) {
        return Err(Error::InitialOutsideDomain { state: s0 });
    }
    let mut values = Vec::with_capacity((horizon + 1) * n);
    let mut states = Vec::with_capacity(horizon + 1);
    values.extend_from_slice(a);
    states.push(s0);
    let mut next = alloc::vec![0.0; n];
    for t in 0..horizon {
        let window = stream.window(t * steps, wlen);
        system.apply(&values[t * n..(t + 1) * n], window, &mut next);
        let s_next = window[wlen - 1];
        if !system.domain(s_next).contains(&next) {
            return Err(Error::DomainEscape { t: t + 1 });
        }
        values.extend_from_slice(&next);
        states.push(s_next);
    }
    Ok(Path {
        dimension: n,
        states,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Domain, EnvironmentChain};
    use alloc::sync::Arc;
    use alloc::vec;

    fn chain() -> Arc<EnvironmentChain> {
        Arc::new(EnvironmentChain::new(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap())
    }

    #[test]
    fn equilibrium_start_stays_on_equilibrium_path() {
        let c = [1.0, -2.0];
        let sys = RandomSystem::builder(chain(), 1, move |x, w, out| {
            out[0] = 0.5 * (x[0] - c[w[0]]) + c[w[1]];
        })
        .fixed_points(vec![vec![1.0], vec![-2.0]])
        .build()
        .unwrap();
        let mut stream = OmegaStream::new(chain(), 3, 0);
        let s0 = stream.state(0);
        let path = simulate_path(&sys, &[c[s0]], &mut stream, 200).unwrap();
        for (_, s, x) in path.iter() {
            assert!((x[0] - c[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn escape_reports_step() {
        // the builder probes only near the fixed point; x >= 0.5 escapes
        let sys = RandomSystem::builder(chain(), 1, |x, _, out| {
            out[0] = if x[0] > 0.4 { -1.0 } else { 2.0 * x[0] };
        })
        .domain(Domain::Lower(vec![0.0]))
        .radius(0.1)
        .build()
        .unwrap();
        let mut stream = OmegaStream::new(chain(), 1, 0);
        let err = simulate_path(&sys, &[0.1], &mut stream, 10).unwrap_err();
        assert_eq!(err, Error::DomainEscape { t: 4 });
    }

    #[test]
    fn start_outside_domain() {
        let sys = RandomSystem::builder(chain(), 1, |x, _, out| out[0] = 0.5 * x[0])
            .domain(Domain::Lower(vec![0.0]))
            .build()
            .unwrap();
        let mut stream = OmegaStream::new(chain(), 1, 0);
        assert!(matches!(
            simulate_path(&sys, &[-1.0], &mut stream, 10),
            Err(Error::InitialOutsideDomain { .. })
        ));
    }
}
