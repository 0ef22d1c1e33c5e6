use alloc::vec::Vec;

use crate::env::OmegaStream;
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkRung {
    pub t: usize,
    /// Monte Carlo estimate of `(1/t) E ln |F_t|`.
    pub estimate: f64,
    pub stderr: f64,
    /// Minimum of the estimates up to this rung.
    pub running_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkLadder {
    pub rungs: Vec<FkRung>,
    /// Infimum over the ladder: the estimate of the top Lyapunov exponent.
    pub limit: f64,
}

/// Ladder `t = 1, 2, 4, ..., t_max` of `(1/t) E ln |F_t|` for the linear
/// cocycle `F_t = A(T^{t-1} omega) ... A(omega)`, each `A` read from a window
/// of `window_len` states. Replica `r` runs on `stream.fork(r)`.
///
/// Products are renormalised by their largest entry at every step and the
/// scale is carried in log space.
pub fn furstenberg_kesten<F>(
    cocycle: F,
    window_len: usize,
    stream: &OmegaStream,
    t_max: usize,
    replicas: usize,
) -> Result<FkLadder>
where
    F: Fn(&[usize]) -> Matrix,
{
    if t_max < 2 || replicas == 0 || window_len == 0 {
        return Err(Error::Usage(
            "Furstenberg-Kesten ladder needs t_max >= 2, replicas >= 1 and a nonempty window".into(),
        ));
    }
    let mut ladder: Vec<usize> = (0..usize::BITS)
        .map(|l| 1usize << l)
        .take_while(|t| *t <= t_max)
        .collect();
    if ladder[ladder.len() - 1] != t_max {
        ladder.push(t_max);
    }

    // samples[rung][replica]
    let mut samples = alloc::vec![Vec::with_capacity(replicas); ladder.len()];
    for r in 0..replicas {
        let mut s = stream.fork(r as u64);
        s.realize(t_max + window_len);
        let mut product: Option<Matrix> = None;
        let mut log_scale = 0.0;
        let mut rung = 0;
        for t in 1..=t_max {
            let a = cocycle(s.window(t - 1, window_len));
            let p = match product.take() {
                None => a,
                Some(p) => a * p,
            };
            let scale = p.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Numerical(alloc::format!(
                    "cocycle product degenerated at t = {t}: {p:?}"
                )));
            }
            log_scale += libm::log(scale);
            let p = p / scale;
            if t == ladder[rung] {
                let norm = linalg::operator_norm(&p)?;
                samples[rung].push((libm::log(norm) + log_scale) / t as f64);
                rung += 1;
            }
            product = Some(p);
        }
    }

    let mut rungs = Vec::with_capacity(ladder.len());
    let mut running_inf = f64::INFINITY;
    for (t, values) in ladder.iter().zip(&samples) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() < 2 {
            f64::INFINITY
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            libm::sqrt(var / n)
        };
        running_inf = running_inf.min(mean);
        rungs.push(FkRung {
            t: *t,
            estimate: mean,
            stderr,
            running_inf,
        });
    }
    Ok(FkLadder {
        limit: running_inf,
        rungs,
    })
}
