use alloc::vec::Vec;

use super::Tolerances;
use crate::env::OmegaStream;
use crate::{Error, Result};

/// A time average with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Mean of `values` and the standard error from `batches` contiguous batch
/// means. Trailing samples that do not fill a batch count toward the mean
/// only. Fewer than two batches give an infinite standard error.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    let mean = if n == 0 {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    let b = batches.min(n);
    if b < 2 {
        return Estimate {
            mean,
            stderr: f64::INFINITY,
            samples: n,
        };
    }
    let size = n / b;
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(b)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let center = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - center) * (m - center)).sum::<f64>() / (b - 1) as f64;
    Estimate {
        mean,
        stderr: libm::sqrt(var / b as f64),
        samples: n,
    }
}

/// Evaluates `f` on the windows `omega_{t * stride .. t * stride + window_len}`
/// for `t = 0..horizon`, rejecting non-finite values.
pub(crate) fn sample_along<F>(
    stream: &mut OmegaStream,
    stride: usize,
    window_len: usize,
    horizon: usize,
    context: &'static str,
    mut f: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[usize]) -> Result<f64>,
{
    stream.realize(horizon.saturating_sub(1) * stride + window_len);
    let mut values = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let window = stream.window(t * stride, window_len);
        let v = f(t, window)?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                t,
                state: window[0],
                context,
            });
        }
        values.push(v);
    }
    Ok(values)
}

/// Birkhoff average `(1/T) sum_t g(T^t omega)` of an observable of the state
/// window `(s_t, ..., s_{t + window_len - 1})`.
pub fn birkhoff_average<F>(
    mut observable: F,
    window_len: usize,
    stream: &mut OmegaStream,
    horizon: usize,
    tol: &Tolerances,
) -> Result<Estimate>
where
    F: FnMut(&[usize]) -> f64,
{
    if horizon < 100 {
        return Err(Error::Usage(alloc::format!(
            "Birkhoff averages need a horizon of at least 100, got {horizon}"
        )));
    }
    if window_len == 0 {
        return Err(Error::Usage("observable window must hold at least one state".into()));
    }
    let values = sample_along(stream, 1, window_len, horizon, "observable", |_, w| {
        Ok(observable(w))
    })?;
    Ok(batch_means(&values, tol.batches))
}
