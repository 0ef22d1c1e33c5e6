//! Deterministic low-discrepancy points in the unit ball.
//!
//! Radii are stratified at cell midpoints, directions come from a Halton
//! sequence, so every point set is reproducible and refinable.

use alloc::vec;
use alloc::vec::Vec;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Unit direction number `j` in `R^n`.
pub fn direction(n: usize, j: usize) -> Vec<f64> {
    if n == 1 {
        return vec![if radical_inverse(j as u64 + 1, 3) < 0.5 { -1.0 } else { 1.0 }];
    }
    let mut d: Vec<f64> = (0..n)
        .map(|i| 2.0 * radical_inverse(j as u64 + 1, PRIMES[(i + 1) % PRIMES.len()]) - 1.0)
        .collect();
    let norm = libm::sqrt(d.iter().map(|v| v * v).sum());
    if norm < 1e-12 {
        d.iter_mut().for_each(|v| *v = 0.0);
        d[0] = 1.0;
    } else {
        d.iter_mut().for_each(|v| *v /= norm);
    }
    d
}

/// `count` points with norms stratified over `(1/2, 1)`: the outer shell of
/// the unit ball. Scaling shell `l` by `2^-l` and taking unions over
/// `l >= k` yields nested sample sets for nested balls.
pub fn shell_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|j| {
            let r = 0.5 + 0.5 * (j as f64 + 0.5) / count as f64;
            direction(n, j).into_iter().map(|v| v * r).collect()
        })
        .collect()
}

/// `count` points with norms `(j + 1) / count`, so the sphere of radius 1 is hit.
pub fn ball_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|j| {
            let r = (j as f64 + 1.0) / count as f64;
            direction(n, j).into_iter().map(|v| v * r).collect()
        })
        .collect()
}
