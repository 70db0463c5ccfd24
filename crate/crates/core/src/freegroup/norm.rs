use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::words::{chunked_sum, WordSpace};
use crate::error::{Error, Result};

/// Relative Rayleigh residual at which power iteration stops.
pub const NORM_RESIDUAL_TOL: f64 = 1e-8;
/// Iteration budget for power iteration.
pub const NORM_MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    /// `||A v|| / ||v||` for the final iterate: a lower bound on `||sum_i lambda(g_i)||`.
    pub estimate: f64,
    /// `||A^2 v - theta^2 v|| / theta^2` for the final unit iterate.
    pub residual: f64,
    pub iterations: usize,
    /// Dimension of the variational space (words of length at most `max_len - 1`).
    pub support: usize,
}

/// `1/2 + 1/sqrt(s)`.
pub fn omega_norm_bound(s: usize) -> f64 {
    0.5 + 1.0 / (s as f64).sqrt()
}

/// `2 sqrt(s)`.
pub fn generator_sum_bound(s: usize) -> f64 {
    2.0 * (s as f64).sqrt()
}

/// `(1 + ||sum_i lambda(g_i)|| / s) / 2`, the norm of the averaged reflection channel
/// on `l_2(G) (x) l_2(G)` once `lambda (x) lambda*` is absorbed into `lambda`.
pub fn omega_norm_from_generator_norm(s: usize, generator_norm: f64) -> f64 {
    0.5 * (1.0 + generator_norm / s as f64)
}

/// Power iteration on `A^2`, `A = sum_i lambda(g_i)` compressed to words of length at
/// most `max_len - 1`. Every such vector stays inside the space under each
/// `lambda(g_i)`, so the Rayleigh quotient bounds the untruncated norm from below.
///
/// `A` is the adjacency matrix of a bipartite graph, so `+-||A||` are both eigenvalues;
/// squaring merges them and the iteration converges at rate `(lambda_2 / lambda_1)^2`.
/// Sums are reduced in fixed chunks, so the result does not depend on the thread
/// count.
pub fn generator_sum_norm(space: &WordSpace, iterations: usize, seed: u64) -> Result<NormEstimate> {
    if space.max_len() == 0 {
        return Err(Error::InvalidConfig("maximum word length must be at least 1".into()));
    }
    let n = space.count_up_to(space.max_len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + rng.random::<f64>()).collect();
    let norm = chunked_sum(n, |i| v[i] * v[i]).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut w = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    let mut done = 0;
    for it in 1..=iterations {
        space.generator_sum_apply(&v, &mut w);
        let theta_sq = chunked_sum(n, |i| w[i] * w[i]);
        theta = theta_sq.sqrt();
        space.generator_sum_apply(&w, &mut x);
        residual = chunked_sum(n, |i| {
            let r = x[i] - theta_sq * v[i];
            r * r
        })
        .sqrt()
            / theta_sq;
        done = it;
        if residual < NORM_RESIDUAL_TOL {
            break;
        }
        let xn = chunked_sum(n, |i| x[i] * x[i]).sqrt();
        for (vi, xi) in v.iter_mut().zip(&x) {
            *vi = xi / xn;
        }
    }
    if residual >= NORM_RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            iterations: done,
            residual,
        });
    }
    Ok(NormEstimate {
        estimate: theta,
        residual,
        iterations: done,
        support: n,
    })
}
