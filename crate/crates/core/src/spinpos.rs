//! A spin-1/2 particle on a finite set of positions `x_j`, measured along the
//! position-dependent spin directions `phi+-(x) = cos(kx)|0> +- sin(kx)|1>`.
//!
//! Both the box grid and the discrete ladder are instances. Basis index `2j + s`
//! holds position `j` and spin `s`. Every measurement operator is block diagonal in
//! position with rank-one `2 x 2` spin blocks.
//!
//! # Closed-form evolution
//!
//! Write a spin block `B(x, y)` of the state in the `sigma_y` eigenbasis
//! `|+-i> = (|0> +- i|1>)/sqrt(2)`. One application of the alternating channel maps
//! the diagonal pair `(B_{++}, B_{--})` by `M(x - y)/2` and the off-diagonal pair
//! `(B_{+-}, B_{-+})` by `M(x + y)/2`, where `M(u) = [[1, cos 2ku], [cos 2ku, 1]]`.
//! `M(u)/2` has eigenvalues `cos^2(ku)` on `(1, 1)` and `sin^2(ku)` on `(1, -1)`, so
//! `N` steps cost one scalar power per block.

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64, ZERO};
use crate::qcore::{DensityOperator, MeasurementChannel, Projector, Pvm};

fn nudge(x: f64, ulps: i32) -> f64 {
    let mut y = x;
    for _ in 0..ulps.unsigned_abs() {
        y = if ulps > 0 { y.next_up() } else { y.next_down() };
    }
    y
}

/// `(cos t, sin t)`, adjusted so that `c*c + s*s == 1.0` holds exactly in floating
/// point. Rank-one projectors built from it are then exactly idempotent, and
/// `phi phi^T + phi_perp phi_perp^T` sums to the identity bit for bit.
///
/// The larger component moves by a few ulps and the smaller one is re-solved from it.
/// The perturbation is `O(eps / min(|c|, |s|))`, which stays at rounding level unless
/// the angle sits within about `1e-3` of a multiple of `pi/2`.
pub fn exact_unit_spinor(theta: f64) -> (f64, f64) {
    let (s0, c0) = theta.sin_cos();
    if c0 * c0 + s0 * s0 == 1.0 {
        return (c0, s0);
    }
    let swap = s0.abs() > c0.abs();
    let (a0, b0) = if swap { (s0, c0) } else { (c0, s0) };
    let mut best: Option<(f64, f64, f64)> = None;
    for da in -8i32..=8 {
        let a = nudge(a0, da);
        // a*a lies in [1/2, 1], so the subtraction is exact.
        let b = (1.0 - a * a).max(0.0).sqrt().copysign(b0);
        for db in -4i32..=4 {
            let bb = nudge(b, db);
            if a * a + bb * bb == 1.0 {
                let err = (a - a0).abs() + (bb - b0).abs();
                if best.is_none_or(|(e, _, _)| err < e) {
                    best = Some((err, a, bb));
                }
            }
        }
    }
    match best {
        Some((_, a, b)) if swap => (b, a),
        Some((_, a, b)) => (a, b),
        None => (c0, s0),
    }
}

#[derive(Clone, Debug)]
pub struct SpinLattice {
    positions: Vec<f64>,
    k: f64,
}

impl SpinLattice {
    pub fn new(positions: Vec<f64>, k: f64) -> Self {
        Self { positions, k }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn sites(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.sites()
    }

    /// `{F, 1 - F}` with `F = sum_j |j><j| (x) |phi(x_j)><phi(x_j)|`; `sign = +1` for
    /// `phi+`, `-1` for `phi-`. Outcome 0 is `F`.
    pub fn measurement(&self, sign: f64) -> Pvm {
        let n = self.sites();
        let mut keep = CMatrix::zeros(2, n);
        let mut flip = CMatrix::zeros(2, n);
        for (j, &x) in self.positions.iter().enumerate() {
            let (cs, sn) = exact_unit_spinor(self.k * x);
            let sn = sign * sn;
            keep[(0, j)] = c(cs);
            keep[(1, j)] = c(sn);
            flip[(0, j)] = c(sn);
            flip[(1, j)] = c(-cs);
        }
        Pvm::monitored(vec![
            Projector::RankOneBlocks { block: 2, vectors: keep },
            Projector::RankOneBlocks { block: 2, vectors: flip },
        ])
        .expect("two projectors of equal dimension")
    }

    /// The `+` and `-` measurements.
    pub fn measurements(&self) -> (Pvm, Pvm) {
        (self.measurement(1.0), self.measurement(-1.0))
    }

    /// Both measurements with probability 1/2.
    pub fn channel(&self) -> MeasurementChannel {
        let (plus, minus) = self.measurements();
        MeasurementChannel::uniform(vec![plus, minus]).expect("valid weights")
    }

    /// `Omega^n(sigma)` in closed form.
    pub fn evolve(&self, state: &DensityOperator, n: usize) -> Result<DensityOperator> {
        state.check_dim(self.dim())?;
        if n == 0 {
            return Ok(state.clone());
        }
        let dim = self.dim();
        let sites = self.sites();
        let src = state.matrix().as_slice();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // Columns are |+i> and |-i>.
        let v = Matrix2::new(c(h), c(h), C64::new(0.0, h), C64::new(0.0, -h));
        let v_adj = v.adjoint();
        let k = self.k;
        let pos = &self.positions;
        let mut out = CMatrix::zeros(dim, dim);
        out.as_mut_slice()
            .par_chunks_mut(2 * dim)
            .enumerate()
            .for_each(|(j, chunk)| {
                let y = pos[j];
                for i in 0..sites {
                    let x = pos[i];
                    let at = |r: usize, cc: usize| src[(2 * j + cc) * dim + 2 * i + r];
                    let b = Matrix2::new(at(0, 0), at(0, 1), at(1, 0), at(1, 1));
                    let mut by = v_adj * b * v;
                    let (sd, cd) = (k * (x - y)).sin_cos();
                    let (ss, cs) = (k * (x + y)).sin_cos();
                    mix_pair(&mut by, (0, 0), (1, 1), cd * cd, sd * sd, n);
                    mix_pair(&mut by, (0, 1), (1, 0), cs * cs, ss * ss, n);
                    let back = v * by * v_adj;
                    for cc in 0..2 {
                        for r in 0..2 {
                            chunk[cc * dim + 2 * i + r] = back[(r, cc)];
                        }
                    }
                }
            });
        Ok(DensityOperator::from_trusted(out))
    }

    /// Evolves in closed form and checks the result against `n` direct channel
    /// applications; fails when they differ by more than `tol` in any entry.
    pub fn evolve_verified(&self, state: &DensityOperator, n: usize, tol: f64) -> Result<DensityOperator> {
        let fast = self.evolve(state, n)?;
        let direct = self.channel().apply_n(state, n)?;
        let diff = crate::linalg::max_abs_diff(fast.matrix(), direct.matrix());
        if diff > tol {
            return Err(Error::KernelMismatch(diff));
        }
        Ok(fast)
    }

    /// `<x_j| tr_spin sigma |x_j>` for every site.
    pub fn position_populations(&self, state: &DensityOperator) -> Vec<f64> {
        let m = state.matrix();
        (0..self.sites())
            .map(|j| m[(2 * j, 2 * j)].re + m[(2 * j + 1, 2 * j + 1)].re)
            .collect()
    }
}

/// Applies `(M/2)^n` to the pair `(m[a], m[b])`, where `M/2` has eigenvalue `plus` on
/// `(1, 1)` and `minus` on `(1, -1)`.
fn mix_pair(m: &mut Matrix2<C64>, a: (usize, usize), b: (usize, usize), plus: f64, minus: f64, n: usize) {
    let exp = i32::try_from(n).unwrap_or(i32::MAX);
    let (p, q) = (m[a], m[b]);
    let sym = (p + q) * 0.5 * plus.powi(exp);
    let anti = (p - q) * 0.5 * minus.powi(exp);
    m[a] = sym + anti;
    m[b] = sym - anti;
    if m[a] == ZERO && m[b] == ZERO {
        // keep signed zeros out of the output
        m[a] = ZERO;
        m[b] = ZERO;
    }
}
