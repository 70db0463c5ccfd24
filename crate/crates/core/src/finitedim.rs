//! Two projectors in finite dimension: simultaneous block diagonalization into `1 x 1`
//! and `2 x 2` blocks, entropy-1 states fixed by both pinchings, and saturation of the
//! alternating channel.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, hermitize, max_abs, trace_norm_hermitian, vectorize, CMatrix, CVector};
use crate::qcore::{
    build_superoperator, fixed_point_projector, purity, von_neumann_entropy, DensityOperator, MeasurementChannel,
    Metric, MetricTrace, Pvm, DEFAULT_FIXED_TOL,
};

/// Angles within this distance of `0` or `pi/2` count as commuting directions.
pub const ANGLE_TOL: f64 = 1e-8;

/// Largest dimension accepted by [`jordan_blocks`].
pub const MAX_JORDAN_DIM: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub enum JordanBlock {
    /// A common eigenvector, basis column `index`, with `P` and `Q` eigenvalues.
    Single { index: usize, p: u8, q: u8 },
    /// Columns `index, index + 1`: there `P = diag(1, 0)` and `Q = |v><v|` with
    /// `v = (cos angle, sin angle)`.
    Pair { index: usize, angle: f64 },
}

#[derive(Clone, Debug)]
pub struct JordanDecomposition {
    /// Orthonormal basis, one column per basis vector, blocks in order.
    pub basis: CMatrix,
    pub blocks: Vec<JordanBlock>,
    /// `max |P - B (sum P_n) B^dagger|`, and the same for `Q`.
    pub p_error: f64,
    pub q_error: f64,
}

impl JordanDecomposition {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.blocks.iter().filter_map(|b| match b {
            JordanBlock::Pair { index, angle } => Some((*index, *angle)),
            JordanBlock::Single { .. } => None,
        })
    }

    /// Principal angles of the `2 x 2` blocks, in block order (descending).
    pub fn angles(&self) -> Vec<f64> {
        self.pairs().map(|(_, a)| a).collect()
    }

    /// `P` and `Q` rebuilt from the block structure, in the original coordinates.
    pub fn reconstruct(&self) -> (CMatrix, CMatrix) {
        let d = self.basis.nrows();
        let mut p = CMatrix::zeros(d, d);
        let mut q = CMatrix::zeros(d, d);
        for b in &self.blocks {
            match *b {
                JordanBlock::Single { index, p: pe, q: qe } => {
                    let v = self.basis.column(index);
                    let proj = v * v.adjoint();
                    if pe == 1 {
                        p += &proj;
                    }
                    if qe == 1 {
                        q += &proj;
                    }
                }
                JordanBlock::Pair { index, angle } => {
                    let u = self.basis.column(index);
                    let w = self.basis.column(index + 1);
                    p += u * u.adjoint();
                    let v: CVector = u * c(angle.cos()) + w * c(angle.sin());
                    q += &v * v.adjoint();
                }
            }
        }
        (p, q)
    }
}

fn check_projector(m: &CMatrix, name: &str) -> Result<()> {
    let herm = crate::linalg::hermitian_deviation(m);
    let idem = max_abs(&(m * m - m));
    if herm > 1e-9 || idem > 1e-9 {
        return Err(Error::NotProjector(format!(
            "{name}: hermiticity defect {herm:e}, idempotency defect {idem:e}"
        )));
    }
    Ok(())
}

/// Multiplies `v` by a phase making its first non-negligible entry real positive.
fn fix_phase(v: &mut CVector) {
    let scale = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
        let phase = z.conj() / c(z.norm());
        *v *= phase;
    }
}

/// Orthonormal basis of the range of a Hermitian projector-like matrix.
fn range_basis(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let r = vals.iter().filter(|&&v| v > 0.5).count();
    vecs.columns(0, r).into_owned()
}

/// Simultaneous block diagonalization of two projectors via principal angles
/// between their ranges.
pub fn jordan_blocks(p: &CMatrix, q: &CMatrix) -> Result<JordanDecomposition> {
    let d = p.nrows();
    if p.shape() != (d, d) || q.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: q.nrows(),
        });
    }
    if d > MAX_JORDAN_DIM {
        return Err(Error::InvalidConfig(format!("dimension {d} exceeds {MAX_JORDAN_DIM}")));
    }
    check_projector(p, "P")?;
    check_projector(q, "Q")?;

    let vp = range_basis(p);
    let ys = if vp.ncols() > 0 {
        let mut compressed = vp.adjoint() * q * &vp;
        hermitize(&mut compressed);
        hermitian_eigen(&compressed).1
    } else {
        CMatrix::zeros(0, 0)
    };

    let mut pairs: Vec<(f64, CVector, CVector)> = Vec::new();
    let mut singles: Vec<(u8, u8, CVector)> = Vec::new();
    for y in ys.column_iter() {
        let mut u: CVector = &vp * y;
        u /= c(u.norm());
        fix_phase(&mut u);
        let qu = q * &u;
        let angle = (&u - &qu).norm().atan2(qu.norm());
        if angle < ANGLE_TOL {
            singles.push((1, 1, u));
        } else if angle > FRAC_PI_2 - ANGLE_TOL {
            singles.push((1, 0, u));
        } else {
            let mu = qu.dotc(&u).re;
            let mut w: CVector = (&qu - &u * c(mu)) / c((mu * (1.0 - mu)).sqrt());
            w /= c(w.norm());
            pairs.push((angle, u, w));
        }
    }

    // Remaining space: ker P minus the partners of the paired vectors. Q leaves it
    // invariant, so diagonalizing Q there yields common eigenvectors.
    let mut rest = CMatrix::identity(d, d) - p;
    for (_, _, w) in &pairs {
        rest -= w * w.adjoint();
    }
    hermitize(&mut rest);
    let z = range_basis(&rest);
    if z.ncols() > 0 {
        let mut qz = z.adjoint() * q * &z;
        hermitize(&mut qz);
        let (vals, vecs) = hermitian_eigen(&qz);
        for (val, y) in vals.iter().zip(vecs.column_iter()) {
            let mut v: CVector = &z * y;
            v /= c(v.norm());
            fix_phase(&mut v);
            singles.push((0, u8::from(*val > 0.5), v));
        }
    }

    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    singles.sort_by_key(|s| std::cmp::Reverse((s.0, s.1)));

    let mut basis = CMatrix::zeros(d, d);
    let mut blocks = Vec::with_capacity(pairs.len() + singles.len());
    let mut col = 0;
    for (angle, u, w) in pairs {
        basis.set_column(col, &u);
        basis.set_column(col + 1, &w);
        blocks.push(JordanBlock::Pair { index: col, angle });
        col += 2;
    }
    for (pe, qe, v) in singles {
        basis.set_column(col, &v);
        blocks.push(JordanBlock::Single { index: col, p: pe, q: qe });
        col += 1;
    }
    if col != d {
        return Err(Error::NotProjector(format!(
            "block construction covered {col} of {d} dimensions"
        )));
    }
    let mut out = JordanDecomposition {
        basis,
        blocks,
        p_error: 0.0,
        q_error: 0.0,
    };
    let (pr, qr) = out.reconstruct();
    out.p_error = max_abs(&(p - pr));
    out.q_error = max_abs(&(q - qr));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct InvariantState {
    pub state: DensityOperator,
    /// True when no `2 x 2` block exists and the state mixes two common eigenvectors
    /// instead.
    pub fallback: bool,
    /// Largest entry of `Omega_P(sigma) - sigma` and `Omega_Q(sigma) - sigma`.
    pub fixed_point_defect: f64,
}

fn pinch(p: &CMatrix, sigma: &CMatrix) -> CMatrix {
    let d = p.nrows();
    let r = CMatrix::identity(d, d) - p;
    p * sigma * p + &r * sigma * &r
}

/// `I_2 / 2` on the chosen `2 x 2` block, zero elsewhere: entropy one bit, fixed by
/// both pinchings. Without any `2 x 2` block, the equal mixture of the first two common
/// eigenvectors is returned and flagged.
pub fn invariant_state(p: &CMatrix, q: &CMatrix, blocks: &JordanDecomposition, pair: usize) -> Result<InvariantState> {
    let pairs: Vec<(usize, f64)> = blocks.pairs().collect();
    let d = blocks.basis.nrows();
    let (cols, fallback) = match pairs.get(pair) {
        Some(&(index, _)) => ([index, index + 1], false),
        None if pairs.is_empty() && d >= 2 => ([0, 1], true),
        None => {
            return Err(Error::InvalidConfig(format!(
                "block {pair} requested but only {} two-dimensional blocks exist",
                pairs.len()
            )))
        }
    };
    let mut m = CMatrix::zeros(d, d);
    for col in cols {
        let v = blocks.basis.column(col);
        m += v * v.adjoint() * c(0.5);
    }
    let state = DensityOperator::new(m)?;
    let defect = max_abs(&(pinch(p, state.matrix()) - state.matrix()))
        .max(max_abs(&(pinch(q, state.matrix()) - state.matrix())));
    if defect > 1e-10 {
        return Err(Error::InvalidState(format!("invariant state moved by {defect:e}")));
    }
    Ok(InvariantState {
        state,
        fallback,
        fixed_point_defect: defect,
    })
}

/// Distance below which the iterate counts as converged.
pub const SATURATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SaturationReport {
    /// Columns `trace_distance` (full trace norm to the limit), `purity`, `entropy`.
    pub trace: MetricTrace,
    /// `Pi_1` applied to the initial state.
    pub limit: DensityOperator,
    /// First step from which the distance stays at or below [`SATURATION_TOL`].
    pub n0: Option<usize>,
    pub fixed_rank: usize,
}

/// The channel that measures `{P, 1-P}` or `{Q, 1-Q}` with the given weights.
pub fn two_projector_channel(p: &CMatrix, q: &CMatrix, weights: [f64; 2]) -> Result<MeasurementChannel> {
    MeasurementChannel::new(
        vec![Pvm::dichotomic(p, 1e-9)?, Pvm::dichotomic(q, 1e-9)?],
        weights.to_vec(),
    )
}

/// Iterates the two-projector channel on `sigma` for `steps` steps and tracks the trace
/// norm distance to the limit computed from the dense superoperator.
pub fn saturation_demo(
    p: &CMatrix,
    q: &CMatrix,
    sigma: &DensityOperator,
    steps: usize,
    weights: [f64; 2],
) -> Result<SaturationReport> {
    let channel = two_projector_channel(p, q, weights)?;
    let superop = build_superoperator(&channel)?;
    let fixed = fixed_point_projector(&superop, DEFAULT_FIXED_TOL)?;
    let limit_matrix = fixed.limit_of(sigma.matrix());
    let limit = DensityOperator::new(limit_matrix.clone())?;
    let mut metrics = vec![
        Metric::new("trace_distance", |s: &DensityOperator| {
            trace_norm_hermitian(&(s.matrix() - &limit_matrix)).map_err(|e| e.to_string())
        }),
        Metric::new("purity", |s: &DensityOperator| Ok(purity(s))),
        Metric::new("entropy", |s: &DensityOperator| Ok(von_neumann_entropy(s))),
    ];
    let (trace, _) = crate::qcore::iterate_channel(&channel, sigma, steps, &mut metrics)?;
    drop(metrics);
    let dist = trace.column("trace_distance").expect("metric present");
    let n0 = (0..dist.len())
        .rev()
        .take_while(|&i| dist[i] <= SATURATION_TOL)
        .last();
    Ok(SaturationReport {
        trace,
        limit,
        n0,
        fixed_rank: fixed.rank,
    })
}

/// `Pi_1 vec(sigma)` reshaped, for comparing limits across weightings.
pub fn limit_state(p: &CMatrix, q: &CMatrix, sigma: &DensityOperator, weights: [f64; 2]) -> Result<CMatrix> {
    let channel = two_projector_channel(p, q, weights)?;
    let fixed = fixed_point_projector(&build_superoperator(&channel)?, DEFAULT_FIXED_TOL)?;
    Ok(fixed.limit_of(sigma.matrix()))
}

/// `Omega_bar^n vec(sigma)`, for checking iterated channels against superoperator
/// powers.
pub fn superoperator_power_state(channel: &MeasurementChannel, sigma: &DensityOperator, n: usize) -> Result<CMatrix> {
    let s = build_superoperator(channel)?;
    Ok(crate::linalg::unvectorize(&s.power_apply(&vectorize(sigma.matrix()), n), sigma.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_density_matrix, random_projector, ONE, ZERO};
    use crate::qcore::trace_distance_matrices;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_dim_example() -> (CMatrix, CMatrix) {
        let p = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let q = CMatrix::from_element(2, 2, c(0.5));
        (p, q)
    }

    #[test]
    fn single_pair_at_quarter_pi() {
        let (p, q) = two_dim_example();
        let j = jordan_blocks(&p, &q).unwrap();
        assert_eq!(j.blocks.len(), 1);
        assert!((j.angles()[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert!(j.p_error < 1e-14 && j.q_error < 1e-14);
    }

    #[test]
    fn commuting_projectors_give_only_singles() {
        let mut p = CMatrix::zeros(4, 4);
        let mut q = CMatrix::zeros(4, 4);
        p[(0, 0)] = ONE;
        p[(1, 1)] = ONE;
        q[(1, 1)] = ONE;
        q[(2, 2)] = ONE;
        let j = jordan_blocks(&p, &q).unwrap();
        assert!(j.blocks.iter().all(|b| matches!(b, JordanBlock::Single { .. })));
        assert!(j.p_error < 1e-14 && j.q_error < 1e-14);
        let inv = invariant_state(&p, &q, &j, 0).unwrap();
        assert!(inv.fallback);
        assert!((von_neumann_entropy(&inv.state) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_pair_angles_match_compressed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = random_projector(16, 8, &mut rng);
        let q = random_projector(16, 8, &mut rng);
        let j = jordan_blocks(&p, &q).unwrap();
        assert!(j.p_error < 1e-9 && j.q_error < 1e-9);
        let mut cos2: Vec<f64> = j.angles().iter().map(|a| a.cos().powi(2)).collect();
        cos2.sort_by(f64::total_cmp);
        let mut brute: Vec<f64> = crate::linalg::hermitian_eigenvalues(&(&p * &q * &p))
            .into_iter()
            .filter(|v| *v > 1e-9 && *v < 1.0 - 1e-9)
            .collect();
        brute.sort_by(f64::total_cmp);
        assert_eq!(cos2.len(), brute.len());
        for (a, b) in cos2.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-9);
        }
        // Basis is unitary and phases follow the convention.
        assert!(max_abs_diff(&(j.basis.adjoint() * &j.basis), &CMatrix::identity(16, 16)) < 1e-10);
        for (index, _) in j.pairs() {
            let first = j.basis.column(index).iter().find(|z| z.norm() > 1e-8).copied().unwrap();
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn rejects_non_projector() {
        let p = CMatrix::identity(2, 2) * c(0.5);
        assert!(matches!(jordan_blocks(&p, &p), Err(Error::NotProjector(_))));
    }

    #[test]
    fn invariant_state_is_fixed_with_one_bit_entropy() {
        let (p, q) = two_dim_example();
        let j = jordan_blocks(&p, &q).unwrap();
        let inv = invariant_state(&p, &q, &j, 0).unwrap();
        assert!(!inv.fallback);
        assert!(max_abs_diff(inv.state.matrix(), &(CMatrix::identity(2, 2) * c(0.5))) < 1e-14);
        assert!((von_neumann_entropy(&inv.state) - 1.0).abs() < 1e-12);
        let ch = two_projector_channel(&p, &q, [0.5, 0.5]).unwrap();
        let after = ch.apply_n(&inv.state, 100).unwrap();
        assert!(max_abs_diff(after.matrix(), inv.state.matrix()) < 1e-12);
    }

    #[test]
    fn saturation_matches_superoperator_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_projector(8, 4, &mut rng);
        let q = random_projector(8, 3, &mut rng);
        let sigma = DensityOperator::new(random_density_matrix(8, &mut rng)).unwrap();
        let ch = two_projector_channel(&p, &q, [0.5, 0.5]).unwrap();
        for n in [0usize, 1, 5, 17] {
            let direct = ch.apply_n(&sigma, n).unwrap();
            let dense = superoperator_power_state(&ch, &sigma, n).unwrap();
            assert!(max_abs_diff(direct.matrix(), &dense) < 1e-10);
        }
        let report = saturation_demo(&p, &q, &sigma, 3000, [0.5, 0.5]).unwrap();
        let dist = report.trace.column("trace_distance").unwrap();
        let n0 = report.n0.expect("converges");
        assert!(dist[n0..].iter().all(|d| *d <= SATURATION_TOL));
        let a = limit_state(&p, &q, &sigma, [0.5, 0.5]).unwrap();
        let b = limit_state(&p, &q, &sigma, [0.9, 0.1]).unwrap();
        assert!(trace_distance_matrices(&a, &b).unwrap() < 1e-8);
    }

    #[test]
    fn invariant_initial_state_has_zero_distance() {
        let (p, q) = two_dim_example();
        let sigma = DensityOperator::maximally_mixed(2);
        let report = saturation_demo(&p, &q, &sigma, 10, [0.5, 0.5]).unwrap();
        assert!(report.trace.column("trace_distance").unwrap().iter().all(|d| *d < 1e-14));
        assert_eq!(report.n0, Some(0));
    }
}
