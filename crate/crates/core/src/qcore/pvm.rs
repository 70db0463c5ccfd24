use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_deviation, max_abs, CMatrix, C64, ONE, ZERO};

/// Marks a missing image in a [`Projector::Reflection`] partner table.
pub const NO_PARTNER: u32 = u32::MAX;

/// A projector, stored in whichever form makes `F sigma F` cheap.
#[derive(Clone, Debug)]
pub enum Projector {
    Dense(CMatrix),
    /// Block-diagonal with one rank-one block `v_b v_b^dagger` per block of `block`
    /// consecutive basis states. Column `b` of `vectors` is `v_b`.
    RankOneBlocks { block: usize, vectors: CMatrix },
    /// `(1 + sign * L) / 2` for a symmetric partial permutation `L` given by its
    /// partner table (`L e_w = e_partner[w]`, or zero when the partner is missing).
    /// Exactly idempotent only where every partner exists.
    Reflection { partner: Arc<[u32]>, sign: f64 },
}

impl Projector {
    pub fn dim(&self) -> usize {
        match self {
            Projector::Dense(m) => m.nrows(),
            Projector::RankOneBlocks { block, vectors } => block * vectors.ncols(),
            Projector::Reflection { partner, .. } => partner.len(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Projector::Dense(m) => m.clone(),
            Projector::RankOneBlocks { block, vectors } => {
                let b = *block;
                let n = self.dim();
                let mut out = CMatrix::zeros(n, n);
                for (blk, v) in vectors.column_iter().enumerate() {
                    for a in 0..b {
                        for cc in 0..b {
                            out[(blk * b + a, blk * b + cc)] = v[a] * v[cc].conj();
                        }
                    }
                }
                out
            }
            Projector::Reflection { partner, sign } => {
                let n = partner.len();
                let mut out = CMatrix::identity(n, n) * c(0.5);
                for (w, &p) in partner.iter().enumerate() {
                    if p != NO_PARTNER {
                        out[(p as usize, w)] += c(0.5 * sign);
                    }
                }
                out
            }
        }
    }

    /// `out += weight * F sigma F`.
    pub fn accumulate_sandwich(&self, sigma: &CMatrix, weight: f64, out: &mut CMatrix) {
        let n = self.dim();
        assert_eq!(sigma.shape(), (n, n));
        assert_eq!(out.shape(), (n, n));
        match self {
            Projector::Dense(f) => {
                let tmp = f * sigma;
                out.gemm(c(weight), &tmp, f, ONE);
            }
            Projector::RankOneBlocks { block, vectors } => {
                let b = *block;
                let src = sigma.as_slice();
                out.as_mut_slice()
                    .par_chunks_mut(b * n)
                    .enumerate()
                    .for_each(|(j, chunk)| {
                        let vj = vectors.column(j);
                        for i in 0..vectors.ncols() {
                            let vi = vectors.column(i);
                            let mut s = ZERO;
                            for cc in 0..b {
                                let col = (j * b + cc) * n;
                                let mut row_sum = ZERO;
                                for a in 0..b {
                                    row_sum += vi[a].conj() * src[col + i * b + a];
                                }
                                s += row_sum * vj[cc];
                            }
                            let s = s * weight;
                            for cc in 0..b {
                                let scale = s * vj[cc].conj();
                                for a in 0..b {
                                    chunk[cc * n + i * b + a] += vi[a] * scale;
                                }
                            }
                        }
                    });
            }
            Projector::Reflection { partner, sign } => {
                let src = sigma.as_slice();
                let quarter = 0.25 * weight;
                let s = *sign;
                out.as_mut_slice()
                    .par_chunks_mut(n)
                    .enumerate()
                    .for_each(|(col, chunk)| {
                        let pc = partner[col];
                        let base = col * n;
                        for (row, slot) in chunk.iter_mut().enumerate() {
                            let pr = partner[row];
                            let mut acc = src[base + row];
                            if pr != NO_PARTNER {
                                acc += src[base + pr as usize] * s;
                            }
                            if pc != NO_PARTNER {
                                let pbase = pc as usize * n;
                                acc += src[pbase + row] * s;
                                if pr != NO_PARTNER {
                                    acc += src[pbase + pr as usize];
                                }
                            }
                            *slot += acc * quarter;
                        }
                    });
            }
        }
    }

    pub fn sandwich(&self, sigma: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        self.accumulate_sandwich(sigma, 1.0, &mut out);
        out
    }

    /// `tr(F sigma)`.
    pub fn expectation(&self, sigma: &CMatrix) -> C64 {
        match self {
            Projector::Dense(f) => f.component_mul(&sigma.transpose()).sum(),
            Projector::RankOneBlocks { block, vectors } => {
                let b = *block;
                let mut total = ZERO;
                for (blk, v) in vectors.column_iter().enumerate() {
                    let o = blk * b;
                    for a in 0..b {
                        for cc in 0..b {
                            total += v[a].conj() * sigma[(o + a, o + cc)] * v[cc];
                        }
                    }
                }
                total
            }
            Projector::Reflection { partner, sign } => {
                let mut tr = ZERO;
                let mut swapped = ZERO;
                for (w, &p) in partner.iter().enumerate() {
                    tr += sigma[(w, w)];
                    if p != NO_PARTNER {
                        swapped += sigma[(p as usize, w)];
                    }
                }
                (tr + swapped * sign) * 0.5
            }
        }
    }

    /// `max |F^2 - F|`, computed from the stored structure.
    pub fn idempotency_defect(&self) -> f64 {
        match self {
            Projector::Dense(f) => max_abs(&(f * f - f)),
            Projector::RankOneBlocks { vectors, .. } => vectors
                .column_iter()
                .map(|v| {
                    let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                    let peak = v.iter().fold(0.0_f64, |m, z| m.max(z.norm_sqr()));
                    (norm_sq - 1.0).abs() * peak
                })
                .fold(0.0, f64::max),
            Projector::Reflection { partner, .. } => {
                // F^2 - F = (L^2 - 1) / 4, nonzero exactly where the partner is missing.
                if partner.contains(&NO_PARTNER) {
                    0.25
                } else {
                    0.0
                }
            }
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match self {
            Projector::Dense(f) => hermitian_deviation(f),
            _ => 0.0,
        }
    }
}

/// A complete set of orthogonal projectors with outcome labels.
#[derive(Clone, Debug)]
pub struct Pvm {
    projectors: Vec<Projector>,
    labels: Vec<u32>,
    idempotency_defect: f64,
    completeness_defect: f64,
}

impl Pvm {
    /// Builds a PVM whose idempotency, hermiticity and completeness defects are all
    /// at most `tol`. Labels default to `0, 1, ...`.
    pub fn new(projectors: Vec<Projector>, tol: f64) -> Result<Self> {
        let pvm = Self::monitored(projectors)?;
        let herm = pvm
            .projectors
            .iter()
            .map(Projector::hermiticity_defect)
            .fold(0.0, f64::max);
        let worst = pvm.idempotency_defect.max(pvm.completeness_defect).max(herm);
        if worst > tol {
            return Err(Error::NotProjector(format!(
                "defect {worst:e} exceeds tolerance {tol:e} (idempotency {:e}, completeness {:e}, hermiticity {herm:e})",
                pvm.idempotency_defect, pvm.completeness_defect
            )));
        }
        Ok(pvm)
    }

    /// Builds a PVM from basis-truncated projectors: the defects are measured and
    /// reported, not enforced.
    pub fn monitored(projectors: Vec<Projector>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::InvalidMeasurement("no projectors".into()));
        }
        let dim = projectors[0].dim();
        if let Some(p) = projectors.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        let idempotency_defect = projectors
            .iter()
            .map(Projector::idempotency_defect)
            .fold(0.0, f64::max);
        let completeness_defect = completeness_defect(&projectors);
        let labels = (0..projectors.len() as u32).collect();
        Ok(Self {
            projectors,
            labels,
            idempotency_defect,
            completeness_defect,
        })
    }

    /// Dense projectors, validated at `tol`.
    pub fn from_dense(projectors: Vec<CMatrix>, tol: f64) -> Result<Self> {
        Self::new(projectors.into_iter().map(Projector::Dense).collect(), tol)
    }

    /// `{P, 1 - P}` from a dense projector `P`.
    pub fn dichotomic(p: &CMatrix, tol: f64) -> Result<Self> {
        let q = CMatrix::identity(p.nrows(), p.nrows()) - p;
        Self::from_dense(vec![p.clone(), q], tol)
    }

    /// The trivial measurement `{I}`.
    pub fn identity(dim: usize) -> Self {
        Self::from_dense(vec![CMatrix::identity(dim, dim)], 0.0).expect("identity is a projector")
    }

    /// Rank-one projectors onto the columns of a unitary, grouped by `groups`
    /// (consecutive column counts summing to the dimension).
    pub fn from_basis(unitary: &CMatrix, groups: &[usize], tol: f64) -> Result<Self> {
        let dim = unitary.nrows();
        if groups.iter().sum::<usize>() != dim {
            return Err(Error::InvalidMeasurement("groups must cover the basis".into()));
        }
        let mut start = 0;
        let mut projectors = Vec::with_capacity(groups.len());
        for &g in groups {
            let cols = unitary.columns(start, g);
            projectors.push(cols * cols.adjoint());
            start += g;
        }
        Self::from_dense(projectors, tol)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.projectors.len() {
            return Err(Error::InvalidMeasurement(format!(
                "{} labels for {} projectors",
                labels.len(),
                self.projectors.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn idempotency_defect(&self) -> f64 {
        self.idempotency_defect
    }

    pub fn completeness_defect(&self) -> f64 {
        self.completeness_defect
    }

    /// `sum_a F_a sigma F_a` (the pinching), added into `out` with weight `weight`.
    pub fn accumulate_pinching(&self, sigma: &CMatrix, weight: f64, out: &mut CMatrix) {
        for p in &self.projectors {
            p.accumulate_sandwich(sigma, weight, out);
        }
    }
}

fn completeness_defect(projectors: &[Projector]) -> f64 {
    let dim = projectors[0].dim();
    let all_rank_one = projectors.iter().all(|p| {
        matches!(p, Projector::RankOneBlocks { block, .. }
            if matches!(&projectors[0], Projector::RankOneBlocks { block: b0, .. } if b0 == block))
    });
    if all_rank_one {
        let Projector::RankOneBlocks { block, vectors } = &projectors[0] else {
            unreachable!()
        };
        let b = *block;
        let mut worst = 0.0_f64;
        for blk in 0..vectors.ncols() {
            for a in 0..b {
                for cc in 0..b {
                    let mut sum = ZERO;
                    for p in projectors {
                        let Projector::RankOneBlocks { vectors, .. } = p else {
                            unreachable!()
                        };
                        sum += vectors[(a, blk)] * vectors[(cc, blk)].conj();
                    }
                    let target = if a == cc { ONE } else { ZERO };
                    worst = worst.max((sum - target).norm());
                }
            }
        }
        return worst;
    }
    let reflections: Option<Vec<(&Arc<[u32]>, f64)>> = projectors
        .iter()
        .map(|p| match p {
            Projector::Reflection { partner, sign } => Some((partner, *sign)),
            _ => None,
        })
        .collect();
    if let Some(refl) = reflections {
        if refl.iter().all(|(p, _)| p[..] == refl[0].0[..]) {
            let identity_part = (projectors.len() as f64 * 0.5 - 1.0).abs();
            let swap_part = 0.5 * refl.iter().map(|(_, s)| s).sum::<f64>().abs();
            return identity_part.max(swap_part);
        }
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for p in projectors {
        sum += p.to_dense();
    }
    max_abs(&(sum - CMatrix::identity(dim, dim)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_density_matrix, random_projector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn structured_sandwiches_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma = random_density_matrix(6, &mut rng);

        let th: [f64; 3] = [0.3, 1.1, -0.4];
        let vectors = CMatrix::from_fn(2, 3, |a, b| if a == 0 { c(th[b].cos()) } else { c(th[b].sin()) });
        let p = Projector::RankOneBlocks { block: 2, vectors };
        assert!(max_abs_diff(&p.sandwich(&sigma), &(p.to_dense() * &sigma * p.to_dense())) < 1e-14);

        let partner: Arc<[u32]> = Arc::from(vec![1, 0, 3, 2, NO_PARTNER, NO_PARTNER]);
        let r = Projector::Reflection { partner, sign: -1.0 };
        let d = r.to_dense();
        assert!(max_abs_diff(&r.sandwich(&sigma), &(&d * &sigma * &d)) < 1e-14);
        assert!((r.expectation(&sigma) - (&d * &sigma).trace()).norm() < 1e-14);
        assert_eq!(r.idempotency_defect(), 0.25);
    }

    #[test]
    fn rejects_non_projector() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 0)] = c(0.5);
        let q = CMatrix::identity(2, 2) - &m;
        assert!(matches!(Pvm::from_dense(vec![m, q], 1e-10), Err(Error::NotProjector(_))));
    }

    #[test]
    fn incomplete_set_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_projector(4, 2, &mut rng);
        assert!(Pvm::from_dense(vec![p.clone()], 1e-10).is_err());
        let m = Pvm::monitored(vec![Projector::Dense(p)]).unwrap();
        assert!(m.completeness_defect() > 0.1);
    }
}
