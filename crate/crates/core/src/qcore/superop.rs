use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_deviation, hermitian_eigen, hermitian_eigenvalues, hermitize, max_abs, unvectorize,
    vectorize, CMatrix, CVector,
};
use crate::qcore::MeasurementChannel;

/// Largest superoperator side (`dim^2`) for which a dense matrix is built.
pub const DEFAULT_MAX_SIDE: usize = 4096;

/// Default eigenvalue-1 threshold: eigenvalues above `1 - tol` span the fixed space.
pub const DEFAULT_FIXED_TOL: f64 = 1e-10;

/// Dense matrix of a channel acting on row-major vectorized operators,
/// `sum_x p_x sum_a F^x_a kron conj(F^x_a)`.
#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

pub fn build_superoperator(channel: &MeasurementChannel) -> Result<Superoperator> {
    build_superoperator_capped(channel, DEFAULT_MAX_SIDE)
}

pub fn build_superoperator_capped(channel: &MeasurementChannel, max_side: usize) -> Result<Superoperator> {
    let dim = channel.dim();
    let side = dim * dim;
    if side > max_side {
        return Err(Error::SuperoperatorTooLarge { side, cap: max_side });
    }
    let mut matrix = CMatrix::zeros(side, side);
    for (pvm, &w) in channel.pvms().iter().zip(channel.weights()) {
        for p in pvm.projectors() {
            let f = p.to_dense();
            matrix += f.kronecker(&f.map(|z| z.conj())) * c(w);
        }
    }
    Ok(Superoperator { dim, matrix })
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.dim * self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply_vec(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// Applies the superoperator to an operator through its row-major vectorization.
    pub fn apply_operator(&self, m: &CMatrix) -> CMatrix {
        unvectorize(&self.apply_vec(&vectorize(m)), self.dim)
    }

    /// `Omega_bar^n v`.
    pub fn power_apply(&self, v: &CVector, n: usize) -> CVector {
        let mut out = v.clone();
        for _ in 0..n {
            out = &self.matrix * out;
        }
        out
    }

    /// Spectrum in ascending order. The matrix is Hermitian for every channel built
    /// from PVMs.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut m = self.matrix.clone();
        hermitize(&mut m);
        hermitian_eigenvalues(&m)
    }

    pub fn operator_norm(&self) -> f64 {
        self.spectrum().iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }
}

/// Projector onto the eigenvalue-1 eigenspace of a superoperator: the limit of its
/// powers.
#[derive(Clone, Debug)]
pub struct FixedPointProjector {
    dim: usize,
    pub projector: CMatrix,
    pub rank: usize,
    /// Largest amount by which an eigenvalue exceeded 1 before clamping.
    pub clamped_excess: f64,
    pub idempotency_defect: f64,
}

impl FixedPointProjector {
    /// `Pi_1` applied to the vectorization of `m`, reshaped back to an operator.
    pub fn limit_of(&self, m: &CMatrix) -> CMatrix {
        unvectorize(&(&self.projector * vectorize(m)), self.dim)
    }
}

pub fn fixed_point_projector(superop: &Superoperator, tol: f64) -> Result<FixedPointProjector> {
    let herm = superop.hermiticity_defect();
    if herm > 1e-10 {
        return Err(Error::NonHermitian(herm));
    }
    let mut m = superop.matrix.clone();
    hermitize(&mut m);
    let (vals, vecs) = hermitian_eigen(&m);
    if let Some(v) = vals.last() {
        if *v < -1e-10 {
            return Err(Error::InvalidChannel(format!(
                "superoperator eigenvalue {v:e} is negative"
            )));
        }
    }
    let clamped_excess = vals.first().map(|v| (v - 1.0).max(0.0)).unwrap_or(0.0);
    let rank = vals.iter().take_while(|&&v| v.min(1.0) > 1.0 - tol).count();
    let side = superop.side();
    let selected = vecs.columns(0, rank);
    let mut projector = if rank == 0 {
        CMatrix::zeros(side, side)
    } else {
        selected * selected.adjoint()
    };
    hermitize(&mut projector);
    let idempotency_defect = max_abs(&(&projector * &projector - &projector));
    Ok(FixedPointProjector {
        dim: superop.dim,
        projector,
        rank,
        clamped_excess,
        idempotency_defect,
    })
}

/// Iterates `v -> Omega_bar v` until it lies within `tol * |v|` of `Pi_1 v` (or
/// `max_steps` is reached). Returns the number of steps taken and the final distance.
pub fn converge_to_fixed_point(
    superop: &Superoperator,
    fixed: &FixedPointProjector,
    v: &CVector,
    max_steps: usize,
    tol: f64,
) -> (usize, f64) {
    let target = &fixed.projector * v;
    let scale = v.norm().max(f64::MIN_POSITIVE);
    let mut cur = v.clone();
    let mut dist = (&cur - &target).norm() / scale;
    let mut steps = 0;
    while dist > tol && steps < max_steps {
        cur = superop.apply_vec(&cur);
        steps += 1;
        dist = (&cur - &target).norm() / scale;
    }
    (steps, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff, random_density_matrix, vectorize, ONE};
    use crate::qcore::{DensityOperator, Pvm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_basis(weights: Vec<f64>) -> MeasurementChannel {
        let z = Pvm::from_basis(&CMatrix::identity(2, 2), &[1, 1], 1e-12).unwrap();
        let h = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]) / c(2f64.sqrt());
        let x = Pvm::from_basis(&h, &[1, 1], 1e-12).unwrap();
        MeasurementChannel::new(vec![z, x], weights).unwrap()
    }

    #[test]
    fn identity_channel_gives_identity_superoperator() {
        let ch = MeasurementChannel::uniform(vec![Pvm::identity(3)]).unwrap();
        let s = build_superoperator(&ch).unwrap();
        assert!(max_abs_diff(s.matrix(), &CMatrix::identity(9, 9)) < 1e-15);
        let fp = fixed_point_projector(&s, DEFAULT_FIXED_TOL).unwrap();
        assert_eq!(fp.rank, 9);
    }

    #[test]
    fn superoperator_matches_channel_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = two_basis(vec![0.3, 0.7]);
        let s = build_superoperator(&ch).unwrap();
        let rho = random_density_matrix(2, &mut rng);
        let direct = ch.apply_matrix(&rho).unwrap();
        assert!(max_abs_diff(&s.apply_operator(&rho), &direct) < 1e-12);
    }

    #[test]
    fn two_basis_spectrum() {
        // Pauli operators diagonalize this channel: I is kept by both pinchings, Z and X
        // by one of the two, Y by neither. tr(Omega_bar) = 2 confirms the count.
        let ch = two_basis(vec![0.5, 0.5]);
        let s = build_superoperator(&ch).unwrap();
        assert!((s.matrix().trace().re - 2.0).abs() < 1e-14);
        let spec = s.spectrum();
        let expected = [0.0, 0.5, 0.5, 1.0];
        for (a, b) in spec.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{spec:?}");
        }
        let fp = fixed_point_projector(&s, DEFAULT_FIXED_TOL).unwrap();
        assert_eq!(fp.rank, 1);
        let id = vectorize(&CMatrix::identity(2, 2));
        assert!((&fp.projector * &id - &id).camax() < 1e-12);
    }

    #[test]
    fn fixed_space_does_not_depend_on_weights() {
        let a = fixed_point_projector(&build_superoperator(&two_basis(vec![0.5, 0.5])).unwrap(), 1e-10).unwrap();
        let b = fixed_point_projector(&build_superoperator(&two_basis(vec![0.9, 0.1])).unwrap(), 1e-10).unwrap();
        assert!(max_abs_diff(&a.projector, &b.projector) < 1e-8);
    }

    #[test]
    fn powers_converge_to_fixed_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = build_superoperator(&two_basis(vec![0.5, 0.5])).unwrap();
        let fp = fixed_point_projector(&s, 1e-10).unwrap();
        let v = vectorize(&random_density_matrix(2, &mut rng));
        let (steps, dist) = converge_to_fixed_point(&s, &fp, &v, 200, 1e-9);
        assert!(dist <= 1e-9 && steps < 200, "{steps} {dist}");
        let state = DensityOperator::maximally_mixed(2);
        assert!(max_abs_diff(&fp.limit_of(state.matrix()), state.matrix()) < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let ch = MeasurementChannel::uniform(vec![Pvm::identity(9)]).unwrap();
        assert!(matches!(
            build_superoperator_capped(&ch, 64),
            Err(Error::SuperoperatorTooLarge { side: 81, cap: 64 })
        ));
    }
}
