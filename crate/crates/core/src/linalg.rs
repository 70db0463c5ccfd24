//! Dense complex linear algebra shared by every model.
//!
//! Operators on a `d`-dimensional space are `d x d` [`CMatrix`] values. Operators
//! are vectorized by stacking rows, `sigma -> sum_ij sigma_ij |i>|j>`, so that
//! `vec(A X B) = (A kron B^T) vec(X)`. Every superoperator in the crate uses this
//! convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max_ij |m_ij - conj(m_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(m + m^dagger) / 2`, in place.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = c(m[(j, j)].re);
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order with
/// matching eigenvector columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (vals, vecs)
}

/// Trace norm of a Hermitian matrix, `sum |lambda_i|`.
pub fn trace_norm_hermitian(m: &CMatrix) -> Result<f64> {
    let dev = hermitian_deviation(m);
    let scale = max_abs(m).max(1.0);
    if dev > 1e-10 * scale {
        return Err(Error::NonHermitian(dev));
    }
    let mut h = m.clone();
    hermitize(&mut h);
    Ok(hermitian_eigenvalues(&h).iter().map(|v| v.abs()).sum())
}

/// Row-major vectorization.
pub fn vectorize(m: &CMatrix) -> CVector {
    let (r, cols) = m.shape();
    CVector::from_fn(r * cols, |idx, _| m[(idx / cols, idx % cols)])
}

pub fn unvectorize(v: &CVector, dim: usize) -> CMatrix {
    assert_eq!(v.len(), dim * dim);
    CMatrix::from_fn(dim, dim, |i, j| v[i * dim + j])
}

pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn basis_vector(dim: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[i] = ONE;
    v
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Haar-random unitary (QR of a Ginibre matrix with the phases of `R` removed).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Projector onto a Haar-random `rank`-dimensional subspace.
pub fn random_projector<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMatrix {
    let u = random_unitary(dim, rng);
    let cols = u.columns(0, rank);
    let mut p = cols * cols.adjoint();
    hermitize(&mut p);
    p
}

/// Random full-rank density matrix `G G^dagger / tr(G G^dagger)`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    let mut rho = &g * g.adjoint();
    let t = trace(&rho).re;
    rho /= c(t);
    hermitize(&mut rho);
    rho
}

pub fn random_pure_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let g = ginibre(dim, 1, rng);
    let v = CVector::from_iterator(dim, g.iter().copied());
    let n = v.norm();
    v / c(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vectorization_is_row_major_and_matches_kron_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ginibre(3, 3, &mut rng);
        let x = ginibre(3, 3, &mut rng);
        let b = ginibre(3, 3, &mut rng);
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = a.kronecker(&b.transpose()) * vectorize(&x);
        assert!((lhs - rhs).camax() < 1e-12);
        let m = CMatrix::from_fn(2, 2, |i, j| c((2 * i + j) as f64));
        assert_eq!(vectorize(&m)[1], c(1.0));
        assert_eq!(unvectorize(&vectorize(&m), 2), m);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(6, &mut rng);
        let id = CMatrix::identity(6, 6);
        assert!(max_abs_diff(&(u.adjoint() * &u), &id) < 1e-12);
    }

    #[test]
    fn trace_norm_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(matches!(trace_norm_hermitian(&m), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn trace_norm_of_difference_of_orthogonal_pure_states_is_two() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = ONE;
        m[(1, 1)] = -ONE;
        assert!((trace_norm_hermitian(&m).unwrap() - 2.0).abs() < 1e-14);
    }
}
