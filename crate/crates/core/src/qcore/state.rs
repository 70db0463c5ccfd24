use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_deviation, hermitian_eigenvalues, hermitize, max_abs, trace, CMatrix, CVector};

/// A Hermitian, positive-semidefinite, unit-trace matrix on a finite representation space.
///
/// Construction validates all three properties; channel outputs are re-symmetrized
/// instead of re-validated, since pinching maps preserve them exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const PSD_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;

    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidState(format!(
                "matrix must be square and non-empty, got {:?}",
                matrix.shape()
            )));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let mut m = matrix;
        hermitize(&mut m);
        let lowest = hermitian_eigenvalues(&m)[0];
        if lowest < -Self::PSD_TOL {
            return Err(Error::InvalidState(format!("eigenvalue {lowest:e} below -1e-10")));
        }
        Ok(Self { matrix: m })
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi / c(n);
        let mut m = &v * v.adjoint();
        hermitize(&mut m);
        Ok(Self { matrix: m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim) / c(dim as f64),
        }
    }

    /// Wraps a channel output without re-checking positivity.
    pub(crate) fn from_trusted(mut matrix: CMatrix) -> Self {
        hermitize(&mut matrix);
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    /// Largest entry modulus; handy for diagnostics.
    pub fn max_entry(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}
