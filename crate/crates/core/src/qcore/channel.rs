use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qcore::{DensityOperator, Pvm};

/// A random choice of measurement: PVM `x` is performed with probability `p_x` and
/// the outcome is discarded, `sigma -> sum_x p_x sum_a F^x_a sigma F^x_a`.
#[derive(Clone, Debug)]
pub struct MeasurementChannel {
    pvms: Vec<Pvm>,
    weights: Vec<f64>,
}

impl MeasurementChannel {
    pub const WEIGHT_SUM_TOL: f64 = 1e-12;

    pub fn new(pvms: Vec<Pvm>, weights: Vec<f64>) -> Result<Self> {
        if pvms.is_empty() {
            return Err(Error::InvalidChannel("no measurements".into()));
        }
        if pvms.len() != weights.len() {
            return Err(Error::InvalidChannel(format!(
                "{} measurements but {} weights",
                pvms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidChannel(format!("weight {w} is not strictly positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > Self::WEIGHT_SUM_TOL {
            return Err(Error::InvalidChannel(format!("weights sum to {total}")));
        }
        let dim = pvms[0].dim();
        if let Some(p) = pvms.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Self { pvms, weights })
    }

    /// Every PVM with equal weight.
    pub fn uniform(pvms: Vec<Pvm>) -> Result<Self> {
        let n = pvms.len().max(1);
        Self::new(pvms, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.pvms[0].dim()
    }

    pub fn pvms(&self) -> &[Pvm] {
        &self.pvms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same measurements, different weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.pvms.clone(), weights)
    }

    /// Applies the channel to a raw matrix (no state invariants required).
    pub fn apply_matrix(&self, sigma: &CMatrix) -> Result<CMatrix> {
        let dim = self.dim();
        if sigma.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: sigma.nrows(),
            });
        }
        let mut out = CMatrix::zeros(dim, dim);
        for (pvm, &w) in self.pvms.iter().zip(&self.weights) {
            pvm.accumulate_pinching(sigma, w, &mut out);
        }
        Ok(out)
    }

    /// `Omega(sigma)`; the output is re-symmetrized.
    pub fn apply(&self, state: &DensityOperator) -> Result<DensityOperator> {
        state.check_dim(self.dim())?;
        Ok(DensityOperator::from_trusted(self.apply_matrix(state.matrix())?))
    }

    /// `Omega^n(sigma)`.
    pub fn apply_n(&self, state: &DensityOperator, n: usize) -> Result<DensityOperator> {
        let mut s = state.clone();
        for _ in 0..n {
            s = self.apply(&s)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff, CVector, ONE, ZERO};
    use crate::qcore::Pvm;

    fn two_basis_channel() -> MeasurementChannel {
        let z = Pvm::from_basis(&CMatrix::identity(2, 2), &[1, 1], 1e-12).unwrap();
        let h = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]) / c(2f64.sqrt());
        let x = Pvm::from_basis(&h, &[1, 1], 1e-12).unwrap();
        MeasurementChannel::uniform(vec![z, x]).unwrap()
    }

    #[test]
    fn identity_pvm_leaves_state_unchanged() {
        let ch = MeasurementChannel::uniform(vec![Pvm::identity(3)]).unwrap();
        let psi = CVector::from_vec(vec![ONE, c(0.5), ZERO]);
        let rho = DensityOperator::pure(&psi).unwrap();
        assert!(max_abs_diff(ch.apply(&rho).unwrap().matrix(), rho.matrix()) < 1e-15);
    }

    #[test]
    fn z_and_x_bases_mix_zero_state() {
        // 1/2 |0><0| + 1/4 I, by hand: the Z pinching leaves |0><0|, the X pinching gives I/2.
        let ch = two_basis_channel();
        let rho = DensityOperator::pure(&CVector::from_vec(vec![ONE, ZERO])).unwrap();
        let out = ch.apply(&rho).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.75), ZERO, ZERO, c(0.25)]);
        assert!(max_abs_diff(out.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn block_diagonal_state_is_fixed() {
        let ch = two_basis_channel();
        let rho = DensityOperator::maximally_mixed(2);
        assert!(max_abs_diff(ch.apply(&rho).unwrap().matrix(), rho.matrix()) < 1e-15);
    }

    #[test]
    fn rejects_bad_weights_and_dims() {
        let z = Pvm::identity(2);
        assert!(MeasurementChannel::new(vec![z.clone(), z.clone()], vec![1.0, 0.0]).is_err());
        assert!(MeasurementChannel::new(vec![z.clone()], vec![0.9]).is_err());
        assert!(MeasurementChannel::new(vec![z.clone(), Pvm::identity(3)], vec![0.5, 0.5]).is_err());
        let ch = MeasurementChannel::uniform(vec![z]).unwrap();
        assert!(matches!(
            ch.apply(&DensityOperator::maximally_mixed(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
