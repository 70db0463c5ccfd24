use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;

use crate::boxmodel::config::{BoxConfig, Representation};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64, ONE, ZERO};
use crate::qcore::DensityOperator;
use crate::quad::simpson;
use crate::spinpos::SpinLattice;

/// Spin state `|0>`.
pub fn spin_zero() -> [C64; 2] {
    [ONE, ZERO]
}

/// Spin state `|1>`.
pub fn spin_one() -> [C64; 2] {
    [ZERO, ONE]
}

/// Eigenstates `|+-i> = (|0> +- i|1>)/sqrt(2)` of `sigma_y`.
pub fn spin_y(sign: f64) -> [C64; 2] {
    [c(FRAC_1_SQRT_2), C64::new(0.0, sign.signum() * FRAC_1_SQRT_2)]
}

/// A box discretization together with the transforms it needs.
///
/// Basis index `2j + s` holds site `j` (grid point or mode `j + 1`) and spin `s`.
#[derive(Clone, Debug)]
pub struct BoxRepresentation {
    config: BoxConfig,
    verify: bool,
}

impl BoxRepresentation {
    /// Cross-checks run automatically in builds with debug assertions.
    pub fn new(config: BoxConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            verify: cfg!(debug_assertions),
        })
    }

    /// Forces the closed-form vs quadrature cross-check on or off.
    pub fn with_verification(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }

    pub fn config(&self) -> &BoxConfig {
        &self.config
    }

    pub fn verify(&self) -> bool {
        self.verify
    }

    pub fn kind(&self) -> Representation {
        self.config.representation
    }

    /// Grid points or sine modes.
    pub fn sites(&self) -> usize {
        match self.kind() {
            Representation::Grid => self.config.grid,
            Representation::Energy => self.config.modes,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.sites()
    }

    /// `x_j = (j + 1/2) L / G`.
    pub fn grid_points(&self) -> Vec<f64> {
        let g = self.config.grid;
        let h = self.config.length / g as f64;
        (0..g).map(|j| (j as f64 + 0.5) * h).collect()
    }

    pub fn require_grid(&self) -> Result<()> {
        match self.kind() {
            Representation::Grid => Ok(()),
            Representation::Energy => Err(Error::InvalidConfig(
                "operation needs the grid representation".into(),
            )),
        }
    }

    pub fn lattice(&self) -> Result<SpinLattice> {
        self.require_grid()?;
        Ok(SpinLattice::new(self.grid_points(), self.config.k))
    }

    /// Coordinates of the unit-norm sine mode `Psi_n`, `n >= 1`.
    ///
    /// On the grid this is the discrete sine vector `sqrt(2/G) sin(n pi (j + 1/2)/G)`,
    /// orthonormal for `1 <= n < G`.
    pub fn mode_amplitudes(&self, n: usize) -> Vec<f64> {
        assert!(n >= 1, "modes are numbered from 1");
        match self.kind() {
            Representation::Grid => {
                let g = self.config.grid as f64;
                let scale = (2.0 / g).sqrt();
                (0..self.config.grid)
                    .map(|j| scale * (n as f64 * PI * (j as f64 + 0.5) / g).sin())
                    .collect()
            }
            Representation::Energy => {
                let mut v = vec![0.0; self.config.modes];
                if n <= self.config.modes {
                    v[n - 1] = 1.0;
                }
                v
            }
        }
    }

    /// Coordinates of a wavefunction `psi(x)` on `[0, L]`, normalized to unit norm.
    pub fn position_amplitudes<F: Fn(f64) -> f64 + Sync>(&self, psi: F) -> Result<Vec<f64>> {
        let l = self.config.length;
        let mut v: Vec<f64> = match self.kind() {
            Representation::Grid => self.grid_points().into_iter().map(&psi).collect(),
            Representation::Energy => (1..=self.config.modes)
                .into_par_iter()
                .map(|n| {
                    let a = n as f64 * PI / l;
                    (2.0 / l).sqrt() * simpson(|x| psi(x) * (a * x).sin(), 0.0, l, 4096)
                })
                .collect(),
        };
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("wavefunction has no weight in this representation".into()));
        }
        v.iter_mut().for_each(|a| *a /= norm);
        Ok(v)
    }

    /// `sum_i psi_i (x) chi_i`, normalized, from pairs of position amplitudes and spinors.
    pub fn entangled_vector(&self, parts: &[(Vec<f64>, [C64; 2])]) -> Result<CVector> {
        let sites = self.sites();
        let mut v = CVector::zeros(2 * sites);
        for (amps, spinor) in parts {
            if amps.len() != sites {
                return Err(Error::DimensionMismatch {
                    expected: sites,
                    found: amps.len(),
                });
            }
            for (j, &a) in amps.iter().enumerate() {
                v[2 * j] += spinor[0] * a;
                v[2 * j + 1] += spinor[1] * a;
            }
        }
        Ok(v)
    }

    /// `|psi><psi| (x) |chi><chi|` for real position amplitudes.
    pub fn product_state(&self, amplitudes: &[f64], spinor: [C64; 2]) -> Result<DensityOperator> {
        DensityOperator::pure(&self.entangled_vector(&[(amplitudes.to_vec(), spinor)])?)
    }

    /// `|Psi_n> (x) |chi>`.
    pub fn mode_state(&self, n: usize, spinor: [C64; 2]) -> Result<DensityOperator> {
        self.product_state(&self.mode_amplitudes(n), spinor)
    }

    /// Population of sine modes `1..=D` after tracing out spin.
    pub fn mode_populations(&self, state: &DensityOperator) -> Result<Vec<f64>> {
        state.check_dim(self.dim())?;
        let m = state.matrix();
        match self.kind() {
            Representation::Energy => Ok((0..self.config.modes)
                .map(|j| m[(2 * j, 2 * j)].re + m[(2 * j + 1, 2 * j + 1)].re)
                .collect()),
            Representation::Grid => {
                let g = self.config.grid;
                let modes: Vec<Vec<f64>> = (1..=self.config.modes).map(|n| self.mode_amplitudes(n)).collect();
                Ok(modes
                    .par_iter()
                    .map(|u| spin_traced_expectation(m, u, g))
                    .collect())
            }
        }
    }
}

/// `sum_s <u, s| m |u, s>` for a real position vector `u` on `g` sites.
fn spin_traced_expectation(m: &CMatrix, u: &[f64], g: usize) -> f64 {
    let dim = 2 * g;
    let data = m.as_slice();
    let mut total = 0.0;
    for j in 0..g {
        let col0 = &data[(2 * j) * dim..(2 * j + 1) * dim];
        let col1 = &data[(2 * j + 1) * dim..(2 * j + 2) * dim];
        let mut acc = 0.0;
        for i in 0..g {
            acc += u[i] * (col0[2 * i].re + col1[2 * i + 1].re);
        }
        total += acc * u[j];
    }
    total
}
