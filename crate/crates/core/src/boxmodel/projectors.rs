use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::boxmodel::config::{BoxConfig, Representation};
use crate::boxmodel::repr::BoxRepresentation;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::qcore::{DensityOperator, MeasurementChannel, Projector, Pvm};

/// Largest allowed closed-form vs quadrature discrepancy when building energy-basis
/// projectors with verification on.
pub const COUPLING_CHECK_TOL: f64 = 1e-8;

/// `C_nm = <n|cos 2kx|m>` and `S_nm = <n|sin 2kx|m>` over the first `D` sine modes.
#[derive(Clone, Debug)]
pub struct ModeCouplings {
    pub cos: DMatrix<f64>,
    pub sin: DMatrix<f64>,
}

impl ModeCouplings {
    pub fn max_abs_diff(&self, other: &ModeCouplings) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for (a, b) in [(&self.cos, &other.cos), (&self.sin, &other.sin)] {
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    let d = (a[(i, j)] - b[(i, j)]).abs();
                    if d > worst.2 {
                        worst = (i, j, d);
                    }
                }
            }
        }
        worst
    }
}

/// `int_0^L cos(beta x) dx`.
fn int_cos(beta: f64, l: f64) -> f64 {
    let t = beta * l;
    if t.abs() < 1e-8 {
        l * (1.0 - t * t / 6.0)
    } else {
        t.sin() / beta
    }
}

/// `int_0^L sin(beta x) dx`, written as `2 sin^2(beta L / 2) / beta` to avoid the
/// cancellation in `1 - cos`.
fn int_sin(beta: f64, l: f64) -> f64 {
    let t = beta * l;
    if t.abs() < 1e-8 {
        beta * l * l / 2.0
    } else {
        let h = (0.5 * t).sin();
        2.0 * h * h / beta
    }
}

/// Closed-form couplings from the product-to-sum expansion of
/// `sin(a_n x) sin(a_m x) cos(2kx)` and `... sin(2kx)`, `a_n = n pi / L`.
pub fn mode_couplings(config: &BoxConfig) -> ModeCouplings {
    let d = config.modes;
    let l = config.length;
    let two_k = 2.0 * config.k;
    let mut cos = DMatrix::zeros(d, d);
    let mut sin = DMatrix::zeros(d, d);
    for n in 1..=d {
        for m in 1..=d {
            let diff = (n as f64 - m as f64) * PI / l;
            let sum = (n + m) as f64 * PI / l;
            cos[(n - 1, m - 1)] = (int_cos(diff - two_k, l) + int_cos(diff + two_k, l)
                - int_cos(sum - two_k, l)
                - int_cos(sum + two_k, l))
                / (2.0 * l);
            sin[(n - 1, m - 1)] = (int_sin(two_k + diff, l) + int_sin(two_k - diff, l)
                - int_sin(two_k + sum, l)
                - int_sin(two_k - sum, l))
                / (2.0 * l);
        }
    }
    ModeCouplings { cos, sin }
}

/// Couplings by composite Simpson quadrature with `panels` double intervals, evaluated
/// as `U diag(w f) U^T` over shared nodes.
pub fn mode_couplings_quadrature(config: &BoxConfig, panels: usize) -> ModeCouplings {
    let d = config.modes;
    let l = config.length;
    let nodes = 2 * panels + 1;
    let h = l / (2 * panels) as f64;
    let basis = DMatrix::from_fn(d, nodes, |n, i| ((n + 1) as f64 * PI * i as f64 * h / l).sin());
    let weight = |i: usize| {
        let w = if i == 0 || i == nodes - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * h / 3.0 * 2.0 / l
    };
    let scaled = |f: &dyn Fn(f64) -> f64| {
        let mut b = basis.clone();
        for i in 0..nodes {
            let s = weight(i) * f(i as f64 * h);
            b.column_mut(i).scale_mut(s);
        }
        &b * basis.transpose()
    };
    let two_k = 2.0 * config.k;
    ModeCouplings {
        cos: scaled(&|x| (two_k * x).cos()),
        sin: scaled(&|x| (two_k * x).sin()),
    }
}

/// Enough Simpson panels to resolve the fastest integrand to well below
/// [`COUPLING_CHECK_TOL`], and never fewer than `10^4`.
pub fn verification_panels(config: &BoxConfig) -> usize {
    let omega = 2.0 * config.modes as f64 * PI / config.length + 2.0 * config.k;
    (40.0 * omega * config.length).ceil().max(10_000.0) as usize
}

/// Closed-form couplings, cross-checked against quadrature; errors when any entry
/// differs by more than `tol`.
pub fn verified_mode_couplings(config: &BoxConfig, tol: f64) -> Result<ModeCouplings> {
    let closed = mode_couplings(config);
    let quad = mode_couplings_quadrature(config, verification_panels(config));
    let (row, col, diff) = closed.max_abs_diff(&quad);
    if diff > tol {
        return Err(Error::QuadratureMismatch { row, col, diff });
    }
    Ok(closed)
}

/// Dense `F+-` in the energy basis: `(I (x) I + C (x) Z +- S (x) X) / 2`.
fn energy_projector(couplings: &ModeCouplings, sign: f64) -> CMatrix {
    let d = couplings.cos.nrows();
    let mut f = CMatrix::zeros(2 * d, 2 * d);
    for n in 0..d {
        for m in 0..d {
            let cv = couplings.cos[(n, m)];
            let sv = sign * couplings.sin[(n, m)];
            let id = if n == m { 1.0 } else { 0.0 };
            f[(2 * n, 2 * m)] = c(0.5 * (id + cv));
            f[(2 * n + 1, 2 * m + 1)] = c(0.5 * (id - cv));
            f[(2 * n, 2 * m + 1)] = c(0.5 * sv);
            f[(2 * n + 1, 2 * m)] = c(0.5 * sv);
        }
    }
    f
}

/// The `+` and `-` measurements `{F, 1 - F}`. On the grid they are exact rank-one
/// spin blocks; in the energy basis the truncation defects are measured and stored on
/// the returned PVMs.
pub fn build_f_projectors(rep: &BoxRepresentation) -> Result<(Pvm, Pvm)> {
    match rep.kind() {
        Representation::Grid => Ok(rep.lattice()?.measurements()),
        Representation::Energy => {
            let couplings = if rep.verify() {
                verified_mode_couplings(rep.config(), COUPLING_CHECK_TOL)?
            } else {
                mode_couplings(rep.config())
            };
            let dim = rep.dim();
            let make = |sign: f64| {
                let f = energy_projector(&couplings, sign);
                let rest = CMatrix::identity(dim, dim) - &f;
                Pvm::monitored(vec![Projector::Dense(f), Projector::Dense(rest)])
            };
            Ok((make(1.0)?, make(-1.0)?))
        }
    }
}

/// Both measurements at weight 1/2.
pub fn heat_vision_channel(rep: &BoxRepresentation) -> Result<MeasurementChannel> {
    let (plus, minus) = build_f_projectors(rep)?;
    MeasurementChannel::uniform(vec![plus, minus])
}

/// `Omega^n(sigma)` in one pass over grid pairs (grid representation only). With
/// verification on, the result is compared with direct iteration and any entry
/// differing by more than `1e-10` is an error.
pub fn kernel_evolve(rep: &BoxRepresentation, state: &DensityOperator, n: usize) -> Result<DensityOperator> {
    let lattice = rep.lattice()?;
    if rep.verify() {
        lattice.evolve_verified(state, n, 1e-10)
    } else {
        lattice.evolve(state, n)
    }
}
