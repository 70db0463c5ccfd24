//! Discrete position ladder `|n>, n = 1..d`, with a spin: two rank-one-per-site
//! measurements that reveal every harmonic `<cos(4kjn)>` of the occupation
//! distribution, while the alternating channel still converges in trace norm and leaves
//! any energy diagonal in `|n>` unchanged.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, trace_norm_hermitian, CMatrix};
use crate::qcore::{purity, von_neumann_entropy, DensityOperator, MetricTrace, Pvm};
use crate::spinpos::SpinLattice;

/// Trace distance to the limit regarded as converged.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Purity excess over the limit below which the purity sequence counts as settled.
pub const PURITY_CAUCHY_TOL: f64 = 1e-10;
/// A superoperator eigenvalue within this distance of 1, outside the fixed space, is
/// reported as resonant.
pub const RESONANCE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Ladder {
    lattice: SpinLattice,
}

/// `{G+, 1 - G+}` and `{G-, 1 - G-}` on `C^d (x) C^2`.
pub fn build_g_projectors(d: usize, k: f64) -> Result<(Pvm, Pvm)> {
    Ok(Ladder::new(d, k)?.measurements())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Largest superoperator eigenvalue below the fixed space.
    pub slowest_rate: f64,
    /// `1 - slowest_rate`.
    pub spectral_gap: f64,
    /// Site pairs `(n, m)` carrying an eigenvalue within [`RESONANCE_TOL`] of 1 that the
    /// limit formula assumes decays.
    pub resonant: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct LadderCurve {
    /// Columns `trace_distance`, `energy`, `purity`, `entropy`.
    pub trace: MetricTrace,
    pub limit: DensityOperator,
    pub limit_purity: f64,
    pub limit_entropy: f64,
    /// First recorded step with trace distance at most [`CONVERGENCE_TOL`].
    pub converged_step: Option<usize>,
    pub monotone: bool,
    /// Largest `|E(N) - E(0)|` over the recorded steps.
    pub energy_drift: f64,
    /// Decay rate per step fitted to the last decade of the distance curve.
    pub empirical_rate: Option<f64>,
    pub warnings: Vec<String>,
}

impl Ladder {
    pub fn new(d: usize, k: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidConfig(format!("ladder needs d >= 2, got {d}")));
        }
        if !k.is_finite() {
            return Err(Error::InvalidConfig(format!("k must be finite, got {k}")));
        }
        Ok(Self {
            lattice: SpinLattice::new((1..=d).map(|n| n as f64).collect(), k),
        })
    }

    pub fn d(&self) -> usize {
        self.lattice.sites()
    }

    pub fn k(&self) -> f64 {
        self.lattice.k()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn lattice(&self) -> &SpinLattice {
        &self.lattice
    }

    pub fn measurements(&self) -> (Pvm, Pvm) {
        self.lattice.measurements()
    }

    /// `sum_n <n| tr_spin sigma |n> |n><n| (x) I/2`.
    pub fn analytic_limit(&self, state: &DensityOperator) -> Result<DensityOperator> {
        state.check_dim(self.dim())?;
        let pops = self.lattice.position_populations(state);
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (j, p) in pops.iter().enumerate() {
            m[(2 * j, 2 * j)] = c(0.5 * p);
            m[(2 * j + 1, 2 * j + 1)] = c(0.5 * p);
        }
        Ok(DensityOperator::from_trusted(m))
    }

    /// `sum_n n^2 <n| tr_spin sigma |n>`.
    pub fn energy(&self, state: &DensityOperator) -> f64 {
        self.lattice
            .position_populations(state)
            .iter()
            .enumerate()
            .map(|(j, p)| ((j + 1) * (j + 1)) as f64 * p)
            .sum()
    }

    pub fn evolve(&self, state: &DensityOperator, n: usize) -> Result<DensityOperator> {
        self.lattice.evolve(state, n)
    }

    /// Superoperator eigenvalues per site pair `(n, m)`: `cos^2, sin^2` of `k(n - m)`
    /// and of `k(n + m)`. The eigenvalue `cos^2 0 = 1` on each diagonal pair spans the
    /// fixed space; every other eigenvalue sets a decay rate.
    pub fn spectrum(&self) -> SpectrumReport {
        let k = self.k();
        let d = self.d();
        let mut slowest = 0.0_f64;
        let mut resonant = Vec::new();
        for n in 1..=d {
            for m in n..=d {
                let diff = (k * (n as f64 - m as f64)).cos().powi(2);
                let sum = (k * (n + m) as f64).cos().powi(2);
                let mut rates = vec![sum, 1.0 - sum];
                if n != m {
                    rates.push(diff);
                    rates.push(1.0 - diff);
                } else {
                    rates.push(1.0 - diff);
                }
                let top = rates.iter().copied().fold(0.0, f64::max);
                if top > 1.0 - RESONANCE_TOL {
                    resonant.push((n, m));
                }
                slowest = slowest.max(top);
            }
        }
        SpectrumReport {
            slowest_rate: slowest,
            spectral_gap: 1.0 - slowest,
            resonant,
        }
    }

    /// Trace distance from `Omega^n(sigma)` to the analytic limit.
    pub fn distance_at(&self, state: &DensityOperator, limit: &DensityOperator, n: usize) -> Result<f64> {
        let s = self.evolve(state, n)?;
        trace_norm_hermitian(&(s.matrix() - limit.matrix()))
    }

    /// Smallest `n <= n_max` with trace distance to the limit at most `tol`, by
    /// bisection on the closed-form evolution. The distance is nonincreasing because
    /// the channel is a contraction fixing the limit.
    pub fn steps_to_converge(&self, state: &DensityOperator, tol: f64, n_max: usize) -> Result<Option<usize>> {
        let limit = self.analytic_limit(state)?;
        if self.distance_at(state, &limit, n_max)? > tol {
            return Ok(None);
        }
        let (mut lo, mut hi) = (0usize, n_max);
        if self.distance_at(state, &limit, 0)? <= tol {
            return Ok(Some(0));
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.distance_at(state, &limit, mid)? <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    }

    /// Smallest `n <= n_max` from which the purity stays within `tol` of every later
    /// value. Purity is nonincreasing under this unital channel and tends to the limit
    /// purity, so the tail oscillation from `n` is `purity(n) - purity(limit)`.
    pub fn purity_cauchy_step(&self, state: &DensityOperator, tol: f64, n_max: usize) -> Result<Option<usize>> {
        let target = purity(&self.analytic_limit(state)?);
        let excess = |n: usize| -> Result<f64> { Ok(purity(&self.evolve(state, n)?) - target) };
        if excess(n_max)? > tol {
            return Ok(None);
        }
        if excess(0)? <= tol {
            return Ok(Some(0));
        }
        let (mut lo, mut hi) = (0usize, n_max);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if excess(mid)? <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    }

    /// Metrics at every step `0..=n_max`, each computed from the closed-form
    /// `Omega^N(sigma)` so rounding does not accumulate.
    pub fn convergence_curve(&self, state: &DensityOperator, n_max: usize) -> Result<LadderCurve> {
        let limit = self.analytic_limit(state)?;
        let e0 = self.energy(state);
        let rows: Vec<(usize, Vec<f64>)> = (0..=n_max)
            .into_par_iter()
            .map(|n| {
                let s = self.evolve(state, n)?;
                let dist = trace_norm_hermitian(&(s.matrix() - limit.matrix()))?;
                Ok((n, vec![dist, self.energy(&s), purity(&s), von_neumann_entropy(&s)]))
            })
            .collect::<Result<_>>()?;
        let dist: Vec<f64> = rows.iter().map(|(_, v)| v[0]).collect();
        let monotone = dist.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let converged_step = dist.iter().position(|&x| x <= CONVERGENCE_TOL);
        let energy_drift = rows.iter().map(|(_, v)| (v[1] - e0).abs()).fold(0.0, f64::max);
        let mut warnings = Vec::new();
        let spec = self.spectrum();
        if !spec.resonant.is_empty() {
            warnings.push(format!(
                "resonant k = {}: {} site pairs keep coherences that do not decay; the analytic limit does not apply",
                self.k(),
                spec.resonant.len()
            ));
        }
        if !monotone {
            warnings.push("trace distance increased between steps".to_string());
        }
        Ok(LadderCurve {
            trace: MetricTrace {
                names: vec!["trace_distance".into(), "energy".into(), "purity".into(), "entropy".into()],
                rows,
            },
            limit_purity: purity(&limit),
            limit_entropy: von_neumann_entropy(&limit),
            limit,
            converged_step,
            monotone,
            energy_drift,
            empirical_rate: empirical_rate(&dist),
            warnings,
        })
    }
}

/// Geometric decay rate over the last factor-10 drop of a positive decreasing curve.
fn empirical_rate(dist: &[f64]) -> Option<f64> {
    let end = dist.len().checked_sub(1)?;
    let last = dist[end];
    if !(last > 1e-300) {
        return None;
    }
    let start = (0..end).rev().find(|&i| dist[i] >= 10.0 * last)?;
    Some((last / dist[start]).powf(1.0 / (end - start) as f64))
}
