//! Position-density tomography from alternating `+ - + - ...` measurement statistics.
//!
//! The probability that `M + 1` alternating measurements all return the same outcome
//! equals the moment `<cos^{2M}(2kx)>` of the position density. Expanding
//! `cos^{2M}` in harmonics `cos(2j theta)` gives a lower-triangular system for the
//! harmonics `<cos(4kjx)>`. These are the cosine-series coefficients of the density
//! extended evenly to `[-pi/4k, pi/4k]` (and set to zero beyond the box).

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boxmodel::BoxConfig;
use crate::error::{Error, Result};
use crate::qcore::{DensityOperator, Pvm};
use crate::quad::simpson;
use crate::sequences::{outcome_probability, OutcomeRecord, Strategy};

/// Estimated or exact moments `<cos^{2M}(2kx)>` for `M = 0..N-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    pub values: Vec<f64>,
    /// Covariance of the estimates; `None` for exact values.
    pub covariance: Option<DMatrix<f64>>,
}

impl MomentSet {
    pub fn exact(values: Vec<f64>) -> Self {
        Self {
            values,
            covariance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stderr(&self) -> Vec<f64> {
        stderr_of(&self.covariance, self.values.len())
    }
}

/// Harmonics `<cos(4kjx)>` for `j = 0..N-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSet {
    pub values: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
    /// Ill-conditioning notes raised during inversion.
    pub warnings: Vec<String>,
}

impl HarmonicSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stderr(&self) -> Vec<f64> {
        stderr_of(&self.covariance, self.values.len())
    }
}

fn stderr_of(cov: &Option<DMatrix<f64>>, n: usize) -> Vec<f64> {
    match cov {
        Some(c) => (0..n).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
        None => vec![0.0; n],
    }
}

/// Where alternating-sequence statistics come from.
pub enum ProbabilitySource<'a> {
    /// Exact Born-rule probabilities. `pvms[0]` is the `+` measurement, `pvms[1]` the `-`.
    Exact {
        state: &'a DensityOperator,
        pvms: &'a [Pvm],
        strategy: Strategy,
    },
    /// Sampled outcome strings.
    Sampled { records: &'a [OutcomeRecord] },
}

fn is_alternating_prefix(seq: &[usize], len: usize) -> bool {
    seq.len() >= len && seq.iter().take(len).enumerate().all(|(t, &x)| x == t % 2)
}

/// Moments `m_M = P(0^{M+1}) + P(1^{M+1})` for `M = 0..n_max-1`.
pub fn moments_from_sequences(source: &ProbabilitySource<'_>, n_max: usize) -> Result<MomentSet> {
    match source {
        ProbabilitySource::Exact { state, pvms, strategy } => {
            let seq = strategy.deterministic_sequence().ok_or(Error::NotAlternating)?;
            if !is_alternating_prefix(&seq, n_max) || pvms.len() < 2 {
                return Err(Error::NotAlternating);
            }
            let values = (0..n_max)
                .map(|m| {
                    let strat = Strategy::Alternating { len: m + 1 };
                    let zeros = vec![0; m + 1];
                    let ones = vec![1; m + 1];
                    Ok(outcome_probability(state, pvms, &strat, &zeros)?
                        + outcome_probability(state, pvms, &strat, &ones)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(MomentSet::exact(values))
        }
        ProbabilitySource::Sampled { records } => {
            let mut hits = vec![0u64; n_max];
            let mut total = 0u64;
            for r in records.iter() {
                if !is_alternating_prefix(&r.pvms, n_max) || r.outcomes.len() < n_max {
                    return Err(Error::NotAlternating);
                }
                total += r.count;
                let first = r.outcomes.first().copied();
                let run = r.outcomes.iter().take(n_max).take_while(|&&a| Some(a) == first).count();
                for h in hits.iter_mut().take(run) {
                    *h += r.count;
                }
            }
            if total == 0 {
                return Err(Error::InvalidConfig("no sampled trajectories".into()));
            }
            let n = total as f64;
            let values: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
            // The events are nested, so E[1_a 1_b] = m_max(a, b).
            let cov = DMatrix::from_fn(n_max, n_max, |a, b| (values[a.max(b)] - values[a] * values[b]) / n);
            Ok(MomentSet {
                values,
                covariance: Some(cov),
            })
        }
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Lower-triangular `B` with `m = B h`, from
/// `cos^{2M} t = 4^{-M} [C(2M, M) + 2 sum_{j=1}^{M} C(2M, M-j) cos(2jt)]`.
pub fn cospower_matrix(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for m in 0..n {
        let scale = 0.25f64.powi(m as i32);
        b[(m, 0)] = scale * binomial(2 * m as u64, m as u64);
        for j in 1..=m {
            b[(m, j)] = 2.0 * scale * binomial(2 * m as u64, (m - j) as u64);
        }
    }
    b
}

/// Moments implied by a set of harmonics (the forward map).
pub fn harmonics_to_moments(harmonics: &[f64]) -> Vec<f64> {
    let b = cospower_matrix(harmonics.len());
    (b * DVector::from_column_slice(harmonics)).iter().copied().collect()
}

/// Inverts the binomial relation by forward substitution and propagates the moment
/// covariance linearly. With `tol` set, harmonics whose propagated standard error
/// exceeds it are reported in `warnings`.
pub fn cospower_to_harmonics(moments: &MomentSet, tol: Option<f64>) -> HarmonicSet {
    let n = moments.len();
    let b = cospower_matrix(n);
    let mut h = vec![0.0; n];
    for m in 0..n {
        let mut acc = moments.values[m];
        for j in 0..m {
            acc -= b[(m, j)] * h[j];
        }
        h[m] = acc / b[(m, m)];
    }
    let mut warnings = Vec::new();
    let covariance = moments.covariance.as_ref().map(|cm| {
        let t = b
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("diagonal entries are 2^{1-2M} > 0");
        &t * cm * t.transpose()
    });
    if let (Some(cov), Some(tol)) = (&covariance, tol) {
        for j in 0..n {
            let se = cov[(j, j)].max(0.0).sqrt();
            if se > tol {
                warnings.push(format!(
                    "harmonic {j}: propagated standard error {se:e} exceeds {tol:e}; inversion amplifies moment noise roughly as (3 + 2 sqrt 2)^j"
                ));
            }
        }
    }
    HarmonicSet {
        values: h,
        covariance,
        warnings,
    }
}

/// Cosine-series coefficient scale for harmonic `j`: `4k/pi` for `j = 0`, else `8k/pi`.
pub fn series_factor(j: usize, k: f64) -> f64 {
    if j == 0 {
        4.0 * k / PI
    } else {
        8.0 * k / PI
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub x: Vec<f64>,
    /// Truncated cosine series.
    pub raw: Vec<f64>,
    /// Negative values clipped to zero, renormalized to unit integral over `[0, L]`.
    pub clipped: Vec<f64>,
    /// Pointwise standard error of `raw`, zero for exact inputs.
    pub stderr: Vec<f64>,
    /// Largest negative excursion of the raw series on `x`; a reconstruction error,
    /// not a property of the state.
    pub negative_excursion: f64,
}

fn series_value(h: &[f64], k: f64, x: f64) -> f64 {
    h.iter()
        .enumerate()
        .map(|(j, v)| series_factor(j, k) * v * (4.0 * k * j as f64 * x).cos())
        .sum()
}

/// `rho_hat(x) = sum_j c_j cos(4kjx)` on the given points.
pub fn reconstruct_density(harmonics: &HarmonicSet, config: &BoxConfig, xs: &[f64]) -> Result<Reconstruction> {
    config.require_tomography_range()?;
    let k = config.k;
    let h = &harmonics.values;
    let raw: Vec<f64> = xs.iter().map(|&x| series_value(h, k, x)).collect();
    let stderr = xs
        .iter()
        .map(|&x| match &harmonics.covariance {
            Some(cov) => {
                let g = DVector::from_fn(h.len(), |j, _| series_factor(j, k) * (4.0 * k * j as f64 * x).cos());
                g.dot(&(cov * &g)).max(0.0).sqrt()
            }
            None => 0.0,
        })
        .collect();
    let mass = simpson(|x| series_value(h, k, x).max(0.0), 0.0, config.length, 4096);
    let clipped = raw
        .iter()
        .map(|v| if mass > 0.0 { v.max(0.0) / mass } else { 0.0 })
        .collect();
    let negative_excursion = raw.iter().fold(0.0_f64, |m, v| m.max(-v));
    Ok(Reconstruction {
        x: xs.to_vec(),
        raw,
        clipped,
        stderr,
        negative_excursion,
    })
}

/// Relative `L^2([0, L])` error of the truncated series against a known density.
pub fn relative_l2_error<F: Fn(f64) -> f64>(harmonics: &[f64], config: &BoxConfig, rho: F) -> f64 {
    let k = config.k;
    let num = simpson(|x| (series_value(harmonics, k, x) - rho(x)).powi(2), 0.0, config.length, 20_000);
    let den = simpson(|x| rho(x).powi(2), 0.0, config.length, 20_000);
    (num / den).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares fit of `ln y = intercept + exponent * ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> DecayFit {
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - exponent * mx;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    DecayFit {
        exponent,
        intercept,
        residual,
    }
}

/// Log-log decay exponent of moment `M` against `M` over `M = 1..N-1` (the `M = 0`
/// moment is always 1 and carries no rate information).
pub fn decay_probe(moments: &MomentSet) -> Result<DecayFit> {
    if moments.len() < 8 {
        return Err(Error::InvalidConfig(format!(
            "decay probe needs at least 8 moments, got {}",
            moments.len()
        )));
    }
    let points: Vec<(f64, f64)> = moments
        .values
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, &v)| (m as f64, v))
        .collect();
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::InvalidConfig("moments must be positive for a log-log fit".into()));
    }
    Ok(fit_power_law(&points))
}

#[derive(Serialize)]
struct ReconstructionRow {
    x: f64,
    rho_exact: Option<f64>,
    rho_reconstructed: f64,
    rho_clipped: f64,
    stderr: f64,
}

/// CSV with columns `x, rho_exact, rho_reconstructed, rho_clipped, stderr`.
pub fn write_reconstruction_csv<W: Write>(rec: &Reconstruction, exact: Option<&dyn Fn(f64) -> f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..rec.x.len() {
        w.serialize(ReconstructionRow {
            x: rec.x[i],
            rho_exact: exact.map(|f| f(rec.x[i])),
            rho_reconstructed: rec.raw[i],
            rho_clipped: rec.clipped[i],
            stderr: rec.stderr[i],
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct CountRow {
    string: String,
    count: u64,
}

/// Reads externally measured outcome-string counts (`string, count`) taken with an
/// alternating strategy. Strings are digit sequences such as `0110`.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<OutcomeRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: CountRow = row?;
        let outcomes = row
            .string
            .chars()
            .map(|ch| {
                ch.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::InvalidConfig(format!("outcome string `{}` is not numeric", row.string)))
            })
            .collect::<Result<Vec<usize>>>()?;
        out.push(OutcomeRecord {
            pvms: (0..outcomes.len()).map(|t| t % 2).collect(),
            outcomes,
            count: row.count,
            probability: None,
        });
    }
    Ok(out)
}
