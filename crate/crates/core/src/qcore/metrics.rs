use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, trace_norm_hermitian, CMatrix};
use crate::qcore::{DensityOperator, MeasurementChannel, Projector};

/// `tr(sigma^2)`.
pub fn purity(state: &DensityOperator) -> f64 {
    state.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(state: &DensityOperator) -> f64 {
    hermitian_eigenvalues(state.matrix())
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum()
}

/// Entropy of an explicit spectrum, in bits.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Collision (Renyi-2) entropy `-log2 tr(sigma^2)`, a lower bound on the von Neumann
/// entropy.
pub fn renyi2_entropy(state: &DensityOperator) -> f64 {
    -purity(state).log2()
}

/// `1/2 |a - b|_1`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(0.5 * trace_norm_hermitian(&(a.matrix() - b.matrix()))?)
}

/// Half the trace norm of `a - b` for Hermitian matrices that need not be states.
pub fn trace_distance_matrices(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm_hermitian(&(a - b))?)
}

/// Hilbert-Schmidt norm `sqrt(tr(m^dagger m))`.
pub fn hs_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(sigma P)` for a projector `P`; with `P` onto the first `K + 1` basis vectors
/// this is the mass retained at level `K`.
pub fn tail_mass(state: &DensityOperator, projector: &Projector) -> Result<f64> {
    state.check_dim(projector.dim())?;
    Ok(projector.expectation(state.matrix()).re)
}

/// `tr(sigma P_K)` with `P_K` the projector onto the first `count` basis vectors.
pub fn leading_mass(state: &DensityOperator, count: usize) -> f64 {
    let m = state.matrix();
    (0..count.min(state.dim())).map(|i| m[(i, i)].re).sum()
}

type MetricFn<'a> = Box<dyn FnMut(&DensityOperator) -> std::result::Result<f64, String> + 'a>;

/// A named per-step observable.
pub struct Metric<'a> {
    name: String,
    f: MetricFn<'a>,
}

impl<'a> Metric<'a> {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: FnMut(&DensityOperator) -> std::result::Result<f64, String> + 'a,
    {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }

    pub fn purity() -> Self {
        Self::new("purity", |s| Ok(purity(s)))
    }

    pub fn entropy() -> Self {
        Self::new("entropy", |s| Ok(von_neumann_entropy(s)))
    }

    pub fn trace() -> Self {
        Self::new("trace", |s| Ok(s.trace()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricTrace {
    pub names: Vec<String>,
    /// `(step, values)` with values in `names` order.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl MetricTrace {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|(_, v)| v[idx]).collect())
    }
}

/// Applies the channel `steps` times, evaluating every metric on `Omega^t(sigma)` for
/// `t = 0..=steps`. Only the current state is kept in memory.
pub fn iterate_channel(
    channel: &MeasurementChannel,
    state: &DensityOperator,
    steps: usize,
    metrics: &mut [Metric<'_>],
) -> Result<(MetricTrace, DensityOperator)> {
    state.check_dim(channel.dim())?;
    let names = metrics.iter().map(|m| m.name.clone()).collect();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut current = state.clone();
    for step in 0..=steps {
        if step > 0 {
            current = channel.apply(&current)?;
        }
        let mut values = Vec::with_capacity(metrics.len());
        for m in metrics.iter_mut() {
            let v = (m.f)(&current).map_err(|message| Error::Observer {
                name: m.name.clone(),
                step,
                message,
            })?;
            values.push(v);
        }
        rows.push((step, values));
    }
    Ok((MetricTrace { names, rows }, current))
}
