use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::norm::omega_norm_bound;
use super::words::WordSpace;
use crate::error::{Error, Result};
use crate::linalg::{c, trace, CMatrix, C64, ZERO};
use crate::qcore::{
    build_superoperator, iterate_channel, purity, DensityOperator, MeasurementChannel, Metric, MetricTrace,
    Projector, Pvm,
};

/// Largest word count for which the purity check keeps a dense density matrix.
pub const MAX_PURITY_WORDS: usize = 4096;

/// Slack added to the purity envelope.
pub const ENVELOPE_SLACK: f64 = 1e-9;

/// `{(1 + lambda(g))/2, (1 - lambda(g))/2}` for every generator.
pub fn reflection_pvms(space: &WordSpace) -> Vec<Pvm> {
    (0..space.generators())
        .map(|g| {
            let partner = space.partner(g).clone();
            Pvm::monitored(vec![
                Projector::Reflection {
                    partner: partner.clone(),
                    sign: 1.0,
                },
                Projector::Reflection { partner, sign: -1.0 },
            ])
            .expect("projectors share the word space")
        })
        .collect()
}

/// Each reflection measurement with probability `1/s`.
pub fn reflection_channel(space: &WordSpace) -> MeasurementChannel {
    MeasurementChannel::uniform(reflection_pvms(space)).expect("uniform weights")
}

/// The same channel with dense projectors, as an independent oracle.
pub fn dense_reflection_channel(space: &WordSpace) -> Result<MeasurementChannel> {
    let pvms = reflection_pvms(space)
        .into_iter()
        .map(|p| Pvm::monitored(p.projectors().iter().map(|f| Projector::Dense(f.to_dense())).collect()))
        .collect::<Result<Vec<_>>>()?;
    MeasurementChannel::uniform(pvms)
}

/// Longest word touched by the support of `sigma`.
pub fn support_length(space: &WordSpace, sigma: &DensityOperator) -> usize {
    let m = sigma.matrix();
    (0..space.len())
        .rev()
        .find(|&u| (0..space.len()).any(|v| m[(u, v)] != ZERO))
        .map_or(0, |u| space.length_of(u))
}

#[derive(Clone, Debug)]
pub struct PurityDecay {
    /// Columns `purity`, `envelope`, `trace`.
    pub trace: MetricTrace,
    /// Largest `purity(N) - envelope(N)`; at most [`ENVELOPE_SLACK`] when the envelope
    /// holds.
    pub worst_margin: f64,
    pub envelope_holds: bool,
}

/// Applies the reflection channel `steps` times and compares the purity with
/// `(1/2 + 1/sqrt(s))^{2N} tr(sigma^2)`. The state must stay clear of the boundary:
/// its support may reach length at most `max_len - steps - 1`, so that no step pushes
/// weight out of the space.
pub fn purity_decay_check(space: &WordSpace, sigma: &DensityOperator, steps: usize) -> Result<PurityDecay> {
    if space.len() > MAX_PURITY_WORDS {
        return Err(Error::InvalidConfig(format!(
            "{} words exceed the dense purity limit {MAX_PURITY_WORDS}",
            space.len()
        )));
    }
    sigma.check_dim(space.len())?;
    let support = support_length(space, sigma);
    let limit = space.max_len().checked_sub(steps + 1);
    if limit.is_none_or(|lim| support > lim) {
        return Err(Error::SupportTooClose {
            support,
            limit: limit.unwrap_or(0),
            steps,
        });
    }
    let lambda = omega_norm_bound(space.generators());
    let p0 = purity(sigma);
    let channel = reflection_channel(space);
    let mut step = 0usize;
    let mut metrics = vec![
        Metric::purity(),
        Metric::new("envelope", move |_: &DensityOperator| {
            let v = lambda.powi(2 * step as i32) * p0;
            step += 1;
            Ok(v)
        }),
        Metric::trace(),
    ];
    let (trace, _) = iterate_channel(&channel, sigma, steps, &mut metrics)?;
    drop(metrics);
    let worst_margin = trace
        .rows
        .iter()
        .map(|(_, v)| v[0] - v[1])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PurityDecay {
        trace,
        worst_margin,
        envelope_holds: worst_margin <= ENVELOPE_SLACK,
    })
}

/// Pure state on a random combination of the words of length at most `max_support`.
pub fn random_supported_state(space: &WordSpace, max_support: usize, seed: u64) -> Result<DensityOperator> {
    let n = space.count_up_to(max_support);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = crate::linalg::CVector::zeros(space.len());
    for i in 0..n {
        psi[i] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let norm = psi.norm();
    DensityOperator::pure(&(psi / c(norm)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitalRecord {
    /// `max |Omega(I) - I|`.
    pub identity_defect: f64,
    /// Largest singular value of the superoperator.
    pub norm: f64,
}

/// Checks that a finite-dimensional PVM channel fixes the identity and has
/// superoperator norm one. The norm is the largest singular value, computed
/// independently of the Hermitian structure.
pub fn unital_fixed_point_contrast(channel: &MeasurementChannel) -> Result<UnitalRecord> {
    let d = channel.dim();
    let id = CMatrix::identity(d, d);
    let identity_defect = crate::linalg::max_abs_diff(&channel.apply_matrix(&id)?, &id);
    let sup = build_superoperator(channel)?;
    let sv = sup.matrix().clone().singular_values();
    let norm = sv.iter().copied().fold(0.0, f64::max);
    Ok(UnitalRecord { identity_defect, norm })
}

/// Largest eigenvalue of the (self-adjoint, positive) superoperator of `channel`, by
/// power iteration on operators under the Hilbert-Schmidt inner product.
pub fn channel_norm_power(channel: &MeasurementChannel, iterations: usize, seed: u64) -> Result<(f64, f64)> {
    let d = channel.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = CMatrix::from_fn(d, d, |_, _| c(1.0 + rng.random::<f64>()));
    x = (&x + x.adjoint()) * c(0.5);
    x /= c(x.norm());
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..iterations {
        let y = channel.apply_matrix(&x)?;
        theta = trace(&(x.adjoint() * &y)).re;
        residual = (&y - &x * c(theta)).norm() / theta.abs().max(f64::MIN_POSITIVE);
        if residual < 1e-10 {
            break;
        }
        x = &y / c(y.norm());
    }
    Ok((theta, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::enumerate;
    use crate::linalg::{basis_vector, max_abs_diff, random_projector, vectorize};
    use crate::qcore::Superoperator;

    #[test]
    fn envelope_for_identity_word() {
        let space = enumerate(5, 5).unwrap();
        let sigma = DensityOperator::pure(&basis_vector(space.len(), 0)).unwrap();
        let out = purity_decay_check(&space, &sigma, 2).unwrap();
        let p = out.trace.column("purity").unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(out.envelope_holds, "{}", out.worst_margin);
        assert!((out.trace.column("envelope").unwrap()[2] - 0.947_213_595_5_f64.powi(4)).abs() < 1e-9);
        let tr = out.trace.column("trace").unwrap();
        assert!(tr.iter().all(|t| (t - 1.0).abs() < 1e-13));
        assert!(matches!(
            purity_decay_check(&space, &sigma, 5),
            Err(Error::SupportTooClose { .. })
        ));
    }

    #[test]
    fn structured_and_dense_channels_agree() {
        let space = enumerate(5, 3).unwrap();
        assert!(space.len() <= 256);
        let sigma = random_supported_state(&space, 1, 7).unwrap();
        let fast = reflection_channel(&space).apply_n(&sigma, 2).unwrap();
        let dense = dense_reflection_channel(&space).unwrap().apply_n(&sigma, 2).unwrap();
        assert!(max_abs_diff(fast.matrix(), dense.matrix()) < 1e-12);
    }

    #[test]
    fn superoperator_oracle_on_small_space() {
        let space = enumerate(3, 2).unwrap();
        let sigma = DensityOperator::pure(&basis_vector(space.len(), 0)).unwrap();
        let ch = reflection_channel(&space);
        let sup: Superoperator = build_superoperator(&ch).unwrap();
        let direct = ch.apply_n(&sigma, 1).unwrap();
        let oracle = sup.apply_vec(&vectorize(sigma.matrix()));
        assert!((direct.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>() - oracle.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn finite_channels_are_unital_with_norm_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in [2usize, 5, 8] {
            let p = random_projector(d, d / 2, &mut rng);
            let q = random_projector(d, 1, &mut rng);
            let ch = MeasurementChannel::uniform(vec![
                Pvm::dichotomic(&p, 1e-9).unwrap(),
                Pvm::dichotomic(&q, 1e-9).unwrap(),
            ])
            .unwrap();
            let rec = unital_fixed_point_contrast(&ch).unwrap();
            assert!(rec.identity_defect < 1e-12);
            assert!((rec.norm - 1.0).abs() < 1e-10);
        }
        let rec = unital_fixed_point_contrast(&MeasurementChannel::uniform(vec![Pvm::identity(4)]).unwrap()).unwrap();
        assert!((rec.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_reflection_channel_is_strictly_contractive() {
        let space = enumerate(3, 3).unwrap();
        let ch = reflection_channel(&space);
        let (norm, residual) = channel_norm_power(&ch, 20_000, 9).unwrap();
        assert!(residual < 1e-8, "{residual}");
        let dense = build_superoperator(&ch).unwrap().operator_norm();
        assert!((norm - dense).abs() < 1e-8);
        assert!(norm < 1.0 - 1e-3);
    }
}
