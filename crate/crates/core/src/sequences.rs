//! Measurement strategies, exact outcome-string probabilities, post-measurement states
//! and seeded Monte-Carlo sampling of outcome strings.
//!
//! # Seeding
//!
//! Trajectory `i` of a run with master seed `s` draws from a `ChaCha8Rng` seeded with
//! [`trajectory_seed`]`(s, i)`, a SplitMix64 finalizer applied to
//! `s ^ (i + 1) * 0x9E3779B97F4A7C15`. Results therefore do not depend on thread count
//! or scheduling.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::qcore::{DensityOperator, Projector, Pvm};

/// Branches below this probability are treated as unreachable.
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Trajectories handled per parallel work item.
const SAMPLE_CHUNK: usize = 1024;

/// Which PVM is performed at each step.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// An explicit list of PVM indices.
    Fixed(Vec<usize>),
    /// PVMs `0, 1, 0, 1, ...` for `len` steps.
    Alternating { len: usize },
    /// PVM `x` chosen independently at every step with probability `weights[x]`.
    Iid { weights: Vec<f64>, len: usize },
}

impl Strategy {
    pub fn len(&self) -> usize {
        match self {
            Strategy::Fixed(v) => v.len(),
            Strategy::Alternating { len } | Strategy::Iid { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The PVM sequence when it does not depend on chance.
    pub fn deterministic_sequence(&self) -> Option<Vec<usize>> {
        match self {
            Strategy::Fixed(v) => Some(v.clone()),
            Strategy::Alternating { len } => Some((0..*len).map(|t| t % 2).collect()),
            Strategy::Iid { .. } => None,
        }
    }

    pub fn validate(&self, available: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMeasurement(msg));
        match self {
            Strategy::Fixed(v) => {
                if let Some(i) = v.iter().find(|&&i| i >= available) {
                    return bad(format!("PVM index {i} out of range ({available} available)"));
                }
            }
            Strategy::Alternating { .. } => {
                if available < 2 {
                    return bad("alternating strategy needs two PVMs".into());
                }
            }
            Strategy::Iid { weights, .. } => {
                if weights.len() != available {
                    return bad(format!("{} weights for {available} PVMs", weights.len()));
                }
                if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return bad("iid weights must be strictly positive".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("iid weights sum to {total}"));
                }
            }
        }
        Ok(())
    }
}

/// An outcome string together with the PVMs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub pvms: Vec<usize>,
    pub outcomes: Vec<usize>,
    pub count: u64,
    /// Exact probability when it is known.
    pub probability: Option<f64>,
}

impl OutcomeRecord {
    pub fn outcome_string(&self) -> String {
        digits(&self.outcomes)
    }
}

fn digits(v: &[usize]) -> String {
    v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(if v.iter().any(|&d| d > 9) { "." } else { "" })
}

/// The block size when every projector of every listed PVM is a rank-one block
/// projector with the same block size.
fn common_block(pvms: &[&Pvm]) -> Option<usize> {
    let mut size = None;
    for pvm in pvms {
        for p in pvm.projectors() {
            match p {
                Projector::RankOneBlocks { block, .. } if size.is_none_or(|s| s == *block) => size = Some(*block),
                _ => return None,
            }
        }
    }
    size
}

fn block_vector(p: &Projector, blk: usize) -> nalgebra::DVectorView<'_, C64> {
    match p {
        Projector::RankOneBlocks { vectors, .. } => vectors.column(blk),
        _ => unreachable!("checked by common_block"),
    }
}

/// Diagonal block `blk` of size `b`.
fn diagonal_block(m: &CMatrix, blk: usize, b: usize) -> CMatrix {
    m.view((blk * b, blk * b), (b, b)).into_owned()
}

/// `P(a_1 ... a_N) = tr(F_{a_N} ... F_{a_1} sigma F_{a_1} ... F_{a_N})` for the PVM
/// sequence `pvm_seq`.
///
/// When every projector is block diagonal with rank-one blocks, the probability is a
/// sum over blocks of scalar products, costing `O(blocks * N)`.
pub fn sequence_probability(state: &DensityOperator, pvms: &[Pvm], pvm_seq: &[usize], outcomes: &[usize]) -> Result<f64> {
    if pvm_seq.len() != outcomes.len() {
        return Err(Error::InvalidMeasurement(format!(
            "{} PVMs but {} outcomes",
            pvm_seq.len(),
            outcomes.len()
        )));
    }
    let mut steps = Vec::with_capacity(pvm_seq.len());
    for (&x, &a) in pvm_seq.iter().zip(outcomes) {
        let pvm = pvms
            .get(x)
            .ok_or_else(|| Error::InvalidMeasurement(format!("PVM index {x} out of range")))?;
        state.check_dim(pvm.dim())?;
        let p = pvm
            .projectors()
            .get(a)
            .ok_or_else(|| Error::InvalidMeasurement(format!("outcome {a} out of range")))?;
        steps.push((pvm, p));
    }
    if steps.is_empty() {
        return Ok(state.trace());
    }
    let used: Vec<&Pvm> = steps.iter().map(|(pvm, _)| *pvm).collect();
    if let Some(b) = common_block(&used) {
        let blocks = state.dim() / b;
        let m = state.matrix();
        let total: f64 = (0..blocks)
            .map(|blk| {
                let rho = diagonal_block(m, blk, b);
                let v0 = block_vector(steps[0].1, blk);
                let mut p = (v0.adjoint() * &rho * v0)[(0, 0)].re;
                let mut prev = v0;
                for (_, proj) in &steps[1..] {
                    let v = block_vector(proj, blk);
                    p *= v.dotc(&prev).norm_sqr();
                    prev = v;
                }
                p
            })
            .sum();
        return Ok(total);
    }
    let mut sigma = state.matrix().clone();
    for (_, p) in &steps {
        sigma = p.sandwich(&sigma);
    }
    Ok(crate::linalg::trace(&sigma).re)
}

/// [`sequence_probability`] for a strategy whose PVM sequence is deterministic.
pub fn outcome_probability(state: &DensityOperator, pvms: &[Pvm], strategy: &Strategy, outcomes: &[usize]) -> Result<f64> {
    strategy.validate(pvms.len())?;
    let seq = strategy.deterministic_sequence().ok_or_else(|| {
        Error::InvalidMeasurement("exact probabilities need a fixed or alternating strategy".into())
    })?;
    if outcomes.len() != seq.len() {
        return Err(Error::InvalidMeasurement(format!(
            "strategy has {} steps but {} outcomes were given",
            seq.len(),
            outcomes.len()
        )));
    }
    sequence_probability(state, pvms, &seq, outcomes)
}

/// Exact probabilities of every outcome string of a deterministic strategy, in
/// lexicographic order of the outcome strings.
pub fn enumerate_outcomes(state: &DensityOperator, pvms: &[Pvm], strategy: &Strategy) -> Result<Vec<OutcomeRecord>> {
    strategy.validate(pvms.len())?;
    let seq = strategy
        .deterministic_sequence()
        .ok_or_else(|| Error::InvalidMeasurement("enumeration needs a deterministic strategy".into()))?;
    let radices: Vec<usize> = seq.iter().map(|&x| pvms[x].projectors().len()).collect();
    let total: usize = radices.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; seq.len()];
    for _ in 0..total {
        let p = sequence_probability(state, pvms, &seq, &digits)?;
        out.push(OutcomeRecord {
            pvms: seq.clone(),
            outcomes: digits.clone(),
            count: 0,
            probability: Some(p),
        });
        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            if digits[pos] < radices[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(out)
}

/// `F sigma F / tr(F sigma F)` and the outcome probability.
pub fn posterior_state(state: &DensityOperator, pvm: &Pvm, outcome: usize) -> Result<(DensityOperator, f64)> {
    state.check_dim(pvm.dim())?;
    let f = pvm
        .projectors()
        .get(outcome)
        .ok_or_else(|| Error::InvalidMeasurement(format!("outcome {outcome} out of range")))?;
    let post = f.sandwich(state.matrix());
    let p = crate::linalg::trace(&post).re;
    if !(p > PROBABILITY_FLOOR) {
        return Err(Error::ZeroProbability(p));
    }
    Ok((DensityOperator::from_trusted(post / crate::linalg::c(p)), p))
}

/// Per-trajectory seed: a SplitMix64 finalizer of `master ^ (index + 1) * golden`.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type Histogram = BTreeMap<(Vec<usize>, Vec<usize>), u64>;

enum Sampler<'a> {
    /// Sample the block from its weight, then the outcome chain on that block alone.
    Blocks {
        which: WeightedIndex<f64>,
        blocks: Vec<CMatrix>,
    },
    Dense(&'a DensityOperator),
}

fn pick<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    // Rounding left `u` past the end: take the last reachable outcome.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn run_trajectory<R: Rng>(sampler: &Sampler<'_>, pvms: &[Pvm], seq: &[usize], rng: &mut R) -> Vec<usize> {
    let mut outcomes = Vec::with_capacity(seq.len());
    match sampler {
        Sampler::Blocks { which, blocks } => {
            let blk = which.sample(rng);
            let mut rho = blocks[blk].clone();
            for &x in seq {
                let probs: Vec<f64> = pvms[x]
                    .projectors()
                    .iter()
                    .map(|p| {
                        let v = block_vector(p, blk);
                        (v.adjoint() * &rho * v)[(0, 0)].re.max(0.0)
                    })
                    .collect();
                let a = pick(&probs, rng);
                let v = block_vector(&pvms[x].projectors()[a], blk).into_owned();
                // After a rank-one outcome the block state is exactly v v^dagger.
                rho = &v * v.adjoint();
                outcomes.push(a);
            }
        }
        Sampler::Dense(state) => {
            let mut sigma = state.matrix().clone();
            for &x in seq {
                let probs: Vec<f64> = pvms[x]
                    .projectors()
                    .iter()
                    .map(|p| p.expectation(&sigma).re.max(0.0))
                    .collect();
                let a = pick(&probs, rng);
                let post = pvms[x].projectors()[a].sandwich(&sigma);
                let p = crate::linalg::trace(&post).re.max(PROBABILITY_FLOOR);
                sigma = post / crate::linalg::c(p);
                outcomes.push(a);
            }
        }
    }
    outcomes
}

/// Samples `n_traj` outcome strings. Records are returned sorted by
/// `(pvms, outcomes)`; exact probabilities are attached for deterministic strategies.
pub fn sample_trajectories(
    state: &DensityOperator,
    pvms: &[Pvm],
    strategy: &Strategy,
    n_traj: u64,
    master_seed: u64,
) -> Result<Vec<OutcomeRecord>> {
    strategy.validate(pvms.len())?;
    for pvm in pvms {
        state.check_dim(pvm.dim())?;
    }
    let all: Vec<&Pvm> = pvms.iter().collect();
    let sampler = match common_block(&all) {
        Some(size) => {
            let blocks: Vec<CMatrix> = (0..state.dim() / size)
                .map(|blk| diagonal_block(state.matrix(), blk, size))
                .collect();
            let weights: Vec<f64> = blocks.iter().map(|b| crate::linalg::trace(b).re.max(0.0)).collect();
            let which = WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidState(format!("block weights: {e}")))?;
            Sampler::Blocks { which, blocks }
        }
        None => Sampler::Dense(state),
    };
    let fixed = strategy.deterministic_sequence();
    let iid = match strategy {
        Strategy::Iid { weights, .. } => {
            Some(WeightedIndex::new(weights).map_err(|e| Error::InvalidMeasurement(format!("iid weights: {e}")))?)
        }
        _ => None,
    };
    let len = strategy.len();
    let chunks = n_traj.div_ceil(SAMPLE_CHUNK as u64);
    let partial: Vec<Histogram> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut hist = Histogram::new();
            let start = chunk * SAMPLE_CHUNK as u64;
            let end = (start + SAMPLE_CHUNK as u64).min(n_traj);
            for i in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(master_seed, i));
                let seq = match (&fixed, &iid) {
                    (Some(s), _) => s.clone(),
                    (None, Some(w)) => (0..len).map(|_| w.sample(&mut rng)).collect(),
                    (None, None) => unreachable!("strategy is deterministic or iid"),
                };
                let outcomes = run_trajectory(&sampler, pvms, &seq, &mut rng);
                *hist.entry((seq, outcomes)).or_insert(0) += 1;
            }
            hist
        })
        .collect();
    let mut merged = Histogram::new();
    for hist in partial {
        for (key, n) in hist {
            *merged.entry(key).or_insert(0) += n;
        }
    }
    merged
        .into_iter()
        .map(|((seq, outcomes), count)| {
            let probability = match &fixed {
                Some(_) => Some(sequence_probability(state, pvms, &seq, &outcomes)?),
                None => None,
            };
            Ok(OutcomeRecord {
                pvms: seq,
                outcomes,
                count,
                probability,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    string: &'a str,
    pvms: &'a str,
    count: u64,
    exact_probability: Option<f64>,
}

/// Writes records as CSV with columns `string, pvms, count, exact_probability`.
pub fn write_histogram_csv<W: Write>(records: &[OutcomeRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        let s = r.outcome_string();
        let p = digits(&r.pvms);
        w.serialize(HistogramRow {
            string: &s,
            pvms: &p,
            count: r.count,
            exact_probability: r.probability,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// `tr(sigma_blk)` for each diagonal block: the block occupation a block-diagonal PVM
/// sequence can never change.
pub fn block_weights(state: &DensityOperator, block: usize) -> Vec<f64> {
    let m = state.matrix();
    (0..state.dim() / block)
        .map(|blk| (0..block).map(|a| m[(blk * block + a, blk * block + a)].re).sum())
        .collect()
}
