use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqmeas::boxmodel::{
    build_f_projectors, heat_vision_channel, kernel_evolve, measured_energy, phi_bound_sq, predicted_energy,
    spin_one, spin_zero, BoxRepresentation, Representation,
};
use seqmeas::finitedim::{
    invariant_state, jordan_blocks, limit_state, saturation_demo, two_projector_channel, JordanBlock,
    SATURATION_TOL,
};
use seqmeas::freegroup::{
    dense_reflection_channel, enumerate, generator_sum_bound, generator_sum_norm, omega_norm_bound,
    omega_norm_from_generator_norm, purity_decay_check, random_supported_state, reflection_channel, Word,
    ENVELOPE_SLACK, MAX_PURITY_WORDS,
};
use seqmeas::ladder::{Ladder, CONVERGENCE_TOL, PURITY_CAUCHY_TOL};
use seqmeas::linalg::{
    basis_vector, c, hermitian_eigenvalues, max_abs_diff, random_density_matrix, random_projector, CVector,
};
use seqmeas::qcore::{purity, trace_distance_matrices, von_neumann_entropy, DensityOperator};
use seqmeas::sequences::{sample_trajectories, write_histogram_csv, Strategy};
use seqmeas::tomography::{
    cospower_to_harmonics, moments_from_sequences, read_counts_csv, reconstruct_density, relative_l2_error,
    write_reconstruction_csv, ProbabilitySource,
};

use crate::config::{
    BoxHeatVisionParams, FinitedimParams, FreegroupNormParams, FreegroupPurityParams, FreegroupState, LadderParams,
    LadderState, TomographyParams, TomographyState,
};
use crate::output::{fmt_f64, Check, Outputs};
use crate::CliError;

fn model(module: &'static str) -> impl Fn(seqmeas::Error) -> CliError {
    move |source| CliError::Model { module, source }
}

fn at_step(module: &'static str, step: usize) -> impl Fn(seqmeas::Error) -> CliError {
    move |e| CliError::Invariant {
        module,
        step,
        message: e.to_string(),
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn box_heat_vision(p: &BoxHeatVisionParams, verify: bool, out: &mut Outputs) -> Result<(), CliError> {
    let rep = BoxRepresentation::new(p.model.clone())
        .map_err(model("boxmodel"))?
        .with_verification(verify);
    let cfg = rep.config().clone();
    let sigma0 = rep.mode_state(p.mode, p.spin.spinor()).map_err(model("boxmodel"))?;
    let e0 = measured_energy(&rep, &sigma0).map_err(model("boxmodel"))?.energy;
    let channel = match rep.kind() {
        Representation::Energy => Some(heat_vision_channel(&rep).map_err(model("boxmodel"))?),
        Representation::Grid => None,
    };
    if let Some(ch) = &channel {
        let defect = ch.pvms().iter().map(|p| p.idempotency_defect()).fold(0.0, f64::max);
        out.result("projector_idempotency_defect", defect);
        out.warn(format!(
            "energy representation: truncated projectors have idempotency defect {defect:e}"
        ));
    }
    let mut w = out.csv("trace.csv")?;
    w.write_record([
        "step",
        "energy",
        "predicted_energy",
        "purity",
        "phi_bound_sq",
        "entropy",
        "tail_mass_K16",
    ])?;
    let mut state = sigma0.clone();
    let (mut energies, mut purities, mut phis) = (Vec::new(), Vec::new(), Vec::new());
    let mut flagged = false;
    let mut entropy_ok = true;
    let mut max_top = 0.0_f64;
    for n in 0..=p.steps {
        if n > 0 {
            state = match &channel {
                Some(ch) => ch.apply(&state).map_err(at_step("boxmodel", n))?,
                None => kernel_evolve(&rep, &sigma0, n).map_err(at_step("boxmodel", n))?,
            };
        }
        let reading = measured_energy(&rep, &state).map_err(model("boxmodel"))?;
        let pops = rep.mode_populations(&state).map_err(model("boxmodel"))?;
        let tail = pops.iter().skip(16).sum::<f64>() + reading.missing_population.max(0.0);
        let pur = purity(&state);
        let ent = von_neumann_entropy(&state);
        let phi = phi_bound_sq(n, &cfg);
        entropy_ok &= ent >= -pur.log2() - 1e-9;
        flagged |= reading.truncation_flag;
        max_top = max_top.max(reading.top_decile_population);
        w.write_record([
            n.to_string(),
            fmt_f64(reading.energy),
            fmt_f64(predicted_energy(e0, n, &cfg)),
            fmt_f64(pur),
            fmt_f64(phi),
            fmt_f64(ent),
            fmt_f64(tail),
        ])?;
        energies.push(reading.energy);
        purities.push(pur);
        phis.push(phi);
    }
    w.flush()?;
    let expected = cfg.k * cfg.k / cfg.mass;
    if p.steps >= 2 {
        let xs: Vec<f64> = (1..=p.steps).map(|n| n as f64).collect();
        let slope = ls_slope(&xs, &energies[1..]);
        out.result("energy_slope", slope);
        out.check(Check::at_most("energy_slope_relative_error", ((slope - expected) / expected).abs(), 0.01));
    }
    out.result("initial_energy", e0);
    out.result("max_top_decile_population", max_top);
    out.check(Check::holds("truncation_flag_off", !flagged));
    out.check(Check::holds(
        "purity_nonincreasing",
        purities.windows(2).all(|w| w[1] <= w[0] + 1e-12),
    ));
    out.check(Check::holds("entropy_at_least_minus_log2_purity", entropy_ok));
    if matches!(p.spin, crate::config::Spin::PlusI | crate::config::Spin::MinusI) {
        let excess = purities.iter().zip(&phis).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        out.check(Check::at_most("purity_minus_phi_bound_sq", excess, 1e-12));
    }
    if flagged {
        out.warn("top decile of kept modes exceeded the truncation threshold; energies are unreliable");
    }
    Ok(())
}

pub fn tomography(p: &TomographyParams, seed: u64, verify: bool, out: &mut Outputs) -> Result<(), CliError> {
    if p.model.representation != Representation::Grid {
        return Err(CliError::Schema(
            "tomography.model.representation: tomography runs on the grid representation".into(),
        ));
    }
    p.model.require_tomography_range().map_err(model("tomography"))?;
    let rep = BoxRepresentation::new(p.model.clone())
        .map_err(model("boxmodel"))?
        .with_verification(verify);
    let cfg = rep.config().clone();
    let lattice = rep.lattice().map_err(model("boxmodel"))?;
    let parts = match p.state {
        TomographyState::Product => vec![(rep.mode_amplitudes(p.mode), p.spin.spinor())],
        TomographyState::Correlated => vec![
            (rep.mode_amplitudes(p.mode), spin_zero()),
            (rep.mode_amplitudes(p.mode + 1), spin_one()),
        ],
    };
    let psi = rep.entangled_vector(&parts).map_err(model("boxmodel"))?;
    let sigma = DensityOperator::pure(&psi).map_err(model("boxmodel"))?;
    let (plus, minus) = build_f_projectors(&rep).map_err(model("boxmodel"))?;
    let pvms = [plus, minus];
    let strategy = Strategy::Alternating { len: p.moments };
    let exact = moments_from_sequences(
        &ProbabilitySource::Exact {
            state: &sigma,
            pvms: &pvms,
            strategy: strategy.clone(),
        },
        p.moments,
    )
    .map_err(model("tomography"))?;
    let pops = lattice.position_populations(&sigma);
    let xs = lattice.positions().to_vec();
    let k = cfg.k;
    let direct: Vec<f64> = (0..p.moments)
        .map(|m| {
            pops.iter()
                .zip(&xs)
                .map(|(w, x)| w * (2.0 * k * x).cos().powi(2 * m as i32))
                .sum()
        })
        .collect();
    let identity_err = exact
        .values
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.check(Check::at_most("moment_identity_max_error", identity_err, 1e-8));

    let records = if let Some(path) = &p.counts_csv {
        let f = std::fs::File::open(path)?;
        Some(read_counts_csv(f).map_err(model("tomography"))?)
    } else if p.n_traj > 0 {
        Some(sample_trajectories(&sigma, &pvms, &strategy, p.n_traj, seed).map_err(model("sequences"))?)
    } else {
        None
    };
    let moments = match &records {
        Some(recs) => {
            if p.counts_csv.is_none() {
                write_histogram_csv(recs, out.file("histogram.csv")?).map_err(model("sequences"))?;
            }
            let m = moments_from_sequences(&ProbabilitySource::Sampled { records: recs }, p.moments)
                .map_err(model("tomography"))?;
            let se = m.stderr();
            let worst_z = m
                .values
                .iter()
                .zip(&exact.values)
                .zip(&se)
                .map(|((a, b), s)| if *s > 0.0 { (a - b).abs() / s } else { (a - b).abs() * 1e12 })
                .fold(0.0, f64::max);
            out.check(Check::at_most("sampled_moments_max_z", worst_z, 4.0));
            m
        }
        None => exact.clone(),
    };
    let harmonics = cospower_to_harmonics(&moments, Some(p.harmonic_tolerance));
    for wmsg in &harmonics.warnings {
        out.warn(wmsg.clone());
    }
    let mse = moments.stderr();
    let mut w = out.csv("moments.csv")?;
    w.write_record(["M", "moment", "stderr", "exact", "direct"])?;
    for m in 0..p.moments {
        w.write_record([
            m.to_string(),
            fmt_f64(moments.values[m]),
            fmt_f64(mse[m]),
            fmt_f64(exact.values[m]),
            fmt_f64(direct[m]),
        ])?;
    }
    w.flush()?;
    let hse = harmonics.stderr();
    let mut w = out.csv("harmonics.csv")?;
    w.write_record(["j", "harmonic", "stderr", "direct"])?;
    for j in 0..harmonics.len() {
        let d: f64 = pops
            .iter()
            .zip(&xs)
            .map(|(wt, x)| wt * (4.0 * k * j as f64 * x).cos())
            .sum();
        w.write_record([j.to_string(), fmt_f64(harmonics.values[j]), fmt_f64(hse[j]), fmt_f64(d)])?;
    }
    w.flush()?;

    let l = cfg.length;
    let n1 = p.mode as f64;
    let mode_density = move |n: f64, x: f64| 2.0 / l * (n * std::f64::consts::PI * x / l).sin().powi(2);
    let state_kind = p.state;
    let rho = move |x: f64| match state_kind {
        TomographyState::Product => mode_density(n1, x),
        TomographyState::Correlated => 0.5 * (mode_density(n1, x) + mode_density(n1 + 1.0, x)),
    };
    let rel = relative_l2_error(&harmonics.values, &cfg, rho);
    out.result("relative_l2_error", rel);
    if records.is_none() {
        out.check(Check::at_most("relative_l2_error", rel, p.l2_tolerance));
    }
    let pts: Vec<f64> = (0..p.points).map(|i| l * i as f64 / (p.points - 1) as f64).collect();
    let rec = reconstruct_density(&harmonics, &cfg, &pts).map_err(model("tomography"))?;
    out.result("negative_excursion", rec.negative_excursion);
    write_reconstruction_csv(&rec, Some(&rho), out.file("reconstruction.csv")?).map_err(model("tomography"))?;
    Ok(())
}

pub fn finitedim(p: &FinitedimParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pm = random_projector(p.dim, p.rank_p, &mut rng);
    let qm = random_projector(p.dim, p.rank_q, &mut rng);
    let sigma = DensityOperator::new(random_density_matrix(p.dim, &mut rng)).map_err(model("finitedim"))?;
    let blocks = jordan_blocks(&pm, &qm).map_err(model("finitedim"))?;
    out.check(Check::at_most("jordan_reconstruction_error", blocks.p_error.max(blocks.q_error), 1e-9));
    let mut w = out.csv("blocks.csv")?;
    w.write_record(["index", "kind", "angle", "p", "q"])?;
    for b in &blocks.blocks {
        match *b {
            JordanBlock::Pair { index, angle } => {
                w.write_record([index.to_string(), "pair".into(), fmt_f64(angle), String::new(), String::new()])?
            }
            JordanBlock::Single { index, p, q } => w.write_record([
                index.to_string(),
                "single".into(),
                String::new(),
                p.to_string(),
                q.to_string(),
            ])?,
        }
    }
    w.flush()?;
    let mut cos2: Vec<f64> = blocks.angles().iter().map(|a| a.cos().powi(2)).collect();
    cos2.sort_by(f64::total_cmp);
    let mut brute: Vec<f64> = hermitian_eigenvalues(&(&pm * &qm * &pm))
        .into_iter()
        .filter(|v| *v > 1e-9 && *v < 1.0 - 1e-9)
        .collect();
    brute.sort_by(f64::total_cmp);
    let spectral = if cos2.len() == brute.len() {
        cos2.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    out.check(Check::at_most("jordan_vs_pqp_spectrum", spectral, 1e-9));

    let report = saturation_demo(&pm, &qm, &sigma, p.steps, p.weights).map_err(model("finitedim"))?;
    out.write_trace("trace.csv", &report.trace, &[])?;
    let dist = report.trace.column("trace_distance").expect("present");
    out.check(Check::holds("saturates", report.n0.is_some()));
    if let Some(n0) = report.n0 {
        out.result("n0", n0 as u64);
        out.check(Check::at_most(
            "distance_after_n0",
            dist[n0..].iter().copied().fold(0.0, f64::max),
            SATURATION_TOL,
        ));
    }
    out.result("fixed_space_rank", report.fixed_rank as u64);
    let pur = report.trace.column("purity").expect("present");
    let tail_from = pur.len() - pur.len().div_ceil(10);
    let last = pur[pur.len() - 1];
    out.check(Check::at_most(
        "purity_cauchy_tail",
        pur[tail_from..].iter().map(|v| (v - last).abs()).fold(0.0, f64::max),
        1e-10,
    ));
    let a = limit_state(&pm, &qm, &sigma, p.weights).map_err(model("finitedim"))?;
    let b = limit_state(&pm, &qm, &sigma, p.alt_weights).map_err(model("finitedim"))?;
    out.check(Check::at_most(
        "limit_weight_invariance",
        trace_distance_matrices(&a, &b).map_err(model("finitedim"))?,
        1e-8,
    ));
    match invariant_state(&pm, &qm, &blocks, 0) {
        Ok(inv) => {
            let ch = two_projector_channel(&pm, &qm, p.weights).map_err(model("finitedim"))?;
            let after = ch.apply_n(&inv.state, 100).map_err(model("finitedim"))?;
            out.check(Check::at_most(
                "invariant_state_drift_100_steps",
                max_abs_diff(after.matrix(), inv.state.matrix()),
                1e-12,
            ));
            out.check(Check::at_most(
                "invariant_state_entropy_error",
                (von_neumann_entropy(&inv.state) - 1.0).abs(),
                1e-12,
            ));
            if inv.fallback {
                out.warn("projectors commute: invariant state built from two common eigenvectors");
            }
        }
        Err(e) => out.warn(format!("no invariant entropy-1 state: {e}")),
    }
    Ok(())
}

pub fn ladder(p: &LadderParams, verify: bool, out: &mut Outputs) -> Result<(), CliError> {
    let lad = Ladder::new(p.d, p.k).map_err(model("ladder"))?;
    let mut psi = CVector::zeros(lad.dim());
    match p.state {
        LadderState::Uniform => {
            for n in 0..p.d {
                psi[2 * n] = c(1.0);
            }
        }
        LadderState::Localized => psi[2 * (p.site - 1)] = c(1.0),
    }
    let sigma = DensityOperator::pure(&psi).map_err(model("ladder"))?;
    let converged = lad
        .steps_to_converge(&sigma, CONVERGENCE_TOL, p.max_steps)
        .map_err(model("ladder"))?;
    let cauchy = lad
        .purity_cauchy_step(&sigma, PURITY_CAUCHY_TOL, p.max_steps)
        .map_err(model("ladder"))?;
    let steps = if p.steps == 0 { converged.unwrap_or(p.max_steps) } else { p.steps };
    if verify {
        let n = steps.min(64);
        lad.lattice()
            .evolve_verified(&sigma, n, 1e-10)
            .map_err(at_step("ladder", n))?;
    }
    let curve = lad.convergence_curve(&sigma, steps).map_err(model("ladder"))?;
    out.write_trace("trace.csv", &curve.trace, &[])?;
    let spec = lad.spectrum();
    out.result("spectral_gap", spec.spectral_gap);
    out.result("slowest_rate", spec.slowest_rate);
    if let Some(r) = curve.empirical_rate {
        out.result("empirical_rate", r);
    }
    out.result("limit_purity", curve.limit_purity);
    out.result("limit_entropy", curve.limit_entropy);
    if let Some(n) = converged {
        out.result("converged_step", n as u64);
    }
    if let Some(n) = cauchy {
        out.result("purity_cauchy_step", n as u64);
    }
    out.check(Check::holds("trace_distance_monotone", curve.monotone));
    out.check(Check::at_most("energy_drift", curve.energy_drift, 1e-12));
    out.check(Check::holds("converges_within_max_steps", converged.is_some()));
    out.check(Check::holds("purity_cauchy_tail_reached", cauchy.is_some()));
    for wmsg in curve.warnings {
        out.warn(wmsg);
    }
    Ok(())
}

pub fn freegroup_norm(p: &FreegroupNormParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for l in p.min_len..=p.max_len {
        let start = Instant::now();
        let space = enumerate(p.s, l).map_err(model("freegroup"))?;
        let est = generator_sum_norm(&space, p.iterations, seed).map_err(at_step("freegroup", l))?;
        timings.push((l, start.elapsed().as_secs_f64() * 1e3));
        rows.push((l, space.len(), est));
    }
    let mut w = out.csv("norms.csv")?;
    w.write_record([
        "s",
        "max_len",
        "word_count",
        "norm_estimate",
        "analytic_bound",
        "omega_estimate",
        "omega_bound",
        "residual",
        "iterations",
    ])?;
    for (l, count, est) in &rows {
        w.write_record([
            p.s.to_string(),
            l.to_string(),
            count.to_string(),
            fmt_f64(est.estimate),
            fmt_f64(generator_sum_bound(p.s)),
            fmt_f64(omega_norm_from_generator_norm(p.s, est.estimate)),
            fmt_f64(omega_norm_bound(p.s)),
            fmt_f64(est.residual),
            est.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = out.csv("timings.csv")?;
    w.write_record(["max_len", "wall_time_ms"])?;
    for (l, ms) in &timings {
        w.write_record([l.to_string(), fmt_f64(*ms)])?;
    }
    w.flush()?;
    let ests: Vec<f64> = rows.iter().map(|r| r.2.estimate).collect();
    out.check(Check::holds("nondecreasing_in_length", ests.windows(2).all(|w| w[1] >= w[0])));
    let top = ests.last().copied().unwrap_or(0.0);
    out.check(Check::at_most("estimate_minus_2sqrt_s", top - generator_sum_bound(p.s), 1e-9));
    let worst_res = rows.iter().map(|r| r.2.residual).fold(0.0, f64::max);
    out.check(Check::at_most("max_residual", worst_res, 1e-8));
    if p.s >= 5 {
        out.check(Check::at_most(
            "omega_estimate_minus_bound",
            omega_norm_from_generator_norm(p.s, top) - omega_norm_bound(p.s),
            1e-9,
        ));
    }
    out.result("norm_estimate", top);
    out.result("word_count", rows.last().map_or(0, |r| r.1) as u64);
    Ok(())
}

pub fn freegroup_purity(p: &FreegroupPurityParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let space = enumerate(p.s, p.max_len).map_err(model("freegroup"))?;
    if space.len() > MAX_PURITY_WORDS {
        return Err(CliError::Schema(format!(
            "freegroup_purity: {} words exceed the dense limit {MAX_PURITY_WORDS}",
            space.len()
        )));
    }
    let sigma = match p.state {
        FreegroupState::Identity => {
            DensityOperator::pure(&basis_vector(space.len(), space.index_of(Word::IDENTITY).expect("identity word")))
        }
        FreegroupState::Random => random_supported_state(&space, p.support, seed),
    }
    .map_err(model("freegroup"))?;
    let res = purity_decay_check(&space, &sigma, p.steps).map_err(model("freegroup"))?;
    out.write_trace("purity.csv", &res.trace, &[])?;
    out.check(Check::at_most("purity_minus_envelope", res.worst_margin, ENVELOPE_SLACK));
    let tr = res.trace.column("trace").expect("present");
    out.check(Check::at_most(
        "trace_error",
        tr.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max),
        1e-12,
    ));
    if space.len() <= 256 {
        let fast = reflection_channel(&space);
        let dense = dense_reflection_channel(&space).map_err(model("freegroup"))?;
        let mut a = sigma.clone();
        let mut b = sigma.clone();
        let mut worst = 0.0_f64;
        for n in 1..=p.steps {
            a = fast.apply(&a).map_err(at_step("freegroup", n))?;
            b = dense.apply(&b).map_err(at_step("freegroup", n))?;
            worst = worst.max((purity(&a) - purity(&b)).abs());
        }
        out.check(Check::at_most("dense_oracle_purity_difference", worst, 1e-10));
    }
    out.result("word_count", space.len() as u64);
    Ok(())
}
