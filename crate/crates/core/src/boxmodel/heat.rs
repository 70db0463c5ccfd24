use crate::boxmodel::config::BoxConfig;
use crate::boxmodel::repr::BoxRepresentation;
use crate::error::Result;
use crate::qcore::DensityOperator;
use crate::quad::adaptive;

/// Population above which the top decile of kept modes marks an energy reading as
/// contaminated by truncation.
pub const TRUNCATION_FLAG_THRESHOLD: f64 = 1e-6;

/// `phi(N)^2 = 2 int_{-1}^{1} (1 - |x|) [cos^{4N}(kLx) + sin^{4N}(kLx)] dx`.
///
/// Bounds the purity of `Omega^N(|n, +-i><n, +-i|)` for every box mode `n`.
pub fn phi_bound_sq(n: usize, config: &BoxConfig) -> f64 {
    if n == 0 {
        return 4.0;
    }
    let kl = config.k * config.length;
    let p = i32::try_from(4 * n).unwrap_or(i32::MAX);
    // The integrand is even in x.
    let f = |x: f64| {
        let (s, c) = (kl * x).sin_cos();
        (1.0 - x) * (c.powi(p) + s.powi(p))
    };
    4.0 * adaptive(f, 0.0, 1.0, 1e-11)
}

/// `phi(N)`.
pub fn phi_bound(n: usize, config: &BoxConfig) -> f64 {
    phi_bound_sq(n, config).sqrt()
}

/// `E0 + (k^2 / m) N`.
pub fn predicted_energy(e0: f64, n: usize, config: &BoxConfig) -> f64 {
    e0 + config.k * config.k / config.mass * n as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReading {
    /// `sum_n E_n p_n` over the kept modes.
    pub energy: f64,
    /// Population in the top 10% of kept modes.
    pub top_decile_population: f64,
    /// `1 - sum_n p_n`: weight outside the kept modes.
    pub missing_population: f64,
    pub truncation_flag: bool,
}

/// Kinetic energy `sum_n E_n <n| tr_spin sigma |n>`; on the grid the mode populations
/// come from a discrete sine transform.
pub fn measured_energy(rep: &BoxRepresentation, state: &DensityOperator) -> Result<EnergyReading> {
    let pops = rep.mode_populations(state)?;
    let cfg = rep.config();
    let energy = pops
        .iter()
        .enumerate()
        .map(|(i, p)| cfg.energy_level(i + 1) * p)
        .sum();
    let d = pops.len();
    let decile = d.div_ceil(10);
    let top_decile_population: f64 = pops[d - decile..].iter().sum();
    let missing_population = 1.0 - pops.iter().sum::<f64>();
    Ok(EnergyReading {
        energy,
        top_decile_population,
        missing_population,
        truncation_flag: top_decile_population > TRUNCATION_FLAG_THRESHOLD,
    })
}

/// Heuristic check, on a finite truncation, that a spectrum has finitely many levels
/// below every threshold: the list is nondecreasing, no value repeats more than a
/// quarter of the list (at least once allowed), and the gaps in the upper half do not
/// shrink below half of those in the lower half.
pub fn hamiltonian_is_zero_band(levels: &[f64]) -> bool {
    if levels.len() < 2 || levels.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = levels.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    if levels.windows(2).any(|w| w[1] < w[0] - tol) {
        return false;
    }
    let max_run = (levels.len() / 4).max(1);
    let mut run = 1;
    for w in levels.windows(2) {
        if (w[1] - w[0]).abs() <= tol {
            run += 1;
            if run > max_run {
                return false;
            }
        } else {
            run = 1;
        }
    }
    let half = levels.len() / 2;
    let lower = levels[half] - levels[0];
    let upper = levels[levels.len() - 1] - levels[half];
    let lower_gap = lower / half as f64;
    let upper_gap = upper / (levels.len() - 1 - half).max(1) as f64;
    lower > tol && upper_gap >= 0.5 * lower_gap
}
