//! Run configuration: a TOML document with `experiment`, `seed` and one parameter
//! table per experiment. Units follow hbar = 1; lengths in box units.

use serde::{Deserialize, Serialize};

use seqmeas::boxmodel::{spin_one, spin_y, spin_zero, BoxConfig};
use seqmeas::linalg::C64;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BoxHeatVision,
    Tomography,
    FinitedimSaturation,
    Ladder,
    FreegroupNorm,
    FreegroupPurity,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BoxHeatVision => "box_heat_vision",
            Experiment::Tomography => "tomography",
            Experiment::FinitedimSaturation => "finitedim_saturation",
            Experiment::Ladder => "ladder",
            Experiment::FreegroupNorm => "freegroup_norm",
            Experiment::FreegroupPurity => "freegroup_purity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    /// `|0>`
    Zero,
    /// `|1>`
    One,
    /// `(|0> + i|1>)/sqrt 2`
    PlusI,
    /// `(|0> - i|1>)/sqrt 2`
    MinusI,
}

impl Spin {
    pub fn spinor(self) -> [C64; 2] {
        match self {
            Spin::Zero => spin_zero(),
            Spin::One => spin_one(),
            Spin::PlusI => spin_y(1.0),
            Spin::MinusI => spin_y(-1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub box_heat_vision: BoxHeatVisionParams,
    #[serde(default)]
    pub tomography: TomographyParams,
    #[serde(default)]
    pub finitedim_saturation: FinitedimParams,
    #[serde(default)]
    pub ladder: LadderParams,
    #[serde(default)]
    pub freegroup_norm: FreegroupNormParams,
    #[serde(default)]
    pub freegroup_purity: FreegroupPurityParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxHeatVisionParams {
    pub model: BoxConfig,
    /// Channel applications `N = 0..=steps`.
    pub steps: usize,
    /// Initial box mode (1 = ground state).
    pub mode: usize,
    pub spin: Spin,
}

impl Default for BoxHeatVisionParams {
    fn default() -> Self {
        Self {
            model: BoxConfig::default(),
            steps: 20,
            mode: 1,
            spin: Spin::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographyState {
    /// `|mode> (x) spin`.
    Product,
    /// `(|mode> (x) |0> + |mode + 1> (x) |1>) / sqrt 2`.
    Correlated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyParams {
    pub model: BoxConfig,
    /// Number of moments (and harmonics) estimated.
    pub moments: usize,
    /// Sampled trajectories; 0 uses exact probabilities only.
    pub n_traj: u64,
    /// Optional CSV of measured `string, count` pairs replacing simulation.
    pub counts_csv: Option<String>,
    pub state: TomographyState,
    pub mode: usize,
    pub spin: Spin,
    /// Reconstruction points on `[0, L]`.
    pub points: usize,
    /// Relative L2 error allowed for the reconstructed density.
    pub l2_tolerance: f64,
    /// Standard error above which a harmonic is flagged.
    pub harmonic_tolerance: f64,
}

impl Default for TomographyParams {
    fn default() -> Self {
        Self {
            model: BoxConfig::default(),
            moments: 16,
            n_traj: 0,
            counts_csv: None,
            state: TomographyState::Product,
            mode: 1,
            spin: Spin::Zero,
            points: 201,
            l2_tolerance: 0.02,
            harmonic_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinitedimParams {
    pub dim: usize,
    pub rank_p: usize,
    pub rank_q: usize,
    pub steps: usize,
    pub weights: [f64; 2],
    /// Weights for the limit-invariance comparison.
    pub alt_weights: [f64; 2],
}

impl Default for FinitedimParams {
    fn default() -> Self {
        Self {
            dim: 8,
            rank_p: 4,
            rank_q: 4,
            steps: 2000,
            weights: [0.5, 0.5],
            alt_weights: [0.9, 0.1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderState {
    /// Equal superposition of all sites with spin `|0>`.
    Uniform,
    /// `|site> (x) |0>`.
    Localized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderParams {
    pub d: usize,
    pub k: f64,
    /// Recorded steps; 0 records up to the step where the distance reaches 1e-3.
    pub steps: usize,
    /// Search limit for the convergence and purity-tail steps.
    pub max_steps: usize,
    pub state: LadderState,
    pub site: usize,
}

impl Default for LadderParams {
    fn default() -> Self {
        Self {
            d: 16,
            k: 1.0,
            steps: 500,
            max_steps: 10_000_000,
            state: LadderState::Uniform,
            site: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreegroupNormParams {
    pub s: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub iterations: usize,
}

impl Default for FreegroupNormParams {
    fn default() -> Self {
        Self {
            s: 5,
            min_len: 2,
            max_len: 10,
            iterations: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreegroupState {
    /// `|e><e|`.
    Identity,
    /// Seeded random pure state on words up to `support`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreegroupPurityParams {
    pub s: usize,
    pub max_len: usize,
    pub steps: usize,
    pub state: FreegroupState,
    pub support: usize,
}

impl Default for FreegroupPurityParams {
    fn default() -> Self {
        Self {
            s: 5,
            max_len: 5,
            steps: 2,
            state: FreegroupState::Identity,
            support: 0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides (dotted keys, TOML values; bare words are taken
    /// as strings) and re-validates the result.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Table::try_from(self).map_err(|e| CliError::Schema(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Schema(format!("override `{o}` is not key=value")))?;
            let key = key.trim();
            let value = parse_value(raw.trim());
            let parts: Vec<&str> = key.split('.').collect();
            let (last, path) = parts.split_last().expect("split yields at least one part");
            let mut table = &mut doc;
            for p in path {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| CliError::Schema(format!("override `{key}`: `{p}` is not a table")))?;
            }
            table.insert(last.to_string(), value);
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Schema(format!("after overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Schema(format!("{field}: {msg}")));
        match self.experiment {
            Experiment::BoxHeatVision => {
                let p = &self.box_heat_vision;
                p.model.validate().map_err(|e| CliError::Schema(format!("box_heat_vision.model: {e}")))?;
                if p.mode == 0 || p.mode > p.model.modes {
                    return bad("box_heat_vision.mode", format!("must be in 1..={}", p.model.modes));
                }
            }
            Experiment::Tomography => {
                let p = &self.tomography;
                p.model.validate().map_err(|e| CliError::Schema(format!("tomography.model: {e}")))?;
                if p.moments == 0 {
                    return bad("tomography.moments", "must be at least 1".into());
                }
                if p.mode == 0 || p.mode + 1 > p.model.modes {
                    return bad("tomography.mode", format!("must be in 1..{}", p.model.modes));
                }
                if p.points < 2 {
                    return bad("tomography.points", "must be at least 2".into());
                }
            }
            Experiment::FinitedimSaturation => {
                let p = &self.finitedim_saturation;
                if !(2..=64).contains(&p.dim) {
                    return bad("finitedim_saturation.dim", "must be in 2..=64".into());
                }
                if p.rank_p > p.dim || p.rank_q > p.dim {
                    return bad("finitedim_saturation.rank_p", "ranks must not exceed dim".into());
                }
            }
            Experiment::Ladder => {
                let p = &self.ladder;
                if p.d < 2 {
                    return bad("ladder.d", "must be at least 2".into());
                }
                if !p.k.is_finite() {
                    return bad("ladder.k", "must be finite".into());
                }
                if p.site == 0 || p.site > p.d {
                    return bad("ladder.site", format!("must be in 1..={}", p.d));
                }
            }
            Experiment::FreegroupNorm => {
                let p = &self.freegroup_norm;
                if p.s < 2 {
                    return bad("freegroup_norm.s", "must be at least 2".into());
                }
                if p.min_len < 2 || p.min_len > p.max_len {
                    return bad("freegroup_norm.min_len", "must be in 2..=max_len".into());
                }
            }
            Experiment::FreegroupPurity => {
                let p = &self.freegroup_purity;
                if p.s < 2 {
                    return bad("freegroup_purity.s", "must be at least 2".into());
                }
            }
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse("experiment = \"ladder\"").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.ladder, LadderParams::default());
    }

    #[test]
    fn unknown_field_is_named_with_line() {
        let err = RunConfig::parse("experiment = \"ladder\"\n[ladder]\nsize = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("size") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn overrides_are_revalidated() {
        let cfg = RunConfig::parse("experiment = \"ladder\"").unwrap();
        let o = cfg
            .with_overrides(&["ladder.d=8".into(), "seed=11".into(), "ladder.state=localized".into()])
            .unwrap();
        assert_eq!(o.ladder.d, 8);
        assert_eq!(o.seed, 11);
        assert_eq!(o.ladder.state, LadderState::Localized);
        assert!(cfg.with_overrides(&["ladder.d=1".into()]).is_err());
        assert!(cfg.with_overrides(&["ladder.bogus=1".into()]).is_err());
        assert!(cfg.with_overrides(&["noequals".into()]).is_err());
    }

    #[test]
    fn nested_model_override() {
        let cfg = RunConfig::parse("experiment = \"box_heat_vision\"").unwrap();
        let o = cfg.with_overrides(&["box_heat_vision.model.grid=128".into()]).unwrap();
        assert_eq!(o.box_heat_vision.model.grid, 128);
        assert!(cfg.with_overrides(&["box_heat_vision.model.k=-1".into()]).is_err());
    }
}
