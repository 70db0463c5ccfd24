use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which discretization of `L^2([0, L]) (x) C^2` a model run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Midpoint grid `x_j = (j + 1/2) L / G`. Projectors are exact; energies are read
    /// out through a discrete sine transform onto `D` modes.
    Grid,
    /// First `D` box eigenmodes. Projectors are truncated and only approximately
    /// idempotent.
    Energy,
}

/// Particle of mass `mass` in a box `[0, length]` (units with hbar = 1), measured along
/// spin directions that rotate with wavenumber `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxConfig {
    pub length: f64,
    pub mass: f64,
    /// Spin rotation wavenumber, in inverse length units.
    pub k: f64,
    /// Sine modes kept: the energy basis size, or the energy readout size on the grid.
    pub modes: usize,
    /// Grid points.
    pub grid: usize,
    pub representation: Representation,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            mass: 1.0,
            k: PI / 4.0,
            modes: 64,
            grid: 256,
            representation: Representation::Grid,
        }
    }
}

impl BoxConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("length", self.length), ("mass", self.mass), ("k", self.k)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.modes < 2 || self.grid < 2 {
            return Err(Error::InvalidConfig(format!(
                "modes and grid must be at least 2, got {} and {}",
                self.modes, self.grid
            )));
        }
        if self.representation == Representation::Grid && self.modes >= self.grid {
            return Err(Error::InvalidConfig(format!(
                "grid readout needs modes < grid, got {} >= {}",
                self.modes, self.grid
            )));
        }
        Ok(())
    }

    /// Largest wavenumber for which the alternating statistics determine the density.
    pub fn tomography_k_max(&self) -> f64 {
        PI / (4.0 * self.length)
    }

    /// Whether `k <= pi/(4L)`. Larger `k` is fine for dynamics but not for tomography.
    pub fn tomography_legal(&self) -> bool {
        self.k <= self.tomography_k_max() * (1.0 + 1e-12)
    }

    pub fn require_tomography_range(&self) -> Result<()> {
        if self.tomography_legal() {
            Ok(())
        } else {
            Err(Error::TomographyRange {
                k: self.k,
                max: self.tomography_k_max(),
            })
        }
    }

    /// `E_n = pi^2 n^2 / (2 m L^2)`.
    pub fn energy_level(&self, n: usize) -> f64 {
        let nf = n as f64;
        PI * PI * nf * nf / (2.0 * self.mass * self.length * self.length)
    }
}

/// `E_1, ..., E_D`.
pub fn energy_levels(config: &BoxConfig) -> Vec<f64> {
    (1..=config.modes).map(|n| config.energy_level(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels() {
        let cfg = BoxConfig::default();
        let e = energy_levels(&cfg);
        assert!((e[0] - 4.934802200544679).abs() < 1e-12);
        for (i, v) in e.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((v / e[0] - n * n).abs() < 1e-9);
        }
        let wide = BoxConfig {
            length: 2.0,
            ..BoxConfig::default()
        };
        assert!((wide.energy_level(3) - 9.0 * PI * PI / 8.0).abs() < 1e-12);
    }

    #[test]
    fn validation_and_tomography_flag() {
        assert!(BoxConfig::default().validate().is_ok());
        assert!(BoxConfig::default().tomography_legal());
        let fast = BoxConfig {
            k: 1.0,
            ..BoxConfig::default()
        };
        assert!(fast.validate().is_ok());
        assert!(!fast.tomography_legal());
        assert!(matches!(fast.require_tomography_range(), Err(Error::TomographyRange { .. })));
        let bad = BoxConfig {
            mass: 0.0,
            ..BoxConfig::default()
        };
        assert!(bad.validate().is_err());
        let coarse = BoxConfig {
            modes: 300,
            ..BoxConfig::default()
        };
        assert!(coarse.validate().is_err());
    }

    #[test]
    fn parses_partial_toml_with_defaults() {
        let cfg: BoxConfig = toml::from_str("grid = 512\nmodes = 128\nrepresentation = \"energy\"").unwrap();
        assert_eq!(cfg.grid, 512);
        assert_eq!(cfg.representation, Representation::Energy);
        assert_eq!(cfg.length, 1.0);
        assert!(toml::from_str::<BoxConfig>("bogus = 1").is_err());
    }
}
