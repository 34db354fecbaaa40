//! Run configuration, read from TOML. Every key is optional; the defaults
//! describe the 20x20x4 reference problem.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oed::ObjectiveKind;
use crate::prior::{MPriorConfig, XiPriorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InversionMode {
    Aware,
    Unaware,
}

impl std::fmt::Display for InversionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InversionMode::Aware => "aware",
            InversionMode::Unaware => "unaware",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { nx: 20, ny: 20, nz: 4 }
    }
}

/// Regular `per_side x per_side` grid on the top face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub per_side: usize,
    pub margin: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            per_side: 10,
            margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaeConfig {
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for BaeConfig {
    fn default() -> Self {
        Self { n_mc: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OedConfig {
    pub objective: ObjectiveKind,
    pub k: usize,
    pub n_d: usize,
    pub n_tr: usize,
    /// Fixed low-rank size; `n_act` when absent.
    pub rank: Option<usize>,
    pub seed: u64,
    pub warm_start: bool,
    pub reuse_bae_samples: bool,
    pub nd_values: Vec<usize>,
}

impl Default for OedConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::Eig,
            k: 20,
            n_d: 5,
            n_tr: 30,
            rank: None,
            seed: 2,
            warm_start: true,
            reuse_bae_samples: false,
            nd_values: vec![3, 5, 10, 20, 30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_v: usize,
    pub seed: u64,
    pub n_random: usize,
    pub inversion_mode: InversionMode,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            n_v: 100,
            seed: 3,
            n_random: 50,
            inversion_mode: InversionMode::Aware,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: f64,
    pub out_dir: PathBuf,
    pub mesh: MeshConfig,
    pub sensors: SensorConfig,
    pub m_prior: MPriorConfig,
    pub xi_prior: XiPriorConfig,
    pub bae: BaeConfig,
    pub oed: OedConfig,
    pub validation: ValidationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma: 1e-3,
            out_dir: PathBuf::from("out"),
            mesh: MeshConfig::default(),
            sensors: SensorConfig::default(),
            m_prior: MPriorConfig::default(),
            xi_prior: XiPriorConfig::default(),
            bae: BaeConfig::default(),
            oed: OedConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks that every count is positive and the noise level is sane.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        let m = &self.mesh;
        if m.nx < 2 || m.ny < 2 || m.nz < 1 {
            return bad(format!("mesh {}x{}x{} too small", m.nx, m.ny, m.nz));
        }
        if self.sensors.per_side == 0 || !(0.0..0.5).contains(&self.sensors.margin) {
            return bad("sensor grid needs per_side >= 1 and margin in [0, 0.5)".into());
        }
        if self.bae.n_mc < 2 {
            return bad(format!("bae.n_mc must be at least 2, got {}", self.bae.n_mc));
        }
        let o = &self.oed;
        let n_s = self.sensors.per_side * self.sensors.per_side;
        if o.k == 0 || o.k > n_s {
            return bad(format!("oed.k must be in 1..={n_s}, got {}", o.k));
        }
        if o.n_d == 0 || o.n_tr == 0 || o.rank == Some(0) {
            return bad("oed.n_d, oed.n_tr and oed.rank must be positive".into());
        }
        if o.nd_values.is_empty() || o.nd_values.contains(&0) {
            return bad("oed.nd_values must be a nonempty list of positive counts".into());
        }
        if self.validation.n_v == 0 {
            return bad("validation.n_v must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = RunConfig::default();
        cfg.sigma = 2.5e-3;
        cfg.oed.objective = ObjectiveKind::Trace;
        cfg.oed.rank = Some(7);
        cfg.validation.inversion_mode = InversionMode::Unaware;
        cfg.m_prior.robin_beta = Some(0.3);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_and_rejections() {
        let cfg = RunConfig::from_toml("[mesh]\nnx = 4\nny = 4\nnz = 2\n[oed]\nk = 3\n").unwrap();
        assert_eq!(cfg.mesh.nx, 4);
        assert_eq!(cfg.oed.n_d, 5);
        assert!(RunConfig::from_toml("[bae]\nn_mc = 1\n").is_err());
        assert!(RunConfig::from_toml("sigma = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[mesh]\nbogus = 1\n").is_err());
    }
}
