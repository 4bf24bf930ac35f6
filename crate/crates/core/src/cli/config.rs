use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::continuation::ContinuationOptions;
use crate::cradle::CradleOptions;
use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::potentials::PotentialSpec;
use crate::symmetry::GroupLabel;
use crate::timedomain::IntegratorOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub onsite: PotentialSpec,
    pub coupling: PotentialSpec,
    /// Starting point of the equilibrium search for `U'(a) = 0`.
    #[serde(default)]
    pub equilibrium_seed: f64,
    #[serde(default)]
    pub zero_mean_mode: bool,
}

impl ModelConfig {
    pub fn build(&self) -> Result<LatticeModel> {
        LatticeModel::new(self.n, self.onsite.clone(), self.coupling.clone(), self.equilibrium_seed, self.zero_mean_mode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchConfig {
    pub k: usize,
    pub families: Vec<GroupLabel>,
    /// Write a loop snapshot every this many accepted points.
    pub snapshot_every: usize,
    /// Base amplitude of the onset extrapolation (`r, 2r, 4r`).
    pub onset_r: f64,
}

impl Default for BranchConfig {
    fn default() -> Self {
        Self { k: 1, families: GroupLabel::families().to_vec(), snapshot_every: 10, onset_r: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceConfig {
    /// Mode to check; every bifurcating mode when absent.
    pub k: Option<usize>,
    pub l_max: usize,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self { k: None, l_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CradleConfig {
    /// Frequencies as multiples of `ω`.
    pub nu_ratios: Vec<f64>,
    pub groups: Vec<GroupLabel>,
    pub search: CradleOptions,
}

impl Default for CradleConfig {
    fn default() -> Self {
        Self {
            nu_ratios: vec![0.98, 1.02],
            groups: vec![GroupLabel::CradleS, GroupLabel::CradleSTilde],
            search: CradleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// LoopState JSON file to check.
    #[serde(rename = "loop")]
    pub loop_path: Option<PathBuf>,
    pub samples: usize,
    pub threshold: f64,
    pub integrator: IntegratorOptions,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { loop_path: None, samples: 64, threshold: 1e-6, integrator: IntegratorOptions::with_tol(1e-10) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogConfig {
    /// Seed radii are geometric between these bounds.
    pub r_min: f64,
    pub r_max: f64,
    /// Number of seed radii.
    pub grid: usize,
    pub angles: usize,
    pub iters: usize,
    pub energy: f64,
    pub samples: usize,
}

impl Default for HomogConfig {
    fn default() -> Self {
        Self { r_min: 1e-3, r_max: 1.0, grid: 8, angles: 8, iters: 10_000, energy: 1.0, samples: 64 }
    }
}

/// Everything a run needs. Unknown keys are rejected and every default is
/// written back out in the resolved-config echo.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    pub continuation: ContinuationOptions,
    pub branch: BranchConfig,
    pub resonances: ResonanceConfig,
    pub cradle: CradleConfig,
    pub validate: ValidateConfig,
    pub homog: HomogConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<LatticeModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs a `model` section".into()))?
            .build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = RunConfig::from_json("{\n  \"modle\": {}\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("modle"), "{msg}");
        let nested = r#"{"continuation": {"r_mim": 1e-4}}"#;
        assert!(RunConfig::from_json(nested).is_err());
    }

    #[test]
    fn model_section() {
        let cfg = RunConfig::from_json(
            r#"{"model": {"n": 6, "onsite": {"family": "pendulum", "omega": 1.0}, "coupling": {"family": "harmonic"}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.model().unwrap().n, 6);
        assert!(RunConfig::default().model().is_err());
    }
}
