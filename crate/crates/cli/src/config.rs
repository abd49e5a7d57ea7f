//! Experiment configuration, read from a JSON document and overridden by flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mrfuse_core::synth::{AudioScene, AudioSetup, FusionSetup};
use mrfuse_core::{BetaParam, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Fusion,
    Audio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenePreset {
    ThreeNoteMelody,
    ChordThenPairs,
}

/// A named preset or a full scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSpec {
    Preset(ScenePreset),
    Custom(AudioScene),
}

impl SceneSpec {
    pub fn scene(&self) -> AudioScene {
        match self {
            SceneSpec::Preset(ScenePreset::ThreeNoteMelody) => AudioScene::three_note_melody(),
            SceneSpec::Preset(ScenePreset::ChordThenPairs) => AudioScene::chord_then_pairs(),
            SceneSpec::Custom(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub scene: SceneSpec,
    pub setup: AudioSetup,
    /// β of the rank-1 fits that produce the oracle factors.
    pub oracle_beta: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::Preset(ScenePreset::ThreeNoteMelody),
            setup: AudioSetup::default(),
            oracle_beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub betas: Vec<f64>,
    pub lambda: f64,
    /// Factorization rank. Fusion defaults to `fusion.rank`; audio requires one
    /// component per note.
    pub rank: Option<usize>,
    pub fusion: FusionSetup,
    pub audio: AudioConfig,
    pub trials: usize,
    /// Master seed. Data, noise and per-trial initializations derive from it.
    pub seed: u64,
    /// Defaults depend on the mode, see [`ExperimentConfig::solver_config`].
    pub solver: Option<SolverConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fusion,
            betas: vec![1.0],
            lambda: 1.0,
            rank: None,
            fusion: FusionSetup::default(),
            audio: AudioConfig::default(),
            trials: 1,
            seed: 0,
            solver: None,
            out: None,
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub betas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(b) = &o.betas {
            self.betas = b.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.betas.is_empty() {
            bail!("betas must list at least one value");
        }
        for &b in &self.betas {
            BetaParam::new(b).with_context(|| format!("betas: {b}"))?;
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            bail!("lambda must be positive and finite, got {}", self.lambda);
        }
        if self.rank == Some(0) {
            bail!("rank must be positive");
        }
        match self.mode {
            Mode::Fusion => self.fusion.noise.validate().context("fusion.noise")?,
            Mode::Audio => {
                let scene = self.audio.scene.scene();
                scene.validate().context("audio.scene")?;
                self.audio.setup.ratio().context("audio.setup")?;
                BetaParam::new(self.audio.oracle_beta).context("audio.oracle_beta")?;
                if let Some(k) = self.rank {
                    if k != scene.notes.len() {
                        bail!("audio rank must equal the number of notes ({}), got {k}", scene.notes.len());
                    }
                }
            }
        }
        let cfg = self.solver_config();
        if !(cfg.kappa > 0.0 && cfg.kappa < 1.0) {
            bail!("solver.kappa must lie in (0, 1), got {}", cfg.kappa);
        }
        if cfg.max_iter_l1 + cfg.max_iter_l2 == 0 {
            bail!("solver needs at least one sweep");
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        match self.mode {
            Mode::Fusion => self.rank.unwrap_or(self.fusion.rank),
            Mode::Audio => self.audio.scene.scene().notes.len(),
        }
    }

    /// Fusion: 500 sweeps with fixed operators, κ = 1e-4. Audio: 100 sweeps with
    /// fixed operators then 400 learning them, κ = 1e-6.
    pub fn solver_config(&self) -> SolverConfig {
        if let Some(c) = &self.solver {
            return c.clone();
        }
        match self.mode {
            Mode::Fusion => SolverConfig {
                max_iter_l1: 500,
                max_iter_l2: 0,
                kappa: 1e-4,
                ..SolverConfig::default()
            },
            Mode::Audio => SolverConfig {
                max_iter_l1: 100,
                max_iter_l2: 400,
                kappa: 1e-6,
                ..SolverConfig::default()
            },
        }
    }

    pub fn out_dir(&self, fallback: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let mut c: ExperimentConfig = serde_json::from_str(r#"{"betas": [2], "trials": 3, "seed": 9}"#).unwrap();
        c.apply(&Overrides {
            betas: Some(vec![0.0, 1.0]),
            trials: None,
            seed: Some(4),
            out: None,
        });
        assert_eq!(c.betas, vec![0.0, 1.0]);
        assert_eq!(c.trials, 3);
        assert_eq!(c.seed, 4);
    }

    #[test]
    fn scene_presets_and_custom_scenes_parse() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"mode": "audio", "audio": {"scene": "chord_then_pairs"}}"#).unwrap();
        assert_eq!(c.rank(), 4);
        let custom = serde_json::to_string(&SceneSpec::Custom(AudioScene::three_note_melody())).unwrap();
        let back: SceneSpec = serde_json::from_str(&custom).unwrap();
        assert_eq!(back.scene(), AudioScene::three_note_melody());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |json: &str| {
            let c: ExperimentConfig = serde_json::from_str(json).unwrap();
            c.validate().is_err()
        };
        assert!(bad(r#"{"trials": 0}"#));
        assert!(bad(r#"{"betas": []}"#));
        assert!(bad(r#"{"lambda": -1}"#));
        assert!(bad(r#"{"mode": "audio", "rank": 2}"#));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trails": 2}"#).is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
