//! Synthesized data directories: observations, operators, references and a
//! manifest recording how they were made.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mrfuse_core::io;
use mrfuse_core::rng::derive_seed;
use mrfuse_core::synth::build_audio_pair;
use mrfuse_core::{BetaParam, CoupledProblem, NonnegMatrix, SparseOperator};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};

pub const DATA_FORMAT: &str = "mrfuse data v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub height: usize,
    pub width: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub format: String,
    pub config: ExperimentConfig,
    pub rank: usize,
    pub x_shape: (usize, usize),
    pub y_shape: (usize, usize),
    #[serde(default)]
    pub image: Option<ImageInfo>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// `‖ε‖_F / ‖clean‖_F` of the additive noise, before clipping.
    #[serde(default)]
    pub noise_ratio_x: Option<f64>,
    #[serde(default)]
    pub noise_ratio_y: Option<f64>,
    pub files: Vec<String>,
}

/// Everything a solve or an evaluation needs from a data directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DataManifest,
    pub x: NonnegMatrix,
    pub y: NonnegMatrix,
    pub r: SparseOperator,
    pub s: SparseOperator,
    /// Fusion: the reference image `V` and its planted factors.
    pub v: Option<NonnegMatrix>,
    /// Reference `W` (planted or oracle).
    pub w_ref: NonnegMatrix,
    /// Reference `H` (planted or oracle).
    pub h_ref: NonnegMatrix,
}

impl Dataset {
    pub fn problem(&self, beta: BetaParam, lambda: f64) -> Result<CoupledProblem> {
        Ok(CoupledProblem::new(
            self.x.clone(),
            self.y.clone(),
            self.r.clone(),
            self.s.clone(),
            lambda,
            beta,
            self.manifest.rank,
        )?)
    }
}

fn ratio(noise: &[f64], clean: &NonnegMatrix) -> Option<f64> {
    let n: f64 = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    (n > 0.0).then(|| n / clean.frobenius_norm())
}

/// Generates the data described by `cfg` and writes it to `dir`.
pub fn synthesize(cfg: &ExperimentConfig, dir: &Path) -> Result<DataManifest> {
    cfg.validate()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut stored = cfg.clone();
    stored.out = None;
    let rank = cfg.rank();
    let write = |name: &str, m: &NonnegMatrix| -> Result<()> {
        io::write_nmat(dir.join(name), m).with_context(|| format!("writing {name}"))
    };

    let manifest = match cfg.mode {
        Mode::Fusion => {
            let mut setup = cfg.fusion.clone();
            setup.rank = rank;
            setup.seed = cfg.seed;
            setup.noise.seed = derive_seed(cfg.seed, 1);
            stored.fusion = setup.clone();
            let inst = setup.generate()?;
            write("X.nmat", &inst.x)?;
            write("Y.nmat", &inst.y)?;
            write("R.nmat", &inst.r.to_dense())?;
            write("S.nmat", &inst.s.to_dense())?;
            write("V.nmat", &inst.reference.v)?;
            write("W_ref.nmat", &inst.reference.w)?;
            write("H_ref.nmat", &inst.reference.h)?;
            DataManifest {
                format: DATA_FORMAT.into(),
                config: stored,
                rank,
                x_shape: inst.x.shape(),
                y_shape: inst.y.shape(),
                image: Some(ImageInfo {
                    height: setup.height,
                    width: setup.width,
                    stride: setup.stride,
                }),
                notes: vec![],
                noise_ratio_x: ratio(&inst.x_noise, &inst.x_clean),
                noise_ratio_y: ratio(&inst.y_noise, &inst.y_clean),
                files: ["X", "Y", "R", "S", "V", "W_ref", "H_ref"].map(|n| format!("{n}.nmat")).to_vec(),
            }
        }
        Mode::Audio => {
            let scene = cfg.audio.scene.scene();
            let pair = build_audio_pair(&scene, &cfg.audio.setup, BetaParam::new(cfg.audio.oracle_beta)?)?;
            write("X.nmat", &pair.x)?;
            write("Y.nmat", &pair.y)?;
            write("R.nmat", &pair.r.to_dense())?;
            write("S.nmat", &pair.s.to_dense())?;
            write("W_ref.nmat", &pair.w_oracle)?;
            write("H_ref.nmat", &pair.h_oracle)?;
            let peak = pair.signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scaled: Vec<f64> = pair.signal.iter().map(|v| if peak > 0.0 { v / peak } else { 0.0 }).collect();
            io::write_wav(dir.join("signal.wav"), &scaled, scene.sample_rate).context("writing signal.wav")?;
            let mut files: Vec<String> =
                ["X", "Y", "R", "S", "W_ref", "H_ref"].map(|n| format!("{n}.nmat")).to_vec();
            files.push("signal.wav".into());
            DataManifest {
                format: DATA_FORMAT.into(),
                config: stored,
                rank,
                x_shape: pair.x.shape(),
                y_shape: pair.y.shape(),
                image: None,
                notes: pair.note_names,
                noise_ratio_x: None,
                noise_ratio_y: None,
                files,
            }
        }
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    io::write_atomic(dir.join("manifest.json"), json.as_bytes()).context("writing manifest.json")?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<Dataset> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: DataManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if manifest.format != DATA_FORMAT {
        bail!("{}: unsupported data format {:?}", path.display(), manifest.format);
    }
    let read = |name: &str| -> Result<NonnegMatrix> {
        io::read_nmat(dir.join(name)).with_context(|| format!("reading {}", dir.join(name).display()))
    };
    let x = read("X.nmat")?;
    let y = read("Y.nmat")?;
    if x.shape() != manifest.x_shape || y.shape() != manifest.y_shape {
        bail!("{}: observation shapes disagree with the manifest", dir.display());
    }
    let v = match manifest.config.mode {
        Mode::Fusion => Some(read("V.nmat")?),
        Mode::Audio => None,
    };
    Ok(Dataset {
        x,
        y,
        r: SparseOperator::from_dense(&read("R.nmat")?),
        s: SparseOperator::from_dense(&read("S.nmat")?),
        v,
        w_ref: read("W_ref.nmat")?,
        h_ref: read("H_ref.nmat")?,
        manifest,
    })
}
