//! Experimental inputs: planted low-rank references, simulated low-resolution
//! observation pairs with their noise models, and synthetic audio.

pub mod audio;
pub mod noise;

use serde::{Deserialize, Serialize};

use crate::betadiv::BetaParam;
use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::operators::{
    box_spectral_response, build_gaussian_blur_decimation, gaussian_spectral_response, SparseOperator,
};
use crate::rng::{self, streams};
use crate::solver::{reconstruct, solve, CoupledProblem, SolverConfig};

pub use audio::{
    build_audio_pair, note_frequency, oracle_factors, spectrogram, synth_audio, AudioPair, AudioScene,
    AudioSetup, Note, WindowFn,
};
pub use noise::{apply_gamma_noise, make_additive_noise, noise_level, AdditiveNoise, NoiseSpec};

/// Sweeps of the preliminary noiseless fit that supplies Poisson means.
pub const POISSON_MEAN_SWEEPS: usize = 200;

#[derive(Debug, Clone)]
pub struct PlantedReference {
    pub v: NonnegMatrix,
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
}

/// `V = W*·H*` with i.i.d. uniform `(0, 1]` factors and `W*` column-L1-normalized.
pub fn planted_reference(f: usize, n: usize, k: usize, seed: u64) -> Result<PlantedReference> {
    if k == 0 || k > f.min(n) {
        return Err(Error::Parameter(format!("rank must be in 1..={}, got {k}", f.min(n))));
    }
    let mut g = rng::stream(seed, streams::PLANTED);
    let mut w = rng::uniform_matrix(f, k, &mut g);
    let h = rng::uniform_matrix(k, n, &mut g);
    let norms = w.column_l1_norms();
    for i in 0..f {
        for (j, c) in norms.iter().enumerate() {
            w.set(i, j, w.get(i, j) / c);
        }
    }
    let v = w.matmul(&h)?;
    Ok(PlantedReference { v, w, h })
}

/// Noiseless observations `(R·V, V·S)`.
pub fn wald_generate(
    v: &NonnegMatrix,
    r: &SparseOperator,
    s: &SparseOperator,
) -> Result<(NonnegMatrix, NonnegMatrix)> {
    Ok((r.apply(v)?, s.right_apply(v)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectralResponse {
    /// Overlapping Gaussian bands.
    #[default]
    Gaussian,
    /// Disjoint contiguous groups of bands.
    Box,
}

/// Geometry and noise of a simulated image-fusion instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionSetup {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    /// Bands of the high-spatial-resolution observation `X`.
    pub msi_bands: usize,
    pub rank: usize,
    pub response: SpectralResponse,
    pub kernel: usize,
    pub sigma: f64,
    pub stride: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl Default for FusionSetup {
    fn default() -> Self {
        Self {
            height: 24,
            width: 24,
            bands: 30,
            msi_bands: 6,
            rank: 4,
            response: SpectralResponse::Gaussian,
            kernel: 11,
            sigma: 1.7,
            stride: 4,
            noise: NoiseSpec::noiseless(),
            seed: 0,
        }
    }
}

/// A simulated fusion instance: the reference, its factors, the operators and
/// both observations.
#[derive(Debug, Clone)]
pub struct FusionInstance {
    pub reference: PlantedReference,
    pub r: SparseOperator,
    pub s: SparseOperator,
    /// High spatial, low spectral resolution, possibly noisy.
    pub x: NonnegMatrix,
    /// Low spatial, high spectral resolution, possibly noisy.
    pub y: NonnegMatrix,
    pub x_clean: NonnegMatrix,
    pub y_clean: NonnegMatrix,
    /// Pre-clipping additive noise of `X` and `Y`, row-major.
    pub x_noise: Vec<f64>,
    pub y_noise: Vec<f64>,
}

impl FusionSetup {
    pub fn spectral_response(&self) -> Result<SparseOperator> {
        let dense = match self.response {
            SpectralResponse::Gaussian => gaussian_spectral_response(self.msi_bands, self.bands)?,
            SpectralResponse::Box => box_spectral_response(self.msi_bands, self.bands)?,
        };
        Ok(SparseOperator::from_dense(&dense))
    }

    pub fn spatial_operator(&self) -> Result<SparseOperator> {
        build_gaussian_blur_decimation(self.height, self.width, self.kernel, self.sigma, self.stride)
    }

    /// Builds the instance. When the noise has a Poisson component, its means
    /// are `R·Ṽ` and `Ṽ·S` with `Ṽ` from a preliminary noiseless fit
    /// (β = 1, [`POISSON_MEAN_SWEEPS`] sweeps).
    pub fn generate(&self) -> Result<FusionInstance> {
        self.noise.validate()?;
        let reference = planted_reference(self.bands, self.height * self.width, self.rank, self.seed)?;
        let r = self.spectral_response()?;
        let s = self.spatial_operator()?;
        let (x_clean, y_clean) = wald_generate(&reference.v, &r, &s)?;

        let means = if self.noise.needs_poisson_mean() {
            let p = CoupledProblem::new(
                x_clean.clone(),
                y_clean.clone(),
                r.clone(),
                s.clone(),
                1.0,
                BetaParam::new(1.0)?,
                self.rank,
            )?;
            let cfg = SolverConfig {
                max_iter_l1: POISSON_MEAN_SWEEPS,
                kappa: 1e-12,
                seed: rng::derive_seed(self.seed, 0x9e11),
                ..SolverConfig::default()
            };
            let v_tilde = reconstruct(&solve(&p, &cfg, None)?);
            Some(wald_generate(&v_tilde, &r, &s)?)
        } else {
            None
        };

        let x_add = make_additive_noise(&x_clean, means.as_ref().map(|m| &m.0), &self.noise, 0)?;
        let y_add = make_additive_noise(&y_clean, means.as_ref().map(|m| &m.1), &self.noise, 1)?;
        let (mut x, mut y) = (x_add.noisy, y_add.noisy);
        if let Some(std) = self.noise.gamma_std {
            x = apply_gamma_noise(&x, std, rng::derive_seed(self.noise.seed, 0))?;
            y = apply_gamma_noise(&y, std, rng::derive_seed(self.noise.seed, 1))?;
        }
        Ok(FusionInstance {
            reference,
            r,
            s,
            x,
            y,
            x_clean,
            y_clean,
            x_noise: x_add.noise,
            y_noise: y_add.noise,
        })
    }
}

impl FusionInstance {
    pub fn problem(&self, beta: BetaParam, lambda: f64) -> Result<CoupledProblem> {
        CoupledProblem::new(
            self.x.clone(),
            self.y.clone(),
            self.r.clone(),
            self.s.clone(),
            lambda,
            beta,
            self.reference.w.cols(),
        )
    }
}
