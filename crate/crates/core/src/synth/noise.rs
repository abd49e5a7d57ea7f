//! Observation noise: calibrated additive Poisson/Gaussian mixtures and
//! multiplicative Gamma noise.

use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::rng::{self, streams};

/// Redraws allowed when a noise draw is identically zero.
const MAX_REDRAWS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Signal-to-noise ratio of the additive term in dB. `None` disables it.
    pub snr_db: Option<f64>,
    /// Include the Poisson component.
    pub poisson: bool,
    /// Include the Gaussian component.
    pub gaussian: bool,
    /// Standard deviation of unit-mean multiplicative Gamma noise.
    pub gamma_std: Option<f64>,
    /// Calibrate the additive term band by band (row by row) instead of globally.
    pub per_band: bool,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            snr_db: None,
            poisson: true,
            gaussian: true,
            gamma_std: None,
            per_band: false,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            snr_db: None,
            poisson: false,
            gaussian: false,
            ..Self::default()
        }
    }

    pub fn additive(snr_db: f64, poisson: bool, gaussian: bool, seed: u64) -> Self {
        Self {
            snr_db: Some(snr_db),
            poisson,
            gaussian,
            seed,
            ..Self::default()
        }
    }

    pub fn gamma(std: f64, seed: u64) -> Self {
        Self {
            gamma_std: Some(std),
            seed,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(snr) = self.snr_db {
            if snr.is_nan() {
                return Err(Error::Parameter("snr_db must be a number".into()));
            }
            if snr.is_finite() && !(self.poisson || self.gaussian) {
                return Err(Error::Parameter(
                    "a finite snr_db needs the poisson or gaussian component".into(),
                ));
            }
        }
        if let Some(std) = self.gamma_std {
            if !(std > 0.0 && std < 1.0) {
                return Err(Error::Parameter(format!("gamma_std must lie in (0, 1), got {std}")));
            }
        }
        Ok(())
    }

    /// True when a finite additive term is configured.
    pub fn has_additive(&self) -> bool {
        matches!(self.snr_db, Some(s) if s.is_finite())
    }

    /// True when the additive term needs Poisson means.
    pub fn needs_poisson_mean(&self) -> bool {
        self.has_additive() && self.poisson
    }
}

/// `η = 10^(-snr/20)`.
pub fn noise_level(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Output of [`make_additive_noise`].
#[derive(Debug, Clone)]
pub struct AdditiveNoise {
    /// `max(0, clean + noise)`.
    pub noisy: NonnegMatrix,
    /// The signed noise term before clipping, row-major.
    pub noise: Vec<f64>,
}

/// Adds `ε = η·‖M‖/‖Ñ‖·Ñ` with `Ñ = x1·N_P/‖N_P‖ + x2·N_F/‖N_F‖` and clips at zero.
///
/// `N_P` is Poisson with means `poisson_mean` (not centered), `N_F` standard
/// normal. `channel` separates the draws of different observations sharing one
/// spec. With `per_band` set the calibration runs on each row separately.
pub fn make_additive_noise(
    clean: &NonnegMatrix,
    poisson_mean: Option<&NonnegMatrix>,
    spec: &NoiseSpec,
    channel: u64,
) -> Result<AdditiveNoise> {
    spec.validate()?;
    let len = clean.as_slice().len();
    let snr = match spec.snr_db {
        Some(s) if s.is_finite() => s,
        _ => {
            return Ok(AdditiveNoise {
                noisy: clean.clone(),
                noise: vec![0.0; len],
            })
        }
    };
    if spec.poisson {
        match poisson_mean {
            Some(m) if m.shape() == clean.shape() => {}
            Some(m) => return Err(Error::shape("poisson mean", m.shape(), clean.shape())),
            None => return Err(Error::Parameter("poisson component needs mean values".into())),
        }
    }
    let eta = noise_level(snr);
    let (rows, cols) = clean.shape();
    let blocks: Vec<std::ops::Range<usize>> = if spec.per_band {
        (0..rows).map(|i| i * cols..(i + 1) * cols).collect()
    } else {
        vec![0..len]
    };

    let mut noise = vec![0.0; len];
    for (b, block) in blocks.into_iter().enumerate() {
        let mix = draw_mixture(poisson_mean, spec, channel, b as u64, block.clone())?;
        let signal: f64 = clean.as_slice()[block.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mix_norm = l2(&mix);
        let c = eta * signal / mix_norm;
        for (dst, v) in noise[block].iter_mut().zip(mix) {
            *dst = c * v;
        }
    }
    let noisy = clean
        .as_slice()
        .iter()
        .zip(&noise)
        .map(|(m, e)| (m + e).max(0.0))
        .collect();
    Ok(AdditiveNoise {
        noisy: NonnegMatrix::new(rows, cols, noisy)?,
        noise,
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normalized mixture over one block, redrawn on the next substream while all
/// of it is zero.
fn draw_mixture(
    poisson_mean: Option<&NonnegMatrix>,
    spec: &NoiseSpec,
    channel: u64,
    block: u64,
    range: std::ops::Range<usize>,
) -> Result<Vec<f64>> {
    let n = range.len();
    for attempt in 0..MAX_REDRAWS {
        let key = rng::derive_seed(rng::derive_seed(spec.seed, channel), block * MAX_REDRAWS + attempt);
        let mut mix = vec![0.0; n];
        if spec.poisson {
            let means = &poisson_mean.expect("checked by caller").as_slice()[range.clone()];
            let mut g = rng::stream(key, streams::POISSON);
            let draw: Vec<f64> = means
                .iter()
                .map(|&m| {
                    if m > 0.0 {
                        Poisson::new(m).map(|d| d.sample(&mut g)).unwrap_or(m)
                    } else {
                        0.0
                    }
                })
                .collect();
            add_normalized(&mut mix, &draw);
        }
        if spec.gaussian {
            let mut g = rng::stream(key, streams::GAUSSIAN);
            let draw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
            add_normalized(&mut mix, &draw);
        }
        if l2(&mix) > 0.0 {
            return Ok(mix);
        }
    }
    Err(Error::InvalidData(format!(
        "noise draw stayed identically zero after {MAX_REDRAWS} attempts"
    )))
}

fn add_normalized(acc: &mut [f64], draw: &[f64]) {
    let norm = l2(draw);
    if norm > 0.0 {
        for (a, d) in acc.iter_mut().zip(draw) {
            *a += d / norm;
        }
    }
}

/// `M ⊙ G` with `G` i.i.d. Gamma of shape `1/std²` and scale `std²` (mean 1,
/// standard deviation `std`).
pub fn apply_gamma_noise(m: &NonnegMatrix, std: f64, seed: u64) -> Result<NonnegMatrix> {
    let mut g = rng::stream(seed, streams::GAMMA);
    let factors = gamma_draws(std, m.as_slice().len(), &mut g)?;
    let data = m.as_slice().iter().zip(factors).map(|(v, f)| v * f).collect();
    NonnegMatrix::new(m.rows(), m.cols(), data)
}

/// `n` unit-mean Gamma draws with standard deviation `std`.
pub fn gamma_draws(std: f64, n: usize, rng: &mut impl rand::Rng) -> Result<Vec<f64>> {
    if !(std > 0.0 && std < 1.0) {
        return Err(Error::Parameter(format!("gamma std must lie in (0, 1), got {std}")));
    }
    let var = std * std;
    let dist = Gamma::new(1.0 / var, var).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean() -> NonnegMatrix {
        NonnegMatrix::from_fn(6, 9, |i, j| 1.0 + ((i * 7 + j * 3) % 5) as f64)
    }

    fn ratio(noise: &[f64], clean: &NonnegMatrix) -> f64 {
        l2(noise) / clean.frobenius_norm()
    }

    #[test]
    fn calibration_holds_for_every_mixture() {
        let m = clean();
        let mean = m.scale(10.0);
        for (p, g) in [(true, false), (false, true), (true, true)] {
            let spec = NoiseSpec::additive(25.0, p, g, 3);
            let out = make_additive_noise(&m, Some(&mean), &spec, 0).unwrap();
            assert!((ratio(&out.noise, &m) - noise_level(25.0)).abs() <= 1e-12);
            assert!(out.noisy.as_slice().iter().all(|v| *v >= 0.0));
        }
        assert!((noise_level(25.0) - 0.056234).abs() < 1e-6);
    }

    #[test]
    fn gaussian_only_noise_is_the_normalized_draw() {
        let m = clean();
        let spec = NoiseSpec::additive(20.0, false, true, 8);
        let out = make_additive_noise(&m, None, &spec, 2).unwrap();
        let key = rng::derive_seed(rng::derive_seed(8, 2), 0);
        let mut g = rng::stream(key, streams::GAUSSIAN);
        let draw: Vec<f64> = (0..54).map(|_| StandardNormal.sample(&mut g)).collect();
        let unit = l2(&draw);
        let scale = noise_level(20.0) * m.frobenius_norm();
        for (e, d) in out.noise.iter().zip(&draw) {
            assert!((e / scale - d / unit).abs() <= 1e-14);
        }
    }

    #[test]
    fn infinite_snr_is_a_no_op() {
        let m = clean();
        for spec in [NoiseSpec::noiseless(), NoiseSpec::additive(f64::INFINITY, true, true, 1)] {
            let out = make_additive_noise(&m, None, &spec, 0).unwrap();
            assert_eq!(out.noisy, m);
        }
    }

    #[test]
    fn per_band_calibration() {
        let m = clean();
        let spec = NoiseSpec {
            per_band: true,
            ..NoiseSpec::additive(10.0, false, true, 4)
        };
        let out = make_additive_noise(&m, None, &spec, 0).unwrap();
        for i in 0..m.rows() {
            let band = &out.noise[i * 9..(i + 1) * 9];
            let signal = l2(m.row(i));
            assert!((l2(band) / signal - noise_level(10.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn all_zero_poisson_draws_are_rejected() {
        let m = clean();
        let zero = NonnegMatrix::zeros(6, 9);
        let spec = NoiseSpec::additive(25.0, true, false, 0);
        assert!(make_additive_noise(&m, Some(&zero), &spec, 0).is_err());
        assert!(make_additive_noise(&m, None, &spec, 0).is_err());
    }

    #[test]
    fn channels_and_seeds_are_independent_and_reproducible() {
        let m = clean();
        let spec = NoiseSpec::additive(25.0, false, true, 5);
        let a = make_additive_noise(&m, None, &spec, 0).unwrap();
        let b = make_additive_noise(&m, None, &spec, 0).unwrap();
        let c = make_additive_noise(&m, None, &spec, 1).unwrap();
        assert_eq!(a.noise, b.noise);
        assert_ne!(a.noise, c.noise);
    }

    #[test]
    fn gamma_noise_limits_and_moments() {
        let m = clean();
        let near = apply_gamma_noise(&m, 1e-4, 1).unwrap();
        for (a, b) in near.as_slice().iter().zip(m.as_slice()) {
            assert!(((a - b) / b).abs() <= 1e-3);
        }
        let draws = gamma_draws(0.05, 200_000, &mut rng::stream(2, streams::GAMMA)).unwrap();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 0.005);
        assert!((sd - 0.05).abs() < 0.005);
        assert!(apply_gamma_noise(&m, 1.5, 0).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(NoiseSpec::additive(25.0, false, false, 0).validate().is_err());
        assert!(NoiseSpec::gamma(0.0, 0).validate().is_err());
        assert!(NoiseSpec::additive(f64::NAN, true, true, 0).validate().is_err());
    }
}
