//! Synthetic audio scenes: damped harmonic notes, magnitude spectrograms and
//! the two-resolution spectrogram pair with its oracle factors.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::betadiv::BetaParam;
use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::operators::{build_banded, build_banded_transposed, SparseOperator};
use crate::solver::{baseline_beta_nmf, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub name: String,
    pub frequency: f64,
    /// `[start, end)` in seconds. Each interval restarts the decay envelope.
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioScene {
    pub sample_rate: u32,
    pub duration: f64,
    pub harmonics: usize,
    /// Exponential decay rate of each note, 1/s.
    pub decay: f64,
    pub notes: Vec<Note>,
}

/// Equal temperament, A4 = 440 Hz. Accepts names like `C4`, `F#3`, `Bb5`.
pub fn note_frequency(name: &str) -> Result<f64> {
    let bad = || Error::Parameter(format!("unrecognized note name {name:?}"));
    let mut chars = name.chars();
    let letter = chars.next().ok_or_else(bad)?;
    let base = match letter.to_ascii_uppercase() {
        'C' => -9,
        'D' => -7,
        'E' => -5,
        'F' => -4,
        'G' => -2,
        'A' => 0,
        'B' => 2,
        _ => return Err(bad()),
    };
    let rest: String = chars.collect();
    let (shift, octave) = if let Some(o) = rest.strip_prefix('#') {
        (1, o)
    } else if let Some(o) = rest.strip_prefix('b') {
        (-1, o)
    } else {
        (0, rest.as_str())
    };
    let octave: i32 = octave.parse().map_err(|_| bad())?;
    let semitones = base + shift + 12 * (octave - 4);
    Ok(440.0 * 2f64.powf(semitones as f64 / 12.0))
}

impl AudioScene {
    /// Three notes (E4, D4, C4) in the rhythm of a well-known nursery tune, 5 s.
    pub fn three_note_melody() -> Self {
        let q = 0.625;
        let seq = [("E4", 0.0, q), ("D4", q, 2.0 * q), ("C4", 2.0 * q, 3.0 * q), ("D4", 3.0 * q, 4.0 * q),
            ("E4", 4.0 * q, 5.0 * q), ("E4", 5.0 * q, 6.0 * q), ("E4", 6.0 * q, 8.0 * q)];
        Self::from_sequence(&seq, 5.0)
    }

    /// Four notes (D4, F4, A4, C5): a chord, then every pair in turn.
    pub fn chord_then_pairs() -> Self {
        let names = ["D4", "F4", "A4", "C5"];
        let bar = 1.0;
        let mut seq = vec![];
        for n in names {
            seq.push((n, 0.0, bar));
        }
        let mut t = bar;
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                seq.push((names[i], t, t + bar));
                seq.push((names[j], t, t + bar));
                t += bar;
            }
        }
        Self::from_sequence(&seq, t)
    }

    fn from_sequence(seq: &[(&str, f64, f64)], duration: f64) -> Self {
        let mut notes: Vec<Note> = Vec::new();
        for &(name, start, end) in seq {
            match notes.iter_mut().find(|n| n.name == name) {
                Some(n) => n.intervals.push((start, end)),
                None => notes.push(Note {
                    name: name.to_string(),
                    frequency: note_frequency(name).expect("preset note names are valid"),
                    intervals: vec![(start, end)],
                }),
            }
        }
        Self {
            sample_rate: 44_100,
            duration,
            harmonics: 8,
            decay: 2.0,
            notes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Parameter("sample rate and duration must be positive".into()));
        }
        if self.harmonics == 0 || self.notes.is_empty() {
            return Err(Error::Parameter("a scene needs at least one note and one harmonic".into()));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::Parameter(format!("decay must be >= 0, got {}", self.decay)));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for n in &self.notes {
            if !(n.frequency > 0.0) || n.frequency * self.harmonics as f64 >= nyquist {
                return Err(Error::Parameter(format!(
                    "note {} at {} Hz with {} harmonics exceeds the Nyquist frequency {nyquist} Hz",
                    n.name, n.frequency, self.harmonics
                )));
            }
            for &(a, b) in &n.intervals {
                if !(0.0 <= a && a < b && b <= self.duration) {
                    return Err(Error::Parameter(format!(
                        "interval [{a}, {b}) of note {} is outside [0, {}]",
                        n.name, self.duration
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    /// The scene reduced to note `index` alone.
    pub fn isolate(&self, index: usize) -> Self {
        Self {
            notes: vec![self.notes[index].clone()],
            ..self.clone()
        }
    }
}

/// `Σ_h (1/h)·exp(-decay·t_rel)·sin(2π·h·f0·t)` over every active note interval.
pub fn synth_audio(scene: &AudioScene) -> Result<Vec<f64>> {
    scene.validate()?;
    let fs = scene.sample_rate as f64;
    let mut out = vec![0.0; scene.samples()];
    for note in &scene.notes {
        for &(start, end) in &note.intervals {
            let first = (start * fs).round() as usize;
            let last = ((end * fs).round() as usize).min(out.len());
            for (i, sample) in out.iter_mut().enumerate().take(last).skip(first) {
                let t = i as f64 / fs;
                let env = (-scene.decay * (t - start)).exp();
                let mut v = 0.0;
                for h in 1..=scene.harmonics {
                    let hf = h as f64;
                    v += (2.0 * PI * hf * note.frequency * t).sin() / hf;
                }
                *sample += env * v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    #[default]
    Hann,
    Rectangular,
}

impl WindowFn {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; len],
            // periodic Hann
            WindowFn::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Magnitude STFT, `window_len/2 + 1` rows and one column per complete frame.
pub fn spectrogram(
    signal: &[f64],
    window_len: usize,
    hop: usize,
    window: WindowFn,
) -> Result<NonnegMatrix> {
    if !window_len.is_power_of_two() || window_len < 2 {
        return Err(Error::Parameter(format!(
            "window length must be a power of two, got {window_len}"
        )));
    }
    if hop == 0 {
        return Err(Error::Parameter("hop must be >= 1".into()));
    }
    if signal.len() < window_len {
        return Err(Error::InvalidData(format!(
            "signal of {} samples is shorter than one window of {window_len}",
            signal.len()
        )));
    }
    let frames = (signal.len() - window_len) / hop + 1;
    let bins = window_len / 2 + 1;
    let coeffs = window.coefficients(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_len);
    let mut out = NonnegMatrix::zeros(bins, frames);
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    for t in 0..frames {
        let seg = &signal[t * hop..t * hop + window_len];
        for ((b, s), w) in buf.iter_mut().zip(seg).zip(&coeffs) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        for (f, c) in buf.iter().take(bins).enumerate() {
            out.set(f, t, c.norm());
        }
    }
    Ok(out)
}

/// Window lengths and operator overlap for a two-resolution spectrogram pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioSetup {
    /// Short window: fine time, coarse frequency (`X`).
    pub short_window: usize,
    /// Long window: fine frequency, coarse time (`Y`).
    pub long_window: usize,
    pub overlap: usize,
    pub window: WindowFn,
}

impl Default for AudioSetup {
    fn default() -> Self {
        Self {
            short_window: 1024,
            long_window: 4096,
            overlap: 2,
            window: WindowFn::Hann,
        }
    }
}

impl AudioSetup {
    pub fn ratio(&self) -> Result<usize> {
        let (s, l) = (self.short_window, self.long_window);
        if s == 0 || l <= s || l % s != 0 {
            return Err(Error::Parameter(format!(
                "long window {l} must be a multiple of the short window {s}"
            )));
        }
        Ok(l / s)
    }

    /// `(F_low, F, N, N_low)` for a signal of `samples` samples.
    fn dims(&self, samples: usize) -> Result<(usize, usize, usize, usize)> {
        let d = self.ratio()?;
        let n_low = samples / self.long_window;
        if n_low == 0 {
            return Err(Error::InvalidData(format!(
                "signal of {samples} samples is shorter than one long window"
            )));
        }
        Ok((self.short_window / 2, self.long_window / 2, d * n_low, n_low))
    }

    /// Short- and long-window spectrograms, cropped to `F_low x N` and `F x N_low`.
    /// The Nyquist row is dropped so `F = d·F_low`, and trailing short frames are
    /// dropped so `N = d·N_low`.
    pub fn spectrograms(&self, signal: &[f64]) -> Result<(NonnegMatrix, NonnegMatrix)> {
        let (f_low, f, n, n_low) = self.dims(signal.len())?;
        let x = spectrogram(signal, self.short_window, self.short_window, self.window)?
            .truncate(f_low, n)?;
        let y = spectrogram(signal, self.long_window, self.long_window, self.window)?
            .truncate(f, n_low)?;
        Ok((x, y))
    }
}

/// A two-resolution spectrogram pair with banded operators and oracle factors.
#[derive(Debug, Clone)]
pub struct AudioPair {
    pub signal: Vec<f64>,
    /// `F_low x N` (short window).
    pub x: NonnegMatrix,
    /// `F x N_low` (long window).
    pub y: NonnegMatrix,
    pub r: SparseOperator,
    pub s: SparseOperator,
    /// `F x K`, one column-L1-normalized spectral template per note.
    pub w_oracle: NonnegMatrix,
    /// `K x N`, one activation row per note.
    pub h_oracle: NonnegMatrix,
    pub note_names: Vec<String>,
}

pub fn build_audio_pair(
    scene: &AudioScene,
    setup: &AudioSetup,
    beta: BetaParam,
) -> Result<AudioPair> {
    let signal = synth_audio(scene)?;
    let (x, y) = setup.spectrograms(&signal)?;
    let d = setup.ratio()?;
    let r = build_banded(y.rows(), d, setup.overlap)?;
    let s = build_banded_transposed(x.cols(), d, setup.overlap)?;
    let (w_oracle, h_oracle) = oracle_factors(scene, setup, beta)?;
    Ok(AudioPair {
        signal,
        x,
        y,
        r,
        s,
        w_oracle,
        h_oracle,
        note_names: scene.notes.iter().map(|n| n.name.clone()).collect(),
    })
}

/// Oracle factors from rank-1 factorizations of each isolated note: spectral
/// templates from long-window spectrograms, activations from short-window ones.
pub fn oracle_factors(
    scene: &AudioScene,
    setup: &AudioSetup,
    beta: BetaParam,
) -> Result<(NonnegMatrix, NonnegMatrix)> {
    scene.validate()?;
    let (_, f, n, _) = setup.dims(scene.samples())?;
    let k = scene.notes.len();
    let mut w = NonnegMatrix::zeros(f, k);
    let mut h = NonnegMatrix::zeros(k, n);
    let cfg = SolverConfig {
        max_iter_l1: 200,
        kappa: 1e-10,
        ..SolverConfig::default()
    };
    for i in 0..k {
        let isolated = synth_audio(&scene.isolate(i))?;
        let (xi, yi) = setup.spectrograms(&isolated)?;
        if yi.sum() == 0.0 || xi.sum() == 0.0 {
            return Err(Error::InvalidData(format!(
                "note {} is silent in the scene",
                scene.notes[i].name
            )));
        }
        let wy = baseline_beta_nmf(&yi, 1, beta, &cfg)?;
        let total = wy.w.sum();
        for row in 0..f {
            w.set(row, i, wy.w.get(row, 0) / total);
        }
        let hx = baseline_beta_nmf(&xi, 1, beta, &cfg)?;
        for col in 0..n {
            h.set(i, col, hx.h.get(0, col));
        }
    }
    Ok((w, h))
}
