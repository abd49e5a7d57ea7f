//! Quality measures between a reference and an estimate.
//!
//! Reconstruction metrics treat matrices as `bands x pixels` (rows are spectral
//! bands or frequencies, columns are pixels or frames). Factor metrics compare
//! `H` rows and `W` columns after L1 normalization and component matching.

pub mod assignment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;

/// Cap for infinite SNR/PSNR values.
pub const DB_CAP: f64 = 300.0;

/// Column order of [`MetricsReport::csv_row`].
pub const METRICS_COLUMNS: [&str; 6] = ["runtime_s", "psnr_db", "rmse", "ergas", "sam_deg", "uiqi"];

/// Default UIQI window side.
pub const UIQI_WINDOW: usize = 32;

fn capped_db(v: f64) -> f64 {
    if v > DB_CAP {
        DB_CAP
    } else {
        v
    }
}

fn same_shape(op: &'static str, a: &NonnegMatrix, b: &NonnegMatrix) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(op, a.shape(), b.shape()))
    }
}

fn l1_normalized(v: &[f64]) -> Option<Vec<f64>> {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    (s > 0.0).then(|| v.iter().map(|x| x / s).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Matches rows of `h` to rows of `h_ref` by minimum total squared distance
/// between L1-normalized rows. `perm[k]` is the row of `h` matched to row `k`
/// of `h_ref`. All-zero rows compare as zero vectors.
pub fn match_components(h: &NonnegMatrix, h_ref: &NonnegMatrix) -> Result<Vec<usize>> {
    if h.rows() != h_ref.rows() || h.cols() != h_ref.cols() {
        return Err(Error::shape("match_components", h.shape(), h_ref.shape()));
    }
    let k = h.rows();
    let norm = |m: &NonnegMatrix, i: usize| l1_normalized(m.row(i)).unwrap_or_else(|| vec![0.0; m.cols()]);
    let ours: Vec<Vec<f64>> = (0..k).map(|i| norm(h, i)).collect();
    let refs: Vec<Vec<f64>> = (0..k).map(|i| norm(h_ref, i)).collect();
    let cost: Vec<Vec<f64>> = refs
        .iter()
        .map(|r| ours.iter().map(|o| sq_dist(r, o)).collect())
        .collect();
    Ok(assignment::min_cost_assignment(&cost))
}

/// Column version of [`match_components`], for `W` against `W_ref`.
pub fn match_columns(w: &NonnegMatrix, w_ref: &NonnegMatrix) -> Result<Vec<usize>> {
    match_components(&w.transpose(), &w_ref.transpose())
}

fn check_perm(perm: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Parameter(format!("{perm:?} is not a permutation of 0..{k}")));
    }
    Ok(())
}

/// `20·log10(‖ā‖ / ‖ā - b̄‖)` with L1-normalized vectors. Capped at [`DB_CAP`];
/// an all-zero vector gives `-inf`.
pub fn snr_db(estimate: &[f64], reference: &[f64]) -> f64 {
    match (l1_normalized(estimate), l1_normalized(reference)) {
        (Some(a), Some(b)) => {
            let err = sq_dist(&a, &b).sqrt();
            let sig = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if err == 0.0 {
                DB_CAP
            } else {
                capped_db(20.0 * (sig / err).log10())
            }
        }
        _ => f64::NEG_INFINITY,
    }
}

/// Per-row SNR of `h` against `h_ref`, row `perm[k]` of `h` against row `k`.
pub fn snr_rows(h: &NonnegMatrix, h_ref: &NonnegMatrix, perm: &[usize]) -> Result<Vec<f64>> {
    same_shape("snr_rows", h, h_ref)?;
    check_perm(perm, h.rows())?;
    Ok(perm
        .iter()
        .enumerate()
        .map(|(k, &p)| snr_db(h.row(p), h_ref.row(k)))
        .collect())
}

/// Per-column SNR of `w` against `w_ref`, column `perm[k]` of `w` against column `k`.
pub fn snr_cols(w: &NonnegMatrix, w_ref: &NonnegMatrix, perm: &[usize]) -> Result<Vec<f64>> {
    snr_rows(&w.transpose(), &w_ref.transpose(), perm)
}

/// `sqrt(‖V - V̂‖² / (F·N))`.
pub fn rmse(v: &NonnegMatrix, v_hat: &NonnegMatrix) -> Result<f64> {
    same_shape("rmse", v, v_hat)?;
    Ok((sq_dist(v.as_slice(), v_hat.as_slice()) / v.as_slice().len() as f64).sqrt())
}

/// RMSE of every band (row).
pub fn band_rmse(v: &NonnegMatrix, v_hat: &NonnegMatrix) -> Result<Vec<f64>> {
    same_shape("band_rmse", v, v_hat)?;
    Ok((0..v.rows())
        .map(|i| (sq_dist(v.row(i), v_hat.row(i)) / v.cols() as f64).sqrt())
        .collect())
}

/// Mean over bands of `10·log10(max(V_band)² / MSE_band)`, each capped at [`DB_CAP`].
pub fn psnr(v: &NonnegMatrix, v_hat: &NonnegMatrix) -> Result<f64> {
    let rm = band_rmse(v, v_hat)?;
    let total: f64 = rm
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let peak = v.row(i).iter().cloned().fold(0.0, f64::max);
            if *r == 0.0 {
                DB_CAP
            } else {
                capped_db(10.0 * (peak * peak / (r * r)).log10())
            }
        })
        .sum();
    Ok(total / v.rows() as f64)
}

/// `100/ratio · sqrt(mean_f (RMSE_f / μ_f)²)` with `μ_f` the band mean of `V`.
/// Bands with zero mean and zero error contribute zero.
pub fn ergas(v: &NonnegMatrix, v_hat: &NonnegMatrix, spatial_ratio: f64) -> Result<f64> {
    if !(spatial_ratio > 0.0) {
        return Err(Error::Parameter(format!("spatial ratio must be positive, got {spatial_ratio}")));
    }
    let rm = band_rmse(v, v_hat)?;
    Ok(ergas_from_band_rmse(v, &rm, spatial_ratio))
}

/// ERGAS from precomputed per-band RMSE values.
pub fn ergas_from_band_rmse(v: &NonnegMatrix, band_rmse: &[f64], spatial_ratio: f64) -> f64 {
    let mean_sq: f64 = band_rmse
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mu = v.row(i).iter().sum::<f64>() / v.cols() as f64;
            if *r == 0.0 {
                0.0
            } else {
                (r / mu).powi(2)
            }
        })
        .sum::<f64>()
        / band_rmse.len() as f64;
    100.0 / spatial_ratio * mean_sq.sqrt()
}

/// Per-pixel spectral angles.
#[derive(Debug, Clone)]
pub struct SamResult {
    /// Mean angle in degrees over pixels where both spectra are nonzero.
    pub mean_deg: f64,
    /// Angle of every pixel in degrees; zero where a spectrum vanishes.
    pub map: Vec<f64>,
}

/// Spectral angle between columns of `v` and `v_hat`, computed as
/// `2·atan2(‖â - b̂‖, ‖â + b̂‖)` on unit vectors, which stays accurate near zero.
pub fn sam(v: &NonnegMatrix, v_hat: &NonnegMatrix) -> Result<SamResult> {
    same_shape("sam", v, v_hat)?;
    let (f, n) = v.shape();
    let mut na = vec![0.0; n];
    let mut nb = vec![0.0; n];
    for i in 0..f {
        for (j, (a, b)) in v.row(i).iter().zip(v_hat.row(i)).enumerate() {
            na[j] += a * a;
            nb[j] += b * b;
        }
    }
    for x in na.iter_mut().chain(nb.iter_mut()) {
        *x = x.sqrt();
    }
    let mut diff = vec![0.0; n];
    let mut sum = vec![0.0; n];
    for i in 0..f {
        for (j, (a, b)) in v.row(i).iter().zip(v_hat.row(i)).enumerate() {
            if na[j] > 0.0 && nb[j] > 0.0 {
                let (ua, ub) = (a / na[j], b / nb[j]);
                diff[j] += (ua - ub) * (ua - ub);
                sum[j] += (ua + ub) * (ua + ub);
            }
        }
    }
    let mut map = vec![0.0; n];
    let mut total = 0.0;
    let mut count = 0usize;
    for j in 0..n {
        if na[j] > 0.0 && nb[j] > 0.0 {
            map[j] = (2.0 * diff[j].sqrt().atan2(sum[j].sqrt())).to_degrees();
            total += map[j];
            count += 1;
        }
    }
    let mean_deg = if count == 0 { 0.0 } else { total / count as f64 };
    Ok(SamResult { mean_deg, map })
}

/// Universal image quality index of one band stored row-major as a
/// `height x width` image, averaged over all `window x window` positions
/// (window clamped to the image). Windows with a zero denominator are skipped;
/// `None` when every window is.
pub fn uiqi_band(a: &[f64], b: &[f64], height: usize, width: usize, window: usize) -> Option<f64> {
    assert_eq!(a.len(), height * width);
    assert_eq!(b.len(), height * width);
    let win = window.min(height).min(width).max(1);
    let integral = |f: &dyn Fn(usize) -> f64| {
        let mut s = vec![0.0; (height + 1) * (width + 1)];
        for r in 0..height {
            let mut row = 0.0;
            for c in 0..width {
                row += f(r * width + c);
                s[(r + 1) * (width + 1) + c + 1] = s[r * (width + 1) + c + 1] + row;
            }
        }
        s
    };
    let sa = integral(&|i| a[i]);
    let sb = integral(&|i| b[i]);
    let saa = integral(&|i| a[i] * a[i]);
    let sbb = integral(&|i| b[i] * b[i]);
    let sab = integral(&|i| a[i] * b[i]);
    let rect = |s: &[f64], r: usize, c: usize| {
        let w1 = width + 1;
        s[(r + win) * w1 + c + win] - s[r * w1 + c + win] - s[(r + win) * w1 + c] + s[r * w1 + c]
    };
    let n = (win * win) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=height - win {
        for c in 0..=width - win {
            let ma = rect(&sa, r, c) / n;
            let mb = rect(&sb, r, c) / n;
            let va = (rect(&saa, r, c) / n - ma * ma).max(0.0);
            let vb = (rect(&sbb, r, c) / n - mb * mb).max(0.0);
            let cov = rect(&sab, r, c) / n - ma * mb;
            let den = (va + vb) * (ma * ma + mb * mb);
            if den > 0.0 {
                total += 4.0 * cov * ma * mb / den;
                count += 1;
            }
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Band-averaged UIQI; each row of `v` is a `height x width` image. Bands where
/// every window is degenerate are left out; if all are, the result is 1 for
/// identical inputs and 0 otherwise.
pub fn uiqi(
    v: &NonnegMatrix,
    v_hat: &NonnegMatrix,
    height: usize,
    width: usize,
    window: usize,
) -> Result<f64> {
    same_shape("uiqi", v, v_hat)?;
    if height * width != v.cols() {
        return Err(Error::shape("uiqi image", (height, width), v.shape()));
    }
    if window < 2 {
        return Err(Error::Parameter(format!("uiqi window must be >= 2, got {window}")));
    }
    let scores: Vec<f64> = (0..v.rows())
        .filter_map(|i| uiqi_band(v.row(i), v_hat.row(i), height, width, window))
        .collect();
    if scores.is_empty() {
        return Ok(if v == v_hat { 1.0 } else { 0.0 });
    }
    Ok((scores.iter().sum::<f64>() / scores.len() as f64).clamp(-1.0, 1.0))
}

/// One row of the results tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runtime_s: f64,
    pub psnr_db: f64,
    pub rmse: f64,
    pub ergas: f64,
    pub sam_deg: f64,
    pub uiqi: f64,
    #[serde(default)]
    pub per_source_snr_h: Vec<f64>,
    #[serde(default)]
    pub per_source_snr_w: Vec<f64>,
    #[serde(default)]
    pub permutation: Vec<usize>,
}

/// Image geometry and ERGAS ratio used by [`MetricsReport::image`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGeometry {
    pub height: usize,
    pub width: usize,
    pub spatial_ratio: f64,
    pub uiqi_window: usize,
}

impl MetricsReport {
    /// Reconstruction metrics of `v_hat` against `v`, plus the SAM map.
    pub fn image(
        v: &NonnegMatrix,
        v_hat: &NonnegMatrix,
        geometry: ImageGeometry,
        runtime_s: f64,
    ) -> Result<(Self, Vec<f64>)> {
        let s = sam(v, v_hat)?;
        let report = Self {
            runtime_s,
            psnr_db: psnr(v, v_hat)?,
            rmse: rmse(v, v_hat)?,
            ergas: ergas(v, v_hat, geometry.spatial_ratio)?,
            sam_deg: s.mean_deg,
            uiqi: uiqi(v, v_hat, geometry.height, geometry.width, geometry.uiqi_window)?,
            ..Self::default()
        };
        Ok((report, s.map))
    }

    /// Values in [`METRICS_COLUMNS`] order.
    pub fn csv_row(&self) -> [f64; 6] {
        [self.runtime_s, self.psnr_db, self.rmse, self.ergas, self.sam_deg, self.uiqi]
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Median (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
