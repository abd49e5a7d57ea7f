//! Scoring estimates against the references stored with the data, and the CSV
//! tables that carry the scores.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use mrfuse_core::metrics::{self, ImageGeometry, MetricsReport, METRICS_COLUMNS, UIQI_WINDOW};
use mrfuse_core::NonnegMatrix;

use crate::data::Dataset;

pub const METRICS_HEADER: &str = "# mrfuse metrics v1";
pub const AUDIO_METRICS_HEADER: &str = "# mrfuse audio metrics v1";

#[derive(Debug, Clone)]
pub enum Evaluation {
    Image { report: MetricsReport, sam_map: Vec<f64> },
    Audio { snr_h: Vec<f64>, snr_w: Vec<f64> },
}

impl Evaluation {
    /// The score used to pick the best trial; larger is better.
    pub fn score(&self) -> f64 {
        match self {
            Evaluation::Image { report, .. } => -report.sam_deg,
            Evaluation::Audio { snr_w, .. } => metrics::mean_std(snr_w).0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Evaluation::Image { report, .. } => report.csv_row().to_vec(),
            Evaluation::Audio { snr_h, snr_w } => snr_h.iter().chain(snr_w).copied().collect(),
        }
    }
}

/// Per-factor SNRs after aligning each factor to its reference independently.
pub fn factor_snrs(
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    w_ref: &NonnegMatrix,
    h_ref: &NonnegMatrix,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ph = metrics::match_components(h, h_ref)?;
    let pw = metrics::match_columns(w, w_ref)?;
    Ok((metrics::snr_rows(h, h_ref, &ph)?, metrics::snr_cols(w, w_ref, &pw)?))
}

pub fn evaluate(data: &Dataset, w: &NonnegMatrix, h: &NonnegMatrix, runtime_s: f64) -> Result<Evaluation> {
    let k = data.manifest.rank;
    if w.cols() != k || h.rows() != k {
        bail!("estimate has rank {} / {} but the data has rank {k}", w.cols(), h.rows());
    }
    let (snr_h, snr_w) = factor_snrs(w, h, &data.w_ref, &data.h_ref)?;
    match (&data.v, data.manifest.image) {
        (Some(v), Some(img)) => {
            let v_hat = w.matmul(h)?;
            if v_hat.shape() != v.shape() {
                bail!(
                    "estimate reconstructs a {}x{} image but the reference is {}x{}",
                    v_hat.rows(),
                    v_hat.cols(),
                    v.rows(),
                    v.cols()
                );
            }
            let geometry = ImageGeometry {
                height: img.height,
                width: img.width,
                spatial_ratio: img.stride as f64,
                uiqi_window: UIQI_WINDOW,
            };
            let (mut report, sam_map) = MetricsReport::image(v, &v_hat, geometry, runtime_s)?;
            report.per_source_snr_h = snr_h;
            report.per_source_snr_w = snr_w;
            report.permutation = metrics::match_components(h, &data.h_ref)?;
            Ok(Evaluation::Image { report, sam_map })
        }
        _ => Ok(Evaluation::Audio { snr_h, snr_w }),
    }
}

pub fn value_columns(data: &Dataset) -> Vec<String> {
    if data.v.is_some() {
        METRICS_COLUMNS.iter().map(|s| s.to_string()).collect()
    } else {
        let notes = &data.manifest.notes;
        let mut cols = vec!["runtime_s".to_string()];
        cols.extend(notes.iter().map(|n| format!("snr_h_{n}")));
        cols.extend(notes.iter().map(|n| format!("snr_w_{n}")));
        cols
    }
}

/// One scored trial.
#[derive(Debug, Clone)]
pub struct Row {
    pub beta: f64,
    pub trial: usize,
    pub runtime_s: f64,
    pub eval: Evaluation,
}

impl Row {
    fn values(&self) -> Vec<f64> {
        match &self.eval {
            Evaluation::Image { .. } => self.eval.values(),
            Evaluation::Audio { .. } => std::iter::once(self.runtime_s).chain(self.eval.values()).collect(),
        }
    }
}

/// Per-trial rows, then for each β a `summary` row of `mean±std` cells and a
/// `best` row repeating the best trial.
pub fn metrics_table(data: &Dataset, rows: &[Row]) -> String {
    let header = if data.v.is_some() { METRICS_HEADER } else { AUDIO_METRICS_HEADER };
    let mut out = format!("{header}\nkind,beta,trial,{}\n", value_columns(data).join(","));
    let line = |out: &mut String, kind: &str, beta: f64, trial: &str, cells: Vec<String>| {
        writeln!(out, "{kind},{beta},{trial},{}", cells.join(",")).unwrap();
    };
    for r in rows {
        line(&mut out, "trial", r.beta, &r.trial.to_string(), r.values().iter().map(f64::to_string).collect());
    }
    let mut betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    betas.dedup();
    for beta in betas {
        let group: Vec<&Row> = rows.iter().filter(|r| r.beta == beta).collect();
        let width = group[0].values().len();
        let cells = (0..width)
            .map(|c| {
                let col: Vec<f64> = group.iter().map(|r| r.values()[c]).collect();
                let (m, s) = metrics::mean_std(&col);
                format!("{m}±{s}")
            })
            .collect();
        line(&mut out, "summary", beta, "", cells);
        let best = best_row(&group);
        line(&mut out, "best", beta, &best.trial.to_string(), best.values().iter().map(f64::to_string).collect());
    }
    out
}

/// A single scored estimate, without summary rows.
pub fn eval_table(data: &Dataset, row: &Row) -> String {
    let header = if data.v.is_some() { METRICS_HEADER } else { AUDIO_METRICS_HEADER };
    let cells: Vec<String> = row.values().iter().map(f64::to_string).collect();
    format!(
        "{header}\nkind,beta,trial,{}\neval,{},,{}\n",
        value_columns(data).join(","),
        row.beta,
        cells.join(",")
    )
}

/// Highest score; ties go to the lowest trial index.
pub fn best_row<'a>(group: &[&'a Row]) -> &'a Row {
    let mut best = group[0];
    for r in &group[1..] {
        if r.eval.score() > best.eval.score() {
            best = r;
        }
    }
    best
}

/// Scale for SAM maps: the largest angle, or 1° for a perfect map.
pub fn sam_map_max(map: &[f64]) -> f64 {
    let m = map.iter().fold(0.0f64, |m, v| m.max(*v));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}
