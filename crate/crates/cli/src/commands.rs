use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mrfuse_core::io;
use mrfuse_core::metrics;
use mrfuse_core::rng::derive_seed;
use mrfuse_core::solver::checkpoint::{read_checkpoint, write_checkpoint, CheckpointManifest};
use mrfuse_core::solver::baseline_beta_nmf;
use mrfuse_core::{solve, BetaParam, SolverConfig};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode, Overrides};
use crate::data::{self, Dataset};
use crate::eval::{self, Evaluation, Row};

const TRIAL_STREAM: u64 = 2;

/// Initialization seed of a trial. The same for every β so that β values are
/// compared from identical starting points.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(derive_seed(master, TRIAL_STREAM), trial as u64)
}

fn beta_dir(out: &Path, beta: f64) -> PathBuf {
    out.join(format!("beta_{beta}"))
}

fn trial_dir(out: &Path, beta: f64, trial: usize) -> PathBuf {
    beta_dir(out, beta).join(format!("trial_{trial:03}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// The data's own config with the flags applied on top, or an explicit config
/// file (also overridden by flags) when one is given.
fn effective_config(data: &Dataset, config: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => data.manifest.config.clone(),
    };
    if cfg.mode != data.manifest.config.mode {
        bail!("config mode {:?} does not match the data ({:?})", cfg.mode, data.manifest.config.mode);
    }
    cfg.apply(o);
    cfg.validate()?;
    Ok(cfg)
}

pub fn synth(config: Option<&Path>, o: &Overrides) -> Result<PathBuf> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(o);
    let out = cfg.out_dir("data");
    let m = data::synthesize(&cfg, &out)?;
    eprintln!(
        "wrote {} files to {} (X {}x{}, Y {}x{})",
        m.files.len() + 1,
        out.display(),
        m.x_shape.0,
        m.x_shape.1,
        m.y_shape.0,
        m.y_shape.1
    );
    Ok(out)
}

pub fn fuse(data_dir: &Path, config: Option<&Path>, o: &Overrides) -> Result<PathBuf> {
    let data = data::load(data_dir)?;
    let cfg = effective_config(&data, config, o)?;
    let out = cfg.out_dir("fuse");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let base = cfg.solver_config();
    let jobs: Vec<(f64, usize)> = cfg
        .betas
        .iter()
        .flat_map(|&b| (0..cfg.trials).map(move |t| (b, t)))
        .collect();

    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(beta, trial)| -> Result<Row> {
            let run = || -> Result<Row> {
                let p = data.problem(BetaParam::new(beta)?, cfg.lambda)?;
                let solver = SolverConfig {
                    seed: trial_seed(cfg.seed, trial),
                    ..base.clone()
                };
                let start = Instant::now();
                let e = solve(&p, &solver, None)?;
                let runtime_s = start.elapsed().as_secs_f64();
                let manifest = CheckpointManifest {
                    beta,
                    lambda: cfg.lambda,
                    kappa: solver.kappa,
                    rank: p.rank(),
                    seed: solver.seed,
                    iterations_l1: e.iterations_l1,
                    iterations_l2: e.iterations_l2,
                    objective_trace: e.objective_trace.clone(),
                    warnings: e.warnings.clone(),
                };
                write_checkpoint(trial_dir(&out, beta, trial), &e, &manifest)?;
                let eval = eval::evaluate(&data, &e.w, &e.h, runtime_s)?;
                Ok(Row {
                    beta,
                    trial,
                    runtime_s,
                    eval,
                })
            };
            run().with_context(|| format!("beta {beta}, trial {trial}"))
        })
        .collect::<Result<_>>()?;

    for &beta in &cfg.betas {
        let group: Vec<&Row> = rows.iter().filter(|r| r.beta == beta).collect();
        let best = eval::best_row(&group);
        if let (Evaluation::Image { sam_map, .. }, Some(img)) = (&best.eval, data.manifest.image) {
            io::write_pgm(
                beta_dir(&out, beta).join("best_sam.pgm"),
                sam_map,
                img.height,
                img.width,
                eval::sam_map_max(sam_map),
            )?;
        }
    }
    write_text(&out.join("metrics.csv"), &eval::metrics_table(&data, &rows))?;
    eprintln!("{} solves, results in {}", rows.len(), out.join("metrics.csv").display());
    Ok(out)
}

/// Single-observation β-NMF on `X` alone and on `Y` alone.
pub fn baseline(data_dir: &Path, config: Option<&Path>, o: &Overrides) -> Result<PathBuf> {
    let data = data::load(data_dir)?;
    let cfg = effective_config(&data, config, o)?;
    let out = cfg.out_dir("baseline");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let base = baseline_config(&cfg);
    let jobs: Vec<(f64, usize, bool)> = cfg
        .betas
        .iter()
        .flat_map(|&b| (0..cfg.trials).flat_map(move |t| [(b, t, true), (b, t, false)]))
        .collect();
    let k = data.manifest.rank;

    let lines: Vec<String> = jobs
        .par_iter()
        .map(|&(beta, trial, on_x)| -> Result<String> {
            let run = || -> Result<String> {
                let (m, name) = if on_x { (&data.x, "X") } else { (&data.y, "Y") };
                let solver = SolverConfig {
                    seed: trial_seed(cfg.seed, trial),
                    ..base.clone()
                };
                let start = Instant::now();
                let b = baseline_beta_nmf(m, k, BetaParam::new(beta)?, &solver)?;
                let runtime_s = start.elapsed().as_secs_f64();
                let dir = trial_dir(&out, beta, trial).join(name);
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                io::write_nmat(dir.join("W.nmat"), &b.w)?;
                io::write_nmat(dir.join("H.nmat"), &b.h)?;
                // X keeps the fine columns (H), Y the fine rows (W)
                let snrs = if on_x {
                    let perm = metrics::match_components(&b.h, &data.h_ref)?;
                    metrics::snr_rows(&b.h, &data.h_ref, &perm)?
                } else {
                    let perm = metrics::match_columns(&b.w, &data.w_ref)?;
                    metrics::snr_cols(&b.w, &data.w_ref, &perm)?
                };
                let objective = b.objective_trace.last().copied().unwrap_or(f64::NAN);
                Ok(format!(
                    "{beta},{trial},{name},{},{objective},{runtime_s},{}",
                    b.iterations,
                    metrics::mean_std(&snrs).0
                ))
            };
            run().with_context(|| format!("beta {beta}, trial {trial}"))
        })
        .collect::<Result<_>>()?;

    let mut text = String::from("# mrfuse baseline v1\nbeta,trial,input,iterations,objective,runtime_s,mean_snr_db\n");
    for l in lines {
        writeln!(text, "{l}").unwrap();
    }
    write_text(&out.join("baseline.csv"), &text)?;
    eprintln!("results in {}", out.join("baseline.csv").display());
    Ok(out)
}

/// Baselines get the same total sweep budget as the coupled solver.
fn baseline_config(cfg: &ExperimentConfig) -> SolverConfig {
    let s = cfg.solver_config();
    SolverConfig {
        max_iter_l1: s.max_iter_l1 + s.max_iter_l2,
        max_iter_l2: 0,
        ..s
    }
}

pub fn eval(estimate: &Path, data_dir: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let data = data::load(data_dir)?;
    let (e, ckpt) = read_checkpoint(estimate).with_context(|| format!("reading estimate {}", estimate.display()))?;
    let result = eval::evaluate(&data, &e.w, &e.h, 0.0)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| estimate.to_path_buf());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    if let (Evaluation::Image { sam_map, .. }, Some(img)) = (&result, data.manifest.image) {
        io::write_pgm(out.join("sam_map.pgm"), sam_map, img.height, img.width, eval::sam_map_max(sam_map))?;
    }
    let row = Row {
        beta: ckpt.beta,
        trial: 0,
        runtime_s: 0.0,
        eval: result,
    };
    write_text(&out.join("eval.csv"), &eval::eval_table(&data, &row))?;
    eprintln!("results in {}", out.join("eval.csv").display());
    Ok(out)
}

/// Per-note SNRs of a coupled estimate next to those of the single-observation
/// baselines (`H` from `X` alone, `W` from `Y` alone), over `trials` baseline
/// initializations.
pub fn audio_report(data_dir: &Path, estimate: &Path, o: &Overrides) -> Result<PathBuf> {
    let data = data::load(data_dir)?;
    if data.manifest.config.mode != Mode::Audio {
        bail!("{} holds fusion data; audio-report needs audio data", data_dir.display());
    }
    let cfg = effective_config(&data, None, o)?;
    let (e, ckpt) = read_checkpoint(estimate).with_context(|| format!("reading estimate {}", estimate.display()))?;
    let beta = BetaParam::new(ckpt.beta)?;
    let (snr_h, snr_w) = eval::factor_snrs(&e.w, &e.h, &data.w_ref, &data.h_ref)?;
    let base = baseline_config(&cfg);
    let k = data.manifest.rank;

    let per_trial: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(Vec<f64>, Vec<f64>)> {
            let solver = SolverConfig {
                seed: trial_seed(cfg.seed, t),
                ..base.clone()
            };
            let bx = baseline_beta_nmf(&data.x, k, beta, &solver)?;
            let by = baseline_beta_nmf(&data.y, k, beta, &solver)?;
            let ph = metrics::match_components(&bx.h, &data.h_ref)?;
            let pw = metrics::match_columns(&by.w, &data.w_ref)?;
            Ok((
                metrics::snr_rows(&bx.h, &data.h_ref, &ph)?,
                metrics::snr_cols(&by.w, &data.w_ref, &pw)?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut text = String::from(
        "# mrfuse audio report v1\nnote,snr_h_db,snr_h_x_mean_db,snr_h_x_std_db,snr_h_x_best_db,\
         snr_w_db,snr_w_y_mean_db,snr_w_y_std_db,snr_w_y_best_db\n",
    );
    for (i, note) in data.manifest.notes.iter().enumerate() {
        let hx: Vec<f64> = per_trial.iter().map(|p| p.0[i]).collect();
        let wy: Vec<f64> = per_trial.iter().map(|p| p.1[i]).collect();
        let (hm, hs) = metrics::mean_std(&hx);
        let (wm, ws) = metrics::mean_std(&wy);
        let best = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
        writeln!(
            text,
            "{note},{},{hm},{hs},{},{},{wm},{ws},{}",
            snr_h[i],
            best(&hx),
            snr_w[i],
            best(&wy)
        )
        .unwrap();
    }
    let out = cfg.out.clone().unwrap_or_else(|| estimate.to_path_buf());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("audio_report.csv"), &text)?;
    eprintln!("results in {}", out.join("audio_report.csv").display());
    Ok(out)
}
