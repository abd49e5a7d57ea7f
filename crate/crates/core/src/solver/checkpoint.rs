//! Checkpoints: a directory holding `W.nmat`, `H.nmat`, `R.nmat`, `S.nmat` (dense)
//! and `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::operators::SparseOperator;

use super::FactorEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub beta: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub rank: usize,
    pub seed: u64,
    pub iterations_l1: usize,
    pub iterations_l2: usize,
    pub objective_trace: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn write_checkpoint(
    dir: impl AsRef<Path>,
    e: &FactorEstimate,
    manifest: &CheckpointManifest,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|err| Error::io(dir, err))?;
    io::write_nmat(dir.join("W.nmat"), &e.w)?;
    io::write_nmat(dir.join("H.nmat"), &e.h)?;
    io::write_nmat(dir.join("R.nmat"), &e.r.to_dense())?;
    io::write_nmat(dir.join("S.nmat"), &e.s.to_dense())?;
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|err| Error::format(dir.join("manifest.json"), err.to_string()))?;
    io::write_atomic(dir.join("manifest.json"), json.as_bytes())
}

/// Reads a checkpoint back. Operator supports are the nonzero entries of the
/// stored dense matrices.
pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<(FactorEstimate, CheckpointManifest)> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|err| Error::io(&manifest_path, err))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)
        .map_err(|err| Error::format(&manifest_path, err.to_string()))?;
    let w = io::read_nmat(dir.join("W.nmat"))?;
    let h = io::read_nmat(dir.join("H.nmat"))?;
    if w.cols() != h.rows() {
        return Err(Error::format(
            dir,
            format!("W is {}x{} but H is {}x{}", w.rows(), w.cols(), h.rows(), h.cols()),
        ));
    }
    let r = SparseOperator::from_dense(&io::read_nmat(dir.join("R.nmat"))?);
    let s = SparseOperator::from_dense(&io::read_nmat(dir.join("S.nmat"))?);
    let e = FactorEstimate {
        w,
        h,
        r,
        s,
        objective_trace: manifest.objective_trace.clone(),
        iterations_l1: manifest.iterations_l1,
        iterations_l2: manifest.iterations_l2,
        warnings: manifest.warnings.clone(),
    };
    Ok((e, manifest))
}
