//! Downsampling operators.
//!
//! Both the first-dimension operator `R` (high → low frequency/spectral resolution)
//! and the second-dimension operator `S` (high → low temporal/spatial resolution)
//! are stored as a [`SparseOperator`]: a compressed-row nonnegative matrix whose
//! sparsity pattern is fixed at construction. Multiplicative updates only ever
//! rescale the stored weights, so the pattern is preserved for the lifetime of
//! the operator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;

/// How an operator was built. Informational only; products ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    /// Weighted means over blocks of `ratio` indices widened by `overlap` on each side.
    Banded { ratio: usize, overlap: usize },
    /// Transpose of a banded operator, used on the second dimension.
    BandedTransposed { ratio: usize, overlap: usize },
    /// Truncated Gaussian blur followed by decimation of a vectorized image.
    GaussianDecimation {
        height: usize,
        width: usize,
        kernel: usize,
        sigma: f64,
        stride: usize,
    },
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    structure: Structure,
}

impl SparseOperator {
    /// Builds from per-row `(column, weight)` lists. Columns within a row must be
    /// strictly increasing.
    pub fn from_row_lists(
        cols: usize,
        rows: Vec<Vec<(usize, f64)>>,
        structure: Structure,
    ) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 || cols == 0 {
            return Err(Error::InvalidData(format!(
                "operator dimensions must be positive, got {n_rows}x{cols}"
            )));
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut last = None;
            for (j, w) in row {
                if j >= cols || last.is_some_and(|l| j <= l) {
                    return Err(Error::InvalidData(format!(
                        "row {i}: column {j} out of order or out of range"
                    )));
                }
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidData(format!("row {i}: weight {w} is invalid")));
                }
                last = Some(j);
                col_idx.push(j);
                values.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: n_rows,
            cols,
            row_ptr,
            col_idx,
            values,
            structure,
        })
    }

    /// Support = the nonzero entries of `m`.
    pub fn from_dense(m: &NonnegMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        Self::from_row_lists(m.cols(), rows, Structure::General).expect("dense matrix is valid")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_dense(&NonnegMatrix::identity(n))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, weight)` pairs of row `i`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_support(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// All stored entries as `(row, column, weight)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row_entries(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row_entries(i).map(|(_, w)| w).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, j, w) in self.entries() {
            sums[j] += w;
        }
        sums
    }

    pub fn total_weight(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Replaces every stored weight by `f(row, col, weight)`. The support is unchanged.
    pub(crate) fn update_weights(&mut self, mut f: impl FnMut(usize, usize, f64) -> f64) {
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                self.values[p] = f(i, self.col_idx[p], self.values[p]);
            }
        }
    }

    pub(crate) fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut lists = vec![Vec::new(); self.cols];
        for (i, j, w) in self.entries() {
            lists[j].push((i, w));
        }
        let structure = match self.structure {
            Structure::Banded { ratio, overlap } => Structure::BandedTransposed { ratio, overlap },
            Structure::BandedTransposed { ratio, overlap } => Structure::Banded { ratio, overlap },
            other => other,
        };
        Self::from_row_lists(self.rows, lists, structure).expect("transpose of a valid operator")
    }

    pub fn to_dense(&self) -> NonnegMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for (i, j, w) in self.entries() {
            data[i * self.cols + j] = w;
        }
        NonnegMatrix::from_raw(self.rows, self.cols, data)
    }

    /// 0/1 matrix marking the support. Zero weights that are stored still count.
    pub fn support_mask(&self) -> NonnegMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for (i, j, _) in self.entries() {
            data[i * self.cols + j] = 1.0;
        }
        NonnegMatrix::from_raw(self.rows, self.cols, data)
    }

    /// `Op * M`.
    pub fn apply(&self, m: &NonnegMatrix) -> Result<NonnegMatrix> {
        if self.cols != m.rows() {
            return Err(Error::shape("operator apply", self.shape(), m.shape()));
        }
        let n = m.cols();
        let mut out = vec![0.0; self.rows * n];
        for i in 0..self.rows {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (j, w) in self.row_entries(i) {
                for (o, v) in out_row.iter_mut().zip(m.row(j)) {
                    *o += w * v;
                }
            }
        }
        Ok(NonnegMatrix::from_raw(self.rows, n, out))
    }

    /// `Op^T * M`.
    pub fn apply_transposed(&self, m: &NonnegMatrix) -> Result<NonnegMatrix> {
        if self.rows != m.rows() {
            return Err(Error::shape("operator apply_transposed", self.shape(), m.shape()));
        }
        let n = m.cols();
        let mut out = vec![0.0; self.cols * n];
        for i in 0..self.rows {
            let src = m.row(i);
            for (j, w) in self.row_entries(i) {
                for (o, v) in out[j * n..(j + 1) * n].iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        Ok(NonnegMatrix::from_raw(self.cols, n, out))
    }

    /// `M * Op`.
    pub fn right_apply(&self, m: &NonnegMatrix) -> Result<NonnegMatrix> {
        if m.cols() != self.rows {
            return Err(Error::shape("operator right_apply", m.shape(), self.shape()));
        }
        let n = self.cols;
        let mut out = vec![0.0; m.rows() * n];
        for r in 0..m.rows() {
            let src = m.row(r);
            let out_row = &mut out[r * n..(r + 1) * n];
            for (i, &a) in src.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, w) in self.row_entries(i) {
                    out_row[j] += a * w;
                }
            }
        }
        Ok(NonnegMatrix::from_raw(m.rows(), n, out))
    }

    /// `M * Op^T`.
    pub fn right_apply_transposed(&self, m: &NonnegMatrix) -> Result<NonnegMatrix> {
        if m.cols() != self.cols {
            return Err(Error::shape(
                "operator right_apply_transposed",
                m.shape(),
                self.shape(),
            ));
        }
        let n = self.rows;
        let mut out = vec![0.0; m.rows() * n];
        for r in 0..m.rows() {
            let src = m.row(r);
            let out_row = &mut out[r * n..(r + 1) * n];
            for (i, o) in out_row.iter_mut().enumerate() {
                *o = self.row_entries(i).map(|(j, w)| src[j] * w).sum();
            }
        }
        Ok(NonnegMatrix::from_raw(m.rows(), n, out))
    }
}

/// Banded weighted-mean operator of shape `(n_high / ratio) x n_high`.
///
/// Row `r` covers the core block `[r·ratio, (r+1)·ratio)` widened by `overlap`
/// indices on each side and clipped at the boundaries. Weights start uniform so
/// every row sums to one.
pub fn build_banded(n_high: usize, ratio: usize, overlap: usize) -> Result<SparseOperator> {
    if ratio == 0 {
        return Err(Error::Parameter("downsampling ratio must be >= 1".into()));
    }
    if 2 * overlap > ratio {
        return Err(Error::Parameter(format!(
            "overlap {overlap} exceeds half the downsampling ratio {ratio}"
        )));
    }
    if n_high == 0 || !n_high.is_multiple_of(ratio) {
        return Err(Error::Parameter(format!(
            "length {n_high} is not a positive multiple of the downsampling ratio {ratio}; \
             truncate the input first"
        )));
    }
    let n_low = n_high / ratio;
    let rows = (0..n_low)
        .map(|r| {
            let lo = (r * ratio).saturating_sub(overlap);
            let hi = ((r + 1) * ratio + overlap).min(n_high);
            let w = 1.0 / (hi - lo) as f64;
            (lo..hi).map(|j| (j, w)).collect()
        })
        .collect();
    SparseOperator::from_row_lists(n_high, rows, Structure::Banded { ratio, overlap })
}

/// Second-dimension banded operator of shape `n_high x (n_high / ratio)`: the
/// transpose of [`build_banded`].
pub fn build_banded_transposed(
    n_high: usize,
    ratio: usize,
    overlap: usize,
) -> Result<SparseOperator> {
    Ok(build_banded(n_high, ratio, overlap)?.transpose())
}

/// Blur-and-decimate operator for a `height x width` image vectorized row-major.
///
/// The result has shape `(height·width) x ((height/stride)·(width/stride))`, so a
/// bands-by-pixels matrix `V` is degraded as `V · S`. Output pixel `(p, q)` samples
/// input pixel `(p·stride + stride/2, q·stride + stride/2)` through a truncated
/// `kernel x kernel` Gaussian, renormalized to sum to one over the taps inside the
/// image.
pub fn build_gaussian_blur_decimation(
    height: usize,
    width: usize,
    kernel: usize,
    sigma: f64,
    stride: usize,
) -> Result<SparseOperator> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Parameter(format!("kernel size must be odd, got {kernel}")));
    }
    if stride == 0 {
        return Err(Error::Parameter("stride must be >= 1".into()));
    }
    if kernel > 1 && !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if height == 0 || width == 0 || !height.is_multiple_of(stride) || !width.is_multiple_of(stride) {
        return Err(Error::Parameter(format!(
            "image {height}x{width} is not divisible by stride {stride}"
        )));
    }
    let (out_h, out_w) = (height / stride, width / stride);
    let half = (kernel / 2) as isize;
    let offset = stride / 2;

    // Columns of S are output pixels; collect them, then transpose into row lists.
    let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); height * width];
    let mut taps = Vec::with_capacity(kernel * kernel);
    for p in 0..out_h {
        for q in 0..out_w {
            let (cr, cc) = ((p * stride + offset) as isize, (q * stride + offset) as isize);
            taps.clear();
            for a in -half..=half {
                for b in -half..=half {
                    let (r, c) = (cr + a, cc + b);
                    if r < 0 || c < 0 || r >= height as isize || c >= width as isize {
                        continue;
                    }
                    let w = if kernel == 1 {
                        1.0
                    } else {
                        (-((a * a + b * b) as f64) / (2.0 * sigma * sigma)).exp()
                    };
                    taps.push((r as usize * width + c as usize, w));
                }
            }
            let total: f64 = taps.iter().map(|(_, w)| w).sum();
            let out_idx = p * out_w + q;
            for &(i, w) in &taps {
                lists[i].push((out_idx, w / total));
            }
        }
    }
    SparseOperator::from_row_lists(
        out_h * out_w,
        lists,
        Structure::GaussianDecimation {
            height,
            width,
            kernel,
            sigma,
            stride,
        },
    )
}

/// Reads a spectral response table (one CSV row per output band, one column per
/// input band) and L1-normalizes each row. Lines starting with `#` are ignored.
pub fn load_spectral_response(path: impl AsRef<Path>) -> Result<NonnegMatrix> {
    let path = path.as_ref();
    let m = crate::io::read_csv(path)?;
    normalize_response_rows(&m).map_err(|e| Error::format(path, e.to_string()))
}

/// Scales each row to unit L1 norm; an all-zero row is an error.
pub fn normalize_response_rows(m: &NonnegMatrix) -> Result<NonnegMatrix> {
    let mut out = m.clone();
    for (i, s) in m.row_l1_norms().into_iter().enumerate() {
        if s <= 0.0 {
            return Err(Error::InvalidData(format!("response row {i} is all zero")));
        }
        for v in out.row_mut(i) {
            *v /= s;
        }
    }
    Ok(out)
}

/// Box-filter response that splits `n_in` bands into `n_out` contiguous groups
/// of (nearly) equal width.
pub fn box_spectral_response(n_out: usize, n_in: usize) -> Result<NonnegMatrix> {
    if n_out == 0 || n_out > n_in {
        return Err(Error::Parameter(format!(
            "cannot group {n_in} bands into {n_out} responses"
        )));
    }
    let m = NonnegMatrix::from_fn(n_out, n_in, |i, j| {
        let lo = i * n_in / n_out;
        let hi = (i + 1) * n_in / n_out;
        if (lo..hi).contains(&j) {
            1.0
        } else {
            0.0
        }
    });
    normalize_response_rows(&m)
}

/// Overlapping Gaussian band responses centered evenly across `n_in` input bands,
/// truncated at three standard deviations; a stand-in for a multispectral sensor.
pub fn gaussian_spectral_response(n_out: usize, n_in: usize) -> Result<NonnegMatrix> {
    if n_out == 0 || n_out > n_in {
        return Err(Error::Parameter(format!(
            "cannot build {n_out} responses over {n_in} bands"
        )));
    }
    let spacing = n_in as f64 / n_out as f64;
    let sd = 0.6 * spacing;
    let m = NonnegMatrix::from_fn(n_out, n_in, |i, j| {
        let center = (i as f64 + 0.5) * spacing - 0.5;
        let z = (j as f64 - center) / sd;
        if z.abs() > 3.0 {
            0.0
        } else {
            (-0.5 * z * z).exp()
        }
    });
    normalize_response_rows(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn supports(op: &SparseOperator) -> Vec<Vec<usize>> {
        (0..op.rows()).map(|i| op.row_support(i).to_vec()).collect()
    }

    #[test]
    fn banded_overlap_pattern() {
        let op = build_banded(8, 2, 1).unwrap();
        assert_eq!(op.shape(), (4, 8));
        assert_eq!(
            supports(&op),
            vec![vec![0, 1, 2], vec![1, 2, 3, 4], vec![3, 4, 5, 6], vec![5, 6, 7]]
        );
        let mask = op.support_mask();
        let expected = [
            [1, 1, 1, 0, 0, 0, 0, 0],
            [0, 1, 1, 1, 1, 0, 0, 0],
            [0, 0, 0, 1, 1, 1, 1, 0],
            [0, 0, 0, 0, 0, 1, 1, 1],
        ];
        for i in 0..4 {
            for j in 0..8 {
                assert_eq!(mask.get(i, j), expected[i][j] as f64);
            }
        }
        assert_eq!(mask.sum() as usize, op.nnz());
        assert_eq!(mask.hadamard(&op.to_dense()).unwrap(), op.to_dense());
    }

    #[test]
    fn banded_without_overlap_is_block_mean() {
        let op = build_banded(8, 2, 0).unwrap();
        assert_eq!(
            supports(&op),
            vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]
        );
        assert!(op.values().iter().all(|w| *w == 0.5));
    }

    #[test]
    fn banded_wide_overlap() {
        let op = build_banded(16, 4, 2).unwrap();
        assert_eq!(op.shape(), (4, 16));
        assert_eq!(op.row_support(0), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(op.row_support(1), &[2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(op.row_support(2), &[6, 7, 8, 9, 10, 11, 12, 13]);
        assert_eq!(op.row_support(3), &[10, 11, 12, 13, 14, 15]);
    }

    #[test]
    fn banded_rejects_bad_parameters() {
        assert!(matches!(build_banded(8, 2, 2), Err(Error::Parameter(_))));
        assert!(matches!(build_banded(9, 2, 1), Err(Error::Parameter(_))));
        assert!(matches!(build_banded(8, 0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn rows_are_stochastic() {
        for (n, d, f) in [(8, 2, 1), (8, 2, 0), (16, 4, 2), (30, 3, 1), (2048, 4, 2)] {
            for s in build_banded(n, d, f).unwrap().row_sums() {
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
        let s = build_gaussian_blur_decimation(20, 12, 11, 1.7, 4).unwrap();
        for c in s.col_sums() {
            assert!((c - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn block_constant_rows_are_reproduced() {
        let op = build_banded(12, 3, 0).unwrap();
        let m = NonnegMatrix::from_fn(12, 5, |i, j| ((i / 3) * 7 + j) as f64 * 0.25);
        let out = op.apply(&m).unwrap();
        for r in 0..4 {
            for j in 0..5 {
                assert!((out.get(r, j) - m.get(3 * r, j)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_kernel_is_pure_decimation() {
        let s = build_gaussian_blur_decimation(4, 4, 1, 1.0, 2).unwrap();
        assert_eq!(s.shape(), (16, 4));
        let img = NonnegMatrix::from_fn(1, 16, |_, j| j as f64);
        let out = s.right_apply(&img).unwrap();
        // samples (1,1), (1,3), (3,1), (3,3)
        assert_eq!(out.as_slice(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn full_scale_spatial_operator_shape() {
        let s = build_gaussian_blur_decimation(120, 120, 11, 1.7, 4).unwrap();
        assert_eq!(s.shape(), (14400, 900));
        assert!(s.nnz() <= 900 * 121);
    }

    #[test]
    fn blur_preserves_constants_and_commutes_with_offsets() {
        let s = build_gaussian_blur_decimation(16, 8, 5, 1.2, 2).unwrap();
        let c = NonnegMatrix::filled(3, 128, 2.5);
        let out = s.right_apply(&c).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 2.5).abs() < 1e-12));

        let m = NonnegMatrix::from_fn(2, 128, |i, j| ((i * 31 + j * 17) % 13) as f64);
        let shifted = m.map(|v| v + 4.0);
        let lhs = s.right_apply(&shifted).unwrap();
        let rhs = s.right_apply(&m).unwrap().map(|v| v + 4.0);
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn blur_rejects_bad_geometry() {
        assert!(build_gaussian_blur_decimation(10, 10, 4, 1.0, 2).is_err());
        assert!(build_gaussian_blur_decimation(10, 10, 3, 1.0, 3).is_err());
    }

    #[test]
    fn products_match_dense() {
        let op = build_banded(12, 3, 1).unwrap();
        let dense = op.to_dense();
        let m = NonnegMatrix::from_fn(12, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        assert!(op.apply(&m).unwrap().max_abs_diff(&dense.matmul(&m).unwrap()).unwrap() < 1e-12);
        let m2 = NonnegMatrix::from_fn(4, 5, |i, j| (i + 2 * j) as f64);
        assert!(
            op.apply_transposed(&m2)
                .unwrap()
                .max_abs_diff(&dense.matmul_tn(&m2).unwrap())
                .unwrap()
                < 1e-12
        );
        let m3 = NonnegMatrix::from_fn(3, 4, |i, j| (i * j) as f64 + 0.5);
        assert!(
            op.right_apply(&m3)
                .unwrap()
                .max_abs_diff(&m3.matmul(&dense).unwrap())
                .unwrap()
                < 1e-12
        );
        let m4 = NonnegMatrix::from_fn(3, 12, |i, j| (i + j) as f64);
        assert!(
            op.right_apply_transposed(&m4)
                .unwrap()
                .max_abs_diff(&m4.matmul_nt(&dense).unwrap())
                .unwrap()
                < 1e-12
        );
        assert_eq!(op.transpose().to_dense(), dense.transpose());
    }

    #[test]
    fn spectral_response_rows_sum_to_one() {
        let r = box_spectral_response(6, 200).unwrap();
        assert_eq!(r.shape(), (6, 200));
        for s in r.row_l1_norms() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let g = gaussian_spectral_response(6, 30).unwrap();
        for s in g.row_l1_norms() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
