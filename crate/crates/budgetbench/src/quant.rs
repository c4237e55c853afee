//! Weight-only post-training quantization.
//!
//! Two quantizers share a per-row integer grid: a round-to-nearest
//! baseline, and a one-shot second-order method that walks the columns
//! left to right and folds each column's rounding error into the columns
//! not yet quantized, weighted by the Cholesky factors of the inverse
//! calibration Hessian.
//!
//! Quality is measured by the proxy loss `Σ_rows (w − ŵ) H (w − ŵ)ᵀ`,
//! the quadratic form under the calibration Hessian `H = 2XXᵀ + λI`.
//!
//! ```
//! use budgetbench::quant::{fit_grid, rtn_quantize, dequantize, WeightMatrix};
//!
//! let w = WeightMatrix::from_rows(vec![vec![-1.0, 0.5, 1.0]]).unwrap();
//! let grid = fit_grid(&w, 8, true).unwrap();
//! let q = rtn_quantize(&w, &grid).unwrap();
//! let back = dequantize(&q);
//! assert!((back.get(0, 2) - 1.0).abs() < 1e-12);
//! ```
//!
//! The second-order path needs a calibration Hessian and is compared to
//! the baseline through the proxy loss:
//!
//! ```
//! use budgetbench::quant::{build_hessian, fit_grid, gptq_quantize, rtn_quantize,
//!                          dequantize, proxy_loss, WeightMatrix};
//! use nalgebra::DMatrix;
//!
//! let w = WeightMatrix::from_rows(vec![vec![0.9, -1.4, 0.3, 2.1]]).unwrap();
//! let x = DMatrix::from_fn(4, 16, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
//! let h = build_hessian(&x, 0.01).unwrap();
//! let grid = fit_grid(&w, 4, false).unwrap();
//!
//! let rtn = dequantize(&rtn_quantize(&w, &grid).unwrap());
//! let gptq = dequantize(&gptq_quantize(&w, &h, &grid, 128).unwrap());
//! let (l_rtn, l_gptq) = (
//!     proxy_loss(&w, &rtn, &h).unwrap(),
//!     proxy_loss(&w, &gptq, &h).unwrap(),
//! );
//! assert!(l_gptq <= l_rtn);
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense weight matrix, row-major, promoted to f64 working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {rows}x{cols}, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(WeightMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        WeightMatrix::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

/// Per-row quantization grid: `value = scale[r] · (code − zero_point[r])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantGrid {
    pub bits: u8,
    pub symmetric: bool,
    pub scale: Vec<f64>,
    pub zero_point: Vec<i32>,
}

impl QuantGrid {
    /// Inclusive representable code range.
    pub fn code_range(&self) -> (i32, i32) {
        if self.symmetric {
            let half = 1i32 << (self.bits - 1);
            (-half, half - 1)
        } else {
            (0, (1i32 << self.bits) - 1)
        }
    }

    pub fn rows(&self) -> usize {
        self.scale.len()
    }

    /// Nearest representable code for `w` on row `r` (ties round half away
    /// from zero).
    pub fn quantize_value(&self, r: usize, w: f64) -> i32 {
        let (lo, hi) = self.code_range();
        let raw = (w / self.scale[r]).round() + f64::from(self.zero_point[r]);
        raw.clamp(f64::from(lo), f64::from(hi)) as i32
    }

    pub fn dequantize_code(&self, r: usize, code: i32) -> f64 {
        self.scale[r] * f64::from(code - self.zero_point[r])
    }
}

/// Codes on a grid; the quantized form of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major codes, always within the grid's representable range.
    pub codes: Vec<i32>,
    pub grid: QuantGrid,
}

/// Calibration second-order proxy `H = 2XXᵀ + λI`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianProxy {
    h: DMatrix<f64>,
    damping: f64,
}

impl HessianProxy {
    /// Wraps an externally built Hessian; rejects asymmetry beyond 1e-9
    /// relative.
    pub fn new(h: DMatrix<f64>, damping: f64) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::ShapeMismatch("hessian must be square".into()));
        }
        let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..h.nrows() {
            for j in (i + 1)..h.ncols() {
                if (h[(i, j)] - h[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidArgument(
                        "hessian is not symmetric within tolerance".into(),
                    ));
                }
            }
        }
        if damping < 0.0 {
            return Err(Error::InvalidArgument("damping must be >= 0".into()));
        }
        Ok(HessianProxy { h, damping })
    }

    /// Identity Hessian: second-order compensation degenerates to plain
    /// round-to-nearest with bookkeeping.
    pub fn identity(cols: usize) -> Self {
        HessianProxy {
            h: DMatrix::identity(cols, cols),
            damping: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn damping(&self) -> f64 {
        self.damping
    }
}

/// Calibrates per-row min/max scales for the requested grid.
///
/// All-zero rows get scale 1 with a centered zero point so every code
/// round-trips to 0.0. Asymmetric grids always include 0 in the
/// representable range.
pub fn fit_grid(w: &WeightMatrix, bits: u8, symmetric: bool) -> Result<QuantGrid> {
    if bits != 4 && bits != 8 {
        return Err(Error::InvalidArgument(format!(
            "bits must be 4 or 8, got {bits}"
        )));
    }
    let mut scale = Vec::with_capacity(w.rows());
    let mut zero_point = Vec::with_capacity(w.rows());
    let levels = (1i64 << bits) - 1;
    let qmax_sym = (1i64 << (bits - 1)) - 1;

    for r in 0..w.rows() {
        let row = w.row(r);
        if symmetric {
            let maxabs = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if maxabs == 0.0 {
                scale.push(1.0);
            } else {
                scale.push(maxabs / qmax_sym as f64);
            }
            zero_point.push(0);
        } else {
            let lo = row.iter().cloned().fold(0.0f64, f64::min);
            let hi = row.iter().cloned().fold(0.0f64, f64::max);
            if hi == lo {
                scale.push(1.0);
                zero_point.push(1i32 << (bits - 1));
            } else {
                let s = (hi - lo) / levels as f64;
                let zp = (-lo / s).round().clamp(0.0, levels as f64) as i32;
                scale.push(s);
                zero_point.push(zp);
            }
        }
    }
    Ok(QuantGrid {
        bits,
        symmetric,
        scale,
        zero_point,
    })
}

/// Round-to-nearest baseline: each element independently to the closest
/// grid level.
pub fn rtn_quantize(w: &WeightMatrix, grid: &QuantGrid) -> Result<QuantizedLayer> {
    if grid.rows() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "grid has {} rows, matrix has {}",
            grid.rows(),
            w.rows()
        )));
    }
    let mut codes = Vec::with_capacity(w.rows() * w.cols());
    for r in 0..w.rows() {
        for c in 0..w.cols() {
            codes.push(grid.quantize_value(r, w.get(r, c)));
        }
    }
    Ok(QuantizedLayer {
        rows: w.rows(),
        cols: w.cols(),
        codes,
        grid: grid.clone(),
    })
}

/// Builds the calibration Hessian `H = 2XXᵀ + λI` from activation samples
/// (`x` is cols × n_samples, column-major by sample).
///
/// `λ = damping_frac · mean(diag(2XXᵀ))`. All-zero activations with zero
/// damping make `H` singular and are rejected; with positive damping the
/// fraction is applied as an absolute floor instead.
pub fn build_hessian(x: &DMatrix<f64>, damping_frac: f64) -> Result<HessianProxy> {
    if x.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "need at least one calibration sample".into(),
        ));
    }
    if damping_frac < 0.0 {
        return Err(Error::InvalidArgument("damping_frac must be >= 0".into()));
    }
    let mut h = x * x.transpose();
    h *= 2.0;
    let mean_diag = h.diagonal().mean();
    let lambda = if mean_diag > 0.0 {
        damping_frac * mean_diag
    } else if damping_frac > 0.0 {
        damping_frac
    } else {
        return Err(Error::InvalidArgument(
            "all-zero activations with damping_frac = 0 give a singular hessian".into(),
        ));
    };
    for i in 0..h.nrows() {
        h[(i, i)] += lambda;
    }
    HessianProxy::new(h, lambda)
}

/// One-shot second-order quantization with per-column error compensation.
///
/// Columns are quantized left to right in blocks of `block_size`; after
/// quantizing column `j`, the rounding error is propagated into the
/// remaining columns through the upper Cholesky factor of `H⁻¹`. The block
/// size only batches the trailing update and does not change the result
/// beyond round-off.
pub fn gptq_quantize(
    w: &WeightMatrix,
    hessian: &HessianProxy,
    grid: &QuantGrid,
    block_size: usize,
) -> Result<QuantizedLayer> {
    if hessian.dim() != w.cols() {
        return Err(Error::ShapeMismatch(format!(
            "hessian dim {} != cols {}",
            hessian.dim(),
            w.cols()
        )));
    }
    if grid.rows() != w.rows() {
        return Err(Error::ShapeMismatch("grid/matrix row mismatch".into()));
    }
    if block_size == 0 {
        return Err(Error::InvalidArgument("block_size must be >= 1".into()));
    }
    let cols = w.cols();
    let rows = w.rows();
    let block = block_size.min(cols);

    // Upper factor U with H^-1 = U^T U.
    let chol = nalgebra::Cholesky::new(hessian.matrix().clone()).ok_or(Error::CholeskyFailure)?;
    let hinv = chol.inverse();
    let chol_inv = nalgebra::Cholesky::new(hinv).ok_or(Error::CholeskyFailure)?;
    let u = chol_inv.l().transpose();

    let mut work: Vec<f64> = w.values().to_vec();
    let mut codes = vec![0i32; rows * cols];
    let mut block_err = vec![0.0f64; rows * block];

    let mut b0 = 0usize;
    while b0 < cols {
        let b1 = (b0 + block).min(cols);
        for j in b0..b1 {
            let d = u[(j, j)];
            for r in 0..rows {
                let wv = work[r * cols + j];
                let code = grid.quantize_value(r, wv);
                codes[r * cols + j] = code;
                let err = (wv - grid.dequantize_code(r, code)) / d;
                block_err[r * block + (j - b0)] = err;
                // compensate the rest of the current block
                for k in (j + 1)..b1 {
                    work[r * cols + k] -= err * u[(j, k)];
                }
            }
        }
        // batched update of everything past the block
        for r in 0..rows {
            for k in b1..cols {
                let mut acc = 0.0;
                for j in b0..b1 {
                    acc += block_err[r * block + (j - b0)] * u[(j, k)];
                }
                work[r * cols + k] -= acc;
            }
        }
        b0 = b1;
    }

    Ok(QuantizedLayer {
        rows,
        cols,
        codes,
        grid: grid.clone(),
    })
}

/// Maps codes back to real values on the grid.
pub fn dequantize(q: &QuantizedLayer) -> WeightMatrix {
    let mut values = Vec::with_capacity(q.rows * q.cols);
    for r in 0..q.rows {
        for c in 0..q.cols {
            values.push(q.grid.dequantize_code(r, q.codes[r * q.cols + c]));
        }
    }
    WeightMatrix {
        rows: q.rows,
        cols: q.cols,
        values,
    }
}

/// Quadratic quantization damage `Σ_rows (w − ŵ) H (w − ŵ)ᵀ`.
pub fn proxy_loss(w: &WeightMatrix, w_hat: &WeightMatrix, hessian: &HessianProxy) -> Result<f64> {
    if w.rows() != w_hat.rows() || w.cols() != w_hat.cols() {
        return Err(Error::ShapeMismatch("weight matrices differ in shape".into()));
    }
    if hessian.dim() != w.cols() {
        return Err(Error::ShapeMismatch("hessian dim != cols".into()));
    }
    let h = hessian.matrix();
    let mut total = 0.0;
    for r in 0..w.rows() {
        let d: Vec<f64> = (0..w.cols()).map(|c| w.get(r, c) - w_hat.get(r, c)).collect();
        for i in 0..w.cols() {
            for j in 0..w.cols() {
                total += d[i] * h[(i, j)] * d[j];
            }
        }
    }
    Ok(total)
}
