//! Linear combinations of month-in-sample estimates, and the best linear
//! unbiased ones.
//!
//! The generalized least squares weights for a design matrix `X` and a
//! possibly singular covariance `Σ` are
//!
//! ```text
//! W = X⁺ (I − Σ (P Σ P)⁺),   P = I − X X⁺
//! ```
//!
//! When `Σ = YᶜᵀYᶜ/n` is the covariance of known realizations `Y`, the
//! `_from_rows` variants take the thin SVD `YᶜP/√n = U S Vᵀ` and use
//! `Σ (P Σ P)⁺ = (Yᶜ/√n)ᵀ U S⁻¹ Vᵀ`, so `Σ` is never formed.

use faer::{Mat, MatRef};

use super::{MisEstimates, Totals};
use crate::arrays::{pinv, pinv_symmetric, ArrayMatrix, PINV_RELATIVE_CUTOFF};
use crate::error::{Error, Result};

/// Weights mapping flattened `(M, G, 3)` estimates to flattened `(M, 3)` (or
/// `(p, (M, 3))`-shaped) totals.
#[derive(Clone, Debug)]
pub struct LinearWeights {
    matrix: ArrayMatrix,
}

impl LinearWeights {
    pub fn from_matrix(matrix: ArrayMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &ArrayMatrix {
        &self.matrix
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.matrix.as_mat()
    }

    pub fn months(&self) -> usize {
        self.matrix.col_dims()[0]
    }

    pub fn apply(&self, mis: &MisEstimates) -> Result<Totals> {
        apply_linear(self, mis)
    }

    /// Applies the weights to many estimate vectors at once: `rows` holds one
    /// flattened estimate per row, the result one flattened total per row.
    pub fn apply_rows(&self, rows: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if rows.ncols() != self.matrix.ncols() {
            return Err(Error::shape(self.matrix.ncols(), rows.ncols()));
        }
        Ok(rows * self.matrix.as_mat().transpose())
    }
}

pub fn apply_linear(w: &LinearWeights, mis: &MisEstimates) -> Result<Totals> {
    let dims = w.matrix.col_dims();
    if dims != [mis.months(), mis.groups(), 3] {
        return Err(Error::shape(
            format!("{dims:?}"),
            format!("{:?}", [mis.months(), mis.groups(), 3]),
        ));
    }
    let v = w.matrix.apply(mis.as_slice())?;
    if w.matrix.row_dims() != [mis.months(), 3] {
        return Err(Error::shape(
            format!("{:?}", [mis.months(), 3]),
            format!("{:?}", w.matrix.row_dims()),
        ));
    }
    Totals::from_flat(mis.months(), &v)
}

/// `(X, X')`: `X` of dims `((M,G,3),(M,3))` with a one wherever month and
/// status agree; `X'` of dims `((M,G,3),(G-1,3))` with `+1` at `g = g' < G`
/// and `-1` at `g = G`, status-matched.
pub fn design_matrices(months: usize, groups: usize) -> (ArrayMatrix, ArrayMatrix) {
    let mut x = ArrayMatrix::zeros(&[months, groups, 3], &[months, 3]);
    let mut xb = ArrayMatrix::zeros(&[months, groups, 3], &[groups - 1, 3]);
    for m in 1..=months {
        for g in 1..=groups {
            for e in 1..=3 {
                x.set(&[m, g, e], &[m, e], 1.0);
                if g < groups {
                    xb.set(&[m, g, e], &[g, e], 1.0);
                } else {
                    for gp in 1..groups {
                        xb.set(&[m, g, e], &[gp, e], -1.0);
                    }
                }
            }
        }
    }
    (x, xb)
}

/// Equal weights `1/G` on every group of the same month: the direct estimator.
pub fn direct_weights(months: usize, groups: usize) -> LinearWeights {
    let (x, _) = design_matrices(months, groups);
    let mut t = x.transpose();
    let scale = 1.0 / groups as f64;
    for j in 0..t.ncols() {
        for i in 0..t.nrows() {
            let v = t.as_mat()[(i, j)];
            if v != 0.0 {
                t.mat_mut()[(i, j)] = v * scale;
            }
        }
    }
    LinearWeights::from_matrix(t)
}

/// Selects the month-in-sample estimate of group `g` as the total.
pub fn mis_selection_weights(months: usize, groups: usize, g: usize) -> LinearWeights {
    let mut w = ArrayMatrix::zeros(&[months, 3], &[months, groups, 3]);
    for m in 1..=months {
        for e in 1..=3 {
            w.set(&[m, e], &[m, g, e], 1.0);
        }
    }
    LinearWeights::from_matrix(w)
}

fn check_symmetric(sigma: MatRef<'_, f64>) -> Result<()> {
    let n = sigma.nrows();
    if n != sigma.ncols() {
        return Err(Error::shape("square covariance", format!("{}x{}", n, sigma.ncols())));
    }
    let mut scale = 0.0f64;
    let mut gap = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(sigma[(i, j)].abs());
            if i < j {
                gap = gap.max((sigma[(i, j)] - sigma[(j, i)]).abs());
            }
        }
    }
    if gap > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Asymmetric { max_gap: gap });
    }
    Ok(())
}

/// Generalized least squares weights `X⁺ (I − Σ (P Σ P)⁺)` with `P = I − X X⁺`.
pub fn gls_weights(x: MatRef<'_, f64>, sigma: MatRef<'_, f64>) -> Result<Mat<f64>> {
    check_symmetric(sigma)?;
    if x.nrows() != sigma.nrows() {
        return Err(Error::shape(sigma.nrows(), x.nrows()));
    }
    let xp = pinv(x);
    // P Σ P = Σ − X B − (X B)ᵀ + X (B X) X⁺ with B = X⁺ Σ
    let b = &xp * sigma;
    let xb = x * &b;
    let bx = &b * x;
    let inner = &(x * &bx) * &xp;
    let n = sigma.nrows();
    let psp = Mat::from_fn(n, n, |i, j| {
        let v = sigma[(i, j)] - xb[(i, j)] - xb[(j, i)] + inner[(i, j)];
        let vt = sigma[(j, i)] - xb[(j, i)] - xb[(i, j)] + inner[(j, i)];
        0.5 * (v + vt)
    });
    let psp_pinv = pinv_symmetric(psp.as_ref());
    Ok(&xp - &b * &psp_pinv)
}

/// [`gls_weights`] for the covariance of the rows of `y` (divisor `n`).
pub fn gls_weights_from_rows(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let (n, p) = (y.nrows(), y.ncols());
    if x.nrows() != p {
        return Err(Error::shape(p, x.nrows()));
    }
    let xp = pinv(x);
    if n == 0 {
        return Ok(xp);
    }
    let root = 1.0 / (n as f64).sqrt();
    let mut c = y.to_owned();
    for j in 0..p {
        let mean = (0..n).map(|i| y[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            c[(i, j)] = (c[(i, j)] - mean) * root;
        }
    }
    let a = &c - &(&c * x) * &xp;
    let svd = a.thin_svd().map_err(|_| Error::Invalid("svd did not converge".into()))?;
    let s = svd.S().column_vector();
    let smax = s.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let cutoff = PINV_RELATIVE_CUTOFF.sqrt() * smax;
    let rank = if smax == 0.0 { 0 } else { s.iter().take_while(|&&v| v > cutoff).count() };
    let (u, v) = (svd.U(), svd.V());
    let xc = &xp * c.transpose();
    let us = Mat::from_fn(n, rank, |i, j| u[(i, j)] / s[j]);
    let left = &xc * &us;
    Ok(&xp - &left * v.subcols(0, rank).transpose())
}

fn bailar_design(months: usize, groups: usize) -> (Mat<f64>, usize) {
    let (x, xb) = design_matrices(months, groups);
    let (n, p, q) = (x.nrows(), x.ncols(), xb.ncols());
    let xs = Mat::from_fn(n, p + q, |i, j| {
        if j < p {
            x.as_mat()[(i, j)]
        } else {
            xb.as_mat()[(i, j - p)]
        }
    });
    (xs, p)
}

fn to_weights(w: Mat<f64>, months: usize, groups: usize) -> Result<LinearWeights> {
    Ok(LinearWeights::from_matrix(ArrayMatrix::from_mat(
        &[months, 3],
        &[months, groups, 3],
        w,
    )?))
}

/// BLUE weights for the exact covariance of the realization rows `y`
/// (one row per sample, flattened `(M, G, 3)` columns).
pub fn blue_weights_from_rows(y: MatRef<'_, f64>, months: usize, groups: usize) -> Result<LinearWeights> {
    let (x, _) = design_matrices(months, groups);
    to_weights(gls_weights_from_rows(x.as_mat(), y)?, months, groups)
}

pub fn blue_bailar_weights_from_rows(y: MatRef<'_, f64>, months: usize, groups: usize) -> Result<LinearWeights> {
    let (xs, p) = bailar_design(months, groups);
    let full = gls_weights_from_rows(xs.as_ref(), y)?;
    to_weights(full.subrows(0, p).to_owned(), months, groups)
}

pub fn blue_weights(sigma: MatRef<'_, f64>, months: usize, groups: usize) -> Result<LinearWeights> {
    let (x, _) = design_matrices(months, groups);
    let w = gls_weights(x.as_mat(), sigma)?;
    Ok(LinearWeights::from_matrix(ArrayMatrix::from_mat(
        &[months, 3],
        &[months, groups, 3],
        w,
    )?))
}

pub fn blue(mis: &MisEstimates, sigma: MatRef<'_, f64>) -> Result<Totals> {
    blue_weights(sigma, mis.months(), mis.groups())?.apply(mis)
}

/// Additive rotation-group bias `b[g][e]` on every month's estimates,
/// identified under the constraint `Σ_g b[g][e] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BailarModel {
    pub bias: Vec<[f64; 3]>,
}

impl BailarModel {
    pub fn zero(groups: usize) -> Self {
        Self {
            bias: vec![[0.0; 3]; groups],
        }
    }

    /// `C_e b_{·,e}` for the all-ones constraint form.
    pub fn constraint_residual(&self) -> [f64; 3] {
        let mut r = [0.0; 3];
        for row in &self.bias {
            for e in 0..3 {
                r[e] += row[e];
            }
        }
        r
    }
}

/// `L X*⁺ (I − Σ (P* Σ P*)⁺)` with `X* = [X | X']` and `L = [I | 0]`.
pub fn blue_bailar_weights(
    sigma: MatRef<'_, f64>,
    months: usize,
    groups: usize,
) -> Result<LinearWeights> {
    let (xs, p) = bailar_design(months, groups);
    let full = gls_weights(xs.as_ref(), sigma)?;
    to_weights(full.subrows(0, p).to_owned(), months, groups)
}

pub fn blue_bailar(mis: &MisEstimates, sigma: MatRef<'_, f64>) -> Result<Totals> {
    blue_bailar_weights(sigma, mis.months(), mis.groups())?.apply(mis)
}
