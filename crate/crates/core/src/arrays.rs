//! Labeled multi-dimensional arrays.
//!
//! An `(a_1, ..., a_p)`-sized array is stored flat with the **first axis
//! varying fastest**: the multi-index `(i_1, ..., i_p)` (1-based) lives at
//! position `1 + sum_l (i_l - 1) * prod_{l' < l} a_{l'}`.
//!
//! A two-index array such as the `((M, 8, 3), (M, 3))` design matrix is an
//! [`ArrayMatrix`]: its rows are the flattened row multi-indices and its
//! columns the flattened column multi-indices, so every array formula turns
//! into an ordinary matrix formula.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Relative cutoff under which singular values are treated as zero when
/// forming Moore-Penrose pseudo-inverses.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

/// 1-based flattening position of `index` inside an array of size `dims`.
///
/// # Panics
/// If `index` has the wrong arity or any component is out of `1..=dims[l]`.
pub fn flat_position(dims: &[usize], index: &[usize]) -> usize {
    flat_offset(dims, index) + 1
}

pub(crate) fn flat_offset(dims: &[usize], index: &[usize]) -> usize {
    assert_eq!(
        dims.len(),
        index.len(),
        "index arity {} does not match array arity {}",
        index.len(),
        dims.len()
    );
    let mut offset = 0;
    let mut stride = 1;
    for (&size, &i) in dims.iter().zip(index) {
        assert!(
            (1..=size).contains(&i),
            "index component {i} outside 1..={size}"
        );
        offset += (i - 1) * stride;
        stride *= size;
    }
    offset
}

/// Inverse of [`flat_position`]: the 1-based multi-index at a 1-based position.
pub fn multi_index(dims: &[usize], position: usize) -> Vec<usize> {
    let total: usize = dims.iter().product();
    assert!((1..=total).contains(&position), "position {position} outside 1..={total}");
    let mut rest = position - 1;
    dims.iter()
        .map(|&size| {
            let i = rest % size;
            rest /= size;
            i + 1
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledArray {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl LabeledArray {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    /// Rebuilds an array from its flattened vector (the inverse of [`flatten`]).
    pub fn from_flat(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::shape(
                format!("{len} values for dims {dims:?}"),
                data.len(),
            ));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element at a 1-based multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[flat_offset(&self.dims, index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let offset = flat_offset(&self.dims, index);
        self.data[offset] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }
}

/// The vector form of an array under the first-axis-fastest convention.
pub fn flatten(a: &LabeledArray) -> Vec<f64> {
    a.data.clone()
}

/// A two-index array viewed as a `(prod row_dims) x (prod col_dims)` matrix.
#[derive(Clone, Debug)]
pub struct ArrayMatrix {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    mat: Mat<f64>,
}

impl ArrayMatrix {
    pub fn zeros(row_dims: &[usize], col_dims: &[usize]) -> Self {
        let rows = row_dims.iter().product();
        let cols = col_dims.iter().product();
        Self {
            row_dims: row_dims.to_vec(),
            col_dims: col_dims.to_vec(),
            mat: Mat::zeros(rows, cols),
        }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self {
            row_dims: dims.to_vec(),
            col_dims: dims.to_vec(),
            mat: Mat::identity(n, n),
        }
    }

    pub fn from_mat(row_dims: &[usize], col_dims: &[usize], mat: Mat<f64>) -> Result<Self> {
        let rows: usize = row_dims.iter().product();
        let cols: usize = col_dims.iter().product();
        if mat.nrows() != rows || mat.ncols() != cols {
            return Err(Error::shape(
                format!("{rows}x{cols} for {row_dims:?} x {col_dims:?}"),
                format!("{}x{}", mat.nrows(), mat.ncols()),
            ));
        }
        Ok(Self {
            row_dims: row_dims.to_vec(),
            col_dims: col_dims.to_vec(),
            mat,
        })
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn nrows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.mat.ncols()
    }

    /// Entry at 1-based row and column multi-indices.
    pub fn get(&self, row: &[usize], col: &[usize]) -> f64 {
        self.mat[(flat_offset(&self.row_dims, row), flat_offset(&self.col_dims, col))]
    }

    pub fn set(&mut self, row: &[usize], col: &[usize], value: f64) {
        let i = flat_offset(&self.row_dims, row);
        let j = flat_offset(&self.col_dims, col);
        self.mat[(i, j)] = value;
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.mat.as_ref()
    }

    pub fn mat_mut(&mut self) -> &mut Mat<f64> {
        &mut self.mat
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.mat
    }

    pub fn transpose(&self) -> ArrayMatrix {
        ArrayMatrix {
            row_dims: self.col_dims.clone(),
            col_dims: self.row_dims.clone(),
            mat: self.mat.transpose().to_owned(),
        }
    }

    /// Matrix-vector product with a flattened column-indexed vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.ncols() {
            return Err(Error::shape(
                format!("vector of length {}", self.ncols()),
                v.len(),
            ));
        }
        let mut out = vec![0.0; self.nrows()];
        for (j, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let col = self.mat.col(j);
            for (o, &c) in out.iter_mut().zip(col.iter()) {
                *o += c * x;
            }
        }
        Ok(out)
    }
}

/// `C_{(i..),(k..)} = sum_{(j..)} A_{(i..),(j..)} B_{(j..),(k..)}`.
pub fn array_mult(a: &ArrayMatrix, b: &ArrayMatrix) -> Result<ArrayMatrix> {
    if a.col_dims != b.row_dims {
        return Err(Error::shape(
            format!("right operand row dims {:?}", a.col_dims),
            format!("{:?}", b.row_dims),
        ));
    }
    Ok(ArrayMatrix {
        row_dims: a.row_dims.clone(),
        col_dims: b.col_dims.clone(),
        mat: &a.mat * &b.mat,
    })
}

/// Moore-Penrose pseudo-inverse; the result has the row and column dims swapped.
pub fn pseudo_inverse(m: &ArrayMatrix) -> ArrayMatrix {
    ArrayMatrix {
        row_dims: m.col_dims.clone(),
        col_dims: m.row_dims.clone(),
        mat: pinv(m.as_mat()),
    }
}

/// SVD-based pseudo-inverse with the [`PINV_RELATIVE_CUTOFF`] rule.
pub fn pinv(m: MatRef<'_, f64>) -> Mat<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 {
        return Mat::zeros(cols, rows);
    }
    let svd = m.thin_svd().expect("svd did not converge");
    let s = svd.S().column_vector();
    let smax = s.iter().fold(0.0f64, |acc, &x| acc.max(x));
    if smax == 0.0 {
        return Mat::zeros(cols, rows);
    }
    let cutoff = PINV_RELATIVE_CUTOFF * smax;
    let rank = s.iter().take_while(|&&x| x > cutoff).count();
    let v = svd.V();
    let u = svd.U();
    // V_r diag(1/s) U_r^T
    let scaled = Mat::from_fn(cols, rank, |i, j| v[(i, j)] / s[j]);
    &scaled * u.subcols(0, rank).transpose()
}

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition.
/// Eigenvalues with magnitude below the relative cutoff are dropped.
pub fn pinv_symmetric(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "pinv_symmetric needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .expect("eigendecomposition did not converge");
    let s = evd.S().column_vector();
    let u = evd.U();
    let smax = s.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if smax == 0.0 {
        return Mat::zeros(n, n);
    }
    let cutoff = PINV_RELATIVE_CUTOFF * smax;
    let kept: Vec<usize> = (0..n).filter(|&j| s[j].abs() > cutoff).collect();
    let ur = Mat::from_fn(n, kept.len(), |i, j| u[(i, kept[j])]);
    let scaled = Mat::from_fn(n, kept.len(), |i, j| u[(i, kept[j])] / s[kept[j]]);
    &scaled * ur.transpose()
}

/// Numerical rank: number of singular values above `rel_tol * s_max`.
pub fn numerical_rank(m: MatRef<'_, f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.singular_values().expect("svd did not converge");
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}
