//! Linear weights that return the true totals on every draw, when they exist.
//!
//! With `Y` the realization matrix, weights `W_o = t x̂ᵀ` reproduce `t` on
//! every draw iff `Y x̂ = 𝟙` has a solution; `x̂ = Y⁺ 𝟙` is the minimum-norm one.

use faer::MatRef;

use super::Enumeration;
use crate::arrays::ArrayMatrix;
use crate::error::{Error, Result};
use crate::estimators::{LinearWeights, Totals};

/// Largest `|Y x̂ − 𝟙|` accepted as an exact solution.
pub const ORACLE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum OracleVerdict {
    Exact {
        weights: LinearWeights,
        rank: usize,
        residual: f64,
    },
    NotExact {
        rank: usize,
        residual: f64,
    },
}

impl OracleVerdict {
    pub fn rank(&self) -> usize {
        match self {
            OracleVerdict::Exact { rank, .. } | OracleVerdict::NotExact { rank, .. } => *rank,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, OracleVerdict::Exact { .. })
    }
}

pub fn exact_linear_oracle(enumeration: &Enumeration<'_>) -> Result<OracleVerdict> {
    oracle_from_realizations(
        enumeration.realizations().as_ref(),
        enumeration.truth(),
        enumeration.design().groups(),
    )
}

pub fn oracle_from_realizations(y: MatRef<'_, f64>, truth: &Totals, groups: usize) -> Result<OracleVerdict> {
    let months = truth.months();
    let (n, p) = (y.nrows(), y.ncols());
    if p != 3 * months * groups {
        return Err(Error::shape(3 * months * groups, p));
    }
    if n == 0 {
        return Err(Error::Invalid("no realizations".into()));
    }
    let svd = y.thin_svd().expect("svd did not converge");
    let s = svd.S().column_vector();
    let smax = s.iter().fold(0.0f64, |a, &x| a.max(x));
    let tol = smax * f64::EPSILON * n.max(p) as f64;
    let rank = s.iter().filter(|&&x| x > tol).count();
    // x̂ = V_r diag(1/s) U_rᵀ 𝟙
    let (u, v) = (svd.U(), svd.V());
    let mut x = vec![0.0; p];
    for j in 0..rank {
        let c = (0..n).map(|i| u[(i, j)]).sum::<f64>() / s[j];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += v[(i, j)] * c;
        }
    }
    let residual = (0..n)
        .map(|i| ((0..p).map(|j| y[(i, j)] * x[j]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    if residual > ORACLE_RESIDUAL_TOL {
        return Ok(OracleVerdict::NotExact { rank, residual });
    }
    let t = truth.to_flat();
    let mut w = ArrayMatrix::zeros(&[months, 3], &[months, groups, 3]);
    for (i, &ti) in t.iter().enumerate() {
        for (j, &xj) in x.iter().enumerate() {
            w.mat_mut()[(i, j)] = ti * xj;
        }
    }
    Ok(OracleVerdict::Exact {
        weights: LinearWeights::from_matrix(w),
        rank,
        residual,
    })
}
