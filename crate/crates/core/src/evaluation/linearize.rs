//! Linearized variances of the unemployment rate `R(x) = x₂ / (x₁ + x₂)`.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{LinearWeights, Totals};

/// Gradient of `R` at one month's totals.
pub fn rate_jacobian(row: [f64; 3], month: usize) -> Result<[f64; 3]> {
    let l = row[0] + row[1];
    if l == 0.0 {
        return Err(Error::ZeroLaborForce { month });
    }
    Ok([-row[1] / (l * l), row[0] / (l * l), 0.0])
}

/// `J1` for every month and `J2 = (J1(m), −J1(m−1))` for `m = 2..=M`.
pub fn rate_jacobians(t: &Totals) -> Result<(Vec<[f64; 3]>, Vec<[f64; 6]>)> {
    let j1: Vec<[f64; 3]> = (1..=t.months())
        .map(|m| rate_jacobian(t.row(m), m))
        .collect::<Result<_>>()?;
    let j2 = j1
        .windows(2)
        .map(|w| {
            let mut v = [0.0; 6];
            v[..3].copy_from_slice(&w[1]);
            for e in 0..3 {
                v[3 + e] = -w[0][e];
            }
            v
        })
        .collect();
    Ok((j1, j2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Level,
    Change,
    Compromise,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 3] = [ObjectiveKind::Level, ObjectiveKind::Change, ObjectiveKind::Compromise];

    pub fn label(self) -> &'static str {
        match self {
            ObjectiveKind::Level => "level",
            ObjectiveKind::Change => "change",
            ObjectiveKind::Compromise => "compromise",
        }
    }
}

/// Per-month linearized variances of the rate (`level[m-1]`) and of its
/// change (`change[m-2]`, `m ≥ 2`).
#[derive(Clone, Debug, PartialEq)]
pub struct RateVariances {
    pub level: Vec<f64>,
    pub change: Vec<f64>,
}

impl RateVariances {
    pub fn objective(&self, kind: ObjectiveKind) -> f64 {
        let level: f64 = self.level.iter().sum();
        let change: f64 = self.change.iter().sum();
        match kind {
            ObjectiveKind::Level => level,
            ObjectiveKind::Change => change,
            ObjectiveKind::Compromise => level + change,
        }
    }
}

/// `W Σ Wᵀ` over flattened `(M, 3)` totals.
pub fn totals_covariance(w: &LinearWeights, sigma: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let wm = w.as_mat();
    if sigma.nrows() != wm.ncols() || sigma.ncols() != wm.ncols() {
        return Err(Error::shape(wm.ncols(), sigma.nrows()));
    }
    let ws = wm * sigma;
    Ok(&ws * wm.transpose())
}

/// Quadratic forms of the Jacobians against a covariance of flattened
/// `(M, 3)` totals.
pub fn rate_variances(cov: MatRef<'_, f64>, j1: &[[f64; 3]]) -> Result<RateVariances> {
    let months = j1.len();
    if cov.nrows() != 3 * months || cov.ncols() != 3 * months {
        return Err(Error::shape(3 * months, cov.nrows()));
    }
    let at = |m: usize, e: usize| m + months * e;
    let form = |m: usize, ja: &[f64; 3], mp: usize, jb: &[f64; 3]| {
        let mut s = 0.0;
        for e in 0..3 {
            for f in 0..3 {
                s += ja[e] * jb[f] * cov[(at(m, e), at(mp, f))];
            }
        }
        s
    };
    let level: Vec<f64> = (0..months).map(|m| form(m, &j1[m], m, &j1[m])).collect();
    let change = (1..months)
        .map(|m| level[m] + level[m - 1] - 2.0 * form(m, &j1[m], m - 1, &j1[m - 1]))
        .collect();
    Ok(RateVariances { level, change })
}

/// Linearized rate and change variances of a linear estimator under `Σ`,
/// with Jacobians taken at `t`.
pub fn linearized_variance(w: &LinearWeights, sigma: MatRef<'_, f64>, t: &Totals) -> Result<RateVariances> {
    if w.months() != t.months() {
        return Err(Error::shape(w.months(), t.months()));
    }
    let (j1, _) = rate_jacobians(t)?;
    let cov = totals_covariance(w, sigma)?;
    rate_variances(cov.as_ref(), &j1)
}
