//! Regression composite estimation.
//!
//! Month 1 keeps the base weights. For `m ≥ 2` every sampled unit gets a proxy
//! `z^(α)`:
//!
//! ```text
//! continuing:  α (τ_m⁻¹ (z_{m-1} − z_m) + z_m) + (1 − α) z_{m-1}
//! entering:    α z_m + (1 − α) t̂^{rc}_{z,m-1} / Σ_{S_{m-1}} w^{rc}_{m-1}
//! ```
//!
//! with `τ_m = Σ_{S_m} w_m / Σ_{S_m ∩ S_{m-1}} w_m`, and the weights are
//! calibrated by chi-square distance so that the proxy total reproduces last
//! month's composite estimate `t̂^{rc}_{z,m-1} = Σ w^{rc}_{m-1} z_{m-1}` and the
//! auxiliary totals hit their targets. Here `z = y`.

use super::{SampleData, Totals, WeightSet};
use crate::design::RotationDesign;
use crate::error::{Error, Result};

/// Relative pivot threshold below which a constraint is treated as redundant.
pub const CALIBRATION_RANK_TOL: f64 = 1e-10;
/// Relative residual every constraint must meet after calibration.
pub const CALIBRATION_SATISFY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationOutcome {
    pub weights: Vec<f64>,
    /// Indices of the constraints used in the solve.
    pub retained: Vec<usize>,
    /// Indices of the constraints dropped as linearly dependent.
    pub dropped: Vec<usize>,
    /// Number of units whose calibrated weight is negative.
    pub negative: usize,
}

/// Minimizes `Σ (w*_k − w_k)² / w_k` subject to `Σ_k w*_k h_{k,j} = T_j`.
///
/// `h` is row-major with one row of `targets.len()` values per unit. Units with
/// zero base weight keep zero weight. The solution is `w*_k = w_k (1 + h_kᵀ λ)`
/// with `λ` from the Gram system of the constraints that survive a greedy
/// rank-revealing Cholesky factorization.
pub fn calibrate(base: &[f64], h: &[f64], targets: &[f64], month: usize) -> Result<CalibrationOutcome> {
    let p = targets.len();
    if h.len() != base.len() * p {
        return Err(Error::shape(base.len() * p, h.len()));
    }
    let mut gram = vec![0.0; p * p];
    let mut resid = targets.to_vec();
    let mut scale = vec![0.0f64; p];
    for (k, &w) in base.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &h[k * p..(k + 1) * p];
        for i in 0..p {
            resid[i] -= w * row[i];
            scale[i] += (w * row[i]).abs();
            for j in 0..=i {
                gram[i * p + j] += w * row[i] * row[j];
            }
        }
    }
    let rounding = base.len() as f64 * f64::EPSILON;
    for i in 0..p {
        if resid[i].abs() <= rounding * scale[i] {
            resid[i] = 0.0;
        }
    }

    // incremental Cholesky over constraints in order, skipping dependent ones
    let max_diag = (0..p).map(|i| gram[i * p + i]).fold(0.0f64, f64::max);
    let mut retained: Vec<usize> = Vec::with_capacity(p);
    let mut dropped = Vec::new();
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut row = vec![0.0; retained.len() + 1];
        for (a, &i) in retained.iter().enumerate() {
            let g = gram[j.max(i) * p + j.min(i)];
            let s: f64 = (0..a).map(|b| l[a][b] * row[b]).sum();
            row[a] = (g - s) / l[a][a];
        }
        let d = gram[j * p + j] - row[..retained.len()].iter().map(|x| x * x).sum::<f64>();
        if max_diag > 0.0 && d > CALIBRATION_RANK_TOL * max_diag {
            let n = retained.len();
            row[n] = d.sqrt();
            l.push(row);
            retained.push(j);
        } else {
            dropped.push(j);
        }
    }

    // L Lᵀ λ = r on the retained set
    let n = retained.len();
    let mut y = vec![0.0; n];
    for a in 0..n {
        let s: f64 = (0..a).map(|b| l[a][b] * y[b]).sum();
        y[a] = (resid[retained[a]] - s) / l[a][a];
    }
    let mut lambda = vec![0.0; n];
    for a in (0..n).rev() {
        let s: f64 = (a + 1..n).map(|b| l[b][a] * lambda[b]).sum();
        lambda[a] = (y[a] - s) / l[a][a];
    }

    let mut weights = Vec::with_capacity(base.len());
    let mut achieved = vec![0.0; p];
    let mut negative = 0;
    for (k, &w) in base.iter().enumerate() {
        if w == 0.0 {
            weights.push(0.0);
            continue;
        }
        let row = &h[k * p..(k + 1) * p];
        let adj: f64 = retained.iter().zip(&lambda).map(|(&j, &lam)| row[j] * lam).sum();
        let ws = w * (1.0 + adj);
        if ws < 0.0 {
            negative += 1;
        }
        for j in 0..p {
            achieved[j] += ws * row[j];
        }
        weights.push(ws);
    }
    for j in 0..p {
        let tol = CALIBRATION_SATISFY_TOL * scale[j].max(targets[j].abs()).max(f64::MIN_POSITIVE);
        if (achieved[j] - targets[j]).abs() > tol {
            return Err(Error::Calibration {
                month,
                reason: format!(
                    "constraint {} ({}) reaches {} instead of {}",
                    j + 1,
                    if dropped.contains(&j) { "dependent" } else { "retained" },
                    achieved[j],
                    targets[j]
                ),
            });
        }
    }
    Ok(CalibrationOutcome {
        weights,
        retained,
        dropped,
        negative,
    })
}

/// The proxy of one unit: `prev` is `Some(z_{m-1})` for continuing units.
pub fn rc_proxy(alpha: f64, tau: f64, prev: Option<[f64; 3]>, cur: [f64; 3], imputed: [f64; 3]) -> [f64; 3] {
    let mut z = [0.0; 3];
    for e in 0..3 {
        z[e] = match prev {
            Some(p) => alpha * ((p[e] - cur[e]) / tau + cur[e]) + (1.0 - alpha) * p[e],
            None => alpha * cur[e] + (1.0 - alpha) * imputed[e],
        };
    }
    z
}

fn one_hot(s: u8) -> [f64; 3] {
    let mut v = [0.0; 3];
    v[s as usize] = 1.0;
    v
}

#[derive(Clone, Debug)]
pub struct RcResult {
    pub totals: Totals,
    /// Calibrated proxy totals `Σ w^{rc}_m z^(α)_m`; month 1 holds the direct totals.
    pub proxy_totals: Totals,
    pub weights: WeightSet,
    pub negative: Vec<usize>,
}

/// Unit-level regression composite on one sample; `x_targets[m-1]` holds the
/// month-`m` totals of the two auxiliary variables.
pub fn regression_composite(
    design: &RotationDesign,
    alpha: f64,
    sample: &SampleData,
    w: &WeightSet,
    x_targets: &[[f64; 2]],
) -> Result<RcResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let a = sample.assignment();
    let months = a.months();
    if x_targets.len() < months {
        return Err(Error::shape(months, x_targets.len()));
    }
    let (groups, size) = (a.groups(), a.group_size());
    let mut rc_w = w.clone();
    let mut totals = Totals::zeros(months);
    let mut proxy_totals = Totals::zeros(months);
    let mut negative = vec![0; months];

    let first = super::weighted_totals(
        sample.month_status(1).iter().copied().zip(w.month(1).1.iter().copied()),
    );
    for e in 0..3 {
        totals.set(1, e + 1, first[e]);
        proxy_totals.set(1, e + 1, first[e]);
    }
    let mut prev_sum = w.month_sum(1);
    let month_size = a.month_size();
    for m in 2..=months {
        let (_, base) = w.month(m);
        let statuses = sample.month_status(m);
        let covs = sample.month_covariates(m);
        let mut overlap = 0.0;
        for g in 1..=groups {
            if design.predecessor(g).is_some() {
                overlap += base[(g - 1) * size..g * size].iter().sum::<f64>();
            }
        }
        let tau = base.iter().sum::<f64>() / overlap;
        let prev_tz = totals.row(m - 1);
        let imputed = prev_tz.map(|t| t / prev_sum);
        let mut h = vec![0.0; month_size * 5];
        for g in 1..=groups {
            let pred = design.predecessor(g);
            for s in 0..size {
                let i = (g - 1) * size + s;
                let prev = pred.map(|p| one_hot(sample.group_status(m - 1, p)[s]));
                let z = rc_proxy(alpha, tau, prev, one_hot(statuses[i]), imputed);
                h[i * 5..i * 5 + 3].copy_from_slice(&z);
                h[i * 5 + 3] = covs[i][0] as f64;
                h[i * 5 + 4] = covs[i][1] as f64;
            }
        }
        let targets = [prev_tz[0], prev_tz[1], prev_tz[2], x_targets[m - 1][0], x_targets[m - 1][1]];
        let out = calibrate(base, &h, &targets, m)?;
        let mut t = [0.0; 3];
        let mut tz = [0.0; 3];
        for (i, &ws) in out.weights.iter().enumerate() {
            t[statuses[i] as usize] += ws;
            for e in 0..3 {
                tz[e] += ws * h[i * 5 + e];
            }
        }
        for e in 0..3 {
            totals.set(m, e + 1, t[e]);
            proxy_totals.set(m, e + 1, tz[e]);
        }
        prev_sum = out.weights.iter().sum();
        negative[m - 1] = out.negative;
        rc_w.values_mut()[(m - 1) * month_size..m * month_size].copy_from_slice(&out.weights);
    }
    Ok(RcResult {
        totals,
        proxy_totals,
        weights: rc_w,
        negative,
    })
}

const CATEGORIES: usize = 48;

/// One sample condensed for repeated regression composite runs: units sharing
/// (continuing or entering, previous status, current status, auxiliaries)
/// share their calibration adjustment, so only category weight sums matter.
#[derive(Clone, Debug)]
pub struct RcPanel {
    months: usize,
    first: [f64; 3],
    first_sum: f64,
    /// Per month from 2: base-weight sum and unit count of each category.
    weight: Vec<[f64; CATEGORIES]>,
    count: Vec<[u32; CATEGORIES]>,
    overlap: Vec<f64>,
    total: Vec<f64>,
}

fn category(prev: Option<u8>, cur: u8, x: [u8; 2]) -> usize {
    let xi = (x[0] & 1) as usize + 2 * (x[1] & 1) as usize;
    match prev {
        Some(p) => ((p as usize * 3 + cur as usize) * 4) + xi,
        None => 36 + cur as usize * 4 + xi,
    }
}

impl RcPanel {
    pub fn new(design: &RotationDesign, sample: &SampleData, w: &WeightSet) -> Result<Self> {
        let a = sample.assignment();
        let (months, groups, size) = (a.months(), a.groups(), a.group_size());
        let first = super::weighted_totals(
            sample.month_status(1).iter().copied().zip(w.month(1).1.iter().copied()),
        );
        let mut weight = Vec::with_capacity(months);
        let mut count = Vec::with_capacity(months);
        let mut overlap = Vec::with_capacity(months);
        let mut total = Vec::with_capacity(months);
        for m in 2..=months {
            let (_, base) = w.month(m);
            let statuses = sample.month_status(m);
            let covs = sample.month_covariates(m);
            let mut wc = [0.0; CATEGORIES];
            let mut nc = [0u32; CATEGORIES];
            let mut ov = 0.0;
            for g in 1..=groups {
                let pred = design.predecessor(g);
                for s in 0..size {
                    let i = (g - 1) * size + s;
                    let prev = pred.map(|p| sample.group_status(m - 1, p)[s]);
                    if prev.is_some() {
                        ov += base[i];
                    }
                    let c = category(prev, statuses[i], covs[i]);
                    wc[c] += base[i];
                    nc[c] += 1;
                }
            }
            weight.push(wc);
            count.push(nc);
            overlap.push(ov);
            total.push(base.iter().sum());
        }
        Ok(Self {
            months,
            first,
            first_sum: w.month_sum(1),
            weight,
            count,
            overlap,
            total,
        })
    }

    /// Totals and per-month negative-weight counts for one `α`.
    pub fn run(&self, alpha: f64, x_targets: &[[f64; 2]]) -> Result<(Totals, Vec<usize>)> {
        let mut totals = Totals::zeros(self.months);
        let mut negative = vec![0; self.months];
        for e in 0..3 {
            totals.set(1, e + 1, self.first[e]);
        }
        let mut prev_tz = self.first;
        let mut prev_sum = self.first_sum;
        let mut h = [0.0; CATEGORIES * 5];
        let mut base = [0.0; CATEGORIES];
        let mut cur_of = [0u8; CATEGORIES];
        for m in 2..=self.months {
            let i = m - 2;
            let tau = self.total[i] / self.overlap[i];
            let imputed = prev_tz.map(|t| t / prev_sum);
            let mut n = 0;
            let mut slots = [0usize; CATEGORIES];
            for c in 0..CATEGORIES {
                if self.weight[i][c] == 0.0 {
                    continue;
                }
                let (prev, cur, xi) = if c < 36 {
                    (Some(one_hot((c / 12) as u8)), (c / 4) % 3, c % 4)
                } else {
                    (None, (c - 36) / 4, c % 4)
                };
                let z = rc_proxy(alpha, tau, prev, one_hot(cur as u8), imputed);
                h[n * 5..n * 5 + 3].copy_from_slice(&z);
                h[n * 5 + 3] = (xi & 1) as f64;
                h[n * 5 + 4] = (xi >> 1) as f64;
                base[n] = self.weight[i][c];
                cur_of[n] = cur as u8;
                slots[n] = c;
                n += 1;
            }
            let targets = [prev_tz[0], prev_tz[1], prev_tz[2], x_targets[m - 1][0], x_targets[m - 1][1]];
            let out = calibrate(&base[..n], &h[..n * 5], &targets, m)?;
            let mut t = [0.0; 3];
            let mut sum = 0.0;
            for (j, &ws) in out.weights.iter().enumerate() {
                t[cur_of[j] as usize] += ws;
                sum += ws;
                if ws < 0.0 {
                    negative[m - 1] += self.count[i][slots[j]] as usize;
                }
            }
            for e in 0..3 {
                totals.set(m, e + 1, t[e]);
            }
            prev_tz = t;
            prev_sum = sum;
        }
        Ok((totals, negative))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::prelude::Solve;
    use faer::Mat;

    #[test]
    fn single_constraint_scales_uniformly() {
        let base = [2.0; 6];
        let h = [1.0; 6];
        let out = calibrate(&base, &h, &[18.0], 1).unwrap();
        for w in out.weights {
            assert!((w - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn satisfied_constraints_keep_base_weights() {
        let base = [1.5, 2.0, 0.5, 4.0];
        let h = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 2.0];
        let mut t = [0.0; 2];
        for k in 0..4 {
            t[0] += base[k] * h[2 * k];
            t[1] += base[k] * h[2 * k + 1];
        }
        let out = calibrate(&base, &h, &t, 1).unwrap();
        assert_eq!(out.weights, base.to_vec());

        let base = [1.0, 2.0, 3.0, 1.5, 2.5];
        let h = [1.0, 0.2, 1.0, 0.7, 1.0, 1.1, 1.0, 0.0, 1.0, 0.4];
        let mut t = [0.0; 2];
        for k in 0..5 {
            t[0] += base[k] * h[2 * k];
            t[1] += base[k] * h[2 * k + 1];
        }
        let out = calibrate(&base, &h, &t, 1).unwrap();
        assert_eq!(out.weights, base.to_vec());
    }

    #[test]
    fn kkt_oracle_on_five_units() {
        let base = [1.0, 2.0, 3.0, 1.5, 2.5];
        let h = [1.0, 0.2, 1.0, 0.7, 1.0, 1.1, 1.0, 0.0, 1.0, 0.4];
        let t = [11.0, 6.0];
        let out = calibrate(&base, &h, &t, 1).unwrap();
        // [diag(2/w) Hᵀ-ish; H 0] [w*; μ] = [2; T]
        let n = 7;
        let kkt = Mat::from_fn(n, n, |i, j| match (i < 5, j < 5) {
            (true, true) => if i == j { 2.0 / base[i] } else { 0.0 },
            (true, false) => h[i * 2 + (j - 5)],
            (false, true) => h[j * 2 + (i - 5)],
            _ => 0.0,
        });
        let rhs = Mat::from_fn(n, 1, |i, _| if i < 5 { 2.0 } else { t[i - 5] });
        let sol = kkt.partial_piv_lu().solve(&rhs);
        for k in 0..5 {
            assert!((out.weights[k] - sol[(k, 0)]).abs() < 1e-9);
        }
    }

    #[test]
    fn dependent_constraint_is_dropped() {
        let base = [1.0, 1.0, 1.0];
        // third column = first + second
        let h = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        let out = calibrate(&base, &h, &[2.0, 3.0, 5.0], 4).unwrap();
        assert_eq!(out.dropped, vec![2]);
        let inconsistent = calibrate(&base, &h, &[2.0, 3.0, 6.0], 4);
        assert!(matches!(inconsistent, Err(Error::Calibration { month: 4, .. })));
    }

    #[test]
    fn proxy_branches() {
        let prev = [1.0, 0.0, 0.0];
        let cur = [0.0, 1.0, 0.0];
        let imputed = [0.6, 0.05, 0.35];
        // α = 0: previous status for continuing units, imputed mean for entering
        assert_eq!(rc_proxy(0.0, 4.0 / 3.0, Some(prev), cur, imputed), prev);
        assert_eq!(rc_proxy(0.0, 4.0 / 3.0, None, cur, imputed), imputed);
        // α = 1: τ⁻¹ (z_{m-1} − z_m) + z_m, and the current status
        let z = rc_proxy(1.0, 4.0 / 3.0, Some(prev), cur, imputed);
        assert!((z[0] - 0.75).abs() < 1e-15 && (z[1] - 0.25).abs() < 1e-15);
        assert_eq!(rc_proxy(1.0, 4.0 / 3.0, None, cur, imputed), cur);
    }
}
