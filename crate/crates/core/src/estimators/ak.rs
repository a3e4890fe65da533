//! AK composite estimation.
//!
//! With `G` groups of which `E` enter and `C` continue each month, and
//! diagonal coefficients `A = diag(a)`, `K = diag(k)`,
//!
//! ```text
//! t_1 = direct_1
//! t_m = (I - K) direct_m + K (t_{m-1} + (G/C) Σ_{S_m ∩ S_{m-1}} (w_m y_m - w_{m-1} y_{m-1}))
//!       + G A (Σ_{S_m \ S_{m-1}} w_m y_m - (E/C) Σ_{S_m ∩ S_{m-1}} w_m y_m)
//! ```
//!
//! `K = 0, A = 0` gives the direct estimator.

use faer::Mat;

use super::{direct_estimator, LinearWeights, SampleData, Totals, WeightSet};
use crate::arrays::ArrayMatrix;
use crate::design::RotationDesign;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AkCoefficients {
    pub a: [f64; 3],
    pub k: [f64; 3],
}

impl AkCoefficients {
    /// Production values: `a = 0.4, k = 0.7` for employment and
    /// `a = 0.3, k = 0.4` for unemployment.
    pub fn cps() -> Self {
        Self {
            a: [0.4, 0.3, 0.0],
            k: [0.7, 0.4, 0.0],
        }
    }

    pub fn zero() -> Self {
        Self {
            a: [0.0; 3],
            k: [0.0; 3],
        }
    }

    /// From `(a_1, k_1, a_2, k_2)`; status 3 gets zeros.
    pub fn from_params(p: [f64; 4]) -> Self {
        Self {
            a: [p[0], p[2], 0.0],
            k: [p[1], p[3], 0.0],
        }
    }

    pub fn params(&self) -> [f64; 4] {
        [self.a[0], self.k[0], self.a[1], self.k[1]]
    }
}

/// Month-level multipliers of the entering sum, continuing sum and the
/// previous-month sum over the continuing units, for one status.
pub(crate) fn phi(design: &RotationDesign, a: f64, k: f64, first_month: bool) -> [f64; 3] {
    let g = design.groups() as f64;
    if first_month {
        return [1.0 / g, 1.0 / g, 0.0];
    }
    let c = design.continuing_groups().len() as f64;
    let e = design.entering_groups().len() as f64;
    [
        (1.0 - k) / g + a,
        (1.0 - k) / g + k / c - a * e / c,
        -k / c,
    ]
}

/// Recursive AK on the microdata of one sample.
pub fn ak_recursive(
    design: &RotationDesign,
    sample: &SampleData,
    w: &WeightSet,
    coeffs: &AkCoefficients,
) -> Result<Totals> {
    let direct = direct_estimator(sample, w)?;
    let a = sample.assignment();
    if a.groups() != design.groups() {
        return Err(Error::shape(design.groups(), a.groups()));
    }
    let groups = a.groups() as f64;
    let size = a.group_size();
    let entering = design.entering_groups();
    let continuing = design.continuing_groups();
    let (n_enter, n_cont) = (entering.len() as f64, continuing.len() as f64);

    let mut rows: Vec<[f64; 3]> = Vec::with_capacity(a.months());
    let sum_group = |m: usize, g: usize, acc: &mut [f64; 3]| {
        let ws = &w.month(m).1[(g - 1) * size..g * size];
        for (&s, &wk) in sample.group_status(m, g).iter().zip(ws) {
            acc[s as usize] += wk;
        }
    };
    rows.push(direct.row(1));
    for m in 2..=a.months() {
        let mut enter = [0.0; 3];
        let mut cont = [0.0; 3];
        let mut change = [0.0; 3];
        for &g in &entering {
            sum_group(m, g, &mut enter);
        }
        for &g in &continuing {
            sum_group(m, g, &mut cont);
            let p = design.predecessor(g).expect("continuing group");
            let now_w = &w.month(m).1[(g - 1) * size..g * size];
            let prev_w = &w.month(m - 1).1[(p - 1) * size..p * size];
            let now = sample.group_status(m, g);
            let prev = sample.group_status(m - 1, p);
            for i in 0..size {
                change[now[i] as usize] += now_w[i];
                change[prev[i] as usize] -= prev_w[i];
            }
        }
        let d = direct.row(m);
        let before = rows[m - 2];
        let mut row = [0.0; 3];
        for e in 0..3 {
            let (ae, ke) = (coeffs.a[e], coeffs.k[e]);
            row[e] = (1.0 - ke) * d[e]
                + ke * (before[e] + groups / n_cont * change[e])
                + groups * ae * (enter[e] - n_enter / n_cont * cont[e]);
        }
        rows.push(row);
    }
    Ok(Totals::from_rows(rows))
}

/// The coefficient array `c_{m,m',g}` as linear weights on the month-in-sample
/// estimates, built by the recursion
/// `c_{m,·} = K c_{m-1,·} + (month-m and month-(m-1) multipliers)`.
pub fn ak_linear_weights(
    coeffs: &AkCoefficients,
    design: &RotationDesign,
    months: usize,
) -> LinearWeights {
    let groups = design.groups();
    let rows = 3 * months;
    let cols = 3 * months * groups;
    let col = |m: usize, g: usize, e: usize| (m - 1) + months * ((g - 1) + groups * e);
    let mut mat = Mat::<f64>::zeros(rows, cols);
    let entering = design.entering_groups();
    let continuing = design.continuing_groups();
    for e in 0..3 {
        let (a, k) = (coeffs.a[e], coeffs.k[e]);
        for m in 1..=months {
            let row = (m - 1) + months * e;
            if m > 1 {
                let prev = row - 1;
                for c in 0..cols {
                    let v = mat[(prev, c)];
                    if v != 0.0 {
                        mat[(row, c)] = k * v;
                    }
                }
            }
            let [p_enter, p_cont, p_prev] = phi(design, a, k, m == 1);
            for &g in &entering {
                mat[(row, col(m, g, e))] += p_enter;
            }
            for &g in &continuing {
                mat[(row, col(m, g, e))] += p_cont;
                if m > 1 {
                    let p = design.predecessor(g).expect("continuing group");
                    mat[(row, col(m - 1, p, e))] += p_prev;
                }
            }
        }
    }
    LinearWeights::from_matrix(
        ArrayMatrix::from_mat(&[months, 3], &[months, groups, 3], mat).expect("consistent dims"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{base_weights, mis_estimator};
    use crate::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

    #[test]
    fn first_month_weights_are_one_over_g() {
        let design = RotationDesign::with_months(5);
        let w = ak_linear_weights(&AkCoefficients::cps(), &design, 5);
        for g in 1..=8 {
            for e in 1..=3 {
                assert_eq!(w.matrix().get(&[1, e], &[1, g, e]), 0.125);
            }
        }
    }

    #[test]
    fn weights_sum_to_identity() {
        let design = RotationDesign::with_months(30);
        let c = AkCoefficients::from_params([0.9, -0.4, 0.25, 1.3]);
        let w = ak_linear_weights(&c, &design, 30);
        for m in 1..=30 {
            for e in 1..=3 {
                for f in 1..=3 {
                    let mut s = 0.0;
                    for mp in 1..=30 {
                        for g in 1..=8 {
                            s += w.matrix().get(&[m, e], &[mp, g, f]);
                        }
                    }
                    let want = if e == f { 1.0 } else { 0.0 };
                    assert!((s - want).abs() < 1e-12, "m={m} e={e} f={f} sum={s}");
                }
            }
        }
    }

    #[test]
    fn zero_coefficients_give_direct_weights() {
        let design = RotationDesign::with_months(4);
        let w = ak_linear_weights(&AkCoefficients::zero(), &design, 4);
        for m in 1..=4 {
            for mp in 1..=4 {
                for g in 1..=8 {
                    let want = if m == mp { 0.125 } else { 0.0 };
                    assert_eq!(w.matrix().get(&[m, 2], &[mp, g, 2]), want);
                }
            }
        }
    }

    #[test]
    fn recursion_matches_linear_form() {
        let design = RotationDesign {
            households: 2000,
            months: 20,
            ..RotationDesign::default()
        };
        let settings = GenerationSettings {
            households: 2000,
            ..GenerationSettings::default()
        };
        let t = RateTargets::packaged().truncated(20).unwrap();
        let pop = generate_population_with(Variant::IndexWeighted, &t, 4, &settings).unwrap();
        let c = AkCoefficients::from_params([0.3, 0.5, -0.2, 0.8]);
        let weights = ak_linear_weights(&c, &design, 20);
        for r in [1, 37, 100] {
            let a = design.assignment(r).unwrap();
            let w = base_weights(&design, &a);
            let s = SampleData::observe(&pop, a, None).unwrap();
            let rec = ak_recursive(&design, &s, &w, &c).unwrap();
            let lin = weights.apply(&mis_estimator(&s, &w).unwrap()).unwrap();
            for m in 1..=20 {
                for e in 1..=3 {
                    let (x, y) = (rec.get(m, e), lin.get(m, e));
                    assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
                }
            }
        }
    }
}
