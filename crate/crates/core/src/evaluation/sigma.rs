//! Covariance matrices of the flattened month-in-sample estimates.

use faer::{Mat, MatRef, Side};

use super::Enumeration;
use crate::design::RotationDesign;
use crate::error::{Error, Result};
use crate::estimators::SampleData;

/// Covariance of the rows of `y`, dividing by the number of rows.
pub fn covariance_of_rows(y: MatRef<'_, f64>) -> Mat<f64> {
    let (n, p) = (y.nrows(), y.ncols());
    let mut centered = y.to_owned();
    for j in 0..p {
        let mean = (0..n).map(|i| y[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let gram = centered.transpose() * &centered;
    let scale = 1.0 / n as f64;
    Mat::from_fn(p, p, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        0.5 * (gram[(a, b)] + gram[(b, a)]) * scale
    })
}

/// The exact `Σ_y`: covariance of the month-in-sample estimates over the
/// enumerated draws.
pub fn exact_sigma(enumeration: &Enumeration<'_>) -> Mat<f64> {
    covariance_of_rows(enumeration.realizations().as_ref())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: MatRef<'_, f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .expect("eigendecomposition did not converge");
    let s = evd.S().column_vector();
    s.iter().fold(f64::INFINITY, |acc, &x| acc.min(x))
}

/// Household status counts of one draw: `[month][group][slot] -> [3]`.
fn household_totals(sample: &SampleData) -> Vec<Vec<Vec<[f64; 3]>>> {
    let a = sample.assignment();
    let hs = a.household_size();
    (1..=a.months())
        .map(|m| {
            (1..=a.groups())
                .map(|g| {
                    sample
                        .group_status(m, g)
                        .chunks(hs)
                        .map(|hh| {
                            let mut t = [0.0; 3];
                            for &s in hh {
                                t[s as usize] += 1.0;
                            }
                            t
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `σ̂²_{m,m'}` over the households present in both months; zero when fewer
/// than two households overlap.
fn cross_covariance(
    totals: &[Vec<Vec<[f64; 3]>>],
    delta: &[usize],
    m: usize,
    mp: usize,
) -> [[f64; 3]; 3] {
    let mut pairs: Vec<(&[f64; 3], &[f64; 3])> = Vec::new();
    for (g, &d) in delta.iter().enumerate() {
        let label = m + d;
        if let Some(gp) = delta.iter().position(|&dp| mp + dp == label) {
            pairs.extend(totals[m - 1][g].iter().zip(&totals[mp - 1][gp]));
        }
    }
    let mut out = [[0.0; 3]; 3];
    let n = pairs.len();
    if n < 2 {
        return out;
    }
    let mut xbar = [0.0; 3];
    let mut ybar = [0.0; 3];
    for (x, y) in &pairs {
        for e in 0..3 {
            xbar[e] += x[e];
            ybar[e] += y[e];
        }
    }
    for e in 0..3 {
        xbar[e] /= n as f64;
        ybar[e] /= n as f64;
    }
    for (x, y) in &pairs {
        for e in 0..3 {
            for f in 0..3 {
                out[e][f] += (x[e] - xbar[e]) * (y[f] - ybar[f]);
            }
        }
    }
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    out
}

/// The plug-in covariance `Σ̂` from one draw's microdata.
///
/// Entries for the same cluster (`m + δ_g = m' + δ_g'`) are
/// `H² (1 − n/H) σ̂²_{m,m'} / (n/G)` with `n` the households of one month;
/// entries for different clusters are `−H σ̂²_{m,m'}`.
pub fn estimate_sigma(design: &RotationDesign, sample: &SampleData) -> Result<Mat<f64>> {
    let a = sample.assignment();
    if a.groups() != design.groups() || a.delta() != design.delta.as_slice() {
        return Err(Error::shape(
            format!("{:?}", design.delta),
            format!("{:?}", a.delta()),
        ));
    }
    let (months, groups) = (a.months(), a.groups());
    let totals = household_totals(sample);
    let h = design.households as f64;
    let n = (groups * design.group_households) as f64;
    let same = h * h * (1.0 - n / h) / (n / groups as f64);
    let other = -h;

    let mut blocks = vec![[[0.0; 3]; 3]; months * months];
    let span = design.delta[groups - 1];
    for m in 1..=months {
        for mp in m..=months.min(m + span) {
            let c = cross_covariance(&totals, &design.delta, m, mp);
            blocks[(m - 1) * months + (mp - 1)] = c;
            let mut t = [[0.0; 3]; 3];
            for e in 0..3 {
                for f in 0..3 {
                    t[f][e] = c[e][f];
                }
            }
            blocks[(mp - 1) * months + (m - 1)] = t;
        }
    }
    let dim = 3 * months * groups;
    let coord = |i: usize| {
        let m = i % months;
        let g = (i / months) % groups;
        let e = i / (months * groups);
        (m + 1, g, e)
    };
    Ok(Mat::from_fn(dim, dim, |i, j| {
        let (m, g, e) = coord(i);
        let (mp, gp, f) = coord(j);
        let b = blocks[(m - 1) * months + (mp - 1)][e][f];
        if b == 0.0 {
            0.0
        } else if m + design.delta[g] == mp + design.delta[gp] {
            same * b
        } else {
            other * b
        }
    }))
}
