//! Linearized rate variances of AK estimators without forming the weights.
//!
//! For status `e` the AK estimate is `t_m = k t_{m-1} + u_m` with
//! `u_m = φ(m)ᵀ (En_m, Co_m, Pr_m)`: entering-group sum, continuing-group sum
//! and the previous-month sum over the continuing units. The covariance of
//! these aggregates is computed once from `Σ`; each parameter point then only
//! needs `(2M)²` small quadratic forms and a Horner recursion.

use faer::{Mat, MatRef};

use crate::design::RotationDesign;
use crate::error::{Error, Result};
use crate::estimators::ak_phi;
use crate::evaluation::{ObjectiveKind, RateVariances};

/// Rates only involve the employed and unemployed totals.
const RATE_STATUSES: usize = 2;

#[derive(Clone, Debug)]
pub struct AkVarianceKernel {
    design: RotationDesign,
    months: usize,
    /// 3x3 covariance blocks of the aggregates, row-major, block `i n + j`
    /// with `i = m - 1 + M e`.
    blocks: Vec<[f64; 9]>,
    j1: Vec<[f64; 3]>,
}

impl AkVarianceKernel {
    /// `sigma` is over flattened `(M, G, 3)` month-in-sample estimates; `j1`
    /// holds the rate gradients of every month.
    pub fn new(design: &RotationDesign, sigma: MatRef<'_, f64>, j1: &[[f64; 3]]) -> Result<Self> {
        let months = j1.len();
        let groups = design.groups();
        let dim = 3 * months * groups;
        if sigma.nrows() != dim || sigma.ncols() != dim {
            return Err(Error::shape(dim, sigma.nrows()));
        }
        let col = |m: usize, g: usize, e: usize| (m - 1) + months * ((g - 1) + groups * e);
        let entering = design.entering_groups();
        let continuing = design.continuing_groups();
        let naggs = 3 * months * RATE_STATUSES;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); naggs];
        for e in 0..RATE_STATUSES {
            for m in 1..=months {
                let base = 3 * (m - 1 + months * e);
                members[base] = entering.iter().map(|&g| col(m, g, e)).collect();
                members[base + 1] = continuing.iter().map(|&g| col(m, g, e)).collect();
                if m > 1 {
                    members[base + 2] = continuing
                        .iter()
                        .map(|&g| col(m - 1, design.predecessor(g).expect("continuing"), e))
                        .collect();
                }
            }
        }
        let sa = Mat::from_fn(dim, naggs, |i, a| members[a].iter().map(|&c| sigma[(i, c)]).sum::<f64>());
        let agg = Mat::from_fn(naggs, naggs, |a, b| members[a].iter().map(|&r| sa[(r, b)]).sum::<f64>());
        let n = months * RATE_STATUSES;
        let mut blocks = vec![[0.0; 9]; n * n];
        for i in 0..n {
            for j in 0..n {
                for t in 0..3 {
                    for tp in 0..3 {
                        let (a, b) = (3 * i + t, 3 * j + tp);
                        blocks[i * n + j][3 * t + tp] = 0.5 * (agg[(a, b)] + agg[(b, a)]);
                    }
                }
            }
        }
        Ok(Self {
            design: design.clone(),
            months,
            blocks,
            j1: j1.to_vec(),
        })
    }

    pub fn months(&self) -> usize {
        self.months
    }

    /// Rate and change variances at `(a₁, k₁, a₂, k₂)`.
    pub fn variances(&self, p: [f64; 4]) -> RateVariances {
        let months = self.months;
        let a = [p[0], p[2]];
        let k = [p[1], p[3]];
        let n = months * RATE_STATUSES;
        let idx = |m: usize, e: usize| (m - 1) + months * e;
        let phis: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let (m, e) = (i % months + 1, i / months);
                ak_phi(&self.design, a[e], k[e], m == 1)
            })
            .collect();
        // G[(m,e),(m',e')] = Cov(u_{m,e}, u_{m',e'})
        let mut gmat = vec![0.0; n * n];
        for i in 0..n {
            let pi = phis[i];
            for j in 0..=i {
                let blk = &self.blocks[i * n + j];
                let pj = phis[j];
                let mut s = 0.0;
                for t in 0..3 {
                    s += pi[t] * (blk[3 * t] * pj[0] + blk[3 * t + 1] * pj[1] + blk[3 * t + 2] * pj[2]);
                }
                gmat[i * n + j] = s;
                gmat[j * n + i] = s;
            }
        }
        // B_e[m][j] = Cov(t_{m,e}, u_j)
        let mut b = vec![vec![0.0; n]; n];
        for e in 0..RATE_STATUSES {
            for m in 1..=months {
                let i = idx(m, e);
                for j in 0..n {
                    let prev = if m > 1 { k[e] * b[idx(m - 1, e)][j] } else { 0.0 };
                    b[i][j] = prev + gmat[i * n + j];
                }
            }
        }
        let mut level = vec![0.0; months];
        let mut cross = vec![0.0; months];
        for m in 1..=months {
            let jm = &self.j1[m - 1];
            for e in 0..RATE_STATUSES {
                let row = &b[idx(m, e)];
                for f in 0..RATE_STATUSES {
                    // Horner over n ≤ m gives Cov(t_{m,e}, t_{n,f})
                    let mut acc = 0.0;
                    let mut before = 0.0;
                    for nn in 1..=m {
                        before = acc;
                        acc = k[f] * acc + row[idx(nn, f)];
                    }
                    level[m - 1] += jm[e] * jm[f] * acc;
                    if m > 1 {
                        cross[m - 1] += jm[e] * self.j1[m - 2][f] * before;
                    }
                }
            }
        }
        let change = (1..months)
            .map(|m| level[m] + level[m - 1] - 2.0 * cross[m])
            .collect();
        RateVariances { level, change }
    }

    pub fn objective(&self, p: [f64; 4], kind: ObjectiveKind) -> f64 {
        self.variances(p).objective(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ak_linear_weights, AkCoefficients, Totals};
    use crate::evaluation::linearized_variance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_weights() {
        let months = 7;
        let design = RotationDesign::with_months(months);
        let dim = 3 * months * 8;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Mat::from_fn(dim, dim + 5, |_, _| rng.random_range(-1.0..1.0));
        let sigma = &f * f.transpose();
        let t = Totals::from_rows(
            (0..months)
                .map(|_| [rng.random_range(50.0..90.0), rng.random_range(3.0..9.0), 40.0])
                .collect(),
        );
        let (j1, _) = crate::evaluation::rate_jacobians(&t).unwrap();
        let kernel = AkVarianceKernel::new(&design, sigma.as_ref(), &j1).unwrap();
        for _ in 0..10 {
            let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.5));
            let w = ak_linear_weights(&AkCoefficients::from_params(p), &design, months);
            let dense = linearized_variance(&w, sigma.as_ref(), &t).unwrap();
            let fast = kernel.variances(p);
            for (x, y) in dense.level.iter().chain(&dense.change).zip(fast.level.iter().chain(&fast.change)) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12), "{x} vs {y}");
            }
        }
    }
}
