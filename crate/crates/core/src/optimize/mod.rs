//! Best coefficients: Nelder-Mead and grid searches over the AK parameters,
//! the α grid of the regression composite, and the plug-in ("empirical")
//! versions that use `Σ̂` from the sample at hand.

mod ak_kernel;
mod nelder_mead;

pub use ak_kernel::AkVarianceKernel;
pub use nelder_mead::{nelder_mead, NelderMeadOptions, OptimizationResult, TracePoint};

use faer::MatRef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::RotationDesign;
use crate::error::{Error, Result};
use crate::estimators::{ak_recursive, blue_weights, AkCoefficients, LinearWeights, Totals};
use crate::evaluation::{
    estimate_sigma, rate_jacobians, DrawContext, Enumeration, Estimator, MomentReport, ObjectiveKind,
};

/// The production coefficients as `(a₁, k₁, a₂, k₂)`.
pub fn cps_start() -> [f64; 4] {
    AkCoefficients::cps().params()
}

#[derive(Clone, Debug)]
pub struct AkOptimum {
    pub kind: ObjectiveKind,
    pub best: OptimizationResult,
    /// Every start, the production point first.
    pub runs: Vec<OptimizationResult>,
}

impl AkOptimum {
    pub fn coefficients(&self) -> AkCoefficients {
        AkCoefficients::from_params(to4(&self.best.params))
    }
}

fn to4(p: &[f64]) -> [f64; 4] {
    [p[0], p[1], p[2], p[3]]
}

/// Nelder-Mead from the production point and `restarts` uniform points in
/// `[-1, 1]⁴` drawn from `seed`; the lowest value wins, ties to the earlier run.
pub fn optimal_ak(
    kernel: &AkVarianceKernel,
    kind: ObjectiveKind,
    restarts: usize,
    seed: u64,
    opts: &NelderMeadOptions,
) -> AkOptimum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![cps_start()];
    for _ in 0..restarts {
        starts.push(std::array::from_fn(|_| rng.random_range(-1.0..=1.0)));
    }
    let runs: Vec<OptimizationResult> = starts
        .par_iter()
        .map(|s| nelder_mead(|x| kernel.objective(to4(x), kind), s, opts))
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    AkOptimum {
        kind,
        best: runs[best].clone(),
        runs,
    }
}

/// The ten values `0.0, 0.1, …, 0.9` of the coarse coefficient grid.
pub fn census_values() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub params: [f64; 4],
    pub value: f64,
    pub table: Vec<([f64; 4], f64)>,
}

/// Exhaustive search over the given points; ties go to the first point.
pub fn grid_ak(kernel: &AkVarianceKernel, kind: ObjectiveKind, values: &[[f64; 4]]) -> GridResult {
    grid_search(|p| kernel.objective(p, kind), values)
}

pub fn grid_search(f: impl Fn([f64; 4]) -> f64 + Sync, values: &[[f64; 4]]) -> GridResult {
    let table: Vec<([f64; 4], f64)> = values.par_iter().map(|&p| (p, f(p))).collect();
    let mut best = 0;
    for (i, (_, v)) in table.iter().enumerate() {
        if v.total_cmp(&table[best].1).is_lt() {
            best = i;
        }
    }
    GridResult {
        params: table[best].0,
        value: table[best].1,
        table,
    }
}

pub fn product_grid(axes: [&[f64]; 4]) -> Vec<[f64; 4]> {
    let mut out = Vec::with_capacity(axes.iter().map(|a| a.len()).product());
    for &a1 in axes[0] {
        for &k1 in axes[1] {
            for &a2 in axes[2] {
                for &k2 in axes[3] {
                    out.push([a1, k1, a2, k2]);
                }
            }
        }
    }
    out
}

/// The 10⁴-point coarse grid search.
pub fn census_grid_ak(kernel: &AkVarianceKernel, kind: ObjectiveKind) -> GridResult {
    let v = census_values();
    grid_ak(kernel, kind, &product_grid([&v, &v, &v, &v]))
}

/// `{0, 0.05, …, 1}`.
pub fn alpha_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Exact MSE objective of a report: summed MSE of the rate levels, of the
/// changes, or both.
pub fn mse_objective(report: &MomentReport, kind: ObjectiveKind) -> f64 {
    let level: f64 = report.rates.iter().map(|m| m.mse).sum();
    let change: f64 = report.changes.iter().map(|m| m.mse).sum();
    match kind {
        ObjectiveKind::Level => level,
        ObjectiveKind::Change => change,
        ObjectiveKind::Compromise => level + change,
    }
}

#[derive(Clone, Debug)]
pub struct AlphaResult {
    pub kind: ObjectiveKind,
    pub alpha: f64,
    pub value: f64,
    /// `(α, objective)` for every α that ran.
    pub table: Vec<(f64, f64)>,
    /// `(α, reason)` for every α whose calibration failed.
    pub excluded: Vec<(f64, String)>,
}

/// Reports of the regression composite for each α, with failures kept apart.
pub fn alpha_reports(
    enumeration: &Enumeration<'_>,
    grid: &[f64],
) -> (Vec<(f64, MomentReport, Vec<usize>)>, Vec<(f64, String)>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for &alpha in grid {
        match enumeration
            .rc_estimates(alpha)
            .and_then(|(est, neg)| Ok((enumeration.report(format!("rc_{alpha}"), &est)?, neg)))
        {
            Ok((rep, neg)) => ok.push((alpha, rep, neg)),
            Err(e) => failed.push((alpha, e.to_string())),
        }
    }
    (ok, failed)
}

/// Grid argmin of the exact MSE objective over α; ties go to the smaller α.
pub fn best_alpha_from(
    reports: &[(f64, MomentReport, Vec<usize>)],
    excluded: Vec<(f64, String)>,
    kind: ObjectiveKind,
) -> Result<AlphaResult> {
    let table: Vec<(f64, f64)> = reports.iter().map(|(a, r, _)| (*a, mse_objective(r, kind))).collect();
    let best = table
        .iter()
        .copied()
        .reduce(|b, x| if x.1 < b.1 { x } else { b })
        .ok_or_else(|| Error::Invalid("no α on the grid could be evaluated".into()))?;
    Ok(AlphaResult {
        kind,
        alpha: best.0,
        value: best.1,
        table,
        excluded,
    })
}

pub fn best_alpha(enumeration: &Enumeration<'_>, kind: ObjectiveKind, grid: &[f64]) -> Result<AlphaResult> {
    let (reports, excluded) = alpha_reports(enumeration, grid);
    best_alpha_from(&reports, excluded, kind)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmpiricalVariant {
    Blue,
    Ak(ObjectiveKind),
}

#[derive(Clone, Debug)]
pub enum EmpiricalEstimator {
    Blue(LinearWeights),
    Ak(AkCoefficients),
}

/// Plugs a covariance (normally `Σ̂`) into the BLUE or into the AK search,
/// with rate gradients taken at `t`. The AK search runs from the production
/// point only.
pub fn empirical_best(
    variant: EmpiricalVariant,
    design: &RotationDesign,
    sigma_hat: MatRef<'_, f64>,
    t: &Totals,
    opts: &NelderMeadOptions,
) -> Result<EmpiricalEstimator> {
    match variant {
        EmpiricalVariant::Blue => Ok(EmpiricalEstimator::Blue(blue_weights(
            sigma_hat,
            t.months(),
            design.groups(),
        )?)),
        EmpiricalVariant::Ak(kind) => {
            let (j1, _) = rate_jacobians(t)?;
            let kernel = AkVarianceKernel::new(design, sigma_hat, &j1)?;
            let r = nelder_mead(|x| kernel.objective(to4(x), kind), &cps_start(), opts);
            Ok(EmpiricalEstimator::Ak(AkCoefficients::from_params(to4(&r.params))))
        }
    }
}

/// Estimator that re-estimates `Σ̂` on each draw and uses the empirical best
/// estimator of that draw.
pub struct EmpiricalBest {
    pub variant: EmpiricalVariant,
    pub options: NelderMeadOptions,
}

impl Estimator for EmpiricalBest {
    fn name(&self) -> String {
        match self.variant {
            EmpiricalVariant::Blue => "emp_blue".into(),
            EmpiricalVariant::Ak(kind) => format!("emp_ak_{}", kind.label()),
        }
    }

    fn estimate(&self, ctx: &DrawContext<'_>) -> Result<Totals> {
        let sigma_hat = estimate_sigma(ctx.design, ctx.sample)?;
        let t = ctx.mis.group_average();
        match empirical_best(self.variant, ctx.design, sigma_hat.as_ref(), &t, &self.options)? {
            EmpiricalEstimator::Blue(w) => w.apply(ctx.mis),
            EmpiricalEstimator::Ak(c) => ak_recursive(ctx.design, ctx.sample, ctx.weights, &c),
        }
    }
}

#[cfg(test)]
mod tests;
