//! Exact design-based evaluation.
//!
//! The design has `H / n` equiprobable draws, so running an estimator on every
//! draw gives its exact mean, variance and MSE. [`Enumeration`] walks the
//! draws once, keeping the month-in-sample realization matrix `Y` (one row per
//! draw, one column per flattened `(m, g, e)`), the direct estimates and a
//! condensed panel for the regression composite. Linear estimators are then
//! evaluated as `Y Wᵀ` without touching the microdata again.

mod linearize;
mod moments;
mod oracle;
mod sigma;
mod tables;

pub use linearize::{
    linearized_variance, rate_jacobian, rate_jacobians, rate_variances, totals_covariance,
    ObjectiveKind, RateVariances,
};
pub use moments::{Moment, MomentReport};
pub use oracle::{exact_linear_oracle, oracle_from_realizations, OracleVerdict};
pub use sigma::{covariance_of_rows, estimate_sigma, exact_sigma, min_eigenvalue};
pub use tables::{
    relative_mse_series, relative_mse_table, type1_quantile, QuantileRow, Target, QUANTILE_PROBS,
};

use faer::Mat;
use rayon::prelude::*;

use crate::design::RotationDesign;
use crate::error::{Error, Result};
use crate::estimators::{
    ak_recursive, base_weights, direct_estimator, mis_estimator, AkCoefficients, ErrorModel,
    LinearWeights, MisEstimates, RcPanel, SampleData, Totals, WeightSet,
};
use crate::population::{population_totals, Population};

/// Everything an estimator may look at for one draw.
pub struct DrawContext<'a> {
    pub design: &'a RotationDesign,
    pub sample: &'a SampleData,
    pub weights: &'a WeightSet,
    pub mis: &'a MisEstimates,
    pub x_targets: &'a [[f64; 2]],
}

/// An estimator of the `(M, 3)` totals that can be run on any draw.
pub trait Estimator: Sync {
    fn name(&self) -> String;
    fn estimate(&self, ctx: &DrawContext<'_>) -> Result<Totals>;
}

pub struct Direct;

impl Estimator for Direct {
    fn name(&self) -> String {
        "direct".into()
    }

    fn estimate(&self, ctx: &DrawContext<'_>) -> Result<Totals> {
        direct_estimator(ctx.sample, ctx.weights)
    }
}

/// Recursive AK with fixed coefficients.
pub struct Ak {
    pub label: String,
    pub coeffs: AkCoefficients,
}

impl Estimator for Ak {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn estimate(&self, ctx: &DrawContext<'_>) -> Result<Totals> {
        ak_recursive(ctx.design, ctx.sample, ctx.weights, &self.coeffs)
    }
}

/// Fixed linear weights on the month-in-sample estimates.
pub struct Linear {
    pub label: String,
    pub weights: LinearWeights,
}

impl Estimator for Linear {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn estimate(&self, ctx: &DrawContext<'_>) -> Result<Totals> {
        self.weights.apply(ctx.mis)
    }
}

/// Unit-level regression composite.
pub struct RegressionComposite {
    pub alpha: f64,
}

impl Estimator for RegressionComposite {
    fn name(&self) -> String {
        format!("rc_{}", self.alpha)
    }

    fn estimate(&self, ctx: &DrawContext<'_>) -> Result<Totals> {
        crate::estimators::regression_composite(
            ctx.design,
            self.alpha,
            ctx.sample,
            ctx.weights,
            ctx.x_targets,
        )
        .map(|r| r.totals)
    }
}

/// One population seen through every draw of a design.
pub struct Enumeration<'p> {
    population: &'p Population,
    design: RotationDesign,
    error: Option<ErrorModel>,
    draws: Vec<usize>,
    mis: Mat<f64>,
    direct: Vec<Totals>,
    panels: Vec<RcPanel>,
    truth: Totals,
    x_targets: Vec<[f64; 2]>,
}

impl<'p> Enumeration<'p> {
    /// All `H / n` draws.
    pub fn new(
        population: &'p Population,
        design: &RotationDesign,
        error: Option<&ErrorModel>,
    ) -> Result<Self> {
        let draws: Vec<usize> = (1..=design.draws()).collect();
        Self::with_draws(population, design, error, &draws)
    }

    /// A subset of draws; moments are then plain averages over the subset.
    pub fn with_draws(
        population: &'p Population,
        design: &RotationDesign,
        error: Option<&ErrorModel>,
        draws: &[usize],
    ) -> Result<Self> {
        design.validate()?;
        if population.individuals() != design.individuals() {
            return Err(Error::shape(
                format!("{} individuals", design.individuals()),
                population.individuals(),
            ));
        }
        if population.months() < design.months {
            return Err(Error::shape(
                format!("at least {} months", design.months),
                population.months(),
            ));
        }
        let x = population.covariate_totals();
        let x_targets = vec![x; design.months];
        let per_draw: Vec<(MisEstimates, Totals, RcPanel)> = draws
            .par_iter()
            .map(|&r| {
                let (sample, w) = observe(population, design, error, r)?;
                let mis = mis_estimator(&sample, &w)?;
                let direct = direct_estimator(&sample, &w)?;
                let panel = RcPanel::new(design, &sample, &w)?;
                Ok((mis, direct, panel))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_module("evaluation"))?;
        let cols = 3 * design.months * design.groups();
        let mut mis = Mat::<f64>::zeros(draws.len(), cols);
        let mut direct = Vec::with_capacity(draws.len());
        let mut panels = Vec::with_capacity(draws.len());
        for (i, (m, d, p)) in per_draw.into_iter().enumerate() {
            for (j, &v) in m.as_slice().iter().enumerate() {
                mis[(i, j)] = v;
            }
            direct.push(d);
            panels.push(p);
        }
        let full = population_totals(population).to_totals();
        let truth = Totals::from_rows(full.rows()[..design.months].to_vec());
        Ok(Self {
            population,
            design: design.clone(),
            error: error.copied(),
            draws: draws.to_vec(),
            mis,
            direct,
            panels,
            truth,
            x_targets,
        })
    }

    pub fn design(&self) -> &RotationDesign {
        &self.design
    }

    pub fn population(&self) -> &Population {
        self.population
    }

    pub fn error(&self) -> Option<&ErrorModel> {
        self.error.as_ref()
    }

    pub fn draws(&self) -> &[usize] {
        &self.draws
    }

    pub fn months(&self) -> usize {
        self.design.months
    }

    /// True population totals over the design's months.
    pub fn truth(&self) -> &Totals {
        &self.truth
    }

    pub fn x_targets(&self) -> &[[f64; 2]] {
        &self.x_targets
    }

    /// The realization matrix `Y`: row `i` is the flattened month-in-sample
    /// estimate of draw `draws()[i]`.
    pub fn realizations(&self) -> &Mat<f64> {
        &self.mis
    }

    pub fn direct_estimates(&self) -> &[Totals] {
        &self.direct
    }

    /// Month-in-sample estimates of the `i`-th enumerated draw.
    pub fn mis_row(&self, i: usize) -> MisEstimates {
        let data = (0..self.mis.ncols()).map(|j| self.mis[(i, j)]).collect();
        MisEstimates::from_flat(self.design.months, self.design.groups(), data)
            .expect("row length matches the design")
    }

    /// Re-observes the microdata of draw `r`.
    pub fn sample(&self, r: usize) -> Result<(SampleData, WeightSet)> {
        observe(self.population, &self.design, self.error.as_ref(), r)
    }

    /// `Y Wᵀ`, one estimate per draw.
    pub fn linear_estimates(&self, w: &LinearWeights) -> Result<Vec<Totals>> {
        if w.matrix().row_dims() != [self.months(), 3] {
            return Err(Error::shape(
                format!("{:?}", [self.months(), 3]),
                format!("{:?}", w.matrix().row_dims()),
            ));
        }
        let out = w.apply_rows(self.mis.as_ref())?;
        Ok((0..out.nrows())
            .map(|i| {
                let v: Vec<f64> = (0..out.ncols()).map(|j| out[(i, j)]).collect();
                Totals::from_flat(self.months(), &v).expect("row dims checked")
            })
            .collect())
    }

    /// Regression composite estimates and the per-month count of negative
    /// calibrated weights summed over draws.
    pub fn rc_estimates(&self, alpha: f64) -> Result<(Vec<Totals>, Vec<usize>)> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        let runs: Vec<(Totals, Vec<usize>)> = self
            .panels
            .par_iter()
            .zip(self.draws.par_iter())
            .map(|(p, &r)| p.run(alpha, &self.x_targets).map_err(|e| e.at_draw(r)))
            .collect::<Result<_>>()?;
        let mut negative = vec![0; self.months()];
        let mut totals = Vec::with_capacity(runs.len());
        for (t, n) in runs {
            for (acc, v) in negative.iter_mut().zip(n) {
                *acc += v;
            }
            totals.push(t);
        }
        Ok((totals, negative))
    }

    /// Runs `estimator` on every draw from the microdata.
    pub fn estimates_with(&self, estimator: &dyn Estimator) -> Result<Vec<Totals>> {
        self.draws
            .par_iter()
            .map(|&r| {
                let (sample, w) = self.sample(r)?;
                let mis = mis_estimator(&sample, &w)?;
                let ctx = DrawContext {
                    design: &self.design,
                    sample: &sample,
                    weights: &w,
                    mis: &mis,
                    x_targets: &self.x_targets,
                };
                estimator.estimate(&ctx)
            })
            .zip(self.draws.par_iter())
            .map(|(res, &r)| res.map_err(|e| e.at_draw(r)))
            .collect()
    }

    pub fn report(&self, name: impl Into<String>, estimates: &[Totals]) -> Result<MomentReport> {
        MomentReport::from_estimates(name, &self.truth, estimates)
    }
}

fn observe(
    population: &Population,
    design: &RotationDesign,
    error: Option<&ErrorModel>,
    r: usize,
) -> Result<(SampleData, WeightSet)> {
    let run = || {
        let a = design.assignment(r)?;
        let w = base_weights(design, &a);
        let sample = SampleData::observe(population, a, error)?;
        Ok((sample, w))
    };
    run().map_err(|e: Error| e.at_draw(r))
}

/// Exact moments of `estimator` over every draw of the enumeration.
pub fn exact_moments(enumeration: &Enumeration<'_>, estimator: &dyn Estimator) -> Result<MomentReport> {
    let est = enumeration.estimates_with(estimator)?;
    enumeration.report(estimator.name(), &est)
}

/// Exact moments of a linear estimator, through `Y Wᵀ`.
pub fn exact_linear_moments(
    enumeration: &Enumeration<'_>,
    name: impl Into<String>,
    w: &LinearWeights,
) -> Result<MomentReport> {
    let est = enumeration.linear_estimates(w)?;
    enumeration.report(name, &est)
}
