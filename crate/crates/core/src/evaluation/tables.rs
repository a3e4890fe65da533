//! Relative MSE against a baseline estimator, summarized over months.

use super::MomentReport;
use crate::error::{Error, Result};

pub const QUANTILE_PROBS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    /// Unemployment rate of each month.
    Level,
    /// Month-to-month change of the rate, `m ≥ 2`.
    Change,
}

impl Target {
    pub fn label(self) -> &'static str {
        match self {
            Target::Level => "level",
            Target::Change => "change",
        }
    }
}

/// Order-statistic quantile `x_(⌈np⌉)` (and `x_(1)` at `p = 0`) of sorted data.
pub fn type1_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((n as f64 * p).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// `MSE[est] / MSE[baseline]` per month (levels) or per `m ≥ 2` (changes);
/// `None` where the baseline MSE is zero.
pub fn relative_mse_series(
    report: &MomentReport,
    baseline: &MomentReport,
    target: Target,
) -> Result<Vec<Option<f64>>> {
    if report.months() != baseline.months() {
        return Err(Error::shape(baseline.months(), report.months()));
    }
    let (a, b) = match target {
        Target::Level => (&report.rates, &baseline.rates),
        Target::Change => (&report.changes, &baseline.changes),
    };
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (y.mse > 0.0).then(|| x.mse / y.mse))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantileRow {
    pub estimator: String,
    pub target: Target,
    pub quantiles: [f64; 5],
    pub mean: f64,
    /// Months left out because the baseline MSE is zero there.
    pub excluded: Vec<usize>,
}

pub fn relative_mse_table(reports: &[MomentReport], baseline: &MomentReport) -> Result<Vec<QuantileRow>> {
    let mut rows = Vec::new();
    for target in [Target::Level, Target::Change] {
        let first_month = if target == Target::Level { 1 } else { 2 };
        for r in reports {
            let series = relative_mse_series(r, baseline, target)?;
            let mut excluded = Vec::new();
            let mut vals = Vec::new();
            for (i, v) in series.iter().enumerate() {
                match v {
                    Some(x) => vals.push(*x),
                    None => excluded.push(i + first_month),
                }
            }
            if vals.is_empty() {
                return Err(Error::Invalid(format!(
                    "{}: baseline MSE is zero in every month",
                    r.name
                )));
            }
            vals.sort_by(f64::total_cmp);
            let quantiles = QUANTILE_PROBS.map(|p| type1_quantile(&vals, p));
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            rows.push(QuantileRow {
                estimator: r.name.clone(),
                target,
                quantiles,
                mean,
                excluded,
            });
        }
    }
    Ok(rows)
}
