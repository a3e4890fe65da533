use crate::error::{Error, Result};
use crate::estimators::Totals;

/// Mean, bias, variance and MSE of one target over the enumerated draws.
/// Variance and MSE divide by the number of draws (the design is uniform).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moment {
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

impl Moment {
    pub fn from_values(truth: f64, values: impl Iterator<Item = f64> + Clone) -> Moment {
        let mut n = 0usize;
        let mut sum = 0.0;
        for v in values.clone() {
            sum += v;
            n += 1;
        }
        let mean = sum / n as f64;
        let mut var = 0.0;
        let mut mse = 0.0;
        for v in values {
            var += (v - mean) * (v - mean);
            mse += (v - truth) * (v - truth);
        }
        Moment {
            truth,
            mean,
            bias: mean - truth,
            variance: var / n as f64,
            mse: mse / n as f64,
        }
    }
}

/// Moments of one estimator: totals per `(m, e)`, the unemployment rate per
/// month, and its month-to-month change for `m = 2..=M` (`changes[m - 2]`).
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub name: String,
    pub draws: usize,
    pub levels: Vec<[Moment; 3]>,
    pub rates: Vec<Moment>,
    pub changes: Vec<Moment>,
}

impl MomentReport {
    pub fn from_estimates(
        name: impl Into<String>,
        truth: &Totals,
        estimates: &[Totals],
    ) -> Result<MomentReport> {
        let name = name.into();
        if estimates.is_empty() {
            return Err(Error::Invalid(format!("{name}: no draws to average")));
        }
        let months = truth.months();
        if let Some(bad) = estimates.iter().find(|t| t.months() != months) {
            return Err(Error::shape(months, bad.months()));
        }
        let true_rates = truth.rates()?;
        let rates: Vec<Vec<f64>> = estimates.iter().map(|t| t.rates()).collect::<Result<_>>()?;
        let levels = (1..=months)
            .map(|m| {
                [1, 2, 3].map(|e| Moment::from_values(truth.get(m, e), estimates.iter().map(move |t| t.get(m, e))))
            })
            .collect();
        let rate_moments = (0..months)
            .map(|m| Moment::from_values(true_rates[m], rates.iter().map(move |r| r[m])))
            .collect();
        let changes = (1..months)
            .map(|m| {
                Moment::from_values(
                    true_rates[m] - true_rates[m - 1],
                    rates.iter().map(move |r| r[m] - r[m - 1]),
                )
            })
            .collect();
        Ok(MomentReport {
            name,
            draws: estimates.len(),
            levels,
            rates: rate_moments,
            changes,
        })
    }

    pub fn months(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, m: usize, e: usize) -> &Moment {
        &self.levels[m - 1][e - 1]
    }

    pub fn rate(&self, m: usize) -> &Moment {
        &self.rates[m - 1]
    }

    /// Change between months `m - 1` and `m`, `m ≥ 2`.
    pub fn change(&self, m: usize) -> &Moment {
        &self.changes[m - 2]
    }
}

