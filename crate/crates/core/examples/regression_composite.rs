//! Regression composite weights for one sample at several α.

use composite::design::RotationDesign;
use composite::estimators::{base_weights, regression_composite, SampleData};
use composite::population::{generate_population, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let months = 10;
    let design = RotationDesign::with_months(months);
    let pop = generate_population(Variant::Uniform, &RateTargets::packaged().truncated(months)?, 5)?;
    let x = vec![pop.covariate_totals(); months];
    let a = design.assignment(1)?;
    let w = base_weights(&design, &a);
    let sample = SampleData::observe(&pop, a, None)?;
    for alpha in [0.0, 0.5, 0.75, 1.0] {
        let rc = regression_composite(&design, alpha, &sample, &w, &x)?;
        let rates = rc.totals.rates()?;
        let neg: usize = rc.negative.iter().sum();
        let (_, cal) = rc.weights.month(months);
        let lo = cal.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "alpha {alpha:.2}: last rate {:.5}, weights in [{lo:.1}, {hi:.1}], {neg} negative",
            rates[months - 1]
        );
    }
    Ok(())
}
