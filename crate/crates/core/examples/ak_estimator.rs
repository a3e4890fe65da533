//! The AK estimator computed recursively on microdata and through its linear
//! weights on the month-in-sample estimates.

use composite::design::RotationDesign;
use composite::estimators::{
    ak_linear_weights, ak_recursive, base_weights, mis_estimator, AkCoefficients, SampleData,
};
use composite::population::{generate_population, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let months = 15;
    let design = RotationDesign::with_months(months);
    let pop = generate_population(Variant::MinimalChange, &RateTargets::packaged().truncated(months)?, 3)?;
    let a = design.assignment(506)?;
    let w = base_weights(&design, &a);
    let sample = SampleData::observe(&pop, a, None)?;
    let coeffs = AkCoefficients::cps();
    let rec = ak_recursive(&design, &sample, &w, &coeffs)?;
    let lin = ak_linear_weights(&coeffs, &design, months).apply(&mis_estimator(&sample, &w)?)?;
    let mut gap: f64 = 0.0;
    for m in 1..=months {
        for e in 1..=3 {
            gap = gap.max((rec.get(m, e) - lin.get(m, e)).abs());
        }
    }
    println!("coefficients a={:?} k={:?}", coeffs.a, coeffs.k);
    println!("max |recursive - linear| = {gap:.3e}");
    for (m, r) in rec.rates()?.iter().enumerate() {
        println!("m={:2} AK rate {r:.5}", m + 1);
    }
    Ok(())
}
