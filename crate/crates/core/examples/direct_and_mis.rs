//! Direct and month-in-sample estimates from one sample.

use composite::design::RotationDesign;
use composite::estimators::{base_weights, direct_estimator, mis_estimator, SampleData};
use composite::population::{generate_population, population_totals, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let design = RotationDesign::with_months(6);
    let pop = generate_population(Variant::IndexWeighted, &RateTargets::packaged().truncated(6)?, 11)?;
    let a = design.assignment(42)?;
    let w = base_weights(&design, &a);
    let sample = SampleData::observe(&pop, a, None)?;
    let direct = direct_estimator(&sample, &w)?;
    let mis = mis_estimator(&sample, &w)?;
    let truth = population_totals(&pop).to_totals();
    let rates = direct.rates()?;
    for m in 1..=6 {
        let groups: Vec<String> = (1..=8).map(|g| format!("{:.0}", mis.get(m, g, 2))).collect();
        println!(
            "m={m}  unemployed direct {:8.0}  truth {:8.0}  rate {:.4}  by group [{}]",
            direct.get(m, 2),
            truth.get(m, 2),
            rates[m - 1],
            groups.join(" ")
        );
    }
    Ok(())
}
