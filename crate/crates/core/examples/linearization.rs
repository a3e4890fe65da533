//! Linearized rate variance of the direct estimator against its exact
//! variance over all samples.

use composite::design::RotationDesign;
use composite::estimators::direct_weights;
use composite::evaluation::{exact_sigma, linearized_variance, Enumeration};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let months = 8;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::Uniform, &RateTargets::packaged().truncated(months)?, 10, &settings)?;
    let en = Enumeration::new(&pop, &design, None)?;
    let sigma = exact_sigma(&en);
    let lin = linearized_variance(&direct_weights(months, 8), sigma.as_ref(), en.truth())?;
    let exact = en.report("direct", en.direct_estimates())?;
    for m in 1..=months {
        let v = exact.rate(m).variance;
        println!(
            "m={m}  linearized {:.4e}  exact {:.4e}  gap {:.2}%",
            lin.level[m - 1],
            v,
            100.0 * (lin.level[m - 1] - v).abs() / v
        );
    }
    Ok(())
}
