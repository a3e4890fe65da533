//! BLUE and the Bailar-constrained BLUE from the exact covariance of the
//! month-in-sample estimates, compared with the direct estimator.

use composite::design::RotationDesign;
use composite::estimators::{blue_bailar_weights, blue_weights};
use composite::evaluation::{exact_linear_moments, exact_sigma, Enumeration};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    let months = 12;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::IndexWeighted, &RateTargets::packaged().truncated(months)?, 2, &settings)?;
    let en = Enumeration::new(&pop, &design, None)?;
    let sigma = exact_sigma(&en);
    let direct = en.report("direct", en.direct_estimates())?;
    let blue = exact_linear_moments(&en, "blue", &blue_weights(sigma.as_ref(), months, 8)?)?;
    let bailar = exact_linear_moments(&en, "blue_bailar", &blue_bailar_weights(sigma.as_ref(), months, 8)?)?;
    println!("month  direct_mse      blue_mse        bailar_mse      bailar_bias");
    for m in 1..=months {
        println!(
            "{m:5}  {:.6e}  {:.6e}  {:.6e}  {:+.3e}",
            direct.rate(m).mse,
            blue.rate(m).mse,
            bailar.rate(m).mse,
            bailar.rate(m).bias
        );
    }
    Ok(())
}
