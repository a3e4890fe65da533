//! Enumerates every sample of a reduced design and tabulates exact moments
//! and MSE relative to the direct estimator.

use composite::design::RotationDesign;
use composite::estimators::{ak_linear_weights, AkCoefficients};
use composite::evaluation::{exact_linear_moments, relative_mse_table, Enumeration};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let months = 24;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::MinimalChange, &RateTargets::packaged().truncated(months)?, 9, &settings)?;
    let en = Enumeration::new(&pop, &design, None)?;
    println!("{} samples enumerated", en.draws().len());
    let direct = en.report("direct", en.direct_estimates())?;
    let ak = exact_linear_moments(&en, "ak_cps", &ak_linear_weights(&AkCoefficients::cps(), &design, months))?;
    let (rc, _) = en.rc_estimates(0.75)?;
    let rc = en.report("rc_0.75", &rc)?;
    for m in [1, 12, 24] {
        let d = direct.rate(m);
        println!("m={m:2} direct: truth {:.5} mean {:.5} bias {:+.2e} var {:.3e}", d.truth, d.mean, d.bias, d.variance);
    }
    for row in relative_mse_table(&[ak, rc], &direct)? {
        println!(
            "{:8} {:6} quartiles {:.3?} mean {:.3}",
            row.estimator,
            row.target.label(),
            row.quantiles,
            row.mean
        );
    }
    Ok(())
}
