//! Misclassification in one rotation group: how it biases the direct and
//! the AK estimators.

use composite::design::RotationDesign;
use composite::estimators::{ak_linear_weights, AkCoefficients, ErrorModel};
use composite::evaluation::{exact_linear_moments, Enumeration};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let months = 18;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::IndexWeighted, &RateTargets::packaged().truncated(months)?, 12, &settings)?;
    let ak = ak_linear_weights(&AkCoefficients::cps(), &design, months);
    let models = [
        ("none", None),
        ("employed->unemployed 20%", Some(ErrorModel::employed_to_unemployed(0.2))),
        ("unemployed->employed cap 2", Some(ErrorModel::unemployed_to_employed(2))),
    ];
    for (label, model) in models {
        let en = Enumeration::new(&pop, &design, model.as_ref())?;
        let direct = en.report("direct", en.direct_estimates())?;
        let ak = exact_linear_moments(&en, "ak", &ak)?;
        println!(
            "{label:28} direct bias {:+.3e}  AK bias {:+.3e}  (month {months})",
            direct.rate(months).bias,
            ak.rate(months).bias
        );
    }
    Ok(())
}
