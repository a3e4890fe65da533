//! Estimates the month-in-sample covariance from a single sample and plugs
//! it into the AK search and the BLUE.

use composite::design::RotationDesign;
use composite::estimators::direct_estimator;
use composite::evaluation::{estimate_sigma, min_eigenvalue, Enumeration, ObjectiveKind};
use composite::optimize::{empirical_best, EmpiricalEstimator, EmpiricalVariant, NelderMeadOptions};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    let months = 16;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::IndexWeighted, &RateTargets::packaged().truncated(months)?, 6, &settings)?;
    let en = Enumeration::with_draws(&pop, &design, None, &[1])?;
    let (sample, w) = en.sample(1)?;
    let sigma_hat = estimate_sigma(&design, &sample)?;
    println!("sigma hat {}x{}, min eigenvalue {:.3e}", sigma_hat.nrows(), sigma_hat.ncols(), min_eigenvalue(sigma_hat.as_ref()));
    let t = direct_estimator(&sample, &w)?;
    let opts = NelderMeadOptions::default();
    if let EmpiricalEstimator::Ak(c) =
        empirical_best(EmpiricalVariant::Ak(ObjectiveKind::Compromise), &design, sigma_hat.as_ref(), &t, &opts)?
    {
        println!("empirical AK coefficients a={:.3?} k={:.3?}", c.a, c.k);
    }
    if let EmpiricalEstimator::Blue(w) = empirical_best(EmpiricalVariant::Blue, &design, sigma_hat.as_ref(), &t, &opts)? {
        let est = w.apply(&en.mis_row(0))?;
        println!("empirical BLUE last-month rate {:.5}", est.rates()?[months - 1]);
    }
    Ok(())
}
