//! Best AK coefficients by Nelder-Mead and by the coarse census grid, for
//! each objective.

use composite::design::RotationDesign;
use composite::estimators::AkCoefficients;
use composite::evaluation::{exact_sigma, rate_jacobians, Enumeration, ObjectiveKind};
use composite::optimize::{census_grid_ak, optimal_ak, AkVarianceKernel, NelderMeadOptions};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    let months = 30;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::IndexWeighted, &RateTargets::packaged().truncated(months)?, 4, &settings)?;
    let en = Enumeration::new(&pop, &design, None)?;
    let sigma = exact_sigma(&en);
    let (j1, _) = rate_jacobians(en.truth())?;
    let kernel = AkVarianceKernel::new(&design, sigma.as_ref(), &j1)?;
    let cps = AkCoefficients::cps().params();
    for kind in ObjectiveKind::ALL {
        let opt = optimal_ak(&kernel, kind, 2, 17, &NelderMeadOptions::default());
        let grid = census_grid_ak(&kernel, kind);
        println!(
            "{:10} production {:.4e}  grid {:.4e} at {:?}  nelder-mead {:.4e} at {:.3?}",
            kind.label(),
            kernel.objective(cps, kind),
            grid.value,
            grid.params,
            opt.best.value,
            opt.best.params
        );
    }
    Ok(())
}
