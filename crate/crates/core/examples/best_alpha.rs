//! Scans α for the regression composite and reports the exact-MSE argmin.

use composite::design::RotationDesign;
use composite::evaluation::{Enumeration, ObjectiveKind};
use composite::optimize::{alpha_grid, alpha_reports, best_alpha_from, mse_objective};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    let months = 20;
    let design = RotationDesign {
        households: 4000,
        months,
        ..Default::default()
    };
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    let pop = generate_population_with(Variant::Uniform, &RateTargets::packaged().truncated(months)?, 8, &settings)?;
    let en = Enumeration::new(&pop, &design, None)?;
    let (reports, failed) = alpha_reports(&en, &alpha_grid());
    for (alpha, rep, neg) in &reports {
        println!(
            "alpha {alpha:.2}  level {:.4e}  change {:.4e}  negative weights {}",
            mse_objective(rep, ObjectiveKind::Level),
            mse_objective(rep, ObjectiveKind::Change),
            neg.iter().sum::<usize>()
        );
    }
    for kind in ObjectiveKind::ALL {
        let best = best_alpha_from(&reports, failed.clone(), kind)?;
        println!("best alpha for {}: {} ({:.4e})", kind.label(), best.alpha, best.value);
    }
    Ok(())
}
