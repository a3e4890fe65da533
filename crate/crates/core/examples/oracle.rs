//! Checks whether some linear estimator reproduces the truth on every sample.

use composite::design::RotationDesign;
use composite::evaluation::{exact_linear_oracle, Enumeration, OracleVerdict};
use composite::population::{generate_population_with, GenerationSettings, RateTargets, Variant};

fn main() -> composite::Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    for (households, months) in [(4000, 6), (4000, 40)] {
        let design = RotationDesign {
            households,
            months,
            ..Default::default()
        };
        let settings = GenerationSettings {
            households,
            ..Default::default()
        };
        let pop = generate_population_with(Variant::MinimalChange, &RateTargets::packaged().truncated(months)?, 1, &settings)?;
        let en = Enumeration::new(&pop, &design, None)?;
        match exact_linear_oracle(&en)? {
            OracleVerdict::Exact { rank, residual, .. } => {
                println!("M={months}: exact oracle exists (rank {rank}, residual {residual:.2e})")
            }
            OracleVerdict::NotExact { rank, residual } => {
                println!("M={months}: no exact oracle (rank {rank}, residual {residual:.2e})")
            }
        }
    }
    Ok(())
}
