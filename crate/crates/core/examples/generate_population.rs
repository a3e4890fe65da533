//! Generates the three population variants on a short horizon and compares
//! their unemployment rates with the targets.

use composite::population::{
    generate_population_with, population_totals, unemployment_rate, GenerationSettings, RateTargets, Variant,
};

fn main() -> composite::Result<()> {
    let targets = RateTargets::packaged().truncated(12)?;
    let settings = GenerationSettings {
        households: 4000,
        ..Default::default()
    };
    for variant in [Variant::MinimalChange, Variant::IndexWeighted, Variant::Uniform] {
        let pop = generate_population_with(variant, &targets, 7, &settings)?;
        let rates = unemployment_rate(&population_totals(&pop))?;
        println!("variant {} ({} individuals)", variant.number(), pop.individuals());
        for m in 1..=pop.months() {
            println!(
                "  m={m:2}  rate {:.5}  target {:.5}  movers {}",
                rates[m - 1],
                targets.unemployment[m - 1],
                pop.movers(m)
            );
        }
    }
    Ok(())
}
