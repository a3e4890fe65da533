//! Loads a reduced experiment from TOML and runs the evaluate step into a
//! temporary directory.

use composite::experiment::{run, validate, Command, ExperimentConfig};

const CONFIG: &str = r#"
months = 12
seed = 99

[population]
variants = [2]
households = 4000

[output]
chart_draws = [1, 6]
"#;

fn main() -> composite::Result<()> {
    let mut config = ExperimentConfig::from_toml(CONFIG)?;
    config.out = std::env::temp_dir().join("composite_example");
    let problems = validate(&config);
    assert!(problems.is_empty(), "{problems:?}");
    for path in run(&config, Command::Evaluate)? {
        println!("{}", path.display());
    }
    Ok(())
}
