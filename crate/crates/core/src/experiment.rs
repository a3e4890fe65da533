//! The end-to-end runner behind the `composite` binary.
//!
//! A run is fully determined by an [`ExperimentConfig`] (TOML) and the build:
//! every random choice derives from `seed`, enumeration results are collected
//! in draw order, and dense linear algebra runs single-threaded, so repeated
//! runs write byte-identical files whatever `parallel` is.
//!
//! ## Config schema
//!
//! All keys are optional; the defaults reproduce the full experiment.
//!
//! ```toml
//! seed = 20240517          # master seed
//! months = 85              # M
//! parallel = 0             # worker threads, 0 = all cores
//! out = "out"              # output directory
//!
//! [population]
//! variants = [1, 2, 3]     # 1 minimal change, 2 index-weighted, 3 uniform
//! rates = "rates.csv"      # month,unemployment_rate,labor_force_rate; packaged series if absent
//! households = 20000
//! household_size = 5
//! index_decay = 5.0
//! covariate_rates = [0.5, 0.2]
//! flows = [[0.0, 0.014, 0.028], [0.24, 0.0, 0.2], [0.045, 0.025, 0.0]]
//!
//! [design]
//! group_households = 20
//! delta = [0, 1, 2, 3, 12, 13, 14, 15]
//!
//! [estimators]
//! ak = [{ label = "ak_cps", a = [0.4, 0.3, 0.0], k = [0.7, 0.4, 0.0] }]
//! rc_alphas = [0.0, 0.75, 1.0]   # fixed regression composite runs
//! alpha_grid = [0.0, 0.05, ..., 1.0]
//! objectives = ["level", "change", "compromise"]
//! census_grid = true
//! blue = true
//! blue_bailar = true
//! oracle = true
//! empirical_ak = ["compromise"]
//! empirical_ak_draws = 0   # 0 = every draw
//! empirical_blue_draws = 10
//! restarts = 4
//! max_evals = 100000
//!
//! [measurement_error]
//! enabled = true
//! mode = "unemployed_to_employed"   # or "employed_to_unemployed"
//! cap = 2
//! fraction = 0.2
//! group = 1
//!
//! [output]
//! chart_draws = [1, 506]
//! difference_draw = 1
//! traces = true
//! population_csv = false
//! ```
//!
//! ## Seeds
//!
//! Population variant `v` uses `seed + v`; the Nelder-Mead restarts of
//! variant `v`, scenario `s` (0 without, 1 with measurement error) and
//! objective `o` use `seed + 1000 v + 100 s + o`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::RotationDesign;
use crate::error::{Error, Result};
use crate::estimators::{
    ak_linear_weights, base_weights, blue_bailar_weights_from_rows, blue_weights_from_rows, direct_weights,
    regression_composite, AkCoefficients, ErrorMode, ErrorModel, SampleData, Totals,
};
use crate::evaluation::{
    exact_linear_oracle, exact_sigma, linearized_variance, rate_jacobians, relative_mse_series,
    relative_mse_table, Enumeration, MomentReport, ObjectiveKind, OracleVerdict, Target,
};
use crate::optimize::{
    alpha_grid, alpha_reports, best_alpha_from, census_grid_ak, optimal_ak, AkOptimum,
    AkVarianceKernel, EmpiricalBest, EmpiricalVariant, GridResult, NelderMeadOptions,
};
use crate::population::{
    generate_population_with, population_totals, unemployment_rate, GenerationSettings,
    GrossFlows, Population, RateTargets, Variant,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub months: usize,
    pub parallel: usize,
    pub out: PathBuf,
    pub population: PopulationConfig,
    pub design: DesignConfig,
    pub estimators: EstimatorConfig,
    pub measurement_error: MeasurementErrorConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20240517,
            months: 85,
            parallel: 0,
            out: PathBuf::from("out"),
            population: PopulationConfig::default(),
            design: DesignConfig::default(),
            estimators: EstimatorConfig::default(),
            measurement_error: MeasurementErrorConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub variants: Vec<u8>,
    pub rates: Option<PathBuf>,
    pub households: usize,
    pub household_size: usize,
    pub index_decay: f64,
    pub covariate_rates: [f64; 2],
    pub flows: [[f64; 3]; 3],
}

impl Default for PopulationConfig {
    fn default() -> Self {
        let g = GenerationSettings::default();
        Self {
            variants: vec![1, 2, 3],
            rates: None,
            households: g.households,
            household_size: g.household_size,
            index_decay: g.index_decay,
            covariate_rates: g.covariate_rates,
            flows: g.flows.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub group_households: usize,
    pub delta: Vec<usize>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        let d = RotationDesign::default();
        Self {
            group_households: d.group_households,
            delta: d.delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AkSpec {
    pub label: String,
    pub a: [f64; 3],
    pub k: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub ak: Vec<AkSpec>,
    pub rc_alphas: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub objectives: Vec<ObjectiveKind>,
    pub census_grid: bool,
    pub blue: bool,
    pub blue_bailar: bool,
    pub oracle: bool,
    pub empirical_ak: Vec<ObjectiveKind>,
    pub empirical_ak_draws: usize,
    pub empirical_blue_draws: usize,
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let cps = AkCoefficients::cps();
        Self {
            ak: vec![AkSpec {
                label: "ak_cps".into(),
                a: cps.a,
                k: cps.k,
            }],
            rc_alphas: vec![0.0, 0.75, 1.0],
            alpha_grid: alpha_grid(),
            objectives: ObjectiveKind::ALL.to_vec(),
            census_grid: true,
            blue: true,
            blue_bailar: true,
            oracle: true,
            empirical_ak: vec![ObjectiveKind::Compromise],
            empirical_ak_draws: 0,
            empirical_blue_draws: 10,
            restarts: 4,
            max_evals: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDirection {
    EmployedToUnemployed,
    UnemployedToEmployed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementErrorConfig {
    pub enabled: bool,
    pub mode: ErrorDirection,
    pub cap: usize,
    pub fraction: f64,
    pub group: usize,
}

impl Default for MeasurementErrorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mode: ErrorDirection::UnemployedToEmployed,
            cap: 2,
            fraction: 0.2,
            group: 1,
        }
    }
}

impl MeasurementErrorConfig {
    pub fn model(&self) -> ErrorModel {
        let mode = match self.mode {
            ErrorDirection::EmployedToUnemployed => ErrorMode::EmployedToUnemployed {
                fraction: self.fraction,
            },
            ErrorDirection::UnemployedToEmployed => ErrorMode::UnemployedToEmployed { cap: self.cap },
        };
        ErrorModel {
            mode,
            group: self.group,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub chart_draws: Vec<usize>,
    pub difference_draw: usize,
    pub traces: bool,
    pub population_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            chart_draws: vec![1, 506],
            difference_draw: 1,
            traces: true,
            population_csv: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn design(&self) -> RotationDesign {
        RotationDesign {
            households: self.population.households,
            household_size: self.population.household_size,
            group_households: self.design.group_households,
            delta: self.design.delta.clone(),
            months: self.months,
        }
    }

    pub fn settings(&self) -> GenerationSettings {
        GenerationSettings {
            households: self.population.households,
            household_size: self.population.household_size,
            flows: GrossFlows(self.population.flows),
            index_decay: self.population.index_decay,
            covariate_rates: self.population.covariate_rates,
        }
    }

    /// The rate series truncated to `months`.
    pub fn targets(&self) -> Result<RateTargets> {
        let full = match &self.population.rates {
            Some(p) => RateTargets::read_csv(p)
                .map_err(|e| Error::Config(format!("rate file {}: {e}", p.display())))?,
            None => RateTargets::packaged(),
        };
        if full.months() < self.months {
            return Err(Error::Config(format!(
                "rate series has {} months, config asks for {}",
                full.months(),
                self.months
            )));
        }
        full.truncated(self.months)
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        self.population
            .variants
            .iter()
            .map(|&v| Variant::from_number(v).ok_or_else(|| Error::Config(format!("unknown variant {v}"))))
            .collect()
    }
}

/// Schema and feasibility problems; empty when the config can run.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if config.months == 0 {
        out.push("months must be at least 1".into());
    }
    match config.targets() {
        Ok(_) => {}
        Err(e) => out.push(e.to_string()),
    }
    if config.population.variants.is_empty() {
        out.push("population.variants is empty".into());
    }
    for &v in &config.population.variants {
        if Variant::from_number(v).is_none() {
            out.push(format!("population.variants: {v} is not 1, 2 or 3"));
        }
    }
    if config.population.covariate_rates.iter().any(|p| !(0.0..=1.0).contains(p)) {
        out.push("population.covariate_rates must lie in [0, 1]".into());
    }
    let design = config.design();
    if let Err(e) = design.validate() {
        out.push(e.to_string());
    } else {
        let draws = design.draws();
        for &r in &config.output.chart_draws {
            if r == 0 || r > draws {
                out.push(format!("output.chart_draws: {r} outside 1..={draws}"));
            }
        }
        let r = config.output.difference_draw;
        if r == 0 || r > draws {
            out.push(format!("output.difference_draw: {r} outside 1..={draws}"));
        }
        if config.estimators.empirical_blue_draws > draws {
            out.push(format!("estimators.empirical_blue_draws exceeds the {draws} draws"));
        }
        if config.estimators.empirical_ak_draws > draws {
            out.push(format!("estimators.empirical_ak_draws exceeds the {draws} draws"));
        }
        let me = &config.measurement_error;
        if me.group == 0 || me.group > design.groups() {
            out.push(format!("measurement_error.group {} outside 1..={}", me.group, design.groups()));
        }
    }
    if !(0.0..=1.0).contains(&config.measurement_error.fraction) {
        out.push("measurement_error.fraction must lie in [0, 1]".into());
    }
    for &a in config.estimators.rc_alphas.iter().chain(&config.estimators.alpha_grid) {
        if !(0.0..=1.0).contains(&a) {
            out.push(format!("regression composite alpha {a} outside [0, 1]"));
        }
    }
    if config.estimators.max_evals == 0 {
        out.push("estimators.max_evals must be positive".into());
    }
    let mut labels = std::collections::BTreeSet::new();
    for spec in &config.estimators.ak {
        if !labels.insert(&spec.label) {
            out.push(format!("estimators.ak: duplicate label {}", spec.label));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GeneratePopulation,
    AuditDesign,
    Evaluate,
    Optimize,
    Report,
}

/// Formats with 12 significant digits, '.' decimal, no grouping.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_zeros(&s)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(header)?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(mut self, files: &mut Vec<PathBuf>) -> Result<()> {
        self.writer.flush()?;
        files.push(self.path);
        Ok(())
    }
}

fn num(x: f64) -> String {
    fmt_num(x)
}

/// Runs one subcommand; returns the files written, in order.
pub fn run(config: &ExperimentConfig, command: Command) -> Result<Vec<PathBuf>> {
    let problems = validate(config);
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if config.parallel > 0 {
        builder = builder.num_threads(config.parallel);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    fs::create_dir_all(&config.out)?;
    pool.install(|| {
        let mut files = Vec::new();
        let cfg_path = config.out.join("config.toml");
        fs::write(&cfg_path, config.to_toml())?;
        files.push(cfg_path);
        match command {
            Command::GeneratePopulation => {
                generate_populations(config, &mut files, true)?;
            }
            Command::AuditDesign => audit_design(config, &mut files)?,
            Command::Evaluate | Command::Optimize | Command::Report => {
                let plan = Plan::for_command(command);
                let pops = generate_populations(config, &mut files, config.output.population_csv)?;
                if command == Command::Report {
                    audit_design(config, &mut files)?;
                }
                for (variant, pop) in &pops {
                    for scenario in scenarios(config) {
                        run_scenario(config, &plan, *variant, pop, scenario, &mut files)?;
                    }
                }
            }
        }
        Ok(files)
    })
}

#[derive(Clone, Copy, Debug)]
struct Plan {
    fixed: bool,
    optimize: bool,
    empirical: bool,
    tables: bool,
}

impl Plan {
    fn for_command(c: Command) -> Plan {
        match c {
            Command::Evaluate => Plan {
                fixed: true,
                optimize: false,
                empirical: false,
                tables: true,
            },
            Command::Optimize => Plan {
                fixed: false,
                optimize: true,
                empirical: false,
                tables: false,
            },
            _ => Plan {
                fixed: true,
                optimize: true,
                empirical: true,
                tables: true,
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Scenario {
    index: u64,
    name: &'static str,
    error: Option<ErrorModel>,
}

fn scenarios(config: &ExperimentConfig) -> Vec<Scenario> {
    let mut out = vec![Scenario {
        index: 0,
        name: "no_error",
        error: None,
    }];
    if config.measurement_error.enabled {
        out.push(Scenario {
            index: 1,
            name: "measurement_error",
            error: Some(config.measurement_error.model()),
        });
    }
    out
}

fn generate_populations(
    config: &ExperimentConfig,
    files: &mut Vec<PathBuf>,
    write_microdata: bool,
) -> Result<Vec<(Variant, Population)>> {
    let targets = config.targets()?;
    let settings = config.settings();
    let mut pops = Vec::new();
    let mut summary = Table::create(
        config.out.join("population_summary.csv"),
        &[
            "variant",
            "month",
            "employed",
            "unemployed",
            "not_in_labor_force",
            "unemployment_rate",
            "target_unemployment_rate",
            "labor_force_rate",
            "target_labor_force_rate",
            "movers",
        ],
    )?;
    for variant in config.variants()? {
        let v = variant.number();
        let pop = generate_population_with(variant, &targets, config.seed + v as u64, &settings)
            .map_err(|e| e.in_module("population"))?;
        let totals = population_totals(&pop);
        let rates = unemployment_rate(&totals)?;
        let n = pop.individuals() as f64;
        for m in 1..=pop.months() {
            let row = totals.row(m);
            summary.row([
                v.to_string(),
                m.to_string(),
                row[0].to_string(),
                row[1].to_string(),
                row[2].to_string(),
                num(rates[m - 1]),
                num(targets.unemployment[m - 1]),
                num((row[0] + row[1]) as f64 / n),
                num(targets.labor_force[m - 1]),
                pop.movers(m).to_string(),
            ])?;
        }
        if write_microdata {
            let path = config.out.join(format!("population_{v}.csv"));
            pop.write_csv(&path)?;
            files.push(path);
        }
        pops.push((variant, pop));
    }
    summary.finish(files)?;
    Ok(pops)
}

fn audit_design(config: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let design = config.design();
    let chart = config.out.join("rotation_chart.csv");
    design.write_chart_csv(&config.output.chart_draws, &chart)?;
    files.push(chart);
    let audit = design.audit(&[1, 12])?;
    let mut t = Table::create(
        config.out.join("design_audit.csv"),
        &["check", "expected", "observed_min", "observed_max", "pass"],
    )?;
    let pass = |a: usize, lo: usize, hi: usize| (lo == a && hi == a).to_string();
    t.row([
        "inclusions_per_individual_month".to_string(),
        audit.expected_inclusions.to_string(),
        audit.inclusion_min.to_string(),
        audit.inclusion_max.to_string(),
        pass(audit.expected_inclusions, audit.inclusion_min, audit.inclusion_max),
    ])?;
    for o in &audit.overlaps {
        t.row([
            format!("overlap_lag_{}", o.lag),
            o.expected.to_string(),
            o.min.to_string(),
            o.max.to_string(),
            pass(o.expected, o.min, o.max),
        ])?;
    }
    t.finish(files)
}

/// One estimator's estimates on a set of enumerated draws.
struct Evaluated {
    name: String,
    /// Positions into the enumeration's draw list.
    positions: Vec<usize>,
    estimates: Vec<Totals>,
    report: MomentReport,
    baseline: MomentReport,
}

struct ScenarioRun<'a, 'p> {
    en: &'a Enumeration<'p>,
    direct: MomentReport,
    evaluated: Vec<Evaluated>,
}

impl<'a, 'p> ScenarioRun<'a, 'p> {
    fn push_all(&mut self, name: impl Into<String>, estimates: Vec<Totals>) -> Result<()> {
        let name = name.into();
        let report = self.en.report(name.clone(), &estimates)?;
        self.evaluated.push(Evaluated {
            name,
            positions: (0..estimates.len()).collect(),
            estimates,
            report,
            baseline: self.direct.clone(),
        });
        Ok(())
    }

    fn push_subset(&mut self, name: impl Into<String>, positions: Vec<usize>, estimates: Vec<Totals>) -> Result<()> {
        let name = name.into();
        let report = self.en.report(name.clone(), &estimates)?;
        let direct: Vec<Totals> = positions
            .iter()
            .map(|&i| self.en.direct_estimates()[i].clone())
            .collect();
        let baseline = self.en.report("direct", &direct)?;
        self.evaluated.push(Evaluated {
            name,
            positions,
            estimates,
            report,
            baseline,
        });
        Ok(())
    }
}

/// Evenly spaced draws, always including `must`.
fn thinned_draws(total: usize, count: usize, must: usize) -> Vec<usize> {
    if count == 0 || count >= total {
        return (1..=total).collect();
    }
    let step = total / count;
    let mut draws: Vec<usize> = (0..count).map(|i| 1 + i * step).collect();
    if !draws.contains(&must) {
        draws[count - 1] = must;
    }
    draws.sort_unstable();
    draws.dedup();
    draws
}

fn run_scenario(
    config: &ExperimentConfig,
    plan: &Plan,
    variant: Variant,
    pop: &Population,
    scenario: Scenario,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let v = variant.number();
    let dir = config.out.join(format!("population_{v}")).join(scenario.name);
    fs::create_dir_all(&dir)?;
    let design = config.design();
    let months = design.months;
    let est_cfg = &config.estimators;
    let en = Enumeration::new(pop, &design, scenario.error.as_ref())?;
    let sigma = exact_sigma(&en);
    let direct = en.report("direct", en.direct_estimates())?;
    let mut run = ScenarioRun {
        en: &en,
        direct: direct.clone(),
        evaluated: Vec::new(),
    };
    run.push_all("direct", en.direct_estimates().to_vec())?;

    let mut rc_alphas: Vec<f64> = Vec::new();
    if plan.fixed {
        rc_alphas.extend(&est_cfg.rc_alphas);
    }
    if plan.optimize {
        rc_alphas.extend(&est_cfg.alpha_grid);
    }
    rc_alphas.sort_by(f64::total_cmp);
    rc_alphas.dedup();
    let (alpha_runs, alpha_failed) = alpha_reports(&en, &rc_alphas);

    if plan.fixed {
        for spec in &est_cfg.ak {
            let c = AkCoefficients { a: spec.a, k: spec.k };
            let w = ak_linear_weights(&c, &design, months);
            run.push_all(spec.label.clone(), en.linear_estimates(&w)?)?;
        }
        for &alpha in &est_cfg.rc_alphas {
            if alpha_runs.iter().any(|(a, _, _)| *a == alpha) {
                run.push_all(format!("rc_{}", fmt_num(alpha)), en.rc_estimates(alpha)?.0)?;
            }
        }
        if est_cfg.blue {
            let w = blue_weights_from_rows(en.realizations().as_ref(), months, design.groups())
                .map_err(|e| e.in_module("blue"))?;
            run.push_all("blue", en.linear_estimates(&w)?)?;
        }
        if est_cfg.blue_bailar {
            let w = blue_bailar_weights_from_rows(en.realizations().as_ref(), months, design.groups())
                .map_err(|e| e.in_module("blue_bailar"))?;
            run.push_all("blue_bailar", en.linear_estimates(&w)?)?;
        }
    }

    let mut optima: Vec<(AkOptimum, Option<GridResult>)> = Vec::new();
    if plan.optimize {
        let (j1, _) = rate_jacobians(en.truth())?;
        let kernel = AkVarianceKernel::new(&design, sigma.as_ref(), &j1)?;
        let opts = NelderMeadOptions {
            max_evals: est_cfg.max_evals,
            record_trace: config.output.traces,
            ..Default::default()
        };
        for (o, &kind) in est_cfg.objectives.iter().enumerate() {
            let seed = config.seed + 1000 * v as u64 + 100 * scenario.index + o as u64;
            let opt = optimal_ak(&kernel, kind, est_cfg.restarts, seed, &opts);
            let grid = est_cfg.census_grid.then(|| census_grid_ak(&kernel, kind));
            if plan.tables {
                let w = ak_linear_weights(&opt.coefficients(), &design, months);
                run.push_all(format!("best_ak_{}", kind.label()), en.linear_estimates(&w)?)?;
                if let Some(g) = &grid {
                    let w = ak_linear_weights(&AkCoefficients::from_params(g.params), &design, months);
                    run.push_all(format!("census_ak_{}", kind.label()), en.linear_estimates(&w)?)?;
                }
            }
            optima.push((opt, grid));
        }
        write_optimal_ak(&dir, &optima, &kernel, files)?;
        if config.output.traces {
            write_traces(&dir, &optima, files)?;
        }
        let grid_runs: Vec<_> = alpha_runs
            .iter()
            .filter(|(a, _, _)| est_cfg.alpha_grid.contains(a))
            .cloned()
            .collect();
        write_alpha_grid(&dir, &grid_runs, &alpha_failed, files)?;
        let mut best_rows = Vec::new();
        for &kind in &est_cfg.objectives {
            let best = best_alpha_from(&grid_runs, alpha_failed.clone(), kind)?;
            if plan.tables {
                run.push_all(format!("best_rc_{}", kind.label()), en.rc_estimates(best.alpha)?.0)?;
            }
            best_rows.push(best);
        }
        let mut t = Table::create(dir.join("best_alpha.csv"), &["objective", "alpha", "value"])?;
        for b in &best_rows {
            t.row([b.kind.label().to_string(), num(b.alpha), num(b.value)])?;
        }
        t.finish(files)?;
        if let Some(level) = best_rows.iter().find(|b| b.kind == ObjectiveKind::Level) {
            write_rc_weights(&dir, &en, level.alpha, config.output.difference_draw, files)?;
        }
    }

    if plan.empirical {
        let opts = NelderMeadOptions {
            max_evals: est_cfg.max_evals,
            ..Default::default()
        };
        for &kind in &est_cfg.empirical_ak {
            let est = EmpiricalBest {
                variant: EmpiricalVariant::Ak(kind),
                options: opts,
            };
            let draws = thinned_draws(design.draws(), est_cfg.empirical_ak_draws, config.output.difference_draw);
            let sub = Enumeration::with_draws(pop, &design, scenario.error.as_ref(), &draws)?;
            let estimates = sub.estimates_with(&est).map_err(|e| e.in_module("empirical_ak"))?;
            let positions = draws.iter().map(|r| r - 1).collect();
            run.push_subset(format!("emp_ak_{}", kind.label()), positions, estimates)?;
        }
        if est_cfg.empirical_blue_draws > 0 {
            let est = EmpiricalBest {
                variant: EmpiricalVariant::Blue,
                options: opts,
            };
            let draws = thinned_draws(design.draws(), est_cfg.empirical_blue_draws, config.output.difference_draw);
            let sub = Enumeration::with_draws(pop, &design, scenario.error.as_ref(), &draws)?;
            let estimates = sub.estimates_with(&est).map_err(|e| e.in_module("empirical_blue"))?;
            let positions = draws.iter().map(|r| r - 1).collect();
            run.push_subset("emp_blue", positions, estimates)?;
        }
        if est_cfg.oracle {
            let verdict = exact_linear_oracle(&en)?;
            let mut t = Table::create(dir.join("oracle.csv"), &["rank", "exact", "residual"])?;
            let (rank, exact, residual) = match &verdict {
                OracleVerdict::Exact { rank, residual, .. } => (*rank, true, *residual),
                OracleVerdict::NotExact { rank, residual } => (*rank, false, *residual),
            };
            t.row([rank.to_string(), exact.to_string(), num(residual)])?;
            t.finish(files)?;
            if let OracleVerdict::Exact { weights, .. } = verdict {
                run.push_all("oracle", en.linear_estimates(&weights)?)?;
            }
        }
        write_linearization(&dir, &en, &sigma, &direct, files)?;
    }

    if plan.tables {
        write_moments(&dir, &run, files)?;
        write_relative(&dir, &run, files)?;
        write_estimates(&dir, &run, config.output.difference_draw, files)?;
    }
    Ok(())
}

fn write_optimal_ak(
    dir: &Path,
    optima: &[(AkOptimum, Option<GridResult>)],
    kernel: &AkVarianceKernel,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut t = Table::create(
        dir.join("optimal_ak.csv"),
        &["objective", "method", "a1", "k1", "a2", "k2", "value", "cps_value", "evaluations", "converged"],
    )?;
    let cps = AkCoefficients::cps().params();
    for (opt, grid) in optima {
        let kind = opt.kind;
        let p = &opt.best.params;
        t.row([
            kind.label().to_string(),
            "nelder_mead".into(),
            num(p[0]),
            num(p[1]),
            num(p[2]),
            num(p[3]),
            num(opt.best.value),
            num(kernel.objective(cps, kind)),
            opt.runs.iter().map(|r| r.evaluations).sum::<usize>().to_string(),
            opt.runs.iter().all(|r| r.converged).to_string(),
        ])?;
        if let Some(g) = grid {
            t.row([
                kind.label().to_string(),
                "census_grid".into(),
                num(g.params[0]),
                num(g.params[1]),
                num(g.params[2]),
                num(g.params[3]),
                num(g.value),
                num(kernel.objective(cps, kind)),
                g.table.len().to_string(),
                "true".into(),
            ])?;
        }
    }
    t.finish(files)
}

fn write_traces(dir: &Path, optima: &[(AkOptimum, Option<GridResult>)], files: &mut Vec<PathBuf>) -> Result<()> {
    let mut t = Table::create(
        dir.join("nelder_mead_trace.csv"),
        &["objective", "run", "iteration", "a1", "k1", "a2", "k2", "value"],
    )?;
    for (opt, _) in optima {
        for (run, r) in opt.runs.iter().enumerate() {
            for p in &r.trace {
                t.row([
                    opt.kind.label().to_string(),
                    run.to_string(),
                    p.iteration.to_string(),
                    num(p.params[0]),
                    num(p.params[1]),
                    num(p.params[2]),
                    num(p.params[3]),
                    num(p.value),
                ])?;
            }
        }
    }
    t.finish(files)
}

fn write_alpha_grid(
    dir: &Path,
    runs: &[(f64, MomentReport, Vec<usize>)],
    failed: &[(f64, String)],
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut t = Table::create(
        dir.join("alpha_grid.csv"),
        &["alpha", "level", "change", "compromise", "negative_weights", "status"],
    )?;
    let mut rows: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for (a, rep, neg) in runs {
        let obj = |k| crate::optimize::mse_objective(rep, k);
        rows.insert(
            a.to_bits(),
            vec![
                num(*a),
                num(obj(ObjectiveKind::Level)),
                num(obj(ObjectiveKind::Change)),
                num(obj(ObjectiveKind::Compromise)),
                neg.iter().sum::<usize>().to_string(),
                "ok".into(),
            ],
        );
    }
    for (a, why) in failed {
        rows.insert(a.to_bits(), vec![num(*a), String::new(), String::new(), String::new(), String::new(), why.clone()]);
    }
    for row in rows.into_values() {
        t.row(row)?;
    }
    t.finish(files)
}

fn write_rc_weights(
    dir: &Path,
    en: &Enumeration<'_>,
    alpha: f64,
    draw: usize,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let design = en.design();
    let a = design.assignment(draw)?;
    let w = base_weights(design, &a);
    let sample = SampleData::observe(en.population(), a, en.error())?;
    let res = regression_composite(design, alpha, &sample, &w, en.x_targets()).map_err(|e| e.at_draw(draw))?;
    let mut t = Table::create(
        dir.join("rc_weights.csv"),
        &["draw", "alpha", "month", "individual", "base_weight", "calibrated_weight"],
    )?;
    for m in 1..=design.months {
        let (members, base) = w.month(m);
        let (_, cal) = res.weights.month(m);
        for i in 0..members.len() {
            t.row([
                draw.to_string(),
                num(alpha),
                m.to_string(),
                (members[i] + 1).to_string(),
                num(base[i]),
                num(cal[i]),
            ])?;
        }
    }
    t.finish(files)
}

fn write_linearization(
    dir: &Path,
    en: &Enumeration<'_>,
    sigma: &faer::Mat<f64>,
    direct: &MomentReport,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let design = en.design();
    let w = direct_weights(design.months, design.groups());
    let lin = linearized_variance(&w, sigma.as_ref(), en.truth())?;
    let mut t = Table::create(
        dir.join("linearization_direct.csv"),
        &["month", "linearized_variance", "exact_variance", "relative_gap"],
    )?;
    for m in 1..=design.months {
        let exact = direct.rate(m).variance;
        let l = lin.level[m - 1];
        let gap = if exact > 0.0 { (l - exact).abs() / exact } else { 0.0 };
        t.row([m.to_string(), num(l), num(exact), num(gap)])?;
    }
    t.finish(files)
}

fn write_moments(dir: &Path, run: &ScenarioRun<'_, '_>, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut t = Table::create(
        dir.join("moments.csv"),
        &["estimator", "draws", "target", "month", "status", "truth", "mean", "bias", "variance", "mse"],
    )?;
    for ev in &run.evaluated {
        let r = &ev.report;
        let draws = r.draws.to_string();
        for m in 1..=r.months() {
            for e in 1..=3 {
                let mo = r.level(m, e);
                t.row([
                    r.name.clone(),
                    draws.clone(),
                    "total".into(),
                    m.to_string(),
                    e.to_string(),
                    num(mo.truth),
                    num(mo.mean),
                    num(mo.bias),
                    num(mo.variance),
                    num(mo.mse),
                ])?;
            }
            let mo = r.rate(m);
            t.row([
                r.name.clone(),
                draws.clone(),
                "rate".into(),
                m.to_string(),
                String::new(),
                num(mo.truth),
                num(mo.mean),
                num(mo.bias),
                num(mo.variance),
                num(mo.mse),
            ])?;
            if m >= 2 {
                let mo = r.change(m);
                t.row([
                    r.name.clone(),
                    draws.clone(),
                    "change".into(),
                    m.to_string(),
                    String::new(),
                    num(mo.truth),
                    num(mo.mean),
                    num(mo.bias),
                    num(mo.variance),
                    num(mo.mse),
                ])?;
            }
        }
    }
    t.finish(files)
}

fn write_relative(dir: &Path, run: &ScenarioRun<'_, '_>, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut q = Table::create(
        dir.join("relative_mse.csv"),
        &["estimator", "draws", "target", "q0", "q25", "q50", "q75", "q100", "mean", "excluded_months"],
    )?;
    let mut s = Table::create(
        dir.join("relative_mse_series.csv"),
        &["estimator", "draws", "target", "month", "relative_mse"],
    )?;
    let mut rows = Vec::new();
    for ev in &run.evaluated {
        let table = relative_mse_table(std::slice::from_ref(&ev.report), &ev.baseline)?;
        rows.extend(table.into_iter().map(|r| (ev.report.draws, r)));
    }
    rows.sort_by_key(|(_, r)| r.target == Target::Change);
    for (draws, r) in rows {
        let excluded: Vec<String> = r.excluded.iter().map(|m| m.to_string()).collect();
        q.row([
            r.estimator.clone(),
            draws.to_string(),
            r.target.label().to_string(),
            num(r.quantiles[0]),
            num(r.quantiles[1]),
            num(r.quantiles[2]),
            num(r.quantiles[3]),
            num(r.quantiles[4]),
            num(r.mean),
            excluded.join(" "),
        ])?;
    }
    for target in [Target::Level, Target::Change] {
        let first = if target == Target::Level { 1 } else { 2 };
        for ev in &run.evaluated {
            for (i, v) in relative_mse_series(&ev.report, &ev.baseline, target)?.iter().enumerate() {
                s.row([
                    ev.name.clone(),
                    ev.report.draws.to_string(),
                    target.label().to_string(),
                    (i + first).to_string(),
                    v.map(num).unwrap_or_default(),
                ])?;
            }
        }
    }
    q.finish(files)?;
    s.finish(files)
}

/// Estimate series and rate differences from the direct estimator on one draw.
fn write_estimates(dir: &Path, run: &ScenarioRun<'_, '_>, draw: usize, files: &mut Vec<PathBuf>) -> Result<()> {
    let pos = draw - 1;
    let direct = &run.en.direct_estimates()[pos];
    let direct_rates = direct.rates()?;
    let mut e = Table::create(dir.join("estimates.csv"), &["estimator", "draw", "month", "status", "value"])?;
    let mut d = Table::create(
        dir.join("differences.csv"),
        &["estimator", "draw", "month", "rate", "direct_rate", "difference"],
    )?;
    for ev in &run.evaluated {
        let Some(i) = ev.positions.iter().position(|&p| p == pos) else {
            continue;
        };
        let t = &ev.estimates[i];
        let rates = t.rates()?;
        for m in 1..=t.months() {
            for s in 1..=3 {
                e.row([ev.name.clone(), draw.to_string(), m.to_string(), s.to_string(), num(t.get(m, s))])?;
            }
            d.row([
                ev.name.clone(),
                draw.to_string(),
                m.to_string(),
                num(rates[m - 1]),
                num(direct_rates[m - 1]),
                num(rates[m - 1] - direct_rates[m - 1]),
            ])?;
        }
    }
    e.finish(files)?;
    d.finish(files)
}
