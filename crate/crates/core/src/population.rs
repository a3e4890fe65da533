//! Synthetic populations with employment-status time series.
//!
//! Individuals `1..=N` are grouped into households of five consecutive
//! indices. Each month every individual holds exactly one status: 1 employed,
//! 2 unemployed, 3 not in the labor force. Month-to-month status changes are
//! generated so that the realized unemployment rate and labor-force rate hit
//! the rounded targets exactly:
//!
//! * labor force `L_m = round(N * lf_m)`,
//! * unemployed `U_m = round(L_m * rate_m)`, employed `L_m - U_m`,
//! * everybody else is out of the labor force.
//!
//! Variant 1 moves the fewest possible individuals between consecutive months.
//! Variants 2 and 3 first apply baseline gross flows between statuses and then
//! the net correction needed to reach the targets; variant 2 picks movers with
//! weight `exp(-5 k / N)` (small indices move more often), variant 3 uniformly.
//!
//! All randomness comes from a ChaCha8 stream seeded with the caller's seed, so
//! a population is bit-reproducible.
//!
//! ## Binary cache layout
//!
//! All integers little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `b"CPOPv01\0"` |
//! | 8 | 4 | months `M` (u32) |
//! | 12 | 4 | individuals `N` (u32) |
//! | 16 | 4 | household size (u32) |
//! | 20 | 1 | variant (0 = hand-built, 1..=3) |
//! | 21 | 3 | zero padding |
//! | 24 | 8M | unemployment-rate targets (f64) |
//! | 24+8M | 8M | labor-force-rate targets (f64) |
//! | 24+16M | M*N | statuses 1..=3, month-major (all of month 1, then month 2, ...) |
//! | .. | 2N | two binary covariates per individual |

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STATUSES: usize = 3;
const CACHE_MAGIC: &[u8; 8] = b"CPOPv01\0";
const DEFAULT_RATES_CSV: &str = include_str!("../data/default_rates.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Employed,
    Unemployed,
    NotInLaborForce,
}

impl Status {
    pub const ALL: [Status; 3] = [Status::Employed, Status::Unemployed, Status::NotInLaborForce];

    /// 1-based status index `e`.
    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(e: usize) -> Option<Status> {
        match e {
            1 => Some(Status::Employed),
            2 => Some(Status::Unemployed),
            3 => Some(Status::NotInLaborForce),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Employed => "employed",
            Status::Unemployed => "unemployed",
            Status::NotInLaborForce => "not_in_labor_force",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Fewest movers between consecutive months.
    MinimalChange,
    /// Gross flows, movers drawn with weight decreasing in the individual index.
    IndexWeighted,
    /// Gross flows, movers drawn uniformly among holders of the source status.
    Uniform,
}

impl Variant {
    pub fn from_number(v: u8) -> Option<Variant> {
        match v {
            1 => Some(Variant::MinimalChange),
            2 => Some(Variant::IndexWeighted),
            3 => Some(Variant::Uniform),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Variant::MinimalChange => 1,
            Variant::IndexWeighted => 2,
            Variant::Uniform => 3,
        }
    }
}

/// Read-only access to a month x individual status panel (0-based, codes 0..3).
pub trait StatusSource: Sync {
    fn months(&self) -> usize;
    fn individuals(&self) -> usize;
    fn status_code(&self, month: usize, individual: usize) -> u8;
}

/// Monthly unemployment-rate and labor-force-rate targets.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTargets {
    pub unemployment: Vec<f64>,
    pub labor_force: Vec<f64>,
}

impl RateTargets {
    /// The packaged 85-month synthetic series (rates between about 0.04 and 0.10).
    pub fn packaged() -> RateTargets {
        Self::parse_csv(DEFAULT_RATES_CSV.as_bytes()).expect("packaged rate series is valid")
    }

    /// Constant targets, mostly for tests.
    pub fn constant(months: usize, unemployment: f64, labor_force: f64) -> RateTargets {
        RateTargets {
            unemployment: vec![unemployment; months],
            labor_force: vec![labor_force; months],
        }
    }

    pub fn months(&self) -> usize {
        self.unemployment.len()
    }

    pub fn truncated(&self, months: usize) -> Result<RateTargets> {
        if months > self.months() || months == 0 {
            return Err(Error::OutOfRange {
                what: "months",
                value: months as i64,
                min: 1,
                max: self.months() as i64,
            });
        }
        Ok(RateTargets {
            unemployment: self.unemployment[..months].to_vec(),
            labor_force: self.labor_force[..months].to_vec(),
        })
    }

    /// CSV with header `month,unemployment_rate,labor_force_rate`; months must
    /// run `1, 2, ...` without gaps.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<RateTargets> {
        let file = std::fs::File::open(path)?;
        Self::parse_csv(file)
    }

    pub fn parse_csv(reader: impl Read) -> Result<RateTargets> {
        #[derive(Deserialize)]
        struct Row {
            month: usize,
            unemployment_rate: f64,
            labor_force_rate: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut targets = RateTargets {
            unemployment: Vec::new(),
            labor_force: Vec::new(),
        };
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.month != i + 1 {
                return Err(Error::Invalid(format!(
                    "rate file row {} has month {}, expected {}",
                    i + 1,
                    row.month,
                    i + 1
                )));
            }
            targets.unemployment.push(row.unemployment_rate);
            targets.labor_force.push(row.labor_force_rate);
        }
        if targets.unemployment.is_empty() {
            return Err(Error::Invalid("rate file has no rows".into()));
        }
        Ok(targets)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["month", "unemployment_rate", "labor_force_rate"])?;
        for (m, (u, l)) in self.unemployment.iter().zip(&self.labor_force).enumerate() {
            w.write_record([(m + 1).to_string(), u.to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Integer status counts `[employed, unemployed, nilf]` for each month.
    pub fn counts(&self, individuals: usize) -> Result<Vec<[usize; 3]>> {
        if self.unemployment.len() != self.labor_force.len() {
            return Err(Error::Invalid(format!(
                "rate series has {} months, labor-force series {}",
                self.unemployment.len(),
                self.labor_force.len()
            )));
        }
        let n = individuals as f64;
        self.unemployment
            .iter()
            .zip(&self.labor_force)
            .enumerate()
            .map(|(m, (&rate, &lf))| {
                if !(0.0..=1.0).contains(&rate) || !(0.0..=1.0).contains(&lf) {
                    return Err(Error::Generation {
                        month: m + 1,
                        reason: format!("targets (rate {rate}, labor force {lf}) outside [0, 1]"),
                    });
                }
                let labor = (n * lf).round() as usize;
                let unemployed = (labor as f64 * rate).round() as usize;
                Ok([labor - unemployed, unemployed, individuals - labor])
            })
            .collect()
    }
}

/// Monthly transition proportions between distinct statuses, `flows[e][f]`
/// for `e != f` (diagonal ignored).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrossFlows(pub [[f64; 3]; 3]);

impl Default for GrossFlows {
    fn default() -> Self {
        GrossFlows([
            [0.0, 0.014, 0.028],
            [0.24, 0.0, 0.20],
            [0.045, 0.025, 0.0],
        ])
    }
}

#[derive(Clone, Debug)]
pub struct GenerationSettings {
    pub households: usize,
    pub household_size: usize,
    pub flows: GrossFlows,
    /// Decay rate in the variant-2 mover weight `exp(-decay * k / N)`.
    pub index_decay: f64,
    /// Probabilities of the two binary covariates.
    pub covariate_rates: [f64; 2],
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            households: 20_000,
            household_size: 5,
            flows: GrossFlows::default(),
            index_decay: 5.0,
            covariate_rates: [0.5, 0.2],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Population {
    months: usize,
    individuals: usize,
    household_size: usize,
    status: Vec<u8>,
    covariates: Vec<[u8; 2]>,
    targets: RateTargets,
    variant: Option<Variant>,
}

impl StatusSource for Population {
    fn months(&self) -> usize {
        self.months
    }
    fn individuals(&self) -> usize {
        self.individuals
    }
    #[inline]
    fn status_code(&self, month: usize, individual: usize) -> u8 {
        self.status[month * self.individuals + individual]
    }
}

impl Population {
    /// Builds a population from explicit status codes `1..=3`, laid out
    /// month-major (`statuses[(m-1) * N + (k-1)]`).
    pub fn from_statuses(
        months: usize,
        household_size: usize,
        statuses: &[u8],
        covariates: Vec<[u8; 2]>,
    ) -> Result<Population> {
        if months == 0 || household_size == 0 || statuses.len() % months != 0 {
            return Err(Error::shape(
                format!("{months} months of whole households"),
                format!("{} statuses", statuses.len()),
            ));
        }
        let individuals = statuses.len() / months;
        if individuals % household_size != 0 || covariates.len() != individuals {
            return Err(Error::shape(
                format!("individuals a multiple of {household_size} with covariates"),
                format!("{individuals} individuals, {} covariate rows", covariates.len()),
            ));
        }
        let status = statuses
            .iter()
            .map(|&s| match s {
                1..=3 => Ok(s - 1),
                other => Err(Error::Invalid(format!("status code {other} not in 1..=3"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let mut pop = Population {
            months,
            individuals,
            household_size,
            status,
            covariates,
            targets: RateTargets::constant(months, 0.0, 0.0),
            variant: None,
        };
        // record the realized rates as the targets
        let totals = population_totals(&pop);
        pop.targets = RateTargets {
            unemployment: (1..=months)
                .map(|m| {
                    let lf = totals.get(m, 1) + totals.get(m, 2);
                    if lf == 0 { 0.0 } else { totals.get(m, 2) as f64 / lf as f64 }
                })
                .collect(),
            labor_force: (1..=months)
                .map(|m| (totals.get(m, 1) + totals.get(m, 2)) as f64 / individuals as f64)
                .collect(),
        };
        Ok(pop)
    }

    pub fn months(&self) -> usize {
        self.months
    }

    pub fn individuals(&self) -> usize {
        self.individuals
    }

    pub fn households(&self) -> usize {
        self.individuals / self.household_size
    }

    pub fn household_size(&self) -> usize {
        self.household_size
    }

    pub fn variant(&self) -> Option<Variant> {
        self.variant
    }

    pub fn targets(&self) -> &RateTargets {
        &self.targets
    }

    /// Status of individual `k` in month `m` (both 1-based).
    pub fn status(&self, m: usize, k: usize) -> Status {
        Status::ALL[self.status_code(m - 1, k - 1) as usize]
    }

    /// Binary auxiliary variables of individual `k` (1-based), fixed over time.
    pub fn covariates(&self, k: usize) -> [u8; 2] {
        self.covariates[k - 1]
    }

    pub(crate) fn covariate_row(&self, individual: usize) -> [u8; 2] {
        self.covariates[individual]
    }

    pub(crate) fn month_codes(&self, month: usize) -> &[u8] {
        &self.status[month * self.individuals..(month + 1) * self.individuals]
    }

    /// Population totals of the two covariates (identical every month).
    pub fn covariate_totals(&self) -> [f64; 2] {
        let mut t = [0.0; 2];
        for row in &self.covariates {
            t[0] += row[0] as f64;
            t[1] += row[1] as f64;
        }
        t
    }

    /// Number of individuals whose status differs from the previous month;
    /// zero for month 1.
    pub fn movers(&self, m: usize) -> usize {
        if m <= 1 {
            return 0;
        }
        self.month_codes(m - 2)
            .iter()
            .zip(self.month_codes(m - 1))
            .filter(|(a, b)| a != b)
            .count()
    }

    /// The full one-hot `(M, N, 3)` array. Large for realistic sizes.
    pub fn employment_array(&self) -> crate::arrays::LabeledArray {
        let mut a = crate::arrays::LabeledArray::zeros(&[self.months, self.individuals, STATUSES]);
        let mn = self.months * self.individuals;
        let data = a.as_mut_slice();
        for m in 0..self.months {
            for k in 0..self.individuals {
                let e = self.status_code(m, k) as usize;
                data[m + self.months * k + mn * e] = 1.0;
            }
        }
        a
    }

    /// CSV of `month,individual,status` (all 1-based).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["month", "individual", "status"])?;
        for m in 0..self.months {
            for k in 0..self.individuals {
                w.write_record([
                    (m + 1).to_string(),
                    (k + 1).to_string(),
                    (self.status_code(m, k) + 1).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `month,individual,status` CSV; covariates are set to zero.
    pub fn read_csv(path: impl AsRef<Path>, household_size: usize) -> Result<Population> {
        #[derive(Deserialize)]
        struct Row {
            month: usize,
            individual: usize,
            status: u8,
        }
        let mut rows = Vec::new();
        let (mut months, mut individuals) = (0, 0);
        for row in csv::Reader::from_path(path)?.deserialize::<Row>() {
            let row = row?;
            if row.month == 0 || row.individual == 0 {
                return Err(Error::Invalid("months and individuals are 1-based".into()));
            }
            months = months.max(row.month);
            individuals = individuals.max(row.individual);
            rows.push(row);
        }
        let mut statuses = vec![0u8; months * individuals];
        for row in rows {
            statuses[(row.month - 1) * individuals + row.individual - 1] = row.status;
        }
        Population::from_statuses(months, household_size, &statuses, vec![[0, 0]; individuals])
    }

    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&(self.months as u32).to_le_bytes())?;
        out.write_all(&(self.individuals as u32).to_le_bytes())?;
        out.write_all(&(self.household_size as u32).to_le_bytes())?;
        out.write_all(&[self.variant.map_or(0, Variant::number), 0, 0, 0])?;
        for v in self.targets.unemployment.iter().chain(&self.targets.labor_force) {
            out.write_all(&v.to_le_bytes())?;
        }
        let codes: Vec<u8> = self.status.iter().map(|s| s + 1).collect();
        out.write_all(&codes)?;
        for row in &self.covariates {
            out.write_all(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_cache(path: impl AsRef<Path>) -> Result<Population> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |why: &str| Error::Invalid(format!("population cache: {why}"));
        if bytes.len() < 24 || &bytes[..8] != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (months, individuals, household_size) = (u32_at(8), u32_at(12), u32_at(16));
        let variant = Variant::from_number(bytes[20]);
        let need = 24 + 16 * months + months * individuals + 2 * individuals;
        if bytes.len() != need {
            return Err(bad(&format!("expected {need} bytes, found {}", bytes.len())));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let unemployment = (0..months).map(|m| f64_at(24 + 8 * m)).collect();
        let labor_force = (0..months).map(|m| f64_at(24 + 8 * (months + m))).collect();
        let start = 24 + 16 * months;
        let statuses = &bytes[start..start + months * individuals];
        let cov_start = start + months * individuals;
        let covariates = bytes[cov_start..]
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        let mut pop = Population::from_statuses(months, household_size, statuses, covariates)?;
        pop.targets = RateTargets {
            unemployment,
            labor_force,
        };
        pop.variant = variant;
        Ok(pop)
    }
}

/// Integer counts per month and status; each row sums to `N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationTotals {
    months: usize,
    counts: Vec<[u64; 3]>,
}

impl PopulationTotals {
    pub fn months(&self) -> usize {
        self.months
    }

    /// Count for 1-based month `m` and status `e`.
    pub fn get(&self, m: usize, e: usize) -> u64 {
        self.counts[m - 1][e - 1]
    }

    pub fn row(&self, m: usize) -> [u64; 3] {
        self.counts[m - 1]
    }

    /// Real-valued `(M, 3)` array.
    pub fn to_totals(&self) -> crate::estimators::Totals {
        let mut t = crate::estimators::Totals::zeros(self.months);
        for (m, row) in self.counts.iter().enumerate() {
            for e in 0..3 {
                t.set(m + 1, e + 1, row[e] as f64);
            }
        }
        t
    }
}

pub fn population_totals(p: &impl StatusSource) -> PopulationTotals {
    let months = p.months();
    let counts = (0..months)
        .map(|m| {
            let mut row = [0u64; 3];
            for k in 0..p.individuals() {
                row[p.status_code(m, k) as usize] += 1;
            }
            row
        })
        .collect();
    PopulationTotals { months, counts }
}

/// `R(x) = x_2 / (x_1 + x_2)` for one month's totals.
pub fn rate_of(row: [f64; 3], month: usize) -> Result<f64> {
    let lf = row[0] + row[1];
    if lf == 0.0 {
        return Err(Error::ZeroLaborForce { month });
    }
    Ok(row[1] / lf)
}

/// Component-wise unemployment rate of an `(M, 3)` totals matrix.
pub fn unemployment_rate(t: &PopulationTotals) -> Result<Vec<f64>> {
    (1..=t.months())
        .map(|m| {
            let r = t.row(m);
            rate_of([r[0] as f64, r[1] as f64, r[2] as f64], m)
        })
        .collect()
}

pub fn generate_population(variant: Variant, targets: &RateTargets, seed: u64) -> Result<Population> {
    generate_population_with(variant, targets, seed, &GenerationSettings::default())
}

pub fn generate_population_with(
    variant: Variant,
    targets: &RateTargets,
    seed: u64,
    settings: &GenerationSettings,
) -> Result<Population> {
    let months = targets.months();
    if months == 0 {
        return Err(Error::Generation {
            month: 0,
            reason: "empty target series".into(),
        });
    }
    let n = settings.households * settings.household_size;
    let counts = targets.counts(n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut status = vec![0u8; months * n];

    // month 1: a random arrangement of the target counts
    let order = index::sample(&mut rng, n, n);
    let mut slot = 0;
    for (e, &c) in counts[0].iter().enumerate() {
        for k in order.iter().skip(slot).take(c) {
            status[k] = e as u8;
        }
        slot += c;
    }

    let weights: Vec<f64> = (0..n)
        .map(|k| (-settings.index_decay * (k + 1) as f64 / n as f64).exp())
        .collect();
    let mut holders: [Vec<u32>; 3] = Default::default();
    for m in 1..months {
        let (prev, cur) = status.split_at_mut(m * n);
        let prev = &prev[(m - 1) * n..];
        let cur = &mut cur[..n];
        cur.copy_from_slice(prev);

        let before = counts[m - 1];
        let flows = match variant {
            Variant::MinimalChange => minimal_flows(before, counts[m]),
            Variant::IndexWeighted | Variant::Uniform => {
                gross_flows(before, counts[m], &settings.flows).map_err(|e| Error::Generation {
                    month: m + 1,
                    reason: format!(
                        "baseline flows move {} individuals out of status {} but only {} hold it",
                        e.1,
                        e.0 + 1,
                        before[e.0]
                    ),
                })?
            }
        };
        for (e, row) in flows.iter().enumerate() {
            let out: usize = row.iter().sum();
            if out > before[e] {
                return Err(Error::Generation {
                    month: m + 1,
                    reason: format!(
                        "{out} movers required out of status {} but only {} hold it",
                        e + 1,
                        before[e]
                    ),
                });
            }
        }

        for h in holders.iter_mut() {
            h.clear();
        }
        for (k, &s) in prev.iter().enumerate() {
            holders[s as usize].push(k as u32);
        }
        for e in 0..3 {
            let out: usize = flows[e].iter().sum();
            if out == 0 {
                continue;
            }
            let pool = &holders[e];
            let chosen: Vec<u32> = match variant {
                Variant::IndexWeighted => weighted_pick(&mut rng, pool, &weights, out),
                _ => index::sample(&mut rng, pool.len(), out)
                    .iter()
                    .map(|i| pool[i])
                    .collect(),
            };
            let mut it = chosen.into_iter();
            for f in 0..3 {
                for k in it.by_ref().take(flows[e][f]) {
                    cur[k as usize] = f as u8;
                }
            }
        }
    }

    let covariates = (0..n)
        .map(|_| {
            [
                rng.random_bool(settings.covariate_rates[0]) as u8,
                rng.random_bool(settings.covariate_rates[1]) as u8,
            ]
        })
        .collect();

    Ok(Population {
        months,
        individuals: n,
        household_size: settings.household_size,
        status,
        covariates,
        targets: targets.clone(),
        variant: Some(variant),
    })
}

/// Minimal transport between two count vectors on three categories: every
/// category with a surplus sends it to categories with a deficit.
pub(crate) fn minimal_flows(from: [usize; 3], to: [usize; 3]) -> [[usize; 3]; 3] {
    let mut surplus: [i64; 3] = [0; 3];
    for e in 0..3 {
        surplus[e] = from[e] as i64 - to[e] as i64;
    }
    transport(surplus)
}

fn transport(mut surplus: [i64; 3]) -> [[usize; 3]; 3] {
    let mut flows = [[0usize; 3]; 3];
    for e in 0..3 {
        for f in 0..3 {
            if surplus[e] > 0 && surplus[f] < 0 {
                let amount = surplus[e].min(-surplus[f]);
                flows[e][f] += amount as usize;
                surplus[e] -= amount;
                surplus[f] += amount;
            }
        }
    }
    flows
}

/// Baseline flows plus the minimal correction to reach `to`; on failure returns
/// the overdrawn status and its required outflow.
fn gross_flows(
    from: [usize; 3],
    to: [usize; 3],
    rates: &GrossFlows,
) -> std::result::Result<[[usize; 3]; 3], (usize, usize)> {
    let mut flows = [[0usize; 3]; 3];
    let mut after = [0i64; 3];
    for e in 0..3 {
        after[e] += from[e] as i64;
        for f in 0..3 {
            if e != f {
                let x = (rates.0[e][f] * from[e] as f64).round() as usize;
                flows[e][f] = x;
                after[e] -= x as i64;
                after[f] += x as i64;
            }
        }
        let out: usize = flows[e].iter().sum();
        if out > from[e] {
            return Err((e, out));
        }
    }
    let mut residual = [0i64; 3];
    for e in 0..3 {
        residual[e] = after[e] - to[e] as i64;
    }
    let correction = transport(residual);
    for e in 0..3 {
        for f in 0..3 {
            // net a correction against an opposite base flow before adding
            let c = correction[e][f];
            let cancel = c.min(flows[f][e]);
            flows[f][e] -= cancel;
            flows[e][f] += c - cancel;
        }
    }
    Ok(flows)
}

/// Weighted sampling without replacement (exponential-key method): `amount`
/// elements of `pool` with probability proportional to `weights[k]`, in
/// selection order.
fn weighted_pick(rng: &mut ChaCha8Rng, pool: &[u32], weights: &[f64], amount: usize) -> Vec<u32> {
    let mut keyed: Vec<(f64, u32)> = pool
        .iter()
        .map(|&k| {
            let u: f64 = rng.random::<f64>();
            // -ln(u)/w ~ Exp(w); the smallest keys win
            (-(1.0 - u).ln() / weights[k as usize], k)
        })
        .collect();
    if amount < keyed.len() {
        keyed.select_nth_unstable_by(amount, |a, b| a.0.total_cmp(&b.0));
        keyed.truncate(amount);
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, k)| k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_settings() -> GenerationSettings {
        GenerationSettings {
            households: 400,
            ..GenerationSettings::default()
        }
    }

    #[test]
    fn rate_function_cases() {
        assert_eq!(rate_of([3.0, 1.0, 0.0], 1).unwrap(), 0.25);
        assert_eq!(rate_of([0.0, 4.0, 9.0], 1).unwrap(), 1.0);
        assert_eq!(rate_of([4.0, 0.0, 9.0], 1).unwrap(), 0.0);
        assert!(matches!(
            rate_of([0.0, 0.0, 9.0], 7),
            Err(Error::ZeroLaborForce { month: 7 })
        ));
    }

    #[test]
    fn constant_targets_produce_no_movers() {
        let t = RateTargets::constant(12, 0.06, 0.65);
        let p = generate_population_with(Variant::MinimalChange, &t, 3, &small_settings()).unwrap();
        for m in 2..=12 {
            assert_eq!(p.movers(m), 0);
        }
    }

    #[test]
    fn step_in_unemployed_moves_exactly_that_many() {
        let n = 2000usize;
        let lf = 0.5;
        let labor = (n as f64 * lf).round();
        let mut t = RateTargets::constant(4, 50.0 / labor, lf);
        t.unemployment[2] = 57.0 / labor;
        t.unemployment[3] = 57.0 / labor;
        let p = generate_population_with(Variant::MinimalChange, &t, 11, &small_settings()).unwrap();
        let totals = population_totals(&p);
        assert_eq!(totals.get(2, 2), 50);
        assert_eq!(totals.get(3, 2), 57);
        assert_eq!(p.movers(2), 0);
        assert_eq!(p.movers(3), 7);
        assert_eq!(p.movers(4), 0);
    }

    #[test]
    fn uniform_variant_is_deterministic() {
        let t = RateTargets::packaged().truncated(10).unwrap();
        let a = generate_population_with(Variant::Uniform, &t, 42, &small_settings()).unwrap();
        let b = generate_population_with(Variant::Uniform, &t, 42, &small_settings()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.covariates, b.covariates);
        let c = generate_population_with(Variant::Uniform, &t, 43, &small_settings()).unwrap();
        assert_ne!(a.status, c.status);
    }

    #[test]
    fn infeasible_flows_name_the_month() {
        let t = RateTargets::constant(3, 0.1, 0.6);
        let settings = GenerationSettings {
            households: 100,
            flows: GrossFlows([[0.0, 0.7, 0.7], [0.0; 3], [0.0; 3]]),
            ..GenerationSettings::default()
        };
        match generate_population_with(Variant::Uniform, &t, 1, &settings) {
            Err(Error::Generation { month, .. }) => assert_eq!(month, 2),
            other => panic!("expected generation error, got {other:?}"),
        }
        let bad = RateTargets::constant(3, 1.5, 0.6);
        assert!(matches!(
            generate_population(Variant::Uniform, &bad, 1),
            Err(Error::Generation { month: 1, .. })
        ));
    }

    #[test]
    fn hand_built_totals() {
        // 10 people, 2 months
        let month1 = [1, 1, 2, 3, 1, 2, 2, 3, 3, 1];
        let month2 = [1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let statuses: Vec<u8> = month1.iter().chain(&month2).copied().collect();
        let p = Population::from_statuses(2, 5, &statuses, vec![[0, 0]; 10]).unwrap();
        let t = population_totals(&p);
        assert_eq!(t.row(1), [4, 3, 3]);
        assert_eq!(t.row(2), [10, 0, 0]);
        assert_eq!(unemployment_rate(&t).unwrap(), vec![3.0 / 7.0, 0.0]);
        assert_eq!(p.status(1, 3), Status::Unemployed);
        assert_eq!(p.movers(2), 6);
    }

    #[test]
    fn cache_round_trip() {
        let t = RateTargets::packaged().truncated(6).unwrap();
        let p = generate_population_with(Variant::IndexWeighted, &t, 5, &small_settings()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pop.bin");
        p.write_cache(&path).unwrap();
        let q = Population::read_cache(&path).unwrap();
        assert_eq!(p.status, q.status);
        assert_eq!(p.covariates, q.covariates);
        assert_eq!(p.targets, q.targets);
        assert_eq!(q.variant(), Some(Variant::IndexWeighted));
    }

    #[test]
    fn packaged_series_shape() {
        let t = RateTargets::packaged();
        assert_eq!(t.months(), 85);
        let (lo, hi) = t
            .unemployment
            .iter()
            .fold((1.0f64, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        assert!(lo > 0.035 && hi < 0.11, "range {lo}..{hi}");
    }
}
