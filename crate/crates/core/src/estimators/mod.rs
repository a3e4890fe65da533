//! Estimators of monthly status totals from one sample.
//!
//! Everything here works on a [`SampleData`]: the statuses observed on the
//! members of one draw's rotation chart, optionally perturbed by a
//! [`ErrorModel`].

mod ak;
mod linear;
mod rc;

pub(crate) use ak::phi as ak_phi;
pub use ak::{ak_linear_weights, ak_recursive, AkCoefficients};
pub use linear::{
    apply_linear, blue, blue_bailar, blue_bailar_weights, blue_bailar_weights_from_rows, blue_weights,
    blue_weights_from_rows, design_matrices, direct_weights, gls_weights, gls_weights_from_rows,
    mis_selection_weights, BailarModel, LinearWeights,
};
pub use rc::{
    calibrate, rc_proxy, regression_composite, CalibrationOutcome, RcPanel, RcResult,
    CALIBRATION_RANK_TOL, CALIBRATION_SATISFY_TOL,
};

use serde::{Deserialize, Serialize};

use crate::design::{RotationDesign, SampleAssignment};
use crate::error::{Error, Result};
use crate::population::{rate_of, Population, StatusSource};

/// Real-valued `(M, 3)` totals indexed by month and status (1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct Totals {
    rows: Vec<[f64; 3]>,
}

impl Totals {
    pub fn zeros(months: usize) -> Self {
        Self {
            rows: vec![[0.0; 3]; months],
        }
    }

    pub fn from_rows(rows: Vec<[f64; 3]>) -> Self {
        Self { rows }
    }

    /// From the flattened `(M, 3)` vector (month fastest).
    pub fn from_flat(months: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 3 * months {
            return Err(Error::shape(3 * months, v.len()));
        }
        Ok(Self {
            rows: (0..months)
                .map(|m| [v[m], v[m + months], v[m + 2 * months]])
                .collect(),
        })
    }

    pub fn months(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, m: usize, e: usize) -> f64 {
        self.rows[m - 1][e - 1]
    }

    pub fn set(&mut self, m: usize, e: usize, v: f64) {
        self.rows[m - 1][e - 1] = v;
    }

    pub fn row(&self, m: usize) -> [f64; 3] {
        self.rows[m - 1]
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let months = self.months();
        let mut v = vec![0.0; 3 * months];
        for (m, row) in self.rows.iter().enumerate() {
            for e in 0..3 {
                v[m + months * e] = row[e];
            }
        }
        v
    }

    /// Unemployment rate of every month.
    pub fn rates(&self) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(m, &row)| rate_of(row, m + 1))
            .collect()
    }
}

/// Month-in-sample estimates, flattened as `(M, G, 3)` with month fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct MisEstimates {
    months: usize,
    groups: usize,
    data: Vec<f64>,
}

impl MisEstimates {
    pub fn zeros(months: usize, groups: usize) -> Self {
        Self {
            months,
            groups,
            data: vec![0.0; months * groups * 3],
        }
    }

    pub fn from_flat(months: usize, groups: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != months * groups * 3 {
            return Err(Error::shape(months * groups * 3, data.len()));
        }
        Ok(Self {
            months,
            groups,
            data,
        })
    }

    pub fn months(&self) -> usize {
        self.months
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    #[inline]
    fn offset(&self, m: usize, g: usize, e: usize) -> usize {
        (m - 1) + self.months * ((g - 1) + self.groups * (e - 1))
    }

    pub fn get(&self, m: usize, g: usize, e: usize) -> f64 {
        self.data[self.offset(m, g, e)]
    }

    pub fn set(&mut self, m: usize, g: usize, e: usize, v: f64) {
        let o = self.offset(m, g, e);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Average over groups, which is the direct estimate.
    pub fn group_average(&self) -> Totals {
        let mut t = Totals::zeros(self.months);
        for m in 1..=self.months {
            for e in 1..=3 {
                let s: f64 = (1..=self.groups).map(|g| self.get(m, g, e)).sum();
                t.set(m, e, s / self.groups as f64);
            }
        }
        t
    }

    /// Adds a group-level bias `b[g][e]` to every month.
    pub fn with_group_bias(&self, bias: &[[f64; 3]]) -> Result<Self> {
        if bias.len() != self.groups {
            return Err(Error::shape(self.groups, bias.len()));
        }
        let mut out = self.clone();
        for m in 1..=self.months {
            for g in 1..=self.groups {
                for e in 1..=3 {
                    out.set(m, g, e, self.get(m, g, e) + bias[g - 1][e - 1]);
                }
            }
        }
        Ok(out)
    }
}

/// Survey weights of one draw, aligned with the members of its assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    months: usize,
    month_size: usize,
    members: Vec<u32>,
    values: Vec<f64>,
}

impl WeightSet {
    pub fn new(assignment: &SampleAssignment, values: Vec<f64>) -> Result<Self> {
        if values.len() != assignment.members().len() {
            return Err(Error::shape(assignment.members().len(), values.len()));
        }
        Ok(Self {
            months: assignment.months(),
            month_size: assignment.month_size(),
            members: assignment.members().to_vec(),
            values,
        })
    }

    pub fn months(&self) -> usize {
        self.months
    }

    /// Weight of 1-based individual `k` in month `m`; zero outside `S_m`.
    pub fn get(&self, m: usize, k: usize) -> f64 {
        let (members, values) = self.month(m);
        members
            .iter()
            .position(|&i| i as usize == k - 1)
            .map_or(0.0, |p| values[p])
    }

    /// Members (0-based individuals) and weights of month `m`, group by group.
    pub fn month(&self, m: usize) -> (&[u32], &[f64]) {
        let range = (m - 1) * self.month_size..m * self.month_size;
        (&self.members[range.clone()], &self.values[range])
    }

    pub fn month_sum(&self, m: usize) -> f64 {
        self.month(m).1.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Inverse-inclusion-probability weights `N / |S_m|` on every sampled unit.
pub fn base_weights(design: &RotationDesign, assignment: &SampleAssignment) -> WeightSet {
    let w = design.base_weight();
    WeightSet::new(assignment, vec![w; assignment.members().len()])
        .expect("one weight per member")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ErrorMode {
    /// Flip `round(fraction * count)` employed members of the group to unemployed.
    EmployedToUnemployed { fraction: f64 },
    /// Flip up to `cap` unemployed members of the group to employed.
    UnemployedToEmployed { cap: usize },
}

/// Systematic misclassification inside one rotation group, every month.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    #[serde(flatten)]
    pub mode: ErrorMode,
    /// Affected rotation group (1-based chart label).
    #[serde(default = "default_error_group")]
    pub group: usize,
}

fn default_error_group() -> usize {
    1
}

impl ErrorModel {
    pub fn employed_to_unemployed(fraction: f64) -> Self {
        Self {
            mode: ErrorMode::EmployedToUnemployed { fraction },
            group: 1,
        }
    }

    pub fn unemployed_to_employed(cap: usize) -> Self {
        Self {
            mode: ErrorMode::UnemployedToEmployed { cap },
            group: 1,
        }
    }

    pub fn validate(&self, groups: usize) -> Result<()> {
        if let ErrorMode::EmployedToUnemployed { fraction } = self.mode {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::Invalid(format!(
                    "error fraction {fraction} outside [0, 1]"
                )));
            }
        }
        if self.group == 0 || self.group > groups {
            return Err(Error::OutOfRange {
                what: "error group",
                value: self.group as i64,
                min: 1,
                max: groups as i64,
            });
        }
        Ok(())
    }
}

/// Perturbs the observed status codes (0-based, aligned with the assignment
/// members) of the error model's group in every month. Members are taken in
/// ascending individual index.
pub fn inject_measurement_error(
    observed: &mut [u8],
    assignment: &SampleAssignment,
    model: &ErrorModel,
) -> Result<()> {
    model.validate(assignment.groups())?;
    if observed.len() != assignment.members().len() {
        return Err(Error::shape(assignment.members().len(), observed.len()));
    }
    let size = assignment.group_size();
    let (from, to) = match model.mode {
        ErrorMode::EmployedToUnemployed { .. } => (0u8, 1u8),
        ErrorMode::UnemployedToEmployed { .. } => (1u8, 0u8),
    };
    for m in 1..=assignment.months() {
        let start = ((m - 1) * assignment.groups() + model.group - 1) * size;
        let members = assignment.group(m, model.group);
        let mut holders: Vec<(u32, usize)> = (0..size)
            .filter(|&s| observed[start + s] == from)
            .map(|s| (members[s], s))
            .collect();
        holders.sort_unstable();
        let flips = match model.mode {
            ErrorMode::EmployedToUnemployed { fraction } => {
                ((fraction * holders.len() as f64).round() as usize).min(holders.len())
            }
            ErrorMode::UnemployedToEmployed { cap } => cap.min(holders.len()),
        };
        for &(_, s) in &holders[..flips] {
            observed[start + s] = to;
        }
    }
    Ok(())
}

/// Observed microdata of one draw.
#[derive(Clone, Debug)]
pub struct SampleData {
    assignment: SampleAssignment,
    /// Status codes 0..3 aligned with `assignment.members()`.
    observed: Vec<u8>,
    covariates: Vec<[u8; 2]>,
}

impl SampleData {
    pub fn observe(
        population: &Population,
        assignment: SampleAssignment,
        error: Option<&ErrorModel>,
    ) -> Result<Self> {
        if population.months() < assignment.months() {
            return Err(Error::shape(
                format!("population with at least {} months", assignment.months()),
                population.months(),
            ));
        }
        let month_size = assignment.month_size();
        let mut observed = Vec::with_capacity(assignment.members().len());
        let mut covariates = Vec::with_capacity(assignment.members().len());
        for (i, &k) in assignment.members().iter().enumerate() {
            let m = i / month_size;
            let k = k as usize;
            if k >= population.individuals() {
                return Err(Error::shape(
                    format!("individuals below {}", population.individuals()),
                    k + 1,
                ));
            }
            observed.push(population.status_code(m, k));
            covariates.push(population.covariate_row(k));
        }
        if let Some(model) = error {
            inject_measurement_error(&mut observed, &assignment, model)?;
        }
        Ok(Self {
            assignment,
            observed,
            covariates,
        })
    }

    pub fn assignment(&self) -> &SampleAssignment {
        &self.assignment
    }

    pub fn months(&self) -> usize {
        self.assignment.months()
    }

    /// Observed status codes (0-based) of `S_{m,g}`, in member order.
    pub fn group_status(&self, m: usize, g: usize) -> &[u8] {
        let size = self.assignment.group_size();
        let start = ((m - 1) * self.assignment.groups() + g - 1) * size;
        &self.observed[start..start + size]
    }

    pub fn month_status(&self, m: usize) -> &[u8] {
        let size = self.assignment.month_size();
        &self.observed[(m - 1) * size..m * size]
    }

    pub fn month_covariates(&self, m: usize) -> &[[u8; 2]] {
        let size = self.assignment.month_size();
        &self.covariates[(m - 1) * size..m * size]
    }

    /// Status of 1-based individual `k` observed in month `m`, if sampled.
    pub fn observed_status(&self, m: usize, k: usize) -> Option<crate::population::Status> {
        let members = self.assignment.month(m);
        members
            .iter()
            .position(|&i| i as usize == k - 1)
            .map(|p| crate::population::Status::ALL[self.month_status(m)[p] as usize])
    }
}

/// `Σ w_k y_{k,·}` over `(status code, weight)` pairs.
pub fn weighted_totals(units: impl IntoIterator<Item = (u8, f64)>) -> [f64; 3] {
    let mut t = [0.0; 3];
    for (s, w) in units {
        t[s as usize] += w;
    }
    t
}

fn check_weights(sample: &SampleData, w: &WeightSet) -> Result<()> {
    if w.values.len() != sample.observed.len() || w.members != sample.assignment.members() {
        return Err(Error::shape(
            "weights aligned with the sample members",
            format!("{} weights", w.values.len()),
        ));
    }
    Ok(())
}

pub fn direct_estimator(sample: &SampleData, w: &WeightSet) -> Result<Totals> {
    check_weights(sample, w)?;
    Ok(Totals::from_rows(
        (1..=sample.months())
            .map(|m| {
                weighted_totals(
                    sample
                        .month_status(m)
                        .iter()
                        .copied()
                        .zip(w.month(m).1.iter().copied()),
                )
            })
            .collect(),
    ))
}

/// `G · Σ_{k ∈ S_{m,g}} w y` for every month and group.
pub fn mis_estimator(sample: &SampleData, w: &WeightSet) -> Result<MisEstimates> {
    check_weights(sample, w)?;
    let a = &sample.assignment;
    let (groups, size) = (a.groups(), a.group_size());
    let mut mis = MisEstimates::zeros(a.months(), groups);
    for m in 1..=a.months() {
        let (_, weights) = w.month(m);
        for g in 1..=groups {
            let ws = &weights[(g - 1) * size..g * size];
            let t = weighted_totals(sample.group_status(m, g).iter().copied().zip(ws.iter().copied()));
            for e in 0..3 {
                mis.set(m, g, e + 1, groups as f64 * t[e]);
            }
        }
    }
    Ok(mis)
}
