//! The rotating-panel sample mechanism.
//!
//! Households `1..=H` are cut into `H / n` clusters per label: for a random
//! draw `r` the cluster with label `ℓ` is
//!
//! ```text
//! Clu_ℓ = { rem((r - 1 + ℓ - 1) + (H/n)(j - 1), H) + 1 : j = 1..n }
//! ```
//!
//! and rotation group `g` of month `m` is `S_{m,g} = Clu_{m + δ_g}`. With the
//! default lags `δ = (0,1,2,3,12,13,14,15)` this is the 4-8-4 pattern: a cluster
//! is interviewed four months, rests eight, and returns for four more.
//!
//! Group labels run against time: the cluster in group `g` at month `m` sits in
//! the group `g'` with `δ_{g'} = δ_g + 1` at month `m - 1`, when that group
//! exists. Groups without such a predecessor are *entering* (new to the sample
//! or back from the rest period).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RotationDesign {
    pub households: usize,
    pub household_size: usize,
    /// Households per rotation group.
    pub group_households: usize,
    pub delta: Vec<usize>,
    pub months: usize,
}

impl Default for RotationDesign {
    fn default() -> Self {
        Self {
            households: 20_000,
            household_size: 5,
            group_households: 20,
            delta: vec![0, 1, 2, 3, 12, 13, 14, 15],
            months: 85,
        }
    }
}

impl RotationDesign {
    pub fn with_months(months: usize) -> Self {
        Self {
            months,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.is_empty() || self.delta.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "rotation lags {:?} must be strictly increasing",
                self.delta
            )));
        }
        if self.group_households == 0 || self.households % self.group_households != 0 {
            return Err(Error::Invalid(format!(
                "{} households cannot be split into groups of {}",
                self.households, self.group_households
            )));
        }
        if self.months == 0 {
            return Err(Error::Invalid("a design needs at least one month".into()));
        }
        Ok(())
    }

    pub fn groups(&self) -> usize {
        self.delta.len()
    }

    /// Number of equiprobable draws, `H / n`.
    pub fn draws(&self) -> usize {
        self.households / self.group_households
    }

    pub fn individuals(&self) -> usize {
        self.households * self.household_size
    }

    pub fn group_individuals(&self) -> usize {
        self.group_households * self.household_size
    }

    pub fn month_individuals(&self) -> usize {
        self.groups() * self.group_individuals()
    }

    /// Base weight: inverse of the inclusion probability.
    pub fn base_weight(&self) -> f64 {
        self.individuals() as f64 / self.month_individuals() as f64
    }

    pub fn max_cluster(&self) -> usize {
        self.months + self.delta[self.delta.len() - 1]
    }

    /// 1-based group whose month `m - 1` members are the month `m` members of
    /// group `g`, or `None` for an entering group.
    pub fn predecessor(&self, g: usize) -> Option<usize> {
        let target = self.delta[g - 1] + 1;
        self.delta.iter().position(|&d| d == target).map(|p| p + 1)
    }

    pub fn entering_groups(&self) -> Vec<usize> {
        (1..=self.groups()).filter(|&g| self.predecessor(g).is_none()).collect()
    }

    pub fn continuing_groups(&self) -> Vec<usize> {
        (1..=self.groups()).filter(|&g| self.predecessor(g).is_some()).collect()
    }

    fn check_draw(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.draws() {
            return Err(Error::OutOfRange {
                what: "r",
                value: r as i64,
                min: 1,
                max: self.draws() as i64,
            });
        }
        Ok(())
    }

    /// Households (1-based) of cluster `ell` under draw `r`, in `j` order.
    pub fn cluster(&self, ell: usize, r: usize) -> Result<Vec<usize>> {
        self.check_draw(r)?;
        if ell == 0 || ell > self.max_cluster() {
            return Err(Error::OutOfRange {
                what: "ell",
                value: ell as i64,
                min: 1,
                max: self.max_cluster() as i64,
            });
        }
        Ok(self.cluster_unchecked(ell, r))
    }

    fn cluster_unchecked(&self, ell: usize, r: usize) -> Vec<usize> {
        let stride = self.draws();
        (1..=self.group_households)
            .map(|j| ((r - 1 + ell - 1) + stride * (j - 1)) % self.households + 1)
            .collect()
    }

    pub fn assignment(&self, r: usize) -> Result<SampleAssignment> {
        self.validate()?;
        self.check_draw(r)?;
        let per_group = self.group_individuals();
        let mut members = Vec::with_capacity(self.months * self.month_individuals());
        for m in 1..=self.months {
            for &d in &self.delta {
                for h in self.cluster_unchecked(m + d, r) {
                    let first = (h - 1) * self.household_size;
                    members.extend((first..first + self.household_size).map(|k| k as u32));
                }
            }
        }
        debug_assert_eq!(members.len(), self.months * self.groups() * per_group);
        Ok(SampleAssignment {
            r,
            months: self.months,
            groups: self.groups(),
            group_size: per_group,
            household_size: self.household_size,
            delta: self.delta.clone(),
            members,
        })
    }

    /// Individuals shared by `S_m` and `S_{m+lag}` in every draw.
    pub fn expected_overlap(&self, lag: usize) -> usize {
        let shared = self
            .delta
            .iter()
            .filter(|&&d| d >= lag && self.delta.contains(&(d - lag)))
            .count();
        shared * self.group_individuals()
    }

    /// Walks every draw: per-month inclusion counts of every individual and
    /// the overlap sizes between months `lags` apart.
    pub fn audit(&self, lags: &[usize]) -> Result<DesignAudit> {
        self.validate()?;
        let n = self.individuals();
        let mut counts = vec![0u16; self.months * n];
        let mut overlaps: Vec<(usize, usize, usize)> = lags
            .iter()
            .map(|&l| (l, usize::MAX, 0))
            .collect();
        for r in 1..=self.draws() {
            let a = self.assignment(r)?;
            let mut sorted: Vec<Vec<u32>> = Vec::with_capacity(self.months);
            for m in 1..=self.months {
                let mut s = a.month(m).to_vec();
                for &k in &s {
                    counts[(m - 1) * n + k as usize] += 1;
                }
                s.sort_unstable();
                sorted.push(s);
            }
            for o in overlaps.iter_mut() {
                let lag = o.0;
                for m in lag + 1..=self.months {
                    let c = sorted_intersection(&sorted[m - 1 - lag], &sorted[m - 1]);
                    o.1 = o.1.min(c);
                    o.2 = o.2.max(c);
                }
            }
        }
        let inclusion_min = counts.iter().copied().min().unwrap_or(0) as usize;
        let inclusion_max = counts.iter().copied().max().unwrap_or(0) as usize;
        Ok(DesignAudit {
            inclusion_min,
            inclusion_max,
            expected_inclusions: self.groups(),
            overlaps: overlaps
                .into_iter()
                .map(|(lag, lo, hi)| OverlapAudit {
                    lag,
                    expected: self.expected_overlap(lag),
                    min: if lo == usize::MAX { 0 } else { lo },
                    max: hi,
                })
                .collect(),
        })
    }

    pub fn enumerate_assignments(&self) -> Result<Vec<SampleAssignment>> {
        (1..=self.draws()).map(|r| self.assignment(r)).collect()
    }

    /// Writes `r,m,g,ell,household_ids` rows for the given draws; household ids
    /// are space-separated.
    pub fn write_chart_csv(&self, draws: &[usize], path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "m", "g", "ell", "household_ids"])?;
        for &r in draws {
            self.check_draw(r)?;
            for m in 1..=self.months {
                for (g, &d) in self.delta.iter().enumerate() {
                    let ids: Vec<String> = self
                        .cluster_unchecked(m + d, r)
                        .iter()
                        .map(|h| h.to_string())
                        .collect();
                    w.write_record([
                        r.to_string(),
                        m.to_string(),
                        (g + 1).to_string(),
                        (m + d).to_string(),
                        ids.join(" "),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn sorted_intersection(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapAudit {
    pub lag: usize,
    pub expected: usize,
    pub min: usize,
    pub max: usize,
}

/// Result of [`RotationDesign::audit`]. Inclusion counts are over all draws,
/// so each individual should be sampled in `G` of the `H / n` draws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesignAudit {
    pub inclusion_min: usize,
    pub inclusion_max: usize,
    pub expected_inclusions: usize,
    pub overlaps: Vec<OverlapAudit>,
}

impl DesignAudit {
    pub fn passes(&self) -> bool {
        self.inclusion_min == self.expected_inclusions
            && self.inclusion_max == self.expected_inclusions
            && self
                .overlaps
                .iter()
                .all(|o| o.min == o.expected && o.max == o.expected)
    }
}

/// One draw's rotation chart: the individuals of every `S_{m,g}`.
///
/// Members of a group are stored household by household in cluster order, so
/// the same physical cluster lists its individuals in the same order in every
/// month it is in sample.
#[derive(Clone, Debug)]
pub struct SampleAssignment {
    r: usize,
    months: usize,
    groups: usize,
    group_size: usize,
    household_size: usize,
    delta: Vec<usize>,
    members: Vec<u32>,
}

impl SampleAssignment {
    pub fn draw(&self) -> usize {
        self.r
    }

    pub fn months(&self) -> usize {
        self.months
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn household_size(&self) -> usize {
        self.household_size
    }

    pub fn delta(&self) -> &[usize] {
        &self.delta
    }

    pub fn month_size(&self) -> usize {
        self.groups * self.group_size
    }

    /// Cluster label `ℓ = m + δ_g`.
    pub fn cluster_label(&self, m: usize, g: usize) -> usize {
        m + self.delta[g - 1]
    }

    /// 0-based individual indices of `S_{m,g}` (1-based `m`, `g`).
    pub fn group(&self, m: usize, g: usize) -> &[u32] {
        let start = ((m - 1) * self.groups + (g - 1)) * self.group_size;
        &self.members[start..start + self.group_size]
    }

    /// 0-based individual indices of `S_m`, group by group.
    pub fn month(&self, m: usize) -> &[u32] {
        let size = self.month_size();
        &self.members[(m - 1) * size..m * size]
    }

    /// All members, month-major then group then slot.
    pub(crate) fn members(&self) -> &[u32] {
        &self.members
    }

    /// 1-based households of `S_{m,g}`.
    pub fn households(&self, m: usize, g: usize) -> Vec<usize> {
        self.group(m, g)
            .iter()
            .step_by(self.household_size)
            .map(|&k| k as usize / self.household_size + 1)
            .collect()
    }

    /// Group of 1-based individual `k` at month `m`, if sampled.
    pub fn group_of(&self, m: usize, k: usize) -> Option<usize> {
        (1..=self.groups).find(|&g| self.group(m, g).contains(&((k - 1) as u32)))
    }
}

/// The eight `(ℓ, j)` sample-designation / rotation-group pairs of month `m`
/// of the production rotation chart; `m` counts months from an arbitrary
/// anchor with `m = 1` at designation 85, group 1.
pub fn cps_month_mapping(m: usize) -> Vec<(usize, usize)> {
    (1..=8)
        .map(|jp| {
            let q = (m + jp - 2) / 8;
            let j = m + jp - 1 - 8 * q;
            let ell = if jp <= 4 { 85 + q } else { 86 + q };
            (ell, j)
        })
        .collect()
}
