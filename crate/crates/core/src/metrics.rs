//! True and empirical calibration errors, category statistics, and
//! multicalibration audits.
//!
//! A category is a pair (subpopulation, prediction interval). Its calibration
//! error is the mean label minus the mean prediction over the points that fall
//! into it. Under a [`FiniteDistribution`] every quantity is an exact sum over
//! the support; under a [`LabeledSample`] it is a count-weighted average.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_closed, check_unit_open, Result};
use crate::model::{
    DomainPoint, FiniteDistribution, Group, Interval, IntervalPartition, LabeledSample, Predictor,
    PredictorClass, SubpopulationCollection,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsSource {
    Exact,
    Empirical,
}

/// Where category statistics come from.
#[derive(Clone, Copy, Debug)]
pub enum Evidence<'a> {
    Distribution(&'a FiniteDistribution),
    Sample(&'a LabeledSample),
}

impl Evidence<'_> {
    pub fn source(&self) -> StatsSource {
        match self {
            Evidence::Distribution(_) => StatsSource::Exact,
            Evidence::Sample(_) => StatsSource::Empirical,
        }
    }
}

/// Mass of `(point, label)` pairs per domain point.
///
/// Probabilities for a distribution (total taken as exactly 1) or occurrence
/// counts for a sample (total `m`).
#[derive(Clone, Debug)]
pub struct WeightTable {
    per_point: Vec<[f64; 2]>,
    total: f64,
    source: StatsSource,
}

impl WeightTable {
    /// Uses the integer weights when the distribution has them (total Σw),
    /// otherwise the probabilities (total 1).
    pub fn from_distribution(d: &FiniteDistribution) -> Self {
        let mut per_point = vec![[0.0; 2]; d.domain_size()];
        if let Some(weights) = d.integer_weights() {
            let mut total = 0.0;
            for (e, &w) in d.support().iter().zip(weights) {
                per_point[e.point.index()][e.label as usize] += w as f64;
                total += w as f64;
            }
            return WeightTable {
                per_point,
                total,
                source: StatsSource::Exact,
            };
        }
        for e in d.support() {
            per_point[e.point.index()][e.label as usize] += e.prob;
        }
        WeightTable {
            per_point,
            total: 1.0,
            source: StatsSource::Exact,
        }
    }

    pub fn from_sample(s: &LabeledSample, domain_size: usize) -> Self {
        let mut per_point = vec![[0.0; 2]; domain_size];
        for &(x, y) in s.items() {
            per_point[x.index()][y as usize] += 1.0;
        }
        WeightTable {
            per_point,
            total: s.len() as f64,
            source: StatsSource::Empirical,
        }
    }

    /// Sample tally from per-point `[label 0, label 1]` counts.
    pub fn from_counts(counts: Vec<[u64; 2]>) -> Self {
        let total = counts.iter().map(|c| c[0] + c[1]).sum::<u64>() as f64;
        let per_point = counts
            .into_iter()
            .map(|c| [c[0] as f64, c[1] as f64])
            .collect();
        WeightTable {
            per_point,
            total,
            source: StatsSource::Empirical,
        }
    }

    pub fn from_evidence(evidence: Evidence<'_>, domain_size: usize) -> Self {
        match evidence {
            Evidence::Distribution(d) => Self::from_distribution(d),
            Evidence::Sample(s) => Self::from_sample(s, domain_size),
        }
    }

    pub fn source(&self) -> StatsSource {
        self.source
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn category_stats(
        &self,
        h: &Predictor,
        group: &Group,
        interval: &Interval,
    ) -> CategoryStats {
        let mut group_w = 0.0;
        let mut joint_w = 0.0;
        let mut positive_w = 0.0;
        let mut prediction_w = 0.0;
        for (i, w) in self.per_point.iter().enumerate() {
            let x = DomainPoint::from(i);
            if !group.contains(x) {
                continue;
            }
            let wx = w[0] + w[1];
            group_w += wx;
            let v = h.predict(x);
            if interval.contains(v) {
                joint_w += wx;
                positive_w += w[1];
                prediction_w += wx * v;
            }
        }
        let (p_group, p_joint) = if self.total > 0.0 {
            (group_w / self.total, joint_w / self.total)
        } else {
            (0.0, 0.0)
        };
        let p_cond = (group_w > 0.0).then(|| joint_w / group_w);
        let (mu_y, mu_h) = if joint_w > 0.0 {
            (Some(positive_w / joint_w), Some(prediction_w / joint_w))
        } else {
            (None, None)
        };
        CategoryStats {
            p_joint,
            p_group,
            p_cond,
            mu_y,
            mu_h,
            n_hat: match self.source {
                StatsSource::Exact => None,
                StatsSource::Empirical => Some(joint_w as u64),
            },
            group_weight: group_w,
            joint_weight: joint_w,
            source: self.source,
        }
    }
}

/// Statistics of one category under one predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    /// Pr[x ∈ U, h(x) ∈ I].
    pub p_joint: f64,
    /// Pr[x ∈ U].
    pub p_group: f64,
    /// Pr[h(x) ∈ I | x ∈ U]; undefined when the group has no mass.
    pub p_cond: Option<f64>,
    /// Mean label on the category.
    pub mu_y: Option<f64>,
    /// Mean prediction on the category.
    pub mu_h: Option<f64>,
    /// Sample occupancy; absent for exact statistics.
    pub n_hat: Option<u64>,
    #[serde(skip)]
    group_weight: f64,
    #[serde(skip)]
    joint_weight: f64,
    pub source: StatsSource,
}

impl CategoryStats {
    pub fn calibration_error(&self) -> Option<f64> {
        Some(self.mu_y? - self.mu_h?)
    }

    /// `Pr[U] ≥ γ` and `Pr[h ∈ I | U] ≥ ψ`, both inclusive.
    ///
    /// Compared in cross-multiplied form on raw weights (`joint ≥ ψ·group`),
    /// which is the conditional threshold without a rounding division.
    pub fn is_interesting(&self, gamma: f64, psi: f64, total: f64) -> bool {
        self.group_weight > 0.0
            && self.group_weight >= gamma * total
            && self.joint_weight >= psi * self.group_weight
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Category {
    pub group: usize,
    pub interval: usize,
}

/// `E[y | U, I] − E[h | U, I]` summed exactly over the support of `d`.
pub fn true_calibration_error(
    h: &Predictor,
    group: &Group,
    interval: &Interval,
    d: &FiniteDistribution,
) -> Option<f64> {
    let (mut mass, mut label_mass, mut prediction_mass) = (0.0, 0.0, 0.0);
    for e in d.support() {
        let v = h.predict(e.point);
        if group.contains(e.point) && interval.contains(v) {
            mass += e.prob;
            label_mass += e.prob * e.label as f64;
            prediction_mass += e.prob * v;
        }
    }
    (mass > 0.0).then(|| label_mass / mass - prediction_mass / mass)
}

/// Occupancy-weighted mean label minus mean prediction on the sample items
/// falling into the category; `None` when no item does.
pub fn empirical_calibration_error(
    h: &Predictor,
    group: &Group,
    interval: &Interval,
    s: &LabeledSample,
) -> Option<f64> {
    let mut occupancy = 0u64;
    let (mut labels, mut predictions) = (0.0, 0.0);
    for &(x, y) in s.items() {
        let v = h.predict(x);
        if group.contains(x) && interval.contains(v) {
            occupancy += 1;
            labels += y as f64;
            predictions += v;
        }
    }
    (occupancy > 0).then(|| {
        let n = occupancy as f64;
        labels / n - predictions / n
    })
}

pub fn category_stats(
    h: &Predictor,
    group: &Group,
    interval: &Interval,
    evidence: Evidence<'_>,
) -> CategoryStats {
    WeightTable::from_evidence(evidence, h.domain_size()).category_stats(h, group, interval)
}

/// Interesting categories of `h` in Γ-major, Λ-minor order.
pub fn interesting_categories(
    h: &Predictor,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    gamma: f64,
    psi: f64,
    evidence: Evidence<'_>,
) -> Result<Vec<Category>> {
    check_unit_open("gamma", gamma)?;
    check_unit_open("psi", psi)?;
    let table = WeightTable::from_evidence(evidence, h.domain_size());
    Ok(interesting_in_table(
        h, groups, partition, gamma, psi, &table,
    ))
}

pub(crate) fn interesting_in_table(
    h: &Predictor,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    gamma: f64,
    psi: f64,
    table: &WeightTable,
) -> Vec<Category> {
    let mut out = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for (ii, iv) in partition.intervals().iter().enumerate() {
            if table
                .category_stats(h, g, iv)
                .is_interesting(gamma, psi, table.total())
            {
                out.push(Category {
                    group: gi,
                    interval: ii,
                });
            }
        }
    }
    out
}

/// What to do with an interesting category that no sample item falls into.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCategoryPolicy {
    /// Count it as a violation: the guarantee cannot be checked without data.
    #[default]
    Violation,
    /// Report it as undefined and leave it out of the verdict.
    Exclude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditParameters {
    pub alpha: f64,
    pub gamma: f64,
    pub psi: f64,
    pub lambda: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationReason {
    ErrorAboveAlpha,
    NoOccupancy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub group: String,
    pub interval: Interval,
    pub category: Category,
    pub stats: CategoryStats,
    pub calibration_error: Option<f64>,
    pub interesting: bool,
    pub violation: bool,
    pub reason: Option<ViolationReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub predictor: String,
    pub parameters: AuditParameters,
    /// Where calibration errors were measured.
    pub source: StatsSource,
    /// Where the γ/ψ interestingness thresholds were evaluated.
    pub interest_source: StatsSource,
    pub empty_policy: EmptyCategoryPolicy,
    pub entries: Vec<AuditEntry>,
    pub verdict: bool,
}

impl AuditReport {
    pub fn violations(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.violation)
    }
}

/// Checks `(α, γ, ψ)`-multicalibration of `h`, one entry per (U, I).
pub fn audit(
    h: &Predictor,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    params: AuditParameters,
    evidence: Evidence<'_>,
    empty_policy: EmptyCategoryPolicy,
) -> Result<AuditReport> {
    check_unit_closed("alpha", params.alpha)?;
    check_unit_open("gamma", params.gamma)?;
    check_unit_open("psi", params.psi)?;
    let table = WeightTable::from_evidence(evidence, h.domain_size());
    Ok(audit_with_tables(
        h,
        groups,
        partition,
        params,
        &table,
        &table,
        empty_policy,
    ))
}

/// Audit on a sample where interestingness is decided by the true
/// distribution `reference` and errors are measured on `sample`.
///
/// This is the only mode in which an interesting category can be empty.
pub fn audit_against_reference(
    h: &Predictor,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    params: AuditParameters,
    reference: &FiniteDistribution,
    sample: &LabeledSample,
    empty_policy: EmptyCategoryPolicy,
) -> Result<AuditReport> {
    check_unit_closed("alpha", params.alpha)?;
    check_unit_open("gamma", params.gamma)?;
    check_unit_open("psi", params.psi)?;
    let interest = WeightTable::from_distribution(reference);
    let measured = WeightTable::from_sample(sample, h.domain_size());
    Ok(audit_with_tables(
        h,
        groups,
        partition,
        params,
        &interest,
        &measured,
        empty_policy,
    ))
}

pub(crate) fn audit_with_tables(
    h: &Predictor,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    params: AuditParameters,
    interest: &WeightTable,
    measured: &WeightTable,
    empty_policy: EmptyCategoryPolicy,
) -> AuditReport {
    let mut entries = Vec::with_capacity(groups.len() * partition.len());
    for (gi, g) in groups.iter().enumerate() {
        for (ii, iv) in partition.intervals().iter().enumerate() {
            let interesting = interest.category_stats(h, g, iv).is_interesting(
                params.gamma,
                params.psi,
                interest.total(),
            );
            let stats = measured.category_stats(h, g, iv);
            let calibration_error = stats.calibration_error();
            let reason = match (interesting, calibration_error) {
                (false, _) => None,
                (true, Some(c)) if c.abs() > params.alpha => Some(ViolationReason::ErrorAboveAlpha),
                (true, Some(_)) => None,
                (true, None) => match empty_policy {
                    EmptyCategoryPolicy::Violation => Some(ViolationReason::NoOccupancy),
                    EmptyCategoryPolicy::Exclude => None,
                },
            };
            entries.push(AuditEntry {
                group: g.name().to_string(),
                interval: *iv,
                category: Category {
                    group: gi,
                    interval: ii,
                },
                stats,
                calibration_error,
                interesting,
                violation: reason.is_some(),
                reason,
            });
        }
    }
    let verdict = !entries.iter().any(|e| e.violation);
    AuditReport {
        predictor: h.name().to_string(),
        parameters: params,
        source: measured.source(),
        interest_source: interest.source(),
        empty_policy,
        entries,
        verdict,
    }
}

/// Audits every member of `class`, in class order.
pub fn audit_class(
    class: &PredictorClass,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    params: AuditParameters,
    evidence: Evidence<'_>,
    empty_policy: EmptyCategoryPolicy,
) -> Result<Vec<AuditReport>> {
    check_unit_closed("alpha", params.alpha)?;
    check_unit_open("gamma", params.gamma)?;
    check_unit_open("psi", params.psi)?;
    let table = WeightTable::from_evidence(evidence, class.domain_size());
    Ok(class
        .iter()
        .map(|h| audit_with_tables(h, groups, partition, params, &table, &table, empty_policy))
        .collect())
}
