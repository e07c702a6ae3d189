//! Domain, prediction space, predictors, subpopulations, and finite-support
//! distributions over labeled points.
//!
//! The domain is always finite: a [`DomainPoint`] is a dense index into it,
//! and every table in this module is indexed by that position.

use std::collections::HashSet;
use std::fmt;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Tolerance on the total mass of a [`FiniteDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainPoint(pub u32);

impl DomainPoint {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for DomainPoint {
    fn from(i: usize) -> Self {
        DomainPoint(i as u32)
    }
}

impl fmt::Display for DomainPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// The range of the predictors: either a finite value set or `[0, 1]`
/// discretized into cells of width `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionSpace {
    Finite { values: Vec<f64> },
    Continuous { lambda: f64 },
}

impl PredictionSpace {
    pub fn finite(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidModel(
                "finite prediction space is empty".into(),
            ));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidModel(format!(
                    "prediction value {v} outside [0, 1]"
                )));
            }
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "finite prediction values must be strictly increasing".into(),
            ));
        }
        Ok(PredictionSpace::Finite { values })
    }

    pub fn continuous(lambda: f64) -> Result<Self> {
        grid_cells(lambda)?;
        Ok(PredictionSpace::Continuous { lambda })
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            PredictionSpace::Finite { values } => {
                values.binary_search_by(|p| p.total_cmp(&v)).is_ok()
            }
            PredictionSpace::Continuous { .. } => (0.0..=1.0).contains(&v),
        }
    }

    /// Number of cells of the induced partition.
    pub fn cells(&self) -> usize {
        match self {
            PredictionSpace::Finite { values } => values.len(),
            PredictionSpace::Continuous { lambda } => grid_cells(*lambda).expect("validated"),
        }
    }

    /// Width parameter used by the finite-class bound: `lambda` itself for a
    /// continuous space, `1/|Y|` for a finite one.
    pub fn effective_lambda(&self) -> f64 {
        match self {
            PredictionSpace::Finite { values } => 1.0 / values.len() as f64,
            PredictionSpace::Continuous { lambda } => *lambda,
        }
    }

    pub fn partition(&self) -> IntervalPartition {
        partition_of(self)
    }
}

fn grid_cells(lambda: f64) -> Result<usize> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must lie in (0, 1]",
        });
    }
    let k = (1.0 / lambda).round();
    if (k * lambda - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "1/lambda must be a positive integer",
        });
    }
    Ok(k as usize)
}

/// `[lo, hi)`, or `[lo, hi]` when `closed_hi`. A singleton has `lo == hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub closed_hi: bool,
}

impl Interval {
    pub fn singleton(v: f64) -> Self {
        Interval {
            lo: v,
            hi: v,
            closed_hi: true,
        }
    }

    pub fn half_open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            closed_hi: false,
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            closed_hi: true,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        if self.closed_hi {
            self.lo <= v && v <= self.hi
        } else {
            self.lo <= v && v < self.hi
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_singleton() {
            write!(f, "{{{}}}", self.lo)
        } else if self.closed_hi {
            write!(f, "[{}, {}]", self.lo, self.hi)
        } else {
            write!(f, "[{}, {})", self.lo, self.hi)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    intervals: Vec<Interval>,
    /// Grid width when built from a continuous space.
    lambda: Option<f64>,
}

impl IntervalPartition {
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn get(&self, i: usize) -> &Interval {
        &self.intervals[i]
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Position of the unique interval containing `v`.
    pub fn index_of(&self, v: f64) -> Result<usize> {
        // Intervals are sorted by `lo`; the candidate is the last one starting at or below v.
        let after = self.intervals.partition_point(|iv| iv.lo <= v);
        if after == 0 {
            return Err(Error::ValueNotCovered(v));
        }
        if self.intervals[after - 1].contains(v) {
            Ok(after - 1)
        } else {
            Err(Error::ValueNotCovered(v))
        }
    }

    pub fn interval_of(&self, v: f64) -> Result<Interval> {
        self.index_of(v).map(|i| self.intervals[i])
    }
}

/// Singletons for a finite space; `1/lambda` half-open cells for a
/// continuous one, the last closed at 1.
pub fn partition_of(space: &PredictionSpace) -> IntervalPartition {
    match space {
        PredictionSpace::Finite { values } => IntervalPartition {
            intervals: values.iter().map(|&v| Interval::singleton(v)).collect(),
            lambda: None,
        },
        PredictionSpace::Continuous { lambda } => {
            let k = grid_cells(*lambda).expect("validated");
            // Boundaries as j/k rather than j*lambda so that e.g. 0.3 starts a cell when lambda = 0.1.
            let edge = |j: usize| j as f64 / k as f64;
            let intervals = (0..k)
                .map(|j| {
                    if j + 1 == k {
                        Interval::closed(edge(j), 1.0)
                    } else {
                        Interval::half_open(edge(j), edge(j + 1))
                    }
                })
                .collect();
            IntervalPartition {
                intervals,
                lambda: Some(*lambda),
            }
        }
    }
}

pub fn interval_of(partition: &IntervalPartition, v: f64) -> Result<Interval> {
    partition.interval_of(v)
}

/// A predictor given by its full table of predictions over the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    name: String,
    table: Vec<f64>,
}

impl Predictor {
    pub fn new(name: impl Into<String>, table: Vec<f64>, space: &PredictionSpace) -> Result<Self> {
        let name = name.into();
        if let Some(&bad) = table.iter().find(|&&v| !space.contains(v)) {
            return Err(Error::InvalidModel(format!(
                "predictor `{name}` outputs {bad}, outside the prediction space"
            )));
        }
        Ok(Predictor { name, table })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn predict(&self, x: DomainPoint) -> f64 {
        self.table[x.index()]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn domain_size(&self) -> usize {
        self.table.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorClass {
    members: Vec<Predictor>,
}

impl PredictorClass {
    pub fn new(members: Vec<Predictor>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidModel("predictor class is empty".into()))?;
        let n = first.domain_size();
        let mut names = HashSet::new();
        for h in &members {
            if !names.insert(h.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate predictor name `{}`",
                    h.name
                )));
            }
            if h.domain_size() != n {
                return Err(Error::InvalidModel(format!(
                    "predictor `{}` covers {} points, expected {n}",
                    h.name,
                    h.domain_size()
                )));
            }
        }
        Ok(PredictorClass { members })
    }

    pub fn members(&self) -> &[Predictor] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Predictor> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn domain_size(&self) -> usize {
        self.members[0].domain_size()
    }
}

/// A named subpopulation, stored as a membership indicator over the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    name: String,
    membership: Vec<bool>,
}

impl Group {
    pub fn new(
        name: impl Into<String>,
        members: impl IntoIterator<Item = DomainPoint>,
        domain_size: usize,
    ) -> Result<Self> {
        let name = name.into();
        let mut membership = vec![false; domain_size];
        for x in members {
            let slot = membership.get_mut(x.index()).ok_or_else(|| {
                Error::InvalidModel(format!("group `{name}` contains {x}, outside the domain"))
            })?;
            *slot = true;
        }
        if !membership.iter().any(|&b| b) {
            return Err(Error::InvalidModel(format!("group `{name}` is empty")));
        }
        Ok(Group { name, membership })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn contains(&self, x: DomainPoint) -> bool {
        self.membership[x.index()]
    }

    pub fn members(&self) -> impl Iterator<Item = DomainPoint> + '_ {
        self.membership
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| DomainPoint::from(i))
    }

    pub fn size(&self) -> usize {
        self.membership.iter().filter(|&&b| b).count()
    }

    pub fn domain_size(&self) -> usize {
        self.membership.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubpopulationCollection {
    groups: Vec<Group>,
}

impl SubpopulationCollection {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        let mut names = HashSet::new();
        for g in &groups {
            if !names.insert(g.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate group name `{}`",
                    g.name
                )));
            }
        }
        if let Some(g) = groups.first() {
            let n = g.domain_size();
            if groups.iter().any(|g| g.domain_size() != n) {
                return Err(Error::InvalidModel(
                    "groups disagree on the domain size".into(),
                ));
            }
        }
        Ok(SubpopulationCollection { groups })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Group> {
        self.groups.iter()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub point: DomainPoint,
    pub label: u8,
    pub prob: f64,
}

/// Exact probability table over `(point, label)` pairs.
///
/// A distribution built from integer weights keeps them, so that threshold
/// comparisons on it can be done on integers rather than rounded sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionData", into = "DistributionData")]
pub struct FiniteDistribution {
    domain_size: usize,
    support: Vec<SupportEntry>,
    weights: Option<Vec<u64>>,
    cumulative: Vec<f64>,
    last_positive: usize,
}

#[derive(Serialize, Deserialize)]
struct DistributionData {
    domain_size: usize,
    support: Vec<SupportEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<u64>>,
}

impl TryFrom<DistributionData> for FiniteDistribution {
    type Error = Error;

    fn try_from(data: DistributionData) -> Result<Self> {
        match data.weights {
            Some(w) => {
                if w.len() != data.support.len() {
                    return Err(Error::InvalidModel(
                        "weights and support differ in length".into(),
                    ));
                }
                Self::from_integer_weights(
                    data.domain_size,
                    data.support
                        .iter()
                        .zip(w)
                        .map(|(e, w)| (e.point, e.label, w)),
                )
            }
            None => Self::new(data.domain_size, data.support),
        }
    }
}

impl From<FiniteDistribution> for DistributionData {
    fn from(d: FiniteDistribution) -> Self {
        DistributionData {
            domain_size: d.domain_size,
            support: d.support,
            weights: d.weights,
        }
    }
}

/// Largest total weight for which every partial sum is exact in `f64`.
pub const MAX_INTEGER_WEIGHT_TOTAL: u64 = 1 << 53;

impl FiniteDistribution {
    pub fn new(domain_size: usize, support: Vec<SupportEntry>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidModel("distribution has empty support".into()));
        }
        let mut seen = HashSet::new();
        for e in &support {
            if e.point.index() >= domain_size {
                return Err(Error::InvalidModel(format!(
                    "{} lies outside the domain",
                    e.point
                )));
            }
            if e.label > 1 {
                return Err(Error::InvalidModel(format!("label {} is not 0/1", e.label)));
            }
            if !(e.prob >= 0.0 && e.prob.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "probability {} of ({}, {}) is invalid",
                    e.prob, e.point, e.label
                )));
            }
            if !seen.insert((e.point, e.label)) {
                return Err(Error::InvalidModel(format!(
                    "pair ({}, {}) listed twice",
                    e.point, e.label
                )));
            }
        }
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for e in &support {
            acc += e.prob;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {acc}, not 1"
            )));
        }
        let last_positive = support
            .iter()
            .rposition(|e| e.prob > 0.0)
            .ok_or_else(|| Error::InvalidModel("distribution has no positive mass".into()))?;
        Ok(FiniteDistribution {
            domain_size,
            support,
            weights: None,
            cumulative,
            last_positive,
        })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(
        domain_size: usize,
        weights: impl IntoIterator<Item = (DomainPoint, u8, f64)>,
    ) -> Result<Self> {
        let raw: Vec<_> = weights.into_iter().collect();
        let total: f64 = raw.iter().map(|&(_, _, w)| w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidModel(
                "weights must have positive finite total".into(),
            ));
        }
        let support = raw
            .into_iter()
            .map(|(point, label, w)| SupportEntry {
                point,
                label,
                prob: w / total,
            })
            .collect();
        Self::new(domain_size, support)
    }

    /// Probabilities `w / Σw` from integer weights, which are retained.
    pub fn from_integer_weights(
        domain_size: usize,
        weights: impl IntoIterator<Item = (DomainPoint, u8, u64)>,
    ) -> Result<Self> {
        let raw: Vec<_> = weights.into_iter().collect();
        let total = raw
            .iter()
            .try_fold(0u64, |acc, &(_, _, w)| acc.checked_add(w));
        let total = match total {
            Some(t) if t > 0 && t <= MAX_INTEGER_WEIGHT_TOTAL => t,
            _ => {
                return Err(Error::InvalidModel(
                    "integer weights must total between 1 and 2^53".into(),
                ))
            }
        };
        let support = raw
            .iter()
            .map(|&(point, label, w)| SupportEntry {
                point,
                label,
                prob: w as f64 / total as f64,
            })
            .collect();
        let mut d = Self::new(domain_size, support)?;
        d.weights = Some(raw.into_iter().map(|(_, _, w)| w).collect());
        Ok(d)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Integer weights aligned with [`support`](Self::support), if the
    /// distribution was built from them.
    pub fn integer_weights(&self) -> Option<&[u64]> {
        self.weights.as_deref()
    }

    pub fn support(&self) -> &[SupportEntry] {
        &self.support
    }

    /// Probability of an event over `(point, label)`.
    pub fn probability(&self, mut event: impl FnMut(DomainPoint, u8) -> bool) -> f64 {
        self.support
            .iter()
            .filter(|e| event(e.point, e.label))
            .map(|e| e.prob)
            .sum()
    }

    pub fn group_mass(&self, group: &Group) -> f64 {
        self.probability(|x, _| group.contains(x))
    }

    /// The distribution conditioned on `x ∈ group`.
    pub fn conditional_on(&self, group: &Group) -> Result<FiniteDistribution> {
        let mass = self.group_mass(group);
        if mass <= 0.0 {
            return Err(Error::EmptySubpopulation(group.name().to_string()));
        }
        if let Some(w) = &self.weights {
            let kept = self
                .support
                .iter()
                .zip(w)
                .filter(|(e, _)| group.contains(e.point));
            return Self::from_integer_weights(
                self.domain_size,
                kept.map(|(e, &w)| (e.point, e.label, w)),
            );
        }
        let support = self
            .support
            .iter()
            .filter(|e| group.contains(e.point))
            .map(|e| SupportEntry {
                prob: e.prob / mass,
                ..*e
            })
            .collect();
        Self::new(self.domain_size, support)
    }

    #[inline]
    fn draw_index(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }

    /// `m` i.i.d. draws, determined by `seed`.
    pub fn draw_sample(&self, m: usize, seed: u64) -> LabeledSample {
        let mut rng = rng_from_seed(seed);
        let items = (0..m)
            .map(|_| {
                let e = &self.support[self.draw_index(rng.random::<f64>())];
                (e.point, e.label)
            })
            .collect();
        LabeledSample { items }
    }

    /// Occurrence count of each support entry in `draw_sample(m, seed)`,
    /// without materializing the sample.
    pub fn draw_counts(&self, m: usize, seed: u64) -> Vec<u64> {
        let mut rng = rng_from_seed(seed);
        let mut counts = vec![0u64; self.support.len()];
        for _ in 0..m {
            counts[self.draw_index(rng.random::<f64>())] += 1;
        }
        counts
    }
}

pub fn draw_sample(distribution: &FiniteDistribution, m: usize, seed: u64) -> LabeledSample {
    distribution.draw_sample(m, seed)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    items: Vec<(DomainPoint, u8)>,
}

impl LabeledSample {
    pub fn new(items: Vec<(DomainPoint, u8)>) -> Result<Self> {
        if let Some(&(x, y)) = items.iter().find(|&&(_, y)| y > 1) {
            return Err(Error::InvalidModel(format!("label {y} of {x} is not 0/1")));
        }
        Ok(LabeledSample { items })
    }

    /// Each `(point, label)` repeated `count` times, in the given order.
    pub fn from_multiplicities(
        counts: impl IntoIterator<Item = (DomainPoint, u8, u64)>,
    ) -> Result<Self> {
        let items = counts
            .into_iter()
            .flat_map(|(x, y, c)| std::iter::repeat_n((x, y), c as usize))
            .collect();
        Self::new(items)
    }

    pub fn items(&self) -> &[(DomainPoint, u8)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
