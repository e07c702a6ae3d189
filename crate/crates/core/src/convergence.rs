//! Monte Carlo checks of multicalibration uniform convergence.
//!
//! A deviation trial draws `S ~ D^m` and measures, over every predictor and
//! every category interesting under the true `D`, the largest gap between
//! empirical and true calibration error. An interesting category with no
//! sample in it counts as an infinite gap.
//!
//! Trials are independent. Trial `i` of a run uses
//! [`trial_seed(master_seed, i)`](crate::rng::trial_seed), so results do not
//! depend on how rayon schedules them.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_closed, check_unit_open, Error, Result};
use crate::metrics::{interesting_in_table, true_calibration_error, Category, WeightTable};
use crate::model::{
    DomainPoint, FiniteDistribution, Group, Interval, IntervalPartition, LabeledSample,
    PredictionSpace, Predictor, PredictorClass, SubpopulationCollection, SupportEntry,
};
use crate::rng::{rng_from_seed, trial_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRef {
    pub predictor: String,
    pub group: String,
    pub interval: Interval,
}

/// Result of one deviation trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Largest |ĉ − c| over interesting categories; `INFINITY` when one is empty.
    pub sup_deviation: f64,
    pub worst_category: Option<CategoryRef>,
    pub empty_interesting_count: usize,
    /// Smallest occupancy among interesting categories.
    pub min_occupancy: Option<u64>,
    pub m: usize,
    pub seed: u64,
}

struct TrackedCategory {
    category: Category,
    true_error: f64,
}

struct PredictorPlan {
    /// Partition cell of each domain point's prediction.
    cells: Vec<usize>,
    predictions: Vec<f64>,
    tracked: Vec<TrackedCategory>,
}

/// Precomputed truth for repeated deviation trials on one setup.
pub struct ConvergenceExperiment<'a> {
    distribution: &'a FiniteDistribution,
    class: &'a PredictorClass,
    groups: &'a SubpopulationCollection,
    partition: &'a IntervalPartition,
    plans: Vec<PredictorPlan>,
}

impl<'a> ConvergenceExperiment<'a> {
    pub fn new(
        distribution: &'a FiniteDistribution,
        class: &'a PredictorClass,
        groups: &'a SubpopulationCollection,
        partition: &'a IntervalPartition,
        gamma: f64,
        psi: f64,
    ) -> Result<Self> {
        check_unit_open("gamma", gamma)?;
        check_unit_open("psi", psi)?;
        if class.domain_size() != distribution.domain_size() {
            return Err(Error::InvalidModel(
                "predictor class and distribution disagree on the domain".into(),
            ));
        }
        let truth = WeightTable::from_distribution(distribution);
        let plans = class
            .iter()
            .map(|h| {
                let cells = h
                    .table()
                    .iter()
                    .map(|&v| partition.index_of(v))
                    .collect::<Result<Vec<_>>>()?;
                let tracked = interesting_in_table(h, groups, partition, gamma, psi, &truth)
                    .into_iter()
                    .map(|category| {
                        let g = &groups.groups()[category.group];
                        let iv = partition.get(category.interval);
                        let true_error = true_calibration_error(h, g, iv, distribution)
                            .expect("interesting categories have positive mass");
                        TrackedCategory {
                            category,
                            true_error,
                        }
                    })
                    .collect();
                Ok(PredictorPlan {
                    cells,
                    predictions: h.table().to_vec(),
                    tracked,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvergenceExperiment {
            distribution,
            class,
            groups,
            partition,
            plans,
        })
    }

    /// Number of (predictor, category) pairs compared in each trial.
    pub fn tracked_categories(&self) -> usize {
        self.plans.iter().map(|p| p.tracked.len()).sum()
    }

    /// One trial on `S ~ D^m` drawn with `seed`.
    pub fn trial(&self, m: usize, seed: u64) -> TrialOutcome {
        let counts = self.distribution.draw_counts(m, seed);
        let mut per_point = vec![[0u64; 2]; self.distribution.domain_size()];
        for (e, c) in self.distribution.support().iter().zip(counts) {
            per_point[e.point.index()][e.label as usize] += c;
        }
        self.evaluate(&per_point, m, seed)
    }

    /// One trial on a given sample (reported with seed 0).
    pub fn trial_on_sample(&self, sample: &LabeledSample) -> TrialOutcome {
        let mut per_point = vec![[0u64; 2]; self.distribution.domain_size()];
        for &(x, y) in sample.items() {
            per_point[x.index()][y as usize] += 1;
        }
        self.evaluate(&per_point, sample.len(), 0)
    }

    fn evaluate(&self, per_point: &[[u64; 2]], m: usize, seed: u64) -> TrialOutcome {
        let mut sup = 0.0f64;
        let mut worst = None;
        let mut empty = 0usize;
        let mut min_occupancy: Option<u64> = None;
        for (hi, plan) in self.plans.iter().enumerate() {
            for t in &plan.tracked {
                let group = &self.groups.groups()[t.category.group];
                let (mut n, mut positives, mut predictions) = (0u64, 0u64, 0.0f64);
                for (i, c) in per_point.iter().enumerate() {
                    if plan.cells[i] == t.category.interval && group.contains(DomainPoint::from(i))
                    {
                        let k = c[0] + c[1];
                        n += k;
                        positives += c[1];
                        predictions += k as f64 * plan.predictions[i];
                    }
                }
                min_occupancy = Some(min_occupancy.map_or(n, |o| o.min(n)));
                let deviation = if n == 0 {
                    empty += 1;
                    f64::INFINITY
                } else {
                    let nf = n as f64;
                    (positives as f64 / nf - predictions / nf - t.true_error).abs()
                };
                if deviation > sup || (worst.is_none() && deviation >= sup) {
                    sup = deviation;
                    worst = Some((hi, t.category));
                }
            }
        }
        TrialOutcome {
            sup_deviation: sup,
            worst_category: worst.map(|(hi, c)| CategoryRef {
                predictor: self.class.members()[hi].name().to_string(),
                group: self.groups.groups()[c.group].name().to_string(),
                interval: *self.partition.get(c.interval),
            }),
            empty_interesting_count: empty,
            min_occupancy,
            m,
            seed,
        }
    }

    /// `trials` independent trials, in trial order.
    pub fn run_trials(&self, m: usize, trials: usize, master_seed: u64) -> Vec<TrialOutcome> {
        (0..trials)
            .into_par_iter()
            .map(|i| self.trial(m, trial_seed(master_seed, i as u64)))
            .collect()
    }

    /// Fraction of trials whose supremum deviation exceeds `epsilon`.
    pub fn failure_rate(&self, m: usize, epsilon: f64, trials: usize, master_seed: u64) -> f64 {
        let outcomes = self.run_trials(m, trials, master_seed);
        failure_fraction(&outcomes, epsilon)
    }
}

pub fn failure_fraction(outcomes: &[TrialOutcome], epsilon: f64) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes
        .iter()
        .filter(|o| o.sup_deviation > epsilon)
        .count() as f64
        / outcomes.len() as f64
}

#[allow(clippy::too_many_arguments)]
pub fn deviation_trial(
    distribution: &FiniteDistribution,
    class: &PredictorClass,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    gamma: f64,
    psi: f64,
    m: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    Ok(
        ConvergenceExperiment::new(distribution, class, groups, partition, gamma, psi)?
            .trial(m, seed),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn failure_rate(
    distribution: &FiniteDistribution,
    class: &PredictorClass,
    groups: &SubpopulationCollection,
    partition: &IntervalPartition,
    gamma: f64,
    psi: f64,
    m: usize,
    epsilon: f64,
    trials: usize,
    master_seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let exp = ConvergenceExperiment::new(distribution, class, groups, partition, gamma, psi)?;
    Ok(exp.failure_rate(m, epsilon, trials, master_seed))
}

/// Two distributions that a single predictor separates only through one
/// category of mass `γψ`, where the label rate is `1/2 ± ε`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowerBoundFixture {
    pub d1: FiniteDistribution,
    pub d2: FiniteDistribution,
    pub space: PredictionSpace,
    pub class: PredictorClass,
    pub groups: SubpopulationCollection,
    pub epsilon: f64,
    pub gamma: f64,
    pub psi: f64,
}

pub const X0: DomainPoint = DomainPoint(0);
pub const X1: DomainPoint = DomainPoint(1);
pub const X2: DomainPoint = DomainPoint(2);

impl LowerBoundFixture {
    pub fn predictor(&self) -> &Predictor {
        &self.class.members()[0]
    }

    /// `U = {x⁰, x¹}`.
    pub fn u(&self) -> &Group {
        &self.groups.groups()[0]
    }

    /// `{1/2 + ε}`.
    pub fn high_interval(&self) -> Interval {
        Interval::singleton(0.5 + self.epsilon)
    }
}

/// Masses under D₁: `(x⁰,1) ↦ (1/2+ε)ψγ`, `(x⁰,0) ↦ (1/2−ε)ψγ`,
/// `(x¹,0) ↦ (1−ψ)γ`, `(x²,0) ↦ 1−γ`; D₂ swaps the labels at x⁰.
/// Zero-mass entries are left out of the support.
pub fn build_lower_bound_fixture(epsilon: f64, gamma: f64, psi: f64) -> Result<LowerBoundFixture> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must lie in (0, 1/2)",
        });
    }
    check_unit_open("gamma", gamma)?;
    check_unit_open("psi", psi)?;
    // The x⁰ masses are split as `high` and `s − high` (exact, as high ∈ [s/2, s])
    // so that they add back to exactly `s`. Rounding can leave `s + (γ − s)`
    // a hair off γ, so nudge `s` and the x¹ mass up by ulps until U has mass
    // at least γ and the category at least ψ of it, as computed in floats.
    let (s, x1_mass) = boundary_masses(gamma, psi);
    let high = (0.5 + epsilon) * s;
    let low = s - high;
    let x2_mass = 1.0 - gamma;
    let build = |high_label: u8| {
        let entries = [
            (X0, high_label, high),
            (X0, 1 - high_label, low),
            (X1, 0, x1_mass),
            (X2, 0, x2_mass),
        ];
        let mut support: Vec<SupportEntry> = entries
            .into_iter()
            .filter(|e| e.2 > 0.0)
            .map(|(point, label, prob)| SupportEntry { point, label, prob })
            .collect();
        support.sort_by_key(|e| (e.point, std::cmp::Reverse(e.label)));
        FiniteDistribution::new(3, support)
    };
    let d1 = build(1)?;
    let d2 = build(0)?;
    let space = PredictionSpace::finite(vec![0.0, 0.5 + epsilon])?;
    let h = Predictor::new("h", vec![0.5 + epsilon, 0.0, 0.0], &space)?;
    let class = PredictorClass::new(vec![h])?;
    let groups = SubpopulationCollection::new(vec![
        Group::new("U", [X0, X1], 3)?,
        Group::new("x2", [X2], 3)?,
    ])?;
    Ok(LowerBoundFixture {
        d1,
        d2,
        space,
        class,
        groups,
        epsilon,
        gamma,
        psi,
    })
}

fn boundary_masses(gamma: f64, psi: f64) -> (f64, f64) {
    let mut s = psi * gamma;
    let mut x1 = gamma - s;
    for _ in 0..64 {
        let g = s + x1;
        if g < gamma {
            x1 = x1.next_up();
        } else if s < psi * g {
            s = s.next_up();
        } else {
            break;
        }
    }
    (s, x1.max(0.0))
}

/// Accuracy of telling D₁ from D₂ by whether the empirical label rate on
/// `(U, {1/2+ε})` exceeds 1/2. Nature picks each trial's distribution by a
/// fair coin; ties and empty categories are decided by another fair coin.
/// `m = 0` is allowed and yields pure guessing.
pub fn distinguishing_experiment(
    fixture: &LowerBoundFixture,
    m: usize,
    trials: usize,
    master_seed: u64,
) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let x0_entries = |d: &FiniteDistribution| -> Vec<(usize, u8)> {
        d.support()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.point == X0)
            .map(|(i, e)| (i, e.label))
            .collect()
    };
    let (idx1, idx2) = (x0_entries(&fixture.d1), x0_entries(&fixture.d2));
    let correct: usize = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(trial_seed(master_seed, i as u64));
            let is_d1 = rng.random_bool(0.5);
            let sample_seed: u64 = rng.random();
            let (d, idx) = if is_d1 {
                (&fixture.d1, &idx1)
            } else {
                (&fixture.d2, &idx2)
            };
            let counts = d.draw_counts(m, sample_seed);
            let (mut n, mut positives) = (0u64, 0u64);
            for &(j, label) in idx {
                n += counts[j];
                if label == 1 {
                    positives += counts[j];
                }
            }
            let says_d1 = if n == 0 || 2 * positives == n {
                rng.random_bool(0.5)
            } else {
                2 * positives > n
            };
            usize::from(says_d1 == is_d1)
        })
        .sum();
    correct as f64 / trials as f64
}

/// Outcome of checking the numerator/denominator approximation premise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionCheck {
    pub premises_met: bool,
    /// `|p1/p2 − p̃1/p̃2|` when the premises hold.
    pub difference: Option<f64>,
    pub holds: bool,
}

/// Slack on the conclusion for floating-point rounding; the bound is tight
/// at `ε = 1`.
const FRACTION_ROUNDING: f64 = 8.0 * f64::EPSILON;

/// If `p1 ≤ p2`, `ψ ≤ p2`, and both approximations are within `ψε/3`, then
/// `|p1/p2 − p̃1/p̃2| ≤ ε`. Unmet premises give a vacuous pass.
pub fn fraction_error_check(
    p1: f64,
    p2: f64,
    p1_approx: f64,
    p2_approx: f64,
    psi: f64,
    epsilon: f64,
) -> Result<FractionCheck> {
    for (name, v) in [
        ("p1", p1),
        ("p2", p2),
        ("p1_approx", p1_approx),
        ("p2_approx", p2_approx),
        ("psi", psi),
        ("epsilon", epsilon),
    ] {
        check_unit_closed(name, v)?;
    }
    let xi = psi * epsilon / 3.0;
    let premises_met = p1 <= p2
        && psi <= p2
        && (p1 - p1_approx).abs() <= xi
        && (p2 - p2_approx).abs() <= xi
        && p2 > 0.0
        && p2_approx > 0.0;
    if !premises_met {
        return Ok(FractionCheck {
            premises_met,
            difference: None,
            holds: true,
        });
    }
    let difference = (p1 / p2 - p1_approx / p2_approx).abs();
    Ok(FractionCheck {
        premises_met,
        difference: Some(difference),
        holds: difference <= epsilon + FRACTION_ROUNDING,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumeratorDenominatorReport {
    pub m: usize,
    pub trials: usize,
    pub epsilon: f64,
    /// Fraction of trials in which some predictor's numerator or
    /// denominator frequency is off by more than `epsilon`.
    pub failure_fraction: f64,
    pub max_denominator_deviation: f64,
    pub max_numerator_deviation: f64,
}

/// Samples from `D` conditioned on `U` and compares, for every predictor,
/// the empirical frequencies of `h(x) = v` and `h(x) = v ∧ y = 1` with their
/// conditional probabilities.
#[allow(clippy::too_many_arguments)]
pub fn numerator_denominator_check(
    class: &PredictorClass,
    group: &Group,
    v: f64,
    distribution: &FiniteDistribution,
    m: usize,
    epsilon: f64,
    trials: usize,
    master_seed: u64,
) -> Result<NumeratorDenominatorReport> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let conditional = distribution.conditional_on(group)?;
    let support = conditional.support();
    // For each predictor: per support entry, (h(x) = v, h(x) = v and y = 1).
    let indicators: Vec<Vec<(bool, bool)>> = class
        .iter()
        .map(|h| {
            support
                .iter()
                .map(|e| {
                    let hit = h.predict(e.point) == v;
                    (hit, hit && e.label == 1)
                })
                .collect()
        })
        .collect();
    let truth: Vec<(f64, f64)> = indicators
        .iter()
        .map(|ind| {
            ind.iter()
                .zip(support)
                .fold((0.0, 0.0), |(den, num), (&(a, b), e)| {
                    (
                        den + if a { e.prob } else { 0.0 },
                        num + if b { e.prob } else { 0.0 },
                    )
                })
        })
        .collect();
    let per_trial: Vec<(bool, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let counts = conditional.draw_counts(m, trial_seed(master_seed, i as u64));
            let mut worst_den = 0.0f64;
            let mut worst_num = 0.0f64;
            for (ind, &(den, num)) in indicators.iter().zip(&truth) {
                let (mut cd, mut cn) = (0u64, 0u64);
                for (&(a, b), &c) in ind.iter().zip(&counts) {
                    if a {
                        cd += c;
                    }
                    if b {
                        cn += c;
                    }
                }
                worst_den = worst_den.max((cd as f64 / m as f64 - den).abs());
                worst_num = worst_num.max((cn as f64 / m as f64 - num).abs());
            }
            (
                worst_den > epsilon || worst_num > epsilon,
                worst_den,
                worst_num,
            )
        })
        .collect();
    let failures = per_trial.iter().filter(|t| t.0).count();
    Ok(NumeratorDenominatorReport {
        m,
        trials,
        epsilon,
        failure_fraction: if trials == 0 {
            0.0
        } else {
            failures as f64 / trials as f64
        },
        max_denominator_deviation: per_trial.iter().map(|t| t.1).fold(0.0, f64::max),
        max_numerator_deviation: per_trial.iter().map(|t| t.2).fold(0.0, f64::max),
    })
}
