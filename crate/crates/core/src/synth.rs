//! Seeded random instances for experiments, benchmarks, and tests.

use rand::RngExt;

use crate::dims::BinaryHypothesis;
use crate::error::Result;
use crate::model::{
    DomainPoint, FiniteDistribution, Group, PredictionSpace, Predictor, PredictorClass,
    SubpopulationCollection,
};
use crate::rng::{rng_from_seed, SeededRng};

/// Shape of a random finite setup.
#[derive(Clone, Debug, PartialEq)]
pub struct SetupShape {
    pub domain_size: usize,
    pub predictors: usize,
    pub groups: usize,
    /// Finite prediction values, strictly increasing.
    pub values: Vec<f64>,
}

/// A distribution, finite predictor class, and subpopulation collection over
/// a common finite domain.
#[derive(Clone, Debug)]
pub struct RandomSetup {
    pub space: PredictionSpace,
    pub distribution: FiniteDistribution,
    pub class: PredictorClass,
    pub groups: SubpopulationCollection,
}

/// Point masses uniform on [0.5, 1.5) before normalization; each point's
/// label-1 probability uniform on [0, 1); predictions uniform over the
/// values; each point joins each group with probability 1/2.
pub fn random_setup(shape: &SetupShape, seed: u64) -> Result<RandomSetup> {
    let mut rng = rng_from_seed(seed);
    let space = PredictionSpace::finite(shape.values.clone())?;
    let n = shape.domain_size;
    let mut weights = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mass = rng.random_range(0.5..1.5);
        let q: f64 = rng.random();
        weights.push((DomainPoint::from(i), 0u8, mass * (1.0 - q)));
        weights.push((DomainPoint::from(i), 1u8, mass * q));
    }
    let distribution = FiniteDistribution::from_weights(n, weights)?;
    let class = random_class_with(&mut rng, n, &shape.values, shape.predictors, &space)?;
    let groups = (0..shape.groups)
        .map(|g| {
            let mut members: Vec<DomainPoint> = (0..n)
                .filter(|_| rng.random_bool(0.5))
                .map(DomainPoint::from)
                .collect();
            if members.is_empty() {
                members.push(DomainPoint::from(rng.random_range(0..n)));
            }
            Group::new(format!("g{g}"), members, n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomSetup {
        space,
        distribution,
        class,
        groups: SubpopulationCollection::new(groups)?,
    })
}

fn random_class_with(
    rng: &mut SeededRng,
    domain_size: usize,
    values: &[f64],
    size: usize,
    space: &PredictionSpace,
) -> Result<PredictorClass> {
    let members = (0..size)
        .map(|i| {
            let table = (0..domain_size)
                .map(|_| values[rng.random_range(0..values.len())])
                .collect();
            Predictor::new(format!("h{i}"), table, space)
        })
        .collect::<Result<Vec<_>>>()?;
    PredictorClass::new(members)
}

/// `size` predictors with i.i.d. uniform predictions over `values`.
pub fn random_class(
    domain_size: usize,
    values: &[f64],
    size: usize,
    seed: u64,
) -> Result<PredictorClass> {
    let space = PredictionSpace::finite(values.to_vec())?;
    random_class_with(&mut rng_from_seed(seed), domain_size, values, size, &space)
}

/// `size` binary hypotheses, each table entry 1 with probability `density`.
pub fn random_binary_class(
    domain_size: usize,
    size: usize,
    density: f64,
    seed: u64,
) -> Vec<BinaryHypothesis> {
    let mut rng = rng_from_seed(seed);
    (0..size)
        .map(|_| {
            BinaryHypothesis::raw((0..domain_size).map(|_| rng.random_bool(density)).collect())
        })
        .collect()
}

/// `(point, label, weight)`.
pub type WeightedEntry = (DomainPoint, u8, u64);

/// A distribution whose probabilities are integer weights over their total,
/// returned with the weights so that a sample matching it exactly can be
/// built by repetition.
pub fn random_rational_distribution(
    domain_size: usize,
    max_weight: u64,
    seed: u64,
) -> Result<(FiniteDistribution, Vec<WeightedEntry>)> {
    let mut rng = rng_from_seed(seed);
    let mut weights: Vec<WeightedEntry> = (0..domain_size)
        .flat_map(|i| [(DomainPoint::from(i), 0u8), (DomainPoint::from(i), 1u8)])
        .map(|(x, y)| (x, y, rng.random_range(0..=max_weight)))
        .collect();
    if weights.iter().all(|w| w.2 == 0) {
        weights[0].2 = 1;
    }
    let d = FiniteDistribution::from_integer_weights(domain_size, weights.iter().copied())?;
    Ok((d, weights))
}
