//! Property tests for the calibration metrics, the dimension searches, and
//! sampling.

use multical::dims::{
    binarize, binarize_class, check_lemma_graph, check_lemma_phi, graph_dimension, vc_dimension,
};
use multical::metrics::{audit, interesting_categories, true_calibration_error, AuditParameters};
use multical::synth::{random_binary_class, random_class, random_setup, RandomSetup, SetupShape};
use multical::{
    BinaryHypothesis, DimensionLimits, DomainPoint, EmptyCategoryPolicy, Evidence,
    FiniteDistribution, Predictor, PredictorClass, SubpopulationCollection, SupportEntry,
};
use proptest::prelude::*;

const VALUES: [f64; 4] = [0.0, 0.25, 0.6, 1.0];

fn setup(seed: u64) -> RandomSetup {
    let shape = SetupShape {
        domain_size: 12,
        predictors: 4,
        groups: 3,
        values: VALUES.to_vec(),
    };
    random_setup(&shape, seed).unwrap()
}

fn points(n: usize) -> Vec<DomainPoint> {
    (0..n as u32).map(DomainPoint).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn errors_in_range_and_singleton_rewrite(seed in any::<u64>()) {
        let s = setup(seed);
        for h in s.class.iter() {
            for g in s.groups.iter() {
                for iv in s.space.partition().intervals() {
                    let Some(c) = true_calibration_error(h, g, iv, &s.distribution) else { continue };
                    prop_assert!((-1.0..=1.0).contains(&c));
                    let v = iv.lo;
                    prop_assert!(c >= -v - 1e-12 && c <= 1.0 - v + 1e-12);
                    let joint = s.distribution.probability(|x, _| g.contains(x) && h.predict(x) == v);
                    let pos = s.distribution.probability(|x, y| g.contains(x) && h.predict(x) == v && y == 1);
                    prop_assert!((c - (pos / joint - v)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn verdict_monotone_in_alpha(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = setup(seed);
        let part = s.space.partition();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for h in s.class.iter() {
            let run = |alpha| {
                let params = AuditParameters { alpha, gamma: 0.2, psi: 0.2, lambda: None };
                audit(h, &s.groups, &part, params, Evidence::Distribution(&s.distribution), EmptyCategoryPolicy::Violation)
                    .unwrap()
                    .verdict
            };
            prop_assert!(!run(lo) || run(hi));
        }
    }

    #[test]
    fn interesting_antitone(seed in any::<u64>(), g1 in 0.01f64..=1.0, g2 in 0.01f64..=1.0,
                            p1 in 0.01f64..=1.0, p2 in 0.01f64..=1.0) {
        let s = setup(seed);
        let part = s.space.partition();
        let (glo, ghi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let (plo, phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        for h in s.class.iter() {
            for ev in [Evidence::Distribution(&s.distribution)] {
                let base = interesting_categories(h, &s.groups, &part, glo, plo, ev).unwrap();
                for (g, p) in [(ghi, plo), (glo, phi), (ghi, phi)] {
                    let raised = interesting_categories(h, &s.groups, &part, g, p, ev).unwrap();
                    prop_assert!(raised.iter().all(|c| base.contains(c)));
                }
            }
        }
    }

    #[test]
    fn reordering_groups_and_class_keeps_results(seed in any::<u64>(), alpha in 0.0f64..0.5) {
        let s = setup(seed);
        let part = s.space.partition();
        let params = AuditParameters { alpha, gamma: 0.15, psi: 0.15, lambda: None };
        let reversed_groups = SubpopulationCollection::new(s.groups.iter().rev().cloned().collect()).unwrap();
        let reversed_class = PredictorClass::new(s.class.iter().rev().cloned().collect()).unwrap();
        for h in s.class.iter() {
            let twin = reversed_class.iter().find(|o| o.name() == h.name()).unwrap();
            let a = audit(h, &s.groups, &part, params, Evidence::Distribution(&s.distribution), EmptyCategoryPolicy::Violation).unwrap();
            let b = audit(twin, &reversed_groups, &part, params, Evidence::Distribution(&s.distribution), EmptyCategoryPolicy::Violation).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
            for e in &a.entries {
                let f = b.entries.iter().find(|f| f.group == e.group && f.interval == e.interval).unwrap();
                prop_assert_eq!(e.calibration_error, f.calibration_error);
                prop_assert_eq!(e.interesting, f.interesting);
                prop_assert_eq!(e.violation, f.violation);
            }
        }
    }

    #[test]
    fn binarized_level_sets_partition_domain(seed in any::<u64>(), n in 1usize..10) {
        let class = random_class(n, &VALUES, 3, seed).unwrap();
        for h in class.iter() {
            let mut covered = vec![0usize; n];
            for &v in &VALUES {
                let hv = binarize(h, v);
                let ones = hv.table().iter().filter(|&&b| b).count();
                prop_assert_eq!(ones, h.table().iter().filter(|&&p| p == v).count());
                for (i, &b) in hv.table().iter().enumerate() {
                    covered[i] += usize::from(b);
                }
            }
            prop_assert!(covered.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn lemmas_hold_on_random_classes(seed in any::<u64>(), n in 1usize..=5, size in 1usize..=6) {
        let values = [0.0, 0.5, 1.0];
        let class = random_class(n, &values, size, seed).unwrap();
        let limits = DimensionLimits::default();
        let domain = points(n);
        prop_assert!(check_lemma_graph(&class, &domain, &values, &limits).unwrap().holds);
        for &v in &values {
            prop_assert!(check_lemma_phi(&binarize_class(&class, v), &domain, &limits).unwrap().holds);
        }
    }

    #[test]
    fn dimensions_invariant_under_relabeling(seed in any::<u64>(), n in 1usize..=8, size in 1usize..=12,
                                             rot in 0usize..8) {
        let limits = DimensionLimits::default();
        let bin = random_binary_class(n, size, 0.5, seed);
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let permuted: Vec<BinaryHypothesis> = bin
            .iter()
            .rev()
            .map(|h| BinaryHypothesis::raw(perm.iter().map(|&p| h.table()[p]).collect()))
            .collect();
        prop_assert_eq!(
            vc_dimension(&bin, &points(n), &limits).unwrap(),
            vc_dimension(&permuted, &points(n), &limits).unwrap()
        );

        let gn = n.min(6);
        let values = [0.0, 0.5, 1.0];
        let class = random_class(gn, &values, size, seed ^ 1).unwrap();
        let space = multical::PredictionSpace::finite(values.to_vec()).unwrap();
        let gperm: Vec<usize> = (0..gn).map(|i| (i + rot) % gn).collect();
        let moved = PredictorClass::new(
            class
                .iter()
                .rev()
                .map(|h| Predictor::new(h.name(), gperm.iter().map(|&p| h.table()[p]).collect(), &space).unwrap())
                .collect(),
        )
        .unwrap();
        let d = graph_dimension(&class, &points(gn), &values, &limits).unwrap();
        prop_assert_eq!(d, graph_dimension(&moved, &points(gn), &values, &limits).unwrap());

        let mut behaviors: Vec<&[f64]> = class.iter().map(|h| h.table()).collect();
        behaviors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        behaviors.dedup();
        prop_assert!((1usize << d) <= behaviors.len());
    }

    #[test]
    fn equal_seeds_give_equal_samples(seed in any::<u64>()) {
        let d = FiniteDistribution::new(2, vec![
            SupportEntry { point: DomainPoint(0), label: 0, prob: 0.5 },
            SupportEntry { point: DomainPoint(1), label: 1, prob: 0.5 },
        ]).unwrap();
        prop_assert_eq!(d.draw_sample(20, seed), d.draw_sample(20, seed));
    }
}

#[test]
fn distinct_seed_pairs_differ() {
    let d = FiniteDistribution::from_weights(
        3,
        [
            (DomainPoint(0), 0, 1.0),
            (DomainPoint(1), 1, 1.0),
            (DomainPoint(2), 0, 2.0),
        ],
    )
    .unwrap();
    // Length-2 samples from this law coincide with probability
    // (Σp²)² = 0.375² ≈ 0.14, so only about 86% of pairs differ.
    let differing = (0..1000u64)
        .filter(|&i| d.draw_sample(2, 2 * i) != d.draw_sample(2, 2 * i + 1))
        .count();
    assert!(differing >= 800, "{differing}");
    let differing = (0..1000u64)
        .filter(|&i| d.draw_sample(16, 2 * i) != d.draw_sample(16, 2 * i + 1))
        .count();
    assert!(differing >= 990, "{differing}");
}
