//! Acceptance suite. Runs each criterion in turn, prints one PASS/FAIL line
//! per criterion, and exits non-zero if any fails.

use std::time::{Duration, Instant};

use multical::bounds::{
    chernoff_absolute_tail, chernoff_relative_tail, finite_class_bound, lower_bound, BoundParams,
};
use multical::convergence::{
    build_lower_bound_fixture, distinguishing_experiment, fraction_error_check,
    ConvergenceExperiment,
};
use multical::dims::{
    binarize_class, check_lemma_graph, check_lemma_phi, graph_dimension, vc_dimension,
};
use multical::metrics::{
    audit, empirical_calibration_error, true_calibration_error, AuditParameters,
};
use multical::rng::{rng_from_seed, trial_seed};
use multical::synth::{
    random_binary_class, random_class, random_rational_distribution, random_setup, SetupShape,
};
use multical::{
    BinaryHypothesis, DimensionLimits, DomainPoint, EmptyCategoryPolicy, Evidence, Group,
    LabeledSample, PredictionSpace, PredictorClass, SubpopulationCollection,
};
use rand::RngExt;
use rand_distr::{Binomial, Distribution};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "1 lower-bound fixture exactness",
            Duration::from_secs(1),
            fixture_exactness,
        ),
        (
            "2 finite-class uniform convergence",
            Duration::from_secs(120),
            finite_class_convergence,
        ),
        (
            "3 lemma property suites",
            Duration::from_secs(60),
            lemma_suites,
        ),
        (
            "4 Chernoff domination",
            Duration::from_secs(60),
            chernoff_domination,
        ),
        (
            "5 lower-bound regimes",
            Duration::from_secs(60),
            lower_bound_regimes,
        ),
        (
            "6 oracle equivalence",
            Duration::from_secs(10),
            oracle_equivalence,
        ),
        (
            "7 dimension correctness",
            Duration::from_secs(120),
            dimension_correctness,
        ),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < limit;
        let passed = out.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2?} of {:?}{}]",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed,
            limit,
            if in_time { "" } else { ", too slow" }
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

const GRID: [f64; 3] = [0.05, 0.1, 0.2];

/// c = 0 under D₁ and −2ε under D₂ to 1e-12, and the D₂ verdict flips at
/// the computed |c|, which lies within 1e-12 of 2ε.
fn fixture_exactness() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0;
    for &eps in &GRID {
        for &gamma in &GRID {
            for &psi in &GRID {
                let f = build_lower_bound_fixture(eps, gamma, psi).unwrap();
                let (h, u, iv) = (f.predictor(), f.u(), f.high_interval());
                let part = f.space.partition();
                let c1 = true_calibration_error(h, u, &iv, &f.d1).unwrap();
                let c2 = true_calibration_error(h, u, &iv, &f.d2).unwrap();
                worst = worst.max(c1.abs()).max((c2 + 2.0 * eps).abs());
                if c1.abs() > 1e-12 || (c2 + 2.0 * eps).abs() > 1e-12 {
                    return outcome(
                        false,
                        format!("eps={eps} gamma={gamma} psi={psi}: c1={c1} c2={c2}"),
                    );
                }
                let verdict = |d, alpha| {
                    let params = AuditParameters {
                        alpha,
                        gamma,
                        psi,
                        lambda: None,
                    };
                    audit(
                        h,
                        &f.groups,
                        &part,
                        params,
                        Evidence::Distribution(d),
                        EmptyCategoryPolicy::Violation,
                    )
                    .unwrap()
                    .verdict
                };
                let flip = audit(
                    h,
                    &f.groups,
                    &part,
                    AuditParameters {
                        alpha: 0.0,
                        gamma,
                        psi,
                        lambda: None,
                    },
                    Evidence::Distribution(&f.d2),
                    EmptyCategoryPolicy::Violation,
                )
                .unwrap()
                .entries
                .iter()
                .filter(|e| e.interesting)
                .filter_map(|e| e.calibration_error)
                .fold(0.0f64, |m, c| m.max(c.abs()));
                let ok = verdict(&f.d1, 0.0)
                    && verdict(&f.d2, flip)
                    && !verdict(&f.d2, flip.next_down())
                    && (flip - 2.0 * eps).abs() <= 1e-12
                    && !verdict(&f.d2, 2.0 * eps - 1e-12)
                    && verdict(&f.d2, 2.0 * eps + 1e-12);
                if !ok {
                    return outcome(
                        false,
                        format!(
                            "verdicts do not flip at 2eps for eps={eps} gamma={gamma} psi={psi}"
                        ),
                    );
                }
                cells += 1;
            }
        }
    }
    outcome(
        true,
        format!("{cells} grid cells, max oracle error {worst:.1e}"),
    )
}

fn ceiling(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

/// Failure rate at m = finite_class_bound, then the ε⁻², ψ⁻², γ⁻¹ scalings.
fn finite_class_convergence() -> Outcome {
    let shape = SetupShape {
        domain_size: 50,
        predictors: 20,
        groups: 5,
        values: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
    };
    let setup = random_setup(&shape, 2024).unwrap();
    let part = setup.space.partition();
    let base = BoundParams {
        epsilon: 0.1,
        delta: 0.1,
        gamma: 0.2,
        psi: 0.2,
        lambda: 0.25,
        card_gamma: 5,
        card_h: 20,
        ..BoundParams::default()
    };
    let m = finite_class_bound(&base).unwrap().count().unwrap() as usize;
    let trials = 200;
    let limit = ceiling(base.delta, trials);
    let runs = [
        ("base", base.epsilon, base.gamma, base.psi, m),
        ("eps/2, 4m", base.epsilon / 2.0, base.gamma, base.psi, 4 * m),
        ("psi/2, 4m", base.epsilon, base.gamma, base.psi / 2.0, 4 * m),
        (
            "gamma/2, 2m",
            base.epsilon,
            base.gamma / 2.0,
            base.psi,
            2 * m,
        ),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, (label, eps, gamma, psi, mm)) in runs.into_iter().enumerate() {
        let exp = ConvergenceExperiment::new(
            &setup.distribution,
            &setup.class,
            &setup.groups,
            &part,
            gamma,
            psi,
        )
        .unwrap();
        if exp.tracked_categories() == 0 {
            return outcome(false, format!("{label}: no interesting categories"));
        }
        let rate = exp.failure_rate(mm, eps, trials, trial_seed(7, i as u64));
        ok &= rate <= limit;
        parts.push(format!("{label}: m={mm} rate={rate:.3}"));
    }
    outcome(ok, format!("{} (ceiling {limit:.3})", parts.join("; ")))
}

fn lemma_suites() -> Outcome {
    let mut rng = rng_from_seed(31);
    let mut violations = 0;
    let mut premises = 0;
    for _ in 0..100_000 {
        let psi: f64 = rng.random_range(0.001..=1.0);
        let eps: f64 = rng.random_range(0.0..=1.0);
        let p2 = rng.random_range(psi..=1.0);
        let p1 = rng.random_range(0.0..=p2);
        let xi = psi * eps / 3.0;
        let p1t = (p1 + rng.random_range(-xi..=xi)).clamp(0.0, 1.0);
        let p2t = (p2 + rng.random_range(-xi..=xi)).clamp(0.0, 1.0);
        let c = fraction_error_check(p1, p2, p1t, p2t, psi, eps).unwrap();
        premises += usize::from(c.premises_met);
        violations += usize::from(!c.holds);
    }
    if premises < 99_000 {
        return outcome(false, format!("only {premises} tuples met the premises"));
    }

    let limits = DimensionLimits::default();
    let mut class_violations = 0;
    for i in 0..100u64 {
        let mut r = rng_from_seed(trial_seed(77, i));
        let n = r.random_range(1..=6usize);
        let k = r.random_range(1..=4usize);
        let size = r.random_range(1..=8usize);
        let values: Vec<f64> = (0..k).map(|j| j as f64 / k as f64).collect();
        let class = random_class(n, &values, size, trial_seed(78, i)).unwrap();
        let domain: Vec<DomainPoint> = (0..n as u32).map(DomainPoint).collect();
        let graph = check_lemma_graph(&class, &domain, &values, &limits).unwrap();
        class_violations += usize::from(!graph.holds);
        for &v in &values {
            let phi = check_lemma_phi(&binarize_class(&class, v), &domain, &limits).unwrap();
            class_violations += usize::from(!phi.holds);
        }
    }
    outcome(
        violations == 0 && class_violations == 0,
        format!("fraction lemma {violations} violations in 1e5 tuples; class lemmas {class_violations} violations in 100 classes"),
    )
}

fn chernoff_domination() -> Outcome {
    const SIMS: usize = 100_000;
    let mut worst_ratio = 0.0f64;
    let mut cell = 0u64;
    for &n in &[10u64, 100, 1000] {
        for &eps in &[0.05, 0.1, 0.2] {
            for &mu in &[0.3, 0.5, 0.7] {
                let binom = Binomial::new(n, mu).unwrap();
                let mut rng = rng_from_seed(trial_seed(4, cell));
                cell += 1;
                let expectation = n as f64 * mu;
                let (mut abs_hits, mut rel_hits) = (0usize, 0usize);
                for _ in 0..SIMS {
                    let x = binom.sample(&mut rng) as f64;
                    if (x / n as f64 - mu).abs() >= eps {
                        abs_hits += 1;
                    }
                    if x <= (1.0 - eps) * expectation {
                        rel_hits += 1;
                    }
                }
                let abs_freq = abs_hits as f64 / SIMS as f64;
                let rel_freq = rel_hits as f64 / SIMS as f64;
                let abs_bound = chernoff_absolute_tail(n, eps);
                let rel_bound = chernoff_relative_tail(expectation, eps).unwrap();
                worst_ratio = worst_ratio
                    .max(abs_freq / abs_bound)
                    .max(rel_freq / rel_bound);
                if abs_freq > abs_bound || rel_freq > rel_bound {
                    return outcome(
                        false,
                        format!("n={n} eps={eps} mu={mu}: abs {abs_freq} vs {abs_bound}, rel {rel_freq} vs {rel_bound}"),
                    );
                }
            }
        }
    }
    outcome(
        true,
        format!("{cell} cells x 1e5 draws, largest frequency/bound ratio {worst_ratio:.3}"),
    )
}

fn lower_bound_regimes() -> Outcome {
    let (eps, gamma, psi) = (0.1, 0.5, 0.5);
    let f = build_lower_bound_fixture(eps, gamma, psi).unwrap();
    let p = BoundParams {
        epsilon: eps,
        gamma,
        psi,
        delta: 0.05,
        ..BoundParams::default()
    };
    let lb = lower_bound(&p).unwrap().count().unwrap() as usize;
    let small = lb.div_ceil(16);
    let large = 100 * lb;
    let a_small = distinguishing_experiment(&f, small, 500, 11);
    let a_large = distinguishing_experiment(&f, large, 500, 12);
    outcome(
        a_small < 0.95 && a_large >= 0.97,
        format!("lower_bound={lb}; accuracy {a_small:.3} at m={small}, {a_large:.3} at m={large}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut compared = 0;
    let mut worst = 0.0f64;
    let values = [0.0, 0.2, 0.5, 0.9, 1.0];
    let space = PredictionSpace::finite(values.to_vec()).unwrap();
    let part = space.partition();
    for i in 0..100u64 {
        let mut r = rng_from_seed(trial_seed(600, i));
        let n = r.random_range(2..=15usize);
        let (d, weights) = random_rational_distribution(n, 20, trial_seed(601, i)).unwrap();
        let sample = LabeledSample::from_multiplicities(weights).unwrap();
        let class = random_class(n, &values, 3, trial_seed(602, i)).unwrap();
        let groups = SubpopulationCollection::new(
            (0..3)
                .map(|g| {
                    let mut members: Vec<DomainPoint> = (0..n as u32)
                        .filter(|_| r.random_bool(0.6))
                        .map(DomainPoint)
                        .collect();
                    if members.is_empty() {
                        members.push(DomainPoint(0));
                    }
                    Group::new(format!("g{g}"), members, n).unwrap()
                })
                .collect(),
        )
        .unwrap();
        for h in class.iter() {
            for g in groups.iter() {
                for iv in part.intervals() {
                    match (
                        true_calibration_error(h, g, iv, &d),
                        empirical_calibration_error(h, g, iv, &sample),
                    ) {
                        (Some(a), Some(b)) => {
                            worst = worst.max((a - b).abs());
                            compared += 1;
                        }
                        (None, None) => {}
                        (a, b) => {
                            return outcome(false, format!("definedness differs: {a:?} vs {b:?}"))
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && compared > 0,
        format!("{compared} categories, max |c - c_hat| {worst:.1e}"),
    )
}

fn naive_vc(class: &[BinaryHypothesis], n: usize) -> usize {
    let mut best = 0;
    for subset in 0u32..(1 << n) {
        let points: Vec<usize> = (0..n).filter(|&i| subset >> i & 1 == 1).collect();
        let k = points.len();
        if k <= best {
            continue;
        }
        let all = (0u32..(1 << k)).all(|labels| {
            class.iter().any(|h| {
                points
                    .iter()
                    .enumerate()
                    .all(|(j, &p)| h.table()[p] == (labels >> j & 1 == 1))
            })
        });
        if all {
            best = k;
        }
    }
    best
}

fn naive_graph(class: &PredictorClass, n: usize, values: &[f64]) -> usize {
    let mut best = 0;
    for subset in 0u32..(1 << n) {
        let points: Vec<usize> = (0..n).filter(|&i| subset >> i & 1 == 1).collect();
        let k = points.len();
        if k <= best {
            continue;
        }
        let witnesses = values.len().pow(k as u32);
        let shattered = (0..witnesses).any(|code| {
            let f: Vec<f64> = (0..k)
                .map(|j| values[code / values.len().pow(j as u32) % values.len()])
                .collect();
            (0u32..(1 << k)).all(|t| {
                class.iter().any(|h| {
                    points.iter().enumerate().all(|(j, &p)| {
                        (h.predict(DomainPoint(p as u32)) == f[j]) == (t >> j & 1 == 1)
                    })
                })
            })
        });
        if shattered {
            best = k;
        }
    }
    best
}

fn dimension_correctness() -> Outcome {
    let limits = DimensionLimits::default();
    let mut mismatches = Vec::new();
    let (mut vc_max, mut graph_max) = (0, 0);
    for i in 0..50u64 {
        let mut r = rng_from_seed(trial_seed(700, i));
        let n = r.random_range(1..=10usize);
        let size = r.random_range(1..=40usize);
        let density = r.random_range(0.1..0.9);
        let bin = random_binary_class(n, size, density, trial_seed(701, i));
        let domain: Vec<DomainPoint> = (0..n as u32).map(DomainPoint).collect();
        let fast = vc_dimension(&bin, &domain, &limits).unwrap();
        let slow = naive_vc(&bin, n);
        vc_max = vc_max.max(fast);
        if fast != slow {
            mismatches.push(format!("vc #{i}: {fast} vs {slow}"));
        }

        let gn = r.random_range(1..=6usize);
        let k = r.random_range(2..=4usize);
        let values: Vec<f64> = (0..k).map(|j| j as f64 / (k - 1) as f64).collect();
        let class =
            random_class(gn, &values, r.random_range(1..=12usize), trial_seed(702, i)).unwrap();
        let gdomain: Vec<DomainPoint> = (0..gn as u32).map(DomainPoint).collect();
        let fast = graph_dimension(&class, &gdomain, &values, &limits).unwrap();
        let slow = naive_graph(&class, gn, &values);
        graph_max = graph_max.max(fast);
        if fast != slow {
            mismatches.push(format!("graph #{i}: {fast} vs {slow}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("50 VC and 50 graph instances agree (max VC {vc_max}, max graph {graph_max})")
        } else {
            mismatches.join(", ")
        },
    )
}
