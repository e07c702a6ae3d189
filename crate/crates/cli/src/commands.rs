//! Subcommand implementations. Each returns the rendered JSON report and
//! the exit code.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use multical::bounds::{
    achievable_epsilon, binary_uc_bound, finite_class_bound, graph_dim_bound, lower_bound,
    occupancy_threshold, subpopulation_coverage_bound, BoundMode, BoundParams, SampleSize,
};
use multical::convergence::{
    build_lower_bound_fixture, distinguishing_experiment, failure_fraction, ConvergenceExperiment,
};
use multical::dims::{
    binarize_class, check_lemma_graph, check_lemma_phi, LemmaGraphReport, LemmaPhiReport,
};
use multical::metrics::{audit_class, AuditReport, EmptyCategoryPolicy, Evidence};
use multical::synth::{random_setup, SetupShape};
use multical::{
    FiniteDistribution, IntervalPartition, PredictorClass, SubpopulationCollection, TrialOutcome,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{load_dataset, PredictionMode};
use crate::{CliError, EXIT_OK, EXIT_VIOLATION};

/// Every report starts with the tool version, the subcommand, and the
/// fully resolved configuration.
#[derive(Debug, Serialize)]
pub struct Report<'a, T> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub result: T,
}

fn render<T: Serialize>(
    command: &'static str,
    cfg: &RunConfig,
    result: T,
) -> Result<String, CliError> {
    let report = Report {
        tool: "multical",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
        result,
    };
    let mut s =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    /// Rows are i.i.d. draws; interestingness uses empirical proportions.
    Sample,
    /// The uniform distribution over rows is the true distribution.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmptyPolicyArg {
    Violation,
    Exclude,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Dataset CSV.
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "sample")]
    pub evidence: EvidenceKind,
    /// Treatment of interesting categories with no rows.
    #[arg(long = "empty", value_enum, default_value = "violation")]
    pub empty: EmptyPolicyArg,
    /// Also write per-category entries as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct AuditResult {
    dataset: String,
    rows: usize,
    evidence: EvidenceKind,
    space: multical::PredictionSpace,
    verdict: bool,
    violations: usize,
    reports: Vec<AuditReport>,
}

pub fn audit(cfg: &RunConfig, args: &AuditArgs) -> Result<(String, i32), CliError> {
    let ds = load_dataset(&args.dataset)?;
    let model = ds.to_model(cfg.mode, cfg.lambda)?;
    let partition = model.space.partition();
    let params = multical::AuditParameters {
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        psi: cfg.psi,
        lambda: (cfg.mode == PredictionMode::ContinuousY).then_some(cfg.lambda),
    };
    let evidence = match args.evidence {
        EvidenceKind::Sample => Evidence::Sample(&model.sample),
        EvidenceKind::Exact => Evidence::Distribution(&model.distribution),
    };
    let policy = match args.empty {
        EmptyPolicyArg::Violation => EmptyCategoryPolicy::Violation,
        EmptyPolicyArg::Exclude => EmptyCategoryPolicy::Exclude,
    };
    let reports = audit_class(
        &model.class,
        &model.groups,
        &partition,
        params,
        evidence,
        policy,
    )?;
    if let Some(path) = &args.csv {
        write_audit_csv(path, &reports)?;
    }
    let violations = reports.iter().map(|r| r.violations().count()).sum();
    let verdict = reports.iter().all(|r| r.verdict);
    let result = AuditResult {
        dataset: args.dataset.display().to_string(),
        rows: ds.len(),
        evidence: args.evidence,
        space: model.space,
        verdict,
        violations,
        reports,
    };
    Ok((
        render("audit", cfg, result)?,
        if verdict { EXIT_OK } else { EXIT_VIOLATION },
    ))
}

fn write_audit_csv(path: &PathBuf, reports: &[AuditReport]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Usage(e.to_string()))?;
    let csv_err = |e: csv::Error| CliError::Usage(e.to_string());
    w.write_record([
        "predictor",
        "group",
        "interval",
        "interesting",
        "p_group",
        "p_joint",
        "p_cond",
        "n_hat",
        "calibration_error",
        "violation",
        "reason",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        for e in &r.entries {
            let reason = match e.reason {
                Some(multical::metrics::ViolationReason::ErrorAboveAlpha) => "error_above_alpha",
                Some(multical::metrics::ViolationReason::NoOccupancy) => "no_occupancy",
                None => "",
            };
            w.write_record([
                r.predictor.clone(),
                e.group.clone(),
                e.interval.to_string(),
                e.interesting.to_string(),
                e.stats.p_group.to_string(),
                e.stats.p_joint.to_string(),
                opt(e.stats.p_cond),
                e.stats.n_hat.map(|n| n.to_string()).unwrap_or_default(),
                opt(e.calibration_error),
                e.violation.to_string(),
                reason.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SampleSizeArgs {
    /// Number of subpopulations |Γ|.
    #[arg(long, default_value_t = 1)]
    pub card_gamma: u64,
    /// Size of a finite predictor class |H|.
    #[arg(long)]
    pub card_h: Option<u64>,
    /// Size of a finite prediction range |Y| (graph-dimension bound).
    #[arg(long)]
    pub card_y: Option<u64>,
    /// Graph-dimension bound d (also used as a VC dimension for the binary bound).
    #[arg(long)]
    pub dimension: Option<u64>,
    /// Also report the smallest ε reachable with this many samples.
    #[arg(long)]
    pub m: Option<u64>,
}

#[derive(Debug, Serialize)]
struct SampleSizeResult {
    params: BoundParams,
    finite_class: Option<SampleSize>,
    occupancy_threshold: Option<f64>,
    graph_dimension: Option<SampleSize>,
    lower: SampleSize,
    subpopulation_coverage: Option<SampleSize>,
    binary_uniform_convergence: Option<SampleSize>,
    achievable_epsilon_finite: Option<f64>,
    achievable_epsilon_graph: Option<f64>,
}

pub fn sample_size(cfg: &RunConfig, args: &SampleSizeArgs) -> Result<(String, i32), CliError> {
    if args.card_gamma == 0 {
        return Err(CliError::Usage("--card-gamma must be at least 1".into()));
    }
    let p = BoundParams {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        gamma: cfg.gamma,
        psi: cfg.psi,
        lambda: cfg.lambda,
        card_gamma: args.card_gamma,
        card_h: args.card_h.unwrap_or(1),
        card_y: args.card_y.unwrap_or(1),
        dimension: args.dimension.unwrap_or(0),
        constants: cfg.constants,
    };
    let graph_ready = args.card_y.is_some() && args.dimension.is_some();
    let mut r = SampleSizeResult {
        params: p,
        finite_class: None,
        occupancy_threshold: None,
        graph_dimension: None,
        lower: lower_bound(&p)?,
        subpopulation_coverage: None,
        binary_uniform_convergence: None,
        achievable_epsilon_finite: None,
        achievable_epsilon_graph: None,
    };
    if args.card_h.is_some() {
        r.finite_class = Some(finite_class_bound(&p)?);
        r.occupancy_threshold = Some(occupancy_threshold(&p)?);
    }
    if graph_ready {
        r.graph_dimension = Some(graph_dim_bound(&p)?);
    }
    if cfg.gamma < 1.0 && cfg.delta < 1.0 {
        r.subpopulation_coverage = Some(subpopulation_coverage_bound(
            cfg.gamma,
            cfg.delta,
            args.card_gamma,
        )?);
    }
    if let Some(d) = args.dimension {
        if cfg.delta < 1.0 {
            r.binary_uniform_convergence = Some(binary_uc_bound(
                d,
                cfg.epsilon,
                cfg.delta,
                cfg.constants.c_fund,
            )?);
        }
    }
    if let Some(m) = args.m {
        if args.card_h.is_some() {
            r.achievable_epsilon_finite = achievable_epsilon(m, &p, BoundMode::Finite).ok();
        }
        if graph_ready {
            r.achievable_epsilon_graph = achievable_epsilon(m, &p, BoundMode::Graph).ok();
        }
    }
    Ok((render("sample-size", cfg, r)?, EXIT_OK))
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Use the uniform distribution over this dataset's rows as the true
    /// distribution instead of a random setup.
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Sample size per trial; defaults to the finite-class bound.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub domain_size: usize,
    #[arg(long, default_value_t = 20)]
    pub predictors: usize,
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
    /// Number of evenly spaced prediction values in [0, 1].
    #[arg(long, default_value_t = 4)]
    pub values: usize,
    /// Seed of the random setup (trial seeds derive from --seed).
    #[arg(long, default_value_t = 0)]
    pub setup_seed: u64,
    /// Omit per-trial records from the report.
    #[arg(long)]
    pub summary_only: bool,
}

#[derive(Debug, Serialize)]
struct VerifyResult {
    setup: String,
    domain_size: usize,
    predictors: usize,
    groups: usize,
    cells: usize,
    m: usize,
    tracked_categories: usize,
    failure_rate: f64,
    ceiling: f64,
    within_ceiling: bool,
    empty_category_trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<Vec<TrialOutcome>>,
}

pub fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<(String, i32), CliError> {
    struct Setup {
        label: String,
        distribution: FiniteDistribution,
        class: PredictorClass,
        groups: SubpopulationCollection,
        partition: IntervalPartition,
        lambda: f64,
    }
    let setup = match &args.dataset {
        Some(path) => {
            let ds = load_dataset(path)?;
            let model = ds.to_model(cfg.mode, cfg.lambda)?;
            Setup {
                label: path.display().to_string(),
                lambda: model.space.effective_lambda(),
                partition: model.space.partition(),
                distribution: model.distribution,
                class: model.class,
                groups: model.groups,
            }
        }
        None => {
            if args.values < 2 || args.domain_size == 0 || args.predictors == 0 || args.groups == 0
            {
                return Err(CliError::Usage(
                    "random setups need --values >= 2 and positive --domain-size, --predictors, --groups".into(),
                ));
            }
            let k = args.values - 1;
            let values = (0..=k).map(|j| j as f64 / k as f64).collect();
            let shape = SetupShape {
                domain_size: args.domain_size,
                predictors: args.predictors,
                groups: args.groups,
                values,
            };
            let s = random_setup(&shape, args.setup_seed)?;
            Setup {
                label: format!("random (seed {})", args.setup_seed),
                lambda: s.space.effective_lambda(),
                partition: s.space.partition(),
                distribution: s.distribution,
                class: s.class,
                groups: s.groups,
            }
        }
    };
    let m = match args.m {
        Some(m) => m,
        None => {
            let p = BoundParams {
                epsilon: cfg.epsilon,
                delta: cfg.delta,
                gamma: cfg.gamma,
                psi: cfg.psi,
                lambda: setup.lambda,
                card_gamma: setup.groups.len() as u64,
                card_h: setup.class.len() as u64,
                constants: cfg.constants,
                ..BoundParams::default()
            };
            let n = finite_class_bound(&p)?.count().ok_or_else(|| {
                CliError::Usage("the finite-class bound is too large to simulate".into())
            })?;
            usize::try_from(n)
                .map_err(|_| CliError::Usage("sample size does not fit in memory".into()))?
        }
    };
    let exp = ConvergenceExperiment::new(
        &setup.distribution,
        &setup.class,
        &setup.groups,
        &setup.partition,
        cfg.gamma,
        cfg.psi,
    )?;
    let outcomes = exp.run_trials(m, cfg.trials, cfg.master_seed);
    let rate = failure_fraction(&outcomes, cfg.epsilon);
    let ceiling = cfg.delta + 3.0 * (cfg.delta * (1.0 - cfg.delta) / cfg.trials as f64).sqrt();
    let result = VerifyResult {
        setup: setup.label,
        domain_size: setup.distribution.domain_size(),
        predictors: setup.class.len(),
        groups: setup.groups.len(),
        cells: setup.partition.len(),
        m,
        tracked_categories: exp.tracked_categories(),
        failure_rate: rate,
        ceiling,
        within_ceiling: rate <= ceiling,
        empty_category_trials: outcomes
            .iter()
            .filter(|o| o.empty_interesting_count > 0)
            .count(),
        trials: (!args.summary_only).then_some(outcomes),
    };
    Ok((render("verify", cfg, result)?, EXIT_OK))
}

#[derive(Debug, Args)]
pub struct DimsArgs {
    /// Dataset CSV; rows are the domain, predictors the class.
    pub dataset: PathBuf,
}

#[derive(Debug, Serialize)]
struct PhiByValue {
    value: f64,
    #[serde(flatten)]
    report: LemmaPhiReport,
}

#[derive(Debug, Serialize)]
struct DimsResult {
    dataset: String,
    domain_size: usize,
    predictors: usize,
    values: Vec<f64>,
    graph: LemmaGraphReport,
    true_positive: Vec<PhiByValue>,
}

pub fn dims(cfg: &RunConfig, args: &DimsArgs) -> Result<(String, i32), CliError> {
    let ds = load_dataset(&args.dataset)?;
    // Dimensions always use the exact prediction values.
    let model = ds.to_model(PredictionMode::FiniteY, cfg.lambda)?;
    let values = ds.prediction_values();
    let domain = ds.domain();
    let graph = check_lemma_graph(&model.class, &domain, &values, &cfg.limits)?;
    let true_positive = values
        .iter()
        .map(|&v| {
            check_lemma_phi(&binarize_class(&model.class, v), &domain, &cfg.limits)
                .map(|report| PhiByValue { value: v, report })
        })
        .collect::<multical::Result<Vec<_>>>()?;
    let result = DimsResult {
        dataset: args.dataset.display().to_string(),
        domain_size: domain.len(),
        predictors: model.class.len(),
        values,
        graph,
        true_positive,
    };
    Ok((render("dims", cfg, result)?, EXIT_OK))
}

#[derive(Debug, Args)]
pub struct LowerBoundArgs {
    /// Sample sizes to try; defaults to multiples 1/16, 1/4, 1, 4, 16, 100
    /// of the lower bound.
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
}

#[derive(Debug, Serialize)]
struct DemoPoint {
    m: usize,
    accuracy: f64,
}

#[derive(Debug, Serialize)]
struct DemoResult {
    lower_bound: SampleSize,
    trials: usize,
    points: Vec<DemoPoint>,
}

pub fn lower_bound_demo(cfg: &RunConfig, args: &LowerBoundArgs) -> Result<(String, i32), CliError> {
    let fixture = build_lower_bound_fixture(cfg.epsilon, cfg.gamma, cfg.psi)?;
    let p = BoundParams {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        gamma: cfg.gamma,
        psi: cfg.psi,
        constants: cfg.constants,
        ..BoundParams::default()
    };
    let lb = lower_bound(&p)?;
    let grid = match &args.m_grid {
        Some(g) => g.clone(),
        None => {
            let n = lb
                .count()
                .ok_or_else(|| CliError::Usage("lower bound too large to simulate".into()))?
                as f64;
            [1.0 / 16.0, 0.25, 1.0, 4.0, 16.0, 100.0]
                .iter()
                .map(|f| (n * f).round() as usize)
                .collect()
        }
    };
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &m)| DemoPoint {
            m,
            accuracy: distinguishing_experiment(
                &fixture,
                m,
                cfg.trials,
                multical::rng::trial_seed(cfg.master_seed, i as u64),
            ),
        })
        .collect();
    Ok((
        render(
            "lower-bound-demo",
            cfg,
            DemoResult {
                lower_bound: lb,
                trials: cfg.trials,
                points,
            },
        )?,
        EXIT_OK,
    ))
}
