//! Auditing predictors for multicalibration, computing sample-complexity
//! bounds, and measuring uniform convergence of calibration errors.
//!
//! The model is finite: a domain `X = {x0, …, x(n-1)}`, labels in `{0, 1}`,
//! predictors given as lookup tables into a prediction space `Y ⊆ [0, 1]`,
//! and distributions with finite support over `X × {0, 1}`.

pub mod bounds;
pub mod convergence;
pub mod dims;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;

pub use bounds::{
    achievable_epsilon, binary_uc_bound, chernoff_absolute_tail, chernoff_relative_tail,
    finite_class_bound, graph_dim_bound, lower_bound, occupancy_threshold,
    subpopulation_coverage_bound, BoundConstants, BoundMode, BoundParams, SampleSize,
};
pub use convergence::{
    build_lower_bound_fixture, deviation_trial, distinguishing_experiment, failure_rate,
    fraction_error_check, numerator_denominator_check, ConvergenceExperiment, LowerBoundFixture,
    TrialOutcome,
};
pub use dims::{
    binarize, binarize_class, graph_dimension, true_positive_class, vc_dimension, BinaryHypothesis,
    DimensionLimits,
};
pub use error::{Error, Result};
pub use metrics::{
    audit, audit_against_reference, audit_class, category_stats, empirical_calibration_error,
    interesting_categories, true_calibration_error, AuditParameters, AuditReport, Category,
    CategoryStats, EmptyCategoryPolicy, Evidence, StatsSource,
};
pub use model::{
    draw_sample, partition_of, DomainPoint, FiniteDistribution, Group, Interval, IntervalPartition,
    LabeledSample, PredictionSpace, Predictor, PredictorClass, SubpopulationCollection,
    SupportEntry,
};
