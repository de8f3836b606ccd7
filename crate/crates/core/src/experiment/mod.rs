//! Experiment harness: synthetic data, the online loop, and statistics.
//!
//! [`dataset`] builds query/item corpora with known relevance structure,
//! [`run`] drives the epsilon-greedy interaction loop and offline
//! evaluation, and [`stats`] provides the significance tests and weight
//! diagnostics used to compare finished runs.

pub mod dataset;
pub mod run;
pub mod stats;

pub use dataset::{
    generate_synthetic_dataset, sample_interaction, Dataset, DatasetParams, Interaction, Item,
    Split,
};
pub use run::{
    evaluate_offline, evaluate_offline_with, random_ranking_baseline, run_online, BatchRow,
    ExperimentConfig, FeedbackKind, MetricsLog, OfflineEvaluation, RunFailure, RunOutput,
};
pub use stats::{t_test_two_tailed, weight_distance, TTestOutcome, WeightComparison};
