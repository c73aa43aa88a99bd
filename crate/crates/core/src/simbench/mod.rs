//! Seeded simulation studies: scenario generators, per-replication metrics,
//! aggregated summary tables, and Monte Carlo diagnostics of the asymptotic
//! theory.

mod diagnostics;
mod experiment;
mod metrics;
mod scenario;
pub mod seed;

pub use diagnostics::{
    diagnostic_setup, kl_expansion_diagnostic, kolmogorov_p_value, ks_statistic_normal,
    normality_diagnostic, KlDiagnostic, NoiseModel, NormalityDiagnostic, Truth, KS_ALPHA,
    MIN_NORMALITY_REPS,
};
pub use experiment::{
    manifest_entries, manifest_text, run_experiment, run_replication, summarize, summary_csv,
    Experiment, ReplicationResult, SummaryRow, CSV_HEADER, ERROR_SCALE,
};
pub use metrics::{evaluate, median, robust_sd, Method, Outcome};
pub use scenario::{generate, index_link, Dataset, OracleSets, Scenario, ScenarioConfig, TestSet};
