//! Candidate model sequences: marginal screening, a penalized path over the
//! retained columns, and unpenalized refits of each distinct support.

mod penalized;
mod refit;
mod screen;

pub use penalized::{lasso_path, penalized_path, sica_path, CandidatePath, PathConfig, Penalty};
pub use refit::{
    evaluate_support, refit, refit_and_score, score_support, RefitOptions, ScoredCandidate,
    SupportEvaluation,
};
pub use screen::{quantile_type7, sis_screen, ScreenConfig, ScreenMode, Screening};

