//! Model selection for possibly misspecified generalized linear models.
//!
//! The crate fits quasi-maximum-likelihood estimators under a canonical-link
//! working family, estimates the covariance contrast `H = A^{-1} B` between
//! the working-model information and the true score covariance, and scores
//! candidate supports under AIC, BIC and their misspecification-aware
//! generalizations GAIC, GBIC, GBICp-L and GBICp. Candidate supports come
//! from marginal screening followed by a SICA or lasso regularization path.
//! The [`simbench`] module runs seeded Monte Carlo studies of the whole
//! pipeline.

pub mod criteria;
pub mod error;
pub mod family;
pub mod linalg;
pub mod misspec;
pub mod path;
pub mod qmle;
pub mod simbench;

pub use criteria::{score_model, select, Criterion, CriterionScores};
pub use error::{Error, Result};
pub use family::{Dispersion, Family, FamilyKind};
pub use misspec::{contrast, plug_in_contrast, true_contrast, ContrastEstimate, ContrastSummary};
pub use path::{CandidatePath, PathConfig, Penalty, RefitOptions, ScoredCandidate, ScreenConfig};
pub use qmle::{best_misspecified_params, fit, fit_support, FitOptions, FittedModel};
