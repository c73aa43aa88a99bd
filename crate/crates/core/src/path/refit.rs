//! Unpenalized refits of path candidates and their criterion scores.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::criteria::{self, CriterionScores};
use crate::error::{Error, Result};
use crate::family::{Dispersion, Family, FamilyKind};
use crate::linalg;
use crate::misspec::{self, ContrastSummary};
use crate::path::CandidatePath;
use crate::qmle::{self, FittedModel};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefitOptions {
    /// Gaussian scale handling; ignored by other families.
    pub dispersion: Dispersion,
    /// Prepends an all-ones column to every refit. It enters the contrast but
    /// not `|M|`.
    pub intercept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub id: usize,
    pub support: Vec<usize>,
    pub fitted: Option<FittedModel>,
    pub contrast: Option<ContrastSummary>,
    pub scores: Option<CriterionScores>,
    /// Why the fit or the contrast failed, if it did.
    pub failure: Option<String>,
}

impl ScoredCandidate {
    pub fn is_available(&self) -> bool {
        self.scores.is_some()
    }
}

/// Refits every candidate support and scores it. Failures are recorded per
/// candidate; the call itself only fails on malformed inputs.
pub fn refit_and_score(
    candidates: &CandidatePath,
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    p: usize,
    options: &RefitOptions,
) -> Result<Vec<ScoredCandidate>> {
    if y.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "response has {} entries but design has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    for s in &candidates.supports {
        qmle::validate_support(s, x.ncols())?;
    }
    Ok(candidates
        .supports
        .par_iter()
        .enumerate()
        .map(|(id, support)| score_support(id, support, family, y, x, p, options))
        .collect())
}

/// A refit with its criterion scores and the contrast outcome kept as a
/// typed result.
#[derive(Debug, Clone)]
pub struct SupportEvaluation {
    pub fitted: FittedModel,
    /// Log-likelihood entering the criteria (profiled under
    /// [`Dispersion::Profile`]).
    pub loglik: f64,
    pub contrast: Result<ContrastSummary>,
    /// Generalized criteria are missing when the contrast failed or the fit
    /// did not converge.
    pub scores: CriterionScores,
}

/// Refits `support` and scores it. Fit failures are returned as errors;
/// contrast failures are carried in the result.
pub fn evaluate_support(
    support: &[usize],
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    p: usize,
    options: &RefitOptions,
) -> Result<SupportEvaluation> {
    let n = y.len();
    let fitted = refit(family, y, x, support, options.intercept)?;
    let design = refit_design(x, support, options.intercept);
    let profile = options.dispersion == Dispersion::Profile && family.kind == FamilyKind::Gaussian;

    let (loglik, scale) = if profile {
        let theta = &design * &fitted.beta_hat;
        let rss = (y - theta).norm_squared();
        let phi = rss / n as f64;
        if !(phi > 0.0) {
            return Err(Error::InvalidArgument("residual sum of squares is zero".into()));
        }
        (-(n as f64) / 2.0 * phi.ln(), phi)
    } else {
        (fitted.loglik, 1.0)
    };

    let contrast = if design.ncols() == 0 {
        Ok(ContrastSummary {
            trace_h: 0.0,
            logdet_h: 0.0,
        })
    } else {
        contrast_summary(family, &design, y, &fitted.beta_hat, scale)
    };
    let usable = contrast.as_ref().ok().copied().filter(|_| fitted.converged);
    let scores = criteria::score_components(loglik, fitted.model_size(), usable, n, p)?;
    Ok(SupportEvaluation {
        fitted,
        loglik,
        contrast,
        scores,
    })
}

/// Refits and scores a single support.
pub fn score_support(
    id: usize,
    support: &[usize],
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    p: usize,
    options: &RefitOptions,
) -> ScoredCandidate {
    let mut out = ScoredCandidate {
        id,
        support: support.to_vec(),
        fitted: None,
        contrast: None,
        scores: None,
        failure: None,
    };
    match evaluate_support(support, family, y, x, p, options) {
        Ok(ev) => {
            match ev.contrast {
                Ok(c) if ev.fitted.converged => out.contrast = Some(c),
                Ok(_) => {}
                Err(e) => {
                    log::debug!("candidate {id} {support:?}: contrast unavailable: {e}");
                    out.failure = Some(e.to_string());
                }
            }
            out.scores = Some(ev.scores);
            out.fitted = Some(ev.fitted);
        }
        Err(e) => {
            log::debug!("candidate {id} {support:?}: fit failed: {e}");
            out.failure = Some(e.to_string());
        }
    }
    out
}

fn contrast_summary(
    family: &Family,
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    scale: f64,
) -> Result<ContrastSummary> {
    let a = misspec::estimate_a(family, design, beta)?;
    let mut b = misspec::estimate_b(family, design, y, beta)?;
    if scale != 1.0 {
        // (A / phi)^{-1} (B / phi^2) = A^{-1} B / phi
        b /= scale;
    }
    Ok(misspec::contrast(&a, &b)?.summary())
}

/// Unpenalized QMLE on `support`, optionally with a leading intercept. The
/// empty support without intercept is the all-zero null model.
pub fn refit(
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    support: &[usize],
    intercept: bool,
) -> Result<FittedModel> {
    qmle::validate_support(support, x.ncols())?;
    if support.is_empty() && !intercept {
        return Ok(FittedModel::null(family, y));
    }
    let design = refit_design(x, support, intercept);
    let mut fitted = qmle::fit(family, y, &design)?;
    fitted.support = support.to_vec();
    fitted.intercept = intercept;
    Ok(fitted)
}

pub(crate) fn refit_design(x: &DMatrix<f64>, support: &[usize], intercept: bool) -> DMatrix<f64> {
    let selected = linalg::select_columns(x, support);
    if intercept {
        selected.insert_column(0, 1.0)
    } else {
        selected
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy() -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.5, -0.3, -0.4, 1.2, 0.8, 0.9, -1.1, 0.1, -1.3, 0.2, 0.6, 0.7, 0.4, -0.9, 0.2,
                -0.6, 1.5,
            ],
        );
        let y = DVector::from_vec(vec![1.1, -0.2, 0.4, -1.5, 0.9, 0.3]);
        (x, y)
    }

    #[test]
    fn null_model_convention() {
        let (x, y) = toy();
        let path = CandidatePath::from_supports(vec![vec![]], vec![0, 1, 2]);
        let fam = Family::gaussian();
        let out = refit_and_score(&path, &fam, &y, &x, 3, &RefitOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        let s = out[0].scores.as_ref().unwrap();
        assert_eq!(s.model_size, 0);
        assert_eq!(s.loglik, 0.0);
        assert_eq!(s.trace_h, Some(0.0));
        assert_eq!(s.logdet_h, Some(0.0));

        let fam = Family::poisson();
        let counts = DVector::from_vec(vec![1.0, 0.0, 2.0, 0.0, 1.0, 3.0]);
        let out = refit_and_score(&path, &fam, &counts, &x, 3, &RefitOptions::default()).unwrap();
        assert_abs_diff_eq!(out[0].scores.as_ref().unwrap().loglik, -6.0, epsilon = 1e-12);
    }

    #[test]
    fn composition_matches_manual_pipeline() {
        let (x, y) = toy();
        let fam = Family::gaussian();
        let support = vec![0, 2];
        let path = CandidatePath::from_supports(vec![support.clone()], vec![0, 1, 2]);
        let out = refit_and_score(&path, &fam, &y, &x, 50, &RefitOptions::default()).unwrap();
        let fitted = qmle::fit_support(&fam, &y, &x, &support).unwrap();
        let xs = linalg::select_columns(&x, &support);
        let c = misspec::plug_in_contrast(&fam, &xs, &y, &fitted.beta_hat).unwrap();
        let manual = criteria::score_model(&fitted, Some(c.summary()), 6, 50).unwrap();
        assert_eq!(out[0].scores.as_ref().unwrap(), &manual);
    }

    #[test]
    fn failures_are_flagged_not_fatal() {
        let (mut x, y) = toy();
        let col = x.column(0).into_owned();
        x.set_column(1, &(col * 2.0));
        let path = CandidatePath::from_supports(vec![vec![0, 1], vec![0]], vec![0, 1, 2]);
        let out = refit_and_score(&path, &Family::gaussian(), &y, &x, 3, &RefitOptions::default()).unwrap();
        assert!(!out[0].is_available());
        assert!(out[0].failure.as_ref().unwrap().contains("rank"));
        assert!(out[1].is_available());
    }

    #[test]
    fn profile_dispersion_rescales() {
        let (x, y) = toy();
        let fam = Family::gaussian();
        let support = vec![1];
        let unit = score_support(0, &support, &fam, &y, &x, 3, &RefitOptions::default());
        let prof = score_support(
            0,
            &support,
            &fam,
            &y,
            &x,
            3,
            &RefitOptions {
                dispersion: Dispersion::Profile,
                intercept: false,
            },
        );
        let fitted = unit.fitted.unwrap();
        let xs = linalg::select_columns(&x, &support);
        let rss = (&y - &xs * &fitted.beta_hat).norm_squared();
        let phi = rss / 6.0;
        let s = prof.scores.unwrap();
        assert_abs_diff_eq!(s.loglik, -3.0 * phi.ln(), epsilon = 1e-12);
        let tr_unit = unit.contrast.unwrap().trace_h;
        assert_abs_diff_eq!(s.trace_h.unwrap(), tr_unit / phi, epsilon = 1e-10);
    }

    #[test]
    fn intercept_refit_is_excluded_from_size() {
        let (x, y) = toy();
        let fitted = refit(&Family::gaussian(), &y, &x, &[], true).unwrap();
        assert_eq!(fitted.model_size(), 0);
        assert_abs_diff_eq!(fitted.intercept_value(), y.mean(), epsilon = 1e-12);
        let scored = score_support(
            0,
            &[2],
            &Family::gaussian(),
            &y,
            &x,
            3,
            &RefitOptions {
                dispersion: Dispersion::Unit,
                intercept: true,
            },
        );
        assert_eq!(scored.scores.unwrap().model_size, 1);
        assert_eq!(scored.fitted.unwrap().beta_hat.len(), 2);
    }
}
