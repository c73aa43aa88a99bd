//! Information criteria for fitted candidate models.
//!
//! With `l` the maximized quasi-log-likelihood, `|M|` the model size, `n` the
//! sample size, `p* = max(n, p)`, and `H` the covariance contrast:
//!
//! ```text
//! AIC     = -2 l + 2 |M|
//! BIC     = -2 l + log(n) |M|
//! GAIC    = -2 l + 2 tr(H)
//! GBIC    = -2 l + log(n) |M| - log|H|
//! GBICp-L = -2 l + log(n) |M| + tr(H) - log|H|
//! GBICp   = -2 l + 2 log(p*) |M| + tr(H) - log|H|
//! ```
//!
//! Additive constants of the underlying expansions are dropped. Smaller is
//! better for every criterion.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::misspec::ContrastSummary;
use crate::qmle::FittedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    Aic,
    Bic,
    Gaic,
    Gbic,
    GbicPL,
    GbicP,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::Aic,
        Criterion::Bic,
        Criterion::Gaic,
        Criterion::Gbic,
        Criterion::GbicPL,
        Criterion::GbicP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
            Criterion::Gaic => "GAIC",
            Criterion::Gbic => "GBIC",
            Criterion::GbicPL => "GBICp-L",
            Criterion::GbicP => "GBICp",
        }
    }

    /// Whether the criterion needs the covariance contrast.
    pub fn is_generalized(self) -> bool {
        !matches!(self, Criterion::Aic | Criterion::Bic)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "gaic" => Ok(Criterion::Gaic),
            "gbic" => Ok(Criterion::Gbic),
            "gbicpl" => Ok(Criterion::GbicPL),
            "gbicp" => Ok(Criterion::GbicP),
            _ => Err(Error::InvalidArgument(format!("unknown criterion '{s}'"))),
        }
    }
}

/// All six criteria for one candidate, with the inputs that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionScores {
    pub model_size: usize,
    pub loglik: f64,
    pub trace_h: Option<f64>,
    pub logdet_h: Option<f64>,
    pub aic: f64,
    pub bic: f64,
    pub gaic: Option<f64>,
    pub gbic: Option<f64>,
    pub gbicp_l: Option<f64>,
    pub gbicp: Option<f64>,
    pub n: usize,
    pub p: usize,
    pub p_star: usize,
}

impl CriterionScores {
    pub fn get(&self, criterion: Criterion) -> Option<f64> {
        match criterion {
            Criterion::Aic => Some(self.aic),
            Criterion::Bic => Some(self.bic),
            Criterion::Gaic => self.gaic,
            Criterion::Gbic => self.gbic,
            Criterion::GbicPL => self.gbicp_l,
            Criterion::GbicP => self.gbicp,
        }
    }

    pub fn generalized_available(&self) -> bool {
        self.trace_h.is_some()
    }
}

/// Scores a fitted model. `contrast` is `None` when the contrast was
/// degenerate; generalized criteria are then unavailable, as they are when
/// the fit did not converge.
pub fn score_model(
    fitted: &FittedModel,
    contrast: Option<ContrastSummary>,
    n: usize,
    p: usize,
) -> Result<CriterionScores> {
    if let Some(&last) = fitted.support.last() {
        if last >= p {
            return Err(Error::InvalidArgument(format!(
                "support index {last} exceeds the {p} available covariates"
            )));
        }
    }
    let contrast = if fitted.converged { contrast } else { None };
    score_components(fitted.loglik, fitted.model_size(), contrast, n, p)
}

/// Criterion arithmetic from raw components.
pub fn score_components(
    loglik: f64,
    model_size: usize,
    contrast: Option<ContrastSummary>,
    n: usize,
    p: usize,
) -> Result<CriterionScores> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let p_star = n.max(p);
    let size = model_size as f64;
    let log_n = (n as f64).ln();
    let log_p_star = (p_star as f64).ln();
    let fit_term = -2.0 * loglik;
    let general = |f: fn(f64, f64) -> f64| contrast.map(|c| f(c.trace_h, c.logdet_h));

    Ok(CriterionScores {
        model_size,
        loglik,
        trace_h: contrast.map(|c| c.trace_h),
        logdet_h: contrast.map(|c| c.logdet_h),
        aic: fit_term + 2.0 * size,
        bic: fit_term + log_n * size,
        gaic: contrast.map(|c| fit_term + 2.0 * c.trace_h),
        gbic: contrast.map(|c| fit_term + log_n * size - c.logdet_h),
        gbicp_l: general(|tr, ld| tr - ld).map(|m| fit_term + log_n * size + m),
        gbicp: general(|tr, ld| tr - ld).map(|m| fit_term + 2.0 * log_p_star * size + m),
        n,
        p,
        p_star,
    })
}

/// Picks the candidate minimizing `criterion`. Ties go to the smaller model,
/// then to the smaller candidate id.
pub fn select(candidates: &[(usize, CriterionScores)], criterion: Criterion) -> Result<usize> {
    candidates
        .iter()
        .filter_map(|(id, s)| s.get(criterion).map(|v| (v, s.model_size, *id)))
        .filter(|(v, _, _)| !v.is_nan())
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        })
        .map(|(_, _, id)| id)
        .ok_or(Error::NoSelectableModel(criterion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scores(ll: f64, size: usize, tr: f64, ld: f64, n: usize, p: usize) -> CriterionScores {
        score_components(
            ll,
            size,
            Some(ContrastSummary {
                trace_h: tr,
                logdet_h: ld,
            }),
            n,
            p,
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_example() {
        let s = scores(-50.0, 3, 3.5, -0.4, 100, 1000);
        assert_eq!(s.p_star, 1000);
        assert_abs_diff_eq!(s.aic, 106.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.bic, 113.8155106, epsilon = 1e-7);
        assert_abs_diff_eq!(s.gaic.unwrap(), 107.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gbic.unwrap(), 114.2155106, epsilon = 1e-7);
        assert_abs_diff_eq!(s.gbicp_l.unwrap(), 117.7155106, epsilon = 1e-7);
        // 100 + 6 log(1000) + 3.5 + 0.4
        assert_abs_diff_eq!(s.gbicp.unwrap(), 145.3465317, epsilon = 1e-7);
    }

    #[test]
    fn identity_contrast_reduces_to_classical() {
        let s = scores(-12.5, 4, 4.0, 0.0, 80, 300);
        assert_eq!(s.gaic.unwrap(), s.aic);
        assert_eq!(s.gbicp_l.unwrap(), s.bic + 4.0);
    }

    #[test]
    fn low_dimensional_branch_uses_n() {
        let s = scores(-7.0, 2, 2.5, 0.1, 50, 20);
        assert_eq!(s.p_star, 50);
        let expected = 14.0 + 2.0 * 50f64.ln() * 2.0 + 2.5 - 0.1;
        assert_abs_diff_eq!(s.gbicp.unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn unavailable_contrast_keeps_classical() {
        let s = score_components(-3.0, 1, None, 10, 10).unwrap();
        assert_eq!(s.aic, 8.0);
        assert!(s.gaic.is_none() && s.gbic.is_none() && s.gbicp_l.is_none() && s.gbicp.is_none());
        assert!(s.trace_h.is_none());
    }

    #[test]
    fn unconverged_fit_loses_generalized_criteria() {
        let fitted = FittedModel {
            support: vec![0, 3],
            beta_hat: nalgebra::DVector::zeros(2),
            intercept: false,
            loglik: -4.0,
            score_inf_norm: 1.0,
            iterations: 100,
            converged: false,
            loglik_trace: vec![],
        };
        let s = score_model(&fitted, Some(ContrastSummary::identity(2)), 20, 10).unwrap();
        assert!(s.gbicp.is_none());
        assert_eq!(s.aic, 12.0);
        assert!(score_model(&fitted, None, 20, 3).is_err());
    }

    #[test]
    fn select_minimum_and_ties() {
        let a = scores(-5.0, 4, 1.0, 0.0, 100, 200);
        let mut b = a.clone();
        b.gbicp = Some(a.gbicp.unwrap() + 2.0);
        assert_eq!(select(&[(0, a.clone()), (1, b.clone())], Criterion::GbicP).unwrap(), 0);

        let mut small = a.clone();
        small.model_size = 2;
        assert_eq!(select(&[(0, a.clone()), (1, small)], Criterion::GbicP).unwrap(), 1);
        assert_eq!(select(&[(7, a.clone()), (3, a.clone())], Criterion::GbicP).unwrap(), 3);
    }

    #[test]
    fn select_skips_unavailable() {
        let ok = scores(-5.0, 1, 1.0, 0.0, 100, 200);
        let unavailable = score_components(-1.0, 1, None, 100, 200).unwrap();
        assert_eq!(
            select(&[(0, unavailable.clone()), (1, ok)], Criterion::Gbic).unwrap(),
            1
        );
        assert!(matches!(
            select(&[(0, unavailable.clone())], Criterion::GbicPL),
            Err(Error::NoSelectableModel(Criterion::GbicPL))
        ));
        assert_eq!(select(&[(0, unavailable)], Criterion::Bic).unwrap(), 0);
        assert!(select(&[], Criterion::Aic).is_err());
    }

    #[test]
    fn criterion_names_round_trip() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
        }
        assert_eq!("gbic_p".parse::<Criterion>().unwrap(), Criterion::GbicP);
    }
}
