//! Quasi-maximum-likelihood fitting.
//!
//! The QMLE maximizes the working-model quasi-log-likelihood whether or not
//! the working model is correct. It solves the score equation
//! `X'(y - mu(X beta)) = 0` by Newton/IRLS with step halving, starting at zero.
//! The same machinery applied to a noiseless response `E[Y]` gives the best
//! misspecified parameter `beta_{n,0}`, the KL projection of the truth onto
//! the working family.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{Family, FamilyKind};
use crate::linalg::{self, RANK_TOL};

/// Relative log-likelihood decrease tolerated in the step-halving test.
pub const ASCENT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative score tolerance; convergence is
    /// `|score|_inf <= score_tol * (1 + |X'y|_inf)`.
    pub score_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            score_tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
        }
    }
}

/// A QMLE on a given support.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    /// Column indices into the full design, strictly increasing.
    pub support: Vec<usize>,
    /// Coefficients over the support; with `intercept` the first entry is the
    /// intercept.
    pub beta_hat: DVector<f64>,
    pub intercept: bool,
    /// Quasi-log-likelihood at `beta_hat`, constant dropped.
    pub loglik: f64,
    pub score_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Quasi-log-likelihood after each accepted iteration, starting at zero.
    pub loglik_trace: Vec<f64>,
}

impl FittedModel {
    /// `|M|`: the number of covariates, not counting an intercept.
    pub fn model_size(&self) -> usize {
        self.support.len()
    }

    /// The empty model: every natural parameter is zero.
    pub fn null(family: &Family, y: &DVector<f64>) -> Self {
        let theta = DVector::zeros(y.len());
        let loglik = family.loglik_from_theta(y, &theta);
        FittedModel {
            support: Vec::new(),
            beta_hat: DVector::zeros(0),
            intercept: false,
            loglik,
            score_inf_norm: 0.0,
            iterations: 0,
            converged: true,
            loglik_trace: vec![loglik],
        }
    }

    /// Coefficients scattered into a length-`p` vector (intercept dropped).
    pub fn padded_coefficients(&self, p: usize) -> DVector<f64> {
        let mut out = DVector::zeros(p);
        let offset = usize::from(self.intercept);
        for (k, &j) in self.support.iter().enumerate() {
            out[j] = self.beta_hat[k + offset];
        }
        out
    }

    pub fn intercept_value(&self) -> f64 {
        if self.intercept {
            self.beta_hat[0]
        } else {
            0.0
        }
    }
}

/// Fits the QMLE on all columns of `x`.
pub fn fit(family: &Family, y: &DVector<f64>, x: &DMatrix<f64>) -> Result<FittedModel> {
    fit_with(family, y, x, &FitOptions::default())
}

pub fn fit_with(
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    options: &FitOptions,
) -> Result<FittedModel> {
    let out = newton(family, y, x, options)?;
    Ok(FittedModel {
        support: (0..x.ncols()).collect(),
        beta_hat: out.beta,
        intercept: false,
        loglik: out.loglik,
        score_inf_norm: out.score_inf_norm,
        iterations: out.iterations,
        converged: out.converged,
        loglik_trace: out.trace,
    })
}

/// Fits the QMLE on the columns of `x_full` listed in `support`.
pub fn fit_support(
    family: &Family,
    y: &DVector<f64>,
    x_full: &DMatrix<f64>,
    support: &[usize],
) -> Result<FittedModel> {
    validate_support(support, x_full.ncols())?;
    let xs = linalg::select_columns(x_full, support);
    let mut fitted = fit(family, y, &xs)?;
    fitted.support = support.to_vec();
    Ok(fitted)
}

/// Solves the population normal equation `X'(Ey - mu(X beta)) = 0`.
pub fn best_misspecified_params(
    family: &Family,
    ey: &DVector<f64>,
    x: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if let Some(bad) = ey.iter().find(|&&v| !family.in_mean_range(v)) {
        return Err(Error::InvalidArgument(format!(
            "expected response {bad} lies outside the open mean range of the {} family",
            family.kind
        )));
    }
    let options = FitOptions {
        score_tol: 1e-10,
        ..FitOptions::default()
    };
    let out = newton(family, ey, x, &options)?;
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            score_inf_norm: out.score_inf_norm,
        });
    }
    Ok(out.beta)
}

pub(crate) fn validate_support(support: &[usize], p: usize) -> Result<()> {
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "support indices must be strictly increasing".into(),
        ));
    }
    if let Some(&last) = support.last() {
        if last >= p {
            return Err(Error::InvalidArgument(format!(
                "support index {last} out of range for {p} columns"
            )));
        }
    }
    Ok(())
}

struct NewtonOutput {
    beta: DVector<f64>,
    loglik: f64,
    score_inf_norm: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn newton(
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    options: &FitOptions,
) -> Result<NewtonOutput> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "response has {} entries but design has {n} rows",
            y.len()
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if n < d {
        return Err(Error::InvalidArgument(format!(
            "need at least as many observations as columns (n = {n}, d = {d})"
        )));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }

    let threshold = options.score_tol * (1.0 + inf_norm(&x.tr_mul(y)));
    let divergence_limit = 10.0 * family.theta_cap;

    let mut beta = DVector::zeros(d);
    let mut theta = x * &beta;
    let mut loglik = family.loglik_from_theta(y, &theta);
    let mut trace = vec![loglik];
    let mut iterations = 0;
    let mut converged = false;
    let mut score_norm;

    loop {
        let resid = DVector::from_fn(n, |i, _| y[i] - family.b1(theta[i]));
        let score = x.tr_mul(&resid);
        score_norm = inf_norm(&score);
        if score_norm <= threshold {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }

        let w = theta.map(|t| family.b2_floored(t));
        let info = linalg::weighted_gram(x, &w);
        let chol = linalg::cholesky(&info, RANK_TOL).map_err(|f| Error::SingularDesign {
            column: f.index,
            pivot: f.pivot,
        })?;
        let mut step = linalg::cholesky_solve(&chol, &score);
        let dtheta_max = inf_norm(&(x * &step));
        if dtheta_max > family.theta_cap {
            step *= family.theta_cap / dtheta_max;
        }

        // Near the optimum the true gain of a Newton step falls below the
        // rounding error of the summed log-likelihood; such steps are
        // accepted rather than halved away.
        let slack = ASCENT_SLACK * (1.0 + loglik.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let cand = &beta + &step * t;
            let cand_theta = x * &cand;
            let cand_ll = family.loglik_from_theta(y, &cand_theta);
            if cand_ll >= loglik - slack {
                accepted = Some((cand, cand_theta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_theta, cand_ll)) = accepted else {
            // no ascent direction left at working precision
            break;
        };
        beta = cand;
        theta = cand_theta;
        loglik = cand_ll;
        trace.push(loglik);
        iterations += 1;

        let eta_max = inf_norm(&theta);
        if eta_max > divergence_limit {
            return Err(Error::Divergence {
                iterations,
                max_eta: eta_max,
                limit: divergence_limit,
                last_iterate: beta.iter().copied().collect(),
            });
        }
    }

    // Under separation the score vanishes only as the fitted means approach
    // the boundary of the mean range, so a solution sitting past the cap is
    // an escape to infinity rather than an interior optimum.
    if family.kind != FamilyKind::Gaussian {
        let eta_max = inf_norm(&theta);
        if eta_max > family.theta_cap {
            return Err(Error::Divergence {
                iterations,
                max_eta: eta_max,
                limit: family.theta_cap,
                last_iterate: beta.iter().copied().collect(),
            });
        }
    }

    Ok(NewtonOutput {
        beta,
        loglik,
        score_inf_norm: score_norm,
        iterations,
        converged,
        trace,
    })
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
