//! Canonical-link exponential-family working models.
//!
//! A working model is fixed by its cumulant function `b`: the mean is `b'`
//! and the variance is `b''`. The quasi-log-likelihood of a response vector
//! `y` under design `X` and coefficients `beta` is
//!
//! ```text
//! l(y, beta) = y'X beta - sum_i b((X beta)_i)
//! ```
//!
//! with the base-measure term dropped, so likelihoods of different models are
//! comparable up to one model-independent constant.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower bound applied to `b''` inside IRLS weights and the plug-in `A` matrix.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Default absolute cap on the natural parameter used for solver step limiting.
pub const DEFAULT_THETA_CAP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Poisson => "poisson",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" | "linear" => Ok(FamilyKind::Gaussian),
            "bernoulli" | "binomial" | "logistic" => Ok(FamilyKind::Bernoulli),
            "poisson" => Ok(FamilyKind::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// An exponential-family working model with canonical link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family {
    pub kind: FamilyKind,
    /// Cap on `|theta|` used by solvers to limit step sizes. Never applied to
    /// reported likelihoods.
    pub theta_cap: f64,
}

impl Family {
    pub fn new(kind: FamilyKind) -> Self {
        Family {
            kind,
            theta_cap: DEFAULT_THETA_CAP,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(FamilyKind::Gaussian)
    }

    pub fn bernoulli() -> Self {
        Self::new(FamilyKind::Bernoulli)
    }

    pub fn poisson() -> Self {
        Self::new(FamilyKind::Poisson)
    }

    pub fn with_theta_cap(mut self, cap: f64) -> Self {
        self.theta_cap = cap;
        self
    }

    /// `b(theta)`.
    pub fn cumulant(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.b(theta))
    }

    /// `b'(theta)`, the mean function.
    pub fn mean(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.b1(theta))
    }

    /// `max(b''(theta), VARIANCE_FLOOR)`.
    pub fn variance(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.b2_floored(theta))
    }

    /// `b''(theta)` without the floor.
    pub fn raw_variance(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.b2(theta))
    }

    /// Whether `value` lies strictly inside the range of the mean function.
    pub fn in_mean_range(&self, value: f64) -> bool {
        match self.kind {
            FamilyKind::Gaussian => value.is_finite(),
            FamilyKind::Bernoulli => value > 0.0 && value < 1.0,
            FamilyKind::Poisson => value > 0.0 && value.is_finite(),
        }
    }

    /// `y'X beta - 1'b(X beta)`.
    pub fn quasi_log_likelihood(
        &self,
        y: &DVector<f64>,
        x: &DMatrix<f64>,
        beta: &DVector<f64>,
    ) -> Result<f64> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "response has {} entries but design has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if x.ncols() != beta.len() {
            return Err(Error::Shape(format!(
                "coefficient vector has {} entries but design has {} columns",
                beta.len(),
                x.ncols()
            )));
        }
        if y.iter().chain(x.iter()).chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite input".into()));
        }
        let theta = x * beta;
        Ok(self.loglik_from_theta(y, &theta))
    }

    /// Quasi-log-likelihood from a precomputed linear predictor.
    pub fn loglik_from_theta(&self, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        y.iter()
            .zip(theta.iter())
            .map(|(&yi, &ti)| yi * ti - self.b(ti))
            .sum()
    }

    pub(crate) fn b(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 0.5 * theta * theta,
            FamilyKind::Bernoulli => (-theta.abs()).exp().ln_1p() + theta.max(0.0),
            FamilyKind::Poisson => theta.exp(),
        }
    }

    pub(crate) fn b1(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => theta,
            FamilyKind::Bernoulli => {
                if theta >= 0.0 {
                    1.0 / (1.0 + (-theta).exp())
                } else {
                    let e = theta.exp();
                    e / (1.0 + e)
                }
            }
            FamilyKind::Poisson => theta.exp(),
        }
    }

    pub(crate) fn b2(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Bernoulli => {
                // e^{-|t|} / (1 + e^{-|t|})^2 keeps precision in both tails
                let e = (-theta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            FamilyKind::Poisson => theta.exp(),
        }
    }

    pub(crate) fn b2_floored(&self, theta: f64) -> f64 {
        self.b2(theta).max(VARIANCE_FLOOR)
    }
}

fn check_finite(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("natural parameter {theta} is not finite")))
    }
}

/// How the Gaussian working model's scale enters likelihood-based scoring.
///
/// `Unit` uses the cumulant `theta^2 / 2` as is. `Profile` replaces the
/// quasi-log-likelihood by the Gaussian likelihood with the scale profiled
/// out, `-(n/2) log(RSS/n)`, and rescales the contrast matrices by the
/// fitted scale `RSS/n`. Non-Gaussian families ignore this setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dispersion {
    #[default]
    Unit,
    Profile,
}

impl Dispersion {
    pub fn name(self) -> &'static str {
        match self {
            Dispersion::Unit => "unit",
            Dispersion::Profile => "profile",
        }
    }
}

impl FromStr for Dispersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(Dispersion::Unit),
            "profile" => Ok(Dispersion::Profile),
            other => Err(Error::InvalidArgument(format!("unknown dispersion '{other}'"))),
        }
    }
}
