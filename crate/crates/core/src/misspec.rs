//! Covariance contrast estimation.
//!
//! `A` is the working-model information `X' Sigma(X beta) X` and `B` the
//! covariance of the score under the truth, `X' cov(Y) X`. Their contrast
//! `H = A^{-1} B` is the identity under correct specification and otherwise
//! measures how far the working model's curvature misstates the sampling
//! variability. Criteria only need `tr(H)` and `log|H|`, which are read off
//! the generalized eigenvalues of the pencil `(B, A)`: with `A = L L'` these
//! are the eigenvalues of the symmetric matrix `L^{-1} B L^{-T}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::linalg::{self, RANK_TOL};
use crate::qmle;

/// Plug-in (or population) `A`, `B`, and the summary of `H = A^{-1} B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastEstimate {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    /// Eigenvalues of `A^{-1} B`, ascending.
    pub gen_eigs: DVector<f64>,
    pub trace_h: f64,
    pub logdet_h: f64,
}

/// The two numbers criteria consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastSummary {
    pub trace_h: f64,
    pub logdet_h: f64,
}

impl ContrastSummary {
    /// `H = I_d`.
    pub fn identity(d: usize) -> Self {
        ContrastSummary {
            trace_h: d as f64,
            logdet_h: 0.0,
        }
    }
}

impl ContrastEstimate {
    pub fn summary(&self) -> ContrastSummary {
        ContrastSummary {
            trace_h: self.trace_h,
            logdet_h: self.logdet_h,
        }
    }

    pub fn dim(&self) -> usize {
        self.gen_eigs.len()
    }
}

fn check_design(x: &DMatrix<f64>, n: usize, beta_len: usize) -> Result<()> {
    if x.nrows() != n {
        return Err(Error::Shape(format!(
            "vector has {n} entries but design has {} rows",
            x.nrows()
        )));
    }
    if x.ncols() != beta_len {
        return Err(Error::Shape(format!(
            "coefficient vector has {beta_len} entries but design has {} columns",
            x.ncols()
        )));
    }
    Ok(())
}

/// `A_hat = X' Sigma(X beta_hat) X` with floored variances.
pub fn estimate_a(family: &Family, x: &DMatrix<f64>, beta_hat: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_design(x, x.nrows(), beta_hat.len())?;
    let theta = x * beta_hat;
    let w = theta.map(|t| family.b2_floored(t));
    Ok(linalg::weighted_gram(x, &w))
}

/// `B_hat = X' diag(r o r) X` with `r = y - mu(X beta_hat)`.
pub fn estimate_b(
    family: &Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_hat: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_design(x, y.len(), beta_hat.len())?;
    let theta = x * beta_hat;
    let r2 = DVector::from_fn(y.len(), |i, _| {
        let r = y[i] - family.b1(theta[i]);
        r * r
    });
    Ok(linalg::weighted_gram(x, &r2))
}

/// Summarizes `H = A^{-1} B` through the generalized eigenvalues of `(B, A)`.
///
/// Fails with [`Error::NotPositiveDefinite`] when `A` has no Cholesky factor
/// and with [`Error::DegenerateContrast`] when some eigenvalue is at or below
/// `1e-12 * max(largest eigenvalue, 1)`.
pub fn contrast(a_hat: &DMatrix<f64>, b_hat: &DMatrix<f64>) -> Result<ContrastEstimate> {
    let d = a_hat.nrows();
    if a_hat.ncols() != d || b_hat.shape() != (d, d) {
        return Err(Error::Shape(format!(
            "contrast needs two square matrices of equal size, got {:?} and {:?}",
            a_hat.shape(),
            b_hat.shape()
        )));
    }
    let l = linalg::cholesky(a_hat, RANK_TOL).map_err(|f| Error::NotPositiveDefinite {
        index: f.index,
        pivot: f.pivot,
    })?;
    let whitened = linalg::whiten(&l, b_hat);
    let gen_eigs = linalg::symmetric_eigenvalues(&whitened);
    if d > 0 {
        let largest = gen_eigs[d - 1];
        let floor = 1e-12 * largest.max(1.0);
        if !(gen_eigs[0] > floor) {
            return Err(Error::DegenerateContrast {
                min_eig: gen_eigs[0],
                floor,
            });
        }
    }
    let trace_h = gen_eigs.iter().sum();
    let logdet_h = gen_eigs.iter().map(|v| v.ln()).sum();
    Ok(ContrastEstimate {
        a_hat: a_hat.clone(),
        b_hat: b_hat.clone(),
        gen_eigs,
        trace_h,
        logdet_h,
    })
}

/// Plug-in contrast at a fitted coefficient vector.
pub fn plug_in_contrast(
    family: &Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_hat: &DVector<f64>,
) -> Result<ContrastEstimate> {
    let a = estimate_a(family, x, beta_hat)?;
    let b = estimate_b(family, x, y, beta_hat)?;
    contrast(&a, &b)
}

/// Population contrast from a known truth: `A_n` at `beta_{n,0}` and
/// `B_n = X' diag(var_y) X`.
pub fn true_contrast(
    family: &Family,
    x: &DMatrix<f64>,
    ey: &DVector<f64>,
    var_y: &DVector<f64>,
) -> Result<ContrastEstimate> {
    if var_y.len() != x.nrows() || ey.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "truth vectors have {} and {} entries but design has {} rows",
            ey.len(),
            var_y.len(),
            x.nrows()
        )));
    }
    if let Some(bad) = var_y.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("response variance {bad} is not positive")));
    }
    let beta0 = qmle::best_misspecified_params(family, ey, x)?;
    let a = estimate_a(family, x, &beta0)?;
    let b = linalg::weighted_gram(x, var_y);
    contrast(&a, &b)
}
