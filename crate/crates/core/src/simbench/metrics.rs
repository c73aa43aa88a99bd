//! Per-replication selection metrics and their aggregation.

use std::fmt;

use crate::criteria::Criterion;
use crate::qmle::FittedModel;
use crate::simbench::scenario::Dataset;

/// A row of the summary table: one criterion, or the oracle working model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Criterion(Criterion),
    Oracle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Criterion(Criterion::Aic),
        Method::Criterion(Criterion::Bic),
        Method::Criterion(Criterion::Gaic),
        Method::Criterion(Criterion::Gbic),
        Method::Criterion(Criterion::GbicPL),
        Method::Criterion(Criterion::GbicP),
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Criterion(c) => c.name(),
            Method::Oracle => "Oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What one method achieved in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `None` when no candidate had the criterion available.
    pub selected: Option<Vec<usize>>,
    pub consistent: bool,
    pub includes: bool,
    pub false_positives: usize,
    pub false_negatives_strong: usize,
    pub false_negatives_weak: usize,
    /// Test prediction error (Gaussian) or misclassification rate
    /// (Bernoulli); `None` when the selected support has no usable fit.
    pub error: Option<f64>,
}

impl Outcome {
    pub fn unavailable() -> Self {
        Outcome {
            selected: None,
            consistent: false,
            includes: false,
            false_positives: 0,
            false_negatives_strong: 0,
            false_negatives_weak: 0,
            error: None,
        }
    }
}

/// Compares `selected` with `target` and the oracle sets of `dataset`, and
/// measures the test error of `fitted` (the unpenalized refit on `selected`).
pub fn evaluate(
    selected: &[usize],
    target: &[usize],
    fitted: Option<&FittedModel>,
    dataset: &Dataset,
    classification: bool,
) -> Outcome {
    let contains = |set: &[usize], j: usize| set.binary_search(&j).is_ok();
    let oracle = &dataset.oracle;
    let includes = target.iter().all(|&j| contains(selected, j));
    Outcome {
        selected: Some(selected.to_vec()),
        consistent: selected == target,
        includes,
        false_positives: selected.iter().filter(|&&j| !contains(&oracle.m0, j)).count(),
        false_negatives_strong: oracle.strong.iter().filter(|&&j| !contains(selected, j)).count(),
        false_negatives_weak: oracle.weak.iter().filter(|&&j| !contains(selected, j)).count(),
        error: fitted.map(|f| test_error(f, dataset, classification)),
    }
}

fn test_error(fitted: &FittedModel, dataset: &Dataset, classification: bool) -> f64 {
    let test = &dataset.test;
    let offset = usize::from(fitted.intercept);
    let coef: Vec<f64> = fitted.beta_hat.iter().skip(offset).copied().collect();
    let mut eta = test.linear_predictor(&fitted.support, &coef);
    let b0 = fitted.intercept_value();
    eta.iter_mut().for_each(|e| *e += b0);
    let m = test.size as f64;
    if classification {
        let wrong = eta
            .iter()
            .zip(&test.y)
            .filter(|(e, y)| (**e > 0.0) != (**y > 0.5))
            .count();
        wrong as f64 / m
    } else {
        eta.iter().zip(&test.y).map(|(e, y)| (y - e) * (y - e)).sum::<f64>() / m
    }
}

/// Median by linear interpolation; `NaN` for an empty sample.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Robust standard deviation `IQR / 1.349`.
pub fn robust_sd(values: &[f64]) -> f64 {
    (quantile(values, 0.75) - quantile(values, 0.25)) / 1.349
}

fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    crate::path::quantile_type7(&mut v, q)
}
