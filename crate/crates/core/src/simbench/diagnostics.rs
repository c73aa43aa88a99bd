//! Monte Carlo checks of the large-sample theory on a fixed design.
//!
//! Both diagnostics hold the design and the truth `(E[y], var(y))` fixed and
//! redraw only the response.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::linalg;
use crate::misspec;
use crate::qmle;
use crate::simbench::scenario::{generate, Scenario, ScenarioConfig};
use crate::simbench::seed::hash_keys;

pub const MIN_NORMALITY_REPS: usize = 100;
pub const KS_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// `y = E[y] + sqrt(var_y) z` with standard normal `z`.
    Gaussian,
    /// `y ~ Bernoulli(E[y])`.
    Bernoulli,
}

/// The data-generating distribution on a fixed design.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub ey: DVector<f64>,
    pub var_y: DVector<f64>,
    pub noise: NoiseModel,
}

impl Truth {
    /// Responses driven by `draws` (normals or uniforms), optionally
    /// reflected: `-z` or `1 - u`.
    fn response(&self, draws: &[f64], reflect: bool) -> DVector<f64> {
        DVector::from_fn(self.ey.len(), |i, _| match self.noise {
            NoiseModel::Gaussian => {
                let z = if reflect { -draws[i] } else { draws[i] };
                self.ey[i] + self.var_y[i].sqrt() * z
            }
            NoiseModel::Bernoulli => {
                let u = if reflect { 1.0 - draws[i] } else { draws[i] };
                f64::from(u < self.ey[i])
            }
        })
    }

    fn draws<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.ey.len())
            .map(|_| match self.noise {
                NoiseModel::Gaussian => StandardNormal.sample(rng),
                NoiseModel::Bernoulli => rng.random::<f64>(),
            })
            .collect()
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if self.ey.len() != x.nrows() || self.var_y.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "truth has {} / {} entries but design has {} rows",
                self.ey.len(),
                self.var_y.len(),
                x.nrows()
            )));
        }
        Ok(())
    }
}

/// A fixed design with its truth, taken from the first `d` columns of a
/// scenario at sample size `n`.
pub fn diagnostic_setup(
    scenario: Scenario,
    n: usize,
    d: usize,
    sigma: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, Truth)> {
    let mut config = ScenarioConfig::new(scenario, d.max(10));
    config.n = n;
    config.sigma = sigma;
    config.test_size = 1;
    config.master_seed = seed;
    let data = generate(&config, 0)?;
    if d > data.x.ncols() {
        return Err(Error::InvalidArgument(format!("d = {d} exceeds the scenario design")));
    }
    let noise = if scenario.is_classification() {
        NoiseModel::Bernoulli
    } else {
        NoiseModel::Gaussian
    };
    Ok((
        data.x.columns(0, d).into_owned(),
        Truth {
            ey: data.ey,
            var_y: data.var_y,
            noise,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlDiagnostic {
    /// Mean of `E[y]' X beta_hat - 1' b(X beta_hat)`.
    pub lhs: f64,
    /// Mean of `l(y, beta_hat)` minus `tr(H)`.
    pub rhs: f64,
    pub rel_gap: f64,
    pub trace_h: f64,
    pub n_reps: usize,
}

/// Checks the expansion `E eta(beta_hat) = E l(y, beta_hat) - tr(H)`.
///
/// Replications come in antithetic pairs (`z` and `-z`, or `u` and `1 - u`),
/// which cancels the term linear in the noise and leaves a much smaller
/// Monte Carlo error than independent draws.
pub fn kl_expansion_diagnostic(
    family: &Family,
    x: &DMatrix<f64>,
    truth: &Truth,
    n_reps: usize,
    seed: u64,
) -> Result<KlDiagnostic> {
    if n_reps == 0 {
        return Err(Error::InsufficientReplications { got: 0, min: 1 });
    }
    truth.check(x)?;
    let trace_h = misspec::true_contrast(family, x, &truth.ey, &truth.var_y)?.trace_h;

    let pairs = n_reps.div_ceil(2);
    let per_pair: Vec<Result<Vec<(f64, f64)>>> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(hash_keys(&[seed, k as u64, 0x6b6c]));
            let draws = truth.draws(&mut rng);
            let members = if 2 * k + 1 < n_reps { 2 } else { 1 };
            (0..members)
                .map(|m| {
                    let y = truth.response(&draws, m == 1);
                    let fitted = qmle::fit(family, &y, x)?;
                    let theta = x * &fitted.beta_hat;
                    let cumulant: f64 = theta.iter().map(|&t| family.b(t)).sum();
                    let eta = truth.ey.dot(&theta) - cumulant;
                    Ok((eta, fitted.loglik))
                })
                .collect()
        })
        .collect();

    let (mut sum_eta, mut sum_ll) = (0.0, 0.0);
    for pair in per_pair {
        for (eta, ll) in pair? {
            sum_eta += eta;
            sum_ll += ll;
        }
    }
    let lhs = sum_eta / n_reps as f64;
    let rhs = sum_ll / n_reps as f64 - trace_h;
    Ok(KlDiagnostic {
        lhs,
        rhs,
        rel_gap: (lhs - rhs).abs() / trace_h.max(1.0),
        trace_h,
        n_reps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityDiagnostic {
    pub ks_stat: f64,
    pub p_value: f64,
    pub pass: bool,
    /// Standardized projections, one per replication.
    pub z: Vec<f64>,
}

/// Kolmogorov-Smirnov test of `z = a' B^{-1/2} A (beta_hat - beta_0)` against
/// the standard normal, with `A`, `B` the population matrices at `beta_0`.
pub fn normality_diagnostic(
    family: &Family,
    x: &DMatrix<f64>,
    truth: &Truth,
    direction: &DVector<f64>,
    n_reps: usize,
    seed: u64,
) -> Result<NormalityDiagnostic> {
    if n_reps < MIN_NORMALITY_REPS {
        return Err(Error::InsufficientReplications {
            got: n_reps,
            min: MIN_NORMALITY_REPS,
        });
    }
    truth.check(x)?;
    let d = x.ncols();
    if direction.len() != d {
        return Err(Error::Shape(format!(
            "direction has {} entries but design has {d} columns",
            direction.len()
        )));
    }
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("direction must be a nonzero finite vector".into()));
    }
    let a_dir = direction / norm;

    let beta0 = qmle::best_misspecified_params(family, &truth.ey, x)?;
    let a_n = misspec::estimate_a(family, x, &beta0)?;
    let b_n = linalg::weighted_gram(x, &truth.var_y);
    let b_inv_sqrt = linalg::inverse_sqrt(&b_n).ok_or(Error::NotPositiveDefinite {
        index: 0,
        pivot: linalg::symmetric_eigenvalues(&b_n)[0],
    })?;
    // row vector a' B^{-1/2} A
    let weights = (a_dir.transpose() * b_inv_sqrt * a_n).transpose();

    let z: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(hash_keys(&[seed, r as u64, 0x6e6f]));
            let draws = truth.draws(&mut rng);
            let y = truth.response(&draws, false);
            let fitted = qmle::fit(family, &y, x)?;
            Ok(weights.dot(&(&fitted.beta_hat - &beta0)))
        })
        .collect::<Result<Vec<f64>>>()?;

    let ks_stat = ks_statistic_normal(&z);
    let p_value = kolmogorov_p_value((n_reps as f64).sqrt() * ks_stat);
    Ok(NormalityDiagnostic {
        ks_stat,
        p_value,
        pass: p_value >= KS_ALPHA,
        z,
    })
}

/// One-sample KS distance between the empirical law of `z` and N(0, 1).
pub fn ks_statistic_normal(z: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal.cdf(v);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail `P(K > t) = 2 sum_k (-1)^(k-1) exp(-2 k^2 t^2)`.
pub fn kolmogorov_p_value(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // series converges slowly here; the tail is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_reference_values() {
        // standard table values of the Kolmogorov distribution
        assert!((kolmogorov_p_value(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_p_value(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_p_value(0.0), 1.0);
    }

    #[test]
    fn ks_of_perfect_quantiles_is_small() {
        let normal = Normal::standard();
        let m = 1000;
        let z: Vec<f64> = (0..m)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / m as f64))
            .collect();
        assert!((ks_statistic_normal(&z) - 0.5 / m as f64).abs() < 1e-9);
    }

    #[test]
    fn replication_guards() {
        let (x, truth) = diagnostic_setup(Scenario::MultipleIndex, 50, 3, 0.25, 1).unwrap();
        let fam = Family::gaussian();
        assert!(matches!(
            kl_expansion_diagnostic(&fam, &x, &truth, 0, 1),
            Err(Error::InsufficientReplications { .. })
        ));
        let a = DVector::from_element(3, 1.0);
        assert!(matches!(
            normality_diagnostic(&fam, &x, &truth, &a, 10, 1),
            Err(Error::InsufficientReplications { .. })
        ));
    }
}
