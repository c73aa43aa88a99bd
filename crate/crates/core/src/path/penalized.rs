//! Penalized regularization paths.
//!
//! Minimizes `-(1/n) l(y, beta) + sum_j p(|beta_j|)` over a descending grid of
//! `lambda` with warm starts. Columns are rescaled internally so that
//! `sum_i x_ij^2 = n`; supports are reported in the caller's column indices.
//!
//! The SICA penalty `p(t) = lambda (a + 1) t / (a + t)` is handled by local
//! linear approximation: each round replaces it with the weighted L1 penalty
//! `p'(|beta_j|) |beta_j|` at the current iterate and solves that problem by
//! coordinate descent on an IRLS quadratic. The lasso is the one-round case
//! with constant weights.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{Family, FamilyKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Lasso,
    Sica { a: f64 },
}

impl Penalty {
    pub fn value(&self, t: f64, lambda: f64) -> f64 {
        let t = t.abs();
        match *self {
            Penalty::Lasso => lambda * t,
            Penalty::Sica { a } => lambda * (a + 1.0) * t / (a + t),
        }
    }

    /// `p'(t)` for `t >= 0`.
    pub fn derivative(&self, t: f64, lambda: f64) -> f64 {
        let t = t.abs();
        match *self {
            Penalty::Lasso => lambda,
            Penalty::Sica { a } => lambda * (a + 1.0) * a / ((a + t) * (a + t)),
        }
    }

    /// `p'(0) / lambda`.
    fn slope_at_zero(&self) -> f64 {
        match *self {
            Penalty::Lasso => 1.0,
            Penalty::Sica { a } => (a + 1.0) / a,
        }
    }

    fn lla_rounds(&self, max_rounds: usize) -> usize {
        match self {
            Penalty::Lasso => 1,
            Penalty::Sica { .. } => max_rounds.max(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Penalty::Sica { a } = *self {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "SICA shape parameter must be positive, got {a}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub max_lla_rounds: usize,
    /// Coordinate sweeps allowed per quadratic subproblem.
    pub max_sweeps: usize,
    /// IRLS updates allowed per LLA round (non-Gaussian families).
    pub max_irls: usize,
    /// Convergence threshold on the largest coefficient change.
    pub tol: f64,
    /// Explicit grid, overriding `n_lambda`/`lambda_min_ratio`. Sorted
    /// descending before use.
    pub lambdas: Option<Vec<f64>>,
    /// Adds an unpenalized, always-active intercept.
    pub intercept: bool,
    /// Stops the path once a support grows beyond this size. The bound
    /// `min(n - 1, |screen_set|)` always applies.
    pub max_support: Option<usize>,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            n_lambda: 100,
            lambda_min_ratio: 0.01,
            max_lla_rounds: 3,
            max_sweeps: 200,
            max_irls: 50,
            tol: 1e-7,
            lambdas: None,
            intercept: false,
            max_support: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    /// Distinct supports in order of first appearance, each ascending.
    pub supports: Vec<Vec<usize>>,
    /// The grid actually used, descending.
    pub lambda_grid: Vec<f64>,
    /// Penalty level at which each support first appeared.
    pub support_lambdas: Vec<f64>,
    pub screen_set: Vec<usize>,
    /// Grid positions whose inner solve did not converge.
    pub skipped: Vec<usize>,
    pub lambda_max: f64,
}

impl CandidatePath {
    /// A path holding the given supports, for scoring hand-picked candidates.
    pub fn from_supports(supports: Vec<Vec<usize>>, screen_set: Vec<usize>) -> Self {
        let mut seen = HashSet::new();
        let supports: Vec<Vec<usize>> = supports
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .filter(|s| seen.insert(s.clone()))
            .collect();
        CandidatePath {
            support_lambdas: vec![f64::NAN; supports.len()],
            supports,
            lambda_grid: Vec::new(),
            screen_set,
            skipped: Vec::new(),
            lambda_max: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }
}

/// SICA path over all columns of `x_screened`.
pub fn sica_path(
    family: &Family,
    y: &DVector<f64>,
    x_screened: &DMatrix<f64>,
    config: &PathConfig,
    a: f64,
) -> Result<CandidatePath> {
    let all: Vec<usize> = (0..x_screened.ncols()).collect();
    penalized_path(family, y, x_screened, &all, Penalty::Sica { a }, config)
}

/// Lasso path over all columns of `x_screened`.
pub fn lasso_path(
    family: &Family,
    y: &DVector<f64>,
    x_screened: &DMatrix<f64>,
    config: &PathConfig,
) -> Result<CandidatePath> {
    let all: Vec<usize> = (0..x_screened.ncols()).collect();
    penalized_path(family, y, x_screened, &all, Penalty::Lasso, config)
}

/// Path over the columns of `x` listed in `screen_set`; supports are
/// reported as indices into `x`.
pub fn penalized_path(
    family: &Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    screen_set: &[usize],
    penalty: Penalty,
    config: &PathConfig,
) -> Result<CandidatePath> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "response has {} entries but design has {n} rows",
            y.len()
        )));
    }
    penalty.validate()?;
    crate::qmle::validate_support(screen_set, x.ncols())?;
    if config.lambdas.is_none() && config.n_lambda < 2 {
        return Err(Error::InvalidArgument("n_lambda must be at least 2".into()));
    }
    if !(config.lambda_min_ratio > 0.0 && config.lambda_min_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_min_ratio must lie in (0, 1), got {}",
            config.lambda_min_ratio
        )));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }

    let mut solver = Solver::new(family, y, x, screen_set, config)?;
    let slope = penalty.slope_at_zero();
    let lambda_max = solver.max_gradient() / slope;

    let grid: Vec<f64> = match &config.lambdas {
        Some(l) => {
            if l.is_empty() || l.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(
                    "explicit lambda grid must be non-empty and non-negative".into(),
                ));
            }
            let mut l = l.clone();
            l.sort_by(|a, b| b.total_cmp(a));
            l
        }
        None => {
            let steps = (config.n_lambda - 1) as f64;
            (0..config.n_lambda)
                .map(|k| lambda_max * config.lambda_min_ratio.powf(k as f64 / steps))
                .collect()
        }
    };

    let q = screen_set.len();
    let mut max_support = q.min(n.saturating_sub(1));
    if let Some(cap) = config.max_support {
        max_support = max_support.min(cap);
    }
    let divergence_limit = 10.0 * family.theta_cap;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut supports = Vec::new();
    let mut support_lambdas = Vec::new();
    let mut skipped = Vec::new();

    for (k, &lambda) in grid.iter().enumerate() {
        let converged = solver.solve(lambda, penalty);
        let support = solver.support();
        if support.len() > max_support {
            log::debug!("path stopped at lambda {lambda:.4e}: support size {}", support.len());
            break;
        }
        if !converged {
            log::warn!("inner solve did not converge at lambda {lambda:.4e}; support skipped");
            skipped.push(k);
        } else if seen.insert(support.clone()) {
            supports.push(support);
            support_lambdas.push(lambda);
        }
        if solver.max_abs_eta() > divergence_limit {
            log::debug!("path stopped at lambda {lambda:.4e}: linear predictor saturated");
            break;
        }
    }

    Ok(CandidatePath {
        supports,
        lambda_grid: grid,
        support_lambdas,
        screen_set: screen_set.to_vec(),
        skipped,
        lambda_max,
    })
}

struct Solver<'a> {
    family: &'a Family,
    config: &'a PathConfig,
    y: Vec<f64>,
    n: usize,
    /// Rescaled screened columns, column-major.
    cols: Vec<f64>,
    /// Usable columns (nonzero scale).
    live: Vec<bool>,
    /// `sum_i x_ij^2 / n` of the rescaled columns.
    col_sq: Vec<f64>,
    screen_set: Vec<usize>,
    beta: Vec<f64>,
    b0: f64,
    eta: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(
        family: &'a Family,
        y: &DVector<f64>,
        x: &DMatrix<f64>,
        screen_set: &[usize],
        config: &'a PathConfig,
    ) -> Result<Self> {
        let n = x.nrows();
        let q = screen_set.len();
        let mut cols = Vec::with_capacity(n * q);
        let mut live = Vec::with_capacity(q);
        let mut col_sq = Vec::with_capacity(q);
        for &j in screen_set {
            let col = x.column(j);
            let scale = (col.norm_squared() / n as f64).sqrt();
            if scale > 0.0 {
                cols.extend(col.iter().map(|v| v / scale));
                let c = &cols[cols.len() - n..];
                col_sq.push(c.iter().map(|v| v * v).sum::<f64>() / n as f64);
                live.push(true);
            } else {
                cols.extend(std::iter::repeat_n(0.0, n));
                col_sq.push(0.0);
                live.push(false);
            }
        }
        let y: Vec<f64> = y.iter().copied().collect();
        let b0 = if config.intercept {
            null_intercept(family, &y)?
        } else {
            0.0
        };
        Ok(Solver {
            family,
            config,
            n,
            cols,
            live,
            col_sq,
            screen_set: screen_set.to_vec(),
            beta: vec![0.0; q],
            b0,
            eta: vec![b0; n],
            y,
        })
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// `max_j |x_j'(y - mu)| / n` at the current (all-zero) iterate.
    fn max_gradient(&self) -> f64 {
        let resid: Vec<f64> = (0..self.n)
            .map(|i| self.y[i] - self.family.b1(self.eta[i]))
            .collect();
        (0..self.beta.len())
            .filter(|&j| self.live[j])
            .map(|j| dot(self.col(j), &resid).abs() / self.n as f64)
            .fold(0.0, f64::max)
    }

    fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| self.screen_set[j])
            .collect()
    }

    fn max_abs_eta(&self) -> f64 {
        self.eta.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn solve(&mut self, lambda: f64, penalty: Penalty) -> bool {
        let rounds = penalty.lla_rounds(self.config.max_lla_rounds);
        let mut converged = true;
        for _ in 0..rounds {
            let weights: Vec<f64> = self
                .beta
                .iter()
                .map(|b| penalty.derivative(b.abs(), lambda))
                .collect();
            let before = self.beta.clone();
            converged = match self.family.kind {
                FamilyKind::Gaussian => self.solve_gaussian(&weights),
                _ => self.solve_irls(&weights),
            };
            let change = max_abs_diff(&before, &self.beta);
            if change < self.config.tol {
                break;
            }
        }
        converged
    }

    fn solve_gaussian(&mut self, weights: &[f64]) -> bool {
        let mut r: Vec<f64> = (0..self.n).map(|i| self.y[i] - self.eta[i]).collect();
        let h = self.col_sq.clone();
        let h0 = 1.0;
        let ok = self.coordinate_descent(None, &mut r, weights, &h, h0);
        for i in 0..self.n {
            self.eta[i] = self.y[i] - r[i];
        }
        ok
    }

    fn solve_irls(&mut self, weights: &[f64]) -> bool {
        let n = self.n;
        let cap = self.family.theta_cap;
        for _ in 0..self.config.max_irls {
            let obj_old = self.objective(&self.eta, &self.beta, weights);
            let w: Vec<f64> = self
                .eta
                .iter()
                .map(|&e| self.family.b2_floored(e.clamp(-cap, cap)))
                .collect();
            let mut r: Vec<f64> = (0..n)
                .map(|i| (self.y[i] - self.family.b1(self.eta[i])) / w[i])
                .collect();
            let h: Vec<f64> = (0..self.beta.len())
                .map(|j| {
                    if self.live[j] {
                        self.col(j).iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / n as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            let h0 = w.iter().sum::<f64>() / n as f64;

            let beta_old = self.beta.clone();
            let b0_old = self.b0;
            let cd_ok = self.coordinate_descent(Some(&w), &mut r, weights, &h, h0);
            let beta_new = self.beta.clone();
            let b0_new = self.b0;

            // step halving on the surrogate objective
            let mut t = 1.0;
            let mut eta = self.linear_predictor(&beta_new, b0_new);
            let mut obj = self.objective(&eta, &beta_new, weights);
            let mut halvings = 0;
            while !(obj <= obj_old + 1e-12 * (1.0 + obj_old.abs())) && halvings < 30 {
                t *= 0.5;
                halvings += 1;
                for j in 0..self.beta.len() {
                    self.beta[j] = beta_old[j] + t * (beta_new[j] - beta_old[j]);
                }
                self.b0 = b0_old + t * (b0_new - b0_old);
                eta = self.linear_predictor(&self.beta, self.b0);
                obj = self.objective(&eta, &self.beta, weights);
            }
            self.eta = eta;

            let change = max_abs_diff(&beta_old, &self.beta).max((self.b0 - b0_old).abs());
            if change < self.config.tol {
                return cd_ok;
            }
            if self.max_abs_eta() > 10.0 * cap {
                return false;
            }
        }
        false
    }

    /// Weighted-L1 coordinate descent on `(1/2n) sum_i w_i (r_i - x_i'delta)^2`,
    /// updating `beta`, `b0` and the residual in place. Full sweeps alternate
    /// with sweeps over the active set until a full sweep moves nothing by more
    /// than the tolerance.
    fn coordinate_descent(
        &mut self,
        w: Option<&[f64]>,
        r: &mut [f64],
        penalties: &[f64],
        h: &[f64],
        h0: f64,
    ) -> bool {
        let tol = self.config.tol;
        let max_sweeps = self.config.max_sweeps;
        let all: Vec<usize> = (0..self.beta.len()).filter(|&j| self.live[j] && h[j] > 0.0).collect();
        let mut sweeps = 0;
        loop {
            let change = self.sweep(&all, w, r, penalties, h, h0);
            sweeps += 1;
            if change < tol {
                return true;
            }
            if sweeps >= max_sweeps {
                return false;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| self.beta[j] != 0.0).collect();
            loop {
                let change = self.sweep(&active, w, r, penalties, h, h0);
                sweeps += 1;
                if change < tol {
                    break;
                }
                if sweeps >= max_sweeps {
                    return false;
                }
            }
        }
    }

    fn sweep(
        &mut self,
        coords: &[usize],
        w: Option<&[f64]>,
        r: &mut [f64],
        penalties: &[f64],
        h: &[f64],
        h0: f64,
    ) -> f64 {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let mut max_change = 0.0f64;
        if self.config.intercept {
            let g = match w {
                Some(w) => dot(w, r),
                None => r.iter().sum(),
            } * inv_n;
            let delta = g / h0;
            if delta != 0.0 {
                r.iter_mut().for_each(|ri| *ri -= delta);
                self.b0 += delta;
                max_change = max_change.max(delta.abs());
            }
        }
        for &j in coords {
            let col = &self.cols[j * n..(j + 1) * n];
            let g = match w {
                Some(w) => col.iter().zip(w).zip(r.iter()).map(|((x, wi), ri)| x * wi * ri).sum::<f64>(),
                None => dot(col, r),
            } * inv_n;
            let old = self.beta[j];
            let z = g + h[j] * old;
            let new = soft_threshold(z, penalties[j]) / h[j];
            let delta = new - old;
            if delta != 0.0 {
                for (ri, x) in r.iter_mut().zip(col) {
                    *ri -= x * delta;
                }
                self.beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    fn linear_predictor(&self, beta: &[f64], b0: f64) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, x) in eta.iter_mut().zip(self.col(j)) {
                    *e += x * b;
                }
            }
        }
        eta
    }

    /// `-(1/n) l + sum_j weight_j |beta_j|`.
    fn objective(&self, eta: &[f64], beta: &[f64], weights: &[f64]) -> f64 {
        let ll: f64 = eta
            .iter()
            .zip(&self.y)
            .map(|(&e, &y)| y * e - self.family.b(e))
            .sum();
        let pen: f64 = beta.iter().zip(weights).map(|(b, w)| w * b.abs()).sum();
        -ll / self.n as f64 + pen
    }
}

/// Intercept of the intercept-only fit: the canonical parameter of `ybar`.
fn null_intercept(family: &Family, y: &[f64]) -> Result<f64> {
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    if !family.in_mean_range(ybar) {
        return Err(Error::InvalidArgument(format!(
            "response mean {ybar} is at the boundary of the {} mean range",
            family.kind
        )));
    }
    Ok(match family.kind {
        FamilyKind::Gaussian => ybar,
        FamilyKind::Bernoulli => (ybar / (1.0 - ybar)).ln(),
        FamilyKind::Poisson => ybar.ln(),
    })
}

pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Rows scaled Hadamard-style so that X'X = n I.
    fn orthonormal_design() -> DMatrix<f64> {
        let h2 = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let h4 = h2.kronecker(&h2);
        h4.kronecker(&h2).columns(0, 5).into_owned()
    }

    #[test]
    fn sica_derivative_and_value() {
        let p = Penalty::Sica { a: 0.5 };
        assert_abs_diff_eq!(p.derivative(0.0, 2.0), 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.value(1.0, 2.0), 2.0 * 1.5 / 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.derivative(1.0, 2.0), 2.0 * 1.5 * 0.5 / 2.25, epsilon = 1e-12);
    }

    #[test]
    fn grid_above_lambda_max_gives_empty_support() {
        let x = orthonormal_design();
        let y = &x * DVector::from_vec(vec![1.0, -0.5, 0.0, 0.2, 0.0]);
        let config = PathConfig {
            lambdas: Some(vec![50.0, 10.0]),
            ..PathConfig::default()
        };
        let path = sica_path(&Family::gaussian(), &y, &x, &config, 0.5).unwrap();
        assert_eq!(path.supports, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn orthonormal_one_round_is_soft_threshold() {
        let x = orthonormal_design();
        let n = x.nrows() as f64;
        let y = DVector::from_vec(vec![1.3, -0.2, 0.7, 2.1, -1.4, 0.05, 0.9, -0.6]);
        let lambda = 0.1;
        let a = 0.5;
        let config = PathConfig {
            lambdas: Some(vec![lambda]),
            max_lla_rounds: 1,
            tol: 1e-12,
            ..PathConfig::default()
        };
        let fam = Family::gaussian();
        let mut solver = Solver::new(&fam, &y, &x, &[0, 1, 2, 3, 4], &config).unwrap();
        solver.solve(lambda, Penalty::Sica { a });
        let ols = x.tr_mul(&y) / n;
        for j in 0..5 {
            let expected = soft_threshold(ols[j], lambda * (a + 1.0) / a);
            assert_abs_diff_eq!(solver.beta[j], expected, epsilon = 1e-12);
        }

        let fam = Family::gaussian();
        let mut solver = Solver::new(&fam, &y, &x, &[0, 1, 2, 3, 4], &config).unwrap();
        solver.solve(lambda, Penalty::Lasso);
        for j in 0..5 {
            assert_abs_diff_eq!(solver.beta[j], soft_threshold(ols[j], lambda), epsilon = 1e-12);
        }
    }

    #[test]
    fn supports_are_distinct_and_within_screen_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(60, 40, |_, _| StandardNormal.sample(&mut rng));
        let noise = DVector::from_fn(60, |_, _| 0.3 * { let v: f64 = StandardNormal.sample(&mut rng); v });
        let y: DVector<f64> = x.column(3) * 2.0 - x.column(17) * 1.5 + x.column(20) + noise;
        let screen: Vec<usize> = (0..40).step_by(1).filter(|j| j % 3 != 1).collect();
        let path = penalized_path(
            &Family::gaussian(),
            &y,
            &x,
            &screen,
            Penalty::Sica { a: 0.5 },
            &PathConfig::default(),
        )
        .unwrap();
        let distinct: HashSet<_> = path.supports.iter().collect();
        assert_eq!(distinct.len(), path.supports.len());
        for s in &path.supports {
            assert!(s.iter().all(|j| screen.contains(j)));
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.len() <= 59);
        }
        assert!(path.supports.contains(&vec![3, 17, 20]));
    }

    #[test]
    fn logistic_path_runs_and_finds_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(200, 30, |_, _| StandardNormal.sample(&mut rng));
        let theta: DVector<f64> = x.column(0) * 2.0 - x.column(1) * 2.0;
        let y = theta.map(|t| {
            let u: f64 = rand::Rng::random(&mut rng);
            f64::from(u < 1.0 / (1.0 + (-t).exp()))
        });
        let path = sica_path(&Family::bernoulli(), &y, &x, &PathConfig::default(), 0.5).unwrap();
        assert!(path.supports.iter().any(|s| s == &vec![0, 1]));
    }

    #[test]
    fn invalid_arguments() {
        let x = orthonormal_design();
        let y = DVector::zeros(8);
        let fam = Family::gaussian();
        assert!(sica_path(&fam, &y, &x, &PathConfig::default(), 0.0).is_err());
        let config = PathConfig {
            n_lambda: 1,
            ..PathConfig::default()
        };
        assert!(lasso_path(&fam, &y, &x, &config).is_err());
    }
}
