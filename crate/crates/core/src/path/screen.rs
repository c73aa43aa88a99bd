//! Marginal screening.
//!
//! Each column is centered and scaled to unit Euclidean norm, and scored by
//! `|x_j'(y - ybar)|`. Either the top `k` columns are kept, or a threshold is
//! calibrated from random permutations of the response: the maximum marginal
//! statistic is recorded for each permuted response and variables beating the
//! `q`-quantile of those maxima survive.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScreenMode {
    KeepAll,
    FixedCount(usize),
    Permutation { permutations: usize, quantile: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenConfig {
    pub mode: ScreenMode,
    /// Seeds the permutation stream; unused by the other modes.
    pub seed: u64,
}

impl ScreenConfig {
    pub fn keep_all() -> Self {
        ScreenConfig {
            mode: ScreenMode::KeepAll,
            seed: 0,
        }
    }

    pub fn fixed_count(k: usize) -> Self {
        ScreenConfig {
            mode: ScreenMode::FixedCount(k),
            seed: 0,
        }
    }

    pub fn permutation(permutations: usize, quantile: f64, seed: u64) -> Self {
        ScreenConfig {
            mode: ScreenMode::Permutation {
                permutations,
                quantile,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screening {
    /// Retained column indices, ascending.
    pub retained: Vec<usize>,
    /// Marginal statistic per column; `None` for constant columns.
    pub statistics: Vec<Option<f64>>,
    /// Columns dropped for having zero centered norm.
    pub constant: Vec<usize>,
    /// Permutation threshold, when that mode ran.
    pub threshold: Option<f64>,
}

/// Runs marginal screening of the columns of `x` against `y`.
pub fn sis_screen(y: &DVector<f64>, x: &DMatrix<f64>, config: &ScreenConfig) -> Result<Screening> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "response has {} entries but design has {n} rows",
            y.len()
        )));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if let ScreenMode::FixedCount(k) = config.mode {
        if k > p {
            return Err(Error::InvalidArgument(format!("cannot keep {k} of {p} columns")));
        }
    }
    if let ScreenMode::Permutation {
        permutations,
        quantile,
    } = config.mode
    {
        if permutations == 0 || !(0.0..=1.0).contains(&quantile) {
            return Err(Error::InvalidArgument(format!(
                "permutation screening needs K >= 1 and q in [0, 1], got K = {permutations}, q = {quantile}"
            )));
        }
    }

    let (standardized, constant) = standardize_columns(x);
    if !constant.is_empty() {
        log::warn!("screening skips {} constant column(s): {:?}", constant.len(), constant);
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let centered_y: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let statistics: Vec<Option<f64>> = standardized
        .iter()
        .map(|col| col.as_ref().map(|c| dot(c, &centered_y).abs()))
        .collect();
    let live: Vec<usize> = (0..p).filter(|&j| statistics[j].is_some()).collect();

    let (retained, threshold) = match config.mode {
        ScreenMode::KeepAll => (live, None),
        ScreenMode::FixedCount(k) => {
            let mut order = live;
            order.sort_by(|&a, &b| {
                statistics[b]
                    .unwrap()
                    .total_cmp(&statistics[a].unwrap())
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            order.sort_unstable();
            (order, None)
        }
        ScreenMode::Permutation {
            permutations,
            quantile,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut permuted = centered_y.clone();
            let mut maxima = Vec::with_capacity(permutations);
            for _ in 0..permutations {
                permuted.shuffle(&mut rng);
                let max = standardized
                    .iter()
                    .flatten()
                    .map(|c| dot(c, &permuted).abs())
                    .fold(0.0f64, f64::max);
                maxima.push(max);
            }
            let t = quantile_type7(&mut maxima, quantile);
            let kept = live
                .into_iter()
                .filter(|&j| statistics[j].unwrap() > t)
                .collect();
            (kept, Some(t))
        }
    };

    Ok(Screening {
        retained,
        statistics,
        constant,
        threshold,
    })
}

/// Centered, unit-norm columns; `None` marks constant columns. Sums run
/// sequentially so the statistics are reproducible bit for bit.
fn standardize_columns(x: &DMatrix<f64>) -> (Vec<Option<Vec<f64>>>, Vec<usize>) {
    let n = x.nrows();
    let mut cols = Vec::with_capacity(x.ncols());
    let mut constant = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let norm = dot(&centered, &centered).sqrt();
        let scale = col.amax().max(f64::MIN_POSITIVE);
        if norm <= 1e-12 * scale * (n as f64).sqrt() {
            constant.push(j);
            cols.push(None);
        } else {
            cols.push(Some(centered.iter().map(|v| v / norm).collect()));
        }
    }
    (cols, constant)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (u, v)| acc + u * v)
}

/// Linear-interpolation sample quantile (R's type 7).
pub fn quantile_type7(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let h = (values.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn perfect_marginal_correlation() {
        let x = design(30, 6, 1);
        let y = x.column(3).into_owned();
        let s = sis_screen(&y, &x, &ScreenConfig::fixed_count(1)).unwrap();
        assert_eq!(s.retained, vec![3]);
    }

    #[test]
    fn keep_all_drops_only_constants() {
        let mut x = design(20, 5, 2);
        x.column_mut(2).fill(4.0);
        let y = x.column(0).into_owned();
        let s = sis_screen(&y, &x, &ScreenConfig::fixed_count(5)).unwrap();
        assert_eq!(s.retained, vec![0, 1, 3, 4]);
        assert_eq!(s.constant, vec![2]);
        let s = sis_screen(&y, &x, &ScreenConfig::keep_all()).unwrap();
        assert_eq!(s.retained, vec![0, 1, 3, 4]);
    }

    #[test]
    fn fixed_count_larger_than_p_is_rejected() {
        let x = design(10, 3, 3);
        let y = DVector::zeros(10);
        assert!(sis_screen(&y, &x, &ScreenConfig::fixed_count(4)).is_err());
    }

    #[test]
    fn permutation_threshold_is_max_of_maxima_at_q_one() {
        let x = design(40, 30, 4);
        let y = &x.column(0) * 2.0 + x.column(1) * 0.0;
        let s = sis_screen(&y, &x, &ScreenConfig::permutation(10, 1.0, 11)).unwrap();
        assert!(s.retained.contains(&0));
        let t = s.threshold.unwrap();
        for &j in &s.retained {
            assert!(s.statistics[j].unwrap() > t);
        }
    }

    #[test]
    fn quantile_type7_matches_r() {
        let mut v = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(quantile_type7(&mut v, 0.5), 3.0);
        assert_eq!(quantile_type7(&mut v, 1.0), 5.0);
        assert_eq!(quantile_type7(&mut v, 0.25), 1.0);
        assert!((quantile_type7(&mut v, 0.9) - 4.6).abs() < 1e-12);
    }
}
