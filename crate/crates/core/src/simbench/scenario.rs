//! Simulation scenarios and replication datasets.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::family::{Dispersion, Family};
use crate::path::{PathConfig, Penalty, ScreenConfig};
use crate::simbench::seed::{column_rng, stream_rng, Stream};

/// Columns the truth depends on in every scenario.
const TRUTH_COLUMNS: usize = 10;

const BETA_INTERACTION: [f64; 10] = [1.0, -1.25, 0.75, -0.95, 1.5, 0.1, -0.1, 0.1, -0.1, 0.1];
const BETA_LOGISTIC: [f64; 5] = [2.5, -1.9, 2.8, -2.2, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Linear strong and weak effects plus an unmodelled `x1 x2` interaction.
    LinearInteractionWeak,
    /// As above, with the interaction supplied as an extra design column.
    LinearInteractionWeakCorrect,
    /// Sum of three single-index terms `f(t) = t^3 / (t^2 + 1)`.
    MultipleIndex,
    /// Logistic response with two unmodelled interactions.
    LogisticInteraction,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::LinearInteractionWeak,
        Scenario::LinearInteractionWeakCorrect,
        Scenario::MultipleIndex,
        Scenario::LogisticInteraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LinearInteractionWeak => "linear_interaction_weak",
            Scenario::LinearInteractionWeakCorrect => "linear_interaction_weak_correct",
            Scenario::MultipleIndex => "multiple_index",
            Scenario::LogisticInteraction => "logistic_interaction",
        }
    }

    /// Working family fitted to the data.
    pub fn family(self) -> Family {
        match self {
            Scenario::LogisticInteraction => Family::bernoulli(),
            _ => Family::gaussian(),
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Scenario::LogisticInteraction => 200,
            _ => 100,
        }
    }

    pub fn default_sigma(self) -> f64 {
        match self {
            Scenario::LogisticInteraction => 0.0,
            _ => 0.25,
        }
    }

    pub fn is_classification(self) -> bool {
        self == Scenario::LogisticInteraction
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// `f(t) = t^3 / (t^2 + 1)`.
pub fn index_link(t: f64) -> f64 {
    t * t * t / (t * t + 1.0)
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub n_reps: usize,
    pub test_size: usize,
    pub master_seed: u64,
    pub penalty: Penalty,
    pub path: PathConfig,
    pub screen: ScreenConfig,
    pub dispersion: Dispersion,
}

impl ScenarioConfig {
    /// Defaults for `scenario` at dimension `p`.
    pub fn new(scenario: Scenario, p: usize) -> Self {
        ScenarioConfig {
            scenario,
            n: scenario.default_n(),
            p,
            sigma: scenario.default_sigma(),
            n_reps: 100,
            test_size: 10_000,
            master_seed: 20_240_607,
            penalty: Penalty::Sica { a: 0.5 },
            path: PathConfig::default(),
            screen: ScreenConfig::keep_all(),
            dispersion: Dispersion::Unit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 10 {
            problems.push(format!("n = {} (need >= 10)", self.n));
        }
        if self.p < TRUTH_COLUMNS {
            problems.push(format!("p = {} (need >= {TRUTH_COLUMNS})", self.p));
        }
        if self.test_size < 1 {
            problems.push("test_size = 0 (need >= 1)".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma = {} (need finite, >= 0)", self.sigma));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    /// Columns of the fitting design: `p`, plus the interaction column in
    /// the correctly specified variant.
    pub fn design_columns(&self) -> usize {
        match self.scenario {
            Scenario::LinearInteractionWeakCorrect => self.p + 1,
            _ => self.p,
        }
    }
}

/// Population support sets, as 0-based column indices of the fitting design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSets {
    pub m0: Vec<usize>,
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    /// What a selection is compared against for consistency and inclusion.
    pub target: Vec<usize>,
}

impl OracleSets {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        let first = |k: usize| (0..k).collect::<Vec<_>>();
        match config.scenario {
            Scenario::LinearInteractionWeak => OracleSets {
                m0: first(10),
                strong: first(5),
                weak: (5..10).collect(),
                target: first(5),
            },
            Scenario::LinearInteractionWeakCorrect => {
                let mut m0 = first(10);
                m0.push(config.p);
                let mut strong = first(5);
                strong.push(config.p);
                OracleSets {
                    m0,
                    target: strong.clone(),
                    strong,
                    weak: (5..10).collect(),
                }
            }
            Scenario::MultipleIndex | Scenario::LogisticInteraction => OracleSets {
                m0: first(5),
                strong: first(5),
                weak: Vec::new(),
                target: first(5),
            },
        }
    }
}

/// One replication's training data plus its independent test sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub ey: DVector<f64>,
    pub var_y: DVector<f64>,
    pub oracle: OracleSets,
    pub test: TestSet,
}

/// The test sample. Only the columns the truth depends on are stored; any
/// other column is regenerated from its own stream on request, so the cost
/// of evaluating a sparse model does not grow with `p`.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub size: usize,
    pub y: Vec<f64>,
    pub ey: Vec<f64>,
    scenario: Scenario,
    p: usize,
    master_seed: u64,
    rep_index: u64,
    truth_cols: Vec<Vec<f64>>,
}

impl TestSet {
    /// Column `j` of the test design (same indexing as the fitting design).
    pub fn column(&self, j: usize) -> Cow<'_, [f64]> {
        if j < TRUTH_COLUMNS {
            Cow::Borrowed(&self.truth_cols[j])
        } else if j == self.p && self.scenario == Scenario::LinearInteractionWeakCorrect {
            Cow::Owned(
                self.truth_cols[0]
                    .iter()
                    .zip(&self.truth_cols[1])
                    .map(|(a, b)| a * b)
                    .collect(),
            )
        } else {
            Cow::Owned(normal_column(
                self.master_seed,
                self.rep_index,
                Stream::TestDesign,
                j,
                self.size,
            ))
        }
    }

    /// `x' beta` on the test sample for coefficients over `support`.
    pub fn linear_predictor(&self, support: &[usize], coef: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.size];
        for (&j, &b) in support.iter().zip(coef) {
            let col = self.column(j);
            for (e, x) in eta.iter_mut().zip(col.iter()) {
                *e += b * x;
            }
        }
        eta
    }
}

fn normal_column(master_seed: u64, rep_index: u64, stream: Stream, j: usize, len: usize) -> Vec<f64> {
    let mut rng = column_rng(master_seed, rep_index, stream, j);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Mean and variance of the response given the truth columns.
fn truth(scenario: Scenario, sigma: f64, cols: &[Vec<f64>], i: usize) -> (f64, f64) {
    let x = |j: usize| cols[j][i];
    match scenario {
        Scenario::LinearInteractionWeak | Scenario::LinearInteractionWeakCorrect => {
            let lin: f64 = BETA_INTERACTION.iter().enumerate().map(|(j, b)| b * x(j)).sum();
            (lin + x(0) * x(1), sigma * sigma)
        }
        Scenario::MultipleIndex => (
            index_link(x(0)) + index_link(x(1) - x(2)) + index_link(x(3) - x(4)),
            sigma * sigma,
        ),
        Scenario::LogisticInteraction => {
            let lin: f64 = BETA_LOGISTIC.iter().enumerate().map(|(j, b)| b * x(j)).sum();
            let pi = logistic(lin + 2.0 * x(0) * x(1) + 2.0 * x(2) * x(3));
            (pi, pi * (1.0 - pi))
        }
    }
}

fn draw_responses<R: Rng>(scenario: Scenario, ey: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    if scenario.is_classification() {
        ey.iter()
            .map(|&pi| {
                let u: f64 = rng.random();
                f64::from(u < pi)
            })
            .collect()
    } else {
        ey.iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                m + sd * z
            })
            .collect()
    }
}

/// Builds replication `rep_index` of `config`. Identical inputs give
/// bitwise-identical datasets.
pub fn generate(config: &ScenarioConfig, rep_index: u64) -> Result<Dataset> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let seed = config.master_seed;

    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| normal_column(seed, rep_index, Stream::Design, j, n))
        .collect();
    let (ey, var_y): (Vec<f64>, Vec<f64>) =
        (0..n).map(|i| truth(config.scenario, config.sigma, &cols, i)).unzip();
    let y = draw_responses(
        config.scenario,
        &ey,
        config.sigma,
        &mut stream_rng(seed, rep_index, Stream::Noise),
    );

    let d = config.design_columns();
    let mut x = DMatrix::zeros(n, d);
    for (j, col) in cols.iter().enumerate() {
        x.column_mut(j).copy_from_slice(col);
    }
    if d > p {
        for i in 0..n {
            x[(i, p)] = cols[0][i] * cols[1][i];
        }
    }

    let m = config.test_size;
    let truth_cols: Vec<Vec<f64>> = (0..TRUTH_COLUMNS)
        .map(|j| normal_column(seed, rep_index, Stream::TestDesign, j, m))
        .collect();
    let (test_ey, _): (Vec<f64>, Vec<f64>) =
        (0..m).map(|i| truth(config.scenario, config.sigma, &truth_cols, i)).unzip();
    let test_y = draw_responses(
        config.scenario,
        &test_ey,
        config.sigma,
        &mut stream_rng(seed, rep_index, Stream::TestNoise),
    );

    Ok(Dataset {
        x,
        y: DVector::from_vec(y),
        ey: DVector::from_vec(ey),
        var_y: DVector::from_vec(var_y),
        oracle: OracleSets::for_config(config),
        test: TestSet {
            size: m,
            y: test_y,
            ey: test_ey,
            scenario: config.scenario,
            p,
            master_seed: seed,
            rep_index,
            truth_cols,
        },
    })
}
