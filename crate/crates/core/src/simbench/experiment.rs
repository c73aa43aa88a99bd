//! Replications, aggregation and table output.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::criteria::{self, Criterion};
use crate::error::Result;
use crate::path::{self, RefitOptions, ScreenConfig, ScreenMode};
use crate::simbench::metrics::{evaluate, median, robust_sd, Method, Outcome};
use crate::simbench::scenario::{generate, ScenarioConfig};
use crate::simbench::seed::{hash_keys, Stream};
use crate::Penalty;

/// Table errors are reported multiplied by this factor.
pub const ERROR_SCALE: f64 = 100.0;

pub const CSV_HEADER: &str =
    "criterion,consistent_pct,inclusion_pct,median_err,rsd_err,median_fp,median_fn_strong,median_fn_weak";

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub rep_index: u64,
    /// One entry per [`Method::ALL`], in that order.
    pub outcomes: Vec<(Method, Outcome)>,
    pub n_candidates: usize,
    /// Set when the replication could not produce candidates at all.
    pub failure: Option<String>,
}

impl ReplicationResult {
    pub fn outcome(&self, method: Method) -> &Outcome {
        &self
            .outcomes
            .iter()
            .find(|(m, _)| *m == method)
            .expect("every method has an outcome")
            .1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub consistent_pct: f64,
    pub inclusion_pct: f64,
    /// Median test error times [`ERROR_SCALE`].
    pub median_err: f64,
    /// Robust SD (IQR / 1.349) of the test error times [`ERROR_SCALE`].
    pub rsd_err: f64,
    pub median_fp: f64,
    pub median_fn_strong: f64,
    pub median_fn_weak: f64,
    /// Replications in which the method produced a selection.
    pub n_available: usize,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub rows: Vec<SummaryRow>,
    pub replications: Vec<ReplicationResult>,
}

impl Experiment {
    pub fn row(&self, method: Method) -> &SummaryRow {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .expect("every method has a row")
    }

    pub fn csv(&self) -> String {
        summary_csv(&self.rows)
    }
}

/// Runs all replications (in parallel on the current rayon pool) and
/// aggregates them. Output does not depend on execution order.
pub fn run_experiment(config: &ScenarioConfig) -> Result<Experiment> {
    config.validate()?;
    let replications: Vec<ReplicationResult> = (0..config.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    Ok(Experiment {
        config: config.clone(),
        rows: summarize(&replications),
        replications,
    })
}

/// Screening, path, refits and selection for one replication.
pub fn run_replication(config: &ScenarioConfig, rep_index: u64) -> ReplicationResult {
    let failed = |msg: String| {
        log::warn!("replication {rep_index}: {msg}");
        ReplicationResult {
            rep_index,
            outcomes: Method::ALL.iter().map(|&m| (m, Outcome::unavailable())).collect(),
            n_candidates: 0,
            failure: Some(msg),
        }
    };
    let data = match generate(config, rep_index) {
        Ok(d) => d,
        Err(e) => return failed(format!("generation failed: {e}")),
    };
    let family = config.scenario.family();
    let classification = config.scenario.is_classification();

    let screen_config = ScreenConfig {
        seed: hash_keys(&[
            config.master_seed,
            rep_index,
            Stream::Screen as u64,
            config.screen.seed,
        ]),
        ..config.screen
    };
    let screening = match path::sis_screen(&data.y, &data.x, &screen_config) {
        Ok(s) => s,
        Err(e) => return failed(format!("screening failed: {e}")),
    };
    let candidates = match path::penalized_path(
        &family,
        &data.y,
        &data.x,
        &screening.retained,
        config.penalty,
        &config.path,
    ) {
        Ok(c) => c,
        Err(e) => return failed(format!("path failed: {e}")),
    };
    let options = RefitOptions {
        dispersion: config.dispersion,
        intercept: config.path.intercept,
    };
    let scored = match path::refit_and_score(&candidates, &family, &data.y, &data.x, config.p, &options) {
        Ok(s) => s,
        Err(e) => return failed(format!("refit failed: {e}")),
    };

    let available: Vec<(usize, criteria::CriterionScores)> = scored
        .iter()
        .filter_map(|c| c.scores.clone().map(|s| (c.id, s)))
        .collect();
    let mut outcomes = Vec::with_capacity(Method::ALL.len());
    for criterion in Criterion::ALL {
        let outcome = match criteria::select(&available, criterion) {
            Ok(id) => {
                let cand = &scored[id];
                evaluate(
                    &cand.support,
                    &data.oracle.target,
                    cand.fitted.as_ref(),
                    &data,
                    classification,
                )
            }
            Err(_) => Outcome::unavailable(),
        };
        outcomes.push((Method::Criterion(criterion), outcome));
    }

    // the oracle working model is its own reference set
    let m0 = &data.oracle.m0;
    let oracle_fit = path::refit(&family, &data.y, &data.x, m0, config.path.intercept).ok();
    outcomes.push((
        Method::Oracle,
        evaluate(m0, m0, oracle_fit.as_ref(), &data, classification),
    ));

    ReplicationResult {
        rep_index,
        outcomes,
        n_candidates: candidates.len(),
        failure: None,
    }
}

pub fn summarize(replications: &[ReplicationResult]) -> Vec<SummaryRow> {
    let total = replications.len().max(1) as f64;
    Method::ALL
        .iter()
        .map(|&method| {
            let outs: Vec<&Outcome> = replications.iter().map(|r| r.outcome(method)).collect();
            let chosen: Vec<&&Outcome> = outs.iter().filter(|o| o.selected.is_some()).collect();
            let pct = |f: fn(&Outcome) -> bool| {
                100.0 * outs.iter().filter(|o| f(o)).count() as f64 / total
            };
            let med = |f: fn(&Outcome) -> usize| {
                median(&chosen.iter().map(|o| f(o) as f64).collect::<Vec<_>>())
            };
            let errors: Vec<f64> = outs.iter().filter_map(|o| o.error).map(|e| e * ERROR_SCALE).collect();
            SummaryRow {
                method,
                consistent_pct: pct(|o| o.consistent),
                inclusion_pct: pct(|o| o.includes),
                median_err: median(&errors),
                rsd_err: robust_sd(&errors),
                median_fp: med(|o| o.false_positives),
                median_fn_strong: med(|o| o.false_negatives_strong),
                median_fn_weak: med(|o| o.false_negatives_weak),
                n_available: chosen.len(),
            }
        })
        .collect()
}

fn fmt_num(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        "NA".to_string()
    }
}

/// The summary table as CSV text, one row per method.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method.name(),
            fmt_num(r.consistent_pct, 1),
            fmt_num(r.inclusion_pct, 1),
            fmt_num(r.median_err, 2),
            fmt_num(r.rsd_err, 2),
            fmt_num(r.median_fp, 1),
            fmt_num(r.median_fn_strong, 1),
            fmt_num(r.median_fn_weak, 1),
        );
    }
    out
}

/// Flat key-value description sufficient to rerun `config`.
pub fn manifest_entries(config: &ScenarioConfig) -> Vec<(String, String)> {
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    put("toolkit_version", env!("CARGO_PKG_VERSION").to_string());
    put("scenario", config.scenario.name().to_string());
    put("family", config.scenario.family().kind.name().to_string());
    put("n", config.n.to_string());
    put("p", config.p.to_string());
    put("sigma", config.sigma.to_string());
    put("n_reps", config.n_reps.to_string());
    put("test_size", config.test_size.to_string());
    put("master_seed", config.master_seed.to_string());
    match config.penalty {
        Penalty::Sica { a } => {
            put("penalty", "sica".into());
            put("sica_a", a.to_string());
        }
        Penalty::Lasso => put("penalty", "lasso".into()),
    }
    let pc = &config.path;
    put("n_lambda", pc.n_lambda.to_string());
    put("lambda_min_ratio", pc.lambda_min_ratio.to_string());
    put("max_lla_rounds", pc.max_lla_rounds.to_string());
    put("max_sweeps", pc.max_sweeps.to_string());
    put("max_irls", pc.max_irls.to_string());
    put("tol", pc.tol.to_string());
    put("intercept", pc.intercept.to_string());
    put(
        "max_support",
        pc.max_support.map_or("none".to_string(), |m| m.to_string()),
    );
    if let Some(grid) = &pc.lambdas {
        let grid: Vec<String> = grid.iter().map(f64::to_string).collect();
        put("lambdas", grid.join(","));
    }
    match config.screen.mode {
        ScreenMode::KeepAll => put("screen", "none".into()),
        ScreenMode::FixedCount(k) => {
            put("screen", "fixed_count".into());
            put("screen_k", k.to_string());
        }
        ScreenMode::Permutation {
            permutations,
            quantile,
        } => {
            put("screen", "permutation".into());
            put("screen_permutations", permutations.to_string());
            put("screen_quantile", quantile.to_string());
        }
    }
    put("screen_seed", config.screen.seed.to_string());
    put("dispersion", config.dispersion.name().to_string());
    put("error_scale", ERROR_SCALE.to_string());
    put("rsd", "iqr/1.349".into());
    put("seeding", "splitmix64(master_seed, rep_index, stream_tag)".into());
    kv
}

pub fn manifest_text(config: &ScenarioConfig) -> String {
    manifest_entries(config)
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}
