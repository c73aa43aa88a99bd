//! Subcommand implementations. Each one reads its inputs, computes, and
//! writes every output file at the end from the calling thread.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use misselect::path::{self, ScreenConfig, ScreenMode};
use misselect::simbench::{self, Scenario, ScenarioConfig};
use misselect::{
    criteria, CandidatePath, Criterion, Dispersion, Family, FamilyKind, PathConfig, Penalty,
    RefitOptions, ScoredCandidate,
};
use nalgebra::{DMatrix, DVector};

use crate::config::Config;
use crate::data::{self, fmt_f64, fmt_opt, fmt_support, key_values};
use crate::error::{CliError, CliResult};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings shared by every subcommand after merging flags over the config.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: Config,
    pub config_path: Option<PathBuf>,
    pub family: Option<String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Design/response inputs for the data-driven subcommands.
#[derive(Debug, Clone)]
pub struct DataInput {
    pub design: PathBuf,
    pub response: PathBuf,
    pub header: bool,
    pub intercept: bool,
    pub dispersion: Option<String>,
}

struct Loaded {
    family: Family,
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
    options: RefitOptions,
}

fn parse_arg<T: std::str::FromStr>(what: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::usage(format!("invalid {what} '{value}': {e}")))
}

fn family_kind(common: &Common, default: FamilyKind) -> CliResult<FamilyKind> {
    match common.family.as_deref().or(common.config.raw("run", "family")) {
        Some(name) => parse_arg("family", name),
        None => Ok(default),
    }
}

fn dispersion(common: &Common, flag: Option<&str>) -> CliResult<Dispersion> {
    match flag.or(common.config.raw("run", "dispersion")) {
        Some(name) => parse_arg("dispersion", name),
        None => Ok(Dispersion::Unit),
    }
}

fn load(common: &Common, input: &DataInput) -> CliResult<Loaded> {
    let cfg = &common.config;
    let header = input.header || cfg.get_or("run", "header", false)?;
    let table = data::read_table(&input.design, header)?;
    let y = data::read_response(&input.response, header)?;
    if y.len() != table.values.nrows() {
        return Err(CliError::usage(format!(
            "response has {} rows but design has {}",
            y.len(),
            table.values.nrows()
        )));
    }
    let family = Family::new(family_kind(common, FamilyKind::Gaussian)?);
    let names = table
        .names
        .unwrap_or_else(|| (0..table.values.ncols()).map(|j| format!("x{j}")).collect());
    let options = RefitOptions {
        dispersion: dispersion(common, input.dispersion.as_deref())?,
        intercept: input.intercept || cfg.get_or("path", "intercept", false)?,
    };
    Ok(Loaded {
        family,
        x: table.values,
        y,
        names,
        options,
    })
}

fn ensure_out(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::usage(format!("{}: cannot create output directory: {e}", out.display())))
}

/// Parses `"0,2,5"` (also space or semicolon separated); `all` selects
/// every column and `none` or `-` the empty model.
pub fn parse_support(spec: &str, ncols: usize) -> CliResult<Vec<usize>> {
    let spec = spec.trim();
    match spec {
        "all" => return Ok((0..ncols).collect()),
        "" | "-" | "none" => return Ok(Vec::new()),
        _ => {}
    }
    let mut out: Vec<usize> = spec
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_arg::<usize>("support index", s))
        .collect::<CliResult<_>>()?;
    out.sort_unstable();
    out.dedup();
    if let Some(&last) = out.last() {
        if last >= ncols {
            return Err(CliError::usage(format!(
                "support index {last} out of range for a design with {ncols} columns"
            )));
        }
    }
    Ok(out)
}

fn data_manifest(command: &str, common: &Common, input: &DataInput, loaded: &Loaded) -> Vec<(String, String)> {
    let mut kv = vec![
        ("toolkit_version".to_string(), VERSION.to_string()),
        ("command".to_string(), command.to_string()),
        ("design".to_string(), input.design.display().to_string()),
        ("response".to_string(), input.response.display().to_string()),
        ("family".to_string(), loaded.family.kind.name().to_string()),
        ("dispersion".to_string(), loaded.options.dispersion.name().to_string()),
        ("intercept".to_string(), loaded.options.intercept.to_string()),
        ("n".to_string(), loaded.x.nrows().to_string()),
        ("p".to_string(), loaded.x.ncols().to_string()),
    ];
    if let Some(p) = &common.config_path {
        kv.push(("config".to_string(), p.display().to_string()));
    }
    kv
}

/// Fits one support. The report is written before a non-convergence or
/// degenerate-contrast exit.
pub fn cmd_fit(common: &Common, input: &DataInput, support: Option<&str>) -> CliResult<()> {
    let loaded = load(common, input)?;
    let p = loaded.x.ncols();
    let support = parse_support(support.unwrap_or("all"), p)?;
    let ev = path::evaluate_support(&support, &loaded.family, &loaded.y, &loaded.x, p, &loaded.options)?;
    let fitted = &ev.fitted;

    let status = match (&ev.contrast, fitted.converged) {
        (_, false) => "not_converged",
        (Err(_), true) => "degenerate_contrast",
        (Ok(_), true) => "ok",
    };
    let contrast = ev.contrast.as_ref().ok();
    let mut kv = data_manifest("fit", common, input, &loaded);
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    put("support", fmt_support(&support, " "));
    put("model_size", fitted.model_size().to_string());
    put("status", status.to_string());
    put("converged", fitted.converged.to_string());
    put("iterations", fitted.iterations.to_string());
    put("loglik", fmt_f64(ev.loglik));
    put("quasi_loglik", fmt_f64(fitted.loglik));
    put("score_inf_norm", fmt_f64(fitted.score_inf_norm));
    put(
        "beta_hat",
        fitted.beta_hat.iter().map(|&b| fmt_f64(b)).collect::<Vec<_>>().join(" "),
    );
    put("trace_h", fmt_opt(contrast.map(|c| c.trace_h)));
    put("logdet_h", fmt_opt(contrast.map(|c| c.logdet_h)));
    for c in Criterion::ALL {
        put(&c.name().to_ascii_lowercase().replace('-', "_"), fmt_opt(ev.scores.get(c)));
    }

    let mut coefs = String::from("term,coefficient\n");
    let mut terms: Vec<String> = Vec::new();
    if fitted.intercept {
        terms.push("(intercept)".to_string());
    }
    terms.extend(support.iter().map(|&j| loaded.names[j].clone()));
    for (term, b) in terms.iter().zip(fitted.beta_hat.iter()) {
        let _ = writeln!(coefs, "{term},{}", fmt_f64(*b));
    }

    ensure_out(&common.out)?;
    data::write_file(&common.out, "report.txt", &key_values(&kv))?;
    data::write_file(&common.out, "coefficients.csv", &coefs)?;

    match (&ev.contrast, fitted.converged) {
        (_, false) => Err(CliError::Solver(format!(
            "no convergence after {} iterations (score norm {:e})",
            fitted.iterations, fitted.score_inf_norm
        ))),
        (Err(e), true) => Err(CliError::Degenerate(format!("{e}; generalized criteria omitted"))),
        (Ok(_), true) => Ok(()),
    }
}

const CANDIDATE_HEADER: &str =
    "id,lambda,size,support,loglik,trace_h,logdet_h,aic,bic,gaic,gbic,gbicp_l,gbicp,status";

fn candidates_csv(scored: &[ScoredCandidate], lambdas: Option<&[f64]>) -> String {
    let mut out = String::from(CANDIDATE_HEADER);
    out.push('\n');
    for c in scored {
        let lambda = lambdas.map_or_else(|| "NA".to_string(), |l| fmt_f64(l[c.id]));
        let s = c.scores.as_ref();
        let status = match (&c.failure, &c.fitted) {
            (None, Some(f)) if !f.converged => "not_converged".to_string(),
            (None, _) => "ok".to_string(),
            (Some(msg), _) => msg.replace(',', ";"),
        };
        let _ = write!(
            out,
            "{},{},{},{},{}",
            c.id,
            lambda,
            c.support.len(),
            fmt_support(&c.support, ";"),
            fmt_opt(s.map(|s| s.loglik)),
        );
        let _ = write!(
            out,
            ",{},{}",
            fmt_opt(s.and_then(|s| s.trace_h)),
            fmt_opt(s.and_then(|s| s.logdet_h))
        );
        for crit in Criterion::ALL {
            let _ = write!(out, ",{}", fmt_opt(s.and_then(|s| s.get(crit))));
        }
        let _ = writeln!(out, ",{status}");
    }
    out
}

fn selections(scored: &[ScoredCandidate]) -> String {
    let available: Vec<(usize, criteria::CriterionScores)> = scored
        .iter()
        .filter_map(|c| c.scores.clone().map(|s| (c.id, s)))
        .collect();
    let mut out = String::new();
    for crit in Criterion::ALL {
        let chosen = match criteria::select(&available, crit) {
            Ok(id) => {
                let s = &scored[id].support;
                if s.is_empty() {
                    "none".to_string()
                } else {
                    fmt_support(s, " ")
                }
            }
            Err(_) => "NA".to_string(),
        };
        let _ = writeln!(out, "{}={chosen}", crit.name());
    }
    out
}

fn path_config(cfg: &Config) -> CliResult<(PathConfig, Penalty)> {
    let d = PathConfig::default();
    let penalty = match cfg.raw("path", "penalty").unwrap_or("sica") {
        "sica" => Penalty::Sica {
            a: cfg.get_or("path", "sica_a", 0.5)?,
        },
        "lasso" => Penalty::Lasso,
        other => return Err(CliError::usage(format!("unknown penalty '{other}' (expected sica or lasso)"))),
    };
    let max_support = match cfg.raw("path", "max_support") {
        None | Some("none") => None,
        Some(_) => cfg.get::<usize>("path", "max_support")?,
    };
    Ok((
        PathConfig {
            n_lambda: cfg.get_or("path", "n_lambda", d.n_lambda)?,
            lambda_min_ratio: cfg.get_or("path", "lambda_min_ratio", d.lambda_min_ratio)?,
            max_lla_rounds: cfg.get_or("path", "max_lla_rounds", d.max_lla_rounds)?,
            max_sweeps: cfg.get_or("path", "max_sweeps", d.max_sweeps)?,
            max_irls: cfg.get_or("path", "max_irls", d.max_irls)?,
            tol: cfg.get_or("path", "tol", d.tol)?,
            lambdas: cfg.list("path", "lambdas")?,
            intercept: cfg.get_or("path", "intercept", d.intercept)?,
            max_support,
        },
        penalty,
    ))
}

fn screen_config(cfg: &Config) -> CliResult<ScreenConfig> {
    let seed = cfg.get_or("screen", "seed", 0u64)?;
    let mode = match cfg.raw("screen", "mode").unwrap_or("none") {
        "none" | "keep_all" => ScreenMode::KeepAll,
        "fixed_count" => ScreenMode::FixedCount(
            cfg.get("screen", "k")?
                .ok_or_else(|| CliError::usage("[screen] mode = fixed_count needs k"))?,
        ),
        "permutation" => ScreenMode::Permutation {
            permutations: cfg.get_or("screen", "permutations", 1usize)?,
            quantile: cfg.get_or("screen", "quantile", 1.0)?,
        },
        other => return Err(CliError::usage(format!("unknown screening mode '{other}'"))),
    };
    Ok(ScreenConfig { mode, seed })
}

pub fn cmd_path(common: &Common, input: &DataInput) -> CliResult<()> {
    let mut loaded = load(common, input)?;
    let (mut config, penalty) = path_config(&common.config)?;
    config.intercept = loaded.options.intercept;
    loaded.options.intercept = config.intercept;
    let mut screen = screen_config(&common.config)?;
    if let Some(seed) = common.seed {
        screen.seed = seed;
    }
    let screening = path::sis_screen(&loaded.y, &loaded.x, &screen)?;
    let candidates = path::penalized_path(
        &loaded.family,
        &loaded.y,
        &loaded.x,
        &screening.retained,
        penalty,
        &config,
    )?;
    let p = loaded.x.ncols();
    let scored = path::refit_and_score(&candidates, &loaded.family, &loaded.y, &loaded.x, p, &loaded.options)?;

    let mut kv = data_manifest("path", common, input, &loaded);
    kv.push(("penalty".into(), format!("{penalty:?}")));
    kv.push(("screen".into(), format!("{:?}", screen.mode)));
    kv.push(("screen_seed".into(), screen.seed.to_string()));
    kv.push(("screened".into(), screening.retained.len().to_string()));
    kv.push(("n_lambda".into(), config.n_lambda.to_string()));
    kv.push(("lambda_min_ratio".into(), fmt_f64(config.lambda_min_ratio)));
    kv.push(("lambda_max".into(), fmt_f64(candidates.lambda_max)));
    kv.push(("candidates".into(), candidates.len().to_string()));
    kv.push(("skipped_lambdas".into(), candidates.skipped.len().to_string()));

    ensure_out(&common.out)?;
    data::write_file(
        &common.out,
        "candidates.csv",
        &candidates_csv(&scored, Some(&candidates.support_lambdas)),
    )?;
    data::write_file(&common.out, "selected.txt", &selections(&scored))?;
    data::write_file(&common.out, "manifest.txt", &key_values(&kv))?;
    Ok(())
}

/// Candidate file: one support per line, `#` comments, `none` for the empty
/// model.
fn read_candidates(path: &Path, ncols: usize) -> CliResult<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: cannot read: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let support = parse_support(line, ncols)
            .map_err(|e| CliError::usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(support);
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("{}: no candidate supports", path.display())));
    }
    Ok(out)
}

pub fn cmd_score(common: &Common, input: &DataInput, candidates: &Path) -> CliResult<()> {
    let loaded = load(common, input)?;
    let p = loaded.x.ncols();
    let supports = read_candidates(candidates, p)?;
    let path = CandidatePath::from_supports(supports, (0..p).collect());
    let scored = path::refit_and_score(&path, &loaded.family, &loaded.y, &loaded.x, p, &loaded.options)?;

    let mut kv = data_manifest("score", common, input, &loaded);
    kv.push(("candidates".into(), candidates.display().to_string()));
    ensure_out(&common.out)?;
    data::write_file(&common.out, "scores.csv", &candidates_csv(&scored, None))?;
    data::write_file(&common.out, "selected.txt", &selections(&scored))?;
    data::write_file(&common.out, "manifest.txt", &key_values(&kv))?;
    Ok(())
}

fn master_seed(common: &Common) -> CliResult<Option<u64>> {
    match common.seed {
        Some(s) => Ok(Some(s)),
        None => common.config.get("run", "seed"),
    }
}

pub fn cmd_simulate(common: &Common, workers: usize) -> CliResult<()> {
    let cfg = &common.config;
    if common.config_path.is_none() {
        return Err(CliError::usage("simulate needs --config"));
    }
    let scenarios: Vec<Scenario> = cfg
        .list("simulate", "scenarios")?
        .ok_or_else(|| CliError::usage("[simulate] scenarios is required"))?;
    let dims: Vec<usize> = cfg
        .list("simulate", "p")?
        .ok_or_else(|| CliError::usage("[simulate] p is required"))?;
    let (path, penalty) = path_config(cfg)?;
    let screen = screen_config(cfg)?;
    let dispersion = dispersion(common, None)?;
    let seed = master_seed(common)?;

    let mut configs = Vec::new();
    for &scenario in &scenarios {
        for &p in &dims {
            let mut c = ScenarioConfig::new(scenario, p);
            c.n = cfg.get_or("simulate", "n", c.n)?;
            c.sigma = cfg.get_or("simulate", "sigma", c.sigma)?;
            c.n_reps = cfg.get_or("simulate", "n_reps", c.n_reps)?;
            c.test_size = cfg.get_or("simulate", "test_size", c.test_size)?;
            if let Some(s) = seed {
                c.master_seed = s;
            }
            c.penalty = penalty;
            c.path = path.clone();
            c.screen = screen;
            c.dispersion = dispersion;
            c.validate()?;
            configs.push(c);
        }
    }

    let mut outputs = Vec::new();
    for c in &configs {
        log::info!("running {} at p = {} ({} replications)", c.scenario, c.p, c.n_reps);
        let exp = simbench::run_experiment(c)?;
        let failed = exp.replications.iter().filter(|r| r.failure.is_some()).count();
        if failed > 0 {
            log::warn!("{} p = {}: {failed} replications failed", c.scenario, c.p);
        }
        outputs.push((format!("{}_{}", c.scenario.name(), c.p), exp.csv()));
    }

    let mut manifest = String::new();
    let _ = writeln!(manifest, "[run]");
    let _ = writeln!(manifest, "toolkit_version={VERSION}");
    let _ = writeln!(manifest, "command=simulate");
    if let Some(p) = &common.config_path {
        let _ = writeln!(manifest, "config={}", p.display());
    }
    let _ = writeln!(manifest, "workers={workers}");
    for (c, (name, _)) in configs.iter().zip(&outputs) {
        let _ = writeln!(manifest, "\n[{name}]");
        manifest.push_str(&simbench::manifest_text(c));
    }

    ensure_out(&common.out)?;
    for (name, csv) in &outputs {
        data::write_file(&common.out, &format!("{name}.csv"), csv)?;
    }
    data::write_file(&common.out, "manifest.txt", &manifest)?;
    Ok(())
}

pub fn cmd_diagnose(common: &Common) -> CliResult<()> {
    let cfg = &common.config;
    let scenario: Scenario = match cfg.raw("diagnose", "scenario") {
        Some(s) => parse_arg("scenario", s)?,
        None => Scenario::MultipleIndex,
    };
    let family = Family::new(family_kind(common, scenario.family().kind)?);
    let d: usize = cfg.get_or("diagnose", "d", 5)?;
    let sigma: f64 = cfg.get_or("diagnose", "sigma", scenario.default_sigma())?;
    let kl_n: usize = cfg.get_or("diagnose", "kl_n", 500)?;
    let kl_reps: usize = cfg.get_or("diagnose", "kl_reps", 1000)?;
    let norm_n: usize = cfg.get_or("diagnose", "normality_n", 2000)?;
    let norm_reps: usize = cfg.get_or("diagnose", "normality_reps", 500)?;
    let direction: Vec<f64> = cfg.list("diagnose", "direction")?.unwrap_or_else(|| vec![1.0; d]);
    let seed = master_seed(common)?.unwrap_or(20_240_607);

    let (x, truth) = simbench::diagnostic_setup(scenario, kl_n, d, sigma, seed)?;
    let kl = simbench::kl_expansion_diagnostic(&family, &x, &truth, kl_reps, seed)?;
    let (x2, truth2) = simbench::diagnostic_setup(scenario, norm_n, d, sigma, seed.wrapping_add(1))?;
    let nd = simbench::normality_diagnostic(
        &family,
        &x2,
        &truth2,
        &DVector::from_vec(direction.clone()),
        norm_reps,
        seed,
    )?;

    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    put("toolkit_version", VERSION.to_string());
    put("command", "diagnose".into());
    put("scenario", scenario.name().into());
    put("family", family.kind.name().into());
    put("d", d.to_string());
    put("sigma", fmt_f64(sigma));
    put("seed", seed.to_string());
    put("kl_n", kl_n.to_string());
    put("kl_reps", kl.n_reps.to_string());
    put("kl_lhs", fmt_f64(kl.lhs));
    put("kl_rhs", fmt_f64(kl.rhs));
    put("kl_trace_h", fmt_f64(kl.trace_h));
    put("kl_rel_gap", fmt_f64(kl.rel_gap));
    put("normality_n", norm_n.to_string());
    put("normality_reps", norm_reps.to_string());
    put(
        "normality_direction",
        direction.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","),
    );
    put("ks_stat", fmt_f64(nd.ks_stat));
    put("ks_p_value", fmt_f64(nd.p_value));
    put("ks_alpha", fmt_f64(simbench::KS_ALPHA));
    put("ks_pass", nd.pass.to_string());

    ensure_out(&common.out)?;
    data::write_file(&common.out, "diagnostics.txt", &key_values(&kv))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_specs() {
        assert_eq!(parse_support("all", 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_support("2, 0;2 1", 3).unwrap(), vec![0, 1, 2]);
        assert!(parse_support("none", 3).unwrap().is_empty());
        assert_eq!(parse_support("3", 3).unwrap_err().exit_code(), 1);
        assert_eq!(parse_support("a", 3).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn path_section_defaults_and_overrides() {
        let cfg = Config::parse("[path]\npenalty = lasso\nmax_support = 12\nlambdas = 1, 0.5\n", "c").unwrap();
        let (pc, pen) = path_config(&cfg).unwrap();
        assert_eq!(pen, Penalty::Lasso);
        assert_eq!(pc.max_support, Some(12));
        assert_eq!(pc.lambdas, Some(vec![1.0, 0.5]));
        assert_eq!(pc.n_lambda, PathConfig::default().n_lambda);
    }
}
