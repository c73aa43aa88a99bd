//! Sectioned `key = value` config files.
//!
//! ```text
//! # comment
//! [simulate]
//! scenarios = multiple_index
//! p = 200, 400
//! ```
//!
//! Keys before the first section header belong to `[run]`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["seed", "workers", "family", "dispersion", "header"]),
    ("simulate", &["scenarios", "p", "n", "sigma", "n_reps", "test_size"]),
    (
        "path",
        &[
            "penalty",
            "sica_a",
            "n_lambda",
            "lambda_min_ratio",
            "lambdas",
            "max_lla_rounds",
            "max_sweeps",
            "max_irls",
            "tol",
            "intercept",
            "max_support",
        ],
    ),
    ("screen", &["mode", "k", "permutations", "quantile", "seed"]),
    (
        "diagnose",
        &[
            "scenario",
            "d",
            "sigma",
            "kl_n",
            "kl_reps",
            "normality_n",
            "normality_reps",
            "direction",
        ],
    ),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    source: String,
    entries: BTreeMap<(String, String), Entry>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates `text`; every unknown section or key is listed
    /// in the error.
    pub fn parse(text: &str, source: &str) -> CliResult<Self> {
        let mut config = Config {
            source: source.to_string(),
            entries: BTreeMap::new(),
        };
        let mut section = "run".to_string();
        let mut problems = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) => {
                        section = name.trim().to_string();
                        if !SCHEMA.iter().any(|(s, _)| *s == section) {
                            problems.push(format!("{source}:{line}: unknown section [{section}]"));
                        }
                    }
                    None => problems.push(format!("{source}:{line}: malformed section header")),
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                problems.push(format!("{source}:{line}: expected 'key = value'"));
                continue;
            };
            let key = key.trim().to_string();
            let known = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| keys.contains(&key.as_str()));
            match known {
                Some(true) => {
                    let entry = Entry {
                        value: value.trim().to_string(),
                        line,
                    };
                    if let Some(prev) = config.entries.insert((section.clone(), key.clone()), entry) {
                        problems.push(format!(
                            "{source}:{line}: duplicate key [{section}] {key} (first on line {})",
                            prev.line
                        ));
                    }
                }
                Some(false) => problems.push(format!("{source}:{line}: unknown key [{section}] {key}")),
                // the section itself was already reported
                None => problems.push(format!("{source}:{line}: unknown key [{section}] {key}")),
            }
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(CliError::usage(format!("invalid config:\n  {}", problems.join("\n  "))))
        }
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| e.value.as_str())
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(entry) = self.entries.get(&(section.to_string(), key.to_string())) else {
            return Ok(None);
        };
        entry.value.parse::<T>().map(Some).map_err(|e| {
            CliError::usage(format!(
                "{}:{}: invalid value '{}' for [{section}] {key}: {e}",
                self.source, entry.line, entry.value
            ))
        })
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(entry) = self.entries.get(&(section.to_string(), key.to_string())) else {
            return Ok(None);
        };
        entry
            .value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| {
                    CliError::usage(format!(
                        "{}:{}: invalid list item '{s}' for [{section}] {key}: {e}",
                        self.source, entry.line
                    ))
                })
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }
}
