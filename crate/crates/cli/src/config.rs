//! Layered run configuration.
//!
//! Flags beat the config file, the config file beats built-in defaults.
//! The file is TOML with the same names as the long flags; unknown keys
//! are rejected so typos fail loudly instead of silently using defaults.

use crate::{Failure, OutFormat};
use hoi_core::hypothesis::{Correction, Statistic, TestKind};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kind: Option<String>,
    pub statistic: Option<String>,
    pub alpha: Option<f64>,
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
    pub format: Option<String>,
    pub early_exit: Option<bool>,
    pub correction: Option<String>,
}

impl FileConfig {
    pub fn format_parsed(&self) -> Result<Option<OutFormat>, Failure> {
        self.format
            .as_deref()
            .map(|token| match token {
                "csv" => Ok(OutFormat::Csv),
                "json" => Ok(OutFormat::Json),
                other => Err(Failure::Usage(format!(
                    "unknown format `{other}` in config file (expected csv or json)"
                ))),
            })
            .transpose()
    }
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("reading config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| Failure::Usage(format!("parsing config {}: {e}", path.display())))
}

pub fn parse_kind(token: &str) -> Result<TestKind, Failure> {
    match token {
        "streitberg" => Ok(TestKind::Streitberg),
        "lancaster" => Ok(TestKind::Lancaster),
        "joint" => Ok(TestKind::JointIndependence),
        "modified-dhsic" => Ok(TestKind::ModifiedDhsic),
        other => Err(Failure::Usage(format!(
            "unknown kind `{other}` (expected streitberg, lancaster, joint or modified-dhsic)"
        ))),
    }
}

pub fn parse_statistic(token: &str) -> Result<Statistic, Failure> {
    match token {
        "dhsic" => Ok(Statistic::Dhsic),
        "lancaster" => Ok(Statistic::Lancaster),
        "streitberg" => Ok(Statistic::Streitberg),
        other => Err(Failure::Usage(format!(
            "unknown statistic `{other}` (expected dhsic, lancaster or streitberg)"
        ))),
    }
}

pub fn parse_correction(token: &str) -> Result<Correction, Failure> {
    match token {
        "none" => Ok(Correction::None),
        "bonferroni" => Ok(Correction::Bonferroni),
        other => Err(Failure::Usage(format!(
            "unknown correction `{other}` (expected none or bonferroni)"
        ))),
    }
}

/// First of (flag, file, default), the precedence used by every knob.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
