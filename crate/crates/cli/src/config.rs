//! Run configuration. Every setting resolves as command-line flag, then the
//! TOML config file, then the built-in default.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Table,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Explainer {
    Lime,
    Shap,
    Both,
}

/// Settings accepted in the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub target: Option<String>,
    pub lags: Option<Vec<usize>>,
    pub grid: Option<PathBuf>,
    pub train_fraction: Option<f64>,
    pub n_splits: Option<usize>,
    pub explainer: Option<Explainer>,
    pub top_k: Option<usize>,
    pub lime_samples: Option<usize>,
    pub shap_iterations: Option<usize>,
    pub months: Option<usize>,
    pub features: Option<usize>,
    pub n_cases: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        toml::from_str(&text).map_err(|e| CliError::Validation(e.to_string()).in_file(path))
    }
}

/// Flag values as parsed; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub target: Option<String>,
    pub lags: Option<Vec<usize>>,
    pub grid: Option<PathBuf>,
    pub train_fraction: Option<f64>,
    pub n_splits: Option<usize>,
    pub explainer: Option<Explainer>,
    pub top_k: Option<usize>,
    pub lime_samples: Option<usize>,
    pub shap_iterations: Option<usize>,
    pub months: Option<usize>,
    pub features: Option<usize>,
    pub n_cases: Option<u32>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub target: String,
    pub lags: Vec<usize>,
    /// `None` selects the built-in grid.
    pub grid: Option<PathBuf>,
    pub train_fraction: f64,
    pub n_splits: usize,
    pub explainer: Explainer,
    pub top_k: usize,
    pub lime_samples: usize,
    pub shap_iterations: usize,
    pub months: usize,
    pub features: usize,
    pub n_cases: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            format: Format::Json,
            target: xaits_core::synth::TARGET.to_owned(),
            lags: vec![1, 2, 3, 4, 5],
            grid: None,
            train_fraction: 0.8,
            n_splits: 4,
            explainer: Explainer::Both,
            top_k: 5,
            lime_samples: 5000,
            shap_iterations: 2000,
            months: 120,
            features: 5,
            n_cases: 10,
        }
    }
}

impl RunConfig {
    pub fn resolve(flags: Overrides, file: FileConfig) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            format: flags.format.or(file.format).unwrap_or(d.format),
            target: flags.target.or(file.target).unwrap_or(d.target),
            lags: flags.lags.or(file.lags).unwrap_or(d.lags),
            grid: flags.grid.or(file.grid),
            train_fraction: flags.train_fraction.or(file.train_fraction).unwrap_or(d.train_fraction),
            n_splits: flags.n_splits.or(file.n_splits).unwrap_or(d.n_splits),
            explainer: flags.explainer.or(file.explainer).unwrap_or(d.explainer),
            top_k: flags.top_k.or(file.top_k).unwrap_or(d.top_k),
            lime_samples: flags.lime_samples.or(file.lime_samples).unwrap_or(d.lime_samples),
            shap_iterations: flags.shap_iterations.or(file.shap_iterations).unwrap_or(d.shap_iterations),
            months: flags.months.or(file.months).unwrap_or(d.months),
            features: flags.features.or(file.features).unwrap_or(d.features),
            n_cases: flags.n_cases.or(file.n_cases).unwrap_or(d.n_cases),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Validation(m.to_owned()));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1");
        }
        if self.n_splits == 0 {
            return bad("n_splits must be at least 1");
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return bad("lags must be a non-empty list of positive integers");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if self.shap_iterations == 0 {
            return bad("shap_iterations must be at least 1");
        }
        if self.target.is_empty() {
            return bad("target must not be empty");
        }
        Ok(())
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Fails fast on input paths that do not exist.
pub fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Validation(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}
