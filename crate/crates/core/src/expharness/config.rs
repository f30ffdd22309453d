use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetSpec;
use crate::bayes::ChainConfig;
use crate::error::{Result, SysIdError};

/// Estimators compared by an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ls")]
    Ls,
    #[serde(rename = "svd-truncated")]
    SvdTruncated,
    #[serde(rename = "bayes-gibbs")]
    BayesGibbs,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::SvdTruncated => "svd-truncated",
            Method::BayesGibbs => "bayes-gibbs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = SysIdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Method::Ls),
            "svd-truncated" | "svd" => Ok(Method::SvdTruncated),
            "bayes-gibbs" | "gibbs" => Ok(Method::BayesGibbs),
            other => Err(SysIdError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Model order used for truncation, sampling and recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RankRepr", into = "RankRepr")]
pub enum RankPolicy {
    Fixed(usize),
    /// Largest `r` with `σ_r / σ_1 > 1e-3` in the weighted LS spectrum.
    #[default]
    Auto,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RankRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<RankRepr> for RankPolicy {
    type Error = String;

    fn try_from(r: RankRepr) -> std::result::Result<Self, String> {
        match r {
            RankRepr::Fixed(0) => Err("rank must be positive".into()),
            RankRepr::Fixed(n) => Ok(RankPolicy::Fixed(n)),
            RankRepr::Named(s) if s == "auto" => Ok(RankPolicy::Auto),
            RankRepr::Named(s) => Err(format!("rank must be a positive integer or \"auto\", got {s:?}")),
        }
    }
}

impl From<RankPolicy> for RankRepr {
    fn from(p: RankPolicy) -> Self {
        match p {
            RankPolicy::Fixed(n) => RankRepr::Fixed(n),
            RankPolicy::Auto => RankRepr::Named("auto".into()),
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// Experiment grid read from a TOML file: top-level `key = value` pairs, an
/// optional `[chain]` table and one `[[dataset]]` block per dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetSpec>,
    pub noise_levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials_per_cell: usize,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default, rename = "rank")]
    pub rank_policy: RankPolicy,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Normalize prediction errors by the uncontaminated outputs.
    #[serde(default)]
    pub clean_denominator: bool,
}

impl ExperimentConfig {
    /// Parses `text`; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| SysIdError::Config(e.to_string()))?;
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base_dir.join(&d.path);
            }
            if let Some(t) = &mut d.truth_model {
                if t.is_relative() {
                    *t = base_dir.join(&*t);
                }
            }
        }
        if cfg.output_path.is_relative() {
            cfg.output_path = base_dir.join(&cfg.output_path);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| SysIdError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.noise_levels.is_empty() || self.methods.is_empty() {
            return Err(SysIdError::Config(
                "datasets, noise_levels and methods must be nonempty".into(),
            ));
        }
        if self.trials_per_cell == 0 {
            return Err(SysIdError::Config("trials_per_cell must be positive".into()));
        }
        if let Some(a) = self.noise_levels.iter().find(|a| **a < 0.0 || !a.is_finite()) {
            return Err(SysIdError::Config(format!(
                "noise level {a} must be a nonnegative number"
            )));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(SysIdError::Config("dataset names must be unique".into()));
        }
        for d in &self.datasets {
            d.validate()?;
        }
        self.chain.validate()
    }
}
