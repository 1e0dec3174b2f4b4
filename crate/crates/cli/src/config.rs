use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spectral_thermo::SystemDescriptor64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EvalLambda,
    TEntropy,
    DualEntropy,
    VariationalCheck,
    Pressure,
    RuelleWalters,
    LatushkinStepin,
    LpRadius,
    EntropyStatistic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::EvalLambda => "eval-lambda",
            Self::TEntropy => "t-entropy",
            Self::DualEntropy => "dual-entropy",
            Self::VariationalCheck => "variational-check",
            Self::Pressure => "pressure",
            Self::RuelleWalters => "ruelle-walters",
            Self::LatushkinStepin => "latushkin-stepin",
            Self::LpRadius => "lp-radius",
            Self::EntropyStatistic => "entropy-statistic",
        }
    }

    /// Commands whose optimizer restarts from random points.
    pub fn uses_multistart(self) -> bool {
        matches!(self, Self::RuelleWalters | Self::LatushkinStepin)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Command-specific parameters; which ones are read depends on the command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// Edge weight `a` of `aT_ρ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    /// Transition matrix of a Markov measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_range: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_starts: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    pub system: SystemDescriptor64,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub output: Option<OutputSpec>,
}

/// A rejected configuration; `field` is the dotted path of the culprit.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ValidationError {}

impl FromStr for JobConfig {
    type Err = ValidationError;

    /// Parses TOML, or JSON when the text starts with `{`.
    fn from_str(src: &str) -> Result<Self, Self::Err> {
        if src.trim_start().starts_with('{') {
            serde_json::from_str(src).map_err(|e| ValidationError::new("config", e.to_string()))
        } else {
            toml::from_str(src).map_err(|e| ValidationError::new("config", e.to_string().trim_end().to_string()))
        }
    }
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, ValidationError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ValidationError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        src.parse()
    }
}
