use std::fmt;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::Deserialize;

/// A bad flag or configuration value, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Optional TOML document; keys are the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,

    pub size: Option<usize>,
    pub classes: Option<usize>,
    pub per_class: Option<usize>,
    pub frac: Option<f64>,

    pub eta0: Option<f64>,
    pub eta_max: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub augment: Option<bool>,

    pub max_rotation: Option<f64>,
    pub max_translate: Option<f64>,
    pub scale_min: Option<f64>,
    pub scale_max: Option<f64>,
    pub fill: Option<f32>,

    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub svm_epochs: Option<usize>,
    pub kmeans_iters: Option<usize>,
    pub max_descriptors: Option<usize>,

    pub n: Option<usize>,
    pub count: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Resolves one setting: an explicit flag wins, then the config file, then
/// the flag's built-in default.
pub fn pick<T>(matches: &ArgMatches, id: &str, flag: T, file: Option<T>) -> T {
    if matches.value_source(id) == Some(ValueSource::CommandLine) {
        flag
    } else {
        file.unwrap_or(flag)
    }
}

pub fn given(matches: &ArgMatches, id: &str) -> bool {
    matches.value_source(id) == Some(ValueSource::CommandLine)
}
