//! TOML run configuration. Every section is optional; missing keys take the
//! library defaults and unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use lambada_core::baselines::EdaParams;
use lambada_core::classify::ClassifierSpec;
use lambada_core::condlm::{GenerationParams, NGramParams};
use lambada_core::corpus::DataFormat;
use lambada_core::eval::{Method, DEFAULT_SIGNIFICANCE};
use lambada_core::lambada::{AugmentationPlan, FilterOptions};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunConfig,
    pub data: DataConfig,
    pub classifier: ClassifierSpec,
    pub lm: NGramParams,
    pub generation: GenerationParams,
    pub generator: GeneratorConfig,
    pub augment: AugmentConfig,
    pub eda: EdaParams,
    pub grid: GridConfig,
    pub report: ReportConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Parent of run directories; `LAMBADA_RUN_DIR` and `--root` win.
    pub root: Option<PathBuf>,
    pub label: Option<String>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Raw corpus for `prepare`.
    pub input: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub ratios: [f64; 3],
    pub split_seed: u64,
    /// Prepared splits; default to the files `prepare` writes into the run.
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Unlabeled sentences, one per line, merged into the n-gram counts.
    pub prior: Option<PathBuf>,
    /// Unlabeled sentences for the weak-label method.
    pub unlabeled: Option<PathBuf>,
    /// Synonym lexicon for EDA; the bundled one when absent.
    pub lexicon: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: None,
            ratios: [0.8, 0.1, 0.1],
            split_seed: 0,
            train: None,
            validation: None,
            test: None,
            prior: None,
            unlabeled: None,
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// External generator command line; the built-in n-gram model when absent.
    pub command: Option<String>,
    pub timeout_secs: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            command: None,
            timeout_secs: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMethod {
    Lambada,
    Eda,
    WeakLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub method: AugmentMethod,
    /// `N_y` for every class.
    pub per_class: usize,
    /// Top classes up to this size instead of a uniform `per_class`.
    pub balance_to: Option<usize>,
    pub factor: usize,
    pub seed: u64,
    pub filter: FilterOptions,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            method: AugmentMethod::Lambada,
            per_class: 20,
            balance_to: None,
            factor: AugmentationPlan::DEFAULT_OVERSAMPLE,
            seed: 0,
            filter: FilterOptions::default(),
        }
    }
}

/// Either a seed count (`20` means seeds 0..20) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub classifiers: Vec<ClassifierSpec>,
    pub methods: Vec<Method>,
    pub samples_per_class: Vec<usize>,
    pub seeds: Seeds,
    pub unlabeled_per_class: usize,
    pub significance: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            classifiers: vec![ClassifierSpec::default(), ClassifierSpec::logreg()],
            methods: vec![Method::Baseline, Method::Lambada],
            samples_per_class: vec![5, 10, 20, 50, 100],
            seeds: Seeds::Count(20),
            unlabeled_per_class: 20,
            significance: DEFAULT_SIGNIFICANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub formats: Vec<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            formats: vec!["table".into()],
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {}", path.display(), e.0)))
    }
}
