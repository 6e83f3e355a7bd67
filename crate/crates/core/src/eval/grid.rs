use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcnemar::{self, improvement_percent, DEFAULT_SIGNIFICANCE};
use crate::baselines::{eda_augment, strip_labels, weak_label, EdaParams, SynonymLexicon};
use crate::classify::{correctness, ClassifierModel, ClassifierSpec};
use crate::condlm::GenerationParams;
use crate::corpus::{complement, subsample_per_class, Dataset};
use crate::generator::GeneratorSpec;
use crate::lambada::{
    plan_balanced, retrain, run_lambada, AugmentationPlan, FilterOptions, FilterReport,
    LambadaOutcome,
};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Lambada,
    Eda,
    WeakLabel,
    GptUnlabeled,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Baseline,
        Method::Lambada,
        Method::Eda,
        Method::WeakLabel,
        Method::GptUnlabeled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Lambada => "lambada",
            Method::Eda => "eda",
            Method::WeakLabel => "weak_label",
            Method::GptUnlabeled => "gpt_unlabeled",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// How LAMBADA targets are set inside a grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSettings {
    /// `N_y` for every class.
    pub per_class: usize,
    /// When set, targets top every class up to this size instead.
    pub balance_to: Option<usize>,
    pub oversample_factor: usize,
    pub generation: GenerationParams,
    pub filter: FilterOptions,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            per_class: 20,
            balance_to: None,
            oversample_factor: AugmentationPlan::DEFAULT_OVERSAMPLE,
            generation: GenerationParams::default(),
            filter: FilterOptions::default(),
        }
    }
}

impl PlanSettings {
    pub fn plan_for(&self, d: &Dataset, seed: u64) -> AugmentationPlan {
        let mut plan = match self.balance_to {
            Some(t) => plan_balanced(d, t),
            None => AugmentationPlan::uniform(d.num_classes(), self.per_class),
        };
        plan.oversample_factor = self.oversample_factor;
        plan.generation = self.generation;
        plan.filter = self.filter;
        plan.seed = seed;
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub classifiers: Vec<ClassifierSpec>,
    pub methods: Vec<Method>,
    pub samples_per_class: Vec<usize>,
    pub seeds: Vec<u64>,
    pub plan: PlanSettings,
    pub eda: EdaParams,
    /// Unlabeled originals drawn per class for the weak-labeling arm.
    pub unlabeled_per_class: usize,
    pub significance: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            classifiers: vec![ClassifierSpec::default(), ClassifierSpec::logreg()],
            methods: vec![Method::Baseline, Method::Lambada],
            samples_per_class: vec![5, 10, 20, 50, 100],
            seeds: (0..20).collect(),
            plan: PlanSettings::default(),
            eda: EdaParams::default(),
            unlabeled_per_class: 20,
            significance: DEFAULT_SIGNIFICANCE,
        }
    }
}

impl GridSettings {
    /// All problems at once, so a config can be fixed in one pass.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.classifiers.is_empty() {
            p.push("at least one classifier is required".to_owned());
        }
        if self.methods.is_empty() {
            p.push("at least one method is required".to_owned());
        }
        if self.samples_per_class.is_empty() {
            p.push("at least one samples_per_class value is required".to_owned());
        }
        if self.samples_per_class.contains(&0) {
            p.push("samples_per_class values must be positive".to_owned());
        }
        if self.seeds.is_empty() {
            p.push("at least one seed is required".to_owned());
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            p.push("significance must lie in (0, 1)".to_owned());
        }
        if self.plan.oversample_factor == 0 {
            p.push("plan.oversample_factor must be at least 1".to_owned());
        }
        if let Err(e) = self.plan.generation.validate() {
            p.push(format!("plan.generation: {e}"));
        }
        if self.methods.contains(&Method::Eda) {
            if let Err(e) = self.eda.validate() {
                p.push(format!("eda: {e}"));
            }
        }
        if self.methods.contains(&Method::WeakLabel) && self.unlabeled_per_class == 0 {
            p.push("unlabeled_per_class must be positive for weak_label".to_owned());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(p.join("; ")))
        }
    }

    /// Requested methods in canonical order, baseline always first.
    pub fn effective_methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.methods.clone();
        m.push(Method::Baseline);
        m.sort();
        m.dedup();
        m
    }

    /// Display names, disambiguated when a kind appears twice.
    pub fn classifier_names(&self) -> Vec<String> {
        self.classifiers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let dup = self.classifiers.iter().filter(|o| o.name() == c.name()).count() > 1;
                if dup {
                    format!("{}#{}", c.name(), i + 1)
                } else {
                    c.name().to_owned()
                }
            })
            .collect()
    }
}

/// Inputs shared by every cell.
#[derive(Debug, Clone)]
pub struct GridData {
    /// Pool the per-class training subsamples (and unlabeled originals) are
    /// drawn from.
    pub train_pool: Dataset,
    /// Shared test set; every run is scored on all of it.
    pub test: Dataset,
    pub generator: GeneratorSpec,
    pub lexicon: SynonymLexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub classifier: String,
    pub samples_per_class: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    /// Per-test-item correctness; empty when the run failed.
    pub correct: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_report: Option<FilterReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub classifier: String,
    pub samples_per_class: usize,
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub mean_accuracy: Option<f64>,
    pub pooled_accuracy: Option<f64>,
    pub improvement_pct: Option<f64>,
    pub mcnemar_b: Option<usize>,
    pub mcnemar_c: Option<usize>,
    pub p_value: Option<f64>,
    pub significant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    pub significance: f64,
    pub classifiers: Vec<String>,
    pub methods: Vec<Method>,
    pub samples_per_class: Vec<usize>,
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

impl GridResults {
    pub fn row(&self, classifier: &str, samples_per_class: usize, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| {
            r.classifier == classifier && r.samples_per_class == samples_per_class && r.method == method
        })
    }
}

const TAG_SUBSAMPLE: u64 = 1;
const TAG_PLAN: u64 = 2;
const TAG_EDA: u64 = 3;
const TAG_UNLABELED: u64 = 4;

struct Cell<'a> {
    classifier: &'a ClassifierSpec,
    classifier_name: &'a str,
    samples_per_class: usize,
    seed: u64,
}

impl Cell<'_> {
    fn run(&self, data: &GridData, settings: &GridSettings, methods: &[Method]) -> Vec<RunResult> {
        let k = self.samples_per_class as u64;
        let result = |method, outcome: Result<(Vec<bool>, Option<FilterReport>)>| {
            let (accuracy, correct, filter_report, error) = match outcome {
                Ok((bits, report)) => {
                    let acc = bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64;
                    (Some(acc), bits, report, None)
                }
                Err(e) => (None, Vec::new(), None, Some(e.to_string())),
            };
            RunResult {
                method,
                classifier: self.classifier_name.to_owned(),
                samples_per_class: self.samples_per_class,
                seed: self.seed,
                accuracy,
                correct,
                filter_report,
                error,
            }
        };

        let sub = subsample_per_class(
            &data.train_pool,
            self.samples_per_class,
            seed::derive(self.seed, &[k, TAG_SUBSAMPLE]),
        )
        .map(|s| {
            for f in &s.shortfalls {
                log::warn!(
                    "class {} has {} of {} requested training items",
                    f.label, f.available, f.requested
                );
            }
            s.dataset
        });
        let sub = match sub {
            Ok(s) => s,
            Err(e) => {
                let msg = e.to_string();
                return methods
                    .iter()
                    .map(|&m| result(m, Err(Error::invalid(msg.clone()))))
                    .collect();
            }
        };
        let baseline: Result<ClassifierModel> = self.classifier.train(&sub);
        let score = |m: Result<ClassifierModel>| -> Result<Vec<bool>> { correctness(&m?, &data.test) };
        let lambada: Option<Result<LambadaOutcome>> = methods
            .iter()
            .any(|m| matches!(m, Method::Lambada | Method::GptUnlabeled))
            .then(|| {
                let plan = settings.plan.plan_for(&sub, seed::derive(self.seed, &[k, TAG_PLAN]));
                run_lambada(&sub, self.classifier, &data.generator, &plan)
            });
        let weak_retrain = |texts: Vec<String>| -> Result<Vec<bool>> {
            let h = baseline.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
            let weak = weak_label(h, &texts)?;
            score(retrain(&sub, &weak.dataset, self.classifier))
        };

        methods
            .iter()
            .map(|&method| {
                let outcome = match method {
                    Method::Baseline => baseline
                        .as_ref()
                        .map_err(|e| Error::invalid(e.to_string()))
                        .and_then(|h| correctness(h, &data.test))
                        .map(|b| (b, None)),
                    Method::Lambada => match lambada.as_ref().expect("computed above") {
                        Ok(out) => score(retrain(&sub, &out.synthesized, self.classifier))
                            .map(|b| (b, Some(out.report.clone()))),
                        Err(e) => Err(Error::invalid(e.to_string())),
                    },
                    Method::GptUnlabeled => match lambada.as_ref().expect("computed above") {
                        Ok(out) => weak_retrain(strip_labels(&out.synthesized)).map(|b| (b, None)),
                        Err(e) => Err(Error::invalid(e.to_string())),
                    },
                    Method::Eda => {
                        let params = EdaParams {
                            seed: seed::derive(self.seed, &[k, TAG_EDA]),
                            ..settings.eda.clone()
                        };
                        eda_augment(&sub, &data.lexicon, &params)
                            .and_then(|out| score(retrain(&sub, &out.dataset, self.classifier)))
                            .map(|b| (b, None))
                    }
                    Method::WeakLabel => {
                        let rest = complement(&data.train_pool, &sub);
                        subsample_per_class(
                            &rest,
                            settings.unlabeled_per_class,
                            seed::derive(self.seed, &[k, TAG_UNLABELED]),
                        )
                        .and_then(|u| weak_retrain(strip_labels(&u.dataset)))
                        .map(|b| (b, None))
                    }
                };
                if let Err(e) = &outcome {
                    log::warn!(
                        "{method} / {} / k={} / seed={}: {e}",
                        self.classifier_name, self.samples_per_class, self.seed
                    );
                }
                result(method, outcome)
            })
            .collect()
    }
}

/// Runs every (classifier, samples per class, seed) cell and summarizes.
/// Cells run in parallel on the current rayon pool; output order and values
/// do not depend on scheduling.
pub fn run_experiment_grid(data: &GridData, settings: &GridSettings) -> Result<GridResults> {
    settings.validate()?;
    if data.test.is_empty() {
        return Err(Error::EmptyDataset("test set".into()));
    }
    if data.train_pool.labels() != data.test.labels() {
        return Err(Error::invalid("train and test label maps differ"));
    }
    let methods = settings.effective_methods();
    let names = settings.classifier_names();
    let mut cells = Vec::new();
    for (ci, classifier) in settings.classifiers.iter().enumerate() {
        for &k in &settings.samples_per_class {
            for &s in &settings.seeds {
                cells.push(Cell {
                    classifier,
                    classifier_name: &names[ci],
                    samples_per_class: k,
                    seed: s,
                });
            }
        }
    }
    let runs: Vec<RunResult> = cells
        .par_iter()
        .flat_map_iter(|cell| cell.run(data, settings, &methods))
        .collect();
    let summary = summarize(&runs, &names, &settings.samples_per_class, &methods, settings.significance);
    Ok(GridResults {
        significance: settings.significance,
        classifiers: names,
        methods,
        samples_per_class: settings.samples_per_class.clone(),
        runs,
        summary,
    })
}

/// Mean accuracy per cell, relative improvement over the baseline mean, and
/// McNemar on bitmaps pooled over the seeds where both runs succeeded.
pub fn summarize(
    runs: &[RunResult],
    classifiers: &[String],
    sizes: &[usize],
    methods: &[Method],
    significance: f64,
) -> Vec<SummaryRow> {
    let mut by_key: BTreeMap<(&str, usize, Method), BTreeMap<u64, &RunResult>> = BTreeMap::new();
    for r in runs {
        by_key
            .entry((r.classifier.as_str(), r.samples_per_class, r.method))
            .or_default()
            .insert(r.seed, r);
    }
    let empty = BTreeMap::new();
    let mut rows = Vec::new();
    for clf in classifiers {
        for &k in sizes {
            let base = by_key.get(&(clf.as_str(), k, Method::Baseline)).unwrap_or(&empty);
            let base_mean = mean_accuracy(base);
            for &m in methods {
                let cell = by_key.get(&(clf.as_str(), k, m)).unwrap_or(&empty);
                let ok: Vec<&RunResult> = cell.values().copied().filter(|r| r.accuracy.is_some()).collect();
                let mean = mean_accuracy(cell);
                let pooled: Vec<bool> = ok.iter().flat_map(|r| r.correct.iter().copied()).collect();
                let pooled_accuracy = (!pooled.is_empty())
                    .then(|| pooled.iter().filter(|&&b| b).count() as f64 / pooled.len() as f64);
                let mut row = SummaryRow {
                    classifier: clf.clone(),
                    samples_per_class: k,
                    method: m,
                    runs: cell.len(),
                    failures: cell.len() - ok.len(),
                    mean_accuracy: mean,
                    pooled_accuracy,
                    improvement_pct: None,
                    mcnemar_b: None,
                    mcnemar_c: None,
                    p_value: None,
                    significant: None,
                };
                if m != Method::Baseline {
                    row.improvement_pct = match (base_mean, mean) {
                        (Some(b), Some(x)) => improvement_percent(b, x).ok(),
                        _ => None,
                    };
                    let (mut a_bits, mut b_bits) = (Vec::new(), Vec::new());
                    for r in &ok {
                        if let Some(br) = base.get(&r.seed).filter(|br| br.accuracy.is_some()) {
                            a_bits.extend_from_slice(&r.correct);
                            b_bits.extend_from_slice(&br.correct);
                        }
                    }
                    if let Ok(t) = mcnemar::mcnemar_test_at(&a_bits, &b_bits, significance) {
                        row.mcnemar_b = Some(t.b);
                        row.mcnemar_c = Some(t.c);
                        row.p_value = Some(t.p_value);
                        row.significant = Some(t.is_significant());
                    }
                }
                rows.push(row);
            }
        }
    }
    rows
}

fn mean_accuracy(cell: &BTreeMap<u64, &RunResult>) -> Option<f64> {
    let accs: Vec<f64> = cell.values().filter_map(|r| r.accuracy).collect();
    (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
}
