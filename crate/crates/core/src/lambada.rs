//! The four-step augmentation pipeline.
//!
//! 1. train the baseline classifier `h = A(D)`;
//! 2. adapt the generator to `D`;
//! 3. draw `oversample_factor · N_y` candidates conditioned on each class `y`;
//! 4. keep a candidate `(x, y)` only if `h(x) = y`, rank the survivors of
//!    each class by `h`'s confidence and retain the top `N_y`.
//!
//! A candidate therefore needs two votes for `y`: the generator was
//! conditioned on `y`, and the classifier predicts `y`. Confidence only
//! orders candidates that already have both votes.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{accuracy, ClassifierModel, ClassifierSpec};
use crate::condlm::GenerationParams;
use crate::corpus::{ClassId, Dataset, LabelMap, LabeledSentence};
use crate::generator::{GeneratorSpec, SentenceGenerator};
use crate::{seed, Error, Result, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterOptions {
    pub require_label_agreement: bool,
    pub exclude_truncated: bool,
    pub dedup: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            require_label_agreement: true,
            exclude_truncated: false,
            dedup: true,
        }
    }
}

/// Per-class synthesis targets `N_y` and how to reach them.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    /// `targets[i]` is `N_y` for class id `i + 1`.
    pub targets: Vec<usize>,
    pub oversample_factor: usize,
    pub generation: GenerationParams,
    pub filter: FilterOptions,
    pub seed: u64,
}

impl AugmentationPlan {
    pub const DEFAULT_OVERSAMPLE: usize = 10;

    pub fn new(targets: Vec<usize>) -> Self {
        Self {
            targets,
            oversample_factor: Self::DEFAULT_OVERSAMPLE,
            generation: GenerationParams::default(),
            filter: FilterOptions::default(),
            seed: 0,
        }
    }

    /// The same `N_y` for each of `classes` classes.
    pub fn uniform(classes: usize, per_class: usize) -> Self {
        Self::new(vec![per_class; classes])
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn target(&self, class: ClassId) -> usize {
        self.targets.get(class as usize - 1).copied().unwrap_or(0)
    }

    /// `Σ N_y`.
    pub fn total(&self) -> usize {
        self.targets.iter().sum()
    }

    /// Pool size `oversample_factor · Σ N_y`.
    pub fn pool_size(&self) -> usize {
        self.oversample_factor * self.total()
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.oversample_factor == 0 {
            return Err(Error::invalid("oversample_factor must be at least 1"));
        }
        if self.targets.len() != classes {
            return Err(Error::invalid(format!(
                "plan has {} class targets, dataset has {classes} classes",
                self.targets.len()
            )));
        }
        self.generation.validate()
    }
}

/// `N_y = max(0, target − n_y)` so every class ends up with `target` items.
pub fn plan_balanced(d: &Dataset, target_per_class: usize) -> AugmentationPlan {
    AugmentationPlan::new(
        d.class_counts()
            .into_iter()
            .map(|n| target_per_class.saturating_sub(n))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Retained,
    LabelMismatch,
    LowRank,
    Duplicate,
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub sentence: LabeledSentence,
    /// Generation index within its class.
    pub index: usize,
    pub truncated: bool,
    pub gen_seed: u64,
    pub predicted: Option<ClassId>,
    pub confidence: Option<f64>,
    pub verdict: Option<Verdict>,
}

/// The raw pool `D*`, annotated in place by [`filter_pool`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedPool {
    pub labels: LabelMap,
    pub candidates: Vec<Candidate>,
}

#[derive(Serialize)]
struct PoolRecord<'a> {
    text: &'a str,
    label: &'a str,
    truncated: bool,
    gen_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
}

impl SynthesizedPool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn of_class(&self, class: ClassId) -> impl Iterator<Item = &Candidate> {
        self.candidates
            .iter()
            .filter(move |c| c.sentence.label == class)
    }

    /// JSONL with `text`, `label`, `truncated`, `gen_seed`, plus
    /// `confidence` and `verdict` once filtered.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for c in &self.candidates {
            let rec = PoolRecord {
                text: &c.sentence.text,
                label: self.labels.name(c.sentence.label).unwrap_or_default(),
                truncated: c.truncated,
                gen_seed: c.gen_seed,
                confidence: c.confidence,
                verdict: c.verdict,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Dataset view of every candidate, ignoring verdicts.
    pub fn to_dataset(&self) -> Dataset {
        Dataset::new(
            self.labels.clone(),
            self.candidates.iter().map(|c| c.sentence.clone()).collect(),
        )
        .expect("candidates carry labels from the pool's map")
    }
}

/// Draws exactly `oversample_factor · N_y` candidates for each class. The
/// batch for class `y` is seeded with `derive(plan.seed, [y])`.
pub fn synthesize_pool(
    g: &mut dyn SentenceGenerator,
    labels: &LabelMap,
    plan: &AugmentationPlan,
) -> Result<SynthesizedPool> {
    plan.validate(labels.len())?;
    let mut candidates = Vec::with_capacity(plan.pool_size());
    for class in labels.ids() {
        let count = plan.oversample_factor * plan.target(class);
        if count == 0 {
            continue;
        }
        if !g.supports(class) {
            return Err(Error::UnknownClass(
                labels.name(class).unwrap_or("?").to_owned(),
            ));
        }
        let batch_seed = seed::derive(plan.seed, &[u64::from(class)]);
        let samples = g.generate(class, count, batch_seed, &plan.generation)?;
        if samples.len() != count {
            return Err(Error::Protocol(format!(
                "{} returned {} of {count} requested sentences",
                g.describe(),
                samples.len()
            )));
        }
        candidates.extend(samples.into_iter().enumerate().map(|(index, s)| Candidate {
            sentence: s.sentence,
            index,
            truncated: s.truncated,
            gen_seed: s.gen_seed,
            predicted: None,
            confidence: None,
            verdict: None,
        }));
    }
    Ok(SynthesizedPool {
        labels: labels.clone(),
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub id: ClassId,
    pub target: usize,
    pub generated: usize,
    pub label_mismatch: usize,
    pub duplicates: usize,
    pub truncated_excluded: usize,
    /// Candidates that reached the confidence ranking.
    pub ranked: usize,
    pub retained: usize,
    pub shortfall: usize,
    pub min_retained_confidence: Option<f64>,
    pub max_retained_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub oversample_factor: usize,
    pub pool_size: usize,
    pub retained: usize,
    pub classes: Vec<ClassReport>,
}

impl FilterReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Applies the verification and ranking rule to every class of the pool and
/// returns `D_synthesized`. `existing` is the training set used for
/// duplicate detection.
pub fn filter_pool(
    pool: &mut SynthesizedPool,
    h: &ClassifierModel,
    plan: &AugmentationPlan,
    existing: &Dataset,
) -> Result<(Dataset, FilterReport)> {
    if h.labels != pool.labels {
        return Err(Error::invalid("classifier and pool use different label maps"));
    }
    let predictions: Vec<_> = pool
        .candidates
        .par_iter()
        .map(|c| h.predict_tokens(&c.sentence.tokens))
        .collect::<Result<_>>()?;
    for (c, p) in pool.candidates.iter_mut().zip(predictions) {
        c.predicted = Some(p.label);
        c.confidence = Some(p.confidence);
        c.verdict = None;
    }

    let opts = plan.filter;
    let mut seen: HashSet<String> = if opts.dedup {
        existing.items().iter().map(|s| s.normalized_text()).collect()
    } else {
        HashSet::new()
    };
    let mut retained_items = Vec::new();
    let mut classes = Vec::new();
    for class in pool.labels.ids() {
        let target = plan.target(class);
        let mut report = ClassReport {
            class: pool.labels.name(class).unwrap_or_default().to_owned(),
            id: class,
            target,
            generated: 0,
            label_mismatch: 0,
            duplicates: 0,
            truncated_excluded: 0,
            ranked: 0,
            retained: 0,
            shortfall: 0,
            min_retained_confidence: None,
            max_retained_confidence: None,
        };
        let mut ranked: Vec<usize> = Vec::new();
        for (i, c) in pool.candidates.iter_mut().enumerate() {
            if c.sentence.label != class {
                continue;
            }
            report.generated += 1;
            let verdict = if opts.exclude_truncated && c.truncated {
                report.truncated_excluded += 1;
                Some(Verdict::Truncated)
            } else if opts.require_label_agreement && c.predicted != Some(class) {
                report.label_mismatch += 1;
                Some(Verdict::LabelMismatch)
            } else if opts.dedup && !seen.insert(c.sentence.normalized_text()) {
                report.duplicates += 1;
                Some(Verdict::Duplicate)
            } else {
                ranked.push(i);
                None
            };
            c.verdict = verdict;
        }
        report.ranked = ranked.len();
        // stable sort keeps generation order among equal confidences
        ranked.sort_by(|&a, &b| {
            let ca = pool.candidates[a].confidence.unwrap_or(0.0);
            let cb = pool.candidates[b].confidence.unwrap_or(0.0);
            cb.total_cmp(&ca)
                .then(pool.candidates[a].index.cmp(&pool.candidates[b].index))
        });
        for (rank, &i) in ranked.iter().enumerate() {
            let c = &mut pool.candidates[i];
            if rank < target {
                c.verdict = Some(Verdict::Retained);
                let conf = c.confidence.unwrap_or(0.0);
                report.min_retained_confidence =
                    Some(report.min_retained_confidence.map_or(conf, |m| m.min(conf)));
                report.max_retained_confidence =
                    Some(report.max_retained_confidence.map_or(conf, |m| m.max(conf)));
                retained_items.push(c.sentence.clone());
            } else {
                c.verdict = Some(Verdict::LowRank);
                if opts.dedup {
                    // only retained texts block later duplicates
                    seen.remove(&c.sentence.normalized_text());
                }
            }
        }
        report.retained = ranked.len().min(target);
        report.shortfall = target.saturating_sub(report.retained);
        classes.push(report);
    }
    let report = FilterReport {
        oversample_factor: plan.oversample_factor,
        pool_size: pool.len(),
        retained: retained_items.len(),
        classes,
    };
    Ok((Dataset::new(pool.labels.clone(), retained_items)?, report))
}

/// Artifacts of one pass of the pipeline.
#[derive(Debug, Clone)]
pub struct LambadaOutcome {
    pub baseline: ClassifierModel,
    pub synthesized: Dataset,
    pub report: FilterReport,
    pub pool: SynthesizedPool,
}

/// Runs steps 1–4 on `d`. Train `h̄` afterwards with [`retrain`].
pub fn run_lambada(
    d: &Dataset,
    classifier: &ClassifierSpec,
    generator: &GeneratorSpec,
    plan: &AugmentationPlan,
) -> Result<LambadaOutcome> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("training set".into()));
    }
    plan.validate(d.num_classes())?;
    let baseline = classifier.train(d).map_err(Error::at(Stage::Baseline))?;
    let mut pool = if plan.total() == 0 {
        SynthesizedPool {
            labels: d.labels().clone(),
            candidates: Vec::new(),
        }
    } else {
        let mut g = generator.fit(d).map_err(Error::at(Stage::FineTune))?;
        log::debug!("synthesizing {} candidates with {}", plan.pool_size(), g.describe());
        synthesize_pool(g.as_mut(), d.labels(), plan).map_err(Error::at(Stage::Synthesize))?
    };
    let (synthesized, report) =
        filter_pool(&mut pool, &baseline, plan, d).map_err(Error::at(Stage::Filter))?;
    Ok(LambadaOutcome {
        baseline,
        synthesized,
        report,
        pool,
    })
}

/// `h̄ = A(D ∪ D_synthesized)`, unweighted.
pub fn retrain(
    d: &Dataset,
    synthesized: &Dataset,
    classifier: &ClassifierSpec,
) -> Result<ClassifierModel> {
    classifier
        .train(&d.union(synthesized)?)
        .map_err(Error::at(Stage::Retrain))
}

/// Stops iterating when validation accuracy falls more than `tolerance`
/// below the previous accepted round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftGuard {
    pub tolerance: f64,
}

impl DriftGuard {
    pub fn drifted(&self, previous: f64, current: f64) -> bool {
        current < previous - self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub round: usize,
    pub synthesized: Dataset,
    pub report: FilterReport,
    pub validation_accuracy: f64,
    /// The round tripped the drift guard; its data was not kept.
    pub drifted: bool,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub baseline_accuracy: f64,
    pub rounds: Vec<RoundResult>,
    /// `D` plus every accepted round's retained set.
    pub augmented: Dataset,
    pub stopped_early: bool,
}

/// Re-applies the pipeline: round `r` runs on `D` united with all earlier
/// accepted retained sets. Round 1 uses `plan.seed`; later rounds use
/// `derive(plan.seed, [r])`.
pub fn iterate(
    d: &Dataset,
    validation: &Dataset,
    rounds: usize,
    classifier: &ClassifierSpec,
    generator: &GeneratorSpec,
    plan: &AugmentationPlan,
    guard: DriftGuard,
) -> Result<IterationOutcome> {
    if rounds == 0 {
        return Err(Error::invalid("rounds must be at least 1"));
    }
    let baseline = classifier.train(d).map_err(Error::at(Stage::Baseline))?;
    let baseline_accuracy = accuracy(&baseline, validation)?;
    let mut previous = baseline_accuracy;
    let mut current = d.clone();
    let mut results = Vec::new();
    let mut stopped_early = false;
    for round in 1..=rounds {
        let mut round_plan = plan.clone();
        if round > 1 {
            round_plan.seed = seed::derive(plan.seed, &[round as u64]);
        }
        let out = run_lambada(&current, classifier, generator, &round_plan)?;
        let h_bar = retrain(&current, &out.synthesized, classifier)?;
        let acc = accuracy(&h_bar, validation)?;
        let drifted = guard.drifted(previous, acc);
        log::info!("round {round}: validation accuracy {acc:.4} (previous {previous:.4})");
        if !drifted {
            current = current.union(&out.synthesized)?;
            previous = acc;
        }
        results.push(RoundResult {
            round,
            synthesized: out.synthesized,
            report: out.report,
            validation_accuracy: acc,
            drifted,
        });
        if drifted {
            stopped_early = round < rounds;
            break;
        }
    }
    Ok(IterationOutcome {
        baseline_accuracy,
        rounds: results,
        augmented: current,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{predict, train_naive_bayes};

    fn counts(a: usize, b: usize) -> Dataset {
        let labels = LabelMap::from_names(["A", "B"]).unwrap();
        let mut items = Vec::new();
        for i in 0..a {
            items.push(LabeledSentence::new(format!("alpha {i}"), 1).unwrap());
        }
        for i in 0..b {
            items.push(LabeledSentence::new(format!("beta {i}"), 2).unwrap());
        }
        Dataset::new(labels, items).unwrap()
    }

    #[test]
    fn balanced_plans() {
        assert_eq!(plan_balanced(&counts(5, 10), 20).targets, [15, 10]);
        assert_eq!(plan_balanced(&counts(20, 0), 20).targets, [0, 20]);
        assert_eq!(plan_balanced(&counts(30, 3), 20).targets, [0, 17]);
        assert_eq!(plan_balanced(&counts(7, 7), 9).targets, [2, 2]);
    }

    /// Hand-built pool so confidences are known exactly.
    fn manual_pool() -> (SynthesizedPool, ClassifierModel, Dataset) {
        let labels = LabelMap::from_names(["A", "B"]).unwrap();
        let train = Dataset::from_pairs(
            labels.clone(),
            [("good great fine", 1), ("good ok", 1), ("bad awful", 2), ("bad poor", 2)],
        )
        .unwrap();
        let h = train_naive_bayes(&train, 1.0).unwrap();
        let texts = [
            ("good great", 1),
            ("good", 1),
            ("good great fine", 1), // duplicate of training text
            ("bad", 1),             // h says B
            ("good ok fine", 1),
            ("good", 1), // duplicate of an earlier candidate
            ("bad awful poor", 2),
        ];
        let candidates = texts
            .iter()
            .enumerate()
            .map(|(i, (t, y))| Candidate {
                sentence: LabeledSentence::new(*t, *y).unwrap(),
                index: i,
                truncated: false,
                gen_seed: i as u64,
                predicted: None,
                confidence: None,
                verdict: None,
            })
            .collect();
        (SynthesizedPool { labels, candidates }, h, train)
    }

    #[test]
    fn filter_applies_verification_dedup_and_rank() {
        let (mut pool, h, train) = manual_pool();
        let plan = AugmentationPlan::new(vec![2, 5]);
        let (syn, report) = filter_pool(&mut pool, &h, &plan, &train).unwrap();
        let verdicts: Vec<_> = pool.candidates.iter().map(|c| c.verdict.unwrap()).collect();
        assert_eq!(verdicts[2], Verdict::Duplicate);
        assert_eq!(verdicts[3], Verdict::LabelMismatch);
        assert_eq!(verdicts[5], Verdict::Duplicate);
        assert_eq!(verdicts[6], Verdict::Retained);
        let a = &report.classes[0];
        assert_eq!(a.generated, 6);
        assert_eq!(a.generated, a.label_mismatch + a.duplicates + a.truncated_excluded + a.ranked);
        assert_eq!(a.ranked, 3);
        assert_eq!(a.retained, 2);
        let b = &report.classes[1];
        assert_eq!((b.retained, b.shortfall), (1, 4));
        // retained class-A candidates are the two most confident of the ranked three
        let conf = |t: &str| predict(&h, t).unwrap().confidence;
        let mut ranked = vec!["good great", "good", "good ok fine"];
        ranked.sort_by(|x, y| conf(y).total_cmp(&conf(x)));
        let kept: Vec<&str> = syn.of_class(1).map(|s| s.text.as_str()).collect();
        assert_eq!(kept, &ranked[..2]);
        assert_eq!(syn.len(), 3);
    }

    #[test]
    fn filter_without_agreement_or_dedup() {
        let (mut pool, h, train) = manual_pool();
        let mut plan = AugmentationPlan::new(vec![10, 10]);
        plan.filter = FilterOptions {
            require_label_agreement: false,
            exclude_truncated: false,
            dedup: false,
        };
        let (syn, report) = filter_pool(&mut pool, &h, &plan, &train).unwrap();
        assert_eq!(syn.len(), pool.len());
        assert_eq!(report.classes[0].shortfall, 4);
    }

    #[test]
    fn truncated_candidates_can_be_excluded() {
        let (mut pool, h, train) = manual_pool();
        pool.candidates[0].truncated = true;
        let mut plan = AugmentationPlan::new(vec![5, 5]);
        plan.filter.exclude_truncated = true;
        filter_pool(&mut pool, &h, &plan, &train).unwrap();
        assert_eq!(pool.candidates[0].verdict, Some(Verdict::Truncated));
    }

    #[test]
    fn drift_guard_threshold() {
        let g = DriftGuard { tolerance: 0.0 };
        assert!(g.drifted(0.8, 0.79));
        assert!(!g.drifted(0.8, 0.8));
        let g = DriftGuard { tolerance: 0.05 };
        assert!(!g.drifted(0.8, 0.76));
        assert!(g.drifted(0.8, 0.74));
    }

    #[test]
    fn plan_validation() {
        assert!(AugmentationPlan::uniform(2, 1).validate(3).is_err());
        let mut p = AugmentationPlan::uniform(2, 1);
        p.oversample_factor = 0;
        assert!(p.validate(2).is_err());
        assert_eq!(AugmentationPlan::uniform(3, 20).pool_size(), 600);
    }
}
