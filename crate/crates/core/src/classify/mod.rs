//! Baseline classifiers: the algorithm `A` that produces `h = A(D)`.
//!
//! Two built-ins are provided, multinomial naive Bayes over term counts and
//! multinomial logistic regression over TF-IDF. Both report a full posterior
//! distribution; the confidence of a prediction is the probability of the
//! predicted class.

mod features;
mod logreg;
mod naive_bayes;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, ClassId, Dataset, LabelMap};
use crate::{Error, Result};

pub use features::{smoothed_idf, tfidf, FeatureVector, FeatureVocab};
pub use logreg::{objective, LogReg, LogRegParams, Objective, Weights};
pub use naive_bayes::NaiveBayes;

const MODEL_FORMAT: &str = "lambada-classifier";
const MODEL_VERSION: u32 = 1;

/// Which algorithm to train, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    NaiveBayes {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Logreg(#[serde(default)] LogRegParams),
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::NaiveBayes { alpha: 1.0 }
    }
}

impl ClassifierSpec {
    pub fn logreg() -> Self {
        ClassifierSpec::Logreg(LogRegParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::NaiveBayes { .. } => "naive_bayes",
            ClassifierSpec::Logreg(_) => "logreg",
        }
    }

    pub fn train(&self, d: &Dataset) -> Result<ClassifierModel> {
        match self {
            ClassifierSpec::NaiveBayes { alpha } => train_naive_bayes(d, *alpha),
            ClassifierSpec::Logreg(p) => train_logreg(d, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes(NaiveBayes),
    Logreg(LogReg),
}

/// A trained classifier `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub labels: LabelMap,
    pub vocab: FeatureVocab,
    pub params: ModelParams,
}

/// Posterior over classes; `distribution[i]` belongs to class id `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ClassId,
    pub confidence: f64,
    pub distribution: Vec<f64>,
}

impl Prediction {
    fn from_distribution(distribution: Vec<f64>) -> Self {
        let best = argmax(&distribution);
        Self {
            label: best as ClassId + 1,
            confidence: distribution[best],
            distribution,
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_classes(d: &Dataset) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("training set".into()));
    }
    if let Some(i) = d.class_counts().iter().position(|&n| n == 0) {
        let name = d.labels().name(i as ClassId + 1).unwrap_or("?");
        return Err(Error::EmptyClass(name.to_owned()));
    }
    Ok(())
}

pub fn train_naive_bayes(d: &Dataset, laplace_alpha: f64) -> Result<ClassifierModel> {
    check_classes(d)?;
    let vocab = FeatureVocab::build(d);
    let nb = NaiveBayes::fit(d, &vocab, laplace_alpha)?;
    Ok(ClassifierModel {
        labels: d.labels().clone(),
        vocab,
        params: ModelParams::NaiveBayes(nb),
    })
}

pub fn train_logreg(d: &Dataset, params: &LogRegParams) -> Result<ClassifierModel> {
    train_logreg_traced(d, params).map(|(m, _)| m)
}

/// Like [`train_logreg`], also returning the full training loss before the
/// first epoch and after every epoch.
pub fn train_logreg_traced(
    d: &Dataset,
    params: &LogRegParams,
) -> Result<(ClassifierModel, Vec<f64>)> {
    check_classes(d)?;
    let vocab = FeatureVocab::build(d);
    let (lr, history) = logreg::fit(d, &vocab, params)?;
    Ok((
        ClassifierModel {
            labels: d.labels().clone(),
            vocab,
            params: ModelParams::Logreg(lr),
        },
        history,
    ))
}

impl ClassifierModel {
    pub fn kind(&self) -> &'static str {
        match self.params {
            ModelParams::NaiveBayes(_) => "naive_bayes",
            ModelParams::Logreg(_) => "logreg",
        }
    }

    /// Raw per-class scores before normalization: joint log-probabilities for
    /// naive Bayes, logits for logistic regression.
    pub fn scores<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        match &self.params {
            ModelParams::NaiveBayes(nb) => nb.log_scores(&self.vocab.counts(tokens)),
            ModelParams::Logreg(lr) => lr.weights.logits(&lr.features(&self.vocab, tokens)),
        }
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Prediction> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot classify empty text"));
        }
        Ok(Prediction::from_distribution(softmax(&self.scores(tokens))))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(
            &mut w,
            &ModelFile {
                format: MODEL_FORMAT.into(),
                version: MODEL_VERSION,
                model: self.clone(),
            },
        )?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ClassifierModel,
}

/// Classifies raw text.
pub fn predict(m: &ClassifierModel, text: &str) -> Result<Prediction> {
    m.predict_tokens(&tokenize(text))
}

/// Per-example Kronecker delta `δ(h(x̂ᵢ), ŷᵢ)` over a test set.
pub fn correctness(m: &ClassifierModel, test: &Dataset) -> Result<Vec<bool>> {
    if m.labels != *test.labels() {
        return Err(Error::invalid("test label map differs from the model's"));
    }
    test.items()
        .iter()
        .map(|s| Ok(m.predict_tokens(&s.tokens)?.label == s.label))
        .collect()
}

/// Fraction of test items whose argmax prediction matches the gold label.
pub fn accuracy(m: &ClassifierModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("test set".into()));
    }
    let hits = correctness(m, test)?;
    Ok(hits.iter().filter(|&&b| b).count() as f64 / hits.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledSentence;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        let labels = LabelMap::from_names(["money", "weather"]).unwrap();
        Dataset::from_pairs(
            labels,
            [
                ("refund my order", 1),
                ("i want a refund now", 1),
                ("give my money back", 1),
                ("charge on my card", 1),
                ("cancel the charge", 1),
                ("is it sunny today", 2),
                ("will it rain now", 2),
                ("weather for today", 2),
                ("cold and windy today", 2),
                ("snow in the forecast", 2),
            ],
        )
        .unwrap()
    }

    fn disjoint() -> Dataset {
        let labels = LabelMap::from_names(["a", "b", "c"]).unwrap();
        Dataset::from_pairs(labels, [("alpha beta", 1), ("gamma delta", 2), ("eps zeta eta", 3)])
            .unwrap()
    }

    /// Hand-computed posterior for the two-class toy with alpha = 1.
    #[test]
    fn naive_bayes_matches_hand_computed_posterior() {
        let labels = LabelMap::from_names(["a", "b"]).unwrap();
        let d = Dataset::from_pairs(labels, [("refund please", 1), ("hello please", 2)]).unwrap();
        let m = train_naive_bayes(&d, 1.0).unwrap();
        // vocab {hello, please, refund}; each class has 2 tokens -> denominators 2 + 3.
        // P(refund|a)=2/5 P(please|a)=2/5 ; P(refund|b)=1/5 P(please|b)=2/5 ; priors 1/2.
        let pa = 0.5 * (2.0 / 5.0) * (2.0 / 5.0);
        let pb = 0.5 * (1.0 / 5.0) * (2.0 / 5.0);
        let p = predict(&m, "refund please").unwrap();
        assert_eq!(p.label, 1);
        assert!((p.confidence - pa / (pa + pb)).abs() < 1e-12);
    }

    #[test]
    fn naive_bayes_token_distributions_sum_to_one() {
        let m = train_naive_bayes(&toy(), 0.5).unwrap();
        let ModelParams::NaiveBayes(nb) = &m.params else { unreachable!() };
        for row in &nb.log_likelihoods {
            let s: f64 = row.iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_vocabularies_are_learned_exactly() {
        let d = disjoint();
        for alpha in [1.0, 1e-6] {
            let m = train_naive_bayes(&d, alpha).unwrap();
            assert_eq!(accuracy(&m, &d).unwrap(), 1.0);
        }
    }

    #[test]
    fn oov_only_input_follows_priors() {
        let labels = LabelMap::from_names(["a", "b"]).unwrap();
        let d = Dataset::from_pairs(labels, [("x", 1), ("y", 2), ("z", 2), ("w", 2)]).unwrap();
        let m = train_naive_bayes(&d, 1.0).unwrap();
        let p = predict(&m, "never seen words").unwrap();
        assert_eq!(p.label, 2);
        assert!((p.distribution[0] - 0.25).abs() < 1e-12);
        assert!((p.distribution[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        assert_eq!(
            train_naive_bayes(&toy(), 1.0).unwrap(),
            train_naive_bayes(&toy(), 1.0).unwrap()
        );
        let p = LogRegParams { seed: 3, ..Default::default() };
        assert_eq!(train_logreg(&toy(), &p).unwrap(), train_logreg(&toy(), &p).unwrap());
    }

    #[test]
    fn empty_class_is_named() {
        let labels = LabelMap::from_names(["a", "ghost"]).unwrap();
        let d = Dataset::from_pairs(labels, [("x y", 1)]).unwrap();
        match train_naive_bayes(&d, 1.0) {
            Err(Error::EmptyClass(name)) => assert_eq!(name, "ghost"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(train_logreg(&d, &LogRegParams::default()), Err(Error::EmptyClass(_))));
        assert!(train_naive_bayes(&disjoint(), 0.0).is_err());
    }

    #[test]
    fn logreg_separates_disjoint_toy() {
        let m = train_logreg(&toy(), &LogRegParams::default()).unwrap();
        assert_eq!(accuracy(&m, &toy()).unwrap(), 1.0);
    }

    #[test]
    fn zero_epochs_gives_uniform_distribution() {
        let p = LogRegParams { epochs: 0, ..Default::default() };
        let m = train_logreg(&toy(), &p).unwrap();
        let pred = predict(&m, "refund").unwrap();
        assert!((pred.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pred.confidence - 0.5).abs() < 1e-12);
        assert_eq!(pred.label, 1);
    }

    #[test]
    fn divergence_reports_epoch() {
        let p = LogRegParams { learning_rate: 1e308, ..Default::default() };
        match train_logreg(&toy(), &p) {
            Err(Error::NonFiniteLoss { epoch }) => assert_eq!(epoch, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_batch_loss_is_non_increasing() {
        let p = LogRegParams {
            learning_rate: 0.01,
            epochs: 300,
            batch_size: 64,
            ..Default::default()
        };
        let (_, history) = train_logreg_traced(&toy(), &p).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
        assert!(history.last().unwrap() < &history[0]);
    }

    #[test]
    fn accuracy_counts_kronecker_hits() {
        let d = disjoint();
        let m = train_naive_bayes(&d, 1.0).unwrap();
        let test = Dataset::new(
            d.labels().clone(),
            vec![
                LabeledSentence::new("alpha", 1).unwrap(),
                LabeledSentence::new("gamma", 2).unwrap(),
                LabeledSentence::new("gamma", 3).unwrap(),
            ],
        )
        .unwrap();
        assert!((accuracy(&m, &test).unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!(accuracy(&m, &Dataset::empty(d.labels().clone())).is_err());
    }

    #[test]
    fn constant_predictor_scores_one_over_q() {
        // every test item is OOV, so NB follows the uniform prior and ties
        // break to class 1
        let d = disjoint();
        let m = train_naive_bayes(&d, 1.0).unwrap();
        let test = Dataset::from_pairs(d.labels().clone(), [("qq", 1), ("rr", 2), ("ss", 3)]).unwrap();
        assert!((accuracy(&m, &test).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_rejected() {
        let m = train_naive_bayes(&toy(), 1.0).unwrap();
        assert!(predict(&m, "   ").is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for spec in [ClassifierSpec::default(), ClassifierSpec::logreg()] {
            let m = spec.train(&toy()).unwrap();
            let path = dir.path().join("m.json");
            m.save(&path).unwrap();
            assert_eq!(ClassifierModel::load(&path).unwrap(), m);
        }
        std::fs::write(dir.path().join("bad.json"), r#"{"format":"other","version":1}"#).unwrap();
        assert!(ClassifierModel::load(&dir.path().join("bad.json")).is_err());
    }

    proptest! {
        #[test]
        fn predictions_are_probability_vectors(words in proptest::collection::vec("[a-z]{1,8}", 1..12)) {
            let text = words.join(" ");
            for spec in [ClassifierSpec::default(), ClassifierSpec::Logreg(LogRegParams { epochs: 20, ..Default::default() })] {
                let m = spec.train(&toy()).unwrap();
                let p = predict(&m, &text).unwrap();
                prop_assert!((p.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.distribution.iter().all(|x| *x >= 0.0));
                prop_assert_eq!(p.confidence, p.distribution[argmax(&p.distribution)]);
            }
        }

        #[test]
        fn argmax_is_invariant_to_score_transforms(
            words in proptest::collection::vec("[a-z]{1,8}|refund|today|rain", 1..8),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
        ) {
            let nb = train_naive_bayes(&toy(), 1.0).unwrap();
            let s = nb.scores(&words);
            let scaled: Vec<f64> = s.iter().map(|x| x * scale).collect();
            prop_assert_eq!(argmax(&scaled) as u32 + 1, nb.predict_tokens(&words).unwrap().label);

            let lr = train_logreg(&toy(), &LogRegParams { epochs: 30, ..Default::default() }).unwrap();
            let z = lr.scores(&words);
            let shifted: Vec<f64> = z.iter().map(|x| x + shift).collect();
            prop_assert_eq!(argmax(&shifted) as u32 + 1, lr.predict_tokens(&words).unwrap().label);
        }
    }
}
