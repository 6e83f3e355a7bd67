use serde::{Deserialize, Serialize};

use super::features::FeatureVocab;
use crate::corpus::Dataset;
use crate::{Error, Result};

/// Multinomial naive Bayes with add-alpha smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub alpha: f64,
    pub log_priors: Vec<f64>,
    /// `log P(token | class)`, one row per class over the training vocabulary.
    pub log_likelihoods: Vec<Vec<f64>>,
}

impl NaiveBayes {
    pub(crate) fn fit(d: &Dataset, vocab: &FeatureVocab, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("laplace alpha must be positive, got {alpha}")));
        }
        let q = d.num_classes();
        let v = vocab.len();
        let mut counts = vec![vec![0.0f64; v]; q];
        let mut docs = vec![0usize; q];
        for s in d.items() {
            let c = s.label as usize - 1;
            docs[c] += 1;
            for (id, n) in vocab.counts(&s.tokens) {
                if id < v {
                    counts[c][id] += n;
                }
            }
        }
        if let Some(empty) = docs.iter().position(|&n| n == 0) {
            let name = d.labels().name(empty as u32 + 1).unwrap_or("?");
            return Err(Error::EmptyClass(name.to_owned()));
        }
        let n = d.len() as f64;
        let log_priors = docs.iter().map(|&k| (k as f64 / n).ln()).collect();
        let log_likelihoods = counts
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum::<f64>() + alpha * v as f64;
                row.into_iter().map(|c| ((c + alpha) / total).ln()).collect()
            })
            .collect();
        Ok(Self {
            alpha,
            log_priors,
            log_likelihoods,
        })
    }

    /// Unnormalized joint log-probabilities `log P(y) + Σ log P(w | y)`.
    /// Out-of-vocabulary tokens contribute the same factor to every class
    /// and are skipped.
    pub fn log_scores(&self, counts: &[(usize, f64)]) -> Vec<f64> {
        self.log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(prior, row)| {
                prior
                    + counts
                        .iter()
                        .filter(|(id, _)| *id < row.len())
                        .map(|(id, n)| n * row[*id])
                        .sum::<f64>()
            })
            .collect()
    }
}
