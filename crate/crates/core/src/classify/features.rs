use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;

/// Training vocabulary. Ids are assigned in sorted token order; every token
/// outside the vocabulary maps to the single OOV id `len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl FeatureVocab {
    pub fn build(d: &Dataset) -> Self {
        let set: BTreeSet<&str> = d
            .items()
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect();
        set.into_iter().map(str::to_owned).collect::<Vec<_>>().into()
    }

    /// Number of in-vocabulary tokens (the OOV id is not counted).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn oov_id(&self) -> usize {
        self.tokens.len()
    }

    /// Feature dimension including the OOV slot.
    pub fn dim(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(self.oov_id())
    }

    /// Sparse term counts, sorted by feature id.
    pub fn counts<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(usize, f64)> {
        let mut ids: Vec<usize> = tokens.iter().map(|t| self.id(t.as_ref())).collect();
        ids.sort_unstable();
        let mut out: Vec<(usize, f64)> = Vec::new();
        for id in ids {
            match out.last_mut() {
                Some((last, c)) if *last == id => *c += 1.0,
                _ => out.push((id, 1.0)),
            }
        }
        out
    }
}

impl From<Vec<String>> for FeatureVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }
}

impl From<FeatureVocab> for Vec<String> {
    fn from(v: FeatureVocab) -> Self {
        v.tokens
    }
}

/// Sparse non-negative feature vector, sorted by id.
pub type FeatureVector = Vec<(usize, f64)>;

/// Smoothed inverse document frequencies, `ln((1+N)/(1+df)) + 1`.
pub fn smoothed_idf(vocab: &FeatureVocab, d: &Dataset) -> Vec<f64> {
    let mut df = vec![0usize; vocab.dim()];
    for s in d.items() {
        for (id, _) in vocab.counts(&s.tokens) {
            df[id] += 1;
        }
    }
    let n = d.len() as f64;
    df.into_iter()
        .map(|f| ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0)
        .collect()
}

/// L2-normalized TF-IDF vector.
pub fn tfidf<S: AsRef<str>>(vocab: &FeatureVocab, idf: &[f64], tokens: &[S]) -> FeatureVector {
    let mut v: FeatureVector = vocab
        .counts(tokens)
        .into_iter()
        .map(|(id, c)| (id, c * idf[id]))
        .collect();
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut v {
            *x /= norm;
        }
    }
    v
}
