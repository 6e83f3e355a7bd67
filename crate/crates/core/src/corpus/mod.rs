//! Labeled corpora: tokenization, loading, stratified splitting and
//! per-class subsampling.

mod io;
mod tokenize;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

pub use io::{
    load_dataset, read_dataset, write_jsonl, write_jsonl_parts, write_splits, DataFormat, JsonlRecord, SplitManifest,
};
pub use tokenize::{detokenize, tokenize};

/// Class identifier, contiguous from 1 within a label map.
pub type ClassId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLabel {
    pub id: ClassId,
    pub name: String,
}

/// Bijection between class names and contiguous ids `1..=q`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = Self::new();
        for name in names {
            let name = name.into();
            if map.id_of(&name).is_some() {
                return Err(Error::invalid(format!("duplicate class name `{name}`")));
            }
            map.intern(&name)?;
        }
        Ok(map)
    }

    /// Returns the id for `name`, allocating the next id on first sight.
    pub fn intern(&mut self, name: &str) -> Result<ClassId> {
        let name = normalize_label(name)?;
        if let Some(id) = self.id_of(&name) {
            return Ok(id);
        }
        self.names.push(name);
        Ok(self.names.len() as ClassId)
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        let name = name.trim();
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| i as ClassId + 1)
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        id.checked_sub(1)
            .and_then(|i| self.names.get(i as usize))
            .map(String::as_str)
    }

    pub fn label(&self, id: ClassId) -> Option<ClassLabel> {
        self.name(id).map(|name| ClassLabel {
            id,
            name: name.to_owned(),
        })
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id >= 1 && (id as usize) <= self.names.len()
    }

    /// Number of classes `q`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> {
        1..=self.names.len() as ClassId
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

fn normalize_label(name: &str) -> Result<String> {
    let name = name.trim();
    if name.is_empty() {
        return Err(Error::invalid("empty class name"));
    }
    if name.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!(
            "class name `{name}` contains whitespace"
        )));
    }
    Ok(name.to_owned())
}

/// One `(x, y)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub text: String,
    pub tokens: Vec<String>,
    pub label: ClassId,
}

impl LabeledSentence {
    /// Tokenizes `text`. Fails when no tokens remain.
    pub fn new(text: impl Into<String>, label: ClassId) -> Result<Self> {
        let text = text.into();
        let tokens = tokenize(&text);
        if tokens.is_empty() {
            return Err(Error::invalid("empty text"));
        }
        Ok(Self {
            text,
            tokens,
            label,
        })
    }

    /// Builds a sentence from already tokenized input; the text is the
    /// space-joined tokens.
    pub fn from_tokens(tokens: Vec<String>, label: ClassId) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("empty token sequence"));
        }
        Ok(Self {
            text: detokenize(&tokens),
            tokens,
            label,
        })
    }

    /// Canonical text used for exact-match comparisons.
    pub fn normalized_text(&self) -> String {
        detokenize(&self.tokens)
    }
}

/// A labeled corpus and its label map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    labels: LabelMap,
    items: Vec<LabeledSentence>,
}

impl Dataset {
    pub fn new(labels: LabelMap, items: Vec<LabeledSentence>) -> Result<Self> {
        if let Some(bad) = items.iter().find(|s| !labels.contains(s.label)) {
            return Err(Error::UnknownClass(bad.label.to_string()));
        }
        Ok(Self { labels, items })
    }

    pub fn empty(labels: LabelMap) -> Self {
        Self {
            labels,
            items: Vec::new(),
        }
    }

    /// Convenience constructor from `(text, class id)` pairs.
    pub fn from_pairs<'a, I>(labels: LabelMap, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, ClassId)>,
    {
        let items = pairs
            .into_iter()
            .map(|(t, y)| LabeledSentence::new(t, y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, items)
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn items(&self) -> &[LabeledSentence] {
        &self.items
    }

    pub fn into_items(self) -> Vec<LabeledSentence> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    /// Items per class, indexed by `id - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for s in &self.items {
            counts[s.label as usize - 1] += 1;
        }
        counts
    }

    pub fn of_class(&self, id: ClassId) -> impl Iterator<Item = &LabeledSentence> {
        self.items.iter().filter(move |s| s.label == id)
    }

    /// `self ∪ other` as a multiset; label maps must agree.
    pub fn union(&self, other: &Dataset) -> Result<Dataset> {
        if self.labels != other.labels {
            return Err(Error::invalid("label maps differ"));
        }
        let mut items = self.items.clone();
        items.extend(other.items.iter().cloned());
        Ok(Dataset {
            labels: self.labels.clone(),
            items,
        })
    }

    fn select(&self, mut idx: Vec<usize>) -> Dataset {
        idx.sort_unstable();
        Dataset {
            labels: self.labels.clone(),
            items: idx.into_iter().map(|i| self.items[i].clone()).collect(),
        }
    }

    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.labels.len()];
        for (i, s) in self.items.iter().enumerate() {
            by_class[s.label as usize - 1].push(i);
        }
        by_class
    }
}

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            ratios: [train, validation, test],
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("split ratios must be non-negative"));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split ratios must sum to 1.0 (got {sum})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Stratified split. Per class of size `n`, validation and test receive
/// `⌊ratio·n⌋` items and train receives the rest.
pub fn split_dataset(d: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if d.len() < 3 {
        return Err(Error::invalid(format!(
            "splitting needs at least 3 items, got {}",
            d.len()
        )));
    }
    let buckets = spec.ratios.iter().filter(|r| **r > 0.0).count();
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut warnings = Vec::new();
    for (ci, mut idx) in d.indices_by_class().into_iter().enumerate() {
        let id = ci as ClassId + 1;
        if idx.is_empty() {
            continue;
        }
        if idx.len() < buckets {
            let msg = format!(
                "class `{}` has {} item(s), fewer than {buckets} split buckets; all kept in train",
                d.labels.name(id).unwrap_or("?"),
                idx.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
            parts[0].extend(idx);
            continue;
        }
        idx.shuffle(&mut seed::rng_for(spec.seed, &[u64::from(id)]));
        let n = idx.len() as f64;
        let n_val = (spec.ratios[1] * n + 1e-9).floor() as usize;
        let n_test = (spec.ratios[2] * n + 1e-9).floor() as usize;
        let test = idx.split_off(idx.len() - n_test);
        let val = idx.split_off(idx.len() - n_val);
        parts[0].extend(idx);
        parts[1].extend(val);
        parts[2].extend(test);
    }
    let [train, validation, test] = parts;
    Ok(Splits {
        train: d.select(train),
        validation: d.select(validation),
        test: d.select(test),
        warnings,
    })
}

/// A class that had fewer than `k` items when subsampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub label: ClassId,
    pub available: usize,
    pub requested: usize,
}

#[derive(Debug, Clone)]
pub struct Subsample {
    pub dataset: Dataset,
    pub shortfalls: Vec<Shortfall>,
}

/// Uniformly draws `min(k, n_class)` items per class without replacement.
/// Item order follows the input.
pub fn subsample_per_class(d: &Dataset, k: usize, seed: u64) -> Result<Subsample> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset("subsample input".into()));
    }
    let mut chosen = Vec::new();
    let mut shortfalls = Vec::new();
    for (ci, idx) in d.indices_by_class().into_iter().enumerate() {
        let id = ci as ClassId + 1;
        if idx.len() <= k {
            if idx.len() < k {
                log::info!(
                    "class `{}`: {} of {k} requested items available",
                    d.labels.name(id).unwrap_or("?"),
                    idx.len()
                );
                shortfalls.push(Shortfall {
                    label: id,
                    available: idx.len(),
                    requested: k,
                });
            }
            chosen.extend(idx);
        } else {
            let mut rng = seed::rng_for(seed, &[u64::from(id)]);
            chosen.extend(
                rand::seq::index::sample(&mut rng, idx.len(), k)
                    .into_iter()
                    .map(|j| idx[j]),
            );
        }
    }
    Ok(Subsample {
        dataset: d.select(chosen),
        shortfalls,
    })
}

/// Items of `d` not present (by index identity) in a subsample drawn from it.
/// Used to hold out unlabeled originals for the weak-labeling arm.
pub fn complement(d: &Dataset, subset: &Dataset) -> Dataset {
    let mut remaining: BTreeMap<(&str, ClassId), usize> = BTreeMap::new();
    for s in subset.items() {
        *remaining.entry((s.text.as_str(), s.label)).or_default() += 1;
    }
    let mut keep = Vec::new();
    for (i, s) in d.items().iter().enumerate() {
        match remaining.get_mut(&(s.text.as_str(), s.label)) {
            Some(n) if *n > 0 => *n -= 1,
            _ => keep.push(i),
        }
    }
    d.select(keep)
}
