use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{encode_training_stream, encode_unlabeled, EncodedStream, LmVocab};
use crate::corpus::{Dataset, LabelMap};
use crate::{Error, Result};

const MODEL_FORMAT: &str = "lambada-ngram";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NGramParams {
    pub order: usize,
    /// Add-alpha pseudo-count of the unigram floor.
    pub alpha: f64,
    /// Multiplier applied to counts from the unlabeled prior corpus.
    pub prior_weight: f64,
}

impl Default for NGramParams {
    fn default() -> Self {
        Self {
            order: 3,
            alpha: 0.01,
            prior_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: f64,
    next: BTreeMap<u32, f64>,
}

/// Interpolated n-gram model.
///
/// Add-alpha at every order, with the pseudo-counts spread by the next lower
/// order instead of uniformly:
///
/// ```text
/// P_n(w | h) = (c(h, w) + αV · P_{n-1}(w | h')) / (c(h) + αV)
/// ```
///
/// so the interpolation weight of order `n` is `λ = c(h) / (c(h) + αV)`.
/// The unigram level is plain add-alpha over the vocabulary, which keeps
/// every probability strictly positive. Unseen contexts get `λ = 0` and fall
/// through to the lower order unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab: LmVocab,
    labels: LabelMap,
    /// `tables[n]` maps contexts of length `n` to follower counts.
    tables: Vec<HashMap<Vec<u32>, ContextCounts>>,
    unigram: Vec<f64>,
}

impl NGramModel {
    fn empty(vocab: LmVocab, labels: LabelMap, order: usize, alpha: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid(format!(
                "n-gram order must be at least 2 to condition on the class token, got {order}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("smoothing alpha must be positive, got {alpha}")));
        }
        let mut m = Self {
            order,
            alpha,
            vocab,
            labels,
            tables: vec![HashMap::new(); order],
            unigram: Vec::new(),
        };
        m.refresh_unigram();
        Ok(m)
    }

    /// A model with no counts: every conditional is uniform over the
    /// vocabulary.
    pub fn uniform(vocab: LmVocab, labels: LabelMap, order: usize) -> Result<Self> {
        Self::empty(vocab, labels, order, 1.0)
    }

    fn add_counts(&mut self, ids: &[u32], weight: f64) {
        for j in 0..ids.len() {
            for n in 0..self.order.min(j + 1) {
                let ctx = &ids[j - n..j];
                let entry = self.tables[n].entry(ctx.to_vec()).or_default();
                entry.total += weight;
                *entry.next.entry(ids[j]).or_default() += weight;
            }
        }
    }

    fn refresh_unigram(&mut self) {
        let v = self.vocab.len();
        let root = self.tables[0].get(&[][..]);
        let total = root.map_or(0.0, |c| c.total) + self.alpha * v as f64;
        self.unigram = (0..v as u32)
            .map(|w| {
                let c = root.and_then(|c| c.next.get(&w)).copied().unwrap_or(0.0);
                (c + self.alpha) / total
            })
            .collect();
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &LmVocab {
        &self.vocab
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    /// Raw count of `context` followed by `token`, and of `context` itself.
    pub fn counts(&self, context: &[u32], token: u32) -> Option<(f64, f64)> {
        let c = self.tables.get(context.len())?.get(context)?;
        Some((c.next.get(&token).copied().unwrap_or(0.0), c.total))
    }

    /// Maximum-likelihood `P(token | context)` at the context's own order.
    pub fn mle(&self, context: &[u32], token: u32) -> Option<f64> {
        self.counts(context, token).map(|(c, t)| c / t)
    }

    /// Interpolated distribution over the vocabulary after `context`; only
    /// the last `order - 1` ids are used.
    pub fn dist(&self, context: &[u32]) -> Vec<f64> {
        let h = &context[context.len().saturating_sub(self.order - 1)..];
        let mut p = self.unigram.clone();
        let pseudo = self.alpha * self.vocab.len() as f64;
        for n in 1..=h.len() {
            let Some(c) = self.tables[n].get(&h[h.len() - n..]) else {
                break;
            };
            let lambda = c.total / (c.total + pseudo);
            for x in &mut p {
                *x *= 1.0 - lambda;
            }
            for (&w, &k) in &c.next {
                p[w as usize] += lambda * k / c.total;
            }
        }
        p
    }

    pub fn prob(&self, context: &[u32], token: u32) -> f64 {
        self.dist(context)[token as usize]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut rows: Vec<_> = t
                    .iter()
                    .map(|(ctx, c)| {
                        let next = c.next.iter().map(|(&w, &k)| (w, k)).collect();
                        (ctx.clone(), c.total, next)
                    })
                    .collect();
                rows.sort_by(|a: &TableRow, b| a.0.cmp(&b.0));
                rows
            })
            .collect();
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            order: self.order,
            alpha: self.alpha,
            labels: self.labels.clone(),
            vocab: self.vocab.clone(),
            tables,
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &file)?;
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
        if file.tables.len() != file.order {
            return Err(Error::ModelFormat("table count does not match order".into()));
        }
        let mut m = Self::empty(file.vocab, file.labels, file.order, file.alpha)?;
        for (n, rows) in file.tables.into_iter().enumerate() {
            for (ctx, total, next) in rows {
                if ctx.len() != n
                    || ctx.iter().chain(next.iter().map(|(w, _)| w)).any(|&t| t as usize >= m.vocab.len())
                {
                    return Err(Error::ModelFormat(format!("bad order-{} entry", n + 1)));
                }
                let next: BTreeMap<u32, f64> = next.into_iter().collect();
                m.tables[n].insert(ctx, ContextCounts { total, next });
            }
        }
        m.refresh_unigram();
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    alpha: f64,
    labels: LabelMap,
    vocab: LmVocab,
    tables: Vec<Vec<TableRow>>,
}

/// `(context, context count, [(follower, count)])`
type TableRow = (Vec<u32>, f64, Vec<(u32, f64)>);

/// Fits the model on a training stream, optionally merging counts from an
/// unlabeled prior stream scaled by `params.prior_weight`.
pub fn fit_ngram(
    vocab: LmVocab,
    labels: LabelMap,
    stream: &EncodedStream,
    prior: Option<&[u32]>,
    params: &NGramParams,
) -> Result<NGramModel> {
    if stream.len() < params.order {
        return Err(Error::invalid(format!(
            "stream of {} tokens is shorter than the model order {}",
            stream.len(),
            params.order
        )));
    }
    if !(params.prior_weight >= 0.0 && params.prior_weight.is_finite()) {
        return Err(Error::invalid("prior_weight must be a non-negative number"));
    }
    let mut m = NGramModel::empty(vocab, labels, params.order, params.alpha)?;
    if let Some(prior) = prior {
        if params.prior_weight > 0.0 {
            m.add_counts(prior, params.prior_weight);
        }
    }
    m.add_counts(stream.ids(), 1.0);
    m.refresh_unigram();
    Ok(m)
}

/// Builds the vocabulary, encodes `d` and fits the conditional model.
/// `prior` holds tokenized unlabeled sentences standing in for pre-training
/// text; pass an empty slice to fit on the labeled stream alone.
pub fn fit_conditional_lm(
    d: &Dataset,
    prior: &[Vec<String>],
    params: &NGramParams,
) -> Result<NGramModel> {
    let vocab = LmVocab::for_dataset(d, prior)?;
    let stream = encode_training_stream(d, &vocab)?;
    let prior_ids = (!prior.is_empty())
        .then(|| encode_unlabeled(prior, &vocab))
        .transpose()?;
    fit_ngram(vocab, d.labels().clone(), &stream, prior_ids.as_deref(), params)
}

pub fn next_token_dist(m: &NGramModel, context: &[u32]) -> Vec<f64> {
    m.dist(context)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllReport {
    /// `−Σ ln P(wⱼ | preceding tokens)`.
    pub nll: f64,
    pub tokens: usize,
    pub perplexity: f64,
}

/// Negative log-likelihood of a stream, each token conditioned on up to
/// `order - 1` preceding tokens.
pub fn corpus_nll(m: &NGramModel, stream: &EncodedStream) -> NllReport {
    let ids = stream.ids();
    let nll: f64 = (0..ids.len())
        .map(|j| {
            let ctx = &ids[j.saturating_sub(m.order - 1)..j];
            -m.prob(ctx, ids[j]).ln()
        })
        .sum();
    let tokens = ids.len();
    let perplexity = if tokens == 0 { 1.0 } else { (nll / tokens as f64).exp() };
    NllReport {
        nll,
        tokens,
        perplexity,
    }
}
