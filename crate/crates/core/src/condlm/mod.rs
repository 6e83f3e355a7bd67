//! Class-conditional language model.
//!
//! Training pairs are flattened into one token stream
//! `y₁ SEP x₁ EOS y₂ SEP x₂ EOS …` with one dedicated token per class. A
//! smoothed n-gram model fitted on that stream generates class-`y` sentences
//! by continuing the prefix `y SEP` until it emits `EOS`.

mod ngram;
mod sample;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{detokenize, ClassId, Dataset, LabelMap};
use crate::{Error, Result};

pub use ngram::{
    corpus_nll, fit_conditional_lm, fit_ngram, next_token_dist, NGramModel, NGramParams,
    NllReport,
};
pub use sample::{sample_sentence, sample_tokens, GenerationParams, Sample};

pub const SEP: &str = "<SEP>";
pub const EOS: &str = "<EOS>";
pub const SEP_ID: u32 = 0;
pub const EOS_ID: u32 = 1;

/// Surface form of the class token for `id`.
pub fn label_token(id: ClassId) -> String {
    format!("__label_{id}__")
}

/// True for `<SEP>`, `<EOS>` and anything shaped like a class token.
pub fn is_reserved(token: &str) -> bool {
    if token == SEP || token == EOS {
        return true;
    }
    token
        .strip_prefix("__label_")
        .and_then(|t| t.strip_suffix("__"))
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Token ↔ id bijection. Ids: `SEP = 0`, `EOS = 1`, class `y` at `1 + y`,
/// then corpus tokens in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct LmVocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    classes: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    classes: usize,
    tokens: Vec<String>,
}

impl From<VocabRepr> for LmVocab {
    fn from(r: VocabRepr) -> Self {
        let index = r
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens: r.tokens,
            index,
            classes: r.classes,
        }
    }
}

impl From<LmVocab> for VocabRepr {
    fn from(v: LmVocab) -> Self {
        Self {
            classes: v.classes,
            tokens: v.tokens,
        }
    }
}

impl LmVocab {
    /// Builds the vocabulary for `labels` and every token of `sentences`.
    pub fn build<'a, I>(labels: &LabelMap, sentences: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut corpus = BTreeSet::new();
        for s in sentences {
            for t in s {
                if is_reserved(t) {
                    return Err(Error::ReservedToken {
                        token: t.clone(),
                        text: detokenize(s),
                    });
                }
                corpus.insert(t.as_str());
            }
        }
        let mut tokens = vec![SEP.to_owned(), EOS.to_owned()];
        tokens.extend(labels.ids().map(label_token));
        tokens.extend(corpus.into_iter().map(str::to_owned));
        Ok(VocabRepr {
            classes: labels.len(),
            tokens,
        }
        .into())
    }

    pub fn for_dataset(d: &Dataset, prior: &[Vec<String>]) -> Result<Self> {
        Self::build(
            d.labels(),
            d.items()
                .iter()
                .map(|s| s.tokens.as_slice())
                .chain(prior.iter().map(Vec::as_slice)),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn label_id(&self, class: ClassId) -> Option<u32> {
        (class >= 1 && class as usize <= self.classes).then_some(1 + class)
    }

    /// Class of a label-token id.
    pub fn class_of(&self, id: u32) -> Option<ClassId> {
        (id >= 2 && ((id - 1) as usize) <= self.classes).then_some(id - 1)
    }

    /// `SEP`, `EOS` or a class token.
    pub fn is_reserved_id(&self, id: u32) -> bool {
        (id as usize) < 2 + self.classes
    }

    pub fn first_corpus_id(&self) -> u32 {
        (2 + self.classes) as u32
    }
}

/// Token ids in the `(LABEL SEP token+ EOS)+` layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream(pub Vec<u32>);

impl EncodedStream {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    /// Splits the stream back into `(tokens, class)` pairs, checking the
    /// layout as it goes.
    pub fn decode(&self, vocab: &LmVocab) -> Result<Vec<(Vec<String>, ClassId)>> {
        let bad = |pos: usize, what: &str| {
            Error::invalid(format!("malformed stream at position {pos}: {what}"))
        };
        let ids = &self.0;
        if ids.is_empty() {
            return Err(bad(0, "empty stream"));
        }
        let mut out = Vec::new();
        let mut i = 0;
        while i < ids.len() {
            let class = vocab
                .class_of(ids[i])
                .ok_or_else(|| bad(i, "expected a class token"))?;
            if ids.get(i + 1) != Some(&SEP_ID) {
                return Err(bad(i + 1, "expected SEP"));
            }
            let start = i + 2;
            let end = ids[start..]
                .iter()
                .position(|&t| vocab.is_reserved_id(t))
                .map(|p| start + p)
                .ok_or_else(|| bad(ids.len(), "missing EOS"))?;
            if ids[end] != EOS_ID {
                return Err(bad(end, "expected EOS"));
            }
            if end == start {
                return Err(bad(start, "empty sentence"));
            }
            if ids[start..end].iter().any(|&t| t as usize >= vocab.len()) {
                return Err(bad(start, "token id out of range"));
            }
            let tokens = ids[start..end]
                .iter()
                .map(|&t| vocab.token(t).to_owned())
                .collect();
            out.push((tokens, class));
            i = end + 1;
        }
        Ok(out)
    }

    pub fn validate(&self, vocab: &LmVocab) -> Result<()> {
        self.decode(vocab).map(|_| ())
    }
}

/// Concatenates `LABEL_y SEP tokens(x) EOS` for every item, in order.
pub fn encode_training_stream(d: &Dataset, vocab: &LmVocab) -> Result<EncodedStream> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("language-model training set".into()));
    }
    let mut ids = Vec::with_capacity(d.items().iter().map(|s| s.tokens.len() + 3).sum());
    for s in d.items() {
        ids.push(
            vocab
                .label_id(s.label)
                .ok_or_else(|| Error::UnknownClass(s.label.to_string()))?,
        );
        ids.push(SEP_ID);
        for t in &s.tokens {
            if is_reserved(t) {
                return Err(Error::ReservedToken {
                    token: t.clone(),
                    text: s.text.clone(),
                });
            }
            ids.push(
                vocab
                    .id(t)
                    .ok_or_else(|| Error::invalid(format!("token `{t}` missing from vocabulary")))?,
            );
        }
        ids.push(EOS_ID);
    }
    Ok(EncodedStream(ids))
}

/// Encodes unlabeled sentences as `x₁ EOS x₂ EOS …` for the prior counts.
pub fn encode_unlabeled(sentences: &[Vec<String>], vocab: &LmVocab) -> Result<Vec<u32>> {
    let mut ids = Vec::new();
    for s in sentences {
        for t in s {
            ids.push(
                vocab
                    .id(t)
                    .filter(|&id| !vocab.is_reserved_id(id))
                    .ok_or_else(|| Error::ReservedToken {
                        token: t.clone(),
                        text: detokenize(s),
                    })?,
            );
        }
        ids.push(EOS_ID);
    }
    Ok(ids)
}
