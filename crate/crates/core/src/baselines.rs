//! Comparison arms: rule-based EDA augmentation and weak labeling of
//! unlabeled text.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::ClassifierModel;
use crate::corpus::{tokenize, Dataset, LabeledSentence};
use crate::{seed, Error, Result};

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// Token → synonyms. Lookup is case-normalized and a token is never listed
/// as its own synonym.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    /// Parses `token<TAB>syn1,syn2,...` lines. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, syns) = line.split_once('\t').ok_or_else(|| Error::Record {
                source_name: "lexicon".into(),
                line: i + 1,
                message: "expected `token<TAB>synonyms`".into(),
            })?;
            let token = token.trim().to_lowercase();
            let list = entries.entry(token.clone()).or_default();
            for s in syns.split(',') {
                let s = s.trim().to_lowercase();
                if !s.is_empty() && s != token && !list.contains(&s) {
                    list.push(s);
                }
            }
        }
        entries.retain(|_, v| !v.is_empty());
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Small general-purpose lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon parses")
    }

    pub fn synonyms(&self, token: &str) -> &[String] {
        self.entries
            .get(&token.to_lowercase())
            .map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdaOp {
    SynonymReplace,
    RandomInsert,
    RandomSwap,
    RandomDelete,
}

impl EdaOp {
    pub const ALL: [EdaOp; 4] = [
        EdaOp::SynonymReplace,
        EdaOp::RandomInsert,
        EdaOp::RandomSwap,
        EdaOp::RandomDelete,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdaParams {
    /// Fraction of tokens touched by an operation.
    pub alpha: f64,
    /// Variants per input sentence.
    pub n_aug: usize,
    pub ops: Vec<EdaOp>,
    pub seed: u64,
}

impl Default for EdaParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            n_aug: 4,
            ops: EdaOp::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl EdaParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("EDA alpha must lie in [0, 1]"));
        }
        if self.n_aug == 0 {
            return Err(Error::invalid("EDA n_aug must be at least 1"));
        }
        if self.ops.is_empty() {
            return Err(Error::invalid("EDA needs at least one operation"));
        }
        Ok(())
    }
}

/// One EDA variant and what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaVariant {
    pub tokens: Vec<String>,
    pub op: EdaOp,
    /// Number of edits actually applied.
    pub edits: usize,
    /// The operation could not change the sentence (e.g. swapping inside a
    /// one-token sentence, or no token has a synonym).
    pub identity: bool,
}

/// Applies `op` to `max(1, ⌊alpha·len⌋)` positions.
pub fn apply_op<R: Rng + ?Sized>(
    tokens: &[String],
    op: EdaOp,
    alpha: f64,
    lex: &SynonymLexicon,
    rng: &mut R,
) -> EdaVariant {
    let n = ((alpha * tokens.len() as f64).floor() as usize).max(1);
    let mut out = tokens.to_vec();
    let mut edits = 0;
    match op {
        EdaOp::SynonymReplace => {
            let mut positions: Vec<usize> = (0..out.len())
                .filter(|&i| !lex.synonyms(&out[i]).is_empty())
                .collect();
            positions.shuffle(rng);
            for &i in positions.iter().take(n) {
                let syn = lex.synonyms(&out[i]).choose(rng).cloned();
                if let Some(s) = syn {
                    out[i] = s;
                    edits += 1;
                }
            }
        }
        EdaOp::RandomInsert => {
            for _ in 0..n {
                let with_syn: Vec<usize> = (0..out.len())
                    .filter(|&i| !lex.synonyms(&out[i]).is_empty())
                    .collect();
                // fall back to repeating an existing token when nothing has a synonym
                let word = match with_syn.choose(rng) {
                    Some(&i) => lex.synonyms(&out[i]).choose(rng).cloned().unwrap(),
                    None => out.choose(rng).cloned().unwrap(),
                };
                let at = rng.gen_range(0..=out.len());
                out.insert(at, word);
                edits += 1;
            }
        }
        EdaOp::RandomSwap => {
            if out.len() >= 2 {
                for _ in 0..n {
                    let i = rng.gen_range(0..out.len());
                    let mut j = rng.gen_range(0..out.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    out.swap(i, j);
                    edits += 1;
                }
            }
        }
        EdaOp::RandomDelete => {
            let mut idx: Vec<usize> = (0..out.len()).collect();
            idx.shuffle(rng);
            let k = n.min(out.len() - 1);
            let mut doomed: Vec<usize> = idx[..k].to_vec();
            doomed.sort_unstable_by(|a, b| b.cmp(a));
            for i in doomed {
                out.remove(i);
                edits += 1;
            }
        }
    }
    EdaVariant {
        identity: out == tokens,
        tokens: out,
        op,
        edits,
    }
}

#[derive(Debug, Clone)]
pub struct EdaOutput {
    /// `n · n_aug` variants; variant `j` of sentence `i` sits at
    /// `i · n_aug + j`.
    pub dataset: Dataset,
    pub variants: Vec<EdaVariant>,
}

/// Produces `n_aug` variants per sentence, each from one operation chosen
/// uniformly among `p.ops`. Labels are copied unchanged.
pub fn eda_augment(d: &Dataset, lex: &SynonymLexicon, p: &EdaParams) -> Result<EdaOutput> {
    p.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset("EDA input".into()));
    }
    let mut items = Vec::with_capacity(d.len() * p.n_aug);
    let mut variants = Vec::with_capacity(d.len() * p.n_aug);
    for (i, s) in d.items().iter().enumerate() {
        for j in 0..p.n_aug {
            let mut rng = seed::rng_for(p.seed, &[i as u64, j as u64]);
            let op = *p.ops.choose(&mut rng).expect("ops is non-empty");
            let v = apply_op(&s.tokens, op, p.alpha, lex, &mut rng);
            if v.identity {
                log::debug!("EDA {op:?} left sentence {i} unchanged");
            }
            items.push(LabeledSentence::from_tokens(v.tokens.clone(), s.label)?);
            variants.push(v);
        }
    }
    Ok(EdaOutput {
        dataset: Dataset::new(d.labels().clone(), items)?,
        variants,
    })
}

#[derive(Debug, Clone)]
pub struct WeakLabeled {
    pub dataset: Dataset,
    pub confidences: Vec<f64>,
}

/// Labels each string with `h`'s prediction. No filtering happens here.
pub fn weak_label<S: AsRef<str>>(h: &ClassifierModel, unlabeled: &[S]) -> Result<WeakLabeled> {
    let mut items = Vec::with_capacity(unlabeled.len());
    let mut confidences = Vec::with_capacity(unlabeled.len());
    for text in unlabeled {
        let text = text.as_ref();
        let tokens = tokenize(text);
        let p = h.predict_tokens(&tokens)?;
        items.push(LabeledSentence {
            text: text.to_owned(),
            tokens,
            label: p.label,
        });
        confidences.push(p.confidence);
    }
    Ok(WeakLabeled {
        dataset: Dataset::new(h.labels.clone(), items)?,
        confidences,
    })
}

/// Texts in order, labels dropped.
pub fn strip_labels(d: &Dataset) -> Vec<String> {
    d.items().iter().map(|s| s.text.clone()).collect()
}
