use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NGramModel, EOS_ID, SEP_ID};
use crate::corpus::{ClassId, LabeledSentence};
use crate::{seed, Error, Result};

/// Decoding settings. `top_k = Some(1)` is greedy decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_k: None,
            max_len: 40,
            seed: 0,
        }
    }
}

impl GenerationParams {
    pub fn greedy() -> Self {
        Self {
            top_k: Some(1),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        if self.top_k == Some(0) {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        Ok(())
    }
}

/// One generated sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sentence: LabeledSentence,
    /// Hit `max_len` before emitting `EOS`.
    pub truncated: bool,
    pub gen_seed: u64,
}

/// Samples a class-`class` sentence with a generator seeded from
/// `params.seed`.
pub fn sample_sentence(m: &NGramModel, class: ClassId, params: &GenerationParams) -> Result<Sample> {
    let mut rng = seed::rng(params.seed);
    let (tokens, truncated) = sample_tokens(m, class, params, &mut rng)?;
    Ok(Sample {
        sentence: LabeledSentence::from_tokens(tokens, class)?,
        truncated,
        gen_seed: params.seed,
    })
}

/// Continues `[LABEL_class, SEP]` until `EOS` or `max_len` tokens. Reserved
/// tokens other than `EOS` are never emitted, and `EOS` is not allowed as the
/// first token. Returns the tokens and whether the sentence was truncated.
pub fn sample_tokens<R: Rng + ?Sized>(
    m: &NGramModel,
    class: ClassId,
    params: &GenerationParams,
    rng: &mut R,
) -> Result<(Vec<String>, bool)> {
    params.validate()?;
    let vocab = m.vocab();
    let label = vocab
        .label_id(class)
        .ok_or_else(|| Error::UnknownClass(class.to_string()))?;
    let first_corpus = vocab.first_corpus_id() as usize;
    let mut context = vec![label, SEP_ID];
    let mut out = Vec::new();
    while out.len() < params.max_len {
        let mut p = m.dist(&context);
        p[SEP_ID as usize] = 0.0;
        for x in &mut p[EOS_ID as usize + 1..first_corpus] {
            *x = 0.0;
        }
        if out.is_empty() {
            p[EOS_ID as usize] = 0.0;
        }
        let next = choose(&p, params, rng);
        if next == EOS_ID {
            return Ok((out, false));
        }
        out.push(vocab.token(next).to_owned());
        context.push(next);
    }
    Ok((out, true))
}

fn choose<R: Rng + ?Sized>(p: &[f64], params: &GenerationParams, rng: &mut R) -> u32 {
    let mut ranked: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    ranked.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    if let Some(k) = params.top_k {
        ranked.truncate(k);
    }
    if ranked.len() == 1 {
        return ranked[0] as u32;
    }
    let log_max = p[ranked[0]].ln();
    let weights: Vec<f64> = ranked
        .iter()
        .map(|&i| ((p[i].ln() - log_max) / params.temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (&i, w) in ranked.iter().zip(&weights) {
        if u < *w {
            return i as u32;
        }
        u -= w;
    }
    *ranked.last().unwrap() as u32
}
