//! The generator slot `G` of the pipeline.
//!
//! Anything that can be adapted to a labeled corpus and then asked for `n`
//! sentences of class `y` can serve as the generator: the built-in n-gram
//! model, or an external process speaking the line-delimited JSON protocol
//! in [`crate::extgen`].

use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use crate::condlm::{fit_conditional_lm, sample_tokens, GenerationParams, NGramModel, NGramParams, Sample};
use crate::corpus::{ClassId, Dataset, LabeledSentence};
use crate::extgen::ExternalGenerator;
use crate::{seed, Error, Result};

pub trait SentenceGenerator: Send {
    fn describe(&self) -> String;

    fn supports(&self, class: ClassId) -> bool;

    /// Returns exactly `count` sentences for `class`, deterministic in
    /// `seed`.
    fn generate(
        &mut self,
        class: ClassId,
        count: usize,
        seed: u64,
        params: &GenerationParams,
    ) -> Result<Vec<Sample>>;
}

impl SentenceGenerator for NGramModel {
    fn describe(&self) -> String {
        format!("{}-gram model, {} tokens", self.order(), self.vocab().len())
    }

    fn supports(&self, class: ClassId) -> bool {
        self.vocab().label_id(class).is_some()
    }

    /// Sample `i` is drawn with its own generator seeded by
    /// `derive(seed, [i])`, so output does not depend on thread count.
    fn generate(
        &mut self,
        class: ClassId,
        count: usize,
        seed: u64,
        params: &GenerationParams,
    ) -> Result<Vec<Sample>> {
        params.validate()?;
        if !self.supports(class) {
            return Err(Error::UnknownClass(class.to_string()));
        }
        let model: &NGramModel = self;
        (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let gen_seed = seed::derive(seed, &[i]);
                let (tokens, truncated) = sample_tokens(model, class, params, &mut seed::rng(gen_seed))?;
                Ok(Sample {
                    sentence: LabeledSentence::from_tokens(tokens, class)?,
                    truncated,
                    gen_seed,
                })
            })
            .collect()
    }
}

/// How to obtain `G_tuned` from a training set.
#[derive(Debug, Clone)]
pub enum GeneratorSpec {
    /// Built-in n-gram model. `prior` holds tokenized unlabeled sentences
    /// whose counts are merged before the labeled stream, playing the part
    /// of pre-training text.
    NGram {
        params: NGramParams,
        prior: Arc<Vec<Vec<String>>>,
    },
    /// External process launched from a command line.
    External { command: String, timeout: Duration },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::NGram {
            params: NGramParams::default(),
            prior: Arc::new(Vec::new()),
        }
    }
}

impl GeneratorSpec {
    pub fn ngram(params: NGramParams, prior: Vec<Vec<String>>) -> Self {
        GeneratorSpec::NGram {
            params,
            prior: Arc::new(prior),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::NGram { .. } => "ngram",
            GeneratorSpec::External { .. } => "external",
        }
    }

    /// Adapts the generator to `d` (the fine-tuning step).
    pub fn fit(&self, d: &Dataset) -> Result<Box<dyn SentenceGenerator>> {
        match self {
            GeneratorSpec::NGram { params, prior } => {
                Ok(Box::new(fit_conditional_lm(d, prior, params)?))
            }
            GeneratorSpec::External { command, timeout } => {
                let mut g = ExternalGenerator::spawn(command, *timeout)?;
                g.fit(d)?;
                Ok(Box::new(g))
            }
        }
    }
}
