use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::{smoothed_idf, tfidf, FeatureVector, FeatureVocab};
use super::softmax;
use crate::corpus::Dataset;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
            seed: 0,
            batch_size: 16,
        }
    }
}

/// Weight matrix (row-major, one row per class) and biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub classes: usize,
    pub dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Weights {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            w: vec![0.0; classes * dim],
            b: vec![0.0; classes],
        }
    }

    pub fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.w[c * self.dim..(c + 1) * self.dim];
                self.b[c] + x.iter().map(|(j, v)| row[*j] * v).sum::<f64>()
            })
            .collect()
    }

    fn add_scaled(&mut self, scale: f64, g: &Weights) {
        for (w, d) in self.w.iter_mut().zip(&g.w) {
            *w += scale * d;
        }
        for (b, d) in self.b.iter_mut().zip(&g.b) {
            *b += scale * d;
        }
    }
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (biases unregularized) over a fixed
/// set of TF-IDF examples.
#[derive(Debug, Clone)]
pub struct Objective {
    pub features: Vec<FeatureVector>,
    pub targets: Vec<usize>,
    pub classes: usize,
    pub dim: usize,
    pub l2: f64,
}

impl Objective {
    pub fn loss(&self, w: &Weights) -> f64 {
        let all: Vec<usize> = (0..self.features.len()).collect();
        self.loss_on(w, &all)
    }

    pub fn loss_on(&self, w: &Weights, batch: &[usize]) -> f64 {
        let ce: f64 = batch
            .iter()
            .map(|&i| {
                let z = w.logits(&self.features[i]);
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - z[self.targets[i]]
            })
            .sum();
        ce / batch.len() as f64 + 0.5 * self.l2 * w.w.iter().map(|x| x * x).sum::<f64>()
    }

    /// Analytic gradient of [`Objective::loss_on`].
    pub fn gradient_on(&self, w: &Weights, batch: &[usize]) -> Weights {
        let mut g = Weights::zeros(self.classes, self.dim);
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            let x = &self.features[i];
            let p = softmax(&w.logits(x));
            for (c, pc) in p.iter().enumerate() {
                let target = if c == self.targets[i] { 1.0 } else { 0.0 };
                let delta = (pc - target) * scale;
                g.b[c] += delta;
                let row = &mut g.w[c * self.dim..(c + 1) * self.dim];
                for (j, v) in x {
                    row[*j] += delta * v;
                }
            }
        }
        for (gw, ww) in g.w.iter_mut().zip(&w.w) {
            *gw += self.l2 * ww;
        }
        g
    }
}

/// Fitted multinomial logistic regression over L2-normalized TF-IDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub hyper: LogRegParams,
    pub idf: Vec<f64>,
    pub weights: Weights,
}

impl LogReg {
    pub fn features<S: AsRef<str>>(&self, vocab: &FeatureVocab, tokens: &[S]) -> FeatureVector {
        tfidf(vocab, &self.idf, tokens)
    }
}

/// Builds the training objective for `d` together with the idf table used
/// to featurize it.
pub fn objective(d: &Dataset, vocab: &FeatureVocab, l2: f64) -> (Objective, Vec<f64>) {
    let idf = smoothed_idf(vocab, d);
    let features = d
        .items()
        .iter()
        .map(|s| tfidf(vocab, &idf, &s.tokens))
        .collect();
    let targets = d.items().iter().map(|s| s.label as usize - 1).collect();
    let obj = Objective {
        features,
        targets,
        classes: d.num_classes(),
        dim: vocab.dim(),
        l2,
    };
    (obj, idf)
}

/// Mini-batch gradient descent. Returns the model and the full-data loss
/// before training and after each epoch.
pub(crate) fn fit(
    d: &Dataset,
    vocab: &FeatureVocab,
    params: &LogRegParams,
) -> Result<(LogReg, Vec<f64>)> {
    if !(params.learning_rate > 0.0) || params.batch_size == 0 || !(params.l2 >= 0.0) {
        return Err(Error::invalid(
            "logreg needs learning_rate > 0, l2 >= 0 and batch_size >= 1",
        ));
    }
    let (obj, idf) = objective(d, vocab, params.l2);
    let mut w = Weights::zeros(obj.classes, obj.dim);
    let mut rng = seed::rng(params.seed);
    let mut order: Vec<usize> = (0..obj.features.len()).collect();
    let mut history = vec![obj.loss(&w)];
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let g = obj.gradient_on(&w, batch);
            w.add_scaled(-params.learning_rate, &g);
        }
        let loss = obj.loss(&w);
        if !loss.is_finite() || w.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
    }
    Ok((
        LogReg {
            hyper: *params,
            idf,
            weights: w,
        },
        history,
    ))
}
