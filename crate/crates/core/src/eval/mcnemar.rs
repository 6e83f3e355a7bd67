use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;

/// Paired comparison of two classifiers on the same test items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Items A got right and B got wrong.
    pub b: usize,
    /// Items A got wrong and B got right.
    pub c: usize,
    /// Exact two-sided binomial p-value.
    pub p_value: f64,
    pub significant_at: f64,
    /// Continuity-corrected chi-square statistic `(|b−c|−1)²/(b+c)`, absent
    /// when there are no discordant pairs.
    pub chi_square: Option<f64>,
}

impl McNemarResult {
    pub fn is_significant(&self) -> bool {
        self.p_value < self.significant_at
    }
}

/// `min(1, 2 · Σ_{k ≤ min(b,c)} C(b+c, k) / 2^(b+c))`, and 1 when `b + c = 0`.
pub fn exact_binomial_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    // log pmf of Binomial(n, 1/2), built up term by term
    let mut log_terms = Vec::with_capacity(m + 1);
    let mut lp = -(n as f64) * std::f64::consts::LN_2;
    log_terms.push(lp);
    for k in 0..m {
        lp += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        log_terms.push(lp);
    }
    let top = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail = top.exp() * log_terms.iter().map(|l| (l - top).exp()).sum::<f64>();
    (2.0 * tail).min(1.0)
}

pub fn mcnemar_test(a: &[bool], b: &[bool]) -> Result<McNemarResult> {
    mcnemar_test_at(a, b, DEFAULT_SIGNIFICANCE)
}

pub fn mcnemar_test_at(a: &[bool], b: &[bool], significance: f64) -> Result<McNemarResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("McNemar test needs at least one paired item"));
    }
    let only_a = a.iter().zip(b).filter(|(x, y)| **x && !**y).count();
    let only_b = a.iter().zip(b).filter(|(x, y)| !**x && **y).count();
    Ok(from_counts(only_a, only_b, significance))
}

pub fn from_counts(b: usize, c: usize, significance: f64) -> McNemarResult {
    let n = b + c;
    let chi_square = (n > 0).then(|| {
        let d = (b as f64 - c as f64).abs() - 1.0;
        d.max(0.0).powi(2) / n as f64
    });
    McNemarResult {
        b,
        c,
        p_value: exact_binomial_p(b, c),
        significant_at: significance,
        chi_square,
    }
}

/// Relative improvement `100 · (method − baseline) / baseline`.
pub fn improvement_percent(baseline_acc: f64, method_acc: f64) -> Result<f64> {
    if !(baseline_acc > 0.0) {
        return Err(Error::invalid("baseline accuracy must be positive"));
    }
    Ok(100.0 * (method_acc - baseline_acc) / baseline_acc)
}
