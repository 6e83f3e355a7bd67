//! Invariant checks that report a message instead of panicking, so the
//! acceptance harness can tally them.

use std::collections::BTreeMap;

use lambada_core::baselines::{apply_op, EdaOp, SynonymLexicon};
use lambada_core::classify::{objective, predict, ClassifierSpec, FeatureVocab, Weights};
use lambada_core::condlm::{
    encode_training_stream, fit_conditional_lm, next_token_dist, LmVocab, NGramParams,
};
use lambada_core::corpus::{split_dataset, subsample_per_class, Dataset, LabelMap, SplitSpec};
use lambada_core::lambada::{run_lambada, AugmentationPlan, LambadaOutcome, Verdict};
use lambada_core::seed;
use rand::Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn sums_to_one(p: &[f64]) -> bool {
    p.iter().all(|x| x.is_finite() && *x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

pub fn classifier_normalization() -> Check {
    let train = subsample_per_class(&super::train_pool(), 5, 11).unwrap().dataset;
    for spec in [ClassifierSpec::default(), ClassifierSpec::logreg()] {
        let h = spec.train(&train).map_err(|e| e.to_string())?;
        for s in super::test_set().items().iter().step_by(7) {
            let p = predict(&h, &s.text).map_err(|e| e.to_string())?;
            ensure!(sums_to_one(&p.distribution), "{}: {:?} on `{}`", spec.name(), p.distribution, s.text);
        }
        let p = predict(&h, "zzz qqq").map_err(|e| e.to_string())?;
        ensure!(sums_to_one(&p.distribution), "{}: all-OOV input {:?}", spec.name(), p.distribution);
    }
    Ok(())
}

pub fn lm_normalization() -> Check {
    let train = subsample_per_class(&super::train_pool(), 5, 12).unwrap().dataset;
    let prior = super::prior(100, 4);
    let m = fit_conditional_lm(&train, &prior, &NGramParams::default()).map_err(|e| e.to_string())?;
    let stream = encode_training_stream(&train, m.vocab()).map_err(|e| e.to_string())?;
    let ids = stream.ids();
    for end in 0..ids.len() {
        let ctx = &ids[end.saturating_sub(2)..end];
        let p = next_token_dist(&m, ctx);
        ensure!(p.len() == m.vocab().len(), "distribution over {} of {} ids", p.len(), m.vocab().len());
        ensure!(sums_to_one(&p), "context {ctx:?} sums to {}", p.iter().sum::<f64>());
    }
    // a context that never occurred
    ensure!(sums_to_one(&next_token_dist(&m, &[1, 1])), "unseen context");
    Ok(())
}

/// `LABEL SEP tokens EOS` per item, and decoding inverts it.
pub fn stream_round_trip() -> Check {
    let labels = LabelMap::from_names(["one", "two"]).unwrap();
    let d = Dataset::from_pairs(labels, [("a b", 1), ("c", 2)]).unwrap();
    let vocab = LmVocab::for_dataset(&d, &[]).map_err(|e| e.to_string())?;
    let stream = encode_training_stream(&d, &vocab).map_err(|e| e.to_string())?;
    let surface: Vec<&str> = stream.ids().iter().map(|&i| vocab.token(i)).collect();
    let l1 = vocab.token(vocab.label_id(1).unwrap());
    let l2 = vocab.token(vocab.label_id(2).unwrap());
    let want = [l1, "<SEP>", "a", "b", "<EOS>", l2, "<SEP>", "c", "<EOS>"];
    ensure!(surface == want, "encoded {surface:?}");

    let toy = super::dataset(8, 21);
    let vocab = LmVocab::for_dataset(&toy, &[]).map_err(|e| e.to_string())?;
    let decoded = encode_training_stream(&toy, &vocab)
        .and_then(|s| s.decode(&vocab))
        .map_err(|e| e.to_string())?;
    let original: Vec<(Vec<String>, u32)> =
        toy.items().iter().map(|s| (s.tokens.clone(), s.label)).collect();
    ensure!(decoded == original, "decode(encode(D)) differs from D");
    Ok(())
}

pub fn split_partition() -> Check {
    let d = super::train_pool();
    let spec = SplitSpec { seed: 5, ..Default::default() };
    let s = split_dataset(&d, &spec).map_err(|e| e.to_string())?;
    let key = |ds: &Dataset| {
        let mut m: BTreeMap<(String, u32), usize> = BTreeMap::new();
        for it in ds.items() {
            *m.entry((it.text.clone(), it.label)).or_default() += 1;
        }
        m
    };
    let mut joined = key(&s.train);
    for part in [&s.validation, &s.test] {
        for (k, v) in key(part) {
            *joined.entry(k).or_default() += v;
        }
    }
    ensure!(joined == key(&d), "splits are not a partition of the input");
    let n = super::TRAIN_POOL_PER_CLASS;
    let held = (0.1 * n as f64).floor() as usize;
    for (part, want) in [(&s.train, n - 2 * held), (&s.validation, held), (&s.test, held)] {
        ensure!(part.class_counts().iter().all(|&c| c == want), "class counts {:?}, want {want}", part.class_counts());
    }
    Ok(())
}

pub fn eda_properties() -> Check {
    let lex = SynonymLexicon::bundled();
    let mut rng = seed::rng(31);
    let sentences = [
        "show me the cheapest flight to boston",
        "play some good music",
        "what is the weather like today",
        "hello",
    ];
    for text in sentences {
        let tokens: Vec<String> = text.split(' ').map(str::to_owned).collect();
        for alpha in [0.1, 0.3, 0.5] {
            let n = ((alpha * tokens.len() as f64).floor() as usize).max(1);
            for op in EdaOp::ALL {
                let v = apply_op(&tokens, op, alpha, &lex, &mut rng);
                let len = v.tokens.len();
                match op {
                    EdaOp::RandomSwap => {
                        let (mut a, mut b) = (tokens.clone(), v.tokens.clone());
                        a.sort();
                        b.sort();
                        ensure!(a == b, "swap changed the multiset of `{text}`");
                    }
                    EdaOp::SynonymReplace => ensure!(len == tokens.len(), "synonym replacement changed length"),
                    EdaOp::RandomInsert => ensure!(len == tokens.len() + n, "insert gave {len} tokens"),
                    EdaOp::RandomDelete => ensure!(
                        len >= 1 && len == tokens.len() - n.min(tokens.len() - 1),
                        "delete gave {len} tokens from {}", tokens.len()
                    ),
                }
            }
        }
    }
    Ok(())
}

/// One LAMBADA pass on a 5-per-class toy subsample.
pub fn toy_outcome(seed_value: u64, classifier: &ClassifierSpec) -> (Dataset, LambadaOutcome) {
    let train = subsample_per_class(&super::train_pool(), 5, seed::derive(seed_value, &[5]))
        .unwrap()
        .dataset;
    let plan = AugmentationPlan::uniform(3, 20).with_seed(seed_value);
    let out = run_lambada(&train, classifier, &super::generator(), &plan).unwrap();
    (train, out)
}

pub fn top_n_filter() -> Check {
    for s in 0..3 {
        let (train, out) = toy_outcome(s, &ClassifierSpec::default());
        let mut seen: Vec<String> = train.items().iter().map(|i| i.normalized_text()).collect();
        for class in 1..=3u32 {
            let cands: Vec<_> = out.pool.candidates.iter().filter(|c| c.sentence.label == class).collect();
            let kept: Vec<_> = cands.iter().filter(|c| c.verdict == Some(Verdict::Retained)).collect();
            let low: Vec<_> = cands.iter().filter(|c| c.verdict == Some(Verdict::LowRank)).collect();
            ensure!(kept.len() <= 20, "class {class} kept {}", kept.len());
            ensure!(low.is_empty() || kept.len() == 20, "class {class} dropped ranked items below target");
            ensure!(
                kept.iter().all(|c| c.predicted == Some(class)),
                "class {class} kept a sentence the baseline labels differently"
            );
            let min_kept = kept.iter().filter_map(|c| c.confidence).fold(f64::INFINITY, f64::min);
            let max_low = low.iter().filter_map(|c| c.confidence).fold(f64::NEG_INFINITY, f64::max);
            ensure!(min_kept >= max_low, "class {class}: kept {min_kept} < dropped {max_low}");
            for c in &kept {
                let t = c.sentence.normalized_text();
                ensure!(!seen.contains(&t), "`{t}` retained twice or copied from training data");
                seen.push(t);
            }
        }
        ensure!(
            out.synthesized.len() == out.report.retained,
            "report says {} retained, dataset has {}", out.report.retained, out.synthesized.len()
        );
    }
    Ok(())
}

/// Same seed gives identical output regardless of the rayon pool size.
pub fn pipeline_determinism() -> Check {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| toy_outcome(42, &ClassifierSpec::logreg()).1)
    };
    let a = run(1);
    let b = run(4);
    let c = run(4);
    ensure!(a.synthesized == b.synthesized && b.synthesized == c.synthesized, "retained sets differ");
    ensure!(a.report == b.report && a.pool == b.pool, "reports or pools differ");
    Ok(())
}

/// Central differences against the analytic gradient on a 10-example toy.
pub fn logreg_gradient() -> Check {
    let d = super::dataset(4, 8);
    let d = Dataset::new(d.labels().clone(), d.items()[..10].to_vec()).unwrap();
    let vocab = FeatureVocab::build(&d);
    let (obj, _) = objective(&d, &vocab, 0.01);
    let mut rng = seed::rng(3);
    let mut w = Weights::zeros(obj.classes, obj.dim);
    for v in w.w.iter_mut().chain(w.b.iter_mut()) {
        *v = rng.gen_range(-0.5..0.5);
    }
    let batch: Vec<usize> = (0..10).collect();
    let g = obj.gradient_on(&w, &batch);
    let h = 1e-5;
    let n_w = w.w.len();
    for k in 0..n_w + w.b.len() {
        let bump = |delta: f64| {
            let mut p = w.clone();
            if k < n_w {
                p.w[k] += delta;
            } else {
                p.b[k - n_w] += delta;
            }
            obj.loss_on(&p, &batch)
        };
        let numeric = (bump(h) - bump(-h)) / (2.0 * h);
        let analytic = if k < n_w { g.w[k] } else { g.b[k - n_w] };
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
        ensure!(rel <= 1e-4, "parameter {k}: analytic {analytic} numeric {numeric}");
    }
    Ok(())
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("classifier normalization", classifier_normalization()),
        ("lm normalization", lm_normalization()),
        ("stream round trip", stream_round_trip()),
        ("split partition", split_partition()),
        ("eda properties", eda_properties()),
        ("top-n filter", top_n_filter()),
        ("pipeline determinism", pipeline_determinism()),
        ("logreg gradient", logreg_gradient()),
    ]
}
