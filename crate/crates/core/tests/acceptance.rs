//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lambada_core::baselines::SynonymLexicon;
use lambada_core::classify::ClassifierSpec;
use lambada_core::eval::{
    exact_binomial_p, improvement_percent, run_experiment_grid, GridData, GridResults,
    GridSettings, Method,
};
use lambada_core::lambada::{synthesize_pool, AugmentationPlan};

const SEEDS: u64 = 20;
const MIN_GAIN: f64 = 0.05;
const ALPHA: f64 = 0.01;
const TIME_LIMIT: Duration = Duration::from_secs(120);

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn grid() -> (GridResults, Duration) {
    let data = GridData {
        train_pool: common::train_pool(),
        test: common::test_set(),
        generator: common::generator(),
        lexicon: SynonymLexicon::bundled(),
    };
    let settings = GridSettings {
        classifiers: vec![ClassifierSpec::default(), ClassifierSpec::logreg()],
        methods: vec![Method::Lambada, Method::GptUnlabeled, Method::WeakLabel],
        samples_per_class: vec![5, 100],
        seeds: (0..SEEDS).collect(),
        unlabeled_per_class: 20,
        significance: ALPHA,
        ..Default::default()
    };
    let t = Instant::now();
    let r = run_experiment_grid(&data, &settings).expect("grid runs");
    (r, t.elapsed())
}

fn mean(r: &GridResults, clf: &str, k: usize, m: Method) -> f64 {
    r.row(clf, k, m)
        .and_then(|row| row.mean_accuracy)
        .unwrap_or(f64::NAN)
}

fn direction_of_effect(r: &GridResults, elapsed: Duration) -> Line {
    let mut pass = elapsed <= TIME_LIMIT;
    let mut parts = Vec::new();
    for clf in &r.classifiers {
        let row = r.row(clf, 5, Method::Lambada).expect("lambada row");
        let gain = mean(r, clf, 5, Method::Lambada) - mean(r, clf, 5, Method::Baseline);
        let p = row.p_value.unwrap_or(1.0);
        pass &= gain >= MIN_GAIN && p < ALPHA && row.failures == 0;
        parts.push(format!("{clf} {:+.1} pts p={p:.1e}", 100.0 * gain));
    }
    Line {
        name: "direction of effect (5/class, 20 seeds, gain >= 5 pts, p < 0.01, <= 2 min)",
        pass,
        detail: format!("{}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    }
}

fn filter_value() -> Line {
    let mut wins = 0;
    let (mut pool_sum, mut kept_sum) = (0.0, 0.0);
    for s in 0..SEEDS {
        let (_, out) = common::checks::toy_outcome(s, &ClassifierSpec::default());
        let fidelity = |items: &mut dyn Iterator<Item = &lambada_core::corpus::LabeledSentence>| {
            let (mut n, mut ok) = (0usize, 0usize);
            for it in items {
                n += 1;
                ok += usize::from(common::member(&it.tokens, it.label));
            }
            ok as f64 / n.max(1) as f64
        };
        let pool = fidelity(&mut out.pool.candidates.iter().map(|c| &c.sentence));
        let kept = fidelity(&mut out.synthesized.items().iter());
        pool_sum += pool;
        kept_sum += kept;
        wins += usize::from(kept > pool);
    }
    Line {
        name: "filter raises label fidelity in >= 18 of 20 seeds",
        pass: wins >= 18,
        detail: format!(
            "{wins}/20; mean fidelity pool {:.3} retained {:.3}",
            pool_sum / SEEDS as f64,
            kept_sum / SEEDS as f64
        ),
    }
}

fn sample_size_trend(r: &GridResults) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for clf in &r.classifiers {
        let gap = |k| mean(r, clf, k, Method::Lambada) - mean(r, clf, k, Method::Baseline);
        let (small, large) = (gap(5), gap(100));
        pass &= small >= large;
        parts.push(format!("{clf} gap@5 {:+.2} gap@100 {:+.2}", 100.0 * small, 100.0 * large));
    }
    Line {
        name: "gain at 5/class >= gain at 100/class",
        pass,
        detail: parts.join(", "),
    }
}

fn generated_labels_help(r: &GridResults) -> Line {
    let clf = ClassifierSpec::default().name();
    let lambada = mean(r, clf, 5, Method::Lambada);
    let unlabeled = mean(r, clf, 5, Method::GptUnlabeled);
    let weak = mean(r, clf, 5, Method::WeakLabel);
    Line {
        name: "lambada >= gpt_unlabeled (naive bayes, 5/class)",
        pass: lambada >= unlabeled,
        detail: format!(
            "lambada {:.1}%, gpt_unlabeled {:.1}%, weak_label {:.1}%",
            100.0 * lambada,
            100.0 * unlabeled,
            100.0 * weak
        ),
    }
}

/// Exact two-sided tail from integer binomial coefficients.
fn brute_force_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let tail: u128 = row[..=b.min(c)].iter().sum();
    ((2 * tail) as f64 / (1u128 << n) as f64).min(1.0)
}

fn mcnemar_oracle() -> Line {
    let mut worst: f64 = 0.0;
    for n in 0..=20 {
        for b in 0..=n {
            worst = worst.max((exact_binomial_p(b, n - b) - brute_force_p(b, n - b)).abs());
        }
    }
    let p = exact_binomial_p(10, 2);
    Line {
        name: "mcnemar exact p matches enumeration (b+c <= 20, 1e-12); p(10,2) = 0.0386",
        pass: worst <= 1e-12 && (p - 0.0386).abs() <= 1e-4,
        detail: format!("max error {worst:.1e}; p(10,2) = {p:.5}"),
    }
}

fn improvement_rows() -> Line {
    let a = improvement_percent(0.356, 0.565).unwrap();
    let b = improvement_percent(0.603, 0.643).unwrap();
    Line {
        name: "improvement formula: (35.6, 56.5) -> 58.7, (60.3, 64.3) -> 6.6",
        pass: (a - 58.7).abs() <= 0.05 && (b - 6.6).abs() <= 0.05,
        detail: format!("{a:.3}, {b:.3}"),
    }
}

fn invariants() -> Line {
    let results = common::checks::all();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    Line {
        name: "invariant suites",
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks", results.len())
        } else {
            failed.join("; ")
        },
    }
}

fn pool_size() -> Line {
    let train = lambada_core::corpus::subsample_per_class(&common::train_pool(), 5, 1)
        .unwrap()
        .dataset;
    let plan = AugmentationPlan::uniform(3, 20);
    let mut g = common::generator().fit(&train).unwrap();
    let pool = synthesize_pool(g.as_mut(), train.labels(), &plan).unwrap();
    let per_class: Vec<usize> = (1..=3).map(|y| pool.of_class(y).count()).collect();
    Line {
        name: "pool size for q=3, N_y=20 is 600",
        pass: plan.pool_size() == 600 && pool.len() == 600 && per_class == [200, 200, 200],
        detail: format!("planned {}, drawn {} {per_class:?}", plan.pool_size(), pool.len()),
    }
}

fn main() -> ExitCode {
    let (r, elapsed) = grid();
    let lines = [
        direction_of_effect(&r, elapsed),
        filter_value(),
        sample_size_trend(&r),
        generated_labels_help(&r),
        mcnemar_oracle(),
        improvement_rows(),
        invariants(),
        pool_size(),
    ];
    println!();
    for (i, l) in lines.iter().enumerate() {
        let tag = if l.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {}: {}", i + 1, l.name, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("\nacceptance: {} passed, {failed} failed\n", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
