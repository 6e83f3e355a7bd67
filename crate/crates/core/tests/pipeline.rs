mod common;

use lambada_core::classify::{accuracy, ClassifierSpec};
use lambada_core::corpus::subsample_per_class;
use lambada_core::lambada::{iterate, retrain, run_lambada, AugmentationPlan, DriftGuard};
use lambada_core::seed;

#[test]
fn augmented_classifier_is_no_worse_on_average() {
    let test = common::test_set();
    let (mut base, mut aug) = (0.0, 0.0);
    for s in 0..20u64 {
        let (train, out) = common::checks::toy_outcome(s, &ClassifierSpec::default());
        base += accuracy(&out.baseline, &test).unwrap();
        let h_bar = retrain(&train, &out.synthesized, &ClassifierSpec::default()).unwrap();
        aug += accuracy(&h_bar, &test).unwrap();
    }
    assert!(aug >= base, "augmented {aug} < baseline {base}");
}

#[test]
fn pool_matches_plan() {
    let (_, out) = common::checks::toy_outcome(0, &ClassifierSpec::default());
    assert_eq!(out.pool.len(), 600);
    assert_eq!(out.report.pool_size, 600);
    for c in &out.report.classes {
        assert_eq!(c.generated, 200);
        assert_eq!(c.retained + c.shortfall, 20);
    }
}

#[test]
fn empty_plan_returns_the_baseline_untouched() {
    let train = subsample_per_class(&common::train_pool(), 5, 3).unwrap().dataset;
    let plan = AugmentationPlan::uniform(3, 0);
    let out = run_lambada(&train, &ClassifierSpec::default(), &common::generator(), &plan).unwrap();
    assert!(out.synthesized.is_empty());
    assert_eq!(out.pool.len(), 0);
    assert_eq!(out.baseline, ClassifierSpec::default().train(&train).unwrap());
}

#[test]
fn three_rounds_report_three_times() {
    let pool = common::train_pool();
    let train = subsample_per_class(&pool, 5, seed::derive(9, &[5])).unwrap().dataset;
    let validation = common::dataset(30, 77);
    let plan = AugmentationPlan::uniform(3, 10).with_seed(9);
    let out = iterate(
        &train,
        &validation,
        3,
        &ClassifierSpec::default(),
        &common::generator(),
        &plan,
        DriftGuard { tolerance: 1.0 },
    )
    .unwrap();
    assert_eq!(out.rounds.len(), 3);
    assert!(!out.stopped_early);
    let added: usize = out.rounds.iter().map(|r| r.synthesized.len()).sum();
    assert_eq!(out.augmented.len(), train.len() + added);
    for (i, r) in out.rounds.iter().enumerate() {
        assert_eq!(r.round, i + 1);
        assert_eq!(r.report.pool_size, 300);
        assert!((0.0..=1.0).contains(&r.validation_accuracy));
    }
}

#[test]
fn strict_guard_stops_on_a_drop() {
    let train = subsample_per_class(&common::train_pool(), 5, 4).unwrap().dataset;
    let validation = common::dataset(30, 78);
    let plan = AugmentationPlan::uniform(3, 10).with_seed(4);
    // a negative tolerance treats any non-improvement as drift
    let out = iterate(
        &train,
        &validation,
        3,
        &ClassifierSpec::default(),
        &common::generator(),
        &plan,
        DriftGuard { tolerance: -1.0 },
    )
    .unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert!(out.rounds[0].drifted);
    assert!(out.stopped_early);
    assert_eq!(out.augmented, train);
}
