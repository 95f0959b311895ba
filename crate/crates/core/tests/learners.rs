mod common;

use cpiseq::learners::{
    evaluate, fit, instance_loss, performance, FittedModel, LearnerKind, LearnerSpec, LossKind, Performance, Task,
    LOGLOSS_EPS,
};
use cpiseq::seed::rng_from_seed;
use cpiseq::tabular::{split, Column, ColumnSchema, Dataset, Frame, Target};
use proptest::prelude::*;
use rand::Rng;

fn xor_data(n: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| f64::from(u8::from(a.signum() == b.signum()))).collect();
    Dataset::new(common::frame(vec![x1, x2]), Some(Target::binary("y", y).unwrap())).unwrap()
}

#[test]
fn linear_recovers_noiseless_line() {
    let x: Vec<f64> = (0..30).map(|i| i as f64 / 4.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
    let ds = common::regression(vec![x], y);
    let m = fit(&LearnerSpec::linear(), &ds, &mut rng_from_seed(0)).unwrap();
    let pred = m.predict(&common::frame(vec![vec![0.0, 1.0]])).unwrap();
    assert!((pred[0] - 3.0).abs() < 1e-8);
    assert!((pred[1] - 5.0).abs() < 1e-8);
}

#[test]
fn rf_separates_xor() {
    let ds = xor_data(3000, 1);
    let (train, test) = split(&ds, 2.0 / 3.0, &mut rng_from_seed(2)).unwrap();
    let m = fit(&LearnerSpec::random_forest(500), &train, &mut rng_from_seed(3)).unwrap();
    let acc = evaluate(&m, &test).unwrap();
    assert!(matches!(acc, Performance::Accuracy(_)));
    assert!(acc.value() >= 0.9, "{acc:?}");
    let p = m.predict(&test.features).unwrap();
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn constant_regression_target_predicts_the_constant() {
    let ds = common::regression(vec![(0..20).map(f64::from).collect()], vec![4.5; 20]);
    for spec in [LearnerSpec::linear(), LearnerSpec::random_forest(10)] {
        let m = fit(&spec, &ds, &mut rng_from_seed(0)).unwrap();
        let p = m.predict(&ds.features).unwrap();
        assert!(p.iter().all(|v| (v - 4.5).abs() < 1e-9), "{:?}", spec.kind);
    }
}

#[test]
fn classification_needs_binary_target() {
    let ds = common::regression(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![0.5, 1.5, 2.0, 3.0]);
    assert!(fit(&LearnerSpec::logistic(), &ds, &mut rng_from_seed(0)).is_err());
    let one_class = Dataset::new(common::frame(vec![vec![1.0, 2.0, 3.0]]), Some(Target::binary("y", vec![1.0; 3]).unwrap()))
        .unwrap();
    assert!(fit(&LearnerSpec::logistic(), &one_class, &mut rng_from_seed(0)).is_err());
}

#[test]
fn logistic_intercept_only_is_one_half() {
    let y: Vec<f64> = (0..40).map(|i| f64::from(i % 2)).collect();
    let x = vec![1.0; 40];
    let ds = Dataset::new(common::frame(vec![x]), Some(Target::binary("y", y).unwrap())).unwrap();
    let m = fit(&LearnerSpec::logistic(), &ds, &mut rng_from_seed(0)).unwrap();
    for p in m.predict(&ds.features).unwrap() {
        assert!((p - 0.5).abs() < 1e-8);
    }
}

#[test]
fn rf_memorizes_noiseless_training_data() {
    let mut rng = rng_from_seed(4);
    let x: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
    let z: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a.sin() + 0.5 * b * b).collect();
    let ds = common::regression(vec![x, z], y.clone());
    let m = fit(&LearnerSpec::random_forest(200), &ds, &mut rng_from_seed(5)).unwrap();
    let pred = m.predict(&ds.features).unwrap();
    let r2 = performance(Task::Regression, &y, &pred).unwrap();
    assert!(r2.value() >= 0.9, "{r2:?}");
}

#[test]
fn predict_rejects_other_schema() {
    let ds = common::regression(vec![vec![1.0, 2.0, 3.0]], vec![1.0, 2.0, 4.0]);
    let m = fit(&LearnerSpec::linear(), &ds, &mut rng_from_seed(0)).unwrap();
    let other = Frame::new(vec![ColumnSchema::continuous("w")], vec![Column::Continuous(vec![1.0])]).unwrap();
    assert!(m.predict(&other).is_err());
}

#[test]
fn loss_examples() {
    assert_eq!(instance_loss(&[1.0], &[0.5], LossKind::Mse).unwrap(), [0.25]);
    let ll = instance_loss(&[0.0, 1.0], &[0.5, 0.5], LossKind::LogLoss).unwrap();
    for v in ll {
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }
    let clipped = instance_loss(&[1.0], &[0.0], LossKind::LogLoss).unwrap()[0];
    assert!((clipped + LOGLOSS_EPS.ln()).abs() < 1e-9);
    assert!(clipped.is_finite());
}

#[test]
fn evaluation_examples() {
    let y = [1.0, 2.0, 3.0, 6.0];
    assert_eq!(performance(Task::Regression, &y, &y).unwrap().value(), 1.0);
    let m = common::mean(&y);
    assert!(performance(Task::Regression, &y, &[m; 4]).unwrap().value().abs() < 1e-12);
    assert!(performance(Task::Regression, &[2.0; 3], &[2.0; 3]).is_err());

    let mut rng = rng_from_seed(6);
    let truth: Vec<f64> = (0..10_000).map(|i| f64::from(i % 2)).collect();
    let guess: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let acc = performance(Task::Classification, &truth, &guess).unwrap().value();
    assert!((acc - 0.5).abs() < 0.03);
}

#[test]
fn learner_specs_parse() {
    let s: LearnerSpec = "rf(trees=50,mtry=2)".parse().unwrap();
    assert_eq!(s.kind, LearnerKind::RandomForest);
    assert_eq!((s.forest.n_trees, s.forest.mtry), (50, Some(2)));
    assert_eq!("linear".parse::<LearnerSpec>().unwrap().kind, LearnerKind::Linear);
    assert_eq!("logistic".parse::<LearnerSpec>().unwrap().kind, LearnerKind::Logistic);
    assert!("rf(trees=0)".parse::<LearnerSpec>().is_err());
    assert!("svm".parse::<LearnerSpec>().is_err());
    let back: LearnerSpec = s.to_string().parse().unwrap();
    assert_eq!(back, s);
}

#[test]
fn rf_mtry_is_clamped_to_feature_count() {
    let ds = common::regression(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]], vec![1.0, 2.0, 1.0, 3.0, 2.0, 5.0]);
    let spec: LearnerSpec = "rf(trees=5,mtry=3)".parse().unwrap();
    assert_eq!(spec.forest.resolved_mtry(1, false), 1);
    assert!(fit(&spec, &ds, &mut rng_from_seed(0)).is_ok());
}

fn categorical_data(seed: u64, relabel: bool) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let n = 300;
    let codes: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
    let x: Vec<f64> = common::normals(&mut rng, n);
    let effect = [0.3, -1.0, 2.0, 0.9];
    let noise = common::normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| effect[codes[i] as usize] + x[i] + 0.3 * noise[i]).collect();
    let (levels, codes) = if relabel {
        (vec!["w", "x", "y", "z"], codes.iter().map(|c| 3 - c).collect())
    } else {
        (vec!["z", "y", "x", "w"], codes)
    };
    let f = Frame::new(
        vec![ColumnSchema::continuous("x"), ColumnSchema::categorical("k", levels).unwrap()],
        vec![Column::Continuous(x), Column::Categorical(codes)],
    )
    .unwrap();
    Dataset::new(f, Some(Target::continuous("y", y))).unwrap()
}

#[test]
fn rf_ignores_level_labels() {
    let a = categorical_data(7, false);
    let b = categorical_data(7, true);
    let spec = LearnerSpec::random_forest(50);
    let pa = fit(&spec, &a, &mut rng_from_seed(8)).unwrap().predict(&a.features).unwrap();
    let pb = fit(&spec, &b, &mut rng_from_seed(8)).unwrap().predict(&b.features).unwrap();
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u - v).abs() < 1e-12);
    }
}

#[test]
fn duplicated_constant_feature_leaves_linear_predictions() {
    let mut rng = rng_from_seed(9);
    let x = common::normals(&mut rng, 40);
    let y: Vec<f64> = x.iter().map(|v| 1.0 - v + 0.1 * rng.random::<f64>()).collect();
    let plain = common::regression(vec![x.clone()], y.clone());
    let padded = common::regression(vec![x, vec![2.0; 40], vec![2.0; 40]], y);
    let p1 = fit(&LearnerSpec::linear(), &plain, &mut rng_from_seed(0)).unwrap().predict(&plain.features).unwrap();
    let p2 = fit(&LearnerSpec::linear(), &padded, &mut rng_from_seed(0)).unwrap().predict(&padded.features).unwrap();
    for (a, b) in p1.iter().zip(&p2) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn constant_model_is_flat() {
    let f = common::frame(vec![vec![1.0, 2.0]]);
    let m = FittedModel::constant(&f, Task::Regression, 7.0);
    assert_eq!(m.predict(&f).unwrap(), [7.0, 7.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fits_are_seed_deterministic(seed in any::<u64>(), classification in any::<bool>()) {
        let ds = if classification {
            xor_data(120, seed)
        } else {
            let mut rng = rng_from_seed(seed);
            let x = common::normals(&mut rng, 120);
            let y = x.iter().map(|v| v * v).collect();
            common::regression(vec![x], y)
        };
        let spec = LearnerSpec::random_forest(20);
        let a = fit(&spec, &ds, &mut rng_from_seed(seed)).unwrap().predict(&ds.features).unwrap();
        let b = fit(&spec, &ds, &mut rng_from_seed(seed)).unwrap().predict(&ds.features).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn losses_are_finite_and_nonnegative(
        y in proptest::collection::vec(0u8..2, 1..30),
        p in proptest::collection::vec(0.0f64..=1.0, 30),
    ) {
        let yv: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let pv = &p[..yv.len()];
        for loss in [LossKind::Mse, LossKind::LogLoss] {
            let l = instance_loss(&yv, pv, loss).unwrap();
            prop_assert!(l.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
