//! Tuning behavior: argmax correctness against exhaustive re-evaluation,
//! tie handling, and the value of a larger search budget.

use spatialcv::dataset::one_hot;
use spatialcv::learners::{self, LearnerKind};
use spatialcv::metrics;
use spatialcv::partition::{self, PartitionSpec, Strategy};
use spatialcv::seed::{self, tag};
use spatialcv::synth::{make_classification, FieldSpec};
use spatialcv::tuner::{sample_random, table1_space, tune};

fn fixture(seed: u64, n: usize) -> (spatialcv::dataset::Dataset<f64>,) {
    (make_classification(&FieldSpec {
        n,
        extent: (1.0, 1.0),
        range: 0.4,
        sill: 1.0,
        nugget: 0.05,
        n_informative: 2,
        n_noise: 2,
        intercept: 0.0,
        seed,
    })
    .unwrap(),)
}

#[test]
fn best_trial_is_the_exhaustive_argmax() {
    let (ds,) = fixture(3, 100);
    let design = one_hot(&ds).unwrap().design;
    let tune_seed = 91;
    let budget = 10;
    let result = tune(
        LearnerKind::Wknn,
        &design,
        &ds.labels,
        &ds.coords,
        Strategy::Random,
        budget,
        5,
        tune_seed,
    )
    .unwrap();
    assert_eq!(result.trials.len(), budget);

    // independent re-evaluation of every sampled setting on the same folds
    let settings = sample_random(&table1_space(LearnerKind::Wknn).unwrap(), budget, tune_seed);
    let spec = PartitionSpec {
        k: 5,
        repetitions: 1,
        strategy: Strategy::Random,
        seed: seed::mix(&[tune_seed, tag::INNER_PART]),
    };
    let assignment = partition::random_kfold(design.n, &spec).unwrap();
    let mut means: Vec<Option<f64>> = Vec::new();
    for setting in &settings {
        let mut scores = Vec::new();
        for fold in 0..5 {
            let (train, test) = partition::fold_split(&assignment, 0, fold);
            let y_train: Vec<u8> = train.iter().map(|&r| ds.labels[r as usize]).collect();
            let y_test: Vec<u8> = test.iter().map(|&r| ds.labels[r as usize]).collect();
            let fit_seed = seed::mix(&[tune_seed, tag::INNER_FIT, fold as u64]);
            let model = learners::fit(
                LearnerKind::Wknn,
                &design.subset(&train),
                &y_train,
                setting,
                fit_seed,
            )
            .unwrap();
            let predictions = model.predict(&design.subset(&test)).unwrap();
            if let Some(a) = metrics::auroc(&predictions, &y_test).unwrap().auroc {
                scores.push(a);
            }
        }
        means.push(if scores.is_empty() {
            None
        } else {
            Some(scores.iter().sum::<f64>() / scores.len() as f64)
        });
    }

    for (trial, mean) in result.trials.iter().zip(&means) {
        match (trial.mean_auroc, mean) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
            (None, None) => {}
            other => panic!("disagreement {other:?}"),
        }
    }
    let argmax = means
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|v| (i, v)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    assert_eq!(result.best, settings[argmax]);
    let best_mean = result
        .trials
        .iter()
        .find(|t| t.setting == result.best)
        .unwrap()
        .mean_auroc
        .unwrap();
    for trial in &result.trials {
        if let Some(m) = trial.mean_auroc {
            assert!(best_mean >= m);
        }
    }
}

#[test]
fn equal_means_choose_the_earliest_sample() {
    // all-ties scoring: with one inner fold whose labels the learner cannot
    // separate better than chance isn't deterministic enough, so check the
    // tie rule directly through the trial list: duplicate settings must
    // produce identical means and the first index must win
    let (ds,) = fixture(5, 80);
    let design = one_hot(&ds).unwrap().design;
    let result = tune(
        LearnerKind::Wknn,
        &design,
        &ds.labels,
        &ds.coords,
        Strategy::Random,
        25,
        5,
        17,
    )
    .unwrap();
    let best_mean = result
        .trials
        .iter()
        .find(|t| t.setting == result.best)
        .unwrap()
        .mean_auroc;
    let first_with_best = result
        .trials
        .iter()
        .position(|t| t.mean_auroc == best_mean)
        .unwrap();
    assert_eq!(result.trials[first_with_best].setting, result.best);
}

#[test]
fn budget_zero_returns_defaults_without_trials() {
    let (ds,) = fixture(7, 60);
    let design = one_hot(&ds).unwrap().design;
    let result = tune(
        LearnerKind::Svm,
        &design,
        &ds.labels,
        &ds.coords,
        Strategy::SpatialKmeans,
        0,
        5,
        3,
    )
    .unwrap();
    assert!(result.trials.is_empty());
    assert_eq!(result.best, learners::default_setting(LearnerKind::Svm, design.p));
}

#[test]
fn larger_budgets_find_better_inner_scores_on_average() {
    // random-search dominance, checked statistically over seeds
    let (ds,) = fixture(11, 90);
    let design = one_hot(&ds).unwrap().design;
    let mean_at = |budget: usize| -> f64 {
        let mut total = 0.0;
        for s in 0..20u64 {
            let result = tune(
                LearnerKind::Wknn,
                &design,
                &ds.labels,
                &ds.coords,
                Strategy::Random,
                budget,
                5,
                1000 + s,
            )
            .unwrap();
            let best = result
                .trials
                .iter()
                .filter_map(|t| t.mean_auroc)
                .fold(f64::MIN, f64::max);
            total += best;
        }
        total / 20.0
    };
    let at_10 = mean_at(10);
    let at_50 = mean_at(50);
    assert!(
        at_50 >= at_10,
        "budget 50 mean best {at_50} below budget 10 mean best {at_10}"
    );
}
