//! Cross-cutting experiment properties at a small scale: chance-level
//! results on label-permuted data, record conservation, and scheduling
//! independence of whole runs.

use rand::seq::SliceRandom;

use spatialcv::experiment::{
    run_nested_cv, CvSetup, ExperimentConfig, FoldStatus,
};
use spatialcv::learners::LearnerKind;
use spatialcv::metrics;
use spatialcv::seed;
use spatialcv::synth::{make_classification, FieldSpec};

fn dataset(seed: u64, n: usize) -> spatialcv::dataset::Dataset<f64> {
    make_classification(&FieldSpec {
        n,
        extent: (1.0, 1.0),
        range: 0.3,
        sill: 1.0,
        nugget: 0.05,
        n_informative: 2,
        n_noise: 1,
        intercept: -0.3,
        seed,
    })
    .unwrap()
}

#[test]
fn label_permutation_erases_signal_for_both_strategies() {
    // a single permutation keeps sampling-noise correlation of order
    // 1/sqrt(n) with the features, so the chance-level check averages
    // over several permutations
    let base = dataset(21, 150);
    let cfg = ExperimentConfig {
        k_outer: 5,
        k_inner: 3,
        repetitions: 4,
        master_seed: 5,
    };
    for setup in [CvSetup::NONSPATIAL_NONE, CvSetup::SPATIAL_NONE] {
        for learner in [LearnerKind::Glm, LearnerKind::Wknn] {
            let mut total = 0.0;
            for perm in 0..3u64 {
                let mut ds = base.clone();
                let mut rng = seed::stream(&[400, perm]);
                ds.labels.shuffle(&mut rng);
                let records = run_nested_cv(&ds, learner, setup, 0, &cfg, None).unwrap();
                let scores: Vec<(usize, Option<f64>)> =
                    records.iter().map(|r| (r.repetition, r.auroc)).collect();
                total += metrics::aggregate(&scores).unwrap().overall;
            }
            let mean = total / 3.0;
            assert!(
                (mean - 0.5).abs() < 0.06,
                "{learner} under {setup}: permuted AUROC {mean}"
            );
        }
    }
}

#[test]
fn record_counts_are_conserved_per_cell() {
    let ds = dataset(22, 90);
    let cfg = ExperimentConfig {
        k_outer: 4,
        k_inner: 2,
        repetitions: 3,
        master_seed: 9,
    };
    let records =
        run_nested_cv(&ds, LearnerKind::Rf, CvSetup::SPATIAL_SPATIAL, 2, &cfg, None).unwrap();
    assert_eq!(records.len(), 12);
    for rep in 0..3 {
        for fold in 0..4 {
            assert_eq!(
                records
                    .iter()
                    .filter(|r| r.repetition == rep && r.fold == fold)
                    .count(),
                1
            );
        }
    }
    // statuses are always recorded, even when a fold cannot be scored
    assert!(records
        .iter()
        .all(|r| matches!(r.status, FoldStatus::Ok | FoldStatus::NoAuroc | FoldStatus::FitError)));
}

#[test]
fn identical_runs_are_bitwise_identical_apart_from_timing() {
    let ds = dataset(23, 80);
    let cfg = ExperimentConfig {
        k_outer: 3,
        k_inner: 2,
        repetitions: 2,
        master_seed: 31,
    };
    let a = run_nested_cv(&ds, LearnerKind::Brt, CvSetup::SPATIAL_SPATIAL, 3, &cfg, None).unwrap();
    let b = run_nested_cv(&ds, LearnerKind::Brt, CvSetup::SPATIAL_SPATIAL, 3, &cfg, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.auroc, y.auroc);
        assert_eq!(x.chosen, y.chosen);
        assert_eq!(x.status, y.status);
        assert_eq!(x.n_test, y.n_test);
    }
}

#[test]
fn outer_partitions_are_shared_across_learners() {
    let ds = dataset(24, 70);
    let cfg = ExperimentConfig {
        k_outer: 3,
        k_inner: 2,
        repetitions: 2,
        master_seed: 8,
    };
    let glm = run_nested_cv(&ds, LearnerKind::Glm, CvSetup::SPATIAL_NONE, 0, &cfg, None).unwrap();
    let wknn = run_nested_cv(&ds, LearnerKind::Wknn, CvSetup::SPATIAL_NONE, 0, &cfg, None).unwrap();
    for (a, b) in glm.iter().zip(&wknn) {
        assert_eq!(a.n_test, b.n_test, "paired folds must have identical splits");
        assert_eq!(a.n_pos_test, b.n_pos_test);
    }
}
