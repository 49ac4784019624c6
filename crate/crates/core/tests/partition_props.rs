//! Partitioning properties beyond the unit tests: fold laws under random
//! inputs and the separation mechanism that distinguishes the strategies.

use proptest::prelude::*;
use rand::Rng;

use spatialcv::partition::{fold_split, random_kfold, spatial_kfold, PartitionSpec, Strategy};
use spatialcv::seed;
use spatialcv::synth::{sample_coordinates, FieldSpec};

fn spec(k: usize, reps: usize, strategy: Strategy, seed: u64) -> PartitionSpec {
    PartitionSpec {
        k,
        repetitions: reps,
        strategy,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_folds_are_disjoint_exhaustive_and_balanced(
        n in 4usize..200,
        k in 2usize..8,
        s in 0u64..1000,
    ) {
        prop_assume!(k <= n);
        let assignment = random_kfold(n, &spec(k, 2, Strategy::Random, s)).unwrap();
        for rep in 0..2 {
            let mut seen = vec![0usize; n];
            let mut sizes = vec![0usize; k];
            for fold in 0..k {
                let (train, test) = fold_split(&assignment, rep, fold);
                prop_assert_eq!(train.len() + test.len(), n);
                for &r in &test {
                    seen[r as usize] += 1;
                }
                sizes[fold] = test.len();
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "unbalanced: {:?}", sizes);
        }
    }

    #[test]
    fn spatial_folds_are_disjoint_exhaustive_and_nonempty(
        n in 8usize..120,
        k in 2usize..6,
        s in 0u64..500,
    ) {
        prop_assume!(k <= n);
        let mut rng = seed::stream(&[s, 999]);
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>() * 7.0, rng.random::<f64>() * 3.0])
            .collect();
        let assignment = spatial_kfold(&coords, &spec(k, 1, Strategy::SpatialKmeans, s)).unwrap();
        let mut sizes = vec![0usize; k];
        for &f in &assignment.reps[0] {
            sizes[f as usize] += 1;
        }
        prop_assert!(sizes.iter().all(|&c| c > 0), "empty fold: {:?}", sizes);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
    }
}

/// Mean distance from each test row to its nearest training row.
fn mean_nn_distance(coords: &[[f64; 2]], train: &[u32], test: &[u32]) -> f64 {
    let mut total = 0.0;
    for &t in test {
        let q = coords[t as usize];
        let mut best = f64::MAX;
        for &r in train {
            let p = coords[r as usize];
            let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            best = best.min(d2);
        }
        total += best.sqrt();
    }
    total / test.len() as f64
}

#[test]
fn spatial_folds_separate_test_rows_from_training_rows() {
    let field = FieldSpec {
        n: 300,
        extent: (1.0, 1.0),
        range: 0.3,
        sill: 1.0,
        nugget: 0.0,
        n_informative: 1,
        n_noise: 0,
        intercept: 0.0,
        seed: 31,
    };
    let coords = sample_coordinates::<f64>(&field).unwrap();
    let reps = 10;
    let random = random_kfold(coords.len(), &spec(5, reps, Strategy::Random, 8)).unwrap();
    let spatial = spatial_kfold(&coords, &spec(5, reps, Strategy::SpatialKmeans, 8)).unwrap();

    let mean_over = |assignment| -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for rep in 0..reps {
            for fold in 0..5 {
                let (train, test) = fold_split(assignment, rep, fold);
                total += mean_nn_distance(&coords, &train, &test);
                count += 1;
            }
        }
        total / f64::from(count)
    };
    let random_distance = mean_over(&random);
    let spatial_distance = mean_over(&spatial);
    assert!(
        spatial_distance > random_distance,
        "spatial folds should push test rows away from training rows \
         (spatial {spatial_distance:.4} vs random {random_distance:.4})"
    );
}
