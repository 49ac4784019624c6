//! Rank-sum AUROC against a brute-force pairwise oracle, plus symmetry
//! properties.

use proptest::prelude::*;
use rand::Rng;

use spatialcv::metrics::auroc;
use spatialcv::seed;

/// O(n²) pair counting: 1 per correctly ordered (positive, negative) pair,
/// ½ per tie.
fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn random_instance(rng: &mut impl Rng, force_ties: bool) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=50);
    let scores: Vec<f64> = (0..n)
        .map(|_| {
            if force_ties {
                // few distinct values guarantee tied scores
                (rng.random_range(0..5) as f64) / 4.0
            } else {
                rng.random()
            }
        })
        .collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
    (scores, labels)
}

#[test]
fn rank_sum_equals_pairwise_oracle_on_200_instances() {
    let start = std::time::Instant::now();
    let mut rng = seed::stream(&[2024]);
    let mut tied_instances = 0;
    for case in 0..200 {
        let force_ties = case % 2 == 0;
        let (scores, labels) = random_instance(&mut rng, force_ties);
        let has_tie = {
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.windows(2).any(|w| w[0] == w[1])
        };
        tied_instances += usize::from(has_tie);
        let fast = auroc(&scores, &labels).unwrap().auroc;
        let slow = pairwise_auroc(&scores, &labels);
        match (fast, slow) {
            (None, None) => {}
            (Some(f), Some(s)) => {
                assert!((f - s).abs() < 1e-12, "case {case}: {f} vs {s}")
            }
            other => panic!("case {case}: disagreement {other:?}"),
        }
    }
    assert!(tied_instances >= 50, "only {tied_instances} tied instances");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negating_scores_complements_auroc(
        scores in prop::collection::vec(-1e3f64..1e3, 2..40),
        labels in prop::collection::vec(0u8..2, 2..40),
    ) {
        let n = scores.len().min(labels.len());
        let (scores, labels) = (&scores[..n], &labels[..n]);
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        if let (Some(a), Some(b)) = (
            auroc(scores, labels).unwrap().auroc,
            auroc(&negated, labels).unwrap().auroc,
        ) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_transforms_leave_auroc_unchanged(
        scores in prop::collection::vec(-10f64..10.0, 2..40),
        labels in prop::collection::vec(0u8..2, 2..40),
    ) {
        let n = scores.len().min(labels.len());
        let (scores, labels) = (&scores[..n], &labels[..n]);
        let squashed: Vec<f64> = scores.iter().map(|s| s.exp() / (1.0 + s.exp())).collect();
        if let (Some(a), Some(b)) = (
            auroc(scores, labels).unwrap().auroc,
            auroc(&squashed, labels).unwrap().auroc,
        ) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn swapping_classes_complements_auroc(
        scores in prop::collection::vec(-1e3f64..1e3, 2..40),
        labels in prop::collection::vec(0u8..2, 2..40),
    ) {
        let n = scores.len().min(labels.len());
        let (scores, labels) = (&scores[..n], &labels[..n]);
        let flipped: Vec<u8> = labels.iter().map(|&y| 1 - y).collect();
        if let (Some(a), Some(b)) = (
            auroc(scores, labels).unwrap().auroc,
            auroc(scores, &flipped).unwrap().auroc,
        ) {
            prop_assert!((a - (1.0 - b)).abs() < 1e-12);
        }
    }
}
