//! Repeated k-fold assignments: uniform random or spatially disjoint.
//!
//! The spatial strategy clusters raw planar coordinates with k-means
//! (k-means++ initialization, Lloyd iterations, squared Euclidean distance)
//! and uses final cluster membership as the fold index. Each repetition is
//! an independent re-partitioning with its own derived seed, so repetitions
//! are parallelizable and reproducible in isolation.

use rand::Rng;
use thiserror::Error;

use crate::num::Scalar;
use crate::seed::{self, tag};

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("k = {k} folds exceed n = {n} rows")]
    KExceedsN { k: usize, n: usize },
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("coordinate at row {0} is not finite")]
    NonFiniteCoord(usize),
    #[error(
        "only {distinct} distinct coordinates for k = {k} clusters ({duplicates} duplicate rows)"
    )]
    DuplicateDegeneracy {
        distinct: usize,
        k: usize,
        duplicates: usize,
    },
    #[error("k-means produced an empty cluster in {0} consecutive attempts")]
    EmptyClusters(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    SpatialKmeans,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub k: usize,
    pub repetitions: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl PartitionSpec {
    fn validate(&self, n: usize) -> Result<(), PartitionError> {
        if self.k < 2 {
            return Err(PartitionError::KTooSmall(self.k));
        }
        if self.k > n {
            return Err(PartitionError::KExceedsN { k: self.k, n });
        }
        if self.repetitions == 0 {
            return Err(PartitionError::NoRepetitions);
        }
        Ok(())
    }
}

/// Per-repetition fold indices; every fold in `0..k` occurs at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub k: usize,
    /// `reps[r][row]` is the fold index of `row` in repetition `r`.
    pub reps: Vec<Vec<u32>>,
    /// Final cluster centroids per repetition (spatial strategy only).
    pub centroids: Option<Vec<Vec<[f64; 2]>>>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.reps[0].len()
    }
}

/// Balanced random folds: per repetition, fold sizes differ by at most one
/// and positions are a uniformly random permutation.
pub fn random_kfold(n: usize, spec: &PartitionSpec) -> Result<FoldAssignment, PartitionError> {
    spec.validate(n)?;
    let mut reps = Vec::with_capacity(spec.repetitions);
    for rep in 0..spec.repetitions {
        let mut assign: Vec<u32> = Vec::with_capacity(n);
        let base = n / spec.k;
        let extra = n % spec.k;
        for fold in 0..spec.k {
            let size = base + usize::from(fold < extra);
            assign.extend(std::iter::repeat(fold as u32).take(size));
        }
        let mut rng = seed::stream(&[spec.seed, tag::RANDOM_FOLD, rep as u64]);
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            assign.swap(i, j);
        }
        reps.push(assign);
    }
    Ok(FoldAssignment {
        k: spec.k,
        reps,
        centroids: None,
    })
}

/// Spatially disjoint folds from k-means cluster membership.
///
/// Per repetition the best of ten k-means++ starts (by within-cluster sum of
/// squares) is kept; runs that converge with an empty cluster are discarded
/// and count against the attempt budget. Ties in point assignment go to the
/// lowest centroid index. Folds may be unbalanced.
pub fn spatial_kfold<F: Scalar>(
    coords: &[[F; 2]],
    spec: &PartitionSpec,
) -> Result<FoldAssignment, PartitionError> {
    let n = coords.len();
    spec.validate(n)?;
    for (i, c) in coords.iter().enumerate() {
        if !(c[0].is_finite() && c[1].is_finite()) {
            return Err(PartitionError::NonFiniteCoord(i));
        }
    }
    let pts: Vec<[f64; 2]> = coords.iter().map(|c| [c[0].f64(), c[1].f64()]).collect();

    let mut distinct: Vec<[f64; 2]> = pts.clone();
    distinct.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < spec.k {
        return Err(PartitionError::DuplicateDegeneracy {
            distinct: distinct.len(),
            k: spec.k,
            duplicates: n - distinct.len(),
        });
    }

    let extent = {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &pts {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        (xmax - xmin).max(ymax - ymin)
    };
    let move_tol = 1e-9 * extent;

    const ATTEMPTS: usize = 10;
    let mut reps = Vec::with_capacity(spec.repetitions);
    let mut centroids_out = Vec::with_capacity(spec.repetitions);
    for rep in 0..spec.repetitions {
        let mut best: Option<(f64, Vec<u32>, Vec<[f64; 2]>)> = None;
        let mut empty_runs = 0;
        for attempt in 0..ATTEMPTS {
            let mut rng = seed::stream(&[spec.seed, tag::KMEANS, rep as u64, attempt as u64]);
            let init = kmeanspp_init(&pts, spec.k, &mut rng);
            let (assign, centroids) = lloyd(&pts, init, move_tol);
            let mut sizes = vec![0usize; spec.k];
            for &a in &assign {
                sizes[a as usize] += 1;
            }
            if sizes.iter().any(|&s| s == 0) {
                empty_runs += 1;
                continue;
            }
            let wcss = wcss(&pts, &assign, &centroids);
            if best.as_ref().map_or(true, |(w, _, _)| wcss < *w) {
                best = Some((wcss, assign, centroids));
            }
        }
        match best {
            Some((_, assign, centroids)) => {
                reps.push(assign);
                centroids_out.push(centroids);
            }
            None => return Err(PartitionError::EmptyClusters(empty_runs)),
        }
    }
    Ok(FoldAssignment {
        k: spec.k,
        reps,
        centroids: Some(centroids_out),
    })
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn kmeanspp_init(pts: &[[f64; 2]], k: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let n = pts.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(pts[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = pts.iter().map(|&p| sq_dist(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            pts[chosen]
        } else {
            // all remaining mass on chosen points; take first unchosen distinct point
            *pts
                .iter()
                .find(|&&p| centroids.iter().all(|&c| p != c))
                .expect("distinct count checked >= k")
        };
        centroids.push(next);
        for (i, &p) in pts.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, next));
        }
    }
    centroids
}

/// Lloyd iterations until centroid movement falls below `move_tol` or 100
/// iterations. The returned assignment is recomputed against the final
/// centroids, so every point is at least as close to its own centroid as to
/// any other.
fn lloyd(
    pts: &[[f64; 2]],
    mut centroids: Vec<[f64; 2]>,
    move_tol: f64,
) -> (Vec<u32>, Vec<[f64; 2]>) {
    let k = centroids.len();
    let mut assign = vec![0u32; pts.len()];
    for _ in 0..100 {
        assign_nearest(pts, &centroids, &mut assign);
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in pts.iter().zip(&assign) {
            sums[a as usize][0] += p[0];
            sums[a as usize][1] += p[1];
            counts[a as usize] += 1;
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // keep empty centroid in place
            }
            let next = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            moved = moved.max(sq_dist(centroids[c], next).sqrt());
            centroids[c] = next;
        }
        if moved < move_tol {
            break;
        }
    }
    assign_nearest(pts, &centroids, &mut assign);
    (assign, centroids)
}

fn assign_nearest(pts: &[[f64; 2]], centroids: &[[f64; 2]], assign: &mut [u32]) {
    for (i, &p) in pts.iter().enumerate() {
        let mut best = 0u32;
        let mut best_d = sq_dist(p, centroids[0]);
        for (c, &centroid) in centroids.iter().enumerate().skip(1) {
            let d = sq_dist(p, centroid);
            if d < best_d {
                best_d = d;
                best = c as u32;
            }
        }
        assign[i] = best;
    }
}

fn wcss(pts: &[[f64; 2]], assign: &[u32], centroids: &[[f64; 2]]) -> f64 {
    pts.iter()
        .zip(assign)
        .map(|(&p, &a)| sq_dist(p, centroids[a as usize]))
        .sum()
}

/// Train/test row indices for one `(repetition, fold)` pair.
///
/// Test rows carry the fold index; train rows are all others. Panics on an
/// out-of-range repetition or fold.
pub fn fold_split(assign: &FoldAssignment, rep: usize, fold: usize) -> (Vec<u32>, Vec<u32>) {
    assert!(rep < assign.reps.len(), "repetition {rep} out of range");
    assert!(fold < assign.k, "fold {fold} out of range");
    let folds = &assign.reps[rep];
    let mut train = Vec::with_capacity(folds.len());
    let mut test = Vec::new();
    for (row, &f) in folds.iter().enumerate() {
        if f as usize == fold {
            test.push(row as u32);
        } else {
            train.push(row as u32);
        }
    }
    (train, test)
}
