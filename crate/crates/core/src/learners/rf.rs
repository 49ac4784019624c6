//! Random forest of CART classification trees.
//!
//! Each tree draws `n` bootstrap rows with replacement and grows to purity
//! with per-node feature subsampling. The forest probability is the fraction
//! of tree votes for the positive class. Tree `t` consumes a stream derived
//! from `(seed, t)` only, so forests with the same seed share their first
//! trees regardless of `num_trees` — the tuner exploits this to evaluate
//! many `num_trees` values against one grown sequence.

use rand::Rng;

use crate::dataset::DesignMatrix;
use crate::num::Scalar;
use crate::seed::{self, tag};

use super::cart::{grow_tree, CartScratch, CartTree, SortedColumns};
use super::{FitWarning, LearnerError, LearnerKind, ParamSetting};

#[derive(Debug)]
pub struct RfModel<F: Scalar> {
    pub trees: Vec<CartTree<F>>,
    p: usize,
    pub column_labels: Vec<String>,
    pub warnings: Vec<FitWarning>,
}

struct RfParams {
    mtry: usize,
    num_trees: usize,
    clamp_warning: Option<FitWarning>,
}

fn parse_params(setting: &ParamSetting, p: usize) -> Result<RfParams, LearnerError> {
    const KIND: LearnerKind = LearnerKind::Rf;
    let mtry_requested = setting.get_int(KIND, "mtry")?;
    let num_trees = setting.get_int(KIND, "num_trees")?;
    if num_trees < 1 {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "num_trees",
            message: format!("must be positive, got {num_trees}"),
        });
    }
    if mtry_requested < 1 {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "mtry",
            message: format!("must be positive, got {mtry_requested}"),
        });
    }
    let (mtry, clamp_warning) = if mtry_requested as usize > p {
        (
            p,
            Some(FitWarning::ClampedMtry {
                requested: mtry_requested,
                used: p,
            }),
        )
    } else {
        (mtry_requested as usize, None)
    };
    Ok(RfParams {
        mtry,
        num_trees: num_trees as usize,
        clamp_warning,
    })
}

fn bootstrap_weights(n: usize, rng: &mut impl Rng, out: &mut Vec<u32>) {
    out.clear();
    out.resize(n, 0);
    for _ in 0..n {
        out[rng.random_range(0..n)] += 1;
    }
}

pub(super) fn fit_rf<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
    seed: u64,
) -> Result<RfModel<F>, LearnerError> {
    fit_rf_with_options(x, y, setting, seed, true)
}

/// `bootstrap: false` trains every tree on the full sample with unit
/// weights, which pins the forest to plain CART for testing.
pub fn fit_rf_with_options<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
    seed: u64,
    bootstrap: bool,
) -> Result<RfModel<F>, LearnerError> {
    if x.n == 0 {
        return Err(LearnerError::TooFewRows(0));
    }
    let params = parse_params(setting, x.p)?;
    let sorted = SortedColumns::build(x);
    let mut scratch = CartScratch::new(x.n, x.p);
    let mut weights: Vec<u32> = Vec::with_capacity(x.n);
    let mut trees = Vec::with_capacity(params.num_trees);
    for t in 0..params.num_trees {
        let mut rng = seed::stream(&[seed, tag::TREE, t as u64]);
        if bootstrap {
            bootstrap_weights(x.n, &mut rng, &mut weights);
        } else {
            weights.clear();
            weights.resize(x.n, 1);
        }
        trees.push(grow_tree(x, y, &weights, &sorted, params.mtry, &mut rng, &mut scratch));
    }
    Ok(RfModel {
        trees,
        p: x.p,
        column_labels: x.column_labels.clone(),
        warnings: params.clamp_warning.into_iter().collect(),
    })
}

impl<F: Scalar> RfModel<F> {
    pub fn predict(&self, x: &DesignMatrix<F>) -> Result<Vec<F>, LearnerError> {
        if x.p != self.p {
            return Err(LearnerError::SchemaMismatch {
                expected: self.p,
                got: x.p,
            });
        }
        let total = self.trees.len() as f64;
        Ok((0..x.n)
            .map(|i| {
                let row = x.row(i);
                let votes: u32 = self.trees.iter().map(|t| u32::from(t.predict_row(row))).sum();
                F::of(f64::from(votes) / total)
            })
            .collect())
    }
}

/// Scores many settings on one split, growing each distinct `mtry` stream
/// once up to its largest requested `num_trees`. Bitwise identical to
/// fitting every setting separately with the same seed.
pub(super) fn evaluate_rf_settings<F: Scalar>(
    x_train: &DesignMatrix<F>,
    y_train: &[u8],
    x_test: &DesignMatrix<F>,
    settings: &[ParamSetting],
    seed: u64,
) -> Vec<Result<Vec<F>, LearnerError>> {
    let mut results: Vec<Result<Vec<F>, LearnerError>> = Vec::with_capacity(settings.len());
    let mut groups: Vec<(usize, Vec<(usize, usize)>)> = Vec::new(); // mtry -> [(slot, trees)]
    for (slot, setting) in settings.iter().enumerate() {
        match parse_params(setting, x_train.p) {
            Ok(params) => {
                results.push(Ok(Vec::new()));
                match groups.iter_mut().find(|(mtry, _)| *mtry == params.mtry) {
                    Some((_, members)) => members.push((slot, params.num_trees)),
                    None => groups.push((params.mtry, vec![(slot, params.num_trees)])),
                }
            }
            Err(e) => results.push(Err(e)),
        }
    }
    if x_train.n == 0 {
        for r in &mut results {
            if r.is_ok() {
                *r = Err(LearnerError::TooFewRows(0));
            }
        }
        return results;
    }
    if x_test.p != x_train.p {
        for r in &mut results {
            if r.is_ok() {
                *r = Err(LearnerError::SchemaMismatch {
                    expected: x_train.p,
                    got: x_test.p,
                });
            }
        }
        return results;
    }

    let sorted = SortedColumns::build(x_train);
    let mut scratch = CartScratch::new(x_train.n, x_train.p);
    let mut weights: Vec<u32> = Vec::with_capacity(x_train.n);
    for (mtry, mut members) in groups {
        members.sort_unstable_by_key(|&(slot, trees)| (trees, slot));
        let max_trees = members.last().map_or(0, |&(_, t)| t);
        let mut votes = vec![0u32; x_test.n];
        let mut next = 0usize;
        for t in 0..max_trees {
            let mut rng = seed::stream(&[seed, tag::TREE, t as u64]);
            bootstrap_weights(x_train.n, &mut rng, &mut weights);
            let tree = grow_tree(x_train, y_train, &weights, &sorted, mtry, &mut rng, &mut scratch);
            for (v, i) in votes.iter_mut().zip(0..x_test.n) {
                *v += u32::from(tree.predict_row(x_test.row(i)));
            }
            while next < members.len() && members[next].1 == t + 1 {
                let (slot, trees) = members[next];
                results[slot] = Ok(votes
                    .iter()
                    .map(|&v| F::of(f64::from(v) / trees as f64))
                    .collect());
                next += 1;
            }
        }
    }
    results
}
