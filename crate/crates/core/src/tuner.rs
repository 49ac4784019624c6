//! Random-search hyperparameter tuning evaluated by inner cross-validation.
//!
//! Settings are sampled uniformly from per-learner spaces (integers and
//! reals uniform, powers of two uniform in the exponent, categoricals
//! uniform). Each sampled setting is fitted on every inner-training split
//! and scored by AUROC on the inner-test split; the winner maximizes the
//! mean over non-missing folds, with ties going to the earliest sample.

use thiserror::Error;

use crate::dataset::DesignMatrix;
use crate::learners::{
    self, default_setting, LearnerKind, ParamSetting, ParamValue,
};
use crate::metrics;
use crate::num::Scalar;
use crate::partition::{self, PartitionError, PartitionSpec, Strategy};
use crate::seed::{self, tag};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("glm has no hyperparameters to tune")]
    NoHyperparameters,
    #[error("training subset has a single class")]
    SingleClassTraining,
    #[error("rows ({rows}) and coordinate count ({coords}) differ")]
    CoordMismatch { rows: usize, coords: usize },
    #[error("inner partitioning failed: {0}")]
    Partition(#[from] PartitionError),
    #[error(
        "every trial lacked a scorable inner fold; use fewer or larger folds \
         so each inner test set contains both classes"
    )]
    NoScorableFolds,
}

/// Bounds or levels of one tunable hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    /// Uniform integer on `[lo, hi]`.
    Int { lo: i64, hi: i64 },
    /// Uniform real on `(lo, hi]`.
    Real { lo: f64, hi: f64 },
    /// `2^e` with `e` uniform on `[lo_exp, hi_exp]`.
    Log2Real { lo_exp: f64, hi_exp: f64 },
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
}

/// A learner's tunable hyperparameter domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub params: Vec<ParamDef>,
}

/// The published search spaces used by the bundled experiments.
pub fn table1_space(kind: LearnerKind) -> Result<ParamSpace, TuneError> {
    let def = |name: &str, kind: ParamKind| ParamDef {
        name: name.to_string(),
        kind,
    };
    let params = match kind {
        LearnerKind::Glm => return Err(TuneError::NoHyperparameters),
        LearnerKind::Brt => vec![
            def("n_tree", ParamKind::Int { lo: 100, hi: 10_000 }),
            // zero learning rate is degenerate; the lower bound is nudged
            def(
                "shrinkage",
                ParamKind::Real {
                    lo: 1e-4,
                    hi: 1.5,
                },
            ),
            def("interaction_depth", ParamKind::Int { lo: 1, hi: 40 }),
        ],
        LearnerKind::Rf => vec![
            def("mtry", ParamKind::Int { lo: 1, hi: 11 }),
            def("num_trees", ParamKind::Int { lo: 10, hi: 10_000 }),
        ],
        LearnerKind::Svm => vec![
            def(
                "c",
                ParamKind::Log2Real {
                    lo_exp: -12.0,
                    hi_exp: 15.0,
                },
            ),
            def(
                "sigma",
                ParamKind::Log2Real {
                    lo_exp: -15.0,
                    hi_exp: 6.0,
                },
            ),
        ],
        LearnerKind::Wknn => vec![
            def("k", ParamKind::Int { lo: 10, hi: 400 }),
            def("distance", ParamKind::Int { lo: 1, hi: 100 }),
            def(
                "kernel",
                ParamKind::Categorical {
                    levels: [
                        "rectangular",
                        "triangular",
                        "epanechnikov",
                        "biweight",
                        "triweight",
                        "cos",
                        "inv",
                        "gaussian",
                        "optimal",
                    ]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                },
            ),
        ],
    };
    Ok(ParamSpace { params })
}

/// Samples `budget` settings independently; duplicates are permitted and
/// trial `i` draws from a stream derived from `(seed, i)`.
pub fn sample_random(space: &ParamSpace, budget: usize, seed: u64) -> Vec<ParamSetting> {
    use rand::Rng;
    (0..budget)
        .map(|trial| {
            let mut rng = seed::stream(&[seed, tag::TRIAL, trial as u64]);
            let mut setting = ParamSetting::empty();
            for p in &space.params {
                let value = match &p.kind {
                    ParamKind::Int { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
                    ParamKind::Real { lo, hi } => {
                        // hi − u·(hi − lo) with u ∈ [0, 1) covers (lo, hi]
                        ParamValue::Real(hi - rng.random::<f64>() * (hi - lo))
                    }
                    ParamKind::Log2Real { lo_exp, hi_exp } => {
                        let e = lo_exp + rng.random::<f64>() * (hi_exp - lo_exp);
                        ParamValue::Real(e.exp2())
                    }
                    ParamKind::Categorical { levels } => {
                        ParamValue::Cat(levels[rng.random_range(0..levels.len())].clone())
                    }
                };
                setting.0.insert(p.name.clone(), value);
            }
            setting
        })
        .collect()
}

/// One evaluated setting.
#[derive(Debug, Clone)]
pub struct Trial {
    pub setting: ParamSetting,
    /// Mean AUROC over scorable inner folds; `None` when no fold scored.
    pub mean_auroc: Option<f64>,
    pub fold_aurocs: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: ParamSetting,
    pub trials: Vec<Trial>,
    pub budget: usize,
}

/// Selects a hyperparameter setting for the given training subset.
///
/// Builds one inner fold assignment (single repetition) with the requested
/// strategy, evaluates every sampled setting on each inner split and keeps
/// the best mean. Budget 0 — and GLM at any budget — short-circuits to the
/// defaults with no trials.
pub fn tune<F: Scalar>(
    kind: LearnerKind,
    x: &DesignMatrix<F>,
    y: &[u8],
    coords: &[[F; 2]],
    inner_strategy: Strategy,
    budget: usize,
    k_inner: usize,
    seed: u64,
) -> Result<TuneResult, TuneError> {
    let n = x.n;
    if coords.len() != n {
        return Err(TuneError::CoordMismatch {
            rows: n,
            coords: coords.len(),
        });
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(TuneError::SingleClassTraining);
    }
    if budget == 0 || kind == LearnerKind::Glm {
        return Ok(TuneResult {
            best: default_setting(kind, x.p),
            trials: Vec::new(),
            budget: 0,
        });
    }

    let space = table1_space(kind)?;
    let settings = sample_random(&space, budget, seed);

    let spec = PartitionSpec {
        k: k_inner,
        repetitions: 1,
        strategy: inner_strategy,
        seed: seed::mix(&[seed, tag::INNER_PART]),
    };
    let assignment = match inner_strategy {
        Strategy::Random => partition::random_kfold(n, &spec)?,
        Strategy::SpatialKmeans => partition::spatial_kfold(coords, &spec)?,
    };

    let mut fold_scores: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(k_inner); budget];
    for fold in 0..k_inner {
        let (train_rows, test_rows) = partition::fold_split(&assignment, 0, fold);
        let y_train: Vec<u8> = train_rows.iter().map(|&r| y[r as usize]).collect();
        let y_test: Vec<u8> = test_rows.iter().map(|&r| y[r as usize]).collect();
        let train_has_both = y_train.iter().any(|&v| v == 0) && y_train.iter().any(|&v| v == 1);
        if !train_has_both {
            for scores in fold_scores.iter_mut() {
                scores.push(None);
            }
            continue;
        }
        let x_train = x.subset(&train_rows);
        let x_test = x.subset(&test_rows);
        let fit_seed = seed::mix(&[seed, tag::INNER_FIT, fold as u64]);
        let evaluated =
            learners::evaluate_settings(kind, &x_train, &y_train, &x_test, &settings, fit_seed);
        for (scores, outcome) in fold_scores.iter_mut().zip(evaluated) {
            let auroc = outcome
                .ok()
                .and_then(|s| metrics::auroc(&s, &y_test).ok())
                .and_then(|f| f.auroc);
            scores.push(auroc);
        }
    }

    let trials: Vec<Trial> = settings
        .into_iter()
        .zip(fold_scores)
        .map(|(setting, fold_aurocs)| {
            let scored: Vec<f64> = fold_aurocs.iter().flatten().copied().collect();
            let mean_auroc = if scored.is_empty() {
                None
            } else {
                Some(scored.iter().sum::<f64>() / scored.len() as f64)
            };
            Trial {
                setting,
                mean_auroc,
                fold_aurocs,
            }
        })
        .collect();

    // argmax by mean; earliest sample wins ties
    let mut best_idx: Option<usize> = None;
    for (i, trial) in trials.iter().enumerate() {
        let Some(mean) = trial.mean_auroc else {
            continue;
        };
        let better = match best_idx {
            None => true,
            Some(b) => mean > trials[b].mean_auroc.unwrap(),
        };
        if better {
            best_idx = Some(i);
        }
    }
    let Some(best_idx) = best_idx else {
        return Err(TuneError::NoScorableFolds);
    };

    Ok(TuneResult {
        best: trials[best_idx].setting.clone(),
        trials,
        budget,
    })
}
