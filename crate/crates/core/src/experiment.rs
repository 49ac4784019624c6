//! The nested cross-validation engine.
//!
//! A cell is one `(setup, learner, budget)` combination. For every
//! repetition and outer fold the runner splits the data, selects
//! hyperparameters on the outer-training rows only (per the setup's tuning
//! strategy), fits on the full outer-training set and scores AUROC on the
//! outer test set. Units of work are `(repetition, fold)` pairs executed on
//! whatever rayon pool is installed; every random draw is derived from the
//! master seed and the unit's logical coordinates, so results are identical
//! regardless of worker count or scheduling.
//!
//! Outer partitions depend only on `(master_seed, outer strategy,
//! repetition)`: learners and budgets are compared on identical splits.
//! A tuned setup at budget 0 degenerates to its untuned twin record for
//! record (timing aside), because seeds are derived from the effective
//! tuning arm.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{one_hot, quantile_sorted, Dataset, DatasetError};
use crate::learners::{self, default_setting, LearnerKind, ParamSetting};
use crate::metrics::{self, Aggregate};
use crate::num::Scalar;
use crate::partition::{self, PartitionError, PartitionSpec, Strategy};
use crate::seed::{self, tag};
use crate::tuner;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("outer partitioning failed: {0}")]
    Partition(#[from] PartitionError),
    #[error("no records for setup `{setup}`, learner `{learner}`, budget {budget}")]
    MissingCell {
        setup: String,
        learner: LearnerKind,
        budget: usize,
    },
    #[error("optimism needs both a non-spatial and a spatial arm for `{learner}` at budget {budget}")]
    MissingArm {
        learner: LearnerKind,
        budget: usize,
    },
    #[error("tuning curves need at least two budgets, found {0}")]
    InsufficientBudgets(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path} line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

/// Inner (tuning) partitioning arm of a setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TuningStrategy {
    Random,
    SpatialKmeans,
    None,
}

/// One cross-validation setup: outer estimation strategy plus tuning arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CvSetup {
    pub outer: Strategy,
    pub tuning: TuningStrategy,
}

impl CvSetup {
    pub const NONSPATIAL_NONSPATIAL: CvSetup = CvSetup {
        outer: Strategy::Random,
        tuning: TuningStrategy::Random,
    };
    pub const NONSPATIAL_NONE: CvSetup = CvSetup {
        outer: Strategy::Random,
        tuning: TuningStrategy::None,
    };
    pub const SPATIAL_NONSPATIAL: CvSetup = CvSetup {
        outer: Strategy::SpatialKmeans,
        tuning: TuningStrategy::Random,
    };
    pub const SPATIAL_SPATIAL: CvSetup = CvSetup {
        outer: Strategy::SpatialKmeans,
        tuning: TuningStrategy::SpatialKmeans,
    };
    pub const SPATIAL_NONE: CvSetup = CvSetup {
        outer: Strategy::SpatialKmeans,
        tuning: TuningStrategy::None,
    };
}

fn strategy_label(s: Strategy) -> &'static str {
    match s {
        Strategy::Random => "non-spatial",
        Strategy::SpatialKmeans => "spatial",
    }
}

impl fmt::Display for CvSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tuning = match self.tuning {
            TuningStrategy::Random => "non-spatial",
            TuningStrategy::SpatialKmeans => "spatial",
            TuningStrategy::None => "none",
        };
        write!(f, "{}/{}", strategy_label(self.outer), tuning)
    }
}

impl FromStr for CvSetup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (outer, tuning) = s
            .split_once('/')
            .ok_or_else(|| format!("setup `{s}` is not of the form outer/tuning"))?;
        let outer = match outer {
            "non-spatial" => Strategy::Random,
            "spatial" => Strategy::SpatialKmeans,
            other => return Err(format!("unknown outer strategy `{other}`")),
        };
        let tuning = match tuning {
            "non-spatial" => TuningStrategy::Random,
            "spatial" => TuningStrategy::SpatialKmeans,
            "none" => TuningStrategy::None,
            other => return Err(format!("unknown tuning strategy `{other}`")),
        };
        Ok(CvSetup { outer, tuning })
    }
}

/// Shared experiment parameters.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentConfig {
    pub k_outer: usize,
    pub k_inner: usize,
    pub repetitions: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k_outer: 5,
            k_inner: 5,
            repetitions: 100,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldStatus {
    Ok,
    /// The outer test fold lacked one class; no AUROC.
    NoAuroc,
    /// Tuning or fitting failed; the fold is recorded and skipped.
    FitError,
}

impl fmt::Display for FoldStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldStatus::Ok => "ok",
            FoldStatus::NoAuroc => "no_auroc",
            FoldStatus::FitError => "fit_error",
        })
    }
}

impl FromStr for FoldStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(FoldStatus::Ok),
            "no_auroc" => Ok(FoldStatus::NoAuroc),
            "fit_error" => Ok(FoldStatus::FitError),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// One outer fold's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub setup: CvSetup,
    pub learner: LearnerKind,
    pub budget: usize,
    pub repetition: usize,
    pub fold: usize,
    pub auroc: Option<f64>,
    pub chosen: ParamSetting,
    pub n_test: usize,
    pub n_pos_test: usize,
    pub status: FoldStatus,
    pub wall_ms: u64,
}

/// Captures the row indices handed to tuning and the outer test rows, so a
/// test can verify the two never intersect.
#[derive(Debug, Default)]
pub struct LeakProbe {
    pub events: Mutex<Vec<LeakEvent>>,
}

#[derive(Debug, Clone)]
pub struct LeakEvent {
    pub repetition: usize,
    pub fold: usize,
    pub tuning_rows: Vec<u32>,
    pub test_rows: Vec<u32>,
}

fn strategy_id(s: Strategy) -> u64 {
    match s {
        Strategy::Random => 0,
        Strategy::SpatialKmeans => 1,
    }
}

fn learner_id(kind: LearnerKind) -> u64 {
    LearnerKind::ALL.iter().position(|&k| k == kind).unwrap() as u64
}

/// Runs one `(setup, learner, budget)` cell and returns `repetitions × k`
/// records in `(repetition, fold)` order.
pub fn run_nested_cv<F: Scalar>(
    ds: &Dataset<F>,
    kind: LearnerKind,
    setup: CvSetup,
    budget: usize,
    cfg: &ExperimentConfig,
    probe: Option<&LeakProbe>,
) -> Result<Vec<FoldRecord>, ExperimentError> {
    if cfg.k_outer < 2 {
        return Err(ExperimentError::InvalidConfig(
            "k_outer must be at least 2".into(),
        ));
    }
    if cfg.repetitions == 0 {
        return Err(ExperimentError::InvalidConfig(
            "repetitions must be at least 1".into(),
        ));
    }
    if setup.tuning == TuningStrategy::None && budget != 0 {
        return Err(ExperimentError::InvalidConfig(format!(
            "setup {setup} does not tune; budget must be 0, got {budget}"
        )));
    }
    if !ds.has_both_classes() {
        return Err(ExperimentError::InvalidConfig(
            "dataset labels contain a single class".into(),
        ));
    }

    let design = one_hot(ds)?.design;

    // effective tuning arm: a tuned setup at budget 0 equals the untuned one
    let tunes = budget > 0 && kind.is_tunable() && setup.tuning != TuningStrategy::None;
    let (eff_tuning_id, eff_budget, inner_strategy) = match (tunes, setup.tuning) {
        (true, TuningStrategy::Random) => (1u64, budget, Some(Strategy::Random)),
        (true, TuningStrategy::SpatialKmeans) => (2u64, budget, Some(Strategy::SpatialKmeans)),
        _ => (0u64, 0, None),
    };

    let part_seed = seed::mix(&[cfg.master_seed, tag::OUTER_PART, strategy_id(setup.outer)]);
    let spec = PartitionSpec {
        k: cfg.k_outer,
        repetitions: cfg.repetitions,
        strategy: setup.outer,
        seed: part_seed,
    };
    let assignment = match setup.outer {
        Strategy::Random => partition::random_kfold(ds.n(), &spec)?,
        Strategy::SpatialKmeans => partition::spatial_kfold(&ds.coords, &spec)?,
    };

    let cell = [
        cfg.master_seed,
        learner_id(kind),
        strategy_id(setup.outer),
        eff_tuning_id,
        eff_budget as u64,
    ];
    let units: Vec<(usize, usize)> = (0..cfg.repetitions)
        .flat_map(|rep| (0..cfg.k_outer).map(move |fold| (rep, fold)))
        .collect();

    let records: Vec<FoldRecord> = units
        .par_iter()
        .map(|&(rep, fold)| {
            let start = Instant::now();
            let (train_rows, test_rows) = partition::fold_split(&assignment, rep, fold);
            assert!(
                train_rows.iter().all(|r| !test_rows.contains(r)),
                "train/test overlap at repetition {rep} fold {fold}"
            );
            if let Some(probe) = probe {
                probe.events.lock().unwrap().push(LeakEvent {
                    repetition: rep,
                    fold,
                    tuning_rows: train_rows.clone(),
                    test_rows: test_rows.clone(),
                });
            }

            let y_train: Vec<u8> = train_rows.iter().map(|&r| ds.labels[r as usize]).collect();
            let y_test: Vec<u8> = test_rows.iter().map(|&r| ds.labels[r as usize]).collect();
            let n_pos_test = y_test.iter().filter(|&&v| v == 1).count();
            let x_train = design.subset(&train_rows);
            let x_test = design.subset(&test_rows);

            let mut record = FoldRecord {
                setup,
                learner: kind,
                budget,
                repetition: rep,
                fold,
                auroc: None,
                chosen: default_setting(kind, design.p),
                n_test: test_rows.len(),
                n_pos_test,
                status: FoldStatus::FitError,
                wall_ms: 0,
            };

            let unit = |t: u64| {
                seed::mix(&[
                    cell[0], t, cell[1], cell[2], cell[3], cell[4], rep as u64, fold as u64,
                ])
            };
            let chosen = match inner_strategy {
                None => Some(record.chosen.clone()),
                Some(strategy) => {
                    let coords_train: Vec<[F; 2]> = train_rows
                        .iter()
                        .map(|&r| ds.coords[r as usize])
                        .collect();
                    tuner::tune(
                        kind,
                        &x_train,
                        &y_train,
                        &coords_train,
                        strategy,
                        budget,
                        cfg.k_inner,
                        unit(tag::TUNE),
                    )
                    .ok()
                    .map(|result| result.best)
                }
            };

            if let Some(chosen) = chosen {
                record.chosen = chosen;
                let fitted = learners::fit(kind, &x_train, &y_train, &record.chosen, unit(tag::FIT));
                match fitted.and_then(|model| model.predict(&x_test)) {
                    Ok(scores) => match metrics::auroc(&scores, &y_test) {
                        Ok(score) => {
                            record.auroc = score.auroc;
                            record.status = if score.auroc.is_some() {
                                FoldStatus::Ok
                            } else {
                                FoldStatus::NoAuroc
                            };
                        }
                        Err(_) => record.status = FoldStatus::FitError,
                    },
                    Err(_) => record.status = FoldStatus::FitError,
                }
            }
            record.wall_ms = start.elapsed().as_millis() as u64;
            record
        })
        .collect();

    Ok(records)
}

/// Repetition-level aggregate of one cell's records.
pub fn aggregate_cell(
    records: &[FoldRecord],
    setup: CvSetup,
    learner: LearnerKind,
    budget: usize,
) -> Result<Aggregate, ExperimentError> {
    let scores: Vec<(usize, Option<f64>)> = records
        .iter()
        .filter(|r| r.setup == setup && r.learner == learner && r.budget == budget)
        .map(|r| (r.repetition, r.auroc))
        .collect();
    if scores.is_empty() {
        return Err(ExperimentError::MissingCell {
            setup: setup.to_string(),
            learner,
            budget,
        });
    }
    metrics::aggregate(&scores).map_err(|_| ExperimentError::MissingCell {
        setup: setup.to_string(),
        learner,
        budget,
    })
}

/// Spatial-vs-non-spatial contrast for one learner and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimism {
    pub learner: LearnerKind,
    pub budget: usize,
    pub nonspatial_setup: CvSetup,
    pub spatial_setup: CvSetup,
    pub auroc_nonspatial: f64,
    pub auroc_spatial: f64,
    pub abs_diff: f64,
    pub rel_diff_pct: f64,
}

/// Compares the non-spatial estimate against its spatial equivalent,
/// preferring tuned arms when present.
pub fn optimism(
    records: &[FoldRecord],
    learner: LearnerKind,
    budget: usize,
) -> Result<Optimism, ExperimentError> {
    let pick = |outer: Strategy, prefer: TuningStrategy, fallback: TuningStrategy| {
        let tuned = CvSetup {
            outer,
            tuning: prefer,
        };
        let untuned = CvSetup {
            outer,
            tuning: fallback,
        };
        aggregate_cell(records, tuned, learner, budget)
            .map(|a| (tuned, a))
            .or_else(|_| aggregate_cell(records, untuned, learner, 0).map(|a| (untuned, a)))
    };
    let (nonspatial_setup, nonspatial) = pick(
        Strategy::Random,
        TuningStrategy::Random,
        TuningStrategy::None,
    )
    .map_err(|_| ExperimentError::MissingArm { learner, budget })?;
    let (spatial_setup, spatial) = pick(
        Strategy::SpatialKmeans,
        TuningStrategy::SpatialKmeans,
        TuningStrategy::None,
    )
    .map_err(|_| ExperimentError::MissingArm { learner, budget })?;

    let (ns, sp) = (nonspatial.overall, spatial.overall);
    Ok(Optimism {
        learner,
        budget,
        nonspatial_setup,
        spatial_setup,
        auroc_nonspatial: ns,
        auroc_spatial: sp,
        abs_diff: ns - sp,
        rel_diff_pct: (ns - sp) / ns * 100.0,
    })
}

/// One row of a tuning curve: overall mean and the spread of repetition
/// means at a budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub budget: usize,
    pub mean_auroc: f64,
    pub iqr: f64,
}

/// Mean AUROC per budget for one `(learner, setup)`, sorted by budget.
pub fn tuning_curve(
    records: &[FoldRecord],
    learner: LearnerKind,
    setup: CvSetup,
) -> Result<Vec<CurvePoint>, ExperimentError> {
    let mut budgets: Vec<usize> = records
        .iter()
        .filter(|r| r.learner == learner && r.setup == setup)
        .map(|r| r.budget)
        .collect();
    budgets.sort_unstable();
    budgets.dedup();
    if budgets.len() < 2 {
        return Err(ExperimentError::InsufficientBudgets(budgets.len()));
    }
    budgets
        .into_iter()
        .map(|budget| {
            let agg = aggregate_cell(records, setup, learner, budget)?;
            let mut means: Vec<f64> = agg.per_repetition.iter().map(|&(_, m)| m).collect();
            means.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let iqr = quantile_sorted(&means, 0.75) - quantile_sorted(&means, 0.25);
            Ok(CurvePoint {
                budget,
                mean_auroc: agg.overall,
                iqr,
            })
        })
        .collect()
}

/// Five-number summary of repetition means for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotRow {
    pub setup: CvSetup,
    pub learner: LearnerKind,
    pub budget: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Boxplot table over every `(setup, learner, budget)` cell present.
pub fn boxplot_rows(records: &[FoldRecord]) -> Vec<BoxplotRow> {
    let mut cells: Vec<(CvSetup, LearnerKind, usize)> = records
        .iter()
        .map(|r| (r.setup, r.learner, r.budget))
        .collect();
    cells.sort_unstable_by_key(|&(s, l, b)| (s.to_string(), l.to_string(), b));
    cells.dedup();
    cells
        .into_iter()
        .filter_map(|(setup, learner, budget)| {
            let agg = aggregate_cell(records, setup, learner, budget).ok()?;
            let mut means: Vec<f64> = agg.per_repetition.iter().map(|&(_, m)| m).collect();
            means.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            Some(BoxplotRow {
                setup,
                learner,
                budget,
                min: means[0],
                q1: quantile_sorted(&means, 0.25),
                median: quantile_sorted(&means, 0.5),
                q3: quantile_sorted(&means, 0.75),
                max: means[means.len() - 1],
            })
        })
        .collect()
}

/// Results and report tables on disk.
pub mod io {
    use super::*;

    /// Sorts records into the canonical order used by the result files.
    pub fn canonical_sort(records: &mut [FoldRecord]) {
        records.sort_by(|a, b| {
            (a.setup.to_string(), a.learner.to_string(), a.budget, a.repetition, a.fold).cmp(&(
                b.setup.to_string(),
                b.learner.to_string(),
                b.budget,
                b.repetition,
                b.fold,
            ))
        });
    }

    pub const RESULTS_HEADER: [&str; 11] = [
        "setup",
        "learner",
        "budget",
        "repetition",
        "fold",
        "auroc",
        "chosen_params_json",
        "n_test",
        "n_pos_test",
        "status",
        "wall_ms",
    ];

    pub fn write_results_csv(
        path: impl AsRef<Path>,
        records: &[FoldRecord],
    ) -> Result<(), ExperimentError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut sorted: Vec<FoldRecord> = records.to_vec();
        canonical_sort(&mut sorted);
        let mut writer = csv::Writer::from_path(path).map_err(|source| ExperimentError::Csv {
            path: display.clone(),
            source,
        })?;
        let wrap = |source: csv::Error| ExperimentError::Csv {
            path: display.clone(),
            source,
        };
        writer.write_record(RESULTS_HEADER).map_err(wrap)?;
        for r in &sorted {
            writer
                .write_record([
                    r.setup.to_string(),
                    r.learner.to_string(),
                    r.budget.to_string(),
                    r.repetition.to_string(),
                    r.fold.to_string(),
                    r.auroc.map(|a| a.to_string()).unwrap_or_default(),
                    r.chosen.to_json(),
                    r.n_test.to_string(),
                    r.n_pos_test.to_string(),
                    r.status.to_string(),
                    r.wall_ms.to_string(),
                ])
                .map_err(|source| ExperimentError::Csv {
                    path: display.clone(),
                    source,
                })?;
        }
        writer.flush().map_err(|source| ExperimentError::Io {
            path: display,
            source,
        })?;
        Ok(())
    }

    pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<FoldRecord>, ExperimentError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut reader =
            csv::Reader::from_path(path).map_err(|source| ExperimentError::Csv {
                path: display.clone(),
                source,
            })?;
        let header = reader
            .headers()
            .map_err(|source| ExperimentError::Csv {
                path: display.clone(),
                source,
            })?
            .clone();
        if header.iter().ne(RESULTS_HEADER) {
            return Err(ExperimentError::Malformed {
                path: display,
                line: 1,
                message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut records = Vec::new();
        for (idx, row) in reader.records().enumerate() {
            let line = idx + 2;
            let fail = |message: String| ExperimentError::Malformed {
                path: display.clone(),
                line,
                message,
            };
            let row = row.map_err(|source| ExperimentError::Csv {
                path: display.clone(),
                source,
            })?;
            if row.len() != RESULTS_HEADER.len() {
                return Err(fail(format!(
                    "expected {} fields, found {}",
                    RESULTS_HEADER.len(),
                    row.len()
                )));
            }
            let field = |i: usize| row.get(i).unwrap_or("");
            let parse_usize = |i: usize| -> Result<usize, ExperimentError> {
                field(i)
                    .parse()
                    .map_err(|_| fail(format!("`{}` is not a count", field(i))))
            };
            let auroc = match field(5) {
                "" => None,
                v => Some(
                    v.parse::<f64>()
                        .map_err(|_| fail(format!("`{v}` is not a number")))?,
                ),
            };
            records.push(FoldRecord {
                setup: field(0).parse().map_err(fail)?,
                learner: field(1).parse().map_err(fail)?,
                budget: parse_usize(2)?,
                repetition: parse_usize(3)?,
                fold: parse_usize(4)?,
                auroc,
                chosen: serde_json::from_str(field(6))
                    .map_err(|e| fail(format!("bad settings json: {e}")))?,
                n_test: parse_usize(7)?,
                n_pos_test: parse_usize(8)?,
                status: field(9).parse().map_err(fail)?,
                wall_ms: parse_usize(10)? as u64,
            });
        }
        Ok(records)
    }

    /// Summary of every cell as a JSON document.
    pub fn write_summary_json(
        path: impl AsRef<Path>,
        records: &[FoldRecord],
    ) -> Result<(), ExperimentError> {
        let path = path.as_ref();
        let mut cells: Vec<(CvSetup, LearnerKind, usize)> =
            records.iter().map(|r| (r.setup, r.learner, r.budget)).collect();
        cells.sort_unstable_by_key(|&(s, l, b)| (s.to_string(), l.to_string(), b));
        cells.dedup();
        let mut out = Vec::new();
        for (setup, learner, budget) in cells {
            if let Ok(agg) = aggregate_cell(records, setup, learner, budget) {
                out.push(serde_json::json!({
                    "setup": setup.to_string(),
                    "learner": learner.to_string(),
                    "budget": budget,
                    "mean_auroc": agg.overall,
                    "repetitions_used": agg.per_repetition.len(),
                    "missing_folds": agg.missing_folds,
                    "dropped_repetitions": agg.dropped_repetitions,
                }));
            }
        }
        let doc = serde_json::json!({ "cells": out });
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).map_err(|source| {
            ExperimentError::Io {
                path: path.display().to_string(),
                source,
            }
        })
    }

    pub fn write_tuning_curve_csv(
        path: impl AsRef<Path>,
        records: &[FoldRecord],
    ) -> Result<usize, ExperimentError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut pairs: Vec<(LearnerKind, CvSetup)> =
            records.iter().map(|r| (r.learner, r.setup)).collect();
        pairs.sort_unstable_by_key(|&(l, s)| (l.to_string(), s.to_string()));
        pairs.dedup();
        let mut writer = csv::Writer::from_path(path).map_err(|source| ExperimentError::Csv {
            path: display.clone(),
            source,
        })?;
        writer
            .write_record(["learner", "setup", "budget", "mean_auroc", "iqr"])
            .map_err(|source| ExperimentError::Csv {
                path: display.clone(),
                source,
            })?;
        let mut rows = 0;
        for (learner, setup) in pairs {
            let Ok(curve) = tuning_curve(records, learner, setup) else {
                continue;
            };
            for point in curve {
                writer
                    .write_record([
                        learner.to_string(),
                        setup.to_string(),
                        point.budget.to_string(),
                        point.mean_auroc.to_string(),
                        point.iqr.to_string(),
                    ])
                    .map_err(|source| ExperimentError::Csv {
                        path: display.clone(),
                        source,
                    })?;
                rows += 1;
            }
        }
        writer.flush().map_err(|source| ExperimentError::Io {
            path: display,
            source,
        })?;
        Ok(rows)
    }

    pub fn write_boxplot_csv(
        path: impl AsRef<Path>,
        records: &[FoldRecord],
    ) -> Result<(), ExperimentError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut writer = csv::Writer::from_path(path).map_err(|source| ExperimentError::Csv {
            path: display.clone(),
            source,
        })?;
        let wrap = |source: csv::Error| ExperimentError::Csv {
            path: display.clone(),
            source,
        };
        writer
            .write_record(["setup", "learner", "budget", "min", "q1", "median", "q3", "max"])
            .map_err(wrap)?;
        for row in boxplot_rows(records) {
            writer
                .write_record([
                    row.setup.to_string(),
                    row.learner.to_string(),
                    row.budget.to_string(),
                    row.min.to_string(),
                    row.q1.to_string(),
                    row.median.to_string(),
                    row.q3.to_string(),
                    row.max.to_string(),
                ])
                .map_err(|source| ExperimentError::Csv {
                    path: display.clone(),
                    source,
                })?;
        }
        writer.flush().map_err(|source| ExperimentError::Io {
            path: display,
            source,
        })?;
        Ok(())
    }

    pub fn write_optimism_csv(
        path: impl AsRef<Path>,
        records: &[FoldRecord],
    ) -> Result<usize, ExperimentError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut cells: Vec<(LearnerKind, usize)> = records
            .iter()
            .filter(|r| r.budget > 0 || r.setup.tuning == TuningStrategy::None)
            .map(|r| (r.learner, r.budget))
            .collect();
        cells.sort_unstable_by_key(|&(l, b)| (l.to_string(), b));
        cells.dedup();
        let mut writer = csv::Writer::from_path(path).map_err(|source| ExperimentError::Csv {
            path: display.clone(),
            source,
        })?;
        let wrap = |source: csv::Error| ExperimentError::Csv {
            path: display.clone(),
            source,
        };
        writer
            .write_record([
                "learner",
                "budget",
                "setup_nonspatial",
                "setup_spatial",
                "auroc_nonspatial",
                "auroc_spatial",
                "abs_diff",
                "rel_diff_pct",
            ])
            .map_err(wrap)?;
        let mut rows = 0;
        for (learner, budget) in cells {
            let Ok(row) = optimism(records, learner, budget) else {
                continue;
            };
            writer
                .write_record([
                    learner.to_string(),
                    budget.to_string(),
                    row.nonspatial_setup.to_string(),
                    row.spatial_setup.to_string(),
                    row.auroc_nonspatial.to_string(),
                    row.auroc_spatial.to_string(),
                    row.abs_diff.to_string(),
                    row.rel_diff_pct.to_string(),
                ])
                .map_err(|source| ExperimentError::Csv {
                    path: display.clone(),
                    source,
                })?;
            rows += 1;
        }
        writer.flush().map_err(|source| ExperimentError::Io {
            path: display,
            source,
        })?;
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_classification, FieldSpec};

    fn small_dataset() -> Dataset<f64> {
        make_classification(&FieldSpec {
            n: 60,
            extent: (1.0, 1.0),
            range: 0.3,
            sill: 1.0,
            nugget: 0.1,
            n_informative: 1,
            n_noise: 1,
            intercept: 0.0,
            seed: 5,
        })
        .unwrap()
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            k_outer: 3,
            k_inner: 2,
            repetitions: 2,
            master_seed: 11,
        }
    }

    #[test]
    fn setup_strings_round_trip() {
        for setup in [
            CvSetup::NONSPATIAL_NONSPATIAL,
            CvSetup::NONSPATIAL_NONE,
            CvSetup::SPATIAL_NONSPATIAL,
            CvSetup::SPATIAL_SPATIAL,
            CvSetup::SPATIAL_NONE,
        ] {
            assert_eq!(setup.to_string().parse::<CvSetup>().unwrap(), setup);
        }
        assert_eq!(
            CvSetup::SPATIAL_NONE.to_string(),
            "spatial/none".to_string()
        );
    }

    #[test]
    fn untuned_glm_cell_produces_full_records_with_defaults() {
        let ds = small_dataset();
        let records = run_nested_cv(
            &ds,
            LearnerKind::Glm,
            CvSetup::SPATIAL_NONE,
            0,
            &small_cfg(),
            None,
        )
        .unwrap();
        assert_eq!(records.len(), 6);
        assert!(records.iter().all(|r| r.chosen.is_empty()));
        assert!(records.iter().all(|r| r.n_test > 0));
    }

    #[test]
    fn budget_zero_equals_untuned_arm() {
        let ds = small_dataset();
        let cfg = small_cfg();
        let tuned =
            run_nested_cv(&ds, LearnerKind::Rf, CvSetup::SPATIAL_SPATIAL, 0, &cfg, None).unwrap();
        let untuned =
            run_nested_cv(&ds, LearnerKind::Rf, CvSetup::SPATIAL_NONE, 0, &cfg, None).unwrap();
        assert_eq!(tuned.len(), untuned.len());
        for (a, b) in tuned.iter().zip(&untuned) {
            assert_eq!(a.auroc, b.auroc);
            assert_eq!(a.chosen, b.chosen);
            assert_eq!(a.repetition, b.repetition);
            assert_eq!(a.fold, b.fold);
        }
    }

    #[test]
    fn worker_count_does_not_change_records() {
        let ds = small_dataset();
        let cfg = small_cfg();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                run_nested_cv(&ds, LearnerKind::Wknn, CvSetup::SPATIAL_SPATIAL, 3, &cfg, None)
                    .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.auroc, y.auroc);
            assert_eq!(x.chosen, y.chosen);
            assert_eq!(x.status, y.status);
        }
    }

    #[test]
    fn tuning_rows_never_touch_test_rows() {
        let ds = small_dataset();
        let probe = LeakProbe::default();
        run_nested_cv(
            &ds,
            LearnerKind::Wknn,
            CvSetup::SPATIAL_SPATIAL,
            2,
            &small_cfg(),
            Some(&probe),
        )
        .unwrap();
        let events = probe.events.lock().unwrap();
        assert_eq!(events.len(), 6);
        for event in events.iter() {
            for r in &event.tuning_rows {
                assert!(!event.test_rows.contains(r));
            }
        }
    }

    #[test]
    fn results_csv_round_trips() {
        let ds = small_dataset();
        let records = run_nested_cv(
            &ds,
            LearnerKind::Glm,
            CvSetup::NONSPATIAL_NONE,
            0,
            &small_cfg(),
            None,
        )
        .unwrap();
        let dir = std::env::temp_dir().join("spatialcv-exp-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("results.csv");
        io::write_results_csv(&path, &records).unwrap();
        let back = io::read_results_csv(&path).unwrap();
        let mut sorted = records.clone();
        io::canonical_sort(&mut sorted);
        assert_eq!(back, sorted);
    }

    #[test]
    fn optimism_of_identical_arms_is_zero() {
        let ds = small_dataset();
        let cfg = small_cfg();
        let mut records = run_nested_cv(
            &ds,
            LearnerKind::Glm,
            CvSetup::NONSPATIAL_NONE,
            0,
            &cfg,
            None,
        )
        .unwrap();
        // mirror the same aurocs into the spatial arm
        let mut mirrored = records.clone();
        for r in &mut mirrored {
            r.setup = CvSetup::SPATIAL_NONE;
        }
        records.extend(mirrored);
        let row = optimism(&records, LearnerKind::Glm, 0).unwrap();
        assert_eq!(row.abs_diff, 0.0);
        assert_eq!(row.rel_diff_pct, 0.0);
    }

    #[test]
    fn curve_requires_two_budgets() {
        let ds = small_dataset();
        let records = run_nested_cv(
            &ds,
            LearnerKind::Glm,
            CvSetup::SPATIAL_NONE,
            0,
            &small_cfg(),
            None,
        )
        .unwrap();
        assert!(matches!(
            tuning_curve(&records, LearnerKind::Glm, CvSetup::SPATIAL_NONE),
            Err(ExperimentError::InsufficientBudgets(1))
        ));
    }

    #[test]
    fn boxplot_quantiles_are_ordered() {
        let ds = small_dataset();
        let records = run_nested_cv(
            &ds,
            LearnerKind::Wknn,
            CvSetup::SPATIAL_NONE,
            0,
            &ExperimentConfig {
                repetitions: 4,
                ..small_cfg()
            },
            None,
        )
        .unwrap();
        for row in boxplot_rows(&records) {
            assert!(row.min <= row.q1);
            assert!(row.q1 <= row.median);
            assert!(row.median <= row.q3);
            assert!(row.q3 <= row.max);
        }
    }

    #[test]
    fn none_tuning_with_budget_is_rejected() {
        let ds = small_dataset();
        assert!(matches!(
            run_nested_cv(&ds, LearnerKind::Rf, CvSetup::SPATIAL_NONE, 5, &small_cfg(), None),
            Err(ExperimentError::InvalidConfig(_))
        ));
    }
}
