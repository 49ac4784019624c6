//! Command implementations behind the `spatialcv` binary.
//!
//! Each command is an ordinary function so integration tests can drive them
//! in-process. All randomness flows from explicit seeds; reruns with the
//! same inputs produce identical files (timing columns aside).

pub mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use spatialcv::dataset::{self, Dataset};
use spatialcv::experiment::{
    self, io as exio, CvSetup, ExperimentConfig, FoldRecord, TuningStrategy,
};
use spatialcv::learners::LearnerKind;
use spatialcv::partition::{self, PartitionSpec, Strategy};
use spatialcv::synth::{make_classification, FieldSpec};
use spatialcv::Real;

pub use config::{parse_run_config, parse_run_config_str, DataSource, RunConfig};

/// Outcome of `synth`: where files went and what was generated.
#[derive(Debug)]
pub struct SynthReport {
    pub csv_path: PathBuf,
    pub schema_path: PathBuf,
    pub n: usize,
    pub prevalence: f64,
}

/// Generates a synthetic dataset and writes the CSV plus schema sidecar.
pub fn cmd_synth(spec: &FieldSpec, out: &Path) -> Result<SynthReport> {
    let ds: Dataset<Real> = make_classification(spec).context("generation failed")?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
        }
    }
    let schema_path = out.with_extension("schema");
    dataset::write_csv(out, &ds)?;
    dataset::write_schema(&schema_path, &ds.schema)?;
    let (_, pos) = ds.label_counts();
    Ok(SynthReport {
        csv_path: out.to_path_buf(),
        schema_path,
        n: ds.n(),
        prevalence: pos as f64 / ds.n() as f64,
    })
}

#[derive(Debug)]
pub struct PartitionArgs {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub strategy: Strategy,
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct PartitionReport {
    pub folds_path: PathBuf,
    pub centroids_path: Option<PathBuf>,
    pub n: usize,
}

/// Writes `row_id,repetition,fold` (plus centroids for the spatial
/// strategy) for a dataset on disk.
pub fn cmd_partition(args: &PartitionArgs) -> Result<PartitionReport> {
    let schema = dataset::parse_schema(&args.schema)?;
    let loaded = dataset::load_csv::<Real>(&args.data, &schema)?;
    let ds = loaded.dataset;
    if loaded.dropped_rows > 0 {
        eprintln!("dropped {} row(s) with missing cells", loaded.dropped_rows);
    }
    let spec = PartitionSpec {
        k: args.k,
        repetitions: args.repetitions,
        strategy: args.strategy,
        seed: args.seed,
    };
    let assignment = match args.strategy {
        Strategy::Random => partition::random_kfold(ds.n(), &spec)?,
        Strategy::SpatialKmeans => partition::spatial_kfold(&ds.coords, &spec)?,
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let folds_path = args.out_dir.join("folds.csv");
    let mut text = String::from("row_id,repetition,fold\n");
    for (rep, folds) in assignment.reps.iter().enumerate() {
        for (row, fold) in folds.iter().enumerate() {
            text.push_str(&format!("{row},{rep},{fold}\n"));
        }
    }
    std::fs::write(&folds_path, text)
        .with_context(|| format!("cannot write {}", folds_path.display()))?;

    let centroids_path = match &assignment.centroids {
        None => None,
        Some(centroids) => {
            let path = args.out_dir.join("centroids.csv");
            let mut text = String::from("repetition,fold,centroid_x,centroid_y\n");
            for (rep, per_rep) in centroids.iter().enumerate() {
                for (fold, c) in per_rep.iter().enumerate() {
                    text.push_str(&format!("{rep},{fold},{},{}\n", c[0], c[1]));
                }
            }
            std::fs::write(&path, text)
                .with_context(|| format!("cannot write {}", path.display()))?;
            Some(path)
        }
    };
    Ok(PartitionReport {
        folds_path,
        centroids_path,
        n: ds.n(),
    })
}

#[derive(Debug)]
pub struct RunReport {
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
    pub curve_path: PathBuf,
    pub records: Vec<FoldRecord>,
    /// Cells with zero successful folds; a nonzero exit when non-empty.
    pub failed_cells: Vec<String>,
}

fn load_source(source: &DataSource) -> Result<Dataset<Real>> {
    match source {
        DataSource::Synth(spec) => Ok(make_classification(spec)?),
        DataSource::Dataset { data, schema } => {
            let schema = dataset::parse_schema(schema)?;
            let loaded = dataset::load_csv(data, &schema)?;
            if loaded.dropped_rows > 0 {
                eprintln!("dropped {} row(s) with missing cells", loaded.dropped_rows);
            }
            Ok(loaded.dataset)
        }
    }
}

/// Executes every `(setup, learner, budget)` cell of a run configuration on
/// a worker pool of the given size (0 = all cores) and writes the results
/// CSV, the summary JSON and the tuning-curve CSV.
///
/// Cells that are equivalent by construction — tuning disabled, budget 0,
/// or GLM, all of which collapse to the untuned arm — are computed once and
/// emitted under each requested label.
pub fn cmd_run(cfg: &RunConfig, jobs: usize) -> Result<RunReport> {
    let ds = load_source(&cfg.source)?;
    let exp_cfg = ExperimentConfig {
        k_outer: cfg.k_outer,
        k_inner: cfg.k_inner,
        repetitions: cfg.repetitions,
        master_seed: cfg.master_seed,
    };

    // requested cells; untuned setups ignore the budget axis
    let mut cells: Vec<(CvSetup, LearnerKind, usize)> = Vec::new();
    for &setup in &cfg.setups {
        for &learner in &cfg.learners {
            if setup.tuning == TuningStrategy::None {
                cells.push((setup, learner, 0));
            } else {
                for &budget in &cfg.budgets {
                    cells.push((setup, learner, budget));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot build worker pool")?;

    type EffKey = (LearnerKind, Strategy, TuningStrategy, usize);
    let mut computed: HashMap<EffKey, Vec<FoldRecord>> = HashMap::new();
    let mut records: Vec<FoldRecord> = Vec::new();
    for &(setup, learner, budget) in &cells {
        let tunes =
            budget > 0 && learner.is_tunable() && setup.tuning != TuningStrategy::None;
        let key: EffKey = if tunes {
            (learner, setup.outer, setup.tuning, budget)
        } else {
            (learner, setup.outer, TuningStrategy::None, 0)
        };
        if !computed.contains_key(&key) {
            let canonical = CvSetup {
                outer: key.1,
                tuning: key.2,
            };
            eprintln!("running {learner} {canonical} budget={}", key.3);
            let cell_records = pool.install(|| {
                experiment::run_nested_cv(&ds, learner, canonical, key.3, &exp_cfg, None)
            })?;
            computed.insert(key, cell_records);
        }
        let relabeled = computed[&key].iter().map(|r| {
            let mut r = r.clone();
            r.setup = setup;
            r.budget = budget;
            r
        });
        records.extend(relabeled);
    }

    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let results_path = cfg.out_dir.join("results.csv");
    let summary_path = cfg.out_dir.join("summary.json");
    let curve_path = cfg.out_dir.join("tuning_curve.csv");
    exio::write_results_csv(&results_path, &records)?;
    exio::write_summary_json(&summary_path, &records)?;
    exio::write_tuning_curve_csv(&curve_path, &records)?;

    let failed_cells: Vec<String> = cells
        .iter()
        .filter(|&&(setup, learner, budget)| {
            !records.iter().any(|r| {
                r.setup == setup && r.learner == learner && r.budget == budget && r.auroc.is_some()
            })
        })
        .map(|&(setup, learner, budget)| format!("{setup} {learner} budget={budget}"))
        .collect();

    Ok(RunReport {
        results_path,
        summary_path,
        curve_path,
        records,
        failed_cells,
    })
}

/// Prints the setup × learner mean-AUROC matrix for each budget.
pub fn print_matrix(records: &[FoldRecord], cfg: &RunConfig) {
    for &budget in &cfg.budgets {
        println!("mean AUROC (repetition level), budget {budget}");
        print!("{:<8}", "learner");
        for setup in &cfg.setups {
            print!("{:>26}", setup.to_string());
        }
        println!();
        for &learner in &cfg.learners {
            print!("{:<8}", learner.to_string());
            for &setup in &cfg.setups {
                let cell_budget = if setup.tuning == TuningStrategy::None {
                    0
                } else {
                    budget
                };
                match experiment::aggregate_cell(records, setup, learner, cell_budget) {
                    Ok(agg) => print!("{:>26.3}", agg.overall),
                    Err(_) => print!("{:>26}", "-"),
                }
            }
            println!();
        }
        println!();
    }
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub curve_rows: usize,
    pub optimism_rows: usize,
    pub boxplot_path: PathBuf,
    pub curve_path: PathBuf,
    pub optimism_path: PathBuf,
}

/// Builds the plot-data tables from a results CSV.
pub fn cmd_report(results: &Path, out_dir: &Path) -> Result<ReportOutcome> {
    let records = exio::read_results_csv(results)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let curve_path = out_dir.join("tuning_curve.csv");
    let boxplot_path = out_dir.join("boxplot.csv");
    let optimism_path = out_dir.join("optimism.csv");
    let curve_rows = exio::write_tuning_curve_csv(&curve_path, &records)?;
    if curve_rows == 0 {
        eprintln!("tuning curve: insufficient budgets (need at least two per learner/setup)");
    }
    exio::write_boxplot_csv(&boxplot_path, &records)?;
    let optimism_rows = exio::write_optimism_csv(&optimism_path, &records)?;
    Ok(ReportOutcome {
        curve_rows,
        optimism_rows,
        boxplot_path,
        curve_path,
        optimism_path,
    })
}

/// Parses `--extent W H` style pairs.
pub fn extent_pair(values: &[f64]) -> Result<(f64, f64)> {
    match values {
        [w, h] => Ok((*w, *h)),
        _ => bail!("--extent takes exactly two values: width height"),
    }
}
