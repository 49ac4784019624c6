use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use spatialcv::partition::Strategy;
use spatialcv::synth::FieldSpec;
use spatialcv_cli as cli;

#[derive(Parser)]
#[command(
    name = "spatialcv",
    about = "Spatial and non-spatial nested cross-validation for binary classifiers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic spatially autocorrelated dataset
    Synth(SynthArgs),
    /// Partition a dataset into repeated folds and write the assignment
    Partition(PartitionArgs),
    /// Run the experiment described by a config file
    Run(RunArgs),
    /// Build plot-data tables from a results CSV
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Sample size
    #[arg(long)]
    n: usize,
    /// Sampling rectangle: width height
    #[arg(long, num_args = 2, value_names = ["W", "H"], default_values_t = [1.0, 1.0])]
    extent: Vec<f64>,
    /// Correlation length of the latent fields
    #[arg(long)]
    range: f64,
    /// Variance of the spatially structured component
    #[arg(long, default_value_t = 1.0)]
    sill: f64,
    /// Variance of the iid component
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
    /// Number of spatially autocorrelated predictors
    #[arg(long, default_value_t = 3)]
    informative: usize,
    /// Number of iid noise predictors
    #[arg(long, default_value_t = 0)]
    noise: usize,
    /// Latent intercept controlling class prevalence
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    intercept: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; the schema sidecar replaces the extension
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    /// Dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Schema sidecar
    #[arg(long)]
    schema: PathBuf,
    /// random | spatial
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file
    config: PathBuf,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker pool size (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by `run`
    #[arg(long)]
    results: PathBuf,
    /// Output directory for the tables
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth(args) => {
            let spec = FieldSpec {
                n: args.n,
                extent: cli::extent_pair(&args.extent)?,
                range: args.range,
                sill: args.sill,
                nugget: args.nugget,
                n_informative: args.informative,
                n_noise: args.noise,
                intercept: args.intercept,
                seed: args.seed,
            };
            let report = cli::cmd_synth(&spec, &args.out)?;
            println!(
                "wrote {} and {} (n = {}, prevalence = {:.3})",
                report.csv_path.display(),
                report.schema_path.display(),
                report.n,
                report.prevalence
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Partition(args) => {
            let strategy = match args.strategy.as_str() {
                "random" => Strategy::Random,
                "spatial" => Strategy::SpatialKmeans,
                other => anyhow::bail!("unknown strategy `{other}` (use random or spatial)"),
            };
            let report = cli::cmd_partition(&cli::PartitionArgs {
                data: args.data,
                schema: args.schema,
                strategy,
                k: args.k,
                repetitions: args.reps,
                seed: args.seed,
                out_dir: args.out,
            })?;
            println!("wrote {} ({} rows)", report.folds_path.display(), report.n);
            if let Some(c) = report.centroids_path {
                println!("wrote {}", c.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let mut cfg = cli::parse_run_config(&args.config)?;
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            let report = cli::cmd_run(&cfg, args.jobs)?;
            cli::print_matrix(&report.records, &cfg);
            println!("results: {}", report.results_path.display());
            println!("summary: {}", report.summary_path.display());
            if report.failed_cells.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("cells with zero successful folds:");
                for cell in &report.failed_cells {
                    eprintln!("  {cell}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Report(args) => {
            let outcome = cli::cmd_report(&args.results, &args.out)?;
            println!(
                "wrote {} ({} rows), {}, {} ({} rows)",
                outcome.curve_path.display(),
                outcome.curve_rows,
                outcome.boxplot_path.display(),
                outcome.optimism_path.display(),
                outcome.optimism_rows
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
