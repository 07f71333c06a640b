use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mwem::MwemConfig;
use mwem_cli::bench::{run_bench, BenchConfig};
use mwem_cli::{
    run_experiment, run_sweep, CliError, ExperimentConfig, ExportFormat, ExportSpec, Mode, Result,
    SweepSpec, WorkloadSpec,
};

#[derive(Parser)]
#[command(
    name = "mwem",
    version,
    about = "Differentially private synthetic data by multiplicative weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, repeated with consecutive seeds.
    Run(ExperimentArgs),
    /// Run every combination of the given epsilons and round counts.
    Sweep(ExperimentArgs),
    /// Release synthetic data from a single run.
    Export {
        #[command(flatten)]
        args: ExperimentArgs,
        /// `weighted` domain rows or `sampled` records.
        #[arg(long, default_value = "weighted", value_parser = ["weighted", "sampled"])]
        format: String,
    },
    /// Time the factored engine on independent binary attributes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file (TOML); the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file with a header row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Schema declaration (TOML); inferred from the data when absent.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_parser = ["explicit", "factored"])]
    mode: Option<String>,
    /// range:N, parity:K, conjunction:K, cuboids:K, or a workload .toml file.
    #[arg(long)]
    workload: Option<String>,
    /// Total privacy budget; a comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    /// Also report the (epsilon', delta) guarantee.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of rounds; a comma-separated list for `sweep`.
    #[arg(long = "T", value_delimiter = ',')]
    iterations: Vec<usize>,
    /// Base seed; repetition i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of repetitions
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record true answers and potentials. The outputs are then not private.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800,1000")]
    attributes: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    records: usize,
    /// Probability that each attribute is set.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Largest conjunction order in the workload.
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long = "T", default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = MwemConfig::default().replay_passes)]
    replay: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file for the results.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn single<T: Copy>(values: &[T], flag: &str) -> Result<Option<T>> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(CliError::config(format!(
            "--{flag} takes one value here; use `sweep` for a grid"
        ))),
    }
}

fn build_config(args: &ExperimentArgs, sweep: bool) -> Result<ExperimentConfig> {
    let mut config = match (&args.config, &args.workload) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(w)) => ExperimentConfig::new(WorkloadSpec::parse_flag(w)?),
        (None, None) => return Err(CliError::config("give --config or --workload")),
    };
    if args.config.is_some() {
        if let Some(w) = &args.workload {
            config.workload = WorkloadSpec::parse_flag(w)?;
        }
    }
    if let Some(input) = &args.input {
        config.input = Some(input.clone());
        config.synthetic = None;
    }
    if let Some(schema) = &args.schema {
        config.schema = Some(schema.clone());
    }
    if let Some(mode) = &args.mode {
        config.mode = if mode == "factored" {
            Mode::Factored
        } else {
            Mode::Explicit
        };
    }
    if let Some(delta) = args.delta {
        config.delta = delta;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(reps) = args.reps {
        config.repetitions = reps;
    }
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    config.privacy.diagnostics |= args.diagnostics;
    if sweep {
        let grid = config.sweep.get_or_insert_with(SweepSpec::default);
        if !args.epsilon.is_empty() {
            grid.epsilon = args.epsilon.clone();
        }
        if !args.iterations.is_empty() {
            grid.iterations = args.iterations.clone();
        }
    } else {
        if let Some(e) = single(&args.epsilon, "epsilon")? {
            config.privacy.epsilon = e;
        }
        if let Some(t) = single(&args.iterations, "T")? {
            config.privacy.iterations = t;
        }
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = build_config(&args, false)?;
            let summary = run_experiment(&config)?;
            println!("wrote {}", summary.out.display());
            for a in &summary.aggregates {
                println!("{:<20} mean {:>14.6} std {:>12.6}", a.metric, a.mean, a.std);
            }
        }
        Command::Sweep(args) => {
            let config = build_config(&args, true)?;
            let points = run_sweep(&config)?;
            println!("wrote {}", config.out.join("sweep.csv").display());
            for p in &points {
                let err = p
                    .aggregates
                    .iter()
                    .find(|a| a.metric.starts_with("max_"))
                    .map_or(f64::NAN, |a| a.mean);
                println!(
                    "epsilon {:<10} T {:<6} max error {:.4}",
                    p.epsilon, p.iterations, err
                );
            }
        }
        Command::Export { args, format } => {
            let mut config = build_config(&args, false)?;
            config.repetitions = 1;
            config.export = Some(ExportSpec {
                format: if format == "sampled" {
                    ExportFormat::Sampled
                } else {
                    ExportFormat::Weighted
                },
            });
            let summary = run_experiment(&config)?;
            println!("wrote {}", summary.out.join("synthetic.csv").display());
        }
        Command::Bench(b) => {
            let config = BenchConfig {
                attributes: b.attributes,
                records: b.records,
                p: b.p,
                max_order: b.order,
                privacy: MwemConfig {
                    iterations: b.iterations,
                    epsilon: b.epsilon,
                    replay_passes: b.replay,
                    ..Default::default()
                },
                seed: b.seed,
            };
            let rows = run_bench(&config, b.out.as_deref())?;
            println!(
                "attributes  queries  rounds  mw-logic(s)  sensitive(s)  peak-entries  max-error"
            );
            for r in rows {
                println!(
                    "{:>10} {:>8} {:>7} {:>12.3} {:>13.3} {:>13} {:>10.1}",
                    r.attributes,
                    r.queries,
                    r.iterations,
                    r.mw_logic_seconds,
                    r.sensitive_seconds,
                    r.peak_entries,
                    r.max_error
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
