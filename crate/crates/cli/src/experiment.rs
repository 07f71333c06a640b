//! Seeded, repeated runs and their result bundle.
//!
//! Repetition `i` runs with seed `seed + i`. Synthetic inputs and random
//! workloads are drawn once from streams forked off `seed`, so every
//! repetition sees the same data and queries. The output directory gets
//!
//! - `report.csv`: one row per repetition per metric,
//! - `aggregate.csv`: mean and sample standard deviation per metric,
//! - `trace.json`: per-repetition history, round trace and ledger,
//! - `schema.toml`: the attribute coding of the data the runs saw,
//! - `synthetic.csv`: the first repetition's output, when export is on.
//!
//! Every CSV starts with `#` lines holding the seed and the full config.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use mwem::domain::DEFAULT_EXPLICIT_CAP;
use mwem::encode::binarize;
use mwem::error::Result as CoreResult;
use mwem::factored::{run_mwem_factored, FactoredDistribution};
use mwem::mwem::run_mwem_cuboids;
use mwem::synth::independent_binary;
use mwem::workload_file::parse_workload;
use mwem::{
    conjunction_workload, cuboid_errors, cuboid_workload, eps_delta_recharacterize, error_report,
    parity_workload, random_range_workload, relative_entropy, run_baseline, run_mwem,
    Approximation, AttributeSchema, BaselineConfig, BudgetLedger, CuboidGroup, ErrorReport,
    Histogram, RecordTable, RngStream, Workload,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Algorithm, ExperimentConfig, ExportFormat, Mode, WorkloadSpec};
use crate::error::{io_error, CliError, Context, Result};
use crate::ingest::{infer_schema, ingest_csv, SchemaDecl};

/// Stream indices forked off the base seed.
const DATA_STREAM: u64 = 0;
const WORKLOAD_STREAM: u64 = 1;
const EXPORT_STREAM: u64 = 2;

pub struct Dataset {
    pub table: RecordTable,
    /// Coding of `table`'s attributes, for exports and re-ingestion.
    pub decl: SchemaDecl,
}

pub enum Queries {
    Linear(Workload),
    Cuboids(Vec<CuboidGroup>),
}

pub enum Synthetic {
    Explicit(Histogram),
    Factored(FactoredDistribution),
}

impl Synthetic {
    pub fn mass(&self) -> f64 {
        match self {
            Synthetic::Explicit(h) => h.mass(),
            Synthetic::Factored(f) => f.mass(),
        }
    }
}

pub struct Repetition {
    pub index: usize,
    pub seed: u64,
    pub metrics: Vec<(String, f64)>,
    pub trace: serde_json::Value,
    pub synthetic: Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub repetitions: usize,
}

pub struct ExperimentSummary {
    pub out: PathBuf,
    pub repetitions: Vec<Repetition>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentSummary {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.metric == metric)
            .map(|a| a.mean)
    }
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let (table, decl) = match (&config.input, &config.synthetic) {
        (Some(path), None) => {
            let decl = match &config.schema {
                Some(s) => SchemaDecl::from_path(s)?,
                None => infer_schema(path)?,
            };
            (ingest_csv(path, &decl)?, decl)
        }
        (None, Some(s)) => {
            let mut rng = RngStream::new(config.seed).fork(DATA_STREAM);
            let table = independent_binary(s.attributes, s.records, s.p, &mut rng)
                .context(|| "synthetic data".into())?;
            let decl = SchemaDecl::integer_coded(table.schema());
            (table, decl)
        }
        _ => {
            return Err(CliError::config(
                "set exactly one of `input` and `synthetic`",
            ))
        }
    };
    match config.binarize {
        Some(encoding) => {
            let b = binarize(&table, encoding).context(|| "binarize".into())?;
            let decl = SchemaDecl::integer_coded(b.table.schema());
            Ok(Dataset {
                table: b.table,
                decl,
            })
        }
        None => Ok(Dataset { table, decl }),
    }
}

pub fn build_queries(
    config: &ExperimentConfig,
    schema: &std::sync::Arc<AttributeSchema>,
) -> Result<Queries> {
    let ctx = || "workload".to_string();
    Ok(match &config.workload {
        WorkloadSpec::Range { count } => {
            let mut rng = RngStream::new(config.seed).fork(WORKLOAD_STREAM);
            Queries::Linear(random_range_workload(schema, *count, &mut rng).context(ctx)?)
        }
        WorkloadSpec::Parity { max_order } => {
            Queries::Linear(parity_workload(schema, *max_order).context(ctx)?)
        }
        WorkloadSpec::Conjunction { max_order } => {
            Queries::Linear(conjunction_workload(schema, *max_order).context(ctx)?)
        }
        WorkloadSpec::Cuboids {
            max_order,
            include_empty,
        } => Queries::Cuboids(cuboid_workload(schema, *max_order, *include_empty).context(ctx)?),
        WorkloadSpec::File { path } => {
            let text = fs::read_to_string(path).map_err(io_error(path))?;
            Queries::Linear(parse_workload(&text, schema).context(|| path.display().to_string())?)
        }
    })
}

fn push_errors(metrics: &mut Vec<(String, f64)>, report: &ErrorReport) {
    metrics.push(("max_error".into(), report.max));
    metrics.push(("mean_error".into(), report.mean));
    metrics.push(("mean_squared_error".into(), report.mean_squared));
}

fn push_privacy(
    metrics: &mut Vec<(String, f64)>,
    config: &ExperimentConfig,
    ledger: &BudgetLedger,
) -> Result<()> {
    metrics.push(("epsilon_spent".into(), ledger.total()));
    if config.delta > 0.0 {
        let rounds = config.privacy.iterations;
        let e = eps_delta_recharacterize(config.privacy.epsilon, rounds, config.delta)
            .context(|| "delta".into())?;
        metrics.push(("epsilon_at_delta".into(), e));
    }
    Ok(())
}

fn run_repetition(
    config: &ExperimentConfig,
    data: &Dataset,
    queries: &Queries,
    index: usize,
) -> Result<Repetition> {
    let seed = config.seed.wrapping_add(index as u64);
    let mut rng = RngStream::new(seed);
    let ctx = || format!("repetition {index} (seed {seed})");
    let mut metrics = Vec::new();
    let cap = config.privacy.explicit_cap;

    let (trace, synthetic) = match (config.mode, config.algorithm, queries) {
        (Mode::Explicit, Algorithm::Mwem, Queries::Linear(w)) => {
            let truth = Histogram::from_records_with_cap(&data.table, cap).context(ctx)?;
            let out = run_mwem(&truth, w, &config.privacy, &mut rng).context(ctx)?;
            push_errors(
                &mut metrics,
                &error_report(&out.synthetic, &truth, w).context(ctx)?,
            );
            if let Ok(re) = relative_entropy(&truth, &out.synthetic) {
                metrics.push(("relative_entropy".into(), re));
            }
            push_privacy(&mut metrics, config, &out.ledger)?;
            let trace = json!({
                "history": out.history,
                "trace": out.trace,
                "stages": out.stages,
                "ledger": out.ledger,
                "access": out.access,
            });
            (trace, Synthetic::Explicit(out.synthetic))
        }
        (Mode::Explicit, Algorithm::Mwem, Queries::Cuboids(groups)) => {
            let truth = Histogram::from_records_with_cap(&data.table, cap).context(ctx)?;
            let out = run_mwem_cuboids(&truth, groups, &config.privacy, &mut rng).context(ctx)?;
            let report = cuboid_errors(&out.synthetic, &truth, groups).context(ctx)?;
            metrics.push(("max_cuboid_error".into(), report.max));
            metrics.push(("mean_cuboid_error".into(), report.mean));
            push_privacy(&mut metrics, config, &out.ledger)?;
            let trace = json!({
                "history": out.history,
                "trace": out.trace,
                "ledger": out.ledger,
                "access": out.access,
            });
            (trace, Synthetic::Explicit(out.synthetic))
        }
        (Mode::Explicit, Algorithm::Baseline, _) => {
            let WorkloadSpec::Parity { max_order } = config.workload else {
                return Err(CliError::config("the baseline measures a parity workload"));
            };
            let truth = Histogram::from_records_with_cap(&data.table, cap).context(ctx)?;
            let baseline = BaselineConfig {
                max_order,
                epsilon: config.privacy.epsilon,
                replay_passes: config.privacy.replay_passes,
                clamp_measurements: config.privacy.clamp_measurements,
                explicit_cap: cap,
                ..Default::default()
            };
            let out = run_baseline(&truth, &baseline, &mut rng).context(ctx)?;
            push_errors(
                &mut metrics,
                &error_report(&out.synthetic, &truth, &out.workload).context(ctx)?,
            );
            if let Ok(re) = relative_entropy(&truth, &out.synthetic) {
                metrics.push(("relative_entropy".into(), re));
            }
            metrics.push(("epsilon_spent".into(), out.ledger.total()));
            let trace = json!({
                "measurements": out.measurements,
                "ledger": out.ledger,
                "access": out.access,
            });
            (trace, Synthetic::Explicit(out.synthetic))
        }
        (Mode::Factored, Algorithm::Mwem, Queries::Linear(w)) => {
            let out = run_mwem_factored(&data.table, w, &config.privacy, &mut rng).context(ctx)?;
            let approx = w
                .iter()
                .map(|q| out.distribution.evaluate(q))
                .collect::<CoreResult<Vec<_>>>()
                .context(ctx)?;
            let truth = w.evaluate_records(&data.table).context(ctx)?;
            push_errors(
                &mut metrics,
                &ErrorReport::from_answers(&approx, &truth).context(ctx)?,
            );
            push_privacy(&mut metrics, config, &out.ledger)?;
            metrics.push(("mw_logic_seconds".into(), out.timing.mw_logic.as_secs_f64()));
            metrics.push((
                "peak_entries".into(),
                out.distribution.peak_entries() as f64,
            ));
            let trace = json!({
                "history": out.history,
                "trace": out.trace,
                "partition": out.distribution.partition(),
                "ledger": out.ledger,
                "access": out.access,
            });
            (trace, Synthetic::Factored(out.distribution))
        }
        (Mode::Factored, _, _) => {
            return Err(CliError::config(
                "factored mode runs MWEM on linear workloads only",
            ))
        }
    };

    Ok(Repetition {
        index,
        seed,
        metrics,
        trace,
        synthetic,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn aggregate(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn aggregates(reps: &[Repetition]) -> Vec<Aggregate> {
    let mut names: Vec<&str> = Vec::new();
    for r in reps {
        for (m, _) in &r.metrics {
            if !names.contains(&m.as_str()) {
                names.push(m);
            }
        }
    }
    names
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = reps
                .iter()
                .filter_map(|r| r.metrics.iter().find(|(m, _)| m == name).map(|p| p.1))
                .collect();
            let (mean, std) = aggregate(&values);
            Aggregate {
                metric: name.to_string(),
                mean,
                std,
                repetitions: values.len(),
            }
        })
        .collect()
}

/// `#` lines with the seed and the config, for the top of every output.
pub fn provenance_header(config: &ExperimentConfig) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# seed = {}", config.seed);
    let _ = writeln!(h, "# rng = {}", RngStream::ALGORITHM);
    let _ = writeln!(h, "# config:");
    for line in config.to_toml().lines() {
        let _ = writeln!(h, "#   {line}");
    }
    h
}

/// Reads the config back out of a provenance header.
pub fn config_from_header(text: &str) -> Result<ExperimentConfig> {
    let body: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .skip_while(|l| *l != "# config:")
        .skip(1)
        .map(|l| format!("{}\n", l.strip_prefix("#   ").unwrap_or("")))
        .collect();
    toml::from_str(&body).map_err(|e| CliError::config(format!("provenance header: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_error(path))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes synthetic data as weighted domain rows or as sampled records.
pub fn export_synthetic(
    synthetic: &Synthetic,
    decl: &SchemaDecl,
    path: &Path,
    format: ExportFormat,
    header: &str,
    rng: &mut RngStream,
) -> Result<()> {
    let file = fs::File::create(path).map_err(io_error(path))?;
    let mut out = std::io::BufWriter::new(file);
    let io = io_error(path);
    let mut text = String::from(header);
    let names: Vec<String> = decl.attributes.iter().map(|a| csv_field(&a.name)).collect();
    let label_row = |tuple: &[u32]| -> String {
        tuple
            .iter()
            .zip(&decl.attributes)
            .map(|(&v, a)| csv_field(&a.label(v)))
            .collect::<Vec<_>>()
            .join(",")
    };
    match format {
        ExportFormat::Weighted => {
            let owned;
            let hist = match synthetic {
                Synthetic::Explicit(h) => h,
                Synthetic::Factored(f) => {
                    owned = f
                        .export_histogram(DEFAULT_EXPLICIT_CAP)
                        .context(|| "weighted export".into())?;
                    &owned
                }
            };
            let _ = writeln!(text, "{},weight", names.join(","));
            out.write_all(text.as_bytes()).map_err(io)?;
            let mut result = Ok(());
            hist.universe()
                .for_each_tuple(|i, t| {
                    if result.is_ok() {
                        result = writeln!(out, "{},{:?}", label_row(t), hist.weight(i));
                    }
                })
                .context(|| "weighted export".into())?;
            result.map_err(io_error(path))?;
        }
        ExportFormat::Sampled => {
            let count = synthetic.mass().round() as usize;
            let table = match synthetic {
                Synthetic::Explicit(h) => h.sample_records(count, rng),
                Synthetic::Factored(f) => f.sample_records(count, rng),
            }
            .context(|| "sampled export".into())?;
            let _ = writeln!(text, "{}", names.join(","));
            out.write_all(text.as_bytes()).map_err(io)?;
            for r in 0..table.len() {
                writeln!(out, "{}", label_row(&table.row(r))).map_err(io_error(path))?;
            }
        }
    }
    out.flush().map_err(io_error(path))
}

/// Runs every repetition, writes the result bundle into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let data = load_dataset(config)?;
    let queries = build_queries(config, data.table.schema())?;

    let mut reps = (0..config.repetitions)
        .into_par_iter()
        .map(|i| run_repetition(config, &data, &queries, i))
        .collect::<Result<Vec<_>>>()?;
    reps.sort_by_key(|r| r.index);
    let aggregates = aggregates(&reps);

    let dir = &config.out;
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let header = provenance_header(config);

    let mut report = header.clone();
    report.push_str("repetition,seed,metric,value\n");
    for r in &reps {
        for (m, v) in &r.metrics {
            let _ = writeln!(report, "{},{},{m},{v:?}", r.index, r.seed);
        }
    }
    write_file(&dir.join("report.csv"), &report)?;

    let mut agg = header.clone();
    agg.push_str("metric,mean,std,repetitions\n");
    for a in &aggregates {
        let _ = writeln!(
            agg,
            "{},{:?},{:?},{}",
            a.metric, a.mean, a.std, a.repetitions
        );
    }
    write_file(&dir.join("aggregate.csv"), &agg)?;

    let trace = json!({
        "seed": config.seed,
        "rng": RngStream::ALGORITHM,
        "config": config,
        "repetitions": reps.iter().map(|r| json!({
            "repetition": r.index,
            "seed": r.seed,
            "metrics": r.metrics.iter().map(|(m, v)| (m.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "run": r.trace,
        })).collect::<Vec<_>>(),
    });
    let trace_text = serde_json::to_string_pretty(&trace).expect("traces serialize");
    write_file(&dir.join("trace.json"), &trace_text)?;

    write_file(
        &dir.join("schema.toml"),
        &toml::to_string(&data.decl).expect("schemas serialize"),
    )?;

    if let Some(export) = &config.export {
        let mut rng = RngStream::new(config.seed).fork(EXPORT_STREAM);
        export_synthetic(
            &reps[0].synthetic,
            &data.decl,
            &dir.join("synthetic.csv"),
            export.format,
            &header,
            &mut rng,
        )?;
    }

    Ok(ExperimentSummary {
        out: dir.clone(),
        repetitions: reps,
        aggregates,
    })
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub iterations: usize,
    pub aggregates: Vec<Aggregate>,
}

/// Runs the `sweep.epsilon` x `sweep.iterations` grid, one experiment per
/// point in `out/eps-<e>_T-<t>`, and writes `sweep.csv` plus `best.csv`
/// (the `T` with the lowest mean `max_error` for each epsilon).
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let sweep = config.sweep.clone().unwrap_or_default();
    let epsilons = if sweep.epsilon.is_empty() {
        vec![config.privacy.epsilon]
    } else {
        sweep.epsilon
    };
    let ts = if sweep.iterations.is_empty() {
        vec![config.privacy.iterations]
    } else {
        sweep.iterations
    };

    let mut points = Vec::new();
    for &e in &epsilons {
        for &t in &ts {
            let mut c = config.clone();
            c.sweep = None;
            c.privacy.epsilon = e;
            c.privacy.iterations = t;
            c.out = config.out.join(format!("eps-{e}_T-{t}"));
            let summary = run_experiment(&c)?;
            points.push(SweepPoint {
                epsilon: e,
                iterations: t,
                aggregates: summary.aggregates,
            });
        }
    }

    let header = provenance_header(config);
    let mut table = header.clone();
    table.push_str("epsilon,iterations,metric,mean,std,repetitions\n");
    for p in &points {
        for a in &p.aggregates {
            let _ = writeln!(
                table,
                "{:?},{},{},{:?},{:?},{}",
                p.epsilon, p.iterations, a.metric, a.mean, a.std, a.repetitions
            );
        }
    }
    write_file(&config.out.join("sweep.csv"), &table)?;

    let score = |p: &SweepPoint| {
        p.aggregates
            .iter()
            .find(|a| a.metric == "max_error" || a.metric == "max_cuboid_error")
            .map_or(f64::INFINITY, |a| a.mean)
    };
    let mut best = header;
    best.push_str("epsilon,best_iterations,max_error\n");
    for &e in &epsilons {
        if let Some(p) = points
            .iter()
            .filter(|p| p.epsilon == e)
            .min_by(|a, b| score(a).total_cmp(&score(b)))
        {
            let _ = writeln!(best, "{e:?},{},{:?}", p.iterations, score(p));
        }
    }
    write_file(&config.out.join("best.csv"), &best)?;
    Ok(points)
}
