//! Scaling runs of the factored engine on independent binary attributes.

use std::fmt::Write as _;
use std::path::Path;

use mwem::factored::run_mwem_factored;
use mwem::synth::independent_binary;
use mwem::{conjunction_workload, ErrorReport, MwemConfig, RngStream};
use serde::Serialize;

use crate::error::{io_error, Context, Result};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub attributes: Vec<usize>,
    pub records: usize,
    pub p: f64,
    /// Queries touch up to this many attributes.
    pub max_order: usize,
    pub privacy: MwemConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub attributes: usize,
    pub records: usize,
    pub queries: usize,
    pub iterations: usize,
    pub total_seconds: f64,
    pub mw_logic_seconds: f64,
    pub sensitive_seconds: f64,
    pub peak_entries: usize,
    pub max_error: f64,
}

pub fn run_bench(config: &BenchConfig, out: Option<&Path>) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &d in &config.attributes {
        let mut rng = RngStream::new(config.seed).fork(d as u64);
        let ctx = || format!("bench with {d} attributes");
        let table = independent_binary(d, config.records, config.p, &mut rng).context(ctx)?;
        let workload = conjunction_workload(table.schema(), config.max_order).context(ctx)?;
        let privacy = MwemConfig {
            iterations: config.privacy.iterations.min(workload.len()),
            ..config.privacy.clone()
        };
        let run = run_mwem_factored(&table, &workload, &privacy, &mut rng).context(ctx)?;
        let approx = workload
            .iter()
            .map(|q| run.distribution.evaluate(q))
            .collect::<mwem::error::Result<Vec<_>>>()
            .context(ctx)?;
        let truth = workload.evaluate_records(&table).context(ctx)?;
        rows.push(BenchRow {
            attributes: d,
            records: config.records,
            queries: workload.len(),
            iterations: privacy.iterations,
            total_seconds: run.timing.total.as_secs_f64(),
            mw_logic_seconds: run.timing.mw_logic.as_secs_f64(),
            sensitive_seconds: run.timing.sensitive_eval.as_secs_f64(),
            peak_entries: run.distribution.peak_entries(),
            max_error: ErrorReport::from_answers(&approx, &truth).context(ctx)?.max,
        });
    }
    if let Some(path) = out {
        let mut text = format!("# seed = {}\n# p = {}\n", config.seed, config.p);
        text.push_str("attributes,records,queries,iterations,total_seconds,mw_logic_seconds,sensitive_seconds,peak_entries,max_error\n");
        for r in &rows {
            let _ = writeln!(
                text,
                "{},{},{},{},{:?},{:?},{:?},{},{:?}",
                r.attributes,
                r.records,
                r.queries,
                r.iterations,
                r.total_seconds,
                r.mw_logic_seconds,
                r.sensitive_seconds,
                r.peak_entries,
                r.max_error
            );
        }
        std::fs::write(path, text).map_err(io_error(path))?;
    }
    Ok(rows)
}
