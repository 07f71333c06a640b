//! MWEM over marginal tables ("cuboids").
//!
//! Each round picks a whole cuboid, scored by the L1 distance between its
//! approximate and true cells minus the cell count, and then measures all of
//! its cells under one charge: the cells partition the records, so one
//! record moves a single cell count by one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    approximation_mass, check_run_inputs, clamp_measurement, histogram_init, potential, Averager,
    History, HistoryEntry, MwemConfig,
};
use crate::access::{AccessGate, AccessReport};
use crate::domain::Histogram;
use crate::error::{Error, Result};
use crate::mech::BudgetLedger;
use crate::metrics::cuboid_error_unchecked;
use crate::query::{marginal_unchecked, CuboidGroup, Workload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuboidRecord {
    pub round: usize,
    /// Index of the chosen cuboid.
    pub cuboid: usize,
    pub attributes: Vec<usize>,
    /// Sum over cells of `|A - B|` before the update, minus the cell count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_score: Option<f64>,
    /// Largest per-cuboid average cell error after the update.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_cuboid_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CuboidOutput {
    pub synthetic: Histogram,
    /// One entry per measured cell; `query` indexes `cells`.
    pub history: History,
    pub trace: Vec<CuboidRecord>,
    pub ledger: BudgetLedger,
    pub access: AccessReport,
    /// Every cell of every cuboid, cuboid by cuboid.
    pub cells: Workload,
    /// Cuboid `g` owns cells `offsets[g]..offsets[g + 1]`.
    pub offsets: Vec<usize>,
}

/// Sequential multiplicative-weights updates for cell queries, `passes`
/// times over `entries`. Equivalent to calling the general update once per
/// entry, but each update touches only the cell's own domain elements: the
/// renormalization is carried as a running scale and folded in after every
/// pass.
fn apply_cells(hist: &mut Histogram, cells: &Workload, entries: &[HistoryEntry], passes: usize) {
    let n = hist.mass();
    let universe = hist.universe().clone();
    let boxes: Vec<(Vec<u32>, Vec<u32>)> = entries
        .iter()
        .map(|e| {
            cells
                .get(e.query)
                .support_box(universe.schema())
                .expect("cuboid cells are cell queries")
        })
        .collect();
    let weights = hist.weights_mut();
    for _ in 0..passes {
        let mut scale = 1.0;
        for (entry, (lo, hi)) in entries.iter().zip(&boxes) {
            let mut inside = 0.0;
            universe.for_each_in_box(lo, hi, |i| inside += weights[i]);
            let current = scale * inside;
            let eta = (entry.measurement - current) / (2.0 * n);
            if eta == 0.0 {
                continue;
            }
            let factor = eta.exp();
            universe.for_each_in_box(lo, hi, |i| weights[i] *= factor);
            scale *= n / (n + current * (factor - 1.0));
        }
        weights.iter_mut().for_each(|w| *w *= scale);
    }
    hist.renormalize_to(n);
}

/// Runs MWEM where each round measures a whole cuboid.
pub fn run_mwem_cuboids<R: Rng + ?Sized>(
    dataset: &Histogram,
    groups: &[CuboidGroup],
    config: &MwemConfig,
    rng: &mut R,
) -> Result<CuboidOutput> {
    if groups.is_empty() {
        return Err(Error::config("no cuboids to measure"));
    }
    if config.adaptive.is_some() {
        return Err(Error::config(
            "adaptive stages are not available for cuboid runs",
        ));
    }
    if config.iterations > groups.len() {
        return Err(Error::config(format!(
            "{} iterations need at least that many cuboids, got {}",
            config.iterations,
            groups.len()
        )));
    }
    let mut offsets = vec![0usize];
    let mut flat = Vec::new();
    for g in groups {
        flat.extend(g.cells.iter().cloned());
        offsets.push(flat.len());
    }
    let cells = Workload::new("cuboid cells", flat)?;
    check_run_inputs(dataset.universe().schema(), dataset.mass(), &cells, config)?;
    dataset.universe().explicit_size(config.explicit_cap)?;

    let mut gate = AccessGate::new(
        dataset,
        &cells,
        BudgetLedger::new(config.epsilon)?,
        config.diagnostics,
    );
    let n = approximation_mass(&mut gate, config, dataset.mass(), rng)?;
    let mut approx = if config.init_fraction > 0.0 {
        histogram_init(&mut gate, n, config.init_budget(), rng)?
    } else {
        Histogram::uniform_with_cap(dataset.universe().clone(), n, config.explicit_cap)?
    };
    let truth = if config.diagnostics {
        Some(gate.diagnostic_histogram()?)
    } else {
        None
    };

    let per_call = config.round_budget() / (2.0 * config.iterations as f64);
    let mut measured = vec![false; groups.len()];
    let mut history = History::new();
    let mut trace = Vec::with_capacity(config.iterations);
    let mut averager = Averager::new(config.output);

    for round in 1..=config.iterations {
        averager.add(&approx);
        let approx_cells: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| marginal_unchecked(&approx, &g.attributes).counts)
            .collect();
        let score_of = |truth: &[f64]| -> Vec<f64> {
            groups
                .iter()
                .enumerate()
                .map(|(g, group)| {
                    let exact = &truth[offsets[g]..offsets[g + 1]];
                    let l1: f64 = approx_cells[g]
                        .iter()
                        .zip(exact)
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    l1 - group.len() as f64
                })
                .collect()
        };
        let chosen = gate.select_with(
            format!("select cuboid round {round}"),
            per_call,
            &measured,
            rng,
            score_of,
        )?;
        let group = &groups[chosen];
        let true_score = if config.diagnostics {
            let exact = gate.diagnostic_answers()?;
            Some(score_of(exact)[chosen])
        } else {
            None
        };
        let indices: Vec<usize> = (offsets[chosen]..offsets[chosen + 1]).collect();
        let noisy = gate.measure_disjoint(
            format!("measure cuboid round {round}"),
            per_call,
            &indices,
            rng,
        )?;
        measured[chosen] = true;

        let first_new = history.len();
        for (k, (&cell, raw)) in indices.iter().zip(noisy).enumerate() {
            let query = cells.get(cell);
            let m = if config.clamp_measurements {
                clamp_measurement(query, raw, n)
            } else {
                raw
            };
            history.push(HistoryEntry {
                query: cell,
                measurement: m,
                scale: m - approx_cells[chosen][k],
            });
        }
        if config.replay_passes == 0 {
            apply_cells(&mut approx, &cells, &history.entries()[first_new..], 1);
        } else {
            apply_cells(&mut approx, &cells, history.entries(), config.replay_passes);
        }

        trace.push(CuboidRecord {
            round,
            cuboid: chosen,
            attributes: group.attributes.clone(),
            true_score,
            worst_cuboid_error: truth.map(|b| {
                groups
                    .iter()
                    .map(|g| cuboid_error_unchecked(&approx, b, g))
                    .fold(0.0, f64::max)
            }),
            potential: truth.map(|b| potential(b, &approx)),
        });
    }

    let (ledger, access) = gate.into_parts();
    Ok(CuboidOutput {
        synthetic: averager.finish(approx)?,
        history,
        trace,
        ledger,
        access,
        cells,
        offsets,
    })
}
