//! Parity-measurement baseline: measure every parity query of order up to
//! `k` once, splitting the budget evenly, then fit the measurements with
//! multiplicative weights. No query selection takes place.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::access::{AccessGate, AccessReport};
use crate::domain::{Histogram, DEFAULT_EXPLICIT_CAP};
use crate::error::{Error, Result};
use crate::mech::BudgetLedger;
use crate::mwem::{clamp_measurement, mw_replay, History, HistoryEntry};
use crate::query::{parity_workload, LinearQuery, Workload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub max_order: usize,
    pub epsilon: f64,
    /// Sweeps of multiplicative weights over the measurements.
    pub replay_passes: usize,
    pub clamp_measurements: bool,
    /// Also measure the order-zero parity, i.e. the record count.
    pub include_total: bool,
    pub explicit_cap: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            max_order: 3,
            epsilon: 1.0,
            replay_passes: 100,
            clamp_measurements: true,
            include_total: false,
            explicit_cap: DEFAULT_EXPLICIT_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BaselineOutput {
    pub synthetic: Histogram,
    pub workload: Workload,
    pub measurements: Vec<f64>,
    pub ledger: BudgetLedger,
    pub access: AccessReport,
}

pub fn run_baseline<R: Rng + ?Sized>(
    dataset: &Histogram,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineOutput> {
    if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
        return Err(Error::config(format!(
            "epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    if config.max_order == 0 {
        return Err(Error::config("parity order must be at least 1"));
    }
    let schema = dataset.universe().schema();
    let mut queries = parity_workload(schema, config.max_order)?
        .queries()
        .to_vec();
    if config.include_total {
        queries.insert(
            0,
            LinearQuery::Parity {
                attributes: Vec::new(),
            },
        );
    }
    let workload = Workload::new(format!("parity-baseline-k{}", config.max_order), queries)?;
    dataset.universe().explicit_size(config.explicit_cap)?;
    let n = dataset.mass();
    if !(n > 0.0) {
        return Err(Error::config("dataset is empty"));
    }

    let mut gate = AccessGate::new(
        dataset,
        &workload,
        BudgetLedger::new(config.epsilon)?,
        false,
    );
    let per_query = config.epsilon / workload.len() as f64;
    let mut history = History::new();
    let mut measurements = Vec::with_capacity(workload.len());
    for (i, q) in workload.iter().enumerate() {
        let raw = gate.measure(format!("parity {i}"), per_query, i, rng)?;
        let m = if config.clamp_measurements {
            clamp_measurement(q, raw, n)
        } else {
            raw
        };
        measurements.push(m);
        history.push(HistoryEntry {
            query: i,
            measurement: m,
            scale: m,
        });
    }

    let mut synthetic =
        Histogram::uniform_with_cap(dataset.universe().clone(), n, config.explicit_cap)?;
    mw_replay(&mut synthetic, &workload, &history, config.replay_passes)?;
    let (ledger, access) = gate.into_parts();
    Ok(BaselineOutput {
        synthetic,
        workload,
        measurements,
        ledger,
        access,
    })
}
