//! Budget doubling for when the right `T` and per-round epsilon are unknown.
//!
//! Each stage restarts from the uniform approximation and spends a fixed
//! epsilon per round, doubling it from one stage to the next. A stage ends
//! when the measured gaps stop exceeding the Laplace noise level. A stage
//! that still found signal earns a successor, provided the remaining budget
//! can pay for at least as many rounds at the doubled rate. Every stage runs
//! at least as many rounds as the one before it, so the stage costs at least
//! double from one stage to the next and everything before the final stage
//! costs no more than the final stage itself.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    approximation_mass, check_run_inputs, play_round, potential, Averager, MwemConfig, MwemOutput,
    RoundOptions, RoundState,
};
use crate::access::AccessGate;
use crate::domain::Histogram;
use crate::error::{Error, Result};
use crate::mech::BudgetLedger;
use crate::query::Workload;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The last `patience` gaps were indistinguishable from noise.
    SignalBelowNoise,
    /// Hit the configured iteration limit.
    RoundLimit,
    /// Not enough budget left for another round.
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    /// Epsilon per round, split evenly between selection and measurement.
    pub round_epsilon: f64,
    pub rounds: usize,
    /// Rounds whose gap exceeded the noise threshold.
    pub informative_rounds: usize,
    pub spent: f64,
    pub stop: StopReason,
}

/// MWEM with stage-wise budget doubling. `config.iterations` caps the rounds
/// of each stage; `config.adaptive` holds the stage parameters.
pub fn adaptive_run<R: Rng + ?Sized>(
    dataset: &Histogram,
    workload: &Workload,
    config: &MwemConfig,
    rng: &mut R,
) -> Result<MwemOutput> {
    let settings = config
        .adaptive
        .ok_or_else(|| Error::config("adaptive run without adaptive settings"))?;
    check_run_inputs(
        dataset.universe().schema(),
        dataset.mass(),
        workload,
        config,
    )?;
    if config.init_fraction > 0.0 {
        return Err(Error::config(
            "adaptive runs start every stage from uniform; set init_fraction to 0",
        ));
    }
    dataset.universe().explicit_size(config.explicit_cap)?;

    let mut gate = AccessGate::new(
        dataset,
        workload,
        BudgetLedger::new(config.epsilon)?,
        config.diagnostics,
    );
    let n = approximation_mass(&mut gate, config, dataset.mass(), rng)?;
    let max_rounds = config.iterations.min(workload.len());
    let options = RoundOptions::from(config);
    let truth = if config.diagnostics {
        Some(gate.diagnostic_histogram()?)
    } else {
        None
    };

    let mut round_epsilon = config.round_budget() / (settings.start_divisor * max_rounds as f64);
    let mut previous_rounds = 0usize;
    let mut stages = Vec::new();
    let mut finished = None;

    loop {
        let needed = previous_rounds.max(1);
        if !gate.ledger().can_afford(needed as f64 * round_epsilon) {
            break;
        }
        let initial =
            Histogram::uniform_with_cap(dataset.universe().clone(), n, config.explicit_cap)?;
        let mut state = RoundState::new(initial, workload);
        state.trace.initial_potential = truth.map(|b| potential(b, &state.approx));
        let mut averager = Averager::new(config.output);
        let threshold = settings.signal_factor * 2.0 / round_epsilon;
        let spent_before = gate.ledger().total();

        let mut informative = 0usize;
        let mut quiet = 0usize;
        let stop = loop {
            let rounds = state.history.len();
            if rounds >= max_rounds {
                break StopReason::RoundLimit;
            }
            if !gate.ledger().can_afford(round_epsilon) {
                break StopReason::BudgetExhausted;
            }
            averager.add(&state.approx);
            let half = round_epsilon / 2.0;
            play_round(&mut gate, &mut state, workload, options, half, half, rng)?;
            let record = state.trace.rounds.last_mut().unwrap();
            if let Some(b) = truth {
                record.potential = Some(potential(b, &state.approx));
            }
            if (record.raw_measurement - record.approx_answer).abs() >= threshold {
                informative += 1;
                quiet = 0;
            } else {
                quiet += 1;
            }
            if state.history.len() >= previous_rounds && quiet >= settings.patience {
                break StopReason::SignalBelowNoise;
            }
        };

        let rounds = state.history.len();
        stages.push(StageSummary {
            round_epsilon,
            rounds,
            informative_rounds: informative,
            spent: gate.ledger().total() - spent_before,
            stop,
        });
        finished = Some((state, averager));

        if stop == StopReason::BudgetExhausted || informative < settings.patience {
            break;
        }
        round_epsilon *= 2.0;
        previous_rounds = rounds;
    }

    let (state, averager) =
        finished.ok_or_else(|| Error::config("budget too small for a single adaptive round"))?;
    let (ledger, access) = gate.into_parts();
    Ok(MwemOutput {
        synthetic: averager.finish(state.approx)?,
        history: state.history,
        trace: state.trace,
        ledger,
        access,
        stages,
    })
}
