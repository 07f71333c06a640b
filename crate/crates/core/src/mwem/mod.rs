//! The MWEM loop: select a badly approximated query with the exponential
//! mechanism, measure it with Laplace noise, and correct the approximation
//! with a multiplicative-weights step.
//!
//! The loop is written once against [`Approximation`], so the explicit
//! histogram and the factored distribution share the selection, measurement
//! and replay code.

mod adaptive;
mod cuboids;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::access::{AccessGate, AccessReport, SensitiveSource};
use crate::domain::{Histogram, DEFAULT_EXPLICIT_CAP};
use crate::error::{Error, Result};
use crate::mech::BudgetLedger;
use crate::query::{LinearQuery, Workload};

pub use adaptive::{adaptive_run, StageSummary, StopReason};
pub use cuboids::{run_mwem_cuboids, CuboidOutput, CuboidRecord};

/// Weight given to negative noisy counts when initializing from a noisy
/// histogram, as a fraction of the uniform weight `n / |D|`.
pub const INIT_FLOOR_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Average of `A_0 .. A_{T-1}`, the output the utility bound speaks about.
    Average,
    /// The final approximation `A_T`.
    Last,
}

/// Where the approximation's total mass comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum MassMode {
    /// The true record count. Not itself protected.
    Exact,
    /// A Laplace estimate of the record count, paid for with `fraction * epsilon`.
    Noisy { fraction: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    /// The first stage spends `epsilon / (start_divisor * T)` per round.
    pub start_divisor: f64,
    /// A round carries signal when `|q(A) - m|` is at least this many Laplace scales.
    pub signal_factor: f64,
    /// Consecutive quiet rounds that end a stage.
    pub patience: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            start_divisor: 8.0,
            signal_factor: 2.0,
            patience: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MwemConfig {
    /// Number of rounds `T`; an upper bound when `adaptive` is set.
    pub iterations: usize,
    pub epsilon: f64,
    pub output: OutputMode,
    /// Sweeps over all measurements after each new one; zero applies only the new one.
    pub replay_passes: usize,
    /// Share of epsilon spent on a noisy histogram used as `A_0`.
    pub init_fraction: f64,
    pub adaptive: Option<AdaptiveConfig>,
    /// Clamp measurements into the query's attainable range before updating.
    pub clamp_measurements: bool,
    pub mass: MassMode,
    /// Record true scores, potentials and errors. Makes the run non-private.
    pub diagnostics: bool,
    pub explicit_cap: usize,
}

impl Default for MwemConfig {
    fn default() -> Self {
        MwemConfig {
            iterations: 10,
            epsilon: 1.0,
            output: OutputMode::Last,
            replay_passes: 100,
            init_fraction: 0.0,
            adaptive: None,
            clamp_measurements: true,
            mass: MassMode::Exact,
            diagnostics: false,
            explicit_cap: DEFAULT_EXPLICIT_CAP,
        }
    }
}

impl MwemConfig {
    /// The bare loop: one update per round, no replay, averaged output.
    pub fn basic(iterations: usize, epsilon: f64) -> Self {
        MwemConfig {
            iterations,
            epsilon,
            replay_passes: 0,
            output: OutputMode::Average,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.iterations == 0 {
            return Err(Error::config("need at least one iteration"));
        }
        if !(0.0..1.0).contains(&self.init_fraction) {
            return Err(Error::config(format!(
                "init_fraction must lie in [0, 1), got {}",
                self.init_fraction
            )));
        }
        if let MassMode::Noisy { fraction } = self.mass {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::config(format!(
                    "mass fraction must lie in (0, 1), got {fraction}"
                )));
            }
        }
        if self.round_budget() <= 0.0 {
            return Err(Error::config(
                "initialization and mass estimation leave no budget for the rounds",
            ));
        }
        if let Some(a) = &self.adaptive {
            if !(a.start_divisor >= 1.0) || !(a.signal_factor > 0.0) || a.patience == 0 {
                return Err(Error::config("invalid adaptive settings"));
            }
        }
        Ok(())
    }

    pub(crate) fn mass_budget(&self) -> f64 {
        match self.mass {
            MassMode::Exact => 0.0,
            MassMode::Noisy { fraction } => fraction * self.epsilon,
        }
    }

    pub(crate) fn init_budget(&self) -> f64 {
        self.init_fraction * self.epsilon
    }

    /// Budget left for the `T` select/measure pairs.
    pub(crate) fn round_budget(&self) -> f64 {
        self.epsilon - self.init_budget() - self.mass_budget()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Index into the workload.
    pub query: usize,
    /// Measurement used for updates (after clamping).
    pub measurement: f64,
    /// `m_i - q_i(A_{i-1})`.
    pub scale: f64,
}

/// The measurements taken so far, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    entries: Vec<HistoryEntry>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn push(&mut self, entry: HistoryEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn queries(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.query).collect()
    }
}

/// What happened in one round. Fields marked optional are diagnostics and
/// are filled only on non-private runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub round: usize,
    pub selected: usize,
    pub raw_measurement: f64,
    pub measurement: f64,
    /// `q_i(A_{i-1})`.
    pub approx_answer: f64,
    /// `q_i(B)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_answer: Option<f64>,
    /// `Psi_i` after this round's update.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<f64>,
    /// Largest workload error of `A_i`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
}

impl IterationRecord {
    /// `|q_i(A_{i-1}) - q_i(B)|`.
    pub fn true_score(&self) -> Option<f64> {
        self.true_answer.map(|b| (self.approx_answer - b).abs())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_potential: Option<f64>,
    pub rounds: Vec<IterationRecord>,
}

#[derive(Clone, Debug)]
pub struct MwemOutput {
    pub synthetic: Histogram,
    pub history: History,
    pub trace: IterationTrace,
    pub ledger: BudgetLedger,
    pub access: AccessReport,
    /// Stage log of an adaptive run; empty otherwise.
    pub stages: Vec<StageSummary>,
}

/// A representation of `A_i` that MWEM can query and update.
pub trait Approximation {
    fn mass(&self) -> f64;

    fn answer(&self, query: &LinearQuery) -> Result<f64>;

    fn answers(&self, workload: &Workload) -> Result<Vec<f64>> {
        workload.iter().map(|q| self.answer(q)).collect()
    }

    /// Multiplicative-weights step pulling `query`'s answer toward `target`.
    fn update(&mut self, query: &LinearQuery, target: f64) -> Result<()>;
}

impl Approximation for Histogram {
    fn mass(&self) -> f64 {
        Histogram::mass(self)
    }

    fn answer(&self, query: &LinearQuery) -> Result<f64> {
        Ok(query.evaluate_unchecked(self))
    }

    fn answers(&self, workload: &Workload) -> Result<Vec<f64>> {
        Ok(crate::query::par_map(workload.queries(), |q| {
            q.evaluate_unchecked(self)
        }))
    }

    fn update(&mut self, query: &LinearQuery, target: f64) -> Result<()> {
        mw_update_in_place(self, query, target)
    }
}

/// `A(x) <- A(x) exp(q(x) (m - q(A)) / 2n)`, renormalized to mass `n`.
pub fn mw_update(approx: &Histogram, query: &LinearQuery, target: f64) -> Result<Histogram> {
    query.check_schema(approx.universe().schema())?;
    let mut next = approx.clone();
    mw_update_in_place(&mut next, query, target)?;
    Ok(next)
}

pub(crate) fn mw_update_in_place(
    hist: &mut Histogram,
    query: &LinearQuery,
    target: f64,
) -> Result<()> {
    let n = hist.mass();
    if !(n > 0.0) {
        return Err(Error::domain("multiplicative weights needs positive mass"));
    }
    let current = query.evaluate_unchecked(hist);
    let eta = (target - current) / (2.0 * n);
    if eta == 0.0 {
        return Ok(());
    }
    let up = eta.exp();
    let down = (-eta).exp();
    let factor = |v: f64| {
        if v == 1.0 {
            up
        } else if v == 0.0 {
            1.0
        } else if v == -1.0 {
            down
        } else {
            (v * eta).exp()
        }
    };
    let universe = hist.universe().clone();
    let support = query.support_box(universe.schema());
    let weights = hist.weights_mut();
    match support {
        Some((lo, hi)) => universe.for_each_in_box(&lo, &hi, |i| weights[i] *= up),
        None => universe
            .for_each_tuple(|i, t| weights[i] *= factor(query.value(t)))
            .expect("histogram universes are enumerable"),
    }
    hist.renormalize_to(n);
    Ok(())
}

/// Re-applies every recorded measurement, in order, `passes` times. Uses
/// only the history, never the sensitive data.
pub fn mw_replay<A: Approximation + ?Sized>(
    approx: &mut A,
    workload: &Workload,
    history: &History,
    passes: usize,
) -> Result<()> {
    for _ in 0..passes {
        for entry in history.entries() {
            approx.update(workload.get(entry.query), entry.measurement)?;
        }
    }
    Ok(())
}

/// Clamps a measurement into `[0, n]` for counting queries and `[-n, n]` otherwise.
pub fn clamp_measurement(query: &LinearQuery, measurement: f64, mass: f64) -> f64 {
    if query.is_counting() {
        measurement.clamp(0.0, mass)
    } else {
        measurement.clamp(-mass, mass)
    }
}

/// Exponential-mechanism choice of an unmeasured workload query, scored by
/// `|q(A) - q(B)|`. Charges `epsilon` to the gate's ledger.
pub fn select_query<S: SensitiveSource + ?Sized, A: Approximation + ?Sized, R: Rng + ?Sized>(
    gate: &mut AccessGate<'_, S>,
    approx: &A,
    workload: &Workload,
    measured: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let answers = approx.answers(workload)?;
    gate.select("select", epsilon, &answers, measured, rng)
}

/// `A_0` from noisy counts: each count gets Laplace noise at scale
/// `1/epsilon`, is floored at `INIT_FLOOR_FRACTION * n / |D|`, and the
/// result is renormalized to mass `n`.
pub fn histogram_init<R: Rng + ?Sized>(
    gate: &mut AccessGate<'_, Histogram>,
    mass: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Histogram> {
    let universe = gate.universe();
    let size = universe.size()? as f64;
    let floor = INIT_FLOOR_FRACTION * mass / size;
    let noisy = gate.noisy_histogram("histogram init", epsilon, rng)?;
    let mut hist = Histogram::new(universe, noisy.into_iter().map(|w| w.max(floor)).collect())?;
    hist.renormalize_to(mass);
    Ok(hist)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct RoundOptions {
    pub clamp: bool,
    pub replay_passes: usize,
}

impl From<&MwemConfig> for RoundOptions {
    fn from(c: &MwemConfig) -> Self {
        RoundOptions {
            clamp: c.clamp_measurements,
            replay_passes: c.replay_passes,
        }
    }
}

pub(crate) struct RoundState<A> {
    pub approx: A,
    pub history: History,
    pub trace: IterationTrace,
    pub measured: Vec<bool>,
}

impl<A: Approximation> RoundState<A> {
    pub fn new(approx: A, workload: &Workload) -> Self {
        RoundState {
            approx,
            history: History::new(),
            trace: IterationTrace::default(),
            measured: vec![false; workload.len()],
        }
    }
}

/// One select / measure / update round.
pub(crate) fn play_round<S, A, R>(
    gate: &mut AccessGate<'_, S>,
    state: &mut RoundState<A>,
    workload: &Workload,
    options: RoundOptions,
    select_epsilon: f64,
    measure_epsilon: f64,
    rng: &mut R,
) -> Result<()>
where
    S: SensitiveSource + ?Sized,
    A: Approximation,
    R: Rng + ?Sized,
{
    let round = state.history.len() + 1;
    let approx_answers = state.approx.answers(workload)?;
    let selected = gate.select(
        format!("select round {round}"),
        select_epsilon,
        &approx_answers,
        &state.measured,
        rng,
    )?;
    let raw = gate.measure(
        format!("measure round {round}"),
        measure_epsilon,
        selected,
        rng,
    )?;
    let query = workload.get(selected);
    let n = state.approx.mass();
    let measurement = if options.clamp {
        clamp_measurement(query, raw, n)
    } else {
        raw
    };
    let before = approx_answers[selected];
    state.measured[selected] = true;
    state.history.push(HistoryEntry {
        query: selected,
        measurement,
        scale: measurement - before,
    });

    if options.replay_passes == 0 {
        state.approx.update(query, measurement)?;
    } else {
        mw_replay(
            &mut state.approx,
            workload,
            &state.history,
            options.replay_passes,
        )?;
    }

    let (true_answer, max_error) = if gate.diagnostics_enabled() {
        let after = state.approx.answers(workload)?;
        let truth = gate.diagnostic_answers()?;
        let max_error = after
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (Some(truth[selected]), Some(max_error))
    } else {
        (None, None)
    };
    state.trace.rounds.push(IterationRecord {
        round,
        selected,
        raw_measurement: raw,
        measurement,
        approx_answer: before,
        true_answer,
        potential: None,
        max_error,
    });
    Ok(())
}

pub(crate) fn check_run_inputs(
    schema: &crate::domain::AttributeSchema,
    record_count: f64,
    workload: &Workload,
    config: &MwemConfig,
) -> Result<()> {
    config.validate()?;
    workload.check_schema(schema)?;
    if !(record_count > 0.0) {
        return Err(Error::config("dataset is empty"));
    }
    if config.adaptive.is_none() && config.iterations > workload.len() {
        return Err(Error::config(format!(
            "{} iterations need at least that many distinct queries, workload has {}",
            config.iterations,
            workload.len()
        )));
    }
    Ok(())
}

/// Running mass for the approximation: the exact count or a charged estimate.
pub(crate) fn approximation_mass<S: SensitiveSource + ?Sized, R: Rng + ?Sized>(
    gate: &mut AccessGate<'_, S>,
    config: &MwemConfig,
    exact: f64,
    rng: &mut R,
) -> Result<f64> {
    match config.mass {
        MassMode::Exact => Ok(exact),
        MassMode::Noisy { .. } => Ok(gate
            .noisy_count("record count", config.mass_budget(), rng)?
            .max(1.0)),
    }
}

/// `KL(B/|B| || A/|A|)`, the potential `Psi` of the approximation.
pub(crate) fn potential(truth: &Histogram, approx: &Histogram) -> f64 {
    let nb = truth.mass();
    let na = approx.mass();
    truth
        .weights()
        .iter()
        .zip(approx.weights())
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, a)| (b / nb) * ((b / nb) / (a / na)).ln())
        .sum()
}

/// Accumulates `A_0 .. A_{T-1}` for the averaged output.
pub(crate) struct Averager {
    sum: Option<Vec<f64>>,
    count: usize,
}

impl Averager {
    pub fn new(mode: OutputMode) -> Self {
        Averager {
            sum: matches!(mode, OutputMode::Average).then(Vec::new),
            count: 0,
        }
    }

    pub fn add(&mut self, hist: &Histogram) {
        if let Some(sum) = &mut self.sum {
            if sum.is_empty() {
                sum.resize(hist.len(), 0.0);
            }
            sum.iter_mut()
                .zip(hist.weights())
                .for_each(|(s, w)| *s += w);
            self.count += 1;
        }
    }

    /// The average if averaging, otherwise `last` unchanged.
    pub fn finish(self, last: Histogram) -> Result<Histogram> {
        match self.sum {
            Some(sum) if self.count > 0 => {
                let k = self.count as f64;
                let mass = last.mass();
                let mut avg = Histogram::new(
                    last.universe().clone(),
                    sum.into_iter().map(|s| s / k).collect(),
                )?;
                avg.renormalize_to(mass);
                Ok(avg)
            }
            _ => Ok(last),
        }
    }
}

/// Runs MWEM on an explicit histogram.
pub fn run_mwem<R: Rng + ?Sized>(
    dataset: &Histogram,
    workload: &Workload,
    config: &MwemConfig,
    rng: &mut R,
) -> Result<MwemOutput> {
    if config.adaptive.is_some() {
        return adaptive_run(dataset, workload, config, rng);
    }
    check_run_inputs(
        dataset.universe().schema(),
        dataset.mass(),
        workload,
        config,
    )?;
    dataset.universe().explicit_size(config.explicit_cap)?;

    let mut gate = AccessGate::new(
        dataset,
        workload,
        BudgetLedger::new(config.epsilon)?,
        config.diagnostics,
    );
    let n = approximation_mass(&mut gate, config, dataset.mass(), rng)?;
    let initial = if config.init_fraction > 0.0 {
        histogram_init(&mut gate, n, config.init_budget(), rng)?
    } else {
        Histogram::uniform_with_cap(dataset.universe().clone(), n, config.explicit_cap)?
    };

    let t = config.iterations;
    let per_call = config.round_budget() / (2.0 * t as f64);
    let options = RoundOptions::from(config);
    let truth = if config.diagnostics {
        Some(gate.diagnostic_histogram()?)
    } else {
        None
    };

    let mut state = RoundState::new(initial, workload);
    state.trace.initial_potential = truth.map(|b| potential(b, &state.approx));
    let mut averager = Averager::new(config.output);
    for _ in 0..t {
        averager.add(&state.approx);
        play_round(
            &mut gate, &mut state, workload, options, per_call, per_call, rng,
        )?;
        if let Some(b) = truth {
            let psi = potential(b, &state.approx);
            state.trace.rounds.last_mut().unwrap().potential = Some(psi);
        }
    }

    let (ledger, access) = gate.into_parts();
    Ok(MwemOutput {
        synthetic: averager.finish(state.approx)?,
        history: state.history,
        trace: state.trace,
        ledger,
        access,
        stages: Vec::new(),
    })
}

/// Worst-case error bound for the averaged output, `2n sqrt(ln|D| / T) + 10 T ln|Q| / eps`.
pub fn utility_bound(
    records: f64,
    ln_domain_size: f64,
    workload_size: usize,
    iterations: usize,
    epsilon: f64,
) -> f64 {
    let t = iterations as f64;
    2.0 * records * (ln_domain_size / t).sqrt() + 10.0 * t * (workload_size as f64).ln() / epsilon
}

/// Integer `T` in `1..=max_iterations` minimizing [`utility_bound`], with the bound.
pub fn optimal_iterations(
    records: f64,
    ln_domain_size: f64,
    workload_size: usize,
    epsilon: f64,
    max_iterations: usize,
) -> (usize, f64) {
    (1..=max_iterations.max(1))
        .map(|t| {
            (
                t,
                utility_bound(records, ln_domain_size, workload_size, t, epsilon),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}
