//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The demo data is one attribute with [`DOMAIN`] values and the workload is
//! every interval on it. Results cross into JavaScript as JSON strings.
//! Runs here use diagnostics so the page can plot true errors; they are
//! not private.

use mwem::{
    exponential_probabilities, optimal_iterations, run_mwem, utility_bound, Histogram, Interval,
    LinearQuery, MwemConfig, OutputMode, RngStream, Universe, Workload,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const DOMAIN: u32 = 64;

#[derive(Clone, Debug, Serialize)]
pub struct Round {
    pub lo: u32,
    pub hi: u32,
    pub measurement: f64,
    pub approx_answer: f64,
    pub true_answer: f64,
    pub max_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoRun {
    pub truth: Vec<f64>,
    pub synthetic: Vec<f64>,
    pub rounds: Vec<Round>,
    pub queries: usize,
    pub initial_max_error: f64,
    pub final_max_error: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCurve {
    pub bounds: Vec<f64>,
    pub best_iterations: usize,
    pub best_bound: f64,
}

/// Relative densities of the named shape over the domain.
fn density(shape: &str) -> Result<Vec<f64>, String> {
    let bump = |x: f64, mu: f64, sd: f64| (-(x - mu).powi(2) / (2.0 * sd * sd)).exp();
    let xs = (0..DOMAIN).map(f64::from);
    let d: Vec<f64> = match shape {
        "bimodal" => xs
            .map(|x| bump(x, 16.0, 4.0) + 0.6 * bump(x, 44.0, 7.0))
            .collect(),
        "skewed" => xs.map(|x| (-x / 9.0).exp()).collect(),
        "steps" => xs
            .map(|x| [1.0, 0.2, 3.0, 0.5][(x as usize * 4) / DOMAIN as usize])
            .collect(),
        other => return Err(format!("unknown shape `{other}`")),
    };
    Ok(d)
}

/// `records` draws from the shape, as counts.
pub fn sensitive_histogram(shape: &str, records: usize, seed: u64) -> Result<Histogram, String> {
    let universe = Universe::from_cardinalities(&[DOMAIN]).map_err(|e| e.to_string())?;
    let d = density(shape)?;
    let total: f64 = d.iter().sum();
    let shape = Histogram::new(universe.clone(), d.iter().map(|w| w / total).collect())
        .map_err(|e| e.to_string())?;
    let table = shape
        .sample_records(records, &mut RngStream::new(seed).fork(1))
        .map_err(|e| e.to_string())?;
    Histogram::from_records(&table).map_err(|e| e.to_string())
}

pub fn interval_workload(universe: &Universe) -> Workload {
    let mut queries = Vec::new();
    for lo in 0..DOMAIN {
        for hi in lo..DOMAIN {
            let iv = Interval {
                attribute: 0,
                lo,
                hi,
            };
            queries.push(LinearQuery::range(universe.schema(), vec![iv]).expect("valid interval"));
        }
    }
    Workload::new("intervals", queries).expect("nonempty workload")
}

fn bounds_of(q: &LinearQuery) -> (u32, u32) {
    match q {
        LinearQuery::Range { intervals } if !intervals.is_empty() => {
            (intervals[0].lo, intervals[0].hi)
        }
        _ => (0, DOMAIN - 1),
    }
}

fn max_error_of(h: &Histogram, truth: &[f64], workload: &Workload) -> f64 {
    workload
        .iter()
        .zip(truth)
        .map(|(q, t)| (q.evaluate(h).expect("same universe") - t).abs())
        .fold(0.0, f64::max)
}

pub fn run(
    shape: &str,
    records: usize,
    epsilon: f64,
    iterations: usize,
    seed: u64,
) -> Result<DemoRun, String> {
    let data = sensitive_histogram(shape, records, seed)?;
    let workload = interval_workload(data.universe());
    let truth = workload.evaluate(&data).map_err(|e| e.to_string())?;
    let config = MwemConfig {
        iterations,
        epsilon,
        output: OutputMode::Average,
        diagnostics: true,
        ..MwemConfig::default()
    };
    let out = run_mwem(&data, &workload, &config, &mut RngStream::new(seed).fork(2))
        .map_err(|e| e.to_string())?;
    let uniform =
        Histogram::uniform(data.universe().clone(), records as f64).map_err(|e| e.to_string())?;
    let rounds = out
        .trace
        .rounds
        .iter()
        .map(|r| {
            let (lo, hi) = bounds_of(workload.get(r.selected));
            Round {
                lo,
                hi,
                measurement: r.measurement,
                approx_answer: r.approx_answer,
                true_answer: r.true_answer.unwrap_or(f64::NAN),
                max_error: r.max_error.unwrap_or(f64::NAN),
            }
        })
        .collect();
    Ok(DemoRun {
        initial_max_error: max_error_of(&uniform, &truth, &workload),
        final_max_error: max_error_of(&out.synthetic, &truth, &workload),
        truth: data.weights().to_vec(),
        synthetic: out.synthetic.weights().to_vec(),
        rounds,
        queries: workload.len(),
        bound: utility_bound(
            records as f64,
            data.universe().ln_size(),
            workload.len(),
            iterations,
            epsilon,
        ),
    })
}

pub fn bound_curve(
    records: f64,
    domain: f64,
    queries: usize,
    epsilon: f64,
    max_iterations: usize,
) -> BoundCurve {
    let ln_d = domain.ln();
    let (best_iterations, best_bound) =
        optimal_iterations(records, ln_d, queries, epsilon, max_iterations);
    BoundCurve {
        bounds: (1..=max_iterations)
            .map(|t| utility_bound(records, ln_d, queries, t, epsilon))
            .collect(),
        best_iterations,
        best_bound,
    }
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    Ok(serde_json::to_string(&v).expect("plain data serializes"))
}

/// Runs MWEM on a sampled histogram; returns a `DemoRun` as JSON.
#[wasm_bindgen(js_name = runDemo)]
pub fn run_demo(
    shape: &str,
    records: usize,
    epsilon: f64,
    iterations: usize,
    seed: u32,
) -> Result<String, JsError> {
    to_js(run(shape, records, epsilon, iterations, seed.into()))
}

/// The error bound for `T = 1..=max_iterations`; returns a `BoundCurve` as JSON.
#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve_js(
    records: f64,
    domain: f64,
    queries: usize,
    epsilon: f64,
    max_iterations: usize,
) -> String {
    to_js(Ok(bound_curve(
        records,
        domain,
        queries,
        epsilon,
        max_iterations.max(1),
    )))
    .expect("infallible")
}

/// Selection probabilities of the exponential mechanism for `scores`.
#[wasm_bindgen(js_name = selectionProbabilities)]
pub fn selection_probabilities(scores: Vec<f64>, epsilon: f64) -> Result<Vec<f64>, JsError> {
    exponential_probabilities(&scores, epsilon).map_err(|e| JsError::new(&e.to_string()))
}
