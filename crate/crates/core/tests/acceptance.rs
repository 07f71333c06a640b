//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line for each, and exits non-zero if any fails.
//!
//! `cargo test -p mwem --test acceptance -- 3 5` runs only criteria 3 and 5.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ::mwem::encode::{binarize, BinaryEncoding};
use ::mwem::factored::run_mwem_factored;
use ::mwem::mwem::{run_mwem_cuboids, History};
use ::mwem::synth::{
    concat_columns, independent_binary, latent_class_categorical, GroupedBinary, ADULT_CATEGORICAL,
};
use ::mwem::*;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> Outcome;

fn main() {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "privacy accounting", privacy_accounting),
        (2, "utility bound", utility_bound_holds),
        (3, "potential lemma", potential_lemma),
        (4, "mechanism distributions", mechanism_distributions),
        (5, "factored equivalence", factored_equivalence),
        (6, "scaling smoke", scaling_smoke),
        (7, "baseline comparison", baseline_comparison),
        (8, "irrelevant attributes", irrelevant_attributes),
        (9, "hadamard parity oracle", hadamard_oracle),
    ];
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::check(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {id} {name} ({secs:.1}s): {}",
            outcome.detail
        );
        failures += !outcome.pass as usize;
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// oracles

/// Universe index → tuple, first attribute most significant.
fn decode(mut index: usize, cards: &[u32]) -> Vec<u32> {
    let mut t = vec![0u32; cards.len()];
    for a in (0..cards.len()).rev() {
        t[a] = (index % cards[a] as usize) as u32;
        index /= cards[a] as usize;
    }
    t
}

/// `sum_x q(x) A(x)` by enumerating tuples directly.
fn brute_answer(query: &LinearQuery, hist: &Histogram) -> f64 {
    let cards = hist.universe().schema().cardinalities();
    hist.weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w * query.value(&decode(i, &cards)))
        .sum()
}

/// `sum_x B(x)/n ln(B(x)/A(x))`.
fn kl(truth: &Histogram, approx: &Histogram) -> f64 {
    let n = truth.mass();
    truth
        .weights()
        .iter()
        .zip(approx.weights())
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, a)| b / n * (b / a).ln())
        .sum()
}

fn random_histogram<R: Rng>(cards: &[u32], records: usize, rng: &mut R) -> Histogram {
    let universe = Universe::from_cardinalities(cards).unwrap();
    let size = universe.size().unwrap();
    // a few heavy elements on top of a light background
    let mut pref: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..1.0)).collect();
    for _ in 0..(size / 8).max(1) {
        pref[rng.gen_range(0..size)] += rng.gen_range(2.0..20.0);
    }
    let total: f64 = pref.iter().sum();
    let mut weights = vec![0.0; size];
    for _ in 0..records {
        let mut u = rng.gen_range(0.0..total);
        let mut i = 0;
        while i + 1 < size && u >= pref[i] {
            u -= pref[i];
            i += 1;
        }
        weights[i] += 1.0;
    }
    Histogram::new(universe, weights).unwrap()
}

fn random_cards<R: Rng>(rng: &mut R, max_size: usize) -> Vec<u32> {
    loop {
        let k = rng.gen_range(1..=4);
        let cards: Vec<u32> = (0..k).map(|_| rng.gen_range(2..=8)).collect();
        let size: usize = cards.iter().map(|&c| c as usize).product();
        if size <= max_size {
            return cards;
        }
    }
}

/// Parity, cell and range queries with footprints of at most three attributes.
fn mixed_binary_workload<R: Rng>(schema: &AttributeSchema, count: usize, rng: &mut R) -> Workload {
    let d = schema.len();
    let mut queries = Vec::with_capacity(count);
    // small schemas have fewer distinct queries than requested
    for _ in 0..20 * count {
        if queries.len() == count {
            break;
        }
        let k = rng.gen_range(1..=3.min(d));
        let mut attrs: Vec<usize> = (0..d).collect();
        for i in 0..k {
            let j = rng.gen_range(i..d);
            attrs.swap(i, j);
        }
        attrs.truncate(k);
        let q = match rng.gen_range(0..3) {
            0 => LinearQuery::parity(schema, attrs).unwrap(),
            1 => LinearQuery::cell(
                schema,
                attrs.iter().map(|&a| (a, rng.gen_range(0..2))).collect(),
            )
            .unwrap(),
            _ => {
                let ivs = attrs
                    .iter()
                    .map(|&a| {
                        let lo = rng.gen_range(0..2);
                        Interval {
                            attribute: a,
                            lo,
                            hi: rng.gen_range(lo..2),
                        }
                    })
                    .collect();
                LinearQuery::range(schema, ivs).unwrap()
            }
        };
        if !queries.contains(&q) {
            queries.push(q);
        }
    }
    Workload::new("mixed", queries).unwrap()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

// ---------------------------------------------------------------------------
// 1

fn privacy_accounting() -> Outcome {
    let mut bad = Vec::new();
    for k in 0..50u64 {
        let mut rng = RngStream::new(1000 + k);
        let epsilon = rng.gen_range(0.01..5.0);
        let (total, touches, expected, private) = match k % 3 {
            0 => {
                let cards = random_cards(&mut rng, 512);
                let h = random_histogram(&cards, rng.gen_range(50..2000), &mut rng);
                let w =
                    random_range_workload(h.universe().schema(), rng.gen_range(5..40), &mut rng)
                        .unwrap();
                let init = if rng.gen_bool(0.5) {
                    rng.gen_range(0.05..0.5)
                } else {
                    0.0
                };
                let config = MwemConfig {
                    iterations: rng.gen_range(1..=10.min(w.len())),
                    epsilon,
                    init_fraction: init,
                    replay_passes: [0, 5, 100][rng.gen_range(0..3)],
                    output: if rng.gen_bool(0.5) {
                        OutputMode::Average
                    } else {
                        OutputMode::Last
                    },
                    ..Default::default()
                };
                let out = run_mwem(&h, &w, &config, &mut rng).unwrap();
                let expected = 2 * config.iterations + (init > 0.0) as usize;
                (
                    out.ledger.total(),
                    out.access.charged_touches,
                    expected,
                    out.access.is_private(),
                )
            }
            1 => {
                let d = rng.gen_range(3..=10);
                let table = independent_binary(d, rng.gen_range(50..1000), 0.3, &mut rng).unwrap();
                let w = conjunction_workload(table.schema(), 2).unwrap();
                let config = MwemConfig {
                    iterations: rng.gen_range(1..=10.min(w.len())),
                    epsilon,
                    ..Default::default()
                };
                let out = run_mwem_factored(&table, &w, &config, &mut rng).unwrap();
                (
                    out.ledger.total(),
                    out.access.charged_touches,
                    2 * config.iterations,
                    out.access.is_private(),
                )
            }
            _ => {
                let cards = random_cards(&mut rng, 512);
                let h = random_histogram(&cards, rng.gen_range(50..2000), &mut rng);
                let groups = cuboid_workload(h.universe().schema(), cards.len(), false).unwrap();
                let config = MwemConfig {
                    iterations: rng.gen_range(1..=groups.len().min(5)),
                    epsilon,
                    ..Default::default()
                };
                let out = run_mwem_cuboids(&h, &groups, &config, &mut rng).unwrap();
                (
                    out.ledger.total(),
                    out.access.charged_touches,
                    2 * config.iterations,
                    out.access.is_private(),
                )
            }
        };
        if (total - epsilon).abs() > 1e-12 || touches != expected || !private {
            bad.push(format!(
                "config {k}: total {total} vs {epsilon}, touches {touches} vs {expected}"
            ));
        }
    }
    Outcome::check(
        bad.is_empty(),
        if bad.is_empty() {
            "50/50 ledgers equal epsilon to 1e-12 with 2T (+1 init) charged touches".into()
        } else {
            bad.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 2

fn utility_bound_holds() -> Outcome {
    let (n, t, eps, q) = (1000, 10, 1.0, 500);
    let bound = utility_bound(n as f64, 64f64.ln(), q, t, eps);
    let mut held = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = RngStream::new(seed);
        let h = random_histogram(&[64], n, &mut rng);
        let w = random_range_workload(h.universe().schema(), q, &mut rng).unwrap();
        let config = MwemConfig {
            iterations: t,
            epsilon: eps,
            output: OutputMode::Average,
            replay_passes: 0,
            clamp_measurements: true,
            ..Default::default()
        };
        let out = run_mwem(&h, &w, &config, &mut rng).unwrap();
        let err = w
            .iter()
            .map(|q| (brute_answer(q, &out.synthetic) - brute_answer(q, &h)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        held += (err <= bound) as usize;
    }
    Outcome::check(
        held >= 90,
        format!("bound {bound:.2} held in {held}/100 runs (worst max error {worst:.2})"),
    )
}

// ---------------------------------------------------------------------------
// 3

fn potential_lemma() -> Outcome {
    let mut violations = Vec::new();
    let mut rounds = 0;
    for seed in 0..20u64 {
        let mut rng = RngStream::new(300 + seed);
        let cards = if seed % 2 == 0 {
            vec![2; rng.gen_range(4..=10)]
        } else {
            random_cards(&mut rng, 1024)
        };
        let h = random_histogram(&cards, rng.gen_range(100..3000), &mut rng);
        let schema = h.universe().schema().clone();
        let w = if seed % 2 == 0 {
            mixed_binary_workload(&schema, 60, &mut rng)
        } else {
            random_range_workload(&schema, 60, &mut rng).unwrap()
        };
        let config = MwemConfig {
            iterations: 12,
            epsilon: [0.1, 1.0, 10.0][seed as usize % 3],
            replay_passes: 0,
            clamp_measurements: true,
            diagnostics: true,
            output: OutputMode::Last,
            ..Default::default()
        };
        let out = run_mwem(&h, &w, &config, &mut rng).unwrap();
        let n = h.mass();
        let ln_d = (h.len() as f64).ln();
        let uniform = Histogram::uniform(h.universe().clone(), n).unwrap();
        let psi0 = kl(&h, &uniform);
        if !(psi0 <= ln_d)
            || out
                .trace
                .initial_potential
                .map(|p| (p - psi0).abs() > 1e-12)
                != Some(false)
        {
            violations.push(format!("seed {seed}: psi0 {psi0} vs ln|D| {ln_d}"));
        }
        let mut prev = psi0;
        for r in &out.trace.rounds {
            let b = r.true_answer.unwrap();
            let psi = r.potential.unwrap();
            let lhs = prev - psi;
            let rhs = ((r.approx_answer - b) / (2.0 * n)).powi(2)
                - ((r.measurement - b) / (2.0 * n)).powi(2)
                - 1e-9;
            if lhs < rhs || psi < 0.0 {
                violations.push(format!("seed {seed} round {}: drop {lhs} < {rhs}", r.round));
            }
            prev = psi;
            rounds += 1;
        }
        if (kl(&h, &out.synthetic) - prev).abs() > 1e-9 {
            violations.push(format!(
                "seed {seed}: traced potential disagrees with recomputation"
            ));
        }
    }
    Outcome::check(
        violations.is_empty(),
        if violations.is_empty() {
            format!("{rounds} rounds over 20 runs satisfy the per-round drop; psi0 <= ln|D| in all")
        } else {
            violations.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 4

fn mechanism_distributions() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut rng = RngStream::new(4);
    let mut worst_tv: f64 = 0.0;
    for trial in 0..8 {
        let k = 3 + trial;
        let eps = [0.5, 1.0, 2.0][trial % 3];
        let scores: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..6.0)).collect();
        let weights: Vec<f64> = scores.iter().map(|s| (eps * s / 2.0).exp()).collect();
        let z: f64 = weights.iter().sum();
        let exact: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let draws = 100_000;
        let mut counts = vec![0usize; k];
        for _ in 0..draws {
            counts[exponential_mechanism(&scores, eps, &mut rng).unwrap()] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&exact)
            .map(|(&c, p)| (c as f64 / draws as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        worst_tv = worst_tv.max(tv);
    }
    pass &= worst_tv <= 0.01;
    notes.push(format!("worst EM TV {worst_tv:.4}"));

    let b = 1.7;
    let draws = 1_000_000;
    let samples: Vec<f64> = (0..draws).map(|_| laplace_sample(b, &mut rng)).collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws as f64;
    let mean_ok = mean.abs() <= 0.01 * b;
    let var_rel = (var - 2.0 * b * b).abs() / (2.0 * b * b);
    pass &= mean_ok && var_rel <= 0.04;
    notes.push(format!(
        "Laplace mean {mean:.4} (limit {:.3}), variance off by {:.2}%",
        0.01 * b,
        100.0 * var_rel
    ));
    for r in [1.0, 2.0, 3.0] {
        let tail = samples.iter().filter(|x| x.abs() > r * b).count() as f64 / draws as f64;
        let rel = (tail - (-r).exp()).abs() / (-r).exp();
        pass &= rel <= 0.05;
        notes.push(format!("tail r={r} off by {:.2}%", 100.0 * rel));
    }
    Outcome::check(pass, notes.join(", "))
}

// ---------------------------------------------------------------------------
// 5

fn factored_equivalence() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_eval: f64 = 0.0;
    let mut worst_export: f64 = 0.0;
    for trial in 0..200u64 {
        let mut rng = RngStream::new(5000 + trial);
        let d = rng.gen_range(3..=12);
        let spec = GroupedBinary {
            groups: d,
            group_size: 1,
            latent_rate: rng.gen_range(0.1..0.9),
            agreement: 0.0,
        };
        let mut table = spec.generate(rng.gen_range(50..2000), &mut rng).unwrap();
        if trial % 2 == 1 {
            // correlated columns for half the trials
            let g = GroupedBinary {
                groups: 1,
                group_size: d,
                latent_rate: 0.3,
                agreement: 0.7,
            };
            table = g.generate(table.len(), &mut rng).unwrap();
        }
        let h = Histogram::from_records(&table).unwrap();
        let schema = h.universe().schema().clone();
        let w = mixed_binary_workload(&schema, rng.gen_range(10..60), &mut rng);
        let config = MwemConfig {
            iterations: rng.gen_range(1..=8.min(w.len())),
            epsilon: rng.gen_range(0.1..5.0),
            replay_passes: [0, 1, 10, 100][rng.gen_range(0..4)],
            clamp_measurements: rng.gen_bool(0.7),
            output: OutputMode::Last,
            ..Default::default()
        };
        let seed = rng.gen();
        let explicit = run_mwem(&h, &w, &config, &mut RngStream::new(seed)).unwrap();
        let factored = run_mwem_factored(&h, &w, &config, &mut RngStream::new(seed)).unwrap();

        if explicit.history.queries() != factored.history.queries() {
            failures.push(format!("trial {trial}: selections differ"));
            continue;
        }
        let meas_gap = explicit
            .history
            .entries()
            .iter()
            .zip(factored.history.entries())
            .map(|(a, b)| (a.measurement - b.measurement).abs())
            .fold(0.0, f64::max);
        if meas_gap > 1e-12 {
            failures.push(format!("trial {trial}: measurements differ by {meas_gap}"));
        }
        let dist = &factored.distribution;
        let exported = dist.export_histogram(1 << 12).unwrap();
        for q in w.iter() {
            let f = dist.evaluate(q).unwrap();
            worst_eval = worst_eval.max((f - brute_answer(q, &explicit.synthetic)).abs());
            worst_export = worst_export.max((f - brute_answer(q, &exported)).abs());
        }
        for (a, b) in exported.weights().iter().zip(explicit.synthetic.weights()) {
            worst_export = worst_export.max((a - b).abs());
        }
    }
    let pass = failures.is_empty() && worst_eval <= 1e-9 && worst_export <= 1e-9;
    Outcome::check(
        pass,
        format!(
            "200 histories: {} mismatched, worst evaluation gap {worst_eval:.2e}, worst export gap {worst_export:.2e}{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(" ({})", failures.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// 6

fn single_attribute_workload(schema: &AttributeSchema) -> Workload {
    conjunction_workload(schema, 1).unwrap()
}

fn scaling_smoke() -> Outcome {
    let mut notes = Vec::new();
    let mut rng = RngStream::new(6);
    let table = independent_binary(1000, 100_000, 0.1, &mut rng).unwrap();
    let w = single_attribute_workload(table.schema());
    let config = MwemConfig {
        iterations: 1000,
        epsilon: 1.0,
        ..Default::default()
    };
    let out = run_mwem_factored(&table, &w, &config, &mut rng).unwrap();
    drop(table);
    let bound: usize = 2 * 1000;
    let mw = out.timing.mw_logic;
    let peak = out.distribution.peak_entries();
    let smoke = mw < Duration::from_secs(300) && peak <= bound;
    notes.push(format!(
        "d=1000 T=1000: MW logic {:.1}s, query evaluation {:.1}s, peak entries {peak} (limit {bound})",
        mw.as_secs_f64(),
        out.timing.sensitive_eval.as_secs_f64()
    ));

    // shape: fixed T, no replay, so per-round work is the workload scan
    let t = 100;
    let mut points = Vec::new();
    for d in [100usize, 200, 400, 800, 1000] {
        let table = independent_binary(d, 2000, 0.1, &mut rng).unwrap();
        let w = single_attribute_workload(table.schema());
        let config = MwemConfig {
            iterations: t,
            epsilon: 1.0,
            replay_passes: 0,
            ..Default::default()
        };
        let best = (0..5)
            .map(|_| {
                run_mwem_factored(&table, &w, &config, &mut rng)
                    .unwrap()
                    .timing
                    .mw_logic
            })
            .min()
            .unwrap();
        points.push(((d as f64).ln(), best.as_secs_f64().ln()));
        notes.push(format!("d={d}: {:.1}ms", best.as_secs_f64() * 1e3));
    }
    let s = slope(&points);
    notes.push(format!("log-log slope {s:.3}"));
    Outcome::check(smoke && (s - 1.0).abs() <= 0.3, notes.join(", "))
}

// ---------------------------------------------------------------------------
// 7

fn baseline_comparison() -> Outcome {
    let spec = GroupedBinary {
        groups: 2,
        group_size: 3,
        latent_rate: 0.3,
        agreement: 0.85,
    };
    let mut wins = 0;
    let (mut re_mwem, mut re_base) = (0.0, 0.0);
    for seed in 0..100u64 {
        let mut rng = RngStream::new(7000 + seed);
        let table = spec.generate(2000, &mut rng).unwrap();
        let h = Histogram::from_records(&table).unwrap();
        let w = parity_workload(h.universe().schema(), 3).unwrap();
        let config = MwemConfig {
            iterations: 10,
            epsilon: 0.1,
            replay_passes: 100,
            ..Default::default()
        };
        let mwem = run_mwem(&h, &w, &config, &mut rng).unwrap();
        let base = run_baseline(
            &h,
            &BaselineConfig {
                max_order: 3,
                epsilon: 0.1,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        let a = kl(&h, &mwem.synthetic);
        let b = kl(&h, &base.synthetic);
        re_mwem += a / 100.0;
        re_base += b / 100.0;
        wins += (a < b) as usize;
    }
    Outcome::check(
        wins >= 80,
        format!("MWEM lower in {wins}/100 seeds (mean RE {re_mwem:.4} vs baseline {re_base:.4})"),
    )
}

// ---------------------------------------------------------------------------
// 8

const RELEVANT: usize = 27;
const NOISE: usize = 50;

/// Reconstructs `A_1 .. A_T` from a history and returns the largest error
/// over `shared` after each round.
fn error_curve(
    schema: &Arc<AttributeSchema>,
    mass: f64,
    workload: &Workload,
    history: &History,
    passes: usize,
    shared: &[(usize, f64)],
) -> Vec<f64> {
    let mut dist = FactoredDistribution::with_cap(schema.clone(), mass, 1 << 22).unwrap();
    let mut curve = Vec::new();
    for i in 1..=history.len() {
        let entries = &history.entries()[..i];
        if passes == 0 {
            let e = entries[i - 1];
            dist.mw_update(workload.get(e.query), e.measurement)
                .unwrap();
        } else {
            for _ in 0..passes {
                for e in entries {
                    dist.mw_update(workload.get(e.query), e.measurement)
                        .unwrap();
                }
            }
        }
        let err = shared
            .iter()
            .map(|&(q, truth)| (dist.evaluate(workload.get(q)).unwrap() - truth).abs())
            .fold(0.0, f64::max);
        curve.push(err);
    }
    curve
}

fn irrelevant_attributes() -> Outcome {
    let seeds = 4u64;
    let rounds = 20usize;
    let extra = 60usize;
    let per_round_epsilon = 0.05;
    let passes = 20;
    let records = 20_000;
    let mut base_curve = vec![0.0; rounds];
    let mut noisy_curve = vec![0.0; rounds];
    let mut merged_noise = 0;
    let mut noise_rounds = 0;
    let mut short = 0;
    for seed in 0..seeds {
        let mut rng = RngStream::new(800 + seed);
        let categorical =
            latent_class_categorical(&ADULT_CATEGORICAL, 4, 0.7, records, &mut rng).unwrap();
        let relevant = binarize(&categorical, BinaryEncoding::BitwiseLog)
            .unwrap()
            .table;
        assert_eq!(relevant.schema().len(), RELEVANT);
        let noise = independent_binary(NOISE, records, 0.1, &mut rng).unwrap();
        let wide = concat_columns(&relevant, &noise).unwrap();

        let w27 = conjunction_workload(relevant.schema(), 3).unwrap();
        let w77 = conjunction_workload(wide.schema(), 3).unwrap();
        // queries of the wide workload that only touch relevant attributes,
        // paired with their index in the narrow workload
        let narrow_index: std::collections::HashMap<Vec<usize>, usize> = w27
            .iter()
            .enumerate()
            .map(|(i, q)| (q.footprint(), i))
            .collect();
        let truth27 = w27.evaluate_records(&relevant).unwrap();
        let shared27: Vec<(usize, f64)> = truth27.iter().copied().enumerate().collect();
        let shared77: Vec<(usize, f64)> = w77
            .iter()
            .enumerate()
            .filter_map(|(i, q)| narrow_index.get(&q.footprint()).map(|&j| (i, truth27[j])))
            .collect();

        let c27 = MwemConfig {
            iterations: rounds,
            epsilon: per_round_epsilon * rounds as f64,
            replay_passes: passes,
            ..Default::default()
        };
        let c77 = MwemConfig {
            iterations: rounds + extra,
            epsilon: per_round_epsilon * (rounds + extra) as f64,
            ..c27.clone()
        };
        let run27 = run_mwem_factored(&relevant, &w27, &c27, &mut rng).unwrap();
        let run77 = run_mwem_factored(&wide, &w77, &c77, &mut rng).unwrap();

        for a in RELEVANT..RELEVANT + NOISE {
            let part = run77.distribution.part_of(a);
            merged_noise += (run77.distribution.partition()[part].len() > 1) as usize;
        }
        let curve27 = error_curve(
            relevant.schema(),
            records as f64,
            &w27,
            &run27.history,
            passes,
            &shared27,
        );
        let curve77 = error_curve(
            wide.schema(),
            records as f64,
            &w77,
            &run77.history,
            passes,
            &shared77,
        );
        // align by skipping the rounds spent on irrelevant attributes
        let relevant_rounds: Vec<usize> = run77
            .history
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| w77.get(e.query).footprint().iter().all(|&a| a < RELEVANT))
            .map(|(i, _)| i)
            .collect();
        noise_rounds += run77.history.len() - relevant_rounds.len();
        if relevant_rounds.len() < rounds {
            short += 1;
            continue;
        }
        for k in 0..rounds {
            base_curve[k] += curve27[k] / seeds as f64;
            noisy_curve[k] += curve77[relevant_rounds[k]] / seeds as f64;
        }
    }
    let worst = base_curve
        .iter()
        .zip(&noisy_curve)
        .map(|(a, b)| (b - a).abs() / a)
        .fold(0.0, f64::max);
    let pass = merged_noise == 0 && short == 0 && worst <= 0.2;
    Outcome::check(
        pass,
        format!(
            "worst pointwise gap {:.1}% over {rounds} aligned rounds, {merged_noise} noise attributes merged, \
             {noise_rounds} rounds spent on noise attributes, {short} runs too short; curve {:.0} -> {:.0} vs {:.0} -> {:.0}",
            100.0 * worst,
            base_curve[0],
            base_curve[rounds - 1],
            noisy_curve[0],
            noisy_curve[rounds - 1]
        ),
    )
}

// ---------------------------------------------------------------------------
// 9

fn hadamard_oracle() -> Outcome {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut rng = RngStream::new(9);
    for i in 0..100 {
        let d = 1 + i % 10;
        let h = random_histogram(&vec![2; d], rng.gen_range(10..5000), &mut rng);
        let schema = h.universe().schema().clone();
        let hm = hadamard_matrix(d as u32 + 1).unwrap();
        for subset in 1usize..(1 << d) {
            let attrs: Vec<usize> = (0..d).filter(|a| subset >> (d - 1 - a) & 1 == 1).collect();
            let q = LinearQuery::parity(&schema, attrs.clone()).unwrap();
            let row = parity_row_index(d, &attrs);
            let product: f64 = (0..hm.side())
                .map(|c| hm.get(row, c) as f64 * h.weights()[c])
                .sum();
            worst = worst.max((q.evaluate(&h).unwrap() - product).abs());
        }
    }
    pass &= worst <= 1e-9;
    let mut orth = true;
    for order in 1..=9u32 {
        let hm = hadamard_matrix(order).unwrap();
        let s = hm.side();
        for r in 0..s {
            for c in 0..s {
                let dot: i64 = (0..s)
                    .map(|k| hm.get(r, k) as i64 * hm.get(c, k) as i64)
                    .sum();
                orth &= dot == if r == c { s as i64 } else { 0 };
            }
        }
    }
    pass &= orth;
    Outcome::check(
        pass,
        format!("worst parity/Hadamard gap {worst:.2e} over 100 histograms; H*H^T = side*I up to side 256: {orth}"),
    )
}
