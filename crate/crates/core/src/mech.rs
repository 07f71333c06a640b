//! Differential-privacy primitives: the Laplace and exponential mechanisms,
//! an additive budget ledger, and a seeded random stream.
//!
//! Sampling uses ordinary `f64` arithmetic. It is not hardened against
//! floating-point side channels in the Laplace sampler.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when comparing spend to the cap, relative to caps above one.
pub const LEDGER_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub iterations: usize,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, iterations: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::config(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        if iterations == 0 {
            return Err(Error::config("need at least one iteration"));
        }
        Ok(PrivacyParams {
            epsilon,
            delta,
            iterations,
        })
    }

    /// Effective epsilon of the run under the `(epsilon', delta)` view.
    pub fn effective_epsilon(&self) -> Result<f64> {
        if self.delta == 0.0 {
            Ok(self.epsilon)
        } else {
            eps_delta_recharacterize(self.epsilon, self.iterations, self.delta)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
}

/// Additive record of privacy spending against a fixed cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    cap: f64,
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::config(format!(
                "budget cap must be positive, got {cap}"
            )));
        }
        Ok(BudgetLedger {
            cap,
            entries: Vec::new(),
        })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Compensated sum of all charges.
    pub fn total(&self) -> f64 {
        neumaier_sum(self.entries.iter().map(|e| e.epsilon))
    }

    pub fn remaining(&self) -> f64 {
        (self.cap - self.total()).max(0.0)
    }

    /// Records a charge, refusing any that would overrun the cap.
    pub fn charge(&mut self, label: impl Into<String>, epsilon: f64) -> Result<()> {
        let label = label.into();
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::config(format!(
                "charge for `{label}` must be positive, got {epsilon}"
            )));
        }
        let total = self.total();
        if total + epsilon > self.cap + LEDGER_TOLERANCE * self.cap.max(1.0) {
            return Err(Error::BudgetExhausted {
                label,
                requested: epsilon,
                remaining: (self.cap - total).max(0.0),
            });
        }
        self.entries.push(LedgerEntry { label, epsilon });
        Ok(())
    }

    /// Whether a charge of `epsilon` would still fit.
    pub fn can_afford(&self, epsilon: f64) -> bool {
        self.total() + epsilon <= self.cap + LEDGER_TOLERANCE * self.cap.max(1.0)
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Seeded ChaCha20 stream. The same seed always yields the same draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha20";

    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream for sub-task `index`, derived from this seed.
    pub fn fork(&self, index: u64) -> RngStream {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index + 1);
        RngStream {
            seed: rng.next_u64(),
            inner: rng,
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Draws from Laplace(0, `scale`) as a random sign times `-scale * ln U`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    debug_assert!(scale > 0.0);
    // gen() is in [0, 1); flip it so the log argument is never zero
    let u = 1.0 - rng.gen::<f64>();
    let negative = rng.gen::<bool>();
    laplace_from_uniform(scale, u, negative)
}

#[inline]
pub(crate) fn laplace_from_uniform(scale: f64, u: f64, negative: bool) -> f64 {
    let magnitude = -scale * u.ln();
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// Selection probabilities `exp(eps * s_i / 2) / Z`.
pub fn exponential_probabilities(scores: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let weights = stabilized_weights(scores, epsilon)?;
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `exp(eps * (s_i - max s) / 2)`; the largest weight is exactly one.
pub(crate) fn stabilized_weights(scores: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::domain(
            "exponential mechanism needs at least one candidate",
        ));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::domain(format!("score {s} is not finite")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(scores
        .iter()
        .map(|&s| (epsilon * (s - max) / 2.0).exp())
        .collect())
}

/// Cumulative scan: draw `u` uniform on `[0, total)` and return the first
/// index whose running weight reaches it.
pub(crate) fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let mut remaining = total * rng.gen::<f64>();
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            remaining -= w;
            last_positive = i;
            if remaining <= 0.0 {
                return i;
            }
        }
    }
    last_positive
}

/// Samples index `i` with probability proportional to `exp(eps * s_i / 2)`.
///
/// The caller is responsible for the scores having sensitivity one.
pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let weights = stabilized_weights(scores, epsilon)?;
    let total = weights.iter().sum();
    Ok(sample_weighted(&weights, total, rng))
}

/// `(epsilon', delta)` guarantee of a `T`-round, `epsilon`-DP run:
/// `eps * sqrt(2 ln(1/delta) / T) + eps * (e^(eps/T) - 1)`.
pub fn eps_delta_recharacterize(epsilon: f64, iterations: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie strictly in (0, 1), got {delta}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if iterations == 0 {
        return Err(Error::domain("need at least one iteration"));
    }
    let t = iterations as f64;
    Ok(epsilon * (2.0 * (1.0 / delta).ln() / t).sqrt() + epsilon * ((epsilon / t).exp() - 1.0))
}
