//! Exponential-mechanism selection that skips already-measured candidates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mech::{sample_weighted, stabilized_weights};

/// Below this share of the total weight, rejection sampling is replaced by a
/// direct draw over the unmeasured candidates.
const REJECTION_MIN_SHARE: f64 = 1e-3;

/// Draws from the exponential mechanism over all candidates and redraws
/// until an unmeasured one comes up.
///
/// Conditioning on "unmeasured" gives the same law as running the mechanism
/// over the unmeasured candidates alone, so when they hold only a sliver of
/// the weight the loop is short-circuited into that direct draw.
pub(crate) fn select_unmeasured<R: Rng + ?Sized>(
    scores: &[f64],
    measured: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    debug_assert_eq!(scores.len(), measured.len());
    if measured.iter().all(|&m| m) {
        return Err(Error::config("every candidate has already been measured"));
    }
    let weights = stabilized_weights(scores, epsilon)?;
    let total: f64 = weights.iter().sum();
    let open: f64 = weights
        .iter()
        .zip(measured)
        .filter(|(_, &m)| !m)
        .map(|(w, _)| w)
        .sum();
    if open >= REJECTION_MIN_SHARE * total {
        loop {
            let i = sample_weighted(&weights, total, rng);
            if !measured[i] {
                return Ok(i);
            }
        }
    }
    let open_scores: Vec<f64> = scores
        .iter()
        .zip(measured)
        .map(|(&s, &m)| if m { f64::NEG_INFINITY } else { s })
        .collect();
    let max = open_scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let restricted: Vec<f64> = open_scores
        .iter()
        .map(|&s| {
            if s == f64::NEG_INFINITY {
                0.0
            } else {
                (epsilon * (s - max) / 2.0).exp()
            }
        })
        .collect();
    let total: f64 = restricted.iter().sum();
    Ok(sample_weighted(&restricted, total, rng))
}
