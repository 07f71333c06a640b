//! Accuracy measures for synthetic histograms.

use serde::{Deserialize, Serialize};

use crate::domain::Histogram;
use crate::error::{Error, Result};
use crate::query::{marginal_unchecked, CuboidGroup, Workload};

/// Summary of `|q(A) - q(B)|` over a workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub errors: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub mean_squared: f64,
}

impl ErrorReport {
    pub fn from_answers(approx: &[f64], truth: &[f64]) -> Result<Self> {
        if approx.len() != truth.len() || truth.is_empty() {
            return Err(Error::domain(format!(
                "answer vectors of lengths {} and {} cannot be compared",
                approx.len(),
                truth.len()
            )));
        }
        let errors: Vec<f64> = approx
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let k = errors.len() as f64;
        Ok(ErrorReport {
            max: errors.iter().copied().fold(0.0, f64::max),
            mean: errors.iter().sum::<f64>() / k,
            mean_squared: errors.iter().map(|e| e * e).sum::<f64>() / k,
            errors,
        })
    }
}

pub fn error_report(
    approx: &Histogram,
    truth: &Histogram,
    workload: &Workload,
) -> Result<ErrorReport> {
    approx.check_same_universe(truth)?;
    ErrorReport::from_answers(&workload.evaluate(approx)?, &workload.evaluate(truth)?)
}

/// `max_q |q(A) - q(B)|`.
pub fn max_error(approx: &Histogram, truth: &Histogram, workload: &Workload) -> Result<f64> {
    Ok(error_report(approx, truth, workload)?.max)
}

/// Mean of `(q(A) - q(B))^2`.
pub fn avg_squared_error(
    approx: &Histogram,
    truth: &Histogram,
    workload: &Workload,
) -> Result<f64> {
    Ok(error_report(approx, truth, workload)?.mean_squared)
}

/// `sum_x B(x)/n ln(B(x) / A(x))` in nats, with `0 ln 0 = 0`. Both
/// histograms must carry the same mass.
pub fn relative_entropy(truth: &Histogram, approx: &Histogram) -> Result<f64> {
    truth.check_same_universe(approx)?;
    let n = truth.mass();
    if !(n > 0.0) || (approx.mass() - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::domain(format!(
            "relative entropy needs equal positive masses, got {} and {}",
            n,
            approx.mass()
        )));
    }
    let mut total = 0.0;
    for (index, (&b, &a)) in truth.weights().iter().zip(approx.weights()).enumerate() {
        if b == 0.0 {
            continue;
        }
        if a == 0.0 {
            return Err(Error::Divergence { index });
        }
        total += b / n * (b / a).ln();
    }
    Ok(total)
}

/// Per-cuboid average absolute cell error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuboidErrorReport {
    pub per_cuboid: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

/// For each cuboid, the mean over its cells of `|cell(A) - cell(B)|`.
pub fn cuboid_errors(
    approx: &Histogram,
    truth: &Histogram,
    groups: &[CuboidGroup],
) -> Result<CuboidErrorReport> {
    approx.check_same_universe(truth)?;
    if groups.is_empty() {
        return Err(Error::domain("no cuboids given"));
    }
    let schema = truth.universe().schema();
    for g in groups {
        for &a in &g.attributes {
            schema.check_attr(a)?;
        }
    }
    let per_cuboid: Vec<f64> = groups
        .iter()
        .map(|g| cuboid_error_unchecked(approx, truth, g))
        .collect();
    Ok(CuboidErrorReport {
        max: per_cuboid.iter().copied().fold(0.0, f64::max),
        mean: per_cuboid.iter().sum::<f64>() / per_cuboid.len() as f64,
        per_cuboid,
    })
}

pub(crate) fn cuboid_error_unchecked(
    approx: &Histogram,
    truth: &Histogram,
    group: &CuboidGroup,
) -> f64 {
    let ma = marginal_unchecked(approx, &group.attributes);
    let mb = marginal_unchecked(truth, &group.attributes);
    let l1: f64 = ma
        .counts
        .iter()
        .zip(&mb.counts)
        .map(|(x, y)| (x - y).abs())
        .sum();
    l1 / ma.counts.len() as f64
}
