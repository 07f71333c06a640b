//! The only path from a run to the sensitive data.
//!
//! Every mechanism invocation goes through an [`AccessGate`], which charges
//! the ledger before it reads anything and counts the charged touches.
//! Diagnostic reads (true scores, potentials) are possible only when the
//! gate was opened with diagnostics on, and any such read marks the run as
//! non-private.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AttributeSchema, Histogram, RecordTable, Universe};
use crate::error::{Error, Result};
use crate::mech::{laplace_sample, BudgetLedger};
use crate::query::{par_map, Workload};
use crate::select::select_unmeasured;
use crate::timing::Stopwatch;

/// Something a linear query can be answered against exactly.
pub trait SensitiveSource: Sync {
    fn schema(&self) -> &Arc<AttributeSchema>;

    /// Number of records `n`.
    fn record_count(&self) -> f64;

    /// Exact answers for every workload query, in order.
    fn answers(&self, workload: &Workload) -> Vec<f64>;

    /// The explicit histogram, when the source has one.
    fn histogram(&self) -> Option<&Histogram> {
        None
    }
}

impl SensitiveSource for Histogram {
    fn schema(&self) -> &Arc<AttributeSchema> {
        self.universe().schema()
    }

    fn record_count(&self) -> f64 {
        self.mass()
    }

    fn answers(&self, workload: &Workload) -> Vec<f64> {
        par_map(workload.queries(), |q| q.evaluate_unchecked(self))
    }

    fn histogram(&self) -> Option<&Histogram> {
        Some(self)
    }
}

impl SensitiveSource for RecordTable {
    fn schema(&self) -> &Arc<AttributeSchema> {
        RecordTable::schema(self)
    }

    fn record_count(&self) -> f64 {
        self.len() as f64
    }

    fn answers(&self, workload: &Workload) -> Vec<f64> {
        crate::rowindex::answers(self, workload)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessReport {
    /// Ledger-charged reads of the sensitive data.
    pub charged_touches: usize,
    /// Uncharged diagnostic reads; nonzero means the outputs are not private.
    pub diagnostic_reads: usize,
}

impl AccessReport {
    pub fn is_private(&self) -> bool {
        self.diagnostic_reads == 0
    }
}

pub struct AccessGate<'a, S: ?Sized> {
    source: &'a S,
    workload: &'a Workload,
    ledger: BudgetLedger,
    diagnostics: bool,
    report: AccessReport,
    truth: Option<Vec<f64>>,
    sensitive_time: std::time::Duration,
}

impl<'a, S: SensitiveSource + ?Sized> AccessGate<'a, S> {
    pub fn new(
        source: &'a S,
        workload: &'a Workload,
        ledger: BudgetLedger,
        diagnostics: bool,
    ) -> Self {
        AccessGate {
            source,
            workload,
            ledger,
            diagnostics,
            report: AccessReport::default(),
            truth: None,
            sensitive_time: std::time::Duration::ZERO,
        }
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    /// The explicit universe behind the source. Public metadata, not a read.
    pub fn universe(&self) -> Arc<Universe> {
        match self.source.histogram() {
            Some(h) => h.universe().clone(),
            None => Arc::new(Universe::new(self.source.schema().clone())),
        }
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        self.source.schema()
    }

    pub fn report(&self) -> AccessReport {
        self.report
    }

    pub fn diagnostics_enabled(&self) -> bool {
        self.diagnostics
    }

    /// Wall time spent evaluating queries against the sensitive data.
    pub fn sensitive_time(&self) -> std::time::Duration {
        self.sensitive_time
    }

    pub fn into_parts(self) -> (BudgetLedger, AccessReport) {
        (self.ledger, self.report)
    }

    fn truth(&mut self) -> &[f64] {
        if self.truth.is_none() {
            let watch = Stopwatch::start();
            self.truth = Some(self.source.answers(self.workload));
            self.sensitive_time += watch.elapsed();
        }
        self.truth.as_deref().unwrap()
    }

    fn charge(&mut self, label: String, epsilon: f64) -> Result<()> {
        self.ledger.charge(label, epsilon)?;
        self.report.charged_touches += 1;
        Ok(())
    }

    /// Exponential-mechanism choice of an unmeasured query scored by
    /// `|q(A) - q(B)|`.
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        label: impl Into<String>,
        epsilon: f64,
        approx_answers: &[f64],
        measured: &[bool],
        rng: &mut R,
    ) -> Result<usize> {
        self.select_with(label, epsilon, measured, rng, |truth| {
            approx_answers
                .iter()
                .zip(truth)
                .map(|(a, b)| (a - b).abs())
                .collect()
        })
    }

    /// Exponential-mechanism choice among candidates scored by `score` from
    /// the exact workload answers. The score must have sensitivity one.
    pub fn select_with<R: Rng + ?Sized>(
        &mut self,
        label: impl Into<String>,
        epsilon: f64,
        measured: &[bool],
        rng: &mut R,
        score: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Result<usize> {
        if measured.iter().all(|&m| m) {
            return Err(Error::config("every candidate has already been measured"));
        }
        self.charge(label.into(), epsilon)?;
        let scores = score(self.truth());
        select_unmeasured(&scores, measured, epsilon, rng)
    }

    /// Laplace measurement of one workload query at scale `1/epsilon`.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        label: impl Into<String>,
        epsilon: f64,
        index: usize,
        rng: &mut R,
    ) -> Result<f64> {
        self.charge(label.into(), epsilon)?;
        let truth = self.truth()[index];
        Ok(truth + laplace_sample(1.0 / epsilon, rng))
    }

    /// Laplace measurement of several queries under one charge. The caller
    /// guarantees the queries are disjoint counting queries, so a record
    /// affects at most one of them.
    pub fn measure_disjoint<R: Rng + ?Sized>(
        &mut self,
        label: impl Into<String>,
        epsilon: f64,
        indices: &[usize],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.charge(label.into(), epsilon)?;
        let truth = self.truth();
        let exact: Vec<f64> = indices.iter().map(|&i| truth[i]).collect();
        Ok(exact
            .into_iter()
            .map(|t| t + laplace_sample(1.0 / epsilon, rng))
            .collect())
    }

    /// Every domain count plus independent Laplace noise at scale `1/epsilon`.
    pub fn noisy_histogram<R: Rng + ?Sized>(
        &mut self,
        label: impl Into<String>,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let hist = self
            .source
            .histogram()
            .ok_or_else(|| Error::config("histogram initialization needs an explicit dataset"))?;
        self.charge(label.into(), epsilon)?;
        Ok(hist
            .weights()
            .iter()
            .map(|w| w + laplace_sample(1.0 / epsilon, rng))
            .collect())
    }

    /// Record count plus Laplace noise at scale `1/epsilon`.
    pub fn noisy_count<R: Rng + ?Sized>(
        &mut self,
        label: impl Into<String>,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<f64> {
        self.charge(label.into(), epsilon)?;
        Ok(self.source.record_count() + laplace_sample(1.0 / epsilon, rng))
    }

    /// Exact workload answers, for diagnostics only.
    pub fn diagnostic_answers(&mut self) -> Result<&[f64]> {
        self.require_diagnostics()?;
        Ok(self.truth())
    }

    /// Exact histogram, for diagnostics only.
    pub fn diagnostic_histogram(&mut self) -> Result<&'a Histogram> {
        self.require_diagnostics()?;
        self.source
            .histogram()
            .ok_or_else(|| Error::config("no explicit histogram behind this source"))
    }

    fn require_diagnostics(&mut self) -> Result<()> {
        if !self.diagnostics {
            return Err(Error::config(
                "diagnostic access requested on a private run",
            ));
        }
        self.report.diagnostic_reads += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttributeSchema, Universe};
    use crate::mech::RngStream;

    fn fixture() -> (Histogram, Workload) {
        let u = Universe::from_cardinalities(&[2, 2]).unwrap();
        let h = Histogram::new(u, vec![3.0, 1.0, 0.0, 6.0]).unwrap();
        let schema = AttributeSchema::binary(2);
        let w = crate::query::conjunction_workload(&schema, 2).unwrap();
        (h, w)
    }

    #[test]
    fn every_read_is_charged() {
        let (h, w) = fixture();
        let mut gate = AccessGate::new(&h, &w, BudgetLedger::new(1.0).unwrap(), false);
        let mut rng = RngStream::new(1);
        let approx = vec![0.0; w.len()];
        gate.select("s", 0.25, &approx, &[false, false, false], &mut rng)
            .unwrap();
        gate.measure("m", 0.25, 1, &mut rng).unwrap();
        gate.measure_disjoint("c", 0.25, &[0, 1], &mut rng).unwrap();
        assert_eq!(gate.report().charged_touches, 3);
        assert!((gate.ledger().total() - 0.75).abs() < 1e-15);
        assert!(gate.diagnostic_answers().is_err());
        assert!(gate.report().is_private());

        // the failed charge leaves no trace
        assert!(matches!(
            gate.measure("m", 0.5, 1, &mut rng),
            Err(Error::BudgetExhausted { .. })
        ));
        assert_eq!(gate.report().charged_touches, 3);
    }

    #[test]
    fn diagnostics_mark_the_run() {
        let (h, w) = fixture();
        let mut gate = AccessGate::new(&h, &w, BudgetLedger::new(1.0).unwrap(), true);
        assert_eq!(gate.diagnostic_answers().unwrap(), &[6.0, 7.0, 6.0]);
        assert!(!gate.report().is_private());
        assert_eq!(gate.report().charged_touches, 0);
    }

    #[test]
    fn record_source_matches_histogram_source() {
        let schema = Arc::new(AttributeSchema::binary(3));
        let rows: Vec<[u32; 3]> = (0..50u32)
            .map(|i| [i % 2, (i / 3) % 2, (i / 5) % 2])
            .collect();
        let table = RecordTable::from_rows(schema.clone(), &rows).unwrap();
        let hist = Histogram::from_records(&table).unwrap();
        let w = crate::query::parity_workload(&schema, 3).unwrap();
        assert_eq!(table.answers(&w), hist.answers(&w));
    }

    #[test]
    fn selection_refuses_when_everything_is_measured() {
        let (h, w) = fixture();
        let mut gate = AccessGate::new(&h, &w, BudgetLedger::new(1.0).unwrap(), false);
        let mut rng = RngStream::new(1);
        let err = gate
            .select("s", 0.1, &[0.0; 3], &[true; 3], &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(gate.ledger().total(), 0.0);
    }
}
