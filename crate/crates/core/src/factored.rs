//! Product-form approximation for universes too large to enumerate.
//!
//! The attributes are partitioned into parts, and the approximation is `n`
//! times a product of one probability table per part. Multiplicative weights
//! preserves this form as long as each update touches a single part, so
//! before a query is used for an update, the parts its footprint overlaps are
//! merged by outer product. Parts start as singletons; a workload whose
//! queries each touch one attribute never grows beyond `sum_j |D_j|` entries.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;

use crate::access::{AccessGate, AccessReport, SensitiveSource};
use crate::domain::{
    for_each_box_run, odometer, AttributeSchema, Histogram, Universe, DEFAULT_EXPLICIT_CAP,
};
use crate::error::{Error, Result};
use crate::mech::BudgetLedger;
use crate::mwem::{
    approximation_mass, check_run_inputs, play_round, Approximation, History, IterationTrace,
    MwemConfig, OutputMode, RoundOptions, RoundState,
};
use crate::query::{LinearQuery, Restriction, Workload};
use crate::timing::Stopwatch;

/// Largest table a single part may hold.
pub const DEFAULT_PART_CAP: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq)]
struct Part {
    attributes: Vec<usize>,
    cardinalities: Vec<u32>,
    /// Probabilities, row-major over `attributes`, summing to one.
    table: Vec<f64>,
}

impl Part {
    fn singleton(attribute: usize, cardinality: u32) -> Part {
        Part {
            attributes: vec![attribute],
            cardinalities: vec![cardinality],
            table: vec![1.0 / cardinality as f64; cardinality as usize],
        }
    }

    /// The cells where a cell or range restriction is one, as a box.
    fn support_box(&self, r: &Restriction) -> Option<(Vec<u32>, Vec<u32>)> {
        let mut lo = vec![0u32; self.cardinalities.len()];
        let mut hi: Vec<u32> = self.cardinalities.iter().map(|&c| c - 1).collect();
        match r {
            Restriction::Cell(cs) => cs.iter().for_each(|&(p, v)| (lo[p], hi[p]) = (v, v)),
            Restriction::Range(ivs) => ivs.iter().for_each(|&(p, l, h)| (lo[p], hi[p]) = (l, h)),
            _ => return None,
        }
        Some((lo, hi))
    }

    /// Support of a cell or range restriction on a one-attribute part.
    fn single_span(&self, r: &Restriction) -> Option<(usize, usize)> {
        if self.cardinalities.len() != 1 {
            return None;
        }
        match r {
            Restriction::Cell(cs) => {
                Some(cs.first().map_or((0, self.table.len() - 1), |&(_, v)| {
                    (v as usize, v as usize)
                }))
            }
            Restriction::Range(ivs) => Some(
                ivs.first()
                    .map_or((0, self.table.len() - 1), |&(_, lo, hi)| {
                        (lo as usize, hi as usize)
                    }),
            ),
            _ => None,
        }
    }

    /// `E_part[r]`.
    fn expectation(&self, r: &Restriction) -> f64 {
        if let Some((lo, hi)) = self.single_span(r) {
            return self.table[lo..=hi].iter().sum();
        }
        if let Some((lo, hi)) = self.support_box(r) {
            let mut total = 0.0;
            for_each_box_run(&self.cardinalities, &lo, &hi, |start, len| {
                total += self.table[start..start + len].iter().sum::<f64>();
            });
            return total;
        }
        let mut total = 0.0;
        odometer(&self.cardinalities, self.table.len(), |i, sub| {
            let p = self.table[i];
            if p != 0.0 {
                total += p * r.value(sub);
            }
        });
        total
    }

    /// Multiplies entries by `exp(eta * r)` and renormalizes to one.
    fn reweight(&mut self, r: &Restriction, eta: f64) {
        let up = eta.exp();
        let down = (-eta).exp();
        if let Some((lo, hi)) = self.single_span(r) {
            self.table[lo..=hi].iter_mut().for_each(|p| *p *= up);
            let sum: f64 = self.table.iter().sum();
            self.table.iter_mut().for_each(|p| *p /= sum);
            return;
        }
        if let Some((lo, hi)) = self.support_box(r) {
            let table = &mut self.table;
            for_each_box_run(&self.cardinalities, &lo, &hi, |start, len| {
                table[start..start + len].iter_mut().for_each(|p| *p *= up);
            });
            let sum: f64 = self.table.iter().sum();
            self.table.iter_mut().for_each(|p| *p /= sum);
            return;
        }
        let table = &mut self.table;
        odometer(&self.cardinalities, table.len(), |i, sub| {
            let v = r.value(sub);
            table[i] *= if v == 1.0 {
                up
            } else if v == 0.0 {
                1.0
            } else if v == -1.0 {
                down
            } else {
                (v * eta).exp()
            };
        });
        let sum: f64 = table.iter().sum();
        table.iter_mut().for_each(|p| *p /= sum);
    }
}

/// `n` times a product of per-part distributions.
#[derive(Clone, Debug)]
pub struct FactoredDistribution {
    schema: Arc<AttributeSchema>,
    part_of: Vec<usize>,
    parts: Vec<Part>,
    mass: f64,
    cap: usize,
    peak_entries: usize,
}

impl FactoredDistribution {
    /// Uniform distribution of mass `mass` with every attribute in its own part.
    pub fn new(schema: Arc<AttributeSchema>, mass: f64) -> Result<Self> {
        Self::with_cap(schema, mass, DEFAULT_PART_CAP)
    }

    pub fn with_cap(schema: Arc<AttributeSchema>, mass: f64, cap: usize) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::domain(format!("mass must be positive, got {mass}")));
        }
        let parts: Vec<Part> = (0..schema.len())
            .map(|a| Part::singleton(a, schema.cardinality(a)))
            .collect();
        if let Some(p) = parts.iter().find(|p| p.table.len() > cap) {
            return Err(Error::resource(format!(
                "attribute `{}` alone exceeds the part cap {cap}",
                schema.name(p.attributes[0])
            )));
        }
        let entries = parts.iter().map(|p| p.table.len()).sum();
        Ok(FactoredDistribution {
            part_of: (0..schema.len()).collect(),
            schema,
            parts,
            mass,
            cap,
            peak_entries: entries,
        })
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    /// Attributes of each part, in table order.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.parts.iter().map(|p| p.attributes.clone()).collect()
    }

    /// Index of the part holding `attribute`.
    pub fn part_of(&self, attribute: usize) -> usize {
        self.part_of[attribute]
    }

    pub fn current_entries(&self) -> usize {
        self.parts.iter().map(|p| p.table.len()).sum()
    }

    /// Largest total table size reached so far.
    pub fn peak_entries(&self) -> usize {
        self.peak_entries
    }

    /// Distribution of one part, row-major over `partition()[part]`.
    pub fn part_table(&self, part: usize) -> &[f64] {
        &self.parts[part].table
    }

    fn parts_touching(&self, footprint: &[usize]) -> Vec<usize> {
        let mut ids: Vec<usize> = footprint.iter().map(|&a| self.part_of[a]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Merges every part that overlaps `footprint` into one. The merged part
    /// lists the attributes of the old parts in part order, and its table is
    /// their outer product.
    pub fn partition_update(&mut self, footprint: &[usize]) -> Result<()> {
        for &a in footprint {
            self.schema.check_attr(a)?;
        }
        let ids = self.parts_touching(footprint);
        if ids.len() <= 1 {
            return Ok(());
        }
        let size = ids
            .iter()
            .try_fold(1usize, |acc, &i| acc.checked_mul(self.parts[i].table.len()))
            .filter(|&s| s <= self.cap)
            .ok_or_else(|| {
                Error::resource(format!(
                    "merging {} parts for attributes {:?} exceeds the part cap {}",
                    ids.len(),
                    footprint,
                    self.cap
                ))
            })?;

        let mut merged = Part {
            attributes: Vec::new(),
            cardinalities: Vec::new(),
            table: vec![1.0],
        };
        for &i in &ids {
            let p = &self.parts[i];
            merged.attributes.extend_from_slice(&p.attributes);
            merged.cardinalities.extend_from_slice(&p.cardinalities);
            let mut table = Vec::with_capacity(merged.table.len() * p.table.len());
            for &x in &merged.table {
                table.extend(p.table.iter().map(|&y| x * y));
            }
            merged.table = table;
        }
        debug_assert_eq!(merged.table.len(), size);

        let keep = ids[0];
        for &i in ids[1..].iter().rev() {
            self.parts.remove(i);
        }
        self.parts[keep] = merged;
        for (i, p) in self.parts.iter().enumerate() {
            for &a in &p.attributes {
                self.part_of[a] = i;
            }
        }
        self.peak_entries = self.peak_entries.max(self.current_entries());
        Ok(())
    }

    /// `q(A) = n * prod over touched parts of E_part[q restricted]`.
    pub fn evaluate(&self, query: &LinearQuery) -> Result<f64> {
        query.check_schema(&self.schema)?;
        self.evaluate_unchecked(query)
    }

    fn evaluate_unchecked(&self, query: &LinearQuery) -> Result<f64> {
        let ids = self.parts_touching(&query.footprint());
        if !query.factors() && ids.len() > 1 {
            return Err(Error::domain(
                "a custom query spanning several parts cannot be evaluated without merging",
            ));
        }
        let mut value = self.mass;
        for i in ids {
            let p = &self.parts[i];
            value *= p.expectation(&query.restrict(&p.attributes));
        }
        Ok(value)
    }

    /// Multiplicative-weights step toward `target`, merging parts first when
    /// the query spans several.
    pub fn mw_update(&mut self, query: &LinearQuery, target: f64) -> Result<()> {
        query.check_schema(&self.schema)?;
        let footprint = query.footprint();
        self.partition_update(&footprint)?;
        let Some(&first) = footprint.first() else {
            // constant query; reweighting by a constant changes nothing
            return Ok(());
        };
        let part = &mut self.parts[self.part_of[first]];
        let r = query.restrict(&part.attributes);
        let current = self.mass * part.expectation(&r);
        let eta = (target - current) / (2.0 * self.mass);
        if eta != 0.0 {
            part.reweight(&r, eta);
        }
        Ok(())
    }

    /// Probability of a full tuple under the product.
    pub fn probability(&self, tuple: &[u32]) -> Result<f64> {
        if tuple.len() != self.schema.len() {
            return Err(Error::domain("tuple length does not match the schema"));
        }
        for (a, &v) in tuple.iter().enumerate() {
            self.schema.check_value(a, v)?;
        }
        Ok(self.probability_unchecked(tuple))
    }

    fn probability_unchecked(&self, tuple: &[u32]) -> f64 {
        self.parts
            .iter()
            .map(|p| {
                let index = p
                    .attributes
                    .iter()
                    .zip(&p.cardinalities)
                    .fold(0usize, |acc, (&a, &c)| acc * c as usize + tuple[a] as usize);
                p.table[index]
            })
            .product()
    }

    /// The explicit histogram, when the universe has at most `cap` elements.
    pub fn export_histogram(&self, cap: usize) -> Result<Histogram> {
        let universe = Arc::new(Universe::new(self.schema.clone()));
        let size = universe.explicit_size(cap)?;
        let mut weights = vec![0.0; size];
        universe.for_each_tuple(|i, t| weights[i] = self.mass * self.probability_unchecked(t))?;
        Histogram::new(universe, weights)
    }

    /// Draws `count` records from the product distribution.
    pub fn sample_records<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<crate::domain::RecordTable> {
        let mut table = crate::domain::RecordTable::new(self.schema.clone());
        let mut row = vec![0u32; self.schema.len()];
        let mut sub = Vec::new();
        for _ in 0..count {
            for p in &self.parts {
                let cell = crate::mech::sample_weighted(&p.table, 1.0, rng);
                sub.clear();
                sub.resize(p.attributes.len(), 0);
                let mut rest = cell;
                for k in (0..p.attributes.len()).rev() {
                    let c = p.cardinalities[k] as usize;
                    sub[k] = (rest % c) as u32;
                    rest /= c;
                }
                for (&a, &v) in p.attributes.iter().zip(&sub) {
                    row[a] = v;
                }
            }
            table.push_row(&row)?;
        }
        Ok(table)
    }
}

impl Approximation for FactoredDistribution {
    fn mass(&self) -> f64 {
        self.mass
    }

    fn answer(&self, query: &LinearQuery) -> Result<f64> {
        self.evaluate_unchecked(query)
    }

    /// Queries often share their restriction to a part, so each distinct
    /// (part, restriction) factor is computed once.
    fn answers(&self, workload: &Workload) -> Result<Vec<f64>> {
        let mut index: HashMap<(usize, FactorKey), usize> = HashMap::new();
        let mut factors: Vec<(usize, Restriction)> = Vec::new();
        let mut plans: Vec<Vec<usize>> = Vec::with_capacity(workload.len());
        for q in workload.iter() {
            if !q.factors() {
                plans.push(Vec::new());
                continue;
            }
            let plan = self
                .parts_touching(&q.footprint())
                .into_iter()
                .map(|i| {
                    let r = q.restrict(&self.parts[i].attributes);
                    let key = FactorKey::of(&r);
                    *index.entry((i, key)).or_insert_with(|| {
                        factors.push((i, r));
                        factors.len() - 1
                    })
                })
                .collect();
            plans.push(plan);
        }
        let values = crate::query::par_map(&factors, |(i, r)| self.parts[*i].expectation(r));
        workload
            .iter()
            .zip(plans)
            .map(|(q, plan)| {
                if q.factors() {
                    Ok(plan.iter().fold(self.mass, |acc, &k| acc * values[k]))
                } else {
                    self.evaluate_unchecked(q)
                }
            })
            .collect()
    }

    fn update(&mut self, query: &LinearQuery, target: f64) -> Result<()> {
        self.mw_update(query, target)
    }
}

/// Identity of a factoring restriction; cells and ranges with the same box
/// coincide.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum FactorKey {
    Box(Vec<(usize, u32, u32)>),
    Parity(Vec<usize>),
}

impl FactorKey {
    fn of(r: &Restriction) -> FactorKey {
        match r {
            Restriction::Cell(cs) => {
                let mut b: Vec<_> = cs.iter().map(|&(p, v)| (p, v, v)).collect();
                b.sort_unstable();
                FactorKey::Box(b)
            }
            Restriction::Range(ivs) => {
                let mut b = ivs.clone();
                b.sort_unstable();
                FactorKey::Box(b)
            }
            Restriction::Parity(ps) => {
                let mut ps = ps.clone();
                ps.sort_unstable();
                FactorKey::Parity(ps)
            }
            Restriction::Custom { .. } => unreachable!("custom queries are evaluated directly"),
        }
    }
}

/// Where the time of a factored run went.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EngineTiming {
    pub total: Duration,
    /// Exact query evaluation on the sensitive records.
    pub sensitive_eval: Duration,
    /// Everything else: scoring, sampling, updates, replay.
    pub mw_logic: Duration,
}

#[derive(Clone, Debug)]
pub struct FactoredOutput {
    pub distribution: FactoredDistribution,
    pub history: History,
    pub trace: IterationTrace,
    pub ledger: BudgetLedger,
    pub access: AccessReport,
    pub timing: EngineTiming,
}

/// MWEM with a factored approximation. Accepts any sensitive source, in
/// particular raw records whose universe is far too large to enumerate.
/// Outputs the final approximation; averaging and noisy initialization need
/// an explicit histogram and are rejected.
pub fn run_mwem_factored<S: SensitiveSource + ?Sized, R: Rng + ?Sized>(
    dataset: &S,
    workload: &Workload,
    config: &MwemConfig,
    rng: &mut R,
) -> Result<FactoredOutput> {
    let watch = Stopwatch::start();
    check_run_inputs(dataset.schema(), dataset.record_count(), workload, config)?;
    if config.output == OutputMode::Average {
        return Err(Error::config(
            "the factored engine outputs the final approximation only",
        ));
    }
    if config.init_fraction > 0.0 {
        return Err(Error::config(
            "histogram initialization is not available in the factored engine",
        ));
    }
    if config.adaptive.is_some() {
        return Err(Error::config(
            "adaptive stages are not available in the factored engine",
        ));
    }

    let mut gate = AccessGate::new(
        dataset,
        workload,
        BudgetLedger::new(config.epsilon)?,
        config.diagnostics,
    );
    let n = approximation_mass(&mut gate, config, dataset.record_count(), rng)?;
    let cap = if config.explicit_cap == DEFAULT_EXPLICIT_CAP {
        DEFAULT_PART_CAP
    } else {
        config.explicit_cap
    };
    let initial = FactoredDistribution::with_cap(dataset.schema().clone(), n, cap)?;
    let per_call = config.round_budget() / (2.0 * config.iterations as f64);
    let options = RoundOptions::from(config);

    let mut state = RoundState::new(initial, workload);
    for _ in 0..config.iterations {
        play_round(
            &mut gate, &mut state, workload, options, per_call, per_call, rng,
        )?;
    }

    let sensitive_eval = gate.sensitive_time();
    let (ledger, access) = gate.into_parts();
    let total = watch.elapsed();
    Ok(FactoredOutput {
        distribution: state.approx,
        history: state.history,
        trace: state.trace,
        ledger,
        access,
        timing: EngineTiming {
            total,
            sensitive_eval,
            mw_logic: total.saturating_sub(sensitive_eval),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{conjunction_workload, parity_workload};

    fn schema(cards: &[u32]) -> Arc<AttributeSchema> {
        Arc::new(AttributeSchema::from_cardinalities(cards).unwrap())
    }

    #[test]
    fn uniform_start_matches_explicit_uniform() {
        let s = schema(&[2, 3, 2]);
        let f = FactoredDistribution::new(s.clone(), 12.0).unwrap();
        let h = f.export_histogram(1 << 10).unwrap();
        assert!(h.weights().iter().all(|&w| (w - 1.0).abs() < 1e-12));
        assert_eq!(f.current_entries(), 7);
    }

    #[test]
    fn merge_is_outer_product_in_part_order() {
        let s = schema(&[2, 3, 2]);
        let mut f = FactoredDistribution::new(s.clone(), 1.0).unwrap();
        f.parts[0].table = vec![0.25, 0.75];
        f.parts[2].table = vec![0.1, 0.9];
        f.partition_update(&[2, 0]).unwrap();
        assert_eq!(f.partition(), vec![vec![0, 2], vec![1]]);
        let t = f.part_table(0);
        let expect = [0.025, 0.225, 0.075, 0.675];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(f.part_of(2), 0);
        assert_eq!(f.part_of(1), 1);
        assert_eq!(f.peak_entries(), 7);
        // the joint distribution is unchanged by merging
        assert!((f.probability(&[1, 2, 0]).unwrap() - 0.075 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn updates_agree_with_the_explicit_histogram() {
        let s = schema(&[2, 2, 2, 2]);
        let mut f = FactoredDistribution::new(s.clone(), 50.0).unwrap();
        let mut h = f.export_histogram(1 << 10).unwrap();
        let mut queries = parity_workload(&s, 2).unwrap().queries().to_vec();
        queries.extend(
            conjunction_workload(&s, 3)
                .unwrap()
                .queries()
                .iter()
                .cloned(),
        );
        for (k, q) in queries.iter().enumerate() {
            let target = (k as f64 * 7.3) % 40.0 - 10.0;
            f.mw_update(q, target).unwrap();
            h.update(q, target).unwrap();
            for q2 in &queries {
                let a = f.evaluate(q2).unwrap();
                let b = q2.evaluate(&h).unwrap();
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let s = schema(&[16, 16, 16]);
        let mut f = FactoredDistribution::with_cap(s.clone(), 1.0, 300).unwrap();
        f.partition_update(&[0, 1]).unwrap();
        let err = f.partition_update(&[1, 2]).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        assert_eq!(f.part_count(), 2);
    }

    #[test]
    fn huge_universes_stay_factored() {
        let s = Arc::new(AttributeSchema::binary(200));
        let f = FactoredDistribution::new(s.clone(), 10.0).unwrap();
        assert!(matches!(
            f.export_histogram(1 << 20),
            Err(Error::Resource(_))
        ));
        let q = LinearQuery::cell(&s, vec![(3, 1), (150, 1)]).unwrap();
        assert!((f.evaluate(&q).unwrap() - 2.5).abs() < 1e-12);
    }
}
