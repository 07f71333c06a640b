//! Linear queries and workloads.
//!
//! A linear query maps each domain element to a value in `[-1, +1]` and is
//! extended to a weighted dataset by summation. The structured kinds (range,
//! parity, cell) also know their attribute footprint, which is what lets the
//! factored engine evaluate them part by part.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AttributeSchema, Histogram, RecordTable, Universe};
use crate::error::{Error, Result};

/// Custom queries carry a full value table, so they are limited to small universes.
pub const CUSTOM_QUERY_MAX_DOMAIN: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Range,
    Parity,
    Cell,
    Custom,
}

/// Inclusive interval `lo..=hi` on one attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub attribute: usize,
    pub lo: u32,
    pub hi: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CustomQuery {
    values: Arc<[f64]>,
    strides: Arc<[usize]>,
}

impl CustomQuery {
    /// Value table in universe index order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LinearQuery {
    /// Indicator of a cross product of intervals. Attributes without an
    /// interval are unconstrained.
    Range { intervals: Vec<Interval> },
    /// `+1` when an even number of the listed binary attributes are set, `-1` otherwise.
    Parity { attributes: Vec<usize> },
    /// Indicator of a conjunction `attr = value`.
    Cell { assignment: Vec<(usize, u32)> },
    /// Explicit value table indexed like the universe.
    Custom(CustomQuery),
}

impl LinearQuery {
    pub fn range(schema: &AttributeSchema, intervals: Vec<Interval>) -> Result<Self> {
        let mut kept = Vec::with_capacity(intervals.len());
        for iv in intervals {
            schema.check_value(iv.attribute, iv.hi)?;
            if iv.lo > iv.hi {
                return Err(Error::domain(format!(
                    "empty interval {}..={} on attribute `{}`",
                    iv.lo,
                    iv.hi,
                    schema.name(iv.attribute)
                )));
            }
            if kept.iter().any(|k: &Interval| k.attribute == iv.attribute) {
                return Err(Error::domain(format!(
                    "attribute `{}` constrained twice",
                    schema.name(iv.attribute)
                )));
            }
            // full-width intervals do not constrain anything
            if !(iv.lo == 0 && iv.hi + 1 == schema.cardinality(iv.attribute)) {
                kept.push(iv);
            }
        }
        kept.sort_by_key(|iv| iv.attribute);
        Ok(LinearQuery::Range { intervals: kept })
    }

    pub fn parity(schema: &AttributeSchema, attributes: Vec<usize>) -> Result<Self> {
        let attributes = sorted_distinct(schema, attributes)?;
        for &a in &attributes {
            if schema.cardinality(a) != 2 {
                return Err(Error::domain(format!(
                    "parity query needs binary attributes, `{}` has cardinality {}",
                    schema.name(a),
                    schema.cardinality(a)
                )));
            }
        }
        Ok(LinearQuery::Parity { attributes })
    }

    pub fn cell(schema: &AttributeSchema, mut assignment: Vec<(usize, u32)>) -> Result<Self> {
        for &(a, v) in &assignment {
            schema.check_value(a, v)?;
        }
        assignment.sort_by_key(|&(a, _)| a);
        if assignment.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("cell query assigns an attribute twice"));
        }
        Ok(LinearQuery::Cell { assignment })
    }

    pub fn custom(universe: &Universe, values: Vec<f64>) -> Result<Self> {
        let size = universe.size()?;
        if size > CUSTOM_QUERY_MAX_DOMAIN {
            return Err(Error::resource(format!(
                "custom queries need |D| <= {CUSTOM_QUERY_MAX_DOMAIN}, got {size}"
            )));
        }
        if values.len() != size {
            return Err(Error::domain(format!(
                "custom query has {} values for a universe of size {size}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!(
                "custom query value {v} outside [-1, 1]"
            )));
        }
        let cards = universe.schema().cardinalities();
        let mut strides = vec![1usize; cards.len()];
        for i in (0..cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1] as usize;
        }
        Ok(LinearQuery::Custom(CustomQuery {
            values: values.into(),
            strides: strides.into(),
        }))
    }

    pub fn kind(&self) -> QueryKind {
        match self {
            LinearQuery::Range { .. } => QueryKind::Range,
            LinearQuery::Parity { .. } => QueryKind::Parity,
            LinearQuery::Cell { .. } => QueryKind::Cell,
            LinearQuery::Custom(_) => QueryKind::Custom,
        }
    }

    /// Value on a full record.
    #[inline]
    pub fn value(&self, tuple: &[u32]) -> f64 {
        match self {
            LinearQuery::Range { intervals } => {
                let inside = intervals.iter().all(|iv| {
                    let v = tuple[iv.attribute];
                    iv.lo <= v && v <= iv.hi
                });
                inside as u8 as f64
            }
            LinearQuery::Parity { attributes } => {
                let ones: u32 = attributes.iter().map(|&a| tuple[a]).sum();
                if ones % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LinearQuery::Cell { assignment } => {
                assignment.iter().all(|&(a, v)| tuple[a] == v) as u8 as f64
            }
            LinearQuery::Custom(c) => {
                let index: usize = tuple
                    .iter()
                    .zip(c.strides.iter())
                    .map(|(&v, &s)| v as usize * s)
                    .sum();
                c.values[index]
            }
        }
    }

    /// Sorted attributes the query depends on.
    pub fn footprint(&self) -> Vec<usize> {
        match self {
            LinearQuery::Range { intervals } => intervals.iter().map(|iv| iv.attribute).collect(),
            LinearQuery::Parity { attributes } => attributes.clone(),
            LinearQuery::Cell { assignment } => assignment.iter().map(|&(a, _)| a).collect(),
            LinearQuery::Custom(c) => (0..c.strides.len()).collect(),
        }
    }

    /// True for kinds whose value is a product of per-attribute factors.
    pub fn factors(&self) -> bool {
        !matches!(self, LinearQuery::Custom(_))
    }

    /// Smallest and largest value the query takes.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            LinearQuery::Range { .. } | LinearQuery::Cell { .. } => (0.0, 1.0),
            LinearQuery::Parity { .. } => (-1.0, 1.0),
            LinearQuery::Custom(c) => c
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }

    /// Counting queries take values in `{0, 1}`.
    pub fn is_counting(&self) -> bool {
        match self {
            LinearQuery::Range { .. } | LinearQuery::Cell { .. } => true,
            LinearQuery::Parity { .. } => false,
            LinearQuery::Custom(c) => c.values.iter().all(|&v| v == 0.0 || v == 1.0),
        }
    }

    /// Checks that the query is well formed for `schema`.
    pub fn check_schema(&self, schema: &AttributeSchema) -> Result<()> {
        match self {
            LinearQuery::Range { intervals } => {
                for iv in intervals {
                    schema.check_value(iv.attribute, iv.hi)?;
                }
            }
            LinearQuery::Parity { attributes } => {
                for &a in attributes {
                    schema.check_attr(a)?;
                    if schema.cardinality(a) != 2 {
                        return Err(Error::domain(format!(
                            "parity on non-binary attribute `{}`",
                            schema.name(a)
                        )));
                    }
                }
            }
            LinearQuery::Cell { assignment } => {
                for &(a, v) in assignment {
                    schema.check_value(a, v)?;
                }
            }
            LinearQuery::Custom(c) => {
                let size: usize = schema.cardinalities().iter().map(|&c| c as usize).product();
                if c.strides.len() != schema.len() || c.values.len() != size {
                    return Err(Error::domain(
                        "custom query was built for a different universe",
                    ));
                }
            }
        }
        Ok(())
    }

    /// `q(A) = sum_x q(x) A(x)`.
    pub fn evaluate(&self, hist: &Histogram) -> Result<f64> {
        self.check_schema(hist.universe().schema())?;
        Ok(self.evaluate_unchecked(hist))
    }

    /// Per-attribute inclusive bounds of the set a counting query selects,
    /// for the kinds whose support is a box.
    pub(crate) fn support_box(&self, schema: &AttributeSchema) -> Option<(Vec<u32>, Vec<u32>)> {
        let mut lo = vec![0u32; schema.len()];
        let mut hi: Vec<u32> = schema.cardinalities().iter().map(|&c| c - 1).collect();
        match self {
            LinearQuery::Range { intervals } => {
                for iv in intervals {
                    lo[iv.attribute] = iv.lo;
                    hi[iv.attribute] = iv.hi;
                }
            }
            LinearQuery::Cell { assignment } => {
                for &(a, v) in assignment {
                    lo[a] = v;
                    hi[a] = v;
                }
            }
            _ => return None,
        }
        Some((lo, hi))
    }

    pub(crate) fn evaluate_unchecked(&self, hist: &Histogram) -> f64 {
        let weights = hist.weights();
        let mut total = 0.0;
        if let LinearQuery::Custom(c) = self {
            return c.values.iter().zip(weights).map(|(q, w)| q * w).sum();
        }
        if let Some((lo, hi)) = self.support_box(hist.universe().schema()) {
            hist.universe()
                .for_each_in_box(&lo, &hi, |i| total += weights[i]);
            return total;
        }
        hist.universe()
            .for_each_tuple(|i, t| {
                let w = weights[i];
                if w != 0.0 {
                    total += self.value(t) * w;
                }
            })
            .expect("histogram universes are enumerable");
        total
    }

    /// `q(B)` computed by streaming over raw records.
    pub fn evaluate_records(&self, table: &RecordTable) -> Result<f64> {
        self.check_schema(table.schema())?;
        Ok(self.evaluate_records_unchecked(table))
    }

    pub(crate) fn evaluate_records_unchecked(&self, table: &RecordTable) -> f64 {
        const BLOCK: usize = 1 << 14;
        let blocks = table.len().div_ceil(BLOCK);
        let block_sum = |b: usize| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(table.len());
            self.sum_rows(table, start, end)
        };
        // partial sums are combined in block order, whatever the scheduling
        #[cfg(feature = "parallel")]
        let partials: Vec<f64> = {
            use rayon::prelude::*;
            (0..blocks).into_par_iter().map(block_sum).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let partials: Vec<f64> = (0..blocks).map(block_sum).collect();
        partials.iter().sum()
    }

    pub(crate) fn sum_rows(&self, table: &RecordTable, start: usize, end: usize) -> f64 {
        match self {
            LinearQuery::Range { intervals } => (start..end)
                .filter(|&r| {
                    intervals.iter().all(|iv| {
                        let v = table.value(r, iv.attribute);
                        iv.lo <= v && v <= iv.hi
                    })
                })
                .count() as f64,
            LinearQuery::Cell { assignment } => (start..end)
                .filter(|&r| assignment.iter().all(|&(a, v)| table.value(r, a) == v))
                .count() as f64,
            LinearQuery::Parity { attributes } => {
                let odd = (start..end)
                    .filter(|&r| {
                        attributes.iter().map(|&a| table.value(r, a)).sum::<u32>() % 2 == 1
                    })
                    .count();
                (end - start) as f64 - 2.0 * odd as f64
            }
            LinearQuery::Custom(_) => {
                let mut row = vec![0u32; table.schema().len()];
                (start..end)
                    .map(|r| {
                        table.fill_row(r, &mut row);
                        self.value(&row)
                    })
                    .sum()
            }
        }
    }

    /// Restriction of the query to the attributes `part` (listed in the
    /// part's own order). For factoring kinds the query value is the product
    /// of its restrictions over any partition of the attributes.
    pub fn restrict(&self, part: &[usize]) -> Restriction {
        let pos = |a: usize| part.iter().position(|&p| p == a);
        match self {
            LinearQuery::Range { intervals } => Restriction::Range(
                intervals
                    .iter()
                    .filter_map(|iv| pos(iv.attribute).map(|p| (p, iv.lo, iv.hi)))
                    .collect(),
            ),
            LinearQuery::Parity { attributes } => {
                Restriction::Parity(attributes.iter().filter_map(|&a| pos(a)).collect())
            }
            LinearQuery::Cell { assignment } => Restriction::Cell(
                assignment
                    .iter()
                    .filter_map(|&(a, v)| pos(a).map(|p| (p, v)))
                    .collect(),
            ),
            LinearQuery::Custom(c) => Restriction::Custom {
                terms: part
                    .iter()
                    .enumerate()
                    .map(|(p, &a)| (p, c.strides[a]))
                    .collect(),
                values: c.values.clone(),
            },
        }
    }
}

fn sorted_distinct(schema: &AttributeSchema, mut attrs: Vec<usize>) -> Result<Vec<usize>> {
    for &a in &attrs {
        schema.check_attr(a)?;
    }
    attrs.sort_unstable();
    if attrs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("attribute listed twice"));
    }
    Ok(attrs)
}

/// A query's factor on a sub-tuple over a subset of attributes.
#[derive(Clone, Debug)]
pub enum Restriction {
    Range(Vec<(usize, u32, u32)>),
    Parity(Vec<usize>),
    Cell(Vec<(usize, u32)>),
    Custom {
        terms: Vec<(usize, usize)>,
        values: Arc<[f64]>,
    },
}

impl Restriction {
    #[inline]
    pub fn value(&self, sub: &[u32]) -> f64 {
        match self {
            Restriction::Range(ivs) => {
                ivs.iter().all(|&(p, lo, hi)| lo <= sub[p] && sub[p] <= hi) as u8 as f64
            }
            Restriction::Parity(ps) => {
                if ps.iter().map(|&p| sub[p]).sum::<u32>() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Restriction::Cell(cs) => cs.iter().all(|&(p, v)| sub[p] == v) as u8 as f64,
            Restriction::Custom { terms, values } => {
                values[terms
                    .iter()
                    .map(|&(p, s)| sub[p] as usize * s)
                    .sum::<usize>()]
            }
        }
    }

    /// True when the factor is identically one.
    pub fn is_trivial(&self) -> bool {
        match self {
            Restriction::Range(v) => v.is_empty(),
            Restriction::Parity(v) => v.is_empty(),
            Restriction::Cell(v) => v.is_empty(),
            Restriction::Custom { .. } => false,
        }
    }
}

/// An ordered, non-empty list of queries. A query's position is its identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Workload {
    queries: Vec<LinearQuery>,
    label: String,
}

impl Workload {
    pub fn new(label: impl Into<String>, queries: Vec<LinearQuery>) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::domain("workload must contain at least one query"));
        }
        Ok(Workload {
            queries,
            label: label.into(),
        })
    }

    pub fn queries(&self) -> &[LinearQuery] {
        &self.queries
    }

    pub fn get(&self, index: usize) -> &LinearQuery {
        &self.queries[index]
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LinearQuery> {
        self.queries.iter()
    }

    pub fn check_schema(&self, schema: &AttributeSchema) -> Result<()> {
        for (i, q) in self.queries.iter().enumerate() {
            q.check_schema(schema).map_err(|e| {
                Error::domain(format!("query {i} in workload `{}`: {e}", self.label))
            })?;
        }
        Ok(())
    }

    /// Evaluates every query against `hist`, in workload order.
    pub fn evaluate(&self, hist: &Histogram) -> Result<Vec<f64>> {
        self.check_schema(hist.universe().schema())?;
        Ok(par_map(&self.queries, |q| q.evaluate_unchecked(hist)))
    }

    pub fn evaluate_records(&self, table: &RecordTable) -> Result<Vec<f64>> {
        self.check_schema(table.schema())?;
        Ok(crate::rowindex::answers(table, self))
    }
}

impl<'a> IntoIterator for &'a Workload {
    type Item = &'a LinearQuery;
    type IntoIter = std::slice::Iter<'a, LinearQuery>;

    fn into_iter(self) -> Self::IntoIter {
        self.queries.iter()
    }
}

/// Order-preserving map, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// `count` range queries; each attribute's interval is drawn uniformly from
/// all `lo <= hi` pairs.
pub fn random_range_workload<R: Rng + ?Sized>(
    schema: &AttributeSchema,
    count: usize,
    rng: &mut R,
) -> Result<Workload> {
    if count == 0 {
        return Err(Error::domain("workload must contain at least one query"));
    }
    let mut queries = Vec::with_capacity(count);
    for _ in 0..count {
        let intervals = (0..schema.len())
            .map(|a| {
                let (lo, hi) = uniform_interval(schema.cardinality(a), rng);
                Interval {
                    attribute: a,
                    lo,
                    hi,
                }
            })
            .collect();
        queries.push(LinearQuery::range(schema, intervals)?);
    }
    Workload::new(format!("random-range-{count}"), queries)
}

/// Uniform draw from the `n(n+1)/2` intervals of `0..n`.
pub(crate) fn uniform_interval<R: Rng + ?Sized>(n: u32, rng: &mut R) -> (u32, u32) {
    let n = n as u64;
    let mut r = rng.gen_range(0..n * (n + 1) / 2);
    // intervals starting at lo number n - lo
    let mut lo = 0;
    while r >= n - lo {
        r -= n - lo;
        lo += 1;
    }
    (lo as u32, (lo + r) as u32)
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        let Some(i) = (0..k).rev().find(|&i| current[i] != i + n - k) else {
            return out;
        };
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// Subsets of sizes `min..=max`, by size then lexicographically.
fn subsets_by_size(n: usize, min: usize, max: usize) -> impl Iterator<Item = Vec<usize>> {
    (min..=max.min(n)).flat_map(move |k| combinations(n, k))
}

/// One parity query per attribute subset of size `1..=max_order`.
pub fn parity_workload(schema: &AttributeSchema, max_order: usize) -> Result<Workload> {
    if !schema.is_binary() {
        let bad = (0..schema.len())
            .find(|&a| schema.cardinality(a) != 2)
            .unwrap();
        return Err(Error::domain(format!(
            "parity workload needs binary attributes, `{}` has cardinality {}",
            schema.name(bad),
            schema.cardinality(bad)
        )));
    }
    let queries = subsets_by_size(schema.len(), 1, max_order)
        .map(|s| LinearQuery::Parity { attributes: s })
        .collect();
    Workload::new(format!("parity-k{max_order}"), queries)
}

/// Counting queries "all attributes in S are set" for binary subsets S of
/// size `1..=max_order`.
pub fn conjunction_workload(schema: &AttributeSchema, max_order: usize) -> Result<Workload> {
    if !schema.is_binary() {
        return Err(Error::domain(
            "conjunction workload needs binary attributes",
        ));
    }
    let queries = subsets_by_size(schema.len(), 1, max_order)
        .map(|s| LinearQuery::Cell {
            assignment: s.into_iter().map(|a| (a, 1)).collect(),
        })
        .collect();
    Workload::new(format!("conjunction-k{max_order}"), queries)
}

/// A marginal's cells: one cell query per value combination of `attributes`.
#[derive(Clone, Debug, PartialEq)]
pub struct CuboidGroup {
    pub attributes: Vec<usize>,
    pub cells: Vec<LinearQuery>,
}

impl CuboidGroup {
    pub fn new(schema: &AttributeSchema, attributes: Vec<usize>) -> Result<Self> {
        let attributes = sorted_distinct(schema, attributes)?;
        let cards: Vec<u32> = attributes.iter().map(|&a| schema.cardinality(a)).collect();
        let size = cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c as usize))
            .ok_or_else(|| Error::resource("cuboid has too many cells"))?;
        let mut cells = Vec::with_capacity(size);
        crate::domain::odometer(&cards, size, |_, t| {
            cells.push(LinearQuery::Cell {
                assignment: attributes.iter().copied().zip(t.iter().copied()).collect(),
            });
        });
        Ok(CuboidGroup { attributes, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// All cuboids over attribute subsets of size up to `max_order`; the empty
/// subset (total count) is included only when asked for.
pub fn cuboid_workload(
    schema: &AttributeSchema,
    max_order: usize,
    include_empty: bool,
) -> Result<Vec<CuboidGroup>> {
    if max_order > schema.len() {
        return Err(Error::domain(format!(
            "cuboid order {max_order} exceeds the {} available attributes",
            schema.len()
        )));
    }
    let min = if include_empty { 0 } else { 1 };
    subsets_by_size(schema.len(), min, max_order)
        .map(|s| CuboidGroup::new(schema, s))
        .collect()
}

/// Square `±1` matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignMatrix {
    side: usize,
    entries: Vec<i8>,
}

impl SignMatrix {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.side + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.side..(row + 1) * self.side]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.side);
        (0..self.side)
            .map(|r| self.row(r).iter().zip(v).map(|(&h, &x)| h as f64 * x).sum())
            .collect()
    }
}

pub const HADAMARD_MAX_SIDE: usize = 1 << 13;

/// Sylvester's recursion `H_{m+1} = [[H_m, H_m], [H_m, -H_m]]`, `H_1 = [1]`;
/// the result has side `2^(order-1)`.
pub fn hadamard_matrix(order: u32) -> Result<SignMatrix> {
    if order == 0 {
        return Err(Error::domain("hadamard order starts at 1"));
    }
    if order - 1 > HADAMARD_MAX_SIDE.trailing_zeros() {
        return Err(Error::resource(format!(
            "hadamard order {order} exceeds the maximum side {HADAMARD_MAX_SIDE}"
        )));
    }
    let mut side = 1;
    let mut entries = vec![1i8];
    for _ in 1..order {
        let next = side * 2;
        let mut grown = vec![0i8; next * next];
        for r in 0..side {
            for c in 0..side {
                let h = entries[r * side + c];
                grown[r * next + c] = h;
                grown[r * next + c + side] = h;
                grown[(r + side) * next + c] = h;
                grown[(r + side) * next + c + side] = -h;
            }
        }
        side = next;
        entries = grown;
    }
    Ok(SignMatrix { side, entries })
}

/// Row of the order-`(d+1)` Hadamard matrix that equals the value table of
/// the parity query on `attributes` over `d` binary attributes.
pub fn parity_row_index(d: usize, attributes: &[usize]) -> usize {
    attributes.iter().map(|&a| 1usize << (d - 1 - a)).sum()
}

/// Cell counts of a marginal, row-major over `attributes` in the given order.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    pub attributes: Vec<usize>,
    pub cardinalities: Vec<u32>,
    pub counts: Vec<f64>,
}

pub fn marginal_of(hist: &Histogram, attributes: &[usize]) -> Result<Marginal> {
    let schema = hist.universe().schema();
    if attributes.is_empty() {
        return Err(Error::domain("marginal needs at least one attribute"));
    }
    for (i, &a) in attributes.iter().enumerate() {
        schema.check_attr(a)?;
        if attributes[..i].contains(&a) {
            return Err(Error::domain(format!(
                "attribute `{}` listed twice",
                schema.name(a)
            )));
        }
    }
    Ok(marginal_unchecked(hist, attributes))
}

pub(crate) fn marginal_unchecked(hist: &Histogram, attributes: &[usize]) -> Marginal {
    let schema = hist.universe().schema();
    let cardinalities: Vec<u32> = attributes.iter().map(|&a| schema.cardinality(a)).collect();
    let mut strides = vec![1usize; attributes.len()];
    for i in (0..attributes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * cardinalities[i + 1] as usize;
    }
    let cells: usize = cardinalities.iter().map(|&c| c as usize).product();
    let mut counts = vec![0.0; cells];
    let weights = hist.weights();
    hist.universe()
        .for_each_tuple(|i, t| {
            let cell: usize = attributes
                .iter()
                .zip(&strides)
                .map(|(&a, &s)| t[a] as usize * s)
                .sum();
            counts[cell] += weights[i];
        })
        .expect("histogram universes are enumerable");
    Marginal {
        attributes: attributes.to_vec(),
        cardinalities,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Universe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hist(cards: &[u32], weights: Vec<f64>) -> Histogram {
        Histogram::new(Universe::from_cardinalities(cards).unwrap(), weights).unwrap()
    }

    #[test]
    fn range_sum_on_line() {
        let h = hist(&[4], vec![1.0, 2.0, 3.0, 4.0]);
        let schema = h.universe().schema().clone();
        // domain {1..4} maps to indices 0..4, so [2,3] is 1..=2
        let q = LinearQuery::range(
            &schema,
            vec![Interval {
                attribute: 0,
                lo: 1,
                hi: 2,
            }],
        )
        .unwrap();
        assert_eq!(q.evaluate(&h).unwrap(), 5.0);
    }

    #[test]
    fn zero_custom_query() {
        let h = hist(&[2, 3], vec![1.0, 5.0, 0.0, 2.0, 7.0, 1.0]);
        let q = LinearQuery::custom(h.universe(), vec![0.0; 6]).unwrap();
        assert_eq!(q.evaluate(&h).unwrap(), 0.0);
    }

    #[test]
    fn parity_vanishes_on_uniform() {
        for d in 1..=10usize {
            let u = Universe::from_cardinalities(&vec![2; d]).unwrap();
            let h = Histogram::uniform(u, 1000.0).unwrap();
            for k in 1..=d.min(3) {
                for s in combinations(d, k) {
                    // brute force: count even and odd settings directly
                    let mut even = 0i64;
                    let mut odd = 0i64;
                    for x in 0..(1usize << d) {
                        let ones = s.iter().filter(|&&a| x >> (d - 1 - a) & 1 == 1).count();
                        if ones % 2 == 0 {
                            even += 1
                        } else {
                            odd += 1
                        }
                    }
                    assert_eq!(even, odd);
                    let q = LinearQuery::Parity { attributes: s };
                    assert!(q.evaluate(&h).unwrap().abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn custom_values_must_be_bounded() {
        let u = Universe::from_cardinalities(&[2]).unwrap();
        assert!(LinearQuery::custom(&u, vec![0.5, 1.5]).is_err());
        assert!(LinearQuery::custom(&u, vec![0.5]).is_err());
        let big = Universe::from_cardinalities(&[512, 256]).unwrap();
        assert!(matches!(
            LinearQuery::custom(&big, vec![0.0; 1 << 17]),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn evaluate_rejects_other_universe() {
        let h = hist(&[2, 2], vec![1.0; 4]);
        let schema3 = AttributeSchema::from_cardinalities(&[3]).unwrap();
        let q = LinearQuery::cell(&schema3, vec![(0, 2)]).unwrap();
        assert!(q.evaluate(&h).is_err());
    }

    #[test]
    fn random_range_examples() {
        let schema = AttributeSchema::from_cardinalities(&[91, 25]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(random_range_workload(&schema, 0, &mut rng).is_err());

        let w = random_range_workload(&schema, 2000, &mut rng).unwrap();
        assert_eq!(w.len(), 2000);
        let u = Universe::new(Arc::new(schema.clone()));
        for q in &w {
            let (lo, hi) = q.bounds();
            assert_eq!((lo, hi), (0.0, 1.0));
            u.for_each_tuple(|_, t| {
                let v = q.value(t);
                assert!(v == 0.0 || v == 1.0);
            })
            .unwrap();
        }

        let again =
            random_range_workload(&schema, 2000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let first =
            random_range_workload(&schema, 2000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(again, first);
    }

    #[test]
    fn uniform_interval_covers_all_pairs_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4u32;
        let mut counts = std::collections::HashMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            *counts
                .entry(uniform_interval(n, &mut rng))
                .or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 10);
        for (&(lo, hi), &c) in &counts {
            assert!(lo <= hi && hi < n);
            let p = c as f64 / draws as f64;
            assert!((p - 0.1).abs() < 0.01, "({lo},{hi}) -> {p}");
        }
    }

    #[test]
    fn range_query_is_product_of_interval_indicators() {
        let schema = AttributeSchema::from_cardinalities(&[5, 4, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_range_workload(&schema, 50, &mut rng).unwrap();
        let u = Universe::new(Arc::new(schema));
        for q in &w {
            let LinearQuery::Range { intervals } = q else {
                unreachable!()
            };
            u.for_each_tuple(|_, t| {
                let product: f64 = intervals
                    .iter()
                    .map(|iv| (iv.lo <= t[iv.attribute] && t[iv.attribute] <= iv.hi) as u8 as f64)
                    .product();
                assert_eq!(q.value(t), product);
            })
            .unwrap();
        }
    }

    #[test]
    fn parity_workload_counts() {
        let binom = |n: usize, k: usize| combinations(n, k).len();
        let w = parity_workload(&AttributeSchema::binary(6), 3).unwrap();
        assert_eq!(w.len(), 41);
        assert_eq!(w.len(), binom(6, 1) + binom(6, 2) + binom(6, 3));
        assert_eq!(
            parity_workload(&AttributeSchema::binary(16), 2)
                .unwrap()
                .len(),
            136
        );

        let w = parity_workload(&AttributeSchema::binary(1), 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.get(0).value(&[0]), 1.0);
        assert_eq!(w.get(0).value(&[1]), -1.0);

        // size first, then lexicographic
        let w = parity_workload(&AttributeSchema::binary(3), 2).unwrap();
        let order: Vec<Vec<usize>> = w.iter().map(|q| q.footprint()).collect();
        assert_eq!(
            order,
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2]
            ]
        );

        let err =
            parity_workload(&AttributeSchema::from_cardinalities(&[2, 3]).unwrap(), 1).unwrap_err();
        assert!(err.to_string().contains("a1"));
    }

    #[test]
    fn cuboid_counts() {
        let schema8 = AttributeSchema::from_cardinalities(&[3, 4, 2, 2, 5, 2, 3, 2]).unwrap();
        assert_eq!(cuboid_workload(&schema8, 8, true).unwrap().len(), 256);
        assert_eq!(
            cuboid_workload(&schema8, 3, false).unwrap().len(),
            8 + 28 + 56
        );

        let groups = cuboid_workload(&AttributeSchema::binary(2), 1, false).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.len() == 2));
        assert!(cuboid_workload(&AttributeSchema::binary(2), 3, false).is_err());
    }

    #[test]
    fn cuboid_cells_partition_the_domain() {
        let schema = AttributeSchema::from_cardinalities(&[3, 2, 4]).unwrap();
        let u = Universe::new(Arc::new(schema.clone()));
        for g in cuboid_workload(&schema, 3, true).unwrap() {
            let expected: usize = g
                .attributes
                .iter()
                .map(|&a| schema.cardinality(a) as usize)
                .product();
            assert_eq!(g.len(), expected);
            u.for_each_tuple(|_, t| {
                let hits: f64 = g.cells.iter().map(|c| c.value(t)).sum();
                assert_eq!(hits, 1.0);
            })
            .unwrap();
        }
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(hadamard_matrix(1).unwrap().row(0), &[1]);
        let h2 = hadamard_matrix(2).unwrap();
        assert_eq!(h2.row(0), &[1, 1]);
        assert_eq!(h2.row(1), &[1, -1]);

        let h4 = hadamard_matrix(4).unwrap();
        let side = h4.side();
        assert_eq!(side, 8);
        for i in 0..side {
            for j in 0..side {
                let dot: i32 = (0..side)
                    .map(|k| h4.get(i, k) as i32 * h4.get(j, k) as i32)
                    .sum();
                assert_eq!(dot, if i == j { 8 } else { 0 });
            }
        }
        assert!(hadamard_matrix(0).is_err());
        assert!(matches!(hadamard_matrix(15), Err(Error::Resource(_))));
        assert_eq!(hadamard_matrix(14).unwrap().side(), HADAMARD_MAX_SIDE);
    }

    #[test]
    fn hadamard_rows_are_parity_tables() {
        let d = 4;
        let h = hadamard_matrix(d as u32 + 1).unwrap();
        let u = Universe::from_cardinalities(&[2; 4]).unwrap();
        for k in 0..=d {
            for s in combinations(d, k) {
                let row = parity_row_index(d, &s);
                let q = LinearQuery::Parity { attributes: s };
                u.for_each_tuple(|x, t| assert_eq!(h.get(row, x) as f64, q.value(t)))
                    .unwrap();
            }
        }
    }

    #[test]
    fn marginal_examples() {
        let u = Universe::from_cardinalities(&[2, 2]).unwrap();
        let h = Histogram::uniform(u, 100.0).unwrap();
        assert_eq!(marginal_of(&h, &[0]).unwrap().counts, vec![50.0, 50.0]);

        let h = hist(&[2, 2], vec![2.0, 0.0, 0.0, 1.0]);
        assert_eq!(marginal_of(&h, &[1]).unwrap().counts, vec![2.0, 1.0]);
        assert!(marginal_of(&h, &[]).is_err());
        assert!(marginal_of(&h, &[2]).is_err());
        assert!(marginal_of(&h, &[0, 0]).is_err());
    }

    #[test]
    fn records_and_histogram_agree() {
        let schema = Arc::new(AttributeSchema::from_cardinalities(&[2, 3, 2]).unwrap());
        let rows: Vec<[u32; 3]> = (0..40).map(|i| [i % 2, (i / 2) % 3, (i / 7) % 2]).collect();
        let table = RecordTable::from_rows(schema.clone(), &rows).unwrap();
        let h = Histogram::from_records(&table).unwrap();
        let u = h.universe().clone();
        let queries = vec![
            LinearQuery::range(
                &schema,
                vec![Interval {
                    attribute: 1,
                    lo: 1,
                    hi: 2,
                }],
            )
            .unwrap(),
            LinearQuery::parity(&schema, vec![0, 2]).unwrap(),
            LinearQuery::cell(&schema, vec![(0, 1), (1, 0)]).unwrap(),
            LinearQuery::custom(&u, (0..12).map(|i| (i as f64 / 6.0) - 1.0).collect()).unwrap(),
        ];
        for q in &queries {
            let a = q.evaluate(&h).unwrap();
            let b = q.evaluate_records(&table).unwrap();
            assert!((a - b).abs() < 1e-9, "{q:?}: {a} vs {b}");
        }
    }

    #[test]
    fn restriction_product_equals_value() {
        let schema = AttributeSchema::from_cardinalities(&[2, 3, 2, 2]).unwrap();
        let queries = vec![
            LinearQuery::range(
                &schema,
                vec![
                    Interval {
                        attribute: 1,
                        lo: 0,
                        hi: 1,
                    },
                    Interval {
                        attribute: 3,
                        lo: 1,
                        hi: 1,
                    },
                ],
            )
            .unwrap(),
            LinearQuery::parity(&schema, vec![0, 2, 3]).unwrap(),
            LinearQuery::cell(&schema, vec![(0, 1), (1, 2)]).unwrap(),
        ];
        let parts: [&[usize]; 2] = [&[2, 0], &[3, 1]];
        let u = Universe::new(Arc::new(schema));
        for q in &queries {
            u.for_each_tuple(|_, t| {
                let mut product = 1.0;
                for part in parts {
                    let sub: Vec<u32> = part.iter().map(|&a| t[a]).collect();
                    product *= q.restrict(part).value(&sub);
                }
                assert_eq!(product, q.value(t));
            })
            .unwrap();
        }
    }
}
