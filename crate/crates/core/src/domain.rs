//! Attribute schemas, the record universe, weighted datasets over it, and raw
//! record tables.
//!
//! Domain elements are addressed by a row-major index in which the first
//! schema attribute is the most significant digit. For a binary schema this
//! is the lexicographic order of the bit vectors, which is the coordinate
//! order the Hadamard view of a contingency table assumes.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest universe an explicit [`Histogram`] will materialize by default.
pub const DEFAULT_EXPLICIT_CAP: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub cardinality: u32,
}

impl Attribute {
    pub fn new(name: impl Into<String>, cardinality: u32) -> Self {
        Attribute {
            name: name.into(),
            cardinality,
        }
    }
}

/// Ordered list of named discrete attributes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::domain("schema needs at least one attribute"));
        }
        let mut seen = HashSet::new();
        for attr in &attributes {
            if attr.cardinality < 2 {
                return Err(Error::domain(format!(
                    "attribute `{}` has cardinality {}, need at least 2",
                    attr.name, attr.cardinality
                )));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::domain(format!(
                    "duplicate attribute name `{}`",
                    attr.name
                )));
            }
        }
        Ok(AttributeSchema { attributes })
    }

    /// Schema with generated names `a0, a1, ...`.
    pub fn from_cardinalities(cardinalities: &[u32]) -> Result<Self> {
        Self::new(
            cardinalities
                .iter()
                .enumerate()
                .map(|(i, &c)| Attribute::new(format!("a{i}"), c))
                .collect(),
        )
    }

    pub fn binary(count: usize) -> Self {
        Self::from_cardinalities(&vec![2; count]).expect("binary attributes are valid")
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn cardinality(&self, attr: usize) -> u32 {
        self.attributes[attr].cardinality
    }

    pub fn cardinalities(&self) -> Vec<u32> {
        self.attributes.iter().map(|a| a.cardinality).collect()
    }

    pub fn name(&self, attr: usize) -> &str {
        &self.attributes[attr].name
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn is_binary(&self) -> bool {
        self.attributes.iter().all(|a| a.cardinality == 2)
    }

    pub(crate) fn check_attr(&self, attr: usize) -> Result<()> {
        if attr < self.len() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "attribute index {attr} out of range for schema of {} attributes",
                self.len()
            )))
        }
    }

    pub(crate) fn check_value(&self, attr: usize, value: u32) -> Result<()> {
        self.check_attr(attr)?;
        let card = self.cardinality(attr);
        if value < card {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "value {value} out of range for attribute `{}` (cardinality {card})",
                self.name(attr)
            )))
        }
    }
}

impl TryFrom<Vec<Attribute>> for AttributeSchema {
    type Error = Error;

    fn try_from(attributes: Vec<Attribute>) -> Result<Self> {
        Self::new(attributes)
    }
}

impl From<AttributeSchema> for Vec<Attribute> {
    fn from(schema: AttributeSchema) -> Self {
        schema.attributes
    }
}

/// The record universe `D`: the cross product of the schema's attribute
/// ranges.
///
/// Very wide schemas (hundreds of binary attributes) have no representable
/// size; those universes still carry `ln |D|` and can be used by the
/// factored engine, but cannot back an explicit histogram.
#[derive(Clone, Debug)]
pub struct Universe {
    schema: Arc<AttributeSchema>,
    size: Option<usize>,
    ln_size: f64,
    strides: Vec<usize>,
}

impl PartialEq for Universe {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.schema, &other.schema) || self.schema == other.schema
    }
}

impl Universe {
    pub fn new(schema: Arc<AttributeSchema>) -> Self {
        let cards = schema.cardinalities();
        let ln_size = cards.iter().map(|&c| (c as f64).ln()).sum();
        let size = cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c as usize));
        let strides = match size {
            Some(_) => {
                let mut strides = vec![1usize; cards.len()];
                for i in (0..cards.len().saturating_sub(1)).rev() {
                    strides[i] = strides[i + 1] * cards[i + 1] as usize;
                }
                strides
            }
            None => Vec::new(),
        };
        Universe {
            schema,
            size,
            ln_size,
            strides,
        }
    }

    pub fn from_cardinalities(cardinalities: &[u32]) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(Arc::new(
            AttributeSchema::from_cardinalities(cardinalities)?,
        ))))
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn attribute_count(&self) -> usize {
        self.schema.len()
    }

    /// `|D|`, if it fits in a machine word.
    pub fn size(&self) -> Result<usize> {
        self.size.ok_or_else(|| {
            Error::resource(format!(
                "universe of {} attributes is too large to enumerate (ln|D| = {:.1})",
                self.schema.len(),
                self.ln_size
            ))
        })
    }

    /// Natural log of `|D|`, defined for every universe.
    pub fn ln_size(&self) -> f64 {
        self.ln_size
    }

    /// `|D|`, provided it is at most `cap`.
    pub fn explicit_size(&self, cap: usize) -> Result<usize> {
        let size = self.size()?;
        if size > cap {
            return Err(Error::resource(format!(
                "universe size {size} exceeds the explicit cap {cap}; use the factored engine"
            )));
        }
        Ok(size)
    }

    pub fn index_of(&self, tuple: &[u32]) -> Result<usize> {
        self.size()?;
        if tuple.len() != self.schema.len() {
            return Err(Error::domain(format!(
                "tuple has {} values, schema has {} attributes",
                tuple.len(),
                self.schema.len()
            )));
        }
        let mut index = 0;
        for (attr, (&value, &stride)) in tuple.iter().zip(&self.strides).enumerate() {
            self.schema.check_value(attr, value)?;
            index += value as usize * stride;
        }
        Ok(index)
    }

    pub fn tuple_of(&self, index: usize) -> Result<Vec<u32>> {
        let size = self.size()?;
        if index >= size {
            return Err(Error::domain(format!(
                "index {index} outside universe of size {size}"
            )));
        }
        let mut tuple = vec![0u32; self.schema.len()];
        self.decode_into(index, &mut tuple);
        Ok(tuple)
    }

    pub(crate) fn decode_into(&self, mut index: usize, tuple: &mut [u32]) {
        for (slot, &stride) in tuple.iter_mut().zip(&self.strides) {
            *slot = (index / stride) as u32;
            index %= stride;
        }
    }

    /// Visits the index of every element whose value on each attribute `a`
    /// lies in `lo[a]..=hi[a]`, in increasing index order.
    pub(crate) fn for_each_in_box(&self, lo: &[u32], hi: &[u32], mut f: impl FnMut(usize)) {
        for_each_box_run(&self.schema.cardinalities(), lo, hi, |start, len| {
            (start..start + len).for_each(&mut f)
        });
    }

    /// Visits every domain element in index order together with its tuple.
    pub fn for_each_tuple(&self, mut f: impl FnMut(usize, &[u32])) -> Result<()> {
        let size = self.size()?;
        let cards = self.schema.cardinalities();
        odometer(&cards, size, |i, t| f(i, t));
        Ok(())
    }
}

/// Row-major walk over the cross product of `cards`, last digit fastest.
/// Calls `f(start, len)` for each maximal run of consecutive row-major
/// indices whose tuples lie in the box `lo[a]..=hi[a]`, in increasing order.
pub(crate) fn for_each_box_run(
    cards: &[u32],
    lo: &[u32],
    hi: &[u32],
    mut f: impl FnMut(usize, usize),
) {
    let d = cards.len();
    let mut strides = vec![1usize; d];
    for k in (1..d).rev() {
        strides[k - 1] = strides[k] * cards[k] as usize;
    }
    // trailing attributes spanning their full range extend each run
    let mut split = d;
    while split > 0 && lo[split - 1] == 0 && hi[split - 1] + 1 == cards[split - 1] {
        split -= 1;
    }
    if split == 0 {
        f(0, cards.iter().map(|&c| c as usize).product());
        return;
    }
    let last = split - 1;
    let run = (hi[last] - lo[last] + 1) as usize * strides[last];
    let mut current = lo[..last].to_vec();
    let mut index: usize = (0..=last).map(|k| lo[k] as usize * strides[k]).sum();
    loop {
        f(index, run);
        let mut k = last;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if current[k] < hi[k] {
                current[k] += 1;
                index += strides[k];
                break;
            }
            index -= (current[k] - lo[k]) as usize * strides[k];
            current[k] = lo[k];
        }
    }
}

pub(crate) fn odometer(cards: &[u32], size: usize, mut f: impl FnMut(usize, &[u32])) {
    let mut tuple = vec![0u32; cards.len()];
    for index in 0..size {
        f(index, &tuple);
        for pos in (0..cards.len()).rev() {
            tuple[pos] += 1;
            if tuple[pos] < cards[pos] {
                break;
            }
            tuple[pos] = 0;
        }
    }
}

/// A nonnegative weighting of the universe with total mass `n`.
///
/// Weights are reals rather than counts: multiplicative weights produces
/// fractional weightings, and the mass stays fixed at the record count
/// rather than being normalized to one.
#[derive(Clone, Debug)]
pub struct Histogram {
    universe: Arc<Universe>,
    weights: Vec<f64>,
    mass: f64,
}

impl Histogram {
    pub fn new(universe: Arc<Universe>, weights: Vec<f64>) -> Result<Self> {
        let size = universe.size()?;
        if weights.len() != size {
            return Err(Error::domain(format!(
                "got {} weights for a universe of size {size}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::domain(format!(
                "weight {w} at index {i} is not a finite nonnegative number"
            )));
        }
        let mass = weights.iter().sum();
        Ok(Histogram {
            universe,
            weights,
            mass,
        })
    }

    pub fn uniform(universe: Arc<Universe>, mass: f64) -> Result<Self> {
        Self::uniform_with_cap(universe, mass, DEFAULT_EXPLICIT_CAP)
    }

    pub fn uniform_with_cap(universe: Arc<Universe>, mass: f64, cap: usize) -> Result<Self> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::domain(format!(
                "mass must be finite and nonnegative, got {mass}"
            )));
        }
        let size = universe.explicit_size(cap)?;
        Ok(Histogram {
            universe,
            weights: vec![mass / size as f64; size],
            mass,
        })
    }

    /// Counts records per domain element.
    pub fn from_records(table: &RecordTable) -> Result<Self> {
        Self::from_records_with_cap(table, DEFAULT_EXPLICIT_CAP)
    }

    pub fn from_records_with_cap(table: &RecordTable, cap: usize) -> Result<Self> {
        let universe = Arc::new(Universe::new(table.schema().clone()));
        let size = universe.explicit_size(cap)?;
        let mut weights = vec![0.0; size];
        let strides = &universe.strides;
        for row in 0..table.len() {
            let index: usize = strides
                .iter()
                .enumerate()
                .map(|(attr, &s)| table.value(row, attr) as usize * s)
                .sum();
            weights[index] += 1.0;
        }
        Ok(Histogram {
            universe,
            weights,
            mass: table.len() as f64,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Draws `count` records with probability proportional to weight.
    pub fn sample_records<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<RecordTable> {
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut total = 0.0;
        for &w in &self.weights {
            total += w.max(0.0);
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::domain(
                "cannot sample from a histogram without positive weight",
            ));
        }
        let mut table = RecordTable::new(self.universe.schema.clone());
        let mut tuple = vec![0u32; self.universe.attribute_count()];
        for _ in 0..count {
            let u = total * rng.gen::<f64>();
            let i = cumulative
                .partition_point(|&c| c <= u)
                .min(cumulative.len() - 1);
            self.universe.decode_into(i, &mut tuple);
            table.push_row(&tuple)?;
        }
        Ok(table)
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Rescales so the weights sum to `mass` exactly (up to rounding).
    pub(crate) fn renormalize_to(&mut self, mass: f64) {
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            let factor = mass / total;
            self.weights.iter_mut().for_each(|w| *w *= factor);
        }
        self.mass = mass;
    }

    pub(crate) fn check_same_universe(&self, other: &Histogram) -> Result<()> {
        if *self.universe != *other.universe {
            return Err(Error::domain(
                "histograms are defined over different universes",
            ));
        }
        Ok(())
    }
}

/// One column of a record table, stored at the narrowest width that holds
/// the attribute's values.
#[derive(Clone, Debug)]
pub enum Column {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl Column {
    fn for_cardinality(cardinality: u32) -> Self {
        if cardinality <= u8::MAX as u32 + 1 {
            Column::U8(Vec::new())
        } else if cardinality <= u16::MAX as u32 + 1 {
            Column::U16(Vec::new())
        } else {
            Column::U32(Vec::new())
        }
    }

    #[inline]
    pub fn get(&self, row: usize) -> u32 {
        match self {
            Column::U8(v) => v[row] as u32,
            Column::U16(v) => v[row] as u32,
            Column::U32(v) => v[row],
        }
    }

    fn push(&mut self, value: u32) {
        match self {
            Column::U8(v) => v.push(value as u8),
            Column::U16(v) => v.push(value as u16),
            Column::U32(v) => v.push(value),
        }
    }
}

/// Raw records over a schema, stored column by column.
#[derive(Clone, Debug)]
pub struct RecordTable {
    schema: Arc<AttributeSchema>,
    columns: Vec<Column>,
    rows: usize,
}

impl RecordTable {
    pub fn new(schema: Arc<AttributeSchema>) -> Self {
        let columns = schema
            .attributes()
            .iter()
            .map(|a| Column::for_cardinality(a.cardinality))
            .collect();
        RecordTable {
            schema,
            columns,
            rows: 0,
        }
    }

    pub fn from_rows<I, R>(schema: Arc<AttributeSchema>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[u32]>,
    {
        let mut table = Self::new(schema);
        for row in rows {
            table.push_row(row.as_ref())?;
        }
        Ok(table)
    }

    pub fn push_row(&mut self, row: &[u32]) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::domain(format!(
                "row {} has {} values, schema has {} attributes",
                self.rows,
                row.len(),
                self.schema.len()
            )));
        }
        for (attr, &value) in row.iter().enumerate() {
            self.schema.check_value(attr, value).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("row {}: {msg}", self.rows)),
                other => other,
            })?;
        }
        for (column, &value) in self.columns.iter_mut().zip(row) {
            column.push(value);
        }
        self.rows += 1;
        Ok(())
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    #[inline]
    pub fn value(&self, row: usize, attr: usize) -> u32 {
        self.columns[attr].get(row)
    }

    pub fn column(&self, attr: usize) -> &Column {
        &self.columns[attr]
    }

    pub fn row(&self, row: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c.get(row)).collect()
    }

    pub(crate) fn fill_row(&self, row: usize, out: &mut [u32]) {
        for (slot, column) in out.iter_mut().zip(&self.columns) {
            *slot = column.get(row);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_skips_empty_cells() {
        use rand::SeedableRng;
        let u = Universe::from_cardinalities(&[2, 2]).unwrap();
        let h = Histogram::new(u, vec![0.0, 3.0, 0.0, 1.0]).unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let t = h.sample_records(4000, &mut rng).unwrap();
        let back = Histogram::from_records(&t).unwrap();
        assert_eq!(back.weight(0) + back.weight(2), 0.0);
        assert!((back.weight(1) / 4000.0 - 0.75).abs() < 0.03);
    }

    #[test]
    fn box_runs_cover_exactly_the_box() {
        let cards = [3u32, 2, 4];
        let size = 24;
        for (lo, hi) in [
            ([0, 0, 0], [2, 1, 3]),
            ([1, 0, 0], [2, 1, 3]),
            ([0, 1, 1], [2, 1, 2]),
            ([2, 0, 3], [2, 0, 3]),
            ([0, 0, 0], [0, 1, 3]),
        ] {
            let mut seen = Vec::new();
            for_each_box_run(&cards, &lo, &hi, |s, len| seen.extend(s..s + len));
            let mut expect = Vec::new();
            odometer(&cards, size, |i, t| {
                if (0..3).all(|a| lo[a] <= t[a] && t[a] <= hi[a]) {
                    expect.push(i);
                }
            });
            assert_eq!(seen, expect, "box {lo:?}..={hi:?}");
        }
    }

    #[test]
    fn index_of_examples() {
        let u = Universe::from_cardinalities(&[2, 2]).unwrap();
        assert_eq!(u.index_of(&[0, 0]).unwrap(), 0);
        assert_eq!(u.index_of(&[1, 0]).unwrap(), 2);

        let u = Universe::from_cardinalities(&[3, 4, 5]).unwrap();
        // lexicographic enumeration oracle
        let mut position = None;
        let mut counter = 0;
        for a in 0..3 {
            for b in 0..4 {
                for c in 0..5 {
                    if (a, b, c) == (2, 3, 4) {
                        position = Some(counter);
                    }
                    counter += 1;
                }
            }
        }
        assert_eq!(position, Some(59));
        assert_eq!(u.index_of(&[2, 3, 4]).unwrap(), 59);
    }

    #[test]
    fn index_of_rejects_out_of_range_value_by_name() {
        let schema =
            AttributeSchema::new(vec![Attribute::new("age", 3), Attribute::new("sex", 2)]).unwrap();
        let u = Universe::new(Arc::new(schema));
        let err = u.index_of(&[1, 2]).unwrap_err();
        assert!(
            matches!(&err, Error::Domain(msg) if msg.contains("sex")),
            "{err}"
        );
        assert!(u.index_of(&[1]).is_err());
    }

    #[test]
    fn bijection_exhaustive() {
        let u = Universe::from_cardinalities(&[3, 2, 4, 5]).unwrap();
        let mut visited = 0;
        u.for_each_tuple(|i, t| {
            assert_eq!(u.index_of(t).unwrap(), i);
            assert_eq!(u.tuple_of(i).unwrap(), t);
            visited += 1;
        })
        .unwrap();
        assert_eq!(visited, 120);

        let u = Universe::new(Arc::new(AttributeSchema::binary(20)));
        let mut tuple = vec![0; 20];
        for i in 0..u.size().unwrap() {
            u.decode_into(i, &mut tuple);
            assert_eq!(u.index_of(&tuple).unwrap(), i);
        }
    }

    #[test]
    fn schema_validation() {
        assert!(AttributeSchema::from_cardinalities(&[2, 1]).is_err());
        assert!(
            AttributeSchema::new(vec![Attribute::new("x", 2), Attribute::new("x", 3)]).is_err()
        );
        assert!(AttributeSchema::from_cardinalities(&[]).is_err());
    }

    #[test]
    fn huge_universe_has_log_size_only() {
        let u = Universe::new(Arc::new(AttributeSchema::binary(1000)));
        assert!(u.size().is_err());
        assert!((u.ln_size() - 1000.0 * 2f64.ln()).abs() < 1e-9);
        assert!(Histogram::uniform(Arc::new(u), 1.0).is_err());
    }

    #[test]
    fn histogram_from_records_examples() {
        let schema = Arc::new(AttributeSchema::from_cardinalities(&[2, 2]).unwrap());
        let empty = RecordTable::new(schema.clone());
        let h = Histogram::from_records(&empty).unwrap();
        assert_eq!(h.weights(), &[0.0; 4]);
        assert_eq!(h.mass(), 0.0);

        let t = RecordTable::from_rows(schema, [[0, 0], [0, 0], [1, 1]]).unwrap();
        let h = Histogram::from_records(&t).unwrap();
        assert_eq!(h.weights(), &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(h.mass(), 3.0);
    }

    #[test]
    fn histogram_from_random_records_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let schema = Arc::new(AttributeSchema::from_cardinalities(&[4, 4]).unwrap());
        let rows: Vec<[u32; 2]> = (0..1000)
            .map(|_| [rng.gen_range(0..4), rng.gen_range(0..4)])
            .collect();
        let t = RecordTable::from_rows(schema, &rows).unwrap();
        let h = Histogram::from_records(&t).unwrap();
        assert_eq!(h.mass(), 1000.0);
        assert_eq!(h.weights().iter().sum::<f64>(), 1000.0);
        let mut recount = [0.0; 16];
        for r in &rows {
            recount[(r[0] * 4 + r[1]) as usize] += 1.0;
        }
        assert_eq!(h.weights(), &recount);
    }

    #[test]
    fn record_validation_names_row_and_attribute() {
        let schema = Arc::new(
            AttributeSchema::new(vec![Attribute::new("a", 2), Attribute::new("b", 3)]).unwrap(),
        );
        let err = RecordTable::from_rows(schema, [[0, 0], [1, 3]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1") && msg.contains("`b`"), "{msg}");
    }

    #[test]
    fn wide_columns_roundtrip() {
        let schema = Arc::new(AttributeSchema::from_cardinalities(&[4357, 70000, 2]).unwrap());
        let t = RecordTable::from_rows(schema, [[4356, 69999, 1]]).unwrap();
        assert_eq!(t.row(0), vec![4356, 69999, 1]);
        assert!(matches!(t.column(0), Column::U16(_)));
        assert!(matches!(t.column(1), Column::U32(_)));
    }

    #[test]
    fn uniform_examples() {
        let u = Universe::from_cardinalities(&[2, 2]).unwrap();
        let h = Histogram::uniform(u, 100.0).unwrap();
        assert!(h.weights().iter().all(|&w| w == 25.0));

        let u = Universe::from_cardinalities(&[2, 2, 2, 2, 2, 2]).unwrap();
        let h = Histogram::uniform(u.clone(), 100.0).unwrap();
        assert!(h.weights().iter().all(|&w| w == 1.5625));
        assert_eq!(h.weights().iter().sum::<f64>(), 100.0);

        assert!(Histogram::uniform(u, -1.0).is_err());
    }

    #[test]
    fn explicit_cap_is_enforced() {
        let u = Universe::from_cardinalities(&[1024, 1024]).unwrap();
        assert!(Histogram::uniform_with_cap(u.clone(), 1.0, 1 << 19).is_err());
        assert!(Histogram::uniform_with_cap(u, 1.0, 1 << 20).is_ok());
    }
}
