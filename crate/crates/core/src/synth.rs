//! Synthetic sensitive datasets for benches and tests.

use std::sync::Arc;

use rand::Rng;

use crate::domain::{Attribute, AttributeSchema, RecordTable};
use crate::error::{Error, Result};

/// Cardinalities of the eight categorical attributes of the Adult census
/// extract (workclass, education, marital status, occupation, relationship,
/// race, sex, native country).
pub const ADULT_CATEGORICAL: [u32; 8] = [8, 16, 7, 14, 6, 5, 2, 41];

/// A smaller categorical shape with the same number of attributes, small
/// enough to hold as an explicit histogram.
pub const SMALL_CATEGORICAL: [u32; 8] = [4, 4, 3, 4, 3, 3, 2, 5];

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// `records` rows over `attributes` binary attributes, each set to one
/// independently with probability `p`.
pub fn independent_binary<R: Rng + ?Sized>(
    attributes: usize,
    records: usize,
    p: f64,
    rng: &mut R,
) -> Result<RecordTable> {
    check_probability(p)?;
    let schema = Arc::new(AttributeSchema::binary(attributes));
    let mut table = RecordTable::new(schema);
    let mut row = vec![0u32; attributes];
    for _ in 0..records {
        row.iter_mut().for_each(|v| *v = rng.gen_bool(p) as u32);
        table.push_row(&row)?;
    }
    Ok(table)
}

/// Binary attributes in blocks of `group_size` that share a hidden bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupedBinary {
    pub groups: usize,
    pub group_size: usize,
    /// Probability that a group's hidden bit is one.
    pub latent_rate: f64,
    /// Probability that an attribute copies its group's hidden bit rather
    /// than being drawn at `latent_rate` on its own.
    pub agreement: f64,
}

impl GroupedBinary {
    pub fn attributes(&self) -> usize {
        self.groups * self.group_size
    }

    pub fn generate<R: Rng + ?Sized>(&self, records: usize, rng: &mut R) -> Result<RecordTable> {
        check_probability(self.latent_rate)?;
        check_probability(self.agreement)?;
        let d = self.attributes();
        let mut table = RecordTable::new(Arc::new(AttributeSchema::binary(d)));
        let mut row = vec![0u32; d];
        for _ in 0..records {
            for g in 0..self.groups {
                let hidden = rng.gen_bool(self.latent_rate);
                for v in &mut row[g * self.group_size..(g + 1) * self.group_size] {
                    let bit = if rng.gen_bool(self.agreement) {
                        hidden
                    } else {
                        rng.gen_bool(self.latent_rate)
                    };
                    *v = bit as u32;
                }
            }
            table.push_row(&row)?;
        }
        Ok(table)
    }
}

/// Categorical records driven by a hidden class: with probability
/// `agreement` each attribute takes a value determined by the class,
/// otherwise a uniform one.
pub fn latent_class_categorical<R: Rng + ?Sized>(
    cardinalities: &[u32],
    classes: u32,
    agreement: f64,
    records: usize,
    rng: &mut R,
) -> Result<RecordTable> {
    check_probability(agreement)?;
    if classes == 0 {
        return Err(Error::domain("need at least one hidden class"));
    }
    let schema = Arc::new(AttributeSchema::from_cardinalities(cardinalities)?);
    let mut table = RecordTable::new(schema);
    let mut row = vec![0u32; cardinalities.len()];
    for _ in 0..records {
        let class = rng.gen_range(0..classes);
        for (a, (v, &c)) in row.iter_mut().zip(cardinalities).enumerate() {
            *v = if rng.gen_bool(agreement) {
                (class + a as u32) % c
            } else {
                rng.gen_range(0..c)
            };
        }
        table.push_row(&row)?;
    }
    Ok(table)
}

/// Side-by-side concatenation of two tables with the same row count. The
/// right table's attributes are renamed when their names collide.
pub fn concat_columns(left: &RecordTable, right: &RecordTable) -> Result<RecordTable> {
    if left.len() != right.len() {
        return Err(Error::domain(format!(
            "tables have {} and {} rows",
            left.len(),
            right.len()
        )));
    }
    let mut attrs: Vec<Attribute> = left.schema().attributes().to_vec();
    for a in right.schema().attributes() {
        let mut name = a.name.clone();
        while attrs.iter().any(|b| b.name == name) {
            name.push('\'');
        }
        attrs.push(Attribute::new(name, a.cardinality));
    }
    let schema = Arc::new(AttributeSchema::new(attrs)?);
    let mut table = RecordTable::new(schema);
    let mut row = Vec::with_capacity(left.schema().len() + right.schema().len());
    for r in 0..left.len() {
        row.clear();
        row.extend(left.row(r));
        row.extend(right.row(r));
        table.push_row(&row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech::RngStream;

    #[test]
    fn independent_rate() {
        let t = independent_binary(20, 5000, 0.1, &mut RngStream::new(1)).unwrap();
        let ones: u32 = (0..t.len()).flat_map(|r| t.row(r)).sum();
        let rate = ones as f64 / (20.0 * 5000.0);
        assert!((rate - 0.1).abs() < 0.01, "{rate}");
    }

    #[test]
    fn groups_are_correlated() {
        let spec = GroupedBinary {
            groups: 2,
            group_size: 3,
            latent_rate: 0.5,
            agreement: 0.9,
        };
        let t = spec.generate(4000, &mut RngStream::new(2)).unwrap();
        let agree = |a: usize, b: usize| {
            (0..t.len())
                .filter(|&r| t.value(r, a) == t.value(r, b))
                .count() as f64
                / t.len() as f64
        };
        // within a group: 0.81 + 0.19 * 0.5; across groups: 0.5
        assert!((agree(0, 1) - 0.905).abs() < 0.03);
        assert!((agree(0, 3) - 0.5).abs() < 0.04);
    }

    #[test]
    fn concat_keeps_rows() {
        let mut rng = RngStream::new(3);
        let a = independent_binary(2, 10, 0.5, &mut rng).unwrap();
        let b = independent_binary(3, 10, 0.5, &mut rng).unwrap();
        let c = concat_columns(&a, &b).unwrap();
        assert_eq!(c.schema().len(), 5);
        assert_eq!(c.row(4)[..2], a.row(4)[..]);
        assert_eq!(c.row(4)[2..], b.row(4)[..]);
        assert_eq!(c.schema().name(2), "a0'");
    }

    #[test]
    fn adult_shape_binarizes_to_27_bits() {
        let bits: u32 = ADULT_CATEGORICAL
            .iter()
            .map(|&c| 32 - (c - 1).leading_zeros())
            .sum();
        assert_eq!(bits, 27);
    }
}
