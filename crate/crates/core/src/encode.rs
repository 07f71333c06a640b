//! Re-encoding categorical attributes as binary ones.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Attribute, AttributeSchema, RecordTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryEncoding {
    /// `ceil(log2 c)` bits per attribute, most significant bit first.
    BitwiseLog,
    /// One indicator per value.
    OneHot,
}

/// Binary columns replacing one source attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedAttribute {
    pub source: usize,
    /// Positions of the binary attributes in the encoded schema.
    pub columns: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Binarized {
    pub table: RecordTable,
    pub encoding: BinaryEncoding,
    pub attributes: Vec<EncodedAttribute>,
}

/// Number of bits the bitwise encoding uses for cardinality `c`.
pub fn bit_width(cardinality: u32) -> usize {
    (u32::BITS - (cardinality.max(2) - 1).leading_zeros()) as usize
}

pub fn encode_value(value: u32, cardinality: u32, encoding: BinaryEncoding, out: &mut Vec<u32>) {
    match encoding {
        BinaryEncoding::BitwiseLog => {
            let w = bit_width(cardinality);
            out.extend((0..w).rev().map(|b| (value >> b) & 1));
        }
        BinaryEncoding::OneHot => out.extend((0..cardinality).map(|v| (v == value) as u32)),
    }
}

/// Inverse of [`encode_value`]. Fails on bit patterns no value maps to.
pub fn decode_value(bits: &[u32], cardinality: u32, encoding: BinaryEncoding) -> Result<u32> {
    let value = match encoding {
        BinaryEncoding::BitwiseLog => bits.iter().fold(0u32, |acc, &b| (acc << 1) | b),
        BinaryEncoding::OneHot => {
            let mut hot = bits.iter().enumerate().filter(|(_, &b)| b == 1);
            match (hot.next(), hot.next()) {
                (Some((v, _)), None) => v as u32,
                _ => return Err(Error::domain("one-hot group without exactly one set bit")),
            }
        }
    };
    if value >= cardinality {
        return Err(Error::domain(format!(
            "decoded value {value} outside cardinality {cardinality}"
        )));
    }
    Ok(value)
}

pub fn binarize(table: &RecordTable, encoding: BinaryEncoding) -> Result<Binarized> {
    let schema = table.schema();
    let mut attrs = Vec::new();
    let mut encoded = Vec::with_capacity(schema.len());
    for (i, a) in schema.attributes().iter().enumerate() {
        let start = attrs.len();
        match encoding {
            BinaryEncoding::BitwiseLog => {
                let w = bit_width(a.cardinality);
                for b in (0..w).rev() {
                    attrs.push(Attribute::new(format!("{}.b{b}", a.name), 2));
                }
            }
            BinaryEncoding::OneHot => {
                for v in 0..a.cardinality {
                    attrs.push(Attribute::new(format!("{}={v}", a.name), 2));
                }
            }
        }
        encoded.push(EncodedAttribute {
            source: i,
            columns: (start..attrs.len()).collect(),
        });
    }
    let mut out = RecordTable::new(Arc::new(AttributeSchema::new(attrs)?));
    let mut row = Vec::new();
    for r in 0..table.len() {
        row.clear();
        for (a, attr) in schema.attributes().iter().enumerate() {
            encode_value(table.value(r, a), attr.cardinality, encoding, &mut row);
        }
        out.push_row(&row)?;
    }
    Ok(Binarized {
        table: out,
        encoding,
        attributes: encoded,
    })
}
