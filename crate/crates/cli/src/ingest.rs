//! CSV ingestion against a declared or inferred schema.
//!
//! A schema file lists the attributes to load, each coded one of three ways:
//!
//! ```toml
//! [[attribute]]
//! name = "age"
//! cardinality = 91
//! offset = 17          # raw value 17 becomes code 0
//!
//! [[attribute]]
//! name = "workclass"
//! categories = ["private", "self-emp", "gov", "other"]
//!
//! [[attribute]]
//! name = "hours"
//! buckets = [0, 20, 35, 45, 60]   # lower edges; the last bucket is open
//! ```
//!
//! Columns not named in the schema are ignored.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use mwem::{Attribute, AttributeSchema, Histogram, RecordTable, Universe};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError, Context, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDecl {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<u32>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<f64>>,
}

fn is_zero(x: &i64) -> bool {
    *x == 0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaDecl {
    #[serde(rename = "attribute")]
    pub attributes: Vec<AttributeDecl>,
}

enum Coding<'a> {
    Integer { cardinality: u32, offset: i64 },
    Categories(&'a [String]),
    Buckets(&'a [f64]),
}

impl AttributeDecl {
    pub fn integer(name: impl Into<String>, cardinality: u32) -> Self {
        AttributeDecl {
            name: name.into(),
            cardinality: Some(cardinality),
            offset: 0,
            categories: None,
            buckets: None,
        }
    }

    fn coding(&self) -> Result<Coding<'_>> {
        let bad = |msg: &str| CliError::config(format!("attribute `{}`: {msg}", self.name));
        match (&self.cardinality, &self.categories, &self.buckets) {
            (Some(c), None, None) => Ok(Coding::Integer {
                cardinality: *c,
                offset: self.offset,
            }),
            (None, Some(cats), None) => {
                let distinct: BTreeSet<&String> = cats.iter().collect();
                if distinct.len() != cats.len() {
                    return Err(bad("categories repeat"));
                }
                Ok(Coding::Categories(cats))
            }
            (None, None, Some(edges)) => {
                if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite())
                {
                    return Err(bad("bucket edges must be finite and strictly increasing"));
                }
                Ok(Coding::Buckets(edges))
            }
            _ => Err(bad(
                "declare exactly one of `cardinality`, `categories` or `buckets`",
            )),
        }
    }

    pub fn domain_size(&self) -> Result<u32> {
        Ok(match self.coding()? {
            Coding::Integer { cardinality, .. } => cardinality,
            Coding::Categories(c) => c.len() as u32,
            Coding::Buckets(b) => b.len() as u32,
        })
    }

    /// Code of a raw CSV field.
    pub fn encode(&self, raw: &str) -> Result<u32, String> {
        let raw = raw.trim();
        match self.coding().map_err(|e| e.to_string())? {
            Coding::Integer {
                cardinality,
                offset,
            } => {
                let v: i64 = raw
                    .parse()
                    .map_err(|_| format!("`{raw}` is not an integer"))?;
                let code = v - offset;
                if code < 0 || code >= cardinality as i64 {
                    return Err(format!(
                        "value {v} outside {offset}..{}",
                        offset + cardinality as i64
                    ));
                }
                Ok(code as u32)
            }
            Coding::Categories(cats) => cats
                .iter()
                .position(|c| c == raw)
                .map(|i| i as u32)
                .ok_or_else(|| format!("unknown category `{raw}`")),
            Coding::Buckets(edges) => {
                let x: f64 = raw
                    .parse()
                    .map_err(|_| format!("`{raw}` is not a number"))?;
                if !(x >= edges[0]) {
                    return Err(format!(
                        "value {x} below the first bucket edge {}",
                        edges[0]
                    ));
                }
                Ok((edges.partition_point(|&e| e <= x) - 1) as u32)
            }
        }
    }

    /// The raw value written for a code; encoding it gives the code back.
    pub fn label(&self, code: u32) -> String {
        match self.coding() {
            Ok(Coding::Integer { offset, .. }) => (code as i64 + offset).to_string(),
            Ok(Coding::Categories(c)) => c[code as usize].clone(),
            Ok(Coding::Buckets(b)) => b[code as usize].to_string(),
            Err(_) => code.to_string(),
        }
    }
}

impl SchemaDecl {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let decl: SchemaDecl = toml::from_str(&text).map_err(|e| CliError::Input {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        decl.to_schema()?;
        Ok(decl)
    }

    /// Integer-coded attributes `0..c` with the schema's own names.
    pub fn integer_coded(schema: &AttributeSchema) -> Self {
        SchemaDecl {
            attributes: schema
                .attributes()
                .iter()
                .map(|a| AttributeDecl::integer(a.name.clone(), a.cardinality))
                .collect(),
        }
    }

    pub fn to_schema(&self) -> Result<AttributeSchema> {
        let attrs = self
            .attributes
            .iter()
            .map(|a| Ok(Attribute::new(a.name.clone(), a.domain_size()?)))
            .collect::<Result<Vec<_>>>()?;
        AttributeSchema::new(attrs).context(|| "schema".into())
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Input {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

fn column_positions(
    path: &Path,
    headers: &csv::StringRecord,
    names: &[&str],
) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| CliError::Input {
                    path: path.to_owned(),
                    message: format!("missing column `{name}`"),
                })
        })
        .collect()
}

/// Loads the declared attributes of a CSV file with a header row.
pub fn ingest_csv(path: &Path, decl: &SchemaDecl) -> Result<RecordTable> {
    let schema = Arc::new(decl.to_schema()?);
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = decl.attributes.iter().map(|a| a.name.as_str()).collect();
    let cols = column_positions(path, &headers, &names)?;

    let mut table = RecordTable::new(schema);
    let mut row = vec![0u32; cols.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        // data rows are numbered from 1, after the header
        for (k, (&c, attr)) in cols.iter().zip(&decl.attributes).enumerate() {
            let raw = record.get(c).ok_or_else(|| CliError::Input {
                path: path.to_owned(),
                message: format!("row {}: missing field for `{}`", i + 1, attr.name),
            })?;
            row[k] = attr.encode(raw).map_err(|m| CliError::Input {
                path: path.to_owned(),
                message: format!("row {}, attribute `{}`: {m}", i + 1, attr.name),
            })?;
        }
        table
            .push_row(&row)
            .context(|| format!("{}: row {}", path.display(), i + 1))?;
    }
    Ok(table)
}

/// Derives a schema from the data: columns of non-negative integers become
/// `0..=max`, anything else a sorted category list.
pub fn infer_schema(path: &Path) -> Result<SchemaDecl> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut values: Vec<BTreeSet<String>> = vec![BTreeSet::new(); headers.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (set, field) in values.iter_mut().zip(record.iter()) {
            set.insert(field.to_string());
        }
    }
    let attributes = headers
        .iter()
        .zip(values)
        .map(|(name, seen)| {
            let ints: Option<Vec<u32>> = seen.iter().map(|s| s.parse().ok()).collect();
            match ints {
                Some(v) if !v.is_empty() => {
                    AttributeDecl::integer(name, (v.iter().max().unwrap() + 1).max(2))
                }
                _ => {
                    let mut categories: Vec<String> = seen.into_iter().collect();
                    if categories.len() < 2 {
                        categories.push(format!("{name}:unseen"));
                    }
                    AttributeDecl {
                        name: name.to_string(),
                        cardinality: None,
                        offset: 0,
                        categories: Some(categories),
                        buckets: None,
                    }
                }
            }
        })
        .collect();
    Ok(SchemaDecl { attributes })
}

/// Reads a weighted export (`attributes..., weight`) back into a histogram.
pub fn ingest_weighted(path: &Path, decl: &SchemaDecl) -> Result<Histogram> {
    let schema = Arc::new(decl.to_schema()?);
    let universe = Arc::new(Universe::new(schema));
    let size = universe
        .explicit_size(mwem::domain::DEFAULT_EXPLICIT_CAP)
        .context(|| "weighted histogram".into())?;
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut names: Vec<&str> = decl.attributes.iter().map(|a| a.name.as_str()).collect();
    names.push("weight");
    let cols = column_positions(path, &headers, &names)?;

    let mut weights = vec![0.0; size];
    let mut seen: HashMap<usize, usize> = HashMap::new();
    let mut tuple = vec![0u32; decl.attributes.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |k: usize| record.get(cols[k]).unwrap_or("");
        let input_error = |message: String| CliError::Input {
            path: path.to_owned(),
            message: format!("row {}: {message}", i + 1),
        };
        for (k, attr) in decl.attributes.iter().enumerate() {
            tuple[k] = attr.encode(field(k)).map_err(input_error)?;
        }
        let w: f64 = field(tuple.len())
            .parse()
            .map_err(|_| input_error("weight is not a number".into()))?;
        let index = universe
            .index_of(&tuple)
            .context(|| format!("row {}", i + 1))?;
        if let Some(first) = seen.insert(index, i + 1) {
            return Err(input_error(format!("repeats the tuple of row {first}")));
        }
        weights[index] = w;
    }
    Histogram::new(universe, weights).context(|| path.display().to_string())
}
