//! Workloads stored as TOML, with attributes referred to by name.
//!
//! ```toml
//! label = "age and hours"
//!
//! [[query]]
//! kind = "range"
//! intervals = [{ attribute = "age", lo = 20, hi = 39 }]
//!
//! [[query]]
//! kind = "parity"
//! attributes = ["x0", "x3"]
//!
//! [[query]]
//! kind = "cell"
//! assignment = { sex = 1, race = 0 }
//!
//! [[query]]
//! kind = "custom"
//! values = [0.0, 1.0, -1.0, 0.5]
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{AttributeSchema, Universe};
use crate::error::{Error, Result};
use crate::query::{Interval, LinearQuery, Workload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct IntervalEntry {
    attribute: String,
    lo: u32,
    hi: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum QueryEntry {
    Range { intervals: Vec<IntervalEntry> },
    Parity { attributes: Vec<String> },
    Cell { assignment: BTreeMap<String, u32> },
    Custom { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadFile {
    #[serde(default)]
    label: Option<String>,
    #[serde(default, rename = "query")]
    queries: Vec<QueryEntry>,
}

fn attribute(schema: &AttributeSchema, name: &str, query: usize) -> Result<usize> {
    schema
        .position(name)
        .ok_or_else(|| Error::config(format!("query {query}: unknown attribute `{name}`")))
}

/// Parses a TOML workload against `schema`.
pub fn parse_workload(text: &str, schema: &Arc<AttributeSchema>) -> Result<Workload> {
    let file: WorkloadFile =
        toml::from_str(text).map_err(|e| Error::config(format!("workload file: {e}")))?;
    let mut queries = Vec::with_capacity(file.queries.len());
    for (i, entry) in file.queries.into_iter().enumerate() {
        let context = |e: Error| match e {
            Error::Domain(m) | Error::Config(m) => Error::config(format!("query {i}: {m}")),
            other => other,
        };
        let q = match entry {
            QueryEntry::Range { intervals } => {
                let ivs = intervals
                    .iter()
                    .map(|iv| {
                        Ok(Interval {
                            attribute: attribute(schema, &iv.attribute, i)?,
                            lo: iv.lo,
                            hi: iv.hi,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                LinearQuery::range(schema, ivs).map_err(context)?
            }
            QueryEntry::Parity { attributes } => {
                let attrs = attributes
                    .iter()
                    .map(|a| attribute(schema, a, i))
                    .collect::<Result<Vec<_>>>()?;
                LinearQuery::parity(schema, attrs).map_err(context)?
            }
            QueryEntry::Cell { assignment } => {
                let cells = assignment
                    .iter()
                    .map(|(a, &v)| Ok((attribute(schema, a, i)?, v)))
                    .collect::<Result<Vec<_>>>()?;
                LinearQuery::cell(schema, cells).map_err(context)?
            }
            QueryEntry::Custom { values } => {
                LinearQuery::custom(&Universe::new(schema.clone()), values).map_err(context)?
            }
        };
        queries.push(q);
    }
    if queries.is_empty() {
        return Err(Error::config("workload file has no [[query]] entries"));
    }
    Workload::new(file.label.unwrap_or_else(|| "file".into()), queries)
}

/// Writes a workload in the format read by [`parse_workload`].
pub fn workload_to_toml(workload: &Workload, schema: &AttributeSchema) -> Result<String> {
    workload.check_schema(schema)?;
    let name = |a: usize| schema.name(a).to_string();
    let queries = workload
        .iter()
        .map(|q| match q {
            LinearQuery::Range { intervals } => QueryEntry::Range {
                intervals: intervals
                    .iter()
                    .map(|iv| IntervalEntry {
                        attribute: name(iv.attribute),
                        lo: iv.lo,
                        hi: iv.hi,
                    })
                    .collect(),
            },
            LinearQuery::Parity { attributes } => QueryEntry::Parity {
                attributes: attributes.iter().map(|&a| name(a)).collect(),
            },
            LinearQuery::Cell { assignment } => QueryEntry::Cell {
                assignment: assignment.iter().map(|&(a, v)| (name(a), v)).collect(),
            },
            LinearQuery::Custom(c) => QueryEntry::Custom {
                values: c.values().to_vec(),
            },
        })
        .collect();
    let file = WorkloadFile {
        label: Some(workload.label().to_string()),
        queries,
    };
    toml::to_string(&file).map_err(|e| Error::config(format!("cannot serialize workload: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Attribute, Histogram};
    use crate::mech::RngStream;
    use crate::query::random_range_workload;

    fn schema() -> Arc<AttributeSchema> {
        Arc::new(
            AttributeSchema::new(vec![
                Attribute::new("age", 8),
                Attribute::new("x", 2),
                Attribute::new("y", 2),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn parses_each_kind() {
        let text = r#"
label = "demo"

[[query]]
kind = "range"
intervals = [{ attribute = "age", lo = 2, hi = 5 }]

[[query]]
kind = "parity"
attributes = ["x", "y"]

[[query]]
kind = "cell"
assignment = { y = 1, age = 0 }
"#;
        let s = schema();
        let w = parse_workload(text, &s).unwrap();
        assert_eq!(w.label(), "demo");
        assert_eq!(w.len(), 3);
        assert_eq!(
            w.get(1),
            &LinearQuery::Parity {
                attributes: vec![1, 2]
            }
        );
        assert_eq!(
            w.get(2),
            &LinearQuery::Cell {
                assignment: vec![(0, 0), (2, 1)]
            }
        );
    }

    #[test]
    fn errors_name_the_query() {
        let s = schema();
        let bad = "[[query]]\nkind = \"parity\"\nattributes = [\"x\"]\n[[query]]\nkind = \"parity\"\nattributes = [\"age\"]\n";
        let err = parse_workload(bad, &s).unwrap_err().to_string();
        assert!(err.contains("query 1"), "{err}");
        let unknown = "[[query]]\nkind = \"cell\"\nassignment = { z = 1 }\n";
        assert!(parse_workload(unknown, &s)
            .unwrap_err()
            .to_string()
            .contains("`z`"));
        assert!(parse_workload("label = \"empty\"", &s).is_err());
    }

    #[test]
    fn round_trip_preserves_answers() {
        let s = schema();
        let mut rng = RngStream::new(9);
        let mut queries = random_range_workload(&s, 20, &mut rng)
            .unwrap()
            .queries()
            .to_vec();
        queries.push(LinearQuery::parity(&s, vec![1, 2]).unwrap());
        let u = Arc::new(Universe::new(s.clone()));
        queries.push(
            LinearQuery::custom(&u, (0..32).map(|i| (i % 5) as f64 / 4.0 - 0.5).collect()).unwrap(),
        );
        let w = Workload::new("mixed", queries).unwrap();
        let text = workload_to_toml(&w, &s).unwrap();
        let back = parse_workload(&text, &s).unwrap();
        let h = Histogram::new(u, (0..32).map(|i| (i * 7 % 11) as f64).collect()).unwrap();
        assert_eq!(w.evaluate(&h).unwrap(), back.evaluate(&h).unwrap());
    }
}
