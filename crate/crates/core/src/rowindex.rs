//! Exact workload answers on raw records through row bitsets.
//!
//! Each distinct `(attribute, lo, hi)` condition in the workload becomes a
//! bitset over rows. A cell or range query is then the popcount of an AND of
//! its conditions, and a parity query the popcount of an XOR of "value is
//! odd" sets.

use std::collections::HashMap;

use crate::domain::RecordTable;
use crate::query::{par_map, LinearQuery, Workload};

/// Bytes of bitsets one call may build before falling back to row scans.
const BITSET_BUDGET: usize = 256 << 20;

type Condition = (usize, u32, u32);

fn conditions(query: &LinearQuery) -> Option<Vec<Condition>> {
    match query {
        LinearQuery::Cell { assignment } => {
            Some(assignment.iter().map(|&(a, v)| (a, v, v)).collect())
        }
        LinearQuery::Range { intervals } => Some(
            intervals
                .iter()
                .map(|iv| (iv.attribute, iv.lo, iv.hi))
                .collect(),
        ),
        // bounds are unused; the set is the rows where the value is odd
        LinearQuery::Parity { attributes } => Some(attributes.iter().map(|&a| (a, 0, 0)).collect()),
        LinearQuery::Custom(_) => None,
    }
}

fn build(table: &RecordTable, (attr, lo, hi): Condition, parity: bool) -> Vec<u64> {
    let column = table.column(attr);
    let mut bits = vec![0u64; table.len().div_ceil(64)];
    for r in 0..table.len() {
        let v = column.get(r);
        let hit = if parity {
            v % 2 == 1
        } else {
            lo <= v && v <= hi
        };
        bits[r / 64] |= (hit as u64) << (r % 64);
    }
    bits
}

/// Exact answers for every query of `workload`, in order.
pub(crate) fn answers(table: &RecordTable, workload: &Workload) -> Vec<f64> {
    let words = table.len().div_ceil(64);
    let plans: Vec<Option<Vec<Condition>>> = workload.iter().map(conditions).collect();

    let mut index: HashMap<(Condition, bool), Vec<u64>> = HashMap::new();
    for (q, plan) in workload.iter().zip(&plans) {
        let Some(conds) = plan else { continue };
        let parity = matches!(q, LinearQuery::Parity { .. });
        for &c in conds {
            if !index.contains_key(&(c, parity)) {
                if (index.len() + 1) * words * 8 > BITSET_BUDGET {
                    return par_map(workload.queries(), |q| q.sum_rows(table, 0, table.len()));
                }
                index.insert((c, parity), build(table, c, parity));
            }
        }
    }

    let n = table.len();
    let qs: Vec<(&LinearQuery, &Option<Vec<Condition>>)> = workload.iter().zip(&plans).collect();
    par_map(&qs, |&(q, plan)| {
        let Some(conds) = plan else {
            return q.sum_rows(table, 0, n);
        };
        match q {
            LinearQuery::Parity { .. } => {
                let sets: Vec<&Vec<u64>> = conds.iter().map(|&c| &index[&(c, true)]).collect();
                let odd: u32 = (0..words)
                    .map(|w| sets.iter().fold(0u64, |acc, s| acc ^ s[w]).count_ones())
                    .sum();
                n as f64 - 2.0 * odd as f64
            }
            _ => {
                let sets: Vec<&Vec<u64>> = conds.iter().map(|&c| &index[&(c, false)]).collect();
                if sets.is_empty() {
                    return n as f64;
                }
                let hits: u32 = (0..words)
                    .map(|w| sets.iter().fold(u64::MAX, |acc, s| acc & s[w]).count_ones())
                    .sum();
                hits as f64
            }
        }
    })
}
