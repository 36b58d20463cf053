//! Approximate and exact minimum keys over a row sample.
//!
//! The greedy miner is set cover over the pairs of sampled rows: each column
//! covers the pairs it separates. The uncovered pairs are exactly the pairs
//! inside blocks of the current partition, so adding column `k` newly covers
//!
//! ```text
//! g_k = ½ Σ_i ( |C_i|² − Σ_a |D_a^(i)|² )
//! ```
//!
//! where `C_i` are the current blocks and `D_a^(i)` the pieces `k` splits
//! `C_i` into. With a per-column [`LookupTable`] each `g_k` costs O(|R|).

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSet, SampleRows};
use crate::error::{Error, Result};
use crate::filter::TupleSketch;
use crate::separation::{LookupTable, Partition};

/// Column cap for [`exact_minkey`].
pub const EXACT_COLUMN_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub column: usize,
    pub gain: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyKey {
    /// Chosen columns in selection order.
    pub columns: Vec<usize>,
    pub steps: Vec<GreedyStep>,
    /// Sampled pairs still unseparated (non-zero only with duplicate rows).
    pub residual_pairs: u64,
    pub sample_size: usize,
}

impl GreedyKey {
    pub fn attribute_set(&self) -> AttributeSet {
        AttributeSet::from_mask(self.columns.iter().fold(0, |m, &k| m | 1 << k))
    }
}

pub fn greedy_minkey(sketch: &TupleSketch) -> GreedyKey {
    greedy_on_rows(sketch.rows())
}

/// Greedy set cover over the pairs of `rows`, ties to the smallest column.
pub fn greedy_on_rows(rows: &SampleRows) -> GreedyKey {
    let table = LookupTable::build(rows);
    let m = rows.n_cols();
    let mut partition = Partition::trivial(rows.len());
    let mut chosen = vec![false; m];
    let mut steps = Vec::new();

    while !partition.is_discrete() {
        let before = partition.square_sum();
        let mut best: Option<(usize, u64)> = None;
        for k in (0..m).filter(|&k| !chosen[k]) {
            let ids = table.column(k);
            let after = partition.split_square_sum(|j| ids[j], table.cardinality(k));
            let gain = (before - after) / 2;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((k, gain));
            }
        }
        match best {
            Some((column, gain)) if gain > 0 => {
                chosen[column] = true;
                partition = partition.refine_with_lookup(&table, column);
                steps.push(GreedyStep { column, gain });
            }
            _ => break,
        }
    }

    GreedyKey {
        columns: steps.iter().map(|s| s.column).collect(),
        residual_pairs: partition.unseparated_pairs(),
        steps,
        sample_size: rows.len(),
    }
}

/// Smallest attribute set separating every pair of `rows`, or `None` when
/// duplicate rows make that impossible. Candidates are tried by size, then
/// lexicographically, so the answer is deterministic.
pub fn exact_minkey(rows: &SampleRows) -> Result<Option<AttributeSet>> {
    let m = rows.n_cols();
    if m > EXACT_COLUMN_CAP {
        return Err(Error::TooManyColumns {
            columns: m,
            cap: EXACT_COLUMN_CAP,
        });
    }
    if !separates_all(rows, &AttributeSet::full(m)) {
        return Ok(None);
    }
    for size in 0..=m {
        let mut found = None;
        for_each_combination(m, size, |combo| {
            let a = AttributeSet::from_mask(combo.iter().fold(0, |acc, &k| acc | 1 << k));
            if separates_all(rows, &a) {
                found = Some(a);
                return false;
            }
            true
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    unreachable!("the full column set separates all rows")
}

fn separates_all(rows: &SampleRows, attrs: &AttributeSet) -> bool {
    let mut keys: Vec<Vec<u32>> = (0..rows.len())
        .map(|i| attrs.iter().map(|k| rows.code(i, k)).collect())
        .collect();
    keys.sort_unstable();
    keys.windows(2).all(|w| w[0] != w[1])
}

/// Calls `f` on each `size`-subset of `0..m` in lexicographic order until it
/// returns false.
fn for_each_combination(m: usize, size: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if size > m {
        return;
    }
    let mut combo: Vec<usize> = (0..size).collect();
    loop {
        if !f(&combo) {
            return;
        }
        let Some(i) = (0..size).rev().find(|&i| combo[i] != i + m - size) else {
            return;
        };
        combo[i] += 1;
        for j in i + 1..size {
            combo[j] = combo[j - 1] + 1;
        }
    }
}
