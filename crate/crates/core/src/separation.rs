//! Exact separation machinery.
//!
//! Rows left unseparated by an attribute set form an equivalence relation,
//! so its graph is a disjoint union of cliques. A [`Partition`] stores those
//! cliques as dense blocks over a row set; refining by one more column splits
//! every block by that column's value. `Γ_A` is then `Σ |b|(|b|-1)/2`.

use std::collections::HashMap;

use crate::dataset::{AttributeSet, Dataset, SampleRows};
use crate::error::{invalid, Error, Result};

/// Cap on the column count for exhaustive subset enumeration.
pub const SUBSET_ENUMERATION_CAP: usize = 20;

const EMPTY_SLOT: u32 = u32::MAX;

/// Disjoint blocks over positions `0..len` of some row set.
///
/// Block ids are dense. Members of each block are also kept grouped so a
/// refinement can walk block by block in linear time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<u32>,
    block_sizes: Vec<u32>,
    offsets: Vec<u32>,
    order: Vec<u32>,
}

impl Partition {
    /// Everything in one block: the partition induced by the empty set.
    pub fn trivial(len: usize) -> Self {
        Self::from_block_of(vec![0; len], usize::from(len > 0))
    }

    /// Builds a partition from a block assignment with ids in `0..num_blocks`,
    /// every id used at least once.
    pub fn from_block_of(block_of: Vec<u32>, num_blocks: usize) -> Self {
        let mut block_sizes = vec![0u32; num_blocks];
        for &b in &block_of {
            block_sizes[b as usize] += 1;
        }
        debug_assert!(block_sizes.iter().all(|&s| s > 0), "empty block");
        let mut offsets = Vec::with_capacity(num_blocks + 1);
        offsets.push(0u32);
        for &s in &block_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let mut cursor = offsets.clone();
        let mut order = vec![0u32; block_of.len()];
        for (j, &b) in block_of.iter().enumerate() {
            order[cursor[b as usize] as usize] = j as u32;
            cursor[b as usize] += 1;
        }
        Self {
            block_of,
            block_sizes,
            offsets,
            order,
        }
    }

    /// Number of positions covered.
    pub fn len(&self) -> usize {
        self.block_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_of.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_of(&self) -> &[u32] {
        &self.block_of
    }

    pub fn block_sizes(&self) -> &[u32] {
        &self.block_sizes
    }

    /// Positions in block `b`, in increasing order.
    pub fn members(&self, b: usize) -> &[u32] {
        &self.order[self.offsets[b] as usize..self.offsets[b + 1] as usize]
    }

    /// True when every block is a singleton.
    pub fn is_discrete(&self) -> bool {
        self.num_blocks() == self.len()
    }

    /// Pairs of positions sharing a block.
    pub fn unseparated_pairs(&self) -> u64 {
        self.block_sizes.iter().map(|&s| pairs(s as u64)).sum()
    }

    /// Splits each block by `key(position)`, bucketing on hashed
    /// `(block, key)` pairs. New ids follow first appearance by position.
    pub fn refine_hashed(&self, key: impl Fn(usize) -> u32) -> Self {
        let mut ids: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.num_blocks());
        let block_of: Vec<u32> = self
            .block_of
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let next = ids.len() as u32;
                *ids.entry((b, key(j))).or_insert(next)
            })
            .collect();
        let num_blocks = ids.len();
        Self::from_block_of(block_of, num_blocks)
    }

    /// Splits each block by sorting positions on `(block, key)`. New ids
    /// follow that sorted order.
    pub fn refine_sorted(&self, key: impl Fn(usize) -> u32) -> Self {
        let mut tagged: Vec<(u32, u32, u32)> = self
            .block_of
            .iter()
            .enumerate()
            .map(|(j, &b)| (b, key(j), j as u32))
            .collect();
        tagged.sort_unstable();
        let mut block_of = vec![0u32; self.len()];
        let mut next = 0u32;
        for (i, &(b, v, j)) in tagged.iter().enumerate() {
            if i > 0 && (tagged[i - 1].0, tagged[i - 1].1) != (b, v) {
                next += 1;
            }
            block_of[j as usize] = next;
        }
        let num_blocks = if tagged.is_empty() { 0 } else { next as usize + 1 };
        Self::from_block_of(block_of, num_blocks)
    }

    /// Splits each block by a dense key in `0..key_bound`, walking block by
    /// block with a scratch slot array. Linear in `len + key_bound`.
    pub fn refine_dense(&self, key: impl Fn(usize) -> u32, key_bound: usize) -> Self {
        let mut slot = vec![EMPTY_SLOT; key_bound];
        let mut touched = Vec::new();
        let mut block_of = vec![0u32; self.len()];
        let mut next = 0u32;
        for b in 0..self.num_blocks() {
            for &j in self.members(b) {
                let v = key(j as usize) as usize;
                if slot[v] == EMPTY_SLOT {
                    slot[v] = next;
                    next += 1;
                    touched.push(v);
                }
                block_of[j as usize] = slot[v];
            }
            for v in touched.drain(..) {
                slot[v] = EMPTY_SLOT;
            }
        }
        Self::from_block_of(block_of, next as usize)
    }

    /// Refinement by column `k` of the row set `table` was built over.
    pub fn refine_with_lookup(&self, table: &LookupTable, k: usize) -> Self {
        let ids = table.column(k);
        self.refine_dense(|j| ids[j], table.cardinality(k))
    }

    /// Σ over blocks of Σ over sub-blocks of `|D|²` after splitting by a dense
    /// key, without materializing the refinement.
    pub fn split_square_sum(&self, key: impl Fn(usize) -> u32, key_bound: usize) -> u64 {
        let mut count = vec![0u32; key_bound];
        let mut touched = Vec::new();
        let mut total = 0u64;
        for b in 0..self.num_blocks() {
            for &j in self.members(b) {
                let v = key(j as usize) as usize;
                if count[v] == 0 {
                    touched.push(v);
                }
                count[v] += 1;
            }
            for v in touched.drain(..) {
                total += (count[v] as u64).pow(2);
                count[v] = 0;
            }
        }
        total
    }

    /// Σ over blocks of `|C|²`.
    pub fn square_sum(&self) -> u64 {
        self.block_sizes.iter().map(|&s| (s as u64).pow(2)).sum()
    }

    /// Same blocks up to relabeling.
    pub fn same_blocks(&self, other: &Partition) -> bool {
        if self.len() != other.len() || self.num_blocks() != other.num_blocks() {
            return false;
        }
        let mut map = vec![EMPTY_SLOT; self.num_blocks()];
        let mut used = vec![false; other.num_blocks()];
        for (&a, &b) in self.block_of.iter().zip(&other.block_of) {
            let slot = &mut map[a as usize];
            if *slot == EMPTY_SLOT {
                if used[b as usize] {
                    return false;
                }
                used[b as usize] = true;
                *slot = b;
            } else if *slot != b {
                return false;
            }
        }
        true
    }
}

fn pairs(s: u64) -> u64 {
    s * s.saturating_sub(1) / 2
}

/// `n choose 2`.
pub fn total_pairs(n: usize) -> u64 {
    pairs(n as u64)
}

/// Per-column dense block ids over a fixed row set: `column(k)[j]` is the
/// block of position `j` when partitioning by column `k` alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    ids: Vec<Vec<u32>>,
    cardinality: Vec<usize>,
}

impl LookupTable {
    /// Builds the table by sorting each column of the sample.
    pub fn build(sample: &SampleRows) -> Self {
        let r = sample.len();
        let (ids, cardinality) = (0..sample.n_cols())
            .map(|k| {
                let mut by_value: Vec<(u32, u32)> = (0..r).map(|j| (sample.code(j, k), j as u32)).collect();
                by_value.sort_unstable();
                let mut col = vec![0u32; r];
                let mut next = 0u32;
                for (i, &(v, j)) in by_value.iter().enumerate() {
                    if i > 0 && by_value[i - 1].0 != v {
                        next += 1;
                    }
                    col[j as usize] = next;
                }
                (col, if r == 0 { 0 } else { next as usize + 1 })
            })
            .unzip();
        Self { ids, cardinality }
    }

    pub fn n_cols(&self) -> usize {
        self.ids.len()
    }

    pub fn column(&self, k: usize) -> &[u32] {
        &self.ids[k]
    }

    /// Distinct values of column `k` within the row set.
    pub fn cardinality(&self, k: usize) -> usize {
        self.cardinality[k]
    }
}

/// Refines `p` (over `rows`) by column `k` of `ds`.
pub fn partition_by_attribute(p: &Partition, ds: &Dataset, rows: &[usize], k: usize) -> Result<Partition> {
    if k >= ds.n_cols() {
        return Err(Error::ColumnOutOfRange {
            index: k,
            columns: ds.n_cols(),
        });
    }
    if p.len() != rows.len() {
        return Err(invalid(format!(
            "partition covers {} positions but {} rows were given",
            p.len(),
            rows.len()
        )));
    }
    for &r in rows {
        ds.check_row(r)?;
    }
    let col = ds.column(k);
    Ok(p.refine_hashed(|j| col[rows[j]]))
}

/// Partition of all dataset rows by `attrs`.
///
/// Dictionary codes are already dense per column, so each step is the
/// linear slot-array refinement with the column itself as lookup table.
pub fn partition_dataset(ds: &Dataset, attrs: &AttributeSet) -> Result<Partition> {
    ds.check_attrs(attrs)?;
    let mut p = Partition::trivial(ds.n_rows());
    for k in attrs.iter() {
        let col = ds.column(k);
        p = p.refine_dense(|j| col[j], ds.dictionary(k).len());
    }
    Ok(p)
}

/// Partition of the rows of a sample by `attrs`.
pub fn partition_sample(sample: &SampleRows, attrs: &AttributeSet) -> Partition {
    let mut p = Partition::trivial(sample.len());
    for k in attrs.iter() {
        p = p.refine_hashed(|j| sample.code(j, k));
    }
    p
}

/// Exact `Γ_A`: the number of row pairs `attrs` does not separate.
pub fn count_unseparated(ds: &Dataset, attrs: &AttributeSet) -> Result<u64> {
    Ok(partition_dataset(ds, attrs)?.unseparated_pairs())
}

/// True when `attrs` separates fewer than `(1-ε)·n(n-1)/2` pairs, i.e.
/// `Γ_A > ε·n(n-1)/2`.
pub fn is_bad(ds: &Dataset, attrs: &AttributeSet, epsilon: f64) -> Result<bool> {
    check_fraction("epsilon", epsilon)?;
    let gamma = count_unseparated(ds, attrs)?;
    Ok(exceeds_fraction(gamma, epsilon, ds.n_rows()))
}

/// `gamma > epsilon · n(n-1)/2`.
pub fn exceeds_fraction(gamma: u64, epsilon: f64, n: usize) -> bool {
    gamma as f64 > epsilon * total_pairs(n) as f64
}

/// `Γ_A` for every subset `A` of the columns, indexed by bit mask.
pub fn count_unseparated_all_subsets(ds: &Dataset) -> Result<Vec<u64>> {
    let m = ds.n_cols();
    if m > SUBSET_ENUMERATION_CAP {
        return Err(Error::TooManyColumns {
            columns: m,
            cap: SUBSET_ENUMERATION_CAP,
        });
    }
    let mut out = vec![0u64; 1 << m];
    fn visit(ds: &Dataset, p: &Partition, mask: usize, next: usize, out: &mut [u64]) {
        out[mask] = p.unseparated_pairs();
        for k in next..ds.n_cols() {
            let col = ds.column(k);
            let child = if p.is_discrete() {
                p.clone()
            } else {
                p.refine_dense(|j| col[j], ds.dictionary(k).len())
            };
            visit(ds, &child, mask | 1 << k, k + 1, out);
        }
    }
    visit(ds, &Partition::trivial(ds.n_rows()), 0, 0, &mut out);
    Ok(out)
}

pub(crate) fn check_fraction(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {x}")))
    }
}
