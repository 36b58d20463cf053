//! Hard instances for the sketches.
//!
//! - [`gen_grid`]: every tuple of `{1..q}^m`. Each singleton splits the rows
//!   into `q` equal cliques.
//! - [`gen_clique`]: one column with a single large clique, everything else
//!   distinct.
//! - [`gen_encoding`]: the bit-matrix gadget whose `Γ_A` has the closed form
//!   [`closed_form_gamma`].

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::dataset::{Dataset, SampleRows};
use crate::error::{invalid, Result};
use crate::filter::TupleSketch;
use crate::sampling::{self, floor_tolerant};
use crate::separation::check_fraction;

pub const DEFAULT_ROW_CAP: u64 = 10_000_000;

/// `q^m`, or `None` on overflow.
pub fn grid_rows(q: u32, m: usize) -> Option<u64> {
    u32::try_from(m).ok().and_then(|m| (q as u64).checked_pow(m))
}

/// All `q^m` tuples over the values `"1"..="q"`, in lexicographic row order.
pub fn gen_grid(q: u32, m: usize, row_cap: u64) -> Result<Dataset> {
    if q == 0 || m == 0 {
        return Err(invalid("grid needs q >= 1 and m >= 1"));
    }
    let n = grid_rows(q, m)
        .filter(|&n| n <= row_cap)
        .ok_or_else(|| invalid(format!("{q}^{m} rows exceed the cap of {row_cap}")))? as usize;
    let labels: Vec<String> = (1..=q).map(|v| v.to_string()).collect();
    let columns = (0..m)
        .map(|k| {
            // column k cycles with period q^(m-k), each value held for q^(m-k-1) rows
            let hold = (q as usize).pow((m - k - 1) as u32);
            (0..n).map(|row| labels[(row / hold) % q as usize].clone()).collect()
        })
        .collect();
    Dataset::from_columns(columns, None)
}

/// A tuple sketch of `r` distinct rows drawn uniformly from `{1..q}^m`
/// without building the grid. Codes match what [`gen_grid`] would assign.
///
/// Uniform tuples are drawn and duplicates discarded, which is exactly
/// sampling without replacement. `r` may not exceed `q^m`.
pub fn grid_tuple_sketch(q: u32, m: usize, r: usize, epsilon: f64, seed: u64) -> Result<TupleSketch> {
    check_fraction("epsilon", epsilon)?;
    if q == 0 || m == 0 {
        return Err(invalid("grid needs q >= 1 and m >= 1"));
    }
    if grid_rows(q, m).is_some_and(|n| (r as u64) > n) {
        return Err(invalid(format!("cannot draw {r} distinct rows from {q}^{m}")));
    }
    // dictionary codes are lexicographic ranks of the labels "1".."q"
    let mut labels: Vec<(String, u32)> = (1..=q).map(|v| (v.to_string(), v)).collect();
    labels.sort_unstable();
    let mut rank = vec![0u32; q as usize + 1];
    for (i, (_, v)) in labels.iter().enumerate() {
        rank[*v as usize] = i as u32;
    }

    let mut rng = sampling::rng(seed);
    let mut seen = HashSet::with_capacity(r);
    let mut codes = Vec::with_capacity(r * m);
    let mut source = Vec::with_capacity(r);
    while source.len() < r {
        let tuple: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=q)).collect();
        if !seen.insert(tuple.clone()) {
            continue;
        }
        // lexicographic row index when it fits, else the draw position
        let row = tuple
            .iter()
            .try_fold(0usize, |acc, &v| acc.checked_mul(q as usize)?.checked_add(v as usize - 1))
            .unwrap_or(source.len());
        source.push(row);
        codes.extend(tuple.iter().map(|&v| rank[v as usize]));
    }
    let n = grid_rows(q, m).map_or(usize::MAX, |n| usize::try_from(n).unwrap_or(usize::MAX));
    let constant = r as f64 * epsilon.sqrt() / m as f64;
    Ok(TupleSketch::from_sample(SampleRows::new(m, source, codes)?, epsilon, constant, seed, n))
}

/// Size of the shared clique in [`gen_clique`]: `⌊√(2ε)·n⌋`.
pub fn clique_size(n: usize, epsilon: f64) -> u64 {
    floor_tolerant((2.0 * epsilon).sqrt() * n as f64)
}

/// `n` rows where column 0 holds `"1"` on the first `⌊√(2ε)·n⌋` rows and
/// distinct values `"2", "3", …` elsewhere. Columns `1..m` spell the row index
/// in a fixed radix, so the full column set is a key.
pub fn gen_clique(n: usize, epsilon: f64, m: usize) -> Result<Dataset> {
    check_fraction("epsilon", epsilon)?;
    if m < 2 {
        return Err(invalid("clique instance needs at least 2 columns"));
    }
    let size = clique_size(n, epsilon) as usize;
    if size < 2 {
        return Err(invalid(format!("clique of size {size} is too small; raise n or epsilon")));
    }
    if size > n {
        return Err(invalid(format!("clique of size {size} exceeds n = {n}")));
    }
    let digits = m - 1;
    let mut radix = 2usize;
    while radix.checked_pow(digits as u32).is_some_and(|p| p < n) {
        radix += 1;
    }

    let mut columns = Vec::with_capacity(m);
    columns.push(
        (0..n)
            .map(|row| if row < size { "1".to_string() } else { (row - size + 2).to_string() })
            .collect(),
    );
    let mut place = 1usize;
    for _ in 0..digits {
        columns.push((0..n).map(|row| ((row / place) % radix).to_string()).collect());
        place = place.saturating_mul(radix);
    }
    Dataset::from_columns(columns, None)
}

/// A `kt × m` 0/1 matrix, row-major, with exactly `k` ones per column at
/// uniformly random rows.
pub fn random_encoding_matrix<R: Rng + ?Sized>(rng: &mut R, k: usize, t: usize, m: usize) -> Vec<Vec<u8>> {
    let rows = k * t;
    let mut c = vec![vec![0u8; m]; rows];
    for col in 0..m {
        for row in index::sample(rng, rows, k.min(rows)) {
            c[row][col] = 1;
        }
    }
    c
}

/// The `2kt × (m + kt)` gadget: the top `kt` rows are `C` followed by an
/// identity block; the bottom `kt` rows are all ones followed by zeros.
/// Cells are written as `"0"` / `"1"`.
pub fn gen_encoding(c: &[Vec<u8>], k: usize, t: usize) -> Result<Dataset> {
    let half = k * t;
    if k == 0 || t == 0 {
        return Err(invalid("encoding gadget needs k, t >= 1"));
    }
    if c.len() != half {
        return Err(invalid(format!("matrix has {} rows, expected k*t = {half}", c.len())));
    }
    let m = c[0].len();
    if m == 0 || c.iter().any(|row| row.len() != m) {
        return Err(invalid("matrix rows must be non-empty and equally long"));
    }
    if c.iter().flatten().any(|&b| b > 1) {
        return Err(invalid("matrix entries must be 0 or 1"));
    }
    for col in 0..m {
        let weight = c.iter().filter(|row| row[col] == 1).count();
        if weight != k {
            return Err(invalid(format!("column {col} has {weight} ones, expected {k}")));
        }
    }
    let bit = |b: bool| if b { "1" } else { "0" };
    let rows: Vec<Vec<&str>> = (0..2 * half)
        .map(|i| {
            let left = (0..m).map(|j| if i < half { bit(c[i][j] == 1) } else { "1" });
            let right = (0..half).map(|j| bit(i == j));
            left.chain(right).collect()
        })
        .collect();
    Dataset::from_rows(&rows, None)
}

/// Unseparated pairs of the gadget for `A = {c} ∪ {m + r : r ∈ R}` with
/// `|R| = k` guessed rows, `u` of which hold a one in column `c`:
/// `(t² − t + 5/2)k² − (t − 1/2)k + u² − 3ku`.
pub fn closed_form_gamma(k: u64, t: u64, u: u64) -> Result<i64> {
    if u > k {
        return Err(invalid(format!("u = {u} exceeds k = {k}")));
    }
    let (k, t, u) = (k as i64, t as i64, u as i64);
    // (2t² − 2t + 5)k² − (2t − 1)k is always even
    Ok(((2 * t * t - 2 * t + 5) * k * k - (2 * t - 1) * k) / 2 + u * u - 3 * k * u)
}
