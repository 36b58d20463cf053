//! ε-separation-key filter.
//!
//! [`TupleSketch`] samples `⌈C·m/√ε⌉` rows without replacement and rejects an
//! attribute set iff it leaves some pair of sampled rows unseparated.
//! [`PairSketch`] is the older baseline: `⌈C·m/ε⌉` row pairs drawn
//! uniformly, rejecting iff some stored pair is unseparated.
//!
//! Both are one-sided: a key (an attribute set separating every pair of the
//! dataset) is always accepted, and every rejection carries a witness pair.

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSet, Dataset, SampleRows};
use crate::error::{invalid, Result};
use crate::sampling;
use crate::separation::{check_fraction, total_pairs};

/// Sampling constant used when none is given.
pub const DEFAULT_CONSTANT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Rows sampled without replacement; `⌈C·m/√ε⌉`.
    Tuple,
    /// Row pairs sampled with replacement; `⌈C·m/ε⌉`.
    Pair,
}

/// Sample count before clamping to what the dataset can supply.
pub fn required_samples(m: usize, epsilon: f64, mode: SampleMode, constant: f64) -> Result<u64> {
    check_fraction("epsilon", epsilon)?;
    check_constant(constant)?;
    let scale = match mode {
        SampleMode::Tuple => epsilon.sqrt(),
        SampleMode::Pair => epsilon,
    };
    Ok(sampling::ceil_tolerant(constant * m as f64 / scale))
}

pub(crate) fn check_constant(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("sampling constant must be positive, got {c}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum Decision {
    Accept,
    /// `witness` holds two dataset row indices, ascending, that agree on
    /// every queried attribute.
    Reject { witness: [usize; 2] },
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept)
    }

    pub fn witness(&self) -> Option<[usize; 2]> {
        match *self {
            Decision::Reject { witness } => Some(witness),
            Decision::Accept => None,
        }
    }
}

/// Multiplicative hash of a row's codes on `cols`; high bits are the
/// best mixed.
fn project_hash(row: &[u32], cols: &[usize]) -> u64 {
    const K: u64 = 0x9E37_79B9_7F4A_7C15;
    let h = cols
        .iter()
        .fold(0u64, |h, &k| (h.rotate_left(26) ^ row[k] as u64).wrapping_mul(K));
    h ^ (h >> 29)
}

fn reject(a: usize, b: usize) -> Decision {
    Decision::Reject {
        witness: [a.min(b), a.max(b)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleSketch {
    pub(crate) sample: SampleRows,
    pub(crate) epsilon: f64,
    pub(crate) constant: f64,
    pub(crate) seed: u64,
    pub(crate) n: usize,
    pub(crate) names: Option<Vec<String>>,
}

impl TupleSketch {
    pub fn build(ds: &Dataset, epsilon: f64, constant: f64, seed: u64) -> Result<Self> {
        let want = required_samples(ds.n_cols(), epsilon, SampleMode::Tuple, constant)?;
        let r = want.min(ds.n_rows() as u64) as usize;
        Self::sample(ds, r, epsilon, constant, seed)
    }

    /// A sketch of exactly `min(size, n)` rows, for sample-size sweeps. The
    /// recorded constant is the one that would have produced `size`.
    pub fn with_size(ds: &Dataset, size: usize, epsilon: f64, seed: u64) -> Result<Self> {
        check_fraction("epsilon", epsilon)?;
        let constant = size as f64 * epsilon.sqrt() / ds.n_cols() as f64;
        Self::sample(ds, size.min(ds.n_rows()), epsilon, constant, seed)
    }

    /// Wraps rows that were sampled elsewhere, e.g. from a dataset too large
    /// to materialize.
    pub(crate) fn from_sample(sample: SampleRows, epsilon: f64, constant: f64, seed: u64, n: usize) -> Self {
        Self {
            sample,
            epsilon,
            constant,
            seed,
            n,
            names: None,
        }
    }

    fn sample(ds: &Dataset, r: usize, epsilon: f64, constant: f64, seed: u64) -> Result<Self> {
        let rows = sampling::sample_without_replacement(&mut sampling::rng(seed), ds.n_rows(), r);
        Ok(Self {
            sample: ds.gather(&rows)?,
            epsilon,
            constant,
            seed,
            n: ds.n_rows(),
            names: ds.names().map(<[String]>::to_vec),
        })
    }

    /// Rejects iff two sampled rows agree on all of `attrs`.
    ///
    /// Inserts the sampled rows, keyed by a hash of their projection on
    /// `attrs`, into an open-addressed table and stops at the first row
    /// whose projection is already present. The witness is therefore the
    /// first duplicate in sample order.
    pub fn query(&self, attrs: &AttributeSet) -> Result<Decision> {
        attrs.check_bound(self.n_cols())?;
        let s = &self.sample;
        if s.len() < 2 {
            return Ok(Decision::Accept);
        }
        if attrs.is_empty() {
            return Ok(reject(s.source_row(0), s.source_row(1)));
        }
        let cols = attrs.indices();
        let bits = (2 * s.len()).next_power_of_two().trailing_zeros();
        let mask = (1usize << bits) - 1;
        const EMPTY: u32 = u32::MAX;
        let mut slots: Vec<(u64, u32)> = vec![(0, EMPTY); mask + 1];
        for i in 0..s.len() {
            let row = s.row(i);
            let h = project_hash(row, cols);
            let mut pos = (h >> (64 - bits)) as usize;
            loop {
                let (sh, j) = slots[pos];
                if j == EMPTY {
                    slots[pos] = (h, i as u32);
                    break;
                }
                if sh == h && cols.iter().all(|&k| s.row(j as usize)[k] == row[k]) {
                    return Ok(reject(s.source_row(j as usize), s.source_row(i)));
                }
                pos = (pos + 1) & mask;
            }
        }
        Ok(Decision::Accept)
    }

    pub fn sample_size(&self) -> usize {
        self.sample.len()
    }

    pub fn rows(&self) -> &SampleRows {
        &self.sample
    }

    pub fn n_cols(&self) -> usize {
        self.sample.n_cols()
    }

    /// Row count of the dataset the sketch was drawn from.
    pub fn source_rows(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSketch {
    /// Pair `i` is rows `2i` and `2i + 1`.
    pub(crate) rows: SampleRows,
    pub(crate) epsilon: f64,
    pub(crate) constant: f64,
    pub(crate) seed: u64,
    pub(crate) n: usize,
    pub(crate) names: Option<Vec<String>>,
}

impl PairSketch {
    pub fn build(ds: &Dataset, epsilon: f64, constant: f64, seed: u64) -> Result<Self> {
        let want = required_samples(ds.n_cols(), epsilon, SampleMode::Pair, constant)?;
        let count = want.min(total_pairs(ds.n_rows())) as usize;
        let mut rng = sampling::rng(seed);
        let mut flat = Vec::with_capacity(2 * count);
        for _ in 0..count {
            let (i, j) = sampling::sample_pair(&mut rng, ds.n_rows());
            flat.push(i);
            flat.push(j);
        }
        Ok(Self {
            rows: ds.gather(&flat)?,
            epsilon,
            constant,
            seed,
            n: ds.n_rows(),
            names: ds.names().map(<[String]>::to_vec),
        })
    }

    /// Rejects iff some stored pair agrees on all of `attrs`.
    pub fn query(&self, attrs: &AttributeSet) -> Result<Decision> {
        attrs.check_bound(self.n_cols())?;
        let r = &self.rows;
        Ok((0..self.sample_size())
            .find(|&i| r.agree_on(2 * i, 2 * i + 1, attrs))
            .map_or(Decision::Accept, |i| reject(r.source_row(2 * i), r.source_row(2 * i + 1))))
    }

    /// Number of stored pairs.
    pub fn sample_size(&self) -> usize {
        self.rows.len() / 2
    }

    pub fn pair(&self, i: usize) -> (usize, usize) {
        (self.rows.source_row(2 * i), self.rows.source_row(2 * i + 1))
    }

    pub fn rows(&self) -> &SampleRows {
        &self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.rows.n_cols()
    }

    pub fn source_rows(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }
}
