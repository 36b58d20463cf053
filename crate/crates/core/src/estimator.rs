//! Pair-sample estimator of `Γ_A` for attribute sets of size at most `k`.
//!
//! Stores `S = ⌈K·k·log₂m / (α·ε²)⌉` uniformly drawn row pairs. A query counts
//! the pairs `A` leaves unseparated (`D_A`); below `K·k·log₂m / (10·ε²)` the
//! answer is [`Estimate::Small`], otherwise `D_A · (n choose 2) / S`.

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::dataset::{AttributeSet, Dataset, SampleRows};
use crate::error::{invalid, Error, Result};
use crate::filter::check_constant;
use crate::sampling;
use crate::separation::{check_fraction, total_pairs};

pub const DEFAULT_K: f64 = 10.0;

/// Serializes as `{"result":"small"}` or `{"estimate":..,"d_a":..,"pairs":..}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Small,
    Value {
        estimate: f64,
        d_a: u64,
        pairs: u64,
    },
}

impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            Estimate::Small => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("result", "small")?;
                map.end()
            }
            Estimate::Value { estimate, d_a, pairs } => {
                let mut map = serializer.serialize_map(Some(3))?;
                map.serialize_entry("estimate", &estimate)?;
                map.serialize_entry("d_a", &d_a)?;
                map.serialize_entry("pairs", &pairs)?;
                map.end()
            }
        }
    }
}

impl Estimate {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Estimate::Value { estimate, .. } => Some(estimate),
            Estimate::Small => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSketch {
    /// Pair `i` is rows `2i` and `2i + 1`.
    pub(crate) rows: SampleRows,
    pub(crate) max_query: usize,
    pub(crate) alpha: f64,
    pub(crate) epsilon: f64,
    pub(crate) constant: f64,
    pub(crate) seed: u64,
    pub(crate) n: usize,
    pub(crate) names: Option<Vec<String>>,
}

/// `⌈K·k·log₂m / (α·ε²)⌉`.
pub fn estimator_pairs(m: usize, k: usize, alpha: f64, epsilon: f64, constant: f64) -> Result<u64> {
    check_params(m, k, alpha, epsilon, constant)?;
    Ok(sampling::ceil_tolerant(
        constant * k as f64 * (m as f64).log2() / (alpha * epsilon * epsilon),
    ))
}

fn check_params(m: usize, k: usize, alpha: f64, epsilon: f64, constant: f64) -> Result<()> {
    check_fraction("alpha", alpha)?;
    check_fraction("epsilon", epsilon)?;
    check_constant(constant)?;
    if m < 2 {
        return Err(invalid(format!("estimator needs at least 2 columns, got {m}")));
    }
    if k == 0 || k > m {
        return Err(invalid(format!("query size bound k={k} must lie in 1..={m}")));
    }
    Ok(())
}

impl EstimatorSketch {
    pub fn build(ds: &Dataset, k: usize, alpha: f64, epsilon: f64, constant: f64, seed: u64) -> Result<Self> {
        let count = estimator_pairs(ds.n_cols(), k, alpha, epsilon, constant)? as usize;
        if ds.n_rows() < 2 {
            return Err(invalid("estimator needs at least 2 rows"));
        }
        let mut rng = sampling::rng(seed);
        let mut flat = Vec::with_capacity(2 * count);
        for _ in 0..count {
            let (i, j) = sampling::sample_pair(&mut rng, ds.n_rows());
            flat.push(i);
            flat.push(j);
        }
        Ok(Self {
            rows: ds.gather(&flat)?,
            max_query: k,
            alpha,
            epsilon,
            constant,
            seed,
            n: ds.n_rows(),
            names: ds.names().map(<[String]>::to_vec),
        })
    }

    /// `D_A`: stored pairs agreeing on all of `attrs`.
    pub fn unseparated_in_sample(&self, attrs: &AttributeSet) -> Result<u64> {
        self.check_query(attrs)?;
        Ok((0..self.pair_count())
            .filter(|&i| self.rows.agree_on(2 * i, 2 * i + 1, attrs))
            .count() as u64)
    }

    pub fn estimate(&self, attrs: &AttributeSet) -> Result<Estimate> {
        let d_a = self.unseparated_in_sample(attrs)?;
        if (d_a as f64) < self.small_threshold() {
            return Ok(Estimate::Small);
        }
        let pairs = self.pair_count() as u64;
        Ok(Estimate::Value {
            estimate: d_a as f64 * total_pairs(self.n) as f64 / pairs as f64,
            d_a,
            pairs,
        })
    }

    /// `K·k·log₂m / (10·ε²)`. Carries no `α`, so it equals `α·S/10`.
    pub fn small_threshold(&self) -> f64 {
        self.constant * self.max_query as f64 * (self.n_cols() as f64).log2()
            / (10.0 * self.epsilon * self.epsilon)
    }

    fn check_query(&self, attrs: &AttributeSet) -> Result<()> {
        attrs.check_bound(self.n_cols())?;
        if attrs.len() > self.max_query {
            return Err(Error::QueryTooLarge {
                size: attrs.len(),
                max: self.max_query,
            });
        }
        Ok(())
    }

    pub fn pair_count(&self) -> usize {
        self.rows.len() / 2
    }

    pub fn n_cols(&self) -> usize {
        self.rows.n_cols()
    }

    pub fn source_rows(&self) -> usize {
        self.n
    }

    pub fn max_query(&self) -> usize {
        self.max_query
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
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

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(m: usize, n: usize, f: impl Fn(usize, usize) -> u32) -> Dataset {
        let cols = (0..m).map(|k| (0..n).map(|r| f(r, k).to_string()).collect()).collect();
        Dataset::from_columns(cols, None).unwrap()
    }

    #[test]
    fn pair_count_formula() {
        assert_eq!(estimator_pairs(16, 4, 0.1, 0.1, 1.0).unwrap(), 16000);
        assert!(estimator_pairs(16, 1, 0.5, 1.0, 1.0).is_err());
        assert!(estimator_pairs(16, 1, 1.0, 0.5, 1.0).is_err());
        assert!(estimator_pairs(1, 1, 0.5, 0.5, 1.0).is_err());
        assert!(estimator_pairs(4, 5, 0.5, 0.5, 1.0).is_err());
        assert!(estimator_pairs(4, 0, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn too_few_rows() {
        let d = ds(2, 1, |_, _| 0);
        assert!(EstimatorSketch::build(&d, 1, 0.5, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn key_is_small_and_empty_set_is_exact() {
        let d = ds(4, 50, |r, k| if k == 0 { r as u32 } else { (r % 3) as u32 });
        let sk = EstimatorSketch::build(&d, 2, 0.5, 0.5, 1.0, 7).unwrap();
        assert_eq!(sk.estimate(&AttributeSet::singleton(0)).unwrap(), Estimate::Small);
        match sk.estimate(&AttributeSet::empty()).unwrap() {
            Estimate::Value { estimate, d_a, pairs } => {
                assert_eq!(d_a, pairs);
                assert_eq!(estimate, total_pairs(50) as f64);
            }
            Estimate::Small => panic!("empty set cannot be small"),
        }
    }

    #[test]
    fn oversized_query_is_refused() {
        let d = ds(4, 10, |r, k| (r + k) as u32);
        let sk = EstimatorSketch::build(&d, 1, 0.5, 0.5, 1.0, 0).unwrap();
        assert!(matches!(
            sk.estimate(&AttributeSet::full(2)),
            Err(Error::QueryTooLarge { size: 2, max: 1 })
        ));
    }

    #[test]
    fn json_shapes() {
        let small = serde_json::to_string(&Estimate::Small).unwrap();
        assert_eq!(small, r#"{"result":"small"}"#);
        let v = Estimate::Value {
            estimate: 1.5,
            d_a: 3,
            pairs: 9,
        };
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"estimate":1.5,"d_a":3,"pairs":9}"#);
    }
}
