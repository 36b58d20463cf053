//! Tuple-sketch vs pair-sketch benchmark.
//!
//! Each trial builds both sketches with the same constant from its own RNG
//! stream, runs the same random attribute-set queries through both and
//! records timings and whether the two decisions agree.

use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSet, Dataset};
use crate::error::{invalid, Result};
use crate::filter::{PairSketch, TupleSketch, DEFAULT_CONSTANT};
use crate::sampling;
use crate::separation::{check_fraction, count_unseparated, exceeds_fraction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub epsilon: f64,
    pub constant: f64,
    pub queries: usize,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Classify queries with the exact oracle.
    pub oracle: bool,
    /// Report wall-clock times. Off makes the report a pure function of the
    /// inputs.
    pub timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.001,
            constant: DEFAULT_CONSTANT,
            queries: 100,
            trials: 10,
            seed: 0,
            jobs: 0,
            oracle: true,
            timings: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryClass {
    Key,
    Bad,
    /// Neither a key nor bad: either answer is allowed.
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub agreements: usize,
    /// Disagreements on queries the oracle classed as key or bad.
    pub strict_disagreements: usize,
    pub tuple_rejects: usize,
    pub pair_rejects: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuple_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: usize,
    pub columns: usize,
    pub epsilon: f64,
    pub constant: f64,
    pub queries: usize,
    pub trials: usize,
    pub seed: u64,
    pub tuple_sample_size: usize,
    pub pair_sample_size: usize,
    pub size_ratio: f64,
    /// Share of (trial, query) decisions on which the sketches agree.
    pub agreement: f64,
    /// Agreement over queries the oracle classed as key or bad.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_agreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_classes: Option<ClassCounts>,
    /// Mean build + all-queries time per trial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuple_mean_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_mean_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    pub per_trial: Vec<TrialResult>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub key: usize,
    pub bad: usize,
    pub gap: usize,
}

/// `count` non-empty attribute sets, each column included with probability ½.
pub fn random_queries(m: usize, count: usize, seed: u64) -> Vec<AttributeSet> {
    let mut rng = sampling::rng_stream(seed, u64::MAX);
    (0..count)
        .map(|_| loop {
            let picked: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
            if !picked.is_empty() {
                break AttributeSet::new(picked, m).expect("indices below m");
            }
        })
        .collect()
}

pub fn classify(ds: &Dataset, attrs: &AttributeSet, epsilon: f64) -> Result<QueryClass> {
    let gamma = count_unseparated(ds, attrs)?;
    Ok(if gamma == 0 {
        QueryClass::Key
    } else if exceeds_fraction(gamma, epsilon, ds.n_rows()) {
        QueryClass::Bad
    } else {
        QueryClass::Gap
    })
}

pub fn run(ds: &Dataset, cfg: &BenchConfig) -> Result<BenchReport> {
    check_fraction("epsilon", cfg.epsilon)?;
    if cfg.trials == 0 || cfg.queries == 0 {
        return Err(invalid("bench needs at least one trial and one query"));
    }
    let queries = random_queries(ds.n_cols(), cfg.queries, cfg.seed);
    let classes = if cfg.oracle {
        Some(
            queries
                .iter()
                .map(|a| classify(ds, a, cfg.epsilon))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let per_trial = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(ds, cfg, t, &queries, classes.as_deref()))
            .collect::<Result<Vec<_>>>()
    })?;

    let sizes = sketch_sizes(ds, cfg)?;
    let decisions = (cfg.trials * cfg.queries) as f64;
    let agreement = per_trial.iter().map(|t| t.agreements).sum::<usize>() as f64 / decisions;
    let class_counts = classes.as_ref().map(|cs| {
        let mut c = ClassCounts::default();
        for class in cs {
            match class {
                QueryClass::Key => c.key += 1,
                QueryClass::Bad => c.bad += 1,
                QueryClass::Gap => c.gap += 1,
            }
        }
        c
    });
    let strict_agreement = class_counts.and_then(|c| {
        let strict = ((c.key + c.bad) * cfg.trials) as f64;
        let wrong = per_trial.iter().map(|t| t.strict_disagreements).sum::<usize>() as f64;
        (strict > 0.0).then(|| 1.0 - wrong / strict)
    });
    let mean = |f: fn(&TrialResult) -> Option<f64>| -> Option<f64> {
        let xs: Option<Vec<f64>> = per_trial.iter().map(f).collect();
        xs.map(|xs| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    let tuple_mean_ms = mean(|t| t.tuple_ms);
    let pair_mean_ms = mean(|t| t.pair_ms);

    Ok(BenchReport {
        rows: ds.n_rows(),
        columns: ds.n_cols(),
        epsilon: cfg.epsilon,
        constant: cfg.constant,
        queries: cfg.queries,
        trials: cfg.trials,
        seed: cfg.seed,
        tuple_sample_size: sizes.0,
        pair_sample_size: sizes.1,
        size_ratio: sizes.1 as f64 / sizes.0 as f64,
        agreement,
        strict_agreement,
        query_classes: class_counts,
        speedup: tuple_mean_ms.zip(pair_mean_ms).map(|(t, p)| p / t),
        tuple_mean_ms,
        pair_mean_ms,
        per_trial,
    })
}

fn sketch_sizes(ds: &Dataset, cfg: &BenchConfig) -> Result<(usize, usize)> {
    use crate::filter::{required_samples, SampleMode};
    use crate::separation::total_pairs;
    let m = ds.n_cols();
    let tuple = required_samples(m, cfg.epsilon, SampleMode::Tuple, cfg.constant)?.min(ds.n_rows() as u64);
    let pair = required_samples(m, cfg.epsilon, SampleMode::Pair, cfg.constant)?.min(total_pairs(ds.n_rows()));
    Ok((tuple as usize, pair as usize))
}

fn run_trial(
    ds: &Dataset,
    cfg: &BenchConfig,
    trial: usize,
    queries: &[AttributeSet],
    classes: Option<&[QueryClass]>,
) -> Result<TrialResult> {
    // distinct streams for the two sketches of one trial
    let tuple_seed = sampling::rng_stream(cfg.seed, 2 * trial as u64).gen();
    let pair_seed = sampling::rng_stream(cfg.seed, 2 * trial as u64 + 1).gen();

    let start = Instant::now();
    let tuple = TupleSketch::build(ds, cfg.epsilon, cfg.constant, tuple_seed)?;
    let tuple_decisions = queries.iter().map(|a| tuple.query(a)).collect::<Result<Vec<_>>>()?;
    let tuple_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let pair = PairSketch::build(ds, cfg.epsilon, cfg.constant, pair_seed)?;
    let pair_decisions = queries.iter().map(|a| pair.query(a)).collect::<Result<Vec<_>>>()?;
    let pair_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut result = TrialResult {
        trial,
        agreements: 0,
        strict_disagreements: 0,
        tuple_rejects: tuple_decisions.iter().filter(|d| !d.is_accept()).count(),
        pair_rejects: pair_decisions.iter().filter(|d| !d.is_accept()).count(),
        tuple_ms: cfg.timings.then_some(tuple_ms),
        pair_ms: cfg.timings.then_some(pair_ms),
    };
    for (i, (t, p)) in tuple_decisions.iter().zip(&pair_decisions).enumerate() {
        if t.is_accept() == p.is_accept() {
            result.agreements += 1;
        } else if classes.is_some_and(|c| c[i] != QueryClass::Gap) {
            result.strict_disagreements += 1;
        }
    }
    Ok(result)
}

/// Column names and value-range sizes of the synthetic census table.
pub const ADULT_LIKE_COLUMNS: [(&str, usize); 14] = [
    ("age", 73),
    ("workclass", 9),
    ("fnlwgt", 21648),
    ("education", 16),
    ("education_num", 16),
    ("marital_status", 7),
    ("occupation", 15),
    ("relationship", 6),
    ("race", 5),
    ("sex", 2),
    ("capital_gain", 119),
    ("capital_loss", 92),
    ("hours_per_week", 94),
    ("native_country", 42),
];

pub const ADULT_LIKE_ROWS: usize = 32561;

/// A synthetic table shaped like the 1994 US census extract commonly used for
/// k-anonymity work, each column drawing from as many values as the original
/// has distinct ones. Values follow
/// Zipf-like laws; `education_num` is a function of `education`; the two
/// capital columns are mostly zero.
pub fn adult_like(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = sampling::rng(seed);
    let zipf = |card: usize, s: f64| {
        WeightedIndex::new((1..=card).map(|i| 1.0 / (i as f64).powf(s))).expect("positive weights")
    };
    let mut columns: Vec<Vec<String>> = vec![Vec::with_capacity(n); ADULT_LIKE_COLUMNS.len()];
    let dists: Vec<WeightedIndex<f64>> = ADULT_LIKE_COLUMNS
        .iter()
        .map(|&(name, card)| match name {
            "age" | "hours_per_week" => zipf(card, 0.6),
            "fnlwgt" => zipf(card, 0.0),
            _ => zipf(card, 1.1),
        })
        .collect();
    for _ in 0..n {
        for (k, &(name, _)) in ADULT_LIKE_COLUMNS.iter().enumerate() {
            let v = match name {
                "education_num" => columns[3].last().expect("education precedes").clone(),
                "capital_gain" | "capital_loss" if rng.gen_bool(0.92) => "0".to_string(),
                _ => (dists[k].sample(&mut rng) + 1).to_string(),
            };
            columns[k].push(if name == "education_num" { format!("n{v}") } else { v });
        }
    }
    let names = ADULT_LIKE_COLUMNS.iter().map(|(n, _)| n.to_string()).collect();
    Dataset::from_columns(columns, Some(names))
}
