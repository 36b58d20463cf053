use std::collections::HashSet;

use proptest::prelude::*;

use qikey_core::analysis::{elementary_symmetric, non_collision_prob, CliqueSizeVector, DrawMode};
use qikey_core::minkey::greedy_on_rows;
use qikey_core::separation::{count_unseparated, partition_dataset, partition_sample, Partition};
use qikey_core::sketch_io::{read_sketch, write_sketch, StoredSketch};
use qikey_core::{AttributeSet, Dataset, Decision, EstimatorSketch, PairSketch, TupleSketch};

/// Row-major cells over a small alphabet, so collisions are common.
fn table(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    (1..=max_cols).prop_flat_map(move |m| {
        prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "", "x,y", "7"]), m), 1..=max_rows)
            .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().map(String::from).collect()).collect())
    })
}

fn dataset(rows: &[Vec<String>]) -> Dataset {
    Dataset::from_rows(rows, None).unwrap()
}

/// Unseparated pairs by checking every pair of rows.
fn brute_gamma(rows: &[Vec<String>], attrs: &AttributeSet) -> u64 {
    let mut count = 0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            count += u64::from(attrs.iter().all(|k| rows[i][k] == rows[j][k]));
        }
    }
    count
}

fn subsets(m: usize) -> impl Iterator<Item = AttributeSet> {
    (0..1u64 << m).map(AttributeSet::from_mask)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(rows in table(30, 5)) {
        let ds = dataset(&rows);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, false).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), false).unwrap();
        prop_assert_eq!(back.n_rows(), ds.n_rows());
        for r in 0..ds.n_rows() {
            for k in 0..ds.n_cols() {
                prop_assert_eq!(back.decode(r, k), rows[r][k].as_str());
                prop_assert_eq!(back.code(r, k), ds.code(r, k));
            }
        }
    }

    #[test]
    fn gamma_matches_pairwise_count(rows in table(60, 4)) {
        let ds = dataset(&rows);
        for a in subsets(ds.n_cols()) {
            prop_assert_eq!(count_unseparated(&ds, &a).unwrap(), brute_gamma(&rows, &a));
        }
    }

    #[test]
    fn adding_a_column_never_increases_gamma(rows in table(50, 5), mask in 0u64..32, extra in 0usize..5) {
        let ds = dataset(&rows);
        let m = ds.n_cols();
        let a = AttributeSet::from_mask(mask & ((1 << m) - 1));
        let b = a.with(extra % m);
        prop_assert!(count_unseparated(&ds, &b).unwrap() <= count_unseparated(&ds, &a).unwrap());
    }

    #[test]
    fn refinement_paths_agree(keys in prop::collection::vec(0u32..6, 1..80), seed_blocks in prop::collection::vec(0u32..4, 80)) {
        let n = keys.len();
        let p = Partition::trivial(n).refine_hashed(|j| seed_blocks[j]);
        let hashed = p.refine_hashed(|j| keys[j]);
        let sorted = p.refine_sorted(|j| keys[j]);
        let dense = p.refine_dense(|j| keys[j], 6);
        prop_assert!(hashed.same_blocks(&sorted));
        prop_assert!(hashed.same_blocks(&dense));
        prop_assert_eq!(hashed.unseparated_pairs(), dense.unseparated_pairs());
    }

    #[test]
    fn sample_partition_matches_dataset_partition(rows in table(40, 4)) {
        let ds = dataset(&rows);
        let all: Vec<usize> = (0..ds.n_rows()).collect();
        let sample = ds.gather(&all).unwrap();
        for a in subsets(ds.n_cols()) {
            prop_assert!(partition_sample(&sample, &a).same_blocks(&partition_dataset(&ds, &a).unwrap()));
        }
    }

    #[test]
    fn keys_are_always_accepted(rows in table(40, 4), eps in 0.01f64..0.9, c in 0.1f64..4.0, seed: u64) {
        let ds = dataset(&rows);
        let t = TupleSketch::build(&ds, eps, c, seed).unwrap();
        let p = PairSketch::build(&ds, eps, c, seed).unwrap();
        for a in subsets(ds.n_cols()) {
            if count_unseparated(&ds, &a).unwrap() == 0 {
                prop_assert!(t.query(&a).unwrap().is_accept());
                prop_assert!(p.query(&a).unwrap().is_accept());
            }
        }
    }

    #[test]
    fn witnesses_are_genuine(rows in table(40, 4), eps in 0.01f64..0.9, seed: u64) {
        let ds = dataset(&rows);
        let t = TupleSketch::build(&ds, eps, 2.0, seed).unwrap();
        let p = PairSketch::build(&ds, eps, 2.0, seed).unwrap();
        for a in subsets(ds.n_cols()) {
            for d in [t.query(&a).unwrap(), p.query(&a).unwrap()] {
                if let Decision::Reject { witness: [i, j] } = d {
                    prop_assert!(i < j);
                    prop_assert!(a.iter().all(|k| rows[i][k] == rows[j][k]));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_sketch(rows in table(40, 3), seed: u64) {
        let ds = dataset(&rows);
        prop_assert_eq!(TupleSketch::build(&ds, 0.1, 3.0, seed).unwrap(), TupleSketch::build(&ds, 0.1, 3.0, seed).unwrap());
        prop_assert_eq!(PairSketch::build(&ds, 0.1, 3.0, seed).unwrap(), PairSketch::build(&ds, 0.1, 3.0, seed).unwrap());
    }

    #[test]
    fn tuple_sample_rows_are_distinct(n in 1usize..300, size in 1usize..400, seed: u64) {
        let col: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let ds = Dataset::from_columns(vec![col], None).unwrap();
        let t = TupleSketch::with_size(&ds, size, 0.5, seed).unwrap();
        let rows: HashSet<usize> = t.rows().source_rows().iter().copied().collect();
        prop_assert_eq!(rows.len(), size.min(n));
    }

    #[test]
    fn sketches_survive_serialization(rows in table(30, 3), seed: u64) {
        let ds = dataset(&rows);
        let mut stored = vec![
            StoredSketch::Tuple(TupleSketch::build(&ds, 0.2, 1.0, seed).unwrap()),
            StoredSketch::Pair(PairSketch::build(&ds, 0.2, 1.0, seed).unwrap()),
        ];
        if ds.n_rows() >= 2 && ds.n_cols() >= 2 {
            stored.push(StoredSketch::Estimator(EstimatorSketch::build(&ds, 1, 0.5, 0.5, 1.0, seed).unwrap()));
        }
        for s in stored {
            let mut buf = Vec::new();
            write_sketch(&mut buf, &s).unwrap();
            prop_assert_eq!(read_sketch(buf.as_slice()).unwrap(), s);
        }
    }

    #[test]
    fn greedy_separates_every_distinct_pair(rows in table(40, 5)) {
        let mut distinct = rows.clone();
        distinct.sort();
        distinct.dedup();
        let ds = dataset(&distinct);
        let all: Vec<usize> = (0..ds.n_rows()).collect();
        let sample = ds.gather(&all).unwrap();
        let g = greedy_on_rows(&sample);
        prop_assert_eq!(g.residual_pairs, 0);
        prop_assert_eq!(count_unseparated(&ds, &g.attribute_set()).unwrap(), 0);
        let total: u64 = g.steps.iter().map(|s| s.gain).sum();
        prop_assert_eq!(total, brute_gamma(&distinct, &AttributeSet::empty()));
    }

    #[test]
    fn dp_matches_newton_identities(s in prop::collection::vec(0u32..10, 1..=20), r in 0usize..=20) {
        let r = r.min(s.len());
        // exact integer e_r from power sums: k·e_k = Σ (−1)^(i−1) e_(k−i) p_i
        let p: Vec<i128> = (0..=r).map(|k| s.iter().map(|&x| (x as i128).pow(k as u32)).sum()).collect();
        let mut e = vec![1i128];
        for k in 1..=r {
            let acc: i128 = (1..=k).map(|i| if i % 2 == 1 { e[k - i] * p[i] } else { -e[k - i] * p[i] }).sum();
            e.push(acc / k as i128);
        }
        let sf: Vec<f64> = s.iter().map(|&x| x as f64).collect();
        let dp = elementary_symmetric(&sf, r).unwrap();
        let exact = e[r] as f64;
        prop_assert!((dp - exact).abs() <= 1e-8 * exact.abs().max(1.0), "dp {} exact {}", dp, exact);
    }

    #[test]
    fn dp_matches_subset_enumeration(s in prop::collection::vec(0.0f64..3.0, 1..=10), r in 0usize..=10) {
        let r = r.min(s.len());
        let brute: f64 = (0u32..1 << s.len())
            .filter(|m| m.count_ones() as usize == r)
            .map(|m| (0..s.len()).filter(|i| m >> i & 1 == 1).map(|i| s[i]).product::<f64>())
            .sum();
        let dp = elementary_symmetric(&s, r).unwrap();
        prop_assert!((dp - brute).abs() <= 1e-10 * brute.abs().max(1.0));
    }

    #[test]
    fn non_collision_falls_with_more_draws(weights in prop::collection::vec(0u32..6, 2..=15)) {
        prop_assume!(weights.iter().any(|&w| w > 0));
        let n = weights.len() as f64;
        let total: f64 = weights.iter().map(|&w| w as f64).sum();
        let sizes: Vec<f64> = weights.iter().map(|&w| w as f64 * n / total).collect();
        let v = CliqueSizeVector::new(sizes, 0.001);
        for mode in [DrawMode::WithReplacement, DrawMode::WithoutReplacement] {
            let probs: Vec<f64> = (0..=weights.len()).map(|r| non_collision_prob(&v, r, mode).unwrap()).collect();
            prop_assert!(probs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", probs);
        }
    }

    #[test]
    fn merging_cliques_never_helps(sizes in prop::collection::vec(0u32..5, 3..=10), i in 0usize..10, j in 0usize..10, r in 2usize..6) {
        let (i, j) = (i % sizes.len(), j % sizes.len());
        prop_assume!(i != j);
        let n = sizes.len() as f64;
        let total: f64 = sizes.iter().map(|&x| x as f64).sum();
        prop_assume!(total > 0.0);
        let s: Vec<f64> = sizes.iter().map(|&x| x as f64 * n / total).collect();
        let mut merged = s.clone();
        merged[i] += merged[j];
        merged[j] = 0.0;
        let r = r.min(s.len());
        for mode in [DrawMode::WithReplacement, DrawMode::WithoutReplacement] {
            let before = non_collision_prob(&CliqueSizeVector::new(s.clone(), 0.001), r, mode).unwrap();
            let after = non_collision_prob(&CliqueSizeVector::new(merged.clone(), 0.001), r, mode).unwrap();
            prop_assert!(after <= before + 1e-12);
        }
    }
}

#[test]
fn estimator_is_unbiased_on_average() {
    let n = 400;
    // column 0: blocks of 20 rows; Γ = 20 · C(20, 2) = 3800
    let col0: Vec<String> = (0..n).map(|i| (i / 20).to_string()).collect();
    let col1: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let ds = Dataset::from_columns(vec![col0, col1], None).unwrap();
    let a = AttributeSet::singleton(0);
    let gamma = count_unseparated(&ds, &a).unwrap() as f64;
    assert_eq!(gamma, 3800.0);
    let trials = 300;
    let mean = (0..trials)
        .map(|seed| {
            EstimatorSketch::build(&ds, 1, 0.05, 0.2, 10.0, seed)
                .unwrap()
                .estimate(&a)
                .unwrap()
                .value()
                .expect("well above the small threshold")
        })
        .sum::<f64>()
        / trials as f64;
    assert!((mean - gamma).abs() / gamma < 0.02, "mean {mean} vs {gamma}");
}

#[test]
fn greedy_key_is_accepted_by_its_own_sketch() {
    let ds = qikey_core::bench::adult_like(3000, 11).unwrap();
    let sketch = TupleSketch::build(&ds, 0.01, 1.0, 4).unwrap();
    let g = qikey_core::minkey::greedy_minkey(&sketch);
    let found = g.attribute_set();
    assert!(sketch.query(&found).unwrap().is_accept() || g.residual_pairs > 0);
}
