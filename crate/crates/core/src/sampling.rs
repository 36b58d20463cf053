//! Seeded sampling primitives shared by the sketches.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SketchRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SketchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under the same seed, e.g. one per bench trial.
pub fn rng_stream(seed: u64, stream: u64) -> SketchRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// First `r` entries of a Fisher-Yates shuffle of `0..n`, i.e. a uniform
/// sample of `min(r, n)` distinct indices in sampled order.
///
/// Swapped positions live in a hash map, so cost is O(r) regardless of `n`.
pub fn sample_without_replacement<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Vec<usize> {
    let r = r.min(n);
    let mut displaced: HashMap<usize, usize> = HashMap::with_capacity(2 * r);
    let mut out = Vec::with_capacity(r);
    for i in 0..r {
        let j = rng.gen_range(i..n);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        let at_i = *displaced.get(&i).unwrap_or(&i);
        displaced.insert(j, at_i);
        out.push(at_j);
    }
    out
}

/// One pair drawn uniformly from the unordered pairs of `0..n` (`n >= 2`).
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    debug_assert!(n >= 2);
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// `ceil(x)`, except values within 1e-9 (relative) of an integer snap to it,
/// so `13.0 / 0.001` is 13000 and not 13001.
pub fn ceil_tolerant(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

/// `floor(x)` with the same snapping as [`ceil_tolerant`].
pub fn floor_tolerant(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest.max(0.0) as u64
    } else {
        x.floor().max(0.0) as u64
    }
}
