//! Collision mathematics behind the tuple sketch.
//!
//! If `A` splits the rows into cliques of sizes `s_1, s_2, …` (summing to
//! `n`), drawing `r` rows finds no unseparated pair with probability
//!
//! - with replacement: `r!/n^r · e_r(s)`
//! - without replacement: `r!/(n(n−1)…(n−r+1)) · e_r(s)`
//!
//! where `e_r` is the degree-`r` elementary symmetric polynomial. Bad sets
//! satisfy `Σ s_i² ≥ ε n²/4`; [`worstcase_search`] looks for the clique-size
//! vector that maximizes `e_r` under that constraint.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueSizeVector {
    sizes: Vec<f64>,
    epsilon: f64,
}

/// Relative tolerance for the sum and square-sum constraints.
const FEASIBILITY_TOL: f64 = 1e-9;

impl CliqueSizeVector {
    /// `sizes` has one entry per row, so `n` is its length.
    pub fn new(sizes: Vec<f64>, epsilon: f64) -> Self {
        Self { sizes, epsilon }
    }

    /// Parses `"10,1*30,0*9"`: comma separated values, `v*c` repeats `v`
    /// `c` times.
    pub fn parse(spec: &str, epsilon: f64) -> Result<Self> {
        let mut sizes = Vec::new();
        for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (value, count) = match token.split_once('*') {
                Some((v, c)) => (v, c.trim().parse::<usize>().map_err(|_| invalid(format!("bad repeat in `{token}`")))?),
                None => (token, 1),
            };
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad clique size `{token}`")))?;
            sizes.extend(std::iter::repeat_n(v, count));
        }
        Ok(Self::new(sizes, epsilon))
    }

    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Checks `Σ s = n`, `Σ s² ≥ ε n²/4` and `s ≥ 0`.
    pub fn check_feasible(&self) -> Result<()> {
        let n = self.n() as f64;
        if self.sizes.is_empty() {
            return Err(Error::Infeasible("empty vector".into()));
        }
        if let Some(x) = self.sizes.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Infeasible(format!("negative or non-finite entry {x}")));
        }
        let sum: f64 = self.sizes.iter().sum();
        if (sum - n).abs() > FEASIBILITY_TOL * n {
            return Err(Error::Infeasible(format!("entries sum to {sum}, expected {n}")));
        }
        let sq: f64 = self.sizes.iter().map(|x| x * x).sum();
        let need = self.epsilon * n * n / 4.0;
        if sq < need * (1.0 - FEASIBILITY_TOL) {
            return Err(Error::Infeasible(format!("square sum {sq} below ε n²/4 = {need}")));
        }
        Ok(())
    }
}

/// `e_r(s)`: the sum of all products of `r` distinct entries.
///
/// O(len·r) dynamic program with Neumaier-compensated accumulators.
pub fn elementary_symmetric(s: &[f64], r: usize) -> Result<f64> {
    if r > s.len() {
        return Err(invalid(format!("degree {r} exceeds vector length {}", s.len())));
    }
    let mut sum = vec![0.0f64; r + 1];
    let mut comp = vec![0.0f64; r + 1];
    sum[0] = 1.0;
    for (i, &x) in s.iter().enumerate() {
        for j in (1..=r.min(i + 1)).rev() {
            let term = x * (sum[j - 1] + comp[j - 1]);
            let t = sum[j] + term;
            if sum[j].abs() >= term.abs() {
                comp[j] += (sum[j] - t) + term;
            } else {
                comp[j] += (term - t) + sum[j];
            }
            sum[j] = t;
        }
    }
    Ok(sum[r] + comp[r])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    WithReplacement,
    WithoutReplacement,
}

fn ln_factorial(r: usize) -> f64 {
    (2..=r).map(|i| (i as f64).ln()).sum()
}

/// `ln(n^r / (n(n−1)…(n−r+1)))`, or `None` when `r > n`.
fn ln_replacement_ratio(n: f64, r: usize) -> Option<f64> {
    if r as f64 > n {
        return None;
    }
    Some((0..r).map(|i| n.ln() - (n - i as f64).ln()).sum())
}

/// Probability that `r` draws land in `r` distinct cliques.
pub fn non_collision_prob(v: &CliqueSizeVector, r: usize, mode: DrawMode) -> Result<f64> {
    v.check_feasible()?;
    if r == 0 {
        return Ok(1.0);
    }
    if r > v.n() {
        return Ok(0.0);
    }
    let n = v.n() as f64;
    let scaled: Vec<f64> = v.sizes.iter().map(|x| x / n).collect();
    let e = elementary_symmetric(&scaled, r)?;
    if e <= 0.0 {
        return Ok(0.0);
    }
    let mut ln_p = ln_factorial(r) + e.ln();
    if mode == DrawMode::WithoutReplacement {
        match ln_replacement_ratio(n, r) {
            Some(extra) => ln_p += extra,
            None => return Ok(0.0),
        }
    }
    Ok(ln_p.exp().clamp(0.0, 1.0))
}

/// Smallest `q` with `q(q−1) ≥ 2N·ln(1/δ)`, i.e. the least `q` meeting
/// `q ≥ ½(1 + √(8N ln(1/δ) + 1))`. Clamped to `[2, N + 1]`; `N + 1` balls
/// always collide.
pub fn birthday_min_samples(bins: u64, delta: f64) -> Result<u64> {
    if bins == 0 {
        return Err(invalid("birthday bound needs at least one bin"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let target = 2.0 * bins as f64 * (1.0 / delta).ln();
    let satisfies = |q: u64| (q as f64) * (q as f64 - 1.0) >= target;
    let mut q = (0.5 * (1.0 + (4.0 * target + 1.0).sqrt())).ceil().max(2.0) as u64;
    while !satisfies(q) {
        q += 1;
    }
    while q > 2 && satisfies(q - 1) {
        q -= 1;
    }
    Ok(q.min(bins + 1))
}

/// Exact no-collision probability for `q` balls in `N` equal bins.
pub fn birthday_non_collision(bins: u64, q: u64) -> f64 {
    if q > bins {
        return 0.0;
    }
    (0..q).map(|i| 1.0 - i as f64 / bins as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementClaimReport {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    /// `r(r−1)/m + r − 1`; the comparison needs `n` strictly above it.
    pub threshold: f64,
    pub precondition_holds: bool,
    pub p_with_replacement: f64,
    pub p_without_replacement: f64,
    /// `n^r / (n(n−1)…(n−r+1))`, the exact ratio of the two probabilities.
    pub ratio: f64,
    /// `e^m`.
    pub bound: f64,
    /// `ratio < e^m`.
    pub claim_holds: bool,
}

/// Compares the two non-collision probabilities against the `e^m` factor.
pub fn verify_replacement_claim(v: &CliqueSizeVector, r: usize, m: usize) -> Result<ReplacementClaimReport> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    let n = v.n();
    let threshold = (r * r.saturating_sub(1)) as f64 / m as f64 + r as f64 - 1.0;
    let ratio = ln_replacement_ratio(n as f64, r).map_or(f64::INFINITY, f64::exp);
    let bound = (m as f64).exp();
    Ok(ReplacementClaimReport {
        n,
        r,
        m,
        threshold,
        precondition_holds: n as f64 > threshold,
        p_with_replacement: non_collision_prob(v, r, DrawMode::WithReplacement)?,
        p_without_replacement: non_collision_prob(v, r, DrawMode::WithoutReplacement)?,
        ratio,
        bound,
        claim_holds: ratio < bound,
    })
}

/// Grid resolution of the simplex search: entries are multiples of `n/60`.
pub const GRID_STEPS: u32 = 60;
pub const WORSTCASE_MAX_N: usize = 12;
pub const WORSTCASE_MAX_R: usize = 5;
/// Relative slack when comparing the two search routes.
pub const WORSTCASE_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoValuePoint {
    pub count_a: usize,
    pub a: f64,
    pub count_b: usize,
    pub b: f64,
    pub value: f64,
}

impl TwoValuePoint {
    pub fn to_vector(&self, n: usize) -> Vec<f64> {
        let mut s = vec![self.a; self.count_a];
        s.extend(std::iter::repeat_n(self.b, self.count_b));
        s.resize(n, 0.0);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseReport {
    pub n: usize,
    pub r: usize,
    pub epsilon: f64,
    pub grid_points: u64,
    /// Best grid vector, entries sorted descending.
    pub grid_best: Vec<f64>,
    pub grid_best_value: f64,
    pub grid_best_distinct_positive: usize,
    pub two_value_best: TwoValuePoint,
    /// The two-value family reaches the grid optimum within
    /// [`WORSTCASE_MATCH_TOL`].
    pub attained_by_two_values: bool,
}

/// Maximizes `e_r(s)` over feasible clique-size vectors two ways: a grid over
/// the simplex and a continuous search over vectors with at most two distinct
/// positive values.
pub fn worstcase_search(n: usize, r: usize, epsilon: f64) -> Result<WorstCaseReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n > WORSTCASE_MAX_N || r > WORSTCASE_MAX_R {
        return Err(invalid(format!(
            "search is limited to n <= {WORSTCASE_MAX_N}, r <= {WORSTCASE_MAX_R}"
        )));
    }
    let upper = 1.0 + (1.0 - epsilon.sqrt() / 2.0) * n as f64;
    if r < 4 || r as f64 > upper {
        return Err(invalid(format!("need 4 <= r <= 1 + (1 - sqrt(eps)/2) n = {upper:.3}, got r = {r}")));
    }

    let need = epsilon * n as f64 * n as f64 / 4.0;
    let (grid_points, grid_best, grid_best_value) = grid_search(n, r, epsilon)?;
    let two_value_best = two_value_search(n, r, need);

    let mut distinct: Vec<u32> = grid_best.iter().filter(|&&c| c > 0).copied().collect();
    distinct.dedup();
    let step = n as f64 / GRID_STEPS as f64;
    Ok(WorstCaseReport {
        n,
        r,
        epsilon,
        grid_points,
        grid_best: grid_best.iter().map(|&c| c as f64 * step).collect(),
        grid_best_value,
        grid_best_distinct_positive: distinct.len(),
        attained_by_two_values: two_value_best.value >= grid_best_value * (1.0 - WORSTCASE_MATCH_TOL),
        two_value_best,
    })
}

/// Enumerates partitions of [`GRID_STEPS`] into at most `n` parts (the
/// objective is symmetric, so sorted vectors suffice). Returns the number of
/// feasible points, the best partition (descending) and its value.
fn grid_search(n: usize, r: usize, epsilon: f64) -> Result<(u64, Vec<u32>, f64)> {
    // Σ s² ≥ ε n²/4 with s = c·n/60  ⟺  Σ c² ≥ ε·60²/4
    let need = epsilon * (GRID_STEPS * GRID_STEPS) as f64 / 4.0 * (1.0 - FEASIBILITY_TOL);
    let step = n as f64 / GRID_STEPS as f64;
    let mut parts = Vec::with_capacity(n);
    let mut scratch = vec![0.0; n];
    let mut best = (0u64, Vec::new(), f64::NEG_INFINITY);

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        remaining: u32,
        max_part: u32,
        slots: usize,
        sq: u64,
        parts: &mut Vec<u32>,
        scratch: &mut [f64],
        step: f64,
        r: usize,
        need: f64,
        best: &mut (u64, Vec<u32>, f64),
    ) {
        if remaining == 0 {
            if (sq as f64) < need {
                return;
            }
            best.0 += 1;
            scratch.fill(0.0);
            for (x, &c) in scratch.iter_mut().zip(parts.iter()) {
                *x = c as f64 * step;
            }
            let v = elementary_symmetric(scratch, r).expect("r <= n checked by caller");
            if v > best.2 {
                best.1 = parts.clone();
                best.2 = v;
            }
            return;
        }
        if slots == 0 {
            return;
        }
        // the remaining parts cannot exceed max_part each
        if remaining > max_part * slots as u32 {
            return;
        }
        for c in (1..=max_part.min(remaining)).rev() {
            parts.push(c);
            recurse(remaining - c, c, slots - 1, sq + (c * c) as u64, parts, scratch, step, r, need, best);
            parts.pop();
        }
    }

    recurse(GRID_STEPS, GRID_STEPS, n, 0, &mut parts, &mut scratch, step, r, need, &mut best);
    if best.1.is_empty() {
        return Err(Error::Infeasible("no grid point satisfies the constraints".into()));
    }
    best.1.resize(n, 0);
    Ok(best)
}

/// Folds zero or coinciding values so `count_b == 0` means one value.
fn normalize_two_value(count_a: usize, a: f64, count_b: usize, b: f64, value: f64) -> TwoValuePoint {
    let same = (a - b).abs() <= 1e-6 * a.max(b);
    let (count_a, a, count_b, b) = if b <= 0.0 || count_b == 0 {
        (count_a, a, 0, 0.0)
    } else if a <= 0.0 {
        (count_b, b, 0, 0.0)
    } else if same {
        (count_a + count_b, a, 0, 0.0)
    } else {
        (count_a, a, count_b, b)
    };
    TwoValuePoint {
        count_a,
        a,
        count_b,
        b,
        value,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `e_r` of `count_a` copies of `a` and `count_b` copies of `b`.
fn two_value_objective(count_a: usize, a: f64, count_b: usize, b: f64, r: usize) -> f64 {
    (0..=r)
        .map(|j| binomial(count_a, j) * binomial(count_b, r - j) * a.powi(j as i32) * b.powi((r - j) as i32))
        .sum()
}

/// Best vector with `count_a` entries `a`, `count_b` entries `b`, the rest
/// zero, subject to `count_a·a + count_b·b = n` and `count_a·a² + count_b·b² ≥ need`.
///
/// For each `(count_a, count_b)` the family is one-dimensional in `a`. The
/// square-sum constraint is a convex quadratic in `a`, so the feasible set
/// is at most two intervals whose inner ends are where it is active. Each
/// interval is scanned and local maxima polished by golden-section search.
fn two_value_search(n: usize, r: usize, need: f64) -> TwoValuePoint {
    let nf = n as f64;
    let mut best = TwoValuePoint {
        count_a: 0,
        a: 0.0,
        count_b: 0,
        b: 0.0,
        value: f64::NEG_INFINITY,
    };
    let mut consider = |count_a: usize, a: f64, count_b: usize, b: f64| {
        let square = count_a as f64 * a * a + count_b as f64 * b * b;
        if a < 0.0 || b < 0.0 || square < need * (1.0 - FEASIBILITY_TOL) {
            return;
        }
        let value = two_value_objective(count_a, a, count_b, b, r);
        let cand = normalize_two_value(count_a, a, count_b, b, value);
        let tie = (value - best.value).abs() <= 1e-12 * best.value.abs();
        // on near-ties prefer a single value
        if best.value.is_infinite() || (!tie && value > best.value) || (tie && cand.count_b == 0 && best.count_b > 0) {
            best = cand;
        }
    };

    for count_a in 1..=n {
        // a single positive value: uniform over a support of count_a
        consider(count_a, nf / count_a as f64, 0, 0.0);
        for count_b in 1..=n - count_a {
            let (ka, kb) = (count_a as f64, count_b as f64);
            let b_of = |a: f64| ((nf - ka * a) / kb).max(0.0);
            let hi = nf / ka;
            // g(a) = qa·a² + qb·a + qc ≥ 0
            let qa = ka + ka * ka / kb;
            let qb = -2.0 * nf * ka / kb;
            let qc = nf * nf / kb - need;
            let disc = qb * qb - 4.0 * qa * qc;
            let intervals: Vec<(f64, f64)> = if disc <= 0.0 {
                vec![(0.0, hi)]
            } else {
                let root = disc.sqrt();
                let (r1, r2) = ((-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa));
                for x in [r1, r2] {
                    if (0.0..=hi).contains(&x) {
                        consider(count_a, x, count_b, b_of(x));
                    }
                }
                [(0.0, r1.min(hi)), (r2.max(0.0), hi)]
                    .into_iter()
                    .filter(|(lo, up)| lo <= up)
                    .collect()
            };
            for (lo, up) in intervals {
                let f = |a: f64| two_value_objective(count_a, a, count_b, b_of(a), r);
                for a in maximize_on_interval(&f, lo, up) {
                    consider(count_a, a, count_b, b_of(a));
                }
            }
        }
    }
    best
}

/// Candidate maximizers of `f` on `[lo, hi]`: both ends plus every local
/// maximum of a 256-point scan, refined by golden-section search.
fn maximize_on_interval(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    const SCAN: usize = 256;
    let mut out = vec![lo, hi];
    if hi - lo <= 0.0 {
        return out;
    }
    let h = (hi - lo) / SCAN as f64;
    let xs: Vec<f64> = (0..=SCAN).map(|i| lo + h * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in 1..SCAN {
        if ys[i] >= ys[i - 1] && ys[i] >= ys[i + 1] {
            out.push(golden_max(f, xs[i - 1], xs[i + 1]));
        }
    }
    out
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}
