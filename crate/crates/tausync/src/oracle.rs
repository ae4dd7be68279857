//! Brute-force references. Nothing here calls into the optimized modules;
//! every check follows the defining property directly.

use crate::error::{invalid_arg, Result};
use crate::runs::Run;
use crate::transducer::Transducer;
use num_bigint::BigUint;
use std::collections::HashMap;

/// Outcome of a verification: `None` means every condition holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport<V> {
    pub violation: Option<V>,
}

impl<V> OracleReport<V> {
    pub fn pass(&self) -> bool {
        self.violation.is_none()
    }

    fn ok() -> Self {
        OracleReport { violation: None }
    }

    fn fail(v: V) -> Self {
        OracleReport { violation: Some(v) }
    }
}

/// Smallest `p ≥ 1` with `s[x] = s[x+p]` for all valid `x`, by trying every candidate.
pub fn brute_period(s: &[u32]) -> usize {
    let n = s.len();
    (1..=n)
        .find(|&p| (0..n - p).all(|x| s[x] == s[x + p]))
        .unwrap_or(0)
}

/// Length of the primitive root of `s`.
pub fn brute_primitive_root(s: &[u32]) -> usize {
    let p = brute_period(s);
    if p > 0 && s.len().is_multiple_of(p) {
        p
    } else {
        s.len()
    }
}

/// `RUNS_{ℓ,p}` from the definition: every maximal fragment with smallest
/// period `q ≤ p`, length at least `max(ℓ, 2q)`.
pub fn brute_runs(s: &[u32], ell: usize, p: usize) -> Vec<Run> {
    let n = s.len();
    let mut out = Vec::new();
    for start in 0..n {
        for q in 1..=p.min(n / 2) {
            if start > 0 && start - 1 + q < n && s[start - 1] == s[start - 1 + q] {
                continue;
            }
            let mut end = (start + q).min(n);
            while end < n && s[end] == s[end - q] {
                end += 1;
            }
            let len = end - start;
            if len >= 2 * q && len >= ell && brute_period(&s[start..end]) == q {
                out.push(Run {
                    start,
                    end,
                    period: q,
                });
            }
        }
    }
    out.sort();
    out
}

/// Rank and select on a dense sequence, counting non-zero entries.
#[derive(Clone, Debug)]
pub struct BruteRankSelect {
    n: usize,
    ones: Vec<usize>,
}

pub fn brute_rank_select(a: &[u64]) -> BruteRankSelect {
    BruteRankSelect {
        n: a.len(),
        ones: (0..a.len()).filter(|&i| a[i] != 0).collect(),
    }
}

impl BruteRankSelect {
    /// Number of non-zero entries in `a[0..j)`.
    pub fn rank(&self, j: usize) -> usize {
        assert!(j <= self.n);
        self.ones.iter().filter(|&&p| p < j).count()
    }

    /// Position of the `j`-th non-zero entry, `1 ≤ j`.
    pub fn select(&self, j: usize) -> Option<usize> {
        if j == 0 {
            return None;
        }
        self.ones.get(j - 1).copied()
    }

    pub fn count(&self) -> usize {
        self.ones.len()
    }
}

/// Number of keys strictly below `x`.
pub fn brute_rank(keys: &[u64], x: u64) -> usize {
    keys.iter().filter(|&&k| k < x).count()
}

/// Largest key `≤ x`, `None` standing for −∞.
pub fn brute_pred(keys: &[u64], x: u64) -> Option<u64> {
    keys.iter().copied().filter(|&k| k <= x).max()
}

/// Runs `spec` symbol by symbol over equal-length inputs.
pub fn run_reference_transducer<T: Transducer + ?Sized>(spec: &T, inputs: &[&[u64]]) -> Result<Vec<u64>> {
    if inputs.len() != spec.arity() {
        return invalid_arg(format!(
            "transducer reads {} streams, {} given",
            spec.arity(),
            inputs.len()
        ));
    }
    let n = inputs.first().map_or(0, |a| a.len());
    if inputs.iter().any(|a| a.len() != n) {
        return invalid_arg("input streams differ in length");
    }
    let mut state = spec.initial();
    let mut out = Vec::with_capacity(n);
    let mut column = vec![0u64; inputs.len()];
    for i in 0..n {
        for (c, a) in column.iter_mut().zip(inputs) {
            *c = a[i];
        }
        let (next, y) = spec.step(state, &column);
        state = next;
        out.push(y);
    }
    Ok(out)
}

/// Class identifiers of all length-`len` substrings: equal ids iff equal strings.
/// Uses doubling (naming pairs of half-length names).
fn substring_classes(s: &[u32], len: usize) -> Vec<usize> {
    let n = s.len();
    if len == 0 || len > n {
        return if len == 0 { vec![0; n + 1] } else { Vec::new() };
    }
    let mut names: Vec<usize> = s.iter().map(|&c| c as usize).collect();
    let mut width = 1;
    while 2 * width <= len {
        let mut map = HashMap::new();
        let next: Vec<usize> = (0..=n - 2 * width)
            .map(|i| {
                let k = map.len();
                *map.entry((names[i], names[i + width])).or_insert(k)
            })
            .collect();
        names = next;
        width *= 2;
    }
    let mut map = HashMap::new();
    (0..=n - len)
        .map(|i| {
            let k = map.len();
            *map.entry((names[i], names[i + len - width])).or_insert(k)
        })
        .collect()
}

/// Which condition a candidate synchronizing set breaks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SyncViolation {
    /// `τ` is not in `[1..⌊n/2⌋]`.
    BadTau { tau: usize, n: usize },
    /// Positions are not strictly increasing or leave `[0..n−2τ]`.
    OutOfRange { index: usize, pos: usize },
    /// `T[i..i+2τ) = T[j..j+2τ)` but exactly one of `i`, `j` is a member (`i < j`, `j` minimal).
    Consistency { i: usize, j: usize },
    /// The window `[i..i+τ)` has no member although `T[i..i+3τ−1)` is not periodic
    /// (`periodic == false`), or has a member although it is (`periodic == true`).
    Density { i: usize, periodic: bool },
    /// A member `i` has `per(T[i..i+2τ)) ≤ τ/3`.
    PeriodFilter { pos: usize },
    /// `|Sync| ≥ 70n/τ`.
    Size { size: usize, n: usize, tau: usize },
}

/// Reusable verifier for one text. Queries with non-decreasing `τ` share the
/// per-period tables.
pub struct SyncVerifier<'a> {
    s: &'a [u32],
    /// `best[i] = max_{p ≤ done} (longest prefix of s[i..] with period p)`.
    best: Vec<usize>,
    done: usize,
}

impl<'a> SyncVerifier<'a> {
    pub fn new(s: &'a [u32]) -> Self {
        SyncVerifier {
            s,
            best: vec![0; s.len()],
            done: 0,
        }
    }

    fn ensure_periods(&mut self, p_max: usize) {
        if p_max < self.done {
            self.best.iter_mut().for_each(|b| *b = 0);
            self.done = 0;
        }
        let n = self.s.len();
        let mut ext = vec![0usize; n + 1];
        for p in self.done + 1..=p_max {
            ext[n] = 0;
            for i in (0..n).rev() {
                ext[i] = if i + p < n && self.s[i] == self.s[i + p] {
                    ext[i + 1] + 1
                } else {
                    0
                };
            }
            for i in 0..n {
                let run = (p + ext[i]).min(n - i);
                self.best[i] = self.best[i].max(run);
            }
        }
        self.done = self.done.max(p_max);
    }

    /// Does `T[i..i+len)` have a period `≤ p`? Requires `ensure_periods(p)`.
    fn has_small_period(&self, i: usize, len: usize, p: usize) -> bool {
        len <= p || self.best[i] >= len
    }

    /// Checks the consistency and density conditions.
    pub fn verify(&mut self, tau: usize, sync: &[usize]) -> OracleReport<SyncViolation> {
        let n = self.s.len();
        if tau == 0 || 2 * tau > n {
            return OracleReport::fail(SyncViolation::BadTau { tau, n });
        }
        let mut member = vec![false; n];
        for (index, &pos) in sync.iter().enumerate() {
            if pos > n - 2 * tau || (index > 0 && sync[index - 1] >= pos) {
                return OracleReport::fail(SyncViolation::OutOfRange { index, pos });
            }
            member[pos] = true;
        }
        let classes = substring_classes(self.s, 2 * tau);
        let mut first: HashMap<usize, usize> = HashMap::new();
        for j in 0..=n - 2 * tau {
            let i = *first.entry(classes[j]).or_insert(j);
            if member[i] != member[j] {
                return OracleReport::fail(SyncViolation::Consistency { i, j });
            }
        }
        let p = tau / 3;
        self.ensure_periods(p);
        if n + 1 >= 3 * tau {
            let mut prefix = vec![0usize; n + 1];
            for i in 0..n {
                prefix[i + 1] = prefix[i] + member[i] as usize;
            }
            for i in 0..=n + 1 - 3 * tau {
                let empty = prefix[i + tau] == prefix[i];
                let periodic = self.has_small_period(i, 3 * tau - 1, p);
                if empty != periodic {
                    return OracleReport::fail(SyncViolation::Density { i, periodic });
                }
            }
        }
        OracleReport::ok()
    }

    /// Checks the size bound `|Sync| < 70n/τ` and that every member has
    /// `per(T[i..i+2τ)) > τ/3`.
    pub fn verify_bounds(&mut self, tau: usize, sync: &[usize]) -> OracleReport<SyncViolation> {
        let n = self.s.len();
        if tau == 0 || 2 * tau > n {
            return OracleReport::fail(SyncViolation::BadTau { tau, n });
        }
        if sync.len() * tau >= 70 * n {
            return OracleReport::fail(SyncViolation::Size {
                size: sync.len(),
                n,
                tau,
            });
        }
        let p = tau / 3;
        self.ensure_periods(p);
        for &pos in sync {
            if pos + 2 * tau > n {
                return OracleReport::fail(SyncViolation::OutOfRange { index: 0, pos });
            }
            if self.has_small_period(pos, 2 * tau, p) {
                return OracleReport::fail(SyncViolation::PeriodFilter { pos });
            }
        }
        OracleReport::ok()
    }
}

/// Checks that `sync` is a τ-synchronizing set of `s` (consistency and density).
pub fn verify_sync(s: &[u32], tau: usize, sync: &[usize]) -> OracleReport<SyncViolation> {
    SyncVerifier::new(s).verify(tau, sync)
}

/// Which property of a boundary chain fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainViolation {
    /// The chain is empty or `B_0 ≠ [1..n)`.
    FirstLevel,
    /// `B_{k+1} ⊄ B_k`, or a level is unsorted or leaves `[1..n)`.
    NotDescending { k: usize },
    /// The last level is not empty.
    NotTerminated,
    /// `|B_k| > 4n/λ_k`.
    Size { k: usize, size: usize },
    /// Positions `i < j` with equal `2α_k`-contexts but different membership.
    Consistency { k: usize, i: usize, j: usize },
    /// Consecutive boundaries `i < j` whose phrase is long and not highly periodic.
    Phrase { k: usize, i: usize, j: usize },
}

fn pow_big(b: u32, e: usize) -> BigUint {
    num_traits::pow(BigUint::from(b), e)
}

/// `(⌊λ_k⌋, α_k)` computed from the definitions with exact integers.
pub fn brute_schedule(k: usize) -> (usize, usize) {
    let mut alpha = 1usize;
    let mut floor_lambda = 1usize;
    for j in 0..=k {
        let e = j / 2;
        floor_lambda = (pow_big(8, e) / pow_big(7, e))
            .try_into()
            .unwrap_or(usize::MAX);
        if j < k {
            alpha = alpha.saturating_add(floor_lambda);
        }
    }
    (floor_lambda, alpha)
}

/// Checks a chain `levels[0] ⊇ levels[1] ⊇ …` against the size bound, the
/// context-consistency property and the phrase-length property at every level.
pub fn verify_chain(s: &[u32], levels: &[Vec<usize>]) -> OracleReport<ChainViolation> {
    let n = s.len();
    if levels.is_empty() || levels[0] != (1..n.max(1)).collect::<Vec<_>>() {
        return OracleReport::fail(ChainViolation::FirstLevel);
    }
    if !levels.last().unwrap().is_empty() {
        return OracleReport::fail(ChainViolation::NotTerminated);
    }
    for (k, level) in levels.iter().enumerate() {
        let sorted = level.windows(2).all(|w| w[0] < w[1]);
        let in_range = level.iter().all(|&i| i >= 1 && i < n);
        let nested = k == 0 || {
            let prev: std::collections::HashSet<usize> = levels[k - 1].iter().copied().collect();
            level.iter().all(|i| prev.contains(i))
        };
        if !sorted || !in_range || !nested {
            return OracleReport::fail(ChainViolation::NotDescending { k });
        }
        let e = k / 2;
        let (num, den) = (pow_big(8, e), pow_big(7, e));
        if BigUint::from(level.len()) * &num > BigUint::from(4 * n) * &den {
            return OracleReport::fail(ChainViolation::Size {
                k,
                size: level.len(),
            });
        }
        let (floor_lambda, alpha) = brute_schedule(k);
        let mut member = vec![false; n + 1];
        for &i in level {
            member[i] = true;
        }
        if 2 * alpha <= n {
            let classes = substring_classes(s, 2 * alpha);
            let mut first: HashMap<usize, usize> = HashMap::new();
            for j in alpha..=n - alpha {
                let i = *first.entry(classes[j - alpha]).or_insert(j);
                if member[i] != member[j] {
                    return OracleReport::fail(ChainViolation::Consistency { k, i, j });
                }
            }
        }
        let mut bounds = vec![0];
        bounds.extend_from_slice(level);
        bounds.push(n);
        for w in bounds.windows(2) {
            let (i, j) = (w[0], w[1]);
            let short = BigUint::from(4 * (j - i)) * &den <= BigUint::from(7u32) * &num;
            if !short && brute_primitive_root(&s[i..j]) > floor_lambda {
                return OracleReport::fail(ChainViolation::Phrase { k, i, j });
            }
        }
    }
    OracleReport::ok()
}

/// Text generators shared by tests, the acceptance suite and the CLI.
pub mod corpus {
    use rand::Rng;

    /// Uniformly random text over `[0..σ)`.
    pub fn random_text<R: Rng>(rng: &mut R, n: usize, sigma: u32) -> Vec<u32> {
        (0..n).map(|_| rng.gen_range(0..sigma)).collect()
    }

    /// Repetitions of short random units, with occasional point mutations.
    pub fn periodic_text<R: Rng>(rng: &mut R, n: usize, sigma: u32) -> Vec<u32> {
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            let per = rng.gen_range(1..=8usize);
            let unit: Vec<u32> = (0..per).map(|_| rng.gen_range(0..sigma)).collect();
            let reps = rng.gen_range(2..=40usize);
            for r in 0..reps * per {
                v.push(unit[r % per]);
            }
            if rng.gen_bool(0.5) {
                v.push(rng.gen_range(0..sigma));
            }
        }
        v.truncate(n);
        v
    }

    /// Concatenation of the blocks `0^{2τ+S[i]−1} · 1 · 0^{τ−S[i]}`, each of
    /// length `3τ`, for offsets `S[i] ∈ [0..τ)`.
    pub fn adversarial_family(tau: usize, offsets: &[usize]) -> Vec<u32> {
        let mut v = Vec::with_capacity(3 * tau * offsets.len());
        for &s in offsets {
            assert!(s < tau && tau >= 1);
            v.extend(std::iter::repeat_n(0, 2 * tau + s - 1));
            v.push(1);
            v.extend(std::iter::repeat_n(0, tau - s));
        }
        v
    }
}
