//! Periods, run extension and the `(ℓ, p)`-filtered run families.
//!
//! A run is a maximal fragment `T[b..e)` whose smallest period `p` satisfies
//! `2p ≤ e − b`. `RUNS_{ℓ,p}` holds the runs of length at least `ℓ` and
//! period at most `p`; the τ-runs are `RUNS_{τ,⌊τ/3⌋}`.

use crate::bitstream::{BitStream, W};
use crate::error::{invalid_arg, Result};
use crate::recompress::context_to_bitmask;
use crate::text::{unpack, PackedText};
use crate::Params;

/// A run `T[start..end)` with smallest period `period`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Run {
    pub start: usize,
    pub end: usize,
    pub period: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    fn contains(&self, a: usize, b: usize) -> bool {
        self.start <= a && b <= self.end
    }
}

/// Longest-common-extension queries used to extend periodic fragments.
pub trait Lce {
    /// Largest `l` with `T[a..a+l) = T[b..b+l)`.
    fn forward(&self, a: usize, b: usize) -> usize;
    /// Largest `l` with `T[a−l..a) = T[b−l..b)`.
    fn backward(&self, a: usize, b: usize) -> usize;
}

/// Symbol-by-symbol comparison.
#[derive(Clone, Copy, Debug)]
pub struct NaiveLce<'a> {
    s: &'a [u32],
}

impl<'a> NaiveLce<'a> {
    pub fn new(s: &'a [u32]) -> Self {
        NaiveLce { s }
    }
}

impl Lce for NaiveLce<'_> {
    fn forward(&self, a: usize, b: usize) -> usize {
        let s = self.s;
        let lim = s.len() - a.max(b);
        (0..lim).find(|&l| s[a + l] != s[b + l]).unwrap_or(lim)
    }

    fn backward(&self, a: usize, b: usize) -> usize {
        let s = self.s;
        let lim = a.min(b);
        (0..lim)
            .find(|&l| s[a - 1 - l] != s[b - 1 - l])
            .unwrap_or(lim)
    }
}

/// Compares `⌊64 / lg σ⌋` symbols per step on the packed text.
#[derive(Clone, Copy, Debug)]
pub struct PackedLce<'a> {
    t: &'a PackedText,
}

impl<'a> PackedLce<'a> {
    pub fn new(t: &'a PackedText) -> Self {
        PackedLce { t }
    }

    fn chunk(&self) -> usize {
        W / self.t.bps() as usize
    }

    fn read(&self, i: usize, len: usize) -> u64 {
        self.t.payload().extract(i + self.t.n(), len)
    }
}

impl Lce for PackedLce<'_> {
    fn forward(&self, a: usize, b: usize) -> usize {
        let lim = self.t.n() - a.max(b);
        let bps = self.t.bps() as usize;
        let mut off = 0;
        while off < lim {
            let k = self.chunk().min(lim - off);
            let x = self.read(a + off, k) ^ self.read(b + off, k);
            if x != 0 {
                return (off + x.trailing_zeros() as usize / bps).min(lim);
            }
            off += k;
        }
        lim
    }

    fn backward(&self, a: usize, b: usize) -> usize {
        let lim = a.min(b);
        let bps = self.t.bps() as usize;
        let mut off = 0;
        while off < lim {
            let k = self.chunk().min(lim - off);
            let x = self.read(a - off - k, k) ^ self.read(b - off - k, k);
            if x != 0 {
                let unused = W - k * bps;
                return (off + (x.leading_zeros() as usize - unused) / bps).min(lim);
            }
            off += k;
        }
        lim
    }
}

/// Smallest period of a non-empty slice, via the prefix function.
pub fn period_of(s: &[u32]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let mut fail = vec![0usize; n];
    let mut k = 0;
    for i in 1..n {
        while k > 0 && s[i] != s[k] {
            k = fail[k - 1];
        }
        if s[i] == s[k] {
            k += 1;
        }
        fail[i] = k;
    }
    n - fail[n - 1]
}

/// `per(T[i..j))`.
pub fn period(t: &PackedText, i: usize, j: usize) -> Result<usize> {
    if i >= j || j > t.n() {
        return invalid_arg(format!("fragment [{i}..{j}) is empty or outside the text"));
    }
    Ok(period_of(&t.symbols()[i..j]))
}

/// Extends the periodic fragment `s[i..j)` to its run; `None` if the fragment
/// is not periodic.
pub fn run_extend_with<L: Lce>(s: &[u32], lce: &L, i: usize, j: usize) -> Option<Run> {
    let p = period_of(&s[i..j]);
    if 2 * p > j - i {
        return None;
    }
    let start = i - lce.backward(i, i + p);
    let end = j + lce.forward(j, j - p);
    Some(Run {
        start,
        end,
        period: p,
    })
}

pub fn run_extend(t: &PackedText, i: usize, j: usize) -> Result<Option<Run>> {
    if i >= j || j > t.n() {
        return invalid_arg(format!("fragment [{i}..{j}) is empty or outside the text"));
    }
    Ok(run_extend_with(t.symbols(), &NaiveLce::new(t.symbols()), i, j))
}

/// `RUNS_{ℓ,p}` of `s`, sorted by start (and thereby by end).
///
/// Probes the fragments `s[iΔ..iΔ+2p)` with `Δ = ℓ + 1 − 2p`. A probe that
/// lies inside the previous probe's run has the same run, so it is skipped
/// without another extension.
pub fn enumerate_runs_with<L: Lce>(s: &[u32], lce: &L, ell: usize, p: usize) -> Result<Vec<Run>> {
    if ell < 2 * p {
        return invalid_arg(format!("ell = {ell} must be at least 2p = {}", 2 * p));
    }
    let n = s.len();
    let mut out: Vec<Run> = Vec::new();
    if p == 0 || n < 2 * p || n < ell {
        return Ok(out);
    }
    let delta = ell + 1 - 2 * p;
    let mut prev: Option<Run> = None;
    let mut a = 0;
    while a + 2 * p <= n {
        let gamma = match prev {
            Some(r) if r.contains(a, a + 2 * p) => prev,
            _ => run_extend_with(s, lce, a, a + 2 * p),
        };
        if let Some(g) = gamma {
            if g.len() >= ell && gamma != prev {
                out.push(g);
            }
        }
        prev = gamma;
        a += delta;
    }
    Ok(out)
}

pub fn enumerate_runs(t: &PackedText, ell: usize, p: usize) -> Result<Vec<Run>> {
    enumerate_runs_with(t.symbols(), &NaiveLce::new(t.symbols()), ell, p)
}

/// The τ-runs, `RUNS_{τ,⌊τ/3⌋}`.
pub fn tau_runs(t: &PackedText, tau: usize) -> Result<Vec<Run>> {
    enumerate_runs(t, tau, tau / 3)
}

/// The mask `R_{ℓ,p}`: bit `i ∈ [0..n−ℓ]` is set iff `per(T[i..i+ℓ)) ≤ p`.
///
/// When the packed path is enabled and a block of `2ℓ−1` symbols fits into a
/// word, the mask is assembled blockwise from a memoized dictionary of
/// periodic length-`ℓ` strings. Otherwise, for `ℓ ≥ 2p`, the maximal one
/// intervals `[b..e−ℓ]` are filled in from the runs `T[b..e)`, and in the
/// remaining case every window is tested directly.
pub fn runs_bitmask(t: &PackedText, ell: usize, p: usize, params: &Params) -> Result<BitStream> {
    if ell == 0 {
        return invalid_arg("window length must be positive");
    }
    let n = t.n();
    let mut mask = BitStream::zeros(n);
    if p == 0 || ell > n {
        return Ok(mask);
    }
    let bps = t.bps() as usize;
    let packed = t.log_sigma_n() >= params.fallback_threshold && (2 * ell - 1) * bps <= W;
    if packed {
        let bps32 = t.bps();
        let oracle = |code: u64| period_of(&unpack(code, ell, bps32)) <= p;
        let inner = context_to_bitmask(t.payload(), t.n(), n - ell + 1, ell, &oracle);
        for i in inner.ones() {
            mask.set(i);
        }
    } else if ell >= 2 * p {
        for r in enumerate_runs(t, ell, p)? {
            for i in r.start..=r.end - ell {
                mask.set(i);
            }
        }
    } else {
        let s = t.symbols();
        for i in 0..=n - ell {
            if period_of(&s[i..i + ell]) <= p {
                mask.set(i);
            }
        }
    }
    Ok(mask)
}
