//! τ-synchronizing sets from the boundary chain and the τ-runs.
//!
//! A position `i ∈ [0..n−2τ]` is selected when `per(T[i..i+2τ)) > τ/3` and
//! one of three events happens: `i+τ ∈ B_{k(τ)}`, a τ-run starts at `i+1`,
//! or a τ-run ends (exclusively) at `i+2τ−1`. Here
//! `k(τ) = max{j : j = 0 or 16λ_{j−1} ≤ τ}`.

use crate::bitstream::{BitStream, W};
use crate::error::{invalid_arg, Result};
use crate::ranksupport::{RankSupport, SelectSupport};
use crate::recompress::{preprocess_explicit, LambdaSchedule, Recompression};
use crate::runs::{enumerate_runs, runs_bitmask, tau_runs};
use crate::sparsecodec::SparseEncoding;
use crate::text::PackedText;
use crate::Params;
use num_bigint::BigUint;

/// `⌈16·λ_k⌉`.
fn ceil_sixteen_lambda(k: usize) -> u64 {
    let (num, den) = LambdaSchedule::lambda(k);
    let v = (BigUint::from(16u32) * num + &den - 1u32) / den;
    u64::try_from(v).unwrap_or(u64::MAX)
}

/// `k(τ)` by direct evaluation, for `τ ≥ 1`.
pub fn k_of_tau(tau: usize) -> usize {
    let mut j = 0;
    while ceil_sixteen_lambda(j) <= tau as u64 {
        j += 1;
    }
    j
}

/// Checks `τ ∈ [1..⌊n/2⌋]`.
pub fn check_tau(n: usize, tau: usize) -> Result<()> {
    if tau == 0 || 2 * tau > n {
        return invalid_arg(format!("tau = {tau} outside [1..{}]", n / 2));
    }
    Ok(())
}

/// Per-text preprocessing shared by all τ-queries: the boundary chain and
/// the table of lower ends of the intervals `I[k] = {τ : k(τ) = k}`.
#[derive(Debug)]
pub struct SyncPrep<'t> {
    text: &'t PackedText,
    params: Params,
    recomp: Recompression,
    lower: Vec<u64>,
}

impl<'t> SyncPrep<'t> {
    pub fn new(text: &'t PackedText, params: &Params) -> Result<Self> {
        let recomp = preprocess_explicit(text, params)?;
        let n = text.n() as u64;
        let mut lower = vec![0u64];
        loop {
            let lo = ceil_sixteen_lambda(lower.len() - 1);
            if lo > n.max(1) {
                break;
            }
            lower.push(lo);
        }
        Ok(SyncPrep {
            text,
            params: *params,
            recomp,
            lower,
        })
    }

    pub fn text(&self) -> &'t PackedText {
        self.text
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn recompression(&self) -> &Recompression {
        &self.recomp
    }

    /// `k(τ)`, scanning the interval table from the top.
    pub fn k_of_tau(&self, tau: usize) -> usize {
        (0..self.lower.len())
            .rev()
            .find(|&k| self.lower[k] <= tau as u64)
            .unwrap_or(0)
    }

    /// The set as a sorted list of positions.
    pub fn explicit(&self, tau: usize) -> Result<Vec<usize>> {
        let t = self.text;
        let n = t.n();
        check_tau(n, tau)?;
        let last = n - 2 * tau;
        let bk = self.recomp.bk_explicit(self.k_of_tau(tau));
        let short = tau_runs(t, tau)?;

        let from_b: Vec<usize> = bk
            .iter()
            .filter(|&&b| b >= tau && b - tau <= last)
            .map(|&b| b - tau)
            .collect();
        let from_start: Vec<usize> = short
            .iter()
            .filter(|r| r.start >= 1 && r.start - 1 <= last)
            .map(|r| r.start - 1)
            .collect();
        let mut from_end: Vec<usize> = short
            .iter()
            .filter(|r| r.end + 1 >= 2 * tau && r.end + 1 - 2 * tau <= last)
            .map(|r| r.end + 1 - 2 * tau)
            .collect();
        from_end.sort_unstable();

        // Windows of length 2τ inside a run of period ≤ τ/3 are exactly the
        // starts [b..e−2τ] of the runs in RUNS_{2τ,⌊τ/3⌋}; those intervals are disjoint.
        let periodic = enumerate_runs(t, 2 * tau, tau / 3)?;
        let mut next_run = 0;
        let mut out = Vec::with_capacity(from_b.len() + from_start.len() + from_end.len());
        for i in merge_sorted(&[&from_b, &from_start, &from_end]) {
            if out.last() == Some(&i) {
                continue;
            }
            while next_run < periodic.len() && periodic[next_run].end - 2 * tau < i {
                next_run += 1;
            }
            if next_run < periodic.len() && periodic[next_run].start <= i {
                continue;
            }
            out.push(i);
        }
        Ok(out)
    }

    /// The set as an `n`-bit mask, assembled with word operations from
    /// `B_{k(τ)}`, `R_{τ,⌊τ/3⌋}` and `R_{2τ,⌊τ/3⌋}`.
    pub fn bitmask_combined(&self, tau: usize) -> Result<BitStream> {
        let t = self.text;
        let n = t.n();
        check_tau(n, tau)?;
        let b = self.recomp.bk_bitmask(self.k_of_tau(tau));
        let r1 = runs_bitmask(t, tau, tau / 3, &self.params)?;
        let r2 = runs_bitmask(t, 2 * tau, tau / 3, &self.params)?;
        let m = n - 2 * tau + 1;
        let mut out = BitStream::with_capacity(n);
        let mut i = 0;
        while i < m {
            let c = (m - i).min(W);
            let starts = !r1.peek(i, c) & r1.peek(i + 1, c);
            let ends = !r1.peek(i + tau, c) & r1.peek(i + tau - 1, c);
            let word = !r2.peek(i, c) & (b.peek(i + tau, c) | starts | ends);
            out.push_bits(word, c);
            i += c;
        }
        out.push_zeros(n - m);
        Ok(out)
    }

    /// The set as an `n`-bit mask: word operations for `τ < log_σ n / 16`,
    /// otherwise the explicit list scattered into a zero mask.
    pub fn bitmask(&self, tau: usize) -> Result<BitStream> {
        if (tau as f64) < self.text.log_sigma_n() / 16.0 {
            return self.bitmask_combined(tau);
        }
        let mut out = BitStream::zeros(self.text.n());
        for i in self.explicit(tau)? {
            out.set(i);
        }
        Ok(out)
    }
}

/// Merges sorted lists, keeping duplicates.
fn merge_sorted(lists: &[&[usize]]) -> Vec<usize> {
    let mut idx = vec![0usize; lists.len()];
    let total = lists.iter().map(|l| l.len()).sum();
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        let (which, &v) = lists
            .iter()
            .enumerate()
            .filter_map(|(j, l)| l.get(idx[j]).map(|v| (j, v)))
            .min_by_key(|&(_, v)| *v)
            .expect("remaining elements");
        idx[which] += 1;
        out.push(v);
    }
    out
}

/// Explicit construction through a prepared handle.
pub fn build_sync_explicit(prep: &SyncPrep<'_>, tau: usize) -> Result<Vec<usize>> {
    prep.explicit(tau)
}

/// One-shot bitmask construction.
pub fn build_sync_bitmask(t: &PackedText, tau: usize, params: &Params) -> Result<BitStream> {
    check_tau(t.n(), tau)?;
    SyncPrep::new(t, params)?.bitmask(tau)
}

/// A sparse mask together with its select and rank structures.
#[derive(Clone, Debug)]
pub struct SupportedSparse {
    pub encoding: SparseEncoding,
    pub select: SelectSupport,
    pub rank: RankSupport,
}

/// A synchronizing set in one of the three representations.
#[derive(Clone, Debug)]
pub enum SyncSetHandle {
    Explicit { n: usize, tau: usize, positions: Vec<usize> },
    Bitmask { tau: usize, mask: BitStream },
    Sparse { tau: usize, support: Box<SupportedSparse> },
}

impl SyncSetHandle {
    pub fn tau(&self) -> usize {
        match self {
            SyncSetHandle::Explicit { tau, .. }
            | SyncSetHandle::Bitmask { tau, .. }
            | SyncSetHandle::Sparse { tau, .. } => *tau,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SyncSetHandle::Explicit { n, .. } => *n,
            SyncSetHandle::Bitmask { mask, .. } => mask.len(),
            SyncSetHandle::Sparse { support, .. } => support.encoding.len(),
        }
    }

    pub fn representation(&self) -> &'static str {
        match self {
            SyncSetHandle::Explicit { .. } => "list",
            SyncSetHandle::Bitmask { .. } => "bitmask",
            SyncSetHandle::Sparse { .. } => "sparse",
        }
    }

    /// `|Sync|`.
    pub fn len(&self) -> usize {
        match self {
            SyncSetHandle::Explicit { positions, .. } => positions.len(),
            SyncSetHandle::Bitmask { mask, .. } => mask.count_ones(),
            SyncSetHandle::Sparse { support, .. } => support.select.count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Members in increasing order.
    pub fn positions(&self) -> Result<Vec<usize>> {
        match self {
            SyncSetHandle::Explicit { positions, .. } => Ok(positions.clone()),
            SyncSetHandle::Bitmask { mask, .. } => Ok(mask.ones().collect()),
            SyncSetHandle::Sparse { support, .. } => Ok(support
                .encoding
                .decode()?
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(i, _)| i)
                .collect()),
        }
    }

    /// Number of members smaller than `j`, for `j ≤ n`.
    pub fn rank(&self, j: usize) -> Result<usize> {
        if j > self.n() {
            return invalid_arg(format!("rank argument {j} exceeds n = {}", self.n()));
        }
        match self {
            SyncSetHandle::Explicit { positions, .. } => Ok(positions.partition_point(|&p| p < j)),
            SyncSetHandle::Bitmask { mask, .. } => Ok(mask.slice(0, j).count_ones()),
            SyncSetHandle::Sparse { support, .. } => support.rank.rank(j as u64),
        }
    }

    /// The `j`-th smallest member, `1 ≤ j ≤ |Sync|`.
    pub fn select(&self, j: usize) -> Result<usize> {
        if j == 0 || j > self.len() {
            return invalid_arg(format!("select argument {j} outside [1..{}]", self.len()));
        }
        match self {
            SyncSetHandle::Explicit { positions, .. } => Ok(positions[j - 1]),
            SyncSetHandle::Bitmask { mask, .. } => Ok(mask.ones().nth(j - 1).expect("j ≤ popcount")),
            SyncSetHandle::Sparse { support, .. } => support.select.select(j).map(|p| p as usize),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::corpus::{adversarial_family, periodic_text, random_text};
    use crate::oracle::SyncVerifier;
    use crate::text::remap_alphabet;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k_reference(tau: u64) -> usize {
        let tau = BigUint::from(tau);
        let mut best = 0;
        for j in 1..200usize {
            let e = ((j - 1) / 2) as u32;
            if BigUint::from(16u32) * BigUint::from(8u32).pow(e) <= &tau * BigUint::from(7u32).pow(e) {
                best = j;
            }
        }
        best
    }

    #[test]
    fn k_of_tau_examples() {
        assert_eq!(k_of_tau(1), 0);
        assert_eq!(k_of_tau(15), 0);
        assert_eq!(k_of_tau(16), 2);
        assert_eq!(k_of_tau(18), 2);
        assert_eq!(k_of_tau(19), 4);
    }

    #[test]
    fn k_of_tau_matches_integer_reference() {
        let mut prev = 0;
        for tau in 1..5000usize {
            let k = k_of_tau(tau);
            assert_eq!(k, k_reference(tau as u64), "tau {tau}");
            assert!(k >= prev);
            prev = k;
        }
    }

    #[test]
    fn interval_table_agrees() {
        let t = remap_alphabet(&vec![0u32; 3000], 1).unwrap();
        let prep = SyncPrep::new(&t, &Params::default()).unwrap();
        for tau in 1..=1500 {
            assert_eq!(prep.k_of_tau(tau), k_of_tau(tau));
            let (num, den) = LambdaSchedule::lambda(prep.k_of_tau(tau));
            assert!(BigUint::from(16u32) * num > BigUint::from(tau) * den);
        }
    }

    #[test]
    fn merge_keeps_order() {
        assert_eq!(merge_sorted(&[&[1, 4, 9], &[], &[2, 4]]), vec![1, 2, 4, 4, 9]);
    }

    fn check_text(s: &[u32], sigma: u32) {
        let t = remap_alphabet(s, sigma).unwrap();
        let prep = SyncPrep::new(&t, &Params::default()).unwrap();
        let mut ver = SyncVerifier::new(s);
        for tau in 1..=s.len() / 2 {
            let sync = prep.explicit(tau).unwrap();
            let rep = ver.verify(tau, &sync);
            assert!(rep.pass(), "tau {tau}: {:?} on {s:?}", rep.violation);
            let rep = ver.verify_bounds(tau, &sync);
            assert!(rep.pass(), "tau {tau}: {:?}", rep.violation);
            let mask = prep.bitmask_combined(tau).unwrap();
            assert_eq!(mask.len(), s.len());
            assert_eq!(mask.ones().collect::<Vec<_>>(), sync, "tau {tau}");
            assert_eq!(prep.bitmask(tau).unwrap(), mask);
        }
    }

    #[test]
    fn random_texts_are_synchronizing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..60 {
            let sigma = [2u32, 4, 16][round % 3];
            let n = rng.gen_range(1..=240);
            let s = if round % 2 == 0 {
                random_text(&mut rng, n, sigma)
            } else {
                periodic_text(&mut rng, n, sigma)
            };
            check_text(&s, sigma);
        }
    }

    #[test]
    fn packed_preprocessing_gives_same_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let packed = Params::new(1 << 14, 0.01).unwrap();
        for round in 0..12 {
            let n = rng.gen_range(8..400);
            let s = if round % 2 == 0 {
                random_text(&mut rng, n, 2)
            } else {
                periodic_text(&mut rng, n, 4)
            };
            let sigma = 2 + 2 * (round % 2) as u32;
            let t = remap_alphabet(&s, sigma).unwrap();
            let plain = SyncPrep::new(&t, &Params::default()).unwrap();
            let fast = SyncPrep::new(&t, &packed).unwrap();
            for tau in 1..=n / 2 {
                let expect = plain.explicit(tau).unwrap();
                assert_eq!(fast.explicit(tau).unwrap(), expect);
                let mask = fast.bitmask_combined(tau).unwrap();
                assert_eq!(mask.ones().collect::<Vec<_>>(), expect, "tau {tau}");
            }
        }
    }

    #[test]
    fn all_distinct_text() {
        let n = 200;
        let s: Vec<u32> = (0..n as u32).collect();
        let t = remap_alphabet(&s, n as u32).unwrap();
        let prep = SyncPrep::new(&t, &Params::default()).unwrap();
        for tau in 1..=n / 2 {
            let sync = prep.explicit(tau).unwrap();
            let k = prep.k_of_tau(tau);
            let expect: Vec<usize> = prep
                .recompression()
                .bk_explicit(k)
                .iter()
                .filter(|&&b| b >= tau && b - tau <= n - 2 * tau)
                .map(|&b| b - tau)
                .collect();
            assert_eq!(sync, expect);
            if n + 1 >= 3 * tau {
                for i in 0..=n + 1 - 3 * tau {
                    assert!(sync.iter().any(|&p| p >= i && p < i + tau), "tau {tau} window {i}");
                }
            }
        }
    }

    #[test]
    fn adversarial_first_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for tau in 3..=12 {
            let offsets: Vec<usize> = (0..8).map(|_| rng.gen_range(0..tau)).collect();
            let s = adversarial_family(tau, &offsets);
            let t = remap_alphabet(&s, 2).unwrap();
            let sync = SyncPrep::new(&t, &Params::default()).unwrap().explicit(tau).unwrap();
            for (i, &off) in offsets.iter().enumerate() {
                let lo = 3 * tau * i;
                let first = sync.iter().copied().find(|&p| p >= lo && p < lo + 3 * tau);
                assert_eq!(first, Some(lo + off), "tau {tau} block {i}");
            }
        }
    }

    #[test]
    fn boundary_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_text(&mut rng, 31, 4);
        let t = remap_alphabet(&s, 4).unwrap();
        let prep = SyncPrep::new(&t, &Params::default()).unwrap();
        let sync = prep.explicit(15).unwrap();
        assert!(sync.iter().all(|&p| p <= 1));
        assert!(prep.explicit(16).is_err());
        assert!(prep.explicit(0).is_err());
        assert!(build_sync_bitmask(&t, 16, &Params::default()).is_err());
    }

    #[test]
    fn handle_queries() {
        let h = SyncSetHandle::Explicit {
            n: 10,
            tau: 2,
            positions: vec![1, 4, 6],
        };
        let mut mask = BitStream::zeros(10);
        for i in [1, 4, 6] {
            mask.set(i);
        }
        let b = SyncSetHandle::Bitmask { tau: 2, mask };
        for h in [&h, &b] {
            assert_eq!(h.len(), 3);
            assert_eq!(h.rank(5).unwrap(), 2);
            assert_eq!(h.rank(10).unwrap(), 3);
            assert_eq!(h.select(3).unwrap(), 6);
            assert!(h.select(4).is_err());
            assert!(h.rank(11).is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn small_texts_pass_oracle(s in prop::collection::vec(0u32..3, 1..90)) {
            let t = remap_alphabet(&s, 3).unwrap();
            let prep = SyncPrep::new(&t, &Params::default()).unwrap();
            let mut ver = SyncVerifier::new(&s);
            for tau in 1..=s.len() / 2 {
                let sync = prep.explicit(tau).unwrap();
                prop_assert!(ver.verify(tau, &sync).pass());
                prop_assert!(ver.verify_bounds(tau, &sync).pass());
            }
        }
    }
}
