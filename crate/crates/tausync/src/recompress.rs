//! Restricted recompression: the descending chain `B_0 ⊇ B_1 ⊇ … ⊇ B_q = ∅`.
//!
//! Level `k` factorizes the text into phrases delimited by `{0} ∪ B_k ∪ {n}`.
//! Even rounds merge runs of identical short phrases, odd rounds merge pairs
//! of adjacent short phrases across a directed cut. A phrase is short at
//! level `k` when its length is at most `λ_k = (8/7)^⌊k/2⌋`.
//!
//! Two constructions are provided. [`build_chain_linear`] runs every round
//! on the explicit boundary list. [`ContextSets`] simulates the first `K`
//! rounds on the set of boundary contexts (strings of length `2α_k` centred
//! at a boundary), which only depends on which short strings occur in the
//! text; the levels above `K` continue from the list of `B_K`.

use crate::bitstream::{BitStream, W};
use crate::error::{invalid_arg, Result};
use crate::sparsecodec::{SencWriter, SparseEncoding};
use crate::text::{pack, unpack, PackedSeq, PackedText, SubstringCounter};
use crate::Params;
use num_bigint::BigUint;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

/// Levels with precomputed `⌊λ_k⌋` and `α_k`; beyond this both saturate.
const SCHEDULE_LEVELS: usize = 1024;

/// Exact values of `λ_k` and the derived `⌊λ_k⌋`, `α_k`.
#[derive(Debug)]
pub struct LambdaSchedule {
    floor: Vec<usize>,
    alpha: Vec<usize>,
}

impl LambdaSchedule {
    /// The shared, lazily built schedule.
    pub fn get() -> &'static LambdaSchedule {
        static S: OnceLock<LambdaSchedule> = OnceLock::new();
        S.get_or_init(|| {
            let mut floor = Vec::with_capacity(SCHEDULE_LEVELS);
            let mut alpha = Vec::with_capacity(SCHEDULE_LEVELS);
            let mut a = 1usize;
            for k in 0..SCHEDULE_LEVELS {
                let (num, den) = Self::lambda(k);
                let f: usize = (num / den).try_into().unwrap_or(usize::MAX);
                alpha.push(a);
                floor.push(f);
                a = a.saturating_add(f);
            }
            LambdaSchedule { floor, alpha }
        })
    }

    /// `λ_k` as the fraction `8^⌊k/2⌋ / 7^⌊k/2⌋`.
    pub fn lambda(k: usize) -> (BigUint, BigUint) {
        let e = k / 2;
        (
            num_traits::pow(BigUint::from(8u32), e),
            num_traits::pow(BigUint::from(7u32), e),
        )
    }

    pub fn floor_lambda(&self, k: usize) -> usize {
        self.floor.get(k).copied().unwrap_or(usize::MAX)
    }

    pub fn alpha(&self, k: usize) -> usize {
        self.alpha.get(k).copied().unwrap_or(usize::MAX)
    }
}

pub fn floor_lambda(k: usize) -> usize {
    LambdaSchedule::get().floor_lambda(k)
}

pub fn alpha(k: usize) -> usize {
    LambdaSchedule::get().alpha(k)
}

/// Is `x ≤ c·λ_k`?
pub fn at_most_scaled_lambda(x: u64, c: u64, k: usize) -> bool {
    let (num, den) = LambdaSchedule::lambda(k);
    BigUint::from(x) * den <= BigUint::from(c) * num
}

/// The boundary sets `B_0, …, B_q`, each sorted, the last one empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryChain {
    n: usize,
    levels: Vec<Vec<usize>>,
}

impl BoundaryChain {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `q`, the index of the first empty level.
    pub fn q(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    /// `B_k`; empty for every `k ≥ q`.
    pub fn level(&self, k: usize) -> &[usize] {
        self.levels.get(k).map_or(&[], |v| v.as_slice())
    }

    pub fn bitmask(&self, k: usize) -> BitStream {
        let mut m = BitStream::zeros(self.n);
        for &i in self.level(k) {
            m.set(i);
        }
        m
    }
}

/// Total order on phrases used for node ids: zero-padded contents compared
/// from the last index down, then lengths. For phrases that fit into a word
/// this is the order of `(packed code, length)`.
fn canonical_cmp(a: &[u32], b: &[u32]) -> Ordering {
    let l = a.len().max(b.len());
    for idx in (0..l).rev() {
        let x = a.get(idx).copied().unwrap_or(0);
        let y = b.get(idx).copied().unwrap_or(0);
        match x.cmp(&y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn with_ends(b: &[usize], n: usize) -> Vec<usize> {
    let mut f = Vec::with_capacity(b.len() + 2);
    f.push(0);
    f.extend_from_slice(b);
    f.push(n);
    f
}

/// Even round: drops every boundary between two identical phrases of length at most `⌊λ_k⌋`.
pub fn round_even(s: &[u32], k: usize, b: &[usize]) -> Vec<usize> {
    let lam = floor_lambda(k);
    let f = with_ends(b, s.len());
    (1..f.len() - 1)
        .filter(|&i| {
            let (l, m, r) = (f[i - 1], f[i], f[i + 1]);
            m - l > lam || r - m > lam || s[l..m] != s[m..r]
        })
        .map(|i| f[i])
        .collect()
}

/// Odd round: drops boundary `f_i` when `F_{i−1} ∈ L` and `F_i ∈ R` for the cut
/// computed by [`max_dicut`] on the graph of adjacent short phrases.
pub fn round_odd(s: &[u32], k: usize, b: &[usize]) -> Vec<usize> {
    let lam = floor_lambda(k);
    let f = with_ends(b, s.len());
    let phrase = |i: usize| &s[f[i]..f[i + 1]];
    let mut short: Vec<usize> = (0..f.len() - 1)
        .filter(|&i| f[i + 1] - f[i] <= lam)
        .collect();
    short.sort_by(|&x, &y| canonical_cmp(phrase(x), phrase(y)));
    let mut node = vec![usize::MAX; f.len() - 1];
    let mut nodes = 0;
    for (j, &i) in short.iter().enumerate() {
        if j > 0 && phrase(short[j - 1]) != phrase(i) {
            nodes += 1;
        }
        node[i] = nodes;
    }
    if !short.is_empty() {
        nodes += 1;
    }
    let mut weights: HashMap<(usize, usize), u64> = HashMap::new();
    for i in 1..f.len() - 1 {
        if node[i - 1] != usize::MAX && node[i] != usize::MAX {
            *weights.entry((node[i - 1], node[i])).or_insert(0) += 1;
        }
    }
    let edges: Vec<(usize, usize, u64)> = weights.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    let left = max_dicut(nodes, &edges);
    (1..f.len() - 1)
        .filter(|&i| {
            let (u, v) = (node[i - 1], node[i]);
            !(u != usize::MAX && v != usize::MAX && left[u] && !left[v])
        })
        .map(|i| f[i])
        .collect()
}

/// Places nodes `0, 1, …` in order on the side with the larger conditional
/// expectation of the cut weight, assuming the unplaced nodes are split
/// uniformly at random. Returns `true` for nodes in `L`. The cut weight from
/// `L` to `R` is at least a quarter of the total weight of non-loop edges.
pub fn max_dicut(nodes: usize, edges: &[(usize, usize, u64)]) -> Vec<bool> {
    let mut out_adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); nodes];
    let mut in_adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); nodes];
    for &(u, v, w) in edges {
        if u != v {
            out_adj[u].push((v, w));
            in_adj[v].push((u, w));
        }
    }
    // 0 unplaced, 1 in L, 2 in R.
    let mut side = vec![0u8; nodes];
    for u in 0..nodes {
        let score_l: u64 = out_adj[u]
            .iter()
            .map(|&(v, w)| w * [1, 0, 2][side[v] as usize])
            .sum();
        let score_r: u64 = in_adj[u]
            .iter()
            .map(|&(v, w)| w * [1, 2, 0][side[v] as usize])
            .sum();
        side[u] = if score_l >= score_r { 1 } else { 2 };
    }
    side.into_iter().map(|x| x == 1).collect()
}

/// Weight of the edges from `L` to `R`.
pub fn cut_weight(left: &[bool], edges: &[(usize, usize, u64)]) -> u64 {
    edges
        .iter()
        .filter(|&&(u, v, _)| left[u] && !left[v])
        .map(|&(_, _, w)| w)
        .sum()
}

fn round(s: &[u32], k: usize, b: &[usize]) -> Vec<usize> {
    if k.is_multiple_of(2) {
        round_even(s, k, b)
    } else {
        round_odd(s, k, b)
    }
}

/// Runs rounds `k, k+1, …` starting from `b = B_k` and returns `B_k, …, B_q`.
fn continue_chain(s: &[u32], mut k: usize, b: Vec<usize>) -> Vec<Vec<usize>> {
    let mut levels = vec![b];
    while !levels.last().unwrap().is_empty() {
        let next = round(s, k, levels.last().unwrap());
        levels.push(next);
        k += 1;
    }
    levels
}

/// The full chain by explicit rounds.
pub fn build_chain_linear(t: &PackedText) -> BoundaryChain {
    let n = t.n();
    BoundaryChain {
        n,
        levels: continue_chain(t.symbols(), 0, (1..n.max(1)).collect()),
    }
}

/// Bitmask of `{i ∈ [0..count) : oracle(seq[start+i..start+i+ℓ))}`.
///
/// Windows are grouped `ℓ` at a time; the `ℓ` answers of a group only depend
/// on the `2ℓ−1` symbols it spans, so they are memoized per block code.
/// When such a block does not fit into a word, windows are memoized one by one.
pub fn context_to_bitmask(
    seq: &PackedSeq,
    start: usize,
    count: usize,
    ell: usize,
    oracle: &dyn Fn(u64) -> bool,
) -> BitStream {
    assert!(ell >= 1 && ell * seq.bps() as usize <= W);
    let bps = seq.bps() as usize;
    let mut out = BitStream::with_capacity(count);
    let block_fits = ell <= W && (2 * ell - 1) * bps <= W;
    if block_fits {
        let mask = if ell * bps == W { u64::MAX } else { (1u64 << (ell * bps)) - 1 };
        let mut memo: HashMap<u64, u64> = HashMap::new();
        let mut i = 0;
        while i + ell <= count {
            let block = seq.extract(start + i, 2 * ell - 1);
            let bits = *memo.entry(block).or_insert_with(|| {
                (0..ell).fold(0u64, |acc, j| {
                    acc | (oracle((block >> (j * bps)) & mask) as u64) << j
                })
            });
            out.push_bits(bits, ell);
            i += ell;
        }
        while i < count {
            out.push(oracle(seq.extract(start + i, ell)));
            i += 1;
        }
    } else {
        let mut memo: HashMap<u64, bool> = HashMap::new();
        for i in 0..count {
            let code = seq.extract(start + i, ell);
            out.push(*memo.entry(code).or_insert_with(|| oracle(code)));
        }
    }
    out
}

/// Positions of the set bits per byte value.
struct ByteTable {
    pos: [[u8; 8]; 256],
    cnt: [u8; 256],
}

const BYTE_TABLE: ByteTable = {
    let mut pos = [[0u8; 8]; 256];
    let mut cnt = [0u8; 256];
    let mut v = 0;
    while v < 256 {
        let mut c = 0;
        let mut b = 0;
        while b < 8 {
            if v >> b & 1 == 1 {
                pos[v][c] = b as u8;
                c += 1;
            }
            b += 1;
        }
        cnt[v] = c as u8;
        v += 1;
    }
    ByteTable { pos, cnt }
};

/// Set positions of `m` in increasing order, one byte per table lookup.
pub fn bitmask_to_list(m: &BitStream) -> Vec<usize> {
    let mut out = Vec::new();
    for (wi, &w) in m.words().iter().enumerate() {
        if w == 0 {
            continue;
        }
        for byte in 0..8 {
            let v = ((w >> (8 * byte)) & 0xFF) as usize;
            let base = wi * W + 8 * byte;
            for j in 0..BYTE_TABLE.cnt[v] as usize {
                out.push(base + BYTE_TABLE.pos[v][j] as usize);
            }
        }
    }
    out
}

/// Number of context-simulated levels: `2⌊log_{8/7}(log_σ n / threshold)⌋`,
/// reduced (in steps of two) until all strings of length `2α_K` over the
/// padded alphabet fit into the table budget. Zero disables the packed path.
pub fn packed_levels(t: &PackedText, params: &Params) -> usize {
    let ratio = t.log_sigma_n() / params.fallback_threshold;
    if t.n() < 2 || !(ratio >= 8.0 / 7.0) {
        return 0;
    }
    let mut k = 2 * (ratio.ln() / (8.0f64 / 7.0).ln()).floor() as usize;
    k = k.min(SCHEDULE_LEVELS - 2);
    let base = t.sigma_in() as u128 + 1;
    let bps = t.bps() as usize;
    while k > 0 {
        let len = 2 * alpha(k);
        let fits_word = 2 * len * bps <= W;
        let fits_table = (len as u32) < 128 && base.checked_pow(len as u32).is_some_and(|c| c <= params.table_n as u128);
        if fits_word && fits_table {
            break;
        }
        k -= 2;
    }
    k
}

/// The boundary-context sets `C_0, …, C_K` of a text.
///
/// `C_k` holds the packed strings `T[i−α_k..i+α_k)` (over the padded text)
/// for `i ∈ B_k ∪ {0, n}`.
#[derive(Clone, Debug)]
pub struct ContextSets {
    n: usize,
    big_k: usize,
    pad: usize,
    padded: PackedSeq,
    sets: Vec<HashSet<u64>>,
}

/// Boundary neighbourhood of the centre of a candidate context.
struct Neighbours {
    left: Option<usize>,
    right: Option<usize>,
}

impl ContextSets {
    /// Builds `C_0, …, C_K` with `K = packed_levels(t, params)`; `None` when `K = 0`.
    pub fn build(t: &PackedText, params: &Params) -> Result<Option<Self>> {
        let big_k = packed_levels(t, params);
        if big_k == 0 {
            return Ok(None);
        }
        Ok(Some(Self::build_with_levels(t, params, big_k)?))
    }

    /// Builds `C_0, …, C_K` for an explicit `K`, which must respect the limits of [`packed_levels`].
    pub fn build_with_levels(t: &PackedText, params: &Params, big_k: usize) -> Result<Self> {
        let n = t.n();
        let bps = t.bps();
        let max_len = 2 * alpha(big_k);
        if n < 2 || 2 * max_len * bps as usize > W {
            return invalid_arg(format!("{big_k} packed levels are not available for this text"));
        }
        let pad = max_len;
        let dollar = t.dollar();
        let mut padded_syms = vec![dollar; pad];
        padded_syms.extend_from_slice(t.symbols());
        padded_syms.extend(std::iter::repeat_n(dollar, pad));
        let counter = SubstringCounter::build(&padded_syms, bps, max_len, params.table_n)?;
        let padded = PackedSeq::from_symbols(&padded_syms, bps);
        let alphabet: Vec<u32> = (0..t.sigma_in()).chain(std::iter::once(dollar)).collect();
        let occurring = |len: usize| -> Vec<Vec<u32>> {
            let mut out = Vec::new();
            let mut digits = vec![0usize; len];
            loop {
                let s: Vec<u32> = digits.iter().map(|&d| alphabet[d]).collect();
                if counter.count_code(pack(&s, bps), len) > 0 {
                    out.push(s);
                }
                let mut j = 0;
                while j < len && digits[j] + 1 == alphabet.len() {
                    digits[j] = 0;
                    j += 1;
                }
                if j == len {
                    break;
                }
                digits[j] += 1;
            }
            out
        };
        let c0: HashSet<u64> = occurring(2)
            .into_iter()
            .filter(|s| !(s[0] == dollar && s[1] == dollar))
            .map(|s| pack(&s, bps))
            .collect();
        let mut sets = vec![c0];
        for k in 0..big_k {
            let next = Self::next_level(&sets[k], k, &occurring(2 * alpha(k + 1)), bps, dollar, &counter);
            sets.push(next);
        }
        Ok(ContextSets {
            n,
            big_k,
            pad,
            padded,
            sets,
        })
    }

    fn neighbours(ck: &HashSet<u64>, s: &[u32], k: usize, bps: u32) -> Neighbours {
        let (a, lam) = (alpha(k), floor_lambda(k));
        let c = a + lam;
        let is_boundary = |j: usize| ck.contains(&pack(&s[j - a..j + a], bps));
        Neighbours {
            left: (c - lam..c).rev().find(|&j| is_boundary(j)),
            right: (c + 1..=c + lam).find(|&j| is_boundary(j)),
        }
    }

    /// Simulates round `k` on all occurring contexts of length `2α_{k+1}`.
    fn next_level(
        ck: &HashSet<u64>,
        k: usize,
        candidates: &[Vec<u32>],
        bps: u32,
        dollar: u32,
        counter: &SubstringCounter,
    ) -> HashSet<u64> {
        let a = alpha(k);
        let c = alpha(k + 1);
        let mut centred: Vec<(&Vec<u32>, bool, Neighbours)> = Vec::new();
        for s in candidates {
            if !ck.contains(&pack(&s[c - a..c + a], bps)) {
                continue;
            }
            let interior = s[c - 1] != dollar && s[c] != dollar;
            centred.push((s, interior, Self::neighbours(ck, s, k, bps)));
        }
        let mut next = HashSet::new();
        if k.is_multiple_of(2) {
            for (s, interior, nb) in &centred {
                let keep = !interior
                    || match (nb.left, nb.right) {
                        (Some(l), Some(r)) => s[l..c] != s[c..r],
                        _ => true,
                    };
                if keep {
                    next.insert(pack(s, bps));
                }
            }
            return next;
        }
        // Odd round: phrases are identified by (packed code, length), whose
        // order coincides with the canonical phrase order of the explicit rounds.
        let mut weights: HashMap<((u64, usize), (u64, usize)), u64> = HashMap::new();
        for (s, interior, nb) in &centred {
            if let (true, Some(l), Some(r)) = (*interior, nb.left, nb.right) {
                let x = (pack(&s[l..c], bps), c - l);
                let y = (pack(&s[c..r], bps), r - c);
                *weights.entry((x, y)).or_insert(0) += counter.count_code(pack(s, bps), s.len());
            }
        }
        let mut keys: Vec<(u64, usize)> = weights.keys().flat_map(|&(x, y)| [x, y]).collect();
        keys.sort_unstable();
        keys.dedup();
        let id = |x: &(u64, usize)| keys.binary_search(x).unwrap();
        let edges: Vec<(usize, usize, u64)> = weights.iter().map(|(&(x, y), &w)| (id(&x), id(&y), w)).collect();
        let left = max_dicut(keys.len(), &edges);
        for (s, interior, nb) in &centred {
            let merged = match (*interior, nb.left, nb.right) {
                (true, Some(l), Some(r)) => {
                    left[id(&(pack(&s[l..c], bps), c - l))] && !left[id(&(pack(&s[c..r], bps), r - c))]
                }
                _ => false,
            };
            if !merged {
                next.insert(pack(s, bps));
            }
        }
        next
    }

    /// `K`, the last level held as a context set.
    pub fn levels(&self) -> usize {
        self.big_k
    }

    /// `C_k` for `k ≤ K`.
    pub fn context_set(&self, k: usize) -> &HashSet<u64> {
        &self.sets[k]
    }

    /// Is `s` (of length `2α_k`) in `C_k`?
    pub fn contains(&self, k: usize, s: &[u32]) -> bool {
        s.len() == 2 * alpha(k) && self.sets[k].contains(&pack(s, self.padded.bps()))
    }

    /// `max{j ∈ [1..K] : T[c−α_{j−1}..c+α_{j−1}) ∈ C_{j−1}}` (or 0) for the
    /// centre `c` of a window of `3α_K` padded symbols.
    fn capped_level(&self, window: &[u32], c: usize) -> u64 {
        let bps = self.padded.bps();
        (1..=self.big_k)
            .rev()
            .find(|&j| {
                let a = alpha(j - 1);
                self.sets[j - 1].contains(&pack(&window[c - a..c + a], bps))
            })
            .unwrap_or(0) as u64
    }

    /// `senc(𝓑′)` for `𝓑′[i] = min(K, max{k + 1 : i ∈ B_k} ∪ {0})`.
    ///
    /// The text is cut into blocks of `α_K` positions. The encoding of a
    /// block only depends on the `3α_K` padded symbols around it, so it is
    /// memoized under their packed code. Every entry except `𝓑′[0]` is
    /// non-zero, hence block encodings consist of literals and concatenate
    /// without merging zero runs.
    pub fn capped_levels(&self) -> SparseEncoding {
        let n = self.n;
        let ak = alpha(self.big_k);
        let bps = self.padded.bps();
        let mut memo: HashMap<u64, BitStream> = HashMap::new();
        let mut out = SencWriter::new();
        for h in 0..n.div_ceil(ak) {
            let lo = h * ak;
            let hi = (lo + ak).min(n);
            let start = self.pad + lo - ak;
            let code = self.padded.extract(start, 3 * ak);
            if h == 0 || hi - lo < ak {
                let window: Vec<u32> = (0..3 * ak).map(|d| self.padded.get(start + d)).collect();
                for i in lo..hi {
                    out.push(if i == 0 { 0 } else { self.capped_level(&window, ak + i - lo) });
                }
                continue;
            }
            let enc = memo.entry(code).or_insert_with(|| {
                let window = unpack(code, 3 * ak, bps);
                let mut w = SencWriter::new();
                for c in ak..2 * ak {
                    w.push(self.capped_level(&window, c));
                }
                w.finish().into_bits()
            });
            out.push_raw(enc, 0, enc.len(), ak as u64);
        }
        out.finish()
    }

    /// `B_k` for `k ≤ K` as a length-`n` bitmask.
    pub fn bk_bitmask(&self, k: usize) -> BitStream {
        assert!(k <= self.big_k);
        let a = alpha(k);
        let set = &self.sets[k];
        let oracle = |code: u64| set.contains(&code);
        let mut m = context_to_bitmask(&self.padded, self.pad - a, self.n, 2 * a, &oracle);
        if self.n > 0 {
            m.clear(0);
        }
        m
    }
}

/// Recompression preprocessing for one text: the full chain, built through
/// the context sets when the packed path is enabled.
#[derive(Clone, Debug)]
pub struct Recompression {
    chain: BoundaryChain,
    contexts: Option<ContextSets>,
}

/// Builds the chain of `t`, using [`ContextSets`] for the first `K` levels when available.
pub fn preprocess_explicit(t: &PackedText, params: &Params) -> Result<Recompression> {
    params.validate()?;
    let contexts = ContextSets::build(t, params)?;
    let chain = match &contexts {
        None => build_chain_linear(t),
        Some(cs) => {
            let big_k = cs.levels();
            let mut levels: Vec<Vec<usize>> = (0..big_k).map(|k| bitmask_to_list(&cs.bk_bitmask(k))).collect();
            let bk = bitmask_to_list(&cs.bk_bitmask(big_k));
            levels.extend(continue_chain(t.symbols(), big_k, bk));
            if let Some(first_empty) = levels.iter().position(|l| l.is_empty()) {
                levels.truncate(first_empty + 1);
            }
            BoundaryChain { n: t.n(), levels }
        }
    };
    Ok(Recompression { chain, contexts })
}

impl Recompression {
    pub fn chain(&self) -> &BoundaryChain {
        &self.chain
    }

    pub fn contexts(&self) -> Option<&ContextSets> {
        self.contexts.as_ref()
    }

    /// `B_k` in increasing order.
    pub fn bk_explicit(&self, k: usize) -> &[usize] {
        self.chain.level(k)
    }

    /// `B_k` as a bitmask; levels up to `K` come straight from the context sets.
    pub fn bk_bitmask(&self, k: usize) -> BitStream {
        match &self.contexts {
            Some(cs) if k <= cs.levels() => cs.bk_bitmask(k),
            _ => self.chain.bitmask(k),
        }
    }
}
