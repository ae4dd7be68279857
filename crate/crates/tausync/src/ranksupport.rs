//! Rank, select and predecessor support for sparse-encoded bitmasks.
//!
//! A sparse encoding is cut greedily into pieces that are either a single
//! zero-run token or a group of whole tokens fitting into one `ℓ`-bit
//! window. Queries inside a piece go through a table indexed by that
//! window. Select locates the piece through two bitvectors over the
//! encoding (literal starts and piece starts); rank locates it with a
//! predecessor search over the piece start positions.

use crate::bitstream::{BitStream, W};
use crate::error::{decode_err, invalid_arg, Error, Result};
use crate::sparsecodec::{read_token, window_at, ParseTable, SparseEncoding, Token};
use crate::{ceil_lg, Params};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Widest window used by the piece tables.
pub const MAX_PIECE_BITS: usize = 20;

/// Window width `ℓ` for the table budget: `⌈lg N⌉` clamped to `[4..20]`.
pub fn piece_bits(params: &Params) -> usize {
    (params.lg_table_ceil() as usize).clamp(4, MAX_PIECE_BITS)
}

/// For every `ℓ`-bit window: the parse summary and the decoded offsets of
/// the ones inside its longest valid prefix.
#[derive(Debug)]
pub struct PieceTable {
    parse: ParseTable,
    start: Vec<u32>,
    ones: Vec<u32>,
}

impl PieceTable {
    fn new(ell: usize) -> Result<Self> {
        let parse = ParseTable::new(ell)?;
        let mut start = Vec::with_capacity((1 << ell) + 1);
        let mut ones = Vec::new();
        for w in 0..1u64 << ell {
            start.push(ones.len() as u32);
            let s = parse.lookup(w);
            if s.a_plus == 0 {
                continue;
            }
            // Walk the tokens of the prefix to list the offsets of the literals.
            let mut pos = 0usize;
            let mut off = 0u32;
            while pos < s.b as usize {
                let rest = w >> (pos + 1);
                let z = rest.trailing_zeros() as usize;
                let digits = (rest >> z) & ((1u64 << (z + 1)) - 1);
                let x = digits.reverse_bits() >> (63 - z);
                if (w >> pos) & 1 == 1 {
                    ones.push(off);
                    off += 1;
                } else {
                    off += x as u32;
                }
                pos += 2 * z + 2;
            }
        }
        start.push(ones.len() as u32);
        Ok(PieceTable { parse, start, ones })
    }

    /// The shared table for width `ell`.
    pub fn get(ell: usize) -> Result<Arc<PieceTable>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PieceTable>>>> = OnceLock::new();
        if ell > MAX_PIECE_BITS {
            return invalid_arg(format!("piece width {ell} exceeds {MAX_PIECE_BITS}"));
        }
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("piece table cache").get(&ell) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(PieceTable::new(ell)?);
        cache
            .lock()
            .expect("piece table cache")
            .entry(ell)
            .or_insert_with(|| Arc::clone(&t));
        Ok(t)
    }

    pub fn ell(&self) -> usize {
        self.parse.ell()
    }

    #[inline]
    fn ones(&self, w: u64) -> &[u32] {
        &self.ones[self.start[w as usize] as usize..self.start[w as usize + 1] as usize]
    }
}

/// Marker for pieces made of one zero-run token too long for a window.
const LONG_ZEROS: u64 = u64::MAX;

/// The tuples `(i, p_i, e_i, r_i)` for `i ∈ [0..h]`, plus the window of every piece.
#[derive(Clone, Debug)]
pub struct Decomposition {
    n: u64,
    p: Vec<u64>,
    e: Vec<usize>,
    r: Vec<u64>,
    windows: Vec<u64>,
    table: Arc<PieceTable>,
}

/// Greedy decomposition of the encoding of a 0/1 mask.
pub fn decompose(enc: &SparseEncoding, params: &Params) -> Result<Decomposition> {
    let table = PieceTable::get(piece_bits(params))?;
    let ell = table.ell();
    let bits = enc.bits();
    let total = bits.len();
    let (mut p, mut e, mut r) = (0u64, 0usize, 0u64);
    let mut d = Decomposition {
        n: enc.len() as u64,
        p: Vec::new(),
        e: Vec::new(),
        r: Vec::new(),
        windows: Vec::new(),
        table: Arc::clone(&table),
    };
    while e < total {
        d.p.push(p);
        d.e.push(e);
        d.r.push(r);
        let w = window_at(bits, e, ell);
        let s = table.parse.lookup(w);
        if s.b == 0 {
            match read_token(bits, e)? {
                (Token::Zeros(x), used) => {
                    d.windows.push(LONG_ZEROS);
                    p += x;
                    e += used;
                }
                (Token::Literal(x), _) => {
                    return Err(Error::InvalidInput(format!(
                        "value {x} at bit {e} is not a mask entry"
                    )))
                }
            }
        } else {
            if s.max_val > 1 {
                return Err(Error::InvalidInput(format!(
                    "value {} near bit {e} is not a mask entry",
                    s.max_val
                )));
            }
            d.windows.push(w);
            p += s.a;
            e += s.b as usize;
            r += s.a_plus as u64;
        }
    }
    if p != d.n {
        return decode_err(total, format!("pieces cover {p} values, expected {}", d.n));
    }
    d.p.push(p);
    d.e.push(e);
    d.r.push(r);
    Ok(d)
}

impl Decomposition {
    /// `h`, the number of pieces.
    pub fn h(&self) -> usize {
        self.windows.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.table.ell()
    }

    pub fn p(&self, i: usize) -> u64 {
        self.p[i]
    }

    pub fn e(&self, i: usize) -> usize {
        self.e[i]
    }

    pub fn r(&self, i: usize) -> u64 {
        self.r[i]
    }

    pub fn starts(&self) -> &[u64] {
        &self.p
    }

    /// Is piece `i` all zero?
    pub fn is_zero_piece(&self, i: usize) -> bool {
        self.r[i] == self.r[i + 1]
    }

    /// `rank_A(j)` for `j ∈ [p_i..p_{i+1})`.
    #[inline]
    pub fn rank_in(&self, i: usize, j: u64) -> u64 {
        debug_assert!(self.p[i] <= j && j < self.p[i + 1]);
        let w = self.windows[i];
        if w == LONG_ZEROS {
            return self.r[i];
        }
        let off = (j - self.p[i]) as u32;
        self.r[i] + self.table.ones(w).partition_point(|&o| o < off) as u64
    }

    /// `select_A(j)` for `j ∈ (r_i..r_{i+1}]`.
    #[inline]
    pub fn select_in(&self, i: usize, j: u64) -> u64 {
        debug_assert!(self.r[i] < j && j <= self.r[i + 1]);
        let w = self.windows[i];
        self.p[i] + self.table.ones(w)[(j - self.r[i] - 1) as usize] as u64
    }

    /// Literal-start offsets of piece `i`, relative to `e_i`.
    fn literal_mask(&self, i: usize) -> u64 {
        let w = self.windows[i];
        if w == LONG_ZEROS {
            0
        } else {
            self.table.parse.lookup(w).literal_start_mask
        }
    }
}

/// Plain bitvector with constant-time rank and sampled select.
#[derive(Clone, Debug)]
pub struct RankSelectBits {
    bits: BitStream,
    before: Vec<u64>,
    samples: Vec<usize>,
}

const SELECT_SAMPLE: u64 = 64;

impl RankSelectBits {
    pub fn new(bits: BitStream) -> Self {
        let mut before = Vec::with_capacity(bits.words().len() + 1);
        let mut samples = Vec::new();
        let mut acc = 0u64;
        for (wi, &w) in bits.words().iter().enumerate() {
            before.push(acc);
            let c = w.count_ones() as u64;
            // The word holding the one numbered `k·SELECT_SAMPLE + 1`.
            while (samples.len() as u64) * SELECT_SAMPLE < acc + c {
                samples.push(wi);
            }
            acc += c;
        }
        before.push(acc);
        RankSelectBits { bits, before, samples }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> u64 {
        *self.before.last().expect("non-empty prefix table")
    }

    /// Ones in `[0..i)`, for `i ≤ len`.
    #[inline]
    pub fn rank1(&self, i: usize) -> u64 {
        let wi = i / W;
        let off = i % W;
        let mut r = self.before[wi];
        if off > 0 {
            r += (self.bits.words()[wi] & ((1u64 << off) - 1)).count_ones() as u64;
        }
        r
    }

    /// Position of the `j`-th one, `1 ≤ j ≤ count_ones`.
    #[inline]
    pub fn select1(&self, j: u64) -> Option<usize> {
        if j == 0 || j > self.count_ones() {
            return None;
        }
        let mut wi = self.samples[((j - 1) / SELECT_SAMPLE) as usize];
        while self.before[wi + 1] < j {
            wi += 1;
        }
        let mut w = self.bits.words()[wi];
        for _ in 0..j - self.before[wi] - 1 {
            w &= w - 1;
        }
        Some(wi * W + w.trailing_zeros() as usize)
    }
}

/// Select support for a sparse-encoded mask.
#[derive(Clone, Debug)]
pub struct SelectSupport {
    decomp: Decomposition,
    literals: RankSelectBits,
    piece_starts: RankSelectBits,
}

/// Builds select support for `enc` with piece width derived from `params`.
pub fn build_select(enc: &SparseEncoding, params: &Params) -> Result<SelectSupport> {
    let decomp = decompose(enc, params)?;
    let total = enc.bit_len();
    let mut literals = BitStream::zeros(total);
    let mut piece_starts = BitStream::zeros(total);
    for i in 0..decomp.h() {
        let e = decomp.e(i);
        piece_starts.set(e);
        let mut m = decomp.literal_mask(i);
        while m != 0 {
            literals.set(e + m.trailing_zeros() as usize);
            m &= m - 1;
        }
    }
    Ok(SelectSupport {
        decomp,
        literals: RankSelectBits::new(literals),
        piece_starts: RankSelectBits::new(piece_starts),
    })
}

impl SelectSupport {
    /// Number of set bits.
    pub fn count(&self) -> usize {
        self.literals.count_ones() as usize
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomp
    }

    /// Position of the `j`-th set bit, `1 ≤ j ≤ count`.
    pub fn select(&self, j: usize) -> Result<u64> {
        let Some(q) = self.literals.select1(j as u64) else {
            return invalid_arg(format!("select argument {j} outside [1..{}]", self.count()));
        };
        let i = self.piece_starts.rank1(q + 1) as usize - 1;
        Ok(self.decomp.select_in(i, j as u64))
    }
}

/// Rank support for a sparse-encoded mask.
#[derive(Clone, Debug)]
pub struct RankSupport {
    decomp: Decomposition,
    index: VebIndex,
}

/// Builds rank support with space parameter `m ≥ |senc(A)| / ℓ`.
pub fn build_rank(enc: &SparseEncoding, params: &Params, m: usize) -> Result<RankSupport> {
    let decomp = decompose(enc, params)?;
    let need = enc.bit_len().div_ceil(decomp.ell());
    if m < need {
        return invalid_arg(format!("space parameter m = {m} below |senc|/lg N = {need}"));
    }
    let n = decomp.n();
    let universe = (ceil_lg(n + 1) as usize).max(1);
    let w = (ceil_lg(n + 1) as usize).max(8);
    let index = VebIndex::with_config(decomp.starts(), universe, m.max(1), w, params.table_n)?;
    Ok(RankSupport { decomp, index })
}

/// Rank support with the smallest admissible `m`.
pub fn build_rank_default(enc: &SparseEncoding, params: &Params) -> Result<RankSupport> {
    let m = enc.bit_len().div_ceil(piece_bits(params)).max(1);
    build_rank(enc, params, m)
}

impl RankSupport {
    pub fn n(&self) -> u64 {
        self.decomp.n()
    }

    /// `rank_A(j)`: set bits in `[0..j)`, for `j ≤ n`.
    pub fn rank(&self, j: u64) -> Result<usize> {
        let n = self.decomp.n();
        if j > n {
            return invalid_arg(format!("rank argument {j} exceeds n = {n}"));
        }
        if j == n {
            return Ok(self.decomp.r(self.decomp.h()) as usize);
        }
        let i = self.index.rank(j + 1) - 1;
        Ok(self.decomp.rank_in(i, j) as usize)
    }
}

/// One node of the recursive predecessor structure, over keys of `bits` bits.
#[derive(Clone, Debug)]
enum Node {
    Leaf(Vec<u64>),
    Split {
        low_bits: u32,
        highs: Vec<u64>,
        direct: Option<Vec<u32>>,
        offsets: Vec<usize>,
        total: usize,
        children: Vec<Node>,
        summary: Box<Node>,
    },
}

/// Shape limits of the recursion.
#[derive(Clone, Copy, Debug)]
struct Shape {
    leaf_keys: usize,
    leaf_bits: u32,
    table_n: u64,
}

impl Node {
    fn build(keys: &[u64], bits: u32, shape: Shape) -> Node {
        if keys.len() <= shape.leaf_keys || bits <= shape.leaf_bits {
            return Node::Leaf(keys.to_vec());
        }
        let low_bits = bits / 2;
        let high_bits = bits - low_bits;
        let low_mask = (1u64 << low_bits) - 1;
        let mut highs = Vec::new();
        let mut offsets = Vec::new();
        let mut children = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let h = keys[i] >> low_bits;
            let j = i + keys[i..].partition_point(|&k| k >> low_bits == h);
            let lows: Vec<u64> = keys[i..j].iter().map(|&k| k & low_mask).collect();
            highs.push(h);
            offsets.push(i);
            children.push(Node::build(&lows, low_bits, shape));
            i = j;
        }
        let direct = (1u64 << high_bits <= shape.table_n).then(|| {
            let mut d = vec![0u32; 1 << high_bits];
            for (c, &h) in highs.iter().enumerate() {
                d[h as usize] = c as u32 + 1;
            }
            d
        });
        let summary = Box::new(Node::build(&highs, high_bits, shape));
        Node::Split {
            low_bits,
            highs,
            direct,
            offsets,
            total: keys.len(),
            children,
            summary,
        }
    }

    /// Keys smaller than `x`, where `x < 2^bits` or `x = 2^bits`.
    fn rank(&self, x: u64) -> usize {
        match self {
            Node::Leaf(keys) => keys.partition_point(|&k| k < x),
            Node::Split {
                low_bits,
                highs,
                direct,
                offsets,
                total,
                children,
                summary,
            } => {
                let h = x >> low_bits;
                let child = match direct {
                    Some(d) => d.get(h as usize).and_then(|&c| c.checked_sub(1)).map(|c| c as usize),
                    None => highs.binary_search(&h).ok(),
                };
                match child {
                    Some(c) => offsets[c] + children[c].rank(x & ((1u64 << low_bits) - 1)),
                    None => offsets.get(summary.rank(h)).copied().unwrap_or(*total),
                }
            }
        }
    }
}

/// Deterministic predecessor structure over a sorted key set in `[0..2^ℓ)`.
///
/// Every `w²`-th key is sampled. The samples are bucketed by their top
/// `⌊lg m⌋` bits through a direct-address table, and each bucket holds a
/// recursive halving structure over the remaining bits. A query descends
/// into exactly one child or one summary per level and finishes with a
/// binary search inside a block of at most `w²` keys.
#[derive(Clone, Debug)]
pub struct VebIndex {
    keys: Vec<u64>,
    universe_bits: usize,
    stride: usize,
    top_bits: u32,
    bucket_start: Vec<usize>,
    buckets: Vec<Node>,
}

impl VebIndex {
    /// Index with word width 64 and the default table budget.
    pub fn new(keys: &[u64], universe_bits: usize, m: usize) -> Result<Self> {
        Self::with_config(keys, universe_bits, m, W, Params::default().table_n)
    }

    pub fn with_config(keys: &[u64], universe_bits: usize, m: usize, w: usize, table_n: u64) -> Result<Self> {
        if universe_bits == 0 || universe_bits > 64 {
            return invalid_arg(format!("universe width {universe_bits} outside [1..64]"));
        }
        if w < 2 {
            return invalid_arg("word width must be at least 2");
        }
        if let Some(i) = (1..keys.len()).find(|&i| keys[i - 1] >= keys[i]) {
            return invalid_arg(format!("keys not strictly increasing at index {i}"));
        }
        if universe_bits < 64 && keys.last().is_some_and(|&k| k >> universe_bits != 0) {
            return invalid_arg(format!("key outside [0..2^{universe_bits})"));
        }
        let stride = w * w;
        let samples: Vec<u64> = keys.iter().step_by(stride).copied().collect();
        let top_bits = (63 - (m.max(1) as u64).leading_zeros()).min(universe_bits as u32);
        let rest = universe_bits as u32 - top_bits;
        let shape = Shape {
            leaf_keys: w,
            leaf_bits: (ceil_lg(w as u64) / 2).max(1),
            table_n,
        };
        let mut bucket_start = Vec::with_capacity((1usize << top_bits) + 1);
        let mut buckets = Vec::with_capacity(1 << top_bits);
        let mut i = 0;
        for b in 0..1u64 << top_bits {
            bucket_start.push(i);
            let j = i + samples[i..].partition_point(|&s| high_part(s, rest) == b);
            let lows: Vec<u64> = samples[i..j].iter().map(|&s| low_part(s, rest)).collect();
            buckets.push(Node::build(&lows, rest, shape));
            i = j;
        }
        bucket_start.push(i);
        Ok(VebIndex {
            keys: keys.to_vec(),
            universe_bits,
            stride,
            top_bits,
            bucket_start,
            buckets,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Samples smaller than `x`.
    fn sample_rank(&self, x: u64) -> usize {
        let rest = self.universe_bits as u32 - self.top_bits;
        if self.universe_bits < 64 && x >> self.universe_bits != 0 {
            return *self.bucket_start.last().expect("bucket table");
        }
        let b = high_part(x, rest) as usize;
        self.bucket_start[b] + self.buckets[b].rank(low_part(x, rest))
    }

    /// `|{y ∈ S : y < x}|`.
    pub fn rank(&self, x: u64) -> usize {
        let s = self.sample_rank(x);
        if s == 0 {
            return 0;
        }
        let lo = (s - 1) * self.stride;
        let hi = (lo + self.stride).min(self.keys.len());
        lo + self.keys[lo..hi].partition_point(|&k| k < x)
    }

    /// `max{y ∈ S : y ≤ x}`, `None` for `−∞`.
    pub fn pred(&self, x: u64) -> Option<u64> {
        let r = match x.checked_add(1) {
            Some(x1) => self.rank(x1),
            None => self.keys.len(),
        };
        r.checked_sub(1).map(|i| self.keys[i])
    }
}

#[inline]
fn high_part(x: u64, rest: u32) -> u64 {
    if rest >= 64 {
        0
    } else {
        x >> rest
    }
}

#[inline]
fn low_part(x: u64, rest: u32) -> u64 {
    if rest >= 64 {
        x
    } else {
        x & ((1u64 << rest) - 1)
    }
}

/// Builds a [`VebIndex`] with word width 64.
pub fn build_veb(keys: &[u64], universe_bits: usize, m: usize) -> Result<VebIndex> {
    VebIndex::new(keys, universe_bits, m)
}
