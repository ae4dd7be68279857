//! Packed texts with sentinel padding, short-substring codes and the
//! short-substring occurrence counter.

use crate::bitstream::{BitStream, W};
use crate::error::{invalid_arg, Error, Result};
use crate::Params;
use std::collections::HashMap;

/// A sequence of fixed-width symbols packed into a bit stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedSeq {
    bps: u32,
    len: usize,
    bits: BitStream,
}

impl PackedSeq {
    pub fn from_symbols(symbols: &[u32], bps: u32) -> Self {
        assert!((1..=32).contains(&bps));
        let mut bits = BitStream::with_capacity(symbols.len() * bps as usize);
        for &s in symbols {
            bits.push_bits(s as u64, bps as usize);
        }
        PackedSeq {
            bps,
            len: symbols.len(),
            bits,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bps(&self) -> u32 {
        self.bps
    }

    /// Symbols `[i..i+len)` with the first one in the low bits. Positions past
    /// the end read as 0; `len·bps` must not exceed 64.
    #[inline]
    pub fn extract(&self, i: usize, len: usize) -> u64 {
        debug_assert!(len * self.bps as usize <= W);
        self.bits.peek(i * self.bps as usize, len * self.bps as usize)
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.extract(i, 1) as u32
    }
}

/// Packs `symbols` (first one lowest) into a word.
pub fn pack(symbols: &[u32], bps: u32) -> u64 {
    debug_assert!(symbols.len() * bps as usize <= W);
    let mut v = 0u64;
    for (j, &s) in symbols.iter().enumerate() {
        v |= (s as u64) << (j as u32 * bps);
    }
    v
}

/// Inverse of [`pack`].
pub fn unpack(code: u64, len: usize, bps: u32) -> Vec<u32> {
    let mask = (1u64 << bps) - 1;
    (0..len)
        .map(|j| ((code >> (j as u32 * bps)) & mask) as u32)
        .collect()
}

/// Integer code of a short string: packed symbols in the upper 32 bits, length in the lower 32.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntCode(pub u64);

impl IntCode {
    pub fn new(packed: u64, len: usize) -> Self {
        IntCode((packed << 32) | len as u64)
    }

    pub fn len(&self) -> usize {
        (self.0 & 0xFFFF_FFFF) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn packed(&self) -> u64 {
        self.0 >> 32
    }
}

/// The input text over `[0..σ_in)`, stored as `$^n · T · $^n` with `$ = σ − 1`
/// and `σ = 2^⌈lg(σ_in + 1)⌉`.
#[derive(Clone, Debug)]
pub struct PackedText {
    n: usize,
    sigma_in: u32,
    sigma: u32,
    bps: u32,
    symbols: Vec<u32>,
    payload: PackedSeq,
}

/// Builds a [`PackedText`] from raw symbols, each of which must be below `sigma_in`.
pub fn remap_alphabet(raw: &[u32], sigma_in: u32) -> Result<PackedText> {
    PackedText::new(raw, sigma_in)
}

impl PackedText {
    pub fn new(raw: &[u32], sigma_in: u32) -> Result<Self> {
        if sigma_in == 0 {
            return invalid_arg("alphabet size must be at least 1");
        }
        if sigma_in > (1 << 30) {
            return invalid_arg("alphabet size above 2^30 is not supported");
        }
        if let Some((i, &s)) = raw.iter().enumerate().find(|(_, &s)| s >= sigma_in) {
            return Err(Error::InvalidInput(format!(
                "symbol {s} at position {i} is not below sigma = {sigma_in}"
            )));
        }
        let bps = 32 - sigma_in.leading_zeros();
        let sigma = 1u32 << bps;
        let dollar = sigma - 1;
        let n = raw.len();
        let mut padded = Vec::with_capacity(3 * n);
        padded.extend(std::iter::repeat_n(dollar, n));
        padded.extend_from_slice(raw);
        padded.extend(std::iter::repeat_n(dollar, n));
        Ok(PackedText {
            n,
            sigma_in,
            sigma,
            bps,
            symbols: raw.to_vec(),
            payload: PackedSeq::from_symbols(&padded, bps),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_in(&self) -> u32 {
        self.sigma_in
    }

    /// The padded alphabet size, a power of two.
    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn bps(&self) -> u32 {
        self.bps
    }

    pub fn dollar(&self) -> u32 {
        self.sigma - 1
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn payload(&self) -> &PackedSeq {
        &self.payload
    }

    /// `T[i]` for `i ∈ [−n..2n)`, with `$` outside `[0..n)`.
    pub fn get(&self, i: isize) -> u32 {
        if i >= 0 && (i as usize) < self.n {
            self.symbols[i as usize]
        } else {
            self.dollar()
        }
    }

    /// `log_σ n = lg n / lg σ`, 0 for `n ≤ 1`.
    pub fn log_sigma_n(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            (self.n as f64).log2() / self.bps as f64
        }
    }

    /// Packed symbols `T[i..i+len)`, first symbol in the low bits.
    pub fn extract(&self, i: isize, len: usize) -> Result<u64> {
        if len == 0 {
            return Ok(0);
        }
        let n = self.n as isize;
        if i < -n || i >= 2 * n || i + len as isize > 2 * n {
            return invalid_arg(format!("extract range [{i}..{i}+{len}) outside [-{n}..{})", 2 * n));
        }
        if len * self.bps as usize > W {
            return invalid_arg(format!(
                "{len} symbols of {} bits do not fit into a word",
                self.bps
            ));
        }
        Ok(self.payload.extract((i + n) as usize, len))
    }

    /// Longest string for which [`PackedText::int_code`] is defined.
    pub fn int_code_limit(&self) -> usize {
        32 / self.bps as usize
    }

    pub fn int_code(&self, i: isize, len: usize) -> Result<IntCode> {
        if len > self.int_code_limit() {
            return invalid_arg(format!(
                "int_code length {len} above limit {}",
                self.int_code_limit()
            ));
        }
        Ok(IntCode::new(self.extract(i, len)?, len))
    }

    /// Substring length handled by the counter for budget `N`:
    /// `max(1, ⌊lg N / (8·lg σ)⌋)`.
    pub fn counter_block(&self, params: &Params) -> usize {
        ((params.lg_table() / (8 * self.bps)) as usize).max(1)
    }

    pub fn build_substring_counter(&self, params: &Params) -> Result<SubstringCounter> {
        SubstringCounter::build(&self.symbols, self.bps, self.counter_block(params), params.table_n)
    }
}

#[derive(Clone, Debug)]
enum CountTable {
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

/// Occurrence counts of all strings of length at most `b`.
///
/// The text is cut into blocks `T[ib..min(n, ib+2b))`; equal blocks are
/// grouped by sorting their codes, and every block contributes the
/// substrings that start in its first `b` positions, weighted by its
/// multiplicity. Each occurrence is thus counted exactly once.
#[derive(Clone, Debug)]
pub struct SubstringCounter {
    b: usize,
    bps: u32,
    n: usize,
    table: CountTable,
}

impl SubstringCounter {
    pub fn build(symbols: &[u32], bps: u32, b: usize, table_n: u64) -> Result<Self> {
        if b == 0 {
            return invalid_arg("counter block length must be positive");
        }
        if 2 * b * bps as usize > W {
            return invalid_arg(format!(
                "counter blocks of {} symbols do not fit into a word",
                2 * b
            ));
        }
        let n = symbols.len();
        let mut blocks: Vec<(u64, usize)> = (0..n.div_ceil(b))
            .map(|i| {
                let start = i * b;
                let len = (n - start).min(2 * b);
                (pack(&symbols[start..start + len], bps), len)
            })
            .collect();
        blocks.sort_unstable();
        let universe = (b as u128 + 1) << (b as u32 * bps);
        let mut table = if universe <= table_n as u128 {
            CountTable::Dense(vec![0; universe as usize])
        } else {
            CountTable::Sparse(HashMap::new())
        };
        let mut idx = 0;
        while idx < blocks.len() {
            let (code, len) = blocks[idx];
            let mut j = idx;
            while j < blocks.len() && blocks[j] == (code, len) {
                j += 1;
            }
            let mult = (j - idx) as u64;
            for x in 0..b.min(len) {
                for l in 1..=b.min(len - x) {
                    let sub = (code >> (x as u32 * bps)) & ((1u64 << (l as u32 * bps)) - 1);
                    let key = Self::key_of(b, sub, l);
                    match &mut table {
                        CountTable::Dense(v) => v[key as usize] += mult,
                        CountTable::Sparse(m) => *m.entry(key).or_insert(0) += mult,
                    }
                }
            }
            idx = j;
        }
        Ok(SubstringCounter { b, bps, n, table })
    }

    #[inline]
    fn key_of(b: usize, code: u64, len: usize) -> u64 {
        code * (b as u64 + 1) + len as u64
    }

    pub fn max_len(&self) -> usize {
        self.b
    }

    /// Number of occurrences of the packed string `code` of length `len`.
    #[inline]
    pub fn count_code(&self, code: u64, len: usize) -> u64 {
        if len == 0 {
            return self.n as u64 + 1;
        }
        debug_assert!(len <= self.b);
        let key = Self::key_of(self.b, code, len);
        match &self.table {
            CountTable::Dense(v) => v.get(key as usize).copied().unwrap_or(0),
            CountTable::Sparse(m) => m.get(&key).copied().unwrap_or(0),
        }
    }

    /// Number of occurrences of `s`; the empty string occurs `n + 1` times.
    pub fn count(&self, s: &[u32]) -> Result<u64> {
        if s.len() > self.b {
            return invalid_arg(format!(
                "pattern length {} above counter limit {}",
                s.len(),
                self.b
            ));
        }
        if s.iter().any(|&c| c as u64 >= 1u64 << self.bps) {
            return Ok(0);
        }
        Ok(self.count_code(pack(s, self.bps), s.len()))
    }
}
