//! Growable bit streams stored least-significant-bit first in 64-bit words.
//!
//! Bit `i` of a stream lives in word `i / 64` at position `i % 64`. Reads past
//! the logical end return zeros, which lets table lookups near the end of a
//! stream read a full window without special cases.

use crate::error::{decode_err, invalid_arg, Result};
use std::fmt;

/// Machine word width in bits.
pub const W: usize = 64;

const MAGIC: &[u8; 4] = b"SSB1";

#[inline]
fn low_mask(count: usize) -> u64 {
    if count >= W {
        u64::MAX
    } else {
        (1u64 << count) - 1
    }
}

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    words: Vec<u64>,
    len: usize,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(W)),
            len: 0,
        }
    }

    /// A stream of `len` zero bits.
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(W)],
            len,
        }
    }

    /// Parses a string of `'0'`/`'1'` characters, first character at index 0.
    /// Whitespace is ignored.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let mut out = Self::new();
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() => {}
                c => return invalid_arg(format!("unexpected character {c:?} in bit string")),
            }
        }
        Ok(out)
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = Self::new();
        for b in bits {
            out.push(b);
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        if i >= self.len {
            return false;
        }
        (self.words[i / W] >> (i % W)) & 1 == 1
    }

    /// Sets bit `i` to one. The stream must already cover position `i`.
    #[inline]
    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "set({i}) beyond length {}", self.len);
        self.words[i / W] |= 1u64 << (i % W);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        assert!(i < self.len, "clear({i}) beyond length {}", self.len);
        self.words[i / W] &= !(1u64 << (i % W));
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        self.push_bits(bit as u64, 1);
    }

    /// Appends the `count` low bits of `value`; bit `j` of `value` lands at
    /// position `len + j`. Higher bits of `value` are ignored.
    ///
    /// Panics when `count > 64`; see [`BitStream::append_bits`] for the checked form.
    #[inline]
    pub fn push_bits(&mut self, value: u64, count: usize) {
        assert!(count <= W);
        if count == 0 {
            return;
        }
        let value = value & low_mask(count);
        let off = self.len % W;
        if off == 0 {
            self.words.push(value);
        } else {
            let last = self.words.len() - 1;
            self.words[last] |= value << off;
            if off + count > W {
                self.words.push(value >> (W - off));
            }
        }
        self.len += count;
    }

    /// Appends `count` zero bits.
    pub fn push_zeros(&mut self, mut count: usize) {
        while count > 0 {
            let c = count.min(W);
            self.push_bits(0, c);
            count -= c;
        }
    }

    pub fn append_bits(&mut self, value: u64, count: usize) -> Result<()> {
        if count > W {
            return invalid_arg(format!("append_bits count {count} exceeds word width"));
        }
        self.push_bits(value, count);
        Ok(())
    }

    /// Reads `count ≤ 64` bits starting at `start`, positions past the end read as 0.
    #[inline]
    pub fn peek(&self, start: usize, count: usize) -> u64 {
        debug_assert!(count <= W);
        if count == 0 || start >= self.len {
            return 0;
        }
        let wi = start / W;
        let off = start % W;
        let mut v = self.words[wi] >> off;
        if off != 0 && off + count > W && wi + 1 < self.words.len() {
            v |= self.words[wi + 1] << (W - off);
        }
        let avail = self.len - start;
        v & low_mask(count.min(avail))
    }

    pub fn read_bits(&self, start: usize, count: usize) -> Result<u64> {
        if count > W {
            return invalid_arg(format!("read_bits count {count} exceeds word width"));
        }
        Ok(self.peek(start, count))
    }

    /// Appends all bits of `src`, one word at a time.
    pub fn append_stream(&mut self, src: &BitStream) {
        let full = src.len / W;
        self.words.reserve(src.words.len());
        if self.len.is_multiple_of(W) {
            self.words.truncate(self.len / W);
            self.words.extend_from_slice(&src.words[..full]);
            self.len += full * W;
        } else {
            for &w in &src.words[..full] {
                self.push_bits(w, W);
            }
        }
        let rest = src.len % W;
        if rest > 0 {
            self.push_bits(src.words[full], rest);
        }
    }

    /// Appends bits `[start..start+count)` of `src`.
    pub fn append_range(&mut self, src: &BitStream, start: usize, count: usize) {
        let mut pos = start;
        let end = start + count;
        while pos < end {
            let c = (end - pos).min(W);
            self.push_bits(src.peek(pos, c), c);
            pos += c;
        }
    }

    /// Copy of bits `[start..start+count)`.
    pub fn slice(&self, start: usize, count: usize) -> BitStream {
        let mut out = BitStream::with_capacity(count);
        out.append_range(self, start, count);
        out
    }

    /// Shortens the stream to `len` bits.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.words.truncate(len.div_ceil(W));
        if !len.is_multiple_of(W) {
            let last = self.words.len() - 1;
            self.words[last] &= low_mask(len % W);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Positions of set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * W + t)
                }
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Serializes into the `SSB1` container: magic, `n` and the bit count as
    /// little-endian `u64`, then the bits packed eight per byte.
    pub fn to_container(&self, n: u64) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(20 + nbytes);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        for b in 0..nbytes {
            out.push(self.peek(b * 8, 8) as u8);
        }
        out
    }

    /// Parses an `SSB1` container, returning the stored `n` and the bits.
    pub fn from_container(bytes: &[u8]) -> Result<(u64, BitStream)> {
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return decode_err(0, "missing SSB1 header");
        }
        let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
        let bits = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = &bytes[20..];
        if body.len() != bits.div_ceil(8) {
            return decode_err(
                160,
                format!("container holds {} payload bytes, header implies {}", body.len(), bits.div_ceil(8)),
            );
        }
        let mut s = BitStream::with_capacity(bits);
        for (i, &byte) in body.iter().enumerate() {
            let c = (bits - i * 8).min(8);
            if c < 8 && (byte >> c) != 0 {
                return decode_err(160 + bits, "non-zero padding bits");
            }
            s.push_bits(byte as u64, c);
        }
        Ok((n, s))
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitStream({})", self)
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}
