//! Elias-γ codes and sparse encodings of non-negative integer sequences.
//!
//! A sparse encoding is a concatenation of tokens. A non-zero value `u` becomes
//! the literal token `1·γ(u)`, and a maximal block of `x` zeros becomes the
//! zero-run token `0·γ(x)`. Both tokens take `2⌊lg x⌋ + 2` bits. `γ(x)` is
//! `⌊lg x⌋` zeros followed by the binary digits of `x`, most significant first
//! in stream order.

use crate::bitstream::{BitStream, W};
use crate::error::{decode_err, invalid_arg, Result};
use crate::floor_lg;

/// Largest value a literal token may carry.
pub const MAX_VALUE: u64 = 1 << 62;

/// Writes `γ(x)` for `1 ≤ x ≤ MAX_VALUE`.
#[inline]
pub fn write_gamma(s: &mut BitStream, x: u64) {
    debug_assert!((1..=MAX_VALUE).contains(&x));
    let lg = floor_lg(x) as usize;
    s.push_zeros(lg);
    let rev = x.reverse_bits() >> (63 - lg);
    s.push_bits(rev, lg + 1);
}

pub fn gamma_encode(x: u64) -> Result<BitStream> {
    if x == 0 {
        return invalid_arg("the gamma code is defined for positive integers only");
    }
    if x > MAX_VALUE {
        return invalid_arg(format!("value {x} exceeds the literal cap 2^62"));
    }
    let mut s = BitStream::new();
    write_gamma(&mut s, x);
    Ok(s)
}

/// Decodes a γ-code at `offset`, returning the value and the number of bits read.
pub fn gamma_decode(s: &BitStream, offset: usize) -> Result<(u64, usize)> {
    if offset >= s.len() {
        return decode_err(offset, "gamma code starts past the end of the stream");
    }
    let window = s.peek(offset, W);
    if window == 0 {
        if offset + W <= s.len() {
            return decode_err(offset, "gamma code exceeds the literal cap");
        }
        return decode_err(offset, "truncated gamma code");
    }
    let z = window.trailing_zeros() as usize;
    if z > 62 {
        return decode_err(offset, "gamma code exceeds the literal cap");
    }
    if offset + 2 * z + 1 > s.len() {
        return decode_err(offset, "truncated gamma code");
    }
    let digits = s.peek(offset + z, z + 1);
    let value = digits.reverse_bits() >> (63 - z);
    if value > MAX_VALUE {
        return decode_err(offset, "gamma code exceeds the literal cap");
    }
    Ok((value, 2 * z + 1))
}

/// One token of a sparse encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Token {
    Literal(u64),
    Zeros(u64),
}

impl Token {
    pub fn value(&self) -> u64 {
        match *self {
            Token::Literal(x) | Token::Zeros(x) => x,
        }
    }

    /// Encoded size in bits.
    pub fn bits(&self) -> usize {
        token_bits(self.value())
    }

    /// Number of sequence entries the token stands for.
    pub fn span(&self) -> u64 {
        match *self {
            Token::Literal(_) => 1,
            Token::Zeros(x) => x,
        }
    }
}

/// `2⌊lg x⌋ + 2`, the size of either token carrying `x`.
#[inline]
pub fn token_bits(x: u64) -> usize {
    2 * floor_lg(x) as usize + 2
}

#[inline]
pub fn write_token(s: &mut BitStream, t: Token) {
    match t {
        Token::Literal(x) => {
            s.push_bits(1, 1);
            write_gamma(s, x);
        }
        Token::Zeros(x) => {
            s.push_bits(0, 1);
            write_gamma(s, x);
        }
    }
}

/// Reads one token at `offset`, returning it with its size in bits.
#[inline]
pub fn read_token(s: &BitStream, offset: usize) -> Result<(Token, usize)> {
    if offset >= s.len() {
        return decode_err(offset, "token starts past the end of the stream");
    }
    let flag = s.get(offset);
    let (x, used) = gamma_decode(s, offset + 1)?;
    let t = if flag { Token::Literal(x) } else { Token::Zeros(x) };
    Ok((t, used + 1))
}

/// Sequential token reader over a bit stream.
#[derive(Clone, Debug)]
pub struct TokenReader<'a> {
    bits: &'a BitStream,
    pos: usize,
    prev_zero: bool,
}

impl<'a> TokenReader<'a> {
    pub fn new(bits: &'a BitStream) -> Self {
        Self::at(bits, 0)
    }

    pub fn at(bits: &'a BitStream, pos: usize) -> Self {
        TokenReader {
            bits,
            pos,
            prev_zero: false,
        }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.bits.len()
    }

    /// Next token, or `None` at the end. Two consecutive zero-run tokens are an error.
    pub fn next_token(&mut self) -> Option<Result<Token>> {
        if self.at_end() {
            return None;
        }
        Some(read_token(self.bits, self.pos).and_then(|(t, used)| {
            let is_zero = matches!(t, Token::Zeros(_));
            if is_zero && self.prev_zero {
                return decode_err(self.pos, "two consecutive zero-run tokens");
            }
            self.prev_zero = is_zero;
            self.pos += used;
            Ok(t)
        }))
    }
}

impl Iterator for TokenReader<'_> {
    type Item = Result<Token>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_token()
    }
}

/// A sparse encoding together with the length of the sequence it encodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SparseEncoding {
    bits: BitStream,
    len: usize,
}

impl SparseEncoding {
    /// Validates `bits` as a token stream and records its decoded length.
    pub fn from_bits(bits: BitStream) -> Result<Self> {
        let mut len: u64 = 0;
        for t in TokenReader::new(&bits) {
            len += t?.span();
        }
        Ok(SparseEncoding {
            bits,
            len: len as usize,
        })
    }

    /// Wraps `bits` without validation; the caller guarantees it encodes `len` values.
    pub fn from_parts_unchecked(bits: BitStream, len: usize) -> Self {
        SparseEncoding { bits, len }
    }

    /// Encoding of `n` zeros.
    pub fn zeros(n: usize) -> Self {
        let mut w = SencWriter::new();
        w.push_zeros(n as u64);
        w.finish()
    }

    pub fn bits(&self) -> &BitStream {
        &self.bits
    }

    pub fn into_bits(self) -> BitStream {
        self.bits
    }

    /// Length of the encoded sequence.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of the encoding in bits.
    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    pub fn tokens(&self) -> TokenReader<'_> {
        TokenReader::new(&self.bits)
    }

    pub fn decode(&self) -> Result<Vec<u64>> {
        let out = senc_decode(&self.bits)?;
        if out.len() != self.len {
            return decode_err(
                self.bits.len(),
                format!("decoded {} values, expected {}", out.len(), self.len),
            );
        }
        Ok(out)
    }

    pub fn to_container(&self) -> Vec<u8> {
        self.bits.to_container(self.len as u64)
    }

    pub fn from_container(bytes: &[u8]) -> Result<Self> {
        let (n, bits) = BitStream::from_container(bytes)?;
        let e = SparseEncoding::from_bits(bits)?;
        if e.len as u64 != n {
            return decode_err(
                e.bits.len(),
                format!("container declares {n} values but encodes {}", e.len),
            );
        }
        Ok(e)
    }
}

/// Incremental encoder. Zeros are buffered, so adjacent zero blocks always
/// merge into one zero-run token.
#[derive(Clone, Debug, Default)]
pub struct SencWriter {
    bits: BitStream,
    len: u64,
    zeros: u64,
}

impl SencWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    fn flush(&mut self) {
        if self.zeros > 0 {
            write_token(&mut self.bits, Token::Zeros(self.zeros));
            self.zeros = 0;
        }
    }

    /// Appends one value. Panics above [`MAX_VALUE`]; use [`SencWriter::try_push`] for checked input.
    #[inline]
    pub fn push(&mut self, v: u64) {
        if v == 0 {
            self.zeros += 1;
        } else {
            assert!(v <= MAX_VALUE, "value {v} exceeds the literal cap");
            self.flush();
            write_token(&mut self.bits, Token::Literal(v));
        }
        self.len += 1;
    }

    pub fn try_push(&mut self, v: u64) -> Result<()> {
        if v > MAX_VALUE {
            return invalid_arg(format!("value {v} exceeds the literal cap 2^62"));
        }
        self.push(v);
        Ok(())
    }

    #[inline]
    pub fn push_zeros(&mut self, x: u64) {
        self.zeros += x;
        self.len += x;
    }

    /// Appends raw token bits `src[start..start+count)` encoding `values`
    /// entries. The range must be empty or begin and end with literal tokens.
    #[inline]
    pub fn push_raw(&mut self, src: &BitStream, start: usize, count: usize, values: u64) {
        if count == 0 {
            debug_assert_eq!(values, 0);
            return;
        }
        self.flush();
        self.bits.append_range(src, start, count);
        self.len += values;
    }

    /// Appends every value encoded by `e`.
    pub fn push_encoding(&mut self, e: &SparseEncoding) {
        for t in e.tokens() {
            match t.expect("SparseEncoding holds a valid token stream") {
                Token::Literal(x) => self.push(x),
                Token::Zeros(x) => self.push_zeros(x),
            }
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of zeros waiting to be written.
    pub fn pending_zeros(&self) -> u64 {
        self.zeros
    }

    pub fn finish(mut self) -> SparseEncoding {
        self.flush();
        SparseEncoding {
            bits: self.bits,
            len: self.len as usize,
        }
    }
}

pub fn senc_encode(a: &[u64]) -> Result<SparseEncoding> {
    let mut w = SencWriter::new();
    for &v in a {
        w.try_push(v)?;
    }
    Ok(w.finish())
}

/// Decodes a token stream into the dense sequence.
pub fn senc_decode(bits: &BitStream) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for t in TokenReader::new(bits) {
        match t? {
            Token::Literal(x) => out.push(x),
            Token::Zeros(x) => out.resize(out.len() + x as usize, 0),
        }
    }
    Ok(out)
}

/// Encodes the length-`n` sequence whose non-zero entries are `pairs`.
pub fn senc_from_list(n: usize, pairs: &[(usize, u64)]) -> Result<SparseEncoding> {
    let mut w = SencWriter::new();
    let mut next = 0usize;
    for &(pos, v) in pairs {
        if pos < next || pos >= n {
            return invalid_arg(format!(
                "position {pos} is not increasing or not below n = {n}"
            ));
        }
        if v == 0 {
            return invalid_arg(format!("value at position {pos} must be non-zero"));
        }
        w.push_zeros((pos - next) as u64);
        w.try_push(v)?;
        next = pos + 1;
    }
    w.push_zeros((n - next) as u64);
    Ok(w.finish())
}

/// Encodes a 0/1 mask given by its sorted set positions.
pub fn senc_from_positions(n: usize, positions: &[usize]) -> Result<SparseEncoding> {
    let pairs: Vec<(usize, u64)> = positions.iter().map(|&p| (p, 1)).collect();
    senc_from_list(n, &pairs)
}

/// Returns the length and the non-zero entries of an encoded sequence.
pub fn senc_to_list(e: &SparseEncoding) -> Result<(usize, Vec<(usize, u64)>)> {
    let mut pos = 0usize;
    let mut pairs = Vec::new();
    for t in e.tokens() {
        match t? {
            Token::Literal(x) => {
                pairs.push((pos, x));
                pos += 1;
            }
            Token::Zeros(x) => pos += x as usize,
        }
    }
    Ok((pos, pairs))
}

/// Encoding of the reversed sequence, built token by token.
pub fn senc_reverse(e: &SparseEncoding) -> Result<SparseEncoding> {
    let tokens: Vec<Token> = e.tokens().collect::<Result<_>>()?;
    let mut bits = BitStream::with_capacity(e.bit_len());
    for &t in tokens.iter().rev() {
        write_token(&mut bits, t);
    }
    Ok(SparseEncoding { bits, len: e.len })
}

/// Exact size of `senc(a)` in bits, computed from the token formula.
pub fn senc_size(a: &[u64]) -> usize {
    let mut total = 0;
    let mut zeros = 0u64;
    for &v in a {
        if v == 0 {
            zeros += 1;
        } else {
            if zeros > 0 {
                total += token_bits(zeros);
                zeros = 0;
            }
            total += token_bits(v);
        }
    }
    if zeros > 0 {
        total += token_bits(zeros);
    }
    total
}

/// Holds a precomputed encoding and hands out copies word by word.
#[derive(Clone, Debug)]
pub struct DeferredEncoder {
    encoded: SparseEncoding,
}

impl DeferredEncoder {
    pub fn build(a: &[u64]) -> Result<Self> {
        Ok(DeferredEncoder {
            encoded: senc_encode(a)?,
        })
    }

    pub fn emit(&self) -> SparseEncoding {
        let mut bits = BitStream::with_capacity(self.encoded.bit_len());
        bits.append_stream(self.encoded.bits());
        SparseEncoding {
            bits,
            len: self.encoded.len,
        }
    }
}

/// Reads an `ell`-bit window at `pos`. A window reaching past the end is
/// padded with an incomplete literal token `1·0…`, so that no token can be
/// completed from padding.
#[inline]
pub fn window_at(bits: &BitStream, pos: usize, ell: usize) -> u64 {
    let v = bits.peek(pos, ell);
    let end = bits.len();
    if pos + ell > end {
        let rem = end.saturating_sub(pos);
        if rem < ell {
            return v | (1u64 << rem);
        }
    }
    v
}

/// Parses one token from the low `limit` bits of `w` starting at bit `pos`;
/// `None` when the token does not end within the limit.
#[inline]
pub fn token_in_word(w: u64, pos: usize, limit: usize) -> Option<(Token, usize)> {
    if pos + 2 > limit {
        return None;
    }
    let flag = (w >> pos) & 1;
    let rest = w >> (pos + 1);
    if rest == 0 {
        return None;
    }
    let z = rest.trailing_zeros() as usize;
    let used = 2 * z + 2;
    if pos + used > limit || z > 62 {
        return None;
    }
    let digits = (rest >> z) & if z + 1 >= 64 { u64::MAX } else { (1u64 << (z + 1)) - 1 };
    let x = digits.reverse_bits() >> (63 - z);
    let t = if flag == 1 {
        Token::Literal(x)
    } else {
        Token::Zeros(x)
    };
    Some((t, used))
}

/// Result of parsing the longest valid sparse-encoding prefix of a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseInfo {
    /// Length in bits of the longest prefix that is a valid sparse encoding.
    pub b: usize,
    /// Number of values encoded by that prefix.
    pub a: u64,
    /// Number of non-zero values among them.
    pub a_plus: usize,
    /// Largest value (0 when all are zero).
    pub max_val: u64,
    /// Bit `j` is set iff a literal token starts at window bit `j < b`.
    pub literal_start_mask: u64,
    /// Indices (within the decoded prefix) of the non-zero values.
    pub nonzero_pos: Vec<u64>,
    /// The non-zero values, aligned with `nonzero_pos`.
    pub values: Vec<u64>,
}

impl ParseInfo {
    /// Number of non-zero values among the first `j` decoded ones.
    pub fn rank(&self, j: u64) -> usize {
        self.nonzero_pos.partition_point(|&p| p < j)
    }

    /// Decoded index of the `j`-th non-zero value, `1 ≤ j ≤ a_plus`.
    pub fn select(&self, j: usize) -> Option<u64> {
        if j == 0 {
            return None;
        }
        self.nonzero_pos.get(j - 1).copied()
    }

    /// The decoded prefix as a dense array.
    pub fn dense(&self) -> Vec<u64> {
        let mut out = vec![0; self.a as usize];
        for (&p, &v) in self.nonzero_pos.iter().zip(&self.values) {
            out[p as usize] = v;
        }
        out
    }
}

/// Longest prefix `B[0..b)` with `b ≤ ell` of the window `w` (bit 0 first)
/// that is a valid sparse encoding.
pub fn prefix_parse(w: u64, ell: usize) -> ParseInfo {
    assert!(ell <= W);
    let mut info = ParseInfo {
        b: 0,
        a: 0,
        a_plus: 0,
        max_val: 0,
        literal_start_mask: 0,
        nonzero_pos: Vec::new(),
        values: Vec::new(),
    };
    let mut prev_zero = false;
    while let Some((t, used)) = token_in_word(w, info.b, ell) {
        match t {
            Token::Literal(x) => {
                info.literal_start_mask |= 1u64 << info.b;
                info.nonzero_pos.push(info.a);
                info.values.push(x);
                info.a_plus += 1;
                info.a += 1;
                info.max_val = info.max_val.max(x);
                prev_zero = false;
            }
            Token::Zeros(x) => {
                if prev_zero {
                    break;
                }
                info.a += x;
                prev_zero = true;
            }
        }
        info.b += used;
    }
    info
}

/// Compact per-window summary stored in a [`ParseTable`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseSummary {
    pub b: u8,
    pub a_plus: u8,
    pub a: u64,
    pub max_val: u64,
    pub literal_start_mask: u64,
}

/// Table of [`ParseSummary`] for every `ell`-bit window.
#[derive(Clone, Debug)]
pub struct ParseTable {
    ell: usize,
    entries: Vec<ParseSummary>,
}

impl ParseTable {
    pub fn new(ell: usize) -> Result<Self> {
        if ell == 0 || ell > 24 {
            return invalid_arg(format!("parse table width {ell} outside [1..24]"));
        }
        let entries = (0..1u64 << ell)
            .map(|w| {
                let p = prefix_parse(w, ell);
                ParseSummary {
                    b: p.b as u8,
                    a_plus: p.a_plus as u8,
                    a: p.a,
                    max_val: p.max_val,
                    literal_start_mask: p.literal_start_mask,
                }
            })
            .collect();
        Ok(ParseTable { ell, entries })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    #[inline]
    pub fn lookup(&self, window: u64) -> &ParseSummary {
        &self.entries[window as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bs(s: &str) -> BitStream {
        BitStream::from_bit_str(s).unwrap()
    }

    fn worked_example() -> Vec<u64> {
        let mut a = vec![0; 3];
        a.push(3);
        a.extend([0, 0]);
        a.push(5);
        a.extend([0; 7]);
        a.extend([9, 1, 0, 0]);
        a
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_encode(1).unwrap().to_string(), "1");
        assert_eq!(gamma_encode(5).unwrap().to_string(), "00101");
        assert!(gamma_encode(0).is_err());
        assert!(gamma_encode(MAX_VALUE + 1).is_err());
        assert_eq!(gamma_decode(&bs("00101"), 0).unwrap(), (5, 5));
        assert!(gamma_decode(&bs("0010"), 0).is_err());
    }

    #[test]
    fn gamma_round_trip_exhaustive() {
        let mut s = BitStream::new();
        for x in 1..=100_000u64 {
            write_gamma(&mut s, x);
        }
        let mut pos = 0;
        for x in 1..=100_000u64 {
            let (v, used) = gamma_decode(&s, pos).unwrap();
            assert_eq!(v, x);
            assert_eq!(used, 2 * floor_lg(x) as usize + 1);
            pos += used;
        }
        assert_eq!(pos, s.len());
    }

    #[test]
    fn gamma_extremes() {
        let s = gamma_encode(MAX_VALUE).unwrap();
        assert_eq!(gamma_decode(&s, 0).unwrap(), (MAX_VALUE, 125));
        let s = gamma_encode(MAX_VALUE - 1).unwrap();
        assert_eq!(gamma_decode(&s, 0).unwrap().0, MAX_VALUE - 1);
    }

    #[test]
    fn worked_example_bits() {
        let e = senc_encode(&worked_example()).unwrap();
        let expected = bs("0011 1011 0010 100101 000111 10001001 11 0010");
        assert_eq!(e.bits(), &expected);
        assert_eq!(e.bit_len(), 38);
        assert_eq!(e.decode().unwrap(), worked_example());
        assert_eq!(senc_size(&worked_example()), 38);
    }

    #[test]
    fn degenerate_encodings() {
        assert!(senc_encode(&[]).unwrap().bits().is_empty());
        assert_eq!(senc_encode(&[0; 5]).unwrap().bits().to_string(), "000101");
        assert_eq!(SparseEncoding::zeros(5).bit_len(), 6);
    }

    #[test]
    fn consecutive_zero_runs_rejected() {
        // 0·γ(1) twice.
        let bad = bs("0101");
        assert!(senc_decode(&bad).is_err());
        assert!(SparseEncoding::from_bits(bad).is_err());
    }

    #[test]
    fn list_codec_examples() {
        assert_eq!(
            senc_from_list(4, &[(1, 7)]).unwrap(),
            senc_encode(&[0, 7, 0, 0]).unwrap()
        );
        assert!(senc_from_list(0, &[]).unwrap().bits().is_empty());
        assert!(senc_from_list(4, &[(2, 1), (2, 1)]).is_err());
        assert!(senc_from_list(4, &[(4, 1)]).is_err());
    }

    #[test]
    fn deferred_examples() {
        for a in [worked_example(), vec![], vec![0; 5]] {
            assert_eq!(
                DeferredEncoder::build(&a).unwrap().emit(),
                senc_encode(&a).unwrap()
            );
        }
    }

    #[test]
    fn prefix_parse_example() {
        let w = bs("10110010").peek(0, 8) | (1 << 8);
        let p = prefix_parse(w, 8);
        assert_eq!((p.b, p.a, p.a_plus), (8, 3, 1));
        assert_eq!(p.dense(), vec![3, 0, 0]);
        assert_eq!(p.literal_start_mask, 1);
    }

    #[test]
    fn prefix_parse_long_zero_run() {
        let e = SparseEncoding::zeros(1000);
        let w = window_at(e.bits(), 0, 8);
        assert_eq!(prefix_parse(w, 8).b, 0);
    }

    #[test]
    fn zero_run_lengths() {
        for n in 1..=(1u64 << 20) {
            assert_eq!(
                SparseEncoding::zeros(n as usize).bit_len(),
                2 * floor_lg(n) as usize + 2
            );
        }
    }

    #[test]
    fn corrupted_streams_never_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = senc_encode(&worked_example()).unwrap();
        for _ in 0..2000 {
            let mut bits = base.bits().clone();
            let flips = rng.gen_range(1..4);
            for _ in 0..flips {
                let i = rng.gen_range(0..bits.len());
                if bits.get(i) {
                    bits.clear(i);
                } else {
                    bits.set(i);
                }
            }
            if let Ok(v) = senc_decode(&bits) {
                assert_eq!(senc_encode(&v).unwrap().bits(), &bits);
            }
        }
    }

    /// Valid prefix lengths of a token stream, from an exhaustive check of every prefix.
    fn valid_prefix_lengths(bits: &BitStream, limit: usize) -> Vec<usize> {
        (0..=limit.min(bits.len()))
            .filter(|&b| senc_decode(&bits.slice(0, b)).is_ok())
            .collect()
    }

    fn value_strategy() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(
            prop_oneof![3 => Just(0u64), 1 => 1u64..20, 1 => 1u64..(1 << 40)],
            0..200,
        )
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(a in value_strategy()) {
            let e = senc_encode(&a).unwrap();
            prop_assert_eq!(e.len(), a.len());
            prop_assert_eq!(e.decode().unwrap(), a.clone());
            prop_assert_eq!(e.bit_len(), senc_size(&a));
            if !a.is_empty() {
                prop_assert!(e.bit_len() > 2 * floor_lg(a.len() as u64) as usize);
            }
        }

        #[test]
        fn list_path_matches_dense(a in value_strategy()) {
            let pairs: Vec<(usize, u64)> =
                a.iter().enumerate().filter(|(_, &v)| v > 0).map(|(i, &v)| (i, v)).collect();
            let e = senc_from_list(a.len(), &pairs).unwrap();
            prop_assert_eq!(&e, &senc_encode(&a).unwrap());
            prop_assert_eq!(senc_to_list(&e).unwrap(), (a.len(), pairs));
        }

        #[test]
        fn prefix_law(a in value_strategy(), b in value_strategy()) {
            let full: Vec<u64> = a.iter().chain(b.iter()).copied().collect();
            let ea = senc_encode(&a).unwrap();
            let ef = senc_encode(&full).unwrap();
            let is_prefix = ea.bit_len() <= ef.bit_len()
                && ef.bits().slice(0, ea.bit_len()) == *ea.bits();
            let ends_00 = a.len() < full.len()
                && !a.is_empty()
                && a[a.len() - 1] == 0
                && full[a.len()] == 0;
            prop_assert_eq!(is_prefix, !ends_00);
        }

        #[test]
        fn reverse_matches_dense(a in value_strategy()) {
            let r = senc_reverse(&senc_encode(&a).unwrap()).unwrap();
            let mut rev = a.clone();
            rev.reverse();
            prop_assert_eq!(r, senc_encode(&rev).unwrap());
        }

        #[test]
        fn prefix_parse_is_maximal(a in prop::collection::vec(prop_oneof![3 => Just(0u64), 1 => 1u64..40], 0..40), start in 0usize..40, ell in 1usize..=40) {
            let e = senc_encode(&a).unwrap();
            // Move to a token boundary at or after `start`.
            let mut reader = TokenReader::new(e.bits());
            while reader.pos() < start.min(e.bit_len()) {
                reader.next_token().unwrap().unwrap();
            }
            let pos = reader.pos();
            let w = window_at(e.bits(), pos, ell);
            let p = prefix_parse(w, ell);
            let rest = e.bits().slice(pos, e.bit_len() - pos);
            let valid = valid_prefix_lengths(&rest, ell);
            prop_assert_eq!(p.b, *valid.last().unwrap());
            // The parsed prefix re-encodes to exactly the window prefix.
            let dense = p.dense();
            let re = senc_encode(&dense).unwrap();
            prop_assert_eq!(re.bits(), &rest.slice(0, p.b));
            prop_assert_eq!(p.a_plus, dense.iter().filter(|&&v| v > 0).count());
        }
    }

    #[test]
    fn parse_table_matches_direct_parse() {
        let t = ParseTable::new(10).unwrap();
        for w in 0..1u64 << 10 {
            let p = prefix_parse(w, 10);
            let s = t.lookup(w);
            assert_eq!((s.b as usize, s.a, s.a_plus as usize), (p.b, p.a, p.a_plus));
        }
    }
}
