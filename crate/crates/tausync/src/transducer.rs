//! Deterministic finite-state transducers over integer alphabets, run either
//! symbol by symbol or directly on sparse encodings.
//!
//! The accelerated runner reads the input encoding in windows of `lg M`
//! bits. A window whose longest valid prefix is non-empty is handled by one
//! table lookup. A token that does not fit into a window is either a literal
//! (one ordinary step) or a long zero run. Zero runs alternate between jumps
//! along the zero-in/zero-out transitions and table steps over a few zeros.

use crate::bitstream::BitStream;
use crate::error::{decode_err, invalid_arg, Result};
use crate::floor_lg;
use crate::sparsecodec::{
    prefix_parse, read_token, senc_encode, token_in_word, window_at, SencWriter, SparseEncoding, Token,
    MAX_VALUE,
};
use crate::Params;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// A deterministic transducer reading `arity()` synchronized streams.
pub trait Transducer {
    fn states(&self) -> usize;
    fn initial(&self) -> usize;
    fn arity(&self) -> usize;
    /// Next state and output symbol. Must be defined for every state below
    /// `states()` and every input column.
    fn step(&self, state: usize, input: &[u64]) -> (usize, u64);
}

impl<T: Transducer + ?Sized> Transducer for &T {
    fn states(&self) -> usize {
        (**self).states()
    }
    fn initial(&self) -> usize {
        (**self).initial()
    }
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn step(&self, state: usize, input: &[u64]) -> (usize, u64) {
        (**self).step(state, input)
    }
}

impl<T: Transducer + ?Sized> Transducer for Box<T> {
    fn states(&self) -> usize {
        (**self).states()
    }
    fn initial(&self) -> usize {
        (**self).initial()
    }
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn step(&self, state: usize, input: &[u64]) -> (usize, u64) {
        (**self).step(state, input)
    }
}

/// A transducer given by a closure.
#[derive(Clone)]
pub struct FnTransducer<F> {
    states: usize,
    initial: usize,
    arity: usize,
    f: F,
}

impl<F: Fn(usize, &[u64]) -> (usize, u64)> FnTransducer<F> {
    pub fn new(states: usize, initial: usize, arity: usize, f: F) -> Self {
        assert!(initial < states && arity >= 1);
        FnTransducer {
            states,
            initial,
            arity,
            f,
        }
    }
}

impl<F: Fn(usize, &[u64]) -> (usize, u64)> Transducer for FnTransducer<F> {
    fn states(&self) -> usize {
        self.states
    }
    fn initial(&self) -> usize {
        self.initial
    }
    fn arity(&self) -> usize {
        self.arity
    }
    fn step(&self, state: usize, input: &[u64]) -> (usize, u64) {
        (self.f)(state, input)
    }
}

/// The single-state transducer `x ↦ max(0, x − 1)`.
pub fn decrement() -> FnTransducer<impl Fn(usize, &[u64]) -> (usize, u64) + Clone> {
    FnTransducer::new(1, 0, 1, |_, x: &[u64]| (0, x[0].saturating_sub(1)))
}

/// The single-state transducer `x ↦ [x ≥ c]`.
pub fn threshold(c: u64) -> FnTransducer<impl Fn(usize, &[u64]) -> (usize, u64) + Clone> {
    FnTransducer::new(1, 0, 1, move |_, x: &[u64]| (0, (x[0] >= c.max(1)) as u64))
}

/// Output and final state of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveRun {
    pub output: Vec<u64>,
    pub state: usize,
}

/// Evaluates `spec` position by position.
pub fn run_naive<T: Transducer + ?Sized>(spec: &T, inputs: &[&[u64]]) -> Result<NaiveRun> {
    if inputs.len() != spec.arity() {
        return invalid_arg(format!(
            "transducer has arity {}, got {} inputs",
            spec.arity(),
            inputs.len()
        ));
    }
    let n = inputs[0].len();
    if inputs.iter().any(|a| a.len() != n) {
        return invalid_arg("inputs have different lengths");
    }
    let mut state = spec.initial();
    let mut column = vec![0u64; inputs.len()];
    let mut output = Vec::with_capacity(n);
    for i in 0..n {
        for (c, a) in column.iter_mut().zip(inputs) {
            *c = a[i];
        }
        let (s, y) = spec.step(state, &column);
        state = s;
        output.push(y);
    }
    Ok(NaiveRun { output, state })
}

/// Maximal walk length from a node; `Infinite` when a cycle is reachable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Reach {
    Finite(u64),
    Infinite,
}

/// Jump queries on a graph with out-degree at most one, by binary lifting.
#[derive(Clone, Debug)]
pub struct JumpStructure {
    up: Vec<Vec<Option<u32>>>,
    reach: Vec<Reach>,
}

impl JumpStructure {
    pub fn new(next: &[Option<usize>]) -> Self {
        let v = next.len();
        let mut up = vec![next.iter().map(|x| x.map(|y| y as u32)).collect::<Vec<_>>()];
        for j in 1..64 {
            let prev: &Vec<Option<u32>> = &up[j - 1];
            let level = (0..v).map(|x| prev[x].and_then(|y| prev[y as usize])).collect();
            up.push(level);
        }
        // 0 = unvisited, 1 = on the current walk, 2 = done.
        let mut color = vec![0u8; v];
        let mut reach = vec![Reach::Finite(0); v];
        for start in 0..v {
            if color[start] != 0 {
                continue;
            }
            let mut path = Vec::new();
            let mut x = start;
            let tail = loop {
                if color[x] == 2 {
                    break reach[x];
                }
                if color[x] == 1 {
                    break Reach::Infinite;
                }
                color[x] = 1;
                path.push(x);
                match next[x] {
                    Some(y) => x = y,
                    None => break Reach::Finite(0),
                }
            };
            // The last node on the path either ends the walk (its own reach is
            // `tail`) or continues into a known node, one step further away.
            let mut cur = tail;
            for (idx, &p) in path.iter().enumerate().rev() {
                let is_last = idx + 1 == path.len();
                cur = match (cur, is_last && next[p].is_none()) {
                    (Reach::Infinite, _) => Reach::Infinite,
                    (Reach::Finite(d), true) => Reach::Finite(d),
                    (Reach::Finite(d), false) => Reach::Finite(d + 1),
                };
                reach[p] = cur;
                color[p] = 2;
            }
        }
        JumpStructure { up, reach }
    }

    /// The node reached after exactly `d` edges, if the walk is that long.
    pub fn jump(&self, v: usize, d: u64) -> Option<usize> {
        let mut x = v as u32;
        for j in 0..64 {
            if d >> j & 1 == 1 {
                x = self.up[j][x as usize]?;
            }
        }
        Some(x as usize)
    }

    /// Largest `d` for which [`JumpStructure::jump`] succeeds.
    pub fn furthest(&self, v: usize) -> Reach {
        self.reach[v]
    }
}

/// Counters describing one accelerated run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Table lookups over whole windows.
    pub macro_steps: usize,
    /// Literal tokens longer than a window, processed by one transition.
    pub long_literals: usize,
    /// Jumps over zero-in/zero-out transitions inside long zero runs.
    pub flexible_steps: usize,
    /// Table steps over at most `ymax` zeros inside long zero runs.
    pub fixed_steps: usize,
    /// Smallest number of input bits consumed by two consecutive steps.
    pub min_pair_advance: Option<usize>,
}

/// Output of a group of transitions split into leading zeros, the encoded
/// middle part (starting and ending with a literal) and trailing zeros.
#[derive(Clone, Debug, Default)]
struct OutputBlock {
    lead: u64,
    middle: BitStream,
    middle_values: u64,
    trail: u64,
}

impl OutputBlock {
    fn from_dense(out: &[u64]) -> Self {
        let first = out.iter().position(|&v| v != 0);
        match first {
            None => OutputBlock {
                lead: out.len() as u64,
                ..Default::default()
            },
            Some(f) => {
                let l = out.iter().rposition(|&v| v != 0).unwrap();
                let enc = senc_encode(&out[f..=l]).expect("output symbols within the literal cap");
                OutputBlock {
                    lead: f as u64,
                    middle_values: (l + 1 - f) as u64,
                    middle: enc.into_bits(),
                    trail: (out.len() - 1 - l) as u64,
                }
            }
        }
    }

    #[inline]
    fn write(&self, w: &mut SencWriter) {
        w.push_zeros(self.lead);
        if self.middle_values > 0 {
            w.push_raw(&self.middle, 0, self.middle.len(), self.middle_values);
            w.push_zeros(self.trail);
        }
    }
}

#[derive(Clone, Debug)]
struct WindowEntry {
    bits: u8,
    state: u32,
    out: OutputBlock,
}

/// Acceleration tables for a single-stream transducer.
pub struct AccelSingle<T: Transducer> {
    spec: T,
    lg_m: usize,
    ymax: usize,
    windows: Vec<WindowEntry>,
    short_zeros: Vec<Vec<(u32, Vec<u64>)>>,
    jumps: JumpStructure,
}

/// `lg M = max(3, ⌊lg N / 4⌋)`.
pub fn default_window_bits(params: &Params) -> usize {
    ((params.lg_table() / 4) as usize).max(3)
}

impl<T: Transducer> AccelSingle<T> {
    pub fn new(spec: T, params: &Params) -> Result<Self> {
        let lg_m = default_window_bits(params);
        Self::with_window(spec, lg_m, (1usize << (lg_m / 4)).max(2))
    }

    /// Tables over `lg_m`-bit windows and zero runs of length up to `ymax`.
    pub fn with_window(spec: T, lg_m: usize, ymax: usize) -> Result<Self> {
        if spec.arity() != 1 {
            return invalid_arg("acceleration needs a single-stream transducer");
        }
        if !(3..=20).contains(&lg_m) || ymax == 0 {
            return invalid_arg(format!("window width {lg_m} outside [3..20] or ymax = 0"));
        }
        let q = spec.states();
        let mut windows = Vec::with_capacity(q << lg_m);
        for s in 0..q {
            for w in 0..1u64 << lg_m {
                let p = prefix_parse(w, lg_m);
                let mut state = s;
                let mut out = Vec::with_capacity(p.a as usize);
                for v in p.dense() {
                    let (ns, y) = spec.step(state, &[v]);
                    state = ns;
                    out.push(y);
                }
                windows.push(WindowEntry {
                    bits: p.b as u8,
                    state: state as u32,
                    out: OutputBlock::from_dense(&out),
                });
            }
        }
        let short_zeros = (0..q)
            .map(|s| {
                (0..=ymax)
                    .map(|y| {
                        let mut state = s;
                        let out: Vec<u64> = (0..y)
                            .map(|_| {
                                let (ns, v) = spec.step(state, &[0]);
                                state = ns;
                                v
                            })
                            .collect();
                        (state as u32, out)
                    })
                    .collect()
            })
            .collect();
        let next: Vec<Option<usize>> = (0..q)
            .map(|s| match spec.step(s, &[0]) {
                (ns, 0) => Some(ns),
                _ => None,
            })
            .collect();
        Ok(AccelSingle {
            spec,
            lg_m,
            ymax,
            windows,
            short_zeros,
            jumps: JumpStructure::new(&next),
        })
    }

    pub fn spec(&self) -> &T {
        &self.spec
    }

    pub fn window_bits(&self) -> usize {
        self.lg_m
    }

    pub fn run(&self, input: &SparseEncoding) -> Result<SparseEncoding> {
        Ok(self.run_with_stats(input)?.0)
    }

    /// Output encoding, final state and step counters.
    pub fn run_with_stats(&self, input: &SparseEncoding) -> Result<(SparseEncoding, usize, RunStats)> {
        let bits = input.bits();
        let end = bits.len();
        let lg_m = self.lg_m;
        let mut w = SencWriter::new();
        let mut state = self.spec.initial();
        let mut pos = 0;
        let mut stats = RunStats::default();
        let mut last_advance: Option<usize> = None;
        let mut prev_zero_run = false;
        while pos < end {
            let before = pos;
            let win = window_at(bits, pos, lg_m);
            let entry = &self.windows[(state << lg_m) | win as usize];
            if entry.bits > 0 {
                let first = token_in_word(win, 0, lg_m);
                if prev_zero_run && matches!(first, Some((Token::Zeros(_), _))) {
                    return decode_err(pos, "two consecutive zero-run tokens");
                }
                entry.out.write(&mut w);
                state = entry.state as usize;
                pos += entry.bits as usize;
                prev_zero_run = ends_with_zero_run(win, entry.bits as usize);
                stats.macro_steps += 1;
            } else {
                let (tok, used) = read_token(bits, pos)?;
                pos += used;
                match tok {
                    Token::Literal(x) => {
                        let (ns, y) = self.spec.step(state, &[x]);
                        state = ns;
                        w.push(y);
                        stats.long_literals += 1;
                        prev_zero_run = false;
                    }
                    Token::Zeros(x) => {
                        if prev_zero_run {
                            return decode_err(before, "two consecutive zero-run tokens");
                        }
                        state = self.zero_run(state, x, &mut w, &mut stats);
                        prev_zero_run = true;
                    }
                }
            }
            let adv = pos - before;
            if let Some(prev) = last_advance {
                let pair = prev + adv;
                stats.min_pair_advance = Some(stats.min_pair_advance.map_or(pair, |m| m.min(pair)));
            }
            last_advance = Some(adv);
        }
        if w.len() != input.len() as u64 {
            return decode_err(end, "input encoding length does not match its declared length");
        }
        Ok((w.finish(), state, stats))
    }

    fn zero_run(&self, mut state: usize, mut x: u64, w: &mut SencWriter, stats: &mut RunStats) -> usize {
        while x > 0 {
            let d = match self.jumps.furthest(state) {
                Reach::Infinite => x,
                Reach::Finite(f) => f.min(x),
            };
            if d > 0 {
                state = self.jumps.jump(state, d).expect("jump within the furthest reach");
                w.push_zeros(d);
                x -= d;
                stats.flexible_steps += 1;
            }
            if x == 0 {
                break;
            }
            let y = (x as usize).min(self.ymax);
            let (ns, out) = &self.short_zeros[state][y];
            for &v in out {
                w.push(v);
            }
            state = *ns as usize;
            x -= y as u64;
            stats.fixed_steps += 1;
        }
        state
    }
}

fn ends_with_zero_run(win: u64, bits: usize) -> bool {
    let mut pos = 0;
    let mut last = false;
    while pos < bits {
        match token_in_word(win, pos, bits) {
            Some((t, used)) => {
                last = matches!(t, Token::Zeros(_));
                pos += used;
            }
            None => break,
        }
    }
    last
}

/// Largest bit length of a zip symbol's inner encoding.
pub const ZIP_MAX_INNER_BITS: usize = 61;

/// `0` when every value is zero, otherwise the integer whose binary
/// representation is `1` followed by `senc(values)`.
pub fn zip_symbol(values: &[u64]) -> Result<u64> {
    if values.iter().all(|&v| v == 0) {
        return Ok(0);
    }
    let e = senc_encode(values)?;
    let l = e.bit_len();
    if l > ZIP_MAX_INNER_BITS {
        return invalid_arg(format!("zipped symbol needs {} bits", l + 1));
    }
    let mut x = 1u64;
    for b in e.bits().iter() {
        x = (x << 1) | b as u64;
    }
    debug_assert!(x <= MAX_VALUE);
    Ok(x)
}

/// Inverse of [`zip_symbol`] for `t` values.
pub fn unzip_symbol(x: u64, t: usize) -> Result<Vec<u64>> {
    if x == 0 {
        return Ok(vec![0; t]);
    }
    let l = floor_lg(x) as usize;
    let bits = BitStream::from_bools((0..l).rev().map(|j| x >> j & 1 == 1));
    let e = SparseEncoding::from_bits(bits)?;
    let v = e.decode()?;
    if v.len() != t || v.iter().all(|&y| y == 0) {
        return decode_err(0, format!("zip symbol {x} does not hold {t} values"));
    }
    Ok(v)
}

/// Positionwise zip of dense arrays.
pub fn zip_naive(arrays: &[&[u64]]) -> Result<Vec<u64>> {
    let n = arrays.first().map_or(0, |a| a.len());
    if arrays.iter().any(|a| a.len() != n) {
        return invalid_arg("arrays have different lengths");
    }
    (0..n)
        .map(|i| zip_symbol(&arrays.iter().map(|a| a[i]).collect::<Vec<_>>()))
        .collect()
}

#[derive(Clone, Debug, Default)]
struct ZipEntry {
    x: u8,
    y: u8,
    z1: u64,
    z2: u64,
    out: OutputBlock,
}

/// Table for merging windows of two encodings. Entry `[X][Y][z]` describes the
/// longest combined step from windows `X` and `Y` when one side still has `z`
/// zeros pending (`z ≤ M`, a larger count behaves like `M`).
struct ZipTable {
    lg_m: usize,
    m: u64,
    entries: Vec<ZipEntry>,
}

/// Valid token-boundary prefixes of a window with their decoded values.
fn window_prefixes(w: u64, lg_m: usize) -> Vec<(usize, Vec<u64>)> {
    let mut out = vec![(0, Vec::new())];
    let mut pos = 0;
    let mut vals = Vec::new();
    let mut prev_zero = false;
    while let Some((t, used)) = token_in_word(w, pos, lg_m) {
        match t {
            Token::Literal(v) => {
                vals.push(v);
                prev_zero = false;
            }
            Token::Zeros(z) => {
                if prev_zero {
                    break;
                }
                vals.resize(vals.len() + z as usize, 0);
                prev_zero = true;
            }
        }
        pos += used;
        out.push((pos, vals.clone()));
    }
    out
}

impl ZipTable {
    fn get(lg_m: usize) -> Arc<ZipTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ZipTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("zip table cache poisoned");
        guard
            .entry(lg_m)
            .or_insert_with(|| Arc::new(ZipTable::build(lg_m)))
            .clone()
    }

    fn slots(&self) -> usize {
        2 * self.m as usize + 1
    }

    fn build(lg_m: usize) -> ZipTable {
        let m = 1u64 << lg_m;
        let prefixes: Vec<Vec<(usize, Vec<u64>)>> = (0..m).map(|w| window_prefixes(w, lg_m)).collect();
        let slots = 2 * m as usize + 1;
        let mut entries = Vec::with_capacity((m * m) as usize * slots);
        for xw in 0..m as usize {
            for yw in 0..m as usize {
                for slot in 0..slots {
                    let (z1, z2) = match slot {
                        0 => (0, 0),
                        s if s <= m as usize => (s as u64, 0),
                        s => (0, s as u64 - m),
                    };
                    entries.push(Self::entry(&prefixes[xw], &prefixes[yw], z1, z2));
                }
            }
        }
        ZipTable { lg_m, m, entries }
    }

    fn entry(px: &[(usize, Vec<u64>)], py: &[(usize, Vec<u64>)], z1: u64, z2: u64) -> ZipEntry {
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for (ix, (x, ax)) in px.iter().enumerate() {
            for (iy, (y, ay)) in py.iter().enumerate() {
                let lx = z1 as usize + ax.len();
                let ly = z2 as usize + ay.len();
                let r = lx.min(ly);
                let tail_zero = |z: u64, a: &[u64]| a.iter().skip(r.saturating_sub(z as usize)).all(|&v| v == 0);
                if !tail_zero(z1, ax) || !tail_zero(z2, ay) {
                    continue;
                }
                let key = (x + y, *x);
                if best.is_none_or(|(bx, by, _, _)| key > (bx + by, bx)) {
                    best = Some((*x, *y, ix, iy));
                }
            }
        }
        let (x, y, ix, iy) = best.expect("the empty step is always valid");
        let col = |z: u64, a: &[u64], i: usize| if (i as u64) < z { 0 } else { a[i - z as usize] };
        let (ax, ay) = (&px[ix].1, &py[iy].1);
        let lx = z1 as usize + ax.len();
        let ly = z2 as usize + ay.len();
        let r = lx.min(ly);
        let out: Vec<u64> = (0..r)
            .map(|i| zip_symbol(&[col(z1, ax, i), col(z2, ay, i)]).expect("window values are small"))
            .collect();
        ZipEntry {
            x: x as u8,
            y: y as u8,
            z1: (lx - r) as u64,
            z2: (ly - r) as u64,
            out: OutputBlock::from_dense(&out),
        }
    }
}

/// Cursor over one encoding with a count of pending zeros.
struct ZipCursor<'a> {
    bits: &'a BitStream,
    pos: usize,
    zeros: u64,
}

impl ZipCursor<'_> {
    fn exhausted(&self) -> bool {
        self.zeros == 0 && self.pos >= self.bits.len()
    }

    fn next_is_zero_run(&self) -> Result<Option<u64>> {
        if self.zeros > 0 || self.pos >= self.bits.len() {
            return Ok(None);
        }
        match read_token(self.bits, self.pos)? {
            (Token::Zeros(x), _) => Ok(Some(x)),
            _ => Ok(None),
        }
    }

    fn take_zero_run(&mut self) -> Result<()> {
        let (t, used) = read_token(self.bits, self.pos)?;
        self.pos += used;
        self.zeros = t.value();
        Ok(())
    }

    fn pull_one(&mut self) -> Result<u64> {
        if self.zeros > 0 {
            self.zeros -= 1;
            return Ok(0);
        }
        if self.pos >= self.bits.len() {
            return decode_err(self.pos, "encoding ended early");
        }
        let (t, used) = read_token(self.bits, self.pos)?;
        self.pos += used;
        Ok(match t {
            Token::Literal(v) => v,
            Token::Zeros(x) => {
                self.zeros = x - 1;
                0
            }
        })
    }
}

/// `senc(zip(A_1, A_2))` from `senc(A_1)` and `senc(A_2)`.
pub fn zip_pair(e1: &SparseEncoding, e2: &SparseEncoding, params: &Params) -> Result<SparseEncoding> {
    zip_pair_with_window(e1, e2, default_window_bits(params).min(5))
}

/// [`zip_pair`] with an explicit window width `lg_m ∈ [3..6]`.
pub fn zip_pair_with_window(e1: &SparseEncoding, e2: &SparseEncoding, lg_m: usize) -> Result<SparseEncoding> {
    if e1.len() != e2.len() {
        return invalid_arg(format!("lengths {} and {} differ", e1.len(), e2.len()));
    }
    if !(3..=6).contains(&lg_m) {
        return invalid_arg(format!("zip window width {lg_m} outside [3..6]"));
    }
    let table = ZipTable::get(lg_m);
    let m = table.m;
    let mut c1 = ZipCursor {
        bits: e1.bits(),
        pos: 0,
        zeros: 0,
    };
    let mut c2 = ZipCursor {
        bits: e2.bits(),
        pos: 0,
        zeros: 0,
    };
    let mut w = SencWriter::new();
    loop {
        let common = c1.zeros.min(c2.zeros);
        if common > 0 {
            w.push_zeros(common);
            c1.zeros -= common;
            c2.zeros -= common;
        }
        if c1.exhausted() && c2.exhausted() {
            break;
        }
        let xw = window_at(c1.bits, c1.pos, table.lg_m);
        let yw = window_at(c2.bits, c2.pos, table.lg_m);
        let (side, pending) = if c1.zeros > 0 {
            (1, c1.zeros)
        } else if c2.zeros > 0 {
            (2, c2.zeros)
        } else {
            (0, 0)
        };
        let slot = match side {
            0 => 0,
            1 => pending.min(m) as usize,
            _ => (m + pending.min(m)) as usize,
        };
        let excess = pending.saturating_sub(m);
        let idx = (((xw as usize) << table.lg_m) | yw as usize) * table.slots() + slot;
        let e = &table.entries[idx];
        if e.x > 0 || e.y > 0 {
            e.out.write(&mut w);
            c1.pos += e.x as usize;
            c2.pos += e.y as usize;
            c1.zeros = e.z1 + if side == 1 { excess } else { 0 };
            c2.zeros = e.z2 + if side == 2 { excess } else { 0 };
            continue;
        }
        // A token longer than the window on at least one side.
        if c1.next_is_zero_run()?.is_some() {
            c1.take_zero_run()?;
        } else if c2.next_is_zero_run()?.is_some() {
            c2.take_zero_run()?;
        } else {
            let a = c1.pull_one()?;
            let b = c2.pull_one()?;
            w.push(zip_symbol(&[a, b])?);
        }
    }
    if w.len() != e1.len() as u64 {
        return decode_err(e1.bit_len(), "encodings do not match their declared lengths");
    }
    Ok(w.finish())
}

/// Maps the nested pair symbol `zip(zip(A_1..A_j), A_{j+1})` to `zip(A_1..A_{j+1})`.
fn flatten_transducer(j: usize) -> FnTransducer<impl Fn(usize, &[u64]) -> (usize, u64)> {
    FnTransducer::new(1, 0, 1, move |_, x: &[u64]| {
        let flat = (|| -> Result<u64> {
            if x[0] == 0 {
                return Ok(0);
            }
            let pair = unzip_symbol(x[0], 2)?;
            let mut vals = unzip_symbol(pair[0], j)?;
            vals.push(pair[1]);
            zip_symbol(&vals)
        })();
        (0, flat.unwrap_or(0))
    })
}

/// Most streams supported by [`zip_multi`] and [`run_multi`].
pub const MAX_STREAMS: usize = 6;

/// `senc(zip(A_1, …, A_t))` for `1 ≤ t ≤ 6`, by zipping one stream at a time.
pub fn zip_multi(encodings: &[&SparseEncoding], params: &Params) -> Result<SparseEncoding> {
    let t = encodings.len();
    if t == 0 || t > MAX_STREAMS {
        return invalid_arg(format!("zip needs between 1 and {MAX_STREAMS} streams, got {t}"));
    }
    if encodings.iter().any(|e| e.len() != encodings[0].len()) {
        return invalid_arg("encodings have different lengths");
    }
    if t == 1 {
        if encodings[0].tokens().any(|tok| matches!(tok, Ok(Token::Literal(v)) if zip_symbol(&[v]).is_err())) {
            return invalid_arg("value too large to zip");
        }
        let relabel = FnTransducer::new(1, 0, 1, |_, x: &[u64]| (0, zip_symbol(&[x[0]]).unwrap_or(0)));
        return AccelSingle::new(relabel, params)?.run(encodings[0]);
    }
    // Pair symbols of two plain streams are already flat.
    let mut acc = zip_pair(encodings[0], encodings[1], params)?;
    for (j, e) in encodings.iter().enumerate().skip(2) {
        let nested = zip_pair(&acc, e, params)?;
        acc = AccelSingle::new(flatten_transducer(j), params)?.run(&nested)?;
    }
    Ok(acc)
}

/// Runs a `t`-stream transducer on encodings by zipping them and feeding the
/// zipped stream to the equivalent single-stream transducer.
pub fn run_multi<T: Transducer + ?Sized>(
    spec: &T,
    encodings: &[&SparseEncoding],
    params: &Params,
) -> Result<SparseEncoding> {
    let t = spec.arity();
    if encodings.len() != t {
        return invalid_arg(format!("transducer has arity {t}, got {} inputs", encodings.len()));
    }
    let zipped = zip_multi(encodings, params)?;
    let single = FnTransducer::new(spec.states(), spec.initial(), 1, |s, x: &[u64]| {
        match unzip_symbol(x[0], t) {
            Ok(col) => spec.step(s, &col),
            Err(_) => (s, 0),
        }
    });
    AccelSingle::new(single, params)?.run(&zipped)
}

/// Acceleration tables shared under caller-chosen names.
#[derive(Default)]
pub struct AccelCache {
    tables: Mutex<HashMap<String, Arc<AccelSingle<Box<dyn Transducer + Send + Sync>>>>>,
}

impl AccelCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the tables registered under `id`, building them on first use.
    pub fn get_or_build(
        &self,
        id: &str,
        build: impl FnOnce() -> Result<AccelSingle<Box<dyn Transducer + Send + Sync>>>,
    ) -> Result<Arc<AccelSingle<Box<dyn Transducer + Send + Sync>>>> {
        let mut guard = self.tables.lock().expect("transducer cache poisoned");
        if let Some(t) = guard.get(id) {
            return Ok(t.clone());
        }
        let t = Arc::new(build()?);
        guard.insert(id.to_string(), t.clone());
        Ok(t)
    }
}
