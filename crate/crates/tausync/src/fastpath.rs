//! Synchronizing sets produced directly in sparse encoding.
//!
//! Preprocessing stores the level arrays `𝓑_j` (with `𝓑_j[i] > 0` iff
//! `i ∈ B_j`) and two indexes over periodic fragments. A query shifts the
//! relevant sparse masks with a three-stream transducer and combines them
//! with a two-state transducer over six streams, so that only the encodings
//! are ever touched.

use crate::error::{invalid_arg, Result};
use crate::ranksupport::{build_rank, build_select, piece_bits};
use crate::recompress::BoundaryChain;
use crate::runs::{enumerate_runs, Run};
use crate::sparsecodec::{senc_from_list, senc_from_positions, senc_reverse, SencWriter, SparseEncoding, Token};
use crate::syncset::{check_tau, SupportedSparse, SyncPrep, SyncSetHandle};
use crate::text::PackedText;
use crate::transducer::{decrement, run_multi, threshold, AccelSingle, FnTransducer};
use crate::Params;
use num_bigint::BigUint;
use std::collections::HashMap;
use std::sync::OnceLock;

/// The constant `c` bounding `ℓ ≤ cτ` in run-marker queries.
pub const MARKER_C: usize = 2;

/// Is every entry of the encoded sequence zero?
pub fn is_all_zero(e: &SparseEncoding) -> bool {
    e.tokens().all(|t| matches!(t, Ok(Token::Zeros(_))))
}

/// `senc(𝓑_0)` from `senc(𝓑′)` and `senc(𝓑_K)`: `x` where `y = 0`, else `y + K`.
pub fn merge_levels(capped: &SparseEncoding, high: &SparseEncoding, big_k: u64, params: &Params) -> Result<SparseEncoding> {
    let spec = FnTransducer::new(1, 0, 2, move |_, c: &[u64]| (0, if c[1] == 0 { c[0] } else { c[1] + big_k }));
    run_multi(&spec, &[capped, high], params)
}

/// `senc(𝓑_K)` from the explicit levels `B_K, …, B_q`.
pub fn high_levels(chain: &BoundaryChain, big_k: usize) -> Result<SparseEncoding> {
    let mut value: HashMap<usize, u64> = HashMap::new();
    for k in big_k..chain.levels().len() {
        for &i in chain.level(k) {
            value.insert(i, (k - big_k + 1) as u64);
        }
    }
    let mut pairs: Vec<(usize, u64)> = value.into_iter().collect();
    pairs.sort_unstable();
    senc_from_list(chain.n(), &pairs)
}

/// `senc(𝓑_0)` for a prepared text.
pub fn build_level0(prep: &SyncPrep<'_>) -> Result<SparseEncoding> {
    let recomp = prep.recompression();
    let n = prep.text().n();
    let (capped, big_k) = match recomp.contexts() {
        Some(cs) => (cs.capped_levels(), cs.levels()),
        None => (SparseEncoding::zeros(n), 0),
    };
    let high = high_levels(recomp.chain(), big_k)?;
    merge_levels(&capped, &high, big_k as u64, prep.params())
}

/// `senc(𝓑_1), …, senc(𝓑_q)` by repeated decrement; the last one is all zero.
pub fn derive_levels(level0: &SparseEncoding, params: &Params) -> Result<Vec<SparseEncoding>> {
    let dec = AccelSingle::new(decrement(), params)?;
    let mut out = Vec::new();
    let mut cur = level0.clone();
    while !is_all_zero(&cur) {
        cur = dec.run(&cur)?;
        out.push(cur.clone());
    }
    Ok(out)
}

/// `senc(V[ℓ..n)·0^ℓ)`, computed by a three-stream transducer over
/// `V·1^ℓ`, `1^ℓ·0^n` and `0^n·1^ℓ` whose first `2ℓ` output bits are dropped.
/// `ℓ = 0` returns `V` unchanged.
pub fn shift_truncate(v: &SparseEncoding, ell: usize, params: &Params) -> Result<SparseEncoding> {
    let n = v.len();
    if ell == 0 {
        return Ok(v.clone());
    }
    if ell >= n {
        return invalid_arg(format!("shift {ell} must be below n = {n}"));
    }
    let mut v1 = SencWriter::new();
    v1.push_encoding(v);
    let mut v2 = SencWriter::new();
    let mut v3 = SencWriter::new();
    for _ in 0..ell {
        v1.push(1);
        v2.push(1);
    }
    v2.push_zeros(n as u64);
    v3.push_zeros(n as u64);
    for _ in 0..ell {
        v3.push(1);
    }
    let spec = FnTransducer::new(1, 0, 3, |_, c: &[u64]| {
        (0, if c[1] == 1 { 1 } else if c[2] == 1 { 0 } else { c[0] })
    });
    let out = run_multi(&spec, &[&v1.finish(), &v2.finish(), &v3.finish()], params)?;
    let bits = out.bits().slice(2 * ell, out.bit_len() - 2 * ell);
    Ok(SparseEncoding::from_parts_unchecked(bits, n))
}

/// Sparse masks of the start and the (inclusive) end positions of a run family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunMarkers {
    pub starts: SparseEncoding,
    pub ends: SparseEncoding,
}

impl RunMarkers {
    /// Markers of an explicit run list.
    pub fn from_runs(n: usize, runs: &[Run]) -> Result<Self> {
        let starts: Vec<usize> = runs.iter().map(|r| r.start).collect();
        let mut ends: Vec<usize> = runs.iter().map(|r| r.end - 1).collect();
        ends.sort_unstable();
        Ok(RunMarkers {
            starts: senc_from_positions(n, &starts)?,
            ends: senc_from_positions(n, &ends)?,
        })
    }
}

/// `⌊1.1^j⌋` and `⌊0.4·1.1^j⌋`, computed exactly.
pub fn geometric_bounds(j: usize) -> (usize, usize) {
    let num = num_traits::pow(BigUint::from(11u32), j);
    let den = num_traits::pow(BigUint::from(10u32), j);
    let len = (&num / &den).try_into().unwrap_or(usize::MAX);
    let per = (num * 4u32 / (den * 10u32)).try_into().unwrap_or(usize::MAX);
    (len, per)
}

/// The runs `R_j = RUNS_{⌊1.1^j⌋,⌊0.4·1.1^j⌋}` with their period and
/// length arrays, indexed by start and by inclusive end.
#[derive(Clone, Debug)]
struct RangeRuns {
    runs: Vec<Run>,
    start_per: SparseEncoding,
    start_len: SparseEncoding,
    end_per: SparseEncoding,
    end_len: SparseEncoding,
}

impl RangeRuns {
    fn build(t: &PackedText, j: usize) -> Result<Self> {
        let n = t.n();
        let (len, per) = geometric_bounds(j);
        let runs = enumerate_runs(t, len, per)?;
        let by_start = |f: fn(&Run) -> u64| -> Result<SparseEncoding> {
            let pairs: Vec<(usize, u64)> = runs.iter().map(|r| (r.start, f(r))).collect();
            senc_from_list(n, &pairs)
        };
        let by_end = |f: fn(&Run) -> u64| -> Result<SparseEncoding> {
            let mut pairs: Vec<(usize, u64)> = runs.iter().map(|r| (r.end - 1, f(r))).collect();
            pairs.sort_unstable();
            senc_from_list(n, &pairs)
        };
        Ok(RangeRuns {
            start_per: by_start(|r| r.period as u64)?,
            start_len: by_start(|r| r.len() as u64)?,
            end_per: by_end(|r| r.period as u64)?,
            end_len: by_end(|r| r.len() as u64)?,
            runs,
        })
    }
}

/// Relevant-run descriptors `(period, truncated length)` starting at one position.
type Descriptor = Vec<(u32, u32)>;

/// Index for periods below `P`: per-position descriptor ids, filtered by
/// minimum length `3·2^j` for `j ∈ [0..⌈lg P⌉)`.
#[derive(Clone, Debug)]
struct SmallRuns {
    /// `dict[id − 1]` is the descriptor with identifier `id`.
    dict: Vec<Descriptor>,
    levels: Vec<SparseEncoding>,
}

impl SmallRuns {
    fn build(t: &PackedText, p: usize, params: &Params) -> Result<Self> {
        let n = t.n();
        let cap = 4 * MARKER_C * p;
        let mut ids: HashMap<Descriptor, u64> = HashMap::new();
        let mut dict: Vec<Descriptor> = Vec::new();
        let mut intern = |d: Descriptor, dict: &mut Vec<Descriptor>| -> u64 {
            if d.is_empty() {
                return 0;
            }
            *ids.entry(d.clone()).or_insert_with(|| {
                dict.push(d);
                dict.len() as u64
            })
        };

        // Blocks of P positions; the descriptors of a block depend on one
        // symbol of left context and `cap` symbols past the block.
        let width = p + 1 + cap;
        let bps = t.bps() as usize;
        let mut memo: HashMap<u64, Vec<u64>> = HashMap::new();
        let mut level0 = SencWriter::new();
        for lo in (0..n).step_by(p) {
            let hi = (lo + p).min(n);
            let window: Vec<u32> = (0..width).map(|d| t.get(lo as isize - 1 + d as isize)).collect();
            let text_end = n + 1 - lo;
            let compute = |dict: &mut Vec<Descriptor>, intern: &mut dyn FnMut(Descriptor, &mut Vec<Descriptor>) -> u64| {
                (0..hi - lo)
                    .map(|i| intern(descriptor(&window, i + 1, text_end, p, cap), dict))
                    .collect::<Vec<u64>>()
            };
            let block = if width * bps <= 64 && hi - lo == p && text_end >= width {
                let code = t.extract(lo as isize - 1, width)?;
                match memo.get(&code) {
                    Some(v) => v.clone(),
                    None => {
                        let v = compute(&mut dict, &mut intern);
                        memo.insert(code, v.clone());
                        v
                    }
                }
            } else {
                compute(&mut dict, &mut intern)
            };
            for v in block {
                level0.push(v);
            }
        }
        let mut levels = vec![level0.finish()];

        // R_j drops the descriptors' runs shorter than 3·2^j.
        let lg_p = p.next_power_of_two().trailing_zeros() as usize;
        for j in 1..lg_p {
            let min_len = 3u32 << j;
            let known = dict.len();
            let mut map = vec![0u64; known + 1];
            for id in 1..=known {
                let kept: Descriptor = dict[id - 1].iter().copied().filter(|&(_, l)| l >= min_len).collect();
                map[id] = intern(kept, &mut dict);
            }
            let spec = FnTransducer::new(1, 0, 1, move |_, x: &[u64]| (0, map.get(x[0] as usize).copied().unwrap_or(0)));
            let next = AccelSingle::new(spec, params)?.run(levels.last().expect("level 0"))?;
            levels.push(next);
        }
        Ok(SmallRuns { dict, levels })
    }

    /// Start mask of `RUNS_{ℓ,p}` for `1 ≤ p < P`, `ℓ ≤ 4cP`.
    fn starts(&self, ell: usize, p: usize, params: &Params) -> Result<SparseEncoding> {
        let j = (usize::BITS - 1 - p.leading_zeros()) as usize;
        let dict = &self.dict;
        let spec = FnTransducer::new(1, 0, 1, move |_, x: &[u64]| {
            let hit = x[0] > 0
                && dict
                    .get(x[0] as usize - 1)
                    .is_some_and(|d| d.iter().any(|&(per, len)| per as usize <= p && len as usize >= ell));
            (0, hit as u64)
        });
        AccelSingle::new(spec, params)?.run(&self.levels[j])
    }
}

/// Relevant runs starting at `window[at]`: period `< P`, length at least
/// three periods, lengths truncated to `cap`. `text_end` is the window
/// index of `T[n]`.
fn descriptor(window: &[u32], at: usize, text_end: usize, p: usize, cap: usize) -> Descriptor {
    let limit = text_end.min(window.len()) - at;
    let lens: Vec<usize> = (1..p)
        .map(|q| {
            let mut l = q;
            while l < cap && l < limit && window[at + l] == window[at + l - q] {
                l += 1;
            }
            l.min(limit)
        })
        .collect();
    let mut d = Descriptor::new();
    for q in 1..p {
        let l = lens[q - 1];
        if l < 3 * q || window[at - 1] == window[at - 1 + q] && at - 1 + q < text_end {
            continue;
        }
        if (1..q).any(|r| q % r == 0 && lens[r - 1] >= l) {
            continue;
        }
        d.push((q as u32, l as u32));
    }
    d
}

/// Per-text preprocessing for sparse synchronizing-set queries.
pub struct FastPrep<'t> {
    sync: SyncPrep<'t>,
    levels: Vec<SparseEncoding>,
    small_p: usize,
    small: Option<(SmallRuns, SmallRuns)>,
    geometric: Vec<usize>,
    ranges: Vec<OnceLock<RangeRuns>>,
}

impl<'t> FastPrep<'t> {
    /// Preprocessing with `P = ⌊log_σ n / (16c + 4)⌋`.
    pub fn new(text: &'t PackedText, params: &Params) -> Result<Self> {
        let p = (text.log_sigma_n() / (16 * MARKER_C + 4) as f64).floor() as usize;
        Self::with_small_period(text, params, p)
    }

    /// Preprocessing with an explicit boundary `P` between the two run indexes.
    pub fn with_small_period(text: &'t PackedText, params: &Params, p: usize) -> Result<Self> {
        let sync = SyncPrep::new(text, params)?;
        let level0 = build_level0(&sync)?;
        let mut levels = vec![level0];
        levels.extend(derive_levels(&levels[0], params)?);
        let n = text.n();
        let small = if p >= 2 {
            let rev: Vec<u32> = text.symbols().iter().rev().copied().collect();
            let rev_text = PackedText::new(&rev, text.sigma_in())?;
            Some((SmallRuns::build(text, p, params)?, SmallRuns::build(&rev_text, p, params)?))
        } else {
            None
        };
        let mut geometric = Vec::new();
        loop {
            let (len, _) = geometric_bounds(geometric.len());
            if len > n.max(1) {
                break;
            }
            geometric.push(len);
        }
        let ranges = (0..geometric.len()).map(|_| OnceLock::new()).collect();
        Ok(FastPrep {
            sync,
            levels,
            small_p: p,
            small,
            geometric,
            ranges,
        })
    }

    pub fn sync_prep(&self) -> &SyncPrep<'t> {
        &self.sync
    }

    pub fn n(&self) -> usize {
        self.sync.text().n()
    }

    /// `senc(𝓑_j)`; all zero for `j ≥ q`.
    pub fn level(&self, j: usize) -> SparseEncoding {
        self.levels
            .get(j)
            .cloned()
            .unwrap_or_else(|| SparseEncoding::zeros(self.n()))
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn small_period(&self) -> usize {
        self.small_p
    }

    fn params(&self) -> &Params {
        self.sync.params()
    }

    fn range(&self, j: usize) -> Result<&RangeRuns> {
        if let Some(r) = self.ranges[j].get() {
            return Ok(r);
        }
        let built = RangeRuns::build(self.sync.text(), j)?;
        Ok(self.ranges[j].get_or_init(|| built))
    }

    /// Largest `j` with `⌊1.1^j⌋ ≤ τ`, scanning from the top.
    fn range_index(&self, tau: usize) -> usize {
        (0..self.geometric.len())
            .rev()
            .find(|&j| self.geometric[j] <= tau)
            .unwrap_or(0)
    }

    fn check_marker_query(&self, tau: usize, ell: usize) -> Result<()> {
        let n = self.n();
        if tau == 0 || tau > n || ell < tau || ell > MARKER_C * tau {
            return invalid_arg(format!("marker query tau = {tau}, ell = {ell} outside the admissible range"));
        }
        Ok(())
    }

    /// Markers of `RUNS_{ℓ,⌊τ/3⌋}` for `ℓ ∈ [τ..2τ]`.
    pub fn run_markers(&self, tau: usize, ell: usize) -> Result<RunMarkers> {
        self.check_marker_query(tau, ell)?;
        if tau < self.small_p {
            return self.run_markers_small(tau, ell);
        }
        let n = self.n() as f64;
        if (tau as f64) <= n.sqrt() / n.log2().max(1.0) {
            self.run_markers_transduced(tau, ell)
        } else {
            self.run_markers_listed(tau, ell)
        }
    }

    /// Large-τ markers by filtering the run list of the matching range.
    pub fn run_markers_listed(&self, tau: usize, ell: usize) -> Result<RunMarkers> {
        self.check_marker_query(tau, ell)?;
        let r = self.range(self.range_index(tau))?;
        let keep: Vec<Run> = r
            .runs
            .iter()
            .copied()
            .filter(|r| r.len() >= ell && r.period <= tau / 3)
            .collect();
        RunMarkers::from_runs(self.n(), &keep)
    }

    /// Large-τ markers by transducers over the period and length arrays.
    pub fn run_markers_transduced(&self, tau: usize, ell: usize) -> Result<RunMarkers> {
        self.check_marker_query(tau, ell)?;
        let params = *self.params();
        let r = self.range(self.range_index(tau))?;
        let p = (tau / 3) as u64;
        let per_ok = AccelSingle::new(
            FnTransducer::new(1, 0, 1, move |_, x: &[u64]| (0, (x[0] >= 1 && x[0] <= p) as u64)),
            &params,
        )?;
        let long_enough = AccelSingle::new(threshold(ell as u64), &params)?;
        let both = FnTransducer::new(1, 0, 2, |_, c: &[u64]| (0, c[0] & c[1]));
        let mark = |per: &SparseEncoding, len: &SparseEncoding| -> Result<SparseEncoding> {
            run_multi(&both, &[&per_ok.run(per)?, &long_enough.run(len)?], &params)
        };
        Ok(RunMarkers {
            starts: mark(&r.start_per, &r.start_len)?,
            ends: mark(&r.end_per, &r.end_len)?,
        })
    }

    /// Small-τ markers from the descriptor index; ends come from the reversed text.
    pub fn run_markers_small(&self, tau: usize, ell: usize) -> Result<RunMarkers> {
        self.check_marker_query(tau, ell)?;
        let n = self.n();
        let p = tau / 3;
        let (fwd, rev) = match &self.small {
            Some(pair) if tau < self.small_p => pair,
            _ => return invalid_arg(format!("no small-period index for tau = {tau}")),
        };
        if p == 0 {
            return Ok(RunMarkers {
                starts: SparseEncoding::zeros(n),
                ends: SparseEncoding::zeros(n),
            });
        }
        let params = self.params();
        Ok(RunMarkers {
            starts: fwd.starts(ell, p, params)?,
            ends: senc_reverse(&rev.starts(ell, p, params)?)?,
        })
    }

    /// The synchronizing set of [`SyncPrep::explicit`] as a sparse mask.
    /// Uses the transducer pipeline for `τ ≤ √n / lg n`, the list otherwise.
    pub fn sync_sparse(&self, tau: usize) -> Result<SparseEncoding> {
        let n = self.n();
        check_tau(n, tau)?;
        let nf = n as f64;
        if (tau as f64) > nf.sqrt() / nf.log2().max(1.0) {
            self.sync_sparse_listed(tau)
        } else {
            self.sync_sparse_transduced(tau)
        }
    }

    pub fn sync_sparse_listed(&self, tau: usize) -> Result<SparseEncoding> {
        senc_from_positions(self.n(), &self.sync.explicit(tau)?)
    }

    /// Six streams: `Ŝ_τ`, `Ê_τ`, `S_{2τ}`, `Ê_{2τ}`, `𝓑̂_{k(τ)}` and a mask
    /// of the positions past `n − 2τ`.
    pub fn sync_sparse_transduced(&self, tau: usize) -> Result<SparseEncoding> {
        let n = self.n();
        check_tau(n, tau)?;
        let params = *self.params();
        let k = self.sync.k_of_tau(tau);
        let b_hat = shift_truncate(&self.level(k), tau, &params)?;
        let short = self.run_markers(tau, tau)?;
        let long = self.run_markers(tau, 2 * tau)?;
        let s_hat = shift_truncate(&short.starts, 1, &params)?;
        let e_hat = shift_truncate(&short.ends, 2 * tau - 2, &params)?;
        let e2_hat = shift_truncate(&long.ends, 2 * tau - 2, &params)?;
        let mut tail = SencWriter::new();
        tail.push_zeros((n - 2 * tau + 1) as u64);
        for _ in 0..2 * tau - 1 {
            tail.push(1);
        }
        let tail = tail.finish();
        let spec = FnTransducer::new(2, 0, 6, |state, c: &[u64]| {
            let (s, e, s2, e2, b, past) = (c[0], c[1], c[2], c[3], c[4], c[5]);
            if past != 0 {
                (state, 0)
            } else if s2 != 0 {
                (1, 0)
            } else if e2 != 0 {
                (0, 1)
            } else if s != 0 || e != 0 {
                (state, 1)
            } else if state == 1 {
                (1, 0)
            } else {
                (0, b.min(1))
            }
        });
        run_multi(&spec, &[&s_hat, &e_hat, &long.starts, &e2_hat, &b_hat, &tail], &params)
    }

    /// The sparse mask with select and rank support.
    pub fn sync_with_support(&self, tau: usize) -> Result<SyncSetHandle> {
        support_sparse(self.sync_sparse(tau)?, tau, self.params())
    }
}

/// Wraps a sparse synchronizing-set mask with select and rank structures.
/// The rank index gets `⌈|senc|/ℓ⌉ + ⌈n·lg τ/(τ·lg n)⌉` words of space.
pub fn support_sparse(encoding: SparseEncoding, tau: usize, params: &Params) -> Result<SyncSetHandle> {
    if tau == 0 {
        return invalid_arg("tau must be positive");
    }
    let n = encoding.len().max(2) as f64;
    let per_tau = (n * (tau as f64).log2().max(1.0) / (tau as f64 * n.log2())).ceil() as usize;
    let m = encoding.bit_len().div_ceil(piece_bits(params)) + per_tau.max(1);
    let select = build_select(&encoding, params)?;
    let rank = build_rank(&encoding, params, m)?;
    Ok(SyncSetHandle::Sparse {
        tau,
        support: Box::new(SupportedSparse { encoding, select, rank }),
    })
}

/// One-shot sparse construction.
pub fn sync_sparse(t: &PackedText, tau: usize, params: &Params) -> Result<SparseEncoding> {
    check_tau(t.n(), tau)?;
    FastPrep::new(t, params)?.sync_sparse(tau)
}
