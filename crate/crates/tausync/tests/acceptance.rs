//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! of criteria 1–7 fails. Criterion 8 is a size and timing trend that is
//! reported but never fails the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::time::Instant;
use tausync::fastpath::FastPrep;
use tausync::oracle::corpus::{adversarial_family, periodic_text, random_text};
use tausync::oracle::{brute_rank_select, verify_chain, SyncVerifier};
use tausync::ranksupport::VebIndex;
use tausync::recompress::{build_chain_linear, preprocess_explicit, ContextSets};
use tausync::sparsecodec::{senc_encode, SencWriter};
use tausync::syncset::{SyncPrep, SyncSetHandle};
use tausync::transducer::{run_multi, run_naive, AccelSingle, FnTransducer};
use tausync::{PackedText, Params, SparseEncoding};

type Outcome = Result<String, String>;

struct Sample {
    label: String,
    s: Vec<u32>,
    sigma: u32,
}

/// At least 1000 texts over σ ∈ {2, 4, 16, 256}, n ∈ [1..512].
fn corpus() -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let sigmas = [2u32, 4, 16, 256];
    let mut out = Vec::new();
    for i in 0..1200 {
        let sigma = sigmas[i % 4];
        let kind = (i / 4) % 3;
        let n = if i < 40 { i / 4 + 1 } else { rng.gen_range(1..=512) };
        let (label, s) = match kind {
            0 => ("random", random_text(&mut rng, n, sigma)),
            1 => ("periodic", periodic_text(&mut rng, n, sigma)),
            _ => {
                let tau = rng.gen_range(1..=16usize);
                let k = (n / (3 * tau)).max(1);
                let offsets: Vec<usize> = (0..k).map(|_| rng.gen_range(0..tau)).collect();
                let top = sigma - 1;
                let s = adversarial_family(tau, &offsets).into_iter().map(|c| c * top).collect();
                ("adversarial", s)
            }
        };
        out.push(Sample {
            label: format!("#{i} {label} n={} sigma={sigma}", s.len()),
            s,
            sigma,
        });
    }
    out
}

fn positions_of(values: &[u64]) -> Vec<usize> {
    values.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i).collect()
}

fn criterion_1(corpus: &[Sample]) -> Outcome {
    let mut checks = 0usize;
    for c in corpus {
        let t = PackedText::new(&c.s, c.sigma).map_err(|e| e.to_string())?;
        let prep = SyncPrep::new(&t, &Params::default()).map_err(|e| e.to_string())?;
        let mut verifier = SyncVerifier::new(&c.s);
        for tau in 1..=c.s.len() / 2 {
            let set = prep.explicit(tau).map_err(|e| e.to_string())?;
            let r = verifier.verify(tau, &set);
            if let Some(v) = r.violation {
                return Err(format!("{} tau={tau}: {v:?}", c.label));
            }
            if let Some(v) = verifier.verify_bounds(tau, &set).violation {
                return Err(format!("{} tau={tau}: {v:?}", c.label));
            }
            // Independent restatement of the size bound |Sync| < 70n/τ.
            if set.len() * tau >= 70 * c.s.len() {
                return Err(format!("{} tau={tau}: size {}", c.label, set.len()));
            }
            checks += 1;
        }
    }
    Ok(format!("{} texts, {checks} (text, tau) pairs", corpus.len()))
}

fn criterion_2(corpus: &[Sample]) -> Outcome {
    let mut checks = 0usize;
    for c in corpus {
        let n = c.s.len();
        let t = PackedText::new(&c.s, c.sigma).map_err(|e| e.to_string())?;
        let fp = FastPrep::new(&t, &Params::default()).map_err(|e| e.to_string())?;
        for tau in 1..=n / 2 {
            let err = |e: tausync::Error| format!("{} tau={tau}: {e}", c.label);
            let explicit = fp.sync_prep().explicit(tau).map_err(err)?;
            let mask = fp.sync_prep().bitmask(tau).map_err(err)?;
            if mask.ones().collect::<Vec<_>>() != explicit || mask.len() != n {
                return Err(format!("{} tau={tau}: bitmask differs", c.label));
            }
            let transduced = fp.sync_sparse_transduced(tau).map_err(err)?;
            let decoded = transduced.decode().map_err(err)?;
            if positions_of(&decoded) != explicit || decoded.iter().any(|&v| v > 1) {
                return Err(format!("{} tau={tau}: sparse (transduced) differs", c.label));
            }
            if fp.sync_sparse(tau).map_err(err)? != transduced {
                return Err(format!("{} tau={tau}: sparse paths disagree", c.label));
            }
            let handle = fp.sync_with_support(tau).map_err(err)?;
            let oracle = brute_rank_select(&decoded);
            for j in 0..=n {
                if handle.rank(j).map_err(err)? != oracle.rank(j) {
                    return Err(format!("{} tau={tau}: rank({j})", c.label));
                }
            }
            for j in 1..=oracle.count() {
                if Some(handle.select(j).map_err(err)?) != oracle.select(j) {
                    return Err(format!("{} tau={tau}: select({j})", c.label));
                }
            }
            if handle.select(oracle.count() + 1).is_ok() {
                return Err(format!("{} tau={tau}: select past the end accepted", c.label));
            }
            checks += 1;
        }
    }
    Ok(format!("{checks} (text, tau) pairs agree in all three representations"))
}

fn criterion_3(corpus: &[Sample]) -> Outcome {
    let packed = Params::new(1 << 16, 0.25).map_err(|e| e.to_string())?;
    let mut levels = 0usize;
    let mut eligible = 0usize;
    for c in corpus {
        let t = PackedText::new(&c.s, c.sigma).map_err(|e| e.to_string())?;
        let linear = build_chain_linear(&t);
        if let Some(v) = verify_chain(&c.s, linear.levels()).violation {
            return Err(format!("{}: {v:?}", c.label));
        }
        levels += linear.levels().len();
        if ContextSets::build(&t, &packed).map_err(|e| e.to_string())?.is_some() {
            eligible += 1;
            let r = preprocess_explicit(&t, &packed).map_err(|e| e.to_string())?;
            if r.chain().levels() != linear.levels() {
                return Err(format!("{}: packed chain differs from the linear chain", c.label));
            }
        }
    }
    if eligible == 0 {
        return Err("no packed-eligible inputs in the corpus".into());
    }
    Ok(format!("{levels} levels verified, {eligible} packed-eligible texts match"))
}

fn criterion_4() -> Outcome {
    // Tokens of the worked example: (is_literal, x).
    let tokens = [(false, 3u64), (true, 3), (false, 2), (true, 5), (false, 7), (true, 9), (true, 1), (false, 2)];
    let mut values = Vec::new();
    let mut expected = String::new();
    for &(literal, x) in &tokens {
        if literal {
            values.push(x);
        } else {
            values.extend(std::iter::repeat_n(0, x as usize));
        }
        let binary = format!("{x:b}");
        expected.push(if literal { '1' } else { '0' });
        expected.push_str(&"0".repeat(binary.len() - 1));
        expected.push_str(&binary);
    }
    let enc = senc_encode(&values).map_err(|e| e.to_string())?;
    if expected.len() != 38 || enc.bits().to_string() != expected {
        return Err(format!("worked example encodes to {}, expected {expected}", enc.bits()));
    }
    let container = enc.to_container();
    let back = SparseEncoding::from_container(&container).map_err(|e| e.to_string())?;
    if back.decode().map_err(|e| e.to_string())? != values {
        return Err("worked example does not round-trip".into());
    }
    for n in 1..=1usize << 20 {
        let mut w = SencWriter::new();
        w.push_zeros(n as u64);
        let bits = w.finish().bit_len();
        let expect = 2 * n.ilog2() as usize + 2;
        if bits != expect || SparseEncoding::zeros(n).bit_len() != expect {
            return Err(format!("|senc(0^{n})| = {bits}, expected {expect}"));
        }
    }
    for e in 0..=20 {
        for n in [(1usize << e) - 1, 1 << e, (1 << e) + 1] {
            if n == 0 {
                continue;
            }
            let got = senc_encode(&vec![0; n]).map_err(|e| e.to_string())?.bit_len();
            if got != 2 * n.ilog2() as usize + 2 {
                return Err(format!("senc_encode(0^{n}) has {got} bits"));
            }
        }
    }
    Ok("38-bit worked example exact; |senc(0^n)| = 2⌊lg n⌋+2 for n ≤ 2^20".into())
}

/// A transducer given by an explicit transition table over `[0..σ)^t`.
#[derive(Clone)]
struct TableSpec {
    q: usize,
    t: usize,
    sigma: u64,
    table: Vec<(usize, u64)>,
}

impl TableSpec {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let q = rng.gen_range(1..=8);
        let t = rng.gen_range(1..=3);
        let sigma = rng.gen_range(2..=16u64);
        let cols = sigma.pow(t as u32) as usize;
        let zero_fixed = rng.gen_bool(0.5);
        let table = (0..q * cols)
            .map(|k| {
                let next = rng.gen_range(0..q);
                let out = if zero_fixed && k % cols == 0 { 0 } else { rng.gen_range(0..sigma) };
                (next, out)
            })
            .collect();
        TableSpec { q, t, sigma, table }
    }

    fn step(&self, state: usize, col: &[u64]) -> (usize, u64) {
        let mut idx = 0u64;
        for &c in col.iter().rev() {
            idx = idx * self.sigma + c.min(self.sigma - 1);
        }
        let cols = self.sigma.pow(self.t as u32) as usize;
        self.table[state * cols + idx as usize]
    }
}

fn random_input(rng: &mut ChaCha8Rng, sigma: u64, long_run: bool) -> Vec<u64> {
    let mut v = Vec::new();
    let pieces = rng.gen_range(0..40);
    for _ in 0..pieces {
        if rng.gen_bool(0.5) {
            let z = if rng.gen_bool(0.2) { rng.gen_range(50..5000) } else { rng.gen_range(1..20) };
            v.extend(std::iter::repeat_n(0, z));
        } else {
            for _ in 0..rng.gen_range(1..10) {
                v.push(rng.gen_range(0..sigma));
            }
        }
    }
    if long_run {
        let at = rng.gen_range(0..=v.len());
        v.splice(at..at, std::iter::repeat_n(0, 1_000_000));
    }
    v
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let mut runs = 0usize;
    for spec_id in 0..200 {
        let spec = TableSpec::random(&mut rng);
        let params = if spec_id % 3 == 0 {
            Params::new(1 << 10, 256.0).map_err(|e| e.to_string())?
        } else {
            Params::default()
        };
        let s2 = spec.clone();
        let f = FnTransducer::new(spec.q, 0, spec.t, move |s, c: &[u64]| s2.step(s, c));
        for input_id in 0..50 {
            let first = random_input(&mut rng, spec.sigma, input_id < 2);
            let len = first.len();
            let mut arrays = vec![first];
            for _ in 1..spec.t {
                let mut other = random_input(&mut rng, spec.sigma, false);
                other.resize(len, 0);
                if input_id % 2 == 1 {
                    other.rotate_right(rng.gen_range(0..len.max(1)));
                }
                arrays.push(other);
            }
            let slices: Vec<&[u64]> = arrays.iter().map(|a| a.as_slice()).collect();
            let naive = run_naive(&f, &slices).map_err(|e| e.to_string())?;
            let expect = senc_encode(&naive.output).map_err(|e| e.to_string())?;
            let encs: Vec<SparseEncoding> = arrays.iter().map(|a| senc_encode(a).unwrap()).collect();
            let got = if spec.t == 1 {
                AccelSingle::new(&f, &params).and_then(|a| a.run(&encs[0]))
            } else {
                let refs: Vec<&SparseEncoding> = encs.iter().collect();
                run_multi(&f, &refs, &params)
            }
            .map_err(|e| format!("spec {spec_id} input {input_id}: {e}"))?;
            if got.bits() != expect.bits() || got.len() != expect.len() {
                return Err(format!(
                    "spec {spec_id} (q={}, t={}, sigma={}) input {input_id}: accelerated output differs",
                    spec.q, spec.t, spec.sigma
                ));
            }
            runs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 120.0 {
        return Err(format!("{runs} runs took {secs:.1}s, over the 2 minute budget"));
    }
    Ok("200 specs x 50 inputs bit-equal".to_string())
}

/// Binary-search rank and predecessor over sorted keys.
fn search_rank(keys: &[u64], x: u64) -> usize {
    keys.partition_point(|&k| k < x)
}

fn search_pred(keys: &[u64], x: u64) -> Option<u64> {
    keys.partition_point(|&k| k <= x).checked_sub(1).map(|i| keys[i])
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut queries = 0usize;
    for set_id in 0..10_000 {
        let bits = rng.gen_range(1..=48usize);
        let universe = 1u64 << bits;
        let size = rng.gen_range(0..=10_000usize.min(universe as usize));
        let mut keys: Vec<u64> = if set_id % 4 == 0 {
            // Clustered keys stress single buckets.
            let base = rng.gen_range(0..universe);
            (0..size).map(|_| (base + rng.gen_range(0..4 * size as u64 + 1)) % universe).collect()
        } else {
            (0..size).map(|_| rng.gen_range(0..universe)).collect()
        };
        keys.sort_unstable();
        keys.dedup();
        let m = rng.gen_range(1..=keys.len().max(1));
        let veb = if set_id % 2 == 0 {
            VebIndex::new(&keys, bits, m)
        } else {
            let w = rng.gen_range(2..=8);
            VebIndex::with_config(&keys, bits, m, w, rng.gen_range(2..=1 << 12))
        }
        .map_err(|e| format!("set {set_id}: {e}"))?;
        for q in 0..10_000 {
            let x = match q % 3 {
                0 if !keys.is_empty() => {
                    let k = keys[rng.gen_range(0..keys.len())];
                    k.wrapping_add(rng.gen_range(0..3)).wrapping_sub(1) & (universe - 1)
                }
                _ => rng.gen_range(0..universe),
            };
            if veb.rank(x) != search_rank(&keys, x) || veb.pred(x) != search_pred(&keys, x) {
                return Err(format!("set {set_id} (|S|={}, 2^{bits}): query {x}", keys.len()));
            }
            queries += 1;
        }
    }
    Ok(format!("10^4 sets, {queries} rank/pred queries match binary search"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut blocks = 0usize;
    for tau in [3usize, 5, 9, 16] {
        for _ in 0..50 {
            let k = rng.gen_range(1..=20);
            let offsets: Vec<usize> = (0..k).map(|_| rng.gen_range(0..tau)).collect();
            let s = adversarial_family(tau, &offsets);
            let t = PackedText::new(&s, 2).map_err(|e| e.to_string())?;
            let fp = FastPrep::new(&t, &Params::default()).map_err(|e| e.to_string())?;
            let explicit = fp.sync_prep().explicit(tau).map_err(|e| e.to_string())?;
            let sparse = positions_of(&fp.sync_sparse_transduced(tau).and_then(|e| e.decode()).map_err(|e| e.to_string())?);
            for set in [&explicit, &sparse] {
                for (i, &off) in offsets.iter().enumerate() {
                    let lo = 3 * tau * i;
                    let first = set.iter().copied().find(|&p| p >= lo && p < lo + 3 * tau);
                    if first != Some(lo + off) {
                        return Err(format!("tau={tau} offsets={offsets:?}: block {i} starts at {first:?}"));
                    }
                    blocks += 1;
                }
            }
        }
    }
    Ok(format!("{blocks} blocks start at the planted offset"))
}

fn criterion_8() -> Outcome {
    let n = 1usize << 20;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = random_text(&mut rng, n, 4);
    let t = PackedText::new(&s, 4).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let fp = FastPrep::new(&t, &Params::default()).map_err(|e| e.to_string())?;
    let prep_ms = start.elapsed().as_millis();
    let mut ratios = Vec::new();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for tau in [8usize, 64, 512, 4096] {
        let h = fp.sync_with_support(tau).map_err(|e| e.to_string())?;
        let bits = match &h {
            SyncSetHandle::Sparse { support, .. } => support.encoding.bit_len(),
            _ => unreachable!(),
        };
        let model = n as f64 / tau as f64 * (tau as f64).log2();
        let args: Vec<usize> = (0..20_000).map(|_| rng.gen_range(0..=n)).collect();
        let q = Instant::now();
        let mut acc = 0usize;
        for &j in &args {
            acc = acc.wrapping_add(h.rank(j).map_err(|e| e.to_string())?);
        }
        std::hint::black_box(acc);
        let ns = q.elapsed().as_nanos() as f64 / args.len() as f64;
        ratios.push(bits as f64 / model);
        times.push(ns);
        rows.push(format!("tau={tau}: {bits} bits ({:.2}x model), {ns:.0} ns/rank", bits as f64 / model));
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    let decreasing = times.windows(2).all(|w| w[1] <= w[0]);
    let summary = format!("prep {prep_ms} ms; {}; envelope spread {spread:.2}", rows.join("; "));
    if spread <= 4.0 && decreasing {
        Ok(summary)
    } else {
        Err(format!("{summary}; query time decreasing: {decreasing}"))
    }
}

fn main() -> ExitCode {
    let corpus = corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("synchronizing-set correctness", Box::new(|| criterion_1(&corpus))),
        ("representation agreement", Box::new(|| criterion_2(&corpus))),
        ("recompression chain", Box::new(|| criterion_3(&corpus))),
        ("codec golden", Box::new(criterion_4)),
        ("transducer master property", Box::new(criterion_5)),
        ("vEB rank/pred", Box::new(criterion_6)),
        ("adversarial family", Box::new(criterion_7)),
        ("output-size trend (report only)", Box::new(criterion_8)),
    ];
    let mut failed = false;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let id = i + 1;
        match outcome {
            Ok(msg) => println!("criterion {id} PASS [{name}] {msg} ({secs:.1}s)"),
            Err(msg) => {
                println!("criterion {id} FAIL [{name}] {msg} ({secs:.1}s)");
                if id != 8 {
                    failed = true;
                }
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
