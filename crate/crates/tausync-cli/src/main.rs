//! Command-line front end for the `tausync` library.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O or
//! malformed input.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use tausync::fastpath::{support_sparse, FastPrep};
use tausync::oracle::{corpus, verify_sync};
use tausync::recompress::bitmask_to_list;
use tausync::runs::{enumerate_runs, runs_bitmask};
use tausync::sparsecodec::{senc_encode, senc_from_positions};
use tausync::syncset::{check_tau, SyncPrep, SyncSetHandle};
use tausync::transducer::{decrement, threshold, AccelSingle};
use tausync::{BitStream, Error, PackedText, Params, SparseEncoding};

#[derive(Parser, Debug)]
#[command(name = "tausync", version, about = "Build and query τ-synchronizing sets")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Alphabet size. When given, text inputs are read as "index symbol" lines;
    /// otherwise they are raw bytes over σ = 256.
    #[arg(long, global = true)]
    sigma: Option<u32>,
    /// Table budget N, in [2..2^24].
    #[arg(long, global = true, default_value_t = 1 << 16)]
    table_n: u64,
    /// Packed paths run only when log_σ n reaches this value.
    #[arg(long, global = true, default_value_t = 256.0)]
    fallback_threshold: f64,
    /// Seed for generated corpora and query workloads.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    List,
    Bitmask,
    Sparse,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Program {
    Decrement,
    Threshold,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Random,
    Periodic,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the τ-synchronizing set of a text.
    Sync {
        input: PathBuf,
        #[arg(long)]
        tau: usize,
        #[arg(long, value_enum, default_value = "list")]
        format: Format,
        /// Build select and rank structures for the sparse output.
        #[arg(long)]
        support: bool,
        /// Check the result with the brute-force oracle.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the boundary level B_k of restricted recompression.
    Recompress {
        input: PathBuf,
        #[arg(long)]
        level: usize,
        #[arg(long, value_enum, default_value = "list")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs of length at least `ell` with period at most `period`.
    Runs {
        input: PathBuf,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        period: usize,
        #[arg(long, value_enum, default_value = "list")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode a whitespace-separated decimal array into a sparse container.
    Encode {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a sparse container into decimal values, one per line.
    Decode {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank or select on a saved sparse synchronizing set.
    Query {
        container: PathBuf,
        #[arg(long, conflicts_with = "select", required_unless_present = "select")]
        rank: Option<usize>,
        #[arg(long)]
        select: Option<usize>,
        /// τ of the stored set; only sizes the rank index.
        #[arg(long, default_value_t = 1)]
        tau: usize,
    },
    /// Check a saved set against the brute-force oracle.
    Verify {
        input: PathBuf,
        set: PathBuf,
        #[arg(long)]
        tau: usize,
        /// Representation of `set`; detected from the file when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Time each representation for a list of τ values, as CSV.
    Bench {
        /// Text file; a random text of length `--n` is generated when omitted.
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<usize>,
        #[arg(long, default_value_t = 1 << 16)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        queries: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["list", "bitmask", "sparse"])]
        repr: Vec<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a demonstration transducer over a sparse container.
    Transduce {
        container: PathBuf,
        #[arg(long, value_enum)]
        program: Program,
        /// Threshold constant for `--program threshold`.
        #[arg(long, default_value_t = 1)]
        c: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated text as "index symbol" lines.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "random")]
        kind: Kind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Verify(String),
    Usage(String),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Io(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verify(m) => eprintln!("verification failed: {m}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Io(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    let params = Params::new(g.table_n, g.fallback_threshold)?;
    match cli.command {
        Command::Sync {
            input,
            tau,
            format,
            support,
            verify,
            out,
        } => cmd_sync(g, &params, &input, tau, format, support, verify, out.as_deref()),
        Command::Recompress {
            input,
            level,
            format,
            out,
        } => {
            let text = read_text(g, &input)?;
            let prep = SyncPrep::new(&text, &params)?;
            let chain = prep.recompression().chain();
            if level > chain.q() {
                return Err(Failure::Usage(format!("level {level} exceeds q = {}", chain.q())));
            }
            match format {
                Format::List => write_list(out.as_deref(), chain.level(level)),
                Format::Bitmask => write_bits(out.as_deref(), &prep.recompression().bk_bitmask(level), text.n()),
                Format::Sparse => {
                    let enc = senc_from_positions(text.n(), chain.level(level))?;
                    write_sparse(out.as_deref(), &enc)
                }
            }
        }
        Command::Runs {
            input,
            ell,
            period,
            format,
            out,
        } => {
            let text = read_text(g, &input)?;
            match format {
                Format::List => {
                    let runs = enumerate_runs(&text, ell, period)?;
                    let lines: Vec<String> = runs
                        .iter()
                        .map(|r| format!("{} {} {}", r.start, r.end, r.period))
                        .collect();
                    write_lines(out.as_deref(), &lines)
                }
                Format::Bitmask => write_bits(out.as_deref(), &runs_bitmask(&text, ell, period, &params)?, text.n()),
                Format::Sparse => Err(Failure::Usage("runs supports list and bitmask output".into())),
            }
        }
        Command::Encode { input, out } => {
            let body = read_string(&input)?;
            let values = body
                .split_whitespace()
                .map(|w| w.parse::<u64>().with_context(|| format!("bad value {w:?}")))
                .collect::<anyhow::Result<Vec<u64>>>()?;
            write_sparse(out.as_deref(), &senc_encode(&values)?)
        }
        Command::Decode { input, out } => {
            let enc = read_sparse(&input)?;
            let lines: Vec<String> = enc.decode()?.iter().map(|v| v.to_string()).collect();
            write_lines(out.as_deref(), &lines)
        }
        Command::Query {
            container,
            rank,
            select,
            tau,
        } => {
            let enc = read_sparse(&container)?;
            let handle = support_sparse(enc, tau, &params)?;
            let answer = match (rank, select) {
                (Some(j), _) => handle.rank(j)?,
                (None, Some(j)) => handle.select(j)?,
                (None, None) => unreachable!("clap requires one of --rank and --select"),
            };
            println!("{answer}");
            Ok(())
        }
        Command::Verify { input, set, tau, format } => {
            let text = read_text(g, &input)?;
            check_tau(text.n(), tau)?;
            let bytes = fs::read(&set).with_context(|| format!("reading {}", set.display()))?;
            let positions = parse_set(&bytes, text.n(), format).map_err(Failure::Verify)?;
            let report = verify_sync(text.symbols(), tau, &positions);
            match report.violation {
                None => {
                    println!("ok: {} positions", positions.len());
                    Ok(())
                }
                Some(v) => Err(Failure::Verify(format!("{v:?}"))),
            }
        }
        Command::Bench {
            input,
            tau_list,
            n,
            queries,
            repr,
            out,
        } => {
            let text = match input {
                Some(p) => read_text(g, &p)?,
                None => {
                    let sigma = g.sigma.unwrap_or(4);
                    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                    PackedText::new(&corpus::random_text(&mut rng, n, sigma), sigma)?
                }
            };
            cmd_bench(g, &params, &text, &tau_list, queries, &repr, out.as_deref())
        }
        Command::Transduce {
            container,
            program,
            c,
            out,
        } => {
            let enc = read_sparse(&container)?;
            let result = match program {
                Program::Decrement => AccelSingle::new(decrement(), &params)?.run(&enc)?,
                Program::Threshold => AccelSingle::new(threshold(c), &params)?.run(&enc)?,
            };
            match out {
                Some(_) => write_sparse(out.as_deref(), &result),
                None => {
                    let lines: Vec<String> = result.decode()?.iter().map(|v| v.to_string()).collect();
                    write_lines(None, &lines)
                }
            }
        }
        Command::Generate { n, kind, out } => {
            let sigma = g.sigma.unwrap_or(4);
            if sigma == 0 {
                return Err(Failure::Usage("sigma must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let s = match kind {
                Kind::Random => corpus::random_text(&mut rng, n, sigma),
                Kind::Periodic => corpus::periodic_text(&mut rng, n, sigma),
            };
            let lines: Vec<String> = s.iter().enumerate().map(|(i, c)| format!("{i} {c}")).collect();
            write_lines(out.as_deref(), &lines)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sync(
    g: &Global,
    params: &Params,
    input: &Path,
    tau: usize,
    format: Format,
    support: bool,
    verify: bool,
    out: Option<&Path>,
) -> CliResult<()> {
    let text = read_text(g, input)?;
    check_tau(text.n(), tau)?;
    if support && format != Format::Sparse {
        return Err(Failure::Usage("--support requires --format sparse".into()));
    }
    let positions = match format {
        Format::List => {
            let prep = SyncPrep::new(&text, params)?;
            let positions = prep.explicit(tau)?;
            write_list(out, &positions)?;
            positions
        }
        Format::Bitmask => {
            let mask = SyncPrep::new(&text, params)?.bitmask(tau)?;
            write_bits(out, &mask, text.n())?;
            mask.ones().collect()
        }
        Format::Sparse => {
            let prep = FastPrep::new(&text, params)?;
            let handle = if support {
                prep.sync_with_support(tau)?
            } else {
                let encoding = prep.sync_sparse(tau)?;
                let positions = encoding_positions(&encoding)?;
                SyncSetHandle::Explicit {
                    n: text.n(),
                    tau,
                    positions,
                }
            };
            let encoding = match &handle {
                SyncSetHandle::Sparse { support, .. } => support.encoding.clone(),
                _ => senc_from_positions(text.n(), &handle.positions()?)?,
            };
            write_sparse(out, &encoding)?;
            if support && out.is_some() {
                println!("{} positions, {} bits", handle.len(), encoding.bit_len());
            }
            handle.positions()?
        }
    };
    if verify {
        if let Some(v) = verify_sync(text.symbols(), tau, &positions).violation {
            return Err(Failure::Verify(format!("{v:?}")));
        }
        eprintln!("verified: {} positions", positions.len());
    }
    Ok(())
}

fn cmd_bench(
    g: &Global,
    params: &Params,
    text: &PackedText,
    taus: &[usize],
    queries: usize,
    reprs: &[Format],
    out: Option<&Path>,
) -> CliResult<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["n", "sigma", "tau", "repr", "bits", "build_ns", "query_ns"])
        .context("writing CSV")?;
    let n = text.n();
    for &tau in taus {
        check_tau(n, tau)?;
        let mut rng = ChaCha8Rng::seed_from_u64(g.seed ^ tau as u64);
        let args: Vec<usize> = (0..queries.max(1)).map(|_| rng.gen_range(0..=n)).collect();
        for &repr in reprs {
            let start = Instant::now();
            let (handle, bits) = match repr {
                Format::List => {
                    let positions = SyncPrep::new(text, params)?.explicit(tau)?;
                    let bits = positions.len() * (usize::BITS - n.leading_zeros()) as usize;
                    (SyncSetHandle::Explicit { n, tau, positions }, bits)
                }
                Format::Bitmask => {
                    let mask = SyncPrep::new(text, params)?.bitmask(tau)?;
                    (SyncSetHandle::Bitmask { tau, mask }, n)
                }
                Format::Sparse => {
                    let h = FastPrep::new(text, params)?.sync_with_support(tau)?;
                    let bits = match &h {
                        SyncSetHandle::Sparse { support, .. } => support.encoding.bit_len(),
                        _ => unreachable!("sync_with_support returns a sparse handle"),
                    };
                    (h, bits)
                }
            };
            let build_ns = start.elapsed().as_nanos();
            let start = Instant::now();
            let mut acc = 0usize;
            for &j in &args {
                acc = acc.wrapping_add(handle.rank(j)?);
            }
            std::hint::black_box(acc);
            let query_ns = start.elapsed().as_nanos() / args.len() as u128;
            let name = match repr {
                Format::List => "list",
                Format::Bitmask => "bitmask",
                Format::Sparse => "sparse",
            };
            w.write_record([
                n.to_string(),
                text.sigma_in().to_string(),
                tau.to_string(),
                name.to_string(),
                bits.to_string(),
                build_ns.to_string(),
                query_ns.to_string(),
            ])
            .context("writing CSV")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn encoding_positions(e: &SparseEncoding) -> tausync::Result<Vec<usize>> {
    Ok(e.decode()?
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, _)| i)
        .collect())
}

/// Parses a saved set. Containers whose bit count equals `n` and which are
/// not a valid sparse encoding of length `n` are read as bitmasks.
fn parse_set(bytes: &[u8], n: usize, format: Option<Format>) -> std::result::Result<Vec<usize>, String> {
    let is_container = bytes.starts_with(b"SSB1");
    let format = format.unwrap_or(if !is_container {
        Format::List
    } else if SparseEncoding::from_container(bytes).is_ok_and(|e| e.len() == n) {
        Format::Sparse
    } else {
        Format::Bitmask
    });
    match format {
        Format::List => {
            let s = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
            s.split_whitespace()
                .map(|w| w.parse::<usize>().map_err(|e| format!("bad position {w:?}: {e}")))
                .collect()
        }
        Format::Bitmask => {
            let (len, bits) = BitStream::from_container(bytes).map_err(|e| e.to_string())?;
            if len as usize != n || bits.len() != n {
                return Err(format!("bitmask covers {} positions, text has {n}", bits.len()));
            }
            Ok(bitmask_to_list(&bits))
        }
        Format::Sparse => {
            let e = SparseEncoding::from_container(bytes).map_err(|e| e.to_string())?;
            if e.len() != n {
                return Err(format!("sparse set covers {} positions, text has {n}", e.len()));
            }
            let values = e.decode().map_err(|e| e.to_string())?;
            if let Some(v) = values.iter().find(|&&v| v > 1) {
                return Err(format!("sparse set holds value {v}, expected a 0/1 mask"));
            }
            encoding_positions(&e).map_err(|e| e.to_string())
        }
    }
}

fn read_string(p: &Path) -> CliResult<String> {
    Ok(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
}

fn read_sparse(p: &Path) -> CliResult<SparseEncoding> {
    let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
    SparseEncoding::from_container(&bytes)
        .with_context(|| format!("parsing {}", p.display()))
        .map_err(Failure::Io)
}

/// Raw bytes when `--sigma` is absent, else "index symbol" lines covering `0..n`.
fn read_text(g: &Global, p: &Path) -> CliResult<PackedText> {
    let Some(sigma) = g.sigma else {
        let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        let s: Vec<u32> = bytes.iter().map(|&b| b as u32).collect();
        return Ok(PackedText::new(&s, 256)?);
    };
    let body = read_string(p)?;
    let mut pairs = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [i, c] => i.parse::<usize>().ok().zip(c.parse::<u32>().ok()),
            _ => None,
        };
        let Some(pair) = parsed else {
            return Err(Failure::Io(anyhow::anyhow!(
                "{}:{}: expected \"index symbol\"",
                p.display(),
                lineno + 1
            )));
        };
        pairs.push(pair);
    }
    pairs.sort_unstable();
    let mut s = Vec::with_capacity(pairs.len());
    for (k, &(i, c)) in pairs.iter().enumerate() {
        if i != k {
            return Err(Failure::Io(anyhow::anyhow!(
                "{}: indices must cover 0..{} exactly once",
                p.display(),
                pairs.len()
            )));
        }
        s.push(c);
    }
    Ok(PackedText::new(&s, sigma)?)
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn write_lines(out: Option<&Path>, lines: &[String]) -> CliResult<()> {
    let mut body = lines.join("\n");
    if !lines.is_empty() {
        body.push('\n');
    }
    write_bytes(out, body.as_bytes())
}

fn write_list(out: Option<&Path>, positions: &[usize]) -> CliResult<()> {
    let lines: Vec<String> = positions.iter().map(|p| p.to_string()).collect();
    write_lines(out, &lines)
}

/// A container when writing to a file, a 0/1 string on standard output.
fn write_bits(out: Option<&Path>, bits: &BitStream, n: usize) -> CliResult<()> {
    match out {
        Some(_) => write_bytes(out, &bits.to_container(n as u64)),
        None => write_lines(None, &[bits.to_string()]),
    }
}

fn write_sparse(out: Option<&Path>, e: &SparseEncoding) -> CliResult<()> {
    match out {
        Some(_) => write_bytes(out, &e.to_container()),
        None => write_lines(None, &[e.bits().to_string()]),
    }
}
