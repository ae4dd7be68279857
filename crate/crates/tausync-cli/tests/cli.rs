use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tausync::oracle::verify_sync;
use tausync::SparseEncoding;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn tausync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tausync"))
        .args(args)
        .output()
        .expect("spawn tausync")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn text_1k() -> Vec<u32> {
    fs::read(data("text_1k.bin")).unwrap().iter().map(|&b| b as u32).collect()
}

fn parse_list(s: &str) -> Vec<usize> {
    s.split_whitespace().map(|w| w.parse().unwrap()).collect()
}

#[test]
fn sync_list_matches_golden() {
    let s = text_1k();
    for tau in [8usize, 40] {
        let golden = parse_list(&fs::read_to_string(data(&format!("text_1k.tau{tau}.list"))).unwrap());
        assert!(verify_sync(&s, tau, &golden).pass(), "golden file for tau {tau} fails the oracle");
        let tau_s = tau.to_string();
        let o = tausync(&["sync", path_str(&data("text_1k.bin")), "--tau", &tau_s, "--format", "list"]);
        assert!(o.status.success());
        assert_eq!(parse_list(&stdout(&o)), golden);
    }
}

#[test]
fn all_formats_agree() {
    let dir = TempDir::new().unwrap();
    let input = data("text_1k.bin");
    let golden = parse_list(&fs::read_to_string(data("text_1k.tau40.list")).unwrap());
    let mask = dir.path().join("m.bin");
    let sparse = dir.path().join("s.bin");
    for (fmt, out) in [("bitmask", &mask), ("sparse", &sparse)] {
        let o = tausync(&["sync", path_str(&input), "--tau", "40", "--format", fmt, "--out", path_str(out)]);
        assert!(o.status.success(), "{fmt}");
    }
    let (n, bits) = tausync::BitStream::from_container(&fs::read(&mask).unwrap()).unwrap();
    assert_eq!(n, 1024);
    assert_eq!(bits.ones().collect::<Vec<_>>(), golden);
    let enc = SparseEncoding::from_container(&fs::read(&sparse).unwrap()).unwrap();
    let ones: Vec<usize> = enc
        .decode()
        .unwrap()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 1)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(ones, golden);
}

#[test]
fn sparse_support_round_trip() {
    let dir = TempDir::new().unwrap();
    let input = data("text_1k.bin");
    let out = dir.path().join("s.bin");
    let o = tausync(&[
        "sync",
        path_str(&input),
        "--tau",
        "8",
        "--format",
        "sparse",
        "--support",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success());
    let golden = parse_list(&fs::read_to_string(data("text_1k.tau8.list")).unwrap());
    let first = tausync(&["query", path_str(&out), "--select", "1"]);
    assert_eq!(stdout(&first).trim(), golden[0].to_string());
    let last = golden.len().to_string();
    let o = tausync(&["query", path_str(&out), "--select", &last]);
    assert_eq!(stdout(&o).trim(), golden.last().unwrap().to_string());
    for j in [0usize, 1, 100, 517, 1024] {
        let js = j.to_string();
        let o = tausync(&["query", path_str(&out), "--rank", &js, "--tau", "8"]);
        let expect = golden.partition_point(|&p| p < j);
        assert_eq!(stdout(&o).trim(), expect.to_string(), "rank {j}");
    }
    let o = tausync(&["query", path_str(&out), "--select", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tau_too_large_is_usage_error() {
    let o = tausync(&["sync", path_str(&data("text_1k.bin")), "--tau", "513"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));
    let o = tausync(&["sync", path_str(&data("text_1k.bin")), "--tau", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_arguments_and_files() {
    assert_eq!(tausync(&["sync"]).status.code(), Some(2));
    assert_eq!(tausync(&["query", "/nonexistent/x.bin", "--rank", "1"]).status.code(), Some(3));
    let o = tausync(&["--table-n", "1", "sync", path_str(&data("text_1k.bin")), "--tau", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn encode_decode_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let values = dir.path().join("v.txt");
    fs::write(&values, "0 0 3 0 0 0 0 1 0 0 0 0 0 0 0 0 2\n").unwrap();
    let c1 = dir.path().join("c1.bin");
    let c2 = dir.path().join("c2.bin");
    let back = dir.path().join("back.txt");
    assert!(tausync(&["encode", path_str(&values), "--out", path_str(&c1)]).status.success());
    assert!(tausync(&["decode", path_str(&c1), "--out", path_str(&back)]).status.success());
    assert!(tausync(&["encode", path_str(&back), "--out", path_str(&c2)]).status.success());
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());
    let decoded: Vec<u64> = fs::read_to_string(&back)
        .unwrap()
        .split_whitespace()
        .map(|w| w.parse().unwrap())
        .collect();
    assert_eq!(decoded, vec![0, 0, 3, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 2]);
}

#[test]
fn verify_accepts_saved_sets_and_rejects_mutations() {
    let dir = TempDir::new().unwrap();
    let input = data("text_1k.bin");
    for fmt in ["list", "bitmask", "sparse"] {
        let out = dir.path().join(format!("set.{fmt}"));
        let o = tausync(&["sync", path_str(&input), "--tau", "8", "--format", fmt, "--out", path_str(&out)]);
        assert!(o.status.success());
        let o = tausync(&["verify", path_str(&input), path_str(&out), "--tau", "8"]);
        assert_eq!(o.status.code(), Some(0), "{fmt}: {}", String::from_utf8_lossy(&o.stderr));
    }

    // Emptying a stretch of the text leaves a τ-window without members.
    let golden = parse_list(&fs::read_to_string(data("text_1k.tau8.list")).unwrap());
    let dropped: Vec<String> = golden
        .iter()
        .filter(|&&p| !(100..140).contains(&p))
        .map(|p| p.to_string())
        .collect();
    let list = dir.path().join("dropped.list");
    fs::write(&list, dropped.join("\n")).unwrap();
    let o = tausync(&["verify", path_str(&input), path_str(&list), "--tau", "8"]);
    assert_eq!(o.status.code(), Some(1));

    // A corrupted sparse container. Clearing the first payload bit only
    // removes position 0, which leaves a valid set here; zeroing twenty
    // bytes turns the prefix into one oversized zero-run token.
    let sparse = dir.path().join("set.sparse");
    let mut bytes = fs::read(&sparse).unwrap();
    bytes[20] ^= 1;
    let harmless = dir.path().join("harmless.bin");
    fs::write(&harmless, &bytes).unwrap();
    let o = tausync(&["verify", path_str(&input), path_str(&harmless), "--tau", "8", "--format", "sparse"]);
    assert_eq!(o.status.code(), Some(0));
    bytes[20..40].fill(0);
    let bad = dir.path().join("bad.bin");
    fs::write(&bad, &bytes).unwrap();
    let o = tausync(&["verify", path_str(&input), path_str(&bad), "--tau", "8", "--format", "sparse"]);
    assert_eq!(o.status.code(), Some(1));
    let mut truncated = fs::read(&sparse).unwrap();
    truncated.pop();
    fs::write(&bad, &truncated).unwrap();
    let o = tausync(&["verify", path_str(&input), path_str(&bad), "--tau", "8"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_header_is_stable() {
    let header = "n,sigma,tau,repr,bits,build_ns,query_ns";
    for seed in ["1", "2"] {
        let o = tausync(&["--seed", seed, "bench", "--n", "512", "--tau-list", "4,16", "--queries", "8"]);
        assert!(o.status.success());
        let out = stdout(&o);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some(header));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields.len(), 7);
            assert_eq!(fields[0], "512");
            assert_eq!(fields[1], "4");
        }
    }
}

#[test]
fn pairs_input_and_generators() {
    let dir = TempDir::new().unwrap();
    let text = dir.path().join("t.txt");
    let o = tausync(&[
        "--sigma", "2", "--seed", "9", "generate", "--n", "64", "--kind", "periodic", "--out", path_str(&text),
    ]);
    assert!(o.status.success());
    let s: Vec<u32> = fs::read_to_string(&text)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(s.len(), 64);
    for tau in 1..=32usize {
        let ts = tau.to_string();
        let o = tausync(&["--sigma", "2", "sync", path_str(&text), "--tau", &ts, "--verify"]);
        assert!(o.status.success());
        assert!(verify_sync(&s, tau, &parse_list(&stdout(&o))).pass());
    }

    let scrambled = dir.path().join("s.txt");
    fs::write(&scrambled, "2 1\n0 0\n1 1\n3 0\n").unwrap();
    let o = tausync(&["--sigma", "2", "runs", path_str(&scrambled), "--ell", "2", "--period", "1"]);
    assert_eq!(stdout(&o), "1 3 1\n");
    fs::write(&scrambled, "0 0\n2 1\n").unwrap();
    let o = tausync(&["--sigma", "2", "runs", path_str(&scrambled), "--ell", "2", "--period", "1"]);
    assert_eq!(o.status.code(), Some(3));
    fs::write(&scrambled, "0 0\n1 5\n").unwrap();
    let o = tausync(&["--sigma", "2", "sync", path_str(&scrambled), "--tau", "1"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn recompress_and_transduce() {
    let dir = TempDir::new().unwrap();
    let text = dir.path().join("t.txt");
    fs::write(&text, "0 0\n1 1\n2 0\n3 0\n").unwrap();
    let o = tausync(&["--sigma", "2", "recompress", path_str(&text), "--level", "0"]);
    assert_eq!(parse_list(&stdout(&o)), vec![1, 2, 3]);
    let o = tausync(&["--sigma", "2", "recompress", path_str(&text), "--level", "99"]);
    assert_eq!(o.status.code(), Some(2));

    let values = dir.path().join("v.txt");
    fs::write(&values, "2 0 1 5").unwrap();
    let c = dir.path().join("c.bin");
    assert!(tausync(&["encode", path_str(&values), "--out", path_str(&c)]).status.success());
    let o = tausync(&["transduce", path_str(&c), "--program", "decrement"]);
    assert_eq!(parse_list(&stdout(&o)), vec![1, 0, 0, 4]);
    let o = tausync(&["transduce", path_str(&c), "--program", "threshold", "--c", "2"]);
    assert_eq!(parse_list(&stdout(&o)), vec![1, 0, 0, 1]);
}
