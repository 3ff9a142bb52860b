use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn core() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramfuzz")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fuzz(out: &Path, extra: &[&str]) -> Output {
    let g = core().join("grammars/minijs.g");
    let seeds = core().join("fixtures/minijs/seeds");
    let mut args = vec!["fuzz", "--grammar", s(&g), "--target", "minijs", "--seeds", s(&seeds), "--out", s(out)];
    args.extend_from_slice(extra);
    bin(&args)
}

/// Key paths and JSON types, with array elements collapsed.
fn schema(v: &Value, path: &str, out: &mut Vec<String>) {
    let kind = match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    };
    out.push(format!("{path}: {kind}"));
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| schema(v, &format!("{path}.{k}"), out)),
        Value::Array(a) => {
            if let Some(first) = a.first() {
                schema(first, &format!("{path}[]"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn usage_errors_exit_2() {
    let o = bin(&["fuzz", "--target", "minijs", "--seeds", "x", "--out", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(bin(&["fuzz", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    let t = tempfile::tempdir().unwrap();
    let o = fuzz(&t.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2), "no limit given");
    let g = core().join("grammars/minijs.g");
    let o = bin(&["fuzz", "--grammar", s(&g), "--target", "nope", "--seeds", s(&core().join("fixtures/minijs/seeds")), "--out", s(&t.path().join("o")), "--cycles", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(bin(&["report", "--out", s(t.path())]).status.code(), Some(2));
    let o = bin(&["trim", "--grammar", s(&g), "--target", "minijs", "--input", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fuzz_outputs_match_golden_manifest_schema() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("o");
    let o = fuzz(&out, &["--cycles", "1", "--rng-seed", "7", "--max-execs", "5000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("cycle=") && l.contains(" queue=") && l.contains(" edges=") && l.contains(" crashes=")));
    for p in ["queue", "crashes", "hangs", "stats.csv", "manifest.json", "admitted.log"] {
        assert!(out.join(p).exists(), "{p}");
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["rng_seed"], 7);
    let mut keys = Vec::new();
    schema(&m, "$", &mut keys);
    let got = keys.join("\n") + "\n";
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/manifest_schema.txt");
    if std::env::var_os("GRAMFUZZ_BLESS").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(&golden).unwrap(), "set GRAMFUZZ_BLESS=1 to update");
}

#[test]
fn same_seed_same_stats_and_replay() {
    let t = tempfile::tempdir().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    let args = ["--workers", "1", "--rng-seed", "3", "--max-execs", "8000"];
    assert!(fuzz(&a, &args).status.success());
    assert!(fuzz(&b, &args).status.success());
    assert_eq!(fs::read(a.join("stats.csv")).unwrap(), fs::read(b.join("stats.csv")).unwrap());
    assert_eq!(fs::read(a.join("admitted.log")).unwrap(), fs::read(b.join("admitted.log")).unwrap());
    let o = bin(&["replay", "--manifest", s(&a.join("manifest.json")), "--out", s(&c)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("admitted sequence matches"));
    assert_eq!(fs::read(a.join("stats.csv")).unwrap(), fs::read(c.join("stats.csv")).unwrap());
}

fn trim(name: &str, dir: &Path) -> (String, Vec<u8>) {
    let g = core().join("grammars/minijs.g");
    let input = core().join("fixtures/trim").join(name);
    let out = dir.join(name);
    let o = bin(&["trim", "--grammar", s(&g), "--target", "minijs", "--input", s(&input), "--out", s(&out)]);
    assert!(o.status.success());
    (stdout(&o), fs::read(out).unwrap())
}

#[test]
fn trim_command() {
    let t = tempfile::tempdir().unwrap();
    let (text, trimmed) = trim("eval_statements.js", t.path());
    assert!(text.contains("mode=tree still_parses=true"), "{text}");
    let removed: Vec<&str> = text.lines().filter(|l| l.starts_with("removed ")).collect();
    assert!(!removed.is_empty());
    for r in &removed {
        assert!(r.starts_with("removed \"try {") && r.ends_with("catch (ex) { }\""), "{r}");
    }
    assert!(trimmed.len() < fs::read(core().join("fixtures/trim/eval_statements.js")).unwrap().len());

    let (text, trimmed) = trim("minimal.js", t.path());
    assert!(text.contains("removed=0"), "{text}");
    assert_eq!(trimmed, fs::read(core().join("fixtures/trim/minimal.js")).unwrap());

    let (text, _) = trim("invalid.js", t.path());
    assert!(text.contains("mode=builtin_fallback"), "{text}");
}

#[test]
fn cmin_and_mutate() {
    let t = tempfile::tempdir().unwrap();
    let seeds = core().join("fixtures/minijs/seeds");
    let out = t.path().join("min");
    let o = bin(&["cmin", "--target", "minijs", "--seeds", s(&seeds), "--out", s(&out), "--grammar", s(&core().join("grammars/minijs.g"))]);
    assert!(o.status.success());
    let kept = fs::read_dir(&out).unwrap().count();
    assert!((1..=4).contains(&kept));

    let deep = core().join("fixtures/minijs/deep");
    let m = t.path().join("mut");
    let o = bin(&[
        "mutate", "--grammar", s(&core().join("grammars/minijs.g")), "--input", s(&deep.join("father.js")),
        "--partner", s(&deep.join("mother.js")), "--strategy", "tree", "--out", s(&m), "--limit", "50",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(&m).unwrap().count(), 50);
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(p).unwrap();
    rd.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn report_command() {
    let t = tempfile::tempdir().unwrap();
    // Empty campaign: header-only stats.
    let empty = t.path().join("empty");
    fs::create_dir(&empty).unwrap();
    fs::write(empty.join("stats.csv"), "cycle,strategy,generated,interesting,applications,parse_ms,mutate_ms,exec_ms\n").unwrap();
    let o = bin(&["report", "--out", s(&empty)]);
    assert!(o.status.success());
    let files: Vec<String> = fs::read_dir(empty.join("report")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(files.iter().all(|f| f.ends_with(".csv")), "{files:?}");
    assert!(csv_rows(&empty.join("report/cumulative.csv")).is_empty());

    fs::write(empty.join("stats.csv"), "not,a,stats\nfile\n").unwrap();
    assert_eq!(bin(&["report", "--out", s(&empty)]).status.code(), Some(2));

    let run = t.path().join("run");
    assert!(fuzz(&run, &["--max-execs", "6000", "--rng-seed", "1"]).status.success());
    assert!(bin(&["report", "--out", s(&run)]).status.success());
    let rows = csv_rows(&run.join("report/cumulative.csv"));
    assert!(!rows.is_empty());
    let mut last: std::collections::HashMap<String, (u64, u64)> = Default::default();
    for r in &rows {
        let (g, i, ratio): (u64, u64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!((0.0..=1.0).contains(&ratio));
        let prev = last.insert(r[1].clone(), (g, i)).unwrap_or((0, 0));
        assert!(g >= prev.0 && i >= prev.1, "cumulative curves never decrease");
    }
    // Recompute the totals from the raw stats.
    let raw = csv_rows(&run.join("stats.csv"));
    for (k, (g, i)) in &last {
        let sg: u64 = raw.iter().filter(|r| &r[1] == k).map(|r| r[2].parse::<u64>().unwrap()).sum();
        let si: u64 = raw.iter().filter(|r| &r[1] == k).map(|r| r[3].parse::<u64>().unwrap()).sum();
        assert_eq!((sg, si), (*g, *i), "{k}");
    }
    assert!(run.join("report/cumulative.svg").is_file());
}
