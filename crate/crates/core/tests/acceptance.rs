//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stdout, so the lines show up even when output capture
//! is on.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use gramfuzz::campaign::{
    load_manifest, read_admitted_log, replay, run_campaign, strip_comments, CampaignConfig, CampaignReport, StatKey,
    TargetConfig,
};
use gramfuzz::coverage::{signature, CoverageMap, Novelty, VirginMap, MAP_SIZE};
use gramfuzz::grammar::{enumerate_subtrees, generate, load_grammar, minijs, parse, plist_xml, GenConfig, GrammarSpec, Trivia};
use gramfuzz::harness::{TargetSpec};
use gramfuzz::mutate::{
    dictionary_mutate, extract_auto_tokens, naive_dictionary_mutate, random_source, tree_mutate, DictMode, Strategy,
    TreeLimits,
};
use gramfuzz::trim::{builtin_trim, tree_trim, TrimMode, MIN_CHUNK, TRIM_DIVISORS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {verdict} {detail}");
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn corpus(g: &GrammarSpec, n: usize, seed: u64, trivia: Trivia) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig { trivia, ..GenConfig::default() };
    (0..n).map(|_| generate(g, &mut rng, &cfg).expect("bundled grammars generate")).collect()
}

// 1 and 2: every tree-mode trim reparses, and every accepted step keeps the
// original signature.
#[test]
fn c01_c02_tree_trim_validity_and_signatures() {
    let start = Instant::now();
    let mut outcomes = 0;
    let mut tree_mode = 0;
    let mut invalid = 0;
    let mut steps = 0;
    let mut bad_steps = 0;
    let mut removed = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (g, target, seed) in [(minijs(), "minijs", 1), (plist_xml(), "plist", 2)] {
        let mut ex = TargetSpec::builtin(target).unwrap().executor().unwrap();
        for mut input in corpus(&g, 120, seed, Trivia::Random) {
            // Repeated statements give the trimmer something to remove.
            if target == "minijs" {
                input = input.repeat(rng.gen_range(1..=12));
            }
            assert!(parse(&g, &input).is_ok());
            let original = ex.execute(&input).unwrap().signature();
            let mut oracle = |c: &[u8]| ex.execute(c).map(|r| r.signature());
            let o = tree_trim(&input, &g, &mut oracle).expect("in-process targets do not fail");
            outcomes += 1;
            removed += o.bytes_removed;
            if o.mode == TrimMode::Tree {
                tree_mode += 1;
                if !o.still_parses || parse(&g, &o.trimmed).is_err() {
                    invalid += 1;
                }
            }
            for s in &o.steps {
                steps += 1;
                if s.signature != original {
                    bad_steps += 1;
                }
            }
            if ex.execute(&o.trimmed).unwrap().signature() != original {
                bad_steps += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok1 = outcomes >= 200 && tree_mode == outcomes && invalid == 0 && secs < 120.0;
    report(1, ok1, &format!("{tree_mode}/{outcomes} tree-mode outcomes, {invalid} unparsable, {removed} bytes removed, {secs:.1}s"));
    let ok2 = bad_steps == 0 && steps > 0;
    report(2, ok2, &format!("{steps} accepted steps, {bad_steps} signature mismatches"));
    assert!(ok1 && ok2);
}

// 3: chunk sizes follow len/n for each divisor with the 4-byte floor, and are
// recomputed from the current length at every pass.
#[test]
fn c03_builtin_trim_schedule() {
    // Expected candidate lengths when nothing is ever accepted.
    fn rejecting(len: usize) -> Vec<usize> {
        let mut v = Vec::new();
        for n in [16usize, 32, 64, 128, 256, 512, 1024] {
            let c = len / n;
            if c < 4 {
                continue;
            }
            v.extend(std::iter::repeat_n(len - c, len / c));
        }
        v
    }
    // Expected candidate lengths when every removal is accepted.
    fn accepting(len: usize) -> Vec<usize> {
        let mut cur = len;
        let mut v = Vec::new();
        for n in [16usize, 32, 64, 128, 256, 512, 1024] {
            let c = cur / n;
            if c < 4 {
                continue;
            }
            while c <= cur {
                cur -= c;
                v.push(cur);
            }
        }
        v
    }
    assert_eq!(TRIM_DIVISORS, [16, 32, 64, 128, 256, 512, 1024]);
    assert_eq!(MIN_CHUNK, 4);
    let mut checked = 0;
    let mut ok = true;
    for len in [1usize, 3, 63, 64, 65, 100, 255, 1000, 4096, 5000, 65_536] {
        let input: Vec<u8> = (0..len).map(|i| i as u8).collect();
        let mut seen = Vec::new();
        let o = builtin_trim(&input, &mut |c: &[u8]| {
            seen.push(c.len());
            Ok::<_, ()>(if c.len() == len { gramfuzz::coverage::Signature(1) } else { gramfuzz::coverage::Signature(2) })
        })
        .unwrap();
        ok &= seen[1..] == rejecting(len)[..] && o.bytes_removed == 0;
        let mut seen = Vec::new();
        builtin_trim(&input, &mut |c: &[u8]| {
            seen.push(c.len());
            Ok::<_, ()>(gramfuzz::coverage::Signature(1))
        })
        .unwrap();
        ok &= seen[1..] == accepting(len)[..];
        checked += 1;
    }
    // 64 bytes at n=16 gives 4-byte chunks.
    ok &= rejecting(64)[0] == 60;
    report(3, ok, &format!("{checked} lengths, rejecting and accepting oracles"));
    assert!(ok);
}

// 4: enhanced dictionary mutation needs at most 0.7x the naive count.
#[test]
fn c04_enhanced_dictionary_reduction() {
    let start = Instant::now();
    let g = minijs();
    // Seeds reach the dictionary stage with comments stripped.
    let inputs: Vec<Vec<u8>> = corpus(&g, 100, 4, Trivia::Random).iter().map(|i| strip_comments(i, &g)).collect();
    let dict = extract_auto_tokens(&inputs, &g);
    let t = dict.len() as u64;
    let (mut enhanced, mut naive, mut oracle_enhanced) = (0u64, 0u64, 0u64);
    for input in &inputs {
        enhanced += dictionary_mutate(input, &dict).iter().map(|b| b.generated_count as u64).sum::<u64>();
        naive += naive_dictionary_mutate(input, &dict).iter().map(|b| b.generated_count as u64).sum::<u64>();
        // Positions: every byte outside alphanumeric runs of two or more,
        // plus one per such run.
        let mut positions = 0u64;
        let mut i = 0;
        while i < input.len() {
            let mut j = i;
            while j < input.len() && input[j].is_ascii_alphanumeric() {
                j += 1;
            }
            if j - i >= 2 {
                positions += 1;
                i = j;
            } else {
                positions += 1;
                i += 1;
            }
        }
        oracle_enhanced += t * (2 * positions + 1);
    }
    let oracle_naive: u64 = inputs.iter().map(|i| t * (2 * i.len() as u64 + 1)).sum();
    let ratio = enhanced as f64 / naive as f64;
    let secs = start.elapsed().as_secs_f64();
    let ok = ratio <= 0.7 && enhanced == oracle_enhanced && naive == oracle_naive && secs < 30.0;
    report(4, ok, &format!("enhanced {enhanced} / naive {naive} = {ratio:.3} over {} tokens, {secs:.1}s", dict.len()));
    assert!(ok);
}

// 5: a tree batch is every (target subtree, pool subtree) replacement.
#[test]
fn c05_tree_mutation_combinatorics() {
    let g = load_grammar(b"list := list item | item ; item := A | B | LP list RP ; A := /a/ ; B := /b/ ; LP := /\\(/ ; RP := /\\)/ ;").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = 0;
    let mut ok = true;
    let unlimited = TreeLimits { max_mutants: usize::MAX, ..TreeLimits::default() };
    while cases < 40 {
        let mk = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.gen_range(1..=7);
            (0..n).map(|_| if rng.gen_bool(0.5) { b'a' } else { b'b' }).collect()
        };
        let (tar, pro) = (mk(&mut rng), mk(&mut rng));
        let (tt, pt) = (parse(&g, &tar).unwrap(), parse(&g, &pro).unwrap());
        let (ta, pa) = (enumerate_subtrees(&tt, None), enumerate_subtrees(&pt, None));
        let (a, b) = (ta.len(), pa.len());
        if a > 20 || b > 20 {
            continue;
        }
        cases += 1;
        let batch = tree_mutate(&tar, &pro, &g, &mut random_source(cases), &TreeLimits::default());
        let mut expected: Vec<Vec<u8>> = Vec::new();
        for t in &ta {
            for (src, s) in ta.iter().map(|s| (&tar, s)).chain(pa.iter().map(|s| (&pro, s))) {
                let mut m = tar[..t.span.start].to_vec();
                m.extend_from_slice(&src[s.span.start..s.span.end]);
                m.extend_from_slice(&tar[t.span.end..]);
                expected.push(m);
            }
        }
        let mut got = batch.mutants.clone();
        got.sort();
        expected.sort();
        ok &= batch.generated_count == a * (a + b) && batch.len() == a * (a + b) && got == expected;
        ok &= tree_mutate(&tar, &pro, &g, &mut random_source(0), &unlimited).len() == a * (a + b);
    }
    // Mutant cap.
    let big: Vec<u8> = b"ab".repeat(60);
    let n = enumerate_subtrees(&parse(&g, &big).unwrap(), None).len();
    let capped = tree_mutate(&big, &big, &g, &mut random_source(1), &TreeLimits::default());
    ok &= n * 2 * n > 10_000 && capped.len() == 10_000 && capped.generated_count == n * 2 * n;
    // Pool subtrees over 200 bytes are left out; targets are not.
    let long = format!("a({})b", "ab".repeat(150)).into_bytes();
    let lt = enumerate_subtrees(&parse(&g, &long).unwrap(), None);
    let small = lt.iter().filter(|s| s.size_bytes <= 200).count();
    let pro = b"ab";
    let pb = enumerate_subtrees(&parse(&g, pro).unwrap(), None).len();
    let m = tree_mutate(&long, pro, &g, &mut random_source(2), &TreeLimits::default());
    ok &= small < lt.len() && m.generated_count == lt.len() * (small + pb);
    // Inputs over 10,000 bytes are skipped.
    let huge = vec![b'a'; 10_001];
    ok &= tree_mutate(&huge, b"ab", &g, &mut random_source(3), &TreeLimits::default()).is_empty();
    let solo = tree_mutate(b"ab", &huge, &g, &mut random_source(3), &TreeLimits::default());
    let a = enumerate_subtrees(&parse(&g, b"ab").unwrap(), None).len();
    ok &= solo.generated_count == a * a;
    report(5, ok, &format!("{cases} enumerated fixtures with a,b <= 20, caps 10000/200/10000"));
    assert!(ok);
}

// 6: novelty classification and signatures against a brute-force model.
#[test]
fn c06_coverage_oracle_equivalence() {
    fn class(c: u8) -> u8 {
        match c {
            0..=3 => c,
            4..=7 => 4,
            8..=15 => 5,
            16..=31 => 6,
            32..=127 => 7,
            128..=255 => 8,
        }
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut virgin = VirginMap::new();
    let mut seen: HashMap<usize, HashSet<u8>> = HashMap::new();
    let mut by_sig: HashMap<u64, Vec<(usize, u8)>> = HashMap::new();
    let mut mismatches = 0;
    let counts = [1u8, 2, 3, 4, 5, 7, 8, 15, 16, 31, 32, 127, 128, 255];
    for _ in 0..10_000 {
        let mut map = CoverageMap::new();
        let touched = rng.gen_range(0..=1000);
        let edges = if rng.gen_bool(0.5) { 64 } else { MAP_SIZE };
        for _ in 0..touched {
            let e = rng.gen_range(0..edges);
            map.set(e, counts[rng.gen_range(0..counts.len())]);
        }
        let cells: Vec<(usize, u8)> = (0..MAP_SIZE).filter(|&e| map.get(e) != 0).map(|e| (e, class(map.get(e)))).collect();
        let expected = if cells.iter().any(|(e, _)| !seen.contains_key(e)) {
            Novelty::NewEdge
        } else if cells.iter().any(|(e, c)| !seen[e].contains(c)) {
            Novelty::NewBucket
        } else {
            Novelty::None
        };
        if virgin.update(&map) != expected {
            mismatches += 1;
        }
        if expected != Novelty::None {
            for &(e, c) in &cells {
                seen.entry(e).or_default().insert(c);
            }
        }
        let sig = signature(&map).0;
        match by_sig.get(&sig) {
            Some(prev) if *prev != cells => mismatches += 1,
            _ => {}
        }
        by_sig.insert(sig, cells);
    }
    // Distinct bucketized maps must never share a signature.
    let distinct: HashSet<&Vec<(usize, u8)>> = by_sig.values().collect();
    if distinct.len() != by_sig.len() {
        mismatches += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = mismatches == 0 && secs < 30.0;
    report(6, ok, &format!("10000 random maps, {mismatches} mismatches, {secs:.1}s"));
    assert!(ok);
}

fn deep_config(out: PathBuf, seed: u64, tree: bool) -> CampaignConfig {
    let mut c = CampaignConfig::new(
        root().join("grammars/minijs.g"),
        TargetConfig::Builtin { name: "minijs".into() },
        root().join("fixtures/minijs/deep"),
        out,
    );
    c.rng_seed = seed;
    c.cycles = None;
    c.max_execs = Some(200_000);
    c.tree = tree;
    c.dictionary = if tree { DictMode::Enhanced } else { DictMode::Naive };
    c
}

fn planted(r: &CampaignReport) -> Option<u64> {
    r.crashes.iter().find(|f| f.key.starts_with("eval-")).map(|f| f.found_at_exec)
}

// 7 and 8: the planted evaluator crash, and which strategies produced the
// interesting inputs in the runs that found it.
#[test]
fn c07_c08_deep_bug_and_strategy_ordering() {
    let start = Instant::now();
    let t = tempfile::tempdir().unwrap();
    let mut enabled = Vec::new();
    let mut disabled = Vec::new();
    for seed in 1..=3 {
        let on = run_campaign(&deep_config(t.path().join(format!("on{seed}")), seed, true)).unwrap();
        let off = run_campaign(&deep_config(t.path().join(format!("off{seed}")), seed, false)).unwrap();
        enabled.push(on);
        disabled.push(off);
    }
    let found_on: Vec<Option<u64>> = enabled.iter().map(planted).collect();
    let found_off: Vec<Option<u64>> = disabled.iter().map(planted).collect();
    let secs = start.elapsed().as_secs_f64();
    let ok7 = found_on.iter().all(|f| f.is_some_and(|e| e <= 200_000))
        && found_off.iter().all(Option::is_none)
        && disabled.iter().all(|r| r.summary.total_execs == 200_000)
        && secs < 900.0;
    report(7, ok7, &format!("tree on found at {found_on:?}, tree off found {found_off:?}, {secs:.0}s"));

    let mut tallies = Vec::new();
    for r in &enabled {
        let tot = r.stats.totals();
        let sum = |f: &dyn Fn(Strategy) -> bool| -> u64 {
            tot.iter().filter(|(k, _)| matches!(k, StatKey::Strategy(s) if f(*s))).map(|(_, v)| v.interesting).sum()
        };
        tallies.push((sum(&|s| s == Strategy::Tree || s.is_dictionary_overwrite()), sum(&|s| s.is_flip())));
    }
    let ok8 = tallies.iter().all(|(grammar, flips)| grammar > flips);
    report(8, ok8, &format!("(tree+overwrite, flips) interesting per run: {tallies:?}"));
    assert!(ok7);
}

// 9: identical manifests give identical admissions and stats.
#[test]
fn c09_replay_determinism() {
    let t = tempfile::tempdir().unwrap();
    let mut c = CampaignConfig::new(
        root().join("grammars/minijs.g"),
        TargetConfig::Builtin { name: "minijs".into() },
        root().join("fixtures/minijs/seeds"),
        t.path().join("a"),
    );
    c.rng_seed = 9;
    c.cycles = None;
    c.max_execs = Some(40_000);
    run_campaign(&c).unwrap();
    let manifest = t.path().join("a/manifest.json");
    let m = load_manifest(&manifest).unwrap();
    let b = replay(&manifest, &t.path().join("b")).unwrap();
    let mut c2 = m.config.clone();
    c2.out_dir = t.path().join("c");
    run_campaign(&c2).unwrap();
    let hashes = |d: &str| -> Vec<String> {
        read_admitted_log(&t.path().join(d).join("admitted.log")).unwrap().into_iter().map(|r| r.sha256).collect()
    };
    let stats = |d: &str| std::fs::read(t.path().join(d).join("stats.csv")).unwrap();
    let (ha, hb, hc) = (hashes("a"), hashes("b"), hashes("c"));
    let ok = b.matches() == Some(true) && ha == hb && ha == hc && stats("a") == stats("b") && stats("a") == stats("c") && ha.len() > 4;
    report(9, ok, &format!("{} admitted entries, stats.csv byte-identical across 3 runs", ha.len()));
    assert!(ok);
}

// 10: serializing a parse tree gives back the input.
#[test]
fn c10_round_trip() {
    let mut total = 0;
    let mut failures = 0;
    let mut per: BTreeMap<&str, usize> = BTreeMap::new();
    for (name, g, seed) in [("minijs", minijs(), 10), ("plist", plist_xml(), 11)] {
        let mut inputs = corpus(&g, 250, seed, Trivia::Random);
        inputs.extend(corpus(&g, 250, seed + 100, Trivia::Minimal));
        for input in inputs {
            total += 1;
            *per.entry(name).or_default() += 1;
            match parse(&g, &input) {
                Ok(t) if t.serialize() == input => {}
                _ => failures += 1,
            }
        }
    }
    let ok = total >= 1000 && failures == 0;
    report(10, ok, &format!("{total} inputs {per:?}, {failures} mismatches"));
    assert!(ok);
}
