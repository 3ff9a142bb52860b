use std::fs;
use std::path::{Path, PathBuf};

use gramfuzz::campaign::{read_admitted_log, run_campaign, CampaignConfig, CampaignError, StatKey, TargetConfig};
use gramfuzz::grammar::{minijs, parse, plist_xml};
use gramfuzz::mutate::Strategy;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn cfg(grammar: &str, target: &str, seeds: &str, out: &Path) -> CampaignConfig {
    CampaignConfig::new(
        root().join("grammars").join(grammar),
        TargetConfig::Builtin { name: target.into() },
        root().join("fixtures").join(seeds),
        out,
    )
}

fn minijs_cfg(out: &Path) -> CampaignConfig {
    let mut c = cfg("minijs.g", "minijs", "minijs/seeds", out);
    c.max_execs = Some(20_000);
    c
}

#[test]
fn seeds_fixtures_parse() {
    for (dir, g) in [("minijs/seeds", minijs()), ("minijs/deep", minijs()), ("plist/seeds", plist_xml())] {
        for e in fs::read_dir(root().join("fixtures").join(dir)).unwrap() {
            let p = e.unwrap().path();
            assert!(parse(&g, &fs::read(&p).unwrap()).is_ok(), "{}", p.display());
        }
    }
}

#[test]
fn zero_cycles_admits_seeds_only() {
    let t = tempfile::tempdir().unwrap();
    let mut c = minijs_cfg(&t.path().join("out"));
    c.cycles = Some(0);
    let r = run_campaign(&c).unwrap();
    assert!(r.queue.iter().all(|e| e.strategy == Strategy::Seed));
    assert_eq!(r.summary.total_execs, r.summary.seed_execs);
    assert_eq!(fs::read_dir(t.path().join("out/queue")).unwrap().count(), r.queue.len());
    // Comments are stripped from seeds.
    assert!(r.queue.iter().all(|e| !e.data.windows(2).any(|w| w == b"/*" || w == b"//")));
}

#[test]
fn bookkeeping() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("out");
    let r = run_campaign(&minijs_cfg(&out)).unwrap();
    let s = &r.summary;
    assert_eq!(s.total_execs, 20_000);
    let mutation: u64 = r
        .stats
        .totals()
        .iter()
        .filter(|(k, _)| !matches!(k, StatKey::Trim | StatKey::Strategy(Strategy::Seed)))
        .map(|(_, v)| v.generated)
        .sum();
    assert_eq!(mutation, s.total_execs - s.seed_execs - s.trim_execs);
    assert_eq!(r.stats.total(StatKey::Trim).generated, s.trim_execs);
    for (_, _, row) in r.stats.rows() {
        assert!(row.interesting <= row.generated);
    }
    // Admission log agrees with the queue, edges never shrink.
    let log = read_admitted_log(&out.join("admitted.log")).unwrap();
    assert_eq!(log, r.admitted);
    assert_eq!(log.len(), r.queue.len());
    assert!(log.windows(2).all(|w| w[0].edges <= w[1].edges && w[0].exec <= w[1].exec));
    for (e, rec) in r.queue.iter().zip(&log) {
        assert_eq!(e.id, rec.id);
        assert_eq!(e.strategy, rec.strategy);
        assert!(!e.data.is_empty());
        let file = out.join("queue").join(e.file_name());
        assert_eq!(fs::read(file).unwrap(), e.data);
        if e.strategy != Strategy::Seed {
            assert_ne!(rec.novelty, "none");
            assert!(e.parent.is_some_and(|p| p < e.id));
        }
    }
    for f in ["stats.csv", "manifest.json", "dictionary.csv", "dictionary.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn out_dir_must_be_empty() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("junk"), b"x").unwrap();
    assert!(matches!(run_campaign(&minijs_cfg(t.path())), Err(CampaignError::OutDirNotEmpty(_))));
}

#[test]
fn plist_campaign_runs() {
    let t = tempfile::tempdir().unwrap();
    let mut c = cfg("plist-xml.g", "plist", "plist/seeds", &t.path().join("out"));
    c.max_execs = Some(5_000);
    let r = run_campaign(&c).unwrap();
    assert_eq!(r.summary.total_execs, 5_000);
    assert!(r.queue.len() >= 2);
}
