//! The fuzzing loop: distill and admit seeds, then cycle over the queue,
//! trimming each entry once and running every mutation stage on it.

mod config;
mod distill;
mod pool;
mod stats;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::hash::{Hash, Hasher};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coverage::{Novelty, Signature, VirginMap};
use crate::grammar::{load_grammar_named, parse, GrammarError, GrammarSpec};
use crate::harness::{ExecResult, ExecStatus, HarnessError};
use crate::mutate::{
    deterministic_stages, dictionary_mutate, extract_auto_tokens, havoc, havoc_one, locate_token_runs,
    naive_dictionary_mutate, parse_dictionary, random_source, splice_inputs, tree_mutate_parsed, DictError, DictMode,
    Dictionary, Origin, RandomSource, Strategy, TreeLimits, MAX_INPUT_LEN,
};
use crate::trim::{tree_trim_from, TrimAborted};

pub use config::{CampaignConfig, PartnerPolicy, TargetConfig};
pub use distill::{distill_corpus, distill_with, strip_comments};
pub use pool::STACK_SIZE;
pub use stats::{StatKey, StatRow, StatsError, StatsTable};

use pool::ExecPool;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("grammar {path}: {source}")]
    Grammar { path: PathBuf, source: GrammarError },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no seed inputs")]
    NoSeeds,
    #[error("every seed crashes or hangs")]
    AllSeedsFault,
    #[error("output directory {0} is not empty")]
    OutDirNotEmpty(PathBuf),
    #[error(transparent)]
    Dict(#[from] DictError),
    #[error("manifest: {0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CampaignError> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueEntry {
    pub id: u64,
    pub data: Vec<u8>,
    pub signature: Signature,
    pub parent: Option<u64>,
    pub strategy: Strategy,
    pub parses: bool,
    pub trimmed: bool,
    pub exec_micros: u64,
    /// Deterministic stages have run.
    pub visited: bool,
}

impl QueueEntry {
    pub fn file_name(&self) -> String {
        format!("id{:06}_{}", self.id, self.strategy)
    }
}

/// One line of `admitted.log`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmittedRecord {
    pub id: u64,
    pub sha256: String,
    pub strategy: Strategy,
    pub parent: Option<u64>,
    pub novelty: String,
    /// Total executions when the entry was admitted.
    pub exec: u64,
    /// Edges covered after admission.
    pub edges: usize,
}

impl AdmittedRecord {
    fn line(&self) -> String {
        let parent = self.parent.map_or("-".to_string(), |p| p.to_string());
        format!("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", self.id, self.sha256, self.strategy, parent, self.novelty, self.exec, self.edges)
    }

    pub fn parse_line(line: &str) -> Option<AdmittedRecord> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return None;
        }
        Some(AdmittedRecord {
            id: f[0].parse().ok()?,
            sha256: f[1].to_string(),
            strategy: f[2].parse().ok()?,
            parent: if f[3] == "-" { None } else { Some(f[3].parse().ok()?) },
            novelty: f[4].to_string(),
            exec: f[5].parse().ok()?,
            edges: f[6].parse().ok()?,
        })
    }
}

pub fn read_admitted_log(path: &Path) -> Result<Vec<AdmittedRecord>, CampaignError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            AdmittedRecord::parse_line(l)
                .ok_or_else(|| CampaignError::Manifest(format!("{}: bad line {}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub key: String,
    pub status: String,
    pub strategy: Strategy,
    pub parent: Option<u64>,
    pub cycle: u64,
    /// Total executions when first seen.
    pub found_at_exec: u64,
    /// Times this fault was triggered.
    pub hits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CycleLimit,
    TimeLimit,
    ExecLimit,
}

/// Periodic progress snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Status {
    pub cycle: u64,
    pub queue_len: usize,
    pub edges: usize,
    pub crashes: usize,
    pub hangs: usize,
    pub execs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_execs: u64,
    pub seed_execs: u64,
    pub trim_execs: u64,
    pub cycles_completed: u64,
    pub queue_len: usize,
    pub edges: usize,
    pub crashes: usize,
    pub hangs: usize,
    pub target_errors: u64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: CampaignConfig,
    pub grammar_sha256: String,
    pub seeds: Vec<SeedRecord>,
    pub result: Option<RunSummary>,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CampaignError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::Manifest(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub out_dir: PathBuf,
    pub summary: RunSummary,
    pub queue: Vec<QueueEntry>,
    pub admitted: Vec<AdmittedRecord>,
    pub crashes: Vec<FaultRecord>,
    pub hangs: Vec<FaultRecord>,
    pub stats: StatsTable,
}

impl CampaignReport {
    pub fn found(&self, key: &str) -> Option<&FaultRecord> {
        self.crashes.iter().chain(&self.hangs).find(|f| f.key == key)
    }
}

/// Read seed files from the directories in file-name order.
pub fn load_seeds(dirs: &[PathBuf]) -> Result<Vec<(String, Vec<u8>)>, CampaignError> {
    let mut out = Vec::new();
    for dir in dirs {
        let mut names: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for p in names {
            let data = fs::read(&p).map_err(io_err(&p))?;
            if !data.is_empty() {
                out.push((p.display().to_string(), data));
            }
        }
    }
    Ok(out)
}

pub fn load_grammar_file(path: &Path) -> Result<GrammarSpec, CampaignError> {
    let text = fs::read(path).map_err(io_err(path))?;
    let name = path.file_stem().map_or("grammar".to_string(), |s| s.to_string_lossy().into_owned());
    load_grammar_named(&name, &text).map_err(|source| CampaignError::Grammar { path: path.to_path_buf(), source })
}

fn digest(m: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    m.hash(&mut h);
    h.finish()
}

fn novelty_name(n: Novelty) -> &'static str {
    match n {
        Novelty::None => "none",
        Novelty::NewBucket => "new_bucket",
        Novelty::NewEdge => "new_edge",
    }
}

fn safe_name(key: &str) -> String {
    key.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Mutants sent to the executors at a time; budget checks happen between
/// chunks and are exact in execution count.
const CHUNK: usize = 512;

struct Halt;

enum TrimStop {
    Halt,
    Harness,
}

struct Campaign<'a> {
    cfg: &'a CampaignConfig,
    g: GrammarSpec,
    dict: Dictionary,
    pool: ExecPool,
    rng: RandomSource,
    queue: Vec<QueueEntry>,
    virgin: VirginMap,
    stats: StatsTable,
    crashes: BTreeMap<String, FaultRecord>,
    hangs: BTreeMap<String, FaultRecord>,
    admitted: Vec<AdmittedRecord>,
    execs: u64,
    seed_execs: u64,
    trim_execs: u64,
    target_errors: u64,
    cycle: u64,
    deadline: Option<Instant>,
    out: PathBuf,
    admitted_log: BufWriter<File>,
    dict_log: csv::Writer<File>,
}

impl Campaign<'_> {
    fn out_of_budget(&self) -> Option<StopReason> {
        if self.cfg.max_execs.is_some_and(|m| self.execs >= m) {
            return Some(StopReason::ExecLimit);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some(StopReason::TimeLimit);
        }
        None
    }

    fn timed(&self, d: Duration) -> Duration {
        if self.cfg.record_timings {
            d
        } else {
            Duration::ZERO
        }
    }

    fn record_fault(&mut self, r: &ExecResult, input: &[u8], strategy: Strategy, parent: Option<u64>) -> Result<(), CampaignError> {
        let key = safe_name(&r.fault_key());
        let (map, dir) = match r.status {
            ExecStatus::Hang => (&mut self.hangs, "hangs"),
            _ => (&mut self.crashes, "crashes"),
        };
        if let Some(f) = map.get_mut(&key) {
            f.hits += 1;
            return Ok(());
        }
        write_file(&self.out.join(dir).join(&key), input)?;
        map.insert(
            key.clone(),
            FaultRecord {
                key,
                status: r.status.to_string(),
                strategy,
                parent,
                cycle: self.cycle,
                found_at_exec: self.execs,
                hits: 1,
            },
        );
        Ok(())
    }

    fn admit(&mut self, data: &[u8], r: &ExecResult, parent: Option<u64>, strategy: Strategy, novelty: &str) -> Result<(), CampaignError> {
        let t = Instant::now();
        let parses = parse(&self.g, data).is_ok();
        let pt = self.timed(t.elapsed());
        self.stats.row_mut(self.cycle, strategy).parse += pt;
        let entry = QueueEntry {
            id: self.queue.len() as u64,
            data: data.to_vec(),
            signature: r.signature(),
            parent,
            strategy,
            parses,
            trimmed: false,
            exec_micros: r.exec_micros,
            visited: false,
        };
        write_file(&self.out.join("queue").join(entry.file_name()), data)?;
        let rec = AdmittedRecord {
            id: entry.id,
            sha256: sha256_hex(data),
            strategy,
            parent,
            novelty: novelty.to_string(),
            exec: self.execs,
            edges: self.virgin.edges_seen(),
        };
        let log = self.out.join("admitted.log");
        self.admitted_log.write_all(rec.line().as_bytes()).map_err(io_err(&log))?;
        self.admitted.push(rec);
        self.queue.push(entry);
        Ok(())
    }

    /// Classify one execution and act on it.
    fn observe(&mut self, input: &[u8], r: &ExecResult, parent: Option<u64>, strategy: Strategy) -> Result<(), CampaignError> {
        if r.is_fault() {
            return self.record_fault(r, input, strategy, parent);
        }
        let n = self.virgin.update(&r.map);
        if n.is_interesting() {
            self.stats.row_mut(self.cycle, strategy).interesting += 1;
            self.admit(input, r, parent, strategy, novelty_name(n))?;
        }
        Ok(())
    }

    fn run_batch(
        &mut self,
        idx: usize,
        strategy: Strategy,
        mutants: Vec<Vec<u8>>,
        mutate_time: Duration,
        parse_time: Duration,
    ) -> Result<Result<(), Halt>, CampaignError> {
        {
            let (mt, pt) = (self.timed(mutate_time), self.timed(parse_time));
            let row = self.stats.row_mut(self.cycle, strategy);
            row.applications += 1;
            row.mutate += mt;
            row.parse += pt;
        }
        let parent = self.queue[idx].id;
        let own = &self.queue[idx].data;
        let mut seen = HashSet::new();
        let mutants: Vec<Vec<u8>> = mutants
            .into_iter()
            .filter(|m| !m.is_empty() && m.len() <= MAX_INPUT_LEN && m != own && seen.insert(digest(m)))
            .collect();
        for chunk in mutants.chunks(CHUNK) {
            if self.out_of_budget().is_some() {
                return Ok(Err(Halt));
            }
            let room = self.cfg.max_execs.map_or(usize::MAX, |m| (m - self.execs) as usize);
            let chunk = &chunk[..chunk.len().min(room)];
            let results = self.pool.run_all(chunk);
            for (input, res) in chunk.iter().zip(results) {
                self.execs += 1;
                self.stats.row_mut(self.cycle, strategy).generated += 1;
                match res {
                    Err(_) => self.target_errors += 1,
                    Ok(r) => {
                        let et = self.timed(Duration::from_micros(r.exec_micros));
                        self.stats.row_mut(self.cycle, strategy).exec += et;
                        self.observe(input, &r, Some(parent), strategy)?;
                    }
                }
            }
        }
        Ok(Ok(()))
    }

    fn trim(&mut self, idx: usize) -> Result<Result<(), Halt>, CampaignError> {
        let start = Instant::now();
        let baseline = self.queue[idx].signature;
        let input = self.queue[idx].data.clone();
        let mut exec_time = Duration::ZERO;
        let cycle = self.cycle;
        let res = {
            let Campaign { pool, g, stats, execs, trim_execs, cfg, deadline, .. } = self;
            let mut oracle = |cand: &[u8]| -> Result<Signature, TrimStop> {
                if cfg.max_execs.is_some_and(|m| *execs >= m) || deadline.is_some_and(|d| Instant::now() >= d) {
                    return Err(TrimStop::Halt);
                }
                *execs += 1;
                *trim_execs += 1;
                stats.row_mut(cycle, StatKey::Trim).generated += 1;
                let r = pool.run(cand).map_err(|_| TrimStop::Harness)?;
                exec_time += Duration::from_micros(r.exec_micros);
                Ok(r.signature())
            };
            tree_trim_from(&input, baseline, g, &mut oracle)
        };
        let (outcome, stop) = match res {
            Ok(o) => (o, None),
            Err(TrimAborted { partial, error }) => (partial, Some(error)),
        };
        let total = start.elapsed();
        {
            let (et, pt) = (self.timed(exec_time), self.timed(total.saturating_sub(exec_time)));
            let row = self.stats.row_mut(self.cycle, StatKey::Trim);
            row.applications += 1;
            row.exec += et;
            row.parse += pt;
        }
        let changed = outcome.trimmed != input;
        let e = &mut self.queue[idx];
        e.trimmed = true;
        if changed {
            e.data = outcome.trimmed;
            e.parses = outcome.still_parses;
            let path = self.out.join("queue").join(e.file_name());
            write_file(&path, &e.data)?;
        }
        match stop {
            Some(TrimStop::Halt) => Ok(Err(Halt)),
            Some(TrimStop::Harness) => {
                self.target_errors += 1;
                Ok(Ok(()))
            }
            None => Ok(Ok(())),
        }
    }

    fn log_dictionary(&mut self, idx: usize, data: &[u8]) -> Result<(), CampaignError> {
        let runs = locate_token_runs(data);
        let inner: usize = runs.iter().map(|r| r.end - r.start - 1).sum();
        let positions = data.len() - inner;
        let tokens = self.dict.len();
        let row = [
            self.cycle.to_string(),
            self.queue[idx].id.to_string(),
            data.len().to_string(),
            positions.to_string(),
            tokens.to_string(),
            (tokens * (2 * positions + 1)).to_string(),
            (tokens * (2 * data.len() + 1)).to_string(),
        ];
        let path = self.out.join("dictionary.csv");
        self.dict_log.write_record(&row).map_err(|e| CampaignError::Io { path, source: e.into() })
    }

    /// Run the whole pipeline on one entry. Returns the number of entries
    /// admitted, or `Err(Halt)` when the budget ran out.
    fn fuzz_one(&mut self, idx: usize) -> Result<Result<usize, Halt>, CampaignError> {
        macro_rules! go {
            ($e:expr) => {
                if let Err(Halt) = $e? {
                    return Ok(Err(Halt));
                }
            };
        }
        let before = self.queue.len();
        if !self.queue[idx].trimmed {
            go!(self.trim(idx));
        }
        let data = self.queue[idx].data.clone();

        if self.cfg.deterministic && !self.queue[idx].visited {
            let mut stages = deterministic_stages(&data);
            loop {
                let t = Instant::now();
                let Some(b) = stages.next() else { break };
                go!(self.run_batch(idx, b.strategy, b.mutants, t.elapsed(), Duration::ZERO));
            }
        }
        self.queue[idx].visited = true;

        if self.cfg.dictionary != DictMode::Off && !self.dict.is_empty() {
            let t = Instant::now();
            let batches = match self.cfg.dictionary {
                DictMode::Enhanced => dictionary_mutate(&data, &self.dict),
                _ => naive_dictionary_mutate(&data, &self.dict),
            };
            let per = t.elapsed() / batches.len().max(1) as u32;
            self.log_dictionary(idx, &data)?;
            for b in batches {
                go!(self.run_batch(idx, b.strategy, b.mutants, per, Duration::ZERO));
            }
        }

        let t = Instant::now();
        let b = havoc(&data, &mut self.rng, self.cfg.havoc_budget);
        go!(self.run_batch(idx, Strategy::Havoc, b.mutants, t.elapsed(), Duration::ZERO));

        if self.queue.len() >= 2 && self.cfg.splice_budget > 0 {
            let t = Instant::now();
            let mut mutants = Vec::new();
            for _ in 0..self.cfg.splice_budget {
                let mut p = self.rng.gen_range(0..self.queue.len() - 1);
                if p >= idx {
                    p += 1;
                }
                if let Some(s) = splice_inputs(&data, &self.queue[p].data, &mut self.rng) {
                    mutants.push(havoc_one(&s, &mut self.rng));
                }
            }
            go!(self.run_batch(idx, Strategy::Splice, mutants, t.elapsed(), Duration::ZERO));
        }

        if self.cfg.tree && self.queue[idx].parses {
            let limits = TreeLimits { same_kind: self.cfg.tree_same_kind, ..TreeLimits::default() };
            let partner = match self.cfg.partner {
                PartnerPolicy::Uniform => Some(self.rng.gen_range(0..self.queue.len())),
                PartnerPolicy::Parsable => {
                    let ok: Vec<usize> = (0..self.queue.len()).filter(|&i| self.queue[i].parses).collect();
                    Some(ok[self.rng.gen_range(0..ok.len())])
                }
            };
            let t = Instant::now();
            let tar_tree = parse(&self.g, &data);
            let pro_tree = partner
                .map(|p| &self.queue[p].data)
                .filter(|d| d.len() <= limits.max_input)
                .and_then(|d| parse(&self.g, d).ok());
            let parse_time = t.elapsed();
            if let Ok(tar_tree) = tar_tree {
                let t = Instant::now();
                let b = tree_mutate_parsed(&tar_tree, pro_tree.as_ref(), &mut self.rng, &limits);
                go!(self.run_batch(idx, Strategy::Tree, b.mutants, t.elapsed(), parse_time));
            }
        }
        Ok(Ok(self.queue.len() - before))
    }

    fn status(&self) -> Status {
        Status {
            cycle: self.cycle,
            queue_len: self.queue.len(),
            edges: self.virgin.edges_seen(),
            crashes: self.crashes.len(),
            hangs: self.hangs.len(),
            execs: self.execs,
        }
    }
}

fn prepare_out_dir(out: &Path) -> Result<(), CampaignError> {
    if out.exists() {
        let mut it = fs::read_dir(out).map_err(io_err(out))?;
        if it.next().is_some() {
            return Err(CampaignError::OutDirNotEmpty(out.to_path_buf()));
        }
    }
    for sub in ["queue", "crashes", "hangs"] {
        let p = out.join(sub);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    Ok(())
}

fn write_manifest(out: &Path, m: &Manifest) -> Result<(), CampaignError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| CampaignError::Manifest(e.to_string()))?;
    write_file(&out.join("manifest.json"), format!("{text}\n").as_bytes())
}

fn run_inner(cfg: &CampaignConfig, on_status: &mut (dyn FnMut(&Status) + Send)) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let grammar_text = fs::read(&cfg.grammar).map_err(io_err(&cfg.grammar))?;
    let g = load_grammar_file(&cfg.grammar)?;
    let target = cfg.target.spec(cfg.timeout())?;
    let seeds = load_seeds(&cfg.seed_dirs)?;
    if seeds.is_empty() {
        return Err(CampaignError::NoSeeds);
    }
    let user_dict = match &cfg.dict {
        Some(p) => parse_dictionary(&fs::read_to_string(p).map_err(io_err(p))?, Origin::User)?,
        None => Dictionary::new(),
    };
    let out = cfg.out_dir.clone();
    prepare_out_dir(&out)?;
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        grammar_sha256: sha256_hex(&grammar_text),
        seeds: seeds.iter().map(|(p, d)| SeedRecord { path: p.clone(), sha256: sha256_hex(d) }).collect(),
        result: None,
    };
    write_manifest(&out, &manifest)?;

    let log_path = out.join("admitted.log");
    let admitted_log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
    let dict_path = out.join("dictionary.csv");
    let mut dict_log = csv::Writer::from_path(&dict_path).map_err(|e| CampaignError::Io { path: dict_path.clone(), source: e.into() })?;
    dict_log
        .write_record(["cycle", "entry", "len", "positions", "tokens", "enhanced", "naive"])
        .map_err(|e| CampaignError::Io { path: dict_path.clone(), source: e.into() })?;

    let mut c = Campaign {
        cfg,
        g,
        dict: Dictionary::new(),
        pool: ExecPool::new(&target, cfg.workers)?,
        rng: random_source(cfg.rng_seed),
        queue: Vec::new(),
        virgin: VirginMap::new(),
        stats: StatsTable::default(),
        crashes: BTreeMap::new(),
        hangs: BTreeMap::new(),
        admitted: Vec::new(),
        execs: 0,
        seed_execs: 0,
        trim_execs: 0,
        target_errors: 0,
        cycle: 0,
        deadline: cfg.wall_clock_secs.map(|s| Instant::now() + Duration::from_secs(s)),
        out: out.clone(),
        admitted_log,
        dict_log,
    };

    // Seeds: distill, strip comments, admit.
    let raw: Vec<Vec<u8>> = seeds.into_iter().map(|(_, d)| d).collect();
    let mut seed_runs = 0u64;
    let distilled = if cfg.distill {
        let pool = &mut c.pool;
        distill_with(&raw, &mut |i| {
            seed_runs += 1;
            pool.run(i)
        })?
    } else {
        raw
    };
    let mut seen = HashSet::new();
    let stripped: Vec<Vec<u8>> =
        distilled.iter().map(|s| strip_comments(s, &c.g)).filter(|s| seen.insert(s.clone())).collect();
    c.dict.merge(&user_dict);
    c.dict.merge(&extract_auto_tokens(&stripped, &c.g));
    write_file(&out.join("dictionary.txt"), c.dict.to_file_string().as_bytes())?;
    c.execs += seed_runs;
    c.seed_execs += seed_runs;
    c.stats.row_mut(0, Strategy::Seed).generated += seed_runs;
    for s in &stripped {
        let r = c.pool.run(s)?;
        c.execs += 1;
        c.seed_execs += 1;
        c.stats.row_mut(0, Strategy::Seed).generated += 1;
        if r.is_fault() {
            c.record_fault(&r, s, Strategy::Seed, None)?;
            continue;
        }
        c.virgin.update(&r.map);
        c.stats.row_mut(0, Strategy::Seed).interesting += 1;
        c.admit(s, &r, None, Strategy::Seed, "seed")?;
    }
    if c.queue.is_empty() {
        return Err(CampaignError::AllSeedsFault);
    }
    on_status(&c.status());

    let mut cycles_completed = 0;
    let stop = 'cycles: loop {
        if cfg.cycles.is_some_and(|n| cycles_completed >= n) {
            break StopReason::CycleLimit;
        }
        if let Some(r) = c.out_of_budget() {
            break r;
        }
        c.cycle = cycles_completed + 1;
        let len = c.queue.len();
        for idx in 0..len {
            if let Err(Halt) = c.fuzz_one(idx)? {
                break 'cycles c.out_of_budget().unwrap_or(StopReason::ExecLimit);
            }
            on_status(&c.status());
        }
        cycles_completed += 1;
    };

    c.admitted_log.flush().map_err(io_err(&log_path))?;
    c.dict_log.flush().map_err(io_err(&dict_path))?;
    let stats_path = out.join("stats.csv");
    let f = File::create(&stats_path).map_err(io_err(&stats_path))?;
    c.stats.write_csv(f).map_err(|e| CampaignError::Io { path: stats_path.clone(), source: e.into() })?;

    let summary = RunSummary {
        total_execs: c.execs,
        seed_execs: c.seed_execs,
        trim_execs: c.trim_execs,
        cycles_completed,
        queue_len: c.queue.len(),
        edges: c.virgin.edges_seen(),
        crashes: c.crashes.len(),
        hangs: c.hangs.len(),
        target_errors: c.target_errors,
        stop,
    };
    manifest.result = Some(summary.clone());
    write_manifest(&out, &manifest)?;
    on_status(&c.status());

    Ok(CampaignReport {
        out_dir: out,
        summary,
        queue: c.queue,
        admitted: c.admitted,
        crashes: c.crashes.into_values().collect(),
        hangs: c.hangs.into_values().collect(),
        stats: c.stats,
    })
}

/// Run a campaign on a large-stack thread, reporting progress through
/// `on_status` after the seeds, after every entry, and at the end.
pub fn run_campaign_with(
    cfg: &CampaignConfig,
    on_status: &mut (dyn FnMut(&Status) + Send),
) -> Result<CampaignReport, CampaignError> {
    thread::scope(|s| {
        thread::Builder::new()
            .name("campaign".into())
            .stack_size(STACK_SIZE)
            .spawn_scoped(s, || run_inner(cfg, on_status))
            .map_err(io_err(Path::new("<thread>")))?
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    run_campaign_with(cfg, &mut |_| {})
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub report: CampaignReport,
    /// The original run's admitted log, when it sits next to the manifest.
    pub original: Option<Vec<AdmittedRecord>>,
    /// Index of the first admitted entry whose hash differs.
    pub first_divergence: Option<usize>,
}

impl ReplayReport {
    pub fn matches(&self) -> Option<bool> {
        self.original.as_ref().map(|_| self.first_divergence.is_none())
    }
}

/// Rerun the campaign described by a manifest into `out_dir`. A finished
/// run's execution count becomes the stop condition, so time-limited runs
/// replay exactly too.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<ReplayReport, CampaignError> {
    let m = load_manifest(manifest_path)?;
    let mut cfg = m.config.clone();
    cfg.out_dir = out_dir.to_path_buf();
    if let Some(r) = &m.result {
        cfg.max_execs = Some(r.total_execs);
        cfg.wall_clock_secs = None;
    }
    let grammar_text = fs::read(&cfg.grammar).map_err(io_err(&cfg.grammar))?;
    if sha256_hex(&grammar_text) != m.grammar_sha256 {
        return Err(CampaignError::Manifest("grammar file changed since the original run".into()));
    }
    let seeds = load_seeds(&cfg.seed_dirs)?;
    let now: Vec<SeedRecord> = seeds.iter().map(|(p, d)| SeedRecord { path: p.clone(), sha256: sha256_hex(d) }).collect();
    if now != m.seeds {
        return Err(CampaignError::Manifest("seed files changed since the original run".into()));
    }
    let report = run_campaign(&cfg)?;
    let log = manifest_path.parent().map(|d| d.join("admitted.log"));
    let original = match log {
        Some(p) if p.exists() => Some(read_admitted_log(&p)?),
        _ => None,
    };
    let first_divergence = original.as_ref().and_then(|o| {
        let a: Vec<&str> = o.iter().map(|r| r.sha256.as_str()).collect();
        let b: Vec<&str> = report.admitted.iter().map(|r| r.sha256.as_str()).collect();
        (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i))
    });
    Ok(ReplayReport { report, original, first_divergence })
}
