use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use gramfuzz::campaign::{
    distill_corpus, load_grammar_file, load_seeds, replay, run_campaign_with, sha256_hex, strip_comments, CampaignConfig,
    CampaignError, PartnerPolicy, Status, TargetConfig,
};
use gramfuzz::grammar::{parse, GrammarSpec};
use gramfuzz::harness::{HarnessError, TargetSpec};
use gramfuzz::mutate::{
    deterministic_stages, dictionary_mutate, extract_auto_tokens, havoc, havoc_one, naive_dictionary_mutate,
    parse_dictionary, random_source, splice_inputs, tree_mutate, DictMode, Dictionary, MutationBatch, Origin, Strategy,
    TreeLimits,
};
use gramfuzz::report::{build_report, write_report, ReportError};
use gramfuzz::trim::{builtin_trim, tree_trim, TrimAborted, TrimOutcome};

#[derive(Parser)]
#[command(name = "gramfuzz", version, about = "Grammar-aware coverage-guided fuzzer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a fuzzing campaign.
    Fuzz(FuzzArgs),
    /// Distill a seed corpus to a coverage-preserving subset.
    Cmin(CminArgs),
    /// Trim one input while keeping its coverage signature.
    Trim(TrimArgs),
    /// Write the mutants of one strategy for one input.
    Mutate(MutateArgs),
    /// Build strategy-comparison tables and plots from a campaign directory.
    Report(ReportArgs),
    /// Rerun a campaign from its manifest and compare admissions.
    Replay(ReplayArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// Built-in target name (plist, minijs).
    #[arg(long)]
    target: Option<String>,
    /// External command; `@@` is replaced by the input file path.
    #[arg(long)]
    cmd: Option<String>,
}

impl TargetArgs {
    fn config(&self) -> Result<TargetConfig, Fail> {
        match (&self.target, &self.cmd) {
            (Some(name), _) => Ok(TargetConfig::Builtin { name: name.clone() }),
            (None, Some(cmd)) => {
                let argv = shlex::split(cmd).ok_or_else(|| Fail::Usage(format!("cannot split command: {cmd}")))?;
                Ok(TargetConfig::Command { argv })
            }
            _ => Err(Fail::Usage("give --target or --cmd".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DictArg {
    Enhanced,
    Naive,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartnerArg {
    Uniform,
    Parsable,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    /// Seed directory; repeat for more.
    #[arg(long, required = true)]
    seeds: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// User dictionary file.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    minutes: Option<u64>,
    #[arg(long)]
    max_execs: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 1000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 256)]
    havoc_budget: usize,
    #[arg(long, default_value_t = 32)]
    splice_budget: usize,
    /// Only replace subtrees with subtrees of the same grammar rule.
    #[arg(long)]
    tree_same_kind: bool,
    #[arg(long)]
    no_tree: bool,
    #[arg(long)]
    no_deterministic: bool,
    #[arg(long)]
    no_distill: bool,
    #[arg(long, value_enum, default_value = "enhanced")]
    dictionary: DictArg,
    #[arg(long, value_enum, default_value = "uniform")]
    partner: PartnerArg,
    /// Record phase timings in stats.csv (makes it non-reproducible).
    #[arg(long)]
    record_timings: bool,
}

#[derive(Args)]
struct CminArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, required = true)]
    seeds: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Strip comments from survivors using this grammar.
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    timeout_ms: u64,
}

#[derive(Args)]
struct TrimArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long)]
    input: PathBuf,
    /// Where to write the trimmed input; defaults to INPUT.trimmed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Byte-chunk trimming only.
    #[arg(long)]
    builtin: bool,
    #[arg(long, default_value_t = 1000)]
    timeout_ms: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutateStrategy {
    Deterministic,
    Dictionary,
    NaiveDictionary,
    Havoc,
    Splice,
    Tree,
}

#[derive(Args)]
struct MutateArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    strategy: MutateStrategy,
    /// Output directory for mutants.
    #[arg(long)]
    out: PathBuf,
    /// Second input for splice and tree mutation; defaults to INPUT.
    #[arg(long)]
    partner: Option<PathBuf>,
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Number of havoc or splice mutants.
    #[arg(long, default_value_t = 256)]
    count: usize,
    #[arg(long)]
    tree_same_kind: bool,
    /// Stop after writing this many mutants.
    #[arg(long, default_value_t = 100_000)]
    limit: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Campaign output directory.
    #[arg(long)]
    out: PathBuf,
    /// Report directory; defaults to OUT/report.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// `Usage` exits with 2, `Fatal` with 1.
enum Fail {
    Usage(String),
    Fatal(String),
}

impl From<CampaignError> for Fail {
    fn from(e: CampaignError) -> Self {
        let msg = e.to_string();
        match e {
            CampaignError::Config(_)
            | CampaignError::Grammar { .. }
            | CampaignError::Dict(_)
            | CampaignError::OutDirNotEmpty(_)
            | CampaignError::NoSeeds
            | CampaignError::Manifest(_)
            | CampaignError::Harness(HarnessError::UnknownTarget(_) | HarnessError::EmptyCommand) => Fail::Usage(msg),
            _ => Fail::Fatal(msg),
        }
    }
}

impl From<HarnessError> for Fail {
    fn from(e: HarnessError) -> Self {
        CampaignError::from(e).into()
    }
}

fn need_file(p: &Path, what: &str) -> Result<(), Fail> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Fail::Usage(format!("{what} {} is not a file", p.display())))
    }
}

fn need_dir(p: &Path, what: &str) -> Result<(), Fail> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Fail::Usage(format!("{what} {} is not a directory", p.display())))
    }
}

fn read(p: &Path) -> Result<Vec<u8>, Fail> {
    fs::read(p).map_err(|e| Fail::Usage(format!("{}: {e}", p.display())))
}

fn write(p: &Path, data: &[u8]) -> Result<(), Fail> {
    fs::write(p, data).map_err(|e| Fail::Fatal(format!("{}: {e}", p.display())))
}

fn grammar(p: &Path) -> Result<GrammarSpec, Fail> {
    need_file(p, "grammar")?;
    Ok(load_grammar_file(p)?)
}

fn target_spec(t: &TargetArgs, timeout_ms: u64) -> Result<TargetSpec, Fail> {
    Ok(t.config()?.spec(Duration::from_millis(timeout_ms))?)
}

fn status_line(s: &Status) -> String {
    format!(
        "cycle={} queue={} edges={} crashes={} hangs={} execs={}",
        s.cycle, s.queue_len, s.edges, s.crashes, s.hangs, s.execs
    )
}

fn cmd_fuzz(a: FuzzArgs) -> Result<(), Fail> {
    need_file(&a.grammar, "grammar")?;
    for d in &a.seeds {
        need_dir(d, "seed directory")?;
    }
    if let Some(d) = &a.dict {
        need_file(d, "dictionary")?;
    }
    // Absolute paths keep the manifest replayable from any directory.
    let abs = |p: &Path| fs::canonicalize(p).map_err(|e| Fail::Usage(format!("{}: {e}", p.display())));
    let out = match a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) if parent.is_dir() => abs(parent)?.join(a.out.file_name().unwrap_or_default()),
        _ => a.out.clone(),
    };
    let mut cfg = CampaignConfig::new(abs(&a.grammar)?, a.target.config()?, abs(&a.seeds[0])?, out);
    cfg.seed_dirs = a.seeds.iter().map(|d| abs(d)).collect::<Result<_, _>>()?;
    cfg.dict = a.dict.as_deref().map(abs).transpose()?;
    cfg.rng_seed = a.rng_seed;
    cfg.workers = a.workers;
    cfg.timeout_ms = a.timeout_ms;
    cfg.havoc_budget = a.havoc_budget;
    cfg.splice_budget = a.splice_budget;
    cfg.tree = !a.no_tree;
    cfg.tree_same_kind = a.tree_same_kind;
    cfg.deterministic = !a.no_deterministic;
    cfg.distill = !a.no_distill;
    cfg.dictionary = match a.dictionary {
        DictArg::Enhanced => DictMode::Enhanced,
        DictArg::Naive => DictMode::Naive,
        DictArg::Off => DictMode::Off,
    };
    cfg.partner = match a.partner {
        PartnerArg::Uniform => PartnerPolicy::Uniform,
        PartnerArg::Parsable => PartnerPolicy::Parsable,
    };
    cfg.cycles = a.cycles;
    cfg.wall_clock_secs = a.minutes.map(|m| m * 60);
    cfg.max_execs = a.max_execs;
    cfg.record_timings = a.record_timings;
    if cfg.cycles.is_none() && cfg.wall_clock_secs.is_none() && cfg.max_execs.is_none() {
        return Err(Fail::Usage("give --cycles, --minutes or --max-execs".into()));
    }
    let mut last: Option<Instant> = None;
    let mut on_status = |s: &Status| {
        if last.is_none_or(|t| t.elapsed() >= Duration::from_secs(1)) {
            println!("{}", status_line(s));
            last = Some(Instant::now());
        }
    };
    let r = run_campaign_with(&cfg, &mut on_status)?;
    let s = &r.summary;
    println!(
        "done stop={:?} cycles={} queue={} edges={} crashes={} hangs={} execs={}",
        s.stop, s.cycles_completed, s.queue_len, s.edges, s.crashes, s.hangs, s.total_execs
    );
    for f in r.crashes.iter().chain(&r.hangs) {
        println!("fault {} {} strategy={} exec={} hits={}", f.status, f.key, f.strategy, f.found_at_exec, f.hits);
    }
    Ok(())
}

fn cmd_cmin(a: CminArgs) -> Result<(), Fail> {
    for d in &a.seeds {
        need_dir(d, "seed directory")?;
    }
    let g = a.grammar.as_deref().map(grammar).transpose()?;
    let spec = target_spec(&a.target, a.timeout_ms)?;
    let seeds = load_seeds(&a.seeds)?;
    let names: Vec<String> = seeds.iter().map(|(p, _)| p.clone()).collect();
    let data: Vec<Vec<u8>> = seeds.into_iter().map(|(_, d)| d).collect();
    let kept = distill_corpus(&data, &spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Fail::Fatal(format!("{}: {e}", a.out.display())))?;
    for k in &kept {
        let i = data.iter().position(|d| d == k).expect("survivor comes from the input");
        let name = Path::new(&names[i]).file_name().map_or_else(|| format!("seed{i}"), |n| n.to_string_lossy().into_owned());
        let out = match &g {
            Some(g) => strip_comments(k, g),
            None => k.clone(),
        };
        write(&a.out.join(name), &out)?;
    }
    println!("kept {} of {}", kept.len(), data.len());
    Ok(())
}

fn cmd_trim(a: TrimArgs) -> Result<(), Fail> {
    need_file(&a.input, "input")?;
    let g = grammar(&a.grammar)?;
    let spec = target_spec(&a.target, a.timeout_ms)?;
    let input = read(&a.input)?;
    let mut ex = spec.executor()?;
    let mut oracle = |c: &[u8]| ex.execute(c).map(|r| r.signature());
    let res = if a.builtin { builtin_trim(&input, &mut oracle) } else { tree_trim(&input, &g, &mut oracle) };
    let (o, err): (TrimOutcome, Option<HarnessError>) = match res {
        Ok(o) => (o, None),
        Err(TrimAborted { partial, error }) => (partial, Some(error)),
    };
    let mut cur = input.clone();
    for s in &o.steps {
        println!("removed {:?}", String::from_utf8_lossy(&cur[s.removed.start..s.removed.end]));
        cur.drain(s.removed.start..s.removed.end);
    }
    println!(
        "original={} trimmed={} removed={} mode={} still_parses={} execs={}",
        input.len(),
        o.trimmed.len(),
        o.bytes_removed,
        o.mode.as_str(),
        o.still_parses,
        o.executions_used
    );
    let out = a.out.unwrap_or_else(|| {
        let mut p = a.input.clone().into_os_string();
        p.push(".trimmed");
        p.into()
    });
    write(&out, &o.trimmed)?;
    match err {
        Some(e) => Err(Fail::Fatal(format!("trimming stopped early: {e}"))),
        None => Ok(()),
    }
}

fn cmd_mutate(a: MutateArgs) -> Result<(), Fail> {
    need_file(&a.input, "input")?;
    let g = grammar(&a.grammar)?;
    let input = read(&a.input)?;
    let partner = match &a.partner {
        Some(p) => {
            need_file(p, "partner")?;
            read(p)?
        }
        None => input.clone(),
    };
    let mut rng = random_source(a.rng_seed);
    let batches: Vec<MutationBatch> = match a.strategy {
        MutateStrategy::Deterministic => deterministic_stages(&input).collect(),
        MutateStrategy::Dictionary | MutateStrategy::NaiveDictionary => {
            let mut d = Dictionary::new();
            if let Some(p) = &a.dict {
                need_file(p, "dictionary")?;
                let text = String::from_utf8_lossy(&read(p)?).into_owned();
                d.merge(&parse_dictionary(&text, Origin::User).map_err(|e| Fail::Usage(e.to_string()))?);
            }
            d.merge(&extract_auto_tokens(std::slice::from_ref(&input), &g));
            if matches!(a.strategy, MutateStrategy::Dictionary) {
                dictionary_mutate(&input, &d)
            } else {
                naive_dictionary_mutate(&input, &d)
            }
        }
        MutateStrategy::Havoc => vec![havoc(&input, &mut rng, a.count)],
        MutateStrategy::Splice => {
            let m = (0..a.count)
                .filter_map(|_| splice_inputs(&input, &partner, &mut rng).map(|s| havoc_one(&s, &mut rng)))
                .collect();
            vec![MutationBatch::new(Strategy::Splice, m)]
        }
        MutateStrategy::Tree => {
            if parse(&g, &input).is_err() {
                return Err(Fail::Usage(format!("{} does not parse", a.input.display())));
            }
            let limits = TreeLimits { same_kind: a.tree_same_kind, ..TreeLimits::default() };
            vec![tree_mutate(&input, &partner, &g, &mut rng, &limits)]
        }
    };
    fs::create_dir_all(&a.out).map_err(|e| Fail::Fatal(format!("{}: {e}", a.out.display())))?;
    let mut n = 0;
    for b in &batches {
        let mut wrote = 0;
        for m in &b.mutants {
            if n == a.limit {
                break;
            }
            write(&a.out.join(format!("{:06}_{}", n, b.strategy)), m)?;
            n += 1;
            wrote += 1;
        }
        println!("{} generated={} written={}", b.strategy, b.generated_count, wrote);
    }
    println!("wrote {n} mutants of {}", sha256_hex(&input));
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), Fail> {
    let r = build_report(&a.out).map_err(|e| match e {
        ReportError::Io { .. } => Fail::Fatal(e.to_string()),
        _ => Fail::Usage(e.to_string()),
    })?;
    let dir = a.report_dir.unwrap_or_else(|| a.out.join("report"));
    let w = write_report(&r, &dir).map_err(|e| Fail::Fatal(e.to_string()))?;
    for p in w.csv.iter().chain(&w.svg) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<(), Fail> {
    need_file(&a.manifest, "manifest")?;
    let r = replay(&a.manifest, &a.out)?;
    println!("replayed admitted={} execs={}", r.report.admitted.len(), r.report.summary.total_execs);
    match (r.matches(), r.first_divergence) {
        (Some(true), _) => {
            println!("admitted sequence matches");
            Ok(())
        }
        (Some(false), Some(i)) => Err(Fail::Fatal(format!("admitted sequence diverges at entry {i}"))),
        _ => {
            println!("no original admitted.log to compare");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Fuzz(a) => cmd_fuzz(a),
        Cmd::Cmin(a) => cmd_cmin(a),
        Cmd::Trim(a) => cmd_trim(a),
        Cmd::Mutate(a) => cmd_mutate(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Replay(a) => cmd_replay(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Fatal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
