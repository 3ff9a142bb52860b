use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::harness::TargetSpec;
use crate::mutate::DictMode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetConfig {
    /// One of the in-process targets, by name.
    Builtin { name: String },
    /// An external program; `@@` in an argument is replaced by the input
    /// file, otherwise the input goes to stdin.
    Command { argv: Vec<String> },
}

impl TargetConfig {
    pub fn spec(&self, timeout: Duration) -> Result<TargetSpec, CampaignError> {
        let spec = match self {
            TargetConfig::Builtin { name } => TargetSpec::builtin(name)?,
            TargetConfig::Command { argv } => TargetSpec::command(argv.clone())?,
        };
        Ok(spec.with_timeout(timeout))
    }
}

/// How the tree-mutation partner is drawn from the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerPolicy {
    /// Any entry, seeds and the entry itself included.
    Uniform,
    /// Any entry that parses.
    Parsable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub grammar: PathBuf,
    pub target: TargetConfig,
    pub timeout_ms: u64,
    pub seed_dirs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// User dictionary file.
    pub dict: Option<PathBuf>,
    pub rng_seed: u64,
    pub workers: usize,
    /// Havoc mutants per entry per cycle.
    pub havoc_budget: usize,
    /// Splice-then-havoc mutants per entry per cycle.
    pub splice_budget: usize,
    pub partner: PartnerPolicy,
    pub tree: bool,
    pub tree_same_kind: bool,
    pub dictionary: DictMode,
    pub deterministic: bool,
    /// Distill the seeds before fuzzing.
    pub distill: bool,
    pub cycles: Option<u64>,
    pub wall_clock_secs: Option<u64>,
    /// Stop after this many target executions in total.
    pub max_execs: Option<u64>,
    /// Record phase timings in stats.csv. Off keeps stats.csv reproducible.
    pub record_timings: bool,
}

impl CampaignConfig {
    pub fn new(grammar: impl Into<PathBuf>, target: TargetConfig, seed_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        CampaignConfig {
            grammar: grammar.into(),
            target,
            timeout_ms: 1000,
            seed_dirs: vec![seed_dir.into()],
            out_dir: out_dir.into(),
            dict: None,
            rng_seed: 0,
            workers: 1,
            havoc_budget: 256,
            splice_budget: 32,
            partner: PartnerPolicy::Uniform,
            tree: true,
            tree_same_kind: false,
            dictionary: DictMode::Enhanced,
            deterministic: true,
            distill: true,
            cycles: Some(1),
            wall_clock_secs: None,
            max_execs: None,
            record_timings: false,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::Config(m.to_string()));
        if self.workers == 0 {
            return bad("worker count must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        if self.seed_dirs.is_empty() {
            return bad("no seed directories");
        }
        if self.cycles.is_none() && self.wall_clock_secs.is_none() && self.max_execs.is_none() {
            return bad("set a cycle, time or execution limit");
        }
        if let TargetConfig::Command { argv } = &self.target {
            if argv.is_empty() {
                return bad("empty target command");
            }
        }
        Ok(())
    }
}
