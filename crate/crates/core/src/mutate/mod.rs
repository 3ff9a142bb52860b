//! Mutation strategies: the classic deterministic and random byte-level
//! stages, token-boundary dictionary mutation and subtree replacement.

mod deterministic;
mod dictionary;
mod havoc;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use deterministic::{deterministic_stages, DeterministicStages, ARITH_MAX, INTERESTING_16, INTERESTING_32, INTERESTING_8, MAX_BATCH};
pub use dictionary::{
    dictionary_mutate, extract_auto_tokens, locate_token_runs, naive_dictionary_mutate, parse_dictionary,
    DictError, Dictionary, DictMode, Origin, TokenRun, AUTO_RUNS, MAX_TOKEN_LEN,
};
pub use havoc::{havoc, havoc_one, splice_inputs, MAX_INPUT_LEN};
pub use tree::{tree_mutate, tree_mutate_parsed, TreeLimits};

/// Random source used by every stochastic stage: ChaCha with 8 rounds, seeded
/// from a 64-bit value through `SeedableRng::seed_from_u64`.
pub type RandomSource = ChaCha8Rng;

pub fn random_source(seed: u64) -> RandomSource {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The stage that produced a mutant (or `Seed` for initial inputs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Strategy {
    Seed,
    Flip1,
    Flip2,
    Flip4,
    Flip8,
    Flip16,
    Flip32,
    Arith8,
    Arith16,
    Arith32,
    Interest8,
    Interest16,
    Interest32,
    /// Insertion of user-supplied tokens.
    UserInsert,
    /// Overwrite with user-supplied tokens.
    UserOverwrite,
    /// Insertion of automatically extracted tokens.
    AutoInsert,
    /// Overwrite with automatically extracted tokens.
    AutoOverwrite,
    Havoc,
    Splice,
    Tree,
}

impl Strategy {
    pub const ALL: [Strategy; 20] = [
        Strategy::Seed,
        Strategy::Flip1,
        Strategy::Flip2,
        Strategy::Flip4,
        Strategy::Flip8,
        Strategy::Flip16,
        Strategy::Flip32,
        Strategy::Arith8,
        Strategy::Arith16,
        Strategy::Arith32,
        Strategy::Interest8,
        Strategy::Interest16,
        Strategy::Interest32,
        Strategy::UserInsert,
        Strategy::UserOverwrite,
        Strategy::AutoInsert,
        Strategy::AutoOverwrite,
        Strategy::Havoc,
        Strategy::Splice,
        Strategy::Tree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Seed => "seed",
            Strategy::Flip1 => "flip1",
            Strategy::Flip2 => "flip2",
            Strategy::Flip4 => "flip4",
            Strategy::Flip8 => "flip8",
            Strategy::Flip16 => "flip16",
            Strategy::Flip32 => "flip32",
            Strategy::Arith8 => "arith8",
            Strategy::Arith16 => "arith16",
            Strategy::Arith32 => "arith32",
            Strategy::Interest8 => "interest8",
            Strategy::Interest16 => "interest16",
            Strategy::Interest32 => "interest32",
            Strategy::UserInsert => "ui",
            Strategy::UserOverwrite => "uo",
            Strategy::AutoInsert => "ai",
            Strategy::AutoOverwrite => "ao",
            Strategy::Havoc => "havoc",
            Strategy::Splice => "splice",
            Strategy::Tree => "tree",
        }
    }

    /// Bit and byte flips.
    pub fn is_flip(self) -> bool {
        matches!(
            self,
            Strategy::Flip1 | Strategy::Flip2 | Strategy::Flip4 | Strategy::Flip8 | Strategy::Flip16 | Strategy::Flip32
        )
    }

    pub fn is_dictionary(self) -> bool {
        matches!(self, Strategy::UserInsert | Strategy::UserOverwrite | Strategy::AutoInsert | Strategy::AutoOverwrite)
    }

    pub fn is_dictionary_overwrite(self) -> bool {
        matches!(self, Strategy::UserOverwrite | Strategy::AutoOverwrite)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy `{0}`")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

impl TryFrom<String> for Strategy {
    type Error = UnknownStrategy;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationBatch {
    pub strategy: Strategy,
    pub mutants: Vec<Vec<u8>>,
    /// Mutants produced before any cap was applied.
    pub generated_count: usize,
}

impl MutationBatch {
    pub fn new(strategy: Strategy, mutants: Vec<Vec<u8>>) -> Self {
        MutationBatch { strategy, generated_count: mutants.len(), mutants }
    }

    pub fn empty(strategy: Strategy) -> Self {
        Self::new(strategy, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("flip3".parse::<Strategy>().is_err());
        assert_eq!(serde_json::to_string(&Strategy::Tree).unwrap(), "\"tree\"");
    }
}
