use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;

use super::{MutationBatch, Strategy};
use crate::grammar::{enumerate_subtrees, parse, splice, GrammarSpec, ParseTree, RuleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLimits {
    /// Inputs longer than this are neither mutated nor used as a provider.
    pub max_input: usize,
    /// Provider subtrees longer than this are left out of the pool.
    pub max_subtree: usize,
    /// The pool is uniformly sampled down to this many subtrees.
    pub max_pool: usize,
    /// Mutants per invocation.
    pub max_mutants: usize,
    /// Only replace a subtree with one of the same nonterminal.
    pub same_kind: bool,
}

impl Default for TreeLimits {
    fn default() -> Self {
        TreeLimits { max_input: 10_000, max_subtree: 200, max_pool: 10_000, max_mutants: 10_000, same_kind: false }
    }
}

/// Replace each subtree of `tar` with each pooled subtree of `tar` and `pro`.
///
/// The pool holds `tar`'s subtrees followed by `pro`'s (when `pro` parses),
/// minus those over `max_subtree` bytes. Replacement is a byte splice, so
/// mutants are not re-validated. When the number of (target, pool) pairs
/// exceeds `max_mutants` a uniform sample of pairs is kept, in enumeration
/// order.
pub fn tree_mutate<R: Rng + ?Sized>(
    tar: &[u8],
    pro: &[u8],
    g: &GrammarSpec,
    rng: &mut R,
    limits: &TreeLimits,
) -> MutationBatch {
    if tar.len() > limits.max_input {
        return MutationBatch::empty(Strategy::Tree);
    }
    let Ok(tar_tree) = parse(g, tar) else {
        return MutationBatch::empty(Strategy::Tree);
    };
    let pro_tree = if pro.len() <= limits.max_input { parse(g, pro).ok() } else { None };
    tree_mutate_parsed(&tar_tree, pro_tree.as_ref(), rng, limits)
}

/// [`tree_mutate`] on already parsed inputs.
pub fn tree_mutate_parsed<R: Rng + ?Sized>(
    tar_tree: &ParseTree,
    pro_tree: Option<&ParseTree>,
    rng: &mut R,
    limits: &TreeLimits,
) -> MutationBatch {
    let tar = &tar_tree.source[..];
    if tar.len() > limits.max_input {
        return MutationBatch::empty(Strategy::Tree);
    }
    let targets = enumerate_subtrees(tar_tree, None);

    let mut pool: Vec<(&[u8], RuleId)> = Vec::new();
    for s in enumerate_subtrees(tar_tree, Some(limits.max_subtree)) {
        pool.push((&tar[s.span.start..s.span.end], s.kind));
    }
    if let Some(pt) = pro_tree.filter(|t| t.source.len() <= limits.max_input) {
        for s in enumerate_subtrees(pt, Some(limits.max_subtree)) {
            pool.push((&pt.source[s.span.start..s.span.end], s.kind));
        }
    }
    if pool.len() > limits.max_pool {
        let mut keep = index::sample(rng, pool.len(), limits.max_pool).into_vec();
        keep.sort_unstable();
        pool = keep.into_iter().map(|i| pool[i]).collect();
    }

    // Pool indices usable for each target: all of them, or those of the
    // target's kind.
    let all: Vec<usize> = (0..pool.len()).collect();
    let mut by_kind: HashMap<RuleId, Vec<usize>> = HashMap::new();
    if limits.same_kind {
        for (i, (_, k)) in pool.iter().enumerate() {
            by_kind.entry(*k).or_default().push(i);
        }
    }
    let none = Vec::new();
    let candidates: Vec<&Vec<usize>> = targets
        .iter()
        .map(|t| if limits.same_kind { by_kind.get(&t.kind).unwrap_or(&none) } else { &all })
        .collect();
    let mut offsets = Vec::with_capacity(targets.len() + 1);
    let mut total = 0usize;
    for c in &candidates {
        offsets.push(total);
        total += c.len();
    }
    offsets.push(total);

    let make = |k: usize| {
        let t = offsets.partition_point(|&o| o <= k) - 1;
        let (bytes, _) = pool[candidates[t][k - offsets[t]]];
        splice(tar, targets[t].span, bytes).expect("subtree span lies within tar")
    };
    let mutants: Vec<Vec<u8>> = if total > limits.max_mutants {
        let mut pick = index::sample(rng, total, limits.max_mutants).into_vec();
        pick.sort_unstable();
        pick.into_iter().map(make).collect()
    } else {
        (0..total).map(make).collect()
    };
    MutationBatch { strategy: Strategy::Tree, mutants, generated_count: total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;
    use crate::mutate::random_source;

    fn toy() -> GrammarSpec {
        load_grammar(b"list := list item | item ; item := A | B ; A := /a/ ; B := /b/ ;").unwrap()
    }

    #[test]
    fn full_enumeration_count() {
        let g = toy();
        let tar = b"aab";
        let pro = b"babab";
        let a = enumerate_subtrees(&parse(&g, tar).unwrap(), None).len();
        let b = enumerate_subtrees(&parse(&g, pro).unwrap(), None).len();
        let batch = tree_mutate(tar, pro, &g, &mut random_source(0), &TreeLimits::default());
        assert_eq!(batch.len(), a * (a + b));
        assert_eq!(batch.generated_count, batch.len());
    }

    #[test]
    fn unparsable_inputs() {
        let g = toy();
        let l = TreeLimits::default();
        assert!(tree_mutate(b"abc", b"ab", &g, &mut random_source(0), &l).is_empty());
        let a = tree_mutate(b"ab", b"ab", &g, &mut random_source(0), &l).len();
        let b = tree_mutate(b"ab", b"zz", &g, &mut random_source(0), &l).len();
        assert!(a > b);
    }

    #[test]
    fn caps() {
        let g = toy();
        let tar: Vec<u8> = b"ab".repeat(60);
        let l = TreeLimits { max_mutants: 500, ..TreeLimits::default() };
        let batch = tree_mutate(&tar, &tar, &g, &mut random_source(3), &l);
        assert_eq!(batch.len(), 500);
        assert!(batch.generated_count > 500);
        let big = vec![b'a'; 10_001];
        assert!(tree_mutate(&big, b"ab", &g, &mut random_source(3), &l).is_empty());
    }

    #[test]
    fn same_kind_restricts() {
        let g = toy();
        let any = tree_mutate(b"ab", b"ba", &g, &mut random_source(0), &TreeLimits::default());
        let same =
            tree_mutate(b"ab", b"ba", &g, &mut random_source(0), &TreeLimits { same_kind: true, ..Default::default() });
        assert!(same.len() < any.len());
    }
}
