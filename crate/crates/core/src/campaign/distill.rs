use std::collections::{BTreeSet, HashSet};

use super::CampaignError;
use crate::grammar::{parse, tokenize, GrammarSpec};
use crate::harness::{ExecResult, HarnessError, TargetSpec};

/// Greedy set-cover distillation over an execution function.
///
/// Faulting seeds are dropped. Among the rest, the seed covering the most
/// not-yet-covered edges is taken repeatedly (ties go to the shorter seed,
/// then the earlier one) until every observed edge is covered. Survivors are
/// returned in their original order.
pub fn distill_with(
    seeds: &[Vec<u8>],
    exec: &mut dyn FnMut(&[u8]) -> Result<ExecResult, HarnessError>,
) -> Result<Vec<Vec<u8>>, CampaignError> {
    if seeds.is_empty() {
        return Err(CampaignError::NoSeeds);
    }
    let mut seen = HashSet::new();
    let mut cands: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    for (i, s) in seeds.iter().enumerate() {
        if !seen.insert(s.as_slice()) {
            continue;
        }
        let r = exec(s)?;
        if r.is_fault() {
            continue;
        }
        cands.push((i, r.map.edges().collect()));
    }
    if cands.is_empty() {
        return Err(CampaignError::AllSeedsFault);
    }
    let mut uncovered: BTreeSet<usize> = cands.iter().flat_map(|(_, e)| e.iter().copied()).collect();
    let mut chosen = Vec::new();
    let mut used = vec![false; cands.len()];
    while !uncovered.is_empty() {
        let best = (0..cands.len())
            .filter(|&c| !used[c])
            .map(|c| (cands[c].1.intersection(&uncovered).count(), c))
            .filter(|(gain, _)| *gain > 0)
            .min_by_key(|&(gain, c)| (std::cmp::Reverse(gain), seeds[cands[c].0].len(), cands[c].0));
        let Some((_, c)) = best else { break };
        used[c] = true;
        for e in &cands[c].1 {
            uncovered.remove(e);
        }
        chosen.push(cands[c].0);
    }
    if chosen.is_empty() {
        // No seed covers anything; keep the shortest one.
        let c = (0..cands.len()).min_by_key(|&c| (seeds[cands[c].0].len(), cands[c].0)).unwrap();
        chosen.push(cands[c].0);
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| seeds[i].clone()).collect())
}

pub fn distill_corpus(seeds: &[Vec<u8>], target: &TargetSpec) -> Result<Vec<Vec<u8>>, CampaignError> {
    let mut ex = target.executor()?;
    distill_with(seeds, &mut |i| ex.execute(i))
}

/// Remove comment-like trivia from an input that parses. Where dropping a
/// comment would glue two tokens together a single space is kept instead.
/// Inputs that do not parse, or would stop parsing, come back unchanged.
pub fn strip_comments(input: &[u8], g: &GrammarSpec) -> Vec<u8> {
    if parse(g, input).is_err() {
        return input.to_vec();
    }
    let Ok(lexemes) = tokenize(g, input) else { return input.to_vec() };
    let space_is_trivia = g.skip_tokens().any(|t| t.matches(b" "));
    let mut out = Vec::with_capacity(input.len());
    let mut dropped = false;
    let mut pending = false;
    let mut last_kept: Option<&[u8]> = None;
    for lx in &lexemes {
        let text = &input[lx.span.start..lx.span.end];
        if lx.skip && g.token(lx.token).is_comment() {
            dropped = true;
            pending = true;
            continue;
        }
        if pending && !lx.skip && space_is_trivia && last_kept.is_some_and(|p| !lexes_apart(g, p, text)) {
            out.push(b' ');
        }
        pending = false;
        out.extend_from_slice(text);
        last_kept = if lx.skip { None } else { Some(text) };
    }
    if !dropped || parse(g, &out).is_err() {
        return input.to_vec();
    }
    out
}

/// Whether `a` followed directly by `b` still lexes as those two tokens.
fn lexes_apart(g: &GrammarSpec, a: &[u8], b: &[u8]) -> bool {
    let joined = [a, b].concat();
    match tokenize(g, &joined) {
        Ok(l) => l.len() == 2 && l[0].span.end == a.len(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::CoverageMap;
    use crate::grammar::{minijs, plist_xml};
    use crate::harness::ExecStatus;

    fn fake(edges: &[usize]) -> ExecResult {
        let mut map = CoverageMap::new();
        for &e in edges {
            map.hit(e);
        }
        ExecResult { status: ExecStatus::Ok, map, exec_micros: 1, crash_token: None }
    }

    #[test]
    fn dominance_and_duplicates() {
        let seeds = vec![b"A".to_vec(), b"BB".to_vec(), b"A".to_vec()];
        let mut exec = |s: &[u8]| Ok(if s == b"A" { fake(&[1, 2, 3]) } else { fake(&[2]) });
        assert_eq!(distill_with(&seeds, &mut exec).unwrap(), [b"A".to_vec()]);
    }

    #[test]
    fn all_faults() {
        let mut exec = |_: &[u8]| {
            let mut r = fake(&[1]);
            r.status = ExecStatus::Crash;
            Ok(r)
        };
        assert!(matches!(distill_with(&[b"x".to_vec()], &mut exec), Err(CampaignError::AllSeedsFault)));
        assert!(matches!(distill_with(&[], &mut exec), Err(CampaignError::NoSeeds)));
    }

    #[test]
    fn comments() {
        let g = minijs();
        assert_eq!(strip_comments(b"var x=1;/*c*/", &g), b"var x=1;");
        assert_eq!(strip_comments(b"var x=1;", &g), b"var x=1;");
        assert_eq!(strip_comments(b"var/*a*//*b*/x=1;", &g), b"var x=1;");
        assert_eq!(strip_comments(b"x=1/*a*/;", &g), b"x=1;");
        assert_eq!(strip_comments(b"var/*c*/x=1; // tail\n", &g), b"var x=1; \n");
        let multi = b"var a = 1;\n/* one\n two\n three */\nvar b = 2;\n";
        let s = strip_comments(multi, &g);
        assert_eq!(s, b"var a = 1;\n\nvar b = 2;\n");
        assert!(parse(&g, &s).is_ok());
        assert_eq!(strip_comments(b"var = ;/*c*/", &g), b"var = ;/*c*/");
        let p = plist_xml();
        let doc = b"<plist version=\"1.0\"><!-- hi --><true/></plist>";
        assert_eq!(strip_comments(doc, &p), b"<plist version=\"1.0\"><true/></plist>");
    }
}
