use std::fmt;

use thiserror::Error;

use super::{GrammarSpec, RuleId, TokenId};

/// Half-open byte range `[start, end)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Debug for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Rule(RuleId),
    Token(TokenId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
    pub children: Vec<Node>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Token(_))
    }

    /// Total number of nodes in this subtree, itself included.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Node::node_count).sum::<usize>()
    }

    fn walk<'a>(&'a self, depth: usize, path: &mut Vec<u32>, f: &mut impl FnMut(&'a Node, &[u32], usize)) {
        f(self, path, depth);
        for (i, c) in self.children.iter().enumerate() {
            path.push(i as u32);
            c.walk(depth + 1, path, f);
            path.pop();
        }
    }
}

/// Concrete syntax tree of one input. Spans index into `source`; trivia
/// between children is covered by the parent span, so the tree re-emits
/// its input byte for byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    pub source: Vec<u8>,
    pub root: Node,
}

impl ParseTree {
    pub fn lexeme(&self, node: &Node) -> &[u8] {
        &self.source[node.span.start..node.span.end]
    }

    pub fn serialize(&self) -> Vec<u8> {
        self.lexeme(&self.root).to_vec()
    }

    pub fn node_at(&self, path: &[u32]) -> Option<&Node> {
        let mut n = &self.root;
        for &i in path {
            n = n.children.get(i as usize)?;
        }
        Some(n)
    }

    /// Visit every node in pre-order with its child-index path and depth.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&'a Node, &[u32], usize)) {
        let mut path = Vec::new();
        self.root.walk(0, &mut path, &mut f);
    }

    /// Token leaves in source order.
    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.walk(|n, _, _| {
            if n.is_leaf() {
                out.push(n);
            }
        });
        out
    }

    pub fn kind_name<'g>(&self, g: &'g GrammarSpec, node: &Node) -> &'g str {
        match node.kind {
            NodeKind::Rule(r) => g.rule_name(r),
            NodeKind::Token(t) => g.token_name(t),
        }
    }

    /// Indented rendering, one node per line.
    pub fn pretty(&self, g: &GrammarSpec) -> String {
        let mut out = String::new();
        self.walk(|n, _, depth| {
            out.push_str(&"  ".repeat(depth));
            out.push_str(self.kind_name(g, n));
            if n.is_leaf() {
                out.push_str(&format!(" {:?}", String::from_utf8_lossy(self.lexeme(n))));
            }
            out.push_str(&format!(" {:?}\n", n.span));
        });
        out
    }
}

/// Reference to a rule node inside a [`ParseTree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeRef {
    pub path: Vec<u32>,
    pub span: Span,
    pub kind: RuleId,
    pub size_bytes: usize,
}

impl SubtreeRef {
    pub fn depth(&self) -> usize {
        self.path.len()
    }
}

/// Every non-root, nonempty rule node in pre-order, optionally limited to
/// spans of at most `max_bytes`.
pub fn enumerate_subtrees(tree: &ParseTree, max_bytes: Option<usize>) -> Vec<SubtreeRef> {
    let mut out = Vec::new();
    tree.walk(|n, path, depth| {
        let NodeKind::Rule(kind) = n.kind else { return };
        if depth == 0 || n.span.is_empty() {
            return;
        }
        if max_bytes.is_some_and(|m| n.span.len() > m) {
            return;
        }
        out.push(SubtreeRef { path: path.to_vec(), span: n.span, kind, size_bytes: n.span.len() });
    });
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("span {span:?} is outside an input of {len} bytes")]
pub struct SpanError {
    pub span: Span,
    pub len: usize,
}

fn check(source: &[u8], span: Span) -> Result<(), SpanError> {
    if span.start > span.end || span.end > source.len() {
        return Err(SpanError { span, len: source.len() });
    }
    Ok(())
}

/// `source` with the bytes of `span` deleted.
pub fn excise(source: &[u8], span: Span) -> Result<Vec<u8>, SpanError> {
    splice(source, span, &[])
}

/// `source` with the bytes of `span` replaced by `replacement`.
pub fn splice(source: &[u8], span: Span, replacement: &[u8]) -> Result<Vec<u8>, SpanError> {
    check(source, span)?;
    let mut out = Vec::with_capacity(source.len() - span.len() + replacement.len());
    out.extend_from_slice(&source[..span.start]);
    out.extend_from_slice(replacement);
    out.extend_from_slice(&source[span.end..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_surgery() {
        assert_eq!(excise(b"abcdef", Span::new(2, 4)).unwrap(), b"abef");
        assert_eq!(excise(b"abcdef", Span::new(0, 0)).unwrap(), b"abcdef");
        assert_eq!(splice(b"a+b", Span::new(2, 3), b"c*d").unwrap(), b"a+c*d");
        assert_eq!(splice(b"a+b", Span::new(0, 1), b"a").unwrap(), b"a+b");
    }

    #[test]
    fn out_of_range() {
        assert_eq!(
            excise(b"abc", Span::new(2, 5)),
            Err(SpanError { span: Span::new(2, 5), len: 3 })
        );
        assert!(splice(b"abc", Span { start: 3, end: 2 }, b"").is_err());
    }
}
