//! S-expression grammar for FPQ-trees:
//! `tree := <leaf-id> | (P tree tree+) | (Q tree tree tree*) | (F tree tree tree*)`.
//! Whitespace-insensitive. Leaf names are resolved by the caller (instance
//! files use edge ids).

use super::{FpqError, FpqNode, FpqTree, LeafId, NodeKind, TreeBuilder};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
}

fn tokenize(src: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in src.chars() {
        match ch {
            '(' | ')' => {
                if !word.is_empty() {
                    out.push(Tok::Word(std::mem::take(&mut word)));
                }
                out.push(if ch == '(' { Tok::Open } else { Tok::Close });
            }
            c if c.is_whitespace() => {
                if !word.is_empty() {
                    out.push(Tok::Word(std::mem::take(&mut word)));
                }
            }
            c => word.push(c),
        }
    }
    if !word.is_empty() {
        out.push(Tok::Word(word));
    }
    out
}

/// Parses a tree, resolving leaf names through `resolve`. The result is
/// canonicalized.
pub fn parse_tree(
    src: &str,
    resolve: &mut dyn FnMut(&str) -> Option<LeafId>,
) -> Result<FpqTree, FpqError> {
    let toks = tokenize(src);
    let mut pos = 0usize;
    let mut b = TreeBuilder::new();
    let root = parse_node(&toks, &mut pos, &mut b, resolve)?;
    if pos != toks.len() {
        return Err(FpqError::Parse("trailing tokens after tree".into()));
    }
    let t = b.finish(root);
    let mut seen = std::collections::BTreeSet::new();
    for n in &t.nodes {
        if let FpqNode::Leaf(l) = n {
            if !seen.insert(*l) {
                return Err(FpqError::Parse("duplicate leaf".into()));
            }
        }
    }
    Ok(t.canonicalized())
}

fn parse_node(
    toks: &[Tok],
    pos: &mut usize,
    b: &mut TreeBuilder,
    resolve: &mut dyn FnMut(&str) -> Option<LeafId>,
) -> Result<usize, FpqError> {
    match toks.get(*pos) {
        None => Err(FpqError::Parse("unexpected end of input".into())),
        Some(Tok::Close) => Err(FpqError::Parse("unexpected ')'".into())),
        Some(Tok::Word(w)) => {
            *pos += 1;
            let l = resolve(w).ok_or_else(|| FpqError::Parse(format!("unknown leaf '{}'", w)))?;
            Ok(b.leaf(l))
        }
        Some(Tok::Open) => {
            *pos += 1;
            let kind = match toks.get(*pos) {
                Some(Tok::Word(w)) => match w.as_str() {
                    "P" | "p" => NodeKind::P,
                    "Q" | "q" => NodeKind::Q,
                    "F" | "f" => NodeKind::F,
                    other => return Err(FpqError::Parse(format!("unknown node kind '{}'", other))),
                },
                _ => return Err(FpqError::Parse("expected node kind after '('".into())),
            };
            *pos += 1;
            let mut children = Vec::new();
            loop {
                match toks.get(*pos) {
                    Some(Tok::Close) => {
                        *pos += 1;
                        break;
                    }
                    None => return Err(FpqError::Parse("missing ')'".into())),
                    _ => children.push(parse_node(toks, pos, b, resolve)?),
                }
            }
            if children.len() < 2 {
                return Err(FpqError::Parse(
                    "inner node needs at least 2 children".into(),
                ));
            }
            Ok(b.inner(kind, children))
        }
    }
}

/// Serializes with raw leaf ids (`l<N>`); see `tree_to_sexpr_named` for
/// instance-file output.
pub fn tree_to_sexpr(t: &FpqTree) -> String {
    tree_to_sexpr_named(t, &|l| format!("{}", l.0))
}

pub fn tree_to_sexpr_named(t: &FpqTree, name: &dyn Fn(LeafId) -> String) -> String {
    fn rec(t: &FpqTree, i: usize, name: &dyn Fn(LeafId) -> String, out: &mut String) {
        match t.node(i) {
            FpqNode::Leaf(l) => out.push_str(&name(*l)),
            FpqNode::Inner { kind, children, .. } => {
                out.push('(');
                out.push(match kind {
                    NodeKind::P => 'P',
                    NodeKind::Q => 'Q',
                    NodeKind::F => 'F',
                });
                for &c in children {
                    out.push(' ');
                    rec(t, c, name, out);
                }
                out.push(')');
            }
        }
    }
    let mut s = String::new();
    rec(t, t.root(), name, &mut s);
    s
}
