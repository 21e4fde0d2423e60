//! Tree intersection by iterated reduction.
//!
//! Cyclic orders are anchored at a fixed leaf l0: the cyclic orders of a
//! tree correspond bijectively to the linear frontiers of the tree re-rooted
//! at l0's neighbor (prepend l0 to recover the cyclic order). Intersection
//! then imports the second tree's constraints one by one:
//!   * every node yield, and every union of adjacent children of a Q/F-node,
//!     must be consecutive (a `reduce` call each);
//!   * every adjacent child pair of an F-node must additionally appear in
//!     stored order (`lock_pair`).
//! F-nodes of the tree being reduced lock the direction of restructured
//! parts; the bookkeeping is the `lock` field of a `Spine`.

use std::collections::BTreeSet;

use super::{FpqError, FpqNode, FpqTree, LeafId, NodeKind, TreeBuilder};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LinNode {
    Leaf(LeafId),
    Inner {
        kind: NodeKind,
        children: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct LinTree {
    pub nodes: Vec<LinNode>,
    pub root: usize,
}

impl LinTree {
    fn children(&self, i: usize) -> &[usize] {
        match &self.nodes[i] {
            LinNode::Inner { children, .. } => children,
            LinNode::Leaf(_) => &[],
        }
    }

    fn kind(&self, i: usize) -> Option<NodeKind> {
        match &self.nodes[i] {
            LinNode::Inner { kind, .. } => Some(*kind),
            LinNode::Leaf(_) => None,
        }
    }

    pub(crate) fn yields(&self) -> Vec<BTreeSet<LeafId>> {
        let mut out = vec![BTreeSet::new(); self.nodes.len()];
        fn rec(t: &LinTree, i: usize, out: &mut Vec<BTreeSet<LeafId>>) {
            match &t.nodes[i] {
                LinNode::Leaf(l) => {
                    out[i].insert(*l);
                }
                LinNode::Inner { children, .. } => {
                    for &c in children.clone().iter() {
                        rec(t, c, out);
                        let cs: Vec<LeafId> = out[c].iter().copied().collect();
                        out[i].extend(cs);
                    }
                }
            }
        }
        rec(self, self.root, &mut out);
        out
    }

    fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if let LinNode::Inner { children, .. } = &self.nodes[i] {
                for &c in children {
                    p[c] = Some(i);
                    stack.push(c);
                }
            }
        }
        p
    }

    /// All linear frontiers; test support, exponential.
    #[cfg(test)]
    pub(crate) fn frontiers(&self) -> BTreeSet<Vec<LeafId>> {
        fn rec(t: &LinTree, i: usize) -> Vec<Vec<LeafId>> {
            match &t.nodes[i] {
                LinNode::Leaf(l) => vec![vec![*l]],
                LinNode::Inner { kind, children, .. } => {
                    let parts: Vec<Vec<Vec<LeafId>>> =
                        children.iter().map(|&c| rec(t, c)).collect();
                    let orders: Vec<Vec<usize>> = match kind {
                        NodeKind::P => {
                            let mut out = Vec::new();
                            fn perm(k: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                                if acc.len() == k {
                                    out.push(acc.clone());
                                    return;
                                }
                                for i in 0..k {
                                    if !acc.contains(&i) {
                                        acc.push(i);
                                        perm(k, acc, out);
                                        acc.pop();
                                    }
                                }
                            }
                            perm(children.len(), &mut Vec::new(), &mut out);
                            out
                        }
                        NodeKind::Q => {
                            let fwd: Vec<usize> = (0..children.len()).collect();
                            let rev: Vec<usize> = fwd.iter().rev().copied().collect();
                            if fwd == rev {
                                vec![fwd]
                            } else {
                                vec![fwd, rev]
                            }
                        }
                        NodeKind::F => vec![(0..children.len()).collect()],
                    };
                    let mut out = Vec::new();
                    for ord in orders {
                        let sel: Vec<&Vec<Vec<LeafId>>> = ord.iter().map(|&j| &parts[j]).collect();
                        fn cart(
                            sel: &[&Vec<Vec<LeafId>>],
                            i: usize,
                            acc: &mut Vec<LeafId>,
                            out: &mut Vec<Vec<LeafId>>,
                        ) {
                            if i == sel.len() {
                                out.push(acc.clone());
                                return;
                            }
                            for arr in sel[i].iter() {
                                let n = acc.len();
                                acc.extend_from_slice(arr);
                                cart(sel, i + 1, acc, out);
                                acc.truncate(n);
                            }
                        }
                        cart(&sel, 0, &mut Vec::new(), &mut out);
                    }
                    out
                }
            }
        }
        rec(self, self.root).into_iter().collect()
    }
}

/// Re-roots a cyclic tree at the neighbor of leaf `l0`, dropping `l0`. The
/// linear frontiers of the result, with `l0` prepended, are exactly the
/// cyclic orders of `t`. Rotations are turned, never reversed, so Q/F
/// directions survive.
pub(crate) fn reroot_at_leaf(t: &FpqTree, l0: LeafId) -> LinTree {
    #[derive(Clone, Copy, PartialEq)]
    enum Dir {
        Child(usize),
        Up,
    }
    fn directions(t: &FpqTree, i: usize, parents: &[Option<usize>]) -> Vec<Dir> {
        let mut d = Vec::new();
        if parents[i].is_some() {
            d.push(Dir::Up);
        }
        for &c in t.children(i) {
            d.push(Dir::Child(c));
        }
        d
    }
    fn conv(t: &FpqTree, i: usize, b: &mut Vec<LinNode>) -> usize {
        match t.node(i) {
            FpqNode::Leaf(l) => {
                b.push(LinNode::Leaf(*l));
                b.len() - 1
            }
            FpqNode::Inner { kind, children, .. } => {
                let ch: Vec<usize> = children.iter().map(|&c| conv(t, c, b)).collect();
                b.push(LinNode::Inner {
                    kind: *kind,
                    children: ch,
                });
                b.len() - 1
            }
        }
    }
    // The subtree "above x", entered from x.
    fn up(t: &FpqTree, x: usize, parents: &[Option<usize>], b: &mut Vec<LinNode>) -> usize {
        let p = parents[x].expect("up() requires a parent");
        let dirs = directions(t, p, parents);
        let pos = dirs
            .iter()
            .position(|d| matches!(d, Dir::Child(c) if *c == x))
            .unwrap();
        let mut seq = Vec::new();
        let n = dirs.len();
        for off in 1..n {
            seq.push(dirs[(pos + off) % n]);
        }
        let children: Vec<usize> = seq
            .into_iter()
            .map(|d| match d {
                Dir::Child(c) => conv(t, c, b),
                Dir::Up => up(t, p, parents, b),
            })
            .collect();
        if children.len() == 1 {
            children[0]
        } else {
            let kind = t.kind(p).expect("inner");
            b.push(LinNode::Inner { kind, children });
            b.len() - 1
        }
    }

    let parents = t.parents_pub();
    let leaf_idx = (0..t.n_nodes())
        .find(|&i| matches!(t.node(i), FpqNode::Leaf(l) if *l == l0))
        .expect("anchor leaf present");
    let r0 = parents[leaf_idx].expect("tree has more than one leaf");
    let dirs = directions(t, r0, &parents);
    let pos = dirs
        .iter()
        .position(|d| matches!(d, Dir::Child(c) if *c == leaf_idx))
        .unwrap();
    let mut b = Vec::new();
    let n = dirs.len();
    let mut children = Vec::new();
    for off in 1..n {
        match dirs[(pos + off) % n] {
            Dir::Child(c) => children.push(conv(t, c, &mut b)),
            Dir::Up => children.push(up(t, r0, &parents, &mut b)),
        }
    }
    let root = if children.len() == 1 {
        children[0]
    } else {
        let kind = t.kind(r0).expect("inner");
        b.push(LinNode::Inner { kind, children });
        b.len() - 1
    };
    LinTree { nodes: b, root }
}

/// Back-conversion: cyclic tree whose orders are `l0` followed by a frontier
/// of `lin`.
pub(crate) fn wrap_at_leaf(lin: &LinTree, l0: LeafId) -> FpqTree {
    fn conv(lin: &LinTree, i: usize, b: &mut TreeBuilder) -> usize {
        match &lin.nodes[i] {
            LinNode::Leaf(l) => b.leaf(*l),
            LinNode::Inner { kind, children } => {
                let ch: Vec<usize> = children.iter().map(|&c| conv(lin, c, b)).collect();
                b.inner(*kind, ch)
            }
        }
    }
    let mut b = TreeBuilder::new();
    let anchor = b.leaf(l0);
    let body = conv(lin, lin.root, &mut b);
    let root = b.inner(NodeKind::F, vec![anchor, body]);
    b.finish(root).canonicalized()
}

#[derive(Debug, Clone)]
struct Spine {
    /// Sub-blocks listed S-side first; `items[..n_full]` lie inside S, the
    /// rest outside.
    items: Vec<usize>,
    n_full: usize,
    /// Required reading direction of `items` in the final frontier:
    /// None = free, Some(false) = as written, Some(true) = reversed.
    lock: Option<bool>,
}

#[derive(Debug, Clone)]
enum Mark {
    Empty,
    Full,
    Partial(Spine),
}

struct Reducer<'a> {
    nodes: Vec<LinNode>,
    s: &'a BTreeSet<LeafId>,
}

impl<'a> Reducer<'a> {
    fn wrap_p(&mut self, items: Vec<usize>) -> usize {
        debug_assert!(!items.is_empty());
        if items.len() == 1 {
            items[0]
        } else {
            self.nodes.push(LinNode::Inner {
                kind: NodeKind::P,
                children: items,
            });
            self.nodes.len() - 1
        }
    }

    fn merge_lock(a: Option<bool>, b: Option<bool>) -> Result<Option<bool>, ()> {
        match (a, b) {
            (None, x) | (x, None) => Ok(x),
            (Some(x), Some(y)) if x == y => Ok(Some(x)),
            _ => Err(()),
        }
    }

    fn mark(&mut self, i: usize) -> Result<Mark, ()> {
        match self.nodes[i].clone() {
            LinNode::Leaf(l) => Ok(if self.s.contains(&l) {
                Mark::Full
            } else {
                Mark::Empty
            }),
            LinNode::Inner { kind, children } => {
                let ms: Vec<Mark> = children
                    .iter()
                    .map(|&c| self.mark(c))
                    .collect::<Result<_, _>>()?;
                let n_full = ms.iter().filter(|m| matches!(m, Mark::Full)).count();
                let n_empty = ms.iter().filter(|m| matches!(m, Mark::Empty)).count();
                let n_partial = ms.len() - n_full - n_empty;
                if n_full == ms.len() {
                    return Ok(Mark::Full);
                }
                if n_empty == ms.len() {
                    return Ok(Mark::Empty);
                }
                if n_partial > 1 {
                    return Err(());
                }
                match kind {
                    NodeKind::P => {
                        let fulls: Vec<usize> = children
                            .iter()
                            .zip(&ms)
                            .filter(|(_, m)| matches!(m, Mark::Full))
                            .map(|(&c, _)| c)
                            .collect();
                        let empties: Vec<usize> = children
                            .iter()
                            .zip(&ms)
                            .filter(|(_, m)| matches!(m, Mark::Empty))
                            .map(|(&c, _)| c)
                            .collect();
                        let partial = ms.into_iter().find_map(|m| match m {
                            Mark::Partial(sp) => Some(sp),
                            _ => None,
                        });
                        let mut items = Vec::new();
                        let mut n_full_items = 0;
                        if !fulls.is_empty() {
                            let w = self.wrap_p(fulls);
                            items.push(w);
                            n_full_items += 1;
                        }
                        let mut lock = None;
                        if let Some(sp) = partial {
                            items.extend_from_slice(&sp.items[..sp.n_full]);
                            n_full_items += sp.n_full;
                            items.extend_from_slice(&sp.items[sp.n_full..]);
                            lock = sp.lock;
                        }
                        if !empties.is_empty() {
                            let w = self.wrap_p(empties);
                            items.push(w);
                        }
                        Ok(Mark::Partial(Spine {
                            items,
                            n_full: n_full_items,
                            lock,
                        }))
                    }
                    NodeKind::Q | NodeKind::F => {
                        // Pattern: fulls, then at most one partial, then
                        // empties, in stored or reversed orientation.
                        let matches_pattern = |seq: &[&Mark]| -> bool {
                            let mut i = 0;
                            while i < seq.len() && matches!(seq[i], Mark::Full) {
                                i += 1;
                            }
                            if i < seq.len() && matches!(seq[i], Mark::Partial(_)) {
                                i += 1;
                            }
                            while i < seq.len() && matches!(seq[i], Mark::Empty) {
                                i += 1;
                            }
                            i == seq.len()
                        };
                        let fwd: Vec<&Mark> = ms.iter().collect();
                        let rev: Vec<&Mark> = ms.iter().rev().collect();
                        let orient_rev = if matches_pattern(&fwd) {
                            false
                        } else if matches_pattern(&rev) {
                            true
                        } else {
                            return Err(());
                        };
                        let idxs: Vec<usize> = if orient_rev {
                            (0..children.len()).rev().collect()
                        } else {
                            (0..children.len()).collect()
                        };
                        let mut items = Vec::new();
                        let mut n_full_items = 0;
                        let mut p_lock = None;
                        for &j in &idxs {
                            match &ms[j] {
                                Mark::Full => {
                                    items.push(children[j]);
                                    n_full_items += 1;
                                }
                                Mark::Partial(sp) => {
                                    items.extend_from_slice(&sp.items);
                                    n_full_items += sp.n_full;
                                    p_lock = sp.lock;
                                }
                                Mark::Empty => items.push(children[j]),
                            }
                        }
                        let node_lock = if kind == NodeKind::F {
                            Some(orient_rev)
                        } else {
                            None
                        };
                        let lock = Self::merge_lock(node_lock, p_lock)?;
                        Ok(Mark::Partial(Spine {
                            items,
                            n_full: n_full_items,
                            lock,
                        }))
                    }
                }
            }
        }
    }
}

fn lca_of(lin: &LinTree, yields: &[BTreeSet<LeafId>], s: &BTreeSet<LeafId>) -> usize {
    let mut cur = lin.root;
    'outer: loop {
        for &c in lin.children(cur) {
            if s.is_subset(&yields[c]) {
                cur = c;
                continue 'outer;
            }
        }
        return cur;
    }
}

/// Restricts the tree to the frontiers in which `s` is consecutive.
pub(crate) fn reduce(lin: &LinTree, s: &BTreeSet<LeafId>) -> Option<LinTree> {
    let yields = lin.yields();
    let ground = &yields[lin.root];
    if s.len() <= 1 || s.len() >= ground.len() {
        return Some(lin.clone());
    }
    debug_assert!(s.is_subset(ground));
    let rho = lca_of(lin, &yields, s);
    if yields[rho] == *s {
        return Some(lin.clone());
    }
    let parents = lin.parents();
    let mut r = Reducer {
        nodes: lin.nodes.clone(),
        s,
    };

    let (kind, children) = match lin.nodes[rho].clone() {
        LinNode::Inner { kind, children } => (kind, children),
        LinNode::Leaf(_) => unreachable!("LCA of >=2 leaves is internal"),
    };
    let ms: Vec<Mark> = match children
        .iter()
        .map(|&c| r.mark(c))
        .collect::<Result<_, _>>()
    {
        Ok(v) => v,
        Err(()) => return None,
    };

    let replacement: usize = match kind {
        NodeKind::P => {
            let fulls: Vec<usize> = children
                .iter()
                .zip(&ms)
                .filter(|(_, m)| matches!(m, Mark::Full))
                .map(|(&c, _)| c)
                .collect();
            let empties: Vec<usize> = children
                .iter()
                .zip(&ms)
                .filter(|(_, m)| matches!(m, Mark::Empty))
                .map(|(&c, _)| c)
                .collect();
            let partials: Vec<Spine> = ms
                .into_iter()
                .filter_map(|m| match m {
                    Mark::Partial(sp) => Some(sp),
                    _ => None,
                })
                .collect();
            if partials.len() > 2 {
                return None;
            }
            // Assemble the S-carrying block: p1 reversed, fulls, p2.
            let mut lam_items = Vec::new();
            let mut lock: Option<bool> = None;
            let mut p_iter = partials.into_iter();
            let p2 = p_iter.next();
            let p1 = p_iter.next();
            if let Some(sp) = &p1 {
                lam_items.extend(sp.items.iter().rev().copied());
                if let Some(b) = sp.lock {
                    lock = match Reducer::merge_lock(lock, Some(b ^ true)) {
                        Ok(l) => l,
                        Err(()) => return None,
                    };
                }
            }
            if !fulls.is_empty() {
                let w = r.wrap_p(fulls);
                lam_items.push(w);
            }
            if let Some(sp) = &p2 {
                lam_items.extend_from_slice(&sp.items);
                if let Some(b) = sp.lock {
                    lock = match Reducer::merge_lock(lock, Some(b)) {
                        Ok(l) => l,
                        Err(()) => return None,
                    };
                }
            }
            let lam = if lam_items.len() == 1 {
                lam_items[0]
            } else {
                let (kind, items) = match lock {
                    None => (NodeKind::Q, lam_items),
                    Some(false) => (NodeKind::F, lam_items),
                    Some(true) => (NodeKind::F, lam_items.into_iter().rev().collect()),
                };
                r.nodes.push(LinNode::Inner {
                    kind,
                    children: items,
                });
                r.nodes.len() - 1
            };
            if empties.is_empty() {
                lam
            } else {
                let mut ch = empties;
                ch.push(lam);
                r.nodes.push(LinNode::Inner {
                    kind: NodeKind::P,
                    children: ch,
                });
                r.nodes.len() - 1
            }
        }
        NodeKind::Q | NodeKind::F => {
            let touching: Vec<usize> = ms
                .iter()
                .enumerate()
                .filter(|(_, m)| !matches!(m, Mark::Empty))
                .map(|(i, _)| i)
                .collect();
            let lo = *touching.first().unwrap();
            let hi = *touching.last().unwrap();
            if touching.len() != hi - lo + 1 {
                return None;
            }
            debug_assert!(lo < hi, "single touching child contradicts LCA choice");
            // Interior of the run must be full; flanks may be partial.
            for i in lo + 1..hi {
                if !matches!(ms[i], Mark::Full) {
                    return None;
                }
            }
            let mut lock: Option<bool> = if kind == NodeKind::F {
                Some(false)
            } else {
                None
            };
            let mut new_children: Vec<usize> = children[..lo].to_vec();
            match &ms[lo] {
                Mark::Partial(sp) => {
                    new_children.extend(sp.items.iter().rev().copied());
                    if let Some(b) = sp.lock {
                        lock = match Reducer::merge_lock(lock, Some(b ^ true)) {
                            Ok(l) => l,
                            Err(()) => return None,
                        };
                    }
                }
                Mark::Full => new_children.push(children[lo]),
                Mark::Empty => unreachable!(),
            }
            for i in lo + 1..hi {
                new_children.push(children[i]);
            }
            match &ms[hi] {
                Mark::Partial(sp) => {
                    new_children.extend_from_slice(&sp.items);
                    if let Some(b) = sp.lock {
                        lock = match Reducer::merge_lock(lock, Some(b)) {
                            Ok(l) => l,
                            Err(()) => return None,
                        };
                    }
                }
                Mark::Full => new_children.push(children[hi]),
                Mark::Empty => unreachable!(),
            }
            new_children.extend_from_slice(&children[hi + 1..]);
            let (new_kind, new_children) = match (kind, lock) {
                (NodeKind::F, Some(false)) => (NodeKind::F, new_children),
                (NodeKind::F, _) => return None,
                (NodeKind::Q, None) => (NodeKind::Q, new_children),
                (NodeKind::Q, Some(false)) => (NodeKind::F, new_children),
                (NodeKind::Q, Some(true)) => {
                    (NodeKind::F, new_children.into_iter().rev().collect())
                }
                (NodeKind::P, _) => unreachable!(),
            };
            r.nodes.push(LinNode::Inner {
                kind: new_kind,
                children: new_children,
            });
            r.nodes.len() - 1
        }
    };

    let mut out = LinTree {
        nodes: r.nodes,
        root: lin.root,
    };
    if rho == lin.root {
        out.root = replacement;
    } else {
        let p = parents[rho].unwrap();
        if let LinNode::Inner { children, .. } = &mut out.nodes[p] {
            let ci = children.iter().position(|&x| x == rho).unwrap();
            children[ci] = replacement;
        }
    }
    Some(out)
}

/// Restricts to the frontiers where block `a` appears immediately before
/// block `b`. Runs the prerequisite reductions itself.
pub(crate) fn lock_pair(
    lin: &LinTree,
    a: &BTreeSet<LeafId>,
    b: &BTreeSet<LeafId>,
) -> Option<LinTree> {
    if a.is_empty() || b.is_empty() {
        return Some(lin.clone());
    }
    let w: BTreeSet<LeafId> = a.union(b).copied().collect();
    let mut lin = reduce(lin, a)?;
    lin = reduce(&lin, b)?;
    lin = reduce(&lin, &w)?;

    let yields = lin.yields();
    let parents = lin.parents();
    let rho = lca_of(&lin, &yields, &w);
    let mut nodes = lin.nodes.clone();

    // Rewrites `node` (whose yield is inside w and touches both a and b) so
    // that it reads its a-part then its b-part; returns the new node.
    fn lock_block(
        nodes: &mut Vec<LinNode>,
        yields: &[BTreeSet<LeafId>],
        node: usize,
        a: &BTreeSet<LeafId>,
        b: &BTreeSet<LeafId>,
    ) -> Option<usize> {
        let (kind, children) = match nodes[node].clone() {
            LinNode::Inner { kind, children } => (kind, children),
            LinNode::Leaf(_) => unreachable!("a leaf cannot touch both blocks"),
        };
        #[derive(PartialEq, Clone, Copy, Debug)]
        enum T {
            A,
            B,
            Ab,
        }
        let ty = |c: usize| -> T {
            let ta = yields[c].intersection(a).next().is_some();
            let tb = yields[c].intersection(b).next().is_some();
            match (ta, tb) {
                (true, false) => T::A,
                (false, true) => T::B,
                (true, true) => T::Ab,
                (false, false) => unreachable!("child inside w touches a or b"),
            }
        };
        let tys: Vec<T> = children.iter().map(|&c| ty(c)).collect();
        let n_ab = tys.iter().filter(|t| **t == T::Ab).count();
        assert!(n_ab <= 1, "two seam-carrying children after reduction");
        match kind {
            NodeKind::P => {
                let a_children: Vec<usize> = children
                    .iter()
                    .zip(&tys)
                    .filter(|(_, t)| **t == T::A)
                    .map(|(&c, _)| c)
                    .collect();
                let b_children: Vec<usize> = children
                    .iter()
                    .zip(&tys)
                    .filter(|(_, t)| **t == T::B)
                    .map(|(&c, _)| c)
                    .collect();
                assert!(
                    a_children.len() <= 1 && b_children.len() <= 1,
                    "P-node with split pure side after reduction"
                );
                let ab_child = children
                    .iter()
                    .zip(&tys)
                    .find(|(_, t)| **t == T::Ab)
                    .map(|(&c, _)| c);
                let mut seq = Vec::new();
                seq.extend(a_children);
                if let Some(m) = ab_child {
                    seq.push(lock_block(nodes, yields, m, a, b)?);
                }
                seq.extend(b_children);
                debug_assert!(seq.len() >= 2);
                nodes.push(LinNode::Inner {
                    kind: NodeKind::F,
                    children: seq,
                });
                Some(nodes.len() - 1)
            }
            NodeKind::Q | NodeKind::F => {
                let pattern_ok = |tys: &[T]| -> bool {
                    let mut i = 0;
                    while i < tys.len() && tys[i] == T::A {
                        i += 1;
                    }
                    let a_count = i;
                    if i < tys.len() && tys[i] == T::Ab {
                        i += 1;
                    }
                    let before_b = i;
                    while i < tys.len() && tys[i] == T::B {
                        i += 1;
                    }
                    i == tys.len() && a_count + (tys.len() - before_b) > 0
                };
                let rev_tys: Vec<T> = tys.iter().rev().copied().collect();
                let orient_rev = if pattern_ok(&tys) {
                    false
                } else if pattern_ok(&rev_tys) {
                    true
                } else {
                    panic!("seam pattern violated after reduction: {:?}", tys);
                };
                if kind == NodeKind::F && orient_rev {
                    // The fixed direction reads b before a.
                    return None;
                }
                let ordered: Vec<usize> = if orient_rev {
                    children.iter().rev().copied().collect()
                } else {
                    children.clone()
                };
                let mut seq = Vec::new();
                for c in ordered {
                    if ty(c) == T::Ab {
                        seq.push(lock_block(nodes, yields, c, a, b)?);
                    } else {
                        seq.push(c);
                    }
                }
                nodes.push(LinNode::Inner {
                    kind: NodeKind::F,
                    children: seq,
                });
                Some(nodes.len() - 1)
            }
        }
    }

    let replacement: usize = if yields[rho] == w {
        lock_block(&mut nodes, &yields, rho, a, b)?
    } else {
        let (kind, children) = match nodes[rho].clone() {
            LinNode::Inner { kind, children } => (kind, children),
            LinNode::Leaf(_) => unreachable!(),
        };
        #[derive(PartialEq, Clone, Copy)]
        enum T {
            Out,
            A,
            B,
            Ab,
        }
        let ty = |c: usize| -> T {
            let ta = yields[c].intersection(a).next().is_some();
            let tb = yields[c].intersection(b).next().is_some();
            let out = !yields[c].is_subset(&w);
            match (ta || tb, out) {
                (false, _) => T::Out,
                (true, true) => {
                    panic!("impure child above the seam after reduction")
                }
                (true, false) => match (ta, tb) {
                    (true, false) => T::A,
                    (false, true) => T::B,
                    _ => T::Ab,
                },
            }
        };
        let tys: Vec<T> = children.iter().map(|&c| ty(c)).collect();
        match kind {
            NodeKind::P => {
                let a_children: Vec<usize> = children
                    .iter()
                    .zip(&tys)
                    .filter(|(_, t)| **t == T::A)
                    .map(|(&c, _)| c)
                    .collect();
                let b_children: Vec<usize> = children
                    .iter()
                    .zip(&tys)
                    .filter(|(_, t)| **t == T::B)
                    .map(|(&c, _)| c)
                    .collect();
                let ab_children: Vec<usize> = children
                    .iter()
                    .zip(&tys)
                    .filter(|(_, t)| **t == T::Ab)
                    .map(|(&c, _)| c)
                    .collect();
                let outs: Vec<usize> = children
                    .iter()
                    .zip(&tys)
                    .filter(|(_, t)| **t == T::Out)
                    .map(|(&c, _)| c)
                    .collect();
                assert!(a_children.len() <= 1 && b_children.len() <= 1 && ab_children.len() <= 1);
                let mut seq = Vec::new();
                seq.extend(a_children);
                for m in ab_children {
                    seq.push(lock_block(&mut nodes, &yields, m, a, b)?);
                }
                seq.extend(b_children);
                let lam = if seq.len() == 1 {
                    seq[0]
                } else {
                    nodes.push(LinNode::Inner {
                        kind: NodeKind::F,
                        children: seq,
                    });
                    nodes.len() - 1
                };
                if outs.is_empty() {
                    lam
                } else {
                    let mut ch = outs;
                    ch.push(lam);
                    nodes.push(LinNode::Inner {
                        kind: NodeKind::P,
                        children: ch,
                    });
                    nodes.len() - 1
                }
            }
            NodeKind::Q | NodeKind::F => {
                let touching: Vec<usize> = tys
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| **t != T::Out)
                    .map(|(i, _)| i)
                    .collect();
                let lo = *touching.first().unwrap();
                let hi = *touching.last().unwrap();
                assert!(
                    touching.len() == hi - lo + 1,
                    "w-run not contiguous after reduction"
                );
                // Orientation so that a-part comes first within the run.
                let run: Vec<T> = tys[lo..=hi].to_vec();
                let pattern_ok = |run: &[T]| -> bool {
                    let mut i = 0;
                    while i < run.len() && run[i] == T::A {
                        i += 1;
                    }
                    if i < run.len() && run[i] == T::Ab {
                        i += 1;
                    }
                    while i < run.len() && run[i] == T::B {
                        i += 1;
                    }
                    i == run.len()
                };
                let run_rev: Vec<T> = run.iter().rev().copied().collect();
                let orient_rev = if pattern_ok(&run) {
                    false
                } else if pattern_ok(&run_rev) {
                    true
                } else {
                    panic!("seam pattern violated after reduction");
                };
                if kind == NodeKind::F && orient_rev {
                    return None;
                }
                let ordered: Vec<usize> = if orient_rev {
                    children.iter().rev().copied().collect()
                } else {
                    children.clone()
                };
                let mut seq = Vec::new();
                for c in ordered {
                    let t = ty(c);
                    if t == T::Ab {
                        seq.push(lock_block(&mut nodes, &yields, c, a, b)?);
                    } else {
                        seq.push(c);
                    }
                }
                nodes.push(LinNode::Inner {
                    kind: NodeKind::F,
                    children: seq,
                });
                nodes.len() - 1
            }
        }
    };

    let mut out = LinTree {
        nodes,
        root: lin.root,
    };
    if rho == lin.root {
        out.root = replacement;
    } else {
        let p = parents[rho].unwrap();
        if let LinNode::Inner { children, .. } = &mut out.nodes[p] {
            let ci = children.iter().position(|&x| x == rho).unwrap();
            children[ci] = replacement;
        }
    }
    Some(out)
}

/// Intersection of represented cyclic-order sets. Returns None for the
/// null tree (empty intersection).
pub fn intersect(t1: &FpqTree, t2: &FpqTree) -> Result<Option<FpqTree>, FpqError> {
    let g1 = t1.ground_set();
    let g2 = t2.ground_set();
    if g1 != g2 {
        return Err(FpqError::GroundMismatch);
    }
    if g1.len() <= 2 {
        return Ok(Some(t1.canonicalized()));
    }
    let l0 = *g1.iter().next().unwrap();
    let t1c = t1.canonicalized();
    let t2c = t2.canonicalized();
    let mut lin = reroot_at_leaf(&t1c, l0);
    let t2l = reroot_at_leaf(&t2c, l0);
    let yields = t2l.yields();
    let lin_ground_len = g1.len() - 1;

    // Postorder over t2l.
    let mut order = Vec::new();
    fn post(t: &LinTree, i: usize, out: &mut Vec<usize>) {
        for &c in t.children(i) {
            post(t, c, out);
        }
        if matches!(t.nodes[i], LinNode::Inner { .. }) {
            out.push(i);
        }
    }
    post(&t2l, t2l.root, &mut order);

    for &x in &order {
        let y = &yields[x];
        if y.len() >= 2 && y.len() < lin_ground_len {
            lin = match reduce(&lin, y) {
                Some(l) => l,
                None => return Ok(None),
            };
        }
        let kind = t2l.kind(x).unwrap();
        if kind == NodeKind::P {
            continue;
        }
        let children = t2l.children(x).to_vec();
        let k = children.len();
        if k >= 3 {
            for i in 0..k {
                let mut u = BTreeSet::new();
                for (j, &c) in children.iter().enumerate().skip(i) {
                    u.extend(yields[c].iter().copied());
                    if j == i || (i == 0 && j == k - 1) {
                        continue;
                    }
                    if u.len() >= lin_ground_len {
                        continue;
                    }
                    lin = match reduce(&lin, &u) {
                        Some(l) => l,
                        None => return Ok(None),
                    };
                }
            }
        }
        if kind == NodeKind::F {
            for i in 0..k - 1 {
                let a = &yields[children[i]];
                let b = &yields[children[i + 1]];
                lin = match lock_pair(&lin, a, b) {
                    Some(l) => l,
                    None => return Ok(None),
                };
            }
        }
    }
    Ok(Some(wrap_at_leaf(&lin, l0)))
}
