//! FPQ-trees: PQ-trees with F-nodes (Q-nodes whose reversal is forbidden).
//! A tree represents a set of cyclic orders of its leaves. The root's child
//! sequence is read cyclically; interior P-node children permute freely,
//! interior Q-node children are a fixed sequence up to reversal, interior
//! F-node children are a fixed sequence.
//!
//! Equality of represented order sets (not of shapes) is the correctness
//! notion; all operations are checked against enumeration in the tests.

mod parse;
mod reduce;

pub use parse::{parse_tree, tree_to_sexpr, tree_to_sexpr_named};
pub use reduce::intersect;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A leaf label. Graph edge ids map to leaf ids; operations that introduce
/// fresh leaves take the label from the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafId(pub u32);

impl fmt::Display for LeafId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

/// Stable identity of a Q/F-node; preserved by projections and contractions
/// so boundary orientations of derived trees refer back to the original
/// node's default orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OriginId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    P,
    Q,
    F,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FpqNode {
    Leaf(LeafId),
    Inner {
        kind: NodeKind,
        children: Vec<usize>,
        origin: OriginId,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FpqError {
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("ground sets differ")]
    GroundMismatch,
    #[error("leaf set is empty or not a proper subset")]
    BadLeafSet,
    #[error("leaf set is not consecutive")]
    NotConsecutive,
    #[error("complement of the leaf set is not consecutive")]
    ComplementNotConsecutive,
    #[error("blocks do not partition the leaf set")]
    BadPartition,
    #[error("enumeration cap of {0} exceeded")]
    CapExceeded(u128),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A cyclic order of leaf labels, stored in canonical rotation (minimum
/// label first). Compared up to rotation, not reflection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CyclicOrder(Vec<LeafId>);

impl CyclicOrder {
    pub fn new(seq: Vec<LeafId>) -> Self {
        CyclicOrder(canonical_rotation(seq))
    }

    pub fn as_slice(&self) -> &[LeafId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The reversed cyclic order.
    pub fn reversed(&self) -> CyclicOrder {
        CyclicOrder::new(self.0.iter().rev().copied().collect())
    }

    /// Restriction to a subset of the labels, preserving cyclic order.
    pub fn restrict(&self, keep: &BTreeSet<LeafId>) -> CyclicOrder {
        CyclicOrder::new(
            self.0
                .iter()
                .filter(|l| keep.contains(l))
                .copied()
                .collect(),
        )
    }

    /// Replace every label in `block` by the single label `with`, which must
    /// appear consecutively (caller guarantees).
    pub fn contract(&self, block: &BTreeSet<LeafId>, with: LeafId) -> CyclicOrder {
        let mut out = Vec::new();
        let mut placed = false;
        for &l in &self.0 {
            if block.contains(&l) {
                if !placed {
                    out.push(with);
                    placed = true;
                }
            } else {
                out.push(l);
            }
        }
        CyclicOrder::new(out)
    }
}

fn canonical_rotation(seq: Vec<LeafId>) -> Vec<LeafId> {
    if seq.len() <= 1 {
        return seq;
    }
    let min_pos = seq
        .iter()
        .enumerate()
        .min_by_key(|(_, l)| **l)
        .map(|(i, _)| i)
        .unwrap();
    let mut out = Vec::with_capacity(seq.len());
    out.extend_from_slice(&seq[min_pos..]);
    out.extend_from_slice(&seq[..min_pos]);
    out
}

/// Orientation of an extensible order at a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
    Both,
    None,
}

impl Orientation {
    /// Whether this orientation matches the bit `o` (0 = clockwise).
    pub fn matches(self, o: u8) -> bool {
        match self {
            Orientation::Clockwise => o == 0,
            Orientation::Counterclockwise => o == 1,
            Orientation::Both => true,
            Orientation::None => false,
        }
    }
}

/// The boundary of a consecutive leaf set: either a single maximal split
/// edge, or a Q/F-node of degree at least |S| + 2 around which the maximal
/// split edges are consecutive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundary {
    SplitEdge,
    Node {
        node: usize,
        origin: OriginId,
        kind: NodeKind,
    },
}

#[derive(Debug, Clone)]
pub struct FpqTree {
    nodes: Vec<FpqNode>,
    root: usize,
    ground: Vec<LeafId>,
}

/// Internal: which side of a tree edge is inside the leaf set.
#[derive(Debug, Clone, PartialEq, Eq)]
enum SplitSet {
    /// One maximal split edge; `child_side` tells whether the set lies in
    /// the subtree below `node` or in its complement.
    One {
        node: usize,
        child_side: bool,
    },
    /// Several maximal split edges, all incident to `chi`. `s_dirs` lists
    /// the incident directions inside the set, as indices into the cyclic
    /// rotation of `chi` (position 0 = parent edge for non-root nodes).
    Many {
        chi: usize,
        s_dirs: Vec<usize>,
    },
    NotConsecutive,
}

impl FpqTree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &FpqNode {
        &self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn ground(&self) -> &[LeafId] {
        &self.ground
    }

    pub fn ground_set(&self) -> BTreeSet<LeafId> {
        self.ground.iter().copied().collect()
    }

    /// Builds a leaf-only tree (single leaf).
    pub fn leaf(l: LeafId) -> FpqTree {
        FpqTree {
            nodes: vec![FpqNode::Leaf(l)],
            root: 0,
            ground: vec![l],
        }
    }

    /// Builds a tree with a single inner node over the given leaves.
    pub fn flat(kind: NodeKind, leaves: &[LeafId]) -> FpqTree {
        let mut b = TreeBuilder::new();
        let children: Vec<usize> = leaves.iter().map(|&l| b.leaf(l)).collect();
        let root = b.inner(kind, children);
        b.finish(root).canonicalized()
    }

    /// Origin of a node (inner nodes only).
    pub fn origin(&self, i: usize) -> OriginId {
        match &self.nodes[i] {
            FpqNode::Inner { origin, .. } => *origin,
            FpqNode::Leaf(_) => panic!("leaf has no origin"),
        }
    }

    pub fn kind(&self, i: usize) -> Option<NodeKind> {
        match &self.nodes[i] {
            FpqNode::Inner { kind, .. } => Some(*kind),
            FpqNode::Leaf(_) => None,
        }
    }

    pub fn children(&self, i: usize) -> &[usize] {
        match &self.nodes[i] {
            FpqNode::Inner { children, .. } => children,
            FpqNode::Leaf(_) => &[],
        }
    }

    fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if let FpqNode::Inner { children, .. } = &self.nodes[i] {
                for &c in children {
                    p[c] = Some(i);
                    stack.push(c);
                }
            }
        }
        p
    }

    pub(crate) fn parents_pub(&self) -> Vec<Option<usize>> {
        self.parents()
    }

    /// Yield (leaf set) of every node, as sorted sets.
    fn yields(&self) -> Vec<BTreeSet<LeafId>> {
        let mut out = vec![BTreeSet::new(); self.nodes.len()];
        fn rec(t: &FpqTree, i: usize, out: &mut Vec<BTreeSet<LeafId>>) {
            match &t.nodes[i] {
                FpqNode::Leaf(l) => {
                    out[i].insert(*l);
                }
                FpqNode::Inner { children, .. } => {
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

    pub fn internal_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if matches!(n, FpqNode::Inner { .. }) && self.reachable(i) {
                out.push(i);
            }
        }
        out
    }

    /// Changes an inner node's kind in place (consistency is the caller's
    /// business; used to relax F to Q).
    pub fn set_kind(&mut self, i: usize, kind: NodeKind) {
        if let FpqNode::Inner { kind: k, .. } = &mut self.nodes[i] {
            *k = kind;
        }
    }

    /// Sorted leaf set of the subtree at `i`.
    pub fn subtree_yield(&self, i: usize) -> BTreeSet<LeafId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(j) = stack.pop() {
            match &self.nodes[j] {
                FpqNode::Leaf(l) => {
                    out.insert(*l);
                }
                FpqNode::Inner { children, .. } => stack.extend(children.iter().copied()),
            }
        }
        out
    }

    pub fn is_reachable(&self, target: usize) -> bool {
        self.reachable(target)
    }

    fn reachable(&self, target: usize) -> bool {
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if i == target {
                return true;
            }
            if let FpqNode::Inner { children, .. } = &self.nodes[i] {
                stack.extend(children.iter().copied());
            }
        }
        false
    }

    /// Mirror image: every Q and F stored sequence reversed. The represented
    /// set becomes the set of reversed cyclic orders.
    pub fn reflected(&self) -> FpqTree {
        let mut t = self.clone();
        let idxs: Vec<usize> = (0..t.nodes.len()).collect();
        for i in idxs {
            if let FpqNode::Inner { kind, children, .. } = &mut t.nodes[i] {
                if *kind != NodeKind::P {
                    children.reverse();
                }
            }
        }
        t
    }

    /// Number of represented cyclic orders, by the product formula. This is
    /// exact for canonical trees and an upper bound otherwise.
    pub fn count_orders(&self) -> u128 {
        fn fact(k: u128) -> u128 {
            (2..=k).product::<u128>().max(1)
        }
        let mut total: u128 = 1;
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if let FpqNode::Inner { kind, children, .. } = &self.nodes[i] {
                let k = children.len() as u128;
                let at_root = i == self.root;
                let factor = match kind {
                    NodeKind::P => {
                        if at_root {
                            fact(k.saturating_sub(1))
                        } else {
                            fact(k)
                        }
                    }
                    NodeKind::Q => {
                        if k >= 2 && !(at_root && k == 2) {
                            2
                        } else {
                            1
                        }
                    }
                    NodeKind::F => 1,
                };
                total = total.saturating_mul(factor);
                stack.extend(children.iter().copied());
            }
        }
        total
    }

    /// All represented cyclic orders; errors out when the count exceeds the
    /// cap.
    pub fn enumerate_orders(&self, cap: u128) -> Result<BTreeSet<CyclicOrder>, FpqError> {
        if self.count_orders() > cap {
            return Err(FpqError::CapExceeded(cap));
        }
        fn linear(t: &FpqTree, i: usize) -> Vec<Vec<LeafId>> {
            match &t.nodes[i] {
                FpqNode::Leaf(l) => vec![vec![*l]],
                FpqNode::Inner { kind, children, .. } => {
                    let child_arr: Vec<Vec<Vec<LeafId>>> =
                        children.iter().map(|&c| linear(t, c)).collect();
                    let orders: Vec<Vec<usize>> = match kind {
                        NodeKind::P => permutations(children.len()),
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
                        let parts: Vec<&Vec<Vec<LeafId>>> =
                            ord.iter().map(|&j| &child_arr[j]).collect();
                        cartesian(&parts, &mut out);
                    }
                    out
                }
            }
        }
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            let mut out = Vec::new();
            let mut acc = Vec::new();
            fn rec(k: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if acc.len() == k {
                    out.push(acc.clone());
                    return;
                }
                for i in 0..k {
                    if !acc.contains(&i) {
                        acc.push(i);
                        rec(k, acc, out);
                        acc.pop();
                    }
                }
            }
            rec(k, &mut acc, &mut out);
            out
        }
        fn cartesian(parts: &[&Vec<Vec<LeafId>>], out: &mut Vec<Vec<LeafId>>) {
            fn rec(
                parts: &[&Vec<Vec<LeafId>>],
                i: usize,
                acc: &mut Vec<LeafId>,
                out: &mut Vec<Vec<LeafId>>,
            ) {
                if i == parts.len() {
                    out.push(acc.clone());
                    return;
                }
                for arr in parts[i].iter() {
                    let len = acc.len();
                    acc.extend_from_slice(arr);
                    rec(parts, i + 1, acc, out);
                    acc.truncate(len);
                }
            }
            rec(parts, 0, &mut Vec::new(), out);
        }

        let mut result = BTreeSet::new();
        match &self.nodes[self.root] {
            FpqNode::Leaf(l) => {
                result.insert(CyclicOrder::new(vec![*l]));
            }
            FpqNode::Inner { kind, children, .. } => {
                let child_arr: Vec<Vec<Vec<LeafId>>> =
                    children.iter().map(|&c| linear(self, c)).collect();
                let orders: Vec<Vec<usize>> = match kind {
                    NodeKind::P => {
                        // Fix child 0 first: cyclic arrangements of blocks.
                        let mut out = Vec::new();
                        let rest: Vec<usize> = (1..children.len()).collect();
                        fn rec(rest: &[usize], acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                            if acc.len() == rest.len() {
                                let mut full = vec![0];
                                full.extend_from_slice(acc);
                                out.push(full);
                                return;
                            }
                            for &i in rest {
                                if !acc.contains(&i) {
                                    acc.push(i);
                                    rec(rest, acc, out);
                                    acc.pop();
                                }
                            }
                        }
                        if children.is_empty() {
                            out.push(vec![]);
                        } else {
                            rec(&rest, &mut Vec::new(), &mut out);
                        }
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
                let mut raw = Vec::new();
                for ord in orders {
                    let parts: Vec<&Vec<Vec<LeafId>>> =
                        ord.iter().map(|&j| &child_arr[j]).collect();
                    cartesian(&parts, &mut raw);
                }
                for seq in raw {
                    result.insert(CyclicOrder::new(seq));
                }
            }
        }
        Ok(result)
    }

    /// Decides whether `sigma` is represented, by consecutive-block parsing
    /// rather than enumeration.
    pub fn represents(&self, sigma: &CyclicOrder) -> Result<bool, FpqError> {
        let ground: BTreeSet<LeafId> = sigma.as_slice().iter().copied().collect();
        if ground != self.ground_set() || ground.len() != sigma.len() {
            return Err(FpqError::GroundMismatch);
        }
        let n = sigma.len();
        if n <= 2 {
            return Ok(true);
        }
        let pos: BTreeMap<LeafId, usize> = sigma
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        let yields = self.yields();

        // Returns Some(arc start) if the node's positions form a cyclic arc.
        let arc_of = |node: usize| -> Option<usize> {
            let set: BTreeSet<usize> = yields[node].iter().map(|l| pos[l]).collect();
            let m = set.len();
            if m == n {
                return Some(0);
            }
            let mut starts = Vec::new();
            for &p in &set {
                let prev = (p + n - 1) % n;
                if !set.contains(&prev) {
                    starts.push(p);
                }
            }
            if starts.len() == 1 {
                Some(starts[0])
            } else {
                None
            }
        };

        // Check every inner node's children blocks.
        let mut ok = true;
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            let FpqNode::Inner { kind, children, .. } = &self.nodes[i] else {
                continue;
            };
            stack.extend(children.iter().copied());
            let Some(start) = arc_of(i) else {
                ok = false;
                break;
            };
            let m = yields[i].len();
            // Map each position in the node's arc to its child.
            let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
            for (ci, &c) in children.iter().enumerate() {
                if arc_of(c).is_none() {
                    ok = false;
                    break;
                }
                for l in &yields[c] {
                    owner.insert(pos[l], ci);
                }
            }
            if !ok {
                break;
            }
            // Read child blocks in arc order. At the root the walk starts at
            // an arbitrary position, so a block may wrap around; merge it.
            let mut blocks = Vec::new();
            for off in 0..m {
                let p = (start + off) % n;
                let ci = owner[&p];
                if blocks.last() != Some(&ci) {
                    blocks.push(ci);
                }
            }
            if i == self.root && m == n && blocks.len() > 1 && blocks.first() == blocks.last() {
                blocks.pop();
            }
            if blocks.len() != children.len() {
                ok = false;
                break;
            }
            let ident: Vec<usize> = (0..children.len()).collect();
            let rev: Vec<usize> = ident.iter().rev().copied().collect();
            let matches = if i == self.root && m == n {
                // Cyclic comparison at the root.
                let rot_eq = |a: &[usize], b: &[usize]| -> bool {
                    (0..a.len()).any(|s| (0..a.len()).all(|j| a[(s + j) % a.len()] == b[j]))
                };
                match kind {
                    NodeKind::P => true,
                    NodeKind::Q => rot_eq(&blocks, &ident) || rot_eq(&blocks, &rev),
                    NodeKind::F => rot_eq(&blocks, &ident),
                }
            } else {
                match kind {
                    NodeKind::P => true,
                    NodeKind::Q => blocks == ident || blocks == rev,
                    NodeKind::F => blocks == ident,
                }
            };
            if !matches {
                ok = false;
                break;
            }
        }
        Ok(ok)
    }

    /// Internal split-edge analysis of a leaf set.
    fn split_set(&self, set: &BTreeSet<LeafId>) -> SplitSet {
        let yields = self.yields();
        let parents = self.parents();
        let ground = self.ground_set();
        debug_assert!(set.is_subset(&ground) && !set.is_empty() && set.len() < ground.len());

        let below = |i: usize| -> bool { yields[i].is_subset(set) };
        let above = |i: usize| -> bool {
            // complement of subtree(i) inside set
            ground.difference(&yields[i]).all(|l| set.contains(l))
        };

        // Deepest node whose complement is inside the set (unique chain).
        let mut parent_side: Option<usize> = None;
        for i in 0..self.nodes.len() {
            if i == self.root || !self.reachable(i) {
                continue;
            }
            if above(i) && !below(i) {
                let deeper = match parent_side {
                    Some(j) => yields[i].len() < yields[j].len(),
                    None => true,
                };
                if deeper {
                    parent_side = Some(i);
                }
            }
        }

        // Maximal child-side splits: below(i) and not below(parent(i)),
        // restricted to the subtree of `parent_side` if that exists.
        let in_scope = |i: usize| -> bool {
            match parent_side {
                None => true,
                Some(c) => {
                    // inside subtree(c)
                    let mut j = i;
                    loop {
                        if j == c {
                            return true;
                        }
                        match parents[j] {
                            Some(p) => j = p,
                            None => return false,
                        }
                    }
                }
            }
        };
        let mut child_splits = Vec::new();
        for i in 0..self.nodes.len() {
            if !self.reachable(i) || i == self.root {
                continue;
            }
            if below(i) && in_scope(i) && i != parent_side.unwrap_or(usize::MAX) {
                let p = parents[i].unwrap();
                let parent_below = below(p) && in_scope(p) && Some(p) != parent_side;
                if !parent_below {
                    child_splits.push(i);
                }
            }
        }

        let total = child_splits.len() + parent_side.iter().len();
        if total == 1 {
            return match parent_side {
                Some(c) => SplitSet::One {
                    node: c,
                    child_side: false,
                },
                None => SplitSet::One {
                    node: child_splits[0],
                    child_side: true,
                },
            };
        }

        // All split edges must be incident to one node chi.
        let chi = match parent_side {
            Some(c) => c,
            None => parents[child_splits[0]].unwrap(),
        };
        for &c in &child_splits {
            if parents[c] != Some(chi) {
                return SplitSet::NotConsecutive;
            }
        }
        let FpqNode::Inner { kind, children, .. } = &self.nodes[chi] else {
            return SplitSet::NotConsecutive;
        };
        if *kind == NodeKind::P {
            return SplitSet::NotConsecutive;
        }
        // Rotation of chi: position 0 = parent edge (non-root only), then
        // children in stored order.
        let has_parent = chi != self.root;
        let deg = children.len() + has_parent as usize;
        let mut s_dirs = Vec::new();
        if parent_side == Some(chi) {
            debug_assert!(has_parent);
            s_dirs.push(0);
        }
        for &c in &child_splits {
            let ci = children.iter().position(|&x| x == c).unwrap();
            s_dirs.push(ci + has_parent as usize);
        }
        s_dirs.sort_unstable();
        // Cyclic consecutiveness of s_dirs in 0..deg.
        let sset: BTreeSet<usize> = s_dirs.iter().copied().collect();
        let mut starts = 0;
        for &d in &sset {
            if !sset.contains(&((d + deg - 1) % deg)) {
                starts += 1;
            }
        }
        if starts != 1 {
            return SplitSet::NotConsecutive;
        }
        // Reorder s_dirs cyclically so they are listed along the run.
        let start = *sset
            .iter()
            .find(|&&d| !sset.contains(&((d + deg - 1) % deg)))
            .unwrap();
        let mut run = Vec::new();
        let mut d = start;
        for _ in 0..sset.len() {
            run.push(d);
            d = (d + 1) % deg;
        }
        SplitSet::Many { chi, s_dirs: run }
    }

    /// True iff the leaves in `set` are consecutive in every represented
    /// cyclic order.
    pub fn is_consecutive(&self, set: &BTreeSet<LeafId>) -> Result<bool, FpqError> {
        let ground = self.ground_set();
        if set.is_empty() || !set.is_subset(&ground) || set.len() >= ground.len() {
            return Err(FpqError::BadLeafSet);
        }
        Ok(!matches!(self.split_set(set), SplitSet::NotConsecutive))
    }

    /// The boundary of a consecutive proper leaf subset.
    pub fn boundary(&self, set: &BTreeSet<LeafId>) -> Result<Boundary, FpqError> {
        let ground = self.ground_set();
        if set.is_empty() || !set.is_subset(&ground) || set.len() >= ground.len() {
            return Err(FpqError::BadLeafSet);
        }
        match self.split_set(set) {
            SplitSet::NotConsecutive => Err(FpqError::NotConsecutive),
            SplitSet::One { .. } => Ok(Boundary::SplitEdge),
            SplitSet::Many { chi, ref s_dirs } => {
                let FpqNode::Inner {
                    kind,
                    children,
                    origin,
                } = &self.nodes[chi]
                else {
                    unreachable!()
                };
                debug_assert!(children.len() + (chi != self.root) as usize >= s_dirs.len() + 2);
                Ok(Boundary::Node {
                    node: chi,
                    origin: *origin,
                    kind: *kind,
                })
            }
        }
    }

    /// The yields of the maximal split subtrees of a consecutive set whose
    /// boundary is a node, listed in the node's default rotation order along
    /// the run. Used for orientation extraction.
    fn boundary_blocks(&self, set: &BTreeSet<LeafId>) -> Option<Vec<BTreeSet<LeafId>>> {
        match self.split_set(set) {
            SplitSet::Many { chi, s_dirs } => {
                let yields = self.yields();
                let ground = self.ground_set();
                let has_parent = chi != self.root;
                let children = self.children(chi);
                let mut blocks = Vec::new();
                for d in s_dirs {
                    if has_parent && d == 0 {
                        let comp: BTreeSet<LeafId> =
                            ground.difference(&yields[chi]).copied().collect();
                        blocks.push(comp);
                    } else {
                        let c = children[d - has_parent as usize];
                        blocks.push(yields[c].clone());
                    }
                }
                Some(blocks)
            }
            _ => None,
        }
    }

    /// Replaces a consecutive leaf set by a single fresh leaf. The workhorse
    /// behind `project` and `contract_blocks`; preserves node identities and
    /// default orientations of surviving Q/F-nodes.
    pub fn replace_consecutive_set(
        &self,
        set: &BTreeSet<LeafId>,
        with: LeafId,
    ) -> Result<FpqTree, FpqError> {
        let ground = self.ground_set();
        if set.is_empty() || !set.is_subset(&ground) || set.len() >= ground.len() {
            return Err(FpqError::BadLeafSet);
        }
        debug_assert!(!ground.contains(&with));
        let mut t = self.clone();
        let leaf_idx = t.nodes.len();
        t.nodes.push(FpqNode::Leaf(with));
        match self.split_set(set) {
            SplitSet::NotConsecutive => return Err(FpqError::NotConsecutive),
            SplitSet::One {
                node,
                child_side: true,
            } => {
                // Replace subtree(node) by the fresh leaf.
                if node == t.root {
                    t.root = leaf_idx;
                } else {
                    let parents = self.parents();
                    let p = parents[node].unwrap();
                    if let FpqNode::Inner { children, .. } = &mut t.nodes[p] {
                        let ci = children.iter().position(|&x| x == node).unwrap();
                        children[ci] = leaf_idx;
                    }
                }
            }
            SplitSet::One {
                node,
                child_side: false,
            } => {
                // The set is everything outside subtree(node): re-root at
                // node, inserting the fresh leaf at the parent slot.
                match &self.nodes[node] {
                    FpqNode::Leaf(_) => {
                        // Tree over {that leaf, with}.
                        let mut b = TreeBuilder::new();
                        let l1 = b.leaf(match &self.nodes[node] {
                            FpqNode::Leaf(l) => *l,
                            _ => unreachable!(),
                        });
                        let l2 = b.leaf(with);
                        let r = b.inner(NodeKind::P, vec![l1, l2]);
                        return Ok(b.finish(r));
                    }
                    FpqNode::Inner {
                        kind,
                        children,
                        origin,
                    } => {
                        let mut new_children = vec![leaf_idx];
                        new_children.extend(children.iter().copied());
                        let new_root = t.nodes.len();
                        t.nodes.push(FpqNode::Inner {
                            kind: *kind,
                            children: new_children,
                            origin: *origin,
                        });
                        t.root = new_root;
                    }
                }
            }
            SplitSet::Many { chi, s_dirs } => {
                let has_parent = chi != self.root;
                if has_parent && s_dirs.contains(&0) {
                    // The parent direction is part of the set: chi becomes
                    // the new root; walk its rotation, replacing the run.
                    let children = self.children(chi).to_vec();
                    let deg = children.len() + 1;
                    let sset: BTreeSet<usize> = s_dirs.iter().copied().collect();
                    // Start just after the run.
                    let last = *s_dirs.last().unwrap();
                    let mut new_children = vec![leaf_idx];
                    let mut d = (last + 1) % deg;
                    while !sset.contains(&d) {
                        debug_assert!(d != 0);
                        new_children.push(children[d - 1]);
                        d = (d + 1) % deg;
                    }
                    let (kind, origin) = match &self.nodes[chi] {
                        FpqNode::Inner { kind, origin, .. } => (*kind, *origin),
                        _ => unreachable!(),
                    };
                    let new_root = t.nodes.len();
                    t.nodes.push(FpqNode::Inner {
                        kind,
                        children: new_children,
                        origin,
                    });
                    t.root = new_root;
                } else {
                    // Replace the child run by the fresh leaf. At the root
                    // the run is cyclic and may wrap; rebuild the rotation
                    // starting at the leaf in that case.
                    let off = has_parent as usize;
                    let cs: Vec<usize> = s_dirs.iter().map(|&d| d - off).collect();
                    let children = self.children(chi).to_vec();
                    let wrapped = cs.windows(2).any(|w| w[1] != w[0] + 1);
                    if !wrapped {
                        if let FpqNode::Inner { children, .. } = &mut t.nodes[chi] {
                            children.splice(cs[0]..cs[0] + cs.len(), std::iter::once(leaf_idx));
                        }
                    } else {
                        debug_assert!(chi == self.root);
                        let k = children.len();
                        let sset: BTreeSet<usize> = cs.iter().copied().collect();
                        let mut new_children = vec![leaf_idx];
                        let mut d = (cs.last().unwrap() + 1) % k;
                        while !sset.contains(&d) {
                            new_children.push(children[d]);
                            d = (d + 1) % k;
                        }
                        if let FpqNode::Inner { children, .. } = &mut t.nodes[chi] {
                            *children = new_children;
                        }
                    }
                }
            }
        }
        Ok(t.canonicalized_preserving())
    }

    /// The pertinent-style projection: replaces the consecutive complement
    /// of `keep` by the fresh leaf `ell`.
    pub fn project(&self, keep: &BTreeSet<LeafId>, ell: LeafId) -> Result<FpqTree, FpqError> {
        let ground = self.ground_set();
        if keep.is_empty() || !keep.is_subset(&ground) || keep.len() >= ground.len() {
            return Err(FpqError::BadLeafSet);
        }
        let ext: BTreeSet<LeafId> = ground.difference(keep).copied().collect();
        self.replace_consecutive_set(&ext, ell).map_err(|e| {
            if e == FpqError::NotConsecutive {
                FpqError::ComplementNotConsecutive
            } else {
                e
            }
        })
    }

    /// The skeletal-style contraction: each block replaced by its label.
    /// Blocks must be disjoint consecutive sets.
    pub fn contract_blocks(
        &self,
        blocks: &[(BTreeSet<LeafId>, LeafId)],
    ) -> Result<FpqTree, FpqError> {
        for (i, (a, _)) in blocks.iter().enumerate() {
            for (b, _) in &blocks[i + 1..] {
                if a.intersection(b).next().is_some() {
                    return Err(FpqError::BadPartition);
                }
            }
        }
        let mut t = self.clone();
        for (block, label) in blocks {
            if block.len() == 1 {
                // Rename the single leaf.
                let l = *block.iter().next().unwrap();
                for n in &mut t.nodes {
                    if let FpqNode::Leaf(x) = n {
                        if *x == l {
                            *x = *label;
                        }
                    }
                }
                t.ground = t
                    .ground
                    .iter()
                    .map(|&x| if x == l { *label } else { x })
                    .collect();
                t.ground.sort_unstable();
                continue;
            }
            t = t.replace_consecutive_set(block, *label)?;
        }
        Ok(t)
    }

    /// Orientation of an extensible order of `set` (given over set + one
    /// fresh label) at the boundary of `set`.
    pub fn orientation_of(
        &self,
        set: &BTreeSet<LeafId>,
        sigma_prime: &CyclicOrder,
    ) -> Result<Orientation, FpqError> {
        let ground = self.ground_set();
        if set.is_empty() || !set.is_subset(&ground) || set.len() >= ground.len() {
            return Err(FpqError::BadLeafSet);
        }
        let labels: BTreeSet<LeafId> = sigma_prime.as_slice().iter().copied().collect();
        let extra: Vec<LeafId> = labels.difference(set).copied().collect();
        if extra.len() != 1 || labels.len() != set.len() + 1 {
            return Err(FpqError::GroundMismatch);
        }
        let ell = extra[0];
        let pert = self.project(set, ell)?;
        if !pert.represents(sigma_prime)? {
            return Ok(Orientation::None);
        }
        match self.boundary(set)? {
            Boundary::SplitEdge => Ok(Orientation::Both),
            Boundary::Node { .. } => {
                let blocks = self.boundary_blocks(set).expect("node boundary has blocks");
                match block_direction(&blocks, sigma_prime) {
                    Some(false) => Ok(Orientation::Clockwise),
                    Some(true) => Ok(Orientation::Counterclockwise),
                    None => Ok(Orientation::None),
                }
            }
        }
    }

    /// Common-extension test: given a partition of the ground set into
    /// consecutive blocks with extensible orders (each over block + a fresh
    /// label), decides whether a common extension exists; on success also
    /// returns one (found by capped search, asserted valid).
    pub fn extension_exists(
        &self,
        assigned: &[(BTreeSet<LeafId>, CyclicOrder)],
        witness_cap: u128,
    ) -> Result<(bool, Option<CyclicOrder>), FpqError> {
        let ground = self.ground_set();
        let mut union = BTreeSet::new();
        for (b, _) in assigned {
            for l in b {
                if !union.insert(*l) {
                    return Err(FpqError::BadPartition);
                }
            }
        }
        if union != ground {
            return Err(FpqError::BadPartition);
        }
        // Pairwise compatibility at shared boundary nodes.
        let mut seen: BTreeMap<OriginId, (usize, Orientation)> = BTreeMap::new();
        for (i, (block, sigma)) in assigned.iter().enumerate() {
            let o = self.orientation_of(block, sigma)?;
            if o == Orientation::None {
                return Ok((false, None));
            }
            if let Boundary::Node { origin, .. } = self.boundary(block)? {
                if let Some(&(_, prev)) = seen.get(&origin) {
                    let incompatible = matches!(
                        (prev, o),
                        (Orientation::Clockwise, Orientation::Counterclockwise)
                            | (Orientation::Counterclockwise, Orientation::Clockwise)
                    );
                    if incompatible {
                        return Ok((false, None));
                    }
                } else {
                    seen.insert(origin, (i, o));
                }
            }
        }
        // Witness by capped filtered enumeration.
        let witness = if self.count_orders() <= witness_cap {
            let all = self.enumerate_orders(witness_cap)?;
            let mut found = None;
            'outer: for sigma in all {
                for (block, want) in assigned {
                    let ell = want
                        .as_slice()
                        .iter()
                        .find(|l| !block.contains(l))
                        .copied()
                        .expect("extensible order carries the fresh label");
                    let mut keep = block.clone();
                    keep.insert(ell);
                    // Contract the complement of the block to ell.
                    let comp: BTreeSet<LeafId> = ground.difference(block).copied().collect();
                    let restricted = sigma.contract(&comp, ell);
                    if &restricted != want {
                        continue 'outer;
                    }
                }
                found = Some(sigma);
                break;
            }
            debug_assert!(
                found.is_some(),
                "a common extension must exist when compatible"
            );
            found
        } else {
            None
        };
        Ok((true, witness))
    }

    /// Full canonicalization; origins are reassigned.
    pub fn canonicalized(&self) -> FpqTree {
        canonicalize(self, true)
    }

    /// Structural cleanup that keeps node kinds and origins intact: splices
    /// unary nodes, contracts a 2-child root, sorts P-children.
    pub fn canonicalized_preserving(&self) -> FpqTree {
        canonicalize(self, false)
    }

    /// Canonical text encoding; equal encodings imply equal represented
    /// sets. Used for deduplication.
    pub fn canonical_key(&self) -> String {
        tree_to_sexpr(&self.canonicalized())
    }
}

/// Public alias used by the dynamic program.
pub fn block_direction_pub(blocks: &[BTreeSet<LeafId>], sigma: &CyclicOrder) -> Option<bool> {
    block_direction(blocks, sigma)
}

/// Direction of a node-boundary's blocks within an order over the set plus
/// external labels: Some(false) if the blocks appear in default order,
/// Some(true) if reversed, None if scrambled.
fn block_direction(blocks: &[BTreeSet<LeafId>], sigma: &CyclicOrder) -> Option<bool> {
    debug_assert!(blocks.len() >= 2);
    let seq = sigma.as_slice();
    let n = seq.len();
    let owner = |l: &LeafId| -> Option<usize> { blocks.iter().position(|b| b.contains(l)) };
    // Collect the cyclic sequence of block ids (with an implicit break at
    // non-block labels).
    let mut runs: Vec<usize> = Vec::new();
    let mut start = 0;
    // Start at a non-block position if one exists, so runs don't wrap.
    if let Some(s) = (0..n).find(|&i| owner(&seq[i]).is_none()) {
        start = s;
    }
    for off in 0..n {
        let l = &seq[(start + off) % n];
        match owner(l) {
            Some(b) => {
                if runs.last() != Some(&b) {
                    runs.push(b);
                }
            }
            None => {}
        }
    }
    if runs.len() != blocks.len() {
        return None;
    }
    let ident: Vec<usize> = (0..blocks.len()).collect();
    let rev: Vec<usize> = ident.iter().rev().copied().collect();
    // The external part anchors the run linearly when it exists; otherwise
    // compare cyclically.
    let all_blocks = seq.iter().all(|l| owner(l).is_some());
    if all_blocks {
        let rot_eq = |a: &[usize], b: &[usize]| -> bool {
            (0..a.len()).any(|s| (0..a.len()).all(|j| a[(s + j) % a.len()] == b[j]))
        };
        if rot_eq(&runs, &ident) {
            Some(false)
        } else if rot_eq(&runs, &rev) {
            Some(true)
        } else {
            None
        }
    } else if runs == ident {
        Some(false)
    } else if runs == rev {
        Some(true)
    } else {
        None
    }
}

/// Incremental tree construction.
pub struct TreeBuilder {
    nodes: Vec<FpqNode>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder { nodes: Vec::new() }
    }

    pub fn leaf(&mut self, l: LeafId) -> usize {
        self.nodes.push(FpqNode::Leaf(l));
        self.nodes.len() - 1
    }

    pub fn inner(&mut self, kind: NodeKind, children: Vec<usize>) -> usize {
        let origin = OriginId(self.nodes.len() as u32);
        self.nodes.push(FpqNode::Inner {
            kind,
            children,
            origin,
        });
        self.nodes.len() - 1
    }

    pub fn finish(self, root: usize) -> FpqTree {
        let mut t = FpqTree {
            nodes: self.nodes,
            root,
            ground: Vec::new(),
        };
        let mut ground: Vec<LeafId> = t.yields()[t.root].iter().copied().collect();
        ground.sort_unstable();
        t.ground = ground;
        t
    }
}

impl Default for TreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Rebuilds the tree in canonical(ish) form. With `fresh`, additionally
/// converts 2-child interior Q to P, merges F into F, normalizes Q/F
/// directions and rotations, and reassigns origins.
fn canonicalize(t: &FpqTree, fresh: bool) -> FpqTree {
    #[derive(Clone, Debug)]
    enum N {
        Leaf(LeafId),
        Inner {
            kind: NodeKind,
            children: Vec<N>,
            origin: OriginId,
        },
    }

    fn build(t: &FpqTree, i: usize) -> N {
        match &t.nodes[i] {
            FpqNode::Leaf(l) => N::Leaf(*l),
            FpqNode::Inner {
                kind,
                children,
                origin,
            } => N::Inner {
                kind: *kind,
                children: children.iter().map(|&c| build(t, c)).collect(),
                origin: *origin,
            },
        }
    }

    // Splice unary nodes; at the root, descend instead.
    fn splice(n: N) -> N {
        match n {
            N::Leaf(_) => n,
            N::Inner {
                kind,
                children,
                origin,
            } => {
                let children: Vec<N> = children.into_iter().map(splice).collect();
                if children.len() == 1 {
                    children.into_iter().next().unwrap()
                } else {
                    N::Inner {
                        kind,
                        children,
                        origin,
                    }
                }
            }
        }
    }

    fn fresh_pass(n: N, at_root: bool) -> N {
        match n {
            N::Leaf(_) => n,
            N::Inner {
                kind,
                children,
                origin,
            } => {
                let mut children: Vec<N> =
                    children.into_iter().map(|c| fresh_pass(c, false)).collect();
                let mut kind = kind;
                // Interior 2-child Q is unordered; keep interior F.
                if kind == NodeKind::Q && children.len() == 2 && !at_root {
                    kind = NodeKind::P;
                }
                if at_root && children.len() == 2 && kind != NodeKind::P {
                    // Cyclic arrangement of two blocks is unique.
                    kind = NodeKind::P;
                }
                // Merge F children into an F parent, in place.
                if kind == NodeKind::F {
                    let mut merged = Vec::new();
                    for c in children {
                        match c {
                            N::Inner {
                                kind: NodeKind::F,
                                children: gc,
                                ..
                            } => merged.extend(gc),
                            other => merged.push(other),
                        }
                    }
                    children = merged;
                }
                N::Inner {
                    kind,
                    children,
                    origin,
                }
            }
        }
    }

    fn key(n: &N) -> String {
        match n {
            N::Leaf(l) => format!("{}", l.0),
            N::Inner { kind, children, .. } => {
                let k = match kind {
                    NodeKind::P => "P",
                    NodeKind::Q => "Q",
                    NodeKind::F => "F",
                };
                let parts: Vec<String> = children.iter().map(key).collect();
                format!("({} {})", k, parts.join(" "))
            }
        }
    }

    fn order_pass(n: N, at_root: bool) -> N {
        match n {
            N::Leaf(_) => n,
            N::Inner {
                kind,
                children,
                origin,
            } => {
                let mut children: Vec<N> =
                    children.into_iter().map(|c| order_pass(c, false)).collect();
                match kind {
                    NodeKind::P => {
                        children.sort_by_key(key);
                    }
                    NodeKind::Q => {
                        if at_root {
                            children = best_rotation(children, true);
                        } else {
                            let fwd: Vec<String> = children.iter().map(key).collect();
                            let rev: Vec<String> = fwd.iter().rev().cloned().collect();
                            if rev < fwd {
                                children.reverse();
                            }
                        }
                    }
                    NodeKind::F => {
                        if at_root {
                            children = best_rotation(children, false);
                        }
                    }
                }
                N::Inner {
                    kind,
                    children,
                    origin,
                }
            }
        }
    }

    fn best_rotation(children: Vec<N>, allow_reverse: bool) -> Vec<N> {
        let keys: Vec<String> = children.iter().map(key).collect();
        let k = children.len();
        let mut best: Option<(Vec<String>, usize, bool)> = None;
        for rev in [false, true] {
            if rev && !allow_reverse {
                continue;
            }
            let seq: Vec<String> = if rev {
                keys.iter().rev().cloned().collect()
            } else {
                keys.clone()
            };
            for s in 0..k {
                let cand: Vec<String> = (0..k).map(|j| seq[(s + j) % k].clone()).collect();
                if best.as_ref().map(|(b, _, _)| &cand < b).unwrap_or(true) {
                    best = Some((cand, s, rev));
                }
            }
        }
        let (_, s, rev) = best.unwrap();
        let mut seq: Vec<N> = if rev {
            children.into_iter().rev().collect()
        } else {
            children
        };
        seq.rotate_left(s);
        seq
    }

    fn emit(n: &N, b: &mut TreeBuilder, fresh: bool) -> usize {
        match n {
            N::Leaf(l) => b.leaf(*l),
            N::Inner {
                kind,
                children,
                origin,
            } => {
                let ch: Vec<usize> = children.iter().map(|c| emit(c, b, fresh)).collect();
                if fresh {
                    b.inner(*kind, ch)
                } else {
                    let idx = b.inner(*kind, ch);
                    if let FpqNode::Inner { origin: o, .. } = &mut b.nodes[idx] {
                        *o = *origin;
                    }
                    idx
                }
            }
        }
    }

    let mut n = splice(build(t, t.root));
    // Contract a root with two children when at least one child is internal:
    // a degree-2 node of the unrooted tree is spurious.
    loop {
        if let N::Inner {
            ref kind,
            ref children,
            ..
        } = n
        {
            if children.len() == 2 {
                let internal = children.iter().position(|c| matches!(c, N::Inner { .. }));
                if let Some(ci) = internal {
                    let kind = *kind;
                    let _ = kind;
                    let mut it = match n {
                        N::Inner { children, .. } => children.into_iter(),
                        _ => unreachable!(),
                    };
                    let first = it.next().unwrap();
                    let second = it.next().unwrap();
                    let (sibling, target) = if ci == 0 {
                        (second, first)
                    } else {
                        (first, second)
                    };
                    n = match target {
                        N::Inner {
                            kind,
                            mut children,
                            origin,
                        } => {
                            // Sibling takes the parent slot: first position.
                            let mut nc = vec![sibling];
                            nc.append(&mut children);
                            N::Inner {
                                kind,
                                children: nc,
                                origin,
                            }
                        }
                        _ => unreachable!(),
                    };
                    continue;
                }
            }
        }
        break;
    }
    if fresh {
        n = fresh_pass(n, true);
        n = splice(n);
        n = order_pass(n, true);
    }
    // Root Q/F over two leaves is unordered cyclically.
    if let N::Inner {
        kind, ref children, ..
    } = n
    {
        if children.len() == 2 && kind != NodeKind::P {
            if let N::Inner { kind: k2, .. } = &mut n {
                *k2 = NodeKind::P;
            }
            if fresh {
                n = order_pass(n, true);
            }
        }
    }
    let mut b = TreeBuilder::new();
    let root = emit(&n, &mut b, fresh);
    let mut out = b.finish(root);
    if fresh {
        // Origins are positional after a fresh rebuild.
        let idxs: Vec<usize> = (0..out.nodes.len()).collect();
        for i in idxs {
            if let FpqNode::Inner { origin, .. } = &mut out.nodes[i] {
                *origin = OriginId(i as u32);
            }
        }
    }
    out
}
