//! SPQR decomposition of biconnected planar multigraphs by recursive
//! split-pair decomposition, with per-vertex embedding trees and pertinent
//! bookkeeping for the dynamic program.
//!
//! S-nodes are normalized to exactly two children; adjacent P-nodes with the
//! same poles are merged; R-node skeletons get one of their two planar
//! embeddings attached (the mirror is derived on demand).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::fpq::{FpqTree, LeafId, NodeKind, TreeBuilder};
use crate::graph::{EdgeId, MultiGraph, VertexId};
use crate::planar::embed_biconnected_simple;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpqrError {
    #[error("graph is not biconnected")]
    NotBiconnected,
    #[error("graph has fewer than two edges")]
    TooSmall,
    #[error("graph is not planar")]
    NotPlanar,
    #[error("unknown vertex")]
    UnknownVertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpqrKind {
    S,
    P,
    R,
    Q,
}

/// A direction in a skeleton: a real edge of G, the virtual edge toward a
/// child, or the virtual edge toward the parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SkelEdgeRef {
    Real(EdgeId),
    Child(usize),
    Parent,
}

#[derive(Debug, Clone)]
pub struct SpqrNode {
    pub kind: SpqrKind,
    pub poles: (VertexId, VertexId),
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Endpoints of every skeleton edge (children and, for the root Q-node,
    /// its real edge; the parent virtual edge spans the poles).
    pub skel_edges: Vec<(SkelEdgeRef, (VertexId, VertexId))>,
    /// For R-nodes: one planar rotation of the skeleton (the reference
    /// embedding); the mirror is its reflection.
    pub skel_rotation: Option<BTreeMap<VertexId, Vec<SkelEdgeRef>>>,
}

#[derive(Debug, Clone)]
pub struct SpqrTree {
    nodes: Vec<SpqrNode>,
    root: usize,
    ref_edge: EdgeId,
}

/// Work items during construction: a real edge or an already-built subtree.
#[derive(Debug, Clone, Copy)]
enum Item {
    Real(EdgeId, (VertexId, VertexId)),
    Built(usize, (VertexId, VertexId)),
}

impl Item {
    fn ends(&self) -> (VertexId, VertexId) {
        match self {
            Item::Real(_, e) | Item::Built(_, e) => *e,
        }
    }
}

struct Builder {
    nodes: Vec<SpqrNode>,
}

impl Builder {
    fn push(&mut self, node: SpqrNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn item_node(&mut self, it: Item, poles: (VertexId, VertexId)) -> usize {
        match it {
            Item::Real(e, ends) => self.push(SpqrNode {
                kind: SpqrKind::Q,
                poles: orient(ends, poles),
                parent: None,
                children: Vec::new(),
                skel_edges: vec![(SkelEdgeRef::Real(e), orient(ends, poles))],
                skel_rotation: None,
            }),
            Item::Built(idx, _) => idx,
        }
    }

    /// Separation classes of `items` with respect to `{u, v}`: two items are
    /// equivalent when joined by a path avoiding u and v internally.
    fn classes(items: &[Item], u: VertexId, v: VertexId) -> Vec<Vec<usize>> {
        let n = items.len();
        let mut dsu: Vec<usize> = (0..n).collect();
        fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
            if dsu[x] != x {
                let r = find(dsu, dsu[x]);
                dsu[x] = r;
            }
            dsu[x]
        }
        let mut by_vertex: HashMap<VertexId, usize> = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            let (a, b) = it.ends();
            for x in [a, b] {
                if x == u || x == v {
                    continue;
                }
                match by_vertex.get(&x) {
                    Some(&j) => {
                        let (ri, rj) = (find(&mut dsu, i), find(&mut dsu, j));
                        dsu[ri] = rj;
                    }
                    None => {
                        by_vertex.insert(x, i);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut dsu, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Orders path items from u to v; None if they do not form a u-v path.
    fn as_path(items: &[Item], u: VertexId, v: VertexId) -> Option<Vec<usize>> {
        let mut deg: HashMap<VertexId, Vec<usize>> = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            let (a, b) = it.ends();
            if a == b {
                return None;
            }
            deg.entry(a).or_default().push(i);
            deg.entry(b).or_default().push(i);
        }
        for (x, inc) in &deg {
            let want = if *x == u || *x == v { 1 } else { 2 };
            if inc.len() != want {
                return None;
            }
        }
        let mut order = Vec::new();
        let mut cur = u;
        let mut used = vec![false; items.len()];
        while cur != v {
            let inc = deg.get(&cur)?;
            let &i = inc.iter().find(|&&i| !used[i])?;
            used[i] = true;
            order.push(i);
            let (a, b) = items[i].ends();
            cur = if a == cur { b } else { a };
        }
        if order.len() == items.len() {
            Some(order)
        } else {
            None
        }
    }

    /// A split pair of items + virtual(u,v): either a vertex pair with two
    /// or more parallel items, or a pair whose removal disconnects the rest.
    fn find_split_pair(items: &[Item], u: VertexId, v: VertexId) -> Option<(VertexId, VertexId)> {
        // Parallel items.
        let mut pairs: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
        for it in items {
            let (a, b) = it.ends();
            let key = (a.min(b), a.max(b));
            *pairs.entry(key).or_insert(0) += 1;
        }
        for (&(a, b), &cnt) in &pairs {
            if cnt >= 2 {
                return Some((a, b));
            }
        }
        // Separation pairs of K = items + virt(u,v), by brute force.
        let mut verts: BTreeSet<VertexId> = BTreeSet::new();
        for it in items {
            let (a, b) = it.ends();
            verts.insert(a);
            verts.insert(b);
        }
        let vs: Vec<VertexId> = verts.iter().copied().collect();
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                let (a, b) = (vs[i], vs[j]);
                // Connectivity of K - {a,b} over remaining vertices.
                let rest: Vec<VertexId> =
                    vs.iter().copied().filter(|&x| x != a && x != b).collect();
                if rest.is_empty() {
                    continue;
                }
                let mut adj: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
                for it in items {
                    let (x, y) = it.ends();
                    if x == a || x == b || y == a || y == b {
                        continue;
                    }
                    adj.entry(x).or_default().push(y);
                    adj.entry(y).or_default().push(x);
                }
                // The virtual edge (u,v) too.
                if u != a && u != b && v != a && v != b {
                    adj.entry(u).or_default().push(v);
                    adj.entry(v).or_default().push(u);
                }
                let mut seen: BTreeSet<VertexId> = [rest[0]].into();
                let mut stack = vec![rest[0]];
                while let Some(x) = stack.pop() {
                    for &y in adj.get(&x).into_iter().flatten() {
                        if seen.insert(y) {
                            stack.push(y);
                        }
                    }
                }
                if seen.len() < rest.len() {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Builds the node for a pertinent graph given as items, with poles u,v.
    fn node(&mut self, items: Vec<Item>, u: VertexId, v: VertexId) -> usize {
        if items.len() == 1 {
            return self.item_node(items[0], (u, v));
        }
        let classes = Self::classes(&items, u, v);
        if classes.len() >= 2 {
            // Parallel composition.
            let mut children = Vec::new();
            for cl in classes {
                let sub: Vec<Item> = cl.iter().map(|&i| items[i]).collect();
                children.push(self.node(sub, u, v));
            }
            return self.finish_inner(SpqrKind::P, (u, v), children);
        }
        // Single class: series or rigid or further split.
        if let Some(order) = Self::as_path(&items, u, v) {
            // Series composition, binarized.
            debug_assert!(order.len() >= 2);
            let first = items[order[0]];
            let x = {
                let (a, b) = first.ends();
                if a == u {
                    b
                } else {
                    a
                }
            };
            let c1 = self.item_node(first, (u, x));
            let rest: Vec<Item> = order[1..].iter().map(|&i| items[i]).collect();
            let c2 = if rest.len() == 1 {
                self.item_node(rest[0], (x, v))
            } else {
                self.node(rest, x, v)
            };
            return self.finish_inner(SpqrKind::S, (u, v), vec![c1, c2]);
        }
        if let Some((a, b)) = Self::find_split_pair(&items, u, v) {
            // Split off everything separated by {a,b} that does not contain
            // the virtual parent edge.
            let n = items.len();
            let mut dsu: Vec<usize> = (0..=n).collect(); // n = the virtual edge
            fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
                if dsu[x] != x {
                    let r = find(dsu, dsu[x]);
                    dsu[x] = r;
                }
                dsu[x]
            }
            let mut by_vertex: HashMap<VertexId, usize> = HashMap::new();
            let link = |dsu: &mut Vec<usize>,
                        by_vertex: &mut HashMap<VertexId, usize>,
                        idx: usize,
                        x: VertexId| {
                if x == a || x == b {
                    return;
                }
                match by_vertex.get(&x) {
                    Some(&j) => {
                        let (ri, rj) = (find(dsu, idx), find(dsu, j));
                        dsu[ri] = rj;
                    }
                    None => {
                        by_vertex.insert(x, idx);
                    }
                }
            };
            for (i, it) in items.iter().enumerate() {
                let (x, y) = it.ends();
                link(&mut dsu, &mut by_vertex, i, x);
                link(&mut dsu, &mut by_vertex, i, y);
            }
            link(&mut dsu, &mut by_vertex, n, u);
            link(&mut dsu, &mut by_vertex, n, v);
            let main_root = find(&mut dsu, n);
            let split_items: Vec<Item> = (0..n)
                .filter(|&i| find(&mut dsu, i) != main_root)
                .map(|i| items[i])
                .collect();
            debug_assert!(
                !split_items.is_empty(),
                "split pair must separate something"
            );
            let mut main_items: Vec<Item> = (0..n)
                .filter(|&i| find(&mut dsu, i) == main_root)
                .map(|i| items[i])
                .collect();
            let child = self.node(split_items, a, b);
            main_items.push(Item::Built(child, (a, b)));
            return self.node(main_items, u, v);
        }
        // Triconnected: rigid node.
        let children: Vec<usize> = items
            .iter()
            .map(|&it| self.item_node(it, it.ends()))
            .collect();
        self.finish_inner(SpqrKind::R, (u, v), children)
    }

    fn finish_inner(
        &mut self,
        kind: SpqrKind,
        poles: (VertexId, VertexId),
        children: Vec<usize>,
    ) -> usize {
        let mut skel_edges: Vec<(SkelEdgeRef, (VertexId, VertexId))> = children
            .iter()
            .map(|&c| (SkelEdgeRef::Child(c), self.nodes[c].poles))
            .collect();
        skel_edges.push((SkelEdgeRef::Parent, poles));
        self.push(SpqrNode {
            kind,
            poles,
            parent: None,
            children,
            skel_edges,
            skel_rotation: None,
        })
    }
}

fn orient(ends: (VertexId, VertexId), poles: (VertexId, VertexId)) -> (VertexId, VertexId) {
    if ends.0 == poles.0 || ends.1 == poles.1 {
        ends
    } else {
        (ends.1, ends.0)
    }
}

impl SpqrTree {
    /// Decomposes a biconnected multigraph with at least two edges. The tree
    /// is rooted at the Q-node of the lexicographically smallest edge name.
    /// Fails with NotPlanar when some R-skeleton is non-planar.
    pub fn decompose(g: &MultiGraph) -> Result<SpqrTree, SpqrError> {
        if g.n_edges() < 2 {
            return Err(SpqrError::TooSmall);
        }
        if !g.is_biconnected() {
            return Err(SpqrError::NotBiconnected);
        }
        let ref_edge = g
            .edges()
            .min_by(|&a, &b| g.edge_name(a).cmp(g.edge_name(b)))
            .unwrap();
        let (u, v) = g.endpoints(ref_edge);
        let items: Vec<Item> = g
            .edges()
            .filter(|&e| e != ref_edge)
            .map(|e| Item::Real(e, g.endpoints(e)))
            .collect();
        let mut b = Builder { nodes: Vec::new() };
        let child = b.node(items, u, v);
        let root = b.push(SpqrNode {
            kind: SpqrKind::Q,
            poles: (u, v),
            parent: None,
            children: vec![child],
            skel_edges: vec![
                (SkelEdgeRef::Real(ref_edge), (u, v)),
                (SkelEdgeRef::Child(child), (u, v)),
            ],
            skel_rotation: None,
        });
        let mut t = SpqrTree {
            nodes: b.nodes,
            root,
            ref_edge,
        };
        t.merge_parallel_p();
        t.set_parents();
        t.embed_rigids()?;
        debug_assert!(t.validate(g));
        Ok(t)
    }

    fn set_parents(&mut self) {
        let mut stack = vec![self.root];
        self.nodes[self.root].parent = None;
        while let Some(i) = stack.pop() {
            let children = self.nodes[i].children.clone();
            for c in children {
                self.nodes[c].parent = Some(i);
                stack.push(c);
            }
        }
    }

    /// Merges a P-child into a P-parent with the same poles.
    fn merge_parallel_p(&mut self) {
        loop {
            let mut merged = false;
            let idxs: Vec<usize> = self.reachable_nodes();
            for i in idxs {
                if self.nodes[i].kind != SpqrKind::P {
                    continue;
                }
                let poles = self.nodes[i].poles;
                let children = self.nodes[i].children.clone();
                let mut new_children = Vec::new();
                let mut changed = false;
                for c in children {
                    let same_pair = self.nodes[c].kind == SpqrKind::P && {
                        let cp = self.nodes[c].poles;
                        (cp == poles) || (cp == (poles.1, poles.0))
                    };
                    if same_pair {
                        new_children.extend(self.nodes[c].children.clone());
                        changed = true;
                    } else {
                        new_children.push(c);
                    }
                }
                if changed {
                    self.nodes[i].children = new_children.clone();
                    self.nodes[i].skel_edges = new_children
                        .iter()
                        .map(|&c| (SkelEdgeRef::Child(c), self.nodes[c].poles))
                        .collect();
                    self.nodes[i].skel_edges.push((SkelEdgeRef::Parent, poles));
                    merged = true;
                }
            }
            if !merged {
                break;
            }
        }
    }

    fn reachable_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.nodes[i].children.iter().copied());
        }
        out
    }

    /// Computes a planar rotation for every R-skeleton via the incremental
    /// embedder; non-planar skeletons make the whole graph non-planar.
    fn embed_rigids(&mut self) -> Result<(), SpqrError> {
        for i in self.reachable_nodes() {
            if self.nodes[i].kind != SpqrKind::R {
                continue;
            }
            // Build the skeleton as a simple named graph.
            let mut sg = MultiGraph::empty();
            let mut ref_of: Vec<(String, SkelEdgeRef)> = Vec::new();
            for (k, &(r, (a, b))) in self.nodes[i].skel_edges.iter().enumerate() {
                let name = format!("s{}", k);
                sg.add_edge(&name, &format!("v{}", a.0), &format!("v{}", b.0))
                    .map_err(|_| SpqrError::NotPlanar)?;
                ref_of.push((name, r));
            }
            let rho = embed_biconnected_simple(&sg).ok_or(SpqrError::NotPlanar)?;
            let mut rotation: BTreeMap<VertexId, Vec<SkelEdgeRef>> = BTreeMap::new();
            for sv in sg.vertices() {
                let orig = VertexId(sg.vertex_name(sv)[1..].parse::<u32>().unwrap());
                let ring: Vec<SkelEdgeRef> = rho.order[sv.0 as usize]
                    .iter()
                    .map(|d| {
                        let name = sg.edge_name(d.edge);
                        ref_of.iter().find(|(n, _)| n == name).unwrap().1
                    })
                    .collect();
                rotation.insert(orig, ring);
            }
            self.nodes[i].skel_rotation = Some(rotation);
        }
        Ok(())
    }

    fn validate(&self, g: &MultiGraph) -> bool {
        // Reconstruction: the Q-leaves' real edges are exactly E(G).
        let mut reals: Vec<EdgeId> = Vec::new();
        for i in self.reachable_nodes() {
            for &(r, _) in &self.nodes[i].skel_edges {
                if let SkelEdgeRef::Real(e) = r {
                    reals.push(e);
                }
            }
        }
        reals.sort_unstable();
        let mut want: Vec<EdgeId> = g.edges().collect();
        want.sort_unstable();
        if reals != want {
            return false;
        }
        for i in self.reachable_nodes() {
            let n = &self.nodes[i];
            match n.kind {
                SpqrKind::S => {
                    if n.children.len() != 2 {
                        return false;
                    }
                }
                SpqrKind::P => {
                    // Skeleton has >= 3 parallel edges counting the parent.
                    if n.children.len() < 2 {
                        return false;
                    }
                    if n.children.iter().any(|&c| {
                        self.nodes[c].kind == SpqrKind::P
                            && (self.nodes[c].poles == n.poles
                                || self.nodes[c].poles == (n.poles.1, n.poles.0))
                    }) {
                        return false;
                    }
                }
                SpqrKind::R => {
                    if n.skel_rotation.is_none() {
                        return false;
                    }
                }
                SpqrKind::Q => {}
            }
        }
        true
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn ref_edge(&self) -> EdgeId {
        self.ref_edge
    }

    pub fn node(&self, i: usize) -> &SpqrNode {
        &self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// All tree nodes reachable from the root, children before parents.
    pub fn postorder(&self) -> Vec<usize> {
        fn rec(t: &SpqrTree, i: usize, out: &mut Vec<usize>) {
            for &c in &t.nodes[i].children {
                rec(t, c, out);
            }
            out.push(i);
        }
        let mut out = Vec::new();
        rec(self, self.root, &mut out);
        out
    }

    /// Real edges of the pertinent graph of node `mu`. The root's real edge
    /// only ever appears when `mu` is the root itself, since the traversal
    /// descends through children.
    pub fn pertinent_edges(&self, mu: usize) -> BTreeSet<EdgeId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![mu];
        while let Some(i) = stack.pop() {
            for &(r, _) in &self.nodes[i].skel_edges {
                if let SkelEdgeRef::Real(e) = r {
                    out.insert(e);
                }
            }
            stack.extend(self.nodes[i].children.iter().copied());
        }
        out
    }

    /// E*_mu(v): the edges of the pertinent graph incident to the pole v, as
    /// FPQ leaf ids (edge ids).
    pub fn pertinent_leafset(&self, g: &MultiGraph, mu: usize, v: VertexId) -> BTreeSet<LeafId> {
        debug_assert!(self.nodes[mu].poles.0 == v || self.nodes[mu].poles.1 == v);
        self.pertinent_edges(mu)
            .into_iter()
            .filter(|&e| {
                let (a, b) = g.endpoints(e);
                a == v || b == v
            })
            .map(|e| LeafId(e.0))
            .collect()
    }

    /// Vertices strictly inside the pertinent graph of `mu` (not poles).
    pub fn internal_vertices(&self, g: &MultiGraph, mu: usize) -> BTreeSet<VertexId> {
        let mut verts = BTreeSet::new();
        for e in self.pertinent_edges(mu) {
            let (a, b) = g.endpoints(e);
            verts.insert(a);
            verts.insert(b);
        }
        verts.remove(&self.nodes[mu].poles.0);
        verts.remove(&self.nodes[mu].poles.1);
        verts
    }

    /// The topmost tree node whose skeleton contains `v`.
    fn top_node_of(&self, g: &MultiGraph, v: VertexId) -> usize {
        let (ru, rv) = self.nodes[self.root].poles;
        if v == ru || v == rv {
            return self.root;
        }
        let mut cur = self.nodes[self.root].children[0];
        loop {
            if self.nodes[cur]
                .skel_edges
                .iter()
                .any(|&(_, (a, b))| a == v || b == v)
            {
                return cur;
            }
            let next = self.nodes[cur].children.iter().copied().find(|&c| {
                self.internal_vertices(g, c).contains(&v)
                    || self.nodes[c].poles.0 == v
                    || self.nodes[c].poles.1 == v
            });
            cur = next.expect("vertex lies in some child pertinent graph");
        }
    }

    /// The embedding tree of v: a PQ-tree over E(v) whose represented cyclic
    /// orders are exactly the rotations of v over all planar embeddings.
    pub fn embedding_tree(&self, g: &MultiGraph, v: VertexId) -> Result<FpqTree, SpqrError> {
        if v.0 as usize >= g.n_vertices() {
            return Err(SpqrError::UnknownVertex);
        }
        let top = self.top_node_of(g, v);
        let mut b = TreeBuilder::new();
        let root = self.emb_node(g, v, top, None, &mut b);
        Ok(b.finish(root).canonicalized())
    }

    fn emb_node(
        &self,
        g: &MultiGraph,
        v: VertexId,
        mu: usize,
        entry: Option<SkelEdgeRef>,
        b: &mut TreeBuilder,
    ) -> usize {
        let node = &self.nodes[mu];
        // Incident skeleton directions at v, excluding the entry.
        let incident: Vec<SkelEdgeRef> = match (&node.skel_rotation, node.kind) {
            (Some(rot), SpqrKind::R) => rot[&v].clone(),
            _ => node
                .skel_edges
                .iter()
                .filter(|&&(_, (a, bb))| a == v || bb == v)
                .map(|&(r, _)| r)
                .collect(),
        };
        let mut dirs: Vec<SkelEdgeRef> = Vec::new();
        if node.kind == SpqrKind::R {
            // Keep the rotation order, cut at the entry.
            let start = match entry {
                Some(e) => incident.iter().position(|&r| r == e).unwrap() + 1,
                None => 0,
            };
            for off in 0..incident.len() {
                let r = incident[(start + off) % incident.len()];
                if Some(r) != entry {
                    dirs.push(r);
                }
            }
        } else {
            for &r in &incident {
                if Some(r) != entry {
                    dirs.push(r);
                }
            }
        }
        let children: Vec<usize> = dirs
            .iter()
            .map(|&r| match r {
                SkelEdgeRef::Real(e) => b.leaf(LeafId(e.0)),
                SkelEdgeRef::Child(c) => self.emb_node(g, v, c, Some(SkelEdgeRef::Parent), b),
                SkelEdgeRef::Parent => {
                    let p = node.parent.expect("parent direction exists");
                    let back = SkelEdgeRef::Child(mu);
                    self.emb_node(g, v, p, Some(back), b)
                }
            })
            .collect();
        if children.len() == 1 {
            return children[0];
        }
        let kind = match node.kind {
            SpqrKind::R => NodeKind::Q,
            _ => NodeKind::P,
        };
        b.inner(kind, children)
    }

    /// Face walks (as vertex lists) of a rigid node's embedded skeleton,
    /// traced from the stored rotation. Skeletons are simple, so an edge
    /// reference identifies a unique edge.
    pub fn skeleton_faces(&self, mu: usize) -> Vec<Vec<VertexId>> {
        let node = &self.nodes[mu];
        let rot = node
            .skel_rotation
            .as_ref()
            .expect("embedded rigid skeleton");
        let ends_of = |r: SkelEdgeRef| -> (VertexId, VertexId) {
            node.skel_edges.iter().find(|&&(x, _)| x == r).unwrap().1
        };
        let mut faces = Vec::new();
        let mut seen: BTreeSet<(SkelEdgeRef, u8)> = BTreeSet::new();
        for &(r, _) in &node.skel_edges {
            for end in 0..2u8 {
                if seen.contains(&(r, end)) {
                    continue;
                }
                let mut face = Vec::new();
                let mut dart = (r, end);
                loop {
                    seen.insert(dart);
                    let (a, b) = ends_of(dart.0);
                    let tail = if dart.1 == 0 { a } else { b };
                    face.push(tail);
                    // Successor of the twin in the rotation at its tail.
                    let twin = (dart.0, 1 - dart.1);
                    let (ta, tb) = ends_of(twin.0);
                    let tv = if twin.1 == 0 { ta } else { tb };
                    let ring = &rot[&tv];
                    let pos = ring.iter().position(|&x| x == twin.0).unwrap();
                    let nxt = ring[(pos + 1) % ring.len()];
                    let (na, nb) = ends_of(nxt);
                    let nend = if na == tv {
                        0
                    } else {
                        debug_assert_eq!(nb, tv);
                        1
                    };
                    dart = (nxt, nend);
                    if dart == (r, end) {
                        break;
                    }
                }
                faces.push(face);
            }
        }
        faces
    }

    /// Debug dump: node kinds, poles and skeleton edges, indented.
    pub fn dump(&self, g: &MultiGraph) -> String {
        fn rec(t: &SpqrTree, g: &MultiGraph, i: usize, depth: usize, out: &mut String) {
            let n = &t.nodes[i];
            let kind = match n.kind {
                SpqrKind::S => "S",
                SpqrKind::P => "P",
                SpqrKind::R => "R",
                SpqrKind::Q => "Q",
            };
            let skel: Vec<String> = n
                .skel_edges
                .iter()
                .map(|&(r, (a, b))| {
                    let tag = match r {
                        SkelEdgeRef::Real(e) => format!("real {}", g.edge_name(e)),
                        SkelEdgeRef::Child(c) => format!("virt child#{}", c),
                        SkelEdgeRef::Parent => "virt parent".to_string(),
                    };
                    format!("{} ({}-{})", tag, g.vertex_name(a), g.vertex_name(b))
                })
                .collect();
            out.push_str(&format!(
                "{}{}-node poles ({},{}) skeleton [{}]\n",
                "  ".repeat(depth),
                kind,
                g.vertex_name(n.poles.0),
                g.vertex_name(n.poles.1),
                skel.join(", ")
            ));
            for &c in &n.children {
                rec(t, g, c, depth + 1, out);
            }
        }
        let mut s = String::new();
        rec(self, g, self.root, 0, &mut s);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpq::CyclicOrder;
    use crate::graph::{for_each_rotation_system, is_planar_rotation, rotation_system_count};

    fn dipole3() -> MultiGraph {
        MultiGraph::build(&[], &[("e1", "a", "b"), ("e2", "a", "b"), ("e3", "a", "b")]).unwrap()
    }

    #[test]
    fn dipole_is_one_p_node() {
        let g = dipole3();
        let t = SpqrTree::decompose(&g).unwrap();
        let root = t.node(t.root());
        assert_eq!(root.kind, SpqrKind::Q);
        let child = t.node(root.children[0]);
        assert_eq!(child.kind, SpqrKind::P);
        assert_eq!(child.children.len(), 2);
        assert!(child
            .children
            .iter()
            .all(|&c| t.node(c).kind == SpqrKind::Q));
    }

    #[test]
    fn cycle_is_binarized_s_chain() {
        let g = MultiGraph::build(
            &[],
            &[
                ("e1", "a", "b"),
                ("e2", "b", "c"),
                ("e3", "c", "d"),
                ("e4", "d", "a"),
            ],
        )
        .unwrap();
        let t = SpqrTree::decompose(&g).unwrap();
        let mut s_nodes = 0;
        let mut q_leaves = 0;
        for i in t.postorder() {
            match t.node(i).kind {
                SpqrKind::S => {
                    assert_eq!(t.node(i).children.len(), 2);
                    s_nodes += 1;
                }
                SpqrKind::Q => q_leaves += 1,
                k => panic!("unexpected node kind {:?} in a cycle", k),
            }
        }
        assert_eq!(q_leaves, 4);
        assert_eq!(s_nodes, 2);
    }

    #[test]
    fn k4_has_r_node() {
        let g = MultiGraph::build(
            &[],
            &[
                ("a", "1", "2"),
                ("b", "2", "3"),
                ("e", "1", "3"),
                ("f", "2", "4"),
                ("c", "3", "4"),
                ("d", "1", "4"),
            ],
        )
        .unwrap();
        let t = SpqrTree::decompose(&g).unwrap();
        let kinds: Vec<SpqrKind> = t.postorder().iter().map(|&i| t.node(i).kind).collect();
        assert!(kinds.contains(&SpqrKind::R));
        assert!(!kinds.contains(&SpqrKind::P));
        assert!(!kinds.contains(&SpqrKind::S));
    }

    #[test]
    fn k5_rejected_as_nonplanar() {
        let mut g = MultiGraph::empty();
        for i in 0..5 {
            for j in (i + 1)..5 {
                g.add_edge(
                    &format!("e{}{}", i, j),
                    &format!("{}", i),
                    &format!("{}", j),
                )
                .unwrap();
            }
        }
        assert_eq!(SpqrTree::decompose(&g).unwrap_err(), SpqrError::NotPlanar);
    }

    #[test]
    fn not_biconnected_rejected() {
        let g = MultiGraph::build(&[], &[("e1", "a", "b"), ("e2", "b", "c")]).unwrap();
        assert_eq!(
            SpqrTree::decompose(&g).unwrap_err(),
            SpqrError::NotBiconnected
        );
    }

    #[test]
    fn pertinent_leafset_of_leaf() {
        let g = dipole3();
        let t = SpqrTree::decompose(&g).unwrap();
        let p = t.node(t.root()).children[0];
        let q = t.node(p).children[0];
        let (u, _) = t.node(q).poles;
        let ls = t.pertinent_leafset(&g, q, u);
        assert_eq!(ls.len(), 1);
    }

    #[test]
    fn dipole_pole_embedding_tree_is_p() {
        let g = dipole3();
        let t = SpqrTree::decompose(&g).unwrap();
        let v = g.vertex_by_name("a").unwrap();
        let et = t.embedding_tree(&g, v).unwrap();
        // P(e1,e2,e3): both cyclic orders of 3 elements.
        assert_eq!(et.count_orders(), 2);
    }

    #[test]
    fn degree_two_vertex_embedding_tree() {
        let g = MultiGraph::build(&[], &[("e1", "a", "b"), ("e2", "b", "c"), ("e3", "c", "a")])
            .unwrap();
        let t = SpqrTree::decompose(&g).unwrap();
        let v = g.vertex_by_name("b").unwrap();
        let et = t.embedding_tree(&g, v).unwrap();
        assert_eq!(et.count_orders(), 1);
    }

    /// Embedding-tree completeness: the represented orders equal the set of
    /// rotations of v over all planar rotation systems.
    fn check_embedding_tree_completeness(g: &MultiGraph) {
        if rotation_system_count(g) > 3_000_000 {
            panic!("test graph too large for exhaustive search");
        }
        let t = SpqrTree::decompose(g).unwrap();
        for v in g.vertices() {
            let et = t.embedding_tree(g, v).unwrap();
            let got = et.enumerate_orders(1 << 20).unwrap();
            let mut want = std::collections::BTreeSet::new();
            for_each_rotation_system(g, &[], &mut |rho| {
                if is_planar_rotation(g, rho).unwrap() {
                    let ring: Vec<crate::fpq::LeafId> = rho.order[v.0 as usize]
                        .iter()
                        .map(|d| crate::fpq::LeafId(d.edge.0))
                        .collect();
                    want.insert(CyclicOrder::new(ring));
                }
                false
            });
            assert_eq!(
                got,
                want,
                "vertex {} of graph with {} edges",
                g.vertex_name(v),
                g.n_edges()
            );
        }
    }

    #[test]
    fn embedding_tree_completeness_small_graphs() {
        // Dipole.
        check_embedding_tree_completeness(&dipole3());
        // Triangle with a doubled edge.
        check_embedding_tree_completeness(
            &MultiGraph::build(
                &[],
                &[
                    ("e1", "a", "b"),
                    ("e2", "b", "c"),
                    ("e3", "c", "a"),
                    ("e4", "a", "b"),
                ],
            )
            .unwrap(),
        );
        // K4.
        check_embedding_tree_completeness(
            &MultiGraph::build(
                &[],
                &[
                    ("a", "1", "2"),
                    ("b", "2", "3"),
                    ("e", "1", "3"),
                    ("f", "2", "4"),
                    ("c", "3", "4"),
                    ("d", "1", "4"),
                ],
            )
            .unwrap(),
        );
        // Series-parallel: two parallel paths plus a chord pattern.
        check_embedding_tree_completeness(
            &MultiGraph::build(
                &[],
                &[
                    ("e1", "a", "x"),
                    ("e2", "x", "b"),
                    ("e3", "a", "y"),
                    ("e4", "y", "b"),
                    ("e5", "a", "b"),
                ],
            )
            .unwrap(),
        );
    }

    #[test]
    fn every_pertinent_leafset_is_consecutive_in_embedding_tree() {
        let g = MultiGraph::build(
            &[],
            &[
                ("a", "1", "2"),
                ("b", "2", "3"),
                ("e", "1", "3"),
                ("f", "2", "4"),
                ("c", "3", "4"),
                ("d", "1", "4"),
                ("g", "1", "2"),
            ],
        )
        .unwrap();
        let t = SpqrTree::decompose(&g).unwrap();
        for i in t.postorder() {
            if i == t.root() {
                continue;
            }
            for v in [t.node(i).poles.0, t.node(i).poles.1] {
                let ls = t.pertinent_leafset(&g, i, v);
                let et = t.embedding_tree(&g, v).unwrap();
                if ls.is_empty() || ls.len() == et.ground().len() {
                    continue;
                }
                assert!(et.is_consecutive(&ls).unwrap());
            }
        }
    }
}
