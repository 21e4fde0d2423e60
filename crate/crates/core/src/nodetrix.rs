//! NodeTrix planarity testing of flat clustered graphs, by reduction to
//! FPQ-choosable planarity of the constraint graph: one vertex per cluster,
//! one edge per inter-cluster edge, and one matrix FPQ-tree per vertex
//! permutation of the cluster (times side assignments in free-sides mode).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dp::{self, ChoosableGraph, DpOptions, Witness};
use crate::fpq::{FpqNode, FpqTree, LeafId, NodeKind, TreeBuilder};
use crate::graph::{MultiGraph, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Top,
    Right,
    Bottom,
    Left,
}

pub const SIDES: [Side; 4] = [Side::Top, Side::Right, Side::Bottom, Side::Left];

impl Side {
    pub fn letter(self) -> char {
        match self {
            Side::Top => 'T',
            Side::Right => 'R',
            Side::Bottom => 'B',
            Side::Left => 'L',
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NtxError {
    #[error("unknown cluster or vertex in '{0}'")]
    Unknown(String),
    #[error("inter-cluster edge '{0}' joins a cluster to itself")]
    SelfCluster(String),
    #[error("vertex '{0}' appears in two clusters")]
    Overlap(String),
    #[error("edge '{0}' is missing a side annotation (use --free-sides?)")]
    MissingSide(String),
    #[error("constraint graph is not biconnected; this case is unsupported")]
    Unsupported,
    #[error("free-sides tree budget exceeded: {0} candidate trees")]
    CapExceeded(u128),
    #[error("dp error: {0}")]
    Dp(#[from] dp::DpError),
}

/// A flat clustered graph with side-annotated inter-cluster edges.
#[derive(Debug, Clone)]
pub struct NodeTrixGraph {
    clusters: Vec<(String, Vec<String>)>,
    intra: Vec<(String, String)>,
    /// (edge name, [(cluster idx, vertex idx in cluster, side)] x 2)
    inter: Vec<(String, [(usize, usize, Option<Side>); 2])>,
}

impl NodeTrixGraph {
    pub fn build(
        clusters: Vec<(String, Vec<String>)>,
        intra: Vec<(String, String)>,
        inter_raw: Vec<(String, [(String, String, Option<Side>); 2])>,
    ) -> Result<NodeTrixGraph, NtxError> {
        let mut owner: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (ci, (_, verts)) in clusters.iter().enumerate() {
            for (vi, v) in verts.iter().enumerate() {
                if owner.insert(v, (ci, vi)).is_some() {
                    return Err(NtxError::Overlap(v.clone()));
                }
            }
        }
        let mut inter = Vec::new();
        for (name, ends) in inter_raw {
            let resolve = |end: &(String, String, Option<Side>)| -> Result<(usize, usize, Option<Side>), NtxError> {
                let ci = clusters
                    .iter()
                    .position(|(c, _)| *c == end.0)
                    .ok_or_else(|| NtxError::Unknown(end.0.clone()))?;
                let vi = clusters[ci]
                    .1
                    .iter()
                    .position(|v| *v == end.1)
                    .ok_or_else(|| NtxError::Unknown(format!("{}.{}", end.0, end.1)))?;
                Ok((ci, vi, end.2))
            };
            let a = resolve(&ends[0])?;
            let b = resolve(&ends[1])?;
            if a.0 == b.0 {
                return Err(NtxError::SelfCluster(name));
            }
            inter.push((name, [a, b]));
        }
        for (u, v) in &intra {
            if !owner.contains_key(u.as_str()) {
                return Err(NtxError::Unknown(u.clone()));
            }
            if !owner.contains_key(v.as_str()) {
                return Err(NtxError::Unknown(v.clone()));
            }
        }
        Ok(NodeTrixGraph {
            clusters,
            intra,
            inter,
        })
    }

    pub fn clusters(&self) -> impl Iterator<Item = (&str, Vec<&str>)> {
        self.clusters
            .iter()
            .map(|(c, vs)| (c.as_str(), vs.iter().map(|s| s.as_str()).collect()))
    }

    pub fn intra_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.intra.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn inter_edges(&self) -> impl Iterator<Item = (&str, [(&str, &str, Option<Side>); 2])> {
        self.inter.iter().map(|(name, ends)| {
            let conv = |e: &(usize, usize, Option<Side>)| {
                (
                    self.clusters[e.0].0.as_str(),
                    self.clusters[e.0].1[e.1].as_str(),
                    e.2,
                )
            };
            (name.as_str(), [conv(&ends[0]), conv(&ends[1])])
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn sides_fixed(&self) -> bool {
        self.inter
            .iter()
            .all(|(_, ends)| ends[0].2.is_some() && ends[1].2.is_some())
    }

    /// Incident inter-cluster edge slots of one cluster:
    /// (edge index, vertex-in-cluster, side).
    fn incident(&self, ci: usize) -> Vec<(usize, usize, Option<Side>)> {
        let mut out = Vec::new();
        for (ei, (_, ends)) in self.inter.iter().enumerate() {
            for end in ends {
                if end.0 == ci {
                    out.push((ei, end.1, end.2));
                }
            }
        }
        out
    }
}

/// All cyclic orders of inter-cluster edges around a matrix: an F-node over
/// the occupied (vertex, side) positions, read clockwise
/// top(1..k), right(1..k), bottom(k..1), left(k..1), with a P-node per
/// position holding its attached edges.
pub fn matrix_fpq_tree(
    cluster_size: usize,
    attachments: &[(usize, Side, LeafId)],
    pi: &[usize],
) -> FpqTree {
    debug_assert_eq!(pi.len(), cluster_size);
    let mut by_pos: BTreeMap<(usize, Side), Vec<LeafId>> = BTreeMap::new();
    // Row position of each vertex under the permutation: pi[p] = vertex at
    // position p.
    let mut pos_of = vec![0usize; cluster_size];
    for (p, &v) in pi.iter().enumerate() {
        pos_of[v] = p;
    }
    for &(v, s, l) in attachments {
        by_pos.entry((pos_of[v], s)).or_default().push(l);
    }
    let mut b = TreeBuilder::new();
    let mut children = Vec::new();
    let push_pos = |b: &mut TreeBuilder, children: &mut Vec<usize>, p: usize, s: Side| {
        if let Some(leaves) = by_pos.get(&(p, s)) {
            let ls: Vec<usize> = leaves.iter().map(|&l| b.leaf(l)).collect();
            let node = if ls.len() == 1 {
                ls[0]
            } else {
                b.inner(NodeKind::P, ls)
            };
            children.push(node);
        }
    };
    for p in 0..cluster_size {
        push_pos(&mut b, &mut children, p, Side::Top);
    }
    for p in 0..cluster_size {
        push_pos(&mut b, &mut children, p, Side::Right);
    }
    for p in (0..cluster_size).rev() {
        push_pos(&mut b, &mut children, p, Side::Bottom);
    }
    for p in (0..cluster_size).rev() {
        push_pos(&mut b, &mut children, p, Side::Left);
    }
    debug_assert!(!children.is_empty());
    let root = if children.len() == 1 {
        children[0]
    } else {
        b.inner(NodeKind::F, children)
    };
    b.finish(root).canonicalized()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
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
    rec(k, &mut Vec::new(), &mut out);
    out
}

/// The constraint graph of a fixed-sides instance, with per-cluster tree
/// sets deduplicated after canonicalization. Also returns, per cluster, the
/// permutation that produced each kept tree.
pub fn constraint_graph(
    ntg: &NodeTrixGraph,
) -> Result<(ChoosableGraph, Vec<Vec<Vec<usize>>>), NtxError> {
    if let Some((name, _)) = ntg
        .inter
        .iter()
        .find(|(_, ends)| ends[0].2.is_none() || ends[1].2.is_none())
    {
        return Err(NtxError::MissingSide(name.clone()));
    }
    let mut g = MultiGraph::empty();
    for (c, _) in &ntg.clusters {
        g.ensure_vertex(c);
    }
    for (name, ends) in &ntg.inter {
        g.add_edge(name, &ntg.clusters[ends[0].0].0, &ntg.clusters[ends[1].0].0)
            .map_err(|e| NtxError::Unknown(e.to_string()))?;
    }
    let mut d: Vec<Vec<FpqTree>> = Vec::new();
    let mut pis: Vec<Vec<Vec<usize>>> = Vec::new();
    for ci in 0..ntg.clusters.len() {
        let k = ntg.clusters[ci].1.len();
        let attachments: Vec<(usize, Side, LeafId)> = ntg
            .incident(ci)
            .into_iter()
            .map(|(ei, vi, side)| {
                let e = g.edge_by_name(&ntg.inter[ei].0).unwrap();
                (vi, side.expect("fixed sides"), LeafId(e.0))
            })
            .collect();
        if attachments.is_empty() {
            // An isolated cluster leaves the constraint graph disconnected.
            return Err(NtxError::Unsupported);
        }
        let mut trees: Vec<FpqTree> = Vec::new();
        let mut kept_pis: Vec<Vec<usize>> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for pi in permutations(k) {
            let t = matrix_fpq_tree(k, &attachments, &pi);
            let key = t.canonical_key();
            if seen.insert(key) {
                trees.push(t);
                kept_pis.push(pi);
            }
        }
        d.push(trees);
        pis.push(kept_pis);
    }
    let cg = ChoosableGraph::new(g, d)?;
    Ok((cg, pis))
}

/// A combinatorial NodeTrix layout: a vertex permutation per cluster and,
/// per (vertex, side), the inter-cluster edges in attachment order.
#[derive(Debug, Clone)]
pub struct MatrixLayout {
    /// cluster name -> vertex names in matrix order.
    pub permutations: BTreeMap<String, Vec<String>>,
    /// (cluster, vertex, side letter) -> edge names in order.
    pub side_orders: BTreeMap<(String, String, char), Vec<String>>,
}

#[derive(Debug, Clone)]
pub enum NtxVerdict {
    Yes(Box<Option<MatrixLayout>>),
    No,
}

fn layout_from_witness(
    ntg: &NodeTrixGraph,
    cg: &ChoosableGraph,
    pis: &[Vec<Vec<usize>>],
    w: &Witness,
) -> MatrixLayout {
    let mut permutations = BTreeMap::new();
    let mut side_orders: BTreeMap<(String, String, char), Vec<String>> = BTreeMap::new();
    for (ci, (cname, verts)) in ntg.clusters.iter().enumerate() {
        let pi = &pis[ci][w.assignment[ci]];
        permutations.insert(
            cname.clone(),
            pi.iter().map(|&p| verts[p].clone()).collect(),
        );
        // Attachment order around the cluster from the witness rotation.
        let v = cg.g.vertex_by_name(cname).unwrap();
        for dinst in &w.rotation.order[v.0 as usize] {
            let ename = cg.g.edge_name(dinst.edge).to_string();
            let (ei, _) = ntg
                .inter
                .iter()
                .enumerate()
                .find(|(_, (n, _))| *n == ename)
                .unwrap();
            let end = ntg.inter[ei]
                .1
                .iter()
                .find(|end| end.0 == ci)
                .expect("edge end at this cluster");
            let key = (
                cname.clone(),
                verts[end.1].clone(),
                end.2.expect("fixed sides").letter(),
            );
            side_orders.entry(key).or_default().push(ename);
        }
    }
    MatrixLayout {
        permutations,
        side_orders,
    }
}

/// NodeTrix planarity with fixed sides, via the constraint-graph reduction.
/// The
/// constraint graph must be biconnected.
pub fn test_fixed_sides(
    ntg: &NodeTrixGraph,
    want_witness: bool,
    opts: &DpOptions,
) -> Result<NtxVerdict, NtxError> {
    let (cg, pis) = constraint_graph(ntg)?;
    if cg.g.n_edges() >= 2 && !cg.g.is_biconnected() {
        return Err(NtxError::Unsupported);
    }
    let rep = dp::test_with(&cg, opts)?;
    if !rep.feasible {
        return Ok(NtxVerdict::No);
    }
    if !want_witness {
        return Ok(NtxVerdict::Yes(Box::new(None)));
    }
    let w = dp::extract_witness(&cg, opts)?.expect("feasible instance yields a witness");
    Ok(NtxVerdict::Yes(Box::new(Some(layout_from_witness(
        ntg, &cg, &pis, &w,
    )))))
}

/// Free sides: one tree per permutation and side assignment of the incident
/// edge ends (k! * 4^(attachments) trees before deduplication).
pub fn test_free_sides(
    ntg: &NodeTrixGraph,
    tree_budget: u128,
    opts: &DpOptions,
) -> Result<NtxVerdict, NtxError> {
    let mut g = MultiGraph::empty();
    for (c, _) in &ntg.clusters {
        g.ensure_vertex(c);
    }
    for (name, ends) in &ntg.inter {
        g.add_edge(name, &ntg.clusters[ends[0].0].0, &ntg.clusters[ends[1].0].0)
            .map_err(|e| NtxError::Unknown(e.to_string()))?;
    }
    if g.n_edges() >= 2 && !g.is_biconnected() {
        return Err(NtxError::Unsupported);
    }
    let mut d: Vec<Vec<FpqTree>> = Vec::new();
    for ci in 0..ntg.clusters.len() {
        let k = ntg.clusters[ci].1.len();
        let slots = ntg.incident(ci);
        // Budget: k! * 4^(free slots).
        let mut count: u128 = (1..=k as u128).product();
        for &(_, _, s) in &slots {
            if s.is_none() {
                count = count.saturating_mul(4);
            }
        }
        if count > tree_budget {
            return Err(NtxError::CapExceeded(count));
        }
        let mut trees = Vec::new();
        let mut seen = BTreeSet::new();
        let free_slots: Vec<usize> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.2.is_none())
            .map(|(i, _)| i)
            .collect();
        let n_free = free_slots.len();
        let mut assign = vec![0usize; n_free];
        let mut done = false;
        while !done {
            let attachments: Vec<(usize, Side, LeafId)> = slots
                .iter()
                .enumerate()
                .map(|(i, &(ei, vi, s))| {
                    let side = s.unwrap_or_else(|| {
                        let fi = free_slots.iter().position(|&x| x == i).unwrap();
                        SIDES[assign[fi]]
                    });
                    let e = g.edge_by_name(&ntg.inter[ei].0).unwrap();
                    (vi, side, LeafId(e.0))
                })
                .collect();
            for pi in permutations(k) {
                let t = matrix_fpq_tree(k, &attachments, &pi);
                if seen.insert(t.canonical_key()) {
                    trees.push(t);
                }
            }
            // Next side assignment; stop after wrapping around.
            let mut i = 0;
            loop {
                if i == n_free {
                    done = true;
                    break;
                }
                assign[i] += 1;
                if assign[i] < 4 {
                    break;
                }
                assign[i] = 0;
                i += 1;
            }
        }
        d.push(trees);
    }
    let cg = ChoosableGraph::new(g, d)?;
    let rep = dp::test_with(&cg, opts)?;
    Ok(if rep.feasible {
        NtxVerdict::Yes(Box::new(None))
    } else {
        NtxVerdict::No
    })
}

/// The wheel-gadget expansion of a chosen assignment: Q/F-nodes become
/// wheels (rim cycle plus hub), P-nodes single vertices, tree edges spokes,
/// and gadgets of adjacent vertices are joined per shared graph edge.
pub fn expand_gadget(cg: &ChoosableGraph, assignment: &[usize]) -> MultiGraph {
    let mut out = MultiGraph::empty();
    let mut next_edge = 0usize;
    let mut add_edge = |out: &mut MultiGraph, a: &str, b: &str| {
        let name = format!("g{}", next_edge);
        next_edge += 1;
        out.add_edge(&name, a, b).unwrap();
    };
    // Attachment vertex (in the gadget of cg-vertex v) for tree leaf l.
    let mut ports: BTreeMap<(VertexId, LeafId), String> = BTreeMap::new();
    for v in cg.g.vertices() {
        let tree = &cg.trees(v)[assignment[v.0 as usize]];
        let vname = cg.g.vertex_name(v);
        // Build per-node gadget vertices.
        let mut reps: BTreeMap<usize, String> = BTreeMap::new(); // P-node or leaf anchor
        let mut rims: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let idxs: Vec<usize> = (0..tree.n_nodes())
            .filter(|&i| tree.is_reachable(i))
            .collect();
        for &i in &idxs {
            match tree.node(i) {
                FpqNode::Leaf(_) => {}
                FpqNode::Inner { kind, children, .. } => {
                    let deg = children.len() + usize::from(i != tree.root());
                    match kind {
                        NodeKind::P => {
                            reps.insert(i, format!("{}n{}", vname, i));
                        }
                        NodeKind::Q | NodeKind::F => {
                            let hub = format!("{}n{}hub", vname, i);
                            let rim: Vec<String> =
                                (0..deg).map(|j| format!("{}n{}r{}", vname, i, j)).collect();
                            for j in 0..deg {
                                add_edge(&mut out, &rim[j], &rim[(j + 1) % deg]);
                                add_edge(&mut out, &rim[j], &hub);
                            }
                            rims.insert(i, rim);
                        }
                    }
                }
            }
        }
        // Tree edges: connect each child direction to the child's anchor.
        // Direction j of node i: slot 0 = parent (for non-root), then
        // children in stored order.
        let parents = {
            let mut p = vec![None; tree.n_nodes()];
            for &i in &idxs {
                for &c in tree.children(i) {
                    p[c] = Some(i);
                }
            }
            p
        };
        let slot_of = |i: usize, dir_child: Option<usize>| -> usize {
            let off = usize::from(i != tree.root());
            match dir_child {
                None => 0,
                Some(c) => off + tree.children(i).iter().position(|&x| x == c).unwrap(),
            }
        };
        let anchor = |i: usize,
                      toward: Option<usize>,
                      reps: &BTreeMap<usize, String>,
                      rims: &BTreeMap<usize, Vec<String>>|
         -> String {
            if let Some(r) = reps.get(&i) {
                return r.clone();
            }
            let rim = &rims[&i];
            rim[slot_of(i, toward)].clone()
        };
        for &i in &idxs {
            if let Some(p) = parents[i] {
                match tree.node(i) {
                    FpqNode::Leaf(l) => {
                        // The port of this leaf is the parent-side anchor.
                        let a = anchor(p, Some(i), &reps, &rims);
                        ports.insert((v, *l), a);
                    }
                    FpqNode::Inner { .. } => {
                        let a = anchor(p, Some(i), &reps, &rims);
                        let b = anchor(i, None, &reps, &rims);
                        add_edge(&mut out, &a, &b);
                    }
                }
            }
        }
        // A tree that is a single leaf: the port is a bare vertex.
        if let FpqNode::Leaf(l) = tree.node(tree.root()) {
            let name = format!("{}solo", vname);
            out.ensure_vertex(&name);
            ports.insert((v, *l), name);
        }
    }
    // Join ports along graph edges.
    for e in cg.g.edges() {
        let (u, v) = cg.g.endpoints(e);
        let pu = ports[&(u, LeafId(e.0))].clone();
        let pv = ports[&(v, LeafId(e.0))].clone();
        add_edge(&mut out, &pu, &pv);
    }
    out
}
