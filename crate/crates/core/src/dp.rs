//! The fixed-parameter decision procedure for FPQ-choosable planarity:
//! preprocessing by intersection with embedding trees, bottom-up admissible
//! tuple sets over the SPQR tree (series joins, a 2SAT encoding at parallel
//! nodes, a branch-decomposition join at rigid nodes), final verdict at the
//! root edge's child, and witness extraction by iterated pinning.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::fpq::{
    block_direction_pub, intersect, Boundary, CyclicOrder, FpqNode, FpqTree, LeafId, NodeKind,
    OriginId, TreeBuilder,
};
use crate::graph::{is_planar_rotation, Dart, EdgeId, MultiGraph, RotationSystem, VertexId};
use crate::scd::{scd_decompose, ScdOptions};
use crate::spqr::{SkelEdgeRef, SpqrError, SpqrKind, SpqrTree};
use crate::twosat::{Lit, TwoSat};

/// Fresh label for the external side of pertinent trees, far above edge ids.
pub const ELL: LeafId = LeafId(900_000_000);

fn block_label(i: usize) -> LeafId {
    LeafId(900_000_001 + i as u32)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DpError {
    #[error("graph is not biconnected")]
    NotBiconnected,
    #[error("vertex {0} has no FPQ-trees")]
    EmptyTreeSet(String),
    #[error("tree at vertex {0} is not over its incident edges")]
    GroundMismatch(String),
    #[error("witness extraction cap exceeded")]
    WitnessCap,
    #[error("fpq error: {0}")]
    Fpq(#[from] crate::fpq::FpqError),
}

/// A biconnected multigraph with a nonempty list of FPQ-trees per vertex.
#[derive(Debug, Clone)]
pub struct ChoosableGraph {
    pub g: MultiGraph,
    pub d: Vec<Vec<FpqTree>>,
}

impl ChoosableGraph {
    pub fn new(g: MultiGraph, d: Vec<Vec<FpqTree>>) -> Result<ChoosableGraph, DpError> {
        if d.len() != g.n_vertices() {
            return Err(DpError::EmptyTreeSet("missing vertex".into()));
        }
        for v in g.vertices() {
            let trees = &d[v.0 as usize];
            if trees.is_empty() {
                return Err(DpError::EmptyTreeSet(g.vertex_name(v).to_string()));
            }
            let want: BTreeSet<LeafId> = g.darts_at(v).iter().map(|dt| LeafId(dt.edge.0)).collect();
            for t in trees {
                if t.ground_set() != want {
                    return Err(DpError::GroundMismatch(g.vertex_name(v).to_string()));
                }
            }
        }
        Ok(ChoosableGraph { g, d })
    }

    pub fn d_max(&self) -> usize {
        self.d.iter().map(|t| t.len()).max().unwrap_or(0)
    }

    pub fn trees(&self, v: VertexId) -> &[FpqTree] {
        &self.d[v.0 as usize]
    }
}

/// An admissible tuple: tree indices at the poles plus boundary orientations,
/// in the node's pole order.
pub type PsiTuple = (usize, usize, u8, u8);
pub type PsiSet = BTreeSet<PsiTuple>;

/// A verified witness: one tree index per vertex and a planar rotation
/// system consistent with the chosen trees.
#[derive(Debug, Clone)]
pub struct Witness {
    pub assignment: Vec<usize>,
    pub rotation: RotationSystem,
}

#[derive(Debug, Clone)]
pub struct DpOptions {
    pub scd: ScdOptions,
    /// Cap on per-tree order enumeration during witness extraction.
    pub witness_cap: u128,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            scd: ScdOptions::default(),
            witness_cap: 1 << 22,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DpReport {
    pub feasible: bool,
    /// (spqr node index, kind, psi size), bottom-up.
    pub psi_sizes: Vec<(usize, char, usize)>,
    pub d_max_input: usize,
    pub d_max_preprocessed: usize,
    pub observed_width: usize,
    pub warnings: Vec<String>,
    pub t_decompose: Duration,
    pub t_preprocess: Duration,
    pub t_psi: Duration,
}

fn pole_coord(t: &SpqrTree, mu: usize, v: VertexId) -> usize {
    let p = t.node(mu).poles;
    if p.0 == v {
        0
    } else {
        debug_assert_eq!(p.1, v);
        1
    }
}

/// Tuple data of `tu` at vertex v: (tree index, orientation).
fn tuple_at(t: &SpqrTree, mu: usize, tu: &PsiTuple, v: VertexId) -> (usize, u8) {
    match pole_coord(t, mu, v) {
        0 => (tu.0, tu.2),
        _ => (tu.1, tu.3),
    }
}

fn assemble_tuple(
    t: &SpqrTree,
    mu: usize,
    a: (VertexId, usize, u8),
    b: (VertexId, usize, u8),
) -> PsiTuple {
    let (first, second) = if pole_coord(t, mu, a.0) == 0 {
        (a, b)
    } else {
        (b, a)
    };
    (first.1, second.1, first.2, second.2)
}

/// Replaces every D(v) by its intersection with the embedding tree of v,
/// dropping null trees. Returns None when some set becomes empty.
pub fn preprocess(cg: &ChoosableGraph, t: &SpqrTree) -> Result<Option<ChoosableGraph>, DpError> {
    let mut d2 = Vec::with_capacity(cg.d.len());
    for v in cg.g.vertices() {
        let emb = t.embedding_tree(&cg.g, v).expect("vertex exists");
        let mut out = Vec::new();
        for tree in cg.trees(v) {
            if tree.ground().len() <= 2 {
                out.push(tree.canonicalized());
                continue;
            }
            if let Some(i) = intersect(tree, &emb)? {
                out.push(i);
            }
        }
        if out.is_empty() {
            return Ok(None);
        }
        d2.push(out);
    }
    Ok(Some(ChoosableGraph {
        g: cg.g.clone(),
        d: d2,
    }))
}

/// Finds the inner node with the given origin and returns its children's
/// yields in stored order.
fn origin_blocks(skel: &FpqTree, origin: OriginId) -> Option<Vec<BTreeSet<LeafId>>> {
    let idx = (0..skel.n_nodes()).find(|&i| {
        matches!(skel.node(i), FpqNode::Inner { origin: o, .. } if *o == origin)
            && skel.is_reachable(i)
    })?;
    let blocks: Vec<BTreeSet<LeafId>> = skel
        .children(idx)
        .iter()
        .map(|&c| skel.subtree_yield(c))
        .collect();
    if blocks.len() < 2 {
        None
    } else {
        Some(blocks)
    }
}

/// Direction of the boundary node `origin` within `sigma`: Some(0) default
/// order, Some(1) reversed, None when scrambled.
fn node_direction(skel: &FpqTree, origin: OriginId, sigma: &CyclicOrder) -> Option<u8> {
    let blocks = origin_blocks(skel, origin)?;
    block_direction_pub(&blocks, sigma).map(|rev| rev as u8)
}

struct Ctx<'a> {
    cg: &'a ChoosableGraph,
    t: &'a SpqrTree,
    opts: &'a DpOptions,
    warnings: Vec<String>,
    observed_width: usize,
}

impl<'a> Ctx<'a> {
    fn psi_leaf(&self, mu: usize) -> PsiSet {
        let (u, v) = self.t.node(mu).poles;
        let mut out = PsiSet::new();
        for iu in 0..self.cg.trees(u).len() {
            for iv in 0..self.cg.trees(v).len() {
                for ou in 0..2u8 {
                    for ov in 0..2u8 {
                        out.insert((iu, iv, ou, ov));
                    }
                }
            }
        }
        out
    }

    fn psi_s(&self, mu: usize, psis: &BTreeMap<usize, PsiSet>) -> PsiSet {
        let node = self.t.node(mu);
        let (u, v) = node.poles;
        let (c1, c2) = (node.children[0], node.children[1]);
        let p1 = self.t.node(c1).poles;
        let p2 = self.t.node(c2).poles;
        let w = [p1.0, p1.1]
            .into_iter()
            .find(|&x| (x == p2.0 || x == p2.1) && x != u && x != v)
            .or_else(|| [p1.0, p1.1].into_iter().find(|&x| x == p2.0 || x == p2.1))
            .expect("series children share a pole");
        let mut by_w: BTreeMap<(usize, u8), Vec<(usize, u8)>> = BTreeMap::new();
        for t2 in &psis[&c2] {
            let (tw, ow) = tuple_at(self.t, c2, t2, w);
            let (tv, ov) = tuple_at(self.t, c2, t2, v);
            by_w.entry((tw, ow)).or_default().push((tv, ov));
        }
        let mut out = PsiSet::new();
        for t1 in &psis[&c1] {
            let (tu, ou) = tuple_at(self.t, c1, t1, u);
            let (tw, ow) = tuple_at(self.t, c1, t1, w);
            if let Some(rights) = by_w.get(&(tw, ow)) {
                for &(tv, ov) in rights {
                    out.insert(assemble_tuple(self.t, mu, (u, tu, ou), (v, tv, ov)));
                }
            }
        }
        out
    }

    /// Pertinent tree of T at pole v of mu (external edges contracted to ELL).
    fn pert(&self, mu: usize, v: VertexId, tree: &FpqTree) -> Result<FpqTree, DpError> {
        let keep = self.t.pertinent_leafset(&self.cg.g, mu, v);
        Ok(tree.project(&keep, ELL)?)
    }

    /// Skeletal tree at a skeleton vertex w of mu: every incident child's
    /// leaf block contracted to its block label; for poles the external side
    /// is first contracted to ELL.
    fn skeletal(
        &self,
        mu: usize,
        w: VertexId,
        tree: &FpqTree,
        incident_children: &[(usize, usize)],
    ) -> Result<FpqTree, DpError> {
        let is_pole = self.t.node(mu).poles.0 == w || self.t.node(mu).poles.1 == w;
        let base = if is_pole {
            self.pert(mu, w, tree)?
        } else {
            tree.clone()
        };
        let mut blocks = Vec::new();
        for &(c, bi) in incident_children {
            let set = self.t.pertinent_leafset(&self.cg.g, c, w);
            blocks.push((set, block_label(bi)));
        }
        Ok(base.contract_blocks(&blocks)?)
    }

    /// psi for a parallel node: skeletal trees, an intersection
    /// tree for the common skeleton ordering, and a 2SAT over boundary
    /// orientations queried under pole assumptions.
    fn psi_p(&self, mu: usize, psis: &BTreeMap<usize, PsiSet>) -> Result<PsiSet, DpError> {
        let node = self.t.node(mu);
        let (u, v) = node.poles;
        let children = node.children.clone();
        let lu = self.t.pertinent_leafset(&self.cg.g, mu, u);
        let lv = self.t.pertinent_leafset(&self.cg.g, mu, v);
        let inc: Vec<(usize, usize)> = children.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut out = PsiSet::new();
        for (iu, tu) in self.cg.trees(u).iter().enumerate() {
            let skel_u = self.skeletal(mu, u, tu, &inc)?;
            let bu_mu = tu.boundary(&lu)?;
            let bu_children: Vec<Boundary> = children
                .iter()
                .map(|&c| tu.boundary(&self.t.pertinent_leafset(&self.cg.g, c, u)))
                .collect::<Result<_, _>>()?;
            for (iv, tv) in self.cg.trees(v).iter().enumerate() {
                let skel_v = self.skeletal(mu, v, tv, &inc)?;
                let bv_mu = tv.boundary(&lv)?;
                let bv_children: Vec<Boundary> = children
                    .iter()
                    .map(|&c| tv.boundary(&self.t.pertinent_leafset(&self.cg.g, c, v)))
                    .collect::<Result<_, _>>()?;
                // Per-child allowed orientation pairs for this tree pair.
                let mut s_sets: Vec<BTreeSet<(u8, u8)>> = Vec::with_capacity(children.len());
                let mut child_ok = true;
                for &c in &children {
                    let mut s = BTreeSet::new();
                    for tup in &psis[&c] {
                        let (txu, oxu) = tuple_at(self.t, c, tup, u);
                        let (txv, oxv) = tuple_at(self.t, c, tup, v);
                        if txu == iu && txv == iv {
                            s.insert((oxu, oxv));
                        }
                    }
                    if s.is_empty() {
                        child_ok = false;
                        break;
                    }
                    s_sets.push(s);
                }
                if !child_ok {
                    continue;
                }
                // Condition (i): some skeleton order works at u and reversed
                // at v.
                let c_tree = match intersect(&skel_u, &skel_v.reflected())? {
                    Some(c) => c,
                    None => continue,
                };
                let tuples = solve_pnode_2sat(
                    &c_tree,
                    &skel_u,
                    &skel_v,
                    &bu_mu,
                    &bv_mu,
                    &bu_children,
                    &bv_children,
                    &s_sets,
                )?;
                for (ou, ov) in tuples {
                    out.insert(assemble_tuple(self.t, mu, (u, iu, ou), (v, iv, ov)));
                }
            }
        }
        Ok(out)
    }

    /// psi for a rigid node: both skeleton embeddings, each
    /// evaluated by a join over a branch decomposition of the skeleton.
    fn psi_r(&mut self, mu: usize, psis: &BTreeMap<usize, PsiSet>) -> Result<PsiSet, DpError> {
        let node = self.t.node(mu).clone();
        let (u, v) = node.poles;
        let children = node.children.clone();
        let mut incident: BTreeMap<VertexId, Vec<(usize, usize)>> = BTreeMap::new();
        for (bi, &c) in children.iter().enumerate() {
            let (x, y) = self.t.node(c).poles;
            incident.entry(x).or_default().push((c, bi));
            incident.entry(y).or_default().push((c, bi));
        }
        let verts: Vec<VertexId> = incident.keys().copied().collect();
        let rot_ref = node
            .skel_rotation
            .as_ref()
            .expect("rigid skeleton embedded");
        let label_of = |r: SkelEdgeRef| -> LeafId {
            match r {
                SkelEdgeRef::Child(c) => {
                    let bi = children.iter().position(|&x| x == c).unwrap();
                    block_label(bi)
                }
                SkelEdgeRef::Parent => ELL,
                SkelEdgeRef::Real(_) => unreachable!("rigid skeleton edges are virtual"),
            }
        };

        let edges: Vec<(VertexId, VertexId)> =
            children.iter().map(|&c| self.t.node(c).poles).collect();
        let outside = vec![(u, v)];
        let faces = self.t.skeleton_faces(mu);
        let (sc, warns) = scd_decompose(&edges, &outside, &faces, self.opts.scd);
        self.observed_width = self.observed_width.max(sc.width());
        self.warnings.extend(warns);

        let mut out = PsiSet::new();
        for mirror in [false, true] {
            let rot: BTreeMap<VertexId, CyclicOrder> = verts
                .iter()
                .map(|&w| {
                    let ring = &rot_ref[&w];
                    let labels: Vec<LeafId> = if mirror {
                        ring.iter().rev().map(|&r| label_of(r)).collect()
                    } else {
                        ring.iter().map(|&r| label_of(r)).collect()
                    };
                    (w, CyclicOrder::new(labels))
                })
                .collect();

            // Per (vertex, tree index): compliance with this embedding and
            // the determined orientation per incident child (None = free).
            struct VertInfo {
                valid: Vec<bool>,
                o_vals: Vec<Vec<Option<u8>>>,
                pole_o: Vec<Option<u8>>,
            }
            let mut info: BTreeMap<VertexId, VertInfo> = BTreeMap::new();
            for &w in &verts {
                let inc = &incident[&w];
                let trees = self.cg.trees(w);
                let mut valid = Vec::with_capacity(trees.len());
                let mut o_vals = Vec::with_capacity(trees.len());
                let mut pole_o = Vec::with_capacity(trees.len());
                let is_pole = w == u || w == v;
                for tw in trees {
                    let skel = self.skeletal(mu, w, tw, inc)?;
                    let ok = skel.represents(&rot[&w])?;
                    let mut ov: Vec<Option<u8>> = Vec::with_capacity(inc.len());
                    let mut po: Option<u8> = None;
                    if ok {
                        for &(c, _) in inc {
                            let set = self.t.pertinent_leafset(&self.cg.g, c, w);
                            match tw.boundary(&set)? {
                                Boundary::SplitEdge => ov.push(None),
                                Boundary::Node { origin, .. } => {
                                    let dir = node_direction(&skel, origin, &rot[&w]);
                                    debug_assert!(
                                        dir.is_some(),
                                        "represented rotation orients the boundary"
                                    );
                                    ov.push(dir);
                                }
                            }
                        }
                        if is_pole {
                            let lset = self.t.pertinent_leafset(&self.cg.g, mu, w);
                            po = match tw.boundary(&lset)? {
                                Boundary::SplitEdge => None,
                                Boundary::Node { origin, .. } => {
                                    node_direction(&skel, origin, &rot[&w])
                                }
                            };
                        }
                    } else {
                        ov = vec![None; inc.len()];
                    }
                    valid.push(ok);
                    o_vals.push(ov);
                    pole_o.push(po);
                }
                info.insert(
                    w,
                    VertInfo {
                        valid,
                        o_vals,
                        pole_o,
                    },
                );
            }

            let t = self.t;
            let cg = self.cg;
            let slot_of = |w: VertexId, c: usize| -> usize {
                incident[&w].iter().position(|&(cc, _)| cc == c).unwrap()
            };
            let feas = |c: usize, x: VertexId, tx: usize, y: VertexId, ty: usize| -> bool {
                let ix = &info[&x];
                let iy = &info[&y];
                if !ix.valid[tx] || !iy.valid[ty] {
                    return false;
                }
                let ox = ix.o_vals[tx][slot_of(x, c)];
                let oy = iy.o_vals[ty][slot_of(y, c)];
                psis[&c].iter().any(|tup| {
                    let (txu, oxu) = tuple_at(t, c, tup, x);
                    let (tyv, oyv) = tuple_at(t, c, tup, y);
                    txu == tx
                        && tyv == ty
                        && ox.map(|o| o == oxu).unwrap_or(true)
                        && oy.map(|o| o == oyv).unwrap_or(true)
                })
            };

            let mut tables: BTreeMap<usize, BTreeSet<Vec<(VertexId, usize)>>> = BTreeMap::new();
            let order = sc.postorder();
            let mut empty_somewhere = false;
            for &bi in &order {
                let n = &sc.nodes[bi];
                let table: BTreeSet<Vec<(VertexId, usize)>> = match n.children {
                    None => {
                        let ei = *n.edges.iter().next().unwrap();
                        let c = children[ei];
                        let (x, y) = edges[ei];
                        let mut tb = BTreeSet::new();
                        for tx in 0..cg.trees(x).len() {
                            for ty in 0..cg.trees(y).len() {
                                if feas(c, x, tx, y, ty) {
                                    let row: Vec<(VertexId, usize)> = n
                                        .boundary
                                        .iter()
                                        .map(|&w| (w, if w == x { tx } else { ty }))
                                        .collect();
                                    tb.insert(row);
                                }
                            }
                        }
                        tb
                    }
                    Some((b1, b2)) => {
                        let t1 = &tables[&b1];
                        let t2 = &tables[&b2];
                        let shared: Vec<VertexId> = sc.nodes[b1]
                            .boundary
                            .intersection(&sc.nodes[b2].boundary)
                            .copied()
                            .collect();
                        let mut tb = BTreeSet::new();
                        for r1 in t1 {
                            'r2: for r2 in t2 {
                                for &w in &shared {
                                    let a = r1.iter().find(|(x, _)| *x == w).unwrap().1;
                                    let b = r2.iter().find(|(x, _)| *x == w).unwrap().1;
                                    if a != b {
                                        continue 'r2;
                                    }
                                }
                                let row: Vec<(VertexId, usize)> = n
                                    .boundary
                                    .iter()
                                    .map(|&w| {
                                        let tval = r1
                                            .iter()
                                            .chain(r2.iter())
                                            .find(|(x, _)| *x == w)
                                            .expect("boundary vertex in a child row")
                                            .1;
                                        (w, tval)
                                    })
                                    .collect();
                                tb.insert(row);
                            }
                        }
                        tb
                    }
                };
                if table.is_empty() {
                    empty_somewhere = true;
                    break;
                }
                tables.insert(bi, table);
            }
            if empty_somewhere {
                continue;
            }
            for row in &tables[&sc.root] {
                let tu = row.iter().find(|(x, _)| *x == u).unwrap().1;
                let tv = row.iter().find(|(x, _)| *x == v).unwrap().1;
                let ous: Vec<u8> = match info[&u].pole_o[tu] {
                    Some(o) => vec![o],
                    None => vec![0, 1],
                };
                let ovs: Vec<u8> = match info[&v].pole_o[tv] {
                    Some(o) => vec![o],
                    None => vec![0, 1],
                };
                for &ou in &ous {
                    for &ov in &ovs {
                        out.insert(assemble_tuple(self.t, mu, (u, tu, ou), (v, tv, ov)));
                    }
                }
            }
        }
        Ok(out)
    }

    fn run(
        &mut self,
    ) -> Result<(bool, Vec<(usize, char, usize)>, BTreeMap<usize, PsiSet>), DpError> {
        let mut psis: BTreeMap<usize, PsiSet> = BTreeMap::new();
        let mut sizes = Vec::new();
        let mut any_empty = false;
        let root = self.t.root();
        for mu in self.t.postorder() {
            if mu == root {
                continue;
            }
            let kind = self.t.node(mu).kind;
            let psi = match kind {
                SpqrKind::Q => self.psi_leaf(mu),
                SpqrKind::S => self.psi_s(mu, &psis),
                SpqrKind::P => self.psi_p(mu, &psis)?,
                SpqrKind::R => self.psi_r(mu, &psis)?,
            };
            let tag = match kind {
                SpqrKind::Q => 'Q',
                SpqrKind::S => 'S',
                SpqrKind::P => 'P',
                SpqrKind::R => 'R',
            };
            sizes.push((mu, tag, psi.len()));
            if psi.is_empty() {
                any_empty = true;
            }
            psis.insert(mu, psi);
        }
        let apex = self.t.node(root).children[0];
        let feasible = !any_empty && !psis[&apex].is_empty();
        Ok((feasible, sizes, psis))
    }
}

/// The 2SAT instance for one (T_u, T_v) pair of a P-node. Returns the
/// (o_u, o_v) values for which the formula is satisfiable under assumptions.
#[allow(clippy::too_many_arguments)]
fn solve_pnode_2sat(
    c_tree: &FpqTree,
    skel_u: &FpqTree,
    skel_v: &FpqTree,
    bu_mu: &Boundary,
    bv_mu: &Boundary,
    bu_children: &[Boundary],
    bv_children: &[Boundary],
    s_sets: &[BTreeSet<(u8, u8)>],
) -> Result<BTreeSet<(u8, u8)>, DpError> {
    let mut var_of: BTreeMap<(u8, OriginId), usize> = BTreeMap::new();
    let mut sat = TwoSat::new(0);
    {
        let mut register = |b: &Boundary, side: u8| {
            if let Boundary::Node { origin, .. } = b {
                var_of
                    .entry((side, *origin))
                    .or_insert_with(|| sat.add_var());
            }
        };
        register(bu_mu, 0);
        register(bv_mu, 1);
        for b in bu_children {
            register(b, 0);
        }
        for b in bv_children {
            register(b, 1);
        }
    }
    let var_for = |b: &Boundary, side: u8| -> Option<usize> {
        match b {
            Boundary::SplitEdge => None,
            Boundary::Node { origin, .. } => Some(var_of[&(side, *origin)]),
        }
    };

    // Direction-constraint trees over the skeleton ground set: "the first
    // two blocks of this boundary node appear adjacently in this order".
    let ground: Vec<LeafId> = c_tree.ground().to_vec();
    let dir_tree = |side: u8, origin: OriginId, val: u8| -> FpqTree {
        let skel = if side == 0 { skel_u } else { skel_v };
        let blocks = origin_blocks(skel, origin).expect("boundary node survives contraction");
        let b1 = &blocks[0];
        let b2 = &blocks[1];
        // The v-side reads the common order reversed.
        let forward = if side == 0 { val == 0 } else { val == 1 };
        let (first, second) = if forward { (b1, b2) } else { (b2, b1) };
        let mut b = TreeBuilder::new();
        let l1: Vec<usize> = first.iter().map(|&x| b.leaf(x)).collect();
        let l2: Vec<usize> = second.iter().map(|&x| b.leaf(x)).collect();
        let p1 = if l1.len() == 1 {
            l1[0]
        } else {
            b.inner(NodeKind::P, l1)
        };
        let p2 = if l2.len() == 1 {
            l2[0]
        } else {
            b.inner(NodeKind::P, l2)
        };
        let f = b.inner(NodeKind::F, vec![p1, p2]);
        let mut top = vec![f];
        for &x in &ground {
            if !first.contains(&x) && !second.contains(&x) {
                top.push(b.leaf(x));
            }
        }
        let root = if top.len() == 1 {
            top[0]
        } else {
            b.inner(NodeKind::P, top)
        };
        b.finish(root).canonicalized()
    };

    let keys: Vec<(u8, OriginId)> = var_of.keys().copied().collect();
    let mut dts: BTreeMap<((u8, OriginId), u8), FpqTree> = BTreeMap::new();
    for &key in &keys {
        for val in 0..2u8 {
            dts.insert((key, val), dir_tree(key.0, key.1, val));
        }
    }
    let mut restricted: BTreeMap<((u8, OriginId), u8), Option<FpqTree>> = BTreeMap::new();
    for &key in &keys {
        let t0 = intersect(c_tree, &dts[&(key, 0)])?;
        let t1 = intersect(c_tree, &dts[&(key, 1)])?;
        debug_assert!(t0.is_some() || t1.is_some());
        let var = var_of[&key];
        match (&t0, &t1) {
            (Some(_), None) => sat.assign(var, false),
            (None, Some(_)) => sat.assign(var, true),
            _ => {}
        }
        restricted.insert((key, 0), t0);
        restricted.insert((key, 1), t1);
    }
    let free: Vec<(u8, OriginId)> = keys
        .iter()
        .copied()
        .filter(|k| restricted[&(*k, 0)].is_some() && restricted[&(*k, 1)].is_some())
        .collect();
    for i in 0..free.len() {
        for j in (i + 1)..free.len() {
            let (ka, kb) = (free[i], free[j]);
            let mut rel: BTreeSet<(u8, u8)> = BTreeSet::new();
            for a in 0..2u8 {
                for bv in 0..2u8 {
                    if let Some(ta) = &restricted[&(ka, a)] {
                        if intersect(ta, &dts[&(kb, bv)])?.is_some() {
                            rel.insert((a, bv));
                        }
                    }
                }
            }
            let (xa, xb) = (var_of[&ka], var_of[&kb]);
            for a in 0..2u8 {
                for bv in 0..2u8 {
                    if !rel.contains(&(a, bv)) {
                        // Forbid xa == a && xb == bv.
                        sat.clause(
                            Lit {
                                var: xa,
                                positive: a == 0,
                            },
                            Lit {
                                var: xb,
                                positive: bv == 0,
                            },
                        );
                    }
                }
            }
        }
    }
    // Per-child admissibility clauses.
    for (i, s) in s_sets.iter().enumerate() {
        let xu = var_for(&bu_children[i], 0);
        let xv = var_for(&bv_children[i], 1);
        match (xu, xv) {
            (Some(x), Some(y)) => {
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        if !s.contains(&(a, b)) {
                            sat.clause(
                                Lit {
                                    var: x,
                                    positive: a == 0,
                                },
                                Lit {
                                    var: y,
                                    positive: b == 0,
                                },
                            );
                        }
                    }
                }
            }
            (Some(x), None) => {
                let allowed: BTreeSet<u8> = s.iter().map(|&(a, _)| a).collect();
                if allowed.is_empty() {
                    return Ok(BTreeSet::new());
                }
                if allowed.len() == 1 {
                    sat.assign(x, *allowed.iter().next().unwrap() == 1);
                }
            }
            (None, Some(y)) => {
                let allowed: BTreeSet<u8> = s.iter().map(|&(_, b)| b).collect();
                if allowed.is_empty() {
                    return Ok(BTreeSet::new());
                }
                if allowed.len() == 1 {
                    sat.assign(y, *allowed.iter().next().unwrap() == 1);
                }
            }
            (None, None) => {}
        }
    }
    let mut out = BTreeSet::new();
    for ou in 0..2u8 {
        for ov in 0..2u8 {
            let mut assumptions = Vec::new();
            if let Some(x) = var_for(bu_mu, 0) {
                assumptions.push(Lit {
                    var: x,
                    positive: ou == 1,
                });
            }
            if let Some(y) = var_for(bv_mu, 1) {
                assumptions.push(Lit {
                    var: y,
                    positive: ov == 1,
                });
            }
            if sat.satisfiable(&assumptions) {
                out.insert((ou, ov));
            }
        }
    }
    Ok(out)
}

/// Tests whether (G, D) is FPQ-choosable planar.
pub fn test(cg: &ChoosableGraph) -> Result<DpReport, DpError> {
    test_with(cg, &DpOptions::default())
}

pub fn test_with(cg: &ChoosableGraph, opts: &DpOptions) -> Result<DpReport, DpError> {
    if !cg.g.is_biconnected() {
        return Err(DpError::NotBiconnected);
    }
    let d_max_input = cg.d_max();
    let t0 = Instant::now();
    if cg.g.n_edges() < 2 {
        // A single edge has a unique rotation system, which is planar.
        return Ok(DpReport {
            feasible: true,
            psi_sizes: Vec::new(),
            d_max_input,
            d_max_preprocessed: d_max_input,
            observed_width: 0,
            warnings: Vec::new(),
            t_decompose: t0.elapsed(),
            t_preprocess: Duration::ZERO,
            t_psi: Duration::ZERO,
        });
    }
    let tree = match SpqrTree::decompose(&cg.g) {
        Ok(t) => t,
        Err(SpqrError::NotPlanar) => {
            return Ok(DpReport {
                feasible: false,
                psi_sizes: Vec::new(),
                d_max_input,
                d_max_preprocessed: 0,
                observed_width: 0,
                warnings: vec!["input graph is not planar".into()],
                t_decompose: t0.elapsed(),
                t_preprocess: Duration::ZERO,
                t_psi: Duration::ZERO,
            });
        }
        Err(SpqrError::NotBiconnected) => return Err(DpError::NotBiconnected),
        Err(e) => panic!("unexpected decomposition failure: {e}"),
    };
    let t_decompose = t0.elapsed();

    let t1 = Instant::now();
    let pre = preprocess(cg, &tree)?;
    let t_preprocess = t1.elapsed();
    let Some(pre) = pre else {
        return Ok(DpReport {
            feasible: false,
            psi_sizes: Vec::new(),
            d_max_input,
            d_max_preprocessed: 0,
            observed_width: 0,
            warnings: Vec::new(),
            t_decompose,
            t_preprocess,
            t_psi: Duration::ZERO,
        });
    };

    let t2 = Instant::now();
    let mut ctx = Ctx {
        cg: &pre,
        t: &tree,
        opts,
        warnings: Vec::new(),
        observed_width: 0,
    };
    let (feasible, psi_sizes, _) = ctx.run()?;
    Ok(DpReport {
        feasible,
        psi_sizes,
        d_max_input,
        d_max_preprocessed: pre.d_max(),
        observed_width: ctx.observed_width,
        warnings: ctx.warnings,
        t_decompose,
        t_preprocess,
        t_psi: t2.elapsed(),
    })
}

/// Computes the psi set of a single SPQR node on an already-preprocessed
/// instance; used for per-node comparison against the oracle.
pub fn psi_of_node(
    cg_pre: &ChoosableGraph,
    tree: &SpqrTree,
    mu: usize,
    opts: &DpOptions,
) -> Result<PsiSet, DpError> {
    let mut ctx = Ctx {
        cg: cg_pre,
        t: tree,
        opts,
        warnings: Vec::new(),
        observed_width: 0,
    };
    let (_, _, psis) = ctx.run()?;
    Ok(psis.get(&mu).cloned().unwrap_or_default())
}

/// Extracts a verified witness by pinning one tree per vertex and then one
/// rotation per vertex, re-running the decision procedure at each step.
pub fn extract_witness(cg: &ChoosableGraph, opts: &DpOptions) -> Result<Option<Witness>, DpError> {
    if !test_with(cg, opts)?.feasible {
        return Ok(None);
    }
    let mut pinned = cg.clone();
    let mut assignment = Vec::with_capacity(cg.d.len());
    for v in cg.g.vertices() {
        let mut chosen = None;
        for i in 0..cg.trees(v).len() {
            let mut trial = pinned.clone();
            trial.d[v.0 as usize] = vec![cg.trees(v)[i].clone()];
            if test_with(&trial, opts)?.feasible {
                pinned = trial;
                chosen = Some(i);
                break;
            }
        }
        assignment.push(chosen.expect("a feasible instance has a feasible tree choice"));
    }
    let mut rotation_orders: Vec<CyclicOrder> = Vec::with_capacity(cg.d.len());
    for v in cg.g.vertices() {
        let tree = pinned.trees(v)[0].clone();
        if tree.count_orders() > opts.witness_cap {
            return Err(DpError::WitnessCap);
        }
        let orders = tree.enumerate_orders(opts.witness_cap)?;
        let mut chosen = None;
        for sigma in orders {
            let pin_tree = order_tree(&sigma);
            let mut trial = pinned.clone();
            trial.d[v.0 as usize] = vec![pin_tree];
            if test_with(&trial, opts)?.feasible {
                pinned = trial;
                chosen = Some(sigma);
                break;
            }
        }
        rotation_orders.push(chosen.expect("a feasible instance has a feasible rotation"));
    }
    let rotation = RotationSystem::new(
        cg.g.vertices()
            .map(|v| {
                rotation_orders[v.0 as usize]
                    .as_slice()
                    .iter()
                    .map(|&l| {
                        let e = EdgeId(l.0);
                        let (a, _) = cg.g.endpoints(e);
                        Dart::new(e, if a == v { 0 } else { 1 })
                    })
                    .collect()
            })
            .collect(),
    );
    assert!(rotation.covers(&cg.g));
    assert!(
        is_planar_rotation(&cg.g, &rotation).unwrap(),
        "witness rotation must be planar"
    );
    for v in cg.g.vertices() {
        let chosen = &cg.trees(v)[assignment[v.0 as usize]];
        assert!(
            chosen.represents(&rotation_orders[v.0 as usize]).unwrap(),
            "witness rotation must be represented by the chosen tree"
        );
    }
    Ok(Some(Witness {
        assignment,
        rotation,
    }))
}

/// The FPQ-tree representing exactly one cyclic order.
pub fn order_tree(sigma: &CyclicOrder) -> FpqTree {
    let mut b = TreeBuilder::new();
    let leaves: Vec<usize> = sigma.as_slice().iter().map(|&l| b.leaf(l)).collect();
    if leaves.len() == 1 {
        let r = leaves[0];
        return b.finish(r);
    }
    let root = b.inner(NodeKind::F, leaves);
    b.finish(root).canonicalized()
}
