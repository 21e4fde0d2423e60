//! Instance generators: seeded random biconnected planar instances, the
//! 3-edge-coloring construction (tripled edges, crossing dummies, one tree
//! per color pattern), and the list-coloring construction (color-labeled
//! triplets with twisted Q-nodes), each in a standard and a P-node-only
//! variant. Both constructions are validated by Euler planarity at build
//! time; their fidelity against brute-force colorers is asserted in tests.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::SmallRng;
use rand::{RngExt, SeedableRng};
use thiserror::Error;

use crate::dp::ChoosableGraph;
use crate::fpq::{FpqTree, LeafId, NodeKind, TreeBuilder};
use crate::graph::{is_planar_rotation, Dart, EdgeId, MultiGraph, RotationSystem, VertexId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("graph is not cubic")]
    NotCubic,
    #[error("crossing record references edge crossings out of order or more than twice")]
    BadCrossings,
    #[error("no planarization found for the given rotation and crossings")]
    NoPlanarization,
    #[error("instance rotation is not planar")]
    NotPlanar,
    #[error("generator parameters out of range")]
    BadParams,
    #[error("dp error: {0}")]
    Dp(#[from] crate::dp::DpError),
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RandomParams {
    pub n: usize,
    pub m: usize,
    pub d_max: usize,
    /// Upper bound on vertex degree (leaf count of the trees).
    pub tree_size: usize,
    /// Resample until the oracle candidate-pair estimate fits this budget.
    pub pair_budget: u128,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            n: 6,
            m: 10,
            d_max: 3,
            tree_size: 6,
            pair_budget: 200_000,
        }
    }
}

/// An embedded planar multigraph under construction: rotation maintained
/// explicitly, faces re-traced on demand.
struct Embedded {
    g: MultiGraph,
    rot: Vec<Vec<Dart>>,
}

impl Embedded {
    fn faces(&self) -> Vec<Vec<Dart>> {
        let rho = RotationSystem::new(self.rot.clone());
        let mut seen: BTreeSet<Dart> = BTreeSet::new();
        let mut out = Vec::new();
        for e in self.g.edges() {
            for end in 0..2u8 {
                let start = Dart::new(e, end);
                if seen.contains(&start) {
                    continue;
                }
                let mut face = Vec::new();
                let mut d = start;
                loop {
                    face.push(d);
                    seen.insert(d);
                    // successor of twin in rotation
                    let t = d.twin();
                    let v = self.g.dart_vertex(t);
                    let ring = &rho.order[v.0 as usize];
                    let pos = ring.iter().position(|&x| x == t).unwrap();
                    d = ring[(pos + 1) % ring.len()];
                    if d == start {
                        break;
                    }
                }
                out.push(face);
            }
        }
        out
    }

    /// Adds an edge between the tails of two darts of one face, splitting it.
    fn add_edge_in_face(&mut self, name: &str, da: Dart, db: Dart) -> EdgeId {
        let u = self.g.dart_vertex(da);
        let v = self.g.dart_vertex(db);
        let e = self
            .g
            .add_edge(
                name,
                &self.g.vertex_name(u).to_string(),
                &self.g.vertex_name(v).to_string(),
            )
            .unwrap();
        let new_u = Dart::new(e, 0);
        let new_v = Dart::new(e, 1);
        let pu = self.rot[u.0 as usize]
            .iter()
            .position(|&x| x == da)
            .unwrap();
        self.rot[u.0 as usize].insert(pu, new_u);
        let pv = self.rot[v.0 as usize]
            .iter()
            .position(|&x| x == db)
            .unwrap();
        self.rot[v.0 as usize].insert(pv, new_v);
        e
    }

    /// Adds a new degree-2 vertex on a path between the tails of two face
    /// darts.
    fn add_path_vertex(&mut self, names: (&str, &str, &str), da: Dart, db: Dart) {
        let u = self.g.dart_vertex(da);
        let v = self.g.dart_vertex(db);
        let w = self.g.ensure_vertex(names.0);
        self.rot.push(Vec::new());
        let e1 = self
            .g
            .add_edge(names.1, &self.g.vertex_name(u).to_string(), names.0)
            .unwrap();
        let e2 = self
            .g
            .add_edge(names.2, names.0, &self.g.vertex_name(v).to_string())
            .unwrap();
        let pu = self.rot[u.0 as usize]
            .iter()
            .position(|&x| x == da)
            .unwrap();
        self.rot[u.0 as usize].insert(pu, Dart::new(e1, 0));
        let pv = self.rot[v.0 as usize]
            .iter()
            .position(|&x| x == db)
            .unwrap();
        self.rot[v.0 as usize].insert(pv, Dart::new(e2, 1));
        self.rot[w.0 as usize] = vec![Dart::new(e1, 1), Dart::new(e2, 0)];
    }
}

/// Seeded deterministic biconnected planar multigraph with random FPQ-tree
/// sets. About half of the trees are built around an actual planar rotation
/// of the construction, so instances are nontrivially satisfiable.
pub fn gen_random(seed: u64, params: RandomParams) -> Result<ChoosableGraph, GenError> {
    if params.n < 2 || params.m < params.n.min(3) || params.d_max == 0 || params.tree_size < 2 {
        return Err(GenError::BadParams);
    }
    let mut rng = SmallRng::seed_from_u64(seed);
    for _attempt in 0..200 {
        if let Some(cg) = try_random(&mut rng, &params) {
            return Ok(cg);
        }
    }
    Err(GenError::BadParams)
}

fn try_random(rng: &mut SmallRng, params: &RandomParams) -> Option<ChoosableGraph> {
    // Start with a cycle (a 2-vertex dipole when n = 2).
    let start = if params.n == 2 {
        2
    } else {
        rng.random_range(3..=params.n.min(4))
    };
    let mut g = MultiGraph::empty();
    let mut rot: Vec<Vec<Dart>> = Vec::new();
    if start == 2 {
        g.ensure_vertex("v0");
        g.ensure_vertex("v1");
        let e0 = g.add_edge("e0", "v0", "v1").unwrap();
        let e1 = g.add_edge("e1", "v0", "v1").unwrap();
        rot.push(vec![Dart::new(e0, 0), Dart::new(e1, 0)]);
        rot.push(vec![Dart::new(e0, 1), Dart::new(e1, 1)]);
    } else {
        for i in 0..start {
            g.ensure_vertex(&format!("v{}", i));
            rot.push(Vec::new());
        }
        for i in 0..start {
            let j = (i + 1) % start;
            g.add_edge(&format!("e{}", i), &format!("v{}", i), &format!("v{}", j))
                .unwrap();
        }
        for i in 0..start {
            let prev = EdgeId(((i + start - 1) % start) as u32);
            let next = EdgeId(i as u32);
            rot[i] = vec![Dart::new(prev, 1), Dart::new(next, 0)];
        }
    }
    let mut emb = Embedded { g, rot };

    // Grow vertices by inserting degree-2 path vertices into faces.
    let mut next_v = emb.g.n_vertices();
    let mut next_e = emb.g.n_edges();
    while emb.g.n_vertices() < params.n {
        let faces = emb.faces();
        let f = &faces[rng.random_range(0..faces.len())];
        if f.len() < 2 {
            return None;
        }
        let i = rng.random_range(0..f.len());
        let mut j = rng.random_range(0..f.len());
        if i == j {
            j = (j + 1) % f.len();
        }
        let (da, db) = (f[i], f[j]);
        if emb.g.dart_vertex(da) == emb.g.dart_vertex(db) {
            continue;
        }
        let wname = format!("v{}", next_v);
        let n1 = format!("e{}", next_e);
        let n2 = format!("e{}", next_e + 1);
        emb.add_path_vertex((&wname, &n1, &n2), da, db);
        next_v += 1;
        next_e += 2;
    }
    // Grow edges with chords/parallels, respecting the degree bound.
    let mut guard = 0;
    while emb.g.n_edges() < params.m {
        guard += 1;
        if guard > 500 {
            return None;
        }
        let faces = emb.faces();
        let f = &faces[rng.random_range(0..faces.len())];
        if f.len() < 2 {
            continue;
        }
        let i = rng.random_range(0..f.len());
        let mut j = rng.random_range(0..f.len());
        if i == j {
            j = (j + 1) % f.len();
        }
        let (da, db) = (f[i], f[j]);
        let (u, v) = (emb.g.dart_vertex(da), emb.g.dart_vertex(db));
        if u == v {
            continue;
        }
        if emb.g.degree(u) >= params.tree_size || emb.g.degree(v) >= params.tree_size {
            continue;
        }
        emb.add_edge_in_face(&format!("e{}", next_e), da, db);
        next_e += 1;
    }
    let rho = RotationSystem::new(emb.rot.clone());
    debug_assert!(is_planar_rotation(&emb.g, &rho).unwrap());
    if !emb.g.is_biconnected() {
        return None;
    }

    // Tree sets: mix of rotation-coarsening trees and fully random ones.
    let g = emb.g;
    let mut d: Vec<Vec<FpqTree>> = Vec::new();
    for v in g.vertices() {
        let ring: Vec<LeafId> = rho.order[v.0 as usize]
            .iter()
            .map(|dt| LeafId(dt.edge.0))
            .collect();
        let count = rng.random_range(1..=params.d_max);
        let mut trees = Vec::new();
        for _ in 0..count {
            let tree = if rng.random_bool(0.55) {
                coarsening_tree(rng, &ring)
            } else {
                let mut shuffled = ring.clone();
                for i in (1..shuffled.len()).rev() {
                    let j = rng.random_range(0..=i);
                    shuffled.swap(i, j);
                }
                coarsening_tree(rng, &shuffled)
            };
            trees.push(tree);
        }
        d.push(trees);
    }
    let cg = ChoosableGraph::new(g, d).ok()?;
    // Keep the oracle workload bounded.
    let mut total: u128 = 1;
    for trees in &cg.d {
        let s: u128 = trees.iter().map(|t| t.count_orders()).sum();
        total = total.saturating_mul(s.max(1));
    }
    if total > params.pair_budget {
        return None;
    }
    Some(cg)
}

/// A random hierarchical tree whose stored sequences follow the given cyclic
/// order, so the order itself is always represented.
fn coarsening_tree(rng: &mut SmallRng, ring: &[LeafId]) -> FpqTree {
    fn build(rng: &mut SmallRng, b: &mut TreeBuilder, seq: &[LeafId]) -> usize {
        if seq.len() == 1 {
            return b.leaf(seq[0]);
        }
        let parts = if seq.len() == 2 {
            2
        } else {
            rng.random_range(2..=seq.len().min(4))
        };
        // Split seq into `parts` consecutive chunks.
        let mut cuts: BTreeSet<usize> = BTreeSet::new();
        while cuts.len() < parts - 1 {
            cuts.insert(rng.random_range(1..seq.len()));
        }
        let mut children = Vec::new();
        let mut prev = 0;
        for &c in cuts.iter().chain(std::iter::once(&seq.len())) {
            children.push(build(rng, b, &seq[prev..c]));
            prev = c;
        }
        let kind = match rng.random_range(0..4) {
            0 => NodeKind::P,
            1 | 2 => NodeKind::Q,
            _ => NodeKind::F,
        };
        b.inner(kind, children)
    }
    let mut b = TreeBuilder::new();
    let root = build(rng, &mut b, ring);
    b.finish(root).canonicalized()
}

// ---------------------------------------------------------------------------
// 3-edge-coloring construction
// ---------------------------------------------------------------------------

/// A cubic multigraph with a rotation system and crossing records. Crossing
/// positions rank the crossings along each edge from its first endpoint.
#[derive(Debug, Clone)]
pub struct DrawnCubicGraph {
    pub g: MultiGraph,
    pub rotation: RotationSystem,
    /// (edge1, edge2, rank along edge1, rank along edge2)
    pub crossings: Vec<(EdgeId, EdgeId, usize, usize)>,
}

/// The planarization of a drawn graph: each crossing becomes a 4-valent
/// dummy. Crossing handedness is searched (few crossings at desk scale) and
/// validated by the Euler criterion.
struct Planarized {
    g: MultiGraph,
    /// Per original edge: the chain of segment edge ids from endpoint 0.
    segments: BTreeMap<EdgeId, Vec<EdgeId>>,
}

fn planarize(dg: &DrawnCubicGraph) -> Result<Planarized, GenError> {
    let g = &dg.g;
    // Crossings along each edge, sorted by rank.
    let mut along: BTreeMap<EdgeId, Vec<(usize, usize)>> = BTreeMap::new(); // (rank, crossing idx)
    for (ci, &(e1, e2, r1, r2)) in dg.crossings.iter().enumerate() {
        if e1 == e2 {
            return Err(GenError::BadCrossings);
        }
        along.entry(e1).or_default().push((r1, ci));
        along.entry(e2).or_default().push((r2, ci));
    }
    for list in along.values_mut() {
        list.sort_unstable();
        let ranks: BTreeSet<usize> = list.iter().map(|&(r, _)| r).collect();
        if ranks.len() != list.len() {
            return Err(GenError::BadCrossings);
        }
    }
    let n_cross = dg.crossings.len();
    if n_cross > 16 {
        return Err(GenError::BadCrossings);
    }

    // Try all handedness vectors.
    for signs in 0u32..(1u32 << n_cross) {
        let mut pg = MultiGraph::empty();
        for v in g.vertices() {
            pg.ensure_vertex(g.vertex_name(v));
        }
        for ci in 0..n_cross {
            pg.ensure_vertex(&format!("__x{}", ci));
        }
        // Build segment chains.
        let mut segments: BTreeMap<EdgeId, Vec<EdgeId>> = BTreeMap::new();
        for e in g.edges() {
            let (a, b) = g.endpoints(e);
            let mut chain_vertices = vec![g.vertex_name(a).to_string()];
            if let Some(list) = along.get(&e) {
                for &(_, ci) in list {
                    chain_vertices.push(format!("__x{}", ci));
                }
            }
            chain_vertices.push(g.vertex_name(b).to_string());
            let mut chain = Vec::new();
            for (k, w) in chain_vertices.windows(2).enumerate() {
                let name = format!("{}_{}", g.edge_name(e), k);
                chain.push(pg.add_edge(&name, &w[0], &w[1]).unwrap());
            }
            segments.insert(e, chain);
        }
        // Rotations: original vertices follow dg.rotation with edges replaced
        // by their first/last segment.
        let mut rot: Vec<Vec<Dart>> = vec![Vec::new(); pg.n_vertices()];
        for v in g.vertices() {
            let ring = &dg.rotation.order[v.0 as usize];
            let mut out = Vec::new();
            for d in ring {
                let chain = &segments[&d.edge];
                let seg = if d.end == 0 {
                    chain[0]
                } else {
                    *chain.last().unwrap()
                };
                let (a, _) = pg.endpoints(seg);
                out.push(Dart::new(
                    seg,
                    if pg.vertex_name(a) == g.vertex_name(g.dart_vertex(*d)) {
                        0
                    } else {
                        1
                    },
                ));
            }
            let pv = pg.vertex_by_name(g.vertex_name(v)).unwrap();
            rot[pv.0 as usize] = out;
        }
        // Crossing vertices: alternating in/out, two handedness choices.
        for (ci, &(e1, e2, _, _)) in dg.crossings.iter().enumerate() {
            let xv = pg.vertex_by_name(&format!("__x{}", ci)).unwrap();
            let seg_pair = |e: EdgeId| -> (Dart, Dart) {
                let list = &along[&e];
                let pos = list.iter().position(|&(_, c)| c == ci).unwrap();
                let chain = &segments[&e];
                // Incoming segment ends at the crossing; outgoing starts.
                let inc = chain[pos];
                let outg = chain[pos + 1];
                (Dart::new(inc, 1), Dart::new(outg, 0))
            };
            let (e1_in, e1_out) = seg_pair(e1);
            let (e2_in, e2_out) = seg_pair(e2);
            debug_assert!(pg.dart_vertex(e1_in) == xv && pg.dart_vertex(e2_out) == xv);
            let flipped = signs >> ci & 1 == 1;
            rot[xv.0 as usize] = if flipped {
                vec![e1_in, e2_out, e1_out, e2_in]
            } else {
                vec![e1_in, e2_in, e1_out, e2_out]
            };
        }
        let rho = RotationSystem::new(rot);
        if rho.covers(&pg) && is_planar_rotation(&pg, &rho).unwrap_or(false) {
            return Ok(Planarized { g: pg, segments });
        }
    }
    Err(GenError::NoPlanarization)
}

/// Ribbon expansion: every planarized edge becomes `width` parallel strands;
/// crossing dummies become width x width grids. Returns the strand graph,
/// its planar rotation, and per (original edge, strand) the edge ids of the
/// end segments at each endpoint.
struct Ribbon {
    g: MultiGraph,
    rot: RotationSystem,
    /// (orig edge, strand) -> (segment id at endpoint0, segment id at endpoint1)
    ends: BTreeMap<(EdgeId, usize), (EdgeId, EdgeId)>,
}

fn ribbon_expand(dg: &DrawnCubicGraph, pz: &Planarized, width: usize) -> Ribbon {
    let pg = &pz.g;
    let mut rg = MultiGraph::empty();
    // Vertices: originals plus width x width grid per crossing.
    for v in dg.g.vertices() {
        rg.ensure_vertex(dg.g.vertex_name(v));
    }
    for ci in 0..dg.crossings.len() {
        for r in 0..width {
            for c in 0..width {
                rg.ensure_vertex(&format!("__x{}r{}c{}", ci, r, c));
            }
        }
    }
    // Strand segments: each planarized segment becomes `width` strands. The
    // strand index follows the ORIGINAL edge's strand; endpoints at crossing
    // vertices attach to grid rows/columns.
    // For crossing ci of (e1, e2): e1-strand i is grid row i, e2-strand j is
    // grid column j. Grid edges wire consecutive rows/columns.
    let crossing_of = |name: &str| -> Option<usize> {
        name.strip_prefix("__x")
            .and_then(|s| s.parse::<usize>().ok())
    };
    // Where strand s of original edge e attaches when the planarized segment
    // endpoint is vertex `pv` (by name).
    let attach = |e: EdgeId, strand: usize, pv_name: &str, incoming: bool| -> String {
        match crossing_of(pv_name) {
            None => pv_name.to_string(),
            Some(ci) => {
                let (e1, e2, _, _) = dg.crossings[ci];
                if e == e1 {
                    // Row `strand`; incoming attaches at column 0.
                    let col = if incoming { 0 } else { width - 1 };
                    format!("__x{}r{}c{}", ci, strand, col)
                } else {
                    debug_assert_eq!(e, e2);
                    // Column indexing is mirrored: the patch boundary reads
                    // the entering side of the second edge backwards.
                    let row = if incoming { 0 } else { width - 1 };
                    format!("__x{}r{}c{}", ci, row, width - 1 - strand)
                }
            }
        }
    };
    // Build strand edges for every planarized segment.
    let mut ends: BTreeMap<(EdgeId, usize), (EdgeId, EdgeId)> = BTreeMap::new();
    // seg_strand[(segment, strand)] = strand edge id in rg
    let mut seg_strand: BTreeMap<(EdgeId, usize), EdgeId> = BTreeMap::new();
    for e in dg.g.edges() {
        let chain = &pz.segments[&e];
        for (k, &seg) in chain.iter().enumerate() {
            let (pa, pb) = pg.endpoints(seg);
            let na = pg.vertex_name(pa);
            let nb = pg.vertex_name(pb);
            for s in 0..width {
                // "incoming" is from the perspective of walking e from its
                // first endpoint: pa -> pb; at pa we are leaving (so the
                // segment is "outgoing" there), at pb arriving.
                let a_name = attach(e, s, na, false);
                let b_name = attach(e, s, nb, true);
                let name = format!("{}_{}s{}", dg.g.edge_name(e), k, s);
                let id = rg.add_edge(&name, &a_name, &b_name).unwrap();
                seg_strand.insert((seg, s), id);
                if k == 0 {
                    ends.entry((e, s)).or_insert((id, id)).0 = id;
                }
                if k == chain.len() - 1 {
                    ends.entry((e, s)).or_insert((id, id)).1 = id;
                }
            }
        }
    }
    // Grid internal edges.
    for ci in 0..dg.crossings.len() {
        for r in 0..width {
            for c in 0..width.saturating_sub(1) {
                rg.add_edge(
                    &format!("__gx{}r{}c{}h", ci, r, c),
                    &format!("__x{}r{}c{}", ci, r, c),
                    &format!("__x{}r{}c{}", ci, r, c + 1),
                )
                .unwrap();
            }
        }
        for c in 0..width {
            for r in 0..width.saturating_sub(1) {
                rg.add_edge(
                    &format!("__gx{}r{}c{}v", ci, r, c),
                    &format!("__x{}r{}c{}", ci, r, c),
                    &format!("__x{}r{}c{}", ci, r + 1, c),
                )
                .unwrap();
            }
        }
    }
    // Rotations. Original vertices: expand each incident segment-dart into
    // its strands: ascending strand order when the segment leaves the vertex
    // (end 0), descending when it arrives (end 1) - the ribbon mirror rule.
    let mut rot: Vec<Vec<Dart>> = vec![Vec::new(); rg.n_vertices()];
    let dart_at = |rg: &MultiGraph, e: EdgeId, vname: &str| -> Dart {
        let (a, _) = rg.endpoints(e);
        Dart::new(e, if rg.vertex_name(a) == vname { 0 } else { 1 })
    };
    for v in dg.g.vertices() {
        let vname = dg.g.vertex_name(v);
        let mut out = Vec::new();
        for d in &dg.rotation.order[v.0 as usize] {
            let chain = &pz.segments[&d.edge];
            let seg = if d.end == 0 {
                chain[0]
            } else {
                *chain.last().unwrap()
            };
            let strands: Vec<usize> = if d.end == 0 {
                (0..width).collect()
            } else {
                (0..width).rev().collect()
            };
            for s in strands {
                out.push(dart_at(&rg, seg_strand[&(seg, s)], vname));
            }
        }
        let rv = rg.vertex_by_name(vname).unwrap();
        rot[rv.0 as usize] = out;
    }
    // Grid vertices: alternate (e-prev, f-prev, e-next, f-next) so rows run
    // by column index and columns by row index; boundary slots attach to the
    // strand segments.
    for (ci, &(e1, e2, _, _)) in dg.crossings.iter().enumerate() {
        // Per row r: the chain along e1 is ...incoming seg, grid cols 0..w-1,
        // outgoing seg...; the incoming segment for strand r ends at col 0.
        let seg_pair = |e: EdgeId| -> (EdgeId, EdgeId) {
            let list: Vec<(usize, usize)> = dg
                .crossings
                .iter()
                .enumerate()
                .filter(|(_, &(a, b, _, _))| a == e || b == e)
                .map(|(i, &(a, _, r1, r2))| (if a == e { r1 } else { r2 }, i))
                .collect();
            let mut sorted = list.clone();
            sorted.sort_unstable();
            let pos = sorted.iter().position(|&(_, c)| c == ci).unwrap();
            let chain = &pz.segments[&e];
            (chain[pos], chain[pos + 1])
        };
        let (e1_in, e1_out) = seg_pair(e1);
        let (e2_in, e2_out) = seg_pair(e2);
        for r in 0..width {
            for c in 0..width {
                let vname = format!("__x{}r{}c{}", ci, r, c);
                let vv = rg.vertex_by_name(&vname).unwrap();
                // Along the row (e1-strand r): previous and next.
                let row_prev = if c == 0 {
                    seg_strand[&(e1_in, r)]
                } else {
                    rg.edge_by_name(&format!("__gx{}r{}c{}h", ci, r, c - 1))
                        .unwrap()
                };
                let row_next = if c == width - 1 {
                    seg_strand[&(e1_out, r)]
                } else {
                    rg.edge_by_name(&format!("__gx{}r{}c{}h", ci, r, c))
                        .unwrap()
                };
                let col_prev = if r == 0 {
                    seg_strand[&(e2_in, width - 1 - c)]
                } else {
                    rg.edge_by_name(&format!("__gx{}r{}c{}v", ci, r - 1, c))
                        .unwrap()
                };
                let col_next = if r == width - 1 {
                    seg_strand[&(e2_out, width - 1 - c)]
                } else {
                    rg.edge_by_name(&format!("__gx{}r{}c{}v", ci, r, c))
                        .unwrap()
                };
                rot[vv.0 as usize] = vec![
                    dart_at(&rg, row_prev, &vname),
                    dart_at(&rg, col_prev, &vname),
                    dart_at(&rg, row_next, &vname),
                    dart_at(&rg, col_next, &vname),
                ];
            }
        }
    }
    let rho = RotationSystem::new(rot);
    Ribbon {
        g: rg,
        rot: rho,
        ends,
    }
}

/// Fixes the ribbon handedness per crossing so the expanded rotation is
/// planar: the alternation order at grid vertices has a global convention
/// that may disagree with a crossing's sign, so flip strand indices of one
/// passing edge where needed. At desk scale, search the flips.
fn ribbon_planar(dg: &DrawnCubicGraph, pz: &Planarized, width: usize) -> Result<Ribbon, GenError> {
    // Try flipping e2 strand order per crossing.
    let n = dg.crossings.len();
    if n == 0 {
        let r = ribbon_expand(dg, pz, width);
        return if is_planar_rotation(&r.g, &r.rot).unwrap_or(false) {
            Ok(r)
        } else {
            Err(GenError::NoPlanarization)
        };
    }
    for mask in 0u32..(1u32 << n) {
        let mut dg2 = dg.clone();
        // Flipping the roles of rows amounts to swapping the in/out ends of
        // e2 at that crossing; realize it by reversing the e2 rank... that
        // changes global structure, so instead flip by swapping e1/e2 in the
        // crossing record (transposes the grid).
        for ci in 0..n {
            if mask >> ci & 1 == 1 {
                let (a, b, ra, rb) = dg2.crossings[ci];
                dg2.crossings[ci] = (b, a, rb, ra);
            }
        }
        let pz2 = match planarize(&dg2) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let r = ribbon_expand(&dg2, &pz2, width);
        if is_planar_rotation(&r.g, &r.rot).unwrap_or(false) {
            return Ok(r);
        }
    }
    Err(GenError::NoPlanarization)
}

/// The six color patterns: assignments of the three configurations
/// (red, green, blue) to the three incident bundles.
fn color_patterns() -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                if a != b && b != c && a != c {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Edge-coloring instance from a drawn cubic graph: every edge becomes 3
/// parallel strands (6 in the P-node-only variant), every crossing a grid of
/// 4-valent dummies, every original vertex carries 6 trees (one per proper
/// color pattern of its three bundles).
pub fn gen_3ec(dg: &DrawnCubicGraph, p_only: bool) -> Result<ChoosableGraph, GenError> {
    for v in dg.g.vertices() {
        if dg.g.degree(v) != 3 {
            return Err(GenError::NotCubic);
        }
    }
    if !dg.rotation.covers(&dg.g) {
        return Err(GenError::NotPlanar);
    }
    let width = if p_only { 6 } else { 3 };
    let pz = planarize(dg)?;
    let ribbon = ribbon_planar(dg, &pz, width)?;
    let rg = &ribbon.g;
    debug_assert!(is_planar_rotation(rg, &ribbon.rot).unwrap());

    // Leaf ids of strand ends at a vertex.
    let strand_leaf = |e: EdgeId, s: usize, end: u8| -> LeafId {
        let (a, b) = ribbon.ends[&(e, s)];
        LeafId(if end == 0 { a.0 } else { b.0 })
    };

    let mut d: Vec<Vec<FpqTree>> = vec![Vec::new(); rg.n_vertices()];
    // Original vertices: six trees each.
    for v in dg.g.vertices() {
        let rv = rg.vertex_by_name(dg.g.vertex_name(v)).unwrap();
        let bundles: Vec<(EdgeId, u8)> = dg.rotation.order[v.0 as usize]
            .iter()
            .map(|dt| (dt.edge, dt.end))
            .collect();
        debug_assert_eq!(bundles.len(), 3);
        let mut trees = Vec::new();
        for pattern in color_patterns() {
            let mut b = TreeBuilder::new();
            let mut tops = Vec::new();
            for (bi, &(e, end)) in bundles.iter().enumerate() {
                let config = pattern[bi];
                let node = if !p_only {
                    // Q over the three strand leaves in configuration order:
                    // red (1,2,3), green (1,3,2), blue (2,1,3).
                    let ord: [usize; 3] = match config {
                        0 => [0, 1, 2],
                        1 => [0, 2, 1],
                        _ => [1, 0, 2],
                    };
                    let leaves: Vec<usize> = ord
                        .iter()
                        .map(|&s| b.leaf(strand_leaf(e, s, end)))
                        .collect();
                    b.inner(NodeKind::Q, leaves)
                } else {
                    // Three P-pairs per configuration: red (12)(34)(56),
                    // green (16)(32)(54), blue (14)(36)(52).
                    let pairs: [[usize; 2]; 3] = match config {
                        0 => [[0, 1], [2, 3], [4, 5]],
                        1 => [[0, 5], [2, 1], [4, 3]],
                        _ => [[0, 3], [2, 5], [4, 1]],
                    };
                    let ps: Vec<usize> = pairs
                        .iter()
                        .map(|pr| {
                            let l1 = b.leaf(strand_leaf(e, pr[0], end));
                            let l2 = b.leaf(strand_leaf(e, pr[1], end));
                            b.inner(NodeKind::P, vec![l1, l2])
                        })
                        .collect();
                    b.inner(NodeKind::P, ps)
                };
                tops.push(node);
            }
            let root = b.inner(NodeKind::P, tops);
            trees.push(b.finish(root).canonicalized());
        }
        d[rv.0 as usize] = trees;
    }
    // Dummy vertices: a single unconstrained P-tree.
    for rv in rg.vertices() {
        if !d[rv.0 as usize].is_empty() {
            continue;
        }
        let leaves: Vec<LeafId> = rg.darts_at(rv).iter().map(|dt| LeafId(dt.edge.0)).collect();
        d[rv.0 as usize] = vec![FpqTree::flat(NodeKind::P, &leaves)];
    }
    Ok(ChoosableGraph::new(rg.clone(), d)?)
}

/// Brute-force 3-edge-colorability of a cubic multigraph.
pub fn three_edge_colorable(g: &MultiGraph) -> bool {
    let m = g.n_edges();
    let mut colors = vec![usize::MAX; m];
    fn rec(g: &MultiGraph, colors: &mut Vec<usize>, e: usize) -> bool {
        if e == g.n_edges() {
            return true;
        }
        let (u, v) = g.endpoints(EdgeId(e as u32));
        'next: for c in 0..3 {
            for w in [u, v] {
                for dt in g.darts_at(w) {
                    let o = dt.edge.0 as usize;
                    if o != e && colors[o] == c {
                        continue 'next;
                    }
                }
            }
            colors[e] = c;
            if rec(g, colors, e + 1) {
                return true;
            }
            colors[e] = usize::MAX;
        }
        false
    }
    rec(g, &mut colors, 0)
}

// ---------------------------------------------------------------------------
// List-coloring construction
// ---------------------------------------------------------------------------

/// A planar list-coloring instance: an embedded graph plus color lists.
#[derive(Debug, Clone)]
pub struct ListColoringInstance {
    pub g: MultiGraph,
    pub rotation: RotationSystem,
    pub lists: Vec<Vec<u32>>,
}

impl ListColoringInstance {
    pub fn shared(&self, e: EdgeId) -> Vec<u32> {
        let (u, v) = self.g.endpoints(e);
        let lu: BTreeSet<u32> = self.lists[u.0 as usize].iter().copied().collect();
        self.lists[v.0 as usize]
            .iter()
            .copied()
            .filter(|c| lu.contains(c))
            .collect()
    }
}

/// Brute-force proper list coloring.
pub fn list_colorable(inst: &ListColoringInstance) -> bool {
    let n = inst.g.n_vertices();
    let mut chosen = vec![u32::MAX; n];
    fn rec(inst: &ListColoringInstance, chosen: &mut Vec<u32>, v: usize) -> bool {
        if v == inst.g.n_vertices() {
            return true;
        }
        'next: for &c in &inst.lists[v] {
            for dt in inst.g.darts_at(VertexId(v as u32)) {
                let w = inst.g.other_endpoint(dt.edge, VertexId(v as u32));
                if (w.0 as usize) < v || chosen[w.0 as usize] != u32::MAX {
                    if chosen[w.0 as usize] == c {
                        continue 'next;
                    }
                }
            }
            chosen[v] = c;
            if rec(inst, chosen, v + 1) {
                return true;
            }
            chosen[v] = u32::MAX;
        }
        false
    }
    rec(inst, &mut chosen, 0)
}

/// List-coloring instance: every edge becomes one labeled tuple of strands
/// per shared color (3 strands each, 6 in the P-node-only variant; one
/// unlabeled tuple when no color is shared), every vertex gets one tree per
/// list color. Matching colors at both ends force a crossing via twisted
/// Q-orders (crossed P-pairings in the P-only variant).
pub fn gen_listcol(inst: &ListColoringInstance, p_only: bool) -> Result<ChoosableGraph, GenError> {
    if !inst.rotation.covers(&inst.g) {
        return Err(GenError::NotPlanar);
    }
    if !is_planar_rotation(&inst.g, &inst.rotation).map_err(|_| GenError::NotPlanar)? {
        return Err(GenError::NotPlanar);
    }
    let g = &inst.g;
    let strands = if p_only { 6 } else { 3 };
    let mut rg = MultiGraph::empty();
    for v in g.vertices() {
        rg.ensure_vertex(g.vertex_name(v));
    }
    // Strand edges per (edge, tuple index, strand index).
    let mut strand_id: BTreeMap<(EdgeId, usize, usize), EdgeId> = BTreeMap::new();
    let mut tuples: BTreeMap<EdgeId, Vec<Option<u32>>> = BTreeMap::new();
    for e in g.edges() {
        let shared = inst.shared(e);
        let labels: Vec<Option<u32>> = if shared.is_empty() {
            vec![None]
        } else {
            shared.iter().map(|&c| Some(c)).collect()
        };
        let (u, v) = g.endpoints(e);
        for (t, _) in labels.iter().enumerate() {
            for s in 0..strands {
                let name = format!("{}t{}s{}", g.edge_name(e), t, s);
                let id = rg
                    .add_edge(&name, g.vertex_name(u), g.vertex_name(v))
                    .unwrap();
                strand_id.insert((e, t, s), id);
            }
        }
        tuples.insert(e, labels);
    }
    // Rotation: bundles expand in place; at the second endpoint the whole
    // bundle reverses (ribbon mirror).
    let mut rot: Vec<Vec<Dart>> = vec![Vec::new(); rg.n_vertices()];
    for v in g.vertices() {
        let mut out = Vec::new();
        for dt in &inst.rotation.order[v.0 as usize] {
            let e = dt.edge;
            let k = tuples[&e].len();
            let mut expanded: Vec<EdgeId> = Vec::new();
            for t in 0..k {
                for s in 0..strands {
                    expanded.push(strand_id[&(e, t, s)]);
                }
            }
            if dt.end == 1 {
                expanded.reverse();
            }
            for id in expanded {
                let (a, _) = rg.endpoints(id);
                out.push(Dart::new(id, if a == VertexId(v.0) { 0 } else { 1 }));
            }
        }
        rot[v.0 as usize] = out;
    }
    let rho = RotationSystem::new(rot);
    if !is_planar_rotation(&rg, &rho).map_err(|_| GenError::NotPlanar)? {
        return Err(GenError::NotPlanar);
    }

    // Trees: per vertex, one per list color.
    let mut d: Vec<Vec<FpqTree>> = vec![Vec::new(); rg.n_vertices()];
    for v in g.vertices() {
        let mut trees = Vec::new();
        for &color in &inst.lists[v.0 as usize] {
            let mut b = TreeBuilder::new();
            let mut tops = Vec::new();
            for dt in g.darts_at(v) {
                let e = dt.edge;
                // The first endpoint of the edge is the designated (twisted)
                // side.
                let designated = dt.end == 0;
                for (t, label) in tuples[&e].iter().enumerate() {
                    let matches = *label == Some(color);
                    let leaf =
                        |b: &mut TreeBuilder, s: usize| b.leaf(LeafId(strand_id[&(e, t, s)].0));
                    let node = if !p_only {
                        if matches {
                            let ord: [usize; 3] = if designated { [0, 2, 1] } else { [0, 1, 2] };
                            let leaves: Vec<usize> = ord.iter().map(|&s| leaf(&mut b, s)).collect();
                            b.inner(NodeKind::Q, leaves)
                        } else {
                            let leaves: Vec<usize> = (0..3).map(|s| leaf(&mut b, s)).collect();
                            b.inner(NodeKind::P, leaves)
                        }
                    } else if matches {
                        // Straight pairing at one endpoint, crossed at the
                        // other: two distinct perfect matchings can never be
                        // adjacent in one linear strand order.
                        let pairs: [[usize; 2]; 3] = if designated {
                            [[4, 1], [2, 5], [0, 3]]
                        } else {
                            [[0, 1], [2, 3], [4, 5]]
                        };
                        let ps: Vec<usize> = pairs
                            .iter()
                            .map(|pr| {
                                let l1 = leaf(&mut b, pr[0]);
                                let l2 = leaf(&mut b, pr[1]);
                                b.inner(NodeKind::P, vec![l1, l2])
                            })
                            .collect();
                        b.inner(NodeKind::P, ps)
                    } else {
                        // Tuples of other colors stay free, like the P-node
                        // of the standard variant.
                        let leaves: Vec<usize> = (0..6).map(|s| leaf(&mut b, s)).collect();
                        b.inner(NodeKind::P, leaves)
                    };
                    tops.push(node);
                }
            }
            let root = if tops.len() == 1 {
                tops[0]
            } else {
                b.inner(NodeKind::P, tops)
            };
            trees.push(b.finish(root).canonicalized());
        }
        d[v.0 as usize] = trees;
    }
    Ok(ChoosableGraph::new(rg, d)?)
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// K4 with a planar rotation and no crossings.
pub fn k4_drawing() -> DrawnCubicGraph {
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
    let rho = crate::planar::embed_biconnected_simple(&g).expect("K4 is planar");
    DrawnCubicGraph {
        g,
        rotation: rho,
        crossings: Vec::new(),
    }
}

/// The Petersen graph in its standard drawing: outer 5-cycle, spokes, inner
/// pentagram whose five star edges cross pairwise (5 crossings). Rotations
/// and crossing ranks follow the regular-pentagon geometry.
pub fn petersen_drawing() -> DrawnCubicGraph {
    let mut g = MultiGraph::empty();
    // Outer cycle o0..o4, inner star i0..i4, spokes.
    for k in 0..5 {
        g.add_edge(
            &format!("c{}", k),
            &format!("o{}", k),
            &format!("o{}", (k + 1) % 5),
        )
        .unwrap();
    }
    for k in 0..5 {
        g.add_edge(&format!("s{}", k), &format!("o{}", k), &format!("i{}", k))
            .unwrap();
    }
    for k in 0..5 {
        g.add_edge(
            &format!("t{}", k),
            &format!("i{}", k),
            &format!("i{}", (k + 2) % 5),
        )
        .unwrap();
    }
    // Rotations (counterclockwise by pentagon geometry).
    let mut rot: Vec<Vec<Dart>> = vec![Vec::new(); g.n_vertices()];
    let dart = |g: &MultiGraph, name: &str, vname: &str| -> Dart {
        let e = g.edge_by_name(name).unwrap();
        let (a, _) = g.endpoints(e);
        Dart::new(e, if g.vertex_name(a) == vname { 0 } else { 1 })
    };
    for k in 0..5 {
        let vname = format!("o{}", k);
        let v = g.vertex_by_name(&vname).unwrap();
        // (to next outer, spoke, to previous outer) counterclockwise.
        rot[v.0 as usize] = vec![
            dart(&g, &format!("c{}", k), &vname),
            dart(&g, &format!("s{}", k), &vname),
            dart(&g, &format!("c{}", (k + 4) % 5), &vname),
        ];
    }
    for k in 0..5 {
        let vname = format!("i{}", k);
        let v = g.vertex_by_name(&vname).unwrap();
        // (spoke, star to k+2, star from k-2) counterclockwise.
        rot[v.0 as usize] = vec![
            dart(&g, &format!("s{}", k), &vname),
            dart(&g, &format!("t{}", k), &vname),
            dart(&g, &format!("t{}", (k + 3) % 5), &vname),
        ];
    }
    // Crossings: star edge t_k crosses t_{k+4} (rank 1 from i_k) then
    // t_{k+1} (rank 2), by the pentagon chord geometry.
    let mut crossings = Vec::new();
    for k in 0..5 {
        // Record each crossing once: t_k x t_{k+1}: along t_k it is the 2nd
        // crossing, along t_{k+1} the 1st.
        let e1 = g.edge_by_name(&format!("t{}", k)).unwrap();
        let e2 = g.edge_by_name(&format!("t{}", (k + 1) % 5)).unwrap();
        crossings.push((e1, e2, 2, 1));
    }
    DrawnCubicGraph {
        g,
        rotation: RotationSystem::new(rot),
        crossings,
    }
}

/// Test-support: prints the genus of every handedness vector.
pub fn debug_planarize(dg: &DrawnCubicGraph) {
    let along = {
        let mut m: BTreeMap<EdgeId, Vec<(usize, usize)>> = BTreeMap::new();
        for (ci, &(e1, e2, r1, r2)) in dg.crossings.iter().enumerate() {
            m.entry(e1).or_default().push((r1, ci));
            m.entry(e2).or_default().push((r2, ci));
        }
        for list in m.values_mut() {
            list.sort_unstable();
        }
        m
    };
    let n_cross = dg.crossings.len();
    let g = &dg.g;
    for signs in 0u32..(1u32 << n_cross) {
        let mut pg = MultiGraph::empty();
        for v in g.vertices() {
            pg.ensure_vertex(g.vertex_name(v));
        }
        for ci in 0..n_cross {
            pg.ensure_vertex(&format!("__x{}", ci));
        }
        let mut segments: BTreeMap<EdgeId, Vec<EdgeId>> = BTreeMap::new();
        for e in g.edges() {
            let (a, b) = g.endpoints(e);
            let mut chain_vertices = vec![g.vertex_name(a).to_string()];
            if let Some(list) = along.get(&e) {
                for &(_, ci) in list {
                    chain_vertices.push(format!("__x{}", ci));
                }
            }
            chain_vertices.push(g.vertex_name(b).to_string());
            let mut chain = Vec::new();
            for (k, w) in chain_vertices.windows(2).enumerate() {
                let name = format!("{}_{}", g.edge_name(e), k);
                chain.push(pg.add_edge(&name, &w[0], &w[1]).unwrap());
            }
            segments.insert(e, chain);
        }
        let mut rot: Vec<Vec<Dart>> = vec![Vec::new(); pg.n_vertices()];
        for v in g.vertices() {
            let ring = &dg.rotation.order[v.0 as usize];
            let mut out = Vec::new();
            for d in ring {
                let chain = &segments[&d.edge];
                let seg = if d.end == 0 {
                    chain[0]
                } else {
                    *chain.last().unwrap()
                };
                let (a, _) = pg.endpoints(seg);
                out.push(Dart::new(
                    seg,
                    if pg.vertex_name(a) == g.vertex_name(g.dart_vertex(*d)) {
                        0
                    } else {
                        1
                    },
                ));
            }
            let pv = pg.vertex_by_name(g.vertex_name(v)).unwrap();
            rot[pv.0 as usize] = out;
        }
        for (ci, &(e1, e2, _, _)) in dg.crossings.iter().enumerate() {
            let xv = pg.vertex_by_name(&format!("__x{}", ci)).unwrap();
            let seg_pair = |e: EdgeId| -> (Dart, Dart) {
                let list = &along[&e];
                let pos = list.iter().position(|&(_, c)| c == ci).unwrap();
                let chain = &segments[&e];
                (Dart::new(chain[pos], 1), Dart::new(chain[pos + 1], 0))
            };
            let (e1_in, e1_out) = seg_pair(e1);
            let (e2_in, e2_out) = seg_pair(e2);
            let flipped = signs >> ci & 1 == 1;
            rot[xv.0 as usize] = if flipped {
                vec![e1_in, e2_out, e1_out, e2_in]
            } else {
                vec![e1_in, e2_in, e1_out, e2_out]
            };
        }
        let rho = RotationSystem::new(rot);
        if !rho.covers(&pg) {
            println!("signs {:05b}: rotation does not cover!", signs);
            continue;
        }
        let genus = crate::graph::rotation_genus(&pg, &rho).unwrap();
        println!("signs {:05b}: genus {}", signs, genus);
    }
}
