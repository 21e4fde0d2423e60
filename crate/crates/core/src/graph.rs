//! Multigraphs, rotation systems and Euler-formula planarity of a fixed
//! rotation system. Vertices and edges are referred to by the string names
//! used in instance files; internally everything is index-based.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// One end of an edge. `end` is 0 at the first endpoint, 1 at the second, so
/// parallel edges stay distinguishable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dart {
    pub edge: EdgeId,
    pub end: u8,
}

impl Dart {
    pub fn new(edge: EdgeId, end: u8) -> Self {
        Dart { edge, end }
    }

    /// The other end of the same edge.
    pub fn twin(self) -> Self {
        Dart {
            edge: self.edge,
            end: 1 - self.end,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate edge id {0}")]
    DuplicateEdge(String),
    #[error("self-loop on vertex {0}")]
    SelfLoop(String),
    #[error("edge endpoint {0} is not a declared vertex")]
    DanglingEndpoint(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("rotation system does not cover the graph")]
    RotationMismatch,
    #[error("graph is empty")]
    Empty,
}

/// A multigraph: parallel edges allowed, self-loops rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiGraph {
    vertex_names: Vec<String>,
    edge_names: Vec<String>,
    endpoints: Vec<(VertexId, VertexId)>,
    incidence: Vec<Vec<Dart>>,
    name_to_vertex: HashMap<String, VertexId>,
    name_to_edge: HashMap<String, EdgeId>,
}

impl MultiGraph {
    /// Builds a multigraph from named vertices and `(edge, u, v)` records.
    /// Vertices mentioned only by edges are created implicitly.
    pub fn build(vertices: &[&str], edge_list: &[(&str, &str, &str)]) -> Result<Self, GraphError> {
        let mut g = MultiGraph {
            vertex_names: Vec::new(),
            edge_names: Vec::new(),
            endpoints: Vec::new(),
            incidence: Vec::new(),
            name_to_vertex: HashMap::new(),
            name_to_edge: HashMap::new(),
        };
        for v in vertices {
            g.ensure_vertex(v);
        }
        for (e, u, v) in edge_list {
            g.add_edge(e, u, v)?;
        }
        Ok(g)
    }

    pub fn empty() -> Self {
        MultiGraph::build(&[], &[]).unwrap()
    }

    pub fn ensure_vertex(&mut self, name: &str) -> VertexId {
        if let Some(&v) = self.name_to_vertex.get(name) {
            return v;
        }
        let id = VertexId(self.vertex_names.len() as u32);
        self.vertex_names.push(name.to_string());
        self.incidence.push(Vec::new());
        self.name_to_vertex.insert(name.to_string(), id);
        id
    }

    pub fn add_edge(&mut self, name: &str, u: &str, v: &str) -> Result<EdgeId, GraphError> {
        if self.name_to_edge.contains_key(name) {
            return Err(GraphError::DuplicateEdge(name.to_string()));
        }
        if u == v {
            return Err(GraphError::SelfLoop(u.to_string()));
        }
        let ui = self.ensure_vertex(u);
        let vi = self.ensure_vertex(v);
        let id = EdgeId(self.edge_names.len() as u32);
        self.edge_names.push(name.to_string());
        self.endpoints.push((ui, vi));
        self.incidence[ui.0 as usize].push(Dart::new(id, 0));
        self.incidence[vi.0 as usize].push(Dart::new(id, 1));
        self.name_to_edge.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_names.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_names.len() as u32).map(VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edge_names.len() as u32).map(EdgeId)
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.endpoints[e.0 as usize]
    }

    /// The vertex this dart is attached to.
    pub fn dart_vertex(&self, d: Dart) -> VertexId {
        let (u, v) = self.endpoints(d.edge);
        if d.end == 0 {
            u
        } else {
            v
        }
    }

    pub fn other_endpoint(&self, e: EdgeId, v: VertexId) -> VertexId {
        let (a, b) = self.endpoints(e);
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn darts_at(&self, v: VertexId) -> &[Dart] {
        &self.incidence[v.0 as usize]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v.0 as usize].len()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.0 as usize]
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edge_names[e.0 as usize]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.name_to_vertex.get(name).copied()
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.name_to_edge.get(name).copied()
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices() == 0 {
            return false;
        }
        let mut seen = vec![false; self.n_vertices()];
        let mut stack = vec![VertexId(0)];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for d in self.darts_at(v) {
                let w = self.other_endpoint(d.edge, v);
                if !seen[w.0 as usize] {
                    seen[w.0 as usize] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// True iff the graph is connected and has no cut vertex. A two-vertex
    /// multigraph with at least one edge qualifies; parallel edges to the
    /// DFS parent count as back edges.
    pub fn is_biconnected(&self) -> bool {
        let n = self.n_vertices();
        if n == 0 {
            return false;
        }
        if n == 1 {
            return true;
        }
        if !self.is_connected() {
            return false;
        }
        // Iterative lowpoint DFS, skipping only the tree edge itself.
        let mut disc = vec![0usize; n];
        let mut low = vec![0usize; n];
        let mut parent_edge = vec![None::<EdgeId>; n];
        let mut timer = 1;
        let mut root_children = 0;
        let mut has_cut = false;
        let mut stack: Vec<(VertexId, usize)> = vec![(VertexId(0), 0)];
        disc[0] = 1;
        low[0] = 1;
        timer += 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let darts = self.darts_at(v);
            if *i < darts.len() {
                let d = darts[*i];
                *i += 1;
                if Some(d.edge) == parent_edge[v.0 as usize] {
                    continue;
                }
                let w = self.other_endpoint(d.edge, v);
                if disc[w.0 as usize] == 0 {
                    disc[w.0 as usize] = timer;
                    low[w.0 as usize] = timer;
                    timer += 1;
                    parent_edge[w.0 as usize] = Some(d.edge);
                    if v.0 == 0 {
                        root_children += 1;
                    }
                    stack.push((w, 0));
                } else {
                    low[v.0 as usize] = low[v.0 as usize].min(disc[w.0 as usize]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    low[p.0 as usize] = low[p.0 as usize].min(low[v.0 as usize]);
                    if p.0 != 0 && low[v.0 as usize] >= disc[p.0 as usize] {
                        has_cut = true;
                    }
                }
            }
        }
        !has_cut && root_children <= 1
    }
}

/// Per-vertex cyclic sequences of darts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationSystem {
    pub order: Vec<Vec<Dart>>,
}

impl RotationSystem {
    pub fn new(order: Vec<Vec<Dart>>) -> Self {
        RotationSystem { order }
    }

    /// Checks that for each vertex the cyclic sequence is a permutation of
    /// exactly that vertex's darts.
    pub fn covers(&self, g: &MultiGraph) -> bool {
        if self.order.len() != g.n_vertices() {
            return false;
        }
        for v in g.vertices() {
            let mut mine: Vec<Dart> = self.order[v.0 as usize].clone();
            let mut expect: Vec<Dart> = g.darts_at(v).to_vec();
            mine.sort();
            expect.sort();
            if mine != expect {
                return false;
            }
        }
        true
    }

    fn successor(&self, g: &MultiGraph, d: Dart) -> Dart {
        let v = g.dart_vertex(d);
        let ring = &self.order[v.0 as usize];
        let pos = ring.iter().position(|&x| x == d).expect("dart in rotation");
        ring[(pos + 1) % ring.len()]
    }

    /// Mirror image: every vertex rotation reversed.
    pub fn reflected(&self) -> RotationSystem {
        RotationSystem {
            order: self
                .order
                .iter()
                .map(|ring| ring.iter().rev().copied().collect())
                .collect(),
        }
    }
}

/// Number of orbits of the face-tracing permutation: the next dart of a face
/// is the rotation successor of the twin dart.
pub fn trace_faces(g: &MultiGraph, rho: &RotationSystem) -> Result<usize, GraphError> {
    if g.n_vertices() == 0 {
        return Err(GraphError::Empty);
    }
    if !g.is_connected() {
        return Err(GraphError::Disconnected);
    }
    if !rho.covers(g) {
        return Err(GraphError::RotationMismatch);
    }
    let mut seen: HashMap<Dart, bool> = HashMap::new();
    let mut faces = 0;
    for e in g.edges() {
        for end in 0..2u8 {
            let start = Dart::new(e, end);
            if seen.contains_key(&start) {
                continue;
            }
            faces += 1;
            let mut d = start;
            loop {
                let prev = seen.insert(d, true);
                debug_assert!(prev.is_none(), "dart visited twice during face trace");
                d = rho.successor(g, d.twin());
                if d == start {
                    break;
                }
            }
        }
    }
    if g.n_edges() == 0 {
        // A single vertex bounds one face.
        faces = 1;
    }
    Ok(faces)
}

/// Euler criterion for genus 0 with the given rotation system.
pub fn is_planar_rotation(g: &MultiGraph, rho: &RotationSystem) -> Result<bool, GraphError> {
    let f = trace_faces(g, rho)? as i64;
    let v = g.n_vertices() as i64;
    let e = g.n_edges() as i64;
    Ok(v - e + f == 2)
}

/// Genus of the rotation system: V - E + F = 2 - 2g.
pub fn rotation_genus(g: &MultiGraph, rho: &RotationSystem) -> Result<i64, GraphError> {
    let f = trace_faces(g, rho)? as i64;
    let v = g.n_vertices() as i64;
    let e = g.n_edges() as i64;
    Ok((2 - (v - e + f)) / 2)
}

/// All cyclic orders of a dart set, with the first dart pinned (so each
/// cyclic order appears exactly once).
pub fn cyclic_dart_orders(darts: &[Dart]) -> Vec<Vec<Dart>> {
    fn permute(items: &[Dart], acc: &mut Vec<Dart>, f: &mut impl FnMut(&[Dart])) {
        if acc.len() == items.len() {
            f(acc);
            return;
        }
        for &it in items {
            if !acc.contains(&it) {
                acc.push(it);
                permute(items, acc, f);
                acc.pop();
            }
        }
    }
    if darts.len() <= 2 {
        return vec![darts.to_vec()];
    }
    let first = darts[0];
    let rest: Vec<Dart> = darts[1..].to_vec();
    let mut out = Vec::new();
    permute(&rest, &mut Vec::new(), &mut |perm| {
        let mut ring = vec![first];
        ring.extend_from_slice(perm);
        out.push(ring);
    });
    out
}

/// Number of rotation systems of `g`: product of (deg-1)! over vertices.
pub fn rotation_system_count(g: &MultiGraph) -> u128 {
    let mut count: u128 = 1;
    for v in g.vertices() {
        let d = g.degree(v).max(1);
        for k in 2..d {
            count = count.saturating_mul(k as u128);
        }
    }
    count
}

/// Visits every rotation system of `g` lazily. Stops early and returns true
/// as soon as `f` returns true. `pin` optionally fixes the rotations of a
/// prefix of the vertices.
pub fn for_each_rotation_system(
    g: &MultiGraph,
    pin: &[Vec<Dart>],
    f: &mut impl FnMut(&RotationSystem) -> bool,
) -> bool {
    let per_vertex: Vec<Vec<Vec<Dart>>> = g
        .vertices()
        .map(|v| {
            if (v.0 as usize) < pin.len() {
                vec![pin[v.0 as usize].clone()]
            } else {
                cyclic_dart_orders(g.darts_at(v))
            }
        })
        .collect();
    let mut choice = vec![0usize; per_vertex.len()];
    let mut rho = RotationSystem::new(
        choice
            .iter()
            .enumerate()
            .map(|(v, &c)| per_vertex[v][c].clone())
            .collect(),
    );
    loop {
        if f(&rho) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return false;
            }
            choice[i] += 1;
            if choice[i] < per_vertex[i].len() {
                rho.order[i] = per_vertex[i][choice[i]].clone();
                break;
            }
            choice[i] = 0;
            rho.order[i] = per_vertex[i][0].clone();
            i += 1;
        }
    }
}

/// All rotation systems of `g`, materialized. Only for small graphs.
pub fn all_rotation_systems(g: &MultiGraph) -> Vec<RotationSystem> {
    let mut out = Vec::new();
    for_each_rotation_system(g, &[], &mut |rho| {
        out.push(rho.clone());
        false
    });
    out
}

/// Whether some rotation system of `g` is planar (exhaustive; callers cap
/// via `rotation_system_count`). `g` must be connected.
pub fn exists_planar_rotation(g: &MultiGraph) -> Result<bool, GraphError> {
    if !g.is_connected() {
        return Err(GraphError::Disconnected);
    }
    let mut err = None;
    let found = for_each_rotation_system(g, &[], &mut |rho| match is_planar_rotation(g, rho) {
        Ok(p) => p,
        Err(e) => {
            err = Some(e);
            true
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(found),
    }
}
