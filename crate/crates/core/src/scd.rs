//! Branch decompositions of embedded planar skeletons (sphere-cut style):
//! a rooted binary tree over the skeleton's child edges whose middle sets
//! drive the R-node dynamic program. Construction is a greedy adjacent-merge
//! heuristic with an exhaustive fallback for small skeletons; width affects
//! running time only, never correctness.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::VertexId;

#[derive(Debug, Clone)]
pub struct ScdNode {
    pub children: Option<(usize, usize)>,
    /// Indices into the decomposed edge list.
    pub edges: BTreeSet<usize>,
    /// Middle set: vertices shared with the other side (the edges outside
    /// this cluster, including the permanent outside edges).
    pub boundary: BTreeSet<VertexId>,
}

#[derive(Debug, Clone)]
pub struct SphereCutTree {
    pub nodes: Vec<ScdNode>,
    pub root: usize,
}

impl SphereCutTree {
    pub fn width(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.boundary.len())
            .max()
            .unwrap_or(0)
    }

    pub fn postorder(&self) -> Vec<usize> {
        fn rec(t: &SphereCutTree, i: usize, out: &mut Vec<usize>) {
            if let Some((a, b)) = t.nodes[i].children {
                rec(t, a, out);
                rec(t, b, out);
            }
            out.push(i);
        }
        let mut out = Vec::new();
        rec(self, self.root, &mut out);
        out
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            s.push_str(&format!(
                "node {}: edges {:?} boundary {:?} children {:?}\n",
                i, n.edges, n.boundary, n.children
            ));
        }
        s.push_str(&format!("root {} width {}\n", self.root, self.width()));
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScdOptions {
    /// Widths above this trigger the exhaustive fallback (when feasible).
    pub width_cap: usize,
    /// Maximum number of edges for the exhaustive subset DP.
    pub exhaustive_edge_limit: usize,
}

impl Default for ScdOptions {
    fn default() -> Self {
        ScdOptions {
            width_cap: 5,
            exhaustive_edge_limit: 10,
        }
    }
}

fn boundary_of(
    cluster: &BTreeSet<usize>,
    edges: &[(VertexId, VertexId)],
    outside: &[(VertexId, VertexId)],
) -> BTreeSet<VertexId> {
    let mut inside: BTreeSet<VertexId> = BTreeSet::new();
    for &i in cluster {
        inside.insert(edges[i].0);
        inside.insert(edges[i].1);
    }
    let mut other: BTreeSet<VertexId> = BTreeSet::new();
    for (i, &(a, b)) in edges.iter().enumerate() {
        if !cluster.contains(&i) {
            other.insert(a);
            other.insert(b);
        }
    }
    for &(a, b) in outside {
        other.insert(a);
        other.insert(b);
    }
    inside.intersection(&other).copied().collect()
}

/// Greedy decomposition: merge the adjacent cluster pair minimizing the
/// resulting boundary, preferring merges whose middle set lies on a noose
/// of the embedding. Returns the tree and whether every merge was
/// noose-valid.
fn greedy(
    edges: &[(VertexId, VertexId)],
    outside: &[(VertexId, VertexId)],
    faces: &[Vec<VertexId>],
) -> (SphereCutTree, bool) {
    let m = edges.len();
    let mut nodes: Vec<ScdNode> = (0..m)
        .map(|i| {
            let set: BTreeSet<usize> = [i].into();
            let boundary = boundary_of(&set, edges, outside);
            ScdNode {
                children: None,
                edges: set,
                boundary,
            }
        })
        .collect();
    let mut active: Vec<usize> = (0..m).collect();
    let mut all_nooses = true;
    while active.len() > 1 {
        // (noose-invalid, bsize, total, ai, bi): valid nooses win first.
        let mut best: Option<(bool, usize, usize, usize, usize)> = None;
        for ai in 0..active.len() {
            for bi in (ai + 1)..active.len() {
                let a = active[ai];
                let b = active[bi];
                let adjacent = nodes[a]
                    .boundary
                    .intersection(&nodes[b].boundary)
                    .next()
                    .is_some();
                if !adjacent && active.len() > 2 {
                    continue;
                }
                let merged: BTreeSet<usize> =
                    nodes[a].edges.union(&nodes[b].edges).copied().collect();
                let bd = boundary_of(&merged, edges, outside);
                let bad = !noose_exists(&bd, faces);
                let cand = (bad, bd.len(), merged.len(), ai, bi);
                if best.map(|b0| cand < b0).unwrap_or(true) {
                    best = Some(cand);
                }
            }
        }
        let (bad, _, _, ai, bi) = best.expect("connected skeleton always has adjacent clusters");
        all_nooses &= !bad;
        let (a, b) = (active[ai], active[bi]);
        let merged: BTreeSet<usize> = nodes[a].edges.union(&nodes[b].edges).copied().collect();
        let boundary = boundary_of(&merged, edges, outside);
        nodes.push(ScdNode {
            children: Some((a, b)),
            edges: merged,
            boundary,
        });
        let ni = nodes.len() - 1;
        active.remove(bi);
        active.remove(ai);
        active.push(ni);
    }
    let root = active[0];
    (SphereCutTree { nodes, root }, all_nooses)
}

/// Exhaustive minimum-width sphere-cut decomposition by subset DP
/// (<= ~10 edges); clusters without a noose-valid middle set are excluded.
fn exhaustive(
    edges: &[(VertexId, VertexId)],
    outside: &[(VertexId, VertexId)],
    faces: &[Vec<VertexId>],
) -> Option<SphereCutTree> {
    let m = edges.len();
    debug_assert!(m >= 1 && m <= 16);
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let bset = |mask: u32| -> BTreeSet<usize> { (0..m).filter(|&i| mask >> i & 1 == 1).collect() };
    let mut bsize = vec![0usize; (full as usize) + 1];
    let mut noosable = vec![false; (full as usize) + 1];
    for mask in 1..=full {
        let bd = boundary_of(&bset(mask), edges, outside);
        bsize[mask as usize] = bd.len();
        noosable[mask as usize] = noose_exists(&bd, faces);
    }
    // best[mask] = minimal width of a decomposition of the cluster `mask`.
    let mut best = vec![usize::MAX; (full as usize) + 1];
    let mut split = vec![0u32; (full as usize) + 1];
    for mask in 1..=full {
        if !noosable[mask as usize] {
            continue;
        }
        if mask.count_ones() == 1 {
            best[mask as usize] = bsize[mask as usize];
            continue;
        }
        // Iterate proper submasks; fix the lowest bit in one side to halve.
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        let mut best_here = usize::MAX;
        let mut best_split = 0u32;
        loop {
            let s1 = sub | low;
            let s2 = mask ^ s1;
            if s2 != 0 && best[s1 as usize] != usize::MAX && best[s2 as usize] != usize::MAX {
                let w = best[s1 as usize].max(best[s2 as usize]);
                if w < best_here {
                    best_here = w;
                    best_split = s1;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        if best_here != usize::MAX {
            best[mask as usize] = best_here.max(bsize[mask as usize]);
            split[mask as usize] = best_split;
        }
    }
    if best[full as usize] == usize::MAX {
        return None;
    }
    // Reconstruct.
    let mut nodes = Vec::new();
    fn build(
        mask: u32,
        split: &[u32],
        bset: &dyn Fn(u32) -> BTreeSet<usize>,
        edges: &[(VertexId, VertexId)],
        outside: &[(VertexId, VertexId)],
        nodes: &mut Vec<ScdNode>,
    ) -> usize {
        let set = bset(mask);
        let boundary = boundary_of(&set, edges, outside);
        if mask.count_ones() == 1 {
            nodes.push(ScdNode {
                children: None,
                edges: set,
                boundary,
            });
            return nodes.len() - 1;
        }
        let s1 = split[mask as usize];
        let s2 = mask ^ s1;
        let a = build(s1, split, bset, edges, outside, nodes);
        let b = build(s2, split, bset, edges, outside, nodes);
        nodes.push(ScdNode {
            children: Some((a, b)),
            edges: set,
            boundary,
        });
        nodes.len() - 1
    }
    let root = build(full, &split, &bset, edges, outside, &mut nodes);
    Some(SphereCutTree { nodes, root })
}

/// Decomposes the child edges of an embedded skeleton. `outside` lists the
/// permanently-external edges (the parent virtual edge), so the root middle
/// set is the pole pair; `faces` are the vertex walks of the embedding,
/// used to keep middle sets on nooses. Returns warnings when the width
/// exceeds the cap, or when no fully noose-valid decomposition was in reach
/// (the tables stay correct either way, only their size bound weakens).
pub fn scd_decompose(
    edges: &[(VertexId, VertexId)],
    outside: &[(VertexId, VertexId)],
    faces: &[Vec<VertexId>],
    opts: ScdOptions,
) -> (SphereCutTree, Vec<String>) {
    debug_assert!(!edges.is_empty());
    let mut warnings = Vec::new();
    let (mut t, mut nooses_ok) = greedy(edges, outside, faces);
    if (t.width() > opts.width_cap || !nooses_ok) && edges.len() <= opts.exhaustive_edge_limit {
        if let Some(e) = exhaustive(edges, outside, faces) {
            if !nooses_ok || e.width() < t.width() {
                t = e;
                nooses_ok = true;
            }
        }
    }
    if !nooses_ok {
        warnings.push(
            "no noose-valid branch decomposition found; proceeding with a plain one".to_string(),
        );
    }
    if t.width() > opts.width_cap {
        warnings.push(format!(
            "branch decomposition width {} exceeds cap {}; proceeding (slower tables, correctness unaffected)",
            t.width(),
            opts.width_cap
        ));
    }
    (t, warnings)
}

/// Validity: every middle set separates its cluster from the rest. (Noose
/// structure is checked separately against the embedding faces.)
pub fn separates(
    t: &SphereCutTree,
    edges: &[(VertexId, VertexId)],
    outside: &[(VertexId, VertexId)],
) -> bool {
    for n in &t.nodes {
        let b = &n.boundary;
        // Inside vertices not on the boundary must not touch outside edges.
        let mut inside: BTreeSet<VertexId> = BTreeSet::new();
        for &i in &n.edges {
            inside.insert(edges[i].0);
            inside.insert(edges[i].1);
        }
        for (i, &(x, y)) in edges.iter().enumerate() {
            if n.edges.contains(&i) {
                continue;
            }
            for v in [x, y] {
                if inside.contains(&v) && !b.contains(&v) {
                    return false;
                }
            }
        }
        for &(x, y) in outside {
            for v in [x, y] {
                if inside.contains(&v) && !b.contains(&v) {
                    return false;
                }
            }
        }
    }
    true
}

/// Whether the middle set lies on a closed noose of the embedding: the
/// face-sharing graph over the boundary vertices must admit a Hamiltonian
/// cycle. `faces` are the vertex walks of the embedded skeleton.
pub fn noose_exists(boundary: &BTreeSet<VertexId>, faces: &[Vec<VertexId>]) -> bool {
    let b: Vec<VertexId> = boundary.iter().copied().collect();
    let k = b.len();
    if k <= 2 {
        return true;
    }
    let share: BTreeMap<(usize, usize), bool> = {
        let mut m = BTreeMap::new();
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let ok = faces.iter().any(|f| f.contains(&b[i]) && f.contains(&b[j]));
                m.insert((i, j), ok);
            }
        }
        m
    };
    // Hamiltonian cycle by backtracking (k is small).
    fn rec(
        pos: usize,
        used: &mut Vec<bool>,
        path: &mut Vec<usize>,
        k: usize,
        share: &BTreeMap<(usize, usize), bool>,
    ) -> bool {
        if pos == k {
            return share[&(path[k - 1], path[0])];
        }
        for cand in 1..k {
            if !used[cand] && share[&(path[pos - 1], cand)] {
                used[cand] = true;
                path.push(cand);
                if rec(pos + 1, used, path, k, share) {
                    return true;
                }
                path.pop();
                used[cand] = false;
            }
        }
        false
    }
    let mut used = vec![false; k];
    used[0] = true;
    rec(1, &mut used, &mut vec![0], k, &share)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Dart, MultiGraph, RotationSystem};

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    /// Faces of the full skeleton (edges + outside), from an embedding.
    fn faces_of(
        edges: &[(VertexId, VertexId)],
        outside: &[(VertexId, VertexId)],
    ) -> Vec<Vec<VertexId>> {
        let mut g = MultiGraph::empty();
        let mut seen_pair: std::collections::BTreeSet<(u32, u32)> = Default::default();
        let mut aux = 0;
        for (k, &(a, b)) in edges.iter().chain(outside.iter()).enumerate() {
            let key = (a.0.min(b.0), a.0.max(b.0));
            if seen_pair.insert(key) {
                g.add_edge(
                    &format!("s{}", k),
                    &format!("v{}", a.0),
                    &format!("v{}", b.0),
                )
                .unwrap();
            } else {
                // Subdivide parallels so the embedder sees a simple graph.
                let mid = format!("aux{}", aux);
                aux += 1;
                g.add_edge(&format!("s{}x", k), &format!("v{}", a.0), &mid)
                    .unwrap();
                g.add_edge(&format!("s{}y", k), &mid, &format!("v{}", b.0))
                    .unwrap();
            }
        }
        let rho = crate::planar::embed_biconnected_simple(&g).expect("planar test skeleton");
        let mut faces = Vec::new();
        let mut seen: std::collections::BTreeSet<Dart> = Default::default();
        for e in g.edges() {
            for end in 0..2u8 {
                let start = Dart::new(e, end);
                if seen.contains(&start) {
                    continue;
                }
                let mut face = Vec::new();
                let mut d = start;
                loop {
                    seen.insert(d);
                    let tail = g.dart_vertex(d);
                    if let Some(rest) = g.vertex_name(tail).strip_prefix('v') {
                        face.push(VertexId(rest.parse::<u32>().unwrap()));
                    }
                    let tw = d.twin();
                    let tv = g.dart_vertex(tw);
                    let ring: &Vec<Dart> = &rho.order[tv.0 as usize];
                    let pos = ring.iter().position(|&x| x == tw).unwrap();
                    d = ring[(pos + 1) % ring.len()];
                    if d == start {
                        break;
                    }
                }
                faces.push(face);
            }
        }
        let _ = RotationSystem::new(Vec::new());
        faces
    }

    #[test]
    fn triangle_width_two() {
        // Skeleton triangle u-x-v with parent virt (u,v).
        let edges = vec![(v(0), v(1)), (v(1), v(2)), (v(0), v(2))];
        let outside = vec![(v(0), v(2))];
        let (t, warn) = scd_decompose(
            &edges,
            &outside,
            &faces_of(&edges, &outside),
            ScdOptions::default(),
        );
        assert!(warn.is_empty());
        assert_eq!(t.width(), 2);
        assert!(separates(&t, &edges, &outside));
        assert_eq!(t.nodes[t.root].boundary, [v(0), v(2)].into());
    }

    #[test]
    fn four_cycle_width_two() {
        let edges = vec![(v(0), v(1)), (v(1), v(2)), (v(2), v(3)), (v(3), v(0))];
        let outside = vec![(v(0), v(2))];
        let (t, _) = scd_decompose(
            &edges,
            &outside,
            &faces_of(&edges, &outside),
            ScdOptions::default(),
        );
        assert!(
            t.width() <= 2,
            "4-cycle decomposes with width 2, got {}",
            t.width()
        );
        assert!(separates(&t, &edges, &outside));
    }

    #[test]
    fn k4_width_three() {
        // K4 as an R-skeleton: poles (0,1), parent virt outside.
        let edges = vec![
            (v(0), v(2)),
            (v(0), v(3)),
            (v(1), v(2)),
            (v(1), v(3)),
            (v(2), v(3)),
        ];
        let outside = vec![(v(0), v(1))];
        let (t, _) = scd_decompose(
            &edges,
            &outside,
            &faces_of(&edges, &outside),
            ScdOptions::default(),
        );
        assert!(t.width() <= 3, "K4 width is 3, got {}", t.width());
        assert!(separates(&t, &edges, &outside));
        assert_eq!(t.nodes[t.root].boundary, [v(0), v(1)].into());
        // Exhaustive on this size agrees or improves.
        let e = exhaustive(&edges, &outside, &faces_of(&edges, &outside)).unwrap();
        assert!(e.width() <= t.width());
        assert!(separates(&e, &edges, &outside));
    }

    #[test]
    fn decomposition_edges_partition() {
        let edges = vec![
            (v(0), v(2)),
            (v(0), v(3)),
            (v(1), v(2)),
            (v(1), v(3)),
            (v(2), v(3)),
        ];
        let outside = vec![(v(0), v(1))];
        let (t, _) = scd_decompose(
            &edges,
            &outside,
            &faces_of(&edges, &outside),
            ScdOptions::default(),
        );
        for i in t.postorder() {
            if let Some((a, b)) = t.nodes[i].children {
                let mut u: BTreeSet<usize> =
                    t.nodes[a].edges.union(&t.nodes[b].edges).copied().collect();
                assert_eq!(u, t.nodes[i].edges);
                u.clear();
                assert!(t.nodes[a].edges.is_disjoint(&t.nodes[b].edges));
            }
        }
        assert_eq!(t.nodes[t.root].edges.len(), edges.len());
    }
}
