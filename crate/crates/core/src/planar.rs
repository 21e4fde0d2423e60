//! Planar embedding of biconnected simple graphs by incremental face
//! insertion, plus a block-decomposition planarity test for arbitrary
//! multigraphs. Outputs are validated against the Euler criterion.

use std::collections::{BTreeSet, HashMap};

use crate::graph::{is_planar_rotation, Dart, EdgeId, MultiGraph, RotationSystem, VertexId};

/// Planar embedding of a connected, biconnected, simple graph. Returns the
/// rotation system of one embedding, or None when the graph is not planar.
pub fn embed_biconnected_simple(g: &MultiGraph) -> Option<RotationSystem> {
    let n = g.n_vertices();
    let m = g.n_edges();
    if m <= 2 || n <= 2 {
        let rho = RotationSystem::new(g.vertices().map(|v| g.darts_at(v).to_vec()).collect());
        return Some(rho);
    }
    if m > 3 * n - 6 {
        return None;
    }
    // Adjacency by vertex pairs (simple graph).
    let mut edge_of: HashMap<(VertexId, VertexId), EdgeId> = HashMap::new();
    for e in g.edges() {
        let (u, v) = g.endpoints(e);
        if edge_of.insert((u, v), e).is_some() || edge_of.insert((v, u), e).is_some() {
            panic!("embed_biconnected_simple requires a simple graph");
        }
    }
    let neighbors = |v: VertexId| -> Vec<VertexId> {
        g.darts_at(v)
            .iter()
            .map(|d| g.other_endpoint(d.edge, v))
            .collect()
    };

    // Initial cycle by DFS.
    let cycle = {
        let mut parent: HashMap<VertexId, VertexId> = HashMap::new();
        let mut seen: BTreeSet<VertexId> = BTreeSet::new();
        let mut stack = vec![VertexId(0)];
        seen.insert(VertexId(0));
        let mut found: Option<(VertexId, VertexId)> = None;
        'dfs: while let Some(v) = stack.pop() {
            for w in neighbors(v) {
                if !seen.contains(&w) {
                    seen.insert(w);
                    parent.insert(w, v);
                    stack.push(w);
                } else if parent.get(&v) != Some(&w) {
                    found = Some((v, w));
                    break 'dfs;
                }
            }
        }
        let (v, w) = found.expect("biconnected graph contains a cycle");
        // Walk v up to w via parents; w must be an ancestor in DFS order or
        // at least reachable: collect v's ancestor chain and cut at w.
        let mut chain = vec![v];
        let mut cur = v;
        while let Some(&p) = parent.get(&cur) {
            chain.push(p);
            cur = p;
            if p == w {
                break;
            }
        }
        if *chain.last().unwrap() != w {
            // w not an ancestor of v: fall back to BFS cycle through edge (v,w).
            let mut prev: HashMap<VertexId, VertexId> = HashMap::new();
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(w);
            let mut seen2: BTreeSet<VertexId> = [w].into();
            'bfs: while let Some(x) = queue.pop_front() {
                for y in neighbors(x) {
                    if x == v && y == w {
                        continue;
                    }
                    if x == w && y == v {
                        continue;
                    }
                    if !seen2.contains(&y) {
                        seen2.insert(y);
                        prev.insert(y, x);
                        if y == v {
                            break 'bfs;
                        }
                        queue.push_back(y);
                    }
                }
            }
            let mut path = vec![v];
            let mut cur = v;
            while cur != w {
                cur = prev[&cur];
                path.push(cur);
            }
            path
        } else {
            chain
        }
    };
    debug_assert!(cycle.len() >= 3);

    let mut faces: Vec<Vec<VertexId>> = vec![cycle.clone(), cycle.iter().rev().copied().collect()];
    let mut h_vertices: BTreeSet<VertexId> = cycle.iter().copied().collect();
    let mut h_edges: BTreeSet<EdgeId> = BTreeSet::new();
    for i in 0..cycle.len() {
        let a = cycle[i];
        let b = cycle[(i + 1) % cycle.len()];
        h_edges.insert(edge_of[&(a, b)]);
    }

    while h_edges.len() < m {
        // Fragments.
        struct Fragment {
            attachments: BTreeSet<VertexId>,
            // A path between two attachments through the fragment.
            path: Vec<VertexId>,
        }
        let mut fragments: Vec<Fragment> = Vec::new();
        // Chords.
        for e in g.edges() {
            if h_edges.contains(&e) {
                continue;
            }
            let (u, v) = g.endpoints(e);
            if h_vertices.contains(&u) && h_vertices.contains(&v) {
                fragments.push(Fragment {
                    attachments: [u, v].into(),
                    path: vec![u, v],
                });
            }
        }
        // Components of G - V(H).
        let mut comp: HashMap<VertexId, usize> = HashMap::new();
        let mut n_comp = 0;
        for v in g.vertices() {
            if h_vertices.contains(&v) || comp.contains_key(&v) {
                continue;
            }
            let id = n_comp;
            n_comp += 1;
            let mut stack = vec![v];
            comp.insert(v, id);
            while let Some(x) = stack.pop() {
                for y in neighbors(x) {
                    if !h_vertices.contains(&y) && !comp.contains_key(&y) {
                        comp.insert(y, id);
                        stack.push(y);
                    }
                }
            }
        }
        for cid in 0..n_comp {
            let verts: Vec<VertexId> = comp
                .iter()
                .filter(|(_, &c)| c == cid)
                .map(|(&v, _)| v)
                .collect();
            let mut attachments = BTreeSet::new();
            for &x in &verts {
                for y in neighbors(x) {
                    if h_vertices.contains(&y) {
                        attachments.insert(y);
                    }
                }
            }
            debug_assert!(
                attachments.len() >= 2,
                "biconnected graph fragments attach twice"
            );
            // Path between two attachments through the component.
            let a = *attachments.iter().next().unwrap();
            let mut prev: HashMap<VertexId, VertexId> = HashMap::new();
            let mut queue = std::collections::VecDeque::new();
            let mut seen: BTreeSet<VertexId> = [a].into();
            queue.push_back(a);
            let mut target = None;
            'bfs2: while let Some(x) = queue.pop_front() {
                for y in neighbors(x) {
                    if seen.contains(&y) {
                        continue;
                    }
                    if comp.get(&y) == Some(&cid) {
                        seen.insert(y);
                        prev.insert(y, x);
                        queue.push_back(y);
                    } else if h_vertices.contains(&y) && y != a && x != a {
                        prev.insert(y, x);
                        target = Some(y);
                        break 'bfs2;
                    }
                }
            }
            let b = target.expect("second attachment reachable");
            let mut path = vec![b];
            let mut cur = b;
            while cur != a {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            fragments.push(Fragment { attachments, path });
        }

        // Admissible faces per fragment.
        let admissible = |fr: &Fragment| -> Vec<usize> {
            faces
                .iter()
                .enumerate()
                .filter(|(_, f)| {
                    let fs: BTreeSet<VertexId> = f.iter().copied().collect();
                    fr.attachments.is_subset(&fs)
                })
                .map(|(i, _)| i)
                .collect()
        };
        let mut chosen: Option<(usize, Vec<usize>)> = None;
        for (i, fr) in fragments.iter().enumerate() {
            let adm = admissible(fr);
            if adm.is_empty() {
                return None;
            }
            let better = match &chosen {
                None => true,
                Some((_, prev)) => adm.len() == 1 && prev.len() != 1,
            };
            if better {
                chosen = Some((i, adm));
            }
        }
        let (fi, adm) = chosen.expect("fragments exist while edges remain");
        let fr = &fragments[fi];
        let face_idx = adm[0];
        let face = faces[face_idx].clone();
        let a = *fr.path.first().unwrap();
        let b = *fr.path.last().unwrap();
        let pa = face.iter().position(|&x| x == a).unwrap();
        let pb = face.iter().position(|&x| x == b).unwrap();
        debug_assert!(pa != pb);
        let k = face.len();
        // Walk a -> b along the face.
        let mut seg1 = Vec::new();
        let mut i = pa;
        loop {
            seg1.push(face[i]);
            if i == pb {
                break;
            }
            i = (i + 1) % k;
        }
        // Walk b -> a along the face.
        let mut seg2 = Vec::new();
        let mut i = pb;
        loop {
            seg2.push(face[i]);
            if i == pa {
                break;
            }
            i = (i + 1) % k;
        }
        let interior: Vec<VertexId> = fr.path[1..fr.path.len() - 1].to_vec();
        // face1 = a..b (along face) + path b->a interior reversed.
        let mut face1 = seg1;
        for &x in interior.iter().rev() {
            face1.push(x);
        }
        // face2 = b..a (along face) + path a->b interior.
        let mut face2 = seg2;
        for &x in interior.iter() {
            face2.push(x);
        }
        faces.swap_remove(face_idx);
        faces.push(face1);
        faces.push(face2);
        for w in fr.path.windows(2) {
            h_edges.insert(edge_of[&(w[0], w[1])]);
        }
        for &x in &interior {
            h_vertices.insert(x);
        }
    }

    // Rotation extraction: each face walk (.., u, v, w, ..) says that at v
    // the dart to w follows the dart to u.
    let mut next: HashMap<(VertexId, VertexId), VertexId> = HashMap::new();
    for f in &faces {
        let k = f.len();
        for i in 0..k {
            let u = f[i];
            let v = f[(i + 1) % k];
            let w = f[(i + 2) % k];
            let prev = next.insert((v, u), w);
            debug_assert!(prev.is_none(), "dart appears in two faces");
        }
    }
    let mut order: Vec<Vec<Dart>> = Vec::with_capacity(n);
    for v in g.vertices() {
        let mut ring = Vec::new();
        let first = g.other_endpoint(g.darts_at(v)[0].edge, v);
        let mut u = first;
        loop {
            let e = edge_of[&(v, u)];
            let d = if g.endpoints(e).0 == v {
                Dart::new(e, 0)
            } else {
                Dart::new(e, 1)
            };
            ring.push(d);
            u = next[&(v, u)];
            if u == first {
                break;
            }
        }
        debug_assert_eq!(
            ring.len(),
            g.degree(v),
            "rotation covers all incident edges"
        );
        order.push(ring);
    }
    let rho = RotationSystem::new(order);
    debug_assert!(is_planar_rotation(g, &rho).unwrap());
    Some(rho)
}

/// Splits a connected multigraph into its biconnected components (blocks),
/// each returned as an edge set.
pub fn blocks(g: &MultiGraph) -> Vec<Vec<EdgeId>> {
    let n = g.n_vertices();
    if n == 0 {
        return Vec::new();
    }
    let mut disc = vec![0usize; n];
    let mut low = vec![0usize; n];
    let mut timer = 1;
    let mut stack_edges: Vec<EdgeId> = Vec::new();
    let mut out: Vec<Vec<EdgeId>> = Vec::new();
    let mut parent_edge = vec![None::<EdgeId>; n];
    // Iterative DFS over all components.
    for start in g.vertices() {
        if disc[start.0 as usize] != 0 {
            continue;
        }
        let mut stack: Vec<(VertexId, usize)> = vec![(start, 0)];
        disc[start.0 as usize] = timer;
        low[start.0 as usize] = timer;
        timer += 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let darts = g.darts_at(v);
            if *i < darts.len() {
                let d = darts[*i];
                *i += 1;
                if Some(d.edge) == parent_edge[v.0 as usize] {
                    continue;
                }
                let w = g.other_endpoint(d.edge, v);
                if disc[w.0 as usize] == 0 {
                    stack_edges.push(d.edge);
                    disc[w.0 as usize] = timer;
                    low[w.0 as usize] = timer;
                    timer += 1;
                    parent_edge[w.0 as usize] = Some(d.edge);
                    stack.push((w, 0));
                } else if disc[w.0 as usize] < disc[v.0 as usize] {
                    stack_edges.push(d.edge);
                    low[v.0 as usize] = low[v.0 as usize].min(disc[w.0 as usize]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    low[p.0 as usize] = low[p.0 as usize].min(low[v.0 as usize]);
                    if low[v.0 as usize] >= disc[p.0 as usize] {
                        // p is a cut vertex (or root): pop the block.
                        let mut block = Vec::new();
                        let pe = parent_edge[v.0 as usize].unwrap();
                        while let Some(e) = stack_edges.pop() {
                            block.push(e);
                            if e == pe {
                                break;
                            }
                        }
                        if !block.is_empty() {
                            out.push(block);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Planarity of an arbitrary multigraph: every block must be planar.
/// Parallel edges are subdivided to make blocks simple before embedding.
pub fn is_planar_multigraph(g: &MultiGraph) -> bool {
    if g.n_edges() == 0 {
        return true;
    }
    for block in blocks(g) {
        if block.len() <= 2 {
            continue;
        }
        // Build the block as its own simple graph, subdividing parallels.
        let mut bg = MultiGraph::empty();
        let mut seen_pair: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        let mut next_aux = 0usize;
        for &e in &block {
            let (u, v) = g.endpoints(e);
            let a = format!("v{}", u.0);
            let b = format!("v{}", v.0);
            let key = (u.min(v), u.max(v));
            if seen_pair.insert(key) {
                bg.add_edge(&format!("e{}", e.0), &a, &b).unwrap();
            } else {
                // Subdivide.
                let mid = format!("aux{}", next_aux);
                next_aux += 1;
                bg.add_edge(&format!("e{}a", e.0), &a, &mid).unwrap();
                bg.add_edge(&format!("e{}b", e.0), &mid, &b).unwrap();
            }
        }
        if embed_biconnected_simple(&bg).is_none() {
            return false;
        }
    }
    true
}
