//! Ground-truth brute force: FPQ-choosable planarity and admissible-tuple
//! sets by exhaustive enumeration of assignments and rotation systems, for
//! validating every component of the decision procedure.

use thiserror::Error;

use crate::dp::{ChoosableGraph, PsiSet, ELL};
use crate::fpq::{CyclicOrder, FpqTree, LeafId, Orientation};
use crate::graph::{is_planar_rotation, Dart, EdgeId, MultiGraph, RotationSystem, VertexId};
use crate::spqr::SpqrTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration cap of {0} candidate pairs exceeded (instance needs {1})")]
    CapExceeded(u128, u128),
    #[error("fpq error: {0}")]
    Fpq(#[from] crate::fpq::FpqError),
    #[error("dp error: {0}")]
    Dp(#[from] crate::dp::DpError),
}

#[derive(Debug, Clone, Copy)]
pub struct Caps {
    /// Bound on assignments x rotation combinations.
    pub max_pairs: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_pairs: 10_000_000,
        }
    }
}

/// Iterates the cartesian product of index ranges.
fn product(ranges: &[usize], mut f: impl FnMut(&[usize]) -> bool) -> bool {
    if ranges.iter().any(|&r| r == 0) {
        return false;
    }
    let mut idx = vec![0usize; ranges.len()];
    loop {
        if f(&idx) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == ranges.len() {
                return false;
            }
            idx[i] += 1;
            if idx[i] < ranges[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn estimated_pairs(cg: &ChoosableGraph) -> u128 {
    let mut total: u128 = 1;
    for trees in &cg.d {
        let per_vertex: u128 = trees.iter().map(|t| t.count_orders()).sum();
        total = total.saturating_mul(per_vertex.max(1));
    }
    total
}

/// Builds a rotation system from per-vertex cyclic orders of leaf (edge) ids.
fn rotation_from_orders(g: &MultiGraph, orders: &[CyclicOrder]) -> RotationSystem {
    RotationSystem::new(
        g.vertices()
            .map(|v| {
                orders[v.0 as usize]
                    .as_slice()
                    .iter()
                    .map(|&l| {
                        let e = EdgeId(l.0);
                        let (a, _) = g.endpoints(e);
                        Dart::new(e, if a == v { 0 } else { 1 })
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Whether some assignment admits a consistent planar embedding, together
/// with one (assignment, rotation) witness.
pub fn oracle_test_witness(
    cg: &ChoosableGraph,
    caps: Caps,
) -> Result<Option<(Vec<usize>, RotationSystem)>, OracleError> {
    let need = estimated_pairs(cg);
    if need > caps.max_pairs {
        return Err(OracleError::CapExceeded(caps.max_pairs, need));
    }
    let n = cg.g.n_vertices();
    let d_sizes: Vec<usize> = cg.d.iter().map(|t| t.len()).collect();
    let mut found = None;
    product(&d_sizes, |assignment| {
        // Enumerate each chosen tree's orders.
        let order_sets: Vec<Vec<CyclicOrder>> = (0..n)
            .map(|v| {
                cg.d[v][assignment[v]]
                    .enumerate_orders(u128::MAX)
                    .expect("within caps")
                    .into_iter()
                    .collect()
            })
            .collect();
        let sizes: Vec<usize> = order_sets.iter().map(|s| s.len()).collect();
        product(&sizes, |choice| {
            let orders: Vec<CyclicOrder> =
                (0..n).map(|v| order_sets[v][choice[v]].clone()).collect();
            let rho = rotation_from_orders(&cg.g, &orders);
            if is_planar_rotation(&cg.g, &rho).unwrap() {
                found = Some((assignment.to_vec(), rho));
                true
            } else {
                false
            }
        })
    });
    Ok(found)
}

pub fn oracle_test(cg: &ChoosableGraph, caps: Caps) -> Result<bool, OracleError> {
    Ok(oracle_test_witness(cg, caps)?.is_some())
}

/// The admissible tuples of an SPQR node, straight from the definition: an
/// assignment and planar embedding of the pertinent graph plus its virtual
/// edge, with the required boundary orientations at the poles.
pub fn oracle_psi(
    cg: &ChoosableGraph,
    t: &SpqrTree,
    mu: usize,
    caps: Caps,
) -> Result<PsiSet, OracleError> {
    let g = &cg.g;
    let (u, v) = t.node(mu).poles;
    let pert_edges: Vec<EdgeId> = t.pertinent_edges(mu).into_iter().collect();
    // K = pertinent graph + virtual edge (u, v).
    let mut k = MultiGraph::empty();
    for &e in &pert_edges {
        let (a, b) = g.endpoints(e);
        k.add_edge(g.edge_name(e), g.vertex_name(a), g.vertex_name(b))
            .unwrap();
    }
    k.add_edge("__virt", g.vertex_name(u), g.vertex_name(v))
        .unwrap();

    // Per K-vertex tree lists: pertinent projections at the poles, original
    // sets elsewhere. Leaves are g-edge ids; the virtual edge is ELL.
    let lu = t.pertinent_leafset(g, mu, u);
    let lv = t.pertinent_leafset(g, mu, v);
    let tu_src = cg.trees(u);
    let tv_src = cg.trees(v);
    let pert_u: Vec<FpqTree> = tu_src
        .iter()
        .map(|tr| tr.project(&lu, ELL))
        .collect::<Result<_, _>>()?;
    let pert_v: Vec<FpqTree> = tv_src
        .iter()
        .map(|tr| tr.project(&lv, ELL))
        .collect::<Result<_, _>>()?;
    let internals: Vec<VertexId> = t.internal_vertices(g, mu).into_iter().collect();

    // Assignment space: pole tree indices plus internal vertex tree indices.
    let mut ranges = vec![tu_src.len(), tv_src.len()];
    ranges.extend(internals.iter().map(|w| cg.trees(*w).len()));

    // Cap estimate.
    let mut need: u128 = 0;
    {
        let mut per_assignment: u128 = 1;
        let sum_u: u128 = pert_u.iter().map(|t| t.count_orders()).sum();
        let sum_v: u128 = pert_v.iter().map(|t| t.count_orders()).sum();
        per_assignment = per_assignment.saturating_mul(sum_u.max(1));
        per_assignment = per_assignment.saturating_mul(sum_v.max(1));
        for w in &internals {
            let s: u128 = cg.trees(*w).iter().map(|t| t.count_orders()).sum();
            per_assignment = per_assignment.saturating_mul(s.max(1));
        }
        need = need.saturating_add(per_assignment);
    }
    if need > caps.max_pairs {
        return Err(OracleError::CapExceeded(caps.max_pairs, need));
    }

    // Map a K-vertex to the index space used in rotations below.
    let k_index_of = |w: VertexId| -> usize {
        k.vertex_by_name(g.vertex_name(w))
            .expect("pertinent vertex in K")
            .0 as usize
    };
    let ku = k_index_of(u);
    let kv = k_index_of(v);

    let mut out = PsiSet::new();
    product(&ranges, |idx| {
        let (iu, iv) = (idx[0], idx[1]);
        // Order sets per K-vertex (indexed by K vertex id).
        let mut order_sets: Vec<Vec<CyclicOrder>> = vec![Vec::new(); k.n_vertices()];
        order_sets[ku] = pert_u[iu]
            .enumerate_orders(u128::MAX)
            .expect("capped")
            .into_iter()
            .collect();
        order_sets[kv] = pert_v[iv]
            .enumerate_orders(u128::MAX)
            .expect("capped")
            .into_iter()
            .collect();
        for (wi, w) in internals.iter().enumerate() {
            let tr = &cg.trees(*w)[idx[2 + wi]];
            order_sets[k_index_of(*w)] = tr
                .enumerate_orders(u128::MAX)
                .expect("capped")
                .into_iter()
                .collect();
        }
        let sizes: Vec<usize> = order_sets.iter().map(|s| s.len()).collect();
        product(&sizes, |choice| {
            // Build the K rotation; leaf ids name g-edges or ELL.
            let rho = RotationSystem::new(
                (0..k.n_vertices())
                    .map(|kvx| {
                        order_sets[kvx][choice[kvx]]
                            .as_slice()
                            .iter()
                            .map(|&l| {
                                let ke = if l == ELL {
                                    k.edge_by_name("__virt").unwrap()
                                } else {
                                    k.edge_by_name(g.edge_name(EdgeId(l.0))).unwrap()
                                };
                                let (a, _) = k.endpoints(ke);
                                Dart::new(ke, if a.0 as usize == kvx { 0 } else { 1 })
                            })
                            .collect()
                    })
                    .collect(),
            );
            if !is_planar_rotation(&k, &rho).unwrap() {
                return false;
            }
            // Extract orientations at the poles from the full source trees.
            let sig_u = &order_sets[ku][choice[ku]];
            let sig_v = &order_sets[kv][choice[kv]];
            let ou = tu_src[iu]
                .orientation_of(&lu, sig_u)
                .expect("pole set is proper");
            let ov = tv_src[iv]
                .orientation_of(&lv, sig_v)
                .expect("pole set is proper");
            debug_assert!(ou != Orientation::None && ov != Orientation::None);
            for obit_u in 0..2u8 {
                if !ou.matches(obit_u) {
                    continue;
                }
                for obit_v in 0..2u8 {
                    if !ov.matches(obit_v) {
                        continue;
                    }
                    // Tuples follow mu's pole order (u, v).
                    out.insert((iu, iv, obit_u, obit_v));
                }
            }
            false
        });
        false
    });
    Ok(out)
}

/// Restriction of oracle_psi to singleton sanity: every leaf's psi is the
/// full product. Used by tests.
pub fn full_product(nu: usize, nv: usize) -> PsiSet {
    let mut out = PsiSet::new();
    for iu in 0..nu {
        for iv in 0..nv {
            for ou in 0..2u8 {
                for ov in 0..2u8 {
                    out.insert((iu, iv, ou, ov));
                }
            }
        }
    }
    out
}

/// Per-vertex choosable-graph mirror test support: flips the default
/// orientations of every tree (global reflection).
pub fn reflect_instance(cg: &ChoosableGraph) -> ChoosableGraph {
    ChoosableGraph {
        g: cg.g.clone(),
        d: cg
            .d
            .iter()
            .map(|ts| ts.iter().map(|t| t.reflected()).collect())
            .collect(),
    }
}

/// Brute-force check that a rotation system is consistent with an
/// assignment: used to validate witnesses externally.
pub fn rotation_consistent(
    cg: &ChoosableGraph,
    assignment: &[usize],
    rho: &RotationSystem,
) -> bool {
    if !rho.covers(&cg.g) {
        return false;
    }
    for v in cg.g.vertices() {
        let ring: Vec<LeafId> = rho.order[v.0 as usize]
            .iter()
            .map(|d| LeafId(d.edge.0))
            .collect();
        let sigma = CyclicOrder::new(ring);
        let tree = &cg.trees(v)[assignment[v.0 as usize]];
        if !tree.represents(&sigma).unwrap_or(false) {
            return false;
        }
    }
    is_planar_rotation(&cg.g, rho).unwrap_or(false)
}

/// Convenience: the psi set of the root's child decides the instance; the
/// oracle agrees by construction since K_mu* is G itself there.
pub fn oracle_matches_apex(
    cg: &ChoosableGraph,
    t: &SpqrTree,
    caps: Caps,
) -> Result<(bool, bool), OracleError> {
    let apex = t.node(t.root()).children[0];
    let psi = oracle_psi(cg, t, apex, caps)?;
    let direct = oracle_test(cg, caps)?;
    Ok((direct, !psi.is_empty()))
}
