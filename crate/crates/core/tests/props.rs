//! Property tests for the structural invariants: the Euler formula over all
//! rotation systems, representation vs enumeration, and intersection
//! symmetry.

use std::collections::BTreeSet;

use fpq_planarity::fpq::{intersect, CyclicOrder, FpqTree, LeafId, NodeKind, TreeBuilder};
use fpq_planarity::graph::{rotation_genus, MultiGraph, RotationSystem};
use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::{RngExt, SeedableRng};

fn random_tree(seed: u64, k: u32) -> FpqTree {
    fn build(rng: &mut SmallRng, b: &mut TreeBuilder, leaves: &[u32]) -> usize {
        if leaves.len() == 1 {
            return b.leaf(LeafId(leaves[0]));
        }
        let groups = rng.random_range(2..=leaves.len().min(4));
        let mut parts: Vec<Vec<u32>> = vec![Vec::new(); groups];
        for (i, &lf) in leaves.iter().enumerate() {
            if i < groups {
                parts[i].push(lf);
            } else {
                parts[rng.random_range(0..groups)].push(lf);
            }
        }
        let children: Vec<usize> = parts.iter().map(|p| build(rng, b, p)).collect();
        let kind = match rng.random_range(0..3) {
            0 => NodeKind::P,
            1 => NodeKind::Q,
            _ => NodeKind::F,
        };
        b.inner(kind, children)
    }
    let mut rng = SmallRng::seed_from_u64(seed);
    let leaves: Vec<u32> = (0..k).collect();
    let mut b = TreeBuilder::new();
    let root = build(&mut rng, &mut b, &leaves);
    b.finish(root).canonicalized()
}

proptest! {
    /// Euler: every rotation system of every connected multigraph has a
    /// nonnegative integer genus, and every edge-end lies on exactly one
    /// face (checked inside trace_faces).
    #[test]
    fn euler_formula_holds(seed in 0u64..5000, n in 2usize..5, extra in 0usize..5) {
        let mut rng = SmallRng::seed_from_u64(seed);
        let mut g = MultiGraph::empty();
        // Spanning path + random extra edges keeps it connected.
        for i in 0..n {
            g.ensure_vertex(&format!("v{}", i));
        }
        for i in 1..n {
            g.add_edge(&format!("p{}", i), &format!("v{}", i - 1), &format!("v{}", i)).unwrap();
        }
        for j in 0..extra {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n);
            if a == b {
                b = (b + 1) % n;
            }
            g.add_edge(&format!("x{}", j), &format!("v{}", a), &format!("v{}", b)).unwrap();
        }
        // A random rotation system.
        let order: Vec<Vec<_>> = g
            .vertices()
            .map(|v| {
                let mut darts = g.darts_at(v).to_vec();
                for i in (1..darts.len()).rev() {
                    let j = rng.random_range(0..=i);
                    darts.swap(i, j);
                }
                darts
            })
            .collect();
        let rho = RotationSystem::new(order);
        let genus = rotation_genus(&g, &rho).unwrap();
        prop_assert!(genus >= 0);
    }

    /// represents agrees with membership in the enumerated order set.
    #[test]
    fn represents_iff_enumerated(seed in 0u64..3000, k in 3u32..7, perm_seed in 0u64..100) {
        let t = random_tree(seed, k);
        let orders = t.enumerate_orders(1 << 20).unwrap();
        let mut rng = SmallRng::seed_from_u64(perm_seed);
        let mut labels: Vec<LeafId> = (0..k).map(LeafId).collect();
        for i in (1..labels.len()).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        let sigma = CyclicOrder::new(labels);
        prop_assert_eq!(t.represents(&sigma).unwrap(), orders.contains(&sigma));
    }

    /// Intersection is symmetric on represented sets and never grows them.
    #[test]
    fn intersect_symmetric_and_shrinking(seed in 0u64..2000, k in 3u32..6) {
        let t1 = random_tree(seed, k);
        let t2 = random_tree(seed.wrapping_add(777), k);
        let o1 = t1.enumerate_orders(1 << 20).unwrap();
        let ab = intersect(&t1, &t2).unwrap();
        let ba = intersect(&t2, &t1).unwrap();
        let set = |t: &Option<FpqTree>| -> BTreeSet<CyclicOrder> {
            t.as_ref().map(|x| x.enumerate_orders(1 << 20).unwrap()).unwrap_or_default()
        };
        prop_assert_eq!(set(&ab), set(&ba));
        prop_assert!(set(&ab).is_subset(&o1));
    }

    /// Canonicalization is a projection: applying it twice equals once.
    #[test]
    fn canonicalize_idempotent(seed in 0u64..3000, k in 3u32..7) {
        let t = random_tree(seed, k);
        let once = t.canonicalized();
        let twice = once.canonicalized();
        prop_assert_eq!(once.canonical_key(), twice.canonical_key());
    }
}
