//! Planarity testing of biconnected multigraphs under hierarchical embedding
//! constraints given as sets of FPQ-trees per vertex, together with the
//! machinery the decision procedure needs (SPQR decomposition, embedding
//! trees, a 2SAT solver, sphere-cut decompositions), a brute-force oracle
//! that cross-validates every component, instance generators built from the
//! hardness constructions, and NodeTrix planarity testing of flat clustered
//! graphs as an application.

pub mod dp;
pub mod formats;
pub mod fpq;
pub mod gen;
pub mod graph;
pub mod nodetrix;
pub mod oracle;
pub mod planar;
pub mod scd;
pub mod spqr;
pub mod twosat;
