//! Instance file formats. One record per line, `#` comments, UTF-8,
//! alphanumeric ids:
//!   graph:      `v <id>`, `e <edge-id> <u> <v>`
//!   choosable:  graph records + `d <vertex> <tree-sexpr>`
//!   drawn:      graph + `r <vertex> <edge...>` (rotation) + `x <e1> <e2> <p1> <p2>`
//!   listcol:    graph + `r ...` + `l <vertex> <color...>`
//!   nodetrix:   `c <cluster-id> <vertex...>`, `a <u> <v>` (intra, carried),
//!               `ie <edge-id> <cl>.<vx>.<side|?> <cl>.<vx>.<side|?>`

use thiserror::Error;

use crate::dp::ChoosableGraph;
use crate::fpq::{parse_tree, tree_to_sexpr_named, FpqTree, LeafId};
use crate::gen::{DrawnCubicGraph, ListColoringInstance};
use crate::graph::{Dart, EdgeId, MultiGraph, RotationSystem};
use crate::nodetrix::{NodeTrixGraph, Side};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {0}: {1}")]
    At(usize, String),
    #[error("{0}")]
    General(String),
}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::At(line, msg.into())
}

struct Records<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
}

fn records(src: &str) -> Records<'_> {
    let mut lines = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        lines.push((i + 1, line.split_whitespace().collect()));
    }
    Records { lines }
}

fn parse_graph_records(recs: &Records<'_>) -> Result<MultiGraph, ParseError> {
    let mut g = MultiGraph::empty();
    for (ln, toks) in &recs.lines {
        match toks[0] {
            "v" => {
                if toks.len() != 2 {
                    return Err(err(*ln, "v record needs one id"));
                }
                g.ensure_vertex(toks[1]);
            }
            "e" => {
                if toks.len() != 4 {
                    return Err(err(*ln, "e record needs <edge-id> <u> <v>"));
                }
                g.add_edge(toks[1], toks[2], toks[3])
                    .map_err(|e| err(*ln, e.to_string()))?;
            }
            _ => {}
        }
    }
    Ok(g)
}

pub fn parse_graph(src: &str) -> Result<MultiGraph, ParseError> {
    let recs = records(src);
    for (ln, toks) in &recs.lines {
        if !matches!(toks[0], "v" | "e") {
            return Err(err(*ln, format!("unknown record '{}'", toks[0])));
        }
    }
    parse_graph_records(&recs)
}

pub fn parse_choosable(src: &str) -> Result<ChoosableGraph, ParseError> {
    let recs = records(src);
    for (ln, toks) in &recs.lines {
        if !matches!(toks[0], "v" | "e" | "d") {
            return Err(err(*ln, format!("unknown record '{}'", toks[0])));
        }
    }
    let g = parse_graph_records(&recs)?;
    let mut d: Vec<Vec<FpqTree>> = vec![Vec::new(); g.n_vertices()];
    for (ln, toks) in &recs.lines {
        if toks[0] != "d" {
            continue;
        }
        if toks.len() < 3 {
            return Err(err(*ln, "d record needs <vertex> <tree-sexpr>"));
        }
        let v = g
            .vertex_by_name(toks[1])
            .ok_or_else(|| err(*ln, format!("unknown vertex '{}'", toks[1])))?;
        let sexpr = toks[2..].join(" ");
        let tree = parse_tree(&sexpr, &mut |w| g.edge_by_name(w).map(|e| LeafId(e.0)))
            .map_err(|e| err(*ln, e.to_string()))?;
        d[v.0 as usize].push(tree);
    }
    ChoosableGraph::new(g, d).map_err(|e| ParseError::General(e.to_string()))
}

pub fn write_choosable(cg: &ChoosableGraph) -> String {
    let mut out = String::new();
    for v in cg.g.vertices() {
        out.push_str(&format!("v {}\n", cg.g.vertex_name(v)));
    }
    for e in cg.g.edges() {
        let (u, v) = cg.g.endpoints(e);
        out.push_str(&format!(
            "e {} {} {}\n",
            cg.g.edge_name(e),
            cg.g.vertex_name(u),
            cg.g.vertex_name(v)
        ));
    }
    let name = |l: LeafId| cg.g.edge_name(EdgeId(l.0)).to_string();
    for v in cg.g.vertices() {
        for t in cg.trees(v) {
            out.push_str(&format!(
                "d {} {}\n",
                cg.g.vertex_name(v),
                tree_to_sexpr_named(t, &name)
            ));
        }
    }
    out
}

fn parse_rotations(
    recs: &Records<'_>,
    g: &MultiGraph,
) -> Result<Option<RotationSystem>, ParseError> {
    let mut rot: Vec<Option<Vec<Dart>>> = vec![None; g.n_vertices()];
    let mut any = false;
    for (ln, toks) in &recs.lines {
        if toks[0] != "r" {
            continue;
        }
        any = true;
        if toks.len() < 2 {
            return Err(err(*ln, "r record needs <vertex> <edge...>"));
        }
        let v = g
            .vertex_by_name(toks[1])
            .ok_or_else(|| err(*ln, format!("unknown vertex '{}'", toks[1])))?;
        let mut ring = Vec::new();
        for w in &toks[2..] {
            let e = g
                .edge_by_name(w)
                .ok_or_else(|| err(*ln, format!("unknown edge '{}'", w)))?;
            let (a, _) = g.endpoints(e);
            ring.push(Dart::new(e, if a == v { 0 } else { 1 }));
        }
        rot[v.0 as usize] = Some(ring);
    }
    if !any {
        return Ok(None);
    }
    let order: Vec<Vec<Dart>> = rot
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.ok_or_else(|| ParseError::General(format!("missing rotation for vertex #{}", i)))
        })
        .collect::<Result<_, _>>()?;
    let rho = RotationSystem::new(order);
    if !rho.covers(g) {
        return Err(ParseError::General(
            "rotation records do not cover the graph".into(),
        ));
    }
    Ok(Some(rho))
}

pub fn parse_drawn_cubic(src: &str) -> Result<DrawnCubicGraph, ParseError> {
    let recs = records(src);
    for (ln, toks) in &recs.lines {
        if !matches!(toks[0], "v" | "e" | "r" | "x") {
            return Err(err(*ln, format!("unknown record '{}'", toks[0])));
        }
    }
    let g = parse_graph_records(&recs)?;
    let rotation = parse_rotations(&recs, &g)?
        .ok_or_else(|| ParseError::General("drawing needs r records".into()))?;
    let mut crossings = Vec::new();
    for (ln, toks) in &recs.lines {
        if toks[0] != "x" {
            continue;
        }
        if toks.len() != 5 {
            return Err(err(*ln, "x record needs <e1> <e2> <pos1> <pos2>"));
        }
        let e1 = g
            .edge_by_name(toks[1])
            .ok_or_else(|| err(*ln, format!("unknown edge '{}'", toks[1])))?;
        let e2 = g
            .edge_by_name(toks[2])
            .ok_or_else(|| err(*ln, format!("unknown edge '{}'", toks[2])))?;
        let p1: usize = toks[3].parse().map_err(|_| err(*ln, "bad position"))?;
        let p2: usize = toks[4].parse().map_err(|_| err(*ln, "bad position"))?;
        crossings.push((e1, e2, p1, p2));
    }
    Ok(DrawnCubicGraph {
        g,
        rotation,
        crossings,
    })
}

pub fn write_drawn_cubic(dg: &DrawnCubicGraph) -> String {
    let g = &dg.g;
    let mut out = String::new();
    for v in g.vertices() {
        out.push_str(&format!("v {}\n", g.vertex_name(v)));
    }
    for e in g.edges() {
        let (u, v) = g.endpoints(e);
        out.push_str(&format!(
            "e {} {} {}\n",
            g.edge_name(e),
            g.vertex_name(u),
            g.vertex_name(v)
        ));
    }
    for v in g.vertices() {
        let ring: Vec<&str> = dg.rotation.order[v.0 as usize]
            .iter()
            .map(|d| g.edge_name(d.edge))
            .collect();
        out.push_str(&format!("r {} {}\n", g.vertex_name(v), ring.join(" ")));
    }
    for &(e1, e2, p1, p2) in &dg.crossings {
        out.push_str(&format!(
            "x {} {} {} {}\n",
            g.edge_name(e1),
            g.edge_name(e2),
            p1,
            p2
        ));
    }
    out
}

pub fn parse_listcol(src: &str) -> Result<ListColoringInstance, ParseError> {
    let recs = records(src);
    for (ln, toks) in &recs.lines {
        if !matches!(toks[0], "v" | "e" | "r" | "l") {
            return Err(err(*ln, format!("unknown record '{}'", toks[0])));
        }
    }
    let g = parse_graph_records(&recs)?;
    let rotation = parse_rotations(&recs, &g)?
        .ok_or_else(|| ParseError::General("list-coloring instance needs r records".into()))?;
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); g.n_vertices()];
    for (ln, toks) in &recs.lines {
        if toks[0] != "l" {
            continue;
        }
        if toks.len() < 3 {
            return Err(err(*ln, "l record needs <vertex> <color...>"));
        }
        let v = g
            .vertex_by_name(toks[1])
            .ok_or_else(|| err(*ln, format!("unknown vertex '{}'", toks[1])))?;
        for w in &toks[2..] {
            let c: u32 = w.parse().map_err(|_| err(*ln, "colors are integers"))?;
            lists[v.0 as usize].push(c);
        }
        lists[v.0 as usize].sort_unstable();
        lists[v.0 as usize].dedup();
    }
    if lists.iter().any(|l| l.is_empty()) {
        return Err(ParseError::General(
            "every vertex needs a color list".into(),
        ));
    }
    Ok(ListColoringInstance { g, rotation, lists })
}

pub fn write_listcol(inst: &ListColoringInstance) -> String {
    let g = &inst.g;
    let mut out = String::new();
    for v in g.vertices() {
        out.push_str(&format!("v {}\n", g.vertex_name(v)));
    }
    for e in g.edges() {
        let (u, v) = g.endpoints(e);
        out.push_str(&format!(
            "e {} {} {}\n",
            g.edge_name(e),
            g.vertex_name(u),
            g.vertex_name(v)
        ));
    }
    for v in g.vertices() {
        let ring: Vec<&str> = inst.rotation.order[v.0 as usize]
            .iter()
            .map(|d| g.edge_name(d.edge))
            .collect();
        out.push_str(&format!("r {} {}\n", g.vertex_name(v), ring.join(" ")));
    }
    for v in g.vertices() {
        let l: Vec<String> = inst.lists[v.0 as usize]
            .iter()
            .map(|c| c.to_string())
            .collect();
        out.push_str(&format!("l {} {}\n", g.vertex_name(v), l.join(" ")));
    }
    out
}

fn parse_side(s: &str, ln: usize) -> Result<Option<Side>, ParseError> {
    match s {
        "T" | "t" => Ok(Some(Side::Top)),
        "R" | "r" => Ok(Some(Side::Right)),
        "B" | "b" => Ok(Some(Side::Bottom)),
        "L" | "l" => Ok(Some(Side::Left)),
        "?" => Ok(None),
        other => Err(err(ln, format!("bad side '{}'", other))),
    }
}

pub fn parse_nodetrix(src: &str) -> Result<NodeTrixGraph, ParseError> {
    let recs = records(src);
    let mut clusters: Vec<(String, Vec<String>)> = Vec::new();
    let mut intra: Vec<(String, String)> = Vec::new();
    let mut inter: Vec<(String, [(String, String, Option<Side>); 2])> = Vec::new();
    for (ln, toks) in &recs.lines {
        match toks[0] {
            "c" => {
                if toks.len() < 3 {
                    return Err(err(*ln, "c record needs <cluster-id> <vertex...>"));
                }
                clusters.push((
                    toks[1].to_string(),
                    toks[2..].iter().map(|s| s.to_string()).collect(),
                ));
            }
            "a" => {
                if toks.len() != 3 {
                    return Err(err(*ln, "a record needs <u> <v>"));
                }
                intra.push((toks[1].to_string(), toks[2].to_string()));
            }
            "ie" => {
                if toks.len() != 4 {
                    return Err(err(*ln, "ie record needs <edge-id> <end> <end>"));
                }
                let parse_end = |s: &str| -> Result<(String, String, Option<Side>), ParseError> {
                    let parts: Vec<&str> = s.split('.').collect();
                    if parts.len() != 3 {
                        return Err(err(*ln, "end is <cluster>.<vertex>.<side|?>"));
                    }
                    Ok((
                        parts[0].to_string(),
                        parts[1].to_string(),
                        parse_side(parts[2], *ln)?,
                    ))
                };
                inter.push((
                    toks[1].to_string(),
                    [parse_end(toks[2])?, parse_end(toks[3])?],
                ));
            }
            other => return Err(err(*ln, format!("unknown record '{}'", other))),
        }
    }
    NodeTrixGraph::build(clusters, intra, inter).map_err(|e| ParseError::General(e.to_string()))
}

pub fn write_nodetrix(ntg: &NodeTrixGraph) -> String {
    let mut out = String::new();
    for (cid, verts) in ntg.clusters() {
        out.push_str(&format!("c {} {}\n", cid, verts.join(" ")));
    }
    for (u, v) in ntg.intra_edges() {
        out.push_str(&format!("a {} {}\n", u, v));
    }
    let side_str = |s: Option<Side>| match s {
        Some(Side::Top) => "T",
        Some(Side::Right) => "R",
        Some(Side::Bottom) => "B",
        Some(Side::Left) => "L",
        None => "?",
    };
    for (name, ends) in ntg.inter_edges() {
        out.push_str(&format!(
            "ie {} {}.{}.{} {}.{}.{}\n",
            name,
            ends[0].0,
            ends[0].1,
            side_str(ends[0].2),
            ends[1].0,
            ends[1].1,
            side_str(ends[1].2),
        ));
    }
    out
}
