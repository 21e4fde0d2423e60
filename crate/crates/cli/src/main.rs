//! Command-line front end: parse instance files, run the tester, the
//! brute-force oracle, the instance generators and the NodeTrix tests, and
//! emit human-readable or JSON reports.
//!
//! Exit codes: 0 yes, 1 no, 2 usage/parse error, 3 unsupported input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fpq_planarity::dp::{self, DpOptions};
use fpq_planarity::formats;
use fpq_planarity::gen::{gen_3ec, gen_listcol, gen_random, RandomParams};
use fpq_planarity::graph::EdgeId;
use fpq_planarity::nodetrix::{self, NtxError, NtxVerdict};
use fpq_planarity::oracle::{self, Caps};
use fpq_planarity::scd::{scd_decompose, ScdOptions};
use fpq_planarity::spqr::{SpqrKind, SpqrTree};

#[derive(Parser)]
#[command(
    name = "fpq",
    about = "FPQ-choosable planarity testing and NodeTrix planarity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide FPQ-choosable planarity of a choosable-graph file.
    Test(TestArgs),
    /// Generate instances.
    #[command(subcommand)]
    Gen(GenCommand),
    /// NodeTrix planarity testing.
    #[command(subcommand)]
    Ntx(NtxCommand),
    /// Dump the SPQR tree, embedding trees and branch decompositions.
    Info(InfoArgs),
}

#[derive(Args)]
struct TestArgs {
    file: PathBuf,
    /// Also run the brute-force oracle and report agreement.
    #[arg(long)]
    oracle: bool,
    /// Extract and print a verified witness on a yes answer.
    #[arg(long)]
    witness: bool,
    /// JSON report on stdout.
    #[arg(long)]
    json: bool,
    /// Oracle cap on candidate (assignment, rotation) pairs.
    #[arg(long, default_value_t = 10_000_000)]
    caps: u128,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Three-edge-coloring construction from a drawn cubic graph.
    #[command(name = "3ec")]
    ThreeEc {
        drawing: PathBuf,
        #[arg(long)]
        p_only: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// List-coloring construction from an embedded list-coloring instance.
    Listcol {
        instance: PathBuf,
        #[arg(long)]
        p_only: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Seeded random biconnected planar instance.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        d_max: usize,
        #[arg(long, default_value_t = 6)]
        tree_size: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum NtxCommand {
    /// Decide NodeTrix planarity of a clustered-graph file.
    Test {
        file: PathBuf,
        /// Ignore side annotations and search all side assignments.
        #[arg(long)]
        free_sides: bool,
        #[arg(long)]
        witness: bool,
        #[arg(long)]
        json: bool,
        /// Budget on per-cluster candidate trees in free-sides mode.
        #[arg(long, default_value_t = 1 << 22)]
        tree_budget: u128,
    },
}

#[derive(Args)]
struct InfoArgs {
    file: PathBuf,
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {}", path.display(), e);
        ExitCode::from(2)
    })
}

fn write_out(path: &Option<PathBuf>, content: &str) -> ExitCode {
    match path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, content) {
                eprintln!("error: cannot write {}: {}", p.display(), e);
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        None => {
            print!("{}", content);
            ExitCode::SUCCESS
        }
    }
}

fn cmd_test(args: &TestArgs) -> ExitCode {
    let src = match read(&args.file) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let cg = match formats::parse_choosable(&src) {
        Ok(cg) => cg,
        Err(e) => {
            eprintln!("parse error: {}", e);
            return ExitCode::from(2);
        }
    };
    let opts = DpOptions::default();
    let report = match dp::test_with(&cg, &opts) {
        Ok(r) => r,
        Err(dp::DpError::NotBiconnected) => {
            eprintln!("unsupported: the graph is not biconnected");
            return ExitCode::from(3);
        }
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(2);
        }
    };
    let mut agreement = None;
    if args.oracle {
        match oracle::oracle_test(
            &cg,
            Caps {
                max_pairs: args.caps,
            },
        ) {
            Ok(want) => agreement = Some(want == report.feasible),
            Err(e) => {
                eprintln!("oracle skipped: {}", e);
            }
        }
    }
    let witness = if args.witness && report.feasible {
        match dp::extract_witness(&cg, &opts) {
            Ok(w) => w,
            Err(e) => {
                eprintln!("witness extraction failed: {}", e);
                None
            }
        }
    } else {
        None
    };
    let witness_json = witness.as_ref().map(|w| {
        let assignment: serde_json::Map<String, serde_json::Value> =
            cg.g.vertices()
                .map(|v| {
                    (
                        cg.g.vertex_name(v).to_string(),
                        json!(w.assignment[v.0 as usize]),
                    )
                })
                .collect();
        let rotation: serde_json::Map<String, serde_json::Value> =
            cg.g.vertices()
                .map(|v| {
                    let ring: Vec<String> = w.rotation.order[v.0 as usize]
                        .iter()
                        .map(|d| cg.g.edge_name(d.edge).to_string())
                        .collect();
                    (cg.g.vertex_name(v).to_string(), json!(ring))
                })
                .collect();
        json!({ "assignment": assignment, "rotation": rotation })
    });
    let psi: Vec<serde_json::Value> = report
        .psi_sizes
        .iter()
        .map(|(node, kind, size)| json!({ "node": node, "kind": kind.to_string(), "size": size }))
        .collect();
    let out = json!({
        "verdict": if report.feasible { "yes" } else { "no" },
        "n": cg.g.n_vertices(),
        "m": cg.g.n_edges(),
        "d_max": report.d_max_input,
        "d_max_preprocessed": report.d_max_preprocessed,
        "observed_width": report.observed_width,
        "timings_ms": {
            "decompose": report.t_decompose.as_secs_f64() * 1e3,
            "preprocess": report.t_preprocess.as_secs_f64() * 1e3,
            "psi": report.t_psi.as_secs_f64() * 1e3,
        },
        "psi_sizes": psi,
        "oracle_agreement": agreement,
        "warnings": report.warnings,
        "witness": witness_json,
    });
    if args.json {
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!("verdict: {}", if report.feasible { "yes" } else { "no" });
        println!(
            "n={} m={} D_max={} (after preprocessing {}) width={}",
            cg.g.n_vertices(),
            cg.g.n_edges(),
            report.d_max_input,
            report.d_max_preprocessed,
            report.observed_width
        );
        println!(
            "timings: decompose {:?}, preprocess {:?}, psi {:?}",
            report.t_decompose, report.t_preprocess, report.t_psi
        );
        for (node, kind, size) in &report.psi_sizes {
            println!("  psi[{}:{}] = {}", kind, node, size);
        }
        if let Some(a) = agreement {
            println!("oracle agreement: {}", a);
        }
        for w in &report.warnings {
            println!("warning: {}", w);
        }
        if let Some(w) = &witness {
            println!("witness:");
            for v in cg.g.vertices() {
                let ring: Vec<&str> = w.rotation.order[v.0 as usize]
                    .iter()
                    .map(|d| cg.g.edge_name(d.edge))
                    .collect();
                println!(
                    "  {} tree #{} rotation ({})",
                    cg.g.vertex_name(v),
                    w.assignment[v.0 as usize],
                    ring.join(" ")
                );
            }
        }
    }
    if report.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_gen(cmd: &GenCommand) -> ExitCode {
    match cmd {
        GenCommand::ThreeEc {
            drawing,
            p_only,
            out,
        } => {
            let src = match read(drawing) {
                Ok(s) => s,
                Err(c) => return c,
            };
            let dg = match formats::parse_drawn_cubic(&src) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("parse error: {}", e);
                    return ExitCode::from(2);
                }
            };
            match gen_3ec(&dg, *p_only) {
                Ok(cg) => write_out(out, &formats::write_choosable(&cg)),
                Err(e) => {
                    eprintln!("generator error: {}", e);
                    ExitCode::from(2)
                }
            }
        }
        GenCommand::Listcol {
            instance,
            p_only,
            out,
        } => {
            let src = match read(instance) {
                Ok(s) => s,
                Err(c) => return c,
            };
            let inst = match formats::parse_listcol(&src) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("parse error: {}", e);
                    return ExitCode::from(2);
                }
            };
            match gen_listcol(&inst, *p_only) {
                Ok(cg) => write_out(out, &formats::write_choosable(&cg)),
                Err(e) => {
                    eprintln!("generator error: {}", e);
                    ExitCode::from(2)
                }
            }
        }
        GenCommand::Random {
            seed,
            n,
            m,
            d_max,
            tree_size,
            out,
        } => {
            let params = RandomParams {
                n: *n,
                m: *m,
                d_max: *d_max,
                tree_size: *tree_size,
                ..RandomParams::default()
            };
            match gen_random(*seed, params) {
                Ok(cg) => {
                    let mut body = format!("# seed {}\n", seed);
                    body.push_str(&formats::write_choosable(&cg));
                    write_out(out, &body)
                }
                Err(e) => {
                    eprintln!("generator error: {}", e);
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn cmd_ntx(cmd: &NtxCommand) -> ExitCode {
    let NtxCommand::Test {
        file,
        free_sides,
        witness,
        json,
        tree_budget,
    } = cmd;
    let src = match read(file) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let ntg = match formats::parse_nodetrix(&src) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("parse error: {}", e);
            return ExitCode::from(2);
        }
    };
    if !*free_sides && !ntg.sides_fixed() {
        eprintln!("error: missing side annotations; pass --free-sides to search sides");
        return ExitCode::from(2);
    }
    let opts = DpOptions::default();
    let verdict = if *free_sides {
        nodetrix::test_free_sides(&ntg, *tree_budget, &opts)
    } else {
        nodetrix::test_fixed_sides(&ntg, *witness, &opts)
    };
    match verdict {
        Ok(NtxVerdict::Yes(layout)) => {
            let layout_json = layout.as_ref().as_ref().map(|l| {
                json!({
                    "permutations": l.permutations,
                    "side_orders": l
                        .side_orders
                        .iter()
                        .map(|((c, v, s), es)| json!({
                            "cluster": c, "vertex": v, "side": s.to_string(), "edges": es
                        }))
                        .collect::<Vec<_>>(),
                })
            });
            if *json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "verdict": "yes",
                        "mode": if *free_sides { "free-sides" } else { "fixed-sides" },
                        "layout": layout_json,
                    }))
                    .unwrap()
                );
            } else {
                println!("verdict: yes");
                if let Some(l) = layout.as_ref() {
                    for (c, perm) in &l.permutations {
                        println!("  matrix {}: order ({})", c, perm.join(" "));
                    }
                    for ((c, v, s), es) in &l.side_orders {
                        println!("  {}.{}.{}: {}", c, v, s, es.join(" "));
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Ok(NtxVerdict::No) => {
            if *json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({"verdict": "no"})).unwrap()
                );
            } else {
                println!("verdict: no");
            }
            ExitCode::from(1)
        }
        Err(NtxError::Unsupported) => {
            eprintln!("unsupported: the constraint graph is not biconnected");
            ExitCode::from(3)
        }
        Err(NtxError::MissingSide(e)) => {
            eprintln!("error: edge {} is missing a side annotation", e);
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}

fn cmd_info(args: &InfoArgs) -> ExitCode {
    let src = match read(&args.file) {
        Ok(s) => s,
        Err(c) => return c,
    };
    // Accept either a bare graph or a choosable-graph file.
    let g = match formats::parse_choosable(&src) {
        Ok(cg) => cg.g,
        Err(_) => match formats::parse_graph(&src) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("parse error: {}", e);
                return ExitCode::from(2);
            }
        },
    };
    if g.n_edges() < 2 {
        eprintln!("unsupported: need at least two edges");
        return ExitCode::from(3);
    }
    let tree = match SpqrTree::decompose(&g) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("unsupported: {}", e);
            return ExitCode::from(3);
        }
    };
    println!("SPQR tree (rooted at the reference edge's Q-node):");
    print!("{}", tree.dump(&g));
    println!("embedding trees:");
    for v in g.vertices() {
        let et = tree.embedding_tree(&g, v).unwrap();
        let name = |l: fpq_planarity::fpq::LeafId| g.edge_name(EdgeId(l.0)).to_string();
        println!(
            "  {}: {}",
            g.vertex_name(v),
            fpq_planarity::fpq::tree_to_sexpr_named(&et, &name)
        );
    }
    println!("branch decompositions of rigid skeletons:");
    for mu in tree.postorder() {
        let node = tree.node(mu);
        if node.kind != SpqrKind::R {
            continue;
        }
        let edges: Vec<_> = node.children.iter().map(|&c| tree.node(c).poles).collect();
        let outside = vec![node.poles];
        let faces = tree.skeleton_faces(mu);
        let (sc, _) = scd_decompose(&edges, &outside, &faces, ScdOptions::default());
        println!("  R-node #{} width {}", mu, sc.width());
        print!("{}", sc.dump());
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Gen(cmd) => cmd_gen(cmd),
        Command::Ntx(cmd) => cmd_ntx(cmd),
        Command::Info(args) => cmd_info(args),
    }
}
