//! End-to-end command-line checks: exit codes, JSON output, generator
//! round-trips through the file formats.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fpq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name);
    p.to_string_lossy().into_owned()
}

fn tmp(name: &str, content: &str) -> String {
    let dir = std::env::temp_dir().join("fpq-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn test_yes_instance_exits_zero() {
    let out = fpq(&["test", &fixture("fig4.choosable")]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: yes"));
}

#[test]
fn test_with_oracle_and_witness_json() {
    let out = fpq(&[
        "test",
        &fixture("fig4.choosable"),
        "--oracle",
        "--witness",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "yes");
    assert_eq!(v["oracle_agreement"], true);
    assert_eq!(v["witness"]["assignment"]["u2"], 1);
}

#[test]
fn test_no_instance_exits_one() {
    let no = "\
v a
v b
e e1 a b
e e2 a b
e e3 a b
d a (F e1 e2 e3)
d b (F e1 e2 e3)
";
    let out = fpq(&["test", &tmp("no.choosable", no)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_error_exits_two() {
    let bad = "v a\nv b\ne e1 a b\nd a (P e1\n";
    let out = fpq(&["test", &tmp("bad.choosable", bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn not_biconnected_exits_three() {
    let path = "\
v a
v b
v c
e e1 a b
e e2 b c
d a e1
d b (Q e1 e2)
d c e2
";
    let out = fpq(&["test", &tmp("path.choosable", path)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gen_3ec_k4_roundtrip() {
    let outfile = tmp("k4gen.choosable", "");
    let out = fpq(&["gen", "3ec", &fixture("k4.drawing"), "-o", &outfile]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = fpq(&["test", &outfile]);
    assert_eq!(run.status.code(), Some(0));
}

#[test]
fn gen_random_is_deterministic() {
    let a = fpq(&["gen", "random", "--seed", "7", "--n", "6"]);
    let b = fpq(&["gen", "random", "--seed", "7", "--n", "6"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    // And the output parses and runs.
    let f = tmp("rand.choosable", &String::from_utf8_lossy(&a.stdout));
    let run = fpq(&["test", &f, "--oracle"]);
    assert!(matches!(run.status.code(), Some(0) | Some(1)));
    assert!(String::from_utf8_lossy(&run.stdout).contains("oracle agreement: true"));
}

#[test]
fn gen_listcol_fig7_shape() {
    let out = fpq(&["gen", "listcol", &fixture("fig7.listcol")]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let body = String::from_utf8_lossy(&out.stdout);
    // u-v share colors 1 and 2: six strands; v-w share 3: three strands;
    // w-z share 3: three strands. 12 edges, each 'e' line.
    let edges = body.lines().filter(|l| l.starts_with("e ")).count();
    assert_eq!(edges, 12);
    // v has |L(v)| = 3 trees; z has one tree with a Q root.
    let d_v = body.lines().filter(|l| l.starts_with("d v ")).count();
    assert_eq!(d_v, 3);
    let d_z: Vec<&str> = body.lines().filter(|l| l.starts_with("d z ")).collect();
    assert_eq!(d_z.len(), 1);
    assert!(
        d_z[0].contains("(Q"),
        "z's only tree has a Q root: {}",
        d_z[0]
    );
}

#[test]
fn ntx_fixture_yes_with_witness() {
    let out = fpq(&["ntx", "test", &fixture("fig1.ntx"), "--witness", "--json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "yes");
    assert!(v["layout"]["permutations"]["A"].is_array());
}

#[test]
fn ntx_missing_sides_needs_flag() {
    let src = "\
c A a0
c B b0
ie e0 A.a0.? B.b0.?
";
    let f = tmp("free.ntx", src);
    let out = fpq(&["ntx", "test", &f]);
    assert_eq!(out.status.code(), Some(2));
    let out = fpq(&["ntx", "test", &f, "--free-sides"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn ntx_unsupported_exits_three() {
    let src = "\
c A a0
c B b0
c C c0
ie e0 A.a0.R B.b0.L
ie e1 B.b0.R C.c0.L
";
    let out = fpq(&["ntx", "test", &tmp("pathish.ntx", src)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn info_dumps_structures() {
    let out = fpq(&["info", &fixture("fig4.choosable")]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("SPQR tree"));
    assert!(stdout.contains("embedding trees:"));
    assert!(stdout.contains("R-node"));
}
