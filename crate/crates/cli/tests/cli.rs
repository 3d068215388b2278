use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn bierte(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bierte"))
        .args(args)
        .output()
        .expect("runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

#[test]
fn compile_matches_golden_dump() {
    let out = bierte(&["compile", path(&fixture("forwarding.topo"))]);
    assert!(out.status.success());
    let want = std::fs::read_to_string(fixture("golden/forwarding.dump")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want);
}

#[test]
fn strict_baseline_succeeds_and_writes_trace() {
    let trace = tmp("baseline.trace");
    let out = bierte(&[
        "simulate",
        path(&fixture("forwarding.topo")),
        path(&fixture("baseline.scn")),
        "--strict",
        "--trace",
        path(&trace),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let want = std::fs::read_to_string(fixture("golden/forwarding_baseline.report")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want);
    let want = std::fs::read_to_string(fixture("golden/forwarding_baseline.trace")).unwrap();
    assert_eq!(std::fs::read_to_string(trace).unwrap(), want);
}

#[test]
fn strict_failure_exits_one() {
    // BFR2 sits on both receivers' paths and forwarding has no protection
    let scn = tmp("bfr2_down.scn");
    std::fs::write(
        &scn,
        "[[events]]\nkind = \"node_down\"\nnode = \"BFR2\"\n\n[[events]]\nkind = \"inject\"\ngroup = \"G\"\n",
    )
    .unwrap();
    let topo = fixture("forwarding.topo");
    let args = ["simulate", path(&topo), path(&scn)];
    assert_eq!(bierte(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(bierte(&strict).status.code(), Some(1));
}

#[test]
fn bad_input_exits_two_with_location() {
    let bad = tmp("bad.topo");
    std::fs::write(&bad, "bsl = 8\n[[nodes]]\nid = 3\n").unwrap();
    let out = bierte(&["compile", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.topo") && err.contains("line"), "{err}");

    let out = bierte(&["compile", "/nonexistent.topo"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn perf_prints_csv() {
    let out = bierte(&["perf", "--frames", "64,1536", "--bsl", "64,256"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        csv,
        "l_ipmc,bsl,r_max_gbps\n64,64,72.7273\n64,256,57.1429\n1536,64,98.4615\n1536,256,96.9697\n"
    );
    assert_eq!(bierte(&["perf", "--bsl", "512"]).status.code(), Some(2));
}

#[test]
fn validate_subsets_repairs_an_arc() {
    let mut topo = String::from("bsl = 16\n");
    for i in 0..6 {
        let role = if i == 0 || i == 3 { "S-BFIR" } else { "BFR" };
        topo += &format!("[[nodes]]\nid = \"R{i}\"\nroles = [\"{role}\"]\n");
    }
    for i in 0..3 {
        topo += &format!(
            "[[links]]\nfrom = \"R{i}\"\nto = \"R{}\"\nbit = {}\nbidirectional = true\n",
            i + 1,
            i + 1
        );
    }
    for i in 3..6 {
        topo += &format!("[[underlay]]\na = \"R{i}\"\nb = \"R{}\"\n", (i + 1) % 6);
    }
    topo += "[[subsets]]\nsi = 0\ningresses = [\"R0\", \"R3\"]\n";
    let arc = tmp("arc.topo");
    let fixed = tmp("arc_fixed.topo");
    std::fs::write(&arc, topo).unwrap();

    let out = bierte(&["validate-subsets", path(&arc), "--repair", path(&fixed)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("two_edge_connected = false"), "{report}");
    assert!(report.contains("R5"), "{report}");

    let out = bierte(&["validate-subsets", path(&fixed)]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("two_edge_connected = true"), "{report}");
}
