use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn indnet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/seq_gap_demo.json")
}

#[test]
fn gen_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["a.json", "b.json"] {
        assert!(indnet(&["gen", "--seed", "5", "--size", "tiny", "-o", f], dir.path()).status.success());
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    let v = indnet(&["validate", "a.json"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).starts_with("ok:"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"name\": 1}").unwrap();
    assert_eq!(indnet(&["validate", "bad.json"], dir.path()).status.code(), Some(1));
    assert_eq!(indnet(&["solve", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(indnet(&["solve", "--method", "cplex", "x.json"], dir.path()).status.code(), Some(2));
    assert_eq!(indnet(&["frobnicate"], dir.path()).status.code(), Some(2));
    let d = demo();
    let d = d.to_str().unwrap();
    assert_eq!(indnet(&["solve", d, "--type", "4"], dir.path()).status.code(), Some(2));
    assert_eq!(indnet(&["solve", d, "--percentage", "120"], dir.path()).status.code(), Some(2));
}

#[test]
fn no_incumbent_exits_one_and_reports_dashes() {
    let dir = tempfile::tempdir().unwrap();
    let d = demo();
    let o = indnet(
        &["solve", d.to_str().unwrap(), "--time-limit", "0", "--record", "r.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let csv = stdout(&indnet(&["report", "r.json", "--format", "csv"], dir.path()));
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row, "seq_gap_demo,direct,-,-,0.00,-,0,-,-,-,-,-,-,-");
}

#[test]
fn solve_writes_record_solution_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = demo();
    let d = d.to_str().unwrap();
    let o = indnet(
        &[
            "solve", d, "--method", "benders", "--percentage", "50", "--type", "3", "--solution", "s.json",
            "--cut-log", "cuts.jsonl",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("obj_v=129"));
    // default record name
    assert!(dir.path().join("seq_gap_demo-benders.record.json").exists());
    let p = indnet(&["plot", "s.json", "-o", "s.svg"], dir.path());
    assert!(p.status.success());
    let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
    assert!(svg.contains("id=\"rapid-line\"") && svg.contains("id=\"slow-line\""));
    for line in std::fs::read_to_string(dir.path().join("cuts.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["rhs"].is_number());
    }
}

#[test]
fn sequential_and_oracle_on_demo() {
    let dir = tempfile::tempdir().unwrap();
    let d = demo();
    let d = d.to_str().unwrap();
    assert!(stdout(&indnet(&["sequential", d], dir.path())).contains("obj_v=101"));
    assert!(stdout(&indnet(&["oracle", d], dir.path())).contains("obj_v=129"));
    let table = stdout(&indnet(
        &[
            "report",
            "seq_gap_demo-sequential.record.json",
            "seq_gap_demo-oracle.record.json",
            "--format",
            "table",
        ],
        dir.path(),
    ));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].chars().all(|c| c == '-' || c == ' '));
}

#[test]
fn filter_writes_single_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let d = demo();
    let d = d.to_str().unwrap();
    let o = indnet(&["filter", d, "--min-demand", "30", "-o", "f.json"], dir.path());
    assert!(o.status.success());
    let n: usize = stdout(&o).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(indnet(&["validate", "f.json"], dir.path()).status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(v["demands"].as_array().unwrap().len(), n);
    let two = indnet(&["filter", d, "--min-demand", "30,40", "-o", "g.json"], dir.path());
    assert_eq!(two.status.code(), Some(2));
}

#[test]
fn lp_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = demo();
    let d = d.to_str().unwrap();
    let lp = indnet(&["lp", d], dir.path());
    assert!(stdout(&lp).starts_with("status=Optimal"));
    assert!(indnet(&["export", d, "-o", "m.mps"], dir.path()).status.success());
    let mps = std::fs::read_to_string(dir.path().join("m.mps")).unwrap();
    assert!(mps.starts_with("NAME") && mps.trim_end().ends_with("ENDATA"));
}
