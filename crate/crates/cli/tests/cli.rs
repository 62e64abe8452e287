use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dgsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgsplit")).args(args).output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn schedule_of_the_example_graph() {
    let graph = configs().join("schedule_example.txt");
    let out = dgsplit(&["schedule", graph.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "(3,5,130), (2,4,90)\n(1,3,120), (4,6,85)\n(3,4,100), (5,6,110), (1,2,100)\n(4,5,20), (2,3,15)\n(1,4,10), (3,6,10)\n"
    );
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("rounds.txt");
    let out = dgsplit(&["schedule", graph.to_str().unwrap(), "--output", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(file).unwrap().lines().count(), 5);
}

#[test]
fn run_prints_a_report_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    for method in ["cn", "ds"] {
        let out = dgsplit(&[
            "run", "--preset", "standing-wave", "--method", method, "--subdomains", "2", "--tau", "0.05", "--t-end",
            "0.5", "--csv", csv.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = stdout(&out);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("name,method,degree,cells,h_min,tau"));
        assert!(lines.next().unwrap().starts_with(&format!("standing_wave,{method},2,128,")));
    }
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 3);
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("standing_wave_ds.toml");
    let out = dgsplit(&[
        "run", "--config", config.to_str().unwrap(), "--t-end", "0.05", "--output", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["standing_wave_ds_000004.vtk", "standing_wave_ds_coefficients.csv", "standing_wave_ds_diagnostics.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn exit_codes() {
    let bad = dgsplit(&["run", "--tau=-1"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("`tau`"));
    let missing = dgsplit(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    let solver = dgsplit(&["run", "--tol", "1e-15", "--maxit", "1", "--t-end", "0.1"]);
    assert_eq!(solver.status.code(), Some(3));
    let unstable = dgsplit(&["run", "--method", "lf", "--tau", "0.05"]);
    assert_eq!(unstable.status.code(), Some(4));
}

#[test]
fn converge_and_compare_tables() {
    let out = dgsplit(&["converge", "--sweep", "tau", "--levels", "2", "--tau", "0.1", "--t-end", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 3);
    let out = dgsplit(&[
        "compare", "--method", "ds", "--subdomains", "4", "--tau", "0.05", "--t-end", "0.5", "--sweep-layers", "1,2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "subdomains,layers,rel_u_a,rel_v_l2,rel_combined,rel_l2_u");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn mesh_generate_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("box.msh");
    let out = dgsplit(&["mesh", "--nx", "3", "--ny", "2", "--extent", "0,0,3,2", "--output", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("cells      12"));
    let out = dgsplit(&["mesh", "--inspect", file.to_str().unwrap(), "--refine", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("cells      48"));
}
