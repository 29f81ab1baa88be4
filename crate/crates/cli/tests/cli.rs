use std::path::Path;
use std::process::{Command, Output};

fn oaadmm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oaadmm")).args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn solve_writes_a_converged_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = oaadmm(&["solve", &data("consensus.toml")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("converged true"), "{stdout}");
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,primal_residual_inf,dual_residual_inf,objective,rho_min,rho_max"));
    assert!(trace.lines().count() > 2);
}

#[test]
fn solve_reads_json_too() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("consensus.toml")).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    let json = dir.path().join("problem.json");
    std::fs::write(&json, serde_json::to_string(&value).unwrap()).unwrap();
    let out = oaadmm(&["solve", json.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scenario_resolves_and_seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = oaadmm(&["scenario", &data("left_turn.toml"), "--seed", "9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("resolved"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("south-left-west-forward.csv")).unwrap();
    assert!(csv.starts_with("tick,vehicle,x,y,v,min_clearance"));
}

#[test]
fn baseline_benchmark_emits_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = oaadmm(&["benchmark", "--protocol", "timeslot", "--fidelity", "low", "--repetitions", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["runs-timeslot-l.csv", "matrix-timeslot-l.csv", "estimate.csv", "summary.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let runs = std::fs::read_to_string(dir.path().join("runs-timeslot-l.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 27);
}

#[test]
fn invalid_clock_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = oaadmm(&["scenario", &data("left_turn.toml"), "--physics-hz", "30"], dir.path());
    assert!(!out.status.success());
}
