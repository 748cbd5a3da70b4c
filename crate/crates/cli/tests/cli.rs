use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn pbreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pbreg"))
}

fn out_dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn bad_config_exits_with_error() {
    let dir = out_dir();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[operator]\nname = \"cubic\"\n").unwrap();
    let st = pbreg().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("cubic"));
    let st = pbreg().args(["solve", "--resolution", "0.3"]).output().unwrap();
    assert!(!st.status.success());
}

#[test]
fn constants_suite_writes_reports() {
    let dir = out_dir();
    let st = pbreg().args(["verify-constants", "--quick", "--out"]).arg(dir.path()).output().unwrap();
    let stdout = String::from_utf8_lossy(&st.stdout);
    assert!(stdout.contains("criterion 9"), "{stdout}");
    let base: PathBuf = dir.path().join("constants");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(base.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["suite"], "constants");
    assert_eq!(summary["passed"].as_bool(), Some(st.status.success()));
    assert!(summary["extra"]["ledger"]["entries"]["eta2"]["value"].is_number());
    let csv = fs::read_to_string(base.join("closed_form.csv")).unwrap();
    assert!(csv.starts_with("n,h,tau,amplitude,operator,key"));
}

#[test]
fn json_config_and_identical_reruns() {
    let dir = out_dir();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "quick": true}"#).unwrap();
    let run = |sub: &str| {
        let o = dir.path().join(sub);
        let st = pbreg().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&o).output().unwrap();
        assert!(st.status.success());
        fs::read_to_string(o.join("solver").join("comparison.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn iqa_at_fine_resolution_passes() {
    let dir = out_dir();
    let st = pbreg().args(["iqa", "--resolution", "1/256", "--out"]).arg(dir.path()).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stdout));
    let levels = fs::read_to_string(dir.path().join("iqa").join("iqa_levels.csv")).unwrap();
    assert!(levels.lines().skip(1).filter(|l| l.ends_with(",true")).count() >= 3);
}
