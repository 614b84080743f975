use std::fs;
use std::process::Command;

fn fpx() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fpx"));
    c.env_remove("FPX_THREADS");
    c
}

const SPEC: &str = r#"
name = "ou-cli"
model = "ou"
y0 = [1.5]
times = [0.5, 2.0]
methods = ["approx", "exact"]
params = { theta = 2.0 }
grid = { lo = [-4.0], hi = [4.0], n = [81] }
"#;

#[test]
fn run_writes_tables_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, SPEC).unwrap();
    let out = dir.path().join("out");
    let status = fpx()
        .args(["run", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(out.join("approx-tau0.5.csv")).unwrap();
    assert!(csv.starts_with("# model=ou, method=approx, tau=0.5, y0=1.5\ny1,f\n"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reference"], "exact");
    let l1 = summary["results"][0]["l1_vs_reference"].as_f64().unwrap();
    assert!(l1 < 1e-12);
}

#[test]
fn spec_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, SPEC.replace("\"exact\"", "\"nope\"")).unwrap();
    let out = fpx().args(["run", spec.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("methods[1]"));
    let out = fpx().args(["preset", "fig99"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = fpx().args(["theta", "sech", "-p", "gamma_hat=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("tight.toml");
    // The start sits next to the box edge, so mass reaches the boundary.
    fs::write(
        &spec,
        r#"
name = "edge"
model = "ou"
y0 = [3.0]
times = [0.5]
methods = ["solver"]
params = { theta = 1.0 }
solver = { half_width = [4.0], modes = [128], dt = 1e-3, ic_width = 0.15, edge_ratio = 1.0 }
"#,
    )
    .unwrap();
    let out = fpx()
        .args(["run", spec.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn theta_and_presets() {
    let out = fpx()
        .args(["theta", "dwell1d", "-p", "alpha=[2,-2]", "-p", "beta=[1,1]", "-p", "gamma=0.7071067811865476"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r["theta"][0][0].as_f64().unwrap() - 1.502378852866).abs() < 1e-6);

    let out = fpx().args(["preset", "list"]).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 12);
    let out = fpx().args(["preset", "fig-dw3well", "--print"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("times = [0.3, 2.0, 5.0, 10.0]"), "{text}");
}

#[test]
fn threads_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = fpx()
        .env("FPX_THREADS", "0x")
        .args(["preset", "fig4", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = fpx()
        .env("FPX_THREADS", "1")
        .args(["preset", "fig4", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("solver-tau5.csv").exists());
}

#[test]
fn converge_reports_differences() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("c.toml");
    fs::write(
        &spec,
        r#"
name = "conv"
model = "ou"
y0 = [2.0]
times = [1.0]
methods = ["solver"]
params = { theta = 1.0 }
solver = { half_width = [10.0], modes = [256], dt = 1e-3, ic_width = 0.2, conv_tol = 1e-8 }
"#,
    )
    .unwrap();
    let out = fpx().args(["converge", spec.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("accepted=256"), "{text}");
}
