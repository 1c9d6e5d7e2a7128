use std::path::Path;
use std::process::{Command, Output};

fn gexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gexp"))
        .args(args)
        .output()
        .expect("gexp runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn eval_prints_value_and_grid() {
    let o = gexp(&["eval", "--payoff", "x2", "--T", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert_eq!(v["schema_version"], 1);
    assert!(v["cfl"].as_f64().unwrap() <= 1.0);
    assert!(v["grid"]["nodes"].as_u64().unwrap() >= 400);
    assert_eq!(v["boundary_check"]["enabled"], true);
}

#[test]
fn eval_writes_slices() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("slices.csv");
    let o = gexp(&[
        "eval",
        "--payoff",
        "abs",
        "--nodes",
        "40",
        "--slices",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(p).unwrap();
    assert!(text.starts_with("t,x,u"));
    assert!(text.lines().count() > 40);
}

#[test]
fn simulate_is_byte_identical() {
    let args = [
        "simulate",
        "--control",
        "const:sigma_hi",
        "--paths",
        "10",
        "--seed",
        "7",
    ];
    let (a, b) = (gexp(&args), gexp(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("path_id,t,W,h,B,qv"));
    assert_eq!(text.lines().count(), 1 + 10 * 65);
    let other = gexp(&[
        "simulate",
        "--control",
        "const:sigma_hi",
        "--paths",
        "10",
        "--seed",
        "8",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn estimate_reports_winner() {
    let o = gexp(&["estimate", "--functional", "qv", "--paths", "100"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["side"], "upper");
    let lower = gexp(&[
        "estimate",
        "--functional",
        "qv",
        "--paths",
        "100",
        "--lower",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&lower.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["side"], "lower");
}

#[test]
fn emitted_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let first = gexp(&[
        "--emit-config",
        "--seed",
        "9",
        "--paths",
        "1234",
        "--sigma-hi-sq",
        "3",
        "eval",
        "--payoff",
        "x2",
    ]);
    assert!(first.status.success());
    let path = write(tmp.path(), "cfg.toml", &stdout(&first));
    let second = gexp(&["--emit-config", "--config", &path, "eval", "--payoff", "x2"]);
    assert_eq!(first.stdout, second.stdout);
    assert!(stdout(&first).contains("seed = 9"));

    let via_file = gexp(&["--config", &path, "eval", "--payoff", "x2"]);
    let v: serde_json::Value = serde_json::from_slice(&via_file.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 3.0).abs() < 3e-3);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "cfg.toml", "[mc]\nseed = 5\nn_paths = 10\n");
    let o = gexp(&[
        "--emit-config",
        "--config",
        &path,
        "--seed",
        "6",
        "eval",
        "--payoff",
        "x",
    ]);
    let text = stdout(&o);
    assert!(
        text.contains("seed = 6") && text.contains("n_paths = 10"),
        "{text}"
    );
}

#[test]
fn lab_writes_layout_and_cor33_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = gexp(&[
        "lab",
        "cor33",
        "--n",
        "2,5,10,20",
        "--paths",
        "300",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("cor33").join("42");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    let bounds: Vec<f64> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["name"].as_str().unwrap().ends_with("error >= bound"))
        .map(|c| c["bound"].as_f64().unwrap())
        .collect();
    for (b, w) in bounds.iter().zip([0.25, 0.40, 0.45, 0.475]) {
        assert!((b - w).abs() < 1e-12, "{bounds:?}");
    }
    assert_eq!(bounds.len(), 4);
    let cfg = std::fs::read_to_string(dir.join("config.effective")).unwrap();
    assert!(
        cfg.contains("n = [") && cfg.contains("n_paths = 300"),
        "{cfg}"
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "unknown.toml", "[mc]\nbogus = 1\n");
    assert_eq!(
        gexp(&["--config", &unknown, "eval", "--payoff", "x2"])
            .status
            .code(),
        Some(2)
    );
    let band = gexp(&["--sigma-hi-sq", "0.5", "eval", "--payoff", "x2"]);
    assert_eq!(band.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&band.stderr).contains("band"));
    assert_eq!(gexp(&["lab", "nope"]).status.code(), Some(2));
    assert_eq!(gexp(&["eval", "--payoff", "cosh"]).status.code(), Some(2));
    assert_eq!(
        gexp(&["simulate", "--control", "const:3", "--paths", "2"])
            .status
            .code(),
        Some(2)
    );

    let narrow = write(
        tmp.path(),
        "narrow.toml",
        "[pde]\ndomain_width_multiplier = 0.5\n",
    );
    let o = gexp(&["--config", &narrow, "eval", "--payoff", "x4"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain too narrow"));

    // levels in the wrong order make the decay check fail
    let out = tmp.path().to_str().unwrap();
    let o = gexp(&["lab", "thm44", "--n", "8,4", "--paths", "300", "--out", out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL thm44"));
}
