use std::fs;
use std::path::Path;
use std::process::Command;

const TRAPPED: &str = r#"
[beam]
sigma = 1.0

[generic]
k = 1.0
epsilon = 1
gamma = 3.0
alpha = 0.7

[grid]
n = 128
extent = 24.0
du = 0.01
record_stride = 10

[run]
u_span = 2.0
snapshots = [1.0]
"#;

fn run(cmd: &str, config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_paraxial"))
        .args([cmd, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--threads", "2"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

#[test]
fn compare_writes_all_outputs() {
    let d = tempfile::tempdir().unwrap();
    let (code, msg) = run("compare", TRAPPED, d.path());
    assert_eq!(code, 0, "{msg}");
    let traj = read(d.path(), "trajectory.csv");
    assert_eq!(traj.lines().next().unwrap(), "u,r2,w2,Q,K,V,U,H0,MI4,invR");
    assert_eq!(traj.lines().count(), 1 + 21);
    assert!(read(d.path(), "comparison.csv").starts_with("u,w2_numeric,w2_abcd,"));
    let report = json(d.path(), "report.json");
    assert_eq!(report["pass"], true);
    assert!(report["max_rel_err_w2"].as_f64().unwrap() < 1e-4);
    assert!(d.path().join("out/field_0000.bin").exists());
    assert!(read(d.path(), "config.resolved.toml").contains("gamma = 3.0"));
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("propagate", TRAPPED, a.path()).0, 0);
    assert_eq!(run("propagate", TRAPPED, b.path()).0, 0);
    assert_eq!(read(a.path(), "trajectory.csv"), read(b.path(), "trajectory.csv"));
    assert_eq!(read(a.path(), "report.json"), read(b.path(), "report.json"));
}

#[test]
fn predict_leaves_field_moments_blank() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run("predict", TRAPPED, d.path()).0, 0);
    let traj = read(d.path(), "trajectory.csv");
    let row: Vec<&str> = traj.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    assert_eq!((row[4], row[5]), ("NaN", "NaN"));
    let report = json(d.path(), "report.json");
    assert!((report["oscillation_frequency"].as_f64().unwrap() - 1.4).abs() < 1e-12);
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let (code, msg) = run("propagate", &format!("{TRAPPED}\n[extra]\nkey = 1\n"), d.path());
    assert_eq!(code, 2);
    assert!(msg.contains("extra"), "{msg}");
    let (code, _) = run("analyze-tof", TRAPPED, d.path());
    assert_eq!(code, 2);
}

#[test]
fn domain_overflow_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let free = TRAPPED
        .replace("alpha = 0.7", "alpha = 0.0")
        .replace("u_span = 2.0", "u_span = 20.0");
    let (code, msg) = run("propagate", &free, d.path());
    assert_eq!(code, 3, "{msg}");
    assert!(msg.contains("boundary"), "{msg}");
}

#[test]
fn failed_checks_exit_4() {
    let d = tempfile::tempdir().unwrap();
    let strict = TRAPPED.replace("snapshots = [1.0]", "snapshots = [1.0]\ntolerance_w2 = 1e-12");
    let (code, _) = run("compare", &strict, d.path());
    assert_eq!(code, 4);
    let report = json(d.path(), "report.json");
    assert_eq!(report["pass"], false);
    assert_eq!(report["checks"][0]["pass"], false);
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{TRAPPED}\n[sweep]\nparameter = \"generic.gamma\"\nvalues = [0.0, 1.5, 3.0]\n");
    let (code, msg) = run("sweep", &cfg, d.path());
    assert_eq!(code, 0, "{msg}");
    let index = json(d.path(), "index.json");
    let points = index["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    for (i, p) in points.iter().enumerate() {
        assert_eq!(p["exit_code"], 0);
        let resolved = read(d.path(), &format!("point_{i:04}/config.resolved.toml"));
        assert!(resolved.contains(&format!("gamma = {:?}", [0.0, 1.5, 3.0][i])));
    }
}

#[test]
fn tof_reports_overestimation() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"
        [beam]
        sigma = 1.0
        [generic]
        k = 1.0
        epsilon = 1
        gamma = 2.2619467105846511
        alpha = 1.0
        [grid]
        n = 128
        extent = 16.0
        [tof]
        samples = [[0.0, 1.0], [1.0, 2.18], [2.0, 5.72]]
    "#;
    assert_eq!(run("analyze-tof", cfg, d.path()).0, 0);
    let a = &json(d.path(), "report.json")["analysis"];
    assert!((a["ratio"].as_f64().unwrap() - 0.18).abs() < 1e-6);
    assert!((a["overestimation"].as_f64().unwrap() - 1.18).abs() < 1e-6);
}
