//! End-to-end checks of the `fic` binary: outputs, sidecars and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL: &str = r#"{
    "plant": {"type": "point_mass", "inertia": [1.0]},
    "controller": {"type": "fic", "stiffness": [{"k_const": 0.0, "w_max": 30.0, "x_b": 0.05}]},
    "reference": {"type": "static", "pose": [0.0]},
    "perturbations": {"pulses": [{"start": 0.0, "duration": 0.0005, "wrench": [5.0]}]},
    "duration": 0.0009,
    "record_every": 1
}"#;

fn fic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fic")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn run_writes_header_rows_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "min.json", MINIMAL);
    let out = dir.path().join("run.csv");
    let o = fic(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(!text.contains('\r'));
    assert_eq!(
        text.lines().next().unwrap(),
        "t,x_d_0,x_0,x_err_0,xdot_0,phase_s_0,wrench_0,contact_f,V,E_in_cum,E_rel_cum"
    );
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!(meta["failure"].is_null());
}

#[test]
fn same_seed_rerun_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = repo_configs().join("static.json");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert_eq!(fic(&["run", "--config", s(&cfg), "--out", s(out), "--seed", "3"]).status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    fic(&["run", "--config", s(&cfg), "--out", s(&c), "--seed", "4"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn json_format_parses_back() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "min.json", MINIMAL);
    let o = fic(&["run", "--config", s(&cfg), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
    assert!(stderr(&o).contains("config_hash "));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", &MINIMAL.replace(r#""duration": 0.0009"#, r#""dampingg": [1.0], "duration": 0.0009"#));
    let o = fic(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dampingg"), "{}", stderr(&o));
}

#[test]
fn feedback_above_physics_rate_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "fast.json", &MINIMAL.replace(r#""duration": 0.0009"#, r#""feedback_hz": 20000, "dt": 1e-4, "duration": 0.0009"#));
    let o = fic(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/feedback_hz"), "{}", stderr(&o));
}

#[test]
fn missing_file_and_bad_flags_exit_1() {
    assert_eq!(fic(&["run", "--config", "/nonexistent/x.json"]).status.code(), Some(1));
    assert_eq!(fic(&["run"]).status.code(), Some(1));
    assert_eq!(fic(&["energy-drift", "--rates", "0,10"]).status.code(), Some(1));
    assert_eq!(fic(&["--help"]).status.code(), Some(0));
}

#[test]
fn singular_arm_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "stretched.json",
        r#"{
            "plant": {"type": "arm", "q0": [0.0, 0.0, 0.0]},
            "controller": {"type": "fic", "stiffness": [{"k_const": 0.0, "w_max": 30.0, "x_b": 0.05}, {"k_const": 0.0, "w_max": 30.0, "x_b": 0.05}]},
            "reference": {"type": "static", "pose": [3.0, 0.0]},
            "duration": 0.01
        }"#,
    );
    let out = dir.path().join("r.csv");
    let o = fic(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["failure"]["kind"], "singular");
}

#[test]
fn energy_drift_table() {
    let o = fic(&["energy-drift", "--rates", "20,100,1000,10000"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    // Exact FIC work: identical at every rate.
    assert!(rows.iter().all(|r| r[3] == rows[0][3] && r[4] == rows[0][4]));
    let at_10k = rows[3][1];
    assert!((at_10k - 28.6333).abs() / 28.6333 < 5e-3, "{at_10k}");
    assert!(rows[0][2].abs() > rows[1][2].abs() && rows[1][2].abs() > rows[2][2].abs());
}

#[test]
fn phase_portrait_curves_nest_by_energy() {
    let o = fic(&["phase-portrait", "--energies", "0.25,0.5,0.75,1.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    let apex = |e: f64, branch: f64| {
        rows.iter().filter(|r| r[0] == e && r[1] == branch).map(|r| r[3].abs()).fold(0.0, f64::max)
    };
    for branch in [1.0, -1.0] {
        let a: Vec<f64> = [0.25, 0.5, 0.75, 1.0].iter().map(|e| apex(*e, branch)).collect();
        assert!(a.windows(2).all(|w| w[0] < w[1]), "{a:?}");
    }
    assert_eq!(fic(&["phase-portrait", "--energies", "-1"]).status.code(), Some(1));
}

#[test]
fn calibrate_single_boundary_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let mut cal: serde_json::Value = serde_json::from_str(&fs::read_to_string(repo_configs().join("calibrate.json")).unwrap()).unwrap();
    cal["x_b"] = serde_json::json!([0.2]);
    let cfg = write(&dir, "cal.json", &cal.to_string());
    let out = dir.path().join("cal.csv");
    let o = fic(&["calibrate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text, "x_b,w_max\n2.00000000e-1,3.00000000e1\n");
    assert!(dir.path().join("cal.csv.meta.json").exists());
}

#[test]
fn sweep_writes_records_in_order() {
    let dir = TempDir::new().unwrap();
    let one: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    let mut two = one.clone();
    two["name"] = "second".into();
    let cfg = write(&dir, "sweep.json", &serde_json::json!({ "scenarios": [one, two] }).to_string());
    let out = dir.path().join("sweep");
    let o = fic(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,,") && lines[2].starts_with("1,second,"));
    for f in ["000.csv", "000.csv.meta.json", "001.csv", "001.csv.meta.json", "summary.csv.meta.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = repo_configs();
    for entry in fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let ok = match name.as_str() {
            "bandwidth_sweep.json" => fic::config::parse_sweep(&p).is_ok(),
            "calibrate.json" => fic::config::parse_calibration(&p).is_ok(),
            _ => fic::config::parse_config(&p).is_ok(),
        };
        assert!(ok, "{name}");
    }
}
