//! End-to-end checks of the command-line interface.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmkit"))
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rmkit-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn lambda_json_reports_value_and_regime() {
    let out = bin()
        .args(["lambda", "--eps", "0.6", "--alpha", "0.9", "--kappa", "2.5", "--json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["regime"], "predator_extinction");
    let lambda = v["lambda"].as_f64().unwrap();
    assert!((lambda + 0.26).abs() < 0.01, "lambda = {lambda}");
}

#[test]
fn lambda_rejects_supercritical_noise() {
    let out = bin()
        .args(["lambda", "--eps", "1.5", "--alpha", "0.6", "--kappa", "4.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("undefined"), "stderr: {err}");
    assert!(err.contains("total extinction"), "stderr: {err}");
}

#[test]
fn classify_json_has_stable_fields() {
    let out = bin()
        .args(["classify", "--eps", "1.5", "--alpha", "0.6", "--kappa", "4.5", "--json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["regime"], "total_extinction");
    assert!(v["lambda"].is_null());
    let bounds = v["rate_bounds"].as_array().unwrap();
    assert_eq!(bounds.len(), 2);
    assert_eq!(bounds[0]["quantity"], "x1_log_rate");
    assert!((bounds[0]["bound"].as_f64().unwrap() + 0.125).abs() < 1e-12);
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = scratch_dir("repro");
    let run = |name: &str, seed: &str| {
        let out_path = dir.join(name);
        let out = bin()
            .args([
                "simulate", "--eps", "0.6", "--alpha", "0.3", "--kappa", "2.5", "--t", "2",
                "--seed", seed, "--out",
            ])
            .arg(&out_path)
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::read(&out_path).unwrap()
    };
    let a = run("a.csv", "7");
    let b = run("b.csv", "7");
    let c = run("c.csv", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with(b"# rmkit simulate\n# config_hash="));
}

#[test]
fn simulate_without_noise_equals_deterministic_overlay() {
    let dir = scratch_dir("det");
    let out_path = dir.join("traj.csv");
    let out = bin()
        .args([
            "simulate", "--eps", "0", "--alpha", "0.3", "--kappa", "2.5", "--t", "5",
            "--scheme", "plain", "--overlay-deterministic", "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stochastic = fs::read(&out_path).unwrap();
    let deterministic = fs::read(dir.join("traj.deterministic.csv")).unwrap();
    assert_eq!(stochastic, deterministic);
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = scratch_dir("config");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "eps = 0.6\nalpha = 0.9\nkappa = 2.5\n").unwrap();
    // All three from the file.
    let out = bin()
        .args(["--json", "--config"])
        .arg(&cfg)
        .args(["lambda"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["regime"], "predator_extinction");
    // Flag overrides the file's alpha: the regime flips.
    let out = bin()
        .args(["--json", "--config"])
        .arg(&cfg)
        .args(["lambda", "--alpha", "0.3"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["regime"], "persistence");
}

#[test]
fn phase_grid_covers_both_sides_of_the_contour() {
    let dir = scratch_dir("phase");
    let out_path = dir.join("grid.csv");
    let out = bin()
        .args([
            "phase", "--sweep", "eps-kappa", "--alpha", "0.5", "--p1-range", "0.2:1.3:6",
            "--p2-range", "1:8:6", "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_path).unwrap();
    let mut persistence = 0;
    let mut extinction = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("p1,")) {
        assert_eq!(line.split(',').count(), 4);
        if line.ends_with(",persistence") {
            persistence += 1;
        }
        if line.ends_with(",predator_extinction") {
            extinction += 1;
        }
    }
    assert!(persistence > 0 && extinction > 0, "grid: {text}");
}

#[test]
fn phase_single_cell_matches_reference_lambda() {
    let dir = scratch_dir("phase1");
    let out_path = dir.join("cell.csv");
    let out = bin()
        .args([
            "phase", "--sweep", "eps-kappa", "--alpha", "0.3", "--p1-range", "0.6:0.6:1",
            "--p2-range", "2.5:2.5:1", "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&out_path).unwrap();
    let row = text.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let lambda: f64 = fields[2].parse().unwrap();
    assert!((lambda - 0.34).abs() < 0.01, "row: {row}");
    assert_eq!(fields[3], "persistence");
}

#[test]
fn reach_documented_example_succeeds() {
    let dir = scratch_dir("reach");
    let out = bin()
        .args([
            "reach", "--eps", "0.6", "--alpha", "0.3", "--kappa", "0.5", "--x", "0.3,0.3",
            "--z", "1,2", "--vstar", "3", "--out-traj",
        ])
        .arg(dir.join("traj.csv"))
        .arg("--out-plan")
        .arg(dir.join("plan.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plan: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["success"], true);
    assert_eq!(plan["phases"].as_array().unwrap().len(), 3);
}

#[test]
fn reach_rejects_boundary_start() {
    let out = bin()
        .args([
            "reach", "--alpha", "0.3", "--kappa", "0.5", "--x", "0,0.3", "--z", "1,2",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly positive"));
}

#[test]
fn occupation_rejects_empty_ensemble() {
    let out = bin()
        .args([
            "occupation", "--eps", "0.6", "--alpha", "0.3", "--kappa", "2.5", "--seeds", "0",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least one path"));
}

#[test]
fn validate_fast_passes() {
    let out = bin().args(["validate", "--level", "fast"]).output().unwrap();
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("6/6 criteria passed"), "{text}");
}

#[test]
fn validate_json_is_structured() {
    let out = bin().args(["validate", "--level", "fast", "--json"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let results = v.as_array().unwrap();
    assert_eq!(results.len(), 6);
    assert!(results.iter().all(|r| r["passed"] == true));
    assert_eq!(results[0]["id"], 1);
}

#[test]
fn occupation_output_is_thread_count_invariant() {
    let dir = scratch_dir("threads");
    let run = |threads: &str, name: &str| {
        let hist = dir.join(format!("{name}.csv"));
        let diag = dir.join(format!("{name}.json"));
        let out = bin()
            .args(["--threads", threads])
            .args([
                "occupation", "--eps", "0.6", "--alpha", "0.3", "--kappa", "2.5", "--t", "5",
                "--seeds", "4", "--seed", "3", "--out-hist",
            ])
            .arg(&hist)
            .arg("--out-json")
            .arg(&diag)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(&hist).unwrap()
    };
    assert_eq!(run("1", "one"), run("4", "four"));
}

#[test]
fn seed_env_var_is_honored() {
    let dir = scratch_dir("env");
    let run = |env_seed: Option<&str>, flag_seed: Option<&str>, name: &str| {
        let out_path = dir.join(name);
        let mut cmd = bin();
        cmd.args([
            "simulate", "--eps", "0.6", "--alpha", "0.3", "--kappa", "2.5", "--t", "1", "--out",
        ])
        .arg(&out_path);
        cmd.env_remove("RMKIT_SEED");
        if let Some(s) = env_seed {
            cmd.env("RMKIT_SEED", s);
        }
        if let Some(s) = flag_seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(&out_path).unwrap()
    };
    let via_env = run(Some("123"), None, "env.csv");
    let via_flag = run(None, Some("123"), "flag.csv");
    assert_eq!(via_env, via_flag);
}
