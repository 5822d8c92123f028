use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sigmalab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigmalab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn solve_reproduces_linear_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigmalab(&["solve", "--h", "0.05", "--g", "x1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats = json(&dir.path().join("stats.json"));
    assert!(stats["max_abs_u_minus_g"].as_f64().unwrap() <= 1e-10);
    for f in ["mesh.txt", "u.txt", "u.svg", "config.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let line = String::from_utf8_lossy(&o.stdout);
    assert!(line.starts_with("solve: 1261 vertices"), "{line}");
}

#[test]
fn solve_meyers_against_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "solve",
        "--domain",
        "annulus:r_in=0.2,r_out=1",
        "--h",
        "0.02",
        "--sigma",
        "meyers:alpha=2",
        "--g",
        "oracle",
    ];
    let o = sigmalab(&args, dir.path());
    assert_eq!(code(&o), 0);
    let stats = json(&dir.path().join("stats.json"));
    assert!(stats["oracle"]["l2"]["relative_l2"].as_f64().unwrap() <= 0.02);
}

#[test]
fn non_elliptic_sigma_is_a_config_error_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = sigmalab(&["solve", "--sigma", "aniso:l1=-1"], &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("config error: not elliptic"));
    assert!(!out.exists());
}

#[test]
fn bad_flags_and_descriptors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&sigmalab(&["solve", "--sigma", "nosuch"], dir.path())),
        2
    );
    assert_eq!(code(&sigmalab(&["solve", "--h", "-1"], dir.path())), 2);
    assert_eq!(code(&sigmalab(&["frobnicate"], dir.path())), 2);
    assert_eq!(code(&sigmalab(&[], dir.path())), 2);
}

#[test]
fn verify_exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigmalab(&["verify", "--g", "z2"], &dir.path().join("z2"));
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not injective"));

    let smooth = "smooth:eps=1,phi=0.4,cx=0.1,cy=0.2,w=0.5";
    let o = sigmalab(&["verify", "--sigma", smooth], &dir.path().join("smooth"));
    assert_eq!(code(&o), 0);
    let rep = json(&dir.path().join("smooth/lewy_report.json"));
    assert_eq!(rep["report"]["passes"], Value::Bool(true));
    assert!(rep["report"]["min_abs_det"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("smooth/jacobian.svg").exists());
}

#[test]
fn verify_meyers_determinant_near_analytic_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify",
        "--domain",
        "annulus:r_in=0.2,r_out=1",
        "--h",
        "0.02",
        "--sigma",
        "meyers:alpha=2",
        "--g",
        "oracle",
        "--margin",
        "0.05",
    ];
    assert_eq!(code(&sigmalab(&args, dir.path())), 0);
    let det = json(&dir.path().join("lewy_report.json"))["report"]["min_abs_det"]
        .as_f64()
        .unwrap();
    // 2 |x|^2 at the inset radius 0.25
    assert!((det - 0.125).abs() <= 0.15 * 0.125, "{det}");
}

#[test]
fn meyers_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&sigmalab(
            &["meyers", "--alpha", "2", "--refinements", "1"],
            &dir.path().join("a2")
        )),
        0
    );
    let conv = json(&dir.path().join("a2/convergence.json"));
    assert!(conv["levels"][1]["l2_ratio"].as_f64().unwrap() >= 3.0);
    assert!(dir.path().join("a2/convergence.txt").exists());

    assert_eq!(
        code(&sigmalab(
            &["meyers", "--alpha", "1", "--refinements", "1"],
            &dir.path().join("a1")
        )),
        0
    );
    let conv = json(&dir.path().join("a1/convergence.json"));
    for l in conv["levels"].as_array().unwrap() {
        for k in [
            "relative_l2_u1",
            "relative_l2_u2",
            "h1_u1",
            "h1_u2",
            "jacobian_relative_error",
        ] {
            assert!(l[k].as_f64().unwrap() <= 1e-10, "{k}: {}", l[k]);
        }
    }

    assert_eq!(
        code(&sigmalab(
            &["meyers", "--alpha", "0.5", "--refinements", "1"],
            &dir.path().join("a05")
        )),
        0
    );
    let rings = json(&dir.path().join("a05/convergence.json"))["rings"].clone();
    let means: Vec<f64> = rings
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["mean_jacobian"].as_f64().unwrap())
        .collect();
    assert!(means.windows(2).all(|w| w[0] > w[1]), "{means:?}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"command": "solve", "h": 0.1, "g": "x2", "svg": false}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = sigmalab(&["--config", cfg.to_str().unwrap(), "--g", "x1x2"], &out);
    assert_eq!(code(&o), 0);
    let resolved = json(&out.join("config.json"));
    assert_eq!(resolved["h"], 0.1);
    assert_eq!(resolved["g"], "x1x2");
    assert!(!out.join("u.svg").exists());

    fs::write(&cfg, r#"{"command": "solve", "hh": 0.1}"#).unwrap();
    assert_eq!(
        code(&sigmalab(&["--config", cfg.to_str().unwrap()], &out)),
        2
    );
}

#[test]
fn unimodal_command() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&sigmalab(&["unimodal", "--values", "0,1,1,0"], dir.path())),
        0
    );
    assert_eq!(
        code(&sigmalab(&["unimodal", "--values", "0,1,0,1"], dir.path())),
        5
    );
    assert_eq!(
        code(&sigmalab(&["unimodal", "--g", "cos2-theta"], dir.path())),
        5
    );
    assert_eq!(code(&sigmalab(&["unimodal", "--g", "x1"], dir.path())), 0);
    let v = json(&dir.path().join("unimodal.json"));
    assert_eq!(v["verdict"]["direction_changes"], 2);
}

#[test]
fn fd_solver_and_beltrami_reports() {
    let dir = tempfile::tempdir().unwrap();
    let nd = dir.path().join("nd");
    let args = [
        "solve",
        "--solver",
        "fd",
        "--domain",
        "annulus:r_in=0.2,r_out=1",
        "--sigma",
        "meyers:alpha=2",
        "--g",
        "oracle",
    ];
    assert_eq!(code(&sigmalab(&args, &nd)), 0);
    assert!(
        json(&nd.join("stats.json"))["oracle"]["relative_l2"]
            .as_f64()
            .unwrap()
            <= 0.01
    );
    assert!(nd.join("grid.txt").exists());

    let b = dir.path().join("b");
    assert_eq!(
        code(&sigmalab(
            &[
                "beltrami",
                "--sigma",
                "meyers:alpha=2",
                "--domain",
                "annulus:r_in=0.2,r_out=1",
                "--g",
                "oracle"
            ],
            &b
        )),
        0
    );
    let rep = json(&b.join("beltrami.json"));
    assert!((rep["dilatation_bound"].as_f64().unwrap() - 1.0 / 3.0).abs() <= 1e-6);
    assert!(rep["beltrami_residual"].as_f64().unwrap() <= 0.05);
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "map",
        "--sigma",
        "random-nonsym:tau=0.2",
        "--seed",
        "11",
        "--h",
        "0.08",
    ];
    let out = dir.path().join("run");
    let snapshot = || {
        assert_eq!(code(&sigmalab(&args, &out)), 0);
        let mut files: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let first = snapshot();
    assert!(first.len() >= 6);
    assert!(first == snapshot());
}
