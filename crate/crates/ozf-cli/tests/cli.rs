use std::path::PathBuf;
use std::process::{Command, Output};

fn plant(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../plants")
        .join(name)
}

fn ozf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ozf"))
        .args(args)
        .output()
        .expect("spawn ozf")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn analyze_small_gain_is_positive() {
    let p = plant("example.json");
    let o = ozf(&[
        "analyze",
        "--plant",
        p.to_str().unwrap(),
        "--kappa",
        "1.5",
        "--nmax",
        "16",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = json(&o);
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 16);
    for r in records {
        assert!(r["t_star"].as_f64().unwrap() > 0.0);
        assert_eq!(r["certified_zero"], false);
    }
}

#[test]
fn analyze_reports_certified_zero() {
    let p = plant("example.json");
    let o = ozf(&[
        "analyze",
        "--plant",
        p.to_str().unwrap(),
        "--kappa",
        "2.0",
        "--nmax",
        "8",
    ]);
    assert_eq!(code(&o), 2);
    let records = json(&o);
    let last = records.as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["N"], 5);
    assert_eq!(last["t_star"].as_f64().unwrap(), 0.0);
    assert_eq!(last["certified_zero"], true);
    assert_eq!(last["mu"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_inputs_exit_one() {
    let p = plant("example.json");
    let missing = ozf(&[
        "analyze",
        "--plant",
        "/nonexistent/plant.json",
        "--kappa",
        "2",
    ]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("plant.json"));
    assert_eq!(
        code(&ozf(&[
            "analyze",
            "--plant",
            p.to_str().unwrap(),
            "--kappa",
            "-1"
        ])),
        1
    );
    assert_eq!(
        code(&ozf(&[
            "analyze",
            "--plant",
            p.to_str().unwrap(),
            "--kappa",
            "2",
            "--n",
            "0"
        ])),
        1
    );
    assert_eq!(
        code(&ozf(&[
            "analyze",
            "--plant",
            p.to_str().unwrap(),
            "--kappa",
            "2",
            "--n",
            "513"
        ])),
        1
    );
    assert_eq!(code(&ozf(&["frobnicate"])), 1);
}

#[test]
fn nyquist_value_of_example() {
    let p = plant("example.json");
    let o = ozf(&["nyquist-value", "--plant", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((v - 2.17).abs() <= 0.02, "{v}");
}

#[test]
fn destabilize_verify_simulate() {
    let p = plant("example.json");
    for kappa in ["2.0", "1.9"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let o = ozf(&[
            "destabilize",
            "--plant",
            p.to_str().unwrap(),
            "--kappa",
            kappa,
            "--out",
            out,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let cert = json(&o);
        assert_eq!(cert["N"], 5);
        assert!(cert["d"].as_u64().unwrap() <= 5);
        assert_eq!(cert["rho"].as_f64().unwrap(), 0.0);
        for f in ["certificate.json", "gain.json", "verify.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let cert_path = dir.path().join("certificate.json");
        let v = ozf(&["verify", "--cert", cert_path.to_str().unwrap()]);
        assert_eq!(code(&v), 0);
        let report = json(&v);
        assert_eq!(report["pass"], true);
        assert!(report["worst_residual"].as_f64().unwrap() <= 1e-8);
        let s = ozf(&[
            "simulate",
            "--cert",
            cert_path.to_str().unwrap(),
            "--out",
            out,
        ]);
        assert_eq!(code(&s), 0);
        assert_eq!(json(&s)["lower_bound"], "inf");
        let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(traj.lines().count(), 1 + 50);
    }
}

#[test]
fn tampered_certificate_fails_verification() {
    let p = plant("example.json");
    let dir = tempfile::tempdir().unwrap();
    let o = ozf(&[
        "destabilize",
        "--plant",
        p.to_str().unwrap(),
        "--kappa",
        "2.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let mut cert = json(&o);
    let x = cert["xhat"][1][0].as_f64().unwrap();
    cert["xhat"][1][0] = serde_json::json!(x + 0.1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&cert).unwrap()).unwrap();
    assert_eq!(code(&ozf(&["verify", "--cert", bad.to_str().unwrap()])), 3);
}

#[test]
fn destabilize_refuses_stable_loop() {
    let p = plant("static_minus_one.json");
    let o = ozf(&[
        "destabilize",
        "--plant",
        p.to_str().unwrap(),
        "--kappa",
        "inf",
    ]);
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
    let stable = plant("example.json");
    let o = ozf(&[
        "destabilize",
        "--plant",
        stable.to_str().unwrap(),
        "--kappa",
        "1.5",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn outputs_are_deterministic() {
    let p = plant("example.json");
    let p = p.to_str().unwrap();
    for args in [
        vec!["analyze", "--plant", p, "--kappa", "2.0", "--nmax", "8"],
        vec!["destabilize", "--plant", p, "--kappa", "2.0"],
        vec!["synth", "--plant", p, "--kappa", "1.8"],
    ] {
        let a = ozf(&args);
        let b = ozf(&args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn synth_exit_codes() {
    let p = plant("example.json");
    let dir = tempfile::tempdir().unwrap();
    let o = ozf(&[
        "synth",
        "--plant",
        p.to_str().unwrap(),
        "--kappa",
        "1.8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let doc = json(&o);
    assert_eq!(doc["fdi"]["pass"], true);
    assert!(doc["fdi"]["certified_margin"].as_f64().unwrap() < 0.0);
    assert!(dir.path().join("multiplier.json").exists());
    let o = ozf(&["synth", "--plant", p.to_str().unwrap(), "--kappa", "2.0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn plot_emits_multiplier_and_fir_curves() {
    let p = plant("double_pole.json");
    let dir = tempfile::tempdir().unwrap();
    let o = ozf(&[
        "plot",
        "--plant",
        p.to_str().unwrap(),
        "--kappa",
        "0.3",
        "--n",
        "9",
        "--fir",
        "-2:2",
        "--fir",
        "-20:20",
        "--svg",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("multiplier.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("omega,ReM,ImM,ReGM,ImGM"));
    assert_eq!(lines.count(), 2048);
    for f in [
        "plant.csv",
        "fir_-2_2.csv",
        "fir_-20_20.csv",
        "multiplier.svg",
        "fir_-20_20.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let doc = json(&o);
    let tails: Vec<f64> = doc["fir"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["tail_bound"].as_f64().unwrap())
        .collect();
    assert!(tails[1] < tails[0]);
}

#[test]
fn reproduce_example_quick() {
    let o = ozf(&["reproduce-example", "--quick"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.lines().count(), 5);
    assert!(!table.contains("MISMATCH"));
}
