use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use std::process::Command;

fn sfd(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_sfd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run sfd");
    status.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn verify_exit_codes_follow_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [("linear-coupled", 0, "pass"), ("tet-demo", 1, "fail"), ("stiff-inertia", 1, "fail")];
    for (system, code, a1_or_a3) in cases {
        let out = dir.path().join(system);
        let set = format!("system=\"{system}\"");
        assert_eq!(sfd(&out, &["verify", "--set", &set]), code, "{system}");
        let m = read_json(&out.join("manifest.json"));
        assert_eq!(m["exit_code"], code);
        let stages = m["stages"].as_array().unwrap();
        let verdict = |name: &str| stages.iter().find(|s| s["stage"] == name).unwrap()["verdict"].clone();
        match system {
            "tet-demo" => assert_eq!(verdict("A3"), a1_or_a3),
            _ => assert_eq!(verdict("A1"), a1_or_a3),
        }
    }
}

#[test]
fn reduce_chart_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert_eq!(sfd(&out, &["reduce", "--order", "0"]), 0);
    let (header, rows) = csv_rows(&out.join("chart.csv"));
    assert_eq!(header, ["t", "x1", "dx1", "g0_1", "h0_1"]);
    assert!(!rows.is_empty());
    for r in &rows {
        let (t, x, xd) = (r[0], r[1], r[2]);
        assert!((r[3] - (0.5 * t.sin() - x * x)).abs() < 1e-10);
        assert!((r[4] - (0.5 * t.cos() - 2.0 * x * xd)).abs() < 1e-10);
    }
    let (rhs_header, rhs) = csv_rows(&out.join("rhs.csv"));
    assert_eq!(rhs_header, ["t", "x1", "dx1", "ddx1"]);
    assert_eq!(rhs.len(), rows.len());
    let meta = read_json(&out.join("reduced.json"));
    assert_eq!(meta["order"], 0);
    assert_eq!(meta["system"], "linear-coupled");
}

#[test]
fn reduce_stops_on_failed_verification_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert_eq!(sfd(&out, &["reduce", "--set", "system=\"tet-demo\""]), 1);
    assert!(!out.join("chart.csv").exists());
    let m = read_json(&out.join("manifest.json"));
    assert!(m["stages"].as_array().unwrap().iter().any(|s| s["stage"] == "reduce" && s["verdict"] == "skipped"));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(sfd(out, &["fold", "--set", "system=\"fold-demo\"", "--seed", "7"]), 0);
    }
    for name in ["fold.json", "boundary.csv", "parameters.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let (c, d) = (dir.path().join("c"), dir.path().join("d"));
    for (out, jobs) in [(&c, "1"), (&d, "3")] {
        assert_eq!(sfd(out, &["reduce", "--jobs", jobs]), 0);
    }
    for name in ["chart.csv", "rhs.csv", "a1.json", "a2.json", "a3.json", "reduced.json"] {
        assert_eq!(fs::read(c.join(name)).unwrap(), fs::read(d.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn fold_demo_boundary_lies_on_fold_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    assert_eq!(sfd(&out, &["fold", "--set", "system=\"fold-demo\""]), 0);
    let text = fs::read_to_string(out.join("boundary.csv")).unwrap();
    let mut n = 0;
    for line in text.lines().skip(1) {
        let v: Vec<&str> = line.split(',').collect();
        let (t, x, eta): (f64, f64, f64) = (v[0].parse().unwrap(), v[1].parse().unwrap(), v[3].parse().unwrap());
        assert!((x * x - 1.0 - t.sin()).abs() < 1e-6, "{line}");
        assert!((eta + 0.5).abs() < 1e-6);
        n += 1;
    }
    assert!(n > 0);
    let report = read_json(&out.join("fold.json"));
    assert_eq!(report["rays"].as_array().unwrap().len(), 20);
}

#[test]
fn fold_on_linear_coupled_finds_no_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    assert_eq!(sfd(&out, &["fold", "--set", "rays=5"]), 0);
    let text = fs::read_to_string(out.join("boundary.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let report = read_json(&out.join("fold.json"));
    assert!(report["rays"].as_array().unwrap().iter().all(|r| r["outcome"] == "no-sign-change"));
}

#[test]
fn compare_local_gap_vanishes_without_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let args = ["compare-local", "--set", "system=\"twodof-ssm\"", "--set", "a=0", "--set", "t_end=2"];
    assert_eq!(sfd(&out, &args), 0);
    let report = read_json(&out.join("compare.json"));
    assert!(report["gap"].as_f64().unwrap().abs() < 1e-14);
    assert!(report["sweep"].as_array().unwrap().iter().all(|p| p["gap"].as_f64().unwrap().abs() < 1e-14));
    let (header, rows) = csv_rows(&out.join("compare.csv"));
    assert_eq!(header, ["t", "x_sc", "dx_sc", "x_md", "dx_md", "x_ssm", "dx_ssm"]);
    assert_eq!(rows[0][1], 0.1);
}

#[test]
fn compare_local_rejects_other_systems() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sfd(&dir.path().join("c"), &["compare-local"]), 2);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "system = \"no-such-system\"\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(sfd(&out, &["verify", "--config", bad.to_str().unwrap()]), 2);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["exit_code"], 2);
    assert!(m["error"].as_str().unwrap().contains("no-such-system"));

    fs::write(&bad, "eps = = 1\n").unwrap();
    assert_eq!(sfd(&out, &["verify", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(sfd(&out, &["verify", "--order", "3"]), 2);
    assert_eq!(sfd(&out, &["verify", "--set", "k1=-1"]), 2);
    let missing = dir.path().join("missing.cfg");
    assert_eq!(sfd(&out, &["verify", "--config", missing.to_str().unwrap()]), 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "system = \"linear-coupled\"\neps = 0.05\nk2 = 2\n").unwrap();
    let out = dir.path().join("o");
    let path = cfg.to_str().unwrap();
    assert_eq!(sfd(&out, &["verify", "--config", path, "--set", "k2=3", "--eps", "0.02"]), 0);
    let p = read_json(&out.join("parameters.json"));
    assert_eq!(p["eps"], 0.02);
    assert_eq!(p["parameters"]["k2"], 3.0);
}

#[test]
fn manifest_lists_file_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    assert_eq!(sfd(&out, &["verify"]), 0);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["tool"], "sfd");
    assert_eq!(m["command"], "verify");
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    for name in ["parameters.json", "a1.json", "a2.json", "a3.json"] {
        assert!(names.contains(&name), "{name}");
    }
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        let hash: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), hash);
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn simulate_linear_coupled_synchronizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(sfd(&out, &["simulate", "--set", "t_end=3"]), 0);
    let sync = read_json(&out.join("sync.json"));
    assert_eq!(sync["verdict"], "pass");
    let rate = sync["rate"].as_f64().unwrap();
    assert!(rate >= 0.8 * sync["bound"].as_f64().unwrap());
    let (full_header, _) = csv_rows(&out.join("full.csv"));
    assert_eq!(full_header, ["t", "x1", "dx1", "y1", "dy1"]);
    let (red_header, _) = csv_rows(&out.join("reduced.csv"));
    assert_eq!(red_header, ["t", "x1", "dx1"]);
    for name in ["distance.csv", "error.csv"] {
        assert!(out.join(name).exists());
    }
}
