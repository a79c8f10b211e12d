use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wflow(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wflow")).args(args).env("WFLOW_OUT", out).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn fokker_planck_defaults_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fp.toml", "preset = \"fokker-planck\"\n");
    let out = tmp.path().join("out");
    let o = wflow(&out, &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = run_dirs(&out);
    assert_eq!(dirs.len(), 1);
    let name = dirs[0].file_name().unwrap().to_str().unwrap().to_string();
    assert!(name.starts_with("fokker-planck_") && name.len() == "fokker-planck_".len() + 12, "{name}");
    for f in ["trajectory.csv", "trajectory_diagnostics.jsonl", "report.json"] {
        assert!(dirs[0].join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dirs[0].join("report.json")).unwrap()).unwrap();
    for key in ["run_config", "ledger", "flags", "rate_fits", "comparisons"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert!(report["flags"].as_array().unwrap().iter().all(|f| f["passed"] == true));
    let diag = fs::read_to_string(dirs[0].join("trajectory_diagnostics.jsonl")).unwrap();
    assert_eq!(diag.lines().count(), 10);
}

#[test]
fn unit_cost_exponent_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q1.toml", "cost_q = 1.0\nenergy = \"entropy\"\n");
    let o = wflow(&tmp.path().join("out"), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn failed_range_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fd.toml", "preset = \"fast-diffusion\"\nexponent_m = 0.3\nt_final = 0.02\n");
    let out = tmp.path().join("out");
    assert_eq!(code(&wflow(&out, &["run", "--config", cfg.to_str().unwrap()])), 1);
    let o = wflow(&out, &["run", "--config", cfg.to_str().unwrap(), "--force"]);
    assert_ne!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = &run_dirs(&out)[0];
    let report = fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(report.contains("preset-range:fast-diffusion"));
    assert!(report.contains("\"force\": true"));
}

#[test]
fn missing_initial_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "preset = \"heat\"\nrho0_csv = \"nowhere.csv\"\n");
    let o = wflow(&tmp.path().join("out"), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn initial_csv_is_read_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,rho\n");
    for j in 0..32 {
        let x = (j as f64 + 0.5) / 32.0;
        csv.push_str(&format!("{x},{}\n", 1.0 + 0.3 * (6.0 * x).sin()));
    }
    fs::write(tmp.path().join("init.csv"), csv).unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "preset = \"heat\"\nn = 32\nm = 32\nrho0_csv = \"init.csv\"\n");
    let o = wflow(&tmp.path().join("out"), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn study_needs_four_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", "preset = \"heat\"\n");
    let o = wflow(&tmp.path().join("out"), &["study", "--config", cfg.to_str().unwrap(), "--vary", "h", "--values", "0.1,0.05"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn study_writes_rate_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let body =
        "preset = \"heat\"\nt_final = 0.5\nn = 64\nm = 64\nrho0 = { profile = \"step\", left = 0.0, right = 0.5, low = 0.5, high = 1.5 }\n";
    let cfg = write_config(tmp.path(), "s.toml", body);
    let out = tmp.path().join("out");
    let o = wflow(&out, &["study", "--config", cfg.to_str().unwrap(), "--vary", "h", "--values", "0.05,0.025,0.0125,0.00625,0.003125"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = &run_dirs(&out)[0];
    let csv = fs::read_to_string(dir.join("rate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let slope = report["rate_fits"][0]["slope"].as_f64().unwrap();
    assert!(slope > 0.85, "{slope}");
}

#[test]
fn crosscheck_heat_against_finite_differences() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "preset = \"heat\"\nn = 128\nm = 128\nh = 1e-3\nt_final = 0.05\nrho0 = { profile = \"cosine\", amplitude = 0.5 }\n";
    let cfg = write_config(tmp.path(), "x.toml", body);
    let out = tmp.path().join("out");
    let o = wflow(&out, &["crosscheck", "--config", cfg.to_str().unwrap(), "--threshold", "1e-2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = &run_dirs(&out)[0];
    assert!(dir.join("comparison.csv").is_file() && dir.join("reference.csv").is_file());
    // a threshold below the measured gap fails the check
    let o = wflow(&out, &["crosscheck", "--config", cfg.to_str().unwrap(), "--threshold", "1e-9"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn crosscheck_porous_medium_source_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "preset = \"porous-medium\"\nexponent_m = 2\na = -2\nb = 2\nn = 256\nm = 256\nh = 1e-3\nt_final = 0.1\n\
                rho0 = { profile = \"barenblatt\", m = 2, t = 0.05 }\nreference = \"barenblatt\"\n";
    let cfg = write_config(tmp.path(), "pme.toml", body);
    let o = wflow(&tmp.path().join("out"), &["crosscheck", "--config", cfg.to_str().unwrap(), "--threshold", "5e-2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn crosscheck_domain_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "x.toml", "preset = \"heat\"\nreference_domain = [0.0, 2.0]\n");
    let o = wflow(&tmp.path().join("out"), &["crosscheck", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_bounds_and_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&wflow(&out, &["oracle", "--k", "0", "--seed", "1"])), 1);
    assert_eq!(code(&wflow(&out, &["oracle", "--k", "65", "--seed", "1"])), 1);
    for k in ["8", "64"] {
        let o = wflow(&out, &["oracle", "--k", k, "--seed", "7"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fp.toml", "preset = \"fokker-planck\"\nkappa = 2.0\nt_final = 0.05\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&wflow(&a, &["run", "--config", cfg.to_str().unwrap()])), 0);
    assert_eq!(code(&wflow(&b, &["run", "--config", cfg.to_str().unwrap()])), 0);
    let (da, db) = (run_dirs(&a), run_dirs(&b));
    assert_eq!(da[0].file_name(), db[0].file_name());
    for f in ["trajectory.csv", "trajectory_diagnostics.jsonl", "report.json"] {
        assert_eq!(fs::read(da[0].join(f)).unwrap(), fs::read(db[0].join(f)).unwrap(), "{f}");
    }
    // a different config lands elsewhere
    let other = write_config(tmp.path(), "fp2.toml", "preset = \"fokker-planck\"\nkappa = 3.0\nt_final = 0.05\n");
    assert_eq!(code(&wflow(&a, &["run", "--config", other.to_str().unwrap()])), 0);
    assert_eq!(run_dirs(&a).len(), 2);
}

#[test]
fn trajectory_values_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "h.toml", "preset = \"heat\"\nt_final = 0.02\n");
    let out = tmp.path().join("out");
    assert_eq!(code(&wflow(&out, &["run", "--config", cfg.to_str().unwrap()])), 0);
    let text = fs::read_to_string(run_dirs(&out)[0].join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,rho"));
    for line in lines {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(v.to_string(), field);
        }
    }
}
