use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use wflow_core::convex::{AssumptionReport, CostSpec};
use wflow_core::density::Profile;
use wflow_core::diagnostics::{compare, fit_rate, ledger, Comparison, Report, Tolerances};
use wflow_core::jko::{run_scheme, SchemeFailure, SchemeTrajectory};
use wflow_core::refsolve::{barenblatt_density, fd_solve, FdConfig};
use wflow_core::transport::{lp_oracle, monotone_atom_cost, ORACLE_MAX};

use crate::config::{self, Loaded};

/// Process outcome: 0 success, 1 bad input, 2 solver failure, 3 the run
/// finished but a check did not pass.
#[derive(Debug)]
pub enum Outcome {
    Ok,
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Check(String),
}

impl Outcome {
    pub fn code(&self) -> u8 {
        match self {
            Self::Ok => 0,
            Self::Config(_) => 1,
            Self::Solver(_) => 2,
            Self::Check(_) => 3,
        }
    }
}

fn output_root(cfg: &config::RunConfig) -> PathBuf {
    if let Some(v) = std::env::var_os("WFLOW_OUT") {
        return PathBuf::from(v);
    }
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("wflow_out"))
}

fn run_dir(loaded: &Loaded, extra: serde_json::Value) -> Result<PathBuf> {
    let cfg = &loaded.config;
    let extra = json!({ "input": extra, "rho0_csv_sha256": loaded.csv_digest });
    let dir = output_root(cfg).join(format!("{}_{}", cfg.label(), cfg.digest(&extra)));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn write_trajectory(dir: &Path, stem: &str, t: &SchemeTrajectory) -> Result<()> {
    t.save_csv(&dir.join(format!("{stem}.csv")))?;
    if !t.diagnostics.is_empty() {
        t.save_diagnostics_jsonl(&dir.join(format!("{stem}_diagnostics.jsonl")))?;
    }
    Ok(())
}

fn run_config_json(loaded: &Loaded, command: &str, report: &AssumptionReport, force: bool, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "config": loaded.config,
        "rho0_csv_sha256": loaded.csv_digest,
        "force": force,
        "assumptions": report,
        "tolerances": Tolerances::default(),
        "extra": extra,
    })
}

fn failure_json(f: &SchemeFailure) -> serde_json::Value {
    json!({ "step": f.step, "error": f.source.to_string(), "completed_steps": f.partial.len().saturating_sub(1) })
}

/// Loads the config and builds model, report and initial density; every
/// error here is a configuration error.
struct Setup {
    loaded: Loaded,
    model: wflow_core::Model,
    report: AssumptionReport,
    rho0: wflow_core::density::GridDensity,
}

fn setup(path: &Path, force: bool) -> Result<Setup, Outcome> {
    let loaded = config::load(path).map_err(Outcome::Config)?;
    let (model, report) = loaded.config.model().map_err(Outcome::Config)?;
    if !report.all_pass() {
        for c in report.failures() {
            eprintln!("assumption {} failed: {} (witness {:?})", c.id, c.detail, c.witness);
        }
        if !force {
            return Err(Outcome::Config(anyhow!("assumptions failed; rerun with --force to record and continue")));
        }
    }
    let rho0 = loaded.config.initial(&loaded.dir).map_err(Outcome::Config)?;
    Ok(Setup { loaded, model, report, rho0 })
}

pub fn run(path: &Path, force: bool) -> Outcome {
    let s = match setup(path, force) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let problem = match s.loaded.config.problem(s.model.clone(), s.report.clone(), force) {
        Ok(p) => p,
        Err(e) => return Outcome::Config(e),
    };
    let dir = match run_dir(&s.loaded, json!({ "command": "run", "force": force })) {
        Ok(d) => d,
        Err(e) => return Outcome::Solver(e),
    };
    let rc = |extra| run_config_json(&s.loaded, "run", &s.report, force, extra);
    match run_scheme(&problem, &s.rho0, s.loaded.config.t_final) {
        Ok(traj) => {
            let result = (|| -> Result<bool> {
                write_trajectory(&dir, "trajectory", &traj)?;
                let l = ledger(&s.model, &traj, &Tolerances::default())?;
                let pass = l.all_pass();
                write_text(&dir.join("report.json"), &Report::new(rc(json!(null))).with_ledger(l).to_json())?;
                Ok(pass)
            })();
            println!("{}", dir.display());
            match result {
                Ok(true) => Outcome::Ok,
                Ok(false) => Outcome::Check("ledger flags failed; see report.json".into()),
                Err(e) => Outcome::Solver(e),
            }
        }
        Err(failure) => {
            let _ = write_trajectory(&dir, "trajectory", &failure.partial);
            let mut report = Report::new(rc(json!({ "failure": failure_json(&failure) })));
            if failure.partial.len() > 1 {
                if let Ok(l) = ledger(&s.model, &failure.partial, &Tolerances::default()) {
                    report = report.with_ledger(l);
                }
            }
            let _ = write_text(&dir.join("report.json"), &report.to_json());
            println!("{}", dir.display());
            Outcome::Solver(anyhow::Error::new(failure))
        }
    }
}

fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?}"))).collect()
}

pub fn study(path: &Path, vary: &str, values: &str) -> Outcome {
    if vary != "h" {
        return Outcome::Config(anyhow!("only h can be varied, got {vary:?}"));
    }
    let hs = match parse_values(values) {
        Ok(v) => v,
        Err(e) => return Outcome::Config(e),
    };
    if hs.len() < 4 {
        return Outcome::Config(anyhow!("study needs at least 4 values, got {}", hs.len()));
    }
    if hs.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Outcome::Config(anyhow!("step sizes must be positive"));
    }
    let s = match setup(path, false) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let template = match s.loaded.config.problem(s.model.clone(), s.report.clone(), false) {
        Ok(p) => p,
        Err(e) => return Outcome::Config(e),
    };
    let dir = match run_dir(&s.loaded, json!({ "command": "study", "vary": vary, "values": hs })) {
        Ok(d) => d,
        Err(e) => return Outcome::Solver(e),
    };
    let t_final = s.loaded.config.t_final;
    let members: Vec<Result<f64, String>> = hs
        .par_iter()
        .map(|&h| {
            let p = template.with_h(h).map_err(|e| e.to_string())?;
            run_scheme(&p, &s.rho0, t_final).map(|t| t.diagnostics.iter().map(|d| d.second_moment).sum()).map_err(|e| e.to_string())
        })
        .collect();

    let mut csv = String::from("h,total,status\n");
    for (h, m) in hs.iter().zip(&members) {
        match m {
            Ok(total) => csv.push_str(&format!("{h},{total},ok\n")),
            Err(_) => csv.push_str(&format!("{h},,failed\n")),
        }
    }
    let failed: Vec<serde_json::Value> =
        hs.iter().zip(&members).filter_map(|(h, m)| m.as_ref().err().map(|e| json!({ "h": h, "error": e }))).collect();
    let extra = json!({ "vary": vary, "values": hs, "failed_members": failed });
    let mut report = Report::new(run_config_json(&s.loaded, "study", &s.report, false, extra));
    let outcome = if !failed.is_empty() {
        Outcome::Solver(anyhow!("{} of {} study members failed", failed.len(), hs.len()))
    } else {
        let totals: Vec<f64> = members.into_iter().map(|m| m.unwrap()).collect();
        match fit_rate(&hs, &totals, s.model.cost.q(), Tolerances::default().rate_margin) {
            Ok(fit) => {
                println!("slope {} (expected at least {} - {})", fit.slope, fit.expected, fit.margin);
                let passed = fit.passed;
                report.rate_fits.push(fit);
                if passed {
                    Outcome::Ok
                } else {
                    Outcome::Check("fitted slope below the expected rate".into())
                }
            }
            Err(e) => Outcome::Check(e.to_string()),
        }
    };
    let written = write_text(&dir.join("rate.csv"), &csv).and_then(|_| write_text(&dir.join("report.json"), &report.to_json()));
    println!("{}", dir.display());
    match written {
        Ok(()) => outcome,
        Err(e) => Outcome::Solver(e),
    }
}

fn barenblatt_reference(cfg: &config::RunConfig, jko: &SchemeTrajectory) -> Result<SchemeTrajectory> {
    let (m, t0) = match cfg.rho0 {
        Some(Profile::Barenblatt { m, t }) => (m, t),
        _ => bail!("barenblatt reference needs rho0 = {{ profile = \"barenblatt\", ... }}"),
    };
    if cfg.preset.as_deref() != Some("porous-medium") || cfg.exponent_m != Some(m) {
        bail!("barenblatt reference needs the porous-medium preset with exponent_m = {m}");
    }
    let domain = cfg.domain()?;
    let mut out = SchemeTrajectory { h: jko.h, ..Default::default() };
    for &t in &jko.times {
        out.times.push(t);
        out.densities.push(barenblatt_density(m, 1.0, t0 + t, domain, cfg.n)?);
    }
    Ok(out)
}

pub fn crosscheck(path: &Path, threshold: Option<f64>) -> Outcome {
    let s = match setup(path, false) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let cfg = &s.loaded.config;
    if let Some([a, b]) = cfg.reference_domain {
        if a != cfg.a || b != cfg.b {
            return Outcome::Config(anyhow!("reference domain ({a}, {b}) differs from run domain ({}, {})", cfg.a, cfg.b));
        }
    }
    if cfg.reference != "fd" && cfg.reference != "barenblatt" {
        return Outcome::Config(anyhow!("unknown reference {:?}", cfg.reference));
    }
    let threshold = threshold.unwrap_or(cfg.threshold);
    if !(threshold > 0.0) {
        return Outcome::Config(anyhow!("threshold must be positive"));
    }
    let problem = match cfg.problem(s.model.clone(), s.report.clone(), false) {
        Ok(p) => p,
        Err(e) => return Outcome::Config(e),
    };
    let dir = match run_dir(&s.loaded, json!({ "command": "crosscheck", "threshold": threshold })) {
        Ok(d) => d,
        Err(e) => return Outcome::Solver(e),
    };
    let jko = match run_scheme(&problem, &s.rho0, cfg.t_final) {
        Ok(t) => t,
        Err(f) => {
            let _ = write_trajectory(&dir, "trajectory", &f.partial);
            println!("{}", dir.display());
            return Outcome::Solver(anyhow::Error::new(f));
        }
    };
    let reference = if cfg.reference == "fd" {
        let fd = FdConfig::new(cfg.n, cfg.reference_dt.unwrap_or(cfg.h));
        fd_solve(&s.model, &s.rho0, cfg.t_final, &fd).map_err(anyhow::Error::new)
    } else {
        barenblatt_reference(cfg, &jko)
    };
    let reference = match reference {
        Ok(r) => r,
        Err(e) => {
            let _ = write_trajectory(&dir, "trajectory", &jko);
            println!("{}", dir.display());
            return Outcome::Solver(e);
        }
    };
    let result = (|| -> Result<Comparison> {
        write_trajectory(&dir, "trajectory", &jko)?;
        reference.save_csv(&dir.join("reference.csv"))?;
        let c = compare(&jko, &reference)?;
        let mut csv = String::from("t,l1\n");
        for (t, d) in c.times.iter().zip(&c.l1) {
            csv.push_str(&format!("{t},{d}\n"));
        }
        write_text(&dir.join("comparison.csv"), &csv)?;
        let extra = json!({ "threshold": threshold, "passed": c.L1_final <= threshold });
        let mut report = Report::new(run_config_json(&s.loaded, "crosscheck", &s.report, false, extra));
        report.comparisons.push(c.clone());
        write_text(&dir.join("report.json"), &report.to_json())?;
        Ok(c)
    })();
    println!("{}", dir.display());
    match result {
        Ok(c) => {
            println!("final L1 gap {} (threshold {threshold})", c.L1_final);
            if c.L1_final <= threshold {
                Outcome::Ok
            } else {
                Outcome::Check(format!("final L1 gap {} above {threshold}", c.L1_final))
            }
        }
        Err(e) => Outcome::Solver(e),
    }
}

/// Monotone matching against the exact assignment on random atom sets.
pub fn oracle(k: usize, seed: u64) -> Outcome {
    if k == 0 || k > ORACLE_MAX {
        return Outcome::Config(anyhow!("k = {k} outside 1..={ORACLE_MAX}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for q in [1.5, 2.0, 3.0] {
        let c = CostSpec::power(q).expect("valid exponent");
        for _ in 0..8 {
            let x: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let y: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 2.0 - 0.5).collect();
            let h = rng.gen_range(0.1..1.0);
            let res = monotone_atom_cost(&x, &y, &c, h).and_then(|(mc, _)| lp_oracle(&x, &y, &c, h).map(|(lc, _)| (mc, lc)));
            let (mc, lc) = match res {
                Ok(v) => v,
                Err(e) => return Outcome::Solver(anyhow::Error::new(e)),
            };
            worst = worst.max((mc - lc).abs() / lc.abs().max(f64::MIN_POSITIVE));
        }
    }
    let tol = Tolerances::default().oracle;
    println!("k {k} seed {seed} max relative deviation {worst}");
    if worst <= tol {
        Outcome::Ok
    } else {
        Outcome::Check(format!("deviation {worst} above {tol}"))
    }
}
