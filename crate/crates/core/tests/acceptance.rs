//! Acceptance suite: each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wflow_core::convex::{conjugate_estimates, CostSpec, EnergySpec, PotentialSpec, PowerTerm, Preset};
use wflow_core::density::{Domain, GridDensity};
use wflow_core::diagnostics::{compare, ledger, second_moment_rate, Tolerances};
use wflow_core::jko::{displacement_convexity_violation, energy_inequality, euler_lagrange_residual, jko_step, run_scheme, JkoProblem};
use wflow_core::refsolve::{barenblatt_density, barenblatt_radius, fd_solve, gibbs_state, FdConfig};
use wflow_core::transport::{displacement_interpolate, lp_oracle, monotone_atom_cost, InterpolantPath};
use wflow_core::Model;

type Outcome = (bool, String);

fn costs() -> Vec<(&'static str, CostSpec)> {
    vec![
        ("q=1.5", CostSpec::power(1.5).unwrap()),
        ("q=2", CostSpec::power(2.0).unwrap()),
        ("q=3", CostSpec::power(3.0).unwrap()),
        ("two-term", CostSpec::new(vec![PowerTerm { coef: 0.5, exponent: 2.0 }, PowerTerm { coef: 0.25, exponent: 4.0 }]).unwrap()),
    ]
}

fn cosine(d: Domain, n: usize) -> GridDensity {
    let (a, l) = (d.a, d.length());
    GridDensity::from_fn(d, n, |x| 1.0 + 0.5 * (2.0 * PI * (x - a) / l).cos()).unwrap()
}

/// `1 + Σ_k a_k cos(2π k x + φ_k)` with `Σ|a_k| < 1/2`.
fn random_smooth(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let modes: Vec<(f64, f64)> = (1..=3).map(|k| (rng.gen_range(-0.25..0.25) / k as f64, rng.gen_range(0.0..2.0 * PI))).collect();
    move |x: f64| 1.0 + modes.iter().enumerate().map(|(k, (a, p))| a * (2.0 * PI * (k + 1) as f64 * x + p).cos()).sum::<f64>()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sizes = [2, 3, 4, 5, 6, 7, 8, 16, 32, 64];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (_, c) in costs() {
        for i in 0..200 {
            let k = sizes[i % sizes.len()];
            let a: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let h = rng.gen_range(0.1..1.0);
            let (mono, _) = monotone_atom_cost(&a, &b, &c, h).unwrap();
            let (lp, _) = lp_oracle(&a, &b, &c, h).unwrap();
            worst = worst.max((mono - lp).abs() / lp.abs().max(1e-300));
            count += 1;
        }
    }
    (worst <= 1e-9, format!("{count} instances, max relative deviation {worst:.3e}"))
}

fn per_step_dissipation() -> Outcome {
    let d = Domain::unit();
    let model = Model::heat(d);
    let p = JkoProblem::new(model.clone(), 1e-2, 256, 256).unwrap();
    let traj = run_scheme(&p, &cosine(d, 256), 1.0).unwrap();
    let l = ledger(&model, &traj, &Tolerances::default()).unwrap();
    let a = l.flag("energy_dissipation").unwrap();
    let b = l.flag("cumulative_cost").unwrap();
    (a.passed && b.passed, format!("min step slack {:.3e}, cumulative slack {:.3e}", a.slack, b.slack))
}

fn min_max_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = Domain::unit();
    let m = 128;
    let p = JkoProblem::new(Model::heat(d), 1e-2, m, m).unwrap();
    let band = 4.0 / m as f64;
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let rho0 = GridDensity::from_fn(d, m, random_smooth(&mut rng)).unwrap();
        let traj = run_scheme(&p, &rho0, 0.2).unwrap();
        let (lo, hi) = (rho0.essinf() - band, rho0.esssup() + band);
        for g in &traj.densities {
            worst = worst.min((g.essinf() - lo).min(hi - g.esssup()));
        }
    }
    (worst >= 0.0, format!("20 runs, smallest margin to the band {worst:.3e}"))
}

fn second_moment_rates() -> Outcome {
    let d = Domain::unit();
    let m = 512;
    // slowest Neumann mode, so that h times the decay rate stays below 1/2
    let rho0 = GridDensity::from_fn(d, m, |x| 1.0 + 0.5 * (PI * x).cos()).unwrap();
    let hs: Vec<f64> = [20.0, 40.0, 80.0, 160.0, 320.0].iter().map(|k| 1.0 / k).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [1.5, 2.0, 3.0] {
        let model = Model::new(CostSpec::power(q).unwrap(), EnergySpec::entropy(), PotentialSpec::Zero, d);
        let p = JkoProblem::new(model, hs[0], m, m).unwrap();
        let fit = second_moment_rate(&p, &rho0, 0.5, &hs, Tolerances::default().rate_margin).unwrap();
        ok &= fit.passed;
        parts.push(format!("q={q} slope {:.3} (need >= {:.2})", fit.slope, fit.expected - fit.margin));
    }
    (ok, parts.join(", "))
}

fn el_residual() -> Outcome {
    let levels = [(128, 4e-3), (256, 2e-3), (512, 1e-3)];
    let cases = [
        ("heat", Model::heat(Domain::unit())),
        ("fokker-planck", Model::from_preset(&Preset::FokkerPlanck { kappa: 1.0, center: 0.0 }, Domain::new(-1.0, 1.0).unwrap()).unwrap()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model) in cases {
        let mut rel = Vec::new();
        for (n, h) in levels {
            let p = JkoProblem::new(model.clone(), h, n, n).unwrap();
            let rho0 = cosine(model.domain, n);
            let (rho1, _) = jko_step(&p, &rho0).unwrap();
            rel.push(euler_lagrange_residual(&p, &rho0, &rho1).unwrap().relative);
        }
        ok &= rel.windows(2).all(|w| w[1] < w[0]) && rel[2] <= 0.05;
        parts.push(format!("{name} {:.2e} > {:.2e} > {:.2e}", rel[0], rel[1], rel[2]));
    }
    (ok, parts.join(", "))
}

fn energy_inequality_and_convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = Domain::unit();
    let m = 2048;
    let mut worst_gap = f64::INFINITY;
    let mut worst_convexity: f64 = 0.0;
    for _ in 0..20 {
        let rho0 = GridDensity::from_fn(d, m, random_smooth(&mut rng)).unwrap();
        let rho1 = GridDensity::from_fn(d, m, random_smooth(&mut rng)).unwrap();
        let path = InterpolantPath::between(&rho0, &rho1, m).unwrap();
        for f in [EnergySpec::entropy(), EnergySpec::power(2.0).unwrap()] {
            let (lhs, rhs) = energy_inequality(&f, &rho0, &rho1, m).unwrap();
            worst_gap = worst_gap.min(lhs - rhs);
            worst_convexity = worst_convexity.max(displacement_convexity_violation(&f, &path, 11).unwrap());
        }
    }
    (worst_gap >= -1e-6 && worst_convexity <= 1e-8, format!("min LHS-RHS {worst_gap:.3e}, max convexity violation {worst_convexity:.3e}"))
}

fn interpolant_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = Domain::unit();
    let m = 4096;
    let mut sup_margin = f64::INFINITY;
    let mut jac_err: f64 = 0.0;
    for _ in 0..5 {
        let f0 = random_smooth(&mut rng);
        let f1 = random_smooth(&mut rng);
        let rho0 = GridDensity::from_fn(d, m, &f0).unwrap();
        let rho1 = GridDensity::from_fn(d, m, &f1).unwrap();
        // normalising constant of the analytic source density
        let z1 = (0..100_000).map(|i| f1((i as f64 + 0.5) / 100_000.0)).sum::<f64>() / 100_000.0;
        let path = InterpolantPath::between(&rho0, &rho1, m).unwrap();
        let cap = rho0.esssup().max(rho1.esssup()) + 4.0 / m as f64;
        for t in [0.25, 0.5, 0.75] {
            let mid = displacement_interpolate(&path, t, m).unwrap();
            sup_margin = sup_margin.min(cap - mid.esssup());
            for k in 1..10 {
                let y = k as f64 / 10.0 + 0.013;
                let delta = 1e-4;
                let slope = (path.eval(t, y + delta) - path.eval(t, y - delta)) / (2.0 * delta);
                let pushed = mid.eval(path.eval(t, y)) * slope;
                let exact = f1(y) / z1;
                jac_err = jac_err.max((pushed - exact).abs() / exact);
            }
        }
    }
    (sup_margin >= 0.0 && jac_err <= 1e-3, format!("sup margin {sup_margin:.3e}, Jacobian relative error {jac_err:.3e}"))
}

fn cross_solver() -> Outcome {
    // heat flow against finite differences
    let d = Domain::unit();
    let n = 256;
    let heat = Model::heat(d);
    let rho0 = cosine(d, n);
    let jko = run_scheme(&JkoProblem::new(heat.clone(), 1e-3, n, n).unwrap(), &rho0, 0.25).unwrap();
    let fd = fd_solve(&heat, &rho0, 0.25, &FdConfig::new(n, 1e-3)).unwrap();
    let heat_gap = compare(&jko, &fd).unwrap().L1_final;

    // porous medium against the source solution while the support is interior
    let d2 = Domain::new(-2.0, 2.0).unwrap();
    let pme = Model::from_preset(&Preset::PorousMedium { m: 2.0 }, d2).unwrap();
    let (t0, t1) = (0.05, 0.15);
    let start = barenblatt_density(2.0, 1.0, t0, d2, n).unwrap();
    let run = run_scheme(&JkoProblem::new(pme, 1e-3, n, n).unwrap(), &start, t1 - t0).unwrap();
    let exact = barenblatt_density(2.0, 1.0, t1, d2, n).unwrap();
    let pme_gap = run.last().l1_distance(&exact).unwrap();
    let interior = barenblatt_radius(2.0, 1.0, t1).unwrap() <= 2.0 - 4.0 * d2.length() / n as f64;

    // p-Laplacian preset against finite differences
    let plap = Model::from_preset(&Preset::PLaplacian { p: 2.5 }, d).unwrap();
    let jko = run_scheme(&JkoProblem::new(plap.clone(), 1e-3, n, n).unwrap(), &rho0, 0.25).unwrap();
    let fd = fd_solve(&plap, &rho0, 0.25, &FdConfig::new(n, 1e-3)).unwrap();
    let plap_gap = compare(&jko, &fd).unwrap().L1_final;

    (
        heat_gap <= 1e-2 && pme_gap <= 5e-2 && interior && plap_gap <= 5e-2,
        format!("heat {heat_gap:.3e}, porous medium {pme_gap:.3e}, p-Laplacian {plap_gap:.3e}"),
    )
}

fn equilibration() -> Outcome {
    let d = Domain::new(-1.0, 1.0).unwrap();
    let n = 256;
    let model = Model::from_preset(&Preset::FokkerPlanck { kappa: 1.0, center: 0.0 }, d).unwrap();
    let p = JkoProblem::new(model.clone(), 1e-2, n, n).unwrap();
    let traj = run_scheme(&p, &GridDensity::uniform(d, n), 10.0).unwrap();
    let gibbs = gibbs_state(&model.energy, &model.potential, d, n).unwrap();
    let l1 = traj.last().l1_distance(&gibbs).unwrap();
    let e_final = traj.quantiles.last().unwrap().energy(&model.energy, &model.potential).free;
    let e_eq = gibbs.energy(&model.energy, &model.potential).free;
    let l = ledger(&model, &traj, &Tolerances::default()).unwrap();
    let fe = l.flag("free_energy_inequality").unwrap();
    let de = (e_final - e_eq).abs();
    (
        l1 <= 1e-2 && de <= 1e-4 && fe.slack >= -1e-6,
        format!("L1 to equilibrium {l1:.3e}, |E - E_eq| {de:.3e}, free-energy slack {:.3e}", fe.slack),
    )
}

fn determinism() -> Outcome {
    let d = Domain::unit();
    let run = |m: usize| {
        let p = JkoProblem::new(Model::heat(d), 1e-2, m, m).unwrap();
        run_scheme(&p, &cosine(d, m), 0.5).unwrap()
    };
    let bytes = |m: usize| {
        let mut buf = Vec::new();
        run(m).write_csv(&mut buf).unwrap();
        buf
    };
    let identical = bytes(64) == bytes(64);
    let m = 64;
    let gap = run(m).last().l1_distance(run(2 * m).last()).unwrap();
    (identical && gap <= 4.0 / m as f64, format!("byte-identical {identical}, final L1 gap m vs 2m {gap:.3e}"))
}

fn convex_estimates() -> Outcome {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for (_, c) in costs() {
        let r = conjugate_estimates(&c, 1000, 50.0);
        worst = worst.min(r.euler_slack.min(r.nonneg_slack).min(r.doubling_slack).min(r.coercive_slack));
        ok &= r.passes(1e-10, 1e-9, 1e-6);
    }
    (ok, format!("smallest slack {worst:.3e}"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("oracle equivalence", oracle_equivalence),
        ("per-step dissipation", per_step_dissipation),
        ("min/max principle", min_max_principle),
        ("second-moment rate", second_moment_rates),
        ("Euler-Lagrange residual", el_residual),
        ("energy inequality and convexity", energy_inequality_and_convexity),
        ("interpolant bounds", interpolant_bounds),
        ("cross-solver agreement", cross_solver),
        ("equilibration", equilibration),
        ("determinism", determinism),
        ("convex estimates", convex_estimates),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
                        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                        (false, format!("panicked: {}", msg.unwrap_or_default()))
                    });
                    (out, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), ((ok, detail), secs))) in criteria.iter().zip(results).enumerate() {
        println!("criterion {:>2} {:<32} {} ({detail}; {secs:.1}s)", i + 1, name, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
