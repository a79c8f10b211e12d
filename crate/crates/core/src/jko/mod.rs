//! Minimizing-movement scheme in quantile coordinates.

mod residual;
mod solver;

pub use residual::{
    displacement_convexity_violation, energy_inequality, energy_inequality_quantile, euler_lagrange_residual, free_energy_dissipation,
    Dissipation, ElResidual, VelocitySample,
};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::{AssumptionCheck, AssumptionReport};
use crate::density::{DensityError, EnergyBreakdown, GridDensity, QuantileRep};
use crate::model::Model;
use crate::transport::{quantile_second_moment, quantile_transport_cost, TransportError};

#[derive(Debug, Error)]
pub enum JkoError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("assumptions failed: {}", .0.iter().map(|c| c.id.as_str()).collect::<Vec<_>>().join(", "))]
    Assumptions(Vec<AssumptionCheck>),
    #[error("step did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NonConvergence { best: QuantileRep, residual: f64, iterations: usize },
    #[error("vacuum: quantile cell {cell} has width {width:e}")]
    Degeneracy { cell: usize, width: f64 },
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200 }
    }
}

/// One scheme configuration: model, time step, quantile resolution `m` and
/// output grid size `n`.
#[derive(Debug, Clone)]
pub struct JkoProblem {
    pub model: Model,
    pub h: f64,
    pub m: usize,
    pub n: usize,
    pub options: SolverOptions,
    pub assumptions: AssumptionReport,
}

impl JkoProblem {
    /// Validates the model and refuses failing assumptions.
    pub fn new(model: Model, h: f64, m: usize, n: usize) -> Result<Self, JkoError> {
        let report = model.validate();
        Self::with_report(model, h, m, n, report, false)
    }

    /// Uses a caller-assembled report; `force` keeps going past failures.
    pub fn with_report(model: Model, h: f64, m: usize, n: usize, report: AssumptionReport, force: bool) -> Result<Self, JkoError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(JkoError::Parameter(format!("time step {h} must be positive")));
        }
        if m < 8 {
            return Err(JkoError::Parameter(format!("quantile resolution {m} below 8")));
        }
        if n == 0 {
            return Err(JkoError::Parameter("grid size must be positive".into()));
        }
        if !force && !report.all_pass() {
            return Err(JkoError::Assumptions(report.failures().into_iter().cloned().collect()));
        }
        Ok(Self { model, h, m, n, options: SolverOptions::default(), assumptions: report })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Same problem at another time step.
    pub fn with_h(&self, h: f64) -> Result<Self, JkoError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(JkoError::Parameter(format!("time step {h} must be positive")));
        }
        let mut p = self.clone();
        p.h = h;
        Ok(p)
    }

    pub fn vacuum_floor(&self) -> f64 {
        1e-14 * self.model.domain.length()
    }

    /// One step from a quantile state.
    pub fn step_quantiles(&self, prev: &QuantileRep) -> Result<(QuantileRep, StepDiagnostics), JkoError> {
        if prev.m() != self.m {
            return Err(JkoError::Parameter(format!("state has {} quantile cells, problem expects {}", prev.m(), self.m)));
        }
        self.model.domain.check_same(&prev.domain())?;
        let sol = solver::solve_step(self, prev)?;
        let next = QuantileRep::new(self.model.domain, sol.nodes)?;
        let model = &self.model;
        let e_before = prev.energy(&model.energy, &model.potential);
        let e_after = next.energy(&model.energy, &model.potential);
        let w = quantile_transport_cost(prev, &next, &model.cost, self.h)?;
        let m2 = quantile_second_moment(prev, &next)?;
        let el = euler_lagrange_residual(self, &prev.to_grid_smooth(self.n)?, &next.to_grid_smooth(self.n)?)?;
        let diag = StepDiagnostics {
            W_value: w,
            E_before: e_before,
            E_after: e_after,
            second_moment: m2,
            el_residual_L1: el.residual_l1,
            kkt_residual: sol.kkt,
            iterations: sol.iterations,
        };
        Ok((next, diag))
    }
}

/// Per-step record.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub W_value: f64,
    pub E_before: EnergyBreakdown,
    pub E_after: EnergyBreakdown,
    /// `∫|x - y|^2 dγ` of the optimal coupling between consecutive states.
    pub second_moment: f64,
    pub el_residual_L1: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

pub fn jko_step(problem: &JkoProblem, rho_prev: &GridDensity) -> Result<(GridDensity, StepDiagnostics), JkoError> {
    check_initial(rho_prev)?;
    let q = rho_prev.to_quantiles(problem.m)?;
    let (next, diag) = problem.step_quantiles(&q)?;
    Ok((next.to_grid_smooth(problem.n)?, diag))
}

fn check_initial(rho: &GridDensity) -> Result<(), JkoError> {
    if (rho.mass() - 1.0).abs() > 1e-9 {
        return Err(JkoError::Parameter(format!("initial mass {} differs from 1", rho.mass())));
    }
    Ok(())
}

/// Densities at `t_k = k h`, with quantile states and step records when the
/// scheme produced them.
#[derive(Debug, Clone, Default)]
pub struct SchemeTrajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub densities: Vec<GridDensity>,
    pub quantiles: Vec<QuantileRep>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl SchemeTrajectory {
    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn initial(&self) -> &GridDensity {
        &self.densities[0]
    }

    pub fn last(&self) -> &GridDensity {
        self.densities.last().expect("empty trajectory")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Index holding `t`: `ρ(t) = ρ_k` for `t ∈ ((k-1)h, kh]`.
    pub fn index_at(&self, t: f64) -> usize {
        if t <= 0.0 || self.h <= 0.0 {
            return 0;
        }
        let k = (t / self.h - 1e-9).ceil().max(0.0) as usize;
        k.min(self.len() - 1)
    }

    pub fn sample(&self, t: f64) -> &GridDensity {
        &self.densities[self.index_at(t)]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,rho")?;
        for (t, rho) in self.times.iter().zip(&self.densities) {
            for (x, v) in rho.centers().iter().zip(rho.values()) {
                writeln!(w, "{t},{x},{v}")?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()
    }

    pub fn write_diagnostics_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for d in &self.diagnostics {
            writeln!(w, "{}", serde_json::to_string(d).map_err(std::io::Error::other)?)?;
        }
        Ok(())
    }

    pub fn save_diagnostics_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_diagnostics_jsonl(&mut w)?;
        w.flush()
    }
}

/// A run that stopped early: the error and everything computed before it.
#[derive(Debug, Error)]
#[error("step {step} failed: {source}")]
pub struct SchemeFailure {
    pub step: usize,
    #[source]
    pub source: JkoError,
    pub partial: SchemeTrajectory,
}

impl From<JkoError> for SchemeFailure {
    fn from(source: JkoError) -> Self {
        Self { step: 0, source, partial: SchemeTrajectory::default() }
    }
}

/// Number of steps covering `[0, t_final]`.
pub fn step_count(h: f64, t_final: f64) -> Result<usize, JkoError> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(JkoError::Parameter(format!("horizon {t_final} must be positive")));
    }
    let k = (t_final / h - 1e-9).ceil();
    if !(1.0..=1e6).contains(&k) {
        return Err(JkoError::Parameter(format!("T/h = {} outside 1..1e6", t_final / h)));
    }
    Ok(k as usize)
}

pub fn run_scheme(problem: &JkoProblem, rho0: &GridDensity, t_final: f64) -> Result<SchemeTrajectory, SchemeFailure> {
    let steps = step_count(problem.h, t_final)?;
    check_initial(rho0)?;
    problem.model.domain.check_same(&rho0.domain()).map_err(JkoError::from)?;
    let q0 = rho0.to_quantiles(problem.m).map_err(JkoError::from)?;
    let mut traj = SchemeTrajectory {
        h: problem.h,
        times: vec![0.0],
        densities: vec![rho0.rebin(problem.n).map_err(JkoError::from)?],
        quantiles: vec![q0],
        diagnostics: Vec::with_capacity(steps),
    };
    for k in 1..=steps {
        let prev = traj.quantiles.last().unwrap();
        let out = problem.step_quantiles(prev).and_then(|(q, d)| Ok((q.to_grid_smooth(problem.n)?, q, d)));
        match out {
            Ok((grid, q, d)) => {
                traj.times.push(k as f64 * problem.h);
                traj.densities.push(grid);
                traj.quantiles.push(q);
                traj.diagnostics.push(d);
            }
            Err(source) => return Err(SchemeFailure { step: k, source, partial: traj }),
        }
    }
    Ok(traj)
}

/// Result of one member of a floor sequence.
#[derive(Debug)]
pub struct FloorRun {
    pub delta: f64,
    pub result: Result<SchemeTrajectory, SchemeFailure>,
}

/// Runs `max(ρ0, δ)` renormalised for each `δ`, largest first.
pub fn run_with_floor(problem: &JkoProblem, rho0: &GridDensity, t_final: f64, deltas: &[f64]) -> Result<Vec<FloorRun>, JkoError> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(JkoError::Parameter("floor values must be positive".into()));
    }
    let mut ds = deltas.to_vec();
    ds.sort_by(|a, b| b.total_cmp(a));
    let mut out = Vec::with_capacity(ds.len());
    for delta in ds {
        let floored = rho0.floored(delta)?;
        out.push(FloorRun { delta, result: run_scheme(problem, &floored, t_final) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{CostSpec, EnergySpec, PotentialSpec};
    use crate::density::Domain;

    fn heat(h: f64, m: usize) -> JkoProblem {
        JkoProblem::new(Model::heat(Domain::unit()), h, m, m).unwrap()
    }

    #[test]
    fn uniform_is_fixed() {
        let p = heat(0.1, 32);
        let rho = GridDensity::uniform(Domain::unit(), 32);
        let (next, d) = jko_step(&p, &rho).unwrap();
        assert!(next.l1_distance(&rho).unwrap() < 1e-14);
        assert_eq!(d.W_value, 0.0);
        assert_eq!(d.iterations, 0);
    }

    #[test]
    fn one_step_trajectory() {
        let p = heat(0.01, 16);
        let rho = GridDensity::from_fn(Domain::unit(), 16, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos()).unwrap();
        let t = run_scheme(&p, &rho, 0.01).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.times, vec![0.0, 0.01]);
        let d = t.diagnostics[0];
        assert!(d.E_after.free <= d.E_before.free);
        assert!(d.kkt_residual <= 1e-9);
    }

    #[test]
    fn gradient_matches_objective() {
        let p = heat(0.05, 8);
        let rho = GridDensity::from_fn(Domain::unit(), 8, |x| 1.0 + x).unwrap();
        let q = rho.to_quantiles(8).unwrap();
        let (next, _) = p.step_quantiles(&q).unwrap();
        // perturbing the minimizer must not lower the objective
        let obj = |x: &[f64]| {
            let mu = 1.0 / 8.0;
            let f = EnergySpec::entropy();
            let c = CostSpec::quadratic();
            let mut s = 0.0;
            for j in 0..=8 {
                s += 0.05 * mu * crate::density::node_weight(j, 8) * c.value((q.nodes()[j] - x[j]) / 0.05);
            }
            for i in 1..=8 {
                let d = x[i] - x[i - 1];
                s += d * f.value(mu / d);
            }
            s
        };
        let base = obj(next.nodes());
        for j in 1..8 {
            for s in [-1e-4, 1e-4] {
                let mut y = next.nodes().to_vec();
                y[j] += s;
                assert!(obj(&y) >= base - 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = Model::new(CostSpec::quadratic(), EnergySpec::power(0.3).unwrap(), PotentialSpec::Zero, Domain::unit());
        assert!(matches!(JkoProblem::new(bad, 0.1, 16, 16), Err(JkoError::Assumptions(_))));
        assert!(JkoProblem::new(Model::heat(Domain::unit()), 0.0, 16, 16).is_err());
        assert!(JkoProblem::new(Model::heat(Domain::unit()), 0.1, 4, 16).is_err());
        assert!(step_count(0.1, 0.0).is_err());
        assert_eq!(step_count(0.1, 1.0).unwrap(), 10);
        assert_eq!(step_count(1e-3, 0.25).unwrap(), 250);
    }

    #[test]
    fn interpolation_rule() {
        let p = heat(0.1, 16);
        let rho = GridDensity::from_fn(Domain::unit(), 16, |x| 1.0 + x).unwrap();
        let t = run_scheme(&p, &rho, 0.3).unwrap();
        assert_eq!(t.index_at(0.0), 0);
        assert_eq!(t.index_at(0.05), 1);
        assert_eq!(t.index_at(0.1), 1);
        assert_eq!(t.index_at(0.1000001), 2);
        assert_eq!(t.index_at(5.0), 3);
    }

    #[test]
    fn jsonl_field_names() {
        let p = heat(0.1, 16);
        let rho = GridDensity::from_fn(Domain::unit(), 16, |x| 1.0 + x).unwrap();
        let t = run_scheme(&p, &rho, 0.1).unwrap();
        let mut buf = Vec::new();
        t.write_diagnostics_jsonl(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["E_after", "E_before", "W_value", "el_residual_L1", "iterations", "kkt_residual", "second_moment"]);
    }
}
