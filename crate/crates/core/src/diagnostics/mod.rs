//! Inequality ledgers, step-size rate fits and trajectory comparisons.

mod rate;

pub use rate::{epsilon_q, fit_rate, second_moment_rate, RateFit};

use serde::Serialize;
use thiserror::Error;

use crate::density::DensityError;
use crate::jko::{free_energy_dissipation, JkoError, SchemeTrajectory};
use crate::model::Model;
use crate::transport::{quantile_transport_cost, TransportError};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("incomplete ledger: {0}")]
    IncompleteLedger(String),
    #[error("invalid rate fit: {0}")]
    FitInvalid(String),
    #[error("study member with h = {h} failed: {source}")]
    Member { h: f64, source: Box<crate::jko::SchemeFailure> },
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Jko(#[from] JkoError),
}

/// Every threshold used by the ledger, the rate contract and comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Per-step `E_k + h W_k ≤ E_{k-1} + tol`.
    pub energy_step: f64,
    /// `Σ h W ≤ E(ρ0) - |Ω| F(1/|Ω|) + tol`.
    pub cumulative: f64,
    /// Min/max principle slack in units of `1/m`.
    pub bound_cells: f64,
    /// Per-step free-energy inequality.
    pub free_energy: f64,
    /// Allowed shortfall of the fitted slope below `ε(q)`.
    pub rate_margin: f64,
    /// Oracle relative deviation.
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { energy_step: 1e-9, cumulative: 1e-8, bound_cells: 4.0, free_energy: 1e-6, rate_margin: 0.15, oracle: 1e-9 }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRecord {
    pub k: usize,
    pub E_internal: f64,
    pub E_free: f64,
    /// `W_c^h(ρ_{k-1}, ρ_k)`; zero for `k = 0`.
    pub W: f64,
    pub second_moment: f64,
    /// `∫ ρ_k |∂_x(F'(ρ_k) + V)|^{q*}`.
    pub dissipation_integrand: f64,
    /// `∫ ⟨∂_x w, (c*)'(∂_x w)⟩ ρ_k`.
    pub dissipation_rate: f64,
    pub el_residual: f64,
    pub essinf: f64,
    pub esssup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cumulative {
    pub h_w: f64,
    pub second_moment: f64,
    pub h_dissipation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flag {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest margin; negative means violated.
    pub slack: f64,
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityLedger {
    pub h: f64,
    pub records: Vec<LedgerRecord>,
    pub cumulative: Cumulative,
    /// `|Ω| F(1/|Ω|)`.
    pub energy_floor: f64,
    /// Dissipation bound `M̄`.
    pub dissipation_bound: f64,
    pub flags: Vec<Flag>,
}

impl InequalityLedger {
    pub fn all_pass(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn flag(&self, name: &str) -> Option<&Flag> {
        self.flags.iter().find(|f| f.name == name)
    }
}

/// Builds the ledger from the quantile states and step records of a scheme
/// run. Energies, costs and dissipation are recomputed from the states.
pub fn ledger(model: &Model, traj: &SchemeTrajectory, tol: &Tolerances) -> Result<InequalityLedger, DiagnosticsError> {
    let steps = traj.len().saturating_sub(1);
    if traj.is_empty() || traj.quantiles.len() != traj.len() {
        return Err(DiagnosticsError::IncompleteLedger("quantile states missing".into()));
    }
    if traj.diagnostics.len() != steps {
        return Err(DiagnosticsError::IncompleteLedger(format!("{} step records for {steps} steps", traj.diagnostics.len())));
    }
    let h = traj.h;
    let (c, f, v) = (&model.cost, &model.energy, &model.potential);
    let mut records = Vec::with_capacity(traj.len());
    for (k, q) in traj.quantiles.iter().enumerate() {
        let e = q.energy(f, v);
        let (w, m2, el) = if k == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let d = &traj.diagnostics[k - 1];
            (quantile_transport_cost(&traj.quantiles[k - 1], q, c, h)?, d.second_moment, d.el_residual_L1)
        };
        let diss = free_energy_dissipation(c, f, v, q);
        let g = &traj.densities[k];
        records.push(LedgerRecord {
            k,
            E_internal: e.internal,
            E_free: e.free,
            W: w,
            second_moment: m2,
            dissipation_integrand: diss.integrand,
            dissipation_rate: diss.rate,
            el_residual: el,
            essinf: g.essinf(),
            esssup: g.esssup(),
        });
    }
    let later = &records[1..];
    let cumulative = Cumulative {
        h_w: later.iter().map(|r| h * r.W).sum(),
        second_moment: later.iter().map(|r| r.second_moment).sum(),
        h_dissipation: later.iter().map(|r| h * r.dissipation_integrand).sum(),
    };

    let first = records[0];
    let energy_floor = model.jensen_floor();
    let m = traj.quantiles[0].m() as f64;
    let mut flags = Vec::new();

    let step_slack = records.windows(2).map(|p| p[0].E_free - p[1].E_free - h * p[1].W).fold(f64::INFINITY, f64::min);
    flags.push(Flag { name: "energy_dissipation", passed: step_slack >= -tol.energy_step, slack: step_slack, applicable: true });

    let cum_slack = first.E_free - energy_floor - cumulative.h_w;
    flags.push(Flag { name: "cumulative_cost", passed: cum_slack >= -tol.cumulative, slack: cum_slack, applicable: true });

    let band = tol.bound_cells / m;
    let bound_slack =
        records.iter().map(|r| (r.essinf - (first.essinf - band)).min(first.esssup + band - r.esssup)).fold(f64::INFINITY, f64::min);
    let applicable = v.is_zero();
    flags.push(Flag { name: "min_max_principle", passed: !applicable || bound_slack >= 0.0, slack: bound_slack, applicable });

    let dissipation_bound = dissipation_bound(model, traj)?;
    let diss_slack = dissipation_bound - cumulative.h_dissipation;
    flags.push(Flag { name: "dissipation_bound", passed: diss_slack >= 0.0, slack: diss_slack, applicable: true });

    let fe_slack = records.windows(2).map(|p| p[0].E_free - p[1].E_free - h * p[1].dissipation_rate).fold(f64::INFINITY, f64::min);
    flags.push(Flag { name: "free_energy_inequality", passed: fe_slack >= -tol.free_energy, slack: fe_slack, applicable: true });

    Ok(InequalityLedger { h, records, cumulative, energy_floor, dissipation_bound, flags })
}

/// `M̄ = (E(ρ0) - |Ω| F(1/|Ω|) + α T |Ω| ‖ρ0‖_∞) / K` with
/// `K = (α q)^{1 - q*} / q*`.
fn dissipation_bound(model: &Model, traj: &SchemeTrajectory) -> Result<f64, DiagnosticsError> {
    let c = &model.cost;
    let (q, qs, alpha) = (c.q(), c.q_star(), c.alpha());
    let k = (alpha * q).powf(1.0 - qs) / qs;
    let q0 = &traj.quantiles[0];
    let e0 = q0.energy(&model.energy, &model.potential).free;
    let sup0 = q0.esssup();
    let l = model.domain.length();
    Ok((e0 - model.jensen_floor() + alpha * traj.final_time() * l * sup0) / k)
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub L1_final: f64,
    pub L1_sup_in_time: f64,
}

/// L¹ distances between `a` and `b` at `a`'s times, sampling `b` by the
/// previous-value rule.
#[allow(non_snake_case)]
pub fn compare(a: &SchemeTrajectory, b: &SchemeTrajectory) -> Result<Comparison, DiagnosticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DiagnosticsError::IncompleteLedger("empty trajectory".into()));
    }
    a.initial().domain().check_same(&b.initial().domain())?;
    let mut l1 = Vec::with_capacity(a.len());
    for (t, rho) in a.times.iter().zip(&a.densities) {
        l1.push(rho.l1_distance(b.sample(*t))?);
    }
    let L1_final = *l1.last().unwrap();
    let L1_sup_in_time = l1.iter().copied().fold(0.0, f64::max);
    Ok(Comparison { times: a.times.clone(), l1, L1_final, L1_sup_in_time })
}

/// Single JSON document for one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub run_config: serde_json::Value,
    pub ledger: Option<InequalityLedger>,
    pub flags: Vec<Flag>,
    pub rate_fits: Vec<RateFit>,
    pub comparisons: Vec<Comparison>,
}

impl Report {
    pub fn new(run_config: serde_json::Value) -> Self {
        Self { run_config, ledger: None, flags: Vec::new(), rate_fits: Vec::new(), comparisons: Vec::new() }
    }

    pub fn with_ledger(mut self, ledger: InequalityLedger) -> Self {
        self.flags = ledger.flags.clone();
        self.ledger = Some(ledger);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
