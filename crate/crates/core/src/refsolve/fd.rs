use serde::{Deserialize, Serialize};

use super::RefSolveError;
use crate::density::GridDensity;
use crate::jko::SchemeTrajectory;
use crate::model::Model;
use crate::numerics::solve_tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub n: usize,
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_iter")]
    pub newton_max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_iter() -> usize {
    60
}

impl FdConfig {
    pub fn new(n: usize, dt: f64) -> Self {
        Self { n, dt, newton_tol: default_tol(), newton_max_iter: default_iter() }
    }

    fn check(&self) -> Result<(), RefSolveError> {
        if self.n < 16 {
            return Err(RefSolveError::Parameter(format!("grid size {} below 16", self.n)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(RefSolveError::Parameter(format!("time step {} must be positive", self.dt)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(RefSolveError::Parameter("Newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

struct Stepper<'a> {
    model: &'a Model,
    dx: f64,
    dt: f64,
    vx: Vec<f64>,
    singular_at_zero: bool,
}

impl<'a> Stepper<'a> {
    /// Face fluxes `ρ_face (c*)'((w_{j+1} - w_j)/Δx)`, zero on the boundary.
    fn fluxes(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        let f = &self.model.energy;
        let w: Vec<f64> = rho.iter().zip(&self.vx).map(|(&r, v)| if r > 0.0 { f.first(r) + v } else { f.first_at_zero() + v }).collect();
        let mut flux = vec![0.0; n + 1];
        for j in 0..n - 1 {
            let face = 0.5 * (rho[j] + rho[j + 1]);
            if face > 0.0 {
                flux[j + 1] = face * self.model.cost.conjugate_gradient((w[j + 1] - w[j]) / self.dx);
            }
        }
        flux
    }

    /// `ρ_old + Δt/Δx (Φ_{j+1/2} - Φ_{j-1/2})` evaluated at `rho`.
    fn update(&self, old: &[f64], rho: &[f64]) -> Vec<f64> {
        let flux = self.fluxes(rho);
        let r = self.dt / self.dx;
        old.iter().enumerate().map(|(j, o)| o + r * (flux[j + 1] - flux[j])).collect()
    }

    fn residual(&self, old: &[f64], rho: &[f64]) -> Vec<f64> {
        self.update(old, rho).iter().zip(rho).map(|(u, r)| r - u).collect()
    }

    /// Tridiagonal Jacobian by three-colour forward differences.
    fn jacobian(&self, old: &[f64], rho: &[f64], res: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = rho.len();
        let mut lower = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n - 1];
        for colour in 0..3 {
            let mut pert = rho.to_vec();
            let mut eps = vec![0.0; n];
            for j in (colour..n).step_by(3) {
                eps[j] = 1e-7 * rho[j].abs().max(1e-6);
                pert[j] += eps[j];
            }
            let rp = self.residual(old, &pert);
            for j in (colour..n).step_by(3) {
                diag[j] = (rp[j] - res[j]) / eps[j];
                if j > 0 {
                    upper[j - 1] = (rp[j - 1] - res[j - 1]) / eps[j];
                }
                if j + 1 < n {
                    lower[j] = (rp[j + 1] - res[j + 1]) / eps[j];
                }
            }
        }
        (lower, diag, upper)
    }

    fn step(&self, old: &[f64], tol: f64, max_iter: usize, k: usize) -> Result<Vec<f64>, RefSolveError> {
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut rho = old.to_vec();
        let mut res = self.residual(old, &rho);
        let mut rn = norm(&res);
        let mut clamped = false;
        for _ in 0..max_iter {
            if rn <= tol {
                // one explicit flux evaluation at the solution keeps the update telescoping
                let mut out = self.update(old, &rho);
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        if *v < -1e-8 {
                            return Err(RefSolveError::NegativeDensity { step: k, last: self.grid(rho) });
                        }
                        *v = 0.0;
                    }
                }
                return Ok(out);
            }
            let (lower, diag, upper) = self.jacobian(old, &rho, &res);
            let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or_else(|| RefSolveError::Newton {
                step: k,
                residual: rn,
                last: self.grid(rho.clone()),
            })?;
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-10 {
                let mut trial: Vec<f64> = rho.iter().zip(&delta).map(|(r, d)| r + alpha * d).collect();
                if trial.iter().any(|v| *v <= 0.0) {
                    if self.singular_at_zero {
                        alpha *= 0.5;
                        continue;
                    }
                    for v in trial.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                            clamped = true;
                        }
                    }
                }
                let tr = self.residual(old, &trial);
                let tn = norm(&tr);
                if tn.is_finite() && (tn <= (1.0 - 1e-4 * alpha) * rn || tn <= tol) {
                    rho = trial;
                    res = tr;
                    rn = tn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if clamped {
            return Err(RefSolveError::NegativeDensity { step: k, last: self.grid(rho) });
        }
        Err(RefSolveError::Newton { step: k, residual: rn, last: self.grid(rho) })
    }

    fn grid(&self, values: Vec<f64>) -> GridDensity {
        GridDensity::new(self.model.domain, values.clone()).unwrap_or_else(|_| {
            GridDensity::normalize(self.model.domain, values)
                .map(|n| n.density)
                .unwrap_or_else(|_| GridDensity::uniform(self.model.domain, 16))
        })
    }
}

/// Implicit Euler finite-volume solve of `∂ρ/∂t = ∂_x(ρ (c*)'(∂_x(F'(ρ) + V)))`
/// with no-flux boundaries, stored at `t_k = k Δt`.
pub fn fd_solve(model: &Model, rho0: &GridDensity, t_final: f64, cfg: &FdConfig) -> Result<SchemeTrajectory, RefSolveError> {
    cfg.check()?;
    model.domain.check_same(&rho0.domain())?;
    if !(t_final > 0.0) {
        return Err(RefSolveError::Parameter(format!("horizon {t_final} must be positive")));
    }
    let steps = (t_final / cfg.dt - 1e-9).ceil();
    if !(1.0..=1e7).contains(&steps) {
        return Err(RefSolveError::Parameter(format!("T/dt = {} out of range", t_final / cfg.dt)));
    }
    let steps = steps as usize;
    let start = if rho0.n() == cfg.n { rho0.clone() } else { rho0.rebin(cfg.n)? };
    let singular_at_zero = model.energy.first_at_zero() == f64::NEG_INFINITY;
    if singular_at_zero && !start.is_strictly_positive() {
        return Err(RefSolveError::Parameter("initial density must be strictly positive".into()));
    }
    let vx = (0..cfg.n).map(|j| model.potential.value(model.domain.center(j, cfg.n))).collect();
    let stepper = Stepper { model, dx: start.dx(), dt: cfg.dt, vx, singular_at_zero };

    let mut traj = SchemeTrajectory { h: cfg.dt, times: vec![0.0], densities: vec![start], ..Default::default() };
    for k in 1..=steps {
        let old = traj.densities.last().unwrap().values().to_vec();
        let next = stepper.step(&old, cfg.newton_tol, cfg.newton_max_iter, k)?;
        traj.times.push(k as f64 * cfg.dt);
        traj.densities.push(GridDensity::new(model.domain, next)?);
    }
    Ok(traj)
}
