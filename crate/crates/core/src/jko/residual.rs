use serde::Serialize;

use super::{JkoError, JkoProblem};
use crate::convex::{CostSpec, EnergySpec, PotentialSpec};
use crate::density::{node_weight, GridDensity, QuantileRep};
use crate::numerics::{neumaier, NeumaierSum};
use crate::transport::{monotone_map, InterpolantPath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocitySample {
    pub y: f64,
    /// `(S(y) - y)/h`.
    pub transport: f64,
    /// `(c*)'(∂_x(F'(ρ) + V))(y)`.
    pub field: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElResidual {
    pub residual_l1: f64,
    /// `∫ |(c*)'(∂_x w)| ρ`, the scale for `relative`.
    pub field_l1: f64,
    pub relative: f64,
    pub velocity: Vec<VelocitySample>,
}

/// Centred differences of `w` over positive cells, one-sided next to edges
/// and empty cells.
fn grid_gradient(rho: &GridDensity, w: &[f64]) -> Vec<f64> {
    let n = rho.n();
    let dx = rho.dx();
    let v = rho.values();
    let pos = |k: usize| v[k] > 0.0;
    (0..n)
        .map(|j| {
            if !pos(j) {
                return 0.0;
            }
            let left = j > 0 && pos(j - 1);
            let right = j + 1 < n && pos(j + 1);
            match (left, right) {
                (true, true) => (w[j + 1] - w[j - 1]) / (2.0 * dx),
                (false, true) => (w[j + 1] - w[j]) / dx,
                (true, false) => (w[j] - w[j - 1]) / dx,
                (false, false) => 0.0,
            }
        })
        .collect()
}

fn chemical_potential(rho: &GridDensity, f: &EnergySpec, v: &PotentialSpec) -> Vec<f64> {
    rho.values().iter().zip(rho.centers()).map(|(&r, x)| if r > 0.0 { f.first(r) + v.value(x) } else { 0.0 }).collect()
}

/// Grid Euler-Lagrange mismatch `∫ |(S(y) - y)/h - (c*)'(∂_x(F'(ρ_next) + V))| ρ_next`
/// with `S` pushing `rho_next` onto `rho_prev`.
pub fn euler_lagrange_residual(problem: &JkoProblem, rho_prev: &GridDensity, rho_next: &GridDensity) -> Result<ElResidual, JkoError> {
    let model = &problem.model;
    let s = monotone_map(rho_prev, rho_next, problem.m)?;
    let w = chemical_potential(rho_next, &model.energy, &model.potential);
    let grad = grid_gradient(rho_next, &w);
    let dx = rho_next.dx();
    let mut res = NeumaierSum::new();
    let mut field = NeumaierSum::new();
    let mut velocity = Vec::with_capacity(rho_next.n());
    for (j, &r) in rho_next.values().iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        let y = rho_next.center(j);
        let transport = (s.eval(y) - y) / problem.h;
        let rhs = model.cost.conjugate_gradient(grad[j]);
        res.add((transport - rhs).abs() * r * dx);
        field.add(rhs.abs() * r * dx);
        velocity.push(VelocitySample { y, transport, field: rhs });
    }
    let (residual_l1, field_l1) = (res.value(), field.value());
    let relative = if field_l1 > 0.0 { residual_l1 / field_l1 } else { residual_l1 };
    Ok(ElResidual { residual_l1, field_l1, relative, velocity })
}

/// `(E_i(ρ0) - E_i(ρ1), ∫ ∂_x F'(ρ1) (S(y) - y) ρ1 dy)` on the grid, with `S`
/// pushing `rho1` onto `rho0` at quantile resolution `m`.
pub fn energy_inequality(f: &EnergySpec, rho0: &GridDensity, rho1: &GridDensity, m: usize) -> Result<(f64, f64), JkoError> {
    let zero = PotentialSpec::Zero;
    let lhs = rho0.energy(f, &zero).internal - rho1.energy(f, &zero).internal;
    let s = monotone_map(rho0, rho1, m)?;
    let w = chemical_potential(rho1, f, &zero);
    let grad = grid_gradient(rho1, &w);
    let dx = rho1.dx();
    let rhs = neumaier(rho1.values().iter().enumerate().filter(|(_, r)| **r > 0.0).map(|(j, &r)| {
        let y = rho1.center(j);
        grad[j] * (s.eval(y) - y) * r * dx
    }));
    Ok((lhs, rhs))
}

/// Lagrangian form of [`energy_inequality`]: `Σ_j (P_{j+1} - P_j)(X0_j - X1_j)`
/// with the exact cellwise internal energy.
pub fn energy_inequality_quantile(f: &EnergySpec, q0: &QuantileRep, q1: &QuantileRep) -> Result<(f64, f64), JkoError> {
    if q0.m() != q1.m() {
        return Err(JkoError::Parameter(format!("resolutions differ: {} vs {}", q0.m(), q1.m())));
    }
    let zero = PotentialSpec::Zero;
    let lhs = q0.energy(f, &zero).internal - q1.energy(f, &zero).internal;
    let p: Vec<f64> = q1.cell_densities().iter().map(|&r| f.pressure(r)).collect();
    let m = q1.m();
    let rhs = neumaier((0..=m).map(|j| {
        let right = if j < m { p[j] } else { 0.0 };
        let left = if j > 0 { p[j - 1] } else { 0.0 };
        (right - left) * (q0.nodes()[j] - q1.nodes()[j])
    }));
    Ok((lhs, rhs))
}

/// Largest midpoint violation `E(t_k) - (E(t_{k-1}) + E(t_{k+1}))/2` of the
/// internal energy along the interpolant, on `points` equispaced values of `t`.
pub fn displacement_convexity_violation(f: &EnergySpec, path: &InterpolantPath, points: usize) -> Result<f64, JkoError> {
    if points < 3 {
        return Err(JkoError::Parameter("need at least three interpolation points".into()));
    }
    let zero = PotentialSpec::Zero;
    let e: Vec<f64> = (0..points)
        .map(|k| Ok(path.nodes_at(k as f64 / (points - 1) as f64)?.energy(f, &zero).internal))
        .collect::<Result<_, JkoError>>()?;
    Ok(e.windows(3).map(|w| w[1] - 0.5 * (w[0] + w[2])).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dissipation {
    /// `∫ ⟨∂w, (c*)'(∂w)⟩ ρ` with `w = F'(ρ) + V`.
    pub rate: f64,
    /// `∫ |∂w|^{q*} ρ`.
    pub integrand: f64,
}

/// Discrete dissipation of a quantile state. At node `j` the slope of
/// `F'(ρ) + V` is `(P_{j+1} - P_j)/(μ w_j) + V'(X_j)`; nodes pinned to the
/// domain boundary carry none.
pub fn free_energy_dissipation(c: &CostSpec, f: &EnergySpec, v: &PotentialSpec, q: &QuantileRep) -> Dissipation {
    let m = q.m();
    let mu = q.mass_per_cell();
    let dom = q.domain();
    let eps = 1e-14 * dom.length();
    let p: Vec<f64> = q.cell_densities().iter().map(|&r| f.pressure(r)).collect();
    let qs = c.q_star();
    let mut rate = NeumaierSum::new();
    let mut integrand = NeumaierSum::new();
    for (j, &x) in q.nodes().iter().enumerate() {
        if x <= dom.a + eps || x >= dom.b - eps {
            continue;
        }
        let w = mu * node_weight(j, m);
        let right = if j < m { p[j] } else { 0.0 };
        let left = if j > 0 { p[j - 1] } else { 0.0 };
        let slope = (right - left) / w + v.derivative(x);
        rate.add(w * slope * c.conjugate_gradient(slope));
        integrand.add(w * slope.abs().powf(qs));
    }
    Dissipation { rate: rate.value(), integrand: integrand.value() }
}
