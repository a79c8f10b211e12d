//! Independent references: implicit finite differences, equilibrium states
//! and the porous-medium source solution.

mod barenblatt;
mod fd;

pub use barenblatt::{barenblatt, barenblatt_constants, barenblatt_density, barenblatt_radius};
pub use fd::{fd_solve, FdConfig};

use thiserror::Error;

use crate::convex::{EnergySpec, PotentialSpec};
use crate::density::{DensityError, Domain, GridDensity};
use crate::numerics::{bisect_increasing, neumaier};

#[derive(Debug, Error)]
pub enum RefSolveError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("Newton iteration failed at step {step} (residual {residual:e})")]
    Newton { step: usize, residual: f64, last: GridDensity },
    #[error("negative density persisted at step {step}")]
    NegativeDensity { step: usize, last: GridDensity },
    #[error("mass 1 not reachable: {0}")]
    Bracket(String),
}

/// Equilibrium state `ρ = (F')^{-1}(λ - V)`, zero where `λ - V` falls below
/// the range of `F'`, with `λ` fixed by unit mass.
pub fn gibbs_state(f: &EnergySpec, v: &PotentialSpec, domain: Domain, n: usize) -> Result<GridDensity, RefSolveError> {
    if n == 0 {
        return Err(RefSolveError::Parameter("grid size must be positive".into()));
    }
    let dx = domain.length() / n as f64;
    let vx: Vec<f64> = (0..n).map(|j| v.value(domain.center(j, n))).collect();
    let profile = |lambda: f64| -> Vec<f64> { vx.iter().map(|&p| f.inverse_first(lambda - p).unwrap_or(0.0)).collect() };
    let mass = |lambda: f64| neumaier(profile(lambda).into_iter().map(|r| r * dx));

    let (vmin, vmax) = vx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    // λ = F'(1/|Ω|) + V is exact for constant V; widen around it
    let guess = f.first(1.0 / domain.length());
    let mut lo = guess + vmin - 1.0;
    let mut hi = guess + vmax + 1.0;
    let mut width = 1.0;
    for _ in 0..200 {
        if mass(lo) < 1.0 {
            break;
        }
        width *= 2.0;
        lo -= width;
    }
    width = 1.0;
    for _ in 0..200 {
        if mass(hi) > 1.0 {
            break;
        }
        width *= 2.0;
        hi += width;
    }
    if !(mass(lo) < 1.0 && mass(hi) > 1.0) {
        return Err(RefSolveError::Bracket(format!("bracket [{lo}, {hi}] does not enclose unit mass")));
    }
    let lambda = bisect_increasing(mass, 1.0, lo, hi, 200);
    let values = profile(lambda);
    Ok(GridDensity::normalize(domain, values)?.density)
}
