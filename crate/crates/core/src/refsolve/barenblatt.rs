use statrs::function::beta::beta;

use super::RefSolveError;
use crate::density::{Domain, GridDensity};
use crate::numerics::adaptive_simpson;

/// Constants `(alpha, kappa, C)` of the one-dimensional source solution.
pub fn barenblatt_constants(m: f64, mass: f64) -> Result<(f64, f64, f64), RefSolveError> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(RefSolveError::Parameter(format!("Barenblatt exponent m = {m} must exceed 1")));
    }
    if !(mass > 0.0) {
        return Err(RefSolveError::Parameter(format!("mass {mass} must be positive")));
    }
    let alpha = 1.0 / (m + 1.0);
    let kappa = alpha * (m - 1.0) / (2.0 * m);
    let k = 1.0 / (m - 1.0);
    // mass = C^{k+1/2} kappa^{-1/2} B(1/2, k+1)
    let c = (mass * kappa.sqrt() / beta(0.5, k + 1.0)).powf(1.0 / (k + 0.5));
    Ok((alpha, kappa, c))
}

/// `t^{-α} (C - κ x^2 t^{-2α})_+^{1/(m-1)}`.
pub fn barenblatt(m: f64, mass: f64, t: f64, x: f64) -> Result<f64, RefSolveError> {
    if !(t > 0.0) {
        return Err(RefSolveError::Parameter(format!("time {t} must be positive")));
    }
    let (alpha, kappa, c) = barenblatt_constants(m, mass)?;
    Ok(profile(alpha, kappa, c, m, t, x))
}

fn profile(alpha: f64, kappa: f64, c: f64, m: f64, t: f64, x: f64) -> f64 {
    let ta = t.powf(-alpha);
    let inner = c - kappa * x * x * ta * ta;
    if inner <= 0.0 {
        0.0
    } else {
        ta * inner.powf(1.0 / (m - 1.0))
    }
}

/// Support half-width at time `t`.
pub fn barenblatt_radius(m: f64, mass: f64, t: f64) -> Result<f64, RefSolveError> {
    let (alpha, kappa, c) = barenblatt_constants(m, mass)?;
    Ok((c / kappa).sqrt() * t.powf(alpha))
}

/// Cell averages of the profile on an `n`-cell grid, normalised.
pub fn barenblatt_density(m: f64, mass: f64, t: f64, domain: Domain, n: usize) -> Result<GridDensity, RefSolveError> {
    if !(t > 0.0) {
        return Err(RefSolveError::Parameter(format!("time {t} must be positive")));
    }
    let (alpha, kappa, c) = barenblatt_constants(m, mass)?;
    let r = (c / kappa).sqrt() * t.powf(alpha);
    let f = |x: f64| profile(alpha, kappa, c, m, t, x);
    let dx = domain.length() / n as f64;
    let values = (0..n)
        .map(|j| {
            let lo = domain.edge(j, n).max(-r);
            let hi = domain.edge(j + 1, n).min(r);
            if hi > lo {
                adaptive_simpson(&f, lo, hi, 1e-12, 40) / dx
            } else {
                0.0
            }
        })
        .collect();
    Ok(GridDensity::normalize(domain, values)?.density)
}
