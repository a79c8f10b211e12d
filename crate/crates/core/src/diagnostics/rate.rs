use rayon::prelude::*;
use serde::Serialize;

use super::DiagnosticsError;
use crate::density::GridDensity;
use crate::jko::{run_scheme, JkoProblem};

/// `ε(q) = min(1, q - 1)`.
pub fn epsilon_q(q: f64) -> f64 {
    (q - 1.0).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub h: Vec<f64>,
    pub totals: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log-log residuals.
    pub residual: f64,
    pub expected: f64,
    pub margin: f64,
    pub passed: bool,
}

/// Least-squares fit of `log total = intercept + slope log h`.
pub fn fit_rate(h: &[f64], totals: &[f64], q: f64, margin: f64) -> Result<RateFit, DiagnosticsError> {
    if h.len() != totals.len() {
        return Err(DiagnosticsError::FitInvalid("h and totals differ in length".into()));
    }
    if h.len() < 4 {
        return Err(DiagnosticsError::FitInvalid(format!("{} step sizes, need at least 4", h.len())));
    }
    if h.iter().chain(totals).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(DiagnosticsError::FitInvalid("step sizes and totals must be positive".into()));
    }
    let mut idx: Vec<usize> = (0..h.len()).collect();
    idx.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
    if idx.windows(2).any(|w| h[w[0]] == h[w[1]] || totals[w[1]] >= totals[w[0]]) {
        return Err(DiagnosticsError::FitInvalid("totals do not decrease with h".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = totals.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    let expected = epsilon_q(q);
    Ok(RateFit { h: h.to_vec(), totals: totals.to_vec(), slope, intercept, residual, expected, margin, passed: slope >= expected - margin })
}

/// Runs the scheme for every `h` concurrently and fits the summed coupling
/// second moments against `h`.
pub fn second_moment_rate(
    template: &JkoProblem,
    rho0: &GridDensity,
    t_final: f64,
    h_list: &[f64],
    margin: f64,
) -> Result<RateFit, DiagnosticsError> {
    if h_list.len() < 4 {
        return Err(DiagnosticsError::FitInvalid(format!("{} step sizes, need at least 4", h_list.len())));
    }
    let totals = h_list
        .par_iter()
        .map(|&h| {
            let p = template.with_h(h)?;
            let t = run_scheme(&p, rho0, t_final).map_err(|e| DiagnosticsError::Member { h, source: Box::new(e) })?;
            Ok(t.diagnostics.iter().map(|d| d.second_moment).sum())
        })
        .collect::<Result<Vec<f64>, DiagnosticsError>>()?;
    fit_rate(h_list, &totals, template.model.cost.q(), margin)
}
