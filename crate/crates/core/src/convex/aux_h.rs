use super::{ConvexError, EnergySpec};
use crate::numerics::adaptive_simpson;

const SIMPSON_REL_TOL: f64 = 1e-10;

/// `H` with `H''(x) = x^{1/q*} F''(x)`, normalised by `H'(1) = 0`.
#[derive(Debug, Clone)]
pub struct AuxiliaryH {
    energy: EnergySpec,
    q_star: f64,
}

impl AuxiliaryH {
    pub fn new(energy: EnergySpec, q_star: f64) -> Result<Self, ConvexError> {
        if !(q_star > 1.0) || !q_star.is_finite() {
            return Err(ConvexError::InvalidCost(format!("conjugate exponent {q_star} must exceed 1")));
        }
        Ok(Self { energy, q_star })
    }

    pub fn second(&self, x: f64) -> f64 {
        x.powf(1.0 / self.q_star) * self.energy.second(x)
    }

    /// `H'(x) = ∫_1^x H''`, integrated in `u = ln s`.
    pub fn first(&self, x: f64) -> Result<f64, ConvexError> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(ConvexError::Domain(x));
        }
        let g = |u: f64| {
            let s = u.exp();
            s * self.second(s)
        };
        let (lo, hi) = (0.0, x.ln());
        // split long log-intervals so the relative tolerance bites on each decade
        let pieces = ((hi - lo).abs() / 2.0).ceil().max(1.0) as usize;
        let mut total = 0.0;
        for k in 0..pieces {
            let a = lo + (hi - lo) * k as f64 / pieces as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / pieces as f64;
            total += adaptive_simpson(&g, a, b, SIMPSON_REL_TOL, 50);
        }
        Ok(total)
    }

    /// Whether `H'` stays bounded as `x -> 0+`, judged from the geometric decay
    /// of increments over decades 1e-4 .. 1e-12.
    pub fn bounded_at_zero(&self) -> (bool, f64) {
        let vals: Vec<f64> = (4..=12).map(|k| self.first(10f64.powi(-k)).unwrap_or(f64::NAN)).collect();
        let first = (vals[1] - vals[0]).abs();
        let last = (vals[8] - vals[7]).abs();
        if !(first.is_finite() && last.is_finite()) {
            return (false, vals[8]);
        }
        if first == 0.0 {
            return (last == 0.0, vals[8]);
        }
        let ratio = (last / first).powf(1.0 / 7.0);
        (ratio < 1.0 - 1e-3, vals[8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_matches_closed_form() {
        // F = x^2: H'' = 2 x^{1/2} for q* = 2, H'(x) = (4/3)(x^{3/2} - 1)
        let h = AuxiliaryH::new(EnergySpec::power(2.0).unwrap(), 2.0).unwrap();
        for &x in &[1e-6f64, 0.3, 1.0, 5.0] {
            let exact = 4.0 / 3.0 * (x.powf(1.5) - 1.0);
            assert!((h.first(x).unwrap() - exact).abs() < 1e-9 * (1.0 + exact.abs()));
        }
        assert!(h.bounded_at_zero().0);
    }

    #[test]
    fn unbounded_below_range() {
        // x^{0.3}/(0.3-1) with q* = 2: exponent m - 1 + 1/q* = -0.2
        let h = AuxiliaryH::new(EnergySpec::power(0.3).unwrap(), 2.0).unwrap();
        assert!(!h.bounded_at_zero().0);
        let e = AuxiliaryH::new(EnergySpec::entropy(), 2.0).unwrap();
        assert!(e.bounded_at_zero().0);
    }
}
