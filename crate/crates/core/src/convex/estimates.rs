use serde::Serialize;

use super::CostSpec;
use crate::numerics::linspace;

/// Smallest relative slack of each sampled conjugate inequality.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub samples: usize,
    /// `<z, (c*)'(z)> - c*(z) >= 0`
    pub euler_slack: f64,
    /// `c*(z) >= 0`
    pub nonneg_slack: f64,
    /// `c*(2z) - <z, (c*)'(z)> >= 0`
    pub doubling_slack: f64,
    /// `<z, (c*)'(z)> / beta - |(c*)'(z)|^q >= 0`
    pub coercive_slack: f64,
    /// `|c(x*) + c*(z) - x* z|`, relative
    pub fenchel_young_gap: f64,
    /// finite-difference mismatch of `(c*)'`, relative, away from 0
    pub gradient_fd_error: f64,
}

impl EstimateReport {
    /// Slack inequalities hold to `slack_tol`, Fenchel–Young to `fy_tol`, gradients to `fd_tol`.
    pub fn passes(&self, slack_tol: f64, fy_tol: f64, fd_tol: f64) -> bool {
        [self.euler_slack, self.nonneg_slack, self.doubling_slack, self.coercive_slack].iter().all(|&s| s >= -slack_tol)
            && self.fenchel_young_gap <= fy_tol
            && self.gradient_fd_error <= fd_tol
    }
}

/// Runs the conjugate inequality suite on `samples` points of `[-zmax, zmax]`.
pub fn conjugate_estimates(c: &CostSpec, samples: usize, zmax: f64) -> EstimateReport {
    let mut r = EstimateReport {
        samples,
        euler_slack: f64::INFINITY,
        nonneg_slack: f64::INFINITY,
        doubling_slack: f64::INFINITY,
        coercive_slack: f64::INFINITY,
        fenchel_young_gap: 0.0,
        gradient_fd_error: 0.0,
    };
    let (q, beta) = (c.q(), c.beta());
    for z in linspace(-zmax, zmax, samples) {
        let (cs, x) = c.conjugate(z);
        let pair = z * x;
        let scale = 1.0 + pair.abs() + cs.abs();
        r.euler_slack = r.euler_slack.min((pair - cs) / scale);
        r.nonneg_slack = r.nonneg_slack.min(cs / scale);
        let c2 = c.conjugate_value(2.0 * z);
        r.doubling_slack = r.doubling_slack.min((c2 - pair) / (1.0 + c2.abs()));
        let lhs = x.abs().powf(q);
        r.coercive_slack = r.coercive_slack.min((pair / beta - lhs) / (1.0 + lhs + (pair / beta).abs()));
        let fy = (c.value(x) + cs - pair).abs() / scale;
        r.fenchel_young_gap = r.fenchel_young_gap.max(fy);
        if z.abs() > 1e-2 {
            let h = 1e-5 * z.abs();
            let fd = (c.conjugate_value(z + h) - c.conjugate_value(z - h)) / (2.0 * h);
            r.gradient_fd_error = r.gradient_fd_error.max((fd - x).abs() / x.abs().max(1e-300));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::PowerTerm;

    #[test]
    fn suite_passes_on_admissible_costs() {
        let costs = [
            CostSpec::power(1.5).unwrap(),
            CostSpec::quadratic(),
            CostSpec::power(3.0).unwrap(),
            CostSpec::new(vec![PowerTerm { coef: 1.0 / 3.0, exponent: 3.0 }, PowerTerm { coef: 1.0, exponent: 1.5 }]).unwrap(),
        ];
        for c in &costs {
            let r = conjugate_estimates(c, 1000, 50.0);
            assert!(r.passes(1e-10, 1e-9, 1e-6), "{r:?}");
        }
    }
}
