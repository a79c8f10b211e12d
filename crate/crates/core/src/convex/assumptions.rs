use serde::{Deserialize, Serialize};

use super::{AuxiliaryH, CostSpec, EnergySpec, EnergyTerm, PotentialSpec};
use crate::numerics::{linspace, logspace};

const SAMPLES: usize = 1000;
const CONVEXITY_SLACK: f64 = 1e-10;

/// Outcome of one sampled assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub passed: bool,
    /// Failing checks with `gating = false` are reported but do not block runs.
    pub gating: bool,
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.gating)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed && c.gating).collect()
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn push(&mut self, check: AssumptionCheck) {
        self.checks.push(check);
    }
}

fn check(id: &str, gating: bool, witness: Option<f64>, detail: impl Into<String>) -> AssumptionCheck {
    AssumptionCheck { id: id.into(), passed: witness.is_none(), gating, witness, detail: detail.into() }
}

fn sample_z() -> Vec<f64> {
    let pos = logspace(1e-6, 1e6, SAMPLES / 2);
    let mut z: Vec<f64> = pos.iter().map(|x| -x).rev().collect();
    z.extend(pos);
    z
}

/// Second divided differences on a (possibly nonuniform) grid, scaled to be
/// comparable with the function values; returns the first negative witness.
fn convexity_witness<F: Fn(f64) -> f64>(f: F, xs: &[f64]) -> Option<f64> {
    for w in xs.windows(3) {
        let (x0, x1, x2) = (w[0], w[1], w[2]);
        let (f0, f1, f2) = (f(x0), f(x1), f(x2));
        let dd = ((f2 - f1) / (x2 - x1) - (f1 - f0) / (x1 - x0)) / (x2 - x0);
        let scale = (f0.abs() + f1.abs() + f2.abs()) / ((x2 - x0) * (x2 - x0)) + f64::MIN_POSITIVE;
        if !dd.is_finite() || dd < -CONVEXITY_SLACK * scale.max(1.0) {
            return Some(x1);
        }
    }
    None
}

/// Admissible power exponents in one dimension: `m > 1`, or `max(1/q, 0) <= m < 1`.
pub fn power_exponent_admissible(m: f64, q: f64) -> bool {
    m > 1.0 || (m >= (1.0 / q).max(0.0) && m < 1.0)
}

/// Sampled validation of the standing assumptions on `(c, F, V)` over `[a, b]`.
pub fn validate_assumptions(c: &CostSpec, f: &EnergySpec, v: &PotentialSpec, bounds: (f64, f64)) -> AssumptionReport {
    let mut rep = AssumptionReport::default();
    let zs = sample_z();

    let w = (c.value(0.0) != 0.0).then_some(0.0).or_else(|| zs.iter().copied().find(|&z| !(c.value(z) > 0.0)));
    rep.push(check("HC1", true, w, "c(0) = 0 < c(z) for z != 0"));

    let grow: Vec<f64> = logspace(1.0, 1e6, 200);
    let w = grow.windows(2).find(|p| !(c.value(p[1]) / p[1] > c.value(p[0]) / p[0])).map(|p| p[1]);
    rep.push(check("HC2", true, w, "c(z)/|z| increases without bound"));

    let (q, alpha, beta) = (c.q(), c.alpha(), c.beta());
    let w = zs.iter().copied().find(|&z| {
        let a = z.abs().powf(q);
        let val = c.value(z);
        let tol = 1e-12 * (1.0 + val.abs());
        beta * a > val + tol || val > alpha * (a + 1.0) + tol
    });
    rep.push(check("HC3", true, w, format!("{beta} |z|^{q} <= c(z) <= {alpha} (|z|^{q} + 1)")));

    let xs = logspace(1e-6, 1e6, SAMPLES);
    let w = xs.iter().copied().find(|&x| !(f.second(x) > 0.0));
    rep.push(check("F-convex", true, w, "F'' > 0 on (0, inf)"));

    let tiny = 1e-200;
    let w = (!(f.value(tiny).abs() < 1e-100)).then_some(tiny);
    rep.push(check("F-zero", true, w, "F(0+) = 0"));

    let superlinear = f.first(1e12) - f.first(1e6) > 1.0 && f.first(1e6) > f.first(1.0);
    let negative = xs.iter().all(|&x| f.first(x) < 0.0);
    rep.push(AssumptionCheck {
        id: "HF1".into(),
        passed: superlinear || negative,
        gating: true,
        witness: (!(superlinear || negative)).then_some(1e12),
        detail: if superlinear {
            "superlinear growth".into()
        } else if negative {
            "F' < 0".into()
        } else {
            "neither superlinear growth nor F' < 0".into()
        },
    });

    let w = convexity_witness(|x| x * f.value(1.0 / x), &xs);
    rep.push(check("HF2", true, w, "x F(1/x) convex"));

    let mut range_witness = None;
    for t in f.terms() {
        if let EnergyTerm::Power { m, .. } = *t {
            if !power_exponent_admissible(m, q) && range_witness.is_none() {
                range_witness = Some(m);
            }
        }
    }
    rep.push(check("family-range", true, range_witness, format!("power exponents m > 1 or max(1/q, 0) <= m < 1 with q = {q}")));

    let (a, b) = bounds;
    let grid = linspace(a, b, SAMPLES + 1);
    let w = grid.iter().copied().find(|&x| !(v.value(x) >= -1e-12));
    rep.push(check("V-nonnegative", true, w, "V >= 0 on the closed domain"));
    let w = convexity_witness(|x| v.value(x), &grid);
    rep.push(check("V-convex", true, w, "V convex on the closed domain"));

    if let Ok(h) = AuxiliaryH::new(f.clone(), c.q_star()) {
        let (bounded, last) = h.bounded_at_zero();
        rep.push(AssumptionCheck {
            id: "HH1".into(),
            passed: bounded,
            gating: false,
            witness: (!bounded).then_some(last),
            detail: "H' bounded near 0 (diagnostic)".into(),
        });
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fokker_planck_passes() {
        let r = validate_assumptions(&CostSpec::quadratic(), &EnergySpec::entropy(), &PotentialSpec::Zero, (0.0, 1.0));
        assert!(r.all_pass(), "{r:?}");
        assert!(r.checks.iter().all(|c| c.passed));
    }

    #[test]
    fn low_exponent_fails_range_not_hf2() {
        let r = validate_assumptions(&CostSpec::quadratic(), &EnergySpec::power(0.3).unwrap(), &PotentialSpec::Zero, (0.0, 1.0));
        assert!(!r.all_pass());
        let range = r.get("family-range").unwrap();
        assert!(!range.passed);
        assert_eq!(range.witness, Some(0.3));
        assert!(r.get("HF2").unwrap().passed);
    }

    #[test]
    fn concave_potential_fails() {
        let t = super::super::TabulatedPotential::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.5, 1.0], vec![2.0, 0.0, -2.0]).unwrap();
        let r = validate_assumptions(&CostSpec::quadratic(), &EnergySpec::entropy(), &PotentialSpec::Tabulated(t), (0.0, 1.0));
        assert!(!r.get("V-convex").unwrap().passed);
    }

    #[test]
    fn negative_potential_fails() {
        let t = super::super::TabulatedPotential::new(vec![0.0, 1.0], vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap();
        let r = validate_assumptions(&CostSpec::quadratic(), &EnergySpec::entropy(), &PotentialSpec::Tabulated(t), (0.0, 1.0));
        assert!(!r.get("V-nonnegative").unwrap().passed);
    }
}
