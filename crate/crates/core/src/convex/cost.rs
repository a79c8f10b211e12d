use serde::{Deserialize, Serialize};

use super::ConvexError;
use crate::numerics::safeguarded_newton;

const CONJ_TOL: f64 = 1e-12;
const CONJ_MAX_ITER: usize = 100;

/// One term `coef * |z|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

/// Strictly convex radial cost `c(z) = Σ A_i |z|^{q_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSpec {
    terms: Vec<PowerTerm>,
    q: f64,
    alpha: f64,
    beta: f64,
}

impl<'de> Deserialize<'de> for CostSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            terms: Vec<PowerTerm>,
        }
        let raw = Raw::deserialize(d)?;
        CostSpec::new(raw.terms).map_err(serde::de::Error::custom)
    }
}

impl CostSpec {
    pub fn new(terms: Vec<PowerTerm>) -> Result<Self, ConvexError> {
        if terms.is_empty() {
            return Err(ConvexError::InvalidCost("no terms".into()));
        }
        for t in &terms {
            if !(t.coef > 0.0) || !t.coef.is_finite() {
                return Err(ConvexError::InvalidCost(format!("coefficient {} must be positive", t.coef)));
            }
            if !(t.exponent > 1.0) || !t.exponent.is_finite() {
                return Err(ConvexError::InvalidCost(format!("exponent {} must exceed 1", t.exponent)));
            }
        }
        let q = terms.iter().map(|t| t.exponent).fold(f64::MIN, f64::max);
        let alpha = terms.iter().map(|t| t.coef).sum();
        let beta = terms.iter().filter(|t| t.exponent == q).map(|t| t.coef).sum();
        Ok(Self { terms, q, alpha, beta })
    }

    /// `|z|^q / q`.
    pub fn power(q: f64) -> Result<Self, ConvexError> {
        Self::new(vec![PowerTerm { coef: 1.0 / q, exponent: q }])
    }

    pub fn quadratic() -> Self {
        Self::power(2.0).expect("q = 2 is admissible")
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn q_star(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn single(&self) -> Option<PowerTerm> {
        (self.terms.len() == 1).then(|| self.terms[0])
    }

    pub fn value(&self, z: f64) -> f64 {
        let a = z.abs();
        self.terms.iter().map(|t| t.coef * a.powf(t.exponent)).sum()
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let a = z.abs();
        if a == 0.0 {
            return 0.0;
        }
        let d: f64 = self.terms.iter().map(|t| t.coef * t.exponent * a.powf(t.exponent - 1.0)).sum();
        d * z.signum()
    }

    /// `c''(z)`; infinite at the origin when some exponent is below 2.
    pub fn second_derivative(&self, z: f64) -> f64 {
        let a = z.abs();
        self.terms
            .iter()
            .map(|t| {
                let k = t.coef * t.exponent * (t.exponent - 1.0);
                if t.exponent == 2.0 {
                    k
                } else {
                    k * a.powf(t.exponent - 2.0)
                }
            })
            .sum()
    }

    /// `(c(z), c'(z))`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        (self.value(z), self.derivative(z))
    }

    /// Solves `c'(x) = z`; this is `(c*)'(z)`.
    pub fn conjugate_gradient(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        if let Some(t) = self.single() {
            return z.signum() * (z.abs() / (t.coef * t.exponent)).powf(1.0 / (t.exponent - 1.0));
        }
        self.invert_derivative(z)
    }

    /// Root-finder for `c'(x) = z`, used for multi-term costs and as a
    /// cross-check of the closed form.
    pub fn invert_derivative(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        let target = z.abs();
        let mut hi = 1.0;
        while self.derivative(hi) < target {
            hi *= 2.0;
        }
        let f = |x: f64| (self.derivative(x), self.second_derivative(x));
        let tol = CONJ_TOL.max(4.0 * f64::EPSILON * target);
        let (x, _) = safeguarded_newton(f, target, 0.0, hi, tol, CONJ_MAX_ITER);
        z.signum() * x
    }

    /// `(c*(z), (c*)'(z))`.
    pub fn conjugate(&self, z: f64) -> (f64, f64) {
        if z == 0.0 {
            return (0.0, 0.0);
        }
        if let Some(t) = self.single() {
            let x = self.conjugate_gradient(z);
            // A|x|^q = |x||z|/q when c'(x) = z
            return (x.abs() * z.abs() * (1.0 - 1.0 / t.exponent), x);
        }
        self.conjugate_by_root(z)
    }

    /// Conjugate through the scalar root-finder regardless of the term count.
    pub fn conjugate_by_root(&self, z: f64) -> (f64, f64) {
        if z == 0.0 {
            return (0.0, 0.0);
        }
        let x = self.invert_derivative(z);
        (x * z - self.value(x), x)
    }

    pub fn conjugate_value(&self, z: f64) -> f64 {
        self.conjugate(z).0
    }
}
