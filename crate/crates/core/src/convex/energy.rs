use serde::{Deserialize, Serialize};

use super::ConvexError;
use crate::numerics::safeguarded_newton;

/// One term of the internal energy density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnergyTerm {
    /// `coef * x ln x`
    Entropy { coef: f64 },
    /// `coef * x^m / (m - 1)`
    Power { coef: f64, m: f64 },
}

/// Values of `F` and related quantities at a positive density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValues {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
    pub pressure: f64,
    pub fstar_of_fprime: f64,
}

/// Internal energy density `F`, a positive combination of entropy and power terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySpec {
    terms: Vec<EnergyTerm>,
}

impl<'de> Deserialize<'de> for EnergySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            terms: Vec<EnergyTerm>,
        }
        let raw = Raw::deserialize(d)?;
        EnergySpec::new(raw.terms).map_err(serde::de::Error::custom)
    }
}

impl EnergySpec {
    pub fn new(terms: Vec<EnergyTerm>) -> Result<Self, ConvexError> {
        if terms.is_empty() {
            return Err(ConvexError::InvalidEnergy("no terms".into()));
        }
        for t in &terms {
            match *t {
                EnergyTerm::Entropy { coef } => {
                    if !(coef > 0.0) || !coef.is_finite() {
                        return Err(ConvexError::InvalidEnergy(format!("coefficient {coef} must be positive")));
                    }
                }
                EnergyTerm::Power { coef, m } => {
                    if !(coef > 0.0) || !coef.is_finite() {
                        return Err(ConvexError::InvalidEnergy(format!("coefficient {coef} must be positive")));
                    }
                    if !(m > 0.0) || m == 1.0 || !m.is_finite() {
                        return Err(ConvexError::InvalidEnergy(format!("power exponent {m} must be positive and not 1")));
                    }
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn entropy() -> Self {
        Self { terms: vec![EnergyTerm::Entropy { coef: 1.0 }] }
    }

    /// `x^m / (m - 1)`.
    pub fn power(m: f64) -> Result<Self, ConvexError> {
        Self::new(vec![EnergyTerm::Power { coef: 1.0, m }])
    }

    pub fn terms(&self) -> &[EnergyTerm] {
        &self.terms
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| match *t {
                EnergyTerm::Entropy { coef } => coef * x * x.ln(),
                EnergyTerm::Power { coef, m } => coef * x.powf(m) / (m - 1.0),
            })
            .sum()
    }

    pub fn first(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                EnergyTerm::Entropy { coef } => coef * (x.ln() + 1.0),
                EnergyTerm::Power { coef, m } => coef * m * x.powf(m - 1.0) / (m - 1.0),
            })
            .sum()
    }

    pub fn second(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                EnergyTerm::Entropy { coef } => coef / x,
                EnergyTerm::Power { coef, m } => coef * m * x.powf(m - 2.0),
            })
            .sum()
    }

    /// `P(x) = x F'(x) - F(x)`, evaluated term by term without cancellation.
    pub fn pressure(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| match *t {
                EnergyTerm::Entropy { coef } => coef * x,
                EnergyTerm::Power { coef, m } => coef * x.powf(m),
            })
            .sum()
    }

    /// `P'(x) = x F''(x)`.
    pub fn pressure_derivative(&self, x: f64) -> f64 {
        x * self.second(x)
    }

    pub fn terms_at(&self, x: f64) -> Result<EnergyValues, ConvexError> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(ConvexError::Domain(x));
        }
        let p = self.pressure(x);
        Ok(EnergyValues { f: self.value(x), df: self.first(x), d2f: self.second(x), pressure: p, fstar_of_fprime: p })
    }

    /// `lim F'(x)` as `x -> 0+`.
    pub fn first_at_zero(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                EnergyTerm::Entropy { .. } => f64::NEG_INFINITY,
                EnergyTerm::Power { m, .. } if m < 1.0 => f64::NEG_INFINITY,
                EnergyTerm::Power { .. } => 0.0,
            })
            .sum()
    }

    /// `lim F'(x)` as `x -> inf`.
    pub fn first_at_infinity(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                EnergyTerm::Entropy { .. } => f64::INFINITY,
                EnergyTerm::Power { m, .. } if m > 1.0 => f64::INFINITY,
                EnergyTerm::Power { .. } => 0.0,
            })
            .sum()
    }

    /// Solves `F'(x) = y`; `Some(0)` below the range of `F'`, `None` above it.
    pub fn inverse_first(&self, y: f64) -> Option<f64> {
        if y <= self.first_at_zero() {
            return Some(0.0);
        }
        if y >= self.first_at_infinity() {
            return None;
        }
        if let [t] = self.terms.as_slice() {
            return Some(match *t {
                EnergyTerm::Entropy { coef } => (y / coef - 1.0).exp(),
                EnergyTerm::Power { coef, m } => (y * (m - 1.0) / (coef * m)).powf(1.0 / (m - 1.0)),
            });
        }
        // monotone in u = ln x
        let g = |u: f64| {
            let x = u.exp();
            (self.first(x), x * self.second(x))
        };
        let mut lo = -1.0;
        while self.first(f64::exp(lo)) > y {
            lo *= 2.0;
            if lo < -1400.0 {
                return Some(0.0);
            }
        }
        let mut hi = 1.0;
        while self.first(f64::exp(hi)) < y {
            hi *= 2.0;
            if hi > 1400.0 {
                return None;
            }
        }
        let (u, _) = safeguarded_newton(g, y, lo, hi, 1e-14 * (1.0 + y.abs()), 200);
        Some(u.exp())
    }
}
