use serde::{Deserialize, Serialize};

use super::ConvexError;

/// Tabulated `C^1` potential, cubic Hermite between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPotential {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
}

impl TabulatedPotential {
    pub fn new(x: Vec<f64>, v: Vec<f64>, dv: Vec<f64>) -> Result<Self, ConvexError> {
        if x.len() < 2 || x.len() != v.len() || x.len() != dv.len() {
            return Err(ConvexError::InvalidPotential("table needs at least two samples of equal length".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConvexError::InvalidPotential("sample abscissae must increase strictly".into()));
        }
        if x.iter().chain(&v).chain(&dv).any(|s| !s.is_finite()) {
            return Err(ConvexError::InvalidPotential("non-finite sample".into()));
        }
        Ok(Self { x, v, dv })
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let xc = x.clamp(self.x[0], *self.x.last().unwrap());
        let i = match self.x.partition_point(|&s| s <= xc) {
            0 => 0,
            k => (k - 1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        (i, (xc - self.x[i]) / h, h)
    }

    fn value(&self, x: f64) -> f64 {
        let (i, t, h) = self.locate(x);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.v[i] + h10 * h * self.dv[i] + h01 * self.v[i + 1] + h11 * h * self.dv[i + 1]
    }

    fn derivative(&self, x: f64) -> f64 {
        let (i, t, h) = self.locate(x);
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.v[i] + d10 * self.dv[i] + d01 * self.v[i + 1] + d11 * self.dv[i + 1]
    }

    fn second(&self, x: f64) -> f64 {
        let (i, t, h) = self.locate(x);
        let s00 = (12.0 * t - 6.0) / (h * h);
        let s10 = (6.0 * t - 4.0) / h;
        let s01 = (-12.0 * t + 6.0) / (h * h);
        let s11 = (6.0 * t - 2.0) / h;
        s00 * self.v[i] + s10 * self.dv[i] + s01 * self.v[i + 1] + s11 * self.dv[i + 1]
    }
}

/// Confining potential `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `kappa (x - center)^2 / 2`
    Quadratic {
        kappa: f64,
        center: f64,
    },
    Tabulated(TabulatedPotential),
}

impl PotentialSpec {
    pub fn quadratic(kappa: f64, center: f64) -> Result<Self, ConvexError> {
        if !(kappa >= 0.0) || !kappa.is_finite() || !center.is_finite() {
            return Err(ConvexError::InvalidPotential(format!("quadratic potential needs kappa >= 0, got {kappa}")));
        }
        Ok(Self::Quadratic { kappa, center })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Quadratic { kappa, .. } => *kappa == 0.0,
            Self::Tabulated(t) => t.v.iter().all(|&v| v == 0.0) && t.dv.iter().all(|&d| d == 0.0),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Quadratic { kappa, center } => 0.5 * kappa * (x - center) * (x - center),
            Self::Tabulated(t) => t.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Quadratic { kappa, center } => kappa * (x - center),
            Self::Tabulated(t) => t.derivative(x),
        }
    }

    /// Second derivative; piecewise for tabulated samples.
    pub fn second(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Quadratic { kappa, .. } => *kappa,
            Self::Tabulated(t) => t.second(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubic() {
        let f = |x: f64| x * x * x + x * x;
        let df = |x: f64| 3.0 * x * x + 2.0 * x;
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let t = TabulatedPotential::new(xs.clone(), xs.iter().map(|&x| f(x)).collect(), xs.iter().map(|&x| df(x)).collect()).unwrap();
        let p = PotentialSpec::Tabulated(t);
        for &x in &[0.1, 0.77, 1.5, 1.99] {
            assert!((p.value(x) - f(x)).abs() < 1e-12);
            assert!((p.derivative(x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_evaluators() {
        let p = PotentialSpec::quadratic(2.0, 1.0).unwrap();
        assert_eq!(p.value(3.0), 4.0);
        assert_eq!(p.derivative(3.0), 4.0);
        assert!(PotentialSpec::quadratic(-1.0, 0.0).is_err());
    }
}
