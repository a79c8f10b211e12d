//! Piecewise-constant grid densities on an interval and their quantile
//! (Lagrangian) representations.

mod grid;
mod profiles;
mod quantile;

pub use grid::{EnergyBreakdown, GridDensity, Moments, Normalized};
pub use profiles::Profile;
pub use quantile::{node_weight, QuantileRep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::{EnergySpec, PotentialSpec};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("invalid domain ({0}, {1})")]
    InvalidDomain(f64, f64),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("cumulative distribution not invertible: empty cell {0} inside the support")]
    NonInvertibleCdf(usize),
    #[error("degenerate quantile cell {0}: repeated nodes")]
    DegenerateCell(usize),
    #[error("invalid quantile nodes: {0}")]
    InvalidQuantiles(String),
    #[error("domain mismatch: ({0}, {1}) vs ({2}, {3})")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Open interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64) -> Result<Self, DensityError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(DensityError::InvalidDomain(a, b));
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// Grid edge `j` of an `n`-cell partition.
    pub fn edge(&self, j: usize, n: usize) -> f64 {
        if j == n {
            self.b
        } else {
            self.a + self.length() * j as f64 / n as f64
        }
    }

    pub fn center(&self, j: usize, n: usize) -> f64 {
        self.a + self.length() * (j as f64 + 0.5) / n as f64
    }

    pub fn check_same(&self, other: &Domain) -> Result<(), DensityError> {
        if self != other {
            return Err(DensityError::DomainMismatch(self.a, self.b, other.a, other.b));
        }
        Ok(())
    }
}

pub fn normalize(values: Vec<f64>, domain: Domain) -> Result<Normalized, DensityError> {
    GridDensity::normalize(domain, values)
}

pub fn to_quantiles(rho: &GridDensity, m: usize) -> Result<QuantileRep, DensityError> {
    rho.to_quantiles(m)
}

pub fn from_quantiles(q: &QuantileRep, n: usize) -> Result<GridDensity, DensityError> {
    q.to_grid(n)
}

pub fn energy(rho: &GridDensity, f: &EnergySpec, v: &PotentialSpec) -> EnergyBreakdown {
    rho.energy(f, v)
}

pub fn moments_and_norms(rho: &GridDensity) -> Moments {
    rho.moments()
}
