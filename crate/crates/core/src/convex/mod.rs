//! Costs, energy densities, potentials, Legendre conjugates and sampled
//! checks of the standing assumptions.

mod assumptions;
mod aux_h;
mod cost;
mod energy;
mod estimates;
mod potential;
mod presets;

pub use assumptions::{power_exponent_admissible, validate_assumptions, AssumptionCheck, AssumptionReport};
pub use aux_h::AuxiliaryH;
pub use cost::{CostSpec, PowerTerm};
pub use energy::{EnergySpec, EnergyTerm, EnergyValues};
pub use estimates::{conjugate_estimates, EstimateReport};
pub use potential::{PotentialSpec, TabulatedPotential};
pub use presets::{ModelParts, Preset};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error("invalid energy: {0}")]
    InvalidEnergy(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid preset: {0}")]
    InvalidPreset(String),
    #[error("argument {0} outside (0, inf)")]
    Domain(f64),
}

/// `(c(z), c'(z))`.
pub fn cost_eval(c: &CostSpec, z: f64) -> (f64, f64) {
    c.eval(z)
}

/// `(c*(z), (c*)'(z))`.
pub fn cost_conjugate(c: &CostSpec, z: f64) -> (f64, f64) {
    c.conjugate(z)
}

pub fn energy_terms(f: &EnergySpec, x: f64) -> Result<EnergyValues, ConvexError> {
    f.terms_at(x)
}
