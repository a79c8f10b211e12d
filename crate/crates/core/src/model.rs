use crate::convex::{validate_assumptions, AssumptionReport, ConvexError, CostSpec, EnergySpec, PotentialSpec, Preset};
use crate::density::Domain;

/// Cost, internal energy, potential and domain of one gradient flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cost: CostSpec,
    pub energy: EnergySpec,
    pub potential: PotentialSpec,
    pub domain: Domain,
}

impl Model {
    pub fn new(cost: CostSpec, energy: EnergySpec, potential: PotentialSpec, domain: Domain) -> Self {
        Self { cost, energy, potential, domain }
    }

    /// `c = |z|^2/2`, `F = x ln x`, `V = 0`.
    pub fn heat(domain: Domain) -> Self {
        Self::new(CostSpec::quadratic(), EnergySpec::entropy(), PotentialSpec::Zero, domain)
    }

    pub fn from_preset(preset: &Preset, domain: Domain) -> Result<Self, ConvexError> {
        let parts = preset.build()?;
        Ok(Self::new(parts.cost, parts.energy, parts.potential, domain))
    }

    pub fn validate(&self) -> AssumptionReport {
        validate_assumptions(&self.cost, &self.energy, &self.potential, (self.domain.a, self.domain.b))
    }

    /// `|Ω| F(1/|Ω|)`, the minimum of the internal energy over probability densities.
    pub fn jensen_floor(&self) -> f64 {
        let l = self.domain.length();
        l * self.energy.value(1.0 / l)
    }
}
