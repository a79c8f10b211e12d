use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{power_exponent_admissible, AssumptionCheck, ConvexError, CostSpec, EnergySpec, EnergyTerm, PotentialSpec};

/// Named model families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// `c = |z|^2/2`, `F = x ln x`, `V = kappa (x - center)^2 / 2`.
    FokkerPlanck {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default)]
        center: f64,
    },
    /// Fokker–Planck without potential.
    Heat,
    PorousMedium {
        m: f64,
    },
    FastDiffusion {
        m: f64,
    },
    GeneralizedHeat {
        p: f64,
    },
    PLaplacian {
        p: f64,
    },
    DoublyDegenerate {
        n: f64,
        p: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Constitutive parts of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub cost: CostSpec,
    pub energy: EnergySpec,
    pub potential: PotentialSpec,
}

fn conjugate_exponent(p: f64) -> Result<f64, ConvexError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(ConvexError::InvalidPreset(format!("p = {p} must exceed 1")));
    }
    Ok(p / (p - 1.0))
}

/// `coef x^m / (m - 1)`, or the entropy when `m = 1`.
fn scaled_power(coef: f64, m: f64) -> Result<EnergySpec, ConvexError> {
    if m == 1.0 {
        EnergySpec::new(vec![EnergyTerm::Entropy { coef }])
    } else {
        EnergySpec::new(vec![EnergyTerm::Power { coef, m }])
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FokkerPlanck { .. } => "fokker-planck",
            Self::Heat => "heat",
            Self::PorousMedium { .. } => "porous-medium",
            Self::FastDiffusion { .. } => "fast-diffusion",
            Self::GeneralizedHeat { .. } => "generalized-heat",
            Self::PLaplacian { .. } => "p-laplacian",
            Self::DoublyDegenerate { .. } => "doubly-degenerate",
        }
    }

    pub fn build(&self) -> Result<ModelParts, ConvexError> {
        let quad = CostSpec::quadratic;
        Ok(match *self {
            Self::FokkerPlanck { kappa, center } => {
                ModelParts { cost: quad(), energy: EnergySpec::entropy(), potential: PotentialSpec::quadratic(kappa, center)? }
            }
            Self::Heat => ModelParts { cost: quad(), energy: EnergySpec::entropy(), potential: PotentialSpec::Zero },
            Self::PorousMedium { m } | Self::FastDiffusion { m } => {
                if m == 1.0 || !(m > 0.0) {
                    return Err(ConvexError::InvalidPreset(format!("exponent m = {m} must be positive and not 1")));
                }
                ModelParts { cost: quad(), energy: EnergySpec::power(m)?, potential: PotentialSpec::Zero }
            }
            Self::GeneralizedHeat { p } => {
                let q = conjugate_exponent(p)?;
                ModelParts {
                    cost: CostSpec::power(q)?,
                    energy: EnergySpec::new(vec![EnergyTerm::Entropy { coef: 1.0 / (p - 1.0) }])?,
                    potential: PotentialSpec::Zero,
                }
            }
            Self::PLaplacian { p } => {
                let q = conjugate_exponent(p)?;
                let m = (2.0 * p - 3.0) / (p - 1.0);
                if !(m > 0.0) {
                    return Err(ConvexError::InvalidPreset(format!("p = {p} gives exponent m = {m} <= 0")));
                }
                // x^m / (m (m - 1)); p = 2 is the heat equation
                let coef = if m == 1.0 { 1.0 } else { 1.0 / m };
                ModelParts { cost: CostSpec::power(q)?, energy: scaled_power(coef, m)?, potential: PotentialSpec::Zero }
            }
            Self::DoublyDegenerate { n, p } => {
                let q = conjugate_exponent(p)?;
                if !(n > 0.0) {
                    return Err(ConvexError::InvalidPreset(format!("n = {n} must be positive")));
                }
                let m = n + (p - 2.0) / (p - 1.0);
                if !(m > 0.0) || m == 1.0 {
                    return Err(ConvexError::InvalidPreset(format!("n = {n}, p = {p} give exponent m = {m}")));
                }
                ModelParts { cost: CostSpec::power(q)?, energy: scaled_power(n / m, m)?, potential: PotentialSpec::Zero }
            }
        })
    }

    /// Parameter range of the family in one dimension.
    pub fn range_check(&self) -> AssumptionCheck {
        let (ok, witness, detail) = match *self {
            Self::FokkerPlanck { .. } | Self::Heat => (true, 0.0, "no parameter restriction".to_string()),
            Self::PorousMedium { m } => (m > 1.0, m, "porous medium needs m > 1".to_string()),
            Self::FastDiffusion { m } => (power_exponent_admissible(m, 2.0) && m < 1.0, m, "fast diffusion needs 1/2 <= m < 1".to_string()),
            Self::GeneralizedHeat { p } => (p > 1.0, p, "generalized heat needs p > 1".to_string()),
            Self::PLaplacian { p } => {
                let golden = 0.5 * (1.0 + 5f64.sqrt());
                (p >= golden, p, format!("p-Laplacian needs p >= {golden}"))
            }
            Self::DoublyDegenerate { n, p } => {
                let lo = 1.0 / (p * (p - 1.0));
                let singular = (n - 1.0 / (p - 1.0)).abs() < 1e-14;
                (n >= lo && !singular, n, format!("doubly degenerate needs n >= {lo} and n != 1/(p-1)"))
            }
        };
        AssumptionCheck { id: format!("preset-range:{}", self.name()), passed: ok, gating: true, witness: (!ok).then_some(witness), detail }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::FokkerPlanck { kappa, center } => write!(f, "fokker-planck {kappa} {center}"),
            Self::Heat => write!(f, "heat"),
            Self::PorousMedium { m } => write!(f, "porous-medium {m}"),
            Self::FastDiffusion { m } => write!(f, "fast-diffusion {m}"),
            Self::GeneralizedHeat { p } => write!(f, "generalized-heat {p}"),
            Self::PLaplacian { p } => write!(f, "p-laplacian {p}"),
            Self::DoublyDegenerate { n, p } => write!(f, "doubly-degenerate {n} {p}"),
        }
    }
}

impl FromStr for Preset {
    type Err = ConvexError;

    /// Parses strings like `"porous-medium 2"` or `"doubly-degenerate 1.5 2.5"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let name = it.next().ok_or_else(|| ConvexError::InvalidPreset("empty preset".into()))?;
        let args: Vec<f64> =
            it.map(|t| t.parse::<f64>().map_err(|_| ConvexError::InvalidPreset(format!("bad number {t:?}")))).collect::<Result<_, _>>()?;
        let need = |k: usize| -> Result<(), ConvexError> {
            if args.len() == k {
                Ok(())
            } else {
                Err(ConvexError::InvalidPreset(format!("{name} takes {k} parameter(s)")))
            }
        };
        Ok(match name {
            "fokker-planck" => match args.len() {
                0 => Self::FokkerPlanck { kappa: 1.0, center: 0.0 },
                1 => Self::FokkerPlanck { kappa: args[0], center: 0.0 },
                _ => {
                    need(2)?;
                    Self::FokkerPlanck { kappa: args[0], center: args[1] }
                }
            },
            "heat" => {
                need(0)?;
                Self::Heat
            }
            "porous-medium" => {
                need(1)?;
                Self::PorousMedium { m: args[0] }
            }
            "fast-diffusion" => {
                need(1)?;
                Self::FastDiffusion { m: args[0] }
            }
            "generalized-heat" => {
                need(1)?;
                Self::GeneralizedHeat { p: args[0] }
            }
            "p-laplacian" => {
                need(1)?;
                Self::PLaplacian { p: args[0] }
            }
            "doubly-degenerate" => {
                need(2)?;
                Self::DoublyDegenerate { n: args[0], p: args[1] }
            }
            other => return Err(ConvexError::InvalidPreset(format!("unknown preset {other:?}"))),
        })
    }
}
