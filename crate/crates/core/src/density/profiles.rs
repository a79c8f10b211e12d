use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{DensityError, Domain, GridDensity};

/// Named initial profiles, normalised to unit mass on the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum Profile {
    Uniform,
    /// `1 + amplitude cos(2π k (x - a)/|Ω|)`
    Cosine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// `floor + exp(-(x - center)^2 / (2 width^2))`
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Porous-medium source profile of exponent `m` at time `t`.
    Barenblatt {
        m: f64,
        t: f64,
    },
    /// `low` outside `[left, right]`, `high` inside.
    Step {
        left: f64,
        right: f64,
        low: f64,
        high: f64,
    },
}

fn one() -> u32 {
    1
}

impl Profile {
    pub fn density(&self, domain: Domain, n: usize) -> Result<GridDensity, DensityError> {
        let (a, len) = (domain.a, domain.length());
        match *self {
            Self::Uniform => Ok(GridDensity::uniform(domain, n)),
            Self::Cosine { amplitude, mode } => {
                if !(amplitude.abs() <= 1.0) {
                    return Err(DensityError::InvalidDensity(format!("cosine amplitude {amplitude} exceeds 1")));
                }
                GridDensity::from_fn(domain, n, |x| 1.0 + amplitude * (2.0 * PI * mode as f64 * (x - a) / len).cos())
            }
            Self::Gaussian { center, width, floor } => {
                if !(width > 0.0) || floor < 0.0 {
                    return Err(DensityError::InvalidDensity("gaussian needs width > 0 and floor >= 0".into()));
                }
                GridDensity::from_fn(domain, n, |x| floor + (-(x - center) * (x - center) / (2.0 * width * width)).exp())
            }
            Self::Barenblatt { m, t } => {
                let g =
                    crate::refsolve::barenblatt_density(m, 1.0, t, domain, n).map_err(|e| DensityError::InvalidDensity(e.to_string()))?;
                Ok(g)
            }
            Self::Step { left, right, low, high } => {
                if low < 0.0 || high < 0.0 || !(right > left) {
                    return Err(DensityError::InvalidDensity("step needs left < right and nonnegative levels".into()));
                }
                let dx = len / n as f64;
                let values = (0..n)
                    .map(|j| {
                        let (e0, e1) = (domain.edge(j, n), domain.edge(j + 1, n));
                        let inside = (e1.min(right) - e0.max(left)).max(0.0);
                        (high * inside + low * (dx - inside)) / dx
                    })
                    .collect();
                Ok(GridDensity::normalize(domain, values)?.density)
            }
        }
    }
}
