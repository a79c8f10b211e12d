use super::{DensityError, Domain, EnergyBreakdown, GridDensity};
use crate::convex::{EnergySpec, PotentialSpec};
use crate::numerics::{neumaier, NeumaierSum};

/// Quantile nodes `X_0 <= ... <= X_m` in `[a, b]`; each cell carries mass `1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRep {
    domain: Domain,
    nodes: Vec<f64>,
}

/// Node weight of the trapezoid rule in the mass variable.
pub fn node_weight(j: usize, m: usize) -> f64 {
    if j == 0 || j == m {
        0.5
    } else {
        1.0
    }
}

impl QuantileRep {
    pub fn new(domain: Domain, nodes: Vec<f64>) -> Result<Self, DensityError> {
        if nodes.len() < 2 {
            return Err(DensityError::InvalidQuantiles("need at least two nodes".into()));
        }
        if let Some(x) = nodes.iter().find(|&&x| !(x >= domain.a && x <= domain.b)) {
            return Err(DensityError::InvalidQuantiles(format!("node {x} outside ({}, {})", domain.a, domain.b)));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] < w[0]) {
            return Err(DensityError::InvalidQuantiles(format!("nodes decrease at {}", i + 1)));
        }
        Ok(Self { domain, nodes })
    }

    /// Evenly spaced nodes over the whole domain.
    pub fn uniform(domain: Domain, m: usize) -> Self {
        let nodes = (0..=m).map(|i| domain.edge(i, m)).collect();
        Self { domain, nodes }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn m(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn mass_per_cell(&self) -> f64 {
        1.0 / self.m() as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<f64> {
        self.nodes
    }

    pub fn widths(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min_width(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.min_width() > 0.0
    }

    /// Density `(1/m)/ΔX_i` of each cell.
    pub fn cell_densities(&self) -> Vec<f64> {
        let mu = self.mass_per_cell();
        self.widths().into_iter().map(|w| mu / w).collect()
    }

    pub fn essinf(&self) -> f64 {
        self.cell_densities().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn esssup(&self) -> f64 {
        self.cell_densities().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quantile function, piecewise linear in the mass variable.
    pub fn quantile(&self, s: f64) -> f64 {
        let m = self.m();
        let t = s.clamp(0.0, 1.0) * m as f64;
        let i = (t.floor() as usize).min(m - 1);
        let f = t - i as f64;
        self.nodes[i] + f * (self.nodes[i + 1] - self.nodes[i])
    }

    /// Cumulative mass up to `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let m = self.m();
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= self.nodes[m] {
            return 1.0;
        }
        // last node <= x
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let i = i.min(m - 1);
        let w = self.nodes[i + 1] - self.nodes[i];
        let frac = if w > 0.0 { (x - self.nodes[i]) / w } else { 1.0 };
        (i as f64 + frac) / m as f64
    }

    /// Grid density from cell averages of the monotone cubic (PCHIP)
    /// interpolant of the CDF through `(X_j, j/m)`. Mass is exact; unlike
    /// [`QuantileRep::to_grid`] the result does not alias when quantile and
    /// grid cells are of similar size.
    pub fn to_grid_smooth(&self, n: usize) -> Result<GridDensity, DensityError> {
        if let Some(i) = self.nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DensityError::DegenerateCell(i + 1));
        }
        if n == 0 {
            return Err(DensityError::InvalidDensity("no cells".into()));
        }
        let m = self.m();
        if m < 2 {
            return self.to_grid(n);
        }
        let mu = self.mass_per_cell();
        let w = self.widths();
        let s: Vec<f64> = w.iter().map(|d| mu / d).collect();
        let mut d = vec![0.0; m + 1];
        for j in 1..m {
            let (h0, h1) = (w[j - 1], w[j]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            d[j] = (w1 + w2) / (w1 / s[j - 1] + w2 / s[j]);
        }
        let edge = |h0: f64, h1: f64, s0: f64, s1: f64| (((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1)).max(0.0);
        d[0] = edge(w[0], w[1], s[0], s[1]);
        d[m] = edge(w[m - 1], w[m - 2], s[m - 1], s[m - 2]);

        let mut i = 0;
        let mut cdf = |x: f64| -> f64 {
            if x <= self.nodes[0] {
                return 0.0;
            }
            if x >= self.nodes[m] {
                return 1.0;
            }
            while self.nodes[i + 1] < x {
                i += 1;
            }
            let h = w[i];
            let t = (x - self.nodes[i]) / h;
            let (t2, t3) = (t * t, t * t * t);
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h10 = t3 - 2.0 * t2 + t;
            let h11 = t3 - t2;
            i as f64 * mu + mu * h01 + h * (d[i] * h10 + d[i + 1] * h11)
        };
        let dx = self.domain.length() / n as f64;
        let f: Vec<f64> = (0..=n).map(|j| cdf(self.domain.edge(j, n))).collect();
        let values = f.windows(2).map(|p| ((p[1] - p[0]) / dx).max(0.0)).collect();
        GridDensity::new(self.domain, values)
    }

    /// Grid density by exact overlap integration.
    pub fn to_grid(&self, n: usize) -> Result<GridDensity, DensityError> {
        if let Some(i) = self.nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DensityError::DegenerateCell(i + 1));
        }
        if n == 0 {
            return Err(DensityError::InvalidDensity("no cells".into()));
        }
        let mu = self.mass_per_cell();
        let dx = self.domain.length() / n as f64;
        let mut values = vec![0.0; n];
        let m = self.m();
        let mut i = 0;
        for (j, val) in values.iter_mut().enumerate() {
            let (e0, e1) = (self.domain.edge(j, n), self.domain.edge(j + 1, n));
            while i < m && self.nodes[i + 1] <= e0 {
                i += 1;
            }
            let mut acc = NeumaierSum::new();
            let mut k = i;
            while k < m && self.nodes[k] < e1 {
                let lo = self.nodes[k].max(e0);
                let hi = self.nodes[k + 1].min(e1);
                if hi > lo {
                    acc.add(mu * (hi - lo) / (self.nodes[k + 1] - self.nodes[k]));
                }
                k += 1;
            }
            *val = acc.value() / dx;
        }
        GridDensity::new(self.domain, values)
    }

    /// Internal energy `Σ F(μ/ΔX) ΔX` (exact for the piecewise-constant
    /// density) and trapezoid potential energy `μ Σ w_j V(X_j)`.
    pub fn energy(&self, f: &EnergySpec, v: &PotentialSpec) -> EnergyBreakdown {
        let mu = self.mass_per_cell();
        let internal = neumaier(self.nodes.windows(2).map(|w| {
            let d = w[1] - w[0];
            if d > 0.0 {
                f.value(mu / d) * d
            } else {
                f64::INFINITY
            }
        }));
        let potential = if v.is_zero() { 0.0 } else { self.potential_energy(v) };
        EnergyBreakdown { internal, potential, free: internal + potential }
    }

    pub fn potential_energy(&self, v: &PotentialSpec) -> f64 {
        let mu = self.mass_per_cell();
        let m = self.m();
        neumaier(self.nodes.iter().enumerate().map(|(j, &x)| mu * node_weight(j, m) * v.value(x)))
    }

    /// Trapezoid second moment `∫ x^2`.
    pub fn second_moment(&self) -> f64 {
        let mu = self.mass_per_cell();
        let m = self.m();
        neumaier(self.nodes.iter().enumerate().map(|(j, &x)| mu * node_weight(j, m) * x * x))
    }
}
