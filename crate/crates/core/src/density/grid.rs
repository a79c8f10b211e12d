use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DensityError, Domain, QuantileRep};
use crate::convex::{EnergySpec, PotentialSpec};
use crate::numerics::neumaier;

const GAUSS4_X: [f64; 4] = [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526];
const GAUSS4_W: [f64; 4] = [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538];

/// Cell-average density on a uniform `n`-cell partition of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    domain: Domain,
    values: Vec<f64>,
}

/// Result of [`GridDensity::normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub density: GridDensity,
    /// `|mass - 1|` of the input.
    pub relative_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub internal: f64,
    pub potential: f64,
    pub free: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub essinf: f64,
    pub esssup: f64,
    pub l1: f64,
    pub linf: f64,
}

impl GridDensity {
    /// Wraps cell values whose mass is already 1 (within 1e-9).
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self, DensityError> {
        check_values(&values)?;
        let g = Self { domain, values };
        let mass = g.mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(DensityError::InvalidDensity(format!("mass {mass} is not 1")));
        }
        Ok(g)
    }

    pub fn normalize(domain: Domain, values: Vec<f64>) -> Result<Normalized, DensityError> {
        check_values(&values)?;
        let dx = domain.length() / values.len() as f64;
        let mass = neumaier(values.iter().map(|v| v * dx));
        if !(mass > 0.0) {
            return Err(DensityError::InvalidDensity("zero total mass".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Normalized { density: Self { domain, values }, relative_change: (mass - 1.0).abs() })
    }

    /// Cell averages of `f` (four-point Gauss rule per cell), normalised.
    pub fn from_fn<F: Fn(f64) -> f64>(domain: Domain, n: usize, f: F) -> Result<Self, DensityError> {
        if n == 0 {
            return Err(DensityError::InvalidDensity("no cells".into()));
        }
        let dx = domain.length() / n as f64;
        let values = (0..n)
            .map(|j| {
                let c = domain.center(j, n);
                GAUSS4_X.iter().zip(GAUSS4_W).map(|(&x, w)| 0.5 * w * f(c + 0.5 * dx * x)).sum::<f64>()
            })
            .collect();
        Ok(Self::normalize(domain, values)?.density)
    }

    pub fn uniform(domain: Domain, n: usize) -> Self {
        Self { domain, values: vec![1.0 / domain.length(); n] }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        self.domain.length() / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn center(&self, j: usize) -> f64 {
        self.domain.center(j, self.n())
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.center(j)).collect()
    }

    pub fn edge(&self, j: usize) -> f64 {
        self.domain.edge(j, self.n())
    }

    pub fn mass(&self) -> f64 {
        let dx = self.dx();
        neumaier(self.values.iter().map(|v| v * dx))
    }

    pub fn essinf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn esssup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.essinf() > 0.0
    }

    /// Value of the piecewise-constant density at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        let j = (((x - self.domain.a) / self.dx()) as usize).min(self.n() - 1);
        self.values[j]
    }

    /// Cumulative masses at the grid edges, `n + 1` entries.
    pub fn cumulative(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut cum = Vec::with_capacity(self.n() + 1);
        let mut s = crate::numerics::NeumaierSum::new();
        cum.push(0.0);
        for v in &self.values {
            s.add(v * dx);
            cum.push(s.value());
        }
        cum
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_from(&self.cumulative(), x)
    }

    fn cdf_from(&self, cum: &[f64], x: f64) -> f64 {
        if x <= self.domain.a {
            return 0.0;
        }
        if x >= self.domain.b {
            return cum[self.n()];
        }
        let j = (((x - self.domain.a) / self.dx()) as usize).min(self.n() - 1);
        cum[j] + self.values[j] * (x - self.edge(j)).max(0.0)
    }

    fn support_cells(&self) -> Result<(usize, usize), DensityError> {
        let lo = self.values.iter().position(|&v| v > 0.0).ok_or_else(|| DensityError::InvalidDensity("zero density".into()))?;
        let hi = self.values.iter().rposition(|&v| v > 0.0).unwrap();
        if let Some(k) = (lo..=hi).find(|&k| !(self.values[k] > 0.0)) {
            return Err(DensityError::NonInvertibleCdf(k));
        }
        Ok((lo, hi))
    }

    /// Exact inverse of the piecewise-linear CDF at sorted levels `s` in `[0, 1]`.
    pub fn quantiles_at(&self, s: &[f64]) -> Result<Vec<f64>, DensityError> {
        let (lo, hi) = self.support_cells()?;
        let cum = self.cumulative();
        let total = cum[self.n()];
        let mut out = Vec::with_capacity(s.len());
        let mut j = lo;
        let mut last = self.edge(lo);
        for &si in s {
            let x = if si <= 0.0 {
                self.edge(lo)
            } else if si >= 1.0 {
                self.edge(hi + 1)
            } else {
                let target = si * total;
                while j < hi && cum[j + 1] < target {
                    j += 1;
                }
                let (e0, e1) = (self.edge(j), self.edge(j + 1));
                (e0 + (target - cum[j]) / self.values[j]).clamp(e0, e1)
            };
            let x = x.max(last);
            last = x;
            out.push(x);
        }
        Ok(out)
    }

    pub fn to_quantiles(&self, m: usize) -> Result<QuantileRep, DensityError> {
        if m == 0 {
            return Err(DensityError::InvalidQuantiles("m must be positive".into()));
        }
        let s: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        let nodes = self.quantiles_at(&s)?;
        QuantileRep::new(self.domain, nodes)
    }

    pub fn energy(&self, f: &EnergySpec, v: &PotentialSpec) -> EnergyBreakdown {
        let dx = self.dx();
        let internal = neumaier(self.values.iter().map(|&r| f.value(r) * dx));
        let potential = neumaier(self.values.iter().enumerate().map(|(j, &r)| r * v.value(self.center(j)) * dx));
        EnergyBreakdown { internal, potential, free: internal + potential }
    }

    pub fn moments(&self) -> Moments {
        let dx = self.dx();
        let mean = neumaier(self.values.iter().enumerate().map(|(j, &r)| r * self.center(j) * dx));
        let second = neumaier(self.values.iter().enumerate().map(|(j, &r)| {
            let c = self.center(j);
            r * (c * c * dx + dx * dx * dx / 12.0)
        }));
        let sup = self.esssup();
        Moments { mean, second_moment: second, essinf: self.essinf(), esssup: sup, l1: self.mass(), linf: sup }
    }

    /// `max(rho, delta)` renormalised.
    pub fn floored(&self, delta: f64) -> Result<Self, DensityError> {
        Ok(Self::normalize(self.domain, self.values.iter().map(|&v| v.max(delta)).collect())?.density)
    }

    /// Exact transfer onto an `n`-cell grid of the same domain.
    pub fn rebin(&self, n: usize) -> Result<Self, DensityError> {
        if n == self.n() {
            return Ok(self.clone());
        }
        let edges: Vec<f64> = (0..=n).map(|j| self.domain.edge(j, n)).collect();
        let cum = self.cumulative();
        let cdf: Vec<f64> = edges.iter().map(|&e| self.cdf_from(&cum, e)).collect();
        let dx = self.domain.length() / n as f64;
        let values = cdf.windows(2).map(|w| ((w[1] - w[0]) / dx).max(0.0)).collect();
        Ok(Self::normalize(self.domain, values)?.density)
    }

    /// `∫ |self - other|`, exact over the merged partition.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64, DensityError> {
        self.domain.check_same(&other.domain)?;
        if self.n() == other.n() {
            let dx = self.dx();
            return Ok(neumaier(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs() * dx)));
        }
        let (na, nb) = (self.n(), other.n());
        let (mut i, mut j) = (0, 0);
        let mut x = self.domain.a;
        let mut acc = crate::numerics::NeumaierSum::new();
        while i < na && j < nb {
            let ea = self.edge(i + 1);
            let eb = other.edge(j + 1);
            let next = ea.min(eb);
            acc.add((self.values[i] - other.values[j]).abs() * (next - x));
            x = next;
            if ea <= next {
                i += 1;
            }
            if eb <= next {
                j += 1;
            }
        }
        Ok(acc.value())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,rho")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.center(j), v)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DensityError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads `x,rho` rows; the domain is inferred from uniform centres
    /// unless given. Values are normalised.
    pub fn read_csv<R: BufRead>(r: R, domain: Option<Domain>) -> Result<Self, DensityError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| DensityError::Csv("empty file".into()))??;
        if header.trim() != "x,rho" {
            return Err(DensityError::Csv(format!("expected header x,rho, got {header:?}")));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64, DensityError> {
                p.and_then(|t| t.trim().parse::<f64>().ok()).ok_or_else(|| DensityError::Csv(format!("bad row {}: {line:?}", k + 2)))
            };
            xs.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        if xs.len() < 2 {
            return Err(DensityError::Csv("need at least two rows".into()));
        }
        let n = xs.len();
        let domain = match domain {
            Some(d) => d,
            None => {
                let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
                Domain::new(xs[0] - 0.5 * dx, xs[n - 1] + 0.5 * dx)?
            }
        };
        let tol = 1e-9 * domain.length();
        for (j, &x) in xs.iter().enumerate() {
            if (x - domain.center(j, n)).abs() > tol {
                return Err(DensityError::Csv(format!(
                    "row {} centre {x} does not match a uniform grid on ({}, {})",
                    j + 2,
                    domain.a,
                    domain.b
                )));
            }
        }
        let g = Self::normalize(domain, vs.clone())?;
        if g.relative_change <= 1e-12 {
            return Ok(Self { domain, values: vs });
        }
        Ok(g.density)
    }

    pub fn load_csv(path: &Path, domain: Option<Domain>) -> Result<Self, DensityError> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), domain)
    }
}

fn check_values(values: &[f64]) -> Result<(), DensityError> {
    if values.is_empty() {
        return Err(DensityError::InvalidDensity("no cells".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(DensityError::InvalidDensity(format!("value {v} is negative or not finite")));
    }
    Ok(())
}
