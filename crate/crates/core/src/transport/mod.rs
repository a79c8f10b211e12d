//! One-dimensional optimal transport: monotone rearrangement, transport
//! costs, displacement interpolation and an exact assignment oracle.

mod oracle;

pub use oracle::{lp_oracle, monotone_atom_cost, PlanAtom, TransportPlan, ORACLE_EXHAUSTIVE_MAX, ORACLE_MAX};

use thiserror::Error;

use crate::convex::CostSpec;
use crate::density::{DensityError, GridDensity, QuantileRep};
use crate::numerics::neumaier;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("oracle limit: {0}")]
    OracleLimit(String),
    #[error("resolution mismatch: {0} vs {1} quantile cells")]
    Resolution(usize, usize),
}

/// Monotone map `S` pushing the source measure onto the target measure,
/// stored as paired quantile nodes.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    source: QuantileRep,
    target: QuantileRep,
}

impl MonotoneMap {
    pub fn from_quantiles(source: QuantileRep, target: QuantileRep) -> Result<Self, TransportError> {
        if source.m() != target.m() {
            return Err(TransportError::Resolution(source.m(), target.m()));
        }
        source.domain().check_same(&target.domain())?;
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &QuantileRep {
        &self.source
    }

    pub fn target(&self) -> &QuantileRep {
        &self.target
    }

    pub fn m(&self) -> usize {
        self.source.m()
    }

    /// `S(y)`.
    pub fn eval(&self, y: f64) -> f64 {
        self.target.quantile(self.source.cdf(y))
    }

    /// `S'(y)`, piecewise constant on source cells.
    pub fn slope(&self, y: f64) -> f64 {
        let m = self.m();
        let i = ((self.source.cdf(y) * m as f64).floor() as usize).min(m - 1);
        let (s, t) = (self.source.nodes(), self.target.nodes());
        (t[i + 1] - t[i]) / (s[i + 1] - s[i])
    }

    /// Node displacements `S(X1_j) - X1_j`.
    pub fn displacements(&self) -> Vec<f64> {
        self.target.nodes().iter().zip(self.source.nodes()).map(|(t, s)| t - s).collect()
    }
}

/// `S` pushing `rho1` forward to `rho0`, at quantile resolution `m`.
pub fn monotone_map(rho0: &GridDensity, rho1: &GridDensity, m: usize) -> Result<MonotoneMap, TransportError> {
    rho0.domain().check_same(&rho1.domain())?;
    MonotoneMap::from_quantiles(rho1.to_quantiles(m)?, rho0.to_quantiles(m)?)
}

fn midpoint_levels(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()
}

fn check_h(h: f64) -> Result<(), TransportError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(TransportError::Parameter(format!("time step {h} must be positive")));
    }
    Ok(())
}

/// `W_c^h(ρ0, ρ1)` with quantiles matched at midpoint levels `(i - 1/2)/m`.
pub fn wasserstein_cost(rho0: &GridDensity, rho1: &GridDensity, c: &CostSpec, h: f64, m: usize) -> Result<f64, TransportError> {
    check_h(h)?;
    rho0.domain().check_same(&rho1.domain())?;
    let s = midpoint_levels(m);
    let x0 = rho0.quantiles_at(&s)?;
    let x1 = rho1.quantiles_at(&s)?;
    Ok(neumaier(x0.iter().zip(&x1).map(|(a, b)| c.value((a - b) / h))) / m as f64)
}

/// `∫ |x - y|^2 dγ` of the monotone coupling, midpoint levels.
pub fn coupling_second_moment(rho0: &GridDensity, rho1: &GridDensity, m: usize) -> Result<f64, TransportError> {
    rho0.domain().check_same(&rho1.domain())?;
    let s = midpoint_levels(m);
    let x0 = rho0.quantiles_at(&s)?;
    let x1 = rho1.quantiles_at(&s)?;
    Ok(neumaier(x0.iter().zip(&x1).map(|(a, b)| (a - b) * (a - b))) / m as f64)
}

/// Trapezoid-in-mass transport cost `μ Σ w_j c((X0_j - X1_j)/h)` between
/// quantile states of equal resolution.
pub fn quantile_transport_cost(q0: &QuantileRep, q1: &QuantileRep, c: &CostSpec, h: f64) -> Result<f64, TransportError> {
    check_h(h)?;
    if q0.m() != q1.m() {
        return Err(TransportError::Resolution(q0.m(), q1.m()));
    }
    let m = q0.m();
    let mu = 1.0 / m as f64;
    Ok(neumaier(
        q0.nodes().iter().zip(q1.nodes()).enumerate().map(|(j, (a, b))| mu * crate::density::node_weight(j, m) * c.value((a - b) / h)),
    ))
}

/// Trapezoid-in-mass `∫ |x - y|^2 dγ` between quantile states.
pub fn quantile_second_moment(q0: &QuantileRep, q1: &QuantileRep) -> Result<f64, TransportError> {
    if q0.m() != q1.m() {
        return Err(TransportError::Resolution(q0.m(), q1.m()));
    }
    let m = q0.m();
    let mu = 1.0 / m as f64;
    Ok(neumaier(
        q0.nodes().iter().zip(q1.nodes()).enumerate().map(|(j, (a, b))| mu * crate::density::node_weight(j, m) * (a - b) * (a - b)),
    ))
}

/// Path `((1 - t) id + t S)_# ρ1`.
#[derive(Debug, Clone)]
pub struct InterpolantPath {
    map: MonotoneMap,
}

impl InterpolantPath {
    pub fn new(map: MonotoneMap) -> Self {
        Self { map }
    }

    pub fn between(rho0: &GridDensity, rho1: &GridDensity, m: usize) -> Result<Self, TransportError> {
        Ok(Self::new(monotone_map(rho0, rho1, m)?))
    }

    pub fn map(&self) -> &MonotoneMap {
        &self.map
    }

    /// Quantile nodes `(1 - t) X1 + t X0`.
    pub fn nodes_at(&self, t: f64) -> Result<QuantileRep, TransportError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(TransportError::Parameter(format!("interpolation parameter {t} outside [0, 1]")));
        }
        let nodes = self.map.source.nodes().iter().zip(self.map.target.nodes()).map(|(x1, x0)| (1.0 - t) * x1 + t * x0).collect();
        Ok(QuantileRep::new(self.map.source.domain(), nodes)?)
    }

    /// `S_t(y) = (1 - t) y + t S(y)`.
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        (1.0 - t) * y + t * self.map.eval(y)
    }
}

/// Density of `(S_t)_# ρ1` on an `n`-cell grid.
pub fn displacement_interpolate(path: &InterpolantPath, t: f64, n: usize) -> Result<GridDensity, TransportError> {
    Ok(path.nodes_at(t)?.to_grid(n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Domain;

    fn d02() -> Domain {
        Domain::new(0.0, 2.0).unwrap()
    }

    fn half(lo: bool) -> GridDensity {
        let v = (0..32).map(|j| if (j < 16) == lo { 1.0 } else { 0.0 }).collect();
        GridDensity::new(d02(), v).unwrap()
    }

    #[test]
    fn translation() {
        let (rho1, rho0) = (half(true), half(false));
        let s = monotone_map(&rho0, &rho1, 64).unwrap();
        for &y in &[0.1, 0.5, 0.93] {
            assert!((s.eval(y) - (y + 1.0)).abs() < 1e-13);
        }
        let c = CostSpec::quadratic();
        assert!((wasserstein_cost(&rho0, &rho1, &c, 1.0, 64).unwrap() - 0.5).abs() < 1e-13);
        assert!((coupling_second_moment(&rho0, &rho1, 64).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dilation() {
        let rho1 = GridDensity::uniform(d02(), 32);
        let rho0 = half(true);
        let s = monotone_map(&rho0, &rho1, 128).unwrap();
        for &y in &[0.2, 1.0, 1.7] {
            assert!((s.eval(y) - y / 2.0).abs() < 1e-13);
        }
        let c = CostSpec::quadratic();
        let w = wasserstein_cost(&rho0, &rho1, &c, 1.0, 512).unwrap();
        assert!((w - 1.0 / 6.0).abs() < 1e-3);
        let m2 = coupling_second_moment(&rho0, &rho1, 4096).unwrap();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn identity_on_equal_measures() {
        let g = GridDensity::from_fn(Domain::unit(), 50, |x| 1.0 + x * x).unwrap();
        let s = monotone_map(&g, &g, 100).unwrap();
        for &y in &[0.0, 0.3, 0.77, 1.0] {
            assert!((s.eval(y) - y).abs() <= 1.0 / 100.0);
        }
        let c = CostSpec::power(3.0).unwrap();
        assert!(wasserstein_cost(&g, &g, &c, 0.1, 100).unwrap().abs() < 1e-12);
    }

    #[test]
    fn interpolation_endpoints_and_errors() {
        let rho0 = GridDensity::from_fn(Domain::unit(), 40, |x| 1.0 + 0.5 * x).unwrap();
        let rho1 = GridDensity::from_fn(Domain::unit(), 40, |x| 2.0 - x).unwrap();
        let m = 400;
        let path = InterpolantPath::between(&rho0, &rho1, m).unwrap();
        let at0 = displacement_interpolate(&path, 0.0, 40).unwrap();
        let at1 = displacement_interpolate(&path, 1.0, 40).unwrap();
        assert!(at0.l1_distance(&rho1).unwrap() <= 2.0 / m as f64);
        assert!(at1.l1_distance(&rho0).unwrap() <= 2.0 / m as f64);
        assert!(displacement_interpolate(&path, 1.5, 40).is_err());
        assert!(displacement_interpolate(&path, -0.1, 40).is_err());
        let mid = displacement_interpolate(&path, 0.5, 40).unwrap();
        assert!(mid.esssup() <= rho0.esssup().max(rho1.esssup()) + 4.0 / m as f64);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let g = GridDensity::uniform(Domain::unit(), 4);
        assert!(wasserstein_cost(&g, &g, &CostSpec::quadratic(), 0.0, 8).is_err());
    }
}
