//! Projected Newton iteration for one minimizing-movement step in quantile
//! coordinates.

use super::{JkoError, JkoProblem};
use crate::density::{node_weight, QuantileRep};
use crate::numerics::{pava, solve_spd_tridiagonal, NeumaierSum};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

pub(crate) struct StepSolution {
    pub nodes: Vec<f64>,
    pub kkt: f64,
    pub iterations: usize,
}

struct Objective<'a> {
    problem: &'a JkoProblem,
    prev: &'a [f64],
    m: usize,
    mu: f64,
    floor: f64,
}

impl<'a> Objective<'a> {
    fn weight(&self, j: usize) -> f64 {
        node_weight(j, self.m)
    }

    /// `(J, noise)` where `noise` bounds the rounding error of the evaluation;
    /// infinity when a cell is thinner than the floor.
    fn value(&self, x: &[f64]) -> (f64, f64) {
        let model = &self.problem.model;
        let h = self.problem.h;
        let mut s = NeumaierSum::new();
        let mut noise = 0.0;
        for i in 1..=self.m {
            let d = x[i] - x[i - 1];
            if !(d >= self.floor) {
                return (f64::INFINITY, f64::INFINITY);
            }
            let r = self.mu / d;
            let t = d * model.energy.value(r);
            s.add(t);
            // d carries an absolute error of order ε(|x_i| + |x_{i-1}|)
            noise += t.abs() + model.energy.pressure(r).abs() * (x[i].abs() + x[i - 1].abs());
        }
        let vz = model.potential.is_zero();
        for j in 0..=self.m {
            let w = self.mu * self.weight(j);
            let z = (self.prev[j] - x[j]) / h;
            let t = h * w * model.cost.value(z);
            s.add(t);
            noise += t.abs() + w * model.cost.derivative(z).abs() * (self.prev[j].abs() + x[j].abs());
            if !vz {
                let t = w * model.potential.value(x[j]);
                s.add(t);
                noise += t.abs() + w * model.potential.derivative(x[j]).abs() * x[j].abs();
            }
        }
        (s.value(), 4.0 * f64::EPSILON * noise)
    }

    /// Gradient and the energy part of it (`∂E/∂X_j`).
    fn gradient(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let model = &self.problem.model;
        let h = self.problem.h;
        let m = self.m;
        let p: Vec<f64> = (1..=m).map(|i| model.energy.pressure(self.mu / (x[i] - x[i - 1]))).collect();
        let mut e = vec![0.0; m + 1];
        for j in 0..=m {
            let right = if j < m { p[j] } else { 0.0 };
            let left = if j > 0 { p[j - 1] } else { 0.0 };
            e[j] = right - left + self.mu * self.weight(j) * model.potential.derivative(x[j]);
        }
        let g = (0..=m).map(|j| e[j] - self.mu * self.weight(j) * model.cost.derivative((self.prev[j] - x[j]) / h)).collect();
        (g, e)
    }

    /// Tridiagonal model Hessian `(diag, off)`.
    fn hessian(&self, x: &[f64], e: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let model = &self.problem.model;
        let c = &model.cost;
        let h = self.problem.h;
        let m = self.m;
        // g''(d) = ρ² F''(ρ) / d with ρ = μ/d
        let gpp: Vec<f64> = (1..=m)
            .map(|i| {
                let d = x[i] - x[i - 1];
                let r = self.mu / d;
                r * r * model.energy.second(r) / d
            })
            .collect();
        let singular = c.q() < 2.0 || c.terms().iter().any(|t| t.exponent < 2.0);
        let mut diag = vec![0.0; m + 1];
        for j in 0..=m {
            let w = self.mu * self.weight(j);
            let mut z = ((self.prev[j] - x[j]) / h).abs();
            if singular {
                // c'' blows up at rest; evaluate it at the expected velocity instead
                let zhat = c.conjugate_gradient(e[j] / w).abs();
                z = z.max(0.5 * zhat).max(1e-12);
            }
            diag[j] = w * c.second_derivative(z) / h + w * model.potential.second(x[j]);
            if j > 0 {
                diag[j] += gpp[j - 1];
            }
            if j < m {
                diag[j] += gpp[j];
            }
        }
        let off = (0..m).map(|i| -gpp[i]).collect();
        (diag, off)
    }
}

fn project(y: &mut Vec<f64>, a: f64, b: f64) {
    if y.windows(2).any(|w| w[1] < w[0]) {
        *y = pava(y);
    }
    for v in y.iter_mut() {
        *v = v.clamp(a, b);
    }
}

pub(crate) fn solve_step(problem: &JkoProblem, prev: &QuantileRep) -> Result<StepSolution, JkoError> {
    let m = prev.m();
    let domain = problem.model.domain;
    let (a, b) = (domain.a, domain.b);
    let obj = Objective { problem, prev: prev.nodes(), m, mu: 1.0 / m as f64, floor: problem.vacuum_floor() };
    let eps = 1e-14 * domain.length();
    let tol = problem.options.tol;

    let mut x = prev.nodes().to_vec();
    let (mut jx, mut noise_x) = obj.value(&x);
    if !jx.is_finite() {
        return Err(JkoError::Degeneracy { cell: first_thin(&x, obj.floor), width: prev.min_width() });
    }

    let kkt_of = |x: &[f64], g: &[f64]| -> (f64, [bool; 2]) {
        let lo = x[0] <= a + eps && g[0] > 0.0;
        let hi = x[m] >= b - eps && g[m] < 0.0;
        let mut r: f64 = 0.0;
        for j in 0..=m {
            if (j == 0 && lo) || (j == m && hi) {
                continue;
            }
            r = r.max(g[j].abs() / (obj.mu * node_weight(j, m)));
        }
        (r, [lo, hi])
    };

    let (mut g, mut e) = obj.gradient(&x);
    let (mut kkt, mut active) = kkt_of(&x, &g);
    for it in 0..problem.options.max_iter {
        if kkt <= tol {
            return Ok(StepSolution { nodes: x, kkt, iterations: it });
        }
        let (mut diag, mut off) = obj.hessian(&x, &e);
        let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        for (idx, on) in [(0usize, active[0]), (m, active[1])] {
            if on {
                diag[idx] = 1.0;
                rhs[idx] = 0.0;
                if idx > 0 {
                    off[idx - 1] = 0.0;
                }
                if idx < m {
                    off[idx] = 0.0;
                }
            }
        }
        let dmax = diag.iter().copied().fold(0.0, f64::max);
        let mut shift = 1e-14 * dmax;
        let dir = loop {
            let shifted: Vec<f64> = diag.iter().map(|d| d + shift).collect();
            if let Some(p) = solve_spd_tridiagonal(&shifted, &off, &rhs) {
                break p;
            }
            shift = if shift == 0.0 { 1e-14 } else { shift * 100.0 };
            if shift > 1e6 * dmax.max(1.0) {
                return Err(JkoError::NonConvergence { best: QuantileRep::new(domain, x)?, residual: kkt, iterations: it });
            }
        };

        let mut accepted = None;
        for direction in [dir, rhs.iter().zip(&diag).map(|(r, d)| r / d).collect::<Vec<f64>>()] {
            let mut alpha = 1.0;
            while alpha >= MIN_STEP {
                let mut y: Vec<f64> = x.iter().zip(&direction).map(|(xi, pi)| xi + alpha * pi).collect();
                project(&mut y, a, b);
                let (jy, noise) = obj.value(&y);
                if jy.is_finite() {
                    let decrease: f64 = g.iter().zip(y.iter().zip(&x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
                    if jy <= jx + ARMIJO * decrease {
                        accepted = Some((y, jy, noise));
                        break;
                    }
                    // round-off regime: objective flat to machine precision
                    if jy <= jx + noise + noise_x {
                        let (gy, _) = obj.gradient(&y);
                        if kkt_of(&y, &gy).0 < kkt {
                            accepted = Some((y, jy, noise));
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((y, jy, ny)) => {
                x = y;
                jx = jy;
                noise_x = ny;
            }
            None => {
                if x.windows(2).any(|w| w[1] - w[0] <= 2.0 * obj.floor) {
                    return Err(JkoError::Degeneracy { cell: first_thin(&x, 2.0 * obj.floor), width: min_width(&x) });
                }
                return Err(JkoError::NonConvergence { best: QuantileRep::new(domain, x)?, residual: kkt, iterations: it + 1 });
            }
        }
        let ge = obj.gradient(&x);
        g = ge.0;
        e = ge.1;
        let ka = kkt_of(&x, &g);
        kkt = ka.0;
        active = ka.1;
    }
    if kkt <= tol {
        return Ok(StepSolution { nodes: x, kkt, iterations: problem.options.max_iter });
    }
    Err(JkoError::NonConvergence { best: QuantileRep::new(domain, x)?, residual: kkt, iterations: problem.options.max_iter })
}

fn min_width(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn first_thin(x: &[f64], floor: f64) -> usize {
    x.windows(2).position(|w| w[1] - w[0] < floor).map(|i| i + 1).unwrap_or(0)
}
