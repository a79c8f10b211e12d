use std::io::Write;

use serde::Serialize;

use super::TransportError;
use crate::convex::CostSpec;
use crate::numerics::neumaier;

/// Largest instance solved by permutation enumeration.
pub const ORACLE_EXHAUSTIVE_MAX: usize = 8;
/// Largest instance accepted at all.
pub const ORACLE_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanAtom {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

/// Discrete coupling between two equal-weight atom lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub atoms: Vec<PlanAtom>,
}

impl TransportPlan {
    fn from_assignment(atoms0: &[f64], atoms1: &[f64], perm: &[usize]) -> Self {
        let w = 1.0 / atoms0.len() as f64;
        let mut atoms: Vec<PlanAtom> = perm.iter().enumerate().map(|(i, &j)| PlanAtom { x: atoms0[i], y: atoms1[j], mass: w }).collect();
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        Self { atoms }
    }

    /// Largest deviation of either marginal from the uniform weight.
    pub fn marginal_error(&self, atoms0: &[f64], atoms1: &[f64]) -> f64 {
        let w = 1.0 / atoms0.len() as f64;
        let mut err: f64 = 0.0;
        for (atoms, pick) in [(atoms0, true), (atoms1, false)] {
            for (k, a) in atoms.iter().enumerate() {
                // duplicates share their mass, so compare against the multiplicity
                let mult = atoms.iter().filter(|b| *b == a).count() as f64;
                if atoms[..k].contains(a) {
                    continue;
                }
                let got: f64 = self.atoms.iter().filter(|p| if pick { p.x == *a } else { p.y == *a }).map(|p| p.mass).sum();
                err = err.max((got - mult * w).abs());
            }
        }
        err
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,mass")?;
        for a in &self.atoms {
            writeln!(w, "{},{},{}", a.x, a.y, a.mass)?;
        }
        Ok(())
    }
}

fn check_atoms(atoms0: &[f64], atoms1: &[f64], h: f64) -> Result<(), TransportError> {
    if atoms0.len() != atoms1.len() {
        return Err(TransportError::Parameter(format!("atom counts differ: {} vs {}", atoms0.len(), atoms1.len())));
    }
    if atoms0.is_empty() {
        return Err(TransportError::OracleLimit("no atoms".into()));
    }
    if atoms0.len() > ORACLE_MAX {
        return Err(TransportError::OracleLimit(format!("{} atoms exceed the limit {ORACLE_MAX}", atoms0.len())));
    }
    if !(h > 0.0) {
        return Err(TransportError::Parameter(format!("time step {h} must be positive")));
    }
    if atoms0.iter().chain(atoms1).any(|x| !x.is_finite()) {
        return Err(TransportError::Parameter("non-finite atom".into()));
    }
    Ok(())
}

fn assignment_cost(atoms0: &[f64], atoms1: &[f64], perm: &[usize], c: &CostSpec, h: f64) -> f64 {
    neumaier(perm.iter().enumerate().map(|(i, &j)| c.value((atoms0[i] - atoms1[j]) / h))) / atoms0.len() as f64
}

/// Cost of the sorted (monotone) matching.
pub fn monotone_atom_cost(atoms0: &[f64], atoms1: &[f64], c: &CostSpec, h: f64) -> Result<(f64, TransportPlan), TransportError> {
    if atoms0.len() != atoms1.len() || atoms0.is_empty() {
        return Err(TransportError::Parameter("atom lists must be nonempty and of equal length".into()));
    }
    let mut i0: Vec<usize> = (0..atoms0.len()).collect();
    let mut i1 = i0.clone();
    i0.sort_by(|&a, &b| atoms0[a].total_cmp(&atoms0[b]));
    i1.sort_by(|&a, &b| atoms1[a].total_cmp(&atoms1[b]));
    let mut perm = vec![0; atoms0.len()];
    for (a, b) in i0.into_iter().zip(i1) {
        perm[a] = b;
    }
    Ok((assignment_cost(atoms0, atoms1, &perm, c, h), TransportPlan::from_assignment(atoms0, atoms1, &perm)))
}

/// Exact optimal assignment between equal-weight atoms: permutation search up
/// to eight atoms, Hungarian algorithm up to 64.
pub fn lp_oracle(atoms0: &[f64], atoms1: &[f64], c: &CostSpec, h: f64) -> Result<(f64, TransportPlan), TransportError> {
    check_atoms(atoms0, atoms1, h)?;
    let k = atoms0.len();
    let cost: Vec<Vec<f64>> = atoms0.iter().map(|x| atoms1.iter().map(|y| c.value((x - y) / h)).collect()).collect();
    let perm = if k <= ORACLE_EXHAUSTIVE_MAX { exhaustive(&cost) } else { hungarian(&cost) };
    Ok((assignment_cost(atoms0, atoms1, &perm, c, h), TransportPlan::from_assignment(atoms0, atoms1, &perm)))
}

/// Heap's algorithm over all permutations.
fn exhaustive(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    let mut p: Vec<usize> = (0..k).collect();
    let total = |p: &[usize]| neumaier(p.iter().enumerate().map(|(i, &j)| cost[i][j]));
    let mut best = p.clone();
    let mut best_cost = total(&p);
    let mut ctr = vec![0usize; k];
    let mut i = 1;
    while i < k {
        if ctr[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(ctr[i], i);
            }
            let v = total(&p);
            if v < best_cost {
                best_cost = v;
                best.copy_from_slice(&p);
            }
            ctr[i] += 1;
            i = 1;
        } else {
            ctr[i] = 0;
            i += 1;
        }
    }
    best
}

/// Shortest augmenting path Hungarian method with potentials, O(k^3).
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atom_example() {
        let c = CostSpec::quadratic();
        let (cost, plan) = lp_oracle(&[0.0, 1.0], &[0.5, 1.5], &c, 1.0).unwrap();
        assert!((cost - 0.125).abs() < 1e-15);
        assert_eq!(plan.atoms[0], PlanAtom { x: 0.0, y: 0.5, mass: 0.5 });
        assert_eq!(plan.atoms[1], PlanAtom { x: 1.0, y: 1.5, mass: 0.5 });
    }

    #[test]
    fn identical_atoms_cost_nothing() {
        let a = [0.3, -1.0, 2.0, 0.7];
        let (cost, plan) = lp_oracle(&a, &a, &CostSpec::power(1.5).unwrap(), 0.5).unwrap();
        assert_eq!(cost, 0.0);
        assert!(plan.atoms.iter().all(|p| p.x == p.y));
        assert!(plan.marginal_error(&a, &a) < 1e-15);
    }

    #[test]
    fn hungarian_matches_exhaustive() {
        let a = [0.9, 0.1, 0.5, 0.33, 0.72, 0.05, 0.61];
        let b = [0.2, 0.95, 0.4, 0.11, 0.8, 0.57, 0.3];
        let c = CostSpec::power(3.0).unwrap();
        let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| c.value(x - y)).collect()).collect();
        let e = exhaustive(&cost);
        let hg = hungarian(&cost);
        let tot = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
        assert!((tot(&e) - tot(&hg)).abs() < 1e-14);
    }

    #[test]
    fn limits() {
        let c = CostSpec::quadratic();
        assert!(matches!(lp_oracle(&[], &[], &c, 1.0), Err(TransportError::OracleLimit(_))));
        let big = vec![0.0; 65];
        assert!(matches!(lp_oracle(&big, &big, &c, 1.0), Err(TransportError::OracleLimit(_))));
        assert!(lp_oracle(&[0.0], &[0.0, 1.0], &c, 1.0).is_err());
    }

    #[test]
    fn csv_sorted() {
        let (_, plan) = lp_oracle(&[1.0, 0.0], &[0.0, 1.0], &CostSpec::quadratic(), 1.0).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,mass\n0,0,0.5\n1,1,0.5\n");
    }
}
