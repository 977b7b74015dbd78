//! A small dense two-phase simplex over exact rationals.
//!
//! This crate exists to cross-check the production solver: it knows nothing
//! about transportation problems, covector graphs, or big-M scalars, and
//! works on plain rational matrices only.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `minimize c.x` subject to linear constraints; every variable is free.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    pub objective: Vec<Q>,
    pub constraints: Vec<(Vec<Q>, Relation, Q)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
    Unbounded,
}

impl Lp {
    pub fn new(vars: usize) -> Self {
        Lp { objective: vec![Q::zero(); vars], constraints: Vec::new() }
    }

    pub fn constrain(&mut self, coeffs: Vec<Q>, rel: Relation, rhs: Q) {
        assert_eq!(coeffs.len(), self.objective.len());
        self.constraints.push((coeffs, rel, rhs));
    }

    pub fn minimize(&self) -> LpOutcome {
        solve(self)
    }
}

struct Tableau {
    rows: Vec<Vec<Q>>, // last entry is the right-hand side
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            *x = &*x / &p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= &f * y;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule simplex on cost vector `cost` over the allowed columns.
    /// Returns false when unbounded.
    fn optimize(&mut self, cost: &[Q], allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            let reduced = |c: usize| -> Q {
                let mut z = cost[c].clone();
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    z -= &cost[b] * &row[c];
                }
                z
            };
            let entering =
                (0..self.width).find(|&c| allowed(c) && !self.basis.contains(&c) && reduced(c).is_negative());
            let Some(c) = entering else { return true };
            let mut best: Option<(Q, usize, usize)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[c].is_positive() {
                    let ratio = &row[self.width] / &row[c];
                    let better = match &best {
                        None => true,
                        Some((b, _, var)) => ratio < *b || (ratio == *b && self.basis[r] < *var),
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                Some((_, r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

fn solve(lp: &Lp) -> LpOutcome {
    let k = lp.objective.len();
    let rows = lp.constraints.len();
    let slacks = lp.constraints.iter().filter(|(_, rel, _)| *rel != Relation::Eq).count();
    // Columns: x+ (k), x- (k), slacks, artificials (rows).
    let art0 = 2 * k + slacks;
    let width = art0 + rows;
    let mut table = Vec::with_capacity(rows);
    let mut slack = 2 * k;
    for (r, (coeffs, rel, rhs)) in lp.constraints.iter().enumerate() {
        let mut row = vec![Q::zero(); width + 1];
        for (j, a) in coeffs.iter().enumerate() {
            row[j] = a.clone();
            row[k + j] = -a;
        }
        match rel {
            Relation::Le => {
                row[slack] = Q::one();
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -Q::one();
                slack += 1;
            }
            Relation::Eq => {}
        }
        row[width] = rhs.clone();
        if rhs.is_negative() {
            for x in row.iter_mut() {
                *x = -&*x;
            }
        }
        row[art0 + r] = Q::one();
        table.push(row);
    }
    let mut t = Tableau { rows: table, basis: (art0..width).collect(), width };

    let phase1: Vec<Q> = (0..width).map(|c| if c >= art0 { Q::one() } else { Q::zero() }).collect();
    t.optimize(&phase1, &|_| true);
    let infeasibility: Q = t.rows.iter().zip(&t.basis).filter(|(_, &b)| b >= art0).map(|(r, _)| r[width].clone()).sum();
    if infeasibility.is_positive() {
        return LpOutcome::Infeasible;
    }
    // Drive zero-level artificials out of the basis, dropping redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= art0 {
            match (0..art0).find(|&c| !t.rows[r][c].is_zero()) {
                Some(c) => t.pivot(r, c),
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let mut cost = vec![Q::zero(); width];
    for (j, c) in lp.objective.iter().enumerate() {
        cost[j] = c.clone();
        cost[k + j] = -c;
    }
    if !t.optimize(&cost, &|c| c < art0) {
        return LpOutcome::Unbounded;
    }
    let mut z = vec![Q::zero(); width];
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        z[b] = row[width].clone();
    }
    let x: Vec<Q> = (0..k).map(|j| &z[j] - &z[k + j]).collect();
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, value }
}

/// `dd(x, y) = sum_i (x_i - y_i) - n * min_j (x_j - y_j)`, written out
/// independently of the production crate.
pub fn asym_distance(x: &[Q], y: &[Q]) -> Q {
    let diffs: Vec<Q> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let min = diffs.iter().min().cloned().unwrap_or_else(Q::zero);
    let total: Q = diffs.iter().sum();
    total - min * q(diffs.len() as i64)
}

/// Minimizes `x -> sum_v dd(x, v)` over the rows `v` of `points` by linear
/// programming: with `y_v <= x_j - v_j` for all `j`, the objective becomes
/// `sum_v (sum_j (x_j - v_j) - n * y_v)`. Returns an optimal point and value.
pub fn fw_min(points: &[Vec<Q>]) -> (Vec<Q>, Q) {
    let m = points.len();
    let n = points[0].len();
    // Variables: x_0..x_{n-1}, y_0..y_{m-1}.
    let mut lp = Lp::new(n + m);
    for j in 0..n {
        lp.objective[j] = q(m as i64);
    }
    for i in 0..m {
        lp.objective[n + i] = q(-(n as i64));
    }
    for (i, v) in points.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            let mut coeffs = vec![Q::zero(); n + m];
            coeffs[n + i] = Q::one();
            coeffs[j] = -Q::one();
            lp.constrain(coeffs, Relation::Le, -vj);
        }
    }
    // Pin the all-ones direction.
    let mut pin = vec![Q::zero(); n + m];
    pin[0] = Q::one();
    lp.constrain(pin, Relation::Eq, Q::zero());
    match lp.minimize() {
        LpOutcome::Optimal { x, value } => {
            let constant: Q = points.iter().flatten().sum();
            (x[..n].to_vec(), value - constant)
        }
        other => panic!("Fermat-Weber program must have an optimum, got {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_lp() {
        // min -x - y s.t. x + 2y <= 4, 3x + y <= 6, x >= 0, y >= 0  -> (8/5, 6/5)
        let mut lp = Lp::new(2);
        lp.objective = vec![q(-1), q(-1)];
        lp.constrain(vec![q(1), q(2)], Relation::Le, q(4));
        lp.constrain(vec![q(3), q(1)], Relation::Le, q(6));
        lp.constrain(vec![q(1), q(0)], Relation::Ge, q(0));
        lp.constrain(vec![q(0), q(1)], Relation::Ge, q(0));
        let LpOutcome::Optimal { x, value } = lp.minimize() else { panic!() };
        assert_eq!(x, vec![Q::new(8.into(), 5.into()), Q::new(6.into(), 5.into())]);
        assert_eq!(value, Q::new((-14).into(), 5.into()));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(1);
        lp.constrain(vec![q(1)], Relation::Ge, q(2));
        lp.constrain(vec![q(1)], Relation::Le, q(1));
        assert_eq!(lp.minimize(), LpOutcome::Infeasible);
        let mut lp = Lp::new(1);
        lp.objective = vec![q(1)];
        lp.constrain(vec![q(1)], Relation::Le, q(1));
        assert_eq!(lp.minimize(), LpOutcome::Unbounded);
    }

    #[test]
    fn single_point_fw() {
        let v = vec![q(3), q(-1), q(2)];
        let (x, value) = fw_min(std::slice::from_ref(&v));
        assert_eq!(value, q(0));
        assert_eq!(asym_distance(&x, &v), q(0));
    }

    #[test]
    fn two_points_against_grid_refinement() {
        let pts = vec![vec![q(0), q(4), q(-1)], vec![q(2), q(-3), q(5)]];
        let (x, value) = fw_min(&pts);
        let f = |x: &[Q]| -> Q { pts.iter().map(|v| asym_distance(x, v)).sum() };
        assert_eq!(f(&x), value);
        // Coarse-to-fine grid search over x_0 = 0; piecewise-linear with
        // integer breakpoints, so the grid optimum hits the exact minimum.
        let mut best: Option<Q> = None;
        for a in -12..=12 {
            for b in -12..=12 {
                for step in [1i64, 2] {
                    let p = [q(0), Q::new(a.into(), step.into()), Q::new(b.into(), step.into())];
                    let val = f(&p);
                    if best.as_ref().is_none_or(|bv| &val < bv) {
                        best = Some(val);
                    }
                }
            }
        }
        assert_eq!(best.unwrap(), value);
    }
}
