//! Maximization transportation problems with [`BigM`] costs, solved by a
//! spanning-tree network simplex with Bland's pivoting rule.
//!
//! Flows stay integral because supplies and demands are integers, so the
//! ratio test is exact integer arithmetic. Costs are only ever added,
//! subtracted, and compared.

use std::collections::VecDeque;

use num_traits::Zero;

use crate::bigm::{int, BigM};
use crate::tropical::PointConfig;

/// A balanced transportation problem: ship `supplies[i]` out of every row
/// and `demands[j]` into every column, maximizing `sum flow_ij * cost_ij`.
#[derive(Clone, Debug)]
pub struct TransportationInstance {
    rows: usize,
    cols: usize,
    costs: Vec<BigM>,
    supplies: Vec<i64>,
    demands: Vec<i64>,
}

impl TransportationInstance {
    pub fn new(costs: Vec<Vec<BigM>>, supplies: Vec<i64>, demands: Vec<i64>) -> Self {
        let rows = costs.len();
        let cols = demands.len();
        assert_eq!(supplies.len(), rows, "one supply per row");
        assert!(costs.iter().all(|r| r.len() == cols), "cost matrix must be rows x cols");
        assert!(supplies.iter().chain(&demands).all(|&x| x > 0), "supplies and demands must be positive");
        assert_eq!(supplies.iter().sum::<i64>(), demands.iter().sum::<i64>(), "unbalanced instance");
        TransportationInstance { rows, cols, costs: costs.into_iter().flatten().collect(), supplies, demands }
    }

    /// The instance whose optimal face is dual to the central covector cell:
    /// every point ships `n` units and every coordinate receives `m` units,
    /// i.e. the barycenter of the product of simplices scaled by `m * n`.
    pub fn barycentric(config: &PointConfig) -> Self {
        let (m, n) = (config.num_points(), config.dim());
        let costs = config.rows().map(<[BigM]>::to_vec).collect();
        Self::new(costs, vec![n as i64; m], vec![m as i64; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cost(&self, i: usize, j: usize) -> &BigM {
        &self.costs[i * self.cols + j]
    }

    pub fn supplies(&self) -> &[i64] {
        &self.supplies
    }

    pub fn demands(&self) -> &[i64] {
        &self.demands
    }

    pub fn total(&self) -> i64 {
        self.supplies.iter().sum()
    }

    /// Objective value of a flow given in row-major order.
    pub fn value(&self, flow: &[i64]) -> BigM {
        flow.iter().zip(&self.costs).filter(|(f, _)| **f != 0).map(|(f, c)| c.scale(&int(*f))).sum()
    }

    /// Whether a row-major flow is nonnegative and meets every supply and demand.
    pub fn is_feasible(&self, flow: &[i64]) -> bool {
        if flow.len() != self.rows * self.cols || flow.iter().any(|&f| f < 0) {
            return false;
        }
        let rows_ok =
            (0..self.rows).all(|i| flow[i * self.cols..(i + 1) * self.cols].iter().sum::<i64>() == self.supplies[i]);
        let cols_ok =
            (0..self.cols).all(|j| (0..self.rows).map(|i| flow[i * self.cols + j]).sum::<i64>() == self.demands[j]);
        rows_ok && cols_ok
    }
}

/// An optimal basic solution together with its dual potentials.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub flow: Vec<i64>,
    pub row_potential: Vec<BigM>,
    pub col_potential: Vec<BigM>,
    pub objective: BigM,
    pub pivots: usize,
}

impl TransportSolution {
    /// `cost_ij - u_i - v_j`; nonpositive everywhere at optimality.
    pub fn reduced_cost(&self, instance: &TransportationInstance, i: usize, j: usize) -> BigM {
        &(instance.cost(i, j) - &self.row_potential[i]) - &self.col_potential[j]
    }

    /// Cells with zero reduced cost: the only cells any optimal flow may use.
    pub fn tight_cells(&self, instance: &TransportationInstance) -> Vec<(usize, usize)> {
        (0..instance.rows)
            .flat_map(|i| (0..instance.cols).map(move |j| (i, j)))
            .filter(|&(i, j)| self.reduced_cost(instance, i, j).is_zero())
            .collect()
    }
}

struct Simplex<'a> {
    inst: &'a TransportationInstance,
    flow: Vec<i64>,
    basic: Vec<bool>,
    basis: Vec<usize>,
    u: Vec<BigM>,
    v: Vec<BigM>,
    // Spanning-tree bookkeeping from the last potential computation; nodes
    // are rows `0..m` followed by columns `m..m+n`.
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn new(inst: &'a TransportationInstance) -> Self {
        let (m, n) = (inst.rows, inst.cols);
        let mut flow = vec![0; m * n];
        let mut basic = vec![false; m * n];
        let mut basis = Vec::with_capacity(m + n - 1);
        let mut supply = inst.supplies.clone();
        let mut demand = inst.demands.clone();
        let (mut i, mut j) = (0, 0);
        // Northwest corner rule; degenerate steps keep zero-flow cells basic
        // so the basis is always a spanning tree.
        loop {
            let q = supply[i].min(demand[j]);
            let cell = i * n + j;
            flow[cell] = q;
            basic[cell] = true;
            basis.push(cell);
            supply[i] -= q;
            demand[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if (supply[i] == 0 && i < m - 1) || j == n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(basis.len(), m + n - 1);
        Simplex {
            inst,
            flow,
            basic,
            basis,
            u: vec![BigM::zero(); m],
            v: vec![BigM::zero(); n],
            parent: vec![usize::MAX; m + n],
            parent_cell: vec![usize::MAX; m + n],
            depth: vec![0; m + n],
        }
    }

    fn compute_potentials(&mut self) {
        let (m, n) = (self.inst.rows, self.inst.cols);
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for &cell in &self.basis {
            let (i, j) = (cell / n, cell % n);
            adjacency[i].push(cell);
            adjacency[m + j].push(cell);
        }
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.u[0] = BigM::zero();
        self.parent[0] = usize::MAX;
        self.depth[0] = 0;
        while let Some(node) = queue.pop_front() {
            for &cell in &adjacency[node] {
                let (i, j) = (cell / n, cell % n);
                let other = if node < m { m + j } else { i };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                let cost = self.inst.cost(i, j);
                if other >= m {
                    self.v[j] = cost - &self.u[i];
                } else {
                    self.u[i] = cost - &self.v[j];
                }
                self.parent[other] = node;
                self.parent_cell[other] = cell;
                self.depth[other] = self.depth[node] + 1;
                queue.push_back(other);
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis is not spanning");
    }

    fn reduced_cost(&self, i: usize, j: usize) -> BigM {
        &(self.inst.cost(i, j) - &self.u[i]) - &self.v[j]
    }

    /// Bland: the lowest-index nonbasic cell with positive reduced cost.
    fn entering(&self) -> Option<usize> {
        let n = self.inst.cols;
        (0..self.flow.len()).find(|&cell| !self.basic[cell] && self.reduced_cost(cell / n, cell % n).signum().is_gt())
    }

    /// Tree path from column node of `cell` back to its row node, as
    /// cells in cycle order after the entering cell.
    fn cycle_after(&self, cell: usize) -> Vec<usize> {
        let (m, n) = (self.inst.rows, self.inst.cols);
        let (mut a, mut b) = (m + cell % n, cell / n);
        let mut from_col = Vec::new();
        let mut from_row = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                from_col.push(self.parent_cell[a]);
                a = self.parent[a];
            } else {
                from_row.push(self.parent_cell[b]);
                b = self.parent[b];
            }
        }
        from_col.extend(from_row.into_iter().rev());
        from_col
    }

    fn pivot(&mut self, entering: usize) {
        let path = self.cycle_after(entering);
        // Cells at even positions of the path lose flow, odd positions gain.
        let theta = path.iter().step_by(2).map(|&c| self.flow[c]).min().expect("cycle has a losing cell");
        let leaving = path
            .iter()
            .step_by(2)
            .copied()
            .filter(|&c| self.flow[c] == theta)
            .min()
            .expect("ratio test has a minimizer");
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[c] -= theta;
            } else {
                self.flow[c] += theta;
            }
        }
        self.flow[entering] += theta;
        self.basic[leaving] = false;
        self.basic[entering] = true;
        let slot = self.basis.iter().position(|&c| c == leaving).expect("leaving cell is basic");
        self.basis[slot] = entering;
    }
}

/// Solves the instance to optimality.
pub fn solve(instance: &TransportationInstance) -> TransportSolution {
    let mut simplex = Simplex::new(instance);
    let mut pivots = 0;
    loop {
        simplex.compute_potentials();
        match simplex.entering() {
            Some(cell) => {
                simplex.pivot(cell);
                pivots += 1;
            }
            None => break,
        }
    }
    let objective = instance.value(&simplex.flow);
    TransportSolution { flow: simplex.flow, row_potential: simplex.u, col_potential: simplex.v, objective, pivots }
}

/// Looks for an optimal flow that uses `cell`: a feasible flow supported on
/// `tight` with at least one unit on `cell`. Integrality of transportation
/// polytopes makes one unit equivalent to any positive amount.
pub fn probe_cell(
    instance: &TransportationInstance,
    tight: &[(usize, usize)],
    cell: (usize, usize),
) -> Option<Vec<i64>> {
    let (m, n) = (instance.rows, instance.cols);
    let (pi, pj) = cell;
    let source = m + n;
    let sink = m + n + 1;
    let mut net = MaxFlow::new(m + n + 2);
    for i in 0..m {
        net.add_edge(source, i, instance.supplies[i] - i64::from(i == pi));
    }
    for j in 0..n {
        net.add_edge(m + j, sink, instance.demands[j] - i64::from(j == pj));
    }
    let big = instance.total();
    let arcs: Vec<((usize, usize), usize)> =
        tight.iter().map(|&(i, j)| ((i, j), net.add_edge(i, m + j, big))).collect();
    let shipped = net.run(source, sink);
    if shipped != instance.total() - 1 {
        return None;
    }
    let mut flow = vec![0; m * n];
    for ((i, j), arc) in arcs {
        flow[i * n + j] = net.flow_on(arc);
    }
    flow[pi * n + pj] += 1;
    Some(flow)
}

/// Dinic's algorithm on small integer-capacity networks.
struct MaxFlow {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    original: Vec<i64>,
}

impl MaxFlow {
    fn new(nodes: usize) -> Self {
        MaxFlow { head: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new(), original: Vec::new() }
    }

    fn add_edge(&mut self, from: usize, to: usize, capacity: i64) -> usize {
        let id = self.to.len();
        self.head[from].push(id);
        self.to.push(to);
        self.cap.push(capacity);
        self.original.push(capacity);
        self.head[to].push(id + 1);
        self.to.push(from);
        self.cap.push(0);
        self.original.push(0);
        id
    }

    fn flow_on(&self, arc: usize) -> i64 {
        self.original[arc] - self.cap[arc]
    }

    fn run(&mut self, s: usize, t: usize) -> i64 {
        let nodes = self.head.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; nodes];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &e in &self.head[x] {
                    if self.cap[e] > 0 && level[self.to[e]] == usize::MAX {
                        level[self.to[e]] = level[x] + 1;
                        queue.push_back(self.to[e]);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; nodes];
            loop {
                let pushed = self.augment(s, t, i64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, x: usize, t: usize, limit: i64, level: &[usize], next: &mut [usize]) -> i64 {
        if x == t {
            return limit;
        }
        while next[x] < self.head[x].len() {
            let e = self.head[x][next[x]];
            let y = self.to[e];
            if self.cap[e] > 0 && level[y] == level[x] + 1 {
                let pushed = self.augment(y, t, limit.min(self.cap[e]), level, next);
                if pushed > 0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[x] += 1;
        }
        0
    }
}
