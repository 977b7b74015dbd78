//! Tropical primitives: the asymmetric distance, covector graphs, and
//! polytropes stored as difference-constraint matrices.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Index;

use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::bigm::{int, BigM, ParseScalarError, Rational};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TropicalError {
    #[error("dimension mismatch: expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("a point configuration needs at least one point and one coordinate")]
    Degenerate,
    #[error("ragged matrix: row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseScalarError },
    #[error("infeasible difference constraints: negative cycle through coordinates {cycle:?}")]
    Infeasible { cycle: Vec<usize> },
}

/// A point of the tropical projective torus, stored in its sum-zero
/// representative so that equality is equality modulo the all-ones vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusPoint {
    coords: Vec<BigM>,
}

impl TorusPoint {
    pub fn new(coords: Vec<BigM>) -> Self {
        let n = coords.len();
        if n == 0 {
            return TorusPoint { coords };
        }
        let shift = coords.iter().sum::<BigM>().scale(&Rational::new(1.into(), n.into()));
        let coords = coords.into_iter().map(|c| &c - &shift).collect();
        TorusPoint { coords }
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Self::new(coords.iter().map(|&c| BigM::from_int(c)).collect())
    }

    pub fn coords(&self) -> &[BigM] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn eval(&self, m0: &Rational) -> TorusPoint {
        TorusPoint::new(self.coords.iter().map(|c| BigM::constant(c.eval(m0))).collect())
    }

    /// Ordinary average of a nonempty set of points.
    pub fn average(points: &[TorusPoint]) -> TorusPoint {
        assert!(!points.is_empty(), "average of no points");
        let n = points[0].dim();
        let weight = Rational::new(1.into(), points.len().into());
        let coords = (0..n).map(|j| points.iter().map(|p| &p.coords[j]).sum::<BigM>().scale(&weight)).collect();
        TorusPoint::new(coords)
    }
}

impl Index<usize> for TorusPoint {
    type Output = BigM;
    fn index(&self, j: usize) -> &BigM {
        &self.coords[j]
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (j, c) in self.coords.iter().enumerate() {
            if j > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// `dd(x, y) = sum_i (x_i - y_i) - n * min_j (x_j - y_j)` on raw coordinates.
pub fn asym_distance_raw(x: &[BigM], y: &[BigM]) -> Result<BigM, TropicalError> {
    if x.len() != y.len() {
        return Err(TropicalError::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.is_empty() {
        return Ok(BigM::zero());
    }
    let diffs: Vec<BigM> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let min = diffs.iter().min().expect("nonempty");
    let total: BigM = diffs.iter().sum();
    Ok(&total - &min.scale(&int(diffs.len() as i64)))
}

/// Asymmetric tropical distance between two torus points.
pub fn asym_distance(x: &TorusPoint, y: &TorusPoint) -> Result<BigM, TropicalError> {
    asym_distance_raw(x.coords(), y.coords())
}

/// An `m x n` matrix of scalars whose rows are the points `v_1, ..., v_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointConfig {
    rows: usize,
    cols: usize,
    entries: Vec<BigM>,
}

impl PointConfig {
    pub fn new(rows: Vec<Vec<BigM>>) -> Result<Self, TropicalError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(TropicalError::Degenerate);
        }
        let mut entries = Vec::with_capacity(m * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(TropicalError::Ragged { row: i, expected: n, found: row.len() });
            }
            entries.extend(row);
        }
        Ok(PointConfig { rows: m, cols: n, entries })
    }

    pub fn from_ints(rows: &[Vec<i64>]) -> Result<Self, TropicalError> {
        Self::new(rows.iter().map(|r| r.iter().map(|&x| BigM::from_int(x)).collect()).collect())
    }

    /// The affine family `U + M * W`.
    pub fn from_affine(u: &[Vec<Rational>], w: &[Vec<Rational>]) -> Result<Self, TropicalError> {
        if u.len() != w.len() {
            return Err(TropicalError::DimensionMismatch { expected: u.len(), found: w.len() });
        }
        let rows = u
            .iter()
            .zip(w)
            .enumerate()
            .map(|(i, (ur, wr))| {
                if ur.len() != wr.len() {
                    return Err(TropicalError::Ragged { row: i, expected: ur.len(), found: wr.len() });
                }
                Ok(ur.iter().zip(wr).map(|(a, b)| BigM::new(a.clone(), b.clone())).collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn num_points(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigM] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> &BigM {
        &self.entries[i * self.cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[BigM]> {
        self.entries.chunks(self.cols)
    }

    pub fn points(&self) -> Vec<TorusPoint> {
        self.rows().map(|r| TorusPoint::new(r.to_vec())).collect()
    }

    /// Constant part `U` and slope part `W`.
    pub fn split(&self) -> (Vec<Vec<Rational>>, Vec<Vec<Rational>>) {
        let u = self.rows().map(|r| r.iter().map(|x| x.constant_part().clone()).collect()).collect();
        let w = self.rows().map(|r| r.iter().map(|x| x.slope().clone()).collect()).collect();
        (u, w)
    }

    pub fn is_numeric(&self) -> bool {
        self.entries.iter().all(BigM::is_numeric)
    }

    /// Substitutes `M = m0` in every entry.
    pub fn eval(&self, m0: &Rational) -> PointConfig {
        PointConfig {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| BigM::constant(x.eval(m0))).collect(),
        }
    }

    /// Parses one point per line; entries separated by whitespace and/or
    /// commas, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TropicalError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("");
            let fields: Vec<&str> =
                content.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            if fields.is_empty() {
                continue;
            }
            let row = fields
                .iter()
                .map(|f| f.parse::<BigM>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| TropicalError::Parse { line: lineno + 1, source })?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

impl fmt::Display for PointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Bipartite graph between point nodes `0..m` and coordinate nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CovectorGraph {
    points: usize,
    coords: usize,
    adjacency: Vec<bool>,
}

impl CovectorGraph {
    pub fn empty(points: usize, coords: usize) -> Self {
        CovectorGraph { points, coords, adjacency: vec![false; points * coords] }
    }

    pub fn from_edges(points: usize, coords: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(points, coords);
        for &(i, j) in edges {
            g.insert(i, j);
        }
        g
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        self.adjacency[i * self.coords + j] = true;
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.coords + j]
    }

    pub fn num_points(&self) -> usize {
        self.points
    }

    pub fn num_coords(&self) -> usize {
        self.coords
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.points)
            .flat_map(move |i| (0..self.coords).map(move |j| (i, j)))
            .filter(move |&(i, j)| self.contains(i, j))
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().filter(|&&b| b).count()
    }

    pub fn is_superset_of(&self, other: &CovectorGraph) -> bool {
        self.points == other.points && self.coords == other.coords && other.edges().all(|(i, j)| self.contains(i, j))
    }

    pub fn point_degree(&self, i: usize) -> usize {
        (0..self.coords).filter(|&j| self.contains(i, j)).count()
    }

    pub fn coord_degree(&self, j: usize) -> usize {
        (0..self.points).filter(|&i| self.contains(i, j)).count()
    }

    /// No node on either side is isolated.
    pub fn covers_all_nodes(&self) -> bool {
        (0..self.points).all(|i| self.point_degree(i) > 0) && (0..self.coords).all(|j| self.coord_degree(j) > 0)
    }
}

impl fmt::Display for CovectorGraph {
    /// Space-separated `i-j` pairs, 1-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges().map(|(i, j)| format!("{}-{}", i + 1, j + 1)).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Edge `(i, j)` is present iff coordinate `j` attains `max_k (v_ik - x_k)`.
pub fn covector_graph_of_point(x: &TorusPoint, config: &PointConfig) -> Result<CovectorGraph, TropicalError> {
    let n = config.dim();
    if x.dim() != n {
        return Err(TropicalError::DimensionMismatch { expected: n, found: x.dim() });
    }
    let mut graph = CovectorGraph::empty(config.num_points(), n);
    for (i, row) in config.rows().enumerate() {
        let shifted: Vec<BigM> = row.iter().zip(x.coords()).map(|(v, c)| v - c).collect();
        let max = shifted.iter().max().expect("n >= 2");
        for (j, s) in shifted.iter().enumerate() {
            if s == max {
                graph.insert(i, j);
            }
        }
    }
    Ok(graph)
}

/// A bound in a difference-constraint matrix; `Infinite` means unconstrained.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Weight {
    Finite(BigM),
    Infinite,
}

impl Weight {
    pub fn finite(&self) -> Option<&BigM> {
        match self {
            Weight::Finite(x) => Some(x),
            Weight::Infinite => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Weight::Finite(_))
    }

    fn plus(&self, other: &Weight) -> Weight {
        match (self, other) {
            (Weight::Finite(a), Weight::Finite(b)) => Weight::Finite(a + b),
            _ => Weight::Infinite,
        }
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Weight::Finite(a), Weight::Finite(b)) => a.cmp(b),
            (Weight::Finite(_), Weight::Infinite) => Ordering::Less,
            (Weight::Infinite, Weight::Finite(_)) => Ordering::Greater,
            (Weight::Infinite, Weight::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Finite(x) => write!(f, "{x}"),
            Weight::Infinite => f.write_str("inf"),
        }
    }
}

/// The set `{ x : x_j - x_k <= bound(j, k) }` in the tropical projective torus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polytrope {
    dim: usize,
    bounds: Vec<Weight>,
}

impl Polytrope {
    pub fn new(bounds: Vec<Vec<Weight>>) -> Self {
        let dim = bounds.len();
        assert!(bounds.iter().all(|r| r.len() == dim), "constraint matrix must be square");
        Polytrope { dim, bounds: bounds.into_iter().flatten().collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self, j: usize, k: usize) -> &Weight {
        &self.bounds[j * self.dim + k]
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds.iter().all(Weight::is_finite)
    }

    /// Exact membership test against every constraint.
    pub fn contains(&self, x: &TorusPoint) -> bool {
        x.dim() == self.dim
            && (0..self.dim).all(|j| {
                (0..self.dim).all(|k| match self.bound(j, k) {
                    Weight::Finite(b) => &(&x[j] - &x[k]) <= b,
                    Weight::Infinite => true,
                })
            })
    }
}

impl fmt::Display for Polytrope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|k| self.bound(j, k).to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Rewrites the cell of `graph` as difference constraints: an edge `(i, j)`
/// forces `x_j - x_k <= v_ij - v_ik` for every `k`.
pub fn polytrope_from_covector_graph(graph: &CovectorGraph, config: &PointConfig) -> Polytrope {
    let n = config.dim();
    let mut bounds = vec![vec![Weight::Infinite; n]; n];
    for (j, row) in bounds.iter_mut().enumerate() {
        row[j] = Weight::Finite(BigM::zero());
    }
    for (i, j) in graph.edges() {
        let v = config.row(i);
        for k in 0..n {
            let candidate = Weight::Finite(&v[j] - &v[k]);
            if candidate < bounds[j][k] {
                bounds[j][k] = candidate;
            }
        }
    }
    Polytrope::new(bounds)
}

/// Floyd-Warshall closure over `(min, +)`. Fails with a negative cycle when
/// the constraints are infeasible.
#[allow(clippy::needless_range_loop)]
pub fn kleene_closure(polytrope: &Polytrope) -> Result<Polytrope, TropicalError> {
    let n = polytrope.dim;
    let mut dist: Vec<Vec<Weight>> = (0..n).map(|j| (0..n).map(|k| polytrope.bound(j, k).clone()).collect()).collect();
    // via[j][k]: intermediate node of the current best j -> k path, if any.
    let mut via: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];

    for j in 0..n {
        if let Weight::Finite(d) = &dist[j][j] {
            if d.is_negative() {
                return Err(TropicalError::Infeasible { cycle: vec![j, j] });
            }
        }
        dist[j][j] = Weight::Finite(BigM::zero());
    }

    for l in 0..n {
        for j in 0..n {
            let through = dist[j][l].plus(&dist[l][j]);
            if through.finite().is_some_and(BigM::is_negative) {
                let mut cycle = vec![j];
                walk(&via, j, l, &mut cycle);
                walk(&via, l, j, &mut cycle);
                return Err(TropicalError::Infeasible { cycle });
            }
        }
        let pivot_row = dist[l].clone();
        let pivot_col: Vec<Weight> = dist.iter().map(|r| r[l].clone()).collect();
        dist.par_iter_mut().zip(via.par_iter_mut()).enumerate().for_each(|(j, (row, via_row))| {
            if !pivot_col[j].is_finite() {
                return;
            }
            for k in 0..n {
                let candidate = pivot_col[j].plus(&pivot_row[k]);
                if candidate < row[k] {
                    row[k] = candidate;
                    via_row[k] = Some(l);
                }
            }
        });
    }
    Ok(Polytrope { dim: n, bounds: dist.into_iter().flatten().collect() })
}

fn walk(via: &[Vec<Option<usize>>], from: usize, to: usize, out: &mut Vec<usize>) {
    match via[from][to] {
        Some(mid) if mid != from && mid != to => {
            walk(via, from, mid, out);
            walk(via, mid, to, out);
        }
        _ => out.push(to),
    }
}

/// The tropical vertices of a polytrope: for each `k`, the maximizer of
/// `n * x_k - sum_j x_j`, read off as the negated `k`-th row of the closed
/// constraint matrix. Duplicates are removed, first occurrence wins.
pub fn tropical_vertices(polytrope: &Polytrope) -> Result<Vec<TorusPoint>, TropicalError> {
    let closed = kleene_closure(polytrope)?;
    let n = closed.dim;
    let mut vertices: Vec<TorusPoint> = Vec::with_capacity(n);
    for k in 0..n {
        let coords: Option<Vec<BigM>> = (0..n).map(|j| closed.bound(k, j).finite().map(|b| -b)).collect();
        // An unbounded direction has no maximizer for this functional.
        let Some(coords) = coords else { continue };
        let point = TorusPoint::new(coords);
        if !vertices.contains(&point) {
            vertices.push(point);
        }
    }
    Ok(vertices)
}
