//! Fermat-Weber sets for the asymmetric tropical distance.
//!
//! The set of minimizers of `x -> sum_v dd(x, v)` is the central covector
//! cell of the configuration. Its covector graph is the union of supports of
//! all optimal solutions of the barycentric maximization transportation
//! problem; the cell itself is the polytrope cut out by that graph.

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::bigm::{BigM, Rational};
use crate::transport::{probe_cell, solve, TransportSolution, TransportationInstance};
use crate::tropical::{
    asym_distance_raw, kleene_closure, polytrope_from_covector_graph, tropical_vertices, CovectorGraph, PointConfig,
    Polytrope, TorusPoint, TropicalError,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FwError {
    #[error(transparent)]
    Tropical(#[from] TropicalError),
    #[error("slope matrix entry ({row}, {col}) = {value} is not an integer")]
    NonIntegralSlope { row: usize, col: usize, value: String },
    /// A state that contradicts the theory (e.g. an empty Fermat-Weber set).
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// `sum_v dd(x, v)` over the rows of the configuration.
pub fn fw_objective(x: &TorusPoint, config: &PointConfig) -> Result<BigM, TropicalError> {
    if x.dim() != config.dim() {
        return Err(TropicalError::DimensionMismatch { expected: config.dim(), found: x.dim() });
    }
    config.rows().map(|v| asym_distance_raw(x.coords(), v)).sum()
}

/// The optimal face of the barycentric transportation problem.
#[derive(Clone, Debug)]
pub struct OptimalFace {
    pub instance: TransportationInstance,
    pub solution: TransportSolution,
    /// Cells of zero reduced cost under `solution`'s potentials.
    pub tight: Vec<(usize, usize)>,
    pub graph: CovectorGraph,
    /// For every edge of `graph`, an optimal flow that uses it.
    pub witnesses: Vec<((usize, usize), Vec<i64>)>,
}

pub fn optimal_face(config: &PointConfig) -> OptimalFace {
    let instance = TransportationInstance::barycentric(config);
    let solution = solve(&instance);
    let tight = solution.tight_cells(&instance);
    let probes: Vec<Option<Vec<i64>>> = tight.par_iter().map(|&cell| probe_cell(&instance, &tight, cell)).collect();
    let mut graph = CovectorGraph::empty(config.num_points(), config.dim());
    let mut witnesses = Vec::new();
    for (&cell, probe) in tight.iter().zip(probes) {
        if let Some(flow) = probe {
            graph.insert(cell.0, cell.1);
            witnesses.push((cell, flow));
        }
    }
    OptimalFace { instance, solution, tight, graph, witnesses }
}

/// Covector graph of the central cell, i.e. of the Fermat-Weber set.
pub fn central_covector_graph(config: &PointConfig) -> CovectorGraph {
    optimal_face(config).graph
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FermatWeberResult {
    pub graph: CovectorGraph,
    /// Closed constraint matrix of the Fermat-Weber set.
    pub polytrope: Polytrope,
    /// Distinct tropical vertices, in coordinate order of their functional.
    pub vertices: Vec<TorusPoint>,
    /// Ordinary average of the distinct vertices.
    pub median: TorusPoint,
    pub objective: BigM,
}

pub fn fermat_weber(config: &PointConfig) -> Result<FermatWeberResult, FwError> {
    let face = optimal_face(config);
    let internal = |e: TropicalError| FwError::Internal(format!("central cell: {e}"));
    let polytrope = kleene_closure(&polytrope_from_covector_graph(&face.graph, config)).map_err(internal)?;
    if !polytrope.is_bounded() {
        return Err(FwError::Internal("central cell is unbounded".into()));
    }
    let vertices = tropical_vertices(&polytrope).map_err(internal)?;
    if vertices.is_empty() {
        return Err(FwError::Internal("central cell has no vertices".into()));
    }
    let median = TorusPoint::average(&vertices);
    let objective = fw_objective(&median, config)?;

    // Strong duality: min sum_v dd(x, v) = max transport value - sum of all entries.
    let total: BigM = config.rows().flatten().sum();
    if objective != &face.solution.objective - &total {
        return Err(FwError::Internal(format!(
            "median objective {objective} disagrees with transportation optimum {}",
            &face.solution.objective - &total
        )));
    }
    Ok(FermatWeberResult { graph: face.graph, polytrope, vertices, median, objective })
}

/// `binom(m + n - 2, m - 1) * ||U||_1`, beyond which the covector
/// decomposition of `U + M * W` no longer changes. Requires integral `W`.
pub fn stabilization_threshold(u: &[Vec<Rational>], w: &[Vec<Rational>]) -> Result<Rational, FwError> {
    for (i, row) in w.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if !x.is_integer() {
                return Err(FwError::NonIntegralSlope { row: i, col: j, value: crate::bigm::format_rational(x) });
            }
        }
    }
    let m = u.len();
    let n = u.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Ok(Rational::zero());
    }
    let norm: Rational = u.iter().flatten().map(Signed::abs).sum();
    let count = binomial(BigInt::from(m + n - 2), BigInt::from(m - 1));
    Ok(norm * Rational::from_integer(count))
}

/// Threshold of a configuration, split into constant and slope parts.
pub fn config_threshold(config: &PointConfig) -> Result<Rational, FwError> {
    let (u, w) = config.split();
    stabilization_threshold(&u, &w)
}
