//! Exact parametric tropical Fermat-Weber points and the tropical supertree
//! method built on them.
//!
//! Every computation runs over [`bigm::BigM`], affine polynomials in a
//! formal parameter `M` ordered by their eventual value, so results are the
//! ones that hold for all sufficiently large `M`. Plain numbers are the
//! special case with slope zero.

pub mod bigm;
pub mod fermat_weber;
pub mod phylo;
pub mod supertree;
pub mod transport;
pub mod tropical;

pub use bigm::{BigM, Rational};
pub use fermat_weber::{
    central_covector_graph, fermat_weber, fw_objective, stabilization_threshold, FermatWeberResult,
};
pub use tropical::{CovectorGraph, PointConfig, Polytrope, TorusPoint};
