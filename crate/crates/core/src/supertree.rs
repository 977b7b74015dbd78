//! The tropical supertree method.
//!
//! Every input tree's ultrametric is extended to the combined taxa by
//! setting the distance of any pair the tree does not cover to the big
//! parameter `M`. The extended ultrametrics are points in the space indexed
//! by taxon pairs; their tropical median, shifted so that its largest entry
//! equals the largest input entry, is again an ultrametric and hence a tree.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::bigm::{BigM, Rational};
use crate::fermat_weber::{config_threshold, fermat_weber, FermatWeberResult, FwError};
use crate::phylo::{
    displays_nesting, pair_count, rooted_triplets, tree_to_ultrametric, ultrametric_to_tree, Dissimilarity, PhyloError,
    PhyloTree, Taxon, Triplet, Ultrametric,
};
use crate::tropical::{CovectorGraph, PointConfig, TorusPoint};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SupertreeError {
    #[error("no input trees")]
    NoTrees,
    #[error("tree {index} has fewer than two taxa")]
    TooFewTaxa { index: usize },
    #[error(
        "tree {index} has height {found} but tree 1 has height {expected} (heights must agree; rescaling is available)"
    )]
    HeightMismatch { index: usize, expected: String, found: String },
    #[error("tree {index} cannot be rescaled: height {height} is not a positive number")]
    NotRescalable { index: usize, height: String },
    #[error("tree {index} has taxa that differ from tree 1 (`{taxon}`)")]
    TaxaDiffer { index: usize, taxon: String },
    #[error("taxon `{taxon}` of tree {index} is missing from the output tree")]
    TaxaMismatch { index: usize, taxon: String },
    #[error("numeric M = {m0} is smaller than the input distance {needed}")]
    MTooSmall { m0: String, needed: String },
    #[error("sample M = {sample} does not exceed the stabilization bound {bound}")]
    SampleTooSmall { sample: String, bound: String },
    #[error("tree {index} has symbolic branch lengths; a numeric bound needs numeric trees")]
    SymbolicLengths { index: usize },
    #[error(transparent)]
    Phylo(#[from] PhyloError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl SupertreeError {
    /// Whether the error reflects a broken invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, SupertreeError::Internal(_))
    }
}

impl From<FwError> for SupertreeError {
    fn from(e: FwError) -> Self {
        SupertreeError::Internal(e.to_string())
    }
}

/// Whether `M` stays a symbol or is replaced by a number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Symbolic,
    Numeric(Rational),
}

impl Mode {
    fn fill(&self) -> BigM {
        match self {
            Mode::Symbolic => BigM::m(),
            Mode::Numeric(m0) => BigM::constant(m0.clone()),
        }
    }
}

/// Validated input of the supertree method.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupertreeProblem {
    trees: Vec<PhyloTree>,
    taxa: Vec<Taxon>,
    mode: Mode,
}

impl SupertreeProblem {
    /// With `rescale`, every tree is stretched to the largest input height;
    /// otherwise differing heights are an error.
    pub fn new(trees: Vec<PhyloTree>, mode: Mode, rescale: bool) -> Result<Self, SupertreeError> {
        if trees.is_empty() {
            return Err(SupertreeError::NoTrees);
        }
        let mut trees = match &mode {
            Mode::Symbolic => trees,
            Mode::Numeric(m0) => trees.iter().map(|t| t.eval(m0)).collect(),
        };
        for (k, t) in trees.iter().enumerate() {
            if t.taxa().len() < 2 {
                return Err(SupertreeError::TooFewTaxa { index: k + 1 });
            }
            t.check_equidistant()?;
        }
        let heights: Vec<BigM> = trees.iter().map(PhyloTree::height).collect();
        if rescale {
            for (k, h) in heights.iter().enumerate() {
                if !h.is_numeric() || !h.constant_part().is_positive() {
                    return Err(SupertreeError::NotRescalable { index: k + 1, height: h.to_string() });
                }
            }
            let top = heights.iter().max().expect("nonempty").constant_part().clone();
            trees = trees.iter().zip(&heights).map(|(t, h)| t.scaled(&(&top / h.constant_part()))).collect();
        } else if let Some(k) = heights.iter().position(|h| h != &heights[0]) {
            return Err(SupertreeError::HeightMismatch {
                index: k + 1,
                expected: heights[0].to_string(),
                found: heights[k].to_string(),
            });
        }
        let taxa: Vec<Taxon> = trees.iter().flat_map(PhyloTree::taxa).collect::<BTreeSet<_>>().into_iter().collect();
        if let Mode::Numeric(m0) = &mode {
            let partial = trees.iter().any(|t| t.taxa().len() < taxa.len());
            let needed = heights_max_distance(&trees);
            if partial && BigM::constant(m0.clone()) < needed {
                return Err(SupertreeError::MTooSmall {
                    m0: crate::bigm::format_rational(m0),
                    needed: needed.to_string(),
                });
            }
        }
        Ok(SupertreeProblem { trees, taxa, mode })
    }

    /// Like [`SupertreeProblem::new`], but every tree must have the same taxa.
    pub fn consensus(trees: Vec<PhyloTree>, mode: Mode, rescale: bool) -> Result<Self, SupertreeError> {
        check_same_taxa(&trees)?;
        Self::new(trees, mode, rescale)
    }

    pub fn trees(&self) -> &[PhyloTree] {
        &self.trees
    }

    /// Sorted union of the input taxa.
    pub fn taxa(&self) -> &[Taxon] {
        &self.taxa
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn with_mode(&self, mode: Mode) -> Result<Self, SupertreeError> {
        Self::new(self.trees.clone(), mode, false)
    }

    /// One row per tree: its extended ultrametric in pair order.
    pub fn point_config(&self) -> Result<PointConfig, SupertreeError> {
        let rows = self
            .trees
            .iter()
            .map(|t| extend_ultrametric(t, &self.taxa, &self.mode).map(|u| u.values().to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        PointConfig::new(rows).map_err(|e| SupertreeError::Internal(e.to_string()))
    }
}

fn heights_max_distance(trees: &[PhyloTree]) -> BigM {
    trees.iter().map(|t| t.height().scale(&Rational::from_integer(2.into()))).max().unwrap_or_else(BigM::zero)
}

/// Fails unless all trees have the same taxa.
pub fn check_same_taxa(trees: &[PhyloTree]) -> Result<(), SupertreeError> {
    let Some(first) = trees.first() else { return Err(SupertreeError::NoTrees) };
    let reference: BTreeSet<Taxon> = first.taxa().into_iter().collect();
    for (k, t) in trees.iter().enumerate().skip(1) {
        let other: BTreeSet<Taxon> = t.taxa().into_iter().collect();
        if let Some(taxon) = other.symmetric_difference(&reference).next() {
            return Err(SupertreeError::TaxaDiffer { index: k + 1, taxon: taxon.to_string() });
        }
    }
    Ok(())
}

/// The tree's ultrametric on `taxa`, with `M` (or the numeric value of the
/// mode) for every pair the tree does not cover.
pub fn extend_ultrametric(tree: &PhyloTree, taxa: &[Taxon], mode: &Mode) -> Result<Ultrametric, SupertreeError> {
    let own = tree_to_ultrametric(tree)?;
    let position: Vec<Option<usize>> = taxa.iter().map(|t| own.index_of(t.as_str())).collect();
    let covered = position.iter().filter(|p| p.is_some()).count();
    if covered != own.len() {
        let missing = own.taxa().iter().find(|t| taxa.binary_search(t).is_err()).expect("some taxon is missing");
        return Err(PhyloError::UnknownTaxon(missing.to_string()).into());
    }
    let fill = mode.fill();
    let d = Dissimilarity::from_fn(taxa.to_vec(), |i, j| match (position[i], position[j]) {
        (Some(a), Some(b)) => own.get(a, b).clone(),
        _ => fill.clone(),
    })?;
    Ok(Ultrametric::new(d)?)
}

/// `2^(m + C(n,2) - 1) * sum_k ||D_k||_1 + 1`, with each norm taken over the
/// full symmetric matrix of the tree's own distances.
pub fn safe_numeric_m(trees: &[PhyloTree], n: usize) -> Result<Rational, SupertreeError> {
    if trees.is_empty() {
        return Err(SupertreeError::NoTrees);
    }
    let mut norm = Rational::zero();
    for (k, t) in trees.iter().enumerate() {
        if !t.is_numeric() {
            return Err(SupertreeError::SymbolicLengths { index: k + 1 });
        }
        let d = tree_to_ultrametric(t)?;
        for x in d.values() {
            norm += x.constant_part().abs() * Rational::from_integer(2.into());
        }
    }
    let exponent = (trees.len() + pair_count(n) - 1) as u32;
    let power = Pow::pow(BigInt::from(2), exponent);
    Ok(norm * Rational::from_integer(power) + Rational::one())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupertreeResult {
    pub supertree: PhyloTree,
    pub median: Ultrametric,
    pub config: PointConfig,
    /// Fermat-Weber set, its vertices, covector graph, and objective.
    pub fermat_weber: FermatWeberResult,
    /// Stabilization threshold of the symbolic configuration.
    pub stabilization_threshold: Option<Rational>,
    /// Explicit `M` past which numeric runs match the symbolic one; absent for symbolic inputs.
    pub safe_m: Option<Rational>,
}

impl SupertreeResult {
    pub fn graph(&self) -> &CovectorGraph {
        &self.fermat_weber.graph
    }

    pub fn objective(&self) -> &BigM {
        &self.fermat_weber.objective
    }

    /// Vertices of the Fermat-Weber set, shifted like the median.
    pub fn vertices(&self) -> Vec<Vec<BigM>> {
        let target = config_max(&self.config);
        self.fermat_weber.vertices.iter().map(|v| lift(v, &target)).collect()
    }
}

fn config_max(config: &PointConfig) -> BigM {
    config.rows().flatten().max().cloned().unwrap_or_else(BigM::zero)
}

/// Representative of a torus point whose largest entry is `target`.
fn lift(point: &TorusPoint, target: &BigM) -> Vec<BigM> {
    let top = point.coords().iter().max().cloned().unwrap_or_else(BigM::zero);
    let shift = target - &top;
    point.coords().iter().map(|x| x + &shift).collect()
}

pub fn tropical_supertree(problem: &SupertreeProblem) -> Result<SupertreeResult, SupertreeError> {
    let config = problem.point_config()?;
    let fw = fermat_weber(&config)?;
    let values = lift(&fw.median, &config_max(&config));
    let median = Dissimilarity::new(problem.taxa.clone(), values)?;
    let median = Ultrametric::new(median).map_err(|e| SupertreeError::Internal(format!("median: {e}")))?;
    let supertree = ultrametric_to_tree(&median).map_err(|e| SupertreeError::Internal(e.to_string()))?;
    let check = tree_to_ultrametric(&supertree).map_err(|e| SupertreeError::Internal(e.to_string()))?;
    if check != median {
        return Err(SupertreeError::Internal("supertree does not reproduce the median".into()));
    }
    if let Some(id) = supertree.preorder().into_iter().find(|&id| supertree.node(id).length.is_negative()) {
        return Err(SupertreeError::Internal(format!("negative edge length {}", supertree.node(id).length)));
    }
    let stabilization_threshold = match problem.mode {
        Mode::Symbolic => Some(config_threshold(&config)?),
        Mode::Numeric(_) => None,
    };
    let safe_m = safe_numeric_m(&problem.trees, problem.taxa.len()).ok();
    Ok(SupertreeResult { supertree, median, config, fermat_weber: fw, stabilization_threshold, safe_m })
}

/// A nesting `X < Y`; rooted triplets are the special case `{a, b} < {c}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Nesting {
    Triplet(Triplet),
    Sets { x: Vec<Taxon>, y: Vec<Taxon> },
}

impl Nesting {
    pub fn displayed_by(&self, d: &Dissimilarity) -> Result<bool, PhyloError> {
        match self {
            Nesting::Triplet(t) => displays_nesting(d, &[t.pair.0.as_str(), t.pair.1.as_str()], &[t.outgroup.as_str()]),
            Nesting::Sets { x, y } => displays_nesting(d, x, y),
        }
    }
}

impl fmt::Display for Nesting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nesting::Triplet(t) => write!(f, "{t}"),
            Nesting::Sets { x, y } => {
                let join = |s: &[Taxon]| s.iter().map(Taxon::as_str).collect::<Vec<_>>().join(",");
                write!(f, "{{{}}} < {{{}}}", join(x), join(y))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParetoEntry {
    pub nesting: Nesting,
    pub displayed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParetoReport {
    /// Every nesting common to all inputs, with its status in the output.
    pub entries: Vec<ParetoEntry>,
    /// Requested nestings that some input does not display.
    pub not_common: Vec<Nesting>,
}

impl ParetoReport {
    pub fn failures(&self) -> impl Iterator<Item = &ParetoEntry> {
        self.entries.iter().filter(|e| !e.displayed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

impl fmt::Display for ParetoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{} {}", if e.displayed { "pass" } else { "FAIL" }, e.nesting)?;
        }
        for n in &self.not_common {
            writeln!(f, "skip {n} (not displayed by every input)")?;
        }
        let failed = self.failures().count();
        writeln!(f, "common nestings: {}, failures: {failed}", self.entries.len())
    }
}

/// Checks that `output` displays every rooted triplet, and every requested
/// nesting, displayed by all inputs. Inputs are compared through their
/// ultrametrics extended to the output's taxa with a symbolic `M`.
pub fn pareto_audit(
    inputs: &[PhyloTree],
    output: &PhyloTree,
    nestings: &[(Vec<Taxon>, Vec<Taxon>)],
) -> Result<ParetoReport, SupertreeError> {
    let taxa = output.taxa();
    for (k, t) in inputs.iter().enumerate() {
        if let Some(missing) = t.taxa().into_iter().find(|x| taxa.binary_search(x).is_err()) {
            return Err(SupertreeError::TaxaMismatch { index: k + 1, taxon: missing.to_string() });
        }
    }
    let out = tree_to_ultrametric(output)?;
    let extended =
        inputs.iter().map(|t| extend_ultrametric(t, &taxa, &Mode::Symbolic)).collect::<Result<Vec<_>, _>>()?;
    let mut common: Option<BTreeSet<Triplet>> = None;
    for e in &extended {
        let triplets = rooted_triplets(e);
        common = Some(match common {
            None => triplets,
            Some(c) => c.intersection(&triplets).cloned().collect(),
        });
    }
    let mut report = ParetoReport::default();
    for t in common.unwrap_or_default() {
        let nesting = Nesting::Triplet(t);
        let displayed = nesting.displayed_by(&out)?;
        report.entries.push(ParetoEntry { nesting, displayed });
    }
    for (x, y) in nestings {
        let nesting = Nesting::Sets { x: x.clone(), y: y.clone() };
        let mut everywhere = true;
        for e in &extended {
            everywhere &= nesting.displayed_by(e)?;
        }
        if everywhere {
            let displayed = nesting.displayed_by(&out)?;
            report.entries.push(ParetoEntry { nesting, displayed });
        } else {
            report.not_common.push(nesting);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityRun {
    /// `None` for the symbolic run.
    pub sample: Option<Rational>,
    pub triplets: BTreeSet<Triplet>,
    pub graph: CovectorGraph,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityReport {
    pub bound: Rational,
    /// The symbolic run first, then one per sample in the given order.
    pub runs: Vec<StabilityRun>,
}

impl StabilityReport {
    pub fn identical(&self) -> bool {
        self.runs.windows(2).all(|w| w[0].triplets == w[1].triplets && w[0].graph == w[1].graph)
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bound: {}", crate::bigm::format_rational(&self.bound))?;
        for run in &self.runs {
            let label = run
                .sample
                .as_ref()
                .map_or("symbolic".to_string(), |s| format!("M = {}", crate::bigm::format_rational(s)));
            writeln!(f, "{label}: {} triplets, graph {}", run.triplets.len(), run.graph)?;
        }
        writeln!(f, "identical: {}", self.identical())
    }
}

/// Reruns the pipeline numerically at every sample (each must exceed
/// the explicit safe `M`) and compares topologies with the symbolic run.
pub fn topology_stability_probe(
    problem: &SupertreeProblem,
    samples: &[Rational],
) -> Result<StabilityReport, SupertreeError> {
    let bound = safe_numeric_m(problem.trees(), problem.taxa().len())?;
    if let Some(s) = samples.iter().find(|s| **s <= bound) {
        return Err(SupertreeError::SampleTooSmall {
            sample: crate::bigm::format_rational(s),
            bound: crate::bigm::format_rational(&bound),
        });
    }
    let modes: Vec<Option<Rational>> = std::iter::once(None).chain(samples.iter().cloned().map(Some)).collect();
    let runs = modes
        .par_iter()
        .map(|sample| {
            let mode = sample.clone().map_or(Mode::Symbolic, Mode::Numeric);
            let result = tropical_supertree(&problem.with_mode(mode)?)?;
            Ok(StabilityRun {
                sample: sample.clone(),
                triplets: rooted_triplets(&result.median),
                graph: result.fermat_weber.graph,
            })
        })
        .collect::<Result<Vec<_>, SupertreeError>>()?;
    Ok(StabilityReport { bound, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigm::int;

    fn tree(s: &str) -> PhyloTree {
        PhyloTree::parse_newick(s).unwrap()
    }

    fn names(s: &[&str]) -> Vec<Taxon> {
        s.iter().map(|x| Taxon::new(*x).unwrap()).collect()
    }

    #[test]
    fn extension() {
        let t = tree("(a:1,b:1);");
        let e = extend_ultrametric(&t, &names(&["a", "b", "c"]), &Mode::Symbolic).unwrap();
        assert_eq!(e.values(), &[BigM::from_int(2), BigM::m(), BigM::m()]);
        let e = extend_ultrametric(&t, &names(&["a", "b"]), &Mode::Symbolic).unwrap();
        assert_eq!(e.values(), &[BigM::from_int(2)]);
        let e = extend_ultrametric(&t, &names(&["a", "b", "c"]), &Mode::Numeric(int(50))).unwrap();
        assert_eq!(e.values()[2], BigM::from_int(50));
        assert!(extend_ultrametric(&t, &names(&["a", "c"]), &Mode::Symbolic).is_err());
    }

    #[test]
    fn safe_m_of_a_cherry() {
        assert_eq!(safe_numeric_m(&[tree("(a:1,b:1);")], 2).unwrap(), int(9));
    }

    #[test]
    fn identical_trees() {
        let t = tree("((a:1,b:1):2,(c:2,d:2):1);");
        let problem = SupertreeProblem::new(vec![t.clone(), t.clone(), t.clone()], Mode::Symbolic, false).unwrap();
        let result = tropical_supertree(&problem).unwrap();
        assert_eq!(result.supertree, t);
        assert!(result.objective().is_zero());
    }

    #[test]
    fn validation() {
        let a = tree("(a:1,b:1);");
        let b = tree("(a:2,c:2);");
        assert!(matches!(
            SupertreeProblem::new(vec![a.clone(), b.clone()], Mode::Symbolic, false),
            Err(SupertreeError::HeightMismatch { index: 2, .. })
        ));
        let p = SupertreeProblem::new(vec![a.clone(), b.clone()], Mode::Symbolic, true).unwrap();
        assert_eq!(p.trees()[0].to_newick(), "(a:2,b:2);");
        assert!(matches!(SupertreeProblem::new(vec![], Mode::Symbolic, false), Err(SupertreeError::NoTrees)));
        assert!(matches!(
            SupertreeProblem::consensus(vec![a.clone(), tree("(a:1,c:1);")], Mode::Symbolic, false),
            Err(SupertreeError::TaxaDiffer { index: 2, .. })
        ));
        assert!(matches!(
            SupertreeProblem::new(vec![a, tree("(a:1,c:1);")], Mode::Numeric(int(1)), false),
            Err(SupertreeError::MTooSmall { .. })
        ));
    }

    #[test]
    fn disjoint_cherries() {
        // Each extended input has a single small entry; the median is the
        // all-M star and the inputs share no triplet.
        let p = SupertreeProblem::new(vec![tree("(a:1,b:1);"), tree("(c:1,d:1);")], Mode::Symbolic, false).unwrap();
        let r = tropical_supertree(&p).unwrap();
        assert_eq!(r.supertree.to_newick(), "(a:0+1/2*M,b:0+1/2*M,c:0+1/2*M,d:0+1/2*M);");
        assert_eq!(r.objective(), &BigM::new(int(-4), int(2)));
        let report = pareto_audit(p.trees(), &r.supertree, &[]).unwrap();
        assert!(report.passed());
        assert!(report.entries.is_empty());
    }

    #[test]
    fn overlapping_trees_keep_common_triplets() {
        let p = SupertreeProblem::new(
            vec![tree("((a:1,b:1):2,c:3);"), tree("((a:1,b:1):2,d:3);"), tree("((a:2,b:2):1,(c:1,d:1):2);")],
            Mode::Symbolic,
            false,
        )
        .unwrap();
        let r = tropical_supertree(&p).unwrap();
        let report = pareto_audit(p.trees(), &r.supertree, &[]).unwrap();
        assert!(report.passed(), "{report}");
        assert!(!report.entries.is_empty());
    }

    #[test]
    fn user_nestings() {
        let p = SupertreeProblem::new(vec![tree("((a:1,b:1):1,c:2);")], Mode::Symbolic, false).unwrap();
        let r = tropical_supertree(&p).unwrap();
        let report = pareto_audit(
            p.trees(),
            &r.supertree,
            &[(names(&["a", "b"]), names(&["c"])), (names(&["a", "c"]), names(&["b"]))],
        )
        .unwrap();
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.not_common.len(), 1);
        assert!(report.passed());
        assert!(pareto_audit(&[tree("(a:1,z:1);")], &r.supertree, &[]).is_err());
    }

    #[test]
    fn stability_probe() {
        let p = SupertreeProblem::new(
            vec![tree("((a:1,b:1):1,c:2);"), tree("((b:1,c:1):1,d:2);"), tree("((a:1,d:1):1,b:2);")],
            Mode::Symbolic,
            false,
        )
        .unwrap();
        let bound = safe_numeric_m(p.trees(), 4).unwrap();
        let report = topology_stability_probe(&p, &[&bound + int(1), &bound * int(3)]).unwrap();
        assert_eq!(report.runs.len(), 3);
        assert!(report.identical());
        assert!(matches!(topology_stability_probe(&p, &[bound]), Err(SupertreeError::SampleTooSmall { .. })));
    }
}
