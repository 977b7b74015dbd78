//! Phylogenetic data: taxa, equidistant trees in Newick form, ultrametrics,
//! rooted triplets, and nestings.

mod tree;
mod ultrametric;

use std::fmt;

use thiserror::Error;

pub use tree::{parse_forest, LengthFormat, Node, NodeId, PhyloTree};
pub use ultrametric::{
    displays_nesting, is_ultrametric, pair_count, pair_index, rooted_triplets, tree_to_ultrametric,
    ultrametric_to_tree, Dissimilarity, Triplet, Ultrametric, UltrametricViolation,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PhyloError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("invalid taxon name `{0}` (allowed: letters, digits, `_`, `.`, `-`)")]
    InvalidTaxon(String),
    #[error("duplicate taxon `{0}`")]
    DuplicateTaxon(String),
    #[error("missing branch length for {node} at byte {position}")]
    MissingLength { position: usize, node: String },
    #[error("negative branch length {length} above {node}")]
    NegativeLength { node: String, length: String },
    #[error("tree is not equidistant: root-to-leaf distance of `{first}` is {first_height} but of `{second}` is {second_height}")]
    NotEquidistant { first: String, first_height: String, second: String, second_height: String },
    #[error("empty tree")]
    Empty,
    #[error("taxa must be sorted and unique; offending taxon `{0}`")]
    UnsortedTaxa(String),
    #[error("expected {expected} pair values, found {found}")]
    WrongSize { expected: usize, found: usize },
    #[error("unknown taxon `{0}`")]
    UnknownTaxon(String),
    #[error("not an ultrametric: {0}")]
    NotUltrametric(Box<UltrametricViolation>),
}

/// A leaf label. Names are nonempty and use `[A-Za-z0-9_.-]`; taxa order
/// lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Taxon(String);

impl Taxon {
    pub fn new(name: impl Into<String>) -> Result<Self, PhyloError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')) {
            return Err(PhyloError::InvalidTaxon(name));
        }
        Ok(Taxon(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Taxon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Taxon {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
