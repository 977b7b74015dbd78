use std::collections::BTreeSet;

use num_traits::Zero;

use super::{PhyloError, Taxon};
use crate::bigm::{format_decimal, format_rational, BigM, Rational};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub taxon: Option<Taxon>,
    /// Length of the edge to the parent; zero at the root.
    pub length: BigM,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// A rooted tree with labeled leaves and [`BigM`] edge lengths.
///
/// Trees built by this module are kept in canonical form: no unary nodes, no
/// zero-length internal edges, children ordered by their smallest taxon, and
/// nodes stored in preorder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
    root: NodeId,
}

/// How branch lengths are rendered by [`PhyloTree::to_newick_with`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LengthFormat {
    Symbolic,
    /// Substitute `M = m0` and print exact rationals.
    Numeric(Rational),
    /// Substitute `M = m0` and print decimals with a fixed number of places.
    Decimal(Rational, usize),
    /// Keep `M` symbolic but print both parts as decimals.
    SymbolicDecimal(usize),
}

impl LengthFormat {
    fn render(&self, x: &BigM) -> String {
        match self {
            LengthFormat::Symbolic => x.to_string(),
            LengthFormat::Numeric(m0) => format_rational(&x.eval(m0)),
            LengthFormat::Decimal(m0, places) => format_decimal(&x.eval(m0), *places),
            LengthFormat::SymbolicDecimal(places) => x.to_decimal_string(*places),
        }
    }
}

impl PhyloTree {
    /// Parses one `;`-terminated Newick tree and checks that it is equidistant.
    pub fn parse_newick(text: &str) -> Result<Self, PhyloError> {
        let tree = Self::parse_newick_unchecked(text)?;
        tree.check_equidistant()?;
        Ok(tree.canonical())
    }

    /// Parses without the equidistance check; the result is not canonicalized.
    pub fn parse_newick_unchecked(text: &str) -> Result<Self, PhyloError> {
        Parser { text: text.as_bytes(), pos: 0, nodes: Vec::new(), taxa: BTreeSet::new() }.tree()
    }

    /// Builds a tree from arena parts and canonicalizes it. Each non-root
    /// node's `length` is its edge length; `parent` links are recomputed.
    pub fn from_nodes(mut nodes: Vec<Node>, root: NodeId) -> Result<Self, PhyloError> {
        if nodes.is_empty() {
            return Err(PhyloError::Empty);
        }
        for node in nodes.iter_mut() {
            node.parent = None;
        }
        for id in 0..nodes.len() {
            for c in nodes[id].children.clone() {
                nodes[c].parent = Some(id);
            }
        }
        nodes[root].length = BigM::zero();
        let tree = PhyloTree { nodes, root };
        let mut seen = BTreeSet::new();
        for leaf in tree.leaves() {
            let taxon = tree.nodes[leaf].taxon.clone().ok_or_else(|| PhyloError::InvalidTaxon(String::new()))?;
            if !seen.insert(taxon.clone()) {
                return Err(PhyloError::DuplicateTaxon(taxon.to_string()));
            }
        }
        for id in tree.preorder() {
            if tree.nodes[id].length.is_negative() {
                return Err(PhyloError::NegativeLength {
                    node: tree.describe(id),
                    length: tree.nodes[id].length.to_string(),
                });
            }
        }
        Ok(tree.canonical())
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    pub fn preorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        order
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder().into_iter().filter(|&id| self.is_leaf(id)).collect()
    }

    /// Taxa in sorted order.
    pub fn taxa(&self) -> Vec<Taxon> {
        let mut taxa: Vec<Taxon> = self.leaves().into_iter().filter_map(|id| self.nodes[id].taxon.clone()).collect();
        taxa.sort();
        taxa
    }

    pub fn leaf_of(&self, taxon: &str) -> Option<NodeId> {
        self.leaves().into_iter().find(|&id| self.nodes[id].taxon.as_ref().is_some_and(|t| t.as_str() == taxon))
    }

    /// Distance from the root to every node, indexed by node id.
    pub fn root_distances(&self) -> Vec<BigM> {
        let mut dist = vec![BigM::zero(); self.nodes.len()];
        for id in self.preorder() {
            if let Some(p) = self.nodes[id].parent {
                dist[id] = &dist[p] + &self.nodes[id].length;
            }
        }
        dist
    }

    /// Root-to-leaf distance (for an equidistant tree, any leaf).
    pub fn height(&self) -> BigM {
        let dist = self.root_distances();
        self.leaves().iter().map(|&l| dist[l].clone()).max().unwrap_or_else(BigM::zero)
    }

    /// Fails with the first pair of leaves whose root distances differ.
    pub fn check_equidistant(&self) -> Result<(), PhyloError> {
        let dist = self.root_distances();
        let leaves = self.leaves();
        let first = leaves[0];
        for &leaf in &leaves[1..] {
            if dist[leaf] != dist[first] {
                return Err(PhyloError::NotEquidistant {
                    first: self.describe(first),
                    first_height: dist[first].to_string(),
                    second: self.describe(leaf),
                    second_height: dist[leaf].to_string(),
                });
            }
        }
        Ok(())
    }

    /// Multiplies every edge length by `factor`.
    pub fn scaled(&self, factor: &Rational) -> PhyloTree {
        let mut out = self.clone();
        for node in out.nodes.iter_mut() {
            node.length = node.length.scale(factor);
        }
        out.canonical()
    }

    /// Substitutes `M = m0` in every edge length.
    pub fn eval(&self, m0: &Rational) -> PhyloTree {
        let mut out = self.clone();
        for node in out.nodes.iter_mut() {
            node.length = BigM::constant(node.length.eval(m0));
        }
        out.canonical()
    }

    pub fn is_numeric(&self) -> bool {
        self.nodes.iter().all(|n| n.length.is_numeric())
    }

    /// Canonical form: unary nodes spliced (a unary root is dropped together
    /// with its edge), zero-length internal edges contracted, children sorted
    /// by smallest descendant taxon, nodes renumbered in preorder.
    pub fn canonical(&self) -> PhyloTree {
        let mut built: Vec<(Node, Taxon)> = Vec::new();
        let mut parts = self.expand(self.root, &mut built);
        let root =
            if parts.len() == 1 { parts.pop().expect("one part").0 } else { self.make_internal(parts, &mut built) };
        let arena: Vec<Node> = built.into_iter().map(|(n, _)| n).collect();
        renumber(arena, root)
    }

    /// Canonical subtrees standing in for `id`, each paired with its edge
    /// length measured from `id`'s parent.
    fn expand(&self, id: NodeId, built: &mut Vec<(Node, Taxon)>) -> Vec<(NodeId, BigM)> {
        let node = &self.nodes[id];
        let length = if id == self.root { BigM::zero() } else { node.length.clone() };
        if node.children.is_empty() {
            let taxon = node.taxon.clone().expect("leaves are labeled");
            built.push((
                Node { taxon: Some(taxon.clone()), length: BigM::zero(), parent: None, children: Vec::new() },
                taxon,
            ));
            return vec![(built.len() - 1, length)];
        }
        let kids: Vec<(NodeId, BigM)> = node.children.iter().flat_map(|&c| self.expand(c, built)).collect();
        if id == self.root {
            return kids;
        }
        if kids.len() == 1 {
            let (k, l) = kids.into_iter().next().expect("one kid");
            return vec![(k, &l + &length)];
        }
        if length.is_zero() {
            return kids;
        }
        vec![(self.make_internal(kids, built), length)]
    }

    fn make_internal(&self, mut kids: Vec<(NodeId, BigM)>, built: &mut Vec<(Node, Taxon)>) -> NodeId {
        kids.sort_by(|a, b| built[a.0].1.cmp(&built[b.0].1));
        let min_taxon = built[kids[0].0].1.clone();
        let mut children = Vec::with_capacity(kids.len());
        for (k, l) in kids {
            built[k].0.length = l;
            children.push(k);
        }
        built.push((Node { taxon: None, length: BigM::zero(), parent: None, children }, min_taxon));
        built.len() - 1
    }

    fn describe(&self, id: NodeId) -> String {
        match &self.nodes[id].taxon {
            Some(t) => t.to_string(),
            None => {
                let below = self.leaves_below(id);
                format!("internal node above {}", below.first().map_or("?", |t| t.as_str()))
            }
        }
    }

    fn leaves_below(&self, id: NodeId) -> Vec<Taxon> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            if let Some(t) = &self.nodes[x].taxon {
                if self.nodes[x].children.is_empty() {
                    out.push(t.clone());
                }
            }
            stack.extend(&self.nodes[x].children);
        }
        out.sort();
        out
    }

    pub fn to_newick(&self) -> String {
        self.to_newick_with(&LengthFormat::Symbolic)
    }

    pub fn to_newick_with(&self, format: &LengthFormat) -> String {
        let mut out = String::new();
        self.write_node(self.root, format, &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, id: NodeId, format: &LengthFormat, out: &mut String) {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            out.push_str(node.taxon.as_ref().map_or("", |t| t.as_str()));
        } else {
            out.push('(');
            for (k, &c) in node.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                self.write_node(c, format, out);
            }
            out.push(')');
        }
        if id != self.root {
            out.push(':');
            out.push_str(&format.render(&node.length));
        }
    }
}

fn renumber(arena: Vec<Node>, root: NodeId) -> PhyloTree {
    let mut order = Vec::with_capacity(arena.len());
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        order.push(id);
        stack.extend(arena[id].children.iter().rev());
    }
    let mut new_id = vec![usize::MAX; arena.len()];
    for (k, &old) in order.iter().enumerate() {
        new_id[old] = k;
    }
    let mut nodes: Vec<Node> = order
        .iter()
        .map(|&old| {
            let n = &arena[old];
            Node {
                taxon: n.taxon.clone(),
                length: n.length.clone(),
                parent: None,
                children: n.children.iter().map(|&c| new_id[c]).collect(),
            }
        })
        .collect();
    for id in 0..nodes.len() {
        for c in nodes[id].children.clone() {
            nodes[c].parent = Some(id);
        }
    }
    nodes[0].length = BigM::zero();
    PhyloTree { nodes, root: 0 }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
    taxa: BTreeSet<Taxon>,
}

impl Parser<'_> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T, PhyloError> {
        Err(PhyloError::Syntax { position: self.pos, message: message.into() })
    }

    fn skip_space(&mut self) {
        loop {
            while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            // Bracketed Newick comments.
            if self.peek() == Some(b'[') {
                while self.pos < self.text.len() && self.text[self.pos] != b']' {
                    self.pos += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn tree(mut self) -> Result<PhyloTree, PhyloError> {
        self.skip_space();
        if self.peek().is_none() {
            return Err(PhyloError::Empty);
        }
        let root = self.subtree(true)?;
        self.skip_space();
        if self.peek() != Some(b';') {
            return self.error("expected `;`");
        }
        self.pos += 1;
        self.skip_space();
        if self.pos != self.text.len() {
            return self.error("unexpected text after `;`");
        }
        self.nodes[root].length = BigM::zero();
        Ok(PhyloTree { nodes: self.nodes, root })
    }

    fn subtree(&mut self, is_root: bool) -> Result<NodeId, PhyloError> {
        self.skip_space();
        let id = self.nodes.len();
        self.nodes.push(Node { taxon: None, length: BigM::zero(), parent: None, children: Vec::new() });
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                let child = self.subtree(false)?;
                self.nodes[child].parent = Some(id);
                self.nodes[id].children.push(child);
                self.skip_space();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.error("expected `,` or `)`"),
                }
            }
            self.skip_space();
            // Internal labels carry no meaning here and are dropped.
            let _ = self.label();
        } else {
            let name = self.label();
            if name.is_empty() {
                return self.error("expected a taxon name or `(`");
            }
            let taxon = Taxon::new(name)?;
            if !self.taxa.insert(taxon.clone()) {
                return Err(PhyloError::DuplicateTaxon(taxon.to_string()));
            }
            self.nodes[id].taxon = Some(taxon);
        }
        self.skip_space();
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.skip_space();
            let start = self.pos;
            while self
                .peek()
                .is_some_and(|c| !matches!(c, b',' | b')' | b'(' | b';' | b'[') && !c.is_ascii_whitespace())
            {
                self.pos += 1;
            }
            let literal = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii");
            let length: BigM = literal
                .parse()
                .map_err(|e| PhyloError::Syntax { position: start, message: format!("bad branch length: {e}") })?;
            if length.is_negative() {
                return Err(PhyloError::NegativeLength { node: self.describe(id), length: length.to_string() });
            }
            self.nodes[id].length = length;
        } else if !is_root {
            return Err(PhyloError::MissingLength { position: self.pos, node: self.describe(id) });
        }
        Ok(id)
    }

    fn label(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !matches!(c, b',' | b')' | b'(' | b';' | b':' | b'[') && !c.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.text[start..self.pos]).into_owned()
    }

    fn describe(&self, id: NodeId) -> String {
        match &self.nodes[id].taxon {
            Some(t) => format!("`{t}`"),
            None => "an internal node".to_string(),
        }
    }
}

/// Parses a file of Newick trees, one per `;`. Errors carry the 1-based
/// line on which the offending tree starts.
pub fn parse_forest(text: &str, check_equidistant: bool) -> Result<Vec<PhyloTree>, (usize, PhyloError)> {
    let mut trees = Vec::new();
    let mut start = 0;
    for (k, c) in text.char_indices() {
        if c != ';' {
            continue;
        }
        let chunk = &text[start..=k];
        let lead = chunk.len() - chunk.trim_start().len();
        let line = text[..start + lead].matches('\n').count() + 1;
        let parsed = if check_equidistant {
            PhyloTree::parse_newick(chunk)
        } else {
            PhyloTree::parse_newick_unchecked(chunk).map(|t| t.canonical())
        };
        trees.push(parsed.map_err(|e| (line, e))?);
        start = k + 1;
    }
    let rest = &text[start..];
    if !rest.trim().is_empty() {
        let lead = rest.len() - rest.trim_start().len();
        let line = text[..start + lead].matches('\n').count() + 1;
        return Err((line, PhyloError::Syntax { position: 0, message: "tree is missing its terminating `;`".into() }));
    }
    Ok(trees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigm::{int, ratio};

    #[test]
    fn parses_simple_tree() {
        let t = PhyloTree::parse_newick("((a:1,b:1):1,c:2);").unwrap();
        assert_eq!(t.height(), BigM::from_int(2));
        assert_eq!(t.taxa().iter().map(Taxon::as_str).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(t.to_newick(), "((a:1,b:1):1,c:2);");
    }

    #[test]
    fn canonical_order_and_contraction() {
        let t = PhyloTree::parse_newick(" ( c:2 , (b:1,a:1)x:1 ) root ;").unwrap();
        assert_eq!(t.to_newick(), "((a:1,b:1):1,c:2);");
        // Zero-length internal edge and a unary node.
        let t = PhyloTree::parse_newick("(((a:1,b:1):0,c:1):1,((d:1):1):0);").unwrap();
        assert_eq!(t.to_newick(), "((a:1,b:1,c:1):1,d:2);");
        // Unary root and its edge disappear.
        let t = PhyloTree::parse_newick("((a:1,b:1):3);").unwrap();
        assert_eq!(t.to_newick(), "(a:1,b:1);");
        assert_eq!(t.height(), BigM::from_int(1));
    }

    #[test]
    fn rejects_non_equidistant() {
        match PhyloTree::parse_newick("(a:1,b:2);") {
            Err(PhyloError::NotEquidistant { first, second, first_height, second_height }) => {
                assert_eq!((first.as_str(), second.as_str()), ("a", "b"));
                assert_eq!((first_height.as_str(), second_height.as_str()), ("1", "2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(PhyloTree::parse_newick("(a:1,a:1);"), Err(PhyloError::DuplicateTaxon(t)) if t == "a"));
        assert!(matches!(PhyloTree::parse_newick("(a:1,b);"), Err(PhyloError::MissingLength { .. })));
        assert!(matches!(PhyloTree::parse_newick("(a:1,b:1)"), Err(PhyloError::Syntax { .. })));
        assert!(matches!(PhyloTree::parse_newick("(a:1,b:x);"), Err(PhyloError::Syntax { position: 7, .. })));
        assert!(matches!(PhyloTree::parse_newick("(a:1,b:-1);"), Err(PhyloError::NegativeLength { .. })));
        assert!(matches!(PhyloTree::parse_newick("(a:1,b*c:1);"), Err(PhyloError::InvalidTaxon(_))));
        assert!(matches!(PhyloTree::parse_newick("(a:1,:1);"), Err(PhyloError::Syntax { .. })));
        assert!(matches!(PhyloTree::parse_newick(""), Err(PhyloError::Empty)));
        assert!(matches!(PhyloTree::parse_newick("(a:1,b:1);x"), Err(PhyloError::Syntax { .. })));
    }

    #[test]
    fn symbolic_and_numeric_lengths() {
        let t = PhyloTree::parse_newick("((a:1,b:1):-1+1/2*M,c:1/2*M);").unwrap();
        assert_eq!(t.height(), BigM::new(int(0), ratio(1, 2)));
        assert_eq!(t.to_newick(), "((a:1,b:1):-1+1/2*M,c:0+1/2*M);");
        assert_eq!(t.to_newick_with(&LengthFormat::Numeric(int(10))), "((a:1,b:1):4,c:5);");
        assert_eq!(t.to_newick_with(&LengthFormat::Decimal(int(3), 2)), "((a:1.00,b:1.00):0.50,c:1.50);");
    }

    #[test]
    fn decimal_lengths_and_comments() {
        let t = PhyloTree::parse_newick("[tree 1](a:0.5,b:1/2);").unwrap();
        assert_eq!(t.to_newick(), "(a:1/2,b:1/2);");
    }

    #[test]
    fn forest_reports_lines() {
        let text = "(a:1,b:1);\n((a:1,b:1):1,c:2);\n\n(a:1,b:3);\n";
        let err = parse_forest(text, true).unwrap_err();
        assert_eq!(err.0, 4);
        let trees = parse_forest("(a:1,b:1);\n(c:1,b:1);", true).unwrap();
        assert_eq!(trees.len(), 2);
        assert!(matches!(parse_forest("(a:1,b:1);\n(c:1,b:1)", true), Err((2, _))));
        assert!(parse_forest("(a:1,b:3);", false).is_ok());
    }

    #[test]
    fn scaling() {
        let t = PhyloTree::parse_newick("((a:1,b:1):1,c:2);").unwrap();
        assert_eq!(t.scaled(&ratio(3, 2)).to_newick(), "((a:3/2,b:3/2):3/2,c:3);");
    }
}
