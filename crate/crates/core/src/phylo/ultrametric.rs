use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;

use num_traits::Zero;

use super::tree::{Node, PhyloTree};
use super::{PhyloError, Taxon};
use crate::bigm::{int, BigM, Rational};

/// Number of unordered pairs of `n` taxa.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the pair `{i, j}` (with `i != j`) in lexicographic pair order.
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(j < n && i != j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// A symmetric map on pairs of sorted taxa with zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dissimilarity {
    taxa: Vec<Taxon>,
    values: Vec<BigM>,
    zero: BigM,
}

impl Dissimilarity {
    /// `values` lists the off-diagonal entries in lexicographic pair order.
    pub fn new(taxa: Vec<Taxon>, values: Vec<BigM>) -> Result<Self, PhyloError> {
        for w in taxa.windows(2) {
            if w[0] >= w[1] {
                return Err(PhyloError::UnsortedTaxa(w[1].to_string()));
            }
        }
        if values.len() != pair_count(taxa.len()) {
            return Err(PhyloError::WrongSize { expected: pair_count(taxa.len()), found: values.len() });
        }
        Ok(Dissimilarity { taxa, values, zero: BigM::zero() })
    }

    pub fn from_fn(taxa: Vec<Taxon>, mut f: impl FnMut(usize, usize) -> BigM) -> Result<Self, PhyloError> {
        let n = taxa.len();
        let values = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self::new(taxa, values)
    }

    pub fn taxa(&self) -> &[Taxon] {
        &self.taxa
    }

    pub fn len(&self) -> usize {
        self.taxa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxa.is_empty()
    }

    pub fn index_of(&self, taxon: &str) -> Option<usize> {
        self.taxa.binary_search_by(|t| t.as_str().cmp(taxon)).ok()
    }

    pub fn get(&self, i: usize, j: usize) -> &BigM {
        if i == j {
            &self.zero
        } else {
            &self.values[pair_index(i, j, self.taxa.len())]
        }
    }

    pub fn get_by_name(&self, a: &str, b: &str) -> Result<&BigM, PhyloError> {
        let i = self.index_of(a).ok_or_else(|| PhyloError::UnknownTaxon(a.to_string()))?;
        let j = self.index_of(b).ok_or_else(|| PhyloError::UnknownTaxon(b.to_string()))?;
        Ok(self.get(i, j))
    }

    /// Off-diagonal entries in lexicographic pair order.
    pub fn values(&self) -> &[BigM] {
        &self.values
    }

    pub fn max_value(&self) -> BigM {
        self.values.iter().max().cloned().unwrap_or_else(BigM::zero)
    }

    pub fn is_numeric(&self) -> bool {
        self.values.iter().all(BigM::is_numeric)
    }

    pub fn eval(&self, m0: &Rational) -> Dissimilarity {
        let values = self.values.iter().map(|x| BigM::constant(x.eval(m0))).collect();
        Dissimilarity { taxa: self.taxa.clone(), values, zero: BigM::zero() }
    }

    pub fn scaled(&self, factor: &Rational) -> Dissimilarity {
        let values = self.values.iter().map(|x| x.scale(factor)).collect();
        Dissimilarity { taxa: self.taxa.clone(), values, zero: BigM::zero() }
    }

    /// Restriction to a sorted subset of the taxa.
    pub fn restrict(&self, keep: &[Taxon]) -> Result<Dissimilarity, PhyloError> {
        let idx = keep
            .iter()
            .map(|t| self.index_of(t.as_str()).ok_or_else(|| PhyloError::UnknownTaxon(t.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Dissimilarity::from_fn(keep.to_vec(), |a, b| self.get(idx[a], idx[b]).clone())
    }
}

impl fmt::Display for Dissimilarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.taxa.len();
        for i in 0..n {
            for j in i + 1..n {
                writeln!(f, "{} {} {}", self.taxa[i], self.taxa[j], self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// Why a dissimilarity fails to be an ultrametric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UltrametricViolation {
    Negative {
        a: Taxon,
        b: Taxon,
        value: String,
    },
    /// `D(a, c) > max(D(a, b), D(b, c))`.
    Triangle {
        a: Taxon,
        b: Taxon,
        c: Taxon,
    },
}

impl fmt::Display for UltrametricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UltrametricViolation::Negative { a, b, value } => write!(f, "D({a}, {b}) = {value} is negative"),
            UltrametricViolation::Triangle { a, b, c } => {
                write!(f, "D({a}, {c}) exceeds max(D({a}, {b}), D({b}, {c}))")
            }
        }
    }
}

/// Exact check of nonnegativity and `D(i,k) <= max(D(i,j), D(j,k))`.
pub fn is_ultrametric(d: &Dissimilarity) -> Result<(), UltrametricViolation> {
    let n = d.len();
    for i in 0..n {
        for j in i + 1..n {
            if d.get(i, j).is_negative() {
                return Err(UltrametricViolation::Negative {
                    a: d.taxa[i].clone(),
                    b: d.taxa[j].clone(),
                    value: d.get(i, j).to_string(),
                });
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (ij, ik, jk) = (d.get(i, j), d.get(i, k), d.get(j, k));
                let witness = if ik > ij.max(jk) {
                    Some((i, j, k))
                } else if ij > ik.max(jk) {
                    Some((i, k, j))
                } else if jk > ij.max(ik) {
                    Some((j, i, k))
                } else {
                    None
                };
                if let Some((a, b, c)) = witness {
                    return Err(UltrametricViolation::Triangle {
                        a: d.taxa[a].clone(),
                        b: d.taxa[b].clone(),
                        c: d.taxa[c].clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// A dissimilarity that passed [`is_ultrametric`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ultrametric(Dissimilarity);

impl Ultrametric {
    pub fn new(d: Dissimilarity) -> Result<Self, PhyloError> {
        is_ultrametric(&d).map_err(|v| PhyloError::NotUltrametric(Box::new(v)))?;
        Ok(Ultrametric(d))
    }

    pub fn into_inner(self) -> Dissimilarity {
        self.0
    }
}

impl Deref for Ultrametric {
    type Target = Dissimilarity;

    fn deref(&self) -> &Dissimilarity {
        &self.0
    }
}

impl fmt::Display for Ultrametric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Leaf-to-leaf path lengths of an equidistant tree.
pub fn tree_to_ultrametric(tree: &PhyloTree) -> Result<Ultrametric, PhyloError> {
    tree.check_equidistant()?;
    let taxa = tree.taxa();
    let n = taxa.len();
    let mut values = vec![BigM::zero(); pair_count(n)];
    let depth = tree.root_distances();
    let height = tree.height();
    // Leaf sets per node, built bottom-up over a reversed preorder.
    let mut below: Vec<Vec<usize>> = vec![Vec::new(); tree.len()];
    for id in tree.preorder().into_iter().rev() {
        let node = tree.node(id);
        if node.children.is_empty() {
            let taxon = node.taxon.as_ref().expect("leaves are labeled");
            below[id].push(taxa.binary_search(taxon).expect("taxon listed"));
            continue;
        }
        // Two leaves meeting here are 2 * (height - depth) apart.
        let span = (&height - &depth[id]).scale(&int(2));
        let mut acc: Vec<usize> = Vec::new();
        for &c in &node.children {
            let part = std::mem::take(&mut below[c]);
            for &a in &acc {
                for &b in &part {
                    values[pair_index(a, b, n)] = span.clone();
                }
            }
            acc.extend(part);
        }
        below[id] = acc;
    }
    Ultrametric::new(Dissimilarity::new(taxa, values)?)
}

/// Single-linkage reconstruction: clusters merge at each distinct value `d`,
/// under a new node at height `d / 2`.
pub fn ultrametric_to_tree(d: &Dissimilarity) -> Result<PhyloTree, PhyloError> {
    is_ultrametric(d).map_err(|v| PhyloError::NotUltrametric(Box::new(v)))?;
    let n = d.len();
    if n == 0 {
        return Err(PhyloError::Empty);
    }
    let mut nodes: Vec<Node> = d
        .taxa()
        .iter()
        .map(|t| Node { taxon: Some(t.clone()), length: BigM::zero(), parent: None, children: Vec::new() })
        .collect();
    let mut node_height = vec![BigM::zero(); n];
    // cluster[i]: current top node of taxon i's cluster.
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut levels: BTreeMap<&BigM, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            levels.entry(d.get(i, j)).or_default().push((i, j));
        }
    }
    let half = Rational::new(1.into(), 2.into());
    for (value, pairs) in levels {
        // In an ultrametric, "D <= value" is an equivalence; its classes
        // restricted to changed clusters are the merges at this level.
        let mut link: BTreeMap<usize, usize> = BTreeMap::new();
        fn find(link: &mut BTreeMap<usize, usize>, x: usize) -> usize {
            let p = *link.entry(x).or_insert(x);
            if p == x {
                return x;
            }
            let r = find(link, p);
            link.insert(x, r);
            r
        }
        for (i, j) in pairs {
            let (a, b) = (find(&mut link, cluster[i]), find(&mut link, cluster[j]));
            if a != b {
                link.insert(a.max(b), a.min(b));
            }
        }
        let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for c in link.keys().copied().collect::<Vec<_>>() {
            let r = find(&mut link, c);
            groups.entry(r).or_default().insert(c);
        }
        groups.retain(|_, members| members.len() > 1);
        let h = value.scale(&half);
        for members in groups.into_values() {
            let id = nodes.len();
            for &c in &members {
                nodes[c].length = &h - &node_height[c];
                nodes[c].parent = Some(id);
            }
            nodes.push(Node {
                taxon: None,
                length: BigM::zero(),
                parent: None,
                children: members.iter().copied().collect(),
            });
            node_height.push(h.clone());
            for top in cluster.iter_mut() {
                if members.contains(top) {
                    *top = id;
                }
            }
        }
    }
    let root = cluster[0];
    PhyloTree::from_nodes(nodes, root)
}

/// A rooted triplet `ab|c`: `a` and `b` are closer to each other than to `c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    /// Sorted.
    pub pair: (Taxon, Taxon),
    pub outgroup: Taxon,
}

impl Triplet {
    pub fn new(a: Taxon, b: Taxon, outgroup: Taxon) -> Self {
        let pair = if a <= b { (a, b) } else { (b, a) };
        Triplet { pair, outgroup }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}|{}", self.pair.0, self.pair.1, self.outgroup)
    }
}

/// All resolved triples: `ij|k` whenever `D(i,j)` is strictly the smallest of
/// the three distances.
pub fn rooted_triplets(d: &Dissimilarity) -> BTreeSet<Triplet> {
    let n = d.len();
    let t = d.taxa();
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (ij, ik, jk) = (d.get(i, j), d.get(i, k), d.get(j, k));
                if ij < ik && ij < jk {
                    out.insert(Triplet::new(t[i].clone(), t[j].clone(), t[k].clone()));
                } else if ik < ij && ik < jk {
                    out.insert(Triplet::new(t[i].clone(), t[k].clone(), t[j].clone()));
                } else if jk < ij && jk < ik {
                    out.insert(Triplet::new(t[j].clone(), t[k].clone(), t[i].clone()));
                }
            }
        }
    }
    out
}

/// Whether `max over pairs in X` is strictly below `max over pairs in X ∪ Y`.
/// The maximum over no pairs is zero.
pub fn displays_nesting<S: AsRef<str>>(d: &Dissimilarity, x: &[S], y: &[S]) -> Result<bool, PhyloError> {
    let index = |s: &S| d.index_of(s.as_ref()).ok_or_else(|| PhyloError::UnknownTaxon(s.as_ref().to_string()));
    let xs: BTreeSet<usize> = x.iter().map(index).collect::<Result<_, _>>()?;
    let mut all = xs.clone();
    for s in y {
        all.insert(index(s)?);
    }
    let max_over = |set: &BTreeSet<usize>| {
        let v: Vec<usize> = set.iter().copied().collect();
        let mut best = BigM::zero();
        for (p, &a) in v.iter().enumerate() {
            for &b in &v[p + 1..] {
                best = best.max(d.get(a, b).clone());
            }
        }
        best
    };
    Ok(max_over(&xs) < max_over(&all))
}
