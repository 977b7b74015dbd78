//! Random generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use tropical_supertree::bigm::int;
use tropical_supertree::phylo::{ultrametric_to_tree, Dissimilarity, PhyloTree, Taxon};
use tropical_supertree::BigM;

pub fn taxa(n: usize) -> Vec<Taxon> {
    (0..n).map(|k| Taxon::new(format!("t{k:02}")).unwrap()).collect()
}

/// Random nonempty-step height increment; symbolic steps may carry an `M` term.
fn step<R: Rng>(rng: &mut R, symbolic: bool) -> BigM {
    if symbolic && rng.gen_bool(0.3) {
        BigM::new(int(rng.gen_range(-4..=4)), int(rng.gen_range(1..=2)))
    } else {
        BigM::from_int(rng.gen_range(1..=4))
    }
}

/// A random ultrametric built by agglomerative merges at nondecreasing
/// heights; ties produce multifurcations.
pub fn random_ultrametric<R: Rng>(rng: &mut R, taxa: &[Taxon], symbolic: bool) -> Dissimilarity {
    let n = taxa.len();
    let mut d = vec![vec![BigM::from_int(0); n]; n];
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut h = step(rng, symbolic);
    while clusters.len() > 1 {
        let a = clusters.swap_remove(rng.gen_range(0..clusters.len()));
        let b = clusters.swap_remove(rng.gen_range(0..clusters.len()));
        let value = h.scale(&int(2));
        for &i in &a {
            for &j in &b {
                d[i][j] = value.clone();
                d[j][i] = value.clone();
            }
        }
        clusters.push([a, b].concat());
        if !rng.gen_bool(0.25) {
            h += &step(rng, symbolic);
        }
    }
    Dissimilarity::from_fn(taxa.to_vec(), |i, j| d[i][j].clone()).unwrap()
}

pub fn random_tree<R: Rng>(rng: &mut R, taxa: &[Taxon], symbolic: bool) -> PhyloTree {
    ultrametric_to_tree(&random_ultrametric(rng, taxa, symbolic)).unwrap()
}

/// Random subset of at least `min` taxa, sorted.
pub fn random_subset<R: Rng>(rng: &mut R, taxa: &[Taxon], min: usize) -> Vec<Taxon> {
    let k = rng.gen_range(min..=taxa.len());
    let mut pick: Vec<Taxon> = taxa.choose_multiple(rng, k).cloned().collect();
    pick.sort();
    pick
}

/// Rewrites a tree as Newick with shuffled children, inserted unary nodes,
/// zero-length internal edges, and comments: all features the parser must
/// normalize away.
pub fn noisy_newick<R: Rng>(rng: &mut R, tree: &PhyloTree) -> String {
    fn write<R: Rng>(rng: &mut R, tree: &PhyloTree, id: usize, out: &mut String) {
        let node = tree.node(id);
        let length = node.length.clone();
        let unary = id != tree.root() && rng.gen_bool(0.15);
        if unary {
            out.push('(');
        }
        if node.children.is_empty() {
            out.push_str(node.taxon.as_ref().unwrap().as_str());
        } else {
            let mut kids = node.children.clone();
            kids.shuffle(rng);
            let zero_split = kids.len() > 2 && rng.gen_bool(0.2);
            out.push('(');
            if zero_split {
                out.push('(');
                write(rng, tree, kids[0], out);
                out.push(',');
                write(rng, tree, kids[1], out);
                out.push_str("):0");
                for &k in &kids[2..] {
                    out.push(',');
                    write(rng, tree, k, out);
                }
            } else {
                for (p, &k) in kids.iter().enumerate() {
                    if p > 0 {
                        out.push_str(if rng.gen_bool(0.1) { " , " } else { "," });
                    }
                    write(rng, tree, k, out);
                }
            }
            out.push(')');
            if rng.gen_bool(0.1) {
                out.push_str("[x]");
            }
        }
        if id == tree.root() {
            return;
        }
        if unary {
            let half = length.scale(&tropical_supertree::bigm::ratio(1, 2));
            out.push_str(&format!(":{half}):{}", &length - &half));
        } else {
            out.push_str(&format!(":{length}"));
        }
    }
    let mut out = String::new();
    write(rng, tree, tree.root(), &mut out);
    out.push(';');
    out
}

/// `m` trees of a common height on random subsets of `n` taxa that together
/// cover all of them.
pub fn random_instance<R: Rng>(rng: &mut R, m: usize, n: usize) -> Vec<PhyloTree> {
    random_instance_with(rng, m, n, 2.max(n / 2))
}

/// Like [`random_instance`], with every tree on at least `min` taxa.
pub fn random_instance_with<R: Rng>(rng: &mut R, m: usize, n: usize, min: usize) -> Vec<PhyloTree> {
    let taxa = taxa(n);
    loop {
        let trees: Vec<PhyloTree> = (0..m)
            .map(|_| {
                let sub = random_subset(rng, &taxa, min);
                let t = random_tree(rng, &sub, false);
                let h = t.height();
                t.scaled(&(int(12) / h.constant_part()))
            })
            .collect();
        let covered: BTreeSet<Taxon> = trees.iter().flat_map(PhyloTree::taxa).collect();
        if covered.len() == n {
            return trees;
        }
    }
}

/// `m` trees of height 12 on the same `n` taxa.
pub fn random_same_taxa<R: Rng>(rng: &mut R, m: usize, n: usize) -> Vec<PhyloTree> {
    let taxa = taxa(n);
    (0..m)
        .map(|_| {
            let t = random_tree(rng, &taxa, false);
            let h = t.height();
            t.scaled(&(int(12) / h.constant_part()))
        })
        .collect()
}
