mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tropical_supertree::bigm::int;
use tropical_supertree::phylo::{rooted_triplets, tree_to_ultrametric, PhyloTree};
use tropical_supertree::supertree::{
    pareto_audit, safe_numeric_m, topology_stability_probe, tropical_supertree, Mode, SupertreeProblem,
};
use tropical_supertree::BigM;

#[test]
fn random_instances_give_ultrametric_medians_and_pass_pareto() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..60 {
        let m = rng.gen_range(2..=4);
        let n = rng.gen_range(4..=6);
        let trees = common::random_instance(&mut rng, m, n);
        let problem = SupertreeProblem::new(trees.clone(), Mode::Symbolic, false).unwrap();
        let result = tropical_supertree(&problem).unwrap();
        assert_eq!(tree_to_ultrametric(&result.supertree).unwrap(), result.median);
        let report = pareto_audit(&trees, &result.supertree, &[]).unwrap();
        let listing: Vec<String> = trees.iter().map(PhyloTree::to_newick).collect();
        assert!(report.passed(), "{report}\n{}\n{}", listing.join("\n"), result.supertree.to_newick());
    }
}

#[test]
fn symbolic_median_agrees_with_numeric_past_the_safe_m() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.gen_range(4..=5);
        let trees = common::random_instance(&mut rng, 3, n);
        let problem = SupertreeProblem::new(trees.clone(), Mode::Symbolic, false).unwrap();
        let symbolic = tropical_supertree(&problem).unwrap();
        let m0 = safe_numeric_m(&trees, problem.taxa().len()).unwrap() + int(1);
        assert!(m0 > symbolic.stabilization_threshold.clone().unwrap());
        let numeric = tropical_supertree(&problem.with_mode(Mode::Numeric(m0.clone())).unwrap()).unwrap();
        assert_eq!(symbolic.median.eval(&m0), *numeric.median);
        assert_eq!(symbolic.supertree.eval(&m0), numeric.supertree);
    }
}

#[test]
fn permutation_and_renaming_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let mut trees = common::random_instance(&mut rng, 3, 5);
        let base = tropical_supertree(&SupertreeProblem::new(trees.clone(), Mode::Symbolic, false).unwrap()).unwrap();
        trees.shuffle(&mut rng);
        let shuffled =
            tropical_supertree(&SupertreeProblem::new(trees.clone(), Mode::Symbolic, false).unwrap()).unwrap();
        assert_eq!(base.supertree, shuffled.supertree);
        // Renaming t0k -> the reversed order keeps the pair structure but permutes coordinates.
        let rename = |s: &str| -> String {
            let mut out = s.to_string();
            for k in 0..5 {
                out = out.replace(&format!("t{k:02}"), &format!("r{:02}", 4 - k));
            }
            out
        };
        let renamed: Vec<PhyloTree> =
            trees.iter().map(|t| PhyloTree::parse_newick(&rename(&t.to_newick())).unwrap()).collect();
        let result = tropical_supertree(&SupertreeProblem::new(renamed, Mode::Symbolic, false).unwrap()).unwrap();
        let expected = PhyloTree::parse_newick(&rename(&base.supertree.to_newick())).unwrap();
        assert_eq!(result.supertree, expected);
    }
}

#[test]
fn single_tree_is_returned_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let n = rng.gen_range(2..=7);
        let symbolic = rng.gen_bool(0.5);
        let tree = common::random_tree(&mut rng, &common::taxa(n), symbolic);
        let result =
            tropical_supertree(&SupertreeProblem::new(vec![tree.clone()], Mode::Symbolic, false).unwrap()).unwrap();
        assert_eq!(result.supertree, tree);
        assert_eq!(result.objective(), &BigM::from_int(0));
    }
}

#[test]
fn medians_along_the_ray_share_topology() {
    // Two numeric medians past the bound span a segment of the ray; every
    // sampled point on it has the triplets of the symbolic median.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..15 {
        let trees = common::random_instance(&mut rng, 3, 5);
        let problem = SupertreeProblem::new(trees.clone(), Mode::Symbolic, false).unwrap();
        let symbolic = tropical_supertree(&problem).unwrap();
        let bound = safe_numeric_m(&trees, 5).unwrap();
        let report = topology_stability_probe(&problem, &[&bound + int(1), &bound * int(2)]).unwrap();
        assert!(report.identical());
        let (a, b) = (symbolic.median.eval(&(&bound + int(1))), symbolic.median.eval(&(&bound * int(2))));
        for k in 0..=4 {
            let t = tropical_supertree::bigm::ratio(k, 4);
            let point = tropical_supertree::phylo::Dissimilarity::from_fn(a.taxa().to_vec(), |i, j| {
                let (x, y) = (a.get(i, j).constant_part(), b.get(i, j).constant_part());
                BigM::constant(x + (y - x) * &t)
            })
            .unwrap();
            assert_eq!(rooted_triplets(&point), rooted_triplets(&symbolic.median));
        }
    }
}
