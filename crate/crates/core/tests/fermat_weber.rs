use lp_oracle::{fw_min, Q};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tropical_supertree::bigm::{int, ratio};
use tropical_supertree::fermat_weber::{config_threshold, optimal_face};
use tropical_supertree::tropical::{covector_graph_of_point, tropical_vertices};
use tropical_supertree::{central_covector_graph, fermat_weber, fw_objective, BigM, PointConfig, TorusPoint};

fn three_points() -> PointConfig {
    PointConfig::parse("2+M -3-M 1\n-6 2 4\n4-M -10-M 6+2*M\n").unwrap()
}

fn random_config(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize, range: i64) -> PointConfig {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(2..=max_n);
    let rows = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-range..=range)).collect()).collect::<Vec<_>>();
    PointConfig::from_ints(&rows).unwrap()
}

fn to_q(config: &PointConfig) -> Vec<Vec<Q>> {
    config.rows().map(|r| r.iter().map(|x| x.constant_part().clone()).collect()).collect()
}

#[test]
fn three_point_median() {
    let result = fermat_weber(&three_points()).unwrap();
    let mut vertices = result.vertices.clone();
    vertices.sort();
    let mut rows = three_points().points();
    rows.sort();
    assert_eq!(vertices, rows);
    assert_eq!(result.median.to_string(), "(0, -11/3-2/3*M, 11/3+2/3*M)");
}

#[test]
fn three_point_against_oracle_at_1000() {
    let m0 = int(1000);
    let numeric = three_points().eval(&m0);
    let (_, value) = fw_min(&to_q(&numeric));
    let median = fermat_weber(&three_points()).unwrap().median.eval(&m0);
    assert_eq!(fw_objective(&median, &numeric).unwrap(), BigM::constant(value));
}

#[test]
fn matches_oracle_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..150 {
        let config = random_config(&mut rng, 4, 4, 9);
        let result = fermat_weber(&config).unwrap();
        let (x, value) = fw_min(&to_q(&config));
        assert_eq!(result.objective, BigM::constant(value), "config:\n{config}");
        let x = TorusPoint::new(x.into_iter().map(BigM::constant).collect());
        assert!(result.polytrope.contains(&x), "oracle optimum outside the cell:\n{config}");
        assert!(result.polytrope.contains(&result.median));
        assert!(result.vertices.len() <= config.dim());
        for v in &result.vertices {
            assert_eq!(fw_objective(v, &config).unwrap(), result.objective);
            let g = covector_graph_of_point(v, &config).unwrap();
            assert!(g.is_superset_of(&result.graph));
            assert!(g.covers_all_nodes());
        }
        assert!(covector_graph_of_point(&result.median, &config).unwrap().covers_all_nodes());
    }
}

#[test]
fn central_graph_matches_relative_interior_point() {
    // The median is in the relative interior of the Fermat-Weber set, so
    // its covector graph is the graph of the cell.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let config = random_config(&mut rng, 3, 3, 6);
        let graph = central_covector_graph(&config);
        let median = fermat_weber(&config).unwrap().median;
        assert_eq!(covector_graph_of_point(&median, &config).unwrap(), graph, "config:\n{config}");
    }
}

#[test]
fn optimal_face_edges_outside_graph_are_excluded_for_a_reason() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let config = random_config(&mut rng, 4, 4, 5);
        let face = optimal_face(&config);
        for i in 0..config.num_points() {
            for j in 0..config.dim() {
                if face.graph.contains(i, j) {
                    continue;
                }
                let tight = face.solution.reduced_cost(&face.instance, i, j).is_zero();
                assert!(!tight || face.tight.contains(&(i, j)));
                if tight {
                    assert!(tropical_supertree::transport::probe_cell(&face.instance, &face.tight, (i, j)).is_none());
                }
            }
        }
    }
}

#[test]
fn symbolic_graph_equals_numeric_graph_past_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let m = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=3);
        let u: Vec<Vec<_>> = (0..m).map(|_| (0..n).map(|_| int(rng.gen_range(-5..=5))).collect()).collect();
        let w: Vec<Vec<_>> = (0..m).map(|_| (0..n).map(|_| int(rng.gen_range(-2..=2))).collect()).collect();
        let config = PointConfig::from_affine(&u, &w).unwrap();
        let threshold = config_threshold(&config).unwrap();
        let symbolic = central_covector_graph(&config);
        for m0 in [&threshold + int(1), &threshold * int(2) + int(7)] {
            assert_eq!(central_covector_graph(&config.eval(&m0)), symbolic);
        }
        let result = fermat_weber(&config).unwrap();
        let m0 = &threshold + ratio(3, 2);
        let numeric = fermat_weber(&config.eval(&m0)).unwrap();
        assert_eq!(result.median.eval(&m0), numeric.median);
    }
}

#[test]
fn segment_vertices_are_extremes() {
    // The ordinary segment from (0,0,0) to (0,0,5) is a polytrope: x_0 = x_1,
    // 0 <= x_2 - x_0 <= 5. Each vertex maximizes n*x_k - sum(x); check
    // against the dense LP.
    use tropical_supertree::tropical::{Polytrope, Weight};
    let w = |x: i64| Weight::Finite(BigM::from_int(x));
    let polytrope = Polytrope::new(vec![vec![w(0), w(0), w(0)], vec![w(0), w(0), w(0)], vec![w(5), w(5), w(0)]]);
    let vertices = tropical_vertices(&polytrope).unwrap();
    let mut sorted = vertices.clone();
    sorted.sort();
    let mut expected = vec![TorusPoint::from_ints(&[0, 0, 0]), TorusPoint::from_ints(&[0, 0, 5])];
    expected.sort();
    assert_eq!(sorted, expected);
    let n = 3;
    for k in 0..n {
        let mut lp = lp_oracle::Lp::new(n);
        for j in 0..n {
            lp.objective[j] = if j == k { lp_oracle::q(1 - n as i64) } else { lp_oracle::q(1) };
            for l in 0..n {
                if let Some(b) = polytrope.bound(j, l).finite() {
                    let mut c = vec![Q::zero(); n];
                    c[j] += lp_oracle::q(1);
                    c[l] -= lp_oracle::q(1);
                    lp.constrain(c, lp_oracle::Relation::Le, b.constant_part().clone());
                }
            }
        }
        let mut pin = vec![Q::zero(); n];
        pin[0] = lp_oracle::q(1);
        lp.constrain(pin, lp_oracle::Relation::Eq, Q::zero());
        let lp_oracle::LpOutcome::Optimal { value, .. } = lp.minimize() else { panic!() };
        let best = vertices
            .iter()
            .map(|v| {
                let s: BigM = v.coords().iter().sum();
                &v[k].scale(&int(n as i64)) - &s
            })
            .max()
            .unwrap();
        assert_eq!(best, BigM::constant(-value));
    }
}

#[test]
fn three_point_graph_is_stable_past_228() {
    let config = three_points();
    assert_eq!(config_threshold(&config).unwrap(), int(228));
    let symbolic = central_covector_graph(&config);
    for m0 in [int(300), int(1_000_000)] {
        assert_eq!(central_covector_graph(&config.eval(&m0)), symbolic);
    }
}
