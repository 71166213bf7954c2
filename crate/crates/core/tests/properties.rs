mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use patternlab::experiments::{raw_ssl_labels, size_split, SslStandardizer};
use patternlab::gnn::{GnnArch, GnnModel, Readout, MAIN_HEAD};
use patternlab::graph::{gen_er, gen_pa, Graph};
use patternlab::neural::{mlp_forward, Activation, DenseLayer, DenseParams, Matrix};
use patternlab::patterns::{
    pattern_tree_descriptors, refine_patterns, tv_distance, unrolled_tree, worst_case_set,
    PatternHistogram, PatternId,
};
use patternlab::rng::RngStream;

use common::{random_graph, recolour};

fn node_model(depth: usize, width: usize, input: usize, act: Activation, rng: &mut RngStream) -> GnnModel {
    let mut arch = GnnArch::standard(input, depth, width, Readout::Sum);
    arch.activation = act;
    let mut m = GnnModel::init(&arch, rng).unwrap();
    m.add_head("node", Readout::None, &[width], 2, act, rng).unwrap();
    m
}

const ACTS: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Sigmoid];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn equal_patterns_get_equal_outputs(seed in any::<u64>(), depth in 1usize..=3, family in 0usize..3, n in 4usize..30) {
        let mut rng = RngStream::new(seed, 0);
        let g = random_graph(family, n, &mut rng);
        let m = node_model(depth, 6, 1, ACTS[seed as usize % 3], &mut rng);
        let out = m.forward(&g, "node").unwrap();
        let (r, _) = refine_patterns(&g, depth);
        let mut seen: BTreeMap<PatternId, usize> = BTreeMap::new();
        for (v, id) in r.deepest().iter().enumerate() {
            let u = *seen.entry(*id).or_insert(v);
            for c in 0..2 {
                prop_assert!((out[(u, c)] - out[(v, c)]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn outputs_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = RngStream::new(seed, 1);
        let g = recolour(&gen_er(n, 0.3, &mut rng).unwrap(), 2, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let h = g.permuted(&perm).unwrap();
        let m = node_model(2, 5, 2, Activation::Tanh, &mut rng);
        let (a, b) = (m.forward(&g, "node").unwrap(), m.forward(&h, "node").unwrap());
        // Node v of g is node perm[v] of h.
        for v in 0..n {
            for c in 0..2 {
                prop_assert!((a[(v, c)] - b[(perm[v], c)]).abs() < 1e-9);
            }
        }
        let (ga, gb) = (m.forward(&g, MAIN_HEAD).unwrap(), m.forward(&h, MAIN_HEAD).unwrap());
        prop_assert!((ga[(0, 0)] - gb[(0, 0)]).abs() < 1e-9 * ga[(0, 0)].abs().max(1.0));
        // Pattern ids follow the relabelling too.
        let (ra, _) = refine_patterns(&g, 2);
        let (rb, _) = refine_patterns(&h, 2);
        for v in 0..n {
            prop_assert_eq!(ra.deepest()[v], rb.deepest()[perm[v]]);
        }
    }

    #[test]
    fn sum_readout_is_additive_on_disjoint_unions(seed in any::<u64>(), n1 in 1usize..15, n2 in 1usize..15) {
        let mut rng = RngStream::new(seed, 2);
        let g1 = gen_er(n1, 0.4, &mut rng).unwrap();
        let g2 = gen_er(n2, 0.4, &mut rng).unwrap();
        let mut arch = GnnArch::standard(1, 2, 5, Readout::Sum);
        arch.head_hidden = vec![];
        let mut m = GnnModel::init(&arch, &mut rng).unwrap();
        m.head_mut(MAIN_HEAD).unwrap().mlp.layers_mut()[0].bias[0] = 0.0;
        let f = |g: &Graph| m.forward(g, MAIN_HEAD).unwrap()[(0, 0)];
        let joint = f(&g1.disjoint_union(&g2).unwrap());
        prop_assert!((joint - f(&g1) - f(&g2)).abs() < 1e-9 * joint.abs().max(1.0));
    }

    #[test]
    fn refinement_is_monotone(seed in any::<u64>(), n in 2usize..25, family in 0usize..3) {
        let mut rng = RngStream::new(seed, 3);
        let g = recolour(&random_graph(family, n, &mut rng), 2, &mut rng);
        let (r, _) = refine_patterns(&g, 4);
        for t in 0..4 {
            let (coarse, fine) = (r.partition(t), r.partition(t + 1));
            for u in 0..g.num_nodes() {
                for v in 0..g.num_nodes() {
                    if fine[u] == fine[v] {
                        prop_assert_eq!(coarse[u], coarse[v]);
                    }
                }
            }
        }
    }

    #[test]
    fn descriptors_match_unrolled_trees_and_patterns(seed in any::<u64>(), n in 1usize..12, d in 0usize..=3) {
        let mut rng = RngStream::new(seed, 4);
        let g = recolour(&gen_er(n, 0.35, &mut rng).unwrap(), 2, &mut rng);
        let descs = pattern_tree_descriptors(&g, d);
        let (r, _) = refine_patterns(&g, d);
        for v in 0..n {
            prop_assert_eq!(&unrolled_tree(&g, v, d).unwrap().descriptor(2), &descs[v]);
            for u in 0..v {
                if r.deepest()[u] == r.deepest()[v] {
                    prop_assert_eq!(&descs[u], &descs[v]);
                }
            }
        }
    }

    #[test]
    fn tv_is_a_metric(a in prop::collection::vec(0.0f64..1.0, 1..8),
                      b in prop::collection::vec(0.0f64..1.0, 1..8),
                      c in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let hist = |w: &[f64]| -> Option<PatternHistogram> {
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return None;
            }
            PatternHistogram::from_masses(1, w.iter().enumerate().map(|(i, x)| (PatternId::from_parts(1, i as u128), x / total))).ok()
        };
        if let (Some(ha), Some(hb), Some(hc)) = (hist(&a), hist(&b), hist(&c)) {
            let ab = tv_distance(&ha, &hb).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            prop_assert!((ab - tv_distance(&hb, &ha).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= tv_distance(&ha, &hc).unwrap() + tv_distance(&hc, &hb).unwrap() + 1e-12);
            prop_assert!(tv_distance(&ha, &ha).unwrap() < 1e-12);
        }
    }

    #[test]
    fn worst_case_matches_enumeration(train in prop::collection::vec(0.01f64..1.0, 1..=10),
                                      test in prop::collection::vec(0.0f64..1.0, 1..=10),
                                      eps in 0.01f64..0.9) {
        let norm = |w: &[f64], offset: u128| {
            let total: f64 = w.iter().sum();
            w.iter().enumerate().map(move |(i, x)| (PatternId::from_parts(1, offset + i as u128), x / total)).collect::<Vec<_>>()
        };
        let ht = PatternHistogram::from_masses(1, norm(&train, 0)).unwrap();
        // Test patterns overlap the train support and add a few unseen ones.
        let hs = match PatternHistogram::from_masses(1, norm(&test, 3)) { Ok(h) => h, Err(_) => return Ok(()) };
        let w = worst_case_set(&ht, &hs, eps).unwrap();
        prop_assert!(w.train_mass < eps);
        let ids: Vec<PatternId> = ht.masses().keys().chain(hs.masses().keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << ids.len()) {
            let chosen = ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, id)| id);
            let cost = ht.mass_of(chosen.clone());
            if cost < eps - 1e-9 {
                best = best.max(hs.mass_of(chosen));
            }
        }
        prop_assert!((w.delta - best).abs() < 1e-6, "dp {} vs enumeration {}", w.delta, best);
    }

    #[test]
    fn relu_nets_without_bias_are_homogeneous(seed in any::<u64>(), alpha in 0.01f64..10.0) {
        let mut rng = RngStream::new(seed, 5);
        let mut layer = |i: usize, o: usize, act| {
            let w = Matrix::from_vec(o, i, (0..i * o).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            DenseLayer::new(w, vec![0.0; o], act).unwrap()
        };
        let net = DenseParams::new(3, vec![layer(3, 5, Activation::Relu), layer(5, 2, Activation::Identity)]).unwrap();
        let x = [0.3, -1.2, 2.0];
        let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let (a, b) = (mlp_forward(&net, &x).unwrap(), mlp_forward(&net, &scaled).unwrap());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((q - alpha * p).abs() < 1e-9 * q.abs().max(1.0));
        }
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), n in 5usize..40, m in 1usize..4) {
        let a = gen_pa(n.max(m + 1), m, &mut RngStream::new(seed, 9)).unwrap();
        let b = gen_pa(n.max(m + 1), m, &mut RngStream::new(seed, 9)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.degrees().iter().sum::<usize>(), 2 * a.num_edges());
        for v in m + 1..a.num_nodes() {
            prop_assert!(a.degree(v).unwrap() >= m);
        }
    }

    #[test]
    fn size_split_has_no_leakage(seed in any::<u64>(), sizes in prop::collection::vec(1usize..60, 10..80)) {
        let s = size_split(&sizes, &mut RngStream::new(seed, 6)).unwrap();
        let again = size_split(&sizes, &mut RngStream::new(seed, 6)).unwrap();
        prop_assert_eq!(&s, &again);
        let n = sizes.len();
        prop_assert_eq!(s.train.len() + s.val.len(), n / 2);
        prop_assert_eq!(s.test.len(), n / 10);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), s.train.len() + s.val.len() + s.test.len());
        let max_small = s.train.iter().chain(&s.val).map(|&i| sizes[i]).max().unwrap();
        let min_test = s.test.iter().map(|&i| sizes[i]).min().unwrap_or(usize::MAX);
        prop_assert!(max_small <= min_test);
    }

    #[test]
    fn ssl_standardisation_uses_train_statistics(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = RngStream::new(seed, 7);
        let train: Vec<Graph> = (0..4).map(|_| gen_er(8 + rng.below(5), 0.4, &mut rng).unwrap()).collect();
        let test: Vec<Graph> = (0..2).map(|_| gen_er(20, 0.4, &mut rng).unwrap()).collect();
        let st = SslStandardizer::fit(train.iter(), d, true).unwrap();
        let before: Vec<Matrix> = train.iter().map(|g| st.apply(&raw_ssl_labels(g, d).unwrap()).unwrap()).collect();
        for g in &test {
            st.apply(&raw_ssl_labels(g, d).unwrap()).unwrap();
        }
        let refit = SslStandardizer::fit(train.iter(), d, true).unwrap();
        for (g, b) in train.iter().zip(&before) {
            let raw = raw_ssl_labels(g, d).unwrap();
            prop_assert_eq!(&refit.apply(&raw).unwrap(), b);
            let back = st.invert(b).unwrap();
            for (col_kept, &c) in st.kept_columns().iter().enumerate() {
                for v in 0..raw.rows() {
                    prop_assert!((back[(v, c)] - raw[(v, c)]).abs() < 1e-9 * raw[(v, c)].abs().max(1.0), "col {}", col_kept);
                }
            }
        }
    }
}
