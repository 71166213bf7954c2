mod common;

use patternlab::graph::{gen_er, Graph};
use patternlab::patterns::{refine_patterns, PatternId};
use patternlab::rng::RngStream;

use common::{all_graphs, brute_pattern, brute_patterns, recolour, Bijection};

fn audit(graphs: &[Graph], d: usize, ids: &mut Bijection<(usize, PatternId), String>) {
    for g in graphs {
        let (r, _) = refine_patterns(g, d);
        let brute = brute_patterns(g, d);
        for t in 0..=d {
            for v in 0..g.num_nodes() {
                ids.observe((t, r.at_depth(t)[v]), brute[t][v].clone());
            }
        }
    }
}

#[test]
fn path_on_four_nodes() {
    let g = Graph::uniform(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let (r, _) = refine_patterns(&g, 2);
    let ids = r.deepest();
    assert_eq!(ids[0], ids[3]);
    assert_eq!(ids[1], ids[2]);
    assert_ne!(ids[0], ids[1]);
    for (u, v) in [(0, 3), (1, 2), (0, 1)] {
        assert_eq!(ids[u] == ids[v], brute_pattern(&g, u, 2) == brute_pattern(&g, v, 2));
    }
}

#[test]
fn memoised_oracle_matches_plain_recursion() {
    let mut rng = RngStream::new(3, 0);
    let g = recolour(&gen_er(9, 0.4, &mut rng).unwrap(), 2, &mut rng);
    let memo = brute_patterns(&g, 3);
    for v in 0..9 {
        assert_eq!(memo[3][v], brute_pattern(&g, v, 3));
    }
}

#[test]
fn every_graph_up_to_five_nodes() {
    let mut ids = Bijection::new();
    for n in 1..=5 {
        audit(&all_graphs(n), 3, &mut ids);
    }
    assert_eq!(ids.mismatches, 0);
    assert!(ids.classes() > 50);
}

#[test]
fn sampled_coloured_graphs() {
    let mut rng = RngStream::new(4, 0);
    let graphs: Vec<Graph> = (0..200)
        .map(|i| {
            let n = 7 + i % 2;
            recolour(&gen_er(n, 0.2 + 0.5 * rng.next_f64(), &mut rng).unwrap(), 2, &mut rng)
        })
        .collect();
    let mut ids = Bijection::new();
    audit(&graphs, 3, &mut ids);
    assert_eq!(ids.mismatches, 0);
}
