use std::collections::VecDeque;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sclkit::hypgraph::{random_quasi_tree, QuasiTreeParams};
use sclkit::FiniteMetricGraph;

fn bfs(adj: &[Vec<usize>], s: usize, removed: &[bool]) -> Vec<Option<u32>> {
    let mut d = vec![None; adj.len()];
    if removed[s] {
        return d;
    }
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if !removed[v] && d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

fn adjacency(g: &FiniteMetricGraph) -> Vec<Vec<usize>> {
    (0..g.vertex_count()).map(|v| g.neighbors(v).to_vec()).collect()
}

fn all_distances(g: &FiniteMetricGraph) -> Vec<Vec<u32>> {
    let adj = adjacency(g);
    let none = vec![false; adj.len()];
    (0..adj.len()).map(|s| bfs(&adj, s, &none).into_iter().map(Option::unwrap).collect()).collect()
}

/// Twice the four-point δ over every quadruple of the whole graph.
fn four_point_oracle(g: &FiniteMetricGraph) -> u32 {
    let d = all_distances(g);
    let n = d.len();
    let mut best = 0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let mut s = [d[x][y] + d[z][w], d[x][z] + d[y][w], d[x][w] + d[y][z]];
                    s.sort_unstable();
                    best = best.max(s[2] - s[1]);
                }
            }
        }
    }
    best
}

/// Least `t` such that every canonical geodesic triangle is `t`-slim.
fn slim_triangles(g: &FiniteMetricGraph) -> u32 {
    let d = all_distances(g);
    let n = d.len();
    let near = |p: usize, side: &[usize]| side.iter().map(|&q| d[p][q]).min().unwrap();
    let mut best = 0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let (a, b, c) = (g.canonical_geodesic(x, y), g.canonical_geodesic(y, z), g.canonical_geodesic(z, x));
                for p in &a {
                    best = best.max(near(*p, &b).min(near(*p, &c)));
                }
            }
        }
    }
    best
}

/// The bottleneck property for `delta`, checked pair by pair with a fresh BFS.
fn bottleneck_holds(g: &FiniteMetricGraph, delta: u32) -> bool {
    let adj = adjacency(g);
    let d = all_distances(g);
    let n = adj.len();
    for x in 0..n {
        for y in x + 1..n {
            for &v in &g.canonical_geodesic(x, y) {
                if d[v][x] <= delta || d[v][y] <= delta {
                    continue;
                }
                let removed: Vec<bool> = (0..n).map(|u| d[v][u] <= delta).collect();
                if bfs(&adj, x, &removed)[y].is_some() {
                    return false;
                }
            }
        }
    }
    true
}

fn bottleneck_oracle(g: &FiniteMetricGraph) -> u32 {
    (0..).find(|&k| bottleneck_holds(g, k)).unwrap()
}

fn small_quasi_tree() -> impl Strategy<Value = FiniteMetricGraph> {
    (6usize..22, 1usize..4, 0usize..5, 2usize..5, any::<u64>()).prop_map(|(n, locality, chords, span, seed)| {
        random_quasi_tree(QuasiTreeParams { n, locality, chords, span }, &mut ChaCha8Rng::seed_from_u64(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_matches_whole_graph_scan(g in small_quasi_tree()) {
        let h = g.hyperbolicity_delta();
        prop_assert!(h.exact);
        prop_assert_eq!(h.twice, four_point_oracle(&g));
    }

    #[test]
    fn four_point_and_slim_triangles_agree_up_to_constants(g in small_quasi_tree()) {
        // δ_4pt ≤ 2·δ_slim and δ_slim ≤ 4·δ_4pt + 1 (integer-rounded standard comparisons)
        let twice = g.hyperbolicity_delta().twice;
        let slim = slim_triangles(&g);
        prop_assert!(twice <= 4 * slim + 2);
        prop_assert!(slim <= 2 * twice + 1);
    }

    #[test]
    fn bottleneck_matches_direct_separation(g in small_quasi_tree()) {
        prop_assert_eq!(g.bottleneck_constant(), bottleneck_oracle(&g));
    }

    #[test]
    fn trees_have_zero_constants(n in 2usize..40, locality in 1usize..5, seed in any::<u64>()) {
        let g = random_quasi_tree(QuasiTreeParams { n, locality, chords: 0, span: 0 }, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(g.is_tree());
        prop_assert_eq!(g.hyperbolicity_delta().twice, 0);
        prop_assert!(g.bottleneck_constant() <= 1);
        prop_assert!(bottleneck_oracle(&g) <= 1);
    }

    #[test]
    fn manning_tree_on_quasi_trees(n in 60usize..300, chords in 0usize..20, span in 2usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_quasi_tree(QuasiTreeParams { n, locality: 2, chords, span }, &mut rng);
        let tq = g.manning_tree(None, 0).unwrap();
        prop_assert!(tq.tree.is_tree());
        prop_assert_eq!(tq.alpha.len(), n);
        prop_assert!(g.check_manning_inequalities(&tq).is_ok());
        // each representative lies in its own component
        for (c, &r) in tq.reps.iter().enumerate() {
            prop_assert_eq!(tq.alpha[r], c);
        }
        // geodesics in a tree map to within 0 of the tree geodesic
        if g.is_tree() {
            let path = g.canonical_geodesic(0, n - 1);
            prop_assert_eq!(g.quasigeodesic_image_check(&tq, &path, 2, 10).unwrap(), 0);
        }
    }
}

#[test]
fn cycle_bottlenecks_match_oracle() {
    for n in [8, 12, 16] {
        let c = FiniteMetricGraph::cycle(n);
        assert_eq!(c.bottleneck_constant(), bottleneck_oracle(&c), "C{n}");
    }
}

#[test]
fn cycle_delta_matches_oracle() {
    let c = FiniteMetricGraph::cycle(12);
    assert_eq!(c.hyperbolicity_delta().twice, four_point_oracle(&c));
}

#[test]
fn zigzag_on_path_has_small_epsilon() {
    let g = FiniteMetricGraph::path(100);
    let tq = g.manning_tree(Some(1), 0).unwrap();
    let mut path: Vec<usize> = (0..=40).collect();
    path.extend((38..=40).rev());
    path.extend(39..=100);
    path.dedup();
    let e = g.quasigeodesic_image_check(&tq, &path, 2, 10).unwrap();
    assert!(e <= 1);
}
