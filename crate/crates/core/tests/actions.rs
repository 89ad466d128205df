use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use sclkit::actions::{
    build_projection_family, classify_isometry, default_k, projection_diameter, projection_test, promote_to_quasitree,
    quasi_axis, scl_pipeline, stable_window, tree_distance, wwpd_xi, Budgets, Projection,
};
use sclkit::words::{commutator, scl_upper};
use sclkit::{Backend, ExplicitAction, FiniteMetricGraph, Isometry, QuasiAxis, Word};

fn word(rank: usize, min_len: usize, max_len: usize) -> impl Strategy<Value = Word> {
    let r = rank as i32;
    prop::collection::vec(prop_oneof![1..=r, -r..=-1], min_len..=max_len)
        .prop_map(move |raw| Word::from_signed(rank, &raw).unwrap())
}

fn hyperbolic(rank: usize, max_len: usize) -> impl Strategy<Value = Word> {
    word(rank, 1, max_len).prop_filter("hyperbolic", |w| w.translation_length() > 0)
}

/// Nearest-point position by scanning the axis, least index on ties.
fn nearest_position(axis: &QuasiAxis, v: &Word, span: i64) -> i64 {
    (-span..=span).min_by_key(|&i| (tree_distance(v, &axis.vertex(i)), i)).unwrap()
}

/// Diameter of the image of every vertex of `b` at positions `[-w, w]`.
fn brute_diameter(a: &QuasiAxis, b: &QuasiAxis, w: i64) -> i64 {
    let span = 4 * w + 4 * tree_distance(&a.x0, &b.x0) as i64 + 8;
    let ps: Vec<i64> = (-w..=w).map(|i| nearest_position(a, &b.vertex(i), span)).collect();
    ps.iter().max().unwrap() - ps.iter().min().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_matches_brute_force(g in hyperbolic(2, 5), gamma in word(2, 0, 3), w in 1usize..12) {
        let b = Backend::CayleyTree { rank: 2 };
        let a = quasi_axis(&b, &g).unwrap();
        let t = a.translate(&gamma);
        prop_assert_eq!(projection_diameter(&a, &t, w), brute_diameter(&a, &t, w as i64));
    }

    #[test]
    fn projection_is_equivariant_and_symmetric(g in hyperbolic(2, 5), gamma in word(2, 0, 3), h in word(2, 0, 4)) {
        let b = Backend::CayleyTree { rank: 2 };
        let a = quasi_axis(&b, &g).unwrap();
        let t = a.translate(&gamma);
        let w = stable_window(&a, &t);
        prop_assert_eq!(projection_diameter(&a.translate(&h), &t.translate(&h), w), projection_diameter(&a, &t, w));
        match (projection_test(&a, &t, 0), projection_test(&t, &a, 0)) {
            (Projection::Bounded(x), Projection::Bounded(y)) => prop_assert_eq!(x, y),
            (Projection::Parallel { .. }, Projection::Parallel { .. }) => {}
            other => prop_assert!(false, "asymmetric: {:?}", other),
        }
    }

    #[test]
    fn axis_laws(g in hyperbolic(3, 10), v in word(3, 0, 6), i in -30i64..30, n in 1i64..5) {
        let a = quasi_axis(&Backend::CayleyTree { rank: 3 }, &g).unwrap();
        prop_assert_eq!(a.project(&a.vertex(i)), i);
        prop_assert_eq!(a.distance_to(&a.vertex(i)), 0);
        prop_assert_eq!(tree_distance(&a.x0, &(&g.pow(n) * &a.x0)), n as usize * a.d);
        prop_assert!(tree_distance(&v, &(&g * &v)) >= a.d);
        prop_assert_eq!(a.translate(&g).line_key(), a.line_key());
        prop_assert_eq!(quasi_axis(&Backend::CayleyTree { rank: 3 }, &g.inverse()).unwrap().line_key(), a.line_key());
    }

    #[test]
    fn xi_below_translation_length(g in hyperbolic(2, 6)) {
        let r = wwpd_xi(&Backend::CayleyTree { rank: 2 }, &g, 2).unwrap();
        prop_assert!(r.xi < r.tau as i64);
        prop_assert!(!r.parallel.is_empty());
    }

    #[test]
    fn pipeline_lower_bound_below_upper(x in word(2, 1, 2), y in word(2, 1, 2)) {
        let g = commutator(&x, &y).unwrap();
        prop_assume!(!g.is_identity());
        let budgets = Budgets { promote: false, n_max: 200, ..Budgets::default() };
        let rep = scl_pipeline(&Backend::CayleyTree { rank: 2 }, &g, &budgets).unwrap();
        let lower = rep.lower_bound.unwrap();
        prop_assert!(lower >= BigRational::zero());
        let upper = scl_upper(&g, 2, 1, 2).unwrap().unwrap();
        prop_assert!(lower <= upper);
    }
}

#[test]
fn promoted_family_is_connected_and_small() {
    let b = Backend::CayleyTree { rank: 2 };
    for s in ["ab", "abAB", "aab"] {
        let g = Word::parse(s, Some(2)).unwrap();
        let fam = build_projection_family(&b, &g, 2, None).unwrap();
        assert!(fam.least_eta() <= fam.eta);
        let pg = promote_to_quasitree(&fam, default_k(fam.eta)).unwrap();
        assert!(pg.graph.bottleneck_constant() as i64 <= fam.eta + pg.k, "{s}");
    }
}

#[test]
fn non_commutator_has_no_lower_bound() {
    let g = Word::parse("aab", Some(2)).unwrap();
    let rep = scl_pipeline(&Backend::CayleyTree { rank: 2 }, &g, &Budgets { promote: false, ..Budgets::default() }).unwrap();
    assert!(rep.lower_bound.is_none());
}

#[test]
fn finite_action_is_elliptic() {
    // two rotations of a 6-cycle
    let c = FiniteMetricGraph::cycle(6);
    let rot = |k: usize| (0..6).map(|i| (i + k) % 6).collect::<Vec<_>>();
    let action = Arc::new(ExplicitAction::new(c, vec![rot(1), rot(2)]).unwrap());
    let b = Backend::Explicit(action);
    let g = Word::parse("abAB", Some(2)).unwrap();
    assert!(matches!(classify_isometry(&b, &g, 16).unwrap(), Isometry::Elliptic { .. }));
    let rep = scl_pipeline(&b, &g, &Budgets::default()).unwrap();
    assert_eq!(rep.lower_bound, Some(BigRational::zero()));
    assert!(rep.elliptic_power_bound.is_some());
}
