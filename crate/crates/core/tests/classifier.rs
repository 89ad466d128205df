use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sclkit::classifier::{
    chi_vector, commutator_witness, homogeneous_value, lower_bound_recipe, partition_classes, qm_dimension,
    random_decomposition, rational_rank, scl_verdict, single, witness_bound, Chain, RandomParams, Verdict,
};
use sclkit::NtDecomposition;

fn decomposition() -> impl Strategy<Value = NtDecomposition> {
    any::<u64>().prop_map(|s| random_decomposition(&mut ChaCha8Rng::seed_from_u64(s), RandomParams::default()))
}

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

fn det(m: &[Vec<BigRational>]) -> BigRational {
    if m.len() == 1 {
        return m[0][0].clone();
    }
    let mut acc = BigRational::zero();
    for j in 0..m.len() {
        let minor: Vec<Vec<BigRational>> =
            m[1..].iter().map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, x)| x.clone()).collect()).collect();
        let t = &m[0][j] * det(&minor);
        acc = if j % 2 == 0 { acc + t } else { acc - t };
    }
    acc
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Largest nonvanishing minor.
fn minor_rank(m: &[Vec<BigRational>]) -> usize {
    let (r, c) = (m.len(), m.first().map_or(0, Vec::len));
    (1..=r.min(c))
        .rev()
        .find(|&k| {
            subsets(r, k).iter().any(|rows| {
                subsets(c, k).iter().any(|cols| {
                    let sub: Vec<Vec<BigRational>> = rows.iter().map(|&i| cols.iter().map(|&j| m[i][j].clone()).collect()).collect();
                    !det(&sub).is_zero()
                })
            })
        })
        .unwrap_or(0)
}

proptest! {
    #[test]
    fn text_round_trip(d in decomposition()) {
        let back = NtDecomposition::parse(&d.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), d.to_text());
        prop_assert_eq!(scl_verdict(&back), scl_verdict(&d));
    }

    #[test]
    fn three_tests_agree(d in decomposition()) {
        let positive = scl_verdict(&d).is_positive();
        prop_assert_eq!(positive, !chi_vector(&d).is_empty());
        prop_assert_eq!(positive, partition_classes(&d).classes.iter().any(|c| !c.inverse_power_sum.is_zero()));
        prop_assert_eq!(positive, lower_bound_recipe(&d).is_some());
    }

    #[test]
    fn zero_verdicts_have_verified_witnesses(d in decomposition()) {
        if !scl_verdict(&d).is_positive() {
            let b = commutator_witness(&d).unwrap();
            prop_assert!(b.witnesses.iter().all(|w| w.verified));
            prop_assert!(b.count <= witness_bound(&d));
            prop_assert!(b.power >= 1);
        } else {
            prop_assert!(commutator_witness(&d).is_err());
        }
    }

    #[test]
    fn inessential_classes_vanish(d in decomposition(), p in -5i64..5, s in 1i64..5) {
        for c in partition_classes(&d).classes {
            let v = homogeneous_value(&c, &q(p, s));
            prop_assert_eq!(v.is_zero(), !c.essential || p == 0);
        }
    }

    #[test]
    fn invariant_under_component_order_and_power(d in decomposition(), seed in any::<u64>(), b in 1i64..5) {
        let mut comps = d.components.clone();
        comps.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = NtDecomposition::new(d.n, comps, d.curves.clone()).unwrap();
        let rep = |d: &NtDecomposition| match scl_verdict(d) {
            Verdict::Positive { class } => Some(class.rep_id),
            Verdict::Zero { .. } => None,
        };
        prop_assert_eq!(rep(&shuffled), rep(&d));
        prop_assert_eq!(chi_vector(&shuffled), chi_vector(&d));
        let powered = NtDecomposition::new(d.n * b, d.components.clone(), d.curves.clone()).unwrap();
        prop_assert_eq!(scl_verdict(&powered).is_positive(), scl_verdict(&d).is_positive());
        for (k, v) in chi_vector(&d) {
            prop_assert_eq!(chi_vector(&powered)[&k].clone() * q(b, 1), v);
        }
    }

    #[test]
    fn dimension_invariant_under_permutation_and_rescaling(seeds in prop::collection::vec(any::<u64>(), 1..6), scales in prop::collection::vec(prop_oneof![-3i64..=-1, 1i64..=3], 6)) {
        let items: Vec<Chain> = seeds.iter().map(|&s| single(&random_decomposition(&mut ChaCha8Rng::seed_from_u64(s), RandomParams::default()))).collect();
        let dim = qm_dimension(&items);
        let mut rev = items.clone();
        rev.reverse();
        prop_assert_eq!(qm_dimension(&rev), dim);
        let scaled: Vec<Chain> = items.iter().zip(&scales).map(|(c, &k)| c.iter().map(|(x, d)| (x * q(k, 1), d.clone())).collect()).collect();
        prop_assert_eq!(qm_dimension(&scaled), dim);
        prop_assert!(dim <= items.len());
    }

    #[test]
    fn rank_matches_minors(rows in prop::collection::vec(prop::collection::vec((-3i64..=3, 1i64..=3), 4), 1..5)) {
        let m: Vec<Vec<BigRational>> = rows.iter().map(|r| r.iter().map(|&(p, s)| q(p, s)).collect()).collect();
        prop_assert_eq!(rational_rank(&m), minor_rank(&m));
    }
}
