//! Non-overlapping counting quasi-morphisms.
//!
//! `N_w(q, q')` is the largest number of pairwise non-overlapping oriented
//! copies of the segment `w` inside the geodesic `[q, q']`, and
//! `F(α) = N_w(x₀, αx₀) − N_w(αx₀, x₀)`. Two models are provided: the Cayley
//! tree of a free group, where containment is exact subword containment, and
//! explicit finite graphs with a permutation action, where copies may sit in
//! an `ε`-neighbourhood of the geodesic.
//!
//! Copies are non-overlapping when they share at most an endpoint, so on a
//! line the count is a maximum set of interval-disjoint occurrences, which
//! greedy earliest-end selection computes exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::actions::ExplicitAction;
use crate::exact::{ratio, ratio_string};
use crate::words::{Letter, Word, WordError};

/// Certified defect of `F` in quasi-tree models.
pub const QUASI_TREE_DEFECT: u64 = 12;

/// Orbit enumeration cap for explicit models.
const MAX_COPIES: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QmError {
    #[error("segment length {len} does not exceed the threshold {threshold}")]
    SegmentTooShort { len: usize, threshold: usize },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("segment is not an edge path of the graph")]
    NotAPath,
    #[error("orbit of the segment exceeds {0} copies")]
    OrbitTooLarge(usize),
    #[error("empty sample set")]
    NoSamples,
}

/// A real-valued function on a free group, evaluated exactly.
pub trait QuasiMorphism {
    fn rank(&self) -> usize;

    fn value(&self, alpha: &Word) -> i64;

    /// A proven upper bound on the defect, when the model provides one.
    fn certified_defect(&self) -> u64;

    /// The exact homogenization, when the model can compute it.
    fn exact_homogenization(&self, _g: &Word) -> Option<BigRational> {
        None
    }
}

/// Greedy left-to-right count of non-overlapping occurrences of `needle`.
pub fn greedy_count(haystack: &[Letter], needle: &[Letter]) -> usize {
    let n = needle.len();
    if n == 0 || n > haystack.len() {
        return 0;
    }
    let mut count = 0;
    let mut i = 0;
    while i + n <= haystack.len() {
        if &haystack[i..i + n] == needle {
            count += 1;
            i += n;
        } else {
            i += 1;
        }
    }
    count
}

/// `N_w(from, to)` in the Cayley tree: count in the reduced word `from⁻¹·to`.
pub fn count_nonoverlapping(w: &Word, from: &Word, to: &Word) -> Result<usize, QmError> {
    if w.is_empty() {
        return Err(QmError::SegmentTooShort { len: 0, threshold: 0 });
    }
    let path = from.inverse().try_mul(to)?;
    if w.rank() != path.rank() {
        return Err(WordError::RankMismatch { left: w.rank(), right: path.rank() }.into());
    }
    Ok(greedy_count(path.letters(), w.letters()))
}

/// Limit of `N_w(1, cⁿ)/n` for a cyclically reduced, nonempty `c`.
///
/// The greedy scan over the periodic word `c^∞` is determined by the start
/// offset modulo `|c|`, so it is eventually periodic and the slope is exact.
fn periodic_slope(w: &[Letter], c: &[Letter]) -> BigRational {
    let (lc, lw) = (c.len(), w.len());
    let at = |i: usize| c[i % lc];
    let matches: Vec<bool> = (0..lc).map(|s| (0..lw).all(|k| at(s + k) == w[k])).collect();
    if !matches.iter().any(|&m| m) {
        return BigRational::zero();
    }
    // residue of the scan position -> (takes so far, absolute position)
    let mut seen: HashMap<usize, (usize, usize)> = HashMap::new();
    let (mut pos, mut takes) = (0usize, 0usize);
    loop {
        if let Some(&(t0, p0)) = seen.get(&(pos % lc)) {
            let periods = BigInt::from(pos - p0) / BigInt::from(lc);
            return BigRational::new(BigInt::from(takes - t0), periods);
        }
        seen.insert(pos % lc, (takes, pos));
        let mut i = pos;
        while !matches[i % lc] {
            i += 1;
        }
        takes += 1;
        pos = i + lw;
    }
}

/// Counting quasi-morphism on the Cayley tree of a free group.
#[derive(Clone, Debug)]
pub struct TreeCountingQm {
    segment: Word,
    inverse_segment: Word,
    basepoint: Word,
    threshold: usize,
}

impl TreeCountingQm {
    /// Minimum-length threshold used in the tree model. The tree is its own
    /// approximating tree, so the overlap constants vanish and any nonempty
    /// segment is admissible.
    pub const DEFAULT_THRESHOLD: usize = 0;

    pub fn new(segment: Word, basepoint: Word) -> Result<TreeCountingQm, QmError> {
        TreeCountingQm::with_threshold(segment, basepoint, Self::DEFAULT_THRESHOLD)
    }

    pub fn with_threshold(
        segment: Word,
        basepoint: Word,
        threshold: usize,
    ) -> Result<TreeCountingQm, QmError> {
        if segment.len() <= threshold || segment.is_empty() {
            return Err(QmError::SegmentTooShort { len: segment.len(), threshold });
        }
        if segment.rank() != basepoint.rank() {
            return Err(WordError::RankMismatch { left: segment.rank(), right: basepoint.rank() }.into());
        }
        Ok(TreeCountingQm { inverse_segment: segment.inverse(), segment, basepoint, threshold })
    }

    pub fn segment(&self) -> &Word {
        &self.segment
    }

    pub fn basepoint(&self) -> &Word {
        &self.basepoint
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// `N_w(from, to)`.
    pub fn count(&self, from: &Word, to: &Word) -> usize {
        let path = &from.inverse() * to;
        greedy_count(path.letters(), self.segment.letters())
    }

    fn path_from_base(&self, alpha: &Word) -> Word {
        // x₀⁻¹ · α · x₀
        &(&self.basepoint.inverse() * alpha) * &self.basepoint
    }
}

impl QuasiMorphism for TreeCountingQm {
    fn rank(&self) -> usize {
        self.segment.rank()
    }

    fn value(&self, alpha: &Word) -> i64 {
        let p = self.path_from_base(alpha);
        let fwd = greedy_count(p.letters(), self.segment.letters()) as i64;
        let back = greedy_count(p.letters(), self.inverse_segment.letters()) as i64;
        fwd - back
    }

    fn certified_defect(&self) -> u64 {
        QUASI_TREE_DEFECT
    }

    fn exact_homogenization(&self, g: &Word) -> Option<BigRational> {
        let core = self.path_from_base(g).cyclic_decomposition().1;
        if core.is_empty() {
            return Some(BigRational::zero());
        }
        let c = core.letters();
        Some(periodic_slope(self.segment.letters(), c) - periodic_slope(self.inverse_segment.letters(), c))
    }
}

/// Counting quasi-morphism on an explicit finite graph with a group action.
#[derive(Clone, Debug)]
pub struct GraphCountingQm {
    action: Arc<ExplicitAction>,
    segment: Vec<usize>,
    copies: Vec<Vec<usize>>,
    epsilon: u32,
}

impl GraphCountingQm {
    /// `segment` is an edge path starting at the basepoint.
    pub fn new(action: Arc<ExplicitAction>, segment: Vec<usize>, epsilon: u32) -> Result<Self, QmError> {
        if segment.len() < 2 {
            return Err(QmError::SegmentTooShort { len: segment.len().saturating_sub(1), threshold: 0 });
        }
        let g = action.graph();
        if segment.iter().any(|&v| v >= g.vertex_count())
            || segment.windows(2).any(|p| g.distance(p[0], p[1]) != 1)
        {
            return Err(QmError::NotAPath);
        }
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut queue = vec![segment.clone()];
        seen.insert(segment.clone());
        while let Some(p) = queue.pop() {
            for gen in 0..action.rank() {
                for inv in [false, true] {
                    let img: Vec<usize> = p.iter().map(|&v| action.apply_letter(gen + 1, inv, v)).collect();
                    if seen.insert(img.clone()) {
                        if seen.len() > MAX_COPIES {
                            return Err(QmError::OrbitTooLarge(MAX_COPIES));
                        }
                        queue.push(img);
                    }
                }
            }
        }
        let mut copies: Vec<Vec<usize>> = seen.into_iter().collect();
        copies.sort();
        Ok(GraphCountingQm { action, segment, copies, epsilon })
    }

    pub fn basepoint(&self) -> usize {
        self.segment[0]
    }

    pub fn copies(&self) -> &[Vec<usize>] {
        &self.copies
    }

    /// `N_w(from, to)`: copies whose vertices lie within `ε` of the canonical
    /// geodesic, oriented from `from` to `to`, with pairwise disjoint
    /// projected interiors.
    pub fn count(&self, from: usize, to: usize) -> usize {
        let g = self.action.graph();
        let path = g.canonical_geodesic(from, to);
        let eps = self.epsilon;
        let mut intervals: Vec<(usize, usize)> = Vec::new();
        for c in &self.copies {
            let near = |v: usize| -> Option<usize> {
                let mut best: Option<(u32, usize)> = None;
                for (i, &p) in path.iter().enumerate() {
                    let d = g.distance(v, p);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
                best.filter(|&(d, _)| d <= eps).map(|(_, i)| i)
            };
            if c.iter().all(|&v| near(v).is_some()) {
                let (s, e) = (near(c[0]).unwrap(), near(*c.last().unwrap()).unwrap());
                if s < e {
                    intervals.push((s, e));
                }
            }
        }
        intervals.sort_by_key(|&(s, e)| (e, s));
        let mut last_end: Option<usize> = None;
        let mut n = 0;
        for (s, e) in intervals {
            if last_end.is_none_or(|le| s >= le) {
                n += 1;
                last_end = Some(e);
            }
        }
        n
    }

    fn count_bound(&self) -> u64 {
        let d = self.action.graph().diameter() as u64;
        if self.epsilon == 0 {
            d / (self.segment.len() as u64 - 1)
        } else {
            d
        }
    }
}

impl QuasiMorphism for GraphCountingQm {
    fn rank(&self) -> usize {
        self.action.rank()
    }

    fn value(&self, alpha: &Word) -> i64 {
        let x0 = self.basepoint();
        let y = self.action.apply(alpha, x0);
        self.count(x0, y) as i64 - self.count(y, x0) as i64
    }

    /// `|F| ≤ B` where `B` bounds `N_w` on a graph of finite diameter, so the
    /// defect is at most `3B`.
    fn certified_defect(&self) -> u64 {
        3 * self.count_bound()
    }

    fn exact_homogenization(&self, _g: &Word) -> Option<BigRational> {
        // F is bounded on a finite graph.
        Some(BigRational::zero())
    }
}

/// Largest observed `|F(xy) − F(x) − F(y)|`; a lower bound on the defect.
pub fn defect_estimate<Q: QuasiMorphism + ?Sized>(qm: &Q, pairs: &[(Word, Word)]) -> Result<u64, QmError> {
    if pairs.is_empty() {
        return Err(QmError::NoSamples);
    }
    Ok(pairs
        .iter()
        .map(|(x, y)| (qm.value(&(x * y)) - qm.value(x) - qm.value(y)).unsigned_abs())
        .max()
        .unwrap_or(0))
}

/// Closed rational interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RationalInterval {
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub lo: BigRational,
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub hi: BigRational,
}

impl RationalInterval {
    pub fn contains(&self, x: &BigRational) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn scale(&self, k: i64) -> RationalInterval {
        let k = BigRational::from_integer(k.into());
        let (a, b) = (&self.lo * &k, &self.hi * &k);
        if a <= b {
            RationalInterval { lo: a, hi: b }
        } else {
            RationalInterval { lo: b, hi: a }
        }
    }
}

impl fmt::Display for RationalInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", ratio_string(&self.lo), ratio_string(&self.hi))
    }
}

/// Enclosure of `Ĥ(g)` from `|F(gⁿ)/n − Ĥ(g)| ≤ Δ/n` with the certified `Δ`.
pub fn homogenize<Q: QuasiMorphism + ?Sized>(qm: &Q, g: &Word, n_max: usize) -> RationalInterval {
    let n = n_max.max(1) as i64;
    let v = qm.value(&g.pow(n));
    let d = qm.certified_defect() as i64;
    RationalInterval { lo: ratio(v - d, n), hi: ratio(v + d, n) }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BavardOutcome {
    Bound(BigRational),
    /// Zero defect: the function is a homomorphism and Bavard's inequality
    /// does not apply; a nonzero value then obstructs finite scl.
    Homomorphism,
}

/// `|Ĥ(g)| / (2Δ(Ĥ))` for a homogeneous quasi-morphism with defect at most
/// `defect_bound`.
pub fn bavard_bound(hhat_lo: &BigRational, defect_bound: &BigRational) -> BavardOutcome {
    if defect_bound.is_zero() {
        return BavardOutcome::Homomorphism;
    }
    BavardOutcome::Bound(hhat_lo.abs() / (defect_bound * BigRational::from_integer(2.into())))
}

/// Defect of the homogenization of a quasi-morphism with defect `d` is at most `2d`.
pub fn homogenized_defect_bound(d: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(2 * d))
}

#[derive(Clone, Debug, Serialize)]
pub struct QmReport {
    pub segment: String,
    pub threshold: usize,
    pub value_samples: BTreeMap<String, i64>,
    pub defect_observed: u64,
    pub defect_certified: u64,
    pub n_max: usize,
    pub hhat_interval: RationalInterval,
    #[serde(serialize_with = "crate::exact::serialize_opt_ratio")]
    pub hhat_exact: Option<BigRational>,
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub bavard_lower: BigRational,
}

/// Evaluate a tree quasi-morphism on `g`: value, sampled defect, enclosure of
/// `Ĥ(g)` and the Bavard lower bound it certifies.
///
/// The Bavard bound uses the homogenization's defect `2·Δ(F)` and the exact
/// `Ĥ(g)` (lower end of the enclosure when no exact value exists).
pub fn evaluate_report(
    qm: &TreeCountingQm,
    g: &Word,
    n_max: usize,
    defect_pairs: &[(Word, Word)],
) -> QmReport {
    let mut value_samples = BTreeMap::new();
    value_samples.insert(g.to_string(), qm.value(g));
    for k in [2i64, 4, 8] {
        value_samples.insert(format!("{}^{}", g, k), qm.value(&g.pow(k)));
    }
    let defect_observed = defect_estimate(qm, defect_pairs).unwrap_or(0);
    let hhat_interval = homogenize(qm, g, n_max);
    let hhat_exact = qm.exact_homogenization(g);
    let hhat = hhat_exact.clone().unwrap_or_else(|| {
        if hhat_interval.lo.is_positive() {
            hhat_interval.lo.clone()
        } else if hhat_interval.hi.is_negative() {
            hhat_interval.hi.clone()
        } else {
            BigRational::zero()
        }
    });
    let bavard_lower = match bavard_bound(&hhat, &homogenized_defect_bound(qm.certified_defect())) {
        BavardOutcome::Bound(b) => b,
        BavardOutcome::Homomorphism => BigRational::zero(),
    };
    QmReport {
        segment: qm.segment().to_string(),
        threshold: qm.threshold(),
        value_samples,
        defect_observed,
        defect_certified: qm.certified_defect(),
        n_max,
        hhat_interval,
        hhat_exact,
        bavard_lower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse(s, Some(2)).unwrap()
    }

    fn id() -> Word {
        Word::identity(2)
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_nonoverlapping(&w("aa"), &id(), &w("aaaaa")).unwrap(), 2);
        assert_eq!(count_nonoverlapping(&w("ab"), &id(), &w("abab")).unwrap(), 2);
        assert!(count_nonoverlapping(&id(), &id(), &w("a")).is_err());
    }

    #[test]
    fn threshold_enforced() {
        assert_eq!(
            TreeCountingQm::with_threshold(w("ab"), id(), 2).unwrap_err(),
            QmError::SegmentTooShort { len: 2, threshold: 2 }
        );
        assert!(TreeCountingQm::new(id(), id()).is_err());
    }

    #[test]
    fn value_of_identity_is_zero() {
        let qm = TreeCountingQm::new(w("abAB"), id()).unwrap();
        assert_eq!(qm.value(&id()), 0);
    }

    #[test]
    fn defining_element_powers() {
        let g = w("abAB");
        let qm = TreeCountingQm::new(g.clone(), id()).unwrap();
        for k in 1..20 {
            assert!(qm.value(&g.pow(2 * k)) >= k);
        }
    }

    #[test]
    fn letter_count_is_a_homomorphism() {
        let qm = TreeCountingQm::new(w("a"), id()).unwrap();
        let ball = crate::words::ball(2, 3);
        let pairs: Vec<_> = ball.iter().flat_map(|x| ball.iter().map(move |y| (x.clone(), y.clone()))).collect();
        assert_eq!(defect_estimate(&qm, &pairs).unwrap(), 0);
        assert_eq!(defect_estimate(&qm, &[]), Err(QmError::NoSamples));
    }

    #[test]
    fn homogenize_aa_on_a() {
        let qm = TreeCountingQm::new(w("aa"), id()).unwrap();
        let half = ratio(1, 2);
        for n in [1, 7, 100, 1000] {
            assert!(homogenize(&qm, &w("a"), n).contains(&half));
        }
        assert_eq!(qm.exact_homogenization(&w("a")), Some(half));
    }

    #[test]
    fn homogeneity_in_interval_arithmetic() {
        let qm = TreeCountingQm::new(w("abAB"), id()).unwrap();
        let g = w("abABa");
        for m in 1..5 {
            assert_eq!(homogenize(&qm, &g.pow(m), 50), homogenize(&qm, &g, 50 * m as usize).scale(m));
        }
    }

    #[test]
    fn defining_element_lower_end() {
        let g = w("abAB");
        let qm = TreeCountingQm::new(g.clone(), id()).unwrap();
        for n in [10usize, 100, 1000] {
            let iv = homogenize(&qm, &g, n);
            assert!(iv.lo >= ratio(1, 2) - ratio(12, n as i64));
        }
    }

    #[test]
    fn periodic_slope_matches_long_counts() {
        let qm = TreeCountingQm::new(w("aba"), id()).unwrap();
        let g = w("abab");
        // (abab)^n holds ⌊(4n-1)/4⌋·... copies; compare slope against a long power.
        let exact = qm.exact_homogenization(&g).unwrap();
        let n = 4000;
        let approx = ratio(qm.value(&g.pow(n)), n);
        assert!((exact - approx).abs() <= ratio(2, n));
    }

    #[test]
    fn bavard_examples() {
        assert_eq!(bavard_bound(&ratio(1, 2), &ratio(12, 1)), BavardOutcome::Bound(ratio(1, 48)));
        assert_eq!(bavard_bound(&ratio(0, 1), &ratio(12, 1)), BavardOutcome::Bound(ratio(0, 1)));
        assert_eq!(bavard_bound(&ratio(3, 1), &ratio(12, 1)), BavardOutcome::Bound(ratio(1, 8)));
        assert_eq!(bavard_bound(&ratio(3, 1), &ratio(0, 1)), BavardOutcome::Homomorphism);
    }

    #[test]
    fn report_for_commutator() {
        let g = w("abAB");
        let qm = TreeCountingQm::new(g.clone(), id()).unwrap();
        let pairs = vec![(w("ab"), w("AB")), (g.clone(), g.clone())];
        let r = evaluate_report(&qm, &g, 1000, &pairs);
        assert_eq!(r.hhat_exact, Some(ratio(1, 1)));
        assert_eq!(r.bavard_lower, ratio(1, 48));
        assert_eq!(r.hhat_interval.width(), ratio(24, 1000));
    }
}
