//! Free-group actions on graphs: the Cayley tree with left multiplication
//! and explicit finite graphs with generator automorphisms.
//!
//! Hyperbolic isometries only occur on the tree backend, where axes,
//! projections and overlaps are computed exactly from words.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::counting::{evaluate_report, GraphCountingQm, QmReport, QuasiMorphism, TreeCountingQm};
use crate::exact::int;
use crate::hypgraph::{FiniteMetricGraph, GraphError};
use crate::words::{ball, Letter, Word, WordError};

/// Counting threshold `M` used by the pipeline on tree backends.
pub const PIPELINE_THRESHOLD: i64 = 1;
/// Largest power tried when making the translation length exceed `ξ + M`.
pub const MAX_POWER: i64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("generator {generator} is not a permutation of the vertices")]
    NotABijection { generator: usize },
    #[error("generator {generator} maps edge ({u}, {w}) to a non-edge")]
    NotAnAutomorphism { generator: usize, u: usize, w: usize },
    #[error("an explicit action needs at least one generator")]
    NoGenerators,
    #[error("element has rank {got}, backend has rank {expected}")]
    RankMismatch { expected: usize, got: usize },
    #[error("n_max must be at least 4")]
    NMaxTooSmall,
    #[error("{0} is elliptic")]
    Elliptic(String),
    #[error("axes live on different backends")]
    BackendMismatch,
    #[error("axiom 1 fails on members ({a}, {b}, {c}): values {values:?} with eta {eta}")]
    AxiomViolation { a: usize, b: usize, c: usize, values: [i64; 3], eta: i64 },
    #[error("promoted graph is disconnected for K = {k}")]
    PromotionDisconnected { k: i64 },
    #[error("no power N <= {MAX_POWER} with N*tau >= {needed}")]
    NoPower { needed: i64 },
    #[error("malformed projection data: {0}")]
    BadFamily(String),
}

/// Error from one stage of the scl pipeline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("pipeline stage `{stage}` failed: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub source: ActionError,
}

fn at(stage: &'static str) -> impl Fn(ActionError) -> PipelineError {
    move |source| PipelineError { stage, source }
}

/// A finite graph with one automorphism per generator.
#[derive(Clone, Debug)]
pub struct ExplicitAction {
    graph: FiniteMetricGraph,
    forward: Vec<Vec<usize>>,
    backward: Vec<Vec<usize>>,
}

impl ExplicitAction {
    pub fn new(graph: FiniteMetricGraph, gens: Vec<Vec<usize>>) -> Result<ExplicitAction, ActionError> {
        if gens.is_empty() {
            return Err(ActionError::NoGenerators);
        }
        if gens.len() > 26 {
            return Err(WordError::BadRank(gens.len()).into());
        }
        let n = graph.vertex_count();
        let mut backward = Vec::with_capacity(gens.len());
        for (i, p) in gens.iter().enumerate() {
            let mut inv = vec![usize::MAX; n];
            if p.len() != n {
                return Err(ActionError::NotABijection { generator: i + 1 });
            }
            for (v, &img) in p.iter().enumerate() {
                if img >= n || inv[img] != usize::MAX {
                    return Err(ActionError::NotABijection { generator: i + 1 });
                }
                inv[img] = v;
            }
            for (u, w) in graph.edges() {
                if graph.distance(p[u], p[w]) != 1 {
                    return Err(ActionError::NotAnAutomorphism { generator: i + 1, u, w });
                }
            }
            backward.push(inv);
        }
        Ok(ExplicitAction { graph, forward: gens, backward })
    }

    pub fn graph(&self) -> &FiniteMetricGraph {
        &self.graph
    }

    pub fn rank(&self) -> usize {
        self.forward.len()
    }

    /// Image of `v` under generator `gen` (1-based) or its inverse.
    pub fn apply_letter(&self, gen: usize, inverse: bool, v: usize) -> usize {
        if inverse {
            self.backward[gen - 1][v]
        } else {
            self.forward[gen - 1][v]
        }
    }

    /// Left action: the rightmost letter acts first.
    pub fn apply(&self, w: &Word, v: usize) -> usize {
        w.letters().iter().rev().fold(v, |x, l| self.apply_letter(l.generator(), l.is_inverse(), x))
    }
}

#[derive(Clone, Debug)]
pub enum Backend {
    CayleyTree { rank: usize },
    Explicit(Arc<ExplicitAction>),
}

impl Backend {
    pub fn rank(&self) -> usize {
        match self {
            Backend::CayleyTree { rank } => *rank,
            Backend::Explicit(a) => a.rank(),
        }
    }

    fn check(&self, g: &Word) -> Result<(), ActionError> {
        if g.rank() != self.rank() {
            return Err(ActionError::RankMismatch { expected: self.rank(), got: g.rank() });
        }
        Ok(())
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::CayleyTree { rank } => write!(f, "cayley:{rank}"),
            Backend::Explicit(a) => write!(f, "explicit(n={}, rank={})", a.graph().vertex_count(), a.rank()),
        }
    }
}

pub fn tree_distance(u: &Word, v: &Word) -> usize {
    (&u.inverse() * v).len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Isometry {
    Elliptic { orbit_diameter: u32 },
    Hyperbolic {
        #[serde(serialize_with = "crate::exact::serialize_ratio")]
        tau: BigRational,
    },
    /// Displacements that neither stabilize nor grow linearly within budget.
    Inconclusive { displacements: Vec<u32> },
}

pub fn classify_isometry(backend: &Backend, g: &Word, n_max: usize) -> Result<Isometry, ActionError> {
    if n_max < 4 {
        return Err(ActionError::NMaxTooSmall);
    }
    backend.check(g)?;
    match backend {
        Backend::CayleyTree { .. } => {
            let (u, c) = g.cyclic_decomposition();
            if c.is_empty() {
                return Ok(Isometry::Elliptic { orbit_diameter: 0 });
            }
            // with x₀ = u the displacement of gⁿ is exactly n·|c|
            let n = n_max as i64;
            let d = tree_distance(&u, &(&g.pow(n) * &u)) as i64;
            Ok(Isometry::Hyperbolic { tau: crate::exact::ratio(d, n) })
        }
        Backend::Explicit(a) => {
            let mut orbit = vec![0usize];
            let mut v = a.apply(g, 0);
            while v != 0 {
                orbit.push(v);
                v = a.apply(g, v);
            }
            let gr = a.graph();
            let diam = orbit.iter().flat_map(|&x| orbit.iter().map(move |&y| gr.distance(x, y))).max().unwrap_or(0);
            Ok(Isometry::Elliptic { orbit_diameter: diam })
        }
    }
}

/// Length of the longest common prefix of `p` and the periodic word `c^∞`.
fn lcp_periodic(p: &[Letter], c: &[Letter]) -> usize {
    p.iter().enumerate().take_while(|(i, l)| **l == c[i % c.len()]).count()
}

/// Least period of `c`, taken as a word.
fn primitive_root(c: &Word) -> Word {
    let l = c.letters();
    let n = l.len();
    for p in 1..=n {
        if n.is_multiple_of(p) && (p..n).all(|i| l[i] == l[i - p]) {
            return c.prefix(p);
        }
    }
    c.clone()
}

fn rotate(c: &Word, k: usize) -> Word {
    let l = c.letters();
    let k = k % l.len().max(1);
    let mut v = l[k..].to_vec();
    v.extend_from_slice(&l[..k]);
    Word::reduce(c.rank(), v).expect("rank")
}

/// Axis of a hyperbolic element of the free group acting on its Cayley tree.
///
/// The line is `{x₀·cᵏ·p : k ∈ ℤ, p a prefix of c}`; positions are signed
/// offsets from `x₀` along the direction of translation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuasiAxis {
    pub owner: Word,
    pub x0: Word,
    pub period: Word,
    pub d: usize,
}

impl QuasiAxis {
    pub fn tau(&self) -> usize {
        self.d
    }

    /// Vertex at signed position `i`.
    pub fn vertex(&self, i: i64) -> Word {
        let c = if i >= 0 { self.period.clone() } else { self.period.inverse() };
        let n = c.len();
        let k = i.unsigned_abs() as usize;
        let mut letters = self.x0.letters().to_vec();
        letters.extend((0..k).map(|j| c.letters()[j % n]));
        Word::reduce(self.x0.rank(), letters).expect("rank")
    }

    /// Signed position of the nearest-point projection of `v`.
    pub fn project(&self, v: &Word) -> i64 {
        let p = &self.x0.inverse() * v;
        let fwd = lcp_periodic(p.letters(), self.period.letters());
        if fwd > 0 {
            return fwd as i64;
        }
        let back = self.period.inverse();
        -(lcp_periodic(p.letters(), back.letters()) as i64)
    }

    /// Distance from `v` to the line.
    pub fn distance_to(&self, v: &Word) -> usize {
        tree_distance(v, &self.vertex(self.project(v)))
    }

    pub fn translate(&self, gamma: &Word) -> QuasiAxis {
        QuasiAxis {
            owner: self.owner.conjugate_by(gamma),
            x0: gamma * &self.x0,
            period: self.period.clone(),
            d: self.d,
        }
    }

    /// The vertices `x₀, …, gᵐx₀` of the concatenated segments.
    pub fn path(&self, m: usize) -> Vec<Word> {
        (0..=(m * self.d) as i64).map(|i| self.vertex(i)).collect()
    }

    /// Orientation-free identifier of the line: its point nearest the
    /// identity and the least primitive period read from there.
    pub fn line_key(&self) -> (Word, Word) {
        let id = Word::identity(self.x0.rank());
        let i = self.project(&id);
        let p = self.vertex(i);
        let root = primitive_root(&self.period);
        let n = root.len() as i64;
        let fwd = rotate(&root, i.rem_euclid(n) as usize);
        let back = fwd.inverse();
        (p, fwd.min(back))
    }
}

pub fn quasi_axis(backend: &Backend, g: &Word) -> Result<QuasiAxis, ActionError> {
    backend.check(g)?;
    match backend {
        Backend::CayleyTree { .. } => {
            let (u, c) = g.cyclic_decomposition();
            if c.is_empty() {
                return Err(ActionError::Elliptic(g.to_string()));
            }
            Ok(QuasiAxis { owner: g.clone(), d: c.len(), x0: u, period: c })
        }
        Backend::Explicit(_) => Err(ActionError::Elliptic(g.to_string())),
    }
}

/// Diameter of the projection of `axis2` restricted to positions
/// `[-window, window]` onto `axis1`.
///
/// Nearest-point projections onto a line in a tree send a geodesic segment
/// onto the interval between the images of its endpoints, so only the two
/// endpoints are projected.
pub fn projection_diameter(axis1: &QuasiAxis, axis2: &QuasiAxis, window: usize) -> i64 {
    let (lo, hi) = projection_interval(axis1, axis2, window);
    hi - lo
}

fn projection_interval(onto: &QuasiAxis, of: &QuasiAxis, window: usize) -> (i64, i64) {
    let w = window as i64;
    let (a, b) = (onto.project(&of.vertex(-w)), onto.project(&of.vertex(w)));
    (a.min(b), a.max(b))
}

/// Window beyond which the projection of non-parallel lines is stable.
pub fn stable_window(a: &QuasiAxis, b: &QuasiAxis) -> usize {
    2 * tree_distance(&a.x0, &b.x0) + a.d + b.d + 1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Projection {
    Bounded(i64),
    Parallel { diameters: [i64; 3] },
}

/// Growth test: parallel iff the diameter keeps growing and exceeds
/// `3·max(τ) + 20δ + 20` (here `δ = 0`) over windows `W, 2W, 4W`.
pub fn projection_test(a: &QuasiAxis, b: &QuasiAxis, window: usize) -> Projection {
    let w = window.max(stable_window(a, b));
    let ds = [w, 2 * w, 4 * w].map(|x| projection_diameter(a, b, x));
    let threshold = 3 * a.d.max(b.d) as i64 + 20;
    if ds[2] > ds[1] && ds[2] > threshold {
        Projection::Parallel { diameters: ds }
    } else {
        Projection::Bounded(ds[2])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WwpdReport {
    pub tau: usize,
    pub xi: i64,
    /// Least conjugator attaining `xi`.
    pub witness: Option<Word>,
    /// Conjugators whose axis translate is parallel to the axis.
    pub parallel: Vec<Word>,
    pub scanned: usize,
}

/// `ξ` over the ball of conjugators: the largest bounded projection of a
/// translated axis onto the axis of `g`.
pub fn wwpd_xi(backend: &Backend, g: &Word, conj_radius: usize) -> Result<WwpdReport, ActionError> {
    let axis = quasi_axis(backend, g)?;
    let gammas = ball(backend.rank(), conj_radius);
    let results: Vec<Projection> = gammas.par_iter().map(|gm| projection_test(&axis, &axis.translate(gm), 0)).collect();
    let mut xi = 0;
    let mut witness = None;
    let mut parallel = Vec::new();
    for (gm, r) in gammas.iter().zip(results) {
        match r {
            Projection::Parallel { .. } => parallel.push(gm.clone()),
            Projection::Bounded(d) => {
                if witness.is_none() || d > xi {
                    xi = d;
                    witness = Some(gm.clone());
                }
            }
        }
    }
    Ok(WwpdReport { tau: axis.d, xi, witness, parallel, scanned: gammas.len() })
}

/// Family of pairwise non-parallel lines with projection intervals.
///
/// `intervals[a][b]` is the projection of member `b` onto member `a`, as
/// positions along `a`. Diagonal entries are unused.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectionFamily {
    pub labels: Vec<String>,
    pub taus: Vec<i64>,
    pub intervals: Vec<Vec<(i64, i64)>>,
    pub xi: i64,
    pub eta: i64,
    /// Axis data when built from a tree backend.
    #[serde(skip)]
    pub axes: Vec<QuasiAxis>,
}

impl ProjectionFamily {
    /// Hand-built family; checks shape and then axiom 1.
    pub fn from_intervals(
        labels: Vec<String>,
        taus: Vec<i64>,
        intervals: Vec<Vec<(i64, i64)>>,
        eta: i64,
    ) -> Result<ProjectionFamily, ActionError> {
        let n = labels.len();
        if taus.len() != n || intervals.len() != n || intervals.iter().any(|r| r.len() != n) {
            return Err(ActionError::BadFamily(format!("expected {n} members with {n}x{n} intervals")));
        }
        if intervals.iter().flatten().any(|&(lo, hi)| lo > hi) {
            return Err(ActionError::BadFamily("interval with lo > hi".into()));
        }
        let fam = ProjectionFamily { labels, taus, intervals, xi: 0, eta, axes: Vec::new() };
        fam.check_axioms()?;
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `d^π_A(B, C)`: diameter of `π_A(B) ∪ π_A(C)`.
    pub fn d_pi(&self, a: usize, b: usize, c: usize) -> i64 {
        let (x, y) = (self.intervals[a][b], self.intervals[a][c]);
        x.1.max(y.1) - x.0.min(y.0)
    }

    /// Of the three values on each triple of distinct members, at most one
    /// exceeds `eta`. The second condition (finitely many large projections
    /// for each pair) holds trivially for a finite family.
    pub fn check_axioms(&self) -> Result<(), ActionError> {
        let n = self.len();
        let bad = (0..n).into_par_iter().find_map_first(|a| {
            for b in a + 1..n {
                for c in b + 1..n {
                    let values = [self.d_pi(a, b, c), self.d_pi(b, a, c), self.d_pi(c, a, b)];
                    if values.iter().filter(|&&v| v > self.eta).count() > 1 {
                        return Some(ActionError::AxiomViolation { a, b, c, values, eta: self.eta });
                    }
                }
            }
            None
        });
        bad.map_or(Ok(()), Err)
    }

    /// Least `eta` for which axiom 1 holds: the maximum over triples of the
    /// second largest of the three values.
    pub fn least_eta(&self) -> i64 {
        let n = self.len();
        let mut best = 0;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let mut v = [self.d_pi(a, b, c), self.d_pi(b, a, c), self.d_pi(c, a, b)];
                    v.sort_unstable();
                    best = best.max(v[1]);
                }
            }
        }
        best
    }
}

/// Default `η − ξ`. Distinct lines with period length `τ` share fewer than
/// `τ` edges, and in a tree the second largest value on any triple is at
/// most the sum of two such overlaps.
pub fn default_eta_slack(tau: usize) -> i64 {
    2 * tau as i64
}

/// Parallelism classes of the conjugate axes `γ·axis(g)`, `|γ| ≤ radius`.
/// Each class is represented by its least conjugator.
pub fn build_projection_family(
    backend: &Backend,
    g: &Word,
    conj_radius: usize,
    slack: Option<i64>,
) -> Result<ProjectionFamily, ActionError> {
    let axis = quasi_axis(backend, g)?;
    let wwpd = wwpd_xi(backend, g, conj_radius)?;
    let mut seen = HashSet::new();
    let mut axes = Vec::new();
    let mut labels = Vec::new();
    for gm in ball(backend.rank(), conj_radius) {
        let t = axis.translate(&gm);
        if seen.insert(t.line_key()) {
            labels.push(if gm.is_identity() { "1".to_string() } else { gm.to_string() });
            axes.push(t);
        }
    }
    let n = axes.len();
    let intervals: Vec<Vec<(i64, i64)>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| if a == b { (0, 0) } else { projection_interval(&axes[a], &axes[b], stable_window(&axes[a], &axes[b])) })
                .collect()
        })
        .collect();
    let eta = wwpd.xi + slack.unwrap_or_else(|| default_eta_slack(axis.d));
    let fam = ProjectionFamily { labels, taus: vec![axis.d as i64; n], intervals, xi: wwpd.xi, eta, axes };
    fam.check_axioms()?;
    Ok(fam)
}

pub fn default_k(eta: i64) -> i64 {
    4 * eta + 4
}

#[derive(Clone, Debug)]
pub struct PromotedGraph {
    pub graph: FiniteMetricGraph,
    /// Position range `[lo, hi]` covered by each member's path.
    pub ranges: Vec<(i64, i64)>,
    /// First vertex id of each member's path.
    pub offsets: Vec<usize>,
    pub joined_pairs: Vec<(usize, usize)>,
    pub k: i64,
}

impl PromotedGraph {
    pub fn vertex_of(&self, member: usize, position: i64) -> usize {
        let (lo, hi) = self.ranges[member];
        assert!((lo..=hi).contains(&position));
        self.offsets[member] + (position - lo) as usize
    }
}

/// Quasi-tree of the family: each member becomes a subdivided path covering
/// its own period and every projection onto it; members `A`, `B` are joined
/// from `π_A(B)` to `π_B(A)` when `d^π_C(A, B) ≤ K` for every other `C`.
pub fn promote_to_quasitree(fam: &ProjectionFamily, k: i64) -> Result<PromotedGraph, ActionError> {
    fam.check_axioms()?;
    let n = fam.len();
    if n == 0 {
        return Err(ActionError::BadFamily("empty family".into()));
    }
    let mut ranges = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    let mut total = 0usize;
    for a in 0..n {
        let (mut lo, mut hi) = (0, fam.taus[a].max(1));
        for b in (0..n).filter(|&b| b != a) {
            lo = lo.min(fam.intervals[a][b].0);
            hi = hi.max(fam.intervals[a][b].1);
        }
        ranges.push((lo, hi));
        offsets.push(total);
        total += (hi - lo + 1) as usize;
    }
    let pos = |m: usize, p: i64| offsets[m] + (p - ranges[m].0) as usize;
    let mut edges = Vec::new();
    for a in 0..n {
        for p in ranges[a].0..ranges[a].1 {
            edges.push((pos(a, p), pos(a, p + 1)));
        }
    }
    let joined: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            (a + 1..n)
                .filter(move |&b| (0..n).filter(|&c| c != a && c != b).all(|c| fam.d_pi(c, a, b) <= k))
                .map(move |b| (a, b))
        })
        .collect();
    for &(a, b) in &joined {
        edges.push((pos(a, fam.intervals[a][b].0), pos(b, fam.intervals[b][a].0)));
    }
    let graph = match FiniteMetricGraph::from_edges(total, &edges) {
        Err(GraphError::Disconnected { .. }) => return Err(ActionError::PromotionDisconnected { k }),
        other => other?,
    };
    Ok(PromotedGraph { graph, ranges, offsets, joined_pairs: joined, k })
}

/// Pipeline budgets.
#[derive(Clone, Debug, Serialize)]
pub struct Budgets {
    pub n_max: usize,
    pub conj_radius: usize,
    /// Radius of the ball whose pairs sample the defect.
    pub defect_radius: usize,
    /// Build and measure the promoted quasi-tree for the report.
    pub promote: bool,
    pub k: Option<i64>,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { n_max: 1000, conj_radius: 2, defect_radius: 2, promote: true, k: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PromotionSummary {
    pub members: usize,
    pub eta: i64,
    pub least_eta: i64,
    pub k: i64,
    pub vertices: usize,
    pub bottleneck: u32,
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub delta: BigRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub backend: String,
    pub g: String,
    pub classification: Isometry,
    pub in_commutator_subgroup: bool,
    /// `None` when scl is infinite (nonzero abelianization).
    #[serde(serialize_with = "crate::exact::serialize_opt_ratio")]
    pub lower_bound: Option<BigRational>,
    pub tau: usize,
    pub xi: i64,
    pub threshold_m: i64,
    pub power_n: i64,
    pub segment: Option<String>,
    pub basepoint: Option<String>,
    /// Bottleneck constant of the space the quasi-morphism counts in.
    pub counting_space_bottleneck: u32,
    pub promoted: Option<PromotionSummary>,
    /// Largest `|F(gⁿ)|`, `n ≤ 50`, for elliptic elements.
    pub elliptic_power_bound: Option<i64>,
    pub qm: Option<QmReport>,
}

fn summarize_promotion(fam: &ProjectionFamily, k: i64) -> Result<PromotionSummary, ActionError> {
    let pg = promote_to_quasitree(fam, k)?;
    Ok(PromotionSummary {
        members: fam.len(),
        eta: fam.eta,
        least_eta: fam.least_eta(),
        k,
        vertices: pg.graph.vertex_count(),
        bottleneck: pg.graph.bottleneck_constant(),
        delta: pg.graph.hyperbolicity_delta().value(),
    })
}

/// classify → axis → ξ → power `N` → counting quasi-morphism on `g^N` →
/// homogenize → Bavard, giving `scl(g) ≥ Ĥ(g^N) / (2·2·12·N)`.
pub fn scl_pipeline(backend: &Backend, g: &Word, budgets: &Budgets) -> Result<PipelineReport, PipelineError> {
    let classification = classify_isometry(backend, g, budgets.n_max.max(4)).map_err(at("classify"))?;
    let in_cs = g.in_commutator_subgroup();
    let mut report = PipelineReport {
        backend: backend.to_string(),
        g: g.to_string(),
        classification: classification.clone(),
        in_commutator_subgroup: in_cs,
        lower_bound: None,
        tau: 0,
        xi: 0,
        threshold_m: PIPELINE_THRESHOLD,
        power_n: 1,
        segment: None,
        basepoint: None,
        counting_space_bottleneck: 0,
        promoted: None,
        elliptic_power_bound: None,
        qm: None,
    };
    if let Isometry::Elliptic { .. } = classification {
        // Counting quasi-morphisms are bounded on powers of elliptic
        // elements, so the certified bound is 0.
        if let Backend::Explicit(a) = backend {
            let gr = a.graph();
            let far = gr.neighbors(0).first().copied();
            if let Some(v) = far {
                let qm = GraphCountingQm::new(a.clone(), gr.canonical_geodesic(0, v), 0)
                    .map_err(|e| at("counting")(ActionError::BadFamily(e.to_string())))?;
                report.elliptic_power_bound = Some((1..=50).map(|n| qm.value(&g.pow(n)).abs()).max().unwrap_or(0));
            } else {
                report.elliptic_power_bound = Some(0);
            }
            report.counting_space_bottleneck = gr.bottleneck_constant();
        }
        report.lower_bound = in_cs.then(BigRational::zero);
        return Ok(report);
    }
    let axis = quasi_axis(backend, g).map_err(at("quasi_axis"))?;
    let wwpd = wwpd_xi(backend, g, budgets.conj_radius).map_err(at("wwpd"))?;
    let needed = wwpd.xi + PIPELINE_THRESHOLD;
    let tau = axis.d as i64;
    let n = (1..=MAX_POWER).find(|&n| n * tau >= needed).ok_or(PipelineError {
        stage: "power",
        source: ActionError::NoPower { needed },
    })?;
    report.tau = axis.d;
    report.xi = wwpd.xi;
    report.power_n = n;
    if budgets.promote {
        let fam = build_projection_family(backend, g, budgets.conj_radius, None).map_err(at("projection_family"))?;
        let k = budgets.k.unwrap_or_else(|| default_k(fam.eta));
        report.promoted = Some(summarize_promotion(&fam, k).map_err(at("promote"))?);
    }
    // The Cayley tree is already a tree, so counting happens there directly.
    let gn = g.pow(n);
    let segment = axis.period.pow(n);
    let qm = TreeCountingQm::new(segment.clone(), axis.x0.clone())
        .map_err(|e| at("counting")(ActionError::BadFamily(e.to_string())))?;
    let sample = ball(backend.rank(), budgets.defect_radius);
    let pairs: Vec<(Word, Word)> = sample.iter().flat_map(|x| sample.iter().map(move |y| (x.clone(), y.clone()))).collect();
    let qr = evaluate_report(&qm, &gn, budgets.n_max.max(1), &pairs);
    report.segment = Some(segment.to_string());
    report.basepoint = Some(axis.x0.to_string());
    report.lower_bound = in_cs.then(|| &qr.bavard_lower / int(n));
    report.qm = Some(qr);
    Ok(report)
}

/// Least-conjugator representatives of the distinct lines among the
/// conjugate axes; exposed for diagnostics.
pub fn conjugate_lines(backend: &Backend, g: &Word, radius: usize) -> Result<BTreeMap<(Word, Word), Word>, ActionError> {
    let axis = quasi_axis(backend, g)?;
    let mut out = BTreeMap::new();
    for gm in ball(backend.rank(), radius) {
        out.entry(axis.translate(&gm).line_key()).or_insert(gm);
    }
    Ok(out)
}
