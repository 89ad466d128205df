//! Finite graphs with the unit-edge path metric: four-point hyperbolicity,
//! the bottleneck constant, and the annulus-component tree that
//! approximates a quasi-tree.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact::ratio;

/// Hard cap on vertex count; the distance cache is `n²` 16-bit entries.
pub const MAX_VERTICES: usize = 20_000;
/// Blocks up to this size get an exhaustive quadruple scan.
pub const EXACT_QUADRUPLE_LIMIT: usize = 300;
const SAMPLED_QUADRUPLES: usize = 2_000_000;
const UNREACHED: u16 = u16::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("graph has {0} vertices, more than the supported {MAX_VERTICES}")]
    TooLarge(usize),
    #[error("edge ({u}, {w}) references a vertex outside 0..{n}")]
    VertexOutOfRange { u: usize, w: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("graph is disconnected: vertex {unreached} is not reachable from 0")]
    Disconnected { unreached: usize },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("base vertex {base} out of range 0..{n}")]
    BaseOutOfRange { base: usize, n: usize },
    #[error("annulus quotient is not a tree; component cycle {cycle:?}")]
    NotATree { cycle: Vec<usize> },
    #[error("path is not a ({l}, {a})-quasi-geodesic: positions {i} and {j}")]
    NotQuasiGeodesic { l: u32, a: u32, i: usize, j: usize },
    #[error("path has a non-edge step at position {0}")]
    NotAPath(usize),
}

/// Connected graph with all-pairs distances cached at construction.
#[derive(Clone)]
pub struct FiniteMetricGraph {
    adj: Vec<Vec<usize>>,
    dist: Vec<u16>,
}

impl fmt::Debug for FiniteMetricGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteMetricGraph(n={}, m={})", self.vertex_count(), self.edge_count())
    }
}

fn bfs_row(adj: &[Vec<usize>], src: usize, blocked: Option<&dyn Fn(usize) -> bool>) -> Vec<u16> {
    let mut d = vec![UNREACHED; adj.len()];
    let mut q = VecDeque::new();
    d[src] = 0;
    q.push_back(src);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v] == UNREACHED && blocked.is_none_or(|b| !b(v)) {
                d[v] = d[u] + 1;
                q.push_back(v);
            }
        }
    }
    d
}

impl FiniteMetricGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<FiniteMetricGraph, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if n > MAX_VERTICES {
            return Err(GraphError::TooLarge(n));
        }
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(u, w) in edges {
            if u >= n || w >= n {
                return Err(GraphError::VertexOutOfRange { u, w, n });
            }
            if u == w {
                return Err(GraphError::SelfLoop(u));
            }
            sets[u].insert(w);
            sets[w].insert(u);
        }
        let adj: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let first = bfs_row(&adj, 0, None);
        if let Some(unreached) = first.iter().position(|&d| d == UNREACHED) {
            return Err(GraphError::Disconnected { unreached });
        }
        let rows: Vec<Vec<u16>> = (0..n).into_par_iter().map(|s| bfs_row(&adj, s, None)).collect();
        let mut dist = Vec::with_capacity(n * n);
        for r in rows {
            dist.extend_from_slice(&r);
        }
        Ok(FiniteMetricGraph { adj, dist })
    }

    pub fn path(len: usize) -> FiniteMetricGraph {
        let edges: Vec<_> = (0..len).map(|i| (i, i + 1)).collect();
        FiniteMetricGraph::from_edges(len + 1, &edges).expect("path graph")
    }

    pub fn cycle(n: usize) -> FiniteMetricGraph {
        assert!(n >= 3);
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        FiniteMetricGraph::from_edges(n, &edges).expect("cycle graph")
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, ns) in self.adj.iter().enumerate() {
            for &w in ns {
                if u < w {
                    out.push((u, w));
                }
            }
        }
        out
    }

    pub fn distance(&self, u: usize, v: usize) -> u32 {
        self.dist[u * self.vertex_count() + v] as u32
    }

    fn row(&self, u: usize) -> &[u16] {
        let n = self.vertex_count();
        &self.dist[u * n..(u + 1) * n]
    }

    pub fn diameter(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0) as u32
    }

    pub fn is_tree(&self) -> bool {
        self.edge_count() + 1 == self.vertex_count()
    }

    /// Parent of `u` in the canonical BFS tree rooted at `root`: the
    /// lowest-id neighbour one step closer to `root`.
    fn canonical_parent(&self, root: usize, u: usize) -> usize {
        let r = self.row(root);
        let du = r[u];
        *self.adj[u].iter().find(|&&w| r[w] + 1 == du).expect("connected")
    }

    /// Canonical geodesic: climbs the canonical BFS tree of the
    /// lower-numbered endpoint. Returned in order from `x` to `y`.
    pub fn canonical_geodesic(&self, x: usize, y: usize) -> Vec<usize> {
        let (root, leaf) = if x <= y { (x, y) } else { (y, x) };
        let mut p = vec![leaf];
        let mut u = leaf;
        while u != root {
            u = self.canonical_parent(root, u);
            p.push(u);
        }
        if x <= y {
            p.reverse();
        }
        p
    }

    /// Line-oriented text: `v <n>` then `e <u> <w>` per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("v {}\n", self.vertex_count());
        for (u, w) in self.edges() {
            s.push_str(&format!("e {u} {w}\n"));
        }
        s
    }

    /// Hyperbolicity by the four-point condition.
    ///
    /// Blocks (biconnected components) are isometric subgraphs and the
    /// four-point value of a graph is the maximum over its blocks, so each
    /// block is scanned on its own.
    pub fn hyperbolicity_delta(&self) -> Hyperbolicity {
        let mut twice = 0u32;
        let mut exact = true;
        for block in self.blocks() {
            if block.len() < 4 {
                continue;
            }
            if block.len() <= EXACT_QUADRUPLE_LIMIT {
                twice = twice.max(self.four_point_exhaustive(&block));
            } else {
                exact = false;
                twice = twice.max(self.four_point_sampled(&block, SAMPLED_QUADRUPLES));
            }
        }
        Hyperbolicity { twice, exact }
    }

    /// `max (L − M)` over 4-subsets, where `L ≥ M` are the two largest of the
    /// three pair sums.
    pub fn four_point_exhaustive(&self, vs: &[usize]) -> u32 {
        let n = vs.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best = 0u32;
                let x = vs[i];
                for j in i + 1..n {
                    let y = vs[j];
                    let dxy = self.distance(x, y);
                    for k in j + 1..n {
                        let z = vs[k];
                        let (dxz, dyz) = (self.distance(x, z), self.distance(y, z));
                        for &w in &vs[k + 1..] {
                            let s1 = dxy + self.distance(z, w);
                            let s2 = dxz + self.distance(y, w);
                            let s3 = self.distance(x, w) + dyz;
                            best = best.max(four_point_gap(s1, s2, s3));
                        }
                    }
                }
                best
            })
            .max()
            .unwrap_or(0)
    }

    fn four_point_sampled(&self, vs: &[usize], samples: usize) -> u32 {
        let mut rng = ChaCha8Rng::seed_from_u64(vs.len() as u64);
        let mut best = 0;
        for _ in 0..samples {
            let q: Vec<usize> = vs.choose_multiple(&mut rng, 4).copied().collect();
            let d = |a: usize, b: usize| self.distance(q[a], q[b]);
            best = best.max(four_point_gap(d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)));
        }
        best
    }

    /// Vertex sets of the biconnected components (iterative Tarjan).
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.vertex_count();
        if n == 1 {
            return vec![vec![0]];
        }
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0;
        let mut edge_stack: Vec<(usize, usize)> = Vec::new();
        let mut out = Vec::new();
        // (vertex, parent, next neighbour index)
        let mut stack: Vec<(usize, usize, usize)> = vec![(0, usize::MAX, 0)];
        disc[0] = 0;
        low[0] = 0;
        timer += 1;
        while let Some(&mut (u, parent, ref mut idx)) = stack.last_mut() {
            if *idx < self.adj[u].len() {
                let v = self.adj[u][*idx];
                *idx += 1;
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    edge_stack.push((u, v));
                    stack.push((v, u, 0));
                } else if v != parent && disc[v] < disc[u] {
                    low[u] = low[u].min(disc[v]);
                    edge_stack.push((u, v));
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] >= disc[p] {
                        let mut comp = BTreeSet::new();
                        while let Some((a, b)) = edge_stack.pop() {
                            comp.insert(a);
                            comp.insert(b);
                            if (a, b) == (p, u) {
                                break;
                            }
                        }
                        out.push(comp.into_iter().collect());
                    }
                }
            }
        }
        out
    }

    /// Least integer `Δ` such that for every pair `x < y` and every vertex
    /// `v` of the canonical geodesic at distance `> Δ` from both ends,
    /// removing the closed ball `B(v, Δ)` separates `x` from `y`.
    pub fn bottleneck_constant(&self) -> u32 {
        let mut delta = 0;
        loop {
            if self.bottleneck_witness(delta).is_none() {
                return delta;
            }
            delta += 1;
        }
    }

    /// A violating `(x, y, v)` for the given `Δ`, or `None` if it holds.
    ///
    /// Along the canonical tree of `x`, the descent below the vertex at depth
    /// `depth(v) + Δ + 1` never re-enters `B(v, Δ)`, so one check per
    /// (root, frontier vertex) decides all pairs below it.
    pub fn bottleneck_witness(&self, delta: u32) -> Option<(usize, usize, usize)> {
        let n = self.vertex_count();
        let chunk = ((1usize << 24) / n).max(1);
        let mut v0 = 0;
        while v0 < n {
            let v1 = (v0 + chunk).min(n);
            let comps: Vec<Vec<u16>> = (v0..v1).into_par_iter().map(|v| self.ball_complement_components(v, delta)).collect();
            let found = (0..n)
                .into_par_iter()
                .filter_map(|x| self.bottleneck_root_check(x, delta, v0..v1, &comps))
                .min();
            if found.is_some() {
                return found;
            }
            v0 = v1;
        }
        None
    }

    fn ball_complement_components(&self, v: usize, delta: u32) -> Vec<u16> {
        let n = self.vertex_count();
        let r = self.row(v);
        let mut comp = vec![UNREACHED; n];
        let mut label = 0u16;
        let mut q = VecDeque::new();
        for s in 0..n {
            if comp[s] != UNREACHED || r[s] as u32 <= delta {
                continue;
            }
            comp[s] = label;
            q.push_back(s);
            while let Some(u) = q.pop_front() {
                for &w in &self.adj[u] {
                    if comp[w] == UNREACHED && r[w] as u32 > delta {
                        comp[w] = label;
                        q.push_back(w);
                    }
                }
            }
            label += 1;
        }
        comp
    }

    fn bottleneck_root_check(
        &self,
        x: usize,
        delta: u32,
        vrange: std::ops::Range<usize>,
        comps: &[Vec<u16>],
    ) -> Option<(usize, usize, usize)> {
        let n = self.vertex_count();
        let depth = self.row(x);
        let mut parent = vec![usize::MAX; n];
        for u in 0..n {
            if u != x {
                parent[u] = self.canonical_parent(x, u);
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&u| std::cmp::Reverse(depth[u]));
        let mut maxdesc: Vec<usize> = (0..n).collect();
        for &u in &order {
            if u != x {
                let p = parent[u];
                maxdesc[p] = maxdesc[p].max(maxdesc[u]);
            }
        }
        let mut best: Option<(usize, usize, usize)> = None;
        for f in 0..n {
            let df = depth[f] as u32;
            if df < 2 * delta + 2 || maxdesc[f] <= x {
                continue;
            }
            let mut v = f;
            for _ in 0..=delta {
                v = parent[v];
            }
            if !vrange.contains(&v) {
                continue;
            }
            let c = &comps[v - vrange.start];
            if c[f] == c[x] {
                let cand = (x, maxdesc[f], v);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    /// Annulus-component tree with `R = 20Δ` about `base`.
    ///
    /// `delta = None` computes the bottleneck constant; in either case `Δ` is
    /// raised to at least 1.
    pub fn manning_tree(&self, delta: Option<u32>, base: usize) -> Result<TreeQuotient, GraphError> {
        let n = self.vertex_count();
        if base >= n {
            return Err(GraphError::BaseOutOfRange { base, n });
        }
        let delta = delta.unwrap_or_else(|| self.bottleneck_constant()).max(1);
        let r = 20 * delta;
        let d = self.row(base);
        let level = |v: usize| -> u32 {
            let dv = d[v] as u32;
            if dv <= r {
                0
            } else {
                (dv - 1) / r
            }
        };
        // components of each annulus, labelled in order of (level, least vertex)
        let mut comp = vec![usize::MAX; n];
        let mut comp_level = Vec::new();
        let mut by_level: Vec<usize> = (0..n).collect();
        by_level.sort_by_key(|&v| (level(v), v));
        for &s in &by_level {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = comp_level.len();
            comp_level.push(level(s));
            comp[s] = id;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &w in &self.adj[u] {
                    if comp[w] == usize::MAX && level(w) == level(s) {
                        comp[w] = id;
                        q.push_back(w);
                    }
                }
            }
        }
        let k = comp_level.len();
        let mut lower: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
        let mut tree_edges = BTreeSet::new();
        for (u, w) in self.edges() {
            let (cu, cw) = (comp[u], comp[w]);
            if cu == cw {
                continue;
            }
            let (lo, hi) = if comp_level[cu] < comp_level[cw] { (cu, cw) } else { (cw, cu) };
            lower[hi].insert(lo);
            tree_edges.insert((lo, hi));
        }
        if let Some(c) = (0..k).find(|&c| lower[c].len() > 1) {
            let mut it = lower[c].iter();
            let (p1, p2) = (*it.next().unwrap(), *it.next().unwrap());
            return Err(GraphError::NotATree { cycle: vec![p1, c, p2] });
        }
        let edges: Vec<_> = tree_edges.into_iter().collect();
        let tree = FiniteMetricGraph::from_edges(k, &edges)?;
        let mut reps = vec![usize::MAX; k];
        for v in 0..n {
            let c = comp[v];
            if reps[c] == usize::MAX || (d[v], v) < (d[reps[c]], reps[c]) {
                reps[c] = v;
            }
        }
        Ok(TreeQuotient { tree, alpha: comp, reps, r, delta, base })
    }

    /// Check `8Δ·d_T − 16Δ ≤ d_Q(β(a), β(b)) ≤ 26Δ·d_T` on all component pairs.
    /// Returns the first violating `(a, b, d_T, d_Q)`.
    pub fn check_manning_inequalities(&self, tq: &TreeQuotient) -> Result<(), (usize, usize, u32, u32)> {
        let k = tq.tree.vertex_count();
        let dl = tq.delta;
        for a in 0..k {
            for b in a + 1..k {
                let dt = tq.tree.distance(a, b);
                let dq = self.distance(tq.reps[a], tq.reps[b]);
                let lower_ok = (8 * dl * dt) as i64 - (16 * dl) as i64 <= dq as i64;
                if !lower_ok || dq > 26 * dl * dt {
                    return Err((a, b, dt, dq));
                }
            }
        }
        Ok(())
    }

    /// Check that `path` is an `(l, a)`-quasi-geodesic edge path and return
    /// the least `ε` with its image in the `ε`-neighbourhood of the tree
    /// geodesic between the images of its endpoints.
    pub fn quasigeodesic_image_check(&self, tq: &TreeQuotient, path: &[usize], l: u32, a: u32) -> Result<u32, GraphError> {
        if path.is_empty() {
            return Ok(0);
        }
        for (i, w) in path.windows(2).enumerate() {
            if w[0] >= self.vertex_count() || w[1] >= self.vertex_count() || self.distance(w[0], w[1]) > 1 {
                return Err(GraphError::NotAPath(i));
            }
        }
        for i in 0..path.len() {
            for j in i + 1..path.len() {
                let d = self.distance(path[i], path[j]);
                if (j - i) as u32 > l * (d + a) {
                    return Err(GraphError::NotQuasiGeodesic { l, a, i, j });
                }
            }
        }
        let t = &tq.tree;
        let (s, e) = (tq.alpha[path[0]], tq.alpha[*path.last().unwrap()]);
        let dse = t.distance(s, e);
        Ok(path
            .iter()
            .map(|&p| {
                let c = tq.alpha[p];
                (t.distance(c, s) + t.distance(c, e) - dse) / 2
            })
            .max()
            .unwrap_or(0))
    }
}

fn four_point_gap(s1: u32, s2: u32, s3: u32) -> u32 {
    let mut s = [s1, s2, s3];
    s.sort_unstable();
    s[2] - s[1]
}

/// Four-point hyperbolicity, stored doubled so it stays integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Hyperbolicity {
    pub twice: u32,
    /// False when some block was too large for an exhaustive scan and was
    /// sampled; the value is then a lower bound.
    pub exact: bool,
}

impl Hyperbolicity {
    pub fn value(&self) -> BigRational {
        ratio(self.twice as i64, 2)
    }

    pub fn ceil(&self) -> u32 {
        self.twice.div_ceil(2)
    }
}

/// Tree of annulus components with the projection `alpha` and one
/// representative vertex per component.
#[derive(Clone, Debug)]
pub struct TreeQuotient {
    pub tree: FiniteMetricGraph,
    pub alpha: Vec<usize>,
    pub reps: Vec<usize>,
    pub r: u32,
    pub delta: u32,
    pub base: usize,
}

/// Parameters of the random quasi-tree family: a random tree plus chords
/// of bounded span.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuasiTreeParams {
    pub n: usize,
    /// Each new vertex attaches to one of the previous `locality` vertices;
    /// small values give long, thin trees.
    pub locality: usize,
    pub chords: usize,
    /// Chord endpoints are at tree distance `2..=span`.
    pub span: usize,
}

pub fn random_quasi_tree<R: Rng>(p: QuasiTreeParams, rng: &mut R) -> FiniteMetricGraph {
    let n = p.n.max(1);
    let mut edges = Vec::with_capacity(n - 1 + p.chords);
    let mut tree_adj = vec![Vec::new(); n];
    for i in 1..n {
        let lo = i.saturating_sub(p.locality.max(1));
        let j = rng.gen_range(lo..i);
        edges.push((j, i));
        tree_adj[i].push(j);
        tree_adj[j].push(i);
    }
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    if p.span >= 2 && n > 2 {
        for _ in 0..p.chords {
            let u = rng.gen_range(0..n);
            let d = bfs_row(&tree_adj, u, None);
            let cands: Vec<usize> =
                (0..n).filter(|&v| (2..=p.span as u16).contains(&d[v])).collect();
            if let Some(&v) = cands.choose(rng) {
                let e = (u.min(v), u.max(v));
                if present.insert(e) {
                    edges.push(e);
                }
            }
        }
    }
    FiniteMetricGraph::from_edges(n, &edges).expect("connected by construction")
}

/// Parse the line-oriented graph format.
///
/// `v <n>` must come first, then any number of `e <u> <w>` lines. Lines
/// `gen <i0> <i1> …` list vertex images of one generator and are returned
/// separately. Blank lines and `#` comments are ignored.
pub fn parse_graph_text(text: &str) -> Result<(FiniteMetricGraph, Vec<Vec<usize>>), GraphError> {
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut gens = Vec::new();
    let err = |line: usize, column: usize, message: String| GraphError::Parse { line, column, message };
    for (li, raw) in text.lines().enumerate() {
        let line_no = li + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut col = 0;
        for piece in content.split(' ') {
            if !piece.is_empty() {
                tokens.push((col + 1, piece.trim()));
            }
            col += piece.len() + 1;
        }
        let Some(&(kcol, keyword)) = tokens.first() else { continue };
        let nums = |tokens: &[(usize, &str)]| -> Result<Vec<usize>, GraphError> {
            tokens
                .iter()
                .map(|&(c, t)| t.parse::<usize>().map_err(|_| err(line_no, c, format!("expected a non-negative integer, found {t:?}"))))
                .collect()
        };
        match keyword {
            "v" => {
                if n.is_some() {
                    return Err(err(line_no, kcol, "duplicate `v` line".into()));
                }
                let v = nums(&tokens[1..])?;
                if v.len() != 1 {
                    return Err(err(line_no, kcol, "`v` takes exactly one count".into()));
                }
                n = Some(v[0]);
            }
            "e" => {
                let Some(nv) = n else { return Err(err(line_no, kcol, "`e` before `v`".into())) };
                let v = nums(&tokens[1..])?;
                if v.len() != 2 {
                    return Err(err(line_no, kcol, "`e` takes two vertex ids".into()));
                }
                for (k, &x) in v.iter().enumerate() {
                    if x >= nv {
                        return Err(err(line_no, tokens[k + 1].0, format!("vertex {x} out of range 0..{nv}")));
                    }
                }
                edges.push((v[0], v[1]));
            }
            "gen" => {
                let Some(nv) = n else { return Err(err(line_no, kcol, "`gen` before `v`".into())) };
                let v = nums(&tokens[1..])?;
                if v.len() != nv {
                    return Err(err(line_no, kcol, format!("`gen` needs {nv} images, found {}", v.len())));
                }
                gens.push(v);
            }
            other => return Err(err(line_no, kcol, format!("unknown keyword {other:?}"))),
        }
    }
    let n = n.ok_or_else(|| err(1, 1, "missing `v <n>` line".into()))?;
    Ok((FiniteMetricGraph::from_edges(n, &edges)?, gens))
}
