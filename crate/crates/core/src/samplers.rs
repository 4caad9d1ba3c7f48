//! Exact uniform (weighted) spanning tree samplers and the enumeration oracle.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, UnionFind, Vertex};
use crate::rng::{self, Rng};
use crate::spectral::{laplacian_pinv, SpectralContext};

/// A sampled tree as the sorted ids of its edges.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeSample {
    pub edges: Vec<EdgeId>,
    pub walk_steps: u64,
    pub seed: u64,
}

/// Weighted random-walk steps over non-loop edges.
#[derive(Clone, Debug)]
pub struct Walker {
    nbrs: Vec<Vec<(Vertex, EdgeId)>>,
    cum: Vec<Vec<f64>>,
}

impl Walker {
    pub fn new(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut nbrs = vec![Vec::new(); n];
        let mut cum: Vec<Vec<f64>> = vec![Vec::new(); n];
        for e in g.non_loop_edges() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                let prev = cum[a].last().copied().unwrap_or(0.0);
                cum[a].push(prev + e.conductance);
                nbrs[a].push((b, e.id));
            }
        }
        Walker { nbrs, cum }
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.nbrs[v].len()
    }

    /// One step from `v`. Panics if `v` has no non-loop edge.
    pub fn step(&self, v: Vertex, rng: &mut Rng) -> (Vertex, EdgeId) {
        let cum = &self.cum[v];
        let x = rng.gen::<f64>() * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c <= x).min(cum.len() - 1);
        self.nbrs[v][i]
    }
}

fn check_walkable(g: &Graph) -> Result<()> {
    if g.vertex_count() < 1 || !g.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(())
}

pub fn aldous_broder(g: &Graph, seed: u64) -> Result<TreeSample> {
    check_walkable(g)?;
    let mut rng = rng::from_seed(seed);
    let walker = Walker::new(g);
    let n = g.vertex_count();
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut remaining = n - 1;
    let mut v = 0;
    let mut steps = 0u64;
    let mut edges = Vec::with_capacity(n - 1);
    while remaining > 0 {
        let (w, e) = walker.step(v, &mut rng);
        steps += 1;
        if !visited[w] {
            visited[w] = true;
            remaining -= 1;
            edges.push(e);
        }
        v = w;
    }
    edges.sort_unstable();
    Ok(TreeSample { edges, walk_steps: steps, seed })
}

/// Loop-erased random walks into a tree rooted at vertex 0.
pub fn wilson(g: &Graph, seed: u64) -> Result<TreeSample> {
    check_walkable(g)?;
    let mut rng = rng::from_seed(seed);
    let walker = Walker::new(g);
    let n = g.vertex_count();
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut next: Vec<Option<(Vertex, EdgeId)>> = vec![None; n];
    let mut steps = 0u64;
    let mut edges = Vec::with_capacity(n - 1);
    for start in 1..n {
        let mut u = start;
        while !in_tree[u] {
            let step = walker.step(u, &mut rng);
            steps += 1;
            next[u] = Some(step);
            u = step.0;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            let (w, e) = next[u].expect("walk visited u");
            edges.push(e);
            u = w;
        }
    }
    edges.sort_unstable();
    Ok(TreeSample { edges, walk_steps: steps, seed })
}

/// Decides edges one by one, contracting each with probability equal to its
/// leverage in the current minor, in the graph's edge order.
pub fn leverage_chain(g: &Graph, seed: u64) -> Result<TreeSample> {
    leverage_chain_ordered(g, &g.edge_ids(), seed)
}

/// Leverage chain visiting edges in `order`, which must be a permutation of the edge ids.
pub fn leverage_chain_ordered(g: &Graph, order: &[EdgeId], seed: u64) -> Result<TreeSample> {
    check_walkable(g)?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    let mut ids = g.edge_ids();
    ids.sort_unstable();
    if sorted != ids {
        return Err(Error::Invalid("order must list every edge exactly once".into()));
    }
    let mut rng = rng::from_seed(seed);
    let n = g.vertex_count();
    let mut m = laplacian_pinv(g)?;
    let mut uf = UnionFind::new(n);
    let rebuild_every = (g.edge_count() as f64).sqrt().ceil().max(1.0) as usize;
    let mut contracted = Vec::new();
    let mut deleted = Vec::new();
    for (step, &id) in order.iter().enumerate() {
        if step > 0 && step % rebuild_every == 0 {
            m = lifted_pinv(g, &contracted, &deleted)?;
        }
        let e = g.try_edge(id)?;
        if uf.find(e.u) == uf.find(e.v) {
            deleted.push(id);
            continue;
        }
        let mut lev = e.conductance * quad(&m, e.u, e.v);
        if !(-1e-9..=1.0 + 1e-9).contains(&lev) {
            m = lifted_pinv(g, &contracted, &deleted)?;
            lev = e.conductance * quad(&m, e.u, e.v);
            if !(-1e-9..=1.0 + 1e-9).contains(&lev) {
                return Err(Error::Numerical(format!("leverage {lev} out of range after rebuild")));
            }
        }
        let lev = lev.clamp(0.0, 1.0);
        let take = lev > 1.0 - 1e-12 || (lev >= 1e-12 && rng.gen::<f64>() < lev);
        let bm: Vec<f64> = (0..n).map(|x| m[(x, e.u)] - m[(x, e.v)]).collect();
        let q = bm[e.u] - bm[e.v];
        let denom = if take { -q } else { e.resistance() - q };
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += bm[i] * bm[j] / denom;
            }
        }
        if take {
            uf.union(e.u, e.v);
            contracted.push(id);
        } else {
            deleted.push(id);
        }
    }
    contracted.sort_unstable();
    if contracted.len() + 1 != n {
        return Err(Error::Numerical("leverage chain did not produce a spanning tree".into()));
    }
    Ok(TreeSample { edges: contracted, walk_steps: 0, seed })
}

fn quad(m: &DMatrix<f64>, u: Vertex, v: Vertex) -> f64 {
    m[(u, u)] + m[(v, v)] - m[(u, v)] - m[(v, u)]
}

/// Pseudoinverse of the current minor expressed in the original vertex coordinates.
fn lifted_pinv(g: &Graph, contracted: &[EdgeId], deleted: &[EdgeId]) -> Result<DMatrix<f64>> {
    let (h, map) = g.condition(contracted, deleted)?;
    let p = laplacian_pinv(&h)?;
    let n = g.vertex_count();
    Ok(DMatrix::from_fn(n, n, |i, j| p[(map.vertex_map[i], map.vertex_map[j])]))
}

/// Exact tree distribution: each tree (sorted edge ids) with its probability.
#[derive(Clone, Debug)]
pub struct TreeDistribution {
    pub probabilities: BTreeMap<Vec<EdgeId>, f64>,
    pub total_weight: f64,
}

impl TreeDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probability(&self, tree: &[EdgeId]) -> f64 {
        self.probabilities.get(tree).copied().unwrap_or(0.0)
    }

    /// Probability that `e` is in the tree.
    pub fn marginal(&self, e: EdgeId) -> f64 {
        self.probabilities.iter().filter(|(t, _)| t.binary_search(&e).is_ok()).map(|(_, p)| p).sum()
    }
}

pub const ENUMERATION_CAP: usize = 10_000_000;

/// Enumerates every spanning tree, cross-checked against the Matrix-Tree determinant.
pub fn enumerate_trees(g: &Graph) -> Result<TreeDistribution> {
    check_walkable(g)?;
    let n = g.vertex_count();
    let edges: Vec<(Vertex, Vertex, f64, EdgeId)> = g.non_loop_edges().map(|e| (e.u, e.v, e.conductance, e.id)).collect();
    let mut out: Vec<(Vec<EdgeId>, f64)> = Vec::new();
    let mut uf = RollbackUnionFind::new(n);
    let mut chosen = Vec::with_capacity(n);
    enumerate_rec(&edges, 0, n, &mut uf, &mut chosen, 1.0, &mut out)?;
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    let det = matrix_tree_weight(g)?;
    let (lo, hi) = edges.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.2), hi.max(e.2)));
    // The determinant loses relative accuracy in proportion to the conductance spread.
    let tol = 1e-6f64.max(f64::EPSILON * n as f64 * hi / lo);
    if ((total - det) / det).abs() > tol {
        return Err(Error::Numerical(format!("enumerated weight {total} disagrees with determinant {det}")));
    }
    let probabilities = out
        .into_iter()
        .map(|(mut t, w)| {
            t.sort_unstable();
            (t, w / total)
        })
        .collect();
    Ok(TreeDistribution { probabilities, total_weight: total })
}

fn enumerate_rec(
    edges: &[(Vertex, Vertex, f64, EdgeId)],
    i: usize,
    n: usize,
    uf: &mut RollbackUnionFind,
    chosen: &mut Vec<EdgeId>,
    weight: f64,
    out: &mut Vec<(Vec<EdgeId>, f64)>,
) -> Result<()> {
    if chosen.len() + 1 == n {
        if out.len() >= ENUMERATION_CAP {
            return Err(Error::EnumerationCap(ENUMERATION_CAP));
        }
        out.push((chosen.clone(), weight));
        return Ok(());
    }
    if i == edges.len() || chosen.len() + (edges.len() - i) + 1 < n {
        return Ok(());
    }
    let (u, v, c, id) = edges[i];
    if uf.union(u, v) {
        chosen.push(id);
        enumerate_rec(edges, i + 1, n, uf, chosen, weight * c, out)?;
        chosen.pop();
        uf.rollback();
    }
    if still_spanning(edges, i + 1, n, uf) {
        enumerate_rec(edges, i + 1, n, uf, chosen, weight, out)?;
    }
    Ok(())
}

fn still_spanning(edges: &[(Vertex, Vertex, f64, EdgeId)], from: usize, n: usize, uf: &RollbackUnionFind) -> bool {
    let mut all = UnionFind::new(n);
    let mut comps = n;
    for v in 0..n {
        if all.union(v, uf.root(v)) {
            comps -= 1;
        }
    }
    for &(u, v, _, _) in &edges[from..] {
        if all.union(u, v) {
            comps -= 1;
        }
    }
    comps == 1
}

struct RollbackUnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    history: Vec<(usize, usize)>,
}

impl RollbackUnionFind {
    fn new(n: usize) -> Self {
        RollbackUnionFind { parent: (0..n).collect(), size: vec![1; n], history: Vec::new() }
    }

    fn root(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.root(a), self.root(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.history.push((ra, rb));
        true
    }

    fn rollback(&mut self) {
        let (ra, rb) = self.history.pop().expect("rollback without union");
        self.parent[rb] = rb;
        self.size[ra] -= self.size[rb];
    }
}

/// Total tree weight from the Matrix-Tree theorem.
pub fn matrix_tree_weight(g: &Graph) -> Result<f64> {
    let n = g.vertex_count();
    if n == 1 {
        return Ok(1.0);
    }
    let l = g.laplacian();
    let reduced = l.view((0, 0), (n - 1, n - 1)).into_owned();
    let chol = reduced.cholesky().ok_or(Error::Disconnected)?;
    Ok(chol.l().diagonal().iter().map(|d| d * d).product())
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeMarginal {
    pub edge: EdgeId,
    pub expected: f64,
    pub observed: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalReport {
    pub trials: usize,
    pub edges: Vec<EdgeMarginal>,
    pub max_abs_z: f64,
    pub pass: bool,
}

/// Compares empirical edge frequencies with `c_e · Reff(e)`; passes when every |z| ≤ 4.
pub fn marginal_check<F>(g: &Graph, sampler: F, trials: usize, seed: u64) -> Result<MarginalReport>
where
    F: Fn(&Graph, u64) -> Result<TreeSample> + Sync,
{
    let ctx = SpectralContext::new(g)?;
    let samples = crate::harness::stats::run_trials(trials, seed, |s| sampler(g, s))?;
    let mut counts: BTreeMap<EdgeId, u64> = BTreeMap::new();
    for t in &samples {
        for &e in &t.edges {
            *counts.entry(e).or_default() += 1;
        }
    }
    let nf = trials as f64;
    let edges: Vec<EdgeMarginal> = ctx
        .leverages()
        .into_iter()
        .map(|(edge, p)| {
            let observed = counts.get(&edge).copied().unwrap_or(0) as f64 / nf;
            let var = p * (1.0 - p) / nf;
            let z = if var > 1e-15 {
                (observed - p) / var.sqrt()
            } else if (observed - p).abs() < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            };
            EdgeMarginal { edge, expected: p, observed, z }
        })
        .collect();
    let max_abs_z = edges.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    Ok(MarginalReport { trials, edges, max_abs_z, pass: max_abs_z <= 4.0 })
}
