//! Low-boundary clusters and well-separated covering families.
//!
//! Distances come from a [`ResistanceEmbedding`]; nearest-neighbour queries are
//! exact scans over the candidate set. Cluster diameters are certified with
//! exact effective resistances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{mask, Graph, Vertex};
use crate::schur::schur_complement;
use crate::spectral::{ResistanceEmbedding, SpectralContext};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub vertices: Vec<Vertex>,
    pub center: Vertex,
    /// Exact effective-resistance diameter.
    pub diameter: f64,
}

impl Cluster {
    pub fn contains(&self, v: Vertex) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Family {
    pub clusters: Vec<Cluster>,
    /// Upper bound on the diameter of every cluster.
    pub radius: f64,
}

impl Family {
    /// Smallest cross-cluster resistance divided by the radius.
    pub fn separation(&self, ctx: &SpectralContext) -> f64 {
        min_cross_resistance(ctx, &self.clusters) / self.radius
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Community {
    pub families: Vec<Family>,
    pub radius: f64,
    pub gamma: f64,
    pub family_cap: f64,
    pub family_cap_exceeded: bool,
}

impl Community {
    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.families.iter().flat_map(|f| f.clusters.iter())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CommunityConfig {
    /// Required separation between clusters of one family, in units of its radius.
    pub gamma_ds: f64,
    pub z0: usize,
    pub max_levels: usize,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig { gamma_ds: 8.0, z0: 3, max_levels: 64 }
    }
}

impl CommunityConfig {
    /// Per-level radius growth that yields `gamma_ds` separation.
    pub fn growth(&self) -> f64 {
        12.0 * (self.gamma_ds + 1.0)
    }
}

fn min_cross_resistance(ctx: &SpectralContext, clusters: &[Cluster]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in clusters.iter().enumerate() {
        for b in &clusters[i + 1..] {
            for &x in &a.vertices {
                for &y in &b.vertices {
                    best = best.min(ctx.resistance(x, y));
                }
            }
        }
    }
    best
}

pub fn diameter(ctx: &SpectralContext, set: &[Vertex]) -> f64 {
    let mut d = 0.0f64;
    for (i, &x) in set.iter().enumerate() {
        for &y in &set[i + 1..] {
            d = d.max(ctx.resistance(x, y));
        }
    }
    d
}

#[derive(Copy, Clone, PartialEq)]
struct State(f64, Vertex);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grows a ball around `center` inside `x_set` and cuts it where the boundary
/// conductance is smallest among prefixes lying in the annulus `(r1, r2]`.
pub fn ball_grow(ctx: &SpectralContext, emb: &ResistanceEmbedding, center: Vertex, x_set: &[Vertex], r1: f64, r2: f64) -> Result<Cluster> {
    if !(r1 < r2) {
        return Err(Error::Invalid(format!("ball_grow needs r1 < r2, got {r1} >= {r2}")));
    }
    let g = ctx.graph();
    let n = g.vertex_count();
    let in_x = mask(n, x_set);
    if !in_x.get(center).copied().unwrap_or(false) {
        return Err(Error::Invalid("center must lie in the candidate set".into()));
    }
    let adj = g.adjacency();
    let mut dist = vec![f64::INFINITY; n];
    for &x in x_set {
        dist[x] = emb.dist2(center, x);
    }
    dist[center] = 0.0;
    let mut heap: BinaryHeap<State> = x_set.iter().map(|&x| State(dist[x], x)).collect();
    let mut done = vec![false; n];
    while let Some(State(d, x)) = heap.pop() {
        if done[x] || d > dist[x] {
            continue;
        }
        done[x] = true;
        for &(y, _) in &adj[x] {
            if in_x[y] && !done[y] {
                let nd = d + emb.dist2(x, y);
                if nd < dist[y] {
                    dist[y] = nd;
                    heap.push(State(nd, y));
                }
            }
        }
    }
    let mut order: Vec<Vertex> = x_set.to_vec();
    order.sort_unstable();
    order.dedup();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let pos = order.iter().position(|&v| v == center).expect("center in order");
    order.swap(0, pos);
    order[1..].sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));

    let mut inside = vec![false; n];
    let mut boundary = 0.0;
    let mut best: Option<(f64, usize)> = None;
    for (i, &x) in order.iter().enumerate() {
        inside[x] = true;
        for &(y, ei) in &adj[x] {
            let c = g.edges()[ei].conductance;
            if inside[y] {
                boundary -= c;
            } else {
                boundary += c;
            }
        }
        let next_beyond_r1 = order.get(i + 1).is_none_or(|&y| dist[y] > r1);
        if next_beyond_r1 && dist[x] <= r2 {
            let b = boundary.max(0.0);
            if best.is_none_or(|(bb, _)| b < bb) {
                best = Some((b, i));
            }
        }
    }
    let cut = best.map_or(0, |(_, i)| i);
    let mut vertices = order[..=cut].to_vec();
    vertices.sort_unstable();
    let diameter = diameter(ctx, &vertices);
    Ok(Cluster { vertices, center, diameter })
}

/// Checks the four guarantees of [`ball_grow`] with exact resistances.
#[derive(Clone, Debug, Serialize)]
pub struct BallGrowCheck {
    pub within_candidates: bool,
    pub contains_close: bool,
    pub diameter_ok: bool,
    pub boundary_ok: bool,
}

impl BallGrowCheck {
    pub fn all(&self) -> bool {
        self.within_candidates && self.contains_close && self.diameter_ok && self.boundary_ok
    }
}

pub fn check_ball_grow(ctx: &SpectralContext, cluster: &Cluster, x_set: &[Vertex], r1: f64, r2: f64) -> BallGrowCheck {
    let g = ctx.graph();
    let in_x = mask(g.vertex_count(), x_set);
    let in_c = mask(g.vertex_count(), &cluster.vertices);
    let within_candidates = cluster.vertices.iter().all(|&v| in_x[v]);
    let contains_close = x_set.iter().all(|&x| in_c[x] || ctx.resistance(cluster.center, x) > 2.0 * r1 / 3.0);
    let diameter_ok = cluster.diameter <= 4.0 * r2 * (1.0 + 1e-9);
    let inner = g.induced_edges(x_set).len() as f64;
    let shared: f64 = g.non_loop_edges().filter(|e| in_c[e.u] != in_c[e.v] && in_x[e.u] != in_x[e.v]).map(|e| e.conductance).sum();
    let boundary = g.boundary_conductance(&cluster.vertices);
    let boundary_ok = boundary <= 2.0 * inner / (r2 - r1) + shared + 1e-9 * (1.0 + boundary);
    BallGrowCheck { within_candidates, contains_close, diameter_ok, boundary_ok }
}

/// Covers `x_set` by families of well-separated, low-boundary clusters of radius about `r`.
pub fn covering_community(ctx: &SpectralContext, emb: &ResistanceEmbedding, x_set: &[Vertex], r: f64, cfg: &CommunityConfig) -> Result<Community> {
    if x_set.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("radius must be positive, got {r}")));
    }
    let g = ctx.graph();
    let n = g.vertex_count();
    let m = g.non_loop_count().max(1) as f64;
    let gamma = cfg.growth();
    let ratio = m.powf(1.0 / cfg.z0 as f64);
    let mut xs = x_set.to_vec();
    xs.sort_unstable();
    xs.dedup();
    let mut uncovered = mask(n, &xs);
    let mut families = Vec::new();
    while xs.iter().any(|&v| uncovered[v]) {
        let mut open = uncovered.clone();
        let mut levels: BTreeMap<usize, Vec<Cluster>> = BTreeMap::new();
        while let Some(v0) = xs.iter().copied().find(|&v| open[v]) {
            let mut c = Cluster { vertices: vec![v0], center: v0, diameter: 0.0 };
            let mut c_outer = xs.clone();
            let mut i = 0;
            while (g.touching_count(&c_outer) as f64) > ratio * g.touching_count(&c.vertices) as f64 && i < cfg.max_levels {
                let scale = r * gamma.powi(i as i32);
                c_outer = xs.iter().copied().filter(|&v| emb.dist2(v0, v) <= scale * gamma).collect();
                let inner: Vec<Vertex> = c_outer.iter().copied().filter(|&v| emb.dist2(v0, v) <= 2.0 / 3.0 * scale * gamma).collect();
                c = ball_grow(ctx, emb, v0, &inner, 1.5 * scale, 2.0 * scale)?;
                i += 1;
            }
            for &v in &c_outer {
                open[v] = false;
            }
            for &v in &c.vertices {
                uncovered[v] = false;
                open[v] = false;
            }
            levels.entry(i).or_default().push(c);
        }
        for (i, clusters) in levels {
            let radius = if i == 0 { r } else { 8.0 * r * gamma.powi(i as i32 - 1) };
            families.push(Family { clusters, radius });
        }
    }
    let family_cap = 2.0 * cfg.z0 as f64 * ratio;
    let family_cap_exceeded = families.len() as f64 > family_cap;
    Ok(Community { families, radius: r, gamma: cfg.gamma_ds, family_cap, family_cap_exceeded })
}

/// True when every pair of vertices in different clusters is at resistance at least `gamma · radius`.
pub fn well_separated_check(ctx: &SpectralContext, fam: &Family, gamma: f64) -> bool {
    min_cross_resistance(ctx, &fam.clusters) >= gamma * fam.radius
}

/// `Σ c_e · Reff(e)` over edges of `Schur(G, ∪C)` joining different clusters.
pub fn intercluster_leverage_sum(ctx: &SpectralContext, fam: &Family) -> Result<f64> {
    let g = ctx.graph();
    let mut owner = vec![usize::MAX; g.vertex_count()];
    let mut union = Vec::new();
    for (i, c) in fam.clusters.iter().enumerate() {
        for &v in &c.vertices {
            if owner[v] != usize::MAX {
                return Err(Error::Overlap);
            }
            owner[v] = i;
            union.push(v);
        }
    }
    let h = schur_complement(g, &union)?;
    Ok(h.graph
        .non_loop_edges()
        .map(|e| (h.kept[e.u], h.kept[e.v], e.conductance))
        .filter(|&(a, b, _)| owner[a] != owner[b])
        .map(|(a, b, c)| c * ctx.resistance(a, b))
        .sum())
}

/// Whether every vertex of `x_set` lies in some cluster of the community.
pub fn covers(community: &Community, x_set: &[Vertex]) -> bool {
    x_set.iter().all(|&v| community.clusters().any(|c| c.contains(v)))
}

pub fn boundary_size(g: &Graph, c: &Cluster) -> usize {
    g.touching_count(&c.vertices)
}
