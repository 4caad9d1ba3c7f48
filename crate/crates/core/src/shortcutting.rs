//! Shortcutters: regions around a core from which the exit edge of a random
//! walk is sampled in one step instead of simulated.
//!
//! The exit distribution from `v` is computed exactly from the Green's function
//! of the region. Sampling uses Propp's trick: the interval boundaries are
//! perturbed by up to half the current precision, and the precision is halved
//! whenever the uniform draw lands too close to a perturbed boundary, so the
//! outcome always equals the exact one.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::Serialize;

use crate::clustering::{Cluster, Family};
use crate::error::{Error, Result};
use crate::graph::{mask, EdgeId, Graph, Vertex};
use crate::rng::{self, Rng};
use crate::samplers::Walker;
use crate::spectral::SpectralContext;

/// Precision below which interval resolution gives up.
pub const PRECISION_FLOOR: f64 = 1e-15;

/// `Pr_v[walk hits a set in `ones` before a set in `zeros`]` for every vertex.
pub fn hit_probabilities(g: &Graph, ones: &[Vertex], zeros: &[Vertex]) -> Result<Vec<f64>> {
    let n = g.vertex_count();
    if ones.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let mut value = vec![None; n];
    for &v in zeros {
        value[v] = Some(0.0);
    }
    for &v in ones {
        if value[v].is_some() {
            return Err(Error::Overlap);
        }
        value[v] = Some(1.0);
    }
    let free: Vec<Vertex> = (0..n).filter(|&v| value[v].is_none()).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        index[v] = i;
    }
    let k = free.len();
    let mut out: Vec<f64> = value.iter().map(|x| x.unwrap_or(0.0)).collect();
    if k == 0 {
        return Ok(out);
    }
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for e in g.non_loop_edges() {
        let c = e.conductance;
        for (x, y) in [(e.u, e.v), (e.v, e.u)] {
            if index[x] == usize::MAX {
                continue;
            }
            a[(index[x], index[x])] += c;
            match value[y] {
                Some(val) => rhs[index[x]] += c * val,
                None => a[(index[x], index[y])] -= c,
            }
        }
    }
    let sol = a.cholesky().ok_or(Error::Disconnected)?.solve(&rhs);
    for (i, &v) in free.iter().enumerate() {
        out[v] = sol[i].clamp(0.0, 1.0);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSet {
    pub vertices: Vec<Vertex>,
    pub p: f64,
    pub target: usize,
}

/// Vertices from which the walk reaches cluster `target` before any other cluster
/// of `fam` with probability at least `1 − p`.
pub fn level_set(g: &Graph, fam: &Family, target: usize, p: f64) -> Result<LevelSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Invalid(format!("level p must lie in (0, 1], got {p}")));
    }
    let c = fam.clusters.get(target).ok_or_else(|| Error::Invalid(format!("no cluster {target}")))?;
    let others: Vec<Vertex> = fam.clusters.iter().enumerate().filter(|&(i, _)| i != target).flat_map(|(_, c)| c.vertices.iter().copied()).collect();
    let prob = if others.is_empty() { vec![1.0; g.vertex_count()] } else { hit_probabilities(g, &c.vertices, &others)? };
    let vertices = (0..g.vertex_count()).filter(|&v| prob[v] >= 1.0 - p - 1e-12).collect();
    Ok(LevelSet { vertices, p, target })
}

/// Number of bipartitions used for `k` clusters, which also serves as `log k`.
pub fn partition_count(k: usize) -> usize {
    if k <= 1 {
        0
    } else {
        (usize::BITS - (k - 1).leading_zeros()) as usize
    }
}

/// The level `1 / (8 log k)` used by the Voronoi construction.
pub fn voronoi_level(k: usize) -> f64 {
    1.0 / (8.0 * partition_count(k).max(1) as f64)
}

#[derive(Clone, Debug)]
struct ExitTable {
    targets: Vec<Vertex>,
    target_probs: Vec<f64>,
    boundary: Vec<(EdgeId, Vertex)>,
    boundary_probs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Shortcutter {
    pub core: Cluster,
    /// Sorted vertex set of the region; always contains the core.
    pub region: Vec<Vertex>,
    /// Vertices whose first visit ends a shortcut early.
    pub deleted: Vec<Vertex>,
    pub epsilon_d: f64,
    pub recomputes: u64,
    exits: HashMap<Vertex, ExitTable>,
}

impl Shortcutter {
    pub fn new(core: Cluster, region: Vec<Vertex>) -> Self {
        Self::with_deleted(core, region, Vec::new())
    }

    pub fn with_deleted(core: Cluster, mut region: Vec<Vertex>, mut deleted: Vec<Vertex>) -> Self {
        region.extend(core.vertices.iter().copied());
        region.sort_unstable();
        region.dedup();
        deleted.sort_unstable();
        deleted.dedup();
        deleted.retain(|v| region.binary_search(v).is_ok());
        let epsilon_d = 1.0 / deleted.len().max(1) as f64;
        Shortcutter { core, region, deleted, epsilon_d, recomputes: 0, exits: HashMap::new() }
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.region.binary_search(&v).is_ok()
    }

    /// `|E(S) ∪ ∂S|` in `g`.
    pub fn size(&self, g: &Graph) -> usize {
        g.touching_count(&self.region)
    }

    fn exit_table(&mut self, g: &Graph, v: Vertex) -> Result<&ExitTable> {
        if !self.exits.contains_key(&v) {
            let t = compute_exits(g, &self.region, &self.deleted, v)?;
            self.exits.insert(v, t);
        }
        Ok(&self.exits[&v])
    }
}

fn compute_exits(g: &Graph, region: &[Vertex], deleted: &[Vertex], v: Vertex) -> Result<ExitTable> {
    let n = g.vertex_count();
    let in_region = mask(n, region);
    let mut is_target = mask(n, deleted);
    is_target[v] = false;
    let inner: Vec<Vertex> = region.iter().copied().filter(|&x| !is_target[x]).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &x) in inner.iter().enumerate() {
        index[x] = i;
    }
    let k = inner.len();
    let mut a = DMatrix::zeros(k, k);
    for e in g.non_loop_edges() {
        for (x, y) in [(e.u, e.v), (e.v, e.u)] {
            if index[x] != usize::MAX {
                a[(index[x], index[x])] += e.conductance;
                if index[y] != usize::MAX {
                    a[(index[x], index[y])] -= e.conductance;
                }
            }
        }
    }
    let mut rhs = DVector::zeros(k);
    rhs[index[v]] = 1.0;
    let green = a.cholesky().ok_or_else(|| Error::Numerical("region has no exit".into()))?.solve(&rhs);
    let mut target_mass: HashMap<Vertex, f64> = HashMap::new();
    let mut boundary = Vec::new();
    let mut boundary_probs = Vec::new();
    for e in g.non_loop_edges() {
        for (x, y) in [(e.u, e.v), (e.v, e.u)] {
            if index[x] == usize::MAX || index[y] != usize::MAX {
                continue;
            }
            let p = green[index[x]] * e.conductance;
            if in_region[y] {
                *target_mass.entry(y).or_default() += p;
            } else {
                boundary.push((e.id, y));
                boundary_probs.push(p);
            }
        }
    }
    let mut targets: Vec<Vertex> = target_mass.keys().copied().collect();
    targets.sort_unstable();
    let target_probs = targets.iter().map(|t| target_mass[t]).collect();
    Ok(ExitTable { targets, target_probs, boundary, boundary_probs })
}

/// Index of the interval of `probs` containing a uniform draw, resolved with
/// perturbed boundaries. Returns the index and the number of refinements.
fn propp_select(probs: &[f64], eps: &mut f64, rng: &mut Rng) -> Result<(usize, u32)> {
    let total: f64 = probs.iter().sum();
    let mut cum = Vec::with_capacity(probs.len().saturating_sub(1));
    let mut acc = 0.0;
    for p in &probs[..probs.len().saturating_sub(1)] {
        acc += p / total;
        cum.push(acc);
    }
    let draw: f64 = rng.gen();
    let mut perturbed: Vec<f64> = cum.iter().map(|&r| r + 0.5 * *eps * rng.gen_range(-1.0..=1.0)).collect();
    let mut refinements = 0;
    while perturbed.iter().any(|&r| (draw - r).abs() < *eps) {
        *eps /= 2.0;
        if *eps < PRECISION_FLOOR {
            return Err(Error::PrecisionUnderflow);
        }
        refinements += 1;
        perturbed = cum.iter().map(|&r| r + 0.5 * *eps * rng.gen_range(-1.0..=1.0)).collect();
    }
    let idx = perturbed.iter().filter(|&&r| r <= draw).count();
    Ok((idx, refinements))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShortcutOutcome {
    pub edge: EdgeId,
    /// Where the walk continues.
    pub to: Vertex,
    pub hit_deleted: bool,
    pub work: u64,
    pub recomputes: u32,
}

/// Samples where a walk from `v` first leaves the region (or first reaches a
/// deleted vertex). `None` when the region has no exit at all.
pub fn shortcut_step(g: &Graph, sc: &mut Shortcutter, v: Vertex, rng: &mut Rng) -> Result<Option<ShortcutOutcome>> {
    if !sc.core.contains(v) {
        return Err(Error::Invalid(format!("vertex {v} is not in the shortcutter core")));
    }
    let has_exit = sc.region.len() < g.vertex_count() || sc.deleted.iter().any(|&x| x != v);
    if !has_exit {
        return Ok(None);
    }
    let solve_cost = sc.size(g) as u64;
    let table = sc.exit_table(g, v)?.clone();
    let boundary_mass: f64 = table.boundary_probs.iter().sum();
    let mut outcome_probs = table.target_probs.clone();
    outcome_probs.push(boundary_mass);
    let mut eps = sc.epsilon_d;
    let (pick, r1) = propp_select(&outcome_probs, &mut eps, rng)?;
    sc.epsilon_d = eps;
    let mut work = 1;
    let mut recomputes = r1;
    let result = if pick < table.targets.len() {
        let x = table.targets[pick];
        let edge = g.non_loop_edges().filter(|e| e.touches(x)).min_by_key(|e| (e.u.min(e.v), e.u.max(e.v), e.id)).expect("deleted vertex has an edge");
        ShortcutOutcome { edge: edge.id, to: x, hit_deleted: true, work, recomputes }
    } else {
        let mut eps2 = 1.0 / (4.0 * table.boundary.len() as f64);
        let (j, r2) = propp_select(&table.boundary_probs, &mut eps2, rng)?;
        recomputes += r2;
        work += solve_cost * (1 + r2 as u64);
        let (edge, to) = table.boundary[j];
        ShortcutOutcome { edge, to, hit_deleted: false, work, recomputes }
    };
    sc.recomputes += recomputes as u64;
    Ok(Some(result))
}

/// One shortcutter per cluster, each the intersection of bipartition level sets.
pub fn voronoi_shortcutters(g: &Graph, fam: &Family) -> Result<Vec<Shortcutter>> {
    let k = fam.clusters.len();
    let n = g.vertex_count();
    if k == 0 {
        return Err(Error::EmptySet);
    }
    let bits = partition_count(k);
    let p = voronoi_level(k);
    let mut regions = vec![vec![true; n]; k];
    for i in 0..bits {
        let side = |j: usize| (j >> i) & 1;
        let zero: Vec<Vertex> = fam.clusters.iter().enumerate().filter(|&(j, _)| side(j) == 0).flat_map(|(_, c)| c.vertices.iter().copied()).collect();
        let one: Vec<Vertex> = fam.clusters.iter().enumerate().filter(|&(j, _)| side(j) == 1).flat_map(|(_, c)| c.vertices.iter().copied()).collect();
        let to_zero = hit_probabilities(g, &zero, &one)?;
        for (j, region) in regions.iter_mut().enumerate() {
            for v in 0..n {
                let pr = if side(j) == 0 { to_zero[v] } else { 1.0 - to_zero[v] };
                if pr < 1.0 - p - 1e-12 {
                    region[v] = false;
                }
            }
        }
    }
    Ok(fam.clusters.iter().zip(regions).map(|(c, r)| Shortcutter::new(c.clone(), (0..n).filter(|&v| r[v]).collect())).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub lower_ok: Vec<bool>,
    pub upper_ok: Vec<bool>,
    pub disjoint: bool,
}

impl SandwichReport {
    pub fn pass(&self) -> bool {
        self.disjoint && self.lower_ok.iter().chain(&self.upper_ok).all(|&b| b)
    }
}

/// Checks `S_F(1/(8 log k), C) ⊆ S_C ⊆ S_F(1/8, C)` and pairwise disjointness.
pub fn voronoi_sandwich_check(g: &Graph, fam: &Family, shortcutters: &[Shortcutter]) -> Result<SandwichReport> {
    let k = fam.clusters.len();
    let (mut lower_ok, mut upper_ok) = (Vec::new(), Vec::new());
    for (j, sc) in shortcutters.iter().enumerate() {
        let lower = level_set(g, fam, j, voronoi_level(k))?;
        let upper = level_set(g, fam, j, 1.0 / 8.0)?;
        lower_ok.push(lower.vertices.iter().all(|v| sc.contains(*v)));
        upper_ok.push(sc.region.iter().all(|v| upper.vertices.binary_search(v).is_ok()));
    }
    let mut owner = vec![false; g.vertex_count()];
    let mut disjoint = true;
    if k > 1 {
        for sc in shortcutters {
            for &v in &sc.region {
                disjoint &= !owner[v];
                owner[v] = true;
            }
        }
    }
    Ok(SandwichReport { lower_ok, upper_ok, disjoint })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepAccounting {
    pub raw_steps: u64,
    pub shortcut_steps: u64,
    pub recomputes: u64,
    pub work: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialSample {
    /// Tree edges with both endpoints in the target set, sorted.
    pub edges: Vec<EdgeId>,
    pub accounting: StepAccounting,
}

/// Aldous–Broder walk that stops once `s_target` is covered, using a vertex's
/// shortcutter whenever every target vertex in its region has been visited.
pub fn partial_sample_shortcutted(g: &Graph, shortcutters: &mut [Shortcutter], s_target: &[Vertex], seed: u64) -> Result<PartialSample> {
    let enabled = vec![true; shortcutters.len()];
    let mut rng = rng::from_seed(seed);
    partial_sample_with(g, shortcutters, &enabled, s_target, &mut rng)
}

pub(crate) fn partial_sample_with(g: &Graph, shortcutters: &mut [Shortcutter], enabled: &[bool], s_target: &[Vertex], rng: &mut Rng) -> Result<PartialSample> {
    let n = g.vertex_count();
    if s_target.is_empty() {
        return Err(Error::EmptySet);
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let in_s = mask(n, s_target);
    let mut owner = vec![None; n];
    let mut regions_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, sc) in shortcutters.iter().enumerate() {
        for &v in &sc.core.vertices {
            if owner[v].is_none() {
                owner[v] = Some(j);
            }
        }
        for &v in &sc.region {
            regions_of[v].push(j);
        }
    }
    let mut unvisited_in: Vec<usize> = shortcutters.iter().map(|sc| sc.region.iter().filter(|&&v| in_s[v]).count()).collect();
    let walker = Walker::new(g);
    let mut visited = vec![false; n];
    let mut remaining = s_target.iter().filter(|&&v| in_s[v]).count();
    let mut v = *s_target.iter().min().expect("nonempty");
    let mut acc = StepAccounting::default();
    let mut edges = Vec::new();
    let visit = |w: Vertex, visited: &mut Vec<bool>, unvisited_in: &mut Vec<usize>| -> bool {
        if in_s[w] && !visited[w] {
            visited[w] = true;
            for &j in &regions_of[w] {
                unvisited_in[j] -= 1;
            }
            true
        } else {
            false
        }
    };
    visit(v, &mut visited, &mut unvisited_in);
    remaining -= 1;
    while remaining > 0 {
        let mut moved = None;
        if let Some(j) = owner[v] {
            if enabled[j] && unvisited_in[j] == 0 {
                if let Some(out) = shortcut_step(g, &mut shortcutters[j], v, rng)? {
                    acc.shortcut_steps += 1;
                    acc.recomputes += out.recomputes as u64;
                    acc.work += out.work;
                    moved = Some((out.to, out.edge));
                }
            }
        }
        let (w, e) = match moved {
            Some(m) => m,
            None => {
                acc.raw_steps += 1;
                acc.work += 1;
                walker.step(v, rng)
            }
        };
        if visit(w, &mut visited, &mut unvisited_in) {
            remaining -= 1;
            let edge = g.try_edge(e)?;
            if in_s[edge.u] && in_s[edge.v] && edge.touches(w) {
                edges.push(e);
            }
        }
        v = w;
    }
    edges.sort_unstable();
    Ok(PartialSample { edges, accounting: acc })
}

pub fn accounting_csv(rows: &[StepAccounting]) -> String {
    let mut s = String::from("trial,raw_steps,shortcut_steps,recomputes\n");
    for (i, r) in rows.iter().enumerate() {
        s.push_str(&format!("{i},{},{},{}\n", r.raw_steps, r.shortcut_steps, r.recomputes));
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct WalkBoundReport {
    pub trials: usize,
    pub mean_crossings: f64,
    pub conductance: f64,
    pub radius: f64,
    pub log_n: f64,
    /// `mean_crossings / (c_f · r · ln n)`.
    pub ratio: f64,
    pub pass: bool,
}

/// Counts traversals of `f` (in its stored direction) made while its tail is
/// within resistance `r` of a not-yet-visited vertex of `s_set`, for walks
/// started at the tail of `f` and stopped once `s_set` is covered.
pub fn walk_bound_bench(g: &Graph, f: EdgeId, s_set: &[Vertex], r: f64, trials: usize, seed: u64) -> Result<WalkBoundReport> {
    let ctx = SpectralContext::new(g)?;
    let edge = g.try_edge(f)?.clone();
    if s_set.is_empty() {
        return Err(Error::EmptySet);
    }
    let walker = Walker::new(g);
    let mut rng = rng::from_seed(seed);
    let near: Vec<f64> = s_set.iter().map(|&s| ctx.resistance(edge.u, s)).collect();
    let mut total = 0u64;
    for _ in 0..trials {
        let mut visited = vec![false; g.vertex_count()];
        let mut pending = s_set.len();
        let mark = |w: Vertex, visited: &mut Vec<bool>, pending: &mut usize| {
            if !visited[w] {
                visited[w] = true;
                if s_set.contains(&w) {
                    *pending -= 1;
                }
            }
        };
        let mut v = edge.u;
        mark(v, &mut visited, &mut pending);
        while pending > 0 {
            let (w, e) = walker.step(v, &mut rng);
            if e == f && v == edge.u && w == edge.v {
                let close = s_set.iter().zip(&near).any(|(&s, &d)| !visited[s] && d <= r);
                if close {
                    total += 1;
                }
            }
            mark(w, &mut visited, &mut pending);
            v = w;
        }
    }
    let mean = total as f64 / trials as f64;
    let log_n = (g.vertex_count() as f64).ln();
    let ratio = if mean == 0.0 { 0.0 } else { mean / (edge.conductance * r * log_n) };
    Ok(WalkBoundReport { trials, mean_crossings: mean, conductance: edge.conductance, radius: r, log_n, ratio, pass: ratio <= 10.0 })
}

#[derive(Clone, Debug, Serialize)]
pub struct ShortcutBench {
    pub k: usize,
    pub raw_mean: f64,
    pub shortcut_mean: f64,
    pub ratio: f64,
    pub mean_recomputes: f64,
}

/// Escape from the middle of a `k`-vertex window of a path: raw steps versus
/// shortcut work.
pub fn path_shortcut_bench(k: usize, trials: usize, seed: u64) -> Result<ShortcutBench> {
    let g = crate::harness::graphs::path(k + 2);
    let mid = k.div_ceil(2);
    let region: Vec<Vertex> = (1..=k).collect();
    let core = Cluster { vertices: vec![mid], center: mid, diameter: 0.0 };
    let mut sc = Shortcutter::new(core, region);
    let walker = Walker::new(&g);
    let mut rng = rng::from_seed(seed);
    let (mut raw, mut short, mut rec) = (0u64, 0u64, 0u64);
    for _ in 0..trials {
        let mut v = mid;
        while (1..=k).contains(&v) {
            v = walker.step(v, &mut rng).0;
            raw += 1;
        }
        let out = shortcut_step(&g, &mut sc, mid, &mut rng)?.expect("window has exits");
        short += out.work;
        rec += out.recomputes as u64;
    }
    let t = trials as f64;
    let (raw_mean, shortcut_mean) = (raw as f64 / t, short as f64 / t);
    Ok(ShortcutBench { k, raw_mean, shortcut_mean, ratio: shortcut_mean / raw_mean, mean_recomputes: rec as f64 / t })
}
