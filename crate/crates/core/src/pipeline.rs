//! End-to-end samplers assembled from the other modules.
//!
//! [`exact_tree_sigma1`] repeatedly builds one level of shortcutters, picks the
//! parts whose shortcutters are nearly the largest, samples the tree on those
//! parts with a shortcutted walk, and conditions on the result. Once no part
//! has internal edges left, a plain Aldous–Broder walk finishes the tree.
//!
//! [`apx_tree`] buckets edges by resistance, samples exactly on the low
//! buckets with high-resistance edges removed, and conditions bucket by bucket.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::clustering::{covering_community, Cluster, CommunityConfig};
use crate::conditioning::TreeCoupledCoins;
use crate::error::{Error, Result};
use crate::fixing::{fix_conductance_ratio, fix_with, FixConfig};
use crate::graph::{is_spanning_tree, mask, EdgeId, Graph, Vertex};
use crate::rng;
use crate::samplers::{aldous_broder, enumerate_trees, leverage_chain, wilson, TreeDistribution, TreeSample};
use crate::schur::resistance_by_elimination;
use crate::shortcutting::{partial_sample_with, voronoi_shortcutters, Shortcutter, StepAccounting};
use crate::spectral::{jl_embed, SpectralContext};

#[derive(Clone, Debug, Serialize)]
pub struct PipelineConfig {
    /// Size bucketing exponent; `None` picks `round(log2 m)` so that `m^{1/σ₁} ≈ 2`.
    pub sigma1: Option<usize>,
    /// Conditioning vertices farther than this multiple of `√α · r_min` from a
    /// shortcutter's core are carved out of it.
    pub carve_radius_multiplier: f64,
    pub fix_epsilon: f64,
    pub seed: u64,
    pub community: CommunityConfig,
    /// Run the conductance repair audit after each round. It never changes the sample.
    pub fix_audit: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { sigma1: None, carve_radius_multiplier: 4.0, fix_epsilon: 0.25, seed: 0, community: CommunityConfig::default(), fix_audit: true }
    }
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig { seed, ..Default::default() }
    }

    pub fn sigma1_for(&self, m: usize) -> usize {
        self.sigma1.unwrap_or_else(|| (m.max(2) as f64).log2().round() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.sigma1 == Some(0) {
            return Err(Error::Invalid("sigma1 must be at least 1".into()));
        }
        if !(self.fix_epsilon > 0.0 && self.fix_epsilon < 1.0) {
            return Err(Error::Invalid(format!("fix_epsilon must lie in (0, 1), got {}", self.fix_epsilon)));
        }
        if !(self.carve_radius_multiplier > 0.0) {
            return Err(Error::Invalid("carve radius multiplier must be positive".into()));
        }
        Ok(())
    }
}

/// `⌈log2 m⌉`, at least 1.
fn ceil_log2(m: usize) -> usize {
    (usize::BITS - m.max(2).saturating_sub(1).leading_zeros()) as usize
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub active_parts: usize,
    pub conditioned_parts: usize,
    pub edges_resolved: usize,
    pub max_active_shortcutter_size: usize,
    /// Largest ratio of repaired to original conductance over the audited parts.
    pub conductivity_audit: f64,
    /// Whether this round's maximum is at most `m^{-1/σ₁}` times the previous one.
    pub shrink_ok: bool,
    pub walk: StepAccounting,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineRun {
    pub tree: TreeSample,
    pub rounds: Vec<RoundReport>,
    pub sigma1: usize,
    pub round_bound: usize,
    pub terminal_walk_steps: u64,
}

impl PipelineRun {
    pub fn shrinkage_holds(&self) -> bool {
        self.rounds.iter().all(|r| r.shrink_ok) && self.rounds.len() <= self.round_bound
    }

    pub fn rounds_csv(&self) -> String {
        let mut s = String::from("round,active_parts,conditioned_parts,edges_resolved,max_active_shortcutter_size,conductivity_audit,shrink_ok\n");
        for r in &self.rounds {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.round, r.active_parts, r.conditioned_parts, r.edges_resolved, r.max_active_shortcutter_size, r.conductivity_audit, r.shrink_ok
            ));
        }
        s
    }
}

pub fn exact_tree_sigma1(g: &Graph, cfg: &PipelineConfig) -> Result<TreeSample> {
    Ok(exact_tree_sigma1_run(g, cfg)?.tree)
}

struct Part {
    vertices: Vec<Vertex>,
    region: Vec<bool>,
}

pub fn exact_tree_sigma1_run(g: &Graph, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    if g.vertex_count() < 2 {
        return Err(Error::TooFewVertices(g.vertex_count()));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let m0 = g.non_loop_count().max(1);
    let sigma1 = cfg.sigma1_for(m0);
    let round_bound = sigma1 * ceil_log2(m0);
    let factor = (m0 as f64).powf(-1.0 / sigma1 as f64);
    let mut walk_rng = rng::stream(cfg.seed, 1);
    let mut h = g.clone();
    let mut tree: Vec<EdgeId> = Vec::new();
    let mut rounds: Vec<RoundReport> = Vec::new();
    // Parts of the previous round, as (part of each vertex, region of each part).
    let mut prev_part: Vec<Option<usize>> = vec![Some(0); g.vertex_count()];
    let mut prev_regions: Vec<Vec<bool>> = vec![vec![true; g.vertex_count()]];
    let mut last_max: Option<usize> = None;
    while h.non_loop_count() > 0 {
        let n = h.vertex_count();
        let ctx = SpectralContext::new(&h)?;
        let (r_lo, r_hi) = h.non_loop_edges().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.resistance()), hi.max(e.resistance())));
        let radius = (r_lo * r_hi).sqrt();
        let emb = jl_embed(&ctx, rng::child_seed(cfg.seed, rounds.len() as u64));
        let all: Vec<Vertex> = (0..n).collect();
        let community = covering_community(&ctx, &emb, &all, radius, &cfg.community)?;
        let mut cores: Vec<(Cluster, Vec<bool>)> = Vec::new();
        for fam in &community.families {
            for sc in voronoi_shortcutters(&h, fam)? {
                let region = mask(n, &sc.region);
                cores.push((sc.core, region));
            }
        }
        let core_of: Vec<Option<usize>> = (0..n).map(|v| cores.iter().position(|(c, _)| c.contains(v))).collect();
        let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut parts: Vec<Part> = Vec::new();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for v in 0..n {
            let Some(p) = prev_part[v] else { continue };
            let c = core_of[v].unwrap_or(cores.len());
            let k = *index.entry((c, p)).or_insert_with(|| {
                let region = (0..n).map(|x| prev_regions[p][x] && cores.get(c).is_none_or(|(_, r)| r[x])).collect();
                parts.push(Part { vertices: Vec::new(), region });
                parts.len() - 1
            });
            parts[k].vertices.push(v);
            owner[v] = Some(k);
        }
        let mut internal = vec![false; parts.len()];
        for e in h.non_loop_edges() {
            if let (Some(a), Some(b)) = (owner[e.u], owner[e.v]) {
                if a == b {
                    internal[a] = true;
                }
            }
        }
        let regions: Vec<Vec<Vertex>> = parts.iter().map(|p| (0..n).filter(|&x| p.region[x]).collect()).collect();
        let sizes: Vec<usize> = regions.iter().map(|r| h.touching_count(r)).collect();
        let active: Vec<usize> = (0..parts.len()).filter(|&k| internal[k]).collect();
        if active.is_empty() {
            break;
        }
        if rounds.len() == round_bound {
            return Err(Error::Invalid(format!("round cap {round_bound} exceeded")));
        }
        let max_size = active.iter().map(|&k| sizes[k]).max().expect("nonempty");
        let chosen: Vec<usize> = active.iter().copied().filter(|&k| sizes[k] as f64 >= factor * max_size as f64).collect();
        let mut s_set: Vec<Vertex> = chosen.iter().flat_map(|&k| parts[k].vertices.iter().copied()).collect();
        s_set.sort_unstable();
        let in_s = mask(n, &s_set);
        let carve = cfg.carve_radius_multiplier * radius;
        let mut shortcutters: Vec<Shortcutter> = parts
            .iter()
            .zip(&regions)
            .map(|(p, region)| {
                let far: Vec<Vertex> =
                    region.iter().copied().filter(|&x| in_s[x] && p.vertices.iter().all(|&c| c != x && ctx.resistance(c, x) > carve)).collect();
                let core = Cluster { vertices: p.vertices.clone(), center: p.vertices[0], diameter: 0.0 };
                Shortcutter::with_deleted(core, region.clone(), far)
            })
            .collect();
        let enabled = vec![true; shortcutters.len()];
        let partial = partial_sample_with(&h, &mut shortcutters, &enabled, &s_set, &mut walk_rng)?;
        let f_set = h.induced_edges(&s_set);
        let not_in: Vec<EdgeId> = f_set.iter().copied().filter(|e| partial.edges.binary_search(e).is_err()).collect();
        let mut audit = 1.0f64;
        if cfg.fix_audit {
            let fix_cfg = FixConfig::default();
            for &k in &chosen {
                let outside: Vec<Vertex> = (0..n).filter(|&x| !parts[k].region[x]).collect();
                if outside.is_empty() {
                    continue;
                }
                let inside: Vec<EdgeId> = f_set
                    .iter()
                    .copied()
                    .filter(|&e| {
                        let e = h.edge(e).expect("present");
                        parts[k].region[e.u] && parts[k].region[e.v]
                    })
                    .collect();
                let seed = rng::child_seed(cfg.seed, 0xf1 + k as u64);
                let mut coins = TreeCoupledCoins::new(partial.edges.iter().copied(), seed);
                let res = fix_with(&h, &parts[k].vertices, &outside, &[], &inside, cfg.fix_epsilon, &fix_cfg, &mut coins, seed)?;
                audit = audit.max(fix_conductance_ratio(&h, &parts[k].vertices, &outside, &[], &res)?);
            }
        }
        let (next, map) = h.condition(&partial.edges, &not_in)?;
        tree.extend(&partial.edges);
        let shrink_ok = last_max.is_none_or(|prev| max_size as f64 <= factor * prev as f64 + 1e-9);
        rounds.push(RoundReport {
            round: rounds.len() + 1,
            active_parts: active.len(),
            conditioned_parts: chosen.len(),
            edges_resolved: f_set.len(),
            max_active_shortcutter_size: max_size,
            conductivity_audit: audit,
            shrink_ok,
            walk: partial.accounting,
        });
        last_max = Some(max_size);
        let n2 = next.vertex_count();
        let mut next_part: Vec<Option<Option<usize>>> = vec![None; n2];
        let mut mapped_regions = vec![vec![true; n2]; parts.len()];
        for x in 0..n {
            let y = map.map_vertex(x);
            next_part[y] = match next_part[y] {
                None => Some(owner[x]),
                Some(p) if p == owner[x] => Some(p),
                Some(_) => Some(None),
            };
            for (k, p) in parts.iter().enumerate() {
                if !p.region[x] {
                    mapped_regions[k][y] = false;
                }
            }
        }
        prev_part = next_part.into_iter().map(|p| p.flatten()).collect();
        prev_regions = mapped_regions;
        h = next;
    }
    let mut terminal_walk_steps = 0;
    if h.non_loop_count() > 0 {
        let rest = aldous_broder(&h, rng::child_seed(cfg.seed, 0xab))?;
        terminal_walk_steps = rest.walk_steps;
        tree.extend(rest.edges);
    }
    tree.sort_unstable();
    if !is_spanning_tree(g, &tree) {
        return Err(Error::Numerical("pipeline output is not a spanning tree".into()));
    }
    let steps = rounds.iter().map(|r| r.walk.raw_steps + r.walk.shortcut_steps).sum::<u64>() + terminal_walk_steps;
    Ok(PipelineRun { tree: TreeSample { edges: tree, walk_steps: steps, seed: cfg.seed }, rounds, sigma1, round_bound, terminal_walk_steps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InnerSampler {
    Sigma1,
    LeverageChain,
    Wilson,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApxConfig {
    /// `ρ = (m/ε)^rho_exponent`.
    pub rho_exponent: f64,
    /// Bucket advance gate; `None` uses `m`.
    pub growth: Option<f64>,
    pub inner: InnerSampler,
    pub pipeline: PipelineConfig,
}

impl Default for ApxConfig {
    fn default() -> Self {
        ApxConfig { rho_exponent: 10.0, growth: None, inner: InnerSampler::Sigma1, pipeline: PipelineConfig { fix_audit: false, ..Default::default() } }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApxRound {
    pub bucket: usize,
    /// Edges decided this round.
    pub conditioned: usize,
    /// Edges of the graph the exact sampler ran on.
    pub work: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApxReport {
    pub m: usize,
    pub log_rho: f64,
    /// Number of edges of the input in each resistance bucket.
    pub buckets: BTreeMap<usize, usize>,
    pub rounds: Vec<ApxRound>,
}

impl ApxReport {
    pub fn conditioned_total(&self) -> usize {
        self.rounds.iter().map(|r| r.conditioned).sum()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

/// `ln ρ` for `ρ = (m/ε)^exponent`.
pub fn log_rho(m: usize, eps: f64, exponent: f64) -> f64 {
    exponent * (m.max(1) as f64 / eps).ln()
}

/// Resistance bucket of every edge: the least `i` with `r ≤ ρ^i r_min`.
fn bucket_ids(g: &Graph, log_rho: f64) -> HashMap<EdgeId, usize> {
    let log_min = g.edges().iter().map(|e| e.resistance().ln()).fold(f64::INFINITY, f64::min);
    g.edges()
        .iter()
        .map(|e| {
            let x = (e.resistance().ln() - log_min) / log_rho;
            (e.id, (x - 1e-12).ceil().max(0.0) as usize)
        })
        .collect()
}

struct BucketPlan {
    growth: f64,
    bucket: HashMap<EdgeId, usize>,
}

impl BucketPlan {
    fn count(&self, h: &Graph, i: usize) -> usize {
        h.edges().iter().filter(|e| self.bucket[&e.id] <= i).count()
    }

    fn advance(&self, h: &Graph, mut i: usize) -> usize {
        let top = self.bucket.values().copied().max().unwrap_or(0);
        while i < top && (self.count(h, i) == 0 || self.count(h, i + 1) as f64 > self.growth * self.count(h, i) as f64) {
            i += 1;
        }
        i
    }

    /// Components of the edges in buckets up to `i + 1` that contain a non-loop edge.
    fn components(&self, h: &Graph, i: usize) -> (Graph, Vec<Vec<Vertex>>) {
        let sub = h.filter_edges(|e| self.bucket[&e.id] <= i + 1);
        let comp = sub.components();
        let mut groups: BTreeMap<usize, Vec<Vertex>> = BTreeMap::new();
        for v in 0..sub.vertex_count() {
            groups.entry(comp[v]).or_default().push(v);
        }
        let with_edges: Vec<bool> = {
            let mut w = vec![false; sub.vertex_count()];
            for e in sub.non_loop_edges() {
                w[comp[e.u]] = true;
            }
            w
        };
        let comps = groups.into_iter().filter(|(c, _)| with_edges[*c]).map(|(_, vs)| vs).collect();
        (sub, comps)
    }
}

pub fn apx_tree(g: &Graph, eps: f64, seed: u64) -> Result<TreeSample> {
    Ok(apx_tree_with(g, eps, seed, &ApxConfig::default())?.0)
}

pub fn apx_tree_with(g: &Graph, eps: f64, seed: u64, cfg: &ApxConfig) -> Result<(TreeSample, ApxReport)> {
    check_eps(eps)?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let m = g.edge_count();
    let lr = log_rho(m, eps, cfg.rho_exponent);
    let plan = BucketPlan { growth: cfg.growth.unwrap_or(m as f64), bucket: bucket_ids(g, lr) };
    let mut buckets = BTreeMap::new();
    for b in plan.bucket.values() {
        *buckets.entry(*b).or_insert(0) += 1;
    }
    let mut h = g.clone();
    let mut i = 0;
    let mut tree = Vec::new();
    let mut rounds = Vec::new();
    let mut steps = 0;
    while h.edge_count() > 0 {
        i = plan.advance(&h, i);
        let (sub, comps) = plan.components(&h, i);
        let mut sampled: Vec<EdgeId> = Vec::new();
        for (k, vs) in comps.iter().enumerate() {
            let piece = sub.induced_subgraph(vs);
            let s = rng::child_seed(seed, (rounds.len() as u64) << 20 | k as u64);
            let t = match cfg.inner {
                InnerSampler::Sigma1 => exact_tree_sigma1(&piece, &PipelineConfig { seed: s, ..cfg.pipeline.clone() })?,
                InnerSampler::LeverageChain => leverage_chain(&piece, s)?,
                InnerSampler::Wilson => wilson(&piece, s)?,
            };
            steps += t.walk_steps;
            sampled.extend(t.edges);
        }
        sampled.sort_unstable();
        let decided: Vec<EdgeId> = h.edges().iter().filter(|e| plan.bucket[&e.id] <= i).map(|e| e.id).collect();
        let (contract, delete): (Vec<EdgeId>, Vec<EdgeId>) = decided.iter().partition(|e| sampled.binary_search(e).is_ok());
        rounds.push(ApxRound { bucket: i, conditioned: decided.len(), work: sub.edge_count() });
        tree.extend(&contract);
        h = h.condition(&contract, &delete)?.0;
    }
    tree.sort_unstable();
    if !is_spanning_tree(g, &tree) {
        return Err(Error::Numerical("approximate sampler output is not a spanning tree".into()));
    }
    Ok((TreeSample { edges: tree, walk_steps: steps, seed }, ApxReport { m, log_rho: lr, buckets, rounds }))
}

/// Bucket layout and per-round work of the approximate sampler.
pub fn size_bucket_check(g: &Graph, eps: f64) -> Result<ApxReport> {
    let cfg = ApxConfig { inner: InnerSampler::Wilson, ..Default::default() };
    Ok(apx_tree_with(g, eps, 0, &cfg)?.1)
}

/// The exact output distribution of [`apx_tree_with`], by enumerating every
/// branch of its bucket recursion.
pub fn apx_output_distribution(g: &Graph, eps: f64, cfg: &ApxConfig) -> Result<TreeDistribution> {
    check_eps(eps)?;
    let m = g.edge_count();
    let plan = BucketPlan { growth: cfg.growth.unwrap_or(m as f64), bucket: bucket_ids(g, log_rho(m, eps, cfg.rho_exponent)) };
    let mut out = BTreeMap::new();
    apx_branch(&plan, g, 0, 1.0, Vec::new(), &mut out)?;
    Ok(TreeDistribution { probabilities: out, total_weight: 1.0 })
}

fn apx_branch(plan: &BucketPlan, h: &Graph, i: usize, prob: f64, tree: Vec<EdgeId>, out: &mut BTreeMap<Vec<EdgeId>, f64>) -> Result<()> {
    if h.edge_count() == 0 {
        let mut t = tree;
        t.sort_unstable();
        *out.entry(t).or_insert(0.0) += prob;
        return Ok(());
    }
    let i = plan.advance(h, i);
    let (sub, comps) = plan.components(h, i);
    let decided = |e: &EdgeId| plan.bucket[e] <= i;
    let mut outcomes: Vec<(Vec<EdgeId>, f64)> = vec![(Vec::new(), 1.0)];
    for vs in &comps {
        let dist = enumerate_trees(&sub.induced_subgraph(vs))?;
        let mut marginal: BTreeMap<Vec<EdgeId>, f64> = BTreeMap::new();
        for (t, p) in &dist.probabilities {
            *marginal.entry(t.iter().copied().filter(decided).collect()).or_insert(0.0) += p;
        }
        outcomes = outcomes.iter().flat_map(|(acc, pa)| marginal.iter().map(move |(t, p)| (acc.iter().chain(t).copied().collect(), pa * p))).collect();
    }
    let all_decided: Vec<EdgeId> = h.edges().iter().map(|e| e.id).filter(decided).collect();
    for (contract, p) in outcomes {
        let delete: Vec<EdgeId> = all_decided.iter().copied().filter(|e| !contract.contains(e)).collect();
        let (next, _) = h.condition(&contract, &delete)?;
        let mut t = tree.clone();
        t.extend(&contract);
        apx_branch(plan, &next, i, prob * p, t, out)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct DelHighResCheck {
    pub edge: EdgeId,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compares `Reff(e)` with and without the edges of resistance above `ρ r_e`.
pub fn del_high_res_check(g: &Graph, e: EdgeId, eps: f64) -> Result<DelHighResCheck> {
    check_eps(eps)?;
    let edge = g.try_edge(e)?.clone();
    let m = g.edge_count() as f64;
    let limit = edge.resistance().ln() + log_rho(g.edge_count(), eps, 10.0);
    let pruned = g.filter_edges(|f| f.resistance().ln() <= limit);
    let reff = |h: &Graph| -> Result<f64> {
        let comp = h.components();
        let keep: Vec<Vertex> = (0..h.vertex_count()).filter(|&v| comp[v] == comp[edge.u]).collect();
        let pos = |v: Vertex| keep.binary_search(&v).expect("same component");
        resistance_by_elimination(&h.induced_subgraph(&keep), pos(edge.u), pos(edge.v))
    };
    let ratio = reff(&pruned)? / reff(g)?;
    let bound = 1.0 + 2.0 * eps / m.powi(9) + 1e-12;
    Ok(DelHighResCheck { edge: e, ratio, bound, pass: ratio >= 1.0 - 1e-12 && ratio <= bound })
}
