//! Conditioning on many edges while keeping an `s–t` resistance or an `S–S′`
//! conductance close to its starting value.
//!
//! Both procedures return a small set `F′` of edges to delete in place of
//! conditioning on them. [`special_fix`] handles two terminals by always
//! conditioning on the edge carrying the least energy. [`fix`] handles vertex
//! sets: it buckets edges by endpoint potential, defers small buckets, and
//! conditions on edges approved by [`slow_oracle`].

use rand::Rng as _;
use serde::Serialize;

use crate::conditioning::{condition_step, sample_minor, Coins, FileOrder, FreshCoins, Resolution};
use crate::error::{Error, Result};
use crate::graph::{mask, EdgeId, Graph, MinorMap, Vertex};
use crate::rng;
use crate::schur::{resistance_by_elimination, schur_complement};
use crate::spectral::SpectralContext;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeReport {
    /// `c(S, S′)`.
    pub conductance: f64,
    /// `Δ(S, S′)`.
    pub delta_fwd: f64,
    /// `Δ(S′, S)`.
    pub delta_bwd: f64,
    /// `δ(S, S′) = Δ(S, S′) / c(S, S′)`.
    pub normalized: f64,
    pub normalized_bwd: f64,
}

fn validate_sets(n: usize, s_set: &[Vertex], sp_set: &[Vertex]) -> Result<()> {
    if s_set.is_empty() || sp_set.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(&v) = s_set.iter().chain(sp_set).find(|&&v| v >= n) {
        return Err(Error::VertexOutOfRange(v));
    }
    let m = mask(n, s_set);
    if sp_set.iter().any(|&v| m[v]) {
        return Err(Error::Overlap);
    }
    Ok(())
}

fn without(g: &Graph, d_set: &[EdgeId]) -> Result<Graph> {
    let present: Vec<EdgeId> = d_set.iter().copied().filter(|&e| g.contains_edge(e)).collect();
    Ok(g.delete_edges(&present)?.0)
}

/// `Σ lev` over the `S–S′` edges of `Schur(g/S, S ∪ S′)`.
fn schur_degree(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex]) -> Result<f64> {
    let (h, map) = g.identify(s_set)?;
    let s = map.map_vertex(s_set[0]);
    let mut keep = map.map_set(sp_set);
    keep.push(s);
    let sc = schur_complement(&h, &keep)?;
    let ctx = SpectralContext::new(&sc.graph)?;
    let si = sc.index_of(s).expect("kept");
    let mut total = 0.0;
    for e in sc.graph.non_loop_edges() {
        if e.touches(si) {
            total += ctx.leverage(e.id)?;
        }
    }
    Ok(total)
}

/// Conductances and Schur degrees between `S` and `S′` in `g \ D`.
pub fn degree_report(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex], d_set: &[EdgeId]) -> Result<DegreeReport> {
    validate_sets(g.vertex_count(), s_set, sp_set)?;
    let base = without(g, d_set)?;
    if !base.is_connected() {
        return Err(Error::Disconnected);
    }
    let ident = Identified::new(&base, s_set, sp_set)?;
    let conductance = 1.0 / ident.reff;
    let delta_fwd = schur_degree(&base, s_set, sp_set)?;
    let delta_bwd = schur_degree(&base, sp_set, s_set)?;
    Ok(DegreeReport { conductance, delta_fwd, delta_bwd, normalized: delta_fwd / conductance, normalized_bwd: delta_bwd / conductance })
}

/// `c(S, S′)` in a graph that may be disconnected: zero when no path joins the
/// sets, infinite when they share a vertex.
pub fn set_conductance(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex]) -> Result<f64> {
    let n = g.vertex_count();
    let m = mask(n, s_set);
    if sp_set.iter().any(|&v| m[v]) {
        return Ok(f64::INFINITY);
    }
    let (h, map) = g.identify_many(&[s_set, sp_set])?;
    let (s, sp) = (map.map_vertex(s_set[0]), map.map_vertex(sp_set[0]));
    let comp = h.components();
    if comp[s] != comp[sp] {
        return Ok(0.0);
    }
    let keep: Vec<Vertex> = (0..h.vertex_count()).filter(|&v| comp[v] == comp[s]).collect();
    let sub = h.induced_subgraph(&keep);
    let pos = |v: Vertex| keep.binary_search(&v).expect("in component");
    Ok(1.0 / resistance_by_elimination(&sub, pos(s), pos(sp))?)
}

/// `(g \ D)/(S, S′)` with its unit `s → s′` potentials.
struct Identified {
    ctx: SpectralContext,
    map: Vec<Vertex>,
    s: Vertex,
    sp: Vertex,
    phi: Vec<f64>,
    reff: f64,
}

impl Identified {
    fn new(base: &Graph, s_set: &[Vertex], sp_set: &[Vertex]) -> Result<Self> {
        let (h, map) = base.identify_many(&[s_set, sp_set])?;
        let (s, sp) = (map.map_vertex(s_set[0]), map.map_vertex(sp_set[0]));
        let ctx = SpectralContext::new(&h)?;
        let phi = ctx.st_potentials(s, sp);
        let reff = phi[s] - phi[sp];
        Ok(Identified { ctx, map: map.vertex_map, s, sp, phi, reff })
    }

    /// Potential of an original vertex scaled to 1 on `S` and 0 on `S′`.
    fn normalized(&self, v: Vertex) -> f64 {
        ((self.phi[self.map[v]] - self.phi[self.sp]) / self.reff).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixConfig {
    /// SpecialFix stops once at most `size_constant · ln n / ε²` relevant edges remain.
    pub size_constant: f64,
    /// Fix conditions on a bucket `W` only when `|W|` exceeds this multiple of
    /// `(Δ(S,S′) + Δ(S′,S) + |D|) · 2^i`.
    pub threshold_multiplier: f64,
    /// Use the full theoretical bucket threshold instead of `threshold_multiplier`.
    pub paper_threshold: bool,
}

impl Default for FixConfig {
    fn default() -> Self {
        FixConfig { size_constant: 9.0, threshold_multiplier: 4.0, paper_threshold: false }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AuditRecord {
    pub round: usize,
    pub action: String,
    pub edge: Option<EdgeId>,
    /// Resistance (SpecialFix) or conductance (Fix) before the round.
    pub objective_before: f64,
    pub objective_after: Option<f64>,
    pub remaining: usize,
    pub bucket: Option<String>,
    pub bucket_size: usize,
    pub oracle_size: usize,
    pub threshold: Option<f64>,
    /// Largest change the round may make to the objective.
    pub bound: Option<f64>,
    pub bound_ok: bool,
}

#[derive(Clone, Debug)]
pub struct FixResult {
    /// Retained edges, as ids of `final_graph`.
    pub retained: Vec<EdgeId>,
    /// Original ids the retained edges descend from.
    pub retained_origins: Vec<EdgeId>,
    /// The input after conditioning on everything but `retained`.
    pub final_graph: Graph,
    pub map: MinorMap,
    pub audit: Vec<AuditRecord>,
    pub epsilon: f64,
}

impl FixResult {
    pub fn audit_json_lines(&self) -> String {
        self.audit.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
    }

    /// The final graph with the retained edges deleted.
    pub fn repaired_graph(&self) -> Result<Graph> {
        without(&self.final_graph, &self.retained)
    }
}

fn identity_map(g: &Graph) -> MinorMap {
    let mut surviving_edges = g.edge_ids();
    surviving_edges.sort_unstable();
    MinorMap { vertex_map: (0..g.vertex_count()).collect(), surviving_edges }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

fn dedup_edges(g: &Graph, f_set: &[EdgeId]) -> Result<Vec<EdgeId>> {
    let mut f: Vec<EdgeId> = f_set.to_vec();
    f.sort_unstable();
    f.dedup();
    for &e in &f {
        g.try_edge(e)?;
    }
    Ok(f)
}

/// Edges that can still change `Reff(s, t)`: not loops, and not hanging off a
/// degree-one vertex other than `s` or `t`.
fn relevant_edges(g: &Graph, f: &[EdgeId], s: Vertex, t: Vertex) -> Vec<EdgeId> {
    let mut degree = vec![0usize; g.vertex_count()];
    for e in g.non_loop_edges() {
        degree[e.u] += 1;
        degree[e.v] += 1;
    }
    let dangling = |x: Vertex| degree[x] == 1 && x != s && x != t;
    f.iter().copied().filter(|&id| g.edge(id).is_some_and(|e| !e.is_loop() && !dangling(e.u) && !dangling(e.v))).collect()
}

/// The relevant edge of `f_set` with the least `s–t` energy `(b_st L⁺ b_f)² c_f`.
pub fn special_fix_choice(g: &Graph, ctx: &SpectralContext, s: Vertex, t: Vertex, f_set: &[EdgeId]) -> Option<EdgeId> {
    let phi = ctx.st_potentials(s, t);
    relevant_edges(g, f_set, s, t)
        .into_iter()
        .map(|id| {
            let e = g.edge(id).expect("present");
            let d = phi[e.u] - phi[e.v];
            (d * d * e.conductance, id)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

pub fn special_fix(g: &Graph, s: Vertex, t: Vertex, f_set: &[EdgeId], eps: f64, seed: u64) -> Result<FixResult> {
    special_fix_with(g, s, t, f_set, eps, &FixConfig::default(), &mut FreshCoins::new(seed))
}

pub fn special_fix_with(g: &Graph, s: Vertex, t: Vertex, f_set: &[EdgeId], eps: f64, cfg: &FixConfig, coins: &mut dyn Coins) -> Result<FixResult> {
    check_epsilon(eps)?;
    let n = g.vertex_count();
    if s >= n || t >= n {
        return Err(Error::VertexOutOfRange(s.max(t)));
    }
    if s == t {
        return Err(Error::Invalid("s and t must differ".into()));
    }
    let cap = cfg.size_constant * (n as f64).ln() / (eps * eps);
    let mut f = dedup_edges(g, f_set)?;
    let mut j = g.clone();
    let mut map = identity_map(g);
    let (mut s, mut t) = (s, t);
    let mut ctx = SpectralContext::new(&j)?;
    let mut audit = Vec::new();
    loop {
        let relevant = relevant_edges(&j, &f, s, t);
        if relevant.len() as f64 <= cap || s == t {
            break;
        }
        let choice = special_fix_choice(&j, &ctx, s, t, &relevant).expect("nonempty");
        let before = ctx.resistance(s, t);
        let phi = ctx.st_potentials(s, t);
        let e = j.edge(choice).expect("present");
        let energy = (phi[e.u] - phi[e.v]).powi(2) * e.conductance;
        let (h, step, m) = condition_step(&j, choice, &ctx, coins)?;
        f.retain(|&x| x != choice);
        if let Resolution::Pending(copy) = step.resolution {
            f.push(copy);
        }
        s = m.map_vertex(s);
        t = m.map_vertex(t);
        map = map.then(&m);
        j = h;
        ctx = SpectralContext::new(&j)?;
        let after = if s == t { 0.0 } else { ctx.resistance(s, t) };
        let bound = 4.0 * energy;
        audit.push(AuditRecord {
            round: audit.len() + 1,
            action: "condition".into(),
            edge: Some(choice),
            objective_before: before,
            objective_after: Some(after),
            remaining: f.len(),
            bound: Some(bound),
            bound_ok: (after - before).abs() <= bound * (1.0 + 1e-9) + 1e-12 * before,
            ..Default::default()
        });
    }
    let mut retained = relevant_edges(&j, &f, s, t);
    retained.sort_unstable();
    let mut retained_origins: Vec<EdgeId> = retained.iter().map(|&e| j.edge(e).expect("present").origin).collect();
    retained_origins.sort_unstable();
    Ok(FixResult { retained, retained_origins, final_graph: j, map, audit, epsilon: eps })
}

pub const ORACLE_INEQUALITIES: [&str; 6] = ["conductance_fwd", "conductance_bwd", "energy_fwd", "energy_bwd", "deferred", "objective"];

/// `400 ln(β n)` with `β` the ratio of the largest to the smallest resistance.
pub fn oracle_rho(g: &Graph) -> f64 {
    let (lo, hi) = g.non_loop_edges().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.resistance()), hi.max(e.resistance())));
    let beta = if lo.is_finite() { hi / lo } else { 1.0 };
    400.0 * (beta * g.vertex_count() as f64).ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub edge: EdgeId,
    pub lhs: [f64; 6],
    pub rhs: [f64; 6],
}

impl OracleCheck {
    pub fn passes(&self) -> bool {
        self.lhs.iter().zip(&self.rhs).all(|(l, r)| *l <= r + 1e-12 * r.abs())
    }
}

/// Evaluates the six stability inequalities for every edge of `w_set`.
pub fn oracle_inequalities(
    g: &Graph,
    s_set: &[Vertex],
    sp_set: &[Vertex],
    d_set: &[EdgeId],
    a_set: &[EdgeId],
    b_set: &[EdgeId],
    w_set: &[EdgeId],
) -> Result<Vec<OracleCheck>> {
    if w_set.is_empty() {
        return Ok(Vec::new());
    }
    validate_sets(g.vertex_count(), s_set, sp_set)?;
    let base = without(g, d_set)?;
    let id = Identified::new(&base, s_set, sp_set)?;
    let (hs, ms) = base.identify(s_set)?;
    let (hp, mp) = base.identify(sp_set)?;
    let (ctx_s, ctx_p) = (SpectralContext::new(&hs)?, SpectralContext::new(&hp)?);
    let (s_in_s, sp_in_p) = (ms.map_vertex(s_set[0]), mp.map_vertex(sp_set[0]));
    let deg = degree_report(g, s_set, sp_set, d_set)?;
    let rho = oracle_rho(g);
    let scale = rho / w_set.len() as f64;
    let n = g.vertex_count() as f64;
    let r_min = id.ctx.min_max_resistance().0;
    let (phi, s, sp) = (&id.phi, id.s, id.sp);
    let incident = |w: Vertex| base.non_loop_edges().filter(move |e| e.touches(w));
    let ends = |id_: EdgeId| -> Result<(Vertex, Vertex)> {
        let e = base.try_edge(id_)?;
        Ok((id.map[e.u], id.map[e.v]))
    };
    let a_ends: Vec<(Vertex, Vertex)> = a_set.iter().filter(|e| base.contains_edge(**e)).map(|&e| ends(e)).collect::<Result<_>>()?;
    let b_ends: Vec<(Vertex, Vertex)> = b_set.iter().filter(|e| base.contains_edge(**e)).map(|&e| ends(e)).collect::<Result<_>>()?;
    let deferred_rhs: f64 =
        a_ends.iter().map(|&(u, v)| 2.0 * phi[s] - phi[u] - phi[v]).sum::<f64>() + b_ends.iter().map(|&(u, v)| phi[u] + phi[v] - 2.0 * phi[sp]).sum::<f64>();
    let rhs = [
        scale * deg.normalized,
        scale * deg.normalized_bwd,
        scale * deg.normalized,
        scale * deg.normalized_bwd,
        scale * deferred_rhs + r_min / n.powi(4),
        scale * id.reff,
    ];
    let mut out = Vec::with_capacity(w_set.len());
    for &f in w_set {
        let fe = base.try_edge(f)?;
        let (fa, fb) = (id.map[fe.u], id.map[fe.v]);
        let rf = fe.resistance();
        let drop = phi[fa] - phi[fb];
        let cross = |x: Vertex, y: Vertex| id.ctx.form(fa, fb, x, y);
        let mut lhs = [0.0; 6];
        for &w in sp_set {
            let mut cond = 0.0;
            let mut flow = 0.0;
            for e in incident(w) {
                let x = id.map[e.other(w).expect("incident")];
                cond += drop.abs() * cross(x, sp).abs() / (rf * e.resistance());
                flow += (phi[x] - phi[sp]) / e.resistance();
            }
            let w_s = ms.map_vertex(w);
            lhs[0] += ctx_s.resistance(s_in_s, w_s) * cond;
            lhs[2] += ctx_s.form(s_in_s, w_s, ms.map_vertex(fe.u), ms.map_vertex(fe.v)).powi(2) / rf * flow;
        }
        for &w in s_set {
            let mut cond = 0.0;
            let mut flow = 0.0;
            for e in incident(w) {
                let x = id.map[e.other(w).expect("incident")];
                cond += drop.abs() * cross(s, x).abs() / (rf * e.resistance());
                flow += (phi[s] - phi[x]) / e.resistance();
            }
            let w_p = mp.map_vertex(w);
            lhs[1] += ctx_p.resistance(sp_in_p, w_p) * cond;
            lhs[3] += ctx_p.form(sp_in_p, w_p, mp.map_vertex(fe.u), mp.map_vertex(fe.v)).powi(2) / rf * flow;
        }
        for &(u, v) in &a_ends {
            lhs[4] += drop.abs() * (cross(s, u) + cross(s, v)).abs() / rf;
        }
        for &(u, v) in &b_ends {
            lhs[4] += drop.abs() * (cross(u, sp) + cross(v, sp)).abs() / rf;
        }
        lhs[5] = drop * drop / rf;
        out.push(OracleCheck { edge: f, lhs, rhs });
    }
    Ok(out)
}

/// The edges of `w_set` satisfying all six stability inequalities.
pub fn slow_oracle(
    g: &Graph,
    s_set: &[Vertex],
    sp_set: &[Vertex],
    d_set: &[EdgeId],
    a_set: &[EdgeId],
    b_set: &[EdgeId],
    w_set: &[EdgeId],
) -> Result<Vec<EdgeId>> {
    Ok(oracle_inequalities(g, s_set, sp_set, d_set, a_set, b_set, w_set)?.into_iter().filter(|c| c.passes()).map(|c| c.edge).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Side {
    X,
    Y,
}

/// Bucket of an edge by the normalized potential of its midpoint, or `None`
/// for an edge joining `S` to `S′` directly.
fn bucket_of(mid: f64, i_max: usize) -> (Side, usize) {
    let low = i_max + 1;
    if mid >= 0.5 {
        let dist = 1.0 - mid;
        let i = if dist <= 0.0 { low } else { ((-dist.log2()).floor() as usize).saturating_sub(1).min(low) };
        (Side::X, i)
    } else {
        let i = if mid <= 0.0 { low } else { ((-mid.log2()).ceil() as usize).saturating_sub(2).min(low) };
        (Side::Y, i)
    }
}

/// Conditions a tree sample on `f_set` except for a returned set `F′`, keeping
/// `c(S, S′)` in the graph with `D ∪ F′` deleted close to its value in `g \ D`.
pub fn fix(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex], d_set: &[EdgeId], f_set: &[EdgeId], eps: f64, seed: u64) -> Result<FixResult> {
    fix_with(g, s_set, sp_set, d_set, f_set, eps, &FixConfig::default(), &mut FreshCoins::new(seed), seed)
}

#[allow(clippy::too_many_arguments)]
pub fn fix_with(
    g: &Graph,
    s_set: &[Vertex],
    sp_set: &[Vertex],
    d_set: &[EdgeId],
    f_set: &[EdgeId],
    eps: f64,
    cfg: &FixConfig,
    coins: &mut dyn Coins,
    seed: u64,
) -> Result<FixResult> {
    check_epsilon(eps)?;
    validate_sets(g.vertex_count(), s_set, sp_set)?;
    let mut f = dedup_edges(g, f_set)?;
    let mut d = dedup_edges(g, d_set)?;
    if f.iter().any(|e| d.binary_search(e).is_ok()) {
        return Err(Error::Invalid("F and D must be disjoint".into()));
    }
    let n = g.vertex_count();
    let i_max = (2.0 * (n as f64).log2()).ceil() as usize;
    let mut pick_rng = rng::stream(seed, 0xf1c5);
    let mut cur = g.clone();
    let mut map = identity_map(g);
    let (mut s_cur, mut sp_cur) = (s_set.to_vec(), sp_set.to_vec());
    let (mut a, mut b): (Vec<EdgeId>, Vec<EdgeId>) = (Vec::new(), Vec::new());
    let mut audit = Vec::new();
    while !f.is_empty() {
        let round = audit.len() + 1;
        let base = without(&cur, &d)?;
        let id = Identified::new(&base, &s_cur, &sp_cur)?;
        let conductance = 1.0 / id.reff;
        let (direct, rest): (Vec<EdgeId>, Vec<EdgeId>) = f.iter().partition(|&&e| {
            let e = cur.edge(e).expect("present");
            let (x, y) = (id.map[e.u], id.map[e.v]);
            (x == id.s && y == id.sp) || (x == id.sp && y == id.s)
        });
        if !direct.is_empty() {
            audit.push(AuditRecord {
                round,
                action: "defer-direct".into(),
                objective_before: conductance,
                remaining: rest.len(),
                bucket_size: direct.len(),
                bound_ok: true,
                ..Default::default()
            });
            a.extend(direct);
            f = rest;
            continue;
        }
        let mut buckets: Vec<((Side, usize), Vec<EdgeId>)> = Vec::new();
        for i in 0..=i_max + 1 {
            buckets.push(((Side::X, i), Vec::new()));
            buckets.push(((Side::Y, i), Vec::new()));
        }
        for &e in &f {
            let edge = cur.edge(e).expect("present");
            let mid = (id.normalized(edge.u) + id.normalized(edge.v)) / 2.0;
            let (side, i) = bucket_of(mid, i_max);
            buckets[2 * i + usize::from(side == Side::Y)].1.push(e);
        }
        let best = (0..buckets.len()).fold(0, |best, k| if buckets[k].1.len() > buckets[best].1.len() { k } else { best });
        let ((side, i), w) = buckets.swap_remove(best);
        let deg = degree_report(&cur, &s_cur, &sp_cur, &d)?;
        let mass = deg.delta_fwd + deg.delta_bwd + d.len() as f64;
        let threshold = if cfg.paper_threshold {
            let (lo, hi) = base.non_loop_edges().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.resistance()), hi.max(e.resistance())));
            let xi = (base.edge_count() as f64 * hi / lo).ln().max(1.0);
            10_000.0 * (n as f64).ln() * xi * xi * oracle_rho(&cur).powi(3) / (eps * eps) * mass * 2f64.powi(i as i32)
        } else {
            cfg.threshold_multiplier * mass * 2f64.powi(i as i32)
        };
        let label = format!("{}{}", if side == Side::X { "X" } else { "Y" }, if i > i_max { "low".to_string() } else { i.to_string() });
        let mut record = AuditRecord {
            round,
            objective_before: conductance,
            bucket: Some(label),
            bucket_size: w.len(),
            threshold: Some(threshold),
            bound_ok: true,
            ..Default::default()
        };
        let defer = |f: &mut Vec<EdgeId>, a: &mut Vec<EdgeId>, b: &mut Vec<EdgeId>| {
            f.retain(|e| !w.contains(e));
            if side == Side::X {
                a.extend(&w)
            } else {
                b.extend(&w)
            }
        };
        if w.len() as f64 <= threshold {
            defer(&mut f, &mut a, &mut b);
            record.action = "defer".into();
            record.remaining = f.len();
            audit.push(record);
            continue;
        }
        let ctx_del = SpectralContext::new(&base)?;
        let ctx_id = SpectralContext::new(&cur.identify_many(&[&s_cur, &sp_cur])?.0)?;
        let mut narrow = Vec::new();
        for &e in &w {
            if ctx_del.leverage(e)? - ctx_id.leverage(e)? <= 1.0 / 32.0 {
                narrow.push(e);
            }
        }
        let z = slow_oracle(&cur, &s_cur, &sp_cur, &d, &a, &b, &narrow)?;
        record.oracle_size = z.len();
        if z.is_empty() {
            defer(&mut f, &mut a, &mut b);
            record.action = "defer-empty-oracle".into();
            record.remaining = f.len();
            audit.push(record);
            continue;
        }
        let chosen = z[pick_rng.gen_range(0..z.len())];
        let ctx = SpectralContext::new(&cur)?;
        let (h, step, m) = condition_step(&cur, chosen, &ctx, coins)?;
        f.retain(|&e| e != chosen);
        if let Resolution::Pending(copy) = step.resolution {
            f.push(copy);
        }
        let remap = |set: &[Vertex]| {
            let mut v = m.map_set(set);
            v.sort_unstable();
            v.dedup();
            v
        };
        s_cur = remap(&s_cur);
        sp_cur = remap(&sp_cur);
        for set in [&mut d, &mut a, &mut b, &mut f] {
            set.retain(|&e| h.contains_edge(e));
        }
        map = map.then(&m);
        cur = h;
        record.action = "condition".into();
        record.edge = Some(chosen);
        record.remaining = f.len();
        audit.push(record);
    }
    let base = without(&cur, &d)?;
    let id = Identified::new(&base, &s_cur, &sp_cur)?;
    let band = |v: Vertex| {
        let p = id.normalized(v);
        p >= eps / 2.0 && p <= 1.0 - eps / 2.0
    };
    let (mut retained, rest): (Vec<EdgeId>, Vec<EdgeId>) = a.iter().chain(&b).partition(|&&e| {
        let edge = cur.edge(e).expect("present");
        band(edge.u) || band(edge.v)
    });
    retained.sort_unstable();
    let resolved = sample_minor(&cur, &rest, &mut FileOrder, coins)?;
    let final_graph = resolved.graph;
    map = map.then(&resolved.map);
    let mut retained_origins: Vec<EdgeId> = retained.iter().map(|&e| final_graph.edge(e).expect("retained edge survives").origin).collect();
    retained_origins.sort_unstable();
    audit.push(AuditRecord {
        round: audit.len() + 1,
        action: "finish".into(),
        objective_before: 1.0 / id.reff,
        remaining: retained.len(),
        bucket_size: rest.len(),
        bound_ok: true,
        ..Default::default()
    });
    Ok(FixResult { retained, retained_origins, final_graph, map, audit, epsilon: eps })
}

/// `c(S, S′)` after a fix divided by its value in `g \ D`.
pub fn fix_conductance_ratio(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex], d_set: &[EdgeId], result: &FixResult) -> Result<f64> {
    let before = set_conductance(&without(g, d_set)?, s_set, sp_set)?;
    let mut removed: Vec<EdgeId> = d_set.to_vec();
    removed.extend(&result.retained);
    let after_graph = without(&result.final_graph, &removed)?;
    let after = set_conductance(&after_graph, &result.map.map_set(s_set), &result.map.map_set(sp_set))?;
    Ok(after / before)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::graphs;
    use approx::assert_relative_eq;

    #[test]
    fn degree_of_a_single_edge() {
        let g = Graph::from_edges(2, &[(0, 1, 3.0)]).unwrap();
        let r = degree_report(&g, &[0], &[1], &[]).unwrap();
        assert_relative_eq!(r.conductance, 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.delta_fwd, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.normalized * r.conductance, r.delta_fwd, epsilon = 1e-9);
    }

    #[test]
    fn degree_of_parallel_edges() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0), (0, 1, 1.0), (0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        let r = degree_report(&g, &[0], &[1], &[]).unwrap();
        assert_relative_eq!(r.conductance, 4.0, epsilon = 1e-12);
        assert_relative_eq!(r.delta_fwd, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degree_of_disjoint_two_paths() {
        let k = 5;
        let mut edges = Vec::new();
        for i in 0..k {
            edges.push((0, 1 + i, 1.0));
            edges.push((1 + i, 1 + k + i, 1.0));
        }
        let g = Graph::from_edges(1 + 2 * k, &edges).unwrap();
        let sp: Vec<Vertex> = (1 + k..1 + 2 * k).collect();
        let r = degree_report(&g, &[0], &sp, &[]).unwrap();
        assert_relative_eq!(r.delta_fwd, k as f64, epsilon = 1e-9);
        assert_relative_eq!(r.conductance, k as f64 / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn degree_rejects_overlap_and_disconnection() {
        let g = graphs::path(3);
        assert!(matches!(degree_report(&g, &[0, 1], &[1], &[]), Err(Error::Overlap)));
        assert!(matches!(degree_report(&g, &[0], &[2], &[EdgeId(0)]), Err(Error::Disconnected)));
    }

    #[test]
    fn special_fix_trivial_cases() {
        let g = graphs::ladder(4);
        let none = special_fix(&g, 0, 1, &[], 0.3, 1).unwrap();
        assert!(none.retained.is_empty());
        let rungs: Vec<EdgeId> = (0..4).map(|i| EdgeId(3 * i + 1)).collect();
        let small = special_fix(&g, 0, 1, &rungs, 0.3, 1).unwrap();
        assert_eq!(small.retained, rungs);
        assert!(small.audit.is_empty());
        assert!(special_fix(&g, 0, 0, &rungs, 0.3, 1).is_err());
        assert!(special_fix(&g, 0, 1, &rungs, 1.5, 1).is_err());
    }

    #[test]
    fn special_fix_shrinks_with_a_small_constant() {
        let g = graphs::ladder(16);
        let rungs: Vec<EdgeId> = (0..16).map(|i| EdgeId(3 * i + 1)).collect();
        let cfg = FixConfig { size_constant: 0.05, ..Default::default() };
        let cap = 0.05 * (g.vertex_count() as f64).ln() / 0.09;
        let r = special_fix_with(&g, 0, 1, &rungs, 0.3, &cfg, &mut FreshCoins::new(3)).unwrap();
        assert!(r.retained.len() as f64 <= cap);
        assert!(r.audit.iter().all(|a| a.bound_ok));
        assert!(r.retained_origins.iter().all(|e| rungs.contains(e)));
    }

    #[test]
    fn oracle_on_empty_and_single_edge() {
        let g = graphs::path(4);
        assert!(slow_oracle(&g, &[0], &[3], &[], &[], &[], &[]).unwrap().is_empty());
        let z = slow_oracle(&g, &[0], &[3], &[], &[], &[], &[EdgeId(1)]).unwrap();
        assert_eq!(z, vec![EdgeId(1)]);
    }

    #[test]
    fn buckets_follow_midpoint_potential() {
        assert_eq!(bucket_of(0.5, 8), (Side::X, 0));
        assert_eq!(bucket_of(0.8, 8), (Side::X, 1));
        assert_eq!(bucket_of(1.0, 8), (Side::X, 9));
        assert_eq!(bucket_of(0.3, 8), (Side::Y, 0));
        assert_eq!(bucket_of(0.25, 8), (Side::Y, 0));
        assert_eq!(bucket_of(0.2, 8), (Side::Y, 1));
        assert_eq!(bucket_of(0.0, 8), (Side::Y, 9));
    }

    #[test]
    fn fix_with_nothing_to_fix() {
        let g = graphs::random_connected(10, 20, 1.0, 4).unwrap();
        let r = fix(&g, &[0], &[9], &[], &[], 0.25, 1).unwrap();
        assert!(r.retained.is_empty());
        assert_relative_eq!(fix_conductance_ratio(&g, &[0], &[9], &[], &r).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fix_keeps_conductance_on_a_random_instance() {
        let g = graphs::random_connected(16, 40, 1.0, 9).unwrap();
        let f: Vec<EdgeId> = g.edge_ids().into_iter().filter(|e| e.0 % 2 == 0).collect();
        let r = fix(&g, &[0, 1], &[15], &[], &f, 0.25, 2).unwrap();
        assert!(r.retained_origins.iter().all(|e| f.contains(e)));
        let ratio = fix_conductance_ratio(&g, &[0, 1], &[15], &[], &r).unwrap();
        assert!(ratio.is_finite());
        assert!(!r.audit_json_lines().is_empty());
    }

    #[test]
    fn set_conductance_handles_disconnection() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(set_conductance(&g, &[0], &[3]).unwrap(), 0.0);
        assert_relative_eq!(set_conductance(&g, &[0], &[1]).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(set_conductance(&g, &[0], &[0]).unwrap(), f64::INFINITY);
    }
}
