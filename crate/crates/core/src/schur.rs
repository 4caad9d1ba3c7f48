//! Schur complements by vertex elimination.
//!
//! Eliminating `v` replaces its star by a clique with `c_uw += c_uv c_vw / c_v`.
//! Every operation is a sum or product of positive numbers, so resistances
//! computed this way keep their relative accuracy even when conductances span
//! many orders of magnitude.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{mask, EdgeId, Graph, Vertex};
use crate::harness::stats::{chi_square_two_sample, StatTest};
use crate::rng;
use crate::samplers::Walker;
use crate::spectral::SpectralContext;

/// Conductances below this fraction of the largest one are dropped.
pub const DROP_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct SchurComplement {
    pub graph: Graph,
    /// `kept[i]` is the vertex of the input graph that became vertex `i`.
    pub kept: Vec<Vertex>,
}

impl SchurComplement {
    pub fn index_of(&self, v: Vertex) -> Option<usize> {
        self.kept.binary_search(&v).ok()
    }
}

pub fn schur_complement(g: &Graph, keep: &[Vertex]) -> Result<SchurComplement> {
    eliminate(g, keep, DROP_TOLERANCE)
}

fn eliminate(g: &Graph, keep: &[Vertex], drop_tolerance: f64) -> Result<SchurComplement> {
    let n = g.vertex_count();
    let mut kept: Vec<Vertex> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(&v) = kept.iter().find(|&&v| v >= n) {
        return Err(Error::VertexOutOfRange(v));
    }
    let keep_mask = mask(n, &kept);
    let mut w = vec![vec![0.0f64; n]; n];
    for e in g.non_loop_edges() {
        w[e.u][e.v] += e.conductance;
        w[e.v][e.u] += e.conductance;
    }
    let mut alive = vec![true; n];
    let mut pending: Vec<Vertex> = (0..n).filter(|&v| !keep_mask[v]).collect();
    while !pending.is_empty() {
        let (pos, _) = pending
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, (0..n).filter(|&x| alive[x] && x != v && w[v][x] > 0.0).count()))
            .min_by_key(|&(i, d)| (d, pending[i]))
            .expect("nonempty");
        let v = pending.swap_remove(pos);
        alive[v] = false;
        let nbrs: Vec<Vertex> = (0..n).filter(|&x| alive[x] && w[v][x] > 0.0).collect();
        let cv: f64 = nbrs.iter().map(|&x| w[v][x]).sum();
        if cv > 0.0 {
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    let add = w[a][v] * w[v][b] / cv;
                    w[a][b] += add;
                    w[b][a] += add;
                }
            }
        }
        for x in 0..n {
            w[v][x] = 0.0;
            w[x][v] = 0.0;
        }
    }
    let max = kept.iter().flat_map(|&a| kept.iter().map(move |&b| (a, b))).map(|(a, b)| w[a][b]).fold(0.0, f64::max);
    let mut out = Graph::new(kept.len());
    for (i, &a) in kept.iter().enumerate() {
        for (j, &b) in kept.iter().enumerate().skip(i + 1) {
            let c = w[a][b];
            if c > 0.0 && c >= drop_tolerance * max {
                out.add_edge(i, j, c)?;
            }
        }
    }
    Ok(SchurComplement { graph: out, kept })
}

/// Effective resistance computed by eliminating everything except `u` and `v`.
pub fn resistance_by_elimination(g: &Graph, u: Vertex, v: Vertex) -> Result<f64> {
    if u == v {
        return Ok(0.0);
    }
    let sc = eliminate(g, &[u, v], 0.0)?;
    let c = sc.graph.total_conductance();
    if c <= 0.0 {
        return Err(Error::Disconnected);
    }
    Ok(1.0 / c)
}

fn check_disjoint(n: usize, s: &[Vertex], t: &[Vertex]) -> Result<()> {
    if s.is_empty() || t.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(&v) = s.iter().chain(t).find(|&&v| v >= n) {
        return Err(Error::VertexOutOfRange(v));
    }
    let m = mask(n, s);
    if t.iter().any(|&v| m[v]) {
        return Err(Error::Overlap);
    }
    Ok(())
}

/// `G/(S, S')` with the identified vertices `s` and `s'`.
pub fn identify_pair(g: &Graph, s: &[Vertex], t: &[Vertex]) -> Result<(Graph, Vertex, Vertex, Vec<Vertex>)> {
    check_disjoint(g.vertex_count(), s, t)?;
    let (h, map) = g.identify_many(&[s, t])?;
    Ok((h, map.map_vertex(s[0]), map.map_vertex(t[0]), map.vertex_map))
}

/// Conductance between `S` and `S'`: the reciprocal of the resistance between
/// the two identified vertices.
pub fn conductance_between(g: &Graph, s: &[Vertex], t: &[Vertex]) -> Result<f64> {
    let (h, a, b, _) = identify_pair(g, s, t)?;
    let ctx = SpectralContext::new(&h)?;
    Ok(1.0 / ctx.resistance(a, b))
}

/// For each `w ∈ S'`, the fraction of the `S → S'` electrical flow entering at `w`.
///
/// Equivalently, the conductance of `w`'s edge in `Schur(G, S ∪ S')` with `S`
/// identified, normalised to sum to one.
pub fn normalized_hit_conductances(g: &Graph, s: &[Vertex], t: &[Vertex]) -> Result<Vec<(Vertex, f64)>> {
    let (h, a, b, map) = identify_pair(g, s, t)?;
    let ctx = SpectralContext::new(&h)?;
    let pot = ctx.st_potentials(a, b);
    let in_t = mask(g.vertex_count(), t);
    let mut flow: HashMap<Vertex, f64> = t.iter().map(|&w| (w, 0.0)).collect();
    for e in g.non_loop_edges() {
        let (x, w) = match (in_t[e.u], in_t[e.v]) {
            (false, true) => (e.u, e.v),
            (true, false) => (e.v, e.u),
            _ => continue,
        };
        *flow.get_mut(&w).expect("w in S'") += e.conductance * (pot[map[x]] - pot[b]);
    }
    let total: f64 = flow.values().sum();
    let mut out: Vec<(Vertex, f64)> = flow.into_iter().map(|(w, f)| (w, f / total)).collect();
    out.sort_unstable_by_key(|&(w, _)| w);
    Ok(out)
}

/// Pairwise conductances of `sc`, with kept vertex `i` placed at row `rows[i]`.
fn pair_weights(sc: &SchurComplement, rows: &[usize], size: usize) -> DMatrix<f64> {
    let mut w = DMatrix::<f64>::zeros(size, size);
    for e in sc.graph.non_loop_edges() {
        let (a, b) = (rows[e.u], rows[e.v]);
        if a != b {
            w[(a, b)] += e.conductance;
            w[(b, a)] += e.conductance;
        }
    }
    w
}

fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// Largest entrywise gap between `Schur(Schur(G, S₀ ∪ S₁), S₀)` and
/// `Schur(G, S₀)`, relative to the largest conductance.
pub fn associativity_gap(g: &Graph, s0: &[Vertex], s1: &[Vertex]) -> Result<f64> {
    let n = g.vertex_count();
    let outer: Vec<Vertex> = s0.iter().chain(s1).copied().collect();
    let first = schur_complement(g, &outer)?;
    let inner: Vec<usize> = s0.iter().map(|&v| first.index_of(v).expect("kept")).collect();
    let twice = schur_complement(&first.graph, &inner)?;
    let once = schur_complement(g, s0)?;
    let twice_rows: Vec<usize> = twice.kept.iter().map(|&i| first.kept[i]).collect();
    Ok(relative_gap(&pair_weights(&once, &once.kept, n), &pair_weights(&twice, &twice_rows, n)))
}

/// Gaps for `Schur(G∖f, S) = Schur(G, S)∖f` and `Schur(G/f, S) = Schur(G, S)/f`
/// where both endpoints of `f` lie in `S`.
pub fn commutation_gaps(g: &Graph, s: &[Vertex], f: EdgeId) -> Result<(f64, f64)> {
    let n = g.vertex_count();
    let e = g.try_edge(f)?.clone();
    let keep_mask = mask(n, s);
    if e.is_loop() || !keep_mask[e.u] || !keep_mask[e.v] {
        return Err(Error::Invalid(format!("{f:?} must join two kept vertices")));
    }
    let base = schur_complement(g, s)?;
    let mut removed = pair_weights(&base, &base.kept, n);
    removed[(e.u, e.v)] -= e.conductance;
    removed[(e.v, e.u)] -= e.conductance;
    let (gd, _) = g.delete_edge(f)?;
    let deleted = schur_complement(&gd, s)?;
    let delete_gap = relative_gap(&pair_weights(&deleted, &deleted.kept, n), &removed);

    let (gc, map) = g.contract_edge(f)?;
    let nc = gc.vertex_count();
    let contracted = schur_complement(&gc, &map.map_set(s))?;
    let base_rows: Vec<usize> = base.kept.iter().map(|&v| map.map_vertex(v)).collect();
    let contract_gap = relative_gap(&pair_weights(&contracted, &contracted.kept, nc), &pair_weights(&base, &base_rows, nc));
    Ok((delete_gap, contract_gap))
}

/// Total conductance of `S₀–S₁` edges in `Schur(G, S₀ ∪ S₁)`.
pub fn schur_cut_conductance(g: &Graph, s0: &[Vertex], s1: &[Vertex]) -> Result<f64> {
    check_disjoint(g.vertex_count(), s0, s1)?;
    let keep: Vec<Vertex> = s0.iter().chain(s1).copied().collect();
    let sc = schur_complement(g, &keep)?;
    let in0 = mask(g.vertex_count(), s0);
    Ok(sc.graph.non_loop_edges().filter(|e| in0[sc.kept[e.u]] != in0[sc.kept[e.v]]).map(|e| e.conductance).sum())
}

/// Compares the sequence of distinct `keep` vertices visited by a walk on `g`
/// with a walk on `Schur(g, keep)`, both started at `start`.
pub fn walk_trace_check(g: &Graph, keep: &[Vertex], start: Vertex, trace_len: usize, trials: usize, seed: u64) -> Result<StatTest> {
    let sc = schur_complement(g, keep)?;
    let start_idx = sc.index_of(start).ok_or_else(|| Error::Invalid("start must be kept".into()))?;
    if !g.is_connected() || !sc.graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let keep_mask = mask(g.vertex_count(), keep);
    let full = Walker::new(g);
    let reduced = Walker::new(&sc.graph);
    let mut rng_full = rng::stream(seed, 1);
    let mut rng_red = rng::stream(seed, 2);
    let mut a: HashMap<Vec<Vertex>, u64> = HashMap::new();
    let mut b: HashMap<Vec<Vertex>, u64> = HashMap::new();
    for _ in 0..trials {
        let mut trace = Vec::with_capacity(trace_len);
        let mut v = start;
        let mut last = start;
        while trace.len() < trace_len {
            v = full.step(v, &mut rng_full).0;
            if keep_mask[v] && v != last {
                trace.push(v);
                last = v;
            }
        }
        *a.entry(trace).or_default() += 1;
        let mut trace = Vec::with_capacity(trace_len);
        let mut v = start_idx;
        while trace.len() < trace_len {
            v = reduced.step(v, &mut rng_red).0;
            trace.push(sc.kept[v]);
        }
        *b.entry(trace).or_default() += 1;
    }
    Ok(chi_square_two_sample(&a, &b, 1e-3))
}
