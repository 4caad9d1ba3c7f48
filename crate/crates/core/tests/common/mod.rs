//! Independent recomputations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;

use ust_core::fixing::oracle_rho;
use ust_core::graph::{EdgeId, Graph, Vertex};
use ust_core::harness::graphs::random_connected;
use ust_core::harness::verify::low_leverage_difference;

/// Laplacian pseudoinverse via `(L + J/n)⁻¹ − J/n`, independent of the library's solver.
pub fn pinv(g: &Graph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for e in g.non_loop_edges() {
        let c = e.conductance;
        l[(e.u, e.u)] += c;
        l[(e.v, e.v)] += c;
        l[(e.u, e.v)] -= c;
        l[(e.v, e.u)] -= c;
    }
    let j = DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);
    (l + &j).try_inverse().unwrap() - j
}

pub fn quad(p: &DMatrix<f64>, (a, b): (Vertex, Vertex), (x, y): (Vertex, Vertex)) -> f64 {
    p[(a, x)] - p[(a, y)] - p[(b, x)] + p[(b, y)]
}

/// `Σ_{w∈T} c^{J′}_{hw} Reff(h, w)` where `J′` is the Schur complement of `g`
/// onto `{h} ∪ T`, computed by the block formula.
pub fn schur_degree(g: &Graph, h: Vertex, t: &[Vertex]) -> f64 {
    let n = g.vertex_count();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for e in g.non_loop_edges() {
        let c = e.conductance;
        l[(e.u, e.u)] += c;
        l[(e.v, e.v)] += c;
        l[(e.u, e.v)] -= c;
        l[(e.v, e.u)] -= c;
    }
    let keep: Vec<Vertex> = std::iter::once(h).chain(t.iter().copied()).collect();
    let elim: Vec<Vertex> = (0..n).filter(|v| !keep.contains(v)).collect();
    let sub = |rows: &[Vertex], cols: &[Vertex]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| l[(rows[i], cols[j])]);
    let schur =
        if elim.is_empty() { sub(&keep, &keep) } else { sub(&keep, &keep) - sub(&keep, &elim) * sub(&elim, &elim).try_inverse().unwrap() * sub(&elim, &keep) };
    let p = pinv(g);
    t.iter().enumerate().map(|(i, &w)| -schur[(0, i + 1)] * quad(&p, (h, w), (h, w))).sum()
}

/// Recomputes all six stability inequalities from scratch for one edge.
#[allow(clippy::too_many_arguments)]
pub fn recheck(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex], a_set: &[EdgeId], b_set: &[EdgeId], w_len: usize, f: EdgeId) -> ([f64; 6], [f64; 6]) {
    let (j, s, sp, map) = ust_core::schur::identify_pair(g, s_set, sp_set).unwrap();
    let pj = pinv(&j);
    let reff = quad(&pj, (s, sp), (s, sp));
    let phi: Vec<f64> = (0..j.vertex_count()).map(|x| quad(&pj, (s, sp), (x, sp))).collect();
    let (hs, ms) = g.identify(s_set).unwrap();
    let (hp, mp) = g.identify(sp_set).unwrap();
    let (ps, pp) = (pinv(&hs), pinv(&hp));
    let (s_in_s, sp_in_p) = (ms.map_vertex(s_set[0]), mp.map_vertex(sp_set[0]));
    let c = 1.0 / reff;
    let delta_fwd = schur_degree(&hs, s_in_s, &ms.map_set(sp_set));
    let delta_bwd = schur_degree(&hp, sp_in_p, &mp.map_set(s_set));
    let jn = j.vertex_count();
    let r_min =
        (0..jn).flat_map(|a| (0..jn).map(move |b| (a, b))).filter(|(a, b)| a != b).map(|(a, b)| quad(&pj, (a, b), (a, b))).fold(f64::INFINITY, f64::min);
    let scale = oracle_rho(g) / w_len as f64;
    let ends = |e: EdgeId| {
        let e = g.edge(e).unwrap();
        (map[e.u], map[e.v])
    };
    let deferred: f64 = a_set.iter().map(|&e| ends(e)).map(|(u, v)| 2.0 * phi[s] - phi[u] - phi[v]).sum::<f64>()
        + b_set.iter().map(|&e| ends(e)).map(|(u, v)| phi[u] + phi[v] - 2.0 * phi[sp]).sum::<f64>();
    let n = g.vertex_count() as f64;
    let rhs = [scale * delta_fwd / c, scale * delta_bwd / c, scale * delta_fwd / c, scale * delta_bwd / c, scale * deferred + r_min / n.powi(4), scale * reff];
    let fe = g.edge(f).unwrap();
    let (fa, fb) = (map[fe.u], map[fe.v]);
    let rf = fe.resistance();
    let drop = phi[fa] - phi[fb];
    let mut lhs = [0.0; 6];
    for (side, set) in [(0usize, sp_set), (1, s_set)] {
        for &w in set {
            let (mut cond, mut flow) = (0.0, 0.0);
            for e in g.non_loop_edges().filter(|e| e.touches(w)) {
                let x = map[e.other(w).unwrap()];
                if side == 0 {
                    cond += drop.abs() * quad(&pj, (fa, fb), (x, sp)).abs() / (rf * e.resistance());
                    flow += (phi[x] - phi[sp]) / e.resistance();
                } else {
                    cond += drop.abs() * quad(&pj, (fa, fb), (s, x)).abs() / (rf * e.resistance());
                    flow += (phi[s] - phi[x]) / e.resistance();
                }
            }
            if side == 0 {
                let ws = ms.map_vertex(w);
                lhs[0] += quad(&ps, (s_in_s, ws), (s_in_s, ws)) * cond;
                lhs[2] += quad(&ps, (s_in_s, ws), (ms.map_vertex(fe.u), ms.map_vertex(fe.v))).powi(2) / rf * flow;
            } else {
                let wp = mp.map_vertex(w);
                lhs[1] += quad(&pp, (sp_in_p, wp), (sp_in_p, wp)) * cond;
                lhs[3] += quad(&pp, (sp_in_p, wp), (mp.map_vertex(fe.u), mp.map_vertex(fe.v))).powi(2) / rf * flow;
            }
        }
    }
    for &e in a_set {
        let (u, v) = ends(e);
        lhs[4] += drop.abs() * (quad(&pj, (fa, fb), (s, u)) + quad(&pj, (fa, fb), (s, v))).abs() / rf;
    }
    for &e in b_set {
        let (u, v) = ends(e);
        lhs[4] += drop.abs() * (quad(&pj, (fa, fb), (u, sp)) + quad(&pj, (fa, fb), (v, sp))).abs() / rf;
    }
    lhs[5] = drop * drop / rf;
    (lhs, rhs)
}

/// A 30-vertex oracle instance: `S = {0, 1}`, `S′ = {28, 29}`, three deferred
/// edges on each side, and 40 candidates that pass the leverage filter.
pub struct OracleInstance {
    pub g: Graph,
    pub s_set: Vec<Vertex>,
    pub sp_set: Vec<Vertex>,
    pub a_set: Vec<EdgeId>,
    pub b_set: Vec<EdgeId>,
    pub w: Vec<EdgeId>,
}

pub fn oracle_instance(seed: u64) -> OracleInstance {
    let g = random_connected(30, 90, 1.0, seed).unwrap();
    let (s_set, sp_set) = (vec![0, 1], vec![28, 29]);
    let touches = |e: &&ust_core::graph::Edge| [0, 1, 28, 29].iter().any(|&v| e.touches(v));
    let candidates: Vec<EdgeId> = g.non_loop_edges().filter(|e| !touches(e)).map(|e| e.id).collect();
    let (a_set, b_set) = (candidates[..3].to_vec(), candidates[3..6].to_vec());
    let w_all = low_leverage_difference(&g, &s_set, &sp_set, &candidates[6..]).unwrap();
    let w: Vec<EdgeId> = w_all.into_iter().take(40).collect();
    OracleInstance { g, s_set, sp_set, a_set, b_set, w }
}
