//! Dense Laplacian pseudoinverse and the quantities derived from it.
//!
//! The pseudoinverse is formed by grounding the last vertex, inverting the
//! reduced Laplacian with a Cholesky factorisation, and projecting out the
//! all-ones direction. Graphs above [`DENSE_CAP`] vertices are refused.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, Vertex};
use crate::rng;

pub const DENSE_CAP: usize = 5000;

/// Slack used when deciding that a leverage is 0 or 1.
const LEVERAGE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SpectralContext {
    graph: Graph,
    pinv: DMatrix<f64>,
}

impl SpectralContext {
    pub fn new(g: &Graph) -> Result<Self> {
        Self::with_cap(g, DENSE_CAP)
    }

    pub fn with_cap(g: &Graph, cap: usize) -> Result<Self> {
        let n = g.vertex_count();
        if n > cap {
            return Err(Error::TooLarge(n, cap));
        }
        if n == 0 || !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(SpectralContext { graph: g.clone(), pinv: laplacian_pinv(g)? })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// `b_st^T L^+ b_xy`.
    pub fn form(&self, s: Vertex, t: Vertex, x: Vertex, y: Vertex) -> f64 {
        let p = &self.pinv;
        p[(s, x)] - p[(s, y)] - p[(t, x)] + p[(t, y)]
    }

    pub fn resistance(&self, u: Vertex, v: Vertex) -> f64 {
        if u == v {
            0.0
        } else {
            self.form(u, v, u, v).max(0.0)
        }
    }

    /// `L^+ b_st`, the potentials of one unit of current from `s` to `t`.
    pub fn st_potentials(&self, s: Vertex, t: Vertex) -> Vec<f64> {
        (0..self.vertex_count()).map(|x| self.pinv[(x, s)] - self.pinv[(x, t)]).collect()
    }

    pub fn potentials(&self, demand: &[f64]) -> Result<Vec<f64>> {
        let n = self.vertex_count();
        if demand.len() != n {
            return Err(Error::Invalid(format!("demand has length {}, expected {n}", demand.len())));
        }
        let sum: f64 = demand.iter().sum();
        let scale: f64 = demand.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if sum.abs() > 1e-9 * scale {
            return Err(Error::UnbalancedDemand(sum));
        }
        let d = nalgebra::DVector::from_column_slice(demand);
        Ok((&self.pinv * d).iter().copied().collect())
    }

    /// `b_st^T L^+ b_f` with `f` oriented from its `u` to its `v`.
    pub fn edge_form(&self, s: Vertex, t: Vertex, f: EdgeId) -> Result<f64> {
        let e = self.graph.try_edge(f)?;
        Ok(self.form(s, t, e.u, e.v))
    }

    /// Leverage score `c_e · Reff(e)`; zero for self-loops.
    pub fn leverage(&self, e: EdgeId) -> Result<f64> {
        let e = self.graph.try_edge(e)?;
        if e.is_loop() {
            return Ok(0.0);
        }
        Ok((e.conductance * self.resistance(e.u, e.v)).clamp(0.0, 1.0))
    }

    pub fn leverages(&self) -> Vec<(EdgeId, f64)> {
        self.graph
            .edges()
            .iter()
            .map(|e| {
                let lev = if e.is_loop() { 0.0 } else { (e.conductance * self.resistance(e.u, e.v)).clamp(0.0, 1.0) };
                (e.id, lev)
            })
            .collect()
    }

    /// Current on each edge (oriented `u → v`) for a unit `s → t` flow.
    pub fn flow(&self, s: Vertex, t: Vertex) -> Vec<(EdgeId, f64)> {
        let p = self.st_potentials(s, t);
        self.graph.edges().iter().map(|e| (e.id, e.conductance * (p[e.u] - p[e.v]))).collect()
    }

    pub fn energy(&self, s: Vertex, t: Vertex) -> f64 {
        let p = self.st_potentials(s, t);
        self.graph.non_loop_edges().map(|e| e.conductance * (p[e.u] - p[e.v]).powi(2)).sum()
    }

    /// `b_st^T L^+_{I\f} d` from quantities of the current graph.
    pub fn sm_delete(&self, s: Vertex, t: Vertex, f: EdgeId, demand: &[f64]) -> Result<f64> {
        let (base, cross_st, cross_d, e) = self.rank_one_parts(s, t, f, demand)?;
        let lev = e.conductance * e.resistance_form;
        if lev > 1.0 - LEVERAGE_SLACK {
            return Err(Error::Numerical(format!("edge {f:?} is a bridge; deletion disconnects")));
        }
        Ok(base + cross_st * cross_d / (e.resistance() * (1.0 - lev)))
    }

    /// `b_st^T L^+_{I/f} d` from quantities of the current graph.
    pub fn sm_contract(&self, s: Vertex, t: Vertex, f: EdgeId, demand: &[f64]) -> Result<f64> {
        let (base, cross_st, cross_d, e) = self.rank_one_parts(s, t, f, demand)?;
        let lev = e.conductance * e.resistance_form;
        if lev < LEVERAGE_SLACK {
            return Err(Error::Numerical(format!("edge {f:?} is a self-loop; contraction undefined")));
        }
        Ok(base - cross_st * cross_d / (e.resistance() * lev))
    }

    fn rank_one_parts(&self, s: Vertex, t: Vertex, f: EdgeId, demand: &[f64]) -> Result<(f64, f64, f64, EdgeInfo)> {
        let e = self.graph.try_edge(f)?;
        let pd = self.potentials(demand)?;
        let base = pd[s] - pd[t];
        let cross_st = self.form(s, t, e.u, e.v);
        let cross_d = pd[e.u] - pd[e.v];
        let info = EdgeInfo { conductance: e.conductance, resistance_form: self.form(e.u, e.v, e.u, e.v) };
        Ok((base, cross_st, cross_d, info))
    }

    pub fn min_max_resistance(&self) -> (f64, f64) {
        let n = self.vertex_count();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for u in 0..n {
            for v in u + 1..n {
                let r = self.resistance(u, v);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }
}

struct EdgeInfo {
    conductance: f64,
    resistance_form: f64,
}

impl EdgeInfo {
    fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }
}

/// Pseudoinverse of the Laplacian of a connected graph.
pub fn laplacian_pinv(g: &Graph) -> Result<DMatrix<f64>> {
    let n = g.vertex_count();
    if n == 1 {
        return Ok(DMatrix::zeros(1, 1));
    }
    let l = g.laplacian();
    let reduced = l.view((0, 0), (n - 1, n - 1)).into_owned();
    let chol = reduced.cholesky().ok_or_else(|| Error::Numerical("grounded Laplacian is not positive definite".into()))?;
    let inv = chol.inverse();
    let mut x = DMatrix::zeros(n, n);
    x.view_mut((0, 0), (n - 1, n - 1)).copy_from(&inv);
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| x.row(i).sum() / nf).collect();
    let total_mean = row_mean.iter().sum::<f64>() / nf;
    let mut p = x;
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] += total_mean - row_mean[i] - row_mean[j];
        }
    }
    Ok(p)
}

/// Low-distortion embedding whose squared distances approximate effective resistances.
#[derive(Clone, Debug)]
pub struct ResistanceEmbedding {
    coords: DMatrix<f64>,
    pub dim: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl ResistanceEmbedding {
    /// Squared embedded distance `‖D(u) − D(v)‖²`.
    pub fn dist2(&self, u: Vertex, v: Vertex) -> f64 {
        self.coords.column(u).iter().zip(self.coords.column(v).iter()).map(|(a, b)| (a - b).powi(2)).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.ncols()
    }
}

pub const JL_EPSILON: f64 = 0.5;
const JL_CONSTANT: f64 = 24.0;

pub fn jl_dimension(n: usize, eps: f64) -> usize {
    (JL_CONSTANT * (n.max(3) as f64).ln() / (eps * eps)).ceil() as usize
}

/// Random ±1/√d projection of `W^{1/2} B L^+`.
pub fn jl_embed(ctx: &SpectralContext, seed: u64) -> ResistanceEmbedding {
    let g = ctx.graph();
    let n = g.vertex_count();
    let d = jl_dimension(n, JL_EPSILON);
    let mut rng = rng::from_seed(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let mut y = DMatrix::zeros(d, n);
    for e in g.non_loop_edges() {
        let w = e.conductance.sqrt();
        for i in 0..d {
            let q = if rng.gen::<bool>() { scale } else { -scale };
            y[(i, e.u)] += q * w;
            y[(i, e.v)] -= q * w;
        }
    }
    ResistanceEmbedding { coords: y * ctx.pinv(), dim: d, seed, epsilon: JL_EPSILON }
}
