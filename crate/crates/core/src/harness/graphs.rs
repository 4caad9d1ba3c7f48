//! Seeded graph generators and named families.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Bumped whenever the random generators change their output for a given seed.
pub const GENERATOR_VERSION: u32 = 1;

/// Uniform `m`-edge simple graph on `n` vertices, redrawn until connected, with
/// conductances log-uniform over `decades` orders of magnitude centred on 1.
pub fn random_connected(n: usize, m: usize, decades: f64, seed: u64) -> Result<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    if n < 2 || m + 1 < n || m > pairs.len() {
        return Err(Error::Invalid(format!("no connected simple graph with n={n}, m={m}")));
    }
    let mut rng = rng::from_seed(seed);
    for _ in 0..100_000 {
        let chosen: Vec<(usize, usize)> = pairs.choose_multiple(&mut rng, m).copied().collect();
        let mut sorted = chosen.clone();
        sorted.sort_unstable();
        let edges: Vec<(usize, usize, f64)> = sorted.into_iter().map(|(u, v)| (u, v, 10f64.powf(decades * (rng.gen::<f64>() - 0.5)))).collect();
        let g = Graph::from_edges(n, &edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Invalid("could not draw a connected graph".into()))
}

pub fn path(k: usize) -> Graph {
    let es: Vec<_> = (0..k.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
    Graph::from_edges(k, &es).expect("valid path")
}

pub fn cycle(k: usize) -> Graph {
    let es: Vec<_> = (0..k).map(|i| (i, (i + 1) % k, 1.0)).collect();
    Graph::from_edges(k, &es).expect("valid cycle")
}

pub fn complete(n: usize) -> Graph {
    let es: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v, 1.0))).collect();
    Graph::from_edges(n, &es).expect("valid clique")
}

/// `k` disjoint `s–a_i–b_i–t` paths with unit edges; `s = 0`, `t = 1`. The middle
/// edges `a_i–b_i` have ids `3i + 1`.
pub fn ladder(k: usize) -> Graph {
    let mut es = Vec::new();
    for i in 0..k {
        let a = 2 + 2 * i;
        let b = a + 1;
        es.push((0, a, 1.0));
        es.push((a, b, 1.0));
        es.push((b, 1, 1.0));
    }
    Graph::from_edges(2 + 2 * k, &es).expect("valid ladder")
}

/// Two unit triangles joined by one edge of resistance `ratio`.
pub fn barbell_triangles(ratio: f64) -> Graph {
    Graph::from_edges(6, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0 / ratio), (3, 4, 1.0), (4, 5, 1.0), (5, 3, 1.0)]).expect("valid barbell")
}

/// Every connected simple graph on the labeled vertex set `0..n`, with
/// conductances log-uniform over `decades` decades, drawn per graph from `seed`.
pub fn connected_graphs(n: usize, decades: f64, seed: u64) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut out = Vec::new();
    for bits in 0u64..1 << pairs.len() {
        if (bits.count_ones() as usize) + 1 < n {
            continue;
        }
        let mut rng = rng::stream(seed, bits);
        let edges: Vec<(usize, usize, f64)> =
            pairs.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &(u, v))| (u, v, 10f64.powf(decades * (rng.gen::<f64>() - 0.5)))).collect();
        if let Ok(g) = Graph::from_edges(n, &edges) {
            if g.is_connected() {
                out.push(g);
            }
        }
    }
    out
}

/// Unit cliques of the given sizes, consecutive ones joined by a single edge of
/// resistance `bridge`. Clique `i` occupies a contiguous vertex range.
pub fn clique_chain(sizes: &[usize], bridge: f64) -> Result<Graph> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Invalid("clique sizes must be positive".into()));
    }
    let mut es = Vec::new();
    let mut start = 0;
    for (i, &k) in sizes.iter().enumerate() {
        for u in start..start + k {
            for v in u + 1..start + k {
                es.push((u, v, 1.0));
            }
        }
        if i > 0 {
            es.push((start - 1, start, 1.0 / bridge));
        }
        start += k;
    }
    Graph::from_edges(start, &es)
}
