//! Weighted multigraphs with stable edge identities.
//!
//! Parallel edges are kept as distinct edges. Self-loops are stored (they arise
//! from contraction) but carry no current, so the Laplacian and the samplers
//! ignore them. Vertices are always `0..n`; every minor operation returns a
//! [`MinorMap`] describing how the old vertices map onto the new ones. Edge ids
//! never change across minors, and edges created by splitting remember the
//! original edge they descend from through [`Edge::origin`].

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub origin: EdgeId,
    pub u: Vertex,
    pub v: Vertex,
    pub conductance: f64,
}

impl Edge {
    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn touches(&self, x: Vertex) -> bool {
        self.u == x || self.v == x
    }

    pub fn other(&self, x: Vertex) -> Option<Vertex> {
        if self.u == x {
            Some(self.v)
        } else if self.v == x {
            Some(self.u)
        } else {
            None
        }
    }
}

/// How a minor relates to the graph it was taken from.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorMap {
    /// `vertex_map[old] = new`.
    pub vertex_map: Vec<Vertex>,
    /// Ids of the edges that survive; they keep their ids in the minor.
    pub surviving_edges: Vec<EdgeId>,
}

impl MinorMap {
    pub fn map_vertex(&self, v: Vertex) -> Vertex {
        self.vertex_map[v]
    }

    pub fn map_set(&self, set: &[Vertex]) -> Vec<Vertex> {
        let mut out: Vec<Vertex> = set.iter().map(|&v| self.vertex_map[v]).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn survives(&self, e: EdgeId) -> bool {
        self.surviving_edges.binary_search(&e).is_ok()
    }

    /// The map of `self` followed by `next`.
    pub fn then(&self, next: &MinorMap) -> MinorMap {
        MinorMap {
            vertex_map: self.vertex_map.iter().map(|&v| next.vertex_map[v]).collect(),
            surviving_edges: self.surviving_edges.iter().copied().filter(|e| next.survives(*e)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    slot: Vec<usize>,
    next_id: usize,
    labels: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

pub fn mask(n: usize, set: &[Vertex]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in set {
        m[v] = true;
    }
    m
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { n, edges: Vec::new(), slot: Vec::new(), next_id: 0, labels: (0..n).collect() }
    }

    /// Builds a graph from `(u, v, conductance)` triples; edge ids follow input order.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex, f64)]) -> Result<Self> {
        let mut g = Graph::new(n);
        for &(u, v, c) in edges {
            g.add_edge(u, v, c)?;
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of stored edges, self-loops included.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn non_loop_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_loop()).count()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_ids(&self) -> Vec<EdgeId> {
        self.edges.iter().map(|e| e.id).collect()
    }

    pub fn non_loop_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.is_loop())
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        match self.slot.get(id.0) {
            Some(&p) if p != ABSENT => Some(&self.edges[p]),
            _ => None,
        }
    }

    pub fn try_edge(&self, id: EdgeId) -> Result<&Edge> {
        self.edge(id).ok_or(Error::UnknownEdge(id))
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        self.edge(id).is_some()
    }

    /// Original vertex label of each current vertex (smallest label among merged ones).
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn next_edge_id(&self) -> EdgeId {
        EdgeId(self.next_id)
    }

    pub fn total_conductance(&self) -> f64 {
        self.non_loop_edges().map(|e| e.conductance).sum()
    }

    pub fn add_vertex(&mut self) -> Vertex {
        self.n += 1;
        self.labels.push(usize::MAX);
        self.n - 1
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex, conductance: f64) -> Result<EdgeId> {
        let id = EdgeId(self.next_id);
        self.add_edge_with_origin(u, v, conductance, id)
    }

    pub fn add_edge_with_origin(&mut self, u: Vertex, v: Vertex, conductance: f64, origin: EdgeId) -> Result<EdgeId> {
        let id = EdgeId(self.next_id);
        if u >= self.n {
            return Err(Error::VertexOutOfRange(u));
        }
        if v >= self.n {
            return Err(Error::VertexOutOfRange(v));
        }
        if !(conductance > 0.0 && conductance.is_finite()) {
            return Err(Error::BadConductance(id, conductance));
        }
        self.next_id += 1;
        if self.slot.len() <= id.0 {
            self.slot.resize(id.0 + 1, ABSENT);
        }
        self.slot[id.0] = self.edges.len();
        self.edges.push(Edge { id, origin, u, v, conductance });
        Ok(id)
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Result<Edge> {
        let p = match self.slot.get(id.0) {
            Some(&p) if p != ABSENT => p,
            _ => return Err(Error::UnknownEdge(id)),
        };
        let e = self.edges.remove(p);
        self.reindex_slots();
        Ok(e)
    }

    fn reindex_slots(&mut self) {
        self.slot.iter_mut().for_each(|s| *s = ABSENT);
        for (p, e) in self.edges.iter().enumerate() {
            self.slot[e.id.0] = p;
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut triples = Vec::new();
        let mut max_vertex = None::<usize>;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |reason: &str| Error::Parse { line: i + 1, reason: reason.to_string() };
            if parts.len() != 3 {
                return Err(bad("expected `u v conductance`"));
            }
            let u: usize = parts[0].parse().map_err(|_| bad("bad vertex id"))?;
            let v: usize = parts[1].parse().map_err(|_| bad("bad vertex id"))?;
            let c: f64 = parts[2].parse().map_err(|_| bad("bad conductance"))?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::BadConductance(EdgeId(triples.len()), c));
            }
            max_vertex = Some(max_vertex.unwrap_or(0).max(u).max(v));
            triples.push((u, v, c));
        }
        let n = max_vertex.map_or(0, |m| m + 1);
        if n < 2 {
            return Err(Error::TooFewVertices(n));
        }
        Graph::from_edges(n, &triples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Graph::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.u, e.v, e.conductance);
        }
        s
    }

    /// Neighbour lists of non-loop edges: `(other endpoint, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(Vertex, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            if !e.is_loop() {
                adj[e.u].push((e.v, i));
                adj[e.v].push((e.u, i));
            }
        }
        adj
    }

    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in self.non_loop_edges() {
            d[e.u] += e.conductance;
            d[e.v] += e.conductance;
        }
        d
    }

    /// Component index per vertex, numbered in order of smallest vertex.
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.n);
        for e in self.non_loop_edges() {
            uf.union(e.u, e.v);
        }
        let mut label = vec![usize::MAX; self.n];
        let mut comp = vec![0; self.n];
        let mut next = 0;
        for v in 0..self.n {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            comp[v] = label[r];
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components().iter().all(|&c| c == 0)
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for e in self.non_loop_edges() {
            let c = e.conductance;
            l[(e.u, e.u)] += c;
            l[(e.v, e.v)] += c;
            l[(e.u, e.v)] -= c;
            l[(e.v, e.u)] -= c;
        }
        l
    }

    pub fn boundary(&self, set: &[Vertex]) -> Vec<EdgeId> {
        let m = mask(self.n, set);
        self.edges.iter().filter(|e| m[e.u] != m[e.v]).map(|e| e.id).collect()
    }

    pub fn boundary_conductance(&self, set: &[Vertex]) -> f64 {
        let m = mask(self.n, set);
        self.edges.iter().filter(|e| m[e.u] != m[e.v]).map(|e| e.conductance).sum()
    }

    /// Non-loop edges with both endpoints in `set`.
    pub fn induced_edges(&self, set: &[Vertex]) -> Vec<EdgeId> {
        let m = mask(self.n, set);
        self.non_loop_edges().filter(|e| m[e.u] && m[e.v]).map(|e| e.id).collect()
    }

    /// `|E(S) ∪ ∂S|`: non-loop edges with at least one endpoint in `set`.
    pub fn touching_count(&self, set: &[Vertex]) -> usize {
        let m = mask(self.n, set);
        self.non_loop_edges().filter(|e| m[e.u] || m[e.v]).count()
    }

    /// Merges vertices with equal `class[v]`; classes are renumbered by their smallest member.
    pub fn quotient(&self, class: &[usize]) -> (Graph, MinorMap) {
        let mut rename = std::collections::HashMap::new();
        let mut vertex_map = vec![0; self.n];
        for v in 0..self.n {
            let next = rename.len();
            vertex_map[v] = *rename.entry(class[v]).or_insert(next);
        }
        let n = rename.len();
        let mut labels = vec![usize::MAX; n];
        for v in 0..self.n {
            let t = vertex_map[v];
            labels[t] = labels[t].min(self.labels[v]);
        }
        let edges: Vec<Edge> = self.edges.iter().map(|e| Edge { u: vertex_map[e.u], v: vertex_map[e.v], ..e.clone() }).collect();
        let surviving_edges = edges.iter().map(|e| e.id).collect::<Vec<_>>();
        let mut g = Graph { n, edges, slot: vec![ABSENT; self.slot.len()], next_id: self.next_id, labels };
        g.reindex_slots();
        let mut surviving_edges = surviving_edges;
        surviving_edges.sort_unstable();
        (g, MinorMap { vertex_map, surviving_edges })
    }

    /// Contracts and deletes edge sets in one pass.
    pub fn condition(&self, contract: &[EdgeId], delete: &[EdgeId]) -> Result<(Graph, MinorMap)> {
        let mut uf = UnionFind::new(self.n);
        for &id in contract {
            let e = self.try_edge(id)?;
            uf.union(e.u, e.v);
        }
        for &id in delete {
            self.try_edge(id)?;
        }
        let class: Vec<usize> = (0..self.n).map(|v| uf.find(v)).collect();
        let (mut g, mut map) = self.quotient(&class);
        let mut gone: Vec<EdgeId> = contract.iter().chain(delete).copied().collect();
        gone.sort_unstable();
        gone.dedup();
        g.edges.retain(|e| gone.binary_search(&e.id).is_err());
        g.reindex_slots();
        map.surviving_edges.retain(|e| gone.binary_search(e).is_err());
        Ok((g, map))
    }

    pub fn contract_edge(&self, e: EdgeId) -> Result<(Graph, MinorMap)> {
        self.condition(&[e], &[])
    }

    pub fn delete_edge(&self, e: EdgeId) -> Result<(Graph, MinorMap)> {
        self.condition(&[], &[e])
    }

    pub fn delete_edges(&self, es: &[EdgeId]) -> Result<(Graph, MinorMap)> {
        self.condition(&[], es)
    }

    /// Identifies all of `set` into one vertex.
    pub fn identify(&self, set: &[Vertex]) -> Result<(Graph, MinorMap)> {
        self.identify_many(&[set])
    }

    /// Identifies each set into its own vertex. Sets must be nonempty and disjoint.
    pub fn identify_many(&self, sets: &[&[Vertex]]) -> Result<(Graph, MinorMap)> {
        let mut class: Vec<usize> = (0..self.n).collect();
        let mut seen = vec![false; self.n];
        for set in sets {
            let Some(&first) = set.first() else { return Err(Error::EmptySet) };
            for &v in set.iter() {
                if v >= self.n {
                    return Err(Error::VertexOutOfRange(v));
                }
                if seen[v] {
                    return Err(Error::Overlap);
                }
                seen[v] = true;
                class[v] = first;
            }
        }
        Ok(self.quotient(&class))
    }

    /// Induced subgraph on `vertices`, reindexed in the given order, loops kept.
    pub fn induced_subgraph(&self, vertices: &[Vertex]) -> Graph {
        let mut index = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| index[e.u] != usize::MAX && index[e.v] != usize::MAX)
            .map(|e| Edge { u: index[e.u], v: index[e.v], ..e.clone() })
            .collect();
        let labels = vertices.iter().map(|&v| self.labels[v]).collect();
        let mut g = Graph { n: vertices.len(), edges, slot: vec![ABSENT; self.slot.len()], next_id: self.next_id, labels };
        g.reindex_slots();
        g
    }

    /// Keeps only the edges satisfying `keep`, with all vertices retained.
    pub fn filter_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> Graph {
        let mut g = self.clone();
        g.edges.retain(|e| keep(e));
        g.reindex_slots();
        g
    }

    pub fn without_loops(&self) -> Graph {
        self.filter_edges(|e| !e.is_loop())
    }
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Whether `edges` (ids of `g`) form a spanning tree of `g`.
pub fn is_spanning_tree(g: &Graph, edges: &[EdgeId]) -> bool {
    if edges.len() + 1 != g.vertex_count() {
        return false;
    }
    let mut uf = UnionFind::new(g.vertex_count());
    edges.iter().all(|&id| match g.edge(id) {
        Some(e) => uf.union(e.u, e.v),
        None => false,
    })
}
