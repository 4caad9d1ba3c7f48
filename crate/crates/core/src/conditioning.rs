//! Conditioning a tree sample on the fate of chosen edges.
//!
//! An edge `f` is never decided directly. It is first split into two copies
//! whose leverage lies in `[1/4, 3/4]`: a series pair of conductance `2c` when
//! `lev(f) < 1/2`, a parallel pair of conductance `c/2` otherwise. Deciding the
//! first copy either settles `f` or leaves the second copy standing in for it.
//!
//! The coin that decides a copy is pluggable. [`FreshCoins`] flips it with
//! probability equal to the copy's leverage. [`TreeCoupledCoins`] reproduces a
//! tree that is already known, which lets a conditioning process replay a
//! sample obtained elsewhere.

use std::collections::HashSet;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, MinorMap, Vertex};
use crate::harness::stats::{frequencies, run_trials, tv_test, Frequencies, StatTest};
use crate::rng::{self, Rng};
use crate::samplers::{enumerate_trees, wilson};
use crate::spectral::SpectralContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SplitMode {
    Series,
    Parallel,
}

pub fn split_mode(leverage: f64) -> SplitMode {
    if leverage >= 0.5 {
        SplitMode::Parallel
    } else {
        SplitMode::Series
    }
}

/// Leverage of either copy after splitting an edge of leverage `lev`.
pub fn copy_leverage(lev: f64) -> f64 {
    match split_mode(lev) {
        SplitMode::Series => lev / 2.0 + 0.5,
        SplitMode::Parallel => lev / 2.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitRecord {
    pub original: EdgeId,
    pub copies: (EdgeId, EdgeId),
    pub mode: SplitMode,
    pub leverage: f64,
    pub copy_leverage: f64,
    pub midpoint: Option<Vertex>,
}

/// Splits `e` using its leverage in `ctx`, which must describe `g`.
pub fn split_edge(g: &Graph, e: EdgeId, ctx: &SpectralContext) -> Result<(Graph, SplitRecord)> {
    split_edge_with_leverage(g, e, ctx.leverage(e)?)
}

pub fn split_edge_with_leverage(g: &Graph, e: EdgeId, leverage: f64) -> Result<(Graph, SplitRecord)> {
    let edge = g.try_edge(e)?.clone();
    if edge.is_loop() {
        return Err(Error::Invalid(format!("cannot split self-loop {e:?}")));
    }
    let mode = split_mode(leverage);
    let mut h = g.clone();
    h.remove_edge(e)?;
    let (copies, midpoint) = match mode {
        SplitMode::Series => {
            let m = h.add_vertex();
            let a = h.add_edge_with_origin(edge.u, m, 2.0 * edge.conductance, edge.origin)?;
            let b = h.add_edge_with_origin(m, edge.v, 2.0 * edge.conductance, edge.origin)?;
            ((a, b), Some(m))
        }
        SplitMode::Parallel => {
            let a = h.add_edge_with_origin(edge.u, edge.v, edge.conductance / 2.0, edge.origin)?;
            let b = h.add_edge_with_origin(edge.u, edge.v, edge.conductance / 2.0, edge.origin)?;
            ((a, b), None)
        }
    };
    Ok((h, SplitRecord { original: e, copies, mode, leverage, copy_leverage: copy_leverage(leverage), midpoint }))
}

/// Source of the binary decisions made while conditioning.
pub trait Coins {
    /// Whether the first copy of a split edge (descending from `origin`) is contracted.
    fn contract_copy(&mut self, origin: EdgeId, mode: SplitMode, copy_leverage: f64) -> bool;
}

pub struct FreshCoins {
    rng: Rng,
}

impl FreshCoins {
    pub fn new(seed: u64) -> Self {
        FreshCoins { rng: rng::from_seed(seed) }
    }
}

impl Coins for FreshCoins {
    fn contract_copy(&mut self, _origin: EdgeId, _mode: SplitMode, copy_leverage: f64) -> bool {
        self.rng.gen::<f64>() < copy_leverage
    }
}

/// Decisions consistent with a known tree, given as the set of original edge ids it uses.
pub struct TreeCoupledCoins {
    in_tree: HashSet<EdgeId>,
    rng: Rng,
}

impl TreeCoupledCoins {
    pub fn new(in_tree: impl IntoIterator<Item = EdgeId>, seed: u64) -> Self {
        TreeCoupledCoins { in_tree: in_tree.into_iter().collect(), rng: rng::from_seed(seed) }
    }
}

impl Coins for TreeCoupledCoins {
    fn contract_copy(&mut self, origin: EdgeId, mode: SplitMode, _copy_leverage: f64) -> bool {
        let inside = self.in_tree.contains(&origin);
        match (mode, inside) {
            (SplitMode::Series, true) => true,
            (SplitMode::Parallel, false) => false,
            _ => self.rng.gen::<bool>(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Resolution {
    /// The remaining copy now stands in for the edge.
    Pending(EdgeId),
    InTree,
    NotInTree,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditioningStep {
    pub edge: EdgeId,
    pub origin: EdgeId,
    pub mode: Option<SplitMode>,
    pub leverage: f64,
    pub copy_contracted: bool,
    pub resolution: Resolution,
}

/// One round of split-and-condition on `f`. Returns the new graph, the step, and
/// the vertex map from `g` into it.
pub fn condition_step(g: &Graph, f: EdgeId, ctx: &SpectralContext, coins: &mut dyn Coins) -> Result<(Graph, ConditioningStep, MinorMap)> {
    let edge = g.try_edge(f)?.clone();
    if edge.is_loop() {
        let (h, map) = g.delete_edge(f)?;
        let step = ConditioningStep { edge: f, origin: edge.origin, mode: None, leverage: 0.0, copy_contracted: false, resolution: Resolution::NotInTree };
        return Ok((h, step, map));
    }
    let (split, rec) = split_edge(g, f, ctx)?;
    let contract = coins.contract_copy(edge.origin, rec.mode, rec.copy_leverage);
    let (a, b) = rec.copies;
    let (to_contract, to_delete, resolution) = match (rec.mode, contract) {
        (SplitMode::Series, true) => (vec![a], vec![], Resolution::Pending(b)),
        (SplitMode::Series, false) => (vec![b], vec![a], Resolution::NotInTree),
        (SplitMode::Parallel, true) => (vec![a], vec![b], Resolution::InTree),
        (SplitMode::Parallel, false) => (vec![], vec![a], Resolution::Pending(b)),
    };
    let (h, map) = split.condition(&to_contract, &to_delete)?;
    let map = MinorMap {
        vertex_map: map.vertex_map[..g.vertex_count()].to_vec(),
        surviving_edges: map.surviving_edges.into_iter().filter(|e| g.contains_edge(*e)).collect(),
    };
    let step = ConditioningStep { edge: f, origin: edge.origin, mode: Some(rec.mode), leverage: rec.leverage, copy_contracted: contract, resolution };
    Ok((h, step, map))
}

/// Chooses which pending edge to condition next.
pub trait SelectionRule {
    fn select(&mut self, g: &Graph, ctx: &SpectralContext, pending: &[EdgeId]) -> usize;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FileOrder;

impl SelectionRule for FileOrder {
    fn select(&mut self, _g: &Graph, _ctx: &SpectralContext, _pending: &[EdgeId]) -> usize {
        0
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MinLeverageFirst;

impl SelectionRule for MinLeverageFirst {
    fn select(&mut self, _g: &Graph, ctx: &SpectralContext, pending: &[EdgeId]) -> usize {
        let lev = |e: EdgeId| ctx.leverage(e).unwrap_or(0.0);
        (0..pending.len()).min_by(|&i, &j| lev(pending[i]).total_cmp(&lev(pending[j])).then(i.cmp(&j))).unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct MinorSample {
    pub graph: Graph,
    pub map: MinorMap,
    /// Original ids of conditioned edges that belong to the tree.
    pub in_tree: Vec<EdgeId>,
    pub not_in_tree: Vec<EdgeId>,
    pub steps: Vec<ConditioningStep>,
}

/// Samples `G[F]`: conditions every edge of `f_set` and returns the resulting minor.
pub fn sample_minor(g: &Graph, f_set: &[EdgeId], rule: &mut dyn SelectionRule, coins: &mut dyn Coins) -> Result<MinorSample> {
    for &f in f_set {
        g.try_edge(f)?;
    }
    let mut pending: Vec<EdgeId> = f_set.to_vec();
    pending.dedup();
    let mut graph = g.clone();
    let mut map = MinorMap { vertex_map: (0..g.vertex_count()).collect(), surviving_edges: g.edge_ids() };
    map.surviving_edges.sort_unstable();
    let (mut in_tree, mut not_in_tree, mut steps) = (Vec::new(), Vec::new(), Vec::new());
    while !pending.is_empty() {
        let ctx = SpectralContext::new(&graph)?;
        let i = rule.select(&graph, &ctx, &pending).min(pending.len() - 1);
        let (h, step, m) = condition_step(&graph, pending[i], &ctx, coins)?;
        match step.resolution {
            Resolution::Pending(copy) => pending[i] = copy,
            Resolution::InTree => {
                pending.remove(i);
                in_tree.push(step.origin);
            }
            Resolution::NotInTree => {
                pending.remove(i);
                not_in_tree.push(step.origin);
            }
        }
        map = map.then(&m);
        graph = h;
        steps.push(step);
    }
    in_tree.sort_unstable();
    not_in_tree.sort_unstable();
    Ok(MinorSample { graph, map, in_tree, not_in_tree, steps })
}

/// Trees drawn by conditioning on `f_set` and then completing the minor with
/// Wilson's algorithm, tallied by sorted edge set.
pub fn conditioned_tree_frequencies(g: &Graph, f_set: &[EdgeId], min_leverage_first: bool, trials: usize, seed: u64) -> Result<Frequencies> {
    let trees = run_trials(trials, seed, |s| {
        let mut coins = FreshCoins::new(s);
        let sample =
            if min_leverage_first { sample_minor(g, f_set, &mut MinLeverageFirst, &mut coins)? } else { sample_minor(g, f_set, &mut FileOrder, &mut coins)? };
        let rest = wilson(&sample.graph, s ^ 0x5eed)?;
        let mut tree = sample.in_tree;
        tree.extend(rest.edges);
        tree.sort_unstable();
        Ok(tree)
    })?;
    Ok(frequencies(trees))
}

/// Conditions on `f_set` and then samples the rest of the tree exactly, comparing
/// the combined trees with the exact distribution of `g` in total variation.
pub fn conditioning_equivalence_check(g: &Graph, f_set: &[EdgeId], min_leverage_first: bool, trials: usize, seed: u64, tv_threshold: f64) -> Result<StatTest> {
    let exact = enumerate_trees(g)?;
    tv_test(&conditioned_tree_frequencies(g, f_set, min_leverage_first, trials, seed)?, &exact, tv_threshold)
}
