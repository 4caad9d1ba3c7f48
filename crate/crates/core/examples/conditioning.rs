//! Conditioning on a set of edges one at a time, then finishing with Wilson.

use ust_core::conditioning::{conditioned_tree_frequencies, sample_minor, FreshCoins, MinLeverageFirst};
use ust_core::graph::EdgeId;
use ust_core::harness::graphs::random_connected;
use ust_core::harness::stats::{tv_estimate, tv_threshold};
use ust_core::samplers::enumerate_trees;

fn main() -> ust_core::error::Result<()> {
    let g = random_connected(6, 10, 2.0, 2)?;
    let f_set: Vec<EdgeId> = g.edge_ids().into_iter().step_by(2).collect();

    let minor = sample_minor(&g, &f_set, &mut MinLeverageFirst, &mut FreshCoins::new(9))?;
    println!("conditioned on {} edges", f_set.len());
    println!("  in tree:     {:?}", minor.in_tree.iter().map(|e| e.0).collect::<Vec<_>>());
    println!("  not in tree: {:?}", minor.not_in_tree.iter().map(|e| e.0).collect::<Vec<_>>());
    println!("  minor has {} vertices and {} edges", minor.graph.vertex_count(), minor.graph.edge_count());

    let dist = enumerate_trees(&g)?;
    let trials = 20_000;
    let freq = conditioned_tree_frequencies(&g, &f_set, true, trials, 4)?;
    println!("TV to the exact distribution: {:.4} (noise level {:.4})", tv_estimate(&freq, &dist)?, tv_threshold(dist.len(), trials));
    Ok(())
}
