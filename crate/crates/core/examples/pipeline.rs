//! The exact round-based sampler on a chain of cliques, with per-round accounting.

use ust_core::harness::graphs::clique_chain;
use ust_core::pipeline::{exact_tree_sigma1_run, PipelineConfig};

fn main() -> ust_core::error::Result<()> {
    let g = clique_chain(&[8, 5, 3, 2], 1e6)?;
    let run = exact_tree_sigma1_run(&g, &PipelineConfig::with_seed(3))?;
    println!("m = {}, sigma1 = {}, round bound {}", g.edge_count(), run.sigma1, run.round_bound);
    print!("{}", run.rounds_csv());
    println!("shrinkage holds: {}", run.shrinkage_holds());
    let ids: Vec<usize> = run.tree.edges.iter().map(|e| e.0).collect();
    println!("tree: {ids:?}");
    Ok(())
}
