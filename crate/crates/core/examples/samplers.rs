//! Exact samplers compared against the enumerated tree distribution.

use ust_core::error::Result;
use ust_core::graph::Graph;
use ust_core::harness::graphs::random_connected;
use ust_core::harness::stats::{frequencies, run_trials, tv_estimate, tv_threshold};
use ust_core::samplers::{aldous_broder, enumerate_trees, leverage_chain, matrix_tree_weight, wilson, TreeSample};

type Sampler = fn(&Graph, u64) -> Result<TreeSample>;

fn main() -> Result<()> {
    let g = random_connected(6, 9, 2.0, 3)?;
    let dist = enumerate_trees(&g)?;
    println!("{} spanning trees, weight {:.4} (matrix tree {:.4})", dist.len(), dist.total_weight, matrix_tree_weight(&g)?);

    let trials = 20_000;
    let samplers: [(&str, Sampler); 3] = [("aldous-broder", aldous_broder), ("wilson", wilson), ("leverage chain", leverage_chain)];
    for (name, f) in samplers {
        let trees = run_trials(trials, 11, |s| Ok(f(&g, s)?.edges))?;
        let tv = tv_estimate(&frequencies(trees), &dist)?;
        println!("{name:>15}: TV = {tv:.4} (noise level {:.4})", tv_threshold(dist.len(), trials));
    }

    let t = wilson(&g, 5)?;
    println!("one Wilson tree: {:?} after {} walk steps", t.edges.iter().map(|e| e.0).collect::<Vec<_>>(), t.walk_steps);
    Ok(())
}
