//! Approximate sampling on a graph with widely spread resistances.

use ust_core::harness::graphs::barbell_triangles;
use ust_core::harness::stats::{frequencies, run_trials, tv_estimate};
use ust_core::pipeline::{apx_tree, apx_tree_with, ApxConfig};
use ust_core::samplers::enumerate_trees;

fn main() -> ust_core::error::Result<()> {
    let g = barbell_triangles(1e12);
    let (_, report) = apx_tree_with(&g, 0.1, 1, &ApxConfig::default())?;
    println!("log rho = {:.2}, buckets {:?}", report.log_rho, report.buckets);
    for r in &report.rounds {
        println!("  bucket {}: conditioned {} edges, exact sampler saw {}", r.bucket, r.conditioned, r.work);
    }

    let dist = enumerate_trees(&g)?;
    for eps in [0.2, 0.1] {
        let trees = run_trials(20_000, 2, |s| Ok(apx_tree(&g, eps, s)?.edges))?;
        println!("eps = {eps}: TV to the exact distribution = {:.4}", tv_estimate(&frequencies(trees), &dist)?);
    }
    Ok(())
}
