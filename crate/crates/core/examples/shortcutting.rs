//! Random walk crossings and the speedup from shortcutting on paths.

use ust_core::graph::EdgeId;
use ust_core::harness::graphs::{complete, path};
use ust_core::shortcutting::{path_shortcut_bench, walk_bound_bench};

fn main() -> ust_core::error::Result<()> {
    for (name, g) in [("path(40)", path(40)), ("K12", complete(12))] {
        for r in [1.0, 4.0] {
            let all: Vec<usize> = (0..g.vertex_count()).collect();
            let w = walk_bound_bench(&g, EdgeId(0), &all, r, 500, 3)?;
            println!("{name}, r = {r}: mean crossings {:.3}, ratio to bound {:.3}", w.mean_crossings, w.ratio);
        }
    }

    println!("k, raw steps, shortcut steps, ratio");
    for k in [16, 32, 64, 128] {
        let b = path_shortcut_bench(k, 500, 8)?;
        println!("{k}, {:.1}, {:.1}, {:.3}", b.raw_mean, b.shortcut_mean, b.ratio);
    }
    Ok(())
}
