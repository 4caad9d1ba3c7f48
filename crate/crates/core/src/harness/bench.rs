//! CSV emitters for `ust bench`. Column order is fixed.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, Vertex};
use crate::pipeline::{exact_tree_sigma1_run, PipelineConfig};
use crate::rng;
use crate::shortcutting::{path_shortcut_bench, walk_bound_bench};

pub const WALKBOUND_HEADER: &str = "edge,radius,trials,mean_crossings,conductance,log_n,ratio,pass";
pub const SHORTCUT_HEADER: &str = "k,trials,raw_mean,shortcut_mean,ratio,mean_recomputes";
pub const PIPELINE_HEADER: &str =
    "run,round,active_parts,conditioned_parts,edges_resolved,max_active_shortcutter_size,conductivity_audit,shrink_ok,raw_steps,shortcut_steps,recomputes";

/// One row per radius: crossings of `edge` while near an unvisited vertex,
/// with every vertex as a target.
pub fn walkbound_csv(g: &Graph, edge: EdgeId, radii: &[f64], trials: usize, seed: u64) -> Result<String> {
    if radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::Invalid("radii must be finite and nonnegative".into()));
    }
    let all: Vec<Vertex> = (0..g.vertex_count()).collect();
    let mut out = format!("{WALKBOUND_HEADER}\n");
    for &r in radii {
        let rep = walk_bound_bench(g, edge, &all, r, trials, seed)?;
        let _ = writeln!(out, "{},{},{},{},{},{},{},{}", edge.0, r, rep.trials, rep.mean_crossings, rep.conductance, rep.log_n, rep.ratio, rep.pass);
    }
    Ok(out)
}

/// Escape cost from the middle of a `k`-vertex path window, raw walk against shortcutting.
pub fn shortcut_csv(ks: &[usize], trials: usize, seed: u64) -> Result<String> {
    if ks.iter().any(|&k| k < 2) {
        return Err(Error::Invalid("window sizes must be at least 2".into()));
    }
    let mut out = format!("{SHORTCUT_HEADER}\n");
    for &k in ks {
        let b = path_shortcut_bench(k, trials, seed)?;
        let _ = writeln!(out, "{},{},{},{},{},{}", b.k, trials, b.raw_mean, b.shortcut_mean, b.ratio, b.mean_recomputes);
    }
    Ok(out)
}

/// Round reports of `runs` pipeline runs with derived seeds.
pub fn pipeline_csv(g: &Graph, runs: usize, cfg: &PipelineConfig) -> Result<String> {
    let mut out = format!("{PIPELINE_HEADER}\n");
    for run in 0..runs {
        let c = PipelineConfig { seed: rng::trial_seed(cfg.seed, run as u64), ..cfg.clone() };
        let rep = exact_tree_sigma1_run(g, &c)?;
        for r in &rep.rounds {
            let _ = writeln!(
                out,
                "{run},{},{},{},{},{},{},{},{},{},{}",
                r.round,
                r.active_parts,
                r.conditioned_parts,
                r.edges_resolved,
                r.max_active_shortcutter_size,
                r.conductivity_audit,
                r.shrink_ok,
                r.walk.raw_steps,
                r.walk.shortcut_steps,
                r.walk.recomputes
            );
        }
    }
    Ok(out)
}
