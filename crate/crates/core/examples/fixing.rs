//! Restoring an `s–t` resistance and a set conductance after conditioning.

use ust_core::conditioning::FreshCoins;
use ust_core::fixing::{fix, fix_conductance_ratio, set_conductance, special_fix_with, FixConfig, FixResult};
use ust_core::graph::EdgeId;
use ust_core::harness::graphs::{ladder, random_connected};
use ust_core::schur::resistance_by_elimination;
use ust_core::spectral::SpectralContext;

/// `Reff(0, 1)` once the retained edges are deleted; infinite if that disconnects them.
fn repaired_reff(r: &FixResult) -> ust_core::error::Result<f64> {
    let (s, t) = (r.map.map_vertex(0), r.map.map_vertex(1));
    if s == t {
        return Ok(0.0);
    }
    Ok(resistance_by_elimination(&r.repaired_graph()?, s, t).unwrap_or(f64::INFINITY))
}

fn main() -> ust_core::error::Result<()> {
    let g = ladder(64);
    let rungs: Vec<EdgeId> = (0..64).map(|i| EdgeId(3 * i + 1)).collect();
    let before = SpectralContext::new(&g)?.resistance(0, 1);
    for size_constant in [9.0, 0.2] {
        let cfg = FixConfig { size_constant, ..Default::default() };
        let r = special_fix_with(&g, 0, 1, &rungs, 0.3, &cfg, &mut FreshCoins::new(5))?;
        let after = repaired_reff(&r)?;
        println!("special fix on ladder(64), size constant {size_constant}: {} conditioning steps, {} rungs kept", r.audit.len(), r.retained.len());
        println!("  Reff before {before:.5}, after deleting kept rungs {after:.5}");
    }

    let g = random_connected(25, 70, 1.0, 2)?;
    let (s_set, sp_set) = (vec![0, 1], vec![23, 24]);
    let touching = |v: usize| s_set.contains(&v) || sp_set.contains(&v);
    let f_set: Vec<EdgeId> = g.edges().iter().filter(|e| !touching(e.u) && !touching(e.v)).map(|e| e.id).collect();
    let r = fix(&g, &s_set, &sp_set, &[], &f_set, 0.25, 6)?;
    println!("fix on a 25-vertex graph: kept {} of {} edges", r.retained.len(), f_set.len());
    println!("  c(S,S') = {:.5}, repaired/original = {:.4}", set_conductance(&g, &s_set, &sp_set)?, fix_conductance_ratio(&g, &s_set, &sp_set, &[], &r)?);
    Ok(())
}
