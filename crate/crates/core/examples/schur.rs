//! Eliminating interior vertices preserves resistances between the kept ones.

use ust_core::harness::graphs::random_connected;
use ust_core::schur::{associativity_gap, conductance_between, schur_complement, walk_trace_check};
use ust_core::spectral::SpectralContext;

fn main() -> ust_core::error::Result<()> {
    let g = random_connected(8, 14, 2.0, 7)?;
    let keep = [0, 3, 5, 7];
    let sc = schur_complement(&g, &keep)?;
    println!("Schur complement onto {:?}: {} edges", sc.kept, sc.graph.edge_count());
    for e in sc.graph.edges() {
        println!("  {} - {}  c = {:.5}", sc.kept[e.u], sc.kept[e.v], e.conductance);
    }

    let (full, small) = (SpectralContext::new(&g)?, SpectralContext::new(&sc.graph)?);
    println!("Reff(0,7): graph {:.6}, complement {:.6}", full.resistance(0, 7), small.resistance(0, 3));

    println!("associativity gap: {:.2e}", associativity_gap(&g, &[0, 3], &[5, 7])?);
    println!("c({{0,3}}, {{5,7}}) = {:.5}", conductance_between(&g, &[0, 3], &[5, 7])?);

    let t = walk_trace_check(&g, &keep, 0, 4, 20_000, 1)?;
    println!("walk trace vs complement walk: chi2 = {:.2}, p = {:.3}, pass = {}", t.statistic, t.p_value.unwrap_or(f64::NAN), t.pass);
    Ok(())
}
