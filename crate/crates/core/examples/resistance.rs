//! Effective resistances, leverage scores and electrical flows on a small graph.

use ust_core::graph::Graph;
use ust_core::spectral::SpectralContext;

fn main() -> ust_core::error::Result<()> {
    let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 0.5), (0, 2, 1.0)])?;
    let ctx = SpectralContext::new(&g)?;

    println!("Reff(0,2) = {:.6}", ctx.resistance(0, 2));
    println!("Reff(1,3) = {:.6}", ctx.resistance(1, 3));

    let mut total = 0.0;
    for (e, lev) in ctx.leverages() {
        let edge = g.edge(e).unwrap();
        println!("edge {} ({}-{}, c={}): leverage {:.4}", e.0, edge.u, edge.v, edge.conductance, lev);
        total += lev;
    }
    println!("sum of leverages = {total:.6} (n-1 = {})", g.vertex_count() - 1);

    println!("unit 1->3 flow:");
    for (e, f) in ctx.flow(1, 3) {
        println!("  edge {}: {:+.4}", e.0, f);
    }
    println!("energy = {:.6}", ctx.energy(1, 3));
    Ok(())
}
