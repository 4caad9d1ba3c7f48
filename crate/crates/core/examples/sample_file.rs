//! Reads an edge list from a file (or uses a triangle) and prints one Wilson tree.

use ust_core::graph::Graph;
use ust_core::samplers::wilson;

fn main() -> ust_core::error::Result<()> {
    let g = match std::env::args().nth(1) {
        Some(path) => Graph::load(path)?,
        None => Graph::parse("0 1 1\n1 2 1\n2 0 2\n")?,
    };
    let t = wilson(&g, 0)?;
    for id in t.edges {
        let e = g.edge(id).unwrap();
        println!("{} {} {}", e.u, e.v, e.conductance);
    }
    Ok(())
}
