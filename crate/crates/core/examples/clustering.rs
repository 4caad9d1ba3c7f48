//! Covering communities and Voronoi shortcutters around their clusters.

use ust_core::clustering::{covering_community, covers, CommunityConfig};
use ust_core::harness::graphs::clique_chain;
use ust_core::shortcutting::{voronoi_sandwich_check, voronoi_shortcutters};
use ust_core::spectral::{jl_embed, SpectralContext};

fn main() -> ust_core::error::Result<()> {
    let g = clique_chain(&[5, 4, 4, 3], 1e4)?;
    let ctx = SpectralContext::new(&g)?;
    let emb = jl_embed(&ctx, 1);
    let all: Vec<usize> = (0..g.vertex_count()).collect();

    let community = covering_community(&ctx, &emb, &all, 1.0, &CommunityConfig::default())?;
    println!("radius {} with {} families; covers every vertex: {}", community.radius, community.families.len(), covers(&community, &all));

    for (i, fam) in community.families.iter().enumerate() {
        let sizes: Vec<usize> = fam.clusters.iter().map(|c| c.vertices.len()).collect();
        println!("family {i}: cluster sizes {sizes:?}, separation {:.2}", fam.separation(&ctx));
        if fam.clusters.len() < 2 {
            continue;
        }
        let shortcutters = voronoi_shortcutters(&g, fam)?;
        let report = voronoi_sandwich_check(&g, fam, &shortcutters)?;
        for (sc, c) in shortcutters.iter().zip(&fam.clusters) {
            println!("  core around {} -> shortcutter of size {}", c.center, sc.size(&g));
        }
        println!("  sandwich holds: {}", report.pass());
    }
    Ok(())
}
