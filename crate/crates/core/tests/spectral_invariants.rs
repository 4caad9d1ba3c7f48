use proptest::prelude::*;

use ust_core::graph::{Graph, Vertex};
use ust_core::harness::graphs::{self, random_connected};
use ust_core::schur::conductance_between;
use ust_core::shortcutting::hit_probabilities;
use ust_core::spectral::SpectralContext;

fn graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (3..=max_n, any::<u64>(), 0.0..4.0f64).prop_flat_map(|(n, seed, decades)| {
        let max_m = n * (n - 1) / 2;
        // Sparser draws are almost never connected for large n.
        let min_m = ((n as f64 * (n as f64).ln() / 2.0).ceil() as usize).clamp(n - 1, max_m);
        (min_m..=max_m).prop_map(move |m| random_connected(n, m, decades, seed).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn foster_sum(g in graph(50)) {
        let ctx = SpectralContext::new(&g).unwrap();
        let sum: f64 = ctx.leverages().iter().map(|(_, l)| l).sum();
        prop_assert!((sum - (g.vertex_count() - 1) as f64).abs() < 1e-8);
    }

    #[test]
    fn resistance_is_a_metric(g in graph(14)) {
        let ctx = SpectralContext::new(&g).unwrap();
        let n = g.vertex_count();
        for a in 0..n {
            for b in 0..n {
                prop_assert!((ctx.resistance(a, b) - ctx.resistance(b, a)).abs() < 1e-12);
                for c in 0..n {
                    prop_assert!(ctx.resistance(a, c) <= ctx.resistance(a, b) + ctx.resistance(b, c) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn energy_equals_resistance(g in graph(12), s in 0usize..12, t in 0usize..12) {
        let n = g.vertex_count();
        let (s, t) = (s % n, t % n);
        prop_assume!(s != t);
        let ctx = SpectralContext::new(&g).unwrap();
        let energy: f64 = ctx.flow(s, t).iter().map(|&(e, f)| f * f * g.edge(e).unwrap().resistance()).sum();
        prop_assert!((energy - ctx.resistance(s, t)).abs() <= 1e-9 * ctx.resistance(s, t).max(1.0));
    }

    /// `Pr_v[t_u > t_w]` from the Green's function formula agrees with the
    /// harmonic hitting probabilities and never exceeds `Reff(u,v)/Reff(u,w)`.
    #[test]
    fn potential_bound(g in graph(8)) {
        let ctx = SpectralContext::new(&g).unwrap();
        let n = g.vertex_count();
        for u in 0..n {
            for w in 0..n {
                if u == w {
                    continue;
                }
                let hit_w_first = hit_probabilities(&g, &[w], &[u]).unwrap();
                for v in 0..n {
                    let formula = ctx.form(u, w, u, v) / ctx.resistance(u, w);
                    prop_assert!((formula - hit_w_first[v]).abs() < 1e-9);
                    prop_assert!(formula <= ctx.resistance(u, v) / ctx.resistance(u, w) + 1e-9);
                }
            }
        }
    }

    /// Identifying two well-separated clusters leaves at least `(γ − 4) R` between them.
    #[test]
    fn well_separated_clusters_stay_far_apart(g in graph(12), seed in any::<u64>()) {
        let ctx = SpectralContext::new(&g).unwrap();
        let n = g.vertex_count();
        let a = (seed % n as u64) as Vertex;
        let b = (0..n).max_by(|&x, &y| ctx.resistance(a, x).total_cmp(&ctx.resistance(a, y))).unwrap();
        let ball = |c: Vertex, r: f64| -> Vec<Vertex> { (0..n).filter(|&x| ctx.resistance(c, x) <= r).collect() };
        let far = ctx.resistance(a, b);
        let (c1, c2) = (ball(a, far / 20.0), ball(b, far / 20.0));
        let diam = |c: &[Vertex]| c.iter().flat_map(|&x| c.iter().map(move |&y| (x, y))).map(|(x, y)| ctx.resistance(x, y)).fold(0.0, f64::max);
        let r = diam(&c1).max(diam(&c2));
        prop_assume!(r > 0.0);
        let cross = c1.iter().flat_map(|&x| c2.iter().map(move |&y| (x, y))).map(|(x, y)| ctx.resistance(x, y)).fold(f64::INFINITY, f64::min);
        let gamma = cross / r;
        prop_assume!(gamma > 4.0);
        let reff = 1.0 / conductance_between(&g, &c1, &c2).unwrap();
        prop_assert!(reff >= (gamma - 4.0) * r - 1e-9, "reff {} gamma {} r {}", reff, gamma, r);
    }
}

/// Deleting an edge never lowers a resistance and contracting one never raises it.
#[test]
fn rayleigh_monotonicity_exhaustive() {
    for n in 2..=5 {
        for g in graphs::connected_graphs(n, 2.0, 17) {
            let ctx = SpectralContext::new(&g).unwrap();
            for e in g.edges() {
                let (d, _) = g.delete_edge(e.id).unwrap();
                if d.is_connected() {
                    let dctx = SpectralContext::new(&d).unwrap();
                    for a in 0..n {
                        for b in 0..n {
                            assert!(dctx.resistance(a, b) >= ctx.resistance(a, b) - 1e-9);
                        }
                    }
                }
                let (c, map) = g.contract_edge(e.id).unwrap();
                if c.vertex_count() < 2 {
                    continue;
                }
                let cctx = SpectralContext::new(&c).unwrap();
                for a in 0..n {
                    for b in 0..n {
                        assert!(cctx.resistance(map.map_vertex(a), map.map_vertex(b)) <= ctx.resistance(a, b) + 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn six_vertex_rayleigh_on_random_graphs() {
    for seed in 0..40 {
        let g = random_connected(6, 6 + (seed as usize % 9), 3.0, seed).unwrap();
        let ctx = SpectralContext::new(&g).unwrap();
        for e in g.edges() {
            let (d, _) = g.delete_edge(e.id).unwrap();
            if !d.is_connected() {
                continue;
            }
            let dctx = SpectralContext::new(&d).unwrap();
            for a in 0..6 {
                for b in 0..6 {
                    assert!(dctx.resistance(a, b) >= ctx.resistance(a, b) - 1e-9);
                }
            }
        }
    }
}

#[test]
fn well_separated_clique_chain() {
    let g = graphs::clique_chain(&[4, 3, 4], 50.0).unwrap();
    let ctx = SpectralContext::new(&g).unwrap();
    let (c1, c2): (Vec<Vertex>, Vec<Vertex>) = ((0..4).collect(), (7..11).collect());
    // Unit K4 has resistance diameter 1/2.
    let r = 0.5;
    let cross = c1.iter().flat_map(|&x| c2.iter().map(move |&y| (x, y))).map(|(x, y)| ctx.resistance(x, y)).fold(f64::INFINITY, f64::min);
    let gamma = cross / r;
    assert!(gamma > 4.0);
    let reff = 1.0 / conductance_between(&g, &c1, &c2).unwrap();
    assert!(reff >= (gamma - 4.0) * r);
}
