mod common;

use proptest::prelude::*;

use common::{oracle_instance, recheck, OracleInstance};

use ust_core::conditioning::{condition_step, FreshCoins};
use ust_core::fixing::{oracle_inequalities, set_conductance, slow_oracle, special_fix_choice};
use ust_core::graph::{EdgeId, Graph, Vertex};
use ust_core::harness::graphs::{self, random_connected};
use ust_core::harness::stats::mean_z_test;
use ust_core::rng;
use ust_core::shortcutting::hit_probabilities;
use ust_core::spectral::SpectralContext;

fn reff(g: &Graph, s: Vertex, t: Vertex) -> f64 {
    SpectralContext::new(g).unwrap().resistance(s, t)
}

/// One conditioning step on the edge SpecialFix would pick leaves the expected
/// `s–t` resistance unchanged, and moves it by at most four times the edge's energy.
#[test]
fn special_fix_step_is_a_bounded_martingale() {
    let cases = [(graphs::ladder(8), 0, 1), (random_connected(10, 22, 2.0, 4).unwrap(), 0, 9)];
    for (g, s, t) in cases {
        let ctx = SpectralContext::new(&g).unwrap();
        let f_set: Vec<EdgeId> = g.non_loop_edges().filter(|e| !e.touches(s) && !e.touches(t)).map(|e| e.id).collect();
        let f = special_fix_choice(&g, &ctx, s, t, &f_set).unwrap();
        let before = ctx.resistance(s, t);
        let e = g.edge(f).unwrap();
        let phi = ctx.st_potentials(s, t);
        let energy = (phi[e.u] - phi[e.v]).powi(2) * e.conductance;
        let mut values = Vec::new();
        for i in 0..20_000 {
            let (h, _, map) = condition_step(&g, f, &ctx, &mut FreshCoins::new(rng::trial_seed(7, i))).unwrap();
            let after = reff(&h, map.map_vertex(s), map.map_vertex(t));
            assert!((after - before).abs() <= 4.0 * energy * (1.0 + 1e-9) + 1e-12);
            values.push(after);
        }
        let z = mean_z_test(&values, before, 4.0);
        assert!(z.pass, "{z:?}");
    }
}

#[test]
fn martingale_over_several_steps() {
    let g = graphs::ladder(6);
    let (s, t) = (0, 1);
    let rungs: Vec<EdgeId> = (0..6).map(|i| EdgeId(3 * i + 1)).collect();
    let before = reff(&g, s, t);
    let mut values = Vec::new();
    for i in 0..10_000 {
        let mut coins = FreshCoins::new(rng::trial_seed(3, i));
        let (mut h, mut map) = (g.clone(), (0..g.vertex_count()).collect::<Vec<Vertex>>());
        for _ in 0..3 {
            let ctx = SpectralContext::new(&h).unwrap();
            let pending: Vec<EdgeId> = rungs.iter().copied().filter(|e| h.contains_edge(*e)).collect();
            let Some(f) = special_fix_choice(&h, &ctx, map[s], map[t], &pending) else { break };
            let (next, _, m) = condition_step(&h, f, &ctx, &mut coins).unwrap();
            map = map.iter().map(|&v| m.map_vertex(v)).collect();
            h = next;
        }
        values.push(reff(&h, map[s], map[t]));
    }
    let z = mean_z_test(&values, before, 4.0);
    assert!(z.pass, "{z:?}");
}

/// An edge in a block off the `S–S′` route has the same leverage with or without
/// the identification, and conditioning on it leaves `c(S, S′)` unchanged.
#[test]
fn conductance_is_conserved_for_matching_leverage() {
    let g = Graph::from_edges(5, &[(0, 2, 1.0), (2, 1, 2.0), (2, 3, 1.0), (3, 4, 0.5), (4, 2, 3.0)]).unwrap();
    let ctx = SpectralContext::new(&g).unwrap();
    let (h, _, _, _) = ust_core::schur::identify_pair(&g, &[0], &[1]).unwrap();
    let f = EdgeId(3);
    let lev_h = SpectralContext::new(&h).unwrap().leverage(f).unwrap();
    assert!((ctx.leverage(f).unwrap() - lev_h).abs() < 1e-12);
    let before = 1.0 / ctx.resistance(0, 1);
    let mut values = Vec::new();
    for i in 0..2_000 {
        let (h, _, map) = condition_step(&g, f, &ctx, &mut FreshCoins::new(i)).unwrap();
        values.push(1.0 / reff(&h, map.map_vertex(0), map.map_vertex(1)));
    }
    assert!(values.iter().all(|v| (v - before).abs() < 1e-9));
}

fn instance(max_n: usize) -> impl Strategy<Value = (Graph, u64)> {
    (5..=max_n, any::<u64>()).prop_map(|(n, seed)| {
        let m = (n + (seed as usize % (2 * n))).min(n * (n - 1) / 2);
        (random_connected(n, m, 2.0, seed).unwrap(), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Shrinking a shortcutter region to its `p`-level set costs at most a `1/p`
    /// factor in conductance out of the core.
    #[test]
    fn level_set_conductance((g, seed) in instance(12), p in prop::sample::select(vec![0.1, 0.25, 0.5, 0.9])) {
        let n = g.vertex_count();
        let core = vec![(seed % n as u64) as Vertex];
        let ctx = SpectralContext::new(&g).unwrap();
        let radius = ctx.resistance(core[0], (core[0] + 1) % n) * 1.5;
        let region: Vec<Vertex> = (0..n).filter(|&v| ctx.resistance(core[0], v) <= radius).collect();
        let outside: Vec<Vertex> = (0..n).filter(|v| !region.contains(v)).collect();
        prop_assume!(!outside.is_empty());
        let h = hit_probabilities(&g, &core, &outside).unwrap();
        let rest: Vec<Vertex> = (0..n).filter(|&v| h[v] < 1.0 - p).collect();
        let lhs = set_conductance(&g, &core, &rest).unwrap();
        let rhs = set_conductance(&g, &core, &outside).unwrap() / p;
        prop_assert!(lhs <= rhs * (1.0 + 1e-9), "{} > {}", lhs, rhs);
    }

    /// Contracting or deleting only edges near one side inflates `c(X, Y)` by at
    /// most `1/(1−γ)²`.
    #[test]
    fn conditioning_far_edges_bounds_conductance((g, seed) in instance(12), gamma in 0.05..0.45f64) {
        let n = g.vertex_count();
        let (x, y) = (vec![0], vec![n - 1]);
        let (h, xs, ys, map) = ust_core::schur::identify_pair(&g, &x, &y).unwrap();
        let hctx = SpectralContext::new(&h).unwrap();
        let pot = hctx.st_potentials(xs, ys);
        let norm = |v: Vertex| (pot[map[v]] - pot[ys]) / (pot[xs] - pot[ys]);
        let mut rng = rng::from_seed(seed);
        let (mut contract, mut delete) = (Vec::new(), Vec::new());
        for e in g.non_loop_edges() {
            let (a, b) = (norm(e.u), norm(e.v));
            let near = (a <= gamma && b <= gamma) || (a >= 1.0 - gamma && b >= 1.0 - gamma);
            if near {
                if rand::Rng::gen::<bool>(&mut rng) { contract.push(e.id) } else { delete.push(e.id) }
            }
        }
        let before = set_conductance(&g, &x, &y).unwrap();
        let (k, m) = g.condition(&contract, &delete).unwrap();
        let after = set_conductance(&k, &m.map_set(&x), &m.map_set(&y)).unwrap();
        prop_assert!(after <= before / (1.0 - gamma).powi(2) * (1.0 + 1e-9));
    }

    /// The three-terminal energy inequality used to bound potential drift.
    #[test]
    fn three_terminal_energy_bound((g, seed) in instance(14)) {
        let n = g.vertex_count();
        let ctx = SpectralContext::new(&g).unwrap();
        let s1 = (seed % n as u64) as Vertex;
        let s2 = ((seed / 7) % n as u64) as Vertex;
        let t = ((seed / 49) % n as u64) as Vertex;
        prop_assume!(s1 != t && s2 != t);
        for tau in [2.0, n as f64, (n * n) as f64] {
            let lhs: f64 = g.non_loop_edges().map(|e| (ctx.form(s1, t, e.u, e.v) * ctx.form(e.u, e.v, s2, t)).abs() / e.resistance()).sum();
            let rhs = 8.0 * f64::ln(tau) * ctx.form(s1, t, s2, t).abs() + (ctx.resistance(s1, t) + ctx.resistance(s2, t)) / tau;
            prop_assert!(lhs <= rhs * (1.0 + 1e-9), "tau {}: {} > {}", tau, lhs, rhs);
        }
    }
}

/// On a 30-vertex instance with a 40-edge candidate set, the oracle keeps at
/// least half, and every kept edge satisfies all six inequalities when they are
/// recomputed with an independent pseudoinverse.
#[test]
fn oracle_output_survives_independent_recheck() {
    let OracleInstance { g, s_set, sp_set, a_set, b_set, w } = oracle_instance(12);
    assert_eq!(w.len(), 40);
    let z = slow_oracle(&g, &s_set, &sp_set, &[], &a_set, &b_set, &w).unwrap();
    assert!(2 * z.len() >= w.len(), "{} of {}", z.len(), w.len());
    let checks = oracle_inequalities(&g, &s_set, &sp_set, &[], &a_set, &b_set, &w).unwrap();
    for c in &checks {
        let (lhs, rhs) = recheck(&g, &s_set, &sp_set, &a_set, &b_set, w.len(), c.edge);
        for k in 0..6 {
            assert!((lhs[k] - c.lhs[k]).abs() <= 1e-6 * lhs[k].abs().max(1e-9), "lhs {k}: {} vs {}", lhs[k], c.lhs[k]);
            assert!((rhs[k] - c.rhs[k]).abs() <= 1e-6 * rhs[k].abs().max(1e-9), "rhs {k}: {} vs {}", rhs[k], c.rhs[k]);
        }
        if z.contains(&c.edge) {
            assert!(lhs.iter().zip(&rhs).all(|(l, r)| *l <= r * (1.0 + 1e-9)));
        }
    }
}
