//! Invariant suites behind `ust verify`, with JSON reports and replay files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::RunManifest;
use super::stats::{bonferroni, chi_square_gof, chi_square_two_sample, tv_estimate, tv_threshold, StatTest};
use crate::clustering::{covering_community, Cluster, CommunityConfig, Family};
use crate::conditioning::conditioned_tree_frequencies;
use crate::error::{Error, Result};
use crate::fixing::{fix, fix_conductance_ratio, oracle_inequalities, slow_oracle, special_fix};
use crate::graph::{EdgeId, Graph, Vertex};
use crate::rng;
use crate::samplers::{aldous_broder, enumerate_trees, marginal_check, matrix_tree_weight, wilson};
use crate::schur::{associativity_gap, commutation_gaps, identify_pair, resistance_by_elimination, walk_trace_check};
use crate::shortcutting::{voronoi_sandwich_check, voronoi_shortcutters, walk_bound_bench};
use crate::spectral::{jl_embed, SpectralContext};

pub const REPORT_SCHEMA: u32 = 1;
/// Family-wise rejection level of each suite, split across its χ² tests.
pub const FAMILY_ALPHA: f64 = 1e-3;
/// Exact enumeration is skipped above this many (unweighted) spanning trees.
pub const ENUMERATION_LIMIT: f64 = 20_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Marginals,
    Schur,
    Foster,
    Conditioning,
    Voronoi,
    Fixing,
    Walkbound,
}

impl Suite {
    pub const ALL: [Suite; 7] = [Suite::Marginals, Suite::Schur, Suite::Foster, Suite::Conditioning, Suite::Voronoi, Suite::Fixing, Suite::Walkbound];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Marginals => "marginals",
            Suite::Schur => "schur",
            Suite::Foster => "foster",
            Suite::Conditioning => "conditioning",
            Suite::Voronoi => "voronoi",
            Suite::Fixing => "fixing",
            Suite::Walkbound => "walkbound",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Invalid(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Samples for the distributional checks.
    pub trials: usize,
    /// Independent runs of each fixing algorithm.
    pub fix_trials: usize,
    pub walk_trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 0, trials: 100_000, fix_trials: 100, walk_trials: 500 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<StatTest>,
}

impl Check {
    /// Passes when `statistic ≤ threshold`.
    fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Check { name: name.into(), statistic, threshold, pass: statistic <= threshold, test: None }
    }

    fn at_least(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Check { name: name.into(), statistic, threshold, pass: statistic >= threshold, test: None }
    }

    fn stat(name: impl Into<String>, test: StatTest) -> Self {
        Check { name: name.into(), statistic: test.statistic, threshold: test.threshold, pass: test.pass, test: Some(test) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    /// Per-test χ² level after the Bonferroni split.
    pub alpha: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite, alpha: f64, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport { suite, alpha, checks, skipped: None, pass }
    }

    fn skipped(suite: Suite, reason: String) -> Self {
        SuiteReport { suite, alpha: FAMILY_ALPHA, checks: Vec::new(), skipped: Some(reason), pass: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub manifest: RunManifest,
    pub family_alpha: f64,
    pub correction: &'static str,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

/// Everything needed to rerun a verification: the graph itself, not a path to it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Replay {
    pub schema: u32,
    pub suites: Vec<Suite>,
    pub config: VerifyConfig,
    pub graph: String,
    pub failed: Vec<String>,
}

impl Replay {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("bad replay file: {e}")))
    }

    pub fn graph(&self) -> Result<Graph> {
        Graph::parse(&self.graph)
    }

    pub fn run(&self) -> Result<VerifyReport> {
        verify(&self.graph()?, &self.suites, &self.config)
    }
}

pub fn verify(g: &Graph, suites: &[Suite], cfg: &VerifyConfig) -> Result<VerifyReport> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let reports = suites.iter().map(|&s| run_suite(g, s, cfg)).collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = suites.iter().map(|s| s.name()).collect();
    let manifest = RunManifest::new("verify", g, cfg.seed, serde_json::json!({ "suites": names, "verify": cfg }));
    let pass = reports.iter().all(|r| r.pass);
    Ok(VerifyReport { schema: REPORT_SCHEMA, manifest, family_alpha: FAMILY_ALPHA, correction: "bonferroni", suites: reports, pass })
}

/// Writes a replay file for a failed report into `dir` and returns its path.
pub fn write_replay(g: &Graph, report: &VerifyReport, cfg: &VerifyConfig, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let failed: Vec<String> = report.suites.iter().flat_map(|s| s.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}/{}", s.suite, c.name))).collect();
    let replay =
        Replay { schema: REPORT_SCHEMA, suites: report.suites.iter().map(|s| s.suite).collect(), config: cfg.clone(), graph: g.to_edge_list(), failed };
    let path = dir.as_ref().join(format!("ust-replay-{}-{}.json", &report.manifest.graph_hash[..12], cfg.seed));
    std::fs::write(&path, serde_json::to_string_pretty(&replay).expect("replay serializes"))?;
    Ok(path)
}

pub fn run_suite(g: &Graph, suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    match suite {
        Suite::Foster => foster_suite(g),
        Suite::Marginals => marginals_suite(g, cfg),
        Suite::Schur => schur_suite(g, cfg),
        Suite::Conditioning => conditioning_suite(g, cfg),
        Suite::Voronoi => voronoi_suite(g, cfg),
        Suite::Fixing => fixing_suite(g, cfg),
        Suite::Walkbound => walkbound_suite(g, cfg),
    }
}

fn foster_suite(g: &Graph) -> Result<SuiteReport> {
    let ctx = SpectralContext::new(g)?;
    let levs = ctx.leverages();
    let sum: f64 = levs.iter().map(|(_, l)| l).sum();
    let outside = levs.iter().map(|&(_, l)| (-l).max(l - 1.0).max(0.0)).fold(0.0, f64::max);
    let mut checks = vec![Check::at_most("leverage_sum", (sum - (g.vertex_count() - 1) as f64).abs(), 1e-8), Check::at_most("leverage_range", outside, 1e-9)];
    let n = g.vertex_count();
    if n <= 30 {
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    worst = worst.max(ctx.resistance(a, c) - ctx.resistance(a, b) - ctx.resistance(b, c));
                }
            }
        }
        checks.push(Check::at_most("triangle_inequality", worst, 1e-9));
    }
    Ok(SuiteReport::new(Suite::Foster, FAMILY_ALPHA, checks))
}

fn marginals_suite(g: &Graph, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for (name, seed) in [("wilson", 1), ("aldous_broder", 2)] {
        let sampler = |h: &Graph, s: u64| if seed == 1 { wilson(h, s) } else { aldous_broder(h, s) };
        let r = marginal_check(g, sampler, cfg.trials, rng::child_seed(cfg.seed, seed))?;
        checks.push(Check::at_most(format!("{name}_max_abs_z"), r.max_abs_z, 4.0));
    }
    Ok(SuiteReport::new(Suite::Marginals, FAMILY_ALPHA, checks))
}

fn random_subset(n: usize, k: usize, rng: &mut rng::Rng) -> Vec<Vertex> {
    let mut all: Vec<Vertex> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(k);
    all.sort_unstable();
    all
}

fn schur_suite(g: &Graph, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let n = g.vertex_count();
    let mut rng = rng::stream(cfg.seed, 0x5c40);
    let (mut assoc, mut del, mut con, mut reff) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let ctx = SpectralContext::new(g)?;
    for _ in 0..20 {
        let k0 = 1 + rand::Rng::gen_range(&mut rng, 0..n.min(4));
        let k1 = rand::Rng::gen_range(&mut rng, 0..=(n - k0).min(3));
        let all = random_subset(n, k0 + k1, &mut rng);
        let (s0, s1) = all.split_at(k0);
        assoc = assoc.max(associativity_gap(g, s0, s1)?);
        let keep = random_subset(n, 2 + rand::Rng::gen_range(&mut rng, 0..n - 1), &mut rng);
        let inside: Vec<EdgeId> = g.non_loop_edges().filter(|e| keep.contains(&e.u) && keep.contains(&e.v)).map(|e| e.id).collect();
        if let Some(&f) = inside.choose(&mut rng) {
            let (d, c) = commutation_gaps(g, &keep, f)?;
            del = del.max(d);
            con = con.max(c);
        }
        let (a, b) = (keep[0], keep[1]);
        let exact = ctx.resistance(a, b);
        reff = reff.max((resistance_by_elimination(g, a, b)? - exact).abs() / exact);
    }
    let keep = random_subset(n, (n / 2).max(2), &mut rng);
    let alpha = bonferroni(FAMILY_ALPHA, 1);
    let mut trace = walk_trace_check(g, &keep, keep[0], 4, cfg.trials, rng::child_seed(cfg.seed, 3))?;
    trace.threshold = alpha;
    trace.pass = trace.p_value.unwrap_or(1.0) >= alpha;
    let checks = vec![
        Check::at_most("associativity", assoc, 1e-8),
        Check::at_most("commutes_with_deletion", del, 1e-8),
        Check::at_most("commutes_with_contraction", con, 1e-8),
        Check::at_most("resistance_preserved", reff, 1e-9),
        Check::stat("walk_trace", trace),
    ];
    Ok(SuiteReport::new(Suite::Schur, alpha, checks))
}

fn unit_tree_count(g: &Graph) -> Result<f64> {
    let unit = Graph::from_edges(g.vertex_count(), &g.non_loop_edges().map(|e| (e.u, e.v, 1.0)).collect::<Vec<_>>())?;
    matrix_tree_weight(&unit)
}

fn conditioning_suite(g: &Graph, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let trees = unit_tree_count(g)?;
    if trees > ENUMERATION_LIMIT {
        return Ok(SuiteReport::skipped(Suite::Conditioning, format!("{trees:.0} spanning trees exceed the enumeration limit")));
    }
    let exact = enumerate_trees(g)?;
    let mut rng = rng::stream(cfg.seed, 0xc0d1);
    let mut f: Vec<EdgeId> = g.edge_ids();
    f.shuffle(&mut rng);
    f.truncate(f.len().div_ceil(2));
    f.sort_unstable();
    let alpha = bonferroni(FAMILY_ALPHA, 3);
    let threshold = tv_threshold(exact.len(), cfg.trials);
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    for (name, min_lev) in [("file_order", false), ("min_leverage_first", true)] {
        let freq = conditioned_tree_frequencies(g, &f, min_lev, cfg.trials, rng::child_seed(cfg.seed, 4))?;
        checks.push(Check::at_most(format!("{name}_tv"), tv_estimate(&freq, &exact)?, threshold));
        checks.push(Check::stat(format!("{name}_chi2"), chi_square_gof(&freq, &exact, alpha)?));
        tables.push(freq.into_iter().collect::<std::collections::HashMap<_, _>>());
    }
    checks.push(Check::stat("order_invariance", chi_square_two_sample(&tables[0], &tables[1], alpha)));
    Ok(SuiteReport::new(Suite::Conditioning, alpha, checks))
}

fn singleton(v: Vertex) -> Cluster {
    Cluster { vertices: vec![v], center: v, diameter: 0.0 }
}

fn voronoi_suite(g: &Graph, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let n = g.vertex_count();
    let mut rng = rng::stream(cfg.seed, 0x7040);
    let mut families = Vec::new();
    for k in 2..=n.min(6) {
        let picks = random_subset(n, k, &mut rng);
        families.push(Family { clusters: picks.into_iter().map(singleton).collect(), radius: 0.0 });
    }
    let ctx = SpectralContext::new(g)?;
    let (lo, hi) = ctx.min_max_resistance();
    let emb = jl_embed(&ctx, cfg.seed);
    let all: Vec<Vertex> = (0..n).collect();
    let community = covering_community(&ctx, &emb, &all, (lo * hi).sqrt(), &CommunityConfig::default())?;
    families.extend(community.families);
    let mut checks = Vec::new();
    for (i, fam) in families.iter().enumerate() {
        let scs = voronoi_shortcutters(g, fam)?;
        let report = voronoi_sandwich_check(g, fam, &scs)?;
        let misses = report.lower_ok.iter().chain(&report.upper_ok).filter(|ok| !**ok).count() + usize::from(!report.disjoint);
        checks.push(Check::at_most(format!("family_{i}_k{}", fam.clusters.len()), misses as f64, 0.0));
    }
    Ok(SuiteReport::new(Suite::Voronoi, FAMILY_ALPHA, checks))
}

/// The vertex farthest from `s` in resistance.
fn farthest(ctx: &SpectralContext, s: Vertex) -> Vertex {
    (0..ctx.vertex_count()).max_by(|&a, &b| ctx.resistance(s, a).total_cmp(&ctx.resistance(s, b))).expect("nonempty")
}

fn fixing_suite(g: &Graph, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let n = g.vertex_count();
    let ctx = SpectralContext::new(g)?;
    let (s, t) = (0, farthest(&ctx, 0));
    let f: Vec<EdgeId> = g.non_loop_edges().filter(|e| !e.touches(s) && !e.touches(t)).map(|e| e.id).collect();
    let eps_special = 0.3;
    let cap = 9.0 * (n as f64).ln() / (eps_special * eps_special);
    let reff = ctx.resistance(s, t);
    let (mut size_ok, mut reff_ok, mut audit_ok) = (0usize, 0usize, 0usize);
    for trial in 0..cfg.fix_trials {
        let r = special_fix(g, s, t, &f, eps_special, rng::trial_seed(cfg.seed, trial as u64))?;
        size_ok += usize::from(r.retained.len() as f64 <= cap);
        audit_ok += usize::from(r.audit.iter().all(|a| a.bound_ok));
        let h = r.repaired_graph()?;
        let (hs, ht) = (r.map.map_vertex(s), r.map.map_vertex(t));
        let after = if hs == ht { 0.0 } else { resistance_by_elimination(&h, hs, ht).unwrap_or(f64::INFINITY) };
        reff_ok += usize::from(after >= (1.0 - eps_special) * reff);
    }
    let trials = cfg.fix_trials.max(1) as f64;
    let eps = 0.25;
    let mut cond_ok = 0usize;
    for trial in 0..cfg.fix_trials {
        let r = fix(g, &[s], &[t], &[], &f, eps, rng::trial_seed(cfg.seed ^ 0xf1, trial as u64))?;
        cond_ok += usize::from(fix_conductance_ratio(g, &[s], &[t], &[], &r)? <= 1.0 + 2.0 * eps);
    }
    let w = low_leverage_difference(g, &[s], &[t], &f)?;
    let z = slow_oracle(g, &[s], &[t], &[], &[], &[], &w)?;
    let recheck = oracle_inequalities(g, &[s], &[t], &[], &[], &[], &z)?;
    let z_ratio = if w.is_empty() { 1.0 } else { z.len() as f64 / w.len() as f64 };
    let checks = vec![
        Check::at_least("special_fix_size_fraction", size_ok as f64 / trials, 1.0),
        Check::at_least("special_fix_reff_fraction", reff_ok as f64 / trials, 0.95),
        Check::at_least("special_fix_audit_fraction", audit_ok as f64 / trials, 1.0),
        Check::at_least("fix_conductance_fraction", cond_ok as f64 / trials, 0.95),
        Check::at_least("oracle_size_ratio", z_ratio, 0.5),
        Check::at_least("oracle_recheck_fraction", recheck.iter().filter(|c| c.passes()).count() as f64 / recheck.len().max(1) as f64, 1.0),
    ];
    Ok(SuiteReport::new(Suite::Fixing, FAMILY_ALPHA, checks))
}

/// Edges of `w` whose leverage drops by at most 1/16 when `S` and `S′` are identified.
pub fn low_leverage_difference(g: &Graph, s_set: &[Vertex], sp_set: &[Vertex], w: &[EdgeId]) -> Result<Vec<EdgeId>> {
    let ctx = SpectralContext::new(g)?;
    let (h, _, _, _) = identify_pair(g, s_set, sp_set)?;
    let hctx = SpectralContext::new(&h)?;
    let mut out = Vec::new();
    for &e in w {
        if ctx.leverage(e)? - hctx.leverage(e)? <= 1.0 / 16.0 {
            out.push(e);
        }
    }
    Ok(out)
}

fn walkbound_suite(g: &Graph, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let n = g.vertex_count();
    let ctx = SpectralContext::new(g)?;
    let (lo, hi) = ctx.min_max_resistance();
    let mut rng = rng::stream(cfg.seed, 0xb0d);
    let mut ids: Vec<EdgeId> = g.non_loop_edges().map(|e| e.id).collect();
    ids.shuffle(&mut rng);
    let all: Vec<Vertex> = (0..n).collect();
    let mut checks = Vec::new();
    for (i, &f) in ids.iter().take(3).enumerate() {
        for (label, r) in [("r_min", lo), ("r_mid", (lo * hi).sqrt())] {
            let rep = walk_bound_bench(g, f, &all, r, cfg.walk_trials, rng::child_seed(cfg.seed, i as u64))?;
            checks.push(Check::at_most(format!("edge_{}_{label}", f.0), rep.ratio, 10.0));
        }
    }
    Ok(SuiteReport::new(Suite::Walkbound, FAMILY_ALPHA, checks))
}
