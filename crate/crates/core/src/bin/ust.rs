use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ust_core::error::Error;
use ust_core::graph::{EdgeId, Graph};
use ust_core::harness::manifest::RunManifest;
use ust_core::harness::stats::{frequencies, run_trials};
use ust_core::harness::verify::{self, Replay, Suite, VerifyConfig};
use ust_core::harness::{bench, graphs};
use ust_core::pipeline::{apx_tree, exact_tree_sigma1, PipelineConfig};
use ust_core::samplers::{aldous_broder, leverage_chain, wilson, TreeSample};

/// Uniform spanning tree sampling, verification and benchmarks.
#[derive(Parser)]
#[command(name = "ust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw spanning trees.
    Sample(SampleArgs),
    /// Run invariant suites and print a JSON report.
    Verify(VerifyArgs),
    /// Emit benchmark CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algo {
    Ab,
    Wilson,
    Chain,
    Sigma1,
    Apx,
}

#[derive(Args)]
struct SampleArgs {
    /// Edge list, one `u v conductance` per line.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Approximation level; required by `apx`.
    #[arg(long)]
    eps: Option<f64>,
    /// Print a frequency table over this many trees instead of one tree.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct Instance {
    #[arg(long, conflicts_with = "random")]
    graph: Option<PathBuf>,
    /// Random connected graph with N vertices and M edges.
    #[arg(long, num_args = 2, value_names = ["N", "M"])]
    random: Option<Vec<usize>>,
    /// Conductance spread of random graphs, in decades.
    #[arg(long, default_value_t = 2.0)]
    decades: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// marginals, schur, foster, conditioning, voronoi, fixing, walkbound or all.
    #[arg(long, required_unless_present = "replay")]
    suite: Option<String>,
    #[command(flatten)]
    instance: Instance,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    fix_trials: Option<usize>,
    /// Where replay files of failing runs are written.
    #[arg(long, default_value = ".")]
    replay_dir: PathBuf,
    /// Rerun a replay file.
    #[arg(long, conflicts_with_all = ["suite", "graph", "random"])]
    replay: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchKind {
    Walkbound,
    Shortcut,
    Pipeline,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    bench: BenchKind,
    #[command(flatten)]
    instance: Instance,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Edge whose crossings are counted (walkbound).
    #[arg(long, default_value_t = 0)]
    edge: usize,
    /// Radii to report (walkbound).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 4.0])]
    radius: Vec<f64>,
    /// Path window sizes (shortcut).
    #[arg(long, value_delimiter = ',', default_values_t = [16, 32, 64, 128])]
    k: Vec<usize>,
    /// Pipeline runs (pipeline).
    #[arg(long, default_value_t = 10)]
    runs: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) => 2,
        _ => 3,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn bad_flag(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

impl Instance {
    fn load(&self, seed: u64, default: impl FnOnce() -> Graph) -> Result<Graph, Error> {
        match (&self.graph, &self.random) {
            (Some(path), _) => Graph::load(path),
            (None, Some(nm)) => graphs::random_connected(nm[0], nm[1], self.decades, seed),
            (None, None) => Ok(default()),
        }
    }

    fn given(&self) -> bool {
        self.graph.is_some() || self.random.is_some()
    }
}

fn draw(g: &Graph, algo: Algo, eps: f64, seed: u64) -> Result<TreeSample, Error> {
    match algo {
        Algo::Ab => aldous_broder(g, seed),
        Algo::Wilson => wilson(g, seed),
        Algo::Chain => leverage_chain(g, seed),
        Algo::Sigma1 => exact_tree_sigma1(g, &PipelineConfig::with_seed(seed)),
        Algo::Apx => apx_tree(g, eps, seed),
    }
}

fn sample(args: SampleArgs) -> ExitCode {
    let eps = match (args.algo, args.eps) {
        (Algo::Apx, None) => return bad_flag("--algo apx requires --eps"),
        (_, Some(e)) if !(e > 0.0 && e < 1.0) => return bad_flag("--eps must lie in (0, 1)"),
        (_, e) => e.unwrap_or(0.0),
    };
    if args.trials == Some(0) {
        return bad_flag("--trials must be positive");
    }
    let g = match Graph::load(&args.graph) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    if !g.is_connected() {
        return fail(Error::Disconnected);
    }
    let config = json!({ "algo": format!("{:?}", args.algo).to_lowercase(), "eps": args.eps, "trials": args.trials });
    eprintln!("{}", RunManifest::new("sample", &g, args.seed, config).to_json());
    match args.trials {
        None => match draw(&g, args.algo, eps, args.seed) {
            Ok(t) => {
                print!("{}", tree_edge_list(&g, &t.edges));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Some(n) => match run_trials(n, args.seed, |s| Ok(draw(&g, args.algo, eps, s)?.edges)) {
            Ok(trees) => {
                println!("tree,count,frequency");
                for (tree, count) in frequencies(trees) {
                    let ids: Vec<String> = tree.iter().map(|e| e.0.to_string()).collect();
                    println!("{},{},{}", ids.join(" "), count, count as f64 / n as f64);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}

fn tree_edge_list(g: &Graph, edges: &[EdgeId]) -> String {
    let mut ids = edges.to_vec();
    ids.sort_unstable();
    ids.iter().filter_map(|&id| g.edge(id)).map(|e| format!("{} {} {}\n", e.u, e.v, e.conductance)).collect()
}

fn verify_cmd(args: VerifyArgs) -> ExitCode {
    let (g, cfg, suites) = if let Some(path) = &args.replay {
        let replay = match Replay::load(path) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        match replay.graph() {
            Ok(g) => (g, replay.config, replay.suites),
            Err(e) => return fail(e),
        }
    } else {
        let name = args.suite.as_deref().unwrap_or("all");
        let suites = if name == "all" {
            Suite::ALL.to_vec()
        } else {
            match name.parse::<Suite>() {
                Ok(s) => vec![s],
                Err(e) => return bad_flag(&e.to_string()),
            }
        };
        if !args.instance.given() {
            return bad_flag("one of --graph or --random is required");
        }
        let g = match args.instance.load(args.seed, || graphs::path(2)) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        let mut cfg = VerifyConfig { seed: args.seed, ..Default::default() };
        cfg.trials = args.trials.unwrap_or(cfg.trials);
        cfg.fix_trials = args.fix_trials.unwrap_or(cfg.fix_trials);
        (g, cfg, suites)
    };
    let report = match verify::verify(&g, &suites, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.pass {
        return ExitCode::SUCCESS;
    }
    match verify::write_replay(&g, &report, &cfg, &args.replay_dir) {
        Ok(path) => eprintln!("replay written to {}", path.display()),
        Err(e) => eprintln!("could not write replay: {e}"),
    }
    ExitCode::from(1)
}

fn bench_cmd(args: BenchArgs) -> ExitCode {
    if args.trials == 0 {
        return bad_flag("--trials must be positive");
    }
    let csv = match args.bench {
        BenchKind::Walkbound => {
            args.instance.load(args.seed, || graphs::path(16)).and_then(|g| bench::walkbound_csv(&g, EdgeId(args.edge), &args.radius, args.trials, args.seed))
        }
        BenchKind::Shortcut => bench::shortcut_csv(&args.k, args.trials, args.seed),
        BenchKind::Pipeline => args
            .instance
            .load(args.seed, || graphs::clique_chain(&[4, 2, 2], 1e4).expect("valid chain"))
            .and_then(|g| bench::pipeline_csv(&g, args.runs, &PipelineConfig::with_seed(args.seed))),
    };
    match csv {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(Error::UnknownEdge(e)) => bad_flag(&format!("--edge {} is not an edge of the graph", e.0)),
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample(a) => sample(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}
