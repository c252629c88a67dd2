use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use consensus_prop::analysis::mixing_report;
use consensus_prop::baseline::DEFAULT_LAZINESS;
use consensus_prop::graph::{generate_cycle, generate_random_regular, generate_torus, generate_tree, Graph, TreeShape};
use consensus_prop::harness::{build_cell_graph, run_experiment, write_report, ExperimentConfig, Protocol, RunMode};
use consensus_prop::{Error, Result};

#[derive(Parser)]
#[command(name = "cprop", version, about = "Consensus propagation experiments")]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Run the configured protocol over every sweep cell.
    Run,
    /// Run consensus propagation and pairwise averaging side by side.
    Compare,
    /// Run the adaptive beta search (the config must use protocol = cp-adaptive).
    Adaptive,
    /// Print mixing times of a graph as JSON.
    Analyze {
        /// Edge-list file to analyze.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        family: FamilyArgs,
        /// Self-loop weight of the pairwise averaging matrix.
        #[arg(long, default_value_t = DEFAULT_LAZINESS)]
        laziness: f64,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Generate a graph and write it as an edge list.
    Gen {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Cycle,
    Torus,
    Regular,
    Tree,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Torus dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Torus side length.
    #[arg(long)]
    side: Option<usize>,
    /// Tree shape: path, binary, kary:<k> or random.
    #[arg(long, default_value = "path")]
    shape: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FamilyArgs {
    fn build(&self) -> Result<Graph> {
        let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Error::Config(format!("--{flag} is required")));
        match self
            .family
            .ok_or_else(|| Error::Config("--family is required".into()))?
        {
            FamilyArg::Cycle => generate_cycle(need(self.n, "n")?),
            FamilyArg::Torus => generate_torus(need(self.m, "m")?, need(self.side, "side")?),
            FamilyArg::Regular => generate_random_regular(need(self.n, "n")?, need(self.d, "d")?, self.seed),
            FamilyArg::Tree => {
                let shape = match self.shape.as_str() {
                    "path" => TreeShape::Path,
                    "binary" => TreeShape::Balanced { arity: 2 },
                    "random" => TreeShape::Random,
                    s => match s.strip_prefix("kary:").and_then(|k| k.parse().ok()) {
                        Some(arity) => TreeShape::Balanced { arity },
                        None => return Err(Error::Config(format!("unknown tree shape {s:?}"))),
                    },
                };
                generate_tree(need(self.n, "n")?, shape, self.seed)
            }
        }
    }
}

enum Failure {
    /// Bad input: configuration, arguments or files.
    Config(Error),
    /// Some cells failed.
    Partial(usize),
}

fn load_config(cli: &Cli) -> std::result::Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config(Error::Config("--config is required".into())))?;
    let mut cfg = ExperimentConfig::load(path).map_err(Failure::Config)?;
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn experiment(cli: &Cli, mode: RunMode, adaptive: bool) -> std::result::Result<(), Failure> {
    let cfg = load_config(cli)?;
    if adaptive && cfg.protocol != Protocol::CpAdaptive {
        return Err(Failure::Config(Error::Config(
            "the adaptive subcommand needs protocol = cp-adaptive".into(),
        )));
    }
    eprintln!("running {} cell(s)", cfg.cell_count());
    let report = run_experiment(&cfg, mode).map_err(Failure::Config)?;
    write_report(&report, &cfg.output.dir, cfg.output.traces).map_err(Failure::Config)?;
    eprintln!("results written to {}", cfg.output.dir.display());
    match report.failures() {
        0 => Ok(()),
        k => Err(Failure::Partial(k)),
    }
}

fn analyze(cli: &Cli, graph: &Option<PathBuf>, family: &FamilyArgs, laziness: f64) -> Result<()> {
    let (g, laziness) = match (graph, &cli.config) {
        (Some(path), _) => (Graph::load(path)?, laziness),
        (None, Some(_)) if family.family.is_none() => {
            let cfg = ExperimentConfig::load(cli.config.as_ref().unwrap())?;
            let cell = cfg
                .cells()
                .into_iter()
                .next()
                .ok_or_else(|| Error::Config("configuration has no cells".into()))?;
            (build_cell_graph(&cfg, &cell)?, cfg.laziness)
        }
        _ => (family.build()?, laziness),
    };
    let report = mixing_report(&g, laziness)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Graph {
            command: GraphCommand::Gen { family, out },
        } => family.build().and_then(|g| g.save(out)).map_err(Failure::Config),
        Command::Run => experiment(cli, RunMode::Single, false),
        Command::Compare => experiment(cli, RunMode::Compare, false),
        Command::Adaptive => experiment(cli, RunMode::Single, true),
        Command::Analyze {
            graph,
            family,
            laziness,
        } => analyze(cli, graph, family, *laziness).map_err(Failure::Config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(k)) => {
            eprintln!("{k} run(s) failed; see the error column of summary.csv");
            ExitCode::from(2)
        }
    }
}
