use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eedqn_cli::{execute, FileConfig, Plan};

#[derive(Parser)]
#[command(name = "eedqn", version, about = "Train elastic-step DQN agents and baselines on MinAtar-style games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a grid of environments x algorithms x seeds.
    Run {
        #[command(flatten)]
        grid: GridArgs,
        /// Algorithms, comma separated (e.g. dqn,eedqn,nstep:5).
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<String>>,
    },
    /// Run the eight aggregation variants.
    Ablation {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// List algorithm and environment names.
    List,
}

#[derive(Args)]
struct GridArgs {
    /// Environments, comma separated (breakout, freeway, asterix, space_invaders, chain:<n>).
    #[arg(long, alias = "envs", value_delimiter = ',')]
    env: Option<Vec<String>>,
    /// Number of seeds per cell.
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed.
    #[arg(long)]
    seed_offset: Option<u64>,
    /// Environment steps per run.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Runs trained in parallel.
    #[arg(long)]
    workers: Option<usize>,
    /// JSON file with any of the flag values plus run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 10 seeds x 1M steps unless overridden.
    #[arg(long)]
    paper_scale: bool,
}

impl GridArgs {
    fn merged(self, algos: Option<Vec<String>>) -> Result<FileConfig, String> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            envs: self.env,
            algos,
            seeds: self.seeds,
            seed_offset: self.seed_offset,
            steps: self.steps,
            out: self.out,
            workers: self.workers,
            paper_scale: self.paper_scale.then_some(true),
            ..FileConfig::default()
        };
        Ok(flags.or(file))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let plan = match cli.command {
        Command::Run { grid, algo } => grid.merged(algo).and_then(Plan::from_config),
        Command::Ablation { grid } => grid.merged(None).and_then(Plan::ablation),
        Command::List => {
            println!("algorithms: {}", eedqn_core::agents::ALGORITHM_NAMES.join(", "));
            println!("            nstep:<k>");
            println!("environments: {}", eedqn_core::envs::GAME_NAMES.join(", "));
            println!("              chain:<n>");
            return ExitCode::SUCCESS;
        }
    };
    let plan = match plan {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    eprintln!(
        "{} cells, {} steps each, {} worker(s), output in {}",
        plan.cells.len(),
        plan.steps,
        plan.workers,
        plan.out.display()
    );
    match execute(&plan) {
        Ok(report) if report.all_ok() => ExitCode::SUCCESS,
        Ok(report) => {
            let failed = report.outcomes.iter().filter(|(_, r)| r.is_err()).count();
            eprintln!("{failed} of {} cells failed", report.outcomes.len());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
