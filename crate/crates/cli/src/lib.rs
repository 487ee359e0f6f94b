//! Experiment grids: expand flags into (env, algo, seed) cells, run them on a
//! worker pool and write per-cell logs plus the merged results.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use eedqn_core::agents::{algorithm, run_training, QStatistic, RunConfig, Scalarization, ABLATION_ALGORITHMS};
use eedqn_core::buffers::StdKind;
use eedqn_core::envs::env_spec;
use eedqn_core::metrics::{self, RunSummary};
use eedqn_core::tensornet::save_checkpoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEEDS: u64 = 3;
pub const DEFAULT_STEPS: u64 = 200_000;
pub const PAPER_SEEDS: u64 = 10;
pub const PAPER_STEPS: u64 = 1_000_000;
pub const DEFAULT_ENVS: [&str; 2] = ["breakout", "freeway"];
pub const DEFAULT_ALGOS: [&str; 2] = ["dqn", "eedqn"];
/// Monte Carlo resamples for p-values in `summary.json`.
pub const SUMMARY_PERMUTATIONS: usize = 100_000;

/// Contents of a `--config` file. Every field is optional; command-line flags
/// take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub envs: Option<Vec<String>>,
    pub algos: Option<Vec<String>>,
    pub seeds: Option<u64>,
    pub seed_offset: Option<u64>,
    pub steps: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub paper_scale: Option<bool>,
    pub replay_capacity: Option<usize>,
    pub diff_capacity: Option<usize>,
    pub prefill_steps: Option<u64>,
    pub max_episode_steps: Option<u64>,
    pub hidden: Option<Vec<usize>>,
    pub std_kind: Option<StdKind>,
    pub scalarization: Option<Scalarization>,
    pub q_statistic: Option<QStatistic>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Fill every field of `self` that is unset from `base`.
    pub fn or(self, base: FileConfig) -> FileConfig {
        FileConfig {
            envs: self.envs.or(base.envs),
            algos: self.algos.or(base.algos),
            seeds: self.seeds.or(base.seeds),
            seed_offset: self.seed_offset.or(base.seed_offset),
            steps: self.steps.or(base.steps),
            out: self.out.or(base.out),
            workers: self.workers.or(base.workers),
            paper_scale: self.paper_scale.or(base.paper_scale),
            replay_capacity: self.replay_capacity.or(base.replay_capacity),
            diff_capacity: self.diff_capacity.or(base.diff_capacity),
            prefill_steps: self.prefill_steps.or(base.prefill_steps),
            max_episode_steps: self.max_episode_steps.or(base.max_episode_steps),
            hidden: self.hidden.or(base.hidden),
            std_kind: self.std_kind.or(base.std_kind),
            scalarization: self.scalarization.or(base.scalarization),
            q_statistic: self.q_statistic.or(base.q_statistic),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub env: String,
    pub algo: String,
    pub seed: u64,
}

impl Cell {
    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join(&self.env).join(&self.algo).join(self.seed.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub cells: Vec<Cell>,
    pub steps: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub settings: FileConfig,
}

impl Plan {
    /// Build and validate a plan; `algos` falls back to [`DEFAULT_ALGOS`].
    pub fn from_config(cfg: FileConfig) -> Result<Plan, String> {
        let paper = cfg.paper_scale.unwrap_or(false);
        let envs = cfg
            .envs
            .clone()
            .unwrap_or_else(|| DEFAULT_ENVS.iter().map(|s| s.to_string()).collect());
        let algos = cfg
            .algos
            .clone()
            .unwrap_or_else(|| DEFAULT_ALGOS.iter().map(|s| s.to_string()).collect());
        let seeds = cfg.seeds.unwrap_or(if paper { PAPER_SEEDS } else { DEFAULT_SEEDS });
        let offset = cfg.seed_offset.unwrap_or(0);
        let steps = cfg.steps.unwrap_or(if paper { PAPER_STEPS } else { DEFAULT_STEPS });
        let workers = cfg.workers.unwrap_or(1).max(1);
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs"));

        for algo in &algos {
            algorithm(algo).map_err(|e| e.to_string())?;
        }
        for env in &envs {
            env_spec(env).map_err(|e| e.to_string())?;
            for algo in &algos {
                run_config(&cfg, algo, env)?
                    .validate()
                    .map_err(|e| e.to_string())?;
            }
        }
        let mut cells = Vec::new();
        for env in &envs {
            for algo in &algos {
                for seed in offset..offset + seeds {
                    cells.push(Cell {
                        env: env.clone(),
                        algo: algo.clone(),
                        seed,
                    });
                }
            }
        }
        Ok(Plan {
            cells,
            steps,
            out,
            workers,
            settings: cfg,
        })
    }

    /// The aggregation ablation over the configured environments and seeds.
    pub fn ablation(mut cfg: FileConfig) -> Result<Plan, String> {
        cfg.algos = Some(ABLATION_ALGORITHMS.iter().map(|s| s.to_string()).collect());
        Plan::from_config(cfg)
    }
}

/// Full run configuration of one algorithm on one environment.
pub fn run_config(cfg: &FileConfig, algo: &str, env: &str) -> Result<RunConfig, String> {
    let mut run = RunConfig::new(algorithm(algo).map_err(|e| e.to_string())?, env);
    if let Some(v) = cfg.replay_capacity {
        run.replay_capacity = v;
    }
    if let Some(v) = cfg.diff_capacity {
        run.diff_capacity = v;
    }
    if let Some(v) = cfg.prefill_steps {
        run.prefill_steps = v;
    }
    if let Some(v) = cfg.max_episode_steps {
        run.max_episode_steps = v;
    }
    if let Some(v) = &cfg.hidden {
        run.hidden = v.clone();
    }
    if let Some(v) = cfg.std_kind {
        run.std_kind = v;
    }
    if let Some(v) = cfg.scalarization {
        run.scalarization = v;
    }
    if let Some(v) = cfg.q_statistic {
        run.q_statistic = v;
    }
    Ok(run)
}

#[derive(Serialize)]
struct CellConfig<'a> {
    seed: u64,
    total_steps: u64,
    run: &'a RunConfig,
}

/// Train one cell and write its directory.
pub fn run_cell(plan: &Plan, cell: &Cell) -> Result<RunSummary, String> {
    let run = run_config(&plan.settings, &cell.algo, &cell.env)?;
    let err = |e: eedqn_core::Error| e.to_string();
    let dir = cell.dir(&plan.out);
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let echo = CellConfig {
        seed: cell.seed,
        total_steps: plan.steps,
        run: &run,
    };
    let text = serde_json::to_string_pretty(&echo).map_err(|e| e.to_string())?;
    fs::write(dir.join("config.json"), text + "\n").map_err(|e| e.to_string())?;

    let log = run_training(&run, cell.seed, plan.steps).map_err(err)?;
    let spec = env_spec(&cell.env).map_err(err)?;
    let bound = metrics::q_bound(spec.r_max, run.algo.gamma).map_err(err)?;
    let series = metrics::epoch_aggregate(&log.episodes, &log.epoch_max_abs_q, plan.steps);
    let rows = metrics::epoch_rows(&cell.env, &cell.algo, cell.seed, &series, bound);
    metrics::write_epochs_csv(&dir.join("epochs.csv"), &rows).map_err(err)?;
    metrics::write_episodes_csv(&dir.join("episodes.csv"), &log.episodes).map_err(err)?;
    save_checkpoint(&dir.join("checkpoint.json"), &log.checkpoint).map_err(err)?;
    metrics::summarize(&log, bound).map_err(err)
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

#[derive(Debug)]
pub struct Report {
    pub outcomes: Vec<(Cell, Result<RunSummary, String>)>,
}

impl Report {
    pub fn all_ok(&self) -> bool {
        self.outcomes.iter().all(|(_, r)| r.is_ok())
    }

    pub fn summaries(&self) -> Vec<RunSummary> {
        self.outcomes
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().cloned())
            .collect()
    }
}

/// Run every cell, then write `results.csv` and `summary.json` from the
/// cells that succeeded.
pub fn execute(plan: &Plan) -> Result<Report, String> {
    fs::create_dir_all(&plan.out).map_err(|e| format!("{}: {e}", plan.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| e.to_string())?;
    let outcomes: Vec<(Cell, Result<RunSummary, String>)> = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| {
                let r = panic::catch_unwind(AssertUnwindSafe(|| run_cell(plan, cell)))
                    .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(p))));
                match &r {
                    Ok(s) => eprintln!(
                        "done {}/{}/{}: final score {:.3}, peak q ratio {:.3}",
                        cell.env, cell.algo, cell.seed, s.final_score, s.peak_q_ratio
                    ),
                    Err(e) => eprintln!("FAILED {}/{}/{}: {e}", cell.env, cell.algo, cell.seed),
                }
                (cell.clone(), r)
            })
            .collect()
    });
    let report = Report { outcomes };
    let summaries = report.summaries();
    let err = |e: eedqn_core::Error| e.to_string();
    metrics::write_results_csv(&plan.out.join("results.csv"), &summaries).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let summary = metrics::summarize_groups(&summaries, SUMMARY_PERMUTATIONS, &mut rng).map_err(err)?;
    metrics::write_summary_json(&plan.out.join("summary.json"), &summary).map_err(err)?;
    Ok(report)
}
