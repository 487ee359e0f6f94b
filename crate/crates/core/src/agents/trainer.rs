//! The training loop of one seeded run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AlgoConfig, StepMode};
use super::elastic::{ElasticSegmenter, NStepWindow, StepOutcome};
use super::ensemble::{epsilon_greedy, Ensemble, Scalarization};
use super::target::max_value;
use crate::buffers::{DiffBuffer, ReplayBuffer, StdKind, Transition};
use crate::envs::{make_env, Environment, Observation};
use crate::error::{Error, Result};
use crate::tensornet::{AdamConfig, NetParams, Topology};

/// Number of equal windows a run's step budget is split into.
pub const EPOCHS: usize = 100;

/// Which Q-values feed the per-epoch `max |Q|` statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QStatistic {
    /// Greedy value of the online ensemble mean at every acting step.
    #[default]
    Acting,
    /// Every member's predictions on sampled training batches.
    Training,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: AlgoConfig,
    pub env: String,
    pub replay_capacity: usize,
    pub diff_capacity: usize,
    /// Random-policy steps stored before training starts.
    pub prefill_steps: u64,
    /// Episodes longer than this are cut and the environment reset.
    pub max_episode_steps: u64,
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub std_kind: StdKind,
    pub scalarization: Scalarization,
    pub q_statistic: QStatistic,
}

impl RunConfig {
    pub fn new(algo: AlgoConfig, env: &str) -> Self {
        Self {
            algo,
            env: env.to_string(),
            replay_capacity: 100_000,
            diff_capacity: 10_000,
            prefill_steps: 5_000,
            max_episode_steps: 10_000,
            hidden: vec![128, 128],
            adam: AdamConfig::default(),
            std_kind: StdKind::default(),
            scalarization: Scalarization::default(),
            q_statistic: QStatistic::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.algo.validate()?;
        if self.replay_capacity < self.algo.batch_size {
            return Err(Error::Config(format!(
                "replay capacity {} below batch size {}",
                self.replay_capacity, self.algo.batch_size
            )));
        }
        if self.diff_capacity == 0 || self.max_episode_steps == 0 {
            return Err(Error::Config(
                "difference buffer capacity and episode cap must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Training step (0-based) on which the episode ended.
    pub end_step: u64,
    pub reward: f64,
    pub length: u64,
    /// Cut by the episode cap rather than ended by the environment.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub env: String,
    pub algo: String,
    pub seed: u64,
    pub total_steps: u64,
    pub episodes: Vec<EpisodeRecord>,
    /// Largest `|Q|` seen in each epoch window, `None` for windows with no
    /// observations. Empty when `total_steps` is zero.
    pub epoch_max_abs_q: Vec<Option<f64>>,
    pub updates: u64,
    pub target_syncs: u64,
    pub transitions_stored: u64,
    pub multi_step_stored: u64,
    /// Online members at the end of the run.
    pub checkpoint: Vec<NetParams>,
}

/// Epoch window containing training step `step`.
pub fn epoch_of(step: u64, total_steps: u64) -> usize {
    ((step as u128 * EPOCHS as u128) / total_steps as u128) as usize
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

enum Segmenter {
    Single,
    NStep(NStepWindow),
    Elastic(ElasticSegmenter, DiffBuffer),
}

// Target-network value of the most recent observation, valid until the next sync.
struct ValueCache {
    syncs: u64,
    value: f64,
}

struct Runner<'c> {
    cfg: &'c RunConfig,
    env: Box<dyn Environment>,
    ensemble: Ensemble,
    replay: ReplayBuffer,
    segmenter: Segmenter,
    env_rng: ChaCha8Rng,
    act_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    opportunities: u64,
    updates: u64,
    syncs: u64,
    stored: u64,
    multi_stored: u64,
    cache: Option<ValueCache>,
}

impl Runner<'_> {
    fn store(&mut self, t: Transition) {
        self.stored += 1;
        if t.is_multi_step() {
            self.multi_stored += 1;
        }
        self.replay.push(t);
    }

    fn reset_env(&mut self) -> Observation {
        let s = self.env_rng.gen::<u64>();
        self.env.reset(s)
    }

    fn target_value(&self, obs: &Observation) -> Result<f64> {
        self.ensemble
            .target_state_value(obs, self.cfg.scalarization)
    }

    /// `z` between consecutive observations, reusing the previous step's value
    /// of `obs` when the targets have not changed since.
    fn value_diff(&mut self, obs: &Observation, next: &Observation) -> Result<f64> {
        let v = match &self.cache {
            Some(c) if c.syncs == self.syncs => c.value,
            _ => self.target_value(obs)?,
        };
        let v_next = self.target_value(next)?;
        self.cache = Some(ValueCache {
            syncs: self.syncs,
            value: v_next,
        });
        Ok((v - v_next).abs())
    }

    fn prefill(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let actions = self.env.spec().actions;
        let mut obs = self.reset_env();
        let mut len = 0;
        for _ in 0..self.cfg.prefill_steps {
            let action = rng.gen_range(0..actions);
            let step = self.env.step(action)?;
            len += 1;
            if let Segmenter::Elastic(..) = self.segmenter {
                let z = self.target_value(&obs)? - self.target_value(&step.observation)?;
                if let Segmenter::Elastic(_, diffs) = &mut self.segmenter {
                    diffs.push(z.abs())?;
                }
            }
            self.store(Transition {
                start: obs,
                action,
                reward: step.reward,
                end: step.observation.clone(),
                extra_steps: 0,
                terminal: step.terminal,
            });
            obs = if step.terminal || len >= self.cfg.max_episode_steps {
                len = 0;
                self.reset_env()
            } else {
                step.observation
            };
        }
        Ok(())
    }

    fn learn(&mut self, window_q: &mut Option<f64>) -> Result<()> {
        let algo = &self.cfg.algo;
        if self.replay.len() < algo.batch_size {
            return Ok(());
        }
        let batch = self.replay.sample(algo.batch_size, &mut self.replay_rng)?;
        let stats = self
            .ensemble
            .learn_step(&batch, algo.aggregation, algo.gamma)?;
        self.updates += 1;
        if self.cfg.q_statistic == QStatistic::Training {
            bump(window_q, stats.max_abs_q);
        }
        Ok(())
    }
}

fn bump(slot: &mut Option<f64>, v: f64) {
    *slot = Some(slot.map_or(v, |m| m.max(v)));
}

/// Train one agent from scratch for `total_steps` environment steps.
///
/// Every random choice is drawn from streams derived from `seed`, and nothing
/// in the loop depends on `total_steps` except the epoch bookkeeping, so the
/// first `k` steps of a longer run are identical to a run of `k` steps.
pub fn run_training(cfg: &RunConfig, seed: u64, total_steps: u64) -> Result<RunLog> {
    cfg.validate()?;
    let env = make_env(&cfg.env)?;
    let spec = env.spec();
    let topology = Topology::new(spec.observation_len(), cfg.hidden.clone(), spec.actions)?;
    let algo = &cfg.algo;

    let mut init_rng = stream(seed, 1);
    let ensemble = Ensemble::new(algo.ensemble_size, topology, cfg.adam, &mut init_rng)?;
    let mut log = RunLog {
        env: cfg.env.clone(),
        algo: algo.name.clone(),
        seed,
        total_steps,
        episodes: Vec::new(),
        epoch_max_abs_q: Vec::new(),
        updates: 0,
        target_syncs: 0,
        transitions_stored: 0,
        multi_step_stored: 0,
        checkpoint: Vec::new(),
    };
    if total_steps == 0 {
        log.checkpoint = ensemble.online().to_vec();
        return Ok(log);
    }

    let segmenter = match algo.step_mode {
        StepMode::Single => Segmenter::Single,
        StepMode::FixedN { n } => Segmenter::NStep(NStepWindow::new(n as usize, algo.gamma)),
        StepMode::Elastic => Segmenter::Elastic(
            ElasticSegmenter::new(algo.gamma),
            DiffBuffer::new(cfg.diff_capacity, cfg.std_kind)?,
        ),
    };
    let mut r = Runner {
        cfg,
        env,
        ensemble,
        replay: ReplayBuffer::new(cfg.replay_capacity)?,
        segmenter,
        env_rng: stream(seed, 2),
        act_rng: stream(seed, 3),
        replay_rng: stream(seed, 4),
        opportunities: 0,
        updates: 0,
        syncs: 0,
        stored: 0,
        multi_stored: 0,
        cache: None,
    };
    r.prefill(&mut stream(seed, 5))?;

    let mut window_q: Vec<Option<f64>> = vec![None; EPOCHS];
    let mut obs = r.reset_env();
    let (mut ep_reward, mut ep_len) = (0.0, 0u64);
    for t in 0..total_steps {
        let w = epoch_of(t, total_steps);
        let eps = algo.exploration.epsilon(t);
        let q = r.ensemble.online_mean_q(&obs)?;
        if cfg.q_statistic == QStatistic::Acting {
            bump(&mut window_q[w], max_value(&q).abs());
        }
        let action = epsilon_greedy(&q, eps, &mut r.act_rng);
        let step = r.env.step(action)?;
        ep_reward += step.reward;
        ep_len += 1;

        let outcome = StepOutcome {
            observation: &obs,
            action,
            reward: step.reward,
            next_observation: &step.observation,
            terminal: step.terminal,
        };
        let mut emitted = Vec::new();
        match r.segmenter {
            Segmenter::Single => emitted.push(Transition {
                start: obs.clone(),
                action,
                reward: step.reward,
                end: step.observation.clone(),
                extra_steps: 0,
                terminal: step.terminal,
            }),
            Segmenter::NStep(ref mut win) => emitted = win.step(outcome),
            Segmenter::Elastic(..) => {
                let z = r.value_diff(&obs, &step.observation)?;
                if let Segmenter::Elastic(seg, diffs) = &mut r.segmenter {
                    let h = diffs.push_and_threshold(z)?;
                    emitted.extend(seg.step(outcome, z, h));
                }
            }
        }
        for tr in emitted {
            r.store(tr);
        }

        if t % algo.update_every == 0 {
            r.learn(&mut window_q[w])?;
            r.opportunities += 1;
            if r.opportunities % algo.target_update_interval == 0 {
                r.ensemble.sync_targets();
                r.syncs += 1;
            }
        }

        let truncated = !step.terminal && ep_len >= cfg.max_episode_steps;
        if step.terminal || truncated {
            if truncated {
                let flushed = match &mut r.segmenter {
                    Segmenter::Single => Vec::new(),
                    Segmenter::NStep(win) => win.flush(&step.observation),
                    Segmenter::Elastic(seg, _) => seg.flush().into_iter().collect(),
                };
                for tr in flushed {
                    r.store(tr);
                }
            }
            log.episodes.push(EpisodeRecord {
                episode: log.episodes.len() as u64,
                end_step: t,
                reward: ep_reward,
                length: ep_len,
                truncated,
            });
            ep_reward = 0.0;
            ep_len = 0;
            r.cache = None;
            obs = r.reset_env();
        } else {
            obs = step.observation;
        }
    }

    log.epoch_max_abs_q = window_q;
    log.updates = r.updates;
    log.target_syncs = r.syncs;
    log.transitions_stored = r.stored;
    log.multi_step_stored = r.multi_stored;
    log.checkpoint = r.ensemble.online().to_vec();
    Ok(log)
}
