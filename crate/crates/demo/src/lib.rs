//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Results cross the boundary as JSON strings.

use eedqn_core::agents::elastic::{ElasticSegmenter, StepOutcome};
use eedqn_core::agents::{algorithm, run_training, Ensemble, RunConfig};
use eedqn_core::buffers::{DiffBuffer, StdKind};
use eedqn_core::envs::{chain_optimal_q, make_env, ChainMdp, Environment, Observation};
use eedqn_core::tensornet::AdamConfig;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub steps: usize,
    pub discounted_reward: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Segmentation {
    pub thresholds: Vec<f64>,
    /// Whether `z > h` at each step.
    pub fired: Vec<bool>,
    pub segments: Vec<Segment>,
}

/// Run the elastic segmenter over a stream of differences `zs` with per-step
/// rewards; the stream is treated as one episode ending after the last step.
pub fn segment(zs: &[f64], rewards: &[f64], capacity: usize, gamma: f64) -> eedqn_core::Result<Segmentation> {
    if zs.len() != rewards.len() {
        return Err(eedqn_core::Error::Usage(format!(
            "{} differences but {} rewards",
            zs.len(),
            rewards.len()
        )));
    }
    let mut diffs = DiffBuffer::new(capacity, StdKind::Population)?;
    let mut seg = ElasticSegmenter::new(gamma);
    // states only label positions here
    let dummy = Observation::new(1, 1, 1);
    let mut out = Segmentation {
        thresholds: Vec::new(),
        fired: Vec::new(),
        segments: Vec::new(),
    };
    let mut start = 0;
    for (t, (&z, &r)) in zs.iter().zip(rewards).enumerate() {
        let h = diffs.push_and_threshold(z)?;
        out.thresholds.push(h);
        out.fired.push(z > h);
        let step = StepOutcome {
            observation: &dummy,
            action: 0,
            reward: r,
            next_observation: &dummy,
            terminal: t + 1 == zs.len(),
        };
        if let Some(tr) = seg.step(step, z, h) {
            let steps = tr.extra_steps as usize + 1;
            out.segments.push(Segment {
                start,
                steps,
                discounted_reward: tr.reward,
            });
            start += steps;
        }
    }
    Ok(out)
}

/// Elastic segmentation of a difference stream, as JSON.
#[wasm_bindgen(js_name = segmentStream)]
pub fn segment_stream(zs: Vec<f64>, rewards: Vec<f64>, capacity: usize, gamma: f64) -> Result<String, JsError> {
    let s = segment(&zs, &rewards, capacity, gamma).map_err(to_js)?;
    serde_json::to_string(&s).map_err(to_js)
}

/// A playable MinAtar-style game.
#[wasm_bindgen]
pub struct Game {
    env: Box<dyn Environment>,
    obs: Observation,
    score: f64,
    terminal: bool,
}

#[derive(Serialize)]
struct StepReport {
    reward: f64,
    score: f64,
    terminal: bool,
}

#[wasm_bindgen]
impl Game {
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str, seed: u64) -> Result<Game, JsError> {
        let mut env = make_env(name).map_err(to_js)?;
        let obs = env.reset(seed);
        Ok(Game {
            env,
            obs,
            score: 0.0,
            terminal: false,
        })
    }

    pub fn reset(&mut self, seed: u64) {
        self.obs = self.env.reset(seed);
        self.score = 0.0;
        self.terminal = false;
    }

    pub fn actions(&self) -> usize {
        self.env.spec().actions
    }

    pub fn height(&self) -> usize {
        self.obs.shape().0
    }

    pub fn width(&self) -> usize {
        self.obs.shape().1
    }

    pub fn channels(&self) -> usize {
        self.obs.shape().2
    }

    /// Step with `action`; ignored once the episode is over.
    pub fn step(&mut self, action: usize) -> Result<String, JsError> {
        let reward = if self.terminal {
            0.0
        } else {
            let r = self.env.step(action).map_err(to_js)?;
            self.obs = r.observation;
            self.terminal = r.terminal;
            self.score += r.reward;
            r.reward
        };
        serde_json::to_string(&StepReport {
            reward,
            score: self.score,
            terminal: self.terminal,
        })
        .map_err(to_js)
    }

    /// Per cell, row-major: 0 if empty, else 1 + the highest set channel.
    pub fn frame(&self) -> Vec<u8> {
        frame_codes(&self.obs)
    }
}

pub fn frame_codes(obs: &Observation) -> Vec<u8> {
    let (h, w, c) = obs.shape();
    let mut out = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            if let Some(ch) = (0..c).rev().find(|&ch| obs.get(y, x, ch)) {
                out[y * w + x] = ch as u8 + 1;
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct ChainReport {
    pub learned: Vec<[f64; 2]>,
    pub optimal: Vec<[f64; 2]>,
    pub episodes: usize,
}

/// Train `algo` on an `n`-state chain with a small network.
pub fn chain_report(n: usize, steps: u64, seed: u64, algo: &str) -> eedqn_core::Result<ChainReport> {
    let mut cfg = RunConfig::new(algorithm(algo)?, &format!("chain:{n}"));
    cfg.hidden = vec![32];
    cfg.prefill_steps = 200;
    cfg.replay_capacity = 5_000;
    cfg.diff_capacity = 500;
    cfg.algo.target_update_interval = 200;
    cfg.algo.exploration.decay_steps = steps.max(1);
    let log = run_training(&cfg, seed, steps)?;
    let chain = ChainMdp::new(n)?;
    let ens = Ensemble::from_members(log.checkpoint, AdamConfig::default())?;
    let learned = (0..n - 1)
        .map(|s| ens.online_mean_q(&chain.observation_of(s)).map(|q| [q[0], q[1]]))
        .collect::<eedqn_core::Result<Vec<_>>>()?;
    let mut optimal = chain_optimal_q(n, cfg.algo.gamma)?;
    optimal.truncate(n - 1);
    Ok(ChainReport {
        learned,
        optimal,
        episodes: log.episodes.len(),
    })
}

/// Learned and optimal Q-values on a chain MDP, as JSON.
#[wasm_bindgen(js_name = trainChain)]
pub fn train_chain(n: usize, steps: u64, seed: u64, algo: &str) -> Result<String, JsError> {
    let r = chain_report(n, steps, seed, algo).map_err(to_js)?;
    serde_json::to_string(&r).map_err(to_js)
}
