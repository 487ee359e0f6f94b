//! Linear corridor with a rewarding terminal state at the far end.
//!
//! States `0..n`, the agent starts in state 0 and state `n - 1` is terminal.
//! `FORWARD` moves one state right, `BACK` one state left (state 0 is a wall).
//! Entering the terminal state pays 1; every other transition pays 0.

use super::{check_action, EnvSpec, Environment, Observation, StepResult};
use crate::error::{Error, Result};

pub const CHAIN_FORWARD: usize = 0;
pub const CHAIN_BACK: usize = 1;

pub struct ChainMdp {
    spec: EnvSpec,
    n: usize,
    state: usize,
    terminal: bool,
}

impl ChainMdp {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=50).contains(&n) {
            return Err(Error::Config(format!(
                "chain length must be in 2..=50, got {n}"
            )));
        }
        Ok(Self {
            spec: EnvSpec {
                name: format!("chain:{n}"),
                actions: 2,
                shape: (1, n, 1),
                r_max: 1.0,
            },
            n,
            state: 0,
            terminal: false,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Observation of an arbitrary state.
    pub fn observation_of(&self, state: usize) -> Observation {
        let mut o = Observation::new(1, self.n, 1);
        o.set(0, state, 0);
        o
    }
}

impl Environment for ChainMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.state = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(&self.spec, action, self.terminal)?;
        self.state = if action == CHAIN_FORWARD {
            self.state + 1
        } else {
            self.state.saturating_sub(1)
        };
        self.terminal = self.state == self.n - 1;
        Ok(StepResult {
            observation: self.observation(),
            reward: if self.terminal { 1.0 } else { 0.0 },
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Observation {
        self.observation_of(self.state)
    }
}

/// Optimal action values of the non-terminal states, indexed
/// `[state][action]` with `CHAIN_FORWARD` / `CHAIN_BACK`.
///
/// The optimal policy always moves forward, so `V(k) = gamma^(n-2-k)`.
pub fn chain_optimal_q(n_states: usize, gamma: f64) -> Result<Vec<[f64; 2]>> {
    if !(2..=50).contains(&n_states) {
        return Err(Error::Domain(format!(
            "chain length must be in 2..=50, got {n_states}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let value = |k: usize| gamma.powi((n_states - 2 - k) as i32);
    Ok((0..n_states - 1)
        .map(|k| {
            let mut q = [0.0; 2];
            q[CHAIN_FORWARD] = value(k);
            q[CHAIN_BACK] = gamma * value(k.saturating_sub(1));
            q
        })
        .collect())
}
