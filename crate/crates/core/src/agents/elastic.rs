//! Turning the stream of environment steps into stored transitions.

use std::collections::VecDeque;

use crate::buffers::Transition;
use crate::envs::Observation;

/// An open elastic segment.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticState {
    pub start: Observation,
    pub action: usize,
    /// `sum_k gamma^k r_k` over the steps folded in so far.
    pub reward: f64,
    /// Steps folded in so far, minus one.
    pub extra_steps: u32,
}

/// One environment step as seen by a segmenter.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome<'a> {
    pub observation: &'a Observation,
    pub action: usize,
    pub reward: f64,
    pub next_observation: &'a Observation,
    pub terminal: bool,
}

/// Fold one step into the (possibly absent) open segment.
///
/// The step's reward is added as `gamma^d * r` first. The segment closes
/// when `z > h` or the step is terminal; otherwise it stays open with one
/// more extra step.
pub fn elastic_step(
    state: Option<ElasticState>,
    step: StepOutcome<'_>,
    z: f64,
    h: f64,
    gamma: f64,
) -> (Option<ElasticState>, Option<Transition>) {
    let mut seg = state.unwrap_or_else(|| ElasticState {
        start: step.observation.clone(),
        action: step.action,
        reward: 0.0,
        extra_steps: 0,
    });
    seg.reward += gamma.powi(seg.extra_steps as i32) * step.reward;
    if z > h || step.terminal {
        let t = Transition {
            start: seg.start,
            action: seg.action,
            reward: seg.reward,
            end: step.next_observation.clone(),
            extra_steps: seg.extra_steps,
            terminal: step.terminal,
        };
        (None, Some(t))
    } else {
        seg.extra_steps += 1;
        (Some(seg), None)
    }
}

/// Elastic segmentation with episode-boundary handling.
#[derive(Clone, Debug)]
pub struct ElasticSegmenter {
    gamma: f64,
    open: Option<ElasticState>,
    // most recent end observation of the open segment
    last: Option<Observation>,
}

impl ElasticSegmenter {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            open: None,
            last: None,
        }
    }

    pub fn open_segment(&self) -> Option<&ElasticState> {
        self.open.as_ref()
    }

    pub fn step(&mut self, step: StepOutcome<'_>, z: f64, h: f64) -> Option<Transition> {
        let (open, closed) = elastic_step(self.open.take(), step, z, h, self.gamma);
        self.last = open.as_ref().map(|_| step.next_observation.clone());
        self.open = open;
        closed
    }

    /// Close a segment cut short by a time limit; it bootstraps from the
    /// last observed state.
    pub fn flush(&mut self) -> Option<Transition> {
        let seg = self.open.take()?;
        let end = self.last.take()?;
        // the segment was left open with extra_steps already advanced
        Some(Transition {
            start: seg.start,
            action: seg.action,
            reward: seg.reward,
            end,
            extra_steps: seg.extra_steps - 1,
            terminal: false,
        })
    }
}

/// Sliding-window `n`-step returns; `n = 1` gives ordinary transitions.
#[derive(Clone, Debug)]
pub struct NStepWindow {
    n: usize,
    gamma: f64,
    pending: VecDeque<(Observation, usize, f64)>,
}

impl NStepWindow {
    pub fn new(n: usize, gamma: f64) -> Self {
        assert!(n >= 1);
        Self {
            n,
            gamma,
            pending: VecDeque::with_capacity(n),
        }
    }

    fn emit_front(&mut self, end: &Observation, terminal: bool) -> Transition {
        let (start, action, _) = self.pending.front().cloned().expect("window not empty");
        let reward = self
            .pending
            .iter()
            .rev()
            .fold(0.0, |acc, &(_, _, r)| r + self.gamma * acc);
        let extra_steps = self.pending.len() as u32 - 1;
        self.pending.pop_front();
        Transition {
            start,
            action,
            reward,
            end: end.clone(),
            extra_steps,
            terminal,
        }
    }

    pub fn step(&mut self, step: StepOutcome<'_>) -> Vec<Transition> {
        self.pending
            .push_back((step.observation.clone(), step.action, step.reward));
        let mut out = Vec::new();
        if step.terminal {
            while !self.pending.is_empty() {
                out.push(self.emit_front(step.next_observation, true));
            }
        } else if self.pending.len() == self.n {
            out.push(self.emit_front(step.next_observation, false));
        }
        out
    }

    /// Emit every pending window ending at `end`, bootstrapping from it.
    pub fn flush(&mut self, end: &Observation) -> Vec<Transition> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            out.push(self.emit_front(end, false));
        }
        out
    }
}
