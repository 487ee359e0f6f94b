use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::AggregationMode;
use super::target::{argmax, avg_aggregate, bootstrap_value, max_value, target_value};
use crate::buffers::Transition;
use crate::envs::Observation;
use crate::error::{Error, Result};
use crate::tensornet::{
    apply_update, forward, loss_gradient_and_q, AdamConfig, Matrix, NetParams, OptimizerState,
    Topology,
};

/// How a vector of per-action values becomes one state value when measuring
/// the difference between consecutive states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scalarization {
    /// `max_a avg_i Q_i(s, a)`
    #[default]
    GreedyValue,
    /// `mean_a avg_i Q_i(s, a)`
    MeanOverActions,
}

/// Online members, their target copies and optimizer states.
#[derive(Clone, Debug)]
pub struct Ensemble {
    online: Vec<NetParams>,
    targets: Vec<NetParams>,
    optimizers: Vec<OptimizerState>,
}

/// Result of one gradient-step opportunity.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnStats {
    pub losses: Vec<f64>,
    /// Largest `|Q_i(s, a)|` predicted by any member over the batch.
    pub max_abs_q: f64,
}

fn obs_matrix<'a>(obs: impl ExactSizeIterator<Item = &'a Observation>, width: usize) -> Result<Matrix> {
    let rows = obs.len();
    let mut m = Matrix::zeros(rows, width);
    for (i, o) in obs.enumerate() {
        if o.len() != width {
            return Err(Error::Config(format!(
                "observation of length {} for a network with input {width}",
                o.len()
            )));
        }
        o.write_flat(m.row_mut(i));
    }
    Ok(m)
}

fn mean_q(nets: &[NetParams], obs: &Observation) -> Result<Vec<f64>> {
    let x = obs_matrix(std::iter::once(obs), nets[0].topology().input)?;
    let qs: Vec<Matrix> = nets.iter().map(|n| forward(n, &x)).collect::<Result<_>>()?;
    let rows: Vec<&[f64]> = qs.iter().map(|q| q.row(0)).collect();
    Ok(avg_aggregate(&rows))
}

/// Uniform random action with probability `epsilon`, otherwise the greedy
/// action of `q` (lowest index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

impl Ensemble {
    pub fn new<R: Rng + ?Sized>(size: usize, topology: Topology, adam: AdamConfig, rng: &mut R) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        let online: Vec<NetParams> = (0..size)
            .map(|_| NetParams::init_uniform(topology.clone(), rng))
            .collect();
        Self::from_members(online, adam)
    }

    /// Ensemble whose targets start as copies of `online`.
    pub fn from_members(online: Vec<NetParams>, adam: AdamConfig) -> Result<Self> {
        let topology = online
            .first()
            .ok_or_else(|| Error::Config("ensemble needs at least one member".into()))?
            .topology()
            .clone();
        if online.iter().any(|m| *m.topology() != topology) {
            return Err(Error::Config("ensemble members differ in topology".into()));
        }
        let targets = online.clone();
        let optimizers = online
            .iter()
            .map(|_| OptimizerState::new(&topology, adam))
            .collect();
        Ok(Self {
            online,
            targets,
            optimizers,
        })
    }

    pub fn size(&self) -> usize {
        self.online.len()
    }

    pub fn topology(&self) -> &Topology {
        self.online[0].topology()
    }

    pub fn online(&self) -> &[NetParams] {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut [NetParams] {
        &mut self.online
    }

    pub fn targets(&self) -> &[NetParams] {
        &self.targets
    }

    pub fn optimizers(&self) -> &[OptimizerState] {
        &self.optimizers
    }

    /// Copy every online member into its own target.
    pub fn sync_targets(&mut self) {
        for (t, o) in self.targets.iter_mut().zip(&self.online) {
            t.copy_from(o).expect("members share one topology");
        }
    }

    /// Mean over online members of `Q_i(obs, .)`.
    pub fn online_mean_q(&self, obs: &Observation) -> Result<Vec<f64>> {
        mean_q(&self.online, obs)
    }

    pub fn target_mean_q(&self, obs: &Observation) -> Result<Vec<f64>> {
        mean_q(&self.targets, obs)
    }

    /// Epsilon-greedy action on the mean of the online members.
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &Observation, epsilon: f64, rng: &mut R) -> Result<usize> {
        let q = self.online_mean_q(obs)?;
        Ok(epsilon_greedy(&q, epsilon, rng))
    }

    /// Scalar value of `obs` under the target members.
    pub fn target_state_value(&self, obs: &Observation, how: Scalarization) -> Result<f64> {
        let q = self.target_mean_q(obs)?;
        Ok(match how {
            Scalarization::GreedyValue => max_value(&q),
            Scalarization::MeanOverActions => q.iter().sum::<f64>() / q.len() as f64,
        })
    }

    /// `|V(s) - V(s')|` under the target members.
    pub fn state_value_diff(&self, s: &Observation, s_next: &Observation, how: Scalarization) -> Result<f64> {
        Ok((self.target_state_value(s, how)? - self.target_state_value(s_next, how)?).abs())
    }

    /// Regression targets for a batch.
    pub fn batch_targets(&self, batch: &[&Transition], mode: AggregationMode, gamma: f64) -> Result<Vec<f64>> {
        let width = self.topology().input;
        let ends = obs_matrix(batch.iter().map(|t| &t.end), width)?;
        let tq: Vec<Matrix> = self
            .targets
            .iter()
            .map(|n| forward(n, &ends))
            .collect::<Result<_>>()?;
        let oq: Vec<Matrix> = if mode == AggregationMode::DoubleSelect {
            self.online
                .iter()
                .map(|n| forward(n, &ends))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let mut ys = Vec::with_capacity(batch.len());
        for (b, t) in batch.iter().enumerate() {
            let y = if t.terminal {
                t.reward
            } else {
                let trows: Vec<&[f64]> = tq.iter().map(|q| q.row(b)).collect();
                let orows: Vec<&[f64]> = oq.iter().map(|q| q.row(b)).collect();
                let v = bootstrap_value(mode, &trows, &orows, t.is_multi_step());
                target_value(t.reward, t.extra_steps, false, v, gamma)
            };
            if !y.is_finite() {
                return Err(Error::NonFinite(format!("target {y}")));
            }
            ys.push(y);
        }
        Ok(ys)
    }

    /// Regress every online member toward one shared target per sample, one
    /// Adam step each.
    pub fn learn_step(&mut self, batch: &[&Transition], mode: AggregationMode, gamma: f64) -> Result<LearnStats> {
        if batch.is_empty() {
            return Err(Error::Usage("learn step on an empty batch".into()));
        }
        let ys = self.batch_targets(batch, mode, gamma)?;
        let starts = obs_matrix(batch.iter().map(|t| &t.start), self.topology().input)?;
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let mut losses = Vec::with_capacity(self.size());
        let mut max_abs_q: f64 = 0.0;
        for (net, opt) in self.online.iter_mut().zip(&mut self.optimizers) {
            let (loss, grad, q) = loss_gradient_and_q(net, &starts, &actions, &ys)?;
            max_abs_q = q.as_slice().iter().fold(max_abs_q, |m, v| m.max(v.abs()));
            apply_update(net, opt, &grad)?;
            losses.push(loss);
        }
        Ok(LearnStats { losses, max_abs_q })
    }
}
