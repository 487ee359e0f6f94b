//! Dense feed-forward Q-network with hand-derived gradients and an Adam optimizer.
//!
//! Parameters of all layers live in one flat buffer. Layer `k` owns a weight
//! block of shape `[in_k x out_k]` (row-major, row `i` holds the outgoing
//! weights of input unit `i`) followed by its bias vector.
//! Hidden layers use rectified-linear activations; the output layer is linear
//! and has one unit per action.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer sizes of a dense network.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl Topology {
    pub fn new(input: usize, hidden: Vec<usize>, output: usize) -> Result<Self> {
        if input == 0 || output == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config(format!(
                "topology dimensions must be positive: input={input} hidden={hidden:?} output={output}"
            )));
        }
        Ok(Self {
            input,
            hidden,
            output,
        })
    }

    /// Two hidden layers of 128 units.
    pub fn dense_default(input: usize, output: usize) -> Self {
        Self {
            input,
            hidden: vec![128, 128],
            output,
        }
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.output);
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn param_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerLayout {
    in_dim: usize,
    out_dim: usize,
    weights: usize,
    bias: usize,
}

fn layout(topology: &Topology) -> Vec<LayerLayout> {
    let mut offset = 0;
    topology
        .dims()
        .windows(2)
        .map(|w| {
            let l = LayerLayout {
                in_dim: w[0],
                out_dim: w[1],
                weights: offset,
                bias: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            l
        })
        .collect()
}

/// Row-major dense matrix, used for observation batches and Q-value batches.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Config("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Weights and biases of one Q-network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    topology: Topology,
    layers: Vec<LayerLayout>,
    data: Vec<f64>,
}

impl NetParams {
    pub fn zeros(topology: Topology) -> Self {
        let layers = layout(&topology);
        let data = vec![0.0; topology.param_count()];
        Self {
            topology,
            layers,
            data,
        }
    }

    /// Uniform fan-in initialization: every weight and bias of a layer with
    /// fan-in `k` is drawn from `U(-1/sqrt(k), 1/sqrt(k))`.
    pub fn init_uniform<R: Rng + ?Sized>(topology: Topology, rng: &mut R) -> Self {
        let mut params = Self::zeros(topology);
        for l in params.layers.clone() {
            let bound = 1.0 / (l.in_dim as f64).sqrt();
            let end = l.bias + l.out_dim;
            for v in &mut params.data[l.weights..end] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        params
    }

    pub fn from_flat(topology: Topology, data: Vec<f64>) -> Result<Self> {
        if data.len() != topology.param_count() {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, topology needs {}",
                data.len(),
                topology.param_count()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        let layers = layout(&topology);
        Ok(Self {
            topology,
            layers,
            data,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Weights of `layer`, shape `[in x out]` row-major.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.data[l.weights..l.bias]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.data[l.weights..l.bias]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.data[l.bias..l.bias + l.out_dim]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.data[l.bias..l.bias + l.out_dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Overwrite these parameters with `other` without reallocating.
    pub fn copy_from(&mut self, other: &NetParams) -> Result<()> {
        if self.topology != other.topology {
            return Err(Error::Config("copy between different topologies".into()));
        }
        self.data.copy_from_slice(&other.data);
        Ok(())
    }

    /// FNV-1a over the bit patterns of all parameters.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Value copy used for target networks.
pub fn clone_into_target(online: &NetParams) -> NetParams {
    online.clone()
}

/// Gradient of the loss with respect to every entry of a [`NetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    topology: Topology,
    data: Vec<f64>,
}

impl Gradient {
    pub fn zeros(topology: Topology) -> Self {
        let n = topology.param_count();
        Self {
            topology,
            data: vec![0.0; n],
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&g| g == 0.0)
    }
}

/// Inputs with at most this fraction of non-zero entries take the sparse path.
const SPARSE_DENSITY: f64 = 0.25;

fn is_sparse(input: &[f64]) -> bool {
    let nnz = input.iter().filter(|&&v| v != 0.0).count();
    (nnz as f64) <= SPARSE_DENSITY * input.len() as f64
}

/// `out = input * W + b` for a batch of row vectors.
fn affine(input: &[f64], batch: usize, w: &[f64], b: &[f64], l: LayerLayout, out: &mut [f64]) {
    assert_eq!(input.len(), batch * l.in_dim);
    assert_eq!(w.len(), l.in_dim * l.out_dim);
    assert_eq!(out.len(), batch * l.out_dim);
    for row in out.chunks_exact_mut(l.out_dim) {
        row.copy_from_slice(b);
    }
    if is_sparse(input) {
        // one-hot style observations: accumulate the weight rows of active inputs
        for (x, o) in input
            .chunks_exact(l.in_dim)
            .zip(out.chunks_exact_mut(l.out_dim))
        {
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let wi = &w[i * l.out_dim..(i + 1) * l.out_dim];
                    for (oj, &wij) in o.iter_mut().zip(wi) {
                        *oj += xi * wij;
                    }
                }
            }
        }
        return;
    }
    // SAFETY: the asserts above guarantee every index touched by the strides
    // below lies inside the corresponding slice.
    unsafe {
        matrixmultiply::dgemm(
            batch,
            l.in_dim,
            l.out_dim,
            1.0,
            input.as_ptr(),
            l.in_dim as isize,
            1,
            w.as_ptr(),
            l.out_dim as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            l.out_dim as isize,
            1,
        );
    }
}

/// `gw = prev^T * delta`, shape `[in x out]`.
fn weight_gradient(prev: &[f64], delta: &[f64], batch: usize, l: LayerLayout, gw: &mut [f64]) {
    assert_eq!(prev.len(), batch * l.in_dim);
    assert_eq!(delta.len(), batch * l.out_dim);
    assert_eq!(gw.len(), l.in_dim * l.out_dim);
    if is_sparse(prev) {
        gw.fill(0.0);
        for (x, d) in prev
            .chunks_exact(l.in_dim)
            .zip(delta.chunks_exact(l.out_dim))
        {
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let gi = &mut gw[i * l.out_dim..(i + 1) * l.out_dim];
                    for (g, &dj) in gi.iter_mut().zip(d) {
                        *g += xi * dj;
                    }
                }
            }
        }
        return;
    }
    // SAFETY: sizes asserted above.
    unsafe {
        matrixmultiply::dgemm(
            l.in_dim,
            batch,
            l.out_dim,
            1.0,
            prev.as_ptr(),
            1,
            l.in_dim as isize,
            delta.as_ptr(),
            l.out_dim as isize,
            1,
            0.0,
            gw.as_mut_ptr(),
            l.out_dim as isize,
            1,
        );
    }
}

fn check_input(params: &NetParams, obs: &Matrix) -> Result<()> {
    if obs.rows() == 0 {
        return Err(Error::Config("empty observation batch".into()));
    }
    if obs.cols() != params.topology.input {
        return Err(Error::Config(format!(
            "observation length {} does not match network input {}",
            obs.cols(),
            params.topology.input
        )));
    }
    Ok(())
}

/// Activations of every layer; index 0 is the input, the last entry the Q-values.
fn forward_cached(params: &NetParams, obs: &Matrix) -> Vec<Vec<f64>> {
    let batch = obs.rows();
    let last = params.layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len() + 1);
    acts.push(obs.as_slice().to_vec());
    for (k, &l) in params.layers.iter().enumerate() {
        let mut out = vec![0.0; batch * l.out_dim];
        affine(
            &acts[k],
            batch,
            params.weights(k),
            params.bias(k),
            l,
            &mut out,
        );
        if k < last {
            for v in &mut out {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        acts.push(out);
    }
    acts
}

/// Q-values for a batch of flattened observations, shape `[batch x actions]`.
pub fn forward(params: &NetParams, obs: &Matrix) -> Result<Matrix> {
    check_input(params, obs)?;
    let mut acts = forward_cached(params, obs);
    let q = acts.pop().expect("network has at least one layer");
    Matrix::from_vec(obs.rows(), params.topology.output, q)
}

/// Mean squared error between `Q(s_b, a_b)` and `y_b` over the batch, and its
/// gradient with respect to the parameters.
pub fn loss_and_gradient(
    params: &NetParams,
    obs: &Matrix,
    actions: &[usize],
    targets: &[f64],
) -> Result<(f64, Gradient)> {
    loss_gradient_and_q(params, obs, actions, targets).map(|(l, g, _)| (l, g))
}

/// [`loss_and_gradient`] that also returns the predicted Q-values.
pub fn loss_gradient_and_q(
    params: &NetParams,
    obs: &Matrix,
    actions: &[usize],
    targets: &[f64],
) -> Result<(f64, Gradient, Matrix)> {
    check_input(params, obs)?;
    let batch = obs.rows();
    if actions.len() != batch || targets.len() != batch {
        return Err(Error::Config(format!(
            "batch of {batch} rows got {} actions and {} targets",
            actions.len(),
            targets.len()
        )));
    }
    if let Some(a) = actions.iter().find(|&&a| a >= params.topology.output) {
        return Err(Error::Config(format!("action index {a} out of range")));
    }
    if let Some(y) = targets.iter().find(|y| !y.is_finite()) {
        return Err(Error::NonFinite(format!("regression target {y}")));
    }

    let mut acts = forward_cached(params, obs);
    let n_actions = params.topology.output;
    let q_vals = acts.pop().expect("network has at least one layer");
    let q = &q_vals;

    let scale = 2.0 / batch as f64;
    let mut loss = 0.0;
    let mut delta = vec![0.0; batch * n_actions];
    for b in 0..batch {
        let err = q[b * n_actions + actions[b]] - targets[b];
        loss += err * err;
        delta[b * n_actions + actions[b]] = scale * err;
    }
    loss /= batch as f64;

    let mut grad = Gradient::zeros(params.topology.clone());
    for k in (0..params.layers.len()).rev() {
        let l = params.layers[k];
        let prev = &acts[k];
        weight_gradient(
            prev,
            &delta,
            batch,
            l,
            &mut grad.data[l.weights..l.bias],
        );
        let gb = &mut grad.data[l.bias..l.bias + l.out_dim];
        for row in delta.chunks_exact(l.out_dim) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if k == 0 {
            break;
        }
        let mut back = vec![0.0; batch * l.in_dim];
        let w = params.weights(k);
        // SAFETY: delta is [batch x out], w is [in x out], back is [batch x in].
        unsafe {
            matrixmultiply::dgemm(
                batch,
                l.out_dim,
                l.in_dim,
                1.0,
                delta.as_ptr(),
                l.out_dim as isize,
                1,
                w.as_ptr(),
                1,
                l.out_dim as isize,
                0.0,
                back.as_mut_ptr(),
                l.in_dim as isize,
                1,
            );
        }
        for (d, &a) in back.iter_mut().zip(prev) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        delta = back;
    }

    if !loss.is_finite() || grad.data.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("loss {loss} or its gradient")));
    }
    Ok((loss, grad, Matrix::from_vec(batch, n_actions, q_vals)?))
}

pub fn gradient(
    params: &NetParams,
    obs: &Matrix,
    actions: &[usize],
    targets: &[f64],
) -> Result<Gradient> {
    loss_and_gradient(params, obs, actions, targets).map(|(_, g)| g)
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.00025,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 0.0003125,
        }
    }
}

/// First and second moment accumulators for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    config: AdamConfig,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(topology: &Topology, config: AdamConfig) -> Self {
        let n = topology.param_count();
        Self {
            config,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }
}

/// One bias-corrected Adam step.
pub fn apply_update(
    params: &mut NetParams,
    state: &mut OptimizerState,
    grad: &Gradient,
) -> Result<()> {
    if params.topology != grad.topology || state.first_moment.len() != params.data.len() {
        return Err(Error::Config(
            "gradient, optimizer state and parameters disagree in shape".into(),
        ));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    // bias corrections folded into the step size and the denominator
    let step_size = learning_rate / (1.0 - beta1.powi(t));
    let inv_sqrt_c2 = 1.0 / (1.0 - beta2.powi(t)).sqrt();
    for (((p, m), v), &g) in params
        .data
        .iter_mut()
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
        .zip(&grad.data)
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= step_size * *m / (v.sqrt() * inv_sqrt_c2 + epsilon);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    topology: Topology,
    members: Vec<Vec<f64>>,
}

const CHECKPOINT_FORMAT: &str = "eedqn-checkpoint";

/// Serialize a set of networks sharing one topology as JSON.
pub fn checkpoint_to_json(members: &[NetParams]) -> Result<String> {
    let topology = members
        .first()
        .ok_or_else(|| Error::Usage("checkpoint needs at least one network".into()))?
        .topology
        .clone();
    if members.iter().any(|m| m.topology != topology) {
        return Err(Error::Config("checkpoint members differ in topology".into()));
    }
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        topology,
        members: members.iter().map(|m| m.data.clone()).collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn checkpoint_from_json(text: &str) -> Result<Vec<NetParams>> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format != CHECKPOINT_FORMAT || file.version != 1 {
        return Err(Error::Config(format!(
            "unsupported checkpoint {} v{}",
            file.format, file.version
        )));
    }
    file.members
        .into_iter()
        .map(|data| NetParams::from_flat(file.topology.clone(), data))
        .collect()
}

pub fn save_checkpoint(path: &Path, members: &[NetParams]) -> Result<()> {
    fs::write(path, checkpoint_to_json(members)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<NetParams>> {
    checkpoint_from_json(&fs::read_to_string(path)?)
}
