//! Bootstrapped regression targets.
//!
//! A transition with `d` extra steps covers `d + 1` environment steps, so a
//! non-terminal target is `R + gamma^(d+1) * V(s')` where `V` is the greedy
//! value of the aggregated ensemble at the end state. Terminal targets are `R`.

use super::config::AggregationMode;
use crate::buffers::Transition;
use crate::error::{Error, Result};
use crate::tensornet::{forward, Matrix, NetParams};

/// Per-action minimum over members.
pub fn min_aggregate(rows: &[&[f64]]) -> Vec<f64> {
    let mut out = rows[0].to_vec();
    for r in &rows[1..] {
        for (o, &v) in out.iter_mut().zip(*r) {
            *o = o.min(v);
        }
    }
    out
}

/// Per-action mean over members.
pub fn avg_aggregate(rows: &[&[f64]]) -> Vec<f64> {
    let mut out = rows[0].to_vec();
    for r in &rows[1..] {
        for (o, &v) in out.iter_mut().zip(*r) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    for o in &mut out {
        *o /= n;
    }
    out
}

/// `lambda * avg + (1 - lambda) * min`, per action.
pub fn convex_aggregate(rows: &[&[f64]], lambda: f64) -> Vec<f64> {
    let lo = min_aggregate(rows);
    let avg = avg_aggregate(rows);
    avg.iter()
        .zip(&lo)
        .map(|(a, m)| lambda * a + (1.0 - lambda) * m)
        .collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn max_value(values: &[f64]) -> f64 {
    values[argmax(values)]
}

/// Per-action aggregate of the target rows for one transition type.
///
/// `DoubleSelect` returns the plain average; its action choice happens in
/// [`bootstrap_value`].
pub fn aggregate(mode: AggregationMode, target_rows: &[&[f64]], multi_step: bool) -> Vec<f64> {
    use AggregationMode as A;
    match mode {
        A::Eedqn if multi_step => min_aggregate(target_rows),
        A::Eedqn => avg_aggregate(target_rows),
        A::VariantEedqn if multi_step => avg_aggregate(target_rows),
        A::VariantEedqn => min_aggregate(target_rows),
        A::MinAll | A::MaxminAll => min_aggregate(target_rows),
        A::AvgAll | A::SingleNet | A::DoubleSelect => avg_aggregate(target_rows),
        A::Convex { lambda } => convex_aggregate(target_rows, lambda),
    }
}

/// Greedy value of the end state under `mode`.
///
/// `target_rows[i]` holds target member `i`'s Q-values at the end state;
/// `online_rows` is only read by `DoubleSelect`.
pub fn bootstrap_value(
    mode: AggregationMode,
    target_rows: &[&[f64]],
    online_rows: &[&[f64]],
    multi_step: bool,
) -> f64 {
    let agg = aggregate(mode, target_rows, multi_step);
    if mode == AggregationMode::DoubleSelect {
        let choice = argmax(&avg_aggregate(online_rows));
        agg[choice]
    } else {
        max_value(&agg)
    }
}

/// `R` for terminal transitions, else `R + gamma^(d+1) * bootstrap`.
pub fn target_value(reward: f64, extra_steps: u32, terminal: bool, bootstrap: f64, gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma.powi(extra_steps as i32 + 1) * bootstrap
    }
}

/// Target for a single transition, evaluating the networks directly.
pub fn compute_target(
    transition: &Transition,
    targets: &[NetParams],
    online: &[NetParams],
    mode: AggregationMode,
    gamma: f64,
) -> Result<f64> {
    if transition.terminal {
        return Ok(transition.reward);
    }
    if targets.is_empty() {
        return Err(Error::Config("no target networks".into()));
    }
    let x = Matrix::from_vec(1, transition.end.len(), transition.end.to_flat())?;
    let tq: Vec<Matrix> = targets.iter().map(|t| forward(t, &x)).collect::<Result<_>>()?;
    let oq: Vec<Matrix> = if mode == AggregationMode::DoubleSelect {
        online.iter().map(|t| forward(t, &x)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let trows: Vec<&[f64]> = tq.iter().map(|m| m.row(0)).collect();
    let orows: Vec<&[f64]> = oq.iter().map(|m| m.row(0)).collect();
    if mode == AggregationMode::DoubleSelect && orows.is_empty() {
        return Err(Error::Config("double selection needs online networks".into()));
    }
    let v = bootstrap_value(mode, &trows, &orows, transition.is_multi_step());
    Ok(target_value(
        transition.reward,
        transition.extra_steps,
        false,
        v,
        gamma,
    ))
}
