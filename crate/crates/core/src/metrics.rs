//! Epoch aggregation, overestimation ratios, permutation tests and result files.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{EpisodeRecord, RunLog, EPOCHS};
use crate::error::{Error, Result};

/// Largest attainable `|Q|` when every step pays at most `r_max`.
pub fn q_bound(r_max: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} outside (0, 1)")));
    }
    Ok(r_max / (1.0 - gamma))
}

/// `max_abs_q / bound`; above 1 means overestimation.
pub fn q_ratio(max_abs_q: f64, bound: f64) -> f64 {
    max_abs_q / bound
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub max_abs_q: f64,
    pub episodes: usize,
    /// No episode ended in this window; `mean_reward` repeats the previous
    /// window's (0 before the first completed episode).
    pub carried: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochSeries {
    pub epochs: Vec<EpochStats>,
    /// The episode log was empty.
    pub empty: bool,
}

/// Split a run into [`EPOCHS`] windows of `total_steps / EPOCHS` steps and
/// average the episodes ending in each. Windows without a `max |Q|` reading
/// repeat the previous one.
pub fn epoch_aggregate(episodes: &[EpisodeRecord], max_abs_q: &[Option<f64>], total_steps: u64) -> EpochSeries {
    if episodes.is_empty() || total_steps == 0 {
        return EpochSeries {
            epochs: Vec::new(),
            empty: true,
        };
    }
    let mut sums = vec![(0.0, 0usize); EPOCHS];
    for e in episodes {
        let w = crate::agents::trainer::epoch_of(e.end_step.min(total_steps - 1), total_steps);
        sums[w].0 += e.reward;
        sums[w].1 += 1;
    }
    let mut epochs = Vec::with_capacity(EPOCHS);
    let (mut last_mean, mut last_q) = (0.0, 0.0);
    for (epoch, &(sum, n)) in sums.iter().enumerate() {
        let carried = n == 0;
        if !carried {
            last_mean = sum / n as f64;
        }
        if let Some(Some(q)) = max_abs_q.get(epoch) {
            last_q = *q;
        }
        epochs.push(EpochStats {
            epoch,
            mean_reward: last_mean,
            max_abs_q: last_q,
            episodes: n,
            carried,
        });
    }
    EpochSeries {
        epochs,
        empty: false,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn abs_mean_diff(pooled: &[f64], in_a: impl Fn(usize) -> bool, n_a: usize) -> f64 {
    let n_b = pooled.len() - n_a;
    let (mut sa, mut sb) = (0.0, 0.0);
    for (i, &x) in pooled.iter().enumerate() {
        if in_a(i) {
            sa += x;
        } else {
            sb += x;
        }
    }
    (sa / n_a as f64 - sb / n_b as f64).abs()
}

fn at_least(stat: f64, observed: f64) -> bool {
    stat >= observed - 1e-9 * (1.0 + observed.abs())
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("permutation test needs two non-empty samples".into()));
    }
    Ok(())
}

/// Largest pooled sample size tested by full enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Two-sided p-value over every split of the pooled sample.
pub fn permutation_test_exhaustive(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    let n = a.len() + b.len();
    if n > 24 {
        return Err(Error::Usage(format!("{n} values are too many to enumerate")));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let observed = (mean(a) - mean(b)).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        total += 1;
        if at_least(abs_mean_diff(&pooled, |i| mask >> i & 1 == 1, a.len()), observed) {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Two-sided p-value `(1 + hits) / (1 + n_permutations)` from random splits.
pub fn permutation_test_monte_carlo<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    n_permutations: usize,
    rng: &mut R,
) -> Result<f64> {
    check_samples(a, b)?;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let observed = (mean(a) - mean(b)).abs();
    let mut hits = 0u64;
    for _ in 0..n_permutations {
        pooled.shuffle(rng);
        if at_least(abs_mean_diff(&pooled, |i| i < a.len(), a.len()), observed) {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + n_permutations) as f64)
}

/// Permutation test on the absolute difference of means; exhaustive for up
/// to [`EXHAUSTIVE_LIMIT`] pooled values, Monte Carlo otherwise.
pub fn permutation_test<R: Rng + ?Sized>(a: &[f64], b: &[f64], n_permutations: usize, rng: &mut R) -> Result<f64> {
    if a.len() + b.len() <= EXHAUSTIVE_LIMIT {
        permutation_test_exhaustive(a, b)
    } else {
        permutation_test_monte_carlo(a, b, n_permutations, rng)
    }
}

/// Mean and 95% half-width `1.96 * s / sqrt(n)` with the sample standard
/// deviation (zero for a single value).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(values);
    if n == 1 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, 1.96 * var.sqrt() / (n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub env: String,
    pub algo: String,
    pub seed: u64,
    pub final_score: f64,
    pub peak_q_ratio: f64,
}

/// Episodes averaged for the final score.
pub const FINAL_EPISODES: usize = 100;

/// Mean reward of the last [`FINAL_EPISODES`] episodes.
pub fn final_score(episodes: &[EpisodeRecord]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::Domain("no completed episode to score".into()));
    }
    let tail = &episodes[episodes.len().saturating_sub(FINAL_EPISODES)..];
    Ok(tail.iter().map(|e| e.reward).sum::<f64>() / tail.len() as f64)
}

/// Largest per-epoch `max |Q|` ratio of a run, 0 if nothing was recorded.
pub fn peak_q_ratio(max_abs_q: &[Option<f64>], bound: f64) -> f64 {
    max_abs_q
        .iter()
        .flatten()
        .map(|&q| q_ratio(q, bound))
        .fold(0.0, f64::max)
}

pub fn summarize(log: &RunLog, bound: f64) -> Result<RunSummary> {
    Ok(RunSummary {
        env: log.env.clone(),
        algo: log.algo.clone(),
        seed: log.seed,
        final_score: final_score(&log.episodes)?,
        peak_q_ratio: peak_q_ratio(&log.epoch_max_abs_q, bound),
    })
}

fn sort_key(s: &RunSummary) -> (&str, &str, u64) {
    (&s.env, &s.algo, s.seed)
}

pub fn write_results_csv(path: &Path, summaries: &[RunSummary]) -> Result<()> {
    let mut rows: Vec<&RunSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    write_rows(path, &rows, &RESULT_COLUMNS)
}

pub const RESULT_COLUMNS: [&str; 5] = ["env", "algo", "seed", "final_score", "peak_q_ratio"];

pub fn read_results_csv(path: &Path) -> Result<Vec<RunSummary>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// One line of `epochs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub env: String,
    pub algo: String,
    pub seed: u64,
    pub epoch: usize,
    pub mean_reward: f64,
    pub max_abs_q: f64,
    pub q_ratio: f64,
    pub episodes: usize,
    pub carried: bool,
}

pub fn epoch_rows(env: &str, algo: &str, seed: u64, series: &EpochSeries, bound: f64) -> Vec<EpochRow> {
    series
        .epochs
        .iter()
        .map(|e| EpochRow {
            env: env.to_string(),
            algo: algo.to_string(),
            seed,
            epoch: e.epoch,
            mean_reward: e.mean_reward,
            max_abs_q: e.max_abs_q,
            q_ratio: q_ratio(e.max_abs_q, bound),
            episodes: e.episodes,
            carried: e.carried,
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const EPOCH_COLUMNS: [&str; 9] = [
    "env",
    "algo",
    "seed",
    "epoch",
    "mean_reward",
    "max_abs_q",
    "q_ratio",
    "episodes",
    "carried",
];

pub fn write_epochs_csv(path: &Path, rows: &[EpochRow]) -> Result<()> {
    write_rows(path, rows, &EPOCH_COLUMNS)
}

pub fn read_epochs_csv(path: &Path) -> Result<Vec<EpochRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct EpisodeRow {
    step: u64,
    episode: u64,
    episodic_reward: f64,
    length: u64,
    truncated: bool,
}

pub fn write_episodes_csv(path: &Path, episodes: &[EpisodeRecord]) -> Result<()> {
    let rows: Vec<EpisodeRow> = episodes
        .iter()
        .map(|e| EpisodeRow {
            step: e.end_step,
            episode: e.episode,
            episodic_reward: e.reward,
            length: e.length,
            truncated: e.truncated,
        })
        .collect();
    write_rows(
        path,
        &rows,
        &["step", "episode", "episodic_reward", "length", "truncated"],
    )
}

/// Final-score statistics of one (environment, algorithm) pair across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub env: String,
    pub algo: String,
    pub seeds: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_peak_q_ratio: f64,
    /// Permutation p-value of the final scores against `eedqn` on the same
    /// environment; absent for `eedqn` itself or when it was not run.
    pub p_vs_eedqn: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
}

/// Reference algorithm for pairwise p-values.
pub const REFERENCE_ALGO: &str = "eedqn";

pub fn summarize_groups<R: Rng + ?Sized>(runs: &[RunSummary], n_permutations: usize, rng: &mut R) -> Result<Summary> {
    let mut by_group: BTreeMap<(&str, &str), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        by_group.entry((&r.env, &r.algo)).or_default().push(r);
    }
    let scores = |g: &[&RunSummary]| g.iter().map(|r| r.final_score).collect::<Vec<_>>();
    let mut groups = Vec::new();
    for (&(env, algo), members) in &by_group {
        let s = scores(members);
        let (m, half) = mean_ci(&s);
        let q: Vec<f64> = members.iter().map(|r| r.peak_q_ratio).collect();
        let p = match by_group.get(&(env, REFERENCE_ALGO)) {
            Some(reference) if algo != REFERENCE_ALGO => {
                Some(permutation_test(&scores(reference), &s, n_permutations, rng)?)
            }
            _ => None,
        };
        groups.push(GroupSummary {
            env: env.to_string(),
            algo: algo.to_string(),
            seeds: s.len(),
            mean: m,
            ci_low: m - half,
            ci_high: m + half,
            mean_peak_q_ratio: mean(&q),
            p_vs_eedqn: p,
        });
    }
    Ok(Summary { groups })
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(())
}

pub fn read_summary_json(path: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
