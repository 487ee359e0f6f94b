//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::VecDeque;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use eedqn_core::agents::elastic::{ElasticSegmenter, NStepWindow, StepOutcome};
use eedqn_core::agents::target::compute_target;
use eedqn_core::agents::{algorithm, run_training, AggregationMode, Ensemble, RunConfig, RunLog, EPOCHS};
use eedqn_core::buffers::{DiffBuffer, StdKind, Transition};
use eedqn_core::envs::{chain_optimal_q, ChainMdp, Environment, CHAIN_BACK, CHAIN_FORWARD};
use eedqn_core::metrics::{
    self, final_score, permutation_test, permutation_test_exhaustive, permutation_test_monte_carlo,
};
use eedqn_core::tensornet::{loss_and_gradient, AdamConfig, Matrix, NetParams, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- gradients

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for case in 0..100 {
        let input = rng.gen_range(2..12);
        let hidden: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(2..10)).collect();
        let output = rng.gen_range(2..6);
        let topo = Topology::new(input, hidden, output).map_err(|e| e.to_string())?;
        let mut params = NetParams::init_uniform(topo, &mut rng);
        let batch = rng.gen_range(1..9);
        // alternate binary (sparse) inputs with dense real ones
        let binary = case % 2 == 0;
        let data: Vec<f64> = (0..batch * input)
            .map(|_| {
                if binary {
                    f64::from(u8::from(rng.gen_bool(0.2)))
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let obs = Matrix::from_vec(batch, input, data).map_err(|e| e.to_string())?;
        let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..output)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grad) = loss_and_gradient(&params, &obs, &actions, &targets).map_err(|e| e.to_string())?;
        let h = 1e-6;
        for k in 0..params.as_slice().len() {
            let orig = params.as_slice()[k];
            params.as_mut_slice()[k] = orig + h;
            let (lp, _) = loss_and_gradient(&params, &obs, &actions, &targets).map_err(|e| e.to_string())?;
            params.as_mut_slice()[k] = orig - h;
            let (lm, _) = loss_and_gradient(&params, &obs, &actions, &targets).map_err(|e| e.to_string())?;
            params.as_mut_slice()[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad.as_slice()[k];
            let err = (numeric - analytic).abs();
            let scale = numeric.abs().max(analytic.abs());
            ensure(err <= (1e-4 * scale).max(1e-7), || {
                format!("case {case} param {k}: analytic {analytic} vs numeric {numeric}")
            })?;
            if scale > 1e-7 {
                worst = worst.max(err / scale);
            }
            checked += 1;
        }
    }
    Ok(format!("100 cases, {checked} parameters, worst relative error {worst:.2e}"))
}

// ------------------------------------------------------------ target oracle

const GAMMA: f64 = 0.99;
const CHAIN: usize = 10;

// Q-tables of linear one-hot networks: table[state][action]
type Table = Vec<[f64; 2]>;

fn table_net(t: &Table) -> NetParams {
    let topo = Topology::new(t.len(), vec![], 2).unwrap();
    let w: Vec<f64> = t.iter().flat_map(|r| r.iter().copied()).collect();
    let mut p = NetParams::zeros(topo);
    p.weights_mut(0).copy_from_slice(&w);
    p
}

fn random_table(rng: &mut ChaCha8Rng) -> Table {
    (0..CHAIN).map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect()
}

struct Script {
    start: usize,
    actions: Vec<usize>,
}

// Walk the chain by hand: returns (reward sum, last state, terminal, steps used).
fn hand_segment(s: &Script, d: usize) -> (f64, usize, bool, usize) {
    let mut state = s.start;
    let mut ret = 0.0;
    for (j, &a) in s.actions.iter().take(d + 1).enumerate() {
        state = if a == CHAIN_FORWARD { state + 1 } else { state.saturating_sub(1) };
        if state == CHAIN - 1 {
            ret += GAMMA.powi(j as i32);
            return (ret, state, true, j + 1);
        }
    }
    (ret, state, false, d + 1)
}

// Play the script through the real environment and the elastic segmenter,
// forcing a boundary after `d + 1` steps.
fn elastic_transition(s: &Script, d: usize) -> Transition {
    let mut env = ChainMdp::new(CHAIN).unwrap();
    let mut obs = env.reset(0);
    for _ in 0..s.start {
        obs = env.step(CHAIN_FORWARD).unwrap().observation;
    }
    let mut seg = ElasticSegmenter::new(GAMMA);
    for (j, &a) in s.actions.iter().enumerate() {
        let step = env.step(a).unwrap();
        let z = if j == d { 2.0 } else { 0.5 };
        let out = StepOutcome {
            observation: &obs,
            action: a,
            reward: step.reward,
            next_observation: &step.observation,
            terminal: step.terminal,
        };
        if let Some(t) = seg.step(out, z, 1.0) {
            return t;
        }
        obs = step.observation;
    }
    panic!("script too short for d = {d}");
}

fn nstep_transition(s: &Script, n: usize) -> Transition {
    let mut env = ChainMdp::new(CHAIN).unwrap();
    let mut obs = env.reset(0);
    for _ in 0..s.start {
        obs = env.step(CHAIN_FORWARD).unwrap().observation;
    }
    let mut win = NStepWindow::new(n, GAMMA);
    for &a in &s.actions {
        let step = env.step(a).unwrap();
        let out = StepOutcome {
            observation: &obs,
            action: a,
            reward: step.reward,
            next_observation: &step.observation,
            terminal: step.terminal,
        };
        if let Some(t) = win.step(out).into_iter().next() {
            return t;
        }
        obs = step.observation;
    }
    panic!("script too short for n = {n}");
}

fn best(v: [f64; 2]) -> f64 {
    if v[0] >= v[1] {
        v[0]
    } else {
        v[1]
    }
}

// Bootstrap value written out per mode, straight from the tables.
fn hand_bootstrap(mode: AggregationMode, targets: &[Table], online: &[Table], end: usize, multi: bool) -> f64 {
    let n = targets.len() as f64;
    let min = [0, 1].map(|a| targets.iter().map(|t| t[end][a]).fold(f64::INFINITY, f64::min));
    let avg = [0, 1].map(|a| targets.iter().map(|t| t[end][a]).sum::<f64>() / n);
    match mode {
        AggregationMode::Eedqn => best(if multi { min } else { avg }),
        AggregationMode::VariantEedqn => best(if multi { avg } else { min }),
        AggregationMode::MinAll | AggregationMode::MaxminAll => best(min),
        AggregationMode::AvgAll | AggregationMode::SingleNet => best(avg),
        AggregationMode::Convex { lambda } => best([0, 1].map(|a| lambda * avg[a] + (1.0 - lambda) * min[a])),
        AggregationMode::DoubleSelect => {
            let o = &online[0][end];
            let choice = if o[0] >= o[1] { 0 } else { 1 };
            targets[0][end][choice]
        }
    }
}

fn target_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let modes: Vec<(AggregationMode, usize)> = vec![
        (AggregationMode::Eedqn, 2),
        (AggregationMode::Eedqn, 1),
        (AggregationMode::VariantEedqn, 2),
        (AggregationMode::MinAll, 2),
        (AggregationMode::AvgAll, 2),
        (AggregationMode::Convex { lambda: 0.75 }, 2),
        (AggregationMode::Convex { lambda: 0.5 }, 2),
        (AggregationMode::Convex { lambda: 0.25 }, 2),
        (AggregationMode::SingleNet, 1),
        (AggregationMode::DoubleSelect, 1),
        (AggregationMode::MaxminAll, 2),
    ];
    let f = CHAIN_FORWARD;
    let b = CHAIN_BACK;
    let mut scripts = Vec::new();
    for start in 0..CHAIN - 1 {
        scripts.push(Script { start, actions: vec![f; 6] });
        scripts.push(Script { start, actions: vec![f, b, f, f, b, f] });
        scripts.push(Script { start, actions: vec![b, b, f, f, f, f] });
    }
    let mut compared = 0usize;
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64, what: &str| -> Result<(), String> {
        let err = (got - want).abs();
        worst = worst.max(err);
        compared += 1;
        ensure(err <= 1e-10, || format!("{what}: got {got}, expected {want}"))
    };
    for trial in 0..5 {
        let tables: Vec<Table> = (0..2).map(|_| random_table(&mut rng)).collect();
        let online: Vec<Table> = (0..2).map(|_| random_table(&mut rng)).collect();
        for &(mode, size) in &modes {
            let tnets: Vec<NetParams> = tables[..size].iter().map(table_net).collect();
            let onets: Vec<NetParams> = online[..size].iter().map(table_net).collect();
            let mut ens = Ensemble::from_members(tnets.clone(), AdamConfig::default()).unwrap();
            for (o, src) in ens.online_mut().iter_mut().zip(&onets) {
                o.copy_from(src).unwrap();
            }
            for (si, s) in scripts.iter().enumerate() {
                for d in [0usize, 1, 2, 5] {
                    let t = elastic_transition(s, d);
                    let (ret, end, terminal, used) = hand_segment(s, d);
                    let what = format!("trial {trial} {mode:?} N={size} script {si} d={d}");
                    ensure(t.extra_steps as usize + 1 == used && t.terminal == terminal, || {
                        format!("{what}: segment shape {} / {}", t.extra_steps, t.terminal)
                    })?;
                    let want = if terminal {
                        ret
                    } else {
                        ret + GAMMA.powi(used as i32)
                            * hand_bootstrap(mode, &tables[..size], &online[..size], end, used > 1)
                    };
                    check(t.reward, ret, &format!("{what} return"))?;
                    let got = compute_target(&t, &tnets, &onets, mode, GAMMA).map_err(|e| e.to_string())?;
                    check(got, want, &what)?;
                    let batch = ens.batch_targets(&[&t], mode, GAMMA).map_err(|e| e.to_string())?;
                    check(batch[0], want, &format!("{what} batched"))?;

                    // N = 1: the elastic EEDQN target equals the n-step DQN
                    // target of the same stored segment
                    if size == 1 && mode == AggregationMode::Eedqn && !terminal {
                        let n = nstep_transition(s, d + 1);
                        ensure(n == t, || format!("{what}: n-step window stored {n:?}"))?;
                        let single =
                            compute_target(&n, &tnets, &onets, AggregationMode::SingleNet, GAMMA).unwrap();
                        check(got, single, &format!("{what} n-step reduction"))?;
                    }
                }
            }
        }

        // single-step reductions written as the classic baselines' targets
        let (q1, q2, o1) = (&tables[0], &tables[1], &online[0]);
        for s in 0..CHAIN - 1 {
            let t = Transition {
                start: ChainMdp::new(CHAIN).unwrap().observation_of(s),
                action: f,
                reward: 0.25,
                end: ChainMdp::new(CHAIN).unwrap().observation_of(s + 1),
                extra_steps: 0,
                terminal: false,
            };
            let e = s + 1;
            let two = [table_net(q1), table_net(q2)];
            let maxmin = 0.25 + GAMMA * best([q1[e][0].min(q2[e][0]), q1[e][1].min(q2[e][1])]);
            check(
                compute_target(&t, &two, &[], AggregationMode::MaxminAll, GAMMA).unwrap(),
                maxmin,
                "maxmin reduction",
            )?;
            let averaged = 0.25 + GAMMA * best([(q1[e][0] + q2[e][0]) / 2.0, (q1[e][1] + q2[e][1]) / 2.0]);
            check(
                compute_target(&t, &two, &[], AggregationMode::AvgAll, GAMMA).unwrap(),
                averaged,
                "averaged reduction",
            )?;
            let pick = if o1[e][0] >= o1[e][1] { 0 } else { 1 };
            let double = 0.25 + GAMMA * q1[e][pick];
            check(
                compute_target(&t, &[table_net(q1)], &[table_net(o1)], AggregationMode::DoubleSelect, GAMMA).unwrap(),
                double,
                "double reduction",
            )?;
            let single_eedqn = compute_target(&t, &[table_net(q1)], &[], AggregationMode::Eedqn, GAMMA).unwrap();
            let dqn = 0.25 + GAMMA * best(q1[e]);
            check(single_eedqn, dqn, "N=1 single-step reduction")?;
        }
    }
    Ok(format!("{compared} comparisons over 11 mode/size pairs, d in {{0,1,2,5}}, max error {worst:.1e}"))
}

// ------------------------------------------------------ threshold mechanics

fn threshold_mechanics() -> Outcome {
    let mut b = DiffBuffer::new(100, StdKind::Population).unwrap();
    let mut fired = 0;
    for _ in 0..1000 {
        let h = b.push_and_threshold(0.7).unwrap();
        if 0.7 > h {
            fired += 1;
        }
    }
    ensure(fired == 0, || format!("constant stream fired {fired} times"))?;

    let mut b = DiffBuffer::new(10, StdKind::Population).unwrap();
    b.push(0.0).unwrap();
    b.push(4.0).unwrap();
    let h = b.push_and_threshold(8.0).unwrap();
    let vals = [0.0, 4.0, 8.0];
    let mean = vals.iter().sum::<f64>() / 3.0;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    let direct = mean + sd / 3f64.sqrt();
    ensure((h - direct).abs() < 1e-12 && (h - 5.886).abs() < 1e-3 && 8.0 > h, || {
        format!("worked example h = {h}, direct {direct}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let ops = 1_000_000;
    for (kind, cap) in [(StdKind::Population, 1000), (StdKind::Sample, 37)] {
        let mut buf = DiffBuffer::new(cap, kind).unwrap();
        let mut model: VecDeque<f64> = VecDeque::new();
        for op in 0..ops / 2 {
            // occasional regime changes in scale
            let scale = [1e-3, 1.0, 50.0][(op / 50_000) % 3];
            let z = rng.gen_range(0.0..1.0) * scale;
            let h = buf.push_and_threshold(z).unwrap();
            model.push_back(z);
            if model.len() > cap {
                model.pop_front();
            }
            let n = model.len() as f64;
            let mean = model.iter().sum::<f64>() / n;
            let ss = model.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let sd = match kind {
                _ if model.len() < 2 => 0.0,
                StdKind::Population => (ss / n).sqrt(),
                StdKind::Sample => (ss / (n - 1.0)).sqrt(),
            };
            let want = mean + sd / n.sqrt();
            for (got, exp, what) in [(buf.mean(), mean, "mean"), (buf.std_dev(), sd, "std"), (h, want, "threshold")] {
                let err = (got - exp).abs() / exp.abs().max(1.0);
                worst = worst.max(err);
                ensure(err <= 1e-9, || format!("op {op}: {what} {got} vs {exp}"))?;
            }
        }
    }
    Ok(format!("worked examples exact, {ops} random ops, worst relative error {worst:.1e}"))
}

// -------------------------------------------------------- permutation test

// Independent exhaustive oracle: recursive enumeration of label subsets.
fn oracle_p(a: &[f64], b: &[f64]) -> f64 {
    fn rec(pool: &[f64], k: usize, start: usize, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if chosen.len() == k {
            out.push(chosen.clone());
            return;
        }
        for i in start..pool.len() {
            chosen.push(i);
            rec(pool, k, i + 1, chosen, out);
            chosen.pop();
        }
    }
    let pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let obs = (mean(a) - mean(b)).abs();
    let mut splits = Vec::new();
    rec(&pool, a.len(), 0, &mut Vec::new(), &mut splits);
    let hits = splits
        .iter()
        .filter(|idx| {
            let xa: Vec<f64> = idx.iter().map(|&i| pool[i]).collect();
            let xb: Vec<f64> = (0..pool.len()).filter(|i| !idx.contains(i)).map(|i| pool[i]).collect();
            (mean(&xa) - mean(&xb)).abs() >= obs - 1e-9 * (1.0 + obs)
        })
        .count();
    hits as f64 / splits.len() as f64
}

fn permutation_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut fixtures: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (vec![1.0, 2.0], vec![1.0, 2.0]),
        (vec![0.0; 3], vec![10.0; 3]),
        (vec![1.0], vec![2.0]),
    ];
    for na in 1..12 {
        for nb in 1..=12 - na {
            let ints = rng.gen_bool(0.5);
            let shift = rng.gen_range(0.0..1.5);
            let draw = |rng: &mut ChaCha8Rng, shift: f64| -> f64 {
                if ints {
                    f64::from(rng.gen_range(0..4)) + f64::round(shift)
                } else {
                    rng.gen_range(0.0..1.0) + shift
                }
            };
            let a: Vec<f64> = (0..na).map(|_| draw(&mut rng, 0.0)).collect();
            let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng, shift)).collect();
            fixtures.push((a, b));
        }
    }
    let mut worst_mc: f64 = 0.0;
    for (i, (a, b)) in fixtures.iter().enumerate() {
        let exact = permutation_test_exhaustive(a, b).map_err(|e| e.to_string())?;
        let oracle = oracle_p(a, b);
        ensure(exact == oracle, || format!("fixture {i}: exhaustive {exact} vs oracle {oracle}"))?;
        let dispatched = permutation_test(a, b, 10, &mut rng).map_err(|e| e.to_string())?;
        ensure(dispatched == exact, || format!("fixture {i}: n <= 12 did not enumerate"))?;
        if i % 3 == 0 {
            let mc = permutation_test_monte_carlo(a, b, 100_000, &mut rng).map_err(|e| e.to_string())?;
            worst_mc = worst_mc.max((mc - exact).abs());
            ensure((mc - exact).abs() <= 0.02, || format!("fixture {i}: Monte Carlo {mc} vs exact {exact}"))?;
        }
    }
    Ok(format!(
        "{} fixtures exact, Monte Carlo (1e5 resamples) max deviation {worst_mc:.4}",
        fixtures.len()
    ))
}

// ------------------------------------------------------------- convergence

fn chain_convergence() -> Outcome {
    let cfg = RunConfig::new(algorithm("dqn").unwrap(), "chain:5");
    let log = run_training(&cfg, 0, 50_000).map_err(|e| e.to_string())?;
    let ens = Ensemble::from_members(log.checkpoint, AdamConfig::default()).unwrap();
    let chain = ChainMdp::new(5).unwrap();
    let q = ens.online_mean_q(&chain.observation_of(0)).unwrap();
    let opt = chain_optimal_q(5, GAMMA).unwrap()[0];
    let greedy = best([q[0], q[1]]);
    let want = best(opt);
    let rel = (greedy - want).abs() / want;
    ensure(rel <= 0.05, || format!("greedy Q(s0) {greedy} vs optimal {want}"))?;
    Ok(format!("greedy Q(s0) = {greedy:.6}, optimal {want:.6}, relative error {rel:.2e}"))
}

// ------------------------------------------------------------- determinism

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("eedqn-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg = RunConfig::new(algorithm("eedqn").unwrap(), "breakout");
    let mut files = Vec::new();
    for rep in 0..2 {
        let log = run_training(&cfg, 3, 10_000).map_err(|e| e.to_string())?;
        let series = metrics::epoch_aggregate(&log.episodes, &log.epoch_max_abs_q, log.total_steps);
        let rows = metrics::epoch_rows("breakout", "eedqn", 3, &series, 100.0);
        let path = dir.join(format!("epochs-{rep}.csv"));
        metrics::write_epochs_csv(&path, &rows).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(files[0] == files[1], || "epochs.csv differs between reruns".into())?;
    Ok(format!("breakout/eedqn seed 3, 10k steps: {} identical bytes", files[0].len()))
}

// -------------------------------------------------------------- breakout

const BREAKOUT_SEEDS: [u64; 3] = [0, 1, 2];
const LONG_STEPS: u64 = 500_000;
const SHORT_STEPS: u64 = 200_000;
const BREAKOUT_BOUND: f64 = 100.0;

struct BreakoutRuns {
    eedqn: Vec<RunLog>,
    dqn: Vec<RunLog>,
}

fn breakout_runs() -> BreakoutRuns {
    let mut out = BreakoutRuns {
        eedqn: Vec::new(),
        dqn: Vec::new(),
    };
    for algo in ["eedqn", "dqn"] {
        let cfg = RunConfig::new(algorithm(algo).unwrap(), "breakout");
        for seed in BREAKOUT_SEEDS {
            let start = Instant::now();
            let log = run_training(&cfg, seed, LONG_STEPS).expect("breakout run");
            println!(
                "  ran breakout/{algo}/{seed}: {} episodes in {:.0?}",
                log.episodes.len(),
                start.elapsed()
            );
            if algo == "eedqn" {
                out.eedqn.push(log);
            } else {
                out.dqn.push(log);
            }
        }
    }
    out
}

// Runs do not depend on their length beyond epoch bookkeeping, so the first
// 200k steps of a 500k run are a 200k run. Windows are 5k steps here.
fn peak_ratio_first(log: &RunLog, steps: u64) -> f64 {
    let windows = (steps * EPOCHS as u64 / log.total_steps) as usize;
    metrics::peak_q_ratio(&log.epoch_max_abs_q[..windows], BREAKOUT_BOUND)
}

fn overestimation(runs: &BreakoutRuns) -> Outcome {
    let e: Vec<f64> = runs.eedqn.iter().map(|l| peak_ratio_first(l, SHORT_STEPS)).collect();
    let d: Vec<f64> = runs.dqn.iter().map(|l| peak_ratio_first(l, SHORT_STEPS)).collect();
    let detail = format!("EEDQN peaks {e:.3?}, DQN peaks {d:.3?}");
    ensure(e.iter().all(|&r| r <= 1.05), || format!("EEDQN exceeded 1.05: {detail}"))?;
    let wins = e.iter().zip(&d).filter(|(e, d)| d > e).count();
    ensure(wins >= 2, || format!("DQN above EEDQN in only {wins}/3 seeds: {detail}"))?;
    Ok(format!("{detail}, DQN higher in {wins}/3"))
}

fn final_return(runs: &BreakoutRuns) -> Outcome {
    let score = |logs: &[RunLog]| -> Vec<f64> { logs.iter().map(|l| final_score(&l.episodes).unwrap()).collect() };
    let (e, d) = (score(&runs.eedqn), score(&runs.dqn));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let p = permutation_test_exhaustive(&e, &d).unwrap();
    let detail = format!(
        "EEDQN {e:.2?} (mean {:.2}), DQN {d:.2?} (mean {:.2}), permutation p = {p:.3}",
        mean(&e),
        mean(&d)
    );
    ensure(mean(&e) >= mean(&d), || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------------ driver

fn run(name: &str, f: impl FnOnce() -> Outcome, failures: &mut Vec<String>) {
    let start = Instant::now();
    let r = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match r {
        Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
        Err(detail) => {
            println!("FAIL {name} ({secs:.1}s): {detail}");
            failures.push(name.to_string());
        }
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()));
    let mut failures = Vec::new();

    let cheap: [(&str, fn() -> Outcome); 6] = [
        ("gradient_fidelity", gradient_fidelity),
        ("target_oracle", target_oracle),
        ("threshold_mechanics", threshold_mechanics),
        ("permutation_test", permutation_agreement),
        ("chain_convergence", chain_convergence),
        ("determinism", determinism),
    ];
    for (name, f) in cheap {
        if wanted(name) {
            run(name, f, &mut failures);
        }
    }
    if wanted("breakout_overestimation") || wanted("breakout_final_return") {
        let start = Instant::now();
        let runs = breakout_runs();
        println!("  breakout runs finished in {:.0?}", start.elapsed());
        if wanted("breakout_overestimation") {
            run("breakout_overestimation", || overestimation(&runs), &mut failures);
        }
        if wanted("breakout_final_return") {
            run("breakout_final_return", || final_return(&runs), &mut failures);
        }
    }

    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", failures.len(), failures.join(", "));
        std::process::exit(1);
    }
}
