//! Training loop, metrics, greedy evaluation and the two experiment sweeps.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::agent::{greedy_action, Agent, ExplorationSchedule, LearnerParams, Transition};
use crate::channel::Spectrum;
use crate::env::{Clustering, Environment, RewardWeights, Scenario, TraceWriter};
use crate::error::{Error, Result};
use crate::nn::{NetMode, QNetwork, DEFAULT_HIDDEN};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub buffer_capacity: usize,
    pub learner: LearnerParams,
    pub schedule: ExplorationSchedule,
    pub weights: RewardWeights,
    pub scenario: Scenario,
    pub mode: NetMode,
    pub hidden: [usize; 2],
    pub seed: u64,
}

impl TrainConfig {
    /// Default schedule and learner settings around a scenario.
    pub fn new(scenario: Scenario, weights: RewardWeights) -> Self {
        TrainConfig {
            episodes: 1000,
            steps_per_episode: 300,
            buffer_capacity: 15_000,
            learner: LearnerParams::default(),
            schedule: ExplorationSchedule::default(),
            weights,
            scenario,
            mode: NetMode::Dueling,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }

    /// Sub-6 layout with LoS links and the matching reward weights.
    pub fn sub6_los() -> Self {
        let scenario = Scenario {
            link_mode: crate::channel::LinkMode::AlwaysLoS,
            ..Scenario::default_for(Spectrum::Sub6)
        };
        Self::new(scenario, RewardWeights::sub6_los())
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(Error::invalid("train", "episodes and steps_per_episode must be >= 1"));
        }
        if self.buffer_capacity < self.learner.batch_size {
            return Err(Error::invalid("buffer_capacity", "must be >= batch_size"));
        }
        self.learner.validate()?;
        self.schedule.validate()?;
        self.weights.validate()?;
        self.scenario.validate()
    }
}

/// Per-episode averages over its steps. Episodes are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_rate_bps: f64,
    pub mean_jain: f64,
    pub mean_reward: f64,
    /// Fraction of steps where every user met the minimum rate.
    pub satisfaction: f64,
    pub final_uav: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: QNetwork,
    pub records: Vec<EpisodeRecord>,
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(cfg, None, |_| {})
}

/// Runs the full training loop, optionally streaming a per-step trace and
/// reporting each finished episode.
pub fn train_with(
    cfg: &TrainConfig,
    mut trace: Option<&mut TraceWriter>,
    mut on_episode: impl FnMut(&EpisodeRecord),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut env = Environment::new(cfg.scenario.clone(), cfg.weights)?;
    let mut env_rng = rng::stream(cfg.seed, Stream::Env);
    let mut explore_rng = rng::stream(cfg.seed, Stream::Exploration);
    let mut sample_rng = rng::stream(cfg.seed, Stream::Sampling);
    let policy = QNetwork::init(
        env.state_len(),
        cfg.hidden,
        env.action_spec().count,
        cfg.mode,
        &mut rng::stream(cfg.seed, Stream::Init),
    )?;
    let mut agent = Agent::new(policy, cfg.buffer_capacity, cfg.schedule, cfg.learner)?;
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut global: u64 = 0;
    let t = cfg.steps_per_episode as f64;
    for _ in 0..cfg.episodes {
        let mut state = env.reset(&mut env_rng)?;
        let (mut rate, mut jain, mut reward, mut ok) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..cfg.steps_per_episode {
            let action = agent.act(state.as_slice(), global, &mut explore_rng)?;
            let out = env.step(action, &mut env_rng)?;
            if let Some(tw) = trace.as_deref_mut() {
                tw.record(env.snapshot(), out.reward)
                    .map_err(|e| Error::io("trace", e))?;
            }
            agent.buffer.push(Transition {
                state: state.0,
                action,
                reward: out.reward,
                next_state: out.state.0.clone(),
            })?;
            if agent.buffer.len() > agent.learner.batch_size {
                agent.train_step(&mut sample_rng)?;
            }
            agent.maybe_sync_target(global);
            rate += out.info.sum_rate;
            jain += out.info.jain;
            reward += out.reward;
            ok += usize::from(out.info.all_satisfied());
            state = out.state;
            global += 1;
        }
        let rec = EpisodeRecord {
            episode: env.snapshot().episode_index,
            mean_rate_bps: rate / t,
            mean_jain: jain / t,
            mean_reward: reward / t,
            satisfaction: ok as f64 / t,
            final_uav: env.snapshot().uav,
        };
        on_episode(&rec);
        records.push(rec);
    }
    Ok(TrainOutput {
        policy: agent.policy,
        records,
    })
}

/// Moving averages `(R_e_tot, J_e_f)` aligned with `records`: zero while
/// fewer than `window` episodes have finished, then the mean over the most
/// recent `window` episodes including the current one.
pub fn moving_metrics(records: &[EpisodeRecord], window: usize) -> Vec<(f64, f64)> {
    let window = window.max(1);
    let n = window as f64;
    (0..records.len())
        .map(|i| {
            if i + 1 < window {
                return (0.0, 0.0);
            }
            let tail = &records[i + 1 - window..=i];
            (
                tail.iter().map(|r| r.mean_rate_bps).sum::<f64>() / n,
                tail.iter().map(|r| r.mean_jain).sum::<f64>() / n,
            )
        })
        .collect()
}

/// Converged metrics: the last entry of [`moving_metrics`].
pub fn final_metrics(records: &[EpisodeRecord], window: usize) -> (f64, f64) {
    moving_metrics(records, window).last().copied().unwrap_or((0.0, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub steps: usize,
    pub avg_sum_rate: f64,
    pub avg_jain: f64,
    pub satisfaction: f64,
    pub avg_reward: f64,
}

fn check_dims(net: &QNetwork, env: &Environment) -> Result<()> {
    if net.input_dim() != env.state_len() {
        return Err(Error::ShapeMismatch {
            context: "checkpoint input dim",
            expected: env.state_len(),
            actual: net.input_dim(),
        });
    }
    if net.n_actions() != env.action_spec().count {
        return Err(Error::ShapeMismatch {
            context: "checkpoint action count",
            expected: env.action_spec().count,
            actual: net.n_actions(),
        });
    }
    Ok(())
}

/// Greedy rollout of `steps` steps from reset with frozen parameters.
pub fn evaluate(
    net: &QNetwork,
    scenario: &Scenario,
    weights: &RewardWeights,
    steps: usize,
    seed: u64,
) -> Result<EvalMetrics> {
    evaluate_with(net, scenario, weights, steps, seed, None)
}

pub fn evaluate_with(
    net: &QNetwork,
    scenario: &Scenario,
    weights: &RewardWeights,
    steps: usize,
    seed: u64,
    mut trace: Option<&mut TraceWriter>,
) -> Result<EvalMetrics> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be >= 1"));
    }
    let mut env = Environment::new(scenario.clone(), *weights)?;
    check_dims(net, &env)?;
    let mut env_rng = rng::stream(seed, Stream::Eval);
    let mut state = env.reset(&mut env_rng)?;
    let (mut rate, mut jain, mut reward, mut ok) = (0.0, 0.0, 0.0, 0usize);
    for _ in 0..steps {
        let action = greedy_action(net, state.as_slice())?;
        let out = env.step(action, &mut env_rng)?;
        if let Some(tw) = trace.as_deref_mut() {
            tw.record(env.snapshot(), out.reward).map_err(|e| Error::io("trace", e))?;
        }
        rate += out.info.sum_rate;
        jain += out.info.jain;
        reward += out.reward;
        ok += usize::from(out.info.all_satisfied());
        state = out.state;
    }
    let n = steps as f64;
    Ok(EvalMetrics {
        steps,
        avg_sum_rate: rate / n,
        avg_jain: jain / n,
        satisfaction: ok as f64 / n,
        avg_reward: reward / n,
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub rmin_over_w: f64,
    pub r_min_bps: f64,
    pub r_e_tot: f64,
    pub j_e_f: f64,
    /// Fraction of the last episode's steps where every user met `r_min`.
    pub satisfaction: f64,
    pub final_mean_rate_bps: f64,
}

/// Trains one fresh agent per minimum spectral efficiency.
pub fn rmin_sweep(base: &TrainConfig, rmin_over_w: &[f64], window: usize, jobs: usize) -> Result<Vec<SweepPoint>> {
    if rmin_over_w.is_empty() {
        return Err(Error::invalid("rmin_over_w", "need at least one point"));
    }
    let w = base.scenario.channel.bandwidth_hz;
    let run = |se: f64| -> Result<SweepPoint> {
        let mut cfg = base.clone();
        cfg.scenario.r_min = se * w;
        let out = train(&cfg)?;
        let (r_e_tot, j_e_f) = final_metrics(&out.records, window);
        let last = out.records.last().expect("episodes >= 1");
        Ok(SweepPoint {
            rmin_over_w: se,
            r_min_bps: cfg.scenario.r_min,
            r_e_tot,
            j_e_f,
            satisfaction: last.satisfaction,
            final_mean_rate_bps: last.mean_rate_bps,
        })
    };
    pool(jobs)?.install(|| rmin_over_w.par_iter().map(|se| run(*se)).collect())
}

/// Independent, identically configured training runs over several seeds.
pub fn train_seeds(base: &TrainConfig, seeds: &[u64], jobs: usize) -> Result<Vec<TrainOutput>> {
    pool(jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|s| {
                let mut cfg = base.clone();
                cfg.seed = *s;
                train(&cfg)
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutResult {
    pub layout: usize,
    pub users: Vec<[f64; 2]>,
    pub rate_a: f64,
    pub rate_b: f64,
    /// `100 * rate_a / rate_b`.
    pub ratio_pct: f64,
}

impl LayoutResult {
    pub fn a_wins(&self) -> bool {
        self.rate_a > self.rate_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Summary {
            min: v[0],
            median,
            mean: v.iter().sum::<f64>() / n as f64,
            max: v[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutSweep {
    pub layouts: Vec<LayoutResult>,
    pub win_fraction: f64,
    /// Distribution of `ratio_pct - 100`.
    pub improvement_pct: Summary,
}

/// Uniform user layouts over the scenario's area.
pub fn draw_layouts(scenario: &Scenario, n_layouts: usize, seed: u64) -> Vec<Vec<[f64; 2]>> {
    let mut rng = rng::stream(seed, Stream::Layouts);
    let half = scenario.half_side();
    (0..n_layouts)
        .map(|_| {
            (0..scenario.n_users())
                .map(|_| [rng.random_range(-half..=half), rng.random_range(-half..=half)])
                .collect()
        })
        .collect()
}

/// Paired greedy comparison of two networks over shared random layouts.
/// Random layouts are clustered best-with-worst.
#[allow(clippy::too_many_arguments)]
pub fn layout_sweep(
    a: &QNetwork,
    b: &QNetwork,
    scenario: &Scenario,
    weights: &RewardWeights,
    n_layouts: usize,
    steps: usize,
    seed: u64,
    jobs: usize,
) -> Result<LayoutSweep> {
    if n_layouts == 0 {
        return Err(Error::invalid("n_layouts", "must be >= 1"));
    }
    let layouts = draw_layouts(scenario, n_layouts, seed);
    let run = |i: usize, users: &Vec<[f64; 2]>| -> Result<LayoutResult> {
        let sc = Scenario {
            users: users.clone(),
            clustering: Clustering::BestWorst,
            ..scenario.clone()
        };
        let eval_seed = seed.wrapping_add(i as u64);
        let ra = evaluate(a, &sc, weights, steps, eval_seed)?.avg_sum_rate;
        let rb = evaluate(b, &sc, weights, steps, eval_seed)?.avg_sum_rate;
        let ratio_pct = if rb > 0.0 {
            100.0 * ra / rb
        } else if ra > 0.0 {
            f64::INFINITY
        } else {
            100.0
        };
        Ok(LayoutResult {
            layout: i,
            users: users.clone(),
            rate_a: ra,
            rate_b: rb,
            ratio_pct,
        })
    };
    let results: Vec<LayoutResult> = pool(jobs)?.install(|| {
        layouts
            .par_iter()
            .enumerate()
            .map(|(i, u)| run(i, u))
            .collect::<Result<Vec<_>>>()
    })?;
    let wins = results.iter().filter(|r| r.a_wins()).count();
    let improvements: Vec<f64> = results.iter().map(|r| r.ratio_pct - 100.0).collect();
    Ok(LayoutSweep {
        win_fraction: wins as f64 / results.len() as f64,
        improvement_pct: Summary::of(&improvements).expect("n_layouts >= 1"),
        layouts: results,
    })
}

pub const EPISODES_HEADER: [&str; 6] = ["episode", "mean_rate_bps", "mean_jain", "mean_reward", "R_e_tot", "J_e_f"];
pub const EVAL_HEADER: [&str; 5] = ["steps", "avg_sum_rate_bps", "avg_jain", "satisfaction", "avg_reward"];
pub const SWEEP_HEADER: [&str; 6] = [
    "rmin_over_w",
    "r_min_bps",
    "R_e_tot",
    "J_e_f",
    "satisfaction",
    "final_mean_rate_bps",
];

pub(crate) fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn owned(h: &[&str]) -> Vec<String> {
    h.iter().map(|s| s.to_string()).collect()
}

pub fn write_episodes_csv(path: &Path, records: &[EpisodeRecord], window: usize) -> Result<()> {
    let mm = moving_metrics(records, window);
    write_rows(
        path,
        &owned(&EPISODES_HEADER),
        records.iter().zip(mm).map(|(r, (re, je))| {
            vec![
                r.episode.to_string(),
                r.mean_rate_bps.to_string(),
                r.mean_jain.to_string(),
                r.mean_reward.to_string(),
                re.to_string(),
                je.to_string(),
            ]
        }),
    )
}

pub fn write_eval_csv(path: &Path, m: &EvalMetrics) -> Result<()> {
    write_rows(
        path,
        &owned(&EVAL_HEADER),
        [vec![
            m.steps.to_string(),
            m.avg_sum_rate.to_string(),
            m.avg_jain.to_string(),
            m.satisfaction.to_string(),
            m.avg_reward.to_string(),
        ]],
    )
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    write_rows(
        path,
        &owned(&SWEEP_HEADER),
        points.iter().map(|p| {
            vec![
                p.rmin_over_w.to_string(),
                p.r_min_bps.to_string(),
                p.r_e_tot.to_string(),
                p.j_e_f.to_string(),
                p.satisfaction.to_string(),
                p.final_mean_rate_bps.to_string(),
            ]
        }),
    )
}

pub fn layouts_header(n_users: usize) -> Vec<String> {
    let mut h = owned(&["layout", "rate_a_bps", "rate_b_bps", "ratio_pct", "a_wins"]);
    for u in 0..n_users {
        h.push(format!("u{u}_x"));
        h.push(format!("u{u}_y"));
    }
    h
}

pub fn write_layouts_csv(path: &Path, sweep: &LayoutSweep) -> Result<()> {
    let n_users = sweep.layouts.first().map_or(0, |l| l.users.len());
    write_rows(
        path,
        &layouts_header(n_users),
        sweep.layouts.iter().map(|l| {
            let mut row = vec![
                l.layout.to_string(),
                l.rate_a.to_string(),
                l.rate_b.to_string(),
                l.ratio_pct.to_string(),
                u8::from(l.a_wins()).to_string(),
            ];
            for u in &l.users {
                row.push(u[0].to_string());
                row.push(u[1].to_string());
            }
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkMode;
    use proptest::prelude::*;

    fn rec(episode: usize, rate: f64, jain: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            mean_rate_bps: rate,
            mean_jain: jain,
            mean_reward: 0.0,
            satisfaction: 1.0,
            final_uav: [0.0; 3],
        }
    }

    fn tiny(episodes: usize, steps: usize) -> TrainConfig {
        let mut cfg = TrainConfig::sub6_los();
        cfg.episodes = episodes;
        cfg.steps_per_episode = steps;
        cfg.hidden = [16, 16];
        cfg
    }

    #[test]
    fn moving_metric_examples() {
        let constant: Vec<EpisodeRecord> = (1..=200).map(|e| rec(e, 7.0, 0.5)).collect();
        let mm = moving_metrics(&constant, 100);
        assert_eq!(mm[98], (0.0, 0.0));
        assert!(mm[99..].iter().all(|m| *m == (7.0, 0.5)));

        let ramp: Vec<EpisodeRecord> = (1..=200).map(|e| rec(e, e as f64, 0.0)).collect();
        let mm = moving_metrics(&ramp, 100);
        // Episode 150 is at index 149.
        assert_eq!(mm[149].0, 100.5);
        assert_eq!(final_metrics(&ramp, 100).0, 150.5);
    }

    proptest! {
        #[test]
        fn moving_metrics_match_brute_force(v in prop::collection::vec(0.0f64..1e9, 1..60), w in 1usize..20) {
            let recs: Vec<EpisodeRecord> = v.iter().enumerate().map(|(i, x)| rec(i + 1, *x, x / 1e9)).collect();
            let mm = moving_metrics(&recs, w);
            for (i, (r, j)) in mm.iter().enumerate() {
                if i + 1 < w {
                    prop_assert_eq!((*r, *j), (0.0, 0.0));
                } else {
                    let want: f64 = v[i + 1 - w..=i].iter().sum::<f64>() / w as f64;
                    prop_assert!((r - want).abs() <= 1e-9 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn one_step_run_stores_without_training() {
        let cfg = tiny(1, 1);
        let out = train(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].episode, 1);
        let init = QNetwork::init(17, [16, 16], 32, NetMode::Dueling, &mut rng::stream(0, Stream::Init)).unwrap();
        assert_eq!(out.policy, init);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny(3, 60);
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.policy.checksum(), b.policy.checksum());
        assert_eq!(a.records.len(), 3);
    }

    #[test]
    fn evaluate_is_pure_and_checks_dims() {
        let sc = TrainConfig::sub6_los().scenario;
        let w = RewardWeights::sub6_los();
        let zero = QNetwork::zeros(17, [8, 8], 32, NetMode::Dueling).unwrap();
        let sum = zero.checksum();
        let m1 = evaluate(&zero, &sc, &w, 50, 3).unwrap();
        let m2 = evaluate(&zero, &sc, &w, 50, 3).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(zero.checksum(), sum);
        let wrong = QNetwork::zeros(9, [8, 8], 32, NetMode::Dueling).unwrap();
        let err = evaluate(&wrong, &sc, &w, 10, 0).unwrap_err().to_string();
        assert!(err.contains("expected 17") && err.contains("got 9"), "{err}");
    }

    #[test]
    fn sweep_at_zero_is_fully_satisfied() {
        let mut cfg = tiny(1, 20);
        cfg.scenario = Scenario {
            link_mode: LinkMode::Expected,
            ..Scenario::default_for(Spectrum::MmWave)
        };
        cfg.weights = RewardWeights::mmwave_min_rate();
        let pts = rmin_sweep(&cfg, &[0.0, 1.0], 100, 1).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].satisfaction, 1.0);
        assert_eq!(pts[1].r_min_bps, 2e9);
    }

    #[test]
    fn layout_sweep_self_comparison_is_all_ties() {
        let sc = Scenario::default_for(Spectrum::MmWave);
        let net = QNetwork::init(17, [8, 8], 32, NetMode::Dueling, &mut rng::stream(1, Stream::Init)).unwrap();
        let s = layout_sweep(&net, &net, &sc, &RewardWeights::mmwave_rate(), 5, 20, 9, 1).unwrap();
        assert_eq!(s.win_fraction, 0.0);
        assert!(s.layouts.iter().all(|l| l.ratio_pct == 100.0));
        let again = layout_sweep(&net, &net, &sc, &RewardWeights::mmwave_rate(), 5, 20, 9, 1).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.median, s.mean, s.max), (1.0, 2.5, 2.5, 4.0));
        assert!(Summary::of(&[]).is_none());
    }
}
