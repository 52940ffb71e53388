//! The UAV/NOMA decision environment: layout and clustering, mobility,
//! observation building, action decoding and reward shaping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, LinkKind, LinkMode, Spectrum};
use crate::error::{Error, Result};
use crate::noma::{self, ClusterAllocation, UserRates, DEFAULT_ALPHA_BOUNDS};

/// Rule used to pair users into two-user NOMA clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Clustering {
    /// Rank by gain at the initial UAV position and pair best with worst.
    #[default]
    BestWorst,
    /// Users `(0, 1)`, `(2, 3)`, ... in listed order; the higher-gain member
    /// of each pair is the strong user.
    Listed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area_side: f64,
    /// User coordinates relative to the area centre (m).
    pub users: Vec<[f64; 2]>,
    pub h_min: f64,
    pub h_max: f64,
    pub h_init: f64,
    pub alpha_init: f64,
    /// Per-axis UAV step magnitudes (x, y, h) in m.
    pub step: [f64; 3],
    pub alpha_step: f64,
    pub alpha_bounds: (f64, f64),
    pub channel: ChannelParams,
    pub link_mode: LinkMode,
    /// Minimum per-user rate, bits/s.
    pub r_min: f64,
    pub clustering: Clustering,
    /// dB range used to normalize the gain feature; derived from the
    /// geometry when `None`.
    pub gain_db_bounds: Option<(f64, f64)>,
}

impl Scenario {
    /// The four-user 100 m x 100 m training layout.
    pub fn default_for(spectrum: Spectrum) -> Self {
        Scenario {
            area_side: 100.0,
            users: vec![[4.0, 15.0], [-44.0, -49.0], [-5.0, 21.0], [47.0, 49.0]],
            h_min: 10.0,
            h_max: 300.0,
            h_init: 50.0,
            alpha_init: 0.5,
            step: [1.0, 1.0, 1.0],
            alpha_step: 0.01,
            alpha_bounds: DEFAULT_ALPHA_BOUNDS,
            channel: ChannelParams::default_for(spectrum),
            link_mode: LinkMode::Expected,
            r_min: 0.0,
            clustering: Clustering::Listed,
            gain_db_bounds: None,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.users.len() / 2
    }

    pub fn half_side(&self) -> f64 {
        self.area_side / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let n = self.users.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid("users", format!("need an even count >= 2, got {n}")));
        }
        if !(self.area_side > 0.0) {
            return Err(Error::invalid("area_side", "must be > 0"));
        }
        let half = self.half_side();
        if let Some(u) = self
            .users
            .iter()
            .find(|u| u[0].abs() > half || u[1].abs() > half || !u[0].is_finite() || !u[1].is_finite())
        {
            return Err(Error::invalid("users", format!("{u:?} lies outside the area")));
        }
        if !(self.h_min > 0.0 && self.h_init >= self.h_min && self.h_max >= self.h_init) {
            return Err(Error::invalid(
                "heights",
                format!(
                    "need h_max >= h_init >= h_min > 0, got ({}, {}, {})",
                    self.h_max, self.h_init, self.h_min
                ),
            ));
        }
        if self.step.iter().any(|s| !(*s > 0.0)) || !(self.alpha_step > 0.0) {
            return Err(Error::invalid("step", "step magnitudes must be > 0"));
        }
        ClusterAllocation::new(self.alpha_init, self.alpha_bounds)?;
        if !(self.r_min >= 0.0) {
            return Err(Error::invalid("r_min", "must be >= 0"));
        }
        if let Some((lo, hi)) = self.gain_db_bounds {
            if !(hi > lo) {
                return Err(Error::invalid("gain_db_bounds", "need max > min"));
            }
        }
        Ok(())
    }

    /// Gain-feature bounds in dB: the LoS gain at the lowest altitude and the
    /// NLoS gain across the area diagonal at the highest altitude.
    pub fn resolved_gain_db_bounds(&self) -> Result<(f64, f64)> {
        if let Some(b) = self.gain_db_bounds {
            return Ok(b);
        }
        let far = (2.0 * self.area_side * self.area_side + self.h_max * self.h_max).sqrt();
        let lo = channel::path_gain(&self.channel, LinkKind::NLoS, far)?;
        let hi = channel::path_gain(&self.channel, LinkKind::LoS, self.h_min)?;
        Ok((10.0 * lo.log10(), 10.0 * hi.log10()))
    }

    pub fn initial_uav(&self) -> [f64; 3] {
        [0.0, 0.0, self.h_init]
    }
}

/// A two-user cluster, by user index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub strong: usize,
    pub weak: usize,
}

/// Pairs users into clusters using LoS gains at the initial UAV position.
pub fn cluster_users(scenario: &Scenario) -> Result<Vec<Cluster>> {
    let n = scenario.users.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid("users", format!("need an even count >= 2, got {n}")));
    }
    let uav = scenario.initial_uav();
    let gains = scenario
        .users
        .iter()
        .map(|u| channel::path_gain(&scenario.channel, LinkKind::LoS, channel::distance(uav, *u)))
        .collect::<Result<Vec<_>>>()?;
    let order = |a: usize, b: usize| (a, b);
    let ranked = |a: usize, b: usize| {
        if gains[b] > gains[a] {
            Cluster { strong: b, weak: a }
        } else {
            let (s, w) = order(a, b);
            Cluster { strong: s, weak: w }
        }
    };
    Ok(match scenario.clustering {
        Clustering::Listed => (0..n / 2).map(|c| ranked(2 * c, 2 * c + 1)).collect(),
        Clustering::BestWorst => {
            let mut idx: Vec<usize> = (0..n).collect();
            // Descending gain; ties keep index order.
            idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
            (0..n / 2)
                .map(|c| Cluster {
                    strong: idx[c],
                    weak: idx[n - 1 - c],
                })
                .collect()
        }
    })
}

/// The discrete joint action set: one sign per UAV axis and per cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpec {
    pub dim: usize,
    pub count: usize,
}

impl ActionSpec {
    pub fn for_clusters(n_clusters: usize) -> Self {
        let dim = 3 + n_clusters;
        ActionSpec { dim, count: 1 << dim }
    }

    /// Bit `j` of `index` (LSB first) set means `+1` for component `j`;
    /// components are ordered `(x, y, h, cluster 0, cluster 1, ...)`.
    pub fn decode(&self, index: usize) -> Result<Vec<i8>> {
        if index >= self.count {
            return Err(Error::ActionOutOfRange {
                index,
                count: self.count,
            });
        }
        Ok((0..self.dim)
            .map(|j| if index >> j & 1 == 1 { 1 } else { -1 })
            .collect())
    }

    pub fn encode(&self, signs: &[i8]) -> Result<usize> {
        if signs.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "action signs",
                expected: self.dim,
                actual: signs.len(),
            });
        }
        Ok(signs
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > 0)
            .fold(0, |acc, (j, _)| acc | 1 << j))
    }
}

/// Reward term weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    #[serde(default)]
    pub w_r: f64,
    #[serde(default)]
    pub w_f: f64,
    #[serde(default)]
    pub w_g: f64,
    #[serde(default)]
    pub w_s: f64,
    #[serde(default)]
    pub w_u: f64,
}

impl RewardWeights {
    /// Sub-6 with LoS links: sum rate plus total gain.
    pub fn sub6_los() -> Self {
        RewardWeights {
            w_r: 1.0,
            w_g: 1e7,
            ..Default::default()
        }
    }

    /// Sub-6 with mixed LoS/NLoS links adds the fairness term.
    pub fn sub6_generic() -> Self {
        RewardWeights {
            w_f: 5.0,
            ..Self::sub6_los()
        }
    }

    /// mmWave with a minimum-rate requirement.
    pub fn mmwave_min_rate() -> Self {
        RewardWeights {
            w_r: 10.0,
            w_s: 100.0,
            w_u: 10.0,
            ..Default::default()
        }
    }

    /// mmWave sum rate only.
    pub fn mmwave_rate() -> Self {
        RewardWeights {
            w_r: 10.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_r, self.w_f, self.w_g, self.w_s, self.w_u];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("reward weights", format!("must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }
}

/// Shaped per-step reward.
///
/// Rate term (gated on every user meeting `r_min`), fairness term (only
/// without a rate floor), total-gain term, and per-user satisfied and
/// unsatisfied terms. Rates enter in bits/s/Hz.
pub fn compute_reward(rates: &UserRates, gains: &[f64], weights: &RewardWeights, r_min: f64, w_bw: f64) -> f64 {
    let r = rates.as_slice();
    let all_ok = r.iter().all(|x| *x >= r_min);
    let rate = if all_ok { noma::sum_rate(rates) / w_bw } else { 0.0 };
    let fairness = if r_min == 0.0 { noma::jain_fairness(rates) } else { 0.0 };
    let g_tot: f64 = gains.iter().sum();
    let satisfied = r.iter().filter(|x| **x >= r_min).count() as f64;
    let unsatisfied: f64 = r.iter().filter(|x| **x < r_min).map(|x| x / w_bw).sum();
    weights.w_r * rate + weights.w_f * fairness + weights.w_g * g_tot + weights.w_s * satisfied + weights.w_u * unsatisfied
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub uav: [f64; 3],
    pub alphas: Vec<ClusterAllocation>,
    pub link_kinds: Vec<LinkKind>,
    /// Per-user single-antenna-pair gains (linear).
    pub gains: Vec<f64>,
    pub rates: UserRates,
    pub step_index: usize,
    pub episode_index: usize,
}

/// Observation: per user `(dx, dy, alpha, gain feature)` in cluster order
/// (strong then weak), then the normalized height.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Link gains, realized kinds and rates for a given placement.
#[derive(Debug, Clone)]
pub struct LinkEval {
    pub gains: Vec<f64>,
    pub kinds: Vec<LinkKind>,
    pub rates: UserRates,
}

/// Evaluates every user's link and NOMA rate for a UAV placement and power
/// split. `cached` supplies per-episode link kinds.
pub fn evaluate_links<R: Rng + ?Sized>(
    scenario: &Scenario,
    clusters: &[Cluster],
    uav: [f64; 3],
    alphas: &[ClusterAllocation],
    cached: Option<&[LinkKind]>,
    rng: &mut R,
) -> Result<LinkEval> {
    let ch = &scenario.channel;
    let n = scenario.users.len();
    let mut gains = vec![0.0; n];
    let mut kinds = vec![LinkKind::LoS; n];
    for (u, pos) in scenario.users.iter().enumerate() {
        let theta = channel::elevation_angle(uav, *pos)?;
        let d = channel::distance(uav, *pos);
        let (g, k) = channel::effective_gain(ch, scenario.link_mode, theta, d, rng, cached.map(|c| c[u]))?;
        gains[u] = g;
        kinds[u] = k;
    }
    let g_mimo = ch.mimo_gain();
    let mut rates = vec![0.0; n];
    for (c, alloc) in clusters.iter().zip(alphas) {
        let a = alloc.strong_alpha();
        let strong = noma::received_sinr(ch.tx_power_w, gains[c.strong], g_mimo, a, 0.0, ch.noise_w)?;
        let weak = noma::received_sinr(ch.tx_power_w, gains[c.weak], g_mimo, alloc.weak_alpha(), a, ch.noise_w)?;
        rates[c.strong] = noma::user_rate(ch.bandwidth_hz, strong)?;
        rates[c.weak] = noma::user_rate(ch.bandwidth_hz, weak)?;
    }
    Ok(LinkEval {
        gains,
        kinds,
        rates: UserRates::new(rates)?,
    })
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub rates: Vec<f64>,
    pub gains: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub sum_rate: f64,
    pub jain: f64,
}

impl StepInfo {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|s| *s)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: StateVector,
    pub reward: f64,
    pub info: StepInfo,
}

/// Single-owner environment instance.
#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Scenario,
    weights: RewardWeights,
    clusters: Vec<Cluster>,
    actions: ActionSpec,
    gain_db_bounds: (f64, f64),
    episode_kinds: Option<Vec<LinkKind>>,
    snapshot: NetworkSnapshot,
    episodes_started: usize,
}

impl Environment {
    pub fn new(scenario: Scenario, weights: RewardWeights) -> Result<Self> {
        scenario.validate()?;
        weights.validate()?;
        let clusters = cluster_users(&scenario)?;
        let actions = ActionSpec::for_clusters(clusters.len());
        let gain_db_bounds = scenario.resolved_gain_db_bounds()?;
        let n = scenario.n_users();
        let snapshot = NetworkSnapshot {
            uav: scenario.initial_uav(),
            alphas: vec![ClusterAllocation::new(scenario.alpha_init, scenario.alpha_bounds)?; clusters.len()],
            link_kinds: vec![LinkKind::LoS; n],
            gains: vec![0.0; n],
            rates: UserRates::new(vec![0.0; n])?,
            step_index: 0,
            episode_index: 0,
        };
        Ok(Environment {
            scenario,
            weights,
            clusters,
            actions,
            gain_db_bounds,
            episode_kinds: None,
            snapshot,
            episodes_started: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn action_spec(&self) -> ActionSpec {
        self.actions
    }

    pub fn state_len(&self) -> usize {
        4 * self.scenario.n_users() + 1
    }

    pub fn snapshot(&self) -> &NetworkSnapshot {
        &self.snapshot
    }

    /// Returns the UAV and power split to their initial values and draws
    /// per-episode link states where the mode asks for them.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StateVector> {
        let uav = self.scenario.initial_uav();
        let alphas = vec![ClusterAllocation::new(self.scenario.alpha_init, self.scenario.alpha_bounds)?; self.clusters.len()];
        self.episode_kinds = None;
        let links = evaluate_links(&self.scenario, &self.clusters, uav, &alphas, None, rng)?;
        if self.scenario.link_mode == LinkMode::BernoulliPerEpisode {
            self.episode_kinds = Some(links.kinds.clone());
        }
        self.episodes_started += 1;
        self.snapshot = NetworkSnapshot {
            uav,
            alphas,
            link_kinds: links.kinds,
            gains: links.gains,
            rates: links.rates,
            step_index: 0,
            episode_index: self.episodes_started,
        };
        self.build_state()
    }

    /// Applies one joint action. Moves that would leave the feasible box or
    /// power range are clamped to its boundary.
    pub fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<StepOutcome> {
        let signs = self.actions.decode(action)?;
        let sc = &self.scenario;
        let half = sc.half_side();
        let snap = &self.snapshot;
        let uav = [
            (snap.uav[0] + f64::from(signs[0]) * sc.step[0]).clamp(-half, half),
            (snap.uav[1] + f64::from(signs[1]) * sc.step[1]).clamp(-half, half),
            (snap.uav[2] + f64::from(signs[2]) * sc.step[2]).clamp(sc.h_min, sc.h_max),
        ];
        let alphas: Vec<ClusterAllocation> = snap
            .alphas
            .iter()
            .zip(&signs[3..])
            .map(|(a, s)| {
                let moved = a.strong_alpha() + f64::from(*s) * sc.alpha_step;
                // Snap to the step lattice so repeated +/- moves do not drift.
                let snapped = (moved / sc.alpha_step).round() * sc.alpha_step;
                ClusterAllocation::clamped(snapped, sc.alpha_bounds)
            })
            .collect();
        let links = evaluate_links(sc, &self.clusters, uav, &alphas, self.episode_kinds.as_deref(), rng)?;
        let reward = compute_reward(&links.rates, &links.gains, &self.weights, sc.r_min, sc.channel.bandwidth_hz);
        let info = StepInfo {
            satisfied: links.rates.as_slice().iter().map(|r| *r >= sc.r_min).collect(),
            sum_rate: noma::sum_rate(&links.rates),
            jain: noma::jain_fairness(&links.rates),
            rates: links.rates.as_slice().to_vec(),
            gains: links.gains.clone(),
        };
        self.snapshot = NetworkSnapshot {
            uav,
            alphas,
            link_kinds: links.kinds,
            gains: links.gains,
            rates: links.rates,
            step_index: self.snapshot.step_index + 1,
            episode_index: self.snapshot.episode_index,
        };
        Ok(StepOutcome {
            state: self.build_state()?,
            reward,
            info,
        })
    }

    /// Observation of the current snapshot.
    pub fn build_state(&self) -> Result<StateVector> {
        build_state(&self.snapshot, &self.scenario, &self.clusters, self.gain_db_bounds)
    }
}

/// Normalized observation of `snapshot`: offsets scaled by half the area
/// side, height by the initial height, gain as a clamped dB min-max score.
pub fn build_state(
    snapshot: &NetworkSnapshot,
    scenario: &Scenario,
    clusters: &[Cluster],
    gain_db_bounds: (f64, f64),
) -> Result<StateVector> {
    let half = scenario.half_side();
    let (db_lo, db_hi) = gain_db_bounds;
    let mut out = Vec::with_capacity(4 * scenario.n_users() + 1);
    for (c, alloc) in clusters.iter().zip(&snapshot.alphas) {
        for (user, alpha) in [(c.strong, alloc.strong_alpha()), (c.weak, alloc.weak_alpha())] {
            let g = snapshot.gains[user];
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::invalid("gain", format!("non-finite gain {g} for user {user}")));
            }
            let pos = scenario.users[user];
            let feature = if g == 0.0 {
                0.0
            } else {
                ((10.0 * g.log10() - db_lo) / (db_hi - db_lo)).clamp(0.0, 1.0)
            };
            out.extend_from_slice(&[
                (snapshot.uav[0] - pos[0]) / half,
                (snapshot.uav[1] - pos[1]) / half,
                alpha,
                feature,
            ]);
        }
    }
    out.push(snapshot.uav[2] / scenario.h_init);
    Ok(StateVector(out))
}

/// Streams per-step rows: episode, step, UAV position, strong-user power
/// share per cluster, per-user rate and reward.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path, n_clusters: usize, n_users: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = vec!["episode".to_string(), "step".into(), "x".into(), "y".into(), "h".into()];
        header.extend((0..n_clusters).map(|c| format!("alpha_c{c}")));
        header.extend((0..n_users).map(|u| format!("rate_u{u}")));
        header.push("reward".into());
        writeln!(out, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, snapshot: &NetworkSnapshot, reward: f64) -> std::io::Result<()> {
        write!(
            self.out,
            "{},{},{},{},{}",
            snapshot.episode_index, snapshot.step_index, snapshot.uav[0], snapshot.uav[1], snapshot.uav[2]
        )?;
        for a in &snapshot.alphas {
            write!(self.out, ",{}", a.strong_alpha())?;
        }
        for r in snapshot.rates.as_slice() {
            write!(self.out, ",{r}")?;
        }
        writeln!(self.out, ",{reward}")
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sub6_los() -> Scenario {
        Scenario {
            link_mode: LinkMode::AlwaysLoS,
            ..Scenario::default_for(Spectrum::Sub6)
        }
    }

    #[test]
    fn clustering_two_users_and_default_layout() {
        let mut sc = sub6_los();
        sc.users = vec![[40.0, 0.0], [3.0, 4.0]];
        sc.clustering = Clustering::BestWorst;
        assert_eq!(cluster_users(&sc).unwrap(), vec![Cluster { strong: 1, weak: 0 }]);

        let sc = sub6_los();
        let cl = cluster_users(&sc).unwrap();
        assert_eq!(cl[0], Cluster { strong: 0, weak: 1 });
        assert_eq!(cl[1], Cluster { strong: 2, weak: 3 });
    }

    #[test]
    fn best_worst_matches_brute_force_on_a_line() {
        // Oracle: the pairing that sorts by distance and folds the list.
        let mut sc = sub6_los();
        sc.clustering = Clustering::BestWorst;
        sc.users = vec![[3.0, 0.0], [1.0, 0.0], [4.0, 0.0], [2.0, 0.0]];
        let by_dist = {
            let mut idx: Vec<usize> = (0..4).collect();
            idx.sort_by(|a, b| sc.users[*a][0].total_cmp(&sc.users[*b][0]));
            vec![(idx[0], idx[3]), (idx[1], idx[2])]
        };
        let got: Vec<(usize, usize)> = cluster_users(&sc).unwrap().iter().map(|c| (c.strong, c.weak)).collect();
        assert_eq!(got, by_dist);
        assert_eq!(got, vec![(1, 2), (3, 0)]);
        sc.users.pop();
        assert!(cluster_users(&sc).is_err());
    }

    #[test]
    fn action_decoding() {
        let spec = ActionSpec::for_clusters(2);
        assert_eq!(spec.count, 32);
        assert_eq!(spec.decode(0).unwrap(), vec![-1; 5]);
        assert_eq!(spec.decode(31).unwrap(), vec![1; 5]);
        assert_eq!(spec.decode(5).unwrap(), vec![1, -1, 1, -1, -1]);
        assert!(spec.decode(32).is_err());
        for i in 0..spec.count {
            assert_eq!(spec.encode(&spec.decode(i).unwrap()).unwrap(), i);
        }
    }

    #[test]
    fn reset_is_initial_and_deterministic() {
        let mut env = Environment::new(Scenario::default_for(Spectrum::Sub6), RewardWeights::sub6_los()).unwrap();
        let s1 = env.reset(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(env.snapshot().uav, [0.0, 0.0, 50.0]);
        assert!(env.snapshot().alphas.iter().all(|a| a.strong_alpha() == 0.5));
        assert_eq!(s1.len(), 17);
        assert_eq!(s1.as_slice()[16], 1.0);
        let s2 = env.reset(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn boundary_clamps() {
        let mut sc = sub6_los();
        sc.users = vec![[50.0, 50.0], [-50.0, -50.0]];
        let mut env = Environment::new(sc, RewardWeights::sub6_los()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng).unwrap();
        let spec = env.action_spec();
        let up = spec.encode(&[1, 1, 1, 1]).unwrap();
        for _ in 0..60 {
            env.step(up, &mut rng).unwrap();
        }
        let snap = env.snapshot();
        assert_eq!(snap.uav[0], 50.0);
        assert_eq!(snap.uav[1], 50.0);
        assert_eq!(snap.alphas[0].strong_alpha(), 0.99);
        assert!((snap.alphas[0].weak_alpha() - 0.01).abs() < 1e-15);
        let down = spec.encode(&[-1, -1, -1, -1]).unwrap();
        for _ in 0..200 {
            env.step(down, &mut rng).unwrap();
        }
        assert_eq!(env.snapshot().uav[2], 10.0);
        assert_eq!(env.snapshot().alphas[0].strong_alpha(), 0.01);
    }

    #[test]
    fn reward_terms() {
        let w = 50e6;
        let only_rate = RewardWeights {
            w_r: 1.0,
            ..Default::default()
        };
        let r = UserRates::new(vec![w, w, 0.0, 0.0]).unwrap();
        assert_eq!(compute_reward(&r, &[0.0; 4], &only_rate, 0.0, w), 2.0);

        let gated = RewardWeights {
            w_r: 10.0,
            ..Default::default()
        };
        let r = UserRates::new(vec![3.0 * w, 3.0 * w, 3.0 * w, 0.5 * w]).unwrap();
        assert_eq!(compute_reward(&r, &[0.0; 4], &gated, w, w), 0.0);

        // Fairness only counts without a rate floor; unsatisfied term never
        // fires at r_min = 0.
        let fu = RewardWeights {
            w_f: 1.0,
            w_u: 3.0,
            ..Default::default()
        };
        let eq = UserRates::new(vec![w; 4]).unwrap();
        assert_eq!(compute_reward(&eq, &[0.0; 4], &fu, 0.0, w), 1.0);
        assert_eq!(compute_reward(&eq, &[0.0; 4], &fu, 0.5 * w, w), 0.0);

        let su = RewardWeights {
            w_s: 100.0,
            w_u: 10.0,
            ..Default::default()
        };
        assert_eq!(compute_reward(&r, &[0.0; 4], &su, w, w), 300.0 + 10.0 * 0.5);
    }

    #[test]
    fn state_features() {
        let mut sc = sub6_los();
        sc.users = vec![[0.0, 0.0], [20.0, -10.0]];
        let mut env = Environment::new(sc, RewardWeights::sub6_los()).unwrap();
        let s = env.reset(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let v = s.as_slice();
        assert_eq!(&v[0..3], &[0.0, 0.0, 0.5]);
        assert_eq!(v[4], -20.0 / 50.0);
        assert_eq!(v[5], 10.0 / 50.0);
        assert_eq!(v[8], 1.0);
        assert!(v[3] > v[7] && v[3] <= 1.0 && v[7] >= 0.0);
    }

    #[test]
    fn per_episode_links_are_held() {
        let sc = Scenario {
            link_mode: LinkMode::BernoulliPerEpisode,
            ..Scenario::default_for(Spectrum::MmWave)
        };
        let mut env = Environment::new(sc, RewardWeights::mmwave_rate()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        env.reset(&mut rng).unwrap();
        let kinds = env.snapshot().link_kinds.clone();
        for a in 0..40 {
            env.step(a % 32, &mut rng).unwrap();
            assert_eq!(env.snapshot().link_kinds, kinds);
        }
    }
}
