//! Non-learning references: a fixed hover point and an exhaustive grid
//! search over placement and power split.

use std::path::Path;

use rayon::prelude::*;

use crate::channel::{self, LinkKind, LinkMode};
use crate::env::{cluster_users, evaluate_links, Cluster, Scenario};
use crate::error::{Error, Result};
use crate::harness::write_rows;
use crate::noma::{self, ClusterAllocation, UserRates};
use crate::rng::{self, Stream};

pub const STATIC_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoverMetrics {
    pub avg_sum_rate: f64,
    pub avg_jain: f64,
    pub satisfaction: f64,
}

/// UAV parked at `(0, 0, h_init)` with every strong user on `alpha`.
pub fn static_hover_eval(scenario: &Scenario, alpha: f64, steps: usize, seed: u64) -> Result<HoverMetrics> {
    scenario.validate()?;
    if steps == 0 {
        return Err(Error::invalid("steps", "must be >= 1"));
    }
    let clusters = cluster_users(scenario)?;
    let alphas = vec![ClusterAllocation::new(alpha, scenario.alpha_bounds)?; clusters.len()];
    let uav = scenario.initial_uav();
    let mut rng = rng::stream(seed, Stream::Eval);
    let mut cached: Option<Vec<LinkKind>> = None;
    let (mut rate, mut jain, mut ok) = (0.0, 0.0, 0usize);
    for _ in 0..steps {
        let links = evaluate_links(scenario, &clusters, uav, &alphas, cached.as_deref(), &mut rng)?;
        if scenario.link_mode == LinkMode::BernoulliPerEpisode && cached.is_none() {
            cached = Some(links.kinds.clone());
        }
        rate += noma::sum_rate(&links.rates);
        jain += noma::jain_fairness(&links.rates);
        ok += usize::from(links.rates.as_slice().iter().all(|r| *r >= scenario.r_min));
    }
    let n = steps as f64;
    Ok(HoverMetrics {
        avg_sum_rate: rate / n,
        avg_jain: jain / n,
        satisfaction: ok as f64 / n,
    })
}

/// Search grid for [`grid_search_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub xy_step: f64,
    pub h_levels: Vec<f64>,
    pub alpha_step: f64,
    pub omega_r: f64,
    pub omega_f: f64,
    /// Minimum per-user rate in bits/s.
    pub r_min: f64,
}

impl GridSpec {
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if !(self.xy_step > 0.0 && self.alpha_step > 0.0) {
            return Err(Error::invalid("grid", "steps must be > 0"));
        }
        if self.h_levels.is_empty() {
            return Err(Error::invalid("h_levels", "need at least one height"));
        }
        if let Some(h) = self
            .h_levels
            .iter()
            .find(|h| !(scenario.h_min..=scenario.h_max).contains(*h))
        {
            return Err(Error::invalid(
                "h_levels",
                format!("{h} outside [{}, {}]", scenario.h_min, scenario.h_max),
            ));
        }
        if !(self.omega_r >= 0.0 && self.omega_f >= 0.0 && self.r_min >= 0.0) {
            return Err(Error::invalid("grid", "weights and r_min must be >= 0"));
        }
        Ok(())
    }
}

/// Points `lo, lo + step, ...` not exceeding `hi` (with a small tolerance
/// for accumulated rounding).
fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

fn alpha_lattice(step: f64, bounds: (f64, f64)) -> Vec<f64> {
    let lo = (bounds.0 / step - 1e-9).ceil().max(1.0) as usize;
    let hi = (bounds.1 / step + 1e-9).floor() as usize;
    (lo..=hi)
        .map(|k| k as f64 * step)
        .filter(|a| *a >= bounds.0 - 1e-12 && *a <= bounds.1 + 1e-12)
        .map(|a| a.clamp(bounds.0, bounds.1))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub uav: [f64; 3],
    /// Strong-user share per cluster.
    pub alphas: Vec<f64>,
    pub objective: f64,
    pub rates: Vec<f64>,
}

struct Axes {
    xs: Vec<f64>,
    ys: Vec<f64>,
    hs: Vec<f64>,
    alphas: Vec<Vec<f64>>,
}

/// Exhaustive maximization of `omega_r * sum rate + omega_f * Jain` over
/// the grid, keeping only points where every user meets `r_min`. Ties go
/// to the lexicographically smallest `(x, y, h, alpha...)`.
pub fn grid_search_oracle(scenario: &Scenario, grid: &GridSpec) -> Result<OracleResult> {
    grid.validate(scenario)?;
    let half = scenario.half_side();
    let mut hs = grid.h_levels.clone();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let alphas = alpha_lattice(grid.alpha_step, scenario.alpha_bounds);
    if alphas.is_empty() {
        return Err(Error::invalid("alpha_step", "no power level inside the alpha bounds"));
    }
    let axes = Axes {
        xs: lattice(-half, half, grid.xy_step),
        ys: lattice(-half, half, grid.xy_step),
        hs,
        alphas: vec![alphas; scenario.n_clusters()],
    };
    search(scenario, grid, &axes)
}

/// A second pass on a grid twice as fine, centred on `coarse`'s optimum
/// and spanning one coarse step either side.
pub fn refine_oracle(scenario: &Scenario, grid: &GridSpec, coarse: &OracleResult) -> Result<OracleResult> {
    grid.validate(scenario)?;
    let half = scenario.half_side();
    let fine_xy = grid.xy_step / 2.0;
    let around = |c: f64, step: f64, lo: f64, hi: f64| -> Vec<f64> {
        (-2i32..=2)
            .map(|k| c + f64::from(k) * step)
            .filter(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12)
            .map(|v| v.clamp(lo, hi))
            .collect()
    };
    let mut hs = grid.h_levels.clone();
    hs.sort_by(f64::total_cmp);
    let hi = hs.iter().position(|h| *h == coarse.uav[2]).unwrap_or(0);
    let mut fine_h = vec![coarse.uav[2]];
    if hi > 0 {
        fine_h.push(0.5 * (hs[hi - 1] + hs[hi]));
    }
    if hi + 1 < hs.len() {
        fine_h.push(0.5 * (hs[hi] + hs[hi + 1]));
    }
    fine_h.sort_by(f64::total_cmp);
    let (alo, ahi) = scenario.alpha_bounds;
    let axes = Axes {
        xs: around(coarse.uav[0], fine_xy, -half, half),
        ys: around(coarse.uav[1], fine_xy, -half, half),
        hs: fine_h,
        alphas: coarse
            .alphas
            .iter()
            .map(|a| around(*a, grid.alpha_step / 2.0, alo, ahi))
            .collect(),
    };
    search(scenario, grid, &axes)
}

fn search(scenario: &Scenario, grid: &GridSpec, axes: &Axes) -> Result<OracleResult> {
    match scenario.link_mode {
        LinkMode::AlwaysLoS | LinkMode::Expected => {}
        m => {
            return Err(Error::invalid(
                "link_mode",
                format!("the oracle needs a deterministic link mode, got {m:?}"),
            ))
        }
    }
    let clusters = cluster_users(scenario)?;
    // One task per x value; each returns its best candidate, reduced in
    // index order so ties resolve exactly as a sequential scan would.
    let per_x: Vec<Result<Option<OracleResult>>> = axes
        .xs
        .par_iter()
        .map(|x| scan_x(scenario, grid, axes, &clusters, *x))
        .collect();
    let mut best: Option<OracleResult> = None;
    for cand in per_x {
        if let Some(c) = cand? {
            if best.as_ref().is_none_or(|b| c.objective > b.objective) {
                best = Some(c);
            }
        }
    }
    best.ok_or(Error::Infeasible)
}

fn scan_x(
    scenario: &Scenario,
    grid: &GridSpec,
    axes: &Axes,
    clusters: &[Cluster],
    x: f64,
) -> Result<Option<OracleResult>> {
    let ch = &scenario.channel;
    let g_mimo = ch.mimo_gain();
    let mut dummy = rng::stream(0, Stream::Eval);
    let n_c = clusters.len();
    let mut best: Option<OracleResult> = None;
    let mut rates = vec![0.0; scenario.n_users()];
    for &y in &axes.ys {
        for &h in &axes.hs {
            let uav = [x, y, h];
            let gains = scenario
                .users
                .iter()
                .map(|u| {
                    let theta = channel::elevation_angle(uav, *u)?;
                    let d = channel::distance(uav, *u);
                    Ok(channel::effective_gain(ch, scenario.link_mode, theta, d, &mut dummy, None)?.0)
                })
                .collect::<Result<Vec<f64>>>()?;
            // Odometer over per-cluster alpha indices, last cluster fastest.
            let mut idx = vec![0usize; n_c];
            'combos: loop {
                for (c, cl) in clusters.iter().enumerate() {
                    let a = axes.alphas[c][idx[c]];
                    let s = noma::received_sinr(ch.tx_power_w, gains[cl.strong], g_mimo, a, 0.0, ch.noise_w)?;
                    let w = noma::received_sinr(ch.tx_power_w, gains[cl.weak], g_mimo, 1.0 - a, a, ch.noise_w)?;
                    rates[cl.strong] = noma::user_rate(ch.bandwidth_hz, s)?;
                    rates[cl.weak] = noma::user_rate(ch.bandwidth_hz, w)?;
                }
                if rates.iter().all(|r| *r >= grid.r_min) {
                    let ur = UserRates::new(rates.clone())?;
                    let obj = noma::weighted_objective(&ur, grid.omega_r, grid.omega_f)?;
                    if best.as_ref().is_none_or(|b| obj > b.objective) {
                        best = Some(OracleResult {
                            uav,
                            alphas: (0..n_c).map(|c| axes.alphas[c][idx[c]]).collect(),
                            objective: obj,
                            rates: rates.clone(),
                        });
                    }
                }
                let mut c = n_c;
                loop {
                    if c == 0 {
                        break 'combos;
                    }
                    c -= 1;
                    idx[c] += 1;
                    if idx[c] < axes.alphas[c].len() {
                        break;
                    }
                    idx[c] = 0;
                }
            }
        }
    }
    Ok(best)
}

pub fn write_oracle_csv(path: &Path, r: &OracleResult) -> Result<()> {
    let mut header: Vec<String> = ["x", "y", "h"].iter().map(|s| s.to_string()).collect();
    header.extend((0..r.alphas.len()).map(|c| format!("alpha_c{c}")));
    header.push("objective".into());
    header.extend((0..r.rates.len()).map(|u| format!("rate_u{u}_bps")));
    let mut row: Vec<String> = r.uav.iter().map(|v| v.to_string()).collect();
    row.extend(r.alphas.iter().map(|a| a.to_string()));
    row.push(r.objective.to_string());
    row.extend(r.rates.iter().map(|v| v.to_string()));
    write_rows(path, &header, [row])
}

pub fn write_baseline_csv(path: &Path, m: &HoverMetrics, alpha: f64, steps: usize) -> Result<()> {
    let header: Vec<String> = ["alpha", "steps", "avg_sum_rate_bps", "avg_jain", "satisfaction"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_rows(
        path,
        &header,
        [vec![
            alpha.to_string(),
            steps.to_string(),
            m.avg_sum_rate.to_string(),
            m.avg_jain.to_string(),
            m.satisfaction.to_string(),
        ]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Spectrum;
    use crate::env::{Environment, RewardWeights};

    fn los(users: Vec<[f64; 2]>) -> Scenario {
        Scenario {
            users,
            link_mode: LinkMode::AlwaysLoS,
            clustering: crate::env::Clustering::BestWorst,
            ..Scenario::default_for(Spectrum::Sub6)
        }
    }

    fn grid(xy: f64, hs: &[f64], a: f64) -> GridSpec {
        GridSpec {
            xy_step: xy,
            h_levels: hs.to_vec(),
            alpha_step: a,
            omega_r: 1.0,
            omega_f: 0.0,
            r_min: 0.0,
        }
    }

    #[test]
    fn lattices() {
        assert_eq!(lattice(-50.0, 50.0, 25.0), vec![-50.0, -25.0, 0.0, 25.0, 50.0]);
        assert_eq!(lattice(0.0, 1.0, 0.3).len(), 4);
        let a = alpha_lattice(0.05, (0.01, 0.99));
        assert_eq!(a.len(), 19);
        assert!((a[0] - 0.05).abs() < 1e-15 && (a[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn hover_is_deterministic_under_los() {
        let sc = los(Scenario::default_for(Spectrum::Sub6).users);
        let one = static_hover_eval(&sc, STATIC_ALPHA, 1, 0).unwrap();
        let many = static_hover_eval(&sc, STATIC_ALPHA, 50, 7).unwrap();
        assert!((one.avg_sum_rate - many.avg_sum_rate).abs() <= 1e-9 * one.avg_sum_rate);
        assert!((one.avg_jain - many.avg_jain).abs() < 1e-12);
    }

    #[test]
    fn hover_mirror_users_get_mirror_rates() {
        // NOMA gives the two members of a cluster different SINR laws, so a
        // symmetric pair is not perfectly fair; mirrored clusters are.
        let sc = los(vec![[10.0, 0.0], [-30.0, 0.0], [-10.0, 0.0], [30.0, 0.0]]);
        let clusters = cluster_users(&sc).unwrap();
        let alphas = vec![ClusterAllocation::new(0.3, sc.alpha_bounds).unwrap(); 2];
        let links = evaluate_links(&sc, &clusters, sc.initial_uav(), &alphas, None, &mut rng::stream(0, Stream::Eval)).unwrap();
        let r = links.rates.as_slice();
        assert!((r[0] - r[2]).abs() <= 1e-9 * r[0]);
        assert!((r[1] - r[3]).abs() <= 1e-9 * r[1]);
    }

    #[test]
    fn single_point_grid() {
        let sc = los(vec![[5.0, 5.0], [-20.0, 10.0]]);
        let g = GridSpec {
            xy_step: 200.0,
            h_levels: vec![40.0],
            alpha_step: 0.99,
            ..grid(1.0, &[40.0], 0.1)
        };
        let r = grid_search_oracle(&sc, &g).unwrap();
        assert_eq!(r.uav, [-50.0, -50.0, 40.0]);
        assert_eq!(r.alphas, vec![0.99]);
    }

    #[test]
    fn symmetric_pair_optimum_mirrors() {
        let sc = los(vec![[20.0, 0.0], [-20.0, 0.0]]);
        let g = grid(5.0, &[10.0, 30.0, 50.0], 0.05);
        let best = grid_search_oracle(&sc, &g).unwrap();
        let mirror = Scenario {
            users: vec![[-20.0, 0.0], [20.0, 0.0]],
            ..sc.clone()
        };
        let at = |s: &Scenario, x: f64| {
            let clusters = cluster_users(s).unwrap();
            let alphas = vec![ClusterAllocation::new(best.alphas[0], s.alpha_bounds).unwrap()];
            let links = evaluate_links(s, &clusters, [x, best.uav[1], best.uav[2]], &alphas, None, &mut rng::stream(0, Stream::Eval)).unwrap();
            noma::sum_rate(&links.rates)
        };
        assert!((at(&sc, best.uav[0]) - at(&mirror, -best.uav[0])).abs() < 1e-9 * best.objective.max(1.0));
        assert!((best.objective - at(&sc, best.uav[0])).abs() < 1e-6);
    }

    #[test]
    fn infeasible_and_stochastic_rejected() {
        let sc = los(vec![[5.0, 5.0], [-20.0, 10.0]]);
        let mut g = grid(25.0, &[50.0], 0.1);
        g.r_min = 100.0 * sc.channel.bandwidth_hz;
        assert!(matches!(grid_search_oracle(&sc, &g), Err(Error::Infeasible)));
        let st = Scenario {
            link_mode: LinkMode::BernoulliPerStep,
            ..sc
        };
        assert!(grid_search_oracle(&st, &grid(25.0, &[50.0], 0.1)).is_err());
    }

    #[test]
    fn refinement_never_worse() {
        let sc = los(vec![[12.0, -7.0], [-31.0, 22.0]]);
        let coarse = grid_search_oracle(&sc, &grid(10.0, &[10.0, 30.0], 0.1)).unwrap();
        let finer = grid_search_oracle(&sc, &grid(5.0, &[10.0, 20.0, 30.0], 0.05)).unwrap();
        assert!(finer.objective >= coarse.objective);
        let refined = refine_oracle(&sc, &grid(10.0, &[10.0, 30.0], 0.1), &coarse).unwrap();
        assert!(refined.objective >= coarse.objective);
    }

    #[test]
    fn fairness_only_matches_independent_scan() {
        let sc = los(vec![[12.0, -7.0], [-31.0, 22.0], [40.0, 40.0], [-5.0, -45.0]]);
        let mut g = grid(25.0, &[20.0, 60.0], 0.1);
        g.omega_r = 0.0;
        g.omega_f = 1.0;
        let best = grid_search_oracle(&sc, &g).unwrap();
        // Independent scan through the environment's own link evaluation.
        let clusters = cluster_users(&sc).unwrap();
        let alphas: Vec<f64> = (1..=9).map(|k| k as f64 * 0.1).collect();
        let mut top: f64 = 0.0;
        let mut r = rng::stream(0, Stream::Eval);
        for x in lattice(-50.0, 50.0, 25.0) {
            for y in lattice(-50.0, 50.0, 25.0) {
                for h in [20.0, 60.0] {
                    for a0 in &alphas {
                        for a1 in &alphas {
                            let al = [
                                ClusterAllocation::new(*a0, sc.alpha_bounds).unwrap(),
                                ClusterAllocation::new(*a1, sc.alpha_bounds).unwrap(),
                            ];
                            let links = evaluate_links(&sc, &clusters, [x, y, h], &al, None, &mut r).unwrap();
                            top = top.max(noma::jain_fairness(&links.rates));
                        }
                    }
                }
            }
        }
        assert!((best.objective - top).abs() < 1e-6);
    }

    #[test]
    fn oracle_bounds_grid_aligned_rollouts() {
        // Tiny instance: every visited state of a unit-step walk lies on the
        // 1 m grid, so the oracle over that grid bounds each step's objective.
        let mut sc = los(vec![[6.0, 2.0], [-4.0, -7.0]]);
        sc.area_side = 20.0;
        sc.h_min = 10.0;
        sc.h_init = 12.0;
        sc.h_max = 14.0;
        sc.alpha_step = 0.1;
        let hs: Vec<f64> = (10..=14).map(f64::from).collect();
        let best = grid_search_oracle(&sc, &grid(1.0, &hs, 0.01)).unwrap();
        let mut env = Environment::new(sc, RewardWeights::sub6_los()).unwrap();
        let mut r = rng::stream(2, Stream::Env);
        env.reset(&mut r).unwrap();
        for a in 0..200 {
            let out = env.step((a * 7) % 16, &mut r).unwrap();
            assert!(out.info.sum_rate <= best.objective * (1.0 + 1e-12));
        }
    }
}
