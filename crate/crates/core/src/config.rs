//! TOML run configuration with dotted-path overrides.
//!
//! ```toml
//! seed = 1
//!
//! [channel]
//! spectrum = "sub6"
//!
//! [scenario]
//! link_mode = "always_los"
//!
//! [train]
//! episodes = 1000
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agent::{ExplorationSchedule, LearnerParams};
use crate::baselines::{GridSpec, STATIC_ALPHA};
use crate::channel::{db_to_linear, dbm_to_watts, ChannelParams, LinkMode, PathLoss, Spectrum};
use crate::env::{Clustering, RewardWeights, Scenario};
use crate::error::{Error, Result};
use crate::harness::TrainConfig;
use crate::nn::{NetMode, DEFAULT_HIDDEN};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    channel: RawChannel,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    reward: RawReward,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    layouts: RawLayouts,
    oracle: Option<RawOracle>,
    #[serde(default)]
    baseline: RawBaseline,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    spectrum: Spectrum,
    carrier_hz: Option<f64>,
    tx_power_dbm: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_dbm: Option<f64>,
    los_c: Option<f64>,
    los_y: Option<f64>,
    antennas_uav: Option<u32>,
    antennas_ue: Option<u32>,
    eta_los_db: Option<f64>,
    eta_nlos_db: Option<f64>,
    min_elevation_deg: Option<f64>,
    intercept_los_db: Option<f64>,
    intercept_nlos_db: Option<f64>,
    exponent_los: Option<f64>,
    exponent_nlos: Option<f64>,
}

impl Default for RawChannel {
    fn default() -> Self {
        RawChannel {
            spectrum: Spectrum::Sub6,
            carrier_hz: None,
            tx_power_dbm: None,
            bandwidth_hz: None,
            noise_dbm: None,
            los_c: None,
            los_y: None,
            antennas_uav: None,
            antennas_ue: None,
            eta_los_db: None,
            eta_nlos_db: None,
            min_elevation_deg: None,
            intercept_los_db: None,
            intercept_nlos_db: None,
            exponent_los: None,
            exponent_nlos: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    area_side: Option<f64>,
    users: Option<Vec<[f64; 2]>>,
    h_min: Option<f64>,
    h_max: Option<f64>,
    h_init: Option<f64>,
    alpha_init: Option<f64>,
    step: Option<[f64; 3]>,
    alpha_step: Option<f64>,
    alpha_bounds: Option<[f64; 2]>,
    link_mode: Option<LinkMode>,
    r_min_bps: Option<f64>,
    r_min_over_w: Option<f64>,
    clustering: Option<Clustering>,
    gain_db_bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardPreset {
    Sub6Los,
    Sub6Generic,
    MmwaveMinRate,
    MmwaveRate,
}

impl RewardPreset {
    pub fn weights(self) -> RewardWeights {
        match self {
            RewardPreset::Sub6Los => RewardWeights::sub6_los(),
            RewardPreset::Sub6Generic => RewardWeights::sub6_generic(),
            RewardPreset::MmwaveMinRate => RewardWeights::mmwave_min_rate(),
            RewardPreset::MmwaveRate => RewardWeights::mmwave_rate(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReward {
    preset: Option<RewardPreset>,
    w_r: Option<f64>,
    w_f: Option<f64>,
    w_g: Option<f64>,
    w_s: Option<f64>,
    w_u: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    episodes: Option<usize>,
    steps: Option<usize>,
    batch_size: Option<usize>,
    buffer_capacity: Option<usize>,
    lr: Option<f64>,
    gamma: Option<f64>,
    target_sync: Option<u64>,
    eps_start: Option<f64>,
    eps_end: Option<f64>,
    chi: Option<f64>,
    mode: Option<NetMode>,
    hidden: Option<[usize; 2]>,
    window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    steps: Option<usize>,
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    rmin_over_w: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayouts {
    n_layouts: Option<usize>,
    steps: Option<usize>,
    checkpoint_a: Option<PathBuf>,
    checkpoint_b: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    xy_step: f64,
    h_levels: Vec<f64>,
    alpha_step: f64,
    omega_r: Option<f64>,
    omega_f: Option<f64>,
    #[serde(default)]
    refine: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaseline {
    alpha: Option<f64>,
    steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub steps: usize,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutsSection {
    pub n_layouts: usize,
    pub steps: usize,
    pub checkpoint_a: Option<PathBuf>,
    pub checkpoint_b: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSection {
    pub grid: GridSpec,
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSection {
    pub alpha: f64,
    pub steps: usize,
}

/// A fully resolved configuration plus the merged TOML it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub train: TrainConfig,
    pub window: usize,
    pub eval: EvalSection,
    pub sweep_points: Vec<f64>,
    pub layouts: LayoutsSection,
    pub oracle: Option<OracleSection>,
    pub baseline: BaselineSection,
    /// Canonical TOML text of the merged table.
    pub snapshot: String,
}

fn channel_params(raw: &RawChannel) -> Result<ChannelParams> {
    let mut p = ChannelParams::default_for(raw.spectrum);
    if let Some(v) = raw.carrier_hz {
        p.carrier_hz = v;
    }
    if let Some(v) = raw.tx_power_dbm {
        p.tx_power_w = dbm_to_watts(v);
    }
    if let Some(v) = raw.bandwidth_hz {
        p.bandwidth_hz = v;
    }
    if let Some(v) = raw.noise_dbm {
        p.noise_w = dbm_to_watts(v);
    }
    if let Some(v) = raw.los_c {
        p.los_c = v;
    }
    if let Some(v) = raw.los_y {
        p.los_y = v;
    }
    if let Some(v) = raw.antennas_uav {
        p.antennas_uav = v;
    }
    if let Some(v) = raw.antennas_ue {
        p.antennas_ue = v;
    }
    let mmwave_keys = [raw.intercept_los_db, raw.intercept_nlos_db, raw.exponent_los, raw.exponent_nlos];
    let sub6_keys = [raw.eta_los_db, raw.eta_nlos_db, raw.min_elevation_deg];
    match &mut p.path_loss {
        PathLoss::MmWave {
            intercept_los,
            intercept_nlos,
            exponent_los,
            exponent_nlos,
        } => {
            if sub6_keys.iter().any(Option::is_some) {
                return Err(Error::Config(
                    "channel: eta_*_db and min_elevation_deg apply to the sub6 spectrum only".into(),
                ));
            }
            if let Some(v) = raw.intercept_los_db {
                *intercept_los = db_to_linear(v);
            }
            if let Some(v) = raw.intercept_nlos_db {
                *intercept_nlos = db_to_linear(v);
            }
            if let Some(v) = raw.exponent_los {
                *exponent_los = v;
            }
            if let Some(v) = raw.exponent_nlos {
                *exponent_nlos = v;
            }
        }
        PathLoss::Sub6 {
            eta_los_db,
            eta_nlos_db,
            min_elevation,
        } => {
            if mmwave_keys.iter().any(Option::is_some) {
                return Err(Error::Config(
                    "channel: intercept_*_db and exponent_* apply to the mmwave spectrum only".into(),
                ));
            }
            if let Some(v) = raw.eta_los_db {
                *eta_los_db = v;
            }
            if let Some(v) = raw.eta_nlos_db {
                *eta_nlos_db = v;
            }
            if let Some(v) = raw.min_elevation_deg {
                *min_elevation = v.to_radians();
            }
        }
    }
    p.validate()?;
    Ok(p)
}

fn scenario(raw: &RawScenario, channel: ChannelParams) -> Result<Scenario> {
    let mut s = Scenario::default_for(channel.spectrum());
    s.channel = channel;
    macro_rules! set {
        ($($f:ident => $t:ident),*) => {$(if let Some(v) = raw.$f { s.$t = v; })*};
    }
    set!(area_side => area_side, h_min => h_min, h_max => h_max, h_init => h_init,
         alpha_init => alpha_init, step => step, alpha_step => alpha_step,
         link_mode => link_mode, clustering => clustering);
    if let Some(u) = &raw.users {
        s.users = u.clone();
    }
    if let Some([lo, hi]) = raw.alpha_bounds {
        s.alpha_bounds = (lo, hi);
    }
    if let Some([lo, hi]) = raw.gain_db_bounds {
        s.gain_db_bounds = Some((lo, hi));
    }
    s.r_min = match (raw.r_min_bps, raw.r_min_over_w) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "scenario: set at most one of r_min_bps and r_min_over_w".into(),
            ))
        }
        (Some(v), None) => v,
        (None, Some(se)) => se * s.channel.bandwidth_hz,
        (None, None) => 0.0,
    };
    s.validate()?;
    Ok(s)
}

fn reward(raw: &RawReward, spectrum: Spectrum) -> RewardWeights {
    let preset = raw.preset.unwrap_or(match spectrum {
        Spectrum::Sub6 => RewardPreset::Sub6Los,
        Spectrum::MmWave => RewardPreset::MmwaveRate,
    });
    let mut w = preset.weights();
    for (slot, v) in [
        (&mut w.w_r, raw.w_r),
        (&mut w.w_f, raw.w_f),
        (&mut w.w_g, raw.w_g),
        (&mut w.w_s, raw.w_s),
        (&mut w.w_u, raw.w_u),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    w
}

/// Parses a single override value as a TOML value, falling back to a bare
/// string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key v"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies a `section.key=value` override to `table`.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{spec}`: `{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_with(&text, overrides)
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let snapshot = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let channel = channel_params(&raw.channel)?;
        let spectrum = channel.spectrum();
        let scenario = scenario(&raw.scenario, channel)?;
        let weights = reward(&raw.reward, spectrum);
        weights.validate()?;

        let t = &raw.train;
        let mut train = TrainConfig::new(scenario, weights);
        train.seed = raw.seed.unwrap_or(0);
        train.episodes = t.episodes.unwrap_or(train.episodes);
        train.steps_per_episode = t.steps.unwrap_or(train.steps_per_episode);
        train.buffer_capacity = t.buffer_capacity.unwrap_or(train.buffer_capacity);
        let dl = LearnerParams::default();
        train.learner = LearnerParams {
            batch_size: t.batch_size.unwrap_or(dl.batch_size),
            gamma: t.gamma.unwrap_or(dl.gamma),
            lr: t.lr.unwrap_or(dl.lr),
            target_sync: t.target_sync.unwrap_or(dl.target_sync),
        };
        let ds = ExplorationSchedule::default();
        train.schedule = ExplorationSchedule {
            eps_start: t.eps_start.unwrap_or(ds.eps_start),
            eps_end: t.eps_end.unwrap_or(ds.eps_end),
            chi: t.chi.unwrap_or(ds.chi),
        };
        train.mode = t.mode.unwrap_or_default();
        train.hidden = t.hidden.unwrap_or(DEFAULT_HIDDEN);
        train.validate()?;
        let window = t.window.unwrap_or(100);
        if window == 0 {
            return Err(Error::Config("train.window must be >= 1".into()));
        }

        let oracle = match raw.oracle {
            Some(o) => {
                let grid = GridSpec {
                    xy_step: o.xy_step,
                    h_levels: o.h_levels,
                    alpha_step: o.alpha_step,
                    omega_r: o.omega_r.unwrap_or(1.0),
                    omega_f: o.omega_f.unwrap_or(0.0),
                    r_min: train.scenario.r_min,
                };
                grid.validate(&train.scenario)?;
                Some(OracleSection { grid, refine: o.refine })
            }
            None => None,
        };
        let sweep_points = raw
            .sweep
            .rmin_over_w
            .unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        if sweep_points.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("sweep.rmin_over_w entries must be >= 0".into()));
        }
        Ok(Config {
            window,
            eval: EvalSection {
                steps: raw.eval.steps.unwrap_or(1000),
                checkpoint: raw.eval.checkpoint,
            },
            sweep_points,
            layouts: LayoutsSection {
                n_layouts: raw.layouts.n_layouts.unwrap_or(100),
                steps: raw.layouts.steps.unwrap_or(1000),
                checkpoint_a: raw.layouts.checkpoint_a,
                checkpoint_b: raw.layouts.checkpoint_b,
            },
            oracle,
            baseline: BaselineSection {
                alpha: raw.baseline.alpha.unwrap_or(STATIC_ALPHA),
                steps: raw.baseline.steps.unwrap_or(1000),
            },
            train,
            snapshot,
        })
    }
}
