//! Air-to-ground channel models for the mmWave and sub-6 GHz bands.
//!
//! All quantities are linear and SI internally; dB and dBm values are
//! converted when parameters are built.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spectrum {
    MmWave,
    Sub6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    LoS,
    NLoS,
}

/// How the LoS/NLoS state of a link is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// Every link is LoS.
    #[serde(rename = "always_los")]
    AlwaysLoS,
    /// Probability-weighted mixture of the LoS and NLoS gains.
    #[default]
    Expected,
    /// Fresh Bernoulli draw on every evaluation.
    BernoulliPerStep,
    /// One draw per link at reset, held for the episode.
    BernoulliPerEpisode,
}

/// Band-specific path-loss law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathLoss {
    /// `g = C_k d^-a_k`.
    MmWave {
        intercept_los: f64,
        intercept_nlos: f64,
        exponent_los: f64,
        exponent_nlos: f64,
    },
    /// Free-space gain times a mean excess loss `eta_k` (dB); the LoS
    /// probability is only defined above `min_elevation` (radians).
    Sub6 {
        eta_los_db: f64,
        eta_nlos_db: f64,
        min_elevation: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub carrier_hz: f64,
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    /// LoS-probability parameters `C` and `Y`.
    pub los_c: f64,
    pub los_y: f64,
    pub path_loss: PathLoss,
    pub antennas_uav: u32,
    pub antennas_ue: u32,
}

impl ChannelParams {
    /// 28 GHz urban mmWave link.
    pub fn mmwave() -> Self {
        ChannelParams {
            carrier_hz: 28e9,
            tx_power_w: dbm_to_watts(20.0),
            bandwidth_hz: 2e9,
            noise_w: dbm_to_watts(-84.0),
            los_c: 9.6117,
            los_y: 0.1581,
            path_loss: PathLoss::MmWave {
                intercept_los: 10f64.powf(-6.4),
                intercept_nlos: 10f64.powf(-7.2),
                exponent_los: 2.0,
                exponent_nlos: 2.92,
            },
            antennas_uav: 8,
            antennas_ue: 8,
        }
    }

    /// 2 GHz sub-6 link.
    pub fn sub6() -> Self {
        ChannelParams {
            carrier_hz: 2e9,
            tx_power_w: dbm_to_watts(30.0),
            bandwidth_hz: 50e6,
            noise_w: dbm_to_watts(-88.0),
            los_c: 0.6,
            los_y: 0.11,
            path_loss: PathLoss::Sub6 {
                eta_los_db: 1.0,
                eta_nlos_db: 20.0,
                min_elevation: 15f64.to_radians(),
            },
            antennas_uav: 1,
            antennas_ue: 1,
        }
    }

    pub fn default_for(spectrum: Spectrum) -> Self {
        match spectrum {
            Spectrum::MmWave => Self::mmwave(),
            Spectrum::Sub6 => Self::sub6(),
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        match self.path_loss {
            PathLoss::MmWave { .. } => Spectrum::MmWave,
            PathLoss::Sub6 { .. } => Spectrum::Sub6,
        }
    }

    /// Combined antenna gain `G = N_uav * N_ue`.
    pub fn mimo_gain(&self) -> f64 {
        f64::from(self.antennas_uav) * f64::from(self.antennas_ue)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("tx_power_w", self.tx_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_w", self.noise_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.antennas_uav == 0 || self.antennas_ue == 0 {
            return Err(Error::invalid("antennas", "antenna counts must be >= 1"));
        }
        match self.path_loss {
            PathLoss::MmWave {
                intercept_los,
                intercept_nlos,
                ..
            } if intercept_los <= 0.0 || intercept_nlos <= 0.0 => {
                Err(Error::invalid("intercept", "path-loss intercepts must be > 0"))
            }
            PathLoss::Sub6 { min_elevation, .. } if !(0.0..FRAC_PI_2).contains(&min_elevation) => {
                Err(Error::invalid("min_elevation", "must lie in [0, 90) degrees"))
            }
            _ => Ok(()),
        }
    }
}

/// Elevation angle of the UAV seen from a ground user, `atan(h / r)`.
pub fn elevation_angle(uav: [f64; 3], ue: [f64; 2]) -> Result<f64> {
    let h = uav[2];
    if !(h > 0.0) {
        return Err(Error::invalid("uav height", format!("must be > 0, got {h}")));
    }
    let r = (uav[0] - ue[0]).hypot(uav[1] - ue[1]);
    if r == 0.0 {
        return Ok(FRAC_PI_2);
    }
    Ok(h.atan2(r))
}

/// 3D UAV-to-user distance.
pub fn distance(uav: [f64; 3], ue: [f64; 2]) -> f64 {
    let dx = uav[0] - ue[0];
    let dy = uav[1] - ue[1];
    (dx * dx + dy * dy + uav[2] * uav[2]).sqrt()
}

pub fn mimo_gain(n_uav: u32, n_ue: u32) -> Result<f64> {
    if n_uav == 0 || n_ue == 0 {
        return Err(Error::invalid("antennas", "antenna counts must be >= 1"));
    }
    Ok(f64::from(n_uav) * f64::from(n_ue))
}

/// Probability that the link is LoS at elevation `theta` (radians).
///
/// mmWave uses the logistic model; sub-6 uses the power law above the
/// minimum angle, clamped to [0, 1]. `theta == min_elevation` gives 0.
pub fn los_probability(params: &ChannelParams, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= FRAC_PI_2 + 1e-12) {
        return Err(Error::invalid("theta", format!("must lie in (0, pi/2], got {theta}")));
    }
    let theta_deg = theta * 180.0 / PI;
    match params.path_loss {
        PathLoss::MmWave { .. } => {
            let c = params.los_c;
            Ok(1.0 / (1.0 + c * (-params.los_y * (theta_deg - c)).exp()))
        }
        PathLoss::Sub6 { min_elevation, .. } => {
            let min_deg = min_elevation * 180.0 / PI;
            if theta < min_elevation {
                return Err(Error::BelowMinimumElevation {
                    theta_deg,
                    min_deg,
                });
            }
            let base = (theta_deg - min_deg).max(0.0);
            Ok((params.los_c * base.powf(params.los_y)).clamp(0.0, 1.0))
        }
    }
}

/// Large-scale gain of a single antenna pair at 3D distance `d` (m).
pub fn path_gain(params: &ChannelParams, kind: LinkKind, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("distance", format!("must be finite and > 0, got {d}")));
    }
    Ok(match (params.path_loss, kind) {
        (PathLoss::MmWave { intercept_los, exponent_los, .. }, LinkKind::LoS) => {
            intercept_los * d.powf(-exponent_los)
        }
        (PathLoss::MmWave { intercept_nlos, exponent_nlos, .. }, LinkKind::NLoS) => {
            intercept_nlos * d.powf(-exponent_nlos)
        }
        (PathLoss::Sub6 { eta_los_db, eta_nlos_db, .. }, kind) => {
            let eta = if kind == LinkKind::LoS { eta_los_db } else { eta_nlos_db };
            let free_space = SPEED_OF_LIGHT / (4.0 * PI * params.carrier_hz * d);
            free_space * free_space * 10f64.powf(-0.1 * eta)
        }
    })
}

/// LoS probability used inside the simulator: below the sub-6 minimum
/// elevation the link is treated as NLoS instead of failing.
pub fn los_probability_saturating(params: &ChannelParams, theta: f64) -> Result<f64> {
    match params.path_loss {
        PathLoss::Sub6 { min_elevation, .. } if theta < min_elevation => Ok(0.0),
        _ => los_probability(params, theta),
    }
}

/// Per-pair gain of one link under `mode`, with the LoS/NLoS state that
/// was used. `cached_kind` is honoured only by `BernoulliPerEpisode`.
pub fn effective_gain<R: Rng + ?Sized>(
    params: &ChannelParams,
    mode: LinkMode,
    theta: f64,
    d: f64,
    rng: &mut R,
    cached_kind: Option<LinkKind>,
) -> Result<(f64, LinkKind)> {
    let draw = |rng: &mut R| -> Result<LinkKind> {
        let p = los_probability_saturating(params, theta)?;
        Ok(if rng.random::<f64>() < p { LinkKind::LoS } else { LinkKind::NLoS })
    };
    let kind = match mode {
        LinkMode::AlwaysLoS => LinkKind::LoS,
        LinkMode::Expected => {
            let p = los_probability_saturating(params, theta)?;
            let los = path_gain(params, LinkKind::LoS, d)?;
            let nlos = path_gain(params, LinkKind::NLoS, d)?;
            let kind = if p >= 0.5 { LinkKind::LoS } else { LinkKind::NLoS };
            return Ok((p * los + (1.0 - p) * nlos, kind));
        }
        LinkMode::BernoulliPerStep => draw(rng)?,
        LinkMode::BernoulliPerEpisode => match cached_kind {
            Some(k) => k,
            None => draw(rng)?,
        },
    };
    Ok((path_gain(params, kind, d)?, kind))
}
