//! Closed-form link quantities against the high-precision reference values
//! in `tests/fixtures` (regenerate with `gen_fixtures.py`).

use uavnoma::channel::{self, ChannelParams, LinkKind};
use uavnoma::env::{compute_reward, RewardWeights};
use uavnoma::noma;

mod common;

use common::{close, params, rates, rows};

#[test]
fn elevation_angle() {
    for r in rows("elevation_angle.csv") {
        let got = channel::elevation_angle([r["uav_x"], r["uav_y"], r["uav_h"]], [r["ue_x"], r["ue_y"]]).unwrap();
        close(got, r["expected_rad"], "elevation");
    }
}

#[test]
fn los_probability() {
    for r in rows("los_probability.csv") {
        let got = channel::los_probability(&params(r["spectrum"]), r["theta_rad"]).unwrap();
        close(got, r["expected"], &format!("los at {}", r["theta_rad"]));
    }
}

#[test]
fn path_gain() {
    for r in rows("path_gain.csv") {
        let kind = if r["kind"] == 0.0 { LinkKind::LoS } else { LinkKind::NLoS };
        let got = channel::path_gain(&params(r["spectrum"]), kind, r["distance_m"]).unwrap();
        close(got, r["expected"], &format!("gain at {} m", r["distance_m"]));
    }
}

#[test]
fn received_sinr() {
    for r in rows("received_sinr.csv") {
        let got = noma::received_sinr(r["p_t"], r["gain"], r["g_mimo"], r["alpha"], r["beta"], r["sigma2"]).unwrap();
        close(got, r["expected"], "sinr");
    }
}

#[test]
fn user_rate() {
    for r in rows("user_rate.csv") {
        close(noma::user_rate(r["w_bw"], r["sinr"]).unwrap(), r["expected"], "rate");
    }
}

#[test]
fn jain_fairness() {
    for r in rows("jain_fairness.csv") {
        close(noma::jain_fairness(&rates(&r, 4)), r["expected"], "jain");
    }
}

#[test]
fn weighted_objective() {
    for r in rows("weighted_objective.csv") {
        let got = noma::weighted_objective(&rates(&r, 4), r["omega_r"], r["omega_f"]).unwrap();
        close(got, r["expected"], "objective");
    }
}

#[test]
fn feasible_alpha_bound() {
    for r in rows("feasible_alpha_bound.csv") {
        close(noma::feasible_strong_alpha_bound(r["r_min"], r["w_bw"]).unwrap(), r["expected"], "alpha bound");
    }
}

#[test]
fn sub6_los_reward() {
    let w = ChannelParams::sub6().bandwidth_hz;
    for r in rows("reward_sub6_los.csv") {
        let gains: Vec<f64> = (1..=4).map(|i| r[&format!("g{i}")]).collect();
        let got = compute_reward(&rates(&r, 4), &gains, &RewardWeights::sub6_los(), 0.0, w);
        close(got, r["expected"], "reward");
    }
}
