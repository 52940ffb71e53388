//! Two-user NOMA link math with successive interference cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA_BOUNDS: (f64, f64) = (0.01, 0.99);

/// Power split of one cluster. Only the strong user's share is stored, so
/// the pair always sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterAllocation {
    strong_alpha: f64,
}

impl ClusterAllocation {
    pub fn new(strong_alpha: f64, bounds: (f64, f64)) -> Result<Self> {
        if !(bounds.0 > 0.0 && bounds.1 < 1.0 && bounds.0 <= bounds.1) {
            return Err(Error::invalid("alpha bounds", format!("need 0 < lo <= hi < 1, got {bounds:?}")));
        }
        if !(bounds.0..=bounds.1).contains(&strong_alpha) {
            return Err(Error::invalid(
                "strong_alpha",
                format!("{strong_alpha} outside [{}, {}]", bounds.0, bounds.1),
            ));
        }
        Ok(ClusterAllocation { strong_alpha })
    }

    /// Clamps into `bounds` instead of rejecting.
    pub fn clamped(strong_alpha: f64, bounds: (f64, f64)) -> Self {
        ClusterAllocation {
            strong_alpha: strong_alpha.clamp(bounds.0, bounds.1),
        }
    }

    pub fn strong_alpha(&self) -> f64 {
        self.strong_alpha
    }

    pub fn weak_alpha(&self) -> f64 {
        1.0 - self.strong_alpha
    }
}

/// Per-user data rates in bits/s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UserRates(Vec<f64>);

impl UserRates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::invalid("rates", format!("rates must be finite and >= 0, got {bad}")));
        }
        Ok(UserRates(rates))
    }

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

/// Received SINR `P g G alpha / (P g G beta + sigma2)`.
///
/// `beta` is the strong partner's share for a weak user and 0 for a
/// strong user, whose weak-user interference is removed by SIC.
pub fn received_sinr(p_t: f64, gain: f64, g_mimo: f64, alpha: f64, beta: f64, sigma2: f64) -> Result<f64> {
    for (name, v) in [
        ("p_t", p_t),
        ("gain", gain),
        ("g_mimo", g_mimo),
        ("alpha", alpha),
        ("beta", beta),
    ] {
        if !(v >= 0.0) {
            return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
        }
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", format!("must be > 0, got {sigma2}")));
    }
    if alpha + beta > 1.0 + 1e-12 {
        return Err(Error::invalid("alpha + beta", format!("must be <= 1, got {}", alpha + beta)));
    }
    let rx = p_t * gain * g_mimo;
    Ok(rx * alpha / (rx * beta + sigma2))
}

/// Shannon rate `W log2(1 + SINR)`.
pub fn user_rate(w_bw: f64, sinr: f64) -> Result<f64> {
    if !(w_bw > 0.0) {
        return Err(Error::invalid("w_bw", format!("must be > 0, got {w_bw}")));
    }
    if !(sinr >= 0.0) {
        return Err(Error::invalid("sinr", format!("must be >= 0, got {sinr}")));
    }
    Ok(w_bw * sinr.ln_1p() / std::f64::consts::LN_2)
}

pub fn sum_rate(rates: &UserRates) -> f64 {
    rates.0.iter().sum()
}

/// Jain's index `(sum R)^2 / (N sum R^2)`; an all-zero vector yields 0.
pub fn jain_fairness(rates: &UserRates) -> f64 {
    let n = rates.0.len() as f64;
    let sum: f64 = rates.0.iter().sum();
    let sq: f64 = rates.0.iter().map(|r| r * r).sum();
    if sq == 0.0 {
        return 0.0;
    }
    sum * sum / (n * sq)
}

/// Upper bound on the strong user's share that keeps the weak user able
/// to reach `r_min` as the channel gain grows: `2^(-r_min / W)`.
pub fn feasible_strong_alpha_bound(r_min: f64, w_bw: f64) -> Result<f64> {
    if !(r_min >= 0.0) {
        return Err(Error::invalid("r_min", format!("must be >= 0, got {r_min}")));
    }
    if !(w_bw > 0.0) {
        return Err(Error::invalid("w_bw", format!("must be > 0, got {w_bw}")));
    }
    Ok((-r_min / w_bw).exp2())
}

/// `omega_r * sum_rate + omega_f * jain`.
pub fn weighted_objective(rates: &UserRates, omega_r: f64, omega_f: f64) -> Result<f64> {
    if !(omega_r >= 0.0 && omega_f >= 0.0) {
        return Err(Error::invalid(
            "objective weights",
            format!("must be >= 0, got ({omega_r}, {omega_f})"),
        ));
    }
    Ok(omega_r * sum_rate(rates) + omega_f * jain_fairness(rates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use proptest::prelude::*;

    fn rates(v: &[f64]) -> UserRates {
        UserRates::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sinr_edge_cases() {
        assert_eq!(received_sinr(1.0, 1e-6, 1.0, 0.0, 0.5, 1e-9).unwrap(), 0.0);
        // P g G alpha == sigma2 with no interference gives unity.
        assert_eq!(received_sinr(2.0, 0.5, 1.0, 0.25, 0.0, 0.25).unwrap(), 1.0);
        assert!(received_sinr(-1.0, 1.0, 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(received_sinr(1.0, 1.0, 1.0, 0.5, 0.0, 0.0).is_err());
        assert!(received_sinr(1.0, 1.0, 1.0, 0.7, 0.7, 1.0).is_err());
    }

    #[test]
    fn rate_closed_forms() {
        assert_eq!(user_rate(50e6, 0.0).unwrap(), 0.0);
        assert_eq!(user_rate(50e6, 1.0).unwrap(), 50e6);
        assert_eq!(user_rate(50e6, 3.0).unwrap(), 100e6);
        assert!(user_rate(0.0, 1.0).is_err());
        assert!(user_rate(1.0, -0.5).is_err());
    }

    #[test]
    fn sums_and_fairness() {
        let w = 50e6;
        assert_eq!(sum_rate(&rates(&[0.0; 4])), 0.0);
        assert_eq!(sum_rate(&rates(&[w; 4])), 4.0 * w);
        assert_eq!(jain_fairness(&rates(&[7.0; 4])), 1.0);
        assert_eq!(jain_fairness(&rates(&[3.0, 0.0, 0.0, 0.0])), 0.25);
        assert_eq!(jain_fairness(&rates(&[0.0; 4])), 0.0);
        assert!(UserRates::new(vec![1.0, -1.0]).is_err());
        assert!(UserRates::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn feasibility_bound() {
        let w = 2e9;
        assert_eq!(feasible_strong_alpha_bound(0.0, w).unwrap(), 1.0);
        assert_eq!(feasible_strong_alpha_bound(w, w).unwrap(), 0.5);
        assert_eq!(feasible_strong_alpha_bound(3.0 * w, w).unwrap(), 0.125);
    }

    #[test]
    fn objective_weights() {
        let w = 50e6;
        assert_eq!(weighted_objective(&rates(&[w, 0.0, 0.0, 0.0]), 1.0, 0.0).unwrap(), w);
        assert_eq!(weighted_objective(&rates(&[5.0; 4]), 0.0, 1.0).unwrap(), 1.0);
        assert!(weighted_objective(&rates(&[1.0]), -1.0, 0.0).is_err());
    }

    #[test]
    fn allocation_complement_and_clamp() {
        let a = ClusterAllocation::new(0.3, DEFAULT_ALPHA_BOUNDS).unwrap();
        assert_eq!(a.weak_alpha(), 1.0 - 0.3);
        assert!(ClusterAllocation::new(0.995, DEFAULT_ALPHA_BOUNDS).is_err());
        assert_eq!(ClusterAllocation::clamped(1.2, DEFAULT_ALPHA_BOUNDS).strong_alpha(), 0.99);
    }

    #[test]
    fn remark_bound_asymptotics() {
        // With gain far above the noise floor the weak user's rate at
        // alpha_weak = 1 - alpha tends to W log2(1/alpha); any alpha
        // strictly below the bound therefore clears r_min.
        let p = ChannelParams::mmwave();
        let w = p.bandwidth_hz;
        let gain = 1e6 * p.noise_w / (p.tx_power_w * p.mimo_gain());
        for se in [0.5, 1.0, 2.0, 2.5, 3.0] {
            let r_min = se * w;
            let bound = feasible_strong_alpha_bound(r_min, w).unwrap();
            let alpha = 0.99 * bound;
            let sinr = received_sinr(p.tx_power_w, gain, p.mimo_gain(), 1.0 - alpha, alpha, p.noise_w).unwrap();
            let rate = user_rate(w, sinr).unwrap();
            assert!(rate >= 0.99 * r_min, "se={se}: {rate} < {r_min}");
        }
    }

    proptest! {
        #[test]
        fn jain_scale_invariant_and_bounded(v in prop::collection::vec(1e-3f64..1e9, 1..9), c in 1e-6f64..1e6) {
            let r = rates(&v);
            let j = jain_fairness(&r);
            let n = v.len() as f64;
            prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12);
            let scaled = rates(&v.iter().map(|x| x * c).collect::<Vec<_>>());
            prop_assert!((jain_fairness(&scaled) - j).abs() < 1e-12);
        }

        #[test]
        fn sinr_monotone(g in 1e-10f64..1e-5, a in 0.01f64..0.5, b in 0.0f64..0.49, da in 1e-3f64..0.01) {
            let p = ChannelParams::sub6();
            let s = |g: f64, a: f64, b: f64, n: f64| received_sinr(p.tx_power_w, g, 1.0, a, b, n).unwrap();
            let base = s(g, a, b, p.noise_w);
            prop_assert!(s(g, a + da, b, p.noise_w) > base);
            prop_assert!(s(g * 1.5, a, b, p.noise_w) >= base);
            prop_assert!(s(g, a, b + da, p.noise_w) <= base);
            prop_assert!(s(g, a, b, p.noise_w * 2.0) < base);
        }

        #[test]
        fn sic_strong_user_wins(g_weak in 1e-10f64..1e-6, ratio in 1.0f64..100.0, alpha in 0.01f64..0.5) {
            let p = ChannelParams::sub6();
            let g_strong = g_weak * ratio;
            let strong = received_sinr(p.tx_power_w, g_strong, 1.0, alpha, 0.0, p.noise_w).unwrap();
            let weak_on_strong_gain = received_sinr(p.tx_power_w, g_strong, 1.0, 1.0 - alpha, alpha, p.noise_w).unwrap();
            // The weak user's SINR is capped by (1-alpha)/alpha; the strong one
            // is interference free. At these gains the strong side dominates.
            prop_assume!(p.tx_power_w * g_strong * alpha / p.noise_w > (1.0 - alpha) / alpha);
            prop_assert!(strong >= weak_on_strong_gain);
        }
    }
}
