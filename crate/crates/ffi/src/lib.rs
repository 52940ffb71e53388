//! C ABI over the `uavnoma` simulator and Q-network.
//!
//! Every function returns a [`UavnomaStatus`]; on failure the message is
//! available from [`uavnoma_last_error`] on the same thread. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::slice;

use uavnoma::channel::{self, LinkMode, Spectrum};
use uavnoma::config::Config;
use uavnoma::env::{Environment, RewardWeights, Scenario};
use uavnoma::nn::QNetwork;
use uavnoma::noma::{self, UserRates};
use uavnoma::rng::{self, Stream, StreamRng};
use uavnoma::{agent, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavnomaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Checkpoint = 5,
    Config = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavnomaSpectrum {
    MmWave = 0,
    Sub6 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavnomaLinkMode {
    AlwaysLos = 0,
    Expected = 1,
    BernoulliPerStep = 2,
    BernoulliPerEpisode = 3,
}

/// Environment plus the random stream that drives it.
pub struct UavnomaEnv {
    env: Environment,
    rng: StreamRng,
}

pub struct UavnomaNet {
    net: QNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> UavnomaStatus {
    match err {
        Error::ShapeMismatch { .. } | Error::ActionOutOfRange { .. } => UavnomaStatus::ShapeMismatch,
        Error::Io { .. } => UavnomaStatus::Io,
        Error::Checkpoint { .. } => UavnomaStatus::Checkpoint,
        Error::Config(_) => UavnomaStatus::Config,
        _ => UavnomaStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (UavnomaStatus, String)>) -> UavnomaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            UavnomaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UavnomaStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (UavnomaStatus, String)>;
}

impl<T> IntoFfi<T> for uavnoma::Result<T> {
    fn ffi(self) -> Result<T, (UavnomaStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (UavnomaStatus, String) {
    (UavnomaStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (UavnomaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn output<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], (UavnomaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err((
            UavnomaStatus::BufferTooSmall,
            format!("`{what}` holds {len} values, need {need}"),
        ));
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

/// # Safety
/// `p` must be null or valid for one write.
unsafe fn put<T>(p: *mut T, v: T, what: &str) -> Result<(), (UavnomaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    *p = v;
    Ok(())
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (UavnomaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (UavnomaStatus::InvalidArgument, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uavnoma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn uavnoma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Elevation angle (radians) of a UAV at `(x, y, h)` seen from `(ux, uy)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_elevation_angle(x: f64, y: f64, h: f64, ux: f64, uy: f64, out: *mut f64) -> UavnomaStatus {
    guard(|| put(out, channel::elevation_angle([x, y, h], [ux, uy]).ffi()?, "out"))
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_received_sinr(
    p_t: f64,
    gain: f64,
    g_mimo: f64,
    alpha: f64,
    beta: f64,
    sigma2: f64,
    out: *mut f64,
) -> UavnomaStatus {
    guard(|| put(out, noma::received_sinr(p_t, gain, g_mimo, alpha, beta, sigma2).ffi()?, "out"))
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_user_rate(w_bw: f64, sinr: f64, out: *mut f64) -> UavnomaStatus {
    guard(|| put(out, noma::user_rate(w_bw, sinr).ffi()?, "out"))
}

/// # Safety
/// `rates` must be valid for `n` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_jain_fairness(rates: *const f64, n: usize, out: *mut f64) -> UavnomaStatus {
    guard(|| {
        let r = UserRates::new(input(rates, n, "rates")?.to_vec()).ffi()?;
        put(out, noma::jain_fairness(&r), "out")
    })
}

fn boxed_env(scenario: Scenario, weights: RewardWeights, out: *mut *mut UavnomaEnv) -> Result<(), (UavnomaStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let env = Environment::new(scenario, weights).ffi()?;
    let handle = Box::new(UavnomaEnv {
        env,
        rng: rng::stream(0, Stream::Env),
    });
    // SAFETY: checked non-null above.
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Default four-user environment for a band, with the band's default
/// reward weights and `r_min` in bits/s.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_new_default(
    spectrum: UavnomaSpectrum,
    link_mode: UavnomaLinkMode,
    r_min: f64,
    out: *mut *mut UavnomaEnv,
) -> UavnomaStatus {
    guard(|| {
        let spectrum = match spectrum {
            UavnomaSpectrum::MmWave => Spectrum::MmWave,
            UavnomaSpectrum::Sub6 => Spectrum::Sub6,
        };
        let scenario = Scenario {
            link_mode: match link_mode {
                UavnomaLinkMode::AlwaysLos => LinkMode::AlwaysLoS,
                UavnomaLinkMode::Expected => LinkMode::Expected,
                UavnomaLinkMode::BernoulliPerStep => LinkMode::BernoulliPerStep,
                UavnomaLinkMode::BernoulliPerEpisode => LinkMode::BernoulliPerEpisode,
            },
            r_min,
            ..Scenario::default_for(spectrum)
        };
        let weights = match spectrum {
            Spectrum::Sub6 => RewardWeights::sub6_los(),
            Spectrum::MmWave if r_min > 0.0 => RewardWeights::mmwave_min_rate(),
            Spectrum::MmWave => RewardWeights::mmwave_rate(),
        };
        boxed_env(scenario, weights, out)
    })
}

/// Environment described by a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_from_config(path: *const c_char, out: *mut *mut UavnomaEnv) -> UavnomaStatus {
    guard(|| {
        let cfg = Config::from_file(&path_arg(path, "path")?, &[]).ffi()?;
        boxed_env(cfg.train.scenario, cfg.train.weights, out)
    })
}

/// # Safety
/// `env` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_free(env: *mut UavnomaEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation length; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_state_len(env: *const UavnomaEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.state_len())
}

/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_action_count(env: *const UavnomaEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.action_spec().count)
}

/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_user_count(env: *const UavnomaEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.scenario().n_users())
}

/// Reseeds the environment's random stream and resets it, writing the
/// initial observation to `state` (capacity `state_cap`).
///
/// # Safety
/// `env` must be a live handle and `state` valid for `state_cap` writes.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_reset(env: *mut UavnomaEnv, seed: u64, state: *mut f64, state_cap: usize) -> UavnomaStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        let dst = output(state, state_cap, e.env.state_len(), "state")?;
        e.rng = rng::stream(seed, Stream::Env);
        let s = e.env.reset(&mut e.rng).ffi()?;
        dst.copy_from_slice(s.as_slice());
        Ok(())
    })
}

/// Applies `action`, writing the next observation, the reward and the
/// per-user rates (bits/s). `rates` may be null to skip them.
///
/// # Safety
/// `env` must be a live handle; `state` valid for `state_cap` writes,
/// `reward` for one write, and `rates` null or valid for `rates_cap`.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_step(
    env: *mut UavnomaEnv,
    action: usize,
    state: *mut f64,
    state_cap: usize,
    reward: *mut f64,
    rates: *mut f64,
    rates_cap: usize,
) -> UavnomaStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        let dst = output(state, state_cap, e.env.state_len(), "state")?;
        if reward.is_null() {
            return Err(null("reward"));
        }
        let n_users = e.env.scenario().n_users();
        let rate_dst = if rates.is_null() {
            None
        } else {
            Some(output(rates, rates_cap, n_users, "rates")?)
        };
        let out = e.env.step(action, &mut e.rng).ffi()?;
        dst.copy_from_slice(out.state.as_slice());
        *reward = out.reward;
        if let Some(r) = rate_dst {
            r.copy_from_slice(&out.info.rates);
        }
        Ok(())
    })
}

/// Current UAV position `(x, y, h)` in metres.
///
/// # Safety
/// `env` must be a live handle and `xyz` valid for three writes.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_env_uav_position(env: *const UavnomaEnv, xyz: *mut f64) -> UavnomaStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        output(xyz, 3, 3, "xyz")?.copy_from_slice(&e.env.snapshot().uav);
        Ok(())
    })
}

/// Loads a checkpoint written by the `uavnoma` binary.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_net_load(path: *const c_char, out: *mut *mut UavnomaNet) -> UavnomaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = QNetwork::load(&path_arg(path, "path")?).ffi()?;
        *out = Box::into_raw(Box::new(UavnomaNet { net }));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_net_free(net: *mut UavnomaNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_net_input_dim(net: *const UavnomaNet) -> usize {
    net.as_ref().map_or(0, |n| n.net.input_dim())
}

/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_net_action_count(net: *const UavnomaNet) -> usize {
    net.as_ref().map_or(0, |n| n.net.n_actions())
}

/// Q-values of one state.
///
/// # Safety
/// `net` must be a live handle, `state` valid for `state_len` reads and
/// `q` for `q_cap` writes.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_net_q_values(
    net: *const UavnomaNet,
    state: *const f64,
    state_len: usize,
    q: *mut f64,
    q_cap: usize,
) -> UavnomaStatus {
    guard(|| {
        let n = &net.as_ref().ok_or_else(|| null("net"))?.net;
        let s = input(state, state_len, "state")?;
        if state_len != n.input_dim() {
            return Err((
                UavnomaStatus::ShapeMismatch,
                format!("state has {state_len} values, network expects {}", n.input_dim()),
            ));
        }
        let dst = output(q, q_cap, n.n_actions(), "q")?;
        dst.copy_from_slice(&n.q_values(s).ffi()?);
        Ok(())
    })
}

/// Greedy action for one state; ties go to the lowest index.
///
/// # Safety
/// `net` must be a live handle, `state` valid for `state_len` reads and
/// `action` for one write.
#[no_mangle]
pub unsafe extern "C" fn uavnoma_net_greedy_action(
    net: *const UavnomaNet,
    state: *const f64,
    state_len: usize,
    action: *mut usize,
) -> UavnomaStatus {
    guard(|| {
        let n = &net.as_ref().ok_or_else(|| null("net"))?.net;
        let s = input(state, state_len, "state")?;
        put(action, agent::greedy_action(n, s).ffi()?, "action")
    })
}
