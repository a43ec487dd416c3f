//! C ABI over `familyrl`.
//!
//! Conventions:
//! - Every fallible function returns an [`FrlStatus`] and writes results through
//!   out-pointers. On failure the message is available from
//!   [`frl_last_error_message`] on the same thread.
//! - Objects are opaque handles created by `*_new`/`*_parse`/`frl_train` and
//!   released by the matching `*_free`. Passing NULL to a free function is a no-op.
//! - Strings returned to the caller are owned by the caller and must be released
//!   with [`frl_string_free`].
//! - Panics never cross the boundary; they are reported as `FRL_STATUS_PANIC`.

use familyrl::bandit::{BanditConfig, BanditState};
use familyrl::family::{build_family, FamilySchedule, PolicyFamily};
use familyrl::harness::{actor_epsilon, behavior_probability, run_training, sequence_priority, HarnessConfig, TrainingRun};
use familyrl::mdp::{h_apply, h_inverse, SquashTransform};
use familyrl::metrics::{chns, hns, ScoreTriple};
use familyrl::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Dimension = 4,
    Divergence = 5,
    OutOfRange = 6,
    NotReady = 7,
    Config = 8,
    Parse = 9,
    Io = 10,
    Internal = 11,
    Panic = 12,
}

impl From<&Error> for FrlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::DivisionByZero(_)
            | Error::DegenerateBehaviorProbability(_)
            | Error::ScheduleDomain(_)
            | Error::UndefinedBaseline(_) => FrlStatus::Domain,
            Error::Dimension(_) | Error::Schema(_) => FrlStatus::Dimension,
            Error::Divergence(_) | Error::NoConvergence { .. } => FrlStatus::Divergence,
            Error::OutOfRange { .. } => FrlStatus::OutOfRange,
            Error::NotReady { .. } => FrlStatus::NotReady,
            Error::Config(_) | Error::Protocol(_) => FrlStatus::Config,
            Error::Parse(_) => FrlStatus::Parse,
            Error::Io(_) => FrlStatus::Io,
            Error::Internal(_) => FrlStatus::Internal,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(FrlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(FrlStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FrlStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics to a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside familyrl".into());
            FrlStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(FrlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(FrlStatus::Internal, "string contains an interior NUL".into()))
}

/// Message of the last failed call on this thread, or NULL. Release with [`frl_string_free`].
#[no_mangle]
pub extern "C" fn frl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn frl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- scalar functions ----

/// `h(x)` with the default epsilon.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_h(x: f64, out: *mut f64) -> FrlStatus {
    guard(|| write(out, h_apply(x, &SquashTransform::default())?, "out"))
}

/// `h^-1(x)` with the default epsilon.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_h_inverse(x: f64, out: *mut f64) -> FrlStatus {
    guard(|| write(out, h_inverse(x, &SquashTransform::default())?, "out"))
}

/// Human normalized score.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_hns(agent: f64, human: f64, random: f64, out: *mut f64) -> FrlStatus {
    guard(|| write(out, hns(&ScoreTriple { agent, human, random })?, "out"))
}

/// Capped human normalized score.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_chns(agent: f64, human: f64, random: f64, out: *mut f64) -> FrlStatus {
    guard(|| write(out, chns(&ScoreTriple { agent, human, random })?, "out"))
}

/// `eta max|d| + (1 - eta) mean|d|` over `len` TD errors.
///
/// # Safety
/// `td` must point to `len` readable doubles; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_sequence_priority(td: *const f64, len: usize, eta: f64, out: *mut f64) -> FrlStatus {
    guard(|| {
        if td.is_null() && len > 0 {
            return Err(null("td"));
        }
        let slice = if len == 0 { &[][..] } else { std::slice::from_raw_parts(td, len) };
        write(out, sequence_priority(slice, eta)?, "out")
    })
}

/// Exploration rate of actor `index` out of `num_actors`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_actor_epsilon(index: usize, num_actors: usize, base: f64, alpha: f64, out: *mut f64) -> FrlStatus {
    guard(|| write(out, actor_epsilon(index, num_actors, base, alpha)?, "out"))
}

/// Behavior probability of the taken action under epsilon-greedy.
#[no_mangle]
pub extern "C" fn frl_behavior_probability(is_greedy_action: bool, epsilon: f64, action_count: usize) -> f64 {
    behavior_probability(is_greedy_action, epsilon, action_count)
}

// ---- family ----

/// Opaque `(beta_j, gamma_j)` family.
pub struct FrlFamily(PolicyFamily);

/// Family of `num_policies` members from the default schedule.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_family_new(num_policies: usize, out: *mut *mut FrlFamily) -> FrlStatus {
    guard(|| {
        let family = build_family(&FamilySchedule::with_size(num_policies))?;
        write(out, Box::into_raw(Box::new(FrlFamily(family))), "out")
    })
}

/// # Safety
/// `family` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn frl_family_len(family: *const FrlFamily, out: *mut usize) -> FrlStatus {
    guard(|| write(out, handle(family, "family")?.0.len(), "out"))
}

/// # Safety
/// `family` must be a live handle; `beta` and `gamma` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn frl_family_get(family: *const FrlFamily, j: usize, beta: *mut f64, gamma: *mut f64) -> FrlStatus {
    guard(|| {
        let f = &handle(family, "family")?.0;
        if j >= f.len() {
            return Err(Error::OutOfRange { index: j, limit: f.len() }.into());
        }
        write(beta, f.beta(j), "beta")?;
        write(gamma, f.gamma(j), "gamma")
    })
}

/// # Safety
/// `family` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frl_family_free(family: *mut FrlFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

// ---- bandit ----

/// Opaque sliding-window bandit with its own random generator.
pub struct FrlBandit {
    state: BanditState,
    rng: ChaCha8Rng,
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_bandit_new(
    num_arms: usize,
    window: usize,
    epsilon: f64,
    bonus_beta: f64,
    seed: u64,
    out: *mut *mut FrlBandit,
) -> FrlStatus {
    guard(|| {
        let mut cfg = BanditConfig::new(num_arms, window, epsilon);
        cfg.bonus_beta = bonus_beta;
        let bandit = FrlBandit { state: BanditState::new(cfg)?, rng: ChaCha8Rng::seed_from_u64(seed) };
        write(out, Box::into_raw(Box::new(bandit)), "out")
    })
}

/// # Safety
/// `bandit` must be a live handle; `arm` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_bandit_select(bandit: *mut FrlBandit, arm: *mut usize) -> FrlStatus {
    guard(|| {
        let b = handle_mut(bandit, "bandit")?;
        let choice = b.state.select_arm(&mut b.rng);
        write(arm, choice, "arm")
    })
}

/// # Safety
/// `bandit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn frl_bandit_update(bandit: *mut FrlBandit, arm: usize, reward: f64) -> FrlStatus {
    guard(|| Ok(handle_mut(bandit, "bandit")?.state.update(arm, reward)?))
}

/// # Safety
/// `bandit` must be a live handle; `arm` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_bandit_greedy_arm(bandit: *const FrlBandit, arm: *mut usize) -> FrlStatus {
    guard(|| write(arm, handle(bandit, "bandit")?.state.greedy_arm(), "arm"))
}

/// # Safety
/// `bandit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frl_bandit_free(bandit: *mut FrlBandit) {
    if !bandit.is_null() {
        drop(Box::from_raw(bandit));
    }
}

// ---- configuration and training ----

/// Opaque run configuration.
pub struct FrlConfig(HarnessConfig);

/// Default configuration.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_config_new(out: *mut *mut FrlConfig) -> FrlStatus {
    guard(|| write(out, Box::into_raw(Box::new(FrlConfig(HarnessConfig::default()))), "out"))
}

/// Configuration parsed from `key = value` text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_config_parse(text: *const c_char, out: *mut *mut FrlConfig) -> FrlStatus {
    guard(|| {
        let cfg = HarnessConfig::parse(str_arg(text, "text")?)?;
        write(out, Box::into_raw(Box::new(FrlConfig(cfg))), "out")
    })
}

/// Sets one key. The whole configuration is validated again at training time.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn frl_config_set(config: *mut FrlConfig, key: *const c_char, value: *const c_char) -> FrlStatus {
    guard(|| {
        let cfg = handle_mut(config, "config")?;
        Ok(cfg.0.set(str_arg(key, "key")?, str_arg(value, "value")?)?)
    })
}

/// # Safety
/// `config` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frl_config_free(config: *mut FrlConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Opaque result of a training run.
pub struct FrlRun(TrainingRun);

/// Trains with `config` and `seed`; the configuration is left unchanged.
///
/// # Safety
/// `config` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_train(config: *const FrlConfig, seed: u64, out: *mut *mut FrlRun) -> FrlStatus {
    guard(|| {
        let mut cfg = handle(config, "config")?.0.clone();
        cfg.seed = seed;
        let run = run_training(&cfg)?;
        write(out, Box::into_raw(Box::new(FrlRun(run))), "out")
    })
}

/// Number of family members evaluated at the end of the run.
///
/// # Safety
/// `run` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_run_num_arms(run: *const FrlRun, out: *mut usize) -> FrlStatus {
    guard(|| write(out, handle(run, "run")?.0.final_arms.len(), "out"))
}

/// Mean extrinsic return of `arm` in the closing evaluation.
///
/// # Safety
/// `run` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_run_final_return(run: *const FrlRun, arm: usize, out: *mut f64) -> FrlStatus {
    guard(|| {
        let r = &handle(run, "run")?.0;
        let v = r.final_return(arm).ok_or(Error::OutOfRange { index: arm, limit: r.final_arms.len() })?;
        write(out, v, "out")
    })
}

/// Environment steps across actors, evaluator and closing evaluation.
///
/// # Safety
/// `run` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_run_total_env_steps(run: *const FrlRun, out: *mut u64) -> FrlStatus {
    guard(|| write(out, handle(run, "run")?.0.total_env_steps(), "out"))
}

/// Metrics CSV of the run. Release the string with [`frl_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn frl_run_metrics_csv(run: *const FrlRun, out: *mut *mut c_char) -> FrlStatus {
    guard(|| {
        let csv = handle(run, "run")?.0.metrics_csv()?;
        write(out, c_string(csv)?, "out")
    })
}

/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frl_run_free(run: *mut FrlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
