//! C ABI over the rsac environments and trained policies.
//!
//! Conventions: opaque handles created by `*_new`/`*_load` and released by
//! the matching `*_free`; every fallible call returns an `int32_t` status
//! (`RSAC_OK` = 0, negative codes otherwise, readable via
//! `rsac_error_message`); all buffers are caller-allocated with lengths
//! passed explicitly. No call panics across the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rsac::checkpoint::load_checkpoint;
use rsac::env::{EnvId, Environment};
use rsac::envs::build_env;
use rsac::fault::{make_q_mode, AngleSource, DamageCase, DamageMode};
use rsac::rng::{derive, tags, Pcg32};
use rsac::sac::Policy;

pub const RSAC_OK: i32 = 0;
pub const RSAC_ERR_NULL: i32 = -1;
pub const RSAC_ERR_DIM: i32 = -2;
pub const RSAC_ERR_ARG: i32 = -3;
pub const RSAC_ERR_IO: i32 = -4;
pub const RSAC_ERR_CONTRACT: i32 = -5;
pub const RSAC_ERR_PANIC: i32 = -6;

/// Opaque environment handle.
pub struct RsacEnv {
    inner: Box<dyn Environment>,
}

/// Opaque policy handle with its own action-sampling stream.
pub struct RsacPolicy {
    policy: Policy,
    rng: Pcg32,
}

const VERSION: &str = concat!("rsac/", env!("CARGO_PKG_VERSION"), "\0");

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rsac_version() -> *const c_char {
    VERSION.as_ptr() as *const c_char
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn rsac_error_message(code: i32) -> *const c_char {
    let s: &'static str = match code {
        RSAC_OK => "ok\0",
        RSAC_ERR_NULL => "null pointer argument\0",
        RSAC_ERR_DIM => "buffer or vector dimension mismatch\0",
        RSAC_ERR_ARG => "invalid argument\0",
        RSAC_ERR_IO => "io or decode failure\0",
        RSAC_ERR_CONTRACT => "environment contract violation\0",
        RSAC_ERR_PANIC => "internal panic\0",
        _ => "unknown status code\0",
    };
    s.as_ptr() as *const c_char
}

fn guard(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => RSAC_ERR_PANIC,
    }
}

/// Create an environment: kind 0 = claw, 1 = kitty. On success writes the
/// new handle to `out`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_new(kind: i32, out: *mut *mut RsacEnv) -> i32 {
    guard(|| {
        if out.is_null() {
            return RSAC_ERR_NULL;
        }
        let id = match kind {
            0 => EnvId::Claw,
            1 => EnvId::Kitty,
            _ => return RSAC_ERR_ARG,
        };
        let handle = Box::new(RsacEnv {
            inner: build_env(id),
        });
        unsafe { *out = Box::into_raw(handle) };
        RSAC_OK
    })
}

/// Release an environment handle. NULL is a no-op.
///
/// # Safety
/// `env` must be a pointer returned by [`rsac_env_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_free(env: *mut RsacEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// # Safety
/// `env` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_n_joints(env: *const RsacEnv, out: *mut usize) -> i32 {
    guard(|| {
        if env.is_null() || out.is_null() {
            return RSAC_ERR_NULL;
        }
        unsafe { *out = (*env).inner.spec().n_joints };
        RSAC_OK
    })
}

/// # Safety
/// `env` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_obs_dim(env: *const RsacEnv, out: *mut usize) -> i32 {
    guard(|| {
        if env.is_null() || out.is_null() {
            return RSAC_ERR_NULL;
        }
        unsafe { *out = (*env).inner.spec().obs_dim };
        RSAC_OK
    })
}

/// Start an episode. `damaged`/`n_damaged` name the damaged joints;
/// `frozen_angles` may be NULL (angles sampled from the feasible ranges
/// using `seed`) or point to `n_damaged` explicit values in ascending joint
/// order. `mode` 0 = frozen, 1 = random-action. The initial observation is
/// written to `obs_out` (length `obs_len` == obs_dim).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_reset(
    env: *mut RsacEnv,
    damaged: *const u32,
    n_damaged: usize,
    frozen_angles: *const f64,
    mode: i32,
    seed: u64,
    obs_out: *mut f64,
    obs_len: usize,
) -> i32 {
    guard(|| {
        if env.is_null() || obs_out.is_null() || (damaged.is_null() && n_damaged > 0) {
            return RSAC_ERR_NULL;
        }
        let env = unsafe { &mut *env };
        let spec = env.inner.spec().clone();
        if obs_len != spec.obs_dim {
            return RSAC_ERR_DIM;
        }
        let mode = match mode {
            0 => DamageMode::Frozen,
            1 => DamageMode::RandomAction,
            _ => return RSAC_ERR_ARG,
        };
        let set: std::collections::BTreeSet<usize> = if n_damaged == 0 {
            Default::default()
        } else {
            unsafe { std::slice::from_raw_parts(damaged, n_damaged) }
                .iter()
                .map(|&j| j as usize)
                .collect()
        };
        if set.len() != n_damaged {
            return RSAC_ERR_ARG;
        }
        let case = DamageCase::new(set);
        let q = if frozen_angles.is_null() {
            let mut rng = Pcg32::new(derive(seed, tags::FROZEN_ANGLES), 31);
            make_q_mode(&case, AngleSource::Random(&mut rng), &spec, mode)
        } else {
            let angles = unsafe { std::slice::from_raw_parts(frozen_angles, n_damaged) };
            make_q_mode(&case, AngleSource::Explicit(angles), &spec, mode)
        };
        let q = match q {
            Ok(q) => q,
            Err(_) => return RSAC_ERR_ARG,
        };
        match env.inner.reset(q, seed) {
            Ok(obs) => {
                let flat = obs.to_vec();
                unsafe {
                    std::ptr::copy_nonoverlapping(flat.as_ptr(), obs_out, flat.len());
                }
                RSAC_OK
            }
            Err(_) => RSAC_ERR_CONTRACT,
        }
    })
}

/// Advance one step. Writes the next observation, reward, and the terminal
/// and success flags (0/1).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_step(
    env: *mut RsacEnv,
    action: *const f64,
    action_len: usize,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    terminal_out: *mut u8,
    success_out: *mut u8,
) -> i32 {
    guard(|| {
        if env.is_null()
            || action.is_null()
            || obs_out.is_null()
            || reward_out.is_null()
            || terminal_out.is_null()
            || success_out.is_null()
        {
            return RSAC_ERR_NULL;
        }
        let env = unsafe { &mut *env };
        let spec = env.inner.spec();
        if action_len != spec.n_joints || obs_len != spec.obs_dim {
            return RSAC_ERR_DIM;
        }
        let action = unsafe { std::slice::from_raw_parts(action, action_len) };
        match env.inner.step(action) {
            Ok(step) => {
                let flat = step.observation.to_vec();
                unsafe {
                    std::ptr::copy_nonoverlapping(flat.as_ptr(), obs_out, flat.len());
                    *reward_out = step.reward;
                    *terminal_out = step.terminal as u8;
                    *success_out = step.success as u8;
                }
                RSAC_OK
            }
            Err(rsac::env::EnvError::NonFiniteAction(_)) => RSAC_ERR_ARG,
            Err(_) => RSAC_ERR_CONTRACT,
        }
    })
}

/// The per-step task scalar (claw valve angle, kitty goal distance).
///
/// # Safety
/// `env` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rsac_env_task_scalar(env: *const RsacEnv, out: *mut f64) -> i32 {
    guard(|| {
        if env.is_null() || out.is_null() {
            return RSAC_ERR_NULL;
        }
        unsafe { *out = (*env).inner.task_scalar() };
        RSAC_OK
    })
}

/// Load a policy from a checkpoint file (NUL-terminated UTF-8 path).
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_load(path: *const c_char, out: *mut *mut RsacPolicy) -> i32 {
    guard(|| {
        if path.is_null() || out.is_null() {
            return RSAC_ERR_NULL;
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => return RSAC_ERR_ARG,
        };
        match load_checkpoint(Path::new(path)) {
            Ok(loaded) => {
                let handle = Box::new(RsacPolicy {
                    policy: loaded.policy(),
                    rng: Pcg32::new(0, 71),
                });
                unsafe { *out = Box::into_raw(handle) };
                RSAC_OK
            }
            Err(_) => RSAC_ERR_IO,
        }
    })
}

/// Release a policy handle. NULL is a no-op.
///
/// # Safety
/// `policy` must be a pointer returned by [`rsac_policy_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_free(policy: *mut RsacPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// # Safety
/// `policy` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_obs_dim(policy: *const RsacPolicy, out: *mut usize) -> i32 {
    guard(|| {
        if policy.is_null() || out.is_null() {
            return RSAC_ERR_NULL;
        }
        unsafe { *out = (*policy).policy.obs_dim };
        RSAC_OK
    })
}

/// # Safety
/// `policy` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_action_dim(
    policy: *const RsacPolicy,
    out: *mut usize,
) -> i32 {
    guard(|| {
        if policy.is_null() || out.is_null() {
            return RSAC_ERR_NULL;
        }
        unsafe { *out = (*policy).policy.n_joints };
        RSAC_OK
    })
}

/// NUL-terminated policy id string; caller frees with [`rsac_string_free`].
///
/// # Safety
/// `policy` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_id(policy: *const RsacPolicy) -> *mut c_char {
    if policy.is_null() {
        return std::ptr::null_mut();
    }
    let id = unsafe { &(*policy).policy.id };
    CString::new(id.as_str())
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// Free a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by [`rsac_policy_id`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsac_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Reseed the stochastic-action stream.
///
/// # Safety
/// `policy` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_seed(policy: *mut RsacPolicy, seed: u64) -> i32 {
    guard(|| {
        if policy.is_null() {
            return RSAC_ERR_NULL;
        }
        unsafe { (*policy).rng = Pcg32::new(derive(seed, tags::ACTION_NOISE), 71) };
        RSAC_OK
    })
}

/// Compute an action for a flat observation
/// [task features | joint sensors | q flags]. `deterministic` != 0 uses the
/// squashed mean; otherwise samples from the policy's stream.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rsac_policy_act(
    policy: *mut RsacPolicy,
    obs: *const f64,
    obs_len: usize,
    deterministic: u8,
    action_out: *mut f64,
    action_len: usize,
) -> i32 {
    guard(|| {
        if policy.is_null() || obs.is_null() || action_out.is_null() {
            return RSAC_ERR_NULL;
        }
        let handle = unsafe { &mut *policy };
        if obs_len != handle.policy.obs_dim || action_len != handle.policy.n_joints {
            return RSAC_ERR_DIM;
        }
        let mut view = unsafe { std::slice::from_raw_parts(obs, obs_len) }.to_vec();
        if !handle.policy.q_visible {
            let n = view.len();
            for f in &mut view[n - handle.policy.n_joints..] {
                *f = 0.0;
            }
        }
        match handle
            .policy
            .act_on_view(&view, deterministic != 0, &mut handle.rng)
        {
            Ok(action) => {
                unsafe {
                    std::ptr::copy_nonoverlapping(action.as_ptr(), action_out, action.len());
                }
                RSAC_OK
            }
            Err(_) => RSAC_ERR_ARG,
        }
    })
}
