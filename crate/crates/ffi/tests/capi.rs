//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! explicit lengths, status codes.

use std::ffi::CString;

use rsac::checkpoint::{save_checkpoint, SaveContext};
use rsac::env::Environment;
use rsac::envs::claw::ClawValveEnv;
use rsac::sac::{Learner, SacConfig};

use rsac_ffi::*;

fn make_checkpoint(dir: &std::path::Path) -> std::path::PathBuf {
    let env = ClawValveEnv::default_env();
    let learner = Learner::new(
        env.spec(),
        SacConfig {
            hidden: vec![16, 16],
            ..SacConfig::default()
        },
        7,
        true,
    );
    let path = dir.join("policy.rsnap");
    let ctx = SaveContext {
        mode: "rsac".into(),
        policy_id: "capi-test".into(),
        ..SaveContext::default()
    };
    save_checkpoint(&path, &learner, &ctx, false, false).unwrap();
    path
}

#[test]
fn version_and_error_strings_are_static_c_strings() {
    let v = rsac_version();
    assert!(!v.is_null());
    let s = unsafe { std::ffi::CStr::from_ptr(v) }.to_str().unwrap();
    assert!(s.starts_with("rsac/"));
    for code in [0, -1, -2, -3, -4, -5, -6, 42] {
        let m = rsac_error_message(code);
        assert!(!m.is_null());
        assert!(!unsafe { std::ffi::CStr::from_ptr(m) }
            .to_str()
            .unwrap()
            .is_empty());
    }
}

#[test]
fn env_lifecycle_runs_an_episode() {
    let mut env: *mut RsacEnv = std::ptr::null_mut();
    assert_eq!(unsafe { rsac_env_new(0, &mut env) }, RSAC_OK);
    assert!(!env.is_null());

    let mut n_joints = 0usize;
    let mut obs_dim = 0usize;
    unsafe {
        assert_eq!(rsac_env_n_joints(env, &mut n_joints), RSAC_OK);
        assert_eq!(rsac_env_obs_dim(env, &mut obs_dim), RSAC_OK);
    }
    assert_eq!(n_joints, 9);
    assert_eq!(obs_dim, 21);

    // Damage joint 2 at an explicit angle, run a few steps.
    let damaged = [2u32];
    let angles = [0.4f64];
    let mut obs = vec![0.0f64; obs_dim];
    let status = unsafe {
        rsac_env_reset(
            env,
            damaged.as_ptr(),
            1,
            angles.as_ptr(),
            0,
            123,
            obs.as_mut_ptr(),
            obs_dim,
        )
    };
    assert_eq!(status, RSAC_OK);
    // Sensor of the damaged joint reads 0, its q flag reads 1.
    assert_eq!(obs[3 + 2], 0.0);
    assert_eq!(obs[3 + n_joints + 2], 1.0);

    let action = vec![0.05f64; n_joints];
    let mut reward = 0.0f64;
    let mut terminal = 0u8;
    let mut success = 0u8;
    for _ in 0..5 {
        let status = unsafe {
            rsac_env_step(
                env,
                action.as_ptr(),
                n_joints,
                obs.as_mut_ptr(),
                obs_dim,
                &mut reward,
                &mut terminal,
                &mut success,
            )
        };
        assert_eq!(status, RSAC_OK);
        assert!(reward.is_finite());
        assert_eq!(terminal, 0);
    }
    let mut scalar = f64::NAN;
    unsafe {
        assert_eq!(rsac_env_task_scalar(env, &mut scalar), RSAC_OK);
    }
    assert!(scalar.is_finite());
    unsafe { rsac_env_free(env) };
}

#[test]
fn dimension_and_argument_errors_are_reported() {
    let mut env: *mut RsacEnv = std::ptr::null_mut();
    assert_eq!(unsafe { rsac_env_new(7, &mut env) }, RSAC_ERR_ARG);
    assert_eq!(unsafe { rsac_env_new(1, &mut env) }, RSAC_OK);
    let mut obs = vec![0.0f64; 3];
    // Wrong obs buffer size.
    let status = unsafe {
        rsac_env_reset(env, std::ptr::null(), 0, std::ptr::null(), 0, 1, obs.as_mut_ptr(), 3)
    };
    assert_eq!(status, RSAC_ERR_DIM);
    // Step before reset.
    let mut obs = vec![0.0f64; 27];
    let action = [0.0f64; 12];
    let (mut r, mut t, mut s) = (0.0f64, 0u8, 0u8);
    let status = unsafe {
        rsac_env_step(env, action.as_ptr(), 12, obs.as_mut_ptr(), 27, &mut r, &mut t, &mut s)
    };
    assert_eq!(status, RSAC_ERR_CONTRACT);
    assert_eq!(
        unsafe { rsac_env_task_scalar(std::ptr::null(), &mut r) },
        RSAC_ERR_NULL
    );
    unsafe { rsac_env_free(env) };
}

#[test]
fn policy_load_act_matches_native_policy() {
    let dir = tempfile::tempdir().unwrap();
    let path = make_checkpoint(dir.path());

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut policy: *mut RsacPolicy = std::ptr::null_mut();
    assert_eq!(
        unsafe { rsac_policy_load(c_path.as_ptr(), &mut policy) },
        RSAC_OK
    );

    let mut obs_dim = 0usize;
    let mut act_dim = 0usize;
    unsafe {
        assert_eq!(rsac_policy_obs_dim(policy, &mut obs_dim), RSAC_OK);
        assert_eq!(rsac_policy_action_dim(policy, &mut act_dim), RSAC_OK);
    }
    assert_eq!((obs_dim, act_dim), (21, 9));

    let id = unsafe { rsac_policy_id(policy) };
    assert_eq!(
        unsafe { std::ffi::CStr::from_ptr(id) }.to_str().unwrap(),
        "capi-test"
    );
    unsafe { rsac_string_free(id) };

    let obs: Vec<f64> = (0..obs_dim).map(|i| (i as f64 * 0.37).sin() * 0.5).collect();
    let mut action = vec![0.0f64; act_dim];
    let status = unsafe {
        rsac_policy_act(policy, obs.as_ptr(), obs_dim, 1, action.as_mut_ptr(), act_dim)
    };
    assert_eq!(status, RSAC_OK);

    // Native comparison.
    let native = rsac::checkpoint::load_checkpoint(&path).unwrap().policy();
    let mut rng = rsac::rng::Pcg32::new(0, 0);
    let expected = native.act_on_view(&obs, true, &mut rng).unwrap();
    assert_eq!(action, expected);

    // Stochastic mode is reproducible under reseeding.
    unsafe { rsac_policy_seed(policy, 42) };
    let mut a1 = vec![0.0f64; act_dim];
    unsafe {
        rsac_policy_act(policy, obs.as_ptr(), obs_dim, 0, a1.as_mut_ptr(), act_dim);
    }
    unsafe { rsac_policy_seed(policy, 42) };
    let mut a2 = vec![0.0f64; act_dim];
    unsafe {
        rsac_policy_act(policy, obs.as_ptr(), obs_dim, 0, a2.as_mut_ptr(), act_dim);
    }
    assert_eq!(a1, a2);
    assert_ne!(a1, expected);

    // Wrong sizes are rejected.
    let status = unsafe {
        rsac_policy_act(policy, obs.as_ptr(), obs_dim - 1, 1, action.as_mut_ptr(), act_dim)
    };
    assert_eq!(status, RSAC_ERR_DIM);
    unsafe { rsac_policy_free(policy) };
}

#[test]
fn loading_garbage_fails_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.rsnap");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut policy: *mut RsacPolicy = std::ptr::null_mut();
    assert_eq!(
        unsafe { rsac_policy_load(c_path.as_ptr(), &mut policy) },
        RSAC_ERR_IO
    );
    assert!(policy.is_null());
}
