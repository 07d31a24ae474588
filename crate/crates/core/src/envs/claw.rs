//! ClawValve: three 3-link planar fingers turning a damped valve.
//!
//! The dynamics are declared closed-form so every step has a hand-checkable
//! oracle: joints track commanded deltas exactly (rate-limited by the action
//! clip), fingertip velocities follow from forward kinematics, and any
//! fingertip inside the grip annulus feeds its tangential velocity component
//! into the valve, which integrates with viscous damping.

use serde::{Deserialize, Serialize};

use crate::env::{
    clip_action, EnvError, EnvObservation, EnvSpec, Environment, EpisodeState, StepResult,
    SuccessPredicateId,
};
use crate::fault::{mask_action, mask_observation, DamageMode, JointWorkingState};
use crate::rng::{derive, Pcg32};

pub const FINGERS: usize = 3;
pub const JOINTS_PER_FINGER: usize = 3;
pub const N_JOINTS: usize = FINGERS * JOINTS_PER_FINGER;

/// Committed constants; see `assets/claw_env.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClawParams {
    pub n_joints: usize,
    pub dt: f64,
    pub episode_horizon: usize,
    pub max_damaged: usize,
    pub base_radius: f64,
    pub link_lengths: [f64; JOINTS_PER_FINGER],
    pub joint_limit: f64,
    pub home_pose: [f64; JOINTS_PER_FINGER],
    pub annulus_inner: f64,
    pub annulus_outer: f64,
    pub coupling: f64,
    pub damping: f64,
    pub valve_stop: f64,
    pub target_angle: f64,
    pub success_threshold: f64,
    pub valve_init_jitter: f64,
    pub action_limit: f64,
    pub feasible_frozen_fraction: f64,
    pub success_bonus: f64,
}

pub const CLAW_PARAMS_TOML: &str = include_str!("../../assets/claw_env.toml");

impl ClawParams {
    /// The committed defaults every oracle in the repo is pinned to.
    pub fn committed() -> Self {
        toml::from_str(CLAW_PARAMS_TOML).expect("committed claw_env.toml must parse")
    }

    fn to_spec(&self) -> EnvSpec {
        let half = self.joint_limit * self.feasible_frozen_fraction;
        EnvSpec {
            id: "claw".to_string(),
            n_joints: self.n_joints,
            action_low: vec![-self.action_limit; self.n_joints],
            action_high: vec![self.action_limit; self.n_joints],
            task_feature_dim: 3,
            obs_dim: 3 + 2 * self.n_joints,
            episode_horizon: self.episode_horizon,
            success_predicate: SuccessPredicateId::ValveTurned,
            feasible_frozen_ranges: vec![(-half, half); self.n_joints],
            dt: self.dt,
            max_damaged: self.max_damaged,
            reward_low: -(self.valve_stop + self.target_angle) / std::f64::consts::PI,
            reward_high: self.success_bonus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClawValveState {
    pub joint_angles: Vec<f64>,
    pub valve_angle: f64,
    pub valve_velocity: f64,
    pub target_angle: f64,
}

pub struct ClawValveEnv {
    params: ClawParams,
    spec: EnvSpec,
    state: ClawValveState,
    q: Option<JointWorkingState>,
    episode: EpisodeState,
    mask_rng: Pcg32,
}

impl ClawValveEnv {
    pub fn new(params: ClawParams) -> Self {
        assert_eq!(params.n_joints, N_JOINTS, "claw has 3 fingers x 3 joints");
        let spec = params.to_spec();
        spec.validate().expect("claw spec consistent");
        ClawValveEnv {
            params,
            spec,
            state: ClawValveState {
                joint_angles: vec![0.0; N_JOINTS],
                valve_angle: 0.0,
                valve_velocity: 0.0,
                target_angle: 0.0,
            },
            q: None,
            episode: EpisodeState::default(),
            mask_rng: Pcg32::new(0, 0),
        }
    }

    pub fn default_env() -> Self {
        ClawValveEnv::new(ClawParams::committed())
    }

    pub fn params(&self) -> &ClawParams {
        &self.params
    }

    pub fn state(&self) -> &ClawValveState {
        &self.state
    }

    /// Home joint configuration: the same flexion on every finger.
    pub fn home_pose(params: &ClawParams) -> Vec<f64> {
        let mut pose = Vec::with_capacity(N_JOINTS);
        for _ in 0..FINGERS {
            pose.extend_from_slice(&params.home_pose);
        }
        pose
    }

    /// Planar fingertip position of one finger given the 9-vector of angles.
    pub fn fingertip(params: &ClawParams, joint_angles: &[f64], finger: usize) -> (f64, f64) {
        let phi = std::f64::consts::FRAC_PI_2
            + finger as f64 * std::f64::consts::TAU / FINGERS as f64;
        let (mut x, mut y) = (
            params.base_radius * phi.cos(),
            params.base_radius * phi.sin(),
        );
        let mut heading = phi + std::f64::consts::PI;
        for k in 0..JOINTS_PER_FINGER {
            heading += joint_angles[finger * JOINTS_PER_FINGER + k];
            x += params.link_lengths[k] * heading.cos();
            y += params.link_lengths[k] * heading.sin();
        }
        (x, y)
    }

    fn observation(&self) -> EnvObservation {
        let q = self.q.as_ref().expect("episode active");
        let sensors = mask_observation(q, &self.state.joint_angles).expect("dims fixed");
        EnvObservation {
            task_features: vec![
                self.state.valve_angle,
                self.state.valve_velocity,
                self.state.target_angle - self.state.valve_angle,
            ],
            joint_sensors: sensors,
            q_flags: q.flags(),
        }
    }

    /// One step of the declared valve update given old/new fingertips.
    /// Exposed for the closed-form single-step oracle in tests.
    pub fn valve_update(
        params: &ClawParams,
        valve_angle: f64,
        valve_velocity: f64,
        tips_before: &[(f64, f64)],
        tips_after: &[(f64, f64)],
    ) -> (f64, f64) {
        let mut tangential_sum = 0.0;
        for (before, after) in tips_before.iter().zip(tips_after) {
            let r = (after.0 * after.0 + after.1 * after.1).sqrt();
            if r >= params.annulus_inner && r <= params.annulus_outer && r > 1e-12 {
                let vx = (after.0 - before.0) / params.dt;
                let vy = (after.1 - before.1) / params.dt;
                // Unit tangent (counterclockwise) at the contact point.
                let (tx, ty) = (-after.1 / r, after.0 / r);
                tangential_sum += vx * tx + vy * ty;
            }
        }
        let acc = params.coupling * tangential_sum - params.damping * valve_velocity;
        let mut velocity = valve_velocity + params.dt * acc;
        let mut angle = valve_angle + params.dt * velocity;
        if angle > params.valve_stop {
            angle = params.valve_stop;
            velocity = 0.0;
        } else if angle < -params.valve_stop {
            angle = -params.valve_stop;
            velocity = 0.0;
        }
        (angle, velocity)
    }
}

impl Environment for ClawValveEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, q: JointWorkingState, seed: u64) -> Result<EnvObservation, EnvError> {
        if q.n_joints() != N_JOINTS {
            return Err(EnvError::ActionDimension {
                expected: N_JOINTS,
                got: q.n_joints(),
            });
        }
        let mut init_rng = Pcg32::new(derive(seed, 0xC1A0), 1);
        self.mask_rng = Pcg32::new(derive(seed, 0xC1A1), 2);
        let mut angles = Self::home_pose(&self.params);
        for (i, angle) in angles.iter_mut().enumerate() {
            if q.is_damaged(i) {
                *angle = q.frozen_angle()[i];
            }
        }
        self.state = ClawValveState {
            joint_angles: angles,
            valve_angle: init_rng
                .uniform_in(-self.params.valve_init_jitter, self.params.valve_init_jitter),
            valve_velocity: 0.0,
            target_angle: self.params.target_angle,
        };
        self.q = Some(q);
        self.episode.start();
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.episode.check_step(&self.spec, action)?;
        let q = self.q.clone().expect("episode active");

        let clipped = clip_action(action, &self.spec.action_low, &self.spec.action_high);
        let masked = mask_action(
            &q,
            &clipped,
            &self.spec.action_low,
            &self.spec.action_high,
            &mut self.mask_rng,
        )?;

        let tips_before: Vec<(f64, f64)> = (0..FINGERS)
            .map(|f| Self::fingertip(&self.params, &self.state.joint_angles, f))
            .collect();

        let lim = self.params.joint_limit;
        let mut new_angles = self.state.joint_angles.clone();
        for i in 0..N_JOINTS {
            if q.is_damaged(i) && q.mode() == DamageMode::Frozen {
                // Pinned kinematically: angle exact, zero velocity.
                new_angles[i] = q.frozen_angle()[i];
            } else {
                new_angles[i] = (new_angles[i] + masked[i]).clamp(-lim, lim);
            }
        }

        let tips_after: Vec<(f64, f64)> = (0..FINGERS)
            .map(|f| Self::fingertip(&self.params, &new_angles, f))
            .collect();

        let (valve_angle, valve_velocity) = Self::valve_update(
            &self.params,
            self.state.valve_angle,
            self.state.valve_velocity,
            &tips_before,
            &tips_after,
        );

        self.state.joint_angles = new_angles;
        self.state.valve_angle = valve_angle;
        self.state.valve_velocity = valve_velocity;

        let success_now = valve_angle > self.params.success_threshold;
        self.episode.finish_step(&self.spec, success_now, false);

        let reward = -(valve_angle - self.state.target_angle).abs() / std::f64::consts::PI
            + if self.episode.success_latched {
                self.params.success_bonus
            } else {
                0.0
            };

        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.episode.terminal,
            success: self.episode.success_latched,
        })
    }

    fn task_scalar(&self) -> f64 {
        self.state.valve_angle
    }

    fn current_q(&self) -> Option<&JointWorkingState> {
        self.q.as_ref()
    }
}

/// Two-link inverse kinematics in the finger's base frame (third joint held
/// straight so the distal links act as one). `gamma` is the bearing of the
/// target from the inward axis, `d` its distance from the finger base.
pub fn finger_ik(params: &ClawParams, d: f64, gamma: f64) -> (f64, f64) {
    let l1 = params.link_lengths[0];
    let l2 = params.link_lengths[1] + params.link_lengths[2];
    let c2 = ((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let q2 = -c2.acos();
    let q1 = gamma - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    (q1, q2)
}

/// Reference scripted three-finger gait: grip the annulus, sweep it
/// counterclockwise, retract toward the base (out of the annulus), swing
/// back, re-insert. Used as the solvability fixture for the undamaged task.
pub fn scripted_gait_action(params: &ClawParams, t: usize, joint_angles: &[f64]) -> Vec<f64> {
    const PERIOD: usize = 30;
    const GAMMA_MAX: f64 = 0.35;
    const D_GRIP: f64 = 0.12; // fingertip in the annulus
    const D_PARK: f64 = 0.075; // fingertip pulled inside the annulus ring

    let mut actions = Vec::with_capacity(N_JOINTS);
    for finger in 0..FINGERS {
        let phase = (t + finger * (PERIOD / FINGERS)) % PERIOD;
        // Sweeping the bearing from +GAMMA_MAX to -GAMMA_MAX drives the
        // valve counterclockwise (toward the target).
        let (gamma, d) = match phase {
            0..=11 => {
                let s = phase as f64 / 11.0;
                (GAMMA_MAX - 2.0 * GAMMA_MAX * s, D_GRIP)
            }
            12..=17 => {
                let s = (phase - 12) as f64 / 5.0;
                (-GAMMA_MAX, D_GRIP + (D_PARK - D_GRIP) * s)
            }
            18..=23 => {
                let s = (phase - 18) as f64 / 5.0;
                (-GAMMA_MAX + 2.0 * GAMMA_MAX * s, D_PARK)
            }
            _ => {
                let s = (phase - 24) as f64 / 5.0;
                (GAMMA_MAX, D_PARK + (D_GRIP - D_PARK) * s)
            }
        };
        let (q1, q2) = finger_ik(params, d, gamma);
        for (i, target) in [q1, q2, 0.0].into_iter().enumerate() {
            let current = joint_angles[finger * JOINTS_PER_FINGER + i];
            actions.push((target - current).clamp(-params.action_limit, params.action_limit));
        }
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::{make_q, AngleSource, DamageCase};

    fn env() -> ClawValveEnv {
        ClawValveEnv::default_env()
    }

    #[test]
    fn reset_is_deterministic_in_q_and_seed() {
        let mut a = env();
        let mut b = env();
        let q = JointWorkingState::undamaged(N_JOINTS);
        let oa = a.reset(q.clone(), 7).unwrap();
        let ob = b.reset(q, 7).unwrap();
        assert_eq!(oa, ob);
    }

    #[test]
    fn reset_pins_damaged_joint_and_masks_its_sensor() {
        let mut e = env();
        let q = make_q(
            &DamageCase::single(3),
            AngleSource::Explicit(&[0.4]),
            e.spec(),
        )
        .unwrap();
        let obs = e.reset(q, 0).unwrap();
        assert_eq!(obs.joint_sensors[3], 0.0);
        assert_eq!(e.state().joint_angles[3], 0.4);
        assert_eq!(obs.q_flags[3], 1.0);
    }

    #[test]
    fn undamaged_reset_lands_on_committed_home_pose() {
        let mut e = env();
        let obs = e.reset(JointWorkingState::undamaged(N_JOINTS), 3).unwrap();
        let home = ClawValveEnv::home_pose(e.params());
        assert_eq!(e.state().joint_angles, home);
        assert_eq!(obs.joint_sensors, home);
    }

    #[test]
    fn home_fingertips_sit_outside_the_annulus() {
        let p = ClawParams::committed();
        let home = ClawValveEnv::home_pose(&p);
        for f in 0..FINGERS {
            let (x, y) = ClawValveEnv::fingertip(&p, &home, f);
            let r = (x * x + y * y).sqrt();
            assert!(r > p.annulus_outer, "finger {f} at radius {r}");
        }
    }

    #[test]
    fn zero_action_from_home_leaves_valve_unchanged() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 5).unwrap();
        let valve0 = e.state().valve_angle;
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert_eq!(e.state().valve_angle, valve0);
        let expected =
            -(valve0 - e.params().target_angle).abs() / std::f64::consts::PI;
        assert!((r.reward - expected).abs() < 1e-15);
    }

    #[test]
    fn replayed_action_sequence_gives_identical_rewards() {
        let run = || {
            let mut e = env();
            e.reset(JointWorkingState::undamaged(N_JOINTS), 11).unwrap();
            let mut rng = Pcg32::new(42, 0);
            let mut rewards = Vec::new();
            for _ in 0..50 {
                let a: Vec<f64> = (0..N_JOINTS).map(|_| rng.uniform_in(-0.15, 0.15)).collect();
                rewards.push(e.step(&a).unwrap().reward);
            }
            rewards
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn valve_decays_exactly_when_no_fingertip_in_annulus() {
        let p = ClawParams::committed();
        let home = ClawValveEnv::home_pose(&p);
        let tips: Vec<(f64, f64)> = (0..FINGERS)
            .map(|f| ClawValveEnv::fingertip(&p, &home, f))
            .collect();
        let (angle, velocity) = ClawValveEnv::valve_update(&p, 0.7, 0.4, &tips, &tips);
        let expected_velocity = 0.4 * (1.0 - p.damping * p.dt);
        assert!((velocity - expected_velocity).abs() < 1e-15);
        assert!((angle - (0.7 + p.dt * expected_velocity)).abs() < 1e-15);
    }

    #[test]
    fn single_tangential_fingertip_matches_hand_computed_update() {
        // One fingertip at (0.07, 0) moving purely tangentially (+y) at v.
        let p = ClawParams::committed();
        let v = 0.3;
        let before = [(0.07, -v * p.dt / 2.0)];
        let after = [(0.07, v * p.dt / 2.0)];
        // Tangent at the after-point is not exactly +y because the point has
        // a small y component; compute the oracle from the declared formula.
        let r = (0.07f64 * 0.07 + (v * p.dt / 2.0) * (v * p.dt / 2.0)).sqrt();
        let (tx, ty) = (-(v * p.dt / 2.0) / r, 0.07 / r);
        let vt = 0.0 * tx + v * ty;
        let omega0 = 0.2;
        let expected_acc = p.coupling * vt - p.damping * omega0;
        let expected_velocity = omega0 + p.dt * expected_acc;
        let expected_angle = 0.1 + p.dt * expected_velocity;
        let (angle, velocity) = ClawValveEnv::valve_update(&p, 0.1, omega0, &before, &after);
        assert!((velocity - expected_velocity).abs() < 1e-15);
        assert!((angle - expected_angle).abs() < 1e-15);
    }

    #[test]
    fn mirrored_fingertip_motions_cancel() {
        // Two tips mirrored across the y axis moving with the same velocity:
        // one pushes the valve counterclockwise, the other clockwise.
        let p = ClawParams::committed();
        let before = [(0.07, -0.001), (-0.07, -0.001)];
        let after = [(0.07, 0.001), (-0.07, 0.001)];
        let (angle, velocity) = ClawValveEnv::valve_update(&p, 0.0, 0.0, &before, &after);
        assert_eq!(velocity, 0.0);
        assert_eq!(angle, 0.0);
    }

    #[test]
    fn success_threshold_is_strict() {
        let p = ClawParams::committed();
        let deg170 = 17.0 * std::f64::consts::PI / 18.0;
        assert!((p.success_threshold - deg170).abs() < 1e-12);
        // valve at exactly 170 degrees: no success; just above: success.
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        e.state.valve_angle = deg170;
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert!(!r.success, "170 degrees exactly must not count");
        e.state.valve_angle = 171.0 * std::f64::consts::PI / 180.0;
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert!(r.success);
    }

    #[test]
    fn success_is_latched() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        e.state.valve_angle = 3.0; // past threshold
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert!(r.success);
        e.state.valve_angle = 0.0; // forcibly pushed back
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert!(r.success, "success latch must hold");
    }

    #[test]
    fn step_contract_errors() {
        let mut e = env();
        assert!(matches!(
            e.step(&[0.0; N_JOINTS]),
            Err(EnvError::NotReset)
        ));
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        assert!(matches!(
            e.step(&[0.0; 3]),
            Err(EnvError::ActionDimension { .. })
        ));
        assert!(matches!(
            e.step(&[f64::NAN; N_JOINTS]),
            Err(EnvError::NonFiniteAction(0))
        ));
        for _ in 0..e.spec().episode_horizon {
            e.step(&[0.0; N_JOINTS]).unwrap();
        }
        assert!(matches!(
            e.step(&[0.0; N_JOINTS]),
            Err(EnvError::StepAfterTerminal)
        ));
    }

    #[test]
    fn frozen_joint_angle_is_constant_for_any_action_sequence() {
        let mut e = env();
        let q = make_q(
            &DamageCase::single(4),
            AngleSource::Explicit(&[-0.35]),
            e.spec(),
        )
        .unwrap();
        e.reset(q, 9).unwrap();
        let mut rng = Pcg32::new(3, 3);
        for _ in 0..100 {
            let a: Vec<f64> = (0..N_JOINTS).map(|_| rng.uniform_in(-0.15, 0.15)).collect();
            e.step(&a).unwrap();
            assert_eq!(e.state().joint_angles[4], -0.35);
        }
    }

    #[test]
    fn scripted_gait_solves_the_undamaged_task() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 1).unwrap();
        let mut success = false;
        for t in 0..e.spec().episode_horizon {
            let a = scripted_gait_action(e.params(), t, &e.state().joint_angles.clone());
            let r = e.step(&a).unwrap();
            success = r.success;
            if r.terminal {
                break;
            }
        }
        assert!(
            success,
            "scripted gait failed; final valve angle {}",
            e.state().valve_angle
        );
    }

    #[test]
    fn valve_angle_change_per_step_is_bounded() {
        let p = ClawParams::committed();
        // Max per-tip speed from link lengths and per-step angle limits.
        let per_joint = p.action_limit / p.dt;
        let tip_speed_max = p.link_lengths[0] * per_joint
            + p.link_lengths[1] * 2.0 * per_joint
            + p.link_lengths[2] * 3.0 * per_joint;
        let omega_max = p.coupling * FINGERS as f64 * tip_speed_max / p.damping;
        let bound = p.dt * omega_max;
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 2).unwrap();
        let mut rng = Pcg32::new(8, 1);
        let mut prev = e.state().valve_angle;
        for t in 0..e.spec().episode_horizon {
            let a: Vec<f64> = if t % 3 == 0 {
                scripted_gait_action(e.params(), t, &e.state().joint_angles.clone())
            } else {
                (0..N_JOINTS).map(|_| rng.uniform_in(-0.15, 0.15)).collect()
            };
            e.step(&a).unwrap();
            let delta = (e.state().valve_angle - prev).abs();
            assert!(delta <= bound + 1e-12, "step {t}: delta {delta} > bound {bound}");
            prev = e.state().valve_angle;
        }
    }

    #[test]
    fn all_fingers_frozen_outside_annulus_makes_task_impossible() {
        // Allow enough damage to freeze every joint; the home pose keeps all
        // fingertips outside the annulus, so nothing can drive the valve.
        let mut params = ClawParams::committed();
        params.max_damaged = N_JOINTS;
        let mut e = ClawValveEnv::new(params);
        let case = DamageCase::new((0..N_JOINTS).collect());
        let home = ClawValveEnv::home_pose(e.params());
        let q = make_q(&case, AngleSource::Explicit(&home), e.spec()).unwrap();
        e.reset(q, 4).unwrap();
        let initial = e.state().valve_angle;
        let mut rng = Pcg32::new(5, 5);
        for _ in 0..100 {
            let a: Vec<f64> = (0..N_JOINTS).map(|_| rng.uniform_in(-0.15, 0.15)).collect();
            e.step(&a).unwrap();
            assert!(e.state().valve_angle <= initial + 1e-12);
        }
    }
}
