//! KittyWalk: a four-legged walker reaching a goal position.
//!
//! Declared dynamics: legs track commanded deltas; feet below the contact
//! height are stance feet; the base moves opposite the mean displacement of
//! the stance feet (and rotates opposite their mean angular sweep). The
//! robot falls, ending the episode, when its projected center leaves the
//! support polygon of the stance feet by more than the fall margin.

use serde::{Deserialize, Serialize};

use crate::env::{
    clip_action, EnvError, EnvObservation, EnvSpec, Environment, EpisodeState, StepResult,
    SuccessPredicateId,
};
use crate::fault::{mask_action, mask_observation, DamageMode, JointWorkingState};
use crate::rng::{derive, Pcg32};

pub const LEGS: usize = 4;
pub const JOINTS_PER_LEG: usize = 3;
pub const N_JOINTS: usize = LEGS * JOINTS_PER_LEG;

/// Committed constants; see `assets/kitty_env.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KittyParams {
    pub n_joints: usize,
    pub dt: f64,
    pub episode_horizon: usize,
    pub max_damaged: usize,
    pub body_half_length: f64,
    pub body_half_width: f64,
    pub upper_leg: f64,
    pub lower_leg: f64,
    pub base_height: f64,
    pub contact_height: f64,
    pub home_pose: [f64; JOINTS_PER_LEG],
    pub lat_limit: f64,
    pub hip_limit: f64,
    pub knee_limit: f64,
    pub fall_margin: f64,
    pub goal_distance: f64,
    pub success_radius: f64,
    pub action_limit: f64,
    pub feasible_frozen_fraction: f64,
    pub knee_frozen_range: (f64, f64),
    pub joint_init_jitter: f64,
    pub progress_clamp: f64,
    pub success_bonus: f64,
    pub fall_penalty: f64,
}

pub const KITTY_PARAMS_TOML: &str = include_str!("../../assets/kitty_env.toml");

impl KittyParams {
    pub fn committed() -> Self {
        toml::from_str(KITTY_PARAMS_TOML).expect("committed kitty_env.toml must parse")
    }

    pub fn joint_limits(&self) -> Vec<(f64, f64)> {
        let per_leg = [
            (-self.lat_limit, self.lat_limit),
            (-self.hip_limit, self.hip_limit),
            (-self.knee_limit, self.knee_limit),
        ];
        (0..N_JOINTS).map(|i| per_leg[i % JOINTS_PER_LEG]).collect()
    }

    fn to_spec(&self) -> EnvSpec {
        let ranges = self
            .joint_limits()
            .iter()
            .enumerate()
            .map(|(i, (lo, hi))| {
                if i % JOINTS_PER_LEG == 2 {
                    self.knee_frozen_range
                } else {
                    let half = 0.5 * (hi - lo) * self.feasible_frozen_fraction;
                    let mid = 0.5 * (hi + lo);
                    (mid - half, mid + half)
                }
            })
            .collect();
        EnvSpec {
            id: "kitty".to_string(),
            n_joints: self.n_joints,
            action_low: vec![-self.action_limit; self.n_joints],
            action_high: vec![self.action_limit; self.n_joints],
            task_feature_dim: 3,
            obs_dim: 3 + 2 * self.n_joints,
            episode_horizon: self.episode_horizon,
            success_predicate: SuccessPredicateId::GoalReached,
            feasible_frozen_ranges: ranges,
            dt: self.dt,
            max_damaged: self.max_damaged,
            reward_low: 1.0 - self.progress_clamp - self.fall_penalty,
            reward_high: 1.0 + self.success_bonus,
        }
    }

    /// Mount point of a leg in the body frame. Legs: 0 front-left,
    /// 1 front-right, 2 back-left, 3 back-right.
    pub fn mount(&self, leg: usize) -> (f64, f64) {
        let x = if leg < 2 {
            self.body_half_length
        } else {
            -self.body_half_length
        };
        let y = if leg.is_multiple_of(2) {
            self.body_half_width
        } else {
            -self.body_half_width
        };
        (x, y)
    }

    /// Body-frame foot position (x, y, z) from one leg's three angles.
    pub fn foot(&self, leg: usize, lat: f64, hip: f64, knee: f64) -> (f64, f64, f64) {
        let (mx, my) = self.mount(leg);
        let reach = self.upper_leg * hip.sin() + self.lower_leg * (hip + knee).sin();
        let drop = self.upper_leg * hip.cos() + self.lower_leg * (hip + knee).cos();
        (
            mx + reach,
            my + drop * lat.sin(),
            self.base_height - drop * lat.cos(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KittyWalkState {
    pub joint_angles: Vec<f64>,
    pub base_position: (f64, f64),
    pub heading: f64,
    pub goal: (f64, f64),
    pub fallen: bool,
    pub initial_distance: f64,
}

impl KittyWalkState {
    pub fn goal_distance(&self) -> f64 {
        let dx = self.goal.0 - self.base_position.0;
        let dy = self.goal.1 - self.base_position.1;
        (dx * dx + dy * dy).sqrt()
    }
}

pub struct KittyWalkEnv {
    params: KittyParams,
    spec: EnvSpec,
    state: KittyWalkState,
    q: Option<JointWorkingState>,
    episode: EpisodeState,
    mask_rng: Pcg32,
}

/// Distance from the origin to the convex hull of a point set, treating the
/// hull as a solid region (0 when the origin is inside or on the boundary).
pub fn distance_outside_hull(points: &[(f64, f64)]) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => (points[0].0.powi(2) + points[0].1.powi(2)).sqrt(),
        _ => {
            let hull = convex_hull(points);
            if hull.len() == 1 {
                return (hull[0].0.powi(2) + hull[0].1.powi(2)).sqrt();
            }
            if hull.len() == 2 {
                return segment_distance(hull[0], hull[1]);
            }
            // Inside test: origin on the inner side of every edge (hull is
            // counterclockwise).
            let mut inside = true;
            for i in 0..hull.len() {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                let cross = (b.0 - a.0) * (0.0 - a.1) - (b.1 - a.1) * (0.0 - a.0);
                if cross < 0.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                0.0
            } else {
                (0..hull.len())
                    .map(|i| segment_distance(hull[i], hull[(i + 1) % hull.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn segment_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((-a.0) * abx + (-a.1) * aby) / len2
    } else {
        0.0
    }
    .clamp(0.0, 1.0);
    let (px, py) = (a.0 + t * abx, a.1 + t * aby);
    (px * px + py * py).sqrt()
}

/// Andrew monotone chain, counterclockwise.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl KittyWalkEnv {
    pub fn new(params: KittyParams) -> Self {
        assert_eq!(params.n_joints, N_JOINTS, "kitty has 4 legs x 3 joints");
        let spec = params.to_spec();
        spec.validate().expect("kitty spec consistent");
        KittyWalkEnv {
            params,
            spec,
            state: KittyWalkState {
                joint_angles: vec![0.0; N_JOINTS],
                base_position: (0.0, 0.0),
                heading: 0.0,
                goal: (0.0, 0.0),
                fallen: false,
                initial_distance: 1.0,
            },
            q: None,
            episode: EpisodeState::default(),
            mask_rng: Pcg32::new(0, 0),
        }
    }

    pub fn default_env() -> Self {
        KittyWalkEnv::new(KittyParams::committed())
    }

    pub fn params(&self) -> &KittyParams {
        &self.params
    }

    pub fn state(&self) -> &KittyWalkState {
        &self.state
    }

    pub fn home_pose(params: &KittyParams) -> Vec<f64> {
        let mut pose = Vec::with_capacity(N_JOINTS);
        for _ in 0..LEGS {
            pose.extend_from_slice(&params.home_pose);
        }
        pose
    }

    fn feet(params: &KittyParams, angles: &[f64]) -> Vec<(f64, f64, f64)> {
        (0..LEGS)
            .map(|l| {
                params.foot(
                    l,
                    angles[l * JOINTS_PER_LEG],
                    angles[l * JOINTS_PER_LEG + 1],
                    angles[l * JOINTS_PER_LEG + 2],
                )
            })
            .collect()
    }

    fn observation(&self) -> EnvObservation {
        let q = self.q.as_ref().expect("episode active");
        let sensors = mask_observation(q, &self.state.joint_angles).expect("dims fixed");
        let (dx, dy) = (
            self.state.goal.0 - self.state.base_position.0,
            self.state.goal.1 - self.state.base_position.1,
        );
        let (c, s) = (self.state.heading.cos(), self.state.heading.sin());
        // Goal vector in the body frame plus the distance itself.
        let gx = c * dx + s * dy;
        let gy = -s * dx + c * dy;
        EnvObservation {
            task_features: vec![gx, gy, self.state.goal_distance()],
            joint_sensors: sensors,
            q_flags: q.flags(),
        }
    }
}

impl Environment for KittyWalkEnv {
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
        let mut init_rng = Pcg32::new(derive(seed, 0xD0C5), 1);
        self.mask_rng = Pcg32::new(derive(seed, 0xD0C6), 2);
        let limits = self.params.joint_limits();
        let mut angles = Self::home_pose(&self.params);
        for i in 0..N_JOINTS {
            if q.is_damaged(i) {
                angles[i] = q.frozen_angle()[i];
            } else {
                let j = self.params.joint_init_jitter;
                angles[i] =
                    (angles[i] + init_rng.uniform_in(-j, j)).clamp(limits[i].0, limits[i].1);
            }
        }
        self.state = KittyWalkState {
            joint_angles: angles,
            base_position: (0.0, 0.0),
            heading: 0.0,
            goal: (self.params.goal_distance, 0.0),
            fallen: false,
            initial_distance: self.params.goal_distance,
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

        let feet_before = Self::feet(&self.params, &self.state.joint_angles);

        let limits = self.params.joint_limits();
        let mut new_angles = self.state.joint_angles.clone();
        for i in 0..N_JOINTS {
            if q.is_damaged(i) && q.mode() == DamageMode::Frozen {
                new_angles[i] = q.frozen_angle()[i];
            } else {
                new_angles[i] = (new_angles[i] + masked[i]).clamp(limits[i].0, limits[i].1);
            }
        }

        let feet_after = Self::feet(&self.params, &new_angles);
        let stance: Vec<usize> = (0..LEGS)
            .filter(|&l| feet_after[l].2 <= self.params.contact_height)
            .collect();

        let mut fallen_now = false;
        if stance.is_empty() {
            fallen_now = true;
        } else {
            // Base moves opposite the depth-weighted average stance-foot
            // displacement: deeper feet carry more weight and drag more, so
            // weight can be shifted between feet without lifting them.
            let mut dx = 0.0;
            let mut dy = 0.0;
            let mut dpsi = 0.0;
            let mut wsum = 0.0;
            for &l in &stance {
                let depth = (self.params.contact_height - feet_after[l].2)
                    / self.params.contact_height;
                let w = depth.clamp(0.0, 1.0);
                let (bx, by) = (feet_before[l].0, feet_before[l].1);
                let (ax, ay) = (feet_after[l].0, feet_after[l].1);
                dx += w * (ax - bx);
                dy += w * (ay - by);
                let r2 = (bx * bx + by * by).max(1e-6);
                dpsi += w * (bx * (ay - by) - by * (ax - bx)) / r2;
                wsum += w;
            }
            let n = wsum.max(1e-9);
            let (tx, ty, tpsi) = (-dx / n, -dy / n, -dpsi / n);
            let (c, s) = (self.state.heading.cos(), self.state.heading.sin());
            self.state.base_position.0 += c * tx - s * ty;
            self.state.base_position.1 += s * tx + c * ty;
            self.state.heading += tpsi;

            let stance_xy: Vec<(f64, f64)> = stance
                .iter()
                .map(|&l| (feet_after[l].0, feet_after[l].1))
                .collect();
            if distance_outside_hull(&stance_xy) > self.params.fall_margin {
                fallen_now = true;
            }
        }

        self.state.joint_angles = new_angles;
        if fallen_now {
            self.state.fallen = true;
        }

        let distance = self.state.goal_distance();
        let success_now = !self.state.fallen && distance < self.params.success_radius;
        self.episode
            .finish_step(&self.spec, success_now, self.state.fallen || success_now);

        let ratio = (distance / self.state.initial_distance).min(self.params.progress_clamp);
        let mut reward = 1.0 - ratio;
        if success_now {
            reward += self.params.success_bonus;
        }
        if fallen_now {
            reward -= self.params.fall_penalty;
        }

        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.episode.terminal,
            success: self.episode.success_latched,
        })
    }

    fn task_scalar(&self) -> f64 {
        self.state.goal_distance()
    }

    fn current_q(&self) -> Option<&JointWorkingState> {
        self.q.as_ref()
    }
}

/// Reference scripted trot: diagonal leg pairs alternate between a grounded
/// hip sweep (which drives the body forward) and a folded-knee recovery
/// swing. Sanity fixture showing the locomotion task is solvable.
pub fn scripted_trot_action(params: &KittyParams, t: usize, joint_angles: &[f64]) -> Vec<f64> {
    const PERIOD: usize = 32;
    const HIP_FROM: f64 = 0.60;
    const HIP_TO: f64 = -0.10;
    const FOLD: f64 = -1.2; // hip + knee while the foot is airborne

    let mut actions = Vec::with_capacity(N_JOINTS);
    for leg in 0..LEGS {
        // Diagonal pairs: legs 0 and 3 lead, legs 1 and 2 trail half a cycle.
        let offset = if leg == 0 || leg == 3 { 0 } else { PERIOD / 2 };
        let phase = (t + offset) % PERIOD;
        let (hip, knee) = match phase {
            0..=9 => {
                // Grounded sweep backward: knee mirrors the hip so the foot
                // stays on the ground (hip + knee = 0).
                let s = phase as f64 / 9.0;
                let hip = HIP_FROM + (HIP_TO - HIP_FROM) * s;
                (hip, -hip)
            }
            10..=17 => {
                // Fold the knee to lift the foot clear of the contact band.
                let s = (phase - 10) as f64 / 7.0;
                (HIP_TO, -HIP_TO + (FOLD - 0.0) * s)
            }
            18..=23 => {
                // Swing the lifted leg forward.
                let s = (phase - 18) as f64 / 5.0;
                let hip = HIP_TO + (HIP_FROM - HIP_TO) * s;
                (hip, -hip + FOLD)
            }
            _ => {
                // Extend the knee to land.
                let s = (phase - 24) as f64 / 7.0;
                (HIP_FROM, -HIP_FROM + FOLD * (1.0 - s))
            }
        };
        for (i, target) in [0.0, hip, knee].into_iter().enumerate() {
            let current = joint_angles[leg * JOINTS_PER_LEG + i];
            actions.push((target - current).clamp(-params.action_limit, params.action_limit));
        }
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::{make_q, AngleSource, DamageCase};

    fn env() -> KittyWalkEnv {
        KittyWalkEnv::default_env()
    }

    #[test]
    fn home_pose_is_stable_standing() {
        let p = KittyParams::committed();
        let home = KittyWalkEnv::home_pose(&p);
        let feet = KittyWalkEnv::feet(&p, &home);
        for (i, f) in feet.iter().enumerate() {
            assert!(f.2 <= p.contact_height, "foot {i} at z {}", f.2);
        }
        let xy: Vec<(f64, f64)> = feet.iter().map(|f| (f.0, f.1)).collect();
        assert_eq!(distance_outside_hull(&xy), 0.0);
    }

    #[test]
    fn holding_still_does_not_move_the_base() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        let p0 = e.state().base_position;
        for _ in 0..10 {
            let r = e.step(&[0.0; N_JOINTS]).unwrap();
            assert!(!r.terminal);
        }
        assert_eq!(e.state().base_position, p0);
    }

    #[test]
    fn stance_sweep_moves_base_forward_by_declared_rule() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        // Sweep every hip backward a little; all feet stay in stance, so the
        // base must advance by minus the mean foot displacement.
        let angles0 = e.state().joint_angles.clone();
        let mut action = vec![0.0; N_JOINTS];
        for l in 0..LEGS {
            action[l * JOINTS_PER_LEG + 1] = -0.05;
        }
        let feet_before = KittyWalkEnv::feet(e.params(), &angles0);
        let mut angles1 = angles0.clone();
        for l in 0..LEGS {
            angles1[l * JOINTS_PER_LEG + 1] -= 0.05;
        }
        let feet_after = KittyWalkEnv::feet(e.params(), &angles1);
        // Depth-weighted average of the stance-foot displacements.
        let ch = e.params().contact_height;
        let weights: Vec<f64> = feet_after
            .iter()
            .map(|f| ((ch - f.2) / ch).clamp(0.0, 1.0))
            .collect();
        let wsum: f64 = weights.iter().sum();
        let expected_dx = -(0..LEGS)
            .map(|l| weights[l] * (feet_after[l].0 - feet_before[l].0))
            .sum::<f64>()
            / wsum;
        let before = e.state().base_position;
        e.step(&action).unwrap();
        let after = e.state().base_position;
        assert!((after.0 - before.0 - expected_dx).abs() < 1e-12);
        assert!(expected_dx > 0.0, "hip sweep back should move base forward");
    }

    #[test]
    fn lifting_three_legs_falls() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        // Retract three legs (bend knees hard) over several steps until only
        // one foot remains in stance; the fall must latch and terminate.
        let mut fell = false;
        for _ in 0..40 {
            let mut a = vec![0.0; N_JOINTS];
            for l in 0..3 {
                a[l * JOINTS_PER_LEG + 1] = 0.15; // swing hip forward
                a[l * JOINTS_PER_LEG + 2] = 0.15; // fold knee
            }
            let r = e.step(&a).unwrap();
            if r.terminal {
                fell = e.state().fallen;
                break;
            }
        }
        assert!(fell, "three lifted legs must topple the robot");
    }

    #[test]
    fn fall_is_terminal_and_penalized() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 1).unwrap();
        let mut last_reward = 0.0;
        let mut terminal = false;
        for _ in 0..e.spec().episode_horizon {
            let mut a = vec![0.0; N_JOINTS];
            for l in 0..3 {
                a[l * JOINTS_PER_LEG + 1] = 0.15;
                a[l * JOINTS_PER_LEG + 2] = 0.15;
            }
            let r = e.step(&a).unwrap();
            last_reward = r.reward;
            terminal = r.terminal;
            if terminal {
                break;
            }
        }
        assert!(terminal && e.state().fallen);
        assert!(last_reward < -(e.params().fall_penalty - 2.0));
        assert!(e.step(&[0.0; N_JOINTS]).is_err());
    }

    #[test]
    fn success_is_strictly_inside_radius() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        // Place the base exactly at the success radius: no success.
        e.state.base_position = (e.params().goal_distance - e.params().success_radius, 0.0);
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert!(!r.success, "0.5 m exactly must not count");
        // Strictly inside: success and terminal.
        e.reset(JointWorkingState::undamaged(N_JOINTS), 0).unwrap();
        e.state.base_position = (e.params().goal_distance - 0.49, 0.0);
        let r = e.step(&[0.0; N_JOINTS]).unwrap();
        assert!(r.success && r.terminal);
    }

    #[test]
    fn frozen_leg_joint_is_pinned_and_sensor_masked() {
        let mut e = env();
        let q = make_q(
            &DamageCase::single(5),
            AngleSource::Explicit(&[-0.3]),
            e.spec(),
        )
        .unwrap();
        let obs = e.reset(q, 3).unwrap();
        assert_eq!(obs.joint_sensors[5], 0.0);
        assert_eq!(e.state().joint_angles[5], -0.3);
        let mut rng = Pcg32::new(1, 1);
        for _ in 0..30 {
            let a: Vec<f64> = (0..N_JOINTS).map(|_| rng.uniform_in(-0.15, 0.15)).collect();
            let r = e.step(&a).unwrap();
            assert_eq!(e.state().joint_angles[5], -0.3);
            if r.terminal {
                break;
            }
        }
    }

    #[test]
    fn hull_distance_oracle_cases() {
        // Square around the origin: inside.
        let square = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        assert_eq!(distance_outside_hull(&square), 0.0);
        // Triangle with origin on an edge: distance 0.
        let tri = [(1.0, 1.0), (1.0, -1.0), (-1.0, 0.0)];
        assert_eq!(distance_outside_hull(&tri), 0.0);
        // Two diagonal points through the origin: distance 0 (trot support).
        let diag = [(0.12, 0.08), (-0.12, -0.08)];
        assert!(distance_outside_hull(&diag) < 1e-12);
        // Two same-side points: positive distance.
        let side = [(0.12, 0.08), (-0.12, 0.08)];
        assert!((distance_outside_hull(&side) - 0.08).abs() < 1e-12);
        // Single point.
        assert!((distance_outside_hull(&[(0.3, 0.4)]) - 0.5).abs() < 1e-12);
        // Empty: infinitely unstable.
        assert_eq!(distance_outside_hull(&[]), f64::INFINITY);
    }

    #[test]
    fn scripted_trot_walks_without_falling() {
        let mut e = env();
        e.reset(JointWorkingState::undamaged(N_JOINTS), 7).unwrap();
        let mut success = false;
        for t in 0..e.spec().episode_horizon {
            let a = scripted_trot_action(e.params(), t, &e.state().joint_angles.clone());
            let r = e.step(&a).unwrap();
            success = r.success;
            if r.terminal {
                break;
            }
        }
        assert!(!e.state().fallen, "trot must not fall");
        let travelled = e.state().base_position.0;
        assert!(
            success || travelled > 1.0,
            "trot should cover ground; got {travelled:.3} m, success {success}"
        );
    }

    #[test]
    fn deterministic_reset_and_replay() {
        let run = || {
            let mut e = env();
            e.reset(JointWorkingState::undamaged(N_JOINTS), 13).unwrap();
            let mut rng = Pcg32::new(2, 2);
            let mut rewards = Vec::new();
            for _ in 0..30 {
                let a: Vec<f64> = (0..N_JOINTS).map(|_| rng.uniform_in(-0.1, 0.1)).collect();
                let r = e.step(&a).unwrap();
                rewards.push(r.reward);
                if r.terminal {
                    break;
                }
            }
            rewards
        };
        assert_eq!(run(), run());
    }
}
