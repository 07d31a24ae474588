//! Environment abstraction: episode lifecycle, damage injection, and the
//! observation/reward contract shared by both tasks.

use serde::{Deserialize, Serialize};

use crate::fault::{FaultError, JointWorkingState};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("reset must be called before step")]
    NotReset,
    #[error("step called after the episode terminated")]
    StepAfterTerminal,
    #[error("action has {got} entries, environment expects {expected}")]
    ActionDimension { expected: usize, got: usize },
    #[error("non-finite action entry at index {0}")]
    NonFiniteAction(usize),
    #[error(transparent)]
    Fault(#[from] FaultError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvId {
    Claw,
    Kitty,
}

impl EnvId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::Claw => "claw",
            EnvId::Kitty => "kitty",
        }
    }
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EnvId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "claw" => Ok(EnvId::Claw),
            "kitty" => Ok(EnvId::Kitty),
            other => Err(format!("unknown environment {other:?} (expected claw or kitty)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessPredicateId {
    /// Valve turned past the success threshold.
    ValveTurned,
    /// Base within the success radius of the goal.
    GoalReached,
    /// Never succeeds; for scripted test environments.
    Never,
}

/// Static description of an environment instance. All oracle constants in
/// the test suite come from the committed env spec files that produce this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: String,
    pub n_joints: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub task_feature_dim: usize,
    pub obs_dim: usize,
    pub episode_horizon: usize,
    pub success_predicate: SuccessPredicateId,
    pub feasible_frozen_ranges: Vec<(f64, f64)>,
    pub dt: f64,
    pub max_damaged: usize,
    pub reward_low: f64,
    pub reward_high: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.action_low.len() != self.n_joints || self.action_high.len() != self.n_joints {
            return Err("action bounds must have one entry per joint".into());
        }
        for i in 0..self.n_joints {
            let (lo, hi) = (self.action_low[i], self.action_high[i]);
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(format!("bad action bounds for joint {i}: [{lo}, {hi}]"));
            }
        }
        if self.obs_dim != self.task_feature_dim + 2 * self.n_joints {
            return Err(format!(
                "obs_dim {} != task features {} + sensors {} + q flags {}",
                self.obs_dim, self.task_feature_dim, self.n_joints, self.n_joints
            ));
        }
        if self.feasible_frozen_ranges.len() != self.n_joints {
            return Err("feasible frozen ranges must have one entry per joint".into());
        }
        Ok(())
    }
}

/// One observation: task features, damage-masked joint sensors, and the 0/1
/// damage flags for the episode's q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvObservation {
    pub task_features: Vec<f64>,
    pub joint_sensors: Vec<f64>,
    pub q_flags: Vec<f64>,
}

impl EnvObservation {
    pub fn dim(&self) -> usize {
        self.task_features.len() + self.joint_sensors.len() + self.q_flags.len()
    }

    /// Flatten in the order [task features | sensors | q flags].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&self.task_features);
        out.extend_from_slice(&self.joint_sensors);
        out.extend_from_slice(&self.q_flags);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: EnvObservation,
    pub reward: f64,
    pub terminal: bool,
    /// Latched: once the success predicate holds it stays true for the rest
    /// of the episode.
    pub success: bool,
}

/// A single-instance, single-threaded environment. Instances never share
/// mutable state, so many may run concurrently on independent seeds.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode under the given damage state. Deterministic in
    /// (q, seed); damaged joints come up pinned at their frozen angles and
    /// the returned observation already has sensor masking applied.
    fn reset(&mut self, q: JointWorkingState, seed: u64) -> Result<EnvObservation, EnvError>;

    /// Advance one control step. Applies action masking, integrates the
    /// declared dynamics over dt, and computes reward/success/terminal.
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    /// The scalar a trace records per step: valve angle for the claw, goal
    /// distance for the kitty.
    fn task_scalar(&self) -> f64;

    /// The q of the current episode, if one is active.
    fn current_q(&self) -> Option<&JointWorkingState>;
}

/// Shared per-episode bookkeeping for concrete environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeState {
    pub t: usize,
    pub terminal: bool,
    pub success_latched: bool,
    pub active: bool,
}

impl EpisodeState {
    pub fn start(&mut self) {
        *self = EpisodeState {
            t: 0,
            terminal: false,
            success_latched: false,
            active: true,
        };
    }

    pub fn check_step(&self, spec: &EnvSpec, action: &[f64]) -> Result<(), EnvError> {
        if !self.active {
            return Err(EnvError::NotReset);
        }
        if self.terminal {
            return Err(EnvError::StepAfterTerminal);
        }
        if action.len() != spec.n_joints {
            return Err(EnvError::ActionDimension {
                expected: spec.n_joints,
                got: action.len(),
            });
        }
        if let Some(i) = action.iter().position(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction(i));
        }
        Ok(())
    }

    /// Advance the step counter, latch success, and decide terminal.
    /// `hard_terminal` is env-specific (fall, or success on the kitty).
    pub fn finish_step(&mut self, spec: &EnvSpec, success_now: bool, hard_terminal: bool) {
        self.t += 1;
        if success_now {
            self.success_latched = true;
        }
        if hard_terminal || self.t >= spec.episode_horizon {
            self.terminal = true;
        }
    }
}

/// Clip an action into the env's bounds. Done before damage masking.
pub(crate) fn clip_action(action: &[f64], low: &[f64], high: &[f64]) -> Vec<f64> {
    action
        .iter()
        .zip(low.iter().zip(high))
        .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
        .collect()
}
