//! One-step bandit with reward -a^2; the analytic optimum is a = 0.
//! Used as a fast sanity task for the learner.

use crate::env::{
    EnvError, EnvObservation, EnvSpec, Environment, EpisodeState, StepResult, SuccessPredicateId,
};
use crate::fault::JointWorkingState;

pub struct BanditEnv {
    spec: EnvSpec,
    q: Option<JointWorkingState>,
    episode: EpisodeState,
}

impl BanditEnv {
    pub fn new() -> Self {
        let spec = EnvSpec {
            id: "bandit".to_string(),
            n_joints: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            task_feature_dim: 1,
            obs_dim: 3,
            episode_horizon: 1,
            success_predicate: SuccessPredicateId::Never,
            feasible_frozen_ranges: vec![(0.0, 0.0)],
            dt: 1.0,
            max_damaged: 0,
            reward_low: -1.0,
            reward_high: 0.0,
        };
        spec.validate().expect("bandit spec consistent");
        BanditEnv {
            spec,
            q: None,
            episode: EpisodeState::default(),
        }
    }

    fn observation(&self) -> EnvObservation {
        let q = self.q.as_ref().expect("episode active");
        EnvObservation {
            task_features: vec![0.0],
            joint_sensors: vec![0.0],
            q_flags: q.flags(),
        }
    }
}

impl Default for BanditEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for BanditEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, q: JointWorkingState, _seed: u64) -> Result<EnvObservation, EnvError> {
        if q.n_joints() != 1 {
            return Err(EnvError::ActionDimension {
                expected: 1,
                got: q.n_joints(),
            });
        }
        self.q = Some(q);
        self.episode.start();
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.episode.check_step(&self.spec, action)?;
        let a = action[0].clamp(-1.0, 1.0);
        self.episode.finish_step(&self.spec, false, false);
        Ok(StepResult {
            observation: self.observation(),
            reward: -a * a,
            terminal: self.episode.terminal,
            success: false,
        })
    }

    fn task_scalar(&self) -> f64 {
        0.0
    }

    fn current_q(&self) -> Option<&JointWorkingState> {
        self.q.as_ref()
    }
}
