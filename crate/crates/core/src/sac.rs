//! Off-policy maximum-entropy actor-critic learner, conditioned on the
//! joint working state through the observation.
//!
//! Twin critics with Polyak-averaged targets, tanh-squashed Gaussian actor,
//! and an entropy temperature auto-tuned in log space toward a target
//! entropy. The replay buffer persists across adversary iterations; that is
//! the mechanism by which experience gathered under one damage case keeps
//! informing all the others.

use serde::{Deserialize, Serialize};

use crate::env::{EnvObservation, EnvSpec, Environment};
use crate::fault::JointWorkingState;
use crate::nn::{
    self, Activation, Adam, MlpSpec, OutputHead, ParamVector, LOG_STD_MAX, LOG_STD_MIN,
};
use crate::rng::{derive, tags, Pcg32};

#[derive(Debug, thiserror::Error)]
pub enum SacError {
    #[error("non-finite {loss} loss at update {update}; batch: {stats}")]
    NonFiniteLoss {
        loss: &'static str,
        update: u64,
        stats: String,
    },
    #[error("batch size {batch} exceeds buffer occupancy {occupancy}")]
    BatchTooLarge { batch: usize, occupancy: usize },
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

/// One environment step as stored in the replay buffer. Observations are the
/// policy's view (q flags included, and already zeroed if the learner runs
/// blind), so replayed experience stays valid across damage-case switches.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            data: Vec::new(),
            capacity,
            cursor: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    pub fn clear(&mut self) {
        self.data.clear();
        self.cursor = 0;
    }

    /// Rebuild from checkpoint contents.
    pub fn restore(capacity: usize, cursor: usize, data: Vec<Transition>) -> Self {
        ReplayBuffer {
            data,
            capacity,
            cursor,
        }
    }

    pub fn sample_indices(&self, rng: &mut Pcg32, n: usize) -> Vec<usize> {
        (0..n).map(|_| rng.below(self.data.len())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f64,
    /// Polyak coefficient for target smoothing.
    pub tau: f64,
    pub batch_size: usize,
    /// One gradient step every this many environment steps (after warmup).
    pub steps_per_update: usize,
    pub initial_temperature: f64,
    /// Defaults to minus the action dimension when absent.
    pub target_entropy: Option<f64>,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_temperature: f64,
    pub warmup_steps: usize,
    /// Amplitude of uniform warmup exploration as a fraction of the action
    /// range (1 = full range).
    pub warmup_action_scale: f64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            steps_per_update: 1,
            initial_temperature: 0.2,
            target_entropy: None,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_temperature: 3e-4,
            warmup_steps: 5000,
            warmup_action_scale: 1.0,
            buffer_capacity: 1_000_000,
            hidden: vec![256, 256],
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(format!("tau must be in [0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 || self.steps_per_update == 0 || self.buffer_capacity == 0 {
            return Err("batch_size, steps_per_update and buffer_capacity must be positive".into());
        }
        if self.initial_temperature <= 0.0 {
            return Err("initial_temperature must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.warmup_action_scale) {
            return Err("warmup_action_scale must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Read-only policy snapshot: everything needed to act, nothing needed to
/// learn. Cheap to clone out of the learner and safe to share across
/// evaluation rollouts.
#[derive(Debug, Clone)]
pub struct Policy {
    pub actor_spec: MlpSpec,
    pub actor: ParamVector,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub obs_dim: usize,
    pub n_joints: usize,
    /// When false the policy never sees q flags (ablation mode); the flag
    /// segment of every observation is zeroed before the forward pass.
    pub q_visible: bool,
    pub env_id: String,
    pub id: String,
}

impl Policy {
    /// Flatten an observation into the policy's input view.
    pub fn view(&self, obs: &EnvObservation) -> Vec<f64> {
        let mut v = obs.to_vec();
        if !self.q_visible {
            let n = v.len();
            for f in &mut v[n - self.n_joints..] {
                *f = 0.0;
            }
        }
        v
    }

    pub fn act_on_view(
        &self,
        view: &[f64],
        deterministic: bool,
        rng: &mut Pcg32,
    ) -> Result<Vec<f64>, SacError> {
        let head = nn::forward(&self.actor_spec, &self.actor, view)?;
        if deterministic {
            Ok(nn::deterministic_action(
                &head,
                &self.action_low,
                &self.action_high,
            )?)
        } else {
            let mut noise = vec![0.0; self.action_low.len()];
            rng.fill_normal(&mut noise);
            Ok(nn::sample_squashed_gaussian(&head, &noise, &self.action_low, &self.action_high)?
                .action)
        }
    }

    pub fn act(
        &self,
        obs: &EnvObservation,
        deterministic: bool,
        rng: &mut Pcg32,
    ) -> Result<Vec<f64>, SacError> {
        self.act_on_view(&self.view(obs), deterministic, rng)
    }
}

/// One completed episode from [`Learner::rollout`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub episode_return: f64,
    pub discounted_return: f64,
    pub success: bool,
    /// Per-step task scalar (valve angle / goal distance), index 0 = after
    /// the first step.
    pub task_trace: Vec<f64>,
    /// Latched success flag per step.
    pub success_trace: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeStats {
    pub episode_return: f64,
    pub steps: usize,
    pub success: bool,
    pub updates: u64,
}

/// The learner state: networks, optimizers, temperature, buffer, streams.
pub struct Learner {
    pub cfg: SacConfig,
    pub actor_spec: MlpSpec,
    pub critic_spec: MlpSpec,
    pub actor: ParamVector,
    pub critic1: ParamVector,
    pub critic2: ParamVector,
    pub target1: ParamVector,
    pub target2: ParamVector,
    pub log_temperature: f64,
    pub target_entropy: f64,
    pub adam_actor: Adam,
    pub adam_critic1: Adam,
    pub adam_critic2: Adam,
    pub adam_temperature: Adam,
    pub buffer: ReplayBuffer,
    /// Batch sampling and in-update action noise.
    pub learner_rng: Pcg32,
    pub env_steps: u64,
    pub updates: u64,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub q_visible: bool,
    pub env_id: String,
    pub(crate) scratch: Vec<Transition>,
}

impl Learner {
    pub fn new(spec: &EnvSpec, cfg: SacConfig, seed: u64, q_visible: bool) -> Self {
        cfg.validate().expect("valid sac config");
        let obs_dim = spec.obs_dim;
        let act_dim = spec.n_joints;
        let actor_spec = MlpSpec::new(
            obs_dim,
            cfg.hidden.clone(),
            2 * act_dim,
            Activation::Relu,
            OutputHead::SquashedGaussian,
        );
        let critic_spec = MlpSpec::new(
            obs_dim + act_dim,
            cfg.hidden.clone(),
            1,
            Activation::Relu,
            OutputHead::Linear,
        );
        let mut init_rng = Pcg32::new(derive(seed, tags::PARAM_INIT), 11);
        let actor = ParamVector::init(&actor_spec, &mut init_rng);
        let critic1 = ParamVector::init(&critic_spec, &mut init_rng);
        let critic2 = ParamVector::init(&critic_spec, &mut init_rng);
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        // Default target entropy: minus the action dimension, stated in
        // normalized [-1, 1] action units. Physical log-densities carry a
        // -sum(ln half_range) offset, so convert.
        let log_range_offset: f64 = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(lo, hi)| (0.5 * (hi - lo)).ln())
            .sum();
        let target_entropy = cfg
            .target_entropy
            .unwrap_or(-(act_dim as f64) + log_range_offset);
        Learner {
            adam_actor: Adam::new(cfg.lr_actor, actor.len()),
            adam_critic1: Adam::new(cfg.lr_critic, critic1.len()),
            adam_critic2: Adam::new(cfg.lr_critic, critic2.len()),
            adam_temperature: Adam::new(cfg.lr_temperature, 1),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            learner_rng: Pcg32::new(derive(seed, tags::LEARNER), 13),
            log_temperature: cfg.initial_temperature.ln(),
            target_entropy,
            env_steps: 0,
            updates: 0,
            obs_dim,
            act_dim,
            action_low: spec.action_low.clone(),
            action_high: spec.action_high.clone(),
            q_visible,
            env_id: spec.id.clone(),
            scratch: Vec::new(),
            cfg,
            actor_spec,
            critic_spec,
            actor,
            critic1,
            critic2,
            target1,
            target2,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    /// Snapshot the acting half of the learner.
    pub fn policy(&self) -> Policy {
        Policy {
            actor_spec: self.actor_spec.clone(),
            actor: self.actor.clone(),
            action_low: self.action_low.clone(),
            action_high: self.action_high.clone(),
            obs_dim: self.obs_dim,
            n_joints: self.act_dim,
            q_visible: self.q_visible,
            env_id: self.env_id.clone(),
            id: String::new(),
        }
    }

    fn view(&self, obs: &EnvObservation) -> Vec<f64> {
        let mut v = obs.to_vec();
        if !self.q_visible {
            let n = v.len();
            for f in &mut v[n - self.act_dim..] {
                *f = 0.0;
            }
        }
        v
    }

    /// Select an action. Deterministic mode is a pure function of
    /// (parameters, observation).
    pub fn act(
        &self,
        obs: &EnvObservation,
        deterministic: bool,
        rng: &mut Pcg32,
    ) -> Result<Vec<f64>, SacError> {
        let view = self.view(obs);
        let head = nn::forward(&self.actor_spec, &self.actor, &view)?;
        if deterministic {
            Ok(nn::deterministic_action(&head, &self.action_low, &self.action_high)?)
        } else {
            let mut noise = vec![0.0; self.act_dim];
            rng.fill_normal(&mut noise);
            Ok(
                nn::sample_squashed_gaussian(&head, &noise, &self.action_low, &self.action_high)?
                    .action,
            )
        }
    }

    /// One full evaluation episode with no buffer writes and no updates.
    pub fn rollout(
        policy: &Policy,
        env: &mut dyn Environment,
        q: JointWorkingState,
        stochastic: bool,
        seed: u64,
        gamma: f64,
    ) -> Result<Trajectory, SacError> {
        let mut noise_rng = Pcg32::new(derive(seed, tags::ACTION_NOISE), 23);
        let mut obs = env.reset(q, derive(seed, tags::EVAL_ENV))?;
        let mut transitions = Vec::new();
        let mut task_trace = Vec::new();
        let mut success_trace = Vec::new();
        let mut episode_return = 0.0;
        let mut discounted_return = 0.0;
        let mut discount = 1.0;
        loop {
            let view = policy.view(&obs);
            let action = policy.act_on_view(&view, !stochastic, &mut noise_rng)?;
            let step = env.step(&action)?;
            episode_return += step.reward;
            discounted_return += discount * step.reward;
            discount *= gamma;
            task_trace.push(env.task_scalar());
            success_trace.push(step.success);
            transitions.push(Transition {
                obs: view,
                action,
                reward: step.reward,
                next_obs: policy.view(&step.observation),
                terminal: step.terminal,
            });
            obs = step.observation;
            if step.terminal {
                break;
            }
        }
        Ok(Trajectory {
            transitions,
            episode_return,
            discounted_return,
            success: *success_trace.last().unwrap_or(&false),
            task_trace,
            success_trace,
        })
    }

    /// One training episode: stochastic acting, buffer writes, and a
    /// gradient step every `steps_per_update` environment steps once the
    /// warmup has elapsed.
    pub fn train_episode(
        &mut self,
        env: &mut dyn Environment,
        q: JointWorkingState,
        env_seed: u64,
        explore_rng: &mut Pcg32,
    ) -> Result<EpisodeStats, SacError> {
        let horizon = env.spec().episode_horizon;
        let mut obs = env.reset(q, env_seed)?;
        let mut stats = EpisodeStats::default();
        loop {
            let view = self.view(&obs);
            let action = if self.env_steps < self.cfg.warmup_steps as u64 {
                // Uniform exploration during warmup, optionally narrowed
                // around the range midpoint.
                let scale = self.cfg.warmup_action_scale;
                self.action_low
                    .iter()
                    .zip(&self.action_high)
                    .map(|(lo, hi)| {
                        let center = 0.5 * (lo + hi);
                        let half = 0.5 * (hi - lo) * scale;
                        explore_rng.uniform_in(center - half, center + half)
                    })
                    .collect()
            } else {
                let head = nn::forward(&self.actor_spec, &self.actor, &view)?;
                let mut noise = vec![0.0; self.act_dim];
                explore_rng.fill_normal(&mut noise);
                nn::sample_squashed_gaussian(&head, &noise, &self.action_low, &self.action_high)?
                    .action
            };
            let step = env.step(&action)?;
            stats.episode_return += step.reward;
            stats.steps += 1;
            stats.success = step.success;
            // Horizon truncation is not a true terminal: bootstrap across it.
            let hard_terminal = step.terminal && stats.steps < horizon;
            self.buffer.push(Transition {
                obs: view,
                action,
                reward: step.reward,
                next_obs: self.view(&step.observation),
                terminal: hard_terminal,
            });
            self.env_steps += 1;
            obs = step.observation;
            if self.env_steps >= self.cfg.warmup_steps as u64
                && self.buffer.len() >= self.cfg.batch_size
                && self.env_steps.is_multiple_of(self.cfg.steps_per_update as u64)
            {
                self.update()?;
                stats.updates += 1;
            }
            if step.terminal {
                break;
            }
        }
        Ok(stats)
    }

    /// Sample a batch from the buffer and take one gradient step.
    pub fn update(&mut self) -> Result<UpdateStats, SacError> {
        if self.buffer.len() < self.cfg.batch_size {
            return Err(SacError::BatchTooLarge {
                batch: self.cfg.batch_size,
                occupancy: self.buffer.len(),
            });
        }
        let indices = self.buffer.sample_indices(&mut self.learner_rng, self.cfg.batch_size);
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        scratch.extend(indices.iter().map(|&i| self.buffer.get(i).clone()));
        let result = self.update_batch_internal(&scratch);
        self.scratch = scratch;
        result
    }

    /// One gradient step on an explicit batch.
    pub fn update_batch(&mut self, batch: &[Transition]) -> Result<UpdateStats, SacError> {
        self.update_batch_internal(batch)
    }

    fn update_batch_internal(&mut self, batch: &[Transition]) -> Result<UpdateStats, SacError> {
        let b = batch.len() as f64;
        let alpha = self.temperature();
        let gamma = self.cfg.gamma;

        // Critic targets: r + gamma * (1 - done) * (min target Q - alpha * log pi).
        let mut targets = Vec::with_capacity(batch.len());
        let mut critic_input = vec![0.0; self.obs_dim + self.act_dim];
        let mut noise = vec![0.0; self.act_dim];
        for t in batch {
            let y = if t.terminal || gamma == 0.0 {
                t.reward
            } else {
                let head = nn::forward(&self.actor_spec, &self.actor, &t.next_obs)?;
                self.learner_rng.fill_normal(&mut noise);
                let sample = nn::sample_squashed_gaussian(
                    &head,
                    &noise,
                    &self.action_low,
                    &self.action_high,
                )?;
                critic_input[..self.obs_dim].copy_from_slice(&t.next_obs);
                critic_input[self.obs_dim..].copy_from_slice(&sample.action);
                let q1 = nn::forward(&self.critic_spec, &self.target1, &critic_input)?[0];
                let q2 = nn::forward(&self.critic_spec, &self.target2, &critic_input)?[0];
                t.reward + gamma * (q1.min(q2) - alpha * sample.log_prob)
            };
            targets.push(y);
        }

        // Critic gradient steps.
        let mut critic_loss = 0.0;
        for (critic, adam) in [
            (&mut self.critic1, &mut self.adam_critic1),
            (&mut self.critic2, &mut self.adam_critic2),
        ] {
            let mut grad = ParamVector::zeros(&self.critic_spec);
            for (t, y) in batch.iter().zip(&targets) {
                critic_input[..self.obs_dim].copy_from_slice(&t.obs);
                critic_input[self.obs_dim..].copy_from_slice(&t.action);
                let cache = nn::forward_cached(&self.critic_spec, critic, &critic_input)?;
                let q = cache.output()[0];
                let err = q - y;
                critic_loss += err * err / (2.0 * b);
                nn::backward_cached(
                    &self.critic_spec,
                    critic,
                    &cache,
                    &[2.0 * err / b],
                    &mut grad,
                )?;
            }
            adam.step(critic.as_mut_slice(), grad.as_slice());
        }
        if !critic_loss.is_finite() {
            return Err(self.non_finite("critic", batch));
        }

        // Actor gradient step (critic parameters held fixed).
        let mut actor_grad = ParamVector::zeros(&self.actor_spec);
        let mut actor_loss = 0.0;
        let mut mean_log_prob = 0.0;
        for t in batch {
            let cache = nn::forward_cached(&self.actor_spec, &self.actor, &t.obs)?;
            self.learner_rng.fill_normal(&mut noise);
            let sample = nn::sample_squashed_gaussian(
                cache.output(),
                &noise,
                &self.action_low,
                &self.action_high,
            )?;
            critic_input[..self.obs_dim].copy_from_slice(&t.obs);
            critic_input[self.obs_dim..].copy_from_slice(&sample.action);
            let c1 = nn::forward_cached(&self.critic_spec, &self.critic1, &critic_input)?;
            let c2 = nn::forward_cached(&self.critic_spec, &self.critic2, &critic_input)?;
            let (qmin, min_spec, min_params, min_cache) = if c1.output()[0] <= c2.output()[0] {
                (c1.output()[0], &self.critic_spec, &self.critic1, &c1)
            } else {
                (c2.output()[0], &self.critic_spec, &self.critic2, &c2)
            };
            actor_loss += (alpha * sample.log_prob - qmin) / b;
            mean_log_prob += sample.log_prob / b;
            let dq_dinput = nn::backward_input_grad(min_spec, min_params, min_cache, &[1.0])?;
            let dq_da = &dq_dinput[self.obs_dim..];

            // Chain into the [mean | log_std] head.
            let mut upstream = vec![0.0; 2 * self.act_dim];
            for i in 0..self.act_dim {
                let y = sample.squashed[i];
                let half_range = 0.5 * (self.action_high[i] - self.action_low[i]);
                let da_dmean = half_range * (1.0 - y * y);
                let dlogp_dmean = 2.0 * y;
                upstream[i] = (alpha * dlogp_dmean - dq_da[i] * da_dmean) / b;
                if sample.log_std_active[i] {
                    let du_dls = sample.std[i] * sample.noise[i];
                    let dlogp_dls = -1.0 + 2.0 * y * du_dls;
                    upstream[self.act_dim + i] =
                        (alpha * dlogp_dls - dq_da[i] * da_dmean * du_dls) / b;
                }
            }
            nn::backward_cached(&self.actor_spec, &self.actor, &cache, &upstream, &mut actor_grad)?;
        }
        if !actor_loss.is_finite() {
            return Err(self.non_finite("actor", batch));
        }
        self.adam_actor
            .step(self.actor.as_mut_slice(), actor_grad.as_slice());

        // Temperature step toward the target entropy, in log space.
        let temp_grad = -(mean_log_prob + self.target_entropy);
        let mut log_temp = [self.log_temperature];
        self.adam_temperature.step(&mut log_temp, &[temp_grad]);
        self.log_temperature = log_temp[0];

        // Target smoothing.
        self.target1.smooth_from(&self.critic1, self.cfg.tau);
        self.target2.smooth_from(&self.critic2, self.cfg.tau);

        self.updates += 1;
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            temperature: self.temperature(),
            mean_log_prob,
        })
    }

    /// Regression diagnostic: mean squared TD error of both critics on a
    /// batch, with deterministic next actions. No side effects.
    pub fn critic_diagnostic_loss(&self, batch: &[Transition]) -> Result<f64, SacError> {
        let mut input = vec![0.0; self.obs_dim + self.act_dim];
        let mut loss = 0.0;
        for t in batch {
            let y = if t.terminal || self.cfg.gamma == 0.0 {
                t.reward
            } else {
                let head = nn::forward(&self.actor_spec, &self.actor, &t.next_obs)?;
                let a = nn::deterministic_action(&head, &self.action_low, &self.action_high)?;
                input[..self.obs_dim].copy_from_slice(&t.next_obs);
                input[self.obs_dim..].copy_from_slice(&a);
                let q1 = nn::forward(&self.critic_spec, &self.target1, &input)?[0];
                let q2 = nn::forward(&self.critic_spec, &self.target2, &input)?[0];
                t.reward + self.cfg.gamma * q1.min(q2)
            };
            input[..self.obs_dim].copy_from_slice(&t.obs);
            input[self.obs_dim..].copy_from_slice(&t.action);
            let q1 = nn::forward(&self.critic_spec, &self.critic1, &input)?[0];
            let q2 = nn::forward(&self.critic_spec, &self.critic2, &input)?[0];
            loss += ((q1 - y).powi(2) + (q2 - y).powi(2)) / (2.0 * batch.len() as f64);
        }
        Ok(loss)
    }

    fn non_finite(&self, which: &'static str, batch: &[Transition]) -> SacError {
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let rmin = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let finite_obs = batch.iter().all(|t| t.obs.iter().all(|v| v.is_finite()));
        SacError::NonFiniteLoss {
            loss: which,
            update: self.updates,
            stats: format!(
                "batch={} reward range [{rmin}, {rmax}] obs finite: {finite_obs}, temperature {}",
                batch.len(),
                self.temperature()
            ),
        }
    }
}

/// Clamp helper shared by tests; mirrors the sampler's clamping.
pub fn clamp_log_std(raw: f64) -> f64 {
    raw.clamp(LOG_STD_MIN, LOG_STD_MAX)
}
