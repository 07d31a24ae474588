//! Versioned checkpoint format.
//!
//! A checkpoint is a JSON header (metadata, configs, RNG states, layouts)
//! followed by raw little-endian f64 sections: the five parameter vectors
//! (actor, twin critics, their targets), optionally the optimizer moments,
//! and optionally the replay buffer. Raw f64 bytes round-trip exactly, which
//! is what makes checkpoint-resume bit-identical to an uninterrupted run.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{Adam, MlpSpec, ParamVector};
use crate::rng::Pcg32;
use crate::sac::{Learner, Policy, ReplayBuffer, SacConfig, Transition};

pub const MAGIC: &[u8; 8] = b"RSACSNAP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not the supported version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

impl CheckpointError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CheckpointError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Optimizer hyperparameters and step count; moments live in the binary
/// sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamMeta {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
}

impl AdamMeta {
    fn of(adam: &Adam) -> Self {
        let (_, _, t) = adam.parts();
        AdamMeta {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            t,
        }
    }
}

/// RNG streams owned by the trainer, captured for exact resume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerRngs {
    pub explore: Pcg32,
    pub env_seed: Pcg32,
    pub angles: Pcg32,
    pub mixin: Pcg32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub env_id: String,
    pub mode: String,
    pub policy_id: String,
    pub q_visible: bool,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub actor_spec: MlpSpec,
    pub critic_spec: MlpSpec,
    pub log_temperature: f64,
    pub target_entropy: f64,
    pub sac: SacConfig,
    pub env_steps: u64,
    pub updates: u64,
    pub iteration: usize,
    pub learner_rng: Pcg32,
    pub trainer_rngs: Option<TrainerRngs>,
    /// Damage-set label training will resume under.
    pub current_case: String,
    pub adam_actor: AdamMeta,
    pub adam_critic1: AdamMeta,
    pub adam_critic2: AdamMeta,
    pub adam_temperature: AdamMeta,
    pub has_optimizer_moments: bool,
    pub has_buffer: bool,
    pub buffer_capacity: usize,
    pub buffer_len: usize,
    pub buffer_cursor: usize,
}

/// Everything read back from disk.
pub struct LoadedCheckpoint {
    pub header: CheckpointHeader,
    pub actor: ParamVector,
    pub critic1: ParamVector,
    pub critic2: ParamVector,
    pub target1: ParamVector,
    pub target2: ParamVector,
    pub moments: Option<Moments>,
    pub buffer: Option<ReplayBuffer>,
}

pub struct Moments {
    pub actor: (Vec<f64>, Vec<f64>),
    pub critic1: (Vec<f64>, Vec<f64>),
    pub critic2: (Vec<f64>, Vec<f64>),
    pub temperature: (Vec<f64>, Vec<f64>),
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read) -> Result<Vec<f64>, std::io::Error> {
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)?;
    let len = u64::from_le_bytes(len8) as usize;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Extra metadata the trainer attaches when saving.
#[derive(Debug, Clone, Default)]
pub struct SaveContext {
    pub mode: String,
    pub policy_id: String,
    pub iteration: usize,
    pub trainer_rngs: Option<TrainerRngs>,
    pub current_case: String,
}

pub fn save_checkpoint(
    path: &Path,
    learner: &Learner,
    ctx: &SaveContext,
    include_optimizer: bool,
    include_buffer: bool,
) -> Result<(), CheckpointError> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        env_id: learner.env_id.clone(),
        mode: ctx.mode.clone(),
        policy_id: ctx.policy_id.clone(),
        q_visible: learner.q_visible,
        obs_dim: learner.obs_dim,
        act_dim: learner.act_dim,
        action_low: learner.action_low.clone(),
        action_high: learner.action_high.clone(),
        actor_spec: learner.actor_spec.clone(),
        critic_spec: learner.critic_spec.clone(),
        log_temperature: learner.log_temperature,
        target_entropy: learner.target_entropy,
        sac: learner.cfg.clone(),
        env_steps: learner.env_steps,
        updates: learner.updates,
        iteration: ctx.iteration,
        learner_rng: learner.learner_rng.clone(),
        trainer_rngs: ctx.trainer_rngs.clone(),
        current_case: ctx.current_case.clone(),
        adam_actor: AdamMeta::of(&learner.adam_actor),
        adam_critic1: AdamMeta::of(&learner.adam_critic1),
        adam_critic2: AdamMeta::of(&learner.adam_critic2),
        adam_temperature: AdamMeta::of(&learner.adam_temperature),
        has_optimizer_moments: include_optimizer,
        has_buffer: include_buffer,
        buffer_capacity: learner.buffer.capacity(),
        buffer_len: learner.buffer.len(),
        buffer_cursor: learner.buffer.cursor(),
    };
    let json = serde_json::to_vec(&header)
        .map_err(|e| CheckpointError::Corrupt(format!("header encode: {e}")))?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CheckpointError::io(path, e))?;
    }
    let file = File::create(path).map_err(|e| CheckpointError::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for params in [
            &learner.actor,
            &learner.critic1,
            &learner.critic2,
            &learner.target1,
            &learner.target2,
        ] {
            write_f64s(&mut w, params.as_slice())?;
        }
        if include_optimizer {
            for adam in [
                &learner.adam_actor,
                &learner.adam_critic1,
                &learner.adam_critic2,
                &learner.adam_temperature,
            ] {
                let (m, v, _) = adam.parts();
                write_f64s(&mut w, m)?;
                write_f64s(&mut w, v)?;
            }
        }
        if include_buffer {
            for t in learner.buffer.iter() {
                write_f64s(&mut w, &t.obs)?;
                write_f64s(&mut w, &t.action)?;
                w.write_all(&t.reward.to_le_bytes())?;
                write_f64s(&mut w, &t.next_obs)?;
                w.write_all(&[t.terminal as u8])?;
            }
        }
        w.flush()
    })()
    .map_err(|e| CheckpointError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    let file = File::open(path).map_err(|e| CheckpointError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| CheckpointError::io(path, e))?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut ver4 = [0u8; 4];
    r.read_exact(&mut ver4)
        .map_err(|e| CheckpointError::io(path, e))?;
    let found = u32::from_le_bytes(ver4);
    if found != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found,
            supported: FORMAT_VERSION,
        });
    }
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)
        .map_err(|e| CheckpointError::io(path, e))?;
    let mut json = vec![0u8; u64::from_le_bytes(len8) as usize];
    r.read_exact(&mut json)
        .map_err(|e| CheckpointError::io(path, e))?;
    let header: CheckpointHeader = serde_json::from_slice(&json)
        .map_err(|e| CheckpointError::Corrupt(format!("header decode: {e}")))?;

    let mut read_params = |spec: &MlpSpec| -> Result<ParamVector, CheckpointError> {
        let data = read_f64s(&mut r).map_err(|e| CheckpointError::io(path, e))?;
        ParamVector::from_data(spec, data)
            .map_err(|e| CheckpointError::Corrupt(format!("parameter section: {e}")))
    };
    let actor = read_params(&header.actor_spec)?;
    let critic1 = read_params(&header.critic_spec)?;
    let critic2 = read_params(&header.critic_spec)?;
    let target1 = read_params(&header.critic_spec)?;
    let target2 = read_params(&header.critic_spec)?;

    let moments = if header.has_optimizer_moments {
        let mut pair = || -> Result<(Vec<f64>, Vec<f64>), CheckpointError> {
            let m = read_f64s(&mut r).map_err(|e| CheckpointError::io(path, e))?;
            let v = read_f64s(&mut r).map_err(|e| CheckpointError::io(path, e))?;
            Ok((m, v))
        };
        Some(Moments {
            actor: pair()?,
            critic1: pair()?,
            critic2: pair()?,
            temperature: pair()?,
        })
    } else {
        None
    };

    let buffer = if header.has_buffer {
        let mut data = Vec::with_capacity(header.buffer_len);
        for _ in 0..header.buffer_len {
            let obs = read_f64s(&mut r).map_err(|e| CheckpointError::io(path, e))?;
            let action = read_f64s(&mut r).map_err(|e| CheckpointError::io(path, e))?;
            let mut rb = [0u8; 8];
            r.read_exact(&mut rb).map_err(|e| CheckpointError::io(path, e))?;
            let next_obs = read_f64s(&mut r).map_err(|e| CheckpointError::io(path, e))?;
            let mut tb = [0u8; 1];
            r.read_exact(&mut tb).map_err(|e| CheckpointError::io(path, e))?;
            data.push(Transition {
                obs,
                action,
                reward: f64::from_le_bytes(rb),
                next_obs,
                terminal: tb[0] != 0,
            });
        }
        Some(ReplayBuffer::restore(
            header.buffer_capacity,
            header.buffer_cursor,
            data,
        ))
    } else {
        None
    };

    Ok(LoadedCheckpoint {
        header,
        actor,
        critic1,
        critic2,
        target1,
        target2,
        moments,
        buffer,
    })
}

impl LoadedCheckpoint {
    /// The acting policy stored in this checkpoint.
    pub fn policy(&self) -> Policy {
        Policy {
            actor_spec: self.header.actor_spec.clone(),
            actor: self.actor.clone(),
            action_low: self.header.action_low.clone(),
            action_high: self.header.action_high.clone(),
            obs_dim: self.header.obs_dim,
            n_joints: self.header.act_dim,
            q_visible: self.header.q_visible,
            env_id: self.header.env_id.clone(),
            id: self.header.policy_id.clone(),
        }
    }

    /// Rebuild a full learner. Requires optimizer moments; a missing buffer
    /// section restores an empty buffer.
    pub fn into_learner(self) -> Result<Learner, CheckpointError> {
        let moments = self.moments.ok_or_else(|| {
            CheckpointError::Corrupt("checkpoint has no optimizer moments; cannot resume".into())
        })?;
        let h = self.header;
        let restore =
            |meta: &AdamMeta, (m, v): (Vec<f64>, Vec<f64>)| -> Adam {
                Adam::restore(meta.lr, meta.beta1, meta.beta2, meta.eps, meta.t, m, v)
            };
        let buffer = self
            .buffer
            .unwrap_or_else(|| ReplayBuffer::new(h.buffer_capacity));
        Ok(Learner {
            cfg: h.sac.clone(),
            actor_spec: h.actor_spec,
            critic_spec: h.critic_spec,
            actor: self.actor,
            critic1: self.critic1,
            critic2: self.critic2,
            target1: self.target1,
            target2: self.target2,
            log_temperature: h.log_temperature,
            target_entropy: h.target_entropy,
            adam_actor: restore(&h.adam_actor, moments.actor),
            adam_critic1: restore(&h.adam_critic1, moments.critic1),
            adam_critic2: restore(&h.adam_critic2, moments.critic2),
            adam_temperature: restore(&h.adam_temperature, moments.temperature),
            buffer,
            learner_rng: h.learner_rng,
            env_steps: h.env_steps,
            updates: h.updates,
            obs_dim: h.obs_dim,
            act_dim: h.act_dim,
            action_low: h.action_low,
            action_high: h.action_high,
            q_visible: h.q_visible,
            env_id: h.env_id,
            scratch: Vec::new(),
        })
    }
}
