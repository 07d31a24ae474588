//! Run configuration files: human-readable TOML mirroring the trainer
//! configuration plus environment selection and the output root. Unknown
//! keys are rejected, and a parsed config round-trips to an identical
//! canonical form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryConfig, TieBreak};
use crate::env::EnvId;
use crate::sac::SacConfig;
use crate::trainer::{InitialQ, TrainMode, TrainerConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    NotFound(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub env: EnvId,
    pub mode: TrainMode,
    pub seed: u64,
    pub n_iter: usize,
    pub episodes_per_iter: usize,
    pub initial_q: InitialQ,
    pub q_visible: bool,
    pub clear_buffer_on_switch: bool,
    pub undamaged_mixin: f64,
    pub eval_seed: Option<u64>,
    /// Parent directory for run directories when no explicit output is
    /// given. Overridden by the RSAC_OUT_ROOT environment variable and the
    /// --out flag, in that order of increasing precedence.
    pub out_root: String,
    pub adversary: AdversaryConfig,
    pub sac: SacConfig,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        let t = TrainerConfig::default();
        RunConfigFile {
            env: t.env,
            mode: t.mode,
            seed: t.seed,
            n_iter: t.n_iter,
            episodes_per_iter: t.episodes_per_iter,
            initial_q: t.initial_q,
            q_visible: t.q_visible,
            clear_buffer_on_switch: t.clear_buffer_on_switch,
            undamaged_mixin: t.undamaged_mixin,
            eval_seed: t.eval_seed,
            out_root: "runs".to_string(),
            adversary: t.adversary,
            sac: t.sac,
        }
    }
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            return Err(ConfigError::NotFound(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let config: RunConfigFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        config
            .to_trainer()
            .validate()
            .map_err(ConfigError::Invalid)?;
        Ok(config)
    }

    /// Canonical serialized form; parsing it back yields an equal value.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_trainer(&self) -> TrainerConfig {
        TrainerConfig {
            env: self.env,
            mode: self.mode,
            seed: self.seed,
            n_iter: self.n_iter,
            episodes_per_iter: self.episodes_per_iter,
            initial_q: self.initial_q,
            q_visible: self.q_visible,
            clear_buffer_on_switch: self.clear_buffer_on_switch,
            undamaged_mixin: self.undamaged_mixin,
            eval_seed: self.eval_seed,
            adversary: self.adversary.clone(),
            sac: self.sac.clone(),
        }
    }
}

/// Re-exported for CLI flag parsing.
pub fn parse_tie_break(s: &str) -> Result<TieBreak, String> {
    match s {
        "lowest-index" => Ok(TieBreak::LowestIndex),
        "random-seeded" => Ok(TieBreak::RandomSeeded),
        other => Err(format!("unknown tie-break {other:?}")),
    }
}
