//! Concrete task environments.

pub mod bandit;
pub mod claw;
pub mod kitty;

use crate::env::{EnvId, Environment};

/// Build an environment with its committed parameters.
pub fn build_env(id: EnvId) -> Box<dyn Environment> {
    match id {
        EnvId::Claw => Box::new(claw::ClawValveEnv::default_env()),
        EnvId::Kitty => Box::new(kitty::KittyWalkEnv::default_env()),
    }
}
