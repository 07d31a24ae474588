//! Fault-aware adversarial reinforcement learning for joint-damage
//! robustness.
//!
//! The crate trains a damage-conditioned control policy by alternating two
//! processes: soft actor-critic training under a fixed joint-damage
//! configuration, and a greedy combinatorial search for the damage
//! configuration that most degrades the current policy. Desk-scale
//! manipulation (ClawValve) and locomotion (KittyWalk) tasks plus an
//! evaluation harness (success-rate heatmaps, per-case traces, action-noise
//! stress tests) round out the framework.

pub mod adversary;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod envs;
pub mod fault;
pub mod harness;
pub mod nn;
pub mod report;
pub mod rng;
pub mod sac;
pub mod trainer;

pub use env::{EnvId, EnvObservation, EnvSpec, Environment, StepResult};
pub use fault::{DamageCase, DamageMode, JointWorkingState};
