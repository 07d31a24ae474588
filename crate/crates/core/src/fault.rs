//! Joint-damage configurations and their application semantics.
//!
//! A [`JointWorkingState`] is the per-joint damage vector an episode runs
//! under: which joints are damaged, the angle each damaged joint is locked
//! at, and the damage mode. It is fixed for the whole episode and is never
//! touched by actions; the environments enforce that by pinning damaged
//! joints kinematically and by masking actions and sensor readings through
//! the functions below.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::EnvSpec;
use crate::rng::Pcg32;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FaultError {
    #[error("joint index {index} out of range for {n_joints} joints")]
    IndexOutOfRange { index: usize, n_joints: usize },
    #[error("{requested} damaged joints requested but the environment is only solvable up to {max_damaged}")]
    TooManyDamaged { requested: usize, max_damaged: usize },
    #[error("explicit frozen angle {angle} for joint {index} outside feasible range [{low}, {high}]")]
    AngleOutOfRange {
        index: usize,
        angle: f64,
        low: f64,
        high: f64,
    },
    #[error("expected vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("damage case label {0:?} is not a comma-separated list of joint indices")]
    BadLabel(String),
}

/// How a damaged joint behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DamageMode {
    /// The joint is locked at its frozen angle; commands are ignored.
    #[default]
    Frozen,
    /// The joint executes a fresh uniform action each step.
    RandomAction,
}

/// Per-joint damage state for one episode.
///
/// Immutable after construction. Sensors of damaged joints read 0 and, in
/// `Frozen` mode, the joint stays at `frozen_angle` no matter what is
/// commanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointWorkingState {
    damaged: Vec<bool>,
    frozen_angle: Vec<f64>,
    mode: DamageMode,
}

impl JointWorkingState {
    /// All joints working; behaves identically to running without a damage
    /// wrapper at all.
    pub fn undamaged(n_joints: usize) -> Self {
        JointWorkingState {
            damaged: vec![false; n_joints],
            frozen_angle: vec![0.0; n_joints],
            mode: DamageMode::Frozen,
        }
    }

    pub fn n_joints(&self) -> usize {
        self.damaged.len()
    }

    pub fn damaged(&self) -> &[bool] {
        &self.damaged
    }

    pub fn is_damaged(&self, joint: usize) -> bool {
        self.damaged[joint]
    }

    pub fn frozen_angle(&self) -> &[f64] {
        &self.frozen_angle
    }

    pub fn mode(&self) -> DamageMode {
        self.mode
    }

    pub fn damaged_count(&self) -> usize {
        self.damaged.iter().filter(|d| **d).count()
    }

    pub fn damaged_set(&self) -> BTreeSet<usize> {
        self.damaged
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.then_some(i))
            .collect()
    }

    /// 0/1 flags in joint order; this is the form appended to observations.
    pub fn flags(&self) -> Vec<f64> {
        self.damaged.iter().map(|d| if *d { 1.0 } else { 0.0 }).collect()
    }

    pub fn label(&self) -> String {
        DamageCase::new(self.damaged_set()).label().to_string()
    }

    /// FNV-1a hash over the full content. Episode-level tests use this to
    /// verify that nothing mutates q between reset and the final step.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        };
        eat(match self.mode {
            DamageMode::Frozen => 0,
            DamageMode::RandomAction => 1,
        });
        for d in &self.damaged {
            eat(*d as u8);
        }
        for a in &self.frozen_angle {
            for b in a.to_le_bytes() {
                eat(b);
            }
        }
        h
    }
}

/// A set of damaged joints plus its report label ("2,7"; empty = undamaged).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DamageCase {
    damaged_set: BTreeSet<usize>,
    label: String,
}

impl DamageCase {
    pub fn new(damaged_set: BTreeSet<usize>) -> Self {
        let label = damaged_set
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        DamageCase { damaged_set, label }
    }

    pub fn empty() -> Self {
        DamageCase::new(BTreeSet::new())
    }

    pub fn single(joint: usize) -> Self {
        DamageCase::new(BTreeSet::from([joint]))
    }

    pub fn pair(a: usize, b: usize) -> Self {
        DamageCase::new(BTreeSet::from([a, b]))
    }

    pub fn set(&self) -> &BTreeSet<usize> {
        &self.damaged_set
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.damaged_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.damaged_set.is_empty()
    }

    pub fn validate(&self, spec: &EnvSpec) -> Result<(), FaultError> {
        for &i in &self.damaged_set {
            if i >= spec.n_joints {
                return Err(FaultError::IndexOutOfRange {
                    index: i,
                    n_joints: spec.n_joints,
                });
            }
        }
        if self.damaged_set.len() > spec.max_damaged {
            return Err(FaultError::TooManyDamaged {
                requested: self.damaged_set.len(),
                max_damaged: spec.max_damaged,
            });
        }
        Ok(())
    }
}

impl fmt::Display for DamageCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for DamageCase {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Ok(DamageCase::empty());
        }
        let mut set = BTreeSet::new();
        for part in trimmed.split(',') {
            let idx: usize = part
                .trim()
                .parse()
                .map_err(|_| FaultError::BadLabel(s.to_string()))?;
            set.insert(idx);
        }
        Ok(DamageCase::new(set))
    }
}

/// Where frozen angles come from when constructing a q.
pub enum AngleSource<'a> {
    /// Sample uniformly from each joint's feasible frozen range.
    Random(&'a mut Pcg32),
    /// Explicit per-damaged-joint angles, in ascending joint order.
    Explicit(&'a [f64]),
}

/// Build a [`JointWorkingState`] with exactly the given joints damaged.
///
/// Frozen angles are drawn from (or checked against) the environment's
/// feasible frozen-angle ranges; undamaged entries are 0 by convention and
/// never read.
pub fn make_q(
    case: &DamageCase,
    angles: AngleSource<'_>,
    spec: &EnvSpec,
) -> Result<JointWorkingState, FaultError> {
    make_q_mode(case, angles, spec, DamageMode::Frozen)
}

/// [`make_q`] with an explicit damage mode.
pub fn make_q_mode(
    case: &DamageCase,
    angles: AngleSource<'_>,
    spec: &EnvSpec,
    mode: DamageMode,
) -> Result<JointWorkingState, FaultError> {
    case.validate(spec)?;
    let mut damaged = vec![false; spec.n_joints];
    let mut frozen_angle = vec![0.0; spec.n_joints];
    match angles {
        AngleSource::Random(rng) => {
            for &i in case.set() {
                let (low, high) = spec.feasible_frozen_ranges[i];
                damaged[i] = true;
                frozen_angle[i] = rng.uniform_in(low, high);
            }
        }
        AngleSource::Explicit(values) => {
            if values.len() != case.len() {
                return Err(FaultError::DimensionMismatch {
                    expected: case.len(),
                    got: values.len(),
                });
            }
            for (&i, &a) in case.set().iter().zip(values) {
                let (low, high) = spec.feasible_frozen_ranges[i];
                if !(low..=high).contains(&a) {
                    return Err(FaultError::AngleOutOfRange {
                        index: i,
                        angle: a,
                        low,
                        high,
                    });
                }
                damaged[i] = true;
                frozen_angle[i] = a;
            }
        }
    }
    Ok(JointWorkingState {
        damaged,
        frozen_angle,
        mode,
    })
}

/// Apply damage to a commanded action vector.
///
/// Frozen mode zeroes the commanded delta on damaged joints, which together
/// with kinematic pinning keeps the joint target equal to its frozen angle.
/// RandomAction mode replaces the entry with a fresh uniform sample over that
/// joint's action range. Undamaged entries pass through untouched.
pub fn mask_action(
    q: &JointWorkingState,
    action: &[f64],
    action_low: &[f64],
    action_high: &[f64],
    rng: &mut Pcg32,
) -> Result<Vec<f64>, FaultError> {
    if action.len() != q.n_joints() {
        return Err(FaultError::DimensionMismatch {
            expected: q.n_joints(),
            got: action.len(),
        });
    }
    let mut out = action.to_vec();
    for i in 0..q.n_joints() {
        if q.is_damaged(i) {
            out[i] = match q.mode() {
                DamageMode::Frozen => 0.0,
                DamageMode::RandomAction => rng.uniform_in(action_low[i], action_high[i]),
            };
        }
    }
    Ok(out)
}

/// Zero the sensor channels of damaged joints; others are untouched.
pub fn mask_observation(
    q: &JointWorkingState,
    joint_sensors: &[f64],
) -> Result<Vec<f64>, FaultError> {
    if joint_sensors.len() != q.n_joints() {
        return Err(FaultError::DimensionMismatch {
            expected: q.n_joints(),
            got: joint_sensors.len(),
        });
    }
    let mut out = joint_sensors.to_vec();
    for (i, v) in out.iter_mut().enumerate() {
        if q.is_damaged(i) {
            *v = 0.0;
        }
    }
    Ok(out)
}
