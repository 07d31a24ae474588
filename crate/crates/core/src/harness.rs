//! Evaluation harness: pairwise-damage success matrices, per-case task
//! traces, and the action-noise stress test.

use serde::{Deserialize, Serialize};

use crate::adversary::{evaluate_policy, AdversaryError};
use crate::env::EnvId;
use crate::envs::build_env;
use crate::fault::{make_q, AngleSource, DamageCase};
use crate::rng::{derive, label_hash, tags, Pcg32};
use crate::sac::{Learner, Policy, SacError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("checkpoint is for environment {checkpoint}, requested {requested}")]
    EnvMismatch {
        checkpoint: String,
        requested: String,
    },
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error(transparent)]
    Eval(#[from] AdversaryError),
    #[error(transparent)]
    Rollout(#[from] SacError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

/// N x N grid of success rates: diagonal (i, i) = only joint i damaged;
/// off-diagonal (i, j) = joints i and j damaged (symmetric by construction,
/// both cells come from the same evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessMatrix {
    pub n: usize,
    pub trials_per_cell: usize,
    pub env_id: String,
    pub policy_id: String,
    success_counts: Vec<usize>,
}

impl SuccessMatrix {
    pub fn new(n: usize, trials_per_cell: usize, env_id: String, policy_id: String) -> Self {
        SuccessMatrix {
            n,
            trials_per_cell,
            env_id,
            policy_id,
            success_counts: vec![0; n * n],
        }
    }

    pub fn set_cell(&mut self, i: usize, j: usize, successes: usize) {
        assert!(successes <= self.trials_per_cell);
        self.success_counts[i * self.n + j] = successes;
        self.success_counts[j * self.n + i] = successes;
    }

    pub fn successes(&self, i: usize, j: usize) -> usize {
        self.success_counts[i * self.n + j]
    }

    /// Exactly successes / trials; no smoothing.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.successes(i, j) as f64 / self.trials_per_cell as f64
    }

    pub fn mean(&self) -> f64 {
        let total: usize = self.success_counts.iter().sum();
        total as f64 / (self.trials_per_cell * self.n * self.n) as f64
    }

    pub fn diagonal_min(&self) -> f64 {
        (0..self.n)
            .map(|i| self.rate(i, i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal_mean(&self) -> f64 {
        (0..self.n).map(|i| self.rate(i, i)).sum::<f64>() / self.n as f64
    }
}

/// The unique cases behind an n x n matrix: singles first, then unordered
/// pairs, in deterministic order.
pub fn matrix_cases(n: usize) -> Vec<(usize, usize, DamageCase)> {
    let mut cases = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        cases.push((i, i, DamageCase::single(i)));
    }
    for i in 0..n {
        for j in i + 1..n {
            cases.push((i, j, DamageCase::pair(i, j)));
        }
    }
    cases
}

type CellResult = (usize, usize, usize);

/// Fill the success matrix for a policy: `trials` deterministic episodes per
/// case with fresh frozen angles. Cell seeds derive from the case label, so
/// results are independent of evaluation order and of `jobs`.
pub fn success_matrix(
    policy: &Policy,
    env_id: EnvId,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<SuccessMatrix, HarnessError> {
    check_env(policy, env_id)?;
    let n = build_env(env_id).spec().n_joints;
    let cases = matrix_cases(n);
    let jobs = jobs.max(1).min(cases.len());
    let mut results: Vec<CellResult> = Vec::with_capacity(cases.len());
    if jobs == 1 {
        let mut env = build_env(env_id);
        for (i, j, case) in &cases {
            let report = evaluate_policy(policy, env.as_mut(), case, trials, seed, 1.0)?;
            results.push((*i, *j, (report.success_rate * trials as f64).round() as usize));
        }
    } else {
        let chunks: Vec<Vec<(usize, usize, DamageCase)>> = (0..jobs)
            .map(|w| {
                cases
                    .iter()
                    .skip(w)
                    .step_by(jobs)
                    .cloned()
                    .collect::<Vec<_>>()
            })
            .collect();
        let outcome: Result<Vec<Vec<CellResult>>, HarnessError> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .into_iter()
                    .map(|chunk| {
                        scope.spawn(move || -> Result<Vec<CellResult>, HarnessError> {
                            let mut env = build_env(env_id);
                            let mut out = Vec::with_capacity(chunk.len());
                            for (i, j, case) in chunk {
                                let report =
                                    evaluate_policy(policy, env.as_mut(), &case, trials, seed, 1.0)?;
                                out.push((
                                    i,
                                    j,
                                    (report.success_rate * trials as f64).round() as usize,
                                ));
                            }
                            Ok(out)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("matrix worker panicked"))
                    .collect()
            });
        for chunk in outcome? {
            results.extend(chunk);
        }
    }
    let mut matrix = SuccessMatrix::new(
        n,
        trials,
        env_id.as_str().to_string(),
        policy.id.clone(),
    );
    for (i, j, successes) in results {
        matrix.set_cell(i, j, successes);
    }
    Ok(matrix)
}

/// One trace per episode: the per-step task scalar (valve angle for the
/// claw, goal distance for the kitty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTrace {
    /// Damage-case label; empty = the undamaged reference.
    pub label: String,
    pub values: Vec<f64>,
}

/// One deterministic episode per requested case, preceded by the undamaged
/// reference trace.
pub fn angle_traces(
    policy: &Policy,
    env_id: EnvId,
    cases: &[DamageCase],
    seed: u64,
) -> Result<Vec<AngleTrace>, HarnessError> {
    check_env(policy, env_id)?;
    let mut env = build_env(env_id);
    let mut all = Vec::with_capacity(cases.len() + 1);
    let reference = DamageCase::empty();
    for case in std::iter::once(&reference).chain(cases.iter()) {
        let case_seed = derive(seed, label_hash(case.label()));
        let mut angle_rng = Pcg32::new(derive(case_seed, tags::FROZEN_ANGLES), 31);
        let q = make_q(case, AngleSource::Random(&mut angle_rng), env.spec())
            .map_err(|e| HarnessError::Rollout(SacError::Env(e.into())))?;
        let traj = Learner::rollout(policy, env.as_mut(), q, false, case_seed, 1.0)?;
        all.push(AngleTrace {
            label: case.label().to_string(),
            values: traj.task_trace,
        });
    }
    Ok(all)
}

/// Success rate of the deterministic policy on the undamaged task with
/// i.i.d. Gaussian noise of scale sigma added to every action before
/// masking and clipping. Episode seeding matches [`evaluate_policy`], so
/// sigma = 0 reproduces its undamaged success rate exactly.
pub fn noise_experiment(
    policy: &Policy,
    env_id: EnvId,
    sigma: f64,
    episodes: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    if sigma < 0.0 {
        return Err(HarnessError::NegativeSigma(sigma));
    }
    check_env(policy, env_id)?;
    let mut env = build_env(env_id);
    let case = DamageCase::empty();
    let case_seed = derive(seed, label_hash(case.label()));
    let mut successes = 0usize;
    for e in 0..episodes {
        let episode_seed = case_seed.wrapping_add(e as u64);
        let q = crate::fault::JointWorkingState::undamaged(env.spec().n_joints);
        let mut noise_rng = Pcg32::new(derive(episode_seed, 0xA015E), 67);
        let mut obs = env.reset(q, derive(episode_seed, tags::EVAL_ENV))?;
        let mut rng_unused = Pcg32::new(0, 0);
        loop {
            let mut action = policy.act(&obs, true, &mut rng_unused)?;
            for a in &mut action {
                *a += sigma * noise_rng.normal();
            }
            let step = env.step(&action)?;
            obs = step.observation;
            if step.terminal {
                successes += step.success as usize;
                break;
            }
        }
    }
    Ok(successes as f64 / episodes as f64)
}

fn check_env(policy: &Policy, env_id: EnvId) -> Result<(), HarnessError> {
    if policy.env_id != env_id.as_str() {
        return Err(HarnessError::EnvMismatch {
            checkpoint: policy.env_id.clone(),
            requested: env_id.as_str().to_string(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sac::SacConfig;

    fn fresh_policy(env_id: EnvId) -> Policy {
        let env = build_env(env_id);
        let learner = Learner::new(
            env.spec(),
            SacConfig {
                hidden: vec![8],
                ..SacConfig::default()
            },
            1234,
            true,
        );
        let mut p = learner.policy();
        p.id = "fresh".into();
        p
    }

    #[test]
    fn matrix_has_right_case_count_and_episode_budget() {
        let cases = matrix_cases(9);
        assert_eq!(cases.len(), 9 + 36);
        // 54 cases x 10 trials = 540 episodes; 81 cells total in the matrix.
        let matrix = SuccessMatrix::new(9, 10, "claw".into(), "x".into());
        assert_eq!(matrix.success_counts.len(), 81);
    }

    #[test]
    fn fresh_policy_matrix_is_symmetric_and_mostly_zero() {
        let policy = fresh_policy(EnvId::Claw);
        let m = success_matrix(&policy, EnvId::Claw, 2, 5, 1).unwrap();
        for i in 0..m.n {
            for j in 0..m.n {
                assert_eq!(m.successes(i, j), m.successes(j, i));
            }
        }
        // An untrained policy never turns the valve 170 degrees.
        assert_eq!(m.mean(), 0.0);
    }

    #[test]
    fn matrix_is_identical_serial_and_parallel() {
        let policy = fresh_policy(EnvId::Claw);
        let serial = success_matrix(&policy, EnvId::Claw, 2, 9, 1).unwrap();
        let parallel = success_matrix(&policy, EnvId::Claw, 2, 9, 4).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn traces_start_with_reference_and_honor_empty_request() {
        let policy = fresh_policy(EnvId::Claw);
        let traces = angle_traces(&policy, EnvId::Claw, &[], 3).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].label, "");
        let cases = vec![DamageCase::single(0), DamageCase::pair(2, 7)];
        let traces = angle_traces(&policy, EnvId::Claw, &cases, 3).unwrap();
        assert_eq!(traces.len(), 3);
        assert_eq!(traces[1].label, "0");
        assert_eq!(traces[2].label, "2,7");
        assert!(traces.iter().all(|t| t.values.len() <= 200));
    }

    #[test]
    fn sigma_zero_matches_evaluate_policy_exactly() {
        let policy = fresh_policy(EnvId::Claw);
        let mut env = build_env(EnvId::Claw);
        let rate_eval = evaluate_policy(&policy, env.as_mut(), &DamageCase::empty(), 5, 77, 1.0)
            .unwrap()
            .success_rate;
        let rate_noise = noise_experiment(&policy, EnvId::Claw, 0.0, 5, 77).unwrap();
        assert_eq!(rate_eval, rate_noise);
    }

    #[test]
    fn env_mismatch_is_rejected() {
        let policy = fresh_policy(EnvId::Claw);
        assert!(matches!(
            success_matrix(&policy, EnvId::Kitty, 1, 0, 1),
            Err(HarnessError::EnvMismatch { .. })
        ));
        assert!(matches!(
            noise_experiment(&policy, EnvId::Kitty, 1.0, 1, 0),
            Err(HarnessError::EnvMismatch { .. })
        ));
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let policy = fresh_policy(EnvId::Claw);
        assert!(matches!(
            noise_experiment(&policy, EnvId::Claw, -0.1, 1, 0),
            Err(HarnessError::NegativeSigma(_))
        ));
    }
}
