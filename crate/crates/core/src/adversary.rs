//! The adversary: finds the damage configuration that most degrades the
//! current policy.
//!
//! The search is parameter-free and stage-wise greedy: starting from an
//! empty set, each stage evaluates adding every remaining joint and keeps
//! the one with the lowest mean return. An exhaustive search over all sets
//! up to the same size serves as the oracle (and as an optional trainer
//! mode); greedy matches it whenever per-joint effects are additive but can
//! be beaten by crafted pair interactions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::fault::{make_q, AngleSource, DamageCase};
use crate::rng::{derive, label_hash, tags, Pcg32};
use crate::sac::{Learner, Policy, SacError};

#[derive(Debug, thiserror::Error)]
pub enum AdversaryError {
    #[error("greedy stage {stage}: no feasible candidate joints")]
    StageBlocked { stage: usize },
    #[error("evaluation needs at least one episode")]
    NoEpisodes,
    #[error("exhaustive search over {required} sets exceeds the budget of {budget}")]
    BudgetExceeded { required: usize, budget: usize },
    #[error("max_damaged {m} exceeds the environment's solvability bound {bound}")]
    MaxDamageTooLarge { m: usize, bound: usize },
    #[error(transparent)]
    Rollout(#[from] SacError),
}

/// Outcome of evaluating one damage case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub case: DamageCase,
    /// Mean undiscounted episode return; the p value the greedy search
    /// minimizes.
    pub mean_return: f64,
    pub mean_discounted_return: f64,
    pub success_rate: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Deterministic: among equal minima keep the lowest joint index.
    #[default]
    LowestIndex,
    /// Shuffle candidate order with a seeded stream before comparing.
    RandomSeeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversaryConfig {
    /// M: number of joints the search damages.
    pub max_damaged: usize,
    /// E: evaluation episodes per candidate.
    pub eval_episodes: usize,
    pub tie_break: TieBreak,
    /// Stop before M joints if damaging another joint no longer reduces the
    /// evaluated return. Off by default: the faithful search always damages
    /// exactly M joints.
    pub early_stop: bool,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            max_damaged: 2,
            eval_episodes: 5,
            tie_break: TieBreak::LowestIndex,
            early_stop: false,
        }
    }
}

/// Anything that can score a damage set. The production implementation rolls
/// evaluation episodes against an environment; tests use scripted closed
/// forms.
pub trait DamageEvaluator {
    fn n_joints(&self) -> usize;
    /// Solvability bound: largest damage-set size worth considering.
    fn max_damaged(&self) -> usize;
    fn evaluate(&mut self, case: &DamageCase) -> Result<EvaluationReport, AdversaryError>;
}

/// Rolls E deterministic-policy episodes per case, with frozen angles
/// resampled per episode. Episode seeds derive from the case label so
/// results do not depend on evaluation order.
pub struct RolloutEvaluator<'a> {
    pub policy: &'a Policy,
    pub env: &'a mut dyn Environment,
    pub episodes: usize,
    pub seed_base: u64,
    pub gamma: f64,
}

impl<'a> RolloutEvaluator<'a> {
    pub fn new(
        policy: &'a Policy,
        env: &'a mut dyn Environment,
        episodes: usize,
        seed_base: u64,
        gamma: f64,
    ) -> Self {
        RolloutEvaluator {
            policy,
            env,
            episodes,
            seed_base,
            gamma,
        }
    }
}

impl DamageEvaluator for RolloutEvaluator<'_> {
    fn n_joints(&self) -> usize {
        self.env.spec().n_joints
    }

    fn max_damaged(&self) -> usize {
        self.env.spec().max_damaged
    }

    fn evaluate(&mut self, case: &DamageCase) -> Result<EvaluationReport, AdversaryError> {
        evaluate_policy(self.policy, self.env, case, self.episodes, self.seed_base, self.gamma)
    }
}

/// Mean return / success rate of the deterministic policy over E episodes of
/// the given damage case, fresh frozen angles each episode.
pub fn evaluate_policy(
    policy: &Policy,
    env: &mut dyn Environment,
    case: &DamageCase,
    episodes: usize,
    seed_base: u64,
    gamma: f64,
) -> Result<EvaluationReport, AdversaryError> {
    if episodes == 0 {
        return Err(AdversaryError::NoEpisodes);
    }
    let case_seed = derive(seed_base, label_hash(case.label()));
    let mut mean_return = 0.0;
    let mut mean_discounted = 0.0;
    let mut successes = 0usize;
    for e in 0..episodes {
        let episode_seed = case_seed.wrapping_add(e as u64);
        let mut angle_rng = Pcg32::new(derive(episode_seed, tags::FROZEN_ANGLES), 31);
        let q = make_q(case, AngleSource::Random(&mut angle_rng), env.spec())
            .map_err(|e| AdversaryError::Rollout(SacError::Env(e.into())))?;
        let traj = Learner::rollout(policy, env, q, false, episode_seed, gamma)?;
        mean_return += traj.episode_return / episodes as f64;
        mean_discounted += traj.discounted_return / episodes as f64;
        successes += traj.success as usize;
    }
    Ok(EvaluationReport {
        case: case.clone(),
        mean_return,
        mean_discounted_return: mean_discounted,
        success_rate: successes as f64 / episodes as f64,
        episodes,
    })
}

/// One stage of the greedy search trace: every candidate's score and the
/// chosen joint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchStage {
    pub stage: usize,
    pub candidates: Vec<EvaluationReport>,
    pub chosen_joint: usize,
    pub chosen_return: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SearchTrace {
    pub stages: Vec<SearchStage>,
}

impl SearchTrace {
    /// Structured text form, one candidate per line; the audit trail for the
    /// greedy search.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for stage in &self.stages {
            out.push_str(&format!("stage {}\n", stage.stage));
            for c in &stage.candidates {
                out.push_str(&format!(
                    "  candidate {}\tp={}\tsuccess_rate={}\n",
                    c.case.label(),
                    c.mean_return,
                    c.success_rate
                ));
            }
            out.push_str(&format!(
                "  chosen joint {} (p={})\n",
                stage.chosen_joint, stage.chosen_return
            ));
        }
        out
    }
}

/// Stage-wise greedy search for the damage set of size `max_damaged` that
/// minimizes evaluated return. Performs exactly sum_{m=1..M} (N - m + 1)
/// evaluations.
pub fn greedy_search(
    evaluator: &mut dyn DamageEvaluator,
    config: &AdversaryConfig,
    seed: u64,
) -> Result<(DamageCase, SearchTrace), AdversaryError> {
    if config.max_damaged > evaluator.max_damaged() {
        return Err(AdversaryError::MaxDamageTooLarge {
            m: config.max_damaged,
            bound: evaluator.max_damaged(),
        });
    }
    let n = evaluator.n_joints();
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    let mut trace = SearchTrace::default();
    let mut tie_rng = Pcg32::new(derive(seed, 0x71E), 37);
    let mut current_p = if config.early_stop {
        Some(evaluator.evaluate(&DamageCase::empty())?.mean_return)
    } else {
        None
    };
    for stage in 1..=config.max_damaged {
        let mut candidates: Vec<usize> = (0..n).filter(|j| !chosen.contains(j)).collect();
        if candidates.is_empty() {
            return Err(AdversaryError::StageBlocked { stage });
        }
        if config.tie_break == TieBreak::RandomSeeded {
            // Fisher-Yates with the seeded stream.
            for i in (1..candidates.len()).rev() {
                let j = tie_rng.below(i + 1);
                candidates.swap(i, j);
            }
        }
        let mut reports: Vec<(usize, EvaluationReport)> = Vec::with_capacity(candidates.len());
        let mut best: Option<(usize, f64)> = None;
        for &joint in &candidates {
            let mut set = chosen.clone();
            set.insert(joint);
            let report = evaluator.evaluate(&DamageCase::new(set))?;
            let p = report.mean_return;
            reports.push((joint, report));
            // Strict comparison keeps the earliest candidate on ties, which
            // is the lowest index unless the order was shuffled.
            if best.is_none_or(|(_, bp)| p < bp) {
                best = Some((joint, p));
            }
        }
        let (joint, p) = best.expect("at least one candidate");
        if let Some(cur) = current_p {
            if p >= cur {
                break;
            }
            current_p = Some(p);
        }
        chosen.insert(joint);
        // Record candidates in ascending joint order regardless of shuffle.
        reports.sort_by_key(|(j, _)| *j);
        trace.stages.push(SearchStage {
            stage,
            candidates: reports.into_iter().map(|(_, r)| r).collect(),
            chosen_joint: joint,
            chosen_return: p,
        });
    }
    Ok((DamageCase::new(chosen), trace))
}

/// Evaluate every damage set of size <= max_damaged and return the global
/// minimizer. `budget` caps the number of sets.
pub fn exhaustive_search(
    evaluator: &mut dyn DamageEvaluator,
    max_damaged: usize,
    budget: usize,
) -> Result<(DamageCase, EvaluationReport), AdversaryError> {
    if max_damaged > evaluator.max_damaged() {
        return Err(AdversaryError::MaxDamageTooLarge {
            m: max_damaged,
            bound: evaluator.max_damaged(),
        });
    }
    let n = evaluator.n_joints();
    let sets = enumerate_sets(n, max_damaged);
    if sets.len() > budget {
        return Err(AdversaryError::BudgetExceeded {
            required: sets.len(),
            budget,
        });
    }
    let mut best: Option<EvaluationReport> = None;
    for set in sets {
        let report = evaluator.evaluate(&DamageCase::new(set))?;
        let better = match &best {
            None => true,
            Some(b) => report.mean_return < b.mean_return,
        };
        if better {
            best = Some(report);
        }
    }
    let report = best.expect("the empty set is always evaluated");
    Ok((report.case.clone(), report))
}

/// All subsets of {0..n} with size <= m, in deterministic order
/// (by size, then lexicographic).
pub fn enumerate_sets(n: usize, m: usize) -> Vec<BTreeSet<usize>> {
    let mut out = vec![BTreeSet::new()];
    let mut current: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    for _ in 0..m {
        let mut next = Vec::new();
        for set in &current {
            let start = set.iter().max().map_or(0, |x| x + 1);
            for j in start..n {
                let mut grown = set.clone();
                grown.insert(j);
                next.push(grown);
            }
        }
        out.extend(next.iter().cloned());
        current = next;
    }
    out
}

/// Scripted evaluator with additive per-joint weights:
/// p(U) = base - sum of weights over U. Greedy and exhaustive agree on it.
pub struct AdditiveEvaluator {
    pub base: f64,
    pub weights: Vec<f64>,
    pub max_damaged: usize,
}

impl DamageEvaluator for AdditiveEvaluator {
    fn n_joints(&self) -> usize {
        self.weights.len()
    }

    fn max_damaged(&self) -> usize {
        self.max_damaged
    }

    fn evaluate(&mut self, case: &DamageCase) -> Result<EvaluationReport, AdversaryError> {
        let p = self.base - case.set().iter().map(|&j| self.weights[j]).sum::<f64>();
        Ok(EvaluationReport {
            case: case.clone(),
            mean_return: p,
            mean_discounted_return: p,
            success_rate: 0.0,
            episodes: 1,
        })
    }
}

/// Scripted evaluator with an additive part plus pairwise interaction
/// bonuses; used to build greedy traps.
pub struct PairwiseEvaluator {
    pub base: f64,
    pub weights: Vec<f64>,
    /// (i, j, extra drop when both damaged).
    pub interactions: Vec<(usize, usize, f64)>,
    pub max_damaged: usize,
}

impl DamageEvaluator for PairwiseEvaluator {
    fn n_joints(&self) -> usize {
        self.weights.len()
    }

    fn max_damaged(&self) -> usize {
        self.max_damaged
    }

    fn evaluate(&mut self, case: &DamageCase) -> Result<EvaluationReport, AdversaryError> {
        let mut p = self.base - case.set().iter().map(|&j| self.weights[j]).sum::<f64>();
        for &(i, j, drop) in &self.interactions {
            if case.set().contains(&i) && case.set().contains(&j) {
                p -= drop;
            }
        }
        Ok(EvaluationReport {
            case: case.clone(),
            mean_return: p,
            mean_discounted_return: p,
            success_rate: 0.0,
            episodes: 1,
        })
    }
}

/// The committed greedy-trap fixture: joint 0 looks best alone, but the
/// {1, 2} interaction is far worse than anything greedy can reach after
/// committing to 0.
pub fn greedy_trap_evaluator(n: usize) -> PairwiseEvaluator {
    let mut weights = vec![1.0; n];
    weights[0] = 5.0;
    PairwiseEvaluator {
        base: 100.0,
        weights,
        interactions: vec![(1, 2, 80.0)],
        max_damaged: n,
    }
}
