//! Empirical checks: reward-conditional uncertainty ordering, failure
//! AUROC, Monte-Carlo convergence and the bound suite.

mod bounds;
mod convergence;

use serde::Serialize;

use crate::classifier::ReductionClassifier;
use crate::error::{Result, UqError};
use crate::model::AgentSystem;
use crate::uq::{AggregatorSpec, Analysis, LeafSet, ScoredLeaf};

pub use bounds::{bound_suite, BoundSuiteOptions, BoundSuiteReport, Violation};
pub use convergence::{mc_convergence, ConvergenceResult, Quantity, SizeResult};

/// Exact enumeration or a seeded sample of `n` rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    Sampled { n: usize, seed: u64 },
}

/// Maps a scored trajectory to an uncertainty value.
pub trait Scorer: Sync {
    fn name(&self) -> String;
    fn score(&self, leaf: &ScoredLeaf) -> Result<f64>;
}

impl Scorer for AggregatorSpec {
    fn name(&self) -> String {
        self.key()
    }

    fn score(&self, leaf: &ScoredLeaf) -> Result<f64> {
        leaf.decomposition.aggregate(self)
    }
}

/// Scores every trajectory the same.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Scorer for Constant {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn score(&self, _: &ScoredLeaf) -> Result<f64> {
        Ok(self.0)
    }
}

/// Scores 1 on failures and 0 on successes.
#[derive(Debug, Clone, Copy)]
pub struct FailureOracle;

impl Scorer for FailureOracle {
    fn name(&self) -> String {
        "failure-oracle".into()
    }

    fn score(&self, leaf: &ScoredLeaf) -> Result<f64> {
        Ok(if leaf.reward > 0.0 { 0.0 } else { 1.0 })
    }
}

/// The weighted trajectory population for `mode`.
pub fn scored_population(
    system: &AgentSystem,
    classifier: &dyn ReductionClassifier,
    mode: EvalMode,
) -> Result<Vec<ScoredLeaf>> {
    let leaves = match mode {
        EvalMode::Exact => LeafSet::exact(system)?,
        EvalMode::Sampled { n, seed } => {
            if n == 0 {
                return Err(UqError::Parameter("sampled mode needs at least one rollout".into()));
            }
            LeafSet::empirical(&system.sample_trajectories(n, seed))?
        }
    };
    Analysis::new(system, leaves).scored_leaves(classifier)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardLevel {
    pub reward: f64,
    pub mass: f64,
    pub mean_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesideratumResult {
    pub scorer: String,
    /// Levels in increasing reward order.
    pub levels: Vec<RewardLevel>,
    pub ordering_satisfied: bool,
    /// Smallest drop in mean uncertainty between adjacent reward levels.
    pub gap: f64,
    /// Present when rewards are binary.
    pub auroc: Option<f64>,
    pub mode: EvalMode,
}

/// Reward-conditional mean uncertainty. The ordering holds iff the means
/// strictly decrease as reward increases.
pub fn desideratum_check(
    system: &AgentSystem,
    classifier: &dyn ReductionClassifier,
    scorer: &dyn Scorer,
    mode: EvalMode,
) -> Result<DesideratumResult> {
    let population = scored_population(system, classifier, mode)?;
    desideratum_from(&population, scorer, mode)
}

pub fn desideratum_from(population: &[ScoredLeaf], scorer: &dyn Scorer, mode: EvalMode) -> Result<DesideratumResult> {
    let mut levels: Vec<RewardLevel> = Vec::new();
    for leaf in population.iter().filter(|l| l.probability > 0.0) {
        let u = scorer.score(leaf)?;
        let slot = match levels.iter().position(|l| l.reward == leaf.reward) {
            Some(i) => i,
            None => {
                levels.push(RewardLevel {
                    reward: leaf.reward,
                    mass: 0.0,
                    mean_uncertainty: 0.0,
                });
                levels.len() - 1
            }
        };
        levels[slot].mass += leaf.probability;
        levels[slot].mean_uncertainty += leaf.probability * u;
    }
    if levels.len() < 2 {
        return Err(UqError::Degenerate(
            "rewards take fewer than two distinct values with positive probability".into(),
        ));
    }
    for l in &mut levels {
        l.mean_uncertainty /= l.mass;
    }
    levels.sort_by(|a, b| a.reward.total_cmp(&b.reward));
    let gap = levels
        .windows(2)
        .map(|w| w[0].mean_uncertainty - w[1].mean_uncertainty)
        .fold(f64::INFINITY, f64::min);
    let binary = levels.len() == 2 && levels[0].reward == 0.0 && levels[1].reward == 1.0;
    let auroc = if binary {
        Some(auroc_from(population, scorer)?)
    } else {
        None
    };
    Ok(DesideratumResult {
        scorer: scorer.name(),
        levels,
        ordering_satisfied: gap > 0.0,
        gap,
        auroc,
        mode,
    })
}

/// AUROC of the scorer as a detector of zero-reward trajectories.
pub fn failure_auroc(
    system: &AgentSystem,
    classifier: &dyn ReductionClassifier,
    scorer: &dyn Scorer,
    mode: EvalMode,
) -> Result<f64> {
    auroc_from(&scored_population(system, classifier, mode)?, scorer)
}

pub fn auroc_from(population: &[ScoredLeaf], scorer: &dyn Scorer) -> Result<f64> {
    let mut points = Vec::with_capacity(population.len());
    for leaf in population {
        let failed = match leaf.reward {
            r if r == 0.0 => true,
            r if r == 1.0 => false,
            r => return Err(UqError::Parameter(format!("AUROC needs binary rewards, found {r}"))),
        };
        points.push((scorer.score(leaf)?, leaf.probability, failed));
    }
    weighted_auroc(&points)
}

/// `P(s_fail > s_ok) + P(s_fail = s_ok) / 2` for independent draws from the
/// weighted failure and success populations.
pub fn weighted_auroc(points: &[(f64, f64, bool)]) -> Result<f64> {
    if let Some(p) = points.iter().find(|p| p.0.is_nan()) {
        return Err(UqError::Parameter(format!("score {} is not a number", p.0)));
    }
    let mut sorted: Vec<&(f64, f64, bool)> = points.iter().filter(|p| p.1 > 0.0).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_fail: f64 = sorted.iter().filter(|p| p.2).map(|p| p.1).sum();
    let total_ok: f64 = sorted.iter().filter(|p| !p.2).map(|p| p.1).sum();
    if total_fail <= 0.0 || total_ok <= 0.0 {
        return Err(UqError::Degenerate("AUROC needs both failures and successes".into()));
    }
    let mut ok_below = 0.0;
    let mut acc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut fail_tie, mut ok_tie) = (0.0, 0.0);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].2 {
                fail_tie += sorted[j].1;
            } else {
                ok_tie += sorted[j].1;
            }
            j += 1;
        }
        acc += fail_tie * (ok_below + 0.5 * ok_tie);
        ok_below += ok_tie;
        i = j;
    }
    Ok(acc / (total_fail * total_ok))
}
