use std::collections::HashMap;

use serde::Serialize;

use super::report::TurnAccumulator;
use super::{AggregatorSpec, InitialUncertainty, Lemma1Bounds, Mode, UncertaintyReport};
use crate::classifier::{GateView, ReductionClassifier};
use crate::error::{Result, UqError};
use crate::model::{AgentSystem, Trajectory};

/// A finite trajectory distribution: either the exact enumeration of a
/// system or the empirical distribution of a sample.
#[derive(Debug, Clone)]
pub struct LeafSet {
    leaves: Vec<(Trajectory, f64)>,
    exact: bool,
}

impl LeafSet {
    pub fn exact(system: &AgentSystem) -> Result<Self> {
        Ok(Self {
            leaves: system.enumerate_trajectories()?,
            exact: true,
        })
    }

    pub fn exact_with_cap(system: &AgentSystem, cap: u128) -> Result<Self> {
        Ok(Self {
            leaves: system.enumerate_with_cap(cap)?,
            exact: true,
        })
    }

    /// Groups identical event sequences and weights them by frequency.
    pub fn empirical(samples: &[Trajectory]) -> Result<Self> {
        if samples.is_empty() {
            return Err(UqError::Degenerate("no sampled trajectories".into()));
        }
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut leaves: Vec<(Trajectory, f64)> = Vec::new();
        for t in samples {
            let slot = *index.entry(event_key(t)).or_insert_with(|| {
                leaves.push((t.clone(), 0.0));
                leaves.len() - 1
            });
            leaves[slot].1 += 1.0;
        }
        let n = samples.len() as f64;
        for leaf in &mut leaves {
            leaf.1 /= n;
        }
        Ok(Self { leaves, exact: false })
    }

    pub fn leaves(&self) -> &[(Trajectory, f64)] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Entropy of the leaf distribution itself.
    pub fn joint_entropy(&self) -> f64 {
        -self
            .leaves
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(_, p)| p * p.ln())
            .sum::<f64>()
    }
}

/// The realized event sequence `[task, O_0, A_1, O_1, ...]`. Database
/// states are a function of it.
fn event_key(t: &Trajectory) -> Vec<u32> {
    let mut k = Vec::with_capacity(2 + 2 * t.len());
    k.push(t.task.0 as u32);
    k.push(t.initial_query.0 as u32);
    for turn in &t.turns {
        k.push(turn.action.0 as u32);
        k.push(turn.observation.0 as u32);
    }
    k
}

/// `Z_i`: everything in `E_i` except the initial query, i.e. the task,
/// database states `0..=i`, actions `1..=i` and observations `1..i`.
fn z_key(t: &Trajectory, turn: usize) -> Vec<u32> {
    let mut k = Vec::with_capacity(2 + 3 * turn);
    k.push(t.task.0 as u32);
    k.push(t.initial_env.db_state.0 as u32);
    for (j, step) in t.turns[..turn].iter().enumerate() {
        if j > 0 {
            k.push(t.turns[j - 1].observation.0 as u32);
        }
        k.push(step.action.0 as u32);
        k.push(step.env.db_state.0 as u32);
    }
    k
}

const Z: usize = 0;
const Z_Q: usize = 1;
const Z_O: usize = 2;
const Z_QO: usize = 3;

/// Per-turn pointwise quantities of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnDecomposition {
    /// `-log P(a_i | e_{i-1}, o_{i-1})`.
    pub action_ic: f64,
    /// `-log P(o_i | a_i, e_i)`.
    pub obs_ic: f64,
    /// `log P(o_i | z_i, o_0) / P(o_i | z_i)`.
    pub pmi: f64,
    pub reducing: bool,
    pub is_final: bool,
}

impl TurnDecomposition {
    pub fn term(&self) -> f64 {
        self.action_ic + self.obs_ic
    }

    pub fn signed(&self) -> f64 {
        if self.reducing {
            -self.pmi
        } else {
            self.term()
        }
    }
}

/// Pointwise decomposition of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafDecomposition {
    pub task_ic: f64,
    pub query_ic: f64,
    pub turns: Vec<TurnDecomposition>,
}

impl LeafDecomposition {
    pub fn initial(&self) -> f64 {
        self.task_ic + self.query_ic
    }

    pub fn turn_terms(&self) -> Vec<f64> {
        self.turns.iter().map(TurnDecomposition::term).collect()
    }

    /// `-log P(trajectory)`.
    pub fn exact(&self) -> f64 {
        self.initial() + self.turns.iter().map(TurnDecomposition::term).sum::<f64>()
    }

    pub fn gated(&self) -> f64 {
        self.initial() + self.turns.iter().map(TurnDecomposition::signed).sum::<f64>()
    }

    /// Every non-final turn reduces by its information gain; the final turn
    /// keeps only its action term.
    pub fn lemma_lower(&self) -> f64 {
        self.initial()
            + self
                .turns
                .iter()
                .map(|t| if t.is_final { t.action_ic } else { -t.pmi })
                .sum::<f64>()
    }

    pub fn aggregate(&self, spec: &AggregatorSpec) -> Result<f64> {
        match spec {
            AggregatorSpec::ExactTotal => Ok(self.exact()),
            AggregatorSpec::Gated => Ok(self.gated()),
            other => super::multistep(&self.turn_terms(), other),
        }
    }
}

/// A leaf with its probability and reward.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredLeaf {
    pub decomposition: LeafDecomposition,
    pub probability: f64,
    pub reward: f64,
}

/// Prefix masses of a [`LeafSet`], from which every conditional quantity
/// is read off. Works the same for exact and empirical leaf sets.
#[derive(Debug)]
pub struct Analysis<'s> {
    system: &'s AgentSystem,
    leaves: LeafSet,
    prefix: HashMap<Vec<u32>, f64>,
    z: [HashMap<Vec<u32>, f64>; 4],
}

impl<'s> Analysis<'s> {
    pub fn new(system: &'s AgentSystem, leaves: LeafSet) -> Self {
        let mut prefix: HashMap<Vec<u32>, f64> = HashMap::new();
        let mut z: [HashMap<Vec<u32>, f64>; 4] = Default::default();
        for (t, p) in leaves.leaves() {
            let seq = event_key(t);
            for k in 1..=seq.len() {
                *prefix.entry(seq[..k].to_vec()).or_default() += p;
            }
            for i in 1..=t.len() {
                let base = z_key(t, i);
                let q = t.initial_query.0 as u32 + 1;
                let o = t.turns[i - 1].observation.0 as u32 + 1;
                // 0 separates the variants from the base key
                let variants = [vec![], vec![0, q], vec![0, 0, o], vec![0, q, o]];
                for (map, tail) in z.iter_mut().zip(variants) {
                    let mut key = base.clone();
                    key.extend(tail);
                    *map.entry(key).or_default() += p;
                }
            }
        }
        Self {
            system,
            leaves,
            prefix,
            z,
        }
    }

    /// Analysis of the exact trajectory distribution.
    pub fn exact(system: &'s AgentSystem) -> Result<Self> {
        Ok(Self::new(system, LeafSet::exact(system)?))
    }

    pub fn system(&self) -> &'s AgentSystem {
        self.system
    }

    pub fn leaf_set(&self) -> &LeafSet {
        &self.leaves
    }

    fn mass(&self, key: &[u32]) -> Result<f64> {
        match self.prefix.get(key) {
            Some(&m) if m > 0.0 => Ok(m),
            _ => Err(UqError::ZeroProbability(format!("event prefix {key:?} has no mass"))),
        }
    }

    fn z_mass(&self, variant: usize, key: Vec<u32>) -> Result<f64> {
        match self.z[variant].get(&key) {
            Some(&m) if m > 0.0 => Ok(m),
            _ => Err(UqError::ZeroProbability(format!(
                "conditioning context {key:?} has no mass"
            ))),
        }
    }

    fn pmi(&self, t: &Trajectory, turn: usize) -> Result<f64> {
        let base = z_key(t, turn);
        let q = t.initial_query.0 as u32 + 1;
        let o = t.turns[turn - 1].observation.0 as u32 + 1;
        let with = |tail: &[u32]| {
            let mut k = base.clone();
            k.extend_from_slice(tail);
            k
        };
        let pz = self.z_mass(Z, base.clone())?;
        let pzq = self.z_mass(Z_Q, with(&[0, q]))?;
        let pzo = self.z_mass(Z_O, with(&[0, 0, o]))?;
        let pzqo = self.z_mass(Z_QO, with(&[0, q, o]))?;
        Ok(pzqo.ln() + pz.ln() - pzq.ln() - pzo.ln())
    }

    /// Pointwise decomposition of `traj` under this distribution. Fails with
    /// a zero-probability error if `traj` lies outside the support.
    pub fn decompose(&self, traj: &Trajectory, classifier: &dyn ReductionClassifier) -> Result<LeafDecomposition> {
        if traj.is_empty() {
            return Err(UqError::Structural("trajectory has no turns".into()));
        }
        let seq = event_key(traj);
        let m = |k: usize| self.mass(&seq[..k]).map(f64::ln);
        let (l1, l2) = (m(1)?, m(2)?);
        let mut turns = Vec::with_capacity(traj.len());
        let mut prev = l2;
        for i in 1..=traj.len() {
            let la = m(2 * i + 1)?;
            let lo = m(2 * i + 2)?;
            let is_final = i == traj.len();
            let reducing = !is_final
                && classifier.in_reduction_set(&GateView::new(i, traj.turns[i - 1].action, traj.env_before(i)))?;
            turns.push(TurnDecomposition {
                action_ic: prev - la,
                obs_ic: la - lo,
                pmi: self.pmi(traj, i)?,
                reducing,
                is_final,
            });
            prev = lo;
        }
        Ok(LeafDecomposition {
            task_ic: -l1,
            query_ic: l1 - l2,
            turns,
        })
    }

    /// Every leaf with its decomposition, probability and reward.
    pub fn scored_leaves(&self, classifier: &dyn ReductionClassifier) -> Result<Vec<ScoredLeaf>> {
        self.leaves
            .leaves()
            .iter()
            .map(|(t, p)| {
                Ok(ScoredLeaf {
                    decomposition: self.decompose(t, classifier)?,
                    probability: *p,
                    reward: self.system.reward(t),
                })
            })
            .collect()
    }

    /// Report for one realized trajectory.
    pub fn pointwise_report(
        &self,
        traj: &Trajectory,
        classifier: &dyn ReductionClassifier,
        specs: &[AggregatorSpec],
    ) -> Result<UncertaintyReport> {
        let d = self.decompose(traj, classifier)?;
        let mut report = UncertaintyReport {
            mode: Mode::Pointwise,
            initial: InitialUncertainty {
                total: d.initial(),
                task_volatility: d.task_ic,
                query_uncertainty: d.query_ic,
            },
            turns: Vec::new(),
            totals: Default::default(),
            lemma1: Lemma1Bounds {
                lower: d.lemma_lower(),
                upper: d.exact(),
            },
            reward: self.system.reward(traj),
        };
        let mut accs = Vec::new();
        accumulate(&mut accs, &d, 1.0);
        report.turns = accs.iter().enumerate().map(|(i, a)| a.finish(i + 1)).collect();
        report.fill_totals(specs)?;
        Ok(report)
    }

    /// Report averaged over the distribution. Totals are expectations of the
    /// per-trajectory aggregates, so nonlinear reductions such as the
    /// maximum are averaged after reduction.
    pub fn expected_report(
        &self,
        classifier: &dyn ReductionClassifier,
        specs: &[AggregatorSpec],
    ) -> Result<UncertaintyReport> {
        let mut accs = Vec::new();
        let mut totals = vec![0.0; specs.len()];
        let (mut task, mut query, mut lower, mut upper, mut reward) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for leaf in self.scored_leaves(classifier)? {
            let (d, p) = (&leaf.decomposition, leaf.probability);
            accumulate(&mut accs, d, p);
            for (acc, spec) in totals.iter_mut().zip(specs) {
                *acc += p * d.aggregate(spec)?;
            }
            task += p * d.task_ic;
            query += p * d.query_ic;
            lower += p * d.lemma_lower();
            upper += p * d.exact();
            reward += p * leaf.reward;
        }
        let mut report = UncertaintyReport {
            mode: Mode::Expected,
            initial: InitialUncertainty {
                total: task + query,
                task_volatility: task,
                query_uncertainty: query,
            },
            turns: accs.iter().enumerate().map(|(i, a)| a.finish(i + 1)).collect(),
            totals: specs.iter().map(AggregatorSpec::key).zip(totals).collect(),
            lemma1: Lemma1Bounds { lower, upper },
            reward,
        };
        // the linear totals are restated from the per-turn fields so that
        // they can be recomputed exactly from an emitted report
        let (exact, gated) = (report.exact(), report.gated());
        for (spec, value) in [(AggregatorSpec::ExactTotal, exact), (AggregatorSpec::Gated, gated)] {
            if let Some(v) = report.totals.get_mut(&spec.key()) {
                *v = value;
            }
        }
        Ok(report)
    }
}

fn accumulate(accs: &mut Vec<TurnAccumulator>, d: &LeafDecomposition, p: f64) {
    if accs.len() < d.turns.len() {
        accs.resize_with(d.turns.len(), Default::default);
    }
    for (acc, t) in accs.iter_mut().zip(&d.turns) {
        acc.present_mass += p;
        acc.action += p * t.action_ic;
        acc.observation += p * t.obs_ic;
        if t.reducing {
            acc.reduction_mass += p;
            acc.info_gain += p * t.pmi;
        } else {
            acc.propagated += p * t.term();
        }
    }
}
