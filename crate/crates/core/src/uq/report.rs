use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{multistep, AggregatorSpec, GATE_DENOMINATOR_EPS};
use crate::error::Result;

/// Expected mode averages over the trajectory distribution; pointwise mode
/// describes one realized trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Expected,
    Pointwise,
}

impl std::str::FromStr for Mode {
    type Err = crate::UqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(Mode::Expected),
            "pointwise" => Ok(Mode::Pointwise),
            other => Err(crate::UqError::Parameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Whether a turn lowers or raises the gated total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Reduce,
    Propagate,
    /// Some branches reduce, others propagate (expected mode only).
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialUncertainty {
    /// `U(E_0, O_0)`.
    pub total: f64,
    /// `U(E_0)`.
    pub task_volatility: f64,
    /// `U(O_0 | E_0)`.
    pub query_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnUncertainty {
    pub turn: usize,
    /// `U(A_i | E_{i-1}, O_{i-1})`.
    pub action_term: f64,
    /// `U(O_i | A_i, E_i)`.
    pub observation_term: f64,
    /// Probability that the realized action is in the reduction set.
    pub reduction_mass: f64,
    pub in_reduction_set: bool,
    /// Information gain on the reducing branches; absent when none reduce.
    pub info_gain: Option<f64>,
    /// Turn uncertainty carried by the propagating branches.
    pub propagated: f64,
    pub signed_contribution: f64,
    /// `signed_contribution / action_term`, when the denominator is non-zero.
    pub gate_value: Option<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// Per-turn decomposition plus every aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub mode: Mode,
    pub initial: InitialUncertainty,
    pub turns: Vec<TurnUncertainty>,
    pub totals: BTreeMap<String, f64>,
    pub lemma1: Lemma1Bounds,
    /// Expected reward (expected mode) or realized reward (pointwise).
    pub reward: f64,
}

impl UncertaintyReport {
    /// Per-turn uncertainties `u_i = action_term + observation_term`.
    pub fn turn_terms(&self) -> Vec<f64> {
        self.turns.iter().map(|t| t.action_term + t.observation_term).collect()
    }

    pub fn exact(&self) -> f64 {
        self.initial.total + self.turn_terms().iter().sum::<f64>()
    }

    pub fn gated(&self) -> f64 {
        self.initial.total + self.turns.iter().map(|t| t.signed_contribution).sum::<f64>()
    }

    /// Evaluates one aggregator on this report.
    pub fn aggregate(&self, spec: &AggregatorSpec) -> Result<f64> {
        match spec {
            AggregatorSpec::ExactTotal => Ok(self.exact()),
            AggregatorSpec::Gated => Ok(self.gated()),
            other => multistep(&self.turn_terms(), other),
        }
    }

    pub fn total(&self, key: &str) -> Option<f64> {
        self.totals.get(key).copied()
    }

    pub(crate) fn fill_totals(&mut self, specs: &[AggregatorSpec]) -> Result<()> {
        self.totals.clear();
        for spec in specs {
            let v = self.aggregate(spec)?;
            self.totals.insert(spec.key(), v);
        }
        Ok(())
    }
}

/// Accumulates per-turn quantities into a [`TurnUncertainty`].
#[derive(Debug, Clone, Default)]
pub(crate) struct TurnAccumulator {
    pub action: f64,
    pub observation: f64,
    pub reduction_mass: f64,
    pub info_gain: f64,
    pub propagated: f64,
    pub present_mass: f64,
}

impl TurnAccumulator {
    pub fn finish(&self, turn: usize) -> TurnUncertainty {
        let reduce = self.reduction_mass > 0.0;
        let all_reduce = reduce && self.reduction_mass >= self.present_mass - 1e-12;
        let direction = if !reduce {
            Direction::Propagate
        } else if all_reduce {
            Direction::Reduce
        } else {
            Direction::Mixed
        };
        let signed = self.propagated - self.info_gain;
        TurnUncertainty {
            turn,
            action_term: self.action,
            observation_term: self.observation,
            reduction_mass: self.reduction_mass,
            in_reduction_set: all_reduce,
            info_gain: reduce.then_some(self.info_gain),
            propagated: self.propagated,
            signed_contribution: signed,
            gate_value: (self.action > GATE_DENOMINATOR_EPS).then(|| signed / self.action),
            direction,
        }
    }
}
