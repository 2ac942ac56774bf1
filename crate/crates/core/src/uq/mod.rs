//! Trajectory-level uncertainty: the chain-rule total, the classical
//! reductions (single-step, sum, max, weighted averages), process-reward
//! analogs and the information-gated total with its extrema.

mod analysis;
mod kernel;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};

pub use analysis::{Analysis, LeafDecomposition, LeafSet, ScoredLeaf, TurnDecomposition};
pub use kernel::{exact_total, expected_turn_terms, lemma1_bounds, single_step};
pub use report::{Direction, InitialUncertainty, Lemma1Bounds, Mode, TurnUncertainty, UncertaintyReport};

/// Turn contributions below this are treated as zero when forming the gate
/// ratio.
pub const GATE_DENOMINATOR_EPS: f64 = 1e-12;

/// Weighting scheme for the weighted-average reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    /// `w_i = 1/T`.
    LengthNormalized,
    /// `w_T = 1`.
    Tail,
    /// Uniform weight on the `k` largest terms.
    TopK(usize),
    Explicit(Vec<f64>),
}

/// One way of collapsing a trajectory into a scalar uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorSpec {
    /// Initial uncertainty plus every turn term.
    ExactTotal,
    /// Turn terms only, dropping the initial (ambiguity) term.
    SumNoAmbiguity,
    /// The largest turn term.
    MaxStep,
    Weighted(Weights),
    /// Initial uncertainty plus signed, gated turn contributions.
    Gated,
}

impl AggregatorSpec {
    /// The stable key this aggregator is reported under.
    pub fn key(&self) -> String {
        match self {
            AggregatorSpec::ExactTotal => "exact".into(),
            AggregatorSpec::SumNoAmbiguity => "sum".into(),
            AggregatorSpec::MaxStep => "max".into(),
            AggregatorSpec::Gated => "gated".into(),
            AggregatorSpec::Weighted(w) => match w {
                Weights::LengthNormalized => "weighted.length_normalized".into(),
                Weights::Tail => "weighted.tail".into(),
                Weights::TopK(k) => format!("weighted.top_{k}"),
                Weights::Explicit(_) => "weighted.explicit".into(),
            },
        }
    }

    /// The aggregators every report carries.
    pub fn defaults() -> Vec<AggregatorSpec> {
        vec![
            AggregatorSpec::ExactTotal,
            AggregatorSpec::Gated,
            AggregatorSpec::SumNoAmbiguity,
            AggregatorSpec::MaxStep,
            AggregatorSpec::Weighted(Weights::LengthNormalized),
            AggregatorSpec::Weighted(Weights::Tail),
            AggregatorSpec::Weighted(Weights::TopK(2)),
        ]
    }
}

impl std::str::FromStr for AggregatorSpec {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => AggregatorSpec::ExactTotal,
            "sum" => AggregatorSpec::SumNoAmbiguity,
            "max" => AggregatorSpec::MaxStep,
            "gated" => AggregatorSpec::Gated,
            "average" | "length_normalized" | "weighted.length_normalized" => {
                AggregatorSpec::Weighted(Weights::LengthNormalized)
            }
            "tail" | "weighted.tail" => AggregatorSpec::Weighted(Weights::Tail),
            other => {
                let k = other
                    .strip_prefix("weighted.top_")
                    .or_else(|| other.strip_prefix("top_"))
                    .or_else(|| other.strip_prefix("top-"))
                    .ok_or_else(|| UqError::Parameter(format!("unknown aggregator `{other}`")))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| UqError::Parameter(format!("bad top-k in `{other}`")))?;
                if k == 0 {
                    return Err(UqError::Parameter("top-k needs k >= 1".into()));
                }
                AggregatorSpec::Weighted(Weights::TopK(k))
            }
        })
    }
}

/// Collapses per-step uncertainties `u_1..u_T` with one of the multi-step
/// reductions. `ExactTotal` and `Gated` need the full decomposition and are
/// rejected here.
pub fn multistep(terms: &[f64], spec: &AggregatorSpec) -> Result<f64> {
    if terms.is_empty() {
        return Err(UqError::Degenerate("no step uncertainties".into()));
    }
    if let Some(bad) = terms.iter().find(|u| !(**u >= 0.0) || !u.is_finite()) {
        return Err(UqError::Parameter(format!(
            "step uncertainty {bad} is not a finite non-negative value"
        )));
    }
    match spec {
        AggregatorSpec::SumNoAmbiguity => Ok(terms.iter().sum()),
        AggregatorSpec::MaxStep => Ok(terms[argmax(terms)]),
        AggregatorSpec::Weighted(w) => {
            let w = weight_vector(terms, w)?;
            Ok(w.iter().zip(terms).map(|(w, u)| w * u).sum())
        }
        AggregatorSpec::ExactTotal | AggregatorSpec::Gated => Err(UqError::Parameter(format!(
            "`{}` is not a multi-step reduction",
            spec.key()
        ))),
    }
}

/// First index of the maximum.
fn argmax(terms: &[f64]) -> usize {
    let mut best = 0;
    for (i, &u) in terms.iter().enumerate() {
        if u > terms[best] {
            best = i;
        }
    }
    best
}

/// Materializes a weighting preset for `terms`.
pub fn weight_vector(terms: &[f64], weights: &Weights) -> Result<Vec<f64>> {
    let t = terms.len();
    let w = match weights {
        Weights::LengthNormalized => vec![1.0 / t as f64; t],
        Weights::Tail => {
            let mut w = vec![0.0; t];
            w[t - 1] = 1.0;
            w
        }
        Weights::TopK(k) => {
            if *k == 0 {
                return Err(UqError::Parameter("top-k needs k >= 1".into()));
            }
            let k = (*k).min(t);
            let mut order: Vec<usize> = (0..t).collect();
            // stable: ties keep the earlier step
            order.sort_by(|&a, &b| terms[b].total_cmp(&terms[a]));
            let mut w = vec![0.0; t];
            for &i in &order[..k] {
                w[i] = 1.0 / k as f64;
            }
            w
        }
        Weights::Explicit(w) => {
            if w.len() != t {
                return Err(UqError::Parameter(format!("{} weights for {t} steps", w.len())));
            }
            if w.iter().any(|&x| !(x >= 0.0)) {
                return Err(UqError::Parameter("weights must be non-negative".into()));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(UqError::Parameter(format!("weights sum to {s}, expected 1")));
            }
            w.clone()
        }
    };
    Ok(w)
}

/// Product and minimum of step-wise success probabilities, the
/// process-reward counterparts of the sum and max reductions.
pub fn process_reward_analogs(step_probs: &[f64]) -> Result<(f64, f64)> {
    if step_probs.is_empty() {
        return Err(UqError::Degenerate("no step probabilities".into()));
    }
    if let Some(p) = step_probs.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(UqError::Parameter(format!("step probability {p} outside (0, 1]")));
    }
    let product = step_probs.iter().product();
    let min = step_probs.iter().copied().fold(1.0, f64::min);
    Ok((product, min))
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: [f64; 3] = [0.1, 0.5, 0.2];

    #[test]
    fn multistep_examples() {
        assert_eq!(multistep(&U, &AggregatorSpec::MaxStep).unwrap(), 0.5);
        assert!((multistep(&U, &AggregatorSpec::SumNoAmbiguity).unwrap() - 0.8).abs() < 1e-15);
        let tail = multistep(&U, &AggregatorSpec::Weighted(Weights::Tail)).unwrap();
        assert_eq!(tail, 0.2);
        let top2 = multistep(&U, &AggregatorSpec::Weighted(Weights::TopK(2))).unwrap();
        assert!((top2 - 0.35).abs() < 1e-15);
        let avg = multistep(&[0.3; 4], &AggregatorSpec::Weighted(Weights::LengthNormalized)).unwrap();
        assert!((avg - 0.3).abs() < 1e-15);
    }

    #[test]
    fn max_ties_pick_first() {
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
        let w = weight_vector(&[0.5, 0.5, 0.5], &Weights::TopK(1)).unwrap();
        assert_eq!(w, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_weights() {
        let bad = [
            Weights::Explicit(vec![0.5, 0.6, -0.1]),
            Weights::Explicit(vec![0.5, 0.6, 0.1]),
            Weights::Explicit(vec![1.0]),
            Weights::TopK(0),
        ];
        for w in bad {
            assert!(multistep(&U, &AggregatorSpec::Weighted(w)).is_err());
        }
        assert!(multistep(&[-0.1], &AggregatorSpec::MaxStep).is_err());
        assert!(multistep(&U, &AggregatorSpec::Gated).is_err());
    }

    #[test]
    fn process_reward_examples() {
        assert_eq!(process_reward_analogs(&[1.0, 1.0]).unwrap(), (1.0, 1.0));
        assert_eq!(process_reward_analogs(&[0.5, 0.5]).unwrap(), (0.25, 0.5));
        assert!(process_reward_analogs(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn aggregator_names_round_trip() {
        for spec in AggregatorSpec::defaults() {
            assert_eq!(spec.key().parse::<AggregatorSpec>().unwrap(), spec);
        }
        assert!("median".parse::<AggregatorSpec>().is_err());
    }
}
