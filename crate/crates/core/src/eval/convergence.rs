use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::AllReducing;
use crate::error::{Result, UqError};
use crate::model::AgentSystem;
use crate::uq::{Analysis, LeafSet};

/// Number of independent seeds behind each confidence band.
pub const BAND_SEEDS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// Entropy of the trajectory distribution.
    Entropy,
    /// `Σ_i I(O_i; O_0 | Z_i)` over every turn.
    ConditionalMi,
    /// The chain-rule total, read off the per-turn decomposition.
    ExactTotal,
}

impl std::str::FromStr for Quantity {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Quantity::Entropy),
            "conditional-mi" => Ok(Quantity::ConditionalMi),
            "exact-total" => Ok(Quantity::ExactTotal),
            other => Err(UqError::Parameter(format!("unknown quantity `{other}`"))),
        }
    }
}

fn evaluate(analysis: &Analysis<'_>, q: Quantity) -> Result<f64> {
    match q {
        Quantity::Entropy => Ok(analysis.leaf_set().joint_entropy()),
        Quantity::ExactTotal => Ok(analysis.expected_report(&AllReducing, &[])?.lemma1.upper),
        Quantity::ConditionalMi => Ok(analysis
            .scored_leaves(&AllReducing)?
            .iter()
            .map(|l| l.probability * l.decomposition.turns.iter().map(|t| t.pmi).sum::<f64>())
            .sum()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeResult {
    pub n: usize,
    pub estimates: Vec<f64>,
    pub median_abs_error: f64,
    /// Central 95% of the estimates.
    pub band: (f64, f64),
    /// Whether the exact value lies inside the band.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub quantity: Quantity,
    pub exact: f64,
    pub sizes: Vec<SizeResult>,
}

impl ConvergenceResult {
    /// Whether the median absolute error never grows from one size to the
    /// next.
    pub fn error_non_increasing(&self) -> bool {
        self.sizes
            .windows(2)
            .all(|w| w[1].median_abs_error <= w[0].median_abs_error)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Plug-in estimates of `quantity` from seeded rollouts at each size, over
/// [`BAND_SEEDS`] seeds starting at `seed`.
pub fn mc_convergence(
    system: &AgentSystem,
    quantity: Quantity,
    sizes: &[usize],
    seed: u64,
) -> Result<ConvergenceResult> {
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UqError::Parameter(
            "sample sizes must be positive and strictly increasing".into(),
        ));
    }
    let exact = evaluate(&Analysis::exact(system)?, quantity)?;
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let estimates: Vec<f64> = (0..BAND_SEEDS)
            .into_par_iter()
            .map(|k| {
                let samples = system.sample_trajectories(n, seed.wrapping_add(k));
                evaluate(&Analysis::new(system, LeafSet::empirical(&samples)?), quantity)
            })
            .collect::<Result<_>>()?;
        let mut errors: Vec<f64> = estimates.iter().map(|e| (e - exact).abs()).collect();
        errors.sort_by(f64::total_cmp);
        let mut sorted = estimates.clone();
        sorted.sort_by(f64::total_cmp);
        let band = (quantile(&sorted, 0.025), quantile(&sorted, 0.975));
        out.push(SizeResult {
            n,
            median_abs_error: quantile(&errors, 0.5),
            pass: band.0 <= exact && exact <= band.1,
            band,
            estimates,
        });
    }
    Ok(ConvergenceResult {
        quantity,
        exact,
        sizes: out,
    })
}
