//! Finite probability vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};

/// Tolerance on the total mass of a [`Dist`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability vector over a finite alphabet, indexed by symbol id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Dist {
    weights: Vec<f64>,
}

impl Dist {
    /// Validates and wraps `weights`. Entries must be finite and
    /// non-negative and sum to one within [`MASS_TOLERANCE`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(UqError::Validation("empty distribution".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(UqError::Validation(format!(
                    "weight {i} is {w}, expected a finite non-negative number"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(UqError::Validation(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes arbitrary non-negative scores. Fails when all are zero.
    pub fn from_unnormalized(scores: Vec<f64>) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(UqError::Validation(format!(
                "cannot normalize scores with total {total}"
            )));
        }
        Self::new(scores.into_iter().map(|s| s / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty alphabet");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n, "point mass outside alphabet");
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.weights.get(symbol).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices with strictly positive mass, in increasing order.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().copied().enumerate().filter(|&(_, w)| w > 0.0)
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn is_point_mass_at(&self, symbol: usize) -> bool {
        self.prob(symbol) == 1.0
    }

    /// Inverse-CDF draw. Never returns a zero-mass symbol.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in self.support() {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
        // rounding slack: the last positive symbol absorbs it
        last
    }

    /// Total variation distance to another distribution on the same alphabet.
    pub fn total_variation(&self, other: &Dist) -> Result<f64> {
        if self.len() != other.len() {
            return Err(UqError::AlphabetMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(0.5
            * self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

impl TryFrom<Vec<f64>> for Dist {
    type Error = UqError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Dist::new(v)
    }
}

impl From<Dist> for Vec<f64> {
    fn from(d: Dist) -> Self {
        d.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_mass() {
        assert!(Dist::new(vec![0.5, 0.4]).is_err());
        assert!(Dist::new(vec![1.2, -0.2]).is_err());
        assert!(Dist::new(vec![]).is_err());
        assert!(Dist::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Dist::new(vec![0.5, 0.5 + 1e-12]).is_ok());
    }

    #[test]
    fn sample_skips_zero_mass() {
        let d = Dist::new(vec![0.0, 1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 1);
        }
    }

    #[test]
    fn from_unnormalized_all_zero_fails() {
        assert!(Dist::from_unnormalized(vec![0.0, 0.0]).is_err());
        let d = Dist::from_unnormalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
    }
}
