//! Exact information-theoretic quantities over finite distributions.
//!
//! Everything is in nats. `0 · ln 0` is taken as 0 inside every sum.

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{Result, UqError};

/// `-p ln p` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy.
pub fn entropy(d: &Dist) -> f64 {
    d.weights().iter().map(|&p| plogp(p)).sum()
}

/// Surprisal `-ln d(x)`. A zero-mass symbol yields `f64::INFINITY`.
pub fn information_content(d: &Dist, x: usize) -> Result<f64> {
    if x >= d.len() {
        return Err(UqError::Parameter(format!(
            "symbol {x} outside alphabet of size {}",
            d.len()
        )));
    }
    let p = d.prob(x);
    Ok(if p > 0.0 { -p.ln() } else { f64::INFINITY })
}

/// `KL(q || p)`. Fails when `q` has mass outside the support of `p`.
pub fn kl_divergence(q: &Dist, p: &Dist) -> Result<f64> {
    same_alphabet(q, p)?;
    let mut total = 0.0;
    for (x, (&qx, &px)) in q.weights().iter().zip(p.weights()).enumerate() {
        if qx > 0.0 {
            if px <= 0.0 {
                return Err(UqError::AbsoluteContinuity(x));
            }
            total += qx * (qx / px).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Rényi entropy of order `alpha` (`alpha > 0`, `alpha != 1`, finite).
pub fn renyi_entropy(d: &Dist, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(UqError::Parameter(format!(
            "Rényi order must satisfy 0 < alpha < inf, alpha != 1 (got {alpha})"
        )));
    }
    // log-sum-exp over the support keeps large orders stable
    let logs: Vec<f64> = d.support().map(|(_, p)| alpha * p.ln()).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(lse / (1.0 - alpha))
}

/// Order-0 Rényi entropy: log of the number of positive-mass symbols.
pub fn max_entropy(d: &Dist) -> f64 {
    (d.support_size() as f64).ln()
}

/// Order-infinity Rényi entropy `-ln max_x d(x)`.
pub fn min_entropy(d: &Dist) -> f64 {
    let max = d.weights().iter().copied().fold(0.0, f64::max);
    -max.ln()
}

/// Tsallis entropy of index `q != 1`.
pub fn tsallis_entropy(d: &Dist, q: f64) -> Result<f64> {
    if q == 1.0 || !q.is_finite() {
        return Err(UqError::Parameter(format!(
            "Tsallis index must be finite and != 1 (got {q})"
        )));
    }
    let s: f64 = d.support().map(|(_, p)| p.powf(q)).sum();
    Ok((1.0 - s) / (q - 1.0))
}

/// Onicescu informational energy `Σ p²`.
pub fn informational_energy(d: &Dist) -> f64 {
    d.weights().iter().map(|p| p * p).sum()
}

/// Power entropy of order two, `1 - IE`.
pub fn power_entropy(d: &Dist) -> f64 {
    1.0 - informational_energy(d)
}

/// Onicescu correlation `Σ_x p(x) q(x) / sqrt(IE(p) IE(q))`.
///
/// Uses the shared-index product in the numerator; the double sum
/// `Σ_{x,y} p(x) q(y)` is identically one and carries no dependency
/// information.
pub fn onicescu_correlation(p: &Dist, q: &Dist) -> Result<f64> {
    same_alphabet(p, q)?;
    let num: f64 = p.weights().iter().zip(q.weights()).map(|(a, b)| a * b).sum();
    Ok(num / (informational_energy(p) * informational_energy(q)).sqrt())
}

fn same_alphabet(a: &Dist, b: &Dist) -> Result<()> {
    if a.len() != b.len() {
        return Err(UqError::AlphabetMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Which uncertainty functional to apply to a single distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureSpec {
    /// Pointwise surprisal; only meaningful for a realized symbol.
    InformationContent,
    Shannon,
    /// `KL(reference || d)`.
    Relative {
        reference: Dist,
    },
    Renyi {
        alpha: f64,
    },
    Tsallis {
        q: f64,
    },
    /// A certainty rather than uncertainty measure.
    InformationalEnergy,
}

impl MeasureSpec {
    pub fn renyi(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
            return Err(UqError::Parameter(format!("invalid Rényi order {alpha}")));
        }
        Ok(Self::Renyi { alpha })
    }

    pub fn tsallis(q: f64) -> Result<Self> {
        if q == 1.0 || !q.is_finite() {
            return Err(UqError::Parameter(format!("invalid Tsallis index {q}")));
        }
        Ok(Self::Tsallis { q })
    }

    /// Applies the measure to a whole distribution.
    pub fn apply(&self, d: &Dist) -> Result<f64> {
        match self {
            MeasureSpec::InformationContent => Err(UqError::Parameter(
                "information content needs a realized symbol; use pointwise mode".into(),
            )),
            MeasureSpec::Shannon => Ok(entropy(d)),
            MeasureSpec::Relative { reference } => kl_divergence(reference, d),
            MeasureSpec::Renyi { alpha } => renyi_entropy(d, *alpha),
            MeasureSpec::Tsallis { q } => tsallis_entropy(d, *q),
            MeasureSpec::InformationalEnergy => Ok(informational_energy(d)),
        }
    }

    /// Short stable name used in reports and CSV headers.
    pub fn name(&self) -> String {
        match self {
            MeasureSpec::InformationContent => "information-content".into(),
            MeasureSpec::Shannon => "shannon".into(),
            MeasureSpec::Relative { .. } => "relative".into(),
            MeasureSpec::Renyi { alpha } => format!("renyi:{alpha}"),
            MeasureSpec::Tsallis { q } => format!("tsallis:{q}"),
            MeasureSpec::InformationalEnergy => "informational-energy".into(),
        }
    }
}

impl std::str::FromStr for MeasureSpec {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (s, None),
        };
        let parse = |p: Option<&str>| -> Result<f64> {
            p.ok_or_else(|| UqError::Parameter(format!("measure `{kind}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| UqError::Parameter(format!("bad parameter in `{s}`: {e}")))
        };
        match kind {
            "shannon" => Ok(Self::Shannon),
            "information-content" | "pointwise" => Ok(Self::InformationContent),
            "renyi" => Self::renyi(parse(param)?),
            "tsallis" => Self::tsallis(parse(param)?),
            "ie" | "informational-energy" => Ok(Self::InformationalEnergy),
            other => Err(UqError::Parameter(format!("unknown measure `{other}`"))),
        }
    }
}

/// A dense joint probability table over named discrete axes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    axes: Vec<String>,
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(axes: Vec<String>, shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if axes.len() != shape.len() {
            return Err(UqError::Validation(format!(
                "{} axes but {} dimensions",
                axes.len(),
                shape.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(UqError::Validation(format!("duplicate axis `{a}`")));
            }
        }
        let cells: usize = shape.iter().product();
        if cells != probs.len() || cells == 0 {
            return Err(UqError::Validation(format!(
                "shape {shape:?} needs {cells} cells, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(UqError::Validation("negative or non-finite cell".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > crate::dist::MASS_TOLERANCE {
            return Err(UqError::Validation(format!("table mass is {total}")));
        }
        Ok(Self { axes, shape, probs })
    }

    /// Builds a table by evaluating `f` on every cell index.
    pub fn from_fn(axes: &[&str], shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let cells: usize = shape.iter().product();
        let mut probs = Vec::with_capacity(cells);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..cells {
            probs.push(f(&idx));
            increment(&mut idx, shape);
        }
        Self::new(axes.iter().map(|s| s.to_string()).collect(), shape.to_vec(), probs)
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| UqError::UnknownAxis(name.to_string()))
    }

    fn axis_indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.axis_index(n)).collect()
    }

    /// Probability of a full cell index.
    pub fn prob(&self, index: &[usize]) -> f64 {
        let mut flat = 0;
        for (i, &s) in index.iter().zip(&self.shape) {
            flat = flat * s + i;
        }
        self.probs[flat]
    }

    /// Marginal table over `keep`, in the order given.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointTable> {
        let idx = self.axis_indices(keep)?;
        distinct(keep)?;
        let shape: Vec<usize> = idx.iter().map(|&i| self.shape[i]).collect();
        let cells: usize = shape.iter().product();
        let mut probs = vec![0.0; cells.max(1)];
        let mut full = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let mut flat = 0;
            for (&i, &s) in idx.iter().zip(&shape) {
                flat = flat * s + full[i];
            }
            probs[flat] += p;
            increment(&mut full, &self.shape);
        }
        Ok(JointTable {
            axes: keep.iter().map(|s| s.to_string()).collect(),
            shape: if shape.is_empty() { vec![] } else { shape },
            probs,
        })
    }

    /// Joint Shannon entropy of a subset of axes. The empty set has entropy 0.
    pub fn entropy_of(&self, axes: &[&str]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        Ok(self.marginal(axes)?.probs.iter().map(|&p| plogp(p)).sum())
    }

    /// `H(target | given)`.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        disjoint(target, given)?;
        let joint: Vec<&str> = target.iter().chain(given).copied().collect();
        let h = self.entropy_of(&joint)? - self.entropy_of(given)?;
        Ok(h.max(0.0))
    }

    /// `I(x; y | given)` via the four-entropy identity.
    pub fn mutual_information(&self, x: &[&str], y: &[&str], given: &[&str]) -> Result<f64> {
        disjoint(x, y)?;
        disjoint(x, given)?;
        disjoint(y, given)?;
        let xz: Vec<&str> = x.iter().chain(given).copied().collect();
        let yz: Vec<&str> = y.iter().chain(given).copied().collect();
        let xyz: Vec<&str> = x.iter().chain(y).chain(given).copied().collect();
        Ok(self.entropy_of(&xz)? + self.entropy_of(&yz)? - self.entropy_of(&xyz)? - self.entropy_of(given)?)
    }

    /// `log p(x0,y0|z0) / (p(x0|z0) p(y0|z0))` for single-axis `x`, `y`
    /// and any assignment `given` (possibly empty).
    pub fn pointwise_mutual_information<'n>(
        &self,
        x: (&'n str, usize),
        y: (&'n str, usize),
        given: &[(&'n str, usize)],
    ) -> Result<f64> {
        let given_axes: Vec<&str> = given.iter().map(|g| g.0).collect();
        disjoint(&[x.0], &[y.0])?;
        disjoint(&[x.0, y.0], &given_axes)?;
        let mass = |assign: &[(&str, usize)]| -> Result<f64> {
            if assign.is_empty() {
                return Ok(1.0);
            }
            let names: Vec<&str> = assign.iter().map(|a| a.0).collect();
            let m = self.marginal(&names)?;
            let cell: Vec<usize> = assign.iter().map(|a| a.1).collect();
            for (c, s) in cell.iter().zip(&m.shape) {
                if c >= s {
                    return Err(UqError::Parameter(format!("index {c} outside axis of size {s}")));
                }
            }
            Ok(m.prob(&cell))
        };
        let with =
            |extra: &[(&'n str, usize)]| -> Vec<(&'n str, usize)> { extra.iter().chain(given).copied().collect() };
        let pz = mass(given)?;
        let pxyz = mass(&with(&[x, y]))?;
        if pxyz <= 0.0 || pz <= 0.0 {
            return Err(UqError::ZeroProbability(format!(
                "p({}={}, {}={} | given) is zero",
                x.0, x.1, y.0, y.1
            )));
        }
        let pxz = mass(&with(&[x]))?;
        let pyz = mass(&with(&[y]))?;
        Ok((pxyz * pz / (pxz * pyz)).ln())
    }
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for d in (0..shape.len()).rev() {
        idx[d] += 1;
        if idx[d] < shape[d] {
            return;
        }
        idx[d] = 0;
    }
}

fn distinct(names: &[&str]) -> Result<()> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(UqError::Parameter(format!("axis `{n}` listed twice")));
        }
    }
    Ok(())
}

fn disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    for n in a {
        if b.contains(n) {
            return Err(UqError::Parameter(format!("axis `{n}` appears on both sides")));
        }
    }
    distinct(a)?;
    distinct(b)
}
