use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{AllReducing, HashedVerdicts, NoneReducing, ReductionClassifier};
use crate::error::Result;
use crate::scenario::{generate_random_system, RandomSystemSpec};
use crate::uq::{exact_total, Analysis, UncertaintyReport};

/// Absolute tolerance of every bound check, in nats.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BoundSuiteOptions {
    /// Adds the information gain instead of subtracting it. The suite must
    /// catch this.
    pub corrupt_gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Seed of the offending [`RandomSystemSpec::small`] system.
    pub seed: u64,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSuiteReport {
    pub systems: usize,
    pub checks: usize,
    pub violations: Vec<Violation>,
    /// Largest `|kernel total - joint entropy|` seen.
    pub max_chain_rule_error: f64,
    /// Largest `|gated - lower|` under the all-reducing classifier.
    pub max_lower_gap: f64,
    /// Largest `|gated - upper|` under the none-reducing classifier.
    pub max_upper_gap: f64,
}

impl BoundSuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct SystemOutcome {
    checks: usize,
    violations: Vec<Violation>,
    chain: f64,
    lower_gap: f64,
    upper_gap: f64,
}

fn gated(report: &UncertaintyReport, opts: BoundSuiteOptions) -> f64 {
    let g = report.gated();
    if opts.corrupt_gate {
        g + 2.0 * report.turns.iter().filter_map(|t| t.info_gain).sum::<f64>()
    } else {
        g
    }
}

fn check_system(seed: u64, opts: BoundSuiteOptions) -> Result<SystemOutcome> {
    let scenario = generate_random_system(&RandomSystemSpec::small(seed))?;
    let system = &scenario.system;
    let analysis = Analysis::exact(system)?;
    let mut out = SystemOutcome {
        checks: 0,
        violations: Vec::new(),
        chain: 0.0,
        lower_gap: 0.0,
        upper_gap: 0.0,
    };
    let mut check = |ok: bool, name: &str, detail: String| {
        out.checks += 1;
        if !ok {
            out.violations.push(Violation {
                seed,
                check: name.to_string(),
                detail,
            });
        }
    };

    let kernel = exact_total(system)?;
    let joint = analysis.leaf_set().joint_entropy();
    let chain = (kernel - joint).abs();
    check(
        chain <= BOUND_TOLERANCE,
        "chain-rule",
        format!("kernel total {kernel} vs joint entropy {joint}"),
    );

    let hashed = HashedVerdicts { seed, rate: 0.5 };
    let classifiers: [(&str, &dyn ReductionClassifier); 4] = [
        ("scenario", &scenario.classifier),
        ("hashed", &hashed),
        ("all-reducing", &AllReducing),
        ("none-reducing", &NoneReducing),
    ];
    let (mut lower_gap, mut upper_gap) = (0.0, 0.0);
    for (name, c) in classifiers {
        let r = analysis.expected_report(c, &[])?;
        let g = gated(&r, opts);
        let (lo, hi) = (r.lemma1.lower, r.lemma1.upper);
        check(
            g <= r.exact() + BOUND_TOLERANCE,
            "gated<=exact",
            format!("{name}: gated {g} > exact {}", r.exact()),
        );
        check(
            lo - BOUND_TOLERANCE <= g && g <= hi + BOUND_TOLERANCE,
            "sandwich",
            format!("{name}: {lo} <= {g} <= {hi} fails"),
        );
        if name == "all-reducing" {
            lower_gap = (g - lo).abs();
            check(
                lower_gap <= BOUND_TOLERANCE,
                "lower-extremum",
                format!("|gated - lower| = {lower_gap}"),
            );
        }
        if name == "none-reducing" {
            upper_gap = (g - hi).abs();
            check(
                upper_gap <= BOUND_TOLERANCE,
                "upper-extremum",
                format!("|gated - upper| = {upper_gap}"),
            );
        }
    }
    out.chain = chain;
    out.lower_gap = lower_gap;
    out.upper_gap = upper_gap;
    Ok(out)
}

/// Runs every bound check on `n` random systems with seeds `seed..seed+n`.
/// Results do not depend on the thread count.
pub fn bound_suite(n: usize, seed: u64, opts: BoundSuiteOptions) -> Result<BoundSuiteReport> {
    let outcomes: Vec<SystemOutcome> = (0..n as u64)
        .into_par_iter()
        .map(|k| check_system(seed.wrapping_add(k), opts))
        .collect::<Result<_>>()?;
    let mut report = BoundSuiteReport {
        systems: n,
        checks: 0,
        violations: Vec::new(),
        max_chain_rule_error: 0.0,
        max_lower_gap: 0.0,
        max_upper_gap: 0.0,
    };
    for o in outcomes {
        report.checks += o.checks;
        report.violations.extend(o.violations);
        report.max_chain_rule_error = report.max_chain_rule_error.max(o.chain);
        report.max_lower_gap = report.max_lower_gap.max(o.lower_gap);
        report.max_upper_gap = report.max_upper_gap.max(o.upper_gap);
    }
    Ok(report)
}
