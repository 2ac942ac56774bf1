//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use agentuq::classifier::{
    airline_taxonomy, ActionCategory, AllReducing, HashedVerdicts, NoneReducing, ReductionClassifier,
};
use agentuq::dist::Dist;
use agentuq::eval::{desideratum_check, failure_auroc, mc_convergence, EvalMode, Quantity};
use agentuq::measures::{entropy, informational_energy, renyi_entropy, tsallis_entropy};
use agentuq::scenario::{
    builtin, builtin_mini_booking, generate_random_system, to_toml, MiniBookingParams, RandomSystemSpec,
};
use agentuq::uq::{exact_total, multistep, single_step, AggregatorSpec, Analysis, Weights};

const RANDOM_SYSTEMS: u64 = 1000;
const MAX_TRAJECTORIES: u128 = 100_000;
const CHAIN_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-9;
const SINGLE_STEP_TOL: f64 = 1e-12;
const LIMIT_TOL: f64 = 1e-3;
const LIMIT_OFFSET: f64 = 1e-4;
const IDENTITY_TOL: f64 = 1e-12;
const MC_TOL: f64 = 0.02;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Joint entropy straight from the enumerated leaf probabilities.
fn leaf_entropy(leaves: &[(agentuq::model::Trajectory, f64)]) -> f64 {
    leaves.iter().map(|(_, p)| -p * p.ln()).sum()
}

fn chain_rule() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..RANDOM_SYSTEMS {
        let s = generate_random_system(&RandomSystemSpec::small(seed)).map_err(|e| e.to_string())?;
        let count = s.system.count_trajectories();
        ensure(count <= MAX_TRAJECTORIES, || {
            format!("seed {seed}: {count} trajectories")
        })?;
        let leaves = s.system.enumerate_trajectories().map_err(|e| e.to_string())?;
        let total = exact_total(&s.system).map_err(|e| e.to_string())?;
        let err = (total - leaf_entropy(&leaves)).abs();
        worst = worst.max(err);
        ensure(err <= CHAIN_TOL, || format!("seed {seed}: error {err:e}"))?;
    }
    Ok(format!("{RANDOM_SYSTEMS} systems, max error {worst:.2e}"))
}

fn random_classifiers(s: &agentuq::scenario::Scenario, seed: u64) -> Vec<(String, Box<dyn ReductionClassifier>)> {
    vec![
        ("scenario".into(), Box::new(s.classifier.clone())),
        ("hashed-0.3".into(), Box::new(HashedVerdicts { seed, rate: 0.3 })),
        (
            "hashed-0.7".into(),
            Box::new(HashedVerdicts {
                seed: seed ^ 1,
                rate: 0.7,
            }),
        ),
    ]
}

fn gate_soundness() -> Outcome {
    let mut checks = 0usize;
    for seed in 0..RANDOM_SYSTEMS {
        let s = generate_random_system(&RandomSystemSpec::small(seed)).map_err(|e| e.to_string())?;
        let a = Analysis::exact(&s.system).map_err(|e| e.to_string())?;
        for (name, c) in random_classifiers(&s, seed) {
            let r = a.expected_report(c.as_ref(), &[]).map_err(|e| e.to_string())?;
            checks += 1;
            ensure(r.gated() <= r.exact() + BOUND_TOL, || {
                format!("seed {seed} {name}: gated {} > exact {}", r.gated(), r.exact())
            })?;
            for leaf in a.scored_leaves(c.as_ref()).map_err(|e| e.to_string())? {
                let d = &leaf.decomposition;
                checks += 1;
                ensure(d.gated() <= d.exact() + BOUND_TOL, || {
                    format!("seed {seed} {name}: pointwise gated {} > {}", d.gated(), d.exact())
                })?;
            }
        }
    }
    Ok(format!("{checks} comparisons, 0 violations"))
}

fn lemma_extrema() -> Outcome {
    let (mut lo_gap, mut hi_gap) = (0.0f64, 0.0f64);
    for seed in 0..RANDOM_SYSTEMS {
        let s = generate_random_system(&RandomSystemSpec::small(seed)).map_err(|e| e.to_string())?;
        let a = Analysis::exact(&s.system).map_err(|e| e.to_string())?;
        let all = a.expected_report(&AllReducing, &[]).map_err(|e| e.to_string())?;
        let none = a.expected_report(&NoneReducing, &[]).map_err(|e| e.to_string())?;
        let g = (all.gated() - all.lemma1.lower).abs();
        let h = (none.gated() - none.lemma1.upper).abs();
        lo_gap = lo_gap.max(g);
        hi_gap = hi_gap.max(h);
        ensure(g <= BOUND_TOL, || format!("seed {seed}: |gated - lower| = {g:e}"))?;
        ensure(h <= BOUND_TOL, || format!("seed {seed}: |gated - upper| = {h:e}"))?;
        for (name, c) in random_classifiers(&s, seed) {
            let r = a.expected_report(c.as_ref(), &[]).map_err(|e| e.to_string())?;
            let (l, u, x) = (r.lemma1.lower, r.lemma1.upper, r.gated());
            ensure(l - BOUND_TOL <= x && x <= u + BOUND_TOL, || {
                format!("seed {seed} {name}: {l} <= {x} <= {u} fails")
            })?;
        }
    }
    Ok(format!(
        "max |gated-lower| {lo_gap:.2e}, max |gated-upper| {hi_gap:.2e}"
    ))
}

fn reduction_fidelity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..RANDOM_SYSTEMS {
        let spec = RandomSystemSpec {
            tasks: 1,
            horizon: 1,
            ..RandomSystemSpec::small(seed)
        };
        let s = generate_random_system(&spec).map_err(|e| e.to_string())?;
        let total = exact_total(&s.system).map_err(|e| e.to_string())?;
        let single = single_step(&s.system, true).map_err(|e| e.to_string())?;
        let err = (total - single).abs();
        worst = worst.max(err);
        ensure(err <= SINGLE_STEP_TOL, || format!("seed {seed}: {total} vs {single}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..RANDOM_SYSTEMS {
        let t = rng.random_range(1..=8);
        let u: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..3.0)).collect();
        let initial: f64 = rng.random_range(0.0..3.0);
        let m = |spec: AggregatorSpec| multistep(&u, &spec).map_err(|e| e.to_string());
        let sum = m(AggregatorSpec::SumNoAmbiguity)?;
        let exact = initial + sum;
        let max = m(AggregatorSpec::MaxStep)?;
        for w in [Weights::LengthNormalized, Weights::Tail, Weights::TopK(2)] {
            let weighted = m(AggregatorSpec::Weighted(w.clone()))?;
            ensure(exact >= sum && sum >= max && max >= weighted - 1e-15, || {
                format!("vector {k}: {exact} >= {sum} >= {max} >= {weighted} ({w:?}) fails")
            })?;
        }
    }
    Ok(format!(
        "T=1 max error {worst:.2e}; ordering on {RANDOM_SYSTEMS} vectors"
    ))
}

fn measure_identities() -> Outcome {
    let dists = [
        vec![0.5, 0.5],
        vec![0.7, 0.2, 0.1],
        vec![0.25; 4],
        vec![0.9, 0.05, 0.03, 0.02],
        vec![1.0, 0.0],
    ];
    let mut worst_limit = 0.0f64;
    for w in dists {
        let d = Dist::new(w).map_err(|e| e.to_string())?;
        let h = entropy(&d);
        for a in [1.0 - LIMIT_OFFSET, 1.0 + LIMIT_OFFSET] {
            let r = renyi_entropy(&d, a).map_err(|e| e.to_string())?;
            let t = tsallis_entropy(&d, a).map_err(|e| e.to_string())?;
            worst_limit = worst_limit.max((r - h).abs()).max((t - h).abs());
        }
        let ie = informational_energy(&d);
        let h2 = renyi_entropy(&d, 2.0).map_err(|e| e.to_string())?;
        let v2 = tsallis_entropy(&d, 2.0).map_err(|e| e.to_string())?;
        ensure((h2 + ie.ln()).abs() <= IDENTITY_TOL, || {
            format!("H2 {h2} vs -ln IE {}", -ie.ln())
        })?;
        ensure((v2 - (1.0 - ie)).abs() <= IDENTITY_TOL, || {
            format!("V2 {v2} vs 1 - IE {}", 1.0 - ie)
        })?;
    }
    ensure(worst_limit <= LIMIT_TOL, || format!("limit error {worst_limit}"))?;
    Ok(format!("max limit error {worst_limit:.2e}"))
}

fn desideratum() -> Outcome {
    let start = Instant::now();
    let s = builtin_mini_booking(&MiniBookingParams::default()).map_err(|e| e.to_string())?;
    let gated = desideratum_check(&s.system, &s.classifier, &AggregatorSpec::Gated, EvalMode::Exact)
        .map_err(|e| e.to_string())?;
    let avg = AggregatorSpec::Weighted(Weights::LengthNormalized);
    let au_g =
        failure_auroc(&s.system, &s.classifier, &AggregatorSpec::Gated, EvalMode::Exact).map_err(|e| e.to_string())?;
    let au_a = failure_auroc(&s.system, &s.classifier, &avg, EvalMode::Exact).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let (r0, r1) = (gated.levels[0].mean_uncertainty, gated.levels[1].mean_uncertainty);
    ensure(gated.ordering_satisfied, || format!("E[U|r=1] {r1} >= E[U|r=0] {r0}"))?;
    ensure(au_g > au_a, || format!("AUROC gated {au_g} <= average {au_a}"))?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.1}s"))?;
    Ok(format!(
        "E[U|r=1]={r1:.4} < E[U|r=0]={r0:.4} (gap {:.4}); AUROC gated {au_g:.4} > average {au_a:.4}",
        gated.gap
    ))
}

fn mc_convergence_check() -> Outcome {
    let s = builtin("uniform-2turn").map_err(|e| e.to_string())?;
    let r =
        mc_convergence(&s.system, Quantity::Entropy, &[100, 1_000, 10_000, 100_000], 7).map_err(|e| e.to_string())?;
    let last = r.sizes.last().unwrap();
    let worst = last.estimates.iter().map(|e| (e - r.exact).abs()).fold(0.0, f64::max);
    ensure(worst <= MC_TOL, || format!("n=1e5 error {worst} over {MC_TOL}"))?;
    let medians: Vec<String> = r.sizes.iter().map(|s| format!("{:.1e}", s.median_abs_error)).collect();
    ensure(r.error_non_increasing(), || format!("median errors {medians:?}"))?;
    Ok(format!(
        "exact {:.6}, max error at 1e5 {worst:.2e}, medians {}",
        r.exact,
        medians.join(" ")
    ))
}

fn classifier_fidelity() -> Outcome {
    let t = airline_taxonomy();
    let cases = [
        ("search_flights", ActionCategory::InformationGathering, true),
        (
            "Do you want me to proceed with booking FQ8APE?",
            ActionCategory::ClarificationOrConfirmation,
            true,
        ),
        ("cancel_reservation", ActionCategory::StateChangingToolCall, false),
    ];
    for (label, cat, interactive) in cases {
        let c = t.classify_label(label).map_err(|e| e.to_string())?;
        ensure(c.category == cat && c.interactive == interactive, || {
            format!("`{label}` classified {:?}", c)
        })?;
    }
    Ok("3/3 mappings".into())
}

fn determinism() -> Outcome {
    let run = || -> Result<Vec<String>, String> {
        let s = builtin("mini-booking").map_err(|e| e.to_string())?;
        let samples = s.system.sample_trajectories(500, 42);
        let a = Analysis::exact(&s.system).map_err(|e| e.to_string())?;
        let report = a
            .expected_report(&s.classifier, &AggregatorSpec::defaults())
            .map_err(|e| e.to_string())?;
        let random = generate_random_system(&RandomSystemSpec::small(9)).map_err(|e| e.to_string())?;
        Ok(vec![
            serde_json::to_string(&samples).map_err(|e| e.to_string())?,
            serde_json::to_string(&report).map_err(|e| e.to_string())?,
            to_toml(&random).map_err(|e| e.to_string())?,
        ])
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "artifacts differ between identical runs".into())?;
    Ok(format!("{} artifacts byte-identical", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("chain-rule identity", chain_rule),
        ("gate soundness", gate_soundness),
        ("lemma extrema", lemma_extrema),
        ("reduction fidelity", reduction_fidelity),
        ("measure identities", measure_identities),
        ("desideratum", desideratum),
        ("mc convergence", mc_convergence_check),
        ("classifier fidelity", classifier_fidelity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
