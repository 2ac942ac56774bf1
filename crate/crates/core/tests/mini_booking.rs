use agentuq::classifier::{AllReducing, NoneReducing};
use agentuq::eval::{desideratum_check, failure_auroc, EvalMode};
use agentuq::scenario::{builtin_mini_booking, MiniBookingParams};
use agentuq::uq::{exact_total, AggregatorSpec, Analysis, Weights};

const TOL: f64 = 1e-12;

fn default_scenario() -> agentuq::scenario::Scenario {
    builtin_mini_booking(&MiniBookingParams::default()).unwrap()
}

fn xlnx_inv(p: f64) -> f64 {
    -p * p.ln()
}

#[test]
fn structure() {
    let s = default_scenario();
    let d = s.system.dims();
    assert_eq!((d.tasks, d.actions, d.max_turns), (2, 4, 3));
    let leaves = s.system.enumerate_trajectories().unwrap();
    // per query: ask-book, think-book_morning, think-book_evening
    assert_eq!(leaves.len(), 12);
}

#[test]
fn exact_total_matches_hand_count() {
    let s = default_scenario();
    // four equiprobable queries, each split 0.3 / 0.7*0.95 / 0.7*0.05
    let leaf = [0.25 * 0.3, 0.25 * 0.7 * 0.95, 0.25 * 0.7 * 0.05];
    let expected = 4.0 * leaf.iter().map(|&p| xlnx_inv(p)).sum::<f64>();
    assert!((exact_total(&s.system).unwrap() - expected).abs() < TOL);
}

#[test]
fn clarify_and_guess_policies() {
    let clarify = builtin_mini_booking(&MiniBookingParams {
        ask_prob: 1.0,
        guess_confidence: 0.95,
    })
    .unwrap();
    let guess = builtin_mini_booking(&MiniBookingParams {
        ask_prob: 0.0,
        guess_confidence: 0.95,
    })
    .unwrap();
    let reward = |s: &agentuq::scenario::Scenario| {
        Analysis::exact(&s.system)
            .unwrap()
            .expected_report(&NoneReducing, &[])
            .unwrap()
            .reward
    };
    assert!((reward(&clarify) - 1.0).abs() < TOL);
    assert!((reward(&guess) - 0.5).abs() < TOL);
    assert!(reward(&clarify) - reward(&guess) >= 0.4);
}

#[test]
fn clarify_leaf_gates_below_guess_leaf() {
    // equal first-turn action surprisal: ask and think are both ln 2
    let s = builtin_mini_booking(&MiniBookingParams {
        ask_prob: 0.5,
        guess_confidence: 1.0,
    })
    .unwrap();
    let a = Analysis::exact(&s.system).unwrap();
    let scored = a.scored_leaves(&s.classifier).unwrap();
    let ask = s.system.parts().actions.lookup("ask_preference").unwrap();
    let (clarify, guess): (Vec<_>, Vec<_>) = a
        .leaf_set()
        .leaves()
        .iter()
        .zip(&scored)
        .partition(|((t, _), _)| t.turns[0].action.0 == ask);
    let ln2 = std::f64::consts::LN_2;
    for (_, l) in &clarify {
        assert!((l.decomposition.turns[0].action_ic - ln2).abs() < TOL);
        assert!((l.decomposition.gated() - ln2).abs() < TOL);
    }
    for (_, l) in &guess {
        assert!((l.decomposition.turns[0].action_ic - ln2).abs() < TOL);
        assert!((l.decomposition.gated() - 3.0 * ln2).abs() < TOL);
    }
}

#[test]
fn gated_orders_rewards_and_average_does_not() {
    let s = default_scenario();
    let gated = desideratum_check(&s.system, &s.classifier, &AggregatorSpec::Gated, EvalMode::Exact).unwrap();
    assert!(gated.ordering_satisfied);
    // hand oracle: r=1 mass 0.65, r=0 mass 0.35
    let (ln4, a, m, e) = (4f64.ln(), -(0.7f64.ln()), -(0.95f64.ln()), -(0.05f64.ln()));
    let g_ask = 2f64.ln();
    let g_m = ln4 + a + m;
    let g_e = ln4 + a + e;
    let r1 = (0.3 * g_ask + 0.3325 * g_m + 0.0175 * g_e) / 0.65;
    let r0 = (0.3325 * g_m + 0.0175 * g_e) / 0.35;
    assert!((gated.levels[1].mean_uncertainty - r1).abs() < 1e-12);
    assert!((gated.levels[0].mean_uncertainty - r0).abs() < 1e-12);

    let avg = AggregatorSpec::Weighted(Weights::LengthNormalized);
    let average = desideratum_check(&s.system, &s.classifier, &avg, EvalMode::Exact).unwrap();
    assert!(!average.ordering_satisfied || average.gap < gated.gap);

    let au_g = failure_auroc(&s.system, &s.classifier, &AggregatorSpec::Gated, EvalMode::Exact).unwrap();
    let au_a = failure_auroc(&s.system, &s.classifier, &avg, EvalMode::Exact).unwrap();
    assert!(au_g > au_a, "{au_g} vs {au_a}");
}

#[test]
fn lemma_extrema() {
    let s = default_scenario();
    let a = Analysis::exact(&s.system).unwrap();
    let all = a.expected_report(&AllReducing, &[]).unwrap();
    let none = a.expected_report(&NoneReducing, &[]).unwrap();
    assert!((all.gated() - all.lemma1.lower).abs() < 1e-12);
    assert!((none.gated() - none.lemma1.upper).abs() < 1e-12);
    let mixed = a.expected_report(&s.classifier, &[]).unwrap();
    assert!(mixed.lemma1.lower <= mixed.gated() && mixed.gated() <= mixed.lemma1.upper);
}
