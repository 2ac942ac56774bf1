use std::collections::BTreeMap;

use super::file::{
    Alphabets, InitialSpec, PairSpec, ProjectionSpec, RewardRuleSpec, RewardSpec, RowSpec, RuleSpec, ScenarioFile,
    UpdateSpec, UpdateWhen, When, SCHEMA_VERSION,
};
use super::Scenario;
use crate::classifier::ActionCategory;
use crate::error::{Result, UqError};
use crate::model::ContextComponent;

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn probs(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
    v.iter().map(|(l, p)| (l.to_string(), *p)).collect()
}

fn build(file: ScenarioFile) -> Scenario {
    // the fixed built-ins are data; failing here is a bug in this file
    file.build().expect("built-in scenario is valid")
}

/// Knobs of the booking world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiniBookingParams {
    /// Probability of asking for the preference on the first turn.
    pub ask_prob: f64,
    /// Probability that a guess picks the morning slot.
    pub guess_confidence: f64,
}

impl Default for MiniBookingParams {
    fn default() -> Self {
        Self {
            ask_prob: 0.3,
            guess_confidence: 0.95,
        }
    }
}

/// A two-destination booking task where the user's time-of-day preference
/// is carried by the opening query but never stated outright.
///
/// On the first turn the agent either asks (`ask_preference`, whose answer
/// reveals the preference) or thinks (`think_and_guess`, which yields
/// nothing). It then books; the booking earns 1 iff it matches the
/// preference. Asking always succeeds, guessing succeeds half the time.
pub fn builtin_mini_booking(params: &MiniBookingParams) -> Result<Scenario> {
    use ActionCategory::*;
    let MiniBookingParams {
        ask_prob,
        guess_confidence,
    } = *params;
    for (name, v) in [("ask_prob", ask_prob), ("guess_confidence", guess_confidence)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(UqError::Parameter(format!("{name} = {v} is not a probability")));
        }
    }
    let queries = ["q_sfo_morning", "q_sfo_evening", "q_nyc_morning", "q_nyc_evening"];

    let mut observation_kernel = Vec::new();
    for q in queries {
        let pref = if q.ends_with("morning") {
            "pref_morning"
        } else {
            "pref_evening"
        };
        observation_kernel.push(RowSpec {
            when: When {
                action: Some("ask_preference".into()),
                initial_query: Some(q.into()),
                ..When::default()
            },
            probs: probs(&[(pref, 1.0)]),
        });
    }

    let after = |obs: &str, p: &[(&str, f64)]| RowSpec {
        when: When {
            prev_obs: Some(obs.into()),
            ..When::default()
        },
        probs: probs(p),
    };
    let action_kernel = vec![
        after("pref_morning", &[("book_morning", 1.0)]),
        after("pref_evening", &[("book_evening", 1.0)]),
        after(
            "none",
            &[
                ("book_morning", guess_confidence),
                ("book_evening", 1.0 - guess_confidence),
            ],
        ),
        RowSpec {
            when: When::default(),
            probs: probs(&[("ask_preference", ask_prob), ("think_and_guess", 1.0 - ask_prob)]),
        },
    ];

    let book = |a: &str, to: &str| UpdateSpec {
        when: UpdateWhen {
            action: Some(a.into()),
            ..UpdateWhen::default()
        },
        to: to.into(),
    };
    let reward_rules = queries
        .iter()
        .map(|q| RewardRuleSpec {
            task: None,
            initial_query: Some(q.to_string()),
            last_action: Some(
                if q.ends_with("morning") {
                    "book_morning"
                } else {
                    "book_evening"
                }
                .into(),
            ),
            final_db: None,
            value: 1.0,
        })
        .collect();

    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: "mini-booking".into(),
        max_turns: 3,
        null_observation: "none".into(),
        terminal: strings(&["book_morning", "book_evening"]),
        alphabets: Alphabets {
            actions: strings(&["ask_preference", "think_and_guess", "book_morning", "book_evening"]),
            observations: strings(&[
                "none",
                "q_sfo_morning",
                "q_sfo_evening",
                "q_nyc_morning",
                "q_nyc_evening",
                "pref_morning",
                "pref_evening",
            ]),
            tasks: strings(&["trip_sfo", "trip_nyc"]),
            db_states: strings(&["empty", "booked_morning", "booked_evening"]),
        },
        taxonomy: [
            ("ask_preference", ClarificationOrConfirmation),
            ("think_and_guess", Thinking),
            ("book_morning", StateChangingToolCall),
            ("book_evening", StateChangingToolCall),
        ]
        .into_iter()
        .map(|(l, c)| (l.to_string(), c))
        .collect(),
        evidentiality: [("ask_preference".to_string(), RuleSpec::Always)].into(),
        projection: ProjectionSpec {
            agent: vec![],
            observation: vec![ContextComponent::InitialQuery],
        },
        initial: InitialSpec {
            db: [("trip_sfo", "empty"), ("trip_nyc", "empty")]
                .into_iter()
                .map(|(t, d)| (t.to_string(), d.to_string()))
                .collect(),
            pairs: queries
                .iter()
                .map(|q| PairSpec {
                    task: if q.contains("sfo") { "trip_sfo" } else { "trip_nyc" }.into(),
                    query: q.to_string(),
                    p: 0.25,
                })
                .collect(),
        },
        action_kernel,
        observation_kernel,
        update: vec![
            book("book_morning", "booked_morning"),
            book("book_evening", "booked_evening"),
        ],
        reward: RewardSpec {
            default: 0.0,
            rules: reward_rules,
        },
    }
    .build()
}

/// One task, one query, one terminal action: every uncertainty is zero.
pub fn builtin_deterministic() -> Scenario {
    build(ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: "deterministic".into(),
        max_turns: 1,
        null_observation: "none".into(),
        terminal: strings(&["finish"]),
        alphabets: Alphabets {
            actions: strings(&["finish"]),
            observations: strings(&["none", "query"]),
            tasks: strings(&["task"]),
            db_states: strings(&["idle"]),
        },
        taxonomy: [("finish".to_string(), ActionCategory::FinalReport)].into(),
        evidentiality: BTreeMap::new(),
        projection: ProjectionSpec {
            agent: vec![],
            observation: vec![],
        },
        initial: InitialSpec {
            db: [("task".to_string(), "idle".to_string())].into(),
            pairs: vec![PairSpec {
                task: "task".into(),
                query: "query".into(),
                p: 1.0,
            }],
        },
        action_kernel: vec![RowSpec {
            when: When::default(),
            probs: probs(&[("finish", 1.0)]),
        }],
        observation_kernel: vec![],
        update: vec![],
        reward: RewardSpec {
            default: 1.0,
            rules: vec![],
        },
    })
}

/// Two turns of a uniform binary choice followed by a uniform binary
/// answer. The trajectory distribution is uniform over 16 leaves.
pub fn builtin_uniform_benchmark() -> Scenario {
    build(ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: "uniform-2turn".into(),
        max_turns: 2,
        null_observation: "none".into(),
        terminal: vec![],
        alphabets: Alphabets {
            actions: strings(&["probe_a", "probe_b"]),
            observations: strings(&["none", "query", "yes", "no"]),
            tasks: strings(&["task"]),
            db_states: strings(&["idle"]),
        },
        taxonomy: [
            ("probe_a".to_string(), ActionCategory::InformationGathering),
            ("probe_b".to_string(), ActionCategory::InformationGathering),
        ]
        .into(),
        evidentiality: [
            ("probe_a".to_string(), RuleSpec::Always),
            ("probe_b".to_string(), RuleSpec::Always),
        ]
        .into(),
        projection: ProjectionSpec {
            agent: vec![],
            observation: vec![],
        },
        initial: InitialSpec {
            db: [("task".to_string(), "idle".to_string())].into(),
            pairs: vec![PairSpec {
                task: "task".into(),
                query: "query".into(),
                p: 1.0,
            }],
        },
        action_kernel: vec![RowSpec {
            when: When::default(),
            probs: probs(&[("probe_a", 0.5), ("probe_b", 0.5)]),
        }],
        observation_kernel: vec![RowSpec {
            when: When::default(),
            probs: probs(&[("yes", 0.5), ("no", 0.5)]),
        }],
        update: vec![],
        reward: RewardSpec {
            default: 0.0,
            rules: vec![RewardRuleSpec {
                task: None,
                initial_query: None,
                last_action: Some("probe_a".into()),
                final_db: None,
                value: 1.0,
            }],
        },
    })
}
