use std::collections::HashMap;
use std::path::PathBuf;

use agentuq::model::AgentSystem;
use agentuq::scenario::{
    builtin, generate_random_system, load_scenario, parse_scenario, to_toml, RandomSystemSpec, BUILTIN_NAMES,
};
use agentuq::UqError;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

/// Trajectory distribution keyed by labels, with rewards.
fn by_labels(system: &AgentSystem) -> HashMap<String, (f64, f64)> {
    let parts = system.parts();
    system
        .enumerate_trajectories()
        .unwrap()
        .into_iter()
        .map(|(t, p)| {
            let mut key = format!(
                "{} {}",
                parts.tasks.label(t.task.0),
                parts.observations.label(t.initial_query.0)
            );
            for s in &t.turns {
                key.push_str(&format!(
                    " | {} {} {}",
                    parts.actions.label(s.action.0),
                    parts.db_states.label(s.env.db_state.0),
                    parts.observations.label(s.observation.0)
                ));
            }
            (key, (p, system.reward(&t)))
        })
        .collect()
}

fn total_variation(a: &AgentSystem, b: &AgentSystem) -> f64 {
    let (da, db) = (by_labels(a), by_labels(b));
    let mut keys: Vec<&String> = da.keys().chain(db.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut tv = 0.0;
    for k in keys {
        let (pa, ra) = da.get(k).copied().unwrap_or((0.0, f64::NAN));
        let (pb, rb) = db.get(k).copied().unwrap_or((0.0, f64::NAN));
        if pa > 0.0 && pb > 0.0 {
            assert_eq!(ra, rb, "reward of {k}");
        }
        tv += (pa - pb).abs();
    }
    tv / 2.0
}

#[test]
fn hand_written_mini_booking_matches_the_builtin() {
    let file = load_scenario(bundled("mini_booking.toml")).unwrap();
    let reference = builtin("mini-booking").unwrap();
    assert_eq!(file.system.dims(), reference.system.dims());
    assert!(total_variation(&file.system, &reference.system) < 1e-15);
}

#[test]
fn builtins_round_trip_through_toml() {
    for name in BUILTIN_NAMES {
        let s = builtin(name).unwrap();
        let back = parse_scenario(&to_toml(&s).unwrap()).unwrap();
        assert_eq!(total_variation(&s.system, &back.system), 0.0, "{name}");
        assert_eq!(to_toml(&back).unwrap(), to_toml(&s).unwrap(), "{name}");
    }
}

#[test]
fn random_systems_round_trip_through_toml() {
    for seed in 0..40 {
        let s = generate_random_system(&RandomSystemSpec::small(seed)).unwrap();
        let back = parse_scenario(&to_toml(&s).unwrap()).unwrap();
        assert_eq!(total_variation(&s.system, &back.system), 0.0, "seed {seed}");
    }
}

fn mini_booking_text() -> String {
    std::fs::read_to_string(bundled("mini_booking.toml")).unwrap()
}

fn config_error(text: &str) -> String {
    match parse_scenario(text) {
        Err(UqError::Config(m)) | Err(UqError::Validation(m)) | Err(UqError::Parse(m)) => m,
        Err(e) => panic!("unexpected error kind: {e}"),
        Ok(_) => panic!("scenario unexpectedly loaded"),
    }
}

#[test]
fn a_row_summing_to_point_nine_is_named() {
    let text = mini_booking_text().replace(
        "probs = { book_morning = 0.95, book_evening = 0.05 }",
        "probs = { book_morning = 0.85, book_evening = 0.05 }",
    );
    let msg = config_error(&text);
    assert!(msg.contains("action_kernel[0]"), "{msg}");
}

#[test]
fn undeclared_symbols_are_rejected() {
    let text = mini_booking_text().replace("probs = { book_morning = 1.0 }", "probs = { book_noon = 1.0 }");
    let msg = config_error(&text);
    assert!(msg.contains("book_noon"), "{msg}");
}

#[test]
fn conditioning_outside_the_projection_is_rejected() {
    let text = mini_booking_text().replace(
        "when = { action = \"ask_preference\" }",
        "when = { action = \"ask_preference\", task = \"trip_sfo\" }",
    );
    let msg = config_error(&text);
    assert!(msg.contains("observation_kernel[2]"), "{msg}");
}

#[test]
fn interactive_actions_need_an_evidentiality_rule() {
    let text = mini_booking_text().replace("ask_preference = { rule = \"always\" }", "");
    let msg = config_error(&text);
    assert!(msg.contains("ask_preference"), "{msg}");
}

#[test]
fn unknown_schema_versions_are_rejected() {
    let text = mini_booking_text().replace("schema_version = 1", "schema_version = 7");
    assert!(parse_scenario(&text).is_err());
}

#[test]
fn missing_files_are_io_errors() {
    assert!(matches!(load_scenario("/no/such/scenario.toml"), Err(UqError::Io(_))));
}
