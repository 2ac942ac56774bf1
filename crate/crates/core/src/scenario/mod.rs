//! Scenario files, built-in systems and random system generation.

mod builtin;
mod file;
mod random;

use crate::classifier::ActionClassifier;
use crate::error::{Result, UqError};
use crate::model::AgentSystem;

pub use builtin::{builtin_deterministic, builtin_mini_booking, builtin_uniform_benchmark, MiniBookingParams};
pub use file::{
    load_scenario, parse_scenario, to_toml, Alphabets, InitialSpec, PairSpec, ProjectionSpec, RewardRuleSpec,
    RewardSpec, RowSpec, RuleSpec, ScenarioFile, UpdateSpec, UpdateWhen, When, NO_ACTION, SCHEMA_VERSION,
};
pub use random::{generate_random_system, RandomSystemSpec};

/// A system together with the classifier its evidentiality table defines.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: AgentSystem,
    pub classifier: ActionClassifier,
}

impl Scenario {
    /// The same scenario over a shorter horizon.
    pub fn with_horizon(&self, max_turns: usize) -> Result<Scenario> {
        if max_turns > self.system.max_turns() {
            return Err(UqError::Config(format!(
                "horizon {max_turns} exceeds the scenario's max_turns {}",
                self.system.max_turns()
            )));
        }
        Ok(Scenario {
            system: self.system.with_horizon(max_turns)?,
            classifier: self.classifier.clone(),
        })
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["mini-booking", "deterministic", "uniform-2turn"];

/// Looks up a built-in scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "mini-booking" => builtin_mini_booking(&MiniBookingParams::default()),
        "deterministic" => Ok(builtin_deterministic()),
        "uniform-2turn" => Ok(builtin_uniform_benchmark()),
        other => Err(UqError::Config(format!(
            "unknown builtin `{other}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
