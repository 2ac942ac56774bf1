//! Action taxonomy, evidentiality rules and membership in the
//! uncertainty-reduction set.
//!
//! An action reduces uncertainty iff it is interactive (it invites a user or
//! tool response) and evidential (it agrees with what the environment
//! stores). Interactivity is a property of the category alone; evidentiality
//! is a scenario-authored predicate over the database state and history.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};
use crate::model::{ActionId, DbStateId, EnvState, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionCategory {
    InformationGathering,
    ClarificationOrConfirmation,
    Thinking,
    StateChangingToolCall,
    FinalReport,
}

impl ActionCategory {
    pub const ALL: [ActionCategory; 5] = [
        ActionCategory::InformationGathering,
        ActionCategory::ClarificationOrConfirmation,
        ActionCategory::Thinking,
        ActionCategory::StateChangingToolCall,
        ActionCategory::FinalReport,
    ];

    /// Whether actions of this category solicit an external observation.
    pub fn is_interactive(self) -> bool {
        matches!(
            self,
            ActionCategory::InformationGathering | ActionCategory::ClarificationOrConfirmation
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionCategory::InformationGathering => "information-gathering",
            ActionCategory::ClarificationOrConfirmation => "clarification-or-confirmation",
            ActionCategory::Thinking => "thinking",
            ActionCategory::StateChangingToolCall => "state-changing-tool-call",
            ActionCategory::FinalReport => "final-report",
        }
    }
}

impl std::fmt::Display for ActionCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The classification of one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActionClass {
    pub category: ActionCategory,
    pub interactive: bool,
}

impl From<ActionCategory> for ActionClass {
    fn from(category: ActionCategory) -> Self {
        Self {
            category,
            interactive: category.is_interactive(),
        }
    }
}

/// Category per action id. Total over the action alphabet once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    categories: Vec<ActionCategory>,
}

impl Taxonomy {
    pub fn new(categories: Vec<ActionCategory>) -> Self {
        Self { categories }
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[ActionCategory] {
        &self.categories
    }

    pub fn classify(&self, action: ActionId) -> Result<ActionClass> {
        self.categories
            .get(action.0)
            .map(|&c| c.into())
            .ok_or_else(|| UqError::Config(format!("action {} has no taxonomy label", action.0)))
    }

    pub fn is_interactive(&self, action: ActionId) -> bool {
        self.categories.get(action.0).is_some_and(|c| c.is_interactive())
    }

    pub fn is_thinking(&self, action: ActionId) -> bool {
        self.categories.get(action.0) == Some(&ActionCategory::Thinking)
    }
}

/// A taxonomy keyed by free-form action surface strings.
///
/// Scenarios use [`Taxonomy`] over symbol ids; this form is for labelling
/// raw action texts such as tool names or utterances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelTaxonomy {
    labels: BTreeMap<String, ActionCategory>,
}

impl LabelTaxonomy {
    pub fn insert(&mut self, label: impl Into<String>, category: ActionCategory) {
        self.labels.insert(label.into(), category);
    }

    pub fn classify_label(&self, label: &str) -> Result<ActionClass> {
        self.labels
            .get(label)
            .map(|&c| c.into())
            .ok_or_else(|| UqError::Config(format!("unlabeled action `{label}`")))
    }
}

/// The airline booking action classes, seeded with their example surfaces.
pub fn airline_taxonomy() -> LabelTaxonomy {
    use ActionCategory::*;
    let mut t = LabelTaxonomy::default();
    t.insert("get_reservation_details", InformationGathering);
    t.insert("search_flights", InformationGathering);
    t.insert(
        "Could you provide your reservation number and last name?",
        InformationGathering,
    );
    t.insert(
        "Do you want me to proceed with booking FQ8APE?",
        ClarificationOrConfirmation,
    );
    t.insert("plan_future_actions", Thinking);
    t.insert("cancel_reservation", StateChangingToolCall);
    t.insert("book_reservation", StateChangingToolCall);
    t.insert("update_reservation_flights", StateChangingToolCall);
    t.insert(
        "Your reservation has been cancelled; your refund will be processed",
        FinalReport,
    );
    t.insert("Your flight has been rebooked to SFO departing at 8 a.m.", FinalReport);
    t
}

/// Evidentiality predicate attached to one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum EvidentialityRule {
    Always,
    Never,
    /// The database holds the record the action refers to, i.e. the current
    /// state is one of `states`.
    DbStateIn {
        states: Vec<DbStateId>,
    },
    /// Some earlier turn took `action`.
    HistoryContains {
        action: ActionId,
    },
}

/// What an evidentiality rule may look at: the state the action is taken in,
/// minus the initial query.
#[derive(Debug, Clone, Copy)]
pub struct GateView<'a> {
    /// 1-based turn index of `action`.
    pub turn: usize,
    pub action: ActionId,
    pub task: TaskId,
    /// Database state before the action is applied.
    pub db_state: DbStateId,
    /// Actions of earlier turns.
    pub prior_actions: &'a [ActionId],
}

impl<'a> GateView<'a> {
    /// View of `action` taken in state `prev` at turn `turn`.
    pub fn new(turn: usize, action: ActionId, prev: &'a EnvState) -> Self {
        Self {
            turn,
            action,
            task: prev.task,
            db_state: prev.db_state,
            prior_actions: &prev.actions,
        }
    }
}

impl EvidentialityRule {
    pub fn holds(&self, view: &GateView<'_>) -> bool {
        match self {
            EvidentialityRule::Always => true,
            EvidentialityRule::Never => false,
            EvidentialityRule::DbStateIn { states } => states.contains(&view.db_state),
            EvidentialityRule::HistoryContains { action } => view.prior_actions.contains(action),
        }
    }
}

/// Decides, per turn, whether the realized action belongs to the reduction set.
pub trait ReductionClassifier: Sync {
    fn in_reduction_set(&self, view: &GateView<'_>) -> Result<bool>;
}

/// The compound rule: interactive (from the taxonomy) and evidential (from
/// the per-action rule table).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionClassifier {
    pub taxonomy: Taxonomy,
    pub rules: Vec<Option<EvidentialityRule>>,
}

impl ActionClassifier {
    pub fn new(taxonomy: Taxonomy, rules: Vec<Option<EvidentialityRule>>) -> Self {
        Self { taxonomy, rules }
    }

    pub fn classify_action(&self, action: ActionId) -> Result<ActionClass> {
        self.taxonomy.classify(action)
    }

    pub fn is_evidential(&self, view: &GateView<'_>) -> Result<bool> {
        match self.rules.get(view.action.0) {
            Some(Some(rule)) => Ok(rule.holds(view)),
            _ => Err(UqError::Config(format!(
                "no evidentiality rule for action {}",
                view.action.0
            ))),
        }
    }
}

impl ReductionClassifier for ActionClassifier {
    fn in_reduction_set(&self, view: &GateView<'_>) -> Result<bool> {
        let class = self.classify_action(view.action)?;
        let evidential = self.is_evidential(view)?;
        Ok(class.interactive && evidential)
    }
}

/// Marks every non-final turn as reducing.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllReducing;

impl ReductionClassifier for AllReducing {
    fn in_reduction_set(&self, _: &GateView<'_>) -> Result<bool> {
        Ok(true)
    }
}

/// Never reduces; the gated total collapses to the plain chain-rule total.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoneReducing;

impl ReductionClassifier for NoneReducing {
    fn in_reduction_set(&self, _: &GateView<'_>) -> Result<bool> {
        Ok(false)
    }
}

/// Pseudo-random verdicts, a deterministic hash of the seed and the view.
/// Used to exercise mixed-verdict turns in property suites.
#[derive(Debug, Clone, Copy)]
pub struct HashedVerdicts {
    pub seed: u64,
    /// Probability of a reducing verdict.
    pub rate: f64,
}

impl ReductionClassifier for HashedVerdicts {
    fn in_reduction_set(&self, view: &GateView<'_>) -> Result<bool> {
        let mut h = splitmix(self.seed ^ 0x5eed);
        for v in [view.turn, view.action.0, view.task.0, view.db_state.0] {
            h = splitmix(h ^ v as u64);
        }
        for a in view.prior_actions {
            h = splitmix(h ^ (a.0 as u64 + 1).wrapping_mul(0x9e37));
        }
        Ok(((h >> 11) as f64 / (1u64 << 53) as f64) < self.rate)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<F> ReductionClassifier for F
where
    F: Fn(&GateView<'_>) -> bool + Sync,
{
    fn in_reduction_set(&self, view: &GateView<'_>) -> Result<bool> {
        Ok(self(view))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(action: usize, db: usize, prior: &[ActionId]) -> GateView<'_> {
        GateView {
            turn: 1,
            action: ActionId(action),
            task: TaskId(0),
            db_state: DbStateId(db),
            prior_actions: prior,
        }
    }

    #[test]
    fn table_one_interactivity() {
        use ActionCategory::*;
        let expected = [
            (InformationGathering, true),
            (ClarificationOrConfirmation, true),
            (Thinking, false),
            (StateChangingToolCall, false),
            (FinalReport, false),
        ];
        for (c, i) in expected {
            assert_eq!(c.is_interactive(), i, "{c}");
        }
    }

    #[test]
    fn airline_examples() {
        let t = airline_taxonomy();
        let c = t.classify_label("search_flights").unwrap();
        assert_eq!(c.category, ActionCategory::InformationGathering);
        assert!(c.interactive);
        let c = t.classify_label("cancel_reservation").unwrap();
        assert_eq!(c.category, ActionCategory::StateChangingToolCall);
        assert!(!c.interactive);
        assert!(t.classify_label("open_the_pod_bay_doors").is_err());
    }

    #[test]
    fn evidentiality_rules() {
        let rule = EvidentialityRule::DbStateIn {
            states: vec![DbStateId(1)],
        };
        assert!(rule.holds(&view(0, 1, &[])));
        assert!(!rule.holds(&view(0, 0, &[])));
        let rule = EvidentialityRule::HistoryContains { action: ActionId(2) };
        assert!(rule.holds(&view(0, 0, &[ActionId(2)])));
        assert!(!rule.holds(&view(0, 0, &[ActionId(1)])));
    }

    #[test]
    fn compound_membership() {
        use ActionCategory::*;
        let clf = ActionClassifier::new(
            Taxonomy::new(vec![InformationGathering, Thinking, ClarificationOrConfirmation]),
            vec![
                Some(EvidentialityRule::DbStateIn {
                    states: vec![DbStateId(1)],
                }),
                Some(EvidentialityRule::Always),
                None,
            ],
        );
        assert!(clf.in_reduction_set(&view(0, 1, &[])).unwrap());
        // interactive but the referenced record is absent
        assert!(!clf.in_reduction_set(&view(0, 0, &[])).unwrap());
        // thinking is never reducing
        assert!(!clf.in_reduction_set(&view(1, 1, &[])).unwrap());
        assert!(matches!(
            clf.in_reduction_set(&view(2, 1, &[])),
            Err(UqError::Config(_))
        ));
        assert!(clf.classify_action(ActionId(7)).is_err());
    }

    #[test]
    fn hashed_verdicts_are_deterministic() {
        let h = HashedVerdicts { seed: 9, rate: 0.5 };
        let prior = [ActionId(1)];
        let a = h.in_reduction_set(&view(0, 0, &prior)).unwrap();
        for _ in 0..10 {
            assert_eq!(h.in_reduction_set(&view(0, 0, &prior)).unwrap(), a);
        }
        let always = HashedVerdicts { seed: 9, rate: 1.0 };
        assert!(always.in_reduction_set(&view(3, 2, &[])).unwrap());
    }
}
