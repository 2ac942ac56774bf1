//! The TOML scenario format.
//!
//! Kernel rows are given as a list of `when` patterns, first match wins.
//! Fields left out of a pattern match anything. Context values that no
//! pattern covers become infeasible rows, except that non-interactive
//! actions always emit the null observation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::classifier::{ActionCategory, ActionClassifier, EvidentialityRule, Taxonomy};
use crate::dist::Dist;
use crate::error::{Result, UqError};
use crate::model::{
    ActionId, AgentSystem, Alphabet, ContextComponent, ContextParts, DbStateId, ObsId, Projection, RewardRule,
    RewardTable, SystemParts, TaskId,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Marks "no previous action" in a `last_action` pattern.
pub const NO_ACTION: &str = "<none>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub max_turns: usize,
    pub null_observation: String,
    pub terminal: Vec<String>,
    pub alphabets: Alphabets,
    pub taxonomy: BTreeMap<String, ActionCategory>,
    #[serde(default)]
    pub evidentiality: BTreeMap<String, RuleSpec>,
    pub projection: ProjectionSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub action_kernel: Vec<RowSpec>,
    #[serde(default)]
    pub observation_kernel: Vec<RowSpec>,
    #[serde(default)]
    pub update: Vec<UpdateSpec>,
    pub reward: RewardSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alphabets {
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub tasks: Vec<String>,
    pub db_states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RuleSpec {
    Always,
    Never,
    DbStateIn { states: Vec<String> },
    HistoryContains { action: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    pub agent: Vec<ContextComponent>,
    pub observation: Vec<ContextComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Database state each task starts in.
    pub db: BTreeMap<String, String>,
    pub pairs: Vec<PairSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub task: String,
    pub query: String,
    pub p: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct When {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub db_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_query: Option<String>,
    /// Action kernel only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_obs: Option<String>,
    /// Observation kernel only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    #[serde(default)]
    pub when: When,
    pub probs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateWhen {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub db_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_obs: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSpec {
    #[serde(default)]
    pub when: UpdateWhen,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec {
    pub default: f64,
    #[serde(default)]
    pub rules: Vec<RewardRuleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRuleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_db: Option<String>,
    pub value: f64,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| UqError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let loose: toml::Table = toml::from_str(text).map_err(|e| UqError::Parse(e.to_string()))?;
    match loose.get("schema_version") {
        Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
        Some(v) => {
            return Err(UqError::Parse(format!(
                "unsupported schema_version {v}, this build reads {SCHEMA_VERSION}"
            )))
        }
        None => return Err(UqError::Parse("missing field `schema_version`".into())),
    }
    let file: ScenarioFile = toml::from_str(text).map_err(|e| UqError::Parse(e.to_string()))?;
    file.build()
}

/// Writes `scenario` with every row spelled out, so loading the output
/// reproduces the same tables.
pub fn to_toml(scenario: &Scenario) -> Result<String> {
    toml::to_string(&ScenarioFile::from_scenario(scenario)).map_err(|e| UqError::Parse(e.to_string()))
}

fn lookup(alpha: &Alphabet, kind: &str, label: &str, at: &str) -> Result<usize> {
    alpha
        .lookup(label)
        .ok_or_else(|| UqError::Config(format!("{at}: undeclared {kind} `{label}`")))
}

/// A `when` pattern with labels resolved.
#[derive(Debug, Default)]
struct Pattern {
    turn: Option<usize>,
    task: Option<TaskId>,
    db_state: Option<DbStateId>,
    last_action: Option<Option<ActionId>>,
    initial_query: Option<ObsId>,
    prev_obs: Option<ObsId>,
    action: Option<ActionId>,
}

impl Pattern {
    fn matches(&self, p: &ContextParts) -> bool {
        self.turn.is_none_or(|t| t == p.turn)
            && self.task.is_none_or(|t| t == p.task)
            && self.db_state.is_none_or(|d| d == p.db_state)
            && self.last_action.is_none_or(|a| a == p.last_action)
            && self.initial_query.is_none_or(|q| q == p.initial_query)
    }
}

struct Resolver<'a> {
    actions: &'a Alphabet,
    observations: &'a Alphabet,
    tasks: &'a Alphabet,
    db_states: &'a Alphabet,
}

impl Resolver<'_> {
    fn action(&self, l: &str, at: &str) -> Result<ActionId> {
        lookup(self.actions, "action", l, at).map(ActionId)
    }
    fn obs(&self, l: &str, at: &str) -> Result<ObsId> {
        lookup(self.observations, "observation", l, at).map(ObsId)
    }
    fn task(&self, l: &str, at: &str) -> Result<TaskId> {
        lookup(self.tasks, "task", l, at).map(TaskId)
    }
    fn db(&self, l: &str, at: &str) -> Result<DbStateId> {
        lookup(self.db_states, "db state", l, at).map(DbStateId)
    }

    fn pattern(&self, w: &When, proj: &Projection, at: &str) -> Result<Pattern> {
        let need = |c: ContextComponent, present: bool| -> Result<()> {
            if present && !proj.contains(c) {
                return Err(UqError::Config(format!(
                    "{at}: pattern conditions on `{}`, which the projection does not include",
                    c.name()
                )));
            }
            Ok(())
        };
        need(ContextComponent::Turn, w.turn.is_some())?;
        need(ContextComponent::Task, w.task.is_some())?;
        need(ContextComponent::DbState, w.db_state.is_some())?;
        need(ContextComponent::LastAction, w.last_action.is_some())?;
        need(ContextComponent::InitialQuery, w.initial_query.is_some())?;
        Ok(Pattern {
            turn: w.turn,
            task: w.task.as_deref().map(|l| self.task(l, at)).transpose()?,
            db_state: w.db_state.as_deref().map(|l| self.db(l, at)).transpose()?,
            last_action: w
                .last_action
                .as_deref()
                .map(|l| {
                    if l == NO_ACTION {
                        Ok(None)
                    } else {
                        self.action(l, at).map(Some)
                    }
                })
                .transpose()?,
            initial_query: w.initial_query.as_deref().map(|l| self.obs(l, at)).transpose()?,
            prev_obs: w.prev_obs.as_deref().map(|l| self.obs(l, at)).transpose()?,
            action: w.action.as_deref().map(|l| self.action(l, at)).transpose()?,
        })
    }

    fn dist(&self, alpha: &Alphabet, kind: &str, probs: &BTreeMap<String, f64>, at: &str) -> Result<Dist> {
        let mut w = vec![0.0; alpha.len()];
        for (label, &p) in probs {
            w[lookup(alpha, kind, label, at)?] = p;
        }
        Dist::new(w).map_err(|e| UqError::Validation(format!("{at}: {e}")))
    }
}

impl ScenarioFile {
    /// Resolves labels, expands patterns into dense tables and validates.
    pub fn build(&self) -> Result<Scenario> {
        let actions = Alphabet::new(self.alphabets.actions.clone())?;
        let observations = Alphabet::new(self.alphabets.observations.clone())?;
        let tasks = Alphabet::new(self.alphabets.tasks.clone())?;
        let db_states = Alphabet::new(self.alphabets.db_states.clone())?;
        let r = Resolver {
            actions: &actions,
            observations: &observations,
            tasks: &tasks,
            db_states: &db_states,
        };
        let null = r.obs(&self.null_observation, "null_observation")?;

        for label in self.taxonomy.keys() {
            r.action(label, "taxonomy")?;
        }
        let mut categories = Vec::with_capacity(actions.len());
        for label in actions.labels() {
            let c = self
                .taxonomy
                .get(label)
                .ok_or_else(|| UqError::Config(format!("taxonomy: action `{label}` has no category")))?;
            categories.push(*c);
        }
        let taxonomy = Taxonomy::new(categories);

        let mut terminal = vec![false; actions.len()];
        for label in &self.terminal {
            terminal[r.action(label, "terminal")?.0] = true;
        }

        for label in self.evidentiality.keys() {
            r.action(label, "evidentiality")?;
        }
        let mut rules = Vec::with_capacity(actions.len());
        for (a, label) in actions.labels().iter().enumerate() {
            let at = format!("evidentiality.{label}");
            let rule = match self.evidentiality.get(label) {
                Some(RuleSpec::Always) => EvidentialityRule::Always,
                Some(RuleSpec::Never) => EvidentialityRule::Never,
                Some(RuleSpec::DbStateIn { states }) => EvidentialityRule::DbStateIn {
                    states: states.iter().map(|s| r.db(s, &at)).collect::<Result<_>>()?,
                },
                Some(RuleSpec::HistoryContains { action }) => EvidentialityRule::HistoryContains {
                    action: r.action(action, &at)?,
                },
                None if taxonomy.is_interactive(ActionId(a)) => {
                    return Err(UqError::Config(format!(
                        "evidentiality: interactive action `{label}` needs a rule"
                    )))
                }
                None => EvidentialityRule::Never,
            };
            rules.push(Some(rule));
        }

        let agent_projection = Projection::new(self.projection.agent.clone());
        let observation_projection = Projection::new(self.projection.observation.clone());

        let mut init = vec![0.0; tasks.len() * observations.len()];
        for (i, pair) in self.initial.pairs.iter().enumerate() {
            let at = format!("initial.pairs[{i}]");
            let t = r.task(&pair.task, &at)?;
            let q = r.obs(&pair.query, &at)?;
            init[t.0 * observations.len() + q.0] += pair.p;
        }
        let initial = Dist::new(init).map_err(|e| UqError::Validation(format!("initial.pairs: {e}")))?;
        for label in self.initial.db.keys() {
            r.task(label, "initial.db")?;
        }
        let initial_db = tasks
            .labels()
            .iter()
            .map(|t| {
                let db = self
                    .initial
                    .db
                    .get(t)
                    .ok_or_else(|| UqError::Config(format!("initial.db: task `{t}` has no starting state")))?;
                r.db(db, &format!("initial.db.{t}"))
            })
            .collect::<Result<Vec<_>>>()?;

        // resolve every row once so errors name the row as written
        let mut a_rows = Vec::with_capacity(self.action_kernel.len());
        for (i, row) in self.action_kernel.iter().enumerate() {
            let at = format!("action_kernel[{i}]");
            if row.when.action.is_some() {
                return Err(UqError::Config(format!(
                    "{at}: `action` is not a condition of the action kernel"
                )));
            }
            a_rows.push((
                r.pattern(&row.when, &agent_projection, &at)?,
                r.dist(&actions, "action", &row.probs, &at)?,
            ));
        }
        let mut o_rows = Vec::with_capacity(self.observation_kernel.len());
        for (i, row) in self.observation_kernel.iter().enumerate() {
            let at = format!("observation_kernel[{i}]");
            if row.when.prev_obs.is_some() {
                return Err(UqError::Config(format!(
                    "{at}: `prev_obs` is not a condition of the observation kernel"
                )));
            }
            o_rows.push((
                r.pattern(&row.when, &observation_projection, &at)?,
                r.dist(&observations, "observation", &row.probs, &at)?,
            ));
        }
        let mut updates = Vec::with_capacity(self.update.len());
        for (i, u) in self.update.iter().enumerate() {
            let at = format!("update[{i}]");
            updates.push((
                u.when.db_state.as_deref().map(|l| r.db(l, &at)).transpose()?,
                u.when.prev_obs.as_deref().map(|l| r.obs(l, &at)).transpose()?,
                u.when.action.as_deref().map(|l| r.action(l, &at)).transpose()?,
                r.db(&u.to, &at)?,
            ));
        }

        let mut reward_rules = Vec::with_capacity(self.reward.rules.len());
        for (i, rule) in self.reward.rules.iter().enumerate() {
            let at = format!("reward.rules[{i}]");
            reward_rules.push(RewardRule {
                task: rule.task.as_deref().map(|l| r.task(l, &at)).transpose()?,
                initial_query: rule.initial_query.as_deref().map(|l| r.obs(l, &at)).transpose()?,
                last_action: rule.last_action.as_deref().map(|l| r.action(l, &at)).transpose()?,
                final_db: rule.final_db.as_deref().map(|l| r.db(l, &at)).transpose()?,
                value: rule.value,
            });
        }

        let dims = crate::model::Dims {
            actions: actions.len(),
            observations: observations.len(),
            tasks: tasks.len(),
            db_states: db_states.len(),
            max_turns: self.max_turns,
        };
        let mut action_kernel = Vec::new();
        for key in 0..agent_projection.num_keys(&dims) {
            let parts = agent_projection.decode(&dims, key);
            for o in 0..dims.observations {
                let row = a_rows
                    .iter()
                    .find(|(p, _)| p.matches(&parts) && p.prev_obs.is_none_or(|x| x.0 == o))
                    .map(|(_, d)| d.clone());
                action_kernel.push(row);
            }
        }
        let mut observation_kernel = Vec::new();
        let obs_keys = observation_projection.num_keys(&dims);
        for a in 0..dims.actions {
            for key in 0..obs_keys {
                let parts = observation_projection.decode(&dims, key);
                let row = o_rows
                    .iter()
                    .find(|(p, _)| p.matches(&parts) && p.action.is_none_or(|x| x.0 == a))
                    .map(|(_, d)| d.clone());
                observation_kernel.push(match row {
                    None if !taxonomy.is_interactive(ActionId(a)) => Some(Dist::point_mass(dims.observations, null.0)),
                    other => other,
                });
            }
        }
        let mut update = Vec::with_capacity(dims.db_states * dims.observations * dims.actions);
        for db in 0..dims.db_states {
            for o in 0..dims.observations {
                for a in 0..dims.actions {
                    let to = updates
                        .iter()
                        .find(|(d, po, act, _)| {
                            d.is_none_or(|x| x.0 == db) && po.is_none_or(|x| x.0 == o) && act.is_none_or(|x| x.0 == a)
                        })
                        .map_or(DbStateId(db), |u| u.3);
                    update.push(to);
                }
            }
        }

        let system = AgentSystem::new(SystemParts {
            name: self.name.clone(),
            actions,
            observations,
            tasks,
            db_states,
            null_observation: null,
            taxonomy: taxonomy.clone(),
            agent_projection,
            observation_projection,
            action_kernel,
            observation_kernel,
            update,
            initial,
            initial_db,
            terminal,
            max_turns: self.max_turns,
            reward: RewardTable {
                rules: reward_rules,
                default: self.reward.default,
            },
        })?;
        Ok(Scenario {
            system,
            classifier: ActionClassifier::new(taxonomy, rules),
        })
    }

    /// The explicit form of a scenario: one row per feasible context.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let sys = &scenario.system;
        let p = sys.parts();
        let d = *sys.dims();
        let a_label = |a: ActionId| p.actions.label(a.0).to_string();
        let o_label = |o: ObsId| p.observations.label(o.0).to_string();
        let t_label = |t: TaskId| p.tasks.label(t.0).to_string();
        let db_label = |s: DbStateId| p.db_states.label(s.0).to_string();
        let probs = |alpha: &Alphabet, dist: &Dist| -> BTreeMap<String, f64> {
            dist.support().map(|(i, w)| (alpha.label(i).to_string(), w)).collect()
        };
        let when_of = |proj: &Projection, key: usize| -> When {
            let parts = proj.decode(&d, key);
            let mut w = When::default();
            for &c in proj.components() {
                match c {
                    ContextComponent::Turn => w.turn = Some(parts.turn),
                    ContextComponent::Task => w.task = Some(t_label(parts.task)),
                    ContextComponent::DbState => w.db_state = Some(db_label(parts.db_state)),
                    ContextComponent::LastAction => {
                        w.last_action = Some(parts.last_action.map_or(NO_ACTION.to_string(), a_label))
                    }
                    ContextComponent::InitialQuery => w.initial_query = Some(o_label(parts.initial_query)),
                }
            }
            w
        };

        let mut action_kernel = Vec::new();
        for (i, row) in p.action_kernel.iter().enumerate() {
            if let Some(row) = row {
                let mut when = when_of(&p.agent_projection, i / d.observations);
                when.prev_obs = Some(o_label(ObsId(i % d.observations)));
                action_kernel.push(RowSpec {
                    when,
                    probs: probs(&p.actions, row),
                });
            }
        }
        let obs_keys = p.observation_projection.num_keys(&d);
        let mut observation_kernel = Vec::new();
        for (i, row) in p.observation_kernel.iter().enumerate() {
            if let Some(row) = row {
                let mut when = when_of(&p.observation_projection, i % obs_keys);
                when.action = Some(a_label(ActionId(i / obs_keys)));
                observation_kernel.push(RowSpec {
                    when,
                    probs: probs(&p.observations, row),
                });
            }
        }
        let mut update = Vec::new();
        for (i, &to) in p.update.iter().enumerate() {
            let a = i % d.actions;
            let o = (i / d.actions) % d.observations;
            let db = i / (d.actions * d.observations);
            if to.0 != db {
                update.push(UpdateSpec {
                    when: UpdateWhen {
                        db_state: Some(db_label(DbStateId(db))),
                        prev_obs: Some(o_label(ObsId(o))),
                        action: Some(a_label(ActionId(a))),
                    },
                    to: db_label(to),
                });
            }
        }
        let evidentiality = scenario
            .classifier
            .rules
            .iter()
            .enumerate()
            .filter_map(|(a, rule)| {
                let spec = match rule.as_ref()? {
                    EvidentialityRule::Always => RuleSpec::Always,
                    EvidentialityRule::Never => RuleSpec::Never,
                    EvidentialityRule::DbStateIn { states } => RuleSpec::DbStateIn {
                        states: states.iter().map(|&s| db_label(s)).collect(),
                    },
                    EvidentialityRule::HistoryContains { action } => RuleSpec::HistoryContains {
                        action: a_label(*action),
                    },
                };
                Some((a_label(ActionId(a)), spec))
            })
            .collect();

        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: p.name.clone(),
            max_turns: p.max_turns,
            null_observation: o_label(p.null_observation),
            terminal: (0..d.actions)
                .filter(|&a| p.terminal[a])
                .map(|a| a_label(ActionId(a)))
                .collect(),
            alphabets: Alphabets {
                actions: p.actions.labels().to_vec(),
                observations: p.observations.labels().to_vec(),
                tasks: p.tasks.labels().to_vec(),
                db_states: p.db_states.labels().to_vec(),
            },
            taxonomy: p
                .taxonomy
                .categories()
                .iter()
                .enumerate()
                .map(|(a, &c)| (a_label(ActionId(a)), c))
                .collect(),
            evidentiality,
            projection: ProjectionSpec {
                agent: p.agent_projection.components().to_vec(),
                observation: p.observation_projection.components().to_vec(),
            },
            initial: InitialSpec {
                db: (0..d.tasks)
                    .map(|t| (t_label(TaskId(t)), db_label(p.initial_db[t])))
                    .collect(),
                pairs: p
                    .initial
                    .support()
                    .map(|(i, w)| {
                        let (t, q) = sys.initial_pair(i);
                        PairSpec {
                            task: t_label(t),
                            query: o_label(q),
                            p: w,
                        }
                    })
                    .collect(),
            },
            action_kernel,
            observation_kernel,
            update,
            reward: RewardSpec {
                default: p.reward.default,
                rules: p
                    .reward
                    .rules
                    .iter()
                    .map(|r| RewardRuleSpec {
                        task: r.task.map(t_label),
                        initial_query: r.initial_query.map(o_label),
                        last_action: r.last_action.map(a_label),
                        final_db: r.final_db.map(db_label),
                        value: r.value,
                    })
                    .collect(),
            },
        }
    }
}
