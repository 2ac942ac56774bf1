//! The stochastic agent system: alphabets, kernels, the deterministic
//! environment update, termination and reward.
//!
//! A turn `i` draws `A_i ~ P(· | E_{i-1}, O_{i-1})`, applies
//! `E_i = h(E_{i-1}, O_{i-1}, A_i)` and then draws `O_i ~ P(· | A_i, E_i)`.
//! Kernels see the environment only through a finite [`Projection`]; the
//! full history stays in [`EnvState`].

mod react;
mod sim;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::classifier::Taxonomy;
use crate::dist::Dist;
use crate::error::{Result, UqError};

pub use sim::{enumeration_cap, Termination, Trajectory, Turn, DEFAULT_ENUMERATION_CAP};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);
    };
}

id_type!(ActionId);
id_type!(
    /// Observation symbol. Initial queries share this alphabet.
    ObsId
);
id_type!(TaskId);
id_type!(DbStateId);

/// Symbol labels for one alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(UqError::Validation("empty alphabet".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(UqError::Validation(format!("duplicate symbol label `{l}`")));
            }
        }
        Ok(Self { labels, index })
    }

    /// Labels `prefix0, prefix1, ...`.
    pub fn numbered(prefix: &str, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("{prefix}{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn lookup(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = UqError;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

/// A component of the environment state a kernel may condition on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextComponent {
    /// 1-based turn index.
    Turn,
    Task,
    DbState,
    /// Most recent action (none before the first turn).
    LastAction,
    InitialQuery,
}

impl ContextComponent {
    pub fn name(self) -> &'static str {
        match self {
            ContextComponent::Turn => "turn",
            ContextComponent::Task => "task",
            ContextComponent::DbState => "db_state",
            ContextComponent::LastAction => "last_action",
            ContextComponent::InitialQuery => "initial_query",
        }
    }
}

/// Decoded context values. `last_action` is `None` before the first action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContextParts {
    pub turn: usize,
    pub task: TaskId,
    pub db_state: DbStateId,
    pub last_action: Option<ActionId>,
    pub initial_query: ObsId,
}

/// Sizes of every alphabet, needed to lay out context keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub actions: usize,
    pub observations: usize,
    pub tasks: usize,
    pub db_states: usize,
    pub max_turns: usize,
}

impl Dims {
    fn radix(&self, c: ContextComponent) -> usize {
        match c {
            ContextComponent::Turn => self.max_turns + 1,
            ContextComponent::Task => self.tasks,
            ContextComponent::DbState => self.db_states,
            ContextComponent::LastAction => self.actions + 1,
            ContextComponent::InitialQuery => self.observations,
        }
    }
}

/// Which environment components a kernel conditions on. The key is a
/// mixed-radix number over the chosen components, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Projection {
    components: Vec<ContextComponent>,
}

impl Projection {
    pub fn new(mut components: Vec<ContextComponent>) -> Self {
        components.sort();
        components.dedup();
        Self { components }
    }

    pub fn components(&self) -> &[ContextComponent] {
        &self.components
    }

    pub fn contains(&self, c: ContextComponent) -> bool {
        self.components.contains(&c)
    }

    pub fn with(&self, c: ContextComponent) -> Self {
        let mut v = self.components.clone();
        v.push(c);
        Self::new(v)
    }

    pub fn num_keys(&self, dims: &Dims) -> usize {
        self.components.iter().map(|&c| dims.radix(c)).product()
    }

    pub fn key(&self, dims: &Dims, parts: &ContextParts) -> usize {
        let mut key = 0;
        for &c in &self.components {
            let v = match c {
                ContextComponent::Turn => parts.turn,
                ContextComponent::Task => parts.task.0,
                ContextComponent::DbState => parts.db_state.0,
                ContextComponent::LastAction => parts.last_action.map_or(0, |a| a.0 + 1),
                ContextComponent::InitialQuery => parts.initial_query.0,
            };
            key = key * dims.radix(c) + v;
        }
        key
    }

    /// Inverse of [`Projection::key`]; components not in the projection are
    /// left at zero / `None`.
    pub fn decode(&self, dims: &Dims, mut key: usize) -> ContextParts {
        let mut parts = ContextParts {
            turn: 0,
            task: TaskId(0),
            db_state: DbStateId(0),
            last_action: None,
            initial_query: ObsId(0),
        };
        for &c in self.components.iter().rev() {
            let r = dims.radix(c);
            let v = key % r;
            key /= r;
            match c {
                ContextComponent::Turn => parts.turn = v,
                ContextComponent::Task => parts.task = TaskId(v),
                ContextComponent::DbState => parts.db_state = DbStateId(v),
                ContextComponent::LastAction => parts.last_action = v.checked_sub(1).map(ActionId),
                ContextComponent::InitialQuery => parts.initial_query = ObsId(v),
            }
        }
        parts
    }

    /// Human-readable description of a key, for error messages.
    pub fn describe(&self, dims: &Dims, key: usize) -> String {
        let p = self.decode(dims, key);
        let mut out = Vec::new();
        for &c in &self.components {
            out.push(match c {
                ContextComponent::Turn => format!("turn={}", p.turn),
                ContextComponent::Task => format!("task={}", p.task.0),
                ContextComponent::DbState => format!("db_state={}", p.db_state.0),
                ContextComponent::LastAction => match p.last_action {
                    Some(a) => format!("last_action={}", a.0),
                    None => "last_action=none".into(),
                },
                ContextComponent::InitialQuery => format!("initial_query={}", p.initial_query.0),
            });
        }
        format!("key {key} [{}]", out.join(", "))
    }
}

/// Environment state `E_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EnvState {
    pub task: TaskId,
    pub db_state: DbStateId,
    /// `O_0`, the first entry of the interaction history.
    pub initial_query: ObsId,
    /// `A_1 .. A_i`.
    pub actions: Vec<ActionId>,
    /// `O_1 .. O_{i-1}`; `O_i` is drawn after `E_i` exists.
    pub observations: Vec<ObsId>,
}

impl EnvState {
    /// Number of completed generative events in the history, counting `O_0`.
    pub fn history_len(&self) -> usize {
        1 + self.actions.len() + self.observations.len()
    }
}

/// One reward pattern. `None` fields match anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRule {
    pub task: Option<TaskId>,
    pub initial_query: Option<ObsId>,
    pub last_action: Option<ActionId>,
    pub final_db: Option<DbStateId>,
    pub value: f64,
}

/// First matching rule wins; `default` covers everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub rules: Vec<RewardRule>,
    pub default: f64,
}

impl RewardTable {
    pub fn constant(value: f64) -> Self {
        Self {
            rules: Vec::new(),
            default: value,
        }
    }

    pub fn evaluate(&self, traj: &Trajectory) -> f64 {
        let last = traj.turns.last();
        let last_action = last.map(|t| t.action);
        let final_db = last.map_or(traj.initial_env.db_state, |t| t.env.db_state);
        self.rules
            .iter()
            .find(|r| {
                r.task.is_none_or(|t| t == traj.task)
                    && r.initial_query.is_none_or(|q| q == traj.initial_query)
                    && r.last_action.is_none_or(|a| Some(a) == last_action)
                    && r.final_db.is_none_or(|d| d == final_db)
            })
            .map_or(self.default, |r| r.value)
    }
}

/// Everything needed to build an [`AgentSystem`]. Tables are dense:
///
/// * `action_kernel[key * |O| + prev_obs]`, by context key and previous
///   observation; `None` marks a context that can never be reached;
/// * `observation_kernel[action * keys + key]`, same convention;
/// * `update[(db * |O| + prev_obs) * |A| + action]`;
/// * `initial` is over pairs `task * |O| + query`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParts {
    pub name: String,
    pub actions: Alphabet,
    pub observations: Alphabet,
    pub tasks: Alphabet,
    pub db_states: Alphabet,
    pub null_observation: ObsId,
    pub taxonomy: Taxonomy,
    pub agent_projection: Projection,
    pub observation_projection: Projection,
    pub action_kernel: Vec<Option<Dist>>,
    pub observation_kernel: Vec<Option<Dist>>,
    pub update: Vec<DbStateId>,
    pub initial: Dist,
    pub initial_db: Vec<DbStateId>,
    pub terminal: Vec<bool>,
    pub max_turns: usize,
    pub reward: RewardTable,
}

/// A validated agent system. Construction checks every invariant, so the
/// sampler and enumerator never re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSystem {
    parts: SystemParts,
    dims: Dims,
}

/// Reachability state: everything the projections and the support of the
/// next step can depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct FrontierState {
    pub turn: usize,
    pub task: TaskId,
    pub db_state: DbStateId,
    pub last_action: Option<ActionId>,
    pub initial_query: ObsId,
    pub prev_obs: ObsId,
}

impl FrontierState {
    fn context(&self) -> ContextParts {
        ContextParts {
            turn: self.turn,
            task: self.task,
            db_state: self.db_state,
            last_action: self.last_action,
            initial_query: self.initial_query,
        }
    }
}

impl AgentSystem {
    pub fn new(parts: SystemParts) -> Result<Self> {
        let dims = Dims {
            actions: parts.actions.len(),
            observations: parts.observations.len(),
            tasks: parts.tasks.len(),
            db_states: parts.db_states.len(),
            max_turns: parts.max_turns,
        };
        let sys = Self { parts, dims };
        sys.validate()?;
        Ok(sys)
    }

    pub fn parts(&self) -> &SystemParts {
        &self.parts
    }

    pub fn into_parts(self) -> SystemParts {
        self.parts
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn name(&self) -> &str {
        &self.parts.name
    }

    pub fn max_turns(&self) -> usize {
        self.parts.max_turns
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.parts.taxonomy
    }

    pub fn null_observation(&self) -> ObsId {
        self.parts.null_observation
    }

    pub fn is_terminal(&self, a: ActionId) -> bool {
        self.parts.terminal[a.0]
    }

    /// Whether turn `turn` ends the trajectory when it takes action `a`.
    pub fn is_final(&self, turn: usize, a: ActionId) -> bool {
        self.is_terminal(a) || turn >= self.parts.max_turns
    }

    pub fn initial_dist(&self) -> &Dist {
        &self.parts.initial
    }

    pub fn initial_pair(&self, index: usize) -> (TaskId, ObsId) {
        let n = self.dims.observations;
        (TaskId(index / n), ObsId(index % n))
    }

    pub fn initial_env(&self, task: TaskId, query: ObsId) -> EnvState {
        EnvState {
            task,
            db_state: self.parts.initial_db[task.0],
            initial_query: query,
            actions: Vec::new(),
            observations: Vec::new(),
        }
    }

    pub fn reward(&self, traj: &Trajectory) -> f64 {
        self.parts.reward.evaluate(traj)
    }

    /// The deterministic update `h(E_{i-1}, O_{i-1}, A_i)`.
    pub fn next_db(&self, db: DbStateId, prev_obs: ObsId, action: ActionId) -> DbStateId {
        let d = &self.dims;
        self.parts.update[(db.0 * d.observations + prev_obs.0) * d.actions + action.0]
    }

    pub fn apply_update(&self, prev: &EnvState, prev_obs: ObsId, action: ActionId) -> EnvState {
        let mut next = prev.clone();
        next.db_state = self.next_db(prev.db_state, prev_obs, action);
        if !prev.actions.is_empty() {
            next.observations.push(prev_obs);
        }
        next.actions.push(action);
        next
    }

    /// The same system with a different horizon. Turn-indexed rows past the
    /// old horizon reuse the rows of its last turn.
    pub fn with_horizon(&self, max_turns: usize) -> Result<AgentSystem> {
        if max_turns == 0 {
            return Err(UqError::Parameter("horizon must be at least 1".into()));
        }
        let old = self.dims;
        let new = Dims { max_turns, ..old };
        let remap = |proj: &Projection, per_key: usize, block: usize, table: &[Option<Dist>]| {
            let old_keys = proj.num_keys(&old);
            let new_keys = proj.num_keys(&new);
            let mut out = Vec::with_capacity(block * new_keys * per_key);
            for b in 0..block {
                for key in 0..new_keys {
                    let mut parts = proj.decode(&new, key);
                    parts.turn = parts.turn.min(old.max_turns);
                    let old_key = proj.key(&old, &parts);
                    let start = (b * old_keys + old_key) * per_key;
                    out.extend_from_slice(&table[start..start + per_key]);
                }
            }
            out
        };
        let mut parts = self.parts.clone();
        parts.max_turns = max_turns;
        parts.action_kernel = remap(&parts.agent_projection, old.observations, 1, &self.parts.action_kernel);
        parts.observation_kernel = remap(
            &parts.observation_projection,
            1,
            old.actions,
            &self.parts.observation_kernel,
        );
        AgentSystem::new(parts)
    }

    fn agent_parts(&self, turn: usize, prev: &EnvState) -> ContextParts {
        ContextParts {
            turn,
            task: prev.task,
            db_state: prev.db_state,
            last_action: prev.actions.last().copied(),
            initial_query: prev.initial_query,
        }
    }

    fn obs_parts(&self, turn: usize, env: &EnvState) -> ContextParts {
        ContextParts {
            turn,
            task: env.task,
            db_state: env.db_state,
            last_action: env.actions.last().copied(),
            initial_query: env.initial_query,
        }
    }

    pub(crate) fn action_row_by(&self, parts: &ContextParts, prev_obs: ObsId) -> Result<&Dist> {
        let key = self.parts.agent_projection.key(&self.dims, parts);
        self.parts.action_kernel[key * self.dims.observations + prev_obs.0]
            .as_ref()
            .ok_or_else(|| {
                UqError::Validation(format!(
                    "reached infeasible action context {}, previous observation {}",
                    self.parts.agent_projection.describe(&self.dims, key),
                    prev_obs.0
                ))
            })
    }

    pub(crate) fn obs_row_by(&self, parts: &ContextParts, action: ActionId) -> Result<&Dist> {
        let keys = self.parts.observation_projection.num_keys(&self.dims);
        let key = self.parts.observation_projection.key(&self.dims, parts);
        self.parts.observation_kernel[action.0 * keys + key]
            .as_ref()
            .ok_or_else(|| {
                UqError::Validation(format!(
                    "reached infeasible observation context for action {}: {}",
                    action.0,
                    self.parts.observation_projection.describe(&self.dims, key)
                ))
            })
    }

    /// `P(A_turn | E_{turn-1}, O_{turn-1})`.
    pub fn action_row(&self, turn: usize, prev: &EnvState, prev_obs: ObsId) -> Result<&Dist> {
        self.action_row_by(&self.agent_parts(turn, prev), prev_obs)
    }

    /// `P(O_turn | A_turn, E_turn)`; `env` already contains `A_turn`.
    pub fn observation_row(&self, turn: usize, env: &EnvState) -> Result<&Dist> {
        let action = *env
            .actions
            .last()
            .ok_or_else(|| UqError::Structural("observation requested before any action".into()))?;
        self.obs_row_by(&self.obs_parts(turn, env), action)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.parts;
        let d = &self.dims;
        if p.max_turns == 0 {
            return Err(UqError::Validation("max_turns must be at least 1".into()));
        }
        if p.null_observation.0 >= d.observations {
            return Err(UqError::Validation("null observation outside alphabet".into()));
        }
        if p.taxonomy.len() != d.actions {
            return Err(UqError::Validation(format!(
                "taxonomy labels {} actions, alphabet has {}",
                p.taxonomy.len(),
                d.actions
            )));
        }
        if p.terminal.len() != d.actions {
            return Err(UqError::Validation(
                "terminal flags do not cover the action alphabet".into(),
            ));
        }
        let agent_keys = p.agent_projection.num_keys(d);
        let obs_keys = p.observation_projection.num_keys(d);
        if p.action_kernel.len() != agent_keys * d.observations {
            return Err(UqError::Validation(format!(
                "action kernel has {} rows, expected {}",
                p.action_kernel.len(),
                agent_keys * d.observations
            )));
        }
        for (i, row) in p.action_kernel.iter().enumerate() {
            if let Some(row) = row {
                if row.len() != d.actions {
                    return Err(UqError::Validation(format!(
                        "action kernel row {} ({}, observation {}) has {} entries, expected {}",
                        i,
                        p.agent_projection.describe(d, i / d.observations),
                        p.observations.label(i % d.observations),
                        row.len(),
                        d.actions
                    )));
                }
            }
        }
        if p.observation_kernel.len() != d.actions * obs_keys {
            return Err(UqError::Validation(format!(
                "observation kernel has {} rows, expected {}",
                p.observation_kernel.len(),
                d.actions * obs_keys
            )));
        }
        for (i, row) in p.observation_kernel.iter().enumerate() {
            let action = i / obs_keys;
            let Some(row) = row else { continue };
            if row.len() != d.observations {
                return Err(UqError::Validation(format!(
                    "observation kernel row for action `{}` has {} entries, expected {}",
                    p.actions.label(action),
                    row.len(),
                    d.observations
                )));
            }
            if !p.taxonomy.is_interactive(ActionId(action)) && !row.is_point_mass_at(p.null_observation.0) {
                return Err(UqError::Validation(format!(
                    "non-interactive action `{}` must emit the null observation with probability 1 ({})",
                    p.actions.label(action),
                    p.observation_projection.describe(d, i % obs_keys)
                )));
            }
        }
        if p.update.len() != d.db_states * d.observations * d.actions {
            return Err(UqError::Validation("update table is not total".into()));
        }
        if let Some(bad) = p.update.iter().find(|s| s.0 >= d.db_states) {
            return Err(UqError::Validation(format!(
                "update target {} is not a database state",
                bad.0
            )));
        }
        if p.initial.len() != d.tasks * d.observations {
            return Err(UqError::Validation(
                "initial distribution must cover task x query pairs".into(),
            ));
        }
        if p.initial_db.len() != d.tasks || p.initial_db.iter().any(|s| s.0 >= d.db_states) {
            return Err(UqError::Validation(
                "initial database state missing or out of range".into(),
            ));
        }
        self.check_reachable_rows()
    }

    pub(crate) fn initial_frontier(&self) -> impl Iterator<Item = (FrontierState, f64)> + '_ {
        self.parts.initial.support().map(move |(i, w)| {
            let (task, q) = self.initial_pair(i);
            (
                FrontierState {
                    turn: 1,
                    task,
                    db_state: self.parts.initial_db[task.0],
                    last_action: None,
                    initial_query: q,
                    prev_obs: q,
                },
                w,
            )
        })
    }

    /// Successor states after `action` and `obs` at `state`, or `None` when
    /// the turn is final.
    pub(crate) fn frontier_step(&self, state: &FrontierState, action: ActionId, obs: ObsId) -> Option<FrontierState> {
        if self.is_final(state.turn, action) {
            return None;
        }
        Some(FrontierState {
            turn: state.turn + 1,
            task: state.task,
            db_state: self.next_db(state.db_state, state.prev_obs, action),
            last_action: Some(action),
            initial_query: state.initial_query,
            prev_obs: obs,
        })
    }

    pub(crate) fn frontier_action_row(&self, state: &FrontierState) -> Result<&Dist> {
        self.action_row_by(&state.context(), state.prev_obs)
    }

    pub(crate) fn frontier_rows(&self, state: &FrontierState) -> Result<Vec<(ActionId, &Dist)>> {
        let parts = state.context();
        let row = self.action_row_by(&parts, state.prev_obs)?;
        let mut out = Vec::new();
        for (a, _) in row.support() {
            let a = ActionId(a);
            let after = ContextParts {
                db_state: self.next_db(state.db_state, state.prev_obs, a),
                last_action: Some(a),
                ..parts
            };
            out.push((a, self.obs_row_by(&after, a)?));
        }
        Ok(out)
    }

    fn check_reachable_rows(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut stack: Vec<FrontierState> = self.initial_frontier().map(|(s, _)| s).collect();
        while let Some(state) = stack.pop() {
            if !seen.insert(state) {
                continue;
            }
            for (a, obs_row) in self.frontier_rows(&state)? {
                for (o, _) in obs_row.support() {
                    if let Some(next) = self.frontier_step(&state, a, ObsId(o)) {
                        stack.push(next);
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact number of positive-probability trajectories.
    pub fn count_trajectories(&self) -> u128 {
        let mut memo = HashMap::new();
        self.initial_frontier()
            .map(|(s, _)| self.count_from(&s, &mut memo))
            .fold(0u128, |a, b| a.saturating_add(b))
    }

    fn count_from(&self, state: &FrontierState, memo: &mut HashMap<FrontierState, u128>) -> u128 {
        if let Some(&c) = memo.get(state) {
            return c;
        }
        let mut total = 0u128;
        // rows are guaranteed feasible by construction
        for (a, obs_row) in self.frontier_rows(state).expect("validated system") {
            for (o, _) in obs_row.support() {
                let c = match self.frontier_step(state, a, ObsId(o)) {
                    Some(next) => self.count_from(&next, memo),
                    None => 1,
                };
                total = total.saturating_add(c);
            }
        }
        memo.insert(*state, total);
        total
    }
}
