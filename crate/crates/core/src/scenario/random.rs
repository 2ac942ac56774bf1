use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::classifier::{ActionCategory, ActionClassifier, EvidentialityRule, Taxonomy};
use crate::dist::Dist;
use crate::error::{Result, UqError};
use crate::model::{
    ActionId, AgentSystem, Alphabet, ContextComponent, DbStateId, ObsId, Projection, RewardRule, RewardTable,
    SystemParts,
};

/// Parameters of a random system. Observation symbols exclude the null
/// observation, which is always added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSystemSpec {
    pub actions: usize,
    pub observations: usize,
    pub tasks: usize,
    pub db_states: usize,
    pub horizon: usize,
    /// Inverse temperature of the kernel logits; large values give nearly
    /// deterministic rows.
    pub concentration: f64,
    pub interactive_fraction: f64,
    pub evidential_fraction: f64,
    /// Chance that a kernel entry is zeroed (one entry per row survives).
    pub sparsity: f64,
    pub seed: u64,
}

impl Default for RandomSystemSpec {
    fn default() -> Self {
        Self {
            actions: 3,
            observations: 2,
            tasks: 2,
            db_states: 2,
            horizon: 3,
            concentration: 1.0,
            interactive_fraction: 0.5,
            evidential_fraction: 0.5,
            sparsity: 0.2,
            seed: 0,
        }
    }
}

impl RandomSystemSpec {
    /// A spec with sizes drawn so that the system stays under 10^5
    /// trajectories.
    pub fn small(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a);
        let mut spec = Self {
            actions: rng.random_range(2..=4),
            observations: rng.random_range(1..=3),
            tasks: rng.random_range(1..=2),
            db_states: rng.random_range(1..=3),
            horizon: rng.random_range(2..=4),
            concentration: rng.random_range(0.2..2.0),
            interactive_fraction: rng.random_range(0.2..=1.0),
            evidential_fraction: rng.random_range(0.0..=1.0),
            sparsity: rng.random_range(0.0..0.2),
            seed,
        };
        while spec.horizon > 1 && spec.trajectory_bound() > 100_000 {
            spec.horizon -= 1;
        }
        spec
    }

    /// Upper bound on the number of trajectories.
    pub fn trajectory_bound(&self) -> u128 {
        let branch = (self.actions * (self.observations + 1)) as u128;
        let initial = (self.tasks * self.observations) as u128;
        initial.saturating_mul(branch.saturating_pow(self.horizon as u32))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("actions", self.actions),
            ("observations", self.observations),
            ("tasks", self.tasks),
            ("db_states", self.db_states),
            ("horizon", self.horizon),
        ] {
            if v == 0 {
                return Err(UqError::Parameter(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("interactive_fraction", self.interactive_fraction),
            ("evidential_fraction", self.evidential_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(UqError::Parameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(UqError::Parameter(format!(
                "sparsity = {} outside [0, 1)",
                self.sparsity
            )));
        }
        if !(self.concentration >= 0.0) || !self.concentration.is_finite() {
            return Err(UqError::Parameter(format!(
                "concentration = {} must be finite and non-negative",
                self.concentration
            )));
        }
        Ok(())
    }
}

/// Softmax of `c·z` with random zeros; the largest entry always survives.
fn random_dist(rng: &mut ChaCha8Rng, n: usize, c: f64, sparsity: f64, allowed: &[bool]) -> Dist {
    let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * c).collect();
    let best = (0..n)
        .filter(|&i| allowed[i])
        .max_by(|&a, &b| z[a].total_cmp(&z[b]))
        .expect("at least one allowed symbol");
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let keep = allowed[i] && (i == best || !rng.random_bool(sparsity));
            if keep {
                (z[i] - z[best]).exp()
            } else {
                0.0
            }
        })
        .collect();
    Dist::from_unnormalized(w).expect("the best entry has weight 1")
}

/// Draws a random system and classifier. The same spec always yields the
/// same scenario.
///
/// The last action is a terminal final report. Terminal actions are never
/// interactive, and rows at the horizon put all their mass on terminal
/// actions, so every trajectory ends with a deterministic observation.
pub fn generate_random_system(spec: &RandomSystemSpec) -> Result<Scenario> {
    use ActionCategory::*;
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_a = spec.actions;
    let n_o = spec.observations + 1;
    let null = ObsId(0);

    let mut categories = Vec::with_capacity(n_a);
    for a in 0..n_a {
        let c = if a == n_a - 1 {
            FinalReport
        } else if rng.random_bool(spec.interactive_fraction) {
            *[InformationGathering, ClarificationOrConfirmation]
                .choose(&mut rng)
                .unwrap()
        } else {
            *[
                Thinking,
                Thinking,
                StateChangingToolCall,
                StateChangingToolCall,
                FinalReport,
            ]
            .choose(&mut rng)
            .unwrap()
        };
        categories.push(c);
    }
    let terminal: Vec<bool> = categories.iter().map(|&c| c == FinalReport).collect();
    let taxonomy = Taxonomy::new(categories.clone());

    let rules = categories
        .iter()
        .map(|c| {
            let rule = if c.is_interactive() && rng.random_bool(spec.evidential_fraction) {
                match rng.random_range(0..3) {
                    0 => EvidentialityRule::Always,
                    1 => {
                        let mut states: Vec<DbStateId> = (0..spec.db_states)
                            .filter(|_| rng.random_bool(0.5))
                            .map(DbStateId)
                            .collect();
                        if states.is_empty() {
                            states.push(DbStateId(rng.random_range(0..spec.db_states)));
                        }
                        EvidentialityRule::DbStateIn { states }
                    }
                    _ => EvidentialityRule::HistoryContains {
                        action: ActionId(rng.random_range(0..n_a)),
                    },
                }
            } else {
                EvidentialityRule::Never
            };
            Some(rule)
        })
        .collect();

    let agent_projection = Projection::new(vec![
        ContextComponent::Turn,
        ContextComponent::Task,
        ContextComponent::DbState,
    ]);
    let observation_projection = Projection::new(vec![
        ContextComponent::Task,
        ContextComponent::InitialQuery,
        ContextComponent::DbState,
    ]);
    let dims = crate::model::Dims {
        actions: n_a,
        observations: n_o,
        tasks: spec.tasks,
        db_states: spec.db_states,
        max_turns: spec.horizon,
    };

    let any = vec![true; n_a];
    let mut action_kernel = Vec::new();
    for key in 0..agent_projection.num_keys(&dims) {
        let turn = agent_projection.decode(&dims, key).turn;
        let allowed = if turn == spec.horizon { &terminal } else { &any };
        for _ in 0..n_o {
            action_kernel.push(if turn == 0 {
                None
            } else {
                Some(random_dist(&mut rng, n_a, spec.concentration, spec.sparsity, allowed))
            });
        }
    }

    let all_obs = vec![true; n_o];
    let mut observation_kernel = Vec::new();
    for a in 0..n_a {
        for _ in 0..observation_projection.num_keys(&dims) {
            observation_kernel.push(Some(if taxonomy.is_interactive(ActionId(a)) {
                random_dist(&mut rng, n_o, spec.concentration, spec.sparsity, &all_obs)
            } else {
                Dist::point_mass(n_o, null.0)
            }));
        }
    }

    let mut update = Vec::with_capacity(spec.db_states * n_o * n_a);
    for db in 0..spec.db_states {
        for _ in 0..n_o {
            for &c in &categories {
                update.push(if c == StateChangingToolCall {
                    DbStateId(rng.random_range(0..spec.db_states))
                } else {
                    DbStateId(db)
                });
            }
        }
    }

    // queries come from the non-null symbols
    let mut query_ok = vec![true; spec.tasks * n_o];
    for (i, ok) in query_ok.iter_mut().enumerate() {
        *ok = i % n_o != null.0;
    }
    let initial = random_dist(&mut rng, spec.tasks * n_o, spec.concentration, spec.sparsity, &query_ok);
    let initial_db = (0..spec.tasks)
        .map(|_| DbStateId(rng.random_range(0..spec.db_states)))
        .collect();

    let mut reward_rules = Vec::new();
    for q in 1..n_o {
        for a in 0..n_a {
            if rng.random_bool(0.5) {
                reward_rules.push(RewardRule {
                    task: None,
                    initial_query: Some(ObsId(q)),
                    last_action: Some(ActionId(a)),
                    final_db: None,
                    value: 1.0,
                });
            }
        }
    }

    let system = AgentSystem::new(SystemParts {
        name: format!("random-{}", spec.seed),
        actions: Alphabet::numbered("a", n_a)?,
        observations: Alphabet::new(std::iter::once("none".to_string()).chain((1..n_o).map(|i| format!("o{i}"))))?,
        tasks: Alphabet::numbered("t", spec.tasks)?,
        db_states: Alphabet::numbered("s", spec.db_states)?,
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
        max_turns: spec.horizon,
        reward: RewardTable {
            rules: reward_rules,
            default: 0.0,
        },
    })?;
    Ok(Scenario {
        system,
        classifier: ActionClassifier::new(taxonomy, rules),
    })
}
