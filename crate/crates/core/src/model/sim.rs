use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ActionId, AgentSystem, EnvState, ObsId, TaskId};
use crate::error::{Result, UqError};

/// Enumeration refuses systems with more trajectories than this unless
/// overridden.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TerminalAction,
    MaxTurns,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Turn {
    pub action: ActionId,
    /// `E_i`, after the update that consumed `action`.
    pub env: EnvState,
    pub observation: ObsId,
    pub action_log_prob: f64,
    pub observation_log_prob: f64,
}

/// A realized trajectory `(E_0, O_0), (A_1, E_1, O_1), ..., (A_T, E_T, O_T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub task: TaskId,
    pub initial_query: ObsId,
    pub initial_log_prob: f64,
    pub initial_env: EnvState,
    pub turns: Vec<Turn>,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Sum of the recorded per-event log-probabilities.
    pub fn recorded_log_prob(&self) -> f64 {
        self.initial_log_prob
            + self
                .turns
                .iter()
                .map(|t| t.action_log_prob + t.observation_log_prob)
                .sum::<f64>()
    }

    /// `E_{i-1}` for the 1-based turn `i`.
    pub fn env_before(&self, turn: usize) -> &EnvState {
        if turn <= 1 {
            &self.initial_env
        } else {
            &self.turns[turn - 2].env
        }
    }

    /// `O_{i-1}` for the 1-based turn `i`.
    pub fn obs_before(&self, turn: usize) -> ObsId {
        if turn <= 1 {
            self.initial_query
        } else {
            self.turns[turn - 2].observation
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.turns.iter().map(|t| t.action)
    }
}

impl AgentSystem {
    /// Draws one trajectory. The same seed always yields the same trajectory.
    pub fn sample_trajectory(&self, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    /// Draws `n` trajectories from one seeded stream.
    pub fn sample_trajectories(&self, n: usize, seed: u64) -> Vec<Trajectory> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_with(&mut rng)).collect()
    }

    pub fn sample_with(&self, rng: &mut ChaCha8Rng) -> Trajectory {
        let init = self.initial_dist();
        let pair = init.sample(rng);
        let (task, query) = self.initial_pair(pair);
        let mut traj = Trajectory {
            task,
            initial_query: query,
            initial_log_prob: init.prob(pair).ln(),
            initial_env: self.initial_env(task, query),
            turns: Vec::new(),
            terminated_by: Termination::MaxTurns,
        };
        for turn in 1..=self.max_turns() {
            let prev = traj.env_before(turn);
            let prev_obs = traj.obs_before(turn);
            // construction guarantees every reachable row exists
            let row = self.action_row(turn, prev, prev_obs).expect("validated system");
            let a = ActionId(row.sample(rng));
            let action_log_prob = row.prob(a.0).ln();
            let env = self.apply_update(prev, prev_obs, a);
            let orow = self.observation_row(turn, &env).expect("validated system");
            let o = ObsId(orow.sample(rng));
            traj.turns.push(Turn {
                action: a,
                env,
                observation: o,
                action_log_prob,
                observation_log_prob: orow.prob(o.0).ln(),
            });
            if self.is_terminal(a) {
                traj.terminated_by = Termination::TerminalAction;
                break;
            }
        }
        traj
    }

    /// Every positive-probability trajectory with its probability.
    pub fn enumerate_trajectories(&self) -> Result<Vec<(Trajectory, f64)>> {
        self.enumerate_with_cap(enumeration_cap())
    }

    pub fn enumerate_with_cap(&self, cap: u128) -> Result<Vec<(Trajectory, f64)>> {
        let estimated = self.count_trajectories();
        if estimated > cap {
            return Err(UqError::EnumerationCap { estimated, cap });
        }
        let mut out = Vec::with_capacity(estimated as usize);
        for (pair, w) in self.initial_dist().support() {
            let (task, query) = self.initial_pair(pair);
            let mut traj = Trajectory {
                task,
                initial_query: query,
                initial_log_prob: w.ln(),
                initial_env: self.initial_env(task, query),
                turns: Vec::new(),
                terminated_by: Termination::MaxTurns,
            };
            self.expand(&mut traj, w, &mut out)?;
        }
        Ok(out)
    }

    fn expand(&self, traj: &mut Trajectory, mass: f64, out: &mut Vec<(Trajectory, f64)>) -> Result<()> {
        let turn = traj.turns.len() + 1;
        let prev_obs = traj.obs_before(turn);
        let row = self.action_row(turn, traj.env_before(turn), prev_obs)?;
        for (a, pa) in row.support() {
            let a = ActionId(a);
            let env = self.apply_update(traj.env_before(turn), prev_obs, a);
            let orow = self.observation_row(turn, &env)?;
            for (o, po) in orow.support() {
                traj.turns.push(Turn {
                    action: a,
                    env: env.clone(),
                    observation: ObsId(o),
                    action_log_prob: pa.ln(),
                    observation_log_prob: po.ln(),
                });
                let m = mass * pa * po;
                if self.is_final(turn, a) {
                    let mut leaf = traj.clone();
                    leaf.terminated_by = if self.is_terminal(a) {
                        Termination::TerminalAction
                    } else {
                        Termination::MaxTurns
                    };
                    out.push((leaf, m));
                } else {
                    self.expand(traj, m, out)?;
                }
                traj.turns.pop();
            }
        }
        Ok(())
    }

    /// Replays `traj` through the kernels and returns
    /// `log P(E_0, O_0) + Σ_i [log P(A_i | ·) + log P(O_i | ·)]`.
    ///
    /// A zero-probability event yields `f64::NEG_INFINITY`; a trajectory
    /// whose stored states disagree with the update rule, or whose length
    /// violates the termination rule, is a structural error.
    pub fn trajectory_log_prob(&self, traj: &Trajectory) -> Result<f64> {
        let d = self.dims();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(UqError::Structural(what.to_string()))
            }
        };
        check(traj.task.0 < d.tasks, "task outside alphabet")?;
        check(traj.initial_query.0 < d.observations, "initial query outside alphabet")?;
        check(
            traj.initial_env == self.initial_env(traj.task, traj.initial_query),
            "initial environment state does not match the task",
        )?;
        check(!traj.turns.is_empty(), "trajectory has no turns")?;
        check(traj.turns.len() <= self.max_turns(), "trajectory exceeds max_turns")?;

        let pair = traj.task.0 * d.observations + traj.initial_query.0;
        let p0 = self.initial_dist().prob(pair);
        if p0 <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let mut total = p0.ln();
        for (k, t) in traj.turns.iter().enumerate() {
            let turn = k + 1;
            check(t.action.0 < d.actions, "action outside alphabet")?;
            check(t.observation.0 < d.observations, "observation outside alphabet")?;
            let prev = traj.env_before(turn);
            let prev_obs = traj.obs_before(turn);
            let expected = self.apply_update(prev, prev_obs, t.action);
            if expected != t.env {
                return Err(UqError::Structural(format!(
                    "environment snapshot at turn {turn} does not replay"
                )));
            }
            let last = turn == traj.turns.len();
            if self.is_final(turn, t.action) != last {
                return Err(UqError::Structural(format!(
                    "termination rule disagrees with trajectory length at turn {turn}"
                )));
            }
            let row = match self.action_row(turn, prev, prev_obs) {
                Ok(r) => r,
                Err(_) => return Ok(f64::NEG_INFINITY),
            };
            let pa = row.prob(t.action.0);
            if pa <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let orow = match self.observation_row(turn, &t.env) {
                Ok(r) => r,
                Err(_) => return Ok(f64::NEG_INFINITY),
            };
            let po = orow.prob(t.observation.0);
            if po <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += pa.ln() + po.ln();
        }
        Ok(total)
    }
}

/// The enumeration cap, overridable through `AGENTUQ_ENUM_CAP`.
pub fn enumeration_cap() -> u128 {
    std::env::var("AGENTUQ_ENUM_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUMERATION_CAP)
}
