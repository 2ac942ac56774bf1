//! Quantities computed directly from the kernels, without materializing
//! trajectories.

use std::collections::HashMap;

use super::{Analysis, Lemma1Bounds};
use crate::classifier::NoneReducing;
use crate::error::{Result, UqError};
use crate::measures::{entropy, JointTable, MeasureSpec};
use crate::model::{AgentSystem, FrontierState, ObsId};

/// `H(E_0, O_0) + Σ_i [H(A_i | ·) + H(O_i | A_i, ·)]`, summed over every
/// reachable context by a memoized recursion on the kernel rows.
pub fn exact_total(system: &AgentSystem) -> Result<f64> {
    let mut memo = HashMap::new();
    let mut total = entropy(system.initial_dist());
    for (s, w) in system.initial_frontier() {
        total += w * future_entropy(system, &s, &mut memo)?;
    }
    Ok(total)
}

fn future_entropy(system: &AgentSystem, s: &FrontierState, memo: &mut HashMap<FrontierState, f64>) -> Result<f64> {
    if let Some(&v) = memo.get(s) {
        return Ok(v);
    }
    let arow = system.frontier_action_row(s)?;
    let mut v = entropy(arow);
    for (a, orow) in system.frontier_rows(s)? {
        let pa = arow.prob(a.0);
        v += pa * entropy(orow);
        for (o, po) in orow.support() {
            if let Some(next) = system.frontier_step(s, a, ObsId(o)) {
                v += pa * po * future_entropy(system, &next, memo)?;
            }
        }
    }
    memo.insert(*s, v);
    Ok(v)
}

/// Expected per-turn uncertainty `E[m(P(A_i|·))] + E[m(P(O_i|A_i,·))]` for
/// any whole-distribution measure `m`, taken over contexts that reach
/// turn `i`.
pub fn expected_turn_terms(system: &AgentSystem, measure: &MeasureSpec) -> Result<Vec<f64>> {
    let mut frontier: HashMap<FrontierState, f64> = HashMap::new();
    for (s, w) in system.initial_frontier() {
        *frontier.entry(s).or_default() += w;
    }
    let mut terms = Vec::new();
    while !frontier.is_empty() {
        let mut next: HashMap<FrontierState, f64> = HashMap::new();
        let mut u = 0.0;
        for (s, w) in &frontier {
            let arow = system.frontier_action_row(s)?;
            u += w * measure.apply(arow)?;
            for (a, orow) in system.frontier_rows(s)? {
                let pa = arow.prob(a.0);
                u += w * pa * measure.apply(orow)?;
                for (o, po) in orow.support() {
                    if let Some(n) = system.frontier_step(s, a, ObsId(o)) {
                        *next.entry(n).or_default() += w * pa * po;
                    }
                }
            }
        }
        terms.push(u);
        frontier = next;
    }
    Ok(terms)
}

/// Single-step uncertainty of a one-turn system: `H(A_1 | O_0)`, or
/// `H(O_0, A_1)` when the query's own ambiguity is included.
pub fn single_step(system: &AgentSystem, include_ambiguity: bool) -> Result<f64> {
    if system.max_turns() != 1 {
        return Err(UqError::Config(format!(
            "single-step uncertainty needs a one-turn system, got max_turns = {}",
            system.max_turns()
        )));
    }
    let d = system.dims();
    let mut cells = vec![0.0; d.observations * d.actions];
    for (s, w) in system.initial_frontier() {
        let row = system.frontier_action_row(&s)?;
        for (a, pa) in row.support() {
            cells[s.initial_query.0 * d.actions + a] += w * pa;
        }
    }
    let table = JointTable::from_fn(&["query", "answer"], &[d.observations, d.actions], |i| {
        cells[i[0] * d.actions + i[1]]
    })?;
    if include_ambiguity {
        table.entropy_of(&["query", "answer"])
    } else {
        table.conditional_entropy(&["answer"], &["query"])
    }
}

/// Lower and upper bounds on the gated total that hold for every
/// reduction classifier.
pub fn lemma1_bounds(system: &AgentSystem) -> Result<Lemma1Bounds> {
    let analysis = Analysis::exact(system)?;
    Ok(analysis.expected_report(&NoneReducing, &[])?.lemma1)
}
