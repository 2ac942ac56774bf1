//! Serialization of command results to JSON or long-format CSV.

use std::io::Write;

use serde::Serialize;

use agentuq::model::{AgentSystem, Termination, Trajectory};
use agentuq::uq::UncertaintyReport;

use crate::{Cli, Failure, Units};

impl Units {
    /// Multiplier from nats to the display unit.
    pub fn factor(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

/// Writes `text` to `--out` or standard output.
pub fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure {
        exit: 2,
        code: "E_IO",
        message: e.to_string(),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(io)?;
            out.flush().map_err(io)
        }
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure {
        exit: 1,
        code: "E_INTERNAL",
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

/// Builds CSV text from a header and string rows.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let internal = |m: String| Failure {
        exit: 1,
        code: "E_INTERNAL",
        message: m,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| internal(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| internal(e.to_string()))
}

/// Rescales every logarithmic field of a report, then recomputes the
/// derived ones from the rescaled fields.
pub fn rescale_report(report: &mut UncertaintyReport, factor: f64) {
    if factor == 1.0 {
        return;
    }
    let init = &mut report.initial;
    init.task_volatility *= factor;
    init.query_uncertainty *= factor;
    init.total = init.task_volatility + init.query_uncertainty;
    for t in &mut report.turns {
        t.action_term *= factor;
        t.observation_term *= factor;
        t.propagated *= factor;
        t.info_gain = t.info_gain.map(|g| g * factor);
        t.signed_contribution = t.propagated - t.info_gain.unwrap_or(0.0);
        if t.gate_value.is_some() {
            t.gate_value = Some(t.signed_contribution / t.action_term);
        }
    }
    for v in report.totals.values_mut() {
        *v *= factor;
    }
    let (exact, gated) = (report.exact(), report.gated());
    if let Some(v) = report.totals.get_mut("exact") {
        *v = exact;
    }
    if let Some(v) = report.totals.get_mut("gated") {
        *v = gated;
    }
    report.lemma1.lower *= factor;
    report.lemma1.upper *= factor;
}

#[derive(Debug, Serialize)]
pub struct TurnRecord {
    pub action: String,
    pub db_state: String,
    pub observation: String,
}

#[derive(Debug, Serialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub task: String,
    pub initial_query: String,
    pub turns: Vec<TurnRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub terminated_by: String,
}

impl TrajectoryRecord {
    pub fn new(system: &AgentSystem, index: usize, t: &Trajectory, probability: Option<f64>) -> Self {
        let parts = system.parts();
        Self {
            index,
            task: parts.tasks.label(t.task.0).to_string(),
            initial_query: parts.observations.label(t.initial_query.0).to_string(),
            turns: t
                .turns
                .iter()
                .map(|s| TurnRecord {
                    action: parts.actions.label(s.action.0).to_string(),
                    db_state: parts.db_states.label(s.env.db_state.0).to_string(),
                    observation: parts.observations.label(s.observation.0).to_string(),
                })
                .collect(),
            probability,
            log_prob: t.recorded_log_prob(),
            reward: system.reward(t),
            terminated_by: match t.terminated_by {
                Termination::TerminalAction => "terminal_action".into(),
                Termination::MaxTurns => "max_turns".into(),
            },
        }
    }

    pub fn csv_row(&self) -> Vec<String> {
        let join = |f: fn(&TurnRecord) -> &str| self.turns.iter().map(f).collect::<Vec<_>>().join(" ");
        vec![
            self.index.to_string(),
            self.task.clone(),
            self.initial_query.clone(),
            join(|t| &t.action),
            join(|t| &t.observation),
            self.probability.map(|p| p.to_string()).unwrap_or_default(),
            self.log_prob.to_string(),
            self.reward.to_string(),
            self.terminated_by.clone(),
        ]
    }
}

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "index",
    "task",
    "initial_query",
    "actions",
    "observations",
    "probability",
    "log_prob",
    "reward",
    "terminated_by",
];

/// Long-format rows `kind,name,turn,value` for a Shannon report.
pub fn report_rows(report: &UncertaintyReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut push = |kind: &str, name: &str, turn: Option<usize>, value: String| {
        rows.push(vec![
            kind.to_string(),
            name.to_string(),
            turn.map(|t| t.to_string()).unwrap_or_default(),
            value,
        ]);
    };
    let init = &report.initial;
    push("initial", "total", None, init.total.to_string());
    push("initial", "task_volatility", None, init.task_volatility.to_string());
    push("initial", "query_uncertainty", None, init.query_uncertainty.to_string());
    for t in &report.turns {
        let n = Some(t.turn);
        push("turn", "action_term", n, t.action_term.to_string());
        push("turn", "observation_term", n, t.observation_term.to_string());
        push("turn", "reduction_mass", n, t.reduction_mass.to_string());
        if let Some(g) = t.info_gain {
            push("turn", "info_gain", n, g.to_string());
        }
        push("turn", "propagated", n, t.propagated.to_string());
        push("turn", "signed_contribution", n, t.signed_contribution.to_string());
        if let Some(g) = t.gate_value {
            push("turn", "gate_value", n, g.to_string());
        }
        let dir = serde_json::to_value(t.direction)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        push("turn", "direction", n, dir);
    }
    for (k, v) in &report.totals {
        push("total", k, None, v.to_string());
    }
    push("lemma1", "lower", None, report.lemma1.lower.to_string());
    push("lemma1", "upper", None, report.lemma1.upper.to_string());
    push("reward", "expected", None, report.reward.to_string());
    rows
}
