use serde::Serialize;
use serde_json::json;

use agentuq::eval::{bound_suite, desideratum_check, BoundSuiteOptions, BoundSuiteReport, DesideratumResult, EvalMode};
use agentuq::measures::{entropy, MeasureSpec};
use agentuq::model::enumeration_cap;
use agentuq::scenario::{builtin, load_scenario, Scenario};
use agentuq::uq::{expected_turn_terms, multistep, AggregatorSpec, Analysis, LeafSet};
use agentuq::Dist;

use crate::output::{self, csv_text, emit, json, report_rows, TrajectoryRecord, TRAJECTORY_HEADER};
use crate::{Cli, Command, Failure, Format, RunMode, SweepParameter, Units};

/// Exit code of a failed check suite.
const CHECK_FAILED: u8 = 4;

pub fn run(cli: &Cli) -> Result<u8, Failure> {
    let sampling = sampling(cli)?;
    match &cli.command {
        Command::Validate => validate(cli),
        Command::Sample => sample(cli),
        Command::Enumerate => enumerate(cli),
        Command::Report => report(cli, sampling),
        Command::Check { systems, corrupt_gate } => check(cli, sampling, *systems, *corrupt_gate),
        Command::Sweep { parameter, grid, dist } => sweep(cli, *parameter, grid, dist.as_deref()),
    }
}

/// Seed and sample count of a sampled run; `None` in exact mode.
fn sampling(cli: &Cli) -> Result<Option<(usize, u64)>, Failure> {
    if cli.mode == RunMode::Exact {
        return Ok(None);
    }
    match (cli.samples, cli.seed) {
        (Some(0), _) => Err(Failure::config("--samples must be positive")),
        (Some(n), Some(seed)) => Ok(Some((n, seed))),
        _ => Err(Failure::config("sampled mode needs both --samples and --seed")),
    }
}

fn load(cli: &Cli, fallback: Option<&str>) -> Result<Scenario, Failure> {
    let scenario = match (&cli.scenario, &cli.builtin, fallback) {
        (Some(path), _, _) => load_scenario(path)?,
        (None, Some(name), _) => builtin(name)?,
        (None, None, Some(name)) => builtin(name)?,
        (None, None, None) => return Err(Failure::config("pass --scenario <file> or --builtin <name>")),
    };
    match cli.horizon {
        Some(h) => Ok(scenario.with_horizon(h)?),
        None => Ok(scenario),
    }
}

fn aggregators(cli: &Cli) -> Result<Vec<AggregatorSpec>, Failure> {
    match &cli.aggregators {
        None => Ok(AggregatorSpec::defaults()),
        Some(list) if list.is_empty() => Err(Failure::config("--aggregators is empty")),
        Some(list) => list
            .iter()
            .map(|s| s.trim().parse::<AggregatorSpec>().map_err(Failure::from))
            .collect(),
    }
}

fn validate(cli: &Cli) -> Result<u8, Failure> {
    let s = load(cli, None)?;
    let d = s.system.dims();
    let summary = json!({
        "name": s.system.name(),
        "actions": d.actions,
        "observations": d.observations,
        "tasks": d.tasks,
        "db_states": d.db_states,
        "max_turns": d.max_turns,
        "trajectories": s.system.count_trajectories().to_string(),
    });
    let text = match cli.format {
        Format::Json => json(&summary)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = summary
                .as_object()
                .into_iter()
                .flatten()
                .map(|(k, v)| {
                    vec![
                        k.clone(),
                        v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()),
                    ]
                })
                .collect();
            csv_text(&["key", "value"], &rows)?
        }
    };
    emit(cli, &text)?;
    Ok(0)
}

fn trajectories_out(cli: &Cli, records: &[TrajectoryRecord]) -> Result<u8, Failure> {
    let text = match cli.format {
        Format::Json => json(&records)?,
        Format::Csv => csv_text(
            &TRAJECTORY_HEADER,
            &records.iter().map(TrajectoryRecord::csv_row).collect::<Vec<_>>(),
        )?,
    };
    emit(cli, &text)?;
    Ok(0)
}

fn sample(cli: &Cli) -> Result<u8, Failure> {
    let (n, seed) = match (cli.samples, cli.seed) {
        (Some(n), Some(seed)) if n > 0 => (n, seed),
        _ => return Err(Failure::config("sample needs a positive --samples and a --seed")),
    };
    let s = load(cli, None)?;
    let records: Vec<TrajectoryRecord> = s
        .system
        .sample_trajectories(n, seed)
        .iter()
        .enumerate()
        .map(|(i, t)| TrajectoryRecord::new(&s.system, i, t, None))
        .collect();
    trajectories_out(cli, &records)
}

fn enumerate(cli: &Cli) -> Result<u8, Failure> {
    let s = load(cli, None)?;
    let records: Vec<TrajectoryRecord> = s
        .system
        .enumerate_with_cap(enumeration_cap())?
        .iter()
        .enumerate()
        .map(|(i, (t, p))| TrajectoryRecord::new(&s.system, i, t, Some(*p)))
        .collect();
    trajectories_out(cli, &records)
}

fn mode_name(sampling: Option<(usize, u64)>) -> serde_json::Value {
    match sampling {
        None => json!({ "kind": "exact" }),
        Some((n, seed)) => json!({ "kind": "sampled", "n": n, "seed": seed }),
    }
}

fn report(cli: &Cli, sampling: Option<(usize, u64)>) -> Result<u8, Failure> {
    let measure: MeasureSpec = cli.measure.parse()?;
    let s = load(cli, None)?;
    let specs = aggregators(cli)?;
    if measure != MeasureSpec::Shannon {
        return report_generic(cli, &s, &measure, sampling, specs);
    }
    let leaves = match sampling {
        None => LeafSet::exact_with_cap(&s.system, enumeration_cap())?,
        Some((n, seed)) => LeafSet::empirical(&s.system.sample_trajectories(n, seed))?,
    };
    let analysis = Analysis::new(&s.system, leaves);
    let mut report = analysis.expected_report(&s.classifier, &specs)?;
    output::rescale_report(&mut report, cli.units.factor());
    let text = match cli.format {
        Format::Json => json(&json!({
            "scenario": s.system.name(),
            "measure": measure.name(),
            "units": cli.units.name(),
            "mode": mode_name(sampling),
            "report": report,
        }))?,
        Format::Csv => csv_text(&["kind", "name", "turn", "value"], &report_rows(&report))?,
    };
    emit(cli, &text)?;
    Ok(0)
}

/// Expected per-turn values of a non-Shannon measure, aggregated over turns.
fn report_generic(
    cli: &Cli,
    s: &Scenario,
    measure: &MeasureSpec,
    sampling: Option<(usize, u64)>,
    specs: Vec<AggregatorSpec>,
) -> Result<u8, Failure> {
    if sampling.is_some() {
        return Err(Failure::config(format!(
            "measure {} is only available in exact mode",
            measure.name()
        )));
    }
    let logarithmic = matches!(measure, MeasureSpec::Renyi { .. });
    if cli.units == Units::Bits && !logarithmic {
        return Err(Failure::config(format!(
            "measure {} has no unit to convert",
            measure.name()
        )));
    }
    let specs: Vec<AggregatorSpec> = if cli.aggregators.is_none() {
        specs
            .into_iter()
            .filter(|a| !matches!(a, AggregatorSpec::ExactTotal | AggregatorSpec::Gated))
            .collect()
    } else if let Some(a) = specs
        .iter()
        .find(|a| matches!(a, AggregatorSpec::ExactTotal | AggregatorSpec::Gated))
    {
        return Err(Failure::config(format!(
            "aggregator {} needs the Shannon chain rule; use sum, max or a weighted average",
            a.key()
        )));
    } else {
        specs
    };
    let factor = cli.units.factor();
    let terms: Vec<f64> = expected_turn_terms(&s.system, measure)?
        .into_iter()
        .map(|t| t * factor)
        .collect();
    let mut totals = std::collections::BTreeMap::new();
    for spec in &specs {
        totals.insert(spec.key(), multistep(&terms, spec)?);
    }
    let text = match cli.format {
        Format::Json => json(&json!({
            "scenario": s.system.name(),
            "measure": measure.name(),
            "units": if logarithmic { cli.units.name() } else { "none" },
            "mode": mode_name(None),
            "turn_terms": terms,
            "totals": totals,
        }))?,
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = terms
                .iter()
                .enumerate()
                .map(|(i, t)| vec!["turn".into(), "term".into(), (i + 1).to_string(), t.to_string()])
                .collect();
            rows.extend(
                totals
                    .iter()
                    .map(|(k, v)| vec!["total".into(), k.clone(), String::new(), v.to_string()]),
            );
            csv_text(&["kind", "name", "turn", "value"], &rows)?
        }
    };
    emit(cli, &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct CheckSummary {
    scenario: String,
    passed: bool,
    bounds: BoundSuiteReport,
    desideratum: Vec<DesideratumResult>,
}

fn check(cli: &Cli, sampling: Option<(usize, u64)>, systems: usize, corrupt_gate: bool) -> Result<u8, Failure> {
    if systems == 0 {
        return Err(Failure::config("--systems must be positive"));
    }
    let s = load(cli, Some("mini-booking"))?;
    let bounds = bound_suite(systems, cli.seed.unwrap_or(0), BoundSuiteOptions { corrupt_gate })?;
    let mut modes = vec![EvalMode::Exact];
    if let Some((n, seed)) = sampling {
        modes.push(EvalMode::Sampled { n, seed });
    }
    let mut desideratum = Vec::new();
    for mode in modes {
        desideratum.push(desideratum_check(
            &s.system,
            &s.classifier,
            &AggregatorSpec::Gated,
            mode,
        )?);
    }
    let passed = bounds.passed() && desideratum.iter().all(|d| d.ordering_satisfied);
    let summary = CheckSummary {
        scenario: s.system.name().to_string(),
        passed,
        bounds,
        desideratum,
    };
    let text = match cli.format {
        Format::Json => json(&summary)?,
        Format::Csv => csv_text(&["check", "result", "detail"], &check_rows(&summary))?,
    };
    emit(cli, &text)?;
    Ok(if passed { 0 } else { CHECK_FAILED })
}

fn check_rows(c: &CheckSummary) -> Vec<Vec<String>> {
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" }.to_string();
    let b = &c.bounds;
    let mut rows = vec![vec![
        "bounds".to_string(),
        verdict(b.passed()),
        format!(
            "{} systems, {} checks, {} violations, max chain-rule error {:e}",
            b.systems,
            b.checks,
            b.violations.len(),
            b.max_chain_rule_error
        ),
    ]];
    for v in &b.violations {
        rows.push(vec![
            format!("bounds/{}", v.check),
            "FAIL".into(),
            format!("seed {}: {}", v.seed, v.detail),
        ]);
    }
    for d in &c.desideratum {
        let mode = match d.mode {
            EvalMode::Exact => "exact".to_string(),
            EvalMode::Sampled { n, seed } => format!("sampled n={n} seed={seed}"),
        };
        let means: Vec<String> = d
            .levels
            .iter()
            .map(|l| format!("E[U|r={}]={}", l.reward, l.mean_uncertainty))
            .collect();
        rows.push(vec![
            format!("desideratum/{}", d.scorer),
            verdict(d.ordering_satisfied),
            format!("{mode}: {} gap {}", means.join(" "), d.gap),
        ]);
    }
    rows
}

fn sweep(cli: &Cli, parameter: SweepParameter, grid: &[f64], dist: Option<&[f64]>) -> Result<u8, Failure> {
    if grid.is_empty() {
        return Err(Failure::config("--grid is empty"));
    }
    let (name, logarithmic) = match parameter {
        SweepParameter::Alpha => ("alpha", true),
        SweepParameter::Q => ("q", false),
    };
    if cli.units == Units::Bits && !logarithmic {
        return Err(Failure::config("Tsallis values have no unit to convert"));
    }
    let factor = cli.units.factor();
    let measure_at = |v: f64| -> Result<MeasureSpec, Failure> {
        Ok(match parameter {
            SweepParameter::Alpha => MeasureSpec::renyi(v)?,
            SweepParameter::Q => MeasureSpec::tsallis(v)?,
        })
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let header: Vec<&str> = match dist {
        Some(w) => {
            let d = Dist::new(w.to_vec())?;
            let shannon = entropy(&d) * factor;
            for &v in grid {
                let value = measure_at(v)?.apply(&d)?;
                rows.push(vec![v, value * if logarithmic { factor } else { 1.0 }, shannon]);
            }
            vec![name, "measure", "shannon"]
        }
        None => {
            let s = load(cli, None)?;
            let shannon: f64 = expected_turn_terms(&s.system, &MeasureSpec::Shannon)?
                .iter()
                .sum::<f64>()
                * factor;
            for &v in grid {
                let terms = expected_turn_terms(&s.system, &measure_at(v)?)?;
                let scale = if logarithmic { factor } else { 1.0 };
                let sum = multistep(&terms, &AggregatorSpec::SumNoAmbiguity)? * scale;
                let max = multistep(&terms, &AggregatorSpec::MaxStep)? * scale;
                rows.push(vec![v, sum, max, shannon]);
            }
            vec![name, "sum", "max", "shannon_sum"]
        }
    };
    let text = match cli.format {
        Format::Csv => csv_text(
            &header,
            &rows
                .iter()
                .map(|r| r.iter().map(f64::to_string).collect())
                .collect::<Vec<_>>(),
        )?,
        Format::Json => {
            let records: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| {
                    header
                        .iter()
                        .map(|h| h.to_string())
                        .zip(r.iter().map(|v| json!(v)))
                        .collect()
                })
                .collect();
            json(&records)?
        }
    };
    emit(cli, &text)?;
    Ok(0)
}
