//! Replicate fan-out and result export.
//!
//! Replicates of one scenario run in parallel (each owns its network)
//! and are merged strictly by replicate index, so output files are
//! byte-identical across runs regardless of scheduling.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use twinbft::analysis::{aggregate, enumerate_outcomes, RunMetrics, Summary};
use twinbft::simnet::Network;

use crate::presets::{Preset, Scenario, REFERENCE_TOLERANCES};
use crate::CliError;

/// One scenario's inputs and everything measured about it.
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub metrics: Vec<RunMetrics>,
    pub summary: Summary,
    pub trace: Option<Vec<String>>,
}

/// Runs every replicate of one scenario, optionally tracing replicate 0.
pub fn run_scenario(scenario: &Scenario, trace: bool) -> Result<ScenarioOutcome, CliError> {
    let cfg = &scenario.cfg;
    cfg.validate()?;
    let mut metrics: Vec<RunMetrics> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut net = Network::for_replicate(cfg, r).expect("validated config");
            net.run_to_completion()
        })
        .collect();
    let trace = if trace {
        let mut net = Network::for_replicate(cfg, 0).expect("validated config");
        net.set_trace(true);
        let traced_metrics = net.run_to_completion();
        debug_assert_eq!(traced_metrics, metrics[0]);
        metrics[0] = traced_metrics;
        Some(net.take_trace())
    } else {
        None
    };
    let summary = aggregate(&metrics).expect("at least one replicate");
    Ok(ScenarioOutcome {
        scenario: scenario.clone(),
        metrics,
        summary,
        trace,
    })
}

/// Runs a scenario batch and writes `results.csv`, `results.json`, and
/// `plotdata/*.dat` (plus optional traces) under `out_dir`. Prints one
/// summary line per scenario.
pub fn execute(
    scenarios: &[Scenario],
    preset: Option<Preset>,
    out_dir: &Path,
    trace: bool,
) -> Result<Vec<ScenarioOutcome>, CliError> {
    let plot_dir = out_dir.join("plotdata");
    fs::create_dir_all(&plot_dir).map_err(|source| CliError::Io {
        path: plot_dir.clone(),
        source,
    })?;

    let mut outcomes = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let outcome = run_scenario(scenario, trace)?;
        println!(
            "{}: N={} t={} strategy={} replicates={} mean_detection_fraction={:.6} \
             mean_pre_reset_fraction={:.6} messages={}",
            outcome.scenario.id,
            outcome.scenario.cfg.parents,
            outcome.scenario.cfg.byzantine,
            outcome.scenario.cfg.strategy,
            outcome.summary.replicates,
            outcome.summary.mean_detection_fraction,
            outcome.summary.mean_pre_reset_fraction,
            outcome.summary.total_messages,
        );
        outcomes.push(outcome);
    }

    write_file(&out_dir.join("results.csv"), &render_csv(&outcomes))?;
    write_file(&out_dir.join("results.json"), &render_json(&outcomes))?;
    for outcome in &outcomes {
        write_file(
            &plot_dir.join(format!("{}.dat", outcome.scenario.id)),
            &render_scenario_dat(outcome),
        )?;
        if let Some(trace_lines) = &outcome.trace {
            let mut text = String::new();
            for line in trace_lines {
                text.push_str(line);
                text.push('\n');
            }
            write_file(
                &out_dir.join(format!("trace-{}.log", outcome.scenario.id)),
                &text,
            )?;
        }
    }
    if let Some(preset) = preset {
        for (name, text) in render_preset_rollups(preset, &outcomes) {
            write_file(&plot_dir.join(name), &text)?;
        }
    }
    Ok(outcomes)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub const CSV_HEADER: &str = "scenario_id,N,t,strategy,k,seed,replicate,iteration,\
messages_sent,detections_cum,detection_fraction,commits";

/// One row per (scenario, replicate, iteration), fixed columns.
pub fn render_csv(outcomes: &[ScenarioOutcome]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for outcome in outcomes {
        let cfg = &outcome.scenario.cfg;
        for (replicate, metrics) in outcome.metrics.iter().enumerate() {
            let mut detections_cum = 0u64;
            for report in &metrics.reports {
                detections_cum += report.detections.len() as u64;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{:.6},{}",
                    outcome.scenario.id,
                    cfg.parents,
                    cfg.byzantine,
                    cfg.strategy,
                    cfg.alphabet,
                    cfg.seed,
                    replicate,
                    report.iteration,
                    report.messages_sent,
                    detections_cum,
                    report.detection_fraction,
                    report.commits.len(),
                );
            }
        }
    }
    out
}

#[derive(Serialize)]
struct JsonConfig {
    parents: u32,
    byzantine: u32,
    strategy: String,
    iterations: u64,
    reset_interval: u64,
    alphabet: u32,
    seed: u64,
    replicates: u32,
    delay_max: u64,
}

#[derive(Serialize)]
struct JsonSummary {
    mean_detection_fraction: f64,
    min_detection_fraction: f64,
    max_detection_fraction: f64,
    mean_pre_reset_fraction: f64,
    total_messages: u64,
    total_deliveries: u64,
    mean_messages_per_iteration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    latency_p50: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    latency_p95: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    latency_max: Option<u64>,
    never_detected: u64,
}

#[derive(Serialize)]
struct JsonReplicate {
    replicate: u32,
    iterations_run: usize,
    final_detection_fraction: f64,
    total_messages: u64,
    committed: usize,
}

#[derive(Serialize)]
struct JsonScenario {
    id: String,
    config: JsonConfig,
    summary: JsonSummary,
    replicates: Vec<JsonReplicate>,
}

#[derive(Serialize)]
struct JsonRoot {
    scenarios: Vec<JsonScenario>,
}

pub fn render_json(outcomes: &[ScenarioOutcome]) -> String {
    let root = JsonRoot {
        scenarios: outcomes
            .iter()
            .map(|o| {
                let cfg = &o.scenario.cfg;
                JsonScenario {
                    id: o.scenario.id.clone(),
                    config: JsonConfig {
                        parents: cfg.parents,
                        byzantine: cfg.byzantine,
                        strategy: cfg.strategy.to_string(),
                        iterations: cfg.iterations,
                        reset_interval: cfg.reset_interval,
                        alphabet: cfg.alphabet,
                        seed: cfg.seed,
                        replicates: cfg.replicates,
                        delay_max: cfg.delay_max,
                    },
                    summary: JsonSummary {
                        mean_detection_fraction: o.summary.mean_detection_fraction,
                        min_detection_fraction: o.summary.min_detection_fraction,
                        max_detection_fraction: o.summary.max_detection_fraction,
                        mean_pre_reset_fraction: o.summary.mean_pre_reset_fraction,
                        total_messages: o.summary.total_messages,
                        total_deliveries: o.summary.total_deliveries,
                        mean_messages_per_iteration: o.summary.mean_messages_per_iteration,
                        latency_p50: o.summary.latency_p50,
                        latency_p95: o.summary.latency_p95,
                        latency_max: o.summary.latency_max,
                        never_detected: o.summary.never_detected,
                    },
                    replicates: o
                        .metrics
                        .iter()
                        .enumerate()
                        .map(|(r, m)| JsonReplicate {
                            replicate: r as u32,
                            iterations_run: m.reports.len(),
                            final_detection_fraction: m.final_detection_fraction,
                            total_messages: m.total_messages,
                            committed: m.committed.len(),
                        })
                        .collect(),
                }
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&root).expect("serializable");
    text.push('\n');
    text
}

/// Per-iteration series for one scenario: broadcast counts and the
/// detection fraction, averaged over the replicates still running at
/// that iteration.
fn render_scenario_dat(outcome: &ScenarioOutcome) -> String {
    let mut out = String::from("# iteration mean_messages_sent mean_detection_fraction\n");
    let longest = outcome
        .metrics
        .iter()
        .map(|m| m.reports.len())
        .max()
        .unwrap_or(0);
    for i in 0..longest {
        let rows: Vec<_> = outcome
            .metrics
            .iter()
            .filter_map(|m| m.reports.get(i))
            .collect();
        let n = rows.len() as f64;
        let mean_msgs = rows.iter().map(|r| r.messages_sent as f64).sum::<f64>() / n;
        let mean_frac = rows.iter().map(|r| r.detection_fraction).sum::<f64>() / n;
        let _ = writeln!(out, "{} {:.3} {:.6}", i + 1, mean_msgs, mean_frac);
    }
    out
}

fn render_preset_rollups(preset: Preset, outcomes: &[ScenarioOutcome]) -> Vec<(String, String)> {
    match preset {
        Preset::Fig5 => {
            let mut text =
                String::from("# t mean_pre_reset_fraction min_fraction max_fraction\n");
            for o in outcomes {
                let _ = writeln!(
                    text,
                    "{} {:.6} {:.6} {:.6}",
                    o.scenario.cfg.byzantine,
                    o.summary.mean_pre_reset_fraction,
                    o.summary.min_detection_fraction,
                    o.summary.max_detection_fraction,
                );
            }
            vec![("fig5.dat".into(), text)]
        }
        Preset::Fig6 => {
            let mut text = String::from("# byzantine_ratio_percent N t mean_pre_reset_fraction\n");
            for o in outcomes {
                let cfg = &o.scenario.cfg;
                let _ = writeln!(
                    text,
                    "{} {} {} {:.6}",
                    100 * cfg.byzantine / cfg.parents,
                    cfg.parents,
                    cfg.byzantine,
                    o.summary.mean_pre_reset_fraction,
                );
            }
            vec![("fig6.dat".into(), text)]
        }
        Preset::Fig7 => {
            let mut text = String::from("# protocol tolerated_or_detected_percent\n");
            for (name, pct) in REFERENCE_TOLERANCES {
                let _ = writeln!(text, "{name} {pct}");
            }
            for o in outcomes {
                let _ = writeln!(
                    text,
                    "twinbft-measured {:.2}",
                    o.summary.mean_pre_reset_fraction * 100.0
                );
            }
            vec![("fig7.dat".into(), text)]
        }
        Preset::Fig8 => {
            // Two message-count series on a shared iteration axis.
            let mut text = String::from("# iteration");
            for o in outcomes {
                let _ = write!(text, " messages[{}]", o.scenario.id);
            }
            text.push('\n');
            let longest = outcomes
                .iter()
                .flat_map(|o| o.metrics.iter().map(|m| m.reports.len()))
                .max()
                .unwrap_or(0);
            for i in 0..longest {
                let _ = write!(text, "{}", i + 1);
                for o in outcomes {
                    let rows: Vec<_> = o
                        .metrics
                        .iter()
                        .filter_map(|m| m.reports.get(i))
                        .collect();
                    if rows.is_empty() {
                        let _ = write!(text, " -");
                    } else {
                        let mean =
                            rows.iter().map(|r| r.messages_sent as f64).sum::<f64>()
                                / rows.len() as f64;
                        let _ = write!(text, " {mean:.3}");
                    }
                }
                text.push('\n');
            }
            vec![("fig8.dat".into(), text)]
        }
        Preset::Table2 => {
            let table = enumerate_outcomes(4).expect("4 pairs is within the guard");
            let mut text = String::from(
                "# four honest pair observations per row (e = equal, d = different)\n",
            );
            let _ = writeln!(
                text,
                "# rows={} detecting={}",
                table.rows.len(),
                table.detecting_rows
            );
            for i in 0..table.rows.len() {
                let row = table.render_row(i);
                let detecting = if row.contains('d') { 1 } else { 0 };
                let _ = writeln!(text, "{row} {detecting}");
            }
            let mut files = vec![("table2.dat".into(), text)];
            for o in outcomes {
                let detected = o
                    .metrics
                    .iter()
                    .filter(|m| m.final_detection_fraction >= 1.0)
                    .count();
                let freq = detected as f64 / o.metrics.len() as f64;
                let text = format!(
                    "# single-broadcast detection frequency over {} runs vs 15/16\n{:.6} 0.937500\n",
                    o.metrics.len(),
                    freq
                );
                files.push((format!("{}-frequency.dat", o.scenario.id), text));
            }
            files
        }
    }
}
