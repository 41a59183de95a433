//! Batch orchestration behind the command-line tool: resolve scenario files,
//! run them (possibly in parallel), write traces and reports.
//!
//! Output files are written by the calling thread after all runs finish, so
//! concurrent scenarios never interleave on disk.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{compare_report, label_metrics, ComparisonReport, MetricSpec, RippleSet, StepReport, StepSpec};
use crate::config::{load_config, parse_config, set_key};
use crate::error::{Error, Result};
use crate::sim::{run_batch, ControllerKind, ScenarioConfig, Trace};

/// Scenario files compiled into the library, addressable as `bundled:NAME`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("steady_state", include_str!("../scenarios/steady_state.cfg")),
    ("disturbance", include_str!("../scenarios/disturbance.cfg")),
    ("current_limit", include_str!("../scenarios/current_limit.cfg")),
];

pub const SUITES: &[&str] = &["paper_tables"];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    let name = name.trim_end_matches(".cfg");
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Loads a scenario from disk or, for `bundled:NAME`, from the library.
pub fn load_scenario(source: &Path, overrides: &[(String, String)]) -> Result<Vec<ScenarioConfig>> {
    let text = source.to_string_lossy();
    if let Some(name) = text.strip_prefix("bundled:") {
        let body = bundled_scenario(name).ok_or_else(|| {
            let known: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("no bundled scenario `{name}` (have {})", known.join(", ")))
        })?;
        return parse_config(body, overrides);
    }
    load_config(source, overrides)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub configs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub suite: Option<String>,
    /// Canonical `section.key` overrides, applied in order.
    pub overrides: Vec<(String, String)>,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
}

impl RunManifest {
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        let mut out = Vec::new();
        for path in &self.configs {
            out.extend(load_scenario(path, &self.overrides)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub controller: ControllerKind,
    pub horizon: usize,
    pub config_hash: String,
    pub trace: String,
    pub rows: usize,
    pub evals_per_period: u32,
    pub final_speed_rpm: f64,
    pub infeasible_periods: usize,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: Vec<RunRecord>,
    /// Report files written next to the traces.
    pub reports: Vec<String>,
}

fn worker_count(jobs: usize) -> usize {
    if jobs > 0 {
        jobs
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

/// Runs scenarios and returns traces in input order; the first failure
/// aborts with the scenario named.
pub fn run_all(configs: &[ScenarioConfig], jobs: usize) -> Result<Vec<Trace>> {
    run_batch(configs, worker_count(jobs))
        .into_iter()
        .zip(configs)
        .map(|(res, cfg)| res.map_err(|e| Error::Config(format!("scenario `{}` ({}): {e}", cfg.name, cfg.controller))))
        .collect()
}

/// Writes traces as `<name>_<controller>.csv`, de-duplicating names.
fn write_traces(out_dir: &Path, configs: &[ScenarioConfig], traces: &[Trace], summary: &mut RunSummary) -> Result<()> {
    let mut used: HashMap<String, usize> = HashMap::new();
    for (cfg, trace) in configs.iter().zip(traces) {
        let stem = format!("{}_{}", cfg.name, cfg.controller.slug());
        let n = used.entry(stem.clone()).or_insert(0);
        *n += 1;
        let file = if *n == 1 {
            format!("{stem}.csv")
        } else {
            format!("{stem}_{n}.csv")
        };
        write_file(&out_dir.join(&file), trace.to_csv_string().as_bytes())?;
        summary.runs.push(RunRecord {
            scenario: cfg.name.clone(),
            controller: cfg.controller,
            horizon: cfg.horizon,
            config_hash: trace.meta.config_hash.clone(),
            trace: file,
            rows: trace.len(),
            evals_per_period: cfg.evals_per_period(),
            final_speed_rpm: trace.rows.last().map_or(0.0, |r| r.omega_rpm),
            infeasible_periods: trace.rows.iter().filter(|r| !r.feasible).count(),
            config: cfg.clone(),
        });
    }
    Ok(())
}

/// First load change after t = 0 and the window up to the next change.
pub fn load_step_spec(cfg: &ScenarioConfig) -> Option<StepSpec> {
    let points = cfg.load_nm.points();
    let mut previous = cfg.load_nm.value_at(0.0);
    for (k, &(t, v)) in points.iter().enumerate() {
        if t > 0.0 && v != previous {
            let end = points.get(k + 1).map_or(cfg.duration, |p| p.0);
            return Some(StepSpec::new(t, end));
        }
        previous = v;
    }
    None
}

fn write_report(
    out_dir: &Path,
    stem: &str,
    report: &ComparisonReport,
    text: &str,
    summary: &mut RunSummary,
) -> Result<()> {
    let json = format!("{stem}.json");
    let txt = format!("{stem}.txt");
    write_file(&out_dir.join(&json), report.to_json()?.as_bytes())?;
    write_file(&out_dir.join(&txt), text.as_bytes())?;
    summary.reports.push(json);
    summary.reports.push(txt);
    Ok(())
}

fn labelled(configs: &[ScenarioConfig], traces: &[Trace]) -> Vec<(String, Trace)> {
    configs
        .iter()
        .zip(traces)
        .map(|(c, t)| (c.controller.label().to_string(), t.clone()))
        .collect()
}

/// Runs a named reproduction suite into `out_dir`.
pub fn run_suite(name: &str, out_dir: &Path, overrides: &[(String, String)], jobs: usize) -> Result<RunSummary> {
    if name != "paper_tables" {
        return Err(Error::Config(format!(
            "unknown suite `{name}` (have {})",
            SUITES.join(", ")
        )));
    }
    create_dir(out_dir)?;
    let mut steady_over = vec![(
        "general.controller".to_string(),
        "PI+MPCC, PI+IMMPCC, DC+IMMPCC".to_string(),
    )];
    steady_over.extend_from_slice(overrides);
    let steady = parse_config(BUNDLED[0].1, &steady_over)?;
    let disturbance = parse_config(BUNDLED[1].1, overrides)?;

    let all: Vec<ScenarioConfig> = steady.iter().chain(&disturbance).cloned().collect();
    let traces = run_all(&all, jobs)?;
    let (steady_traces, dist_traces) = traces.split_at(steady.len());

    let mut summary = RunSummary::default();
    write_traces(out_dir, &all, &traces, &mut summary)?;

    let table2 = compare_report(&labelled(&steady, steady_traces), &MetricSpec::default())?;
    let text2 = format!("{}\n{}", table2.thd_table(), table2.ripple_table());
    write_report(out_dir, "table2", &table2, &text2, &mut summary)?;

    let spec3 = MetricSpec {
        step: load_step_spec(&disturbance[0]),
        ..MetricSpec::default()
    };
    let table3 = compare_report(&labelled(&disturbance, dist_traces), &spec3)?;
    let text3 = table3.step_table().unwrap_or_default();
    write_report(out_dir, "table3", &table3, &text3, &mut summary)?;

    write_file(
        &out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(summary)
}

/// Runs every scenario of the manifest (and its suite, if any), writing one
/// CSV per run plus `summary.json`.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunSummary> {
    let configs = manifest.scenarios()?;
    if configs.is_empty() && manifest.suite.is_none() {
        return Err(Error::Config("nothing to run: give --config or --suite".into()));
    }
    create_dir(&manifest.out_dir)?;
    let mut summary = RunSummary::default();
    if !configs.is_empty() {
        let traces = run_all(&configs, manifest.jobs)?;
        write_traces(&manifest.out_dir, &configs, &traces, &mut summary)?;
    }
    if let Some(suite) = &manifest.suite {
        let s = run_suite(suite, &manifest.out_dir, &manifest.overrides, manifest.jobs)?;
        summary.runs.extend(s.runs);
        summary.reports.extend(s.reports);
    }
    write_file(
        &manifest.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(summary)
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let file = fs::File::open(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    Trace::read_csv(std::io::BufReader::new(file)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Compares saved traces; the first is the baseline. Writes
/// `compare.json` and `compare.txt` into `out_dir`.
pub fn cmd_compare(paths: &[PathBuf], spec: &MetricSpec, out_dir: &Path) -> Result<ComparisonReport> {
    if paths.len() < 2 {
        return Err(Error::Config("compare needs at least two traces".into()));
    }
    let traces = paths.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = traces.iter().map(|t| t.meta.controller.label().to_string()).collect();
    let unique = labels.iter().collect::<std::collections::HashSet<_>>().len() == labels.len();
    let labelled: Vec<(String, Trace)> = traces
        .into_iter()
        .zip(paths)
        .zip(labels)
        .map(|((t, p), label)| {
            let name = if unique {
                label
            } else {
                p.file_stem().map_or(label, |s| s.to_string_lossy().into_owned())
            };
            (name, t)
        })
        .collect();
    let report = compare_report(&labelled, spec)?;
    create_dir(out_dir)?;
    write_file(&out_dir.join("compare.json"), report.to_json()?.as_bytes())?;
    write_file(&out_dir.join("compare.txt"), report.render_text().as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scenario: String,
    pub controller: ControllerKind,
    pub value: String,
    pub trace: String,
    pub thd_average: Option<f64>,
    pub ripple: Option<RippleSet>,
    pub step: Option<StepReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub key: String,
    pub points: Vec<SweepPoint>,
}

/// Runs every manifest scenario once per value of `key`, writing the traces
/// and `sweep.json`.
pub fn cmd_sweep(manifest: &RunManifest, key: &str, values: &[String]) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let key = crate::config::canonical_key(key)?;
    let base = manifest.scenarios()?;
    if base.is_empty() {
        return Err(Error::Config("sweep needs --config".into()));
    }
    let mut grid = Vec::new();
    for cfg in &base {
        for value in values {
            let mut c = cfg.clone();
            set_key(&mut c, &key, value)?;
            c.validate().map_err(|e| Error::Config(format!("{key}={value}: {e}")))?;
            grid.push((c, value.clone()));
        }
    }
    let configs: Vec<ScenarioConfig> = grid.iter().map(|(c, _)| c.clone()).collect();
    let traces = run_all(&configs, manifest.jobs)?;
    create_dir(&manifest.out_dir)?;
    let tag = key.replace('.', "-");
    let mut points = Vec::new();
    for ((cfg, value), trace) in grid.iter().zip(&traces) {
        let file = format!("{}_{}_{tag}={value}.csv", cfg.name, cfg.controller.slug()).replace([' ', '/', ','], "_");
        write_file(&manifest.out_dir.join(&file), trace.to_csv_string().as_bytes())?;
        let spec = MetricSpec {
            step: load_step_spec(cfg),
            ..MetricSpec::default()
        };
        let metrics = label_metrics(cfg.controller.label(), trace, &spec).ok();
        let step = spec
            .step
            .and_then(|s| crate::analysis::trace_step_report(trace, &s).ok());
        points.push(SweepPoint {
            scenario: cfg.name.clone(),
            controller: cfg.controller,
            value: value.clone(),
            trace: file,
            thd_average: metrics.as_ref().map(|m| m.thd.average),
            ripple: metrics.as_ref().map(|m| m.ripple),
            step,
        });
    }
    let summary = SweepSummary { key, points };
    write_file(
        &manifest.out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(summary)
}
