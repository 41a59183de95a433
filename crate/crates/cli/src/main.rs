use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fcs_mpcc::analysis::{MetricSpec, StepSpec};
use fcs_mpcc::config::parse_override;
use fcs_mpcc::runner::{cmd_compare, cmd_run, cmd_sweep, run_suite, RunManifest};

#[derive(Parser)]
#[command(name = "fcsmpcc", about = "Predictive current control simulator for PMSM drives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write one CSV trace per run plus summary.json.
    Run(RunArgs),
    /// Compare saved traces (the first is the baseline), or run a suite and
    /// emit its tables.
    Compare(CompareArgs),
    /// Run each scenario once per value of one config key.
    Sweep(SweepArgs),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or `bundled:NAME` for a built-in one. Repeatable.
    #[arg(long = "config", value_name = "PATH")]
    configs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long = "out", env = "FCSMPCC_OUT", default_value = "out")]
    out: PathBuf,
    /// Config override `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Reproduction suite to run as well (`paper_tables`).
    #[arg(long)]
    suite: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Trace CSV files.
    traces: Vec<PathBuf>,
    #[arg(long = "out", env = "FCSMPCC_OUT", default_value = "out")]
    out: PathBuf,
    /// Run this suite and write its tables instead of reading traces.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// THD window `T0:T1` in seconds.
    #[arg(long, value_name = "T0:T1")]
    thd_window: Option<String>,
    /// Ripple window `T0:T1` in seconds.
    #[arg(long, value_name = "T0:T1")]
    ripple_window: Option<String>,
    /// Load-step window `T_DISTURB:T_END` in seconds.
    #[arg(long, value_name = "T0:T1")]
    step: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Key to vary, e.g. `dc.beta1_per_s`.
    #[arg(long)]
    key: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
}

fn parse_window(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| format!("window `{text}` is not T0:T1"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("window `{text}`: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("window `{text}`: {e}"))?;
    if b <= a {
        return Err(format!("window `{text}` is empty"));
    }
    Ok((a, b))
}

fn manifest(common: Common, suite: Option<String>) -> Result<RunManifest, String> {
    let overrides = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(RunManifest {
        configs: common.configs,
        out_dir: common.out,
        suite,
        overrides,
        jobs: common.jobs,
    })
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Version => {
            println!("fcsmpcc {}", env!("CARGO_PKG_VERSION"));
        }
        Command::Run(args) => {
            let m = manifest(args.common, args.suite)?;
            let summary = cmd_run(&m).map_err(|e| e.to_string())?;
            for r in &summary.runs {
                println!(
                    "{} {}: {} rows -> {}",
                    r.scenario,
                    r.controller,
                    r.rows,
                    m.out_dir.join(&r.trace).display()
                );
            }
            for f in &summary.reports {
                println!("report -> {}", m.out_dir.join(f).display());
            }
        }
        Command::Compare(args) => {
            if let Some(suite) = &args.suite {
                let summary = run_suite(suite, &args.out, &[], args.jobs).map_err(|e| e.to_string())?;
                for f in summary.reports.iter().filter(|f| f.ends_with(".txt")) {
                    let text = std::fs::read_to_string(args.out.join(f)).map_err(|e| e.to_string())?;
                    println!("{text}");
                }
                return Ok(());
            }
            let spec = MetricSpec {
                thd_window: args.thd_window.as_deref().map(parse_window).transpose()?,
                ripple_window: args.ripple_window.as_deref().map(parse_window).transpose()?,
                step: args
                    .step
                    .as_deref()
                    .map(parse_window)
                    .transpose()?
                    .map(|(t0, t1)| StepSpec::new(t0, t1)),
            };
            let report = cmd_compare(&args.traces, &spec, &args.out).map_err(|e| e.to_string())?;
            print!("{}", report.render_text());
        }
        Command::Sweep(args) => {
            let m = manifest(args.common, None)?;
            let summary = cmd_sweep(&m, &args.key, &args.values).map_err(|e| e.to_string())?;
            for p in &summary.points {
                let thd = p.thd_average.map_or("-".into(), |v| format!("{v:.3}%"));
                let dip = p.step.map_or("-".into(), |s| format!("{:.2} rpm", s.e_max_rpm));
                println!(
                    "{} {} {}={}: THD {thd}, e_max {dip}",
                    p.scenario, p.controller, summary.key, p.value
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
