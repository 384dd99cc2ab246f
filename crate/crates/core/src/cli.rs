//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::glr::{bench_streams, DetectorConfig, StreamBench};
use crate::harness::config::{SweepSection, KEYS};
use crate::harness::{env_cell, run_experiment, sweep_cells, write_outputs, ExperimentConfig};
use crate::master::RhoForm;
use crate::theory;

#[derive(Debug, Parser)]
#[command(name = "nsbandit", version, about = "Piecewise-stationary bandit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured algorithm on the cell described by `env`.
    #[command(after_long_help = key_help())]
    Run(RunArgs),
    /// Run every configured algorithm over the `sweep` grid.
    #[command(after_long_help = key_help())]
    Sweep(SweepArgs),
    /// Print the closed-form feasibility and bound checks as JSON.
    Theory(TheoryArgs),
    /// Monte-Carlo false-alarm and detection-delay checks of the GLR detector.
    DetectBench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration file; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Worker threads or "auto".
    #[arg(long, env = "NSBANDIT_THREADS")]
    pub threads: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated algorithm names.
    #[arg(long)]
    pub algo: Option<String>,
    /// Dotted configuration overrides such as env.horizon=5000.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Built-in grid replacing the `sweep` section.
    #[arg(long, value_parser = ["paper-grid"])]
    pub preset: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Horizon T.
    #[arg(long = "T", default_value_t = 100_000.0)]
    pub horizon: f64,
    /// Confidence level δ; defaults to 1/T.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Rate function: "inv_sqrt" or "mab".
    #[arg(long, default_value = "inv_sqrt")]
    pub rho: String,
    #[arg(long, default_value_t = 5)]
    pub arms: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    pub streams: usize,
    /// Length of the stationary streams.
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    /// δ for the stationary streams.
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn key_help() -> String {
    let mut s = String::from("Configuration keys (default):\n");
    for (key, default, about) in KEYS {
        s.push_str(&format!("  {key:<30} {default:<24} {about}\n"));
    }
    s
}

impl RunArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(t) = self.trials {
            o.push(format!("run.trials={t}"));
        }
        if let Some(t) = &self.threads {
            o.push(format!("run.threads={t}"));
        }
        if let Some(s) = self.seed {
            o.push(format!("env.seed={s}"));
        }
        if let Some(d) = &self.out {
            o.push(format!("run.output_dir={}", Value::String(d.display().to_string())));
        }
        if let Some(a) = &self.algo {
            o.push(format!("algos={a}"));
        }
        o
    }

    fn load(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &self.overrides()),
            None => ExperimentConfig::from_json("{}", &self.overrides()),
        }
    }
}

fn run(args: &RunArgs, sweep: Option<&SweepArgs>) -> Result<()> {
    let mut cfg = args.load()?;
    let cells = match sweep {
        None => vec![env_cell(&cfg)],
        Some(s) => {
            if s.preset.is_some() {
                cfg.sweep = SweepSection::paper_grid();
            }
            sweep_cells(&cfg)
        }
    };
    let results = run_experiment(&cfg, &cells)?;
    write_outputs(&results, &cfg, &cfg.run.output_dir)?;
    println!("{}", cfg.run.output_dir.join("summary.csv").display());
    Ok(())
}

fn theory_json(args: &TheoryArgs) -> Result<Value> {
    let t = args.horizon;
    if !(t >= 2.0 && t.is_finite()) {
        return Err(Error::config("T", format!("must be at least 2, got {t}")));
    }
    let delta = args.delta.unwrap_or(1.0 / t);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let rho: RhoForm = serde_json::from_value(Value::String(args.rho.clone()))
        .map_err(|_| Error::config("rho", format!("expected \"inv_sqrt\" or \"mab\", got \"{}\"", args.rho)))?;
    Ok(serde_json::to_value(theory::report(t, delta, rho, args.arms)).expect("report serialises"))
}

#[derive(Serialize)]
struct BenchReport {
    stationary: StreamBench,
    false_alarm_rate: f64,
    jump: StreamBench,
    quick_detection_rate: f64,
}

fn detect_bench(args: &BenchArgs) -> Result<Value> {
    if args.streams == 0 {
        return Err(Error::config("streams", "must be positive"));
    }
    let stationary = DetectorConfig::new(args.delta, 1).map_err(|e| Error::config("delta", e.to_string()))?;
    let stationary = bench_streams(stationary, 0.5, 0.5, args.length, 0, args.streams, args.seed);
    let jump = DetectorConfig::new(0.01, 1)?;
    let jump = bench_streams(jump, 0.2, 0.8, 500, 100, args.streams, args.seed ^ 1);
    let n = args.streams as f64;
    let report = BenchReport {
        false_alarm_rate: stationary.false_alarms as f64 / n,
        quick_detection_rate: jump.detected as f64 / n,
        stationary,
        jump,
    };
    Ok(serde_json::to_value(report).expect("report serialises"))
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => run(args, None),
        Command::Sweep(args) => run(&args.run, Some(args)),
        Command::Theory(args) => {
            println!("{}", serde_json::to_string_pretty(&theory_json(args)?).unwrap());
            Ok(())
        }
        Command::DetectBench(args) => {
            println!("{}", serde_json::to_string_pretty(&detect_bench(args)?).unwrap());
            Ok(())
        }
    }
}

/// Parse arguments and run. Exit codes: 0 success, 1 configuration or usage
/// error, 2 failure while running.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_valid() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_every_key() {
        let help = key_help();
        for (key, default, _) in KEYS {
            assert!(help.contains(key) && help.contains(default));
        }
    }

    #[test]
    fn theory_example() {
        let args = TheoryArgs {
            horizon: 1e5,
            delta: Some(1e-5),
            rho: "inv_sqrt".into(),
            arms: 5,
        };
        let v = theory_json(&args).unwrap();
        let t1 = v["feasibility"]["test1_min_threshold"].as_f64().unwrap();
        assert!((t1 - 69.2).abs() < 0.1);
        assert_eq!(v["feasibility"]["test1_feasible"], false);
        assert_eq!(v["min_feasible_horizon"], 1_246_257_461u64);
    }

    #[test]
    fn flags_become_overrides() {
        let args = RunArgs {
            config: None,
            trials: Some(3),
            threads: Some("2".into()),
            seed: Some(9),
            out: Some("x y".into()),
            algo: Some("rr,master".into()),
            overrides: vec!["env.horizon=500".into()],
        };
        let cfg = args.load().unwrap();
        assert_eq!(cfg.run.trials, 3);
        assert_eq!(cfg.env.seed, 9);
        assert_eq!(cfg.env.horizon, 500);
        assert_eq!(cfg.run.output_dir, PathBuf::from("x y"));
        assert_eq!(cfg.algos.len(), 2);
    }
}
