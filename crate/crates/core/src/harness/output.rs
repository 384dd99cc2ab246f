//! CSV outputs. Numbers are printed like C's `%g`: six significant digits,
//! trailing zeros dropped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::algo::Cell;
use super::config::ExperimentConfig;
use super::run::AggregateResult;

pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// File-name fragment identifying a cell, e.g. `uniform_xi0.5_T10000`.
pub fn cell_name(cell: &Cell) -> String {
    let model = match cell.cp_model_name() {
        "geometric" => format!("xi{}", fmt_g(cell.param())),
        _ => format!("nc{}", fmt_g(cell.param())),
    };
    format!("{}_{}_T{}", cell.problem_name(), model, cell.horizon)
}

pub fn trace_file_name(result: &AggregateResult) -> String {
    let algo = result.algo.to_string().replace(':', "-");
    format!("trace_{}_{}.csv", algo, cell_name(&result.cell))
}

fn cell_columns(cell: &Cell) -> String {
    format!(
        "{},{},{},{}",
        cell.problem_name(),
        cell.cp_model_name(),
        cell.horizon,
        fmt_g(cell.param())
    )
}

pub fn summary_csv(results: &[AggregateResult]) -> String {
    let mut out = String::from(
        "algo,problem,cp_model,horizon,param,trials,final_regret_mean,final_regret_std,\
         detections_mean,restarts_mean,wall_mean,wall_std\n",
    );
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.algo,
            cell_columns(&r.cell),
            r.trials,
            fmt_g(r.final_regret.mean()),
            fmt_g(r.final_regret.std()),
            fmt_g(r.declared_changes.mean()),
            fmt_g(r.restarts.mean()),
            fmt_g(r.wall_seconds.mean()),
            fmt_g(r.wall_seconds.std()),
        )
        .unwrap();
    }
    out
}

pub fn trace_csv(result: &AggregateResult) -> String {
    let mut out = String::from("t,regret_mean,regret_std\n");
    for &(t, mean, std) in &result.trace {
        writeln!(out, "{t},{},{}", fmt_g(mean), fmt_g(std)).unwrap();
    }
    out
}

/// Final regret against the non-stationarity parameter, grouped by
/// algorithm, problem, change model and horizon.
pub fn robustness_csv(results: &[AggregateResult]) -> String {
    let mut rows: Vec<&AggregateResult> = results.iter().collect();
    rows.sort_by(|a, b| {
        (a.algo.to_string(), a.cell.problem_name(), a.cell.cp_model_name(), a.cell.horizon)
            .cmp(&(b.algo.to_string(), b.cell.problem_name(), b.cell.cp_model_name(), b.cell.horizon))
            .then(a.cell.param().total_cmp(&b.cell.param()))
    });
    let mut out = String::from("algo,problem,cp_model,horizon,param,final_regret_mean,final_regret_std\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.algo,
            cell_columns(&r.cell),
            fmt_g(r.final_regret.mean()),
            fmt_g(r.final_regret.std())
        )
        .unwrap();
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write `summary.csv`, `robustness.csv`, one trace file per result and a
/// `config.json` echo of the resolved configuration.
pub fn write_outputs(results: &[AggregateResult], cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::config("algos", "nothing to write"));
    }
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(dir, "summary.csv", &summary_csv(results))?;
    write(dir, "robustness.csv", &robustness_csv(results))?;
    for r in results {
        write(dir, &trace_file_name(r), &trace_csv(r))?;
    }
    write(dir, "config.json", &(cfg.to_json() + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(600.0), "600");
        assert_eq!(fmt_g(0.5), "0.5");
        assert_eq!(fmt_g(123456.7), "123457");
        assert_eq!(fmt_g(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g(0.000123456789), "0.000123457");
        assert_eq!(fmt_g(0.0000123456), "1.23456e-05");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(999999.6), "1e+06");
        assert_eq!(fmt_g(1.23456789), "1.23457");
        assert_eq!(fmt_g(100.0 / 3.0), "33.3333");
    }
}
