//! Experiment configuration: a JSON document with sections `env`, `algos`,
//! `run`, per-algorithm settings and an optional `sweep` grid. Missing keys
//! take their defaults; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::bandit::{IndexPolicy, KlUcbParams};
use crate::env::{ChangeModel, Problem};
use crate::error::{Error, Result};
use crate::master::RhoForm;

/// A numeric setting that may instead be derived from the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    /// "auto": the documented default rule.
    Auto,
    /// "1/T".
    InverseHorizon,
    Value(f64),
}

impl Setting {
    pub fn resolve(self, horizon: u64, auto: impl FnOnce() -> f64) -> f64 {
        match self {
            Setting::Auto => auto(),
            Setting::InverseHorizon => 1.0 / horizon as f64,
            Setting::Value(v) => v,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Auto => f.write_str("auto"),
            Setting::InverseHorizon => f.write_str("1/T"),
            Setting::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Value(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Setting::Value(v)),
            Raw::Text(t) => match t.as_str() {
                "auto" => Ok(Setting::Auto),
                "1/T" => Ok(Setting::InverseHorizon),
                other => other.parse().map(Setting::Value).map_err(|_| {
                    serde::de::Error::custom(format!("expected a number, \"auto\" or \"1/T\", got \"{other}\""))
                }),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpModel {
    Geometric,
    Deterministic,
}

/// Thread count: a positive integer or "auto" (all available cores).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl Threads {
    pub fn count(self) -> usize {
        match self {
            Threads::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Threads::Fixed(n) => n,
        }
    }
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Fixed(n)),
            _ => Err(format!("expected a positive integer or \"auto\", got \"{s}\"")),
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => s.serialize_str("auto"),
            Threads::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(n) => n.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Algorithms the harness can run. `Oracle` and `Fixed` are debugging
/// players: the first always pulls a best arm, the second a single arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgoKind {
    Master,
    Rr,
    RrP,
    QcdUcb,
    QcdKlUcb,
    GlrKlUcb,
    Oracle,
    Fixed(usize),
}

impl AlgoKind {
    pub const PAPER: [AlgoKind; 6] = [
        AlgoKind::Master,
        AlgoKind::Rr,
        AlgoKind::RrP,
        AlgoKind::QcdUcb,
        AlgoKind::QcdKlUcb,
        AlgoKind::GlrKlUcb,
    ];
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgoKind::Master => f.write_str("master"),
            AlgoKind::Rr => f.write_str("rr"),
            AlgoKind::RrP => f.write_str("rr_p"),
            AlgoKind::QcdUcb => f.write_str("qcd_ucb"),
            AlgoKind::QcdKlUcb => f.write_str("qcd_klucb"),
            AlgoKind::GlrKlUcb => f.write_str("glr_klucb"),
            AlgoKind::Oracle => f.write_str("oracle"),
            AlgoKind::Fixed(a) => write!(f, "fixed:{a}"),
        }
    }
}

impl FromStr for AlgoKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "master" => AlgoKind::Master,
            "rr" => AlgoKind::Rr,
            "rr_p" => AlgoKind::RrP,
            "qcd_ucb" => AlgoKind::QcdUcb,
            "qcd_klucb" => AlgoKind::QcdKlUcb,
            "glr_klucb" => AlgoKind::GlrKlUcb,
            "oracle" => AlgoKind::Oracle,
            _ => match s.strip_prefix("fixed:").map(str::parse) {
                Some(Ok(arm)) => AlgoKind::Fixed(arm),
                _ => {
                    return Err(format!(
                        "unknown algorithm \"{s}\" (expected master, rr, rr_p, qcd_ucb, qcd_klucb, glr_klucb, oracle or fixed:<arm>)"
                    ))
                }
            },
        })
    }
}

impl Serialize for AlgoKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AlgoKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseAlg {
    Ucb1,
    Klucb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub arms: usize,
    pub problem: Problem,
    pub cp_model: CpModel,
    pub xi: f64,
    /// Number of deterministic change points; "auto" is ⌈T^(1−ξ)⌉.
    pub n_c: Setting,
    pub horizon: u64,
    /// Master seed of the experiment.
    pub seed: u64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            arms: 5,
            problem: Problem::Uniform,
            cp_model: CpModel::Geometric,
            xi: 0.5,
            n_c: Setting::Auto,
            horizon: 10_000,
            seed: 0,
        }
    }
}

impl EnvSection {
    pub fn change_model(&self) -> ChangeModel {
        match self.cp_model {
            CpModel::Geometric => ChangeModel::Geometric { xi: self.xi },
            CpModel::Deterministic => {
                let auto = || (self.horizon as f64).powf(1.0 - self.xi).ceil();
                ChangeModel::Deterministic {
                    n_c: self.n_c.resolve(self.horizon, auto).round() as u64,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub trials: u64,
    pub output_dir: PathBuf,
    pub threads: Threads,
    /// Time each trial's algorithm loop. Off makes every output file a pure
    /// function of the configuration.
    pub record_wall_time: bool,
    /// Keep every step of the regret trace instead of ≤ 1000 checkpoints.
    pub full_trace: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: 200,
            output_dir: PathBuf::from("results"),
            threads: Threads::Auto,
            record_wall_time: true,
            full_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterSection {
    pub rho: RhoForm,
    pub base_alg: BaseAlg,
    pub fixed_n: bool,
    pub delta: Setting,
    pub debug_threshold_scale: f64,
}

impl Default for MasterSection {
    fn default() -> Self {
        Self {
            rho: RhoForm::MabSqrtALog,
            base_alg: BaseAlg::Klucb,
            fixed_n: true,
            delta: Setting::InverseHorizon,
            debug_threshold_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub delta: Setting,
    pub stride: u64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            delta: Setting::InverseHorizon,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrSection {
    pub eta_r: Setting,
}

impl Default for RrSection {
    fn default() -> Self {
        Self { eta_r: Setting::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrPSection {
    pub p: f64,
}

impl Default for RrPSection {
    fn default() -> Self {
        Self { p: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlrSection {
    pub alpha: Setting,
}

impl Default for GlrSection {
    fn default() -> Self {
        Self { alpha: Setting::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    pub klucb_tolerance: f64,
    pub klucb_c: f64,
}

impl Default for BanditSection {
    fn default() -> Self {
        let p = KlUcbParams::default();
        Self {
            klucb_tolerance: p.tolerance,
            klucb_c: p.exploration_c,
        }
    }
}

impl BanditSection {
    pub fn klucb(&self) -> IndexPolicy {
        IndexPolicy::KlUcb(KlUcbParams {
            tolerance: self.klucb_tolerance,
            exploration_c: self.klucb_c,
        })
    }
}

/// Grid swept by the `sweep` command. Every horizon is combined with every
/// problem and ξ; with `deterministic` set, each ξ also yields a
/// deterministic cell with N_C = ⌈T^(1−ξ)⌉ change points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub horizons: Vec<u64>,
    pub xis: Vec<f64>,
    pub problems: Vec<Problem>,
    pub deterministic: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self::paper_grid()
    }
}

impl SweepSection {
    pub fn paper_grid() -> Self {
        let mut horizons = vec![1000, 2000, 5000];
        horizons.extend((1..=10).map(|k| k * 10_000));
        Self {
            horizons,
            xis: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            problems: vec![Problem::Uniform, Problem::WorstCase],
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub algos: Vec<AlgoKind>,
    pub run: RunSection,
    pub master: MasterSection,
    pub detector: DetectorSection,
    pub rr: RrSection,
    pub rr_p: RrPSection,
    pub glr: GlrSection,
    pub bandit: BanditSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSection::default(),
            algos: AlgoKind::PAPER.to_vec(),
            run: RunSection::default(),
            master: MasterSection::default(),
            detector: DetectorSection::default(),
            rr: RrSection::default(),
            rr_p: RrPSection::default(),
            glr: GlrSection::default(),
            bandit: BanditSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Every configuration key with its default and meaning, in file order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("env.arms", "5", "number of arms"),
    ("env.problem", "\"uniform\"", "mean dynamics: \"uniform\" or \"worst\""),
    ("env.cp_model", "\"geometric\"", "change points: \"geometric\" or \"deterministic\""),
    ("env.xi", "0.5", "change rate exponent, η = T^(-ξ)"),
    ("env.n_c", "\"auto\"", "deterministic change-point count; auto = ceil(T^(1-ξ))"),
    ("env.horizon", "10000", "horizon T"),
    ("env.seed", "0", "master seed"),
    ("algos", "all six", "master, rr, rr_p, qcd_ucb, qcd_klucb, glr_klucb (also oracle, fixed:<arm>)"),
    ("run.trials", "200", "independent trials per cell"),
    ("run.output_dir", "\"results\"", "directory for CSV outputs"),
    ("run.threads", "\"auto\"", "worker threads or \"auto\""),
    ("run.record_wall_time", "true", "measure per-trial wall time (false writes 0)"),
    ("run.full_trace", "false", "write every step of the regret trace"),
    ("master.rho", "\"mab\"", "rate function: \"mab\" or \"inv_sqrt\""),
    ("master.base_alg", "\"klucb\"", "base policy: \"ucb1\" or \"klucb\""),
    ("master.fixed_n", "true", "keep n = floor(log2 T) across restarts"),
    ("master.delta", "\"1/T\"", "confidence level δ"),
    ("master.debug_threshold_scale", "1", "multiplies both test thresholds (debug only)"),
    ("detector.delta", "\"1/T\"", "GLR confidence level δ"),
    ("detector.stride", "1", "evaluate the GLR test every stride-th sample"),
    ("rr.eta_r", "\"auto\"", "restart rate; auto = sqrt(η / ln T)"),
    ("rr_p.p", "0.05", "per-step restart probability"),
    ("glr.alpha", "\"auto\"", "forced exploration rate; auto = sqrt(A ln T / T)"),
    ("bandit.klucb_tolerance", "1e-6", "klUCB bisection tolerance"),
    ("bandit.klucb_c", "0", "klUCB exploration constant c"),
    ("sweep.horizons", "1000,2000,5000,10000..100000", "sweep horizons"),
    ("sweep.xis", "0.3..0.8", "sweep ξ values"),
    ("sweep.problems", "[\"uniform\",\"worst\"]", "sweep problems"),
    ("sweep.deterministic", "true", "add N_C = ceil(T^(1-ξ)) deterministic cells"),
];

/// Set `path` (dot-separated) in a JSON document, creating objects on the
/// way. The value is parsed as JSON when possible and kept as a string
/// otherwise; comma-separated values become arrays for list keys.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "expected key=value"))?;
    let key = key.trim();
    if !KEYS.iter().any(|(k, _, _)| *k == key) {
        return Err(Error::config(key, "unknown configuration key"));
    }
    let value = parse_value(key, raw.trim());
    let mut node = doc;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().unwrap();
        if parts.peek().is_none() {
            map.insert(part.to_owned(), value);
            return Ok(());
        }
        node = map.entry(part.to_owned()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn parse_value(key: &str, raw: &str) -> Value {
    let list = matches!(key, "algos" | "sweep.horizons" | "sweep.xis" | "sweep.problems");
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        if !list || v.is_array() {
            return v;
        }
    }
    if list {
        return Value::Array(raw.split(',').map(|s| parse_value("", s.trim())).collect());
    }
    Value::String(raw.to_owned())
}

impl ExperimentConfig {
    /// Build from a JSON document plus `key=value` overrides.
    pub fn from_value(mut doc: Value, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "config".to_owned() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let doc = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        Self::from_value(doc, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config file: {e}")))?;
        Self::from_json(&text, overrides).map_err(|e| match e {
            Error::Config { key, reason } if key == "config" => Error::config(path.display().to_string(), reason),
            other => other,
        })
    }

    /// Range checks that serde cannot express. Algorithm-specific parameters
    /// are checked again, with the horizon known, when a trial is built.
    pub fn validate(&self) -> Result<()> {
        let env = &self.env;
        if env.arms == 0 {
            return Err(Error::config("env.arms", "must be at least 1"));
        }
        if env.horizon == 0 {
            return Err(Error::config("env.horizon", "must be positive"));
        }
        if !(env.xi > 0.0 && env.xi <= 1.0) {
            return Err(Error::config("env.xi", format!("must lie in (0, 1], got {}", env.xi)));
        }
        if self.algos.is_empty() {
            return Err(Error::config("algos", "at least one algorithm is required"));
        }
        for a in &self.algos {
            if let AlgoKind::Fixed(arm) = a {
                if *arm >= env.arms {
                    return Err(Error::config("algos", format!("{a} is out of range for {} arms", env.arms)));
                }
            }
        }
        if self.run.trials == 0 {
            return Err(Error::config("run.trials", "must be at least 1"));
        }
        if self.detector.stride == 0 {
            return Err(Error::config("detector.stride", "must be positive"));
        }
        if !(self.master.debug_threshold_scale > 0.0) {
            return Err(Error::config("master.debug_threshold_scale", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.rr_p.p) {
            return Err(Error::config("rr_p.p", format!("must lie in [0, 1), got {}", self.rr_p.p)));
        }
        if !(self.bandit.klucb_tolerance > 0.0) {
            return Err(Error::config("bandit.klucb_tolerance", "must be positive"));
        }
        if !(self.bandit.klucb_c >= 0.0) {
            return Err(Error::config("bandit.klucb_c", "must be non-negative"));
        }
        if self.sweep.horizons.contains(&0) {
            return Err(Error::config("sweep.horizons", "horizons must be positive"));
        }
        if self.sweep.xis.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::config("sweep.xis", "values must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
