//! Job configuration: a TOML file, command-line flags layered on top, and
//! validation into a concrete job.

use std::fmt;
use std::path::{Path, PathBuf};

use qmoney_core::security::{MemoryModel, ScenarioSpec};
use qmoney_core::Scenario;
use serde::{Deserialize, Deserializer, Serialize};

/// Bad input from the user. Maps to exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Table3,
    Certify,
    Lifetime,
    Simulate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Loss,
    Error,
    #[default]
    Both,
}

fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

/// Every field is optional; flags override the file, and each command
/// fills in its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<Command>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub scenario: Option<Vec<Scenario>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub phase_randomized: Option<Vec<bool>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub e: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub eta_d: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub t: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub task: Option<Task>,
    pub eta_m0: Option<f64>,
    pub tau: Option<f64>,
    pub positions: Option<usize>,
    pub trials: Option<usize>,
    pub kappa: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub slow: Option<bool>,
    pub no_timestamp: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl JobConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).or_else(|e| usage(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .or_else(|e| usage(format!("config: cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: JobConfig) -> Self {
        overlay!(
            self, top, command, scenario, phase_randomized, mu, e, eta_d, t, n, task, eta_m0, tau, positions,
            trials, kappa, output, format, seed, workers, slow, no_timestamp
        );
        self
    }
}

/// Validated job with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub command: Command,
    pub scenarios: Vec<ScenarioSpec>,
    pub mu: Vec<f64>,
    pub e: Vec<f64>,
    pub eta_d: Vec<f64>,
    pub t: Vec<f64>,
    pub n: usize,
    pub task: Task,
    pub memory: MemoryModel,
    pub positions: usize,
    pub trials: usize,
    pub kappa: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub workers: usize,
    pub slow: bool,
    pub timestamp: bool,
}

fn check_list(field: &str, v: &[f64], ok: impl Fn(f64) -> bool, range: &str) -> anyhow::Result<()> {
    if v.is_empty() {
        return usage(format!("{field}: list must not be empty"));
    }
    match v.iter().find(|x| !ok(**x)) {
        Some(x) => usage(format!("{field} = {x} is out of range ({range})")),
        None => Ok(()),
    }
}

impl Job {
    pub fn resolve(cfg: JobConfig) -> anyhow::Result<Job> {
        let Some(command) = cfg.command else {
            return usage("command: no command given");
        };
        let default_randomized = matches!(command, Command::Lifetime);
        let scenario = cfg.scenario.unwrap_or_else(|| vec![Scenario::Trusted]);
        let randomized = cfg.phase_randomized.unwrap_or_else(|| vec![default_randomized]);
        if scenario.is_empty() {
            return usage("scenario: list must not be empty");
        }
        if randomized.is_empty() {
            return usage("phase_randomized: list must not be empty");
        }
        let scenarios = scenario
            .iter()
            .flat_map(|&s| randomized.iter().map(move |&r| ScenarioSpec { scenario: s, phase_randomized: r }))
            .collect();

        let needs_mu = matches!(command, Command::Solve | Command::Sweep | Command::Lifetime | Command::Simulate);
        let mu = match cfg.mu {
            Some(v) => v,
            None if needs_mu => return usage(format!("mu: required by the {command} command")),
            None => Vec::new(),
        };
        let e = cfg.e.unwrap_or_else(|| vec![0.0]);
        let eta_d = cfg.eta_d.unwrap_or_else(|| vec![1.0]);
        let t = cfg.t.unwrap_or_default();
        if needs_mu {
            check_list("mu", &mu, |x| x.is_finite() && x >= 0.0, "μ ≥ 0")?;
        } else if !mu.is_empty() {
            check_list("mu", &mu, |x| x.is_finite() && x >= 0.0, "μ ≥ 0")?;
        }
        check_list("e", &e, |x| (0.0..=0.5).contains(&x), "0 ≤ e ≤ 0.5")?;
        check_list("eta_d", &eta_d, |x| x > 0.0 && x <= 1.0, "0 < η_d ≤ 1")?;
        if !t.is_empty() {
            check_list("t", &t, |x| x.is_finite() && x >= 0.0, "t ≥ 0")?;
        }
        let single = |field: &str, len: usize| {
            if command == Command::Solve && len != 1 {
                usage(format!("{field}: the solve command takes exactly one value"))
            } else {
                Ok(())
            }
        };
        single("mu", mu.len())?;
        single("e", e.len())?;
        single("eta_d", eta_d.len())?;
        single("scenario", scenario.len())?;
        single("phase_randomized", randomized.len())?;

        let n = cfg.n.unwrap_or(1);
        if n == 0 {
            return usage("n: must be at least 1");
        }
        if n > 1 && command != Command::Solve {
            return usage("n: repetition counts above 1 are only supported by the solve command");
        }
        let slow = cfg.slow.unwrap_or(false);
        if n > 1 && !slow {
            return usage("n: joint solves over several positions are slow; enable the slow flag");
        }
        let memory = MemoryModel { eta_m0: cfg.eta_m0.unwrap_or(0.68), tau: cfg.tau.unwrap_or(15.0) };
        if !(memory.eta_m0 > 0.0 && memory.eta_m0 <= 1.0) {
            return usage(format!("eta_m0 = {} is out of range (0 < η_m0 ≤ 1)", memory.eta_m0));
        }
        if !(memory.tau.is_finite() && memory.tau > 0.0) {
            return usage(format!("tau = {} is out of range (τ > 0)", memory.tau));
        }
        let positions = cfg.positions.unwrap_or(100_000);
        if positions == 0 {
            return usage("positions: must be at least 1");
        }
        let trials = cfg.trials.unwrap_or(1);
        if trials == 0 {
            return usage("trials: must be at least 1");
        }
        let kappa = cfg.kappa.unwrap_or(qmoney_core::protocol_sim::DEFAULT_KAPPA);
        if !(kappa.is_finite() && kappa > 0.0) {
            return usage(format!("kappa = {kappa} is out of range (κ > 0)"));
        }
        let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return usage("workers: must be at least 1");
        }
        let format = match (cfg.format, &cfg.output) {
            (Some(f), _) => f,
            (None, Some(p)) if p.extension().is_some_and(|x| x == "json") => Format::Json,
            _ => Format::Csv,
        };
        Ok(Job {
            command,
            scenarios,
            mu,
            e,
            eta_d,
            t,
            n,
            task: cfg.task.unwrap_or_default(),
            memory,
            positions,
            trials,
            kappa,
            output: cfg.output,
            format,
            seed: cfg.seed.unwrap_or(0),
            workers,
            slow,
            timestamp: !cfg.no_timestamp.unwrap_or(false),
        })
    }
}
