//! Experiment configuration: defaults, `key=value` files and validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cvrisk::combinatorics::parse_exact;
use cvrisk::verify::Suite;
use cvrisk::{ExactValue, DEFAULT_BUDGET};

use crate::error::{CliError, CliResult};

/// Named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MajorityTable,
    MajorityMinimizer,
    LinearMse,
    SquarewaveCov,
    Decompose,
    MinimaxSweep,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::MajorityTable,
        Command::MajorityMinimizer,
        Command::LinearMse,
        Command::SquarewaveCov,
        Command::Decompose,
        Command::MinimaxSweep,
        Command::Verify,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::MajorityTable => "majority-table",
            Command::MajorityMinimizer => "majority-minimizer",
            Command::LinearMse => "linear-mse",
            Command::SquarewaveCov => "squarewave-cov",
            Command::Decompose => "decompose",
            Command::MinimaxSweep => "minimax-sweep",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command {s:?}")))
    }
}

/// Artifact kinds to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Svg,
    Both,
}

impl Format {
    pub fn csv(&self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn svg(&self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "both" => Ok(Format::Both),
            _ => Err(CliError::Config(format!("format must be csv, svg or both, got {s:?}"))),
        }
    }
}

/// Exhaustive or simulated evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    #[default]
    Exact,
    MonteCarlo,
}

impl FromStr for RunMode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "exact" => Ok(RunMode::Exact),
            "mc" => Ok(RunMode::MonteCarlo),
            _ => Err(CliError::Config(format!("mode must be exact or mc, got {s:?}"))),
        }
    }
}

/// Fully resolved parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub q: Option<u64>,
    pub d: Vec<usize>,
    pub ratio: Vec<usize>,
    pub p: Vec<ExactValue>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub budget: u128,
    pub rule: String,
    pub mode: RunMode,
    pub suite: Suite,
}

pub const DEFAULT_TRIALS: usize = 20_000;
pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            n: Vec::new(),
            k: Vec::new(),
            m: Vec::new(),
            q: None,
            d: Vec::new(),
            ratio: Vec::new(),
            p: Vec::new(),
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            out: None,
            format: Format::Csv,
            budget: DEFAULT_BUDGET,
            rule: "majority".into(),
            mode: RunMode::Exact,
            suite: Suite::All,
        }
    }

    /// Sets one parameter from its textual form; lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key.trim() {
            "n" => self.n = list(key, value)?,
            "k" => self.k = list(key, value)?,
            "m" => self.m = list(key, value)?,
            "d" => self.d = list(key, value)?,
            "ratio" => self.ratio = list(key, value)?,
            "q" => self.q = Some(scalar(key, value)?),
            "trials" => self.trials = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "budget" => self.budget = scalar(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "rule" => self.rule = value.to_string(),
            "mode" => self.mode = value.parse()?,
            "suite" => self.suite = value.parse().map_err(|_| CliError::Usage(format!("unknown suite {value:?}")))?,
            "p" => {
                self.p = value
                    .split(',')
                    .map(|s| parse_exact(s.trim()).ok_or_else(|| bad(key, s)))
                    .collect::<CliResult<_>>()?
            }
            other => return Err(CliError::Config(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Checks that the command has what it needs.
    pub fn validate(&self) -> CliResult<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{} needs {what}", self.command)))
            }
        };
        if self.trials < 2 {
            return Err(CliError::Config("trials must be at least 2".into()));
        }
        match self.command {
            Command::MajorityTable | Command::MajorityMinimizer => need(!self.n.is_empty(), "--n"),
            Command::LinearMse => {
                need(!self.n.is_empty(), "--n")?;
                need(self.q.is_some(), "--q")?;
                need(!self.d.is_empty(), "--d")?;
                need(!self.k.is_empty() || !self.m.is_empty(), "--k or --m")
            }
            Command::SquarewaveCov => need(!self.m.is_empty(), "--m"),
            Command::Decompose => {
                need(self.n.len() == 1, "a single --n")?;
                need(self.k.len() <= 1, "at most one --k")
            }
            Command::MinimaxSweep => {
                need(self.n.len() == 1, "a single --n")?;
                need(!self.k.is_empty(), "--k")
            }
            Command::Verify => Ok(()),
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value {value:?} for {key}"))
}

fn scalar<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value.split(',').map(|s| scalar(key, s.trim())).collect()
}
