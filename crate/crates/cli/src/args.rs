//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ExperimentConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "cvrisk", version, about = "Cross-validation risk experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Exact, conditional and approximate majority fold covariance for every divisor.
    MajorityTable(Params),
    /// Fold size minimizing the majority fold covariance.
    MajorityMinimizer(Params),
    /// Monte Carlo CV mean-squared error of the linear learner.
    LinearMse(Params),
    /// Exact square-wave fold covariance against its `c0 / m` prediction.
    SquarewaveCov(Params),
    /// Five-term decomposition of the CV mean-squared error and its bounds.
    Decompose(Params),
    /// Worst case over Bernoulli label laws of the majority CV error, per fold count.
    MinimaxSweep(Params),
    /// Runs the invariant suite of one module or of all of them.
    Verify {
        /// all, core, decomposition, majority, linfield or squarewave.
        #[arg(default_value = "all")]
        suite: String,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// Sample size(s).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Fold count(s).
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Fold size(s).
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Prime field size.
    #[arg(long)]
    pub q: Option<u64>,
    /// Dimension(s).
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<usize>,
    /// Shared-point ratio(s) `(n - 2m) / m` for the square wave.
    #[arg(long, value_delimiter = ',')]
    pub ratio: Vec<usize>,
    /// Label probabilities as `p/q`, comma separated.
    #[arg(long)]
    pub p: Option<String>,
    /// Monte Carlo trials [default: 20000]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Random seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; CSV goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv, svg or both.
    #[arg(long)]
    pub format: Option<String>,
    /// Cap on exhaustive enumeration.
    #[arg(long)]
    pub budget: Option<u128>,
    /// majority, constant, squarewave, anticorr or linear.
    #[arg(long)]
    pub rule: Option<String>,
    /// exact or mc.
    #[arg(long)]
    pub mode: Option<String>,
    /// `key=value` file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Cli {
    /// Defaults, then the config file, then explicit flags.
    pub fn into_config(self) -> CliResult<ExperimentConfig> {
        let (command, params, suite) = match self.command {
            CommandArgs::MajorityTable(p) => (Command::MajorityTable, p, None),
            CommandArgs::MajorityMinimizer(p) => (Command::MajorityMinimizer, p, None),
            CommandArgs::LinearMse(p) => (Command::LinearMse, p, None),
            CommandArgs::SquarewaveCov(p) => (Command::SquarewaveCov, p, None),
            CommandArgs::Decompose(p) => (Command::Decompose, p, None),
            CommandArgs::MinimaxSweep(p) => (Command::MinimaxSweep, p, None),
            CommandArgs::Verify { suite, params } => (Command::Verify, params, Some(suite)),
        };
        let mut cfg = ExperimentConfig::new(command);
        if let Some(path) = &params.config {
            cfg.apply_file(path)?;
        }
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut pairs: Vec<(&str, String)> = Vec::new();
        for (key, v) in
            [("n", &params.n), ("k", &params.k), ("m", &params.m), ("d", &params.d), ("ratio", &params.ratio)]
        {
            if !v.is_empty() {
                pairs.push((key, join(v)));
            }
        }
        let scalars = [
            ("q", params.q.map(|v| v.to_string())),
            ("p", params.p),
            ("trials", params.trials.map(|v| v.to_string())),
            ("seed", params.seed.map(|v| v.to_string())),
            ("out", params.out.map(|v| v.to_string_lossy().into_owned())),
            ("format", params.format),
            ("budget", params.budget.map(|v| v.to_string())),
            ("rule", params.rule),
            ("mode", params.mode),
            ("suite", suite),
        ];
        pairs.extend(scalars.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        for (key, value) in pairs {
            cfg.set(key, &value)?;
        }
        Ok(cfg)
    }
}
