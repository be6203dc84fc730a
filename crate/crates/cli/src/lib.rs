//! Experiment runner for cross-validation risk analysis: named experiments,
//! the invariant suite, and CSV/SVG artifacts.

pub mod args;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod svg;

use std::path::{Path, PathBuf};

pub use config::{Command, ExperimentConfig, Format, RunMode};
pub use error::{CliError, CliResult};
pub use experiments::Artifacts;

/// Validates the configuration and runs the experiment.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    cfg.validate()?;
    match cfg.command {
        Command::MajorityTable => experiments::majority_table(cfg),
        Command::MajorityMinimizer => experiments::majority_minimizer(cfg),
        Command::LinearMse => experiments::linear_mse(cfg),
        Command::SquarewaveCov => experiments::squarewave_cov(cfg),
        Command::Decompose => experiments::decompose_cmd(cfg),
        Command::MinimaxSweep => experiments::minimax_cmd(cfg),
        Command::Verify => experiments::verify_cmd(cfg),
    }
}

/// CSV bytes of each table, keyed by suffix.
pub fn render_csv(art: &Artifacts) -> CliResult<Vec<(String, Vec<u8>)>> {
    let comment = output::provenance(art.command.as_str(), art.seed);
    art.tables.iter().map(|(suffix, t)| Ok((suffix.clone(), t.to_csv(&comment)?))).collect()
}

fn with_suffix(base: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let name = if suffix.is_empty() { format!("{stem}.{ext}") } else { format!("{stem}.{suffix}.{ext}") };
    base.with_file_name(name)
}

/// Writes the artifacts next to `out` (`out.csv`, `out.<suffix>.csv`,
/// `out.svg`) and returns the paths written.
pub fn write_artifacts(art: &Artifacts, out: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    if format.csv() {
        for (suffix, bytes) in render_csv(art)? {
            let path = with_suffix(out, &suffix, "csv");
            std::fs::write(&path, bytes)?;
            written.push(path);
        }
    }
    if format.svg() {
        let path = with_suffix(out, "", "svg");
        std::fs::write(&path, art.chart.render())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(command: Command, pairs: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(command);
        c.apply_text(pairs).unwrap();
        c
    }

    #[test]
    fn minimizer_marks_n_over_three() {
        let art = run(&cfg(Command::MajorityMinimizer, "n=300")).unwrap();
        let t = art.primary();
        let i = t.values("is_argmin").iter().position(|v| *v == "true").unwrap();
        assert_eq!(t.values("m")[i], "100");
    }

    #[test]
    fn anticorr_decomposition() {
        let art = run(&cfg(Command::Decompose, "n=2\nrule=anticorr")).unwrap();
        let t = art.primary();
        assert_eq!(t.values("mse"), vec!["0"]);
        assert_eq!(t.values("sls"), vec!["1/8"]);
        assert_eq!(t.values("sls_f64"), vec!["0.125"]);
        assert_eq!(art.tables[1].0, "bounds");
    }

    #[test]
    fn reruns_are_identical() {
        let c = cfg(Command::LinearMse, "n=4\nk=2\nq=3\nd=3,4\ntrials=500\nseed=9");
        assert_eq!(render_csv(&run(&c).unwrap()).unwrap(), render_csv(&run(&c).unwrap()).unwrap());
    }

    #[test]
    fn csv_starts_with_provenance() {
        let art = run(&cfg(Command::SquarewaveCov, "m=4,9\nratio=1")).unwrap();
        let csv = String::from_utf8(render_csv(&art).unwrap().remove(0).1).unwrap();
        assert!(csv.starts_with("# cvrisk 0.1.0 command=squarewave-cov seed=1\r\nn,m,R,cov_exact,"));
    }

    #[test]
    fn sweep_reports_proxy() {
        let res = experiments::minimax_sweep(60, &[2, 3, 4, 5, 6], &experiments::default_family()).unwrap();
        assert_eq!(res.rows.len(), 5);
        assert!(res.rows.iter().all(|r| r.max_mse >= res.minimax_proxy));
        assert!(experiments::minimax_sweep(60, &[7], &experiments::default_family()).is_err());
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let art = run(&cfg(Command::Decompose, "n=4\nk=2")).unwrap();
        let paths = write_artifacts(&art, &dir.path().join("dec.csv"), Format::Both).unwrap();
        let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, vec!["dec.csv", "dec.bounds.csv", "dec.svg"]);
    }
}
