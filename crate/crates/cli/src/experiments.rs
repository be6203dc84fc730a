//! The named experiments. Each returns tables and charts; nothing here
//! touches the file system.

use cvrisk::combinatorics::{format_exact, rational, to_f64};
use cvrisk::decomposition::{anticorr_fixture, bound_suite, decompose, stability_estimates, DecompositionReport, Mode};
use cvrisk::linfield::{expected_loss_exact, linear_mse_bound, linear_mse_mc, linear_rule, LinearMode};
use cvrisk::majority::{cov_exact, majority_rule, minimize_cov, mse_bernoulli, MajorityCovRow};
use cvrisk::squarewave::{square_wave_rule, squarewave_constants, SquareWaveRow};
use cvrisk::verify;
use cvrisk::{ConstantRule, ExactValue, FiniteDistribution, LearningRule};

use crate::config::{Command, ExperimentConfig, RunMode};
use crate::error::{CliError, CliResult};
use crate::output::{exact_cells, float, term_cells, Table};
use crate::svg::{Chart, Series};

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub command: Command,
    pub seed: u64,
    /// `(suffix, table)`; the primary table has an empty suffix.
    pub tables: Vec<(String, Table)>,
    pub chart: Chart,
    /// Set when a verification run recorded a failure.
    pub failed: bool,
}

impl Artifacts {
    fn new(cfg: &ExperimentConfig, table: Table, chart: Chart) -> Self {
        Artifacts { command: cfg.command, seed: cfg.seed, tables: vec![(String::new(), table)], chart, failed: false }
    }

    pub fn primary(&self) -> &Table {
        &self.tables[0].1
    }
}

fn divisors(n: usize, lo: usize, hi: usize) -> Vec<usize> {
    (lo.max(1)..=hi).filter(|d| n.is_multiple_of(*d)).collect()
}

fn yes(b: bool) -> String {
    b.to_string()
}

pub fn majority_table(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let mut t = Table::new(&[
        "n",
        "m",
        "k",
        "cov_exact",
        "cov_exact_f64",
        "cov_conditional",
        "cov_conditional_f64",
        "cov_approx_form",
        "cov_approx",
        "mse",
        "mse_f64",
        "n_minus_m_odd",
    ]);
    let mut chart = Chart::new("Majority fold covariance", "k", "cov").log_x().log_y();
    for &n in &cfg.n {
        let ms = if cfg.m.is_empty() { divisors(n, 1, n / 2) } else { cfg.m.clone() };
        let mut pts = Vec::new();
        for m in ms {
            let r = MajorityCovRow::new(n, m)?;
            let [ce, cf] = exact_cells(&r.cov_exact);
            let [ke, kf] = exact_cells(&r.cov_conditional);
            let [me, mf] = exact_cells(&r.mse);
            pts.push((r.k as f64, to_f64(&r.cov_exact)));
            t.push(vec![
                n.to_string(),
                m.to_string(),
                r.k.to_string(),
                ce,
                cf,
                ke,
                kf,
                r.approx_form.to_string(),
                float(r.cov_approx),
                me,
                mf,
                yes(r.n_minus_m_odd),
            ]);
        }
        chart = chart.with(Series::line(&format!("n={n}"), pts));
    }
    Ok(Artifacts::new(cfg, t, chart))
}

pub fn majority_minimizer(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let mut t =
        Table::new(&["n", "m", "k", "cov_exact", "cov_exact_f64", "mse", "mse_f64", "is_argmin", "is_mse_argmin"]);
    let mut chart = Chart::new("Majority fold covariance by fold count", "k", "n * cov").log_x();
    for &n in &cfg.n {
        let min = minimize_cov(n)?;
        let mse_best = min.table.iter().map(|r| &r.mse).min().cloned();
        let mut pts = Vec::new();
        for r in &min.table {
            let [ce, cf] = exact_cells(&r.cov_exact);
            let [me, mf] = exact_cells(&r.mse);
            pts.push((r.k as f64, n as f64 * to_f64(&r.cov_exact)));
            t.push(vec![
                n.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                ce,
                cf,
                me,
                mf,
                yes(r.m == min.m_star),
                yes(Some(&r.mse) == mse_best.as_ref()),
            ]);
        }
        chart = chart.with(Series::line(&format!("n={n}"), pts));
    }
    Ok(Artifacts::new(cfg, t, chart))
}

pub fn linear_mse(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let q = cfg.q.ok_or_else(|| CliError::Config("linear-mse needs --q".into()))?;
    let mut t = Table::new(&[
        "q",
        "d",
        "n",
        "m",
        "case",
        "bound",
        "mse_mc",
        "std_error",
        "L_bar",
        "L_bar_f64",
        "loss_var",
        "loss_var_f64",
    ]);
    let mut chart = Chart::new(&format!("Linear learner CV mean-squared error, q={q}"), "d", "mse").log_y();
    for &n in &cfg.n {
        let ms: Vec<usize> =
            if cfg.m.is_empty() { cfg.k.iter().map(|k| n / k.max(&1)).collect() } else { cfg.m.clone() };
        for m in ms {
            if m == 0 || n % m != 0 {
                return Err(CliError::Config(format!("fold size {m} does not divide n={n}")));
            }
            let mut pts = Vec::new();
            for &d in &cfg.d {
                let (case, bound) = linear_mse_bound(n, m, d, q)?;
                let est = linear_mse_mc(n, n / m, d, q, cfg.trials, cfg.seed)?;
                let loss = expected_loss_exact(n, d, q)?;
                let [le, lf] = exact_cells(&loss.l_bar);
                let [ve, vf] = exact_cells(&loss.variance);
                pts.push((d as f64, est.value));
                t.push(vec![
                    q.to_string(),
                    d.to_string(),
                    n.to_string(),
                    m.to_string(),
                    case.to_string(),
                    float(bound),
                    float(est.value),
                    float(est.std_error),
                    le,
                    lf,
                    ve,
                    vf,
                ]);
            }
            chart = chart.with(Series::line(&format!("n={n} m={m}"), pts));
        }
    }
    Ok(Artifacts::new(cfg, t, chart))
}

pub fn squarewave_cov(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let ratios = if cfg.ratio.is_empty() { vec![1, 2] } else { cfg.ratio.clone() };
    let mut t =
        Table::new(&["n", "m", "R", "cov_exact", "cov_exact_f64", "c0_over_m", "abs_err", "bound", "within_bound"]);
    let c0 = squarewave_constants().c0;
    let mut chart = Chart::new("Square-wave fold covariance", "m", "m * cov").log_x();
    for &ratio in &ratios {
        let mut pts = Vec::new();
        for &m in &cfg.m {
            let r = SquareWaveRow::new(m, ratio)?;
            let [ce, cf] = exact_cells(&r.cov_exact);
            pts.push((m as f64, m as f64 * to_f64(&r.cov_exact)));
            t.push(vec![
                r.n.to_string(),
                m.to_string(),
                ratio.to_string(),
                ce,
                cf,
                float(r.c0_over_m),
                float(r.abs_err),
                float(r.bound),
                yes(r.within_bound),
            ]);
        }
        chart = chart.with(Series::line(&format!("R={ratio}"), pts));
    }
    let xs: Vec<f64> = cfg.m.iter().map(|&m| m as f64).collect();
    if let (Some(lo), Some(hi)) = (xs.iter().copied().reduce(f64::min), xs.iter().copied().reduce(f64::max)) {
        chart = chart.with(Series::line("c0", vec![(lo, c0), (hi, c0)]));
    }
    Ok(Artifacts::new(cfg, t, chart))
}

const TERMS: [&str; 8] =
    ["mse", "sls", "inter_fold_cov", "per_fold_noise", "corr_hold", "corr_risk", "residual", "risk_spread"];

fn report_terms(r: &DecompositionReport) -> [&cvrisk::decomposition::Term; 8] {
    [&r.mse, &r.sls, &r.inter_fold_cov, &r.per_fold_noise, &r.corr_hold, &r.corr_risk, &r.residual, &r.risk_spread]
}

fn decompose_with<R: LearningRule + ?Sized>(
    cfg: &ExperimentConfig,
    rule: &R,
    dist: &FiniteDistribution,
    n: usize,
    k: usize,
) -> CliResult<Artifacts> {
    let mode = match cfg.mode {
        RunMode::Exact => Mode::Exact { budget: cfg.budget },
        RunMode::MonteCarlo => Mode::MonteCarlo { trials: cfg.trials, seed: cfg.seed },
    };
    let report = decompose(rule, dist, n, k, mode)?;
    let mut header = vec!["rule".to_string(), "n".into(), "k".into(), "m".into()];
    for name in TERMS {
        header.extend([name.to_string(), format!("{name}_f64"), format!("{name}_se")]);
    }
    let mut row = vec![rule.name(), n.to_string(), k.to_string(), report.m.to_string()];
    let mut pts = Vec::new();
    for (i, term) in report_terms(&report).into_iter().enumerate() {
        row.extend(term_cells(term));
        pts.push((i as f64, term.value()));
    }
    let table = Table { header, rows: vec![row] };
    let chart = Chart::new(&format!("Decomposition of {} at n={n}, k={k}", rule.name()), "term index", "value")
        .with(Series::scatter("terms", pts));
    let mut art = Artifacts::new(cfg, table, chart);
    if k >= 2 {
        let prof = stability_estimates(rule, dist, n, report.m, mode)?;
        let mut bounds = Table::new(&["name", "lhs", "rhs", "holds", "slack"]);
        for c in bound_suite(&report, &prof)? {
            bounds.push(vec![c.name, float(c.lhs), float(c.rhs), yes(c.holds), float(c.slack)]);
        }
        art.tables.push(("bounds".into(), bounds));
    }
    Ok(art)
}

pub fn decompose_cmd(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let n = cfg.n[0];
    let k = cfg.k.first().copied().unwrap_or(n);
    let p = cfg.p.first().cloned().unwrap_or_else(|| rational(1, 2));
    let bernoulli = || FiniteDistribution::bernoulli(p.clone());
    match cfg.rule.as_str() {
        "majority" => decompose_with(cfg, &majority_rule(), &bernoulli()?, n, k),
        "constant" => decompose_with(cfg, &ConstantRule { label: 0 }, &bernoulli()?, n, k),
        "squarewave" => decompose_with(cfg, &square_wave_rule(n / k)?, &bernoulli()?, n, k),
        "anticorr" => {
            let (rule, dist) = anticorr_fixture(n)?;
            decompose_with(cfg, &rule, &dist, n, k)
        }
        "linear" => {
            let q = cfg.q.ok_or_else(|| CliError::Config("linear rule needs --q".into()))?;
            let d = cfg.d.first().copied().ok_or_else(|| CliError::Config("linear rule needs --d".into()))?;
            let rule = linear_rule(d, q as u32)?.with_mode(LinearMode::Conditional);
            let dist = FiniteDistribution::uniform_linear(q as u32, &rule.truth)?;
            decompose_with(cfg, &rule, &dist, n, k)
        }
        other => Err(CliError::Config(format!(
            "unknown rule {other:?}; expected majority, constant, squarewave, anticorr or linear"
        ))),
    }
}

/// Per-fold-count worst case over the label-probability family.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub worst_p: ExactValue,
    pub max_mse: f64,
    pub cov_exact: ExactValue,
}

impl SweepRow {
    /// `max_mse * n / sqrt(k)`.
    pub fn scaled(&self) -> f64 {
        self.max_mse * self.n as f64 / (self.k as f64).sqrt()
    }
}

/// Minimax sweep of the majority rule over `Ber(p)` label laws.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `min_k max_p mse`.
    pub minimax_proxy: f64,
    pub minimax_k: usize,
    /// Fold count minimizing the `Ber(1/2)` fold covariance among the swept ones.
    pub cov_argmin_k: usize,
}

/// Default label-probability family of the sweep.
pub fn default_family() -> Vec<ExactValue> {
    [(1, 2), (2, 5), (3, 10), (1, 5), (1, 10)].iter().map(|&(a, b)| rational(a, b)).collect()
}

pub fn minimax_sweep(n: usize, ks: &[usize], family: &[ExactValue]) -> CliResult<SweepResult> {
    if family.is_empty() {
        return Err(CliError::Config("empty distribution family".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        if k < 2 || !n.is_multiple_of(k) {
            return Err(CliError::Config(format!("fold count {k} must be at least 2 and divide n={n}")));
        }
        let m = n / k;
        let mut worst: Option<(ExactValue, f64)> = None;
        for p in family {
            let v = mse_bernoulli(n, m, to_f64(p))?;
            if worst.as_ref().is_none_or(|(_, w)| v > *w) {
                worst = Some((p.clone(), v));
            }
        }
        let (worst_p, max_mse) = worst.expect("family is non-empty");
        rows.push(SweepRow { n, k, m, worst_p, max_mse, cov_exact: cov_exact(n, m)? });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.max_mse.total_cmp(&b.max_mse))
        .ok_or_else(|| CliError::Config("minimax-sweep needs --k".into()))?;
    let cov_best = rows.iter().min_by(|a, b| a.cov_exact.cmp(&b.cov_exact)).expect("rows are non-empty");
    Ok(SweepResult { minimax_proxy: best.max_mse, minimax_k: best.k, cov_argmin_k: cov_best.k, rows })
}

pub fn minimax_cmd(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let family = if cfg.p.is_empty() { default_family() } else { cfg.p.clone() };
    let res = minimax_sweep(cfg.n[0], &cfg.k, &family)?;
    let mut t = Table::new(&[
        "n",
        "k",
        "m",
        "worst_p",
        "max_mse",
        "max_mse_scaled",
        "minimax_proxy",
        "is_minimax_argmin",
        "cov_exact_f64",
        "is_cov_argmin",
    ]);
    let mut pts = Vec::new();
    for r in &res.rows {
        pts.push((r.k as f64, r.scaled()));
        t.push(vec![
            r.n.to_string(),
            r.k.to_string(),
            r.m.to_string(),
            format_exact(&r.worst_p),
            float(r.max_mse),
            float(r.scaled()),
            float(res.minimax_proxy),
            yes(r.k == res.minimax_k),
            float(to_f64(&r.cov_exact)),
            yes(r.k == res.cov_argmin_k),
        ]);
    }
    let chart =
        Chart::new(&format!("Worst-case CV mean-squared error of majority, n={}", cfg.n[0]), "k", "mse * n / sqrt(k)")
            .log_x()
            .with(Series::line("max over family", pts));
    Ok(Artifacts::new(cfg, t, chart))
}

pub fn verify_cmd(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let results = verify::run(cfg.suite, cfg.seed);
    let mut t = Table::new(&["module", "invariant", "passed", "detail"]);
    let mut pts = Vec::new();
    for (i, r) in results.iter().enumerate() {
        pts.push((i as f64, if r.passed { 1.0 } else { 0.0 }));
        t.push(vec![r.module.to_string(), r.name.clone(), yes(r.passed), r.detail.clone()]);
    }
    let chart = Chart::new("Invariant outcomes", "invariant", "passed").with(Series::scatter("outcome", pts));
    let mut art = Artifacts::new(cfg, t, chart);
    art.failed = results.iter().any(|r| !r.passed);
    Ok(art)
}
