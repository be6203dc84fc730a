//! End-to-end acceptance criteria. Every check prints one PASS/FAIL line;
//! the process exits nonzero if any check fails.

use cvrisk::combinatorics::{rational, to_f64};
use cvrisk::decomposition::{anticorr_fixture, bound_suite, decompose, stability_estimates, Mode};
use cvrisk::engine::mc_functional;
use cvrisk::linfield::{expected_loss_exact, linear_mse_mc, rank_prob, RankFormula};
use cvrisk::majority::{
    cov_approx, cov_brute_force, cov_conditional, cov_exact, cov_half_exact, cov_single_exact, majority_rule,
    minimize_cov, mse_majority, ApproxForm,
};
use cvrisk::squarewave::{
    cov_brute_force as sq_brute_force, cov_exact_factorized, squarewave_constants, theta_eval, ThetaMethod,
};
use cvrisk::verify::{coset_uniformity_p_value, random_instance, rank_frequency_check};
use cvrisk::{ExactValue, FiniteDistribution, Functional};
use cvrisk_cli::experiments::{default_family, minimax_sweep};
use cvrisk_cli::{render_csv, run, Command, ExperimentConfig};
use num_traits::{One, Zero};

/// Relative tolerance of the sublinear covariance form.
const SUBLINEAR_REL_TOL: f64 = 0.05;
/// Allowed spread of `mse * n / sqrt(10)` across sample sizes.
const PLATEAU_SPREAD_TOL: f64 = 0.10;
/// Floor of `mse * n / sqrt(k)` in the minimax sweep.
const MINIMAX_FLOOR: f64 = 0.05;
/// Standard deviations allowed for empirical rank frequencies.
const RANK_Z: f64 = 4.0;
/// Threshold for the fold-starved linear regime.
const CASE2_FLOOR: f64 = 0.5;
/// Relative slack of the two-point decay ratio test.
const RATIO_TOL: f64 = 0.20;
/// Calibration constant of the `m^{-3/2}` remainder, applied as `m^{-1/2}` on `m * cov`.
const KAPPA: f64 = 1.0;
/// Tolerance of the theta identity and of `c0`, `c1`.
const THETA_TOL: f64 = 1e-12;
const CONSTANT_TOL: f64 = 1e-4;
/// Randomized instances of the bound suite.
const BOUND_INSTANCES: u64 = 200;
/// Monte Carlo trials of the linear criteria.
const LINEAR_TRIALS: usize = 100_000;

/// Outcome of one check, or an informational note.
struct Line {
    pass: Option<bool>,
    text: String,
}

fn report(criterion: u32, name: &str, pass: bool, detail: impl AsRef<str>) -> Line {
    Line { pass: Some(pass), text: format!("criterion {criterion:>2} {name}: {}", detail.as_ref()) }
}

fn info(criterion: u32, text: impl AsRef<str>) -> Line {
    Line { pass: None, text: format!("criterion {criterion:>2} {}", text.as_ref()) }
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

fn criterion_01_decomposition_identity() -> Vec<Line> {
    let half = FiniteDistribution::bernoulli(rational(1, 2)).unwrap();
    let mut count = 0;
    let mut bad = Vec::new();
    for n in [2, 4, 6, 8] {
        let (anti, anti_dist) = anticorr_fixture(n).unwrap();
        for k in divisors(n) {
            for (label, r) in [
                ("majority", decompose(&majority_rule(), &half, n, k, Mode::exact()).unwrap()),
                ("anticorr", decompose(&anti, &anti_dist, n, k, Mode::exact()).unwrap()),
            ] {
                count += 1;
                if !r.residual.exact().is_some_and(|v| v.is_zero()) {
                    bad.push(format!("{label} n={n} k={k}"));
                }
            }
        }
    }
    vec![report(1, "exact residual is zero", bad.is_empty(), format!("{count} instances, failures {bad:?}"))]
}

fn criterion_02_majority_brute_force() -> Vec<Line> {
    let mut count = 0;
    let mut bad = Vec::new();
    for n in 2..=16 {
        for m in (1..=n / 2).filter(|m| n % m == 0) {
            count += 1;
            if cov_exact(n, m).unwrap() != cov_brute_force(n, m).unwrap() {
                bad.push((n, m));
            }
        }
    }
    vec![report(
        2,
        "cov_exact equals brute force for n <= 16",
        bad.is_empty(),
        format!("{count} pairs, failures {bad:?}"),
    )]
}

fn criterion_03_conditional_form() -> Vec<Line> {
    let mut parity = [0usize; 2];
    let mut bad = Vec::new();
    for n in 2..=16 {
        for m in (1..=n / 2).filter(|m| n % m == 0) {
            parity[(n - m) % 2] += 1;
            if cov_exact(n, m).unwrap() != cov_conditional(n, m).unwrap() {
                bad.push((n, m));
            }
        }
    }
    let pass = bad.is_empty() && parity.iter().all(|&c| c > 0);
    vec![report(
        3,
        "cov_conditional equals cov_exact",
        pass,
        format!("{} even and {} odd n-m, failures {bad:?}", parity[0], parity[1]),
    )]
}

fn criterion_04_closed_forms() -> Vec<Line> {
    let single = (2..=1000).filter(|&n| cov_exact(n, 1).unwrap() != cov_single_exact(n).unwrap()).collect::<Vec<_>>();
    let half = (2..=1000)
        .step_by(2)
        .filter(|&n| cov_exact(n, n / 2).unwrap() != cov_half_exact(n).unwrap())
        .collect::<Vec<_>>();
    vec![
        report(4, "m = 1 closed form for n <= 1000", single.is_empty(), format!("failures {single:?}")),
        report(4, "m = n/2 closed form for even n <= 1000", half.is_empty(), format!("failures {half:?}")),
    ]
}

fn criterion_05_minimizer() -> Vec<Line> {
    let mut results = Vec::new();
    for n in [300, 600, 1200, 3000] {
        let min = minimize_cov(n).unwrap();
        let below: Vec<&ExactValue> = min.table.iter().filter(|r| 3 * r.m <= n).map(|r| &r.cov_exact).collect();
        let decreasing = below.windows(2).all(|w| w[0] > w[1]);
        let half = &min.table.last().unwrap().cov_exact;
        let third = cov_exact(n, n / 3).unwrap();
        results.push(report(
            5,
            &format!("argmin m = n/3 and monotone chain, n={n}"),
            min.m_star == n / 3 && decreasing && third < *half,
            format!(
                "m*={} k*={} chain decreasing={decreasing} cov(n/3)={:.6e} cov(n/2)={:.6e}",
                min.m_star,
                min.k_star,
                to_f64(&third),
                to_f64(half)
            ),
        ));
    }
    results
}

fn criterion_06_sqrt_k_scaling() -> Vec<Line> {
    let mut results = Vec::new();
    for m in [30, 100, 300, 1000] {
        let exact = to_f64(&cov_exact(3000, m).unwrap());
        let approx = cov_approx(3000, m, ApproxForm::Sublinear).unwrap();
        let rel = (approx / exact - 1.0).abs();
        results.push(report(
            6,
            &format!("sublinear form at n=3000, m={m}"),
            rel <= SUBLINEAR_REL_TOL,
            format!("relative error {rel:.5}"),
        ));
    }
    let scaled: Vec<f64> = [1000, 2000, 3000]
        .iter()
        .map(|&n| to_f64(&mse_majority(n, n / 10).unwrap()) * n as f64 / 10f64.sqrt())
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = (hi - lo) / lo;
    results.push(report(
        6,
        "mse * n / sqrt(10) plateau",
        spread < PLATEAU_SPREAD_TOL,
        format!("values {scaled:.5?}, spread {spread:.4}"),
    ));
    results
}

fn criterion_07_minimax_floor() -> Vec<Line> {
    let res = minimax_sweep(3000, &[3, 10, 30], &default_family()).unwrap();
    let mut results = Vec::new();
    for r in &res.rows {
        results.push(report(
            7,
            &format!("mse * n / sqrt(k) floor at k={}", r.k),
            r.scaled() >= MINIMAX_FLOOR,
            format!("{:.5} (worst p = {})", r.scaled(), r.worst_p),
        ));
    }
    results.push(info(
        7,
        format!(
            "minimax proxy {:.6e} at k={}; covariance argmin k={}",
            res.minimax_proxy, res.minimax_k, res.cov_argmin_k
        ),
    ));
    results
}

fn criterion_08_rank_probabilities() -> Vec<Line> {
    let mut agree = true;
    let mut sums = true;
    for q in [2u64, 3, 5] {
        for n1 in 0..=8 {
            for n2 in 0..=8 {
                let mut total = ExactValue::zero();
                for r in 0..=n1.min(n2) {
                    let p = rank_prob(n1, n2, r, q, RankFormula::Product).unwrap();
                    agree &= p == rank_prob(n1, n2, r, q, RankFormula::Sum).unwrap();
                    total += p;
                }
                sums &= total.is_one();
            }
        }
    }
    let shapes: Vec<(u32, usize, usize)> =
        [2u32, 3, 5].iter().flat_map(|&q| [(q, 2, 2), (q, 3, 5), (q, 4, 4), (q, 6, 3), (q, 6, 6)]).collect();
    let (worst, freq_ok) = rank_frequency_check(&shapes, 100_000, 8).unwrap();
    let r222 = rank_prob(2, 2, 2, 2, RankFormula::Sum).unwrap();
    vec![
        report(8, "sum and product formulas agree", agree, "q in {2,3,5}, dims <= 8"),
        report(8, "rank law sums to one", sums, "q in {2,3,5}, dims <= 8"),
        report(
            8,
            "empirical frequencies within 4 sigma",
            freq_ok && worst <= RANK_Z,
            format!("10^5 matrices per shape, largest |z| {worst:.3}"),
        ),
        report(8, "R_2(2,2,2) = 3/8", r222 == rational(3, 8), r222.to_string()),
    ]
}

fn criterion_09_linear_learner() -> Vec<Line> {
    let loss = expected_loss_exact(1, 1, 2).unwrap().l_bar;
    let mut results = vec![report(9, "expected_loss_exact(1,1,2) = 1/8", loss == rational(1, 8), loss.to_string())];

    let case2 = linear_mse_mc(10, 2, 8, 11, LINEAR_TRIALS, 92).unwrap();
    results.push(report(
        9,
        "case 2 (n=10, m=5, d=8, q=11) at least 0.5",
        case2.value >= CASE2_FLOOR,
        format!("{:.5} +- {:.5}", case2.value, case2.std_error),
    ));

    let ratio_test = |label: &str, n: usize, k: usize, q: u64, slow_d: usize, fast_d: usize| {
        let before = linear_mse_mc(n, k, slow_d, q, LINEAR_TRIALS, 93).unwrap();
        let after = linear_mse_mc(n, k, fast_d, q, LINEAR_TRIALS, 94).unwrap();
        let ratio = before.value / after.value;
        let need = q as f64 * (1.0 - RATIO_TOL);
        report(
            9,
            label,
            ratio >= need,
            format!("mse {:.6e} -> {:.6e}, ratio {ratio:.3} (needs >= {need:.2})", before.value, after.value),
        )
    };
    results.push(ratio_test("case 1 decay (n=4, k=2, q=3, d 8 -> 9)", 4, 2, 3, 8, 9));
    results.push(ratio_test("case 3 decay (n=10, k=2, q=11, d 5 -> 4)", 10, 2, 11, 5, 4));
    results
}

fn criterion_10_squarewave_factorization() -> Vec<Line> {
    let mut count = 0;
    let mut bad = Vec::new();
    for n in 2..=18 {
        for m in (1..=n / 2).filter(|m| n % m == 0) {
            count += 1;
            if cov_exact_factorized(n, m).unwrap() != sq_brute_force(n, m).unwrap() {
                bad.push((n, m));
            }
        }
    }
    vec![report(
        10,
        "factorized covariance equals brute force for n <= 18",
        bad.is_empty(),
        format!("{count} pairs, failures {bad:?}"),
    )]
}

fn criterion_11_squarewave_scaling() -> Vec<Line> {
    let k = squarewave_constants();
    let mut results = vec![
        report(11, "c0 = 0.0424", (k.c0 - 0.0424).abs() <= CONSTANT_TOL, format!("{:.8}", k.c0)),
        report(11, "c1 = 0.0212", (k.c1 - 0.0212).abs() <= CONSTANT_TOL, format!("{:.8}", k.c1)),
    ];
    let within = |m: usize, ratio: usize| {
        let cov = to_f64(&cov_exact_factorized(m * (ratio + 2), m).unwrap());
        let err = (m as f64 * cov - k.c0).abs();
        (err, k.delta(ratio as f64) + KAPPA * (m as f64).powf(-0.5))
    };
    for m in [64, 144, 256] {
        for ratio in [1, 2] {
            let (err, bound) = within(m, ratio);
            results.push(report(
                11,
                &format!("|m cov - c0| bound at m={m}, R={ratio}"),
                err <= bound,
                format!("{err:.3e} <= {bound:.3e}"),
            ));
        }
    }
    for ratio in [1, 2] {
        let smallest = (1..=64).find(|&m| {
            (m..=64).all(|mm| {
                let (e, b) = within(mm, ratio);
                e <= b
            })
        });
        results
            .push(info(11, format!("smallest m from which the bound holds through m=64 at R={ratio}: {smallest:?}")));
    }
    results
}

fn criterion_12_theta_identity() -> Vec<Line> {
    let worst = (0..1000)
        .map(|i| {
            let delta = i as f64 / 1000.0;
            (theta_eval(delta, ThetaMethod::Lattice, 8).unwrap() - theta_eval(delta, ThetaMethod::Series, 8).unwrap())
                .abs()
        })
        .fold(0.0f64, f64::max);
    let half = theta_eval(0.5, ThetaMethod::Lattice, 8)
        .unwrap()
        .abs()
        .max(theta_eval(0.5, ThetaMethod::Series, 8).unwrap().abs());
    vec![
        report(12, "lattice and series agree on 1000 points", worst <= THETA_TOL, format!("largest gap {worst:.3e}")),
        report(12, "theta(1/2) = 0", half <= THETA_TOL, format!("{half:.3e}")),
    ]
}

fn criterion_13_bound_suite() -> Vec<Line> {
    let mut violations = Vec::new();
    let mut checks = 0;
    for seed in 0..BOUND_INSTANCES {
        let inst = random_instance(1000 + seed).unwrap();
        let r = decompose(&inst.rule, &inst.dist, inst.n, inst.k, Mode::exact()).unwrap();
        let p = stability_estimates(&inst.rule, &inst.dist, inst.n, inst.n / inst.k, Mode::exact()).unwrap();
        for c in bound_suite(&r, &p).unwrap() {
            checks += 1;
            if !c.holds {
                violations.push(format!("seed {}: {} ({:.4e} > {:.4e})", 1000 + seed, c.name, c.lhs, c.rhs));
            }
        }
    }
    let p = coset_uniformity_p_value(10_000, 13).unwrap();
    vec![
        report(
            13,
            "bound suite on randomized small instances",
            violations.is_empty(),
            format!("{BOUND_INSTANCES} instances, {checks} checks, violations {violations:?}"),
        ),
        info(13, format!("coset sampling chi-square p-value {p:.4}")),
    ]
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn criterion_14_determinism() -> Vec<Line> {
    let half = FiniteDistribution::bernoulli(rational(1, 3)).unwrap();
    let mc = |threads| {
        in_pool(threads, || {
            (
                mc_functional(&majority_rule(), &half, 6, 3, Functional::FoldCov, 20_000, 77).unwrap(),
                linear_mse_mc(6, 2, 5, 3, 20_000, 78).unwrap(),
            )
        })
    };
    let csv = |threads| {
        in_pool(threads, || {
            let mut out = Vec::new();
            for (command, text) in [
                (Command::LinearMse, "n=6\nk=2\nq=3\nd=4,5\ntrials=5000\nseed=3"),
                (Command::Decompose, "n=6\nk=3\nmode=mc\ntrials=5000\nseed=4"),
                (Command::MajorityMinimizer, "n=120"),
                (Command::SquarewaveCov, "m=4,9,16"),
                (Command::MinimaxSweep, "n=120\nk=2,3,4"),
            ] {
                let mut cfg = ExperimentConfig::new(command);
                cfg.apply_text(text).unwrap();
                out.push(render_csv(&run(&cfg).unwrap()).unwrap());
            }
            out
        })
    };
    let (a, b) = (mc(1), mc(4));
    let (x, y) = (csv(1), csv(4));
    vec![
        report(
            14,
            "Monte Carlo results identical across thread counts",
            a == b,
            format!("{:?} / {:?}", a.0.value, a.1.value),
        ),
        report(14, "CSV artifacts byte-identical across thread counts", x == y, format!("{} artifacts", x.len())),
    ]
}

fn main() {
    let criteria: [fn() -> Vec<Line>; 14] = [
        criterion_01_decomposition_identity,
        criterion_02_majority_brute_force,
        criterion_03_conditional_form,
        criterion_04_closed_forms,
        criterion_05_minimizer,
        criterion_06_sqrt_k_scaling,
        criterion_07_minimax_floor,
        criterion_08_rank_probabilities,
        criterion_09_linear_learner,
        criterion_10_squarewave_factorization,
        criterion_11_squarewave_scaling,
        criterion_12_theta_identity,
        criterion_13_bound_suite,
        criterion_14_determinism,
    ];
    let lines: Vec<Vec<Line>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|f| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let (mut passed, mut failed) = (0, 0);
    for line in lines.iter().flatten() {
        let tag = match line.pass {
            Some(true) => {
                passed += 1;
                "PASS"
            }
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "INFO",
        };
        println!("{tag} {}", line.text);
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
