use cvrisk::combinatorics::{rational, to_f64};
use cvrisk::decomposition::{bound_suite, decompose, stability_estimates, Mode};
use cvrisk::engine::{exact_functional, mc_functional, population_risk, trial_rng, Functional, DEFAULT_BUDGET};
use cvrisk::linfield::{rank_prob, LinearHypothesis, PrimeField, RankFormula};
use cvrisk::majority::{cov_conditional, cov_exact};
use cvrisk::squarewave::{floor_over_sqrt, theta_eval, ThetaMethod};
use cvrisk::verify::random_instance;
use cvrisk::{cv_estimate, partition_folds, ExactValue, FiniteDistribution, LabeledPoint, LearningRule, SampleTuple};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn residual_is_exactly_zero(seed in any::<u64>()) {
        let inst = random_instance(seed).unwrap();
        let r = decompose(&inst.rule, &inst.dist, inst.n, inst.k, Mode::exact()).unwrap();
        prop_assert!(r.residual.exact().unwrap().is_zero());
    }

    #[test]
    fn bound_suite_holds(seed in any::<u64>()) {
        let inst = random_instance(seed).unwrap();
        let r = decompose(&inst.rule, &inst.dist, inst.n, inst.k, Mode::exact()).unwrap();
        let p = stability_estimates(&inst.rule, &inst.dist, inst.n, inst.n / inst.k, Mode::exact()).unwrap();
        for c in bound_suite(&r, &p).unwrap() {
            prop_assert!(c.holds, "{}: {} > {}", c.name, c.lhs, c.rhs);
            prop_assert_eq!(c.holds, c.slack >= 0.0);
        }
    }

    #[test]
    fn support_order_does_not_matter(seed in any::<u64>(), rot in 0usize..8) {
        let inst = random_instance(seed).unwrap();
        let s = inst.dist.len();
        let order: Vec<usize> = (0..s).map(|i| (i + rot) % s).collect();
        let permuted = inst.dist.permuted(&order).unwrap();
        for f in [Functional::Mse, Functional::FoldCov, Functional::Sls] {
            prop_assert_eq!(
                exact_functional(&inst.rule, &inst.dist, inst.n, inst.k, f, DEFAULT_BUDGET).unwrap(),
                exact_functional(&inst.rule, &permuted, inst.n, inst.k, f, DEFAULT_BUDGET).unwrap()
            );
        }
    }

    #[test]
    fn cv_estimate_invariant_under_block_permutation(seed in any::<u64>(), shift in 0usize..8) {
        let inst = random_instance(seed).unwrap();
        let scheme = partition_folds(inst.n, inst.k).unwrap();
        let mut rng = trial_rng(seed, 9);
        let pts: Vec<LabeledPoint> = (0..inst.n).map(|_| inst.dist.sample(&mut rng)).collect();
        let blocks = scheme.blocks();
        let moved: Vec<LabeledPoint> =
            (0..inst.k).flat_map(|i| pts[blocks[(i + shift) % inst.k].clone()].to_vec()).collect();
        prop_assert_eq!(
            cv_estimate(&inst.rule, &SampleTuple::new(pts).unwrap(), &scheme).unwrap(),
            cv_estimate(&inst.rule, &SampleTuple::new(moved).unwrap(), &scheme).unwrap()
        );
    }

    #[test]
    fn population_risk_is_a_probability(seed in any::<u64>()) {
        let inst = random_instance(seed).unwrap();
        let mut rng = trial_rng(seed, 10);
        let pts: Vec<LabeledPoint> = (0..inst.n).map(|_| inst.dist.sample(&mut rng)).collect();
        let r = population_risk(&inst.rule.train(&pts).unwrap(), &inst.dist).unwrap();
        prop_assert!(r >= ExactValue::zero() && r <= ExactValue::one());
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn monte_carlo_within_four_standard_errors(seed in any::<u64>()) {
        let inst = random_instance(seed).unwrap();
        for f in [Functional::Mse, Functional::Sls, Functional::FoldCov, Functional::PerFoldNoise,
                  Functional::CorrHold, Functional::CorrRisk, Functional::Mean, Functional::LossVar(inst.n)] {
            let exact = to_f64(&exact_functional(&inst.rule, &inst.dist, inst.n, inst.k, f, DEFAULT_BUDGET).unwrap());
            let est = mc_functional(&inst.rule, &inst.dist, inst.n, inst.k, f, 3000, seed).unwrap();
            prop_assert!((est.value - exact).abs() <= 4.0 * est.std_error + 1e-12,
                "{:?}: {} vs {} ± {}", f, exact, est.value, est.std_error);
        }
    }
}

proptest! {
    #[test]
    fn floor_over_sqrt_matches_big_integers(u in 0u64..(1 << 40), m in 1u64..(1 << 24)) {
        let oracle = (BigUint::from(u) * u / m).sqrt();
        prop_assert_eq!(BigUint::from(floor_over_sqrt(u, m)), oracle);
    }

    #[test]
    fn theta_forms_agree(delta in 0.0f64..1.0) {
        let a = theta_eval(delta, ThetaMethod::Lattice, 8).unwrap();
        let b = theta_eval(delta, ThetaMethod::Series, 8).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn majority_forms_agree(m in 1usize..20, k in 2usize..12) {
        let n = m * k;
        prop_assert_eq!(cov_exact(n, m).unwrap(), cov_conditional(n, m).unwrap());
    }

    #[test]
    fn rank_law_sums_to_one(q in prop::sample::select(vec![2u64, 3, 5, 7]), n1 in 0usize..7, n2 in 0usize..7) {
        let mut total = ExactValue::zero();
        for r in 0..=n1.min(n2) {
            let p = rank_prob(n1, n2, r, q, RankFormula::Sum).unwrap();
            prop_assert_eq!(&p, &rank_prob(n1, n2, r, q, RankFormula::Product).unwrap());
            total += p;
        }
        prop_assert!(total.is_one());
    }

    #[test]
    fn linear_risk_is_zero_or_one_minus_inverse_q(
        q in prop::sample::select(vec![2u32, 3, 5]),
        seed in any::<u64>(),
    ) {
        let field = PrimeField::new(q).unwrap();
        let mut rng = trial_rng(seed, 0);
        let truth = field.random_vector(3, &mut rng);
        let coeffs = field.random_vector(3, &mut rng);
        let dist = FiniteDistribution::uniform_linear(q, &truth).unwrap();
        let r = LinearHypothesis { coeffs: coeffs.clone(), q }.to_hypothesis().support_risk(&dist).unwrap();
        let expected = if coeffs == truth { ExactValue::zero() } else { rational(q as i64 - 1, q as i64) };
        prop_assert_eq!(r, expected);
    }
}
