//! Linear functionals over a prime field: arithmetic, rank laws and the
//! randomized consistent learner.

pub mod field;
pub mod learner;
pub mod rank;

pub use field::{solve, solve_uniform, Echelon, FqMatrix, LinearHypothesis, PrimeField, SolutionCoset};
pub use learner::{
    expected_loss_exact, fold_noise_exact, linear_mse_bound, linear_mse_exact, linear_mse_mc, linear_rule,
    risk_given_rank, FoldNoise, LinearCase, LinearLoss, LinearMode, LinearRule,
};
pub use rank::{gaussian_coefficient, rank_asymptotics_check, rank_prob, RankDistribution, RankFormula, RANK_ENVELOPE};
