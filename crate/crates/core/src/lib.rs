//! Mean-squared error of k-fold cross-validation for risk estimation.
//!
//! The crate is organised around a small set of domain types (finite
//! distributions, symmetric learning rules, fold schemes) and two evaluation
//! engines: an exhaustive engine in exact rational arithmetic and a seeded,
//! schedule-independent Monte Carlo engine. On top of these sit
//!
//! * [`decomposition`]: the five-term MSE decomposition, stability notions and
//!   the inequality suite that bounds each term;
//! * [`majority`]: exact, conditional and asymptotic fold covariance of the
//!   majority vote rule and the fold-count minimiser;
//! * [`linfield`]: prime-field linear algebra, matrix rank distributions and the
//!   randomized consistent linear learner;
//! * [`squarewave`]: the square-wave rule, its factorized fold covariance and
//!   the theta-series constants that govern it.

pub mod combinatorics;
pub mod decomposition;
pub mod engine;
pub mod error;
pub mod linfield;
pub mod majority;
pub mod rule;
pub mod squarewave;
pub mod types;
pub mod verify;

pub use engine::{
    cv_estimate, exact_functional, mc_functional, population_risk, EstimateWithError, Functional, DEFAULT_BUDGET,
};
pub use error::{Error, Result};
pub use rule::{ConstantRule, LearningRule};
pub use types::{
    partition_folds, ExactValue, Feature, FiniteDistribution, FoldScheme, Hypothesis, HypothesisMixture, LabeledPoint,
    Predictor, SampleTuple,
};
