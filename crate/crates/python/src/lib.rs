//! Python bindings. Exact values cross the boundary as `"p/q"` strings.

use std::collections::BTreeMap;

use cvrisk::combinatorics::{format_exact, parse_exact, to_f64};
use cvrisk::decomposition::{anticorr_fixture, decompose as decompose_report, Mode, Term};
use cvrisk::linfield::{
    expected_loss_exact as linear_loss, linear_mse_bound as linear_bound, rank_prob as rank_law, RankFormula,
};
use cvrisk::majority::{self, ApproxForm};
use cvrisk::squarewave::{self, ThetaMethod};
use cvrisk::verify::{self, Suite};
use cvrisk::{ConstantRule, FiniteDistribution};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: cvrisk::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn exact(r: cvrisk::Result<cvrisk::ExactValue>) -> PyResult<String> {
    r.map(|v| format_exact(&v)).map_err(py_err)
}

/// Exact majority fold covariance under fair-coin labels.
#[pyfunction]
fn cov_exact(n: usize, m: usize) -> PyResult<String> {
    exact(majority::cov_exact(n, m))
}

/// Asymptotic majority fold covariance; `form` is one of binomial, sublinear, m1, half, large.
#[pyfunction]
fn cov_approx(n: usize, m: usize, form: &str) -> PyResult<f64> {
    let form: ApproxForm = form.parse().map_err(py_err)?;
    majority::cov_approx(n, m, form).map_err(py_err)
}

/// Exact CV mean-squared error of majority with fold size `m`.
#[pyfunction]
fn mse_majority(n: usize, m: usize) -> PyResult<String> {
    exact(majority::mse_majority(n, m))
}

/// `(m_star, k_star)` minimizing the majority fold covariance.
#[pyfunction]
fn minimize_cov(n: usize) -> PyResult<(usize, usize)> {
    majority::minimize_cov(n).map(|r| (r.m_star, r.k_star)).map_err(py_err)
}

/// Probability that a uniform `n1 x n2` matrix over `F_q` has rank `r`.
#[pyfunction]
fn rank_prob(n1: usize, n2: usize, r: usize, q: u64) -> PyResult<String> {
    exact(rank_law(n1, n2, r, q, RankFormula::Product))
}

/// `(expected risk, risk variance)` of the linear learner on `n_train` points.
#[pyfunction]
fn expected_loss_exact(n_train: usize, d: usize, q: u64) -> PyResult<(String, String)> {
    let l = linear_loss(n_train, d, q).map_err(py_err)?;
    Ok((format_exact(&l.l_bar), format_exact(&l.variance)))
}

/// `(case number, leading-order size)` of the linear CV mean-squared error.
#[pyfunction]
fn linear_mse_bound(n: usize, m: usize, d: usize, q: u64) -> PyResult<(u8, f64)> {
    linear_bound(n, m, d, q).map(|(c, b)| (c.number(), b)).map_err(py_err)
}

/// `(estimate, standard error)` of the linear CV mean-squared error.
#[pyfunction]
fn linear_mse_mc(n: usize, k: usize, d: usize, q: u64, trials: usize, seed: u64) -> PyResult<(f64, f64)> {
    cvrisk::linfield::linear_mse_mc(n, k, d, q, trials, seed).map(|e| (e.value, e.std_error)).map_err(py_err)
}

/// Exact square-wave fold covariance.
#[pyfunction]
fn cov_exact_factorized(n: usize, m: usize) -> PyResult<String> {
    exact(squarewave::cov_exact_factorized(n, m))
}

/// `{"c0", "c1", "c_alpha"}` of the square-wave covariance.
#[pyfunction]
fn squarewave_constants() -> BTreeMap<&'static str, f64> {
    let k = squarewave::squarewave_constants();
    BTreeMap::from([("c0", k.c0), ("c1", k.c1), ("c_alpha", k.c_alpha)])
}

/// `(c0 / m, error bound)` for the square-wave covariance.
#[pyfunction]
fn predicted_cov(m: usize, ratio: usize) -> PyResult<(f64, f64)> {
    squarewave::predicted_cov(m, ratio).map_err(py_err)
}

/// Theta function by lattice or series summation.
#[pyfunction]
#[pyo3(signature = (delta, method = "series", truncation = 8))]
fn theta_eval(delta: f64, method: &str, truncation: usize) -> PyResult<f64> {
    let method = match method {
        "lattice" => ThetaMethod::Lattice,
        "series" => ThetaMethod::Series,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    squarewave::theta_eval(delta, method, truncation).map_err(py_err)
}

fn term(t: &Term) -> String {
    match t {
        Term::Exact(v) => format_exact(v),
        Term::Estimate(e) => e.value.to_string(),
    }
}

/// Exact decomposition terms for `rule` in majority, constant, anticorr.
pub fn decompose_terms(rule: &str, n: usize, k: usize, p: &str) -> cvrisk::Result<BTreeMap<&'static str, String>> {
    let p = parse_exact(p).ok_or_else(|| cvrisk::Error::InvalidParameter(format!("bad probability {p:?}")))?;
    let r = match rule {
        "majority" => {
            decompose_report(&majority::majority_rule(), &FiniteDistribution::bernoulli(p)?, n, k, Mode::exact())?
        }
        "constant" => {
            decompose_report(&ConstantRule { label: 0 }, &FiniteDistribution::bernoulli(p)?, n, k, Mode::exact())?
        }
        "anticorr" => {
            let (rule, dist) = anticorr_fixture(n)?;
            decompose_report(&rule, &dist, n, k, Mode::exact())?
        }
        other => return Err(cvrisk::Error::InvalidParameter(format!("unknown rule {other:?}"))),
    };
    Ok(BTreeMap::from([
        ("mse", term(&r.mse)),
        ("sls", term(&r.sls)),
        ("inter_fold_cov", term(&r.inter_fold_cov)),
        ("per_fold_noise", term(&r.per_fold_noise)),
        ("corr_hold", term(&r.corr_hold)),
        ("corr_risk", term(&r.corr_risk)),
        ("residual", term(&r.residual)),
        ("risk_spread", term(&r.risk_spread)),
    ]))
}

/// Exact five-term decomposition as a dict of `"p/q"` strings.
#[pyfunction]
#[pyo3(signature = (rule, n, k, p = "1/2"))]
fn decompose(rule: &str, n: usize, k: usize, p: &str) -> PyResult<BTreeMap<&'static str, String>> {
    decompose_terms(rule, n, k, p).map_err(py_err)
}

/// `[(module, invariant, passed, detail)]` of the invariant suite.
#[pyfunction]
#[pyo3(signature = (suite = "all", seed = 1))]
fn verify_suite(py: Python<'_>, suite: &str, seed: u64) -> PyResult<Vec<(String, String, bool, String)>> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let results = py.detach(|| verify::run(suite, seed));
    Ok(results.into_iter().map(|r| (r.module.to_string(), r.name, r.passed, r.detail)).collect())
}

/// Floating value of a `"p/q"` string.
#[pyfunction]
fn to_float(value: &str) -> PyResult<f64> {
    parse_exact(value).map(|v| to_f64(&v)).ok_or_else(|| PyValueError::new_err(format!("not a rational: {value:?}")))
}

#[pymodule]
fn cvrisk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(cov_exact, m)?)?;
    m.add_function(wrap_pyfunction!(cov_approx, m)?)?;
    m.add_function(wrap_pyfunction!(mse_majority, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_cov, m)?)?;
    m.add_function(wrap_pyfunction!(rank_prob, m)?)?;
    m.add_function(wrap_pyfunction!(expected_loss_exact, m)?)?;
    m.add_function(wrap_pyfunction!(linear_mse_bound, m)?)?;
    m.add_function(wrap_pyfunction!(linear_mse_mc, m)?)?;
    m.add_function(wrap_pyfunction!(cov_exact_factorized, m)?)?;
    m.add_function(wrap_pyfunction!(squarewave_constants, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_cov, m)?)?;
    m.add_function(wrap_pyfunction!(theta_eval, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    m.add_function(wrap_pyfunction!(to_float, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_terms() {
        let t = decompose_terms("anticorr", 2, 2, "1/2").unwrap();
        assert_eq!(t["mse"], "0");
        assert_eq!(t["sls"], "1/8");
        assert!(decompose_terms("nope", 2, 2, "1/2").is_err());
    }

    #[test]
    fn module_functions_from_python() {
        Python::attach(|py| {
            let m = PyModule::new(py, "cvrisk_py").unwrap();
            cvrisk_py(&m).unwrap();
            let cov: String = m.getattr("cov_exact").unwrap().call1((3, 1)).unwrap().extract().unwrap();
            assert_eq!(cov, majority::cov_exact(3, 1).map(|v| format_exact(&v)).unwrap());
            let err = m.getattr("cov_exact").unwrap().call1((5, 2));
            assert!(err.unwrap_err().is_instance_of::<PyValueError>(py));
            let theta: f64 = m.getattr("theta_eval").unwrap().call1((0.5,)).unwrap().extract().unwrap();
            assert!(theta.abs() < 1e-12);
        });
    }
}
