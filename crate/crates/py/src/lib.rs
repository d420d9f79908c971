//! Python bindings: the `ltispec` extension module. Matrices cross the
//! boundary as nested lists (row-major); complex spectra become Python
//! complex numbers. All indices on this surface are 0-based.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ltispec_core as core;

fn to_py_err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(PyValueError::new_err(format!("{name} must be non-empty")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{name} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn complex_rows_of(m: &DMatrix<Complex<f64>>) -> Vec<Vec<Complex<f64>>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// A stochastic LTI system `dx = J x dt + L dW` with diagonal diffusion.
#[pyclass(name = "System")]
#[derive(Clone)]
struct PySystem {
    inner: core::LtiSystem,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (j, l=None, d=None))]
    fn new(j: Vec<Vec<f64>>, l: Option<Vec<Vec<f64>>>, d: Option<Vec<f64>>) -> PyResult<Self> {
        let jm = matrix_from_rows(&j, "J")?;
        let n = jm.nrows();
        let lm = match l {
            Some(rows) => matrix_from_rows(&rows, "L")?,
            None => DMatrix::identity(n, n),
        };
        let m = lm.ncols();
        let dv = match d {
            Some(v) => DVector::from_vec(v),
            None => DVector::from_element(m, 1.0),
        };
        core::LtiSystem::new(jm, lm, dv, None)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn j(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.jacobian())
    }

    /// Routh/Schur stability verdict: "stable" | "unstable" | "marginal".
    fn hurwitz(&self) -> &'static str {
        core::hurwitz_check(self.inner.jacobian()).as_str()
    }

    /// Noise covariance C = L D Lᵀ.
    fn covariance(&self) -> Vec<Vec<f64>> {
        rows_of(core::build_covariance(&self.inner).matrix())
    }

    /// S(ω) by the direct matrix solve (the reference oracle).
    fn matrix_oracle(&self, omega: f64) -> PyResult<Vec<Vec<Complex<f64>>>> {
        core::matrix_oracle(&self.inner, omega)
            .map(|s| complex_rows_of(&s.s))
            .map_err(to_py_err)
    }

    /// Stationary covariance from the Lyapunov equation JΣ + ΣJᵀ + C = 0.
    fn stationary_covariance(&self) -> PyResult<Vec<Vec<f64>>> {
        let c = core::build_covariance(&self.inner);
        core::stationary_covariance(self.inner.jacobian(), c.matrix())
            .map(|s| rows_of(&s))
            .map_err(to_py_err)
    }

    /// Element-wise numerator polynomials (p, pp) of entry (i, j), 0-based.
    fn element_coeffs(&self, i: usize, j: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let ec = if i == j {
            core::auto_coeffs(&self.inner, i)
        } else {
            core::cross_coeffs(&self.inner, i, j)
        }
        .map_err(to_py_err)?;
        Ok((ec.p.coeffs().to_vec(), ec.pp.coeffs().to_vec()))
    }

    /// Denominator coefficients q_0..q_n via Bell/Hessenberg.
    fn denominator(&self) -> PyResult<Vec<f64>> {
        core::denominator_coeffs(self.inner.jacobian())
            .map(|q| q.coeffs().to_vec())
            .map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("System(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// The rational PSD: symmetric P stacks, antisymmetric P′ stacks, and the
/// monic even denominator.
#[pyclass(name = "Rational")]
struct PyRational {
    sr: core::SpectralRational,
    j: DMatrix<f64>,
    c: core::NoiseCovariance,
}

#[pymethods]
impl PyRational {
    #[getter]
    fn q(&self) -> Vec<f64> {
        self.sr.q().coeffs().to_vec()
    }

    #[getter]
    fn p(&self) -> Vec<Vec<Vec<f64>>> {
        self.sr.p_mats().iter().map(rows_of).collect()
    }

    #[getter]
    fn pp(&self) -> Vec<Vec<Vec<f64>>> {
        self.sr.pp_mats().iter().map(rows_of).collect()
    }

    /// S(ω) from the rational coefficients.
    fn evaluate(&self, omega: f64) -> PyResult<Vec<Vec<Complex<f64>>>> {
        self.sr
            .evaluate(omega)
            .map(|s| complex_rows_of(&s))
            .map_err(to_py_err)
    }

    /// Relative residuals of the two redundant terminal identities.
    fn residuals(&self) -> (f64, f64) {
        let rep = core::residuals(&self.sr, &self.j, &self.c);
        (rep.rel_r1(), rep.rel_r2())
    }

    /// Horner condition number of the denominator at ω (≫1 flags
    /// double-precision loss in the coefficient representation).
    fn q_condition(&self, omega: f64) -> f64 {
        self.sr.q_condition(omega)
    }

    /// (1/2π)∫S(ω)dω by adaptive quadrature with the analytic tail.
    fn integrate(&self) -> PyResult<Vec<Vec<f64>>> {
        core::integrate_psd(&self.sr, &core::QuadratureConfig::default())
            .map(|m| rows_of(&m))
            .map_err(to_py_err)
    }
}

/// Full recursive solve of the rational PSD coefficients.
#[pyfunction]
fn solve(system: &PySystem) -> PyResult<PyRational> {
    let c = core::build_covariance(&system.inner);
    let sr = core::solve_recursive(system.inner.jacobian(), &c).map_err(to_py_err)?;
    Ok(PyRational {
        sr,
        j: system.inner.jacobian().clone(),
        c,
    })
}

/// Builds a named model (optionally overriding parameters), finds its
/// fixed point, and linearizes. Returns (system, fixed_point, labels).
#[pyfunction]
#[pyo3(signature = (name, params=None))]
fn model(
    name: &str,
    params: Option<HashMap<String, f64>>,
) -> PyResult<(PySystem, Vec<f64>, Vec<String>)> {
    let mut spec = core::ModelSpec::by_name(name).map_err(to_py_err)?;
    if let Some(overrides) = params {
        for (k, v) in overrides {
            spec.set_param(&k, v).map_err(to_py_err)?;
        }
    }
    let fp = core::find_fixed_point(&spec).map_err(to_py_err)?;
    let sys = core::linearize(&spec, &fp).map_err(to_py_err)?;
    Ok((
        PySystem { inner: sys },
        fp.x.iter().copied().collect(),
        spec.labels(),
    ))
}

/// Euler–Maruyama simulation of a named model plus Welch estimation for
/// the requested (i, j) pairs. Returns (freqs, values) with one complex
/// list per pair.
#[pyfunction]
#[pyo3(signature = (name, pairs, params=None, dt=None, t_total=2000.0, burn_in=100.0, seed=0, segment_len=16384))]
#[allow(clippy::too_many_arguments)]
fn simulate_welch(
    name: &str,
    pairs: Vec<(usize, usize)>,
    params: Option<HashMap<String, f64>>,
    dt: Option<f64>,
    t_total: f64,
    burn_in: f64,
    seed: u64,
    segment_len: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<Complex<f64>>>)> {
    let mut spec = core::ModelSpec::by_name(name).map_err(to_py_err)?;
    if let Some(overrides) = params {
        for (k, v) in overrides {
            spec.set_param(&k, v).map_err(to_py_err)?;
        }
    }
    let fp = core::find_fixed_point(&spec).map_err(to_py_err)?;
    let cfg = core::SimConfig::new(
        dt.unwrap_or_else(|| spec.default_dt()),
        t_total,
        burn_in,
        seed,
        fp.x.clone(),
    )
    .map_err(to_py_err)?;
    let traj =
        core::simulate(|x| spec.drift(x), |x| spec.dispersion(x), &cfg).map_err(to_py_err)?;
    let wcfg = core::WelchConfig {
        segment_len,
        ..core::WelchConfig::default()
    };
    let est = core::welch_spectrum(&traj, &pairs, &wcfg).map_err(to_py_err)?;
    Ok((est.freqs, est.values))
}

#[pymodule]
fn ltispec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyRational>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(model, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_welch, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
