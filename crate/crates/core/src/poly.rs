//! Even polynomials, trace-power sequences, and Bell polynomials.
//!
//! The denominator of the spectral rational function is
//! `Q(ω) = Π_i (λ_i² + ω²)`, an even polynomial whose coefficients are the
//! elementary symmetric polynomials of the squared eigenvalues of the
//! Jacobian. Those are computed here without any eigendecomposition: trace
//! powers feed Newton's identities in the form of a Bell polynomial, which
//! is the determinant of a small upper Hessenberg matrix evaluated by the
//! O(k²) leading-minor recurrence.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A real polynomial in even powers of ω: `p(ω) = Σ_α coeffs[α]·ω^{2α}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenPolynomial {
    coeffs: Vec<f64>,
}

impl EvenPolynomial {
    /// Wraps a coefficient list; at least one coefficient is required.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "EvenPolynomial needs >= 1 coefficient");
        Self { coeffs }
    }

    /// The zero polynomial with `len` stored coefficients (`len >= 1`).
    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len.max(1)])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of stored coefficients (degree in ω² plus one).
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Horner evaluation in ω².
    pub fn eval(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * w2 + c)
    }

    /// Evaluates dp/dω = Σ_α 2α·coeffs[α]·ω^{2α−1}.
    pub fn eval_deriv(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        let mut acc = 0.0;
        for (alpha, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * w2 + 2.0 * alpha as f64 * c;
        }
        acc * omega
    }

    /// Exact coefficient-wise sum.
    pub fn add(&self, other: &EvenPolynomial) -> EvenPolynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        EvenPolynomial::new(out)
    }

    /// Exact coefficient convolution; product degree is the sum of degrees.
    pub fn mul(&self, other: &EvenPolynomial) -> EvenPolynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        EvenPolynomial::new(out)
    }

    pub fn scale(&self, factor: f64) -> EvenPolynomial {
        EvenPolynomial::new(self.coeffs.iter().map(|c| c * factor).collect())
    }
}

/// Evaluates an even polynomial at ω (free-function form of [`EvenPolynomial::eval`]).
pub fn eval_even(p: &EvenPolynomial, omega: f64) -> f64 {
    p.eval(omega)
}

/// Trace powers `r^k = Tr(A^{2k})` (squared variant) or `Tr(A^k)` (plain).
#[derive(Debug, Clone)]
pub struct TracePowerSequence {
    values: Vec<f64>,
    squared: bool,
}

impl TracePowerSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn squared(&self) -> bool {
        self.squared
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes `k_max` trace powers of `a` by repeated multiplication with an
/// accumulated power; no eigendecomposition is involved.
///
/// Entry `k` (1-based) is `Tr(A^{2k})` when `squared`, else `Tr(A^k)`.
pub fn trace_powers(a: &DMatrix<f64>, k_max: usize, squared: bool) -> Result<TracePowerSequence> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "trace_powers needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let base = if squared { a * a } else { a.clone() };
    let mut values = Vec::with_capacity(k_max);
    let mut power = base.clone();
    values.push(power.trace());
    for _ in 1..k_max {
        power = &power * &base;
        values.push(power.trace());
    }
    Ok(TracePowerSequence { values, squared })
}

/// Determinant of the upper Hessenberg matrix `𝔹^k(r)` built from trace
/// powers `r = (r¹, …, r^k)`: entries `−r^{j−i+1}` on and above the
/// diagonal, `−i` on the subdiagonal of row `i+1`.
///
/// Evaluated by the leading-principal-minor recurrence in O(k²) operations.
/// `k = 0` (empty input) returns 1 by convention.
pub fn bell_hessenberg(r: &[f64]) -> f64 {
    let k = r.len();
    // d[m] = det of the m×m leading principal submatrix.
    let mut d = vec![0.0; k + 1];
    d[0] = 1.0;
    for m in 1..=k {
        let mut acc = 0.0;
        // coef carries (m−1)!/(row−1)! as `row` walks from m down to 1.
        let mut coef = 1.0;
        for row in (1..=m).rev() {
            acc += coef * r[m - row] * d[row - 1];
            coef *= (row - 1) as f64;
        }
        d[m] = -acc;
    }
    d[k]
}

/// All leading Hessenberg determinants `B(r^0), …, B(r^k)` in one pass.
pub(crate) fn bell_hessenberg_all(r: &[f64]) -> Vec<f64> {
    let k = r.len();
    let mut d = vec![0.0; k + 1];
    d[0] = 1.0;
    for m in 1..=k {
        let mut acc = 0.0;
        let mut coef = 1.0;
        for row in (1..=m).rev() {
            acc += coef * r[m - row] * d[row - 1];
            coef *= (row - 1) as f64;
        }
        d[m] = -acc;
    }
    d
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Power-of-two time scale near the geometric mean of the eigenvalue
/// magnitudes, `|det J|^{1/n}`, with a Frobenius fallback for singular
/// inputs. Dividing the Jacobian by `s` (an exact floating-point
/// operation) centers the eigenvalue cloud multiplicatively, so the
/// trailing coefficients `q̃_0 ≈ Πλ̃² ≈ 1` stay representable; results are
/// unscaled exactly afterwards via `S(ω; J, C) = s⁻²·S(ω/s; J/s, C)`.
pub(crate) fn time_scale(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows().max(1) as f64;
    let det = j.clone().lu().determinant().abs();
    let est = if det.is_finite() && det > 0.0 {
        det.powf(1.0 / n)
    } else {
        j.norm() / n.sqrt()
    };
    if !(est.is_finite() && est > 0.0) {
        return 1.0;
    }
    2.0f64.powi(est.log2().round() as i32)
}

/// Coefficients `q_0, …, q_n` of `Q(ω) = Π_i (λ_i² + ω²) = |det(J + iωI)|²`,
/// with `q_n = 1`, computed as `q_α = (−1)^{n−α}/(n−α)! · B(r^{n−α}(J²))`.
pub fn denominator_coeffs(j: &DMatrix<f64>) -> Result<EvenPolynomial> {
    if !j.is_square() {
        return Err(Error::Dimension(format!(
            "denominator_coeffs needs a square Jacobian, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    let n = j.nrows();
    if n == 0 {
        return Ok(EvenPolynomial::new(vec![1.0]));
    }
    let scale = time_scale(j);
    let scaled = j / scale;
    let traces = trace_powers(&scaled, n, true)?;
    let bells = bell_hessenberg_all(traces.values());
    let mut q = vec![0.0; n + 1];
    for (alpha, entry) in q.iter_mut().enumerate() {
        let k = n - alpha;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *entry = sign / factorial(k) * bells[k] * scale.powi(2 * k as i32);
    }
    Ok(EvenPolynomial::new(q))
}

/// Coefficients `c_0, …, c_k` of `det(A + xI) = Σ_j c_j x^j` via the same
/// Bell/Hessenberg machinery applied to plain trace powers. With `x = iω`
/// these are the (real) coefficients of `det(A + iωI)` in powers of `iω`,
/// the building block of the canonical functions.
pub fn det_shift_coeffs(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "det_shift_coeffs needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let k = a.nrows();
    if k == 0 {
        return Ok(vec![1.0]);
    }
    let traces = trace_powers(a, k, false)?;
    let bells = bell_hessenberg_all(traces.values());
    let mut c = vec![0.0; k + 1];
    for (j, entry) in c.iter_mut().enumerate() {
        let m = k - j;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        *entry = sign / factorial(m) * bells[m];
    }
    Ok(c)
}
