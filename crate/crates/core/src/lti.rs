//! The stochastic LTI system `dx = J x dt + L dW` and its validation:
//! noise covariance assembly, LDL reduction of rank-deficient covariances,
//! and a Routh–Hurwitz stability test built on the Leverrier–Faddeev
//! characteristic polynomial (no eigensolver anywhere).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Linear time-invariant SDE: Jacobian `J` (n×n, 1/time), dispersion `L`
/// (n×m), and diagonal diffusion `D` with entries `σ_i² ≥ 0`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    j: DMatrix<f64>,
    l: DMatrix<f64>,
    d: DVector<f64>,
    labels: Option<Vec<String>>,
}

impl LtiSystem {
    pub fn new(
        j: DMatrix<f64>,
        l: DMatrix<f64>,
        d: DVector<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if !j.is_square() {
            return Err(Error::Dimension(format!(
                "J must be square, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        let n = j.nrows();
        if l.nrows() != n {
            return Err(Error::Dimension(format!(
                "L must have {} rows to match J, got {}",
                n,
                l.nrows()
            )));
        }
        let m = l.ncols();
        if d.len() != m {
            return Err(Error::Dimension(format!(
                "D must have {} diagonal entries to match L's columns, got {}",
                m,
                d.len()
            )));
        }
        if let Some(neg) = d.iter().find(|&&x| x < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diffusion entries must be nonnegative, got {neg}"
            )));
        }
        if let Some(ref names) = labels {
            if names.len() != n {
                return Err(Error::Dimension(format!(
                    "expected {} labels, got {}",
                    n,
                    names.len()
                )));
            }
        }
        Ok(Self { j, l, d, labels })
    }

    /// System with `L = I` and unit diffusion.
    pub fn from_jacobian(j: DMatrix<f64>) -> Result<Self> {
        let n = j.nrows();
        Self::new(j, DMatrix::identity(n, n), DVector::from_element(n, 1.0), None)
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    pub fn m(&self) -> usize {
        self.l.ncols()
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn dispersion(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn diffusion_diag(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// `L·diag(σ_i)`: maps standard-normal increments to state noise, for
    /// simulation.
    pub fn scaled_dispersion(&self) -> DMatrix<f64> {
        let mut l = self.l.clone();
        for (c, s) in self.d.iter().enumerate() {
            let s = s.sqrt();
            for r in 0..l.nrows() {
                l[(r, c)] *= s;
            }
        }
        l
    }

    /// Relabels the variables so index `i` moves to the front, swapping
    /// rows/columns of `J` and the matching rows of `L` plus noise
    /// channels when `L` is square. Used by the closed-form auto-spectrum
    /// path, which is written for the first variable.
    pub fn permute_to_front(&self, i: usize) -> Result<LtiSystem> {
        let n = self.n();
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "index {i} out of range for dimension {n}"
            )));
        }
        let mut sys = self.clone();
        if i == 0 {
            return Ok(sys);
        }
        sys.j.swap_rows(0, i);
        sys.j.swap_columns(0, i);
        sys.l.swap_rows(0, i);
        if self.m() == n {
            sys.l.swap_columns(0, i);
            sys.d.swap_rows(0, i);
        }
        if let Some(ref mut names) = sys.labels {
            names.swap(0, i);
        }
        Ok(sys)
    }
}

/// Symmetric PSD noise covariance `C = L D Lᵀ`.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    c: DMatrix<f64>,
}

impl NoiseCovariance {
    /// Wraps a symmetric PSD matrix supplied directly (symmetrized).
    pub fn from_matrix(c: DMatrix<f64>) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::Dimension("covariance must be square".into()));
        }
        let sym = (&c + c.transpose()) * 0.5;
        Ok(Self { c: sym })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }
}

/// `C = L D Lᵀ`, symmetrized as `(C + Cᵀ)/2`.
pub fn build_covariance(sys: &LtiSystem) -> NoiseCovariance {
    let ld = sys.dispersion() * DMatrix::from_diagonal(sys.diffusion_diag());
    let c = ld * sys.dispersion().transpose();
    let sym = (&c + c.transpose()) * 0.5;
    NoiseCovariance { c: sym }
}

/// LDLᵀ factorization of a PSD covariance with zero-pivot skipping:
/// returns unit-lower-triangular `L′` and the diagonal of `D′` such that
/// `L′ D′ L′ᵀ = C`. Pivots within `1e−12·‖C‖` of zero are clamped to zero
/// and their columns skipped, which requires the remaining column of `C`
/// to vanish as well — otherwise the covariance is not PSD.
pub fn ldl_reduce(cov: &NoiseCovariance) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let c = cov.matrix();
    let n = c.nrows();
    let scale = c.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::zeros(n);
    for jcol in 0..n {
        let mut dj = c[(jcol, jcol)];
        for k in 0..jcol {
            dj -= l[(jcol, k)] * l[(jcol, k)] * d[k];
        }
        if dj < -tol {
            return Err(Error::IndefiniteCovariance(format!(
                "negative pivot {dj:.3e} at column {jcol}"
            )));
        }
        if dj.abs() <= tol {
            // Rank-deficient direction: the rest of the column must vanish.
            d[jcol] = 0.0;
            for i in (jcol + 1)..n {
                let mut v = c[(i, jcol)];
                for k in 0..jcol {
                    v -= l[(i, k)] * l[(jcol, k)] * d[k];
                }
                if v.abs() > tol {
                    return Err(Error::IndefiniteCovariance(format!(
                        "zero pivot at column {jcol} with nonzero residual {v:.3e} below it"
                    )));
                }
                l[(i, jcol)] = 0.0;
            }
            continue;
        }
        d[jcol] = dj;
        for i in (jcol + 1)..n {
            let mut v = c[(i, jcol)];
            for k in 0..jcol {
                v -= l[(i, k)] * l[(jcol, k)] * d[k];
            }
            l[(i, jcol)] = v / dj;
        }
    }
    Ok((l, d))
}

/// Stability verdict from the Routh–Hurwitz table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    /// A Routh pivot fell below the tolerance relative to its row scale;
    /// eigenvalues are on (or numerically indistinguishable from) the
    /// imaginary axis and the spectrum diverges at resonance.
    Marginal,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Unstable => "unstable",
            StabilityVerdict::Marginal => "marginal",
        }
    }
}

/// Monic characteristic polynomial of `J`, `det(sI − J) = s^n + c_1 s^{n−1}
/// + … + c_n`, by the classical trace-and-subtract recursion:
/// `A_1 = J`, `c_k = −Tr(A_k)/k`, `A_{k+1} = J(A_k + c_k I)`.
pub fn faddeev_leverrier(j: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !j.is_square() {
        return Err(Error::Dimension("characteristic polynomial needs a square matrix".into()));
    }
    let n = j.nrows();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut a = j.clone();
    for k in 1..=n {
        let c = -a.trace() / k as f64;
        coeffs.push(c);
        if k < n {
            a = j * (&a + DMatrix::<f64>::identity(n, n) * c);
        }
    }
    Ok(coeffs)
}

const ROUTH_PIVOT_TOL: f64 = 1e-10;

/// Beyond this size the trace-and-subtract characteristic coefficients
/// lose their trailing entries to cancellation in double precision and the
/// Routh table misclassifies; a Schur sweep takes over.
const ROUTH_MAX_DIM: usize = 12;

/// Stability of `J`. For `n ≤ 12` the verdict comes from the
/// Routh–Hurwitz table on the Leverrier–Faddeev characteristic
/// polynomial; `Marginal` is reported when a pivot magnitude falls below
/// `1e−10` relative to the scale of the rows that produced it. Larger
/// systems are classified by the sign of the largest eigenvalue real part
/// from a Schur decomposition, with the same relative tolerance band.
pub fn hurwitz_check(j: &DMatrix<f64>) -> StabilityVerdict {
    if j.nrows() > ROUTH_MAX_DIM {
        return schur_verdict(j);
    }
    let coeffs = match faddeev_leverrier(j) {
        Ok(c) => c,
        Err(_) => return StabilityVerdict::Marginal,
    };
    routh_verdict(&coeffs)
}

fn schur_verdict(j: &DMatrix<f64>) -> StabilityVerdict {
    let schur = match nalgebra::linalg::Schur::try_new(j.clone(), f64::EPSILON, 10_000) {
        Some(s) => s,
        None => return StabilityVerdict::Marginal,
    };
    let eigs = schur.complex_eigenvalues();
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tol = ROUTH_PIVOT_TOL * radius.max(f64::MIN_POSITIVE);
    if max_re.abs() <= tol {
        StabilityVerdict::Marginal
    } else if max_re > 0.0 {
        StabilityVerdict::Unstable
    } else {
        StabilityVerdict::Stable
    }
}

/// Routh table on monic coefficients `[1, c_1, …, c_n]` of `det(sI − J)`.
pub(crate) fn routh_verdict(coeffs: &[f64]) -> StabilityVerdict {
    let n = coeffs.len() - 1;
    if n == 0 {
        return StabilityVerdict::Stable;
    }
    let width = n / 2 + 1;
    let row_of = |start: usize| -> Vec<f64> {
        (0..width)
            .map(|i| coeffs.get(start + 2 * i).copied().unwrap_or(0.0))
            .collect()
    };
    let mut prev = row_of(0);
    let mut cur = row_of(1);
    let mut pivots = vec![prev[0]];
    for _ in 1..=n {
        let scale = prev
            .iter()
            .chain(cur.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let pivot = cur[0];
        if pivot.abs() <= ROUTH_PIVOT_TOL * scale.max(f64::MIN_POSITIVE) {
            return StabilityVerdict::Marginal;
        }
        pivots.push(pivot);
        let mut next = vec![0.0; width];
        for i in 0..width - 1 {
            next[i] = (pivot * prev[i + 1] - prev[0] * cur[i + 1]) / pivot;
        }
        prev = cur;
        cur = next;
    }
    if pivots.iter().all(|&p| p > 0.0) {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable
    }
}
