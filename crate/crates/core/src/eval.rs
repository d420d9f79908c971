//! Reference evaluation utilities: the direct matrix solve for `S(ω)`,
//! coherence, the Lyapunov stationary covariance, and quadrature of the
//! rational spectrum back to that covariance. These are the independent
//! checks the rational-function solvers are validated against, so none of
//! them shares code with the recursive or element-wise paths.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{build_covariance, LtiSystem};
use crate::recursive::SpectralRational;

/// The PSD matrix at one frequency: complex Hermitian, real nonnegative
/// diagonal.
#[derive(Debug, Clone)]
pub struct SpectrumMatrix {
    pub omega: f64,
    pub s: DMatrix<Complex<f64>>,
}

impl SpectrumMatrix {
    pub fn n(&self) -> usize {
        self.s.nrows()
    }
}

/// Direct evaluation of `S(ω) = (iωI+J)⁻¹ C (−iωI+J)⁻ᵀ` via two complex
/// linear solves with partial pivoting; no explicit inverse is formed.
pub fn matrix_oracle(sys: &LtiSystem, omega: f64) -> Result<SpectrumMatrix> {
    let c = build_covariance(sys);
    matrix_oracle_cov(sys.jacobian(), &c.matrix().map(|x| Complex::new(x, 0.0)), omega)
}

pub(crate) fn matrix_oracle_cov(
    j: &DMatrix<f64>,
    c: &DMatrix<Complex<f64>>,
    omega: f64,
) -> Result<SpectrumMatrix> {
    let n = j.nrows();
    let i_omega = Complex::new(0.0, omega);
    let jc = j.map(|x| Complex::new(x, 0.0));
    let a = &jc + DMatrix::<Complex<f64>>::identity(n, n) * i_omega;
    // Solve (iωI + J) Y = C.
    let y = a
        .lu()
        .solve(c)
        .ok_or_else(|| Error::Singular(format!("iωI + J singular at ω = {omega} (resonance)")))?;
    // S = Y (J − iωI)⁻ᵀ  ⇔  (J − iωI) Sᵀ = Yᵀ.
    let b = &jc - DMatrix::<Complex<f64>>::identity(n, n) * i_omega;
    let st = b
        .lu()
        .solve(&y.transpose())
        .ok_or_else(|| Error::Singular(format!("J − iωI singular at ω = {omega} (resonance)")))?;
    Ok(SpectrumMatrix {
        omega,
        s: st.transpose(),
    })
}

/// Coherence `K_ij = |S_ij|² / (S_ii S_jj) ∈ [0, 1]`. Values outside the
/// unit interval by more than 1e−12 are an error rather than silently
/// clamped.
pub fn coherence(s: &SpectrumMatrix, i: usize, j: usize) -> Result<f64> {
    let n = s.n();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "indices ({i},{j}) out of range for dimension {n}"
        )));
    }
    let sii = s.s[(i, i)].re;
    let sjj = s.s[(j, j)].re;
    if sii <= 0.0 || sjj <= 0.0 {
        return Err(Error::UndefinedCoherence(format!(
            "auto-spectra must be positive, got S_ii={sii}, S_jj={sjj}"
        )));
    }
    let k = s.s[(i, j)].norm_sqr() / (sii * sjj);
    if k > 1.0 + 1e-12 {
        return Err(Error::UndefinedCoherence(format!(
            "coherence {k} exceeds 1 beyond tolerance"
        )));
    }
    Ok(k.clamp(0.0, 1.0))
}

/// Stationary covariance `Σ` of the process: the unique solution of
/// `JΣ + ΣJᵀ + C = 0`, obtained by a dense solve of the Kronecker
/// vectorization `(I⊗J + J⊗I) vec(Σ) = −vec(C)`.
pub fn stationary_covariance(j: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = j.nrows();
    if !j.is_square() || c.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension("J and C must be square of equal size".into()));
    }
    // vec is column-major: vec(JΣ) = (I⊗J)vec(Σ), vec(ΣJᵀ) = (J⊗I)vec(Σ).
    let mut k = DMatrix::<f64>::zeros(n * n, n * n);
    for col in 0..n {
        for row in 0..n {
            let eq = col * n + row;
            for s in 0..n {
                k[(eq, col * n + s)] += j[(row, s)];
                k[(eq, s * n + row)] += j[(col, s)];
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(n * n);
    for col in 0..n {
        for row in 0..n {
            rhs[col * n + row] = -c[(row, col)];
        }
    }
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator singular (marginal J)".into()))?;
    let sigma = DMatrix::from_fn(n, n, |r, cidx| sol[cidx * n + r]);
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Quadrature settings for [`integrate_psd`].
#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Upper integration limit; `None` picks `10³·max(1, ‖J‖-scale)` from
    /// the rational coefficients.
    pub omega_max: Option<f64>,
    /// Relative Frobenius tolerance on the result.
    pub rel_tol: f64,
    /// Bisection depth limit per panel.
    pub max_depth: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            omega_max: None,
            rel_tol: 1e-9,
            max_depth: 24,
        }
    }
}

const GAUSS15_NODES: [f64; 8] = [
    0.000000000000000,
    0.201194093997435,
    0.394151347077563,
    0.570972172608539,
    0.724417731360170,
    0.848206583410427,
    0.937273392400706,
    0.987992518020485,
];
const GAUSS15_WEIGHTS: [f64; 8] = [
    0.202578241925561,
    0.198431485327112,
    0.186161000015562,
    0.166269205816994,
    0.139570677926154,
    0.107159220467172,
    0.070366047488108,
    0.030753241996117,
];

fn gauss15_real(sr: &SpectralRational, a: f64, b: f64) -> Result<DMatrix<f64>> {
    let n = sr.n();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for (k, &x) in GAUSS15_NODES.iter().enumerate() {
        let w = GAUSS15_WEIGHTS[k];
        if k == 0 {
            acc += sr.evaluate(mid)?.map(|z| z.re) * w;
        } else {
            acc += sr.evaluate(mid + half * x)?.map(|z| z.re) * w;
            acc += sr.evaluate(mid - half * x)?.map(|z| z.re) * w;
        }
    }
    Ok(acc * half)
}

fn adaptive_panel(
    sr: &SpectralRational,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    worst: &mut f64,
) -> Result<DMatrix<f64>> {
    let whole = gauss15_real(sr, a, b)?;
    let mid = 0.5 * (a + b);
    let left = gauss15_real(sr, a, mid)?;
    let right = gauss15_real(sr, mid, b)?;
    let refined = &left + &right;
    let err = (&whole - &refined).norm();
    if err <= tol || depth == 0 {
        if depth == 0 {
            *worst = worst.max(err);
        }
        return Ok(refined);
    }
    let l = adaptive_panel(sr, a, mid, tol * 0.5, depth - 1, worst)?;
    let r = adaptive_panel(sr, mid, b, tol * 0.5, depth - 1, worst)?;
    Ok(l + r)
}

/// Integrates the rational spectrum, `(1/2π)∫S(ω)dω`, over `(−Ω, Ω)` by
/// adaptive Gauss–Legendre on log-spaced panels, plus the analytic
/// `P_{n−1}/ω²` tail beyond Ω. The result equals the Lyapunov stationary
/// covariance for a healthy solve.
pub fn integrate_psd(sr: &SpectralRational, cfg: &QuadratureConfig) -> Result<DMatrix<f64>> {
    let n = sr.n();
    // Scale of the eigenvalues from the monic denominator: q_0 = Πλ²
    // gives a geometric-mean magnitude; q_{n-1} = Σλ² a root-mean-square.
    let q = sr.q().coeffs();
    let rms = (q[n - 1].abs() / n as f64).sqrt();
    let scale = rms.max(1e-6);
    let omega_max = cfg.omega_max.unwrap_or(1e3 * scale.max(1.0));

    // Panels: a linear one through the origin, then log-spaced up to Ω.
    let omega_min = (1e-3 * scale).min(omega_max / 16.0);
    let mut edges = vec![0.0, omega_min];
    let mut w = omega_min;
    while w < omega_max {
        w = (w * 10f64.powf(0.25)).min(omega_max);
        edges.push(w);
    }

    // First pass for a magnitude estimate; the integrand is the real part
    // (S(ω) + S(−ω) = 2 Re S(ω) by Hermitian reflection).
    let mut rough = DMatrix::<f64>::zeros(n, n);
    for pair in edges.windows(2) {
        rough += gauss15_real(sr, pair[0], pair[1])?;
    }
    let budget = cfg.rel_tol * rough.norm().max(f64::MIN_POSITIVE) / edges.len() as f64;

    let mut total = DMatrix::<f64>::zeros(n, n);
    let mut worst = 0.0f64;
    for pair in edges.windows(2) {
        total += adaptive_panel(sr, pair[0], pair[1], budget, cfg.max_depth, &mut worst)?;
    }
    if worst > budget * edges.len() as f64 {
        return Err(Error::QuadratureDiverged {
            achieved: worst,
            tolerance: budget,
        });
    }
    // Tail: S(ω) → P_{n−1}/ω², so ∫_Ω^∞ contributes P_{n−1}/Ω per side.
    let tail = &sr.p_mats()[n - 1] / omega_max;
    Ok((total + tail) / std::f64::consts::PI)
}
