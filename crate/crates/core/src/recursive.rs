//! Recursive computation of the full rational PSD matrix.
//!
//! The spectrum of a Hurwitz LTI system is
//!
//! ```text
//! S(ω) = (iωI + J)⁻¹ C (−iωI + J)⁻ᵀ
//!      = [Σ_α P_α ω^{2α} + iω Σ_α P′_α ω^{2α}] / Σ_α q_α ω^{2α}
//! ```
//!
//! with symmetric `P_α`, antisymmetric `P′_α`, and real `q_α`. All
//! coefficients follow from a Leverrier–Faddeev-style downward recursion in
//! O(n⁴) operations with no matrix inverses. The denominator comes first
//! from the twin problem with `C = I`; the numerator recursion then
//! consumes the `q_α`. Two redundant terminal identities are exposed as
//! residual diagnostics for the health of the double-precision solve.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::lti::{hurwitz_check, NoiseCovariance, StabilityVerdict};
use crate::poly::EvenPolynomial;

/// The rational PSD matrix: numerator matrices `P_0..P_{n−1}` (symmetric),
/// `P′_0..P′_{n−2}` (antisymmetric), and the monic denominator `q_0..q_n`.
#[derive(Debug, Clone)]
pub struct SpectralRational {
    p: Vec<DMatrix<f64>>,
    pp: Vec<DMatrix<f64>>,
    q: EvenPolynomial,
    n: usize,
}

impl SpectralRational {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Symmetric even-part matrices `P_0..P_{n−1}`.
    pub fn p_mats(&self) -> &[DMatrix<f64>] {
        &self.p
    }

    /// Antisymmetric odd-part matrices `P′_0..P′_{n−2}` (empty for n=1).
    pub fn pp_mats(&self) -> &[DMatrix<f64>] {
        &self.pp
    }

    pub fn q(&self) -> &EvenPolynomial {
        &self.q
    }

    /// `S(ω) = (P(ω) + iω P′(ω)) / Q(ω)`, Hermitian by construction.
    pub fn evaluate(&self, omega: f64) -> Result<DMatrix<Complex<f64>>> {
        let n = self.n;
        let w2 = omega * omega;
        let mut even = DMatrix::<f64>::zeros(n, n);
        for mat in self.p.iter().rev() {
            even = even * w2 + mat;
        }
        let mut odd = DMatrix::<f64>::zeros(n, n);
        for mat in self.pp.iter().rev() {
            odd = odd * w2 + mat;
        }
        let q = self.q.eval(omega);
        if !(q > 0.0) {
            // Q = Π(λ_i² + ω²) > 0 for any Hurwitz J; hitting this means
            // the system was degenerate or the solve overflowed.
            return Err(Error::Singular(format!(
                "denominator Q({omega}) = {q}; degenerate system"
            )));
        }
        Ok(DMatrix::from_fn(n, n, |r, c| {
            Complex::new(even[(r, c)] / q, omega * odd[(r, c)] / q)
        }))
    }

    /// Horner condition number of the denominator at ω: the ratio
    /// `Σ_α |q_α| ω^{2α} / |Q(ω)|`. Multiplied by machine epsilon this
    /// bounds the relative error of evaluating Q from its stored
    /// coefficients; values ≫ 1 flag precision loss in the
    /// monomial-coefficient representation (large n with widely spread
    /// eigenvalues).
    pub fn q_condition(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        let mut abs_acc = 0.0;
        for &c in self.q.coeffs().iter().rev() {
            abs_acc = abs_acc * w2 + c.abs();
        }
        abs_acc / self.q.eval(omega).abs().max(f64::MIN_POSITIVE)
    }

    /// The even/odd numerator polynomials of one matrix entry, plus a copy
    /// of the denominator. Used to compare against the element-wise route.
    pub fn element(&self, i: usize, j: usize) -> Result<(EvenPolynomial, EvenPolynomial)> {
        let n = self.n;
        if i >= n || j >= n {
            return Err(Error::InvalidArgument(format!(
                "element ({i},{j}) out of range for dimension {n}"
            )));
        }
        let p = EvenPolynomial::new(self.p.iter().map(|m| m[(i, j)]).collect());
        let pp = if self.pp.is_empty() {
            EvenPolynomial::zeros(1)
        } else {
            EvenPolynomial::new(self.pp.iter().map(|m| m[(i, j)]).collect())
        };
        Ok((p, pp))
    }
}

/// Residuals of the two redundant terminal identities,
/// `r1 = ‖J P_0 − P_0 Jᵀ − J P′_0 Jᵀ‖_F` and `r2 = ‖q_0 C − J P_0 Jᵀ‖_F`,
/// reported against the scale `‖C‖_F·‖J‖_F²`.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    pub r1: f64,
    pub r2: f64,
    pub scale: f64,
}

impl ResidualReport {
    pub fn rel_r1(&self) -> f64 {
        self.r1 / self.scale.max(f64::MIN_POSITIVE)
    }

    pub fn rel_r2(&self) -> f64 {
        self.r2 / self.scale.max(f64::MIN_POSITIVE)
    }

    /// Both relative residuals at or below 1e−8 signal a healthy solve.
    pub fn is_healthy(&self) -> bool {
        self.rel_r1() <= 1e-8 && self.rel_r2() <= 1e-8
    }
}

/// Denominator coefficients from the twin recursion (`C = I`):
/// `q_α = [Tr(J Q′_{α−1}) + Tr(J Q_α Jᵀ)]/(n−α)`, `q_n = 1`.
/// Also returns the final `Q_0`/`Q′_0` stacks when requested by tests.
fn twin_denominator(j: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let n = j.nrows();
    let jt = j.transpose();
    let mut q = vec![0.0; n + 1];
    q[n] = 1.0;
    let mut q_mats: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); n];
    let mut qp_mats: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); n.saturating_sub(1)];
    let mut qa = DMatrix::<f64>::zeros(n, n);
    let mut qpa = DMatrix::<f64>::zeros(n, n);
    for alpha in (1..=n).rev() {
        let jq = j * &qa;
        let qp_new = &jq - jq.transpose() - j * &qpa * &jt;
        if alpha < n {
            let tr_jqp = (j * &qp_new).trace();
            let tr_jqj = (&jq * &jt).trace();
            q[alpha] = (tr_jqp + tr_jqj) / (n - alpha) as f64;
        }
        let q_new = DMatrix::<f64>::identity(n, n) * q[alpha] + &qp_new * &jt
            - j * &qp_new
            - &jq * &jt;
        q_mats[alpha - 1] = q_new.clone();
        if alpha <= n - 1 {
            qp_mats[alpha - 1] = qp_new.clone();
        }
        qa = q_new;
        qpa = qp_new;
    }
    q[0] = (j * &qa * &jt).trace() / n as f64;
    (q, q_mats, qp_mats)
}

/// Numerator recursion for a given covariance and precomputed `q`:
/// `P′_{α−1} = J P_α − P_α Jᵀ − J P′_α Jᵀ`,
/// `P_{α−1} = q_α C + P′_{α−1} Jᵀ − J P′_{α−1} − J P_α Jᵀ`,
/// from `α = n` down with `P_n = P′_n = 0`.
fn numerator_recursion(
    j: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &[f64],
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let n = j.nrows();
    let jt = j.transpose();
    let mut p_mats: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); n];
    let mut pp_mats: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); n.saturating_sub(1)];
    let mut pa = DMatrix::<f64>::zeros(n, n);
    let mut ppa = DMatrix::<f64>::zeros(n, n);
    for alpha in (1..=n).rev() {
        let jp = j * &pa;
        let pp_new = &jp - jp.transpose() - j * &ppa * &jt;
        let p_new = c * q[alpha] + &pp_new * &jt - j * &pp_new - &jp * &jt;
        p_mats[alpha - 1] = p_new.clone();
        if alpha <= n - 1 {
            pp_mats[alpha - 1] = pp_new.clone();
        }
        pa = p_new;
        ppa = pp_new;
    }
    (p_mats, pp_mats)
}

/// Solves for all rational-function coefficients of a Hurwitz system.
/// Refuses unstable and marginal Jacobians; see
/// [`solve_recursive_unchecked`] for the exploratory override.
pub fn solve_recursive(j: &DMatrix<f64>, c: &NoiseCovariance) -> Result<SpectralRational> {
    match hurwitz_check(j) {
        StabilityVerdict::Stable => solve_recursive_unchecked(j, c),
        v => Err(Error::NotHurwitz { verdict: v.as_str() }),
    }
}

/// The recursion without the stability gate. The rational coefficients are
/// well-defined for any square `J`; the spectrum they describe is only
/// meaningful for Hurwitz systems.
pub fn solve_recursive_unchecked(
    j: &DMatrix<f64>,
    c: &NoiseCovariance,
) -> Result<SpectralRational> {
    if !j.is_square() {
        return Err(Error::Dimension("J must be square".into()));
    }
    let n = j.nrows();
    if c.n() != n {
        return Err(Error::Dimension(format!(
            "covariance is {}x{} but J is {}x{}",
            c.n(),
            c.n(),
            n,
            n
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty system".into()));
    }
    // Exact power-of-two time normalization keeps the recursion's
    // intermediates near unit scale; coefficients are unscaled afterwards.
    let scale = crate::poly::time_scale(j);
    let scaled = j / scale;
    let (mut q, _, _) = twin_denominator(&scaled);
    let (mut p, mut pp) = numerator_recursion(&scaled, c.matrix(), &q);
    for (alpha, entry) in q.iter_mut().enumerate() {
        *entry *= scale.powi(2 * (n - alpha) as i32);
    }
    for (alpha, mat) in p.iter_mut().enumerate() {
        *mat *= scale.powi(2 * (n - 1 - alpha) as i32);
    }
    for (alpha, mat) in pp.iter_mut().enumerate() {
        *mat *= scale.powi(2 * (n - alpha) as i32 - 3);
    }
    Ok(SpectralRational {
        p,
        pp,
        q: EvenPolynomial::new(q),
        n,
    })
}

/// Evaluates the two redundant identities of the terminal recursion steps
/// for a solved system.
pub fn residuals(sr: &SpectralRational, j: &DMatrix<f64>, c: &NoiseCovariance) -> ResidualReport {
    let jt = j.transpose();
    let p0 = &sr.p[0];
    let jp0 = j * p0;
    let pp0 = if sr.pp.is_empty() {
        DMatrix::zeros(sr.n, sr.n)
    } else {
        sr.pp[0].clone()
    };
    let r1 = (&jp0 - jp0.transpose() - j * &pp0 * &jt).norm();
    let q0 = sr.q.coeffs()[0];
    let r2 = (c.matrix() * q0 - &jp0 * &jt).norm();
    let scale = c.matrix().norm() * j.norm() * j.norm();
    ResidualReport { r1, r2, scale }
}

/// Twin-problem coefficient stacks (`C = I`), exposed for the consistency
/// test that the `Q` matrices coincide with `P` matrices at `C = I`.
pub fn twin_problem_mats(j: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    twin_denominator(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::build_covariance;
    use crate::lti::LtiSystem;
    use crate::poly::denominator_coeffs;
    use crate::testutil;
    use nalgebra::{dmatrix, dvector};

    fn cov(m: DMatrix<f64>) -> NoiseCovariance {
        NoiseCovariance::from_matrix(m).unwrap()
    }

    #[test]
    fn ou_process() {
        let a = 1.7;
        let c2 = 0.9;
        let sr = solve_recursive(&dmatrix![-a], &cov(dmatrix![c2])).unwrap();
        assert_eq!(sr.p_mats().len(), 1);
        assert!((sr.p_mats()[0][(0, 0)] - c2).abs() < 1e-15);
        assert!((sr.q().coeffs()[0] - a * a).abs() < 1e-15);
        assert_eq!(sr.q().coeffs()[1], 1.0);
        let s0 = sr.evaluate(0.0).unwrap()[(0, 0)];
        assert!((s0.re - c2 / (a * a)).abs() < 1e-14);
        let s1 = sr.evaluate(1.3).unwrap()[(0, 0)];
        assert!((s1.re - c2 / (a * a + 1.3 * 1.3)).abs() < 1e-14);
    }

    /// Fitzhugh–Nagumo fixed-point system with the printed closed form:
    /// numerator w_e²σ², denominator (ε+(v_e²−1)βε)² +
    /// ((v_e²−1)²−2ε+β²ε²)ω² + ω⁴.
    #[test]
    fn fhn_closed_form() {
        let (ve, we, beta, eps, sigma) = (-1.00125, -0.401665, 0.75, 0.08, 1e-3);
        let j = dmatrix![1.0 - ve * ve, -1.0; eps, -beta * eps];
        let c = cov(DMatrix::from_diagonal(&dvector![0.0, sigma * sigma * we * we]));
        let sr = solve_recursive(&j, &c).unwrap();
        let q0 = (eps + (ve * ve - 1.0) * beta * eps).powi(2);
        let q1 = (ve * ve - 1.0).powi(2) - 2.0 * eps + beta * beta * eps * eps;
        assert!((sr.q().coeffs()[0] - q0).abs() <= 1e-12 * q0);
        assert!((sr.q().coeffs()[1] - q1).abs() <= 1e-12 * q1.abs());
        assert_eq!(sr.q().coeffs()[2], 1.0);
        let p0 = sr.p_mats()[0][(0, 0)];
        assert!((p0 - we * we * sigma * sigma).abs() <= 1e-12 * p0.abs());
        assert!(sr.p_mats()[1][(0, 0)].abs() <= 1e-18);
        // S₁₁(0) = w_e²σ²/q0.
        let s0 = sr.evaluate(0.0).unwrap()[(0, 0)].re;
        assert!((s0 - we * we * sigma * sigma / q0).abs() <= 1e-10 * s0);
        let rep = residuals(&sr, &j, &c);
        assert!(rep.rel_r1() <= 1e-12 && rep.rel_r2() <= 1e-12);
    }

    fn binomial(n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        let mut v = 1.0;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        v
    }

    #[test]
    fn negative_identity_binomials() {
        // J = −I, C = I: Q = (1+ω²)^n, P(ω) = (1+ω²)^{n−1} I, P′ = 0,
        // so S = I/(1+ω²); coefficients are binomials.
        for n in 1..=6usize {
            let j = DMatrix::<f64>::identity(n, n) * -1.0;
            let sr = solve_recursive(&j, &cov(DMatrix::identity(n, n))).unwrap();
            for (alpha, qa) in sr.q().coeffs().iter().enumerate() {
                assert!((qa - binomial(n, alpha)).abs() < 1e-10);
            }
            for (alpha, p) in sr.p_mats().iter().enumerate() {
                let expect = DMatrix::<f64>::identity(n, n) * binomial(n - 1, alpha);
                assert!((p - expect).norm() < 1e-10);
            }
            for pp in sr.pp_mats() {
                assert!(pp.norm() < 1e-12);
            }
            for &w in &[0.0, 0.5, 1.0, 2.0, 10.0] {
                let s = sr.evaluate(w).unwrap();
                let expect = 1.0 / (1.0 + w * w);
                assert!((s[(0, 0)].re - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_and_antisymmetry() {
        let mut rng = testutil::rng(101);
        for n in 1..=8 {
            let j = testutil::random_hurwitz(&mut rng, n);
            let c = cov(testutil::random_psd(&mut rng, n));
            let sr = solve_recursive(&j, &c).unwrap();
            for p in sr.p_mats() {
                let asym = (p - p.transpose()).norm();
                assert!(asym <= 1e-10 * p.norm().max(1e-300), "n={n}");
            }
            for pp in sr.pp_mats() {
                let sym = (pp + pp.transpose()).norm();
                assert!(sym <= 1e-10 * pp.norm().max(1e-300), "n={n}");
            }
        }
    }

    #[test]
    fn twin_problem_matches_identity_covariance() {
        let mut rng = testutil::rng(55);
        for n in 2..=6 {
            let j = testutil::random_hurwitz(&mut rng, n);
            let sr = solve_recursive(&j, &cov(DMatrix::identity(n, n))).unwrap();
            let (q, q_mats, qp_mats) = twin_problem_mats(&j);
            for (a, b) in sr.q().coeffs().iter().zip(q.iter()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            for (p, qm) in sr.p_mats().iter().zip(q_mats.iter()) {
                assert!((p - qm).norm() <= 1e-12 * qm.norm().max(1e-300));
            }
            for (pp, qpm) in sr.pp_mats().iter().zip(qp_mats.iter()) {
                assert!((pp - qpm).norm() <= 1e-12 * qpm.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn q_matches_bell_route() {
        // Two independent routes to Q(ω): the twin recursion and the
        // Bell/Hessenberg elementary-symmetric-polynomial formula.
        let mut rng = testutil::rng(77);
        for n in 1..=8 {
            let j = testutil::random_hurwitz(&mut rng, n);
            let sr = solve_recursive(&j, &cov(DMatrix::identity(n, n))).unwrap();
            let q_bell = denominator_coeffs(&j).unwrap();
            for (a, b) in sr.q().coeffs().iter().zip(q_bell.coeffs()) {
                assert!(
                    testutil::rel_err(*a, *b, 1e-300) <= 1e-9,
                    "n={n}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn residual_examples() {
        // OU: both identities are exact.
        let sr = solve_recursive(&dmatrix![-2.0], &cov(dmatrix![1.5])).unwrap();
        let rep = residuals(&sr, &dmatrix![-2.0], &cov(dmatrix![1.5]));
        assert_eq!(rep.r1, 0.0);
        assert!(rep.rel_r2() < 1e-15);

        let mut rng = testutil::rng(303);
        let j = testutil::random_hurwitz(&mut rng, 8);
        let c = cov(testutil::random_psd(&mut rng, 8));
        let sr = solve_recursive(&j, &c).unwrap();
        let rep = residuals(&sr, &j, &c);
        assert!(rep.is_healthy(), "r1={} r2={}", rep.rel_r1(), rep.rel_r2());
    }

    #[test]
    fn refuses_unstable_and_marginal() {
        let c = cov(DMatrix::identity(2, 2));
        assert!(matches!(
            solve_recursive(&dmatrix![0.0, 1.0; -2.0, 1.0], &c),
            Err(Error::NotHurwitz { verdict: "unstable" })
        ));
        assert!(matches!(
            solve_recursive(&dmatrix![0.0, 1.0; -1.0, 0.0], &c),
            Err(Error::NotHurwitz { verdict: "marginal" })
        ));
        // The unchecked path still produces coefficients.
        assert!(solve_recursive_unchecked(&dmatrix![0.0, 1.0; -1.0, 0.0], &c).is_ok());
    }

    #[test]
    fn eigenvalue_log_derivative_identity() {
        // For diagonalizable J with known eigenvalues λ_j,
        // Σ_j 2ω/(ω² + λ_j²) = Q′(ω)/Q(ω).
        let mut rng = testutil::rng(888);
        let cases: Vec<(Vec<f64>, Vec<(f64, f64)>)> = vec![
            (vec![-0.5, -2.0], vec![]),
            (vec![-1.0], vec![(-0.3, 1.7)]),
            (vec![], vec![(-0.2, 0.9), (-1.5, 2.4)]),
        ];
        for (reals, pairs) in cases {
            let j = testutil::matrix_with_eigenvalues(&mut rng, &reals, &pairs);
            let q = denominator_coeffs(&j).unwrap();
            for &w in &[0.3, 0.9, 2.2, 5.0] {
                let mut lhs = Complex::new(0.0, 0.0);
                for &lam in &reals {
                    lhs += Complex::new(2.0 * w, 0.0) / Complex::new(w * w + lam * lam, 0.0);
                }
                for &(a, b) in &pairs {
                    for sgn in [1.0, -1.0] {
                        let lam = Complex::new(a, sgn * b);
                        lhs += Complex::new(2.0 * w, 0.0)
                            / (Complex::new(w * w, 0.0) + lam * lam);
                    }
                }
                let rhs = q.eval_deriv(w) / q.eval(w);
                assert!(
                    (lhs.re - rhs).abs() <= 1e-9 * rhs.abs().max(1e-12),
                    "w={w}: {} vs {rhs}",
                    lhs.re
                );
                assert!(lhs.im.abs() < 1e-10);
            }
        }
    }
}
