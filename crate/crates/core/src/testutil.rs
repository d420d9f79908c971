//! Deterministic random inputs and small independent oracles shared by the
//! unit, integration, and acceptance test suites. Not part of the public
//! API contract.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::lti::{hurwitz_check, LtiSystem, StabilityVerdict};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha12Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
}

/// Random Hurwitz Jacobian: a random matrix shifted left by a multiple of
/// its Frobenius norm, retried until the Routh test reports stable. Small
/// shift factors keep some oscillatory (complex-pair) systems in the mix.
/// The result is rescaled to a unit time scale (‖J‖_F = √n/2), the same
/// normalization the benchmark models carry; coefficient growth ~ρ(J)^{2n}
/// would otherwise swamp double precision for purely unit reasons.
pub fn random_hurwitz(rng: &mut ChaCha12Rng, n: usize) -> DMatrix<f64> {
    loop {
        let a = random_matrix(rng, n, 1.0);
        let shift = rng.random_range(0.35..1.1) * (a.norm() + 0.1);
        let j = &a - DMatrix::<f64>::identity(n, n) * shift;
        if hurwitz_check(&j) == StabilityVerdict::Stable {
            let target = 0.5 * (n as f64).sqrt();
            return j.clone() * (target / j.norm());
        }
    }
}

/// Random PSD covariance C = G·Gᵀ; with probability ~1/4 a column of G is
/// zeroed so rank-deficient noise shows up in the test population.
pub fn random_psd(rng: &mut ChaCha12Rng, n: usize) -> DMatrix<f64> {
    let mut g = random_matrix(rng, n, 1.0);
    if n > 1 && rng.random_range(0..4usize) == 0 {
        let col = rng.random_range(0..n);
        for r in 0..n {
            g[(r, col)] = 0.0;
        }
    }
    let c = &g * g.transpose();
    (&c + c.transpose()) * 0.5
}

/// Random system with identity-like dispersion options exercised.
pub fn random_system(rng: &mut ChaCha12Rng, n: usize) -> LtiSystem {
    let j = random_hurwitz(rng, n);
    let l = random_matrix(rng, n, 1.0);
    let d = DVector::from_fn(n, |_, _| rng.random_range(0.1..2.0));
    LtiSystem::new(j, l, d, None).unwrap()
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

/// det(A + iωI) by complex LU; the sampling oracle for the canonical
/// functions, independent of the Bell-polynomial route.
pub fn det_shift_complex(a: &DMatrix<f64>, omega: f64) -> Complex<f64> {
    let n = a.nrows();
    if n == 0 {
        return Complex::new(1.0, 0.0);
    }
    let m = to_complex(a) + DMatrix::<Complex<f64>>::identity(n, n) * Complex::new(0.0, omega);
    m.lu().determinant()
}

/// Builds a real matrix with prescribed eigenvalues (`real` plus
/// conjugate pairs `a ± bi`) via a random similarity transform, so tests
/// can reason about spectra analytically.
pub fn matrix_with_eigenvalues(
    rng: &mut ChaCha12Rng,
    real: &[f64],
    pairs: &[(f64, f64)],
) -> DMatrix<f64> {
    let n = real.len() + 2 * pairs.len();
    let mut block = DMatrix::<f64>::zeros(n, n);
    for (i, &lam) in real.iter().enumerate() {
        block[(i, i)] = lam;
    }
    let base = real.len();
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let i = base + 2 * k;
        block[(i, i)] = a;
        block[(i, i + 1)] = b;
        block[(i + 1, i)] = -b;
        block[(i + 1, i + 1)] = a;
    }
    loop {
        let t = random_matrix(rng, n, 1.0) + DMatrix::<f64>::identity(n, n) * 2.0;
        if let Some(t_inv) = t.clone().try_inverse() {
            return &t * block * t_inv;
        }
    }
}

/// Relative gap |a − b| / max(|a|, |b|, floor).
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
