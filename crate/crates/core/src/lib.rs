//! Noise power spectral densities of stochastic linear time-invariant
//! systems as explicit rational functions of frequency, with no matrix
//! inverses on the solution path.
//!
//! Two independent solvers produce the coefficients of
//! `S(ω) = (P(ω) + iω P′(ω)) / Q(ω)`:
//!
//! - [`recursive::solve_recursive`] — a Leverrier–Faddeev-type downward
//!   recursion giving every matrix coefficient in O(n⁴) operations;
//! - [`elementwise`] — per-entry closed forms assembled from Bell
//!   polynomials of Jacobian submatrices, O(n⁴) per element.
//!
//! Both are validated against the direct matrix solve
//! ([`eval::matrix_oracle`]), a Lyapunov covariance identity, and Welch
//! spectra of Euler–Maruyama simulations of the nonlinear benchmark
//! models in [`models`].

pub mod elementwise;
pub mod error;
pub mod eval;
pub mod lti;
pub mod models;
pub mod poly;
pub mod recursive;
pub mod sim;

#[doc(hidden)]
pub mod testutil;

pub use elementwise::{
    auto_coeffs, auto_coeffs_general_index, build_o, canon_d, canon_f, canon_g, canon_h, canon_s,
    canon_t, closed_form_auto, cross_coeffs, ElementCoeffs, SubmatrixSet,
};
pub use error::{Error, Result};
pub use eval::{
    coherence, integrate_psd, matrix_oracle, stationary_covariance, QuadratureConfig,
    SpectrumMatrix,
};
pub use lti::{
    build_covariance, faddeev_leverrier, hurwitz_check, ldl_reduce, LtiSystem, NoiseCovariance,
    StabilityVerdict,
};
pub use models::{
    fd_jacobian, fhn_model, find_fixed_point, hindmarsh_rose_model, linearize, rps_model,
    ssn_model, wilson_cowan_model, FixedPoint, FpMethod, ModelKind, ModelSpec,
};
pub use poly::{
    bell_hessenberg, denominator_coeffs, det_shift_coeffs, eval_even, trace_powers,
    EvenPolynomial, TracePowerSequence,
};
pub use recursive::{
    residuals, solve_recursive, solve_recursive_unchecked, ResidualReport, SpectralRational,
};
pub use sim::{
    coherence_estimate, simulate, welch_spectrum, SimConfig, SpectrumEstimate, Trajectory,
    WelchConfig, Window, RNG_SCHEME,
};
