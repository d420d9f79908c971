//! Element-wise rational coefficients for single entries of the PSD matrix.
//!
//! Each minor of `J + iωI` is a determinant of a rearranged Jacobian
//! submatrix (the `O_ij` matrices) with the frequency shifts confined to
//! the diagonal, so every numerator coefficient reduces to six canonical
//! determinant-product expansions (`d, g, h, f, s, t`) evaluated through
//! Bell polynomials of trace powers. The denominator is shared with
//! [`crate::poly::denominator_coeffs`]. This route computes one element in
//! roughly O(n⁴) operations; for the full matrix the recursive solver is
//! the cheaper path.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lti::{build_covariance, LtiSystem};
use crate::poly::{denominator_coeffs, det_shift_coeffs, trace_powers, EvenPolynomial};

/// The rearranged minor `O_ij` of the Jacobian with bookkeeping: the minor
/// index `β` whose diagonal slot carries no frequency shift, the submatrix
/// `O′_ij` with row/column `β` deleted, and the adjacent row/column
/// exchange count `γ` with `det(O_ij) = (−1)^γ det(N_ij)`.
#[derive(Debug, Clone)]
pub struct SubmatrixSet {
    pub o: DMatrix<f64>,
    pub oprime: Option<DMatrix<f64>>,
    pub beta: Option<usize>,
    pub exchanges: usize,
}

/// Builds `O_ij` by deleting row `i` and column `j` (0-based) of `J`, then
/// cycling the displaced rows (i < j) or columns (i > j) so that every
/// surviving diagonal entry of `J` lands on the diagonal; slot `β =
/// min(i, j)` is the one left without a shift.
pub fn build_o(j: &DMatrix<f64>, i: usize, jc: usize) -> Result<SubmatrixSet> {
    let n = j.nrows();
    if !j.is_square() {
        return Err(Error::Dimension("build_o needs a square Jacobian".into()));
    }
    if i >= n || jc >= n {
        return Err(Error::InvalidArgument(format!(
            "indices ({i},{jc}) out of range for dimension {n}"
        )));
    }
    let minor = j.clone().remove_row(i).remove_column(jc);
    if i == jc {
        return Ok(SubmatrixSet {
            o: minor,
            oprime: None,
            beta: None,
            exchanges: 0,
        });
    }
    let beta = i.min(jc);
    let mut o = minor;
    if i < jc {
        let mut r = jc - 1;
        while r > i {
            o.swap_rows(r, r - 1);
            r -= 1;
        }
    } else {
        let mut c = i - 1;
        while c > jc {
            o.swap_columns(c, c - 1);
            c -= 1;
        }
    }
    let exchanges = i.abs_diff(jc) - 1;
    let oprime = Some(o.clone().remove_row(beta).remove_column(beta));
    Ok(SubmatrixSet {
        o,
        oprime,
        beta: Some(beta),
        exchanges,
    })
}

/// `u_m = Σ_{j+k=m} (−1)^j a_j b_k` for determinant-shift coefficient
/// vectors `a`, `b`; the common kernel of the g/h expansions.
fn signed_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; a.len() + b.len() - 1];
    for (j, &aj) in a.iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        for (k, &bk) in b.iter().enumerate() {
            u[j + k] += sign * aj * bk;
        }
    }
    u
}

fn g_from_coeffs(ca: &[f64], cb: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = ca.len() - 1;
    let u = signed_convolution(ca, cb);
    let mut g1 = vec![0.0; k];
    for (alpha, entry) in g1.iter_mut().enumerate() {
        let sign = if alpha % 2 == 0 { 2.0 } else { -2.0 };
        *entry = sign * u[2 * alpha];
    }
    let mut g2 = vec![0.0; k + 1];
    for (alpha, entry) in g2.iter_mut().enumerate().skip(1) {
        let sign = if (alpha - 1) % 2 == 0 { 2.0 } else { -2.0 };
        *entry = sign * u[2 * alpha - 1];
    }
    (g1, g2)
}

fn h_from_coeffs(ca: &[f64], cb: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = ca.len() - 1;
    let u = signed_convolution(ca, cb);
    let mut h1 = vec![0.0; k + 1];
    for (alpha, entry) in h1.iter_mut().enumerate() {
        let sign = if alpha % 2 == 0 { 2.0 } else { -2.0 };
        *entry = sign * u[2 * alpha];
    }
    let mut h2 = vec![0.0; k];
    for (alpha, entry) in h2.iter_mut().enumerate() {
        let sign = if alpha % 2 == 0 { 2.0 } else { -2.0 };
        *entry = sign * u[2 * alpha + 1];
    }
    (h1, h2)
}

/// `d(ω; A) = |det(A + iωI)|²` as an even polynomial; coefficients from
/// Bell polynomials of the squared trace powers. `A` may be 0×0 (returns
/// the constant 1).
pub fn canon_d(a: &DMatrix<f64>) -> Result<EvenPolynomial> {
    denominator_coeffs(a)
}

/// `g(ω; A, B) = 2ω·conj(det(A+iωI))·det(B+iωI)` for `B` one dimension
/// smaller than `A`; returns the coefficient lists of the real part (odd
/// powers, `g1[α] ↔ ω^{2α+1}`) and imaginary part (even powers,
/// `g2[α] ↔ ω^{2α}`).
pub fn canon_g(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.nrows() == 0 || b.nrows() + 1 != a.nrows() {
        return Err(Error::Dimension(format!(
            "g needs dim(B) = dim(A) − 1, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(g_from_coeffs(&det_shift_coeffs(a)?, &det_shift_coeffs(b)?))
}

/// `h(ω; A, B) = 2·conj(det(A+iωI))·det(B+iωI)` for same-size `A`, `B`;
/// returns (real part over ω^{2α}, imaginary part over ω^{2α+1}).
pub fn canon_h(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "h needs equal dimensions, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(h_from_coeffs(&det_shift_coeffs(a)?, &det_shift_coeffs(b)?))
}

fn check_beta(a: &DMatrix<f64>, beta: usize, what: &str) -> Result<()> {
    if beta >= a.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{what}: β = {beta} out of range for dimension {}",
            a.nrows()
        )));
    }
    Ok(())
}

/// `f(ω; A, e_β) = |det(A+iωI) − iω·det(B+iωI)|²` with `B` the β-deleted
/// submatrix of `A`; composed as `f^α = d^α(A) + d^{α−1}(B) + g2^α(A, B)`.
pub fn canon_f(a: &DMatrix<f64>, beta: usize) -> Result<EvenPolynomial> {
    check_beta(a, beta, "f")?;
    let b = a.clone().remove_row(beta).remove_column(beta);
    let da = canon_d(a)?;
    let db = canon_d(&b)?;
    let (_, g2) = canon_g(a, &b)?;
    let k = a.nrows();
    let mut out = vec![0.0; k + 1];
    for (alpha, entry) in out.iter_mut().enumerate() {
        *entry = da.coeffs()[alpha] + g2[alpha]
            + if alpha >= 1 { db.coeffs()[alpha - 1] } else { 0.0 };
    }
    Ok(EvenPolynomial::new(out))
}

/// `s(ω; A, B, e_β) = 2·det(A+iωI)·conj(det(B+iωI − iω e_β e_βᵀ))`;
/// `s1^α = h1^α(A,B) + g2^α(A,C)`, `s2^α = −h2^α(A,B) + g1^α(A,C)` with
/// `C` the β-deleted submatrix of `B`.
pub fn canon_s(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    beta: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "s needs equal dimensions, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    check_beta(b, beta, "s")?;
    let c = b.clone().remove_row(beta).remove_column(beta);
    let (h1, h2) = canon_h(a, b)?;
    let (g1, g2) = canon_g(a, &c)?;
    let s1 = h1.iter().zip(&g2).map(|(x, y)| x + y).collect();
    let s2 = h2.iter().zip(&g1).map(|(x, y)| -x + y).collect();
    Ok((s1, s2))
}

/// `t(ω; A, B, e_β1, e_β2) = 2·det(A+iωI − iω e_β1 e_β1ᵀ)·
/// conj(det(B+iωI − iω e_β2 e_β2ᵀ))`; composed from h and g on the
/// deleted submatrices `C` (of `A`) and `D` (of `B`).
pub fn canon_t(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    beta1: usize,
    beta2: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "t needs equal dimensions, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    check_beta(a, beta1, "t")?;
    check_beta(b, beta2, "t")?;
    let c = a.clone().remove_row(beta1).remove_column(beta1);
    let d = b.clone().remove_row(beta2).remove_column(beta2);
    let (h1_ab, h2_ab) = canon_h(a, b)?;
    let (h1_cd, h2_cd) = canon_h(&c, &d)?;
    let (g1_bc, g2_bc) = canon_g(b, &c)?;
    let (g1_ad, g2_ad) = canon_g(a, &d)?;
    let k = a.nrows();
    let mut t1 = vec![0.0; k + 1];
    for (alpha, entry) in t1.iter_mut().enumerate() {
        *entry = h1_ab[alpha] + g2_bc[alpha] + g2_ad[alpha]
            + if alpha >= 1 { h1_cd[alpha - 1] } else { 0.0 };
    }
    let mut t2 = vec![0.0; k];
    for (alpha, entry) in t2.iter_mut().enumerate() {
        *entry = -h2_ab[alpha] - g1_bc[alpha] + g1_ad[alpha]
            - if alpha >= 1 { h2_cd[alpha - 1] } else { 0.0 };
    }
    Ok((t1, t2))
}

/// Numerator polynomials of one PSD matrix entry: real even part `p` and
/// odd part `pp` (identically zero on the diagonal).
#[derive(Debug, Clone)]
pub struct ElementCoeffs {
    pub i: usize,
    pub j: usize,
    pub p: EvenPolynomial,
    pub pp: EvenPolynomial,
}

impl ElementCoeffs {
    /// `S_ij(ω)` given the shared denominator.
    pub fn eval_with_q(&self, q: &EvenPolynomial, omega: f64) -> Complex<f64> {
        let qv = q.eval(omega);
        Complex::new(self.p.eval(omega) / qv, omega * self.pp.eval(omega) / qv)
    }
}

/// Per-column cache: `O_ki` for every row `k`, with determinant-shift
/// coefficients of `O` and `O′`.
struct ColumnCache {
    subs: Vec<SubmatrixSet>,
    c_o: Vec<Vec<f64>>,
    c_op: Vec<Vec<f64>>,
}

impl ColumnCache {
    fn build(j: &DMatrix<f64>, col: usize) -> Result<Self> {
        let n = j.nrows();
        let mut subs = Vec::with_capacity(n);
        let mut c_o = Vec::with_capacity(n);
        let mut c_op = Vec::with_capacity(n);
        for row in 0..n {
            let sub = build_o(j, row, col)?;
            c_o.push(det_shift_coeffs(&sub.o)?);
            c_op.push(match &sub.oprime {
                Some(op) => det_shift_coeffs(op)?,
                None => vec![1.0],
            });
            subs.push(sub);
        }
        Ok(Self { subs, c_o, c_op })
    }
}

/// Auto-spectrum numerator coefficients `p^{ii}_α` assembled from the
/// canonical functions weighted by noise-covariance entries.
pub fn auto_coeffs(sys: &LtiSystem, i: usize) -> Result<ElementCoeffs> {
    let n = sys.n();
    if i >= n {
        return Err(Error::InvalidArgument(format!(
            "index {i} out of range for dimension {n}"
        )));
    }
    let scale = crate::poly::time_scale(sys.jacobian());
    let j = sys.jacobian() / scale;
    let cov = build_covariance(sys);
    let c = cov.matrix();
    let cache = ColumnCache::build(&j, i)?;

    let mut p = vec![0.0; n];
    // Own channel: C_ii · d^α(O_ii).
    let d_ii = canon_d(&cache.subs[i].o)?;
    for alpha in 0..n {
        p[alpha] += c[(i, i)] * d_ii.coeffs()[alpha];
    }
    for k in 0..n {
        if k == i {
            continue;
        }
        // Filtered channels: C_kk · f^α(O_ki, e_β).
        let f = canon_f(&cache.subs[k].o, cache.subs[k].beta.unwrap())?;
        for alpha in 0..n {
            p[alpha] += c[(k, k)] * f.coeffs()[alpha];
        }
        // Correlated own/other channel: −C_ik · s1^α(O_ii, O_ki, e_β).
        let (h1, _) = h_from_coeffs(&cache.c_o[i], &cache.c_o[k]);
        let (_, g2) = g_from_coeffs(&cache.c_o[i], &cache.c_op[k]);
        for alpha in 0..n {
            p[alpha] -= c[(i, k)] * (h1[alpha] + g2[alpha]);
        }
        // Cross channels: +C_kq · t1^α(O_ki, O_qi, e_β1, e_β2), q < k.
        for q in 0..k {
            if q == i {
                continue;
            }
            let t1 = t1_cached(&cache, k, q);
            for alpha in 0..n {
                p[alpha] += c[(k, q)] * t1[alpha];
            }
        }
    }
    for (alpha, entry) in p.iter_mut().enumerate() {
        *entry *= scale.powi(2 * (n - 1 - alpha) as i32);
    }
    Ok(ElementCoeffs {
        i,
        j: i,
        p: EvenPolynomial::new(p),
        pp: EvenPolynomial::zeros(n.saturating_sub(1)),
    })
}

fn t1_cached(cache: &ColumnCache, a: usize, b: usize) -> Vec<f64> {
    let (t1, _) = t_from_cached(
        &cache.c_o[a],
        &cache.c_op[a],
        &cache.c_o[b],
        &cache.c_op[b],
    );
    t1
}

/// t-composition on precomputed determinant coefficients of
/// (A, C = A\β1, B, D = B\β2).
fn t_from_cached(
    ca: &[f64],
    cc: &[f64],
    cb: &[f64],
    cd: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let k = ca.len() - 1;
    let (h1_ab, h2_ab) = h_from_coeffs(ca, cb);
    let (h1_cd, h2_cd) = h_from_coeffs(cc, cd);
    let (g1_bc, g2_bc) = g_from_coeffs(cb, cc);
    let (g1_ad, g2_ad) = g_from_coeffs(ca, cd);
    let mut t1 = vec![0.0; k + 1];
    for (alpha, entry) in t1.iter_mut().enumerate() {
        *entry = h1_ab[alpha] + g2_bc[alpha] + g2_ad[alpha]
            + if alpha >= 1 { h1_cd[alpha - 1] } else { 0.0 };
    }
    let mut t2 = vec![0.0; k];
    for (alpha, entry) in t2.iter_mut().enumerate() {
        *entry = -h2_ab[alpha] - g1_bc[alpha] + g1_ad[alpha]
            - if alpha >= 1 { h2_cd[alpha - 1] } else { 0.0 };
    }
    (t1, t2)
}

/// Cross-spectrum numerator coefficients `p^{ij}_α`, `p^{ij′}_α` for
/// `i ≠ j`.
pub fn cross_coeffs(sys: &LtiSystem, i: usize, j: usize) -> Result<ElementCoeffs> {
    let n = sys.n();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "indices ({i},{j}) out of range for dimension {n}"
        )));
    }
    if i == j {
        return Err(Error::InvalidArgument(
            "cross_coeffs needs i ≠ j; use auto_coeffs for the diagonal".into(),
        ));
    }
    let scale = crate::poly::time_scale(sys.jacobian());
    let jm = sys.jacobian() / scale;
    let cov = build_covariance(sys);
    let c = cov.matrix();
    let col_i = ColumnCache::build(&jm, i)?;
    let col_j = ColumnCache::build(&jm, j)?;

    let mut p = vec![0.0; n];
    let mut pp = vec![0.0; n.saturating_sub(1).max(1)];

    // 2·det(O_ii + iωI)·conj(det(O_jj + iωI)) weighted by C_ij.
    let (h1, h2) = h_from_coeffs(&col_i.c_o[i], &col_j.c_o[j]);
    for alpha in 0..n {
        p[alpha] += 0.5 * c[(i, j)] * h1[alpha];
    }
    for alpha in 0..n - 1 {
        pp[alpha] -= 0.5 * c[(i, j)] * h2[alpha];
    }

    // −C_ik · s(O_ii, O_kj, e_β) for k ≠ j.
    for k in 0..n {
        if k == j {
            continue;
        }
        let (h1, h2) = h_from_coeffs(&col_i.c_o[i], &col_j.c_o[k]);
        let (g1, g2) = g_from_coeffs(&col_i.c_o[i], &col_j.c_op[k]);
        for alpha in 0..n {
            p[alpha] -= 0.5 * c[(i, k)] * (h1[alpha] + g2[alpha]);
        }
        for alpha in 0..n - 1 {
            pp[alpha] -= 0.5 * c[(i, k)] * (-h2[alpha] + g1[alpha]);
        }
    }

    // −C_kj · s(O_jj, O_ki, e_β) for k ≠ i (conjugate side: +s2 in pp).
    for k in 0..n {
        if k == i {
            continue;
        }
        let (h1, h2) = h_from_coeffs(&col_j.c_o[j], &col_i.c_o[k]);
        let (g1, g2) = g_from_coeffs(&col_j.c_o[j], &col_i.c_op[k]);
        for alpha in 0..n {
            p[alpha] -= 0.5 * c[(k, j)] * (h1[alpha] + g2[alpha]);
        }
        for alpha in 0..n - 1 {
            pp[alpha] += 0.5 * c[(k, j)] * (-h2[alpha] + g1[alpha]);
        }
    }

    // +C_kq · t(O_ki, O_qj, e_β1, e_β2) over k ≠ i, q ≠ j.
    for k in 0..n {
        if k == i {
            continue;
        }
        for q in 0..n {
            if q == j {
                continue;
            }
            let (t1, t2) = t_from_cached(
                &col_i.c_o[k],
                &col_i.c_op[k],
                &col_j.c_o[q],
                &col_j.c_op[q],
            );
            for alpha in 0..n {
                p[alpha] += 0.5 * c[(k, q)] * t1[alpha];
            }
            for alpha in 0..n - 1 {
                pp[alpha] += 0.5 * c[(k, q)] * t2[alpha];
            }
        }
    }

    for (alpha, entry) in p.iter_mut().enumerate() {
        *entry *= scale.powi(2 * (n - 1 - alpha) as i32);
    }
    for (alpha, entry) in pp.iter_mut().enumerate().take(n.saturating_sub(1)) {
        *entry *= scale.powi(2 * (n - alpha) as i32 - 3);
    }
    Ok(ElementCoeffs {
        i,
        j,
        p: EvenPolynomial::new(p),
        pp: EvenPolynomial::new(pp),
    })
}

fn trn(m: &DMatrix<f64>, k: usize) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    trace_powers(m, k, false).unwrap().values()[k - 1]
}

fn diagonal_channel_weights(sys: &LtiSystem) -> Result<Vec<f64>> {
    let n = sys.n();
    let l = sys.dispersion();
    if sys.m() != n {
        return Err(Error::InvalidArgument(
            "closed-form auto-spectrum needs a square diagonal dispersion".into(),
        ));
    }
    for r in 0..n {
        for c in 0..n {
            if r != c && l[(r, c)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "closed-form auto-spectrum needs a diagonal dispersion".into(),
                ));
            }
        }
    }
    Ok((0..n)
        .map(|k| l[(k, k)] * l[(k, k)] * sys.diffusion_diag()[k])
        .collect())
}

/// Auto-spectrum of the first variable for `n ∈ {2, 3, 4}` with diagonal
/// dispersion, evaluated from the explicit trace formulas — an independent
/// code path from [`auto_coeffs`] used as a cross-check.
pub fn closed_form_auto(sys: &LtiSystem) -> Result<ElementCoeffs> {
    let n = sys.n();
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "closed-form auto-spectrum covers n ∈ {{2, 3, 4}}, got {n}"
        )));
    }
    let w = diagonal_channel_weights(sys)?;
    let scale = crate::poly::time_scale(sys.jacobian());
    let j = sys.jacobian() / scale;
    let subs: Vec<SubmatrixSet> = (0..n).map(|k| build_o(&j, k, 0)).collect::<Result<_>>()?;
    let o11 = &subs[0].o;

    let mut p = match n {
        2 => {
            let p0 = w[0] * trn(o11, 2) + w[1] * trn(&subs[1].o, 2);
            // ω² carries the direct noise channel of the first variable.
            vec![p0, w[0]]
        }
        3 => {
            let mut p0 = w[0] * (trn(o11, 2).powi(2) - trn(o11, 4));
            let mut p1 = w[0] * trn(o11, 2);
            for k in 1..3 {
                let o = &subs[k].o;
                let op = subs[k].oprime.as_ref().unwrap();
                p0 += w[k]
                    * (trn(op, 2).powi(2) - trn(op, 4) + trn(o, 2).powi(2) - trn(o, 4));
                p1 += w[k]
                    * (-2.0 * trn(op, 1) * trn(o, 1) + trn(op, 2) + trn(o, 1).powi(2));
            }
            vec![0.5 * p0, p1, w[0]]
        }
        4 => {
            let tr3 = |m: &DMatrix<f64>| {
                trn(m, 2).powi(3) - 3.0 * trn(m, 2) * trn(m, 4) + 2.0 * trn(m, 6)
            };
            let mut p0 = w[0] * tr3(o11);
            let mut p1 = 3.0 * w[0] * (trn(o11, 2).powi(2) - trn(o11, 4));
            let mut p2 = w[0] * trn(o11, 2);
            for k in 1..4 {
                let o = &subs[k].o;
                let op = subs[k].oprime.as_ref().unwrap();
                p0 += w[k] * (tr3(op) + tr3(o));
                p1 += w[k]
                    * (-3.0 * (trn(op, 1).powi(2) - trn(op, 2)) * (trn(o, 1).powi(2) - trn(o, 2))
                        + 3.0 * trn(op, 2).powi(2)
                        + 2.0 * trn(op, 1)
                            * (trn(o, 1).powi(3) - 3.0 * trn(o, 1) * trn(o, 2)
                                + 2.0 * trn(o, 3))
                        - 3.0 * trn(op, 4)
                        + 3.0 * trn(o, 2).powi(2)
                        - 3.0 * trn(o, 4));
                p2 += w[k]
                    * (trn(op, 1).powi(2) + trn(o, 1).powi(2)
                        - 2.0 * trn(op, 1) * trn(o, 1));
            }
            vec![p0 / 6.0, p1 / 6.0, p2, w[0]]
        }
        _ => unreachable!(),
    };
    for (alpha, entry) in p.iter_mut().enumerate() {
        *entry *= scale.powi(2 * (n - 1 - alpha) as i32);
    }
    Ok(ElementCoeffs {
        i: 0,
        j: 0,
        p: EvenPolynomial::new(p),
        pp: EvenPolynomial::zeros(n - 1),
    })
}

/// Auto-spectrum of variable `i` through the first-variable machinery:
/// the system is permuted so `i` sits in front, then the closed-form path
/// (when it applies) or the general assembly is evaluated.
pub fn auto_coeffs_general_index(sys: &LtiSystem, i: usize) -> Result<ElementCoeffs> {
    let permuted = sys.permute_to_front(i)?;
    let mut out = if (2..=4).contains(&permuted.n()) && diagonal_channel_weights(&permuted).is_ok()
    {
        closed_form_auto(&permuted)?
    } else {
        auto_coeffs(&permuted, 0)?
    };
    out.i = i;
    out.j = i;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::matrix_oracle;
    use crate::lti::NoiseCovariance;
    use crate::recursive::solve_recursive;
    use crate::testutil::{self, det_shift_complex};
    use nalgebra::{dmatrix, dvector, DVector};

    #[test]
    fn build_o_2d() {
        let j = dmatrix![11.0, 12.0; 21.0, 22.0];
        let o11 = build_o(&j, 0, 0).unwrap();
        assert_eq!(o11.o, dmatrix![22.0]);
        assert_eq!(o11.beta, None);
        let o21 = build_o(&j, 1, 0).unwrap();
        assert_eq!(o21.o, dmatrix![12.0]);
        assert_eq!(o21.beta, Some(0));
        assert_eq!(o21.exchanges, 0);
        assert_eq!(o21.oprime.as_ref().unwrap().nrows(), 0);
    }

    #[test]
    fn build_o_3d_diagonal_minor() {
        let j = DMatrix::from_fn(3, 3, |r, c| (10 * (r + 1) + c + 1) as f64);
        let s = build_o(&j, 0, 0).unwrap();
        assert_eq!(s.o, dmatrix![22.0, 23.0; 32.0, 33.0]);
        assert_eq!(s.exchanges, 0);
    }

    /// The defining property of the rearrangement: for every (i, j) the
    /// true complex minor of J + iωI equals
    /// (−1)^γ·det(O + iωI − iω E_β), with γ the performed exchange count.
    #[test]
    fn build_o_reproduces_minors() {
        let mut rng = testutil::rng(77);
        for n in 2..=5 {
            let j = testutil::random_matrix(&mut rng, n, 1.0);
            for &w in &[0.0, 0.6, 1.7] {
                for i in 0..n {
                    for jc in 0..n {
                        let s = build_o(&j, i, jc).unwrap();
                        let minor_true = {
                            let m = j.map(|x| Complex::new(x, 0.0))
                                + DMatrix::from_diagonal(&DVector::from_element(
                                    n,
                                    Complex::new(0.0, w),
                                ));
                            m.remove_row(i).remove_column(jc).lu().determinant()
                        };
                        let mut shifted = s.o.map(|x| Complex::new(x, 0.0));
                        for k in 0..n - 1 {
                            if s.beta != Some(k) {
                                shifted[(k, k)] += Complex::new(0.0, w);
                            }
                        }
                        let sign = if s.exchanges % 2 == 0 { 1.0 } else { -1.0 };
                        let got = shifted.lu().determinant() * sign;
                        assert!(
                            (got - minor_true).norm() <= 1e-10 * (1.0 + minor_true.norm()),
                            "n={n} (i,j)=({i},{jc}): {got} vs {minor_true}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn build_o_determinant_sign() {
        let mut rng = testutil::rng(3);
        for n in 2..=5 {
            let j = testutil::random_matrix(&mut rng, n, 1.0);
            for i in 0..n {
                for jc in 0..n {
                    let s = build_o(&j, i, jc).unwrap();
                    let n_det = j
                        .clone()
                        .remove_row(i)
                        .remove_column(jc)
                        .lu()
                        .determinant();
                    let o_det = s.o.clone().lu().determinant();
                    let sign = if s.exchanges % 2 == 0 { 1.0 } else { -1.0 };
                    assert!(
                        (o_det - sign * n_det).abs() <= 1e-12 * (1.0 + n_det.abs()),
                        "({i},{jc}): exchanges={}",
                        s.exchanges
                    );
                    if i != jc {
                        assert_eq!(s.exchanges, i.abs_diff(jc) - 1);
                    }
                }
            }
        }
    }

    // ---- canonical function oracles: direct complex arithmetic ----

    fn poly_of_even(coeffs: &[f64], w: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(a, c)| c * w.powi(2 * a as i32))
            .sum()
    }

    fn poly_of_odd(coeffs: &[f64], w: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(a, c)| c * w.powi(2 * a as i32 + 1))
            .sum()
    }

    #[test]
    fn canon_d_examples() {
        let d = canon_d(&dmatrix![-3.0]).unwrap();
        assert_eq!(d.coeffs(), &[9.0, 1.0]);
        let d = canon_d(&DMatrix::from_diagonal(&dvector![-1.0, -2.0])).unwrap();
        assert_eq!(d.coeffs(), &[4.0, 5.0, 1.0]);

        let mut rng = testutil::rng(9);
        let a = testutil::random_matrix(&mut rng, 3, 1.0);
        let d = canon_d(&a).unwrap();
        for &w in &[0.2, 0.5, 0.9, 1.4, 2.0, 3.1, 5.0] {
            let oracle = det_shift_complex(&a, w).norm_sqr();
            assert!(
                (d.eval(w) - oracle).abs() <= 1e-10 * oracle.max(1.0),
                "w={w}"
            );
        }
    }

    #[test]
    fn canon_g_examples() {
        // A = [−a], B empty: g = 2ω(−a − iω).
        let a = 1.7;
        let (g1, g2) = canon_g(&dmatrix![-a], &DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(g1, vec![-2.0 * a]);
        assert_eq!(g2, vec![0.0, -2.0]);

        let mut rng = testutil::rng(10);
        for (ka, seed) in [(2usize, 1u64), (3, 2)] {
            let am = testutil::random_matrix(&mut rng, ka, 1.0) * (seed as f64);
            let bm = testutil::random_matrix(&mut rng, ka - 1, 1.0);
            let (g1, g2) = canon_g(&am, &bm).unwrap();
            for &w in &[0.3, 0.8, 1.3, 1.9, 2.6, 3.4, 4.3] {
                let oracle = det_shift_complex(&am, w).conj() * det_shift_complex(&bm, w)
                    * Complex::new(2.0 * w, 0.0);
                let got = Complex::new(poly_of_odd(&g1, w), poly_of_even(&g2, w));
                assert!(
                    (got - oracle).norm() <= 1e-10 * (1.0 + oracle.norm()),
                    "k={ka} w={w}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn canon_h_examples() {
        let (h1, h2) = canon_h(&dmatrix![-1.0], &dmatrix![-1.0]).unwrap();
        assert_eq!(h1, vec![2.0, 2.0]);
        assert_eq!(h2, vec![0.0]);

        // h(ω; [−1], [−2]) = 2(−1−iω)(−2+iω) = 2(2 + ω²) + 2iω.
        // Frozen from the complex oracle below.
        let (h1, h2) = canon_h(&dmatrix![-1.0], &dmatrix![-2.0]).unwrap();
        assert_eq!(h1, vec![4.0, 2.0]);
        assert_eq!(h2, vec![2.0]);
        for &w in &[0.5, 1.5] {
            let oracle = det_shift_complex(&dmatrix![-1.0], w).conj()
                * det_shift_complex(&dmatrix![-2.0], w)
                * 2.0;
            let got = Complex::new(poly_of_even(&h1, w), poly_of_odd(&h2, w));
            assert!((got - oracle).norm() <= 1e-12 * oracle.norm());
        }

        // Conjugate-pair product is real: h2 ≡ 0 exactly for A = B.
        let mut rng = testutil::rng(12);
        let a = testutil::random_matrix(&mut rng, 3, 1.0);
        let (h1, h2) = canon_h(&a, &a).unwrap();
        let scale = h1.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!(h2.iter().all(|&x| x.abs() <= 1e-15 * scale));
        // And h1/2 equals the d-route: two expansions of |det|².
        let d = canon_d(&a).unwrap();
        for (x, y) in h1.iter().zip(d.coeffs()) {
            assert!((x / 2.0 - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn canon_f_examples() {
        let (a, b) = (1.3, 2.7);
        let f = canon_f(&DMatrix::from_diagonal(&dvector![-a, -b]), 0).unwrap();
        let expect = [a * a * b * b, a * a, 0.0];
        for (x, y) in f.coeffs().iter().zip(expect) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }

        let f = canon_f(&dmatrix![-a], 0).unwrap();
        assert_eq!(f.coeffs(), &[a * a, 0.0]);

        let mut rng = testutil::rng(14);
        let am = testutil::random_matrix(&mut rng, 4, 1.0);
        let f = canon_f(&am, 1).unwrap();
        let bm = am.clone().remove_row(1).remove_column(1);
        for &w in &[0.2, 0.7, 1.1, 1.8, 2.5, 3.3, 4.2, 5.6, 7.1] {
            let inner = det_shift_complex(&am, w)
                - Complex::new(0.0, w) * det_shift_complex(&bm, w);
            let oracle = inner.norm_sqr();
            assert!(
                (f.eval(w) - oracle).abs() <= 1e-10 * oracle.max(1.0),
                "w={w}"
            );
            // Perfect-square modulus: nonnegative everywhere.
            assert!(f.eval(w) >= 0.0);
        }
    }

    #[test]
    fn canon_s_examples() {
        let a = 0.9;
        let (s1, s2) = canon_s(&dmatrix![-a], &dmatrix![-a], 0).unwrap();
        assert_eq!(s1, vec![2.0 * a * a, 0.0]);
        assert_eq!(s2, vec![-2.0 * a]);

        let am = DMatrix::from_diagonal(&dvector![-1.0, -2.0]);
        let bm = DMatrix::from_diagonal(&dvector![-3.0, -4.0]);
        let (s1, s2) = canon_s(&am, &bm, 0).unwrap();
        let cm = bm.clone().remove_row(0).remove_column(0);
        for &w in &[0.1, 0.4, 0.9, 1.5, 2.2, 3.0, 3.9, 4.9, 6.0] {
            let inner = det_shift_complex(&bm, w)
                - Complex::new(0.0, w) * det_shift_complex(&cm, w);
            let oracle = det_shift_complex(&am, w) * inner.conj() * 2.0;
            let got = Complex::new(poly_of_even(&s1, w), poly_of_odd(&s2, w));
            assert!(
                (got - oracle).norm() <= 1e-10 * (1.0 + oracle.norm()),
                "w={w}"
            );
        }
        // ω = 0: s1[0] = 2·det(A)·det(B).
        assert!((s1[0] - 2.0 * 2.0 * 12.0).abs() < 1e-12);
    }

    #[test]
    fn canon_t_examples() {
        // A = B, β1 = β2: t is the real perfect square 2f.
        let mut rng = testutil::rng(15);
        let am = testutil::random_matrix(&mut rng, 3, 1.0);
        let (t1, t2) = canon_t(&am, &am, 1, 1).unwrap();
        let f = canon_f(&am, 1).unwrap();
        for (x, y) in t1.iter().zip(f.coeffs()) {
            assert!((x - 2.0 * y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        for x in &t2 {
            assert!(x.abs() <= 1e-14);
        }

        let am = DMatrix::from_diagonal(&dvector![-1.0, -2.0]);
        let bm = DMatrix::from_diagonal(&dvector![-3.0, -5.0]);
        let (t1, t2) = canon_t(&am, &bm, 0, 1).unwrap();
        let cm = am.clone().remove_row(0).remove_column(0);
        let dm = bm.clone().remove_row(1).remove_column(1);
        for &w in &[0.2, 0.8, 1.6, 2.5, 3.5] {
            let left = det_shift_complex(&am, w)
                - Complex::new(0.0, w) * det_shift_complex(&cm, w);
            let right = det_shift_complex(&bm, w)
                - Complex::new(0.0, w) * det_shift_complex(&dm, w);
            let oracle = left * right.conj() * 2.0;
            let got = Complex::new(poly_of_even(&t1, w), poly_of_odd(&t2, w));
            assert!(
                (got - oracle).norm() <= 1e-10 * (1.0 + oracle.norm()),
                "w={w}"
            );
        }
        // ω = 0: t1[0] = 2·det(A)·det(B).
        assert!((t1[0] - 2.0 * 2.0 * 15.0).abs() < 1e-12);
    }

    // ---- element assembly ----

    fn fhn_system() -> LtiSystem {
        let (ve, we, beta, eps, sigma) = (-1.00125, -0.401665, 0.75, 0.08, 1e-3);
        LtiSystem::new(
            dmatrix![1.0 - ve * ve, -1.0; eps, -beta * eps],
            dmatrix![0.0, 0.0; 0.0, we],
            dvector![sigma * sigma, sigma * sigma],
            None,
        )
        .unwrap()
    }

    #[test]
    fn auto_coeffs_fhn() {
        let sys = fhn_system();
        let ec = auto_coeffs(&sys, 0).unwrap();
        let we = -0.401665;
        let s2 = 1e-6;
        assert!((ec.p.coeffs()[0] - we * we * s2).abs() <= 1e-15);
        assert!(ec.p.coeffs()[1].abs() <= 1e-18);
        assert!(ec.pp.coeffs().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn auto_coeffs_hindmarsh_rose_printed() {
        // HR-structure linearization (noise on x only): the (1,1) minor is
        // diag(−1, −μ) whatever the fixed point, so the numerator is
        // μ²σ² + (μ²+1)σ²ω² + σ²ω⁴.
        let (b, mu, s, sigma) = (0.5, 0.01, 4.0, 1e-3);
        let xe = 0.0244;
        let j = dmatrix![
            2.0 * b * xe - 3.0 * xe * xe, 1.0, -1.0;
            -10.0 * xe, -1.0, 0.0;
            mu * s, 0.0, -mu
        ];
        let o11 = build_o(&j, 0, 0).unwrap().o;
        assert_eq!(o11, DMatrix::from_diagonal(&dvector![-1.0, -mu]));
        let sys = LtiSystem::new(
            j,
            DMatrix::from_diagonal(&dvector![1.0, 0.0, 0.0]),
            DVector::from_element(3, sigma * sigma),
            None,
        )
        .unwrap();
        let ec = auto_coeffs(&sys, 0).unwrap();
        let s2 = sigma * sigma;
        let expect = [mu * mu * s2, (mu * mu + 1.0) * s2, s2];
        for (a, e) in ec.p.coeffs().iter().zip(expect) {
            assert!((a - e).abs() <= 1e-12 * e.abs(), "{a} vs {e}");
        }
    }

    #[test]
    fn auto_coeffs_generic_2d_vs_oracle() {
        // Pins the 2-D auto-spectrum coefficients against the matrix
        // oracle: p0 = c1·Tr(O11²) + c2·Tr(O21²), p1 = c1 (the direct
        // channel of the first variable).
        let mut rng = testutil::rng(21);
        let j = testutil::random_hurwitz(&mut rng, 2);
        let l = DMatrix::from_diagonal(&dvector![0.8, 1.3]);
        let d = dvector![1.7, 0.6];
        let sys = LtiSystem::new(j.clone(), l, d.clone(), None).unwrap();
        let c1 = 0.8 * 0.8 * 1.7;
        let c2 = 1.3 * 1.3 * 0.6;
        let ec = auto_coeffs(&sys, 0).unwrap();
        let o11 = build_o(&j, 0, 0).unwrap().o;
        let o21 = build_o(&j, 1, 0).unwrap().o;
        let p0 = c1 * trn(&o11, 2) + c2 * trn(&o21, 2);
        assert!((ec.p.coeffs()[0] - p0).abs() <= 1e-12 * p0.abs());
        assert!((ec.p.coeffs()[1] - c1).abs() <= 1e-12 * c1);
        // Against the oracle on a grid.
        let q = denominator_coeffs(&j).unwrap();
        for &w in &[0.0, 0.3, 1.1, 2.9] {
            let oracle = matrix_oracle(&sys, w).unwrap().s[(0, 0)].re;
            let got = ec.eval_with_q(&q, w).re;
            assert!((got - oracle).abs() <= 1e-10 * oracle.max(1e-12), "w={w}");
        }
    }

    #[test]
    fn cross_coeffs_decoupled_is_zero() {
        let sys = LtiSystem::new(
            DMatrix::from_diagonal(&dvector![-1.0, -2.0]),
            DMatrix::identity(2, 2),
            dvector![1.0, 1.0],
            None,
        )
        .unwrap();
        let ec = cross_coeffs(&sys, 0, 1).unwrap();
        assert!(ec.p.coeffs().iter().all(|&x| x.abs() < 1e-15));
        assert!(ec.pp.coeffs().iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn cross_coeffs_fhn_vs_oracle() {
        let sys = fhn_system();
        let ec = cross_coeffs(&sys, 0, 1).unwrap();
        let q = denominator_coeffs(sys.jacobian()).unwrap();
        let scale: f64 = (0..21)
            .map(|k| {
                let w = 0.01 * 1.6f64.powi(k);
                matrix_oracle(&sys, w).unwrap().s[(0, 1)].norm()
            })
            .fold(0.0, f64::max);
        for k in 0..21 {
            let w = 0.01 * 1.6f64.powi(k);
            let oracle = matrix_oracle(&sys, w).unwrap().s[(0, 1)];
            let got = ec.eval_with_q(&q, w);
            assert!(
                (got - oracle).norm() <= 1e-9 * scale,
                "w={w}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn cross_coeffs_hermitian() {
        let mut rng = testutil::rng(33);
        for n in 2..=5 {
            let sys = testutil::random_system(&mut rng, n);
            for i in 0..n {
                for j in 0..i {
                    let ij = cross_coeffs(&sys, i, j).unwrap();
                    let ji = cross_coeffs(&sys, j, i).unwrap();
                    for (a, b) in ij.p.coeffs().iter().zip(ji.p.coeffs()) {
                        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                    }
                    for (a, b) in ij.pp.coeffs().iter().zip(ji.pp.coeffs()) {
                        assert!((a + b).abs() <= 1e-12 * (1.0 + b.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn elementwise_matches_recursive() {
        let mut rng = testutil::rng(44);
        for n in 2..=6 {
            let sys = testutil::random_system(&mut rng, n);
            let cov = NoiseCovariance::from_matrix(
                crate::lti::build_covariance(&sys).matrix().clone(),
            )
            .unwrap();
            let sr = solve_recursive(sys.jacobian(), &cov).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let ec = if i == j {
                        auto_coeffs(&sys, i).unwrap()
                    } else {
                        cross_coeffs(&sys, i, j).unwrap()
                    };
                    let (p_rec, pp_rec) = sr.element(i, j).unwrap();
                    let scale = p_rec
                        .coeffs()
                        .iter()
                        .chain(pp_rec.coeffs())
                        .fold(0.0f64, |m, &x| m.max(x.abs()));
                    for (a, b) in ec.p.coeffs().iter().zip(p_rec.coeffs()) {
                        assert!(
                            (a - b).abs() <= 1e-8 * scale.max(1e-300),
                            "n={n} ({i},{j}) even: {a} vs {b}"
                        );
                    }
                    for (a, b) in ec.pp.coeffs().iter().zip(pp_rec.coeffs()) {
                        assert!(
                            (a - b).abs() <= 1e-8 * scale.max(1e-300),
                            "n={n} ({i},{j}) odd: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn auto_positive_on_grid() {
        let mut rng = testutil::rng(55);
        let sys = testutil::random_system(&mut rng, 4);
        let q = denominator_coeffs(sys.jacobian()).unwrap();
        for i in 0..4 {
            let ec = auto_coeffs(&sys, i).unwrap();
            for k in 0..40 {
                let w = 0.01 * 1.5f64.powi(k);
                assert!(ec.eval_with_q(&q, w).re >= -1e-12);
            }
        }
    }

    #[test]
    fn closed_form_matches_general_path() {
        let mut rng = testutil::rng(66);
        for n in 2..=4 {
            for _ in 0..5 {
                let j = testutil::random_hurwitz(&mut rng, n);
                let l = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| {
                    rng_range(&mut rng)
                }));
                let d = DVector::from_fn(n, |_, _| rng_range(&mut rng).abs() + 0.1);
                let sys = LtiSystem::new(j, l, d, None).unwrap();
                let cf = closed_form_auto(&sys).unwrap();
                let gen = auto_coeffs(&sys, 0).unwrap();
                let scale = gen
                    .p
                    .coeffs()
                    .iter()
                    .fold(0.0f64, |m, &x| m.max(x.abs()));
                for (a, b) in cf.p.coeffs().iter().zip(gen.p.coeffs()) {
                    assert!((a - b).abs() <= 1e-10 * scale, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    fn rng_range(rng: &mut rand_chacha::ChaCha12Rng) -> f64 {
        use rand::Rng;
        rng.random_range(-1.5..1.5)
    }

    #[test]
    fn closed_form_3d_equal_noise_determinant_form() {
        // Equal channel weights: p0 = σ²·det(AᵀA) with A the Jacobian
        // minus its first column; p1 = σ²·Tr(A1ᵀA1 + A2²); p2 = σ².
        let mut rng = testutil::rng(67);
        let j = testutil::random_hurwitz(&mut rng, 3);
        let s2 = 0.37;
        let sys = LtiSystem::new(
            j.clone(),
            DMatrix::identity(3, 3),
            DVector::from_element(3, s2),
            None,
        )
        .unwrap();
        let cf = closed_form_auto(&sys).unwrap();
        let a = j.clone().remove_column(0);
        let p0 = s2 * (a.transpose() * &a).determinant();
        let a1 = a.rows(0, 1).into_owned();
        let a2 = a.rows(1, 2).into_owned();
        let p1 = s2 * ((a1.transpose() * &a1).trace() + (&a2 * &a2).trace());
        assert!((cf.p.coeffs()[0] - p0).abs() <= 1e-10 * p0.abs().max(1e-12));
        assert!((cf.p.coeffs()[1] - p1).abs() <= 1e-10 * p1.abs().max(1e-12));
        assert!((cf.p.coeffs()[2] - s2).abs() <= 1e-14);
    }

    #[test]
    fn closed_form_4d_leading_coefficient() {
        let mut rng = testutil::rng(68);
        let j = testutil::random_hurwitz(&mut rng, 4);
        let l = DMatrix::from_diagonal(&dvector![0.7, 1.1, 0.4, 0.9]);
        let d = dvector![1.3, 0.5, 2.0, 0.8];
        let sys = LtiSystem::new(j, l, d, None).unwrap();
        let cf = closed_form_auto(&sys).unwrap();
        let expect = 0.7 * 0.7 * 1.3;
        assert!((cf.p.coeffs()[3] - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn general_index_permutation() {
        let mut rng = testutil::rng(70);
        let sys = testutil::random_system(&mut rng, 3);
        // Permuting index 0 is the identity.
        let a = auto_coeffs_general_index(&sys, 0).unwrap();
        let b = auto_coeffs(&sys, 0).unwrap();
        for (x, y) in a.p.coeffs().iter().zip(b.p.coeffs()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        // Index 2 via permutation equals the direct assembly.
        let a = auto_coeffs_general_index(&sys, 2).unwrap();
        let b = auto_coeffs(&sys, 2).unwrap();
        let scale = b.p.coeffs().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        for (x, y) in a.p.coeffs().iter().zip(b.p.coeffs()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }
}
