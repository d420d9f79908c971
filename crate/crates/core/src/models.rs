//! The five nonlinear benchmark models with drift, state-dependent
//! dispersion, fixed points, and analytic Jacobians, each reducible to an
//! [`LtiSystem`] by linearization at the fixed point. Multiplicative noise
//! is frozen at the fixed point (`L(x*)` becomes the constant dispersion),
//! the only convention consistent with the linearized treatment.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::LtiSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Fitzhugh–Nagumo (n = 2), multiplicative noise on the recovery
    /// variable.
    Fhn,
    /// Hindmarsh–Rose (n = 3), additive noise on the membrane potential.
    HindmarshRose,
    /// Four-variable Wilson–Cowan rate model with synaptic activations.
    WilsonCowan4,
    /// Stabilized Supralinear Network on a 1-D grid (n = 2·sites).
    Ssn,
    /// Replicator–mutator rock-paper-scissors family, reduced to n − 1
    /// coordinates by mass conservation; multiplicative noise σ·x_i.
    Rps,
}

/// A model definition: name, parameter map (defaults from the reference
/// configurations), and the drift/dispersion/Jacobian maps derived from
/// the parameters.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    name: &'static str,
    params: BTreeMap<String, f64>,
}

fn params_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn fhn_model() -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Fhn,
        name: "fhn",
        params: params_of(&[
            ("i_ext", 0.265),
            ("alpha", 0.7),
            ("beta", 0.75),
            ("eps", 0.08),
            ("sigma", 1e-3),
        ]),
    }
}

pub fn hindmarsh_rose_model() -> ModelSpec {
    ModelSpec {
        kind: ModelKind::HindmarshRose,
        name: "hr",
        params: params_of(&[
            ("i_ext", 5.5),
            ("b", 0.5),
            ("mu", 0.01),
            ("x_rest", -1.6),
            ("s", 4.0),
            ("sigma", 1e-3),
        ]),
    }
}

pub fn wilson_cowan_model() -> ModelSpec {
    ModelSpec {
        kind: ModelKind::WilsonCowan4,
        name: "wc4",
        // Times in milliseconds.
        params: params_of(&[
            ("tau_e", 2.0),
            ("tau_i", 8.0),
            ("tau_se", 10.0),
            ("tau_si", 10.0),
            ("w_ee", 5.0),
            ("w_ei", 5.0),
            ("w_ie", 3.5),
            ("w_ii", 3.0),
            ("theta_e", 0.4),
            ("theta_i", 0.4),
            ("kappa_e", 0.2),
            ("kappa_i", 0.02),
            ("gamma_e", 1.0),
            ("gamma_i", 2.0),
            ("i_e", 1.0),
            ("i_i", 0.5),
            ("se0", 0.2),
            ("si0", 0.05),
            ("sigma_r", 1e-3),
            ("sigma_s", 2e-3),
        ]),
    }
}

pub fn ssn_model() -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Ssn,
        name: "ssn",
        // The published weight tables live in supplementary material; the
        // magnitudes here are configuration defaults calibrated to give a
        // Hurwitz fixed point with damped oscillations. Times in ms.
        params: params_of(&[
            ("n_sites", 11.0),
            ("contrast", 50.0),
            ("dx", 3.0),
            ("stim_width", 4.5),
            ("tau_e", 6.0),
            ("tau_i", 4.0),
            ("k", 0.01),
            ("n_exp", 2.2),
            ("sigma", 1e-2),
            ("j_ee", 1.0),
            ("j_ie", 1.25),
            ("j_ei", 0.75),
            ("j_ii", 0.55),
            ("sigma_ee", 4.0),
            ("sigma_ie", 8.0),
        ]),
    }
}

pub fn rps_model(n: usize, mu: f64, sigma: f64) -> Result<ModelSpec> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "the cyclic zero-sum payoff needs an odd population count >= 3, got {n}"
        )));
    }
    Ok(ModelSpec {
        kind: ModelKind::Rps,
        name: "rps",
        params: params_of(&[("n", n as f64), ("mu", mu), ("sigma", sigma)]),
    })
}

/// `1/(1 + e^{−x})` without overflow for large |x|.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Payoff entry of the generalized rock-paper-scissors game, 1-based
/// indices: +1/−1 alternating by i+j parity, winners below the diagonal
/// on odd offsets.
fn rps_payoff(i: usize, j: usize) -> f64 {
    use std::cmp::Ordering;
    match i.cmp(&j) {
        Ordering::Equal => 0.0,
        Ordering::Greater => {
            if (i + j) % 2 == 0 {
                -1.0
            } else {
                1.0
            }
        }
        Ordering::Less => {
            if (i + j) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

impl ModelSpec {
    pub fn by_name(name: &str) -> Result<ModelSpec> {
        match name {
            "fhn" => Ok(fhn_model()),
            "hr" => Ok(hindmarsh_rose_model()),
            "wc4" => Ok(wilson_cowan_model()),
            "ssn" => Ok(ssn_model()),
            "rps" => rps_model(31, 5e-4, 1e-4),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["fhn", "hr", "wc4", "ssn", "rps"]
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        if !self.params.contains_key(key) {
            return Err(Error::UnknownParameter {
                model: self.name.to_string(),
                param: key.to_string(),
            });
        }
        if self.kind == ModelKind::Rps && key == "n" {
            let n = value as usize;
            if value.fract() != 0.0 || n < 3 || n % 2 == 0 {
                return Err(Error::InvalidArgument(format!(
                    "rps population count must be an odd integer >= 3, got {value}"
                )));
            }
        }
        if self.kind == ModelKind::Ssn && key == "n_sites" {
            let n = value as usize;
            if value.fract() != 0.0 || n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "ssn site count must be an integer >= 2, got {value}"
                )));
            }
        }
        self.params.insert(key.to_string(), value);
        Ok(())
    }

    fn p(&self, key: &str) -> f64 {
        self.params[key]
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Fhn => 2,
            ModelKind::HindmarshRose => 3,
            ModelKind::WilsonCowan4 => 4,
            ModelKind::Ssn => 2 * self.p("n_sites") as usize,
            ModelKind::Rps => self.p("n") as usize - 1,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self.kind {
            ModelKind::Fhn => vec!["v".into(), "w".into()],
            ModelKind::HindmarshRose => vec!["x".into(), "y".into(), "z".into()],
            ModelKind::WilsonCowan4 => {
                vec!["r_E".into(), "r_I".into(), "s_E".into(), "s_I".into()]
            }
            ModelKind::Ssn => {
                let n = self.p("n_sites") as usize;
                (0..n)
                    .map(|k| format!("r_E{}", k + 1))
                    .chain((0..n).map(|k| format!("r_I{}", k + 1)))
                    .collect()
            }
            ModelKind::Rps => (1..self.p("n") as usize).map(|k| format!("x{k}")).collect(),
        }
    }

    /// Suggested Euler–Maruyama step for this model's time scales.
    pub fn default_dt(&self) -> f64 {
        match self.kind {
            ModelKind::Fhn => 0.01,
            ModelKind::HindmarshRose => 0.01,
            ModelKind::WilsonCowan4 => 0.05,
            ModelKind::Ssn => 0.05,
            ModelKind::Rps => 0.05,
        }
    }

    /// Grid positions of the SSN sites (centered, spacing `dx`).
    fn ssn_grid(&self) -> Vec<f64> {
        let n = self.p("n_sites") as usize;
        let dx = self.p("dx");
        (0..n)
            .map(|k| (k as f64 - (n as f64 - 1.0) / 2.0) * dx)
            .collect()
    }

    /// SSN inputs and weights: (h, W_EE, W_IE, w_EI diag, w_II diag).
    fn ssn_structure(&self) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>, f64, f64) {
        let grid = self.ssn_grid();
        let n = grid.len();
        let c = self.p("contrast");
        let sw = self.p("stim_width");
        let h = DVector::from_fn(n, |k, _| c * (-grid[k] * grid[k] / (2.0 * sw * sw)).exp());
        let gauss = |jmag: f64, width: f64| {
            DMatrix::from_fn(n, n, |a, b| {
                let d = grid[a] - grid[b];
                jmag * (-d * d / (2.0 * width * width)).exp()
            })
        };
        let w_ee = gauss(self.p("j_ee"), self.p("sigma_ee"));
        let w_ie = gauss(self.p("j_ie"), self.p("sigma_ie"));
        (h, w_ee, w_ie, self.p("j_ei"), self.p("j_ii"))
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ModelKind::Fhn => {
                let (v, w) = (x[0], x[1]);
                let (i_ext, alpha, beta, eps) =
                    (self.p("i_ext"), self.p("alpha"), self.p("beta"), self.p("eps"));
                DVector::from_vec(vec![
                    v - v * v * v / 3.0 - w + i_ext,
                    eps * (v + alpha - beta * w),
                ])
            }
            ModelKind::HindmarshRose => {
                let (xv, y, z) = (x[0], x[1], x[2]);
                let (i_ext, b, mu, x_rest, s) = (
                    self.p("i_ext"),
                    self.p("b"),
                    self.p("mu"),
                    self.p("x_rest"),
                    self.p("s"),
                );
                DVector::from_vec(vec![
                    y - xv * xv * xv + b * xv * xv + i_ext - z,
                    1.0 - 5.0 * xv * xv - y,
                    mu * (s * (xv - x_rest) - z),
                ])
            }
            ModelKind::WilsonCowan4 => {
                let (re, ri, se, si) = (x[0], x[1], x[2], x[3]);
                let ue = (self.p("i_e") + self.p("w_ee") * se
                    - self.p("w_ei") * si
                    - self.p("theta_e"))
                    / self.p("kappa_e");
                let ui = (self.p("i_i") + self.p("w_ie") * se
                    - self.p("w_ii") * si
                    - self.p("theta_i"))
                    / self.p("kappa_i");
                DVector::from_vec(vec![
                    (-re + sigmoid(ue)) / self.p("tau_e"),
                    (-ri + sigmoid(ui)) / self.p("tau_i"),
                    (-se + self.p("gamma_e") * re * (1.0 - se) + self.p("se0")) / self.p("tau_se"),
                    (-si + self.p("gamma_i") * ri * (1.0 - si) + self.p("si0")) / self.p("tau_si"),
                ])
            }
            ModelKind::Ssn => {
                let n = self.p("n_sites") as usize;
                let (h, w_ee, w_ie, w_ei, w_ii) = self.ssn_structure();
                let (k, n_exp) = (self.p("k"), self.p("n_exp"));
                let re = x.rows(0, n).into_owned();
                let ri = x.rows(n, n).into_owned();
                let ue = &h + &w_ee * &re - &ri * w_ei;
                let ui = &h + &w_ie * &re - &ri * w_ii;
                let mut out = DVector::zeros(2 * n);
                for idx in 0..n {
                    let sse = k * ue[idx].max(0.0).powf(n_exp);
                    let ssi = k * ui[idx].max(0.0).powf(n_exp);
                    out[idx] = (-re[idx] + sse) / self.p("tau_e");
                    out[n + idx] = (-ri[idx] + ssi) / self.p("tau_i");
                }
                out
            }
            ModelKind::Rps => {
                let n = self.p("n") as usize;
                let mu = self.p("mu");
                let xn = 1.0 - x.sum();
                let mut out = DVector::zeros(n - 1);
                for i in 1..n {
                    // Individual payoff against the full population,
                    // including the derived n-th coordinate.
                    let mut f = rps_payoff(i, n) * xn;
                    for j in 1..n {
                        f += rps_payoff(i, j) * x[j - 1];
                    }
                    out[i - 1] = x[i - 1] * f + mu * (1.0 - n as f64 * x[i - 1]);
                }
                out
            }
        }
    }

    pub fn dispersion(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self.kind {
            ModelKind::Fhn => {
                let sigma = self.p("sigma");
                let mut l = DMatrix::zeros(2, 2);
                l[(1, 1)] = sigma * x[1];
                l
            }
            ModelKind::HindmarshRose => {
                let mut l = DMatrix::zeros(3, 3);
                l[(0, 0)] = self.p("sigma");
                l
            }
            ModelKind::WilsonCowan4 => DMatrix::from_diagonal(&DVector::from_vec(vec![
                self.p("sigma_r") / self.p("tau_e"),
                self.p("sigma_r") / self.p("tau_i"),
                self.p("sigma_s") / self.p("tau_se"),
                self.p("sigma_s") / self.p("tau_si"),
            ])),
            ModelKind::Ssn => {
                let n = self.p("n_sites") as usize;
                let sigma = self.p("sigma");
                let mut diag = DVector::zeros(2 * n);
                for k in 0..n {
                    diag[k] = sigma / self.p("tau_e");
                    diag[n + k] = sigma / self.p("tau_i");
                }
                DMatrix::from_diagonal(&diag)
            }
            ModelKind::Rps => {
                let sigma = self.p("sigma");
                DMatrix::from_diagonal(&x.map(|xi| sigma * xi))
            }
        }
    }

    pub fn analytic_jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self.kind {
            ModelKind::Fhn => {
                let v = x[0];
                let (beta, eps) = (self.p("beta"), self.p("eps"));
                Some(DMatrix::from_row_slice(
                    2,
                    2,
                    &[1.0 - v * v, -1.0, eps, -beta * eps],
                ))
            }
            ModelKind::HindmarshRose => {
                let xv = x[0];
                let (b, mu, s) = (self.p("b"), self.p("mu"), self.p("s"));
                Some(DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        2.0 * b * xv - 3.0 * xv * xv,
                        1.0,
                        -1.0,
                        -10.0 * xv,
                        -1.0,
                        0.0,
                        mu * s,
                        0.0,
                        -mu,
                    ],
                ))
            }
            ModelKind::WilsonCowan4 => {
                let (se, si) = (x[2], x[3]);
                let (re, ri) = (x[0], x[1]);
                let ue = (self.p("i_e") + self.p("w_ee") * se
                    - self.p("w_ei") * si
                    - self.p("theta_e"))
                    / self.p("kappa_e");
                let ui = (self.p("i_i") + self.p("w_ie") * se
                    - self.p("w_ii") * si
                    - self.p("theta_i"))
                    / self.p("kappa_i");
                let (fe, fi) = (sigmoid(ue), sigmoid(ui));
                let (dfe, dfi) = (fe * (1.0 - fe), fi * (1.0 - fi));
                let (te, ti, tse, tsi) = (
                    self.p("tau_e"),
                    self.p("tau_i"),
                    self.p("tau_se"),
                    self.p("tau_si"),
                );
                let mut j = DMatrix::zeros(4, 4);
                j[(0, 0)] = -1.0 / te;
                j[(0, 2)] = dfe * self.p("w_ee") / (self.p("kappa_e") * te);
                j[(0, 3)] = -dfe * self.p("w_ei") / (self.p("kappa_e") * te);
                j[(1, 1)] = -1.0 / ti;
                j[(1, 2)] = dfi * self.p("w_ie") / (self.p("kappa_i") * ti);
                j[(1, 3)] = -dfi * self.p("w_ii") / (self.p("kappa_i") * ti);
                j[(2, 0)] = self.p("gamma_e") * (1.0 - se) / tse;
                j[(2, 2)] = (-1.0 - self.p("gamma_e") * re) / tse;
                j[(3, 1)] = self.p("gamma_i") * (1.0 - si) / tsi;
                j[(3, 3)] = (-1.0 - self.p("gamma_i") * ri) / tsi;
                Some(j)
            }
            ModelKind::Ssn => {
                let n = self.p("n_sites") as usize;
                let (h, w_ee, w_ie, w_ei, w_ii) = self.ssn_structure();
                let (k, n_exp) = (self.p("k"), self.p("n_exp"));
                let re = x.rows(0, n).into_owned();
                let ri = x.rows(n, n).into_owned();
                let ue = &h + &w_ee * &re - &ri * w_ei;
                let ui = &h + &w_ie * &re - &ri * w_ii;
                let gain = |u: f64| {
                    if u > 0.0 {
                        k * n_exp * u.powf(n_exp - 1.0)
                    } else {
                        0.0
                    }
                };
                let mut j = DMatrix::zeros(2 * n, 2 * n);
                for a in 0..n {
                    let ge = gain(ue[a]) / self.p("tau_e");
                    let gi = gain(ui[a]) / self.p("tau_i");
                    for b in 0..n {
                        j[(a, b)] = ge * w_ee[(a, b)];
                        j[(n + a, b)] = gi * w_ie[(a, b)];
                    }
                    j[(a, a)] -= 1.0 / self.p("tau_e");
                    j[(a, n + a)] = -ge * w_ei;
                    j[(n + a, n + a)] = -gi * w_ii - 1.0 / self.p("tau_i");
                }
                Some(j)
            }
            ModelKind::Rps => {
                let n = self.p("n") as usize;
                let mu = self.p("mu");
                let xn = 1.0 - x.sum();
                let mut j = DMatrix::zeros(n - 1, n - 1);
                for i in 1..n {
                    let mut f = rps_payoff(i, n) * xn;
                    for q in 1..n {
                        f += rps_payoff(i, q) * x[q - 1];
                    }
                    for jj in 1..n {
                        let dfdx = rps_payoff(i, jj) - rps_payoff(i, n);
                        j[(i - 1, jj - 1)] = x[i - 1] * dfdx;
                        if i == jj {
                            j[(i - 1, jj - 1)] += f - mu * n as f64;
                        }
                    }
                }
                Some(j)
            }
        }
    }

    /// Starting state for the fixed-point search.
    fn newton_start(&self) -> DVector<f64> {
        match self.kind {
            // Cubic-nullcline ballpark in the subthreshold regime.
            ModelKind::Fhn => {
                let v0 = -1.0;
                DVector::from_vec(vec![v0, (v0 + self.p("alpha")) / self.p("beta")])
            }
            ModelKind::HindmarshRose => {
                let s = self.p("s");
                let xr = self.p("x_rest");
                DVector::from_vec(vec![0.0, 1.0, s * (0.0 - xr)])
            }
            ModelKind::WilsonCowan4 => DVector::from_vec(vec![0.6, 0.8, 0.5, 0.6]),
            ModelKind::Ssn => DVector::zeros(self.dim()),
            ModelKind::Rps => {
                let n = self.p("n");
                DVector::from_element(self.dim(), 1.0 / n)
            }
        }
    }
}

/// How the fixed point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpMethod {
    Analytic,
    Newton,
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub x: DVector<f64>,
    pub residual: f64,
    pub method: FpMethod,
}

/// Central finite-difference Jacobian with per-column step
/// `1e−6·max(1, |x_i|)`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let fx = f(x);
    let m = fx.len();
    let mut j = DMatrix::zeros(m, n);
    for col in 0..n {
        let h = 1e-6 * x[col].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += h;
        xm[col] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for row in 0..m {
            j[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    j
}

const NEWTON_MAX_ITERS: usize = 200;
const NEWTON_TOL: f64 = 1e-12;

fn damped_newton<F>(f: &F, start: &DVector<f64>) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = start.clone();
    let mut fx = f(&x);
    for _ in 0..NEWTON_MAX_ITERS {
        let norm = fx.norm();
        if norm <= NEWTON_TOL * (1.0 + x.norm()) {
            return Ok(x);
        }
        let j = fd_jacobian(f, &x);
        let step = j
            .lu()
            .solve(&fx)
            .ok_or_else(|| Error::FixedPointDiverged("singular Newton Jacobian".into()))?;
        // Backtracking on the residual norm.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &x - &step * lambda;
            let fc = f(&cand);
            if fc.norm() < norm {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::FixedPointDiverged(format!(
                "line search stalled at residual {norm:.3e}"
            )));
        }
    }
    let norm = fx.norm();
    if norm <= NEWTON_TOL * (1.0 + x.norm()) {
        Ok(x)
    } else {
        Err(Error::FixedPointDiverged(format!(
            "no convergence after {NEWTON_MAX_ITERS} iterations, residual {norm:.3e}"
        )))
    }
}

/// Finds the model's fixed point: analytically where one is known (the
/// uniform replicator state), otherwise by damped Newton from the model's
/// heuristic start, with a deterministic relaxation retry when Newton
/// stalls far from the basin.
pub fn find_fixed_point(model: &ModelSpec) -> Result<FixedPoint> {
    if model.kind() == ModelKind::Rps {
        let x = model.newton_start();
        let residual = model.drift(&x).norm();
        return Ok(FixedPoint {
            x,
            residual,
            method: FpMethod::Analytic,
        });
    }
    let f = |x: &DVector<f64>| model.drift(x);
    let mut start = model.newton_start();
    let mut last_err = None;
    for _round in 0..3 {
        match damped_newton(&f, &start) {
            Ok(x) => {
                let residual = model.drift(&x).norm();
                return Ok(FixedPoint {
                    x,
                    residual,
                    method: FpMethod::Newton,
                });
            }
            Err(e) => {
                last_err = Some(e);
                // Relax toward the attractor with the deterministic flow.
                let dt = model.default_dt();
                for _ in 0..20_000 {
                    let dx = model.drift(&start) * dt;
                    start += dx;
                    if start.iter().any(|v| !v.is_finite()) {
                        return Err(Error::FixedPointDiverged(
                            "deterministic relaxation diverged".into(),
                        ));
                    }
                }
            }
        }
    }
    Err(last_err.unwrap())
}

/// Linearizes at the fixed point: analytic Jacobian where the model
/// provides one (cross-checked by tests against finite differences),
/// dispersion frozen at `x*`, unit per-channel diffusion.
pub fn linearize(model: &ModelSpec, fp: &FixedPoint) -> Result<LtiSystem> {
    if fp.residual > 1e-10 * (1.0 + fp.x.norm()) {
        return Err(Error::FixedPointDiverged(format!(
            "fixed-point residual {:.3e} too large to linearize",
            fp.residual
        )));
    }
    let j = model
        .analytic_jacobian(&fp.x)
        .unwrap_or_else(|| fd_jacobian(|x| model.drift(x), &fp.x));
    let l = model.dispersion(&fp.x);
    let m = l.ncols();
    LtiSystem::new(j, l, DVector::from_element(m, 1.0), Some(model.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{hurwitz_check, StabilityVerdict};
    use crate::poly::denominator_coeffs;

    #[test]
    fn fhn_fixed_point_matches_reference() {
        let model = fhn_model();
        let fp = find_fixed_point(&model).unwrap();
        assert!((fp.x[0] - -1.00125).abs() < 1e-5, "v_e = {}", fp.x[0]);
        assert!((fp.x[1] - -0.401665).abs() < 1e-5, "w_e = {}", fp.x[1]);
        assert!(fp.residual <= 1e-10 * (1.0 + fp.x.norm()));
        let sys = linearize(&model, &fp).unwrap();
        assert_eq!(hurwitz_check(sys.jacobian()), StabilityVerdict::Stable);
        // Frozen multiplicative dispersion: L₂₂ = σ·w_e.
        let expect = 1e-3 * fp.x[1];
        assert!((sys.dispersion()[(1, 1)] - expect).abs() < 1e-12);
        assert_eq!(sys.dispersion()[(0, 0)], 0.0);
    }

    #[test]
    fn hr_fixed_point_and_denominator() {
        let model = hindmarsh_rose_model();
        let fp = find_fixed_point(&model).unwrap();
        assert!(fp.residual <= 1e-10 * (1.0 + fp.x.norm()));
        let sys = linearize(&model, &fp).unwrap();
        assert_eq!(hurwitz_check(sys.jacobian()), StabilityVerdict::Stable);
        // q₀ = μ²(x_e(3x_e − 2b + 10) + s)², q₃ = 1.
        let (b, mu, s) = (0.5, 0.01, 4.0);
        let xe = fp.x[0];
        let q = denominator_coeffs(sys.jacobian()).unwrap();
        let q0 = (mu * (xe * (3.0 * xe - 2.0 * b + 10.0) + s)).powi(2);
        assert!((q.coeffs()[0] - q0).abs() <= 1e-10 * q0);
        assert_eq!(q.coeffs()[3], 1.0);
    }

    #[test]
    fn wc4_fixed_point() {
        let model = wilson_cowan_model();
        assert_eq!(model.p("tau_e"), 2.0);
        assert_eq!(model.p("w_ie"), 3.5);
        let fp = find_fixed_point(&model).unwrap();
        assert!(fp.residual <= 1e-10 * (1.0 + fp.x.norm()), "{}", fp.residual);
        let sys = linearize(&model, &fp).unwrap();
        assert_eq!(hurwitz_check(sys.jacobian()), StabilityVerdict::Stable);
    }

    #[test]
    fn ssn_zero_contrast_origin() {
        let mut model = ssn_model();
        model.set_param("contrast", 0.0).unwrap();
        let fp = find_fixed_point(&model).unwrap();
        assert!(fp.x.norm() == 0.0, "expected the origin, got {:?}", fp.x);
    }

    #[test]
    fn ssn_default_is_hurwitz() {
        let model = ssn_model();
        let fp = find_fixed_point(&model).unwrap();
        assert!(fp.residual <= 1e-10 * (1.0 + fp.x.norm()));
        // All driven rates positive at the fixed point.
        assert!(fp.x.iter().all(|&r| r >= 0.0));
        let sys = linearize(&model, &fp).unwrap();
        assert_eq!(sys.n(), 22);
        assert_eq!(hurwitz_check(sys.jacobian()), StabilityVerdict::Stable);
    }

    #[test]
    fn rps_fixed_point_and_jacobian() {
        let model = rps_model(31, 5e-4, 1e-4).unwrap();
        let fp = find_fixed_point(&model).unwrap();
        assert_eq!(fp.method, FpMethod::Analytic);
        for v in fp.x.iter() {
            assert_eq!(*v, 1.0 / 31.0);
        }
        assert!(fp.residual <= 1e-14);
        let sys = linearize(&model, &fp).unwrap();
        assert_eq!(sys.n(), 30);
        // J_ii = (−1)^i/n − μn with 1-based i.
        let n = 31.0;
        let mu = 5e-4;
        for i in 1..31usize {
            let expect = if i % 2 == 0 { 1.0 / n } else { -1.0 / n } - mu * n;
            assert!(
                (sys.jacobian()[(i - 1, i - 1)] - expect).abs() < 1e-14,
                "i={i}"
            );
        }
        assert_eq!(hurwitz_check(sys.jacobian()), StabilityVerdict::Stable);
        // Multiplicative dispersion frozen at 1/n.
        assert!((sys.dispersion()[(0, 0)] - 1e-4 / 31.0).abs() < 1e-18);
    }

    #[test]
    fn rps_rejects_even_counts() {
        assert!(rps_model(30, 1e-3, 1e-4).is_err());
        let mut model = rps_model(31, 1e-3, 1e-4).unwrap();
        assert!(model.set_param("n", 8.0).is_err());
        assert!(model.set_param("n", 7.0).is_ok());
        assert_eq!(model.dim(), 6);
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let models = vec![
            fhn_model(),
            hindmarsh_rose_model(),
            wilson_cowan_model(),
            ssn_model(),
            rps_model(7, 1e-3, 1e-4).unwrap(),
        ];
        for model in models {
            let fp = find_fixed_point(&model).unwrap();
            let analytic = model.analytic_jacobian(&fp.x).unwrap();
            let fd = fd_jacobian(|x| model.drift(x), &fp.x);
            let denom = analytic.norm().max(1e-12);
            assert!(
                (&analytic - &fd).norm() <= 1e-6 * denom,
                "{}: |Δ| = {:.3e}",
                model.name(),
                (&analytic - &fd).norm() / denom
            );
        }
    }

    #[test]
    fn rps_conservation_under_simulation() {
        use crate::sim::{simulate, SimConfig};
        let model = rps_model(5, 1e-3, 1e-3).unwrap();
        let fp = find_fixed_point(&model).unwrap();
        let cfg = SimConfig::new(0.05, 50.0, 0.0, 3, fp.x.clone()).unwrap();
        let traj = simulate(
            |x| model.drift(x),
            |x| model.dispersion(x),
            &cfg,
        )
        .unwrap();
        for k in 0..traj.len() {
            let frame = traj.frame(k);
            let total: f64 = frame.iter().sum::<f64>() + (1.0 - frame.iter().sum::<f64>());
            assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn unknown_names_and_params() {
        assert!(ModelSpec::by_name("nope").is_err());
        let mut model = fhn_model();
        assert!(model.set_param("gamma", 1.0).is_err());
        assert!(model.set_param("eps", 0.1).is_ok());
    }
}
