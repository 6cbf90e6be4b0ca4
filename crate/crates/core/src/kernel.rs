//! Finite-chain analysis for `beta = 0` and the linear-model CLT covariance.
//!
//! For `beta = 0` the predictive mean only remembers the last draw, so it is
//! a Markov chain on the `k` states `s_i = (b0 + alpha e_i) / (|b0| + alpha)`
//! with transition matrix `P = (1 b0^T + alpha Id) / (|b0| + alpha)`.
//!
//! For `beta` in `[0, 1)` the draw can be written as an affine function of
//! two consecutive predictive means, `xi_{n+1} - p0 = A1 (psi_n - p0) +
//! A2 (psi_{n+1} - p0)`, and the conditional mean of `psi_{n+1}` is affine in
//! `psi_n` with matrix `A_P`. That pair is a "linear model": the CLT
//! covariance then follows from `A1`, `A2`, `A_P` and the stationary
//! covariance of `psi` alone (see [`linear_model_sigma`]).

use nalgebra::DMatrix;

use crate::error::{Result, UrnError};
use crate::model::{derive_constants, ModelParams, RegimeTag};

/// Condition estimates above this make `Id - A_P` count as singular.
pub const MAX_CONDITION: f64 = 1e12;
const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_CAP: usize = 10_000;

/// Row-stochastic `k x k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(UrnError::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        for (i, row) in entries.row_iter().enumerate() {
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(UrnError::Domain(format!("row {} has a negative entry", i + 1)));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(UrnError::Domain(format!("row {} sums to {s}", i + 1)));
            }
        }
        Ok(TransitionMatrix(entries))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

fn require_beta_zero(params: &ModelParams, op: &'static str) -> Result<()> {
    let regime = params.regime();
    if regime.tag != RegimeTag::BetaZero || regime.b0_zero {
        return Err(UrnError::WrongRegime {
            op,
            regime: regime.to_string(),
        });
    }
    Ok(())
}

/// One-step matrix of the `beta = 0` chain. Row `i` is the law of the next
/// draw given that colour `i` was drawn last.
pub fn transition_matrix_beta0(params: &ModelParams) -> Result<TransitionMatrix> {
    require_beta_zero(params, "transition_matrix_beta0")?;
    let k = params.k();
    let alpha = params.alpha();
    let total = params.b0_mass() + alpha;
    let b0 = params.b0();
    let m = DMatrix::from_fn(k, k, |i, j| {
        let diag = if i == j { alpha } else { 0.0 };
        (b0[j] + diag) / total
    });
    TransitionMatrix::new(m)
}

/// `P^n = 1 p0^T + gamma^n (Id - 1 p0^T)`.
pub fn matrix_power_closed_form(params: &ModelParams, n: u32) -> Result<TransitionMatrix> {
    require_beta_zero(params, "matrix_power_closed_form")?;
    let c = derive_constants(params);
    let gamma = c.gamma()?;
    let p0 = c.p0()?;
    let k = params.k();
    let gn = gamma.powi(n as i32);
    let m = DMatrix::from_fn(k, k, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        p0[j] + gn * (id - p0[j])
    });
    if n == 0 {
        return Ok(TransitionMatrix(DMatrix::identity(k, k)));
    }
    // Row sums drift by a few ulps for large k; renormalizing would hide that.
    TransitionMatrix::new(m)
}

/// `diag(p) - p p^T`.
pub fn multinomial_covariance(p: &[f64]) -> DMatrix<f64> {
    let k = p.len();
    DMatrix::from_fn(k, k, |i, j| if i == j { p[i] - p[i] * p[i] } else { -p[i] * p[j] })
}

/// Matrices of the urn's linear model and the resulting covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub ap: DMatrix<f64>,
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    /// Stationary covariance of the predictive mean.
    pub sigma_pi: DMatrix<f64>,
    /// Asymptotic covariance of `sqrt(N) (xi_bar_N - p0)`.
    pub sigma: DMatrix<f64>,
}

/// `D0 = (A1 + A2 A_P)(Id - A_P)^{-1}`, `D1 = A1 - D0`, `D2 = A2 + D0`.
pub fn linear_model_d_matrices(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ap: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let k = ap.nrows();
    for m in [a1, a2, ap] {
        if m.nrows() != k || m.ncols() != k {
            return Err(UrnError::DimensionMismatch {
                expected: k,
                got: if m.nrows() != k { m.nrows() } else { m.ncols() },
            });
        }
    }
    let radius = spectral_radius(ap);
    if !(radius < 1.0) {
        return Err(UrnError::NotContractive { radius });
    }
    let resolvent = DMatrix::identity(k, k) - ap;
    let condition = condition_number(&resolvent);
    if !(condition <= MAX_CONDITION) {
        return Err(UrnError::Singular { condition });
    }
    let inv = resolvent
        .lu()
        .try_inverse()
        .ok_or(UrnError::Singular { condition: f64::INFINITY })?;
    let d0 = (a1 + a2 * ap) * inv;
    let d1 = a1 - &d0;
    let d2 = a2 + &d0;
    Ok((d0, d1, d2))
}

/// Four-term CLT covariance of a linear model:
/// `D1 S D1^T + D1 S A_P^T D2^T + D2 A_P S D1^T + D2 S D2^T`, with `S` the
/// stationary covariance.
pub fn linear_model_sigma(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ap: &DMatrix<f64>,
    sigma_pi: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if sigma_pi.nrows() != ap.nrows() || !sigma_pi.is_square() {
        return Err(UrnError::DimensionMismatch {
            expected: ap.nrows(),
            got: sigma_pi.nrows(),
        });
    }
    let asym = (sigma_pi - sigma_pi.transpose()).amax();
    if asym > 1e-12 * sigma_pi.amax().max(1.0) {
        return Err(UrnError::Domain("stationary covariance is not symmetric".into()));
    }
    let (_, d1, d2) = linear_model_d_matrices(a1, a2, ap)?;
    let s = sigma_pi;
    let sigma = &d1 * s * d1.transpose()
        + &d1 * s * ap.transpose() * d2.transpose()
        + &d2 * ap * s * d1.transpose()
        + &d2 * s * d2.transpose();
    Ok(symmetrize(sigma))
}

/// The urn's linear model for `beta` in `[0, 1)` with `alpha > 0`:
/// `A1 = -beta/(gamma-beta) Id`, `A2 = 1/(gamma-beta) Id`, `A_P = gamma Id`.
///
/// Only `(alpha, beta, b0)` matter: the initial mass `|B0|` affects the
/// process by a coupling-negligible transient.
pub fn rp_linear_model(params: &ModelParams) -> Result<LinearModel> {
    let regime = params.regime();
    if !regime.is_locally_reinforced() || regime.b0_zero || regime.alpha_zero {
        return Err(UrnError::WrongRegime {
            op: "rp_linear_model",
            regime: regime.to_string(),
        });
    }
    let c = derive_constants(params);
    let (gamma, beta) = (c.gamma()?, params.beta());
    let p0 = c.p0()?;
    let k = params.k();
    let id = DMatrix::<f64>::identity(k, k);
    let gb = gamma - beta;
    let a1 = &id * (-beta / gb);
    let a2 = &id * (1.0 / gb);
    let ap = &id * gamma;
    let m = multinomial_covariance(p0);
    let sigma_pi = &m * (gb * gb / (gb * gb + 1.0 - gamma * gamma));
    let (d0, d1, d2) = linear_model_d_matrices(&a1, &a2, &ap)?;
    let sigma = linear_model_sigma(&a1, &a2, &ap, &sigma_pi)?;
    Ok(LinearModel {
        a1,
        a2,
        ap,
        d0,
        d1,
        d2,
        sigma_pi,
        sigma,
    })
}

/// Asymptotic covariance of `sqrt(N) (xi_bar_N - limit)`.
///
/// * `beta` in `[0, 1)`: `lambda (diag p0 - p0 p0^T)`; `psi_inf` is ignored.
/// * `beta > 1`: `diag(psi_inf) - psi_inf psi_inf^T` for the (random) limit
///   of the predictive means, which must be supplied.
/// * `beta = 1` is the classical Pólya urn and is rejected.
pub fn clt_covariance(params: &ModelParams, psi_inf: Option<&[f64]>) -> Result<DMatrix<f64>> {
    let regime = params.regime();
    match regime.tag {
        RegimeTag::BetaZero | RegimeTag::BetaInUnitInterval => {
            let c = derive_constants(params);
            let lambda = c.lambda()?;
            Ok(multinomial_covariance(c.p0()?) * lambda)
        }
        RegimeTag::BetaAboveOne => {
            let psi = psi_inf.ok_or_else(|| {
                UrnError::Domain("beta > 1 needs the limit predictive mean psi_inf".into())
            })?;
            if psi.len() != params.k() {
                return Err(UrnError::DimensionMismatch {
                    expected: params.k(),
                    got: psi.len(),
                });
            }
            let s: f64 = psi.iter().sum();
            if psi.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(UrnError::Domain("psi_inf must lie on the simplex".into()));
            }
            Ok(multinomial_covariance(psi))
        }
        RegimeTag::BetaOne => Err(UrnError::WrongRegime {
            op: "clt_covariance",
            regime: regime.to_string(),
        }),
    }
}

/// Spectral radius by power iteration (tolerance 1e-10, at most 10^4
/// iterations). When the dominant eigenvalues form a complex pair power
/// iteration oscillates; the Gelfand limit `||M^(2^j)||^(2^-j)` is used then.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    if k == 0 || m.amax() == 0.0 {
        return 0.0;
    }
    let mut v = nalgebra::DVector::from_fn(k, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut prev = f64::NAN;
    for _ in 0..POWER_ITER_CAP {
        let w = m * &v;
        let est = w.norm();
        if est == 0.0 {
            break;
        }
        if (est - prev).abs() <= POWER_ITER_TOL * est.max(1.0) {
            return est;
        }
        prev = est;
        v = w / est;
    }
    gelfand_radius(m)
}

fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut b = m.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..40 {
        let n = b.norm();
        if n == 0.0 {
            return 0.0;
        }
        b /= n;
        log_scale += n.ln();
        b = &b * &b;
        log_scale *= 2.0;
        power *= 2.0;
    }
    (log_scale / power + b.norm().ln() / power).exp()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Row-major copy, for serialization.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
