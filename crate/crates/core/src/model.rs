//! Urn parameters, regime classification and closed-form constants.
//!
//! Every mass is an `f64`: non-integer reinforcement weights and ball counts
//! are allowed. `B0` entries must be nonnegative even though only
//! `b0_i + B0_i > 0` is needed for the urn to be well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};

/// Parameters `(alpha, beta, b0, B0)` of a rescaled Pólya urn with `k`
/// colours.
///
/// Construct with [`ModelParams::new`] (requires `|b0| > 0`) or
/// [`ModelParams::with_zero_intrinsic_allowed`] for the degenerate `b0 = 0`
/// regimes, where the predictive means form a martingale (or, for
/// `beta = 0`, the draw sequence is constant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    b0: Vec<f64>,
    initial_balls: Vec<f64>,
    allow_zero_b0: bool,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
    b0: Vec<f64>,
    #[serde(rename = "B0")]
    initial_balls: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_zero_b0: bool,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = UrnError;

    fn try_from(raw: RawParams) -> Result<Self> {
        Self::build(raw.alpha, raw.beta, raw.b0, raw.initial_balls, raw.allow_zero_b0)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha: p.alpha,
            beta: p.beta,
            b0: p.b0,
            initial_balls: p.initial_balls,
            allow_zero_b0: p.allow_zero_b0,
        }
    }
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, b0: Vec<f64>, initial_balls: Vec<f64>) -> Result<Self> {
        Self::build(alpha, beta, b0, initial_balls, false)
    }

    /// Like [`ModelParams::new`] but accepts `b0 = 0`.
    pub fn with_zero_intrinsic_allowed(
        alpha: f64,
        beta: f64,
        b0: Vec<f64>,
        initial_balls: Vec<f64>,
    ) -> Result<Self> {
        Self::build(alpha, beta, b0, initial_balls, true)
    }

    fn build(
        alpha: f64,
        beta: f64,
        b0: Vec<f64>,
        initial_balls: Vec<f64>,
        allow_zero_b0: bool,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(UrnError::InvalidParams(msg));
        if !(alpha.is_finite() && alpha >= 0.0) {
            return invalid(format!("alpha must be a finite nonnegative real, got {alpha}"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return invalid(format!("beta must be a finite nonnegative real, got {beta}"));
        }
        let k = b0.len();
        if k < 2 {
            return invalid(format!("need at least 2 colours, got {k}"));
        }
        if initial_balls.len() != k {
            return invalid(format!(
                "b0 has {k} entries but B0 has {}",
                initial_balls.len()
            ));
        }
        for (i, (&b, &bb)) in b0.iter().zip(&initial_balls).enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return invalid(format!("b0[{}] must be finite and nonnegative, got {b}", i + 1));
            }
            if !(bb.is_finite() && bb >= 0.0) {
                return invalid(format!("B0[{}] must be finite and nonnegative, got {bb}", i + 1));
            }
            if b + bb <= 0.0 {
                return invalid(format!("b0[{0}] + B0[{0}] must be positive", i + 1));
            }
        }
        let b0_mass: f64 = b0.iter().sum();
        let b_mass: f64 = initial_balls.iter().sum();
        if b0_mass <= 0.0 {
            if !allow_zero_b0 {
                return invalid(
                    "|b0| must be positive (set allow_zero_b0 to study the b0 = 0 regimes)".into(),
                );
            }
            if alpha == 0.0 {
                return invalid("b0 = 0 requires alpha > 0".into());
            }
        }
        if beta > 1.0 && alpha == 0.0 && b_mass <= 0.0 {
            return invalid("beta > 1 with alpha = 0 requires |B0| > 0".into());
        }
        Ok(ModelParams {
            alpha,
            beta,
            b0,
            initial_balls,
            allow_zero_b0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    /// Initial fluctuating composition `B0`.
    pub fn initial_balls(&self) -> &[f64] {
        &self.initial_balls
    }

    pub fn k(&self) -> usize {
        self.b0.len()
    }

    pub fn b0_mass(&self) -> f64 {
        self.b0.iter().sum()
    }

    pub fn initial_mass(&self) -> f64 {
        self.initial_balls.iter().sum()
    }

    pub fn regime(&self) -> Regime {
        Regime::classify(self.alpha, self.beta, self.b0_mass())
    }

    /// Same `(alpha, beta, b0)` with a different initial composition.
    pub fn with_initial_balls(&self, initial_balls: Vec<f64>) -> Result<Self> {
        Self::build(
            self.alpha,
            self.beta,
            self.b0.clone(),
            initial_balls,
            self.allow_zero_b0,
        )
    }

    /// Total mass `r*_n = |b0| + |B_n|` after `n` steps, from the closed form
    /// of the deterministic recursion `|B_{n+1}| = beta |B_n| + alpha`.
    pub fn total_mass_at(&self, n: u64) -> f64 {
        let b0 = self.b0_mass();
        let b = self.initial_mass();
        let (alpha, beta) = (self.alpha, self.beta);
        if beta == 1.0 {
            return b0 + b + alpha * n as f64;
        }
        let fixed = alpha / (1.0 - beta);
        b0 + fixed + beta.powf(n as f64) * (b - fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    BetaZero,
    BetaInUnitInterval,
    BetaOne,
    BetaAboveOne,
}

impl std::fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegimeTag::BetaZero => "beta = 0",
            RegimeTag::BetaInUnitInterval => "beta in (0,1)",
            RegimeTag::BetaOne => "beta = 1",
            RegimeTag::BetaAboveOne => "beta > 1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub alpha_zero: bool,
    pub b0_zero: bool,
}

impl Regime {
    pub fn classify(alpha: f64, beta: f64, b0_mass: f64) -> Self {
        let tag = if beta == 0.0 {
            RegimeTag::BetaZero
        } else if beta < 1.0 {
            RegimeTag::BetaInUnitInterval
        } else if beta == 1.0 {
            RegimeTag::BetaOne
        } else {
            RegimeTag::BetaAboveOne
        };
        Regime {
            tag,
            alpha_zero: alpha == 0.0,
            b0_zero: b0_mass <= 0.0,
        }
    }

    /// `beta` in `[0, 1)`.
    pub fn is_locally_reinforced(&self) -> bool {
        matches!(self.tag, RegimeTag::BetaZero | RegimeTag::BetaInUnitInterval)
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.tag)?;
        if self.alpha_zero {
            f.write_str(", alpha = 0")?;
        }
        if self.b0_zero {
            f.write_str(", b0 = 0")?;
        }
        Ok(())
    }
}

/// Closed-form constants of the urn.
///
/// `gamma` and `r_star` exist only for `beta < 1`; `lambda` additionally
/// needs `|b0| > 0`. Undefined entries serialize as `null`; use the
/// accessor methods to get a descriptive error instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub r_star: Option<f64>,
    pub p0: Option<Vec<f64>>,
    pub regime: Regime,
}

impl DerivedConstants {
    pub fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or(UrnError::WrongRegime {
            op: "gamma",
            regime: self.regime.to_string(),
        })
    }

    pub fn lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) => Ok(l),
            None if !self.regime.is_locally_reinforced() => {
                Err(UrnError::LambdaUndefined("only defined for beta in [0, 1)"))
            }
            None => Err(UrnError::LambdaUndefined(
                "|b0| = 0 gives gamma = 1 and the variance factor diverges",
            )),
        }
    }

    pub fn r_star(&self) -> Result<f64> {
        self.r_star.ok_or(UrnError::WrongRegime {
            op: "r_star",
            regime: self.regime.to_string(),
        })
    }

    pub fn p0(&self) -> Result<&[f64]> {
        self.p0.as_deref().ok_or(UrnError::WrongRegime {
            op: "p0",
            regime: self.regime.to_string(),
        })
    }
}

/// Inflation factor as a function of `gamma` and `beta`.
pub fn lambda_from(gamma: f64, beta: f64) -> f64 {
    let gb = gamma - beta;
    (1.0 - beta).powi(2) / (gb * gb + (1.0 - gamma * gamma)) * (1.0 + 2.0 * gamma / (1.0 - gamma))
}

pub fn derive_constants(params: &ModelParams) -> DerivedConstants {
    let regime = params.regime();
    let (alpha, beta) = (params.alpha(), params.beta());
    let b0_mass = params.b0_mass();
    let p0 = (b0_mass > 0.0).then(|| params.b0().iter().map(|b| b / b0_mass).collect());

    if !regime.is_locally_reinforced() {
        return DerivedConstants {
            gamma: None,
            lambda: None,
            r_star: None,
            p0,
            regime,
        };
    }

    let r_star = b0_mass + alpha / (1.0 - beta);
    // With b0 = 0 the denominator is alpha > 0 and gamma collapses to 1.
    let gamma = beta + (1.0 - beta) * alpha / ((1.0 - beta) * b0_mass + alpha);
    let lambda = (b0_mass > 0.0).then(|| lambda_from(gamma, beta));
    DerivedConstants {
        gamma: Some(gamma),
        lambda,
        r_star: Some(r_star),
        p0,
        regime,
    }
}

/// Normalized composition `(b0 + B) / (|b0| + |B|)`.
pub fn predictive_mean(b0: &[f64], balls: &[f64]) -> Result<Vec<f64>> {
    if b0.len() != balls.len() {
        return Err(UrnError::DimensionMismatch {
            expected: b0.len(),
            got: balls.len(),
        });
    }
    let mut out: Vec<f64> = b0.iter().zip(balls).map(|(a, b)| a + b).collect();
    if let Some(i) = out.iter().position(|&m| !(m >= 0.0)) {
        return Err(UrnError::Domain(format!(
            "composition entry {} is negative or NaN",
            i + 1
        )));
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(UrnError::Domain(format!("total urn mass {total} is not positive and finite")));
    }
    out.iter_mut().for_each(|m| *m /= total);
    Ok(out)
}
