//! Gamma-family special functions.
//!
//! `P(a, x)` uses the power series for `x < a + 1` and the Legendre
//! continued fraction (modified Lentz) otherwise. `ln Γ` is a g = 7, n = 9
//! Lanczos approximation. Quantiles are found by Newton steps on the CDF,
//! kept inside a bisection bracket.
//!
//! Supported range: `0 < a <= 1e3`, `0 <= x <= 1e4`. Larger shapes still
//! return a value but the absolute accuracy target of 1e-12 is not
//! guaranteed there.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x) Γ(1 - x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn check_domain(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(UrnError::Domain(format!("gamma shape must be positive and finite, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(UrnError::Domain(format!("gamma argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Returns `(P(a, x), Q(a, x))`, each computed directly on the side where it
/// does not suffer cancellation.
fn incomplete_gamma_pair(a: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn regularized_gamma_lower(a: f64, x: f64) -> Result<f64> {
    check_domain(a, x)?;
    Ok(incomplete_gamma_pair(a, x).0)
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_gamma_upper(a: f64, x: f64) -> Result<f64> {
    check_domain(a, x)?;
    Ok(incomplete_gamma_pair(a, x).1)
}

/// Gamma distribution with density `rate^shape / Γ(shape) x^(shape-1) e^(-rate x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDist {
    shape: f64,
    rate: f64,
}

impl GammaDist {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(UrnError::Domain(format!("gamma shape must be positive, got {shape}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(UrnError::Domain(format!("gamma rate must be positive, got {rate}")));
        }
        Ok(GammaDist { shape, rate })
    }

    /// `chi^2(dof) = Gamma(dof / 2, 1 / 2)`.
    pub fn chi_squared(dof: f64) -> Result<Self> {
        Self::new(dof / 2.0, 0.5)
    }

    /// Law of `lambda * W` with `W ~ chi^2(dof)`.
    pub fn scaled_chi_squared(dof: f64, lambda: f64) -> Result<Self> {
        Self::new(dof / 2.0, 1.0 / (2.0 * lambda))
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        incomplete_gamma_pair(self.shape, x * self.rate).0
    }

    /// Upper tail `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        incomplete_gamma_pair(self.shape, x * self.rate).1
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => self.rate,
                _ => 0.0,
            };
        }
        (self.shape * self.rate.ln() + (self.shape - 1.0) * x.ln() - self.rate * x
            - ln_gamma(self.shape))
        .exp()
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        gamma_quantile(self, q)
    }
}

/// Inverse CDF of a gamma distribution.
///
/// Works on the unit-rate variable and rescales, so the Newton steps see the
/// same problem for every rate.
pub fn gamma_quantile(dist: &GammaDist, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(UrnError::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let a = dist.shape;
    let upper_side = q > 0.5;
    // Residual on whichever tail is smaller keeps relative precision.
    let residual = |x: f64| {
        let (p, s) = incomplete_gamma_pair(a, x);
        if upper_side {
            (1.0 - q) - s
        } else {
            p - q
        }
    };

    // Bracket [lo, hi] with residual(lo) < 0 <= residual(hi).
    let mut lo = 0.0;
    let mut hi = a.max(1.0);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(UrnError::Domain("gamma quantile bracket diverged".into()));
        }
    }

    let ln_ga = ln_gamma(a);
    let midpoint = |lo: f64, hi: f64| {
        if lo <= 0.0 {
            hi * 1e-4
        } else if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        }
    };

    // Starting point: small-x power law P(a, x) ~ x^a / Γ(a + 1) in the lower
    // tail, Wilson–Hilferty elsewhere.
    let mut x = if !upper_side && (a < 1.0 || q < 1e-3) {
        ((q.ln() + ln_gamma(a + 1.0)) / a).exp()
    } else {
        let z = normal_quantile(q);
        let h = 1.0 / (9.0 * a);
        a * (1.0 - h + z * h.sqrt()).powi(3)
    };
    if !(x > lo && x < hi) {
        x = midpoint(lo, hi);
    }

    for _ in 0..1000 {
        let f = residual(x);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((a - 1.0) * x.ln() - x - ln_ga).exp();
        let mut next = x - f / density;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = midpoint(lo, hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 1e-15 * hi {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x / dist.rate)
}

/// Standard normal CDF via `erfc`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, from the incomplete gamma function
/// (`erfc(x) = Q(1/2, x^2)` for `x >= 0`).
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let q = incomplete_gamma_pair(0.5, x * x).1;
    if x >= 0.0 {
        q
    } else {
        2.0 - q
    }
}

/// Standard normal quantile (Acklam's rational approximation, relative error
/// about 1e-9). Only used for starting points.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(2.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        // ln(9!) = ln 362880
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1e-3) - 6.907_178_885_383_854).abs() < 1e-11);
    }

    #[test]
    fn exponential_closed_form() {
        let p = regularized_gamma_lower(1.0, std::f64::consts::LN_2).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        for &x in &[0.01, 0.5, 3.0, 20.0] {
            let p = regularized_gamma_lower(1.0, x).unwrap();
            assert!((p - (1.0 - (-x).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_values() {
        assert_eq!(regularized_gamma_lower(3.7, 0.0).unwrap(), 0.0);
        assert_eq!(regularized_gamma_upper(3.7, 0.0).unwrap(), 1.0);
        assert_eq!(regularized_gamma_lower(3.7, f64::INFINITY).unwrap(), 1.0);
        assert!(regularized_gamma_lower(0.0, 1.0).is_err());
        assert!(regularized_gamma_lower(1.0, -1.0).is_err());
        assert!(regularized_gamma_lower(-1.0, 1.0).is_err());
    }

    #[test]
    fn exponential_quantiles() {
        let d = GammaDist::new(1.0, 1.0).unwrap();
        assert!((d.quantile(0.975).unwrap() - 0.025f64.ln().abs()).abs() < 1e-10);
        assert!((d.quantile(0.025).unwrap() + 0.975f64.ln()).abs() < 1e-12);
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
    }

    #[test]
    fn chi_squared_one_critical_value() {
        let d = GammaDist::new(0.5, 0.5).unwrap();
        let x = d.quantile(0.95).unwrap();
        assert!((x - 3.841_458_820_694_124).abs() < 1e-9);
        assert!((d.cdf(x) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn quantile_round_trip_grid() {
        for &shape in &[0.05, 0.5, 1.0, 2.5, 10.0, 150.0, 1000.0] {
            for &rate in &[0.1, 1.0, 7.0] {
                let d = GammaDist::new(shape, rate).unwrap();
                let mut prev = 0.0;
                for i in 1..100 {
                    let q = i as f64 / 100.0;
                    let x = d.quantile(q).unwrap();
                    assert!(x > prev, "shape={shape} q={q}");
                    assert!((d.cdf(x) - q).abs() < 1e-10, "shape={shape} rate={rate} q={q}");
                    prev = x;
                }
                for &q in &[1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8] {
                    let x = d.quantile(q).unwrap();
                    let err = if q > 0.5 { d.sf(x) - (1.0 - q) } else { d.cdf(x) - q };
                    assert!(err.abs() < 1e-10 * q.min(1.0 - q).max(1e-2), "tail shape={shape} rate={rate} q={q} x={x} err={err}");
                }
            }
        }
    }

    #[test]
    fn scaling_law() {
        for &a in &[0.3, 1.0, 4.5, 40.0] {
            for &b in &[0.05, 0.5, 2.0, 13.0] {
                let scaled = GammaDist::new(a, b).unwrap();
                let unit = GammaDist::new(a, 1.0).unwrap();
                for &x in &[0.01, 0.7, 3.0, 25.0, 400.0] {
                    assert!((scaled.cdf(x) - unit.cdf(b * x)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn median_increases_with_shape() {
        let mut prev = 0.0;
        for i in 1..60 {
            let m = GammaDist::new(i as f64 * 0.25, 1.0).unwrap().quantile(0.5).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn normal_helpers() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-15);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-8);
    }

    #[test]
    fn pdf_integrates_to_cdf_increment() {
        let d = GammaDist::new(2.5, 0.7).unwrap();
        let (a, b) = (1.0, 1.3);
        let n = 2000;
        let h = (b - a) / n as f64;
        let mut s = d.pdf(a) + d.pdf(b);
        for i in 1..n {
            s += d.pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - (d.cdf(b) - d.cdf(a))).abs() < 1e-12);
    }
}
