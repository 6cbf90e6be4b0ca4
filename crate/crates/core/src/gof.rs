//! Pearson's chi-squared statistic and the inflated goodness-of-fit test.
//!
//! Under the urn model the classical statistic is asymptotically
//! `lambda * chi2(k - 1)`, a gamma law with shape `(k - 1)/2` and rate
//! `1 / (2 lambda)`. The statistic is left untouched; `lambda` only enters
//! through the reference law, so `lambda = 1` is the ordinary Pearson test.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::specfun::GammaDist;

/// Classical rule of thumb for the chi-squared approximation.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub dof: usize,
    pub lambda: f64,
    pub p_value: f64,
    pub theta: f64,
    pub reject: bool,
    /// `lambda * chi2_{1 - theta}(k - 1)`.
    pub critical_value: f64,
    pub sample_size: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn validate(counts: &[u64], probs: &[f64]) -> Result<u64> {
    if counts.len() != probs.len() {
        return Err(UrnError::DimensionMismatch {
            expected: probs.len(),
            got: counts.len(),
        });
    }
    if probs.len() < 2 {
        return Err(UrnError::Domain("at least two categories are required".into()));
    }
    if let Some(i) = probs.iter().position(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(UrnError::Domain(format!(
            "null probability of category {} must be strictly positive, got {}",
            i + 1,
            probs[i]
        )));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(UrnError::Domain(format!("null probabilities sum to {s}, not 1")));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(UrnError::Empty("sample"));
    }
    Ok(n)
}

/// `sum_i (O_i - N p_i)^2 / (N p_i)` with `N = sum_i O_i`.
pub fn chi_squared_stat(counts: &[u64], probs: &[f64]) -> Result<f64> {
    let n = validate(counts, probs)? as f64;
    Ok(counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum())
}

/// The same statistic written as `lambda N d^T S^{-1} d`, where `d` holds
/// the first `k - 1` coordinates of `O/N - p` and `S = lambda (diag(p*) -
/// p* p*^T)` is inverted in closed form by Sherman-Morrison:
/// `S^{-1} = (diag(1/p_i) + 11^T / p_k) / lambda`. Agrees with
/// [`chi_squared_stat`] up to rounding; used as a cross-check.
pub fn quadratic_form_stat(counts: &[u64], probs: &[f64], lambda: f64) -> Result<f64> {
    let n = validate(counts, probs)? as f64;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(UrnError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let k = probs.len();
    let pk = probs[k - 1];
    let d: Vec<f64> = counts[..k - 1]
        .iter()
        .zip(&probs[..k - 1])
        .map(|(&o, &p)| o as f64 / n - p)
        .collect();
    let diag: f64 = d.iter().zip(&probs[..k - 1]).map(|(di, p)| di * di / p).sum();
    let sum_d: f64 = d.iter().sum();
    let form = (diag + sum_d * sum_d / pk) / lambda;
    Ok(lambda * n * form)
}

/// Reference law `lambda * chi2(k - 1)` at statistic `q`.
pub fn reference_tail(q: f64, dof: usize, lambda: f64) -> Result<f64> {
    Ok(GammaDist::scaled_chi_squared(dof as f64, lambda)?.sf(q))
}

/// Inflated chi-squared test of `H0: p = probs` at level `theta`.
///
/// `lambda` below 1 is accepted but flagged, since the urn model always has
/// `lambda > 1`; plug-in estimates can fall below it by chance.
pub fn gof_test(counts: &[u64], probs: &[f64], lambda: f64, theta: f64) -> Result<TestReport> {
    let statistic = chi_squared_stat(counts, probs)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(UrnError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(UrnError::Domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    let n: u64 = counts.iter().sum();
    let dof = probs.len() - 1;
    let dist = GammaDist::scaled_chi_squared(dof as f64, lambda)?;
    let p_value = dist.sf(statistic);
    let critical_value = dist.quantile(1.0 - theta)?;

    let mut warnings = Vec::new();
    if lambda < 1.0 {
        warnings.push(format!(
            "lambda = {lambda} is below 1, which the urn model cannot produce"
        ));
    }
    let low: Vec<String> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| (n as f64) * p < MIN_EXPECTED_COUNT)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    if !low.is_empty() {
        warnings.push(format!(
            "expected count below {MIN_EXPECTED_COUNT} in categories {}",
            low.join(", ")
        ));
    }
    Ok(TestReport {
        statistic,
        dof,
        lambda,
        p_value,
        theta,
        reject: p_value < theta,
        critical_value,
        sample_size: n,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn statistic_examples() {
        assert_eq!(chi_squared_stat(&[3, 1], &[0.5, 0.5]).unwrap(), 1.0);
        assert_relative_eq!(
            chi_squared_stat(&[30, 10, 20], &[0.5, 0.25, 0.25]).unwrap(),
            10.0 / 3.0,
            max_relative = 1e-14
        );
        assert_eq!(chi_squared_stat(&[25, 50, 25], &[0.25, 0.5, 0.25]).unwrap(), 0.0);
    }

    #[test]
    fn statistic_errors() {
        assert!(chi_squared_stat(&[1, 2], &[1.0, 0.0]).is_err());
        assert!(chi_squared_stat(&[0, 0], &[0.5, 0.5]).is_err());
        assert!(chi_squared_stat(&[1, 2, 3], &[0.5, 0.5]).is_err());
        assert!(chi_squared_stat(&[1, 2], &[0.6, 0.6]).is_err());
    }

    #[test]
    fn quadratic_form_examples() {
        assert_relative_eq!(quadratic_form_stat(&[3, 1], &[0.5, 0.5], 3.0).unwrap(), 1.0, max_relative = 1e-14);
        assert!(quadratic_form_stat(&[5, 5, 5], &[1.0 / 3.0; 3], 2.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn test_at_five_percent_boundary() {
        let q_crit = 3.841458820694124;
        let r = gof_test(&[0, 1], &[0.5, 0.5], 2.0, 0.05).unwrap();
        assert_relative_eq!(r.critical_value, 2.0 * q_crit, max_relative = 1e-9);
        let p = reference_tail(2.0 * q_crit, 1, 2.0).unwrap();
        assert_relative_eq!(p, 0.05, max_relative = 1e-9);
        let p = reference_tail(7.6830, 1, 2.0).unwrap();
        assert!((p - 0.05).abs() < 1e-5);
    }

    #[test]
    fn perfect_fit_never_rejects() {
        let r = gof_test(&[50, 50], &[0.5, 0.5], 4.0, 0.5).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn decision_consistency_grid() {
        for &lambda in &[1.0, 1.5, 6.6, 20.0] {
            for &theta in &[0.01, 0.05, 0.1, 0.5] {
                for o in [(50u64, 50u64), (60, 40), (70, 30), (90, 10)] {
                    let r = gof_test(&[o.0, o.1], &[0.5, 0.5], lambda, theta).unwrap();
                    assert_eq!(r.reject, r.statistic > r.critical_value, "{r:?}");
                    assert_eq!(r.reject, r.p_value < theta);
                }
            }
        }
    }

    #[test]
    fn warnings() {
        let r = gof_test(&[3, 1], &[0.5, 0.5], 1.0, 0.05).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("expected count")));
        let r = gof_test(&[30, 10], &[0.5, 0.5], 0.8, 0.05).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("below 1")));
        assert!(gof_test(&[30, 10], &[0.5, 0.5], 0.0, 0.05).is_err());
        assert!(gof_test(&[30, 10], &[0.5, 0.5], 2.0, 1.0).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let r = gof_test(&[30, 10, 20], &[0.5, 0.25, 0.25], 2.5, 0.05).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: TestReport = serde_json::from_str(&s).unwrap();
        assert_eq!(r, back);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn case() -> impl Strategy<Value = (Vec<u64>, Vec<f64>)> {
            (2usize..8).prop_flat_map(|k| {
                (
                    proptest::collection::vec(0u64..500, k),
                    proptest::collection::vec(0.01f64..1.0, k),
                )
                    .prop_filter_map("nonempty", |(c, w)| {
                        let s: f64 = w.iter().sum();
                        (c.iter().sum::<u64>() > 0).then(|| (c, w.iter().map(|x| x / s).collect()))
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn sherman_morrison_identity((c, p) in case(), lambda in 0.5f64..50.0) {
                let a = chi_squared_stat(&c, &p).unwrap();
                let b = quadratic_form_stat(&c, &p, lambda).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{a} vs {b}");
            }

            #[test]
            fn permutation_invariance((c, p) in case(), shift in 0usize..8) {
                let k = c.len();
                let s = shift % k;
                let mut c2 = c.clone();
                let mut p2 = p.clone();
                c2.rotate_left(s);
                p2.rotate_left(s);
                let a = chi_squared_stat(&c, &p).unwrap();
                let b = chi_squared_stat(&c2, &p2).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }

            #[test]
            fn unit_lambda_is_pearson((c, p) in case(), theta in 0.001f64..0.5) {
                let r = gof_test(&c, &p, 1.0, theta).unwrap();
                let classical = GammaDist::chi_squared((p.len() - 1) as f64).unwrap().sf(r.statistic);
                prop_assert!((r.p_value - classical).abs() <= 1e-15);
            }
        }
    }
}
