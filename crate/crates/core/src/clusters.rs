//! Clustered samples: per-cluster statistics, the common-`lambda` estimator
//! and its confidence interval, null probabilities and per-cluster tests.
//!
//! Two CSV layouts are read, chosen by header:
//!
//! * long: `cluster_id,category`, one observation per row, categories `1..k`;
//! * wide: `cluster_id,count_1,...,count_k`, one cluster per row.
//!
//! Clusters keep the order in which their ids first appear.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::gof::{chi_squared_stat, gof_test, TestReport};
use crate::specfun::GammaDist;

/// Clusters smaller than this trigger a warning about the asymptotic
/// approximation. Heuristic, not a derived bound.
pub const MIN_CLUSTER_SIZE: u64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub counts: Vec<u64>,
}

impl Cluster {
    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.size() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredSample {
    k: usize,
    clusters: Vec<Cluster>,
}

impl ClusteredSample {
    pub fn new(k: usize, clusters: Vec<Cluster>) -> Result<Self> {
        if k < 2 {
            return Err(UrnError::Domain("at least two categories are required".into()));
        }
        if clusters.is_empty() {
            return Err(UrnError::Empty("clustered sample"));
        }
        let mut seen = HashMap::new();
        for c in &clusters {
            if c.counts.len() != k {
                return Err(UrnError::DimensionMismatch {
                    expected: k,
                    got: c.counts.len(),
                });
            }
            if c.size() == 0 {
                return Err(UrnError::Format(format!("cluster {} has no observations", c.id)));
            }
            if seen.insert(c.id.as_str(), ()).is_some() {
                return Err(UrnError::Format(format!("cluster {} appears twice", c.id)));
            }
        }
        Ok(ClusteredSample { k, clusters })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn find(&self, id: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.id == id)
    }

    /// Reads either CSV layout. `k` is taken from the header in wide format
    /// and from the largest category in long format unless given.
    pub fn from_csv<R: Read>(reader: R, k: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers.first().map(String::as_str) != Some("cluster_id") {
            return Err(UrnError::Format("first column must be cluster_id".into()));
        }
        if headers.len() == 2 && headers[1] == "category" {
            read_long(rdr, k)
        } else if headers.len() >= 3
            && headers[1..]
                .iter()
                .enumerate()
                .all(|(i, h)| *h == format!("count_{}", i + 1))
        {
            let width = headers.len() - 1;
            if let Some(k) = k.filter(|&k| k != width) {
                return Err(UrnError::DimensionMismatch { expected: k, got: width });
            }
            read_wide(rdr, width)
        } else {
            Err(UrnError::Format(
                "header must be cluster_id,category or cluster_id,count_1,...,count_k".into(),
            ))
        }
    }

    pub fn from_path(path: impl AsRef<Path>, k: Option<usize>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?, k)
    }
}

fn read_long<R: Read>(mut rdr: csv::Reader<R>, k: Option<usize>) -> Result<ClusteredSample> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<u64>> = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_owned();
        let cat: usize = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .filter(|&c| c >= 1)
            .ok_or_else(|| {
                UrnError::Format(format!("row {}: category must be an integer >= 1", line + 2))
            })?;
        if let Some(k) = k {
            if cat > k {
                return Err(UrnError::Format(format!(
                    "row {}: category {cat} exceeds k = {k}",
                    line + 2
                )));
            }
        }
        let counts = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        if counts.len() < cat {
            counts.resize(cat, 0);
        }
        counts[cat - 1] += 1;
    }
    let k = k.unwrap_or_else(|| rows.values().map(Vec::len).max().unwrap_or(0));
    let clusters = order
        .into_iter()
        .map(|id| {
            let mut counts = rows.remove(&id).unwrap_or_default();
            counts.resize(k, 0);
            Cluster { id, counts }
        })
        .collect();
    ClusteredSample::new(k, clusters)
}

fn read_wide<R: Read>(mut rdr: csv::Reader<R>, k: usize) -> Result<ClusteredSample> {
    let mut clusters = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_owned();
        let counts = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| UrnError::Format(format!("row {}: {e}", line + 2)))?;
        clusters.push(Cluster { id, counts });
    }
    ClusteredSample::new(k, clusters)
}

/// Per-cluster statistic `Q_l`; identical to Pearson's statistic.
pub fn q_statistic(counts: &[u64], p_star: &[f64]) -> Result<f64> {
    chi_squared_stat(counts, p_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMode {
    /// `p* = 1/k` in every cluster.
    Uniform,
    /// `p*` from each cluster's relative frequencies in an earlier sample.
    FirstPeriod,
    /// `p*` from one benchmark cluster, applied to all others.
    Benchmark,
}

impl FromStr for NullMode {
    type Err = UrnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NullMode::Uniform),
            "first_period" | "first-period" => Ok(NullMode::FirstPeriod),
            "benchmark" => Ok(NullMode::Benchmark),
            other => Err(UrnError::Domain(format!(
                "unknown null mode {other:?}; expected uniform, first_period or benchmark"
            ))),
        }
    }
}

/// Null probabilities for the clusters that will be tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullProbs {
    pub mode: NullMode,
    /// Indices into the sample's clusters; the benchmark is left out.
    pub tested: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
}

fn positive_or_err(id: &str, p: Vec<f64>) -> Result<Vec<f64>> {
    match p.iter().position(|&x| x <= 0.0) {
        Some(i) => Err(UrnError::ZeroProbability {
            cluster: id.to_owned(),
            category: i + 1,
        }),
        None => Ok(p),
    }
}

/// Builds `p*` for each tested cluster according to `mode`.
/// `first_period` is required for [`NullMode::FirstPeriod`] and matched by
/// cluster id; `benchmark` is required for [`NullMode::Benchmark`].
pub fn build_null_probs(
    mode: NullMode,
    sample: &ClusteredSample,
    first_period: Option<&ClusteredSample>,
    benchmark: Option<&str>,
) -> Result<NullProbs> {
    let k = sample.k();
    match mode {
        NullMode::Uniform => Ok(NullProbs {
            mode,
            tested: (0..sample.len()).collect(),
            probs: vec![vec![1.0 / k as f64; k]; sample.len()],
            benchmark: None,
        }),
        NullMode::FirstPeriod => {
            let first = first_period.ok_or_else(|| {
                UrnError::Domain("first_period mode needs the first-period sample".into())
            })?;
            if first.k() != k {
                return Err(UrnError::DimensionMismatch { expected: k, got: first.k() });
            }
            let probs = sample
                .clusters()
                .iter()
                .map(|c| {
                    let f = first.find(&c.id).ok_or_else(|| {
                        UrnError::Format(format!("cluster {} missing from the first period", c.id))
                    })?;
                    positive_or_err(&c.id, f.frequencies())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(NullProbs {
                mode,
                tested: (0..sample.len()).collect(),
                probs,
                benchmark: None,
            })
        }
        NullMode::Benchmark => {
            let id = benchmark
                .ok_or_else(|| UrnError::Domain("benchmark mode needs a benchmark cluster id".into()))?;
            let b = sample
                .clusters()
                .iter()
                .position(|c| c.id == id)
                .ok_or_else(|| UrnError::Format(format!("benchmark cluster {id} not found")))?;
            let p = positive_or_err(id, sample.clusters()[b].frequencies())?;
            let tested: Vec<usize> = (0..sample.len()).filter(|&i| i != b).collect();
            if tested.is_empty() {
                return Err(UrnError::Empty("clusters besides the benchmark"));
            }
            Ok(NullProbs {
                mode,
                probs: vec![p; tested.len()],
                tested,
                benchmark: Some(id.to_owned()),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub lambda_hat: f64,
    /// Number of clusters that entered the estimate.
    pub l: usize,
    pub k: usize,
    pub cluster_ids: Vec<String>,
    pub q_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl LambdaEstimate {
    /// Builds the estimate `sum Q_l / (L (k - 1))` from precomputed
    /// statistics.
    pub fn from_q_values(k: usize, cluster_ids: Vec<String>, q_values: Vec<f64>) -> Result<Self> {
        if q_values.is_empty() {
            return Err(UrnError::Empty("cluster statistics"));
        }
        if k < 2 {
            return Err(UrnError::Domain("at least two categories are required".into()));
        }
        if q_values.iter().any(|q| !(*q >= 0.0)) {
            return Err(UrnError::Domain("statistics must be nonnegative".into()));
        }
        let l = q_values.len();
        let lambda_hat = q_values.iter().sum::<f64>() / (l * (k - 1)) as f64;
        let mut warnings = Vec::new();
        if lambda_hat < 1.0 {
            warnings.push(format!(
                "lambda_hat = {lambda_hat} is below 1, inconsistent with the urn model"
            ));
        }
        Ok(LambdaEstimate {
            lambda_hat,
            l,
            k,
            cluster_ids,
            q_values,
            warnings,
        })
    }
}

/// `lambda_hat = sum_l Q_l / (L (k - 1))` over the tested clusters.
pub fn estimate_lambda(sample: &ClusteredSample, null: &NullProbs) -> Result<LambdaEstimate> {
    if null.tested.len() != null.probs.len() {
        return Err(UrnError::DimensionMismatch {
            expected: null.tested.len(),
            got: null.probs.len(),
        });
    }
    let mut ids = Vec::with_capacity(null.tested.len());
    let mut q = Vec::with_capacity(null.tested.len());
    let mut small = Vec::new();
    for (&idx, p) in null.tested.iter().zip(&null.probs) {
        let c = sample
            .clusters()
            .get(idx)
            .ok_or_else(|| UrnError::Domain(format!("cluster index {idx} out of range")))?;
        q.push(q_statistic(&c.counts, p)?);
        ids.push(c.id.clone());
        if c.size() < MIN_CLUSTER_SIZE {
            small.push(c.id.clone());
        }
    }
    let mut est = LambdaEstimate::from_q_values(sample.k(), ids, q)?;
    if !small.is_empty() {
        est.warnings.push(format!(
            "clusters smaller than {MIN_CLUSTER_SIZE}: {}; the asymptotic law may be inaccurate",
            small.join(", ")
        ));
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// `[lambda_hat / q_{1 - t/2}, lambda_hat / q_{t/2}]`, `t = 1 - level`,
/// with `q_p` the quantiles of `Gamma(a, rate a)`, `a = L (k - 1) / 2`.
pub fn lambda_confidence_interval(est: &LambdaEstimate, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(UrnError::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    if !(est.lambda_hat > 0.0) {
        return Err(UrnError::Domain(
            "lambda_hat must be positive for a confidence interval".into(),
        ));
    }
    let a = (est.l * (est.k - 1)) as f64 / 2.0;
    let dist = GammaDist::new(a, a)?;
    let t = 1.0 - level;
    Ok(ConfidenceInterval {
        lower: est.lambda_hat / dist.quantile(1.0 - t / 2.0)?,
        upper: est.lambda_hat / dist.quantile(t / 2.0)?,
        level,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster_id: String,
    #[serde(flatten)]
    pub report: TestReport,
}

/// One inflated test per tested cluster with a common `lambda`. Set
/// `plug_in` when `lambda` was estimated from the same data; the reports
/// then say so, since its uncertainty is not propagated.
pub fn cluster_test(
    sample: &ClusteredSample,
    null: &NullProbs,
    lambda: f64,
    theta: f64,
    plug_in: bool,
) -> Result<Vec<ClusterReport>> {
    null.tested
        .iter()
        .zip(&null.probs)
        .map(|(&idx, p)| {
            let c = sample
                .clusters()
                .get(idx)
                .ok_or_else(|| UrnError::Domain(format!("cluster index {idx} out of range")))?;
            let mut report = gof_test(&c.counts, p, lambda, theta)?;
            if plug_in {
                report
                    .warnings
                    .push("lambda is a plug-in estimate; its uncertainty is ignored".into());
            }
            if c.size() < MIN_CLUSTER_SIZE {
                report.warnings.push(format!(
                    "cluster size {} is below {MIN_CLUSTER_SIZE}",
                    c.size()
                ));
            }
            Ok(ClusterReport {
                cluster_id: c.id.clone(),
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(rows: &[(&str, &[u64])]) -> ClusteredSample {
        let k = rows[0].1.len();
        ClusteredSample::new(
            k,
            rows.iter()
                .map(|(id, c)| Cluster {
                    id: id.to_string(),
                    counts: c.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn q_statistic_examples() {
        assert_relative_eq!(q_statistic(&[30, 10, 20], &[0.5, 0.25, 0.25]).unwrap(), 10.0 / 3.0);
        assert_eq!(q_statistic(&[3, 1], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(q_statistic(&[2, 2], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn estimator_examples() {
        let e = LambdaEstimate::from_q_values(3, vec![], vec![4.0, 6.0, 5.0]).unwrap();
        assert_eq!(e.lambda_hat, 2.5);
        assert!(e.warnings.is_empty());
        let e = LambdaEstimate::from_q_values(2, vec![], vec![2.0]).unwrap();
        assert_eq!(e.lambda_hat, 2.0);

        let s = sample(&[("a", &[50, 50]), ("b", &[100, 100])]);
        let null = build_null_probs(NullMode::Uniform, &s, None, None).unwrap();
        let e = estimate_lambda(&s, &null).unwrap();
        assert_eq!(e.lambda_hat, 0.0);
        assert!(e.warnings.iter().any(|w| w.contains("below 1")));
        assert!(e.warnings.iter().any(|w| w.contains("smaller than")));
        assert!(lambda_confidence_interval(&e, 0.95).is_err());
    }

    #[test]
    fn exponential_interval() {
        let e = LambdaEstimate::from_q_values(3, vec!["a".into()], vec![4.0]).unwrap();
        assert_eq!(e.lambda_hat, 2.0);
        let ci = lambda_confidence_interval(&e, 0.95).unwrap();
        assert_relative_eq!(ci.lower, 2.0 / -(0.025f64).ln(), max_relative = 1e-10);
        assert_relative_eq!(ci.upper, 2.0 / -(0.975f64).ln(), max_relative = 1e-10);
        assert!((ci.lower - 0.54218).abs() < 1e-5);
        assert!((ci.upper - 78.996).abs() < 1e-3);
    }

    #[test]
    fn interval_widens_with_level() {
        let e = LambdaEstimate::from_q_values(4, vec![], vec![7.0, 9.0, 5.5]).unwrap();
        let mut prev = (e.lambda_hat, e.lambda_hat);
        for level in [0.5, 0.8, 0.9, 0.95, 0.99, 0.999] {
            let ci = lambda_confidence_interval(&e, level).unwrap();
            assert!(ci.lower < prev.0 && ci.upper > prev.1);
            prev = (ci.lower, ci.upper);
        }
    }

    #[test]
    fn null_modes() {
        let s = sample(&[("a", &[1, 2, 3, 4]), ("b", &[4, 3, 2, 1])]);
        let u = build_null_probs(NullMode::Uniform, &s, None, None).unwrap();
        assert!(u.probs.iter().flatten().all(|&p| p == 0.25));

        let s = sample(&[("x", &[10, 30]), ("y", &[20, 20]), ("z", &[5, 5])]);
        let b = build_null_probs(NullMode::Benchmark, &s, None, Some("x")).unwrap();
        assert_eq!(b.tested, vec![1, 2]);
        assert!(b.probs.iter().all(|p| p == &vec![0.25, 0.75]));
        assert!(build_null_probs(NullMode::Benchmark, &s, None, Some("q")).is_err());
        assert!(build_null_probs(NullMode::Benchmark, &s, None, None).is_err());

        let first = sample(&[("y", &[3, 1]), ("x", &[0, 4]), ("z", &[1, 1])]);
        match build_null_probs(NullMode::FirstPeriod, &s, Some(&first), None) {
            Err(UrnError::ZeroProbability { cluster, category }) => {
                assert_eq!((cluster.as_str(), category), ("x", 1));
            }
            other => panic!("{other:?}"),
        }
        let first = sample(&[("y", &[3, 1]), ("x", &[1, 4]), ("z", &[1, 1])]);
        let f = build_null_probs(NullMode::FirstPeriod, &s, Some(&first), None).unwrap();
        assert_eq!(f.probs[0], vec![0.2, 0.8]);
        assert_eq!(f.probs[1], vec![0.75, 0.25]);
    }

    #[test]
    fn unit_lambda_cluster_tests_are_pearson() {
        let s = sample(&[("a", &[120, 80]), ("b", &[95, 105])]);
        let null = build_null_probs(NullMode::Uniform, &s, None, None).unwrap();
        let reps = cluster_test(&s, &null, 1.0, 0.05, false).unwrap();
        for (r, c) in reps.iter().zip(s.clusters()) {
            let direct = gof_test(&c.counts, &[0.5, 0.5], 1.0, 0.05).unwrap();
            assert_eq!(r.report, direct);
        }
        assert!(reps[0].report.reject);
        assert!(!reps[1].report.reject);
        let plug = cluster_test(&s, &null, 2.0, 0.05, true).unwrap();
        assert!(plug[0].report.warnings.iter().any(|w| w.contains("plug-in")));
    }

    #[test]
    fn csv_long_and_wide() {
        let long = "cluster_id,category\na,1\nb,2\na,3\na,1\n";
        let s = ClusteredSample::from_csv(long.as_bytes(), None).unwrap();
        assert_eq!(s.k(), 3);
        assert_eq!(s.clusters()[0], Cluster { id: "a".into(), counts: vec![2, 0, 1] });
        assert_eq!(s.clusters()[1].counts, vec![0, 1, 0]);
        let s4 = ClusteredSample::from_csv(long.as_bytes(), Some(4)).unwrap();
        assert_eq!(s4.clusters()[0].counts, vec![2, 0, 1, 0]);
        assert!(ClusteredSample::from_csv(long.as_bytes(), Some(2)).is_err());

        let wide = "cluster_id, count_1, count_2\nx, 10, 30\ny, 5, 5\n";
        let s = ClusteredSample::from_csv(wide.as_bytes(), None).unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.find("x").unwrap().counts, vec![10, 30]);

        for bad in [
            "id,category\na,1\n",
            "cluster_id,count_2,count_1\na,1,2\n",
            "cluster_id,category\na,0\n",
            "cluster_id,count_1,count_2\na,1,-2\n",
            "cluster_id,count_1,count_2\na,0,0\n",
            "cluster_id,count_1,count_2\na,1,1\na,2,2\n",
        ] {
            assert!(ClusteredSample::from_csv(bad.as_bytes(), None).is_err(), "{bad}");
        }
    }

    #[test]
    fn null_mode_parsing() {
        assert_eq!("uniform".parse::<NullMode>().unwrap(), NullMode::Uniform);
        assert_eq!("first-period".parse::<NullMode>().unwrap(), NullMode::FirstPeriod);
        assert_eq!("benchmark".parse::<NullMode>().unwrap(), NullMode::Benchmark);
        assert!("other".parse::<NullMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn estimator_is_mean_per_dof(q in proptest::collection::vec(0.0f64..100.0, 1..20), k in 2usize..9) {
                let e = LambdaEstimate::from_q_values(k, vec![], q.clone()).unwrap();
                let direct = q.iter().sum::<f64>() / (q.len() * (k - 1)) as f64;
                prop_assert!((e.lambda_hat - direct).abs() <= 1e-12 * direct.max(1.0));
            }

            #[test]
            fn interval_brackets_estimate(q in proptest::collection::vec(0.1f64..100.0, 1..20), k in 2usize..6, level in 0.5f64..0.999) {
                let e = LambdaEstimate::from_q_values(k, vec![], q).unwrap();
                let ci = lambda_confidence_interval(&e, level).unwrap();
                prop_assert!(ci.lower < e.lambda_hat && e.lambda_hat < ci.upper);
            }

            #[test]
            fn q_statistic_delegates(c in proptest::collection::vec(0u64..100, 3), w in proptest::collection::vec(0.05f64..1.0, 3)) {
                prop_assume!(c.iter().sum::<u64>() > 0);
                let s: f64 = w.iter().sum();
                let p: Vec<f64> = w.iter().map(|x| x / s).collect();
                prop_assert_eq!(q_statistic(&c, &p).unwrap(), chi_squared_stat(&c, &p).unwrap());
            }
        }
    }
}
