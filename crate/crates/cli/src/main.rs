use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rp_urn::clusters::{
    build_null_probs, cluster_test, estimate_lambda, lambda_confidence_interval, ClusterReport,
    ClusteredSample, ConfidenceInterval, LambdaEstimate, NullMode,
};
use rp_urn::coupling::{contraction_diagnostic, coupled_pairs};
use rp_urn::gof::gof_test;
use rp_urn::montecarlo::{run_replications, verify, write_records_csv, CheckKind, ReplicationPlan};
use rp_urn::simulate::simulate_trajectory;
use rp_urn::{derive_constants, ModelParams};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_REJECT: u8 = 3;

/// Rescaled Pólya urn: exact simulation, asymptotic constants and the
/// inflated chi-squared test.
///
/// Exit status: 0 success, 1 usage error, 2 data or validation error,
/// 3 rejection (only with --fail-on-reject).
#[derive(Debug, Parser)]
#[command(name = "rp-urn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print gamma, lambda, r* and p0 for a parameter file.
    Constants(ConstantsArgs),
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Inflated chi-squared test of one vector of counts.
    Gof(GofArgs),
    /// Estimate lambda from a clustered sample, with a confidence interval.
    EstimateLambda(EstimateArgs),
    /// Test every cluster of a clustered sample with a common lambda.
    ClusterTest(ClusterTestArgs),
    /// Couple two urns that differ only in B0 and report the contraction.
    Couple(CoupleArgs),
    /// Check the limit laws for the regime of a parameter file by simulation.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    /// Parameter file (JSON with alpha, beta, b0, B0).
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add psi_1..psi_k columns, starting with a row for step 0.
    #[arg(long)]
    record_psi: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GofArgs {
    /// Observed counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    counts: Vec<u64>,
    /// Null probabilities, comma separated. Defaults to p0 of --params.
    #[arg(long, value_delimiter = ',')]
    probs: Vec<f64>,
    /// Inflation factor. Defaults to the lambda of --params.
    #[arg(long)]
    lambda: Option<f64>,
    /// Parameter file supplying p0 and lambda when not given directly.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    #[arg(long)]
    fail_on_reject: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NullArgs {
    /// Clustered sample CSV (long: cluster_id,category; wide: cluster_id,count_1,..).
    #[arg(long)]
    data: PathBuf,
    /// Number of categories, when the long layout does not show all of them.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "uniform")]
    null_mode: NullModeArg,
    /// First-period sample for --null-mode first-period.
    #[arg(long)]
    first_period: Option<PathBuf>,
    /// Benchmark cluster id for --null-mode benchmark.
    #[arg(long)]
    benchmark_cluster: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NullModeArg {
    Uniform,
    FirstPeriod,
    Benchmark,
}

impl From<NullModeArg> for NullMode {
    fn from(m: NullModeArg) -> Self {
        match m {
            NullModeArg::Uniform => NullMode::Uniform,
            NullModeArg::FirstPeriod => NullMode::FirstPeriod,
            NullModeArg::Benchmark => NullMode::Benchmark,
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    null: NullArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterTestArgs {
    #[command(flatten)]
    null: NullArgs,
    /// Common lambda. When omitted, the estimate from the same data is
    /// plugged in.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    #[arg(long)]
    fail_on_reject: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoupleArgs {
    /// Parameters of the first urn.
    #[arg(long)]
    params: PathBuf,
    /// B0 of the second urn, comma separated; alpha, beta and b0 are shared.
    #[arg(long, value_delimiter = ',', required = true)]
    other_balls: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Number of coupled pairs.
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    steps: usize,
    #[arg(long, default_value_t = 2_000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checks to run (repeatable); defaults to those of the regime.
    #[arg(long = "check")]
    checks: Vec<CheckArg>,
    /// Also write per-replicate records as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Exit with status 3 when any check fails.
    #[arg(long)]
    fail_on_reject: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckArg {
    Clt,
    BetaAboveOne,
    Absorption,
    AlphaZero,
    ConstantDraws,
}

impl From<CheckArg> for CheckKind {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Clt => CheckKind::Clt,
            CheckArg::BetaAboveOne => CheckKind::BetaAboveOne,
            CheckArg::Absorption => CheckKind::Absorption,
            CheckArg::AlphaZero => CheckKind::AlphaZero,
            CheckArg::ConstantDraws => CheckKind::ConstantDraws,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<rp_urn::UrnError> for Failure {
    fn from(e: rp_urn::UrnError) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn load_params(path: &Path) -> anyhow::Result<ModelParams> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read parameter file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid parameter file {}", path.display()))
}

fn load_sample(path: &Path, k: Option<usize>) -> anyhow::Result<ClusteredSample> {
    ClusteredSample::from_path(path, k)
        .with_context(|| format!("cannot load clustered sample {}", path.display()))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            fs::write(path, text + "\n")
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

fn constants(args: ConstantsArgs) -> Outcome {
    let params = load_params(&args.params)?;
    emit_json(&derive_constants(&params), args.out.as_deref())?;
    Ok(false)
}

fn simulate(args: SimulateArgs) -> Outcome {
    let params = load_params(&args.params)?;
    let traj = simulate_trajectory(&params, args.steps, args.seed, args.record_psi)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            traj.write_csv(BufWriter::new(file), args.record_psi)?;
            println!("wrote {} steps to {}", traj.len(), path.display());
        }
        None => traj.write_csv(io::stdout().lock(), args.record_psi)?,
    }
    Ok(false)
}

fn gof(args: GofArgs) -> Outcome {
    let params = args.params.as_deref().map(load_params).transpose()?;
    let constants = params.as_ref().map(derive_constants);
    let probs = if !args.probs.is_empty() {
        args.probs
    } else if let Some(c) = &constants {
        c.p0()?.to_vec()
    } else {
        return Err(Failure::Usage("gof needs --probs or --params".into()));
    };
    let lambda = match (args.lambda, &constants) {
        (Some(l), _) => l,
        (None, Some(c)) => c.lambda()?,
        (None, None) => return Err(Failure::Usage("gof needs --lambda or --params".into())),
    };
    let report = gof_test(&args.counts, &probs, lambda, args.theta)?;
    warn_all(&report.warnings);
    emit_json(&report, args.out.as_deref())?;
    Ok(args.fail_on_reject && report.reject)
}

fn null_probs(args: &NullArgs) -> std::result::Result<(ClusteredSample, rp_urn::clusters::NullProbs), Failure> {
    let mode = NullMode::from(args.null_mode);
    let first = match (mode, &args.first_period) {
        (NullMode::FirstPeriod, None) => {
            return Err(Failure::Usage("--null-mode first-period needs --first-period".into()))
        }
        (NullMode::FirstPeriod, Some(p)) => Some(load_sample(p, args.k)?),
        _ => None,
    };
    if mode == NullMode::Benchmark && args.benchmark_cluster.is_none() {
        return Err(Failure::Usage("--null-mode benchmark needs --benchmark-cluster".into()));
    }
    let sample = load_sample(&args.data, args.k)?;
    let null = build_null_probs(mode, &sample, first.as_ref(), args.benchmark_cluster.as_deref())?;
    Ok((sample, null))
}

#[derive(Serialize)]
struct EstimateOutput {
    estimate: LambdaEstimate,
    confidence_interval: Option<ConfidenceInterval>,
}

fn estimate(args: EstimateArgs) -> Outcome {
    let (sample, null) = null_probs(&args.null)?;
    let estimate = estimate_lambda(&sample, &null)?;
    warn_all(&estimate.warnings);
    let confidence_interval = if estimate.lambda_hat > 0.0 {
        Some(lambda_confidence_interval(&estimate, args.level)?)
    } else {
        log::warn!("no confidence interval: lambda_hat is zero");
        None
    };
    emit_json(&EstimateOutput { estimate, confidence_interval }, args.out.as_deref())?;
    Ok(false)
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum LambdaSource {
    Supplied,
    PlugIn,
}

#[derive(Serialize)]
struct ClusterTestOutput {
    lambda: f64,
    lambda_source: LambdaSource,
    null_mode: NullMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    benchmark: Option<String>,
    rejected: usize,
    reports: Vec<ClusterReport>,
}

fn cluster_test_cmd(args: ClusterTestArgs) -> Outcome {
    let (sample, null) = null_probs(&args.null)?;
    let (lambda, source) = match args.lambda {
        Some(l) => (l, LambdaSource::Supplied),
        None => {
            let est = estimate_lambda(&sample, &null)?;
            warn_all(&est.warnings);
            (est.lambda_hat, LambdaSource::PlugIn)
        }
    };
    let plug_in = matches!(source, LambdaSource::PlugIn);
    let reports = cluster_test(&sample, &null, lambda, args.theta, plug_in)?;
    let rejected = reports.iter().filter(|r| r.report.reject).count();
    let out = ClusterTestOutput {
        lambda,
        lambda_source: source,
        null_mode: null.mode,
        benchmark: null.benchmark,
        rejected,
        reports,
    };
    emit_json(&out, args.out.as_deref())?;
    Ok(args.fail_on_reject && rejected > 0)
}

fn couple(args: CoupleArgs) -> Outcome {
    let p1 = load_params(&args.params)?;
    let p2 = p1.with_initial_balls(args.other_balls)?;
    let pairs = coupled_pairs(&p1, &p2, args.steps, args.seed, args.replicates)?;
    let report = contraction_diagnostic(&pairs)?;
    if !report.stationary_mass {
        log::warn!("initial masses differ from r*; the envelope holds only asymptotically");
    }
    emit_json(&report, args.out.as_deref())?;
    Ok(false)
}

fn verify_cmd(args: VerifyArgs) -> Outcome {
    let params = load_params(&args.params)?;
    let mut plan = ReplicationPlan::new(params, args.steps, args.replicates, args.seed);
    plan.checks = args.checks.into_iter().map(CheckKind::from).collect();
    let report = verify(&plan)?;
    if report.low_power {
        log::warn!("fewer than {} replicates: checks have low power", rp_urn::montecarlo::LOW_POWER_REPLICATES);
    }
    if let Some(path) = &args.dump {
        let records = run_replications(&plan)?;
        let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        write_records_csv(&records, BufWriter::new(file))?;
    }
    emit_json(&report, args.out.as_deref())?;
    for c in &report.checks {
        let tag = if c.passed { "pass" } else { "FAIL" };
        eprintln!("{tag} {}: {:.6} (tolerance {:.6})", c.name, c.discrepancy, c.tolerance);
    }
    Ok(args.fail_on_reject && !report.all_passed)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Constants(a) => constants(a),
        Command::Simulate(a) => simulate(a),
        Command::Gof(a) => gof(a),
        Command::EstimateLambda(a) => estimate(a),
        Command::ClusterTest(a) => cluster_test_cmd(a),
        Command::Couple(a) => couple(a),
        Command::Verify(a) => verify_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = run(cli);
    let _ = io::stdout().flush();
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_REJECT),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_lists_and_modes() {
        let cli = Cli::try_parse_from([
            "rp-urn", "gof", "--counts", "3,1", "--probs", "0.5,0.5", "--lambda", "1",
        ])
        .unwrap();
        match cli.command {
            Command::Gof(g) => {
                assert_eq!(g.counts, vec![3, 1]);
                assert_eq!(g.probs, vec![0.5, 0.5]);
                assert_eq!(g.theta, 0.05);
            }
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from([
            "rp-urn", "cluster-test", "--data", "x.csv", "--null-mode", "first-period",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::ClusterTest(_)));
        assert!(Cli::try_parse_from(["rp-urn", "verify", "--params", "p", "--check", "nope"]).is_err());
    }

    #[test]
    fn missing_inputs_are_usage_errors() {
        let g = GofArgs {
            counts: vec![3, 1],
            probs: vec![],
            lambda: Some(1.0),
            params: None,
            theta: 0.05,
            fail_on_reject: false,
            out: None,
        };
        assert!(matches!(gof(g), Err(Failure::Usage(_))));
        let n = NullArgs {
            data: "missing.csv".into(),
            k: None,
            null_mode: NullModeArg::Benchmark,
            first_period: None,
            benchmark_cluster: None,
        };
        assert!(matches!(null_probs(&n), Err(Failure::Usage(_))));
    }

    #[test]
    fn unreadable_params_is_data_error() {
        let err = load_params(Path::new("/nonexistent/params.json")).unwrap_err();
        assert!(format!("{err:#}").contains("cannot read parameter file"));
    }
}
