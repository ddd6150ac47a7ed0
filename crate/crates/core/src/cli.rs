//! Command-line front end: curve sweeps, outage simulation and self-checks.
//!
//! Exit status is 0 on success, 1 when a validation suite or a numerical
//! routine fails, and 2 for malformed or out-of-domain input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dmt::DmtError;
use crate::model::{ChannelConfig, CsitMode, CsitSpec, ExtReal, ModelError};
use crate::sim::{
    estimate_diversity, simulate_outage, Constellation, DiversityFit, InputAlphabet, OutageEstimate, PowerPolicy,
    SimError, SimulationSetup, DEFAULT_NOISE_SAMPLES,
};
use crate::sweep::{curves_to_csv, curves_to_json, format_number, run_sweep, GridRange, SweepConfig, SweepError, SweepKind};
use crate::validate::{run_suite, Suite, SuiteReport, ValidateOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "csit-dmt", version, about = "Diversity tradeoffs of MIMO block-fading channels with causal or predictive CSIT")]
pub struct Cli {
    /// Worker threads (0 picks one per core).
    #[arg(long, global = true, env = "CSIT_DMT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DMT curves; `--delay` for causal CSIT, `--predict` for predictive CSIT.
    Dmt(CurveArgs),
    /// RDT curves for a `2^M`-point constellation.
    Rdt(CurveArgs),
    /// Uniform-power DMT, or the Singleton bound with `--bits-per-symbol`.
    Baseline(CurveArgs),
    /// Same as `dmt --delay`.
    DmtCausal(CurveArgs),
    /// Same as `dmt --predict`.
    DmtPredictive(CurveArgs),
    /// Closed form for channels with one antenna on either side.
    DmtVector(CurveArgs),
    /// Same as `rdt --delay`.
    RdtCausal(CurveArgs),
    /// Same as `rdt --predict`.
    RdtPredictive(CurveArgs),
    /// Monte-Carlo outage probability over an SNR grid.
    Simulate(SimArgs),
    /// Run self-check suites and print a JSON report.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to json for `.json` output files and csv otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// JSON file with the same fields in kebab-case; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Causal CSIT delay(s) in blocks, comma separated.
    #[arg(long, conflicts_with = "predict", value_delimiter = ',')]
    pub delay: Option<Vec<usize>>,
    /// Predictive CSIT horizon(s) in blocks, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub predict: Option<Vec<usize>>,
    /// CSIT quality exponent(s), comma separated; `inf` for perfect CSIT.
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<ExtReal>>,
    /// Abscissa grid `start:stop:step`.
    #[arg(long, visible_alias = "rate-grid")]
    pub grid: Option<GridRange>,
    #[arg(long)]
    pub bits_per_symbol: Option<u32>,
    /// Use the closed form instead of the regional programs (`dmt --delay` only).
    #[arg(long)]
    pub closed_form: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Optional-valued mirror of [`CurveArgs`] read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct CurveFile {
    nt: Option<usize>,
    nr: Option<usize>,
    blocks: Option<usize>,
    delay: Option<OneOrMany<usize>>,
    predict: Option<OneOrMany<usize>>,
    delta: Option<OneOrMany<ExtReal>>,
    grid: Option<GridRange>,
    rate_grid: Option<GridRange>,
    bits_per_symbol: Option<u32>,
    closed_form: Option<bool>,
    out: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Uniform,
    ExponentRule,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// JSON file with the same fields in kebab-case; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long, conflicts_with = "predict")]
    pub delay: Option<usize>,
    #[arg(long)]
    pub predict: Option<usize>,
    #[arg(long)]
    pub delta: Option<ExtReal>,
    /// Defaults to exponent-rule when CSIT is given, uniform otherwise.
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Fixed target rate in bits per channel use.
    #[arg(long, conflicts_with = "multiplexing")]
    pub rate: Option<f64>,
    /// Rate scaling `r log2 P` instead of a fixed rate.
    #[arg(long)]
    pub multiplexing: Option<f64>,
    /// Discrete input with `2^M` points per antenna; Gaussian input if absent.
    #[arg(long)]
    pub bits_per_symbol: Option<u32>,
    #[arg(long)]
    pub noise_samples: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// SNR values in dB: `start:stop:step` or a comma list.
    #[arg(long)]
    pub snr_grid_db: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SimFile {
    nt: Option<usize>,
    nr: Option<usize>,
    blocks: Option<usize>,
    delay: Option<usize>,
    predict: Option<usize>,
    delta: Option<ExtReal>,
    policy: Option<PolicyArg>,
    rate: Option<f64>,
    multiplexing: Option<f64>,
    bits_per_symbol: Option<u32>,
    noise_samples: Option<usize>,
    trials: Option<u64>,
    seed: Option<u64>,
    snr_grid_db: Option<String>,
    out: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Suites to run, comma separated, or `all`.
    #[arg(default_value = "all")]
    pub suite: String,
    /// Trials per point of the simulation suite.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Usage(s) => CliError::Usage(s),
            SweepError::Model(m) | SweepError::Dmt(DmtError::Model(m)) => CliError::Usage(m.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(_) | SimError::AlphabetTooLarge { .. } => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Dmt(a) => curves(a, None, false),
        Command::Rdt(a) => curves(a, None, true),
        Command::Baseline(a) => curves(a, Some(SweepKind::Baseline), false),
        Command::DmtCausal(a) => curves(a, Some(SweepKind::DmtCausal), false),
        Command::DmtPredictive(a) => curves(a, Some(SweepKind::DmtPredictive), false),
        Command::DmtVector(a) => curves(a, Some(SweepKind::DmtVector), false),
        Command::RdtCausal(a) => curves(a, Some(SweepKind::RdtCausal), true),
        Command::RdtPredictive(a) => curves(a, Some(SweepKind::RdtPredictive), true),
        Command::Simulate(a) => simulate(a),
        Command::Validate(a) => validate(a),
    }
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn channel(nt: Option<usize>, nr: Option<usize>, blocks: Option<usize>) -> Result<ChannelConfig, CliError> {
    Ok(ChannelConfig::new(required(nt, "nt")?, required(nr, "nr")?, required(blocks, "blocks")?)?)
}

fn output_format(format: Option<Format>, out: Option<&Path>) -> Format {
    format.unwrap_or_else(|| match out.and_then(|p| p.extension()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn curves(a: CurveArgs, forced: Option<SweepKind>, rate_curve: bool) -> Result<i32, CliError> {
    let file: CurveFile = read_config(a.config.as_deref())?;
    let ch = channel(a.nt.or(file.nt), a.nr.or(file.nr), a.blocks.or(file.blocks))?;
    // A window given on the command line replaces both window fields of the file.
    let (delay, predict) = if a.delay.is_some() || a.predict.is_some() {
        (a.delay, a.predict)
    } else {
        (file.delay.map(OneOrMany::into_vec), file.predict.map(OneOrMany::into_vec))
    };
    if delay.is_some() && predict.is_some() {
        return Err(CliError::Usage("--delay and --predict are mutually exclusive".into()));
    }
    let closed_form = a.closed_form || file.closed_form.unwrap_or(false);
    let kind = match forced {
        Some(k) => k,
        None => match (&delay, &predict, rate_curve) {
            (Some(_), _, false) if closed_form => SweepKind::DmtVector,
            (Some(_), _, false) => SweepKind::DmtCausal,
            (_, Some(_), false) => SweepKind::DmtPredictive,
            (Some(_), _, true) => SweepKind::RdtCausal,
            (_, Some(_), true) => SweepKind::RdtPredictive,
            _ => return Err(CliError::Usage("one of --delay or --predict is required".into())),
        },
    };
    if closed_form && kind != SweepKind::DmtVector {
        return Err(CliError::Usage("--closed-form applies to causal DMT curves only".into()));
    }
    let windows = match kind {
        SweepKind::Baseline => Vec::new(),
        SweepKind::DmtPredictive | SweepKind::RdtPredictive => {
            if delay.is_some() {
                return Err(CliError::Usage(format!("{} takes --predict, not --delay", kind.name())));
            }
            required(predict, "predict")?
        }
        _ => {
            if predict.is_some() {
                return Err(CliError::Usage(format!("{} takes --delay, not --predict", kind.name())));
            }
            required(delay, "delay")?
        }
    };
    let deltas = match (kind, a.delta.or(file.delta.map(OneOrMany::into_vec))) {
        (SweepKind::Baseline, _) => Vec::new(),
        (_, d) => required(d, "delta")?,
    };
    let bits = a.bits_per_symbol.or(file.bits_per_symbol);
    if bits.is_some() && !rate_curve && kind != SweepKind::Baseline {
        return Err(CliError::Usage("--bits-per-symbol applies to rdt curves and the baseline".into()));
    }
    let cfg = SweepConfig { kind, channel: ch, windows, deltas, grid: a.grid.or(file.grid).or(file.rate_grid), bits };
    let out_path = a.output.out.or(file.out);
    let curves = run_sweep(&cfg)?;
    let text = match output_format(a.output.format.or(file.format), out_path.as_deref()) {
        Format::Csv => curves_to_csv(&curves),
        Format::Json => curves_to_json(&curves),
    };
    emit(&text, out_path.as_deref())?;
    Ok(EXIT_OK)
}

fn parse_snr_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let values = if s.contains(':') {
        s.parse::<GridRange>().map_err(CliError::Usage)?.points()?
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad SNR value {t:?}: {e}"))))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("bad SNR grid {s:?}")));
    }
    Ok(values)
}

#[derive(Serialize)]
struct SimPoint {
    snr_db: f64,
    #[serde(flatten)]
    estimate: OutageEstimate,
}

#[derive(Serialize)]
struct SimReport<'a> {
    channel: ChannelConfig,
    csit: CsitSpec,
    policy: PowerPolicy,
    bits_per_symbol: Option<u32>,
    multiplexing: Option<f64>,
    seed: u64,
    points: &'a [SimPoint],
    /// Slope of the outage curve, when at least three points have outages.
    diversity: Option<DiversityFitRecord>,
}

#[derive(Serialize)]
struct DiversityFitRecord {
    slope: f64,
    stderr: f64,
}

impl From<DiversityFit> for DiversityFitRecord {
    fn from(f: DiversityFit) -> Self {
        DiversityFitRecord { slope: f.slope, stderr: f.stderr }
    }
}

fn simulate(a: SimArgs) -> Result<i32, CliError> {
    let file: SimFile = read_config(a.config.as_deref())?;
    let ch = channel(a.nt.or(file.nt), a.nr.or(file.nr), a.blocks.or(file.blocks))?;
    let (delay, predict) =
        if a.delay.is_some() || a.predict.is_some() { (a.delay, a.predict) } else { (file.delay, file.predict) };
    let delta = a.delta.or(file.delta).unwrap_or(ExtReal::ZERO);
    let mode = match (delay, predict) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--delay and --predict are mutually exclusive".into())),
        (Some(u), None) => CsitMode::Causal { delay: u },
        (None, Some(t)) => CsitMode::Predictive { horizon: t },
        (None, None) => CsitMode::None,
    };
    let csit = CsitSpec::new(mode, delta, &ch)?;
    let policy = match a.policy.or(file.policy) {
        Some(PolicyArg::Uniform) => PowerPolicy::Uniform,
        Some(PolicyArg::ExponentRule) => PowerPolicy::ExponentRule,
        None if mode == CsitMode::None => PowerPolicy::Uniform,
        None => PowerPolicy::ExponentRule,
    };
    let bits = a.bits_per_symbol.or(file.bits_per_symbol);
    let input = match bits {
        None => InputAlphabet::Gaussian,
        Some(0) => return Err(CliError::Usage("--bits-per-symbol must be positive".into())),
        Some(b) => InputAlphabet::Discrete {
            constellation: Constellation::for_bits(b),
            noise_samples: a.noise_samples.or(file.noise_samples).unwrap_or(DEFAULT_NOISE_SAMPLES),
        },
    };
    let rate = a.rate.or(file.rate);
    let multiplexing = if rate.is_some() { None } else { a.multiplexing.or(file.multiplexing) };
    if rate.is_none() && multiplexing.is_none() {
        return Err(CliError::Usage("one of --rate or --multiplexing is required".into()));
    }
    let trials = a.trials.or(file.trials).unwrap_or(100_000);
    let seed = a.seed.or(file.seed).unwrap_or(1);
    let grid = parse_snr_grid(a.snr_grid_db.as_deref().or(file.snr_grid_db.as_deref()).unwrap_or("0:30:5"))?;
    let setup = SimulationSetup { cfg: ch, csit, policy, input };

    let mut points = Vec::with_capacity(grid.len());
    for &db in &grid {
        let snr = 10f64.powf(db / 10.0);
        let r = rate.unwrap_or_else(|| multiplexing.unwrap() * snr.log2());
        let estimate = simulate_outage(&setup, snr, r, trials, seed)?;
        points.push(SimPoint { snr_db: db, estimate });
    }
    let positive: Vec<(f64, f64)> =
        points.iter().filter(|p| p.estimate.p_out > 0.0).map(|p| (p.estimate.snr, p.estimate.p_out)).collect();
    let diversity = estimate_diversity(&positive).ok().map(DiversityFitRecord::from);

    let out_path = a.output.out.or(file.out);
    let text = match output_format(a.output.format.or(file.format), out_path.as_deref()) {
        Format::Csv => {
            let mut s = String::from("snr_db,snr,rate,p_out,ci95,trials,outages,mean_power\n");
            for p in &points {
                let e = &p.estimate;
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    format_number(p.snr_db),
                    format_number(e.snr),
                    format_number(e.rate),
                    format_number(e.p_out),
                    format_number(e.ci95),
                    e.trials,
                    e.outages,
                    format_number(e.mean_power)
                ));
            }
            s
        }
        Format::Json => {
            let report = SimReport { channel: ch, csit, policy, bits_per_symbol: bits, multiplexing, seed, points: &points, diversity };
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failure(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    emit(&text, out_path.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ValidationReport {
    passed: bool,
    suites: Vec<SuiteReport>,
}

fn validate(a: ValidateArgs) -> Result<i32, CliError> {
    let suites: Vec<Suite> = if a.suite.trim() == "all" {
        Suite::ALL.to_vec()
    } else {
        a.suite.split(',').map(|s| s.trim().parse::<Suite>().map_err(CliError::Usage)).collect::<Result<_, _>>()?
    };
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let opts = ValidateOptions { trials: a.trials, seed: a.seed };
    let reports: Vec<SuiteReport> = suites.into_iter().map(|s| run_suite(s, &opts)).collect();
    let report = ValidationReport { passed: reports.iter().all(|r| r.passed), suites: reports };
    for r in &report.suites {
        let failed = r.checks.iter().filter(|c| !c.passed).count();
        eprintln!("{}: {} ({} checks, {} failed)", r.suite, if r.passed { "pass" } else { "FAIL" }, r.checks.len(), failed);
    }
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failure(e.to_string()))?;
    text.push('\n');
    emit(&text, a.out.as_deref())?;
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("csit-dmt").chain(args.iter().copied()))
    }

    #[test]
    fn delay_and_predict_conflict() {
        assert!(parse(&["dmt", "--nt", "1", "--nr", "1", "--blocks", "2", "--delay", "1", "--predict", "0"]).is_err());
    }

    #[test]
    fn delta_lists_accept_inf() {
        let cli = parse(&["dmt", "--delta", "0,0.5,inf", "--delay", "1,2"]).unwrap();
        let Command::Dmt(a) = cli.command else { panic!() };
        assert_eq!(a.delta.unwrap(), vec![ExtReal::ZERO, ExtReal::Finite(0.5), ExtReal::Infinite]);
        assert_eq!(a.delay.unwrap(), vec![1, 2]);
    }

    #[test]
    fn rate_grid_alias() {
        let cli = parse(&["rdt", "--rate-grid", "0.5:1:0.25"]).unwrap();
        let Command::Rdt(a) = cli.command else { panic!() };
        assert_eq!(a.grid.unwrap(), GridRange { start: 0.5, stop: 1.0, step: 0.25 });
    }

    #[test]
    fn snr_grid_forms() {
        assert_eq!(parse_snr_grid("0:10:5").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_snr_grid("3, 7").unwrap(), vec![3.0, 7.0]);
        assert!(parse_snr_grid("a").is_err());
        assert!(parse_snr_grid("10:0:5").is_err());
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(output_format(None, Some(Path::new("x.JSON"))), Format::Json);
        assert_eq!(output_format(None, Some(Path::new("x.csv"))), Format::Csv);
        assert_eq!(output_format(Some(Format::Csv), Some(Path::new("x.json"))), Format::Csv);
        assert_eq!(output_format(None, None), Format::Csv);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["csit-dmt", "dmt", "--nt", "1"]), EXIT_USAGE);
        assert_eq!(run(["csit-dmt", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["csit-dmt", "dmt", "--nt", "1", "--nr", "1", "--blocks", "2", "--delta", "0.5", "--delay", "1", "--grid", "1:0:0.1"]), EXIT_USAGE);
        assert_eq!(run(["csit-dmt", "validate", "nope"]), EXIT_USAGE);
    }
}
