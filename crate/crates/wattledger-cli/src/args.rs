//! Command-line surface. Every value-bearing flag is optional at the
//! parser level so a config file can supply it; the command
//! implementations resolve flag → config → default and raise a usage
//! error only when a genuinely required value is missing from both.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "wattledger",
    version,
    about = "Energy, marginal-energy, and emissions accounting from power telemetry",
    propagate_version = true
)]
pub struct Cli {
    /// JSON config file providing defaults for any flag (flags win).
    /// Falls back to the WATTLEDGER_CONFIG environment variable.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for commands that process several traces
    /// (default 1). Outputs are always merged in input order.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse power traces and print sampling diagnostics.
    Validate(ValidateArgs),
    /// Integrate a power trace to energy over a time window.
    Integrate(IntegrateArgs),
    /// Estimate (or declare) a source's idle power baseline.
    Baseline(BaselineArgs),
    /// Subtract an idle baseline from an absolute energy estimate.
    Marginal(MarginalArgs),
    /// Estimate energy from utilization via a loadline, or bound it by TDP.
    Proxy(ProxyArgs),
    /// Convert energy to grams of CO2 using carbon intensity data.
    Carbon(CarbonArgs),
    /// Compare two sets of repeated energy measurements statistically.
    Compare(CompareArgs),
    /// Generate a synthetic power trace with analytic ground truth.
    Simulate(SimulateArgs),
    /// Validate and render a measurement transparency report.
    Report(ReportArgs),
}

/// On-disk layout of a power trace input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// The tool's own CSV: timestamp,value,unit,source_id,level,sample_kind.
    Canonical,
    /// GPU monitor CSV with a `power.draw`-style column.
    GpuSmi,
    /// Any CSV with a time column and a power/watts column.
    Generic,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Trace file(s); `-` reads one trace from standard input.
    #[arg(long = "trace", value_name = "PATH")]
    pub traces: Vec<String>,
    /// How the trace files are laid out.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    /// Trace file(s); `-` reads one trace from standard input.
    #[arg(long = "trace", value_name = "PATH")]
    pub traces: Vec<String>,
    /// Window start in trace time (seconds).
    #[arg(long)]
    pub from: Option<f64>,
    /// Window end in trace time (seconds).
    #[arg(long)]
    pub to: Option<f64>,
    /// Integration rule: zero-order or trapezoid.
    #[arg(long)]
    pub method: Option<String>,
    /// Scale the result by a facility PUE (>= 1).
    #[arg(long)]
    pub pue: Option<f64>,
    /// Counter modulus in microjoules for cumulative-energy traces
    /// (overrides trace metadata).
    #[arg(long, value_name = "UJ")]
    pub counter_max: Option<f64>,
    /// How the trace files are laid out.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
    /// Write the full estimate(s) as JSON here; `-` for standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// Trace to estimate the idle floor from; `-` for standard input.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<String>,
    /// Percentile of the sorted power values to take (0, 1).
    #[arg(long)]
    pub percentile: Option<f64>,
    /// Skip estimation and declare the idle power directly (watts).
    #[arg(long, value_name = "WATTS", conflicts_with_all = ["trace", "percentile"])]
    pub declared: Option<f64>,
    /// Source identifier for a declared baseline.
    #[arg(long, value_name = "ID")]
    pub source: Option<String>,
    /// Write the baseline as JSON here; `-` for standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct MarginalArgs {
    /// Absolute energy estimate (JSON, as written by `integrate --out`).
    #[arg(long, value_name = "PATH")]
    pub estimate: Option<String>,
    /// Idle baseline (JSON, as written by `baseline --out`).
    #[arg(long, value_name = "PATH")]
    pub baseline: Option<String>,
    /// Write the marginal estimate as JSON here; `-` for standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct ProxyArgs {
    /// Utilization trace CSV with `timestamp,utilization` columns;
    /// `-` for standard input.
    #[arg(long, value_name = "PATH")]
    pub utilization: Option<String>,
    /// Loadline JSON file to evaluate against.
    #[arg(long, value_name = "PATH")]
    pub loadline: Option<String>,
    /// Directory of loadline JSON files to select from automatically.
    #[arg(long, value_name = "DIR", conflicts_with = "loadline")]
    pub catalog: Option<String>,
    /// Window start (seconds).
    #[arg(long)]
    pub from: Option<f64>,
    /// Window end (seconds).
    #[arg(long)]
    pub to: Option<f64>,
    /// Physical core count, for hyperthread normalization.
    #[arg(long)]
    pub physical_cores: Option<u32>,
    /// Hardware threads per physical core.
    #[arg(long)]
    pub logical_per_core: Option<u32>,
    /// Treat the utilization column as OS-reported percent (can exceed
    /// 100) and normalize it to a [0, 1] node fraction.
    #[arg(long)]
    pub normalize: bool,
    /// Compute a TDP upper bound instead of a loadline estimate.
    #[arg(long)]
    pub tdp_bound: bool,
    /// System architecture (for catalog selection and TDP bounds).
    #[arg(long)]
    pub arch: Option<String>,
    /// System TDP in watts (for catalog selection and TDP bounds).
    #[arg(long, value_name = "WATTS")]
    pub tdp: Option<f64>,
    /// Base clock in GHz (for catalog selection).
    #[arg(long, value_name = "GHZ")]
    pub clock: Option<f64>,
    /// Workload name hint (for catalog selection).
    #[arg(long)]
    pub workload: Option<String>,
    /// Duration in seconds (TDP bound mode).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Multiply the result by a calibration factor.
    #[arg(long, value_name = "SCALE")]
    pub calibration: Option<f64>,
    /// Where the calibration factor came from.
    #[arg(long, value_name = "TEXT")]
    pub calibration_source: Option<String>,
    /// Write the estimate as JSON here; `-` for standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct CarbonArgs {
    /// Energy estimate JSON (constant-intensity mode).
    #[arg(long, value_name = "PATH")]
    pub estimate: Option<String>,
    /// Constant carbon intensity in gCO2 per kWh.
    #[arg(long, value_name = "G_PER_KWH")]
    pub intensity: Option<f64>,
    /// How the intensity was derived: yearly_average or realtime.
    #[arg(long)]
    pub basis: Option<String>,
    /// Power trace CSV (time-series mode); `-` for standard input.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<String>,
    /// Carbon intensity CSV (time-series mode).
    #[arg(long, value_name = "PATH")]
    pub intensity_csv: Option<String>,
    /// Window start (seconds, time-series mode).
    #[arg(long)]
    pub from: Option<f64>,
    /// Window end (seconds, time-series mode).
    #[arg(long)]
    pub to: Option<f64>,
    /// Alignment strategy: upsample-intensity or downsample-power.
    #[arg(long)]
    pub align: Option<String>,
    /// Write the emissions estimate as JSON here; `-` for standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Estimate JSON file(s) for the first condition (file may hold one
    /// estimate or an array).
    #[arg(long = "a", value_name = "PATH")]
    pub a: Vec<String>,
    /// Estimate JSON file(s) for the second condition.
    #[arg(long = "b", value_name = "PATH")]
    pub b: Vec<String>,
    /// Significance test: welch or permutation.
    #[arg(long)]
    pub test: Option<String>,
    /// Monte-Carlo rounds for the permutation test.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// RNG seed for the permutation test.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Significance level for the confidence interval.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Write the comparison result as JSON here; `-` for standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Workload spec JSON; `-` for standard input.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<String>,
    /// Sampling interval in seconds.
    #[arg(long, value_name = "S")]
    pub interval: Option<f64>,
    /// Where to write the trace CSV (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
    /// Where to write the analytic ground truth as JSON.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Measurement report JSON; `-` for standard input.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<String>,
    /// Output format: json or markdown.
    #[arg(long)]
    pub format: Option<String>,
    /// Only run validation and list findings, without rendering.
    #[arg(long)]
    pub check: bool,
    /// Where to write the rendered report (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
}
