//! One function per subcommand. Results go to standard output (or the
//! `--out` path); diagnostics and warnings go to standard error, so piped
//! compositions stay clean. Anything returned as an `Err` here exits with
//! code 2 unless it is a [`UsageError`], which exits with code 1.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use wattledger::carbon::{
    emissions_constant, emissions_timeseries, read_intensity_csv, AlignmentStrategy,
    IntensityBasis,
};
use wattledger::estimation::{
    apply_pue, estimate_idle_baseline, integrate, marginal_energy, BaselineMethod,
    EnergyEstimate, IdleBaseline, IntegrationMethod, DEFAULT_BASELINE_PERCENTILE,
};
use wattledger::proxy::{
    apply_calibration, energy_from_utilization, load_catalog, normalize_hyperthread_utilization,
    read_loadline, select_loadline, tdp_energy_bound, CalibrationFactor, Loadline,
    SystemDescriptor,
};
use wattledger::report::{render, validate, MeasurementReport, RenderFormat, Severity};
use wattledger::simtrace::{generate, WorkloadSpec};
use wattledger::stats::{check_sampling, compare, summarize, RunSet, TestKind, TestName,
    DEFAULT_ALPHA, DEFAULT_PERMUTATION_ROUNDS};
use wattledger::telemetry::{
    decode_cumulative_counter, diagnose, read_trace_csv, write_trace_csv, MonitorDialect,
    PowerTrace, SampleKind, UtilizationSample, UtilizationTrace,
};

use crate::args::{
    BaselineArgs, CarbonArgs, Cli, Command, CompareArgs, InputFormat, IntegrateArgs,
    MarginalArgs, ProxyArgs, ReportArgs, SimulateArgs, ValidateArgs,
};
use crate::config::{
    bool_of, f64_of, require, str_of, strings_of, u64_of, usage, Config,
};
use crate::io::{read_input, to_json_bytes, write_output};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let jobs = match cli.jobs {
        Some(j) => j,
        None => cfg.jobs()?.unwrap_or(1),
    };
    match cli.command {
        Command::Validate(a) => cmd_validate(a, &cfg, jobs),
        Command::Integrate(a) => cmd_integrate(a, &cfg, jobs),
        Command::Baseline(a) => cmd_baseline(a, &cfg),
        Command::Marginal(a) => cmd_marginal(a, &cfg),
        Command::Proxy(a) => cmd_proxy(a, &cfg),
        Command::Carbon(a) => cmd_carbon(a, &cfg),
        Command::Compare(a) => cmd_compare(a, &cfg),
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Report(a) => cmd_report(a, &cfg),
    }
}

/// Run `f` over `items` on up to `jobs` threads, returning results in
/// input order regardless of completion order.
fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("no panics hold this lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("worker threads joined").expect("every slot filled"))
        .collect()
}

fn input_format_from_str(s: &str) -> anyhow::Result<InputFormat> {
    match s {
        "canonical" => Ok(InputFormat::Canonical),
        "gpu-smi" | "gpu_smi" => Ok(InputFormat::GpuSmi),
        "generic" => Ok(InputFormat::Generic),
        other => Err(usage(format!(
            "unknown input format '{other}'; expected canonical, gpu-smi, or generic"
        ))),
    }
}

fn resolve_input_format(
    flag: Option<InputFormat>,
    section: &Value,
) -> anyhow::Result<InputFormat> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match str_of(section, "input_format")? {
        Some(s) => input_format_from_str(&s),
        None => Ok(InputFormat::Canonical),
    }
}

/// Load one power trace in the requested layout. Monitor layouts may skip
/// unreadable rows; those skips come back as warnings.
fn load_trace(path: &str, format: InputFormat) -> anyhow::Result<(PowerTrace, Vec<String>)> {
    let text = read_input(path)?;
    let loaded = match format {
        InputFormat::Canonical => read_trace_csv(text.as_bytes()).map(|t| (t, Vec::new())),
        InputFormat::GpuSmi => {
            parse_monitor(text.as_bytes(), MonitorDialect::GpuSmiCsv)
        }
        InputFormat::Generic => parse_monitor(text.as_bytes(), MonitorDialect::Generic),
    };
    loaded.with_context(|| format!("parsing trace {path}"))
}

fn parse_monitor(
    bytes: &[u8],
    dialect: MonitorDialect,
) -> wattledger::Result<(PowerTrace, Vec<String>)> {
    wattledger::telemetry::parse_device_monitor_table(bytes, dialect)
}

#[derive(Serialize)]
struct TraceReport {
    path: String,
    source_id: String,
    level: String,
    sample_kind: String,
    samples: usize,
    span: (f64, f64),
    uniform_interval: Option<f64>,
    min_interval: Option<f64>,
    gaps: Vec<(f64, f64)>,
    zero_variance: bool,
}

fn cmd_validate(args: ValidateArgs, cfg: &Config, jobs: usize) -> anyhow::Result<()> {
    let section = cfg.section("validate");
    let traces = if args.traces.is_empty() { strings_of(section, "trace")? } else { args.traces };
    if traces.is_empty() {
        return Err(usage("pass at least one --trace (or set it in the config file)"));
    }
    let format = resolve_input_format(args.input_format, section)?;

    let outcomes = parallel_map(jobs, &traces, |path| -> anyhow::Result<_> {
        let (trace, warnings) = load_trace(path, format)?;
        let d = diagnose(&trace);
        Ok((trace, d, warnings))
    });

    for (path, outcome) in traces.iter().zip(outcomes) {
        let (trace, d, mut warnings) = outcome?;
        if d.zero_variance {
            warnings.push(
                "constant readings (zero variance); stuck or habitually-zero \
                 sensors are usually excluded from analysis"
                    .to_string(),
            );
        }
        for (a, b) in &d.gaps {
            warnings.push(format!("sampling gap from {a} s to {b} s"));
        }
        for w in &warnings {
            eprintln!("warning ({path}): {w}");
        }
        let report = TraceReport {
            path: path.clone(),
            source_id: trace.source_id().to_string(),
            level: trace.level().as_str().to_string(),
            sample_kind: trace.sample_kind().as_str().to_string(),
            samples: trace.samples().len(),
            span: trace.span(),
            uniform_interval: d.uniform_interval,
            min_interval: d.min_interval,
            gaps: d.gaps,
            zero_variance: d.zero_variance,
        };
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(())
}

fn cmd_integrate(args: IntegrateArgs, cfg: &Config, jobs: usize) -> anyhow::Result<()> {
    let section = cfg.section("integrate");
    let traces = if args.traces.is_empty() { strings_of(section, "trace")? } else { args.traces };
    if traces.is_empty() {
        return Err(usage("pass at least one --trace (or set it in the config file)"));
    }
    let format = resolve_input_format(args.input_format, section)?;
    let method_str = args
        .method
        .or(str_of(section, "method")?)
        .unwrap_or_else(|| "zero-order".to_string());
    let method = IntegrationMethod::from_str(&method_str)
        .map_err(|e| usage(format!("--method: {e}")))?;
    let from = args.from.or(f64_of(section, "from")?);
    let to = args.to.or(f64_of(section, "to")?);
    let pue = args.pue.or(f64_of(section, "pue")?);
    let counter_max = args.counter_max.or(f64_of(section, "counter_max")?);
    let out = args.out.or(str_of(section, "out")?);

    let outcomes = parallel_map(jobs, &traces, |path| -> anyhow::Result<_> {
        let (mut trace, mut warnings) = load_trace(path, format)?;
        if trace.sample_kind() == SampleKind::CumulativeEnergy {
            let modulus = match counter_max {
                Some(m) => m,
                None => trace.counter_max_uj()?,
            };
            trace = decode_cumulative_counter(&trace, modulus)
                .with_context(|| format!("decoding cumulative counter in {path}"))?;
            warnings.push(format!(
                "decoded cumulative energy counter (modulus {modulus} uJ) to interval powers"
            ));
        }
        let span = trace.span();
        let window = (from.unwrap_or(span.0), to.unwrap_or(span.1));
        warnings.extend(check_sampling(&trace, window).warnings);
        let mut est = integrate(&trace, window, method)
            .with_context(|| format!("integrating {path}"))?;
        if let Some(p) = pue {
            est = apply_pue(&est, p).with_context(|| format!("applying PUE to {path}"))?;
        }
        Ok((est, warnings))
    });

    let mut estimates = Vec::with_capacity(traces.len());
    for (path, outcome) in traces.iter().zip(outcomes) {
        let (est, warnings) = outcome?;
        for w in warnings {
            eprintln!("warning ({path}): {w}");
        }
        estimates.push(est);
    }

    if estimates.len() == 1 {
        println!("{} J", estimates[0].joules());
    } else {
        for (path, est) in traces.iter().zip(&estimates) {
            println!("{path}: {} J", est.joules());
        }
    }
    if let Some(out) = out {
        let bytes = if estimates.len() == 1 {
            to_json_bytes(&estimates[0])?
        } else {
            to_json_bytes(&estimates)?
        };
        write_output(&out, &bytes)?;
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("baseline");
    let declared = args.declared.or(f64_of(section, "declared")?);
    let out = args.out.or(str_of(section, "out")?);

    let baseline = if let Some(watts) = declared {
        let source = require(args.source, str_of(section, "source")?, "source")?;
        IdleBaseline::new(watts, BaselineMethod::Declared, (0.0, 0.0), source)?
    } else {
        let trace_path = require(args.trace, str_of(section, "trace")?, "trace")?;
        let percentile = args
            .percentile
            .or(f64_of(section, "percentile")?)
            .unwrap_or(DEFAULT_BASELINE_PERCENTILE);
        let (trace, warnings) = load_trace(&trace_path, InputFormat::Canonical)?;
        for w in warnings {
            eprintln!("warning ({trace_path}): {w}");
        }
        estimate_idle_baseline(&trace, percentile)
            .with_context(|| format!("estimating baseline from {trace_path}"))?
    };

    println!("{} W", baseline.watts.watts());
    if let Some(out) = out {
        write_output(&out, &to_json_bytes(&baseline)?)?;
    }
    Ok(())
}

fn cmd_marginal(args: MarginalArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("marginal");
    let estimate_path = require(args.estimate, str_of(section, "estimate")?, "estimate")?;
    let baseline_path = require(args.baseline, str_of(section, "baseline")?, "baseline")?;
    let out = args.out.or(str_of(section, "out")?);

    let estimate: EnergyEstimate = serde_json::from_str(&read_input(&estimate_path)?)
        .with_context(|| format!("parsing estimate {estimate_path}"))?;
    let baseline: IdleBaseline = serde_json::from_str(&read_input(&baseline_path)?)
        .with_context(|| format!("parsing baseline {baseline_path}"))?;

    let marginal = marginal_energy(&estimate, &baseline)?;
    for note in marginal.notes() {
        eprintln!("note: {note}");
    }
    println!("{} J", marginal.joules());
    if let Some(out) = out {
        write_output(&out, &to_json_bytes(&marginal)?)?;
    }
    Ok(())
}

/// Read a `timestamp,utilization` CSV. With `normalize`, the utilization
/// column holds OS-reported percent (0–100 per logical thread summed over
/// threads) and is normalized to a [0, 1] node fraction first.
fn read_utilization_csv(
    text: &str,
    source_id: &str,
    physical_cores: u32,
    logical_per_core: u32,
    normalize: bool,
) -> anyhow::Result<(UtilizationTrace, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().context("reading utilization CSV header")?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            anyhow::anyhow!(
                "utilization CSV needs a '{name}' column; found: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            )
        })
    };
    let t_idx = col("timestamp")?;
    let u_idx = col("utilization")?;

    let mut warnings = Vec::new();
    let mut samples = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("utilization CSV row {}", i + 2))?;
        let parse = |idx: usize, what: &str| -> anyhow::Result<f64> {
            row.get(idx)
                .unwrap_or("")
                .parse::<f64>()
                .with_context(|| format!("utilization CSV row {}: bad {what}", i + 2))
        };
        let timestamp = parse(t_idx, "timestamp")?;
        let mut utilization = parse(u_idx, "utilization")?;
        if normalize {
            let (fraction, warning) =
                normalize_hyperthread_utilization(utilization, physical_cores)?;
            utilization = fraction;
            if let Some(w) = warning {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
        samples.push(UtilizationSample { timestamp, utilization });
    }
    samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let trace = UtilizationTrace::new(source_id, samples, physical_cores, logical_per_core)?;
    Ok((trace, warnings))
}

fn cmd_proxy(args: ProxyArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("proxy");
    let out = args.out.or(str_of(section, "out")?);
    let tdp_bound = args.tdp_bound || bool_of(section, "tdp_bound")?.unwrap_or(false);
    let arch = args.arch.or(str_of(section, "arch")?);
    let tdp = args.tdp.or(f64_of(section, "tdp")?);
    let clock = args.clock.or(f64_of(section, "clock")?).unwrap_or(0.0);
    let workload = args.workload.or(str_of(section, "workload")?);

    let mut estimate = if tdp_bound {
        let arch = require(arch, None, "arch")?;
        let tdp = require(tdp, None, "tdp")?;
        let duration = require(args.duration, f64_of(section, "duration")?, "duration")?;
        let desc = SystemDescriptor::new(arch, tdp, clock, workload)?;
        tdp_energy_bound(&desc, duration)?
    } else {
        let util_path = require(args.utilization, str_of(section, "utilization")?, "utilization")?;
        let physical = args
            .physical_cores
            .or(u64_of(section, "physical_cores")?.map(|v| v as u32))
            .unwrap_or(1);
        let logical = args
            .logical_per_core
            .or(u64_of(section, "logical_per_core")?.map(|v| v as u32))
            .unwrap_or(1);
        let normalize = args.normalize || bool_of(section, "normalize")?.unwrap_or(false);

        let text = read_input(&util_path)?;
        let source_id = if util_path == "-" { "stdin" } else { &util_path };
        let (ut, warnings) =
            read_utilization_csv(&text, source_id, physical, logical, normalize)
                .with_context(|| format!("parsing utilization trace {util_path}"))?;
        for w in warnings {
            eprintln!("warning ({util_path}): {w}");
        }

        let loadline_path = args.loadline.or(str_of(section, "loadline")?);
        let catalog_dir = args.catalog.or(str_of(section, "catalog")?);
        let ll: Loadline = match (loadline_path, catalog_dir) {
            (Some(path), _) => read_loadline(read_input(&path)?.as_bytes())
                .with_context(|| format!("parsing loadline {path}"))?,
            (None, Some(dir)) => {
                let arch = require(arch, None, "arch")?;
                let tdp = require(tdp, None, "tdp")?;
                let desc = SystemDescriptor::new(arch, tdp, clock, workload)?;
                let catalog = load_catalog(Path::new(&dir))?;
                let (chosen, score) = select_loadline(&catalog, &desc)?;
                eprintln!(
                    "selected loadline '{}' ({}, {} W TDP) with score {score:.2}",
                    chosen.meta().workload_name,
                    chosen.meta().architecture,
                    chosen.meta().tdp_watts.watts(),
                );
                chosen.clone()
            }
            (None, None) => {
                return Err(usage("pass --loadline <file> or --catalog <dir>"));
            }
        };

        let span = ut.span();
        let from = args.from.or(f64_of(section, "from")?).unwrap_or(span.0);
        let to = args.to.or(f64_of(section, "to")?).unwrap_or(span.1);
        energy_from_utilization(&ut, &ll, (from, to))?
    };

    let calibration = args.calibration.or(f64_of(section, "calibration")?);
    if let Some(scale) = calibration {
        let source = args
            .calibration_source
            .or(str_of(section, "calibration_source")?)
            .unwrap_or_else(|| "configured calibration factor".to_string());
        let factor = CalibrationFactor::new(scale, source)?;
        estimate = apply_calibration(&estimate, &factor);
    }

    for note in estimate.notes() {
        eprintln!("note: {note}");
    }
    println!("{} J", estimate.joules());
    if let Some(out) = out {
        write_output(&out, &to_json_bytes(&estimate)?)?;
    }
    Ok(())
}

fn cmd_carbon(args: CarbonArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("carbon");
    let out = args.out.or(str_of(section, "out")?);
    let estimate_path = args.estimate.or(str_of(section, "estimate")?);

    let emissions = if let Some(est_path) = estimate_path {
        let estimate: EnergyEstimate = serde_json::from_str(&read_input(&est_path)?)
            .with_context(|| format!("parsing estimate {est_path}"))?;
        let intensity = require(args.intensity, f64_of(section, "intensity")?, "intensity")?;
        let basis_str = require(args.basis, str_of(section, "basis")?, "basis")?;
        let basis = IntensityBasis::from_str(&basis_str)
            .map_err(|e| usage(format!("--basis: {e}")))?;
        emissions_constant(&estimate, intensity, basis)?
    } else {
        let trace_path = require(args.trace, str_of(section, "trace")?, "trace")?;
        let ci_path =
            require(args.intensity_csv, str_of(section, "intensity_csv")?, "intensity-csv")?;
        let align_str = args
            .align
            .or(str_of(section, "align")?)
            .unwrap_or_else(|| "upsample-intensity".to_string());
        let strategy = AlignmentStrategy::from_str(&align_str)
            .map_err(|e| usage(format!("--align: {e}")))?;

        let (trace, warnings) = load_trace(&trace_path, InputFormat::Canonical)?;
        for w in warnings {
            eprintln!("warning ({trace_path}): {w}");
        }
        let ci = read_intensity_csv(read_input(&ci_path)?.as_bytes())
            .with_context(|| format!("parsing intensity CSV {ci_path}"))?;
        let span = trace.span();
        let from = args.from.or(f64_of(section, "from")?).unwrap_or(span.0);
        let to = args.to.or(f64_of(section, "to")?).unwrap_or(span.1);
        emissions_timeseries(&trace, &ci, (from, to), strategy)?
    };

    for note in emissions.energy.notes() {
        eprintln!("note: {note}");
    }
    println!("{} gCO2", emissions.grams_co2);
    if let Some(out) = out {
        write_output(&out, &to_json_bytes(&emissions)?)?;
    }
    Ok(())
}

/// An estimate file holds either a single serialized estimate or an array
/// of them (a repetition set).
fn read_estimates(path: &str) -> anyhow::Result<Vec<EnergyEstimate>> {
    let text = read_input(path)?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
    let estimates = if value.is_array() {
        serde_json::from_value::<Vec<EnergyEstimate>>(value)
    } else {
        serde_json::from_value::<EnergyEstimate>(value).map(|e| vec![e])
    };
    estimates.with_context(|| format!("parsing estimates in {path}"))
}

fn cmd_compare(args: CompareArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("compare");
    let a_paths = if args.a.is_empty() { strings_of(section, "a")? } else { args.a };
    let b_paths = if args.b.is_empty() { strings_of(section, "b")? } else { args.b };
    if a_paths.is_empty() || b_paths.is_empty() {
        return Err(usage("pass estimate files for both sides with --a and --b"));
    }
    let out = args.out.or(str_of(section, "out")?);

    let load_set = |label: &str, paths: &[String]| -> anyhow::Result<RunSet> {
        let mut estimates = Vec::new();
        for p in paths {
            estimates.extend(read_estimates(p)?);
        }
        Ok(RunSet::new(label, estimates, BTreeMap::new())?)
    };
    let set_a = load_set("a", &a_paths)?;
    let set_b = load_set("b", &b_paths)?;

    let test_str = args
        .test
        .or(str_of(section, "test")?)
        .unwrap_or_else(|| "welch".to_string());
    let test = match test_str.as_str() {
        "welch" | "welch_t" | "welch-t" => TestKind::WelchT,
        "permutation" => TestKind::Permutation {
            rounds: args
                .rounds
                .or(u64_of(section, "rounds")?.map(|v| v as u32))
                .unwrap_or(DEFAULT_PERMUTATION_ROUNDS),
            seed: args.seed.or(u64_of(section, "seed")?).unwrap_or(0),
        },
        other => {
            return Err(usage(format!(
                "unknown test '{other}'; expected welch or permutation"
            )));
        }
    };
    let alpha = args.alpha.or(f64_of(section, "alpha")?).unwrap_or(DEFAULT_ALPHA);

    let result = compare(&set_a, &set_b, test, alpha)?;

    for set in [&set_a, &set_b] {
        let s = summarize(set);
        match s.stddev_joules {
            Some(sd) => println!("{}: n={} mean={} J sd={} J", set.label(), s.n, s.mean_joules, sd),
            None => println!("{}: n={} mean={} J", set.label(), s.n, s.mean_joules),
        }
    }
    println!("mean difference: {} J", result.mean_diff_joules);
    println!(
        "{}% confidence interval: [{}, {}] J",
        (1.0 - alpha) * 100.0,
        result.ci95.0,
        result.ci95.1
    );
    let test_name = match result.test {
        TestName::WelchT => "welch_t",
        TestName::Permutation => "permutation",
    };
    println!("p-value: {} ({test_name})", result.p_value);

    if let Some(out) = out {
        write_output(&out, &to_json_bytes(&result)?)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("simulate");
    let spec_path = require(args.spec, str_of(section, "spec")?, "spec")?;
    let interval = require(args.interval, f64_of(section, "interval")?, "interval")?;
    let out = args.out.or(str_of(section, "out")?).unwrap_or_else(|| "-".to_string());
    let truth_out = args.truth.or(str_of(section, "truth")?);

    let spec: WorkloadSpec = serde_json::from_str(&read_input(&spec_path)?)
        .with_context(|| format!("parsing workload spec {spec_path}"))?;
    let (trace, truth) = generate(&spec, interval)?;

    let mut csv_bytes = Vec::new();
    write_trace_csv(&trace, &mut csv_bytes)?;
    write_output(&out, &csv_bytes)?;

    eprintln!(
        "simulated {} samples over {} s; ground truth {} J",
        trace.samples().len(),
        truth.span.end,
        truth.joules.joules()
    );
    if let Some(truth_path) = truth_out {
        write_output(&truth_path, &to_json_bytes(&truth)?)?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs, cfg: &Config) -> anyhow::Result<()> {
    let section = cfg.section("report");
    let input = require(args.input, str_of(section, "in")?, "in")?;
    let check = args.check || bool_of(section, "check")?.unwrap_or(false);
    let out = args.out.or(str_of(section, "out")?).unwrap_or_else(|| "-".to_string());

    let report: MeasurementReport = serde_json::from_str(&read_input(&input)?)
        .with_context(|| format!("parsing report {input}"))?;
    let findings = validate(&report);

    if check {
        for f in &findings {
            println!("{f}");
        }
        let errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
        if errors > 0 {
            anyhow::bail!("report failed validation with {errors} error(s)");
        }
        return Ok(());
    }

    let format_str = args
        .format
        .or(str_of(section, "format")?)
        .unwrap_or_else(|| "markdown".to_string());
    let format =
        RenderFormat::from_str(&format_str).map_err(|e| usage(format!("--format: {e}")))?;

    for f in findings.iter().filter(|f| f.severity == Severity::Warning) {
        eprintln!("{f}");
    }
    let bytes = match render(&report, format) {
        Ok(b) => b,
        Err(wattledger::Error::ReportInvalid { findings }) => {
            anyhow::bail!("report failed validation:\n  {}", findings.join("\n  "));
        }
        Err(e) => return Err(e.into()),
    };
    write_output(&out, &bytes)?;
    Ok(())
}
