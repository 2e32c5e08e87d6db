//! End-to-end tests of the compiled binary: exit codes, stream separation
//! (results on stdout, warnings on stderr), pipelines, and config-file
//! merging.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wattledger"));
    // Keep the ambient environment from leaking a config file into tests.
    c.env_remove("WATTLEDGER_CONFIG");
    c
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(cmd: &mut Command) -> Run {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    Run {
        code: status.code().expect("no signal"),
        stdout: String::from_utf8(stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(stderr).expect("utf-8 stderr"),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).expect("write test file");
    path.to_str().expect("utf-8 path").to_string()
}

const CONSTANT_TRACE: &str = "\
timestamp,value,unit,source_id,level,sample_kind
0,100,W,cpu1,node,instantaneous_power
60,100,W,cpu1,node,instantaneous_power
120,100,W,cpu1,node,instantaneous_power
";

#[test]
fn integrate_constant_trace_prints_joules() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_file(dir.path(), "t.csv", CONSTANT_TRACE);
    let r = run(bin().args([
        "integrate", "--trace", &trace, "--from", "0", "--to", "120", "--method", "zero-order",
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "12000 J\n");
    // Three samples in the window is far too few; the aliasing warning
    // belongs on stderr, not mixed into the result.
    assert!(r.stderr.contains("alias"), "stderr: {}", r.stderr);
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let r = run(bin().args(["integrate", "--frobnicate"]));
    assert_eq!(r.code, 1, "unknown flag is a usage error");

    let r = run(bin().args(["integrate", "--trace", "/nonexistent.csv", "--from", "0", "--to", "1"]));
    assert_eq!(r.code, 2, "unreadable file is a data error");

    let r = run(bin().arg("--help"));
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("integrate"));

    let r = run(bin().args(["integrate", "--help"]));
    assert_eq!(r.code, 0, "every subcommand answers --help");

    let r = run(bin().arg("--version"));
    assert_eq!(r.code, 0);

    // A required value missing from both flags and config is usage, not data.
    let r = run(bin().args(["marginal", "--baseline", "b.json"]));
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("--estimate"), "stderr: {}", r.stderr);
}

#[test]
fn simulate_feeds_integrate_through_a_pipe() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "spike.json",
        r#"{"phases":[{"duration":600.0,"watts":100.0}],
            "spikes":[{"time":120.0,"duration":1.0,"watts":500.0}],
            "noise_std":0.0,"seed":1}"#,
    );
    let sim = run(bin().args(["simulate", "--spec", &spec, "--interval", "60"]));
    assert_eq!(sim.code, 0, "stderr: {}", sim.stderr);
    assert!(sim.stderr.contains("ground truth 60400 J"), "stderr: {}", sim.stderr);

    let mut child = bin()
        .args(["integrate", "--trace", "-", "--from", "0", "--to", "600"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(sim.stdout.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    // The 60 s sampler lands on the 1 s spike and smears it: 84 000 J
    // against a 60 400 J truth.
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "84000 J\n");
}

#[test]
fn sparse_simulated_trace_triggers_aliasing_warning() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "short.json",
        r#"{"phases":[{"duration":480.0,"watts":100.0}],
            "spikes":[{"time":130.5,"duration":1.0,"watts":500.0}],
            "noise_std":0.0,"seed":1}"#,
    );
    let trace = dir.path().join("tr.csv");
    let truth = dir.path().join("truth.json");
    let sim = run(bin().args([
        "simulate",
        "--spec",
        &spec,
        "--interval",
        "60",
        "--out",
        trace.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]));
    assert_eq!(sim.code, 0);

    let truth_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(truth_json["joules"], 48_400.0);

    let r = run(bin().args(["integrate", "--trace", trace.to_str().unwrap()]));
    assert_eq!(r.code, 0);
    // Nine samples in the window: the spike was missed entirely and the
    // tool says the sampling is too sparse to trust.
    assert_eq!(r.stdout, "48000 J\n");
    assert!(r.stderr.contains("alias"), "stderr: {}", r.stderr);
}

#[test]
fn report_without_runtime_fails_listing_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let report = write_file(
        dir.path(),
        "report.json",
        r#"{"results":[{"joules":12000.0,"unit":"J","interval":[0.0,120.0],
             "method":"zero_order","scope":{"level":"node","sources":["cpu1"]},
             "basis":"absolute"}],
            "units_declared":"J"}"#,
    );
    let r = run(bin().args(["report", "--in", &report, "--format", "markdown"]));
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("R-RUNTIME"), "stderr: {}", r.stderr);

    // --check lists findings on stdout instead of rendering.
    let r = run(bin().args(["report", "--in", &report, "--check"]));
    assert_eq!(r.code, 2);
    assert!(r.stdout.contains("R-RUNTIME"), "stdout: {}", r.stdout);
}

#[test]
fn complete_report_renders_markdown_sections() {
    let dir = tempfile::tempdir().unwrap();
    let report = write_file(
        dir.path(),
        "report.json",
        r#"{
          "hardware": {"components": [{"kind":"cpu","make":"ACME","model":"X1",
                        "clock_ghz":2.5,"cores":8,"memory_gb":32.0}],
                       "configuration": "single node"},
          "software": {"environment": "Linux", "versions": {"bench": "1.0"},
                       "optimizations": "none", "parallelism": "1 thread"},
          "methodology": {"tools": ["onboard counters"],
                          "setup_conditions": "idle first",
                          "calibration_notes": "factory"},
          "runtime_over_hardware": {"duration": 120.0,
                                    "resource_description": "1 node"},
          "results": [{"joules":12000.0,"unit":"J","interval":[0.0,120.0],
                       "method":"zero_order",
                       "scope":{"level":"node","sources":["cpu1"]},
                       "basis":"absolute"}],
          "error_sources": ["counter quantization"],
          "units_declared": "J"
        }"#,
    );
    let first = run(bin().args(["report", "--in", &report]));
    assert_eq!(first.code, 0, "stderr: {}", first.stderr);
    for heading in [
        "## Hardware Characteristics",
        "## Software Characteristics",
        "## Measurement Methodology",
        "## Additional Considerations",
        "## Sources of Error",
    ] {
        assert!(first.stdout.contains(heading), "missing {heading}");
    }
    assert!(first.stdout.contains("12000 J"));

    let second = run(bin().args(["report", "--in", &report]));
    assert_eq!(first.stdout, second.stdout, "rendering must be deterministic");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_file(dir.path(), "t.csv", CONSTANT_TRACE);
    let cfg = write_file(
        dir.path(),
        "cfg.json",
        &format!(r#"{{"integrate": {{"pue": 2.0, "from": 0, "to": 120, "trace": "{trace}"}}}}"#),
    );

    // Everything, including the input path, can come from the file.
    let r = run(bin().args(["--config", &cfg, "integrate"]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "24000 J\n");

    // A flag on the command line beats the file.
    let r = run(bin().args(["--config", &cfg, "integrate", "--pue", "1.5"]));
    assert_eq!(r.stdout, "18000 J\n");

    // The environment variable names the same default config.
    let r = run(bin()
        .env("WATTLEDGER_CONFIG", &cfg)
        .args(["integrate"]));
    assert_eq!(r.stdout, "24000 J\n");

    // A malformed config is a usage problem, not a data problem.
    let bad = write_file(dir.path(), "bad.json", "{not json");
    let r = run(bin().args(["--config", &bad, "integrate", "--trace", &trace]));
    assert_eq!(r.code, 1);
}

#[test]
fn baseline_and_marginal_compose_through_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("timestamp,value,unit,source_id,level,sample_kind\n");
    for i in 0..100 {
        let watts = if i < 5 { 220 } else { 500 };
        rows.push_str(&format!("{i},{watts},W,cpu1,node,instantaneous_power\n"));
    }
    let trace = write_file(dir.path(), "load.csv", &rows);
    let base = dir.path().join("base.json");
    let est = dir.path().join("est.json");

    let r = run(bin().args([
        "baseline", "--trace", &trace, "--percentile", "0.05", "--out",
        base.to_str().unwrap(),
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "220 W\n");

    let r = run(bin().args([
        "integrate", "--trace", &trace, "--from", "0", "--to", "99", "--out",
        est.to_str().unwrap(),
    ]));
    assert_eq!(r.code, 0);

    let r = run(bin().args([
        "marginal", "--estimate", est.to_str().unwrap(), "--baseline", base.to_str().unwrap(),
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    // 48 100 J absolute minus 220 W x 99 s of idle.
    assert_eq!(r.stdout, "26320 J\n");
    assert!(r.stderr.contains("baseline"), "provenance note expected: {}", r.stderr);

    // A declared baseline needs no trace at all.
    let r = run(bin().args(["baseline", "--declared", "220", "--source", "cpu1"]));
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, "220 W\n");
}

#[test]
fn jobs_flag_preserves_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--jobs".to_string(), "4".to_string(), "integrate".to_string()];
    let mut paths = Vec::new();
    for i in 0..6 {
        let watts = (i + 1) * 100;
        let body = format!(
            "timestamp,value,unit,source_id,level,sample_kind\n\
             0,{watts},W,n{i},node,instantaneous_power\n\
             60,{watts},W,n{i},node,instantaneous_power\n"
        );
        let path = write_file(dir.path(), &format!("t{i}.csv"), &body);
        args.push("--trace".to_string());
        args.push(path.clone());
        paths.push(path);
    }
    args.extend(["--from".into(), "0".into(), "--to".into(), "60".into()]);

    let r = run(bin().args(&args));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), 6);
    for (i, line) in lines.iter().enumerate() {
        let expected = format!("{}: {} J", paths[i], (i + 1) * 100 * 60);
        assert_eq!(*line, expected, "results must come back in input order");
    }
}

#[test]
fn proxy_normalizes_hyperthreaded_percentages() {
    let dir = tempfile::tempdir().unwrap();
    let loadline = write_file(
        dir.path(),
        "ll.json",
        r#"{"meta":{"architecture":"x86","tdp_watts":200.0,"base_clock_ghz":2.5,
             "workload_name":"ramp"},
            "points":[{"utilization":0.0,"watts":50.0},
                      {"utilization":0.5,"watts":120.0},
                      {"utilization":1.0,"watts":200.0}]}"#,
    );
    // OS-reported percent on an 8-core box: 600% is six busy cores.
    let util = write_file(
        dir.path(),
        "util.csv",
        "timestamp,utilization\n0,600\n60,600\n120,600\n",
    );
    let r = run(bin().args([
        "proxy", "--utilization", &util, "--loadline", &loadline, "--normalize",
        "--physical-cores", "8",
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    // 600% / 8 cores = 0.75 utilization = 160 W over 120 s.
    assert_eq!(r.stdout, "19200 J\n");

    // Hyperthreading can push the sum past 100% per core; it is clamped
    // with a warning rather than rejected.
    let overcommitted = write_file(
        dir.path(),
        "over.csv",
        "timestamp,utilization\n0,1600\n60,1600\n",
    );
    let r = run(bin().args([
        "proxy", "--utilization", &overcommitted, "--loadline", &loadline, "--normalize",
        "--physical-cores", "8",
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "12000 J\n", "clamped to u=1.0: 200 W x 60 s");
    assert!(r.stderr.contains("clamp"), "stderr: {}", r.stderr);
}

#[test]
fn tdp_bound_mode_needs_no_trace() {
    let r = run(bin().args([
        "proxy", "--tdp-bound", "--arch", "x86-server", "--tdp", "200", "--duration", "3600",
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "720000 J\n");
    assert!(r.stderr.contains("upper bound"), "stderr: {}", r.stderr);
}

#[test]
fn carbon_constant_and_timeseries_agree() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_file(dir.path(), "t.csv", CONSTANT_TRACE);
    let est = dir.path().join("est.json");
    run(bin().args([
        "integrate", "--trace", &trace, "--from", "0", "--to", "120", "--out",
        est.to_str().unwrap(),
    ]));

    let r = run(bin().args([
        "carbon", "--estimate", est.to_str().unwrap(), "--intensity", "300", "--basis",
        "yearly_average",
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "1 gCO2\n");

    let ci = write_file(
        dir.path(),
        "ci.csv",
        "timestamp,intensity_gco2_per_kwh,region,basis\n0,300,DE,yearly_average\n",
    );
    let r = run(bin().args([
        "carbon", "--trace", &trace, "--intensity-csv", &ci, "--align", "downsample-power",
    ]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(r.stdout, "1 gCO2\n");
}

#[test]
fn compare_is_reproducible_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let est = |j: f64| {
        format!(
            r#"{{"joules":{j},"unit":"J","interval":[0.0,100.0],"method":"zero_order",
                "scope":{{"level":"node","sources":["cpu1"]}},"basis":"absolute"}}"#
        )
    };
    let set = |values: &[f64]| format!("[{}]", values.iter().map(|&v| est(v)).collect::<Vec<_>>().join(","));
    let a = write_file(dir.path(), "a.json", &set(&[100.2, 99.1, 101.3, 100.4, 98.5]));
    let b = write_file(dir.path(), "b.json", &set(&[103.0, 104.2, 102.8, 103.3, 104.0]));

    let args =
        ["compare", "--a", &a, "--b", &b, "--test", "permutation", "--rounds", "5000", "--seed", "7"];
    let first = run(bin().args(args));
    assert_eq!(first.code, 0, "stderr: {}", first.stderr);
    assert!(first.stdout.contains("p-value"));
    let second = run(bin().args(args));
    assert_eq!(first.stdout, second.stdout, "seeded runs must be bit-identical");

    let welch = run(bin().args(["compare", "--a", &a, "--b", &b]));
    assert_eq!(welch.code, 0);
    assert!(welch.stdout.contains("(welch_t)"), "stdout: {}", welch.stdout);
}

#[test]
fn cumulative_counter_traces_decode_automatically() {
    let dir = tempfile::tempdir().unwrap();
    // A 4000 J counter written once per second at 150 W, starting near the
    // wrap point so it wraps immediately.
    let mut body = String::from(
        "# counter_max_uj=4000000000\ntimestamp,value,unit,source_id,level,sample_kind\n",
    );
    let mut counter = 3900.0;
    body.push_str("0,3900,J,rail0,component,cumulative_energy\n");
    for t in 1..=10 {
        counter = (counter + 150.0) % 4000.0;
        body.push_str(&format!("{t},{counter},J,rail0,component,cumulative_energy\n"));
    }
    let trace = write_file(dir.path(), "counter.csv", &body);

    let r = run(bin().args(["integrate", "--trace", &trace]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    // Decoded powers land at interval ends (t = 1..10); the default window
    // is the decoded span, 9 s at a constant 150 W.
    assert_eq!(r.stdout, "1350 J\n");
    assert!(r.stderr.contains("decoded cumulative"), "stderr: {}", r.stderr);
}

#[test]
fn validate_reports_diagnostics_and_flags_constant_traces() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_file(dir.path(), "flat.csv", CONSTANT_TRACE);
    let r = run(bin().args(["validate", "--trace", &trace]));
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let parsed: serde_json::Value = serde_json::from_str(r.stdout.trim()).unwrap();
    assert_eq!(parsed["source_id"], "cpu1");
    assert_eq!(parsed["samples"], 3);
    assert_eq!(parsed["uniform_interval"], 60.0);
    assert_eq!(parsed["zero_variance"], true);
    assert!(r.stderr.contains("zero variance"), "stderr: {}", r.stderr);

    let gappy = write_file(
        dir.path(),
        "gappy.csv",
        "timestamp,value,unit,source_id,level,sample_kind\n\
         0,100,W,cpu1,node,instantaneous_power\n\
         60,110,W,cpu1,node,instantaneous_power\n\
         600,120,W,cpu1,node,instantaneous_power\n",
    );
    let r = run(bin().args(["validate", "--trace", &gappy]));
    assert_eq!(r.code, 0);
    assert!(r.stderr.contains("gap"), "stderr: {}", r.stderr);
}
