//! Trace ingestion: parse power and utilization time series, decode
//! cumulative energy counters, resample, and run sampling diagnostics.
//!
//! All parsers normalize values to canonical units (watts, or joules for
//! cumulative counters) on ingest. Traces are validated at construction
//! and immutable afterwards, so downstream code never re-checks ordering
//! or finiteness.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Dimension, UnitScale};

/// Where in the power-delivery hierarchy a trace was measured.
///
/// Components are the physically discrete units (CPU package, GPU board);
/// each level above aggregates the ones below it up to the facility meter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyLevel {
    Facility,
    System,
    Platform,
    Rack,
    Node,
    Component,
}

impl HierarchyLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            HierarchyLevel::Facility => "facility",
            HierarchyLevel::System => "system",
            HierarchyLevel::Platform => "platform",
            HierarchyLevel::Rack => "rack",
            HierarchyLevel::Node => "node",
            HierarchyLevel::Component => "component",
        }
    }
}

impl std::str::FromStr for HierarchyLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "facility" => Ok(HierarchyLevel::Facility),
            "system" => Ok(HierarchyLevel::System),
            "platform" => Ok(HierarchyLevel::Platform),
            "rack" => Ok(HierarchyLevel::Rack),
            "node" => Ok(HierarchyLevel::Node),
            "component" => Ok(HierarchyLevel::Component),
            other => Err(Error::InvalidInput(format!(
                "unknown hierarchy level {other:?}; expected one of \
                 facility, system, platform, rack, node, component"
            ))),
        }
    }
}

impl std::fmt::Display for HierarchyLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a trace's values mean.
///
/// Spot watt readings, per-interval average watts, or a raw cumulative
/// energy register that must be decoded before integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    InstantaneousPower,
    IntervalAveragePower,
    CumulativeEnergy,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::InstantaneousPower => "instantaneous_power",
            SampleKind::IntervalAveragePower => "interval_average_power",
            SampleKind::CumulativeEnergy => "cumulative_energy",
        }
    }

    /// True for the two kinds whose values are watts.
    pub fn is_power(self) -> bool {
        !matches!(self, SampleKind::CumulativeEnergy)
    }

    fn dimension(self) -> Dimension {
        if self.is_power() {
            Dimension::Power
        } else {
            Dimension::Energy
        }
    }
}

impl std::str::FromStr for SampleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instantaneous_power" => Ok(SampleKind::InstantaneousPower),
            "interval_average_power" => Ok(SampleKind::IntervalAveragePower),
            "cumulative_energy" => Ok(SampleKind::CumulativeEnergy),
            other => Err(Error::InvalidInput(format!(
                "unknown sample kind {other:?}; expected one of \
                 instantaneous_power, interval_average_power, cumulative_energy"
            ))),
        }
    }
}

impl std::fmt::Display for SampleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestamped reading, already normalized to canonical units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Seconds since the Unix epoch (fractional part allowed).
    pub timestamp: f64,
    /// Watts for power kinds, joules for cumulative counters.
    pub value: f64,
}

/// Default cumulative-counter modulus: a 32-bit µJ register (2³² − 1 µJ).
/// Override per trace via the `counter_max_uj` metadata key when the
/// sampling tool documents a different register width.
pub const DEFAULT_COUNTER_MAX_UJ: f64 = 4_294_967_295.0;

/// Metadata key holding a trace-specific counter modulus in µJ.
pub const COUNTER_MAX_METADATA_KEY: &str = "counter_max_uj";

/// A validated power (or cumulative-energy) time series from one source.
///
/// Invariants enforced at construction: at least one sample, strictly
/// increasing timestamps, finite values, and non-negative values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPowerTrace")]
pub struct PowerTrace {
    source_id: String,
    level: HierarchyLevel,
    sample_kind: SampleKind,
    samples: Vec<Sample>,
    metadata: BTreeMap<String, String>,
}

/// Shadow struct so deserialized traces pass through the same validation
/// as hand-built ones.
#[derive(Deserialize)]
struct RawPowerTrace {
    source_id: String,
    level: HierarchyLevel,
    sample_kind: SampleKind,
    samples: Vec<Sample>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl TryFrom<RawPowerTrace> for PowerTrace {
    type Error = Error;
    fn try_from(raw: RawPowerTrace) -> Result<Self> {
        PowerTrace::new(raw.source_id, raw.level, raw.sample_kind, raw.samples, raw.metadata)
    }
}

impl PowerTrace {
    pub fn new(
        source_id: impl Into<String>,
        level: HierarchyLevel,
        sample_kind: SampleKind,
        samples: Vec<Sample>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp == pair[0].timestamp {
                return Err(Error::DuplicateTimestamp { timestamp: pair[0].timestamp });
            }
            if pair[1].timestamp < pair[0].timestamp {
                return Err(Error::InvalidTrace(format!(
                    "timestamps must be strictly increasing; {} follows {}",
                    pair[1].timestamp, pair[0].timestamp
                )));
            }
        }
        for s in &samples {
            if !s.timestamp.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "non-finite timestamp {}",
                    s.timestamp
                )));
            }
            if !s.value.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "non-finite value at t={}",
                    s.timestamp
                )));
            }
            if s.value < 0.0 {
                return Err(Error::InvalidTrace(format!(
                    "negative value {} at t={}",
                    s.value, s.timestamp
                )));
            }
        }
        Ok(PowerTrace {
            source_id: source_id.into(),
            level,
            sample_kind,
            samples,
            metadata,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn level(&self) -> HierarchyLevel {
        self.level
    }

    pub fn sample_kind(&self) -> SampleKind {
        self.sample_kind
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// First and last timestamps.
    pub fn span(&self) -> (f64, f64) {
        (
            self.samples[0].timestamp,
            self.samples[self.samples.len() - 1].timestamp,
        )
    }

    /// Counter modulus declared in metadata, or the 32-bit µJ default.
    pub fn counter_max_uj(&self) -> Result<f64> {
        match self.metadata.get(COUNTER_MAX_METADATA_KEY) {
            None => Ok(DEFAULT_COUNTER_MAX_UJ),
            Some(raw) => {
                let v: f64 = raw.parse().map_err(|_| {
                    Error::InvalidTrace(format!(
                        "metadata {COUNTER_MAX_METADATA_KEY}={raw:?} is not a number"
                    ))
                })?;
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidTrace(format!(
                        "metadata {COUNTER_MAX_METADATA_KEY}={raw:?} must be > 0"
                    )));
                }
                Ok(v)
            }
        }
    }
}

/// A validated CPU-utilization time series.
///
/// Utilization is a fraction of one physical core's capacity, so values
/// may exceed 1 up to `logical_per_core` on SMT machines. Normalize with
/// [`crate::proxy::normalize_hyperthread_utilization`] before feeding a
/// loadline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUtilizationTrace")]
pub struct UtilizationTrace {
    source_id: String,
    samples: Vec<UtilizationSample>,
    physical_cores: u32,
    logical_per_core: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSample {
    pub timestamp: f64,
    /// Fraction in [0, logical_per_core].
    pub utilization: f64,
}

#[derive(Deserialize)]
struct RawUtilizationTrace {
    source_id: String,
    samples: Vec<UtilizationSample>,
    physical_cores: u32,
    logical_per_core: u32,
}

impl TryFrom<RawUtilizationTrace> for UtilizationTrace {
    type Error = Error;
    fn try_from(raw: RawUtilizationTrace) -> Result<Self> {
        UtilizationTrace::new(raw.source_id, raw.samples, raw.physical_cores, raw.logical_per_core)
    }
}

impl UtilizationTrace {
    pub fn new(
        source_id: impl Into<String>,
        samples: Vec<UtilizationSample>,
        physical_cores: u32,
        logical_per_core: u32,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        if physical_cores == 0 || logical_per_core == 0 {
            return Err(Error::InvalidTrace(
                "physical_cores and logical_per_core must be >= 1".into(),
            ));
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::InvalidTrace(format!(
                    "timestamps must be strictly increasing; {} follows {}",
                    pair[1].timestamp, pair[0].timestamp
                )));
            }
        }
        let overcommit = logical_per_core as f64;
        for s in &samples {
            if !s.timestamp.is_finite() || !s.utilization.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "non-finite utilization sample at t={}",
                    s.timestamp
                )));
            }
            if s.utilization < 0.0 || s.utilization > overcommit {
                return Err(Error::InvalidTrace(format!(
                    "utilization {} at t={} outside [0, {overcommit}]",
                    s.utilization, s.timestamp
                )));
            }
        }
        Ok(UtilizationTrace {
            source_id: source_id.into(),
            samples,
            physical_cores,
            logical_per_core,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn samples(&self) -> &[UtilizationSample] {
        &self.samples
    }

    pub fn physical_cores(&self) -> u32 {
        self.physical_cores
    }

    pub fn logical_per_core(&self) -> u32 {
        self.logical_per_core
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.samples[0].timestamp,
            self.samples[self.samples.len() - 1].timestamp,
        )
    }
}

/// Sampling-quality facts about a trace. Diagnostics never fail; they
/// describe what is there so callers can decide whether to trust it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    /// Set iff all adjacent gaps are equal within 1% relative; holds the
    /// median gap in seconds.
    pub uniform_interval: Option<f64>,
    /// Adjacent intervals longer than 3× the median gap, as (start, end).
    pub gaps: Vec<(f64, f64)>,
    /// True iff every sample has the same value. Constant readings carry
    /// no workload signal and should be excluded from variability analysis.
    pub zero_variance: bool,
    /// Smallest adjacent gap in seconds; `None` for single-sample traces.
    pub min_interval: Option<f64>,
}

/// Column mapping and trace identity for parsing arbitrary power CSVs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub value_column: String,
    pub source_id: String,
    pub level: HierarchyLevel,
    pub sample_kind: SampleKind,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_column: "timestamp".into(),
            value_column: "value".into(),
            source_id: "unknown".into(),
            level: HierarchyLevel::Node,
            sample_kind: SampleKind::InstantaneousPower,
        }
    }
}

/// Parse a timestamp cell: epoch seconds (fractional ok), RFC 3339, or
/// the `YYYY/MM/DD HH:MM:SS.fff` form device monitors emit (taken as UTC).
pub fn parse_timestamp(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
        return Err(Error::InvalidInput(format!("non-finite timestamp {s:?}")));
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(s, "%Y/%m/%d %H:%M:%S%.f") {
        let dt = naive.and_utc();
        return Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    Err(Error::InvalidInput(format!(
        "unparseable timestamp {s:?}; expected epoch seconds or RFC 3339"
    )))
}

fn parse_value_cell(raw: &str, line: u64) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("value {raw:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("value {raw:?} is not finite"),
        });
    }
    Ok(v)
}

/// Sort rows by timestamp, rejecting duplicates. Inputs from real
/// monitors are often interleaved from several writers, so ordering is
/// repaired here rather than treated as an error.
fn sort_and_check(mut rows: Vec<Sample>) -> Result<Vec<Sample>> {
    rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    for pair in rows.windows(2) {
        if pair[0].timestamp == pair[1].timestamp {
            return Err(Error::DuplicateTimestamp { timestamp: pair[0].timestamp });
        }
    }
    Ok(rows)
}

/// Parse a power CSV using an explicit column mapping.
///
/// Every value is converted from `unit` to the canonical unit of the
/// trace's sample kind (watts, or joules for cumulative counters). Rows
/// are sorted by timestamp; duplicate timestamps are an error, not
/// last-wins, because silent overwrites hide tool faults.
pub fn parse_power_csv<R: Read>(reader: R, schema: &CsvSchema, unit: UnitScale) -> Result<PowerTrace> {
    let expected = schema.sample_kind.dimension();
    if unit.dimension() != expected {
        return Err(Error::InvalidInput(format!(
            "unit {unit} does not match sample kind {}",
            schema.sample_kind
        )));
    }
    let factor = unit.to_canonical_factor();

    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            wanted: name.to_string(),
            found: headers.iter().map(str::to_string).collect(),
        })
    };
    let ts_idx = col(&schema.timestamp_column)?;
    let val_idx = col(&schema.value_column)?;

    let mut rows = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let ts_raw = record.get(ts_idx).unwrap_or("");
        let timestamp = parse_timestamp(ts_raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let value = parse_value_cell(record.get(val_idx).unwrap_or(""), line)? * factor;
        rows.push(Sample { timestamp, value });
    }
    PowerTrace::new(
        schema.source_id.clone(),
        schema.level,
        schema.sample_kind,
        sort_and_check(rows)?,
        BTreeMap::new(),
    )
}

const CANONICAL_COLUMNS: [&str; 6] =
    ["timestamp", "value", "unit", "source_id", "level", "sample_kind"];

/// Read a trace in the canonical format: optional `# key=value` metadata
/// lines, then header `timestamp,value,unit,source_id,level,sample_kind`.
/// Each row carries its own unit symbol and is normalized on ingest;
/// identity columns must agree across rows.
pub fn read_trace_csv<R: Read>(reader: R) -> Result<PowerTrace> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;

    // Peel metadata comments off the top before handing the rest to csv.
    let mut metadata = BTreeMap::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            body_start += line.len();
        } else if trimmed.is_empty() {
            body_start += line.len();
        } else {
            break;
        }
    }
    let comment_lines = text[..body_start].lines().count() as u64;

    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    let headers = csv_reader.headers()?.clone();
    let mut idx = [0usize; 6];
    for (i, name) in CANONICAL_COLUMNS.iter().enumerate() {
        idx[i] = headers.iter().position(|h| h == *name).ok_or_else(|| Error::MissingColumn {
            wanted: name.to_string(),
            found: headers.iter().map(str::to_string).collect(),
        })?;
    }

    let mut identity: Option<(String, HierarchyLevel, SampleKind)> = None;
    let mut rows = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line()) + comment_lines;
        let get = |i: usize| record.get(idx[i]).unwrap_or("");

        let timestamp = parse_timestamp(get(0)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let unit = UnitScale::parse_symbol(get(2)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let source_id = get(3).to_string();
        let level: HierarchyLevel = get(4).parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let kind: SampleKind = get(5).parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if unit.dimension() != kind.dimension() {
            return Err(Error::Parse {
                line,
                message: format!("unit {unit} does not match sample kind {kind}"),
            });
        }
        let value = parse_value_cell(get(1), line)? * unit.to_canonical_factor();

        match &identity {
            None => identity = Some((source_id, level, kind)),
            Some((sid, lv, kd)) => {
                if *sid != source_id || *lv != level || *kd != kind {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "trace identity changed mid-file: expected \
                             {sid}/{lv}/{kd}, got {source_id}/{level}/{kind}"
                        ),
                    });
                }
            }
        }
        rows.push(Sample { timestamp, value });
    }

    let (source_id, level, kind) = identity.ok_or(Error::NoSamples)?;
    PowerTrace::new(source_id, level, kind, sort_and_check(rows)?, metadata)
}

/// Write a trace in the canonical format. Values are emitted in canonical
/// units (`W`, or `J` for cumulative counters) with shortest-round-trip
/// float formatting, so read → write → read reproduces the trace exactly.
pub fn write_trace_csv<W: Write>(trace: &PowerTrace, mut writer: W) -> Result<()> {
    for (k, v) in trace.metadata() {
        writeln!(writer, "# {k}={v}")?;
    }
    let unit = if trace.sample_kind().is_power() { "W" } else { "J" };
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(CANONICAL_COLUMNS)?;
    for s in trace.samples() {
        csv_writer.write_record([
            s.timestamp.to_string().as_str(),
            s.value.to_string().as_str(),
            unit,
            trace.source_id(),
            trace.level().as_str(),
            trace.sample_kind().as_str(),
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Table layouts emitted by device monitors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorDialect {
    /// GPU management-interface CSV: a `power.draw [W]` column with cells
    /// like `250.00 W` or `[N/A]`, timestamps like `2023/01/01 12:00:00.000`.
    GpuSmiCsv,
    /// Any table with a timestamp-ish column and a power-ish column.
    Generic,
}

/// Parse a device-monitor table into a component-level instantaneous
/// power trace. Rows with missing (`[N/A]`, `N/A`, empty) power cells are
/// skipped with a warning rather than erroring: real monitors drop
/// readings under load, and one bad cell should not void a run.
pub fn parse_device_monitor_table<R: Read>(
    reader: R,
    dialect: MonitorDialect,
) -> Result<(PowerTrace, Vec<String>)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let header_list: Vec<String> = headers.iter().map(str::to_string).collect();

    let power_idx = match dialect {
        MonitorDialect::GpuSmiCsv => headers.iter().position(|h| h.starts_with("power.draw")),
        MonitorDialect::Generic => headers
            .iter()
            .position(|h| h.to_ascii_lowercase().contains("power") || h.eq_ignore_ascii_case("watts")),
    }
    .ok_or_else(|| Error::MissingColumn {
        wanted: match dialect {
            MonitorDialect::GpuSmiCsv => "power.draw [W]".to_string(),
            MonitorDialect::Generic => "power".to_string(),
        },
        found: header_list.clone(),
    })?;
    let ts_idx = headers
        .iter()
        .position(|h| h.to_ascii_lowercase().contains("time"))
        .ok_or_else(|| Error::MissingColumn {
            wanted: "timestamp".to_string(),
            found: header_list.clone(),
        })?;
    // A stable per-device identifier if the monitor provides one.
    let id_idx = headers.iter().position(|h| {
        matches!(h.to_ascii_lowercase().as_str(), "uuid" | "name" | "index" | "serial" | "gpu")
    });

    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut source_id: Option<String> = None;
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let power_raw = record.get(power_idx).unwrap_or("").trim();
        if power_raw.is_empty() || power_raw.eq_ignore_ascii_case("[n/a]") || power_raw.eq_ignore_ascii_case("n/a") {
            warnings.push(format!("line {line}: power cell {power_raw:?} missing, row skipped"));
            continue;
        }
        let numeric = power_raw.trim_end_matches(|c: char| c.is_alphabetic()).trim();
        let value = parse_value_cell(numeric, line)?;
        let timestamp = parse_timestamp(record.get(ts_idx).unwrap_or("")).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if source_id.is_none() {
            source_id = id_idx
                .and_then(|i| record.get(i))
                .map(str::to_string)
                .filter(|s| !s.is_empty());
        }
        rows.push(Sample { timestamp, value });
    }
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let trace = PowerTrace::new(
        source_id.unwrap_or_else(|| "device".to_string()),
        HierarchyLevel::Component,
        SampleKind::InstantaneousPower,
        sort_and_check(rows)?,
        BTreeMap::new(),
    )?;
    Ok((trace, warnings))
}

/// Decode a cumulative energy register into interval-average power.
///
/// Each adjacent pair contributes `(v₂ − v₁) mod counter_max` joules of
/// energy (so a register wrap decodes to the true small delta, not a huge
/// negative one), stamped as average watts at the interval end.
///
/// `counter_max_uj` is in µJ, the native unit of common energy registers;
/// trace values are canonical joules.
pub fn decode_cumulative_counter(trace: &PowerTrace, counter_max_uj: f64) -> Result<PowerTrace> {
    if trace.sample_kind() != SampleKind::CumulativeEnergy {
        return Err(Error::InvalidInput(format!(
            "decode_cumulative_counter needs a cumulative_energy trace, got {}",
            trace.sample_kind()
        )));
    }
    if !counter_max_uj.is_finite() || counter_max_uj <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "counter_max must be > 0 µJ, got {counter_max_uj}"
        )));
    }
    if trace.samples().len() < 2 {
        return Err(Error::InvalidInput(
            "cumulative decoding needs at least 2 samples".into(),
        ));
    }
    let counter_max_j = crate::units::convert(
        counter_max_uj,
        UnitScale::MICROJOULES,
        UnitScale::JOULES,
    )?;
    for s in trace.samples() {
        if s.value > counter_max_j {
            return Err(Error::InvalidTrace(format!(
                "counter value {} J at t={} exceeds counter_max {} J; \
                 corrupted input or wrong counter_max",
                s.value, s.timestamp, counter_max_j
            )));
        }
    }

    let mut out = Vec::with_capacity(trace.samples().len() - 1);
    for pair in trace.samples().windows(2) {
        let dt = pair[1].timestamp - pair[0].timestamp;
        if dt <= 0.0 {
            return Err(Error::InvalidTrace(format!(
                "zero-length interval at t={}",
                pair[0].timestamp
            )));
        }
        let delta_j = (pair[1].value - pair[0].value).rem_euclid(counter_max_j);
        out.push(Sample {
            timestamp: pair[1].timestamp,
            value: delta_j / dt,
        });
    }
    let mut metadata = trace.metadata().clone();
    metadata.insert("decoded_from".to_string(), SampleKind::CumulativeEnergy.as_str().to_string());
    PowerTrace::new(
        trace.source_id().to_string(),
        trace.level(),
        SampleKind::IntervalAveragePower,
        out,
        metadata,
    )
}

/// Nearest-rank lower median of a sorted slice.
fn lower_median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

/// Inspect a trace's sampling regularity and value variance.
///
/// Checks that timestamps align in expected ways: whether the sampling
/// grid is uniform, where holes are, and whether the readings are
/// constant (zero variance means no workload signal at all).
pub fn diagnose(trace: &PowerTrace) -> TraceDiagnostics {
    let samples = trace.samples();
    let zero_variance = samples.iter().all(|s| s.value == samples[0].value);

    if samples.len() < 2 {
        return TraceDiagnostics {
            uniform_interval: None,
            gaps: Vec::new(),
            zero_variance,
            min_interval: None,
        };
    }

    let mut intervals: Vec<f64> =
        samples.windows(2).map(|p| p[1].timestamp - p[0].timestamp).collect();
    let min_interval = intervals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_interval = intervals.iter().cloned().fold(0.0, f64::max);
    intervals.sort_by(f64::total_cmp);
    let median = lower_median(&intervals);

    let uniform_interval =
        if max_interval - min_interval <= 0.01 * median { Some(median) } else { None };

    let gaps = samples
        .windows(2)
        .filter(|p| p[1].timestamp - p[0].timestamp > 3.0 * median)
        .map(|p| (p[0].timestamp, p[1].timestamp))
        .collect();

    TraceDiagnostics {
        uniform_interval,
        gaps,
        zero_variance,
        min_interval: Some(min_interval),
    }
}

/// Resampling interpolation rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    /// Hold the most recent sample's value.
    ZeroOrderHold,
    /// Interpolate linearly between neighbors.
    Linear,
}

/// Re-grid a power trace onto an arithmetic grid starting at its first
/// sample. Never extrapolates: the grid stops at the last sample.
/// Instantaneous samples can already miss transient spikes and dips;
/// inventing data outside coverage would compound that.
pub fn resample(trace: &PowerTrace, interval: f64, method: ResampleMethod) -> Result<PowerTrace> {
    if !interval.is_finite() || interval <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "resample interval must be > 0 s, got {interval}"
        )));
    }
    if !trace.sample_kind().is_power() {
        return Err(Error::InvalidInput(
            "resample expects a power trace; decode cumulative counters first".into(),
        ));
    }
    let samples = trace.samples();
    if samples.len() < 2 {
        return Err(Error::InvalidInput("resample needs at least 2 samples".into()));
    }
    let (t0, t_end) = trace.span();
    if interval > t_end - t0 {
        return Err(Error::NotCovered {
            start: t0,
            end: t0 + interval,
            data_start: t0,
            data_end: t_end,
        });
    }

    // Relative tolerance so an endpoint that lands on the last sample up
    // to rounding is kept rather than dropped.
    let steps = ((t_end - t0) / interval * (1.0 + 1e-12)).floor() as u64;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = (t0 + k as f64 * interval).min(t_end);
        let value = match method {
            ResampleMethod::ZeroOrderHold => {
                let pos = samples.partition_point(|s| s.timestamp <= t);
                samples[pos - 1].value
            }
            ResampleMethod::Linear => {
                let pos = samples.partition_point(|s| s.timestamp <= t);
                if pos == samples.len() {
                    samples[pos - 1].value
                } else {
                    let a = samples[pos - 1];
                    let b = samples[pos];
                    a.value + (b.value - a.value) * (t - a.timestamp) / (b.timestamp - a.timestamp)
                }
            }
        };
        out.push(Sample { timestamp: t, value });
    }
    PowerTrace::new(
        trace.source_id().to_string(),
        trace.level(),
        trace.sample_kind(),
        out,
        trace.metadata().clone(),
    )
}
