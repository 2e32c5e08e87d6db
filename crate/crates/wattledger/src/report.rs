//! Transparency reports for energy measurements.
//!
//! An energy number without its surrounding context — what hardware, what
//! software, how it was measured, what could be wrong with it — is not
//! reproducible and barely interpretable. [`MeasurementReport`] collects
//! that context; [`validate`] lints it against a small set of documented
//! disclosure rules; [`render`] emits it as canonical JSON or as markdown
//! suitable for a model card or README. Rendering refuses reports that
//! break a hard rule, so an exported report is always a complete one.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::carbon::{Alignment, EmissionsEstimate, IntensityBasis};
use crate::error::{Error, Result};
use crate::estimation::EnergyEstimate;

/// One measured component: CPU, GPU, accelerator, memory, storage, …
/// Optional fields stay optional on purpose — an absent clock speed is
/// reported as absent, never silently defaulted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HardwareComponent {
    /// Component category, e.g. "cpu", "gpu", "memory".
    #[serde(default)]
    pub kind: String,
    #[serde(default)]
    pub make: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub clock_ghz: Option<f64>,
    #[serde(default)]
    pub cores: Option<u32>,
    #[serde(default)]
    pub memory_gb: Option<f64>,
}

/// The hardware under measurement and how it is configured (server setup,
/// cooling, overclocking, …).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HardwareSection {
    #[serde(default)]
    pub components: Vec<HardwareComponent>,
    #[serde(default)]
    pub configuration: String,
}

/// The software environment the measurement ran in.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoftwareSection {
    /// Operating system, drivers, runtime.
    #[serde(default)]
    pub environment: String,
    /// Library/tool versions, keyed by name.
    #[serde(default)]
    pub versions: BTreeMap<String, String>,
    /// Code-level optimizations applied (algorithmic, memory management…).
    #[serde(default)]
    pub optimizations: String,
    /// Threading / distribution strategy, if any.
    #[serde(default)]
    pub parallelism: String,
}

/// How the numbers were obtained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodologySection {
    /// Measurement tools and devices used.
    #[serde(default)]
    pub tools: Vec<String>,
    /// Conditions under which measurements ran: idle vs. load, device
    /// isolation, ambient constraints.
    #[serde(default)]
    pub setup_conditions: String,
    /// Calibration steps taken or accuracy caveats of the instruments.
    #[serde(default)]
    pub calibration_notes: String,
}

/// Runtime over hardware — the clearest, most interpretable signal a
/// report can carry: how long the workload ran, and on what.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeOverHardware {
    /// Seconds.
    pub duration: f64,
    /// Free-text description of the resources used, e.g. "4× V100, 1 node".
    pub resource_description: String,
}

/// Emissions as disclosed in a report. Unlike a freshly computed
/// [`EmissionsEstimate`], a hand-written report may omit how the intensity
/// was derived or how series were aligned — [`validate`] flags exactly
/// that, so these fields are optional here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportedEmissions {
    pub grams_co2: f64,
    #[serde(default)]
    pub intensity_basis: Option<IntensityBasis>,
    #[serde(default)]
    pub alignment: Option<Alignment>,
    #[serde(default)]
    pub region: Option<String>,
}

impl From<&EmissionsEstimate> for ReportedEmissions {
    fn from(e: &EmissionsEstimate) -> Self {
        ReportedEmissions {
            grams_co2: e.grams_co2,
            intensity_basis: Some(e.intensity_basis),
            alignment: Some(e.alignment),
            region: None,
        }
    }
}

/// Everything a reader needs to interpret and reproduce an energy
/// measurement. Deserializes leniently — missing sections become empty
/// ones — because surfacing the gaps is [`validate`]'s job, not the
/// parser's.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    #[serde(default)]
    pub hardware: HardwareSection,
    #[serde(default)]
    pub software: SoftwareSection,
    #[serde(default)]
    pub methodology: MethodologySection,
    #[serde(default)]
    pub runtime_over_hardware: Option<RuntimeOverHardware>,
    #[serde(default)]
    pub results: Vec<EnergyEstimate>,
    #[serde(default)]
    pub emissions: Option<ReportedEmissions>,
    /// Acknowledged sources of error and limitations.
    #[serde(default)]
    pub error_sources: Vec<String>,
    /// The units the report's numbers are stated in, e.g. "J".
    #[serde(default)]
    pub units_declared: String,
}

/// How serious a validation finding is. Errors block [`render`]; warnings
/// are embedded in the output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// One violation of the disclosure rules, citing the rule by identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationFinding {
    pub severity: Severity,
    /// One of the `R-*` / `W-*` rule identifiers documented on the rule
    /// constants in this module.
    pub rule: String,
    pub message: String,
}

impl std::fmt::Display for ValidationFinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {}: {}", self.rule, self.message)
    }
}

/// A report must contain at least one energy result.
pub const R_RESULTS: &str = "R-RESULTS";
/// Never report energy (or emissions) without reporting runtime over the
/// hardware used.
pub const R_RUNTIME: &str = "R-RUNTIME";
/// Never report emissions without the power/energy estimates they were
/// derived from.
pub const R_EMISSIONS_POWER: &str = "R-EMISSIONS-POWER";
/// Emissions must record the basis on which the carbon intensity was
/// derived (yearly average vs. real-time).
pub const R_EMISSIONS_BASIS: &str = "R-EMISSIONS-BASIS";
/// Emissions must record how power and intensity series were aligned.
pub const R_EMISSIONS_ALIGNMENT: &str = "R-EMISSIONS-ALIGNMENT";
/// Reports should acknowledge potential sources of error.
pub const W_ERROR_SOURCES: &str = "W-ERROR-SOURCES";
/// Reports should name the measurement tools used.
pub const W_TOOLS: &str = "W-TOOLS";
/// Reports should state their units of measurement explicitly.
pub const W_UNITS: &str = "W-UNITS";

fn finding(severity: Severity, rule: &str, message: impl Into<String>) -> ValidationFinding {
    ValidationFinding { severity, rule: rule.to_string(), message: message.into() }
}

/// Lint a report against the disclosure rules. Pure: always returns the
/// full list of findings (possibly empty), never fails.
pub fn validate(report: &MeasurementReport) -> Vec<ValidationFinding> {
    let mut findings = Vec::new();

    if report.results.is_empty() {
        findings.push(finding(
            Severity::Error,
            R_RESULTS,
            "report contains no energy results; there is nothing to disclose",
        ));
    }

    let discloses_energy = !report.results.is_empty() || report.emissions.is_some();
    if discloses_energy && report.runtime_over_hardware.is_none() {
        findings.push(finding(
            Severity::Error,
            R_RUNTIME,
            "energy or emissions are reported without runtime over hardware; \
             state how long the workload ran and on what resources",
        ));
    }

    if let Some(em) = &report.emissions {
        if report.results.is_empty() {
            findings.push(finding(
                Severity::Error,
                R_EMISSIONS_POWER,
                "emissions are reported without the energy estimates they \
                 were derived from",
            ));
        }
        if em.intensity_basis.is_none() {
            findings.push(finding(
                Severity::Error,
                R_EMISSIONS_BASIS,
                "emissions do not record how the carbon intensity was \
                 derived (yearly average vs. real-time)",
            ));
        }
        if em.alignment.is_none() {
            findings.push(finding(
                Severity::Error,
                R_EMISSIONS_ALIGNMENT,
                "emissions do not record how power and intensity series \
                 were aligned in time",
            ));
        }
    }

    if report.error_sources.is_empty() {
        findings.push(finding(
            Severity::Warning,
            W_ERROR_SOURCES,
            "no sources of error are acknowledged; every measurement has some",
        ));
    }
    if report.methodology.tools.is_empty() {
        findings.push(finding(
            Severity::Warning,
            W_TOOLS,
            "no measurement tools are named in the methodology section",
        ));
    }
    if report.units_declared.trim().is_empty() {
        findings.push(finding(
            Severity::Warning,
            W_UNITS,
            "units of measurement are not declared",
        ));
    }

    findings
}

/// Output format for [`render`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for RenderFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(RenderFormat::Json),
            "markdown" | "md" => Ok(RenderFormat::Markdown),
            other => Err(Error::InvalidInput(format!(
                "unknown report format '{other}'; expected json or markdown"
            ))),
        }
    }
}

/// The JSON render wraps the report with its computed warnings; the field
/// order is fixed, so rendering the same report twice is byte-identical.
#[derive(Serialize)]
struct RenderedJson<'a> {
    #[serde(flatten)]
    report: &'a MeasurementReport,
    warnings: Vec<String>,
}

/// Render a report, refusing if any hard rule is violated.
///
/// JSON output is canonical — rendering, re-parsing, and rendering again
/// produces identical bytes. Markdown output mirrors the five reporting
/// sections (hardware, software, methodology, additional considerations,
/// sources of error) and prints every number with its unit; validation
/// warnings are embedded rather than dropped.
pub fn render(report: &MeasurementReport, format: RenderFormat) -> Result<Vec<u8>> {
    let findings = validate(report);
    let errors: Vec<String> = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .map(ToString::to_string)
        .collect();
    if !errors.is_empty() {
        return Err(Error::ReportInvalid { findings: errors });
    }
    let warnings: Vec<String> = findings.iter().map(ToString::to_string).collect();

    match format {
        RenderFormat::Json => {
            let mut bytes =
                serde_json::to_vec_pretty(&RenderedJson { report, warnings })?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        RenderFormat::Markdown => Ok(render_markdown(report, &warnings).into_bytes()),
    }
}

fn render_markdown(report: &MeasurementReport, warnings: &[String]) -> String {
    let mut out = String::new();
    // All writes go to a String; none of them can fail.
    let md = &mut out;

    writeln!(md, "# Energy Measurement Report\n").unwrap();

    writeln!(md, "## Hardware Characteristics\n").unwrap();
    if report.hardware.components.is_empty() {
        writeln!(md, "_No components described._\n").unwrap();
    } else {
        for c in &report.hardware.components {
            let mut line = format!("- {}: {} {}", c.kind, c.make, c.model);
            if let Some(clock) = c.clock_ghz {
                write!(line, ", {clock} GHz").unwrap();
            }
            if let Some(cores) = c.cores {
                write!(line, ", {cores} cores").unwrap();
            }
            if let Some(mem) = c.memory_gb {
                write!(line, ", {mem} GB memory").unwrap();
            }
            writeln!(md, "{line}").unwrap();
        }
        writeln!(md).unwrap();
    }
    if !report.hardware.configuration.is_empty() {
        writeln!(md, "Configuration: {}\n", report.hardware.configuration).unwrap();
    }

    writeln!(md, "## Software Characteristics\n").unwrap();
    if !report.software.environment.is_empty() {
        writeln!(md, "Environment: {}\n", report.software.environment).unwrap();
    }
    if !report.software.versions.is_empty() {
        writeln!(md, "Versions:\n").unwrap();
        for (name, version) in &report.software.versions {
            writeln!(md, "- {name} {version}").unwrap();
        }
        writeln!(md).unwrap();
    }
    if !report.software.optimizations.is_empty() {
        writeln!(md, "Optimizations: {}\n", report.software.optimizations).unwrap();
    }
    if !report.software.parallelism.is_empty() {
        writeln!(md, "Parallelism: {}\n", report.software.parallelism).unwrap();
    }

    writeln!(md, "## Measurement Methodology\n").unwrap();
    if !report.methodology.tools.is_empty() {
        writeln!(md, "Tools: {}\n", report.methodology.tools.join(", ")).unwrap();
    }
    if !report.methodology.setup_conditions.is_empty() {
        writeln!(md, "Setup conditions: {}\n", report.methodology.setup_conditions).unwrap();
    }
    if !report.methodology.calibration_notes.is_empty() {
        writeln!(md, "Calibration: {}\n", report.methodology.calibration_notes).unwrap();
    }

    writeln!(md, "## Additional Considerations\n").unwrap();
    if !report.units_declared.is_empty() {
        writeln!(md, "Units: {}\n", report.units_declared).unwrap();
    }
    if let Some(rt) = &report.runtime_over_hardware {
        writeln!(md, "Runtime over hardware: {} s on {}\n", rt.duration, rt.resource_description)
            .unwrap();
    }
    writeln!(md, "Results:\n").unwrap();
    for est in &report.results {
        let (start, end) = est.interval();
        let mut line = format!(
            "- {} J ({}, {}) over [{start}, {end}] s",
            est.joules(),
            est.method(),
            est.basis(),
        );
        if let Some(pue) = est.pue_applied() {
            write!(line, "; scaled by PUE {pue}").unwrap();
        }
        writeln!(md, "{line}").unwrap();
        for note in est.notes() {
            writeln!(md, "  - note: {note}").unwrap();
        }
    }
    writeln!(md).unwrap();
    if let Some(em) = &report.emissions {
        let mut line = format!("Emissions: {} gCO2", em.grams_co2);
        if let Some(basis) = em.intensity_basis {
            write!(line, ", intensity basis {basis}").unwrap();
        }
        if let Some(alignment) = em.alignment {
            write!(line, ", aligned by {alignment}").unwrap();
        }
        if let Some(region) = &em.region {
            write!(line, ", region {region}").unwrap();
        }
        writeln!(md, "{line}\n").unwrap();
    }

    writeln!(md, "## Sources of Error\n").unwrap();
    for src in &report.error_sources {
        writeln!(md, "- {src}").unwrap();
    }
    if !report.error_sources.is_empty() {
        writeln!(md).unwrap();
    }

    if !warnings.is_empty() {
        writeln!(md, "## Validation Warnings\n").unwrap();
        for w in warnings {
            writeln!(md, "- {w}").unwrap();
        }
    }

    out
}
