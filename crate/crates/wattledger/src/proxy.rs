//! Proxy estimation for systems without direct power telemetry:
//! utilization-to-power loadlines, TDP worst-case bounds, hyperthreading
//! normalization, loadline selection, and software-meter calibration.
//!
//! Proxies are explicitly second-class: every estimate they produce is
//! tagged with its method and carries notes about the assumptions made,
//! so a reader can tell a measurement from an inference.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{integrate, EnergyBasis, EnergyEstimate, EstimationMethod, IntegrationMethod, Scope};
use crate::telemetry::{HierarchyLevel, PowerTrace, Sample, SampleKind, UtilizationTrace};
use crate::units::Power;

/// One calibration point: power drawn at a fraction of max throughput.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadlinePoint {
    pub utilization: f64,
    pub watts: f64,
}

/// Provenance of a loadline: what machine it characterizes and which
/// benchmark produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadlineMeta {
    pub architecture: String,
    pub tdp_watts: Power,
    pub base_clock_ghz: f64,
    pub workload_name: String,
    /// Peak throughput M in ops/s, when the benchmark reported it. The
    /// calibration utilizations are fractions of this M, not OS-reported
    /// CPU percentages.
    #[serde(rename = "max_throughput_M", default)]
    pub max_throughput_m: Option<f64>,
}

/// A calibrated utilization-to-power curve.
///
/// Invariants: at least two points, strictly increasing utilizations from
/// exactly 0 (active idle) to exactly 1 (full load), non-decreasing watts.
/// The u=0 point is mandatory because extrapolating to idle is the
/// riskiest part of a proxy — a server can draw significant power while
/// doing nothing, and we refuse to guess how much.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoadline")]
pub struct Loadline {
    meta: LoadlineMeta,
    points: Vec<LoadlinePoint>,
}

#[derive(Deserialize)]
struct RawLoadline {
    meta: LoadlineMeta,
    points: Vec<LoadlinePoint>,
}

impl TryFrom<RawLoadline> for Loadline {
    type Error = Error;
    fn try_from(raw: RawLoadline) -> Result<Self> {
        Loadline::new(raw.meta, raw.points)
    }
}

impl Loadline {
    pub fn new(meta: LoadlineMeta, points: Vec<LoadlinePoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "loadline needs at least 2 calibration points, got {}",
                points.len()
            )));
        }
        if points[0].utilization != 0.0 {
            return Err(Error::InvalidInput(format!(
                "loadline must start at utilization 0 (active idle), starts at {}",
                points[0].utilization
            )));
        }
        if points[points.len() - 1].utilization != 1.0 {
            return Err(Error::InvalidInput(format!(
                "loadline must end at utilization 1 (full load), ends at {}",
                points[points.len() - 1].utilization
            )));
        }
        for pair in points.windows(2) {
            if pair[1].utilization <= pair[0].utilization {
                return Err(Error::InvalidInput(format!(
                    "loadline utilizations must be strictly increasing; \
                     {} follows {}",
                    pair[1].utilization, pair[0].utilization
                )));
            }
            if pair[1].watts < pair[0].watts {
                return Err(Error::InvalidInput(format!(
                    "loadline watts must be non-decreasing; {} W follows {} W",
                    pair[1].watts, pair[0].watts
                )));
            }
        }
        for p in &points {
            if !p.watts.is_finite() || p.watts < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "loadline watts must be finite and >= 0, got {}",
                    p.watts
                )));
            }
        }
        if meta.tdp_watts.watts() <= 0.0 {
            return Err(Error::InvalidInput("loadline meta tdp_watts must be > 0".into()));
        }
        Ok(Loadline { meta, points })
    }

    pub fn meta(&self) -> &LoadlineMeta {
        &self.meta
    }

    pub fn points(&self) -> &[LoadlinePoint] {
        &self.points
    }

    /// Power at zero and full utilization, the hard bounds of any output.
    pub fn watts_range(&self) -> (f64, f64) {
        (self.points[0].watts, self.points[self.points.len() - 1].watts)
    }
}

/// Read a loadline from its JSON file form: `{meta: {...}, points: [...]}`.
pub fn read_loadline<R: Read>(reader: R) -> Result<Loadline> {
    Ok(serde_json::from_reader(reader)?)
}

/// Load every `.json` loadline in a directory, sorted by file name so the
/// catalog order (and any tie-break that depends on it) is reproducible.
pub fn load_catalog(dir: &Path) -> Result<Vec<Loadline>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut catalog = Vec::with_capacity(paths.len());
    for path in paths {
        let file = std::fs::File::open(&path)?;
        let ll = read_loadline(std::io::BufReader::new(file)).map_err(|e| {
            Error::InvalidInput(format!("loadline {}: {e}", path.display()))
        })?;
        catalog.push(ll);
    }
    if catalog.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no .json loadlines found in {}",
            dir.display()
        )));
    }
    Ok(catalog)
}

/// The machine being estimated, for matching against a loadline catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub architecture: String,
    pub tdp_watts: Power,
    pub base_clock_ghz: f64,
    pub workload_name: Option<String>,
}

impl SystemDescriptor {
    pub fn new(
        architecture: impl Into<String>,
        tdp_watts: f64,
        base_clock_ghz: f64,
        workload_name: Option<String>,
    ) -> Result<Self> {
        if tdp_watts.is_nan() || tdp_watts <= 0.0 {
            return Err(Error::InvalidInput(format!("TDP must be > 0 W, got {tdp_watts}")));
        }
        Ok(SystemDescriptor {
            architecture: architecture.into(),
            tdp_watts: Power::from_watts(tdp_watts)?,
            base_clock_ghz,
            workload_name,
        })
    }
}

/// Multiplier correcting a software meter against a trusted reference,
/// e.g. a wall meter showing a tool under-reads by a fixed ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCalibrationFactor")]
pub struct CalibrationFactor {
    scale: f64,
    source: String,
}

#[derive(Deserialize)]
struct RawCalibrationFactor {
    scale: f64,
    source: String,
}

impl TryFrom<RawCalibrationFactor> for CalibrationFactor {
    type Error = Error;
    fn try_from(raw: RawCalibrationFactor) -> Result<Self> {
        CalibrationFactor::new(raw.scale, raw.source)
    }
}

impl CalibrationFactor {
    pub fn new(scale: f64, source: impl Into<String>) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "calibration scale must be > 0, got {scale}"
            )));
        }
        Ok(CalibrationFactor { scale, source: source.into() })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Interpolate power at a utilization fraction along the loadline.
/// Exact at calibration points, linear between them.
pub fn loadline_power(ll: &Loadline, utilization: f64) -> Result<Power> {
    if !utilization.is_finite() || !(0.0..=1.0).contains(&utilization) {
        return Err(Error::InvalidInput(format!(
            "utilization {utilization} outside [0, 1]; normalize it first \
             (see normalize_hyperthread_utilization)"
        )));
    }
    let points = ll.points();
    let pos = points.partition_point(|p| p.utilization <= utilization);
    if pos == points.len() {
        // utilization == 1.0 exactly; the last point applies.
        return Power::from_watts(points[pos - 1].watts);
    }
    let a = points[pos - 1];
    let b = points[pos];
    let t = (utilization - a.utilization) / (b.utilization - a.utilization);
    Power::from_watts(a.watts + (b.watts - a.watts) * t)
}

/// Estimate energy by mapping a utilization trace through a loadline and
/// integrating the resulting power zero-order over the interval.
///
/// The utilizations are taken one-to-one as fractions of the loadline's
/// benchmark throughput; that assumption is recorded on the estimate.
pub fn energy_from_utilization(
    util: &UtilizationTrace,
    ll: &Loadline,
    interval: (f64, f64),
) -> Result<EnergyEstimate> {
    for s in util.samples() {
        if s.utilization > 1.0 {
            return Err(Error::InvalidInput(format!(
                "utilization {} at t={} exceeds 1; run \
                 normalize_hyperthread_utilization before proxy estimation",
                s.utilization, s.timestamp
            )));
        }
    }
    let power_samples: Vec<Sample> = util
        .samples()
        .iter()
        .map(|s| {
            Ok(Sample {
                timestamp: s.timestamp,
                value: loadline_power(ll, s.utilization)?.watts(),
            })
        })
        .collect::<Result<_>>()?;
    let power_trace = PowerTrace::new(
        util.source_id().to_string(),
        HierarchyLevel::Node,
        SampleKind::InstantaneousPower,
        power_samples,
        Default::default(),
    )?;
    let integrated = integrate(&power_trace, interval, IntegrationMethod::ZeroOrder)?;

    let mut out = EnergyEstimate::new(
        integrated.joules(),
        interval,
        EstimationMethod::ProxyLoadline,
        Scope { level: HierarchyLevel::Node, sources: vec![util.source_id().to_string()] },
        EnergyBasis::Absolute,
    )?;
    out.add_note(format!(
        "proxy estimate: OS utilization passed through one-to-one as a \
         throughput fraction of loadline {:?} ({})",
        ll.meta().workload_name,
        ll.meta().architecture,
    ));
    Ok(out)
}

/// Convert a reported multi-core utilization percentage (which counts
/// logical threads and routinely exceeds 100%) to a [0, 1] fraction of
/// physical capacity: divide by the physical core count.
///
/// Returns the fraction and, when SMT pushes the figure past 1, a warning
/// alongside the clamped value.
pub fn normalize_hyperthread_utilization(
    reported_percent: f64,
    physical_cores: u32,
) -> Result<(f64, Option<String>)> {
    if !reported_percent.is_finite() || reported_percent < 0.0 {
        return Err(Error::InvalidInput(format!(
            "reported utilization must be >= 0%, got {reported_percent}"
        )));
    }
    if physical_cores == 0 {
        return Err(Error::InvalidInput("physical_cores must be >= 1".into()));
    }
    let fraction = reported_percent / (100.0 * f64::from(physical_cores));
    if fraction > 1.0 {
        Ok((
            1.0,
            Some(format!(
                "reported {reported_percent}% on {physical_cores} physical cores \
                 normalizes to {fraction:.3}; clamped to 1.0 (SMT over-commit)"
            )),
        ))
    } else {
        Ok((fraction, None))
    }
}

/// Worst-case energy bound from thermal design power: TDP held for the
/// whole duration. An upper-bound proxy for capacity planning, not a
/// measurement.
pub fn tdp_energy_bound(desc: &SystemDescriptor, duration: f64) -> Result<EnergyEstimate> {
    if !duration.is_finite() || duration < 0.0 {
        return Err(Error::InvalidInput(format!("duration must be >= 0 s, got {duration}")));
    }
    let mut out = EnergyEstimate::new(
        desc.tdp_watts.watts() * duration,
        (0.0, duration),
        EstimationMethod::TdpBound,
        Scope { level: HierarchyLevel::Component, sources: vec![desc.architecture.clone()] },
        EnergyBasis::Absolute,
    )?;
    out.add_note(format!(
        "upper bound: TDP {} W held for {duration} s; real draw is lower \
         except under sustained worst-case load",
        desc.tdp_watts.watts()
    ));
    Ok(out)
}

/// How close two positive quantities are, as 1 − relative difference.
fn closeness(a: f64, b: f64) -> f64 {
    if a == b {
        return 1.0;
    }
    let max = a.max(b);
    if max <= 0.0 {
        return 0.0;
    }
    1.0 - (a - b).abs() / max
}

/// Score one catalog entry against a system descriptor. Architecture
/// dominates (weight 4), then TDP closeness (2), workload match (2), and
/// clock closeness (1) — same architecture and TDP is the solid starting
/// point, workload similarity refines it.
pub fn loadline_match_score(ll: &Loadline, desc: &SystemDescriptor) -> f64 {
    let arch = if ll.meta().architecture == desc.architecture { 4.0 } else { 0.0 };
    let tdp = 2.0 * closeness(ll.meta().tdp_watts.watts(), desc.tdp_watts.watts());
    let clock = closeness(ll.meta().base_clock_ghz, desc.base_clock_ghz);
    let workload = match &desc.workload_name {
        Some(w) if *w == ll.meta().workload_name => 2.0,
        _ => 0.0,
    };
    arch + tdp + clock + workload
}

/// Pick the best-matching loadline from a catalog. Deterministic: ties on
/// score fall to the smallest TDP difference, then to the lexicographically
/// smallest workload name.
pub fn select_loadline<'a>(
    catalog: &'a [Loadline],
    desc: &SystemDescriptor,
) -> Result<(&'a Loadline, f64)> {
    if catalog.is_empty() {
        return Err(Error::InvalidInput("loadline catalog is empty".into()));
    }
    let mut best: Option<(&Loadline, f64, f64)> = None; // (entry, score, tdp_diff)
    for ll in catalog {
        let score = loadline_match_score(ll, desc);
        let tdp_diff = (ll.meta().tdp_watts.watts() - desc.tdp_watts.watts()).abs();
        let better = match &best {
            None => true,
            Some((current, best_score, best_diff)) => {
                score > *best_score
                    || (score == *best_score && tdp_diff < *best_diff)
                    || (score == *best_score
                        && tdp_diff == *best_diff
                        && ll.meta().workload_name < current.meta().workload_name)
            }
        };
        if better {
            best = Some((ll, score, tdp_diff));
        }
    }
    let (ll, score, _) = best.expect("catalog is non-empty");
    Ok((ll, score))
}

/// Rescale a software-meter estimate by a known calibration factor,
/// recording where the factor came from. All other provenance is kept.
pub fn apply_calibration(estimate: &EnergyEstimate, factor: &CalibrationFactor) -> EnergyEstimate {
    let mut out = estimate
        .replace_joules(estimate.joules() * factor.scale())
        .expect("scaling a valid estimate by a positive factor preserves validity");
    out.add_note(format!(
        "calibrated: energy scaled by {} (source: {})",
        factor.scale(),
        factor.source()
    ));
    out
}
