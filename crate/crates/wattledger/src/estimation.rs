//! Energy estimation: integrate power traces, establish idle baselines,
//! derive marginal energy, standardize across node classes, scale by PUE.
//!
//! Every estimate carries its provenance — method, basis, scope, interval,
//! and any PUE scaling — because a bare joule count is uninterpretable.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{HierarchyLevel, PowerTrace};
use crate::units::Power;

/// How an energy figure was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    ZeroOrder,
    Trapezoid,
    ProxyLoadline,
    TdpBound,
}

impl std::fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EstimationMethod::ZeroOrder => "zero_order",
            EstimationMethod::Trapezoid => "trapezoid",
            EstimationMethod::ProxyLoadline => "proxy_loadline",
            EstimationMethod::TdpBound => "tdp_bound",
        };
        f.write_str(s)
    }
}

/// Absolute energy includes all power consumed in the window, idle draw
/// and all; marginal energy is the change relative to a baseline condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyBasis {
    Absolute,
    Marginal,
}

impl std::fmt::Display for EnergyBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnergyBasis::Absolute => "absolute",
            EnergyBasis::Marginal => "marginal",
        })
    }
}

/// What the estimate covers: a hierarchy level plus the measured sources.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scope {
    pub level: HierarchyLevel,
    pub sources: Vec<String>,
}

/// Closed time interval in epoch seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

/// An energy figure with mandatory provenance.
///
/// `joules` may be negative only for marginal estimates (a workload can
/// land below a misjudged baseline; clamping would hide that). The
/// serialized form always carries `unit: "J"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnergyEstimate", into = "RawEnergyEstimate")]
pub struct EnergyEstimate {
    joules: f64,
    interval: Interval,
    method: EstimationMethod,
    scope: Scope,
    basis: EnergyBasis,
    pue_applied: Option<f64>,
    notes: Vec<String>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawEnergyEstimate {
    joules: f64,
    unit: String,
    interval: Interval,
    method: EstimationMethod,
    scope: Scope,
    basis: EnergyBasis,
    #[serde(default)]
    pue_applied: Option<f64>,
    #[serde(default)]
    notes: Vec<String>,
}

impl TryFrom<RawEnergyEstimate> for EnergyEstimate {
    type Error = Error;
    fn try_from(raw: RawEnergyEstimate) -> Result<Self> {
        if raw.unit != "J" {
            return Err(Error::InvalidInput(format!(
                "energy estimates are stored in J, found unit {:?}",
                raw.unit
            )));
        }
        let mut e = EnergyEstimate::new(
            raw.joules,
            (raw.interval.start, raw.interval.end),
            raw.method,
            raw.scope,
            raw.basis,
        )?;
        if let Some(pue) = raw.pue_applied {
            if !pue.is_finite() || pue < 1.0 {
                return Err(Error::InvalidInput(format!("pue_applied must be >= 1, got {pue}")));
            }
            e.pue_applied = Some(pue);
        }
        e.notes = raw.notes;
        Ok(e)
    }
}

impl From<EnergyEstimate> for RawEnergyEstimate {
    fn from(e: EnergyEstimate) -> Self {
        RawEnergyEstimate {
            joules: e.joules,
            unit: "J".to_string(),
            interval: e.interval,
            method: e.method,
            scope: e.scope,
            basis: e.basis,
            pue_applied: e.pue_applied,
            notes: e.notes,
        }
    }
}

impl EnergyEstimate {
    pub fn new(
        joules: f64,
        interval: (f64, f64),
        method: EstimationMethod,
        scope: Scope,
        basis: EnergyBasis,
    ) -> Result<Self> {
        let (start, end) = interval;
        if !joules.is_finite() {
            return Err(Error::InvalidInput(format!("energy must be finite, got {joules}")));
        }
        if !start.is_finite() || !end.is_finite() || end < start {
            return Err(Error::InvalidInput(format!(
                "interval must satisfy end >= start, got [{start}, {end}]"
            )));
        }
        if basis == EnergyBasis::Absolute && joules < 0.0 {
            return Err(Error::InvalidInput(format!(
                "absolute energy must be >= 0 J, got {joules}"
            )));
        }
        Ok(EnergyEstimate {
            joules,
            interval: Interval { start, end },
            method,
            scope,
            basis,
            pue_applied: None,
            notes: Vec::new(),
        })
    }

    pub fn joules(&self) -> f64 {
        self.joules
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.interval.start, self.interval.end)
    }

    pub fn duration(&self) -> f64 {
        self.interval.end - self.interval.start
    }

    pub fn method(&self) -> EstimationMethod {
        self.method
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn basis(&self) -> EnergyBasis {
        self.basis
    }

    pub fn pue_applied(&self) -> Option<f64> {
        self.pue_applied
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Copy of this estimate with a different energy value, keeping all
    /// provenance (interval, method, scope, basis, PUE, notes) intact.
    pub(crate) fn replace_joules(&self, joules: f64) -> Result<Self> {
        if !joules.is_finite() {
            return Err(Error::InvalidInput(format!("energy must be finite, got {joules}")));
        }
        if self.basis == EnergyBasis::Absolute && joules < 0.0 {
            return Err(Error::InvalidInput(format!(
                "absolute energy must be >= 0 J, got {joules}"
            )));
        }
        let mut out = self.clone();
        out.joules = joules;
        Ok(out)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.add_note(note);
        self
    }
}

/// How an idle baseline was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Low percentile of observed draw over a long window.
    Percentile(f64),
    /// Operator-declared figure (e.g. from a spec sheet or prior study).
    Declared,
}

/// Power a source draws with no workload, plus how and when it was found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdleBaseline {
    pub watts: Power,
    pub method: BaselineMethod,
    pub window: Interval,
    pub source_id: String,
}

impl IdleBaseline {
    pub fn new(
        watts: f64,
        method: BaselineMethod,
        window: (f64, f64),
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if let BaselineMethod::Percentile(p) = method {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "baseline percentile must lie in (0, 1), got {p}"
                )));
            }
        }
        let (start, end) = window;
        if end < start {
            return Err(Error::InvalidInput(format!(
                "baseline window must satisfy end >= start, got [{start}, {end}]"
            )));
        }
        Ok(IdleBaseline {
            watts: Power::from_watts(watts)?,
            method,
            window: Interval { start, end },
            source_id: source_id.into(),
        })
    }
}

/// Per-node-class power offsets recovered from repeated runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetFit {
    /// Watts each class sits above the reference class; the reference
    /// itself maps to 0.
    pub offsets: BTreeMap<String, f64>,
    /// Root-mean-square of per-repetition residuals, in watts.
    pub residual_rms: f64,
    /// Class whose offset is pinned to 0 (lexicographically smallest).
    pub reference_class: String,
}

/// Numerical integration rule for sampled power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    /// Hold each sample until the next one. The default: it makes no
    /// smoothness assumption about the signal between samples.
    ZeroOrder,
    /// Piecewise-linear area; useful for comparison studies.
    Trapezoid,
}

impl From<IntegrationMethod> for EstimationMethod {
    fn from(m: IntegrationMethod) -> Self {
        match m {
            IntegrationMethod::ZeroOrder => EstimationMethod::ZeroOrder,
            IntegrationMethod::Trapezoid => EstimationMethod::Trapezoid,
        }
    }
}

impl std::str::FromStr for IntegrationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_order" | "zero-order" => Ok(IntegrationMethod::ZeroOrder),
            "trapezoid" => Ok(IntegrationMethod::Trapezoid),
            other => Err(Error::InvalidInput(format!(
                "unknown integration method {other:?}; expected zero-order or trapezoid"
            ))),
        }
    }
}

/// Integrate sampled power over `[start, end]` to an absolute energy
/// estimate. The trace must cover the interval on both sides — there is
/// no extrapolation, since samples can already miss transient spikes and
/// dips without inventing data beyond coverage.
pub fn integrate(
    trace: &PowerTrace,
    interval: (f64, f64),
    method: IntegrationMethod,
) -> Result<EnergyEstimate> {
    let (start, end) = interval;
    if !start.is_finite() || !end.is_finite() || end <= start {
        return Err(Error::InvalidInput(format!(
            "integration interval must satisfy end > start, got [{start}, {end}]"
        )));
    }
    if !trace.sample_kind().is_power() {
        return Err(Error::InvalidInput(
            "cannot integrate a cumulative-energy trace; decode it to power first".into(),
        ));
    }
    let (data_start, data_end) = trace.span();
    if start < data_start || end > data_end {
        return Err(Error::NotCovered { start, end, data_start, data_end });
    }

    let samples = trace.samples();
    let mut joules = 0.0;
    for pair in samples.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let lo = a.timestamp.max(start);
        let hi = b.timestamp.min(end);
        if hi <= lo {
            continue;
        }
        joules += match method {
            IntegrationMethod::ZeroOrder => a.value * (hi - lo),
            IntegrationMethod::Trapezoid => {
                let slope = (b.value - a.value) / (b.timestamp - a.timestamp);
                let v_lo = a.value + slope * (lo - a.timestamp);
                let v_hi = a.value + slope * (hi - a.timestamp);
                0.5 * (v_lo + v_hi) * (hi - lo)
            }
        };
    }

    EnergyEstimate::new(
        joules,
        (start, end),
        method.into(),
        Scope { level: trace.level(), sources: vec![trace.source_id().to_string()] },
        EnergyBasis::Absolute,
    )
}

/// Default idle-baseline percentile: the second percentile of observed
/// draw, low enough to sit below any workload but above meter dropouts.
pub const DEFAULT_BASELINE_PERCENTILE: f64 = 0.02;

/// Estimate a source's idle power as a low nearest-rank percentile of its
/// observed draw. Nearest-rank keeps the result an actually observed
/// value, with no interpolation ambiguity.
pub fn estimate_idle_baseline(trace: &PowerTrace, p: f64) -> Result<IdleBaseline> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "baseline percentile must lie in (0, 1), got {p}"
        )));
    }
    if !trace.sample_kind().is_power() {
        return Err(Error::InvalidInput(
            "idle baseline needs a power trace; decode cumulative counters first".into(),
        ));
    }
    let n = trace.samples().len();
    if (n as f64) * p < 1.0 {
        return Err(Error::InvalidInput(format!(
            "{n} samples are too few to take a {p} percentile; \
             collect a longer observation window (need at least {} samples)",
            (1.0 / p).ceil()
        )));
    }
    let mut values: Vec<f64> = trace.samples().iter().map(|s| s.value).collect();
    values.sort_by(f64::total_cmp);
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    let watts = values[rank - 1];
    IdleBaseline::new(
        watts,
        BaselineMethod::Percentile(p),
        trace.span(),
        trace.source_id().to_string(),
    )
}

/// Marginal energy: what the workload consumed above the idle baseline.
///
/// A negative result is preserved with a warning rather than clamped —
/// baselines are highly variable, and a clamp would hide when one was
/// misjudged.
pub fn marginal_energy(absolute: &EnergyEstimate, baseline: &IdleBaseline) -> Result<EnergyEstimate> {
    if absolute.basis() != EnergyBasis::Absolute {
        return Err(Error::InvalidInput(
            "marginal_energy needs an absolute estimate; this one is already marginal".into(),
        ));
    }
    if !absolute.scope().sources.iter().any(|s| s == &baseline.source_id) {
        return Err(Error::ScopeMismatch(format!(
            "baseline is for source {:?} but the estimate covers {:?}",
            baseline.source_id,
            absolute.scope().sources
        )));
    }
    let duration = absolute.duration();
    let idle_joules = baseline.watts.watts() * duration;
    let joules = absolute.joules() - idle_joules;

    let mut out = EnergyEstimate::new(
        joules,
        absolute.interval(),
        absolute.method(),
        absolute.scope().clone(),
        EnergyBasis::Marginal,
    )?;
    out.pue_applied = absolute.pue_applied;
    out.notes = absolute.notes.clone();
    out.add_note(format!(
        "baseline {} W ({}) subtracted over {duration} s",
        baseline.watts.watts(),
        describe_baseline_method(baseline.method),
    ));
    if joules < 0.0 {
        out.add_note(format!(
            "warning: marginal energy {joules} J is negative; \
             the workload drew less than the baseline condition"
        ));
    }
    Ok(out)
}

fn describe_baseline_method(method: BaselineMethod) -> String {
    match method {
        BaselineMethod::Percentile(p) => format!("percentile {p}"),
        BaselineMethod::Declared => "declared".to_string(),
    }
}

/// Standardize an absolute estimate measured on one node class to a
/// reference class by subtracting the idle-power difference times the
/// duration. Energies from different node classes only become comparable
/// once their idle offsets are removed.
pub fn standardize_to_reference(
    absolute: &EnergyEstimate,
    node_baseline: &IdleBaseline,
    reference_baseline: &IdleBaseline,
) -> Result<EnergyEstimate> {
    if node_baseline.method != reference_baseline.method {
        return Err(Error::MethodMismatch(format!(
            "baselines were obtained differently ({} vs {}); \
             standardization would mix methodologies",
            describe_baseline_method(node_baseline.method),
            describe_baseline_method(reference_baseline.method),
        )));
    }
    if absolute.basis() != EnergyBasis::Absolute {
        return Err(Error::InvalidInput(
            "standardization applies to absolute estimates; marginal ones \
             already had a baseline removed"
                .into(),
        ));
    }
    let duration = absolute.duration();
    let offset_watts = node_baseline.watts.watts() - reference_baseline.watts.watts();
    let joules = absolute.joules() - offset_watts * duration;
    if joules < 0.0 {
        return Err(Error::InvalidInput(format!(
            "standardization drove energy to {joules} J; the baselines are \
             inconsistent with this estimate"
        )));
    }

    let mut out = EnergyEstimate::new(
        joules,
        absolute.interval(),
        absolute.method(),
        absolute.scope().clone(),
        EnergyBasis::Absolute,
    )?;
    out.pue_applied = absolute.pue_applied;
    out.notes = absolute.notes.clone();
    out.add_note(format!(
        "standardized from {} (idle {} W) to {} (idle {} W): {} W × {duration} s removed",
        node_baseline.source_id,
        node_baseline.watts.watts(),
        reference_baseline.source_id,
        reference_baseline.watts.watts(),
        offset_watts,
    ));
    Ok(out)
}

/// Recover per-class active-idle power offsets from repeated runs of the
/// same workload on several node classes.
///
/// Model: each repetition's energy is a common workload energy plus the
/// class offset times the repetition's duration. Solved as least squares
/// with the lexicographically smallest class pinned at 0 W.
pub fn fit_offsets(repetitions: &[(String, EnergyEstimate)]) -> Result<OffsetFit> {
    if repetitions.is_empty() {
        return Err(Error::NoSamples);
    }
    let basis = repetitions[0].1.basis();
    let method = repetitions[0].1.method();
    for (_, e) in repetitions {
        if e.basis() != basis || e.method() != method {
            return Err(Error::ScopeMismatch(
                "offset fitting mixes estimates of different basis or method; \
                 only compare results measured with the same methodology"
                    .into(),
            ));
        }
        if e.duration() <= 0.0 {
            return Err(Error::InvalidInput(
                "offset fitting needs positive-duration estimates".into(),
            ));
        }
    }

    let mut by_class: BTreeMap<&str, usize> = BTreeMap::new();
    for (class, _) in repetitions {
        *by_class.entry(class.as_str()).or_insert(0) += 1;
    }
    if by_class.len() < 2 {
        return Err(Error::InvalidInput(
            "offset fitting needs at least 2 node classes; \
             a single class makes the design singular"
                .into(),
        ));
    }
    if let Some((class, n)) = by_class.iter().find(|(_, &n)| n < 2) {
        return Err(Error::InvalidInput(format!(
            "class {class:?} has {n} repetition(s); at least 2 per class are needed"
        )));
    }

    // Column 0 is the shared workload energy; columns 1.. are per-class
    // offsets (watts) scaled by each repetition's duration. The first
    // class in sort order is the reference and gets no column.
    let classes: Vec<&str> = by_class.keys().copied().collect();
    let reference = classes[0];
    let col_of: BTreeMap<&str, usize> =
        classes[1..].iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();

    let m = repetitions.len();
    let k = classes.len(); // 1 intercept + (k-1) offsets
    let mut design = DMatrix::<f64>::zeros(m, k);
    let mut rhs = DVector::<f64>::zeros(m);
    for (row, (class, e)) in repetitions.iter().enumerate() {
        design[(row, 0)] = 1.0;
        if let Some(&col) = col_of.get(class.as_str()) {
            design[(row, col)] = e.duration();
        }
        rhs[row] = e.joules();
    }

    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * 1e-12;
    if svd.rank(eps) < k {
        return Err(Error::InvalidInput(
            "offset design matrix is singular; repetitions do not distinguish the classes".into(),
        ));
    }
    let solution = svd.solve(&rhs, eps).map_err(|msg| Error::InvalidInput(msg.to_string()))?;

    let mut offsets = BTreeMap::new();
    offsets.insert(reference.to_string(), 0.0);
    for (&class, &col) in &col_of {
        offsets.insert(class.to_string(), solution[col]);
    }

    let mut sq_sum = 0.0;
    for (class, e) in repetitions {
        let predicted = solution[0] + offsets[class.as_str()] * e.duration();
        let residual_watts = (e.joules() - predicted) / e.duration();
        sq_sum += residual_watts * residual_watts;
    }
    let residual_rms = (sq_sum / m as f64).sqrt();

    Ok(OffsetFit { offsets, residual_rms, reference_class: reference.to_string() })
}

/// Gross up IT-equipment energy to facility energy by the Power Usage
/// Effectiveness ratio. Refuses to apply twice — double-scaled figures
/// are a classic accounting error.
pub fn apply_pue(estimate: &EnergyEstimate, pue: f64) -> Result<EnergyEstimate> {
    if !pue.is_finite() || pue < 1.0 {
        return Err(Error::InvalidInput(format!(
            "PUE is facility energy over IT energy and must be >= 1, got {pue}"
        )));
    }
    if let Some(existing) = estimate.pue_applied() {
        return Err(Error::InvalidInput(format!(
            "PUE {existing} was already applied to this estimate"
        )));
    }
    let mut out = estimate.clone();
    out.joules = estimate.joules() * pue;
    out.pue_applied = Some(pue);
    out.add_note(format!("scaled by PUE {pue}"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{Sample, SampleKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn power_trace(points: &[(f64, f64)]) -> PowerTrace {
        PowerTrace::new(
            "cpu1",
            HierarchyLevel::Node,
            SampleKind::InstantaneousPower,
            points.iter().map(|&(timestamp, value)| Sample { timestamp, value }).collect(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn estimate(joules: f64, duration: f64, source: &str) -> EnergyEstimate {
        EnergyEstimate::new(
            joules,
            (0.0, duration),
            EstimationMethod::ZeroOrder,
            Scope { level: HierarchyLevel::Node, sources: vec![source.to_string()] },
            EnergyBasis::Absolute,
        )
        .unwrap()
    }

    #[test]
    fn constant_trace_either_method() {
        let t = power_trace(&[(0.0, 100.0), (60.0, 100.0), (120.0, 100.0)]);
        let z = integrate(&t, (0.0, 120.0), IntegrationMethod::ZeroOrder).unwrap();
        let tr = integrate(&t, (0.0, 120.0), IntegrationMethod::Trapezoid).unwrap();
        assert_eq!(z.joules(), 12_000.0);
        assert_eq!(tr.joules(), 12_000.0);
        assert_eq!(z.basis(), EnergyBasis::Absolute);
        assert_eq!(z.method(), EstimationMethod::ZeroOrder);
    }

    #[test]
    fn step_trace_zero_order() {
        let t = power_trace(&[(0.0, 100.0), (60.0, 200.0), (120.0, 200.0)]);
        let e = integrate(&t, (0.0, 120.0), IntegrationMethod::ZeroOrder).unwrap();
        assert_eq!(e.joules(), 18_000.0);
    }

    #[test]
    fn step_trace_trapezoid() {
        let t = power_trace(&[(0.0, 100.0), (60.0, 200.0), (120.0, 200.0)]);
        let e = integrate(&t, (0.0, 120.0), IntegrationMethod::Trapezoid).unwrap();
        assert_eq!(e.joules(), 21_000.0);
    }

    #[test]
    fn integrate_partial_interval() {
        let t = power_trace(&[(0.0, 100.0), (60.0, 200.0), (120.0, 200.0)]);
        let e = integrate(&t, (30.0, 90.0), IntegrationMethod::ZeroOrder).unwrap();
        assert_eq!(e.joules(), 100.0 * 30.0 + 200.0 * 30.0);
    }

    #[test]
    fn integrate_refuses_extrapolation() {
        let t = power_trace(&[(0.0, 100.0), (60.0, 100.0)]);
        assert!(matches!(
            integrate(&t, (0.0, 120.0), IntegrationMethod::ZeroOrder),
            Err(Error::NotCovered { .. })
        ));
        assert!(matches!(
            integrate(&t, (-10.0, 60.0), IntegrationMethod::ZeroOrder),
            Err(Error::NotCovered { .. })
        ));
        assert!(integrate(&t, (30.0, 30.0), IntegrationMethod::ZeroOrder).is_err());
    }

    #[test]
    fn baseline_second_percentile() {
        // 98 quiet readings at 220 W plus 2 busy ones; the 2nd percentile
        // lands on the quiet level.
        let mut points: Vec<(f64, f64)> = (0..98).map(|i| (i as f64, 220.0)).collect();
        points.push((98.0, 300.0));
        points.push((99.0, 300.0));
        let b = estimate_idle_baseline(&power_trace(&points), 0.02).unwrap();
        assert_eq!(b.watts.watts(), 220.0);
        assert_eq!(b.method, BaselineMethod::Percentile(0.02));
        assert_eq!(b.source_id, "cpu1");
    }

    #[test]
    fn baseline_constant_trace() {
        let points: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 309.0)).collect();
        let b = estimate_idle_baseline(&power_trace(&points), 0.02).unwrap();
        assert_eq!(b.watts.watts(), 309.0);
    }

    #[test]
    fn baseline_rejects_bad_percentile_and_short_windows() {
        let points: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 220.0)).collect();
        let t = power_trace(&points);
        assert!(estimate_idle_baseline(&t, 0.0).is_err());
        assert!(estimate_idle_baseline(&t, 1.0).is_err());

        let short = power_trace(&[(0.0, 220.0), (1.0, 220.0)]);
        let err = estimate_idle_baseline(&short, 0.02).unwrap_err();
        assert!(err.to_string().contains("longer"));
    }

    #[test]
    fn marginal_subtracts_baseline() {
        let abs = estimate(12_000.0, 120.0, "cpu1");
        let b = IdleBaseline::new(50.0, BaselineMethod::Declared, (0.0, 120.0), "cpu1").unwrap();
        let m = marginal_energy(&abs, &b).unwrap();
        assert_eq!(m.joules(), 6000.0);
        assert_eq!(m.basis(), EnergyBasis::Marginal);
        assert!(m.notes().iter().any(|n| n.contains("baseline 50 W")));
    }

    #[test]
    fn marginal_zero_baseline_is_identity() {
        let abs = estimate(12_000.0, 120.0, "cpu1");
        let b = IdleBaseline::new(0.0, BaselineMethod::Declared, (0.0, 120.0), "cpu1").unwrap();
        assert_eq!(marginal_energy(&abs, &b).unwrap().joules(), 12_000.0);
    }

    #[test]
    fn marginal_below_baseline_goes_negative_with_warning() {
        let abs = estimate(12_000.0, 120.0, "cpu1");
        let b = IdleBaseline::new(110.0, BaselineMethod::Declared, (0.0, 120.0), "cpu1").unwrap();
        let m = marginal_energy(&abs, &b).unwrap();
        assert_eq!(m.joules(), -1200.0);
        assert!(m.notes().iter().any(|n| n.contains("negative")));
    }

    #[test]
    fn marginal_rejects_wrong_source() {
        let abs = estimate(12_000.0, 120.0, "cpu1");
        let b = IdleBaseline::new(50.0, BaselineMethod::Declared, (0.0, 120.0), "gpu7").unwrap();
        assert!(matches!(marginal_energy(&abs, &b), Err(Error::ScopeMismatch(_))));
    }

    #[test]
    fn standardize_cpu3_to_cpu1() {
        // One-hour run on the 309 W-idle class, standardized to the
        // 220 W-idle class: exactly 89 W × 3600 s comes off.
        let abs = estimate(2_000_000.0, 3600.0, "cpu3");
        let node = IdleBaseline::new(309.0, BaselineMethod::Percentile(0.02), (0.0, 3600.0), "cpu3").unwrap();
        let reference =
            IdleBaseline::new(220.0, BaselineMethod::Percentile(0.02), (0.0, 3600.0), "cpu1").unwrap();
        let s = standardize_to_reference(&abs, &node, &reference).unwrap();
        assert_eq!(abs.joules() - s.joules(), 320_400.0);
        assert!(s.notes().iter().any(|n| n.contains("standardized from cpu3")));
    }

    #[test]
    fn standardize_to_self_is_identity() {
        let abs = estimate(2_000_000.0, 3600.0, "cpu3");
        let node = IdleBaseline::new(309.0, BaselineMethod::Percentile(0.02), (0.0, 3600.0), "cpu3").unwrap();
        let s = standardize_to_reference(&abs, &node, &node).unwrap();
        assert_eq!(s.joules(), abs.joules());
    }

    #[test]
    fn standardize_gpu_offset() {
        let abs = estimate(30_000.0, 60.0, "gpu1");
        let node = IdleBaseline::new(374.0, BaselineMethod::Percentile(0.02), (0.0, 60.0), "gpu1").unwrap();
        let reference =
            IdleBaseline::new(220.0, BaselineMethod::Percentile(0.02), (0.0, 60.0), "cpu1").unwrap();
        let s = standardize_to_reference(&abs, &node, &reference).unwrap();
        assert_eq!(abs.joules() - s.joules(), 9240.0);
    }

    #[test]
    fn standardize_is_self_inverse() {
        let abs = estimate(2_000_000.0, 3600.0, "cpu3");
        let node = IdleBaseline::new(309.0, BaselineMethod::Percentile(0.02), (0.0, 3600.0), "cpu3").unwrap();
        let reference =
            IdleBaseline::new(220.0, BaselineMethod::Percentile(0.02), (0.0, 3600.0), "cpu1").unwrap();
        let there = standardize_to_reference(&abs, &node, &reference).unwrap();
        let back = standardize_to_reference(&there, &reference, &node).unwrap();
        assert_eq!(back.joules(), abs.joules());
    }

    #[test]
    fn standardize_rejects_method_mismatch() {
        let abs = estimate(2_000_000.0, 3600.0, "cpu3");
        let node = IdleBaseline::new(309.0, BaselineMethod::Percentile(0.02), (0.0, 3600.0), "cpu3").unwrap();
        let declared = IdleBaseline::new(220.0, BaselineMethod::Declared, (0.0, 3600.0), "cpu1").unwrap();
        assert!(matches!(
            standardize_to_reference(&abs, &node, &declared),
            Err(Error::MethodMismatch(_))
        ));
        let p5 = IdleBaseline::new(220.0, BaselineMethod::Percentile(0.05), (0.0, 3600.0), "cpu1").unwrap();
        assert!(standardize_to_reference(&abs, &node, &p5).is_err());
    }

    #[test]
    fn fit_recovers_constructed_offset() {
        let duration = 600.0;
        let base = 500_000.0;
        let reps = vec![
            ("cpu1".to_string(), estimate(base, duration, "cpu1")),
            ("cpu1".to_string(), estimate(base, duration, "cpu1")),
            ("cpu3".to_string(), estimate(base + 89.0 * duration, duration, "cpu3")),
            ("cpu3".to_string(), estimate(base + 89.0 * duration, duration, "cpu3")),
        ];
        let fit = fit_offsets(&reps).unwrap();
        assert_eq!(fit.reference_class, "cpu1");
        assert_relative_eq!(fit.offsets["cpu1"], 0.0);
        assert_relative_eq!(fit.offsets["cpu3"], 89.0, max_relative = 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn fit_identical_classes_gives_zero_offsets() {
        let reps: Vec<(String, EnergyEstimate)> = ["a", "a", "b", "b", "c", "c"]
            .iter()
            .map(|c| (c.to_string(), estimate(1000.0, 10.0, c)))
            .collect();
        let fit = fit_offsets(&reps).unwrap();
        for offset in fit.offsets.values() {
            assert_relative_eq!(*offset, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fit_recovers_noisy_offsets_within_tolerance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let duration = 600.0;
        let base = 1_000_000.0;
        let sigma_watts = 1.0;
        let n_per_class = 50;
        let truth = [("alpha", 0.0), ("beta", 50.0), ("gamma", 89.0)];
        let mut reps = Vec::new();
        for (class, offset) in truth {
            for _ in 0..n_per_class {
                // Box-Muller keeps this oracle free of distribution crates.
                let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                let noise_w =
                    sigma_watts * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                let joules = base + (offset + noise_w) * duration;
                reps.push((class.to_string(), estimate(joules, duration, class)));
            }
        }
        let fit = fit_offsets(&reps).unwrap();
        let tolerance = 3.0 * sigma_watts / (n_per_class as f64).sqrt();
        for (class, offset) in truth {
            assert!(
                (fit.offsets[class] - offset).abs() <= tolerance,
                "class {class}: fitted {} vs true {offset} (tolerance {tolerance})",
                fit.offsets[class]
            );
        }
        assert!(fit.residual_rms < 3.0 * sigma_watts);
    }

    #[test]
    fn fit_rejects_degenerate_designs() {
        let one_class = vec![
            ("a".to_string(), estimate(1000.0, 10.0, "a")),
            ("a".to_string(), estimate(1000.0, 10.0, "a")),
        ];
        assert!(fit_offsets(&one_class).is_err());

        let single_rep = vec![
            ("a".to_string(), estimate(1000.0, 10.0, "a")),
            ("a".to_string(), estimate(1000.0, 10.0, "a")),
            ("b".to_string(), estimate(1000.0, 10.0, "b")),
        ];
        assert!(fit_offsets(&single_rep).is_err());
        assert!(fit_offsets(&[]).is_err());
    }

    #[test]
    fn pue_scales_once() {
        let e = estimate(100.0, 10.0, "cpu1");
        let scaled = apply_pue(&e, 1.5).unwrap();
        assert_eq!(scaled.joules(), 150.0);
        assert_eq!(scaled.pue_applied(), Some(1.5));

        let identity = apply_pue(&e, 1.0).unwrap();
        assert_eq!(identity.joules(), 100.0);

        assert!(apply_pue(&scaled, 1.2).is_err());
        assert!(apply_pue(&e, 0.9).is_err());
    }

    #[test]
    fn estimate_serializes_with_explicit_unit() {
        let e = estimate(12_000.0, 120.0, "cpu1");
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["unit"], "J");
        assert_eq!(json["method"], "zero_order");
        assert_eq!(json["basis"], "absolute");
        let back: EnergyEstimate = serde_json::from_value(json).unwrap();
        assert_eq!(back, e);

        let wrong_unit = r#"{"joules":1.0,"unit":"kWh","interval":{"start":0.0,"end":1.0},
            "method":"zero_order","scope":{"level":"node","sources":["x"]},"basis":"absolute"}"#;
        assert!(serde_json::from_str::<EnergyEstimate>(wrong_unit).is_err());

        let negative_absolute = r#"{"joules":-1.0,"unit":"J","interval":{"start":0.0,"end":1.0},
            "method":"zero_order","scope":{"level":"node","sources":["x"]},"basis":"absolute"}"#;
        assert!(serde_json::from_str::<EnergyEstimate>(negative_absolute).is_err());
    }

    #[test]
    fn zero_duration_estimate_allowed() {
        // A TDP bound over zero seconds is a legitimate (empty) estimate.
        let e = EnergyEstimate::new(
            0.0,
            (5.0, 5.0),
            EstimationMethod::TdpBound,
            Scope { level: HierarchyLevel::Component, sources: vec!["cpu".into()] },
            EnergyBasis::Absolute,
        );
        assert!(e.is_ok());
        assert!(EnergyEstimate::new(
            1.0,
            (5.0, 4.0),
            EstimationMethod::TdpBound,
            Scope { level: HierarchyLevel::Component, sources: vec!["cpu".into()] },
            EnergyBasis::Absolute,
        )
        .is_err());
    }

    fn arbitrary_trace() -> impl Strategy<Value = PowerTrace> {
        proptest::collection::vec(0.0f64..1000.0, 3..30).prop_map(|values| {
            let points: Vec<(f64, f64)> =
                values.iter().enumerate().map(|(i, &v)| (i as f64 * 7.5, v)).collect();
            power_trace(&points)
        })
    }

    proptest! {
        #[test]
        fn integration_is_additive(trace in arbitrary_trace(), split in 0.1f64..0.9) {
            let (start, end) = trace.span();
            let mid = start + (end - start) * split;
            for method in [IntegrationMethod::ZeroOrder, IntegrationMethod::Trapezoid] {
                let left = integrate(&trace, (start, mid), method).unwrap().joules();
                let right = integrate(&trace, (mid, end), method).unwrap().joules();
                let whole = integrate(&trace, (start, end), method).unwrap().joules();
                prop_assert!((left + right - whole).abs() <= 1e-9 * whole.abs().max(1.0));
            }
        }

        #[test]
        fn constant_traces_agree_across_methods(watts in 0.0f64..1000.0, n in 2usize..20) {
            let points: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 * 10.0, watts)).collect();
            let t = power_trace(&points);
            let span = t.span();
            let z = integrate(&t, span, IntegrationMethod::ZeroOrder).unwrap().joules();
            let tr = integrate(&t, span, IntegrationMethod::Trapezoid).unwrap().joules();
            prop_assert_eq!(z, tr);
        }

        #[test]
        fn baseline_is_bounded_by_observations(
            values in proptest::collection::vec(0.0f64..1000.0, 50..200),
            p in 0.01f64..0.5,
        ) {
            let points: Vec<(f64, f64)> =
                values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
            let t = power_trace(&points);
            prop_assume!((values.len() as f64) * p >= 1.0);
            let b = estimate_idle_baseline(&t, p).unwrap();
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(0.0f64, f64::max);
            prop_assert!(b.watts.watts() >= min && b.watts.watts() <= max);
        }

        #[test]
        fn marginal_reconstructs_absolute(
            joules in 0.0f64..1e9,
            duration in 1.0f64..1e5,
            baseline_watts in 0.0f64..1000.0,
        ) {
            let abs = estimate(joules, duration, "cpu1");
            let b = IdleBaseline::new(baseline_watts, BaselineMethod::Declared, (0.0, duration), "cpu1")
                .unwrap();
            let m = marginal_energy(&abs, &b).unwrap();
            let reconstructed = m.joules() + b.watts.watts() * duration;
            prop_assert!((reconstructed - joules).abs() <= 1e-12 * joules.max(1.0));
        }

        #[test]
        fn standardization_round_trips(
            joules in 1e6f64..1e9,
            duration in 1.0f64..3600.0,
            idle_a in 0.0f64..400.0,
            idle_b in 0.0f64..400.0,
        ) {
            let abs = estimate(joules, duration, "a");
            let a = IdleBaseline::new(idle_a, BaselineMethod::Percentile(0.02), (0.0, duration), "a")
                .unwrap();
            let b = IdleBaseline::new(idle_b, BaselineMethod::Percentile(0.02), (0.0, duration), "b")
                .unwrap();
            let there = standardize_to_reference(&abs, &a, &b).unwrap();
            let back = standardize_to_reference(&there, &b, &a).unwrap();
            prop_assert!((back.joules() - joules).abs() <= 1e-9 * joules);
        }
    }
}
