//! Synthetic power traces with analytic ground truth.
//!
//! Real measurements never come with a known answer, so this module builds
//! the answer first: a piecewise-constant power signal (steady phases plus
//! transient spikes and dips) whose exact integral is computed analytically,
//! then sampled the way a real monitor would sample it — at instants, with
//! optional Gaussian read noise. Feeding the sampled trace through the
//! estimation pipeline and comparing against the analytic energy exercises
//! the whole chain, including the sampling-frequency failure mode: a coarse
//! sampler that happens to land on a short spike smears it across the whole
//! interval, and one that misses it never sees it at all.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::Interval;
use crate::proxy::Loadline;
use crate::telemetry::{
    HierarchyLevel, PowerTrace, Sample, SampleKind, UtilizationSample, UtilizationTrace,
};
use crate::units::{Energy, Power};

/// A steady segment of the workload: `watts` drawn for `duration` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    /// Seconds.
    pub duration: f64,
    pub watts: Power,
}

/// A transient that *replaces* the underlying phase power on the half-open
/// window `[time, time + duration)`. Watts below the phase level model a
/// dip, above it a spike.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    /// Seconds from workload start.
    pub time: f64,
    /// Seconds.
    pub duration: f64,
    pub watts: Power,
}

/// Description of a synthetic workload. Deserializable from JSON; all
/// invariants are re-checked on the way in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWorkloadSpec")]
pub struct WorkloadSpec {
    phases: Vec<Phase>,
    noise_std: Power,
    spikes: Vec<Spike>,
    seed: u64,
}

#[derive(Deserialize)]
struct RawWorkloadSpec {
    phases: Vec<Phase>,
    #[serde(default = "zero_watts")]
    noise_std: Power,
    #[serde(default)]
    spikes: Vec<Spike>,
    #[serde(default)]
    seed: u64,
}

fn zero_watts() -> Power {
    Power::from_watts(0.0).expect("zero watts is valid")
}

impl TryFrom<RawWorkloadSpec> for WorkloadSpec {
    type Error = Error;
    fn try_from(raw: RawWorkloadSpec) -> Result<Self> {
        WorkloadSpec::new(raw.phases, raw.noise_std, raw.spikes, raw.seed)
    }
}

impl WorkloadSpec {
    pub fn new(
        phases: Vec<Phase>,
        noise_std: Power,
        mut spikes: Vec<Spike>,
        seed: u64,
    ) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidInput("a workload needs at least one phase".into()));
        }
        for p in &phases {
            if !(p.duration.is_finite() && p.duration > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "phase durations must be positive, got {}",
                    p.duration
                )));
            }
        }
        let total: f64 = phases.iter().map(|p| p.duration).sum();
        spikes.sort_by(|a, b| a.time.total_cmp(&b.time));
        for s in &spikes {
            if !(s.time.is_finite() && s.time >= 0.0 && s.duration.is_finite() && s.duration > 0.0)
            {
                return Err(Error::InvalidInput(format!(
                    "spike at t={} with duration {} is malformed",
                    s.time, s.duration
                )));
            }
            if s.time + s.duration > total {
                return Err(Error::InvalidInput(format!(
                    "spike [{}, {}) extends past the workload end at {total} s",
                    s.time,
                    s.time + s.duration
                )));
            }
        }
        for pair in spikes.windows(2) {
            if pair[1].time < pair[0].time + pair[0].duration {
                return Err(Error::InvalidInput(format!(
                    "spikes at t={} and t={} overlap; spike windows must be disjoint",
                    pair[0].time, pair[1].time
                )));
            }
        }
        Ok(WorkloadSpec { phases, noise_std, spikes, seed })
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn noise_std(&self) -> Power {
        self.noise_std
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// True (noise-free) power at instant `t`. Phases and spikes occupy
    /// half-open windows; the final instant takes the last phase's value so
    /// a trace sampled through `t = total` stays defined.
    pub fn signal_at(&self, t: f64) -> Power {
        // A spike window wins over the phase underneath it.
        let idx = self.spikes.partition_point(|s| s.time <= t);
        if idx > 0 {
            let s = &self.spikes[idx - 1];
            if t < s.time + s.duration {
                return s.watts;
            }
        }
        let mut start = 0.0;
        for p in &self.phases {
            if t < start + p.duration {
                return p.watts;
            }
            start += p.duration;
        }
        self.phases.last().expect("validated non-empty").watts
    }

    /// Every breakpoint of the noise-free signal, sorted and deduplicated.
    fn breakpoints(&self) -> Vec<f64> {
        let total = self.total_duration();
        let mut cuts = Vec::with_capacity(2 + self.phases.len() + 2 * self.spikes.len());
        cuts.push(0.0);
        let mut acc = 0.0;
        for p in &self.phases {
            acc += p.duration;
            cuts.push(acc.min(total));
        }
        for s in &self.spikes {
            cuts.push(s.time);
            cuts.push(s.time + s.duration);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }
}

/// The exact, noise-free integral of a workload's power signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub joules: Energy,
    /// `(0, total_duration)` in seconds.
    pub span: Interval,
}

/// Analytic energy of the noise-free signal: each phase's watts×duration,
/// corrected by the excess (or deficit) of every spike over the phase power
/// it replaces.
pub fn ground_truth(spec: &WorkloadSpec) -> GroundTruth {
    let cuts = spec.breakpoints();
    let mut joules = 0.0;
    for pair in cuts.windows(2) {
        // The signal is constant on each inter-breakpoint segment, so its
        // value at the segment start holds throughout.
        joules += spec.signal_at(pair[0]).watts() * (pair[1] - pair[0]);
    }
    GroundTruth {
        joules: Energy::from_joules(joules)
            .expect("integral of a non-negative signal is non-negative"),
        span: Interval { start: 0.0, end: spec.total_duration() },
    }
}

/// Identifier stamped on generated traces.
pub const SYNTHETIC_SOURCE_ID: &str = "synthetic";

/// Build the sampling grid: every multiple of `interval` within the span,
/// plus the final instant itself so the trace always covers the ground
/// truth's span even when the interval does not divide the total duration.
fn sample_grid(total: f64, interval: f64) -> Result<Vec<f64>> {
    if !(interval.is_finite() && interval > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sample interval must be positive, got {interval}"
        )));
    }
    let steps = (total / interval * (1.0 + 1e-12)).floor() as u64;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * interval).collect();
    // Snap a float-rounded last point onto the endpoint; append the
    // endpoint when the grid stops short of it.
    if let Some(last) = grid.last_mut() {
        if (*last - total).abs() <= total.abs() * 1e-9 {
            *last = total;
        }
    }
    if grid.last().is_none_or(|&l| l < total) {
        grid.push(total);
    }
    Ok(grid)
}

/// Sample a workload's power signal the way a monitor would: point readings
/// on a fixed grid, plus seeded Gaussian read noise floored at zero watts.
///
/// Point sampling is deliberate — it reproduces the real hazard of coarse
/// sampling. A reading that lands inside a short spike reports the spike's
/// full power for its whole interval; a grid that straddles the spike never
/// records it. The returned [`GroundTruth`] is exact either way.
pub fn generate(spec: &WorkloadSpec, sample_interval: f64) -> Result<(PowerTrace, GroundTruth)> {
    let truth = ground_truth(spec);
    let grid = sample_grid(truth.span.end, sample_interval)?;

    let noise_std = spec.noise_std.watts();
    // Zero noise keeps the trace bit-exact; the RNG is only consulted when
    // there is actual noise to draw.
    let mut noise: Option<(ChaCha8Rng, Normal<f64>)> = if noise_std > 0.0 {
        Some((
            ChaCha8Rng::seed_from_u64(spec.seed),
            Normal::new(0.0, noise_std).expect("validated finite positive std"),
        ))
    } else {
        None
    };

    let samples: Vec<Sample> = grid
        .into_iter()
        .map(|t| {
            let mut value = spec.signal_at(t).watts();
            if let Some((rng, dist)) = noise.as_mut() {
                value = (value + dist.sample(rng)).max(0.0);
            }
            Sample { timestamp: t, value }
        })
        .collect();

    let mut metadata = BTreeMap::new();
    metadata.insert("seed".to_string(), spec.seed.to_string());
    metadata.insert("sample_interval_s".to_string(), sample_interval.to_string());
    let trace = PowerTrace::new(
        SYNTHETIC_SOURCE_ID,
        HierarchyLevel::Node,
        SampleKind::InstantaneousPower,
        samples,
        metadata,
    )?;
    Ok((trace, truth))
}

/// Invert a loadline: the lowest utilization at which it draws `watts`.
///
/// Walks the segments in order and stops at the first one that brackets the
/// target, so a flat segment resolves to its left end — the lowest `u`
/// producing that power.
fn utilization_for_power(ll: &Loadline, watts: f64) -> Result<f64> {
    let (lo, hi) = ll.watts_range();
    if !(lo..=hi).contains(&watts) {
        return Err(Error::InvalidInput(format!(
            "{watts} W is outside the loadline's [{lo}, {hi}] W range; no utilization produces it"
        )));
    }
    let pts = ll.points();
    for pair in pts.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if watts <= b.watts {
            let rise = b.watts - a.watts;
            if rise == 0.0 {
                return Ok(a.utilization);
            }
            let frac = (watts - a.watts) / rise;
            return Ok(a.utilization + frac * (b.utilization - a.utilization));
        }
    }
    // Range check above guarantees some segment brackets the target.
    Ok(pts.last().expect("loadline has >= 2 points").utilization)
}

/// Sample a workload as a utilization trace instead of a power trace: each
/// grid point carries the utilization at which `ll` reproduces the
/// workload's noise-free power. Round-tripping through the loadline
/// recovers the same
/// energy the power trace yields, which makes this the oracle for proxy
/// estimation.
pub fn generate_utilization(
    spec: &WorkloadSpec,
    ll: &Loadline,
    sample_interval: f64,
) -> Result<UtilizationTrace> {
    // Validate every declared power level up front so a level the grid
    // happens to skip still gets caught.
    for watts in spec
        .phases
        .iter()
        .map(|p| p.watts)
        .chain(spec.spikes.iter().map(|s| s.watts))
    {
        utilization_for_power(ll, watts.watts())?;
    }

    let grid = sample_grid(spec.total_duration(), sample_interval)?;
    let samples = grid
        .into_iter()
        .map(|t| {
            let u = utilization_for_power(ll, spec.signal_at(t).watts())?;
            Ok(UtilizationSample { timestamp: t, utilization: u })
        })
        .collect::<Result<Vec<_>>>()?;
    UtilizationTrace::new(SYNTHETIC_SOURCE_ID, samples, 1, 1)
}
