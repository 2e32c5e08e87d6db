//! Emissions accounting: convert energy to grams of CO₂ using a constant
//! or time-resolved carbon-intensity signal.
//!
//! Grid intensity moves hour to hour, so multiplying a day-long run by a
//! single number can be badly off. When a time series is available, the
//! power and intensity signals are aligned explicitly — either upsampling
//! the intensity onto the power grid or downsampling power into intensity
//! windows — and the alignment used is recorded on the result.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{integrate, EnergyEstimate, IntegrationMethod};
use crate::telemetry::{parse_timestamp, PowerTrace};
use crate::units::JOULES_PER_KWH;

/// Where an intensity figure comes from: a published yearly average for
/// the region, or real-time grid actuals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityBasis {
    YearlyAverage,
    Realtime,
}

impl std::str::FromStr for IntensityBasis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yearly_average" => Ok(IntensityBasis::YearlyAverage),
            "realtime" => Ok(IntensityBasis::Realtime),
            other => Err(Error::InvalidInput(format!(
                "unknown intensity basis {other:?}; expected yearly_average or realtime"
            ))),
        }
    }
}

impl std::fmt::Display for IntensityBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IntensityBasis::YearlyAverage => "yearly_average",
            IntensityBasis::Realtime => "realtime",
        })
    }
}

/// One intensity reading, valid from its timestamp until the next one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensitySample {
    pub timestamp: f64,
    /// Grams of CO₂ per kWh generated.
    pub intensity: f64,
}

/// A validated carbon-intensity time series for one grid region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntensitySeries")]
pub struct CarbonIntensitySeries {
    samples: Vec<IntensitySample>,
    region: String,
    basis: IntensityBasis,
}

#[derive(Deserialize)]
struct RawIntensitySeries {
    samples: Vec<IntensitySample>,
    region: String,
    basis: IntensityBasis,
}

impl TryFrom<RawIntensitySeries> for CarbonIntensitySeries {
    type Error = Error;
    fn try_from(raw: RawIntensitySeries) -> Result<Self> {
        CarbonIntensitySeries::new(raw.samples, raw.region, raw.basis)
    }
}

impl CarbonIntensitySeries {
    pub fn new(
        samples: Vec<IntensitySample>,
        region: impl Into<String>,
        basis: IntensityBasis,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::InvalidTrace(format!(
                    "intensity timestamps must be strictly increasing; {} follows {}",
                    pair[1].timestamp, pair[0].timestamp
                )));
            }
        }
        for s in &samples {
            if !s.timestamp.is_finite() || !s.intensity.is_finite() || s.intensity < 0.0 {
                return Err(Error::InvalidTrace(format!(
                    "intensity must be finite and >= 0 gCO2/kWh, got {} at t={}",
                    s.intensity, s.timestamp
                )));
            }
        }
        Ok(CarbonIntensitySeries { samples, region: region.into(), basis })
    }

    pub fn samples(&self) -> &[IntensitySample] {
        &self.samples
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn basis(&self) -> IntensityBasis {
        self.basis
    }

    /// Intensity in force at time `t`: the most recent sample holds until
    /// the next one, and the last sample holds forward.
    fn intensity_at(&self, t: f64) -> Option<f64> {
        let pos = self.samples.partition_point(|s| s.timestamp <= t);
        if pos == 0 {
            None // t precedes the first sample; we refuse to back-fill.
        } else {
            Some(self.samples[pos - 1].intensity)
        }
    }

    /// Median gap between intensity samples, if there are at least two.
    fn median_gap(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let mut gaps: Vec<f64> =
            self.samples.windows(2).map(|p| p[1].timestamp - p[0].timestamp).collect();
        gaps.sort_by(f64::total_cmp);
        Some(gaps[(gaps.len() - 1) / 2])
    }
}

/// How power and intensity series were brought onto a common time base.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Hold each intensity value across the finer power grid.
    UpsampleIntensity,
    /// Integrate power within each intensity window, then weight.
    DownsamplePower,
    /// A single scalar intensity was used.
    Constant,
}

impl std::fmt::Display for Alignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Alignment::UpsampleIntensity => "upsample_intensity",
            Alignment::DownsamplePower => "downsample_power",
            Alignment::Constant => "constant",
        })
    }
}

/// Resampling strategy for [`emissions_timeseries`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentStrategy {
    UpsampleIntensity,
    DownsamplePower,
}

impl From<AlignmentStrategy> for Alignment {
    fn from(s: AlignmentStrategy) -> Self {
        match s {
            AlignmentStrategy::UpsampleIntensity => Alignment::UpsampleIntensity,
            AlignmentStrategy::DownsamplePower => Alignment::DownsamplePower,
        }
    }
}

impl std::str::FromStr for AlignmentStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upsample_intensity" | "upsample-intensity" => Ok(AlignmentStrategy::UpsampleIntensity),
            "downsample_power" | "downsample-power" => Ok(AlignmentStrategy::DownsamplePower),
            other => Err(Error::InvalidInput(format!(
                "unknown alignment strategy {other:?}; expected \
                 upsample-intensity or downsample-power"
            ))),
        }
    }
}

/// Emissions derived from an energy estimate, with the derivation basis
/// and time alignment on record. A grams figure without those two facts
/// cannot be checked or compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmissionsEstimate")]
pub struct EmissionsEstimate {
    pub grams_co2: f64,
    pub energy: EnergyEstimate,
    pub intensity_basis: IntensityBasis,
    pub alignment: Alignment,
}

#[derive(Deserialize)]
struct RawEmissionsEstimate {
    grams_co2: f64,
    energy: EnergyEstimate,
    intensity_basis: IntensityBasis,
    alignment: Alignment,
}

impl TryFrom<RawEmissionsEstimate> for EmissionsEstimate {
    type Error = Error;
    fn try_from(raw: RawEmissionsEstimate) -> Result<Self> {
        if !raw.grams_co2.is_finite() || raw.grams_co2 < 0.0 {
            return Err(Error::InvalidInput(format!(
                "grams_co2 must be finite and >= 0, got {}",
                raw.grams_co2
            )));
        }
        Ok(EmissionsEstimate {
            grams_co2: raw.grams_co2,
            energy: raw.energy,
            intensity_basis: raw.intensity_basis,
            alignment: raw.alignment,
        })
    }
}

/// Emissions from an energy estimate and a single intensity figure.
///
/// grams = (joules / 3.6×10⁶) × intensity. The intensity's derivation
/// basis must be stated — a yearly average and a real-time actual are not
/// interchangeable claims.
pub fn emissions_constant(
    energy: &EnergyEstimate,
    intensity_g_per_kwh: f64,
    basis: IntensityBasis,
) -> Result<EmissionsEstimate> {
    if !intensity_g_per_kwh.is_finite() || intensity_g_per_kwh < 0.0 {
        return Err(Error::InvalidInput(format!(
            "carbon intensity must be >= 0 gCO2/kWh, got {intensity_g_per_kwh}"
        )));
    }
    if energy.joules() < 0.0 {
        return Err(Error::InvalidInput(
            "cannot attribute emissions to a negative (below-baseline) energy estimate".into(),
        ));
    }
    Ok(EmissionsEstimate {
        grams_co2: energy.joules() / JOULES_PER_KWH * intensity_g_per_kwh,
        energy: energy.clone(),
        intensity_basis: basis,
        alignment: Alignment::Constant,
    })
}

/// Emissions from a power trace and an intensity time series over an
/// interval, under an explicit alignment strategy.
///
/// Both strategies treat each signal as zero-order-hold — an intensity
/// value is in force until the next one arrives — so on the same inputs
/// they agree up to rounding; what differs is the granularity of the
/// intermediate products they expose. The power trace must cover the
/// interval, and the first intensity sample must not postdate its start
/// (intensity is never back-filled).
pub fn emissions_timeseries(
    power: &PowerTrace,
    ci: &CarbonIntensitySeries,
    interval: (f64, f64),
    strategy: AlignmentStrategy,
) -> Result<EmissionsEstimate> {
    let (start, end) = interval;
    // Coverage and trace-kind checks ride along with the energy integral.
    let mut energy = integrate(power, interval, IntegrationMethod::ZeroOrder)?;

    let first_ci = ci.samples()[0].timestamp;
    if first_ci > start {
        return Err(Error::NotCovered {
            start,
            end: first_ci.min(end),
            data_start: first_ci,
            data_end: ci.samples()[ci.samples().len() - 1].timestamp,
        });
    }

    let grams = match strategy {
        AlignmentStrategy::UpsampleIntensity => {
            // Walk the union of power and intensity breakpoints; on each
            // elementary segment both signals are constant.
            let mut cuts: Vec<f64> = Vec::new();
            cuts.push(start);
            cuts.extend(
                power
                    .samples()
                    .iter()
                    .map(|s| s.timestamp)
                    .filter(|&t| t > start && t < end),
            );
            cuts.extend(
                ci.samples().iter().map(|s| s.timestamp).filter(|&t| t > start && t < end),
            );
            cuts.push(end);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();

            let mut grams = 0.0;
            for pair in cuts.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let p = power_at(power, a);
                let i = ci.intensity_at(a).expect("first sample precedes start");
                grams += p * (b - a) / JOULES_PER_KWH * i;
            }
            grams
        }
        AlignmentStrategy::DownsamplePower => {
            // Energy per intensity window, weighted by that window's value.
            let mut grams = 0.0;
            for (idx, s) in ci.samples().iter().enumerate() {
                let w_start = s.timestamp.max(start);
                let w_end = match ci.samples().get(idx + 1) {
                    Some(next) => next.timestamp.min(end),
                    None => end,
                };
                if w_end <= w_start {
                    continue;
                }
                let window_joules =
                    integrate(power, (w_start, w_end), IntegrationMethod::ZeroOrder)?.joules();
                grams += window_joules / JOULES_PER_KWH * s.intensity;
            }
            grams
        }
    };

    let alignment: Alignment = strategy.into();
    energy.add_note(format!(
        "emissions aligned by {} against {} intensity for region {}",
        match alignment {
            Alignment::UpsampleIntensity => "upsampling intensity",
            Alignment::DownsamplePower => "downsampling power",
            Alignment::Constant => "a constant intensity",
        },
        ci.basis(),
        ci.region(),
    ));
    if let Some(note) = granularity_note(power, ci) {
        energy.add_note(note);
    }

    Ok(EmissionsEstimate { grams_co2: grams, energy, intensity_basis: ci.basis(), alignment })
}

/// Zero-order power value at time `t` (trace coverage already checked).
fn power_at(power: &PowerTrace, t: f64) -> f64 {
    let samples = power.samples();
    let pos = samples.partition_point(|s| s.timestamp <= t);
    samples[pos.max(1) - 1].value
}

/// Both strategies assume power is the finer signal. When it is actually
/// coarser than the intensity grid, held power values smear real
/// variation across intensity windows; flag it rather than refusing.
fn granularity_note(power: &PowerTrace, ci: &CarbonIntensitySeries) -> Option<String> {
    let power_gap = crate::telemetry::diagnose(power).min_interval?;
    let ci_gap = ci.median_gap()?;
    (power_gap > ci_gap).then(|| {
        format!(
            "power sampling ({power_gap} s) is coarser than the intensity \
             grid ({ci_gap} s); alignment holds power constant across \
             intensity windows"
        )
    })
}

/// Read an intensity series from CSV with header
/// `timestamp,intensity_gco2_per_kwh,region,basis`. Region and basis must
/// agree across rows.
pub fn read_intensity_csv<R: Read>(reader: R) -> Result<CarbonIntensitySeries> {
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
    let ts_idx = col("timestamp")?;
    let val_idx = col("intensity_gco2_per_kwh")?;
    let region_idx = col("region")?;
    let basis_idx = col("basis")?;

    let mut samples = Vec::new();
    let mut identity: Option<(String, IntensityBasis)> = None;
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let wrap = |e: Error| Error::Parse { line, message: e.to_string() };

        let timestamp = parse_timestamp(record.get(ts_idx).unwrap_or("")).map_err(wrap)?;
        let raw_value = record.get(val_idx).unwrap_or("");
        let intensity: f64 = raw_value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("intensity {raw_value:?} is not a number"),
        })?;
        let region = record.get(region_idx).unwrap_or("").to_string();
        let basis: IntensityBasis = record.get(basis_idx).unwrap_or("").parse().map_err(wrap)?;

        match &identity {
            None => identity = Some((region, basis)),
            Some((r, b)) => {
                if *r != region || *b != basis {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "intensity series identity changed mid-file: \
                             expected {r}/{b}, got {region}/{basis}"
                        ),
                    });
                }
            }
        }
        samples.push(IntensitySample { timestamp, intensity });
    }
    let (region, basis) = identity.ok_or(Error::NoSamples)?;
    samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    CarbonIntensitySeries::new(samples, region, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{EnergyBasis, EstimationMethod, Scope};
    use crate::telemetry::{HierarchyLevel, Sample, SampleKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn power_trace(points: &[(f64, f64)]) -> PowerTrace {
        PowerTrace::new(
            "node1",
            HierarchyLevel::Node,
            SampleKind::InstantaneousPower,
            points.iter().map(|&(timestamp, value)| Sample { timestamp, value }).collect(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn estimate(joules: f64, duration: f64) -> EnergyEstimate {
        EnergyEstimate::new(
            joules,
            (0.0, duration),
            EstimationMethod::ZeroOrder,
            Scope { level: HierarchyLevel::Node, sources: vec!["node1".into()] },
            EnergyBasis::Absolute,
        )
        .unwrap()
    }

    fn series(points: &[(f64, f64)]) -> CarbonIntensitySeries {
        CarbonIntensitySeries::new(
            points.iter().map(|&(timestamp, intensity)| IntensitySample { timestamp, intensity }).collect(),
            "TEST",
            IntensityBasis::Realtime,
        )
        .unwrap()
    }

    #[test]
    fn one_kwh_at_400() {
        let e = emissions_constant(&estimate(3.6e6, 3600.0), 400.0, IntensityBasis::YearlyAverage)
            .unwrap();
        assert_eq!(e.grams_co2, 400.0);
        assert_eq!(e.alignment, Alignment::Constant);
        assert_eq!(e.intensity_basis, IntensityBasis::YearlyAverage);
    }

    #[test]
    fn zero_energy_zero_grams() {
        let e = emissions_constant(&estimate(0.0, 60.0), 400.0, IntensityBasis::YearlyAverage)
            .unwrap();
        assert_eq!(e.grams_co2, 0.0);
    }

    #[test]
    fn two_kwh_at_250() {
        let e = emissions_constant(&estimate(7.2e6, 7200.0), 250.0, IntensityBasis::YearlyAverage)
            .unwrap();
        assert_eq!(e.grams_co2, 500.0);
    }

    #[test]
    fn constant_rejects_bad_inputs() {
        assert!(emissions_constant(&estimate(1.0, 1.0), -5.0, IntensityBasis::Realtime).is_err());

        let negative_marginal = EnergyEstimate::new(
            -100.0,
            (0.0, 10.0),
            EstimationMethod::ZeroOrder,
            Scope { level: HierarchyLevel::Node, sources: vec!["n".into()] },
            EnergyBasis::Marginal,
        )
        .unwrap();
        assert!(emissions_constant(&negative_marginal, 400.0, IntensityBasis::Realtime).is_err());
    }

    #[test]
    fn constant_series_either_strategy() {
        // 100 W for an hour is 0.1 kWh; at 400 g/kWh that is 40 g.
        let power = power_trace(&[(0.0, 100.0), (3600.0, 100.0)]);
        let ci = series(&[(0.0, 400.0)]);
        for strategy in [AlignmentStrategy::UpsampleIntensity, AlignmentStrategy::DownsamplePower] {
            let e = emissions_timeseries(&power, &ci, (0.0, 3600.0), strategy).unwrap();
            assert_relative_eq!(e.grams_co2, 40.0, max_relative = 1e-12);
            assert_eq!(e.alignment, strategy.into());
            assert_relative_eq!(e.energy.joules(), 360_000.0);
        }
    }

    #[test]
    fn two_intensity_windows() {
        // Half an hour at 200 g/kWh and half at 600 g/kWh over constant
        // 100 W: 0.05 kWh × 200 + 0.05 kWh × 600.
        let power = power_trace(&[(0.0, 100.0), (3600.0, 100.0)]);
        let ci = series(&[(0.0, 200.0), (1800.0, 600.0)]);
        for strategy in [AlignmentStrategy::UpsampleIntensity, AlignmentStrategy::DownsamplePower] {
            let e = emissions_timeseries(&power, &ci, (0.0, 3600.0), strategy).unwrap();
            assert_relative_eq!(e.grams_co2, 40.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_power_zero_grams() {
        let power = power_trace(&[(0.0, 0.0), (3600.0, 0.0)]);
        let ci = series(&[(0.0, 999.0)]);
        let e = emissions_timeseries(
            &power,
            &ci,
            (0.0, 3600.0),
            AlignmentStrategy::UpsampleIntensity,
        )
        .unwrap();
        assert_eq!(e.grams_co2, 0.0);
    }

    #[test]
    fn intensity_postdating_start_is_uncovered() {
        let power = power_trace(&[(0.0, 100.0), (3600.0, 100.0)]);
        let late = series(&[(600.0, 400.0)]);
        let err = emissions_timeseries(
            &power,
            &late,
            (0.0, 3600.0),
            AlignmentStrategy::DownsamplePower,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotCovered { start: 0.0, .. }));
    }

    #[test]
    fn power_coverage_required() {
        let power = power_trace(&[(0.0, 100.0), (60.0, 100.0)]);
        let ci = series(&[(0.0, 400.0)]);
        assert!(matches!(
            emissions_timeseries(&power, &ci, (0.0, 3600.0), AlignmentStrategy::UpsampleIntensity),
            Err(Error::NotCovered { .. })
        ));
    }

    #[test]
    fn intensity_changes_mid_power_sample() {
        // Intensity flips at t=30 inside the single 60 s power segment;
        // upsampling must split that segment, not hold one value across it.
        let power = power_trace(&[(0.0, 120.0), (60.0, 120.0)]);
        let ci = series(&[(0.0, 100.0), (30.0, 500.0)]);
        let e = emissions_timeseries(
            &power,
            &ci,
            (0.0, 60.0),
            AlignmentStrategy::UpsampleIntensity,
        )
        .unwrap();
        let expected = 120.0 * 30.0 / JOULES_PER_KWH * 100.0 + 120.0 * 30.0 / JOULES_PER_KWH * 500.0;
        assert_relative_eq!(e.grams_co2, expected, max_relative = 1e-12);
    }

    #[test]
    fn coarse_power_upsampling_gets_a_note() {
        // Power sampled every 600 s against a 300 s intensity grid.
        let power = power_trace(&[(0.0, 100.0), (600.0, 100.0), (1200.0, 100.0)]);
        let points: Vec<(f64, f64)> = (0..5).map(|i| (i as f64 * 300.0, 400.0)).collect();
        let ci = series(&points);
        let e = emissions_timeseries(
            &power,
            &ci,
            (0.0, 1200.0),
            AlignmentStrategy::UpsampleIntensity,
        )
        .unwrap();
        assert!(e.energy.notes().iter().any(|n| n.contains("coarser")));
    }

    #[test]
    fn intensity_csv_parses() {
        let data = "timestamp,intensity_gco2_per_kwh,region,basis\n\
                    0,200,DE,realtime\n\
                    1800,600,DE,realtime\n";
        let ci = read_intensity_csv(data.as_bytes()).unwrap();
        assert_eq!(ci.region(), "DE");
        assert_eq!(ci.basis(), IntensityBasis::Realtime);
        assert_eq!(ci.samples().len(), 2);
        assert_eq!(ci.samples()[1].intensity, 600.0);
    }

    #[test]
    fn intensity_csv_rejects_inconsistency() {
        let mixed_region = "timestamp,intensity_gco2_per_kwh,region,basis\n\
                            0,200,DE,realtime\n1800,600,FR,realtime\n";
        assert!(read_intensity_csv(mixed_region.as_bytes()).is_err());

        let bad_basis = "timestamp,intensity_gco2_per_kwh,region,basis\n0,200,DE,hourly\n";
        assert!(read_intensity_csv(bad_basis.as_bytes()).is_err());

        let missing_col = "timestamp,grams,region,basis\n0,200,DE,realtime\n";
        assert!(matches!(
            read_intensity_csv(missing_col.as_bytes()),
            Err(Error::MissingColumn { .. })
        ));

        let empty = "timestamp,intensity_gco2_per_kwh,region,basis\n";
        assert!(matches!(read_intensity_csv(empty.as_bytes()), Err(Error::NoSamples)));
    }

    #[test]
    fn series_invariants() {
        assert!(series_result(&[(0.0, 400.0), (0.0, 500.0)]).is_err());
        assert!(series_result(&[(0.0, -1.0)]).is_err());
        assert!(series_result(&[]).is_err());
    }

    fn series_result(points: &[(f64, f64)]) -> Result<CarbonIntensitySeries> {
        CarbonIntensitySeries::new(
            points.iter().map(|&(timestamp, intensity)| IntensitySample { timestamp, intensity }).collect(),
            "TEST",
            IntensityBasis::Realtime,
        )
    }

    fn arbitrary_power() -> impl Strategy<Value = PowerTrace> {
        proptest::collection::vec(0.0f64..500.0, 3..20).prop_map(|values| {
            let points: Vec<(f64, f64)> =
                values.iter().enumerate().map(|(i, &v)| (i as f64 * 25.0, v)).collect();
            power_trace(&points)
        })
    }

    proptest! {
        #[test]
        fn constant_intensity_matches_constant_path(
            power in arbitrary_power(),
            intensity in 0.0f64..1000.0,
        ) {
            let (start, end) = power.span();
            let ci = series(&[(start, intensity)]);
            let energy = integrate(&power, (start, end), IntegrationMethod::ZeroOrder).unwrap();
            let reference =
                emissions_constant(&energy, intensity, IntensityBasis::Realtime).unwrap();
            for strategy in [AlignmentStrategy::UpsampleIntensity, AlignmentStrategy::DownsamplePower] {
                let e = emissions_timeseries(&power, &ci, (start, end), strategy).unwrap();
                prop_assert!(
                    (e.grams_co2 - reference.grams_co2).abs()
                        <= 1e-9 * reference.grams_co2.max(1e-12)
                );
            }
        }

        #[test]
        fn emissions_additive_over_adjacent_intervals(
            power in arbitrary_power(),
            split in 0.1f64..0.9,
        ) {
            let (start, end) = power.span();
            let mid = start + (end - start) * split;
            let ci = series(&[(start, 300.0), (start + 40.0, 500.0)]);
            for strategy in [AlignmentStrategy::UpsampleIntensity, AlignmentStrategy::DownsamplePower] {
                let left = emissions_timeseries(&power, &ci, (start, mid), strategy).unwrap();
                let right = emissions_timeseries(&power, &ci, (mid, end), strategy).unwrap();
                let whole = emissions_timeseries(&power, &ci, (start, end), strategy).unwrap();
                prop_assert!(
                    (left.grams_co2 + right.grams_co2 - whole.grams_co2).abs()
                        <= 1e-9 * whole.grams_co2.max(1.0)
                );
            }
        }

        #[test]
        fn doubling_power_doubles_emissions(power in arbitrary_power()) {
            // Factor-of-two scaling commutes with float rounding, so this
            // holds exactly, not just approximately.
            let doubled = PowerTrace::new(
                power.source_id().to_string(),
                power.level(),
                power.sample_kind(),
                power
                    .samples()
                    .iter()
                    .map(|s| Sample { timestamp: s.timestamp, value: s.value * 2.0 })
                    .collect(),
                power.metadata().clone(),
            )
            .unwrap();
            let (start, end) = power.span();
            let ci = series(&[(start, 300.0), (start + 40.0, 500.0)]);
            for strategy in [AlignmentStrategy::UpsampleIntensity, AlignmentStrategy::DownsamplePower] {
                let base = emissions_timeseries(&power, &ci, (start, end), strategy).unwrap();
                let twice = emissions_timeseries(&doubled, &ci, (start, end), strategy).unwrap();
                prop_assert_eq!(twice.grams_co2, base.grams_co2 * 2.0);
            }
        }
    }
}
