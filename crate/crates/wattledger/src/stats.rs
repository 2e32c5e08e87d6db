//! Repetition statistics: aggregate repeated energy measurements, compare
//! two conditions with a significance test, and warn when a trace has too
//! few samples to be trusted.
//!
//! A single run proves nothing — readings vary with temperature, load
//! placement, and background activity — so the unit of evidence here is a
//! set of repetitions, and comparisons come with uncertainty attached.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::estimation::{EnergyBasis, EnergyEstimate, EstimationMethod};
use crate::telemetry::PowerTrace;

/// Repeated measurements of one workload under one condition.
///
/// All estimates must share basis and method; mixing methodologies within
/// a set would make its spread meaningless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRunSet")]
pub struct RunSet {
    label: String,
    estimates: Vec<EnergyEstimate>,
    condition: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RawRunSet {
    label: String,
    estimates: Vec<EnergyEstimate>,
    #[serde(default)]
    condition: BTreeMap<String, String>,
}

impl TryFrom<RawRunSet> for RunSet {
    type Error = Error;
    fn try_from(raw: RawRunSet) -> Result<Self> {
        RunSet::new(raw.label, raw.estimates, raw.condition)
    }
}

impl RunSet {
    pub fn new(
        label: impl Into<String>,
        estimates: Vec<EnergyEstimate>,
        condition: BTreeMap<String, String>,
    ) -> Result<Self> {
        if estimates.is_empty() {
            return Err(Error::NoSamples);
        }
        let basis = estimates[0].basis();
        let method = estimates[0].method();
        for e in &estimates {
            if e.basis() != basis || e.method() != method {
                return Err(Error::ScopeMismatch(format!(
                    "run set mixes {}/{} with {}/{} estimates; a set must \
                     share one methodology",
                    basis,
                    method,
                    e.basis(),
                    e.method()
                )));
            }
        }
        Ok(RunSet { label: label.into(), estimates, condition })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn estimates(&self) -> &[EnergyEstimate] {
        &self.estimates
    }

    pub fn condition(&self) -> &BTreeMap<String, String> {
        &self.condition
    }

    pub fn basis(&self) -> EnergyBasis {
        self.estimates[0].basis()
    }

    pub fn method(&self) -> EstimationMethod {
        self.estimates[0].method()
    }

    fn joules(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.joules()).collect()
    }
}

/// Mean, spread, and confidence interval of a run set's energies.
/// `stddev` and `ci95` need at least two repetitions and are absent below
/// that.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean_joules: f64,
    pub stddev_joules: Option<f64>,
    pub ci95_joules: Option<(f64, f64)>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the n−1 denominator.
fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

fn t_quantile(df: f64, p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df > 0 by construction")
        .inverse_cdf(p)
}

/// Summarize a run set: mean, sample standard deviation, and a Student-t
/// 95% confidence interval for the mean.
pub fn summarize(rs: &RunSet) -> Summary {
    let values = rs.joules();
    let n = values.len();
    let mean_joules = mean(&values);
    if n < 2 {
        return Summary { n, mean_joules, stddev_joules: None, ci95_joules: None };
    }
    let sd = variance(&values).sqrt();
    let half_width = if sd == 0.0 {
        // Degenerate but common with simulated traces: zero spread means
        // a zero-width interval, not a NaN from 0 × ∞ edge cases.
        0.0
    } else {
        t_quantile((n - 1) as f64, 0.975) * sd / (n as f64).sqrt()
    };
    Summary {
        n,
        mean_joules,
        stddev_joules: Some(sd),
        ci95_joules: Some((mean_joules - half_width, mean_joules + half_width)),
    }
}

/// Which significance test to run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Welch's unequal-variance t-test. The default: node classes differ
    /// in variance, and Welch does not assume they match.
    WelchT,
    /// Seeded Monte-Carlo permutation test of the mean difference; usable
    /// down to one repetition per set and free of normality assumptions.
    Permutation { rounds: u32, seed: u64 },
}

/// Name of the test that produced a [`ComparisonResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    WelchT,
    Permutation,
}

/// Outcome of comparing two run sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// mean(a) − mean(b) in joules.
    pub mean_diff_joules: f64,
    /// Confidence interval for the mean difference at the requested level
    /// (Welch-style t interval in both tests; degenerate when a set has a
    /// single repetition).
    pub ci95: (f64, f64),
    pub p_value: f64,
    pub test: TestName,
    pub n: (usize, usize),
}

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Default Monte-Carlo rounds for the permutation test.
pub const DEFAULT_PERMUTATION_ROUNDS: u32 = 10_000;

/// Compare two run sets' mean energies.
///
/// Only results measured with the same methodology are comparable, so the
/// sets must share basis and method. Degenerate inputs follow documented
/// conventions: zero variance in both sets yields p = 1 for equal means
/// and p = 0 for unequal means under Welch's test.
pub fn compare(a: &RunSet, b: &RunSet, test: TestKind, alpha: f64) -> Result<ComparisonResult> {
    if a.basis() != b.basis() || a.method() != b.method() {
        return Err(Error::ScopeMismatch(format!(
            "cannot compare {}/{} against {}/{}; only compare results \
             measured with the same methodology and scope",
            a.basis(),
            a.method(),
            b.basis(),
            b.method()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }

    let xs = a.joules();
    let ys = b.joules();
    let (na, nb) = (xs.len(), ys.len());
    let mean_diff = mean(&xs) - mean(&ys);

    match test {
        TestKind::WelchT => {
            if na < 2 || nb < 2 {
                return Err(Error::InvalidInput(format!(
                    "Welch's t-test needs at least 2 repetitions per set, got {na} and {nb}"
                )));
            }
            let (va, vb) = (variance(&xs), variance(&ys));
            let se2 = va / na as f64 + vb / nb as f64;

            if se2 == 0.0 {
                // Both sets constant. Equal means carry no evidence of a
                // difference; unequal constant means differ trivially.
                let p = if mean_diff == 0.0 { 1.0 } else { 0.0 };
                return Ok(ComparisonResult {
                    mean_diff_joules: mean_diff,
                    ci95: (mean_diff, mean_diff),
                    p_value: p,
                    test: TestName::WelchT,
                    n: (na, nb),
                });
            }

            let se = se2.sqrt();
            let t = mean_diff / se;
            // Welch–Satterthwaite degrees of freedom.
            let df = se2 * se2
                / ((va / na as f64).powi(2) / (na as f64 - 1.0)
                    + (vb / nb as f64).powi(2) / (nb as f64 - 1.0));
            // t == 0 (e.g. comparing a set against itself) is exactly "no
            // difference"; bypass the CDF so p is 1.0, not 1 − 2ε.
            let p = if t == 0.0 {
                1.0
            } else {
                let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
                2.0 * (1.0 - dist.cdf(t.abs()))
            };
            let half = t_quantile(df, 1.0 - alpha / 2.0) * se;
            Ok(ComparisonResult {
                mean_diff_joules: mean_diff,
                ci95: (mean_diff - half, mean_diff + half),
                p_value: p.clamp(0.0, 1.0),
                test: TestName::WelchT,
                n: (na, nb),
            })
        }
        TestKind::Permutation { rounds, seed } => {
            if rounds == 0 {
                return Err(Error::InvalidInput("permutation test needs rounds >= 1".into()));
            }
            let p = permutation_p(&xs, &ys, rounds, seed);
            // The permutation test gives the p-value; the interval still
            // comes from the t construction when both spreads exist.
            let ci95 = if na >= 2 && nb >= 2 {
                let se2 = variance(&xs) / na as f64 + variance(&ys) / nb as f64;
                if se2 > 0.0 {
                    let se = se2.sqrt();
                    let df = se2 * se2
                        / ((variance(&xs) / na as f64).powi(2) / (na as f64 - 1.0)
                            + (variance(&ys) / nb as f64).powi(2) / (nb as f64 - 1.0));
                    let half = t_quantile(df, 1.0 - alpha / 2.0) * se;
                    (mean_diff - half, mean_diff + half)
                } else {
                    (mean_diff, mean_diff)
                }
            } else {
                (mean_diff, mean_diff)
            };
            Ok(ComparisonResult {
                mean_diff_joules: mean_diff,
                ci95,
                p_value: p,
                test: TestName::Permutation,
                n: (na, nb),
            })
        }
    }
}

/// Monte-Carlo permutation p-value for the absolute mean difference.
///
/// The pooled values are sorted before shuffling and the smaller group
/// size is always drawn first, so the result is bit-identical no matter
/// which set is passed as `a` — the comparison is symmetric, and so is
/// its p-value.
fn permutation_p(xs: &[f64], ys: &[f64], rounds: u32, seed: u64) -> f64 {
    let observed = (mean(xs) - mean(ys)).abs();
    let mut pool: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
    pool.sort_by(f64::total_cmp);
    let n_small = xs.len().min(ys.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least_as_extreme: u64 = 0;
    for _ in 0..rounds {
        pool.shuffle(&mut rng);
        let g1 = mean(&pool[..n_small]);
        let g2 = mean(&pool[n_small..]);
        if (g1 - g2).abs() >= observed {
            at_least_as_extreme += 1;
        }
    }
    // Add-one estimator: the observed labelling counts as one permutation,
    // keeping the p-value strictly positive.
    (1.0 + at_least_as_extreme as f64) / (f64::from(rounds) + 1.0)
}

/// Sampling-adequacy verdict for a measurement window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingAdequacy {
    /// Samples with timestamps inside the measured span (inclusive).
    pub samples_in_window: usize,
    /// Smallest adjacent sampling interval inside the window; `None` when
    /// fewer than two samples land there.
    pub min_interval: Option<f64>,
    pub warnings: Vec<String>,
}

/// Sampling interval below which the sampler itself starts to perturb
/// the measurement.
pub const MIN_SAFE_INTERVAL_S: f64 = 0.1;

/// Spans shorter than this are dominated by measurement influence rather
/// than the code under test.
pub const MIN_MEASURABLE_SPAN_S: f64 = 0.1;

/// Below this many samples, a transient spike can dominate or vanish
/// entirely; repetitions are needed.
pub const MIN_SAMPLES_IN_WINDOW: usize = 10;

/// Check whether a trace samples a measured span densely enough to trust.
/// Never fails; everything it finds is a warning, not an error.
pub fn check_sampling(trace: &PowerTrace, measured_span: (f64, f64)) -> SamplingAdequacy {
    let (start, end) = measured_span;
    let mut warnings = Vec::new();

    let in_window: Vec<f64> = trace
        .samples()
        .iter()
        .map(|s| s.timestamp)
        .filter(|&t| t >= start && t <= end)
        .collect();
    let samples_in_window = in_window.len();
    let min_interval = in_window
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(None, |acc: Option<f64>, gap| Some(acc.map_or(gap, |m: f64| m.min(gap))));

    let span = end - start;
    if span < MIN_MEASURABLE_SPAN_S {
        warnings.push(format!(
            "measured span {span} s is below {MIN_MEASURABLE_SPAN_S} s; runs this \
             short are strongly influenced by the measurement itself — repeat \
             the workload in a loop instead"
        ));
    }
    if let Some(mi) = min_interval {
        if mi < MIN_SAFE_INTERVAL_S {
            warnings.push(format!(
                "sampling interval {mi} s is below {MIN_SAFE_INTERVAL_S} s; the \
                 sampler may perturb what it measures"
            ));
        }
    }
    if samples_in_window < MIN_SAMPLES_IN_WINDOW {
        warnings.push(format!(
            "only {samples_in_window} samples fall in the measured window \
             (< {MIN_SAMPLES_IN_WINDOW}); transient spikes can alias badly — \
             sample faster or measure repetitions"
        ));
    }

    SamplingAdequacy { samples_in_window, min_interval, warnings }
}
