//! Relative throughput, phase censuses and decimal rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{ExecutionTrace, InstanceParams, LengthClass, Length, PhaseKind, Rational, Time, TransmissionRecord};
use crate::offline::{opt_series, OfflineInstance, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenominatorKind {
    ExactOpt,
    ConstructionOff,
}

impl DenominatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DenominatorKind::ExactOpt => "opt",
            DenominatorKind::ConstructionOff => "off",
        }
    }
}

impl fmt::Display for DenominatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DenominatorKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "opt" => Ok(DenominatorKind::ExactOpt),
            "off" => Ok(DenominatorKind::ConstructionOff),
            other => Err(MetricsError::UnknownDenominator(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("unknown denominator `{0}` (expected opt or off)")]
    UnknownDenominator(String),
    #[error("trace from adversary `{0}` has no OFF schedule")]
    MissingOff(String),
    #[error("trace from adversary `{0}` carries no phase annotations")]
    NoPhases(String),
    #[error("sample_every must be at least 1")]
    ZeroSampling,
    #[error("series is empty")]
    EmptySeries,
    #[error("window fraction must lie strictly between 0 and 1, got {0}")]
    BadWindow(Rational),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub t: Time,
    pub l_alg: Length,
    pub l_ref: Length,
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThroughputSeries {
    pub samples: Vec<Sample>,
    pub denominator: DenominatorKind,
}

impl ThroughputSeries {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// `l_alg / l_ref`, or 1 when nothing has been delivered by the reference.
pub fn ratio(l_alg: Length, l_ref: Length) -> Rational {
    if l_ref == 0 {
        Rational::from(1)
    } else {
        Rational::new(l_alg as i64, l_ref as i64)
    }
}

/// Cumulative successful length by each time in `times` (sorted ascending).
fn cumulative(records: &[TransmissionRecord], times: &[Time]) -> Vec<Length> {
    let mut ends: Vec<(Time, Length)> = records
        .iter()
        .filter(|r| r.is_success())
        .map(|r| (r.end, r.length))
        .collect();
    ends.sort_unstable();
    let mut out = Vec::with_capacity(times.len());
    let (mut i, mut sum) = (0, 0);
    for &t in times {
        while i < ends.len() && ends[i].0 <= t {
            sum += ends[i].1;
            i += 1;
        }
        out.push(sum);
    }
    out
}

/// Samples at arbitrary sorted times.
pub fn throughput_at(
    trace: &ExecutionTrace,
    denominator: DenominatorKind,
    times: &[Time],
) -> Result<Vec<Sample>, MetricsError> {
    let alg = cumulative(&trace.transmissions, times);
    let reference = match denominator {
        DenominatorKind::ConstructionOff => {
            let off = trace
                .off_transmissions
                .as_ref()
                .ok_or_else(|| MetricsError::MissingOff(trace.adversary.clone()))?;
            cumulative(off, times)
        }
        DenominatorKind::ExactOpt => {
            let instance = OfflineInstance::from_trace(trace)?;
            opt_series(&instance, &trace.params, times)?
        }
    };
    Ok(times
        .iter()
        .zip(alg.into_iter().zip(reference))
        .map(|(&t, (l_alg, l_ref))| Sample {
            t,
            l_alg,
            l_ref,
            ratio: ratio(l_alg, l_ref),
        })
        .collect())
}

/// Samples at `sample_every, 2·sample_every, ...` up to the horizon.
pub fn relative_throughput(
    trace: &ExecutionTrace,
    denominator: DenominatorKind,
    sample_every: Time,
) -> Result<ThroughputSeries, MetricsError> {
    if sample_every == 0 {
        return Err(MetricsError::ZeroSampling);
    }
    let times: Vec<Time> = (1..=trace.horizon / sample_every).map(|k| k * sample_every).collect();
    Ok(ThroughputSeries {
        samples: throughput_at(trace, denominator, &times)?,
        denominator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LongRunEstimate {
    pub estimate: Rational,
    pub converged: bool,
}

/// Final ratio, flagged as converged when the trailing `window_fraction` of
/// samples spans at most 0.01.
pub fn long_run_estimate(series: &ThroughputSeries, window_fraction: Rational) -> Result<LongRunEstimate, MetricsError> {
    let last = series.last().ok_or(MetricsError::EmptySeries)?;
    if window_fraction <= Rational::zero() || window_fraction >= Rational::from(1) {
        return Err(MetricsError::BadWindow(window_fraction));
    }
    let n = series.samples.len() as i64;
    let take = (window_fraction * Rational::from(n)).ceil().to_integer().clamp(1, n) as usize;
    let tail = &series.samples[series.samples.len() - take..];
    let max = tail.iter().map(|s| s.ratio).max().expect("non-empty");
    let min = tail.iter().map(|s| s.ratio).min().expect("non-empty");
    Ok(LongRunEstimate {
        estimate: last.ratio,
        converged: max - min <= Rational::new(1, 100),
    })
}

/// Across-seed mean. Exact sums of many unrelated denominators overflow, so
/// each term is truncated to a multiple of 10^-15 first; the result is
/// within 10^-15 below the true mean.
pub fn mean_ratio(ratios: &[Rational]) -> Option<Rational> {
    const SCALE: i128 = 1_000_000_000_000_000;
    if ratios.is_empty() {
        return None;
    }
    let sum: i128 = ratios
        .iter()
        .map(|r| (*r.numer() as i128 * SCALE).div_euclid(*r.denom() as i128))
        .sum();
    let den = SCALE * ratios.len() as i128;
    let g = gcd(sum.unsigned_abs(), den as u128) as i128;
    Some(Rational::new((sum / g) as i64, (den / g) as i64))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Phase counts of the two phase constructions. Keys are `j`: short packets
/// completed by the sender (`p2`, `r_2a`) or by OFF (`r_1a`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseCensus {
    pub p1: u64,
    pub p2: BTreeMap<u64, u64>,
    pub r_1a: BTreeMap<u64, u64>,
    pub r_2a: BTreeMap<u64, u64>,
}

fn weighted(m: &BTreeMap<u64, u64>) -> i64 {
    m.iter().map(|(j, c)| (j * c) as i64).sum()
}

fn total(m: &BTreeMap<u64, u64>) -> i64 {
    m.values().sum::<u64>() as i64
}

impl PhaseCensus {
    /// `l_min·Σ j·p2(j) / (l_max·Σ p2(j) + l_min·gamma_hat·p1)`.
    pub fn adversarial_ratio(&self, params: &InstanceParams) -> Rational {
        let (l_min, l_max) = (params.l_min() as i64, params.l_max() as i64);
        let num = l_min * weighted(&self.p2);
        let den = l_max * total(&self.p2) + l_min * params.gamma_hat() as i64 * self.p1 as i64;
        ratio(num as Length, den as Length)
    }

    /// `l_min·Σ j·r_2a(j) / (l_max·Σ r_2a(j) + l_min·Σ j·r_1a(j))`.
    pub fn stochastic_ratio(&self, params: &InstanceParams) -> Rational {
        let (l_min, l_max) = (params.l_min() as i64, params.l_max() as i64);
        let num = l_min * weighted(&self.r_2a);
        let den = l_max * total(&self.r_2a) + l_min * weighted(&self.r_1a);
        ratio(num as Length, den as Length)
    }

    fn ratio_for(&self, adversary: &str, params: &InstanceParams) -> Rational {
        if adversary == "stochastic" {
            self.stochastic_ratio(params)
        } else {
            self.adversarial_ratio(params)
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == PhaseCensus::default()
    }
}

fn check_phased(trace: &ExecutionTrace) -> Result<(), MetricsError> {
    match trace.adversary.as_str() {
        "adv-arrival" | "stochastic" => Ok(()),
        other => Err(MetricsError::NoPhases(other.to_string())),
    }
}

struct ShortCompletions(Vec<Time>);

impl ShortCompletions {
    fn new(trace: &ExecutionTrace) -> Self {
        let mut ends: Vec<Time> = trace
            .transmissions
            .iter()
            .filter(|r| r.is_success() && trace.params.class_of(r.length) == Some(LengthClass::Short))
            .map(|r| r.end)
            .collect();
        ends.sort_unstable();
        Self(ends)
    }

    /// Completions in `(start, end]`.
    fn within(&self, start: Time, end: Time) -> u64 {
        (self.0.partition_point(|&e| e <= end) - self.0.partition_point(|&e| e <= start)) as u64
    }
}

fn record(census: &mut PhaseCensus, kind: PhaseKind, j: u64) {
    match kind {
        PhaseKind::LongOpening => census.p1 += 1,
        PhaseKind::ShortOpening => *census.p2.entry(j).or_default() += 1,
        PhaseKind::LongOpeningOffShort { off_short } => *census.r_1a.entry(off_short).or_default() += 1,
        PhaseKind::ShortOpeningOffLong => *census.r_2a.entry(j).or_default() += 1,
        PhaseKind::LongOpeningEmpty | PhaseKind::ShortOpeningEmpty => {}
    }
}

/// Counts every closed phase of a phase-construction trace.
pub fn phase_census(trace: &ExecutionTrace) -> Result<PhaseCensus, MetricsError> {
    check_phased(trace)?;
    let shorts = ShortCompletions::new(trace);
    let mut census = PhaseCensus::default();
    for p in &trace.phases {
        record(&mut census, p.kind, shorts.within(p.start, p.end));
    }
    Ok(census)
}

/// At one phase boundary: the closed-form ratio from the census so far and
/// the measured ratio against OFF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryCheck {
    pub t: Time,
    pub census_ratio: Rational,
    pub measured_ratio: Rational,
}

pub fn census_boundary_checks(trace: &ExecutionTrace) -> Result<Vec<BoundaryCheck>, MetricsError> {
    check_phased(trace)?;
    let shorts = ShortCompletions::new(trace);
    let times: Vec<Time> = trace.phases.iter().map(|p| p.end).collect();
    let measured = throughput_at(trace, DenominatorKind::ConstructionOff, &times)?;
    let mut census = PhaseCensus::default();
    Ok(trace
        .phases
        .iter()
        .zip(measured)
        .map(|(p, m)| {
            record(&mut census, p.kind, shorts.within(p.start, p.end));
            BoundaryCheck {
                t: p.end,
                census_ratio: census.ratio_for(&trace.adversary, &trace.params),
                measured_ratio: m.ratio,
            }
        })
        .collect())
}

/// Renders `r` with 12 significant digits, rounding half to even.
pub fn to_decimal(r: Rational) -> String {
    const DIGITS: i32 = 12;
    if r.is_zero() {
        return "0".to_string();
    }
    let sign = if r.is_negative() { "-" } else { "" };
    let n = r.numer().unsigned_abs() as u128;
    let d = r.denom().unsigned_abs() as u128;
    let pow = |e: i32| 10u128.pow(e as u32);
    // k = floor(log10(n / d))
    let mut k: i32 = 0;
    if n >= d {
        while n >= d * pow(k + 1) {
            k += 1;
        }
    } else {
        k = -1;
        while n * pow(-k) < d {
            k -= 1;
        }
    }
    let shift = DIGITS - 1 - k;
    let (num, den) = if shift >= 0 { (n * pow(shift), d) } else { (n, d * pow(-shift)) };
    let mut q = num / den;
    let rem = num % den;
    if 2 * rem > den || (2 * rem == den && q % 2 == 1) {
        q += 1;
    }
    if q == pow(DIGITS) {
        q /= 10;
        k += 1;
    }
    let digits = q.to_string();
    let body = if k >= DIGITS - 1 {
        format!("{digits}{}", "0".repeat((k - (DIGITS - 1)) as usize))
    } else if k >= 0 {
        let (int, frac) = digits.split_at(k as usize + 1);
        format!("{int}.{frac}")
    } else {
        format!("0.{}{digits}", "0".repeat((-k - 1) as usize))
    };
    format!("{sign}{body}")
}
