//! Domain types shared by every other module: instance parameters, packets,
//! error events, transmission records and execution traces.
//!
//! Time is an integer number of abstract units and a packet of length `l`
//! occupies the link for exactly `l` units. Events that share a tick are
//! processed in the fixed order given by [`EventStage`].

use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

/// Exact rational used for every ratio and threshold.
pub type Rational = Ratio<i64>;
/// Abstract integer time units.
pub type Time = u64;
/// Packet lengths, in the same units as [`Time`].
pub type Length = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("l_min must be positive")]
    ZeroLength,
    #[error("l_min ({l_min}) exceeds l_max ({l_max})")]
    Inverted { l_min: Length, l_max: Length },
}

/// The pair of packet lengths and the quantities derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceParams {
    l_min: Length,
    l_max: Length,
    rho: Rational,
    gamma_bar: u64,
    gamma_hat: u64,
}

/// Builds [`InstanceParams`] for the length pair `(l_min, l_max)`.
pub fn derive_params(l_min: Length, l_max: Length) -> Result<InstanceParams, ParamsError> {
    InstanceParams::new(l_min, l_max)
}

impl InstanceParams {
    pub fn new(l_min: Length, l_max: Length) -> Result<Self, ParamsError> {
        if l_min == 0 {
            return Err(ParamsError::ZeroLength);
        }
        if l_min > l_max {
            return Err(ParamsError::Inverted { l_min, l_max });
        }
        let gamma_bar = l_max / l_min;
        let gamma_hat = l_max.div_ceil(l_min) - 1;
        Ok(Self {
            l_min,
            l_max,
            rho: Rational::new(l_max as i64, l_min as i64),
            gamma_bar,
            gamma_hat,
        })
    }

    pub fn l_min(&self) -> Length {
        self.l_min
    }

    pub fn l_max(&self) -> Length {
        self.l_max
    }

    /// `l_max / l_min`, exact.
    pub fn rho(&self) -> Rational {
        self.rho
    }

    /// `floor(rho)`: how many short packets fit in the time of one long one.
    pub fn gamma_bar(&self) -> u64 {
        self.gamma_bar
    }

    /// `ceil(rho) - 1`: the largest count of short packets that ends strictly
    /// before one long packet would.
    pub fn gamma_hat(&self) -> u64 {
        self.gamma_hat
    }

    pub fn single_length(&self) -> bool {
        self.l_min == self.l_max
    }

    /// Class of a packet length. With a single length every packet is `Short`.
    pub fn class_of(&self, length: Length) -> Option<LengthClass> {
        if length == self.l_min {
            Some(LengthClass::Short)
        } else if length == self.l_max {
            Some(LengthClass::Long)
        } else {
            None
        }
    }

    pub fn length_of(&self, class: LengthClass) -> Length {
        match class {
            LengthClass::Short => self.l_min,
            LengthClass::Long => self.l_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LengthClass {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    pub id: PacketId,
    pub length: Length,
    pub arrival_time: Time,
}

impl Packet {
    pub fn new(id: u64, length: Length, arrival_time: Time) -> Self {
        Self {
            id: PacketId(id),
            length,
            arrival_time,
        }
    }
}

/// Position of an error within its tick relative to the scheduling decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    /// Before arrivals and the scheduling decision of the tick.
    PreSchedule,
    /// Right after the scheduling decision: hits a packet started at this tick.
    PostSchedule,
}

/// An instantaneous link error. Ordered by `(time, slot)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ErrorEvent {
    pub time: Time,
    pub slot: Slot,
}

impl ErrorEvent {
    pub fn pre(time: Time) -> Self {
        Self {
            time,
            slot: Slot::PreSchedule,
        }
    }

    pub fn post(time: Time) -> Self {
        Self {
            time,
            slot: Slot::PostSchedule,
        }
    }

    /// Position on a doubled time axis: `2t` before the decision, `2t + 1`
    /// after it. A transmission over `[s, s + l)` occupies `(2s, 2s + 2l)`.
    pub fn doubled(&self) -> u64 {
        match self.slot {
            Slot::PreSchedule => 2 * self.time,
            Slot::PostSchedule => 2 * self.time + 1,
        }
    }

    pub fn stage(&self) -> EventStage {
        match self.slot {
            Slot::PreSchedule => EventStage::PreScheduleError,
            Slot::PostSchedule => EventStage::PostScheduleError,
        }
    }

    /// Earliest start time not preceded by this error within the same tick.
    pub fn next_start(&self) -> Time {
        self.doubled().div_ceil(2)
    }
}

/// Processing order of events that share a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventStage {
    Completion,
    PreScheduleError,
    Arrival,
    SchedulingDecision,
    PostScheduleError,
}

/// A point in the simulation's total event order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey {
    pub time: Time,
    pub stage: EventStage,
}

/// Whether `error` corrupts a transmission of `length` started at `start`.
///
/// A packet completing exactly at the error instant survives, and a packet
/// scheduled at the tick of a `PreSchedule` error is not affected by it.
pub fn error_corrupts(start: Time, length: Length, error: &ErrorEvent) -> bool {
    let d = error.doubled();
    2 * start < d && d < 2 * (start + length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackMode {
    /// The sender learns of a bit error the moment it happens.
    Instantaneous,
    /// The sender learns only once the full packet has been sent.
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Corrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransmissionRecord {
    pub packet_id: PacketId,
    pub length: Length,
    pub start: Time,
    pub end: Time,
    pub outcome: Outcome,
    pub corrupted_at: Option<Time>,
}

impl TransmissionRecord {
    pub fn success(packet: &Packet, start: Time) -> Self {
        Self {
            packet_id: packet.id,
            length: packet.length,
            start,
            end: start + packet.length,
            outcome: Outcome::Success,
            corrupted_at: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

/// How an adversarial construction classified a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    /// Online opened with a long packet; OFF sent the injected short ones.
    LongOpening,
    /// Online opened with a short packet; OFF sent one long packet.
    ShortOpening,
    /// Online opened long, OFF sent `off_short` pending short packets.
    LongOpeningOffShort { off_short: u64 },
    /// Online opened long, OFF had no short packet: zero-length phase.
    LongOpeningEmpty,
    /// Online opened short, OFF sent a pending long packet.
    ShortOpeningOffLong,
    /// Online opened short, OFF had no long packet: zero-length phase.
    ShortOpeningEmpty,
}

impl PhaseKind {
    pub fn is_productive(&self) -> bool {
        matches!(
            self,
            PhaseKind::LongOpening
                | PhaseKind::ShortOpening
                | PhaseKind::LongOpeningOffShort { .. }
                | PhaseKind::ShortOpeningOffLong
        )
    }
}

/// Annotation emitted by constructions that reason about phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseRecord {
    pub start: Time,
    /// Time of the link error closing the phase.
    pub end: Time,
    pub kind: PhaseKind,
}

/// Full record of one simulated execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub params: InstanceParams,
    pub feedback_mode: FeedbackMode,
    pub horizon: Time,
    pub scheduler: String,
    pub adversary: String,
    /// Every packet that arrived, ordered by `(arrival_time, id)`.
    pub arrivals: Vec<Packet>,
    /// Error events that took effect, in event order.
    pub errors: Vec<ErrorEvent>,
    /// Online transmissions in start order.
    pub transmissions: Vec<TransmissionRecord>,
    /// Companion schedule of the construction, when the adversary keeps one.
    pub off_transmissions: Option<Vec<TransmissionRecord>>,
    pub phases: Vec<PhaseRecord>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("transmission of packet {0} overlaps the previous one")]
    Overlap(PacketId),
    #[error("packet {0} transmitted but never arrived")]
    UnknownPacket(PacketId),
    #[error("packet {0} transmitted before its arrival")]
    BeforeArrival(PacketId),
    #[error("packet {0} recorded as successful but an error hits it")]
    HiddenCorruption(PacketId),
    #[error("duplicate packet id {0}")]
    DuplicateId(PacketId),
}

impl ExecutionTrace {
    /// Total successfully transmitted online length completed by `t`.
    pub fn online_length_by(&self, t: Time) -> Length {
        sum_completed(&self.transmissions, t)
    }

    pub fn off_length_by(&self, t: Time) -> Option<Length> {
        self.off_transmissions.as_ref().map(|tx| sum_completed(tx, t))
    }

    /// Checks the structural invariants of the online and OFF schedules.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut arrivals = std::collections::HashMap::with_capacity(self.arrivals.len());
        for p in &self.arrivals {
            if arrivals.insert(p.id, *p).is_some() {
                return Err(TraceError::DuplicateId(p.id));
            }
        }
        validate_schedule(&self.transmissions, &arrivals, &self.errors, false)?;
        if let Some(off) = &self.off_transmissions {
            validate_schedule(off, &arrivals, &self.errors, true)?;
        }
        Ok(())
    }
}

fn sum_completed(records: &[TransmissionRecord], t: Time) -> Length {
    records
        .iter()
        .filter(|r| r.is_success() && r.end <= t)
        .map(|r| r.length)
        .sum()
}

fn validate_schedule(
    records: &[TransmissionRecord],
    arrivals: &std::collections::HashMap<PacketId, Packet>,
    errors: &[ErrorEvent],
    all_success: bool,
) -> Result<(), TraceError> {
    let mut sorted: Vec<&TransmissionRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.start, r.end));
    let mut busy_until = 0;
    for r in sorted {
        if r.start < busy_until {
            return Err(TraceError::Overlap(r.packet_id));
        }
        busy_until = r.end;
        let packet = arrivals
            .get(&r.packet_id)
            .ok_or(TraceError::UnknownPacket(r.packet_id))?;
        if r.start < packet.arrival_time {
            return Err(TraceError::BeforeArrival(r.packet_id));
        }
        if (r.is_success() || all_success) && corrupted_by_any(r.start, r.length, errors) {
            return Err(TraceError::HiddenCorruption(r.packet_id));
        }
    }
    Ok(())
}

/// Whether any of the (sorted) `errors` corrupts `[start, start + length)`.
pub fn corrupted_by_any(start: Time, length: Length, errors: &[ErrorEvent]) -> bool {
    let first = errors.partition_point(|e| e.time < start);
    errors[first..]
        .iter()
        .take_while(|e| e.time < start + length)
        .any(|e| error_corrupts(start, length, e))
}
