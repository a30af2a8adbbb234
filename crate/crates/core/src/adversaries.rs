//! Adaptive adversaries. Each one sees only the history of the run so far
//! and may answer with errors, extra arrivals and a companion OFF schedule.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{
    ErrorEvent, FeedbackMode, InstanceParams, LengthClass, Packet, PhaseKind, PhaseRecord, Time,
    TransmissionRecord,
};

/// Fixed facts about the run, handed to the adversary before the first tick.
#[derive(Debug, Clone)]
pub struct AdversaryContext {
    pub params: InstanceParams,
    pub feedback: FeedbackMode,
    /// First packet id not taken by the arrival source.
    pub first_free_id: u64,
    /// True when the adversary is also responsible for supplying packets.
    pub adversarial_arrivals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InFlight {
    pub packet: Packet,
    pub start: Time,
    /// Deferred feedback only: an error already hit this transmission.
    pub corrupted: bool,
}

/// What the adversary may observe at an event point.
#[derive(Debug, Clone, Copy)]
pub struct LinkView<'a> {
    pub now: Time,
    pub params: &'a InstanceParams,
    pub feedback: FeedbackMode,
    pub pending_short: usize,
    pub pending_long: usize,
    pub in_flight: Option<InFlight>,
    /// The packet the sender started at this tick's decision, if any.
    pub started_now: Option<Packet>,
    /// Whether that start was the first of a phase.
    pub phase_opened_now: bool,
    pub last_error: Option<ErrorEvent>,
}

impl LinkView<'_> {
    fn started_class(&self) -> Option<LengthClass> {
        self.started_now.and_then(|p| self.params.class_of(p.length))
    }

    fn holds_long(&self) -> bool {
        self.pending_long > 0
            || self
                .in_flight
                .is_some_and(|f| self.params.class_of(f.packet.length) == Some(LengthClass::Long))
    }

    fn idle_and_empty(&self) -> bool {
        self.pending_short == 0 && self.pending_long == 0 && self.in_flight.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversaryDecision {
    pub inject_arrivals: Vec<Packet>,
    pub errors: Vec<ErrorEvent>,
    pub off_transmissions: Vec<TransmissionRecord>,
    pub phases: Vec<PhaseRecord>,
}

impl AdversaryDecision {
    pub fn is_empty(&self) -> bool {
        self.inject_arrivals.is_empty()
            && self.errors.is_empty()
            && self.off_transmissions.is_empty()
            && self.phases.is_empty()
    }
}

pub trait Adversary {
    fn name(&self) -> &'static str;

    /// Whether the adversary maintains an OFF schedule.
    fn keeps_off(&self) -> bool {
        false
    }

    fn start(&mut self, _ctx: &AdversaryContext) -> AdversaryDecision {
        AdversaryDecision::default()
    }

    /// A packet from the arrival source (never one the adversary injected).
    fn on_arrival(&mut self, _packet: &Packet) {}

    /// After arrivals, before the sender decides. Injected packets are
    /// visible to this tick's decision.
    fn before_schedule(&mut self, _view: &LinkView<'_>) -> AdversaryDecision {
        AdversaryDecision::default()
    }

    /// Right after the sender's decision. Injected packets arrive at this
    /// tick but reach the sender's queue after the decision.
    fn after_schedule(&mut self, _view: &LinkView<'_>) -> AdversaryDecision {
        AdversaryDecision::default()
    }

    /// OFF transmissions that close the run.
    fn finish(&mut self, _horizon: Time) -> Vec<TransmissionRecord> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Default)]
struct Mint {
    next: u64,
}

impl Mint {
    fn packet(&mut self, length: u64, at: Time) -> Packet {
        let p = Packet::new(self.next, length, at);
        self.next += 1;
        p
    }
}

/// The OFF companion: its own FIFO queue per class and the time its link
/// frees up.
#[derive(Debug, Clone)]
pub struct OffBook {
    params: InstanceParams,
    short: VecDeque<Packet>,
    long: VecDeque<Packet>,
    free_at: Time,
}

impl OffBook {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            params,
            short: VecDeque::new(),
            long: VecDeque::new(),
            free_at: 0,
        }
    }

    fn queue(&mut self, class: LengthClass) -> &mut VecDeque<Packet> {
        match class {
            LengthClass::Short => &mut self.short,
            LengthClass::Long => &mut self.long,
        }
    }

    pub fn add(&mut self, packet: Packet) {
        if let Some(class) = self.params.class_of(packet.length) {
            self.queue(class).push_back(packet);
        }
    }

    pub fn free_at(&self) -> Time {
        self.free_at
    }

    /// Packets of `class` that have arrived by `at`.
    pub fn available(&self, class: LengthClass, at: Time) -> usize {
        let q = match class {
            LengthClass::Short => &self.short,
            LengthClass::Long => &self.long,
        };
        q.partition_point(|p| p.arrival_time <= at)
    }

    /// Sends the oldest packet of `class` at `start`.
    pub fn send(&mut self, class: LengthClass, start: Time) -> Option<TransmissionRecord> {
        debug_assert!(start >= self.free_at, "OFF overlaps itself");
        let q = self.queue(class);
        if q.front()?.arrival_time > start {
            return None;
        }
        let p = q.pop_front()?;
        self.free_at = start + p.length;
        Some(TransmissionRecord::success(&p, start))
    }

    /// Greedily sends `class` packets back to back inside `[lo, hi]`.
    pub fn fill(&mut self, class: LengthClass, lo: Time, hi: Time) -> Vec<TransmissionRecord> {
        let mut out = Vec::new();
        let mut cursor = lo.max(self.free_at);
        while let Some(front) = self.queue(class).front().copied() {
            let start = cursor.max(front.arrival_time);
            if start + front.length > hi {
                break;
            }
            out.extend(self.send(class, start));
            cursor = start + front.length;
        }
        out
    }
}

/// Phase construction with adversarial arrivals: keeps a long packet
/// queued at the sender and, at every phase opening, either feeds OFF
/// `gamma_hat` fresh short packets and cuts the phase before the sender's
/// long one ends, or lets OFF send one long packet while the sender sends
/// short ones.
#[derive(Debug, Clone)]
pub struct AdvArrival {
    params: InstanceParams,
    mint: Mint,
    off: OffBook,
}

impl AdvArrival {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            off: OffBook::new(params.clone()),
            params,
            mint: Mint::default(),
        }
    }
}

impl Adversary for AdvArrival {
    fn name(&self) -> &'static str {
        "adv-arrival"
    }

    fn keeps_off(&self) -> bool {
        true
    }

    fn start(&mut self, ctx: &AdversaryContext) -> AdversaryDecision {
        self.mint.next = ctx.first_free_id;
        AdversaryDecision::default()
    }

    fn on_arrival(&mut self, packet: &Packet) {
        self.off.add(*packet);
    }

    fn before_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        if !view.holds_long() {
            let p = self.mint.packet(self.params.l_max(), view.now);
            self.off.add(p);
            d.inject_arrivals.push(p);
        }
        d
    }

    fn after_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        if !view.phase_opened_now {
            return d;
        }
        let now = view.now;
        let (l_min, l_max) = (self.params.l_min(), self.params.l_max());
        match view.started_class() {
            Some(LengthClass::Long) => {
                let k = self.params.gamma_hat();
                for i in 0..k {
                    let p = self.mint.packet(l_min, now);
                    self.off.add(p);
                    d.inject_arrivals.push(p);
                    d.off_transmissions
                        .extend(self.off.send(LengthClass::Short, now + i * l_min));
                }
                let end = now + k * l_min;
                d.errors.push(ErrorEvent::pre(end));
                d.phases.push(PhaseRecord {
                    start: now,
                    end,
                    kind: PhaseKind::LongOpening,
                });
            }
            Some(LengthClass::Short) => {
                if self.off.available(LengthClass::Long, now) == 0 {
                    let p = self.mint.packet(l_max, now);
                    self.off.add(p);
                    d.inject_arrivals.push(p);
                }
                d.off_transmissions.extend(self.off.send(LengthClass::Long, now));
                d.errors.push(ErrorEvent::pre(now + l_max));
                d.phases.push(PhaseRecord {
                    start: now,
                    end: now + l_max,
                    kind: PhaseKind::ShortOpening,
                });
            }
            None => {}
        }
        d
    }
}

/// Phase construction against stochastic arrivals. OFF sees the same
/// arrivals as the sender; at each phase opening the adversary extends the
/// phase just enough for OFF to send what it holds, or ends it at once.
#[derive(Debug, Clone)]
pub struct StochasticAdversary {
    params: InstanceParams,
    off: OffBook,
}

impl StochasticAdversary {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            off: OffBook::new(params.clone()),
            params,
        }
    }
}

impl Adversary for StochasticAdversary {
    fn name(&self) -> &'static str {
        "stochastic"
    }

    fn keeps_off(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, packet: &Packet) {
        self.off.add(*packet);
    }

    fn after_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        if !view.phase_opened_now {
            return d;
        }
        let now = view.now;
        let (l_min, l_max) = (self.params.l_min(), self.params.l_max());
        let (end, kind) = match view.started_class() {
            Some(LengthClass::Long) => {
                let k = (self.off.available(LengthClass::Short, now) as u64).min(self.params.gamma_hat());
                if k == 0 {
                    (None, PhaseKind::LongOpeningEmpty)
                } else {
                    for i in 0..k {
                        d.off_transmissions
                            .extend(self.off.send(LengthClass::Short, now + i * l_min));
                    }
                    (Some(now + k * l_min), PhaseKind::LongOpeningOffShort { off_short: k })
                }
            }
            Some(LengthClass::Short) => {
                if self.off.available(LengthClass::Long, now) == 0 {
                    (None, PhaseKind::ShortOpeningEmpty)
                } else {
                    d.off_transmissions.extend(self.off.send(LengthClass::Long, now));
                    (Some(now + l_max), PhaseKind::ShortOpeningOffLong)
                }
            }
            None => return d,
        };
        match end {
            Some(end) => {
                d.errors.push(ErrorEvent::pre(end));
                d.phases.push(PhaseRecord { start: now, end, kind });
            }
            None => {
                d.errors.push(ErrorEvent::post(now));
                d.phases.push(PhaseRecord {
                    start: now,
                    end: now,
                    kind,
                });
            }
        }
        d
    }
}

/// For deferred feedback: an error in the middle of every transmission the
/// sender starts, while OFF fills the gaps between consecutive errors.
#[derive(Debug, Clone)]
pub struct DeferredKiller {
    params: InstanceParams,
    mint: Mint,
    off: OffBook,
    supply: bool,
    /// Doubled position of the latest error placed.
    last_point: Option<u64>,
}

impl DeferredKiller {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            off: OffBook::new(params.clone()),
            params,
            mint: Mint::default(),
            supply: false,
            last_point: None,
        }
    }

    fn window_start(&self) -> Time {
        self.last_point.map_or(0, |d| d.div_ceil(2))
    }

    fn fill(&mut self, hi: Time) -> Vec<TransmissionRecord> {
        let lo = self.window_start();
        let mut out = self.off.fill(LengthClass::Short, lo, hi);
        if !self.params.single_length() {
            out.extend(self.off.fill(LengthClass::Long, lo, hi));
        }
        out
    }
}

impl Adversary for DeferredKiller {
    fn name(&self) -> &'static str {
        "deferred-killer"
    }

    fn keeps_off(&self) -> bool {
        true
    }

    fn start(&mut self, ctx: &AdversaryContext) -> AdversaryDecision {
        self.mint.next = ctx.first_free_id;
        self.supply = ctx.adversarial_arrivals;
        AdversaryDecision::default()
    }

    fn on_arrival(&mut self, packet: &Packet) {
        self.off.add(*packet);
    }

    fn before_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        if !self.supply {
            return d;
        }
        let off_dry = self.off.available(LengthClass::Short, view.now) == 0
            && self.off.available(LengthClass::Long, view.now) == 0;
        if view.idle_and_empty() || off_dry {
            let p = self.mint.packet(self.params.l_min(), view.now);
            self.off.add(p);
            d.inject_arrivals.push(p);
        }
        d
    }

    fn after_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        let Some(p) = view.started_now else {
            return d;
        };
        let err = if p.length >= 2 {
            ErrorEvent::pre(view.now + p.length.div_ceil(2))
        } else {
            ErrorEvent::post(view.now)
        };
        d.off_transmissions = self.fill(err.doubled() / 2);
        self.last_point = Some(err.doubled());
        d.errors.push(err);
        d
    }

    fn finish(&mut self, horizon: Time) -> Vec<TransmissionRecord> {
        self.fill(horizon)
    }
}

/// Against SL with adversarial arrivals: each cycle brings one short and one
/// long packet. OFF sends the long one first and the short one second, and
/// an error lands at each of OFF's completions.
#[derive(Debug, Clone)]
pub struct SlKiller {
    params: InstanceParams,
    mint: Mint,
    off: OffBook,
    next_cycle: Time,
}

impl SlKiller {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            off: OffBook::new(params.clone()),
            params,
            mint: Mint::default(),
            next_cycle: 0,
        }
    }
}

impl Adversary for SlKiller {
    fn name(&self) -> &'static str {
        "sl-killer"
    }

    fn keeps_off(&self) -> bool {
        true
    }

    fn start(&mut self, ctx: &AdversaryContext) -> AdversaryDecision {
        self.mint.next = ctx.first_free_id;
        AdversaryDecision::default()
    }

    fn on_arrival(&mut self, packet: &Packet) {
        self.off.add(*packet);
    }

    fn before_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        let c = view.now;
        if c != self.next_cycle {
            return d;
        }
        let (l_min, l_max) = (self.params.l_min(), self.params.l_max());
        let short = self.mint.packet(l_min, c);
        let long = self.mint.packet(l_max, c);
        self.off.add(short);
        self.off.add(long);
        d.inject_arrivals = vec![short, long];
        d.off_transmissions.extend(self.off.send(LengthClass::Long, c));
        d.off_transmissions
            .extend(self.off.send(LengthClass::Short, c + l_max));
        d.errors = vec![ErrorEvent::pre(c + l_max), ErrorEvent::pre(c + l_max + l_min)];
        self.next_cycle = c + l_max + l_min;
        d
    }
}

/// Against LL: errors at every tick, except that whenever LL starts a long
/// packet and OFF holds a short one, OFF sends the short packet and the
/// error comes exactly at its completion, cutting LL's long packet.
#[derive(Debug, Clone)]
pub struct LlKiller {
    params: InstanceParams,
    mint: Mint,
    off: OffBook,
    supply: bool,
    window_end: Option<Time>,
}

impl LlKiller {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            off: OffBook::new(params.clone()),
            params,
            mint: Mint::default(),
            supply: false,
            window_end: None,
        }
    }
}

impl Adversary for LlKiller {
    fn name(&self) -> &'static str {
        "ll-killer"
    }

    fn keeps_off(&self) -> bool {
        true
    }

    fn start(&mut self, ctx: &AdversaryContext) -> AdversaryDecision {
        self.mint.next = ctx.first_free_id;
        self.supply = ctx.adversarial_arrivals;
        AdversaryDecision::default()
    }

    fn on_arrival(&mut self, packet: &Packet) {
        self.off.add(*packet);
    }

    fn before_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        if !self.supply {
            return d;
        }
        if !view.holds_long() {
            let p = self.mint.packet(self.params.l_max(), view.now);
            self.off.add(p);
            d.inject_arrivals.push(p);
        }
        if self.off.available(LengthClass::Short, view.now) == 0 {
            let p = self.mint.packet(self.params.l_min(), view.now);
            self.off.add(p);
            d.inject_arrivals.push(p);
        }
        d
    }

    fn after_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        let now = view.now;
        if self.window_end.is_some_and(|end| now < end) {
            return d;
        }
        self.window_end = None;
        let long_started = view.started_class() == Some(LengthClass::Long);
        if long_started && self.off.available(LengthClass::Short, now) > 0 {
            d.off_transmissions.extend(self.off.send(LengthClass::Short, now));
            let end = now + self.params.l_min();
            d.errors.push(ErrorEvent::pre(end));
            self.window_end = Some(end);
        } else {
            d.errors.push(ErrorEvent::post(now));
        }
        d
    }
}

/// Against SL with stochastic arrivals: the link is blocked except for
/// intervals that open when SL starts a short packet. If OFF holds a long
/// packet the interval lets OFF send it and then one short packet;
/// otherwise both sides send one short packet.
#[derive(Debug, Clone)]
pub struct SlStochasticKiller {
    params: InstanceParams,
    off: OffBook,
    interval_end: Option<Time>,
}

impl SlStochasticKiller {
    pub fn new(params: InstanceParams) -> Self {
        Self {
            off: OffBook::new(params.clone()),
            params,
            interval_end: None,
        }
    }
}

impl Adversary for SlStochasticKiller {
    fn name(&self) -> &'static str {
        "sl-stochastic-killer"
    }

    fn keeps_off(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, packet: &Packet) {
        self.off.add(*packet);
    }

    fn after_schedule(&mut self, view: &LinkView<'_>) -> AdversaryDecision {
        let mut d = AdversaryDecision::default();
        let now = view.now;
        if self.interval_end.is_some_and(|end| now < end) {
            return d;
        }
        self.interval_end = None;
        if view.started_class() != Some(LengthClass::Short) {
            d.errors.push(ErrorEvent::post(now));
            return d;
        }
        let (l_min, l_max) = (self.params.l_min(), self.params.l_max());
        let end = if self.off.available(LengthClass::Long, now) > 0 {
            d.off_transmissions.extend(self.off.send(LengthClass::Long, now));
            d.off_transmissions
                .extend(self.off.send(LengthClass::Short, now + l_max));
            d.errors.push(ErrorEvent::pre(now + l_max));
            now + l_max + l_min
        } else {
            d.off_transmissions.extend(self.off.send(LengthClass::Short, now));
            now + l_min
        };
        d.errors.push(ErrorEvent::pre(end));
        self.interval_end = Some(end);
        d
    }
}

/// Replays a fixed error pattern.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    errors: Vec<ErrorEvent>,
}

impl Scripted {
    pub fn new(errors: Vec<ErrorEvent>) -> Self {
        Self { errors }
    }
}

impl Adversary for Scripted {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn start(&mut self, _ctx: &AdversaryContext) -> AdversaryDecision {
        AdversaryDecision {
            errors: self.errors.clone(),
            ..Default::default()
        }
    }
}

/// An error-free link.
#[derive(Debug, Clone, Default)]
pub struct NoErrors;

impl Adversary for NoErrors {
    fn name(&self) -> &'static str {
        "none"
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown adversary `{0}` (expected adv-arrival, stochastic, deferred-killer, sl-killer, ll-killer, sl-stochastic-killer, scripted or none)")]
pub struct UnknownAdversary(pub String);

/// Adversary selection by name, as written in configs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversarySpec {
    AdvArrival,
    Stochastic,
    DeferredKiller,
    SlKiller,
    LlKiller,
    SlStochasticKiller,
    Scripted(Vec<ErrorEvent>),
    None,
}

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::AdvArrival => "adv-arrival",
            AdversarySpec::Stochastic => "stochastic",
            AdversarySpec::DeferredKiller => "deferred-killer",
            AdversarySpec::SlKiller => "sl-killer",
            AdversarySpec::LlKiller => "ll-killer",
            AdversarySpec::SlStochasticKiller => "sl-stochastic-killer",
            AdversarySpec::Scripted(_) => "scripted",
            AdversarySpec::None => "none",
        }
    }

    /// Whether the construction annotates its trace with phase records.
    pub fn records_phases(&self) -> bool {
        matches!(self, AdversarySpec::AdvArrival | AdversarySpec::Stochastic)
    }

    pub fn build(&self, params: &InstanceParams) -> Box<dyn Adversary> {
        let params = params.clone();
        match self {
            AdversarySpec::AdvArrival => Box::new(AdvArrival::new(params)),
            AdversarySpec::Stochastic => Box::new(StochasticAdversary::new(params)),
            AdversarySpec::DeferredKiller => Box::new(DeferredKiller::new(params)),
            AdversarySpec::SlKiller => Box::new(SlKiller::new(params)),
            AdversarySpec::LlKiller => Box::new(LlKiller::new(params)),
            AdversarySpec::SlStochasticKiller => Box::new(SlStochasticKiller::new(params)),
            AdversarySpec::Scripted(errors) => Box::new(Scripted::new(errors.clone())),
            AdversarySpec::None => Box::new(NoErrors),
        }
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversarySpec {
    type Err = UnknownAdversary;

    /// `scripted` parses with an empty pattern; callers attach the errors.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "adv-arrival" => AdversarySpec::AdvArrival,
            "stochastic" => AdversarySpec::Stochastic,
            "deferred-killer" => AdversarySpec::DeferredKiller,
            "sl-killer" => AdversarySpec::SlKiller,
            "ll-killer" => AdversarySpec::LlKiller,
            "sl-stochastic-killer" => AdversarySpec::SlStochasticKiller,
            "scripted" => AdversarySpec::Scripted(Vec::new()),
            "none" => AdversarySpec::None,
            other => return Err(UnknownAdversary(other.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_params;

    fn view<'a>(params: &'a InstanceParams, now: Time, started: Option<Packet>, opened: bool) -> LinkView<'a> {
        LinkView {
            now,
            params,
            feedback: FeedbackMode::Instantaneous,
            pending_short: 0,
            pending_long: 0,
            in_flight: started.map(|packet| InFlight {
                packet,
                start: now,
                corrupted: false,
            }),
            started_now: started,
            phase_opened_now: opened,
            last_error: None,
        }
    }

    #[test]
    fn off_book_respects_arrival() {
        let params = derive_params(1, 2).unwrap();
        let mut off = OffBook::new(params);
        off.add(Packet::new(0, 1, 5));
        assert_eq!(off.available(LengthClass::Short, 4), 0);
        assert!(off.send(LengthClass::Short, 4).is_none());
        let r = off.send(LengthClass::Short, 5).unwrap();
        assert_eq!((r.start, r.end), (5, 6));
        assert_eq!(off.free_at(), 6);
    }

    #[test]
    fn off_fill_is_greedy() {
        let params = derive_params(4, 4).unwrap();
        let mut off = OffBook::new(params);
        for i in 0..3 {
            off.add(Packet::new(i, 4, 0));
        }
        let r = off.fill(LengthClass::Short, 2, 11);
        assert_eq!(r.iter().map(|r| r.start).collect::<Vec<_>>(), vec![2, 6]);
    }

    #[test]
    fn stochastic_rule_one_a_caps_at_gamma_hat() {
        let params = derive_params(2, 5).unwrap();
        let mut adv = StochasticAdversary::new(params.clone());
        for i in 0..3 {
            adv.on_arrival(&Packet::new(i, 2, 0));
        }
        let started = Packet::new(9, 5, 0);
        adv.on_arrival(&started);
        let d = adv.after_schedule(&view(&params, 0, Some(started), true));
        assert_eq!(d.off_transmissions.len(), 2);
        assert_eq!(d.errors, vec![ErrorEvent::pre(4)]);
        assert_eq!(d.phases[0].kind, PhaseKind::LongOpeningOffShort { off_short: 2 });
    }

    #[test]
    fn stochastic_rule_one_b_is_immediate() {
        let params = derive_params(1, 2).unwrap();
        let mut adv = StochasticAdversary::new(params.clone());
        let started = Packet::new(0, 2, 3);
        adv.on_arrival(&started);
        let d = adv.after_schedule(&view(&params, 3, Some(started), true));
        assert!(d.off_transmissions.is_empty());
        assert_eq!(d.errors, vec![ErrorEvent::post(3)]);
        assert_eq!(d.phases[0].kind, PhaseKind::LongOpeningEmpty);
    }

    #[test]
    fn stochastic_rule_two_a() {
        let params = derive_params(1, 2).unwrap();
        let mut adv = StochasticAdversary::new(params.clone());
        adv.on_arrival(&Packet::new(0, 2, 0));
        let started = Packet::new(1, 1, 0);
        adv.on_arrival(&started);
        let d = adv.after_schedule(&view(&params, 1, Some(started), true));
        assert_eq!(d.off_transmissions[0].length, 2);
        assert_eq!(d.errors, vec![ErrorEvent::pre(3)]);
    }

    #[test]
    fn deferred_killer_midpoints() {
        let params = derive_params(4, 4).unwrap();
        let mut adv = DeferredKiller::new(params.clone());
        let p = Packet::new(0, 4, 0);
        let d = adv.after_schedule(&view(&params, 0, Some(p), true));
        assert_eq!(d.errors, vec![ErrorEvent::pre(2)]);
        let params1 = derive_params(1, 1).unwrap();
        let mut adv = DeferredKiller::new(params1.clone());
        let d = adv.after_schedule(&view(&params1, 7, Some(Packet::new(0, 1, 0)), false));
        assert_eq!(d.errors, vec![ErrorEvent::post(7)]);
    }

    #[test]
    fn names_round_trip() {
        for name in [
            "adv-arrival",
            "stochastic",
            "deferred-killer",
            "sl-killer",
            "ll-killer",
            "sl-stochastic-killer",
            "scripted",
            "none",
        ] {
            assert_eq!(name.parse::<AdversarySpec>().unwrap().name(), name);
        }
        assert!("oracle".parse::<AdversarySpec>().is_err());
    }
}
