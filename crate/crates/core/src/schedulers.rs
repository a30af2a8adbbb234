//! Work-conserving online scheduling policies.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{InstanceParams, LengthClass, Packet, PacketId, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Sl,
    Ll,
    SlPreamble,
    CslPreamble,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Sl => "sl",
            Policy::Ll => "ll",
            Policy::SlPreamble => "sl-preamble",
            Policy::CslPreamble => "csl-preamble",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("unknown scheduler `{0}` (expected sl, ll, sl-preamble or csl-preamble)")]
    UnknownPolicy(String),
    #[error("csl-preamble needs the arrival rate and short-packet probability")]
    MissingRates,
    #[error("packet {id} has length {length}, which is neither l_min nor l_max")]
    ForeignLength { id: PacketId, length: u64 },
}

impl FromStr for Policy {
    type Err = SchedulerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sl" => Ok(Policy::Sl),
            "ll" => Ok(Policy::Ll),
            "sl-preamble" => Ok(Policy::SlPreamble),
            "csl-preamble" => Ok(Policy::CslPreamble),
            other => Err(SchedulerError::UnknownPolicy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// Short packets still owed to the current preamble, in `1..=gamma_bar`.
    InPreamble(u64),
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerDecision {
    Transmit(PacketId),
    Idle,
}

/// Pending packets per length class plus the preamble bookkeeping.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    short: VecDeque<Packet>,
    long: VecDeque<Packet>,
    pub phase_mode: PhaseMode,
    pub policy: Policy,
}

impl SchedulerState {
    pub fn new(policy: Policy) -> Self {
        Self {
            short: VecDeque::new(),
            long: VecDeque::new(),
            phase_mode: PhaseMode::Normal,
            policy,
        }
    }

    fn queue_mut(&mut self, class: LengthClass) -> &mut VecDeque<Packet> {
        match class {
            LengthClass::Short => &mut self.short,
            LengthClass::Long => &mut self.long,
        }
    }

    pub fn queue(&self, class: LengthClass) -> &VecDeque<Packet> {
        match class {
            LengthClass::Short => &self.short,
            LengthClass::Long => &self.long,
        }
    }

    /// Adds a new arrival, keeping each class ordered by `(arrival_time, id)`.
    pub fn enqueue(&mut self, class: LengthClass, packet: Packet) {
        let q = self.queue_mut(class);
        let key = (packet.arrival_time, packet.id);
        match q.back() {
            Some(last) if (last.arrival_time, last.id) > key => {
                let at = q.partition_point(|p| (p.arrival_time, p.id) < key);
                q.insert(at, packet);
            }
            _ => q.push_back(packet),
        }
    }

    /// Returns a corrupted packet to the head of its class.
    pub fn requeue_front(&mut self, class: LengthClass, packet: Packet) {
        self.queue_mut(class).push_front(packet);
    }

    pub fn pop(&mut self, class: LengthClass) -> Option<Packet> {
        self.queue_mut(class).pop_front()
    }

    pub fn pending_short(&self) -> usize {
        self.short.len()
    }

    pub fn pending_long(&self) -> usize {
        self.long.len()
    }

    pub fn is_empty(&self) -> bool {
        self.short.is_empty() && self.long.is_empty()
    }

    fn head(&self, class: LengthClass) -> SchedulerDecision {
        match self.queue(class).front() {
            Some(p) => SchedulerDecision::Transmit(p.id),
            None => SchedulerDecision::Idle,
        }
    }
}

fn prefer(state: &SchedulerState, first: LengthClass, second: LengthClass) -> SchedulerDecision {
    match state.head(first) {
        SchedulerDecision::Idle => state.head(second),
        d => d,
    }
}

/// Oldest pending short packet, else oldest long packet.
pub fn sl_choose(state: &SchedulerState) -> SchedulerDecision {
    prefer(state, LengthClass::Short, LengthClass::Long)
}

/// Oldest pending long packet, else oldest short packet.
pub fn ll_choose(state: &SchedulerState) -> SchedulerDecision {
    prefer(state, LengthClass::Long, LengthClass::Short)
}

/// At a phase start with at least `gamma_bar` short packets pending, sends
/// `gamma_bar` of them back to back; otherwise, and after the preamble, LL.
///
/// Updates `state.phase_mode` as if the returned decision is carried out.
pub fn sl_preamble_choose(
    state: &mut SchedulerState,
    at_phase_start: bool,
    params: &InstanceParams,
) -> SchedulerDecision {
    if at_phase_start {
        state.phase_mode = PhaseMode::Normal;
        if state.pending_short() as u64 >= params.gamma_bar() {
            state.phase_mode = PhaseMode::InPreamble(params.gamma_bar());
        }
    }
    if let PhaseMode::InPreamble(remaining) = state.phase_mode {
        if let SchedulerDecision::Transmit(id) = state.head(LengthClass::Short) {
            state.phase_mode = if remaining > 1 {
                PhaseMode::InPreamble(remaining - 1)
            } else {
                PhaseMode::Normal
            };
            return SchedulerDecision::Transmit(id);
        }
        state.phase_mode = PhaseMode::Normal;
    }
    ll_choose(state)
}

/// SL when `lambda·p·l_min > gamma_bar / (2·rho)`, SL-Preamble otherwise.
pub fn csl_select_policy(lambda: Rational, p: Rational, params: &InstanceParams) -> Policy {
    let load = lambda * p * Rational::from(params.l_min() as i64);
    let threshold = Rational::from(params.gamma_bar() as i64) / (Rational::from(2) * params.rho());
    if load > threshold {
        Policy::Sl
    } else {
        Policy::SlPreamble
    }
}

/// A policy bound to its queue; the engine's view of the sender.
#[derive(Debug, Clone)]
pub struct Scheduler {
    configured: Policy,
    params: InstanceParams,
    state: SchedulerState,
}

impl Scheduler {
    /// `rates` is `(lambda, p)` and is required for CSL-Preamble, which fixes
    /// its choice here once.
    pub fn new(
        policy: Policy,
        params: InstanceParams,
        rates: Option<(Rational, Rational)>,
    ) -> Result<Self, SchedulerError> {
        let effective = match policy {
            Policy::CslPreamble => {
                let (lambda, p) = rates.ok_or(SchedulerError::MissingRates)?;
                csl_select_policy(lambda, p, &params)
            }
            other => other,
        };
        Ok(Self {
            configured: policy,
            params,
            state: SchedulerState::new(effective),
        })
    }

    pub fn policy(&self) -> Policy {
        self.configured
    }

    /// The policy actually run; differs from [`Self::policy`] only for CSL.
    pub fn effective_policy(&self) -> Policy {
        self.state.policy
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    fn class(&self, packet: &Packet) -> Result<LengthClass, SchedulerError> {
        self.params
            .class_of(packet.length)
            .ok_or(SchedulerError::ForeignLength {
                id: packet.id,
                length: packet.length,
            })
    }

    pub fn enqueue(&mut self, packet: Packet) -> Result<(), SchedulerError> {
        let class = self.class(&packet)?;
        self.state.enqueue(class, packet);
        Ok(())
    }

    pub fn requeue_front(&mut self, packet: Packet) {
        let class = self.params.class_of(packet.length).expect("queued packet");
        self.state.requeue_front(class, packet);
    }

    /// Chooses and dequeues the next packet, or `None` when nothing is pending.
    pub fn next_packet(&mut self, at_phase_start: bool) -> Option<Packet> {
        let decision = match self.state.policy {
            Policy::Sl => sl_choose(&self.state),
            Policy::Ll => ll_choose(&self.state),
            Policy::SlPreamble | Policy::CslPreamble => {
                sl_preamble_choose(&mut self.state, at_phase_start, &self.params)
            }
        };
        let SchedulerDecision::Transmit(id) = decision else {
            return None;
        };
        for class in [LengthClass::Short, LengthClass::Long] {
            if self.state.queue(class).front().map(|p| p.id) == Some(id) {
                return self.state.pop(class);
            }
        }
        unreachable!("decision names a queue head")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_params;

    fn state_with(policy: Policy, short: &[(u64, u64)], long: &[(u64, u64)]) -> SchedulerState {
        let mut s = SchedulerState::new(policy);
        for &(id, at) in short {
            s.enqueue(LengthClass::Short, Packet::new(id, 1, at));
        }
        for &(id, at) in long {
            s.enqueue(LengthClass::Long, Packet::new(id, 2, at));
        }
        s
    }

    #[test]
    fn sl_prefers_short() {
        let s = state_with(Policy::Sl, &[(1, 5)], &[(0, 0)]);
        assert_eq!(sl_choose(&s), SchedulerDecision::Transmit(PacketId(1)));
        let s = state_with(Policy::Sl, &[], &[(0, 0)]);
        assert_eq!(sl_choose(&s), SchedulerDecision::Transmit(PacketId(0)));
        assert_eq!(sl_choose(&SchedulerState::new(Policy::Sl)), SchedulerDecision::Idle);
    }

    #[test]
    fn ll_prefers_long() {
        let s = state_with(Policy::Ll, &[(1, 0)], &[(0, 3)]);
        assert_eq!(ll_choose(&s), SchedulerDecision::Transmit(PacketId(0)));
        let s = state_with(Policy::Ll, &[(1, 0)], &[]);
        assert_eq!(ll_choose(&s), SchedulerDecision::Transmit(PacketId(1)));
        assert_eq!(ll_choose(&SchedulerState::new(Policy::Ll)), SchedulerDecision::Idle);
    }

    #[test]
    fn fifo_within_class_and_ties_by_id() {
        let mut s = SchedulerState::new(Policy::Sl);
        s.enqueue(LengthClass::Short, Packet::new(7, 1, 4));
        s.enqueue(LengthClass::Short, Packet::new(3, 1, 4));
        s.enqueue(LengthClass::Short, Packet::new(9, 1, 2));
        let order: Vec<u64> = s.queue(LengthClass::Short).iter().map(|p| p.id.0).collect();
        assert_eq!(order, vec![9, 3, 7]);
    }

    #[test]
    fn preamble_then_ll() {
        let params = derive_params(1, 2).unwrap();
        let mut sch = Scheduler::new(Policy::SlPreamble, params, None).unwrap();
        for i in 0..3 {
            sch.enqueue(Packet::new(i, 1, 0)).unwrap();
        }
        sch.enqueue(Packet::new(3, 2, 0)).unwrap();
        let a = sch.next_packet(true).unwrap();
        assert_eq!(sch.state().phase_mode, PhaseMode::InPreamble(1));
        let b = sch.next_packet(false).unwrap();
        let c = sch.next_packet(false).unwrap();
        assert_eq!((a.length, b.length, c.length), (1, 1, 2));
        assert_eq!(sch.state().phase_mode, PhaseMode::Normal);
    }

    #[test]
    fn preamble_skipped_when_few_shorts() {
        let params = derive_params(1, 2).unwrap();
        let mut s = state_with(Policy::SlPreamble, &[(0, 0)], &[(1, 0)]);
        assert_eq!(
            sl_preamble_choose(&mut s, true, &params),
            SchedulerDecision::Transmit(PacketId(1))
        );
        assert_eq!(s.phase_mode, PhaseMode::Normal);
    }

    #[test]
    fn mid_phase_arrivals_do_not_restart_preamble() {
        let params = derive_params(1, 2).unwrap();
        let mut s = state_with(Policy::SlPreamble, &[(0, 0), (2, 1)], &[(1, 0)]);
        assert_eq!(
            sl_preamble_choose(&mut s, false, &params),
            SchedulerDecision::Transmit(PacketId(1))
        );
    }

    #[test]
    fn csl_threshold() {
        let params = derive_params(1, 2).unwrap();
        assert_eq!(csl_select_policy(Rational::from(1), Rational::new(9, 10), &params), Policy::Sl);
        assert_eq!(
            csl_select_policy(Rational::new(2, 5), Rational::new(1, 2), &params),
            Policy::SlPreamble
        );
        assert_eq!(
            csl_select_policy(Rational::from(1), Rational::new(1, 2), &params),
            Policy::SlPreamble
        );
    }

    #[test]
    fn csl_requires_rates() {
        let params = derive_params(1, 2).unwrap();
        assert_eq!(
            Scheduler::new(Policy::CslPreamble, params, None).unwrap_err(),
            SchedulerError::MissingRates
        );
    }

    #[test]
    fn parse_names() {
        for p in [Policy::Sl, Policy::Ll, Policy::SlPreamble, Policy::CslPreamble] {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("fifo".parse::<Policy>().is_err());
    }
}
