//! The tick-driven event loop that couples an arrival source, a scheduler
//! and an adversary into an [`ExecutionTrace`].
//!
//! Each tick runs, in order: completions, pre-decision errors, arrivals and
//! the adversary's pre-decision hook, the scheduling decision, the
//! adversary's post-decision hook, and post-decision errors.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::adversaries::{Adversary, AdversaryContext, AdversaryDecision, AdversarySpec, InFlight, LinkView};
use crate::arrivals::{generate_poisson_arrivals, ArrivalError, StochasticArrivalConfig};
use crate::model::{
    error_corrupts, ErrorEvent, ExecutionTrace, FeedbackMode, InstanceParams, Outcome, Packet,
    PhaseRecord, Rational, Slot, Time, TransmissionRecord,
};
use crate::schedulers::{Policy, Scheduler, SchedulerError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrivalSpec {
    /// No source; any packets come from the adversary.
    None,
    Scripted(Vec<Packet>),
    Poisson { lambda: Rational, p: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulerSpec {
    pub policy: Policy,
    /// `(lambda, p)` known to the scheduler. CSL-Preamble falls back to the
    /// Poisson source's parameters when this is `None`.
    pub rates: Option<(Rational, Rational)>,
}

impl SchedulerSpec {
    pub fn new(policy: Policy) -> Self {
        Self { policy, rates: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub params: InstanceParams,
    pub feedback: FeedbackMode,
    pub scheduler: SchedulerSpec,
    pub adversary: AdversarySpec,
    pub arrivals: ArrivalSpec,
    pub horizon: Time,
    pub sample_every: Time,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Arrivals(#[from] ArrivalError),
    #[error("adversary {adversary} broke the contract at t={time}: {detail}")]
    Adversary {
        adversary: &'static str,
        time: Time,
        detail: String,
    },
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.sample_every == 0 {
            return Err(RunError::InvalidConfig("sample_every must be at least 1".into()));
        }
        if self.horizon < self.sample_every {
            return Err(RunError::InvalidConfig(format!(
                "horizon {} is shorter than sample_every {}",
                self.horizon, self.sample_every
            )));
        }
        Ok(())
    }

    fn scheduler_rates(&self) -> Option<(Rational, Rational)> {
        self.scheduler.rates.or(match &self.arrivals {
            ArrivalSpec::Poisson { lambda, p } => Some((*lambda, *p)),
            _ => None,
        })
    }
}

fn view<'a>(
    config: &'a RunConfig,
    scheduler: &Scheduler,
    in_flight: Option<InFlight>,
    last_error: Option<ErrorEvent>,
    now: Time,
    started: Option<Packet>,
    opened: bool,
) -> LinkView<'a> {
    let state = scheduler.state();
    LinkView {
        now,
        params: &config.params,
        feedback: config.feedback,
        pending_short: state.pending_short(),
        pending_long: state.pending_long(),
        in_flight,
        started_now: started,
        phase_opened_now: opened,
        last_error,
    }
}

struct Engine<'c> {
    config: &'c RunConfig,
    scheduler: Scheduler,
    adversary: Box<dyn Adversary>,
    ids: HashSet<u64>,
    arrivals: Vec<Packet>,
    errors: Vec<ErrorEvent>,
    pending_errors: BTreeSet<ErrorEvent>,
    transmissions: Vec<TransmissionRecord>,
    off: Vec<TransmissionRecord>,
    phases: Vec<PhaseRecord>,
    in_flight: Option<InFlight>,
    first_hit: Option<Time>,
    phase_flag: bool,
    last_error: Option<ErrorEvent>,
}

impl Engine<'_> {
    fn instantaneous(&self) -> bool {
        self.config.feedback == FeedbackMode::Instantaneous
    }

    fn contract(&self, time: Time, detail: String) -> RunError {
        RunError::Adversary {
            adversary: self.adversary.name(),
            time,
            detail,
        }
    }

    fn admit(&mut self, packet: Packet) -> Result<(), RunError> {
        if !self.ids.insert(packet.id.0) {
            return Err(self.contract(packet.arrival_time, format!("duplicate packet id {}", packet.id)));
        }
        self.arrivals.push(packet);
        self.scheduler.enqueue(packet)?;
        Ok(())
    }

    /// Applies a decision; errors must fall strictly after `earliest`.
    fn apply(&mut self, now: Time, earliest: ErrorEvent, d: AdversaryDecision) -> Result<(), RunError> {
        for p in d.inject_arrivals {
            if p.arrival_time != now {
                return Err(self.contract(now, format!("injected packet {} stamped {}", p.id, p.arrival_time)));
            }
            self.admit(p)?;
        }
        for e in d.errors {
            if e < earliest {
                return Err(self.contract(now, format!("error at ({}, {:?}) lies in the past", e.time, e.slot)));
            }
            if e.time <= self.config.horizon {
                self.pending_errors.insert(e);
            }
        }
        self.off.extend(d.off_transmissions);
        self.phases.extend(d.phases);
        Ok(())
    }

    fn finish_in_flight(&mut self, end: Time, outcome: Outcome) {
        let f = self.in_flight.take().expect("packet in flight");
        let corrupted_at = match outcome {
            Outcome::Success => None,
            Outcome::Corrupted => self.first_hit.take(),
        };
        self.transmissions.push(TransmissionRecord {
            packet_id: f.packet.id,
            length: f.packet.length,
            start: f.start,
            end,
            outcome,
            corrupted_at,
        });
        if outcome == Outcome::Corrupted {
            self.scheduler.requeue_front(f.packet);
            self.phase_flag = true;
        }
    }

    fn complete(&mut self, t: Time) {
        let Some(f) = self.in_flight else { return };
        if f.start + f.packet.length != t {
            return;
        }
        let outcome = if f.corrupted { Outcome::Corrupted } else { Outcome::Success };
        self.finish_in_flight(t, outcome);
    }

    fn fire_errors(&mut self, t: Time, slot: Slot) {
        let key = ErrorEvent { time: t, slot };
        if !self.pending_errors.remove(&key) {
            return;
        }
        self.errors.push(key);
        self.last_error = Some(key);
        if self.instantaneous() {
            if self.in_flight.is_some() {
                self.first_hit = Some(t);
                self.finish_in_flight(t, Outcome::Corrupted);
            }
            self.phase_flag = true;
        } else if let Some(f) = self.in_flight.as_mut() {
            if error_corrupts(f.start, f.packet.length, &key) && !f.corrupted {
                f.corrupted = true;
                self.first_hit = Some(t);
            }
        }
    }

    fn tick(&mut self, t: Time, source: &mut std::iter::Peekable<std::vec::IntoIter<Packet>>) -> Result<(), RunError> {
        self.complete(t);
        self.fire_errors(t, Slot::PreSchedule);

        while let Some(p) = source.next_if(|p| p.arrival_time == t) {
            self.admit(p)?;
            self.adversary.on_arrival(&p);
        }
        let d = self.adversary.before_schedule(&view(self.config, &self.scheduler, self.in_flight, self.last_error, t, None, false));
        self.apply(t, ErrorEvent::post(t), d)?;

        let mut started = None;
        let mut opened = false;
        if self.in_flight.is_none() {
            if let Some(p) = self.scheduler.next_packet(self.phase_flag) {
                opened = self.phase_flag;
                self.phase_flag = false;
                self.in_flight = Some(InFlight {
                    packet: p,
                    start: t,
                    corrupted: false,
                });
                started = Some(p);
            } else if !self.scheduler.state().is_empty() {
                return Err(RunError::InvalidConfig(format!("scheduler idled at t={t} with packets pending")));
            }
        }
        let d = self
            .adversary
            .after_schedule(&view(self.config, &self.scheduler, self.in_flight, self.last_error, t, started, opened));
        self.apply(t, ErrorEvent::post(t), d)?;

        self.fire_errors(t, Slot::PostSchedule);
        Ok(())
    }
}

/// Simulates `config` on `[0, horizon]`. Deterministic in the config.
pub fn run(config: &RunConfig) -> Result<ExecutionTrace, RunError> {
    config.validate()?;
    let params = &config.params;
    let mut source = match &config.arrivals {
        ArrivalSpec::None => Vec::new(),
        ArrivalSpec::Scripted(packets) => packets.clone(),
        ArrivalSpec::Poisson { lambda, p } => generate_poisson_arrivals(
            &StochasticArrivalConfig {
                lambda: *lambda,
                p: *p,
                seed: config.seed,
                horizon: config.horizon,
            },
            params,
        )?,
    };
    source.retain(|p| p.arrival_time <= config.horizon);
    source.sort_by_key(|p| (p.arrival_time, p.id));
    let first_free_id = source.iter().map(|p| p.id.0 + 1).max().unwrap_or(0);

    let scheduler = Scheduler::new(config.scheduler.policy, params.clone(), config.scheduler_rates())?;
    let mut adversary = config.adversary.build(params);
    let ctx = AdversaryContext {
        params: params.clone(),
        feedback: config.feedback,
        first_free_id,
        adversarial_arrivals: config.arrivals == ArrivalSpec::None,
    };
    let initial = adversary.start(&ctx);
    let mut engine = Engine {
        config,
        scheduler,
        adversary,
        ids: HashSet::with_capacity(source.len()),
        arrivals: Vec::with_capacity(source.len()),
        errors: Vec::new(),
        pending_errors: BTreeSet::new(),
        transmissions: Vec::new(),
        off: Vec::new(),
        phases: Vec::new(),
        in_flight: None,
        first_hit: None,
        phase_flag: true,
        last_error: None,
    };
    if initial.inject_arrivals.iter().any(|p| p.arrival_time != 0) {
        return Err(engine.contract(0, "initial injections must arrive at 0".into()));
    }
    engine.pending_errors.extend(initial.errors.iter().filter(|e| e.time <= config.horizon));
    engine.off.extend(initial.off_transmissions);
    engine.phases.extend(initial.phases);
    // Initial injections join the source so they arrive with tick 0.
    source.splice(0..0, initial.inject_arrivals);
    source.sort_by_key(|p| (p.arrival_time, p.id));

    let mut source = source.into_iter().peekable();
    for t in 0..=config.horizon {
        engine.tick(t, &mut source)?;
    }

    let horizon = config.horizon;
    let keeps_off = engine.adversary.keeps_off();
    let mut off = std::mem::take(&mut engine.off);
    off.extend(engine.adversary.finish(horizon));
    off.retain(|r| r.end <= horizon);
    off.sort_by_key(|r| (r.start, r.end));
    let mut phases = std::mem::take(&mut engine.phases);
    phases.retain(|p| p.end <= horizon);
    let mut arrivals = engine.arrivals;
    arrivals.sort_by_key(|p| (p.arrival_time, p.id));

    Ok(ExecutionTrace {
        params: params.clone(),
        feedback_mode: config.feedback,
        horizon,
        scheduler: config.scheduler.policy.name().to_string(),
        adversary: config.adversary.name().to_string(),
        arrivals,
        errors: engine.errors,
        transmissions: engine.transmissions,
        off_transmissions: keeps_off.then_some(off),
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, PhaseKind};

    fn config(l_min: u64, l_max: u64, policy: Policy, adversary: AdversarySpec, arrivals: ArrivalSpec, horizon: Time) -> RunConfig {
        RunConfig {
            params: derive_params(l_min, l_max).unwrap(),
            feedback: FeedbackMode::Instantaneous,
            scheduler: SchedulerSpec::new(policy),
            adversary,
            arrivals,
            horizon,
            sample_every: 1,
            seed: 0,
        }
    }

    #[test]
    fn empty_run() {
        let c = config(1, 2, Policy::Sl, AdversarySpec::None, ArrivalSpec::None, 10);
        let t = run(&c).unwrap();
        assert!(t.transmissions.is_empty() && t.arrivals.is_empty());
        assert!(t.off_transmissions.is_none());
    }

    #[test]
    fn error_free_link_sends_everything() {
        let packets = vec![Packet::new(0, 2, 0), Packet::new(1, 1, 0), Packet::new(2, 1, 6)];
        let c = config(1, 2, Policy::Sl, AdversarySpec::None, ArrivalSpec::Scripted(packets), 10);
        let t = run(&c).unwrap();
        let got: Vec<(u64, u64, u64)> = t.transmissions.iter().map(|r| (r.packet_id.0, r.start, r.end)).collect();
        assert_eq!(got, vec![(1, 0, 1), (0, 1, 3), (2, 6, 7)]);
        assert_eq!(t.online_length_by(10), 4);
        t.validate().unwrap();
    }

    #[test]
    fn instantaneous_error_truncates_and_requeues() {
        let packets = vec![Packet::new(0, 2, 0)];
        let errors = vec![ErrorEvent::pre(1)];
        let c = config(1, 2, Policy::Ll, AdversarySpec::Scripted(errors), ArrivalSpec::Scripted(packets), 5);
        let t = run(&c).unwrap();
        assert_eq!(t.transmissions.len(), 2);
        assert_eq!((t.transmissions[0].end, t.transmissions[0].outcome), (1, Outcome::Corrupted));
        assert_eq!((t.transmissions[1].start, t.transmissions[1].end), (1, 3));
        assert!(t.transmissions[1].is_success());
    }

    #[test]
    fn post_error_hits_packet_started_same_tick() {
        let packets = vec![Packet::new(0, 1, 5)];
        let errors = vec![ErrorEvent::post(5)];
        let c = config(1, 2, Policy::Sl, AdversarySpec::Scripted(errors), ArrivalSpec::Scripted(packets), 8);
        let t = run(&c).unwrap();
        assert_eq!((t.transmissions[0].start, t.transmissions[0].end), (5, 5));
        assert_eq!((t.transmissions[1].start, t.transmissions[1].end), (6, 7));
    }

    #[test]
    fn deferred_error_occupies_full_length() {
        let packets = vec![Packet::new(0, 4, 0)];
        let errors = vec![ErrorEvent::pre(2)];
        let mut c = config(4, 4, Policy::Sl, AdversarySpec::Scripted(errors), ArrivalSpec::Scripted(packets), 10);
        c.feedback = FeedbackMode::Deferred;
        let t = run(&c).unwrap();
        let r = t.transmissions[0];
        assert_eq!((r.start, r.end, r.outcome, r.corrupted_at), (0, 4, Outcome::Corrupted, Some(2)));
        assert_eq!((t.transmissions[1].start, t.transmissions[1].end), (4, 8));
    }

    #[test]
    fn adv_arrival_cycle_at_one_two() {
        let c = config(1, 2, Policy::SlPreamble, AdversarySpec::AdvArrival, ArrivalSpec::None, 4);
        let t = run(&c).unwrap();
        let kinds: Vec<PhaseKind> = t.phases.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![PhaseKind::LongOpening, PhaseKind::LongOpening, PhaseKind::ShortOpening]);
        assert_eq!(t.online_length_by(4), 2);
        assert_eq!(t.off_length_by(4), Some(4));
        t.validate().unwrap();
    }

    #[test]
    fn rejects_bad_sampling() {
        let mut c = config(1, 2, Policy::Sl, AdversarySpec::None, ArrivalSpec::None, 10);
        c.sample_every = 0;
        assert!(run(&c).is_err());
        c.sample_every = 11;
        assert!(run(&c).is_err());
    }
}
