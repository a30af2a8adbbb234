//! Hand-checked traces of the adversarial constructions.

use std::collections::BTreeMap;

use linksched_core::*;

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

fn spans(records: &[TransmissionRecord]) -> Vec<(Time, Time, u64)> {
    records.iter().filter(|r| r.is_success()).map(|r| (r.start, r.end, r.length)).collect()
}

/// Independent replay of SL-Preamble against the long/short phase
/// construction at lengths (1, 2): returns (online, OFF) delivered by each
/// phase end. With no short packets banked the sender opens long and OFF
/// gets one injected short; with two banked it sends both while OFF sends
/// one long.
fn replay_one_two(phases: usize) -> Vec<(Time, u64, u64)> {
    let (mut t, mut banked, mut alg, mut off) = (0, 0, 0, 0);
    let mut out = Vec::new();
    for _ in 0..phases {
        if banked >= 2 {
            banked -= 2;
            t += 2;
            alg += 2;
            off += 2;
        } else {
            banked += 1;
            t += 1;
            off += 1;
        }
        out.push((t, alg, off));
    }
    out
}

#[test]
fn adv_arrival_matches_replay() {
    let trace = run(&config(1, 2, Policy::SlPreamble, AdversarySpec::AdvArrival, ArrivalSpec::None, 400)).unwrap();
    let expected = replay_one_two(trace.phases.len());
    let got: Vec<(Time, u64, u64)> = trace
        .phases
        .iter()
        .map(|p| (p.end, trace.online_length_by(p.end), trace.off_length_by(p.end).unwrap()))
        .collect();
    assert_eq!(got, expected);
    assert_eq!(trace.phases.len(), 300);
    trace.validate().unwrap();
}

#[test]
fn adv_arrival_phase_types() {
    let trace = run(&config(1, 2, Policy::SlPreamble, AdversarySpec::AdvArrival, ArrivalSpec::None, 4)).unwrap();
    // Type 1 at 0: one short injected, OFF sends it, error at 1.
    assert_eq!(trace.phases[0], PhaseRecord { start: 0, end: 1, kind: PhaseKind::LongOpening });
    assert_eq!(trace.errors[0], ErrorEvent::pre(1));
    assert_eq!(trace.online_length_by(1), 0);
    // Type 2 at 2 with two shorts banked: online 2, OFF one long, error at 4.
    assert_eq!(trace.phases[2], PhaseRecord { start: 2, end: 4, kind: PhaseKind::ShortOpening });
    assert_eq!(spans(&trace.transmissions), vec![(2, 3, 1), (3, 4, 1)]);
    let off = trace.off_transmissions.as_ref().unwrap();
    assert_eq!(spans(off), vec![(0, 1, 1), (1, 2, 1), (2, 4, 2)]);

    let census = phase_census(&trace).unwrap();
    assert_eq!(census.p1, 2);
    assert_eq!(census.p2, BTreeMap::from([(2, 1)]));
    assert_eq!(census.adversarial_ratio(&trace.params), Rational::new(1, 2));
}

#[test]
fn adv_arrival_errors_land_at_phase_lengths() {
    for (l_min, l_max) in [(1, 2), (2, 5), (2, 3), (1, 3)] {
        for policy in [Policy::SlPreamble, Policy::Sl, Policy::Ll] {
            let trace = run(&config(l_min, l_max, policy, AdversarySpec::AdvArrival, ArrivalSpec::None, 2_000)).unwrap();
            let params = &trace.params;
            for p in &trace.phases {
                let expected = match p.kind {
                    PhaseKind::LongOpening => params.gamma_hat() * l_min,
                    PhaseKind::ShortOpening => l_max,
                    other => panic!("unexpected phase {other:?}"),
                };
                assert_eq!(p.end - p.start, expected);
            }
            trace.validate().unwrap();
        }
    }
}

#[test]
fn sl_killer_cycles() {
    for (l_min, l_max) in [(1, 2), (1, 3), (2, 5)] {
        let cycle = l_min + l_max;
        let trace = run(&config(l_min, l_max, Policy::Sl, AdversarySpec::SlKiller, ArrivalSpec::None, 50 * cycle)).unwrap();
        trace.validate().unwrap();
        for k in 1..=50 {
            let t = k * cycle;
            assert_eq!(trace.online_length_by(t), k * l_min, "t = {t}");
            assert_eq!(trace.off_length_by(t), Some(k * cycle), "t = {t}");
        }
        let last = relative_throughput(&trace, DenominatorKind::ConstructionOff, cycle).unwrap();
        assert_eq!(last.samples[0].ratio, Rational::new(l_min as i64, cycle as i64));
    }
}

#[test]
fn sl_killer_first_half_cycle() {
    let trace = run(&config(1, 2, Policy::Sl, AdversarySpec::SlKiller, ArrivalSpec::None, 3)).unwrap();
    // At OFF's long completion SL has sent its short; OFF leads by l_max - l_min.
    assert_eq!(trace.online_length_by(2), 1);
    assert_eq!(trace.off_length_by(2), Some(2));
}

#[test]
fn ll_killer_starves_ll() {
    for arrivals in [
        ArrivalSpec::None,
        ArrivalSpec::Poisson { lambda: Rational::from(1), p: Rational::new(1, 2) },
    ] {
        let mut c = config(1, 2, Policy::Ll, AdversarySpec::LlKiller, arrivals, 5_000);
        c.seed = 3;
        let trace = run(&c).unwrap();
        trace.validate().unwrap();
        assert_eq!(trace.online_length_by(5_000), 0);
        assert!(trace.off_length_by(5_000).unwrap() > 0);
    }
}

#[test]
fn ll_killer_blocks_without_long() {
    // Only short packets: LL never starts a long one, so nobody progresses.
    let packets = (0..5).map(|i| Packet::new(i, 1, 0)).collect();
    let trace = run(&config(1, 2, Policy::Ll, AdversarySpec::LlKiller, ArrivalSpec::Scripted(packets), 50)).unwrap();
    assert_eq!(trace.online_length_by(50), 0);
    assert_eq!(trace.off_length_by(50), Some(0));
    assert_eq!(trace.errors.len(), 51);
}

#[test]
fn deferred_killer_midpoints_and_off() {
    let mut c = config(4, 4, Policy::Sl, AdversarySpec::DeferredKiller, ArrivalSpec::None, 40);
    c.feedback = FeedbackMode::Deferred;
    let trace = run(&c).unwrap();
    trace.validate().unwrap();
    let times: Vec<Time> = trace.errors.iter().map(|e| e.time).collect();
    assert_eq!(times, vec![2, 6, 10, 14, 18, 22, 26, 30, 34, 38]);
    let off = spans(trace.off_transmissions.as_ref().unwrap());
    assert_eq!(&off[..3], &[(2, 6, 4), (6, 10, 4), (10, 14, 4)]);
    assert_eq!(trace.online_length_by(40), 0);
}

#[test]
fn deferred_killer_single_transmission() {
    let mut c = config(4, 4, Policy::Sl, AdversarySpec::DeferredKiller, ArrivalSpec::Scripted(vec![Packet::new(0, 4, 0)]), 3);
    c.feedback = FeedbackMode::Deferred;
    let trace = run(&c).unwrap();
    assert_eq!(trace.errors, vec![ErrorEvent::pre(2)]);
}

#[test]
fn deferred_killer_unit_length_uses_post_slot() {
    let mut c = config(1, 1, Policy::Sl, AdversarySpec::DeferredKiller, ArrivalSpec::None, 5);
    c.feedback = FeedbackMode::Deferred;
    let trace = run(&c).unwrap();
    assert!(trace.errors.iter().all(|e| e.slot == Slot::PostSchedule));
    assert_eq!(trace.online_length_by(5), 0);
}

#[test]
fn sl_stochastic_killer_long_interval() {
    // A long packet banked by OFF, then a short one for SL to open with.
    let packets = vec![Packet::new(0, 2, 0), Packet::new(1, 1, 1)];
    let trace = run(&config(1, 2, Policy::Sl, AdversarySpec::SlStochasticKiller, ArrivalSpec::Scripted(packets), 4)).unwrap();
    trace.validate().unwrap();
    // Interval [1, 4]: OFF sends the long then the short; SL only its short.
    assert_eq!(trace.off_length_by(4), Some(3));
    assert_eq!(trace.online_length_by(4), 1);
}

#[test]
fn sl_stochastic_killer_without_shorts() {
    let mut c = config(1, 2, Policy::Sl, AdversarySpec::SlStochasticKiller, ArrivalSpec::Poisson { lambda: Rational::from(1), p: Rational::from(0) }, 1_000);
    c.seed = 1;
    let trace = run(&c).unwrap();
    assert_eq!(trace.online_length_by(1_000), 0);
    assert_eq!(trace.off_length_by(1_000), Some(0));
    let s = relative_throughput(&trace, DenominatorKind::ConstructionOff, 100).unwrap();
    assert!(s.samples.iter().all(|x| x.ratio == Rational::from(1)));
}

#[test]
fn stochastic_census_counts_online_shorts() {
    for seed in 0..5 {
        let mut c = config(
            1,
            2,
            Policy::CslPreamble,
            AdversarySpec::Stochastic,
            ArrivalSpec::Poisson { lambda: Rational::new(6, 5), p: Rational::new(1, 2) },
            5_000,
        );
        c.seed = seed;
        let trace = run(&c).unwrap();
        trace.validate().unwrap();
        let census = phase_census(&trace).unwrap();
        let shorts_in_2a: u64 = trace
            .phases
            .iter()
            .filter(|p| p.kind == PhaseKind::ShortOpeningOffLong)
            .map(|p| {
                trace
                    .transmissions
                    .iter()
                    .filter(|r| r.is_success() && r.length == 1 && r.end > p.start && r.end <= p.end)
                    .count() as u64
            })
            .sum();
        let weighted: u64 = census.r_2a.iter().map(|(j, c)| j * c).sum();
        assert_eq!(weighted, shorts_in_2a);
        assert!(census.r_1a.keys().all(|&j| (1..=trace.params.gamma_hat()).contains(&j)));
        assert!(census.r_2a.keys().all(|&j| j <= trace.params.gamma_bar()));
        for p in trace.phases.iter().filter(|p| p.kind == PhaseKind::ShortOpeningOffLong) {
            let off_long = trace
                .off_transmissions
                .as_ref()
                .unwrap()
                .iter()
                .filter(|r| r.length == 2 && r.start >= p.start && r.end <= p.end)
                .count();
            assert_eq!(off_long, 1);
        }
    }
}

#[test]
fn census_without_errors_is_empty() {
    let packets = vec![Packet::new(0, 1, 0)];
    let mut trace = run(&config(1, 2, Policy::Sl, AdversarySpec::None, ArrivalSpec::Scripted(packets), 10)).unwrap();
    assert!(phase_census(&trace).is_err());
    trace.adversary = "stochastic".into();
    assert!(phase_census(&trace).unwrap().is_empty());
}

#[test]
fn single_length_is_optimal_at_phase_ends() {
    let packets: Vec<Packet> = (0..20).map(|i| Packet::new(i, 3, i * 2)).collect();
    let errors = vec![ErrorEvent::pre(4), ErrorEvent::post(9), ErrorEvent::pre(20), ErrorEvent::pre(22)];
    let c = config(3, 3, Policy::SlPreamble, AdversarySpec::Scripted(errors.clone()), ArrivalSpec::Scripted(packets), 60);
    let trace = run(&c).unwrap();
    let times: Vec<Time> = errors.iter().map(|e| e.time).chain([60]).collect();
    for s in throughput_at(&trace, DenominatorKind::ExactOpt, &times).unwrap() {
        assert_eq!(s.ratio, Rational::from(1), "t = {}", s.t);
    }
}

#[test]
fn empty_arrivals_give_ratio_one() {
    let trace = run(&config(1, 2, Policy::Sl, AdversarySpec::None, ArrivalSpec::None, 100)).unwrap();
    let s = relative_throughput(&trace, DenominatorKind::ExactOpt, 10).unwrap();
    assert_eq!(s.samples.len(), 10);
    assert!(s.samples.iter().all(|x| x.ratio == Rational::from(1)));
}

#[test]
fn exact_opt_dominates_on_construction_traces() {
    let runs = [
        config(1, 2, Policy::SlPreamble, AdversarySpec::AdvArrival, ArrivalSpec::None, 3_000),
        config(1, 2, Policy::Sl, AdversarySpec::SlKiller, ArrivalSpec::None, 3_000),
        config(1, 2, Policy::CslPreamble, AdversarySpec::Stochastic, ArrivalSpec::Poisson { lambda: Rational::new(2, 5), p: Rational::new(1, 2) }, 3_000),
    ];
    for c in runs {
        let trace = run(&c).unwrap();
        let opt = relative_throughput(&trace, DenominatorKind::ExactOpt, 10).unwrap();
        let off = relative_throughput(&trace, DenominatorKind::ConstructionOff, 10).unwrap();
        for (o, f) in opt.samples.iter().zip(&off.samples) {
            assert!(o.l_alg <= o.l_ref);
            assert!(f.l_ref <= o.l_ref, "OFF beats OPT at t = {}", o.t);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let c = config(2, 5, Policy::CslPreamble, AdversarySpec::Stochastic, ArrivalSpec::Poisson { lambda: Rational::new(1, 2), p: Rational::new(1, 3) }, 5_000);
    assert_eq!(run(&c).unwrap(), run(&c).unwrap());
}
