//! Shared fixtures for the benchmarks.

use linksched_core::{
    derive_params, generate_poisson_arrivals, AdversarySpec, ArrivalSpec, ErrorEvent, FeedbackMode,
    InstanceParams, OfflineInstance, Policy, Rational, RunConfig, SchedulerSpec, StochasticArrivalConfig,
    Time,
};

pub fn params(l_min: u64, l_max: u64) -> InstanceParams {
    derive_params(l_min, l_max).expect("valid lengths")
}

/// Poisson packets with an error every `gap` ticks, alternating slots.
pub fn periodic_instance(params: &InstanceParams, horizon: Time, gap: Time, seed: u64) -> OfflineInstance {
    let cfg = StochasticArrivalConfig {
        lambda: Rational::new(1, 2),
        p: Rational::new(1, 2),
        seed,
        horizon,
    };
    let packets = generate_poisson_arrivals(&cfg, params).expect("valid arrival config");
    let errors = (1..=horizon / gap)
        .map(|k| if k % 2 == 0 { ErrorEvent::pre(k * gap) } else { ErrorEvent::post(k * gap) })
        .collect();
    OfflineInstance::new(packets, errors, horizon).expect("valid instance")
}

/// At most `n` packets and a handful of errors, small enough for brute force.
pub fn small_instance(params: &InstanceParams, n: usize, seed: u64) -> OfflineInstance {
    let inst = periodic_instance(params, 4 * n as Time, 5, seed);
    let packets = inst.packets.into_iter().take(n).collect();
    let errors = inst.errors.into_iter().take(8).collect();
    OfflineInstance::new(packets, errors, inst.horizon).expect("valid instance")
}

pub fn stochastic_run(horizon: Time, seed: u64) -> RunConfig {
    RunConfig {
        params: params(1, 2),
        feedback: FeedbackMode::Instantaneous,
        scheduler: SchedulerSpec::new(Policy::CslPreamble),
        adversary: AdversarySpec::Stochastic,
        arrivals: ArrivalSpec::Poisson { lambda: Rational::new(3, 5), p: Rational::new(1, 2) },
        horizon,
        sample_every: horizon,
        seed,
    }
}

pub fn adv_arrival_run(horizon: Time) -> RunConfig {
    RunConfig {
        params: params(2, 5),
        feedback: FeedbackMode::Instantaneous,
        scheduler: SchedulerSpec::new(Policy::SlPreamble),
        adversary: AdversarySpec::AdvArrival,
        arrivals: ArrivalSpec::None,
        horizon,
        sample_every: horizon,
        seed: 0,
    }
}
