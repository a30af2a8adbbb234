//! Subcommand bodies. Each returns the text to write; `main` owns the files.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use linksched_core::{
    brute_force_schedule, csl_select_policy, derive_params, exact_opt_two_lengths, long_run_estimate, mean_ratio,
    reduce_3partition, relative_throughput, run, to_decimal, AdversarySpec, ArrivalSpec, DenominatorKind,
    FeedbackMode, InstanceParams, MetricsError, OfflineInstance, OptSchedule, Policy, Rational, RunError,
    SolverError, ThroughputSeries, Time,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{parse_rational, ArrivalChoice, ConfigError, ExperimentSpec};
use crate::instance::{parse_instance, parse_partition, render_instance, FormatError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("seed {seed}: {source}")]
    Run { seed: u64, source: RunError },
    #[error("seed {seed}: {source}")]
    Metrics { seed: u64, source: MetricsError },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solvers disagree: exact_opt={dp} brute_force={brute}")]
    Disagree { dp: u64, brute: u64 },
    #[error("bad sweep value {value:?}: {detail}")]
    SweepValue { value: String, detail: String },
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub horizon: Option<Time>,
    pub sample_every: Option<Time>,
    pub denominator: Option<DenominatorKind>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<(), ConfigError> {
        if let Some(s) = &self.seeds {
            spec.seeds = s.clone();
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(s) = self.sample_every {
            spec.sample_every = s;
        }
        if let Some(d) = self.denominator {
            spec.denominator = d;
        }
        spec.check()
    }
}

fn read(path: &Path) -> Result<String, CommandError> {
    std::fs::read_to_string(path).map_err(|source| CommandError::Io { path: path.into(), source })
}

pub fn read_instance(path: &Path) -> Result<OfflineInstance, CommandError> {
    parse_instance(&read(path)?).map_err(|source| CommandError::Format { path: path.into(), source })
}

/// Loads a config; a relative `instance` path is resolved against the
/// config's directory.
pub fn load_spec(path: &Path, overrides: &Overrides) -> Result<ExperimentSpec, CommandError> {
    let mut spec = ExperimentSpec::parse(&read(path)?)?;
    if let Some(inst) = &spec.instance {
        if inst.is_relative() {
            spec.instance = Some(path.parent().unwrap_or(Path::new("")).join(inst));
        }
    }
    overrides.apply(&mut spec)?;
    Ok(spec)
}

/// Arrival source for the engine. Instance errors feed a scripted adversary.
fn prepare(spec: &ExperimentSpec) -> Result<(ArrivalSpec, AdversarySpec), CommandError> {
    let mut adversary = spec.adversary.clone();
    let arrivals = match spec.arrivals {
        ArrivalChoice::None => ArrivalSpec::None,
        ArrivalChoice::Poisson => ArrivalSpec::Poisson {
            lambda: spec.lambda.expect("checked"),
            p: spec.p.expect("checked"),
        },
        ArrivalChoice::Instance => {
            let inst = read_instance(spec.instance.as_ref().expect("checked"))?;
            if let AdversarySpec::Scripted(errors) = &mut adversary {
                *errors = inst.errors.clone();
            }
            ArrivalSpec::Scripted(inst.packets)
        }
    };
    Ok((arrivals, adversary))
}

fn sorted_seeds(spec: &ExperimentSpec) -> Vec<u64> {
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
}

fn series_for(spec: &ExperimentSpec, seed: u64) -> Result<ThroughputSeries, CommandError> {
    let (arrivals, adversary) = prepare(spec)?;
    let mut config = spec.run_config(seed, arrivals)?;
    config.adversary = adversary;
    let trace = run(&config).map_err(|source| CommandError::Run { seed, source })?;
    relative_throughput(&trace, spec.denominator, spec.sample_every).map_err(|source| CommandError::Metrics { seed, source })
}

pub struct RunOutput {
    pub csv: String,
    /// `t,mean_ratio` across seeds, present with two or more seeds.
    pub mean_csv: Option<String>,
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<RunOutput, CommandError> {
    let seeds = sorted_seeds(spec);
    let all: Vec<ThroughputSeries> = seeds
        .par_iter()
        .map(|&seed| series_for(spec, seed))
        .collect::<Result<_, _>>()?;

    let mut csv = String::from("t,L_alg,L_ref,ratio,seed\n");
    for (seed, series) in seeds.iter().zip(&all) {
        for s in &series.samples {
            writeln!(csv, "{},{},{},{},{seed}", s.t, s.l_alg, s.l_ref, to_decimal(s.ratio)).unwrap();
        }
    }
    let mean_csv = (all.len() >= 2).then(|| {
        let mut out = String::from("t,mean_ratio\n");
        for (i, s) in all[0].samples.iter().enumerate() {
            let ratios: Vec<Rational> = all.iter().map(|x| x.samples[i].ratio).collect();
            writeln!(out, "{},{}", s.t, to_decimal(mean_ratio(&ratios).expect("non-empty"))).unwrap();
        }
        out
    });
    Ok(RunOutput { csv, mean_csv })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Varies `l_max` with `l_min` fixed.
    Rho,
    Lambda,
    P,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rho" => Ok(SweepAxis::Rho),
            "lambda" => Ok(SweepAxis::Lambda),
            "p" => Ok(SweepAxis::P),
            other => Err(format!("unknown axis {other:?} (expected rho, lambda or p)")),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::Lambda => "lambda",
            SweepAxis::P => "p",
        }
    }
}

fn rate(r: Option<Rational>) -> Rational {
    r.unwrap_or_default()
}

/// The matching bound for a setup, when one applies.
pub fn bound_target(spec: &ExperimentSpec) -> Option<Rational> {
    let params = spec.params().ok()?;
    let rho = params.rho();
    let gamma = Rational::from(params.gamma_bar() as i64);
    if spec.feedback == FeedbackMode::Deferred {
        return Some(Rational::from(0));
    }
    match spec.adversary {
        AdversarySpec::AdvArrival => Some(gamma / (rho + gamma)),
        AdversarySpec::SlKiller | AdversarySpec::SlStochasticKiller => Some(Rational::from(1) / (rho + 1)),
        AdversarySpec::LlKiller | AdversarySpec::DeferredKiller => Some(Rational::from(0)),
        AdversarySpec::Stochastic => {
            let load = rate(spec.lambda) * rate(spec.p) * Rational::from(params.l_min() as i64);
            if load <= gamma / (rho * 2) {
                Some(gamma / (rho + gamma))
            } else {
                Some(load.min(gamma / rho))
            }
        }
        AdversarySpec::Scripted(_) | AdversarySpec::None => None,
    }
}

fn effective_policy(spec: &ExperimentSpec, params: &InstanceParams) -> Policy {
    match (spec.policy, spec.lambda, spec.p) {
        (Policy::CslPreamble, Some(l), Some(p)) => csl_select_policy(l, p, params),
        (policy, _, _) => policy,
    }
}

fn sweep_point(base: &ExperimentSpec, axis: SweepAxis, raw: &str) -> Result<(Rational, ExperimentSpec), CommandError> {
    let bad = |detail: String| CommandError::SweepValue { value: raw.into(), detail };
    let value = parse_rational(raw).map_err(bad)?;
    let mut spec = base.clone();
    match axis {
        SweepAxis::Rho => {
            if !value.is_integer() || value <= Rational::from(0) {
                return Err(bad("rho sweeps take integer l_max values".into()));
            }
            spec.l_max = value.to_integer() as u64;
        }
        SweepAxis::Lambda => spec.lambda = Some(value),
        SweepAxis::P => spec.p = Some(value),
    }
    spec.check().map_err(|e| bad(e.to_string()))?;
    Ok((value, spec))
}

pub fn cmd_sweep(base: &ExperimentSpec, axis: SweepAxis, values: &[String]) -> Result<String, CommandError> {
    let mut points = values
        .iter()
        .map(|v| sweep_point(base, axis, v).map(|(r, s)| (r, v.trim().to_string(), s)))
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by_key(|(r, _, _)| *r);
    points.dedup_by_key(|(r, _, _)| *r);

    let jobs: Vec<(usize, u64)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, (_, _, s))| sorted_seeds(s).into_iter().map(move |seed| (i, seed)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let spec = &points[i].2;
            let series = series_for(spec, seed)?;
            let est = long_run_estimate(&series, spec.window_fraction).map_err(|source| CommandError::Metrics { seed, source })?;
            let params = spec.params()?;
            let target = bound_target(spec).map(to_decimal).unwrap_or_default();
            Ok(format!(
                "{},{},{seed},{},{},{target},{}\n",
                axis.name(),
                points[i].1,
                to_decimal(est.estimate),
                est.converged,
                effective_policy(spec, &params).name()
            ))
        })
        .collect::<Result<Vec<String>, CommandError>>()?;

    let mut csv = String::from("axis,value,seed,final_ratio,converged,bound_target,policy\n");
    csv.extend(rows);
    Ok(csv)
}

fn lengths(instance: &OfflineInstance) -> Vec<u64> {
    let mut l: Vec<u64> = instance.packets.iter().map(|p| p.length).collect();
    l.sort_unstable();
    l.dedup();
    l
}

fn write_schedule(out: &mut String, opt: &OptSchedule) {
    let mut schedule = opt.schedule.clone();
    schedule.sort_by_key(|r| (r.start, r.packet_id));
    for r in schedule {
        writeln!(out, "tx {} {} {} {}", r.packet_id.0, r.start, r.end, r.length).unwrap();
    }
}

/// `opt_total=<n>` and the witness as `tx <id> <start> <end> <length>`
/// lines. Two-length instances use the frontier solver, others brute force.
pub fn cmd_oracle(instance: &OfflineInstance, check: bool, decision: Option<u64>) -> Result<String, CommandError> {
    let ls = lengths(instance);
    let mut out = String::new();
    let opt = match ls.as_slice() {
        [] => OptSchedule { max_total_length: 0, schedule: Vec::new() },
        [a] | [a, _] => {
            let params = derive_params(*a, *ls.last().expect("non-empty")).expect("positive lengths");
            let dp = exact_opt_two_lengths(instance, &params)?;
            if check {
                let brute = brute_force_schedule(instance)?.max_total_length;
                writeln!(out, "exact_opt={}", dp.max_total_length).unwrap();
                writeln!(out, "brute_force={brute}").unwrap();
                if brute != dp.max_total_length {
                    return Err(CommandError::Disagree { dp: dp.max_total_length, brute });
                }
            }
            dp
        }
        _ => brute_force_schedule(instance)?,
    };
    let mut report = format!("opt_total={}\n", opt.max_total_length);
    report.push_str(&out);
    write_schedule(&mut report, &opt);
    if let Some(t) = decision {
        let answer = if opt.max_total_length >= t { "yes" } else { "no" };
        writeln!(report, "decision T={t} {answer}").unwrap();
    }
    Ok(report)
}

pub fn cmd_reduce(path: &Path) -> Result<String, CommandError> {
    let input = parse_partition(&read(path)?).map_err(|source| CommandError::Format { path: path.into(), source })?;
    let inst = reduce_3partition(&input.elements, input.bound, input.count)?;
    Ok(render_instance(&inst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;

    fn spec(text: &str) -> ExperimentSpec {
        ExperimentSpec::parse(text).unwrap()
    }

    #[test]
    fn bound_targets() {
        let base = "l_min=1\nl_max=2\nscheduler=sl-preamble\nhorizon=10\n";
        let adv = |a: &str, extra: &str| spec(&format!("{base}adversary={a}\n{extra}"));
        assert_eq!(bound_target(&adv("adv-arrival", "")), Some(Rational::new(1, 2)));
        let s = spec("l_min=2\nl_max=5\nscheduler=sl-preamble\nadversary=adv-arrival\nhorizon=10\n");
        assert_eq!(bound_target(&s), Some(Rational::new(4, 9)));
        assert_eq!(bound_target(&adv("sl-killer", "")), Some(Rational::new(1, 3)));
        assert_eq!(bound_target(&adv("ll-killer", "")), Some(Rational::from(0)));
        assert_eq!(bound_target(&adv("stochastic", "lambda=2/5\np=1/2\n")), Some(Rational::new(1, 2)));
        assert_eq!(bound_target(&adv("stochastic", "lambda=6/5\np=1/2\n")), Some(Rational::new(3, 5)));
        assert_eq!(bound_target(&adv("stochastic", "lambda=3\np=1/2\n")), Some(Rational::from(1)));
        assert_eq!(bound_target(&adv("scripted", "")), None);
    }

    #[test]
    fn rho_targets_are_half_for_integer_rho() {
        for l_max in [2, 3, 4] {
            let s = spec(&format!("l_min=1\nl_max={l_max}\nscheduler=sl-preamble\nadversary=adv-arrival\nhorizon=10\n"));
            assert_eq!(bound_target(&s), Some(Rational::new(1, 2)));
        }
    }

    #[test]
    fn oracle_reports() {
        let empty = parse_instance("horizon 5").unwrap();
        assert_eq!(cmd_oracle(&empty, true, Some(0)).unwrap(), "opt_total=0\ndecision T=0 yes\n");

        let inst = parse_instance("arrival 0 1\narrival 0 2\nerror 2\nhorizon 6").unwrap();
        let out = cmd_oracle(&inst, true, Some(4)).unwrap();
        assert!(out.starts_with("opt_total=3\nexact_opt=3\nbrute_force=3\n"), "{out}");
        assert_eq!(out.lines().filter(|l| l.starts_with("tx ")).count(), 2);
        assert!(out.ends_with("decision T=4 no\n"));
    }

    #[test]
    fn oracle_rejects_oversize_arbitrary_lengths() {
        let text: String = (0..13).map(|i| format!("arrival 0 {}\n", i % 3 + 1)).collect::<String>() + "horizon 50\n";
        let inst = parse_instance(&text).unwrap();
        assert!(matches!(cmd_oracle(&inst, false, None), Err(CommandError::Solver(SolverError::Oversize { .. }))));
    }
}
