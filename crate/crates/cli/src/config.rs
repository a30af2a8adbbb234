//! Flat `key=value` experiment configs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use linksched_core::{
    derive_params, AdversarySpec, ArrivalSpec, DenominatorKind, FeedbackMode, InstanceParams, Policy, Rational,
    RunConfig, SchedulerSpec, Time,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("bad value for {key}: {detail}")]
    Value { key: String, detail: String },
    #[error("seed list is empty")]
    NoSeeds,
}

const KEYS: &[&str] = &[
    "l_min",
    "l_max",
    "scheduler",
    "adversary",
    "feedback",
    "arrivals",
    "lambda",
    "p",
    "seed",
    "seeds",
    "horizon",
    "sample_every",
    "denominator",
    "instance",
    "window_fraction",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrivalChoice {
    None,
    Poisson,
    Instance,
}

/// A parsed config before any instance file is loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentSpec {
    pub l_min: u64,
    pub l_max: u64,
    pub policy: Policy,
    pub adversary: AdversarySpec,
    pub feedback: FeedbackMode,
    pub arrivals: ArrivalChoice,
    pub lambda: Option<Rational>,
    pub p: Option<Rational>,
    pub seeds: Vec<u64>,
    pub horizon: Time,
    pub sample_every: Time,
    pub denominator: DenominatorKind,
    pub instance: Option<PathBuf>,
    pub window_fraction: Rational,
}

/// Parses `"2/5"`, `"0.4"` or `"3"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
        let d: i64 = d.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
        if d == 0 {
            return Err(format!("{s:?}: zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("{s:?} is not a number"));
    }
    if frac.len() > 15 {
        return Err(format!("{s:?} has too many decimal places"));
    }
    let scale = 10i64.pow(frac.len() as u32);
    let digits = format!("{int}{frac}");
    let n: i64 = digits.parse().map_err(|e| format!("{s:?}: {e}"))?;
    let r = Rational::new(n, scale);
    Ok(if neg { -r } else { r })
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let seeds = s
        .split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(seeds)
}

fn parse_feedback(s: &str) -> Result<FeedbackMode, String> {
    match s {
        "instantaneous" => Ok(FeedbackMode::Instantaneous),
        "deferred" => Ok(FeedbackMode::Deferred),
        other => Err(format!("unknown feedback mode {other:?}")),
    }
}

fn parse_arrivals(s: &str) -> Result<ArrivalChoice, String> {
    match s {
        "none" => Ok(ArrivalChoice::None),
        "poisson" => Ok(ArrivalChoice::Poisson),
        "instance" => Ok(ArrivalChoice::Instance),
        other => Err(format!("unknown arrival source {other:?}")),
    }
}

fn value<T>(map: &BTreeMap<String, String>, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
    map.get(key)
        .map(|v| f(v).map_err(|detail| ConfigError::Value { key: key.into(), detail }))
        .transpose()
}

fn required<T>(map: &BTreeMap<String, String>, key: &'static str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
    value(map, key, f)?.ok_or(ConfigError::Missing(key))
}

fn int(s: &str) -> Result<u64, String> {
    s.parse().map_err(|e| format!("{s:?}: {e}"))
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.into() })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey(k.into()));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key: k.into() });
            }
        }

        let seeds = match (value(&map, "seeds", parse_seeds)?, value(&map, "seed", int)?) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Value { key: "seed".into(), detail: "give either seed or seeds".into() })
            }
            (Some(s), None) => s,
            (None, Some(s)) => vec![s],
            (None, None) => vec![0],
        };
        let spec = Self {
            l_min: required(&map, "l_min", int)?,
            l_max: required(&map, "l_max", int)?,
            policy: required(&map, "scheduler", |s| s.parse::<Policy>().map_err(|e| e.to_string()))?,
            adversary: required(&map, "adversary", |s| s.parse::<AdversarySpec>().map_err(|e| e.to_string()))?,
            feedback: value(&map, "feedback", parse_feedback)?.unwrap_or(FeedbackMode::Instantaneous),
            arrivals: value(&map, "arrivals", parse_arrivals)?.unwrap_or(ArrivalChoice::None),
            lambda: value(&map, "lambda", parse_rational)?,
            p: value(&map, "p", parse_rational)?,
            seeds,
            horizon: required(&map, "horizon", int)?,
            sample_every: value(&map, "sample_every", int)?.unwrap_or(1),
            denominator: value(&map, "denominator", |s| s.parse::<DenominatorKind>().map_err(|e| e.to_string()))?
                .unwrap_or(DenominatorKind::ExactOpt),
            instance: map.get("instance").map(PathBuf::from),
            window_fraction: value(&map, "window_fraction", parse_rational)?.unwrap_or(Rational::new(1, 10)),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::NoSeeds);
        }
        self.params()?;
        if self.arrivals == ArrivalChoice::Poisson {
            if self.lambda.is_none() {
                return Err(ConfigError::Missing("lambda"));
            }
            if self.p.is_none() {
                return Err(ConfigError::Missing("p"));
            }
        }
        if self.arrivals == ArrivalChoice::Instance && self.instance.is_none() {
            return Err(ConfigError::Missing("instance"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<InstanceParams, ConfigError> {
        derive_params(self.l_min, self.l_max).map_err(|e| ConfigError::Value { key: "l_max".into(), detail: e.to_string() })
    }

    fn rates(&self) -> Option<(Rational, Rational)> {
        self.lambda.zip(self.p)
    }

    /// The engine config for one seed. `arrivals` carries any instance
    /// packets already loaded by the caller.
    pub fn run_config(&self, seed: u64, arrivals: ArrivalSpec) -> Result<RunConfig, ConfigError> {
        Ok(RunConfig {
            params: self.params()?,
            feedback: self.feedback,
            scheduler: SchedulerSpec { policy: self.policy, rates: self.rates() },
            adversary: self.adversary.clone(),
            arrivals,
            horizon: self.horizon,
            sample_every: self.sample_every,
            seed,
        })
    }
}
