//! Stochastic arrival patterns: a Poisson process with a two-point length
//! distribution, plus the tail-frequency check used to validate it.

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::model::{InstanceParams, Packet, Rational, Time};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArrivalError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveRate(Rational),
    #[error("p must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(Rational),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("eta ({eta}) must lie strictly between 0 and lambda ({lambda})")]
    LowerRate { eta: Rational, lambda: Rational },
    #[error("eta_prime ({eta_prime}) must exceed lambda ({lambda})")]
    UpperRate { eta_prime: Rational, lambda: Rational },
    #[error("check time {t} is shorter than l_min")]
    ShortWindow { t: Time },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticArrivalConfig {
    pub lambda: Rational,
    /// Probability that a packet has length `l_min`.
    pub p: Rational,
    pub seed: u64,
    pub horizon: Time,
}

impl StochasticArrivalConfig {
    pub fn q(&self) -> Rational {
        Rational::from(1) - self.p
    }

    pub fn validate(&self) -> Result<(), ArrivalError> {
        if self.lambda <= Rational::zero() {
            return Err(ArrivalError::NonPositiveRate(self.lambda));
        }
        if self.p < Rational::zero() || self.p > Rational::from(1) {
            return Err(ArrivalError::ProbabilityOutOfRange(self.p));
        }
        if self.horizon == 0 {
            return Err(ArrivalError::ZeroHorizon);
        }
        Ok(())
    }
}

/// Draws a Poisson arrival pattern on `[0, horizon]`.
///
/// Inter-arrival gaps are exponential with rate `lambda`; the continuous
/// instants are floored to ticks, so several packets may share a tick. Ids
/// are assigned `0, 1, 2, ...` in arrival order.
pub fn generate_poisson_arrivals(
    config: &StochasticArrivalConfig,
    params: &InstanceParams,
) -> Result<Vec<Packet>, ArrivalError> {
    config.validate()?;
    let rate = config.lambda.to_f64().expect("finite rational");
    let exp = Exp::new(rate).expect("positive rate");
    let numer = *config.p.numer() as u64;
    let denom = *config.p.denom() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity((rate * config.horizon as f64 * 1.05) as usize + 16);
    let mut instant = 0.0f64;
    loop {
        instant += exp.sample(&mut rng);
        let tick = instant.floor();
        if tick > config.horizon as f64 {
            break;
        }
        let short = rng.gen_range(0..denom) < numer;
        let length = if short { params.l_min() } else { params.l_max() };
        out.push(Packet::new(out.len() as u64, length, tick as Time));
    }
    Ok(out)
}

/// Fractions of trials whose `l_min` count by `t` fell outside the band
/// `[t·eta·p, t·eta_prime·p]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailReport {
    pub freq_below_lower: Rational,
    pub freq_above_upper: Rational,
}

/// Runs `trials` generations with seeds `config.seed, config.seed + 1, ...`
/// and counts how often the number of short packets arrived by `t` leaves
/// the band.
pub fn empirical_tail_check(
    config: &StochasticArrivalConfig,
    params: &InstanceParams,
    eta: Rational,
    eta_prime: Rational,
    t: Time,
    trials: u32,
) -> Result<TailReport, ArrivalError> {
    if eta <= Rational::zero() || eta >= config.lambda {
        return Err(ArrivalError::LowerRate {
            eta,
            lambda: config.lambda,
        });
    }
    if eta_prime <= config.lambda {
        return Err(ArrivalError::UpperRate {
            eta_prime,
            lambda: config.lambda,
        });
    }
    if t < params.l_min() {
        return Err(ArrivalError::ShortWindow { t });
    }
    let lower = Rational::from(t as i64) * eta * config.p;
    let upper = Rational::from(t as i64) * eta_prime * config.p;
    let (mut below, mut above) = (0i64, 0i64);
    for i in 0..trials {
        let trial = StochasticArrivalConfig {
            seed: config.seed.wrapping_add(i as u64),
            horizon: t,
            ..config.clone()
        };
        let packets = generate_poisson_arrivals(&trial, params)?;
        let shorts = packets
            .iter()
            .filter(|p| p.length == params.l_min() && p.arrival_time <= t)
            .count() as i64;
        let shorts = Rational::from(shorts);
        if shorts < lower {
            below += 1;
        }
        if shorts > upper {
            above += 1;
        }
    }
    let n = (trials as i64).max(1);
    Ok(TailReport {
        freq_below_lower: Rational::new(below, n),
        freq_above_upper: Rational::new(above, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_params;

    fn cfg(lambda: Rational, p: Rational, seed: u64, horizon: Time) -> StochasticArrivalConfig {
        StochasticArrivalConfig {
            lambda,
            p,
            seed,
            horizon,
        }
    }

    #[test]
    fn p_one_gives_only_short() {
        let params = derive_params(1, 2).unwrap();
        let c = cfg(Rational::from(1), Rational::from(1), 7, 5_000);
        let pk = generate_poisson_arrivals(&c, &params).unwrap();
        assert!(!pk.is_empty());
        assert!(pk.iter().all(|p| p.length == 1));
    }

    #[test]
    fn deterministic_for_seed() {
        let params = derive_params(2, 5).unwrap();
        let c = cfg(Rational::new(3, 4), Rational::new(1, 3), 99, 10_000);
        assert_eq!(
            generate_poisson_arrivals(&c, &params).unwrap(),
            generate_poisson_arrivals(&c, &params).unwrap()
        );
    }

    #[test]
    fn ordered_and_in_range() {
        let params = derive_params(1, 3).unwrap();
        let c = cfg(Rational::from(2), Rational::new(1, 2), 3, 2_000);
        let pk = generate_poisson_arrivals(&c, &params).unwrap();
        assert!(pk.windows(2).all(|w| w[0].arrival_time <= w[1].arrival_time));
        assert!(pk.iter().all(|p| p.arrival_time <= 2_000));
        assert!(pk.iter().enumerate().all(|(i, p)| p.id.0 == i as u64));
    }

    #[test]
    fn count_near_mean_for_most_seeds() {
        let params = derive_params(1, 2).unwrap();
        let good = (0..100u64)
            .filter(|&s| {
                let c = cfg(Rational::new(1, 10), Rational::new(1, 2), s, 1_000_000);
                let n = generate_poisson_arrivals(&c, &params).unwrap().len() as f64;
                (n - 100_000.0).abs() <= 5_000.0
            })
            .count();
        assert!(good >= 95, "only {good} of 100 seeds within 5%");
    }

    #[test]
    fn length_marginal() {
        let params = derive_params(1, 2).unwrap();
        let c = cfg(Rational::from(1), Rational::new(3, 10), 11, 200_000);
        let pk = generate_poisson_arrivals(&c, &params).unwrap();
        assert!(pk.len() >= 100_000);
        let frac = pk.iter().filter(|p| p.length == 1).count() as f64 / pk.len() as f64;
        assert!((frac - 0.3).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn rejects_bad_config() {
        let params = derive_params(1, 2).unwrap();
        let c = cfg(Rational::zero(), Rational::new(1, 2), 0, 10);
        assert!(matches!(
            generate_poisson_arrivals(&c, &params),
            Err(ArrivalError::NonPositiveRate(_))
        ));
        let c = cfg(Rational::from(1), Rational::new(3, 2), 0, 10);
        assert!(matches!(
            generate_poisson_arrivals(&c, &params),
            Err(ArrivalError::ProbabilityOutOfRange(_))
        ));
        let c = cfg(Rational::from(1), Rational::new(1, 2), 0, 10);
        assert!(empirical_tail_check(&c, &params, Rational::from(1), Rational::from(2), 10, 5).is_err());
        assert!(empirical_tail_check(&c, &params, Rational::new(1, 2), Rational::from(1), 10, 5).is_err());
    }

    #[test]
    fn upper_tail_trivial_when_band_exceeds_arrivals() {
        // With p = 1 and eta_prime·p ≥ 1/l_min the band is wide; hits are rare.
        let params = derive_params(1, 2).unwrap();
        let c = cfg(Rational::new(1, 2), Rational::from(1), 5, 100);
        let r = empirical_tail_check(&c, &params, Rational::new(1, 4), Rational::from(1), 1_000, 50).unwrap();
        assert!(r.freq_above_upper <= Rational::new(1, 50));
    }
}
