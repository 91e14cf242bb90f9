use crate::error::{Error, Result};

/// Producer of a state-dependent arrival-rate profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSource {
    /// Extracted from the steady state of the occupancy-vector CTMC.
    MarkovChain,
    /// Fitted closed-form expressions in `rho` and `R`.
    ClosedForm,
}

/// State-dependent arrival rates `lambda_n` seen by a single tagged queue:
/// `rates[n]` is the arrival rate when the queue holds `n` customers,
/// tabulated for `n = 0..L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRateProfile {
    rates: Vec<f64>,
    source: RateSource,
}

impl ArrivalRateProfile {
    pub fn new(rates: Vec<f64>, source: RateSource) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::Parameter(format!(
                "arrival-rate profile needs at least 2 levels, got {}",
                rates.len()
            )));
        }
        for (n, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Numerical(format!(
                    "arrival rate at level {n} must be finite and non-negative, got {r}"
                )));
            }
        }
        Ok(ArrivalRateProfile { rates, source })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn source(&self) -> RateSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Producer of a join-probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinSource {
    /// Mass of CTMC states whose minimum occupancy is `n`.
    MarkovChain,
    /// Stationary distribution of the single-queue birth-death ladder.
    BirthDeath,
}

/// Distribution of the occupancy a tagged arrival finds at the queue it
/// joins: `probs[n] = A_n`, for `n = 0..L2`, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinProbabilities {
    probs: Vec<f64>,
    source: JoinSource,
}

impl JoinProbabilities {
    /// Tolerance on `sum A_n = 1` accepted at construction.
    pub const SUM_EPS: f64 = 1e-9;

    pub fn new(probs: Vec<f64>, source: JoinSource) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Parameter("join probabilities are empty".into()));
        }
        let mut sum = 0.0;
        for (n, &p) in probs.iter().enumerate() {
            if !(p.is_finite() && (-Self::SUM_EPS..=1.0 + Self::SUM_EPS).contains(&p)) {
                return Err(Error::Numerical(format!(
                    "join probability at level {n} outside [0, 1]: {p}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > Self::SUM_EPS {
            return Err(Error::Numerical(format!(
                "join probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(JoinProbabilities { probs, source })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn source(&self) -> JoinSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}
