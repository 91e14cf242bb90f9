use crate::error::{Error, Result};

/// Cluster-wide workload description: `r` parallel processor-sharing servers,
/// Poisson arrivals at total rate `lambda`, exponential service at rate `mu`
/// per customer. Arrivals join a server with the fewest customers, ties
/// broken uniformly at random.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub r: u32,
    pub lambda: f64,
    pub mu: f64,
}

impl SystemConfig {
    pub fn new(r: u32, lambda: f64, mu: f64) -> Result<Self> {
        if r < 1 {
            return Err(Error::Parameter("R must be at least 1".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Parameter(format!(
                "lambda must be finite and positive, got {lambda}"
            )));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Parameter(format!(
                "mu must be finite and positive, got {mu}"
            )));
        }
        Ok(SystemConfig { r, lambda, mu })
    }

    /// Builds the config from a target utilisation: `lambda = rho * R * mu`.
    pub fn from_rho(r: u32, rho: f64, mu: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Parameter(format!(
                "rho must be finite and positive, got {rho}"
            )));
        }
        SystemConfig::new(r, rho * r as f64 * mu, mu)
    }

    /// Traffic intensity `lambda / (R * mu)`.
    pub fn rho(&self) -> f64 {
        self.lambda / (self.r as f64 * self.mu)
    }

    /// The analytical methods require a stable system (`rho < 1`); the
    /// simulator does not call this and will run any positive-rate config.
    pub fn require_stable(&self) -> Result<()> {
        let rho = self.rho();
        if rho >= 1.0 {
            return Err(Error::Parameter(format!(
                "rho = {rho:.6} must be < 1 for analytical methods"
            )));
        }
        Ok(())
    }
}

/// Default per-server occupancy truncation for the occupancy-vector CTMC,
/// indexed by R = 1..=10. Chosen so the boundary carries negligible mass at
/// the utilisations of interest while the state space stays tractable.
const L1_DEFAULTS: [usize; 10] = [22, 22, 22, 13, 7, 5, 4, 3, 3, 2];

/// Cap on `(L1 + 1)^(2R)` accepted by [`Hyperparameters::validate`].
const L1_BOUND: f64 = 10e10;

/// Truncation and tolerance knobs shared by the analytical pipeline.
///
/// `l1` truncates each server's occupancy in the CTMC (states run 0..l1-1);
/// `l2` truncates the single-queue birth-death ladder that feeds the tail
/// transforms; `epsilon` is the generic convergence tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub l1: usize,
    pub l2: usize,
    pub epsilon: f64,
}

impl Hyperparameters {
    /// Defaults for a given cluster size: `l1` from the tuned table for
    /// R = 1..=10, the largest value passing [`validate`](Self::validate)
    /// (floored at 2) beyond that; `l2 = 130`, `epsilon = 1e-6`.
    pub fn defaults_for(r: u32) -> Self {
        let l1 = match r {
            1..=10 => L1_DEFAULTS[(r - 1) as usize],
            _ => {
                let mut l1 = 2;
                while ((l1 + 2) as f64).ln() * ((2 * r) as f64) < L1_BOUND.ln() {
                    l1 += 1;
                }
                l1
            }
        };
        Hyperparameters {
            l1,
            l2: 130,
            epsilon: 1e-6,
        }
    }

    pub fn with_l1(mut self, l1: usize) -> Self {
        self.l1 = l1;
        self
    }

    pub fn with_l2(mut self, l2: usize) -> Self {
        self.l2 = l2;
        self
    }

    /// Full validation for the CTMC pipeline. `(l1 + 1)^(2R) < 10e10` keeps
    /// the chain solve tractable; `l1 = 2` is always accepted as the floor.
    pub fn validate(&self, r: u32) -> Result<()> {
        self.validate_tail()?;
        if self.l1 < 2 {
            return Err(Error::Parameter(format!(
                "L1 must be at least 2, got {}",
                self.l1
            )));
        }
        if self.l2 < self.l1 {
            return Err(Error::Parameter(format!(
                "L2 = {} must be at least L1 = {}",
                self.l2, self.l1
            )));
        }
        let log_size = ((self.l1 + 1) as f64).ln() * (2 * r) as f64;
        if self.l1 > 2 && log_size >= L1_BOUND.ln() {
            return Err(Error::Parameter(format!(
                "(L1+1)^(2R) = ({}+1)^{} exceeds the 10e10 bound; lower L1",
                self.l1,
                2 * r
            )));
        }
        Ok(())
    }

    /// The closed-form pipeline only uses `l2` and `epsilon`.
    pub fn validate_tail(&self) -> Result<()> {
        if self.l2 < 2 {
            return Err(Error::Parameter(format!(
                "L2 must be at least 2, got {}",
                self.l2
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be finite and positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}
