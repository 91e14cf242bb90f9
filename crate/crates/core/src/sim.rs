//! Event-driven simulator for the JSQ cluster of processor-sharing servers.
//!
//! Each trial runs one event calendar: arrivals join the least-loaded server
//! (ties uniform at random) and every membership change on a server advances
//! its customers' received service, then recomputes per-customer rates and
//! departure dates. Trials run in parallel, each on its own ChaCha8 stream of
//! a shared master seed, so output is reproducible regardless of thread count.

pub mod calendar;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::cdf::{empirical_cdf, SojournCdf};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use calendar::{EventCalendar, EventHandle};

/// Service requirement law. The matched constructors all have mean `1/mu` so
/// distributions can be swapped while holding the offered load fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
    Deterministic { value: f64 },
}

impl ServiceDistribution {
    pub fn exponential(mu: f64) -> Self {
        ServiceDistribution::Exponential { rate: mu }
    }

    /// Uniform on `[1/(2 mu), 3/(2 mu)]`, mean `1/mu`.
    pub fn uniform_for(mu: f64) -> Self {
        ServiceDistribution::Uniform {
            low: 1.0 / (2.0 * mu),
            high: 3.0 / (2.0 * mu),
        }
    }

    /// Point mass at `1/mu`.
    pub fn deterministic_for(mu: f64) -> Self {
        ServiceDistribution::Deterministic { value: 1.0 / mu }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ServiceDistribution::Exponential { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::Parameter(format!(
                        "exponential service rate must be finite and positive, got {rate}"
                    )));
                }
            }
            ServiceDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && 0.0 <= low && low < high) {
                    return Err(Error::Parameter(format!(
                        "uniform service support [{low}, {high}] must satisfy 0 <= low < high"
                    )));
                }
            }
            ServiceDistribution::Deterministic { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::Parameter(format!(
                        "deterministic service must be finite and positive, got {value}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ServiceDistribution::Exponential { rate } => 1.0 / rate,
            ServiceDistribution::Uniform { low, high } => 0.5 * (low + high),
            ServiceDistribution::Deterministic { value } => value,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ServiceDistribution::Exponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(rng)
            }
            ServiceDistribution::Uniform { low, high } => rng.gen_range(low..high),
            ServiceDistribution::Deterministic { value } => value,
        }
    }
}

/// How a server splits capacity among its customers.
///
/// `Standard` shares equally among all present. `Limited(k)` serves only the
/// `k` oldest (each at `1/min(x, k)`); later arrivals wait at rate zero.
/// `Capacitated(k)` runs FIFO while fewer than `k` are present and flips to
/// equal sharing among everyone once occupancy reaches `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsVariant {
    Standard,
    Limited(u32),
    Capacitated(u32),
}

impl PsVariant {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PsVariant::Limited(k) | PsVariant::Capacitated(k) if k < 1 => Err(Error::Parameter(
                "processor-sharing variant parameter k must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Service rate for the customer at `pos` (0 = oldest) among `x` present.
    fn rate(&self, x: usize, pos: usize) -> f64 {
        debug_assert!(pos < x);
        match *self {
            PsVariant::Standard => 1.0 / x as f64,
            PsVariant::Limited(k) => {
                let in_service = x.min(k as usize);
                if pos < in_service {
                    1.0 / in_service as f64
                } else {
                    0.0
                }
            }
            PsVariant::Capacitated(k) => {
                if x >= k as usize {
                    1.0 / x as f64
                } else if pos == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Arrival stream: Poisson at the configured `lambda`, or an explicit list of
/// dates (used for hand-checkable traces and deterministic tests).
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalProcess {
    Poisson,
    Scripted(Vec<f64>),
}

impl ArrivalProcess {
    fn validate(&self) -> Result<()> {
        if let ArrivalProcess::Scripted(dates) = self {
            let mut prev = 0.0f64;
            for &d in dates {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::Parameter(format!(
                        "scripted arrival dates must be finite and non-negative, got {d}"
                    )));
                }
                if d < prev {
                    return Err(Error::Parameter(
                        "scripted arrival dates must be non-decreasing".into(),
                    ));
                }
                prev = d;
            }
        }
        Ok(())
    }
}

/// Full description of a simulation run.
///
/// `q_max` is the simulated-time horizon; customers still in service then are
/// discarded. A sojourn is recorded only if the customer arrived at or after
/// `q_warmup`. Trial `k` uses ChaCha8 stream `k` of `seed`, so the per-trial
/// sample vectors depend only on this struct, not on thread scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub system: SystemConfig,
    pub service: ServiceDistribution,
    pub ps_variant: PsVariant,
    pub arrivals: ArrivalProcess,
    pub q_max: f64,
    pub q_warmup: f64,
    pub trials: u32,
    pub seed: u64,
}

impl SimulationConfig {
    pub const DEFAULT_Q_MAX: f64 = 160_000.0;
    pub const DEFAULT_WARMUP: f64 = 8_000.0;
    pub const DEFAULT_TRIALS: u32 = 4;
    pub const DEFAULT_SEED: u64 = 42;

    pub fn new(system: SystemConfig, service: ServiceDistribution) -> Self {
        SimulationConfig {
            system,
            service,
            ps_variant: PsVariant::Standard,
            arrivals: ArrivalProcess::Poisson,
            q_max: Self::DEFAULT_Q_MAX,
            q_warmup: Self::DEFAULT_WARMUP,
            trials: Self::DEFAULT_TRIALS,
            seed: Self::DEFAULT_SEED,
        }
    }

    pub fn with_ps_variant(mut self, v: PsVariant) -> Self {
        self.ps_variant = v;
        self
    }

    pub fn with_arrivals(mut self, a: ArrivalProcess) -> Self {
        self.arrivals = a;
        self
    }

    pub fn with_horizon(mut self, q_max: f64, q_warmup: f64) -> Self {
        self.q_max = q_max;
        self.q_warmup = q_warmup;
        self
    }

    pub fn with_trials(mut self, trials: u32) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.service.validate()?;
        self.ps_variant.validate()?;
        self.arrivals.validate()?;
        if !(self.q_max.is_finite() && self.q_max > 0.0) {
            return Err(Error::Parameter(format!(
                "q_max must be finite and positive, got {}",
                self.q_max
            )));
        }
        if !(self.q_warmup.is_finite() && self.q_warmup >= 0.0 && self.q_warmup < self.q_max) {
            return Err(Error::Parameter(format!(
                "q_warmup must lie in [0, q_max), got {}",
                self.q_warmup
            )));
        }
        if self.trials < 1 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform choice among the least-loaded servers. Only draws from `rng` when
/// there is an actual tie, so lightly loaded and heavily loaded systems
/// consume different amounts of randomness but each run stays deterministic.
pub fn jsq_route<R: Rng + ?Sized>(counts: &[usize], rng: &mut R) -> usize {
    debug_assert!(!counts.is_empty());
    let min = *counts.iter().min().expect("at least one server");
    let ties = counts.iter().filter(|&&c| c == min).count();
    if ties == 1 {
        return counts.iter().position(|&c| c == min).expect("min exists");
    }
    let pick = rng.gen_range(0..ties);
    counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == min)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("pick is within the tie count")
}

const PRIO_END: u8 = 0;
const PRIO_ARRIVAL: u8 = 1;

enum Ev {
    Arrival,
    End { customer: usize },
}

struct Customer {
    arrival: f64,
    service: f64,
    received: f64,
    rate: f64,
    last: f64,
    handle: Option<EventHandle>,
    server: usize,
}

struct Trial<'a> {
    cfg: &'a SimulationConfig,
    rng: ChaCha8Rng,
    cal: EventCalendar<Ev>,
    customers: Vec<Customer>,
    free: Vec<usize>,
    servers: Vec<Vec<usize>>,
    samples: Vec<f64>,
    next_scripted: usize,
}

impl<'a> Trial<'a> {
    fn new(cfg: &'a SimulationConfig, index: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        Trial {
            cfg,
            rng,
            cal: EventCalendar::new(),
            customers: Vec::new(),
            free: Vec::new(),
            servers: vec![Vec::new(); cfg.system.r as usize],
            samples: Vec::new(),
            next_scripted: 0,
        }
    }

    fn run(mut self) -> Vec<f64> {
        self.schedule_first_arrival();
        while let Some((t, ev)) = self.cal.pop() {
            if t > self.cfg.q_max {
                break;
            }
            match ev {
                Ev::Arrival => self.on_arrival(t),
                Ev::End { customer } => self.on_end(t, customer),
            }
        }
        self.samples
    }

    fn schedule_first_arrival(&mut self) {
        match &self.cfg.arrivals {
            ArrivalProcess::Poisson => {
                let gap = Exp::new(self.cfg.system.lambda)
                    .expect("validated lambda")
                    .sample(&mut self.rng);
                self.cal.schedule(gap, PRIO_ARRIVAL, Ev::Arrival);
            }
            ArrivalProcess::Scripted(dates) => {
                if let Some(&d) = dates.first() {
                    self.next_scripted = 1;
                    self.cal.schedule(d, PRIO_ARRIVAL, Ev::Arrival);
                }
            }
        }
    }

    /// Draw order is fixed (service, then tie-break if needed, then the next
    /// interarrival gap) so a run is a pure function of the config.
    fn on_arrival(&mut self, t: f64) {
        let service = self.cfg.service.sample(&mut self.rng);
        let counts: Vec<usize> = self.servers.iter().map(Vec::len).collect();
        let target = jsq_route(&counts, &mut self.rng);
        match &self.cfg.arrivals {
            ArrivalProcess::Poisson => {
                let gap = Exp::new(self.cfg.system.lambda)
                    .expect("validated lambda")
                    .sample(&mut self.rng);
                self.cal.schedule(t + gap, PRIO_ARRIVAL, Ev::Arrival);
            }
            ArrivalProcess::Scripted(dates) => {
                if let Some(&d) = dates.get(self.next_scripted) {
                    self.next_scripted += 1;
                    self.cal.schedule(d, PRIO_ARRIVAL, Ev::Arrival);
                }
            }
        }

        let cid = self.alloc_customer(Customer {
            arrival: t,
            service,
            received: 0.0,
            rate: 0.0,
            last: t,
            handle: None,
            server: target,
        });
        self.advance(target, t);
        self.servers[target].push(cid);
        self.rebalance(target, t);
    }

    fn on_end(&mut self, t: f64, cid: usize) {
        let server = self.customers[cid].server;
        self.advance(server, t);
        let pos = self.servers[server]
            .iter()
            .position(|&m| m == cid)
            .expect("departing customer is a member of its server");
        self.servers[server].remove(pos);

        let c = &mut self.customers[cid];
        c.handle = None; // the popped end event was this customer's handle
        let gap = (c.received - c.service).abs();
        assert!(
            gap <= 1e-9 * c.service.max(1.0),
            "service conservation broke: received {} vs required {}",
            c.received,
            c.service
        );
        if c.arrival >= self.cfg.q_warmup {
            self.samples.push(t - c.arrival);
        }
        self.free_customer(cid);
        self.rebalance(server, t);
    }

    /// Accrues received service on every member of `server` up to date `t`.
    fn advance(&mut self, server: usize, t: f64) {
        for &cid in &self.servers[server] {
            let c = &mut self.customers[cid];
            c.received += c.rate * (t - c.last);
            c.last = t;
        }
    }

    /// Recomputes rates after a membership change and refreshes departure
    /// dates: a customer with remaining work `s - d` served at rate `r`
    /// departs at `t + (s - d) / r`. Customers whose rate is unchanged keep
    /// their scheduled date, which is the same instant in exact arithmetic.
    fn rebalance(&mut self, server: usize, t: f64) {
        let x = self.servers[server].len();
        for pos in 0..x {
            let cid = self.servers[server][pos];
            let new_rate = self.cfg.ps_variant.rate(x, pos);
            let c = &mut self.customers[cid];
            if new_rate == c.rate && (new_rate == 0.0) == c.handle.is_none() {
                continue;
            }
            c.rate = new_rate;
            if new_rate == 0.0 {
                if let Some(h) = c.handle.take() {
                    self.cal.cancel(h);
                }
                continue;
            }
            let remaining = (c.service - c.received).max(0.0);
            let date = t + remaining / new_rate;
            c.handle = Some(match c.handle.take() {
                Some(h) => self.cal.reschedule(h, date, PRIO_END),
                None => self.cal.schedule(date, PRIO_END, Ev::End { customer: cid }),
            });
        }
    }

    fn alloc_customer(&mut self, c: Customer) -> usize {
        match self.free.pop() {
            Some(i) => {
                self.customers[i] = c;
                i
            }
            None => {
                self.customers.push(c);
                self.customers.len() - 1
            }
        }
    }

    fn free_customer(&mut self, cid: usize) {
        self.free.push(cid);
    }
}

/// Runs all trials and returns each trial's sojourn samples in departure
/// order. Trials are independent ChaCha8 streams evaluated in parallel;
/// results are collected in trial order.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|k| Trial::new(cfg, k).run())
        .collect())
}

/// Pointwise average of the per-trial empirical CDFs on `grid`.
pub fn aggregate_trials(trials: &[Vec<f64>], grid: &TimeGrid) -> Result<SojournCdf> {
    if trials.is_empty() {
        return Err(Error::Parameter("no trials to aggregate".into()));
    }
    let mut acc = vec![0.0f64; grid.len()];
    for (k, samples) in trials.iter().enumerate() {
        if samples.is_empty() {
            return Err(Error::Parameter(format!(
                "trial {k} produced no sojourn samples; extend q_max or lower q_warmup"
            )));
        }
        let cdf = empirical_cdf(samples, grid)?;
        for (a, v) in acc.iter_mut().zip(cdf.values()) {
            *a += v;
        }
    }
    let n = trials.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    SojournCdf::new(grid.clone(), acc, crate::cdf::CdfSource::Simulation)
}

/// Convenience wrapper: simulate and aggregate onto `grid` in one call.
pub fn simulate_cdf(cfg: &SimulationConfig, grid: &TimeGrid) -> Result<SojournCdf> {
    let trials = run_simulation(cfg)?;
    aggregate_trials(&trials, grid)
}
