//! Sojourn-time analysis for clusters of processor-sharing servers fed by
//! join-the-shortest-queue routing (M/M/R-JSQ-PS).
//!
//! The crate approximates the stationary sojourn-time distribution of a tagged
//! customer by reducing the R-server system to a single PS queue with
//! state-dependent arrival rates, then transforming those rates into a
//! conditional sojourn-tail matrix through either a matrix exponential or
//! uniformization. Six assembled methods (A through F) combine two arrival-rate
//! sources, two join-probability sources, and the two tail transforms. A
//! discrete-event simulator of the full cluster provides the baseline the
//! approximations are judged against.
//!
//! Module map:
//! - [`config`]: system parameters and solver hyperparameters
//! - [`grid`]: uniform evaluation grids
//! - [`cdf`]: sojourn CDF container, percentiles, empirical CDFs
//! - [`rates`]: arrival-rate profiles and join-probability vectors
//! - [`markov`]: occupancy-vector CTMC, steady state, rate extraction
//! - [`closed_form`]: fitted closed-form rates and birth-death join probabilities
//! - [`expm`]: dense matrix exponential (Pade scaling and squaring)
//! - [`sojourn`]: tail transforms, method assembly, regime map
//! - [`sim`]: event-driven cluster simulator
//! - [`metrics`]: Wasserstein distance, percentile errors, regime scans

pub mod cdf;
pub mod closed_form;
pub mod config;
mod error;
pub mod expm;
pub mod grid;
pub mod markov;
pub mod metrics;
pub mod rates;
pub mod sim;
pub mod sojourn;

pub use cdf::{empirical_cdf, percentile, CdfSource, SojournCdf};
pub use config::{Hyperparameters, SystemConfig};
pub use error::{Error, Result};
pub use grid::{make_time_grid, TimeGrid};
pub use metrics::{
    compare, percentile_error, regime_scan, wasserstein, ComparisonReport, ScanBudget, ScanCell,
};
pub use rates::{ArrivalRateProfile, JoinProbabilities, JoinSource, RateSource};
pub use sim::{
    aggregate_trials, jsq_route, run_simulation, simulate_cdf, ArrivalProcess, PsVariant,
    ServiceDistribution, SimulationConfig,
};
pub use sojourn::{best_method, compute_all_methods, compute_method, MethodId, RegimeMap};
