//! Distances and error measures between sojourn CDFs, and the scan that maps
//! which method wins where.

use rayon::prelude::*;

use crate::cdf::{percentile, CdfSource, SojournCdf};
use crate::config::{Hyperparameters, SystemConfig};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::sim::{run_simulation, simulate_cdf, ServiceDistribution, SimulationConfig};
use crate::sojourn::{compute_all_methods, MethodId, RegimeMap};

/// Methods whose Wasserstein distances to the baseline are within this window
/// of the minimum count as tied. The dual-route method pairs are
/// mathematically identical, so their distances differ only by float noise;
/// without a tie window the "winner" among them would be arbitrary.
pub const TIE_EPS: f64 = 1e-3;

/// Earth-mover's distance between two CDFs on the same grid: the Riemann sum
/// `sum_i |G(t_i) - H(t_i)| * delta` with left-endpoint evaluation. Mass
/// beyond `t_max` is invisible, so the result underestimates by at most the
/// residual horizon times the two tail masses.
pub fn wasserstein(g: &SojournCdf, h: &SojournCdf) -> Result<f64> {
    if !g.grid().same_layout(h.grid()) {
        return Err(Error::Parameter(format!(
            "Wasserstein distance needs identical grids, got {} x {} vs {} x {}",
            g.grid().len(),
            g.grid().delta(),
            h.grid().len(),
            h.grid().delta()
        )));
    }
    let delta = g.grid().delta();
    Ok(g.values()
        .iter()
        .zip(h.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * delta)
}

/// Signed percentile gap `percentile(approx, eta) - percentile(simulated,
/// eta)`: positive means the approximation over-estimates the tail.
pub fn percentile_error(approx: &SojournCdf, simulated: &SojournCdf, eta: f64) -> Result<f64> {
    Ok(percentile(approx, eta)? - percentile(simulated, eta)?)
}

/// One method's accuracy against a simulated baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileError {
    pub eta: f64,
    pub approx: f64,
    pub simulated: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub method: MethodId,
    pub r: u32,
    pub rho: f64,
    pub wasserstein: f64,
    pub percentile_errors: Vec<PercentileError>,
}

impl ComparisonReport {
    pub const CSV_HEADER: &'static str = "R,rho,method,wasserstein,eta,approx_pct,sim_pct,error";

    /// One data line per eta (plus one bare line when no etas were asked
    /// for), matching [`Self::CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        let prefix = format!("{},{},{},{}", self.r, self.rho, self.method, self.wasserstein);
        if self.percentile_errors.is_empty() {
            return vec![format!("{prefix},,,,")];
        }
        self.percentile_errors
            .iter()
            .map(|p| {
                format!(
                    "{prefix},{},{},{},{}",
                    p.eta, p.approx, p.simulated, p.error
                )
            })
            .collect()
    }
}

/// Scores a method CDF against a simulated baseline: Wasserstein distance
/// plus signed percentile errors at each requested eta. Saturation at any
/// eta is propagated, since a percentile that never resolves has no error.
pub fn compare(
    approx: &SojournCdf,
    simulated: &SojournCdf,
    system: &SystemConfig,
    etas: &[f64],
) -> Result<ComparisonReport> {
    let method = match approx.source() {
        CdfSource::Method(m) => m,
        CdfSource::Simulation => {
            return Err(Error::Parameter(
                "comparison expects a method-tagged CDF as the approximation".into(),
            ))
        }
    };
    let mut percentile_errors = Vec::with_capacity(etas.len());
    for &eta in etas {
        let a = percentile(approx, eta)?;
        let s = percentile(simulated, eta)?;
        percentile_errors.push(PercentileError {
            eta,
            approx: a,
            simulated: s,
            error: a - s,
        });
    }
    Ok(ComparisonReport {
        method,
        r: system.r,
        rho: system.rho(),
        wasserstein: wasserstein(approx, simulated)?,
        percentile_errors,
    })
}

/// Simulation budget for a regime scan; one baseline run per (R, rho) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanBudget {
    pub mu: f64,
    pub q_max: f64,
    pub q_warmup: f64,
    pub trials: u32,
    pub seed: u64,
}

impl ScanBudget {
    /// Reduced budget that keeps a full scan on a workstation: shorter runs
    /// than the headline experiments but the same trial count.
    pub fn desk(seed: u64) -> Self {
        ScanBudget {
            mu: 1.0,
            q_max: 40_000.0,
            q_warmup: 8_000.0,
            trials: 4,
            seed,
        }
    }
}

/// Outcome of one scan cell: every candidate's distance and the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub r: u32,
    pub rho: f64,
    pub distances: Vec<(MethodId, f64)>,
    pub winner: MethodId,
}

/// Smallest-distance method, with ties within [`TIE_EPS`] resolved toward
/// the default regime map's pick and then toward enumeration order. The tie
/// window exists because dual-route pairs produce the same CDF up to float
/// noise; preferring the map's pick keeps scan output stable across runs.
pub(crate) fn scan_winner(distances: &[(MethodId, f64)], r: u32, rho: f64) -> MethodId {
    debug_assert!(!distances.is_empty());
    let min = distances
        .iter()
        .map(|&(_, d)| d)
        .fold(f64::INFINITY, f64::min);
    if let Some(preferred) = RegimeMap::default_map().lookup(r, rho) {
        if distances
            .iter()
            .any(|&(m, d)| m == preferred && d <= min + TIE_EPS)
        {
            return preferred;
        }
    }
    distances
        .iter()
        .find(|&&(_, d)| d <= min + TIE_EPS)
        .expect("minimum is attained")
        .0
}

/// For each (R, rho) cell, simulates a baseline under `budget` and ranks the
/// requested methods by Wasserstein distance to it. Cells run in parallel;
/// each uses the same master seed, so the scan is reproducible as a whole.
pub fn regime_scan(
    cells: &[(u32, f64)],
    methods: &[MethodId],
    budget: &ScanBudget,
    grid: &TimeGrid,
) -> Result<Vec<ScanCell>> {
    if methods.is_empty() {
        return Err(Error::Parameter("regime scan needs at least one method".into()));
    }
    if cells.is_empty() {
        return Err(Error::Parameter("regime scan needs at least one (R, rho) cell".into()));
    }
    cells
        .par_iter()
        .map(|&(r, rho)| {
            let system = SystemConfig::from_rho(r, rho, budget.mu)?;
            system.require_stable()?;
            let hyper = Hyperparameters::defaults_for(r);
            let all = compute_all_methods(&system, &hyper, grid)?;
            let sim_cfg = SimulationConfig::new(system, ServiceDistribution::exponential(budget.mu))
                .with_horizon(budget.q_max, budget.q_warmup)
                .with_trials(budget.trials)
                .with_seed(budget.seed);
            let baseline = simulate_cdf(&sim_cfg, grid)?;
            let mut distances = Vec::with_capacity(methods.len());
            for &m in methods {
                let cdf = &all[m as usize];
                debug_assert_eq!(cdf.source(), CdfSource::Method(m));
                distances.push((m, wasserstein(cdf, &baseline)?));
            }
            let winner = scan_winner(&distances, r, rho);
            Ok(ScanCell {
                r,
                rho,
                distances,
                winner,
            })
        })
        .collect()
}

/// Simulated percentile of the sojourn time at one (system, service law)
/// point; a pooled run used by the service-distribution comparisons.
pub fn simulated_percentile(
    system: SystemConfig,
    service: ServiceDistribution,
    budget: &ScanBudget,
    grid: &TimeGrid,
    eta: f64,
) -> Result<f64> {
    let cfg = SimulationConfig::new(system, service)
        .with_horizon(budget.q_max, budget.q_warmup)
        .with_trials(budget.trials)
        .with_seed(budget.seed);
    let trials = run_simulation(&cfg)?;
    let cdf = crate::sim::aggregate_trials(&trials, grid)?;
    percentile(&cdf, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_time_grid;

    fn step_cdf(grid: &TimeGrid, at: f64) -> SojournCdf {
        let values: Vec<f64> = grid
            .points()
            .map(|t| if t >= at { 1.0 } else { 0.0 })
            .collect();
        SojournCdf::new(grid.clone(), values, CdfSource::Simulation).unwrap()
    }

    fn exp_cdf(grid: &TimeGrid, shift: f64) -> SojournCdf {
        let values: Vec<f64> = grid
            .points()
            .map(|t| if t > shift { 1.0 - (-(t - shift)).exp() } else { 0.0 })
            .collect();
        SojournCdf::new(grid.clone(), values, CdfSource::Simulation).unwrap()
    }

    #[test]
    fn identical_cdfs_have_zero_distance() {
        let grid = make_time_grid(10.0, 0.1).unwrap();
        let g = exp_cdf(&grid, 0.0);
        assert_eq!(wasserstein(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn unit_steps_two_apart_have_distance_two() {
        let grid = make_time_grid(5.0, 1.0).unwrap();
        let g = step_cdf(&grid, 1.0);
        let h = step_cdf(&grid, 3.0);
        assert_eq!(wasserstein(&g, &h).unwrap(), 2.0);
        assert_eq!(wasserstein(&h, &g).unwrap(), 2.0);
    }

    #[test]
    fn shifted_cdf_distance_equals_the_shift_within_delta() {
        let grid = make_time_grid(25.0, 0.01).unwrap();
        let g = exp_cdf(&grid, 0.0);
        let h = exp_cdf(&grid, 0.5);
        let w = wasserstein(&g, &h).unwrap();
        assert!((w - 0.5).abs() <= 0.011, "got {w}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = make_time_grid(10.0, 0.1).unwrap();
        let b = make_time_grid(10.0, 0.2).unwrap();
        let g = exp_cdf(&a, 0.0);
        let h = exp_cdf(&b, 0.0);
        assert!(matches!(wasserstein(&g, &h), Err(Error::Parameter(_))));
    }

    #[test]
    fn percentile_error_sign_convention() {
        // The shifted (slower) CDF over-estimates every percentile, so with
        // it as the approximation the signed error must be positive.
        let grid = make_time_grid(25.0, 0.01).unwrap();
        let fast = exp_cdf(&grid, 0.0);
        let slow = exp_cdf(&grid, 0.5);
        let over = percentile_error(&slow, &fast, 0.99).unwrap();
        let under = percentile_error(&fast, &slow, 0.99).unwrap();
        assert!(over > 0.0, "over-estimation must be positive, got {over}");
        assert!(under < 0.0, "under-estimation must be negative, got {under}");
        assert_eq!(percentile_error(&fast, &fast, 0.99).unwrap(), 0.0);
    }

    #[test]
    fn percentile_error_propagates_saturation() {
        let grid = make_time_grid(0.5, 0.1).unwrap();
        let g = exp_cdf(&grid, 0.0);
        assert!(matches!(
            percentile_error(&g, &g, 0.9999),
            Err(Error::Saturated { .. })
        ));
    }

    #[test]
    fn winner_prefers_the_map_pick_inside_the_tie_window() {
        use MethodId::*;
        // rho = 0.3: the default map says D. A and D are tied to float noise.
        let distances = vec![(A, 0.5000001), (D, 0.5000002), (C, 1.2)];
        assert_eq!(scan_winner(&distances, 3, 0.3), D);
        // rho = 0.7: the map says C, but C is far off; first tied entry wins.
        let distances = vec![(A, 0.5000002), (D, 0.5000001), (C, 1.2)];
        assert_eq!(scan_winner(&distances, 3, 0.7), A);
        // Clear winner outside the window: the map cannot override it.
        let distances = vec![(A, 0.2), (D, 0.9), (C, 0.9)];
        assert_eq!(scan_winner(&distances, 3, 0.7), A);
    }

    #[test]
    fn comparison_report_serializes_one_row_per_eta() {
        let grid = make_time_grid(25.0, 0.01).unwrap();
        let values: Vec<f64> = grid.points().map(|t| 1.0 - (-t).exp()).collect();
        let approx =
            SojournCdf::new(grid.clone(), values, CdfSource::Method(MethodId::C)).unwrap();
        let sim = exp_cdf(&grid, 0.0);
        let system = SystemConfig::from_rho(2, 0.5, 1.0).unwrap();
        let report = compare(&approx, &sim, &system, &[0.5, 0.99]).unwrap();
        assert_eq!(report.method, MethodId::C);
        assert_eq!(report.wasserstein, 0.0);
        let rows = report.csv_rows();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("2,0.5,C,0,0.5,"), "{}", rows[0]);
        assert_eq!(ComparisonReport::CSV_HEADER.split(',').count(), 8);
        assert_eq!(rows[0].split(',').count(), 8);
    }

    #[test]
    fn compare_rejects_simulation_as_approximation() {
        let grid = make_time_grid(5.0, 0.1).unwrap();
        let g = exp_cdf(&grid, 0.0);
        let system = SystemConfig::from_rho(1, 0.5, 1.0).unwrap();
        assert!(compare(&g, &g, &system, &[0.5]).is_err());
    }

    #[test]
    fn single_cell_single_method_scan_returns_that_method() {
        let grid = make_time_grid(40.0, 0.01).unwrap();
        let budget = ScanBudget {
            mu: 1.0,
            q_max: 2_000.0,
            q_warmup: 200.0,
            trials: 2,
            seed: 9,
        };
        let cells = regime_scan(&[(1, 0.5)], &[MethodId::C], &budget, &grid).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].winner, MethodId::C);
        assert_eq!(cells[0].distances.len(), 1);
        assert!(cells[0].distances[0].1 >= 0.0);
    }

    #[test]
    fn scan_rejects_empty_inputs() {
        let grid = make_time_grid(1.0, 0.1).unwrap();
        let budget = ScanBudget::desk(1);
        assert!(regime_scan(&[], &[MethodId::A], &budget, &grid).is_err());
        assert!(regime_scan(&[(1, 0.5)], &[], &budget, &grid).is_err());
    }
}
