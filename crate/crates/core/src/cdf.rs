use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::sojourn::MethodId;

/// Slack allowed when checking monotonicity of assembled CDFs; successive
/// values may dip by at most this much before validation fails.
pub const MONOTONICITY_EPS: f64 = 1e-9;

/// Where a CDF came from; carried along so reports can label their columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfSource {
    Method(MethodId),
    Simulation,
}

impl std::fmt::Display for CdfSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CdfSource::Method(m) => write!(f, "{m}"),
            CdfSource::Simulation => write!(f, "simulation"),
        }
    }
}

/// Sojourn-time distribution `P(T <= t_i)` tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SojournCdf {
    grid: TimeGrid,
    values: Vec<f64>,
    source: CdfSource,
}

impl SojournCdf {
    /// Wraps and validates a tabulated CDF.
    pub fn new(grid: TimeGrid, values: Vec<f64>, source: CdfSource) -> Result<Self> {
        let cdf = SojournCdf {
            grid,
            values,
            source,
        };
        cdf.validate()?;
        Ok(cdf)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> CdfSource {
        self.source
    }

    /// No mass at or below zero, values in [0, 1], non-decreasing within
    /// [`MONOTONICITY_EPS`], length matching the grid.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(Error::Numerical(format!(
                "CDF has {} values for a {}-point grid",
                self.values.len(),
                self.grid.len()
            )));
        }
        if self.values[0] != 0.0 {
            return Err(Error::Numerical(format!(
                "CDF must be 0 at t = 0, got {}",
                self.values[0]
            )));
        }
        let mut prev = 0.0f64;
        for (i, &v) in self.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Numerical(format!(
                    "CDF value {v} at index {i} outside [0, 1]"
                )));
            }
            if v < prev - MONOTONICITY_EPS {
                return Err(Error::Numerical(format!(
                    "CDF decreases by {} at index {i}",
                    prev - v
                )));
            }
            prev = prev.max(v);
        }
        Ok(())
    }

    /// Largest tabulated probability (the grid endpoint, by monotonicity).
    pub fn max_attained(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Mean sojourn time by a left-endpoint Riemann sum of the survival
    /// function over the grid. Mass beyond `t_max` is not represented, so
    /// this slightly underestimates heavy-tailed means.
    pub fn mean(&self) -> f64 {
        let delta = self.grid.delta();
        self.values[..self.values.len() - 1]
            .iter()
            .map(|v| (1.0 - v) * delta)
            .sum()
    }
}

/// Smallest grid point whose CDF value strictly exceeds `eta`.
///
/// No interpolation: the returned instant is always a grid point, so results
/// are reproducible across methods that share a grid. If the CDF never
/// exceeds `eta` the call fails with [`Error::Saturated`], carrying the
/// maximum attained probability.
pub fn percentile(cdf: &SojournCdf, eta: f64) -> Result<f64> {
    if !(eta.is_finite() && 0.0 < eta && eta < 1.0) {
        return Err(Error::Parameter(format!(
            "eta must lie strictly between 0 and 1, got {eta}"
        )));
    }
    for (i, &v) in cdf.values().iter().enumerate() {
        if v > eta {
            return Ok(cdf.grid().point(i));
        }
    }
    Err(Error::Saturated {
        target: eta,
        max_attained: cdf.max_attained(),
    })
}

/// Empirical CDF of positive samples on the given grid:
/// `values[i] = #(samples <= t_i) / n`.
pub fn empirical_cdf(samples: &[f64], grid: &TimeGrid) -> Result<SojournCdf> {
    if samples.is_empty() {
        return Err(Error::Parameter(
            "cannot build an empirical CDF from zero samples".into(),
        ));
    }
    for &s in samples {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Parameter(format!(
                "samples must be finite and positive, got {s}"
            )));
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut values = Vec::with_capacity(grid.len());
    let mut idx = 0usize;
    for t in grid.points() {
        while idx < sorted.len() && sorted[idx] <= t {
            idx += 1;
        }
        values.push(idx as f64 / n);
    }
    SojournCdf::new(grid.clone(), values, CdfSource::Simulation)
}
