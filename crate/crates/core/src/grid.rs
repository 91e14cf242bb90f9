use crate::error::{Error, Result};

/// Largest number of grid intervals accepted before the resource guard trips.
const MAX_INTERVALS: f64 = 1e7;

/// Uniform evaluation grid `t_i = i * delta` for `i = 0..=intervals`,
/// with `intervals = floor(t_max / delta)` (float-tolerant).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    delta: f64,
    len: usize,
}

impl TimeGrid {
    /// Grid horizon and spacing covering the default reporting range:
    /// 18233 points spanning [0, 182.32] at 0.01 resolution.
    pub const DEFAULT_T_MAX: f64 = 182.32;
    pub const DEFAULT_DELTA: f64 = 0.01;

    pub fn default_grid() -> TimeGrid {
        make_time_grid(Self::DEFAULT_T_MAX, Self::DEFAULT_DELTA).expect("default grid is valid")
    }

    /// Number of grid points (intervals + 1).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `i`-th grid point, computed as a fresh product so points carry no
    /// accumulated summation error.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.len);
        i as f64 * self.delta
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.point(i))
    }

    /// Two grids are interchangeable when spacing and length agree exactly.
    pub fn same_layout(&self, other: &TimeGrid) -> bool {
        self.len == other.len && self.delta == other.delta
    }
}

/// Builds the uniform grid over `[0, t_max]` with spacing `delta`.
///
/// The interval count is `floor(t_max / delta)` with a one-part-per-billion
/// slack so that horizons such as 0.03 / 0.01 land on the intended integer
/// despite binary rounding. Counts above 1e7 are refused.
pub fn make_time_grid(t_max: f64, delta: f64) -> Result<TimeGrid> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::Parameter(format!(
            "t_max must be finite and positive, got {t_max}"
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Parameter(format!(
            "delta must be finite and positive, got {delta}"
        )));
    }
    let ratio = t_max / delta;
    if ratio > MAX_INTERVALS {
        return Err(Error::Resource(format!(
            "t_max/delta = {ratio:.3e} exceeds the 1e7 grid-size limit"
        )));
    }
    let intervals = (ratio * (1.0 + 1e-9)).floor() as usize;
    if intervals == 0 {
        return Err(Error::Parameter(format!(
            "grid would be empty: t_max = {t_max} is below delta = {delta}"
        )));
    }
    Ok(TimeGrid {
        t_max,
        delta,
        len: intervals + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_18233_points() {
        let g = make_time_grid(182.32, 0.01).unwrap();
        assert_eq!(g.len(), 18233);
        assert_eq!(g.point(0), 0.0);
        assert!((g.point(18232) - 182.32).abs() < 1e-9);
    }

    #[test]
    fn short_grid_includes_endpoint() {
        let g = make_time_grid(0.03, 0.01).unwrap();
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts.len(), 4);
        for (p, want) in pts.iter().zip([0.0, 0.01, 0.02, 0.03]) {
            assert!((p - want).abs() < 1e-12, "{p} vs {want}");
        }
    }

    #[test]
    fn oversize_grid_hits_resource_guard() {
        match make_time_grid(1e6, 1e-9) {
            Err(Error::Resource(_)) => {}
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn bad_spacing_rejected() {
        assert!(make_time_grid(1.0, 0.0).is_err());
        assert!(make_time_grid(-1.0, 0.1).is_err());
        assert!(make_time_grid(f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn same_layout_detects_mismatch() {
        let a = make_time_grid(1.0, 0.1).unwrap();
        let b = make_time_grid(1.0, 0.1).unwrap();
        let c = make_time_grid(1.0, 0.05).unwrap();
        assert!(a.same_layout(&b));
        assert!(!a.same_layout(&c));
    }
}
