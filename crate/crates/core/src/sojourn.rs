//! From arrival-rate profiles to sojourn-time CDFs.
//!
//! A tagged customer arriving at a queue that already holds `n` customers
//! sees a transient birth-death process: other customers complete at rate
//! `n/(n+1) mu` (processor sharing gives the tagged customer a `1/(n+1)`
//! speed share), new customers arrive at rate `lambda_n`, and the tagged
//! customer itself absorbs at the residual rate. The survival probabilities
//! `w_n(t) = P(T > t | n found on arrival)` solve `w(t) = exp(D t) * 1` for
//! the defective generator `D`, and the unconditional CDF follows as
//! `P(T <= t) = 1 - sum_n A_n w_n(t)`.
//!
//! `w` can be computed two mathematically identical ways: a matrix
//! exponential of `D * delta` applied repeatedly along the grid, or
//! uniformization (Poisson-weighted powers of `I + D/theta`). Combined with
//! two sources for `lambda_n` (CTMC or closed form) and two for `A_n` (CTMC
//! or birth-death ladder), this yields the six methods A-F.

use crate::cdf::{CdfSource, SojournCdf};
use crate::closed_form::{join_probabilities_birth_death, lambda_n_closed_form};
use crate::config::{Hyperparameters, SystemConfig};
use crate::error::{Error, Result};
use crate::expm::expm;
use crate::grid::TimeGrid;
use crate::markov::McSolution;
use crate::rates::{ArrivalRateProfile, JoinProbabilities, JoinSource, RateSource};
use nalgebra::{DMatrix, DVector};

/// Entries may stray this far outside [0, 1] before being declared broken;
/// anything within is clamped.
const CLAMP_EPS: f64 = 1e-9;

/// Tolerance on the uniformization recursion staying inside [0, 1].
const H_EPS: f64 = 1e-6;

/// Largest CDF dip repaired by pinning to the running maximum.
const REPAIR_EPS: f64 = 1e-6;

/// Cap on `rows x levels` of the uniformization power table.
const H_TABLE_LIMIT: f64 = 5e7;

/// Transient generator of the tagged customer's queue, truncated to `l2`
/// levels. Tridiagonal: `sub[n] = n/(n+1) mu`, `diag[n] = -(lambda_n + mu)`,
/// `super[n] = lambda_n`, with the last row's super-diagonal dropped by the
/// truncation. Row `n` leaks probability at rate `mu/(n+1)` (the tagged
/// customer's own completion), which is what makes the generator defective.
#[derive(Debug, Clone)]
pub struct DefectiveGenerator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl DefectiveGenerator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i > 0 {
                m[(i, i - 1)] = self.sub[i];
            }
            if i + 1 < n {
                m[(i, i + 1)] = self.sup[i];
            }
        }
        m
    }
}

/// Builds the defective generator from the first `l2` levels of a profile.
pub fn build_defective_generator(
    profile: &ArrivalRateProfile,
    mu: f64,
    l2: usize,
) -> Result<DefectiveGenerator> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Parameter(format!(
            "mu must be finite and positive, got {mu}"
        )));
    }
    if l2 < 1 || l2 > profile.len() {
        return Err(Error::Parameter(format!(
            "l2 = {l2} must lie in [1, profile length {}]",
            profile.len()
        )));
    }
    let mut sub = Vec::with_capacity(l2);
    let mut diag = Vec::with_capacity(l2);
    let mut sup = Vec::with_capacity(l2);
    for n in 0..l2 {
        let lam = profile.rates()[n];
        sub.push(n as f64 / (n + 1) as f64 * mu);
        diag.push(-(lam + mu));
        sup.push(if n + 1 < l2 { lam } else { 0.0 });
    }
    Ok(DefectiveGenerator { sub, diag, sup })
}

/// Conditional survival probabilities `w[n][i] = P(T > t_i | n on arrival)`
/// tabulated for `n = 0..l2` over a shared grid. Stored row-major.
#[derive(Debug, Clone)]
pub struct ConditionalTailMatrix {
    grid: TimeGrid,
    levels: usize,
    w: Vec<f64>,
}

impl ConditionalTailMatrix {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let k = self.grid.len();
        &self.w[n * k..(n + 1) * k]
    }

    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.w[n * self.grid.len() + i]
    }

    /// Survival structure: `w_n(0) = 1`, values in [0, 1], rows
    /// non-increasing in `t` (within 1e-9) and non-decreasing in `n`
    /// (within 1e-8; a deeper queue can only slow the tagged customer).
    pub fn validate(&self) -> Result<()> {
        let k = self.grid.len();
        for n in 0..self.levels {
            let row = self.row(n);
            if row[0] != 1.0 {
                return Err(Error::Numerical(format!(
                    "w_{n}(0) = {} but must be exactly 1",
                    row[0]
                )));
            }
            let mut prev = 1.0f64;
            for (i, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Numerical(format!(
                        "w_{n}(t_{i}) = {v} outside [0, 1]"
                    )));
                }
                if v > prev + CLAMP_EPS {
                    return Err(Error::Numerical(format!(
                        "w_{n} increases by {} at grid index {i}",
                        v - prev
                    )));
                }
                prev = v;
            }
        }
        for n in 0..self.levels.saturating_sub(1) {
            for i in 0..k {
                let low = self.value(n, i);
                let high = self.value(n + 1, i);
                if high < low - 1e-8 {
                    return Err(Error::Numerical(format!(
                        "w_{}(t_{i}) = {high} below w_{n}(t_{i}) = {low}",
                        n + 1
                    )));
                }
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn from_raw(grid: TimeGrid, levels: usize, w: Vec<f64>) -> Self {
        ConditionalTailMatrix { grid, levels, w }
    }
}

fn clamp_unit(v: f64, what: &str) -> Result<f64> {
    if (-CLAMP_EPS..=1.0 + CLAMP_EPS).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Numerical(format!(
            "{what} produced {v}, outside [0, 1] beyond the 1e-9 clamp"
        )))
    }
}

/// Matrix-exponential route: factor `M = exp(D delta)` once, then walk the
/// uniform grid by repeated application, `w(t_{i+1}) = M w(t_i)`.
pub fn w_matrix_exponential(
    gen: &DefectiveGenerator,
    grid: &TimeGrid,
) -> Result<ConditionalTailMatrix> {
    let l2 = gen.len();
    let k = grid.len();
    let m = expm(&(gen.dense() * grid.delta()))?;
    let mut w = vec![0.0f64; l2 * k];
    let mut v = DVector::<f64>::from_element(l2, 1.0);
    for i in 0..k {
        for n in 0..l2 {
            w[n * k + i] = v[n];
        }
        if i + 1 < k {
            v = &m * v;
            for x in v.iter_mut() {
                *x = clamp_unit(*x, "matrix-exponential step")?;
            }
        }
    }
    let tails = ConditionalTailMatrix {
        grid: grid.clone(),
        levels: l2,
        w,
    };
    tails.validate()?;
    Ok(tails)
}

/// Poisson(mean) weights over an index window wide enough that the neglected
/// tail is below 1e-13. Computed by two-sided recurrence from the mode and
/// normalized, which stays stable for means far beyond exp(-mean) underflow.
fn poisson_window(mean: f64, buf: &mut Vec<f64>) -> (usize, usize) {
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        buf.clear();
        buf.push(1.0);
        return (0, 0);
    }
    // 10 sigma + 30 covers all but ~1e-14 of the mass for any mean.
    let half = 10.0 * mean.sqrt() + 30.0;
    let lo = ((mean - half).floor().max(0.0)) as usize;
    let hi = (mean + half).ceil() as usize;
    let mode = (mean.floor() as usize).clamp(lo, hi);
    buf.clear();
    buf.resize(hi - lo + 1, 0.0);
    buf[mode - lo] = 1.0;
    for i in (lo..mode).rev() {
        // q_i = q_{i+1} * (i + 1) / mean
        buf[i - lo] = buf[i + 1 - lo] * (i + 1) as f64 / mean;
    }
    for i in mode + 1..=hi {
        buf[i - lo] = buf[i - 1 - lo] * mean / i as f64;
    }
    let total: f64 = buf.iter().sum();
    let inv = 1.0 / total;
    buf.iter_mut().for_each(|x| *x *= inv);
    (lo, hi)
}

/// Uniformization route: with `theta = max_n lambda_n + mu`, the matrix
/// `I + D/theta` is substochastic and
/// `w_n(t) = sum_i Poisson(theta t; i) h_{n,i}` where `h_{.,i}` are its
/// powers applied to the all-ones vector. The power table is computed once
/// and shared by every grid point; each point sums only the Poisson window
/// that carries mass (adaptive cutoff, tail below 1e-13).
///
/// Taking the maximum rate rather than `lambda_0 + mu` keeps the recursion
/// inside [0, 1] even when the profile is not monotone, as the closed-form
/// tail is for larger clusters.
pub fn w_uniformization(
    profile: &ArrivalRateProfile,
    mu: f64,
    grid: &TimeGrid,
    l2: usize,
) -> Result<ConditionalTailMatrix> {
    if l2 < 1 || l2 > profile.len() {
        return Err(Error::Parameter(format!(
            "l2 = {l2} must lie in [1, profile length {}]",
            profile.len()
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Parameter(format!(
            "mu must be finite and positive, got {mu}"
        )));
    }
    let rates = &profile.rates()[..l2];
    let max_rate = rates.iter().cloned().fold(0.0, f64::max);
    let theta = max_rate + mu;

    let mean_max = theta * grid.t_max();
    let rows_needed = mean_max + 10.0 * mean_max.sqrt() + 32.0;
    if rows_needed * l2 as f64 > H_TABLE_LIMIT {
        return Err(Error::Resource(format!(
            "uniformization needs ~{rows_needed:.0} x {l2} power-table entries \
             (theta = {theta:.3}, t_max = {}); shrink the grid or use the \
             matrix-exponential route",
            grid.t_max()
        )));
    }

    // Coefficients of I + D/theta.
    let sub_c: Vec<f64> = (0..l2)
        .map(|n| n as f64 / (n + 1) as f64 * mu / theta)
        .collect();
    let diag_c: Vec<f64> = (0..l2).map(|n| 1.0 - (rates[n] + mu) / theta).collect();
    let sup_c: Vec<f64> = (0..l2)
        .map(|n| if n + 1 < l2 { rates[n] / theta } else { 0.0 })
        .collect();

    let mut h: Vec<Vec<f64>> = vec![vec![1.0; l2]];
    let extend_to = |h: &mut Vec<Vec<f64>>, target: usize| -> Result<()> {
        while h.len() <= target {
            let prev = h.last().expect("non-empty");
            let mut next = vec![0.0f64; l2];
            for n in 0..l2 {
                let mut v = diag_c[n] * prev[n];
                if n > 0 {
                    v += sub_c[n] * prev[n - 1];
                }
                if n + 1 < l2 {
                    v += sup_c[n] * prev[n + 1];
                }
                if !(-H_EPS..=1.0 + H_EPS).contains(&v) {
                    return Err(Error::Numerical(format!(
                        "uniformization power h[{}][{n}] = {v} left [0, 1]; \
                         theta = {theta} too small for the profile",
                        h.len()
                    )));
                }
                next[n] = v.clamp(0.0, 1.0);
            }
            h.push(next);
        }
        Ok(())
    };

    let k = grid.len();
    let mut w = vec![0.0f64; l2 * k];
    let mut weights: Vec<f64> = Vec::new();
    let mut col = vec![0.0f64; l2];
    for i in 0..k {
        let mean = theta * grid.point(i);
        let (lo, hi) = poisson_window(mean, &mut weights);
        extend_to(&mut h, hi)?;
        col.iter_mut().for_each(|x| *x = 0.0);
        for (j, &q) in weights.iter().enumerate() {
            let hrow = &h[lo + j];
            for n in 0..l2 {
                col[n] += q * hrow[n];
            }
        }
        for n in 0..l2 {
            w[n * k + i] = clamp_unit(col[n], "uniformization sum")?;
        }
    }
    // w(0) must be exactly 1; the i = 0 window is the single term h_0 = 1,
    // so this is already exact, but keep the guarantee explicit.
    for n in 0..l2 {
        w[n * k] = 1.0;
    }
    let tails = ConditionalTailMatrix {
        grid: grid.clone(),
        levels: l2,
        w,
    };
    tails.validate()?;
    Ok(tails)
}

/// Folds join probabilities and conditional tails into the sojourn CDF
/// `P(T <= t_i) = 1 - sum_n A_n w_n(t_i)`.
///
/// Rounding can leave dips of a few ulps; dips up to 1e-6 are repaired by
/// pinning to the running maximum, anything larger is an error.
pub fn assemble_cdf(
    join: &JoinProbabilities,
    tails: &ConditionalTailMatrix,
    source: CdfSource,
) -> Result<SojournCdf> {
    if join.len() != tails.levels() {
        return Err(Error::Parameter(format!(
            "join probabilities cover {} levels but tails cover {}",
            join.len(),
            tails.levels()
        )));
    }
    let k = tails.grid().len();
    let mut values = vec![0.0f64; k];
    for n in 0..join.len() {
        let a = join.probs()[n];
        if a == 0.0 {
            continue;
        }
        let row = tails.row(n);
        for i in 0..k {
            values[i] += a * row[i];
        }
    }
    let mut running = 0.0f64;
    for (i, v) in values.iter_mut().enumerate() {
        let mut cdf = clamp_unit(1.0 - *v, "assembled CDF")?;
        if i == 0 {
            // sum A_n w_n(0) = sum A_n = 1 up to summation noise.
            if cdf > CLAMP_EPS {
                return Err(Error::Numerical(format!(
                    "assembled CDF starts at {cdf}, not 0"
                )));
            }
            cdf = 0.0;
        }
        if cdf < running {
            if running - cdf > REPAIR_EPS {
                return Err(Error::Numerical(format!(
                    "assembled CDF dips by {} at grid index {i}",
                    running - cdf
                )));
            }
            cdf = running;
        }
        running = cdf;
        *v = cdf;
    }
    SojournCdf::new(tails.grid().clone(), values, source)
}

/// The six assembled approximations: a choice of arrival-rate source,
/// join-probability source, and tail transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MethodId {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::A,
        MethodId::B,
        MethodId::C,
        MethodId::D,
        MethodId::E,
        MethodId::F,
    ];

    pub fn rate_source(self) -> RateSource {
        match self {
            MethodId::C | MethodId::F => RateSource::ClosedForm,
            _ => RateSource::MarkovChain,
        }
    }

    pub fn join_source(self) -> JoinSource {
        match self {
            MethodId::A | MethodId::D => JoinSource::MarkovChain,
            _ => JoinSource::BirthDeath,
        }
    }

    /// False means the matrix-exponential route.
    pub fn uses_uniformization(self) -> bool {
        matches!(self, MethodId::D | MethodId::E | MethodId::F)
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = match self {
            MethodId::A => 'A',
            MethodId::B => 'B',
            MethodId::C => 'C',
            MethodId::D => 'D',
            MethodId::E => 'E',
            MethodId::F => 'F',
        };
        write!(f, "{c}")
    }
}

impl std::str::FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(MethodId::A),
            "B" | "b" => Ok(MethodId::B),
            "C" | "c" => Ok(MethodId::C),
            "D" | "d" => Ok(MethodId::D),
            "E" | "e" => Ok(MethodId::E),
            "F" | "f" => Ok(MethodId::F),
            other => Err(Error::Parameter(format!(
                "unknown method {other:?}; expected A-F"
            ))),
        }
    }
}

/// Computes one method's CDF end to end.
pub fn compute_method(
    method: MethodId,
    config: &SystemConfig,
    hyper: &Hyperparameters,
    grid: &TimeGrid,
) -> Result<SojournCdf> {
    config.require_stable()?;
    hyper.validate_tail()?;
    let (profile, join) = match method.rate_source() {
        RateSource::MarkovChain => {
            let sol = McSolution::compute(config, hyper)?;
            let profile = sol.arrival_profile(hyper.l2)?;
            let join = match method.join_source() {
                JoinSource::MarkovChain => sol.join_probabilities(hyper.l2)?,
                JoinSource::BirthDeath => join_probabilities_birth_death(&profile, config.mu)?,
            };
            (profile, join)
        }
        RateSource::ClosedForm => {
            let profile = lambda_n_closed_form(config, hyper.l2)?;
            let join = join_probabilities_birth_death(&profile, config.mu)?;
            (profile, join)
        }
    };
    let tails = if method.uses_uniformization() {
        w_uniformization(&profile, config.mu, grid, hyper.l2)?
    } else {
        let gen = build_defective_generator(&profile, config.mu, hyper.l2)?;
        w_matrix_exponential(&gen, grid)?
    };
    assemble_cdf(&join, &tails, CdfSource::Method(method))
}

/// All six methods with shared intermediates: one CTMC solve, one
/// closed-form profile, and one tail matrix per (rate source, transform)
/// pair. Returned in method order A..F.
pub fn compute_all_methods(
    config: &SystemConfig,
    hyper: &Hyperparameters,
    grid: &TimeGrid,
) -> Result<Vec<SojournCdf>> {
    config.require_stable()?;
    hyper.validate_tail()?;

    let sol = McSolution::compute(config, hyper)?;
    let mc_profile = sol.arrival_profile(hyper.l2)?;
    let mc_join = sol.join_probabilities(hyper.l2)?;
    let mc_bd_join = join_probabilities_birth_death(&mc_profile, config.mu)?;
    let cf_profile = lambda_n_closed_form(config, hyper.l2)?;
    let cf_join = join_probabilities_birth_death(&cf_profile, config.mu)?;

    let (a, b) = {
        let gen = build_defective_generator(&mc_profile, config.mu, hyper.l2)?;
        let tails = w_matrix_exponential(&gen, grid)?;
        (
            assemble_cdf(&mc_join, &tails, CdfSource::Method(MethodId::A))?,
            assemble_cdf(&mc_bd_join, &tails, CdfSource::Method(MethodId::B))?,
        )
    };
    let c = {
        let gen = build_defective_generator(&cf_profile, config.mu, hyper.l2)?;
        let tails = w_matrix_exponential(&gen, grid)?;
        assemble_cdf(&cf_join, &tails, CdfSource::Method(MethodId::C))?
    };
    let (d, e) = {
        let tails = w_uniformization(&mc_profile, config.mu, grid, hyper.l2)?;
        (
            assemble_cdf(&mc_join, &tails, CdfSource::Method(MethodId::D))?,
            assemble_cdf(&mc_bd_join, &tails, CdfSource::Method(MethodId::E))?,
        )
    };
    let f = {
        let tails = w_uniformization(&cf_profile, config.mu, grid, hyper.l2)?;
        assemble_cdf(&cf_join, &tails, CdfSource::Method(MethodId::F))?
    };
    Ok(vec![a, b, c, d, e, f])
}

/// One row of a regime map: method to use for cluster size `r` (None = any)
/// on the half-open utilisation band `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRow {
    pub r: Option<u32>,
    pub lo: f64,
    pub hi: f64,
    pub method: MethodId,
}

/// Ordered first-match lookup table from `(R, rho)` to a method.
///
/// The built-in default encodes the measured accuracy regimes: the
/// CTMC-backed uniformization method D below rho = 0.6, the closed-form
/// matrix-exponential method C through the middle band, and E from 0.97 up,
/// for every cluster size. Users may override it with a file of
/// `R rho_low rho_high method` rows (see [`RegimeMap::parse`]).
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeMap {
    rows: Vec<RegimeRow>,
}

impl RegimeMap {
    pub fn default_map() -> RegimeMap {
        RegimeMap {
            rows: vec![
                RegimeRow {
                    r: None,
                    lo: 0.0,
                    hi: 0.6,
                    method: MethodId::D,
                },
                RegimeRow {
                    r: None,
                    lo: 0.6,
                    hi: 0.97,
                    method: MethodId::C,
                },
                RegimeRow {
                    r: None,
                    lo: 0.97,
                    hi: 1.0,
                    method: MethodId::E,
                },
            ],
        }
    }

    pub fn rows(&self) -> &[RegimeRow] {
        &self.rows
    }

    /// First row matching `(r, rho)`; `hi = 1.0` is treated as inclusive of
    /// everything below the stability boundary.
    pub fn lookup(&self, r: u32, rho: f64) -> Option<MethodId> {
        self.rows
            .iter()
            .find(|row| {
                (row.r.is_none() || row.r == Some(r)) && rho >= row.lo && rho < row.hi
            })
            .map(|row| row.method)
    }

    /// Parses an override map: one `R rho_low rho_high method` row per line,
    /// `#` starts a comment. The map must be total over R = 1..=10 at every
    /// utilisation decile midpoint (0.05, 0.15, ..., 0.95).
    pub fn parse(text: &str) -> Result<RegimeMap> {
        let mut rows = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parameter(format!(
                    "regime map line {}: expected 'R rho_low rho_high method', got {raw:?}",
                    ln + 1
                )));
            }
            let r: u32 = fields[0].parse().map_err(|_| {
                Error::Parameter(format!("regime map line {}: bad R {:?}", ln + 1, fields[0]))
            })?;
            let lo: f64 = fields[1].parse().map_err(|_| {
                Error::Parameter(format!(
                    "regime map line {}: bad rho_low {:?}",
                    ln + 1,
                    fields[1]
                ))
            })?;
            let hi: f64 = fields[2].parse().map_err(|_| {
                Error::Parameter(format!(
                    "regime map line {}: bad rho_high {:?}",
                    ln + 1,
                    fields[2]
                ))
            })?;
            if r < 1 {
                return Err(Error::Parameter(format!(
                    "regime map line {}: R must be at least 1",
                    ln + 1
                )));
            }
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(Error::Parameter(format!(
                    "regime map line {}: need 0 <= rho_low < rho_high <= 1, got [{lo}, {hi})",
                    ln + 1
                )));
            }
            let method: MethodId = fields[3].parse()?;
            rows.push(RegimeRow {
                r: Some(r),
                lo,
                hi,
                method,
            });
        }
        let map = RegimeMap { rows };
        for r in 1..=10u32 {
            for d in 0..10 {
                let rho = 0.05 + d as f64 * 0.1;
                if map.lookup(r, rho).is_none() {
                    return Err(Error::Parameter(format!(
                        "regime map leaves (R = {r}, rho = {rho:.2}) uncovered; \
                         override maps must be total"
                    )));
                }
            }
        }
        Ok(map)
    }
}

/// Recommended method for a configuration, from the default regime map.
pub fn best_method(config: &SystemConfig) -> Result<MethodId> {
    config.require_stable()?;
    Ok(RegimeMap::default_map()
        .lookup(config.r, config.rho())
        .expect("default regime map is total on [0, 1)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_time_grid;
    use crate::markov::lambda_n_mc;

    fn flat_profile(lam: f64, levels: usize) -> ArrivalRateProfile {
        ArrivalRateProfile::new(vec![lam; levels], RateSource::MarkovChain).unwrap()
    }

    #[test]
    fn generator_bands_pinned() {
        let profile =
            ArrivalRateProfile::new(vec![0.7, 0.5, 0.3, 0.2, 0.1], RateSource::MarkovChain)
                .unwrap();
        let gen = build_defective_generator(&profile, 2.0, 5).unwrap();
        // sub[n] = n/(n+1) mu at the first four indices.
        assert_eq!(gen.sub()[0], 0.0);
        assert_eq!(gen.sub()[1], 1.0);
        assert!((gen.sub()[2] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(gen.sub()[3], 1.5);
        // diag[n] = -(lambda_n + mu).
        assert_eq!(gen.diag()[0], -2.7);
        assert_eq!(gen.diag()[1], -2.5);
        assert_eq!(gen.diag()[2], -2.3);
        assert_eq!(gen.diag()[3], -2.2);
        // super[n] = lambda_n, dropped on the last row.
        assert_eq!(gen.sup()[0], 0.7);
        assert_eq!(gen.sup()[3], 0.2);
        assert_eq!(gen.sup()[4], 0.0);
        // Interior row sums leak exactly mu/(n+1).
        for n in 0..4 {
            let sum = gen.sub()[n] + gen.diag()[n] + gen.sup()[n];
            assert!(
                (sum + 2.0 / (n + 1) as f64).abs() < 1e-12,
                "row {n} sums to {sum}"
            );
        }
    }

    #[test]
    fn pure_death_two_level_matches_eigendecomposition() {
        // lambda = 0, mu = 1, two levels: D = [[-1, 0], [1/2, -1]] is a
        // Jordan block; exp(D t) 1 = (e^-t, e^-t (1 + t/2)).
        let profile = flat_profile(0.0, 2);
        let gen = build_defective_generator(&profile, 1.0, 2).unwrap();
        let grid = make_time_grid(5.0, 0.01).unwrap();
        let tails = w_matrix_exponential(&gen, &grid).unwrap();
        for (i, t) in grid.points().enumerate() {
            let w0 = (-t).exp();
            let w1 = (-t).exp() * (1.0 + t / 2.0);
            assert!((tails.value(0, i) - w0).abs() < 1e-10, "w0({t})");
            assert!((tails.value(1, i) - w1).abs() < 1e-10, "w1({t})");
        }
    }

    #[test]
    fn single_level_truncation_is_scalar_decay() {
        // With one retained level both routes collapse to
        // w_0(t) = exp(-(lambda_0 + mu) t).
        let profile =
            ArrivalRateProfile::new(vec![0.7, 0.5], RateSource::MarkovChain).unwrap();
        let grid = make_time_grid(4.0, 0.05).unwrap();
        let gen = build_defective_generator(&profile, 1.3, 1).unwrap();
        let via_expm = w_matrix_exponential(&gen, &grid).unwrap();
        let via_unif = w_uniformization(&profile, 1.3, &grid, 1).unwrap();
        for (i, t) in grid.points().enumerate() {
            let w0 = (-2.0 * t).exp();
            assert!((via_expm.value(0, i) - w0).abs() < 1e-10, "expm w0({t})");
            assert!((via_unif.value(0, i) - w0).abs() < 1e-9, "unif w0({t})");
        }
    }

    #[test]
    fn uniformization_matches_analytic_single_level_pair() {
        let profile = flat_profile(0.0, 2);
        let grid = make_time_grid(5.0, 0.01).unwrap();
        let tails = w_uniformization(&profile, 1.0, &grid, 2).unwrap();
        for (i, t) in grid.points().enumerate() {
            let w0 = (-t).exp();
            let w1 = (-t).exp() * (1.0 + t / 2.0);
            assert!((tails.value(0, i) - w0).abs() < 1e-9, "w0({t})");
            assert!((tails.value(1, i) - w1).abs() < 1e-9, "w1({t})");
        }
    }

    #[test]
    fn routes_agree_on_mc_profile() {
        let config = SystemConfig::new(2, 1.0, 1.0).unwrap();
        let hyper = Hyperparameters::defaults_for(2);
        let profile = lambda_n_mc(&config, &hyper).unwrap();
        let grid = make_time_grid(60.0, 0.02).unwrap();
        let gen = build_defective_generator(&profile, 1.0, hyper.l2).unwrap();
        let via_expm = w_matrix_exponential(&gen, &grid).unwrap();
        let via_unif = w_uniformization(&profile, 1.0, &grid, hyper.l2).unwrap();
        let mut worst = 0.0f64;
        for n in 0..hyper.l2 {
            for i in 0..grid.len() {
                worst = worst.max((via_expm.value(n, i) - via_unif.value(n, i)).abs());
            }
        }
        assert!(worst < 1e-6, "sup gap {worst:.3e}");
    }

    #[test]
    fn routes_agree_on_non_monotone_profile() {
        // A rate hump after level 0 exercises the max-rate uniformization
        // constant; lambda_0 + mu would make the recursion blow up.
        let mut rates = vec![0.8, 2.5, 6.0, 2.0];
        rates.extend((4..40).map(|n| (6.0f64 / n as f64).powi(n as i32)));
        let profile = ArrivalRateProfile::new(rates, RateSource::ClosedForm).unwrap();
        let grid = make_time_grid(40.0, 0.02).unwrap();
        let gen = build_defective_generator(&profile, 1.0, 40).unwrap();
        let via_expm = w_matrix_exponential(&gen, &grid).unwrap();
        let via_unif = w_uniformization(&profile, 1.0, &grid, 40).unwrap();
        let mut worst = 0.0f64;
        for n in 0..40 {
            for i in 0..grid.len() {
                worst = worst.max((via_expm.value(n, i) - via_unif.value(n, i)).abs());
            }
        }
        assert!(worst < 1e-6, "sup gap {worst:.3e}");
    }

    #[test]
    fn tail_matrix_validation_catches_dips() {
        let grid = make_time_grid(0.2, 0.1).unwrap();
        // Row 1 dips below row 0 by more than 1e-8 at the second point.
        let w = vec![1.0, 0.8, 0.7, 1.0, 0.5, 0.45];
        let tails = ConditionalTailMatrix::from_raw(grid, 2, w);
        assert!(tails.validate().is_err());
    }

    #[test]
    fn assemble_folds_join_probabilities() {
        let grid = make_time_grid(0.3, 0.1).unwrap();
        let w = vec![
            1.0, 0.5, 0.25, 0.125, // row 0
            1.0, 0.8, 0.64, 0.512, // row 1
        ];
        let tails = ConditionalTailMatrix::from_raw(grid, 2, w);
        let join = JoinProbabilities::new(vec![0.75, 0.25], JoinSource::BirthDeath).unwrap();
        let cdf = assemble_cdf(&join, &tails, CdfSource::Method(MethodId::A)).unwrap();
        let want = [
            0.0,
            1.0 - (0.75 * 0.5 + 0.25 * 0.8),
            1.0 - (0.75 * 0.25 + 0.25 * 0.64),
            1.0 - (0.75 * 0.125 + 0.25 * 0.512),
        ];
        for (got, want) in cdf.values().iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn assemble_repairs_small_dips_only() {
        let grid = make_time_grid(0.3, 0.1).unwrap();
        let join = JoinProbabilities::new(vec![1.0], JoinSource::BirthDeath).unwrap();
        // One-row tails with a 5e-7 bump upward (CDF dips by 5e-7): repaired.
        let w = vec![1.0, 0.6, 0.6 + 5e-7, 0.5];
        let tails = ConditionalTailMatrix::from_raw(grid.clone(), 1, w);
        let cdf = assemble_cdf(&join, &tails, CdfSource::Method(MethodId::B)).unwrap();
        assert_eq!(cdf.values()[1], cdf.values()[2], "dip pinned");
        // A 1e-4 bump is beyond repair.
        let w = vec![1.0, 0.6, 0.6 + 1e-4, 0.5];
        let tails = ConditionalTailMatrix::from_raw(grid, 1, w);
        assert!(assemble_cdf(&join, &tails, CdfSource::Method(MethodId::B)).is_err());
    }

    #[test]
    fn method_wiring_matches_table() {
        let mc = RateSource::MarkovChain;
        let cf = RateSource::ClosedForm;
        let jmc = JoinSource::MarkovChain;
        let jbd = JoinSource::BirthDeath;
        let want = [
            (MethodId::A, mc, jmc, false),
            (MethodId::B, mc, jbd, false),
            (MethodId::C, cf, jbd, false),
            (MethodId::D, mc, jmc, true),
            (MethodId::E, mc, jbd, true),
            (MethodId::F, cf, jbd, true),
        ];
        for (m, rs, js, unif) in want {
            assert_eq!(m.rate_source(), rs, "{m}");
            assert_eq!(m.join_source(), js, "{m}");
            assert_eq!(m.uses_uniformization(), unif, "{m}");
        }
    }

    #[test]
    fn default_regime_map_bands() {
        for r in [1u32, 3, 7, 10, 25] {
            let at = |rho: f64| {
                best_method(&SystemConfig::from_rho(r, rho, 1.0).unwrap()).unwrap()
            };
            assert_eq!(at(0.10), MethodId::D);
            assert_eq!(at(0.59), MethodId::D);
            assert_eq!(at(0.60), MethodId::C);
            assert_eq!(at(0.85), MethodId::C);
            assert_eq!(at(0.969), MethodId::C);
            assert_eq!(at(0.97), MethodId::E);
            assert_eq!(at(0.995), MethodId::E);
        }
    }

    #[test]
    fn regime_map_parse_and_lookup() {
        let mut text = String::from("# per-R override\n");
        for r in 1..=10 {
            text.push_str(&format!("{r} 0.0 0.5 A\n{r} 0.5 1.0 F # tail\n"));
        }
        let map = RegimeMap::parse(&text).unwrap();
        assert_eq!(map.lookup(4, 0.2), Some(MethodId::A));
        assert_eq!(map.lookup(4, 0.7), Some(MethodId::F));
        assert_eq!(map.lookup(11, 0.7), None);
    }

    #[test]
    fn regime_map_rejects_gaps_and_garbage() {
        // Coverage hole above 0.9 for R = 3.
        let mut text = String::new();
        for r in 1..=10 {
            let hi = if r == 3 { 0.9 } else { 1.0 };
            text.push_str(&format!("{r} 0.0 {hi} C\n"));
        }
        assert!(RegimeMap::parse(&text).is_err());
        assert!(RegimeMap::parse("1 0.0 1.0 Z\n").is_err());
        assert!(RegimeMap::parse("1 0.8 0.2 A\n").is_err());
        assert!(RegimeMap::parse("1 0.0 1.0\n").is_err());
    }
}

