//! Occupancy-vector CTMC of the full cluster and the quantities extracted
//! from its steady state: per-level arrival fractions, state-dependent
//! arrival rates, join probabilities, and the truncation-boundary mass.
//!
//! A state is the vector of per-server customer counts `(a_1, ..., a_R)`,
//! each truncated to `a_u < L1`. Arrivals occur at total rate `lambda` and
//! split evenly across the servers currently at the minimum count; arrivals
//! that would push a server to `L1` are dropped, which bounds the chain at
//! the cost of a small boundary distortion measured by [`truncation_mass`].
//! Every busy server completes work at rate `mu` regardless of how many
//! customers share it (processor sharing conserves total speed).

use crate::config::{Hyperparameters, SystemConfig};
use crate::error::{Error, Result};
use crate::rates::{ArrivalRateProfile, JoinProbabilities, JoinSource, RateSource};
use nalgebra::{DMatrix, DVector};

/// Hard cap on the number of CTMC states.
const STATE_LIMIT: f64 = 1e7;

/// Largest state count solved by dense LU; larger chains use Gauss-Seidel.
const DENSE_LIMIT: usize = 5000;

/// Residual bound `max_j |(p Q)_j|` any accepted steady state must meet.
pub const RESIDUAL_BOUND: f64 = 1e-8;

/// Denominators below this are treated as empty conditioning events.
const DEGENERATE_MASS: f64 = 1e-14;

/// Lexicographically ordered enumeration of occupancy vectors with each
/// component below `l1`. The vector for index `i` is its base-`l1`
/// representation, most significant digit first, so index and state convert
/// in O(R) both ways.
#[derive(Debug, Clone)]
pub struct StateSpace {
    r: usize,
    l1: usize,
    occ: Vec<u32>,
}

impl StateSpace {
    pub fn enumerate(r: u32, l1: usize) -> Result<StateSpace> {
        if l1 < 2 {
            return Err(Error::Parameter(format!("L1 must be at least 2, got {l1}")));
        }
        let r = r as usize;
        let count = (l1 as f64).powi(r as i32);
        if count > STATE_LIMIT {
            return Err(Error::Resource(format!(
                "state space {l1}^{r} = {count:.3e} exceeds the 1e7 limit"
            )));
        }
        let n = count as usize;
        let mut occ = Vec::with_capacity(n * r);
        let mut state = vec![0u32; r];
        for _ in 0..n {
            occ.extend_from_slice(&state);
            // Odometer increment in lexicographic order (last digit fastest).
            for u in (0..r).rev() {
                if (state[u] as usize) + 1 < l1 {
                    state[u] += 1;
                    break;
                }
                state[u] = 0;
            }
        }
        Ok(StateSpace { r, l1, occ })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn l1(&self) -> usize {
        self.l1
    }

    pub fn len(&self) -> usize {
        self.occ.len() / self.r
    }

    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.occ[i * self.r..(i + 1) * self.r]
    }

    pub fn index_of(&self, state: &[u32]) -> usize {
        debug_assert_eq!(state.len(), self.r);
        let mut idx = 0usize;
        for &a in state {
            debug_assert!((a as usize) < self.l1);
            idx = idx * self.l1 + a as usize;
        }
        idx
    }

    pub fn states(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

/// Sparse CTMC generator in CSR form. Off-diagonal entries are transition
/// rates; the diagonal is held separately and equals minus the row sum, so
/// every row of the full matrix sums to zero.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    rate: Vec<f64>,
    diag: Vec<f64>,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal entries of row `i` as parallel (column, rate) slices.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col[lo..hi], &self.rate[lo..hi])
    }

    /// Generator sanity: non-negative off-diagonals, zero row sums, and at
    /// least one exit per state (a zeroed row makes the chain reducible and
    /// the balance system singular).
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, rates) = self.row(i);
            if cols.is_empty() {
                return Err(Error::Numerical(format!(
                    "generator is singular: state {i} has no outgoing transitions"
                )));
            }
            let mut sum = self.diag[i];
            for (&c, &q) in cols.iter().zip(rates) {
                if q < 0.0 || !q.is_finite() {
                    return Err(Error::Numerical(format!(
                        "negative or non-finite rate {q} at ({i}, {c})"
                    )));
                }
                sum += q;
            }
            if sum.abs() > 1e-12 * self.diag[i].abs().max(1.0) {
                return Err(Error::Numerical(format!("row {i} sums to {sum}, not 0")));
            }
        }
        Ok(())
    }
}

/// Builds the truncated JSQ-PS generator over the given state space.
pub fn build_generator(config: &SystemConfig, states: &StateSpace) -> TransitionMatrix {
    let r = states.r();
    let l1 = states.l1();
    let n = states.len();
    // Stride of coordinate u in the lexicographic index.
    let mut stride = vec![1usize; r];
    for u in (0..r.saturating_sub(1)).rev() {
        stride[u] = stride[u + 1] * l1;
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::new();
    let mut rate = Vec::new();
    let mut diag = Vec::with_capacity(n);
    row_ptr.push(0);

    for i in 0..n {
        let s = states.state(i);
        let mut out = 0.0;
        // Service: each busy server drains one customer at rate mu.
        for (u, &a) in s.iter().enumerate() {
            if a > 0 {
                col.push((i - stride[u]) as u32);
                rate.push(config.mu);
                out += config.mu;
            }
        }
        // Arrival: rate lambda/c to each of the c minimum-occupancy servers,
        // dropped entirely when the minimum sits on the truncation boundary.
        let min = *s.iter().min().expect("R >= 1");
        if (min as usize) < l1 - 1 {
            let c = s.iter().filter(|&&a| a == min).count();
            let share = config.lambda / c as f64;
            for (u, &a) in s.iter().enumerate() {
                if a == min {
                    col.push((i + stride[u]) as u32);
                    rate.push(share);
                    out += share;
                }
            }
        }
        diag.push(-out);
        row_ptr.push(col.len());
    }

    TransitionMatrix {
        n,
        row_ptr,
        col,
        rate,
        diag,
    }
}

/// Stationary distribution of a [`TransitionMatrix`].
#[derive(Debug, Clone)]
pub struct SteadyStateVector {
    probs: Vec<f64>,
    residual: f64,
}

impl SteadyStateVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Achieved `max_j |(p Q)_j|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Incoming-edge view (transpose CSR) used by Gauss-Seidel and the residual.
struct Incoming {
    col_ptr: Vec<usize>,
    row: Vec<u32>,
    rate: Vec<f64>,
}

fn build_incoming(q: &TransitionMatrix) -> Incoming {
    let n = q.n();
    let mut counts = vec![0usize; n + 1];
    for i in 0..n {
        let (cols, _) = q.row(i);
        for &c in cols {
            counts[c as usize + 1] += 1;
        }
    }
    for j in 0..n {
        counts[j + 1] += counts[j];
    }
    let col_ptr = counts.clone();
    let nnz = col_ptr[n];
    let mut row = vec![0u32; nnz];
    let mut rate = vec![0.0f64; nnz];
    let mut fill = col_ptr.clone();
    for i in 0..n {
        let (cols, rates) = q.row(i);
        for (&c, &v) in cols.iter().zip(rates) {
            let slot = fill[c as usize];
            row[slot] = i as u32;
            rate[slot] = v;
            fill[c as usize] += 1;
        }
    }
    Incoming { col_ptr, row, rate }
}

fn residual(q: &TransitionMatrix, inc: &Incoming, p: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..q.n() {
        let mut acc = p[j] * q.diag()[j];
        for k in inc.col_ptr[j]..inc.col_ptr[j + 1] {
            acc += p[inc.row[k] as usize] * inc.rate[k];
        }
        worst = worst.max(acc.abs());
    }
    worst
}

fn solve_dense(q: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = q.n();
    // Columns of A are the balance equations (A = Q^T); the last equation is
    // replaced by normalization.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = q.diag()[i];
        let (cols, rates) = q.row(i);
        for (&c, &v) in cols.iter().zip(rates) {
            a[(c as usize, i)] = v;
        }
    }
    for i in 0..n {
        a[(n - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.lu();
    let x = lu.solve(&b).ok_or_else(|| {
        Error::Numerical("LU factorization of the balance system is singular".into())
    })?;
    Ok(x.iter().cloned().collect())
}

fn solve_gauss_seidel(q: &TransitionMatrix, inc: &Incoming) -> Result<Vec<f64>> {
    const TARGET: f64 = 1e-11;
    const CHECK_EVERY: usize = 8;
    const MAX_SWEEPS: usize = 200_000;

    let n = q.n();
    let mut p = vec![1.0 / n as f64; n];
    let mut sweeps = 0usize;
    loop {
        for _ in 0..CHECK_EVERY {
            for j in 0..n {
                let mut acc = 0.0;
                for k in inc.col_ptr[j]..inc.col_ptr[j + 1] {
                    let i = inc.row[k] as usize;
                    if i != j {
                        acc += p[i] * inc.rate[k];
                    }
                }
                p[j] = acc / -q.diag()[j];
            }
            let total: f64 = p.iter().sum();
            let inv = 1.0 / total;
            p.iter_mut().for_each(|x| *x *= inv);
            sweeps += 1;
        }
        let res = residual(q, inc, &p);
        if res <= TARGET {
            return Ok(p);
        }
        if sweeps >= MAX_SWEEPS {
            if res <= RESIDUAL_BOUND {
                return Ok(p);
            }
            return Err(Error::Numerical(format!(
                "Gauss-Seidel stalled after {sweeps} sweeps at residual {res:.3e} \
                 (bound {RESIDUAL_BOUND:.1e})"
            )));
        }
    }
}

/// Solves `p Q = 0`, `sum p = 1` for the stationary distribution.
///
/// Chains up to 5000 states go through a dense LU with one balance equation
/// replaced by the normalization row; larger chains use Gauss-Seidel on the
/// transposed balance system with per-sweep renormalization. Either way the
/// result is clamped to non-negative entries, renormalized, and certified
/// against the 1e-8 residual bound.
pub fn solve_steady_state(q: &TransitionMatrix) -> Result<SteadyStateVector> {
    q.validate()?;
    let inc = build_incoming(q);
    let mut p = if q.n() <= DENSE_LIMIT {
        solve_dense(q)?
    } else {
        solve_gauss_seidel(q, &inc)?
    };
    for x in p.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-9 {
                return Err(Error::Numerical(format!(
                    "steady-state entry {x} is negative beyond elimination noise"
                )));
            }
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numerical(format!(
            "steady-state mass degenerated to {total}"
        )));
    }
    let inv = 1.0 / total;
    p.iter_mut().for_each(|x| *x *= inv);
    let res = residual(q, &inc, &p);
    if res > RESIDUAL_BOUND {
        return Err(Error::Numerical(format!(
            "steady-state residual {res:.3e} exceeds the {RESIDUAL_BOUND:.1e} bound"
        )));
    }
    Ok(SteadyStateVector { probs: p, residual: res })
}

/// Probability that an arrival joins a fixed server currently holding `n`
/// customers, for `n = 0..L1`. By symmetry the fixed server is taken to be
/// the first coordinate: condition on `s_0 = n`, and an arrival lands there
/// exactly when `n` is the minimum, with probability `1/c` among `c` tied
/// minima. Conditioning events with mass below 1e-14 yield 0 with a warning.
pub fn arrival_fractions(p: &SteadyStateVector, states: &StateSpace) -> Vec<f64> {
    let l1 = states.l1();
    let mut num = vec![0.0f64; l1];
    let mut den = vec![0.0f64; l1];
    for (i, s) in states.states().enumerate() {
        let mass = p.probs()[i];
        let first = s[0] as usize;
        den[first] += mass;
        let min = *s.iter().min().expect("R >= 1");
        if s[0] == min {
            let c = s.iter().filter(|&&a| a == min).count();
            num[first] += mass / c as f64;
        }
    }
    num.iter()
        .zip(&den)
        .enumerate()
        .map(|(n, (&nu, &de))| {
            if de < DEGENERATE_MASS {
                log::warn!(
                    "arrival fraction at level {n} has conditioning mass {de:.3e} < 1e-14; \
                     reporting 0"
                );
                0.0
            } else {
                nu / de
            }
        })
        .collect()
}

/// Geometric tail used to extend rate profiles beyond the CTMC truncation:
/// `mu * (lambda / (n mu))^n`.
pub(crate) fn tail_rate(config: &SystemConfig, n: usize) -> f64 {
    let base = config.lambda / (n as f64 * config.mu);
    config.mu * base.powi(n as i32)
}

/// One CTMC solve with all the extraction entry points, so pipelines that
/// need both rates and join probabilities factor the expensive part.
#[derive(Debug, Clone)]
pub struct McSolution {
    config: SystemConfig,
    space: StateSpace,
    steady: SteadyStateVector,
}

impl McSolution {
    pub fn compute(config: &SystemConfig, hyper: &Hyperparameters) -> Result<McSolution> {
        config.require_stable()?;
        hyper.validate(config.r)?;
        let space = StateSpace::enumerate(config.r, hyper.l1)?;
        let q = build_generator(config, &space);
        let steady = solve_steady_state(&q)?;
        Ok(McSolution {
            config: *config,
            space,
            steady,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn steady(&self) -> &SteadyStateVector {
        &self.steady
    }

    pub fn arrival_fractions(&self) -> Vec<f64> {
        arrival_fractions(&self.steady, &self.space)
    }

    /// `lambda_n = pi_n * lambda` below the truncation, spliced with the
    /// geometric tail up to `l2` levels.
    pub fn arrival_profile(&self, l2: usize) -> Result<ArrivalRateProfile> {
        let fractions = self.arrival_fractions();
        let mut rates: Vec<f64> = fractions
            .iter()
            .take(l2)
            .map(|pi| pi * self.config.lambda)
            .collect();
        for n in rates.len()..l2 {
            rates.push(tail_rate(&self.config, n));
        }
        ArrivalRateProfile::new(rates, RateSource::MarkovChain)
    }

    /// `A_n` = stationary mass of states whose minimum occupancy is `n`,
    /// zero-padded beyond the truncation and renormalized.
    pub fn join_probabilities(&self, l2: usize) -> Result<JoinProbabilities> {
        join_probabilities_mc(&self.steady, &self.space, l2)
    }

    /// Stationary mass sitting on the truncation boundary (some server at
    /// `L1 - 1`); a proxy for how much the truncation distorts the chain.
    pub fn boundary_mass(&self) -> f64 {
        let boundary = (self.space.l1() - 1) as u32;
        self.space
            .states()
            .enumerate()
            .filter(|(_, s)| s.iter().any(|&a| a == boundary))
            .map(|(i, _)| self.steady.probs()[i])
            .sum()
    }
}

/// CTMC-backed arrival-rate profile for the tagged queue (solve + extract).
pub fn lambda_n_mc(config: &SystemConfig, hyper: &Hyperparameters) -> Result<ArrivalRateProfile> {
    McSolution::compute(config, hyper)?.arrival_profile(hyper.l2)
}

/// CTMC-backed join probabilities over `l2` levels: mass of states whose
/// minimum occupancy is `n`, zero beyond the truncation, renormalized.
pub fn join_probabilities_mc(
    p: &SteadyStateVector,
    states: &StateSpace,
    l2: usize,
) -> Result<JoinProbabilities> {
    let mut probs = vec![0.0f64; l2];
    for (i, s) in states.states().enumerate() {
        let min = *s.iter().min().expect("R >= 1") as usize;
        if min < l2 {
            probs[min] += p.probs()[i];
        }
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical(
            "join probabilities sum to zero after truncation".into(),
        ));
    }
    let inv = 1.0 / total;
    probs.iter_mut().for_each(|x| *x *= inv);
    JoinProbabilities::new(probs, JoinSource::MarkovChain)
}

/// Boundary-mass proxy for the truncation error of a solved chain.
pub fn truncation_mass(p: &SteadyStateVector, states: &StateSpace) -> f64 {
    let boundary = (states.l1() - 1) as u32;
    states
        .states()
        .enumerate()
        .filter(|(_, s)| s.iter().any(|&a| a == boundary))
        .map(|(i, _)| p.probs()[i])
        .sum()
}
