//! Fitted closed-form arrival rates for the tagged queue and the
//! birth-death join probabilities they induce.
//!
//! The first three levels come from empirical fits in `rho` (polynomial and
//! rational coefficient functions below); levels `n >= 3` use the geometric
//! tail `mu (lambda / (n mu))^n`. The fits are only meaningful on the open
//! stability region, and because they are empirical a composition can dip
//! below zero for extreme utilisations; such rates are clamped to zero with
//! a logged warning rather than rejected.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::markov::tail_rate;
use crate::rates::{ArrivalRateProfile, JoinProbabilities, JoinSource, RateSource};

/// Denominators this close to zero abort with a numerical error naming the
/// coefficient, rather than returning a wild rate.
const DIV_EPS: f64 = 1e-12;

fn checked_div(num: f64, den: f64, what: &str) -> Result<f64> {
    if den.abs() < DIV_EPS {
        return Err(Error::Numerical(format!(
            "{what} denominator {den:.3e} is within 1e-12 of zero"
        )));
    }
    Ok(num / den)
}

fn k_a(rho: f64) -> f64 {
    rho / (1.0 - rho)
}

fn k_b(rho: f64) -> Result<f64> {
    checked_div(
        -0.0263 * rho * rho + 0.0054 * rho + 0.1155,
        rho * rho - 1.939 * rho + 0.9534,
        "k_b",
    )
}

fn k_c(rho: f64) -> f64 {
    -6.2973 * rho.powi(4) + 14.3382 * rho.powi(3) - 12.3532 * rho * rho + 6.2557 * rho - 1.005
}

fn k_d(rho: f64) -> Result<f64> {
    checked_div(
        -226.1839 * rho * rho + 342.3814 * rho + 10.2851,
        rho.powi(3) - 146.2751 * rho * rho - 481.1256 * rho + 599.9166,
        "k_d",
    )
}

fn k_e(rho: f64) -> f64 {
    0.4462 * rho.powi(3) - 1.8317 * rho * rho + 2.4376 * rho - 0.0512
}

fn k_f(rho: f64) -> f64 {
    -0.29 * rho.powi(3) + 0.8822 * rho * rho - 0.5349 * rho + 1.0112
}

fn k_g(rho: f64) -> f64 {
    -0.1864 * rho * rho + 1.195 * rho - 0.016
}

fn clamp_rate(value: f64, what: &str, rho: f64) -> f64 {
    if value < 0.0 {
        log::warn!("closed-form {what} = {value:.6e} at rho = {rho:.4} clamped to 0");
        0.0
    } else {
        value
    }
}

/// Closed-form arrival-rate profile over `l2` levels.
///
/// Evaluation order is `lambda_0`, `lambda_2`, `lambda_1`: the first two are
/// direct compositions and `lambda_1` consumes both.
pub fn lambda_n_closed_form(config: &SystemConfig, l2: usize) -> Result<ArrivalRateProfile> {
    config.require_stable()?;
    if l2 < 2 {
        return Err(Error::Parameter(format!(
            "closed-form profile needs at least 2 levels, got {l2}"
        )));
    }
    let rho = config.rho();
    let mu = config.mu;
    let rp = rho.powi(config.r as i32);

    // The raw (pre-clamp) values feed lambda_1's composition; clamping to
    // zero happens only on the emitted rates, so a slightly negative
    // lambda_0 at the edge of the fit's range does not turn into a
    // division by a clamped zero.
    let lambda0_raw = mu
        * (k_a(rho)
            - k_b(rho)? * k_c(rho).powi(config.r as i32)
            - k_d(rho)? * k_e(rho).powi(config.r as i32));
    let lambda2_raw = mu * k_f(rho) * k_g(rho).powi(config.r as i32);
    let lambda1 = {
        let coupling = checked_div(
            mu * (rho - rho.powi(config.r as i32 + 1)),
            lambda0_raw * (1.0 - rho),
            "lambda_0",
        )?;
        let num = rp - 1.0 + coupling;
        let den = lambda2_raw / mu - rp + 1.0;
        clamp_rate(mu * checked_div(num, den, "lambda_1")?, "lambda_1", rho)
    };
    let lambda0 = clamp_rate(lambda0_raw, "lambda_0", rho);
    let lambda2 = clamp_rate(lambda2_raw, "lambda_2", rho);

    let mut rates = Vec::with_capacity(l2);
    rates.push(lambda0);
    rates.push(lambda1);
    if l2 > 2 {
        rates.push(lambda2);
    }
    for n in 3..l2 {
        rates.push(tail_rate(config, n));
    }
    ArrivalRateProfile::new(rates, RateSource::ClosedForm)
}

/// Stationary distribution of the single-queue birth-death ladder with
/// births `lambda_n` and unit-speed PS service at rate `mu`:
/// `A_n` proportional to `prod_{i<n} lambda_i / mu`, truncated at the
/// profile length and renormalized. Products run in log space so long
/// ladders neither overflow nor underflow.
pub fn join_probabilities_birth_death(
    profile: &ArrivalRateProfile,
    mu: f64,
) -> Result<JoinProbabilities> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Parameter(format!(
            "mu must be finite and positive, got {mu}"
        )));
    }
    let n = profile.len();
    let mut log_terms = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for i in 0..n {
        log_terms.push(acc);
        if i + 1 < n {
            acc += (profile.rates()[i] / mu).ln(); // ln(0) = -inf zeroes the rest
        }
    }
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_terms.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|&w| w / total).collect();
    JoinProbabilities::new(probs, JoinSource::BirthDeath)
}
