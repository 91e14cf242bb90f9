//! Dense matrix exponential by Pade(13) approximation with scaling and
//! squaring. The degree-13 approximant is accurate to double precision for
//! 1-norms up to ~5.37; larger inputs are halved `s` times and the result
//! squared back.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Pade(13) numerator/denominator coefficients, constant term first.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm threshold above which the argument is scaled down.
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        let col_sum: f64 = a.column(j).iter().map(|x| x.abs()).sum();
        worst = worst.max(col_sum);
    }
    worst
}

/// `exp(a)` for a square matrix.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Parameter(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "matrix exponential input contains non-finite entries".into(),
        ));
    }
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s as i32);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (PADE13[13] * &a6 + PADE13[11] * &a4 + PADE13[9] * &a2)
        + PADE13[7] * &a6
        + PADE13[5] * &a4
        + PADE13[3] * &a2
        + PADE13[1] * &ident;
    let u = &scaled * u_inner;
    let v = &a6 * (PADE13[12] * &a6 + PADE13[10] * &a4 + PADE13[8] * &a2)
        + PADE13[6] * &a6
        + PADE13[4] * &a4
        + PADE13[2] * &a2
        + PADE13[0] * &ident;

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Pade denominator is singular".into()))?;
    for _ in 0..s {
        x = &x * &x;
    }
    if x.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical(
            "matrix exponential produced non-finite entries".into(),
        ));
    }
    Ok(x)
}
