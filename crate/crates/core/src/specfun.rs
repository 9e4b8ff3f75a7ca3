//! Log-Gamma, Beta and digamma for positive real arguments.
//!
//! Small arguments are shifted upward with the recurrences
//! `Γ(x+1) = xΓ(x)` and `ψ(x+1) = ψ(x) + 1/x` until the asymptotic
//! (Stirling) series is accurate to machine precision.

use crate::error::{domain, Result};

/// Euler–Mascheroni constant γ = −ψ(1).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// Below these thresholds the argument is shifted before the series is applied.
const STIRLING_MIN: f64 = 15.0;
const DIGAMMA_MIN: f64 = 10.0;

// B_{2k} / (2k (2k-1)), k = 1..8
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2k} / (2k), k = 1..7
const DIGAMMA_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} requires a positive finite argument, got {x}")))
    }
}

/// Correction term of the Stirling series, valid for z >= STIRLING_MIN.
fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING_COEFFS.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    let mut z = x;
    let mut prod = 1.0;
    while z < STIRLING_MIN {
        prod *= z;
        z += 1.0;
    }
    let series = (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_tail(z);
    series - prod.ln()
}

/// `ln Γ(x + a) − ln Γ(x + b)` without the cancellation of two large log-Gammas.
///
/// Requires `x + a > 0` and `x + b > 0`.
pub(crate) fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    let mut za = x + a;
    let mut zb = x + b;
    let mut ratio = 1.0;
    while za.min(zb) < STIRLING_MIN {
        ratio *= zb / za;
        za += 1.0;
        zb += 1.0;
    }
    let d = a - b;
    let main = (za - 0.5) * (d / zb).ln_1p() + d * zb.ln() - d;
    main + stirling_tail(za) - stirling_tail(zb) + ratio.ln()
}

pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    let mut z = x;
    let mut shift = 0.0;
    while z < DIGAMMA_MIN {
        shift += 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut acc = 0.0;
    for c in DIGAMMA_COEFFS.iter().rev() {
        acc = acc * inv2 + c;
    }
    z.ln() - 0.5 / z - acc * inv2 - shift
}

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

/// Gamma function for `x > 0`; overflows to infinity beyond ~171.6.
pub fn gamma(x: f64) -> Result<f64> {
    check_positive("gamma", x)?;
    Ok(ln_gamma_unchecked(x).exp())
}

/// Beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
///
/// The ratio `Γ(big)/Γ(big+small)` is evaluated directly so that large
/// first arguments keep full relative precision.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    check_positive("beta", a)?;
    check_positive("beta", b)?;
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    Ok((ln_gamma_unchecked(small) - ln_gamma_ratio(big, small, 0.0)).exp())
}

/// Digamma function ψ(x) = d/dx ln Γ(x), for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}
