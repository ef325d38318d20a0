//! The w recursion, the timescale constant α, and the scaling constant C.
//!
//! w_k is the mean particle count per renewal of the killed process on
//! [-k, k]; it satisfies w_0 = 1 and w_k = w_{k-1}(k+1)(k+2)/k² − 1/k, kept
//! here in exact rational arithmetic so the closed form
//!     w_k / ((k+1)²(k+2)) = 1/2 − Σ_{j=1}^k 1/(j(j+1)²(j+2))
//! can be tested as an identity rather than a float comparison. The series
//! telescopes (partial fractions 1/(2j) − 1/(j+1)² − 1/(2(j+2))) to
//! 7/4 − π²/6, giving α = (π²/6 − 5/4)^{-1}; the code computes α from the
//! partial sums with a certified tail bound instead, and the closed form
//! serves as an independent cross-check in the tests.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

/// α to well below 1e-12 (certified by `alpha`): mean microsteps per particle
/// in the large-time limit.
pub const ALPHA: f64 = 2.532068220856473;

/// C = 2√2 · α^{1/4}: the constant in front of n^{1/4} in the support law.
pub const C_CONST: f64 = 3.5679096164562365;

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// w_0..w_K as exact rationals.
pub fn w_recursion(k_max: usize) -> Vec<BigRational> {
    let mut w = Vec::with_capacity(k_max + 1);
    w.push(BigRational::one());
    for k in 1..=k_max as i64 {
        let prev = w.last().unwrap();
        let next = prev * big((k + 1) * (k + 2)) / big(k * k) - big(k).recip();
        w.push(next);
    }
    w
}

/// Partial sums Σ_{j=1}^k 1/(j(j+1)²(j+2)) for k = 0..K, exact.
pub fn series_partial_sums(k_max: usize) -> Vec<BigRational> {
    let mut sums = Vec::with_capacity(k_max + 1);
    sums.push(BigRational::zero());
    for j in 1..=k_max as i64 {
        let term = big(j * (j + 1) * (j + 1) * (j + 2)).recip();
        sums.push(sums.last().unwrap() + term);
    }
    sums
}

/// Checks w_k/((k+1)²(k+2)) + Σ_{j≤k} 1/(j(j+1)²(j+2)) = 1/2 exactly.
pub fn identity_holds(w: &[BigRational], sums: &[BigRational], k: usize) -> bool {
    let kk = k as i64;
    let lhs = &w[k] / big((kk + 1) * (kk + 1) * (kk + 2)) + &sums[k];
    lhs == big(1) / big(2)
}

/// α with a certified error bound: partial sums of the series in compensated
/// f64 arithmetic; the tail after k is positive and below
/// Σ_{j>k} j^{-4} < ∫_k^∞ x^{-4} dx = 1/(3k³).
pub fn alpha(tolerance: f64) -> (f64, f64) {
    assert!(tolerance > 0.0);
    let mut k = 64u64;
    loop {
        let s = kahan_partial_sum(k);
        let tail = 1.0 / (3.0 * (k as f64).powi(3));
        let hi = 1.0 / (0.5 - s - tail); // upper end: larger subtracted sum
        let lo = 1.0 / (0.5 - s);
        let mid = 0.5 * (hi + lo);
        // half-width of the bracket plus slack for f64 summation rounding
        let err = 0.5 * (hi - lo) + 1e-13;
        if err <= tolerance || k >= 1 << 24 {
            return (mid, err);
        }
        k *= 2;
    }
}

fn kahan_partial_sum(k: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for j in 1..=k {
        let j = j as f64;
        let term = 1.0 / (j * (j + 1.0) * (j + 1.0) * (j + 2.0));
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// C = 2√2 · α^{1/4} with the propagated certified error.
pub fn c_constant(tolerance: f64) -> (f64, f64) {
    assert!(tolerance > 0.0);
    // dC/dα = C / (4α), so pass a tightened tolerance down to α
    let factor = C_CONST / (4.0 * ALPHA);
    let (a, a_err) = alpha(tolerance / factor / 2.0);
    let c = 2.0 * 2.0f64.sqrt() * a.powf(0.25);
    (c, a_err * factor + 1e-14)
}

#[derive(Clone, Debug)]
pub struct ConstantsTable {
    pub w: Vec<BigRational>,
    pub series: Vec<BigRational>,
    pub alpha: f64,
    pub alpha_error: f64,
    pub c: f64,
    pub c_error: f64,
}

pub fn constants_table(k_max: usize, tolerance: f64) -> ConstantsTable {
    let (alpha, alpha_error) = alpha(tolerance);
    let (c, c_error) = c_constant(tolerance);
    ConstantsTable {
        w: w_recursion(k_max),
        series: series_partial_sums(k_max),
        alpha,
        alpha_error,
        c,
        c_error,
    }
}

/// w_k as f64 (exact rationals overflow f64 early; go through a quotient).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    // BigRational::to_f64 handles magnitudes beyond f64 by scaling
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}
