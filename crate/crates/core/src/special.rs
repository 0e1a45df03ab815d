//! Bessel function of the first kind, order zero.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 14.0;

/// `J0(x)`, accurate to about 1e-11 absolute over the real line.
///
/// Power series below |x| = 14, Hankel asymptotic expansion above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    // sum_k (-1)^k (x^2/4)^k / (k!)^2
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 0.5 * x {
            return sum;
        }
        k += 1.0;
    }
}

fn asymptotic(x: f64) -> f64 {
    // a_k = prod_{j=1..k} (-(2j-1)^2) / (k! 8^k); P and Q are the even/odd
    // parts of sum a_k / x^k with alternating signs.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut k = 1u32;
    loop {
        let odd = (2 * k - 1) as f64;
        let next = term * (-odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 {
            break;
        }
        term = next;
        // (-1)^floor(k/2)
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k.is_multiple_of(2) {
            p += sign * term;
        } else {
            q += sign * term;
        }
        k += 1;
    }
    let w = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}
