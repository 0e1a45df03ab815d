//! Single-slot estimators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pilots::inner;

/// Matched-filter statistic `x^H y` together with `x^H x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub xhy: Complex64,
    pub x_norm2: f64,
}

impl Projection {
    pub fn new(x: &[Complex64], y: &[Complex64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(
                "y",
                format!("length {} does not match pilot length {}", y.len(), x.len()),
            ));
        }
        Ok(Self {
            xhy: inner(x, y),
            x_norm2: x.iter().map(|v| v.norm_sqr()).sum(),
        })
    }
}

/// `(x^H x)^{-1} x^H y`.
pub fn ls_estimate(x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
    ls_projected(Projection::new(x, y)?)
}

pub(crate) fn ls_projected(proj: Projection) -> Result<Complex64> {
    if proj.x_norm2 == 0.0 {
        return Err(Error::invalid("x", "pilot is identically zero"));
    }
    Ok(proj.xhy / proj.x_norm2)
}

/// `x^H (x x^H + sigma_n2 I + sigma_c2 x x^H)^{-1} y`.
///
/// The matrix is `(1 + sigma_c2) x x^H + sigma_n2 I`, so by the rank-one
/// inversion identity the estimate is `x^H y / ((1 + sigma_c2) x^H x + sigma_n2)`.
/// With `sigma_n2 = sigma_c2 = 0` and unit-norm `x` this is the LS estimate.
pub fn mmse_estimate(
    x: &[Complex64],
    y: &[Complex64],
    sigma_n2: f64,
    sigma_c2: f64,
) -> Result<Complex64> {
    mmse_projected(Projection::new(x, y)?, sigma_n2, sigma_c2)
}

pub(crate) fn mmse_projected(proj: Projection, sigma_n2: f64, sigma_c2: f64) -> Result<Complex64> {
    if proj.x_norm2 == 0.0 {
        return Err(Error::invalid("x", "pilot is identically zero"));
    }
    if sigma_n2 == 0.0 && sigma_c2 == 0.0 {
        return ls_projected(proj);
    }
    Ok(proj.xhy / ((1.0 + sigma_c2) * proj.x_norm2 + sigma_n2))
}
