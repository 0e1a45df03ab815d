//! Scalar-state Kalman filtering of a pilot-observed channel, with and without
//! online tracking of the AR(1) coefficient.
//!
//! The measurement is `y_n = x_n h_n + d_n` with `d_n` carrying contamination
//! and noise, the state model is `h_n = a h_{n-1} + w_n` with
//! `E|w_n|^2 = 1 - a^2`. The innovation covariance
//! `R = (p + sigma_c2) x x^H + sigma_n2 I` is rank-one plus identity, so the
//! gain row is `k = p x^H / D` with `D = (p + sigma_c2) x^H x + sigma_n2` and
//! nothing `tau x tau` is ever formed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linear::Projection;
use crate::error::{Error, Result};

/// Estimates beyond this magnitude abort the realization.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub h_hat: Complex64,
    /// AR coefficient used in the next prediction.
    pub a: f64,
    /// Predicted error covariance for the next slot.
    pub p: f64,
    /// d h_hat / d a
    pub q: Complex64,
    /// d p / d a
    pub s: f64,
    /// Slots processed.
    pub n: u64,
}

impl FilterState {
    pub fn new(h_hat0: Complex64, a0: f64, p1: f64, q0: Complex64, s1: f64) -> Self {
        Self { h_hat: h_hat0, a: a0, p: p1, q: q0, s: s1, n: 0 }
    }

    pub fn from_config(cfg: &TrackerConfig) -> Self {
        Self::new(cfg.h_hat0, cfg.a0, cfg.p1, cfg.q0, cfg.s1)
    }
}

/// Which recursion propagates `s = dp/da`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceDerivative {
    /// Derivative of the covariance recursion as stated:
    /// `s' = a^2 (1 - kx)^2 s + 2 a (1 - kx) p - 2 a`.
    #[default]
    Exact,
    /// `s' = a^2 (1 - kx)^2 s - 2 a kx p`, which differentiates a recursion
    /// whose process-noise term is `(1 - a^2) p` instead of `1 - a^2`.
    Published,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub mu: f64,
    pub nu: f64,
    pub sigma_n2: f64,
    pub sigma_c2: f64,
    pub a0: f64,
    pub h_hat0: Complex64,
    pub q0: Complex64,
    pub p1: f64,
    pub s1: f64,
    /// Factor converting the gradient of the unit-norm-pilot model into the
    /// pilot representation `mu` and `nu` are calibrated for. Pilots with
    /// unit-modulus entries carry energy `tau`, which scales the gradient by
    /// `tau` while leaving every other quantity of the filter unchanged.
    pub gradient_scale: f64,
    /// Apply the derivative cap and the `[0, 1]` clamp on `a`.
    pub truncate: bool,
    pub covariance_derivative: CovarianceDerivative,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            mu: 1e-5,
            nu: 100.0,
            sigma_n2: 0.2,
            sigma_c2: 0.6,
            a0: 0.5,
            h_hat0: Complex64::new(0.0, 0.0),
            q0: Complex64::new(0.0, 0.0),
            p1: 0.0,
            s1: 0.0,
            gradient_scale: 96.0,
            truncate: true,
            covariance_derivative: CovarianceDerivative::Exact,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) {
            return Err(Error::invalid("mu", format!("must be >= 0, got {}", self.mu)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::invalid("nu", format!("must be > 0, got {}", self.nu)));
        }
        if !(0.0..=1.0).contains(&self.a0) {
            return Err(Error::invalid("a0", format!("must lie in [0, 1], got {}", self.a0)));
        }
        if !(self.gradient_scale > 0.0) || !self.gradient_scale.is_finite() {
            return Err(Error::invalid(
                "gradient_scale",
                format!("must be finite and > 0, got {}", self.gradient_scale),
            ));
        }
        if !(self.p1 >= 0.0) {
            return Err(Error::invalid("p1", format!("must be >= 0, got {}", self.p1)));
        }
        if !(self.sigma_n2 >= 0.0) || !(self.sigma_c2 >= 0.0) {
            return Err(Error::invalid("sigma", "noise and contamination powers must be >= 0"));
        }
        Ok(())
    }
}

/// Per-slot quantities of one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `h_hat_n`
    pub estimate: Complex64,
    /// `a_{n-1} h_hat_{n-1}`, the estimate before seeing `y_n`.
    pub prediction: Complex64,
    /// `x^H e_n`
    pub innovation: Complex64,
    /// Scalar `g` with `k_n = g x^H`.
    pub gain: f64,
    /// `k_n x_n`
    pub kx: f64,
    /// Scalar `m` with `m_n = m x^H`.
    pub gain_derivative: f64,
    /// `grad_n = -Re((a q + h_hat)^* x^H e)`, half the derivative of `|e_n|^2`
    /// with respect to `a`.
    pub gradient: f64,
    /// `gradient_scale * grad_n` after the cap, as applied to `a`.
    pub applied_gradient: f64,
}

/// Gain row scale `p / ((p + sigma_c2) x^H x + sigma_n2)`; zero when the
/// denominator vanishes (no prior uncertainty and no disturbance).
fn gain_scale(p: f64, x_norm2: f64, sigma_n2: f64, sigma_c2: f64) -> (f64, f64) {
    let d = (p + sigma_c2) * x_norm2 + sigma_n2;
    if d > 0.0 {
        (p / d, 1.0 / d)
    } else {
        (0.0, 0.0)
    }
}

/// Kalman gain row `k = p x^H R^{-1}` via the rank-one identity.
pub fn kalman_gain(x: &[Complex64], p: f64, sigma_n2: f64, sigma_c2: f64) -> Vec<Complex64> {
    let x_norm2: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let (g, _) = gain_scale(p, x_norm2, sigma_n2, sigma_c2);
    x.iter().map(|v| v.conj() * g).collect()
}

/// Row `x^H R^{-1}` via the rank-one identity.
pub fn whitened_pilot(x: &[Complex64], p: f64, sigma_n2: f64, sigma_c2: f64) -> Vec<Complex64> {
    let x_norm2: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let (_, inv_d) = gain_scale(p, x_norm2, sigma_n2, sigma_c2);
    x.iter().map(|v| v.conj() * inv_d).collect()
}

fn check(state: &FilterState, slot: u64) -> Result<()> {
    let finite = state.h_hat.re.is_finite()
        && state.h_hat.im.is_finite()
        && state.a.is_finite()
        && state.p.is_finite()
        && state.q.re.is_finite()
        && state.q.im.is_finite()
        && state.s.is_finite();
    if !finite {
        return Err(Error::NonFinite { quantity: "filter state", slot });
    }
    let magnitude = state.h_hat.norm();
    if magnitude > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { slot, magnitude });
    }
    Ok(())
}

/// Conventional Kalman step with a known, fixed AR coefficient.
pub fn kalman_step(
    state: &mut FilterState,
    x: &[Complex64],
    y: &[Complex64],
    a_known: f64,
    sigma_n2: f64,
    sigma_c2: f64,
) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&a_known) {
        return Err(Error::invalid("a", format!("AR coefficient {a_known} outside [0, 1]")));
    }
    let proj = Projection::new(x, y)?;
    if !proj.xhy.re.is_finite() || !proj.xhy.im.is_finite() {
        return Err(Error::NonFinite { quantity: "observation", slot: state.n });
    }
    kalman_projected(state, proj, a_known, sigma_n2, sigma_c2)
}

pub(crate) fn kalman_projected(
    state: &mut FilterState,
    proj: Projection,
    a: f64,
    sigma_n2: f64,
    sigma_c2: f64,
) -> Result<Complex64> {
    let innovation = proj.xhy - a * state.h_hat * proj.x_norm2;
    let (g, _) = gain_scale(state.p, proj.x_norm2, sigma_n2, sigma_c2);
    let kx = g * proj.x_norm2;
    state.h_hat = a * state.h_hat + g * innovation;
    state.p = a * a * (1.0 - kx) * state.p + (1.0 - a * a);
    state.a = a;
    state.n += 1;
    check(state, state.n)?;
    Ok(state.h_hat)
}

/// Kalman step with AR-coefficient tracking.
///
/// Order per slot: innovation, gradient, coefficient update, gain, estimate,
/// gain derivative, estimate derivative, covariance and its derivative.
/// Right-hand sides use the previous slot's `h_hat`, `q`, `p`, `s`.
pub fn modified_kalman_step(
    state: &mut FilterState,
    x: &[Complex64],
    y: &[Complex64],
    cfg: &TrackerConfig,
) -> Result<StepReport> {
    let proj = Projection::new(x, y)?;
    if !proj.xhy.re.is_finite() || !proj.xhy.im.is_finite() {
        return Err(Error::NonFinite { quantity: "observation", slot: state.n });
    }
    modified_projected(state, proj, cfg)
}

pub(crate) fn modified_projected(
    state: &mut FilterState,
    proj: Projection,
    cfg: &TrackerConfig,
) -> Result<StepReport> {
    let nx = proj.x_norm2;
    let a_prev = state.a;
    let h_prev = state.h_hat;
    let q_prev = state.q;
    let p = state.p;
    let s = state.s;

    let prediction = a_prev * h_prev;
    let innovation = proj.xhy - prediction * nx;

    // Only the real part moves a real coefficient.
    let gradient = -((q_prev * a_prev + h_prev).conj() * innovation).re;
    let scaled = cfg.gradient_scale * gradient;
    let applied_gradient = if cfg.truncate {
        scaled.clamp(-cfg.nu, cfg.nu)
    } else {
        scaled
    };
    let mut a = a_prev - cfg.mu * applied_gradient;
    if cfg.truncate {
        a = a.clamp(0.0, 1.0);
    }

    let (g, inv_d) = gain_scale(p, nx, cfg.sigma_n2, cfg.sigma_c2);
    let kx = g * nx;
    let h_hat = a * h_prev + g * innovation;

    let m = (1.0 - kx) * s * inv_d;
    let q = (1.0 - kx) * (a * q_prev + h_prev) + m * innovation;

    let p_next = a * a * (1.0 - kx) * p + (1.0 - a * a);
    let s_next = match cfg.covariance_derivative {
        CovarianceDerivative::Exact => {
            a * a * (1.0 - kx) * (1.0 - kx) * s + 2.0 * a * (1.0 - kx) * p - 2.0 * a
        }
        CovarianceDerivative::Published => a * a * (1.0 - kx) * (1.0 - kx) * s - 2.0 * a * kx * p,
    };

    *state = FilterState {
        h_hat,
        a,
        p: p_next,
        q,
        s: s_next,
        n: state.n + 1,
    };
    check(state, state.n)?;
    Ok(StepReport {
        estimate: h_hat,
        prediction,
        innovation,
        gain: g,
        kx,
        gain_derivative: m,
        gradient,
        applied_gradient,
    })
}

/// Same recursion as [`modified_kalman_step`], reporting the one-step
/// prediction `a_{n-1} h_hat_{n-1}` as the slot estimate.
pub fn predictor_step(
    state: &mut FilterState,
    x: &[Complex64],
    y: &[Complex64],
    cfg: &TrackerConfig,
) -> Result<Complex64> {
    modified_kalman_step(state, x, y, cfg).map(|r| r.prediction)
}
