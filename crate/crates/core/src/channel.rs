//! Clarke sum-of-scatterers flat fading.
//!
//! `h(t) = N_s^{-1/2} * sum_m exp(j(2 pi f_d t cos(alpha_m) + phi_m))`, with
//! angles of arrival and initial phases drawn i.i.d. uniform on `[-pi, pi)`.
//! Each channel has unit average power and autocorrelation `J0(2 pi f_d dt)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::special::bessel_j0;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn kmh_to_ms(v_kmh: f64) -> f64 {
    v_kmh / 3.6
}

/// Maximum Doppler shift `(v / c) * f_c` in Hz for speed `v` (m/s) and carrier `f_c` (Hz).
pub fn doppler_shift(v: f64, f_c: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid("v", format!("speed must be finite and >= 0, got {v}")));
    }
    if !(f_c > 0.0) || !f_c.is_finite() {
        return Err(Error::invalid("f_c", format!("carrier must be finite and > 0, got {f_c}")));
    }
    Ok(v / SPEED_OF_LIGHT * f_c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerParams {
    pub v: f64,
    pub f_c: f64,
    pub f_d: f64,
}

impl DopplerParams {
    pub fn new(v: f64, f_c: f64) -> Result<Self> {
        let f_d = doppler_shift(v, f_c)?;
        Ok(Self { v, f_c, f_d })
    }

    pub fn from_kmh(v_kmh: f64, f_c: f64) -> Result<Self> {
        Self::new(kmh_to_ms(v_kmh), f_c)
    }
}

/// One realization of Clarke's model. Immutable once drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ClarkeChannel {
    f_d: f64,
    scale: f64,
    /// Per-scatterer angular rate `2 pi f_d cos(alpha_m)`, rad/s.
    omega: Vec<f64>,
    alpha: Vec<f64>,
    phi: Vec<f64>,
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // [0, 1) -> [-pi, pi)
    rng.random::<f64>() * 2.0 * PI - PI
}

impl ClarkeChannel {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, n_scatterers: usize, f_d: f64) -> Result<Self> {
        if n_scatterers == 0 {
            return Err(Error::invalid("N_s", "need at least one scatterer"));
        }
        if !(f_d >= 0.0) || !f_d.is_finite() {
            return Err(Error::invalid("f_d", format!("Doppler must be finite and >= 0, got {f_d}")));
        }
        let mut alpha = Vec::with_capacity(n_scatterers);
        let mut phi = Vec::with_capacity(n_scatterers);
        for _ in 0..n_scatterers {
            alpha.push(uniform_angle(rng));
            phi.push(uniform_angle(rng));
        }
        let omega = alpha.iter().map(|a| 2.0 * PI * f_d * a.cos()).collect();
        Ok(Self {
            f_d,
            scale: (n_scatterers as f64).sqrt().recip(),
            omega,
            alpha,
            phi,
        })
    }

    pub fn n_scatterers(&self) -> usize {
        self.alpha.len()
    }

    pub fn doppler(&self) -> f64 {
        self.f_d
    }

    pub fn angles(&self) -> &[f64] {
        &self.alpha
    }

    pub fn phases(&self) -> &[f64] {
        &self.phi
    }

    /// Channel coefficient at time `t` seconds.
    pub fn sample(&self, t: f64) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (w, p) in self.omega.iter().zip(&self.phi) {
            let (s, c) = (w * t + p).sin_cos();
            re += c;
            im += s;
        }
        Complex64::new(re * self.scale, im * self.scale)
    }

    /// Samples at `t = n * t_s` for `n = first..first + len`.
    pub fn trajectory(&self, t_s: f64, first: u64, len: usize) -> Vec<Complex64> {
        (0..len as u64)
            .map(|i| self.sample((first + i) as f64 * t_s))
            .collect()
    }
}

/// Normalized autocorrelation `J0(2 pi f_d dt)` of Clarke's model.
pub fn theoretical_autocorrelation(f_d: f64, dt: f64) -> f64 {
    bessel_j0(2.0 * PI * f_d * dt)
}
