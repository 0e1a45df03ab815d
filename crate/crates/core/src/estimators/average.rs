use num_complex::Complex64;

use super::linear::{ls_projected, Projection};
use crate::error::Result;

/// Average of all LS estimates seen so far.
#[derive(Debug, Clone, Default)]
pub struct RunningAverage {
    sum: Complex64,
    count: u64,
}

impl RunningAverage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
        self.step_projected(Projection::new(x, y)?)
    }

    pub(crate) fn step_projected(&mut self, proj: Projection) -> Result<Complex64> {
        self.sum += ls_projected(proj)?;
        self.count += 1;
        Ok(self.sum / self.count as f64)
    }
}
