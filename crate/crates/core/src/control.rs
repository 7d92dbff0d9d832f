//! Piecewise-constant controls.

use serde::{Deserialize, Serialize};

use crate::system::ControlRange;
use crate::{Error, Result};

/// Membership slack for control values.
pub const CONTROL_SLACK: f64 = 1e-9;

/// `u(t) = values[i]` for `breakpoints[i-1] ≤ t < breakpoints[i]`, with
/// `values[0]` on `(-∞, breakpoints[0])` and the last value on
/// `[breakpoints[k-1], ∞)`. A constant control has no breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCWControl {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl PCWControl {
    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidControl(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) || values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidControl("breakpoints must increase".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidControl("values differ in dimension".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn is_constant(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        &self.values[idx]
    }

    /// Checks every value against `range` with [`CONTROL_SLACK`].
    pub fn validate_in(&self, range: &ControlRange) -> Result<()> {
        if self.dim() != range.dim() {
            return Err(Error::DimensionMismatch {
                expected: range.dim(),
                got: self.dim(),
            });
        }
        match self.values.iter().position(|v| !range.contains(v, CONTROL_SLACK)) {
            Some(i) => Err(Error::InvalidControl(format!("value {i} lies outside U"))),
            None => Ok(()),
        }
    }

    /// `t ↦ u(τ + t)`.
    pub fn shift(&self, tau: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|b| b - tau).collect(),
            values: self.values.clone(),
        }
    }

    /// `t ↦ u(-t)`.
    pub fn reflect(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().rev().map(|b| -b).collect(),
            values: self.values.iter().rev().cloned().collect(),
        }
    }

    /// Constant pieces covering the time interval from `t0` to `t1` in
    /// traversal order (`t1 < t0` walks backwards). Each entry is
    /// `(start, end, value)`.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64, &[f64])> {
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi)
            .collect();
        if t1 < t0 {
            cuts.reverse();
        }
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut start = t0;
        for c in cuts.into_iter().chain(std::iter::once(t1)) {
            let mid = 0.5 * (start + c);
            out.push((start, c, self.at(mid)));
            start = c;
        }
        out
    }
}
