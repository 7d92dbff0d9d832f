//! Classical fixed-step RK4 for `ẋ = Ax + Bu` with piecewise-constant `u`.
//!
//! For a linear right-hand side one RK4 step of size `h` is the affine map
//! `x ↦ P x + Q v` with `X = hA`, `P = I + X + X²/2 + X³/6 + X⁴/24`,
//! `Q = h(I + X/2 + X²/6 + X³/24)` and `v = Bu`. Composing these gives the
//! discrete flow over a whole time interval as a single affine map. Steps
//! may be negative; integrating `(-A, -B)` backwards reproduces the forward
//! flow of `(A, B)` bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::control::PCWControl;
use crate::system::LinearSystem;

/// `x ↦ matrix · x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }

    pub fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        let n = self.offset.len();
        let mut out = self.offset.as_slice().to_vec();
        for (i, o) in out.iter_mut().enumerate() {
            for (j, xj) in x.iter().enumerate().take(n) {
                *o += self.matrix[(i, j)] * xj;
            }
        }
        out
    }
}

fn step_matrices(a: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let x = a * h;
    let x2 = &x * &x;
    let x3 = &x2 * &x;
    let x4 = &x3 * &x;
    let p = &id + &x + &x2 / 2.0 + &x3 / 6.0 + &x4 / 24.0;
    let q = (&id + &x / 2.0 + &x2 / 6.0 + &x3 / 24.0) * h;
    (p, q)
}

/// Discrete RK4 flow of `sys` under `u` from time `t0` over `duration`
/// (negative for backward integration), using about `steps` steps in total.
/// Every constant piece gets `max(1, round(steps·|piece|/|duration|))`
/// equal steps.
pub fn rk4_flow(sys: &LinearSystem, u: &PCWControl, t0: f64, duration: f64, steps: usize) -> AffineMap {
    let n = sys.state_dim();
    let mut map = AffineMap::identity(n);
    if duration == 0.0 {
        return map;
    }
    for (s, e, val) in u.pieces(t0, t0 + duration) {
        let len = e - s;
        if len == 0.0 {
            continue;
        }
        let k = ((steps as f64 * (len / duration).abs()).round() as usize).max(1);
        let h = len / k as f64;
        let (p, q) = step_matrices(&sys.a, h);
        let v = &sys.b * DVector::from_row_slice(val);
        let qv = q * v;
        for _ in 0..k {
            map.matrix = &p * &map.matrix;
            map.offset = &p * &map.offset + &qv;
        }
    }
    map
}

/// Endpoint `φ(duration, x0, u)` starting at time `t0`.
pub fn rk4_integrate(
    sys: &LinearSystem,
    x0: &[f64],
    u: &PCWControl,
    t0: f64,
    duration: f64,
    steps: usize,
) -> Vec<f64> {
    rk4_flow(sys, u, t0, duration, steps).apply_slice(x0)
}

/// Step-doubling error estimate `max ‖φ_N(x) - φ_{2N}(x)‖` over `points`.
pub fn rk4_error_estimate(
    sys: &LinearSystem,
    u: &PCWControl,
    duration: f64,
    steps: usize,
    points: &[Vec<f64>],
) -> f64 {
    let coarse = rk4_flow(sys, u, 0.0, duration, steps);
    let fine = rk4_flow(sys, u, 0.0, duration, 2 * steps);
    points
        .iter()
        .map(|x| {
            let a = coarse.apply_slice(x);
            let b = fine.apply_slice(x);
            a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}
