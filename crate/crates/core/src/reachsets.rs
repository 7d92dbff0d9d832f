//! Reachable and controllable sets of the origin, the control set `D₀` and
//! the chain control set `E`.
//!
//! The stable part `D⁻` is the closure of the reachable set of the system
//! induced on `L⁻`, the unstable part `D⁺` the closure of the reachable set
//! of the time-reversed system induced on `L⁺`. Then
//! `D̄₀ = D⁺ ⊕ (L⁰∩𝒞) ⊕ D⁻` and `E = D⁺ ⊕ D⁻ ⊕ L⁰`. Supports are
//! `h(d) = ∫₀^T h_U(B̂ᵀ e^{Mᵀs} d) ds` for the induced pair `(M, B̂)`.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convex::{AffineSetSum, ConvexBody};
use crate::linalg::{intersection, spectral_norm, to_rows};
use crate::quadrature::adaptive_simpson;
use crate::spectral::{
    controllability_subspace, decay_bound, induced_block, lyapunov_split, matrix_exp, DecayBound,
    SpectralSplit,
};
use crate::system::{ControlRange, LinearSystem};
use crate::{Error, Result};

/// Target bound on the neglected tail `∫_{T*}^∞` of a support integral.
pub const TAIL_TARGET: f64 = 1e-8;
/// Smallest horizon ever used for the infinite-time limits.
pub const MIN_HORIZON: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachOptions {
    /// Fixed horizon; `None` selects a certified horizon per block.
    pub horizon_t: Option<f64>,
    pub quad_tol: f64,
    /// Zero-real-part threshold; `None` uses the default.
    pub tol_re: Option<f64>,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self {
            horizon_t: None,
            quad_tol: 1e-8,
            tol_re: None,
        }
    }
}

impl ReachOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.horizon_t {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::InvalidSystem("horizon must be finite and positive".into()));
            }
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::InvalidSystem("quad_tol must be positive".into()));
        }
        Ok(())
    }
}

/// `∫₀^T h_U(B̂ᵀ e^{Mᵀs} d) ds`: the support of the time-`T` reachable set of
/// `ẋ = Mx + B̂u` from the origin, in direction `d` (any length).
pub fn support_integral(
    m: &DMatrix<f64>,
    bhat: &DMatrix<f64>,
    range: &ControlRange,
    t: f64,
    d: &DVector<f64>,
    quad_tol: f64,
) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidSystem("horizon must be finite and nonnegative".into()));
    }
    if t == 0.0 || d.iter().all(|v| *v == 0.0) || bhat.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let mt = m.transpose();
    let bt = bhat.transpose();
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let f = |s: f64| match matrix_exp(&mt, s) {
        Ok(e) => {
            let g = &bt * (e * d);
            range.support(g.as_slice())
        }
        Err(err) => {
            *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(err);
            f64::NAN
        }
    };
    let r = adaptive_simpson(f, 0.0, t, quad_tol);
    if let Some(err) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(err);
    }
    r
}

/// Support of the reachable set `𝐑_T(0)` of `sys` in direction `d`.
pub fn reach_support(sys: &LinearSystem, t: f64, d: &[f64]) -> Result<f64> {
    reach_support_with(sys, t, d, 1e-8)
}

pub fn reach_support_with(sys: &LinearSystem, t: f64, d: &[f64], quad_tol: f64) -> Result<f64> {
    if d.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.state_dim(),
            got: d.len(),
        });
    }
    support_integral(&sys.a, &sys.b, &sys.range, t, &DVector::from_row_slice(d), quad_tol)
}

/// A system induced on an invariant subspace, in coordinates of `basis`.
#[derive(Debug, Clone)]
pub struct InducedSystem {
    pub m: DMatrix<f64>,
    pub input: DMatrix<f64>,
    pub basis: DMatrix<f64>,
    /// Horizon used for the infinite-time limit.
    pub horizon: f64,
    /// Bound on the neglected tail of every unit-direction support integral.
    pub tail_bound: f64,
    /// `max_{u∈U} ‖u‖ · ‖B̂‖`.
    pub gain: f64,
    pub decay: Option<DecayBound>,
}

impl InducedSystem {
    fn new(m: DMatrix<f64>, input: DMatrix<f64>, basis: DMatrix<f64>, range: &ControlRange, opts: &ReachOptions) -> Result<Self> {
        let (horizon, tail_bound, decay) = certified_horizon(&m, &input, range, opts.horizon_t)?;
        let gain = range.max_norm() * spectral_norm(&input);
        Ok(Self {
            m,
            input,
            basis,
            horizon,
            tail_bound,
            gain,
            decay,
        })
    }

    /// Bound on `gain · ∫_t^∞ ‖e^{Ms}‖ ds`.
    pub fn tail_at(&self, t: f64) -> f64 {
        self.decay.map_or(0.0, |d| self.gain * d.tail_integral(t))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Support of the limit set in direction `d` (coordinates, any length).
    pub fn support(&self, range: &ControlRange, d: &DVector<f64>, quad_tol: f64) -> Result<f64> {
        support_integral(&self.m, &self.input, range, self.horizon, d, quad_tol)
    }
}

/// `(T*, tail)` for a stable `m`: the tail `h_U,max·‖B̂‖·∫_{T*}^∞ ‖e^{Ms}‖ds`
/// is bounded with the decay bound `‖e^{Ms}‖ ≤ c e^{-μs/2}`.
fn certified_horizon(
    m: &DMatrix<f64>,
    input: &DMatrix<f64>,
    range: &ControlRange,
    fixed: Option<f64>,
) -> Result<(f64, f64, Option<DecayBound>)> {
    if m.nrows() == 0 {
        return Ok((fixed.unwrap_or(MIN_HORIZON), 0.0, None));
    }
    let bound = decay_bound(m)?.ok_or(Error::NotHyperbolic)?;
    let gain = range.max_norm() * spectral_norm(input);
    let horizon = match fixed {
        Some(t) => t,
        None if gain == 0.0 => MIN_HORIZON,
        None => {
            let needed = (2.0 / bound.mu) * (2.0 * bound.c * gain / (bound.mu * TAIL_TARGET)).ln();
            needed.max(MIN_HORIZON)
        }
    };
    Ok((horizon, gain * bound.tail_integral(horizon), Some(bound)))
}

/// The stable block `(B⁻ᵀAB⁻, B⁻ᵀπ⁻B)`.
pub fn stable_subsystem(sys: &LinearSystem, split: &SpectralSplit, opts: &ReachOptions) -> Result<InducedSystem> {
    let v = &split.basis_minus;
    let m = induced_block(&sys.a, v);
    let input = v.transpose() * &split.proj_minus * &sys.b;
    InducedSystem::new(m, input, v.clone(), &sys.range, opts)
}

/// The time-reversed unstable block `(-B⁺ᵀAB⁺, -B⁺ᵀπ⁺B)`.
pub fn unstable_subsystem(sys: &LinearSystem, split: &SpectralSplit, opts: &ReachOptions) -> Result<InducedSystem> {
    let v = &split.basis_plus;
    let m = -induced_block(&sys.a, v);
    let input = -(v.transpose() * &split.proj_plus * &sys.b);
    InducedSystem::new(m, input, v.clone(), &sys.range, opts)
}

fn block_body(block: &InducedSystem, range: &ControlRange, quad_tol: f64) -> Result<ConvexBody> {
    if block.dim() == 0 {
        return Ok(ConvexBody::origin(0));
    }
    ConvexBody::sample(block.dim(), |d| {
        block.support(range, &DVector::from_row_slice(d), quad_tol)
    })
}

/// `D⁻`, the closure of `π⁻𝐑(0)`, in coordinates of `split.basis_minus`.
pub fn stable_reach_set(sys: &LinearSystem, split: &SpectralSplit) -> Result<ConvexBody> {
    let opts = ReachOptions::default();
    block_body(&stable_subsystem(sys, split, &opts)?, &sys.range, opts.quad_tol)
}

/// The closure of `D⁺ = π⁺𝐂(0)`, in coordinates of `split.basis_plus`.
pub fn unstable_ctrl_set(sys: &LinearSystem, split: &SpectralSplit) -> Result<ConvexBody> {
    let opts = ReachOptions::default();
    block_body(&unstable_subsystem(sys, split, &opts)?, &sys.range, opts.quad_tol)
}

/// Diagnostics attached to the assembled sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachMetadata {
    pub horizon_plus: f64,
    pub horizon_minus: f64,
    pub tail_bound_plus: f64,
    pub tail_bound_minus: f64,
    pub quad_tol: f64,
    /// `dim(L⁺∩𝒞) < dim L⁺`.
    pub plus_exceeds_controllable: bool,
    /// `dim(L⁻∩𝒞) < dim L⁻`.
    pub minus_exceeds_controllable: bool,
    pub dim_controllable: usize,
    pub dim_center_cap_controllable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSetResult {
    #[serde(rename = "D0_closure")]
    pub d0_closure: AffineSetSum,
    /// `D⁻` in coordinates of the `L⁻` basis.
    #[serde(rename = "D_minus")]
    pub d_minus: ConvexBody,
    /// Closure of `D⁺` in coordinates of the `L⁺` basis.
    #[serde(rename = "D_plus")]
    pub d_plus: ConvexBody,
    /// `n × s`, orthonormal columns spanning `L⁰∩𝒞`.
    #[serde(rename = "center_cap_C_basis")]
    pub center_cap_c_basis: Vec<Vec<f64>>,
    pub basis_plus: Vec<Vec<f64>>,
    pub basis_minus: Vec<Vec<f64>>,
    pub metadata: ReachMetadata,
}

/// Everything needed to assemble `D̄₀` and `E`.
pub struct Assembly {
    pub split: SpectralSplit,
    pub controllable: DMatrix<f64>,
    pub plus: InducedSystem,
    pub minus: InducedSystem,
    pub opts: ReachOptions,
    range: ControlRange,
}

impl Assembly {
    pub fn new(sys: &LinearSystem, opts: ReachOptions) -> Result<Self> {
        opts.validate()?;
        let split = lyapunov_split(&sys.a, opts.tol_re)?;
        let controllable = controllability_subspace(&sys.a, &sys.b)?;
        let plus = unstable_subsystem(sys, &split, &opts)?;
        let minus = stable_subsystem(sys, &split, &opts)?;
        Ok(Self {
            split,
            controllable,
            plus,
            minus,
            opts,
            range: sys.range.clone(),
        })
    }

    /// Support of the compact part `D⁺ ⊕ D⁻` (embedded) in ambient
    /// direction `v`.
    pub fn compact_support(&self, v: &DVector<f64>) -> Result<f64> {
        let q = self.opts.quad_tol;
        let mut h = 0.0;
        if self.plus.dim() > 0 {
            h += self.plus.support(&self.range, &(self.plus.basis.transpose() * v), q)?;
        }
        if self.minus.dim() > 0 {
            h += self.minus.support(&self.range, &(self.minus.basis.transpose() * v), q)?;
        }
        Ok(h)
    }

    pub fn center_cap_controllable(&self) -> DMatrix<f64> {
        let n = self.split.dim();
        if self.split.dim_zero() == 0 || self.controllable.ncols() == 0 {
            return DMatrix::zeros(n, 0);
        }
        intersection(&self.split.basis_zero, &self.controllable)
    }

    pub fn metadata(&self) -> ReachMetadata {
        let dim_cap = |basis: &DMatrix<f64>| {
            if basis.ncols() == 0 || self.controllable.ncols() == 0 {
                0
            } else {
                intersection(basis, &self.controllable).ncols()
            }
        };
        ReachMetadata {
            horizon_plus: self.plus.horizon,
            horizon_minus: self.minus.horizon,
            tail_bound_plus: self.plus.tail_bound,
            tail_bound_minus: self.minus.tail_bound,
            quad_tol: self.opts.quad_tol,
            plus_exceeds_controllable: dim_cap(&self.split.basis_plus) < self.split.dim_plus(),
            minus_exceeds_controllable: dim_cap(&self.split.basis_minus) < self.split.dim_minus(),
            dim_controllable: self.controllable.ncols(),
            dim_center_cap_controllable: self.center_cap_controllable().ncols(),
        }
    }

    pub fn d0_closure(&self) -> Result<AffineSetSum> {
        AffineSetSum::from_ambient_support(&self.center_cap_controllable(), |v| self.compact_support(v))
    }

    pub fn chain_control_set(&self) -> Result<AffineSetSum> {
        AffineSetSum::from_ambient_support(&self.split.basis_zero, |v| self.compact_support(v))
    }

    pub fn control_set(&self) -> Result<ControlSetResult> {
        let q = self.opts.quad_tol;
        let d_plus = block_body(&self.plus, &self.range, q)?
            .with_open_interior(self.plus.dim() > 0 && !self.metadata().plus_exceeds_controllable);
        let d_minus = block_body(&self.minus, &self.range, q)?;
        Ok(ControlSetResult {
            d0_closure: self.d0_closure()?,
            d_minus,
            d_plus,
            center_cap_c_basis: to_rows(&self.center_cap_controllable()),
            basis_plus: to_rows(&self.split.basis_plus),
            basis_minus: to_rows(&self.split.basis_minus),
            metadata: self.metadata(),
        })
    }
}

/// `D̄₀` with its factors.
pub fn control_set(sys: &LinearSystem) -> Result<ControlSetResult> {
    Assembly::new(sys, ReachOptions::default())?.control_set()
}

/// `E = D̄₀ + L⁰`, stored as `(D⁺ ⊕ D⁻) ⊕ L⁰`.
pub fn chain_control_set(sys: &LinearSystem) -> Result<AffineSetSum> {
    Assembly::new(sys, ReachOptions::default())?.chain_control_set()
}

/// The system induced on `L⁺ ⊕ L⁻` in coordinates of
/// `split.hyperbolic_basis()`: `Aʰ = V⁺AV`, `Bʰ = V⁺πʰB` with `V⁺` the
/// matching rows of `[B⁺ B⁰ B⁻]⁻¹`.
pub fn hyperbolic_subsystem(sys: &LinearSystem, split: &SpectralSplit) -> Result<(LinearSystem, DMatrix<f64>)> {
    let v = split.hyperbolic_basis();
    let k = v.ncols();
    if k == 0 {
        return Err(Error::NotHyperbolic);
    }
    let full = crate::linalg::hstack(&[&split.basis_plus, &split.basis_zero, &split.basis_minus]);
    let inv = full.try_inverse().ok_or(Error::SchurFailure)?;
    let (kp, kz) = (split.dim_plus(), split.dim_zero());
    let mut left = DMatrix::zeros(k, split.dim());
    left.rows_mut(0, kp).copy_from(&inv.rows(0, kp));
    left.rows_mut(kp, k - kp).copy_from(&inv.rows(kp + kz, k - kp));
    let a_h = &left * &sys.a * &v;
    let b_h = &left * &split.proj_h * &sys.b;
    Ok((LinearSystem::new(a_h, b_h, sys.range.clone())?, v))
}
