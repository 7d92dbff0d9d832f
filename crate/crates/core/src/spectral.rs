//! Real spectral analysis of `A`: Lyapunov spaces `L⁺, L⁰, L⁻`, the
//! projections along them, the matrix exponential, the controllability
//! subspace and exponential decay bounds.

use nalgebra::DMatrix;

use crate::linalg::{
    canonical_signs, column_space, hstack, is_finite, one_norm, spectral_norm,
};
use crate::schur::RealSchur;
use crate::{Error, Result};

/// Splitting of `ℝⁿ = L⁺ ⊕ L⁰ ⊕ L⁻` with the associated projections.
///
/// Bases are orthonormal within each block; the projections are along the
/// complementary Lyapunov spaces and are in general not orthogonal.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub basis_plus: DMatrix<f64>,
    pub basis_zero: DMatrix<f64>,
    pub basis_minus: DMatrix<f64>,
    pub proj_plus: DMatrix<f64>,
    pub proj_zero: DMatrix<f64>,
    pub proj_minus: DMatrix<f64>,
    /// `π⁺ + π⁻`, the projection onto the hyperbolic part along `L⁰`.
    pub proj_h: DMatrix<f64>,
    pub tol_re: f64,
    /// Eigenvalues `(re, im)` in Schur order.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Some eigenvalue has `|Re λ|` within `10·tol_re` of the threshold band.
    pub near_threshold: bool,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.proj_h.nrows()
    }
    pub fn dim_plus(&self) -> usize {
        self.basis_plus.ncols()
    }
    pub fn dim_zero(&self) -> usize {
        self.basis_zero.ncols()
    }
    pub fn dim_minus(&self) -> usize {
        self.basis_minus.ncols()
    }

    pub fn is_hyperbolic(&self) -> bool {
        is_hyperbolic(self)
    }

    /// `[basis_plus | basis_minus]`, a (non-orthogonal in general) basis of
    /// `L⁺ ⊕ L⁻`. Hyperbolic coordinates refer to this basis.
    pub fn hyperbolic_basis(&self) -> DMatrix<f64> {
        hstack(&[&self.basis_plus, &self.basis_minus])
    }
}

/// Default zero-real-part threshold `1e-9·(1 + ‖A‖_F)`.
pub fn default_tol_re(a: &DMatrix<f64>) -> f64 {
    1e-9 * (1.0 + a.norm())
}

/// Splits `ℝⁿ` into the Lyapunov spaces of `a`.
///
/// Eigenvalues with `Re λ > tol_re` feed `L⁺`, `|Re λ| ≤ tol_re` feed `L⁰`
/// and `Re λ < -tol_re` feed `L⁻`. Each block basis is the leading part of a
/// real Schur form reordered so that the block's eigenvalues come first.
pub fn lyapunov_split(a: &DMatrix<f64>, tol_re: Option<f64>) -> Result<SpectralSplit> {
    if !is_finite(a) {
        return Err(Error::NonFinite("A"));
    }
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidSystem("A must be square and nonempty".into()));
    }
    let tol = tol_re.unwrap_or_else(|| default_tol_re(a));
    let base = RealSchur::new(a)?;
    let eigenvalues = base.eigenvalues();
    let near_threshold = eigenvalues.iter().any(|&(re, _)| {
        let r = re.abs();
        r > tol && r <= 10.0 * tol || (r <= tol && r > 0.1 * tol)
    });
    if near_threshold {
        log::warn!(
            "eigenvalue real part within 10x of the zero threshold {tol:e}; assignment to L0 may be fragile"
        );
    }

    let leading = |select: &dyn Fn(f64) -> bool| -> Result<DMatrix<f64>> {
        let mut s = base.clone();
        let k = s.reorder_front(select)?;
        Ok(canonical_signs(s.q.columns(0, k).into_owned()))
    };
    let basis_plus = leading(&|re| re > tol)?;
    let basis_zero = leading(&|re| re.abs() <= tol)?;
    let basis_minus = leading(&|re| re < -tol)?;

    let (kp, kz, km) = (basis_plus.ncols(), basis_zero.ncols(), basis_minus.ncols());
    if kp + kz + km != n {
        return Err(Error::SchurFailure);
    }
    let v = hstack(&[&basis_plus, &basis_zero, &basis_minus]);
    let v_inv = v.clone().try_inverse().ok_or(Error::SchurFailure)?;
    let block_proj = |off: usize, k: usize| -> DMatrix<f64> {
        if k == 0 {
            return DMatrix::zeros(n, n);
        }
        v.columns(off, k) * v_inv.rows(off, k)
    };
    let proj_plus = block_proj(0, kp);
    let proj_zero = block_proj(kp, kz);
    let proj_minus = block_proj(kp + kz, km);
    let proj_h = &proj_plus + &proj_minus;
    Ok(SpectralSplit {
        basis_plus,
        basis_zero,
        basis_minus,
        proj_plus,
        proj_zero,
        proj_minus,
        proj_h,
        tol_re: tol,
        eigenvalues,
        near_threshold,
    })
}

/// `true` iff `L⁰ = {0}`.
pub fn is_hyperbolic(split: &SpectralSplit) -> bool {
    split.dim_zero() == 0
}

/// Orthonormal basis of `Im[B AB ⋯ A^{n-1}B]`.
pub fn controllability_subspace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_finite(a) || !is_finite(b) {
        return Err(Error::NonFinite("A or B"));
    }
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    let mut kalman = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        kalman.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    if !is_finite(&kalman) {
        return Err(Error::NonFinite("Kalman matrix"));
    }
    Ok(column_space(&kalman))
}

// Padé coefficients for degrees 3, 5, 7, 9, 13 and the matching 1-norm
// thresholds for double precision scaling and squaring.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut u = DMatrix::identity(n, n) * b[1];
    let mut v = DMatrix::identity(n, n) * b[0];
    let mut p = DMatrix::identity(n, n);
    for k in 1..b.len() / 2 {
        p = &p * &a2;
        u += &p * b[2 * k + 1];
        v += &p * b[2 * k];
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    (u, v)
}

/// `e^{At}` by scaling and squaring with a diagonal Padé approximant.
pub fn matrix_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !is_finite(a) || !t.is_finite() {
        return Err(Error::NonFinite("matrix_exp input"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let at = a * t;
    let norm = one_norm(&at);
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let solve = |u: DMatrix<f64>, v: DMatrix<f64>| -> Result<DMatrix<f64>> {
        let p = &v + &u;
        let q = v - u;
        q.lu()
            .solve(&p)
            .ok_or(Error::NonFinite("Padé denominator is singular"))
    };
    for (m, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(&at, coeffs);
            let r = solve(u, v)?;
            return if is_finite(&r) {
                Ok(r)
            } else {
                Err(Error::NonFinite("matrix_exp"))
            };
        }
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    if s > 1100 {
        return Err(Error::NonFinite("matrix_exp overflow"));
    }
    let scaled = at / 2f64.powi(s);
    let (u, v) = pade13(&scaled);
    let mut r = solve(u, v)?;
    for _ in 0..s {
        r = &r * &r;
        if !is_finite(&r) {
            return Err(Error::NonFinite("matrix_exp overflow"));
        }
    }
    if is_finite(&r) {
        Ok(r)
    } else {
        Err(Error::NonFinite("matrix_exp overflow"))
    }
}

/// Restriction `Vᵀ A V` of `a` to the invariant subspace with orthonormal
/// basis `v`.
pub fn induced_block(a: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    v.transpose() * a * v
}

/// Certified exponential decay `‖e^{Mt}‖ ≤ c·e^{-μt/2}` for a matrix whose
/// spectrum lies in the open left half-plane, with `μ = -max Re λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub c: f64,
    pub mu: f64,
}

impl DecayBound {
    /// Bound on `∫_T^∞ ‖e^{Ms}‖ ds`.
    pub fn tail_integral(&self, t: f64) -> f64 {
        2.0 * self.c / self.mu * (-0.5 * self.mu * t).exp()
    }

    /// Bound on `‖e^{Mt}‖`.
    pub fn at(&self, t: f64) -> f64 {
        self.c * (-0.5 * self.mu * t).exp()
    }
}

/// Computes a [`DecayBound`] for `m`, or `None` when `m` is not stable.
///
/// `c` is the maximum of `‖e^{Mt}‖_F e^{μt/2}` over a uniform grid in `t`,
/// inflated by `e^{(‖M‖+μ/2)δ}` to cover the gaps between grid points.
pub fn decay_bound(m: &DMatrix<f64>) -> Result<Option<DecayBound>> {
    let k = m.nrows();
    if k == 0 {
        return Ok(Some(DecayBound { c: 0.0, mu: 1.0 }));
    }
    let eigs = RealSchur::new(m)?.eigenvalues();
    let abscissa = eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= 0.0 {
        return Ok(None);
    }
    let mu = -abscissa;
    let norm = spectral_norm(m);
    let delta = (0.05 / norm.max(mu)).min(0.05 / mu);
    let step = matrix_exp(m, delta)?;
    let mut e = DMatrix::identity(k, k);
    let mut cmax: f64 = 1.0f64.max(e.norm());
    let t_max = 400.0 / mu;
    let max_steps = ((t_max / delta).ceil() as usize).min(200_000);
    for i in 1..=max_steps {
        e = &e * &step;
        let t = i as f64 * delta;
        let f = e.norm() * (0.5 * mu * t).exp();
        if !f.is_finite() {
            break;
        }
        cmax = cmax.max(f);
        if f < 1e-3 * cmax && t * mu > 20.0 {
            break;
        }
    }
    let c = cmax * ((norm + 0.5 * mu) * delta).exp();
    Ok(Some(DecayBound { c, mu }))
}
