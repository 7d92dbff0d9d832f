//! Projective Poincaré-sphere picture of the chain control set.
//!
//! `ℝⁿ` sits in `ℙⁿ` as the open hemisphere `x ↦ ℙ(x, 1)`; the equator
//! `ℙ^{n,0}` collects the directions at infinity. For the hyperbolic part
//! every control `u` has a unique bounded solution `e(u, ·)`, and the
//! projective chain control set is the closure of `ℙ(-e(u,0) + L⁰, 1)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::PCWControl;
use crate::convex::AffineSetSum;
use crate::linalg::to_rows;
use crate::reachsets::{stable_subsystem, unstable_subsystem, Assembly, InducedSystem, ReachOptions};
use crate::spectral::{lyapunov_split, matrix_exp, SpectralSplit};
use crate::system::LinearSystem;
use crate::{Error, Result};

/// Representatives closer than this (up to sign) denote the same point.
pub const POINT_EQ_TOL: f64 = 1e-12;
/// Largest tolerated truncation error of the bounded solution.
pub const WINDOW_ERROR_LIMIT: f64 = 1e-6;
/// Membership slack for preimages of cloud points.
pub const CLOUD_SLACK: f64 = 1e-6;

/// A point of projective space, stored as a unit representative.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjPoint {
    rep: Vec<f64>,
}

impl ProjPoint {
    /// `ℙ(v)`; `None` for the zero vector or non-finite input.
    pub fn new(v: &[f64]) -> Option<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(Self {
            rep: v.iter().map(|x| x / n).collect(),
        })
    }

    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    /// Dimension of the representing vector space, `n + 1` for `ℙⁿ`.
    pub fn dim(&self) -> usize {
        self.rep.len()
    }
}

impl PartialEq for ProjPoint {
    fn eq(&self, other: &Self) -> bool {
        self.rep.len() == other.rep.len() && proj_distance(self, other) <= POINT_EQ_TOL
    }
}

/// `min(‖p - q‖, ‖p + q‖)` on unit representatives.
pub fn proj_distance(p: &ProjPoint, q: &ProjPoint) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in p.rep.iter().zip(&q.rep) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    minus.sqrt().min(plus.sqrt())
}

/// `ℙ(x, 1)`.
pub fn lift_h1(x: &[f64]) -> ProjPoint {
    let mut v = x.to_vec();
    v.push(1.0);
    ProjPoint::new(&v).unwrap_or(ProjPoint { rep: v })
}

/// Distance from `p` to the equator `{ℙ(y, 0)}`: `√(2 - 2‖y‖)` for the unit
/// representative `(y, z)`.
pub fn distance_to_equator(p: &ProjPoint) -> f64 {
    let n = p.rep.len() - 1;
    let y = p.rep[..n].iter().map(|x| x * x).sum::<f64>().sqrt().min(1.0);
    (2.0 - 2.0 * y).max(0.0).sqrt()
}

/// Inverse of [`lift_h1`] away from the equator.
pub fn unlift(p: &ProjPoint) -> Option<Vec<f64>> {
    let n = p.rep.len() - 1;
    let z = p.rep[n];
    if z.abs() < 1e-300 {
        return None;
    }
    Some(p.rep[..n].iter().map(|x| x / z).collect())
}

/// `e(u, 0)` with its truncation error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedSolution {
    /// Coordinates in the basis `[basis_plus | basis_minus]`.
    pub hyperbolic: Vec<f64>,
    /// The same point in `ℝⁿ`.
    pub ambient: Vec<f64>,
    pub window: f64,
    pub error_estimate: f64,
}

/// `∫ e^{-Ms} B̂u(s) ds` over consecutive constant pieces; infinite
/// endpoints contribute nothing because `e^{-Ms}` vanishes there for the
/// sign of `M` in use.
fn piecewise_integral(
    m: &DMatrix<f64>,
    input: &DMatrix<f64>,
    pieces: &[(f64, f64, Vec<f64>)],
) -> Result<DVector<f64>> {
    let k = m.nrows();
    let lu = m.clone().lu();
    let mut acc = DVector::zeros(k);
    let kernel = |s: f64| -> Result<DMatrix<f64>> {
        if s.is_infinite() {
            Ok(DMatrix::zeros(k, k))
        } else {
            matrix_exp(m, -s)
        }
    };
    for (lo, hi, val) in pieces {
        let c = input * DVector::from_row_slice(val);
        let diff = kernel(*lo)? - kernel(*hi)?;
        let term = lu.solve(&(diff * c)).ok_or(Error::NotHyperbolic)?;
        acc += term;
    }
    Ok(acc)
}

/// Constant pieces of `u` on `[lo, hi]`, with `u` frozen to its values at
/// `±window` outside `[-window, window]`.
fn windowed_pieces(u: &PCWControl, lo: f64, hi: f64, window: f64) -> Vec<(f64, f64, Vec<f64>)> {
    let clamp = |t: f64| t.clamp(-window, window);
    let mut cuts = vec![lo];
    cuts.extend(
        u.breakpoints
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi && b.abs() < window),
    );
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| {
            let mid = if w[0].is_infinite() {
                clamp(w[1] - 1.0)
            } else if w[1].is_infinite() {
                clamp(w[0] + 1.0)
            } else {
                clamp(0.5 * (w[0] + w[1]))
            };
            (w[0], w[1], u.at(mid).to_vec())
        })
        .collect()
}

/// Default window: the larger of the certified horizons of the two blocks.
fn default_window(plus: &InducedSystem, minus: &InducedSystem) -> f64 {
    plus.horizon.max(minus.horizon)
}

fn blocks(sys: &LinearSystem, split: &SpectralSplit) -> Result<(InducedSystem, InducedSystem)> {
    let opts = ReachOptions::default();
    Ok((unstable_subsystem(sys, split, &opts)?, stable_subsystem(sys, split, &opts)?))
}

/// `e(u, 0)` for the system induced on `L⁺ ⊕ L⁻`:
/// `∫_{-∞}^0 e^{-M⁻s} B̂⁻u(s) ds` on `L⁻` and `-∫_0^∞ e^{-M⁺s} B̂⁺u(s) ds` on
/// `L⁺`, integrated exactly piece by piece. Outside `[-window, window]` the
/// control is frozen; the induced error is bounded by the decay constants
/// and must stay below [`WINDOW_ERROR_LIMIT`].
pub fn bounded_solution_e0(
    sys: &LinearSystem,
    split: &SpectralSplit,
    u: &PCWControl,
    window_t: Option<f64>,
) -> Result<BoundedSolution> {
    u.validate_in(&sys.range)?;
    let (plus, minus) = blocks(sys, split)?;
    let window = window_t.unwrap_or_else(|| default_window(&plus, &minus));
    if !(window > 0.0) {
        return Err(Error::WindowTooSmall(f64::INFINITY));
    }
    let outside = u.breakpoints.iter().any(|b| b.abs() >= window);
    let diameter_factor = 2.0;
    let error_estimate = if outside {
        diameter_factor * (plus.tail_at(window) + minus.tail_at(window))
    } else {
        0.0
    };
    if error_estimate > WINDOW_ERROR_LIMIT {
        return Err(Error::WindowTooSmall(error_estimate));
    }

    let mut hyperbolic = Vec::with_capacity(plus.dim() + minus.dim());
    let mut ambient = DVector::zeros(sys.state_dim());
    if plus.dim() > 0 {
        // plus.m = -M⁺ and plus.input = -B̂⁺ (time-reversed block)
        let m = -&plus.m;
        let input = -&plus.input;
        let pieces = windowed_pieces(u, 0.0, f64::INFINITY, window);
        let z = -piecewise_integral(&m, &input, &pieces)?;
        ambient += &plus.basis * &z;
        hyperbolic.extend(z.iter());
    }
    if minus.dim() > 0 {
        let pieces = windowed_pieces(u, f64::NEG_INFINITY, 0.0, window);
        let y = piecewise_integral(&minus.m, &minus.input, &pieces)?;
        ambient += &minus.basis * &y;
        hyperbolic.extend(y.iter());
    }
    if !ambient.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("bounded solution"));
    }
    Ok(BoundedSolution {
        hyperbolic,
        ambient: ambient.as_slice().to_vec(),
        window,
        error_estimate,
    })
}

/// `e(u, t) = e(u(t + ·), 0)`.
pub fn bounded_solution_at(
    sys: &LinearSystem,
    split: &SpectralSplit,
    u: &PCWControl,
    t: f64,
    window_t: Option<f64>,
) -> Result<BoundedSolution> {
    bounded_solution_e0(sys, split, &u.shift(t), window_t)
}

/// Fiber of the central Selgrade bundle over `u`:
/// `span{(-e(u,0), 1)} ⊕ (L⁰ × {0})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralFiber {
    pub u: PCWControl,
    /// `e(u, 0)` in hyperbolic coordinates.
    pub e0: Vec<f64>,
    /// `e(u, 0)` in `ℝⁿ`.
    pub e0_ambient: Vec<f64>,
    /// `n × dim L⁰`.
    pub center_basis: Vec<Vec<f64>>,
    /// `(n+1) × (1 + dim L⁰)`; first column `(-e(u,0), 1)`.
    pub fiber_basis: Vec<Vec<f64>>,
}

impl CentralFiber {
    pub fn dim(&self) -> usize {
        self.fiber_basis.first().map_or(0, Vec::len)
    }
}

pub fn central_fiber(sys: &LinearSystem, split: &SpectralSplit, u: &PCWControl) -> Result<CentralFiber> {
    let e = bounded_solution_e0(sys, split, u, None)?;
    let n = sys.state_dim();
    let k0 = split.dim_zero();
    let mut basis = DMatrix::zeros(n + 1, 1 + k0);
    for i in 0..n {
        basis[(i, 0)] = -e.ambient[i];
    }
    basis[(n, 0)] = 1.0;
    basis.view_mut((0, 1), (n, k0)).copy_from(&split.basis_zero);
    Ok(CentralFiber {
        u: u.clone(),
        e0: e.hyperbolic,
        e0_ambient: e.ambient,
        center_basis: to_rows(&split.basis_zero),
        fiber_basis: to_rows(&basis),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudOptions {
    /// Number of controls.
    pub samples: usize,
    /// Radius of the ball of center offsets, in `L⁰` coordinates.
    pub r_plot: f64,
    /// Grid points per `L⁰` axis before restricting to the ball.
    pub offsets_per_axis: usize,
    /// Most switches of a random control.
    pub max_switches: usize,
    /// Switching times are drawn from `[-switch_span, switch_span]`.
    pub switch_span: f64,
    pub seed: u64,
}

impl Default for CloudOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            r_plot: 2.0,
            offsets_per_axis: 5,
            max_switches: 4,
            switch_span: 3.0,
            seed: 0,
        }
    }
}

/// `ℙ(E × {1})`: the set `E` together with a deterministic point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveChainSet {
    pub chain_control_set: AffineSetSum,
    pub points: Vec<ProjPoint>,
    /// `-e(u,0) + z` for every point, in `ℝⁿ`.
    pub preimages: Vec<Vec<f64>>,
    pub controls: Vec<PCWControl>,
    pub fiber_dim: usize,
    /// Largest support excess of a preimage over `E` (≤ slack).
    pub max_membership_excess: f64,
}

/// The deterministic control family: `u ≡ 0`, the constant vertex controls,
/// then seeded random vertex-valued piecewise-constant controls.
pub fn cloud_controls(sys: &LinearSystem, opts: &CloudOptions) -> Vec<PCWControl> {
    let verts = sys.range.vertices();
    let mut out = vec![PCWControl::constant(vec![0.0; sys.control_dim()])];
    out.extend(verts.iter().cloned().map(PCWControl::constant));
    out.truncate(opts.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while out.len() < opts.samples {
        let k = rng.random_range(1..=opts.max_switches.max(1));
        let mut times: Vec<f64> = (0..k)
            .map(|_| rng.random_range(-opts.switch_span..=opts.switch_span))
            .collect();
        times.sort_by(|a, b| a.total_cmp(b));
        times.dedup();
        let values: Vec<Vec<f64>> = (0..=times.len())
            .map(|_| verts[rng.random_range(0..verts.len())].clone())
            .collect();
        if let Ok(u) = PCWControl::new(times, values) {
            out.push(u);
        }
    }
    out
}

/// Grid on the ball of radius `r` in `ℝᵏ`, `per_axis` points per axis.
pub fn center_offsets(k: usize, r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let per_axis = per_axis.max(1);
    let coord = |i: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -r + 2.0 * r * i as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(k as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; k];
            for c in p.iter_mut().rev() {
                *c = coord(idx % per_axis);
                idx /= per_axis;
            }
            p
        })
        .filter(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt() <= r * (1.0 + 1e-12))
        .collect()
}

fn support_excess(e: &AffineSetSum, x: &[f64]) -> f64 {
    let w = e.residual_coords(x);
    e.compact
        .directions
        .iter()
        .zip(&e.compact.support_values)
        .map(|(d, h)| d.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - h)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `ℙ(E × {1})` with a cloud of points `ℙ(-e(u,0) + z, 1)`.
///
/// Every preimage is tested for membership in `E` with slack
/// [`CLOUD_SLACK`]; a failure is an error, not a silently dropped point.
/// Identical preimages are emitted once.
pub fn projective_chain_control_set(sys: &LinearSystem, opts: &CloudOptions) -> Result<ProjectiveChainSet> {
    let assembly = Assembly::new(sys, ReachOptions::default())?;
    let e = assembly.chain_control_set()?;
    let split = lyapunov_split(&sys.a, None)?;
    let controls = cloud_controls(sys, opts);
    let offsets = center_offsets(split.dim_zero(), opts.r_plot, opts.offsets_per_axis);
    let center = &split.basis_zero;

    let per_control = controls
        .par_iter()
        .map(|u| {
            let sol = bounded_solution_e0(sys, &split, u, None)?;
            let base = DVector::from_vec(sol.ambient).map(|v| -v);
            Ok(offsets
                .iter()
                .map(|z| (base.clone() + center * DVector::from_row_slice(z)).as_slice().to_vec())
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;

    let mut preimages: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut excess = f64::NEG_INFINITY;
    for p in per_control.into_iter().flatten() {
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        if !seen.insert(key) {
            continue;
        }
        let ex = support_excess(&e, &p);
        if ex > CLOUD_SLACK {
            return Err(Error::MembershipViolation {
                index: preimages.len(),
            });
        }
        excess = excess.max(ex);
        preimages.push(p);
    }
    let points = preimages.iter().map(|p| lift_h1(p)).collect();
    Ok(ProjectiveChainSet {
        chain_control_set: e,
        points,
        preimages,
        controls,
        fiber_dim: 1 + split.dim_zero(),
        max_membership_excess: excess.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ControlRange;

    fn saddle() -> LinearSystem {
        LinearSystem::from_rows(
            &[vec![1.0, 0.0], vec![0.0, -1.0]],
            &[vec![1.0], vec![1.0]],
            ControlRange::symmetric_box(1, 1.0),
        )
        .unwrap()
    }

    fn center_stable() -> LinearSystem {
        LinearSystem::from_rows(
            &[vec![0.0, 0.0], vec![0.0, -1.0]],
            &[vec![0.0], vec![1.0]],
            ControlRange::symmetric_box(1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        let e1 = ProjPoint::new(&[1.0, 0.0]).unwrap();
        let m1 = ProjPoint::new(&[-1.0, 0.0]).unwrap();
        let e2 = ProjPoint::new(&[0.0, 1.0]).unwrap();
        assert_eq!(proj_distance(&e1, &e1), 0.0);
        assert_eq!(proj_distance(&e1, &m1), 0.0);
        assert!((proj_distance(&e1, &e2) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e1, m1);
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_h1(&[0.0, 0.0]).rep(), &[0.0, 0.0, 1.0]);
        let p = lift_h1(&[1.0]);
        let s = 1.0 / 2f64.sqrt();
        assert!((p.rep()[0] - s).abs() < 1e-15 && (p.rep()[1] - s).abs() < 1e-15);
        let eq = ProjPoint::new(&[1.0, 0.0]).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let d = proj_distance(&lift_h1(&[10f64.powi(k)]), &eq);
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-6);
        assert!((distance_to_equator(&lift_h1(&[1e7])) - last).abs() < 1e-9);
        assert!((distance_to_equator(&lift_h1(&[0.0])) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bounded_solution_saddle() {
        let sys = saddle();
        let split = lyapunov_split(&sys.a, None).unwrap();
        let e = bounded_solution_e0(&sys, &split, &PCWControl::constant(vec![1.0]), None).unwrap();
        assert!((e.ambient[0] + 1.0).abs() < 1e-12);
        assert!((e.ambient[1] - 1.0).abs() < 1e-12);
        assert_eq!(e.error_estimate, 0.0);
        let z = bounded_solution_e0(&sys, &split, &PCWControl::constant(vec![0.0]), None).unwrap();
        assert!(z.ambient.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bounded_solution_scalar() {
        let sys = LinearSystem::from_rows(&[vec![-1.0]], &[vec![1.0]], ControlRange::symmetric_box(1, 1.0)).unwrap();
        let split = lyapunov_split(&sys.a, None).unwrap();
        let e = bounded_solution_e0(&sys, &split, &PCWControl::constant(vec![1.0]), None).unwrap();
        assert!((e.ambient[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn switching_control_closed_form() {
        // ẏ = -y + u with u = -1 on (-∞, -1), +1 afterwards:
        // y(0) = ∫_{-∞}^{-1} -e^s ds + ∫_{-1}^0 e^s ds = 1 - 2/e
        let sys = LinearSystem::from_rows(&[vec![-1.0]], &[vec![1.0]], ControlRange::symmetric_box(1, 1.0)).unwrap();
        let split = lyapunov_split(&sys.a, None).unwrap();
        let u = PCWControl::new(vec![-1.0], vec![vec![-1.0], vec![1.0]]).unwrap();
        let e = bounded_solution_e0(&sys, &split, &u, None).unwrap();
        let exact = 1.0 - 2.0 / std::f64::consts::E;
        assert!((e.ambient[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn window_too_small_is_reported() {
        let sys = saddle();
        let split = lyapunov_split(&sys.a, None).unwrap();
        let u = PCWControl::new(vec![-5.0], vec![vec![-1.0], vec![1.0]]).unwrap();
        assert!(matches!(
            bounded_solution_e0(&sys, &split, &u, Some(1.0)),
            Err(Error::WindowTooSmall(_))
        ));
        assert!(bounded_solution_e0(&sys, &split, &u, Some(6.0)).is_ok());
    }

    #[test]
    fn fiber_dimensions() {
        let sys = center_stable();
        let split = lyapunov_split(&sys.a, None).unwrap();
        let f = central_fiber(&sys, &split, &PCWControl::constant(vec![0.5])).unwrap();
        assert_eq!(f.dim(), 2);
        // (-e0, 1) = (0, -0.5, 1)
        assert!((f.fiber_basis[1][0] + 0.5).abs() < 1e-12);
        assert_eq!(f.fiber_basis[2][0], 1.0);
        let sys2 = saddle();
        let split2 = lyapunov_split(&sys2.a, None).unwrap();
        assert_eq!(central_fiber(&sys2, &split2, &PCWControl::constant(vec![1.0])).unwrap().dim(), 1);
    }

    #[test]
    fn cloud_zero_input_is_north_pole() {
        let sys = LinearSystem::from_rows(
            &[vec![1.0, 0.0], vec![0.0, -1.0]],
            &[vec![0.0], vec![0.0]],
            ControlRange::symmetric_box(1, 1.0),
        )
        .unwrap();
        let c = projective_chain_control_set(&sys, &CloudOptions::default()).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].rep(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn cloud_saddle_contains_corner() {
        let sys = saddle();
        let c = projective_chain_control_set(&sys, &CloudOptions { samples: 16, ..Default::default() }).unwrap();
        let corner = ProjPoint::new(&[1.0, -1.0, 1.0]).unwrap();
        assert!(c.points.iter().any(|p| proj_distance(p, &corner) < 1e-10));
        assert!(c.points.iter().all(|p| distance_to_equator(p) >= 0.2));
    }

    #[test]
    fn offsets_grid() {
        assert_eq!(center_offsets(0, 2.0, 5), vec![Vec::<f64>::new()]);
        assert_eq!(center_offsets(1, 2.0, 5).len(), 5);
        // lattice points of {-2..2}² with norm ≤ 2
        assert_eq!(center_offsets(2, 2.0, 5).len(), 13);
    }
}
