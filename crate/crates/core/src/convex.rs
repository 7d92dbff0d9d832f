//! Finitely encoded compact convex sets.
//!
//! A [`ConvexBody`] carries its support function sampled on a fixed direction
//! set. In dimension ≤ 2 a vertex list is maintained as well: for sampled
//! bodies it is the outer polygon `{x : ⟨x, dᵢ⟩ ≤ h(dᵢ)}`, which touches every
//! sampled half-plane when the samples come from a convex set.
//! [`AffineSetSum`] encodes `K ⊕ S` for a compact `K` and a subspace `S`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{from_rows, orthogonal_complement, to_rows};
use crate::{Error, Result};

/// Number of uniformly spaced directions used for planar bodies.
pub const PLANAR_DIRECTIONS: usize = 128;
/// Directions per dimension for bodies in dimension > 2.
pub const DIRECTIONS_PER_DIM: usize = 64;

/// Sampled widths at or below this value switch planar vertex maintenance to
/// segment/point handling.
pub const DEGENERATE_WIDTH: f64 = 1e-10;

const DIRECTION_MATCH: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic direction set for a body of dimension `dim`.
///
/// * `0`: no directions.
/// * `1`: `±1`.
/// * `2`: [`PLANAR_DIRECTIONS`] equally spaced angles starting at `e₁`.
/// * `k > 2`: the `2k` coordinate directions followed by antipodal pairs of
///   Halton points pushed through Box–Muller onto the sphere, `64·k` total.
pub fn default_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..PLANAR_DIRECTIONS)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / PLANAR_DIRECTIONS as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        k => {
            let total = DIRECTIONS_PER_DIM * k;
            let mut out = Vec::with_capacity(total);
            for i in 0..k {
                let mut e = vec![0.0; k];
                e[i] = 1.0;
                out.push(e.clone());
                e[i] = -1.0;
                out.push(e);
            }
            let pairs = k.div_ceil(2);
            let mut idx = 1usize;
            while out.len() < total {
                let mut g = Vec::with_capacity(2 * pairs);
                for p in 0..pairs {
                    let u1 = radical_inverse(idx, PRIMES[(2 * p) % PRIMES.len()]);
                    let u2 = radical_inverse(idx, PRIMES[(2 * p + 1) % PRIMES.len()]);
                    let r = (-2.0 * u1.max(1e-300).ln()).sqrt();
                    let th = 2.0 * std::f64::consts::PI * u2;
                    g.push(r * th.cos());
                    g.push(r * th.sin());
                }
                g.truncate(k);
                idx += 1;
                let n = norm(&g);
                if n < 1e-9 {
                    continue;
                }
                let d: Vec<f64> = g.iter().map(|x| x / n).collect();
                let neg: Vec<f64> = d.iter().map(|x| -x).collect();
                out.push(d);
                if out.len() < total {
                    out.push(neg);
                }
            }
            out
        }
    }
}

/// Convex hull of planar points in counter-clockwise order without collinear
/// points. Degenerate inputs yield one or two points.
pub fn convex_hull_2d(points: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let scale = pts
        .iter()
        .fold(1.0f64, |m, p| m.max(p.0.abs()).max(p.1.abs()));
    let eps = tol * scale;
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= eps && (a.1 - b.1).abs() <= eps);
    if pts.len() <= 1 {
        return pts.iter().map(|p| vec![p.0, p.1]).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let area_eps = eps * scale;
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= area_eps {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= area_eps
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() == 2 {
        let d = (hull[0].0 - hull[1].0).hypot(hull[0].1 - hull[1].1);
        if d <= eps {
            hull.pop();
        }
    }
    hull.into_iter().map(|p| vec![p.0, p.1]).collect()
}

/// Euclidean distance from `x` to the convex polygon `poly` (CCW, possibly a
/// segment or a point).
pub fn point_polygon_distance(x: &[f64], poly: &[Vec<f64>]) -> f64 {
    let seg_dist = |a: &[f64], b: &[f64]| {
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let l2 = ex * ex + ey * ey;
        let t = if l2 == 0.0 {
            0.0
        } else {
            (((x[0] - a[0]) * ex + (x[1] - a[1]) * ey) / l2).clamp(0.0, 1.0)
        };
        (x[0] - a[0] - t * ex).hypot(x[1] - a[1] - t * ey)
    };
    match poly.len() {
        0 => f64::INFINITY,
        1 => (x[0] - poly[0][0]).hypot(x[1] - poly[0][1]),
        2 => seg_dist(&poly[0], &poly[1]),
        n => {
            let inside = (0..n).all(|i| {
                let a = &poly[i];
                let b = &poly[(i + 1) % n];
                (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= 0.0
            });
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| seg_dist(&poly[i], &poly[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Clips a planar polygon against `⟨x, d⟩ ≤ h + tol`.
fn clip(poly: &[(f64, f64)], d: &[f64], h: f64, tol: f64) -> Vec<(f64, f64)> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    let side = |p: (f64, f64)| p.0 * d[0] + p.1 * d[1] - h;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (sa, sb) = (side(a), side(b));
        let (ina, inb) = (sa <= tol, sb <= tol);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = sa / (sa - sb);
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}

/// Compact convex set with sampled support function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    pub ambient_dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub support_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    /// Metadata only: the encoded closure comes from a set known to be open
    /// relative to its affine hull.
    #[serde(default)]
    pub open_interior: bool,
}

impl ConvexBody {
    /// The single point `{0} ⊂ ℝ^dim`.
    pub fn origin(dim: usize) -> Self {
        let directions = default_directions(dim);
        let support_values = vec![0.0; directions.len()];
        Self {
            ambient_dim: dim,
            directions,
            support_values,
            vertices: Some(vec![vec![0.0; dim]]),
            open_interior: false,
        }
    }

    /// Body with support values `h(dᵢ)`; vertices are derived in dim ≤ 2.
    pub fn from_support(
        dim: usize,
        directions: Vec<Vec<f64>>,
        support_values: Vec<f64>,
    ) -> Result<Self> {
        if directions.len() != support_values.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                got: support_values.len(),
            });
        }
        if let Some(d) = directions.iter().find(|d| d.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.len(),
            });
        }
        if support_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("support values"));
        }
        let mut body = Self {
            ambient_dim: dim,
            directions,
            support_values,
            vertices: None,
            open_interior: false,
        };
        body.vertices = body.outer_vertices();
        Ok(body)
    }

    /// Samples `h` on the default direction set (in parallel; the result is
    /// independent of scheduling).
    pub fn sample<F>(dim: usize, h: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let directions = default_directions(dim);
        let values = directions
            .par_iter()
            .map(|d| h(d))
            .collect::<Result<Vec<f64>>>()?;
        Self::from_support(dim, directions, values)
    }

    /// Convex hull of `points`, sampled on `directions` (default set when
    /// `None`).
    pub fn from_points(
        dim: usize,
        points: &[Vec<f64>],
        directions: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSystem("empty point set".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        let directions = directions.unwrap_or_else(|| default_directions(dim));
        let support_values = directions
            .iter()
            .map(|d| {
                points
                    .iter()
                    .map(|p| dot(p, d))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let vertices = match dim {
            0 => vec![Vec::new()],
            1 => interval_vertices(
                points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
                points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
            ),
            2 => convex_hull_2d(points, 1e-12),
            _ => points.to_vec(),
        };
        Ok(Self {
            ambient_dim: dim,
            directions,
            support_values,
            vertices: Some(vertices),
            open_interior: false,
        })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        let corners: Vec<Vec<f64>> = (0..1usize << dim)
            .map(|mask| {
                (0..dim)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect()
            })
            .collect();
        Self::from_points(dim, &corners, None)
    }

    pub fn with_open_interior(mut self, open: bool) -> Self {
        self.open_interior = open;
        self
    }

    fn direction_index(&self, u: &[f64]) -> Option<usize> {
        self.directions
            .iter()
            .position(|d| d.iter().zip(u).all(|(a, b)| (a - b).abs() <= DIRECTION_MATCH))
    }

    fn antipode(&self, i: usize) -> Option<usize> {
        let neg: Vec<f64> = self.directions[i].iter().map(|x| -x).collect();
        self.direction_index(&neg)
    }

    /// Outer polyhedral vertices from the samples (dim ≤ 2 only).
    fn outer_vertices(&self) -> Option<Vec<Vec<f64>>> {
        match self.ambient_dim {
            0 => Some(vec![Vec::new()]),
            1 => {
                let hi = self.direction_index(&[1.0]).map(|i| self.support_values[i])?;
                let lo = self.direction_index(&[-1.0]).map(|i| -self.support_values[i])?;
                if lo > hi + DEGENERATE_WIDTH {
                    return None;
                }
                Some(interval_vertices(lo, hi))
            }
            2 => self.outer_polygon(),
            _ => None,
        }
    }

    fn outer_polygon(&self) -> Option<Vec<Vec<f64>>> {
        let h = &self.support_values;
        let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Degenerate direction: smallest sampled width.
        let mut min_width = f64::INFINITY;
        let mut min_dir = None;
        for i in 0..self.directions.len() {
            if let Some(j) = self.antipode(i) {
                let w = h[i] + h[j];
                if w < min_width {
                    min_width = w;
                    min_dir = Some((i, j));
                }
            }
        }
        if min_width < -DEGENERATE_WIDTH {
            return None;
        }
        if let (Some((i, j)), true) = (min_dir, min_width <= DEGENERATE_WIDTH) {
            return self.degenerate_polygon(i, j);
        }
        let r = 4.0 * scale + 1.0;
        let mut poly = vec![(-r, -r), (r, -r), (r, r), (-r, r)];
        let tol = 1e-13 * (1.0 + scale);
        for (d, &hv) in self.directions.iter().zip(h) {
            poly = clip(&poly, d, hv, tol);
            if poly.is_empty() {
                return None;
            }
        }
        if poly
            .iter()
            .any(|p| p.0.abs() >= 0.999 * r || p.1.abs() >= 0.999 * r)
        {
            // unbounded outer approximation: directions do not span
            return None;
        }
        let pts: Vec<Vec<f64>> = poly.iter().map(|p| vec![p.0, p.1]).collect();
        Some(convex_hull_2d(&pts, 1e-12))
    }

    /// Body of zero width along direction `i` (antipode `j`): a segment or a
    /// point on the line `⟨x, dᵢ⟩ = c`.
    fn degenerate_polygon(&self, i: usize, j: usize) -> Option<Vec<Vec<f64>>> {
        let h = &self.support_values;
        let d = &self.directions[i];
        let c = 0.5 * (h[i] - h[j]);
        let p = [-d[1], d[0]];
        let mut t_lo = f64::NEG_INFINITY;
        let mut t_hi = f64::INFINITY;
        for (dk, &hk) in self.directions.iter().zip(h) {
            let a = dot(&p, dk);
            let rhs = hk - c * dot(d, dk);
            if a > 1e-12 {
                t_hi = t_hi.min(rhs / a);
            } else if a < -1e-12 {
                t_lo = t_lo.max(rhs / a);
            }
        }
        if !t_lo.is_finite() || !t_hi.is_finite() {
            return None;
        }
        let at = |t: f64| vec![c * d[0] + t * p[0], c * d[1] + t * p[1]];
        if t_hi - t_lo <= DEGENERATE_WIDTH {
            Some(vec![at(0.5 * (t_lo + t_hi))])
        } else {
            Some(vec![at(t_lo), at(t_hi)])
        }
    }

    /// Support value in an arbitrary (not necessarily unit) direction `w`.
    ///
    /// Uses the stored sample when `w` is a positive multiple of a sampled
    /// direction, otherwise the vertex list.
    pub fn support(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: w.len(),
            });
        }
        let n = norm(w);
        if n == 0.0 {
            return Ok(0.0);
        }
        let u: Vec<f64> = w.iter().map(|x| x / n).collect();
        if let Some(i) = self.direction_index(&u) {
            return Ok(n * self.support_values[i]);
        }
        match &self.vertices {
            Some(vs) => Ok(vs
                .iter()
                .map(|v| dot(v, w))
                .fold(f64::NEG_INFINITY, f64::max)),
            None => Err(Error::UnsampledDirection),
        }
    }

    /// Checks the type invariants: unit, distinct directions; finite values;
    /// bounded outer approximation in the plane; vertex/support agreement.
    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.directions.iter().enumerate() {
            if d.len() != self.ambient_dim || (norm(d) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSystem(format!("direction {i} is not a unit vector")));
            }
            if self.directions[..i]
                .iter()
                .any(|e| e.iter().zip(d).all(|(a, b)| (a - b).abs() <= DIRECTION_MATCH))
            {
                return Err(Error::InvalidSystem(format!("direction {i} is repeated")));
            }
        }
        if self.support_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("support values"));
        }
        if self.ambient_dim == 2 && self.outer_polygon().is_none() {
            return Err(Error::InvalidSystem(
                "sampled support admits no bounded polygon".into(),
            ));
        }
        if let Some(vs) = &self.vertices {
            for (d, h) in self.directions.iter().zip(&self.support_values) {
                let m = vs.iter().map(|v| dot(v, d)).fold(f64::NEG_INFINITY, f64::max);
                if (m - h).abs() > 1e-9 * (1.0 + h.abs()) {
                    return Err(Error::InvalidSystem(format!(
                        "vertex support {m} disagrees with sample {h}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn same_directions(&self, other: &Self) -> bool {
        self.directions.len() == other.directions.len()
            && self
                .directions
                .iter()
                .zip(&other.directions)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DIRECTION_MATCH))
    }

    /// Support values of `other` on `self`'s directions, resampling through
    /// `other`'s vertices when the direction sets differ.
    fn aligned_support(&self, other: &Self) -> Result<Vec<f64>> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: other.ambient_dim,
            });
        }
        if self.same_directions(other) {
            return Ok(other.support_values.clone());
        }
        if other.vertices.is_none() {
            return Err(Error::DirectionMismatch);
        }
        self.directions.iter().map(|d| other.support(d)).collect()
    }

    /// Largest absolute coordinate of the vertices, or of the support values.
    pub fn radius(&self) -> f64 {
        self.support_values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn interval_vertices(lo: f64, hi: f64) -> Vec<Vec<f64>> {
    if hi - lo <= DEGENERATE_WIDTH {
        vec![vec![0.5 * (lo + hi)]]
    } else {
        vec![vec![lo], vec![hi]]
    }
}

/// Minkowski sum of two convex polygons (CCW), by merging edge sequences.
fn minkowski_polygons(p: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if p.len() < 3 || q.len() < 3 {
        let sums: Vec<Vec<f64>> = p
            .iter()
            .flat_map(|a| q.iter().map(move |b| vec![a[0] + b[0], a[1] + b[1]]))
            .collect();
        return convex_hull_2d(&sums, 1e-12);
    }
    let start = |poly: &[Vec<f64>]| {
        (0..poly.len())
            .min_by(|&i, &j| {
                (poly[i][1], poly[i][0])
                    .partial_cmp(&(poly[j][1], poly[j][0]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0)
    };
    let (sp, sq) = (start(p), start(q));
    let (np, nq) = (p.len(), q.len());
    let pv = |i: usize| &p[(sp + i) % np];
    let qv = |j: usize| &q[(sq + j) % nq];
    let mut out = Vec::with_capacity(np + nq);
    let (mut i, mut j) = (0, 0);
    while i < np || j < nq {
        let a = pv(i);
        let b = qv(j);
        out.push(vec![a[0] + b[0], a[1] + b[1]]);
        let ep = {
            let n = pv(i + 1);
            (n[0] - a[0], n[1] - a[1])
        };
        let eq = {
            let n = qv(j + 1);
            (n[0] - b[0], n[1] - b[1])
        };
        let cross = ep.0 * eq.1 - ep.1 * eq.0;
        if j >= nq || (i < np && cross > 0.0) {
            i += 1;
        } else if i >= np || cross < 0.0 {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    convex_hull_2d(&out, 1e-12)
}

/// `P ⊕ Q`. Support values add on the shared direction set; planar vertex
/// lists are combined by edge convolution.
pub fn minkowski_sum(p: &ConvexBody, q: &ConvexBody) -> Result<ConvexBody> {
    let qs = p.aligned_support(q)?;
    let support_values: Vec<f64> = p.support_values.iter().zip(&qs).map(|(a, b)| a + b).collect();
    let vertices = match (&p.vertices, &q.vertices) {
        (Some(a), Some(b)) => match p.ambient_dim {
            0 => Some(vec![Vec::new()]),
            1 => {
                let lo = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
                let hi = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
                Some(interval_vertices(lo(a) + lo(b), hi(a) + hi(b)))
            }
            2 => Some(minkowski_polygons(a, b)),
            _ if a.len() * b.len() <= 4096 => Some(
                a.iter()
                    .flat_map(|x| b.iter().map(move |y| x.iter().zip(y).map(|(s, t)| s + t).collect()))
                    .collect(),
            ),
            _ => None,
        },
        _ => None,
    };
    Ok(ConvexBody {
        ambient_dim: p.ambient_dim,
        directions: p.directions.clone(),
        support_values,
        vertices,
        open_interior: p.open_interior && q.open_interior,
    })
}

/// Image `ΠP` of a body under an idempotent matrix, stored in the same
/// ambient space: `h_{ΠP}(d) = h_P(Πᵀd)`.
pub fn project_body(p: &ConvexBody, pi: &DMatrix<f64>) -> Result<ConvexBody> {
    let n = p.ambient_dim;
    if pi.nrows() != n || pi.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.nrows(),
        });
    }
    let resid = (pi * pi - pi).amax();
    if resid > 1e-10 {
        return Err(Error::NotIdempotent(resid));
    }
    let pit = pi.transpose();
    let support_values = p
        .directions
        .iter()
        .map(|d| {
            let w = &pit * DVector::from_row_slice(d);
            p.support(w.as_slice())
        })
        .collect::<Result<Vec<f64>>>()?;
    let vertices = p.vertices.as_ref().map(|vs| {
        let imgs: Vec<Vec<f64>> = vs
            .iter()
            .map(|v| (pi * DVector::from_row_slice(v)).as_slice().to_vec())
            .collect();
        match n {
            1 => interval_vertices(
                imgs.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min),
                imgs.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max),
            ),
            2 => convex_hull_2d(&imgs, 1e-12),
            _ => imgs,
        }
    });
    Ok(ConvexBody {
        ambient_dim: n,
        directions: p.directions.clone(),
        support_values,
        vertices,
        open_interior: false,
    })
}

/// Hausdorff distance estimate between two bodies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffEstimate {
    /// `max_d |h_P(d) - h_Q(d)|` over the shared direction set.
    pub support_gap: f64,
    /// Exact Euclidean Hausdorff distance of the vertex hulls (dim ≤ 2).
    pub vertex_distance: Option<f64>,
}

impl HausdorffEstimate {
    /// The vertex value when available, the support gap otherwise.
    pub fn value(&self) -> f64 {
        self.vertex_distance.unwrap_or(self.support_gap)
    }
}

pub fn hausdorff_distance(p: &ConvexBody, q: &ConvexBody) -> Result<HausdorffEstimate> {
    let qs = p.aligned_support(q)?;
    let support_gap = p
        .support_values
        .iter()
        .zip(&qs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let vertex_distance = match (&p.vertices, &q.vertices, p.ambient_dim) {
        (Some(_), Some(_), 0) => Some(0.0),
        (Some(a), Some(b), 1) => {
            let lo = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
            let hi = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
            Some((lo(a) - lo(b)).abs().max((hi(a) - hi(b)).abs()))
        }
        (Some(a), Some(b), 2) => {
            let one = |from: &Vec<Vec<f64>>, to: &Vec<Vec<f64>>| {
                from.iter()
                    .map(|v| point_polygon_distance(v, to))
                    .fold(0.0, f64::max)
            };
            Some(one(a, b).max(one(b, a)))
        }
        _ => None,
    };
    Ok(HausdorffEstimate {
        support_gap,
        vertex_distance,
    })
}

/// `K ⊕ S` with `K` compact and `S` a subspace.
///
/// `K` is stored in coordinates of `compact_basis`, an orthonormal basis of
/// `S^⊥`. Any compact `K'` with `K' ⊕ S` equal to the set projects onto the
/// same body, so membership reduces to a support check on the orthogonal
/// residual of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSetSum {
    pub compact: ConvexBody,
    /// `n × k` row-major, orthonormal columns spanning `S^⊥`.
    pub compact_basis: Vec<Vec<f64>>,
    /// `n × s` row-major, orthonormal columns spanning `S`.
    pub subspace_basis: Vec<Vec<f64>>,
}

impl AffineSetSum {
    /// Builds `K ⊕ S` from the ambient support function of `K`, sampled on
    /// the default directions of `S^⊥`.
    pub fn from_ambient_support<F>(subspace: &DMatrix<f64>, h: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> Result<f64> + Sync,
    {
        let w = orthogonal_complement(subspace);
        let compact = ConvexBody::sample(w.ncols(), |d| h(&(&w * DVector::from_row_slice(d))))?;
        Ok(Self {
            compact,
            compact_basis: to_rows(&w),
            subspace_basis: to_rows(subspace),
        })
    }

    /// Builds `K ⊕ S` from an ambient body `K` (e.g. an explicit polytope).
    pub fn from_ambient_body(k: &ConvexBody, subspace: &DMatrix<f64>) -> Result<Self> {
        Self::from_ambient_support(subspace, |v| k.support(v.as_slice()))
    }

    pub fn ambient_dim(&self) -> usize {
        self.compact_basis.len()
    }

    pub fn compact_basis_matrix(&self) -> DMatrix<f64> {
        let n = self.ambient_dim();
        from_rows(&self.compact_basis, self.compact.ambient_dim).unwrap_or_else(|| DMatrix::zeros(n, 0))
    }

    pub fn subspace_matrix(&self) -> DMatrix<f64> {
        let n = self.ambient_dim();
        let s = n - self.compact.ambient_dim;
        from_rows(&self.subspace_basis, s).unwrap_or_else(|| DMatrix::zeros(n, 0))
    }

    pub fn subspace_dim(&self) -> usize {
        self.ambient_dim() - self.compact.ambient_dim
    }

    /// Coordinates of the component of `x` orthogonal to `S`.
    pub fn residual_coords(&self, x: &[f64]) -> Vec<f64> {
        let w = self.compact_basis_matrix();
        (w.transpose() * DVector::from_row_slice(x)).as_slice().to_vec()
    }

    /// `x ∈ K ⊕ S` with support slack `slack`.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        if x.len() != self.ambient_dim() {
            return false;
        }
        let w = self.residual_coords(x);
        self.compact
            .directions
            .iter()
            .zip(&self.compact.support_values)
            .all(|(d, h)| dot(&w, d) <= h + slack)
    }

    /// Distance from `x` to the set: exact through the vertex list when
    /// available, otherwise the sampled lower bound `max_d ⟨w,d⟩ - h(d)`.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let w = self.residual_coords(x);
        match (&self.compact.vertices, self.compact.ambient_dim) {
            (_, 0) => 0.0,
            (Some(vs), 1) => {
                let lo = vs.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                let hi = vs.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                (lo - w[0]).max(w[0] - hi).max(0.0)
            }
            (Some(vs), 2) => point_polygon_distance(&w, vs),
            _ => self
                .compact
                .directions
                .iter()
                .zip(&self.compact.support_values)
                .map(|(d, h)| dot(&w, d) - h)
                .fold(0.0, f64::max),
        }
    }

    /// Distance from an interior point to the boundary (0 outside), from the
    /// sampled half-planes. Infinite when `S` is the whole space.
    pub fn depth(&self, x: &[f64]) -> f64 {
        if self.compact.ambient_dim == 0 {
            return f64::INFINITY;
        }
        let w = self.residual_coords(x);
        self.compact
            .directions
            .iter()
            .zip(&self.compact.support_values)
            .map(|(d, h)| h - dot(&w, d))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Vertices of the compact part mapped back to ambient coordinates.
    pub fn ambient_vertices(&self) -> Option<Vec<Vec<f64>>> {
        let w = self.compact_basis_matrix();
        self.compact.vertices.as_ref().map(|vs| {
            vs.iter()
                .map(|v| (&w * DVector::from_row_slice(v)).as_slice().to_vec())
                .collect()
        })
    }
}

/// Membership slack of [`membership`].
pub const MEMBERSHIP_SLACK: f64 = 1e-8;

/// `x ∈ S` with support slack [`MEMBERSHIP_SLACK`].
pub fn membership(s: &AffineSetSum, x: &[f64]) -> bool {
    s.contains(x, MEMBERSHIP_SLACK)
}

/// `max_d |h_P(d) - h_Q(d)|` between the compact parts of two set sums over
/// the same subspace; `None` when the subspaces differ.
pub fn compact_gap(a: &AffineSetSum, b: &AffineSetSum) -> Result<Option<HausdorffEstimate>> {
    if a.ambient_dim() != b.ambient_dim() || a.subspace_dim() != b.subspace_dim() {
        return Ok(None);
    }
    let sa = a.subspace_matrix();
    let sb = b.subspace_matrix();
    if sa.ncols() > 0 && crate::linalg::residual_outside(&sa, &sb) > 1e-8 {
        return Ok(None);
    }
    // Express b's compact part in a's coordinates.
    let wa = a.compact_basis_matrix();
    let wb = b.compact_basis_matrix();
    let change = wb.transpose() * &wa;
    let values = a
        .compact
        .directions
        .iter()
        .map(|d| {
            let v = &change * DVector::from_row_slice(d);
            b.compact.support(v.as_slice())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mapped = ConvexBody::from_support(a.compact.ambient_dim, a.compact.directions.clone(), values)?;
    hausdorff_distance(&a.compact, &mapped).map(Some)
}
