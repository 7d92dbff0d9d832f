//! The problem instance: `ẋ = Ax + Bu` with `u(t) ∈ U`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convex::{convex_hull_2d, default_directions};
use crate::linalg::{from_rows, is_finite, to_rows};
use crate::{Error, Result};

/// Compact convex control range containing the origin in its interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControlRange {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Polytope { vertices: Vec<Vec<f64>> },
}

impl ControlRange {
    /// The symmetric box `[-r, r]^m`.
    pub fn symmetric_box(m: usize, r: f64) -> Self {
        ControlRange::Box {
            lo: vec![-r; m],
            hi: vec![r; m],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlRange::Box { lo, .. } => lo.len(),
            ControlRange::Polytope { vertices } => vertices.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControlRange::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidSystem(
                        "box bounds must be nonempty and of equal length".into(),
                    ));
                }
                for (l, h) in lo.iter().zip(hi) {
                    if !l.is_finite() || !h.is_finite() {
                        return Err(Error::NonFinite("control range"));
                    }
                    if !(*l < 0.0 && 0.0 < *h) {
                        return Err(Error::InvalidSystem(
                            "box control range must satisfy lo < 0 < hi".into(),
                        ));
                    }
                }
                Ok(())
            }
            ControlRange::Polytope { vertices } => {
                let m = self.dim();
                if vertices.is_empty() || m == 0 {
                    return Err(Error::InvalidSystem("polytope needs vertices".into()));
                }
                if vertices.iter().any(|v| v.len() != m) {
                    return Err(Error::InvalidSystem(
                        "polytope vertices have inconsistent dimension".into(),
                    ));
                }
                if vertices.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("control range"));
                }
                if !self.origin_is_interior() {
                    return Err(Error::InvalidSystem(
                        "origin must lie strictly inside the control polytope".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn origin_is_interior(&self) -> bool {
        let m = self.dim();
        match self {
            ControlRange::Box { lo, hi } => lo.iter().zip(hi).all(|(l, h)| *l < 0.0 && 0.0 < *h),
            ControlRange::Polytope { vertices } if m == 2 => {
                let hull = convex_hull_2d(vertices, 1e-12);
                if hull.len() < 3 {
                    return false;
                }
                (0..hull.len()).all(|i| {
                    let a = &hull[i];
                    let b = &hull[(i + 1) % hull.len()];
                    // origin strictly left of each CCW edge
                    (b[0] - a[0]) * (0.0 - a[1]) - (b[1] - a[1]) * (0.0 - a[0]) > 1e-12
                })
            }
            ControlRange::Polytope { .. } => default_directions(m)
                .iter()
                .all(|d| self.support(d) > 1e-12),
        }
    }

    /// `h_U(d) = max_{u ∈ U} ⟨u, d⟩`.
    pub fn support(&self, d: &[f64]) -> f64 {
        match self {
            ControlRange::Box { lo, hi } => d
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(di, (l, h))| (di * l).max(di * h))
                .sum(),
            ControlRange::Polytope { vertices } => vertices
                .iter()
                .map(|v| v.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// A maximizer of `⟨u, d⟩` over `U` (a vertex).
    pub fn argmax(&self, d: &[f64]) -> Vec<f64> {
        match self {
            ControlRange::Box { lo, hi } => d
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(di, (l, h))| if di * h >= di * l { *h } else { *l })
                .collect(),
            ControlRange::Polytope { vertices } => {
                let mut best = &vertices[0];
                let mut val = f64::NEG_INFINITY;
                for v in vertices {
                    let s: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
                    if s > val {
                        val = s;
                        best = v;
                    }
                }
                best.clone()
            }
        }
    }

    /// All vertices; for a box the `2^m` corners in binary counting order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            ControlRange::Box { lo, hi } => {
                let m = lo.len();
                (0..1usize << m)
                    .map(|mask| {
                        (0..m)
                            .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                            .collect()
                    })
                    .collect()
            }
            ControlRange::Polytope { vertices } => vertices.clone(),
        }
    }

    /// Largest norm of a point of `U`, i.e. `max_{|d|=1} h_U(d)`.
    pub fn max_norm(&self) -> f64 {
        self.vertices()
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Membership with slack. Exact for boxes and planar polytopes; higher
    /// dimensional polytopes are tested against the sampled support function.
    pub fn contains(&self, u: &[f64], slack: f64) -> bool {
        if u.len() != self.dim() || u.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self {
            ControlRange::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| *x >= l - slack && *x <= h + slack),
            ControlRange::Polytope { vertices } if u.len() == 1 => {
                let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                u[0] >= lo - slack && u[0] <= hi + slack
            }
            ControlRange::Polytope { vertices } if u.len() == 2 => {
                let hull = convex_hull_2d(vertices, 1e-12);
                (0..hull.len()).all(|i| {
                    let a = &hull[i];
                    let b = &hull[(i + 1) % hull.len()];
                    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                    let len = (ex * ex + ey * ey).sqrt();
                    // outward normal of a CCW edge is (ey, -ex)
                    (ey * (u[0] - a[0]) - ex * (u[1] - a[1])) / len <= slack
                })
            }
            ControlRange::Polytope { .. } => default_directions(u.len()).iter().all(|d| {
                let s: f64 = d.iter().zip(u).map(|(a, b)| a * b).sum();
                s <= self.support(d) + slack
            }),
        }
    }
}

/// `ẋ = Ax + Bu`, `u ∈ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub range: ControlRange,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, range: ControlRange) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidSystem(format!(
                "A must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::InvalidSystem(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if !is_finite(&a) {
            return Err(Error::NonFinite("A"));
        }
        if !is_finite(&b) {
            return Err(Error::NonFinite("B"));
        }
        range.validate()?;
        if range.dim() != b.ncols() {
            return Err(Error::InvalidSystem(format!(
                "control range has dimension {}, B has {} columns",
                range.dim(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, range })
    }

    /// Convenience constructor from row-major slices.
    pub fn from_rows(a: &[Vec<f64>], b: &[Vec<f64>], range: ControlRange) -> Result<Self> {
        let n = a.len();
        let a_m = from_rows(a, n)
            .ok_or_else(|| Error::InvalidSystem("A rows have inconsistent length".into()))?;
        let m = b.first().map_or(0, Vec::len);
        let b_m = from_rows(b, m)
            .ok_or_else(|| Error::InvalidSystem("B rows have inconsistent length".into()))?;
        Self::new(a_m, b_m, range)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    /// The time-reversed system `ẋ = -Ax - Bu`.
    pub fn time_reversed(&self) -> Self {
        Self {
            a: -&self.a,
            b: -&self.b,
            range: self.range.clone(),
        }
    }

    /// The uncontrolled system with `B = 0` (one zero input column, `U = [-1, 1]`).
    pub fn autonomous(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, DMatrix::zeros(n, 1), ControlRange::symmetric_box(1, 1.0))
    }

    /// `Ax + Bu`.
    pub fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    u: ControlRange,
}

impl Serialize for LinearSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawSystem {
            a: to_rows(&self.a),
            b: to_rows(&self.b),
            u: self.range.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSystem::deserialize(d)?;
        LinearSystem::from_rows(&raw.a, &raw.b, raw.u).map_err(serde::de::Error::custom)
    }
}
