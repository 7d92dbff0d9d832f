//! Real Schur form with block reordering.
//!
//! nalgebra provides the unordered quasi-triangular form `A = Q T Qᵀ`. Here
//! the diagonal blocks are identified, 2×2 blocks with real eigenvalues are
//! split, and adjacent blocks are swapped by solving the small Sylvester
//! equation `T11 X - X T22 = -T12` and applying the orthogonal factor of
//! `[X; I]`. Leading Schur vectors after reordering span the invariant
//! subspace of the selected eigenvalues.

use nalgebra::{DMatrix, Schur};

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct RealSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Diagonal block sizes (1 or 2) in order.
    pub blocks: Vec<usize>,
}

/// Eigenvalues `(re, im)` of a 1×1 or 2×2 diagonal block.
fn block_eigs(t: &DMatrix<f64>, p: usize, size: usize) -> Vec<(f64, f64)> {
    if size == 1 {
        return vec![(t[(p, p)], 0.0)];
    }
    let (a, b, c, d) = (t[(p, p)], t[(p, p + 1)], t[(p + 1, p)], t[(p + 1, p + 1)]);
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        vec![(half_tr + s, 0.0), (half_tr - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        vec![(half_tr, s), (half_tr, -s)]
    }
}

impl RealSchur {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))
            .ok_or(Error::SchurFailure)?;
        let (q, t) = schur.unpack();
        if !q.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return Err(Error::SchurFailure);
        }
        let mut s = RealSchur {
            q,
            t,
            blocks: Vec::new(),
        };
        s.detect_blocks();
        Ok(s)
    }

    fn detect_blocks(&mut self) {
        let n = self.t.nrows();
        let scale = self.t.norm().max(f64::MIN_POSITIVE);
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)].abs() > 1e-14 * scale {
                let eigs = block_eigs(&self.t, i, 2);
                if eigs[0].1 == 0.0 {
                    self.split_real_pair(i, eigs[0].0);
                    self.blocks.push(1);
                    i += 1;
                } else {
                    self.blocks.push(2);
                    i += 2;
                }
            } else {
                if i + 1 < n {
                    self.t[(i + 1, i)] = 0.0;
                }
                self.blocks.push(1);
                i += 1;
            }
        }
    }

    /// Triangularizes a 2×2 block with real eigenvalue `lambda` by a rotation.
    fn split_real_pair(&mut self, p: usize, lambda: f64) {
        let (a, b, c, d) = (
            self.t[(p, p)],
            self.t[(p, p + 1)],
            self.t[(p + 1, p)],
            self.t[(p + 1, p + 1)],
        );
        let v1 = (b, lambda - a);
        let v2 = (lambda - d, c);
        let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
        let r = x.hypot(y);
        if r == 0.0 {
            return;
        }
        let g = DMatrix::from_row_slice(2, 2, &[x / r, -y / r, y / r, x / r]);
        self.apply_local(p, &g);
        self.t[(p + 1, p)] = 0.0;
    }

    /// `T ← Gᵀ T G` and `Q ← Q G` on rows/columns `p..p+k`.
    fn apply_local(&mut self, p: usize, g: &DMatrix<f64>) {
        let n = self.t.nrows();
        let k = g.nrows();
        let rows = g.transpose() * self.t.view((p, 0), (k, n));
        self.t.view_mut((p, 0), (k, n)).copy_from(&rows);
        let cols = self.t.view((0, p), (n, k)) * g;
        self.t.view_mut((0, p), (n, k)).copy_from(&cols);
        let qc = self.q.view((0, p), (n, k)) * g;
        self.q.view_mut((0, p), (n, k)).copy_from(&qc);
    }

    fn block_start(&self, idx: usize) -> usize {
        self.blocks[..idx].iter().sum()
    }

    /// Swaps diagonal blocks `idx` and `idx + 1`.
    fn swap(&mut self, idx: usize) -> Result<()> {
        let p = self.block_start(idx);
        let p1 = self.blocks[idx];
        let p2 = self.blocks[idx + 1];
        let s = p1 + p2;
        let t11 = self.t.view((p, p), (p1, p1)).into_owned();
        let t22 = self.t.view((p + p1, p + p1), (p2, p2)).into_owned();
        let t12 = self.t.view((p, p + p1), (p1, p2)).into_owned();

        // (I ⊗ T11 - T22ᵀ ⊗ I) vec X = -vec T12, column-major vec.
        let k = p1 * p2;
        let mut kron = DMatrix::zeros(k, k);
        for j in 0..p2 {
            for i in 0..p1 {
                let row = i + j * p1;
                for kk in 0..p1 {
                    kron[(row, kk + j * p1)] += t11[(i, kk)];
                }
                for l in 0..p2 {
                    kron[(row, i + l * p1)] -= t22[(l, j)];
                }
            }
        }
        let rhs = nalgebra::DVector::from_iterator(k, t12.iter().map(|v| -v));
        let x = kron
            .full_piv_lu()
            .solve(&rhs)
            .ok_or(Error::SchurFailure)?;

        let mut w = DMatrix::zeros(s, p2 + s);
        for j in 0..p2 {
            for i in 0..p1 {
                w[(i, j)] = x[i + j * p1];
            }
            w[(p1 + j, j)] = 1.0;
        }
        for i in 0..s {
            w[(i, p2 + i)] = 1.0;
        }
        let g = w.qr().q();
        self.apply_local(p, &g);
        for i in p2..s {
            for j in 0..p2 {
                self.t[(p + i, p + j)] = 0.0;
            }
        }
        self.blocks.swap(idx, idx + 1);
        if !self.t.iter().all(|v| v.is_finite()) {
            return Err(Error::SchurFailure);
        }
        Ok(())
    }

    /// Real part of the eigenvalues of block `idx`.
    pub fn block_real_part(&self, idx: usize) -> f64 {
        let p = self.block_start(idx);
        block_eigs(&self.t, p, self.blocks[idx])[0].0
    }

    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut p = 0;
        for &b in &self.blocks {
            out.extend(block_eigs(&self.t, p, b));
            p += b;
        }
        out
    }

    /// Moves every block whose eigenvalue real part satisfies `select` to the
    /// top-left corner, keeping relative order. Returns the dimension of the
    /// selected invariant subspace, spanned by the leading columns of `q`.
    pub fn reorder_front(&mut self, select: impl Fn(f64) -> bool) -> Result<usize> {
        let mut front = 0;
        for j in 0..self.blocks.len() {
            if select(self.block_real_part(j)) {
                let mut pos = j;
                while pos > front {
                    self.swap(pos - 1)?;
                    pos -= 1;
                }
                front += 1;
            }
        }
        Ok(self.blocks[..front].iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_similarity(a: &DMatrix<f64>, s: &RealSchur) {
        let rec = &s.q * &s.t * s.q.transpose();
        assert!((rec - a).norm() < 1e-10 * (1.0 + a.norm()));
        let n = a.nrows();
        assert!((s.q.transpose() * &s.q - DMatrix::identity(n, n)).norm() < 1e-12);
    }

    #[test]
    fn reorder_triangular() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.5, 0.0, 3.0, 1.0, 0.0, 0.0, 0.0]);
        let mut s = RealSchur::new(&a).unwrap();
        let k = s.reorder_front(|re| re > 0.0).unwrap();
        assert_eq!(k, 1);
        check_similarity(&a, &s);
        assert!((s.t[(0, 0)] - 3.0).abs() < 1e-12);
        // Leading column spans the eigenvector of 3.
        let v = s.q.column(0).into_owned();
        assert!((&a * &v - 3.0 * &v).norm() < 1e-10);
    }

    #[test]
    fn reorder_complex_pair_past_real() {
        // rotation block with real part 0.5 below a stable eigenvalue
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[-2.0, 1.0, 1.0, 0.0, 0.5, -3.0, 0.0, 3.0, 0.5],
        );
        let mut s = RealSchur::new(&a).unwrap();
        let k = s.reorder_front(|re| re > 0.0).unwrap();
        assert_eq!(k, 2);
        check_similarity(&a, &s);
        let basis = s.q.columns(0, 2).into_owned();
        let res = crate::linalg::residual_outside(&basis, &(&a * &basis));
        assert!(res < 1e-10, "residual {res}");
    }
}
