//! Small dense helpers on top of nalgebra: subspace bases, null spaces,
//! intersections, norms and row-major conversions for serialization.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-10;

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Builds an `nrows × ncols` matrix from row-major nested vectors. `ncols`
/// is needed to represent matrices with zero columns.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Option<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the column space, rank decided by
/// `σ > RANK_CUTOFF · σ_max`.
pub fn column_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    // Pad with zero columns so that U is square.
    let padded = if m.ncols() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (n, m.ncols())).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().fold(0.0, |a: f64, &s| a.max(s));
    if smax == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_CUTOFF * smax)
        .collect();
    let cols: Vec<DVector<f64>> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        canonical_signs(DMatrix::from_columns(&cols))
    }
}

/// Orthonormal basis of `{x : M x = 0}` for an `r × n` matrix. Singular
/// values below `RANK_CUTOFF · max(1, σ_max)` count as zero.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0, |a: f64, &s| a.max(s));
    let cutoff = RANK_CUTOFF * smax.max(1.0);
    let cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= cutoff)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        canonical_signs(DMatrix::from_columns(&cols))
    }
}

/// Orthonormal basis of the orthogonal complement of `span(basis)`.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    if basis.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    null_space(&basis.transpose())
}

/// Orthonormal basis of `span(a) ∩ span(b)`, computed as the null space of
/// the stacked transposed orthogonal complements.
pub fn intersection(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let ca = orthogonal_complement(a);
    let cb = orthogonal_complement(b);
    let k = ca.ncols() + cb.ncols();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    let mut stacked = DMatrix::zeros(k, n);
    stacked
        .view_mut((0, 0), (ca.ncols(), n))
        .copy_from(&ca.transpose());
    stacked
        .view_mut((ca.ncols(), 0), (cb.ncols(), n))
        .copy_from(&cb.transpose());
    null_space(&stacked)
}

/// Flips column signs so that the entry of largest magnitude in each column
/// is positive. Makes bases reproducible across decompositions.
pub fn canonical_signs(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best + 1e-12 {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
    m
}

/// Largest distance of the columns of `v` from `span(basis)`, for orthonormal
/// `basis`.
pub fn residual_outside(basis: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let proj = basis * (basis.transpose() * v);
    (v - proj)
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, total);
    let mut off = 0;
    for b in blocks {
        out.view_mut((0, off), (n, b.ncols())).copy_from(*b);
        off += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn intersection_of_planes_is_a_line() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let i = intersection(&a, &b);
        assert_eq!(i.ncols(), 1);
        assert!((i[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transversal_lines_meet_at_zero() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(intersection(&a, &b).ncols(), 0);
    }

    #[test]
    fn column_space_rank() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        assert_eq!(column_space(&m).ncols(), 1);
        assert_eq!(column_space(&DMatrix::zeros(3, 2)).ncols(), 0);
    }
}
