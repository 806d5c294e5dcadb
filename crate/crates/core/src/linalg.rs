//! Small dense helpers on top of nalgebra: Gram–Schmidt, complements,
//! subspace intersections and numerical rank.

use nalgebra::{DMatrix, DVector};

/// Tolerance used when deciding whether a Gram–Schmidt residual is zero.
pub const RANK_TOL: f64 = 1e-9;

/// Gram–Schmidt over the given vectors, skipping those whose residual norm
/// falls below `tol` times their original norm (or absolute `tol` for zeros).
pub fn gram_schmidt(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let scale = v.norm().max(1.0);
        let mut r = v.clone();
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for e in &out {
                let c = e.dot(&r);
                r -= e * c;
            }
        }
        let norm = r.norm();
        if norm > tol * scale {
            out.push(r / norm);
        }
    }
    out
}

pub fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..m.ncols()).map(|j| m.column(j).into_owned()).collect()
}

pub fn from_columns(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Orthonormal basis (as columns) of the column span.
pub fn orthonormal_span(m: &DMatrix<f64>) -> DMatrix<f64> {
    from_columns(m.nrows(), &gram_schmidt(&columns(m), RANK_TOL))
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    gram_schmidt(&columns(m), RANK_TOL).len()
}

/// Orthonormal completion of an orthonormal set of columns to a basis of R^n,
/// scanning standard basis vectors in order.
pub fn complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let mut vs = columns(basis);
    let k = vs.len();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        vs.push(e);
    }
    let all = gram_schmidt(&vs, 1e-6);
    from_columns(n, &all[k..])
}

/// Orthonormal basis of the intersection of two column spans (inputs need
/// not be orthonormal).
pub fn intersect(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let ea = orthonormal_span(a);
    let eb = orthonormal_span(b);
    if ea.ncols() == 0 || eb.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    // v = ea x lies in span(eb) iff (I - eb ebᵀ) ea x = 0
    let proj = DMatrix::<f64>::identity(n, n) - &eb * eb.transpose();
    let m = proj * &ea;
    let row_space = orthonormal_span(&m.transpose());
    let null = complement(&row_space);
    orthonormal_span(&(&ea * null))
}

/// Orthonormal complement of `sub` inside the span of `ambient`.
pub fn relative_complement(sub: &DMatrix<f64>, ambient: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ambient.nrows();
    let mut vs = columns(&orthonormal_span(sub));
    let k = vs.len();
    vs.extend(columns(ambient));
    let all = gram_schmidt(&vs, 1e-6);
    from_columns(n, &all[k..])
}

/// Determinant of a possibly empty square matrix (empty determinant is 1).
pub fn det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.clone().determinant()
    }
}

/// Square root of the Gram determinant of the columns.
pub fn gram_volume(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    det(&(m.transpose() * m)).max(0.0).sqrt()
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection_of_planes_in_r3() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let c = intersect(&a, &b);
        assert_eq!(c.ncols(), 1);
        assert!((c[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_completes_basis() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]) / 2f64.sqrt();
        let c = complement(&a);
        assert_eq!(c.ncols(), 2);
        let full = DMatrix::from_fn(3, 3, |i, j| if j == 0 { a[(i, 0)] } else { c[(i, j - 1)] });
        assert!((det(&full).abs() - 1.0).abs() < 1e-12);
    }
}
