//! Exact integer linear algebra: Smith normal form, saturation, integer kernels
//! and enumeration of torsion points `M x ≡ 0 (mod Z^d)`.
//!
//! Everything here runs on `i128` so that powers of small hyperbolic matrices
//! stay exact well past the periods used by the verification suite.

use std::fmt;

use crate::error::{Error, Result};

/// Dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i128>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    /// Builds a matrix from rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidModel("ragged integer matrix".into()));
        }
        let data = rows.iter().flat_map(|row| row.iter().map(|&v| v as i128)).collect();
        Ok(Self { rows: r, cols: c, data })
    }

    /// Builds a matrix whose columns are the given vectors (`n` rows).
    pub fn from_columns(n: usize, cols: &[Vec<i64>]) -> Self {
        let mut m = Self::zeros(n, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v as i128;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] as i64).collect())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self[(i, j)] as i64).collect()
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] as f64)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "incompatible integer matrix product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[i128]) -> Vec<i128> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn pow(&self, e: u32) -> IntMatrix {
        assert!(self.is_square());
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn trace(&self) -> i128 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> i128 {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return 1;
        }
        let mut a = self.clone();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if a[(k, k)] == 0 {
                match (k + 1..n).find(|&i| a[(i, k)] != 0) {
                    Some(i) => {
                        a.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return 0,
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[(i, j)] = (a[(i, j)] * a[(k, k)] - a[(i, k)] * a[(k, j)]) / prev;
                }
            }
            prev = a[(k, k)];
        }
        sign * a[(n - 1, n - 1)]
    }

    /// Inverse of a unimodular matrix (|det| = 1), computed exactly.
    pub fn unimodular_inverse(&self) -> Result<IntMatrix> {
        let det = self.det();
        if det.abs() != 1 {
            return Err(Error::InvalidModel(format!(
                "matrix is not unimodular (det = {det})"
            )));
        }
        let snf = smith_normal_form(self);
        // U A V = I  =>  A^{-1} = V U
        Ok(snf.v.mul(&snf.u))
    }

    pub fn rank(&self) -> usize {
        smith_normal_form(self).rank()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row_dst += q * row_src
    fn add_row(&mut self, dst: usize, src: usize, q: i128) {
        for j in 0..self.cols {
            let v = self[(src, j)];
            self[(dst, j)] += q * v;
        }
    }

    /// col_dst += q * col_src
    fn add_col(&mut self, dst: usize, src: usize, q: i128) {
        for i in 0..self.rows {
            let v = self[(i, src)];
            self[(i, dst)] += q * v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            self[(r, j)] = -self[(r, j)];
        }
    }

    fn negate_col(&mut self, c: usize) {
        for i in 0..self.rows {
            self[(i, c)] = -self[(i, c)];
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i128;
    fn index(&self, (i, j): (usize, usize)) -> &i128 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i128 {
        &mut self.data[i * self.cols + j]
    }
}

/// Smith decomposition `u * a * v = d` with `u`, `v` unimodular and `d`
/// diagonal with `d[i] | d[i+1]`, all nonnegative.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
    pub diagonal: Vec<i128>,
}

impl Smith {
    pub fn rank(&self) -> usize {
        self.diagonal.iter().take_while(|&&d| d != 0).count()
    }
}

pub fn smith_normal_form(a: &IntMatrix) -> Smith {
    let (m, n) = (a.rows, a.cols);
    let mut d = a.clone();
    let mut u = IntMatrix::identity(m);
    let mut u_inv = IntMatrix::identity(m);
    let mut v = IntMatrix::identity(n);
    let mut v_inv = IntMatrix::identity(n);

    for t in 0..m.min(n) {
        loop {
            // smallest nonzero entry of the trailing block
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    let x = d[(i, j)].abs();
                    if x != 0 && pivot.is_none_or(|(pi, pj)| x < d[(pi, pj)].abs()) {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                return finish(d, u, u_inv, v, v_inv);
            };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            u_inv.swap_cols(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);
            v_inv.swap_rows(t, pj);

            let p = d[(t, t)];
            let mut clean = true;
            for i in t + 1..m {
                let q = d[(i, t)].div_euclid(p);
                if q != 0 {
                    d.add_row(i, t, -q);
                    u.add_row(i, t, -q);
                    u_inv.add_col(t, i, q);
                }
                if d[(i, t)] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..n {
                let q = d[(t, j)].div_euclid(p);
                if q != 0 {
                    d.add_col(j, t, -q);
                    v.add_col(j, t, -q);
                    v_inv.add_row(t, j, q);
                }
                if d[(t, j)] != 0 {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // divisibility of the remaining block by the pivot
            let offender = (t + 1..m).find(|&i| (t + 1..n).any(|j| d[(i, j)] % p != 0));
            if let Some(i) = offender {
                d.add_row(t, i, 1);
                u.add_row(t, i, 1);
                u_inv.add_col(i, t, -1);
                continue;
            }
            break;
        }
        if d[(t, t)] < 0 {
            d.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
    }
    finish(d, u, u_inv, v, v_inv)
}

fn finish(d: IntMatrix, u: IntMatrix, u_inv: IntMatrix, v: IntMatrix, v_inv: IntMatrix) -> Smith {
    let diagonal = (0..d.rows.min(d.cols)).map(|i| d[(i, i)]).collect();
    Smith { u, u_inv, v, v_inv, diagonal }
}

/// Basis (as columns) of the saturated lattice `span_Q(columns) ∩ Z^n`.
pub fn saturate(generators: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(generators);
    let r = snf.rank();
    let n = generators.rows;
    let mut out = IntMatrix::zeros(n, r);
    for j in 0..r {
        for i in 0..n {
            out[(i, j)] = snf.u_inv[(i, j)];
        }
    }
    out
}

/// Basis (as columns) of the integer kernel `{x ∈ Z^cols : M x = 0}`.
pub fn integer_kernel(m: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(m);
    let r = snf.rank();
    let n = m.cols;
    let mut out = IntMatrix::zeros(n, n - r);
    for (k, j) in (r..n).enumerate() {
        for i in 0..n {
            out[(i, k)] = snf.v[(i, j)];
        }
    }
    out
}

/// Coset representatives of `Z^n / L` where `L` is the full-rank lattice
/// spanned by the columns of `generators`.
pub fn coset_representatives(generators: &IntMatrix) -> Result<Vec<Vec<i64>>> {
    let n = generators.rows;
    let snf = smith_normal_form(generators);
    if snf.rank() < n {
        return Err(Error::NotTransversal("lattice sum is not of full rank".into()));
    }
    // L = U^{-1} D Z^m, so z ↦ U z identifies Z^n / L with ⊕ Z / d_i.
    let mut reps = vec![vec![0i128; n]];
    for (i, &di) in snf.diagonal.iter().take(n).enumerate() {
        let mut next = Vec::with_capacity(reps.len() * di as usize);
        for k in 0..di {
            for r in &reps {
                let mut r = r.clone();
                r[i] = k;
                next.push(r);
            }
        }
        reps = next;
    }
    Ok(reps
        .into_iter()
        .map(|k| snf.u_inv.mul_vec(&k).into_iter().map(|x| x as i64).collect())
        .collect())
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: i128, b: i128) -> i128 {
    if a == 0 || b == 0 {
        0
    } else {
        (a / gcd(a, b)) * b
    }
}

/// A point of `Q^d / Z^d`, stored as numerators over a common denominator,
/// always in canonical form: numerators in `[0, den)` and `gcd` reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalPoint {
    den: i128,
    num: Vec<i128>,
}

impl RationalPoint {
    pub fn new(num: Vec<i128>, den: i128) -> Self {
        assert!(den > 0, "rational point denominator must be positive");
        let mut p = Self { den, num };
        p.canonicalize();
        p
    }

    fn canonicalize(&mut self) {
        for x in &mut self.num {
            *x = x.rem_euclid(self.den);
        }
        let g = self.num.iter().fold(self.den, |g, &x| gcd(g, x));
        if g > 1 {
            self.den /= g;
            for x in &mut self.num {
                *x /= g;
            }
        }
    }

    pub fn denominator(&self) -> i128 {
        self.den
    }

    pub fn numerators(&self) -> &[i128] {
        &self.num
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.num.iter().map(|&x| x as f64 / self.den as f64).collect()
    }

    /// Image under `x ↦ A x mod Z^d`.
    pub fn apply(&self, a: &IntMatrix) -> RationalPoint {
        RationalPoint::new(a.mul_vec(&self.num), self.den)
    }

    /// Length of the orbit under `A`, i.e. the least period.
    pub fn orbit_length(&self, a: &IntMatrix, bound: usize) -> Option<usize> {
        let mut p = self.apply(a);
        for k in 1..=bound {
            if &p == self {
                return Some(k);
            }
            p = p.apply(a);
        }
        None
    }
}

/// All solutions of `M x ∈ Z^d` with `x ∈ [0,1)^d`, for nonsingular square `M`.
/// There are exactly `|det M|` of them.
pub fn torsion_points(m: &IntMatrix) -> Result<Vec<RationalPoint>> {
    if !m.is_square() {
        return Err(Error::InvalidModel("torsion points need a square matrix".into()));
    }
    let d = m.rows;
    let snf = smith_normal_form(m);
    if snf.rank() < d {
        return Err(Error::NonHyperbolic("singular matrix has a continuum of solutions".into()));
    }
    let common = snf.diagonal.iter().fold(1i128, |acc, &x| lcm(acc, x));
    // U M V = D, y = V^{-1} x, D y ∈ Z^d  =>  y_i = k_i / d_i.
    let mut ys: Vec<Vec<i128>> = vec![vec![0; d]];
    for (i, &di) in snf.diagonal.iter().enumerate() {
        let scale = common / di;
        let mut next = Vec::with_capacity(ys.len() * di as usize);
        for y in &ys {
            for k in 0..di {
                let mut y = y.clone();
                y[i] = k * scale;
                next.push(y);
            }
        }
        ys = next;
    }
    let mut points: Vec<RationalPoint> = ys
        .into_iter()
        .map(|y| RationalPoint::new(snf.v.mul_vec(&y), common))
        .collect();
    points.sort();
    points.dedup();
    Ok(points)
}
