//! Tangential differential forms on flat foliated tori, stored as finite
//! Fourier tables `(mode, multi-index) → amplitude`.
//!
//! A term `c · e_m θ^I` means `c · exp(2πi m·x) θ^{i_1} ∧ … ∧ θ^{i_k}` where
//! `θ^j` is the leafwise coform dual to the frame vector `w_j`. Multi-indices
//! are 0-based.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{same_model, AffineFoliatedMap, FoliatedTorusModel};

/// Coefficients below this magnitude are dropped after every operation.
pub const PRUNE_FLOOR: f64 = 1e-14;

const TWO_PI: f64 = 2.0 * PI;

/// Integer Fourier index `m ∈ Z^n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeMode(pub Vec<i64>);

impl LatticeMode {
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|a| -a).collect())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&m, &v)| m as f64 * v).sum()
    }
}

impl fmt::Debug for LatticeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Strictly increasing subset of `{0, …, p-1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTerm(format!("multi-index {indices:?} is not strictly increasing")));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Complement in `{0, …, p-1}`.
    pub fn complement(&self, p: usize) -> Self {
        Self((0..p).filter(|j| !self.contains(*j)).collect())
    }

    pub fn shift(&self, by: usize) -> Self {
        Self(self.0.iter().map(|i| i + by).collect())
    }

    /// Sign of `θ^I ∧ θ^J = sign · θ^{I∪J}`, or `None` when they overlap.
    pub fn merge(&self, other: &Self) -> Option<(Self, f64)> {
        let mut inversions = 0usize;
        for &i in &self.0 {
            for &j in &other.0 {
                if i == j {
                    return None;
                }
                if i > j {
                    inversions += 1;
                }
            }
        }
        let mut all: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        all.sort_unstable();
        let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((Self(all), sign))
    }

    /// All multi-indices of size `k` in `{0, …, p-1}`, lexicographic.
    pub fn all(p: usize, k: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if cur.len() == k {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for i in start..p {
                cur.push(i);
                rec(i + 1, p, k, cur, out);
                cur.pop();
            }
        }
        if k <= p {
            rec(0, p, k, &mut cur, &mut out);
        }
        out
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

type Key = (LatticeMode, MultiIndex);

/// Leafwise `k`-form as a sparse Fourier table.
#[derive(Clone)]
pub struct TangentialForm {
    model: Arc<FoliatedTorusModel>,
    degree: usize,
    coeffs: BTreeMap<Key, Complex64>,
}

impl fmt::Debug for TangentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TangentialForm")
            .field("degree", &self.degree)
            .field("terms", &self.coeffs)
            .finish()
    }
}

impl PartialEq for TangentialForm {
    fn eq(&self, other: &Self) -> bool {
        same_model(&self.model, &other.model) && self.degree == other.degree && self.coeffs == other.coeffs
    }
}

impl TangentialForm {
    pub fn zero(model: Arc<FoliatedTorusModel>, degree: usize) -> Result<Self> {
        if degree > model.leaf_dim() {
            return Err(Error::DegreeOverflow { degree, leaf_dim: model.leaf_dim() });
        }
        Ok(Self { model, degree, coeffs: BTreeMap::new() })
    }

    pub fn constant(model: Arc<FoliatedTorusModel>, c: Complex64) -> Self {
        let n = model.ambient();
        Self::term(model, LatticeMode::zero(n), MultiIndex::empty(), c).unwrap()
    }

    /// Single term `c · e_m θ^I`.
    pub fn term(model: Arc<FoliatedTorusModel>, mode: LatticeMode, index: MultiIndex, c: Complex64) -> Result<Self> {
        let mut f = Self::zero(model, index.len())?;
        f.insert(mode, index, c)?;
        Ok(f)
    }

    /// `vol_F = o · θ^{0…p-1}`.
    pub fn volume(model: Arc<FoliatedTorusModel>) -> Self {
        let n = model.ambient();
        let p = model.leaf_dim();
        let o = model.orientation() as f64;
        Self::term(model, LatticeMode::zero(n), MultiIndex::full(p), Complex64::new(o, 0.0)).unwrap()
    }

    /// Adds `c` to the coefficient of `e_m θ^I`.
    pub fn insert(&mut self, mode: LatticeMode, index: MultiIndex, c: Complex64) -> Result<()> {
        if mode.0.len() != self.model.ambient() {
            return Err(Error::InvalidTerm(format!("mode {mode:?} has the wrong length")));
        }
        if index.len() != self.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: index.len() });
        }
        if index.0.last().is_some_and(|&i| i >= self.model.leaf_dim()) {
            return Err(Error::InvalidTerm(format!("multi-index {index:?} exceeds the leaf dimension")));
        }
        self.accumulate((mode, index), c);
        self.prune();
        Ok(())
    }

    fn accumulate(&mut self, key: Key, c: Complex64) {
        *self.coeffs.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.norm() >= PRUNE_FLOOR);
    }

    fn with_coeffs(&self, degree: usize, coeffs: BTreeMap<Key, Complex64>) -> Self {
        let mut f = Self { model: self.model.clone(), degree, coeffs };
        f.prune();
        f
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        &self.model
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LatticeMode, &MultiIndex, &Complex64)> {
        self.coeffs.iter().map(|((m, i), c)| (m, i, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficient(&self, mode: &LatticeMode, index: &MultiIndex) -> Complex64 {
        self.coeffs.get(&(mode.clone(), index.clone())).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `coefficient(-m, I) = conj(coefficient(m, I))` within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|((m, i), c)| (self.coefficient(&m.neg(), i) - c.conj()).norm() <= tol)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !same_model(&self.model, &other.model) {
            return Err(Error::ModelMismatch("forms live on different models".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_default() += c;
        }
        Ok(self.with_coeffs(self.degree, coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let coeffs = self.coeffs.iter().map(|(k, c)| (k.clone(), c * s)).collect();
        self.with_coeffs(self.degree, coeffs)
    }

    /// Wedge product; overflowing degrees are an error.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.wedge_with(other, false)
    }

    /// Wedge product; with `allow_overflow` a degree above `p` yields the
    /// zero form of degree `p`.
    pub fn wedge_with(&self, other: &Self, allow_overflow: bool) -> Result<Self> {
        self.check_compatible(other)?;
        let p = self.model.leaf_dim();
        let degree = self.degree + other.degree;
        if degree > p {
            return if allow_overflow {
                Self::zero(self.model.clone(), p)
            } else {
                Err(Error::DegreeOverflow { degree, leaf_dim: p })
            };
        }
        let mut coeffs: BTreeMap<Key, Complex64> = BTreeMap::new();
        for ((m1, i1), c1) in &self.coeffs {
            for ((m2, i2), c2) in &other.coeffs {
                if let Some((idx, sign)) = i1.merge(i2) {
                    *coeffs.entry((m1.add(m2), idx)).or_default() += c1 * c2 * sign;
                }
            }
        }
        Ok(self.with_coeffs(degree, coeffs))
    }

    /// Leafwise differential; degree `p` maps to the zero form of degree `p`.
    pub fn d_f(&self) -> Self {
        let p = self.model.leaf_dim();
        if self.degree == p {
            return Self { model: self.model.clone(), degree: p, coeffs: BTreeMap::new() };
        }
        let mut coeffs: BTreeMap<Key, Complex64> = BTreeMap::new();
        for ((m, idx), c) in &self.coeffs {
            let a = self.model.leaf_components(&m.0);
            for (j, aj) in a.iter().enumerate() {
                if *aj == 0.0 || idx.contains(j) {
                    continue;
                }
                let (merged, sign) = MultiIndex(vec![j]).merge(idx).unwrap();
                *coeffs.entry((m.clone(), merged)).or_default() += c * Complex64::new(0.0, TWO_PI * aj) * sign;
            }
        }
        self.with_coeffs(self.degree + 1, coeffs)
    }

    /// `⋆θ^I = o · ε(I, I^c) θ^{I^c}`.
    pub fn star(&self) -> Self {
        let p = self.model.leaf_dim();
        let o = self.model.orientation() as f64;
        let mut coeffs = BTreeMap::new();
        for ((m, idx), c) in &self.coeffs {
            let comp = idx.complement(p);
            let (_, sign) = idx.merge(&comp).unwrap();
            coeffs.insert((m.clone(), comp), c * (o * sign));
        }
        self.with_coeffs(p - self.degree, coeffs)
    }

    /// `δ = (-1)^{p k + 1} ⋆ d ⋆` on forms of degree `k + 1`; degree 0 maps
    /// to the zero function.
    pub fn delta_f(&self) -> Self {
        if self.degree == 0 {
            return Self { model: self.model.clone(), degree: 0, coeffs: BTreeMap::new() };
        }
        let p = self.model.leaf_dim();
        let k = self.degree - 1;
        let sign = if (p * k + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        self.star().d_f().star().scale(Complex64::new(sign, 0.0))
    }

    /// `Δ = d δ + δ d`.
    pub fn laplacian_f(&self) -> Self {
        let p = self.model.leaf_dim();
        let a = if self.degree > 0 { Some(self.delta_f().d_f()) } else { None };
        let b = if self.degree < p { Some(self.d_f().delta_f()) } else { None };
        match (a, b) {
            (Some(a), Some(b)) => a.add(&b).unwrap(),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => self.scale(Complex64::new(0.0, 0.0)),
        }
    }

    /// `Re Σ c · conj(c')` over matching terms.
    pub fn l2_inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        Ok(self.hermitian_inner(other).re)
    }

    /// `Σ c · conj(c')` over matching terms.
    pub fn hermitian_inner(&self, other: &Self) -> Complex64 {
        let (small, large, flip) = if self.coeffs.len() <= other.coeffs.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &small.coeffs {
            if let Some(c2) = large.coeffs.get(k) {
                acc += if flip { c2 * c.conj() } else { c * c2.conj() };
            }
        }
        acc
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `∫_M ω vol_Q` for a leafwise top form.
    pub fn integrate_volq(&self) -> Result<Complex64> {
        let p = self.model.leaf_dim();
        if self.degree != p {
            return Err(Error::DegreeMismatch { expected: p, found: self.degree });
        }
        let key = (LatticeMode::zero(self.model.ambient()), MultiIndex::full(p));
        let o = self.model.orientation() as f64;
        Ok(self.coeffs.get(&key).copied().unwrap_or_default() * o)
    }

    /// Pullback by `x ↦ B x + c`: `e_m ↦ e^{2πi m·c} e_{Bᵀm}`,
    /// `θ^J ↦ Σ_I det(T[J, I]) θ^I`.
    pub fn pullback(&self, f: &AffineFoliatedMap) -> Result<Self> {
        if !same_model(&self.model, f.codomain()) {
            return Err(Error::ModelMismatch("form does not live on the codomain of the map".into()));
        }
        if !f.is_foliated() {
            return Err(Error::NotFoliated { residual: f.foliation_check().residual });
        }
        let dom = f.domain().clone();
        let t = f.tangential_block();
        let bt = f.matrix().transpose();
        let targets = MultiIndex::all(dom.leaf_dim(), self.degree);
        let mut minors: BTreeMap<MultiIndex, Vec<(MultiIndex, f64)>> = BTreeMap::new();
        let mut coeffs: BTreeMap<Key, Complex64> = BTreeMap::new();
        for ((m, j), c) in &self.coeffs {
            let phase = Complex64::from_polar(1.0, TWO_PI * m.dot(f.translation_part()));
            let mm: Vec<i128> = m.0.iter().map(|&x| x as i128).collect();
            let image = LatticeMode(bt.mul_vec(&mm).into_iter().map(|x| x as i64).collect());
            let row = minors.entry(j.clone()).or_insert_with(|| {
                targets
                    .iter()
                    .map(|i| (i.clone(), minor(&t, j.indices(), i.indices())))
                    .filter(|(_, d)| d.abs() > 0.0)
                    .collect()
            });
            for (i, det) in row.iter() {
                *coeffs.entry((image.clone(), i.clone())).or_default() += c * phase * *det;
            }
        }
        let mut out = Self { model: dom, degree: self.degree, coeffs };
        out.prune();
        Ok(out)
    }

    /// `pr_M^* ω ∧ pr_N^* τ` on `product = M × N`.
    pub fn external_product(&self, other: &Self, product: Arc<FoliatedTorusModel>) -> Result<Self> {
        let expected = self.model.product(&other.model);
        if *product != expected {
            return Err(Error::ModelMismatch("target is not the product model".into()));
        }
        let shift = self.model.leaf_dim();
        let mut coeffs = BTreeMap::new();
        for ((m1, i1), c1) in &self.coeffs {
            for ((m2, i2), c2) in &other.coeffs {
                let mode = LatticeMode(m1.0.iter().chain(&m2.0).copied().collect());
                let idx = MultiIndex(i1.0.iter().copied().chain(i2.shift(shift).0).collect());
                *coeffs.entry((mode, idx)).or_default() += c1 * c2;
            }
        }
        let mut out = Self { model: product, degree: self.degree + other.degree, coeffs };
        out.prune();
        Ok(out)
    }

    /// Pointwise values per multi-index at `x`.
    pub fn evaluate(&self, x: &[f64]) -> BTreeMap<MultiIndex, Complex64> {
        let mut out: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for ((m, i), c) in &self.coeffs {
            *out.entry(i.clone()).or_default() += c * Complex64::from_polar(1.0, TWO_PI * m.dot(x));
        }
        out
    }

    /// Value of the form on the vectors given as columns of `frame`.
    pub fn evaluate_on(&self, x: &[f64], frame: &nalgebra::DMatrix<f64>) -> Complex64 {
        let w = self.model.tangential_frame();
        let wf = w.transpose() * frame;
        self.evaluate(x)
            .into_iter()
            .map(|(i, v)| {
                let rows: Vec<usize> = i.0.clone();
                let cols: Vec<usize> = (0..frame.ncols()).collect();
                v * minor(&wf, &rows, &cols)
            })
            .sum()
    }

    pub fn conj(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|((m, i), c)| ((m.neg(), i.clone()), c.conj())).collect();
        self.with_coeffs(self.degree, coeffs)
    }

    /// Keeps the terms for which `keep(mode)` holds.
    pub fn filter_modes(&self, keep: impl Fn(&LatticeMode) -> bool) -> Self {
        let coeffs = self.coeffs.iter().filter(|((m, _), _)| keep(m)).map(|(k, c)| (k.clone(), *c)).collect();
        self.with_coeffs(self.degree, coeffs)
    }

    pub fn to_json(&self) -> FormJson {
        FormJson {
            degree: self.degree,
            terms: self
                .coeffs
                .iter()
                .map(|((m, i), c)| TermJson { mode: m.0.clone(), index: i.0.clone(), re: c.re, im: c.im })
                .collect(),
        }
    }

    pub fn from_json(model: Arc<FoliatedTorusModel>, json: &FormJson) -> Result<Self> {
        let mut f = Self::zero(model, json.degree)?;
        for t in &json.terms {
            f.insert(LatticeMode(t.mode.clone()), MultiIndex::new(t.index.clone())?, Complex64::new(t.re, t.im))?;
        }
        Ok(f)
    }

    /// Random sparse form with `terms` terms, modes in `[-max_mode, max_mode]^n`
    /// and amplitudes in the unit square. `real` adds the conjugate terms.
    pub fn random_sparse<R: Rng>(
        model: Arc<FoliatedTorusModel>,
        degree: usize,
        terms: usize,
        max_mode: i64,
        real: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let p = model.leaf_dim();
        let n = model.ambient();
        let mut f = Self::zero(model, degree)?;
        let indices = MultiIndex::all(p, degree);
        for _ in 0..terms {
            let mode = LatticeMode((0..n).map(|_| rng.gen_range(-max_mode..=max_mode)).collect());
            let idx = indices[rng.gen_range(0..indices.len())].clone();
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.accumulate((mode.clone(), idx.clone()), c);
            if real {
                f.accumulate((mode.neg(), idx), c.conj());
            }
        }
        f.prune();
        Ok(f)
    }
}

/// Determinant of the submatrix with the given rows and columns.
pub(crate) fn minor(m: &nalgebra::DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    match k {
        0 => 1.0,
        1 => m[(rows[0], cols[0])],
        2 => m[(rows[0], cols[0])] * m[(rows[1], cols[1])] - m[(rows[0], cols[1])] * m[(rows[1], cols[0])],
        _ => nalgebra::DMatrix::from_fn(k, k, |a, b| m[(rows[a], cols[b])]).determinant(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub mode: Vec<i64>,
    pub index: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

/// `{"degree": k, "terms": [{"mode": [...], "index": [...], "re": r, "im": s}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub degree: usize,
    pub terms: Vec<TermJson>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn golden() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    fn one_leaf2() -> Arc<FoliatedTorusModel> {
        Arc::new(FoliatedTorusModel::one_leaf(2))
    }

    fn dx(model: &Arc<FoliatedTorusModel>, j: usize) -> TangentialForm {
        let n = model.ambient();
        TangentialForm::term(model.clone(), LatticeMode::zero(n), MultiIndex(vec![j]), c(1.0)).unwrap()
    }

    fn models() -> Vec<Arc<FoliatedTorusModel>> {
        vec![
            Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap()),
            Arc::new(FoliatedTorusModel::one_leaf(3)),
            Arc::new(FoliatedTorusModel::new(4, &[vec![1.0, 2f64.sqrt(), 0.0, 0.5], vec![0.0, 1.0, 3f64.sqrt(), -1.0]]).unwrap()),
        ]
    }

    #[test]
    fn constants_multiply() {
        let m = one_leaf2();
        let a = TangentialForm::constant(m.clone(), c(2.0));
        let b = TangentialForm::constant(m.clone(), Complex64::new(0.5, 1.0));
        assert_eq!(a.wedge(&b).unwrap(), TangentialForm::constant(m, Complex64::new(1.0, 2.0)));
    }

    #[test]
    fn wedge_antisymmetry_and_overflow() {
        let m = one_leaf2();
        assert!(dx(&m, 0).wedge(&dx(&m, 0)).unwrap().is_zero());
        let a = TangentialForm::term(m.clone(), LatticeMode(vec![1, 0]), MultiIndex(vec![0]), c(1.0)).unwrap();
        let b = TangentialForm::term(m.clone(), LatticeMode(vec![0, 2]), MultiIndex(vec![1]), c(1.0)).unwrap();
        let ab = a.wedge(&b).unwrap();
        assert_eq!(ab.coefficient(&LatticeMode(vec![1, 2]), &MultiIndex(vec![0, 1])), c(1.0));
        assert_eq!(b.wedge(&a).unwrap(), ab.scale(c(-1.0)));
        let vol = TangentialForm::volume(m.clone());
        assert!(matches!(vol.wedge(&dx(&m, 0)), Err(Error::DegreeOverflow { .. })));
        assert!(vol.wedge_with(&dx(&m, 0), true).unwrap().is_zero());
    }

    #[test]
    fn kronecker_differential() {
        let th = golden();
        let m = Arc::new(FoliatedTorusModel::kronecker(th).unwrap());
        let f = TangentialForm::term(m.clone(), LatticeMode(vec![3, -2]), MultiIndex::empty(), c(1.0)).unwrap();
        let df = f.d_f();
        let expected = TWO_PI * (3.0 - 2.0 * th) / (1.0 + th * th).sqrt();
        let got = df.coefficient(&LatticeMode(vec![3, -2]), &MultiIndex(vec![0]));
        assert!((got - Complex64::new(0.0, expected)).norm() < 1e-12);
        assert!(TangentialForm::constant(m, c(1.0)).d_f().is_zero());
    }

    #[test]
    fn star_conventions() {
        let m = one_leaf2();
        assert_eq!(TangentialForm::constant(m.clone(), c(1.0)).star(), TangentialForm::volume(m.clone()));
        assert_eq!(dx(&m, 0).star(), dx(&m, 1));
        assert_eq!(dx(&m, 1).star(), dx(&m, 0).scale(c(-1.0)));
    }

    #[test]
    fn laplacian_eigenvalue_on_kronecker() {
        let th = golden();
        let m = Arc::new(FoliatedTorusModel::kronecker(th).unwrap());
        let mode = LatticeMode(vec![2, 5]);
        let f = TangentialForm::term(m.clone(), mode.clone(), MultiIndex::empty(), c(1.0)).unwrap();
        let lap = f.laplacian_f();
        let expected = 4.0 * PI * PI * (2.0 + 5.0 * th).powi(2) / (1.0 + th * th);
        let got = lap.coefficient(&mode, &MultiIndex::empty()).re;
        assert!(((got - expected) / expected).abs() < 1e-10);
        assert!(TangentialForm::constant(m, c(3.0)).laplacian_f().is_zero());
    }

    #[test]
    fn inner_products_and_integration() {
        let m = one_leaf2();
        let one = TangentialForm::constant(m.clone(), c(1.0));
        assert_eq!(one.l2_inner(&one).unwrap(), 1.0);
        let e = TangentialForm::term(m.clone(), LatticeMode(vec![1, -1]), MultiIndex(vec![0]), c(1.0)).unwrap();
        assert_eq!(e.l2_inner(&e).unwrap(), 1.0);
        assert!(matches!(one.l2_inner(&e), Err(Error::DegreeMismatch { .. })));
        assert_eq!(TangentialForm::volume(m.clone()).integrate_volq().unwrap(), c(1.0));
        let osc = TangentialForm::term(m.clone(), LatticeMode(vec![1, 0]), MultiIndex::full(2), c(1.0)).unwrap();
        assert_eq!(osc.integrate_volq().unwrap(), c(0.0));
        assert!(one.integrate_volq().is_err());
    }

    #[test]
    fn reversed_orientation_keeps_normalisation() {
        let m = Arc::new(FoliatedTorusModel::one_leaf(2).with_orientation(-1).unwrap());
        assert_eq!(TangentialForm::volume(m.clone()).integrate_volq().unwrap(), c(1.0));
        let one = TangentialForm::constant(m.clone(), c(1.0));
        assert_eq!(one.star(), TangentialForm::volume(m));
    }

    #[test]
    fn cat_map_pullback_of_dx1() {
        let m = one_leaf2();
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap();
        let f = AffineFoliatedMap::endomorphism(a, vec![0.0, 0.0], m.clone()).unwrap();
        let pb = dx(&m, 0).pullback(&f).unwrap();
        let z = LatticeMode::zero(2);
        assert_eq!(pb.coefficient(&z, &MultiIndex(vec![0])), c(2.0));
        assert_eq!(pb.coefficient(&z, &MultiIndex(vec![1])), c(1.0));
    }

    #[test]
    fn translation_pullback_phase() {
        let m = Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap());
        let shift = vec![0.1, 0.35];
        let f = AffineFoliatedMap::translation(m.clone(), shift.clone()).unwrap();
        let mode = LatticeMode(vec![2, -1]);
        let e = TangentialForm::term(m.clone(), mode.clone(), MultiIndex::empty(), c(1.0)).unwrap();
        let got = e.pullback(&f).unwrap().coefficient(&mode, &MultiIndex::empty());
        let expected = Complex64::from_polar(1.0, TWO_PI * mode.dot(&shift));
        assert!((got - expected).norm() < 1e-15);
        let id = AffineFoliatedMap::identity(m);
        assert_eq!(e.pullback(&id).unwrap(), e);
    }

    #[test]
    fn json_round_trip() {
        let m = models()[2].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = TangentialForm::random_sparse(m.clone(), 1, 6, 3, false, &mut rng).unwrap();
        let text = serde_json::to_string(&f.to_json()).unwrap();
        let back: FormJson = serde_json::from_str(&text).unwrap();
        assert_eq!(TangentialForm::from_json(m, &back).unwrap(), f);
    }

    #[test]
    fn external_product_of_coordinates() {
        let a = one_leaf2();
        let prod = Arc::new(a.product(&a));
        let w = dx(&a, 1).external_product(&dx(&a, 0), prod.clone()).unwrap();
        assert_eq!(w.coefficient(&LatticeMode::zero(4), &MultiIndex(vec![1, 2])), c(1.0));
    }

    fn arb_case() -> impl Strategy<Value = (usize, u64)> {
        (0usize..3, any::<u64>())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn d_squared_vanishes((mi, seed) in arb_case()) {
            let m = models()[mi].clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..m.leaf_dim() {
                let f = TangentialForm::random_sparse(m.clone(), k, 8, 4, false, &mut rng).unwrap();
                prop_assert!(f.d_f().d_f().max_abs_coefficient() < 1e-12);
            }
        }

        #[test]
        fn leibniz((mi, seed) in arb_case()) {
            let m = models()[mi].clone();
            let p = m.leaf_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..=p {
                for l in 0..=(p - k) {
                    let a = TangentialForm::random_sparse(m.clone(), k, 5, 3, false, &mut rng).unwrap();
                    let b = TangentialForm::random_sparse(m.clone(), l, 5, 3, false, &mut rng).unwrap();
                    let lhs = a.wedge(&b).unwrap().d_f();
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let r1 = a.d_f().wedge_with(&b, true).unwrap();
                    let r2 = a.wedge_with(&b.d_f(), true).unwrap().scale(c(sign));
                    let rhs = if k + l < p { r1.add(&r2).unwrap() } else { TangentialForm::zero(m.clone(), p).unwrap() };
                    prop_assert!(lhs.sub(&rhs).unwrap().max_abs_coefficient() < 1e-12);
                }
            }
        }

        #[test]
        fn star_involution((mi, seed) in arb_case()) {
            let m = models()[mi].clone();
            let p = m.leaf_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..=p {
                let f = TangentialForm::random_sparse(m.clone(), k, 6, 3, false, &mut rng).unwrap();
                let sign = if (k * (p - k)).is_multiple_of(2) { 1.0 } else { -1.0 };
                prop_assert_eq!(f.star().star(), f.scale(c(sign)));
            }
        }

        #[test]
        fn adjointness((mi, seed) in arb_case()) {
            let m = models()[mi].clone();
            let p = m.leaf_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..p {
                let a = TangentialForm::random_sparse(m.clone(), k, 30, 2, false, &mut rng).unwrap();
                let b = TangentialForm::random_sparse(m.clone(), k + 1, 30, 2, false, &mut rng).unwrap();
                let lhs = a.d_f().hermitian_inner(&b);
                let rhs = a.hermitian_inner(&b.delta_f());
                let scale = lhs.norm().max(rhs.norm()).max(1.0);
                prop_assert!((lhs - rhs).norm() / scale < 1e-10);
            }
        }

        #[test]
        fn pullback_commutes_with_d(seed in any::<u64>()) {
            let m = Arc::new(FoliatedTorusModel::one_leaf(2));
            let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap();
            let f = AffineFoliatedMap::endomorphism(a, vec![0.25, 0.1], m.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = TangentialForm::random_sparse(m, 0, 6, 3, false, &mut rng).unwrap();
            let lhs = w.pullback(&f).unwrap().d_f();
            let rhs = w.d_f().pullback(&f).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().max_abs_coefficient() < 1e-12 * (1.0 + lhs.max_abs_coefficient()));
        }

        #[test]
        fn exact_top_forms_integrate_to_zero((mi, seed) in arb_case()) {
            let m = models()[mi].clone();
            let p = m.leaf_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eta = TangentialForm::random_sparse(m, p - 1, 8, 4, false, &mut rng).unwrap();
            prop_assert_eq!(eta.d_f().integrate_volq().unwrap(), Complex64::new(0.0, 0.0));
        }

        #[test]
        fn energy_is_nonnegative((mi, seed) in arb_case()) {
            let m = models()[mi].clone();
            let p = m.leaf_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..=p {
                let w = TangentialForm::random_sparse(m.clone(), k, 6, 3, true, &mut rng).unwrap();
                let e = w.wedge(&w.conj().star()).unwrap().integrate_volq().unwrap();
                prop_assert!(e.re >= 0.0 && e.im.abs() < 1e-12);
                prop_assert!((e.re - w.l2_norm().powi(2)).abs() < 1e-10 * (1.0 + e.re));
                prop_assert_eq!(e.re > 0.0, !w.is_zero());
            }
        }
    }
}
