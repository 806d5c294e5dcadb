//! Trigonometric vector fields on flat tori and the foliated covariant
//! derivative.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forms::{LatticeMode, PRUNE_FLOOR};
use crate::models::{same_model, FoliatedTorusModel, FOLIATED_TOL};

const TWO_PI: f64 = 2.0 * PI;

/// Finite Fourier series `Σ c_m e^{2πi m·x}` on `T^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    n: usize,
    coeffs: BTreeMap<LatticeMode, Complex64>,
}

impl TrigPoly {
    pub fn zero(n: usize) -> Self {
        Self { n, coeffs: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(LatticeMode::zero(n), Complex64::new(c, 0.0));
        p
    }

    pub fn exp_mode(mode: Vec<i64>, c: Complex64) -> Self {
        let mut p = Self::zero(mode.len());
        p.add_term(LatticeMode(mode), c);
        p
    }

    /// `a · sin(2π m·x)`
    pub fn sin(mode: Vec<i64>, a: f64) -> Self {
        let m = LatticeMode(mode);
        let mut p = Self::zero(m.0.len());
        p.add_term(m.neg(), Complex64::new(0.0, a / 2.0));
        p.add_term(m, Complex64::new(0.0, -a / 2.0));
        p
    }

    /// `a · cos(2π m·x)`
    pub fn cos(mode: Vec<i64>, a: f64) -> Self {
        let m = LatticeMode(mode);
        let mut p = Self::zero(m.0.len());
        p.add_term(m.neg(), Complex64::new(a / 2.0, 0.0));
        p.add_term(m, Complex64::new(a / 2.0, 0.0));
        p
    }

    pub fn add_term(&mut self, m: LatticeMode, c: Complex64) {
        *self.coeffs.entry(m).or_default() += c;
        self.coeffs.retain(|_, c| c.norm() >= PRUNE_FLOOR);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LatticeMode, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            *out.coeffs.entry(m.clone()).or_default() += c;
        }
        out.coeffs.retain(|_, c| c.norm() >= PRUNE_FLOOR);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out.coeffs.retain(|_, c| c.norm() >= PRUNE_FLOOR);
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n);
        for (m1, c1) in &self.coeffs {
            for (m2, c2) in &other.coeffs {
                *out.coeffs.entry(m1.add(m2)).or_default() += c1 * c2;
            }
        }
        out.coeffs.retain(|_, c| c.norm() >= PRUNE_FLOOR);
        out
    }

    /// Derivative along the constant vector `v`.
    pub fn derivative(&self, v: &[f64]) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.coeffs {
            let f = TWO_PI * m.dot(v);
            if f != 0.0 {
                out.coeffs.insert(m.clone(), c * Complex64::new(0.0, f));
            }
        }
        out.coeffs.retain(|_, c| c.norm() >= PRUNE_FLOOR);
        out
    }

    pub fn partial(&self, a: usize) -> Self {
        let mut e = vec![0.0; self.n];
        e[a] = 1.0;
        self.derivative(&e)
    }

    pub fn eval_complex(&self, x: &[f64]) -> Complex64 {
        self.coeffs.iter().map(|(m, c)| c * Complex64::from_polar(1.0, TWO_PI * m.dot(x))).sum()
    }

    /// Real part of the value at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_complex(x).re
    }
}

/// Vector field with trigonometric components in the ambient frame.
#[derive(Clone, Debug)]
pub struct FoliatedVectorField {
    model: Arc<FoliatedTorusModel>,
    components: Vec<TrigPoly>,
    /// `∂_b X^a`, cached for integration.
    partials: Vec<Vec<TrigPoly>>,
    leafwise_variation: f64,
}

impl FoliatedVectorField {
    pub fn new(model: Arc<FoliatedTorusModel>, components: Vec<TrigPoly>) -> Result<Self> {
        let n = model.ambient();
        if components.len() != n || components.iter().any(|c| c.dim() != n) {
            return Err(Error::ModelMismatch("vector field components do not match the model".into()));
        }
        let mut field = Self::raw(model, components);
        field.leafwise_variation = field.transverse_variation();
        Ok(field)
    }

    fn raw(model: Arc<FoliatedTorusModel>, components: Vec<TrigPoly>) -> Self {
        let n = model.ambient();
        let partials = components.iter().map(|c| (0..n).map(|b| c.partial(b)).collect()).collect();
        Self { model, components, partials, leafwise_variation: 0.0 }
    }

    /// Constant field `v`.
    pub fn constant(model: Arc<FoliatedTorusModel>, v: &[f64]) -> Result<Self> {
        let n = model.ambient();
        Self::new(model, v.iter().map(|&c| TrigPoly::constant(n, c)).collect())
    }

    /// `X = (sin 2πx, sin 2πy) / (2π)` on a two-dimensional model.
    pub fn morse(model: Arc<FoliatedTorusModel>) -> Result<Self> {
        if model.ambient() != 2 {
            return Err(Error::InvalidModel("the Morse field lives on T^2".into()));
        }
        let a = 1.0 / TWO_PI;
        Self::new(model, vec![TrigPoly::sin(vec![1, 0], a), TrigPoly::sin(vec![0, 1], a)])
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        &self.model
    }

    pub fn components(&self) -> &[TrigPoly] {
        &self.components
    }

    /// Transverse part depends only on transverse coordinates.
    pub fn is_foliated(&self) -> bool {
        self.leafwise_variation <= FOLIATED_TOL
    }

    pub fn leafwise_variation(&self) -> f64 {
        self.leafwise_variation
    }

    fn transverse_variation(&self) -> f64 {
        let q = self.model.codim();
        if q == 0 {
            return 0.0;
        }
        let proj = self.projected(&projector(self.model.transverse_frame()));
        let w = self.model.tangential_frame();
        let mut worst: f64 = 0.0;
        for comp in &proj.components {
            for j in 0..w.ncols() {
                let wj: Vec<f64> = w.column(j).iter().copied().collect();
                worst = worst.max(comp.derivative(&wj).max_abs_coefficient());
            }
        }
        worst
    }

    fn projected(&self, p: &DMatrix<f64>) -> Self {
        let n = self.model.ambient();
        let components = (0..n)
            .map(|a| {
                (0..n).fold(TrigPoly::zero(n), |acc, b| {
                    if p[(a, b)] == 0.0 {
                        acc
                    } else {
                        acc.add(&self.components[b].scale(p[(a, b)]))
                    }
                })
            })
            .collect();
        Self::raw(self.model.clone(), components)
    }

    /// `X_F`
    pub fn tangential_part(&self) -> Self {
        self.projected(&projector(self.model.tangential_frame()))
    }

    /// `X_Q`
    pub fn transverse_part(&self) -> Self {
        self.projected(&projector(self.model.transverse_frame()))
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|c| c.eval(x)))
    }

    /// `∂_b X^a`
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.model.ambient();
        DMatrix::from_fn(n, n, |a, b| self.partials[a][b].eval(x))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !same_model(&self.model, &other.model) {
            return Err(Error::ModelMismatch("vector fields on different models".into()));
        }
        let comps = self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect();
        Self::new(self.model.clone(), comps)
    }

    /// Multiplication by a scalar function.
    pub fn mul_function(&self, f: &TrigPoly) -> Result<Self> {
        Self::new(self.model.clone(), self.components.iter().map(|c| c.mul(f)).collect())
    }

    /// `V f = Σ_a V^a ∂_a f`
    pub fn apply(&self, f: &TrigPoly) -> TrigPoly {
        let n = self.model.ambient();
        (0..n).fold(TrigPoly::zero(n), |acc, a| acc.add(&self.components[a].mul(&f.partial(a))))
    }

    pub fn inner(&self, other: &Self) -> TrigPoly {
        let n = self.model.ambient();
        (0..n).fold(TrigPoly::zero(n), |acc, a| acc.add(&self.components[a].mul(&other.components[a])))
    }

    /// `[A, B]^a = A(B^a) − B(A^a)`
    pub fn bracket(&self, other: &Self) -> Self {
        let comps = (0..self.model.ambient())
            .map(|a| self.apply(&other.components[a]).sub(&other.apply(&self.components[a])))
            .collect();
        Self::raw(self.model.clone(), comps)
    }
}

fn projector(frame: &DMatrix<f64>) -> DMatrix<f64> {
    frame * frame.transpose()
}

/// `∇_X Y` from the twelve-term formula, tested against every constant `Z = e_b`.
pub fn covariant_derivative(x: &FoliatedVectorField, y: &FoliatedVectorField) -> Result<FoliatedVectorField> {
    if !same_model(&x.model, &y.model) {
        return Err(Error::ModelMismatch("vector fields on different models".into()));
    }
    if !y.is_foliated() {
        return Err(Error::FieldNotFoliated { residual: y.leafwise_variation });
    }
    let model = x.model.clone();
    let n = model.ambient();
    let pf = projector(model.tangential_frame());
    let pq = projector(model.transverse_frame());
    let (yf, yq) = (y.tangential_part(), y.transverse_part());
    let xq = x.transverse_part();
    let mut out = Vec::with_capacity(n);
    for b in 0..n {
        let zf_vec: Vec<f64> = (0..n).map(|a| pf[(a, b)]).collect();
        let zq_vec: Vec<f64> = (0..n).map(|a| pq[(a, b)]).collect();
        let zf = FoliatedVectorField::constant(model.clone(), &zf_vec)?;
        let zq = FoliatedVectorField::constant(model.clone(), &zq_vec)?;

        let mut sum = x.apply(&yf.inner(&zf));
        sum = sum.add(&yf.apply(&zf.inner(x)));
        sum = sum.sub(&zf.apply(&yf.inner(x)));
        sum = sum.add(&x.inner(&zf.bracket(&yf)));
        sum = sum.add(&yf.inner(&zf.bracket(x)));
        sum = sum.sub(&zf.inner(&yf.bracket(x)));

        sum = sum.add(&xq.apply(&yq.inner(&zq)));
        sum = sum.add(&yq.apply(&zq.inner(&xq)));
        sum = sum.sub(&zq.apply(&yq.inner(&xq)));
        sum = sum.add(&xq.inner(&zq.bracket(&yq)));
        sum = sum.add(&yq.inner(&zq.bracket(&xq)));
        sum = sum.sub(&zq.inner(&yq.bracket(&xq)));
        out.push(sum.scale(0.5));
    }
    FoliatedVectorField::new(model, out)
}
