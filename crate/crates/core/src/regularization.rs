//! Smoothing of forms and currents on flat foliated tori by bump kernels,
//! and the intersection product of currents as a numerical limit.
//!
//! Sign conventions, in one place:
//!
//! | quantity                      | sign                      |
//! |-------------------------------|---------------------------|
//! | `R'_ν ω`, `deg ω = k`         | `(−1)^{pk}`               |
//! | `R_ν S`, `S` of dimension `l` | `(−1)^{pl}`               |
//! | `S • T` numeric               | `(−1)^{pl} ⟨S, R_ν T ∧ η⟩` |
//! | closed form                   | `o · h · ⟨S ∩ T, η⟩`      |
//! | reference sign                | `(−1)^{k(p−k)+l(p−l)}`    |
//!
//! The intersection `S ∩ T` carries the orientation chosen in
//! [`check_transversal_submanifolds`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{minor, MultiIndex, TangentialForm};
use crate::models::{check_transversal_submanifolds, h_factor, same_model, FoliatedTorusModel, LinearSubtorus};

/// `ϱ = 1` below this radius.
pub const PROFILE_INNER: f64 = 1.0 / 3.0;
/// `ϱ = 0` above this radius.
pub const PROFILE_OUTER: f64 = 2.0 / 3.0;
/// Smallest grid resolution per unit length, in multiples of `ν`.
pub const MIN_GRID_FACTOR: usize = 4;

pub fn sign_pow(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `(−1)^{pk}` for `R'_ν` on degree `k`.
pub fn rprime_sign(p: usize, k: usize) -> f64 {
    sign_pow(p * k)
}

/// `(−1)^{pl}` for `R_ν` on a current of dimension `l`.
pub fn current_sign(p: usize, l: usize) -> f64 {
    sign_pow(p * l)
}

/// `(−1)^{k(p−k)+l(p−l)}`
pub fn reference_intersection_sign(p: usize, k: usize, l: usize) -> f64 {
    sign_pow(k * (p - k) + l * (p - l))
}

fn smooth_step_base(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff, `1` on `[0, 1/3]`, `0` on `[2/3, ∞)`.
pub fn cutoff(s: f64) -> f64 {
    let a = smooth_step_base(PROFILE_OUTER - s);
    let b = smooth_step_base(s - PROFILE_INNER);
    a / (a + b)
}

/// Area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

/// `∫_{R^d} ϱ(|y|) dy` by radial Simpson quadrature.
pub fn profile_mass(d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let inner = PROFILE_INNER.powi(d as i32) / d as f64;
    let n = 4096;
    let h = (PROFILE_OUTER - PROFILE_INNER) / n as f64;
    let f = |r: f64| cutoff(r) * r.powi(d as i32 - 1);
    let mut s = f(PROFILE_INNER) + f(PROFILE_OUTER);
    for i in 1..n {
        s += f(PROFILE_INNER + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sphere_area(d) * (inner + s * h / 3.0)
}

/// Product bump `ν^p ϱ(ν|Wᵀξ|)/m_p · ν^q ϱ(ν|Uᵀξ|)/m_q` on the fibres of `T M`.
#[derive(Clone, Debug)]
pub struct ThomBump {
    model: Arc<FoliatedTorusModel>,
    nu: f64,
    mass_p: f64,
    mass_q: f64,
}

pub fn thom_bump_form(model: Arc<FoliatedTorusModel>, nu: f64) -> Result<ThomBump> {
    if !(nu.is_finite() && nu >= 2.0) {
        return Err(Error::Regularization(format!(
            "ν = {nu} puts the support outside the injectivity radius"
        )));
    }
    let (p, q) = (model.leaf_dim(), model.codim());
    Ok(ThomBump { nu, mass_p: profile_mass(p), mass_q: profile_mass(q), model })
}

impl ThomBump {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        &self.model
    }

    /// Support radius of each factor.
    pub fn support_radius(&self) -> f64 {
        PROFILE_OUTER / self.nu
    }

    /// Coefficient of the tangential `p`-form at leaf coordinates `y`.
    pub fn tangential_factor(&self, y: &[f64]) -> f64 {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.nu.powi(y.len() as i32) * cutoff(self.nu * r) / self.mass_p
    }

    /// Transverse density at transverse coordinates `z`; `1` when `q = 0`.
    pub fn transverse_factor(&self, z: &[f64]) -> f64 {
        if z.is_empty() {
            return 1.0;
        }
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.nu.powi(z.len() as i32) * cutoff(self.nu * r) / self.mass_q
    }

    /// Kernel value at an ambient displacement `ξ`.
    pub fn density(&self, xi: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(xi);
        let y = self.model.tangential_frame().transpose() * &v;
        let z = self.model.transverse_frame().transpose() * &v;
        self.tangential_factor(y.as_slice()) * self.transverse_factor(z.as_slice())
    }

    /// Fibre integral by tensor trapezoid rules over the support box of
    /// each factor.
    pub fn fiber_integral(&self) -> f64 {
        let (p, q) = (self.model.leaf_dim(), self.model.codim());
        let r = self.support_radius();
        box_integral(p, r, |y| self.tangential_factor(y)) * if q == 0 { 1.0 } else { box_integral(q, r, |z| self.transverse_factor(z)) }
    }

    /// Normalized samples on `(1/N) Z^n`.
    pub fn discrete_kernel(&self, grid: usize) -> Result<DiscreteKernel> {
        if (grid as f64) < MIN_GRID_FACTOR as f64 * self.nu {
            return Err(Error::Regularization(format!(
                "grid {grid} under-resolves ν = {} (need at least {})",
                self.nu,
                MIN_GRID_FACTOR as f64 * self.nu
            )));
        }
        let n = self.model.ambient();
        let reach = (2f64.sqrt() * self.support_radius() * grid as f64).floor() as i64;
        let side = (2 * reach + 1) as usize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for mut k in 0..side.pow(n as u32) {
            let delta: Vec<i64> = (0..n)
                .map(|_| {
                    let d = (k % side) as i64 - reach;
                    k /= side;
                    d
                })
                .collect();
            let xi: Vec<f64> = delta.iter().map(|&d| d as f64 / grid as f64).collect();
            let v = self.density(&xi);
            if v > 0.0 {
                offsets.push(delta);
                weights.push(v);
            }
        }
        let total: f64 = weights.iter().sum();
        let raw_mass = total / (grid as f64).powi(n as i32);
        for w in &mut weights {
            *w /= total;
        }
        Ok(DiscreteKernel { grid, offsets, weights, raw_mass })
    }
}

fn box_integral(d: usize, r: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let m: usize = match d {
        1 => 4000,
        2 => 600,
        _ => 120,
    };
    let h = 2.0 * r / m as f64;
    let mut total = 0.0;
    let mut y = vec![0.0; d];
    for mut k in 0..(m + 1).pow(d as u32) {
        for yi in y.iter_mut() {
            *yi = -r + (k % (m + 1)) as f64 * h;
            k /= m + 1;
        }
        // the integrand vanishes on the box boundary, so plain sums are trapezoid sums
        total += f(&y);
    }
    total * h.powi(d as i32)
}

/// Kernel weights on grid offsets; weights sum to one.
#[derive(Clone, Debug)]
pub struct DiscreteKernel {
    grid: usize,
    offsets: Vec<Vec<i64>>,
    weights: Vec<f64>,
    /// `Σ K(δ/N) / N^n` before normalization.
    raw_mass: f64,
}

impl DiscreteKernel {
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest `|δ|/N` in the support.
    pub fn support_radius(&self) -> f64 {
        self.offsets
            .iter()
            .map(|d| d.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            / self.grid as f64
    }

    /// Eigenvalue of convolution on `e_m` (the kernel is even, so real).
    pub fn multiplier(&self, m: &[i64]) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| {
                let phase: f64 = d.iter().zip(m).map(|(a, b)| (a * b) as f64).sum();
                w * (2.0 * PI * phase / self.grid as f64).cos()
            })
            .sum()
    }
}

/// Real tangential form sampled on the grid `(1/N) Z^n`; the first
/// coordinate varies fastest.
#[derive(Clone, Debug)]
pub struct GridForm {
    model: Arc<FoliatedTorusModel>,
    degree: usize,
    grid: usize,
    components: BTreeMap<MultiIndex, Vec<f64>>,
}

fn cells(n: usize, grid: usize) -> usize {
    grid.pow(n as u32)
}

fn cell_coords(mut idx: usize, n: usize, grid: usize) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let c = (idx % grid) as i64;
            idx /= grid;
            c
        })
        .collect()
}

fn cell_index(coords: &[i64], grid: usize) -> usize {
    let g = grid as i64;
    coords.iter().rev().fold(0usize, |acc, &c| acc * grid + c.rem_euclid(g) as usize)
}

impl GridForm {
    pub fn zero(model: Arc<FoliatedTorusModel>, degree: usize, grid: usize) -> Result<Self> {
        if degree > model.leaf_dim() {
            return Err(Error::DegreeOverflow { degree, leaf_dim: model.leaf_dim() });
        }
        Ok(Self { model, degree, grid, components: BTreeMap::new() })
    }

    /// Real part of `ω` at every grid point.
    pub fn sample(form: &TangentialForm, grid: usize) -> Self {
        let model = form.model().clone();
        let n = model.ambient();
        let values: Vec<BTreeMap<MultiIndex, Complex64>> = (0..cells(n, grid))
            .into_par_iter()
            .map(|idx| {
                let x: Vec<f64> = cell_coords(idx, n, grid).iter().map(|&c| c as f64 / grid as f64).collect();
                form.evaluate(&x)
            })
            .collect();
        let mut components: BTreeMap<MultiIndex, Vec<f64>> = BTreeMap::new();
        for (idx, vals) in values.into_iter().enumerate() {
            for (i, v) in vals {
                components.entry(i).or_insert_with(|| vec![0.0; cells(n, grid)])[idx] = v.re;
            }
        }
        Self { model, degree: form.degree(), grid, components }
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        &self.model
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn component(&self, index: &MultiIndex) -> Option<&[f64]> {
        self.components.get(index).map(Vec::as_slice)
    }

    /// Coefficients at a grid cell.
    pub fn value_at(&self, coords: &[i64]) -> BTreeMap<MultiIndex, f64> {
        let idx = cell_index(coords, self.grid);
        self.components.iter().map(|(i, v)| (i.clone(), v[idx])).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in out.components.values_mut() {
            v.iter_mut().for_each(|x| *x *= s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.degree != other.degree || !same_model(&self.model, &other.model) {
            return Err(Error::ModelMismatch("grid forms on different grids or degrees".into()));
        }
        let mut out = self.clone();
        let size = cells(self.model.ambient(), self.grid);
        for (i, v) in &other.components {
            let dst = out.components.entry(i.clone()).or_insert_with(|| vec![0.0; size]);
            dst.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        Ok(out)
    }

    /// Largest coefficient difference over the grid.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: std::collections::BTreeSet<&MultiIndex> = self.components.keys().chain(other.components.keys()).collect();
        let size = cells(self.model.ambient(), self.grid);
        let zeros = vec![0.0; size];
        keys.into_iter()
            .map(|k| {
                let a = self.components.get(k).unwrap_or(&zeros);
                let b = other.components.get(k).unwrap_or(&zeros);
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Pointwise `self ∧ ω`.
    pub fn wedge_form(&self, form: &TangentialForm) -> Result<Self> {
        if !same_model(&self.model, form.model()) {
            return Err(Error::ModelMismatch("grid form and form on different models".into()));
        }
        let degree = self.degree + form.degree();
        if degree > self.model.leaf_dim() {
            return Err(Error::DegreeOverflow { degree, leaf_dim: self.model.leaf_dim() });
        }
        let sampled = GridForm::sample(form, self.grid);
        let size = cells(self.model.ambient(), self.grid);
        let mut components: BTreeMap<MultiIndex, Vec<f64>> = BTreeMap::new();
        for (i, a) in &self.components {
            for (j, b) in &sampled.components {
                if let Some((k, sign)) = i.merge(j) {
                    let dst = components.entry(k).or_insert_with(|| vec![0.0; size]);
                    for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
                        *d += sign * x * y;
                    }
                }
            }
        }
        Ok(Self { model: self.model.clone(), degree, grid: self.grid, components })
    }

    /// `∫_M β vol_Q` for a top-degree grid form (grid mean of the top coefficient).
    pub fn integrate(&self) -> Result<f64> {
        let p = self.model.leaf_dim();
        if self.degree != p {
            return Err(Error::DegreeMismatch { expected: p, found: self.degree });
        }
        let o = self.model.orientation() as f64;
        let size = cells(self.model.ambient(), self.grid) as f64;
        Ok(self.components.get(&MultiIndex::full(p)).map(|v| v.iter().sum::<f64>() / size).unwrap_or(0.0) * o)
    }

    /// `Σ_δ k_δ β(x − δ/N)`, gathered per output cell.
    pub fn convolve(&self, kernel: &DiscreteKernel) -> Result<Self> {
        if kernel.grid != self.grid {
            return Err(Error::Regularization("kernel and form use different grids".into()));
        }
        let n = self.model.ambient();
        let grid = self.grid;
        let components = self
            .components
            .iter()
            .map(|(i, values)| {
                let out: Vec<f64> = (0..cells(n, grid))
                    .into_par_iter()
                    .map(|idx| {
                        let x = cell_coords(idx, n, grid);
                        let mut shifted = x.clone();
                        kernel
                            .offsets
                            .iter()
                            .zip(&kernel.weights)
                            .map(|(d, w)| {
                                for a in 0..n {
                                    shifted[a] = x[a] - d[a];
                                }
                                w * values[cell_index(&shifted, grid)]
                            })
                            .sum()
                    })
                    .collect();
                (i.clone(), out)
            })
            .collect();
        Ok(Self { model: self.model.clone(), degree: self.degree, grid, components })
    }
}

/// `R'_ν ω = (−1)^{pk} K_ν * ω` on the grid.
pub fn smooth_form_rprime(form: &TangentialForm, nu: f64, grid: usize) -> Result<GridForm> {
    let bump = thom_bump_form(form.model().clone(), nu)?;
    let kernel = bump.discrete_kernel(grid)?;
    let p = form.model().leaf_dim();
    Ok(GridForm::sample(form, grid).convolve(&kernel)?.scale(rprime_sign(p, form.degree())))
}

/// Eigenvalue of `R'_ν` on `e_m θ^I` with `|I| = k`.
pub fn rprime_multiplier(model: &Arc<FoliatedTorusModel>, nu: f64, grid: usize, m: &[i64], k: usize) -> Result<f64> {
    let kernel = thom_bump_form(model.clone(), nu)?.discrete_kernel(grid)?;
    Ok(rprime_sign(model.leaf_dim(), k) * kernel.multiplier(m))
}

/// A tangential current on a flat model.
#[derive(Clone, Debug)]
pub enum GridCurrent {
    /// `weight · ∫_S`, pairing with forms of degree `leaf_dim(S)`.
    Subtorus { torus: LinearSubtorus, weight: f64 },
    /// `α ↦ ∫_M ω ∧ α vol_Q`.
    Form { form: TangentialForm },
}

fn frame_minors(model: &FoliatedTorusModel, frame: &DMatrix<f64>) -> BTreeMap<MultiIndex, f64> {
    let wf = model.tangential_frame().transpose() * frame;
    let cols: Vec<usize> = (0..frame.ncols()).collect();
    MultiIndex::all(model.leaf_dim(), frame.ncols())
        .into_iter()
        .map(|i| {
            let v = minor(&wf, i.indices(), &cols);
            (i, v)
        })
        .collect()
}

impl GridCurrent {
    pub fn subtorus(torus: LinearSubtorus) -> Self {
        GridCurrent::Subtorus { torus, weight: 1.0 }
    }

    pub fn form(form: TangentialForm) -> Self {
        GridCurrent::Form { form }
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        match self {
            GridCurrent::Subtorus { torus, .. } => torus.model(),
            GridCurrent::Form { form } => form.model(),
        }
    }

    /// Degree of the test forms it pairs with.
    pub fn dimension(&self) -> usize {
        match self {
            GridCurrent::Subtorus { torus, .. } => torus.leaf_dim(),
            GridCurrent::Form { form } => form.model().leaf_dim() - form.degree(),
        }
    }

    /// Exact pairing with a trigonometric form.
    pub fn pair(&self, alpha: &TangentialForm) -> Result<f64> {
        if !same_model(self.model(), alpha.model()) {
            return Err(Error::ModelMismatch("current and form on different models".into()));
        }
        if alpha.degree() != self.dimension() {
            return Err(Error::DegreeMismatch { expected: self.dimension(), found: alpha.degree() });
        }
        match self {
            GridCurrent::Form { form } => Ok(form.wedge(alpha)?.integrate_volq()?.re),
            GridCurrent::Subtorus { torus, weight } => {
                let lt = torus.lattice().transpose();
                let minors = frame_minors(torus.model(), torus.leaf_frame());
                let s0 = torus.basepoint();
                let mut total = Complex64::new(0.0, 0.0);
                for (m, i, c) in alpha.terms() {
                    let lm: Vec<i128> = lt.mul_vec(&m.0.iter().map(|&x| x as i128).collect::<Vec<_>>());
                    if lm.iter().all(|&v| v == 0) {
                        total += c * Complex64::from_polar(1.0, 2.0 * PI * m.dot(s0)) * minors[i];
                    }
                }
                Ok(weight * torus.orientation() as f64 * torus.cell_measure() * total.re)
            }
        }
    }

    /// Pairing with a grid-sampled form (subtori are sampled on grid points).
    pub fn pair_grid(&self, beta: &GridForm) -> Result<f64> {
        if !same_model(self.model(), beta.model()) {
            return Err(Error::ModelMismatch("current and grid form on different models".into()));
        }
        if beta.degree() != self.dimension() {
            return Err(Error::DegreeMismatch { expected: self.dimension(), found: beta.degree() });
        }
        match self {
            GridCurrent::Form { form } => {
                let sampled = GridForm::sample(form, beta.grid());
                let mut wedge = sampled.clone();
                wedge.degree = form.degree() + beta.degree();
                wedge.components.clear();
                let size = cells(form.model().ambient(), beta.grid());
                for (i, a) in &sampled.components {
                    for (j, b) in &beta.components {
                        if let Some((k, sign)) = i.merge(j) {
                            let dst = wedge.components.entry(k).or_insert_with(|| vec![0.0; size]);
                            for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
                                *d += sign * x * y;
                            }
                        }
                    }
                }
                wedge.integrate()
            }
            GridCurrent::Subtorus { torus, weight } => {
                let grid = beta.grid();
                let minors = frame_minors(torus.model(), torus.leaf_frame());
                let points = subtorus_grid_points(torus, grid)?;
                let sum: f64 = points
                    .iter()
                    .map(|x| beta.value_at(x).iter().map(|(i, v)| v * minors[i]).sum::<f64>())
                    .sum();
                let count = points.len() as f64;
                Ok(weight * torus.orientation() as f64 * torus.cell_measure() * sum / count)
            }
        }
    }
}

/// Grid cells `N s0 + L j`, `j ∈ {0..N}^d`.
fn subtorus_grid_points(torus: &LinearSubtorus, grid: usize) -> Result<Vec<Vec<i64>>> {
    let n = torus.model().ambient();
    let base: Vec<i64> = torus
        .basepoint()
        .iter()
        .map(|&s| {
            let v = s * grid as f64;
            if (v - v.round()).abs() > 1e-9 {
                Err(Error::Regularization("subtorus basepoint is not on the grid".into()))
            } else {
                Ok(v.round() as i64)
            }
        })
        .collect::<Result<_>>()?;
    let d = torus.dim();
    let l = torus.lattice();
    let g = grid as i64;
    Ok((0..cells(d, grid))
        .map(|k| {
            let j = cell_coords(k, d, grid);
            (0..n)
                .map(|i| (base[i] + (0..d).map(|a| l[(i, a)] as i64 * j[a]).sum::<i64>()).rem_euclid(g))
                .collect()
        })
        .collect())
}

/// `R_ν S`: for subtori `(−1)^{pl} o σ ρ_S ν_S` with `ρ_S` the smeared delta
/// and `ν_S ∧ α = α(f_S) θ^full`; for form currents `(−1)^{pl} K_ν * ω`.
pub fn regularize_current(current: &GridCurrent, nu: f64, grid: usize) -> Result<GridForm> {
    let model = current.model().clone();
    let (n, p) = (model.ambient(), model.leaf_dim());
    let l = current.dimension();
    let sign = current_sign(p, l);
    let kernel = thom_bump_form(model.clone(), nu)?.discrete_kernel(grid)?;
    match current {
        GridCurrent::Form { form } => Ok(GridForm::sample(form, grid).convolve(&kernel)?.scale(sign)),
        GridCurrent::Subtorus { torus, weight } => {
            let points = subtorus_grid_points(torus, grid)?;
            // ρ_S(x) = Σ K(x − S(τ)) · covol / N^d  with K ≈ N^n k_δ
            let scale = (grid as f64).powi(n as i32) * torus.cell_measure() / points.len() as f64;
            let size = cells(n, grid);
            let mut rho = vec![0.0; size];
            let mut shifted = vec![0i64; n];
            for x in &points {
                for (d, w) in kernel.offsets().iter().zip(kernel.weights()) {
                    for a in 0..n {
                        shifted[a] = x[a] + d[a];
                    }
                    rho[cell_index(&shifted, grid)] += w * scale;
                }
            }
            let minors = frame_minors(&model, torus.leaf_frame());
            let factor = sign * model.orientation() as f64 * torus.orientation() as f64 * weight;
            let mut components = BTreeMap::new();
            for (i, det) in minors {
                let ic = i.complement(p);
                let (_, eps) = ic.merge(&i).expect("complementary indices");
                let c = factor * eps * det;
                if c != 0.0 {
                    components.insert(ic, rho.iter().map(|r| r * c).collect::<Vec<f64>>());
                }
            }
            Ok(GridForm { model, degree: p - l, grid, components })
        }
    }
}

/// Values per `ν` with a repeated Richardson extrapolation in `ν⁻²`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSequence {
    pub nus: Vec<f64>,
    pub values: Vec<f64>,
    /// Last diagonal entry of the extrapolation table.
    pub limit: f64,
    /// Difference between the two highest-order extrapolations.
    pub error_estimate: f64,
    /// Diagonal of the extrapolation table.
    pub extrapolations: Vec<f64>,
}

pub fn richardson(nus: &[f64], values: &[f64]) -> ConvergenceSequence {
    let m = values.len();
    let mut table: Vec<Vec<f64>> = vec![values.to_vec()];
    for j in 1..m {
        let prev = &table[j - 1];
        let col: Vec<f64> = (j..m)
            .map(|i| {
                let a = prev[i - j + 1];
                let b = prev[i - j];
                let r = (nus[i] / nus[i - j]).powi(2);
                a + (a - b) / (r - 1.0)
            })
            .collect();
        table.push(col);
    }
    let extrapolations: Vec<f64> = table.iter().map(|c| *c.last().unwrap_or(&f64::NAN)).collect();
    let limit = *extrapolations.last().unwrap_or(&f64::NAN);
    let error_estimate = if m >= 2 { (extrapolations[m - 1] - extrapolations[m - 2]).abs() } else { f64::INFINITY };
    ConvergenceSequence { nus: nus.to_vec(), values: values.to_vec(), limit, error_estimate, extrapolations }
}

fn lattice_stretch(c: &GridCurrent) -> usize {
    match c {
        GridCurrent::Subtorus { torus, .. } => {
            torus.lattice().to_rows().iter().flatten().map(|x| x.unsigned_abs() as usize).max().unwrap_or(1).max(1)
        }
        GridCurrent::Form { .. } => 1,
    }
}

fn check_nus(nus: &[f64]) -> Result<()> {
    if nus.is_empty() || nus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("ν sequence must be nonempty and increasing".into()));
    }
    Ok(())
}

/// `(−1)^{pl} ⟨S, R_ν T ∧ η⟩` for each `ν`, on grids of `grid_factor · ν` points per unit.
pub fn intersection_product_numeric(
    s: &GridCurrent,
    t: &GridCurrent,
    eta: &TangentialForm,
    nus: &[f64],
    grid_factor: usize,
) -> Result<ConvergenceSequence> {
    check_nus(nus)?;
    let model = s.model();
    if !same_model(model, t.model()) || !same_model(model, eta.model()) {
        return Err(Error::ModelMismatch("currents and test form on different models".into()));
    }
    let p = model.leaf_dim();
    let (k, l) = (s.dimension(), t.dimension());
    if k + l < p || eta.degree() != k + l - p {
        return Err(Error::DegreeMismatch { expected: (k + l).saturating_sub(p), found: eta.degree() });
    }
    if let (GridCurrent::Subtorus { torus: a, .. }, GridCurrent::Subtorus { torus: b, .. }) = (s, t) {
        let report = check_transversal_submanifolds(a, b)?;
        if report.intersects && !report.transversal {
            return Err(Error::NotTransversal("subtori meet non-transversally".into()));
        }
    }
    let sign = current_sign(p, l);
    // subtori are sampled with step |L e_j|/N, so long directions need finer grids
    let stretch = lattice_stretch(s).max(lattice_stretch(t));
    let values = nus
        .iter()
        .map(|&nu| {
            let grid = (grid_factor.max(MIN_GRID_FACTOR) as f64 * nu).round() as usize * stretch;
            let r = regularize_current(t, nu, grid)?;
            Ok(sign * s.pair_grid(&r.wedge_form(eta)?)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(richardson(nus, &values))
}

/// Closed form of `S • T` paired with `η`.
#[derive(Clone, Debug, Serialize)]
pub struct IntersectionClosedForm {
    pub value: f64,
    pub h: f64,
    pub components: usize,
    /// `o · ε` for each component.
    pub component_signs: Vec<i8>,
    pub reference_sign: f64,
    pub reference_sign_agrees: bool,
}

pub fn intersection_closed_form(s: &GridCurrent, t: &GridCurrent, eta: &TangentialForm) -> Result<IntersectionClosedForm> {
    let model = s.model();
    let p = model.leaf_dim();
    let (k, l) = (s.dimension(), t.dimension());
    if k + l < p || eta.degree() != k + l - p {
        return Err(Error::DegreeMismatch { expected: (k + l).saturating_sub(p), found: eta.degree() });
    }
    let reference_sign = reference_intersection_sign(p, k, l);
    match (s, t) {
        (GridCurrent::Form { form: a }, GridCurrent::Form { form: b }) => {
            let value = GridCurrent::form(a.wedge(b)?).pair(eta)?;
            Ok(IntersectionClosedForm {
                value,
                h: 1.0,
                components: 1,
                component_signs: vec![1],
                reference_sign,
                reference_sign_agrees: true,
            })
        }
        (GridCurrent::Subtorus { torus: a, weight: wa }, GridCurrent::Subtorus { torus: b, weight: wb }) => {
            let report = check_transversal_submanifolds(a, b)?;
            if !report.intersects {
                return Ok(IntersectionClosedForm {
                    value: 0.0,
                    h: f64::NAN,
                    components: 0,
                    component_signs: Vec::new(),
                    reference_sign,
                    reference_sign_agrees: true,
                });
            }
            if !report.transversal {
                return Err(Error::NotTransversal("closed form needs a transversal pair".into()));
            }
            let h = h_factor(a, b)?;
            let o = model.orientation() as f64;
            let mut value = 0.0;
            let mut component_signs = Vec::new();
            for c in &report.components {
                value += GridCurrent::subtorus(c.clone()).pair(eta)?;
                component_signs.push((o as i8) * c.orientation());
            }
            Ok(IntersectionClosedForm {
                value: wa * wb * o * h * value,
                h,
                components: report.components.len(),
                reference_sign_agrees: component_signs.iter().all(|&c| c as f64 == reference_sign),
                component_signs,
                reference_sign,
            })
        }
        _ => Err(Error::Unsupported("closed form for mixed subtorus and form currents".into())),
    }
}

/// Convergence of `R_ν S` paired with `ω` towards `(−1)^{pk} ⟨S, ω⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct CurrentConvergence {
    pub nus: Vec<f64>,
    pub values: Vec<f64>,
    pub target: f64,
    pub errors: Vec<f64>,
}

/// `∫_M R_ν S ∧ ω vol_Q` for each `ν` against `(−1)^{pk} ⟨S, ω⟩`.
pub fn current_regularization_convergence(
    current: &GridCurrent,
    omega: &TangentialForm,
    nus: &[f64],
    grids: &[usize],
) -> Result<CurrentConvergence> {
    check_nus(nus)?;
    if grids.len() != nus.len() {
        return Err(Error::Config("one grid per ν is required".into()));
    }
    let p = current.model().leaf_dim();
    let target = current_sign(p, current.dimension()) * current.pair(omega)?;
    let values = nus
        .iter()
        .zip(grids)
        .map(|(&nu, &g)| regularize_current(current, nu, g)?.wedge_form(omega)?.integrate())
        .collect::<Result<Vec<f64>>>()?;
    let errors = values.iter().map(|v| (v - target).abs()).collect();
    Ok(CurrentConvergence { nus: nus.to_vec(), values, target, errors })
}
