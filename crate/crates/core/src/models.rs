//! Flat model geometries: linear foliations of tori, suspensions of integer
//! matrices, affine foliated maps and linear subtori.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, IntMatrix};
use crate::linalg;

/// Injectivity radius of the exponential map of a flat unit torus.
pub const INJECTIVITY_RADIUS: f64 = 0.5;

/// Tolerance of the foliated-map test `B·span(W) ⊆ span(W)`.
pub const FOLIATED_TOL: f64 = 1e-12;

pub(crate) fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

pub(crate) fn wrap_point(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| wrap(v)).collect()
}

/// Linear foliation of the flat unit torus `R^n / Z^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FoliatedTorusModel {
    n: usize,
    w: DMatrix<f64>,
    u: DMatrix<f64>,
    orientation: i8,
}

impl FoliatedTorusModel {
    /// Gram–Schmidt over the tangential directions, then completion by the
    /// standard basis to a transverse frame with `det[w, u] = +1`.
    pub fn new(n: usize, directions: &[Vec<f64>]) -> Result<Self> {
        if directions.len() > n {
            return Err(Error::DependentDirections);
        }
        let mut dirs = Vec::with_capacity(directions.len());
        for d in directions {
            if d.len() != n {
                return Err(Error::InvalidModel(format!(
                    "direction {d:?} does not have length {n}"
                )));
            }
            if d.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel("non-finite direction".into()));
            }
            dirs.push(DVector::from_column_slice(d));
        }
        let w = linalg::gram_schmidt(&dirs, 1e-10);
        if w.len() < dirs.len() {
            return Err(Error::DependentDirections);
        }
        let w = linalg::from_columns(n, &w);
        let mut u = linalg::complement(&w);
        if u.ncols() > 0 {
            let full = DMatrix::from_fn(n, n, |i, j| {
                if j < w.ncols() {
                    w[(i, j)]
                } else {
                    u[(i, j - w.ncols())]
                }
            });
            if linalg::det(&full) < 0.0 {
                let last = u.ncols() - 1;
                u.column_mut(last).neg_mut();
            }
        }
        Ok(Self { n, w, u, orientation: 1 })
    }

    /// Single leaf: `p = n`, standard frame.
    pub fn one_leaf(n: usize) -> Self {
        Self { n, w: DMatrix::identity(n, n), u: DMatrix::zeros(n, 0), orientation: 1 }
    }

    /// The zero-dimensional model.
    pub fn point() -> Self {
        Self::one_leaf(0)
    }

    /// Lines of slope `theta` on `T^2`.
    pub fn kronecker(theta: f64) -> Result<Self> {
        Self::new(2, &[vec![1.0, theta]])
    }

    pub fn with_orientation(mut self, orientation: i8) -> Result<Self> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidModel("orientation must be +1 or -1".into()));
        }
        self.orientation = orientation;
        Ok(self)
    }

    /// Product foliation on `T^{n1+n2}` with block-diagonal frames.
    pub fn product(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let (p1, p2) = (self.leaf_dim(), other.leaf_dim());
        let (q1, q2) = (self.codim(), other.codim());
        let mut w = DMatrix::zeros(n, p1 + p2);
        w.view_mut((0, 0), (self.n, p1)).copy_from(&self.w);
        w.view_mut((self.n, p1), (other.n, p2)).copy_from(&other.w);
        let mut u = DMatrix::zeros(n, q1 + q2);
        u.view_mut((0, 0), (self.n, q1)).copy_from(&self.u);
        u.view_mut((self.n, q1), (other.n, q2)).copy_from(&other.u);
        Self { n, w, u, orientation: self.orientation * other.orientation }
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn leaf_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn codim(&self) -> usize {
        self.u.ncols()
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    /// Columns `w_1 … w_p`.
    pub fn tangential_frame(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Columns `u_1 … u_q`.
    pub fn transverse_frame(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `⟨m, w_j⟩` for `j = 1..p`.
    pub fn leaf_components(&self, m: &[i64]) -> Vec<f64> {
        (0..self.leaf_dim())
            .map(|j| (0..self.n).map(|i| self.w[(i, j)] * m[i] as f64).sum())
            .collect()
    }

    /// Largest deviation of `[w, u]` from an orthonormal basis.
    pub fn frame_defect(&self) -> f64 {
        let full = DMatrix::from_fn(self.n, self.n, |i, j| {
            if j < self.leaf_dim() {
                self.w[(i, j)]
            } else {
                self.u[(i, j - self.leaf_dim())]
            }
        });
        let g = full.transpose() * &full - DMatrix::identity(self.n, self.n);
        g.amax()
    }

    pub fn description(&self) -> ModelDescription {
        ModelDescription {
            ambient: self.n,
            tangential: linalg::to_rows(&self.w.transpose()),
            kind: ModelKind::Torus,
            monodromy: None,
            orientation: Some(self.orientation),
        }
    }

    /// `exp(x, ξ) = x + ξ mod 1`.
    pub fn exp(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        x.iter().zip(xi).map(|(a, b)| wrap(a + b)).collect()
    }

    /// Parallel transport along any path is the identity in the global frame.
    pub fn parallel_transport(&self, _path: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    pub fn injectivity_radius(&self) -> f64 {
        INJECTIVITY_RADIUS
    }
}

pub fn make_torus_model(n: usize, directions: &[Vec<f64>]) -> Result<Arc<FoliatedTorusModel>> {
    FoliatedTorusModel::new(n, directions).map(Arc::new)
}

pub(crate) fn same_model(a: &Arc<FoliatedTorusModel>, b: &Arc<FoliatedTorusModel>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Torus,
    Suspension,
}

/// JSON description of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub ambient: usize,
    #[serde(default)]
    pub tangential: Vec<Vec<f64>>,
    #[serde(rename = "type")]
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<i8>,
}

#[derive(Clone, Debug)]
pub enum Model {
    Torus(Arc<FoliatedTorusModel>),
    Suspension(Arc<SuspensionModel>),
}

impl ModelDescription {
    pub fn build(&self) -> Result<Model> {
        match self.kind {
            ModelKind::Torus => {
                let m = FoliatedTorusModel::new(self.ambient, &self.tangential)?
                    .with_orientation(self.orientation.unwrap_or(1))?;
                Ok(Model::Torus(Arc::new(m)))
            }
            ModelKind::Suspension => {
                let a = self.monodromy.as_ref().ok_or_else(|| {
                    Error::InvalidModel("suspension model needs a monodromy matrix".into())
                })?;
                let m = SuspensionModel::new(IntMatrix::from_rows(a)?)?;
                if m.fiber_dim() + 1 != self.ambient {
                    return Err(Error::InvalidModel(format!(
                        "suspension of a {}x{} matrix has ambient dimension {}",
                        m.fiber_dim(),
                        m.fiber_dim(),
                        m.fiber_dim() + 1
                    )));
                }
                Ok(Model::Suspension(Arc::new(m)))
            }
        }
    }
}

/// Mapping torus of an integer matrix `A`: `T^d × R / (x, s+1) ~ (A x, s)`,
/// foliated by the fibres.
#[derive(Clone, Debug, PartialEq)]
pub struct SuspensionModel {
    a: IntMatrix,
    a_inv: IntMatrix,
    hyperbolic: bool,
}

impl SuspensionModel {
    pub fn new(a: IntMatrix) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::InvalidModel("monodromy must be a nonempty square matrix".into()));
        }
        let a_inv = a.unimodular_inverse()?;
        let hyperbolic = is_hyperbolic(&a);
        Ok(Self { a, a_inv, hyperbolic })
    }

    pub fn cat_map() -> Self {
        Self::new(IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap()).unwrap()
    }

    pub fn fiber_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn ambient(&self) -> usize {
        self.a.rows() + 1
    }

    /// Foliated dimension `(d, 1)`.
    pub fn foliated_dims(&self) -> (usize, usize) {
        (self.a.rows(), 1)
    }

    pub fn monodromy(&self) -> &IntMatrix {
        &self.a
    }

    pub fn monodromy_inverse(&self) -> &IntMatrix {
        &self.a_inv
    }

    /// No eigenvalue on the unit circle.
    pub fn is_hyperbolic(&self) -> bool {
        self.hyperbolic
    }

    pub fn description(&self) -> ModelDescription {
        let d = self.fiber_dim();
        let mut tangential = vec![vec![0.0; d + 1]; d];
        for (i, row) in tangential.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        ModelDescription {
            ambient: d + 1,
            tangential,
            kind: ModelKind::Suspension,
            monodromy: Some(self.a.to_rows()),
            orientation: None,
        }
    }
}

fn is_hyperbolic(a: &IntMatrix) -> bool {
    let m = a.to_f64();
    m.complex_eigenvalues().iter().all(|z| (z.norm() - 1.0).abs() > 1e-9)
}

/// Outcome of the foliated-map test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FoliationCheck {
    pub foliated: bool,
    pub residual: f64,
}

/// `x ↦ B x + c` between flat models.
#[derive(Clone, Debug)]
pub struct AffineFoliatedMap {
    b: IntMatrix,
    c: Vec<f64>,
    domain: Arc<FoliatedTorusModel>,
    codomain: Arc<FoliatedTorusModel>,
    check: FoliationCheck,
    invertible: bool,
}

impl AffineFoliatedMap {
    pub fn new(
        b: IntMatrix,
        c: Vec<f64>,
        domain: Arc<FoliatedTorusModel>,
        codomain: Arc<FoliatedTorusModel>,
    ) -> Result<Self> {
        if b.rows() != codomain.ambient() || b.cols() != domain.ambient() {
            return Err(Error::ModelMismatch(format!(
                "matrix is {}x{} but models have ambient dimensions {} -> {}",
                b.rows(),
                b.cols(),
                domain.ambient(),
                codomain.ambient()
            )));
        }
        if c.len() != codomain.ambient() {
            return Err(Error::ModelMismatch("translation has the wrong length".into()));
        }
        let residual = foliated_residual(&b, &domain, &codomain);
        let invertible = b.is_square() && b.det() != 0;
        Ok(Self {
            b,
            c,
            domain,
            codomain,
            check: FoliationCheck { foliated: residual <= FOLIATED_TOL, residual },
            invertible,
        })
    }

    pub fn endomorphism(b: IntMatrix, c: Vec<f64>, model: Arc<FoliatedTorusModel>) -> Result<Self> {
        Self::new(b, c, model.clone(), model)
    }

    pub fn identity(model: Arc<FoliatedTorusModel>) -> Self {
        let n = model.ambient();
        Self::endomorphism(IntMatrix::identity(n), vec![0.0; n], model).unwrap()
    }

    pub fn translation(model: Arc<FoliatedTorusModel>, c: Vec<f64>) -> Result<Self> {
        let n = model.ambient();
        Self::endomorphism(IntMatrix::identity(n), c, model)
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.b
    }

    pub fn translation_part(&self) -> &[f64] {
        &self.c
    }

    pub fn domain(&self) -> &Arc<FoliatedTorusModel> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<FoliatedTorusModel> {
        &self.codomain
    }

    pub fn is_foliated(&self) -> bool {
        self.check.foliated
    }

    pub fn is_invertible(&self) -> bool {
        self.invertible
    }

    pub fn foliation_check(&self) -> FoliationCheck {
        self.check
    }

    /// `T_{ji} = ⟨w^cod_j, B w^dom_i⟩`.
    pub fn tangential_block(&self) -> DMatrix<f64> {
        self.codomain.tangential_frame().transpose() * self.b.to_f64() * self.domain.tangential_frame()
    }

    /// Induced map on the normal bundle in the `u` frames.
    pub fn transverse_block(&self) -> DMatrix<f64> {
        self.codomain.transverse_frame().transpose() * self.b.to_f64() * self.domain.transverse_frame()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let bx = self.b.to_f64() * DVector::from_column_slice(x);
        bx.iter().zip(&self.c).map(|(a, c)| wrap(a + c)).collect()
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        if !same_model(&outer.domain, &inner.codomain) {
            return Err(Error::ModelMismatch("composition of incompatible maps".into()));
        }
        let b = outer.b.mul(&inner.b);
        let bc = outer.b.to_f64() * DVector::from_column_slice(&inner.c);
        let c = bc.iter().zip(&outer.c).map(|(a, b)| a + b).collect();
        Self::new(b, c, inner.domain.clone(), outer.codomain.clone())
    }
}

fn foliated_residual(b: &IntMatrix, dom: &FoliatedTorusModel, cod: &FoliatedTorusModel) -> f64 {
    if cod.codim() == 0 || dom.leaf_dim() == 0 {
        return 0.0;
    }
    let bw = b.to_f64() * dom.tangential_frame();
    (cod.transverse_frame().transpose() * bw).amax()
}

pub fn check_foliated_map(f: &AffineFoliatedMap) -> FoliationCheck {
    f.foliation_check()
}

/// Closed linear subtorus `s0 + span(L) mod Z^n` with `L` a saturated
/// integer lattice basis.
#[derive(Clone, Debug)]
pub struct LinearSubtorus {
    model: Arc<FoliatedTorusModel>,
    basepoint: Vec<f64>,
    lattice: IntMatrix,
    leaf_frame: DMatrix<f64>,
    orientation: i8,
}

impl LinearSubtorus {
    /// Integer (or rescaled rational) spanning directions; the span is
    /// replaced by its saturated lattice so the subtorus closes up.
    pub fn new(
        model: Arc<FoliatedTorusModel>,
        basepoint: Vec<f64>,
        directions: &[Vec<i64>],
        orientation: i8,
    ) -> Result<Self> {
        let n = model.ambient();
        if basepoint.len() != n || directions.iter().any(|d| d.len() != n) {
            return Err(Error::ModelMismatch("subtorus data has the wrong ambient dimension".into()));
        }
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidModel("orientation must be +1 or -1".into()));
        }
        let gens = IntMatrix::from_columns(n, directions);
        if gens.rank() < directions.len() {
            return Err(Error::DependentDirections);
        }
        let lattice = lattice::saturate(&gens);
        Ok(Self::from_lattice(model, wrap_point(&basepoint), lattice, orientation))
    }

    fn from_lattice(
        model: Arc<FoliatedTorusModel>,
        basepoint: Vec<f64>,
        lattice: IntMatrix,
        orientation: i8,
    ) -> Self {
        let leaf_frame = leaf_frame_of(&model, &lattice.to_f64());
        Self { model, basepoint, lattice, leaf_frame, orientation }
    }

    /// The whole torus as a subtorus, oriented like the leaves.
    pub fn full(model: Arc<FoliatedTorusModel>) -> Self {
        let n = model.ambient();
        let o = model.orientation();
        Self::from_lattice(model, vec![0.0; n], IntMatrix::identity(n), o)
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        &self.model
    }

    pub fn basepoint(&self) -> &[f64] {
        &self.basepoint
    }

    /// Columns form a basis of `span ∩ Z^n`.
    pub fn lattice(&self) -> &IntMatrix {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.cols()
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_frame.ncols()
    }

    pub fn transverse_dim(&self) -> usize {
        self.dim() - self.leaf_dim()
    }

    /// Oriented orthonormal frame of `F S = T S ∩ F M`.
    pub fn leaf_frame(&self) -> &DMatrix<f64> {
        &self.leaf_frame
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn with_orientation(mut self, orientation: i8) -> Self {
        self.orientation = orientation;
        self
    }

    /// Volume of the fundamental cell for the leaf volume times the
    /// transversal volume induced from `Q M`.
    pub fn cell_measure(&self) -> f64 {
        let phi = stacked_frames(&self.leaf_frame, self.model.transverse_frame());
        linalg::gram_volume(&(phi * self.lattice.to_f64()))
    }

    /// Point of the subtorus at lattice parameter `tau ∈ R^dim`.
    pub fn point_at(&self, tau: &[f64]) -> Vec<f64> {
        let l = self.lattice.to_f64();
        (0..self.model.ambient())
            .map(|i| wrap(self.basepoint[i] + (0..self.dim()).map(|j| l[(i, j)] * tau[j]).sum::<f64>()))
            .collect()
    }

    pub fn span_matrix(&self) -> DMatrix<f64> {
        self.lattice.to_f64()
    }
}

fn stacked_frames(f: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    let (k, q) = (f.ncols(), u.ncols());
    DMatrix::from_fn(k + q, n, |i, j| if i < k { f[(j, i)] } else { u[(j, i - k)] })
}

/// Gram–Schmidt of the projections of `w_1, w_2, …` onto `span(L) ∩ F`.
fn leaf_frame_of(model: &FoliatedTorusModel, span: &DMatrix<f64>) -> DMatrix<f64> {
    let n = model.ambient();
    let fs = linalg::intersect(span, model.tangential_frame());
    if fs.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let proj = &fs * fs.transpose();
    let projected: Vec<DVector<f64>> =
        linalg::columns(model.tangential_frame()).iter().map(|w| &proj * w).collect();
    let frame = linalg::gram_schmidt(&projected, 1e-8);
    linalg::from_columns(n, &frame[..fs.ncols().min(frame.len())])
}

/// Result of the foliated transversality test for two linear subtori.
#[derive(Clone, Debug)]
pub struct TransversalityReport {
    pub transversal: bool,
    /// `T S + T T = T M`
    pub span_condition: bool,
    /// `F S + F T = F M`
    pub tangential_condition: bool,
    pub intersects: bool,
    pub intersection_dim: usize,
    pub intersection_leaf_dim: usize,
    /// Connected components of `S ∩ T` (transversal case only).
    pub components: Vec<LinearSubtorus>,
}

pub fn check_transversal_submanifolds(s: &LinearSubtorus, t: &LinearSubtorus) -> Result<TransversalityReport> {
    if !same_model(&s.model, &t.model) {
        return Err(Error::ModelMismatch("subtori live on different models".into()));
    }
    let model = &s.model;
    let n = model.ambient();
    let p = model.leaf_dim();
    let ls = s.span_matrix();
    let lt = t.span_matrix();
    let both = concat_columns(&ls, &lt);
    let span_condition = linalg::rank(&both) == n;
    let tangential_condition = linalg::rank(&concat_columns(s.leaf_frame(), t.leaf_frame())) == p;
    let transversal = span_condition && tangential_condition;
    let intersects = subtori_meet(s, t);

    let gens = concat_int_columns(&s.lattice, &t.lattice);
    // (α, β) with L_S α = L_T β
    let mut neg = IntMatrix::zeros(n, s.dim() + t.dim());
    for i in 0..n {
        for j in 0..s.dim() {
            neg[(i, j)] = s.lattice[(i, j)];
        }
        for j in 0..t.dim() {
            neg[(i, s.dim() + j)] = -t.lattice[(i, j)];
        }
    }
    let ker = lattice::integer_kernel(&neg);
    let mut common = IntMatrix::zeros(n, ker.cols());
    for k in 0..ker.cols() {
        for i in 0..n {
            common[(i, k)] = (0..s.dim()).map(|j| s.lattice[(i, j)] * ker[(j, k)]).sum();
        }
    }
    let common = if common.cols() == 0 { common } else { lattice::saturate(&common) };
    let intersection_dim = common.cols();
    let probe_frame = leaf_frame_of(model, &common.to_f64());
    let intersection_leaf_dim = probe_frame.ncols();

    let mut components = Vec::new();
    if transversal {
        let reps = lattice::coset_representatives(&gens)?;
        let a = concat_columns(&ls, &(-&lt));
        let svd = a.clone().svd(true, true);
        for z in reps {
            let rhs = DVector::from_fn(n, |i, _| t.basepoint[i] + z[i] as f64 - s.basepoint[i]);
            let sol = svd
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::NotTransversal(e.to_string()))?;
            let x: Vec<f64> = (0..n)
                .map(|i| s.basepoint[i] + (0..s.dim()).map(|j| ls[(i, j)] * sol[j]).sum::<f64>())
                .collect();
            let comp = LinearSubtorus::from_lattice(model.clone(), wrap_point(&x), common.clone(), 1);
            let eps = intersection_orientation(s, t, comp.leaf_frame());
            components.push(comp.with_orientation(eps));
        }
        components.sort_by(|a, b| a.basepoint.partial_cmp(&b.basepoint).unwrap());
    }
    Ok(TransversalityReport {
        transversal,
        span_condition,
        tangential_condition,
        intersects,
        intersection_dim,
        intersection_leaf_dim,
        components,
    })
}

/// Orientation of `F(S ∩ T)` relative to its canonical frame `c`: the sign
/// making `[c, s']` oriented like `F S`, `[c, t']` like `F T` and
/// `[c, s', t']` like `F M`.
fn intersection_orientation(s: &LinearSubtorus, t: &LinearSubtorus, c: &DMatrix<f64>) -> i8 {
    let model = &s.model;
    let sp = linalg::relative_complement(c, s.leaf_frame());
    let tp = linalg::relative_complement(c, t.leaf_frame());
    let cs = concat_columns(c, &sp);
    let ct = concat_columns(c, &tp);
    let sigma_s = signum(linalg::det(&(cs.transpose() * s.leaf_frame()))) * s.orientation as f64;
    let sigma_t = signum(linalg::det(&(ct.transpose() * t.leaf_frame()))) * t.orientation as f64;
    let cst = concat_columns(&cs, &tp);
    let full = signum(linalg::det(&(model.tangential_frame().transpose() * cst)));
    if sigma_s * sigma_t * full >= 0.0 {
        1
    } else {
        -1
    }
}

fn signum(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `S ∩ T ≠ ∅` iff `t0 - s0 ∈ span(S) + span(T) + Z^n`, tested on the
/// integer annihilator of the span.
fn subtori_meet(s: &LinearSubtorus, t: &LinearSubtorus) -> bool {
    let n = s.model.ambient();
    let gens = concat_int_columns(&s.lattice, &t.lattice);
    let ann = lattice::integer_kernel(&gens.transpose());
    (0..ann.cols()).all(|k| {
        let v: f64 = (0..n).map(|i| ann[(i, k)] as f64 * (t.basepoint[i] - s.basepoint[i])).sum();
        let frac = v - v.round();
        frac.abs() < 1e-9
    })
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, a.ncols() + b.ncols(), |i, j| {
        if j < a.ncols() {
            a[(i, j)]
        } else {
            b[(i, j - a.ncols())]
        }
    })
}

fn concat_int_columns(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.rows();
    let mut m = IntMatrix::zeros(n, a.cols() + b.cols());
    for i in 0..n {
        for j in 0..a.cols() {
            m[(i, j)] = a[(i, j)];
        }
        for j in 0..b.cols() {
            m[(i, a.cols() + j)] = b[(i, j)];
        }
    }
    m
}

/// Density ratio `h` with `h·vol_Q(S∩T) ⊗ vol_Q(M) = vol_Q(S) ⊗ vol_Q(T)`.
pub fn h_factor(s: &LinearSubtorus, t: &LinearSubtorus) -> Result<f64> {
    let report = check_transversal_submanifolds(s, t)?;
    if !report.transversal {
        return Err(Error::NotTransversal("h is only defined for transversal pairs".into()));
    }
    let model = &s.model;
    let q = model.codim();
    if q == 0 {
        return Ok(1.0);
    }
    let ut = model.transverse_frame().transpose();
    let qs = linalg::orthonormal_span(&(&ut * s.span_matrix()));
    let qt = linalg::orthonormal_span(&(&ut * t.span_matrix()));
    let common = report.components.first().map(|c| c.span_matrix()).unwrap_or_else(|| DMatrix::zeros(model.ambient(), 0));
    let a = linalg::orthonormal_span(&(&ut * common));
    let s2 = linalg::relative_complement(&a, &qs);
    let t2 = linalg::relative_complement(&a, &qt);
    let m = concat_columns(&concat_columns(&a, &s2), &t2);
    if m.ncols() != q {
        return Err(Error::NotTransversal(format!(
            "transverse parts span {} of {} directions",
            m.ncols(),
            q
        )));
    }
    Ok(1.0 / linalg::det(&m).abs())
}
