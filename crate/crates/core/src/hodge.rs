//! Truncated spectral Hodge theory: resonance scans, harmonic bases,
//! projection, Künneth products, duality pairings and induced maps on
//! reduced cohomology.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{LatticeMode, MultiIndex, TangentialForm};
use crate::models::{same_model, AffineFoliatedMap, FoliatedTorusModel};

/// Divisors up to this value are listed as near resonances.
pub const NEAR_RESONANCE_THRESHOLD: f64 = 1e-2;
/// At most this many near resonances are kept.
pub const NEAR_RESONANCE_LIMIT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTruncation {
    /// Sup-norm bound on lattice modes.
    pub max_mode: i64,
    /// `|⟨m, w_j⟩|` at or below this counts as zero.
    pub resonance_tol: f64,
}

impl Default for SpectralTruncation {
    fn default() -> Self {
        Self { max_mode: 50, resonance_tol: 1e-9 }
    }
}

impl SpectralTruncation {
    pub fn new(max_mode: i64, resonance_tol: f64) -> Result<Self> {
        if max_mode < 1 || !(resonance_tol > 0.0) {
            return Err(Error::Config("truncation needs max_mode >= 1 and resonance_tol > 0".into()));
        }
        Ok(Self { max_mode, resonance_tol })
    }
}

/// Small divisor `max_j |⟨m, w_j⟩|` of a non-resonant mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearResonance {
    pub mode: Vec<i64>,
    pub divisor: f64,
}

pub fn divisor(model: &FoliatedTorusModel, m: &[i64]) -> f64 {
    model.leaf_components(m).iter().fold(0.0, |a, b| f64::max(a, b.abs()))
}

pub fn is_resonant(model: &FoliatedTorusModel, m: &[i64], tol: f64) -> bool {
    divisor(model, m) <= tol
}

#[derive(Clone, Debug)]
pub struct ResonanceScan {
    pub resonant: Vec<LatticeMode>,
    pub near: Vec<NearResonance>,
}

/// Branch-and-bound scan of `|m|_∞ ≤ M` for resonant and near-resonant modes.
pub fn resonance_scan(model: &FoliatedTorusModel, trunc: &SpectralTruncation) -> ResonanceScan {
    let n = model.ambient();
    let p = model.leaf_dim();
    let big = trunc.max_mode;
    let threshold = trunc.resonance_tol.max(NEAR_RESONANCE_THRESHOLD);
    let w = model.tangential_frame();
    // tail[i][j] = M Σ_{i' ≥ i} |w_{i', j}|
    let mut tail = vec![vec![0.0; p]; n + 1];
    for i in (0..n).rev() {
        for j in 0..p {
            tail[i][j] = tail[i + 1][j] + big as f64 * w[(i, j)].abs();
        }
    }
    let slack = 1e-12 * (1.0 + big as f64);

    fn rec(
        i: usize,
        m: &mut Vec<i64>,
        sums: &mut Vec<f64>,
        ctx: &(usize, usize, i64, f64, f64, &nalgebra::DMatrix<f64>, &Vec<Vec<f64>>),
        out: &mut Vec<(Vec<i64>, f64)>,
    ) {
        let (n, p, big, threshold, slack, w, tail) = *ctx;
        if i == n {
            let d = sums.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
            if d <= threshold {
                out.push((m.clone(), d));
            }
            return;
        }
        for v in -big..=big {
            let mut ok = true;
            for j in 0..p {
                let s = sums[j] + v as f64 * w[(i, j)];
                if s.abs() - tail[i + 1][j] > threshold + slack {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            for j in 0..p {
                sums[j] += v as f64 * w[(i, j)];
            }
            m.push(v);
            rec(i + 1, m, sums, ctx, out);
            m.pop();
            for j in 0..p {
                sums[j] -= v as f64 * w[(i, j)];
            }
        }
    }

    let ctx = (n, p, big, threshold, slack, w, &tail);
    let mut found: Vec<(Vec<i64>, f64)> = if n == 0 {
        vec![(Vec::new(), 0.0)]
    } else {
        (-big..=big)
            .into_par_iter()
            .flat_map_iter(|v| {
                let mut out = Vec::new();
                let mut sums: Vec<f64> = (0..p).map(|j| v as f64 * w[(0, j)]).collect();
                if (0..p).all(|j| sums[j].abs() - tail[1][j] <= threshold + slack) {
                    let mut m = vec![v];
                    rec(1, &mut m, &mut sums, &ctx, &mut out);
                }
                out.into_iter()
            })
            .collect()
    };
    found.sort_by(|a, b| a.0.cmp(&b.0));
    let mut resonant = Vec::new();
    let mut near = Vec::new();
    for (m, _) in found {
        let d = divisor(model, &m);
        if d <= trunc.resonance_tol {
            resonant.push(LatticeMode(m));
        } else if d <= NEAR_RESONANCE_THRESHOLD {
            near.push(NearResonance { mode: m, divisor: d });
        }
    }
    near.sort_by(|a, b| a.divisor.total_cmp(&b.divisor).then_with(|| a.mode.cmp(&b.mode)));
    near.truncate(NEAR_RESONANCE_LIMIT);
    ResonanceScan { resonant, near }
}

/// Harmonic representatives of one degree.
#[derive(Clone, Debug)]
pub struct DegreeBasis {
    pub degree: usize,
    pub representatives: Vec<TangentialForm>,
    pub gram: DMatrix<f64>,
    pub finite_dimensional: bool,
    pub truncation_limited: bool,
}

impl DegreeBasis {
    pub fn dim(&self) -> usize {
        self.representatives.len()
    }
}

/// Harmonic representatives of reduced leafwise cohomology in all degrees.
#[derive(Clone, Debug)]
pub struct CohomologyBasis {
    model: Arc<FoliatedTorusModel>,
    truncation: SpectralTruncation,
    degrees: Vec<DegreeBasis>,
    resonant_modes: Vec<LatticeMode>,
    near_resonances: Vec<NearResonance>,
    finite_dimensional: bool,
}

fn gram_matrix(reps: &[TangentialForm]) -> DMatrix<f64> {
    DMatrix::from_fn(reps.len(), reps.len(), |i, j| reps[i].hermitian_inner(&reps[j]).re)
}

fn degree_basis(
    model: &Arc<FoliatedTorusModel>,
    kappa: usize,
    modes: &[LatticeMode],
    finite: bool,
) -> DegreeBasis {
    let reps: Vec<TangentialForm> = modes
        .iter()
        .flat_map(|m| {
            MultiIndex::all(model.leaf_dim(), kappa).into_iter().map(move |i| {
                TangentialForm::term(model.clone(), m.clone(), i, Complex64::new(1.0, 0.0)).unwrap()
            })
        })
        .collect();
    let gram = gram_matrix(&reps);
    DegreeBasis { degree: kappa, representatives: reps, gram, finite_dimensional: finite, truncation_limited: !finite }
}

fn only_zero(modes: &[LatticeMode]) -> bool {
    modes.len() == 1 && modes[0].is_zero()
}

/// `{e_m θ^I : m resonant, |m|_∞ ≤ M, |I| = κ}`.
pub fn harmonic_basis(model: &Arc<FoliatedTorusModel>, kappa: usize, trunc: &SpectralTruncation) -> Result<DegreeBasis> {
    if kappa > model.leaf_dim() {
        return Err(Error::DegreeOverflow { degree: kappa, leaf_dim: model.leaf_dim() });
    }
    let scan = resonance_scan(model, trunc);
    let finite = only_zero(&scan.resonant);
    Ok(degree_basis(model, kappa, &scan.resonant, finite))
}

impl CohomologyBasis {
    pub fn new(model: Arc<FoliatedTorusModel>, trunc: SpectralTruncation) -> Self {
        let scan = resonance_scan(&model, &trunc);
        let finite = only_zero(&scan.resonant);
        let degrees = (0..=model.leaf_dim()).map(|k| degree_basis(&model, k, &scan.resonant, finite)).collect();
        Self {
            model,
            truncation: trunc,
            degrees,
            resonant_modes: scan.resonant,
            near_resonances: scan.near,
            finite_dimensional: finite,
        }
    }

    pub fn model(&self) -> &Arc<FoliatedTorusModel> {
        &self.model
    }

    pub fn truncation(&self) -> &SpectralTruncation {
        &self.truncation
    }

    pub fn degree(&self, k: usize) -> Option<&DegreeBasis> {
        self.degrees.get(k)
    }

    pub fn degrees(&self) -> &[DegreeBasis] {
        &self.degrees
    }

    pub fn dims(&self) -> Vec<usize> {
        self.degrees.iter().map(DegreeBasis::dim).collect()
    }

    pub fn finite_dimensional(&self) -> bool {
        self.finite_dimensional
    }

    pub fn truncation_limited(&self) -> bool {
        !self.finite_dimensional
    }

    pub fn resonant_modes(&self) -> &[LatticeMode] {
        &self.resonant_modes
    }

    pub fn near_resonances(&self) -> &[NearResonance] {
        &self.near_resonances
    }

    pub(crate) fn require_finite(&self, degree: usize) -> Result<()> {
        if self.finite_dimensional {
            Ok(())
        } else {
            Err(Error::TruncationLimited { degree })
        }
    }

    /// Largest `‖Δ ω‖²` over all representatives.
    pub fn harmonic_defect(&self) -> f64 {
        self.degrees
            .iter()
            .flat_map(|d| d.representatives.iter())
            .map(|w| w.laplacian_f().l2_norm().powi(2))
            .fold(0.0, f64::max)
    }

    /// Same classes, degree-`κ` representatives replaced by `ω'_i = Σ_j mix_ji ω_j`.
    pub fn with_mixed_representatives(&self, kappa: usize, mix: &DMatrix<f64>) -> Result<Self> {
        let deg = self.degree(kappa).ok_or(Error::DegreeOverflow { degree: kappa, leaf_dim: self.model.leaf_dim() })?;
        let k = deg.dim();
        if mix.nrows() != k || mix.ncols() != k || mix.clone().determinant().abs() < DUALITY_DET_TOL {
            return Err(Error::InvalidTerm("change of basis must be invertible and square".into()));
        }
        let mut reps = Vec::with_capacity(k);
        for i in 0..k {
            let mut w = TangentialForm::zero(self.model.clone(), kappa)?;
            for (j, e) in deg.representatives.iter().enumerate() {
                w = w.add(&e.scale(Complex64::new(mix[(j, i)], 0.0)))?;
            }
            reps.push(w);
        }
        let mut out = self.clone();
        out.degrees[kappa].gram = gram_matrix(&reps);
        out.degrees[kappa].representatives = reps;
        Ok(out)
    }

    pub fn report(&self) -> BasisReport {
        BasisReport {
            dimensions: self.dims(),
            finite_dimensional: self.finite_dimensional,
            truncation_limited: !self.finite_dimensional,
            max_mode: self.truncation.max_mode,
            resonance_tol: self.truncation.resonance_tol,
            near_resonances: self.near_resonances.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub dimensions: Vec<usize>,
    pub finite_dimensional: bool,
    pub truncation_limited: bool,
    pub max_mode: i64,
    pub resonance_tol: f64,
    pub near_resonances: Vec<NearResonance>,
}

/// Orthogonal projection onto harmonic forms: keeps resonant modes.
pub fn hodge_project(w: &TangentialForm, trunc: &SpectralTruncation) -> TangentialForm {
    let model = w.model().clone();
    w.filter_modes(|m| is_resonant(&model, &m.0, trunc.resonance_tol))
}

/// Products `ω_i ⊗ τ_j` as a basis of the product model.
pub fn kunneth_basis(a: &CohomologyBasis, b: &CohomologyBasis) -> Result<CohomologyBasis> {
    a.require_finite(0)?;
    b.require_finite(0)?;
    let product = Arc::new(a.model.product(&b.model));
    let p = product.leaf_dim();
    let mut degrees = Vec::with_capacity(p + 1);
    for kappa in 0..=p {
        let mut reps = Vec::new();
        for (i, da) in a.degrees.iter().enumerate() {
            if i > kappa {
                break;
            }
            if let Some(db) = b.degrees.get(kappa - i) {
                for w in &da.representatives {
                    for t in &db.representatives {
                        reps.push(w.external_product(t, product.clone())?);
                    }
                }
            }
        }
        let gram = gram_matrix(&reps);
        degrees.push(DegreeBasis {
            degree: kappa,
            representatives: reps,
            gram,
            finite_dimensional: true,
            truncation_limited: false,
        });
    }
    let trunc = SpectralTruncation {
        max_mode: a.truncation.max_mode.min(b.truncation.max_mode),
        resonance_tol: a.truncation.resonance_tol.max(b.truncation.resonance_tol),
    };
    Ok(CohomologyBasis {
        model: product.clone(),
        truncation: trunc,
        degrees,
        resonant_modes: vec![LatticeMode::zero(product.ambient())],
        near_resonances: Vec::new(),
        finite_dimensional: true,
    })
}

/// Smallest `|det|` accepted for the duality pairing.
pub const DUALITY_DET_TOL: f64 = 1e-8;

/// `P_ij = ∫ ω^{p-κ}_i ∧ ω^κ_j vol_Q`.
pub fn duality_pairing_matrix(basis: &CohomologyBasis, kappa: usize) -> Result<DMatrix<f64>> {
    let p = basis.model.leaf_dim();
    if kappa > p {
        return Err(Error::DegreeOverflow { degree: kappa, leaf_dim: p });
    }
    basis.require_finite(kappa)?;
    let rows = &basis.degrees[p - kappa].representatives;
    let cols = &basis.degrees[kappa].representatives;
    if rows.len() != cols.len() {
        return Err(Error::DualityFailure { degree: kappa, det: 0.0 });
    }
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            m[(i, j)] = a.wedge(b)?.integrate_volq()?.re;
        }
    }
    let det = if m.nrows() == 0 { 1.0 } else { m.clone().determinant() };
    if det.abs() <= DUALITY_DET_TOL {
        return Err(Error::DualityFailure { degree: kappa, det });
    }
    Ok(m)
}

/// Matrix of `Π ∘ f^*` on degree `κ` in the Gram-orthonormalized basis.
pub fn pullback_matrix_on_cohomology(
    f: &AffineFoliatedMap,
    basis: &CohomologyBasis,
    kappa: usize,
) -> Result<DMatrix<f64>> {
    if !same_model(f.domain(), &basis.model) || !same_model(f.codomain(), &basis.model) {
        return Err(Error::ModelMismatch("map is not an endomorphism of the basis model".into()));
    }
    let p = basis.model.leaf_dim();
    if kappa > p {
        return Err(Error::DegreeOverflow { degree: kappa, leaf_dim: p });
    }
    basis.require_finite(kappa)?;
    let deg = &basis.degrees[kappa];
    let reps = &deg.representatives;
    let k = reps.len();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut r = DMatrix::zeros(k, k);
    for (j, e) in reps.iter().enumerate() {
        let g = e.pullback(f)?;
        if let Some((m, _, _)) = g.terms().find(|(m, _, _)| m.sup_norm() > basis.truncation.max_mode) {
            return Err(Error::TruncationExceeded { mode: m.0.clone(), max_mode: basis.truncation.max_mode });
        }
        let g = hodge_project(&g, &basis.truncation);
        for (i, ei) in reps.iter().enumerate() {
            r[(i, j)] = g.hermitian_inner(ei).re;
        }
    }
    let chol = deg
        .gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().expect("triangular factor of a positive definite matrix");
    Ok(&l_inv * r * l_inv.transpose())
}

/// `Σ_κ (-1)^κ Tr(f^* | H^κ)`.
pub fn alternating_trace(f: &AffineFoliatedMap, basis: &CohomologyBasis) -> Result<f64> {
    let mut total = 0.0;
    for kappa in 0..=basis.model.leaf_dim() {
        let tr = pullback_matrix_on_cohomology(f, basis, kappa)?.trace();
        total += if kappa % 2 == 0 { tr } else { -tr };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn golden() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    fn trunc(m: i64) -> SpectralTruncation {
        SpectralTruncation::new(m, 1e-9).unwrap()
    }

    /// Direct scan of the box without pruning.
    fn brute_resonant(model: &FoliatedTorusModel, big: i64, tol: f64) -> Vec<Vec<i64>> {
        let n = model.ambient();
        let mut out = Vec::new();
        let mut m = vec![-big; n];
        loop {
            if divisor(model, &m) <= tol {
                out.push(m.clone());
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if m[i] < big {
                    m[i] += 1;
                    for x in m.iter_mut().skip(i + 1) {
                        *x = -big;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn kronecker_dimensions() {
        let model = Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap());
        let b = CohomologyBasis::new(model.clone(), trunc(50));
        assert_eq!(b.dims(), vec![1, 1]);
        assert!(b.finite_dimensional());
        assert_eq!(brute_resonant(&model, 50, 1e-9), vec![vec![0, 0]]);
        // Fibonacci pairs give the smallest divisors of the golden slope
        let wide = resonance_scan(&model, &trunc(100));
        let first = &wide.near[0];
        assert_eq!(first.mode.iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![89, 55]);
        assert!(first.divisor < 1e-2);
    }

    #[test]
    fn one_leaf_dimensions() {
        let model = Arc::new(FoliatedTorusModel::one_leaf(2));
        let b = CohomologyBasis::new(model, trunc(10));
        assert_eq!(b.dims(), vec![1, 2, 1]);
    }

    #[test]
    fn rational_slope_is_truncation_limited() {
        let model = Arc::new(FoliatedTorusModel::kronecker(0.0).unwrap());
        let small = CohomologyBasis::new(model.clone(), trunc(5));
        let large = CohomologyBasis::new(model.clone(), trunc(10));
        assert!(small.truncation_limited());
        assert_eq!(small.dims(), vec![11, 11]);
        assert_eq!(large.dims(), vec![21, 21]);
        assert!(matches!(duality_pairing_matrix(&small, 0), Err(Error::TruncationLimited { .. })));
        let expected: Vec<LatticeMode> = brute_resonant(&model, 5, 1e-9).into_iter().map(LatticeMode).collect();
        assert_eq!(small.resonant_modes(), expected.as_slice());
    }

    #[test]
    fn scan_matches_brute_force_on_tilted_three_torus() {
        let model = FoliatedTorusModel::new(3, &[vec![1.0, 2.0, 0.0]]).unwrap();
        let scan = resonance_scan(&model, &trunc(6));
        let brute: Vec<LatticeMode> = brute_resonant(&model, 6, 1e-9).into_iter().map(LatticeMode).collect();
        assert_eq!(scan.resonant, brute);
    }

    #[test]
    fn kunneth_dimensions() {
        let k = Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap());
        let bk = CohomologyBasis::new(k.clone(), trunc(50));
        let prod = kunneth_basis(&bk, &bk).unwrap();
        assert_eq!(prod.dims(), vec![1, 2, 1]);
        let direct = CohomologyBasis::new(Arc::new(k.product(&k)), trunc(20));
        assert_eq!(direct.dims(), prod.dims());

        let one = Arc::new(FoliatedTorusModel::one_leaf(2));
        let b1 = CohomologyBasis::new(one.clone(), trunc(5));
        assert_eq!(kunneth_basis(&b1, &b1).unwrap().dims(), vec![1, 4, 6, 4, 1]);
        let direct = CohomologyBasis::new(Arc::new(one.product(&one)), trunc(5));
        assert_eq!(direct.dims(), vec![1, 4, 6, 4, 1]);

        let pt = CohomologyBasis::new(Arc::new(FoliatedTorusModel::point()), trunc(5));
        assert_eq!(pt.dims(), vec![1]);
        assert_eq!(kunneth_basis(&bk, &pt).unwrap().dims(), bk.dims());
    }

    #[test]
    fn duality_matrices() {
        let k = Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap());
        let bk = CohomologyBasis::new(k, trunc(50));
        let m0 = duality_pairing_matrix(&bk, 0).unwrap();
        assert_eq!(m0, DMatrix::from_element(1, 1, 1.0));
        let m1 = duality_pairing_matrix(&bk, 1).unwrap();
        assert_eq!(m1, DMatrix::from_element(1, 1, 1.0));

        let one = Arc::new(FoliatedTorusModel::one_leaf(2));
        let b = CohomologyBasis::new(one, trunc(5));
        let d = duality_pairing_matrix(&b, 1).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn cat_map_on_cohomology() {
        let one = Arc::new(FoliatedTorusModel::one_leaf(2));
        let b = CohomologyBasis::new(one.clone(), trunc(5));
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap();
        let f = AffineFoliatedMap::endomorphism(a, vec![0.0; 2], one.clone()).unwrap();
        let m1 = pullback_matrix_on_cohomology(&f, &b, 1).unwrap();
        assert_eq!(m1, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert_eq!(alternating_trace(&f, &b).unwrap(), -1.0);
        let id = AffineFoliatedMap::identity(one);
        assert_eq!(pullback_matrix_on_cohomology(&id, &b, 1).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn functoriality() {
        let one = Arc::new(FoliatedTorusModel::one_leaf(2));
        let b = CohomologyBasis::new(one.clone(), trunc(5));
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap();
        let c = IntMatrix::from_rows(&[vec![1, 2], vec![0, 1]]).unwrap();
        let f = AffineFoliatedMap::endomorphism(a, vec![0.3, 0.1], one.clone()).unwrap();
        let g = AffineFoliatedMap::endomorphism(c, vec![0.0, 0.5], one).unwrap();
        let gf = AffineFoliatedMap::compose(&g, &f).unwrap();
        for k in 0..=2 {
            let lhs = pullback_matrix_on_cohomology(&gf, &b, k).unwrap();
            let rhs = pullback_matrix_on_cohomology(&f, &b, k).unwrap() * pullback_matrix_on_cohomology(&g, &b, k).unwrap();
            assert!((lhs - rhs).amax() < 1e-10);
        }
    }

    #[test]
    fn truncation_exceeded_is_reported() {
        let model = Arc::new(FoliatedTorusModel::kronecker(0.0).unwrap());
        let b = CohomologyBasis::new(model.clone(), trunc(3));
        assert!(b.truncation_limited());
        assert!(matches!(
            pullback_matrix_on_cohomology(&AffineFoliatedMap::identity(model), &b, 0),
            Err(Error::TruncationLimited { .. })
        ));
    }

    #[test]
    fn translation_acts_trivially() {
        let k = Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap());
        let b = CohomologyBasis::new(k.clone(), trunc(50));
        let f = AffineFoliatedMap::translation(k, vec![0.3, 0.9]).unwrap();
        for kappa in 0..=1 {
            assert_eq!(pullback_matrix_on_cohomology(&f, &b, kappa).unwrap(), DMatrix::identity(1, 1));
        }
    }

    #[test]
    fn projection_properties() {
        let model = Arc::new(FoliatedTorusModel::kronecker(0.0).unwrap());
        let t = trunc(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..=1 {
            let w = TangentialForm::random_sparse(model.clone(), k, 20, 3, false, &mut rng).unwrap();
            let v = TangentialForm::random_sparse(model.clone(), k, 20, 3, false, &mut rng).unwrap();
            let pw = hodge_project(&w, &t);
            assert_eq!(hodge_project(&pw, &t), pw);
            let rest = w.sub(&pw).unwrap();
            assert!(pw.hermitian_inner(&rest).norm() < 1e-12);
            let lhs = hodge_project(&w, &t).hermitian_inner(&v);
            let rhs = w.hermitian_inner(&hodge_project(&v, &t));
            assert!((lhs - rhs).norm() < 1e-12);
        }
        let b = CohomologyBasis::new(model.clone(), t);
        assert!(b.harmonic_defect() < 1e-18);
    }

    #[test]
    fn exact_forms_project_to_zero() {
        let model = Arc::new(FoliatedTorusModel::kronecker(golden()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eta = TangentialForm::random_sparse(model.clone(), 0, 10, 4, false, &mut rng).unwrap();
        let eta = eta.filter_modes(|m| !m.is_zero());
        assert!(hodge_project(&eta.d_f(), &trunc(50)).is_zero());
    }
}
