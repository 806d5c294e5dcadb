//! Foliated flows, their fixed points and periodic orbits, and the
//! linearizations entering the local contributions.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FoliatedVectorField;
use crate::lattice::{torsion_points, IntMatrix, RationalPoint};
use crate::linalg;
use crate::models::{wrap, wrap_point, AffineFoliatedMap, FoliatedTorusModel, SuspensionModel};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 60;
pub const SEEDS_PER_DIM: usize = 32;
pub const DEDUP_RADIUS: f64 = 1e-6;
pub const DEFAULT_STEP: f64 = 1e-3;
/// Threshold below which `det(id − ·)` counts as vanishing.
pub const DET_TOL: f64 = 1e-10;
/// Times at which fixed-point transversality and sign stability are sampled.
pub const TRANSVERSALITY_SAMPLES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Scalar multiplicative cocycle `ρ^t = e^{λt}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cocycle {
    pub rate: f64,
}

impl Cocycle {
    pub fn trivial() -> Self {
        Self { rate: 0.0 }
    }

    pub fn exponential(rate: f64) -> Self {
        Self { rate }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.rate * t).exp()
    }
}

#[derive(Clone, Debug)]
pub enum FlowKind {
    /// `x ↦ x + t v`
    Affine { model: Arc<FoliatedTorusModel>, velocity: Vec<f64> },
    /// Flow of a foliated vector field, RK4 with fixed step.
    VectorField { field: FoliatedVectorField, step: f64 },
    /// Unit-speed flow along the suspension parameter.
    Suspension { model: Arc<SuspensionModel> },
}

#[derive(Clone, Debug)]
pub struct FlowSpec {
    kind: FlowKind,
    cocycle: Cocycle,
}

impl FlowSpec {
    pub fn affine(model: Arc<FoliatedTorusModel>, velocity: Vec<f64>) -> Result<Self> {
        if velocity.len() != model.ambient() || velocity.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelMismatch("velocity does not match the model".into()));
        }
        Ok(Self { kind: FlowKind::Affine { model, velocity }, cocycle: Cocycle::trivial() })
    }

    pub fn vector_field(field: FoliatedVectorField, step: f64) -> Result<Self> {
        if !field.is_foliated() {
            return Err(Error::FieldNotFoliated { residual: field.leafwise_variation() });
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Integrator(format!("invalid step {step}")));
        }
        Ok(Self { kind: FlowKind::VectorField { field, step }, cocycle: Cocycle::trivial() })
    }

    pub fn suspension(model: Arc<SuspensionModel>) -> Self {
        Self { kind: FlowKind::Suspension { model }, cocycle: Cocycle::trivial() }
    }

    pub fn with_cocycle(mut self, cocycle: Cocycle) -> Self {
        self.cocycle = cocycle;
        self
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn cocycle(&self) -> Cocycle {
        self.cocycle
    }

    /// Torus model for affine and vector-field flows.
    pub fn torus_model(&self) -> Option<&Arc<FoliatedTorusModel>> {
        match &self.kind {
            FlowKind::Affine { model, .. } => Some(model),
            FlowKind::VectorField { field, .. } => Some(field.model()),
            FlowKind::Suspension { .. } => None,
        }
    }

    pub fn ambient(&self) -> usize {
        match &self.kind {
            FlowKind::Affine { model, .. } => model.ambient(),
            FlowKind::VectorField { field, .. } => field.model().ambient(),
            FlowKind::Suspension { model } => model.ambient(),
        }
    }

    /// Tangential and transverse frames of the phase space.
    fn frames(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.kind {
            FlowKind::Affine { model, .. } => (model.tangential_frame().clone(), model.transverse_frame().clone()),
            FlowKind::VectorField { field, .. } => {
                let m = field.model();
                (m.tangential_frame().clone(), m.transverse_frame().clone())
            }
            FlowKind::Suspension { model } => {
                let n = model.ambient();
                let id = DMatrix::<f64>::identity(n, n);
                (id.columns(0, n - 1).into_owned(), id.columns(n - 1, 1).into_owned())
            }
        }
    }

    /// Generating vector field at `x`.
    pub fn velocity_at(&self, x: &[f64]) -> DVector<f64> {
        match &self.kind {
            FlowKind::Affine { velocity, .. } => DVector::from_column_slice(velocity),
            FlowKind::VectorField { field, .. } => field.eval(x),
            FlowKind::Suspension { model } => {
                let mut v = DVector::zeros(model.ambient());
                v[model.ambient() - 1] = 1.0;
                v
            }
        }
    }

    /// Time-`t` map on the lift together with its derivative.
    /// Suspension points are `(x, s)` and are always returned reduced.
    pub fn lifted_flow(&self, t: f64, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        if x.len() != self.ambient() || !t.is_finite() {
            return Err(Error::ModelMismatch("point does not match the flow".into()));
        }
        let n = x.len();
        match &self.kind {
            FlowKind::Affine { velocity, .. } => {
                let y = x.iter().zip(velocity).map(|(a, v)| a + t * v).collect();
                Ok((y, DMatrix::identity(n, n)))
            }
            FlowKind::VectorField { field, step } => rk4_variational(field, *step, t, x),
            FlowKind::Suspension { model } => {
                let s = x[n - 1] + t;
                let k = s.floor();
                let power = monodromy_power(model, k as i64);
                let fiber: Vec<f64> = (0..n - 1)
                    .map(|i| (0..n - 1).map(|j| power[(i, j)] as f64 * x[j]).sum())
                    .collect();
                let mut y = wrap_point(&fiber);
                y.push(s - k);
                let mut jac = DMatrix::identity(n, n);
                jac.view_mut((0, 0), (n - 1, n - 1)).copy_from(&power.to_f64());
                Ok((y, jac))
            }
        }
    }

    /// Time-`t` map on the lift, without the derivative.
    pub fn lifted_point(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            FlowKind::VectorField { field, step } if x.len() == self.ambient() && t.is_finite() => {
                rk4_point(field, *step, t, x)
            }
            _ => Ok(self.lifted_flow(t, x)?.0),
        }
    }

    pub fn flow_map(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(wrap_point(&self.lifted_point(t, x)?))
    }

    /// Integer linear part of the time-`t` map of a torus flow, read off the lift.
    pub fn linear_part(&self, t: f64) -> Result<IntMatrix> {
        let n = self.ambient();
        match &self.kind {
            FlowKind::Suspension { .. } => Err(Error::Unsupported("linear part of a suspension flow".into())),
            FlowKind::Affine { .. } => Ok(IntMatrix::identity(n)),
            FlowKind::VectorField { .. } => {
                let base = vec![0.123_456_789; n];
                let y0 = self.lifted_point(t, &base)?;
                let mut cols = Vec::with_capacity(n);
                for a in 0..n {
                    let mut shifted = base.clone();
                    shifted[a] += 1.0;
                    let ya = self.lifted_point(t, &shifted)?;
                    let mut col = Vec::with_capacity(n);
                    for i in 0..n {
                        let v = ya[i] - y0[i];
                        if (v - v.round()).abs() > 1e-6 {
                            return Err(Error::Integrator("lift is not equivariant".into()));
                        }
                        col.push(v.round() as i64);
                    }
                    cols.push(col);
                }
                Ok(IntMatrix::from_columns(n, &cols))
            }
        }
    }

    /// Time-`t` map as an affine foliated map, where it is one (or where only
    /// its action on reduced cohomology of a leafwise-transitive model is needed).
    pub fn time_map(&self, t: f64) -> Result<AffineFoliatedMap> {
        match &self.kind {
            FlowKind::Affine { model, velocity } => {
                AffineFoliatedMap::translation(model.clone(), velocity.iter().map(|v| wrap(t * v)).collect())
            }
            FlowKind::VectorField { field, .. } => {
                let model = field.model();
                if model.codim() != 0 {
                    return Err(Error::Unsupported(
                        "cohomological action of a non-affine flow with transverse directions".into(),
                    ));
                }
                let b = self.linear_part(t)?;
                let c = self.flow_map(t, &vec![0.0; model.ambient()])?;
                AffineFoliatedMap::endomorphism(b, c, model.clone())
            }
            FlowKind::Suspension { .. } => Err(Error::Unsupported("suspension time maps are not torus maps".into())),
        }
    }

    /// Tangential and transverse blocks of `Dφ^t` at `x`.
    pub fn linearize_at(&self, t: f64, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (_, jac) = self.lifted_flow(t, x)?;
        let (w, u) = self.frames();
        Ok((w.transpose() * &jac * &w, u.transpose() * &jac * &u))
    }

    /// Transverse part `X̄` of the generator, in the transverse frame.
    pub fn transverse_velocity(&self, x: &[f64]) -> DVector<f64> {
        let (_, u) = self.frames();
        u.transpose() * self.velocity_at(x)
    }
}

fn monodromy_power(model: &SuspensionModel, k: i64) -> IntMatrix {
    if k >= 0 {
        model.monodromy().pow(k as u32)
    } else {
        model.monodromy_inverse().pow((-k) as u32)
    }
}

fn rk4_point(field: &FoliatedVectorField, step: f64, t: f64, x0: &[f64]) -> Result<Vec<f64>> {
    let steps = ((t.abs() / step).ceil() as usize).max(1);
    let h = t / steps as f64;
    let mut x = DVector::from_column_slice(x0);
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let f = |x: &DVector<f64>| field.eval(x.as_slice());
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Integrator("non-finite state".into()));
        }
    }
    Ok(x.as_slice().to_vec())
}

fn rk4_variational(field: &FoliatedVectorField, step: f64, t: f64, x0: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = x0.len();
    let steps = ((t.abs() / step).ceil() as usize).max(1);
    let h = t / steps as f64;
    let mut x = DVector::from_column_slice(x0);
    let mut j = DMatrix::<f64>::identity(n, n);
    let rhs = |x: &DVector<f64>, j: &DMatrix<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let xs = x.as_slice();
        (field.eval(xs), field.jacobian(xs) * j)
    };
    if t == 0.0 {
        return Ok((x0.to_vec(), j));
    }
    for _ in 0..steps {
        let (k1, l1) = rhs(&x, &j);
        let (k2, l2) = rhs(&(&x + &k1 * (h / 2.0)), &(&j + &l1 * (h / 2.0)));
        let (k3, l3) = rhs(&(&x + &k2 * (h / 2.0)), &(&j + &l2 * (h / 2.0)));
        let (k4, l4) = rhs(&(&x + &k3 * h), &(&j + &l3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        j += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
        if !x.iter().chain(j.iter()).all(|v| v.is_finite()) {
            return Err(Error::Integrator("non-finite state".into()));
        }
    }
    Ok((x.as_slice().to_vec(), j))
}

/// Isolated or non-isolated fixed point of `φ^t`.
#[derive(Clone, Debug)]
pub struct FixedPointRecord {
    pub location: Vec<f64>,
    pub t: f64,
    pub tangential: DMatrix<f64>,
    pub transverse: DMatrix<f64>,
    pub residual: f64,
    /// False when the fixed-point set is a positive-dimensional submanifold.
    pub isolated: bool,
}

#[derive(Clone, Debug)]
pub struct FixedPointSet {
    pub records: Vec<FixedPointRecord>,
    /// Newton seeds that did not converge.
    pub nonconverged_seeds: usize,
}

fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = wrap(x - y);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

fn canonical(x: &[f64]) -> Vec<f64> {
    wrap_point(x)
        .into_iter()
        .map(|v| if v > 1.0 - 1e-13 || v.abs() < 1e-13 { 0.0 } else { v })
        .collect()
}

fn newton(field: &FoliatedVectorField, seed: &[f64]) -> Option<Vec<f64>> {
    let mut x = DVector::from_column_slice(seed);
    for _ in 0..NEWTON_MAX_ITER {
        let f = field.eval(x.as_slice());
        if f.amax() <= NEWTON_TOL {
            return Some(polish(field, x).as_slice().to_vec());
        }
        let dx = field.jacobian(x.as_slice()).lu().solve(&f)?;
        x -= dx;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    (field.eval(x.as_slice()).amax() <= NEWTON_TOL).then(|| x.as_slice().to_vec())
}

/// A few extra Newton steps past the tolerance, kept while the residual drops.
fn polish(field: &FoliatedVectorField, mut x: DVector<f64>) -> DVector<f64> {
    let mut r = field.eval(x.as_slice()).amax();
    for _ in 0..3 {
        let f = field.eval(x.as_slice());
        let Some(dx) = field.jacobian(x.as_slice()).lu().solve(&f) else { break };
        let y = &x - dx;
        let ry = field.eval(y.as_slice()).amax();
        if ry >= r {
            break;
        }
        x = y;
        r = ry;
    }
    x
}

fn seed_grid(n: usize) -> Vec<Vec<f64>> {
    let total = SEEDS_PER_DIM.pow(n as u32);
    (0..total)
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let i = k % SEEDS_PER_DIM;
                    k /= SEEDS_PER_DIM;
                    (i as f64 + 0.5) / SEEDS_PER_DIM as f64
                })
                .collect()
        })
        .collect()
}

/// Fixed points of `φ^t`, `t > 0`.
pub fn fixed_points(flow: &FlowSpec, t: f64) -> Result<FixedPointSet> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::ModelMismatch("fixed points need t > 0".into()));
    }
    match flow.kind() {
        FlowKind::Suspension { .. } => Ok(FixedPointSet { records: Vec::new(), nonconverged_seeds: 0 }),
        FlowKind::Affine { model, velocity } => {
            let shift: Vec<f64> = velocity.iter().map(|v| t * v).collect();
            let residual = shift.iter().map(|s| (s - s.round()).abs()).fold(0.0, f64::max);
            let mut records = Vec::new();
            if residual < NEWTON_TOL {
                let n = model.ambient();
                let (tangential, transverse) = flow.linearize_at(t, &vec![0.0; n])?;
                records.push(FixedPointRecord {
                    location: vec![0.0; n],
                    t,
                    tangential,
                    transverse,
                    residual,
                    isolated: false,
                });
            }
            Ok(FixedPointSet { records, nonconverged_seeds: 0 })
        }
        FlowKind::VectorField { field, .. } => {
            let n = field.model().ambient();
            let outcomes: Vec<Option<Vec<f64>>> =
                seed_grid(n).par_iter().map(|s| newton(field, s).map(|x| canonical(&x))).collect();
            let nonconverged_seeds = outcomes.iter().filter(|o| o.is_none()).count();
            let mut found: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
            found.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let mut unique: Vec<Vec<f64>> = Vec::new();
            for x in found {
                if unique.iter().all(|u| torus_distance(u, &x) > DEDUP_RADIUS) {
                    unique.push(x);
                }
            }
            let records = unique
                .par_iter()
                .map(|x| {
                    let (tangential, transverse) = flow.linearize_at(t, x)?;
                    Ok(FixedPointRecord {
                        location: x.clone(),
                        t,
                        tangential,
                        transverse,
                        residual: field.eval(x).amax(),
                        isolated: true,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FixedPointSet { records, nonconverged_seeds })
        }
    }
}

/// Periodic orbit of the suspension flow through `(b, 0)`.
#[derive(Clone, Debug)]
pub struct PeriodicOrbitRecord {
    /// Fibre coordinates of the representative (the smallest orbit point).
    pub point: RationalPoint,
    pub least_period: usize,
    /// Number of turns `ν`; the coincidence time is `ν · l(γ)`.
    pub multiplicity: usize,
    /// `A^{l(γ)}`
    pub least_return: IntMatrix,
    /// `A^{ν l(γ)}`
    pub return_map: IntMatrix,
    /// Reduced transverse map, always `0 × 0` for suspensions.
    pub reduced_transverse: DMatrix<f64>,
    /// `det(id − A^{ν l(γ)})`
    pub det_tangential: i128,
}

impl PeriodicOrbitRecord {
    pub fn period(&self) -> usize {
        self.least_period * self.multiplicity
    }
}

/// All periodic orbits with `ν l(γ) ≤ period_max`, sorted by period then point.
pub fn periodic_orbits_suspension(model: &SuspensionModel, period_max: usize) -> Result<Vec<PeriodicOrbitRecord>> {
    let a = model.monodromy();
    let d = model.fiber_dim();
    let per_period = (1..=period_max)
        .into_par_iter()
        .map(|period| {
            let power = a.pow(period as u32);
            let m = power.sub(&IntMatrix::identity(d));
            let det_tangential = IntMatrix::identity(d).sub(&power).det();
            if det_tangential == 0 {
                return Err(Error::NonHyperbolic(format!("det(A^{period} − id) = 0")));
            }
            let points = torsion_points(&m)?;
            let mut seen: BTreeSet<RationalPoint> = BTreeSet::new();
            let mut records = Vec::new();
            for p in &points {
                if seen.contains(p) {
                    continue;
                }
                let mut q = p.clone();
                let mut l = 0;
                loop {
                    seen.insert(q.clone());
                    q = q.apply(a);
                    l += 1;
                    if &q == p {
                        break;
                    }
                }
                records.push(PeriodicOrbitRecord {
                    point: p.clone(),
                    least_period: l,
                    multiplicity: period / l,
                    least_return: a.pow(l as u32),
                    return_map: power.clone(),
                    reduced_transverse: DMatrix::zeros(0, 0),
                    det_tangential,
                });
            }
            Ok(records)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_period.into_iter().flatten().collect())
}

/// Map induced on `Q / R·X̄` by a transverse block, in an orthonormal
/// complement of `X̄`.
pub fn reduced_transverse_map(transverse: &DMatrix<f64>, xbar: &DVector<f64>) -> Result<DMatrix<f64>> {
    if xbar.norm() < NEWTON_TOL {
        return Err(Error::QuotientUndefined);
    }
    let line = DMatrix::from_column_slice(xbar.len(), 1, (xbar / xbar.norm()).as_slice());
    let c = linalg::complement(&line);
    Ok(c.transpose() * transverse * &c)
}

/// Reduced transverse map at a periodic point of any flow.
pub fn reduced_transverse_at(flow: &FlowSpec, period: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    let (_, transverse) = flow.linearize_at(period, x)?;
    reduced_transverse_map(&transverse, &flow.transverse_velocity(x))
}

/// Determinant data for one coincidence component.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphTransversality {
    pub transversal: bool,
    /// `(t, det(id − 𝓕), det(id − 𝓠))` per sampled time.
    pub samples: Vec<(f64, f64, f64)>,
    /// Sign of `det(id − 𝓕)` is the same at every sample.
    pub sign_stable: bool,
}

fn det_id_minus(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    linalg::det(&(DMatrix::identity(n, n) - m))
}

pub fn fixed_point_transversality(flow: &FlowSpec, record: &FixedPointRecord, times: &[f64]) -> Result<GraphTransversality> {
    let mut samples = vec![(record.t, det_id_minus(&record.tangential), det_id_minus(&record.transverse))];
    for &t in times {
        if t != record.t {
            let (f, q) = flow.linearize_at(t, &record.location)?;
            samples.push((t, det_id_minus(&f), det_id_minus(&q)));
        }
    }
    let transversal = record.isolated
        && samples[0].1.abs() > DET_TOL
        && samples.iter().all(|&(_, _, dq)| dq.abs() > DET_TOL);
    let s0 = samples[0].1.signum();
    let sign_stable = samples.iter().all(|&(_, df, _)| df.signum() == s0 && df.abs() > DET_TOL);
    Ok(GraphTransversality { transversal, samples, sign_stable })
}

pub fn orbit_transversality(record: &PeriodicOrbitRecord) -> GraphTransversality {
    let dq = det_id_minus(&record.reduced_transverse);
    let df = record.det_tangential as f64;
    GraphTransversality {
        transversal: df.abs() > DET_TOL && dq.abs() > DET_TOL,
        samples: vec![(record.period() as f64, df, dq)],
        sign_stable: true,
    }
}

/// Per-record transversality of the graph of the flow with the diagonal.
pub fn transversality_check_graphs(flow: &FlowSpec, records: &[FixedPointRecord]) -> Result<Vec<GraphTransversality>> {
    records
        .par_iter()
        .map(|r| fixed_point_transversality(flow, r, &TRANSVERSALITY_SAMPLES))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TrigPoly;
    use std::f64::consts::PI;

    fn morse_flow() -> FlowSpec {
        let m = Arc::new(FoliatedTorusModel::one_leaf(2));
        FlowSpec::vector_field(FoliatedVectorField::morse(m).unwrap(), DEFAULT_STEP).unwrap()
    }

    /// `u' = sin u` has `tan(u/2) ↦ tan(u/2) e^t`.
    fn morse_exact(x: f64, t: f64) -> f64 {
        let u = 2.0 * PI * x;
        let v = 2.0 * ((u / 2.0).tan() * t.exp()).atan();
        v / (2.0 * PI)
    }

    #[test]
    fn identity_at_time_zero() {
        let flow = morse_flow();
        assert_eq!(flow.flow_map(0.0, &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        let a = FlowSpec::affine(Arc::new(FoliatedTorusModel::kronecker(0.5).unwrap()), vec![0.3, 1.7]).unwrap();
        let y = a.flow_map(1.0, &[0.0, 0.0]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn morse_rk4_matches_closed_form() {
        let flow = morse_flow();
        let y = flow.flow_map(1.0, &[0.25, 0.25]).unwrap();
        let exact = morse_exact(0.25, 1.0);
        assert!((y[0] - exact).abs() < 1e-8 && (y[1] - exact).abs() < 1e-8, "{y:?} vs {exact}");
    }

    #[test]
    fn group_law() {
        let flow = morse_flow();
        let x = [0.13, 0.71];
        let direct = flow.flow_map(1.1, &x).unwrap();
        let composed = flow.flow_map(0.4, &flow.flow_map(0.7, &x).unwrap()).unwrap();
        assert!(torus_distance(&direct, &composed) < 1e-10);

        let susp = FlowSpec::suspension(Arc::new(SuspensionModel::cat_map()));
        let p = [0.2, 0.6, 0.7];
        let direct = susp.flow_map(2.5, &p).unwrap();
        let composed = susp.flow_map(1.2, &susp.flow_map(1.3, &p).unwrap()).unwrap();
        assert!(torus_distance(&direct, &composed) < 1e-12);
    }

    #[test]
    fn variational_jacobian_matches_finite_differences() {
        let m = Arc::new(FoliatedTorusModel::one_leaf(2));
        let field = FoliatedVectorField::new(
            m,
            vec![
                TrigPoly::sin(vec![1, 1], 0.2).add(&TrigPoly::cos(vec![0, 1], 0.1)),
                TrigPoly::cos(vec![1, -1], 0.15),
            ],
        )
        .unwrap();
        let flow = FlowSpec::vector_field(field, DEFAULT_STEP).unwrap();
        let x = [0.31, 0.58];
        let (_, jac) = flow.lifted_flow(0.8, &x).unwrap();
        let h = 1e-6;
        for b in 0..2 {
            let mut plus = x;
            let mut minus = x;
            plus[b] += h;
            minus[b] -= h;
            let (yp, _) = flow.lifted_flow(0.8, &plus).unwrap();
            let (ym, _) = flow.lifted_flow(0.8, &minus).unwrap();
            for a in 0..2 {
                assert!((jac[(a, b)] - (yp[a] - ym[a]) / (2.0 * h)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn morse_fixed_points_and_blocks() {
        let flow = morse_flow();
        let set = fixed_points(&flow, 1.0).unwrap();
        let expected_locs = [[0.0, 0.0], [0.0, 0.5], [0.5, 0.0], [0.5, 0.5]];
        assert_eq!(set.records.len(), 4);
        for (r, e) in set.records.iter().zip(expected_locs) {
            assert!(torus_distance(&r.location, &e) < 1e-12, "{:?}", r.location);
        }
        let e = 1f64.exp();
        let expected = [(e, e), (e, 1.0 / e), (1.0 / e, e), (1.0 / e, 1.0 / e)];
        for (r, (a, b)) in set.records.iter().zip(expected) {
            assert!((r.tangential[(0, 0)] - a).abs() < 1e-10 && (r.tangential[(1, 1)] - b).abs() < 1e-10);
            assert!(r.tangential[(0, 1)].abs() < 1e-12 && r.transverse.nrows() == 0);
        }
        let flags = transversality_check_graphs(&flow, &set.records).unwrap();
        assert!(flags.iter().all(|f| f.transversal && f.sign_stable));
    }

    #[test]
    fn affine_fixed_points() {
        let kron = Arc::new(FoliatedTorusModel::kronecker((5f64.sqrt() - 1.0) / 2.0).unwrap());
        let irr = FlowSpec::affine(kron, vec![2f64.sqrt(), 3f64.sqrt()]).unwrap();
        assert!(fixed_points(&irr, 1.0).unwrap().records.is_empty());

        let one = Arc::new(FoliatedTorusModel::one_leaf(2));
        let rational = FlowSpec::affine(one, vec![1.0, 2.0]).unwrap();
        let set = fixed_points(&rational, 1.0).unwrap();
        assert_eq!(set.records.len(), 1);
        assert!(!set.records[0].isolated);
        let flags = transversality_check_graphs(&rational, &set.records).unwrap();
        assert!(!flags[0].transversal);
        assert!(fixed_points(&rational, 0.5).unwrap().records.is_empty());
    }

    #[test]
    fn suspension_has_no_fixed_points_and_constant_linearization() {
        let flow = FlowSpec::suspension(Arc::new(SuspensionModel::cat_map()));
        assert!(fixed_points(&flow, 1.0).unwrap().records.is_empty());
        let (f1, q1) = flow.linearize_at(1.0, &[0.1, 0.2, 0.0]).unwrap();
        let (f2, q2) = flow.linearize_at(1.0, &[0.7, 0.4, 0.0]).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(q1, q2);
        assert_eq!(f1, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        let xbar = flow.transverse_velocity(&[0.0, 0.0, 0.0]);
        assert_eq!(reduced_transverse_map(&q1, &xbar).unwrap().nrows(), 0);
    }

    #[test]
    fn cat_orbits() {
        let model = SuspensionModel::cat_map();
        let orbits = periodic_orbits_suspension(&model, 3).unwrap();
        let count = |p: usize| orbits.iter().filter(|o| o.period() == p).map(|o| o.least_period).sum::<usize>();
        assert_eq!((count(1), count(2), count(3)), (1, 5, 16));
        let p3: Vec<_> = orbits.iter().filter(|o| o.period() == 3 && o.least_period == 3).collect();
        assert_eq!(p3.len(), 5);
        assert!(orbits.iter().all(|o| orbit_transversality(o).transversal));
    }

    /// Brute force over the grid `(1/N) Z^2`, `N = |det(A^ν − id)|`.
    #[test]
    fn orbit_enumeration_complete() {
        let model = SuspensionModel::cat_map();
        let orbits = periodic_orbits_suspension(&model, 8).unwrap();
        let a = model.monodromy();
        for nu in 1..=8usize {
            let det = a.pow(nu as u32).sub(&IntMatrix::identity(2)).det().abs();
            let total: usize = orbits.iter().filter(|o| o.period() == nu).map(|o| o.least_period).sum();
            assert_eq!(total as i128, det);
            for o in orbits.iter().filter(|o| o.period() == nu) {
                assert_eq!(o.point.orbit_length(a, 1000), Some(o.least_period));
                assert_eq!(o.return_map, a.pow(nu as u32));
            }
            if nu <= 5 {
                let n = det;
                let p = a.pow(nu as u32);
                let mut brute = 0;
                for i in 0..n {
                    for j in 0..n {
                        let x = RationalPoint::new(vec![i, j], n);
                        if x.apply(&p) == x {
                            brute += 1;
                        }
                    }
                }
                assert_eq!(brute, det);
            }
        }
    }

    #[test]
    fn non_hyperbolic_monodromy_rejected() {
        let model = SuspensionModel::new(IntMatrix::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap()).unwrap();
        assert!(matches!(periodic_orbits_suspension(&model, 2), Err(Error::NonHyperbolic(_))));
    }

    #[test]
    fn reduced_map_needs_transverse_velocity() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(matches!(
            reduced_transverse_map(&q, &DVector::from_vec(vec![0.0, 0.0])),
            Err(Error::QuotientUndefined)
        ));
        let r = reduced_transverse_map(&q, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((r[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn cocycle_laws() {
        let c = Cocycle::exponential(0.37);
        assert_eq!(c.value(0.0), 1.0);
        for (s, t) in [(0.5, 1.25), (2.0, -0.75), (0.1, 0.2)] {
            assert!((c.value(s + t) - c.value(s) * c.value(t)).abs() < 1e-14 * c.value(s + t));
        }
        assert_eq!(Cocycle::trivial().value(3.0), 1.0);
    }

    #[test]
    fn linear_part_and_time_map() {
        let flow = morse_flow();
        assert_eq!(flow.linear_part(1.3).unwrap(), IntMatrix::identity(2));
        let f = flow.time_map(1.0).unwrap();
        assert!(f.is_foliated());
        let m = Arc::new(FoliatedTorusModel::new(3, &[vec![1.0, 0.0, 0.0]]).unwrap());
        let field = FoliatedVectorField::constant(m, &[1.0, 0.0, 0.0]).unwrap();
        let flow = FlowSpec::vector_field(field, DEFAULT_STEP).unwrap();
        assert!(matches!(flow.time_map(1.0), Err(Error::Unsupported(_))));
    }
}
