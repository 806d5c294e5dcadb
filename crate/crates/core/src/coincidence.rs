//! Both sides of the dynamical Lefschetz and coincidence formulas: local
//! contributions assembled into a distribution on `(0, ∞)`, and alternating
//! traces on reduced leafwise cohomology.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    fixed_point_transversality, fixed_points, orbit_transversality, periodic_orbits_suspension, Cocycle,
    FixedPointRecord, FlowKind, FlowSpec, GraphTransversality, PeriodicOrbitRecord, DET_TOL, TRANSVERSALITY_SAMPLES,
};
use crate::error::{Error, Result};
use crate::hodge::{alternating_trace, duality_pairing_matrix, CohomologyBasis, SpectralTruncation};
use crate::lattice::{torsion_points, IntMatrix};
use crate::linalg;
use crate::models::{wrap_point, AffineFoliatedMap, FoliatedTorusModel};

pub const DEFAULT_GRID_POINTS: usize = 512;
pub const ATOM_MERGE_TOL: f64 = 1e-9;
pub const SMOOTH_TOL: f64 = 1e-6;
pub const ATOM_TOL: f64 = 1e-9;
/// Time at which the sign of `det(id − 𝓕_a φ^t)` is read.
pub const REFERENCE_TIME: f64 = 1.0;

/// `t_i = t_max (i+1)/n`, `i = 0..n`.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max > 0.0) || n == 0 {
        return Err(Error::Config(format!("invalid time grid (t_max = {t_max}, {n} points)")));
    }
    Ok((1..=n).map(|i| t_max * i as f64 / n as f64).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("time grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    #[serde(rename = "w")]
    pub weight: f64,
    /// Integer weight when every contribution is an exact integer.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<i64>,
}

/// Sampled density plus point masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionOnRPlus {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub atoms: Vec<Atom>,
}

impl DistributionOnRPlus {
    pub fn zero(grid: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        let density = vec![0.0; grid.len()];
        Ok(Self { grid, density, atoms: Vec::new() })
    }

    /// Linear interpolation of the density; `None` off the grid.
    pub fn evaluate(&self, t: f64) -> Option<f64> {
        interpolate(&self.grid, &self.density, t)
    }

    pub fn add_density(&mut self, samples: &[f64]) {
        for (d, s) in self.density.iter_mut().zip(samples) {
            *d += s;
        }
    }

    /// Sorts atoms and merges those closer than the merge tolerance.
    pub fn add_atoms(&mut self, atoms: impl IntoIterator<Item = Atom>) {
        let mut all: Vec<Atom> = self.atoms.drain(..).chain(atoms).collect();
        all.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut merged: Vec<Atom> = Vec::new();
        for a in all {
            match merged.last_mut() {
                Some(last) if (a.t - last.t).abs() <= ATOM_MERGE_TOL => {
                    last.weight += a.weight;
                    last.exact = last.exact.zip(a.exact).map(|(x, y)| x + y);
                }
                _ => merged.push(a),
            }
        }
        self.atoms = merged;
    }

    pub fn max_abs_density(&self) -> f64 {
        self.density.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn max_abs_atom(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.weight.abs()))
    }
}

fn interpolate(grid: &[f64], values: &[f64], t: f64) -> Option<f64> {
    if grid.is_empty() || t < grid[0] || t > grid[grid.len() - 1] {
        return None;
    }
    let i = grid.partition_point(|&g| g <= t);
    if i == grid.len() {
        return Some(values[grid.len() - 1]);
    }
    let (t0, t1) = (grid[i - 1], grid[i]);
    let s = (t - t0) / (t1 - t0);
    Some(values[i - 1] * (1.0 - s) + values[i] * s)
}

/// `∫ density·g dt + Σ w g(t₀)` with the trapezoidal rule on the grid.
pub fn pair_distribution(d: &DistributionOnRPlus, g: &[f64]) -> Result<f64> {
    if g.len() != d.grid.len() {
        return Err(Error::Support("test function is not sampled on the distribution grid".into()));
    }
    let last = g.len() - 1;
    let edge = (d.density[0] * g[0]).abs().max((d.density[last] * g[last]).abs());
    if edge > 1e-12 {
        return Err(Error::Support("density times test function does not vanish at the grid ends".into()));
    }
    let mut total = 0.0;
    for i in 0..last {
        total += 0.5 * (d.grid[i + 1] - d.grid[i]) * (d.density[i] * g[i] + d.density[i + 1] * g[i + 1]);
    }
    for a in &d.atoms {
        let ga = interpolate(&d.grid, g, a.t)
            .ok_or_else(|| Error::Support(format!("atom at t = {} lies outside the grid", a.t)))?;
        total += a.weight * ga;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionKind {
    FixedPoint,
    PeriodicOrbit,
}

/// One summand of the local side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalContribution {
    pub kind: ContributionKind,
    pub location: Vec<f64>,
    /// `sgn det(id − 𝓕φ)`
    pub sign: i8,
    /// `1/|det(id − 𝓠φ)|` or `1/|det(id − Q̄φ)|`, at `t`.
    pub magnitude: f64,
    pub trace_factor: f64,
    /// Reference time for fixed points, `ν l(γ)` for orbits.
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub least_period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<usize>,
}

fn det_id_minus(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    linalg::det(&(DMatrix::identity(n, n) - m))
}

/// Contribution of an isolated fixed point and its density on `grid`.
pub fn fixed_point_contribution(
    record: &FixedPointRecord,
    flow: &FlowSpec,
    grid: &[f64],
) -> Result<(LocalContribution, Vec<f64>)> {
    check_grid(grid)?;
    if !record.isolated {
        return Err(Error::Degenerate(format!("fixed points of φ^{} are not isolated", record.t)));
    }
    let df = det_id_minus(&record.tangential);
    if df.abs() <= DET_TOL {
        return Err(Error::NotTransversal(format!("det(id − 𝓕) = {df:e} at {:?}", record.location)));
    }
    let sign: i8 = if df > 0.0 { 1 } else { -1 };
    let rho = flow.cocycle();
    let q = record.transverse.nrows();
    let mut density = Vec::with_capacity(grid.len());
    let mut jac = DMatrix::<f64>::identity(flow.ambient(), flow.ambient());
    let mut prev = 0.0;
    let (_, u_frame) = frames_of(flow);
    for &t in grid {
        let dq = if q == 0 {
            1.0
        } else {
            // the point is fixed, so Dφ^t composes along the grid
            let (_, step) = flow.lifted_flow(t - prev, &record.location)?;
            jac = step * jac;
            prev = t;
            det_id_minus(&(u_frame.transpose() * &jac * &u_frame))
        };
        if dq.abs() <= DET_TOL {
            return Err(Error::NotTransversal(format!("det(id − 𝓠) = {dq:e} at t = {t}")));
        }
        density.push(sign as f64 * rho.value(t) / dq.abs());
    }
    let contribution = LocalContribution {
        kind: ContributionKind::FixedPoint,
        location: record.location.clone(),
        sign,
        magnitude: 1.0 / det_id_minus(&record.transverse).abs(),
        trace_factor: rho.value(record.t),
        t: record.t,
        least_period: None,
        multiplicity: None,
    };
    Ok((contribution, density))
}

fn frames_of(flow: &FlowSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    match flow.torus_model() {
        Some(m) => (m.tangential_frame().clone(), m.transverse_frame().clone()),
        None => {
            let n = flow.ambient();
            let id = DMatrix::<f64>::identity(n, n);
            (id.columns(0, n - 1).into_owned(), id.columns(n - 1, 1).into_owned())
        }
    }
}

/// Atom `l(γ) · sgn det(id − 𝓕) · Tr ρ / |det(id − Q̄)|` at `ν l(γ)`.
pub fn orbit_contribution(record: &PeriodicOrbitRecord, cocycle: Cocycle) -> Result<(LocalContribution, Atom)> {
    let flag = orbit_transversality(record);
    if !flag.transversal {
        return Err(Error::NotTransversal(format!("orbit through {:?} is degenerate", record.point)));
    }
    let sign: i8 = if record.det_tangential > 0 { 1 } else { -1 };
    let t0 = record.period() as f64;
    let dq = det_id_minus(&record.reduced_transverse).abs();
    let trace = cocycle.value(t0);
    let l = record.least_period as f64;
    let weight = l * sign as f64 * trace / dq;
    let exact = (cocycle.rate == 0.0 && dq == 1.0).then(|| record.least_period as i64 * sign as i64);
    let mut location = record.point.to_f64();
    location.push(0.0);
    let contribution = LocalContribution {
        kind: ContributionKind::PeriodicOrbit,
        location,
        sign,
        magnitude: 1.0 / dq,
        trace_factor: trace,
        t: t0,
        least_period: Some(record.least_period),
        multiplicity: Some(record.multiplicity),
    };
    Ok((contribution, Atom { t: t0, weight, exact }))
}

/// Local side of the formula together with the data it was built from.
#[derive(Clone, Debug, Serialize)]
pub struct LefschetzDistribution {
    pub distribution: DistributionOnRPlus,
    pub contributions: Vec<LocalContribution>,
    pub transversality: Vec<GraphTransversality>,
    pub nonconverged_seeds: usize,
    /// Every fixed-point sign agreed across the sampled times.
    pub sign_stable: bool,
}

/// First `t ∈ (0, t_max]` with `t v ∈ Z^n`, if any.
fn affine_period(v: &[f64], t_max: f64) -> Option<f64> {
    let vmax = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if vmax == 0.0 {
        return Some(0.0);
    }
    let kmax = (t_max * vmax + 1e-9).floor() as i64;
    (1..=kmax).map(|k| k as f64 / vmax).find(|&t| v.iter().all(|x| (t * x - (t * x).round()).abs() < 1e-9))
}

pub fn assemble_lefschetz_distribution(flow: &FlowSpec, t_max: f64, grid: &[f64]) -> Result<LefschetzDistribution> {
    check_grid(grid)?;
    let mut distribution = DistributionOnRPlus::zero(grid.to_vec())?;
    let mut contributions = Vec::new();
    let mut transversality = Vec::new();
    let mut nonconverged_seeds = 0;
    let mut sign_stable = true;
    match flow.kind() {
        FlowKind::Affine { velocity, .. } => match affine_period(velocity, t_max) {
            Some(0.0) => return Err(Error::Degenerate("the zero flow fixes every point".into())),
            Some(t) => {
                return Err(Error::Degenerate(format!("every orbit is closed with period {t}; orbits are not isolated")))
            }
            None => {}
        },
        FlowKind::VectorField { .. } => {
            let set = fixed_points(flow, REFERENCE_TIME)?;
            nonconverged_seeds = set.nonconverged_seeds;
            let results = set
                .records
                .par_iter()
                .map(|r| {
                    let flag = fixed_point_transversality(flow, r, &TRANSVERSALITY_SAMPLES)?;
                    if !flag.transversal {
                        return Err(Error::NotTransversal(format!("fixed point {:?}", r.location)));
                    }
                    let (c, density) = fixed_point_contribution(r, flow, grid)?;
                    Ok((flag, c, density))
                })
                .collect::<Result<Vec<_>>>()?;
            for (flag, c, density) in results {
                sign_stable &= flag.sign_stable;
                transversality.push(flag);
                distribution.add_density(&density);
                contributions.push(c);
            }
        }
        FlowKind::Suspension { model } => {
            let period_max = (t_max + ATOM_MERGE_TOL).floor() as usize;
            let orbits = periodic_orbits_suspension(model, period_max)?;
            let mut atoms = Vec::with_capacity(orbits.len());
            for o in &orbits {
                let (c, atom) = orbit_contribution(o, flow.cocycle())?;
                transversality.push(orbit_transversality(o));
                contributions.push(c);
                atoms.push(atom);
            }
            distribution.add_atoms(atoms);
        }
    }
    Ok(LefschetzDistribution { distribution, contributions, transversality, nonconverged_seeds, sign_stable })
}

/// A one-parameter family of affine foliated self-maps with a scalar trace factor.
pub trait MapFamily: Sync {
    fn model(&self) -> Result<Arc<FoliatedTorusModel>>;
    fn map_at(&self, t: f64) -> Result<AffineFoliatedMap>;
    fn trace_factor(&self, t: f64) -> f64;
}

impl MapFamily for FlowSpec {
    fn model(&self) -> Result<Arc<FoliatedTorusModel>> {
        self.torus_model()
            .cloned()
            .ok_or_else(|| Error::Unsupported("reduced leafwise cohomology of a suspension".into()))
    }

    fn map_at(&self, t: f64) -> Result<AffineFoliatedMap> {
        self.time_map(t)
    }

    fn trace_factor(&self, t: f64) -> f64 {
        self.cocycle().value(t)
    }
}

/// The same map at every time.
pub struct ConstantFamily {
    pub map: AffineFoliatedMap,
    pub cocycle: Cocycle,
}

impl MapFamily for ConstantFamily {
    fn model(&self) -> Result<Arc<FoliatedTorusModel>> {
        Ok(self.map.domain().clone())
    }

    fn map_at(&self, _t: f64) -> Result<AffineFoliatedMap> {
        Ok(self.map.clone())
    }

    fn trace_factor(&self, t: f64) -> f64 {
        self.cocycle.value(t)
    }
}

/// `L(φ^t) = Tr ρ^t · Σ_κ (−1)^κ Tr(φ^{t*} | H̄^κ)` on the grid.
pub fn lefschetz_number_function(family: &dyn MapFamily, basis: &CohomologyBasis, grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    grid.par_iter()
        .map(|&t| Ok(family.trace_factor(t) * alternating_trace(&family.map_at(t)?, basis)?))
        .collect()
}

/// Which side of the formula could be certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationMode {
    Full,
    Partial,
}

/// Aggregated atom weight at an integer time against `det(id − A^ν)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomOracle {
    pub t: usize,
    pub weight: Option<i64>,
    pub oracle: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LefschetzVerification {
    pub mode: VerificationMode,
    pub transversal: bool,
    pub finite_dimensional: bool,
    pub notes: Vec<String>,
    pub local_side: Option<LefschetzDistribution>,
    pub trace_side: Option<Vec<f64>>,
    pub max_smooth_deviation: Option<f64>,
    pub max_atom_weight: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub atom_oracle: Vec<AtomOracle>,
    /// In full mode: both identities hold. In partial mode: the certified side
    /// matches its own oracle.
    pub pass: bool,
}

/// `det(id − A^ν)` for `ν = 1..=n`.
pub fn suspension_atom_oracle(a: &IntMatrix, n: usize) -> Vec<i64> {
    let d = a.rows();
    (1..=n).map(|nu| IntMatrix::identity(d).sub(&a.pow(nu as u32)).det() as i64).collect()
}

/// Compares both sides of the formula on `grid`; falls back to a labelled
/// partial report when one of the hypotheses fails.
pub fn verify_dynamical_lefschetz(
    flow: &FlowSpec,
    trunc: &SpectralTruncation,
    t_max: f64,
    grid: &[f64],
) -> Result<LefschetzVerification> {
    let mut notes = Vec::new();
    let local = match assemble_lefschetz_distribution(flow, t_max, grid) {
        Ok(d) => Some(d),
        Err(e) if e.is_hypothesis_violation() => {
            notes.push(format!("local side unavailable: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let mut finite_dimensional = false;
    let trace = match flow.torus_model() {
        None => {
            notes.push("reduced leafwise cohomology of the suspension is infinite-dimensional".into());
            None
        }
        Some(model) => {
            let basis = CohomologyBasis::new(model.clone(), *trunc);
            finite_dimensional = basis.finite_dimensional();
            match lefschetz_number_function(flow, &basis, grid) {
                Ok(l) => Some(l),
                Err(e) if e.is_hypothesis_violation() => {
                    notes.push(format!("trace side unavailable: {e}"));
                    None
                }
                Err(e) => return Err(e),
            }
        }
    };
    let transversal = local.is_some();
    let mut report = LefschetzVerification {
        mode: VerificationMode::Partial,
        transversal,
        finite_dimensional,
        notes,
        max_smooth_deviation: None,
        max_atom_weight: local.as_ref().map(|d| d.distribution.max_abs_atom()),
        atom_oracle: Vec::new(),
        pass: false,
        local_side: local,
        trace_side: trace,
    };
    match (&report.local_side, &report.trace_side) {
        (Some(local), Some(trace)) => {
            let dev = local.distribution.density.iter().zip(trace).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let atoms = local.distribution.max_abs_atom();
            report.mode = VerificationMode::Full;
            report.max_smooth_deviation = Some(dev);
            report.pass = dev < SMOOTH_TOL && atoms < ATOM_TOL;
        }
        (Some(local), None) => {
            if let FlowKind::Suspension { model } = flow.kind() {
                let n = (t_max + ATOM_MERGE_TOL).floor() as usize;
                let oracle = suspension_atom_oracle(model.monodromy(), n);
                report.atom_oracle = oracle
                    .iter()
                    .enumerate()
                    .map(|(i, &o)| AtomOracle {
                        t: i + 1,
                        weight: local
                            .distribution
                            .atoms
                            .iter()
                            .find(|a| (a.t - (i + 1) as f64).abs() <= ATOM_MERGE_TOL)
                            .and_then(|a| a.exact),
                        oracle: o,
                    })
                    .collect();
                report.pass = report.atom_oracle.iter().all(|a| a.weight == Some(a.oracle));
            }
        }
        (None, Some(_)) => report.pass = true,
        (None, None) => {}
    }
    Ok(report)
}

/// Fixed-point side against the alternating trace for a single affine self-map.
#[derive(Clone, Debug, Serialize)]
pub struct ClassicalLefschetzReport {
    pub fixed_points: Vec<Vec<f64>>,
    pub det_id_minus_b: i64,
    pub left: i64,
    pub traces: Vec<f64>,
    pub right_numeric: f64,
    pub right: i64,
    pub rounding_residual: f64,
    pub pass: bool,
}

/// Classical Lefschetz trace formula on a model with a single leaf.
pub fn classical_lefschetz_check(f: &AffineFoliatedMap, basis: &CohomologyBasis) -> Result<ClassicalLefschetzReport> {
    let model = f.domain();
    if model.codim() != 0 {
        return Err(Error::Unsupported("the classical check needs a model with a single leaf".into()));
    }
    let n = model.ambient();
    let b = f.matrix();
    let m = IntMatrix::identity(n).sub(b);
    let det = m.det();
    if det == 0 {
        return Err(Error::NonHyperbolic("det(id − B) = 0".into()));
    }
    // (id − B) x ≡ c: particular solution plus the torsion points of id − B
    let c = nalgebra::DVector::from_column_slice(f.translation_part());
    let x0 = m.to_f64().lu().solve(&c).ok_or(Error::NonHyperbolic("singular id − B".into()))?;
    let mut fixed: Vec<Vec<f64>> = torsion_points(&m)?
        .iter()
        .map(|p| {
            let shifted: Vec<f64> = p.to_f64().iter().zip(x0.iter()).map(|(a, b)| a + b).collect();
            wrap_point(&shifted)
        })
        .collect();
    fixed.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let sign = det.signum() as i64;
    let left = fixed.len() as i64 * sign;
    let traces: Vec<f64> = (0..=model.leaf_dim())
        .map(|k| Ok(crate::hodge::pullback_matrix_on_cohomology(f, basis, k)?.trace()))
        .collect::<Result<_>>()?;
    let right_numeric: f64 = traces.iter().enumerate().map(|(k, t)| if k % 2 == 0 { *t } else { -t }).sum();
    let right = right_numeric.round() as i64;
    let rounding_residual = (right_numeric - right as f64).abs();
    Ok(ClassicalLefschetzReport {
        fixed_points: fixed,
        det_id_minus_b: det as i64,
        left,
        traces,
        right_numeric,
        right,
        rounding_residual,
        pass: left == right && rounding_residual < 1e-9,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoincidenceReport {
    pub grid: Vec<f64>,
    /// `Σ_κ (−1)^κ Σ_{i,k} x^{κ,i}_k y^{κ,k}_i` from dual bases.
    pub dual_basis_side: Vec<f64>,
    pub trace_side: Vec<f64>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Dual-basis expansion of the alternating trace for a family paired with
/// the identity, against the orthonormal-basis traces.
pub fn coincidence_theorem_check(family: &dyn MapFamily, basis: &CohomologyBasis, grid: &[f64]) -> Result<CoincidenceReport> {
    let model = family.model()?;
    let p = model.leaf_dim();
    let inverses: Vec<DMatrix<f64>> = (0..=p)
        .map(|k| {
            let pm = duality_pairing_matrix(basis, k)?;
            pm.try_inverse().ok_or(Error::DualityFailure { degree: k, det: 0.0 })
        })
        .collect::<Result<_>>()?;
    let trace_side = lefschetz_number_function(family, basis, grid)?;
    let dual_basis_side = grid
        .par_iter()
        .map(|&t| {
            let f = family.map_at(t)?;
            let mut total = 0.0;
            for kappa in 0..=p {
                let lower = &basis.degrees()[kappa].representatives;
                let upper = &basis.degrees()[p - kappa].representatives;
                let c = &inverses[kappa];
                let mut tr = 0.0;
                for (k, w) in lower.iter().enumerate() {
                    let pulled = w.pullback(&f)?;
                    // x_kk = Σ_a C_ka ∫ ω^{p−κ}_a ∧ f^*ω_k ; y = δ for g = id
                    for (a, dual) in upper.iter().enumerate() {
                        tr += c[(k, a)] * dual.wedge(&pulled)?.integrate_volq()?.re;
                    }
                }
                total += if kappa % 2 == 0 { tr } else { -tr };
            }
            Ok(family.trace_factor(t) * total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_deviation = dual_basis_side.iter().zip(&trace_side).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CoincidenceReport { grid: grid.to_vec(), dual_basis_side, trace_side, max_deviation, pass: max_deviation < SMOOTH_TOL })
}
