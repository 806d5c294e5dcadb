//! Python bindings: models, tangential forms, cohomology, Lefschetz checks,
//! intersection products and scenario runs.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::foliated_lefschetz::coincidence::{classical_lefschetz_check, suspension_atom_oracle, uniform_grid, verify_dynamical_lefschetz};
use ::foliated_lefschetz::dynamics::FlowSpec;
use ::foliated_lefschetz::hodge::{duality_pairing_matrix, CohomologyBasis, SpectralTruncation};
use ::foliated_lefschetz::regularization::{intersection_closed_form, intersection_product_numeric, GridCurrent};
use ::foliated_lefschetz::runner::{self, RunOptions, ScenarioConfig, BUNDLED_SCENARIOS};
use ::foliated_lefschetz::{
    AffineFoliatedMap, Error, FoliatedTorusModel, IntMatrix, LatticeMode, LinearSubtorus, MultiIndex, SuspensionModel,
    TangentialForm,
};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Linear foliation of `T^n`.
#[pyclass(name = "FoliatedTorusModel", module = "foliated_lefschetz", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyModel {
    inner: Arc<FoliatedTorusModel>,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (n, directions, orientation = 1))]
    fn new(n: usize, directions: Vec<Vec<f64>>, orientation: i8) -> PyResult<Self> {
        let m = FoliatedTorusModel::new(n, &directions).and_then(|m| m.with_orientation(orientation)).map_err(py_err)?;
        Ok(Self { inner: Arc::new(m) })
    }

    #[staticmethod]
    fn one_leaf(n: usize) -> Self {
        Self { inner: Arc::new(FoliatedTorusModel::one_leaf(n)) }
    }

    #[staticmethod]
    fn kronecker(theta: f64) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(FoliatedTorusModel::kronecker(theta).map_err(py_err)?) })
    }

    fn product(&self, other: &PyModel) -> Self {
        Self { inner: Arc::new(self.inner.product(&other.inner)) }
    }

    #[getter]
    fn ambient(&self) -> usize {
        self.inner.ambient()
    }

    #[getter]
    fn leaf_dim(&self) -> usize {
        self.inner.leaf_dim()
    }

    #[getter]
    fn codim(&self) -> usize {
        self.inner.codim()
    }

    #[getter]
    fn orientation(&self) -> i8 {
        self.inner.orientation()
    }

    fn __repr__(&self) -> String {
        format!("FoliatedTorusModel(n={}, p={})", self.inner.ambient(), self.inner.leaf_dim())
    }
}

/// Trigonometric tangential form `Σ c e_m θ^I`.
#[pyclass(name = "TangentialForm", module = "foliated_lefschetz", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyForm {
    inner: TangentialForm,
}

type Term = (Vec<i64>, Vec<usize>, f64, f64);

#[pymethods]
impl PyForm {
    /// `terms`: `(mode, index, re, im)` tuples; indices are 0-based.
    #[new]
    #[pyo3(signature = (model, degree, terms = Vec::new()))]
    fn new(model: &PyModel, degree: usize, terms: Vec<Term>) -> PyResult<Self> {
        let mut f = TangentialForm::zero(model.inner.clone(), degree).map_err(py_err)?;
        for (m, i, re, im) in terms {
            let idx = MultiIndex::new(i).map_err(py_err)?;
            let term = TangentialForm::term(model.inner.clone(), LatticeMode(m), idx, Complex64::new(re, im)).map_err(py_err)?;
            f = f.add(&term).map_err(py_err)?;
        }
        Ok(Self { inner: f })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn terms(&self) -> Vec<Term> {
        self.inner.terms().map(|(m, i, c)| (m.0.clone(), i.indices().to_vec(), c.re, c.im)).collect()
    }

    fn d(&self) -> Self {
        Self { inner: self.inner.d_f() }
    }

    fn delta(&self) -> Self {
        Self { inner: self.inner.delta_f() }
    }

    fn star(&self) -> Self {
        Self { inner: self.inner.star() }
    }

    fn laplacian(&self) -> Self {
        Self { inner: self.inner.laplacian_f() }
    }

    fn wedge(&self, other: &PyForm) -> PyResult<Self> {
        Ok(Self { inner: self.inner.wedge(&other.inner).map_err(py_err)? })
    }

    fn __add__(&self, other: &PyForm) -> PyResult<Self> {
        Ok(Self { inner: self.inner.add(&other.inner).map_err(py_err)? })
    }

    fn __sub__(&self, other: &PyForm) -> PyResult<Self> {
        Ok(Self { inner: self.inner.sub(&other.inner).map_err(py_err)? })
    }

    fn scale(&self, re: f64, im: f64) -> Self {
        Self { inner: self.inner.scale(Complex64::new(re, im)) }
    }

    fn max_abs_coefficient(&self) -> f64 {
        self.inner.max_abs_coefficient()
    }

    fn l2_norm(&self) -> f64 {
        self.inner.l2_norm()
    }

    /// `∫ ω vol_Q` of a top-degree form, as `(re, im)`.
    fn integrate(&self) -> PyResult<(f64, f64)> {
        let v = self.inner.integrate_volq().map_err(py_err)?;
        Ok((v.re, v.im))
    }

    /// Coefficients at a point, keyed by index tuple, as `(re, im)`.
    fn evaluate(&self, x: Vec<f64>) -> BTreeMap<Vec<usize>, (f64, f64)> {
        self.inner.evaluate(&x).into_iter().map(|(i, v)| (i.indices().to_vec(), (v.re, v.im))).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_json()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("TangentialForm(degree={}, terms={})", self.inner.degree(), self.inner.num_terms())
    }
}

fn truncation(max_mode: i64) -> PyResult<SpectralTruncation> {
    SpectralTruncation::new(max_mode, SpectralTruncation::default().resonance_tol).map_err(py_err)
}

/// Dimensions of reduced leafwise cohomology and whether they are finite.
#[pyfunction]
#[pyo3(signature = (model, max_mode = 50))]
fn cohomology_dimensions(model: &PyModel, max_mode: i64) -> PyResult<(Vec<usize>, bool)> {
    let b = CohomologyBasis::new(model.inner.clone(), truncation(max_mode)?);
    Ok((b.dims(), b.finite_dimensional()))
}

/// Determinants of the duality pairing in each degree.
#[pyfunction]
#[pyo3(signature = (model, max_mode = 50))]
fn duality_determinants(model: &PyModel, max_mode: i64) -> PyResult<Vec<f64>> {
    let b = CohomologyBasis::new(model.inner.clone(), truncation(max_mode)?);
    (0..=model.inner.leaf_dim())
        .map(|k| duality_pairing_matrix(&b, k).map(|m| if m.nrows() == 0 { 1.0 } else { m.determinant() }).map_err(py_err))
        .collect()
}

/// `(fixed-point side, trace side)` for `x ↦ A x + c`.
#[pyfunction]
#[pyo3(signature = (model, matrix, translation = None, max_mode = 8))]
fn classical_lefschetz(model: &PyModel, matrix: Vec<Vec<i64>>, translation: Option<Vec<f64>>, max_mode: i64) -> PyResult<(i64, i64)> {
    let a = IntMatrix::from_rows(&matrix).map_err(py_err)?;
    let c = translation.unwrap_or_else(|| vec![0.0; model.inner.ambient()]);
    let f = AffineFoliatedMap::endomorphism(a, c, model.inner.clone()).map_err(py_err)?;
    let b = CohomologyBasis::new(model.inner.clone(), truncation(max_mode)?);
    let r = classical_lefschetz_check(&f, &b).map_err(py_err)?;
    Ok((r.left, r.right))
}

/// Aggregated atom weights of the suspension flow at `t = 1..=t_max`
/// together with `det(id − A^ν)`.
#[pyfunction]
fn suspension_atoms(matrix: Vec<Vec<i64>>, t_max: usize) -> PyResult<(Vec<Option<i64>>, Vec<i64>)> {
    let a = IntMatrix::from_rows(&matrix).map_err(py_err)?;
    let model = Arc::new(SuspensionModel::new(a.clone()).map_err(py_err)?);
    let grid = uniform_grid(t_max as f64, 100 * t_max.max(1)).map_err(py_err)?;
    let v = verify_dynamical_lefschetz(&FlowSpec::suspension(model), &SpectralTruncation::default(), t_max as f64, &grid)
        .map_err(py_err)?;
    Ok((v.atom_oracle.iter().map(|o| o.weight).collect(), suspension_atom_oracle(&a, t_max)))
}

/// `(numeric limit, error estimate, closed form, h)` for two subtori.
#[pyfunction]
#[pyo3(signature = (model, s_directions, t_directions, eta, nus, s_basepoint = None, t_basepoint = None, grid_factor = 4))]
#[allow(clippy::too_many_arguments)]
fn intersection_product(
    model: &PyModel,
    s_directions: Vec<Vec<i64>>,
    t_directions: Vec<Vec<i64>>,
    eta: &PyForm,
    nus: Vec<f64>,
    s_basepoint: Option<Vec<f64>>,
    t_basepoint: Option<Vec<f64>>,
    grid_factor: usize,
) -> PyResult<(f64, f64, f64, f64)> {
    let n = model.inner.ambient();
    let sub = |dirs: &[Vec<i64>], base: Option<Vec<f64>>| {
        LinearSubtorus::new(model.inner.clone(), base.unwrap_or_else(|| vec![0.0; n]), dirs, 1).map(GridCurrent::subtorus)
    };
    let s = sub(&s_directions, s_basepoint).map_err(py_err)?;
    let t = sub(&t_directions, t_basepoint).map_err(py_err)?;
    let numeric = intersection_product_numeric(&s, &t, &eta.inner, &nus, grid_factor).map_err(py_err)?;
    let closed = intersection_closed_form(&s, &t, &eta.inner).map_err(py_err)?;
    Ok((numeric.limit, numeric.error_estimate, closed.value, closed.h))
}

#[pyfunction]
fn bundled_scenarios() -> Vec<&'static str> {
    BUNDLED_SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// Runs a bundled scenario by name, or a TOML document, and returns the
/// JSON report.
#[pyfunction]
fn run_scenario(name_or_toml: &str) -> PyResult<String> {
    let cfg = if BUNDLED_SCENARIOS.iter().any(|(n, _)| *n == name_or_toml) {
        runner::bundled_scenario(name_or_toml)
    } else {
        ScenarioConfig::from_toml(name_or_toml)
    }
    .map_err(py_err)?;
    let report = runner::run_scenario(&cfg, RunOptions::default()).map_err(py_err)?;
    runner::report_json(&report).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "foliated_lefschetz")]
pub fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyForm>()?;
    m.add_function(wrap_pyfunction!(cohomology_dimensions, m)?)?;
    m.add_function(wrap_pyfunction!(duality_determinants, m)?)?;
    m.add_function(wrap_pyfunction!(classical_lefschetz, m)?)?;
    m.add_function(wrap_pyfunction!(suspension_atoms, m)?)?;
    m.add_function(wrap_pyfunction!(intersection_product, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
