//! Scenario files, the checks they drive, and the reports they produce.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coincidence::{
    coincidence_theorem_check, classical_lefschetz_check, suspension_atom_oracle, uniform_grid,
    verify_dynamical_lefschetz, DistributionOnRPlus, VerificationMode, DEFAULT_GRID_POINTS, SMOOTH_TOL,
};
use crate::dynamics::{periodic_orbits_suspension, Cocycle, FlowSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::fields::FoliatedVectorField;
use crate::forms::{FormJson, MultiIndex, TangentialForm};
use crate::hodge::{duality_pairing_matrix, kunneth_basis, CohomologyBasis, SpectralTruncation, DUALITY_DET_TOL};
use crate::lattice::{IntMatrix, RationalPoint};
use crate::models::{AffineFoliatedMap, FoliatedTorusModel, LinearSubtorus, Model, ModelDescription};
use crate::regularization::{
    current_regularization_convergence, intersection_closed_form, intersection_product_numeric, rprime_sign,
    smooth_form_rprime, GridCurrent, GridForm,
};

/// Scenarios shipped with the crate, in the order `all` runs them.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("exterior_laws", include_str!("../scenarios/exterior_laws.toml")),
    ("kronecker_cohomology", include_str!("../scenarios/kronecker_cohomology.toml")),
    ("kunneth_kronecker_product", include_str!("../scenarios/kunneth_kronecker_product.toml")),
    ("one_leaf_cohomology", include_str!("../scenarios/one_leaf_cohomology.toml")),
    ("cat_classical", include_str!("../scenarios/cat_classical.toml")),
    ("cat_suspension", include_str!("../scenarios/cat_suspension.toml")),
    ("morse_one_leaf", include_str!("../scenarios/morse_one_leaf.toml")),
    ("kronecker_translation", include_str!("../scenarios/kronecker_translation.toml")),
    ("regularization_convergence", include_str!("../scenarios/regularization_convergence.toml")),
    ("intersections", include_str!("../scenarios/intersections.toml")),
];

pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("no bundled scenario named {name:?}")))?;
    ScenarioConfig::from_toml(text)
}

pub fn bundled_scenarios() -> Result<Vec<ScenarioConfig>> {
    BUNDLED_SCENARIOS.iter().map(|(_, text)| ScenarioConfig::from_toml(text)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    ExteriorLaws,
    HarmonicDimensions,
    Kunneth,
    Duality,
    ClassicalLefschetz,
    SuspensionAtoms,
    OrbitCounts,
    DynamicalLefschetz,
    Coincidence,
    RprimeConvergence,
    CurrentConvergence,
    IntersectionProducts,
}

impl CheckName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::ExteriorLaws => "exterior_laws",
            CheckName::HarmonicDimensions => "harmonic_dimensions",
            CheckName::Kunneth => "kunneth",
            CheckName::Duality => "duality",
            CheckName::ClassicalLefschetz => "classical_lefschetz",
            CheckName::SuspensionAtoms => "suspension_atoms",
            CheckName::OrbitCounts => "orbit_counts",
            CheckName::DynamicalLefschetz => "dynamical_lefschetz",
            CheckName::Coincidence => "coincidence",
            CheckName::RprimeConvergence => "rprime_convergence",
            CheckName::CurrentConvergence => "current_convergence",
            CheckName::IntersectionProducts => "intersection_products",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKindConfig {
    Affine,
    Morse,
    Suspension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub kind: FlowKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Rate of the cocycle `e^{rate t}`; zero for the trivial one.
    #[serde(default)]
    pub cocycle_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub matrix: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
    /// Iterates `f^k` to check.
    pub powers: Vec<u32>,
    /// Expected Lefschetz numbers, one per power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<i64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub max_mode: i64,
    #[serde(default = "default_resonance_tol")]
    pub resonance_tol: f64,
}

fn default_resonance_tol() -> f64 {
    SpectralTruncation::default().resonance_tol
}

impl Default for TruncationConfig {
    fn default() -> Self {
        let t = SpectralTruncation::default();
        Self { max_mode: t.max_mode, resonance_tol: t.resonance_tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Tolerance on the smooth parts of distributions.
    #[serde(default = "default_smooth_tol")]
    pub smooth_tol: f64,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_smooth_tol() -> f64 {
    SMOOTH_TOL
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_max: 1.0, grid_points: DEFAULT_GRID_POINTS, smooth_tol: SMOOTH_TOL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawsConfig {
    pub forms: usize,
    #[serde(default = "default_terms")]
    pub terms: usize,
    #[serde(default = "default_law_mode")]
    pub max_mode: i64,
}

fn default_terms() -> usize {
    6
}

fn default_law_mode() -> i64 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    pub nus: Vec<f64>,
    /// Grid points per unit length, in multiples of `ν`.
    pub grid_factor: usize,
    #[serde(default = "default_random_forms")]
    pub random_forms: usize,
    #[serde(default = "default_form_degree")]
    pub form_degree: usize,
    #[serde(default = "default_form_mode")]
    pub form_max_mode: i64,
    /// `ν` values and grids for the horizontal-circle current.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub circle_nus: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub circle_grids: Vec<usize>,
    #[serde(default = "default_circle_tol")]
    pub circle_tol: f64,
}

fn default_random_forms() -> usize {
    10
}

fn default_form_degree() -> usize {
    1
}

fn default_form_mode() -> i64 {
    2
}

fn default_circle_tol() -> f64 {
    1e-2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtorusConfig {
    pub basepoint: Vec<f64>,
    pub directions: Vec<Vec<i64>>,
    #[serde(default = "default_orientation")]
    pub orientation: i8,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_orientation() -> i8 {
    1
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionCase {
    pub name: String,
    pub model: ModelDescription,
    pub s: SubtorusConfig,
    pub t: SubtorusConfig,
    pub eta: FormJson,
    pub nus: Vec<f64>,
    #[serde(default = "default_case_grid_factor")]
    pub grid_factor: usize,
    /// Absolute floor of the acceptance band.
    #[serde(default = "default_case_tol")]
    pub tolerance: f64,
}

fn default_case_grid_factor() -> usize {
    4
}

fn default_case_tol() -> f64 {
    1e-2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<ReportFormat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub checks: Vec<CheckName>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDescription>,
    /// Further models: the other factor for Künneth checks, more test
    /// models for the exterior-calculus laws.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_models: Vec<ModelDescription>,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laws: Option<LawsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<RegularizationConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intersections: Vec<IntersectionCase>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// TOML unless the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn truncation(&self) -> Result<SpectralTruncation> {
        SpectralTruncation::new(self.truncation.max_mode, self.truncation.resonance_tol)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("scenario name must be a nonempty file stem"));
        }
        if self.checks.is_empty() {
            return Err(config_err("no checks requested"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.checks {
            if !seen.insert(*c) {
                return Err(config_err(format!("check {} listed twice", c.as_str())));
            }
        }
        self.truncation()?;
        let t = &self.time;
        if !(t.t_max.is_finite() && t.t_max > 0.0) || t.grid_points == 0 || !(t.smooth_tol > 0.0) {
            return Err(config_err("time section needs t_max > 0, grid_points > 0, smooth_tol > 0"));
        }
        let need = |what: bool, name: &str, check: CheckName| {
            if what {
                Ok(())
            } else {
                Err(config_err(format!("check {} needs {name}", check.as_str())))
            }
        };
        for &c in &self.checks {
            match c {
                CheckName::ExteriorLaws => {
                    need(self.laws.is_some(), "a [laws] section", c)?;
                    need(self.model.is_some(), "a model", c)?;
                }
                CheckName::HarmonicDimensions | CheckName::Duality => need(self.model.is_some(), "a model", c)?,
                CheckName::Kunneth => need(self.model.is_some() && !self.extra_models.is_empty(), "two models", c)?,
                CheckName::ClassicalLefschetz => need(self.model.is_some() && self.map.is_some(), "a model and a [map]", c)?,
                CheckName::SuspensionAtoms | CheckName::OrbitCounts | CheckName::DynamicalLefschetz | CheckName::Coincidence => {
                    need(self.model.is_some() && self.flow.is_some(), "a model and a [flow]", c)?
                }
                CheckName::RprimeConvergence | CheckName::CurrentConvergence => {
                    need(self.model.is_some() && self.regularization.is_some(), "a model and a [regularization] section", c)?
                }
                CheckName::IntersectionProducts => need(!self.intersections.is_empty(), "[[intersections]] cases", c)?,
            }
        }
        if let Some(l) = &self.laws {
            if l.forms == 0 || l.terms == 0 || l.max_mode < 0 {
                return Err(config_err("laws section needs forms > 0, terms > 0, max_mode >= 0"));
            }
        }
        if let Some(r) = &self.regularization {
            if r.nus.is_empty() || r.nus.iter().any(|&n| !(n >= 2.0)) || r.grid_factor == 0 || r.random_forms == 0 {
                return Err(config_err("regularization needs ν >= 2, grid_factor > 0, random_forms > 0"));
            }
            if r.circle_nus.len() != r.circle_grids.len() || !(r.circle_tol > 0.0) {
                return Err(config_err("circle_nus and circle_grids must have equal length"));
            }
        }
        for case in &self.intersections {
            if case.nus.is_empty() || case.nus.iter().any(|&n| !(n >= 2.0)) || case.grid_factor == 0 || !(case.tolerance > 0.0) {
                return Err(config_err(format!("intersection case {} has invalid numeric parameters", case.name)));
            }
        }
        if let Some(f) = &self.flow {
            if f.step.is_some_and(|s| !(s > 0.0)) || !f.cocycle_rate.is_finite() {
                return Err(config_err("flow step must be positive"));
            }
        }
        if let Some(m) = &self.map {
            if m.powers.is_empty() || m.powers.contains(&0) {
                return Err(config_err("map powers must be positive"));
            }
            if m.expected.as_ref().is_some_and(|e| e.len() != m.powers.len()) {
                return Err(config_err("one expected value per power"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "PARTIAL")]
    Partial,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Partial => "PARTIAL",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    /// FAIL dominates PARTIAL, which dominates PASS.
    pub fn combine(statuses: impl IntoIterator<Item = CheckStatus>) -> CheckStatus {
        statuses.into_iter().fold(CheckStatus::Pass, |acc, s| match (acc, s) {
            (CheckStatus::Fail, _) | (_, CheckStatus::Fail) => CheckStatus::Fail,
            (CheckStatus::Partial, _) | (_, CheckStatus::Partial) => CheckStatus::Partial,
            _ => CheckStatus::Pass,
        })
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CheckStatus::Pass => 0,
            CheckStatus::Fail => 1,
            CheckStatus::Partial => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckName,
    pub status: CheckStatus,
    pub computed: Value,
    pub oracle: Value,
    pub max_deviation: Option<f64>,
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionOnRPlus>,
    /// Wall-clock seconds; only recorded on request since it breaks
    /// reproducibility of the report bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl CheckResult {
    fn new(check: CheckName, status: CheckStatus, computed: Value, oracle: Value) -> Self {
        Self {
            check,
            status,
            computed,
            oracle,
            max_deviation: None,
            tolerance: None,
            notes: Vec::new(),
            distribution: None,
            runtime_seconds: None,
        }
    }

    fn deviation(mut self, dev: f64, tol: f64) -> Self {
        self.max_deviation = Some(dev);
        self.tolerance = Some(tol);
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStamp {
    pub version: String,
    pub truncation: TruncationConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub scenario: String,
    pub status: CheckStatus,
    pub environment: EnvironmentStamp,
    pub checks: Vec<CheckResult>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub timing: bool,
}

fn torus_model(desc: &ModelDescription) -> Result<Arc<FoliatedTorusModel>> {
    match desc.build()? {
        Model::Torus(m) => Ok(m),
        Model::Suspension(_) => Err(config_err("this check needs a torus model")),
    }
}

fn primary_model(cfg: &ScenarioConfig) -> Result<Model> {
    cfg.model.as_ref().ok_or_else(|| config_err("scenario has no model"))?.build()
}

/// Runs every configured check once, in order.
pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ReportDocument> {
    cfg.validate()?;
    // surface model errors as configuration errors before any work
    if let Some(m) = &cfg.model {
        m.build().map_err(|e| config_err(format!("model: {e}")))?;
    }
    let checks = cfg
        .checks
        .iter()
        .map(|&c| {
            let start = Instant::now();
            let mut r = match run_check(cfg, c) {
                Ok(r) => r,
                Err(e @ Error::Config(_)) => return Err(e),
                Err(e) if e.is_hypothesis_violation() => {
                    CheckResult::new(c, CheckStatus::Partial, Value::Null, Value::Null).note(format!("hypothesis violated: {e}"))
                }
                Err(e) => CheckResult::new(c, CheckStatus::Fail, Value::Null, Value::Null).note(format!("error: {e}")),
            };
            if opts.timing {
                r.runtime_seconds = Some(start.elapsed().as_secs_f64());
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportDocument {
        scenario: cfg.name.clone(),
        status: CheckStatus::combine(checks.iter().map(|c| c.status)),
        environment: EnvironmentStamp {
            version: env!("CARGO_PKG_VERSION").to_string(),
            truncation: cfg.truncation,
            seed: cfg.seed,
        },
        checks,
    })
}

fn run_check(cfg: &ScenarioConfig, check: CheckName) -> Result<CheckResult> {
    match check {
        CheckName::ExteriorLaws => check_exterior_laws(cfg),
        CheckName::HarmonicDimensions => check_harmonic_dimensions(cfg),
        CheckName::Kunneth => check_kunneth(cfg),
        CheckName::Duality => check_duality(cfg),
        CheckName::ClassicalLefschetz => check_classical(cfg),
        CheckName::SuspensionAtoms => check_suspension_atoms(cfg),
        CheckName::OrbitCounts => check_orbit_counts(cfg),
        CheckName::DynamicalLefschetz => check_dynamical(cfg),
        CheckName::Coincidence => check_coincidence(cfg),
        CheckName::RprimeConvergence => check_rprime(cfg),
        CheckName::CurrentConvergence => check_current(cfg),
        CheckName::IntersectionProducts => check_intersections(cfg),
    }
}

fn law_models(cfg: &ScenarioConfig) -> Result<Vec<Arc<FoliatedTorusModel>>> {
    cfg.model.iter().chain(&cfg.extra_models).map(torus_model).collect()
}

fn check_exterior_laws(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let laws = cfg.laws.as_ref().ok_or_else(|| config_err("missing [laws]"))?;
    let models = law_models(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let one = Complex64::new(1.0, 0.0);
    let (mut d2, mut leibniz, mut star, mut adjoint) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0usize;
    for model in &models {
        let p = model.leaf_dim();
        for _ in 0..laws.forms {
            let k = count % (p + 1);
            count += 1;
            let rand_form =
                |deg: usize, rng: &mut ChaCha8Rng| TangentialForm::random_sparse(model.clone(), deg, laws.terms, laws.max_mode, false, rng);
            let a = rand_form(k, &mut rng)?;
            d2 = d2.max(a.d_f().d_f().max_abs_coefficient());
            let l = if p > k { count % (p - k + 1) } else { 0 };
            let b = rand_form(l, &mut rng)?;
            let lhs = a.wedge(&b)?.d_f();
            let rhs = if k + l < p {
                let sign = if k.is_multiple_of(2) { one } else { -one };
                a.d_f().wedge_with(&b, true)?.add(&a.wedge_with(&b.d_f(), true)?.scale(sign))?
            } else {
                TangentialForm::zero(model.clone(), p)?
            };
            leibniz = leibniz.max(lhs.sub(&rhs)?.max_abs_coefficient());
            let sign = if (k * (p - k)).is_multiple_of(2) { one } else { -one };
            star = star.max(a.star().star().sub(&a.scale(sign))?.max_abs_coefficient());
            if k < p {
                let c = rand_form(k + 1, &mut rng)?;
                let x = a.d_f().hermitian_inner(&c);
                let y = a.hermitian_inner(&c.delta_f());
                adjoint = adjoint.max((x - y).norm() / x.norm().max(y.norm()).max(1.0));
            }
        }
    }
    let ok = d2 < 1e-12 && leibniz < 1e-12 && star < 1e-10 && adjoint < 1e-10;
    Ok(CheckResult::new(
        CheckName::ExteriorLaws,
        CheckStatus::from_bool(ok),
        json!({
            "forms": count,
            "models": models.len(),
            "d_squared": d2,
            "leibniz": leibniz,
            "star_involution": star,
            "adjointness": adjoint,
        }),
        json!({"d_squared": 1e-12, "leibniz": 1e-12, "star_involution": 1e-10, "adjointness": 1e-10}),
    )
    .deviation(d2.max(leibniz).max(star).max(adjoint), 1e-10))
}

fn basis_for(cfg: &ScenarioConfig, desc: &ModelDescription) -> Result<CohomologyBasis> {
    Ok(CohomologyBasis::new(torus_model(desc)?, cfg.truncation()?))
}

fn check_harmonic_dimensions(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let basis = basis_for(cfg, cfg.model.as_ref().expect("validated"))?;
    let report = basis.report();
    let mut status = CheckStatus::from_bool(cfg.expected_dims.as_ref().is_none_or(|e| *e == report.dimensions));
    let mut r = CheckResult::new(
        CheckName::HarmonicDimensions,
        status,
        serde_json::to_value(&report)?,
        json!({ "dimensions": cfg.expected_dims }),
    );
    if report.truncation_limited {
        status = CheckStatus::Partial;
        r.status = status;
        r = r.note("resonant modes beyond the zero mode: reduced cohomology is truncation limited");
    }
    Ok(r)
}

/// `(a * b)_k = Σ_{i+j=k} a_i b_j`
fn convolve_dims(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn check_kunneth(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let a = basis_for(cfg, cfg.model.as_ref().expect("validated"))?;
    let b = basis_for(cfg, &cfg.extra_models[0])?;
    let product = kunneth_basis(&a, &b)?;
    let direct = CohomologyBasis::new(product.model().clone(), cfg.truncation()?);
    let convolution = convolve_dims(&a.dims(), &b.dims());
    let ok = product.dims() == convolution
        && direct.dims() == convolution
        && cfg.expected_dims.as_ref().is_none_or(|e| *e == convolution);
    Ok(CheckResult::new(
        CheckName::Kunneth,
        CheckStatus::from_bool(ok),
        json!({
            "factor_dimensions": [a.dims(), b.dims()],
            "kunneth_dimensions": product.dims(),
            "product_model_dimensions": direct.dims(),
        }),
        json!({ "convolution": convolution, "expected": cfg.expected_dims }),
    ))
}

fn check_duality(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let mut bases = vec![basis_for(cfg, cfg.model.as_ref().expect("validated"))?];
    for extra in &cfg.extra_models {
        bases.push(basis_for(cfg, extra)?);
    }
    let mut dets = Vec::new();
    let mut ok = true;
    let mut partial = false;
    let mut notes = Vec::new();
    for basis in &bases {
        if !basis.finite_dimensional() {
            partial = true;
            notes.push("infinite-dimensional model skipped".to_string());
            continue;
        }
        let p = basis.model().leaf_dim();
        let mut per_model = Vec::new();
        for kappa in 0..=p {
            match duality_pairing_matrix(basis, kappa) {
                Ok(m) => per_model.push(if m.nrows() == 0 { 1.0 } else { m.determinant() }),
                Err(Error::DualityFailure { det, .. }) => {
                    ok = false;
                    per_model.push(det);
                }
                Err(e) => return Err(e),
            }
        }
        dets.push(per_model);
    }
    let min = dets.iter().flatten().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    let status = if !ok {
        CheckStatus::Fail
    } else if partial {
        CheckStatus::Partial
    } else {
        CheckStatus::Pass
    };
    let mut r = CheckResult::new(
        CheckName::Duality,
        status,
        json!({ "determinants": dets, "min_abs_det": min }),
        json!({ "min_abs_det_above": DUALITY_DET_TOL }),
    );
    r.notes = notes;
    Ok(r)
}

fn check_classical(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let model = torus_model(cfg.model.as_ref().expect("validated"))?;
    let map = cfg.map.as_ref().expect("validated");
    let a = IntMatrix::from_rows(&map.matrix)?;
    let c = map.translation.clone().unwrap_or_else(|| vec![0.0; model.ambient()]);
    let basis = CohomologyBasis::new(model.clone(), cfg.truncation()?);
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, &k) in map.powers.iter().enumerate() {
        let f = AffineFoliatedMap::endomorphism(a.pow(k), c.clone(), model.clone())?;
        let report = classical_lefschetz_check(&f, &basis)?;
        let expected = map.expected.as_ref().map(|e| e[i]);
        ok &= report.pass && expected.is_none_or(|e| e == report.left && e == report.right);
        rows.push(json!({
            "power": k,
            "fixed_points": report.fixed_points.len(),
            "left": report.left,
            "right": report.right,
            "traces": report.traces,
            "rounding_residual": report.rounding_residual,
            "expected": expected,
        }));
    }
    Ok(CheckResult::new(
        CheckName::ClassicalLefschetz,
        CheckStatus::from_bool(ok),
        Value::Array(rows),
        json!({ "expected": map.expected, "rule": "left == right exactly" }),
    ))
}

fn build_flow(cfg: &ScenarioConfig) -> Result<FlowSpec> {
    let f = cfg.flow.as_ref().ok_or_else(|| config_err("missing [flow]"))?;
    let model = primary_model(cfg)?;
    let flow = match (f.kind, model) {
        (FlowKindConfig::Suspension, Model::Suspension(m)) => FlowSpec::suspension(m),
        (FlowKindConfig::Affine, Model::Torus(m)) => {
            let v = f.velocity.clone().ok_or_else(|| config_err("affine flow needs a velocity"))?;
            FlowSpec::affine(m, v)?
        }
        (FlowKindConfig::Morse, Model::Torus(m)) => {
            FlowSpec::vector_field(FoliatedVectorField::morse(m)?, f.step.unwrap_or(DEFAULT_STEP))?
        }
        (kind, _) => return Err(config_err(format!("flow {kind:?} does not live on this model"))),
    };
    Ok(if f.cocycle_rate == 0.0 { flow } else { flow.with_cocycle(Cocycle::exponential(f.cocycle_rate)) })
}

fn time_grid(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    uniform_grid(cfg.time.t_max, cfg.time.grid_points)
}

fn check_dynamical(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let flow = build_flow(cfg)?;
    let grid = time_grid(cfg)?;
    let v = verify_dynamical_lefschetz(&flow, &cfg.truncation()?, cfg.time.t_max, &grid)?;
    let tol = cfg.time.smooth_tol;
    let status = match v.mode {
        VerificationMode::Full => {
            let dev = v.max_smooth_deviation.unwrap_or(f64::INFINITY);
            CheckStatus::from_bool(v.pass && dev < tol)
        }
        VerificationMode::Partial => CheckStatus::Partial,
    };
    let local = v.local_side.as_ref();
    let mut r = CheckResult::new(
        CheckName::DynamicalLefschetz,
        status,
        json!({
            "mode": v.mode,
            "contributions": local.map(|l| &l.contributions),
            "sign_stable": local.map(|l| l.sign_stable),
            "nonconverged_seeds": local.map(|l| l.nonconverged_seeds),
            "transversal": v.transversal,
            "finite_dimensional": v.finite_dimensional,
            "max_atom_weight": v.max_atom_weight,
            "atom_oracle": v.atom_oracle,
        }),
        json!({ "trace_side": v.trace_side }),
    );
    if let Some(dev) = v.max_smooth_deviation {
        r = r.deviation(dev, tol);
    }
    r.notes = v.notes.clone();
    r.distribution = local.map(|l| l.distribution.clone());
    Ok(r)
}

fn suspension_flow(cfg: &ScenarioConfig) -> Result<(FlowSpec, Arc<crate::models::SuspensionModel>)> {
    let flow = build_flow(cfg)?;
    match flow.kind() {
        crate::dynamics::FlowKind::Suspension { model } => {
            let m = model.clone();
            Ok((flow, m))
        }
        _ => Err(config_err("suspension checks need a suspension flow")),
    }
}

fn check_suspension_atoms(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let (flow, model) = suspension_flow(cfg)?;
    let grid = time_grid(cfg)?;
    let v = verify_dynamical_lefschetz(&flow, &cfg.truncation()?, cfg.time.t_max, &grid)?;
    let n = (cfg.time.t_max + 1e-9).floor() as usize;
    let oracle = suspension_atom_oracle(model.monodromy(), n);
    let dist = v.local_side.as_ref().map(|l| l.distribution.clone());
    let weights: Vec<Option<i64>> = v.atom_oracle.iter().map(|a| a.weight).collect();
    let dev = dist.as_ref().map_or(f64::INFINITY, |d| d.max_abs_density());
    let ok = v.pass && weights.len() == oracle.len() && weights.iter().zip(&oracle).all(|(w, o)| *w == Some(*o)) && dev == 0.0;
    let mut r = CheckResult::new(
        CheckName::SuspensionAtoms,
        CheckStatus::from_bool(ok),
        json!({ "atom_weights": weights, "mode": v.mode, "max_abs_density": dev }),
        json!({ "det_id_minus_a_power": oracle }),
    );
    r.notes = v.notes;
    r.distribution = dist;
    Ok(r)
}

/// Points of `(1/D) Z^d / Z^d` fixed by `A^ν`, by direct enumeration, with
/// `D = |det(A^ν − id)|`.
fn brute_force_periodic_points(a: &IntMatrix, nu: u32) -> Result<Vec<RationalPoint>> {
    let d = a.rows();
    let power = a.pow(nu);
    let m = power.sub(&IntMatrix::identity(d));
    let den = m.det().abs();
    if den == 0 {
        return Err(Error::NonHyperbolic(format!("det(A^{nu} − id) = 0")));
    }
    let total = (den as u128).pow(d as u32);
    if total > 50_000_000 {
        return Err(Error::Unsupported(format!("brute-force enumeration of {total} points")));
    }
    let mut out = Vec::new();
    for mut k in 0..total {
        let num: Vec<i128> = (0..d)
            .map(|_| {
                let v = (k % den as u128) as i128;
                k /= den as u128;
                v
            })
            .collect();
        if m.mul_vec(&num).iter().all(|v| v % den == 0) {
            out.push(RationalPoint::new(num, den));
        }
    }
    Ok(out)
}

fn check_orbit_counts(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let (_, model) = suspension_flow(cfg)?;
    let n = (cfg.time.t_max + 1e-9).floor() as usize;
    let records = periodic_orbits_suspension(&model, n)?;
    let a = model.monodromy();
    let mut computed: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.multiplicity == 1) {
        *computed.entry(r.least_period).or_default() += 1;
    }
    let mut brute: BTreeMap<usize, usize> = BTreeMap::new();
    for nu in 1..=n {
        let points = brute_force_periodic_points(a, nu as u32)?;
        let exact = points.iter().filter(|p| p.orbit_length(a, nu) == Some(nu)).count();
        if exact % nu != 0 {
            return Ok(CheckResult::new(CheckName::OrbitCounts, CheckStatus::Fail, Value::Null, Value::Null)
                .note(format!("{exact} points of least period {nu} do not split into orbits")));
        }
        if exact > 0 {
            brute.insert(nu, exact / nu);
        }
    }
    let ok = computed == brute;
    let to_json = |m: &BTreeMap<usize, usize>| -> Value {
        m.iter().map(|(k, v)| json!({"least_period": k, "orbits": v})).collect()
    };
    Ok(CheckResult::new(
        CheckName::OrbitCounts,
        CheckStatus::from_bool(ok),
        json!({ "orbits_by_least_period": to_json(&computed), "records": records.len() }),
        json!({ "brute_force": to_json(&brute) }),
    ))
}

fn check_coincidence(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let flow = build_flow(cfg)?;
    let model = flow.torus_model().ok_or_else(|| Error::Unsupported("coincidence check needs a torus flow".into()))?.clone();
    let basis = CohomologyBasis::new(model, cfg.truncation()?);
    let grid = time_grid(cfg)?;
    let r = coincidence_theorem_check(&flow, &basis, &grid)?;
    let tol = cfg.time.smooth_tol;
    Ok(CheckResult::new(
        CheckName::Coincidence,
        CheckStatus::from_bool(r.max_deviation < tol),
        json!({ "dual_basis_side": summarize(&r.dual_basis_side) }),
        json!({ "trace_side": summarize(&r.trace_side) }),
    )
    .deviation(r.max_deviation, tol))
}

/// Min, max and endpoints of a sampled function.
fn summarize(v: &[f64]) -> Value {
    json!({
        "samples": v.len(),
        "min": v.iter().cloned().fold(f64::INFINITY, f64::min),
        "max": v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "first": v.first(),
        "last": v.last(),
    })
}

fn check_rprime(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let reg = cfg.regularization.as_ref().expect("validated");
    let model = torus_model(cfg.model.as_ref().expect("validated"))?;
    let p = model.leaf_dim();
    let k = reg.form_degree.min(p);
    let sign = rprime_sign(p, k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut monotone = true;
    let mut table = Vec::new();
    for _ in 0..reg.random_forms {
        let form = TangentialForm::random_sparse(model.clone(), k, 4, reg.form_max_mode, true, &mut rng)?;
        let errors = reg
            .nus
            .iter()
            .map(|&nu| {
                let grid = (reg.grid_factor as f64 * nu).round() as usize;
                let smoothed = smooth_form_rprime(&form, nu, grid)?;
                Ok(smoothed.max_abs_diff(&GridForm::sample(&form, grid).scale(sign)) / form.max_abs_coefficient())
            })
            .collect::<Result<Vec<f64>>>()?;
        monotone &= errors.windows(2).all(|w| w[1] < w[0]);
        table.push(errors);
    }
    let worst_final = table.iter().filter_map(|e| e.last()).cloned().fold(0.0, f64::max);
    Ok(CheckResult::new(
        CheckName::RprimeConvergence,
        CheckStatus::from_bool(monotone),
        json!({ "nus": reg.nus, "relative_errors": table, "sign": sign }),
        json!({ "limit": "(-1)^{pk} ω", "monotone_decrease": true }),
    )
    .deviation(worst_final, f64::NAN))
}

fn check_current(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let reg = cfg.regularization.as_ref().expect("validated");
    let model = torus_model(cfg.model.as_ref().expect("validated"))?;
    if model.ambient() != 2 || model.leaf_dim() != 2 {
        return Err(Error::Unsupported("the horizontal-circle current lives on the one-leaf 2-torus".into()));
    }
    let s = GridCurrent::subtorus(LinearSubtorus::new(model.clone(), vec![0.0, 0.0], &[vec![1, 0]], 1)?);
    let c = |m: Vec<i64>, i: Vec<usize>, v: f64| {
        TangentialForm::term(model.clone(), crate::forms::LatticeMode(m), MultiIndex::new(i)?, Complex64::new(v, 0.0))
    };
    // 1 + 0.8 cos 2πy on θ^1, cos 2π(x+y)/2 on θ^2
    let omega = c(vec![0, 0], vec![0], 1.0)?
        .add(&c(vec![0, 1], vec![0], 0.4)?)?
        .add(&c(vec![0, -1], vec![0], 0.4)?)?
        .add(&c(vec![1, 1], vec![1], 0.25)?)?
        .add(&c(vec![-1, -1], vec![1], 0.25)?)?;
    let conv = current_regularization_convergence(&s, &omega, &reg.circle_nus, &reg.circle_grids)?;
    let last = *conv.errors.last().unwrap_or(&f64::INFINITY);
    Ok(CheckResult::new(
        CheckName::CurrentConvergence,
        CheckStatus::from_bool(last < reg.circle_tol),
        json!({ "nus": conv.nus, "grids": reg.circle_grids, "values": conv.values, "errors": conv.errors }),
        json!({ "target": conv.target }),
    )
    .deviation(last, reg.circle_tol))
}

fn subtorus_current(model: &Arc<FoliatedTorusModel>, s: &SubtorusConfig) -> Result<GridCurrent> {
    let torus = LinearSubtorus::new(model.clone(), s.basepoint.clone(), &s.directions, s.orientation)?;
    Ok(GridCurrent::Subtorus { torus, weight: s.weight })
}

fn check_intersections(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut worst = 0.0f64;
    for case in &cfg.intersections {
        let model = torus_model(&case.model)?;
        let s = subtorus_current(&model, &case.s)?;
        let t = subtorus_current(&model, &case.t)?;
        let eta = TangentialForm::from_json(model.clone(), &case.eta)?;
        let closed = intersection_closed_form(&s, &t, &eta)?;
        let numeric = intersection_product_numeric(&s, &t, &eta, &case.nus, case.grid_factor)?;
        let dev = (numeric.limit - closed.value).abs();
        let band = case.tolerance.max(3.0 * numeric.error_estimate);
        let case_ok = if closed.components == 0 {
            numeric.values.iter().all(|v| *v == 0.0) && closed.value == 0.0
        } else {
            dev < band
        };
        ok &= case_ok;
        worst = worst.max(dev);
        rows.push(json!({
            "name": case.name,
            "status": CheckStatus::from_bool(case_ok),
            "numeric": numeric,
            "closed_form": closed,
            "deviation": dev,
            "band": band,
        }));
    }
    Ok(CheckResult::new(
        CheckName::IntersectionProducts,
        CheckStatus::from_bool(ok),
        Value::Array(rows),
        json!({ "rule": "|limit − closed form| < max(tolerance, 3 × extrapolation error); disjoint pairs give 0" }),
    )
    .deviation(worst, f64::NAN))
}

/// Applies command-line overrides.
pub fn apply_overrides(cfg: &mut ScenarioConfig, truncation: Option<i64>, t_max: Option<f64>) -> Result<()> {
    if let Some(m) = truncation {
        cfg.truncation.max_mode = m;
    }
    if let Some(t) = t_max {
        cfg.time.t_max = t;
    }
    cfg.validate()
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file = path.file_name().ok_or_else(|| config_err(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", file.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn report_json(report: &ReportDocument) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// `check,t,density` rows for every sampled distribution.
pub fn density_csv(report: &ReportDocument) -> String {
    let mut s = String::from("check,t,density\n");
    for c in &report.checks {
        if let Some(d) = &c.distribution {
            for (t, v) in d.grid.iter().zip(&d.density) {
                let _ = writeln!(s, "{},{t:?},{v:?}", c.check.as_str());
            }
        }
    }
    s
}

/// `check,t0,weight` rows, one per aggregated atom.
pub fn atoms_csv(report: &ReportDocument) -> String {
    let mut s = String::from("check,t0,weight\n");
    for c in &report.checks {
        if let Some(d) = &c.distribution {
            for a in &d.atoms {
                let _ = writeln!(s, "{},{:?},{:?}", c.check.as_str(), a.t, a.weight);
            }
        }
    }
    s
}

pub fn checks_csv(report: &ReportDocument) -> String {
    let mut s = String::from("scenario,check,status,max_deviation,tolerance\n");
    for c in &report.checks {
        let opt = |v: Option<f64>| v.filter(|x| x.is_finite()).map(|x| format!("{x:?}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            report.scenario,
            c.check.as_str(),
            c.status.as_str(),
            opt(c.max_deviation),
            opt(c.tolerance)
        );
    }
    s
}

/// Writes the report into `dir`; returns the paths written.
pub fn emit_report(report: &ReportDocument, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let name = &report.scenario;
    let files: Vec<(PathBuf, String)> = match format {
        ReportFormat::Json => vec![(dir.join(format!("{name}.json")), report_json(report)?)],
        ReportFormat::Csv => vec![
            (dir.join(format!("{name}_checks.csv")), checks_csv(report)),
            (dir.join(format!("{name}_density.csv")), density_csv(report)),
            (dir.join(format!("{name}_atoms.csv")), atoms_csv(report)),
        ],
    };
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// One line per scenario.
pub fn summary_csv(reports: &[ReportDocument]) -> String {
    let mut s = String::from("scenario,status,checks\n");
    for r in reports {
        let _ = writeln!(s, "{},{},{}", r.scenario, r.status.as_str(), r.checks.len());
    }
    s
}

/// Worst status of a set of reports.
pub fn overall_status(reports: &[ReportDocument]) -> CheckStatus {
    CheckStatus::combine(reports.iter().map(|r| r.status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_round_trip() {
        for (name, text) in BUNDLED_SCENARIOS {
            let cfg = ScenarioConfig::from_toml(text).unwrap();
            assert_eq!(&cfg.name, name);
            let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg);
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ScenarioConfig::from_json(&json).unwrap(), cfg);
        }
    }

    #[test]
    fn malformed_configs_are_config_errors() {
        let bad = [
            "name = \"x\"\nchecks = [\"no_such_check\"]",
            "name = \"x\"\nchecks = []",
            "name = \"x\"\nchecks = [\"duality\"]",
            "checks = [\"duality\"]",
            "name = \"x\"\nchecks = [\"duality\"]\n[model]\ntype = \"torus\"\nambient = 2\n[time]\nt_max = -1.0",
            "this is not toml",
        ];
        for text in bad {
            assert!(matches!(ScenarioConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn status_combination() {
        use CheckStatus::*;
        assert_eq!(CheckStatus::combine([Pass, Pass]), Pass);
        assert_eq!(CheckStatus::combine([Pass, Partial]), Partial);
        assert_eq!(CheckStatus::combine([Partial, Fail, Pass]), Fail);
        assert_eq!([Pass, Fail, Partial].map(|s| s.exit_code()), [0, 1, 3]);
    }

    #[test]
    fn dimension_convolution() {
        assert_eq!(convolve_dims(&[1, 1], &[1, 1]), vec![1, 2, 1]);
        assert_eq!(convolve_dims(&[1, 2, 1], &[1, 1]), vec![1, 3, 3, 1]);
    }

    #[test]
    fn brute_force_matches_counts() {
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap();
        for nu in 1..=4u32 {
            let pts = brute_force_periodic_points(&a, nu).unwrap();
            let det = IntMatrix::identity(2).sub(&a.pow(nu)).det().unsigned_abs() as usize;
            assert_eq!(pts.len(), det);
        }
    }

    #[test]
    fn empty_distribution_gives_header_only_atom_table() {
        let cfg = bundled_scenario("cat_classical").unwrap();
        let report = run_scenario(&cfg, RunOptions::default()).unwrap();
        assert_eq!(atoms_csv(&report), "check,t0,weight\n");
        assert_eq!(density_csv(&report), "check,t,density\n");
    }

    #[test]
    fn json_report_round_trips() {
        let cfg = bundled_scenario("cat_suspension").unwrap();
        let report = run_scenario(&cfg, RunOptions::default()).unwrap();
        let back: ReportDocument = serde_json::from_str(&report_json(&report).unwrap()).unwrap();
        assert_eq!(back, report);
        let atoms = atoms_csv(&report);
        let atom_count: usize = report.checks.iter().filter_map(|c| c.distribution.as_ref()).map(|d| d.atoms.len()).sum();
        assert_eq!(atoms.lines().count(), atom_count + 1);
    }

    #[test]
    fn hypothesis_violation_is_partial() {
        // a translation flow with a closed orbit has a non-isolated coincidence set
        let mut cfg = bundled_scenario("kronecker_translation").unwrap();
        cfg.model = Some(FoliatedTorusModel::one_leaf(2).description());
        cfg.flow.as_mut().unwrap().velocity = Some(vec![1.0, 0.0]);
        cfg.checks = vec![CheckName::DynamicalLefschetz];
        let report = run_scenario(&cfg, RunOptions::default()).unwrap();
        assert_eq!(report.status, CheckStatus::Partial);
        assert!(!report.checks[0].notes.is_empty());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
