//! Problem files: JSON documents describing a system, its oracle bounds and
//! an analysis. `schemas/config.schema.json` documents the format.

use dissip_core::matrix::{Matrix, SymMatrix};
use dissip_core::models::{
    affine_equality_bound, firmly_nonexpansive_bound, gradient_descent_model, lipschitz_bound, nesterov_model,
    nesterov_standard_beta, open_gradient_noise_model, open_nesterov_gradient_noise,
    open_nesterov_measurement_noise, sector_bound, strongly_monotone_bound, Channel,
    ClosedAlgorithmModel, LinearPlant, OpenAlgorithmModel, OracleBound, PlantSupply,
};
use dissip_core::simulate::ExecutableOracle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Domain {
        context: String,
        source: dissip_core::error::Error,
    },
}

fn domain(context: impl Into<String>) -> impl FnOnce(dissip_core::error::Error) -> ConfigError {
    let context = context.into();
    move |source| ConfigError::Domain { context, source }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oracle_bounds: Vec<BoundSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executable_oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantSpec>,
    pub analysis: AnalysisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Exactly one of the three fields must be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<ClosedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<OpenSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedSpec {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSpec {
    pub a: Rows,
    pub b1: Rows,
    pub b2: Rows,
    pub c1: Rows,
    pub c2: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d11: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d12: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d21: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d22: Option<Rows>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    GradientDescent,
    Nesterov,
    OpenGradientNoise,
    OpenNesterovGradientNoise,
    OpenNesterovMeasurementNoise,
}

/// A model from the built-in zoo. `beta` defaults to the standard
/// momentum for the condition number `condition`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: FamilyName,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub q: usize,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundType {
    StronglyMonotone,
    Lipschitz,
    FirmlyNonexpansive,
    Sector,
    AffineEquality,
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Channel>>,
}

/// Places a bound of dimension `dim` on `y[y_offset..]`, `u[u_offset..]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub y_offset: usize,
    #[serde(default)]
    pub u_offset: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    #[serde(rename = "type")]
    pub kind: BoundType,
    #[serde(default)]
    pub parameters: BoundParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    QuadraticGradient,
    SoftThreshold,
    BoxProjection,
    Linear,
    Affine,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub kind: OracleKind,
    #[serde(default)]
    pub parameters: OracleParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<SupplySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearPlantSpec>,
}

/// Either an incremental gain bound `gain` or an explicit matrix `s` over
/// `(Δζ, Δν) = (Δd, Δz)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearPlantSpec {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
    /// Storage matrix `P_p`; computed from the supply when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<Rows>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Nonexpansive,
    Rate,
    Margin,
    Gain,
    ClosedLoop,
    Simulate,
    Sweep,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Nonexpansive => "nonexpansive",
            Mode::Rate => "rate",
            Mode::Margin => "margin",
            Mode::Gain => "gain",
            Mode::ClosedLoop => "closed-loop",
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
        }
    }

    pub fn is_certification(&self) -> bool {
        !matches!(self, Mode::Simulate | Mode::Sweep)
    }
}

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_HORIZON: usize = 200;
pub const DEFAULT_TRIALS: usize = 100;

fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_trials() -> usize {
    DEFAULT_TRIALS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub mode: Mode,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Initial state for `simulate`; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Gamma,
    Mu,
    Rho,
    SpectralRadius,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Gamma => "gamma",
            Metric::Mu => "mu",
            Metric::Rho => "rho",
            Metric::SpectralRadius => "spectral_radius",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub metric: Metric,
    pub parameters: Vec<SweepParameter>,
}

/// Inclusive range of `count` equally spaced points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeSpec>,
    pub targets: Vec<SweepTarget>,
}

/// Writes `scale · value + offset` at a dotted path into the config, e.g.
/// `system.open.b1.0.0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTarget {
    pub path: String,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl SweepParameter {
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = match (&self.values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => match r.count {
                0 => Vec::new(),
                1 => vec![r.start],
                n => (0..n)
                    .map(|i| r.start + (r.stop - r.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
            _ => {
                return Err(invalid(format!(
                    "sweep parameter `{}` needs exactly one of `values` or `range`",
                    self.name
                )))
            }
        };
        if grid.is_empty() {
            return Err(invalid(format!("sweep parameter `{}` has an empty grid", self.name)));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("sweep parameter `{}` has a non-finite value", self.name)));
        }
        Ok(grid)
    }
}

/// Deserializes and validates a problem file.
pub fn parse_config(text: &str) -> Result<ProblemConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let full = inner.to_string();
        let message = full
            .strip_suffix(&format!(" at line {line} column {column}"))
            .unwrap_or(&full)
            .to_string();
        ConfigError::Parse {
            path,
            line,
            column,
            message,
        }
    })?;
    config.validate()?;
    Ok(config)
}

fn matrix(name: &str, rows: &Rows) -> Result<Matrix, ConfigError> {
    if rows.is_empty() {
        return Err(invalid(format!("matrix `{name}` has no rows")));
    }
    Matrix::from_rows(rows).map_err(domain(format!("matrix `{name}`")))
}

fn matrix_or_zeros(name: &str, rows: &Option<Rows>, r: usize, c: usize) -> Result<Matrix, ConfigError> {
    match rows {
        Some(rows) => matrix(name, rows),
        None => Ok(Matrix::zeros(r, c)),
    }
}

fn symmetric(name: &str, rows: &Rows) -> Result<SymMatrix, ConfigError> {
    let m = matrix(name, rows)?;
    let asym = (&m - &m.transpose()).max_abs();
    if asym > 1e-12 * (1.0 + m.max_abs()) {
        return Err(invalid(format!("matrix `{name}` must be symmetric (asymmetry {asym:e})")));
    }
    SymMatrix::new(m).map_err(domain(format!("matrix `{name}`")))
}

/// A system resolved into model objects.
#[derive(Clone, Debug)]
pub enum System {
    Closed(ClosedAlgorithmModel),
    Open(OpenAlgorithmModel),
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Closed(_) => "closed",
            System::Open(_) => "open",
        }
    }

    /// The model seen with `d ≡ 0`.
    pub fn closed_model(&self) -> ClosedAlgorithmModel {
        match self {
            System::Closed(m) => m.clone(),
            System::Open(m) => m.closed_part(),
        }
    }

    pub fn yu_dims(&self) -> (usize, usize) {
        match self {
            System::Closed(m) => (m.p(), m.m()),
            System::Open(m) => (m.p(), m.m()),
        }
    }
}

impl FamilySpec {
    fn beta(&self) -> Result<f64, ConfigError> {
        match (self.beta, self.condition) {
            (Some(b), None) => Ok(b),
            (None, Some(k)) if k >= 1.0 => Ok(nesterov_standard_beta(k)),
            (None, Some(k)) => Err(invalid(format!("system.family.condition must be >= 1, got {k}"))),
            (Some(_), Some(_)) => Err(invalid("system.family: give either `beta` or `condition`, not both")),
            (None, None) => Err(invalid("system.family: Nesterov models need `beta` or `condition`")),
        }
    }

    fn build(&self) -> Result<System, ConfigError> {
        let ctx = || domain("system.family");
        let uses_beta = !matches!(self.name, FamilyName::GradientDescent | FamilyName::OpenGradientNoise);
        if !uses_beta && (self.beta.is_some() || self.condition.is_some()) {
            return Err(invalid("system.family: `beta`/`condition` only apply to Nesterov models"));
        }
        Ok(match self.name {
            FamilyName::GradientDescent => System::Closed(gradient_descent_model(self.eta, self.q).map_err(ctx())?),
            FamilyName::Nesterov => System::Closed(nesterov_model(self.eta, self.beta()?, self.q).map_err(ctx())?),
            FamilyName::OpenGradientNoise => System::Open(open_gradient_noise_model(self.eta, self.q).map_err(ctx())?),
            FamilyName::OpenNesterovGradientNoise => {
                System::Open(open_nesterov_gradient_noise(self.eta, self.beta()?, self.q).map_err(ctx())?)
            }
            FamilyName::OpenNesterovMeasurementNoise => {
                System::Open(open_nesterov_measurement_noise(self.eta, self.beta()?, self.q).map_err(ctx())?)
            }
        })
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<System, ConfigError> {
        let count = [self.closed.is_some(), self.open.is_some(), self.family.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if count != 1 {
            return Err(invalid("exactly one system (`closed`, `open` or `family`) must be given"));
        }
        if let Some(c) = &self.closed {
            let (a, b, cm) = (matrix("system.closed.a", &c.a)?, matrix("system.closed.b", &c.b)?, matrix("system.closed.c", &c.c)?);
            let d = matrix_or_zeros("system.closed.d", &c.d, cm.rows(), b.cols())?;
            return Ok(System::Closed(ClosedAlgorithmModel::new(a, b, cm, d).map_err(domain("system.closed"))?));
        }
        if let Some(o) = &self.open {
            let a = matrix("system.open.a", &o.a)?;
            let b1 = matrix("system.open.b1", &o.b1)?;
            let b2 = matrix("system.open.b2", &o.b2)?;
            let c1 = matrix("system.open.c1", &o.c1)?;
            let c2 = matrix("system.open.c2", &o.c2)?;
            let (p, q, m, r) = (c1.rows(), c2.rows(), b1.cols(), b2.cols());
            let model = OpenAlgorithmModel::new(
                a,
                b1,
                b2,
                c1,
                matrix_or_zeros("system.open.d11", &o.d11, p, m)?,
                matrix_or_zeros("system.open.d12", &o.d12, p, r)?,
                c2,
                matrix_or_zeros("system.open.d21", &o.d21, q, m)?,
                matrix_or_zeros("system.open.d22", &o.d22, q, r)?,
            )
            .map_err(domain("system.open"))?;
            return Ok(System::Open(model));
        }
        self.family.as_ref().expect("counted above").build()
    }
}

impl BoundSpec {
    fn build(&self, index: usize, p: usize, m: usize) -> Result<OracleBound, ConfigError> {
        let ctx = format!("oracle_bounds[{index}]");
        let par = &self.parameters;
        let allowed: &[&str] = match self.kind {
            BoundType::StronglyMonotone => &["mu"],
            BoundType::Lipschitz => &["lipschitz"],
            BoundType::FirmlyNonexpansive => &[],
            BoundType::Sector => &["mu", "lipschitz"],
            BoundType::AffineEquality => &["e", "g"],
            BoundType::Custom => &["s", "partition"],
        };
        let present = [
            ("mu", par.mu.is_some()),
            ("lipschitz", par.lipschitz.is_some()),
            ("e", par.e.is_some()),
            ("g", par.g.is_some()),
            ("s", par.s.is_some()),
            ("partition", par.partition.is_some()),
        ];
        if let Some((name, _)) = present.iter().find(|(n, set)| *set && !allowed.contains(n)) {
            return Err(invalid(format!("{ctx}: parameter `{name}` does not apply to this bound type")));
        }
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("{ctx}: missing parameter `{name}`")));
        let structured = matches!(self.kind, BoundType::AffineEquality | BoundType::Custom);
        let dim = match (&self.channel, structured) {
            (Some(_), true) => return Err(invalid(format!("{ctx}: `channel` is only supported for scalar-parameter bounds"))),
            (Some(c), false) => c.dim,
            (None, _) if p == m => p,
            (None, false) => {
                return Err(invalid(format!(
                    "{ctx}: y has size {p} and u has size {m}; give a `channel` with the bound dimension"
                )))
            }
            (None, true) => 0,
        };
        let dctx = || domain(ctx.clone());
        let bound = match self.kind {
            BoundType::StronglyMonotone => strongly_monotone_bound(need(par.mu, "mu")?, dim).map_err(dctx())?,
            BoundType::Lipschitz => lipschitz_bound(need(par.lipschitz, "lipschitz")?, dim).map_err(dctx())?,
            BoundType::FirmlyNonexpansive => firmly_nonexpansive_bound(dim).map_err(dctx())?,
            BoundType::Sector => sector_bound(need(par.mu, "mu")?, need(par.lipschitz, "lipschitz")?, dim).map_err(dctx())?,
            BoundType::AffineEquality => {
                let e = matrix(&format!("{ctx}.parameters.e"), par.e.as_ref().ok_or_else(|| invalid(format!("{ctx}: missing parameter `e`")))?)?;
                let g = match &par.g {
                    Some(g) => matrix(&format!("{ctx}.parameters.g"), g)?,
                    None => Matrix::zeros(e.rows(), 0),
                };
                affine_equality_bound(&e, &g).map_err(dctx())?
            }
            BoundType::Custom => {
                let s = symmetric(&format!("{ctx}.parameters.s"), par.s.as_ref().ok_or_else(|| invalid(format!("{ctx}: missing parameter `s`")))?)?;
                let partition = par.partition.clone().ok_or_else(|| invalid(format!("{ctx}: missing parameter `partition`")))?;
                OracleBound::custom(s, partition).map_err(dctx())?
            }
        };
        match &self.channel {
            Some(c) => bound.embed(c.y_offset, p, c.u_offset, m).map_err(dctx()),
            None => Ok(bound),
        }
    }
}

impl OracleSpec {
    pub fn build(&self) -> Result<ExecutableOracle, ConfigError> {
        let par = &self.parameters;
        let ctx = "executable_oracle";
        let allowed: &[&str] = match self.kind {
            OracleKind::QuadraticGradient => &["q", "b", "window"],
            OracleKind::SoftThreshold => &["lambda", "dim"],
            OracleKind::BoxProjection => &["lo", "hi"],
            OracleKind::Linear => &["s", "dim"],
            OracleKind::Affine => &["e", "g"],
        };
        let present = [
            ("q", par.q.is_some()),
            ("b", par.b.is_some()),
            ("window", par.window.is_some()),
            ("lambda", par.lambda.is_some()),
            ("dim", par.dim.is_some()),
            ("lo", par.lo.is_some()),
            ("hi", par.hi.is_some()),
            ("s", par.s.is_some()),
            ("e", par.e.is_some()),
            ("g", par.g.is_some()),
        ];
        if let Some((name, _)) = present.iter().find(|(n, set)| *set && !allowed.contains(n)) {
            return Err(invalid(format!("{ctx}: parameter `{name}` does not apply to this oracle kind")));
        }
        let missing = |name: &str| invalid(format!("{ctx}: missing parameter `{name}`"));
        let dctx = || domain(ctx);
        match self.kind {
            OracleKind::QuadraticGradient => {
                let q = symmetric("executable_oracle.parameters.q", par.q.as_ref().ok_or_else(|| missing("q"))?)?;
                let b = par.b.clone().unwrap_or_else(|| vec![0.0; q.dim()]);
                ExecutableOracle::quadratic_gradient(q, b, par.window.map(|[lo, hi]| (lo, hi))).map_err(dctx())
            }
            OracleKind::SoftThreshold => {
                ExecutableOracle::soft_threshold(par.lambda.ok_or_else(|| missing("lambda"))?, par.dim.unwrap_or(1)).map_err(dctx())
            }
            OracleKind::BoxProjection => ExecutableOracle::box_projection(
                par.lo.clone().ok_or_else(|| missing("lo"))?,
                par.hi.clone().ok_or_else(|| missing("hi"))?,
            )
            .map_err(dctx()),
            OracleKind::Linear => ExecutableOracle::linear(par.s.ok_or_else(|| missing("s"))?, par.dim.unwrap_or(1)).map_err(dctx()),
            OracleKind::Affine => {
                let e = matrix("executable_oracle.parameters.e", par.e.as_ref().ok_or_else(|| missing("e"))?)?;
                let g = match &par.g {
                    Some(g) => matrix("executable_oracle.parameters.g", g)?,
                    None => Matrix::zeros(e.rows(), 0),
                };
                ExecutableOracle::affine(e, g).map_err(dctx())
            }
        }
    }
}

/// Plant data resolved against an open model's `(r, q)`.
#[derive(Clone, Debug)]
pub struct Plant {
    pub supply: Option<PlantSupply>,
    pub linear: Option<LinearPlant>,
    pub storage: Option<SymMatrix>,
}

impl PlantSpec {
    fn build(&self, r: usize, q: usize) -> Result<Plant, ConfigError> {
        let supply = match &self.supply {
            None => None,
            Some(s) => Some(match (&s.gain, &s.s) {
                (Some(g), None) => PlantSupply::incremental_gain(*g, r, q).map_err(domain("plant.supply"))?,
                (None, Some(rows)) => {
                    let m = symmetric("plant.supply.s", rows)?;
                    PlantSupply::new(m, r, q).map_err(domain("plant.supply"))?
                }
                _ => return Err(invalid("plant.supply needs exactly one of `gain` or `s`")),
            }),
        };
        let (linear, storage) = match &self.linear {
            None => (None, None),
            Some(l) => {
                let a = matrix("plant.linear.a", &l.a)?;
                let b = matrix("plant.linear.b", &l.b)?;
                let c = matrix("plant.linear.c", &l.c)?;
                let d = matrix_or_zeros("plant.linear.d", &l.d, c.rows(), b.cols())?;
                let plant = LinearPlant::new(a, b, c, d).map_err(domain("plant.linear"))?;
                if plant.output_dim() != r || plant.input_dim() != q {
                    return Err(invalid(format!(
                        "plant.linear: output/input sizes ({}, {}) must match the algorithm's d and z sizes ({r}, {q})",
                        plant.output_dim(),
                        plant.input_dim()
                    )));
                }
                let storage = match &l.storage {
                    Some(rows) => {
                        let p = symmetric("plant.linear.storage", rows)?;
                        if p.dim() != plant.state_dim() {
                            return Err(invalid(format!(
                                "plant.linear.storage must be {0}x{0}",
                                plant.state_dim()
                            )));
                        }
                        Some(p)
                    }
                    None => None,
                };
                (Some(plant), storage)
            }
        };
        Ok(Plant { supply, linear, storage })
    }
}

/// Everything a run needs, built from a validated config.
#[derive(Clone, Debug)]
pub struct Problem {
    pub system: System,
    pub bounds: Vec<OracleBound>,
    pub oracle: Option<ExecutableOracle>,
    pub plant: Option<Plant>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem, ConfigError> {
        let system = self.system.build()?;
        let (p, m) = system.yu_dims();
        let bounds = self
            .oracle_bounds
            .iter()
            .enumerate()
            .map(|(i, b)| b.build(i, p, m))
            .collect::<Result<Vec<_>, _>>()?;
        let oracle = self.executable_oracle.as_ref().map(OracleSpec::build).transpose()?;
        let plant = match (&self.plant, &system) {
            (None, _) => None,
            (Some(spec), System::Open(model)) => Some(spec.build(model.r(), model.q())?),
            (Some(_), System::Closed(_)) => return Err(invalid("`plant` requires an open system")),
        };
        Ok(Problem {
            system,
            bounds,
            oracle,
            plant,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problem = self.build()?;
        let a = &self.analysis;
        if !(a.tol.is_finite() && a.tol > 0.0) {
            return Err(invalid(format!("analysis.tol must be positive, got {}", a.tol)));
        }
        let open = matches!(problem.system, System::Open(_));
        match a.mode {
            Mode::Gain | Mode::ClosedLoop if !open => {
                return Err(invalid(format!("mode `{}` requires an open system", a.mode.name())))
            }
            Mode::ClosedLoop if problem.plant.as_ref().and_then(|p| p.supply.as_ref()).is_none() => {
                return Err(invalid("mode `closed-loop` requires `plant.supply`"))
            }
            Mode::Simulate if problem.oracle.is_none() => {
                return Err(invalid("mode `simulate` requires `executable_oracle`"))
            }
            Mode::Sweep if self.sweep.is_none() => return Err(invalid("mode `sweep` requires a `sweep` section")),
            _ => {}
        }
        if let Some(x0) = &a.x0 {
            let n = match &problem.system {
                System::Closed(m) => m.n(),
                System::Open(m) => m.n(),
            };
            if x0.len() != n {
                return Err(invalid(format!("analysis.x0 has length {}, the state has size {n}", x0.len())));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.parameters.is_empty() {
                return Err(invalid("sweep.parameters must not be empty"));
            }
            for p in &sweep.parameters {
                p.grid()?;
                if p.targets.is_empty() {
                    return Err(invalid(format!("sweep parameter `{}` has no targets", p.name)));
                }
            }
        }
        Ok(())
    }
}
