//! Linear matrix inequalities affine in a storage matrix `P` and S-procedure
//! multipliers `α_i`, a dense feasibility solver for them, and the scalar
//! searches built on top (maximize `ρ`, bisect `γ`, bisect `μ`).
//!
//! Every LMI is required to be positive semidefinite. The storage term is
//! the incremental dissipation inequality
//! `V(Δx) − V(Δx⁺) + supply(Δ…) ≥ 0` with `V(Δx) = ΔxᵀPΔx`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::{Matrix, SymMatrix};
use crate::models::{
    ChannelLabel, ClosedAlgorithmModel, LinearPlant, OpenAlgorithmModel, OracleBound, PlantSupply,
};

/// Absolute tolerance on `λ₋(LMI)` when re-verifying a solver point.
pub const VERIFY_TOL: f64 = 1e-8;
/// Minimum accepted `λ₋(P)`.
pub const P_FLOOR: f64 = 1e-8;
/// Default absolute tolerance for γ, μ and ρ searches.
pub const DEFAULT_SEARCH_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Entry `(row, col)` of the symmetric storage matrix, `row <= col`.
    StorageEntry { row: usize, col: usize },
    Multiplier,
    FreeScalar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarDescriptor {
    pub name: String,
    pub kind: VarKind,
    pub nonnegative: bool,
}

/// Scalar parameter a family (and hence a certificate) was built with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "value", rename_all = "snake_case")]
pub enum ScalarParam {
    Rho(f64),
    Gamma(f64),
    Mu(f64),
}

impl ScalarParam {
    pub fn value(&self) -> f64 {
        match *self {
            ScalarParam::Rho(v) | ScalarParam::Gamma(v) | ScalarParam::Mu(v) => v,
        }
    }
}

/// `M(v) = constant + Σ v_i · coeff_i`, symmetric for every assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMatrixFamily {
    constant: SymMatrix,
    coeffs: Vec<SymMatrix>,
    vars: Vec<VarDescriptor>,
    storage_dim: usize,
    parameter: Option<ScalarParam>,
}

impl AffineMatrixFamily {
    pub fn new(
        constant: SymMatrix,
        coeffs: Vec<SymMatrix>,
        vars: Vec<VarDescriptor>,
        storage_dim: usize,
    ) -> Result<Self> {
        if coeffs.len() != vars.len() {
            return Err(shape_err("family coefficients", vars.len(), coeffs.len()));
        }
        if let Some(bad) = coeffs.iter().position(|c| c.dim() != constant.dim()) {
            return Err(shape_err(format!("coefficient {bad}"), constant.dim(), coeffs[bad].dim()));
        }
        let expected = storage_dim * (storage_dim + 1) / 2;
        let storage: Vec<_> = vars
            .iter()
            .filter_map(|v| match v.kind {
                VarKind::StorageEntry { row, col } => Some((row, col)),
                _ => None,
            })
            .collect();
        if storage.len() != expected || storage.iter().any(|&(i, j)| i > j || j >= storage_dim) {
            return Err(Error::InvalidParameter(
                "storage-entry variables must cover the upper triangle of P exactly once".into(),
            ));
        }
        Ok(AffineMatrixFamily {
            constant,
            coeffs,
            vars,
            storage_dim,
            parameter: None,
        })
    }

    fn with_parameter(mut self, p: ScalarParam) -> Self {
        self.parameter = Some(p);
        self
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn storage_dim(&self) -> usize {
        self.storage_dim
    }

    pub fn vars(&self) -> &[VarDescriptor] {
        &self.vars
    }

    pub fn constant(&self) -> &SymMatrix {
        &self.constant
    }

    pub fn coeffs(&self) -> &[SymMatrix] {
        &self.coeffs
    }

    pub fn parameter(&self) -> Option<ScalarParam> {
        self.parameter
    }

    /// True when the constant term vanishes, so feasibility is invariant
    /// under positive scaling of the variables.
    pub fn is_homogeneous(&self) -> bool {
        self.constant.as_matrix().is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.constant.as_matrix().is_finite() && self.coeffs.iter().all(|c| c.as_matrix().is_finite())
    }

    pub fn evaluate(&self, values: &[f64]) -> SymMatrix {
        assert_eq!(values.len(), self.vars.len(), "family evaluation: wrong variable count");
        let mut m = self.constant.as_matrix().clone();
        for (c, &v) in self.coeffs.iter().zip(values) {
            if v != 0.0 {
                m = &m + &c.as_matrix().scale(v);
            }
        }
        SymMatrix::new(m).expect("finite family evaluation")
    }

    /// The storage matrix `P` encoded in `values`.
    pub fn storage(&self, values: &[f64]) -> SymMatrix {
        let n = self.storage_dim;
        let mut p = Matrix::zeros(n, n);
        for (var, &v) in self.vars.iter().zip(values) {
            if let VarKind::StorageEntry { row, col } = var.kind {
                p[(row, col)] = v;
                p[(col, row)] = v;
            }
        }
        SymMatrix::new(p).expect("finite storage")
    }

    /// Restriction to the principal submatrix on `indices`.
    pub fn principal(&self, indices: &[usize]) -> AffineMatrixFamily {
        let sub = |m: &SymMatrix| {
            let mut out = Matrix::zeros(indices.len(), indices.len());
            for (a, &i) in indices.iter().enumerate() {
                for (b, &j) in indices.iter().enumerate() {
                    out[(a, b)] = m[(i, j)];
                }
            }
            SymMatrix::new(out).expect("principal submatrix")
        };
        AffineMatrixFamily {
            constant: sub(&self.constant),
            coeffs: self.coeffs.iter().map(sub).collect(),
            vars: self.vars.clone(),
            storage_dim: self.storage_dim,
            parameter: self.parameter,
        }
    }
}

fn storage_vars(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn unit_sym(n: usize, i: usize, j: usize) -> Matrix {
    let mut e = Matrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// Storage contribution `Lᵀ diag(γP, −P) L` with `L = [[I, 0], [A, B…]]`.
fn storage_term(lift: &Matrix, gamma: f64, p: &Matrix) -> Matrix {
    let mid = Matrix::block_diag(&[&p.scale(gamma), &-p]);
    &(&lift.transpose() * &mid) * lift
}

struct FamilyBuilder {
    constant: Matrix,
    coeffs: Vec<SymMatrix>,
    vars: Vec<VarDescriptor>,
    storage_dim: usize,
}

impl FamilyBuilder {
    /// Starts a family whose storage part is `Lᵀ diag(γP, −P) L`.
    fn with_storage(lift: &Matrix, n: usize, gamma: f64) -> Result<Self> {
        let dim = lift.cols();
        let mut coeffs = Vec::new();
        let mut vars = Vec::new();
        for (i, j) in storage_vars(n) {
            let term = storage_term(lift, gamma, &unit_sym(n, i, j));
            coeffs.push(SymMatrix::new(term)?);
            vars.push(VarDescriptor {
                name: format!("P[{i},{j}]"),
                kind: VarKind::StorageEntry { row: i, col: j },
                nonnegative: false,
            });
        }
        Ok(FamilyBuilder {
            constant: Matrix::zeros(dim, dim),
            coeffs,
            vars,
            storage_dim: n,
        })
    }

    fn multiplier(&mut self, coeff: SymMatrix) {
        let k = self.vars.iter().filter(|v| v.kind == VarKind::Multiplier).count();
        self.coeffs.push(coeff);
        self.vars.push(VarDescriptor {
            name: format!("alpha_{k}"),
            kind: VarKind::Multiplier,
            nonnegative: true,
        });
    }

    fn add_constant(&mut self, term: &Matrix) {
        self.constant = &self.constant + term;
    }

    fn finish(self) -> Result<AffineMatrixFamily> {
        AffineMatrixFamily::new(SymMatrix::new(self.constant)?, self.coeffs, self.vars, self.storage_dim)
    }
}

fn check_yu_bound(bound: &OracleBound, idx: usize, p: usize, m: usize) -> Result<()> {
    let labels: Vec<_> = bound.partition().iter().map(|c| c.label).collect();
    if labels != [ChannelLabel::Y, ChannelLabel::U] || bound.y_dim() != p || bound.u_dim() != m {
        return Err(shape_err(
            format!("oracle bound {idx} partition"),
            format!("(y:{p}, u:{m})"),
            format!("{:?}", bound.partition()),
        ));
    }
    Ok(())
}

fn check_param(name: &str, v: f64, strict: bool) -> Result<()> {
    let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
    if !ok {
        let rel = if strict { "> 0" } else { ">= 0" };
        return Err(Error::InvalidParameter(format!("{name} must be finite and {rel}, got {v}")));
    }
    Ok(())
}

/// Dissipation LMI of a closed algorithm against its oracle bounds:
/// `[[γP − AᵀPA, −AᵀPB], [−BᵀPA, −BᵀPB]] + Σ α_i [C D; 0 I]ᵀ S_i [C D; 0 I] ⪰ 0`
/// over `(Δx, Δu)`. `γ = 1` is the plain nonexpansiveness test.
pub fn closed_lmi(model: &ClosedAlgorithmModel, bounds: &[OracleBound], gamma: f64) -> Result<AffineMatrixFamily> {
    check_param("gamma", gamma, true)?;
    let (n, m, p) = (model.n(), model.m(), model.p());
    for (i, b) in bounds.iter().enumerate() {
        check_yu_bound(b, i, p, m)?;
    }
    let top = Matrix::hstack(&[&Matrix::identity(n), &Matrix::zeros(n, m)])?;
    let bottom = Matrix::hstack(&[model.a(), model.b()])?;
    let lift = Matrix::vstack(&[&top, &bottom])?;
    let mut builder = FamilyBuilder::with_storage(&lift, n, gamma)?;
    let out_top = Matrix::hstack(&[model.c(), model.d()])?;
    let out_bottom = Matrix::hstack(&[&Matrix::zeros(m, n), &Matrix::identity(m)])?;
    let out = Matrix::vstack(&[&out_top, &out_bottom])?;
    for b in bounds {
        builder.multiplier(b.s().congruence(&out));
    }
    Ok(builder.finish()?.with_parameter(ScalarParam::Gamma(gamma)))
}

fn open_lift(model: &OpenAlgorithmModel) -> Result<Matrix> {
    let (n, m, r) = (model.n(), model.m(), model.r());
    let top = Matrix::hstack(&[&Matrix::identity(n), &Matrix::zeros(n, m), &Matrix::zeros(n, r)])?;
    let bottom = Matrix::hstack(&[model.a(), model.b1(), model.b2()])?;
    Matrix::vstack(&[&top, &bottom])
}

fn open_rows(model: &OpenAlgorithmModel) -> Result<(Matrix, Matrix, Matrix, Matrix)> {
    let (n, m, r) = (model.n(), model.m(), model.r());
    let y_row = Matrix::hstack(&[model.c1(), model.d11(), model.d12()])?;
    let u_row = Matrix::hstack(&[&Matrix::zeros(m, n), &Matrix::identity(m), &Matrix::zeros(m, r)])?;
    let z_row = Matrix::hstack(&[model.c2(), model.d21(), model.d22()])?;
    let d_row = Matrix::hstack(&[&Matrix::zeros(r, n), &Matrix::zeros(r, m), &Matrix::identity(r)])?;
    Ok((y_row, u_row, z_row, d_row))
}

/// Incremental ℓ²-gain LMI of an open algorithm over `(Δx, Δu, Δd)`: the
/// storage term plus `α_i`-weighted oracle bounds on `(y, u)` and the gain
/// supply `μ²‖Δd‖² − ‖Δz‖²`.
pub fn open_gain_lmi(model: &OpenAlgorithmModel, bounds: &[OracleBound], mu: f64) -> Result<AffineMatrixFamily> {
    check_param("mu", mu, false)?;
    let (n, m, p) = (model.n(), model.m(), model.p());
    for (i, b) in bounds.iter().enumerate() {
        check_yu_bound(b, i, p, m)?;
    }
    let mut builder = FamilyBuilder::with_storage(&open_lift(model)?, n, 1.0)?;
    let (y_row, u_row, z_row, d_row) = open_rows(model)?;
    let yu = Matrix::vstack(&[&y_row, &u_row])?;
    for b in bounds {
        builder.multiplier(b.s().congruence(&yu));
    }
    let zz = &z_row.transpose() * &z_row;
    let dd = &d_row.transpose() * &d_row;
    builder.add_constant(&-&zz);
    builder.add_constant(&dd.scale(mu * mu));
    Ok(builder.finish()?.with_parameter(ScalarParam::Mu(mu)))
}

/// LMI for the interconnection of an open algorithm, oracles `u = ψ(y, d)`
/// and a plant with supply `s_p(Δζ, Δν)`, with `ζ = d` and `ν = z`:
/// storage term plus `Σ α_i s_ψi(Δy, Δu, Δd) − s_p(Δd, Δz)` over
/// `(Δx, Δu, Δd)`. `(y, u)` bounds are treated as independent of `d`.
pub fn closed_loop_lmi(
    model: &OpenAlgorithmModel,
    psi_bounds: &[OracleBound],
    plant: &PlantSupply,
) -> Result<AffineMatrixFamily> {
    closed_loop_family(model, psi_bounds, plant, 1.0)
}

/// Experimental: [`closed_loop_lmi`] with the storage decrease weighted by
/// `γ` (`γP − AᵀPA` in the state block). Only the algorithm storage is
/// weighted; a matching plant-side rate is the caller's obligation.
pub fn closed_loop_lmi_weighted(
    model: &OpenAlgorithmModel,
    psi_bounds: &[OracleBound],
    plant: &PlantSupply,
    gamma: f64,
) -> Result<AffineMatrixFamily> {
    check_param("gamma", gamma, true)?;
    Ok(closed_loop_family(model, psi_bounds, plant, gamma)?.with_parameter(ScalarParam::Gamma(gamma)))
}

fn closed_loop_family(
    model: &OpenAlgorithmModel,
    psi_bounds: &[OracleBound],
    plant: &PlantSupply,
    gamma: f64,
) -> Result<AffineMatrixFamily> {
    let (n, m, p, r, q) = (model.n(), model.m(), model.p(), model.r(), model.q());
    if plant.r() != r {
        return Err(shape_err("plant supply zeta (= d) size", r, plant.r()));
    }
    if plant.q() != q {
        return Err(shape_err("plant supply nu (= z) size", q, plant.q()));
    }
    let mut builder = FamilyBuilder::with_storage(&open_lift(model)?, n, gamma)?;
    let (y_row, u_row, z_row, d_row) = open_rows(model)?;
    let yud = Matrix::vstack(&[&y_row, &u_row, &d_row])?;
    for (i, b) in psi_bounds.iter().enumerate() {
        let lifted = match b.d_dim() {
            0 => {
                check_yu_bound(b, i, p, m)?;
                b.with_d_channel(r)?
            }
            _ => b.clone(),
        };
        if lifted.y_dim() != p || lifted.u_dim() != m || lifted.d_dim() != r {
            return Err(shape_err(
                format!("psi bound {i} partition"),
                format!("(y:{p}, u:{m}, d:{r})"),
                format!("{:?}", b.partition()),
            ));
        }
        builder.multiplier(lifted.s().congruence(&yud));
    }
    let dz = Matrix::vstack(&[&d_row, &z_row])?;
    builder.add_constant(&-plant.s().congruence(&dz).as_matrix());
    builder.finish()
}

/// Dissipation LMI of a linear plant against a fixed supply over
/// `(Δζ, Δν)`; a feasible point is a storage matrix `P_p`.
pub fn plant_storage_lmi(plant: &LinearPlant, supply: &PlantSupply) -> Result<AffineMatrixFamily> {
    let (n, inputs, outputs) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    if supply.r() != outputs {
        return Err(shape_err("plant supply zeta size", outputs, supply.r()));
    }
    if supply.q() != inputs {
        return Err(shape_err("plant supply nu size", inputs, supply.q()));
    }
    let top = Matrix::hstack(&[&Matrix::identity(n), &Matrix::zeros(n, inputs)])?;
    let bottom = Matrix::hstack(&[plant.a(), plant.b()])?;
    let lift = Matrix::vstack(&[&top, &bottom])?;
    let mut builder = FamilyBuilder::with_storage(&lift, n, 1.0)?;
    let out_top = Matrix::hstack(&[plant.c(), plant.d()])?;
    let out_bottom = Matrix::hstack(&[&Matrix::zeros(inputs, n), &Matrix::identity(inputs)])?;
    let out = Matrix::vstack(&[&out_top, &out_bottom])?;
    builder.add_constant(supply.s().congruence(&out).as_matrix());
    builder.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub name: String,
    pub value: f64,
}

/// A verified feasible point of an LMI family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub p: SymMatrix,
    pub multipliers: Vec<Multiplier>,
    pub scalar: Option<ScalarParam>,
    /// `λ₋` of the LMI at the certificate, recomputed by the eigensolver.
    pub lmi_min_eig: f64,
    pub p_min_eig: f64,
    pub p_max_eig: f64,
    /// `λ₊(P)/λ₋(P)`.
    pub kappa: f64,
    /// All decision variables, in family order.
    pub values: Vec<f64>,
}

/// Margins recomputed from scratch for a set of variable values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margins {
    pub lmi_min_eig: f64,
    pub p_min_eig: f64,
    pub p_max_eig: f64,
    pub multipliers_nonnegative: bool,
}

impl Margins {
    pub fn accepts(&self, margin: f64, opts: &SolverOptions) -> bool {
        self.lmi_min_eig >= margin - opts.verify_tol && self.p_min_eig >= opts.p_floor && self.multipliers_nonnegative
    }
}

pub fn margins(family: &AffineMatrixFamily, values: &[f64]) -> Margins {
    let m = family.evaluate(values);
    let p = family.storage(values).eig();
    Margins {
        lmi_min_eig: m.min_eig(),
        p_min_eig: p.values[0],
        p_max_eig: *p.values.last().expect("dim >= 1"),
        multipliers_nonnegative: family
            .vars
            .iter()
            .zip(values)
            .all(|(v, &x)| !v.nonnegative || x >= 0.0),
    }
}

impl Certificate {
    fn from_values(family: &AffineMatrixFamily, values: Vec<f64>, m: Margins) -> Self {
        let multipliers = family
            .vars
            .iter()
            .zip(&values)
            .filter(|(v, _)| v.kind == VarKind::Multiplier)
            .map(|(v, &x)| Multiplier {
                name: v.name.clone(),
                value: x,
            })
            .collect();
        Certificate {
            p: family.storage(&values),
            multipliers,
            scalar: family.parameter,
            lmi_min_eig: m.lmi_min_eig,
            p_min_eig: m.p_min_eig,
            p_max_eig: m.p_max_eig,
            kappa: m.p_max_eig / m.p_min_eig,
            values,
        }
    }

    /// Recomputes the margins of this certificate against `family`.
    pub fn revalidate(&self, family: &AffineMatrixFamily) -> Margins {
        margins(family, &self.values)
    }

    /// `V(Δx) = ΔxᵀPΔx`.
    pub fn storage_value(&self, dx: &[f64]) -> f64 {
        self.p.quad_form(dx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub verify_tol: f64,
    pub p_floor: f64,
    pub seed: u64,
    /// Additional randomized starts tried after a numerical breakdown.
    pub restarts: usize,
    /// Upper bound on every multiplier.
    pub multiplier_cap: f64,
    /// For families with a constant term, `trace(P) <= trace_cap · n`.
    pub trace_cap: f64,
    /// Barrier duality-gap target.
    pub gap_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            verify_tol: VERIFY_TOL,
            p_floor: P_FLOOR,
            seed: 0,
            restarts: 5,
            multiplier_cap: 1e6,
            trace_cap: 1e6,
            gap_tol: 1e-11,
            max_newton: 60,
        }
    }
}

/// Outcome of a feasibility solve. `NotFound` means no certificate was
/// found; it is not a proof of infeasibility.
#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Found(Certificate),
    NotFound { lmi_min_eig: f64, p_min_eig: f64 },
}

impl Feasibility {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Feasibility::Found(c) => Some(c),
            Feasibility::NotFound { .. } => None,
        }
    }

    pub fn into_certificate(self) -> Option<Certificate> {
        match self {
            Feasibility::Found(c) => Some(c),
            Feasibility::NotFound { .. } => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Feasibility::Found(_))
    }

    /// Verified `λ₋(LMI)` at the returned or best point.
    pub fn lmi_min_eig(&self) -> f64 {
        match self {
            Feasibility::Found(c) => c.lmi_min_eig,
            Feasibility::NotFound { lmi_min_eig, .. } => *lmi_min_eig,
        }
    }
}

/// Looks for variables with `M(v) ⪰ margin·I`, `P ≻ 0` and nonnegative
/// multipliers.
///
/// Internally maximizes `t` subject to `M(v) ⪰ (margin + t) I`, `P ⪰ t I`,
/// `0 ≤ α_i ≤ cap`, with `trace(P) = n` when the family has no constant
/// term and `trace(P) ≤ cap·n` otherwise, by a log-det barrier method. The
/// returned point is accepted only after its eigenvalues are recomputed
/// with the Jacobi solver.
pub fn solve_feasibility(family: &AffineMatrixFamily, margin: f64, opts: &SolverOptions) -> Result<Feasibility> {
    check_param("margin", margin, false)?;
    if !family.is_finite() {
        return Err(Error::NonFinite("LMI family".into()));
    }
    let point = Barrier::new(family, margin, opts).maximize()?;
    let m = margins(family, &point);
    if m.accepts(margin, opts) {
        Ok(Feasibility::Found(Certificate::from_values(family, point, m)))
    } else {
        Ok(Feasibility::NotFound {
            lmi_min_eig: m.lmi_min_eig,
            p_min_eig: m.p_min_eig,
        })
    }
}

struct Barrier<'a> {
    family: &'a AffineMatrixFamily,
    margin: f64,
    opts: &'a SolverOptions,
    /// Storage coefficient matrices `E_ij`, indexed like the variables.
    storage_coeff: Vec<Option<Matrix>>,
    /// Gradient of `trace(P)` with respect to the variables.
    trace_grad: Vec<f64>,
    homogeneous: bool,
}

/// Variables are `(v_0, …, v_{N−1}, t)`.
impl<'a> Barrier<'a> {
    fn new(family: &'a AffineMatrixFamily, margin: f64, opts: &'a SolverOptions) -> Self {
        let n = family.storage_dim;
        let storage_coeff = family
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::StorageEntry { row, col } => Some(unit_sym(n, row, col)),
                _ => None,
            })
            .collect();
        let trace_grad = family
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::StorageEntry { row, col } if row == col => 1.0,
                _ => 0.0,
            })
            .collect();
        Barrier {
            family,
            margin,
            opts,
            storage_coeff,
            trace_grad,
            homogeneous: family.is_homogeneous(),
        }
    }

    fn nvars(&self) -> usize {
        self.family.vars.len()
    }

    fn trace_limit(&self) -> f64 {
        self.opts.trace_cap * self.family.storage_dim as f64
    }

    fn lmi_block(&self, z: &[f64]) -> Matrix {
        let nv = self.nvars();
        let mut m = self.family.evaluate(&z[..nv]).into_matrix();
        let shift = self.margin + z[nv];
        for i in 0..m.rows() {
            m[(i, i)] -= shift;
        }
        m
    }

    fn storage_block(&self, z: &[f64]) -> Matrix {
        let nv = self.nvars();
        let mut p = self.family.storage(&z[..nv]).into_matrix();
        for i in 0..p.rows() {
            p[(i, i)] -= z[nv];
        }
        p
    }

    fn trace(&self, z: &[f64]) -> f64 {
        self.trace_grad.iter().zip(z).map(|(g, v)| g * v).sum()
    }

    fn scalar_slacks(&self, z: &[f64]) -> Vec<(usize, f64, f64)> {
        // (variable, slack, d slack / d variable)
        let mut out = Vec::new();
        for (k, v) in self.family.vars.iter().enumerate() {
            if v.nonnegative {
                out.push((k, z[k], 1.0));
            }
            if v.kind == VarKind::Multiplier {
                out.push((k, self.opts.multiplier_cap - z[k], -1.0));
            }
        }
        out
    }

    fn degree(&self) -> f64 {
        let scalars = self.scalar_slacks(&vec![1.0; self.nvars() + 1]).len();
        let trace = usize::from(!self.homogeneous);
        (self.family.dim() + self.family.storage_dim + scalars + trace) as f64
    }

    /// Barrier objective `−τ t + φ(z)`, or `None` outside the domain.
    fn objective(&self, z: &[f64], tau: f64) -> Option<f64> {
        let (_, ld1) = self.lmi_block(z).spd_inverse_logdet()?;
        let (_, ld2) = self.storage_block(z).spd_inverse_logdet()?;
        let mut phi = -ld1 - ld2;
        for (_, s, _) in self.scalar_slacks(z) {
            if !(s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        if !self.homogeneous {
            let s = self.trace_limit() - self.trace(z);
            if !(s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        let f = -tau * z[self.nvars()] + phi;
        f.is_finite().then_some(f)
    }

    fn gradient_hessian(&self, z: &[f64], tau: f64) -> Option<(Vec<f64>, Matrix)> {
        let nv = self.nvars();
        let dim = nv + 1;
        let mut g = vec![0.0; dim];
        let mut h = Matrix::zeros(dim, dim);
        g[nv] = -tau;

        let (inv1, _) = self.lmi_block(z).spd_inverse_logdet()?;
        let mut w: Vec<Option<Matrix>> = self
            .family
            .coeffs
            .iter()
            .map(|c| (!c.as_matrix().is_zero()).then(|| &inv1 * c.as_matrix()))
            .collect();
        w.push(Some(-&inv1));
        accumulate_logdet(&w, &mut g, &mut h);

        let (inv2, _) = self.storage_block(z).spd_inverse_logdet()?;
        let mut w: Vec<Option<Matrix>> = self
            .storage_coeff
            .iter()
            .map(|c| c.as_ref().map(|e| &inv2 * e))
            .collect();
        w.push(Some(-&inv2));
        accumulate_logdet(&w, &mut g, &mut h);

        for (k, s, ds) in self.scalar_slacks(z) {
            g[k] -= ds / s;
            h[(k, k)] += 1.0 / (s * s);
        }
        if !self.homogeneous {
            let s = self.trace_limit() - self.trace(z);
            for (k, &a) in self.trace_grad.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                g[k] += a / s;
                for (l, &b) in self.trace_grad.iter().enumerate() {
                    h[(k, l)] += a * b / (s * s);
                }
            }
        }
        (g.iter().all(|v| v.is_finite()) && h.is_finite()).then_some((g, h))
    }

    /// Newton direction, keeping `trace(P)` fixed for homogeneous families.
    fn newton_step(&self, g: &[f64], h: &Matrix) -> Option<Vec<f64>> {
        let dim = g.len();
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        if !self.homogeneous {
            return h.solve(&rhs);
        }
        let mut kkt = Matrix::zeros(dim + 1, dim + 1);
        kkt.set_block(0, 0, h);
        for (k, &a) in self.trace_grad.iter().enumerate() {
            kkt[(k, dim)] = a;
            kkt[(dim, k)] = a;
        }
        let mut full_rhs = rhs;
        full_rhs.push(0.0);
        let mut sol = kkt.solve(&full_rhs)?;
        sol.truncate(dim);
        Some(sol)
    }

    fn initial_point(&self, rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
        let nv = self.nvars();
        let n = self.family.storage_dim;
        let mut z = vec![0.0; nv + 1];
        let mut p = Matrix::identity(n);
        let alpha0 = 1.0_f64.min(0.5 * self.opts.multiplier_cap);
        let mut noise = Vec::new();
        if let Some(rng) = rng {
            let a = Matrix::from_row_slice(
                n,
                n,
                &(0..n * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>(),
            )
            .expect("square noise");
            // P = I + 0.5·AAᵀ/‖A‖², rescaled to trace n.
            let aat = &a * &a.transpose();
            let scale = aat.trace().max(1e-300);
            p = &p + &aat.scale(0.5 * n as f64 / scale);
            let tr = p.trace();
            p = p.scale(n as f64 / tr);
            noise = (0..nv).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        }
        for (k, v) in self.family.vars.iter().enumerate() {
            z[k] = match v.kind {
                VarKind::StorageEntry { row, col } => p[(row, col)],
                VarKind::Multiplier => {
                    let base = alpha0;
                    noise.get(k).map_or(base, |e| (base * e.exp()).min(0.5 * self.opts.multiplier_cap))
                }
                VarKind::FreeScalar => 0.0,
            };
        }
        let m_min = SymMatrix::new(self.lmi_block(&z)).map(|m| m.min_eig()).unwrap_or(-1.0);
        let p_min = SymMatrix::new(self.storage_block(&z)).map(|m| m.min_eig()).unwrap_or(0.0);
        z[nv] = m_min.min(p_min) - 1.0;
        z
    }

    fn path_follow(&self, mut z: Vec<f64>) -> Option<Vec<f64>> {
        let nv = self.nvars();
        let degree = self.degree();
        let mut tau = 1.0;
        loop {
            for _ in 0..self.opts.max_newton {
                let f0 = self.objective(&z, tau)?;
                let (g, h) = self.gradient_hessian(&z, tau)?;
                let dz = self.newton_step(&g, &h)?;
                let slope: f64 = g.iter().zip(&dz).map(|(a, b)| a * b).sum();
                if -slope <= 1e-10 {
                    break;
                }
                let mut step = 1.0;
                let mut moved = false;
                while step > 1e-14 {
                    let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
                    if let Some(f1) = self.objective(&trial, tau) {
                        if f1 <= f0 + 0.25 * step * slope {
                            z = trial;
                            moved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let scale = 1.0_f64.max(z[nv].abs());
            if degree / tau < self.opts.gap_tol * scale {
                return Some(z);
            }
            tau *= 8.0;
        }
    }

    fn maximize(&self) -> Result<Vec<f64>> {
        let nv = self.nvars();
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let mut best: Option<Vec<f64>> = None;
        for attempt in 0..=self.opts.restarts {
            let start = if attempt == 0 {
                self.initial_point(None)
            } else {
                self.initial_point(Some(&mut rng))
            };
            if let Some(z) = self.path_follow(start) {
                // A converged run is optimal up to the gap tolerance.
                return Ok(z[..nv].to_vec());
            }
            // Numerical breakdown: keep the best reachable point from a
            // damped run and retry from a perturbed start.
            if let Some(z) = self.damped(self.initial_point(None)) {
                if best.as_ref().is_none_or(|b| self.score(&z) > self.score(b)) {
                    best = Some(z);
                }
            }
        }
        best.map(|z| z[..nv].to_vec())
            .ok_or_else(|| Error::Numerical("barrier method could not start".into()))
    }

    fn score(&self, z: &[f64]) -> f64 {
        z[self.nvars()]
    }

    /// Centering without the outer schedule; returns the last valid iterate.
    fn damped(&self, mut z: Vec<f64>) -> Option<Vec<f64>> {
        let mut tau = 1.0;
        self.objective(&z, tau)?;
        for _ in 0..12 {
            for _ in 0..self.opts.max_newton {
                let Some(f0) = self.objective(&z, tau) else { break };
                let Some((g, h)) = self.gradient_hessian(&z, tau) else { break };
                let Some(dz) = self.newton_step(&g, &h) else { break };
                let slope: f64 = g.iter().zip(&dz).map(|(a, b)| a * b).sum();
                if -slope <= 1e-10 {
                    break;
                }
                let mut step = 1.0;
                while step > 1e-14 {
                    let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
                    if matches!(self.objective(&trial, tau), Some(f1) if f1 <= f0 + 0.25 * step * slope) {
                        z = trial;
                        break;
                    }
                    step *= 0.5;
                }
            }
            tau *= 8.0;
        }
        Some(z)
    }
}

/// Adds the gradient and Hessian of `−ln det F` given `W_k = F⁻¹ G_k`.
fn accumulate_logdet(w: &[Option<Matrix>], g: &mut [f64], h: &mut Matrix) {
    for (k, wk) in w.iter().enumerate() {
        let Some(wk) = wk else { continue };
        g[k] -= wk.trace();
        for (l, wl) in w.iter().enumerate().skip(k) {
            let Some(wl) = wl else { continue };
            let n = wk.rows();
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += wk[(i, j)] * wl[(j, i)];
                }
            }
            h[(k, l)] += s;
            if l != k {
                h[(l, k)] += s;
            }
        }
    }
}

/// One probe of a scalar search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub value: f64,
    pub feasible: bool,
    pub lmi_min_eig: f64,
}

/// Result of a scalar search: the certified value (if any) and every probe
/// in the order it was made.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: Option<(f64, Certificate)>,
    pub trace: Vec<BisectionStep>,
}

impl SearchOutcome {
    pub fn value(&self) -> Option<f64> {
        self.best.as_ref().map(|(v, _)| *v)
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.best.as_ref().map(|(_, c)| c)
    }
}

fn probe(
    trace: &mut Vec<BisectionStep>,
    value: f64,
    family: &AffineMatrixFamily,
    margin: f64,
    opts: &SolverOptions,
) -> Result<Option<Certificate>> {
    let f = solve_feasibility(family, margin, opts)?;
    trace.push(BisectionStep {
        value,
        feasible: f.is_found(),
        lmi_min_eig: f.lmi_min_eig(),
    });
    Ok(f.into_certificate())
}

fn check_tol(tol: f64) -> Result<()> {
    check_param("tol", tol, true)
}

/// Largest `ρ` with `closed_lmi(γ = 1) ⪰ ρI` and `P ≻ 0`, by bisection to
/// absolute tolerance `tol`.
pub fn maximize_rho(
    model: &ClosedAlgorithmModel,
    bounds: &[OracleBound],
    tol: f64,
    opts: &SolverOptions,
) -> Result<SearchOutcome> {
    check_tol(tol)?;
    let family = closed_lmi(model, bounds, 1.0)?;
    let mut trace = Vec::new();
    let with_rho = |rho: f64, c: Certificate| Certificate {
        scalar: Some(ScalarParam::Rho(rho)),
        ..c
    };
    let Some(mut cert) = probe(&mut trace, 0.0, &family, 0.0, opts)? else {
        return Ok(SearchOutcome { best: None, trace });
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        match probe(&mut trace, hi, &family, hi, opts)? {
            Some(c) if hi < 2f64.powi(20) => {
                lo = hi;
                cert = c;
                hi *= 2.0;
            }
            Some(c) => {
                return Ok(SearchOutcome {
                    best: Some((hi, with_rho(hi, c))),
                    trace,
                })
            }
            None => break,
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match probe(&mut trace, mid, &family, mid, opts)? {
            Some(c) => {
                lo = mid;
                cert = c;
            }
            None => hi = mid,
        }
    }
    Ok(SearchOutcome {
        best: Some((lo, with_rho(lo, cert))),
        trace,
    })
}

/// Smallest `γ ∈ (0, 1]` for which `closed_lmi(γ)` is feasible, to absolute
/// tolerance `tol`. Feasibility is monotone in `γ` because `γ` only enters
/// through `+γP` with `P ⪰ 0`.
pub fn bisect_gamma(
    model: &ClosedAlgorithmModel,
    bounds: &[OracleBound],
    tol: f64,
    opts: &SolverOptions,
) -> Result<SearchOutcome> {
    check_tol(tol)?;
    let mut trace = Vec::new();
    let Some(mut cert) = probe(&mut trace, 1.0, &closed_lmi(model, bounds, 1.0)?, 0.0, opts)? else {
        return Ok(SearchOutcome { best: None, trace });
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match probe(&mut trace, mid, &closed_lmi(model, bounds, mid)?, 0.0, opts)? {
            Some(c) => {
                hi = mid;
                cert = c;
            }
            None => lo = mid,
        }
    }
    Ok(SearchOutcome {
        best: Some((hi, cert)),
        trace,
    })
}

/// Upper limit of the μ doubling phase.
pub const MU_SEARCH_LIMIT: f64 = 1152921504606846976.0; // 2^60

/// Smallest `μ ≥ 0` for which `open_gain_lmi(μ)` is feasible, to absolute
/// tolerance `tol`.
///
/// The `(Δx, Δu)` principal block of the family does not depend on `μ`, so
/// its infeasibility ends the search before the doubling phase.
pub fn bisect_mu(
    model: &OpenAlgorithmModel,
    bounds: &[OracleBound],
    tol: f64,
    opts: &SolverOptions,
) -> Result<SearchOutcome> {
    check_tol(tol)?;
    let mut trace = Vec::new();
    let base = open_gain_lmi(model, bounds, 0.0)?;
    if let Some(c) = probe(&mut trace, 0.0, &base, 0.0, opts)? {
        return Ok(SearchOutcome {
            best: Some((0.0, c)),
            trace,
        });
    }
    let xu: Vec<usize> = (0..model.n() + model.m()).collect();
    if !solve_feasibility(&base.principal(&xu), 0.0, opts)?.is_found() {
        return Ok(SearchOutcome { best: None, trace });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut cert = loop {
        if let Some(c) = probe(&mut trace, hi, &open_gain_lmi(model, bounds, hi)?, 0.0, opts)? {
            break c;
        }
        lo = hi;
        hi *= 2.0;
        if hi > MU_SEARCH_LIMIT {
            return Ok(SearchOutcome { best: None, trace });
        }
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match probe(&mut trace, mid, &open_gain_lmi(model, bounds, mid)?, 0.0, opts)? {
            Some(c) => {
                hi = mid;
                cert = c;
            }
            None => lo = mid,
        }
    }
    Ok(SearchOutcome {
        best: Some((hi, cert)),
        trace,
    })
}
