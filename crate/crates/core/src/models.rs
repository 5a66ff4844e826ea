//! Algorithms as linear systems in feedback with oracles, and quadratic
//! incremental bounds on those oracles.
//!
//! A closed algorithm is `x⁺ = A x + B u`, `y = C x + D u` with `u = φ(y)`.
//! An open algorithm additionally has an external input `d` and a
//! performance output `z`:
//!
//! ```text
//! x⁺ = A x  + B1 u  + B2 d
//! y  = C1 x + D11 u + D12 d
//! z  = C2 x + D21 u + D22 d
//! ```
//!
//! Every [`OracleBound`] uses the convention that a conforming oracle
//! satisfies `(stacked increments)ᵀ S (stacked increments) ≤ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::{Matrix, SymMatrix};

fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(shape_err(
            name,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

fn positive_dim(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
    }
    Ok(())
}

/// Closed algorithm `x⁺ = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedAlgorithmModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

impl ClosedAlgorithmModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.rows();
        let m = b.cols();
        let p = c.rows();
        positive_dim("state dimension n", n)?;
        positive_dim("oracle input dimension m", m)?;
        positive_dim("oracle output dimension p", p)?;
        check_shape("A", &a, n, n)?;
        check_shape("B", &b, n, m)?;
        check_shape("C", &c, p, n)?;
        check_shape("D", &d, p, m)?;
        Ok(ClosedAlgorithmModel { a, b, c, d })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }
    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows()
    }
    /// Oracle output (algorithm input) dimension.
    pub fn m(&self) -> usize {
        self.b.cols()
    }
    /// Oracle input (algorithm output) dimension.
    pub fn p(&self) -> usize {
        self.c.rows()
    }
}

/// Open algorithm with oracle channel `(y, u)` and external channel `(d, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenAlgorithmModel {
    a: Matrix,
    b1: Matrix,
    b2: Matrix,
    c1: Matrix,
    d11: Matrix,
    d12: Matrix,
    c2: Matrix,
    d21: Matrix,
    d22: Matrix,
}

impl OpenAlgorithmModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Matrix,
        b1: Matrix,
        b2: Matrix,
        c1: Matrix,
        d11: Matrix,
        d12: Matrix,
        c2: Matrix,
        d21: Matrix,
        d22: Matrix,
    ) -> Result<Self> {
        let n = a.rows();
        let m = b1.cols();
        let r = b2.cols();
        let p = c1.rows();
        let q = c2.rows();
        positive_dim("state dimension n", n)?;
        positive_dim("oracle input dimension m", m)?;
        positive_dim("external input dimension r", r)?;
        positive_dim("oracle output dimension p", p)?;
        positive_dim("performance output dimension q", q)?;
        check_shape("A", &a, n, n)?;
        check_shape("B1", &b1, n, m)?;
        check_shape("B2", &b2, n, r)?;
        check_shape("C1", &c1, p, n)?;
        check_shape("D11", &d11, p, m)?;
        check_shape("D12", &d12, p, r)?;
        check_shape("C2", &c2, q, n)?;
        check_shape("D21", &d21, q, m)?;
        check_shape("D22", &d22, q, r)?;
        Ok(OpenAlgorithmModel {
            a,
            b1,
            b2,
            c1,
            d11,
            d12,
            c2,
            d21,
            d22,
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b1(&self) -> &Matrix {
        &self.b1
    }
    pub fn b2(&self) -> &Matrix {
        &self.b2
    }
    pub fn c1(&self) -> &Matrix {
        &self.c1
    }
    pub fn d11(&self) -> &Matrix {
        &self.d11
    }
    pub fn d12(&self) -> &Matrix {
        &self.d12
    }
    pub fn c2(&self) -> &Matrix {
        &self.c2
    }
    pub fn d21(&self) -> &Matrix {
        &self.d21
    }
    pub fn d22(&self) -> &Matrix {
        &self.d22
    }
    pub fn n(&self) -> usize {
        self.a.rows()
    }
    pub fn m(&self) -> usize {
        self.b1.cols()
    }
    pub fn r(&self) -> usize {
        self.b2.cols()
    }
    pub fn p(&self) -> usize {
        self.c1.rows()
    }
    pub fn q(&self) -> usize {
        self.c2.rows()
    }

    /// The closed algorithm obtained by setting `d ≡ 0`.
    pub fn closed_part(&self) -> ClosedAlgorithmModel {
        ClosedAlgorithmModel {
            a: self.a.clone(),
            b: self.b1.clone(),
            c: self.c1.clone(),
            d: self.d11.clone(),
        }
    }
}

/// Linear plant `ξ⁺ = A ξ + B ν`, `ζ = C ξ + D ν`, interconnected with an
/// open algorithm through `ζ = d` and `ν = z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPlant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

impl LinearPlant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.rows();
        let inputs = b.cols();
        let outputs = c.rows();
        positive_dim("plant state dimension", n)?;
        positive_dim("plant input dimension", inputs)?;
        positive_dim("plant output dimension", outputs)?;
        check_shape("plant A", &a, n, n)?;
        check_shape("plant B", &b, n, inputs)?;
        check_shape("plant C", &c, outputs, n)?;
        check_shape("plant D", &d, outputs, inputs)?;
        Ok(LinearPlant { a, b, c, d })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
    /// Dimension of ν.
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
    /// Dimension of ζ.
    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }
}

/// Signal a block of a bound's stacked increment vector refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelLabel {
    Y,
    U,
    D,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub label: ChannelLabel,
    pub size: usize,
}

impl Channel {
    pub fn y(size: usize) -> Self {
        Channel { label: ChannelLabel::Y, size }
    }
    pub fn u(size: usize) -> Self {
        Channel { label: ChannelLabel::U, size }
    }
    pub fn d(size: usize) -> Self {
        Channel { label: ChannelLabel::D, size }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundKind {
    StronglyMonotone { mu: f64 },
    Lipschitz { lipschitz: f64 },
    FirmlyNonexpansive,
    Sector { mu: f64, lipschitz: f64 },
    AffineEquality,
    Custom,
}

/// Quadratic incremental constraint `vᵀ S v ≤ 0` satisfied by an oracle,
/// where `v` stacks the increments of the channels in `partition`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleBound {
    s: SymMatrix,
    partition: Vec<Channel>,
    kind: BoundKind,
}

fn yu_bound(kind: BoundKind, dim: usize, yy: f64, yu: f64, uu: f64) -> Result<OracleBound> {
    positive_dim("bound dimension", dim)?;
    let id = Matrix::identity(dim);
    let s = Matrix::from_rows(&[vec![yy, yu], vec![yu, uu]])?.kron(&id);
    Ok(OracleBound {
        s: SymMatrix::new(s)?,
        partition: vec![Channel::y(dim), Channel::u(dim)],
        kind,
    })
}

/// `(y, u)` bound of a `μ`-strongly monotone oracle:
/// `S = [[2μI, −I], [−I, 0]]`.
pub fn strongly_monotone_bound(mu: f64, dim: usize) -> Result<OracleBound> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("strong monotonicity mu must be > 0, got {mu}")));
    }
    yu_bound(BoundKind::StronglyMonotone { mu }, dim, 2.0 * mu, -1.0, 0.0)
}

/// `(y, u)` bound of an `L`-Lipschitz oracle: `‖Δu‖² − L²‖Δy‖² ≤ 0`.
pub fn lipschitz_bound(lipschitz: f64, dim: usize) -> Result<OracleBound> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::InvalidParameter(format!("Lipschitz constant must be > 0, got {lipschitz}")));
    }
    yu_bound(BoundKind::Lipschitz { lipschitz }, dim, -lipschitz * lipschitz, 0.0, 1.0)
}

/// `(y, u)` bound of a firmly nonexpansive oracle: `‖Δu‖² − ΔuᵀΔy ≤ 0`.
pub fn firmly_nonexpansive_bound(dim: usize) -> Result<OracleBound> {
    yu_bound(BoundKind::FirmlyNonexpansive, dim, 0.0, -0.5, 1.0)
}

/// Sector `[μ, L]` bound `2(Δu − μΔy)ᵀ(Δu − LΔy) ≤ 0`, satisfied by gradients
/// of `μ`-strongly convex, `L`-smooth functions.
/// `S = [[2μL I, −(μ+L) I], [−(μ+L) I, 2 I]]`.
pub fn sector_bound(mu: f64, lipschitz: f64, dim: usize) -> Result<OracleBound> {
    if !(mu >= 0.0) || !lipschitz.is_finite() || !(lipschitz > mu) {
        return Err(Error::InvalidParameter(format!(
            "sector bound requires 0 <= mu < L, got mu = {mu}, L = {lipschitz}"
        )));
    }
    yu_bound(
        BoundKind::Sector { mu, lipschitz },
        dim,
        2.0 * mu * lipschitz,
        -(mu + lipschitz),
        2.0,
    )
}

/// Bound of an exactly known affine oracle `u = E y + G d`, written as
/// `‖Δu − EΔy − GΔd‖² ≤ 0` over `(y, u, d)`. `g` may have zero columns, in
/// which case the partition is `(y, u)`.
pub fn affine_equality_bound(e: &Matrix, g: &Matrix) -> Result<OracleBound> {
    let m = e.rows();
    let p = e.cols();
    let r = g.cols();
    positive_dim("affine bound output dimension", m)?;
    positive_dim("affine bound input dimension", p)?;
    if g.rows() != m {
        return Err(shape_err("affine bound G rows", m, g.rows()));
    }
    if !e.is_finite() || !g.is_finite() {
        return Err(Error::NonFinite("affine bound E/G".into()));
    }
    let neg_e = -e;
    let neg_g = -g;
    let id = Matrix::identity(m);
    let mut parts = vec![&neg_e, &id];
    if r > 0 {
        parts.push(&neg_g);
    }
    let mrow = Matrix::hstack(&parts)?;
    let s = SymMatrix::new(&mrow.transpose() * &mrow)?;
    let mut partition = vec![Channel::y(p), Channel::u(m)];
    if r > 0 {
        partition.push(Channel::d(r));
    }
    Ok(OracleBound {
        s,
        partition,
        kind: BoundKind::AffineEquality,
    })
}

impl OracleBound {
    /// User-supplied bound. `partition` must be `(y, u)` or `(y, u, d)` and
    /// its sizes must add up to `dim(S)`.
    pub fn custom(s: SymMatrix, partition: Vec<Channel>) -> Result<Self> {
        let labels: Vec<ChannelLabel> = partition.iter().map(|c| c.label).collect();
        if labels != [ChannelLabel::Y, ChannelLabel::U] && labels != [ChannelLabel::Y, ChannelLabel::U, ChannelLabel::D] {
            return Err(Error::InvalidParameter(
                "bound partition must be (y, u) or (y, u, d)".into(),
            ));
        }
        if partition.iter().any(|c| c.size == 0) {
            return Err(Error::InvalidParameter("bound channel sizes must be positive".into()));
        }
        let total: usize = partition.iter().map(|c| c.size).sum();
        if total != s.dim() {
            return Err(shape_err("custom bound S", total, s.dim()));
        }
        Ok(OracleBound {
            s,
            partition,
            kind: BoundKind::Custom,
        })
    }

    pub fn s(&self) -> &SymMatrix {
        &self.s
    }

    pub fn partition(&self) -> &[Channel] {
        &self.partition
    }

    pub fn kind(&self) -> &BoundKind {
        &self.kind
    }

    pub fn channel_size(&self, label: ChannelLabel) -> usize {
        self.partition
            .iter()
            .find(|c| c.label == label)
            .map_or(0, |c| c.size)
    }

    pub fn y_dim(&self) -> usize {
        self.channel_size(ChannelLabel::Y)
    }

    pub fn u_dim(&self) -> usize {
        self.channel_size(ChannelLabel::U)
    }

    pub fn d_dim(&self) -> usize {
        self.channel_size(ChannelLabel::D)
    }

    /// Quadratic form on the stacked increments `(Δy, Δu[, Δd])`.
    pub fn form(&self, dy: &[f64], du: &[f64], dd: Option<&[f64]>) -> f64 {
        let mut v = Vec::with_capacity(self.s.dim());
        v.extend_from_slice(dy);
        v.extend_from_slice(du);
        if self.d_dim() > 0 {
            v.extend_from_slice(dd.expect("bound has a d channel"));
        }
        assert_eq!(v.len(), self.s.dim(), "bound form: increment length mismatch");
        self.s.quad_form(&v)
    }

    /// The same bound over `(y, u, d)` with a `d` channel of size `r` that
    /// the bound does not depend on. Bounds that already carry a `d`
    /// channel are returned unchanged if sizes agree.
    pub fn with_d_channel(&self, r: usize) -> Result<OracleBound> {
        positive_dim("d channel size", r)?;
        match self.d_dim() {
            0 => {
                let s = Matrix::block_diag(&[self.s.as_matrix(), &Matrix::zeros(r, r)]);
                let mut partition = self.partition.clone();
                partition.push(Channel::d(r));
                Ok(OracleBound {
                    s: SymMatrix::new(s)?,
                    partition,
                    kind: self.kind.clone(),
                })
            }
            existing if existing == r => Ok(self.clone()),
            existing => Err(shape_err("bound d channel", r, existing)),
        }
    }

    /// Embeds a `(y, u)` bound on a sub-channel into a larger `(y, u)`
    /// channel of sizes `(p, m)`, acting on `y[y_offset..]` and
    /// `u[u_offset..]`.
    pub fn embed(&self, y_offset: usize, p: usize, u_offset: usize, m: usize) -> Result<OracleBound> {
        if self.d_dim() != 0 {
            return Err(Error::InvalidParameter("only (y, u) bounds can be embedded".into()));
        }
        let (py, mu) = (self.y_dim(), self.u_dim());
        if y_offset + py > p || u_offset + mu > m {
            return Err(shape_err(
                "embedded bound",
                format!("y {}..{} within {p}, u {}..{} within {m}", y_offset, y_offset + py, u_offset, u_offset + mu),
                "out of range",
            ));
        }
        let mut sel = Matrix::zeros(py + mu, p + m);
        for i in 0..py {
            sel[(i, y_offset + i)] = 1.0;
        }
        for i in 0..mu {
            sel[(py + i, p + u_offset + i)] = 1.0;
        }
        Ok(OracleBound {
            s: self.s.congruence(&sel),
            partition: vec![Channel::y(p), Channel::u(m)],
            kind: self.kind.clone(),
        })
    }
}

/// Quadratic supply rate of a plant over `(Δζ, Δν)`, with `ζ` of size `r`
/// (identified with the algorithm's `d`) and `ν` of size `q` (identified
/// with `z`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantSupply {
    s: SymMatrix,
    r: usize,
    q: usize,
}

impl PlantSupply {
    pub fn new(s: SymMatrix, r: usize, q: usize) -> Result<Self> {
        positive_dim("plant supply zeta size", r)?;
        positive_dim("plant supply nu size", q)?;
        if s.dim() != r + q {
            return Err(shape_err("plant supply S_p", r + q, s.dim()));
        }
        Ok(PlantSupply { s, r, q })
    }

    /// Supply of a plant with incremental ℓ² gain `gain` from ν to ζ,
    /// normalized by `gain²`: `s_p = ‖Δν‖² − ‖Δζ‖²/gain²`.
    pub fn incremental_gain(gain: f64, r: usize, q: usize) -> Result<Self> {
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::InvalidParameter(format!("plant gain must be > 0, got {gain}")));
        }
        let inv = 1.0 / gain;
        let mut diag = vec![-(inv * inv); r];
        diag.extend(std::iter::repeat_n(1.0, q));
        PlantSupply::new(SymMatrix::from_diag(&diag)?, r, q)
    }

    pub fn s(&self) -> &SymMatrix {
        &self.s
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn q(&self) -> usize {
        self.q
    }
}

/// Shared interface of closed and open algorithms used by the simulator.
/// Closed algorithms have empty external channels.
pub trait LinearBlock {
    fn state_dim(&self) -> usize;
    fn oracle_input_dim(&self) -> usize;
    fn oracle_output_dim(&self) -> usize;
    fn external_input_dim(&self) -> usize;
    fn performance_dim(&self) -> usize;
    /// Direct feedthrough from `u` to `y`, with its name for error messages.
    fn feedthrough(&self) -> (&'static str, &Matrix);
    /// `y` given `x` and `d`, assuming zero feedthrough from `u`.
    fn oracle_output(&self, x: &[f64], d: &[f64]) -> Vec<f64>;
    fn next_state(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64>;
    fn performance_output(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64>;
}

fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

impl LinearBlock for ClosedAlgorithmModel {
    fn state_dim(&self) -> usize {
        self.n()
    }
    fn oracle_input_dim(&self) -> usize {
        self.p()
    }
    fn oracle_output_dim(&self) -> usize {
        self.m()
    }
    fn external_input_dim(&self) -> usize {
        0
    }
    fn performance_dim(&self) -> usize {
        0
    }
    fn feedthrough(&self) -> (&'static str, &Matrix) {
        ("D", &self.d)
    }
    fn oracle_output(&self, x: &[f64], _d: &[f64]) -> Vec<f64> {
        self.c.matvec(x)
    }
    fn next_state(&self, x: &[f64], u: &[f64], _d: &[f64]) -> Vec<f64> {
        let mut out = self.a.matvec(x);
        add_into(&mut out, &self.b.matvec(u));
        out
    }
    fn performance_output(&self, _x: &[f64], _u: &[f64], _d: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

impl LinearBlock for OpenAlgorithmModel {
    fn state_dim(&self) -> usize {
        self.n()
    }
    fn oracle_input_dim(&self) -> usize {
        self.p()
    }
    fn oracle_output_dim(&self) -> usize {
        self.m()
    }
    fn external_input_dim(&self) -> usize {
        self.r()
    }
    fn performance_dim(&self) -> usize {
        self.q()
    }
    fn feedthrough(&self) -> (&'static str, &Matrix) {
        ("D11", &self.d11)
    }
    fn oracle_output(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        let mut y = self.c1.matvec(x);
        add_into(&mut y, &self.d12.matvec(d));
        y
    }
    fn next_state(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = self.a.matvec(x);
        add_into(&mut out, &self.b1.matvec(u));
        add_into(&mut out, &self.b2.matvec(d));
        out
    }
    fn performance_output(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let mut z = self.c2.matvec(x);
        add_into(&mut z, &self.d21.matvec(u));
        add_into(&mut z, &self.d22.matvec(d));
        z
    }
}

fn nesterov_blocks(eta: f64, beta: f64, q: usize) -> Result<(Matrix, Matrix, Matrix)> {
    positive_dim("problem dimension q", q)?;
    if !eta.is_finite() || !beta.is_finite() {
        return Err(Error::NonFinite("Nesterov parameters".into()));
    }
    let id = Matrix::identity(q);
    let a = Matrix::from_rows(&[vec![1.0 + beta, -beta], vec![1.0, 0.0]])?.kron(&id);
    let b = Matrix::from_rows(&[vec![-eta], vec![0.0]])?.kron(&id);
    let c = Matrix::from_rows(&[vec![1.0 + beta, -beta]])?.kron(&id);
    Ok((a, b, c))
}

/// Nesterov's accelerated method on `R^q`: state `(x_k, x_{k-1})`,
/// gradient evaluated at `y = (1+β)x_k − βx_{k-1}`.
pub fn nesterov_model(eta: f64, beta: f64, q: usize) -> Result<ClosedAlgorithmModel> {
    let (a, b, c) = nesterov_blocks(eta, beta, q)?;
    ClosedAlgorithmModel::new(a, b, c, Matrix::zeros(q, q))
}

/// Gradient descent `x⁺ = x − η ∇c(x)` on `R^q`.
pub fn gradient_descent_model(eta: f64, q: usize) -> Result<ClosedAlgorithmModel> {
    positive_dim("problem dimension q", q)?;
    if !eta.is_finite() {
        return Err(Error::NonFinite("step size".into()));
    }
    ClosedAlgorithmModel::new(
        Matrix::identity(q),
        Matrix::scaled_identity(q, -eta),
        Matrix::identity(q),
        Matrix::zeros(q, q),
    )
}

/// Gradient descent with additive gradient noise `d` and performance output
/// `z = x`.
pub fn open_gradient_noise_model(eta: f64, q: usize) -> Result<OpenAlgorithmModel> {
    let closed = gradient_descent_model(eta, q)?;
    OpenAlgorithmModel::new(
        closed.a.clone(),
        closed.b.clone(),
        closed.b.clone(),
        closed.c.clone(),
        Matrix::zeros(q, q),
        Matrix::zeros(q, q),
        closed.c.clone(),
        Matrix::zeros(q, q),
        Matrix::zeros(q, q),
    )
}

/// Nesterov's method with the gradient corrupted additively,
/// `ū = d + ∇c(y)`. The performance output is `z = y`.
pub fn open_nesterov_gradient_noise(eta: f64, beta: f64, q: usize) -> Result<OpenAlgorithmModel> {
    let (a, b, c) = nesterov_blocks(eta, beta, q)?;
    OpenAlgorithmModel::new(
        a,
        b.clone(),
        b,
        c.clone(),
        Matrix::zeros(q, q),
        Matrix::zeros(q, q),
        c,
        Matrix::zeros(q, q),
        Matrix::zeros(q, q),
    )
}

/// Nesterov's method with the gradient evaluated at a perturbed point,
/// `u = ∇c(ȳ + d)`: `y = Cξ + d`, `z = Cξ`.
pub fn open_nesterov_measurement_noise(eta: f64, beta: f64, q: usize) -> Result<OpenAlgorithmModel> {
    let (a, b, c) = nesterov_blocks(eta, beta, q)?;
    OpenAlgorithmModel::new(
        a,
        b,
        Matrix::zeros(2 * q, q),
        c.clone(),
        Matrix::zeros(q, q),
        Matrix::identity(q),
        c,
        Matrix::zeros(q, q),
        Matrix::zeros(q, q),
    )
}

/// Momentum parameter `(√κ − 1)/(√κ + 1)` for condition number `κ`.
pub fn nesterov_standard_beta(condition: f64) -> f64 {
    let s = condition.sqrt();
    (s - 1.0) / (s + 1.0)
}
