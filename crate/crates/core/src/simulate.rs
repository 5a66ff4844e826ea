//! Executable oracles, rollouts of algorithm models and plant loops, and the
//! empirical checks that cross-check certificates against simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::{norm_sq, Matrix, SymMatrix};
use crate::models::{LinearBlock, LinearPlant, OpenAlgorithmModel, OracleBound};

/// Storage values below this are left out of ratio statistics.
pub const RATIO_FLOOR: f64 = 1e-14;
/// Largest oracle-bound form value accepted as conforming.
pub const BOUND_TOL: f64 = 1e-10;
/// Largest per-step composite storage increase accepted.
pub const STORAGE_TOL: f64 = 1e-9;

/// A map `u = φ(y)` or `u = ψ(y, d)` that can be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExecutableOracle {
    /// `∇c(y) = Qy + b`, optionally declaring `spec(Q) ⊂ [window.0, window.1]`.
    QuadraticGradient {
        q: SymMatrix,
        b: Vec<f64>,
        #[serde(default)]
        window: Option<(f64, f64)>,
    },
    /// Proximal operator of `λ‖·‖₁`.
    SoftThreshold { lambda: f64, dim: usize },
    /// Euclidean projection onto the box `[lo, hi]`.
    BoxProjection { lo: Vec<f64>, hi: Vec<f64> },
    Linear { s: f64, dim: usize },
    /// `Ey + Gd`.
    Affine { e: Matrix, g: Matrix },
}

impl ExecutableOracle {
    pub fn quadratic_gradient(q: SymMatrix, b: Vec<f64>, window: Option<(f64, f64)>) -> Result<Self> {
        let o = ExecutableOracle::QuadraticGradient { q, b, window };
        o.validate()?;
        Ok(o)
    }

    pub fn soft_threshold(lambda: f64, dim: usize) -> Result<Self> {
        let o = ExecutableOracle::SoftThreshold { lambda, dim };
        o.validate()?;
        Ok(o)
    }

    pub fn box_projection(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let o = ExecutableOracle::BoxProjection { lo, hi };
        o.validate()?;
        Ok(o)
    }

    pub fn linear(s: f64, dim: usize) -> Result<Self> {
        let o = ExecutableOracle::Linear { s, dim };
        o.validate()?;
        Ok(o)
    }

    pub fn affine(e: Matrix, g: Matrix) -> Result<Self> {
        let o = ExecutableOracle::Affine { e, g };
        o.validate()?;
        Ok(o)
    }

    /// Checks the invariants of the variant; deserialized values should be
    /// validated before use.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExecutableOracle::QuadraticGradient { q, b, window } => {
                if b.len() != q.dim() {
                    return Err(shape_err("quadratic gradient b", q.dim(), b.len()));
                }
                if !b.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("quadratic gradient b".into()));
                }
                let eig = q.eig();
                let (lo, hi) = (eig.values[0], *eig.values.last().expect("dim >= 1"));
                if lo < -1e-12 {
                    return Err(Error::InvalidParameter(format!("Q must be PSD, smallest eigenvalue {lo}")));
                }
                if let Some((mu, l)) = *window {
                    let slack = 1e-12 * (1.0 + l.abs());
                    if !(mu <= l) || lo < mu - slack || hi > l + slack {
                        return Err(Error::InvalidParameter(format!(
                            "spectrum of Q [{lo}, {hi}] is not inside the window [{mu}, {l}]"
                        )));
                    }
                }
            }
            ExecutableOracle::SoftThreshold { lambda, dim } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(Error::InvalidParameter(format!("soft threshold needs λ >= 0, got {lambda}")));
                }
                positive(*dim)?;
            }
            ExecutableOracle::BoxProjection { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(shape_err("box projection hi", lo.len(), hi.len()));
                }
                positive(lo.len())?;
                if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] < hi[i])) {
                    return Err(Error::InvalidParameter(format!(
                        "box projection needs lo < hi, component {i} has [{}, {}]",
                        lo[i], hi[i]
                    )));
                }
            }
            ExecutableOracle::Linear { s, dim } => {
                if !s.is_finite() {
                    return Err(Error::NonFinite("linear oracle gain".into()));
                }
                positive(*dim)?;
            }
            ExecutableOracle::Affine { e, g } => {
                if g.rows() != e.rows() {
                    return Err(shape_err("affine oracle G rows", e.rows(), g.rows()));
                }
                if !e.is_finite() || !g.is_finite() {
                    return Err(Error::NonFinite("affine oracle".into()));
                }
                positive(e.rows())?;
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ExecutableOracle::QuadraticGradient { q, .. } => q.dim(),
            ExecutableOracle::SoftThreshold { dim, .. } | ExecutableOracle::Linear { dim, .. } => *dim,
            ExecutableOracle::BoxProjection { lo, .. } => lo.len(),
            ExecutableOracle::Affine { e, .. } => e.cols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ExecutableOracle::Affine { e, .. } => e.rows(),
            _ => self.input_dim(),
        }
    }

    /// Width of the `d` argument; zero unless the oracle depends on `d`.
    pub fn disturbance_dim(&self) -> usize {
        match self {
            ExecutableOracle::Affine { g, .. } => g.cols(),
            _ => 0,
        }
    }

    pub fn eval(&self, y: &[f64], d: Option<&[f64]>) -> Result<Vec<f64>> {
        if y.len() != self.input_dim() {
            return Err(shape_err("oracle input y", self.input_dim(), y.len()));
        }
        Ok(match self {
            ExecutableOracle::QuadraticGradient { q, b, .. } => {
                let mut u = q.as_matrix().matvec(y);
                for (ui, bi) in u.iter_mut().zip(b) {
                    *ui += bi;
                }
                u
            }
            ExecutableOracle::SoftThreshold { lambda, .. } => {
                y.iter().map(|v| v.signum() * (v.abs() - lambda).max(0.0)).collect()
            }
            ExecutableOracle::BoxProjection { lo, hi } => {
                y.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect()
            }
            ExecutableOracle::Linear { s, .. } => y.iter().map(|v| s * v).collect(),
            ExecutableOracle::Affine { e, g } => {
                let mut u = e.matvec(y);
                if g.cols() > 0 {
                    let d = d.ok_or_else(|| shape_err("affine oracle d", g.cols(), 0))?;
                    if d.len() != g.cols() {
                        return Err(shape_err("affine oracle d", g.cols(), d.len()));
                    }
                    for (ui, gi) in u.iter_mut().zip(g.matvec(d)) {
                        *ui += gi;
                    }
                }
                u
            }
        })
    }
}

fn positive(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("oracle dimension must be positive".into()));
    }
    Ok(())
}

/// Signals of one rollout: `states` has `K + 1` entries, the rest `K`.
/// `disturbances` and `performance` are empty vectors for closed models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub oracle_inputs: Vec<Vec<f64>>,
    pub oracle_outputs: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    pub performance: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.oracle_outputs.len()
    }

    /// Largest deviation of the recorded signals from the model equations.
    pub fn replay_error<M: LinearBlock>(&self, model: &M) -> f64 {
        let mut worst = 0.0_f64;
        let mut diff = |a: &[f64], b: &[f64]| {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        };
        for k in 0..self.horizon() {
            let (x, u, d) = (&self.states[k], &self.oracle_outputs[k], &self.disturbances[k]);
            diff(&model.oracle_output(x, d), &self.oracle_inputs[k]);
            diff(&model.next_state(x, u, d), &self.states[k + 1]);
            diff(&model.performance_output(x, u, d), &self.performance[k]);
        }
        worst
    }
}

fn check_rollout_dims<M: LinearBlock>(model: &M, oracle: &ExecutableOracle) -> Result<()> {
    let (name, feed) = model.feedthrough();
    if !feed.is_zero() {
        return Err(Error::AlgebraicLoop(name.into()));
    }
    if oracle.input_dim() != model.oracle_input_dim() {
        return Err(shape_err("oracle input (y) size", model.oracle_input_dim(), oracle.input_dim()));
    }
    if oracle.output_dim() != model.oracle_output_dim() {
        return Err(shape_err("oracle output (u) size", model.oracle_output_dim(), oracle.output_dim()));
    }
    let od = oracle.disturbance_dim();
    if od != 0 && od != model.external_input_dim() {
        return Err(shape_err("oracle disturbance size", model.external_input_dim(), od));
    }
    Ok(())
}

/// Iterates `y = C₁x + D₁₂d`, `u = ψ(y, d)`, `x⁺ = Ax + B₁u + B₂d`,
/// `z = C₂x + D₂₁u + D₂₂d` for `k` steps. A missing `d` signal is zero.
pub fn rollout<M: LinearBlock>(
    model: &M,
    oracle: &ExecutableOracle,
    x0: &[f64],
    d: Option<&[Vec<f64>]>,
    k: usize,
) -> Result<Trajectory> {
    check_rollout_dims(model, oracle)?;
    if x0.len() != model.state_dim() {
        return Err(shape_err("initial state", model.state_dim(), x0.len()));
    }
    let r = model.external_input_dim();
    if let Some(d) = d {
        if d.len() < k {
            return Err(shape_err("disturbance signal length", k, d.len()));
        }
        if let Some(bad) = d.iter().take(k).position(|dk| dk.len() != r) {
            return Err(shape_err(format!("disturbance d_{bad}"), r, d[bad].len()));
        }
    }
    let zero = vec![0.0; r];
    let mut traj = Trajectory {
        states: vec![x0.to_vec()],
        oracle_inputs: Vec::with_capacity(k),
        oracle_outputs: Vec::with_capacity(k),
        disturbances: Vec::with_capacity(k),
        performance: Vec::with_capacity(k),
    };
    for step in 0..k {
        let x = &traj.states[step];
        let dk = d.map_or(&zero, |d| &d[step]).clone();
        let y = model.oracle_output(x, &dk);
        let od = (oracle.disturbance_dim() > 0).then_some(dk.as_slice());
        let u = oracle.eval(&y, od)?;
        let next = model.next_state(x, &u, &dk);
        let z = model.performance_output(x, &u, &dk);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("state at step {}", step + 1)));
        }
        traj.oracle_inputs.push(y);
        traj.oracle_outputs.push(u);
        traj.disturbances.push(dk);
        traj.performance.push(z);
        traj.states.push(next);
    }
    Ok(traj)
}

/// Two rollouts of the same model and oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementalPair {
    pub first: Trajectory,
    pub second: Trajectory,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl IncrementalPair {
    pub fn dx(&self, k: usize) -> Vec<f64> {
        diff(&self.first.states[k], &self.second.states[k])
    }

    pub fn dz(&self, k: usize) -> Vec<f64> {
        diff(&self.first.performance[k], &self.second.performance[k])
    }

    pub fn dd(&self, k: usize) -> Vec<f64> {
        diff(&self.first.disturbances[k], &self.second.disturbances[k])
    }

    pub fn horizon(&self) -> usize {
        self.first.horizon()
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64))
}

/// Disturbance with i.i.d. standard normal entries on the first `k/2` steps
/// and zero afterwards.
fn finite_support_disturbance(rng: &mut ChaCha8Rng, r: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|step| if step < k / 2 { normal_vec(rng, r) } else { vec![0.0; r] })
        .collect()
}

/// `trials` pairs from independent standard normal initial states with
/// zero disturbance; trial `i` uses seed `seed + i`.
pub fn random_pairs<M: LinearBlock>(
    model: &M,
    oracle: &ExecutableOracle,
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<IncrementalPair>> {
    (0..trials)
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = model.state_dim();
            let (a, b) = (normal_vec(&mut rng, n), normal_vec(&mut rng, n));
            Ok(IncrementalPair {
                first: rollout(model, oracle, &a, None, k)?,
                second: rollout(model, oracle, &b, None, k)?,
            })
        })
        .collect()
}

/// Worst one-step ratio `V(Δx_(k+1)) / V(Δx_k)` over random pairs, or 0 if
/// no step has `V(Δx_k) ≥ RATIO_FLOOR`.
pub fn empirical_contraction<M: LinearBlock>(
    model: &M,
    oracle: &ExecutableOracle,
    v: &SymMatrix,
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<f64> {
    if v.dim() != model.state_dim() {
        return Err(shape_err("storage matrix", model.state_dim(), v.dim()));
    }
    let pairs = random_pairs(model, oracle, trials, k, seed)?;
    Ok(worst_ratio(&pairs, v))
}

/// Worst one-step storage ratio over the given pairs.
pub fn worst_ratio(pairs: &[IncrementalPair], v: &SymMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for pair in pairs {
        let mut prev = v.quad_form(&pair.dx(0));
        for step in 0..pair.horizon() {
            let next = v.quad_form(&pair.dx(step + 1));
            if prev >= RATIO_FLOOR {
                worst = worst.max(next / prev);
            }
            prev = next;
        }
    }
    worst
}

/// Pairs with equal random initial states and different finitely supported
/// random disturbances.
fn gain_pairs(model: &OpenAlgorithmModel, oracle: &ExecutableOracle, trials: usize, k: usize, seed: u64, same_start: bool) -> Result<Vec<IncrementalPair>> {
    if k == 0 {
        return Err(Error::InvalidParameter("gain experiments need a horizon K >= 1".into()));
    }
    (0..trials)
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = model.n();
            let x0 = normal_vec(&mut rng, n);
            let x1 = if same_start { x0.clone() } else { normal_vec(&mut rng, n) };
            let d0 = finite_support_disturbance(&mut rng, model.r(), k);
            let d1 = finite_support_disturbance(&mut rng, model.r(), k);
            Ok(IncrementalPair {
                first: rollout(model, oracle, &x0, Some(&d0), k)?,
                second: rollout(model, oracle, &x1, Some(&d1), k)?,
            })
        })
        .collect()
}

fn energies(pair: &IncrementalPair) -> (f64, f64) {
    (0..pair.horizon()).fold((0.0, 0.0), |(z, d), k| (z + norm_sq(&pair.dz(k)), d + norm_sq(&pair.dd(k))))
}

/// Worst `sqrt(Σ‖Δz‖² / Σ‖Δd‖²)` over random pairs with `Δx₀ = 0`.
pub fn empirical_gain(model: &OpenAlgorithmModel, oracle: &ExecutableOracle, trials: usize, k: usize, seed: u64) -> Result<f64> {
    let pairs = gain_pairs(model, oracle, trials, k, seed, true)?;
    Ok(pairs
        .iter()
        .map(energies)
        .filter(|&(_, d)| d > 0.0)
        .map(|(z, d)| (z / d).sqrt())
        .fold(0.0, f64::max))
}

/// Largest value of `Σ‖Δz‖² − V(Δx₀) − μ²Σ‖Δd‖²` over random pairs; a
/// certified gain makes this nonpositive. With `random_start` the two
/// initial states differ.
#[allow(clippy::too_many_arguments)]
pub fn summed_gain_violation(
    model: &OpenAlgorithmModel,
    oracle: &ExecutableOracle,
    storage: &SymMatrix,
    mu: f64,
    trials: usize,
    k: usize,
    seed: u64,
    random_start: bool,
) -> Result<f64> {
    if storage.dim() != model.n() {
        return Err(shape_err("storage matrix", model.n(), storage.dim()));
    }
    let pairs = gain_pairs(model, oracle, trials, k, seed, !random_start)?;
    Ok(pairs
        .iter()
        .map(|pair| {
            let (z, d) = energies(pair);
            z - storage.quad_form(&pair.dx(0)) - mu * mu * d
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Outcome of sampling an oracle against a quadratic bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub passed: bool,
    /// Largest form value seen; the bound requires it to be `<= 0`.
    pub worst: f64,
    /// The two `(y, d)` points that produced `worst`.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Samples `samples` random pairs `(y¹, y²)` (entries standard normal
/// scaled by 2, plus `d` when the bound has a `d` channel) and evaluates the
/// bound's form on the increments.
pub fn check_oracle_bound(oracle: &ExecutableOracle, bound: &OracleBound, samples: usize, seed: u64) -> Result<BoundCheck> {
    let (p, m, r) = (bound.y_dim(), bound.u_dim(), bound.d_dim());
    if p != oracle.input_dim() || m != oracle.output_dim() {
        return Err(shape_err(
            "bound partition vs oracle",
            format!("(y:{}, u:{})", oracle.input_dim(), oracle.output_dim()),
            format!("(y:{p}, u:{m})"),
        ));
    }
    let od = oracle.disturbance_dim();
    if od != 0 && od != r {
        return Err(shape_err("bound d channel vs oracle", od, r));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let width = r.max(od);
    for _ in 0..samples {
        let mut draw = |n: usize| -> Vec<f64> { normal_vec(&mut rng, n).into_iter().map(|v| 2.0 * v).collect() };
        let (y1, y2) = (draw(p), draw(p));
        let (d1, d2) = (draw(width), draw(width));
        let u1 = oracle.eval(&y1, (od > 0).then_some(d1.as_slice()))?;
        let u2 = oracle.eval(&y2, (od > 0).then_some(d2.as_slice()))?;
        let dd = diff(&d1, &d2);
        let value = bound.form(&diff(&y1, &y2), &diff(&u1, &u2), (r > 0).then_some(dd.as_slice()));
        if value > worst {
            worst = value;
            let pack = |y: &Vec<f64>, d: &Vec<f64>| y.iter().chain(d).copied().collect::<Vec<_>>();
            witness = Some((pack(&y1, &d1), pack(&y2, &d2)));
        }
    }
    Ok(BoundCheck {
        passed: worst <= BOUND_TOL,
        worst: worst.max(f64::MIN),
        witness,
    })
}

/// Number of normalized squarings in [`spectral_radius`].
const GELFAND_SQUARINGS: usize = 64;

/// Largest eigenvalue magnitude, from `ρ(A) = lim ‖A^k‖^(1/k)` evaluated
/// along `k = 2^j` with renormalization at every squaring.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(shape_err("spectral radius", "square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("spectral radius argument".into()));
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    // A^(2^j) = exp(log_scale) · b with ‖b‖_F = 1.
    let mut b = a.scale(1.0 / norm);
    let mut log_scale = norm.ln();
    let mut estimate = norm;
    for j in 1..=GELFAND_SQUARINGS {
        let sq = &b * &b;
        let s = sq.frobenius_norm();
        if s == 0.0 {
            return Ok(0.0);
        }
        log_scale = 2.0 * log_scale + s.ln();
        b = sq.scale(1.0 / s);
        estimate = (log_scale / 2f64.powi(j as i32)).exp();
    }
    Ok(estimate)
}

/// Jacobian of an affine map `f: R^n → R^n` by finite steps from 0.
fn affine_jacobian(n: usize, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Matrix> {
    let base = f(&vec![0.0; n])?;
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = f(&e)?;
        for i in 0..n {
            m[(i, j)] = col[i] - base[i];
        }
    }
    Ok(m)
}

/// State matrix of an algorithm closed by an affine oracle with `d = 0`.
pub fn loop_matrix<M: LinearBlock>(model: &M, oracle: &ExecutableOracle) -> Result<Matrix> {
    check_rollout_dims(model, oracle)?;
    let zero = vec![0.0; model.external_input_dim()];
    affine_jacobian(model.state_dim(), |x| {
        let y = model.oracle_output(x, &zero);
        let od = (oracle.disturbance_dim() > 0).then_some(zero.as_slice());
        let u = oracle.eval(&y, od)?;
        Ok(model.next_state(x, &u, &zero))
    })
}

/// State matrix of the plant loop `ζ = d`, `ν = z` in coordinates `(ξ, x)`
/// when the oracle is affine.
pub fn interconnection_matrix(plant: &LinearPlant, model: &OpenAlgorithmModel, oracle: &ExecutableOracle) -> Result<Matrix> {
    check_interconnection(plant, model, oracle)?;
    let np = plant.state_dim();
    affine_jacobian(np + model.n(), |s| {
        let (xi, x) = s.split_at(np);
        let (xi1, x1) = interconnection_step(plant, model, oracle, xi, x)?;
        Ok(xi1.into_iter().chain(x1).collect())
    })
}

fn check_interconnection(plant: &LinearPlant, model: &OpenAlgorithmModel, oracle: &ExecutableOracle) -> Result<()> {
    check_rollout_dims(model, oracle)?;
    if !plant.d().is_zero() {
        return Err(Error::AlgebraicLoop("plant D".into()));
    }
    if plant.output_dim() != model.r() {
        return Err(shape_err("plant output zeta vs algorithm d", model.r(), plant.output_dim()));
    }
    if plant.input_dim() != model.q() {
        return Err(shape_err("plant input nu vs algorithm z", model.q(), plant.input_dim()));
    }
    Ok(())
}

fn interconnection_step(
    plant: &LinearPlant,
    model: &OpenAlgorithmModel,
    oracle: &ExecutableOracle,
    xi: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = plant.c().matvec(xi);
    let y = model.oracle_output(x, &d);
    let od = (oracle.disturbance_dim() > 0).then_some(d.as_slice());
    let u = oracle.eval(&y, od)?;
    let z = model.performance_output(x, &u, &d);
    let mut xi_next = plant.a().matvec(xi);
    for (a, b) in xi_next.iter_mut().zip(plant.b().matvec(&z)) {
        *a += b;
    }
    Ok((xi_next, model.next_state(x, &u, &d)))
}

/// Plant and algorithm states of the interconnection, `K + 1` entries each.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopTrajectory {
    pub plant_states: Vec<Vec<f64>>,
    pub algorithm_states: Vec<Vec<f64>>,
}

pub fn interconnection_rollout(
    plant: &LinearPlant,
    model: &OpenAlgorithmModel,
    oracle: &ExecutableOracle,
    xi0: &[f64],
    x0: &[f64],
    k: usize,
) -> Result<LoopTrajectory> {
    check_interconnection(plant, model, oracle)?;
    if xi0.len() != plant.state_dim() {
        return Err(shape_err("initial plant state", plant.state_dim(), xi0.len()));
    }
    if x0.len() != model.n() {
        return Err(shape_err("initial algorithm state", model.n(), x0.len()));
    }
    let mut out = LoopTrajectory {
        plant_states: vec![xi0.to_vec()],
        algorithm_states: vec![x0.to_vec()],
    };
    for step in 0..k {
        let (xi, x) = interconnection_step(plant, model, oracle, &out.plant_states[step], &out.algorithm_states[step])?;
        if !xi.iter().chain(&x).all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("loop state at step {}", step + 1)));
        }
        out.plant_states.push(xi);
        out.algorithm_states.push(x);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeCheck {
    pub passed: bool,
    /// Largest `V_c(k+1) − V_c(k)` seen.
    pub worst_increase: f64,
    /// Largest `‖Δ(ξ, x)_K‖ / ‖Δ(ξ, x)_0‖` over the trials.
    pub worst_growth: f64,
}

/// Simulates random incremental pairs of the plant loop and checks that
/// `V_c = ΔξᵀP_pΔξ + ΔxᵀPΔx` never increases by more than `STORAGE_TOL`.
#[allow(clippy::too_many_arguments)]
pub fn composite_storage_check(
    plant: &LinearPlant,
    plant_storage: &SymMatrix,
    model: &OpenAlgorithmModel,
    storage: &SymMatrix,
    oracle: &ExecutableOracle,
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<CompositeCheck> {
    if plant_storage.dim() != plant.state_dim() {
        return Err(shape_err("plant storage", plant.state_dim(), plant_storage.dim()));
    }
    if storage.dim() != model.n() {
        return Err(shape_err("algorithm storage", model.n(), storage.dim()));
    }
    let mut worst_increase = f64::NEG_INFINITY;
    let mut worst_growth = 0.0_f64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let (np, n) = (plant.state_dim(), model.n());
        let a = interconnection_rollout(plant, model, oracle, &normal_vec(&mut rng, np), &normal_vec(&mut rng, n), k)?;
        let b = interconnection_rollout(plant, model, oracle, &normal_vec(&mut rng, np), &normal_vec(&mut rng, n), k)?;
        let vc = |step: usize| {
            plant_storage.quad_form(&diff(&a.plant_states[step], &b.plant_states[step]))
                + storage.quad_form(&diff(&a.algorithm_states[step], &b.algorithm_states[step]))
        };
        let size = |step: usize| {
            norm_sq(&diff(&a.plant_states[step], &b.plant_states[step]))
                + norm_sq(&diff(&a.algorithm_states[step], &b.algorithm_states[step]))
        };
        for step in 0..k {
            worst_increase = worst_increase.max(vc(step + 1) - vc(step));
        }
        if size(0) > 0.0 {
            worst_growth = worst_growth.max((size(k) / size(0)).sqrt());
        }
    }
    Ok(CompositeCheck {
        passed: worst_increase <= STORAGE_TOL,
        worst_increase: worst_increase.max(0.0),
        worst_growth,
    })
}

/// Fixed point of an algorithm closed by an affine oracle under constant
/// disturbance `d`, solving `x = Ax + B₁ψ(C₁x + D₁₂d, d) + B₂d`.
pub fn affine_fixed_point(model: &OpenAlgorithmModel, oracle: &ExecutableOracle, d: &[f64]) -> Result<Vec<f64>> {
    check_rollout_dims(model, oracle)?;
    if d.len() != model.r() {
        return Err(shape_err("constant disturbance", model.r(), d.len()));
    }
    let n = model.n();
    let step = |x: &[f64]| -> Result<Vec<f64>> {
        let y = model.oracle_output(x, d);
        let u = oracle.eval(&y, (oracle.disturbance_dim() > 0).then_some(d))?;
        Ok(model.next_state(x, &u, d))
    };
    let jac = affine_jacobian(n, step)?;
    let offset = step(&vec![0.0; n])?;
    let system = &Matrix::identity(n) - &jac;
    system
        .solve(&offset)
        .ok_or_else(|| Error::Numerical("fixed-point system I − A_cl is singular".into()))
}
