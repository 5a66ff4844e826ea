//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p dissip-core --test acceptance -- --nocapture` to
//! see the lines on success.

use std::cell::RefCell;
use std::time::Instant;

use dissip_core::certify::*;
use dissip_core::lmi::*;
use dissip_core::matrix::{norm_sq, Matrix, SymMatrix};
use dissip_core::models::*;
use dissip_core::simulate::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = DEFAULT_SEARCH_TOL;

thread_local! {
    /// Every certificate produced by criteria 1–7, with the family it claims.
    static ISSUED: RefCell<Vec<(String, AffineMatrixFamily, Certificate)>> = const { RefCell::new(Vec::new()) };
}

fn keep(label: &str, family: AffineMatrixFamily, cert: &Certificate) {
    ISSUED.with(|v| v.borrow_mut().push((label.to_string(), family, cert.clone())));
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn sector(q: usize) -> Vec<OracleBound> {
    vec![sector_bound(1.0, 10.0, q).unwrap()]
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let mut worst = f64::INFINITY;
    for i in 1..=19 {
        for j in 1..=19 {
            let (k, eta) = (i as f64 / 10.0, j as f64 / 10.0);
            let m = Matrix::from_rows(&[vec![-1.0, 1.0], vec![eta * k, 1.0 - eta]]).unwrap();
            let rho = spectral_radius(&m).map_err(|e| e.to_string())?;
            ensure(rho > 1.0, || format!("K={k}, eta={eta}: rho={rho}"))?;
            worst = worst.min(rho);
        }
    }
    let stable = Matrix::from_rows(&[vec![-1.0, 1.0], vec![3.0 * -0.5, 1.0 + 0.5]]).unwrap();
    let rho = spectral_radius(&stable).map_err(|e| e.to_string())?;
    ensure((rho - 0.5).abs() <= 1e-9, || format!("(K,eta)=(3,-0.5): rho={rho}"))?;
    Ok(format!("min rho over grid {worst:.6} > 1; rho(3,-0.5) = {rho:.12}"))
}

fn criterion_2() -> Outcome {
    let model = gradient_descent_model(2.0 / 11.0, 1).unwrap();
    let exact = (9.0f64 / 11.0).powi(2);
    let r = certify_rate(&model, &sector(1), TOL, &opts()).map_err(|e| e.to_string())?;
    let Verdict::Exponential { gamma } = r.verdict else {
        return Err(format!("verdict {:?}", r.verdict));
    };
    ensure((gamma - exact).abs() <= 1e-4, || format!("gamma* = {gamma}"))?;
    keep("gd rate", closed_lmi(&model, &sector(1), gamma).unwrap(), r.certificate.as_ref().unwrap());
    let family = closed_lmi(&model, &sector(1), exact).unwrap();
    let values: Vec<f64> = family
        .vars()
        .iter()
        .map(|v| if v.kind == VarKind::Multiplier { 2.0 / 121.0 } else { 1.0 })
        .collect();
    let residual = family.evaluate(&values).as_matrix().max_abs();
    ensure(residual <= 1e-12, || format!("analytic certificate residual {residual}"))?;
    Ok(format!("gamma* = {gamma:.8} (exact {exact:.8}); residual at P=1, alpha=2/121: {residual:.1e}"))
}

/// `R diag(λ) Rᵀ` with `λ` in `[1, 10]` (endpoints included on the first
/// two draws) and a random rotation `R`.
fn random_quadratic(rng: &mut ChaCha8Rng, q: usize, idx: usize) -> ExecutableOracle {
    let lambdas: Vec<f64> = (0..q)
        .map(|i| match (idx, i) {
            (0, _) => 1.0,
            (1, _) => 10.0,
            (2, 0) => 1.0,
            (2, _) => 10.0,
            _ => rng.gen_range(1.0..=10.0),
        })
        .collect();
    let q_mat = if q == 1 {
        Matrix::scalar(lambdas[0])
    } else {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let r = Matrix::from_rows(&[vec![theta.cos(), -theta.sin()], vec![theta.sin(), theta.cos()]]).unwrap();
        &(&r * &Matrix::from_diag(&lambdas)) * &r.transpose()
    };
    let b: Vec<f64> = (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ExecutableOracle::quadratic_gradient(SymMatrix::new(q_mat).unwrap(), b, Some((1.0, 10.0))).unwrap()
}

fn criterion_3() -> Outcome {
    let beta = nesterov_standard_beta(10.0);
    let cases = [
        ("GD eta=2/11", gradient_descent_model(2.0 / 11.0, 2).unwrap()),
        ("GD eta=1/L", gradient_descent_model(0.1, 2).unwrap()),
        ("Nesterov", nesterov_model(0.1, beta, 2).unwrap()),
    ];
    let mut lines = Vec::new();
    for (name, model) in &cases {
        let bounds = sector(2);
        let r = certify_rate(model, &bounds, TOL, &opts()).map_err(|e| e.to_string())?;
        let Verdict::Exponential { gamma } = r.verdict else {
            return Err(format!("{name}: verdict {:?}", r.verdict));
        };
        let cert = r.certificate.unwrap();
        keep(name, closed_lmi(model, &bounds, gamma).unwrap(), &cert);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0_f64;
        for trial in 0..100 {
            let oracle = random_quadratic(&mut rng, 2, trial);
            let ratio = empirical_contraction(model, &oracle, &cert.p, 1, 200, trial as u64).map_err(|e| e.to_string())?;
            worst = worst.max(ratio);
        }
        ensure(worst <= gamma + 1e-6, || format!("{name}: empirical {worst} > gamma* {gamma}"))?;
        lines.push(format!("{name}: empirical {worst:.6} <= gamma* {gamma:.6}"));
    }
    Ok(lines.join("; "))
}

fn criterion_4() -> Outcome {
    let model = open_gradient_noise_model(2.0 / 11.0, 1).unwrap();
    let r = certify_gain(&model, &sector(1), TOL, &opts()).map_err(|e| e.to_string())?;
    let Verdict::Gain { mu } = r.verdict else {
        return Err(format!("verdict {:?}", r.verdict));
    };
    ensure(mu >= 1.0 - 1e-4, || format!("mu* = {mu}"))?;
    let cert = r.certificate.unwrap();
    keep("gd gain", open_gain_lmi(&model, &sector(1), mu).unwrap(), &cert);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_gain = 0.0_f64;
    let mut worst_violation = f64::NEG_INFINITY;
    for (idx, s) in [1.0, 10.0, 5.5].into_iter().chain((0..5).map(|_| rng.gen_range(1.0..=10.0))).enumerate() {
        let oracle = ExecutableOracle::quadratic_gradient(SymMatrix::from_diag(&[s]).unwrap(), vec![0.5], Some((1.0, 10.0))).unwrap();
        let seed = 100 * idx as u64;
        let g = empirical_gain(&model, &oracle, 50, 500, seed).map_err(|e| e.to_string())?;
        worst_gain = worst_gain.max(g);
        for random_start in [false, true] {
            let v = summed_gain_violation(&model, &oracle, &cert.p, mu, 50, 500, seed, random_start).map_err(|e| e.to_string())?;
            worst_violation = worst_violation.max(v);
        }
    }
    ensure(worst_gain <= mu + 1e-6, || format!("empirical gain {worst_gain} > mu* {mu}"))?;
    ensure(worst_violation <= 1e-9, || format!("summed inequality violated by {worst_violation}"))?;
    Ok(format!(
        "mu* = {mu:.6}; empirical gain {worst_gain:.6}; worst summed-inequality slack {worst_violation:.3e}"
    ))
}

fn criterion_5() -> Outcome {
    let fne = firmly_nonexpansive_bound(3).unwrap();
    let st = ExecutableOracle::soft_threshold(0.8, 3).unwrap();
    let bx = ExecutableOracle::box_projection(vec![-1.0, 0.0, -0.5], vec![1.0, 3.0, 0.5]).unwrap();
    let a = check_oracle_bound(&st, &fne, 1000, 5).map_err(|e| e.to_string())?;
    let b = check_oracle_bound(&bx, &fne, 1000, 6).map_err(|e| e.to_string())?;
    ensure(a.passed && a.worst <= 1e-10, || format!("soft threshold worst {}", a.worst))?;
    ensure(b.passed && b.worst <= 1e-10, || format!("box projection worst {}", b.worst))?;
    let q = SymMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 5.0]]).unwrap();
    let eig = q.eig();
    let (lo, hi) = (eig.values[0], eig.values[1]);
    let qg = ExecutableOracle::quadratic_gradient(q, vec![1.0, -2.0], None).unwrap();
    let fit = check_oracle_bound(&qg, &sector_bound(lo, hi, 2).unwrap(), 1000, 7).map_err(|e| e.to_string())?;
    ensure(fit.passed, || format!("sector [{lo}, {hi}] worst {}", fit.worst))?;
    let tight = check_oracle_bound(&qg, &sector_bound(lo + 0.2, hi, 2).unwrap(), 1000, 7).map_err(|e| e.to_string())?;
    ensure(!tight.passed && tight.worst > 0.0 && tight.witness.is_some(), || "tighter sector not refuted".into())?;
    Ok(format!(
        "soft threshold {:.1e}, box {:.1e}, sector fit {:.1e}, tighter sector witness {:.3}",
        a.worst, b.worst, fit.worst, tight.worst
    ))
}

fn random_open(rng: &mut ChaCha8Rng) -> OpenAlgorithmModel {
    let mut mat = |r: usize, c: usize, s: f64| {
        let data: Vec<f64> = (0..r * c).map(|_| s * rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_row_slice(r, c, &data).unwrap()
    };
    let (n, m, r, q) = (2, 1, 1, 1);
    OpenAlgorithmModel::new(
        mat(n, n, 0.6),
        mat(n, m, 0.5),
        mat(n, r, 0.5),
        mat(m, n, 1.0),
        mat(m, m, 0.3),
        mat(m, r, 0.3),
        mat(q, n, 0.5),
        mat(q, m, 0.5),
        mat(q, r, 0.5),
    )
    .unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    let mut certified = 0;
    for i in 0..10 {
        let model = random_open(&mut rng);
        let mu_bar = rng.gen_range(0.2..2.0);
        let bounds = vec![sector_bound(0.5, 2.0, 1).unwrap()];
        let plant = PlantSupply::incremental_gain(mu_bar, 1, 1).unwrap();
        let a = closed_loop_lmi(&model, &bounds, &plant).map_err(|e| e.to_string())?;
        let b = open_gain_lmi(&model, &bounds, 1.0 / mu_bar).map_err(|e| e.to_string())?;
        worst = worst.max((a.constant().as_matrix() - b.constant().as_matrix()).max_abs());
        for (ca, cb) in a.coeffs().iter().zip(b.coeffs()) {
            worst = worst.max((ca.as_matrix() - cb.as_matrix()).max_abs());
        }
        let loop_report = certify_closed_loop(&model, &bounds, &plant, &opts()).map_err(|e| e.to_string())?;
        let gain = solve_feasibility(&b, 0.0, &opts()).map_err(|e| e.to_string())?;
        ensure(loop_report.verdict.is_certified() == gain.is_found(), || format!("model {i}: verdicts differ"))?;
        if let Some(c) = &loop_report.certificate {
            keep("small gain", a, c);
            certified += 1;
        }
    }
    ensure(worst <= 1e-12, || format!("entrywise difference {worst}"))?;
    Ok(format!("max entrywise difference {worst:.1e}; verdicts agree ({certified}/10 certified)"))
}

fn criterion_7() -> Outcome {
    let eta = 0.5;
    let s = Matrix::scalar;
    let model = OpenAlgorithmModel::new(s(1.0), s(-eta), s(0.0), s(1.0), s(0.0), s(0.0), s(1.0), s(0.0), s(0.0)).unwrap();
    let psi = vec![affine_equality_bound(&s(1.0), &s(-1.0)).unwrap()];
    let oracle = ExecutableOracle::affine(s(1.0), s(-1.0)).unwrap();
    let plant = LinearPlant::new(s(0.5), s(0.1), s(1.0), s(0.0)).unwrap();
    let supply = PlantSupply::incremental_gain(0.21, 1, 1).unwrap();

    let r = certify_closed_loop(&model, &psi, &supply, &opts()).map_err(|e| e.to_string())?;
    ensure(r.verdict == Verdict::ClosedLoopNonexpansive, || format!("verdict {:?}", r.verdict))?;
    let cert = r.certificate.unwrap();
    keep("closed loop", closed_loop_lmi(&model, &psi, &supply).unwrap(), &cert);
    let plant_family = plant_storage_lmi(&plant, &supply).unwrap();
    let plant_cert = solve_feasibility(&plant_family, 0.0, &opts())
        .map_err(|e| e.to_string())?
        .into_certificate()
        .ok_or("no plant storage for the supply")?;
    keep("plant storage", plant_family, &plant_cert);
    let check = composite_storage_check(&plant, &plant_cert.p, &model, &cert.p, &oracle, 100, 200, 7).map_err(|e| e.to_string())?;
    ensure(check.passed && check.worst_increase <= 1e-9, || format!("composite increase {}", check.worst_increase))?;

    // Unstable feedback loop with K = 1, η = 1.
    let unstable_plant = LinearPlant::new(s(-1.0), s(1.0), s(1.0), s(0.0)).unwrap();
    let gd = OpenAlgorithmModel::new(s(1.0), s(-1.0), s(0.0), s(1.0), s(0.0), s(0.0), s(1.0), s(0.0), s(0.0)).unwrap();
    let feedback = ExecutableOracle::affine(s(1.0), s(-1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut least_growth = f64::INFINITY;
    for _ in 0..20 {
        let starts: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = interconnection_rollout(&unstable_plant, &gd, &feedback, &starts[0..1], &starts[1..2], 50).map_err(|e| e.to_string())?;
        let b = interconnection_rollout(&unstable_plant, &gd, &feedback, &starts[2..3], &starts[3..4], 50).map_err(|e| e.to_string())?;
        let size = |k: usize| {
            let dxi = a.plant_states[k][0] - b.plant_states[k][0];
            let dx = a.algorithm_states[k][0] - b.algorithm_states[k][0];
            (dxi * dxi + dx * dx).sqrt()
        };
        least_growth = least_growth.min(size(50) / size(0));
    }
    ensure(least_growth >= 10.0, || format!("feedback-loop increments grew only {least_growth}x"))?;
    let fail = composite_storage_check(&unstable_plant, &SymMatrix::identity(1), &gd, &SymMatrix::identity(1), &feedback, 20, 50, 0).map_err(|e| e.to_string())?;
    ensure(!fail.passed, || "quadratic storage accepted on the unstable loop".into())?;
    Ok(format!(
        "composite worst increase {:.2e} (P_p = {:.4}, P = {:.4}); feedback-loop increments grow >= {least_growth:.2e}x over 50 steps",
        check.worst_increase,
        plant_cert.p[(0, 0)],
        cert.p[(0, 0)]
    ))
}

fn criterion_8() -> Outcome {
    let issued = ISSUED.with(|v| v.borrow().clone());
    ensure(!issued.is_empty(), || "no certificates recorded".into())?;
    for (label, family, cert) in &issued {
        let m = cert.revalidate(family);
        ensure(m.lmi_min_eig >= -1e-8, || format!("{label}: min eig LMI {}", m.lmi_min_eig))?;
        ensure(m.p_min_eig >= 1e-8, || format!("{label}: min eig P {}", m.p_min_eig))?;
        ensure(cert.multipliers.iter().all(|a| a.value >= 0.0), || format!("{label}: negative multiplier"))?;
    }
    // Bracketing of both bisections.
    let model = gradient_descent_model(2.0 / 11.0, 1).unwrap();
    let g = bisect_gamma(&model, &sector(1), TOL, &opts()).map_err(|e| e.to_string())?;
    let gamma = g.value().ok_or("gamma search failed")?;
    let feasible = |f: AffineMatrixFamily| solve_feasibility(&f, 0.0, &opts()).map(|r| r.is_found()).unwrap_or(false);
    ensure(feasible(closed_lmi(&model, &sector(1), (gamma + TOL).min(1.0)).unwrap()), || "gamma*+tol infeasible".into())?;
    ensure(!feasible(closed_lmi(&model, &sector(1), gamma - TOL).unwrap()), || "gamma*-tol feasible".into())?;
    let noise = open_gradient_noise_model(2.0 / 11.0, 1).unwrap();
    let m = bisect_mu(&noise, &sector(1), TOL, &opts()).map_err(|e| e.to_string())?;
    let mu = m.value().ok_or("mu search failed")?;
    ensure(feasible(open_gain_lmi(&noise, &sector(1), mu + TOL).unwrap()), || "mu*+tol infeasible".into())?;
    ensure(!feasible(open_gain_lmi(&noise, &sector(1), mu - TOL).unwrap()), || "mu*-tol feasible".into())?;
    Ok(format!(
        "{} certificates re-validated; gamma* = {gamma:.7} and mu* = {mu:.7} bracketed at ±{TOL:.0e}",
        issued.len()
    ))
}

fn criterion_9() -> Outcome {
    let model = open_gradient_noise_model(2.0 / 11.0, 1).unwrap();
    let r = certify_rate(&model.closed_part(), &sector(1), TOL, &opts()).map_err(|e| e.to_string())?;
    ensure(matches!(r.verdict, Verdict::Exponential { gamma } if gamma < 1.0), || format!("verdict {:?}", r.verdict))?;
    let oracle = ExecutableOracle::quadratic_gradient(SymMatrix::from_diag(&[4.0]).unwrap(), vec![0.0], Some((1.0, 10.0))).unwrap();
    let k = 300;
    let d = vec![vec![1.0]; k];
    let a = rollout(&model, &oracle, &[2.0], Some(&d), k).map_err(|e| e.to_string())?;
    let b = rollout(&model, &oracle, &[-3.0], Some(&d), k).map_err(|e| e.to_string())?;
    let gap = norm_sq(&[a.states[k][0] - b.states[k][0]]).sqrt();
    ensure(gap <= 1e-8, || format!("||dx_K|| = {gap}"))?;
    let rest = affine_fixed_point(&model, &oracle, &[0.0]).map_err(|e| e.to_string())?;
    let shift = (a.states[k][0] - rest[0]).abs();
    ensure(shift > 1e-3, || format!("fixed point moved only {shift}"))?;
    Ok(format!("||dx_K|| = {gap:.1e}; limit {:.6} vs d=0 fixed point {:.6}", a.states[k][0], rest[0]))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("feedback loop instability grid", criterion_1),
        ("tight gradient-descent rate", criterion_2),
        ("soundness of rate certificates", criterion_3),
        ("incremental small gain", criterion_4),
        ("oracle property suite", criterion_5),
        ("small-gain coincidence", criterion_6),
        ("closed-loop composite storage", criterion_7),
        ("certificate hygiene", criterion_8),
        ("constant-disturbance fixed point", criterion_9),
    ];
    let start = Instant::now();
    let mut failures = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                println!("FAIL [{}] {name} ({secs:.2}s): {why}", i + 1);
                failures.push(i + 1);
            }
        }
    }
    println!("acceptance finished in {:.2}s", start.elapsed().as_secs_f64());
    if !failures.is_empty() {
        eprintln!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
