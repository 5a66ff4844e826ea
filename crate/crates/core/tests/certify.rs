use dissip_core::certify::*;
use dissip_core::lmi::{SolverOptions, DEFAULT_SEARCH_TOL};
use dissip_core::matrix::{norm_sq, Matrix, SymMatrix};
use dissip_core::models::*;
use dissip_core::simulate::*;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn sector() -> Vec<OracleBound> {
    vec![sector_bound(1.0, 10.0, 1).unwrap()]
}

fn gd(eta: f64) -> ClosedAlgorithmModel {
    gradient_descent_model(eta, 1).unwrap()
}

fn quadratic(lo: f64, hi: f64) -> ExecutableOracle {
    ExecutableOracle::quadratic_gradient(SymMatrix::from_diag(&[lo, hi]).unwrap(), vec![0.3, -0.2], Some((1.0, 10.0))).unwrap()
}

#[test]
fn nonexpansive_examples() {
    let r = certify_nonexpansive(&gd(2.0 / 11.0), &sector(), &opts()).unwrap();
    assert_eq!(r.verdict, Verdict::Nonexpansive);
    assert!(r.overshoot.is_some() && r.certificate.is_some());

    let r = certify_nonexpansive(&gd(0.25), &sector(), &opts()).unwrap();
    assert_eq!(r.verdict, Verdict::NotCertified);
    assert!(r.overshoot.is_none() && r.certificate.is_none());
    assert!(r.diagnostics.lmi_min_eig.unwrap() < 0.0);

    let stable = ClosedAlgorithmModel::new(Matrix::scalar(0.5), Matrix::scalar(0.0), Matrix::scalar(0.0), Matrix::scalar(0.0)).unwrap();
    assert_eq!(certify_nonexpansive(&stable, &[], &opts()).unwrap().verdict, Verdict::Nonexpansive);
}

#[test]
fn rate_examples() {
    let r = certify_rate(&gd(2.0 / 11.0), &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    let Verdict::Exponential { gamma } = r.verdict else { panic!("{:?}", r.verdict) };
    assert!((gamma - 0.669421).abs() < 1e-5);
    let over = r.overshoot.unwrap();
    assert!((over.kappa - 1.0).abs() < 1e-12);
    assert_eq!(over.gamma, gamma);
    assert!(!r.diagnostics.trace.is_empty());

    let ne = nesterov_model(0.1, nesterov_standard_beta(10.0), 1).unwrap();
    let r = certify_rate(&ne, &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    assert!(matches!(r.verdict, Verdict::Exponential { gamma } if gamma < 1.0));

    let r = certify_rate(&gd(0.25), &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    assert_eq!(r.verdict, Verdict::NotCertified);
}

#[test]
fn margin_examples() {
    let r = certify_margin(&gd(2.0 / 11.0), &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    let Verdict::Contracting { rho } = r.verdict else { panic!("{:?}", r.verdict) };
    assert!(rho > 0.0);
    assert!(r.overshoot.unwrap().gamma < 1.0);

    let dead = ClosedAlgorithmModel::new(Matrix::scalar(0.0), Matrix::scalar(0.0), Matrix::scalar(0.0), Matrix::scalar(0.0)).unwrap();
    assert_eq!(certify_margin(&dead, &[], DEFAULT_SEARCH_TOL, &opts()).unwrap().verdict, Verdict::NotCertified);
    let expanding = ClosedAlgorithmModel::new(Matrix::scalar(1.5), Matrix::scalar(0.0), Matrix::scalar(0.0), Matrix::scalar(0.0)).unwrap();
    assert_eq!(certify_margin(&expanding, &[], DEFAULT_SEARCH_TOL, &opts()).unwrap().verdict, Verdict::NotCertified);
}

#[test]
fn gain_examples() {
    let silent = OpenAlgorithmModel::new(
        Matrix::scalar(1.0),
        Matrix::scalar(-0.1),
        Matrix::scalar(0.0),
        Matrix::scalar(1.0),
        Matrix::scalar(0.0),
        Matrix::scalar(0.0),
        Matrix::scalar(0.0),
        Matrix::scalar(0.0),
        Matrix::scalar(0.0),
    )
    .unwrap();
    let r = certify_gain(&silent, &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    assert_eq!(r.verdict, Verdict::Gain { mu: 0.0 });

    let noise = open_gradient_noise_model(2.0 / 11.0, 1).unwrap();
    let r = certify_gain(&noise, &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    assert!(matches!(r.verdict, Verdict::Gain { mu } if mu >= 1.0 - 1e-6));
    assert!(r.conclusion.contains("Σ‖Δz_k‖²"));

    let meas = open_nesterov_measurement_noise(0.1, nesterov_standard_beta(10.0), 1).unwrap();
    let r = certify_gain(&meas, &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    let Verdict::Gain { mu } = r.verdict else { panic!("{:?}", r.verdict) };
    assert!((mu - 19.2268).abs() < 1e-3, "{mu}");
}

fn loop_algorithm(eta: f64) -> OpenAlgorithmModel {
    let s = Matrix::scalar;
    OpenAlgorithmModel::new(s(1.0), s(-eta), s(0.0), s(1.0), s(0.0), s(0.0), s(1.0), s(0.0), s(0.0)).unwrap()
}

#[test]
fn closed_loop_examples() {
    let psi = vec![affine_equality_bound(&Matrix::scalar(1.0), &Matrix::scalar(-1.0)).unwrap()];
    let plant = PlantSupply::incremental_gain(0.21, 1, 1).unwrap();
    let r = certify_closed_loop(&loop_algorithm(0.5), &psi, &plant, &opts()).unwrap();
    assert_eq!(r.verdict, Verdict::ClosedLoopNonexpansive);
    assert!(r.diagnostics.notes.iter().any(|n| n.contains("V_c = V_p + V")));

    // Gain-shaped plant supply and d-independent bounds: same verdict as the gain test.
    let noise = open_gradient_noise_model(2.0 / 11.0, 1).unwrap();
    for mu_bar in [0.5, 0.99, 1.05, 2.0] {
        let plant = PlantSupply::incremental_gain(mu_bar, 1, 1).unwrap();
        let a = certify_closed_loop(&noise, &sector(), &plant, &opts()).unwrap();
        let family = dissip_core::lmi::open_gain_lmi(&noise, &sector(), 1.0 / mu_bar).unwrap();
        let b = dissip_core::lmi::solve_feasibility(&family, 0.0, &opts()).unwrap();
        assert_eq!(a.verdict.is_certified(), b.is_found(), "mu_bar = {mu_bar}");
    }

    let zero = PlantSupply::new(SymMatrix::zeros(2), 1, 1).unwrap();
    let expanding = OpenAlgorithmModel::new(
        Matrix::scalar(1.2),
        Matrix::scalar(0.0),
        Matrix::scalar(0.1),
        Matrix::scalar(1.0),
        Matrix::scalar(0.0),
        Matrix::scalar(0.0),
        Matrix::scalar(1.0),
        Matrix::scalar(0.0),
        Matrix::scalar(0.0),
    )
    .unwrap();
    assert_eq!(certify_closed_loop(&expanding, &sector(), &zero, &opts()).unwrap().verdict, Verdict::NotCertified);
}

#[test]
fn nested_sectors_never_improve_the_rate() {
    let model = gd(0.15);
    let mut last = 0.0;
    for (mu, l) in [(2.0, 6.0), (1.5, 8.0), (1.0, 10.0)] {
        let r = certify_rate(&model, &[sector_bound(mu, l, 1).unwrap()], DEFAULT_SEARCH_TOL, &opts()).unwrap();
        let Verdict::Exponential { gamma } = r.verdict else { panic!() };
        assert!(gamma >= last - 1e-6, "{gamma} < {last}");
        last = gamma;
    }
}

#[test]
fn rate_certificates_are_sound_in_simulation() {
    let models = [gd(0.1), nesterov_model(0.1, nesterov_standard_beta(10.0), 2).unwrap()];
    for model in &models {
        let q = model.p();
        let bound = sector_bound(1.0, 10.0, q).unwrap();
        let r = certify_rate(model, &[bound], DEFAULT_SEARCH_TOL, &opts()).unwrap();
        let Verdict::Exponential { gamma } = r.verdict else { panic!() };
        let cert = r.certificate.unwrap();
        let oracle = if q == 1 { ExecutableOracle::linear(7.0, 1).unwrap() } else { quadratic(1.0, 10.0) };
        let pairs = random_pairs(model, &oracle, 30, 200, 0).unwrap();
        assert!(worst_ratio(&pairs, &cert.p) <= gamma + 1e-6);
        let over = r.overshoot.unwrap();
        for pair in &pairs {
            let base = norm_sq(&pair.dx(0));
            for k in 0..=pair.horizon() {
                assert!(norm_sq(&pair.dx(k)) <= over.bound(k, base) * (1.0 + 1e-6) + 1e-300);
            }
        }
    }
}

#[test]
fn gain_certificates_are_sound_in_simulation() {
    let noise = open_gradient_noise_model(2.0 / 11.0, 1).unwrap();
    let r = certify_gain(&noise, &sector(), DEFAULT_SEARCH_TOL, &opts()).unwrap();
    let Verdict::Gain { mu } = r.verdict else { panic!() };
    let cert = r.certificate.unwrap();
    for s in [1.0, 5.5, 10.0] {
        let oracle = ExecutableOracle::linear(s, 1).unwrap();
        assert!(empirical_gain(&noise, &oracle, 20, 500, 0).unwrap() <= mu + 1e-6);
        for start in [false, true] {
            let v = summed_gain_violation(&noise, &oracle, &cert.p, mu, 20, 500, 0, start).unwrap();
            assert!(v <= 1e-9, "s = {s}: {v}");
        }
    }
}

#[test]
fn reports_serialize() {
    let r = certify_rate(&gd(2.0 / 11.0), &sector(), 1e-3, &opts()).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["verdict"]["kind"], "exponential");
    let back: AnalysisReport = serde_json::from_value(json).unwrap();
    assert_eq!(back, r);
}
