use dissip_core::certify::{
    certify_closed_loop, certify_gain, certify_margin, certify_nonexpansive, certify_rate, AnalysisReport, Verdict,
};
use dissip_core::lmi::{plant_storage_lmi, solve_feasibility, Certificate, SolverOptions};
use dissip_core::matrix::SymMatrix;
use dissip_core::simulate::{
    check_oracle_bound, composite_storage_check, empirical_contraction, empirical_gain, interconnection_matrix,
    loop_matrix, random_pairs, rollout, spectral_radius, summed_gain_violation, worst_ratio, ExecutableOracle,
    Trajectory, STORAGE_TOL,
};
use thiserror::Error;

use crate::config::{ConfigError, Mode, Plant, Problem, ProblemConfig, System};
use crate::report::{
    BoundCheckOut, CertificateOut, Certification, CrossCheck, MarginsOut, Report, RunOutput, Settings, Simulation,
    Status, SystemInfo,
};

/// Slack allowed between an empirical ratio or gain and its certified value.
pub const CROSS_CHECK_SLACK: f64 = 1e-6;
/// Random pairs drawn per oracle bound in `simulate`.
pub const BOUND_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] dissip_core::error::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Certify,
    Simulate,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }

    /// The command a config's mode implies.
    pub fn for_mode(mode: Mode) -> Command {
        match mode {
            Mode::Simulate => Command::Simulate,
            Mode::Sweep => Command::Sweep,
            _ => Command::Certify,
        }
    }
}

/// Command-line values that replace the config's analysis settings.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ProblemConfig) -> Result<(), ConfigError> {
        if let Some(seed) = self.seed {
            config.analysis.seed = seed;
        }
        if let Some(tol) = self.tol {
            config.analysis.tol = tol;
        }
        config.validate()
    }
}

pub(crate) fn settings(config: &ProblemConfig) -> Settings {
    let a = &config.analysis;
    Settings {
        tol: a.tol,
        seed: a.seed,
        horizon: a.horizon,
        trials: a.trials,
    }
}

pub(crate) fn system_info(system: &System) -> SystemInfo {
    match system {
        System::Closed(m) => SystemInfo {
            kind: "closed".into(),
            n: m.n(),
            m: m.m(),
            p: m.p(),
            r: None,
            q: None,
        },
        System::Open(m) => SystemInfo {
            kind: "open".into(),
            n: m.n(),
            m: m.m(),
            p: m.p(),
            r: Some(m.r()),
            q: Some(m.q()),
        },
    }
}

/// Runs `command` on a validated config.
pub fn run(config: &ProblemConfig, command: Command) -> Result<RunOutput, RunError> {
    match command {
        Command::Certify => {
            if !config.analysis.mode.is_certification() {
                return Err(RunError::Usage(format!(
                    "mode `{}` is not a certification; use the `{}` command",
                    config.analysis.mode.name(),
                    Command::for_mode(config.analysis.mode).name()
                )));
            }
            certify(config)
        }
        Command::Simulate => simulate(config),
        Command::Sweep => crate::sweep::sweep(config),
    }
}

fn analyze(problem: &Problem, mode: Mode, tol: f64, opts: &SolverOptions) -> Result<AnalysisReport, RunError> {
    let closed = || problem.system.closed_model();
    let open = || match &problem.system {
        System::Open(m) => Ok(m),
        System::Closed(_) => Err(RunError::Usage(format!("mode `{}` requires an open system", mode.name()))),
    };
    Ok(match mode {
        Mode::Nonexpansive => certify_nonexpansive(&closed(), &problem.bounds, opts)?,
        Mode::Rate => certify_rate(&closed(), &problem.bounds, tol, opts)?,
        Mode::Margin => certify_margin(&closed(), &problem.bounds, tol, opts)?,
        Mode::Gain => certify_gain(open()?, &problem.bounds, tol, opts)?,
        Mode::ClosedLoop => {
            let supply = problem
                .plant
                .as_ref()
                .and_then(|p| p.supply.as_ref())
                .ok_or_else(|| RunError::Usage("mode `closed-loop` requires `plant.supply`".into()))?;
            certify_closed_loop(open()?, &problem.bounds, supply, opts)?
        }
        Mode::Simulate | Mode::Sweep => unreachable!("not a certification mode"),
    })
}

pub(crate) fn solver_options(config: &ProblemConfig) -> SolverOptions {
    SolverOptions {
        seed: config.analysis.seed,
        ..SolverOptions::default()
    }
}

/// Runs a certification and reduces it to its headline scalar, if any.
pub(crate) fn certified_value(problem: &Problem, mode: Mode, tol: f64, opts: &SolverOptions) -> Result<Option<f64>, RunError> {
    let r = analyze(problem, mode, tol, opts)?;
    Ok(match r.verdict {
        Verdict::Exponential { gamma } => Some(gamma),
        Verdict::Contracting { rho } => Some(rho),
        Verdict::Gain { mu } => Some(mu),
        Verdict::Nonexpansive | Verdict::ClosedLoopNonexpansive => Some(1.0),
        Verdict::NotCertified => None,
    })
}

fn certify(config: &ProblemConfig) -> Result<RunOutput, RunError> {
    let problem = config.build()?;
    let a = &config.analysis;
    let r = analyze(&problem, a.mode, a.tol, &solver_options(config))?;
    let mut notes = Vec::new();
    let cross_checks = match (&r.certificate, &problem.oracle) {
        (Some(cert), Some(oracle)) => cross_check(config, &problem, &r, cert, oracle, &mut notes)?,
        _ => Vec::new(),
    };
    let certified = r.verdict.is_certified();
    let status = if certified && cross_checks.iter().all(|c| c.passed) {
        Status::Certified
    } else {
        Status::NotCertified
    };
    if certified && status == Status::NotCertified {
        notes.push("an empirical cross-check contradicts the certificate".into());
    }
    let certificate = r.certificate.as_ref().map(|c| CertificateOut {
        p: c.p.as_matrix().to_rows(),
        multipliers: c.multipliers.clone(),
        margins: MarginsOut {
            lmi_min_eig: c.lmi_min_eig,
            p_min_eig: c.p_min_eig,
            p_max_eig: c.p_max_eig,
        },
        kappa: c.kappa,
    });
    let trace = r.diagnostics.trace.clone();
    let report = Report {
        command: Command::Certify.name().into(),
        mode: a.mode.name().into(),
        status,
        exit_code: status.exit_code(),
        settings: settings(config),
        system: system_info(&problem.system),
        certification: Some(Certification {
            verdict: r.verdict,
            certified,
            scalar: r.certificate.as_ref().and_then(|c| c.scalar),
            certificate,
            overshoot: r.overshoot,
            diagnostics: r.diagnostics,
            conclusion: r.conclusion,
            cross_checks,
            notes,
        }),
        simulation: None,
        sweep: None,
    };
    Ok(RunOutput {
        report,
        trace,
        trajectory: None,
    })
}

fn check(name: &str, observed: f64, limit: f64) -> CrossCheck {
    CrossCheck {
        name: name.into(),
        observed,
        limit,
        passed: observed <= limit,
    }
}

fn cross_check(
    config: &ProblemConfig,
    problem: &Problem,
    r: &AnalysisReport,
    cert: &Certificate,
    oracle: &ExecutableOracle,
    notes: &mut Vec<String>,
) -> Result<Vec<CrossCheck>, RunError> {
    let a = &config.analysis;
    let (trials, k, seed) = (a.trials, a.horizon, a.seed);
    let gamma = r.overshoot.map_or(1.0, |o| o.gamma);
    Ok(match a.mode {
        Mode::Nonexpansive | Mode::Rate | Mode::Margin => {
            let pairs = match &problem.system {
                System::Closed(m) => random_pairs(m, oracle, trials, k, seed)?,
                System::Open(m) => random_pairs(m, oracle, trials, k, seed)?,
            };
            vec![check("storage_ratio", worst_ratio(&pairs, &cert.p), gamma + CROSS_CHECK_SLACK)]
        }
        Mode::Gain => {
            let System::Open(model) = &problem.system else { unreachable!("validated") };
            let Verdict::Gain { mu } = r.verdict else { unreachable!("gain verdict") };
            vec![
                check("empirical_gain", empirical_gain(model, oracle, trials, k, seed)?, mu + CROSS_CHECK_SLACK),
                check(
                    "summed_gain_inequality",
                    summed_gain_violation(model, oracle, &cert.p, mu, trials, k, seed, true)?,
                    STORAGE_TOL,
                ),
            ]
        }
        Mode::ClosedLoop => {
            let System::Open(model) = &problem.system else { unreachable!("validated") };
            let plant = problem.plant.as_ref().expect("validated");
            let Some(linear) = &plant.linear else {
                notes.push("no `plant.linear` given; the closed loop was not simulated".into());
                return Ok(Vec::new());
            };
            let Some(storage) = plant_storage(plant)? else {
                notes.push("the linear plant admits no storage for the given supply; the closed loop was not simulated".into());
                return Ok(Vec::new());
            };
            let c = composite_storage_check(linear, &storage, model, &cert.p, oracle, trials, k, seed)?;
            vec![check("composite_storage_increase", c.worst_increase, STORAGE_TOL)]
        }
        Mode::Simulate | Mode::Sweep => Vec::new(),
    })
}

/// The configured plant storage, or one found from the plant's supply.
fn plant_storage(plant: &Plant) -> Result<Option<SymMatrix>, RunError> {
    if let Some(p) = &plant.storage {
        return Ok(Some(p.clone()));
    }
    let (Some(linear), Some(supply)) = (&plant.linear, &plant.supply) else {
        return Ok(None);
    };
    let f = solve_feasibility(&plant_storage_lmi(linear, supply)?, 0.0, &SolverOptions::default())?;
    Ok(f.into_certificate().map(|c| c.p))
}

/// Spectral radius of the loop an affine oracle closes, through the linear
/// plant when one is given.
pub(crate) fn loop_spectral_radius(problem: &Problem, oracle: &ExecutableOracle) -> Result<f64, RunError> {
    let m = match (&problem.system, problem.plant.as_ref().and_then(|p| p.linear.as_ref())) {
        (System::Open(model), Some(plant)) => interconnection_matrix(plant, model, oracle)?,
        (System::Open(model), None) => loop_matrix(model, oracle)?,
        (System::Closed(model), _) => loop_matrix(model, oracle)?,
    };
    Ok(spectral_radius(&m)?)
}

fn simulate(config: &ProblemConfig) -> Result<RunOutput, RunError> {
    let problem = config.build()?;
    let a = &config.analysis;
    let oracle = problem
        .oracle
        .as_ref()
        .ok_or_else(|| RunError::Usage("`simulate` requires `executable_oracle`".into()))?;
    let n = match &problem.system {
        System::Closed(m) => m.n(),
        System::Open(m) => m.n(),
    };
    let x0 = a.x0.clone().unwrap_or_else(|| vec![1.0; n]);
    let eye = SymMatrix::identity(n);
    let (trajectory, replay, contraction, gain): (Trajectory, f64, f64, Option<f64>) = match &problem.system {
        System::Closed(m) => {
            let t = rollout(m, oracle, &x0, None, a.horizon)?;
            let e = t.replay_error(m);
            (t, e, empirical_contraction(m, oracle, &eye, a.trials, a.horizon, a.seed)?, None)
        }
        System::Open(m) => {
            let t = rollout(m, oracle, &x0, None, a.horizon)?;
            let e = t.replay_error(m);
            let c = empirical_contraction(m, oracle, &eye, a.trials, a.horizon, a.seed)?;
            let g = if a.horizon > 0 { Some(empirical_gain(m, oracle, a.trials, a.horizon, a.seed)?) } else { None };
            (t, e, c, g)
        }
    };
    let bound_checks = problem
        .bounds
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let c = check_oracle_bound(oracle, b, BOUND_SAMPLES, a.seed)?;
            Ok(BoundCheckOut {
                index,
                passed: c.passed,
                worst: c.worst,
            })
        })
        .collect::<Result<Vec<_>, dissip_core::error::Error>>()?;
    let spectral = match oracle {
        ExecutableOracle::Linear { .. } | ExecutableOracle::Affine { .. } => Some(loop_spectral_radius(&problem, oracle)?),
        _ => None,
    };
    let passed = bound_checks.iter().all(|c| c.passed);
    let status = if passed { Status::Pass } else { Status::Fail };
    let report = Report {
        command: Command::Simulate.name().into(),
        mode: a.mode.name().into(),
        status,
        exit_code: status.exit_code(),
        settings: settings(config),
        system: system_info(&problem.system),
        certification: None,
        simulation: Some(Simulation {
            horizon: trajectory.horizon(),
            initial_state: x0,
            final_state: trajectory.states.last().cloned().unwrap_or_default(),
            replay_error: replay,
            bound_checks,
            empirical_contraction: contraction,
            empirical_gain: gain,
            spectral_radius: spectral,
            passed,
        }),
        sweep: None,
    };
    Ok(RunOutput {
        report,
        trace: Vec::new(),
        trajectory: Some(trajectory),
    })
}
