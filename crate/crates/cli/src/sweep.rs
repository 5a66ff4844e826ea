//! Grid sweeps: each point rewrites numeric fields of the config, rebuilds
//! the problem and evaluates one metric.

use rayon::prelude::*;
use serde_json::Value;

use crate::config::{ConfigError, Metric, Mode, ProblemConfig, SweepSpec, System};
use crate::report::{Report, RunOutput, Status, SweepRow, SweepTable};
use crate::run::{certified_value, loop_spectral_radius, settings, solver_options, system_info, Command, RunError};

fn invalid(msg: String) -> RunError {
    RunError::Config(ConfigError::Invalid(msg))
}

fn set_path(root: &mut Value, path: &str, value: f64) -> Result<(), RunError> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, parents) = segments.split_last().expect("split yields one segment");
    let mut node = root;
    for seg in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| invalid(format!("sweep target `{path}`: `{seg}` does not exist")))?;
    }
    let number = serde_json::Number::from_f64(value)
        .ok_or_else(|| invalid(format!("sweep target `{path}`: non-finite value {value}")))?;
    // Integers stay integers so that fields like `q` still parse.
    let number = if value.fract() == 0.0 && value.abs() < 2f64.powi(53) && value >= 0.0 {
        Value::from(value as u64)
    } else {
        Value::Number(number)
    };
    match node {
        Value::Object(map) => {
            map.insert((*last).to_string(), number);
        }
        Value::Array(items) => {
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i))
                .ok_or_else(|| invalid(format!("sweep target `{path}`: index `{last}` does not exist")))?;
            *slot = number;
        }
        _ => return Err(invalid(format!("sweep target `{path}` does not point into an object or array"))),
    }
    Ok(())
}

/// Grid points in lexicographic order: the last parameter varies fastest.
pub fn grid_points(spec: &SweepSpec) -> Result<Vec<Vec<f64>>, ConfigError> {
    let grids = spec.parameters.iter().map(|p| p.grid()).collect::<Result<Vec<_>, _>>()?;
    let mut points = vec![Vec::new()];
    for grid in &grids {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                grid.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    Ok(points)
}

/// The config with one grid point substituted.
pub fn instantiate(config: &ProblemConfig, point: &[f64]) -> Result<ProblemConfig, RunError> {
    let spec = config.sweep.as_ref().ok_or_else(|| RunError::Usage("config has no `sweep` section".into()))?;
    let mut value = serde_json::to_value(config).expect("configs serialize");
    for (param, v) in spec.parameters.iter().zip(point) {
        for t in &param.targets {
            set_path(&mut value, &t.path, t.scale * v + t.offset)?;
        }
    }
    serde_json::from_value(value).map_err(|e| invalid(format!("sweep point {point:?}: {e}")))
}

fn metric_mode(metric: Metric) -> Option<Mode> {
    match metric {
        Metric::Gamma => Some(Mode::Rate),
        Metric::Mu => Some(Mode::Gain),
        Metric::Rho => Some(Mode::Margin),
        Metric::SpectralRadius => None,
    }
}

fn evaluate(config: &ProblemConfig, metric: Metric) -> Result<(Option<f64>, String), RunError> {
    let problem = config.build()?;
    match metric_mode(metric) {
        Some(mode) => {
            if mode == Mode::Gain && !matches!(problem.system, System::Open(_)) {
                return Err(RunError::Usage("metric `mu` requires an open system".into()));
            }
            let v = certified_value(&problem, mode, config.analysis.tol, &solver_options(config))?;
            let status = if v.is_some() { "certified" } else { "not-certified" };
            Ok((v, status.into()))
        }
        None => {
            let oracle = problem
                .oracle
                .as_ref()
                .ok_or_else(|| RunError::Usage("metric `spectral_radius` requires an affine `executable_oracle`".into()))?;
            Ok((Some(loop_spectral_radius(&problem, oracle)?), "ok".into()))
        }
    }
}

pub fn sweep(config: &ProblemConfig) -> Result<RunOutput, RunError> {
    let spec = config.sweep.as_ref().ok_or_else(|| RunError::Usage("`sweep` requires a `sweep` section".into()))?;
    let points = grid_points(spec)?;
    let rows = points
        .par_iter()
        .map(|point| {
            let (value, status) = evaluate(&instantiate(config, point)?, spec.metric)?;
            Ok(SweepRow {
                parameters: point.clone(),
                value,
                status,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let problem = config.build()?;
    let status = Status::Complete;
    Ok(RunOutput {
        report: Report {
            command: Command::Sweep.name().into(),
            mode: config.analysis.mode.name().into(),
            status,
            exit_code: status.exit_code(),
            settings: settings(config),
            system: system_info(&problem.system),
            certification: None,
            simulation: None,
            sweep: Some(SweepTable {
                metric: spec.metric.name().into(),
                parameters: spec.parameters.iter().map(|p| p.name.clone()).collect(),
                rows,
            }),
        },
        trace: Vec::new(),
        trajectory: None,
    })
}
