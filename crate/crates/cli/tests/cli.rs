use std::path::{Path, PathBuf};
use std::process::Command as Process;

use dissip_cli::config::{parse_config, ConfigError, Mode};
use dissip_cli::{run, Command, RunError};
use proptest::prelude::*;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn load(name: &str) -> dissip_cli::ProblemConfig {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    parse_config(&text).unwrap()
}

fn dissip(args: &[&str]) -> (i32, String, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_dissip")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn config_arg(name: &str) -> String {
    configs_dir().join(name).to_string_lossy().into_owned()
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn assert_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

const MINIMAL: &str = r#"{
  "system": { "closed": { "a": [[1.0]], "b": [[-0.18181818181818182]], "c": [[1.0]] } },
  "oracle_bounds": [ { "type": "sector", "parameters": { "mu": 1.0, "lipschitz": 10.0 } } ],
  "analysis": { "mode": "rate" }
}"#;

#[test]
fn minimal_closed_config_parses() {
    let c = parse_config(MINIMAL).unwrap();
    assert_eq!(c.analysis.mode, Mode::Rate);
    assert_eq!(c.analysis.seed, 0);
    assert_eq!(c.analysis.tol, 1e-6);
    let problem = c.build().unwrap();
    assert_eq!(problem.system.kind(), "closed");
    assert_eq!(problem.bounds.len(), 1);
}

#[test]
fn both_systems_are_rejected() {
    let text = r#"{
      "system": {
        "closed": { "a": [[1.0]], "b": [[-0.1]], "c": [[1.0]] },
        "family": { "name": "gradient_descent", "eta": 0.1 }
      },
      "analysis": { "mode": "rate" }
    }"#;
    let err = parse_config(text).unwrap_err().to_string();
    assert!(err.contains("exactly one system"), "{err}");
}

#[test]
fn sector_precondition_is_reported() {
    let text = MINIMAL.replace(r#""mu": 1.0"#, r#""mu": 10.0"#);
    let err = parse_config(&text).unwrap_err();
    assert!(matches!(err, ConfigError::Domain { .. }), "{err:?}");
    let msg = err.to_string();
    assert!(msg.contains("oracle_bounds[0]") && msg.contains("mu < L"), "{msg}");
}

#[test]
fn unknown_fields_and_syntax_errors_carry_locations() {
    let text = MINIMAL.replace(r#""mode": "rate""#, r#""mode": "rate", "horizn": 5"#);
    match parse_config(&text).unwrap_err() {
        ConfigError::Parse { path, line, message, .. } => {
            assert_eq!(path, "analysis.horizn");
            assert_eq!(line, 4);
            assert!(message.contains("unknown field"), "{message}");
        }
        e => panic!("{e:?}"),
    }
    let err = parse_config("{ \"system\": ").unwrap_err();
    assert!(matches!(err, ConfigError::Parse { line: 1, .. }), "{err:?}");
}

#[test]
fn shape_errors_name_the_block() {
    let text = r#"{
      "system": { "closed": { "a": [[1.0, 0.0]], "b": [[-0.1]], "c": [[1.0]] } },
      "analysis": { "mode": "rate" }
    }"#;
    let msg = parse_config(text).unwrap_err().to_string();
    assert!(msg.contains("system.closed"), "{msg}");
    let ragged = MINIMAL.replace(r#""a": [[1.0]]"#, r#""a": [[1.0], [1.0, 2.0]]"#);
    let msg = parse_config(&ragged).unwrap_err().to_string();
    assert!(msg.contains("system.closed.a"), "{msg}");
}

#[test]
fn mode_must_match_system_kind() {
    for mode in ["gain", "closed-loop"] {
        let text = MINIMAL.replace(r#""mode": "rate""#, &format!(r#""mode": "{mode}""#));
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("requires an open system"), "{mode}: {msg}");
    }
    let text = MINIMAL.replace(r#""mode": "rate""#, r#""mode": "simulate""#);
    assert!(parse_config(&text).unwrap_err().to_string().contains("executable_oracle"));
    let text = MINIMAL.replace(r#""mode": "rate""#, r#""mode": "sweep""#);
    assert!(parse_config(&text).unwrap_err().to_string().contains("sweep"));
}

#[test]
fn irrelevant_bound_parameters_are_rejected() {
    let text = MINIMAL.replace(r#""type": "sector""#, r#""type": "lipschitz""#);
    let msg = parse_config(&text).unwrap_err().to_string();
    assert!(msg.contains("`mu` does not apply"), "{msg}");
}

#[test]
fn certify_mode_mismatch_is_a_usage_error() {
    let c = load("nesterov_simulate.json");
    assert!(matches!(run(&c, Command::Certify), Err(RunError::Usage(_))));
}

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let c = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_configs_round_trip(
        eta in 0.01f64..1.0,
        mu in 0.0f64..5.0,
        gap in 0.1f64..20.0,
        seed in any::<u64>(),
        trials in 1usize..500,
        nesterov in any::<bool>(),
    ) {
        let family = if nesterov {
            format!(r#"{{ "name": "nesterov", "eta": {eta}, "condition": {} }}"#, 1.0 + gap)
        } else {
            format!(r#"{{ "name": "gradient_descent", "eta": {eta} }}"#)
        };
        let text = format!(
            r#"{{ "system": {{ "family": {family} }},
                 "oracle_bounds": [ {{ "type": "sector", "parameters": {{ "mu": {mu}, "lipschitz": {} }} }} ],
                 "analysis": {{ "mode": "margin", "seed": {seed}, "trials": {trials} }} }}"#,
            mu + gap
        );
        let c = parse_config(&text).unwrap();
        let again = parse_config(&serde_json::to_string_pretty(&c).unwrap()).unwrap();
        prop_assert_eq!(c, again);
    }
}

#[test]
fn gd_rate_report() {
    let (code, out, _) = dissip(&["certify", "--config", &config_arg("gd_rate.json")]);
    assert_eq!(code, 0);
    let r: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["status"], "certified");
    let gamma = r["certification"]["verdict"]["gamma"].as_f64().unwrap();
    assert!((gamma - 0.669421).abs() < 1e-5, "{gamma}");
    assert_eq!(r["certification"]["scalar"]["name"], "gamma");
    let cert = &r["certification"]["certificate"];
    assert_eq!(cert["p"].as_array().unwrap().len(), 1);
    assert!(cert["margins"]["lmi_min_eig"].as_f64().unwrap() >= -1e-8);
    assert!(cert["multipliers"][0]["value"].as_f64().unwrap() > 0.0);
    assert!(!r["certification"]["diagnostics"]["trace"].as_array().unwrap().is_empty());
    assert_eq!(r["certification"]["cross_checks"][0]["passed"], true);
    // The typed report parses back.
    let _: dissip_cli::Report = serde_json::from_str(&out).unwrap();
}

#[test]
fn expanding_gain_exits_2_with_trace() {
    let (code, out, _) = dissip(&["certify", "--config", &config_arg("expanding_gain.json")]);
    assert_eq!(code, 2);
    let r: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["status"], "not-certified");
    assert_eq!(r["exit_code"], 2);
    let trace = r["certification"]["diagnostics"]["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    assert!(trace.iter().all(|s| s["feasible"] == false));
    assert!(r["certification"]["certificate"].is_null());
    assert_golden("expanding_gain.json", &out);
}

#[test]
fn exit_codes_and_goldens() {
    let cases = [
        ("certify", "gd_rate.json", "json", 0, "gd_rate.json"),
        ("certify", "gd_rate.json", "csv", 0, "gd_rate_trace.csv"),
        ("certify", "closed_loop.json", "json", 0, "closed_loop.json"),
        ("sweep", "gd_eta_sweep.json", "csv", 0, "gd_eta_sweep.csv"),
        ("simulate", "nesterov_simulate.json", "json", 0, "nesterov_simulate.json"),
    ];
    for (cmd, config, format, code, golden) in cases {
        let (c, out, err) = dissip(&[cmd, "--config", &config_arg(config), "--format", format]);
        assert_eq!(c, code, "{cmd} {config}: {err}");
        assert_golden(golden, &out);
    }
}

#[test]
fn errors_exit_1_with_message() {
    let (code, out, err) = dissip(&["certify", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 1);
    assert!(out.is_empty() && err.contains("reading"), "{err}");

    let dir = std::env::temp_dir().join(format!("dissip-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, MINIMAL.replace(r#""mu": 1.0"#, r#""mu": 20.0"#)).unwrap();
    let (code, _, err) = dissip(&["validate-config", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("sector bound"), "{err}");

    let (code, out, _) = dissip(&["validate-config", "--config", &config_arg("gd_rate.json")]);
    assert_eq!((code, out.trim()), (0, "ok"));

    let (code, _, err) = dissip(&["certify", "--config", &config_arg("nesterov_simulate.json")]);
    assert_eq!(code, 1);
    assert!(err.contains("`simulate` command"), "{err}");

    let (code, _, _) = dissip(&["certify", "--config", &config_arg("gd_rate.json"), "--tol=-1"]);
    assert_eq!(code, 1);
    let (code, _, _) = dissip(&["certify", "--bogus"]);
    assert_eq!(code, 1);
}

#[test]
fn out_flag_and_overrides() {
    let dir = std::env::temp_dir().join(format!("dissip-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let (code, out, _) = dissip(&[
        "certify",
        "--config",
        &config_arg("gd_rate.json"),
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "7",
        "--tol",
        "1e-3",
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["settings"]["seed"], 7);
    assert_eq!(r["settings"]["tol"], 1e-3);
    let gamma = r["certification"]["verdict"]["gamma"].as_f64().unwrap();
    assert!(gamma >= (9.0f64 / 11.0).powi(2) - 1e-4 && gamma <= (9.0f64 / 11.0).powi(2) + 1e-3);
}

#[test]
fn reports_are_deterministic() {
    for (cmd, config) in [
        ("certify", "nesterov_rate.json"),
        ("certify", "gradient_noise_gain.json"),
        ("simulate", "nesterov_simulate.json"),
        ("sweep", "feedback_loop_sweep.json"),
    ] {
        let a = dissip(&[cmd, "--config", &config_arg(config)]);
        let b = dissip(&[cmd, "--config", &config_arg(config)]);
        assert_eq!(a, b, "{cmd} {config}");
    }
}

#[test]
fn feedback_loop_sweep_is_unstable_everywhere() {
    let (code, out, _) = dissip(&["sweep", "--config", &config_arg("feedback_loop_sweep.json"), "--format", "csv"]);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(reader.headers().unwrap(), vec!["K", "eta", "spectral_radius", "status"]);
    let mut rows = 0;
    let mut last = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let (k, eta, rho): (f64, f64, f64) = (rec[0].parse().unwrap(), rec[1].parse().unwrap(), rec[2].parse().unwrap());
        assert!(rho > 1.0, "K={k} eta={eta} rho={rho}");
        // Closed form of the dominant root of λ² − (−η)λ + (η − 1 − ηK).
        let (t, det) = (-eta, eta - 1.0 - eta * k);
        let s = (t * t - 4.0 * det).sqrt();
        let exact = ((t + s) / 2.0).abs().max(((t - s) / 2.0).abs());
        assert!((rho - exact).abs() < 1e-9);
        assert!((k, eta) > last, "rows out of lexicographic order");
        last = (k, eta);
        rows += 1;
    }
    assert_eq!(rows, 19 * 19);
}

#[test]
fn feedback_loop_stable_pair() {
    let mut c = load("feedback_loop_sweep.json");
    c.sweep.as_mut().unwrap().parameters[0].range = None;
    c.sweep.as_mut().unwrap().parameters[0].values = Some(vec![3.0]);
    c.sweep.as_mut().unwrap().parameters[1].range = None;
    c.sweep.as_mut().unwrap().parameters[1].values = Some(vec![-0.5]);
    let out = run(&c, Command::Sweep).unwrap();
    let rho = out.report.sweep.unwrap().rows[0].value.unwrap();
    assert!((rho - 0.5).abs() < 1e-9, "{rho}");
}

#[test]
fn eta_sweep_is_minimized_near_two_elevenths() {
    let c = load("gd_eta_sweep.json");
    let table = run(&c, Command::Sweep).unwrap().report.sweep.unwrap();
    assert_eq!(table.rows.len(), 10);
    for row in &table.rows {
        let eta = row.parameters[0];
        let exact = (1.0 - eta).abs().max((1.0 - 10.0 * eta).abs()).powi(2);
        let gamma = row.value.unwrap();
        assert!(gamma >= exact - 1e-4 && gamma <= exact + 1e-4, "eta={eta}: {gamma} vs {exact}");
    }
    let best = table
        .rows
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .unwrap();
    assert!((best.parameters[0] - 2.0 / 11.0).abs() <= 0.01, "{:?}", best.parameters);
}

#[test]
fn gain_is_finite_wherever_the_rate_contracts() {
    let eta_values = vec![0.05, 0.1, 2.0 / 11.0, 0.19, 0.25];
    let sweep_of = |family: &str, metric: &str| {
        let text = format!(
            r#"{{ "system": {{ "family": {{ "name": "{family}", "eta": 0.1 }} }},
                 "oracle_bounds": [ {{ "type": "sector", "parameters": {{ "mu": 1.0, "lipschitz": 10.0 }} }} ],
                 "analysis": {{ "mode": "sweep", "tol": 1e-4 }},
                 "sweep": {{ "metric": "{metric}", "parameters": [
                   {{ "name": "eta", "values": {eta_values:?}, "targets": [ {{ "path": "system.family.eta" }} ] }} ] }} }}"#
        );
        run(&parse_config(&text).unwrap(), Command::Sweep).unwrap().report.sweep.unwrap()
    };
    let rates = sweep_of("gradient_descent", "gamma");
    let gains = sweep_of("open_gradient_noise", "mu");
    for (r, g) in rates.rows.iter().zip(&gains.rows) {
        if r.value.is_some_and(|gamma| gamma < 1.0) {
            assert!(g.value.is_some_and(f64::is_finite), "eta={}: {:?}", r.parameters[0], g);
        }
    }
    assert_eq!(rates.rows.last().unwrap().value, None);
}

#[test]
fn one_point_sweep_equals_single_run() {
    let mut c = load("gd_eta_sweep.json");
    let eta = 2.0 / 11.0;
    c.sweep.as_mut().unwrap().parameters[0].range = None;
    c.sweep.as_mut().unwrap().parameters[0].values = Some(vec![eta]);
    let swept = run(&c, Command::Sweep).unwrap().report.sweep.unwrap().rows[0].value.unwrap();

    let mut single = load("gd_rate.json");
    single.system.family.as_mut().unwrap().eta = eta;
    single.analysis.tol = c.analysis.tol;
    single.executable_oracle = None;
    let report = run(&single, Command::Certify).unwrap().report;
    let gamma = match report.certification.unwrap().verdict {
        dissip_core::certify::Verdict::Exponential { gamma } => gamma,
        v => panic!("{v:?}"),
    };
    assert_eq!(swept, gamma);
}

#[test]
fn empty_grids_are_rejected() {
    let mut c = load("gd_eta_sweep.json");
    c.sweep.as_mut().unwrap().parameters[0].range.as_mut().unwrap().count = 0;
    assert!(c.validate().unwrap_err().to_string().contains("empty grid"));
    let mut c = load("gd_eta_sweep.json");
    c.sweep.as_mut().unwrap().parameters[0].targets[0].path = "system.family.etta".into();
    let err = run(&c, Command::Sweep).unwrap_err().to_string();
    assert!(err.contains("etta"), "{err}");
}

#[test]
fn simulate_reports_checks_and_trajectory() {
    let c = load("nesterov_simulate.json");
    let out = run(&c, Command::Simulate).unwrap();
    let sim = out.report.simulation.as_ref().unwrap();
    assert!(sim.passed && sim.replay_error == 0.0);
    assert_eq!(sim.bound_checks.len(), 1);
    // Minimizer of 1.5x² + x is −1/3.
    assert!(sim.final_state.iter().all(|v| (v + 1.0 / 3.0).abs() < 1e-6));
    let csv = out.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,x0,x1,y0,u0");
    assert_eq!(lines.count(), 51);

    // A tighter sector than the oracle's curvature fails and exits 2.
    let mut tight = c.clone();
    tight.oracle_bounds[0].parameters.lipschitz = Some(2.0);
    let out = run(&tight, Command::Simulate).unwrap();
    assert_eq!(out.exit_code(), 2);
    assert!(out.report.simulation.unwrap().bound_checks[0].worst > 0.0);
}

fn property_names(schema: &serde_json::Value, out: &mut std::collections::BTreeSet<String>) {
    match schema {
        serde_json::Value::Object(map) => {
            if let Some(serde_json::Value::Object(props)) = map.get("properties") {
                out.extend(props.keys().cloned());
            }
            map.values().for_each(|v| property_names(v, out));
        }
        serde_json::Value::Array(items) => items.iter().for_each(|v| property_names(v, out)),
        _ => {}
    }
}

fn object_keys(doc: &serde_json::Value, out: &mut Vec<String>) {
    match doc {
        serde_json::Value::Object(map) => {
            out.extend(map.keys().cloned());
            map.values().for_each(|v| object_keys(v, out));
        }
        serde_json::Value::Array(items) => items.iter().for_each(|v| object_keys(v, out)),
        _ => {}
    }
}

#[test]
fn schemas_document_every_emitted_field() {
    let schemas = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    for (schema, docs) in [
        ("config.schema.json", configs_dir()),
        ("report.schema.json", golden_dir()),
    ] {
        let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schemas.join(schema)).unwrap()).unwrap();
        let mut known = std::collections::BTreeSet::new();
        property_names(&schema, &mut known);
        for entry in std::fs::read_dir(&docs).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") {
                let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
                let mut keys = Vec::new();
                object_keys(&doc, &mut keys);
                for k in keys {
                    assert!(known.contains(&k), "{}: `{k}` missing from schema", path.display());
                }
            }
        }
    }
}
