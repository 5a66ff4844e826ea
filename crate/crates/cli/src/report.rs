//! Report documents and their CSV renderings. `schemas/report.schema.json`
//! documents the JSON form.

use dissip_core::certify::{Diagnostics, Overshoot, Verdict};
use dissip_core::lmi::{BisectionStep, Multiplier, ScalarParam};
use dissip_core::simulate::Trajectory;
use serde::{Deserialize, Serialize};

use crate::config::Rows;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub mode: String,
    pub status: Status,
    pub exit_code: i32,
    pub settings: Settings,
    pub system: SystemInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certification: Option<Certification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Certified,
    NotCertified,
    Pass,
    Fail,
    Complete,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Certified | Status::Pass | Status::Complete => EXIT_OK,
            Status::NotCertified | Status::Fail => EXIT_NEGATIVE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol: f64,
    pub seed: u64,
    pub horizon: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateOut {
    pub p: Rows,
    pub multipliers: Vec<Multiplier>,
    pub margins: MarginsOut,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginsOut {
    pub lmi_min_eig: f64,
    pub p_min_eig: f64,
    pub p_max_eig: f64,
}

/// One empirical check of a certified claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub name: String,
    pub observed: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub verdict: Verdict,
    pub certified: bool,
    pub scalar: Option<ScalarParam>,
    pub certificate: Option<CertificateOut>,
    pub overshoot: Option<Overshoot>,
    pub diagnostics: Diagnostics,
    pub conclusion: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cross_checks: Vec<CrossCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckOut {
    pub index: usize,
    pub passed: bool,
    pub worst: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub horizon: usize,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
    pub replay_error: f64,
    pub bound_checks: Vec<BoundCheckOut>,
    /// Worst one-step ratio of `‖Δx‖²` over random pairs.
    pub empirical_contraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_radius: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameters: Vec<f64>,
    pub value: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub metric: String,
    pub parameters: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// A finished run: the report plus tabular data that only goes to CSV.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub trace: Vec<BisectionStep>,
    pub trajectory: Option<Trajectory>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The bisection trace for `certify`, the trajectory for `simulate` and
    /// the grid table for `sweep`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if let Some(table) = &self.report.sweep {
            let mut header = table.parameters.clone();
            header.push(table.metric.clone());
            header.push("status".into());
            w.write_record(&header)?;
            for row in &table.rows {
                let mut rec: Vec<String> = row.parameters.iter().map(|v| v.to_string()).collect();
                rec.push(row.value.map(|v| v.to_string()).unwrap_or_default());
                rec.push(row.status.clone());
                w.write_record(&rec)?;
            }
        } else if let Some(traj) = &self.trajectory {
            write_trajectory(&mut w, traj)?;
        } else {
            w.write_record(["step", "value", "feasible", "lmi_min_eig"])?;
            for (i, s) in self.trace.iter().enumerate() {
                w.write_record([i.to_string(), s.value.to_string(), s.feasible.to_string(), s.lmi_min_eig.to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn write_trajectory(w: &mut csv::Writer<Vec<u8>>, t: &Trajectory) -> Result<(), csv::Error> {
    let width = |v: &[Vec<f64>]| v.first().map_or(0, Vec::len);
    let groups: [(&str, &[Vec<f64>]); 5] = [
        ("x", &t.states),
        ("y", &t.oracle_inputs),
        ("u", &t.oracle_outputs),
        ("d", &t.disturbances),
        ("z", &t.performance),
    ];
    let mut header = vec!["k".to_string()];
    for (name, data) in &groups {
        header.extend((0..width(data)).map(|i| format!("{name}{i}")));
    }
    w.write_record(&header)?;
    // The final row carries the last state only.
    for k in 0..t.states.len() {
        let mut rec = vec![k.to_string()];
        for (_, data) in &groups {
            match data.get(k) {
                Some(row) => rec.extend(row.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), width(data))),
            }
        }
        w.write_record(&rec)?;
    }
    Ok(())
}
