//! Certification procedures: each wraps one LMI test and turns its outcome
//! into an [`AnalysisReport`] with a verdict, the certificate, the overshoot
//! bound it implies and the solver evidence.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lmi::{
    bisect_gamma, bisect_mu, closed_loop_lmi, closed_lmi, maximize_rho, solve_feasibility, BisectionStep,
    Certificate, Feasibility, SearchOutcome, SolverOptions,
};
use crate::models::{ClosedAlgorithmModel, OpenAlgorithmModel, OracleBound, PlantSupply};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    Nonexpansive,
    Contracting { rho: f64 },
    Exponential { gamma: f64 },
    Gain { mu: f64 },
    ClosedLoopNonexpansive,
    NotCertified,
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        !matches!(self, Verdict::NotCertified)
    }
}

/// `‖Δx_k‖² ≤ γᵏ · κ · ‖Δx₀‖²` with `κ = λ₊(P)/λ₋(P)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overshoot {
    pub kappa: f64,
    pub gamma: f64,
}

impl Overshoot {
    pub fn bound(&self, k: usize, dx0_norm_sq: f64) -> f64 {
        self.gamma.powi(k as i32) * self.kappa * dx0_norm_sq
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Verified `λ₋` of the LMI at the certificate or best point.
    pub lmi_min_eig: Option<f64>,
    pub p_min_eig: Option<f64>,
    pub trace: Vec<BisectionStep>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
    pub overshoot: Option<Overshoot>,
    pub diagnostics: Diagnostics,
    pub conclusion: String,
}

impl AnalysisReport {
    fn not_certified(diagnostics: Diagnostics, conclusion: impl Into<String>) -> Self {
        AnalysisReport {
            verdict: Verdict::NotCertified,
            certificate: None,
            overshoot: None,
            diagnostics,
            conclusion: conclusion.into(),
        }
    }

    fn certified(verdict: Verdict, cert: Certificate, gamma: f64, mut diagnostics: Diagnostics, conclusion: String) -> Self {
        diagnostics.lmi_min_eig = Some(cert.lmi_min_eig);
        diagnostics.p_min_eig = Some(cert.p_min_eig);
        AnalysisReport {
            verdict,
            overshoot: Some(Overshoot {
                kappa: cert.kappa,
                gamma,
            }),
            certificate: Some(cert),
            diagnostics,
            conclusion,
        }
    }
}

const NOT_FOUND_NOTE: &str = "no certificate was found; this is not a proof that the property fails";

fn feasibility_diagnostics(f: &Feasibility) -> Diagnostics {
    match f {
        Feasibility::NotFound { lmi_min_eig, p_min_eig } => Diagnostics {
            lmi_min_eig: Some(*lmi_min_eig),
            p_min_eig: Some(*p_min_eig),
            notes: vec![NOT_FOUND_NOTE.into()],
            ..Diagnostics::default()
        },
        Feasibility::Found(_) => Diagnostics::default(),
    }
}

fn search_diagnostics(out: &SearchOutcome) -> Diagnostics {
    let last = out.trace.last();
    Diagnostics {
        lmi_min_eig: last.map(|s| s.lmi_min_eig),
        p_min_eig: None,
        trace: out.trace.clone(),
        notes: if out.best.is_none() { vec![NOT_FOUND_NOTE.into()] } else { Vec::new() },
    }
}

/// Nonexpansiveness: `closed_lmi(γ = 1)` feasible with margin 0.
pub fn certify_nonexpansive(
    model: &ClosedAlgorithmModel,
    bounds: &[OracleBound],
    opts: &SolverOptions,
) -> Result<AnalysisReport> {
    let f = solve_feasibility(&closed_lmi(model, bounds, 1.0)?, 0.0, opts)?;
    let diagnostics = feasibility_diagnostics(&f);
    Ok(match f {
        Feasibility::Found(cert) => {
            let conclusion = format!(
                "nonexpansive: V(Δx) = ΔxᵀPΔx never increases along incremental pairs; ‖Δx_k‖² ≤ {:.6}·‖Δx₀‖²",
                cert.kappa
            );
            AnalysisReport::certified(Verdict::Nonexpansive, cert, 1.0, diagnostics, conclusion)
        }
        Feasibility::NotFound { .. } => {
            AnalysisReport::not_certified(diagnostics, "not certified: no storage shows nonexpansiveness")
        }
    })
}

/// Exponential contraction with the smallest certified rate `γ*`.
pub fn certify_rate(
    model: &ClosedAlgorithmModel,
    bounds: &[OracleBound],
    tol: f64,
    opts: &SolverOptions,
) -> Result<AnalysisReport> {
    let out = bisect_gamma(model, bounds, tol, opts)?;
    let diagnostics = search_diagnostics(&out);
    Ok(match out.best {
        Some((gamma, cert)) => {
            let conclusion = format!(
                "exponential contraction: V(Δx_(k+1)) ≤ {gamma:.6}·V(Δx_k), so ‖Δx_k‖² ≤ {gamma:.6}^k · {:.6} · ‖Δx₀‖²",
                cert.kappa
            );
            AnalysisReport::certified(Verdict::Exponential { gamma }, cert, gamma, diagnostics, conclusion)
        }
        None => AnalysisReport::not_certified(diagnostics, "not certified: no rate γ ≤ 1 was certified"),
    })
}

/// Strict contraction: the largest `ρ` with `closed_lmi(γ = 1) ⪰ ρI`.
///
/// A margin `ρ` gives `V(Δx⁺) ≤ V(Δx) − ρ‖Δx‖²`, hence the per-step rate
/// `1 − ρ/λ₊(P)` in the overshoot bound.
pub fn certify_margin(
    model: &ClosedAlgorithmModel,
    bounds: &[OracleBound],
    tol: f64,
    opts: &SolverOptions,
) -> Result<AnalysisReport> {
    let out = maximize_rho(model, bounds, tol, opts)?;
    let diagnostics = search_diagnostics(&out);
    Ok(match out.best {
        Some((rho, cert)) if rho > 0.0 => {
            let gamma = (1.0 - rho / cert.p_max_eig).max(0.0);
            let conclusion = format!(
                "contracting: V(Δx_(k+1)) ≤ V(Δx_k) − {rho:.6}·‖Δx_k‖², a per-step rate of at most {gamma:.6}"
            );
            AnalysisReport::certified(Verdict::Contracting { rho }, cert, gamma, diagnostics, conclusion)
        }
        Some(_) => AnalysisReport::not_certified(
            diagnostics,
            "not certified: only ρ = 0 is feasible, which shows nonexpansiveness but no strict margin",
        ),
        None => AnalysisReport::not_certified(diagnostics, "not certified: the test fails already at ρ = 0"),
    })
}

/// Incremental ℓ² gain from `d` to `z` with the smallest certified `μ*`.
pub fn certify_gain(
    model: &OpenAlgorithmModel,
    bounds: &[OracleBound],
    tol: f64,
    opts: &SolverOptions,
) -> Result<AnalysisReport> {
    let out = bisect_mu(model, bounds, tol, opts)?;
    let diagnostics = search_diagnostics(&out);
    Ok(match out.best {
        Some((mu, cert)) => {
            let conclusion = format!(
                "incremental gain {mu:.6}: for every horizon, Σ‖Δz_k‖² ≤ V(Δx₀) + {:.6}·Σ‖Δd_k‖²",
                mu * mu
            );
            AnalysisReport::certified(Verdict::Gain { mu }, cert, 1.0, diagnostics, conclusion)
        }
        None => AnalysisReport::not_certified(diagnostics, "not certified: no finite gain was certified"),
    })
}

/// Nonexpansiveness of the loop closed through a plant with supply `S_p`.
///
/// The certified composite storage is `V_c = V_p + V`; only `S_p` enters the
/// test, so a plant storage `V_p` for that supply must exist separately.
pub fn certify_closed_loop(
    model: &OpenAlgorithmModel,
    psi_bounds: &[OracleBound],
    plant: &PlantSupply,
    opts: &SolverOptions,
) -> Result<AnalysisReport> {
    let f = solve_feasibility(&closed_loop_lmi(model, psi_bounds, plant)?, 0.0, opts)?;
    let mut diagnostics = feasibility_diagnostics(&f);
    diagnostics.notes.push(
        "composite storage V_c = V_p + V; V_p must satisfy the plant's dissipation inequality for S_p".into(),
    );
    Ok(match f {
        Feasibility::Found(cert) => {
            diagnostics
                .notes
                .push("the overshoot factor κ refers to the algorithm storage P only".into());
            let conclusion =
                "closed-loop nonexpansive: V_p(Δξ) + ΔxᵀPΔx never increases along incremental pairs".to_string();
            AnalysisReport::certified(Verdict::ClosedLoopNonexpansive, cert, 1.0, diagnostics, conclusion)
        }
        Feasibility::NotFound { .. } => {
            AnalysisReport::not_certified(diagnostics, "not certified: no algorithm storage closes the loop")
        }
    })
}
