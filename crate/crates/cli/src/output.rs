//! JSON document shapes written by the CLI.

use misorate::solver::{KktCertificate, UserSolve};
use misorate::verify::SuiteReport;
use serde::Serialize;

#[derive(Serialize)]
pub struct SolveOutput {
    pub network: String,
    pub seed: u64,
    pub budget: Vec<BudgetEntry>,
    pub users: Vec<UserOutput>,
    /// Per-user rates with no interference at the receiver.
    pub rates_single_user: Vec<f64>,
    /// Joint rates under the realized cross interference.
    pub rates_realized: Vec<f64>,
    pub all_certificates_pass: bool,
}

#[derive(Serialize)]
pub struct BudgetEntry {
    pub tx: usize,
    pub rx: usize,
    pub cap: f64,
}

#[derive(Serialize)]
pub struct UserOutput {
    pub user: usize,
    pub beamformer: Vec<f64>,
    pub signal_power: f64,
    pub rate_single_user: f64,
    pub realized_interference: Vec<InterferenceEntry>,
    pub trace_budget: f64,
    pub reduced_value: f64,
    pub duality_gap: f64,
    pub completion_case: misorate::completion::CompletionCase,
    pub certificate: CertificateOutput,
}

#[derive(Serialize)]
pub struct InterferenceEntry {
    pub rx: usize,
    pub power: f64,
}

#[derive(Serialize)]
pub struct CertificateOutput {
    pub verdict: &'static str,
    pub inertia: [usize; 2],
    pub stationarity_residual: f64,
    pub complementarity_residuals: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub eta_ordering_ok: bool,
    pub rank_condition_ok: bool,
}

impl CertificateOutput {
    pub fn from_certificate(cert: &KktCertificate, multipliers: &[f64]) -> Self {
        Self {
            verdict: cert.verdict(),
            inertia: [cert.inertia.0, cert.inertia.1],
            stationarity_residual: cert.stationarity_residual,
            complementarity_residuals: cert.complementarity_residuals.clone(),
            eigenvalues: cert.eigenvalues.clone(),
            multipliers: multipliers.to_vec(),
            eta_ordering_ok: cert.eta_ordering_ok,
            rank_condition_ok: cert.rank_condition_ok,
        }
    }
}

impl UserOutput {
    pub fn from_solve(solve: &UserSolve) -> Self {
        Self {
            user: solve.user + 1,
            beamformer: solve.beamformer.weights.iter().copied().collect(),
            signal_power: solve.signal_power,
            rate_single_user: solve.rate_single_user(),
            realized_interference: solve
                .interference
                .iter()
                .enumerate()
                .filter(|&(rx, _)| rx != solve.user)
                .map(|(rx, &power)| InterferenceEntry { rx: rx + 1, power })
                .collect(),
            trace_budget: solve.split.trace_budget,
            reduced_value: solve.split.inner.value,
            duality_gap: solve.split.inner.duality_gap,
            completion_case: solve.completion_case,
            certificate: CertificateOutput::from_certificate(
                &solve.certificate,
                &solve.split.inner.multipliers,
            ),
        }
    }
}

#[derive(Serialize)]
pub struct VerifyOutput {
    pub seed: u64,
    pub trials_override: Option<usize>,
    pub suites: Vec<SuiteReport>,
    pub all_passed: bool,
}
