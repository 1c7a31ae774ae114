//! Report serialization: versioned JSON envelopes whose numerics carry
//! provenance (a stable formula identifier plus a hash of the inputs that
//! produced the value). Identical configuration and seed produce
//! byte-identical files; no timestamps are written.

use crate::drift::DriftMinCert;
use crate::error::Result;
use crate::rates::RateReport;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// FNV-1a over the formula id and the canonical little-endian input bytes.
pub fn inputs_hash(formula: &str, inputs: &[f64]) -> String {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for b in formula.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(PRIME);
    }
    for v in inputs {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    format!("{h:016x}")
}

/// A numeric with provenance. `value` is omitted when the quantity is not
/// representable in double precision; `log_value` is carried for log-scaled
/// quantities.
#[derive(Debug, Clone, Serialize)]
pub struct Prov {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_value: Option<f64>,
    pub formula: &'static str,
    pub inputs_hash: String,
}

impl Prov {
    pub fn plain(value: f64, formula: &'static str, inputs: &[f64]) -> Self {
        Self {
            value: Some(value).filter(|v| v.is_finite()),
            log_value: None,
            formula,
            inputs_hash: inputs_hash(formula, inputs),
        }
    }

    pub fn log_scaled(log_value: f64, formula: &'static str, inputs: &[f64]) -> Self {
        Self {
            value: Some(log_value.exp()).filter(|v| v.is_finite() && *v > 0.0),
            log_value: Some(log_value),
            formula,
            inputs_hash: inputs_hash(formula, inputs),
        }
    }
}

/// Certificate constants wrapped with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct CertReport {
    pub dim: usize,
    pub lambda_tilde: Prov,
    pub r_alpha: Prov,
    pub eps: Prov,
    pub delta: Prov,
    pub k_eps: Prov,
    pub r_eps: Prov,
    pub b: Prov,
    pub r_max: Prov,
    pub eta_tilde: Prov,
    pub vacuous: bool,
    pub m_star: f64,
    pub norm_quality: crate::target::NormQuality,
    pub drift_fn: &'static str,
    pub small_set_measure: &'static str,
    pub small_set_radius: f64,
}

impl CertReport {
    pub fn from_cert(cert: &DriftMinCert) -> Self {
        CertReport {
            dim: cert.dim,
            lambda_tilde: Prov::plain(
                cert.lambda_tilde,
                "geometry.drift-factor",
                &[cert.box_mass, cert.eps_alpha],
            ),
            r_alpha: Prov::plain(
                cert.r_alpha,
                "geometry.cone-radius",
                &[cert.k_cone, cert.eps_alpha],
            ),
            eps: Prov::plain(
                cert.eps,
                "geometry.eps-upper-limit",
                &[cert.eps_alpha, cert.box_mass],
            ),
            delta: Prov::plain(
                cert.delta,
                "geometry.delta-half-sup",
                &[cert.eps, cert.k_eps, cert.dim as f64],
            ),
            k_eps: Prov::plain(cert.k_eps, "proposal.tail-radius", &[cert.eps]),
            r_eps: Prov::plain(
                cert.r_eps,
                "drift.radius-four-way-max",
                &[cert.eps, cert.delta, cert.k_eps, cert.m_star],
            ),
            b: Prov::log_scaled(
                cert.log_b,
                "drift.offset-b",
                &[cert.r_eps],
            ),
            r_max: Prov::plain(
                cert.r_max,
                "minorization.small-set-radius",
                &[cert.lambda_tilde, cert.log_b, cert.eps_alpha, cert.m_star],
            ),
            eta_tilde: Prov::log_scaled(
                cert.log_eta_tilde,
                "minorization.eta",
                &[cert.r_max, cert.dim as f64],
            ),
            vacuous: cert.vacuous,
            m_star: cert.m_star,
            norm_quality: cert.norm_quality,
            drift_fn: crate::drift::DRIFT_FN_DESCR,
            small_set_measure: crate::drift::NU_DESCR,
            small_set_radius: cert.small_set_radius,
        }
    }
}

/// Rate bounds wrapped with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct RatesReportJson {
    pub upper_t_r: Prov,
    pub r_star: f64,
    pub a_const: Prov,
    pub alpha_tilde: Prov,
    pub upper_vacuous: bool,
    pub m_coefficient: Prov,
    pub lower_bounds: Vec<LowerBoundJson>,
    pub norm_quality: crate::target::NormQuality,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundJson {
    pub method: &'static str,
    pub bound: Prov,
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub note: String,
}

impl RatesReportJson {
    pub fn from_report(report: &RateReport) -> Self {
        let u = &report.upper;
        RatesReportJson {
            upper_t_r: Prov::plain(
                u.t_r,
                "rates.coupling-upper",
                &[u.r_star, u.log_a, u.log_alpha_tilde],
            ),
            r_star: u.r_star,
            a_const: Prov::log_scaled(u.log_a, "rates.coupling-A", &[u.log_a]),
            alpha_tilde: Prov::plain(
                u.alpha_tilde,
                "rates.coupling-alpha",
                &[u.log_alpha_tilde],
            ),
            upper_vacuous: u.vacuous,
            m_coefficient: Prov::log_scaled(
                report.log_m_coefficient,
                "rates.m-coefficient",
                &[report.log_m_coefficient],
            ),
            lower_bounds: report
                .lower_bounds
                .iter()
                .map(|lb| LowerBoundJson {
                    method: lb.method.as_str(),
                    bound: Prov::plain(
                        lb.value,
                        match lb.method {
                            crate::rates::LowerBoundMethod::Acceptance => "rates.lower-acceptance",
                            crate::rates::LowerBoundMethod::BoundedProposal => {
                                "rates.lower-bounded-proposal"
                            }
                            crate::rates::LowerBoundMethod::Mode => "rates.lower-mode",
                            crate::rates::LowerBoundMethod::SpectralDirichlet => {
                                "rates.lower-spectral-dirichlet"
                            }
                            crate::rates::LowerBoundMethod::SpectralConductance => {
                                "rates.lower-spectral-conductance"
                            }
                        },
                        &[lb.value],
                    ),
                    vacuous: lb.vacuous,
                    std_error: lb.std_error,
                    note: lb.note.clone(),
                })
                .collect(),
            norm_quality: report.norm_quality,
        }
    }
}

/// Top-level report envelope.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema_version: u32,
    pub kind: &'static str,
    pub seed: u64,
    pub payload: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(kind: &'static str, seed: u64, payload: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            seed,
            payload,
        }
    }
}

/// Serialize deterministically (pretty, trailing newline).
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Write a JSON report file.
pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, to_json_bytes(value)?)?;
    Ok(())
}
