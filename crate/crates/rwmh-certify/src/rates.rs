//! Upper and lower bounds on the geometric rate of convergence.
//!
//! The upper bound is the coupling-style rate
//! `t_R = min over r in (0,1) of max{ (1 - eta_tilde)^r, alpha_tilde^{-(1-r)} A^r }`
//! built from the drift/minorization constants. The lower bounds come from
//! the average acceptance probability, a bound on the proposal density, the
//! behaviour at the mode, and two spectral-theory routes. Bounds are always
//! clamped into `[0, 1)` with explicit vacuity flags, never silently.

use crate::drift::DriftMinCert;
use crate::error::{Error, Result};
use crate::numeric;
use crate::proposal::{ProposalFamily, RadialProposal};
use crate::sampler;
use crate::target::{NormQuality, TargetBundle};
use serde::Serialize;

/// The optimized upper bound and its ingredients.
#[derive(Debug, Clone, Serialize)]
pub struct RosenthalUpper {
    pub t_r: f64,
    pub r_star: f64,
    pub log_a: f64,
    /// `exp(log_a)` when representable.
    pub a: Option<f64>,
    pub log_alpha_tilde: f64,
    pub alpha_tilde: f64,
    pub vacuous: bool,
}

/// `A = 1 + (4 lambda b + 2 lambda eps_alpha)/(1 - lambda) + 2b` in log space.
fn log_a_const(lambda: f64, log_b: f64, eps_alpha: f64) -> f64 {
    let ln_one_minus = (1.0 - lambda).ln();
    numeric::ln_sum_exp(&[
        0.0,
        (4.0 * lambda).ln() + log_b - ln_one_minus,
        (2.0 * lambda * eps_alpha).ln() - ln_one_minus,
        std::f64::consts::LN_2 + log_b,
    ])
}

/// `alpha_tilde = (1 + d) / (1 + 2b + lambda d)` with
/// `d = (2b + eps_alpha)/(1 - lambda)`. The difference between numerator and
/// denominator is exactly `eps_alpha`, which gives the cancellation-free form
/// `alpha_tilde = 1 + eps_alpha / (1 + 2b + lambda d)`.
fn log_alpha_tilde_const(lambda: f64, log_b: f64, eps_alpha: f64) -> f64 {
    let ln_one_minus = (1.0 - lambda).ln();
    let ln_d = numeric::ln_add_exp(std::f64::consts::LN_2 + log_b, eps_alpha.ln()) - ln_one_minus;
    let ln_denom = numeric::ln_sum_exp(&[
        0.0,
        std::f64::consts::LN_2 + log_b,
        lambda.ln() + ln_d,
    ]);
    (eps_alpha.ln() - ln_denom).exp().ln_1p()
}

/// Optimize `max{(1 - eta)^r, alpha^{-(1-r)} A^r}` over `r` in `(0, 1)`,
/// given the logs of `A` and `alpha_tilde`.
///
/// When the two terms cross inside the interval the crossing point
/// `r* = log(alpha) / (log(alpha) + log(A) - log(1 - eta))` is optimal;
/// otherwise the objective is evaluated at `r = 1e-6` and `r = 1 - 1e-6`.
pub fn optimize_rate(eta_tilde: f64, log_a: f64, log_alpha_tilde: f64) -> (f64, f64, bool) {
    let ln_one_minus_eta = (-eta_tilde).ln_1p(); // -inf when eta = 1
    let ln_value = |r: f64| -> f64 {
        let t1 = if eta_tilde >= 1.0 {
            f64::NEG_INFINITY
        } else {
            r * ln_one_minus_eta
        };
        let t2 = -(1.0 - r) * log_alpha_tilde + r * log_a;
        t1.max(t2)
    };
    let mut candidates = vec![1e-6, 1.0 - 1e-6];
    let denom = log_alpha_tilde + log_a - ln_one_minus_eta;
    if denom.is_finite() && denom != 0.0 {
        let r_star = log_alpha_tilde / denom;
        if r_star > 0.0 && r_star < 1.0 {
            candidates.push(r_star);
        }
    }
    let (best_r, best_ln) = candidates
        .into_iter()
        .map(|r| (r, ln_value(r)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let t_r = best_ln.exp();
    (t_r, best_r, !(t_r < 1.0))
}

/// Convenience entry point on plain `(eta_tilde, A, alpha_tilde)` triples.
pub fn optimize_rate_plain(eta_tilde: f64, a: f64, alpha_tilde: f64) -> (f64, f64, bool) {
    optimize_rate(eta_tilde, a.ln(), alpha_tilde.ln())
}

/// Upper bound on the rate from the certificate constants.
pub fn rosenthal_upper(
    eta_tilde: f64,
    lambda_tilde: f64,
    log_b: f64,
    eps_alpha: f64,
) -> Result<RosenthalUpper> {
    if !(lambda_tilde < 1.0) {
        return Err(Error::DriftFactorDegenerate);
    }
    if !(lambda_tilde > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda_tilde",
            value: lambda_tilde,
            constraint: "0 < lambda_tilde < 1",
        });
    }
    if !(0.0..=1.0).contains(&eta_tilde) {
        return Err(Error::InvalidParameter {
            name: "eta_tilde",
            value: eta_tilde,
            constraint: "0 <= eta_tilde <= 1",
        });
    }
    if !(eps_alpha > 0.0 && eps_alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps_alpha",
            value: eps_alpha,
            constraint: "0 < eps_alpha < 1",
        });
    }
    let log_a = log_a_const(lambda_tilde, log_b, eps_alpha);
    let log_alpha = log_alpha_tilde_const(lambda_tilde, log_b, eps_alpha);
    let (t_r, r_star, vacuous) = optimize_rate(eta_tilde, log_a, log_alpha);
    Ok(RosenthalUpper {
        t_r,
        r_star,
        log_a,
        a: Some(log_a.exp()).filter(|v| v.is_finite()),
        log_alpha_tilde: log_alpha,
        alpha_tilde: log_alpha.exp(),
        vacuous,
    })
}

/// Upper bound straight from a certificate.
pub fn rosenthal_upper_from_cert(cert: &DriftMinCert) -> Result<RosenthalUpper> {
    rosenthal_upper(
        cert.eta_tilde.min(1.0),
        cert.lambda_tilde,
        cert.log_b,
        cert.eps_alpha,
    )
}

/// Multiplicative coefficient `2 + b/(1 - lambda) + f(x)^{-1/2}`.
pub fn m_coefficient(lambda_tilde: f64, b: f64, f_at_x: f64) -> Result<f64> {
    if !(lambda_tilde > 0.0 && lambda_tilde < 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda_tilde",
            value: lambda_tilde,
            constraint: "0 < lambda_tilde < 1",
        });
    }
    if !(b > 0.0) || !(f_at_x > 0.0) {
        return Err(Error::InvalidParameter {
            name: "b, f_at_x",
            value: b.min(f_at_x),
            constraint: "b > 0 and f(x) > 0",
        });
    }
    Ok(2.0 + b / (1.0 - lambda_tilde) + f_at_x.powf(-0.5))
}

/// Log-space variant used by report assembly, where `b` may overflow.
pub fn log_m_coefficient(lambda_tilde: f64, log_b: f64, log_f_at_x: f64) -> f64 {
    numeric::ln_sum_exp(&[
        std::f64::consts::LN_2,
        log_b - (1.0 - lambda_tilde).ln(),
        -0.5 * log_f_at_x,
    ])
}

/// Lower-bound methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundMethod {
    Acceptance,
    BoundedProposal,
    Mode,
    SpectralDirichlet,
    SpectralConductance,
}

impl LowerBoundMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            LowerBoundMethod::Acceptance => "acceptance",
            LowerBoundMethod::BoundedProposal => "bounded-proposal",
            LowerBoundMethod::Mode => "mode",
            LowerBoundMethod::SpectralDirichlet => "spectral-dirichlet",
            LowerBoundMethod::SpectralConductance => "spectral-conductance",
        }
    }
}

/// One lower bound with its provenance notes.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundEntry {
    pub method: LowerBoundMethod,
    pub value: f64,
    /// A lower bound clamped at zero carries no information.
    pub vacuous: bool,
    pub std_error: Option<f64>,
    pub note: String,
}

fn clamp_lower(raw: f64, se: Option<f64>, method: LowerBoundMethod, note: String) -> LowerBoundEntry {
    let value = raw.clamp(0.0, 1.0 - f64::EPSILON);
    LowerBoundEntry {
        method,
        value,
        vacuous: !(raw > 0.0),
        std_error: se,
        note,
    }
}

/// Candidate states for the acceptance bound: the mode plus scaled axis
/// vectors around it.
pub fn default_candidates(bundle: &TargetBundle) -> Vec<Vec<f64>> {
    let p = bundle.dim();
    let mode = bundle.mode();
    let scale = numeric::norm(mode).max(1.0);
    let mut out = vec![mode.to_vec()];
    for axis in 0..p {
        for step in [1.0, 2.0, 4.0, 8.0] {
            for sign in [1.0, -1.0] {
                let mut x = mode.to_vec();
                x[axis] += sign * step * scale;
                out.push(x);
            }
        }
    }
    out
}

/// Acceptance-probability lower bound: `1 - min over candidates of
/// alpha_hat(x)`. The candidate minimum only approximates the infimum, so
/// undersampling can only weaken the reported bound.
pub fn acceptance_lower(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    candidates: &[Vec<f64>],
    n_mc: usize,
    seed: u64,
) -> Result<LowerBoundEntry> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter {
            name: "candidates",
            value: 0.0,
            constraint: "non-empty candidate set",
        });
    }
    if n_mc < 10_000 {
        return Err(Error::InvalidParameter {
            name: "n_mc",
            value: n_mc as f64,
            constraint: "n_mc >= 10^4",
        });
    }
    let mut best = f64::INFINITY;
    let mut best_se = 0.0;
    for (i, x) in candidates.iter().enumerate() {
        let (a, se) = sampler::estimate_acceptance(bundle, prop, x, n_mc, seed ^ (i as u64 + 1));
        if a < best {
            best = a;
            best_se = se;
        }
    }
    Ok(clamp_lower(
        1.0 - best,
        Some(best_se),
        LowerBoundMethod::Acceptance,
        "candidate-set lower bound; the candidate minimum approximates the infimum".into(),
    ))
}

/// Bounded-proposal lower bound with the global bound `B(x) = q(0)`:
/// `max over candidates of 1 - q(0)/f(x)`, floored at zero.
pub fn bounded_proposal_lower(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    candidates: &[Vec<f64>],
) -> Result<LowerBoundEntry> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter {
            name: "candidates",
            value: 0.0,
            constraint: "non-empty candidate set",
        });
    }
    let ln_q0 = prop.radial_log_density(0.0);
    let raw = candidates
        .iter()
        .map(|x| 1.0 - (ln_q0 - bundle.target().log_density(x)).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(clamp_lower(
        raw,
        None,
        LowerBoundMethod::BoundedProposal,
        "B(x) = q(0) from the radially decreasing proposal".into(),
    ))
}

/// Mode lower bound `1 - E[f(x* + Z)] / p*`: quadrature in p <= 2, Monte
/// Carlo above.
pub fn mode_lower(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    n_mc: usize,
    seed: u64,
) -> Result<LowerBoundEntry> {
    let p = bundle.dim();
    let mode = bundle.mode().to_vec();
    let lx = bundle.log_p_star();
    if p <= 2 {
        let k = prop.tail_radius(1e-13)?;
        let integrand = |z: &[f64]| {
            let y: Vec<f64> = mode.iter().zip(z).map(|(m, zi)| m + zi).collect();
            (bundle.target().log_density(&y) + prop.radial_log_density(numeric::norm(z))).exp()
        };
        let rect = numeric::BoxRect::new(vec![-k; p], vec![k; p])?;
        let integral = numeric::cubature_box(&integrand, &rect, 1e-12);
        let raw = 1.0 - integral / lx.exp();
        Ok(clamp_lower(
            raw,
            None,
            LowerBoundMethod::Mode,
            "quadrature of the density-proposal convolution at the mode".into(),
        ))
    } else {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let mut samples = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            let z = prop.sample_increment(&mut rng);
            let y: Vec<f64> = mode.iter().zip(&z).map(|(m, zi)| m + zi).collect();
            samples.push((bundle.target().log_density(&y) - lx).exp());
        }
        let (mean, se) = numeric::mean_and_se(&samples);
        Ok(clamp_lower(
            1.0 - mean,
            Some(se),
            LowerBoundMethod::Mode,
            "Monte Carlo estimate of E[f(mode + Z)] / p*".into(),
        ))
    }
}

/// Spectral bound flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMode {
    Dirichlet,
    Conductance,
}

/// Spectral-theory lower bounds.
///
/// * Dirichlet flavor: `1 - (1/2) L p exp(-V(0)) / J^{p/2 + 1}` where
///   `V = -log q` and `J` is the proposal's strong-convexity constant (or
///   `V''(0)` when `V''' >= 0`).
/// * Conductance flavor: `1 - (2 pi)^{p/2} exp(-V(0)) / (m + m1)^{p/2}`,
///   valid only when that quantity is below one.
pub fn spectral_lower(
    mode: SpectralMode,
    m: f64,
    m1: f64,
    l: f64,
    p: usize,
    v_dagger_0: f64,
    j_tilde: f64,
) -> Result<f64> {
    let pf = p as f64;
    match mode {
        SpectralMode::Dirichlet => {
            if !(l > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "L",
                    value: l,
                    constraint: "L > 0",
                });
            }
            if !(j_tilde > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "J_tilde",
                    value: j_tilde,
                    constraint: "J_tilde > 0",
                });
            }
            let gap = 0.5 * l * pf * (-v_dagger_0).exp() / j_tilde.powf(0.5 * pf + 1.0);
            Ok((1.0 - gap).max(0.0))
        }
        SpectralMode::Conductance => {
            if m1 <= -m {
                return Err(Error::ConvexitySum { m, m1 });
            }
            let value = (2.0 * std::f64::consts::PI).powf(0.5 * pf) * (-v_dagger_0).exp()
                / (m + m1).powf(0.5 * pf);
            if !(value < 1.0) {
                return Err(Error::ConductanceValidity { value });
            }
            Ok((1.0 - value).max(0.0))
        }
    }
}

/// Proposal-side spectral constants `(m1, V(0), J_tilde)`, available when
/// `-log q` is strongly convex along rays (the Gaussian family).
pub fn spectral_proposal_constants(prop: &RadialProposal) -> Option<(f64, f64, f64)> {
    match prop.family() {
        ProposalFamily::Gaussian { sigma } => {
            let m1 = 1.0 / (sigma * sigma);
            let v0 = -prop.radial_log_density(0.0);
            Some((m1, v0, m1))
        }
        ProposalFamily::Laplace { .. } => None,
    }
}

/// Target-side strong convexity constants supplied by the caller.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralTargetInfo {
    /// Strong-convexity constant of `-log f`.
    pub m: f64,
    /// Lipschitz constant of `grad(-log f)`.
    pub l: f64,
}

/// Options for assembling a [`RateReport`].
#[derive(Debug, Clone)]
pub struct RateReportOptions {
    pub candidates: Option<Vec<Vec<f64>>>,
    pub n_mc: usize,
    pub seed: u64,
    /// Present when the target is strongly log-concave with known constants;
    /// enables the spectral bounds.
    pub spectral: Option<SpectralTargetInfo>,
}

impl Default for RateReportOptions {
    fn default() -> Self {
        Self {
            candidates: None,
            n_mc: 100_000,
            seed: 0,
            spectral: None,
        }
    }
}

/// Combined rate report: the optimized upper bound, every applicable lower
/// bound, and the multiplicative coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub upper: RosenthalUpper,
    pub lower_bounds: Vec<LowerBoundEntry>,
    /// `2 + b/(1 - lambda_tilde)`, materialized when finite.
    pub m_coefficient: Option<f64>,
    pub log_m_coefficient: f64,
    pub norm_quality: NormQuality,
}

/// Assemble the full report from a certificate.
pub fn assemble_rate_report(
    cert: &DriftMinCert,
    bundle: &TargetBundle,
    prop: &RadialProposal,
    opts: &RateReportOptions,
) -> Result<RateReport> {
    let upper = rosenthal_upper_from_cert(cert)?;
    let candidates = opts
        .candidates
        .clone()
        .unwrap_or_else(|| default_candidates(bundle));
    let mut lower_bounds = vec![
        acceptance_lower(bundle, prop, &candidates, opts.n_mc, opts.seed)?,
        bounded_proposal_lower(bundle, prop, &candidates)?,
        mode_lower(bundle, prop, opts.n_mc, opts.seed ^ 0x6d6f6465)?,
    ];
    if let Some(info) = opts.spectral {
        if let Some((m1, v0, j_tilde)) = spectral_proposal_constants(prop) {
            let d = spectral_lower(SpectralMode::Dirichlet, info.m, m1, info.l, cert.dim, v0, j_tilde)?;
            lower_bounds.push(clamp_lower(
                d,
                None,
                LowerBoundMethod::SpectralDirichlet,
                format!("L={}, J_tilde={j_tilde}", info.l),
            ));
            let c = spectral_lower(SpectralMode::Conductance, info.m, m1, info.l, cert.dim, v0, j_tilde)?;
            lower_bounds.push(clamp_lower(
                c,
                None,
                LowerBoundMethod::SpectralConductance,
                format!("m={}, m1={m1}", info.m),
            ));
        }
    }
    let log_mc = numeric::ln_add_exp(
        std::f64::consts::LN_2,
        cert.log_b - (1.0 - cert.lambda_tilde).ln(),
    );
    Ok(RateReport {
        upper,
        lower_bounds,
        m_coefficient: Some(log_mc.exp()).filter(|v| v.is_finite()),
        log_m_coefficient: log_mc,
        norm_quality: cert.norm_quality,
    })
}

/// Write the lower-bound table as CSV: `method, value, metadata`.
pub fn write_bounds_csv<W: std::io::Write>(writer: W, report: &RateReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "value", "metadata"])?;
    for lb in &report.lower_bounds {
        let mut meta = lb.note.clone();
        if let Some(se) = lb.std_error {
            meta = format!("{meta}; se={se:.3e}");
        }
        if lb.vacuous {
            meta = format!("{meta}; vacuous");
        }
        w.write_record([lb.method.as_str(), &format!("{:.12}", lb.value), &meta])?;
    }
    let upper_meta = format!(
        "r_star={:.6}; log_A={:.6e}; alpha_tilde={:.12}{}",
        report.upper.r_star,
        report.upper.log_a,
        report.upper.alpha_tilde,
        if report.upper.vacuous { "; vacuous" } else { "" }
    );
    w.write_record([
        "upper-coupling",
        &format!("{:.12}", report.upper.t_r),
        &upper_meta,
    ])?;
    w.flush()?;
    Ok(())
}
