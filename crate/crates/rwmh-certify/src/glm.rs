//! Exponential-family and GLM posteriors with per-model constants.
//!
//! The posterior shape handled here is
//! `log f(theta | y, x) = sum_i <Pi(theta, x_i), T(y_i)> - sum_i c(theta, x_i) - g(theta) + const`
//! with a prior potential `g` that is either strongly convex or dissipative.
//! [`glm_constants`] turns bounds on the model pieces into the certificate
//! constants (`C1`, `K1..K3`, `M'_p`); [`logistic_preset`] and
//! [`poisson_preset`] wire complete pipelines for the two stock models.
//!
//! Normalizing constants are estimated (Laplace by default, quadrature for
//! p <= 2) and all downstream reports carry the `approximate` flag.

use crate::drift::{drift_certificate, DriftMinCert};
use crate::error::{Error, Result};
use crate::geometry::ConeParams;
use crate::numeric;
use crate::proposal::RadialProposal;
use crate::rates::{assemble_rate_report, RateReport, RateReportOptions};
use crate::target::{
    find_mode, laplace_log_norm, quadrature_log_norm, CurvatureCert, DensityFn, EnvelopeFn,
    GradientFn, HessianFn, LogTarget, NormQuality, RadialFn, SuperexpCert, TargetBundle,
};
use serde::Serialize;
use std::sync::Arc;

/// Observed data: covariate rows `x_i` and statistic rows `T(y_i)`.
#[derive(Debug, Clone)]
pub struct GlmData {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    pub n: usize,
    pub p: usize,
    pub m: usize,
}

impl GlmData {
    pub fn new(x: Vec<Vec<f64>>, t: Vec<Vec<f64>>) -> Result<Self> {
        if x.len() != t.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: t.len(),
                context: "GlmData rows",
            });
        }
        let n = x.len();
        let p = x.first().map(|r| r.len()).unwrap_or(0);
        let m = t.first().map(|r| r.len()).unwrap_or(0);
        for (row, xi) in x.iter().enumerate() {
            if xi.len() != p || xi.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset {
                    row: row + 1,
                    message: "covariate row has wrong arity or non-finite entries".into(),
                });
            }
        }
        for (row, ti) in t.iter().enumerate() {
            if ti.len() != m || ti.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset {
                    row: row + 1,
                    message: "statistic row has wrong arity or non-finite entries".into(),
                });
            }
        }
        Ok(Self { x, t, n, p, m })
    }

    /// A dataset with no observations but known arities.
    pub fn empty(p: usize, m: usize) -> Self {
        Self {
            x: vec![],
            t: vec![],
            n: 0,
            p,
            m,
        }
    }

    /// Read `y, x1..xp` rows (header required, UTF-8, decimal points).
    /// `T(y) = y`, so `m = 1`. Non-finite entries are rejected with their
    /// row number.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        {
            let headers = rdr.headers()?;
            if headers.len() < 2 || headers.get(0) != Some("y") {
                return Err(Error::Dataset {
                    row: 0,
                    message: "header must be y,x1..xp".into(),
                });
            }
            for (i, h) in headers.iter().enumerate().skip(1) {
                if h != format!("x{i}") {
                    return Err(Error::Dataset {
                        row: 0,
                        message: format!("unexpected column {h:?}; header must be y,x1..xp"),
                    });
                }
            }
        }
        let mut x = Vec::new();
        let mut t = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let row = idx + 1;
            let parse = |s: &str| -> Result<f64> {
                let v: f64 = s.trim().parse().map_err(|_| Error::Dataset {
                    row,
                    message: format!("cannot parse {s:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Dataset {
                        row,
                        message: format!("non-finite value {s:?}"),
                    });
                }
                Ok(v)
            };
            let y = parse(record.get(0).unwrap_or(""))?;
            let xs: Vec<f64> = record
                .iter()
                .skip(1)
                .map(parse)
                .collect::<Result<Vec<f64>>>()?;
            t.push(vec![y]);
            x.push(xs);
        }
        GlmData::new(x, t)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn y_scalar(&self) -> Vec<f64> {
        self.t.iter().map(|row| row[0]).collect()
    }
}

/// Prior regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PriorKind {
    StronglyConvex { lambda1: f64 },
    Dissipative { a_dag: f64, b_dag: f64 },
}

/// Prior potential `g` with its gradient, Lipschitz constant of the
/// gradient, and convexity regime.
#[derive(Clone)]
pub struct PriorSpec {
    pub g: DensityFn,
    pub grad_g: GradientFn,
    pub hess_g: Option<HessianFn>,
    pub lambda2: f64,
    pub kind: PriorKind,
}

impl PriorSpec {
    /// Standard normal prior: `g = ||theta||^2 / 2`.
    pub fn standard_normal(p: usize) -> Self {
        let _ = p;
        Self::isotropic_gaussian(1.0)
    }

    /// Isotropic Gaussian prior with potential `lambda1 ||theta||^2 / 2`.
    pub fn isotropic_gaussian(lambda1: f64) -> Self {
        assert!(lambda1 > 0.0);
        Self {
            g: Arc::new(move |t: &[f64]| 0.5 * lambda1 * t.iter().map(|v| v * v).sum::<f64>()),
            grad_g: Arc::new(move |t: &[f64]| t.iter().map(|v| lambda1 * v).collect()),
            hess_g: Some(Arc::new(move |t: &[f64]| {
                let p = t.len();
                let mut h = vec![0.0; p * p];
                for i in 0..p {
                    h[i * p + i] = lambda1;
                }
                h
            })),
            lambda2: lambda1,
            kind: PriorKind::StronglyConvex { lambda1 },
        }
    }

    /// The superexponential rate constant: `lambda1` or `a_dag`.
    pub fn gamma(&self) -> f64 {
        match self.kind {
            PriorKind::StronglyConvex { lambda1 } => lambda1,
            PriorKind::Dissipative { a_dag, .. } => a_dag,
        }
    }

    /// Spot-check the Lipschitz constant of the gradient on sampled pairs.
    pub fn check_lipschitz(&self, p: usize, n_pairs: usize, seed: u64) -> f64 {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, 0);
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..n_pairs {
            let a: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
            let d = numeric::dist(&a, &b);
            if d < 1e-9 {
                continue;
            }
            let ga = (self.grad_g)(&a);
            let gb = (self.grad_g)(&b);
            worst_ratio = worst_ratio.max(numeric::dist(&ga, &gb) / d);
        }
        worst_ratio
    }
}

/// Which bound on the cumulant `c(., x)` is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CumulantCase {
    /// `|grad c(theta, x_i)| <= K` for all theta, i.
    BoundedGradient,
    /// `c(., x)` convex with `0 <= hess c <= K I`.
    ConvexBoundedCurvature,
}

/// Model pieces as closures of `(theta, x)`.
#[derive(Clone)]
pub struct GlmFamily {
    /// `Pi(theta, x) in R^m`.
    pub pi: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    /// `grad_theta <Pi(theta, x), t>`.
    pub grad_pi_dot: Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    /// Cumulant `c(theta, x)`.
    pub c: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    pub grad_c: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
}

/// The per-model constant set feeding the certificate pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct GlmConstants {
    pub lambda_data: f64,
    pub k_data: f64,
    pub cumulant_case: CumulantCase,
    pub c1: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub gamma: f64,
    pub eta: f64,
    pub lambda2: f64,
    pub j_tilde: f64,
    pub mp_prime: f64,
}

impl GlmConstants {
    /// The quadratic envelope `f_{x,y}(u) = K1 + K2 u + K3 u^2`.
    pub fn f_xy(&self, u: f64) -> f64 {
        self.k1 + self.k2 * u + self.k3 * u * u
    }
}

/// Assemble the constants from data-level bounds.
///
/// `lambda_data` bounds the spectral norm of `grad Pi`, `k_data` the
/// cumulant (gradient or curvature, per `case`). The `C1` expression is
/// selected by the `(case, prior.kind)` pair; `K1..K3` come from the
/// quadratic envelope of the log-posterior; `M'_p` needs
/// `eta < gamma / lambda2`.
pub fn glm_constants(
    family: &GlmFamily,
    data: &GlmData,
    prior: &PriorSpec,
    lambda_data: f64,
    k_data: f64,
    case: CumulantCase,
    eta: f64,
) -> Result<GlmConstants> {
    let gamma = prior.gamma();
    if !(eta > 0.0 && eta * prior.lambda2 < gamma) {
        return Err(Error::CurvatureMargin {
            eta,
            lambda2: prior.lambda2,
            gamma,
        });
    }
    let zero = vec![0.0; data.p];
    let sum_t: f64 = data.t.iter().map(|t| numeric::norm(t)).sum();
    let max_pi0 = data
        .x
        .iter()
        .map(|x| numeric::norm(&(family.pi)(&zero, x)))
        .fold(0.0f64, f64::max);
    let max_c0 = data
        .x
        .iter()
        .map(|x| (family.c)(&zero, x).abs())
        .fold(0.0f64, f64::max);
    let max_grad_c0 = data
        .x
        .iter()
        .map(|x| numeric::norm(&(family.grad_c)(&zero, x)))
        .fold(0.0f64, f64::max);
    let g0 = (prior.g)(&zero).abs();
    let grad_g0 = numeric::norm(&(prior.grad_g)(&zero));
    let nf = data.n as f64;

    let prior_tail = match prior.kind {
        PriorKind::StronglyConvex { .. } => grad_g0,
        PriorKind::Dissipative { b_dag, .. } => b_dag,
    };
    let c1 = match case {
        CumulantCase::BoundedGradient => lambda_data * sum_t + nf * k_data + prior_tail,
        CumulantCase::ConvexBoundedCurvature => {
            lambda_data * sum_t + nf * max_grad_c0 + prior_tail
        }
    };
    let k1 = max_pi0 * sum_t + nf * max_c0 + g0;
    let (k2, k3) = match case {
        CumulantCase::BoundedGradient => {
            (lambda_data * sum_t + k_data + grad_g0, prior.lambda2 / 2.0)
        }
        CumulantCase::ConvexBoundedCurvature => (
            lambda_data * sum_t + max_grad_c0 + grad_g0,
            (prior.lambda2 + k_data) / 2.0,
        ),
    };
    let j_tilde = match case {
        CumulantCase::BoundedGradient => nf * k_data,
        CumulantCase::ConvexBoundedCurvature => nf * max_grad_c0 + nf * k_data,
    };
    let mp_prime = ((c1 + lambda_data * sum_t + j_tilde + grad_g0) / (gamma - eta * prior.lambda2))
        .max(1.0);
    Ok(GlmConstants {
        lambda_data,
        k_data,
        cumulant_case: case,
        c1,
        k1,
        k2,
        k3,
        gamma,
        eta,
        lambda2: prior.lambda2,
        j_tilde,
        mp_prime,
    })
}

/// Unnormalized GLM log-posterior as a target.
pub fn glm_log_target(family: &GlmFamily, data: &GlmData, prior: &PriorSpec) -> LogTarget {
    let fam = family.clone();
    let d = data.clone();
    let prior_g = Arc::clone(&prior.g);
    let log_density: DensityFn = Arc::new(move |theta: &[f64]| {
        let mut acc = 0.0;
        for (x, t) in d.x.iter().zip(&d.t) {
            acc += numeric::dot(&(fam.pi)(theta, x), t) - (fam.c)(theta, x);
        }
        acc - prior_g(theta)
    });
    let fam = family.clone();
    let d = data.clone();
    let prior_grad = Arc::clone(&prior.grad_g);
    let p = data.p;
    let grad: GradientFn = Arc::new(move |theta: &[f64]| {
        let mut acc = vec![0.0; theta.len()];
        for (x, t) in d.x.iter().zip(&d.t) {
            let gp = (fam.grad_pi_dot)(theta, x, t);
            let gc = (fam.grad_c)(theta, x);
            for i in 0..acc.len() {
                acc[i] += gp[i] - gc[i];
            }
        }
        let pg = prior_grad(theta);
        for i in 0..acc.len() {
            acc[i] -= pg[i];
        }
        acc
    });
    LogTarget::new(p, log_density, grad)
}

/// How to obtain the normalizing constant of a posterior.
#[derive(Debug, Clone, Copy)]
pub enum NormMethod {
    /// Mode plus Hessian determinant.
    Laplace,
    /// Adaptive quadrature, p <= 2 only.
    Quadrature,
    /// A user-supplied log normalizing constant.
    Given(f64, NormQuality),
}

fn normalize_target(
    target: LogTarget,
    mode: &[f64],
    method: NormMethod,
    quad_half_width: f64,
) -> Result<LogTarget> {
    let (offset, quality) = match method {
        NormMethod::Given(c0, q) => (c0, q),
        NormMethod::Laplace => {
            let f = |x: &[f64]| target.log_density(x);
            let hess = target.hessian(mode);
            let log_z = laplace_log_norm(&f, mode, hess.as_deref())?;
            (-log_z, NormQuality::Approximate)
        }
        NormMethod::Quadrature => {
            let f = |x: &[f64]| target.log_density(x);
            let hw = vec![quad_half_width; mode.len()];
            let log_z = quadrature_log_norm(&f, mode, &hw)?;
            (-log_z, NormQuality::Approximate)
        }
    };
    Ok(target.with_normalization(offset, quality))
}

/// Cumulant description for the exponential-family constructor.
#[derive(Clone)]
pub struct ExpFamCumulant {
    pub c: DensityFn,
    pub grad_c: GradientFn,
    pub hess_c: Option<HessianFn>,
    /// Non-decreasing radial bound on `|c|`.
    pub envelope: RadialFn,
}

/// Posterior for conditionally independent observations with natural
/// statistics (`T(x_i) = x_i`) under a strongly convex prior:
/// `log f = <sum x_i, theta> - n c(theta) - g(theta) + const`.
///
/// Certificates: `f_s(u) = lambda1 u`,
/// `C1 = sum ||x_i|| + n |grad c(0)| + |grad g(0)|`; the envelope combines
/// the supplied cumulant bound with the prior's quadratic bound. The
/// curvature pair `(eta, m_p)` is caller-supplied (the checkers falsify bad
/// choices).
pub fn expfam_posterior(
    data: &GlmData,
    prior: &PriorSpec,
    cumulant: &ExpFamCumulant,
    eta: f64,
    m_p: f64,
    norm: NormMethod,
) -> Result<TargetBundle> {
    let lambda1 = match prior.kind {
        PriorKind::StronglyConvex { lambda1 } => lambda1,
        PriorKind::Dissipative { .. } => {
            return Err(Error::InvalidParameter {
                name: "prior",
                value: 0.0,
                constraint: "strongly convex prior",
            })
        }
    };
    if data.m != data.p {
        return Err(Error::DimensionMismatch {
            left: data.m,
            right: data.p,
            context: "expfam_posterior statistics",
        });
    }
    let p = data.p;
    let s: Vec<f64> = (0..p)
        .map(|i| data.t.iter().map(|row| row[i]).sum())
        .collect();
    let nf = data.n as f64;
    let sum_norm_x: f64 = data.t.iter().map(|row| numeric::norm(row)).sum();

    let (c, grad_c) = (Arc::clone(&cumulant.c), Arc::clone(&cumulant.grad_c));
    let prior_g = Arc::clone(&prior.g);
    let s_arc = Arc::new(s);
    let log_density: DensityFn = {
        let (c, prior_g, s) = (Arc::clone(&c), Arc::clone(&prior_g), Arc::clone(&s_arc));
        Arc::new(move |theta: &[f64]| numeric::dot(&s, theta) - nf * c(theta) - prior_g(theta))
    };
    let prior_grad = Arc::clone(&prior.grad_g);
    let grad: GradientFn = {
        let (grad_c, prior_grad, s) = (
            Arc::clone(&grad_c),
            Arc::clone(&prior_grad),
            Arc::clone(&s_arc),
        );
        Arc::new(move |theta: &[f64]| {
            let gc = grad_c(theta);
            let gg = prior_grad(theta);
            (0..theta.len())
                .map(|i| s[i] - nf * gc[i] - gg[i])
                .collect()
        })
    };
    let mut target = LogTarget::new(p, log_density, grad);
    if let (Some(hc), Some(hg)) = (cumulant.hess_c.clone(), prior.hess_g.clone()) {
        target = target.with_hessian(Arc::new(move |theta: &[f64]| {
            let a = hc(theta);
            let b = hg(theta);
            a.iter().zip(&b).map(|(x, y)| -nf * x - y).collect()
        }));
    }
    let zero = vec![0.0; p];
    let (mode, _) = find_mode(&target, &zero, 1e-10)?;
    let quad_hw = 12.0 / lambda1.sqrt();
    let target = normalize_target(target, &mode, norm, quad_hw)?;
    let offset_abs = target.log_norm_offset().abs();

    let c1 = sum_norm_x + nf * numeric::norm(&grad_c(&zero)) + numeric::norm(&(prior.grad_g)(&zero));
    let superexp = SuperexpCert::linear(lambda1, c1, 0.0);
    let g0 = (prior.g)(&zero).abs();
    let grad_g0 = numeric::norm(&(prior.grad_g)(&zero));
    let lambda2 = prior.lambda2;
    let c_env = Arc::clone(&cumulant.envelope);
    let envelope = EnvelopeFn::new(Arc::new(move |r: f64| {
        sum_norm_x * r + nf * c_env(r) + (g0 + grad_g0 * r + 0.5 * lambda2 * r * r) + offset_abs
    }));
    let curvature = CurvatureCert::new(eta, m_p)?;
    TargetBundle::new(target, envelope, superexp, curvature, &mode, 1e-8)
}

// ---------------------------------------------------------------------------
// Logistic regression preset
// ---------------------------------------------------------------------------

/// Constants of the logistic-regression pipeline.
///
/// `lambda2 = 1 + lambda_max(X^T X)/4` (curvature of the full negative log
/// posterior), `C1 = K2 = max_i ||x_i|| (n + sum_i |y_i|)`, `K1 = 0` (the
/// cumulant is centered so `c(0) = 0`), `K3 = 1`, rate `f_s(u) = u`.
#[derive(Debug, Clone, Serialize)]
pub struct LogisticConstants {
    pub n: usize,
    pub p: usize,
    pub max_norm_x: f64,
    pub sum_norm_y: f64,
    pub lambda_max_gram: f64,
    pub lambda2: f64,
    pub c1: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub gamma: f64,
    pub eta: f64,
    pub mp_prime: f64,
}

impl LogisticConstants {
    pub fn f_xy(&self, u: f64) -> f64 {
        self.k1 + self.k2 * u + self.k3 * u * u
    }
}

fn validate_binary(y: &[f64]) -> Result<()> {
    for (i, &v) in y.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Dataset {
                row: i + 1,
                message: format!("logistic response must be 0 or 1, got {v}"),
            });
        }
    }
    Ok(())
}

/// Largest eigenvalue of the Gram matrix `X^T X`.
fn lambda_max_gram(x: &[Vec<f64>], p: usize) -> f64 {
    let mut gram = vec![0.0; p * p];
    for xi in x {
        for a in 0..p {
            for b in 0..p {
                gram[a * p + b] += xi[a] * xi[b];
            }
        }
    }
    numeric::max_symmetric_eigenvalue(&gram, p)
}

/// Hand-derived constants for the logistic posterior with a standard normal
/// prior. Requires `eta < 1 / lambda2`.
pub fn logistic_constants(x: &[Vec<f64>], y: &[f64], eta: f64) -> Result<LogisticConstants> {
    validate_binary(y)?;
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
            context: "logistic data",
        });
    }
    let n = x.len();
    let p = x[0].len();
    let max_norm_x = x.iter().map(|xi| numeric::norm(xi)).fold(0.0f64, f64::max);
    let sum_norm_y: f64 = y.iter().map(|v| v.abs()).sum();
    let lam_gram = lambda_max_gram(x, p);
    let lambda2 = 1.0 + lam_gram / 4.0;
    if !(eta > 0.0 && eta < 1.0 / lambda2) {
        return Err(Error::CurvatureMargin {
            eta,
            lambda2,
            gamma: 1.0,
        });
    }
    let c1 = max_norm_x * (n as f64 + sum_norm_y);
    let mp_prime = ((c1 + max_norm_x * sum_norm_y + n as f64) / (1.0 - eta * lambda2)).max(1.0);
    Ok(LogisticConstants {
        n,
        p,
        max_norm_x,
        sum_norm_y,
        lambda_max_gram: lam_gram,
        lambda2,
        c1,
        k1: 0.0,
        k2: c1,
        k3: 1.0,
        gamma: 1.0,
        eta,
        mp_prime,
    })
}

/// Bundle for the logistic posterior (standard normal prior), normalized by
/// quadrature for p <= 2 and by Laplace above.
pub fn logistic_bundle(x: &[Vec<f64>], y: &[f64], eta: f64) -> Result<TargetBundle> {
    let consts = logistic_constants(x, y, eta)?;
    let p = consts.p;
    let n = consts.n;
    let xd: Arc<Vec<Vec<f64>>> = Arc::new(x.to_vec());
    let yd: Arc<Vec<f64>> = Arc::new(y.to_vec());
    let log_density: DensityFn = {
        let (xd, yd) = (Arc::clone(&xd), Arc::clone(&yd));
        Arc::new(move |theta: &[f64]| {
            let mut acc = 0.0;
            for (xi, &yi) in xd.iter().zip(yd.iter()) {
                let t = numeric::dot(xi, theta);
                // log(1 + e^t) without overflow.
                let log1pexp = t.max(0.0) + (-(t.abs())).exp().ln_1p();
                acc += yi * t - log1pexp;
            }
            acc - 0.5 * theta.iter().map(|v| v * v).sum::<f64>()
        })
    };
    let grad: GradientFn = {
        let (xd, yd) = (Arc::clone(&xd), Arc::clone(&yd));
        Arc::new(move |theta: &[f64]| {
            let mut acc: Vec<f64> = theta.iter().map(|v| -v).collect();
            for (xi, &yi) in xd.iter().zip(yd.iter()) {
                let t = numeric::dot(xi, theta);
                let sig = 1.0 / (1.0 + (-t).exp());
                for i in 0..acc.len() {
                    acc[i] += (yi - sig) * xi[i];
                }
            }
            acc
        })
    };
    let hessian: HessianFn = {
        let xd = Arc::clone(&xd);
        Arc::new(move |theta: &[f64]| {
            let p = theta.len();
            let mut h = vec![0.0; p * p];
            for i in 0..p {
                h[i * p + i] = -1.0;
            }
            for xi in xd.iter() {
                let t = numeric::dot(xi, theta);
                let sig = 1.0 / (1.0 + (-t).exp());
                let w = sig * (1.0 - sig);
                for a in 0..p {
                    for b in 0..p {
                        h[a * p + b] -= w * xi[a] * xi[b];
                    }
                }
            }
            h
        })
    };
    let target = LogTarget::new(p, log_density, grad).with_hessian(hessian);
    let zero = vec![0.0; p];
    let (mode, _) = find_mode(&target, &zero, 1e-10)?;
    let method = if p <= 2 {
        NormMethod::Quadrature
    } else {
        NormMethod::Laplace
    };
    let target = normalize_target(target, &mode, method, 12.0)?;
    let offset_abs = target.log_norm_offset().abs();
    let envelope_shift = n as f64 * std::f64::consts::LN_2 + offset_abs;
    let cc = consts.clone();
    let envelope = EnvelopeFn::new(Arc::new(move |r: f64| cc.f_xy(r) + envelope_shift));
    let superexp = SuperexpCert::linear(1.0, consts.c1, 0.0);
    let curvature = CurvatureCert::new(consts.eta, consts.mp_prime)?;
    TargetBundle::new(target, envelope, superexp, curvature, &mode, 1e-8)
}

/// Output of the logistic pipeline.
#[derive(Clone)]
pub struct LogisticPreset {
    pub constants: LogisticConstants,
    pub bundle: TargetBundle,
    pub cert: DriftMinCert,
    pub rates: RateReport,
}

/// Run the full logistic pipeline: constants, certificate, rate report.
pub fn logistic_preset(
    x: &[Vec<f64>],
    y: &[f64],
    prop: &RadialProposal,
    eta: f64,
    n_mc: usize,
    seed: u64,
) -> Result<LogisticPreset> {
    let constants = logistic_constants(x, y, eta)?;
    let bundle = logistic_bundle(x, y, eta)?;
    let params = ConeParams::for_curvature(eta)?;
    let cert = drift_certificate(&bundle, prop, &params)?;
    let rates = assemble_rate_report(
        &cert,
        &bundle,
        prop,
        &RateReportOptions {
            candidates: None,
            n_mc,
            seed,
            spectral: None,
        },
    )?;
    Ok(LogisticPreset {
        constants,
        bundle,
        cert,
        rates,
    })
}

// ---------------------------------------------------------------------------
// Poisson regression preset
// ---------------------------------------------------------------------------

/// Bundle for the Poisson-regression posterior under a strongly convex
/// isotropic Gaussian prior.
pub fn poisson_bundle(x: &[Vec<f64>], y: &[f64], prior: &PriorSpec) -> Result<TargetBundle> {
    let lambda1 = match prior.kind {
        PriorKind::StronglyConvex { lambda1 } => lambda1,
        PriorKind::Dissipative { .. } => {
            return Err(Error::InvalidParameter {
                name: "prior",
                value: 0.0,
                constraint: "strongly convex prior",
            })
        }
    };
    for (i, &v) in y.iter().enumerate() {
        if !(v >= 0.0 && v.fract() == 0.0 && v.is_finite()) {
            return Err(Error::Dataset {
                row: i + 1,
                message: format!("Poisson response must be a non-negative count, got {v}"),
            });
        }
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
            context: "poisson data",
        });
    }
    let p = x[0].len();
    let n = x.len();
    let xd: Arc<Vec<Vec<f64>>> = Arc::new(x.to_vec());
    let yd: Arc<Vec<f64>> = Arc::new(y.to_vec());
    let prior_g = Arc::clone(&prior.g);
    let log_density: DensityFn = {
        let (xd, yd, prior_g) = (Arc::clone(&xd), Arc::clone(&yd), Arc::clone(&prior_g));
        Arc::new(move |theta: &[f64]| {
            let mut acc = 0.0;
            for (xi, &yi) in xd.iter().zip(yd.iter()) {
                let t = numeric::dot(xi, theta);
                acc += yi * t - t.exp();
            }
            acc - prior_g(theta)
        })
    };
    let prior_grad = Arc::clone(&prior.grad_g);
    let grad: GradientFn = {
        let (xd, yd, prior_grad) = (Arc::clone(&xd), Arc::clone(&yd), Arc::clone(&prior_grad));
        Arc::new(move |theta: &[f64]| {
            let mut acc: Vec<f64> = prior_grad(theta).iter().map(|v| -v).collect();
            for (xi, &yi) in xd.iter().zip(yd.iter()) {
                let t = numeric::dot(xi, theta);
                let w = yi - t.exp();
                for i in 0..acc.len() {
                    acc[i] += w * xi[i];
                }
            }
            acc
        })
    };
    let mut target = LogTarget::new(p, log_density, grad);
    if let Some(hg) = prior.hess_g.clone() {
        let xd2 = Arc::clone(&xd);
        target = target.with_hessian(Arc::new(move |theta: &[f64]| {
            let p = theta.len();
            let mut h: Vec<f64> = hg(theta).iter().map(|v| -v).collect();
            for xi in xd2.iter() {
                let w = numeric::dot(xi, theta).exp();
                for a in 0..p {
                    for b in 0..p {
                        h[a * p + b] -= w * xi[a] * xi[b];
                    }
                }
            }
            h
        }));
    }
    let zero = vec![0.0; p];
    let (mode, _) = find_mode(&target, &zero, 1e-10)?;
    let method = if p <= 2 {
        NormMethod::Quadrature
    } else {
        NormMethod::Laplace
    };
    let target = normalize_target(target, &mode, method, 12.0 / lambda1.sqrt())?;
    let offset_abs = target.log_norm_offset().abs();

    let sum_yx: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| yi * numeric::norm(xi))
        .sum();
    let max_norm_x = x.iter().map(|xi| numeric::norm(xi)).fold(0.0f64, f64::max);
    let grad_g0 = numeric::norm(&(prior.grad_g)(&zero));
    let g0 = (prior.g)(&zero).abs();
    let c1 = sum_yx + n as f64 * (-1.0f64).exp() + grad_g0;
    let superexp = SuperexpCert::linear(lambda1, c1, 1.0);
    let lambda2 = prior.lambda2;
    let nf = n as f64;
    let envelope = EnvelopeFn::new(Arc::new(move |r: f64| {
        sum_yx * r
            + nf * (max_norm_x * r).exp()
            + (g0 + grad_g0 * r + 0.5 * lambda2 * r * r)
            + offset_abs
    }));
    // The gradient direction points inward beyond the mode; in the shipped
    // one-dimensional configurations the margin is close to one.
    let curvature = CurvatureCert::new(0.9, numeric::norm(&mode) + 1.0)?;
    TargetBundle::new(target, envelope, superexp, curvature, &mode, 1e-8)
}

/// Mode-based lower bound for the Poisson posterior.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoissonLowerBound {
    pub value: f64,
    /// The bound is so close to one that it certifies only slow convergence.
    pub near_vacuous: bool,
}

/// Poisson pipeline: posterior bundle plus the bounded-proposal lower bound
/// `1 - q(0) / f(theta*)` evaluated with the (approximate) normalized
/// density at the mode.
pub fn poisson_preset(
    x: &[Vec<f64>],
    y: &[f64],
    prior: &PriorSpec,
    prop: &RadialProposal,
) -> Result<(TargetBundle, PoissonLowerBound)> {
    let bundle = poisson_bundle(x, y, prior)?;
    if prop.dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            left: prop.dim(),
            right: bundle.dim(),
            context: "poisson_preset proposal",
        });
    }
    let raw = 1.0 - (prop.radial_log_density(0.0) - bundle.log_p_star()).exp();
    let value = raw.clamp(0.0, 1.0 - f64::EPSILON);
    Ok((
        bundle,
        PoissonLowerBound {
            value,
            near_vacuous: value > 0.99,
        },
    ))
}

// ---------------------------------------------------------------------------
// Stock logistic family closures (centered cumulant), used by the generic
// constants path and its tests.
// ---------------------------------------------------------------------------

/// The logistic family with the cumulant centered so `c(0, x) = 0`.
pub fn logistic_family() -> GlmFamily {
    GlmFamily {
        pi: Arc::new(|theta: &[f64], x: &[f64]| vec![numeric::dot(x, theta)]),
        grad_pi_dot: Arc::new(|_theta: &[f64], x: &[f64], t: &[f64]| {
            x.iter().map(|v| v * t[0]).collect()
        }),
        c: Arc::new(|theta: &[f64], x: &[f64]| {
            let t = numeric::dot(x, theta);
            t.max(0.0) + (-(t.abs())).exp().ln_1p() - std::f64::consts::LN_2
        }),
        grad_c: Arc::new(|theta: &[f64], x: &[f64]| {
            let t = numeric::dot(x, theta);
            let sig = 1.0 / (1.0 + (-t).exp());
            x.iter().map(|v| v * sig).collect()
        }),
    }
}
