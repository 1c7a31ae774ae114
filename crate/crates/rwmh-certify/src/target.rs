//! Target densities and the certificates the bound pipeline consumes.
//!
//! A [`TargetBundle`] packages a normalized log-density with three
//! certificates:
//!
//! * an envelope `f_tilde`, non-decreasing with `|log f(x)| <= f_tilde(||x||)`;
//! * a superexponential certificate `(f_s, C1, M_s)` with
//!   `<x/||x||, grad log f(x)> <= C1 - f_s(||x||)` for `||x|| > M_s`;
//! * a curvature certificate `(eta, M_p)` with
//!   `<x/||x||, grad f(x)/||grad f(x)||> <= -eta` for `||x|| > M_p`;
//!
//! plus the density maximum `p_star` and its location. Certificates are
//! supplied by presets or by the caller; [`verify_assumptions`] probes them
//! numerically. A failed probe falsifies a certificate. A clean pass is
//! evidence, not proof.

use crate::error::{Error, Result};
use crate::numeric;
use crate::rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Row-major p x p Hessian of the log-density.
pub type HessianFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Whether a normalizing constant is analytic or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormQuality {
    Exact,
    Approximate,
}

impl NormQuality {
    pub fn worst(self, other: NormQuality) -> NormQuality {
        if self == NormQuality::Exact && other == NormQuality::Exact {
            NormQuality::Exact
        } else {
            NormQuality::Approximate
        }
    }
}

/// A target density on `R^p` through its log-density and gradient.
///
/// `log_norm_offset` is the additive constant taking the user-supplied
/// unnormalized values to the normalized ones; every bound formula in this
/// crate consumes the normalized density.
#[derive(Clone)]
pub struct LogTarget {
    dim: usize,
    log_density_raw: DensityFn,
    grad_log_density: GradientFn,
    hessian: Option<HessianFn>,
    log_norm_offset: f64,
    norm_quality: NormQuality,
}

impl std::fmt::Debug for LogTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogTarget")
            .field("dim", &self.dim)
            .field("log_norm_offset", &self.log_norm_offset)
            .field("norm_quality", &self.norm_quality)
            .finish()
    }
}

impl LogTarget {
    /// A target assumed to be already normalized.
    pub fn new(dim: usize, log_density: DensityFn, grad_log_density: GradientFn) -> Self {
        Self {
            dim,
            log_density_raw: log_density,
            grad_log_density,
            hessian: None,
            log_norm_offset: 0.0,
            norm_quality: NormQuality::Exact,
        }
    }

    pub fn with_hessian(mut self, hessian: HessianFn) -> Self {
        self.hessian = Some(hessian);
        self
    }

    /// Attach a normalizing constant: `raw + offset = log f` with `f` a
    /// probability density.
    pub fn with_normalization(mut self, offset: f64, quality: NormQuality) -> Self {
        self.log_norm_offset = offset;
        self.norm_quality = quality;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_quality(&self) -> NormQuality {
        self.norm_quality
    }

    pub fn log_norm_offset(&self) -> f64 {
        self.log_norm_offset
    }

    /// Normalized log-density.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        (self.log_density_raw)(x) + self.log_norm_offset
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        (self.grad_log_density)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

/// Largest relative error between the supplied gradient and a central
/// finite difference, over the given points.
pub fn gradient_consistency(target: &LogTarget, points: &[Vec<f64>]) -> f64 {
    let f = |x: &[f64]| target.log_density(x);
    let mut worst: f64 = 0.0;
    for x in points {
        let g = target.grad_log_density(x);
        let fd = numeric::fd_gradient(&f, x, 1e-6);
        let scale = numeric::norm(&g).max(1e-8);
        worst = worst.max(numeric::dist(&g, &fd) / scale);
    }
    worst
}

/// Non-decreasing radial envelope: `|log f(x)| <= f_tilde(||x||)`.
#[derive(Clone)]
pub struct EnvelopeFn {
    f_tilde: RadialFn,
}

impl EnvelopeFn {
    pub fn new(f_tilde: RadialFn) -> Self {
        Self { f_tilde }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f_tilde)(r)
    }
}

/// Superexponential decay certificate `(f_s, C1, M_s)`.
///
/// `f_s` is continuous and strictly increasing on `[domain_inf, inf)`. The
/// inverse follows the below-range convention: arguments below the range map
/// to the domain infimum.
#[derive(Clone)]
pub struct SuperexpCert {
    f_s: RadialFn,
    f_s_inverse: RadialFn,
    pub c1: f64,
    pub m_s: f64,
    pub domain_inf: f64,
}

impl SuperexpCert {
    pub fn new(f_s: RadialFn, f_s_inverse: RadialFn, c1: f64, m_s: f64, domain_inf: f64) -> Self {
        Self {
            f_s,
            f_s_inverse,
            c1,
            m_s,
            domain_inf,
        }
    }

    /// Linear rate `f_s(u) = gamma u` with analytic inverse.
    pub fn linear(gamma: f64, c1: f64, m_s: f64) -> Self {
        assert!(gamma > 0.0, "linear rate needs gamma > 0");
        Self {
            f_s: Arc::new(move |u| gamma * u),
            f_s_inverse: Arc::new(move |x| (x / gamma).max(0.0)),
            c1,
            m_s,
            domain_inf: 0.0,
        }
    }

    /// Certificate from a monotone rate with the inverse built by bisection.
    pub fn from_monotone(f_s: RadialFn, c1: f64, m_s: f64, domain_inf: f64) -> Self {
        let f = Arc::clone(&f_s);
        let inv: RadialFn = Arc::new(move |x| {
            numeric::invert_increasing(|u| f(u), domain_inf, x, 1e-10)
        });
        Self {
            f_s,
            f_s_inverse: inv,
            c1,
            m_s,
            domain_inf,
        }
    }

    pub fn f_s(&self, u: f64) -> f64 {
        (self.f_s)(u)
    }

    /// Inverse with the below-range convention.
    pub fn f_s_inverse(&self, x: f64) -> f64 {
        if x <= self.f_s(self.domain_inf) {
            self.domain_inf
        } else {
            (self.f_s_inverse)(x)
        }
    }
}

/// Curvature certificate `(eta, M_p)`; `eta` is clamped into `(0, 1)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvatureCert {
    pub eta: f64,
    pub m_p: f64,
    /// True when the supplied eta was >= 1 and got clamped to 1 - 1e-6.
    pub eta_clamped: bool,
}

impl CurvatureCert {
    pub fn new(eta: f64, m_p: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                constraint: "0 < eta < 1",
            });
        }
        if !(m_p >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "m_p",
                value: m_p,
                constraint: "m_p >= 0",
            });
        }
        let clamped = eta >= 1.0;
        Ok(Self {
            eta: if clamped { 1.0 - 1e-6 } else { eta },
            m_p,
            eta_clamped: clamped,
        })
    }
}

/// A target with every certificate the constant pipeline needs.
#[derive(Clone)]
pub struct TargetBundle {
    target: LogTarget,
    envelope: EnvelopeFn,
    superexp: SuperexpCert,
    curvature: CurvatureCert,
    mode: Vec<f64>,
    log_p_star: f64,
    p_star: f64,
    m_star: f64,
}

impl std::fmt::Debug for TargetBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetBundle")
            .field("dim", &self.target.dim)
            .field("mode", &self.mode)
            .field("p_star", &self.p_star)
            .field("m_star", &self.m_star)
            .finish()
    }
}

impl TargetBundle {
    /// Assemble a bundle, locating the mode numerically from `mode_init`.
    pub fn new(
        target: LogTarget,
        envelope: EnvelopeFn,
        superexp: SuperexpCert,
        curvature: CurvatureCert,
        mode_init: &[f64],
        tol: f64,
    ) -> Result<Self> {
        let (mode, p_star) = find_mode(&target, mode_init, tol)?;
        let grad_norm = numeric::norm(&target.grad_log_density(&mode));
        if grad_norm >= 1e-6 {
            return Err(Error::NonConvergence {
                what: "mode gradient check",
                iterations: 0,
                last: mode,
            });
        }
        let log_p_star = target.log_density(&mode);
        let m_star = superexp.m_s.max(curvature.m_p);
        Ok(Self {
            target,
            envelope,
            superexp,
            curvature,
            mode,
            log_p_star,
            p_star,
            m_star,
        })
    }

    pub fn target(&self) -> &LogTarget {
        &self.target
    }

    pub fn envelope(&self) -> &EnvelopeFn {
        &self.envelope
    }

    pub fn superexp(&self) -> &SuperexpCert {
        &self.superexp
    }

    pub fn curvature(&self) -> &CurvatureCert {
        &self.curvature
    }

    pub fn dim(&self) -> usize {
        self.target.dim
    }

    pub fn mode(&self) -> &[f64] {
        &self.mode
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn log_p_star(&self) -> f64 {
        self.log_p_star
    }

    pub fn m_star(&self) -> f64 {
        self.m_star
    }

    pub fn norm_quality(&self) -> NormQuality {
        self.target.norm_quality
    }

    /// Standard normal on `R^p`: exact certificates, mode at the origin.
    pub fn standard_normal(p: usize) -> Result<Self> {
        Self::standard_normal_with_eta(p, 0.99)
    }

    /// Standard normal with an explicit curvature constant `eta < 1`.
    pub fn standard_normal_with_eta(p: usize, eta: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                constraint: "dim >= 1",
            });
        }
        let pf = p as f64;
        let half_log_2pi = 0.5 * pf * (2.0 * std::f64::consts::PI).ln();
        let log_density: DensityFn = Arc::new(move |x: &[f64]| {
            -0.5 * x.iter().map(|v| v * v).sum::<f64>() - half_log_2pi
        });
        let grad: GradientFn = Arc::new(|x: &[f64]| x.iter().map(|v| -v).collect());
        let hess: HessianFn = Arc::new(move |x: &[f64]| {
            let p = x.len();
            let mut h = vec![0.0; p * p];
            for i in 0..p {
                h[i * p + i] = -1.0;
            }
            h
        });
        let target = LogTarget::new(p, log_density, grad).with_hessian(hess);
        let envelope = EnvelopeFn::new(Arc::new(move |r| 0.5 * r * r + half_log_2pi));
        let superexp = SuperexpCert::linear(1.0, 0.0, 0.0);
        let curvature = CurvatureCert::new(eta, 0.0)?;
        TargetBundle::new(target, envelope, superexp, curvature, &vec![0.0; p], 1e-10)
    }
}

/// Locate an interior maximum of the log-density.
///
/// Newton steps with backtracking line search when the target carries a
/// Hessian, gradient ascent with an Armijo rule otherwise; at most 500
/// iterations. Deterministic given the initial point.
pub fn find_mode(target: &LogTarget, init: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    if init.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: init.len(),
            right: target.dim(),
            context: "find_mode init",
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            constraint: "tol > 0",
        });
    }
    const MAX_ITER: usize = 500;
    let mut x = init.to_vec();
    let mut fx = target.log_density(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteLogDensity {
            at: x,
            context: "find_mode",
        });
    }
    for _ in 0..MAX_ITER {
        let g = target.grad_log_density(&x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogDensity {
                at: x,
                context: "find_mode gradient",
            });
        }
        let gnorm = numeric::norm(&g);
        if gnorm < tol {
            return Ok((x, fx.exp()));
        }
        // Direction: Newton when a Hessian is available and gives ascent,
        // else the gradient.
        let mut dir = None;
        if let Some(h) = target.hessian(&x) {
            let neg_h: Vec<f64> = h.iter().map(|v| -v).collect();
            if let Some(d) = numeric::solve_linear(neg_h, g.clone()) {
                if numeric::dot(&d, &g) > 0.0 && d.iter().all(|v| v.is_finite()) {
                    dir = Some(d);
                }
            }
        }
        let d = dir.unwrap_or_else(|| g.clone());
        let slope = numeric::dot(&d, &g);
        // Backtracking scan: keep the best strictly improving candidate over
        // the halved steps rather than the first admissible one. Taking the
        // first lets plain gradient ascent zigzag across a ridge with O(1/n)
        // progress; taking the best restores fast contraction.
        let mut step = 1.0;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut declines = 0;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let fc = target.log_density(&cand);
            if fc.is_finite() && fc > fx && fc >= fx + 1e-4 * step * slope {
                match &best {
                    Some((_, fb)) if fc <= *fb => declines += 1,
                    _ => {
                        best = Some((cand, fc));
                        declines = 0;
                    }
                }
                if declines >= 2 {
                    break;
                }
            }
            step *= 0.5;
        }
        match best {
            Some((cand, fc)) => {
                x = cand;
                fx = fc;
            }
            None => {
                // No strictly improving step is resolvable in double
                // precision. Accept at tolerance, otherwise polish with a
                // finite-difference Newton step (quadratic contraction even
                // where density differences are below one ulp).
                if gnorm < tol {
                    return Ok((x, fx.exp()));
                }
                let f = |y: &[f64]| target.log_density(y);
                let h = numeric::fd_hessian(&f, &x, 1e-5);
                let neg_h: Vec<f64> = h.iter().map(|v| -v).collect();
                let polished = numeric::solve_linear(neg_h, g.clone()).and_then(|delta| {
                    let cand: Vec<f64> =
                        x.iter().zip(&delta).map(|(a, b)| a + b).collect();
                    let gc = target.grad_log_density(&cand);
                    (target.log_density(&cand).is_finite()
                        && numeric::norm(&gc) < 0.5 * gnorm)
                        .then_some(cand)
                });
                match polished {
                    Some(cand) => {
                        fx = target.log_density(&cand);
                        x = cand;
                    }
                    None => {
                        return Err(Error::NonConvergence {
                            what: "find_mode line search",
                            iterations: MAX_ITER,
                            last: x,
                        })
                    }
                }
            }
        }
    }
    let g = target.grad_log_density(&x);
    if numeric::norm(&g) < tol {
        return Ok((x, fx.exp()));
    }
    Err(Error::NonConvergence {
        what: "find_mode",
        iterations: MAX_ITER,
        last: x,
    })
}

/// Laplace estimate of the log normalizing constant of an unnormalized
/// log-density with an interior maximum at `mode`.
pub fn laplace_log_norm(
    log_density: &dyn Fn(&[f64]) -> f64,
    mode: &[f64],
    hessian: Option<&[f64]>,
) -> Result<f64> {
    let p = mode.len();
    let owned;
    let h = match hessian {
        Some(h) => h,
        None => {
            owned = numeric::fd_hessian(&|x| log_density(x), mode, 1e-4);
            &owned
        }
    };
    let neg_h: Vec<f64> = h.iter().map(|v| -v).collect();
    let (log_det, sign) = numeric::log_abs_det(neg_h, p).ok_or(Error::NonConvergence {
        what: "laplace hessian factorization",
        iterations: 0,
        last: mode.to_vec(),
    })?;
    if sign <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "hessian",
            value: sign,
            constraint: "negative definite at the mode",
        });
    }
    let pf = p as f64;
    Ok(log_density(mode) + 0.5 * pf * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det)
}

/// Quadrature estimate of the log normalizing constant for p <= 2.
///
/// Integrates `exp(log_density - log_density(mode))` over a box of
/// `half_widths` around the mode with adaptive Simpson rules.
pub fn quadrature_log_norm(
    log_density: &dyn Fn(&[f64]) -> f64,
    mode: &[f64],
    half_widths: &[f64],
) -> Result<f64> {
    let p = mode.len();
    if p > 2 {
        return Err(Error::OracleDimension { dim: p });
    }
    let peak = log_density(mode);
    let lo: Vec<f64> = mode.iter().zip(half_widths).map(|(m, w)| m - w).collect();
    let hi: Vec<f64> = mode.iter().zip(half_widths).map(|(m, w)| m + w).collect();
    let rect = numeric::BoxRect::new(lo, hi)?;
    let g = |x: &[f64]| (log_density(x) - peak).exp();
    let integral = numeric::cubature_box(&g, &rect, 1e-12);
    if !(integral > 0.0) {
        return Err(Error::QuadratureTolerance {
            context: "quadrature_log_norm",
            estimate: integral,
            error: f64::NAN,
        });
    }
    Ok(peak + integral.ln())
}

/// Product combinator: certificates for `f = f1 f2`.
///
/// Envelopes and rates add, `C1` adds, `eta` takes the minimum. The caller
/// asserts the product integrates to one by supplying `norm`; otherwise the
/// offset is zero and the result is flagged approximate.
pub fn combine_product(
    b1: &TargetBundle,
    b2: &TargetBundle,
    norm: Option<(f64, NormQuality)>,
) -> Result<TargetBundle> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch {
            left: b1.dim(),
            right: b2.dim(),
            context: "combine_product",
        });
    }
    let (offset, quality) = match norm {
        Some((c, q)) => (c, q.worst(b1.norm_quality()).worst(b2.norm_quality())),
        None => (0.0, NormQuality::Approximate),
    };
    let t1 = b1.target.clone();
    let t2 = b2.target.clone();
    let log_density: DensityFn = {
        let (t1, t2) = (t1.clone(), t2.clone());
        Arc::new(move |x: &[f64]| t1.log_density(x) + t2.log_density(x))
    };
    let grad: GradientFn = {
        let (t1, t2) = (t1.clone(), t2.clone());
        Arc::new(move |x: &[f64]| {
            let g1 = t1.grad_log_density(x);
            let g2 = t2.grad_log_density(x);
            g1.iter().zip(&g2).map(|(a, b)| a + b).collect()
        })
    };
    let mut target = LogTarget::new(b1.dim(), log_density, grad).with_normalization(offset, quality);
    if t1.has_hessian() && t2.has_hessian() {
        let (t1, t2) = (t1.clone(), t2.clone());
        target = target.with_hessian(Arc::new(move |x: &[f64]| {
            let h1 = t1.hessian(x).expect("hessian");
            let h2 = t2.hessian(x).expect("hessian");
            h1.iter().zip(&h2).map(|(a, b)| a + b).collect()
        }));
    }
    let (e1, e2) = (b1.envelope.clone(), b2.envelope.clone());
    let abs_offset = offset.abs();
    let envelope = EnvelopeFn::new(Arc::new(move |r| e1.eval(r) + e2.eval(r) + abs_offset));
    let (s1, s2) = (b1.superexp.clone(), b2.superexp.clone());
    let domain_inf = s1.domain_inf.max(s2.domain_inf);
    let sum_rate: RadialFn = {
        let (s1, s2) = (s1.clone(), s2.clone());
        Arc::new(move |u| s1.f_s(u) + s2.f_s(u))
    };
    let superexp = SuperexpCert::from_monotone(
        sum_rate,
        s1.c1 + s2.c1,
        s1.m_s.max(s2.m_s),
        domain_inf,
    );
    let curvature = CurvatureCert::new(
        b1.curvature.eta.min(b2.curvature.eta),
        b1.curvature.m_p.max(b2.curvature.m_p),
    )?;
    let init = if b1.log_p_star >= b2.log_p_star {
        b1.mode.clone()
    } else {
        b2.mode.clone()
    };
    TargetBundle::new(target, envelope, superexp, curvature, &init, 1e-8)
}

/// Mixture combinator: certificates for `f = a1 f1 + a2 f2`.
pub fn combine_mixture(
    b1: &TargetBundle,
    b2: &TargetBundle,
    a1: f64,
    a2: f64,
) -> Result<TargetBundle> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch {
            left: b1.dim(),
            right: b2.dim(),
            context: "combine_mixture",
        });
    }
    if !(a1 >= 0.0 && a2 >= 0.0) || (a1 + a2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "weights",
            value: a1 + a2,
            constraint: "a1, a2 >= 0 and a1 + a2 = 1 within 1e-12",
        });
    }
    let (t1, t2) = (b1.target.clone(), b2.target.clone());
    let (ln_a1, ln_a2) = (a1.ln(), a2.ln());
    let log_density: DensityFn = {
        let (t1, t2) = (t1.clone(), t2.clone());
        Arc::new(move |x: &[f64]| {
            numeric::ln_add_exp(ln_a1 + t1.log_density(x), ln_a2 + t2.log_density(x))
        })
    };
    let grad: GradientFn = {
        let (t1, t2) = (t1.clone(), t2.clone());
        Arc::new(move |x: &[f64]| {
            let l1 = ln_a1 + t1.log_density(x);
            let l2 = ln_a2 + t2.log_density(x);
            let lf = numeric::ln_add_exp(l1, l2);
            let w1 = (l1 - lf).exp();
            let w2 = (l2 - lf).exp();
            let g1 = t1.grad_log_density(x);
            let g2 = t2.grad_log_density(x);
            g1.iter().zip(&g2).map(|(a, b)| w1 * a + w2 * b).collect()
        })
    };
    let quality = b1.norm_quality().worst(b2.norm_quality());
    let target = LogTarget::new(b1.dim(), log_density, grad).with_normalization(0.0, quality);
    let (e1, e2) = (b1.envelope.clone(), b2.envelope.clone());
    let envelope = EnvelopeFn::new(Arc::new(move |r| {
        numeric::ln_add_exp(e1.eval(r) + e2.eval(r), 0.0)
    }));
    let (s1, s2) = (b1.superexp.clone(), b2.superexp.clone());
    let min_rate: RadialFn = {
        let (s1, s2) = (s1.clone(), s2.clone());
        Arc::new(move |u| s1.f_s(u).min(s2.f_s(u)))
    };
    let superexp = SuperexpCert::from_monotone(
        min_rate,
        s1.c1.max(s2.c1),
        s1.m_s.max(s2.m_s),
        s1.domain_inf.max(s2.domain_inf),
    );
    let curvature = CurvatureCert::new(
        b1.curvature.eta.min(b2.curvature.eta),
        b1.curvature.m_p.max(b2.curvature.m_p),
    )?;
    let init = if ln_a1 + b1.log_p_star >= ln_a2 + b2.log_p_star {
        b1.mode.clone()
    } else {
        b2.mode.clone()
    };
    TargetBundle::new(target, envelope, superexp, curvature, &init, 1e-8)
}

/// The two-component planar Gaussian mixture benchmark.
///
/// `f1(x, y) = sqrt(a)/pi exp(-a x^2 - y^2)`, `f2` with the roles of the
/// coordinates swapped, mixed with equal weights. Certificates:
/// `f_s(z) = 2 min(a,1) z`, `C1 = 0`, `eta = min(a,1)` (clamped below one),
/// and component envelopes `max(a,1) z^2 + |log(sqrt(a)/pi)|` composed by the
/// mixture rule. The constant term uses the absolute log of the component
/// peak so the envelope bound actually holds at small radii.
pub fn gaussian_mixture_bundle(a: f64) -> Result<TargetBundle> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            constraint: "a > 0",
        });
    }
    let ln_peak = 0.5 * a.ln() - std::f64::consts::PI.ln();
    let component = |ax: f64, ay: f64| -> (DensityFn, GradientFn) {
        let ld: DensityFn = Arc::new(move |x: &[f64]| ln_peak - ax * x[0] * x[0] - ay * x[1] * x[1]);
        let gr: GradientFn =
            Arc::new(move |x: &[f64]| vec![-2.0 * ax * x[0], -2.0 * ay * x[1]]);
        (ld, gr)
    };
    let (l1, g1) = component(a, 1.0);
    let (l2, g2) = component(1.0, a);
    let log_density: DensityFn = {
        let (l1, l2) = (Arc::clone(&l1), Arc::clone(&l2));
        Arc::new(move |x: &[f64]| numeric::ln_add_exp(l1(x), l2(x)) - std::f64::consts::LN_2)
    };
    let grad: GradientFn = Arc::new(move |x: &[f64]| {
        let (a1, a2) = (l1(x), l2(x));
        let lf = numeric::ln_add_exp(a1, a2);
        let w1 = (a1 - lf).exp();
        let w2 = (a2 - lf).exp();
        let (v1, v2) = (g1(x), g2(x));
        vec![w1 * v1[0] + w2 * v2[0], w1 * v1[1] + w2 * v2[1]]
    });
    let target = LogTarget::new(2, log_density, grad);
    let env_coeff = a.max(1.0);
    let env_const = ln_peak.abs();
    let envelope = EnvelopeFn::new(Arc::new(move |r| {
        let component_env = env_coeff * r * r + env_const;
        numeric::ln_add_exp(2.0 * component_env, 0.0)
    }));
    let superexp = SuperexpCert::linear(2.0 * a.min(1.0), 0.0, 0.0);
    let curvature = CurvatureCert::new(a.min(1.0), 0.0)?;
    TargetBundle::new(target, envelope, superexp, curvature, &[0.01, 0.01], 1e-10)
}

/// Options for [`verify_assumptions`].
#[derive(Debug, Clone)]
pub struct AssumptionCheckOptions {
    pub radii: Vec<f64>,
    pub n_directions: usize,
    pub seed: u64,
    pub check_log_concavity: bool,
}

impl AssumptionCheckOptions {
    /// Documented defaults: radii `max(M*, 1) * {1.1, 1.5, 2, 4, 8}`,
    /// 64 directions, log-concavity probe on.
    pub fn defaults(m_star: f64, seed: u64) -> Self {
        let base = m_star.max(1.0);
        Self {
            radii: [1.1, 1.5, 2.0, 4.0, 8.0].iter().map(|s| s * base).collect(),
            n_directions: 64,
            seed,
            check_log_concavity: true,
        }
    }
}

/// One failed probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeFailure {
    pub radius: f64,
    pub direction: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Aggregate result of one check family.
#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub checked: usize,
    pub failures: usize,
    pub pass: bool,
    /// Smallest `rhs - lhs` seen (negative means a violation).
    pub worst_margin: f64,
    /// First few failing probes, for diagnosis.
    pub failing_probes: Vec<ProbeFailure>,
}

impl CheckSummary {
    fn new() -> Self {
        Self {
            checked: 0,
            failures: 0,
            pass: true,
            worst_margin: f64::INFINITY,
            failing_probes: Vec::new(),
        }
    }

    fn record(&mut self, radius: f64, direction: &[f64], lhs: f64, rhs: f64, slack: f64) {
        self.checked += 1;
        let margin = rhs - lhs;
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
        if lhs > rhs + slack {
            self.failures += 1;
            self.pass = false;
            if self.failing_probes.len() < 32 {
                self.failing_probes.push(ProbeFailure {
                    radius,
                    direction: direction.to_vec(),
                    lhs,
                    rhs,
                });
            }
        }
    }
}

/// Numeric falsification report for a bundle's certificates.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub radii: Vec<f64>,
    pub n_directions: usize,
    pub seed: u64,
    pub superexp: CheckSummary,
    pub curvature: CheckSummary,
    pub envelope: CheckSummary,
    pub gradient_max_rel_err: f64,
    pub log_concavity: Option<CheckSummary>,
    pub all_pass: bool,
}

/// Probe the bundle's certificates on a seeded radius-times-direction grid.
///
/// For each sampled `x = r xi` this checks the superexponential inequality
/// (for `r > M_s`), the curvature inequality (for `r > M_p`), the envelope
/// bound, and optionally negative semi-definiteness of a finite-difference
/// Hessian of `log f`. A failure falsifies the certificate; passing is
/// evidence only.
pub fn verify_assumptions(bundle: &TargetBundle, opts: &AssumptionCheckOptions) -> AssumptionReport {
    let p = bundle.dim();
    let target = bundle.target();
    let mut rng = rng::stream_rng(opts.seed, 0);
    let mut superexp = CheckSummary::new();
    let mut curvature = CheckSummary::new();
    let mut envelope = CheckSummary::new();
    let mut log_concavity = if opts.check_log_concavity {
        Some(CheckSummary::new())
    } else {
        None
    };
    let mut grad_points = Vec::new();
    for &r in &opts.radii {
        for _ in 0..opts.n_directions {
            let xi = rng::unit_sphere(&mut rng, p);
            let x: Vec<f64> = xi.iter().map(|v| v * r).collect();
            let lf = target.log_density(&x);
            let g = target.grad_log_density(&x);
            if grad_points.len() < 16 {
                grad_points.push(x.clone());
            }

            if r > bundle.superexp().m_s {
                let lhs = numeric::dot(&xi, &g);
                let rhs = bundle.superexp().c1 - bundle.superexp().f_s(r);
                superexp.record(r, &xi, lhs, rhs, 1e-9 * (1.0 + rhs.abs()));
            }
            if r > bundle.curvature().m_p {
                let gn = numeric::norm(&g);
                if gn > 1e-14 {
                    let lhs = numeric::dot(&xi, &g) / gn;
                    let rhs = -bundle.curvature().eta;
                    curvature.record(r, &xi, lhs, rhs, 1e-9);
                }
            }
            {
                let lhs = lf.abs();
                let rhs = bundle.envelope().eval(r);
                envelope.record(r, &xi, lhs, rhs, 1e-9 * (1.0 + rhs.abs()));
            }
            if let Some(ref mut lc) = log_concavity {
                let f = |y: &[f64]| target.log_density(y);
                let h = numeric::fd_hessian(&f, &x, 1e-4);
                let max_eig = numeric::max_symmetric_eigenvalue(&h, p);
                // lhs = largest Hessian eigenvalue, required <= 0.
                lc.record(r, &xi, max_eig, 0.0, 1e-3);
            }
        }
    }
    let gradient_max_rel_err = gradient_consistency(target, &grad_points);
    let all_pass = superexp.pass
        && curvature.pass
        && envelope.pass
        && log_concavity.as_ref().map(|c| c.pass).unwrap_or(true)
        && gradient_max_rel_err < 1e-5;
    AssumptionReport {
        radii: opts.radii.clone(),
        n_directions: opts.n_directions,
        seed: opts.seed,
        superexp,
        curvature,
        envelope,
        gradient_max_rel_err,
        log_concavity,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn find_mode_standard_normal() {
        let b = TargetBundle::standard_normal(1).unwrap();
        let (mode, p_star) = find_mode(b.target(), &[3.0], 1e-10).unwrap();
        assert!(mode[0].abs() < 1e-8);
        assert!(close(p_star, 0.398942, 1e-6));
        // Deterministic for a fixed init.
        let (mode2, _) = find_mode(b.target(), &[3.0], 1e-10).unwrap();
        assert_eq!(mode, mode2);
    }

    #[test]
    fn bundle_invariants_standard_normal() {
        let b = TargetBundle::standard_normal(2).unwrap();
        assert!(close(b.p_star(), 1.0 / (2.0 * std::f64::consts::PI), 1e-12));
        assert_eq!(b.m_star(), 0.0);
        assert!(close(b.p_star(), b.log_p_star().exp(), 1e-8 * b.p_star()));
    }

    #[test]
    fn superexp_inverse_conventions() {
        let cert = SuperexpCert::linear(2.0, 0.0, 0.0);
        for u in [0.0, 0.3, 1.7, 42.0] {
            assert!(close(cert.f_s_inverse(cert.f_s(u)), u, 1e-10));
        }
        // Below range: domain infimum.
        assert_eq!(cert.f_s_inverse(-3.0), 0.0);

        let cert = SuperexpCert::from_monotone(
            Arc::new(|u| u * u + u),
            0.0,
            0.0,
            0.0,
        );
        for u in [0.1, 1.0, 5.0] {
            assert!(close(cert.f_s_inverse(cert.f_s(u)), u, 1e-8));
        }
        assert_eq!(cert.f_s_inverse(-1.0), 0.0);
    }

    #[test]
    fn eta_clamping() {
        let c = CurvatureCert::new(1.0, 0.0).unwrap();
        assert!(c.eta_clamped);
        assert!(close(c.eta, 1.0 - 1e-6, 1e-15));
        let c = CurvatureCert::new(0.4, 0.0).unwrap();
        assert!(!c.eta_clamped);
    }

    #[test]
    fn product_combinator_rules() {
        let b1 = TargetBundle::standard_normal(1).unwrap();
        let b2 = TargetBundle::standard_normal(1).unwrap();
        let prod = combine_product(&b1, &b2, None).unwrap();
        // f_s(z) = 2z, C1 = 0.
        assert!(close(prod.superexp().f_s(1.5), 3.0, 1e-9));
        assert_eq!(prod.superexp().c1, 0.0);
        assert_eq!(prod.norm_quality(), NormQuality::Approximate);
        // log f = log f1 + log f2 exactly at evaluated points.
        for x in [-2.0, 0.0, 0.7] {
            let lhs = prod.target().log_density(&[x]);
            let rhs = b1.target().log_density(&[x]) + b2.target().log_density(&[x]);
            assert_eq!(lhs, rhs);
        }
        // Envelope is the sum: spot-check |log f| <= f_tilde at random points.
        let mut rng = crate::rng::stream_rng(5, 0);
        use rand::Rng;
        for _ in 0..100 {
            let x = rng.random_range(-6.0..6.0);
            let lf = prod.target().log_density(&[x]);
            assert!(lf.abs() <= prod.envelope().eval(x.abs()) + 1e-9);
        }
    }

    #[test]
    fn product_takes_min_eta() {
        let mut b1 = TargetBundle::standard_normal(1).unwrap();
        b1.curvature = CurvatureCert::new(0.4, 0.0).unwrap();
        let mut b2 = TargetBundle::standard_normal(1).unwrap();
        b2.curvature = CurvatureCert::new(0.7, 0.0).unwrap();
        let prod = combine_product(&b1, &b2, None).unwrap();
        assert!(close(prod.curvature().eta, 0.4, 1e-15));
    }

    #[test]
    fn mixture_combinator_rules() {
        let b1 = TargetBundle::standard_normal(1).unwrap();
        let mut b2 = TargetBundle::standard_normal(1).unwrap();
        b2.superexp = SuperexpCert::linear(2.0, 3.0, 0.0);
        let mix = combine_mixture(&b1, &b2, 0.25, 0.75).unwrap();
        // f_s = min(z, 2z) = z; C1 = max(0, 3) = 3.
        assert!(close(mix.superexp().f_s(2.0), 2.0, 1e-9));
        assert_eq!(mix.superexp().c1, 3.0);
        // Density is the weighted sum to relative error < 1e-12.
        for x in [-1.5, 0.0, 2.2] {
            let f1 = b1.target().log_density(&[x]).exp();
            let f2 = b2.target().log_density(&[x]).exp();
            let fm = mix.target().log_density(&[x]).exp();
            let expect = 0.25 * f1 + 0.75 * f2;
            assert!((fm - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn degenerate_mixture_equals_first_component() {
        let b1 = TargetBundle::standard_normal(1).unwrap();
        let mut b2 = TargetBundle::standard_normal(1).unwrap();
        b2.superexp = SuperexpCert::linear(3.0, 1.0, 0.0);
        let mix = combine_mixture(&b1, &b2, 1.0, 0.0).unwrap();
        for x in [-2.0, 0.3, 4.0] {
            let lhs = mix.target().log_density(&[x]);
            let rhs = b1.target().log_density(&[x]);
            assert!(close(lhs, rhs, 1e-12));
        }
    }

    #[test]
    fn mixture_weight_validation() {
        let b1 = TargetBundle::standard_normal(1).unwrap();
        let b2 = TargetBundle::standard_normal(1).unwrap();
        assert!(combine_mixture(&b1, &b2, 0.5, 0.6).is_err());
    }

    #[test]
    fn gaussian_mixture_certificates() {
        let b = gaussian_mixture_bundle(0.5).unwrap();
        assert!(close(b.superexp().f_s(1.0), 1.0, 1e-12)); // f_s(z) = z
        assert_eq!(b.superexp().c1, 0.0);
        assert!(close(b.curvature().eta, 0.5, 1e-12));
        assert_eq!(b.m_star(), 0.0);
        // Mode at the origin, p* = sqrt(a)/pi.
        assert!(numeric::norm(b.mode()) < 1e-6);
        let expect = 0.5f64.sqrt() / std::f64::consts::PI;
        assert!(close(b.p_star(), expect, 1e-8));
        // Envelope: mixture rule over component envelopes z^2 + |ln(sqrt(a)/pi)|.
        let c = (0.5f64.sqrt() / std::f64::consts::PI).ln().abs();
        let expect_env = |z: f64| numeric::ln_add_exp(2.0 * (z * z + c), 0.0);
        for z in [0.0, 0.5, 2.0] {
            assert!(close(b.envelope().eval(z), expect_env(z), 1e-12));
        }
        // And it really is an envelope at the origin.
        assert!(b.target().log_density(&[0.0, 0.0]).abs() <= b.envelope().eval(0.0));
    }

    #[test]
    fn gaussian_mixture_a_one_collapses() {
        let b = gaussian_mixture_bundle(1.0).unwrap();
        // Components coincide: f = pi^{-1} exp(-x^2 - y^2), mode (0, 0).
        let lf = b.target().log_density(&[0.0, 0.0]);
        assert!(close(lf, -(std::f64::consts::PI).ln(), 1e-9));
        assert!(numeric::norm(b.mode()) < 1e-6);
        assert!(b.curvature().eta_clamped);
        assert!(close(b.curvature().eta, 1.0 - 1e-6, 1e-12));
    }

    #[test]
    fn gaussian_mixture_a_four_clamps_eta() {
        let b = gaussian_mixture_bundle(4.0).unwrap();
        assert!(b.curvature().eta_clamped);
        assert!(close(b.curvature().eta, 1.0 - 1e-6, 1e-12));
        assert!(gaussian_mixture_bundle(-1.0).is_err());
    }

    #[test]
    fn verify_standard_normal_passes() {
        let b = TargetBundle::standard_normal(2).unwrap();
        let opts = AssumptionCheckOptions::defaults(b.m_star(), 17);
        let report = verify_assumptions(&b, &opts);
        assert!(report.superexp.pass, "{:?}", report.superexp.failing_probes);
        assert!(report.curvature.pass);
        assert!(report.envelope.pass);
        assert!(report.log_concavity.as_ref().unwrap().pass);
        assert!(report.all_pass);
        assert!(report.gradient_max_rel_err < 1e-5);
    }

    #[test]
    fn verify_flags_false_superexp_rate_on_heavy_tail() {
        // Cauchy target declared with the (false) linear rate f_s(u) = u:
        // the directional derivative -2r/(1+r^2) violates -r for r > 1.
        let log_density: DensityFn =
            Arc::new(|x: &[f64]| -(std::f64::consts::PI).ln() - (1.0 + x[0] * x[0]).ln());
        let grad: GradientFn = Arc::new(|x: &[f64]| vec![-2.0 * x[0] / (1.0 + x[0] * x[0])]);
        let target = LogTarget::new(1, log_density, grad);
        let envelope = EnvelopeFn::new(Arc::new(|r| {
            (std::f64::consts::PI).ln() + (1.0 + r * r).ln()
        }));
        let superexp = SuperexpCert::linear(1.0, 0.0, 0.0);
        let curvature = CurvatureCert::new(0.9, 0.0).unwrap();
        let bundle =
            TargetBundle::new(target, envelope, superexp, curvature, &[0.1], 1e-9).unwrap();
        let opts = AssumptionCheckOptions {
            radii: vec![0.5, 2.0, 10.0],
            n_directions: 8,
            seed: 3,
            check_log_concavity: false,
        };
        let report = verify_assumptions(&bundle, &opts);
        assert!(!report.superexp.pass);
        // Violations only at radii beyond 1.
        assert!(report
            .superexp
            .failing_probes
            .iter()
            .all(|p| p.radius > 1.0));
        assert!(report
            .superexp
            .failing_probes
            .iter()
            .any(|p| (p.radius - 10.0).abs() < 1e-12 && (p.lhs - (-20.0 / 101.0)).abs() < 1e-9));
    }

    #[test]
    fn verify_flags_mixture_non_log_concavity() {
        let b = gaussian_mixture_bundle(0.5).unwrap();
        let opts = AssumptionCheckOptions {
            radii: vec![1.1, 1.5, 2.0, 4.0, 8.0],
            n_directions: 64,
            seed: 17,
            check_log_concavity: true,
        };
        let report = verify_assumptions(&b, &opts);
        let lc = report.log_concavity.as_ref().unwrap();
        assert!(!lc.pass, "mixture should fail the log-concavity probe");
        // The other certificates hold.
        assert!(report.superexp.pass, "{:?}", report.superexp.failing_probes);
        assert!(report.curvature.pass, "{:?}", report.curvature.failing_probes);
        assert!(report.envelope.pass, "{:?}", report.envelope.failing_probes);
    }

    #[test]
    fn laplace_norm_exact_for_gaussian() {
        // Unnormalized N(0, sigma^2): log Z = log(sigma sqrt(2 pi)).
        let sigma = 0.7f64;
        let ld = move |x: &[f64]| -0.5 * x[0] * x[0] / (sigma * sigma);
        let z = laplace_log_norm(&ld, &[0.0], None).unwrap();
        let expect = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!(close(z, expect, 1e-6));
        let zq = quadrature_log_norm(&ld, &[0.0], &[20.0 * sigma]).unwrap();
        assert!(close(zq, expect, 1e-9));
    }
}
