//! Explicit drift and minorization constants, with empirical verifiers.
//!
//! [`drift_certificate`] assembles the full constant set certifying
//!
//! * drift: `P V <= lambda_tilde V + b` for `V(x) = f(x)^{-1/2}`, and
//! * minorization: `P(x, .) >= eta_tilde nu(.)` for `x` in the closed ball
//!   `B(0, R_max)`, with `nu` uniform on that ball.
//!
//! `b` and `eta_tilde` routinely overflow or underflow a double: for any
//! target whose envelope grows at the drift radius, `b = 3 exp(f~(R_eps)/2)`
//! is astronomical. The certificate therefore carries `log_b` and
//! `log_eta_tilde` as primary values and materializes the plain numbers only
//! when representable; a certificate whose `log eta_tilde < -700` is flagged
//! vacuous.
//!
//! The two verifiers are falsifiers: [`verify_drift_mc`] Monte Carlo checks
//! the drift inequality, [`verify_minorization_grid`] quadrature-checks the
//! minorization on p <= 2. A statistically significant violation falsifies a
//! certificate; clean runs are evidence, not proof.

use crate::error::{Error, Result};
use crate::geometry::{self, ConeParams};
use crate::numeric;
use crate::oracle::Grid;
use crate::proposal::RadialProposal;
use crate::rng;
use crate::target::{NormQuality, TargetBundle};
use rand::Rng;
use serde::Serialize;

/// Description of the drift function; fixed by the construction.
pub const DRIFT_FN_DESCR: &str = "V(x)=f(x)^{-1/2}";
/// Description of the minorization measure.
pub const NU_DESCR: &str = "uniform on closed ball B(0,R_max)";

/// The full drift/minorization constant set.
#[derive(Debug, Clone, Serialize)]
pub struct DriftMinCert {
    pub dim: usize,
    pub lambda_tilde: f64,
    pub r_alpha: f64,
    pub box_mass: f64,
    pub eps_alpha: f64,
    pub k_cone: f64,
    pub eps: f64,
    pub delta: f64,
    pub k_eps: f64,
    /// The four candidate radii whose maximum is `r_eps`; the second is
    /// `None` in one dimension, where its exponent `1/(p-1)` is undefined.
    pub r_eps_terms: [Option<f64>; 4],
    pub r_eps: f64,
    pub log_b: f64,
    /// `exp(log_b)` when it is finite in double precision.
    pub b: Option<f64>,
    pub r_max: f64,
    pub small_set_radius: f64,
    pub log_eta_tilde: f64,
    pub eta_tilde: f64,
    /// True when `eta_tilde` underflows (log below -700): the upper bound
    /// derived from this certificate carries no information.
    pub vacuous: bool,
    pub m_star: f64,
    pub norm_quality: NormQuality,
    pub drift_fn_descr: &'static str,
    pub nu_descr: &'static str,
}

/// Assemble the certificate for a bundle/proposal/cone-parameter triple.
///
/// Computation order: `lambda_tilde`, then `(eps, delta, K_eps)`, then the
/// drift radius `R_eps` (four-way maximum), `b`, the small-set radius
/// `R_max`, and finally `eta_tilde`. Deterministic: identical inputs give
/// bit-identical constants.
pub fn drift_certificate(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    params: &ConeParams,
) -> Result<DriftMinCert> {
    if prop.dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            left: prop.dim(),
            right: bundle.dim(),
            context: "drift_certificate",
        });
    }
    let p = bundle.dim();
    let pf = p as f64;
    let sup = bundle.superexp();
    let env = bundle.envelope();
    let m_star = bundle.m_star();
    let c1 = sup.c1;

    let r_alpha = geometry::cone_radius(params);
    let (lambda_tilde, box_mass) = geometry::drift_factor_with_mass(prop, params)?;
    let ed = geometry::epsilon_delta(prop, params)?;
    let ball = numeric::unit_ball_volume(p);

    // Drift radius: four-way maximum.
    let term1 = sup.f_s_inverse(c1 - ed.eps.ln() / ed.delta) + ed.k_eps;
    let term2 = if p == 1 {
        // The exponent 1/(p-1) is undefined in one dimension; the underlying
        // slab-volume estimate is vacuous there, so the term is omitted.
        None
    } else {
        let base = (ed.eps / (prop.q0() * ball * ed.delta)).powf(1.0 / (pf - 1.0));
        if base <= ed.k_eps {
            return Err(Error::REpsBracketDegenerate {
                base,
                k_eps: ed.k_eps,
            });
        }
        Some(2.0 * ed.k_eps * ed.k_eps / (base - ed.k_eps) + ed.k_eps)
    };
    let term3 = {
        let v = sup.f_s_inverse(c1).max(m_star);
        // log of min(exp(-f~(v)) / p*, 1).
        let inner = (-env.eval(v) - bundle.log_p_star()).min(0.0);
        sup.f_s_inverse(c1 - inner) + 1.0
    };
    let term4 = m_star + ed.k_eps.max(1.0);
    let r_eps = [Some(term1), term2, Some(term3), Some(term4)]
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let log_b = 3f64.ln() + 0.5 * env.eval(r_eps);

    // Small-set radius. An envelope that overflows at R_eps makes b, and with
    // it R_max, too large to represent: the certificate saturates to an
    // explicitly vacuous one instead of propagating NaNs.
    let (r_max, log_eta_tilde) = if log_b.is_finite() {
        let ln_2b_eps =
            numeric::ln_add_exp(std::f64::consts::LN_2 + log_b, params.eps_alpha.ln());
        let ln_ratio = 2.0 * (1.0 - lambda_tilde).ln()
            - (std::f64::consts::LN_2 + bundle.log_p_star() + 2.0 * ln_2b_eps);
        let r_max = sup.f_s_inverse(c1 - ln_ratio.min(0.0)).max(m_star);
        let log_eta = if r_max.is_finite() && r_max > 0.0 {
            let v = -2.0 * env.eval(r_max)
                + prop.radial_log_density(r_max)
                + ball.ln()
                + pf * r_max.ln();
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        } else {
            f64::NEG_INFINITY
        };
        (r_max, log_eta)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    };
    let eta_tilde = log_eta_tilde.exp();
    let vacuous = !(log_eta_tilde >= -700.0);

    Ok(DriftMinCert {
        dim: p,
        lambda_tilde,
        r_alpha,
        box_mass,
        eps_alpha: params.eps_alpha,
        k_cone: params.k,
        eps: ed.eps,
        delta: ed.delta,
        k_eps: ed.k_eps,
        r_eps_terms: [Some(term1), term2, Some(term3), Some(term4)],
        r_eps,
        log_b,
        b: Some(log_b.exp()).filter(|v| v.is_finite()),
        r_max,
        small_set_radius: r_max,
        log_eta_tilde,
        eta_tilde,
        vacuous,
        m_star,
        norm_quality: bundle.norm_quality(),
        drift_fn_descr: DRIFT_FN_DESCR,
        nu_descr: NU_DESCR,
    })
}

/// One Monte Carlo drift check at a point.
#[derive(Debug, Clone, Serialize)]
pub struct DriftRow {
    pub x: Vec<f64>,
    pub x_norm: f64,
    /// Estimate of `PV(x) / V(x)`.
    pub ratio_hat: f64,
    pub std_error: f64,
    /// `PV <= lambda V + b` at three standard errors, tested as
    /// `ratio <= lambda + b/V(x) + 3 se`.
    pub drift_ok: bool,
    /// True when the additive slack `b / V(x)` overwhelms the estimate, so
    /// the row carries no information about `lambda_tilde`.
    pub b_dominates: bool,
    pub beyond_r_eps: bool,
    /// For `||x|| > R_eps`: `ratio <= lambda + 3 se`.
    pub tail_contraction_ok: Option<bool>,
    pub nonfinite_proposals: usize,
}

/// Monte Carlo drift verification report.
#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub n_per_point: usize,
    pub seed: u64,
    pub rows: Vec<DriftRow>,
    pub all_pass: bool,
}

/// Monte Carlo check of `PV <= lambda_tilde V + b` at the given points.
///
/// The ratio `PV(x)/V(x)` has the overflow-free form
/// `E[min(1, h) V(y)/V(x) + (1 - min(1, h))] = E[exp(-|d|/2) + max(0, 1 - exp(d))]`
/// with `d = log f(y) - log f(x)`, so the check runs at any radius where the
/// log-density is finite.
pub fn verify_drift_mc(
    cert: &DriftMinCert,
    bundle: &TargetBundle,
    prop: &RadialProposal,
    points: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> Result<DriftReport> {
    if n < 1_000 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            constraint: "n >= 1000",
        });
    }
    let mut rows = Vec::with_capacity(points.len());
    for (idx, x) in points.iter().enumerate() {
        if x.len() != bundle.dim() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: bundle.dim(),
                context: "verify_drift_mc point",
            });
        }
        let mut rng = rng::stream_rng(seed, idx as u64 + 1);
        let lx = bundle.target().log_density(x);
        if !lx.is_finite() {
            return Err(Error::NonFiniteLogDensity {
                at: x.clone(),
                context: "verify_drift_mc",
            });
        }
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut nonfinite = 0usize;
        for _ in 0..n {
            let z = prop.sample_increment(&mut rng);
            let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
            let ly = bundle.target().log_density(&y);
            let v = if ly.is_finite() {
                let d = ly - lx;
                (-(d.abs()) / 2.0).exp() + (1.0 - d.exp()).max(0.0)
            } else {
                // Non-finite proposals reject: the chain stays, contributing
                // V(x)/V(x) = 1.
                nonfinite += 1;
                1.0
            };
            sum += v;
            sum_sq += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        let se = (var / nf).sqrt();
        // b / V(x) = exp(log_b + log f(x) / 2), saturating.
        let b_over_v_log = cert.log_b + 0.5 * lx;
        let b_over_v = if b_over_v_log > 700.0 {
            f64::INFINITY
        } else {
            b_over_v_log.exp()
        };
        let x_norm = numeric::norm(x);
        let beyond = x_norm > cert.r_eps;
        let drift_ok = mean <= cert.lambda_tilde + b_over_v + 3.0 * se;
        let tail_ok = beyond.then(|| mean <= cert.lambda_tilde + 3.0 * se);
        rows.push(DriftRow {
            x: x.clone(),
            x_norm,
            ratio_hat: mean,
            std_error: se,
            drift_ok,
            b_dominates: b_over_v > 1.0,
            beyond_r_eps: beyond,
            tail_contraction_ok: tail_ok,
            nonfinite_proposals: nonfinite,
        });
    }
    let all_pass = rows
        .iter()
        .all(|r| r.drift_ok && r.tail_contraction_ok.unwrap_or(true));
    Ok(DriftReport {
        n_per_point: n,
        seed,
        rows,
        all_pass,
    })
}

/// Options for the minorization quadrature check.
#[derive(Debug, Clone)]
pub struct MinorOptions {
    /// Number of probe states inside the small set.
    pub n_x: usize,
    /// Number of random cell-union test sets.
    pub n_sets: usize,
    pub seed: u64,
    /// Quadrature tolerance for each integral.
    pub tol: f64,
}

impl Default for MinorOptions {
    fn default() -> Self {
        Self {
            n_x: 50,
            n_sets: 200,
            seed: 0,
            tol: 1e-8,
        }
    }
}

/// One failed minorization comparison.
#[derive(Debug, Clone, Serialize)]
pub struct MinorFailure {
    pub x: Vec<f64>,
    pub set_cells: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Minorization verification report.
#[derive(Debug, Clone, Serialize)]
pub struct MinorReport {
    pub eta_tilde: f64,
    pub r_max: f64,
    pub vacuous: bool,
    pub checks: usize,
    pub failures: usize,
    pub worst_margin: f64,
    pub failing: Vec<MinorFailure>,
    pub pass: bool,
    pub annotation: String,
}

/// Quadrature check of `P(x, A) >= eta_tilde nu(A)` on a grid (p <= 2).
///
/// `A` ranges over the grid cells and over random unions of cells; only the
/// absolutely continuous part of the kernel enters the left side, which makes
/// the check conservative. States `x` are spread over the small set.
pub fn verify_minorization_grid(
    cert: &DriftMinCert,
    bundle: &TargetBundle,
    prop: &RadialProposal,
    grid: &Grid,
    opts: &MinorOptions,
) -> Result<MinorReport> {
    let p = bundle.dim();
    if p > 2 {
        return Err(Error::OracleDimension { dim: p });
    }
    if grid.dim() != p {
        return Err(Error::DimensionMismatch {
            left: grid.dim(),
            right: p,
            context: "verify_minorization_grid",
        });
    }
    let r = cert.r_max;
    let ball_volume = numeric::unit_ball_volume(p) * r.powi(p as i32);

    // Probe states spread over the small set.
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(opts.n_x);
    let mut rng = rng::stream_rng(opts.seed, 0);
    if p == 1 {
        for i in 0..opts.n_x {
            let t = if opts.n_x == 1 {
                0.0
            } else {
                -0.98 + 1.96 * i as f64 / (opts.n_x - 1) as f64
            };
            xs.push(vec![t * r]);
        }
    } else {
        while xs.len() < opts.n_x {
            let cand: Vec<f64> = (0..p).map(|_| rng.random_range(-r..r)).collect();
            if numeric::norm(&cand) <= 0.98 * r {
                xs.push(cand);
            }
        }
    }

    // Test sets: every grid cell, then random unions.
    let n_cells = grid.n_cells();
    let mut sets: Vec<Vec<usize>> = (0..n_cells).map(|i| vec![i]).collect();
    for _ in 0..opts.n_sets {
        let k = rng.random_range(1..=(n_cells / 4).max(2));
        let mut cells: Vec<usize> = (0..k).map(|_| rng.random_range(0..n_cells)).collect();
        cells.sort_unstable();
        cells.dedup();
        sets.push(cells);
    }

    // Per-cell overlap volumes with the small set.
    let cell_ball_volume: Vec<f64> = (0..n_cells)
        .map(|i| grid.cell_ball_overlap(i, r))
        .collect();

    let mut checks = 0usize;
    let mut failures = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut failing = Vec::new();
    for x in &xs {
        let lx = bundle.target().log_density(x);
        // Kernel mass of one cell, absolutely continuous part only.
        let cell_mass = |cell: usize| -> f64 {
            let (lo, hi) = grid.cell_bounds(cell);
            let integrand = |y: &[f64]| {
                let ly = bundle.target().log_density(y);
                let ln_alpha = (ly - lx).min(0.0);
                let ln_q = prop.radial_log_density(numeric::dist(x, y));
                (ln_alpha + ln_q).exp()
            };
            let rect = numeric::BoxRect::new(lo, hi).expect("grid cell bounds");
            numeric::cubature_box(&integrand, &rect, opts.tol * 1e-2)
        };
        let masses: Vec<f64> = (0..n_cells).map(cell_mass).collect();
        for set in &sets {
            let lhs: f64 = set.iter().map(|&c| masses[c]).sum();
            let overlap: f64 = set.iter().map(|&c| cell_ball_volume[c]).sum();
            let rhs = cert.eta_tilde * overlap / ball_volume;
            checks += 1;
            let margin = lhs - rhs;
            if margin < worst_margin {
                worst_margin = margin;
            }
            if lhs < rhs - opts.tol {
                failures += 1;
                if failing.len() < 32 {
                    failing.push(MinorFailure {
                        x: x.clone(),
                        set_cells: set.clone(),
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    let annotation = if cert.vacuous {
        "eta_tilde underflowed to zero; the inequality is vacuously true".to_string()
    } else if !grid.covers_ball(r) {
        format!("grid extent does not cover B(0, {r:.6e}): check is partial")
    } else {
        String::new()
    };
    Ok(MinorReport {
        eta_tilde: cert.eta_tilde,
        r_max: r,
        vacuous: cert.vacuous,
        checks,
        failures,
        worst_margin,
        failing,
        pass: failures == 0,
        annotation,
    })
}
