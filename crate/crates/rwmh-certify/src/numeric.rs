//! Shared numeric kernels: quadrature, monotone inversion, special-function
//! wrappers, log-space helpers, and the empirical-distribution statistics the
//! verifiers use.

use crate::error::{Error, Result};
use statrs::function::erf::erf;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance.
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// log(exp(a) + exp(b)) without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// log(sum exp(terms)) without overflow.
pub fn ln_sum_exp(terms: &[f64]) -> f64 {
    let hi = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile, by bisection on the CDF (|error| < 1e-12).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(a, x)
    }
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

/// Volume of the unit ball in dimension `p`: pi^{p/2} / Gamma(p/2 + 1).
pub fn unit_ball_volume(p: usize) -> f64 {
    let p = p as f64;
    (0.5 * p * std::f64::consts::PI.ln() - ln_gamma(0.5 * p + 1.0)).exp()
}

/// Smallest `u` in `[lo, hi]` with `f(u) <= target`, for non-increasing `f`;
/// bisection to absolute tolerance `tol`.
pub fn bisect_nonincreasing(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol: f64,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse of a continuous strictly increasing `f` on `[domain_inf, inf)`.
///
/// Below-range arguments map to `domain_inf`; the bracket is grown until it
/// contains the target, then bisected to `tol`.
pub fn invert_increasing(
    f: impl Fn(f64) -> f64,
    domain_inf: f64,
    target: f64,
    tol: f64,
) -> f64 {
    if target <= f(domain_inf) {
        return domain_inf;
    }
    let mut lo = domain_inf;
    let mut width = 1.0;
    let mut hi = domain_inf + width;
    for _ in 0..2000 {
        if f(hi) >= target {
            break;
        }
        lo = hi;
        width *= 2.0;
        hi = domain_inf + width;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Axis-aligned box in `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                left: lo.len(),
                right: hi.len(),
                context: "box bounds",
            });
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(Error::InvalidParameter {
                    name: "box",
                    value: if l > h { l } else { f64::NAN },
                    constraint: "finite bounds with lo <= hi per axis",
                });
            }
            let _ = i;
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product()
    }

    pub fn contains(&self, other: &BoxRect) -> bool {
        self.lo
            .iter()
            .zip(&other.lo)
            .all(|(outer, inner)| outer <= inner)
            && self
                .hi
                .iter()
                .zip(&other.hi)
                .all(|(outer, inner)| outer >= inner)
    }
}

/// Iterated adaptive Simpson over an axis-aligned box (p <= 3).
pub fn cubature_box(f: &dyn Fn(&[f64]) -> f64, rect: &BoxRect, tol: f64) -> f64 {
    match rect.dim() {
        1 => adaptive_simpson(&|x| f(&[x]), rect.lo[0], rect.hi[0], tol),
        2 => {
            let inner_tol = tol / (rect.hi[0] - rect.lo[0]).max(1.0);
            adaptive_simpson(
                &|x| adaptive_simpson(&|y| f(&[x, y]), rect.lo[1], rect.hi[1], inner_tol),
                rect.lo[0],
                rect.hi[0],
                tol,
            )
        }
        3 => {
            let inner_tol = tol / (rect.hi[0] - rect.lo[0]).max(1.0);
            adaptive_simpson(
                &|x| {
                    let inner2 = inner_tol / (rect.hi[1] - rect.lo[1]).max(1.0);
                    adaptive_simpson(
                        &|y| {
                            adaptive_simpson(&|z| f(&[x, y, z]), rect.lo[2], rect.hi[2], inner2)
                        },
                        rect.lo[1],
                        rect.hi[1],
                        inner_tol,
                    )
                },
                rect.lo[0],
                rect.hi[0],
                tol,
            )
        }
        d => panic!("cubature_box supports p <= 3, got {d}"),
    }
}

const HALTON_PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while n > 0 {
        denom *= base as f64;
        inv += (n % base) as f64 / denom;
        n /= base;
    }
    inv
}

/// Randomized quasi-Monte Carlo mean of `f` over a box.
///
/// Halton points with Cranley-Patterson rotations; returns the integral
/// estimate and a standard error across the randomized replicates.
pub fn qmc_box(
    f: &dyn Fn(&[f64]) -> f64,
    rect: &BoxRect,
    points_per_replicate: usize,
    replicates: usize,
    seed: u64,
) -> (f64, f64) {
    use rand::Rng as _;
    use rand::SeedableRng as _;
    let p = rect.dim();
    assert!(p <= HALTON_PRIMES.len(), "qmc_box supports p <= 8");
    let vol = rect.volume();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(replicates);
    let mut x = vec![0.0; p];
    for _ in 0..replicates {
        let shifts: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let mut acc = 0.0;
        for n in 0..points_per_replicate {
            for j in 0..p {
                let u = (radical_inverse(n as u64 + 1, HALTON_PRIMES[j] as u64) + shifts[j])
                    .fract();
                x[j] = rect.lo[j] + u * (rect.hi[j] - rect.lo[j]);
            }
            acc += f(&x);
        }
        estimates.push(vol * acc / points_per_replicate as f64);
    }
    let (mean, se) = mean_and_se(&estimates);
    (mean, se)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let step = h * (1.0 + x[i].abs());
        xp[i] = x[i] + step;
        let fp = f(&xp);
        xp[i] = x[i] - step;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

/// Central finite-difference Hessian of `f` at `x` (row-major p*p).
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let p = x.len();
    let mut hess = vec![0.0; p * p];
    let f0 = f(x);
    let mut xp = x.to_vec();
    for i in 0..p {
        let hi = h * (1.0 + x[i].abs());
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        hess[i * p + i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..p {
            let hj = h * (1.0 + x[j].abs());
            xp[i] = x[i] + hi;
            xp[j] = x[j] + hj;
            let fpp = f(&xp);
            xp[j] = x[j] - hj;
            let fpm = f(&xp);
            xp[i] = x[i] - hi;
            let fmm = f(&xp);
            xp[j] = x[j] + hj;
            let fmp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hess[i * p + j] = v;
            hess[j * p + i] = v;
        }
    }
    hess
}

/// Largest eigenvalue of a symmetric matrix (row-major), by power iteration
/// with a spectral shift so the dominant eigenvalue of the shifted matrix is
/// the most positive one.
pub fn max_symmetric_eigenvalue(m: &[f64], p: usize) -> f64 {
    // Shift by the Gershgorin lower bound so all eigenvalues are >= 0.
    let mut shift = f64::INFINITY;
    for i in 0..p {
        let row_sum: f64 = (0..p)
            .filter(|&j| j != i)
            .map(|j| m[i * p + j].abs())
            .sum();
        shift = shift.min(m[i * p + i] - row_sum);
    }
    let mut v = vec![1.0; p];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let mut w = vec![0.0; p];
        for i in 0..p {
            for j in 0..p {
                w[i] += (m[i * p + j] - if i == j { shift } else { 0.0 }) * v[j];
            }
        }
        let n = norm(&w);
        if n == 0.0 {
            return shift;
        }
        for wi in &mut w {
            *wi /= n;
        }
        let new_lambda = n;
        let done = (new_lambda - lambda).abs() < 1e-12 * (1.0 + new_lambda.abs());
        lambda = new_lambda;
        v = w;
        if done {
            break;
        }
    }
    lambda + shift
}

/// Solve the p x p system `a x = b` by Gaussian elimination with partial
/// pivoting (`a` row-major, consumed).
pub fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let p = b.len();
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| {
            a[i * p + col]
                .abs()
                .partial_cmp(&a[j * p + col].abs())
                .unwrap()
        })?;
        if a[pivot * p + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..p {
                a.swap(col * p + k, pivot * p + k);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..p {
            let factor = a[row * p + col] / a[col * p + col];
            for k in col..p {
                a[row * p + k] -= factor * a[col * p + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for row in (0..p).rev() {
        let mut acc = b[row];
        for k in (row + 1)..p {
            acc -= a[row * p + k] * x[k];
        }
        x[row] = acc / a[row * p + row];
    }
    Some(x)
}

/// log |det A| and the sign of det A for a row-major p x p matrix.
pub fn log_abs_det(mut a: Vec<f64>, p: usize) -> Option<(f64, f64)> {
    let mut log_det = 0.0;
    let mut sign = 1.0;
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| {
            a[i * p + col]
                .abs()
                .partial_cmp(&a[j * p + col].abs())
                .unwrap()
        })?;
        if a[pivot * p + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..p {
                a.swap(col * p + k, pivot * p + k);
            }
            sign = -sign;
        }
        let d = a[col * p + col];
        log_det += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
        for row in (col + 1)..p {
            let factor = a[row * p + col] / d;
            for k in col..p {
                a[row * p + k] -= factor * a[col * p + k];
            }
        }
    }
    Some((log_det, sign))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_matches_tabulated() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // The erf backend is accurate to about 1e-11 absolute.
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 5e-11);
        assert!((normal_cdf(3.0) - 0.9986501019683699).abs() < 5e-11);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(&normal_pdf, -8.0, 8.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
        let half = adaptive_simpson(&normal_pdf, -1.0, 1.0, 1e-12);
        assert!((half - 0.6826894921370859).abs() < 1e-10);
    }

    #[test]
    fn cubature_matches_product_rule() {
        // N(0, I_2) mass of [-1,1]^2 = (2 Phi(1) - 1)^2.
        let rect = BoxRect::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let f = |x: &[f64]| normal_pdf(x[0]) * normal_pdf(x[1]);
        let v = cubature_box(&f, &rect, 1e-11);
        let expect = 0.6826894921370859f64.powi(2);
        assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
    }

    #[test]
    fn qmc_agrees_with_cubature() {
        let rect = BoxRect::new(vec![-1.0, -1.0, -1.0, -1.0], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let f = |x: &[f64]| x.iter().map(|&v| normal_pdf(v)).product::<f64>();
        let (v, se) = qmc_box(&f, &rect, 4096, 16, 7);
        let expect = 0.6826894921370859f64.powi(4);
        assert!((v - expect).abs() < 5.0 * se.max(1e-6), "{v} vs {expect} (se {se})");
    }

    #[test]
    fn invert_increasing_linear_and_below_range() {
        let f = |u: f64| 2.0 * u;
        assert!((invert_increasing(f, 0.0, 3.0, 1e-12) - 1.5).abs() < 1e-10);
        // Below-range convention: return the domain infimum.
        assert_eq!(invert_increasing(f, 0.0, -5.0, 1e-12), 0.0);
    }

    #[test]
    fn gamma_upper_chi_square_tail() {
        // P(chi2_2 > k^2) = exp(-k^2/2)
        let k: f64 = 2.447746830680816;
        let q = reg_gamma_upper(1.0, k * k / 2.0);
        assert!((q - 0.05).abs() < 1e-10);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-13);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let f = |x: &[f64]| -0.5 * (2.0 * x[0] * x[0] + x[1] * x[1]) + 0.3 * x[0] * x[1];
        let h = fd_hessian(&f, &[0.4, -0.7], 1e-4);
        assert!((h[0] + 2.0).abs() < 1e-5);
        assert!((h[3] + 1.0).abs() < 1e-5);
        assert!((h[1] - 0.3).abs() < 1e-5);
    }

    #[test]
    fn max_eig_of_known_matrix() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = vec![2.0, 1.0, 1.0, 2.0];
        assert!((max_symmetric_eigenvalue(&m, 2) - 3.0).abs() < 1e-9);
        // Negative definite: [[-1, 0], [0, -4]] has max eigenvalue -1.
        let m = vec![-1.0, 0.0, 0.0, -4.0];
        assert!((max_symmetric_eigenvalue(&m, 2) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn linear_solve_roundtrip() {
        let a = vec![3.0, 1.0, 1.0, 2.0];
        let x = solve_linear(a, vec![9.0, 8.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ks_statistics_sane() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let d = ks_one_sample(&a, |x| x.clamp(0.0, 1.0));
        assert!(d < 0.002, "{d}");
        let b: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0 + 0.2).collect();
        let d2 = ks_two_sample(&a, &b);
        assert!((d2 - 0.2).abs() < 0.01, "{d2}");
    }
}
