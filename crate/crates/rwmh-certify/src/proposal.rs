//! Symmetric, strictly radially decreasing proposal distributions.
//!
//! A proposal here is a density `q` on `R^p` with `q(x, y) = q(||x - y||)`,
//! everywhere positive, and strictly decreasing in the radius. Two families
//! are built in:
//!
//! * isotropic Gaussian with scale `sigma`;
//! * radial Laplace, `q(r)` proportional to `exp(-r / s)`.
//!
//! Besides density evaluation and increment sampling, the constant pipeline
//! needs two volume computations: the probability of an axis-aligned box
//! (`box_probability`) and the radius containing all but `eps` of the mass
//! (`tail_radius`).

use crate::error::{Error, Result};
use crate::numeric::{self, BoxRect};
use crate::rng::CrateRng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

/// Built-in proposal families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum ProposalFamily {
    /// Isotropic Gaussian with scale `sigma` per coordinate.
    Gaussian { sigma: f64 },
    /// Radial Laplace: density proportional to `exp(-r / scale)`.
    Laplace { scale: f64 },
}

/// A symmetric random-walk proposal on `R^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProposal {
    dim: usize,
    family: ProposalFamily,
}

/// Result of a box-probability computation. `std_error` is `Some` only for
/// the quasi-Monte Carlo path (non-separable proposals in p > 3).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoxProbability {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl RadialProposal {
    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                constraint: "sigma > 0",
            });
        }
        Self::with_family(dim, ProposalFamily::Gaussian { sigma })
    }

    pub fn laplace(dim: usize, scale: f64) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                value: scale,
                constraint: "scale > 0",
            });
        }
        Self::with_family(dim, ProposalFamily::Laplace { scale })
    }

    pub fn with_family(dim: usize, family: ProposalFamily) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                constraint: "dim >= 1",
            });
        }
        Ok(Self { dim, family })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> ProposalFamily {
        self.family
    }

    /// True when the density factors across coordinates.
    pub fn separable(&self) -> bool {
        matches!(self.family, ProposalFamily::Gaussian { .. })
    }

    /// `log q(r)` for `r >= 0`.
    pub fn radial_log_density(&self, r: f64) -> f64 {
        let p = self.dim as f64;
        match self.family {
            ProposalFamily::Gaussian { sigma } => {
                -0.5 * p * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
                    - 0.5 * r * r / (sigma * sigma)
            }
            ProposalFamily::Laplace { scale } => {
                // Normalizer: Gamma(p/2) / (2 pi^{p/2} Gamma(p) s^p).
                let ln_c = numeric::ln_gamma_fn(0.5 * p)
                    - (2.0f64).ln()
                    - 0.5 * p * std::f64::consts::PI.ln()
                    - numeric::ln_gamma_fn(p)
                    - p * scale.ln();
                ln_c - r / scale
            }
        }
    }

    /// `q(0)`, the density maximum.
    pub fn q0(&self) -> f64 {
        self.radial_log_density(0.0).exp()
    }

    /// `q(||x - y||)`; symmetric in its arguments.
    pub fn density_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: y.len(),
                context: "density_at",
            });
        }
        Ok(self.radial_log_density(numeric::dist(x, y)).exp())
    }

    /// `Q(0, rect)`: mass the increment distribution assigns to a box.
    ///
    /// Separable families use exact products of one-dimensional integrals;
    /// otherwise adaptive cubature (absolute tolerance 1e-10) up to p = 3 and
    /// randomized quasi-Monte Carlo with a reported standard error above.
    pub fn box_probability(&self, rect: &BoxRect) -> Result<BoxProbability> {
        if rect.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: rect.dim(),
                right: self.dim,
                context: "box_probability",
            });
        }
        if rect.volume() == 0.0 {
            return Ok(BoxProbability {
                value: 0.0,
                std_error: None,
            });
        }
        match self.family {
            ProposalFamily::Gaussian { sigma } => {
                let value = rect
                    .lo
                    .iter()
                    .zip(&rect.hi)
                    .map(|(&l, &h)| {
                        numeric::normal_cdf(h / sigma) - numeric::normal_cdf(l / sigma)
                    })
                    .product();
                Ok(BoxProbability {
                    value,
                    std_error: None,
                })
            }
            ProposalFamily::Laplace { .. } => {
                let f = |z: &[f64]| self.radial_log_density(numeric::norm(z)).exp();
                if self.dim <= 3 {
                    let value = numeric::cubature_box(&f, rect, 1e-10);
                    Ok(BoxProbability {
                        value: value.clamp(0.0, 1.0),
                        std_error: None,
                    })
                } else {
                    let (value, se) = numeric::qmc_box(&f, rect, 1 << 13, 16, 0x9e3779b9);
                    Ok(BoxProbability {
                        value: value.clamp(0.0, 1.0),
                        std_error: Some(se),
                    })
                }
            }
        }
    }

    /// Mass outside the centered ball of radius `k`.
    pub fn complement_mass(&self, k: f64) -> f64 {
        if k <= 0.0 {
            return 1.0;
        }
        let p = self.dim as f64;
        match self.family {
            // ||Z|| has a chi distribution: P(||Z|| > k) = Q(p/2, k^2 / (2 sigma^2)).
            ProposalFamily::Gaussian { sigma } => {
                numeric::reg_gamma_upper(0.5 * p, 0.5 * k * k / (sigma * sigma))
            }
            // Radius has a Gamma(p, scale) law: P(R > k) = Q(p, k / scale).
            ProposalFamily::Laplace { scale } => numeric::reg_gamma_upper(p, k / scale),
        }
    }

    /// Smallest `K` (to 1e-8) with `Q(0, B(0, K)^c) <= eps`.
    pub fn tail_radius(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                constraint: "0 < eps < 1",
            });
        }
        let mut hi = 1.0;
        while self.complement_mass(hi) > eps {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidParameter {
                    name: "eps",
                    value: eps,
                    constraint: "tail radius bracket exhausted",
                });
            }
        }
        Ok(numeric::bisect_nonincreasing(
            |k| self.complement_mass(k),
            0.0,
            hi,
            eps,
            1e-8,
        ))
    }

    /// Draw one increment. Reproducible given the generator state.
    pub fn sample_increment(&self, rng: &mut CrateRng) -> Vec<f64> {
        match self.family {
            ProposalFamily::Gaussian { sigma } => (0..self.dim)
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                    sigma * z
                })
                .collect(),
            ProposalFamily::Laplace { scale } => {
                let gamma = rand_distr::Gamma::new(self.dim as f64, scale)
                    .expect("valid gamma parameters");
                let r: f64 = gamma.sample(rng);
                crate::rng::unit_sphere(rng, self.dim)
                    .into_iter()
                    .map(|d| d * r)
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{ks_one_sample, norm};
    use crate::rng::stream_rng;

    #[test]
    fn gaussian_density_values() {
        let q = RadialProposal::gaussian(1, 1.0).unwrap();
        assert!((q.density_at(&[0.0], &[0.0]).unwrap() - 0.3989422804014327).abs() < 1e-6);
        assert!((q.density_at(&[0.0], &[2.0]).unwrap() - 0.05399096651318806).abs() < 1e-6);
    }

    #[test]
    fn density_is_symmetric() {
        let q = RadialProposal::laplace(3, 0.7).unwrap();
        let mut rng = stream_rng(11, 0);
        use rand::Rng;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = q.density_at(&x, &y).unwrap();
            let b = q.density_at(&y, &x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let q = RadialProposal::gaussian(2, 1.0).unwrap();
        assert!(q.density_at(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn box_probability_gaussian_1d() {
        let q = RadialProposal::gaussian(1, 1.0).unwrap();
        let b = BoxRect::new(vec![-1.0], vec![1.0]).unwrap();
        assert!((q.box_probability(&b).unwrap().value - 0.6826894921370859).abs() < 1e-6);
        let empty = BoxRect::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(q.box_probability(&empty).unwrap().value, 0.0);
        let wide = BoxRect::new(vec![-8.0], vec![8.0]).unwrap();
        assert!((q.box_probability(&wide).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn laplace_box_matches_radial_mass() {
        // In 1-D the radial Laplace is the classic Laplace(0, s) density;
        // mass of [-t, t] is 1 - exp(-t/s).
        let q = RadialProposal::laplace(1, 0.5).unwrap();
        let b = BoxRect::new(vec![-1.0], vec![1.0]).unwrap();
        let got = q.box_probability(&b).unwrap().value;
        let expect = 1.0 - (-2.0f64).exp();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn laplace_2d_box_integrates_to_one() {
        let q = RadialProposal::laplace(2, 0.4).unwrap();
        let b = BoxRect::new(vec![-12.0, -12.0], vec![12.0, 12.0]).unwrap();
        let got = q.box_probability(&b).unwrap().value;
        assert!((got - 1.0).abs() < 1e-7, "{got}");
    }

    #[test]
    fn tail_radius_gaussian() {
        let q1 = RadialProposal::gaussian(1, 1.0).unwrap();
        assert!((q1.tail_radius(0.05).unwrap() - 1.959964).abs() < 1e-5);
        let q2 = RadialProposal::gaussian(2, 1.0).unwrap();
        assert!((q2.tail_radius(0.05).unwrap() - 2.447747).abs() < 1e-5);
        // eps near 1 excludes almost everything.
        assert!(q1.tail_radius(0.999999).unwrap() < 2e-6);
    }

    #[test]
    fn tail_radius_nonincreasing_in_eps() {
        let q = RadialProposal::laplace(2, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.05, 0.1, 0.3, 0.6, 0.9] {
            let k = q.tail_radius(eps).unwrap();
            assert!(k <= last + 1e-8, "tail radius must not increase");
            last = k;
        }
    }

    #[test]
    fn increments_reproducible_and_calibrated() {
        let q = RadialProposal::gaussian(1, 1.0).unwrap();
        let a: Vec<f64> = {
            let mut rng = stream_rng(42, 0);
            (0..16).flat_map(|_| q.sample_increment(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = stream_rng(42, 0);
            (0..16).flat_map(|_| q.sample_increment(&mut rng)).collect()
        };
        assert_eq!(a, b);

        let mut rng = stream_rng(1234, 1);
        let n = 100_000;
        let mut sum = 0.0;
        let mut beyond = 0usize;
        let k05 = q.tail_radius(0.05).unwrap();
        for _ in 0..n {
            let z = q.sample_increment(&mut rng)[0];
            sum += z;
            if z.abs() > k05 {
                beyond += 1;
            }
        }
        let mean = sum / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        let freq = beyond as f64 / n as f64;
        assert!((0.04..=0.06).contains(&freq), "tail frequency {freq}");
    }

    #[test]
    fn increment_norms_match_radial_law() {
        // Kolmogorov-Smirnov of sampled radii against the analytic radial CDF.
        for (q, tag) in [
            (RadialProposal::gaussian(3, 1.3).unwrap(), "gauss3"),
            (RadialProposal::laplace(2, 0.8).unwrap(), "laplace2"),
        ] {
            let mut rng = stream_rng(99, 3);
            let radii: Vec<f64> = (0..100_000)
                .map(|_| norm(&q.sample_increment(&mut rng)))
                .collect();
            let d = ks_one_sample(&radii, |r| 1.0 - q.complement_mass(r));
            assert!(d < 0.02, "{tag}: KS {d}");
        }
    }
}
