//! Cone-condition constants.
//!
//! The certain-acceptance region of a superexponential target contains a
//! fixed-geometry cone once the curvature condition holds; the constants
//! here measure how much proposal mass that cone pins down:
//!
//! * `R_alpha` — radius of a ball inscribed in the cone;
//! * `lambda_tilde` — the drift factor `1 - Q(box) / (1 + eps_alpha)`, with
//!   the box inscribed in that ball at unit distance from the current state;
//! * `eps` and `delta` — the slab-thickness pair controlling how far out the
//!   drift inequality kicks in.

use crate::error::{Error, Result};
use crate::numeric::{self, BoxRect};
use crate::proposal::RadialProposal;
use serde::Serialize;

/// Cone aperture and the derived admissible range for `eps_alpha`.
///
/// Constraints: `0 < K <= 1/3`, `0 < alpha < acos(7/8)`,
/// `0 < eps_alpha < min(eps_alpha_tilde, 1/3)` with
/// `eps_alpha_tilde = sqrt(8 - 8 cos(alpha))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConeParams {
    pub k: f64,
    pub eps_alpha: f64,
    pub alpha: f64,
    pub eps_alpha_tilde: f64,
}

impl ConeParams {
    pub fn new(k: f64, eps_alpha: f64, alpha: f64) -> Result<Self> {
        if !(k > 0.0 && k <= 1.0 / 3.0) {
            return Err(Error::InvalidParameter {
                name: "K",
                value: k,
                constraint: "0 < K <= 1/3",
            });
        }
        let alpha_max = (7.0f64 / 8.0).acos();
        if !(alpha > 0.0 && alpha < alpha_max) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "0 < alpha < acos(7/8)",
            });
        }
        let eps_alpha_tilde = (8.0 - 8.0 * alpha.cos()).sqrt();
        let cap = eps_alpha_tilde.min(1.0 / 3.0);
        if !(eps_alpha > 0.0 && eps_alpha < cap) {
            return Err(Error::InvalidParameter {
                name: "eps_alpha",
                value: eps_alpha,
                constraint: "0 < eps_alpha < min(eps_alpha_tilde, 1/3)",
            });
        }
        Ok(Self {
            k,
            eps_alpha,
            alpha,
            eps_alpha_tilde,
        })
    }

    /// Defaults driven by a curvature constant: `K = 1/3`, aperture just
    /// under its cap, `eps_alpha = min(eta, 0.3) (1 - 1e-9)`.
    pub fn for_curvature(eta: f64) -> Result<Self> {
        let alpha = 0.999 * (7.0f64 / 8.0).acos();
        Self::new(1.0 / 3.0, eta.min(0.3) * (1.0 - 1e-9), alpha)
    }
}

/// Radius of the ball inscribed in the acceptance cone.
pub fn cone_radius(params: &ConeParams) -> f64 {
    let c = 1.0 - params.eps_alpha * params.eps_alpha / 8.0;
    let s = (1.0 - c * c).sqrt();
    params.k * c * s / (1.0 + s)
}

/// The box at unit distance whose proposal mass drives the drift factor.
pub fn drift_box(p: usize, r_alpha: f64) -> Result<BoxRect> {
    let half = r_alpha / (p as f64).sqrt();
    let mut lo = vec![-half; p];
    let mut hi = vec![half; p];
    lo[0] = -half - 1.0;
    hi[0] = half - 1.0;
    BoxRect::new(lo, hi)
}

/// Drift factor `lambda_tilde = 1 - Q(0, box) / (1 + eps_alpha)`.
pub fn drift_factor(prop: &RadialProposal, params: &ConeParams) -> Result<f64> {
    Ok(drift_factor_with_mass(prop, params)?.0)
}

/// Drift factor together with the box mass it consumed.
pub fn drift_factor_with_mass(
    prop: &RadialProposal,
    params: &ConeParams,
) -> Result<(f64, f64)> {
    let r_alpha = cone_radius(params);
    let rect = drift_box(prop.dim(), r_alpha)?;
    let mass = prop.box_probability(&rect)?.value;
    if mass <= 1e-300 {
        return Err(Error::DegenerateConeVolume);
    }
    Ok((1.0 - mass / (1.0 + params.eps_alpha), mass))
}

/// The `(eps, delta, K_eps)` triple.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpsDelta {
    pub eps: f64,
    pub delta: f64,
    pub k_eps: f64,
    /// The drift-box mass that capped `eps`.
    pub box_mass: f64,
}

/// Compute `eps` at its upper limit `eps_alpha / (8 (1 + eps_alpha)) * Q(box)`,
/// the tail radius `K_eps`, and `delta = eps / (2 q(0) C_B(p) K_eps^{p-1})`.
///
/// The factor two realizes the strict inequality `delta < sup`; smaller `eps`
/// only enlarges the drift radius, so the limit is the default.
pub fn epsilon_delta(prop: &RadialProposal, params: &ConeParams) -> Result<EpsDelta> {
    let p = prop.dim();
    let (_, box_mass) = drift_factor_with_mass(prop, params)?;
    let eps = 0.125 * params.eps_alpha / (1.0 + params.eps_alpha) * box_mass;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            constraint: "0 < eps < 1 (degenerate drift box mass)",
        });
    }
    let k_eps = prop.tail_radius(eps)?;
    let delta =
        eps / (2.0 * prop.q0() * numeric::unit_ball_volume(p) * k_eps.powi(p as i32 - 1));
    Ok(EpsDelta {
        eps,
        delta,
        k_eps,
        box_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn cone_radius_hand_values() {
        let p = ConeParams::new(1.0 / 3.0, 0.2, 0.999 * (7.0f64 / 8.0).acos()).unwrap();
        assert!(close(cone_radius(&p), 0.030117, 1e-6));
        let p = ConeParams::new(1.0 / 3.0, 0.3, 0.999 * (7.0f64 / 8.0).acos()).unwrap();
        assert!(close(cone_radius(&p), 0.042884, 1e-6));
    }

    #[test]
    fn cone_radius_vanishes_with_aperture() {
        // R_alpha ~ K eps_alpha / 2 for small apertures.
        let alpha = 0.999 * (7.0f64 / 8.0).acos();
        let mut last = f64::INFINITY;
        for eps in [0.3, 0.1, 0.01, 1e-4] {
            let r = cone_radius(&ConeParams::new(1.0 / 3.0, eps, alpha).unwrap());
            assert!(r < last);
            last = r;
        }
        assert!(last < 2e-5);
    }

    #[test]
    fn cone_radius_below_k_and_increasing_in_eps_alpha() {
        let alpha = 0.999 * (7.0f64 / 8.0).acos();
        let mut last = 0.0;
        for eps in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3] {
            let p = ConeParams::new(1.0 / 3.0, eps, alpha).unwrap();
            let r = cone_radius(&p);
            assert!(r > 0.0 && r < p.k);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn param_validation() {
        let alpha = 0.999 * (7.0f64 / 8.0).acos();
        assert!(ConeParams::new(0.5, 0.2, alpha).is_err()); // K > 1/3
        assert!(ConeParams::new(1.0 / 3.0, 0.34, alpha).is_err()); // eps_alpha >= 1/3
        assert!(ConeParams::new(1.0 / 3.0, 0.2, 1.0).is_err()); // alpha too wide
        assert!(ConeParams::for_curvature(0.99).is_ok());
    }

    #[test]
    fn drift_factor_gaussian_hand_value() {
        // Box mass Phi(1.0301) - Phi(0.9699) ~ 0.01456; lambda ~ 0.98787.
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let params = ConeParams::new(1.0 / 3.0, 0.2, 0.999 * (7.0f64 / 8.0).acos()).unwrap();
        let (lambda, mass) = drift_factor_with_mass(&prop, &params).unwrap();
        assert!(close(mass, 0.01456, 2e-5), "mass {mass}");
        assert!(close(lambda, 0.98787, 2e-5), "lambda {lambda}");
    }

    #[test]
    fn drift_factor_formula_limit() {
        // If the box had mass one, lambda = eps_alpha / (1 + eps_alpha).
        let eps_alpha = 0.2f64;
        let lambda = 1.0 - 1.0 / (1.0 + eps_alpha);
        assert!(close(lambda, eps_alpha / (1.0 + eps_alpha), 1e-15));
    }

    #[test]
    fn drift_factor_monotone_in_box_mass() {
        let params = ConeParams::new(1.0 / 3.0, 0.2, 0.999 * (7.0f64 / 8.0).acos()).unwrap();
        let p1 = RadialProposal::gaussian(1, 1.0).unwrap();
        let p2 = RadialProposal::gaussian(1, 1.5).unwrap();
        let (l1, m1) = drift_factor_with_mass(&p1, &params).unwrap();
        let (l2, m2) = drift_factor_with_mass(&p2, &params).unwrap();
        // Whichever proposal puts more mass in the box gets the smaller factor.
        assert_eq!(m1 > m2, l1 < l2);
    }

    #[test]
    fn epsilon_delta_hand_values() {
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let params = ConeParams::new(1.0 / 3.0, 0.2, 0.999 * (7.0f64 / 8.0).acos()).unwrap();
        let ed = epsilon_delta(&prop, &params).unwrap();
        assert!(close(ed.eps, 3.033e-4, 5e-7), "eps {}", ed.eps);
        assert!(close(ed.k_eps, 3.612, 2e-3), "k_eps {}", ed.k_eps);
        assert!(close(ed.delta, 1.901e-4, 5e-7), "delta {}", ed.delta);
        // delta * q0 * C_B(p) * K_eps^{p-1} = eps / 2 exactly.
        let lhs = ed.delta * prop.q0() * numeric::unit_ball_volume(1);
        assert!(close(lhs, ed.eps / 2.0, 1e-18));
    }

    #[test]
    fn epsilon_delta_positive_in_2d() {
        let prop = RadialProposal::gaussian(2, 1.0).unwrap();
        let params = ConeParams::for_curvature(0.9).unwrap();
        let ed = epsilon_delta(&prop, &params).unwrap();
        assert!(ed.delta > 0.0);
        let lhs = ed.delta * prop.q0() * numeric::unit_ball_volume(2) * ed.k_eps;
        assert!(close(lhs, ed.eps / 2.0, 1e-18));
    }
}
