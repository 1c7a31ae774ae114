//! Cross-module integration tests and property-based invariants.

use proptest::prelude::*;
use rwmh_certify::drift::{drift_certificate, verify_drift_mc};
use rwmh_certify::geometry::ConeParams;
use rwmh_certify::glm::{logistic_preset, GlmData};
use rwmh_certify::numeric::{self, BoxRect};
use rwmh_certify::oracle::{discretize, sandwich_check, stationary_and_slem, tv_decay, Grid};
use rwmh_certify::proposal::RadialProposal;
use rwmh_certify::rates::{assemble_rate_report, RateReportOptions};
use rwmh_certify::target::{
    combine_mixture, combine_product, gaussian_mixture_bundle, SuperexpCert, TargetBundle,
};
use std::sync::Arc;

#[test]
fn mixture_pipeline_with_2d_oracle() {
    // Full run on the planar mixture: certificate, rate report, grid oracle.
    let bundle = gaussian_mixture_bundle(0.5).unwrap();
    let prop = RadialProposal::gaussian(2, 1.0).unwrap();
    let params = ConeParams::for_curvature(bundle.curvature().eta).unwrap();
    let cert = drift_certificate(&bundle, &prop, &params).unwrap();
    assert!(cert.lambda_tilde > 0.0 && cert.lambda_tilde < 1.0);
    assert!(cert.r_eps_terms[1].is_some(), "p = 2 keeps the second radius term");
    let rates = assemble_rate_report(
        &cert,
        &bundle,
        &prop,
        &RateReportOptions {
            candidates: None,
            n_mc: 20_000,
            seed: 5,
            spectral: None,
        },
    )
    .unwrap();
    // The coupling upper bound is vacuous at these constants; the empirical
    // lower bounds are informative.
    assert!(rates.upper.vacuous);
    let acceptance = rates
        .lower_bounds
        .iter()
        .find(|l| l.method.as_str() == "acceptance")
        .unwrap();
    assert!((0.3..0.8).contains(&acceptance.value), "{}", acceptance.value);

    let grid = Grid::two_dim([-4.0, -4.0], [4.0, 4.0], [21, 21]).unwrap();
    let kernel = discretize(&bundle, &prop, &grid).unwrap();
    let (pi, slem) = stationary_and_slem(&kernel).unwrap();
    assert!(kernel.reversibility_residual(&pi) < 1e-6);
    // Converged value from an independent eigensolver run: 0.81288 (21x21),
    // 0.81299 (31x31).
    assert!((slem - 0.8129).abs() < 2e-3, "slem {slem}");
    let verdict = sandwich_check(&rates, slem, 1e-3);
    assert!(verdict.pass, "{verdict:#?}");
}

#[test]
fn laplace_proposal_pipeline() {
    // The non-separable proposal exercises the cubature route end to end.
    let bundle = TargetBundle::standard_normal(1).unwrap();
    let prop = RadialProposal::laplace(1, 1.0).unwrap();
    let params = ConeParams::for_curvature(bundle.curvature().eta).unwrap();
    let cert = drift_certificate(&bundle, &prop, &params).unwrap();
    assert!(cert.lambda_tilde > 0.0 && cert.lambda_tilde < 1.0);
    assert!(cert.r_eps.is_finite() && cert.r_eps >= cert.m_star);
    let report = verify_drift_mc(
        &cert,
        &bundle,
        &prop,
        &[vec![0.0], vec![1.1 * cert.r_eps]],
        20_000,
        3,
    )
    .unwrap();
    assert!(report.all_pass, "{:#?}", report.rows);

    let grid = Grid::one_dim(-8.0, 8.0, 161).unwrap();
    let kernel = discretize(&bundle, &prop, &grid).unwrap();
    let (_, slem) = stationary_and_slem(&kernel).unwrap();
    assert!(slem > 0.0 && slem < 1.0);
    let rates = assemble_rate_report(
        &cert,
        &bundle,
        &prop,
        &RateReportOptions {
            candidates: None,
            n_mc: 20_000,
            seed: 6,
            spectral: None, // no spectral route: -log q is not strongly convex
        },
    )
    .unwrap();
    let verdict = sandwich_check(&rates, slem, 1e-3);
    assert!(verdict.pass, "{verdict:#?}");
}

#[test]
fn logistic_preset_sandwich() {
    let x = vec![vec![1.0], vec![-1.0]];
    let y = vec![1.0, 0.0];
    let prop = RadialProposal::gaussian(1, 1.0).unwrap();
    let preset = logistic_preset(&x, &y, &prop, 0.5, 20_000, 11).unwrap();
    let grid = Grid::one_dim(-8.0, 8.0, 161).unwrap();
    let kernel = discretize(&preset.bundle, &prop, &grid).unwrap();
    let (_, slem) = stationary_and_slem(&kernel).unwrap();
    let verdict = sandwich_check(&preset.rates, slem, 1e-3);
    assert!(verdict.pass, "slem {slem}: {verdict:#?}");
    // TV decay of the discretized posterior chain is monotone.
    let tv = tv_decay(&kernel, kernel.n() / 5, 50).unwrap();
    for w in tv.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn product_bundle_certificate_flow() {
    // Product of two standard normals, renormalized explicitly: the combined
    // certificates feed the pipeline without manual adjustment.
    let b1 = TargetBundle::standard_normal(1).unwrap();
    let b2 = TargetBundle::standard_normal(1).unwrap();
    // f1 f2 = N(0, 1/2) density times 1/(2 sqrt(pi)); the correction is
    // +log(2 sqrt(pi)).
    let c0 = (2.0 * std::f64::consts::PI.sqrt()).ln();
    let prod = combine_product(&b1, &b2, Some((c0, rwmh_certify::target::NormQuality::Exact)))
        .unwrap();
    let expect_peak = 1.0 / (std::f64::consts::PI.sqrt());
    assert!((prod.p_star() - expect_peak).abs() < 1e-8, "{}", prod.p_star());
    let prop = RadialProposal::gaussian(1, 1.0).unwrap();
    let params = ConeParams::for_curvature(prod.curvature().eta).unwrap();
    let cert = drift_certificate(&prod, &prop, &params).unwrap();
    assert!(cert.r_eps.is_finite());
    // f_s = 2z makes the drift radius roughly half the single-normal one.
    let single = drift_certificate(&b1, &prop, &params).unwrap();
    assert!(cert.r_eps < 0.75 * single.r_eps);
}

#[test]
fn gradient_consistency_across_presets() {
    use rand::Rng;
    let mut rng = rwmh_certify::rng::stream_rng(77, 0);
    let mix = gaussian_mixture_bundle(2.5).unwrap();
    let points: Vec<Vec<f64>> = (0..12)
        .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
        .collect();
    assert!(rwmh_certify::target::gradient_consistency(mix.target(), &points) < 1e-5);

    let data = GlmData::from_csv("y,x1\n1,0.8\n0,-1.2\n1,0.4\n".as_bytes()).unwrap();
    let bundle = rwmh_certify::glm::logistic_bundle(&data.x, &data.y_scalar(), 0.4).unwrap();
    let points: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random_range(-3.0..3.0)]).collect();
    assert!(rwmh_certify::target::gradient_consistency(bundle.target(), &points) < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_probability_monotone_under_inclusion(
        center in proptest::collection::vec(-2.0f64..2.0, 1..=3),
        half in proptest::collection::vec(0.01f64..2.0, 1..=3),
        grow in 0.0f64..1.5,
        gaussian in proptest::bool::ANY,
    ) {
        let p = center.len().min(half.len());
        let center = &center[..p];
        let half = &half[..p];
        let inner = BoxRect::new(
            center.iter().zip(half).map(|(c, h)| c - h).collect(),
            center.iter().zip(half).map(|(c, h)| c + h).collect(),
        ).unwrap();
        let outer = BoxRect::new(
            center.iter().zip(half).map(|(c, h)| c - h - grow).collect(),
            center.iter().zip(half).map(|(c, h)| c + h + grow).collect(),
        ).unwrap();
        prop_assert!(outer.contains(&inner));
        let prop_dist = if gaussian {
            RadialProposal::gaussian(p, 0.8).unwrap()
        } else {
            RadialProposal::laplace(p, 0.8).unwrap()
        };
        let qi = prop_dist.box_probability(&inner).unwrap().value;
        let qo = prop_dist.box_probability(&outer).unwrap().value;
        prop_assert!(qi <= qo + 1e-9, "inner {qi} > outer {qo}");
    }

    #[test]
    fn tail_radius_monotone(
        eps1 in 0.001f64..0.9,
        factor in 1.01f64..50.0,
        dim in 1usize..=3,
    ) {
        let eps2 = (eps1 * factor).min(0.999);
        let q = RadialProposal::gaussian(dim, 1.3).unwrap();
        let k1 = q.tail_radius(eps1).unwrap();
        let k2 = q.tail_radius(eps2).unwrap();
        prop_assert!(k2 <= k1 + 1e-7, "K({eps2}) = {k2} > K({eps1}) = {k1}");
    }

    #[test]
    fn superexp_inverse_is_left_inverse(
        gamma in 0.1f64..10.0,
        c1 in -5.0f64..5.0,
        u in 0.0f64..50.0,
    ) {
        let cert = SuperexpCert::linear(gamma, c1, 0.0);
        prop_assert!((cert.f_s_inverse(cert.f_s(u)) - u).abs() < 1e-9);
        // Below-range arguments hit the domain infimum.
        prop_assert_eq!(cert.f_s_inverse(-1e-9), 0.0);

        let g = gamma;
        let power = SuperexpCert::from_monotone(
            Arc::new(move |v: f64| g * v + v * v),
            c1,
            0.0,
            0.0,
        );
        let u_small = u.min(20.0);
        prop_assert!((power.f_s_inverse(power.f_s(u_small)) - u_small).abs() < 1e-7);
    }

    #[test]
    fn mixture_density_is_convex_combination(
        a1 in 0.0f64..1.0,
        x in -4.0f64..4.0,
    ) {
        let b1 = TargetBundle::standard_normal(1).unwrap();
        let b2 = TargetBundle::standard_normal_with_eta(1, 0.5).unwrap();
        let mix = combine_mixture(&b1, &b2, a1, 1.0 - a1).unwrap();
        let f1 = b1.target().log_density(&[x]).exp();
        let f2 = b2.target().log_density(&[x]).exp();
        let fm = mix.target().log_density(&[x]).exp();
        let expect = a1 * f1 + (1.0 - a1) * f2;
        prop_assert!((fm - expect).abs() <= 1e-12 * expect.max(1e-300));
    }

    #[test]
    fn envelope_holds_for_random_mixture_weights(
        a1 in 0.05f64..0.95,
        x in -6.0f64..6.0,
        y in -6.0f64..6.0,
    ) {
        let b1 = gaussian_mixture_bundle(0.7).unwrap();
        let b2 = gaussian_mixture_bundle(1.8).unwrap();
        let mix = combine_mixture(&b1, &b2, a1, 1.0 - a1).unwrap();
        let r = numeric::norm(&[x, y]);
        let lf = mix.target().log_density(&[x, y]);
        prop_assert!(lf.abs() <= mix.envelope().eval(r) + 1e-9);
    }

    #[test]
    fn gaussian_box_matches_cubature(
        lo in -3.0f64..0.0,
        width in 0.1f64..4.0,
    ) {
        // Dual-route check: the analytic product-of-CDFs path versus the
        // generic adaptive cubature of the same density.
        let q = RadialProposal::gaussian(1, 1.0).unwrap();
        let rect = BoxRect::new(vec![lo], vec![lo + width]).unwrap();
        let analytic = q.box_probability(&rect).unwrap().value;
        let f = |z: &[f64]| q.radial_log_density(numeric::norm(z)).exp();
        let cubature = numeric::cubature_box(&f, &rect, 1e-11);
        prop_assert!((analytic - cubature).abs() < 1e-10,
            "analytic {analytic} vs cubature {cubature}");
    }
}
