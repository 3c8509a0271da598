use bakerlab::classify::{
    classify_inner, classify_plane, gauss_divergence, thm_c_fit, BakerVerdict, GaussVerdict, SeriesSample, GAUSS_B,
    GAUSS_R,
};
use bakerlab::hyperbolic::{cayley, HalfPlane, MetricModel, StepSequence};
use bakerlab::inner::{DenjoyWolffData, DwDiagnostics, Multiplicity};
use bakerlab::maps::{registry_get, MapKind, MapSpec, ParamValue, Params};
use num_complex::Complex64;
use proptest::prelude::*;

fn parabolic3() -> DenjoyWolffData {
    let one = Complex64::new(1.0, 0.0);
    DenjoyWolffData {
        p: one,
        q: 1.0,
        q_root: 1.0,
        q_derivative: 1.0,
        multiplicity: Multiplicity::Parabolic3,
        diagnostics: DwDiagnostics {
            iterations: 0,
            final_gap: 0.0,
            fixed_point_residual: 0.0,
            derivative: one,
            second_derivative: Complex64::new(0.0, 0.0),
            derivative_minus_one: 0.0,
            second_derivative_abs: 0.0,
            parabolic_tol: 1e-8,
            cubic_tol: 1e-6,
            estimator_gap: 0.0,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_divergence_means_divergent_series(p in prop_oneof![0.6f64..=1.0, 1.1f64..2.0], c in 0.1f64..10.0, e in -0.9f64..5.0) {
        let s = SeriesSample::from_fn(1, 1000, |n| c * n.powf(-p) * (1.0 + e / (n + 1.0)));
        let g = gauss_divergence(&s, GAUSS_R, GAUSS_B).unwrap();
        if g.verdict == GaussVerdict::DivergentByGauss {
            prop_assert!(p <= 1.0, "p = {p}");
            // From n0 on, a_n ≥ a_{n0} n0/n up to the B/n^r factors, so the
            // partial sums grow at least logarithmically.
            let n0 = g.n0.unwrap();
            let head: f64 = s.a[..n0].iter().sum();
            let total: f64 = s.a.iter().sum();
            let floor = 0.1 * s.a[n0 - 1] * n0 as f64 * (1000.0 / n0 as f64).ln();
            prop_assert!(total - head >= floor);
        }
    }

    #[test]
    fn thm_c_implies_doubly_parabolic(c in -0.5f64..5.0, r in 1.2f64..3.0) {
        let steps = StepSequence {
            d: (1..=4096).map(|n| 1.0 / n as f64 + c * (n as f64).powf(-r)).collect(),
            n_offset: 1,
            metric: MetricModel::Disc,
            is_upper_bound: false,
        };
        if thm_c_fit(&steps).unwrap().satisfied {
            let v = classify_inner(&parabolic3(), &steps).unwrap().verdict;
            prop_assert_eq!(v, BakerVerdict::DoublyParabolic);
        }
    }

    #[test]
    fn disc_and_half_plane_models_agree(a in 0.1f64..0.9, x in 0.2f64..5.0, y in -5.0f64..5.0) {
        // (z + a)/(1 + az) on the disc is ω ↦ λω with λ = (1+a)/(1-a) on {Re ω > 0}.
        let params: Params = [("a".to_string(), ParamValue::Number(a))].into_iter().collect();
        let disc = registry_get("mobius", &params).unwrap();
        let lambda = (1.0 + a) / (1.0 - a);
        let plane = MapSpec::from_kind("affine", MapKind::AffineModel { lambda: Complex64::new(lambda, 0.0) });
        let w0 = Complex64::new(x, y);
        let v_disc = classify_plane(&disc, cayley(w0), &MetricModel::Disc, 200).unwrap().verdict;
        let v_plane = classify_plane(&plane, w0, &MetricModel::HalfPlane(HalfPlane::right(0.0)), 200).unwrap().verdict;
        prop_assert_eq!(v_disc, BakerVerdict::Hyperbolic);
        prop_assert_eq!(v_plane, v_disc);
    }
}
