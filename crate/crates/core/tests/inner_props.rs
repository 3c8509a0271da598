use std::f64::consts::TAU;

use bakerlab::inner::{find_denjoy_wolff, mu_p, mu_p_quadrature, CircleArc};
use bakerlab::maps::{registry_get, MapSpec, ParamValue, Params};
use num_complex::Complex64;
use proptest::prelude::*;

fn blaschke(zeros: &[Complex64]) -> MapSpec {
    let list = zeros.iter().map(|a| ParamValue::Text(format!("{}+{}i", a.re, a.im))).collect();
    let params: Params = [("zeros".to_string(), ParamValue::List(list))].into_iter().collect();
    registry_get("blaschke", &params).unwrap()
}

fn zeros() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((0.0f64..0.9, 0.0f64..TAU).prop_map(|(r, t)| Complex64::from_polar(r, t)), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unimodular_on_the_circle(zs in zeros(), theta in 0.0f64..TAU) {
        let b = blaschke(&zs).blaschke().unwrap();
        let w = b.eval(Complex64::from_polar(1.0, theta));
        prop_assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_degree_is_blaschke_degree(zs in zeros()) {
        let b = blaschke(&zs).blaschke().unwrap();
        let n = 4096;
        let mut turn = 0.0;
        let mut prev = b.eval(Complex64::new(1.0, 0.0));
        for k in 1..=n {
            let w = b.eval(Complex64::from_polar(1.0, TAU * k as f64 / n as f64));
            turn += (w / prev).arg();
            prev = w;
        }
        prop_assert_eq!((turn / TAU).round() as usize, zs.len());
    }

    #[test]
    fn mu_p_is_additive(s in 0.2f64..2.0, l1 in 0.05f64..2.0, l2 in 0.05f64..2.0) {
        let p = Complex64::new(1.0, 0.0);
        let a = CircleArc::new(s, s + l1).unwrap();
        let b = CircleArc::new(s + l1, s + l1 + l2).unwrap();
        let ab = CircleArc::new(s, s + l1 + l2).unwrap();
        let sum = mu_p(&a, p).value + mu_p(&b, p).value;
        prop_assert!((sum - mu_p(&ab, p).value).abs() <= 1e-12 * sum);
        let q = mu_p_quadrature(&a, p, 1e-10).value + mu_p_quadrature(&b, p, 1e-10).value;
        prop_assert!((q - mu_p_quadrature(&ab, p, 1e-10).value).abs() <= 1e-8 * sum);
    }

    #[test]
    fn q_estimators_agree_on_mobius(a in 0.05f64..0.9) {
        let params: Params = [("a".to_string(), ParamValue::Number(a))].into_iter().collect();
        let g = registry_get("mobius", &params).unwrap();
        let dw = find_denjoy_wolff(&g, Complex64::new(0.0, 0.0), 10_000).unwrap();
        prop_assert!((dw.q - (1.0 - a) / (1.0 + a)).abs() < 1e-12);
        prop_assert!(dw.diagnostics.estimator_gap < 1e-6, "gap {}", dw.diagnostics.estimator_gap);
    }

    #[test]
    fn q_estimators_agree_on_degree_two(x in 0.3f64..0.9, y in 0.0f64..0.5) {
        // Zeros -x ± iy: real coefficients and a boundary fixed point at 1.
        let zs = [Complex64::new(-x, y), Complex64::new(-x, -y)];
        prop_assume!(zs[0].norm() < 0.95);
        let g = blaschke(&zs);
        let b = g.blaschke().unwrap();
        prop_assume!(b.lift_derivative(0.0) < 0.9);
        let dw = find_denjoy_wolff(&g, Complex64::new(0.0, 0.0), 10_000).unwrap();
        prop_assert!((dw.p - 1.0).norm() < 1e-9);
        prop_assert!(dw.diagnostics.estimator_gap < 1e-6, "gap {}", dw.diagnostics.estimator_gap);
    }
}
