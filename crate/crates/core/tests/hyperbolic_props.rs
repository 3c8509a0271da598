use bakerlab::hyperbolic::{cayley, dist_disc, dist_halfplane, step_sequence, HalfPlane, MetricModel};
use bakerlab::maps::{registry_get, ParamValue, Params};
use num_complex::Complex64;
use proptest::prelude::*;

fn disc_point() -> impl Strategy<Value = Complex64> {
    (0.0f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn right_point() -> impl Strategy<Value = Complex64> {
    (0.01f64..10.0, -10.0f64..10.0).prop_map(|(x, y)| Complex64::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cayley_transport(w1 in right_point(), w2 in right_point()) {
        let h = dist_halfplane(&HalfPlane::right(0.0), w1, w2).unwrap();
        let d = dist_disc(cayley(w1), cayley(w2)).unwrap();
        prop_assert!((h - d).abs() <= 1e-12 * (1.0 + h), "{h} vs {d}");
    }

    #[test]
    fn triangle_inequality(a in disc_point(), b in disc_point(), c in disc_point()) {
        let (ab, bc, ac) = (dist_disc(a, b).unwrap(), dist_disc(b, c).unwrap(), dist_disc(a, c).unwrap());
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn smaller_half_plane_has_larger_distances(w1 in right_point(), w2 in right_point(), shift in 0.0f64..0.009) {
        // V = {Re > shift} ⊂ U = {Re > 0}
        let u = dist_halfplane(&HalfPlane::right(0.0), w1, w2).unwrap();
        let v = dist_halfplane(&HalfPlane::right(shift), w1, w2).unwrap();
        prop_assert!(u <= v + 1e-12);
    }

    #[test]
    fn blaschke_steps_do_not_increase(a in disc_point(), b in disc_point(), z in disc_point()) {
        let zeros = ParamValue::List(vec![
            ParamValue::Text(format!("{}+{}i", a.re, a.im)),
            ParamValue::Text(format!("{}+{}i", b.re, b.im)),
        ]);
        let g = registry_get("blaschke", &[("zeros".to_string(), zeros)].into_iter().collect::<Params>()).unwrap();
        if let Ok(s) = step_sequence(&g, z, &MetricModel::Disc, 60) {
            for w in s.d.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
            }
        }
    }
}
