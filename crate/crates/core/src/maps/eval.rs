use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::{ComplexValue, EvalError, MapKind, MapSpec};

/// `1e-12 (1 + |z|)`
pub fn default_pole_eps(z: ComplexValue) -> f64 {
    1e-12 * (1.0 + z.norm())
}

fn checked(z: Complex64) -> Result<Complex64, EvalError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(EvalError::Overflow)
    }
}

/// Distance from `z` to the nearest point of `π/2 + πℤ`.
fn tan_pole_distance(z: Complex64) -> f64 {
    let k = ((z.re - FRAC_PI_2) / PI).round();
    let pole = FRAC_PI_2 + k * PI;
    Complex64::new(z.re - pole, z.im).norm()
}

/// `tan z` written through `t = e^{2iz}` (or `e^{-2iz}` below the axis) so
/// that it stays finite and accurate for large `|Im z|`.
fn tan_c(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    if z.im == 0.0 {
        Complex64::new(z.re.tan(), 0.0)
    } else if z.im > 0.0 {
        let t = Complex64::from_polar((-2.0 * z.im).exp(), 2.0 * z.re);
        -i * (t - 1.0) / (t + 1.0)
    } else {
        let s = Complex64::from_polar((2.0 * z.im).exp(), -2.0 * z.re);
        -i * (1.0 - s) / (1.0 + s)
    }
}

/// `tan z ∓ i` without cancellation in the half-plane where it is small.
fn tan_minus_direction(z: Complex64, upper: bool) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    if upper && z.im > 0.0 {
        let t = Complex64::from_polar((-2.0 * z.im).exp(), 2.0 * z.re);
        -2.0 * i * t / (t + 1.0)
    } else if !upper && z.im < 0.0 {
        let s = Complex64::from_polar((2.0 * z.im).exp(), -2.0 * z.re);
        2.0 * i * s / (1.0 + s)
    } else if upper {
        tan_c(z) - i
    } else {
        tan_c(z) + i
    }
}

impl MapSpec {
    pub fn eval(&self, z: ComplexValue) -> Result<ComplexValue, EvalError> {
        self.eval_with(z, default_pole_eps(z))
    }

    pub fn eval_with(&self, z: ComplexValue, pole_eps: f64) -> Result<ComplexValue, EvalError> {
        self.eval_deriv(z, pole_eps).map(|(w, _)| w)
    }

    /// Value and derivative at `z`.
    pub fn eval_deriv(
        &self,
        z: ComplexValue,
        pole_eps: f64,
    ) -> Result<(ComplexValue, ComplexValue), EvalError> {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match &self.kind {
            MapKind::Fatou => {
                let e = checked((-z).exp())?;
                Ok((checked(z + 1.0 + e)?, one - e))
            }
            MapKind::BakerDominguez => {
                let e = checked((-z).exp())?;
                Ok((checked(z + e)?, one - e))
            }
            MapKind::DoublingExp => {
                let e = checked((-z).exp())?;
                Ok((checked(2.0 * z + e)?, 2.0 - e))
            }
            MapKind::Tan | MapKind::Absorb => {
                let d = tan_pole_distance(z);
                if d < pole_eps {
                    return Err(EvalError::Pole { distance: d });
                }
                let t = tan_c(z);
                let shift = if matches!(self.kind, MapKind::Absorb) { i } else { Complex64::new(0.0, 0.0) };
                // (z + tan z)' = 1 + sec² z = 2 + tan² z
                Ok((checked(z + shift + t)?, checked(2.0 + t * t)?))
            }
            MapKind::ManeTruncated { delta, terms } => {
                let (sum, dsum) = mane_partial_sum(z, *delta, *terms, pole_eps)?;
                Ok((checked(z - sum)?, checked(one - dsum)?))
            }
            MapKind::AffineModel { lambda } => Ok((checked(lambda * z)?, *lambda)),
            MapKind::MobiusDisc { .. } | MapKind::ParabolicMobiusDisc | MapKind::BlaschkeFinite { .. } => {
                let b = self.blaschke().expect("inner kind");
                let d = b.pole_distance(z);
                if d < pole_eps {
                    return Err(EvalError::Pole { distance: d });
                }
                let (w, dw, _) = b.derivatives(z);
                if b.zeros().iter().any(|a| *a == z) {
                    // logarithmic derivative undefined at a zero; use the product rule directly
                    return Ok((checked(w)?, checked(product_derivative(&b, z))?));
                }
                Ok((checked(w)?, checked(dw)?))
            }
        }
    }

    /// Evaluation restricted to the real line for maps with real
    /// coefficients; `None` for the others.
    pub fn eval_real(&self, x: f64, pole_eps: f64) -> Option<Result<f64, EvalError>> {
        if !self.has_real_coefficients() {
            return None;
        }
        let real = |v: f64| if v.is_finite() { Ok(v) } else { Err(EvalError::Overflow) };
        Some(match &self.kind {
            MapKind::Tan => {
                let d = tan_pole_distance(Complex64::new(x, 0.0));
                if d < pole_eps {
                    Err(EvalError::Pole { distance: d })
                } else {
                    real(x + x.tan())
                }
            }
            MapKind::Fatou => real(x + 1.0 + (-x).exp()),
            MapKind::BakerDominguez => real(x + (-x).exp()),
            MapKind::DoublingExp => real(2.0 * x + (-x).exp()),
            MapKind::AffineModel { lambda } => real(lambda.re * x),
            _ => self.eval_with(Complex64::new(x, 0.0), pole_eps).map(|w| w.re),
        })
    }

    /// The perturbation `h(z) = f(z) - z - a` for maps with a Baker
    /// direction `a`, computed without cancellation where it is small.
    pub fn perturbation(&self, z: ComplexValue) -> Option<Result<ComplexValue, EvalError>> {
        let a = self.baker_direction?;
        Some(match &self.kind {
            MapKind::Fatou => checked((-z).exp()),
            MapKind::Tan | MapKind::Absorb => {
                let d = tan_pole_distance(z);
                if d < default_pole_eps(z) {
                    Err(EvalError::Pole { distance: d })
                } else {
                    // Tan(+): a = i; Tan(-): a = -i; Absorb: a = 2i with h = tan z - i.
                    checked(tan_minus_direction(z, a.im > 0.0))
                }
            }
            _ => self.eval(z).map(|w| w - z - a),
        })
    }

    /// Upper bound on the omitted tail of a truncated series map at `z`:
    /// `4|z| N^{1-δ}/(δ-1)`, which dominates `Σ_{n>N} 2|z|/(n^δ - |z|²)`
    /// whenever `n^δ ≥ 2|z|²` for all omitted `n`.
    pub fn tail_estimate(&self, z: ComplexValue) -> Option<f64> {
        match &self.kind {
            MapKind::ManeTruncated { delta, terms } => {
                let n = *terms as f64;
                Some(4.0 * z.norm() * n.powf(1.0 - delta) / (delta - 1.0))
            }
            _ => None,
        }
    }
}

fn mane_partial_sum(
    z: Complex64,
    delta: f64,
    terms: usize,
    pole_eps: f64,
) -> Result<(Complex64, Complex64), EvalError> {
    let limit = 0.5 * ((terms + 1) as f64).powf(delta);
    let m2 = z.norm_sqr();
    if m2 >= limit {
        return Err(EvalError::OutsideTruncation { modulus_sqr: m2, limit });
    }
    let z2 = z * z;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut dsum = Complex64::new(0.0, 0.0);
    for n in 0..=terms {
        let c = (n as f64).powf(delta);
        let root = c.sqrt();
        let dist = (z - root).norm().min((z + root).norm());
        if dist < pole_eps {
            return Err(EvalError::Pole { distance: dist });
        }
        let den = z2 - c;
        sum += 2.0 * z / den;
        // d/dz [2z/(z² - c)] = -2(z² + c)/(z² - c)²
        dsum -= 2.0 * (z2 + c) / (den * den);
    }
    Ok((sum, dsum))
}

fn product_derivative(b: &super::Blaschke, z: Complex64) -> Complex64 {
    let factors: Vec<(Complex64, Complex64)> = b
        .zeros()
        .iter()
        .map(|a| {
            let den = 1.0 - a.conj() * z;
            ((z - a) / den, (1.0 - a.norm_sqr()) / (den * den))
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..factors.len() {
        let mut term = factors[j].1;
        for (k, f) in factors.iter().enumerate() {
            if k != j {
                term *= f.0;
            }
        }
        total += term;
    }
    b.rotation() * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{registry_get, Params};

    fn get(name: &str) -> MapSpec {
        registry_get(name, &Params::new()).unwrap()
    }

    #[test]
    fn fatou_at_zero() {
        let w = get("fatou").eval(Complex64::new(0.0, 0.0)).unwrap();
        assert!((w - 2.0).norm() < 1e-15);
    }

    #[test]
    fn tan_pole_signal() {
        let r = get("tan").eval(Complex64::new(FRAC_PI_2, 0.0));
        assert!(matches!(r, Err(EvalError::Pole { .. })));
        let r = get("tan").eval(Complex64::new(FRAC_PI_2 + 3.0 * PI, 0.0));
        assert!(matches!(r, Err(EvalError::Pole { .. })));
    }

    #[test]
    fn mobius_fixes_one() {
        let w = get("mobius").eval(Complex64::new(1.0, 0.0)).unwrap();
        assert!((w - 1.0).norm() < 1e-15);
    }

    #[test]
    fn tan_matches_std_off_axis() {
        for z in [Complex64::new(0.3, 0.4), Complex64::new(-2.0, -1.5), Complex64::new(5.0, 0.01)] {
            assert!((tan_c(z) - z.tan()).norm() < 1e-13 * (1.0 + z.tan().norm()));
        }
        // far from the axis tan → ±i without overflow
        let up = tan_c(Complex64::new(1.0, 400.0));
        assert!((up - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let down = tan_c(Complex64::new(1.0, -400.0));
        assert!((down + Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn tan_perturbation_small_and_accurate() {
        let spec = get("tan");
        let z = Complex64::new(0.7, 12.0);
        let h = spec.perturbation(z).unwrap().unwrap();
        // |tan z - i| ≈ 2 e^{-2y}
        let expect = 2.0 * (-24.0f64).exp();
        assert!((h.norm() / expect - 1.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_by_central_difference() {
        let h = 1e-6;
        let z = Complex64::new(0.8, 0.35);
        for name in ["fatou", "baker-dominguez", "tan", "absorb", "doubling", "mobius", "parabolic-mobius"] {
            let spec = get(name);
            let (_, d) = spec.eval_deriv(z, 1e-12).unwrap();
            let fd = (spec.eval(z + h).unwrap() - spec.eval(z - h).unwrap()) / (2.0 * h);
            assert!((d - fd).norm() < 1e-7 * (1.0 + d.norm()), "{name}: {d} vs {fd}");
        }
        let mut p = Params::new();
        p.insert("delta".into(), crate::maps::ParamValue::Number(1.5));
        p.insert("terms".into(), crate::maps::ParamValue::Number(200.0));
        let mane = registry_get("mane", &p).unwrap();
        let (_, d) = mane.eval_deriv(z, 1e-12).unwrap();
        let fd = (mane.eval(z + h).unwrap() - mane.eval(z - h).unwrap()) / (2.0 * h);
        assert!((d - fd).norm() < 1e-6 * (1.0 + d.norm()));
    }

    #[test]
    fn blaschke_derivative_at_a_zero() {
        let spec = get("mobius");
        let z = Complex64::new(-0.5, 0.0);
        let (w, d) = spec.eval_deriv(z, 1e-12).unwrap();
        assert!(w.norm() < 1e-15);
        // (z+a)/(1+az)' = (1-a²)/(1+az)² = 0.75/0.5625
        assert!((d - 0.75 / 0.5625).norm() < 1e-12);
    }

    #[test]
    fn mane_rejects_outside_truncation() {
        let mut p = Params::new();
        p.insert("delta".into(), crate::maps::ParamValue::Number(1.5));
        p.insert("terms".into(), crate::maps::ParamValue::Number(10.0));
        let spec = registry_get("mane", &p).unwrap();
        // (11)^1.5 / 2 ≈ 18.24
        assert!(spec.eval(Complex64::new(3.0, 3.0)).is_ok());
        assert!(matches!(
            spec.eval(Complex64::new(3.0, 3.1)),
            Err(EvalError::OutsideTruncation { .. })
        ));
    }
}
