//! Canonical finite Blaschke product `λ ∏ (z - a_k)/(1 - conj(a_k) z)`.
//!
//! Every inner kind in the registry (both Möbius disc maps and general finite
//! products) is reduced to this form, which gives closed-form derivatives,
//! an exact lift of the boundary circle map, and a cancellation-free update
//! of the defect `1 - |z|²` for points near the unit circle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dd::ComplexDD;

#[derive(Debug, Clone, PartialEq)]
pub struct Blaschke {
    zeros: Vec<Complex64>,
    rotation: Complex64,
}

/// A point of the disc together with its defect `1 - |z|²`, which is
/// tracked separately so that it keeps full relative accuracy when the
/// point approaches the unit circle.
#[derive(Debug, Clone, Copy)]
pub struct DiscPoint {
    pub z: ComplexDD,
    pub defect: f64,
}

impl DiscPoint {
    pub fn new(z: Complex64) -> Self {
        let r = z.norm();
        Self { z: ComplexDD::from_c64(z), defect: (1.0 - r) * (1.0 + r) }
    }

    /// `1 - |z|`, from the defect.
    pub fn boundary_gap(&self) -> f64 {
        let r = self.z.norm().to_f64();
        self.defect / (1.0 + r)
    }
}

impl Blaschke {
    /// Caller guarantees `|a_k| < 1` and `|rotation| = 1`.
    pub fn new(zeros: Vec<Complex64>, rotation: Complex64) -> Self {
        Self { zeros, rotation }
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    /// Poles `1/conj(a_k)` for non-zero `a_k`.
    pub fn poles(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.zeros.iter().filter(|a| a.norm() > 0.0).map(|a| 1.0 / a.conj())
    }

    /// Smallest distance from `z` to a pole, `|1 - conj(a) z| / |a|`.
    pub fn pole_distance(&self, z: Complex64) -> f64 {
        self.zeros
            .iter()
            .filter(|a| a.norm() > 0.0)
            .map(|a| (1.0 - a.conj() * z).norm() / a.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.zeros
            .iter()
            .fold(self.rotation, |acc, a| acc * (z - a) / (1.0 - a.conj() * z))
    }

    /// Value, first and second derivative by the logarithmic-derivative rule
    /// `B' = B L`, `B'' = B (L² + L')` with `L = Σ (1-|a|²)/((z-a)(1-āz))`.
    /// Requires `z` distinct from the zeros.
    pub fn derivatives(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let b = self.eval(z);
        let mut l = Complex64::new(0.0, 0.0);
        let mut dl = Complex64::new(0.0, 0.0);
        for a in &self.zeros {
            let m = 1.0 - a.norm_sqr();
            let u = (z - a) * (1.0 - a.conj() * z);
            l += m / u;
            // d/dz [(z-a)(1-āz)] = 1 - 2āz + |a|²
            dl -= m * (1.0 - 2.0 * a.conj() * z + a.norm_sqr()) / (u * u);
        }
        (b, b * l, b * (l * l + dl))
    }

    pub fn eval_dd(&self, z: ComplexDD) -> ComplexDD {
        let one = ComplexDD::ONE;
        self.zeros.iter().fold(ComplexDD::from_c64(self.rotation), |acc, a| {
            let a_dd = ComplexDD::from_c64(*a);
            acc * (z - a_dd) / (one - a_dd.conj() * z)
        })
    }

    /// One step of the interior dynamics with exact defect transport:
    /// `1 - |b_a(z)|² = (1-|a|²)(1-|z|²)/|1-āz|²` for each factor.
    pub fn step_disc(&self, p: DiscPoint) -> DiscPoint {
        let z64 = p.z.to_c64();
        let mut log_mod = 0.0;
        for a in &self.zeros {
            let factor_defect = (1.0 - a.norm_sqr()) * p.defect / (1.0 - a.conj() * z64).norm_sqr();
            log_mod += (-factor_defect.min(1.0)).ln_1p();
        }
        DiscPoint { z: self.eval_dd(p.z), defect: -log_mod.exp_m1() }
    }

    /// Lift of the boundary map: `Θ(θ) = arg λ + dθ + 2 Σ Arg(1 - a_k e^{-iθ})`.
    /// Continuous and strictly increasing, with `Θ(θ + 2π) = Θ(θ) + 2πd`.
    pub fn lift(&self, theta: f64) -> f64 {
        let w = Complex64::from_polar(1.0, -theta);
        let d = self.degree() as f64;
        self.rotation.arg()
            + d * theta
            + 2.0 * self.zeros.iter().map(|a| (1.0 - a * w).arg()).sum::<f64>()
    }

    /// `Θ'(θ) = Σ (1-|a|²)/|e^{iθ} - a|²`, the modulus of `B'` on the circle.
    pub fn lift_derivative(&self, theta: f64) -> f64 {
        let e = Complex64::from_polar(1.0, theta);
        self.zeros
            .iter()
            .map(|a| (1.0 - a.norm_sqr()) / (e - a).norm_sqr())
            .sum()
    }

    pub fn lift_second_derivative(&self, theta: f64) -> f64 {
        let e = Complex64::from_polar(1.0, theta);
        self.zeros
            .iter()
            .map(|a| {
                let q = (e - a).norm_sqr();
                // d/dθ |e^{iθ} - a|² = 2 Im(ā e^{iθ})
                -(1.0 - a.norm_sqr()) * 2.0 * (a.conj() * e).im / (q * q)
            })
            .sum()
    }

    /// Point of the circle the boundary map sends `θ` to, normalised to `[0, 2π)`.
    pub fn circle_image(&self, theta: f64) -> f64 {
        self.lift(theta).rem_euclid(2.0 * PI)
    }

    /// Fixed points of a degree-one map `λ(z-c)/(1-c̄z)`: the roots of
    /// `c̄z² + (λ-1)z - λc = 0`. A repeated root is returned once, computed
    /// from the double-root formula so that it stays exact on the circle.
    pub fn mobius_fixed_points(&self) -> Option<Vec<Complex64>> {
        if self.degree() != 1 {
            return None;
        }
        let c = self.zeros[0];
        let lam = self.rotation;
        let qa = c.conj();
        let qb = lam - 1.0;
        let qc = -lam * c;
        if qa.norm() == 0.0 {
            // λz: rotation about 0 (or identity).
            return Some(vec![Complex64::new(0.0, 0.0)]);
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc.norm() <= 1e-14 * (qb.norm_sqr() + (qa * qc).norm()).max(1e-300) {
            return Some(vec![-qb / (2.0 * qa)]);
        }
        let sq = disc.sqrt();
        // Stable pair: choose the sign avoiding cancellation.
        let s = if (qb.conj() * sq).re >= 0.0 { -qb - sq } else { -qb + sq };
        let r1 = s / (2.0 * qa);
        let r2 = 2.0 * qc / s;
        Some(vec![r1, r2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubly_parabolic() -> Blaschke {
        let a = Complex64::new(0.0, 1.0 / 3f64.sqrt());
        Blaschke::new(vec![a, -a], Complex64::new(1.0, 0.0))
    }

    #[test]
    fn matches_rational_form() {
        let b = doubly_parabolic();
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-0.7, 0.1), Complex64::new(0.0, 0.0)] {
            let direct = (3.0 * z * z + 1.0) / (z * z + 3.0);
            assert!((b.eval(z) - direct).norm() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_closed_form() {
        let b = doubly_parabolic();
        let z = Complex64::new(0.4, -0.3);
        let (_, d1, d2) = b.derivatives(z);
        let w = z * z + 3.0;
        let exact1 = 16.0 * z / (w * w);
        let exact2 = 16.0 / (w * w) - 64.0 * z * z / (w * w * w);
        assert!((d1 - exact1).norm() < 1e-14);
        assert!((d2 - exact2).norm() < 1e-13);
        let (g, g1, g2) = b.derivatives(Complex64::new(1.0, 0.0));
        assert!((g - 1.0).norm() < 1e-15);
        assert!((g1 - 1.0).norm() < 1e-15);
        assert!(g2.norm() < 1e-14);
    }

    #[test]
    fn lift_is_the_boundary_map() {
        let b = Blaschke::new(
            vec![Complex64::new(0.3, -0.4), Complex64::new(-0.5, 0.1), Complex64::new(0.0, 0.6)],
            Complex64::from_polar(1.0, 0.7),
        );
        for k in 0..50 {
            let t = k as f64 * 0.13;
            let img = b.eval(Complex64::from_polar(1.0, t));
            let diff = (img - Complex64::from_polar(1.0, b.lift(t))).norm();
            assert!(diff < 1e-14, "t = {t}: {diff:e}");
        }
        let wind = (b.lift(2.0 * PI) - b.lift(0.0)) / (2.0 * PI);
        assert!((wind - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lift_derivatives_against_differences() {
        let b = doubly_parabolic();
        let h = 1e-5;
        for &t in &[0.3, 1.1, 2.9, 4.4] {
            let fd1 = (b.lift(t + h) - b.lift(t - h)) / (2.0 * h);
            let fd2 = (b.lift_derivative(t + h) - b.lift_derivative(t - h)) / (2.0 * h);
            assert!((fd1 - b.lift_derivative(t)).abs() < 1e-8);
            assert!((fd2 - b.lift_second_derivative(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn defect_transport_is_consistent() {
        let b = doubly_parabolic();
        let mut p = DiscPoint::new(Complex64::new(0.2, 0.1));
        for _ in 0..20 {
            p = b.step_disc(p);
            let direct = 1.0 - p.z.to_c64().norm_sqr();
            assert!((p.defect - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn mobius_fixed_points_hyperbolic_and_parabolic() {
        let hyp = Blaschke::new(vec![Complex64::new(-0.5, 0.0)], Complex64::new(1.0, 0.0));
        let mut fp = hyp.mobius_fixed_points().unwrap();
        fp.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((fp[0] + 1.0).norm() < 1e-15 && (fp[1] - 1.0).norm() < 1e-15);

        let par = Blaschke::new(
            vec![Complex64::new(0.2, -0.4)],
            Complex64::new(0.6, -0.8),
        );
        let fp = par.mobius_fixed_points().unwrap();
        assert_eq!(fp.len(), 1);
        assert!((fp[0] - 1.0).norm() < 1e-15);
    }
}
