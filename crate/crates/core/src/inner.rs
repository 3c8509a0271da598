//! Inner-function toolkit for finite Blaschke products: Denjoy–Wolff data,
//! boundary circle dynamics, the boundary measure `μ_p = dλ/|w-p|²` and its
//! transformation rule, and recurrence statistics of boundary orbits.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::{ComplexDD, DoubleDouble};
use crate::hyperbolic::DEFECT_FLOOR;
use crate::maps::{Blaschke, DiscPoint, MapSpec};
use crate::quad::adaptive_simpson;
use crate::rng::sample_rng;
use crate::stats::linear_fit;

pub const PARABOLIC_TOL: f64 = 1e-8;
pub const CUBIC_TOL: f64 = 1e-6;
pub const FIXED_POINT_RESIDUAL: f64 = 1e-9;
/// Angular error bound at which a boundary orbit is declared meaningless.
pub const PRECISION_BUDGET: f64 = 1e-3;
/// Tail ratio below which the gap sequence is treated as geometric.
pub const GEOMETRIC_RATIO: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InnerError {
    #[error("map `{0}` is not an inner function of finite degree")]
    NotInner(String),
    #[error("orbit converges to the interior fixed point {0}")]
    InteriorFixedPoint(Complex64),
    #[error("orbit shows no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("root solve failed on [{lo}, {hi}]: residual {residual:e}")]
    RootSolveFailure { lo: f64, hi: f64, residual: f64 },
    #[error("invalid arc: {0}")]
    InvalidArc(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    Attracting,
    Parabolic2,
    Parabolic3,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwDiagnostics {
    pub iterations: usize,
    /// `1 - |g^n(w0)|` at the last trusted iterate.
    pub final_gap: f64,
    /// `|wrap(Θ(θ_p) - θ_p)|` at the polished point.
    pub fixed_point_residual: f64,
    pub derivative: Complex64,
    pub second_derivative: Complex64,
    pub derivative_minus_one: f64,
    pub second_derivative_abs: f64,
    pub parabolic_tol: f64,
    pub cubic_tol: f64,
    /// `|q_root - q_derivative|`.
    pub estimator_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenjoyWolffData {
    pub p: Complex64,
    /// The reported angular derivative: `|g'(p)|`.
    pub q: f64,
    /// Estimate of `lim (1 - |g^n(w0)|)^{1/n}` from the orbit.
    pub q_root: f64,
    pub q_derivative: f64,
    pub multiplicity: Multiplicity,
    pub diagnostics: DwDiagnostics,
}

fn blaschke_of(g: &MapSpec) -> Result<Blaschke, InnerError> {
    g.blaschke().ok_or_else(|| InnerError::NotInner(g.name.clone()))
}

/// Gaps `a_n = 1 - |g^n(w)|` for `n = 0..=N`, stopping early once the
/// double-double orbit reaches `DEFECT_FLOOR`.
pub fn boundary_gaps(b: &Blaschke, w: Complex64, n: usize) -> Vec<f64> {
    let mut p = DiscPoint::new(w);
    let mut gaps = vec![p.boundary_gap()];
    for _ in 0..n {
        let q = b.step_disc(p);
        if !(q.defect > DEFECT_FLOOR) {
            break;
        }
        gaps.push(q.boundary_gap());
        p = q;
    }
    gaps
}

/// Estimate of `q = lim a_n^{1/n}` from a fit of
/// `ln a_n = n ln q + κ ln n + c (+ β ln n/n + γ/n)` at dyadic fractions of
/// the sample; the two correction terms are used on long samples, where the
/// decay is slow and sub-leading terms dominate the bias.
///
/// Clearly geometric samples (tail ratio below `GEOMETRIC_RATIO`) are fitted
/// by a line over the last quarter instead, where the relative corrections
/// `O(q^n)` have died out.
pub fn q_root_estimate(gaps: &[f64]) -> Option<f64> {
    let last = gaps.iter().rposition(|&a| a > 1e-250)?;
    if last < 8 {
        return None;
    }
    let first = last - last / 4;
    let tail_ratio = ((gaps[last] / gaps[first]).ln() / (last - first) as f64).exp();
    if tail_ratio < GEOMETRIC_RATIO {
        let n: Vec<f64> = (first..=last).map(|i| i as f64).collect();
        let y: Vec<f64> = gaps[first..=last].iter().map(|a| a.ln()).collect();
        return linear_fit(&n, &y).map(|f| f.slope.exp());
    }
    let basis = |n: f64| [n, n.ln(), 1.0, n.ln() / n, 1.0 / n];
    let k = if last >= 256 { 5 } else { 3 };
    let idx: Vec<usize> = (0..k).map(|j| last >> (k - 1 - j)).collect();
    let mut m = vec![vec![0.0; k + 1]; k];
    for (row, &i) in m.iter_mut().zip(&idx) {
        row[..k].copy_from_slice(&basis(i as f64)[..k]);
        row[k] = gaps[i].ln();
    }
    let sol = solve_dense(m)?;
    Some(sol[0].exp())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = m.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            for c in col..=k {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][k] - s) / m[r][r];
    }
    Some(x)
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds a sign change of `f` on `[c - δ, c + δ]` for `δ = δ0·2^k ≤ δmax`.
fn expanding_bracket(f: &impl Fn(f64) -> f64, c: f64, delta0: f64, delta_max: f64) -> Option<(f64, f64)> {
    let mut d = delta0;
    while d <= delta_max {
        let (a, b) = (f(c - d), f(c + d));
        if a == 0.0 {
            return Some((c - d, c - d));
        }
        if b == 0.0 {
            return Some((c + d, c + d));
        }
        if (a > 0.0) != (b > 0.0) {
            return Some((c - d, c + d));
        }
        d *= 2.0;
    }
    None
}

/// Locates the boundary fixed point near `theta0` as a root of
/// `h(θ) = wrap(Θ(θ) - θ)`. Odd roots are bracketed through `h`, double
/// roots through `h' = Θ' - 1`, and triple roots are refined through `Θ''`.
fn polish_fixed_angle(b: &Blaschke, theta0: f64) -> Result<f64, InnerError> {
    let h = |t: f64| wrap(b.lift(t) - t);
    let h1 = |t: f64| b.lift_derivative(t) - 1.0;
    let h2 = |t: f64| b.lift_second_derivative(t);
    let (delta0, delta_max) = (1e-7, 0.5);
    let mut d = delta0;
    let mut root = None;
    while d <= delta_max {
        let (lo, hi) = (theta0 - d, theta0 + d);
        if (h(lo) > 0.0) != (h(hi) > 0.0) || h(lo) == 0.0 || h(hi) == 0.0 {
            let r = bisect(h, lo, hi);
            root = Some(if h1(r).abs() < 1e-4 {
                expanding_bracket(&h2, r, 1e-9, 1e-2).map_or(r, |(a, c)| bisect(h2, a, c))
            } else {
                r
            });
            break;
        }
        if (h1(lo) > 0.0) != (h1(hi) > 0.0) {
            root = Some(bisect(h1, lo, hi));
            break;
        }
        d *= 2.0;
    }
    let r = root.ok_or(InnerError::RootSolveFailure {
        lo: theta0 - delta_max,
        hi: theta0 + delta_max,
        residual: h(theta0).abs(),
    })?;
    let residual = h(r).abs();
    if residual >= FIXED_POINT_RESIDUAL {
        return Err(InnerError::RootSolveFailure { lo: r, hi: r, residual });
    }
    Ok(r.rem_euclid(TAU))
}

/// Denjoy–Wolff point, angular derivative and multiplicity of an inner map
/// without interior fixed point, starting the iteration at `w0`.
pub fn find_denjoy_wolff(g: &MapSpec, w0: Complex64, n: usize) -> Result<DenjoyWolffData, InnerError> {
    let b = blaschke_of(g)?;
    let n = n.max(16);
    let mut p = DiscPoint::new(w0);
    let mut history = vec![p];
    for _ in 0..n {
        let q = b.step_disc(p);
        if !(q.defect > DEFECT_FLOOR) {
            break;
        }
        history.push(q);
        p = q;
    }
    let last = history.len() - 1;
    let z_last = history[last].z.to_c64();
    let prev = history[last.saturating_sub(1)].z.to_c64();
    let half = history[last / 2].defect;
    if history[last].defect > 1e-6 && (z_last - prev).norm() < 1e-13 {
        return Err(InnerError::InteriorFixedPoint(z_last));
    }
    if last < 2 || history[last].defect >= half * (1.0 - 1e-12) {
        return Err(InnerError::NoConvergence { iterations: last });
    }
    let theta = polish_fixed_angle(&b, z_last.arg())?;
    let pt = Complex64::from_polar(1.0, theta);
    let (_, d1, d2) = b.derivatives(pt);
    let q_derivative = b.lift_derivative(theta);
    let gaps: Vec<f64> = history.iter().map(DiscPoint::boundary_gap).collect();
    let q_root = q_root_estimate(&gaps).unwrap_or(f64::NAN);
    let derivative_minus_one = (d1 - 1.0).norm();
    let multiplicity = if derivative_minus_one < PARABOLIC_TOL {
        if d2.norm() < CUBIC_TOL {
            Multiplicity::Parabolic3
        } else {
            Multiplicity::Parabolic2
        }
    } else if q_derivative < 1.0 {
        Multiplicity::Attracting
    } else {
        Multiplicity::Unknown
    };
    Ok(DenjoyWolffData {
        p: pt,
        q: q_derivative,
        q_root,
        q_derivative,
        multiplicity,
        diagnostics: DwDiagnostics {
            iterations: last,
            final_gap: history[last].boundary_gap(),
            fixed_point_residual: wrap(b.lift(theta) - theta).abs(),
            derivative: d1,
            second_derivative: d2,
            derivative_minus_one,
            second_derivative_abs: d2.norm(),
            parabolic_tol: PARABOLIC_TOL,
            cubic_tol: CUBIC_TOL,
            estimator_gap: (q_root - q_derivative).abs(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "digits", rename_all = "snake_case")]
pub enum Precision {
    Double,
    /// Double-double arithmetic; `digits` (at most 31) sets the per-step
    /// rounding model used by the error bound.
    Extended(u32),
}

impl Precision {
    fn unit(self) -> f64 {
        match self {
            Precision::Double => 1.1e-16,
            Precision::Extended(d) => 10f64.powi(-(d.clamp(1, 31) as i32)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOrbit {
    /// Angles in `[0, 2π)`, starting with `θ0`.
    pub angles: Vec<f64>,
    /// Index of the first angle whose error bound exceeded the budget; the
    /// list is truncated there.
    pub precision_loss_at: Option<usize>,
    /// Final angular error bound.
    pub error_bound: f64,
}

/// Steps the boundary map `θ ↦ arg g(e^{iθ})` while propagating the
/// first-order error bound `e_{k+1} = Θ'(θ_k) e_k + u`.
struct CircleStepper {
    b: Blaschke,
    precision: Precision,
    theta: f64,
    theta_dd: DoubleDouble,
    error: f64,
}

impl CircleStepper {
    fn new(b: Blaschke, theta0: f64, precision: Precision) -> Self {
        let t = theta0.rem_euclid(TAU);
        Self { b, precision, theta: t, theta_dd: DoubleDouble::from_f64(t), error: precision.unit() }
    }

    fn step(&mut self) -> f64 {
        self.error = self.b.lift_derivative(self.theta) * self.error + self.precision.unit();
        match self.precision {
            Precision::Double => {
                self.theta = normalize_angle(self.b.lift(self.theta));
            }
            Precision::Extended(_) => {
                let w = self.b.eval_dd(ComplexDD::cis(self.theta_dd));
                let mut t = w.arg();
                if t.hi < 0.0 {
                    t = t + DoubleDouble::TWO_PI;
                }
                self.theta_dd = t;
                self.theta = normalize_angle(t.to_f64());
            }
        }
        self.theta
    }
}

fn normalize_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn boundary_orbit(g: &MapSpec, theta0: f64, n: usize, precision: Precision) -> Result<BoundaryOrbit, InnerError> {
    let b = blaschke_of(g)?;
    let mut s = CircleStepper::new(b, theta0, precision);
    let mut angles = Vec::with_capacity(n + 1);
    angles.push(s.theta);
    let mut precision_loss_at = None;
    for k in 1..=n {
        let t = s.step();
        if s.error > PRECISION_BUDGET {
            precision_loss_at = Some(k);
            break;
        }
        angles.push(t);
    }
    Ok(BoundaryOrbit { angles, precision_loss_at, error_bound: s.error })
}

/// Counter-clockwise, half-open arc `[start, end)` with length in `(0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    pub start_angle: f64,
    pub end_angle: f64,
}

impl CircleArc {
    pub fn new(start_angle: f64, end_angle: f64) -> Result<Self, InnerError> {
        let len = end_angle - start_angle;
        if !(len > 0.0 && len <= TAU) || !start_angle.is_finite() {
            return Err(InnerError::InvalidArc(format!(
                "[{start_angle}, {end_angle}) must have length in (0, 2π]"
            )));
        }
        Ok(Self { start_angle, end_angle })
    }

    pub fn full() -> Self {
        Self { start_angle: 0.0, end_angle: TAU }
    }

    pub fn length(&self) -> f64 {
        self.end_angle - self.start_angle
    }

    pub fn contains(&self, theta: f64) -> bool {
        (theta - self.start_angle).rem_euclid(TAU) < self.length()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuPValue {
    pub value: f64,
    pub quad_error: f64,
    /// Set when `p` lies in the closure of the arc; `value` is then `∞`.
    pub infinite: bool,
}

/// `μ_p(arc) = (1/2π) ∫ dθ/|e^{iθ} - p|²` in closed form: with angles
/// measured from `arg p`, the value is
/// `sin((e-s)/2) / (4π sin(s/2) sin(e/2))`.
pub fn mu_p(arc: &CircleArc, p: Complex64) -> MuPValue {
    let s = (arc.start_angle - p.arg()).rem_euclid(TAU);
    let e = s + arc.length();
    if s == 0.0 || e >= TAU {
        return MuPValue { value: f64::INFINITY, quad_error: 0.0, infinite: true };
    }
    let value = (0.5 * arc.length()).sin() / ((0.5 * s).sin() * (0.5 * e).sin()) / (4.0 * PI);
    MuPValue { value, quad_error: 8.0 * f64::EPSILON * value, infinite: false }
}

/// Independent evaluation of `μ_p` by adaptive quadrature of the density.
pub fn mu_p_quadrature(arc: &CircleArc, p: Complex64, tol: f64) -> MuPValue {
    let closed = mu_p(arc, p);
    if closed.infinite {
        return closed;
    }
    let dens = |t: f64| Ok::<_, ()>((Complex64::from_polar(1.0, t) - p).norm_sqr().recip() / TAU);
    let q = adaptive_simpson(dens, arc.start_angle, arc.end_angle, tol, 1 << 20).expect("infallible");
    MuPValue { value: q.value, quad_error: q.error, infinite: false }
}

/// Inverse of the lift: the unique `θ` with `Θ(θ) = y`.
pub fn inverse_lift(b: &Blaschke, y: f64) -> Result<f64, InnerError> {
    let d = b.degree() as f64;
    // |Θ(θ) - dθ| ≤ π + dπ
    let slack = PI * (d + 1.0) + 1.0;
    let (mut lo, mut hi) = ((y - slack) / d, (y + slack) / d);
    let f = |t: f64| b.lift(t) - y;
    if !(f(lo) <= 0.0 && f(hi) >= 0.0) {
        return Err(InnerError::RootSolveFailure { lo, hi, residual: f(lo).abs().min(f(hi).abs()) });
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let ft = f(t);
        if ft.abs() < 1e-15 * (1.0 + y.abs()) {
            return Ok(t);
        }
        if ft < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // Newton step kept inside the bracket, bisection otherwise.
        let newton = t - ft / b.lift_derivative(t);
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            break;
        }
    }
    let residual = f(t).abs();
    if residual > 1e-12 * (1.0 + y.abs()) {
        return Err(InnerError::RootSolveFailure { lo, hi, residual });
    }
    Ok(t)
}

/// The `d` arcs whose union is `g^{-1}(arc)`, merged where adjacent.
pub fn preimage_arcs(g: &MapSpec, arc: &CircleArc) -> Result<Vec<CircleArc>, InnerError> {
    let b = blaschke_of(g)?;
    let d = b.degree();
    let base = inverse_lift(&b, arc.start_angle)?;
    let start_lift = b.lift(base);
    let mut arcs: Vec<CircleArc> = Vec::with_capacity(d);
    for k in 0..d {
        let y0 = start_lift + TAU * k as f64;
        let s = if k == 0 { base } else { inverse_lift(&b, y0)? };
        let e = inverse_lift(&b, y0 + arc.length())?;
        if let Some(prev) = arcs.last_mut() {
            if (s - prev.end_angle).abs() <= 1e-13 {
                prev.end_angle = e;
                continue;
            }
        }
        arcs.push(CircleArc { start_angle: s, end_angle: e });
    }
    if arcs.len() > 1 {
        let first = arcs[0];
        let last = arcs[arcs.len() - 1];
        if (first.start_angle + TAU - last.end_angle).abs() <= 1e-13 {
            arcs.pop();
            arcs[0].start_angle = last.start_angle;
            arcs[0].end_angle = first.end_angle + TAU;
        }
    }
    for a in &mut arcs {
        let len = (a.end_angle - a.start_angle).min(TAU);
        a.start_angle = a.start_angle.rem_euclid(TAU);
        a.end_angle = a.start_angle + len;
    }
    Ok(arcs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuInvariance {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub q: f64,
    pub p: Complex64,
}

/// Compares `μ_p(g^{-1}(E))` with `q μ_p(E)` for the given Denjoy–Wolff data.
pub fn check_mu_invariance_with(g: &MapSpec, dw: &DenjoyWolffData, arc: &CircleArc) -> Result<MuInvariance, InnerError> {
    let pre = preimage_arcs(g, arc)?;
    let lhs: f64 = pre.iter().map(|a| mu_p(a, dw.p).value).sum();
    let rhs = dw.q * mu_p(arc, dw.p).value;
    let rel_err = if lhs == rhs { 0.0 } else { (lhs - rhs).abs() / rhs.abs().max(lhs.abs()) };
    Ok(MuInvariance { lhs, rhs, rel_err, q: dw.q, p: dw.p })
}

pub const DW_ITERATIONS: usize = 10_000;

pub fn check_mu_invariance(g: &MapSpec, arc: &CircleArc) -> Result<MuInvariance, InnerError> {
    let dw = find_denjoy_wolff(g, Complex64::new(0.0, 0.0), DW_ITERATIONS)?;
    check_mu_invariance_with(g, &dw, arc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceStats {
    pub n_samples: usize,
    pub recurrent: usize,
    pub fraction: f64,
    /// Fraction of samples whose error bound exceeded the budget before
    /// the count was decided; their visits are pseudo-orbit visits.
    pub precision_loss_fraction: f64,
    pub returns: Vec<usize>,
}

/// Fraction of uniformly drawn boundary points whose orbit visits `target`
/// at least `min_returns` times among `θ_1, …, θ_budget`.
pub fn recurrence_stats(
    g: &MapSpec,
    target: &CircleArc,
    n_samples: usize,
    budget: usize,
    min_returns: usize,
    seed: u64,
    precision: Precision,
) -> Result<RecurrenceStats, InnerError> {
    let b = blaschke_of(g)?;
    let rows: Vec<(usize, bool)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let theta0 = sample_rng(seed, i).gen_range(0.0..TAU);
            let mut s = CircleStepper::new(b.clone(), theta0, precision);
            let mut visits = 0;
            let mut lost = false;
            for _ in 0..budget {
                let t = s.step();
                lost |= s.error > PRECISION_BUDGET;
                if target.contains(t) {
                    visits += 1;
                    if visits >= min_returns {
                        break;
                    }
                }
            }
            (visits, lost)
        })
        .collect();
    let recurrent = rows.iter().filter(|(v, _)| *v >= min_returns).count();
    let lost = rows.iter().filter(|(_, l)| *l).count();
    let n = n_samples.max(1) as f64;
    Ok(RecurrenceStats {
        n_samples,
        recurrent,
        fraction: recurrent as f64 / n,
        precision_loss_fraction: lost as f64 / n,
        returns: rows.into_iter().map(|(v, _)| v).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{registry_get, MapKind, Params};

    fn dp() -> MapSpec {
        let a = Complex64::new(0.0, 1.0 / 3f64.sqrt());
        MapSpec::from_kind(
            "blaschke",
            MapKind::BlaschkeFinite { zeros: vec![a, -a], rotation: Complex64::new(1.0, 0.0) },
        )
    }

    #[test]
    fn mobius_denjoy_wolff() {
        let g = registry_get("mobius", &Params::new()).unwrap();
        let dw = find_denjoy_wolff(&g, Complex64::new(0.0, 0.0), 1000).unwrap();
        assert!((dw.p - 1.0).norm() < 1e-14);
        assert!((dw.q - 1.0 / 3.0).abs() < 1e-14);
        assert!((dw.q_root - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(dw.multiplicity, Multiplicity::Attracting);
    }

    #[test]
    fn doubly_parabolic_denjoy_wolff() {
        let dw = find_denjoy_wolff(&dp(), Complex64::new(0.0, 0.0), 10_000).unwrap();
        assert!((dw.p - 1.0).norm() < 1e-12);
        assert!((dw.q - 1.0).abs() < 1e-12);
        assert!((dw.q_root - 1.0).abs() < 1e-6, "{}", dw.q_root);
        assert_eq!(dw.multiplicity, Multiplicity::Parabolic3);
    }

    #[test]
    fn simply_parabolic_denjoy_wolff() {
        let g = registry_get("parabolic-mobius", &Params::new()).unwrap();
        let dw = find_denjoy_wolff(&g, Complex64::new(0.0, 0.0), 10_000).unwrap();
        assert!((dw.p - 1.0).norm() < 1e-12);
        assert_eq!(dw.multiplicity, Multiplicity::Parabolic2);
        assert!((dw.q_root - 1.0).abs() < 1e-6, "{}", dw.q_root);
    }

    #[test]
    fn interior_fixed_point_is_rejected() {
        let g = MapSpec::from_kind(
            "b",
            MapKind::BlaschkeFinite { zeros: vec![Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.0)], rotation: Complex64::new(1.0, 0.0) },
        );
        assert!(matches!(
            find_denjoy_wolff(&g, Complex64::new(0.1, 0.1), 1000),
            Err(InnerError::InteriorFixedPoint(_))
        ));
        let fatou = registry_get("fatou", &Params::new()).unwrap();
        assert!(matches!(find_denjoy_wolff(&fatou, Complex64::new(0.0, 0.0), 10), Err(InnerError::NotInner(_))));
    }

    #[test]
    fn boundary_orbit_examples() {
        let o = boundary_orbit(&dp(), PI, 1, Precision::Double).unwrap();
        let t = o.angles[1];
        assert!(t.min(TAU - t) < 1e-12);
        let o = boundary_orbit(&dp(), 0.0, 5, Precision::Extended(31)).unwrap();
        assert!(o.angles.iter().all(|&t| t == 0.0));
        let g = registry_get("mobius", &Params::new()).unwrap();
        let o = boundary_orbit(&g, PI - 0.1, 60, Precision::Double).unwrap();
        let dist: Vec<f64> = o.angles.iter().map(|&t| t.min(TAU - t)).collect();
        assert!(dist.windows(2).all(|w| w[1] <= w[0]));
        assert!(dist[60] < 1e-12);
    }

    #[test]
    fn extended_precision_tracks_double() {
        let a = boundary_orbit(&dp(), 1.0, 20, Precision::Double).unwrap();
        let b = boundary_orbit(&dp(), 1.0, 20, Precision::Extended(31)).unwrap();
        for (x, y) in a.angles.iter().zip(&b.angles) {
            let d = (x - y).abs();
            assert!(d.min(TAU - d) < 1e-9);
        }
    }

    #[test]
    fn chaotic_orbit_flags_double_precision() {
        let o = boundary_orbit(&dp(), 1.0, 100_000, Precision::Double).unwrap();
        let e = boundary_orbit(&dp(), 1.0, 100_000, Precision::Extended(31)).unwrap();
        if let Some(k) = o.precision_loss_at {
            assert_eq!(o.angles.len(), k);
            assert!(e.precision_loss_at.map_or(true, |j| j > k));
        }
    }

    #[test]
    fn mu_p_closed_form_and_quadrature() {
        let arc = CircleArc::new(PI / 2.0, 1.5 * PI).unwrap();
        let one = Complex64::new(1.0, 0.0);
        assert!((mu_p(&arc, one).value - 1.0 / TAU).abs() < 1e-15);
        assert!((mu_p_quadrature(&arc, one, 1e-12).value - 1.0 / TAU).abs() < 1e-10);
        let l = mu_p(&CircleArc::new(PI / 2.0, PI).unwrap(), one).value;
        let r = mu_p(&CircleArc::new(PI, 1.5 * PI).unwrap(), one).value;
        assert!((l + r - 1.0 / TAU).abs() < 1e-15);
        assert!(mu_p(&CircleArc::new(-0.1, 0.1).unwrap(), one).infinite);
        assert!(mu_p(&CircleArc::full(), one).infinite);
        assert!(mu_p(&CircleArc::new(2.0, 2.0 + 1e-9).unwrap(), one).value < 1e-9);
    }

    #[test]
    fn preimages_have_degree_many_components() {
        let arc = CircleArc::new(1.0, 2.0).unwrap();
        let pre = preimage_arcs(&dp(), &arc).unwrap();
        assert_eq!(pre.len(), 2);
        let b = dp().blaschke().unwrap();
        for a in &pre {
            assert!((b.circle_image(a.start_angle) - 1.0).abs() < 1e-12);
            assert!((b.circle_image(a.end_angle) - 2.0).abs() < 1e-12);
        }
        let full = preimage_arcs(&dp(), &CircleArc::full()).unwrap();
        assert_eq!(full.len(), 1);
        assert!((full[0].length() - TAU).abs() < 1e-12);
        let g = registry_get("mobius", &Params::new()).unwrap();
        let pre = preimage_arcs(&g, &arc).unwrap();
        assert_eq!(pre.len(), 1);
        // g^{-1}(w) = (w - a)/(1 - a w)
        let inv = |t: f64| {
            let w = Complex64::from_polar(1.0, t);
            ((w - 0.5) / (1.0 - 0.5 * w)).arg().rem_euclid(TAU)
        };
        assert!((pre[0].start_angle - inv(1.0)).abs() < 1e-12);
        assert!((pre[0].end_angle - inv(2.0)).abs() < 1e-12);
    }

    #[test]
    fn mu_invariance_on_models() {
        let g = registry_get("mobius", &Params::new()).unwrap();
        let arc = CircleArc::new(PI / 2.0, 1.5 * PI).unwrap();
        let r = check_mu_invariance(&g, &arc).unwrap();
        assert!(r.rel_err < 1e-6, "{r:?}");
        let r = check_mu_invariance(&dp(), &CircleArc::new(0.5, 2.5).unwrap()).unwrap();
        assert!(r.rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn recurrence_full_circle_and_mobius() {
        let s = recurrence_stats(&dp(), &CircleArc::full(), 20, 50, 10, 1, Precision::Double).unwrap();
        assert_eq!(s.fraction, 1.0);
        let g = registry_get("mobius", &Params::new()).unwrap();
        let s = recurrence_stats(&g, &CircleArc::new(0.2, 0.4).unwrap(), 50, 2000, 10, 1, Precision::Double).unwrap();
        assert!(s.fraction <= 0.05);
    }

    #[test]
    fn q_root_on_synthetic_sequences() {
        let geo: Vec<f64> = (0..60).map(|n| 2.0 / (3f64.powi(n) + 1.0)).collect();
        assert!((q_root_estimate(&geo).unwrap() - 1.0 / 3.0).abs() < 1e-6);
        let alg: Vec<f64> = (0..5000).map(|n| 1.0 / (n as f64 + 2.0)).collect();
        assert!((q_root_estimate(&alg).unwrap() - 1.0).abs() < 1e-6);
    }
}
