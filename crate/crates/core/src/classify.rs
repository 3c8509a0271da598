//! Type classification of Baker domains and inner functions, and the
//! series tests used to certify convergence or divergence of
//! `Σ (1 - |g^n(w)|)` and the step-distance hypotheses.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::hyperbolic::{step_sequence, HyperbolicError, MetricModel, StepSequence};
use crate::inner::{find_denjoy_wolff, q_root_estimate, DenjoyWolffData, InnerError, Multiplicity};
use crate::maps::{default_pole_eps, MapSpec, OrbitRecord};
use crate::rng::sample_rng;
use crate::stats::{linear_fit, log_log_fit, LinearFit};

/// Trend thresholds shared by every verdict; they are echoed in reports.
pub const TREND_SLOPE: f64 = -0.5;
pub const TREND_R2: f64 = 0.9;
pub const RATIO_TOL: f64 = 1e-3;
pub const Q_TOL: f64 = 1e-6;
pub const PROXY_THRESHOLD: f64 = 1e-3;
pub const STEP_FLOOR: f64 = 1e-3;
pub const MIN_STEPS_INNER: usize = 64;
pub const MIN_SERIES: usize = 64;
pub const MIN_STEPS_THM_C: usize = 256;
pub const RESIDUAL_FLOOR: f64 = 1e-15;
/// Decay rates within this margin of `1/n` are not distinguished from it.
pub const RATE_MARGIN: f64 = 1e-3;
pub const CONVERGENCE_TAIL: f64 = 1e-9;
pub const DIVERGENCE_SLOPE: f64 = -0.9;
pub const K_MIN: f64 = 1.0 + 1e-6;
pub const GAUSS_R: f64 = 1.5;
pub const GAUSS_B: f64 = 1.0;

pub fn thresholds() -> Value {
    json!({
        "trend_slope": TREND_SLOPE,
        "trend_r2": TREND_R2,
        "ratio_tol": RATIO_TOL,
        "q_tol": Q_TOL,
        "proxy_threshold": PROXY_THRESHOLD,
        "step_floor": STEP_FLOOR,
        "min_steps_inner": MIN_STEPS_INNER,
        "min_series": MIN_SERIES,
        "min_steps_thm_c": MIN_STEPS_THM_C,
        "residual_floor": RESIDUAL_FLOOR,
        "rate_margin": RATE_MARGIN,
        "convergence_tail": CONVERGENCE_TAIL,
        "divergence_slope": DIVERGENCE_SLOPE,
        "k_min": K_MIN,
        "gauss_r": GAUSS_R,
        "gauss_b": GAUSS_B,
        "confidence": 0.95,
        "parabolic_tol": crate::inner::PARABOLIC_TOL,
        "cubic_tol": crate::inner::CUBIC_TOL,
        "fixed_point_residual": crate::inner::FIXED_POINT_RESIDUAL,
        "precision_budget": crate::inner::PRECISION_BUDGET,
        "geometric_ratio": crate::inner::GEOMETRIC_RATIO,
        "dw_iterations": crate::inner::DW_ITERATIONS,
        "quad_tol": crate::hyperbolic::QUAD_TOL,
        "quad_max_evals": crate::hyperbolic::QUAD_MAX_EVALS,
        "defect_floor": crate::hyperbolic::DEFECT_FLOOR,
        "step_accuracy": crate::hyperbolic::STEP_ACCURACY,
        "away_window": crate::harmonic::AWAY_WINDOW,
        "away_step": crate::harmonic::AWAY_STEP,
        "wos_max_steps": crate::harmonic::WOS_MAX_STEPS,
        "wos_rays": crate::harmonic::WOS_RAYS,
        "meaningful_modulus": crate::harmonic::MEANINGFUL_MODULUS,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error(transparent)]
    Hyperbolic(#[from] HyperbolicError),
    #[error(transparent)]
    Inner(#[from] InnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BakerVerdict {
    Hyperbolic,
    SimplyParabolic,
    DoublyParabolic,
    HyperbolicOrSimplyParabolic,
    Unresolved,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub q_est: Option<f64>,
    /// Limit of `d_n` when the steps do not decay.
    pub b_est: Option<f64>,
    /// Limit of `|f^{n+1}(z)/f^n(z)|`.
    pub ratio_limit: Option<f64>,
    pub multiplicity: Option<Multiplicity>,
    /// Fit of `ln d_n` against `ln n` on the tail.
    pub step_trend: Option<LinearFit>,
    /// Tail mean of `|f^{n+1}/f^n - 1|`.
    pub step_proxy: Option<f64>,
    pub upper_bound_metric: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BakerClassification {
    pub verdict: BakerVerdict,
    pub evidence: Evidence,
}

/// Indices `n ∈ [N/8, N)` with `n ≥ 1`.
fn tail_range(len: usize, offset: usize) -> std::ops::Range<usize> {
    let start = (len / 8).max(if offset == 0 { 1 } else { 0 });
    start..len
}

fn step_trend(steps: &StepSequence) -> Option<LinearFit> {
    let r = tail_range(steps.len(), steps.n_offset);
    let n: Vec<f64> = r.clone().map(|i| (i + steps.n_offset) as f64).collect();
    log_log_fit(&n, &steps.d[r])
}

fn decays(fit: &Option<LinearFit>) -> bool {
    fit.is_some_and(|f| f.slope < TREND_SLOPE && f.r_squared > TREND_R2)
}

fn tail_mean(xs: &[f64]) -> f64 {
    let t = &xs[xs.len() - (xs.len() / 4).max(1)..];
    t.iter().sum::<f64>() / t.len() as f64
}

pub fn classify_inner(dw: &DenjoyWolffData, steps: &StepSequence) -> Result<BakerClassification, ClassifyError> {
    if steps.len() < MIN_STEPS_INNER {
        return Err(ClassifyError::InsufficientData { needed: MIN_STEPS_INNER, got: steps.len() });
    }
    let trend = step_trend(steps);
    let to_zero = decays(&trend);
    let mut ev = Evidence {
        q_est: Some(dw.q),
        multiplicity: Some(dw.multiplicity),
        step_trend: trend,
        upper_bound_metric: steps.is_upper_bound,
        ..Evidence::default()
    };
    if !to_zero {
        ev.b_est = Some(tail_mean(&steps.d));
    }
    let from_q = if dw.q < 1.0 - Q_TOL {
        BakerVerdict::Hyperbolic
    } else {
        match dw.multiplicity {
            Multiplicity::Parabolic3 => BakerVerdict::DoublyParabolic,
            Multiplicity::Parabolic2 => BakerVerdict::SimplyParabolic,
            _ => BakerVerdict::Unresolved,
        }
    };
    let consistent = match from_q {
        BakerVerdict::DoublyParabolic => to_zero,
        BakerVerdict::Hyperbolic | BakerVerdict::SimplyParabolic => !to_zero,
        _ => true,
    };
    let verdict = if consistent {
        from_q
    } else {
        ev.notes.push(format!(
            "derivative data suggest {from_q:?} but the step sequence {} zero",
            if to_zero { "tends to" } else { "does not tend to" }
        ));
        BakerVerdict::Unresolved
    };
    Ok(BakerClassification { verdict, evidence: ev })
}

/// Plane orbit `z_0, …, z_N`, stopping early on evaluation failure.
fn plane_orbit(map: &MapSpec, z0: Complex64, n: usize) -> Vec<Complex64> {
    let mut pts = vec![z0];
    let mut z = z0;
    for _ in 0..n {
        match map.eval_with(z, default_pole_eps(z)) {
            Ok(w) if w.is_finite() => {
                pts.push(w);
                z = w;
            }
            _ => break,
        }
    }
    pts
}

/// `a/b` without forming `|b|²`, which overflows for `|b| > 1e154`.
fn scaled_ratio(a: Complex64, b: Complex64) -> Complex64 {
    let s = b.norm();
    (a / s) / (b / s)
}

/// Classifies the Baker domain containing the orbit of `z0`.
///
/// Decay of `d_n` proves the doubly parabolic case for exact metrics and
/// for upper bounds alike. Otherwise the relative step `|f^{n+1}/f^n - 1|`
/// is used: since `dist(z, ∂U) ≤ |z| + O(1)` for a proper domain, it bounds
/// `|f^{n+1} - f^n|/dist(f^n, ∂U)` from below along escaping orbits.
pub fn classify_plane(
    map: &MapSpec,
    z0: Complex64,
    metric: &MetricModel,
    n: usize,
) -> Result<BakerClassification, ClassifyError> {
    if n < MIN_STEPS_INNER {
        return Err(ClassifyError::InsufficientData { needed: MIN_STEPS_INNER, got: n });
    }
    if matches!(metric, MetricModel::Disc) && map.is_inner() {
        let dw = find_denjoy_wolff(map, z0, n)?;
        let steps = step_sequence(map, z0, metric, n)?;
        return classify_inner(&dw, &steps);
    }
    let steps = step_sequence(map, z0, metric, n)?;
    let trend = step_trend(&steps);
    let mut ev = Evidence { step_trend: trend, upper_bound_metric: steps.is_upper_bound, ..Evidence::default() };
    if decays(&trend) {
        return Ok(BakerClassification { verdict: BakerVerdict::DoublyParabolic, evidence: ev });
    }
    let pts = plane_orbit(map, z0, n);
    let ratios: Vec<f64> = pts.windows(2).map(|w| scaled_ratio(w[1], w[0]).norm()).collect();
    let rel: Vec<f64> = pts.windows(2).map(|w| (scaled_ratio(w[1], w[0]) - 1.0).norm()).collect();
    let proxy = tail_mean(&rel);
    let ratio_limit = tail_mean(&ratios);
    ev.step_proxy = Some(proxy);
    ev.ratio_limit = Some(ratio_limit);
    let b = tail_mean(&steps.d);
    ev.b_est = Some(b);
    let bounded_below = metric.is_exact() && steps.d[tail_range(steps.len(), 0)].iter().all(|&d| d > STEP_FLOOR);
    let verdict = if proxy > PROXY_THRESHOLD || bounded_below {
        if ratio_limit > 1.0 + RATIO_TOL {
            BakerVerdict::Hyperbolic
        } else {
            BakerVerdict::HyperbolicOrSimplyParabolic
        }
    } else {
        ev.notes.push("steps neither decay nor stay bounded below".into());
        BakerVerdict::Unresolved
    };
    Ok(BakerClassification { verdict, evidence: ev })
}

/// Positive terms `a[i]` of a series, indexed from `n_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub a: Vec<f64>,
    pub n_offset: usize,
}

impl SeriesSample {
    pub fn new(a: Vec<f64>, n_offset: usize) -> Self {
        Self { a, n_offset }
    }

    /// `a_n = f(n)` for `n = start..start+len`.
    pub fn from_fn(start: usize, len: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { a: (start..start + len).map(|n| f(n as f64)).collect(), n_offset: start }
    }

    fn indexed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.a.iter().enumerate().map(move |(i, &a)| (i + self.n_offset, a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaussVerdict {
    DivergentByGauss,
    ConditionNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussResult {
    pub verdict: GaussVerdict,
    /// First index from which `a_n/a_{n+1} ≤ 1 + 1/n + B/n^r` holds for
    /// every sampled `n`.
    pub n0: Option<usize>,
    pub r: f64,
    pub b_cap: f64,
}

/// Gauss' test: the condition must hold from some `n0` in the first half
/// of the sample to the end.
pub fn gauss_divergence(sample: &SeriesSample, r: f64, b_cap: f64) -> Result<GaussResult, ClassifyError> {
    if !(r > 1.0) {
        return Err(ClassifyError::PreconditionViolated(format!("r = {r} must exceed 1")));
    }
    if sample.a.iter().any(|&a| !(a > 0.0)) {
        return Err(ClassifyError::PreconditionViolated("terms must be positive".into()));
    }
    let mut n0 = None;
    for (i, w) in sample.a.windows(2).enumerate() {
        let n = (i + sample.n_offset) as f64;
        if n < 1.0 {
            continue;
        }
        let ok = w[0] / w[1] <= 1.0 + 1.0 / n + b_cap / n.powf(r);
        match (ok, n0) {
            (true, None) => n0 = Some(i + sample.n_offset),
            (false, _) => n0 = None,
            _ => {}
        }
    }
    let middle = sample.n_offset + sample.a.len() / 2;
    let verdict = match n0 {
        Some(k) if k <= middle => GaussVerdict::DivergentByGauss,
        _ => GaussVerdict::ConditionNotMet,
    };
    Ok(GaussResult { verdict, n0, r, b_cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AaronsonVerdict {
    #[serde(rename = "Converges_AEConvergence")]
    ConvergesAeConvergence,
    #[serde(rename = "Diverges_Conservative")]
    DivergesConservative,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaronsonResult {
    pub verdict: AaronsonVerdict,
    pub q_est: Option<f64>,
    /// Geometric bound on the omitted tail when the ratios stay below 1.
    pub tail_bound: Option<f64>,
    pub power_fit: Option<LinearFit>,
    pub gauss: Option<GaussResult>,
    pub reason: String,
}

/// Decides whether `Σ a_n` converges, diverges, or cannot be told apart.
///
/// Convergence is certified by `q_est < 1 - 10⁻³`, by a geometric tail
/// bound below `10⁻⁹`, or by comparison with `Σ n^{-p}`, `p > 1`, at 95%
/// confidence. Divergence by Gauss' test or by comparison with
/// `Σ n^{-0.9}`.
pub fn aaronson_verdict(sample: &SeriesSample) -> AaronsonResult {
    let mut res = AaronsonResult {
        verdict: AaronsonVerdict::Inconclusive,
        q_est: None,
        tail_bound: None,
        power_fit: None,
        gauss: None,
        reason: String::new(),
    };
    if sample.a.len() < MIN_SERIES || sample.a.iter().any(|&a| !(a > 0.0)) {
        res.reason = format!("need at least {MIN_SERIES} positive terms");
        return res;
    }
    // q estimator works on absolute indices
    let mut padded = vec![f64::NAN; sample.n_offset];
    padded.extend_from_slice(&sample.a);
    res.q_est = q_root_estimate(&padded).filter(|q| q.is_finite());
    let len = sample.a.len();
    let tail = &sample.a[len - len / 4..];
    let rho = tail.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    if rho < 1.0 {
        res.tail_bound = Some(sample.a[len - 1] * rho / (1.0 - rho));
    }
    let (n, a): (Vec<f64>, Vec<f64>) = sample
        .indexed()
        .skip(tail_range(len, sample.n_offset).start)
        .map(|(n, a)| (n as f64, a))
        .unzip();
    res.power_fit = log_log_fit(&n, &a);
    res.gauss = gauss_divergence(sample, GAUSS_R, GAUSS_B).ok();

    let power_converges = res.power_fit.is_some_and(|f| f.r_squared > TREND_R2 && f.slope_interval(0.95).1 < -1.0 - RATE_MARGIN);
    let power_diverges = res.power_fit.is_some_and(|f| f.r_squared > TREND_R2 && f.slope >= DIVERGENCE_SLOPE);
    let gauss_diverges = res.gauss.as_ref().is_some_and(|g| g.verdict == GaussVerdict::DivergentByGauss);

    if res.q_est.is_some_and(|q| q < 1.0 - RATIO_TOL) {
        res.verdict = AaronsonVerdict::ConvergesAeConvergence;
        res.reason = "root test".into();
    } else if res.tail_bound.is_some_and(|t| t < CONVERGENCE_TAIL) {
        res.verdict = AaronsonVerdict::ConvergesAeConvergence;
        res.reason = "geometric tail bound".into();
    } else if power_converges {
        res.verdict = AaronsonVerdict::ConvergesAeConvergence;
        res.reason = "comparison with a convergent p-series".into();
    } else if gauss_diverges {
        res.verdict = AaronsonVerdict::DivergesConservative;
        res.reason = "Gauss test".into();
    } else if power_diverges {
        res.verdict = AaronsonVerdict::DivergesConservative;
        res.reason = "comparison with a divergent p-series".into();
    } else {
        res.reason = "no test applies".into();
    }
    res
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThmCFit {
    pub satisfied: bool,
    pub r_est: f64,
    pub c_est: f64,
    /// Every `d_n` with `n ≥ 1` is at most `1/n`.
    pub dominated: bool,
    pub fit: Option<LinearFit>,
}

/// Tests `d_n ≤ 1/n + O(n^{-r})` for some `r > 1` by regressing
/// `ln(d_n - 1/n)` on `ln n` over the tail.
pub fn thm_c_fit(steps: &StepSequence) -> Result<ThmCFit, ClassifyError> {
    if steps.len() < MIN_STEPS_THM_C {
        return Err(ClassifyError::InsufficientData { needed: MIN_STEPS_THM_C, got: steps.len() });
    }
    let dominated = steps.indexed().filter(|(n, _)| *n >= 1).all(|(n, d)| d <= 1.0 / n as f64);
    let (ln_n, ln_res): (Vec<f64>, Vec<f64>) = steps
        .indexed()
        .skip(tail_range(steps.len(), steps.n_offset).start)
        .filter(|(n, _)| *n >= 1)
        .map(|(n, d)| {
            let res = d - 1.0 / n as f64;
            let res = if dominated { res.abs() } else { res };
            ((n as f64).ln(), res.max(RESIDUAL_FLOOR * d).ln())
        })
        .unzip();
    let fit = linear_fit(&ln_n, &ln_res);
    let (r_est, c_est) = fit.map_or((f64::NAN, f64::NAN), |f| (-f.slope, f.intercept.exp()));
    let rate_ok = fit.is_some_and(|f| f.slope_interval(0.95).1 < -1.0 - RATE_MARGIN);
    Ok(ThmCFit { satisfied: dominated || rate_ok, r_est, c_est, dominated, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SqrtSum {
    Finite { bound: f64 },
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipponStallard {
    /// Largest `K` with `|f^{n+1}| > K |f^n|` for every recorded `n ≥ 1`,
    /// when it exceeds `K_MIN` and the ratios do not drift towards 1.
    pub eq_k: Option<f64>,
    pub min_ratio: f64,
    pub sqrt_sum: SqrtSum,
}

/// Checks `|f^{n+1}(z)| > K|f^n(z)|` and `Σ |f^n(z)|^{-1/2} < ∞` on an orbit.
pub fn rippon_stallard_check(orbit: &OrbitRecord) -> RipponStallard {
    let m: Vec<f64> = orbit.points.iter().map(|z| z.norm()).collect();
    let mut out = RipponStallard { eq_k: None, min_ratio: f64::NAN, sqrt_sum: SqrtSum::Inconclusive };
    if m.len() < 3 || m[1..].iter().any(|&x| !(x > 0.0)) {
        return out;
    }
    let ratios: Vec<f64> = m[1..].windows(2).map(|w| w[1] / w[0]).collect();
    let k = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    out.min_ratio = k;
    let idx: Vec<f64> = (1..=ratios.len()).map(|n| n as f64).collect();
    let excess: Vec<f64> = ratios.iter().map(|r| r - 1.0).collect();
    let tail = tail_range(excess.len(), 1);
    let drift = log_log_fit(&idx[tail.clone()], &excess[tail]);
    let drifting = decays(&drift);
    if k >= K_MIN && !drifting {
        out.eq_k = Some(k);
        let partial: f64 = m[1..].iter().map(|x| x.sqrt().recip()).sum();
        let s = k.sqrt().recip();
        let last = m[m.len() - 1];
        out.sqrt_sum = SqrtSum::Finite { bound: partial + last.sqrt().recip() * s / (1.0 - s) };
        return out;
    }
    let n: Vec<f64> = (1..m.len()).map(|n| n as f64).collect();
    let growth = log_log_fit(&n, &m[1..]);
    if growth.is_some_and(|f| f.slope <= 2.0 && f.r_squared > TREND_R2) {
        out.sqrt_sum = SqrtSum::Divergent;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub passed: bool,
    pub samples: usize,
    /// Largest `|h|·Re(w)^r / (|a| c0)` seen; below 1 means the envelope holds.
    pub worst_ratio: f64,
    pub witness: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantCheck {
    pub sum_at_given: f64,
    pub satisfied_at_given: bool,
    pub c1_effective: f64,
    pub sum_at_effective: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionCheck {
    pub passed: bool,
    pub orbits: usize,
    pub n_max: usize,
    /// Smallest slack in `Re f^n(w) > Re w + n - Σ_{k≤n} c0/(Re w + k - 3/2)^r`.
    pub min_margin_ind: f64,
    /// Smallest slack in `Re f^n(w) > c1 + n - 1/2`.
    pub min_margin_ind2: f64,
    pub witness: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropDReport {
    pub a: Complex64,
    pub c0: f64,
    pub c1: f64,
    pub r: f64,
    pub envelope: EnvelopeCheck,
    pub constants: ConstantCheck,
    pub induction: InductionCheck,
    pub passed: bool,
}

const SUM_TERMS: usize = 100_000;

/// `Σ_{k≥1} c0/(c1 + k - 3/2)^r` summed to `SUM_TERMS` plus the integral
/// bound on the remainder.
fn constant_sum(c0: f64, c1: f64, r: f64) -> (f64, f64) {
    let s: f64 = (1..=SUM_TERMS).rev().map(|k| c0 / (c1 + k as f64 - 1.5).powf(r)).sum();
    let tail = c0 * (c1 + SUM_TERMS as f64 - 1.5).powf(1.0 - r) / (r - 1.0);
    (s, tail)
}

/// Samples `w` in `{Re w > c}` (rescaled coordinates), denser near the line.
fn sample_halfplane(rng: &mut impl Rng, c: f64) -> Complex64 {
    let u: f64 = rng.gen();
    let x = c + 30.0 * u * u * u;
    let x = if x > c { x } else { c + 1e-12 * (1.0 + c.abs()) };
    Complex64::new(x, rng.gen_range(-10.0..10.0))
}

/// Checks the hypotheses of the half-plane escape criterion for
/// `f(z) = z + a + h(z)`, in the coordinates `w = z/a`.
pub fn prop_d_verify(
    map: &MapSpec,
    c0: f64,
    c1: f64,
    r: f64,
    z_samples: usize,
    n_max: usize,
    seed: u64,
) -> Result<PropDReport, ClassifyError> {
    if !(r > 1.0) {
        return Err(ClassifyError::PreconditionViolated(format!("r = {r} must exceed 1")));
    }
    if !(c1 > 0.5) || !(c0 > 0.0) {
        return Err(ClassifyError::PreconditionViolated("need c1 > 1/2 and c0 > 0".into()));
    }
    let a = map
        .baker_direction
        .ok_or_else(|| ClassifyError::PreconditionViolated(format!("map `{}` has no translation constant", map.name)))?;

    let (sum_at_given, tail_given) = constant_sum(c0, c1, r);
    let satisfied_at_given = sum_at_given + tail_given < 0.5;
    let c1_effective = if satisfied_at_given {
        c1
    } else {
        // The sum decreases in c1; bisect for the smallest admissible value.
        let ok = |c: f64| {
            let (s, t) = constant_sum(c0, c, r);
            s + t < 0.5
        };
        let mut hi = c1 + 1.0;
        while !ok(hi) {
            hi = c1 + 2.0 * (hi - c1);
        }
        let mut lo = c1;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let (sum_eff, tail_eff) = constant_sum(c0, c1_effective, r);
    let constants = ConstantCheck {
        sum_at_given,
        satisfied_at_given,
        c1_effective,
        sum_at_effective: sum_eff,
        tail_bound: tail_eff,
    };

    let rows: Vec<(f64, Complex64, f64, f64, Complex64)> = (0..z_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            // (i) envelope on the given half-plane
            let w = sample_halfplane(&mut rng, c1);
            let ratio = match map.perturbation(a * w) {
                Some(Ok(h)) => h.norm() / a.norm() * w.re.powf(r) / c0,
                _ => f64::INFINITY,
            };
            // (iii) induction on the effective half-plane
            let v = sample_halfplane(&mut rng, c1_effective);
            let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
            let mut z = a * v;
            let mut acc = 0.0;
            for n in 1..=n_max {
                z = match map.eval(z) {
                    Ok(z) => z,
                    Err(_) => {
                        m1 = f64::NEG_INFINITY;
                        break;
                    }
                };
                let re = (z / a).re;
                acc += c0 / (v.re + n as f64 - 1.5).powf(r);
                m1 = m1.min(re - (v.re + n as f64 - acc));
                m2 = m2.min(re - (c1_effective + n as f64 - 0.5));
            }
            (ratio, w, m1, m2, v)
        })
        .collect();

    let (worst_ratio, worst_w) = rows
        .iter()
        .map(|row| (row.0, row.1))
        .fold((0.0, None), |(best, bw), (x, w)| if x > best || x.is_nan() { (x, Some(w)) } else { (best, bw) });
    let envelope = EnvelopeCheck {
        passed: worst_ratio < 1.0,
        samples: z_samples,
        worst_ratio,
        witness: if worst_ratio < 1.0 { None } else { worst_w },
    };
    let min_margin_ind = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let min_margin_ind2 = rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    let passed_iii = min_margin_ind > 0.0 && min_margin_ind2 > 0.0;
    let witness = rows.iter().find(|r| !(r.2 > 0.0 && r.3 > 0.0)).map(|r| r.4 * a);
    let induction = InductionCheck { passed: passed_iii, orbits: z_samples, n_max, min_margin_ind, min_margin_ind2, witness };
    let passed = envelope.passed && induction.passed;
    Ok(PropDReport { a, c0, c1, r, envelope, constants, induction, passed })
}

/// Serializable verdict record shared by the CLI and the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub operation: String,
    pub inputs: Value,
    pub verdict: Value,
    pub evidence: Value,
    pub thresholds: Value,
    pub seed: Option<u64>,
}

impl VerdictRecord {
    pub fn new(operation: &str, inputs: Value, verdict: impl Serialize, evidence: impl Serialize, seed: Option<u64>) -> Self {
        Self {
            operation: operation.to_string(),
            inputs,
            verdict: serde_json::to_value(verdict).unwrap_or(Value::Null),
            evidence: serde_json::to_value(evidence).unwrap_or(Value::Null),
            thresholds: thresholds(),
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::HalfPlane;
    use crate::maps::{registry_get, MapKind, Params, Termination};

    fn seq(d: Vec<f64>) -> StepSequence {
        StepSequence { d, n_offset: 0, metric: MetricModel::Disc, is_upper_bound: false }
    }

    #[test]
    fn gauss_examples() {
        let s = SeriesSample::from_fn(1, 1000, |n| 1.0 / n);
        assert_eq!(gauss_divergence(&s, 1.5, 1.0).unwrap().verdict, GaussVerdict::DivergentByGauss);
        let s = SeriesSample::from_fn(1, 1000, |n| 1.0 / (n * n));
        assert_eq!(gauss_divergence(&s, 1.5, 1.0).unwrap().verdict, GaussVerdict::ConditionNotMet);
        let s = SeriesSample::from_fn(2, 1000, |n| 1.0 / (n * n.ln()));
        assert_eq!(gauss_divergence(&s, 1.5, 1.0).unwrap().verdict, GaussVerdict::ConditionNotMet);
        assert!(gauss_divergence(&s, 1.0, 1.0).is_err());
    }

    #[test]
    fn thm_c_examples() {
        let mk = |f: &dyn Fn(f64) -> f64| seq((0..4096).map(|n| f((n as f64).max(1.0))).collect());
        let fit = thm_c_fit(&mk(&|n| 1.0 / n + 5.0 / n.powf(1.5))).unwrap();
        assert!(fit.satisfied && (fit.r_est - 1.5).abs() < 0.1);
        assert!((fit.c_est - 5.0).abs() < 0.5);
        assert!(!thm_c_fit(&mk(&|n| 2.0 / n)).unwrap().satisfied);
        assert!(thm_c_fit(&mk(&|n| 0.5 / n)).unwrap().satisfied);
        assert!(thm_c_fit(&seq(vec![0.1; 100])).is_err());
    }

    #[test]
    fn aaronson_examples() {
        let s = SeriesSample::from_fn(1, 1000, |n| 1.0 / (n * n));
        assert_eq!(aaronson_verdict(&s).verdict, AaronsonVerdict::ConvergesAeConvergence);
        let s = SeriesSample::from_fn(1, 1000, |n| n.powf(-0.5));
        assert_eq!(aaronson_verdict(&s).verdict, AaronsonVerdict::DivergesConservative);
        let s = SeriesSample::from_fn(0, 60, |n| 2.0 / (3f64.powf(n) + 1.0));
        assert_eq!(aaronson_verdict(&s).verdict, AaronsonVerdict::Inconclusive);
        let s = SeriesSample::from_fn(0, 64, |n| 2.0 / (3f64.powf(n) + 1.0));
        assert_eq!(aaronson_verdict(&s).verdict, AaronsonVerdict::ConvergesAeConvergence);
    }

    #[test]
    fn rippon_stallard_examples() {
        let rec = |pts: Vec<Complex64>| OrbitRecord { n_steps: pts.len() - 1, points: pts, termination: Termination::BudgetExhausted };
        let geo = rec((0..40).map(|n| Complex64::new(4f64.powi(n), 0.0)).collect());
        let rs = rippon_stallard_check(&geo);
        assert!((rs.eq_k.unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(rs.sqrt_sum, SqrtSum::Finite { bound } if (bound - 1.0).abs() < 1e-9));
        let lin = rec((0..1000).map(|n| Complex64::new(1.0 + n as f64, 0.0)).collect());
        let rs = rippon_stallard_check(&lin);
        assert_eq!(rs.eq_k, None);
        assert_eq!(rs.sqrt_sum, SqrtSum::Divergent);
    }

    #[test]
    fn plane_verdicts() {
        let fatou = registry_get("fatou", &Params::new()).unwrap();
        let c = classify_plane(&fatou, Complex64::new(10.0, 0.0), &MetricModel::HalfPlane(HalfPlane::right(2.0)), 5000).unwrap();
        assert_eq!(c.verdict, BakerVerdict::DoublyParabolic);
        let dbl = registry_get("doubling", &Params::new()).unwrap();
        let c = classify_plane(&dbl, Complex64::new(10.0, 0.0), &MetricModel::HalfPlane(HalfPlane::right(1.0)), 200).unwrap();
        assert_eq!(c.verdict, BakerVerdict::Hyperbolic);
        assert!((c.evidence.ratio_limit.unwrap() - 2.0).abs() < 1e-9);
        let shift = MapSpec::from_kind("affine", MapKind::AffineModel { lambda: Complex64::new(1.0, 0.0) });
        let c = classify_plane(&shift, Complex64::new(10.0, 0.0), &MetricModel::HalfPlane(HalfPlane::right(1.0)), 100);
        assert!(c.is_ok());
    }

    #[test]
    fn inner_verdicts() {
        let m = registry_get("mobius", &Params::new()).unwrap();
        let c = classify_plane(&m, Complex64::new(0.0, 0.0), &MetricModel::Disc, 1000).unwrap();
        assert_eq!(c.verdict, BakerVerdict::Hyperbolic);
        assert!((c.evidence.b_est.unwrap() - 3f64.ln()).abs() < 1e-12);
        let p = registry_get("parabolic-mobius", &Params::new()).unwrap();
        let c = classify_plane(&p, Complex64::new(0.0, 0.0), &MetricModel::Disc, 1000).unwrap();
        assert_eq!(c.verdict, BakerVerdict::SimplyParabolic);
        assert!(c.evidence.b_est.unwrap() > 0.0);
    }

    #[test]
    fn prop_d_on_fatou_and_tan() {
        let fatou = registry_get("fatou", &Params::new()).unwrap();
        let rep = prop_d_verify(&fatou, 0.55, 2.0, 2.0, 500, 200, 3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(!rep.constants.satisfied_at_given);
        assert!(rep.constants.c1_effective > 2.0 && rep.constants.c1_effective < 2.5);
        let tan = registry_get("tan", &Params::new()).unwrap();
        let rep = prop_d_verify(&tan, 3.0, 1.0, 2.0, 500, 200, 3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(matches!(prop_d_verify(&fatou, 0.55, 2.0, 0.5, 10, 10, 0), Err(ClassifyError::PreconditionViolated(_))));
        // An envelope that is too tight is caught with a witness.
        let rep = prop_d_verify(&fatou, 0.1, 2.0, 2.0, 200, 10, 3).unwrap();
        assert!(!rep.envelope.passed && rep.envelope.witness.is_some());
    }
}
