//! The acceptance suite: one pass/fail line per criterion, with the
//! tolerances fixed below. Shared by `bakerlab selftest` and the
//! `acceptance` test target.

use std::f64::consts::{FRAC_PI_2, LN_2, PI, TAU};
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::classify::{
    classify_plane, gauss_divergence, prop_d_verify, rippon_stallard_check, thm_c_fit, BakerVerdict, GaussVerdict,
    SeriesSample, SqrtSum, GAUSS_B, GAUSS_R,
};
use crate::cli::{run_with_threads, ExperimentConfig};
use crate::harmonic::{dichotomy_experiment, wos_sample_with, DomainModel, Fate, FateOptions, TargetSet};
use crate::hyperbolic::{cayley, dist_disc, dist_halfplane, step_sequence, HalfPlane, MetricModel, StepSequence};
use crate::inner::{
    boundary_gaps, boundary_orbit, check_mu_invariance_with, find_denjoy_wolff, mu_p, mu_p_quadrature, preimage_arcs,
    CircleArc, Precision,
};
use crate::maps::{iterate, registry_get, IterateOptions, MapSpec, ParamValue, Params};
use crate::rng::sample_rng;
use crate::stats::{ks_critical_1pct, ks_statistic};

/// Seed used by every stochastic criterion.
pub const SUITE_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub time_limit: Option<f64>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.2}s{})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds,
            self.time_limit.map_or(String::new(), |t| format!(", limit {t}s"))
        )
    }
}

/// Outcome of the individual checks of one criterion.
struct Checks {
    parts: Vec<(bool, String)>,
}

impl Checks {
    fn new() -> Self {
        Self { parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        self.parts.push((ok, msg.into()));
    }

    fn passed(&self) -> bool {
        self.parts.iter().all(|(ok, _)| *ok)
    }

    fn detail(&self) -> String {
        self.parts
            .iter()
            .map(|(ok, m)| if *ok { m.clone() } else { format!("NOT {m}") })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn timed(id: u32, title: &'static str, time_limit: Option<f64>, body: impl FnOnce(&mut Checks)) -> CriterionResult {
    let start = Instant::now();
    let mut c = Checks::new();
    body(&mut c);
    let seconds = start.elapsed().as_secs_f64();
    let in_time = time_limit.map_or(true, |t| seconds < t);
    let mut detail = c.detail();
    if !in_time {
        detail.push_str("; NOT within the time limit");
    }
    CriterionResult { id, title, passed: c.passed() && in_time, detail, seconds, time_limit }
}

fn map(name: &str) -> MapSpec {
    registry_get(name, &Params::new()).expect("registered map")
}

/// `(3z² + 1)/(z² + 3)`, zeros `±i/√3`.
pub fn doubly_parabolic_blaschke() -> MapSpec {
    let s = 1.0 / 3f64.sqrt();
    let zeros = ParamValue::List(vec![ParamValue::Text(format!("0+{s}i")), ParamValue::Text(format!("0-{s}i"))]);
    let params: Params = [("zeros".to_string(), zeros)].into_iter().collect();
    registry_get("blaschke", &params).expect("valid zeros")
}

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn non_increasing(steps: &StepSequence) -> bool {
    steps.d.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

pub fn criterion_1() -> CriterionResult {
    timed(1, "metric closed forms", Some(1.0), |c| {
        let d = dist_disc(c0(), Complex64::new(0.5, 0.0)).unwrap_or(f64::NAN);
        c.check((d - 3f64.ln()).abs() < 1e-12, format!("dist_disc(0, 1/2) - ln 3 = {:.1e}", d - 3f64.ln()));
        let right = HalfPlane::right(0.0);
        let worst = (0..10_000u64)
            .map(|i| {
                let mut rng = sample_rng(SUITE_SEED, i);
                let mut pt = || Complex64::new(rng.gen_range(0.05..5.0), rng.gen_range(-5.0..5.0));
                let (w1, w2) = (pt(), pt());
                let dh = dist_halfplane(&right, w1, w2).unwrap_or(f64::NAN);
                let dd = dist_disc(cayley(w1), cayley(w2)).unwrap_or(f64::NAN);
                (dh - dd).abs()
            })
            .fold(0.0, f64::max);
        c.check(worst < 1e-12, format!("Cayley consistency max gap {worst:.1e} on 10^4 pairs"));
        let cases: [(&str, MapSpec, Complex64, MetricModel); 3] = [
            ("mobius", map("mobius"), c0(), MetricModel::Disc),
            ("blaschke", doubly_parabolic_blaschke(), c0(), MetricModel::Disc),
            ("fatou", map("fatou"), Complex64::new(10.0, 0.0), MetricModel::HalfPlane(HalfPlane::right(2.0))),
        ];
        for (name, m, z0, metric) in cases {
            let ok = step_sequence(&m, z0, &metric, 2000).is_ok_and(|s| non_increasing(&s));
            c.check(ok, format!("{name} steps non-increasing"));
        }
    })
}

pub fn criterion_2() -> CriterionResult {
    timed(2, "doubly parabolic asymptotics", Some(10.0), |c| {
        let g = doubly_parabolic_blaschke();
        match step_sequence(&g, c0(), &MetricModel::Disc, 10_001) {
            Ok(s) => {
                let worst = (1000..=10_000).map(|n| (2.0 * n as f64 * s.d[n] - 1.0).abs()).fold(0.0, f64::max);
                c.check(worst < 0.1, format!("max |2n d_n - 1| = {worst:.4} on [10^3, 10^4]"));
            }
            Err(e) => c.check(false, format!("step sequence: {e}")),
        }
        match classify_plane(&g, c0(), &MetricModel::Disc, 10_000) {
            Ok(cl) => {
                c.check(cl.verdict == BakerVerdict::DoublyParabolic, format!("verdict {:?}", cl.verdict));
                let q = cl.evidence.q_est.unwrap_or(f64::NAN);
                c.check((q - 1.0).abs() < 1e-6, format!("q - 1 = {:.1e}", q - 1.0));
            }
            Err(e) => c.check(false, format!("classify: {e}")),
        }
        match find_denjoy_wolff(&g, c0(), 10_000) {
            Ok(dw) => {
                let g2 = dw.diagnostics.second_derivative_abs;
                c.check(g2 < 1e-6, format!("|g''(1)| = {g2:.1e}"));
            }
            Err(e) => c.check(false, format!("Denjoy-Wolff: {e}")),
        }
    })
}

pub fn criterion_3() -> CriterionResult {
    timed(3, "hyperbolic inner model", Some(5.0), |c| {
        let g = map("mobius");
        match find_denjoy_wolff(&g, c0(), 1000) {
            Ok(dw) => {
                c.check((dw.p - 1.0).norm() < 1e-9, format!("p = {:.9}", dw.p));
                c.check(
                    (dw.q_root - 1.0 / 3.0).abs() < 1e-3 && (dw.q_derivative - 1.0 / 3.0).abs() < 1e-3,
                    format!("q_root = {:.6}, q_derivative = {:.6}", dw.q_root, dw.q_derivative),
                );
            }
            Err(e) => c.check(false, format!("Denjoy-Wolff: {e}")),
        }
        let b = g.blaschke().expect("inner");
        let gaps = boundary_gaps(&b, c0(), 400);
        let tail: f64 = gaps.iter().skip(50).sum();
        c.check(tail < 1e-6, format!("sum of gaps from n = 50: {tail:.1e}"));
        let hits = (0..100u64)
            .into_par_iter()
            .filter(|&i| {
                let mut rng = sample_rng(SUITE_SEED, i);
                let theta = loop {
                    let t = rng.gen_range(0.0..TAU);
                    if (t - PI).abs() > 1e-6 {
                        break t;
                    }
                };
                boundary_orbit(&g, theta, 200, Precision::Double)
                    .is_ok_and(|o| o.angles.iter().any(|&t| (Complex64::from_polar(1.0, t) - 1.0).norm() < 1e-6))
            })
            .count();
        c.check(hits >= 99, format!("{hits}/100 boundary starts reach p within 200 steps"));
    })
}

/// Relative error of the invariance using quadrature for both sides.
fn quadrature_invariance(g: &MapSpec, p: Complex64, q: f64, arc: &CircleArc, tol: f64) -> f64 {
    let lhs: f64 = preimage_arcs(g, arc)
        .map(|pre| pre.iter().map(|a| mu_p_quadrature(a, p, tol).value).sum())
        .unwrap_or(f64::NAN);
    let rhs = q * mu_p_quadrature(arc, p, tol).value;
    (lhs - rhs).abs() / rhs.abs().max(lhs.abs())
}

pub fn criterion_4() -> CriterionResult {
    timed(4, "mu_p invariance", Some(5.0), |c| {
        let tol = 1e-9;
        for (name, g) in [("mobius(1/2)", map("mobius")), ("(3z^2+1)/(z^2+3)", doubly_parabolic_blaschke())] {
            let dw = match find_denjoy_wolff(&g, c0(), 10_000) {
                Ok(dw) => dw,
                Err(e) => {
                    c.check(false, format!("{name}: {e}"));
                    continue;
                }
            };
            let tp = dw.p.arg();
            let mut rng = sample_rng(SUITE_SEED, 4);
            let (mut worst, mut worst_quad) = (0.0f64, 0.0f64);
            for _ in 0..20 {
                let mut u = [rng.gen_range(0.0..TAU - 0.2), rng.gen_range(0.0..TAU - 0.2)];
                u.sort_by(f64::total_cmp);
                let arc = CircleArc::new(tp + 0.1 + u[0], tp + 0.1 + u[1].max(u[0] + 1e-3)).expect("valid arc");
                let m = check_mu_invariance_with(&g, &dw, &arc).map(|m| m.rel_err).unwrap_or(f64::NAN);
                worst = worst.max(m);
                worst_quad = worst_quad.max(quadrature_invariance(&g, dw.p, dw.q, &arc, tol));
            }
            c.check(
                worst < 1e-6 && worst_quad < 1e-6,
                format!("{name}: max rel err {worst:.1e} closed form, {worst_quad:.1e} quadrature"),
            );
        }
        let arc = CircleArc::new(FRAC_PI_2, 3.0 * FRAC_PI_2).expect("valid arc");
        let one = Complex64::new(1.0, 0.0);
        let exact = 1.0 / TAU;
        let (cf, qd) = (mu_p(&arc, one).value, mu_p_quadrature(&arc, one, tol).value);
        c.check(
            (cf - exact).abs() < 1e-10 && (qd - exact).abs() < 1e-10,
            format!("mu_1(pi/2, 3pi/2) - 1/2pi = {:.1e} closed form, {:.1e} quadrature", cf - exact, qd - exact),
        );
    })
}

pub fn criterion_5() -> CriterionResult {
    timed(5, "translation envelope pipeline on z+1+e^-z", Some(30.0), |c| {
        let f = map("fatou");
        match prop_d_verify(&f, 0.55, 2.0, 2.0, 2000, 200, SUITE_SEED) {
            Ok(r) => c.check(
                r.passed,
                format!("propD passed = {} (effective c1 = {:.4})", r.passed, r.constants.c1_effective),
            ),
            Err(e) => c.check(false, format!("propD: {e}")),
        }
        let z0 = Complex64::new(10.0, 0.0);
        let metric = MetricModel::HalfPlane(HalfPlane::right(2.0));
        match step_sequence(&f, z0, &metric, 100_001) {
            Ok(s) => {
                let (lo, hi) = (1000..=100_000).map(|n| n as f64 * s.d[n]).fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
                c.check(lo >= 0.9 && hi <= 1.1, format!("n d_n in [{lo:.4}, {hi:.4}] on [10^3, 10^5]"));
                match thm_c_fit(&s) {
                    Ok(t) => c.check(t.satisfied && t.r_est > 1.0, format!("thmC satisfied = {}, r_est = {:.3}", t.satisfied, t.r_est)),
                    Err(e) => c.check(false, format!("thmC: {e}")),
                }
            }
            Err(e) => c.check(false, format!("steps: {e}")),
        }
        match classify_plane(&f, z0, &metric, 100_000) {
            Ok(cl) => c.check(cl.verdict == BakerVerdict::DoublyParabolic, format!("verdict {:?}", cl.verdict)),
            Err(e) => c.check(false, format!("classify: {e}")),
        }
    })
}

pub fn criterion_6() -> CriterionResult {
    timed(6, "dichotomy on z+tan z", Some(120.0), |c| {
        let tan = map("tan");
        let upper = DomainModel::HalfPlane(HalfPlane::upper(0.0));
        let opts = FateOptions {
            iter_budget: 1_000_000,
            escape_radius: 1e8,
            escape_window: 3,
            target_set: TargetSet::Interval { lo: -1.0, hi: 1.0 },
            min_returns: 10,
        };
        match dichotomy_experiment(&tan, &upper, Complex64::new(0.0, 1.0), 200, &opts, 1e-3, SUITE_SEED) {
            Ok(r) => {
                let (rec, esc) = (r.fraction(Fate::Recurrent), r.fraction(Fate::Escaping));
                c.check(rec >= 0.9, format!("tan recurrent fraction {rec:.3} (need >= 0.9)"));
                c.check(esc <= 0.1, format!("tan escaping fraction {esc:.3} (need <= 0.1)"));
            }
            Err(e) => c.check(false, format!("tan: {e}")),
        }
        let affine = map("affine");
        let right = DomainModel::HalfPlane(HalfPlane::right(0.0));
        let opts = FateOptions { iter_budget: 10_000, ..opts };
        match dichotomy_experiment(&affine, &right, Complex64::new(1.0, 0.0), 100, &opts, 1e-3, SUITE_SEED) {
            Ok(r) => {
                let esc = r.fraction(Fate::Escaping);
                c.check(esc == 1.0, format!("affine(2) escaping fraction {esc:.3}"));
            }
            Err(e) => c.check(false, format!("affine: {e}")),
        }
    })
}

pub fn criterion_7() -> CriterionResult {
    timed(7, "Rippon-Stallard condition on 2z+e^-z", Some(1.0), |c| {
        let f = map("doubling");
        let z0 = Complex64::new(10.0, 0.0);
        match iterate(&f, z0, &IterateOptions::new(60, f64::INFINITY)) {
            Some(rec) => {
                let rs = rippon_stallard_check(&rec);
                c.check(rs.eq_k.is_some_and(|k| k >= 1.9), format!("K = {:?}", rs.eq_k));
                c.check(matches!(rs.sqrt_sum, SqrtSum::Finite { .. }), format!("sqrt sum {:?}", rs.sqrt_sum));
            }
            None => c.check(false, "orbit"),
        }
        let metric = MetricModel::HalfPlane(HalfPlane::right(1.0));
        match classify_plane(&f, z0, &metric, 200) {
            Ok(cl) => c.check(cl.verdict == BakerVerdict::Hyperbolic, format!("verdict {:?}", cl.verdict)),
            Err(e) => c.check(false, format!("classify: {e}")),
        }
        match step_sequence(&f, z0, &metric, 200) {
            Ok(s) => {
                let worst = s.d[5..].iter().map(|d| (d - LN_2).abs()).fold(0.0, f64::max);
                c.check(worst < 0.05, format!("max |d_n - ln 2| = {worst:.1e} for n >= 5"));
            }
            Err(e) => c.check(false, format!("steps: {e}")),
        }
    })
}

fn boundary_samples(domain: &DomainModel, basepoint: Complex64, n: usize, stream: u64) -> Vec<Complex64> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(SUITE_SEED ^ stream, i);
            wos_sample_with(domain, basepoint, 1e-3, &mut rng).map_or(Complex64::new(f64::NAN, f64::NAN), |s| s.boundary_point)
        })
        .collect()
}

pub fn criterion_8() -> CriterionResult {
    timed(8, "harmonic measure sampling", Some(60.0), |c| {
        let n = 100_000;
        let pts = boundary_samples(&DomainModel::UnitDisc, c0(), n, 1);
        let mut counts = [0usize; 8];
        for z in &pts {
            let k = ((z.arg().rem_euclid(TAU) / (TAU / 8.0)) as usize).min(7);
            counts[k] += 1;
        }
        let worst = counts.iter().map(|&k| (k as f64 / n as f64 - 0.125).abs()).fold(0.0, f64::max);
        c.check(worst < 0.01, format!("disc(0) eighth-arc max deviation {worst:.4}"));
        let pts = boundary_samples(&DomainModel::UnitDisc, Complex64::new(0.5, 0.0), n, 2);
        let freq = pts.iter().filter(|z| z.re > 0.0).count() as f64 / n as f64;
        let expected = 2.0 / PI * 3f64.atan();
        c.check((freq - expected).abs() < 0.01, format!("disc(1/2) right semicircle {freq:.4} vs {expected:.4}"));
        let m = 10_000;
        let pts = boundary_samples(&DomainModel::HalfPlane(HalfPlane::upper(0.0)), Complex64::new(0.0, 1.0), m, 3);
        let xs: Vec<f64> = pts.iter().map(|z| z.re).collect();
        let ks = ks_statistic(&xs, |x| 0.5 + x.atan() / PI);
        let crit = ks_critical_1pct(m);
        c.check(ks < crit, format!("half-plane(i) KS {ks:.4} vs critical {crit:.4}"));
    })
}

pub fn criterion_9() -> CriterionResult {
    timed(9, "series tests", Some(1.0), |c| {
        let len = 10_000;
        let cases: [(&str, SeriesSample, GaussVerdict); 3] = [
            ("1/n", SeriesSample::from_fn(1, len, |n| 1.0 / n), GaussVerdict::DivergentByGauss),
            ("1/n^2", SeriesSample::from_fn(1, len, |n| 1.0 / (n * n)), GaussVerdict::ConditionNotMet),
            ("1/(n ln n)", SeriesSample::from_fn(2, len, |n| 1.0 / (n * n.ln())), GaussVerdict::ConditionNotMet),
        ];
        for (name, s, want) in cases {
            let got = gauss_divergence(&s, GAUSS_R, GAUSS_B).map(|g| g.verdict);
            c.check(got == Ok(want), format!("{name}: {got:?}"));
        }
        let seq = |f: fn(f64) -> f64| StepSequence {
            d: (1..=len).map(|n| f(n as f64)).collect(),
            n_offset: 1,
            metric: MetricModel::Disc,
            is_upper_bound: false,
        };
        let t = thm_c_fit(&seq(|n| 2.0 / n));
        c.check(t.as_ref().is_ok_and(|t| !t.satisfied), "2/n fails thmC".to_string());
        match thm_c_fit(&seq(|n| 1.0 / n + 5.0 * n.powf(-1.5))) {
            Ok(t) => c.check(
                t.satisfied && (t.r_est - 1.5).abs() < 0.1,
                format!("1/n + 5n^-1.5: satisfied = {}, r_est = {:.4}", t.satisfied, t.r_est),
            ),
            Err(e) => c.check(false, format!("thmC: {e}")),
        }
    })
}

/// One small configuration per experiment kind.
pub fn determinism_configs() -> Vec<serde_json::Value> {
    vec![
        json!({"experiment": "orbit", "map": "tan", "z0": "0.3+0.2i", "budget": 500}),
        json!({"experiment": "steps", "map": "fatou", "z0": "10+0i", "N": 2000}),
        json!({"experiment": "classify", "map": "blaschke", "params": {"zeros": ["0+0.5773502691896258i", "0-0.5773502691896258i"]}, "N": 2000}),
        json!({"experiment": "inner-check", "map": "mobius", "N": 500,
               "recurrence": {"target": [0.2, 0.4], "n_samples": 64, "budget": 2000, "min_returns": 3}}),
        json!({"experiment": "mu-invariance", "map": "mobius", "random_arcs": 8, "seed": 11}),
        json!({"experiment": "sample", "map": "fatou",
               "domain": {"kind": "oracle", "entry": {"kind": "half_plane", "direction": [1.0, 0.0], "offset": 2.0}, "budget": 50, "big_radius": 1e6},
               "basepoint": "4+0i", "n_samples": 16, "eps_boundary": 0.05, "seed": 5}),
        json!({"experiment": "dichotomy", "map": "tan", "n_samples": 200, "seed": 7, "iter_budget": 20000}),
        json!({"experiment": "verify-propd", "map": "fatou", "z_samples": 300, "n_max": 50, "seed": 3}),
        json!({"experiment": "series-test", "series": {"kind": "n_log_n"}, "len": 2000}),
    ]
}

pub fn criterion_10() -> CriterionResult {
    timed(10, "determinism across thread counts", None, |c| {
        for v in determinism_configs() {
            let name = v["experiment"].as_str().unwrap_or("?").to_string();
            let cfg = match ExperimentConfig::from_value(v) {
                Ok(cfg) => cfg,
                Err(e) => {
                    c.check(false, format!("{name}: {e}"));
                    continue;
                }
            };
            let runs: Vec<_> = [1, 8, 8]
                .iter()
                .map(|&t| run_with_threads(&cfg, Some(t)).map(|o| serde_json::to_string(&o.report.payload()).unwrap_or_default()))
                .collect();
            let same = match (&runs[0], &runs[1], &runs[2]) {
                (Ok(a), Ok(b), Ok(d)) => a == b && b == d,
                _ => false,
            };
            c.check(same, name);
        }
    })
}

pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}
