//! Harmonic-measure sampling of domain boundaries and the fate of boundary
//! orbits: escape, recurrence to a target set, pole hits.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::HalfPlane;
use crate::maps::{default_pole_eps, EvalError, MapSpec};
use crate::rng::sample_rng;

/// Forward-invariant region through which orbits enter the Baker domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryRegion {
    HalfPlane(HalfPlane),
    /// `{Re(z ū) > offset, |Im(z ū) - center| < half_width}` with `u` the
    /// direction of `axis`.
    HalfStrip { axis: HalfPlane, center: f64, half_width: f64 },
}

impl EntryRegion {
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            EntryRegion::HalfPlane(h) => h.contains(z),
            EntryRegion::HalfStrip { axis, center, half_width } => {
                axis.contains(z) && ((z * axis.direction.conj()).im - center).abs() < *half_width
            }
        }
    }

    /// A point of the region, used as a reference for sampling.
    fn sample(&self, rng: &mut impl Rng) -> Complex64 {
        let (axis, center, width) = match self {
            EntryRegion::HalfPlane(h) => (*h, 0.0, 10.0),
            EntryRegion::HalfStrip { axis, center, half_width } => (*axis, *center, *half_width),
        };
        let u: f64 = rng.gen();
        let x = axis.offset + 1e-9 + 20.0 * u * u;
        let y = center + width * rng.gen_range(-1.0..1.0) * (1.0 - 1e-9);
        Complex64::new(x, y) * axis.direction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDomain {
    pub map: MapSpec,
    pub entry: EntryRegion,
    pub budget: usize,
    pub big_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainModel {
    UnitDisc,
    HalfPlane(HalfPlane),
    OracleDomain(OracleDomain),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    InU,
    NotInU,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("basepoint {0} is not in the domain")]
    BasepointOutside(Complex64),
    #[error("walk did not reach the boundary within {0} steps")]
    StuckWalk(usize),
    #[error("entry region is not forward invariant: {witness} leaves it")]
    EntryNotInvariant { witness: Complex64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

impl OracleDomain {
    /// Checks on seeded samples that the entry region is mapped into
    /// itself for `steps` iterations.
    pub fn validate(&self, samples: usize, steps: usize, seed: u64) -> Result<(), HarmonicError> {
        let bad = (0..samples as u64).into_par_iter().find_map_first(|i| {
            let mut rng = sample_rng(seed, i);
            let z0 = self.entry.sample(&mut rng);
            let mut z = z0;
            for _ in 0..steps {
                match self.map.eval(z) {
                    Ok(w) if self.entry.contains(w) => z = w,
                    _ => return Some(z0),
                }
            }
            None
        });
        match bad {
            Some(witness) => Err(HarmonicError::EntryNotInvariant { witness }),
            None => Ok(()),
        }
    }
}

/// Steps of steady drift away from the entry region that count as visible
/// divergence in another direction.
pub const AWAY_WINDOW: usize = 20;
/// Minimal decrease of the signed distance per step within the window.
pub const AWAY_STEP: f64 = 0.5;

impl EntryRegion {
    fn axis(&self) -> HalfPlane {
        match self {
            EntryRegion::HalfPlane(h) => *h,
            EntryRegion::HalfStrip { axis, .. } => *axis,
        }
    }
}

/// Three-valued membership in the Baker domain: `InU` once the orbit enters
/// the invariant entry region, `NotInU` on a pole, when the orbit leaves
/// `big_radius` outside it, or after `AWAY_WINDOW` consecutive steps that
/// increase the modulus and move at least `AWAY_STEP` away from the entry
/// axis; `Unknown` when the budget runs out.
pub fn membership(domain: &OracleDomain, z: Complex64) -> Membership {
    let axis = domain.entry.axis();
    let mut z = z;
    let mut away = 0usize;
    for _ in 0..=domain.budget {
        if domain.entry.contains(z) {
            return Membership::InU;
        }
        if !(z.norm() <= domain.big_radius) {
            return Membership::NotInU;
        }
        let w = match domain.map.eval(z) {
            Ok(w) => w,
            Err(_) => return Membership::NotInU,
        };
        if axis.signed_distance(w) < axis.signed_distance(z) - AWAY_STEP && w.norm() > z.norm() {
            away += 1;
            if away >= AWAY_WINDOW {
                return Membership::NotInU;
            }
        } else {
            away = 0;
        }
        z = w;
    }
    Membership::Unknown
}

impl DomainModel {
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            DomainModel::UnitDisc => z.norm_sqr() < 1.0,
            DomainModel::HalfPlane(h) => h.contains(z),
            DomainModel::OracleDomain(d) => membership(d, z) == Membership::InU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSample {
    pub boundary_point: Complex64,
    pub walk_steps: usize,
    pub terminal_radius: f64,
}

pub const WOS_MAX_STEPS: usize = 1_000_000;
pub const WOS_RAYS: usize = 16;
const WOS_BISECTIONS: usize = 8;

/// Conservative distance to the complement: along each of 16 rays the
/// first non-member is located by bisection from `scale`, and half of the
/// smallest such distance is returned.
fn oracle_radius(d: &OracleDomain, z: Complex64, scale: f64) -> f64 {
    let inside = |w: Complex64| membership(d, w) == Membership::InU;
    let mut hit = scale;
    for k in 0..WOS_RAYS {
        let dir = Complex64::from_polar(1.0, TAU * k as f64 / WOS_RAYS as f64);
        if inside(z + dir * scale) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, scale);
        for _ in 0..WOS_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if inside(z + dir * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hit = hit.min(lo);
    }
    0.5 * hit
}

/// One harmonic-measure sample of the boundary seen from `basepoint`.
pub fn wos_sample(domain: &DomainModel, basepoint: Complex64, eps_boundary: f64, seed: u64) -> Result<HarmonicSample, HarmonicError> {
    wos_sample_with(domain, basepoint, eps_boundary, &mut sample_rng(seed, 0))
}

pub fn wos_sample_with(
    domain: &DomainModel,
    basepoint: Complex64,
    eps_boundary: f64,
    rng: &mut impl Rng,
) -> Result<HarmonicSample, HarmonicError> {
    match domain {
        DomainModel::UnitDisc => {
            if !(basepoint.norm_sqr() < 1.0) {
                return Err(HarmonicError::BasepointOutside(basepoint));
            }
            // Push-forward of the uniform law under the automorphism 0 ↦ basepoint.
            let w = Complex64::from_polar(1.0, rng.gen_range(0.0..TAU));
            let z = (w + basepoint) / (1.0 + basepoint.conj() * w);
            Ok(HarmonicSample { boundary_point: z / z.norm(), walk_steps: 1, terminal_radius: 0.0 })
        }
        DomainModel::HalfPlane(h) => {
            let t = h.signed_distance(basepoint);
            if !(t > 0.0) {
                return Err(HarmonicError::BasepointOutside(basepoint));
            }
            // Exit law on the line: Cauchy with location s and scale t.
            let s = (basepoint * h.direction.conj()).im;
            let y = s + t * (PI * (rng.gen::<f64>() - 0.5)).tan();
            let z = (Complex64::new(0.0, y) + h.offset) * h.direction;
            Ok(HarmonicSample { boundary_point: z, walk_steps: 1, terminal_radius: 0.0 })
        }
        DomainModel::OracleDomain(d) => {
            if membership(d, basepoint) != Membership::InU {
                return Err(HarmonicError::BasepointOutside(basepoint));
            }
            let mut z = basepoint;
            let mut scale = 1.0;
            for step in 1..=WOS_MAX_STEPS {
                let r = oracle_radius(d, z, scale);
                if r < eps_boundary {
                    return Ok(HarmonicSample { boundary_point: z, walk_steps: step, terminal_radius: r });
                }
                z += Complex64::from_polar(r, rng.gen_range(0.0..TAU));
                scale = (4.0 * r).min(d.big_radius);
            }
            Err(HarmonicError::StuckWalk(WOS_MAX_STEPS))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    Interval { lo: f64, hi: f64 },
    Disk { center: Complex64, radius: f64 },
}

impl TargetSet {
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            TargetSet::Interval { lo, hi } => z.im == 0.0 && z.re >= lo && z.re <= hi,
            TargetSet::Disk { center, radius } => (z - center).norm() <= radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Escaping,
    Recurrent,
    PoleHit,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FateOutcome {
    pub fate: Fate,
    pub returns: usize,
    pub steps: usize,
    /// Set when the fate is undefined because floating point lost meaning.
    pub precision_loss: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FateOptions {
    pub iter_budget: usize,
    pub escape_radius: f64,
    pub escape_window: usize,
    pub target_set: TargetSet,
    pub min_returns: usize,
}

/// Beyond this modulus the spacing of doubles exceeds `2^-2`, so periodic
/// maps such as `tan` or `exp(-z)` can no longer be evaluated meaningfully.
pub const MEANINGFUL_MODULUS: f64 = (1u64 << 50) as f64;

/// Follows the orbit of a boundary point. Points on the real line of a map
/// with real coefficients are iterated in real arithmetic.
pub fn boundary_fate(map: &MapSpec, x0: Complex64, opts: &FateOptions) -> FateOutcome {
    let real = x0.im == 0.0 && map.has_real_coefficients();
    let mut z = x0;
    let mut returns = 0;
    let mut run = 0;
    let out = |fate, returns, steps, precision_loss| FateOutcome { fate, returns, steps, precision_loss };
    for k in 0..=opts.iter_budget {
        if k > 0 && opts.target_set.contains(z) {
            returns += 1;
            if returns >= opts.min_returns {
                return out(Fate::Recurrent, returns, k, false);
            }
        }
        if z.norm() > opts.escape_radius {
            run += 1;
            if run >= opts.escape_window.max(1) {
                return out(Fate::Escaping, returns, k + 1 - run, false);
            }
        } else {
            run = 0;
        }
        if !(z.norm() < MEANINGFUL_MODULUS) {
            return out(Fate::Undefined, returns, k, true);
        }
        if k == opts.iter_budget {
            break;
        }
        let next = if real {
            map.eval_real(z.re, default_pole_eps(z)).expect("real coefficients").map(|x| Complex64::new(x, 0.0))
        } else {
            map.eval_with(z, default_pole_eps(z))
        };
        z = match next {
            Ok(w) => w,
            Err(EvalError::Pole { .. }) => return out(Fate::PoleHit, returns, k, false),
            Err(_) => return out(Fate::Undefined, returns, k, true),
        };
    }
    out(Fate::Undefined, returns, opts.iter_budget, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateRow {
    pub sample_id: usize,
    pub boundary_point: Complex64,
    pub fate: Fate,
    pub returns: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateParameters {
    pub iter_budget: usize,
    pub escape_radius: f64,
    pub escape_window: usize,
    pub min_returns: usize,
    pub target_set: TargetSet,
    pub eps_boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateReport {
    pub n_samples: usize,
    pub escaping: usize,
    pub recurrent: usize,
    pub pole_hit: usize,
    pub undefined: usize,
    /// Samples lost to a stuck walk; included in `undefined`.
    pub sampling_failures: usize,
    pub parameters: FateParameters,
    pub seed: u64,
    pub rows: Vec<FateRow>,
}

impl FateReport {
    pub fn fraction(&self, fate: Fate) -> f64 {
        let c = match fate {
            Fate::Escaping => self.escaping,
            Fate::Recurrent => self.recurrent,
            Fate::PoleHit => self.pole_hit,
            Fate::Undefined => self.undefined,
        };
        c as f64 / self.n_samples.max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "# sample_id: index of the seeded stream; boundary_point: re and im; fate: escaping|recurrent|pole_hit|undefined; returns: visits to the target; steps: iterations used\n",
        );
        s.push_str("sample_id,boundary_re,boundary_im,fate,returns,steps\n");
        for r in &self.rows {
            let fate = serde_json::to_value(r.fate).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            s.push_str(&format!(
                "{},{:e},{:e},{},{},{}\n",
                r.sample_id, r.boundary_point.re, r.boundary_point.im, fate, r.returns, r.steps
            ));
        }
        s
    }
}

/// Samples `n_samples` boundary points by harmonic measure from `basepoint`
/// and classifies each orbit. Sample `i` uses the stream `(seed, i)`.
pub fn dichotomy_experiment(
    map: &MapSpec,
    domain: &DomainModel,
    basepoint: Complex64,
    n_samples: usize,
    opts: &FateOptions,
    eps_boundary: f64,
    seed: u64,
) -> Result<FateReport, HarmonicError> {
    if !domain.contains(basepoint) {
        return Err(HarmonicError::BasepointOutside(basepoint));
    }
    let rows: Vec<(FateRow, bool)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            match wos_sample_with(domain, basepoint, eps_boundary, &mut rng) {
                Ok(s) => {
                    let o = boundary_fate(map, s.boundary_point, opts);
                    (FateRow { sample_id: i, boundary_point: s.boundary_point, fate: o.fate, returns: o.returns, steps: o.steps }, false)
                }
                Err(_) => (
                    FateRow { sample_id: i, boundary_point: Complex64::new(f64::NAN, f64::NAN), fate: Fate::Undefined, returns: 0, steps: 0 },
                    true,
                ),
            }
        })
        .collect();
    let count = |f: Fate| rows.iter().filter(|(r, _)| r.fate == f).count();
    Ok(FateReport {
        n_samples,
        escaping: count(Fate::Escaping),
        recurrent: count(Fate::Recurrent),
        pole_hit: count(Fate::PoleHit),
        undefined: count(Fate::Undefined),
        sampling_failures: rows.iter().filter(|(_, f)| *f).count(),
        parameters: FateParameters {
            iter_budget: opts.iter_budget,
            escape_radius: opts.escape_radius,
            escape_window: opts.escape_window,
            min_returns: opts.min_returns,
            target_set: opts.target_set,
            eps_boundary,
        },
        seed,
        rows: rows.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Fraction of the cells of width `eps` in `[lo, hi]` visited by `points`.
pub fn net_coverage(points: &[f64], lo: f64, hi: f64, eps: f64) -> f64 {
    let cells = ((hi - lo) / eps).ceil().max(1.0) as usize;
    let mut seen = vec![false; cells];
    for &x in points {
        if x >= lo && x < hi {
            seen[(((x - lo) / eps) as usize).min(cells - 1)] = true;
        }
    }
    seen.iter().filter(|&&s| s).count() as f64 / cells as f64
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::maps::{registry_get, MapKind, Params};
    use crate::stats::ks_statistic;

    fn tan_domain() -> OracleDomain {
        OracleDomain {
            map: registry_get("tan", &Params::new()).unwrap(),
            entry: EntryRegion::HalfPlane(HalfPlane::upper(0.0)),
            budget: 100,
            big_radius: 1e6,
        }
    }

    #[test]
    fn membership_examples() {
        let fatou = OracleDomain {
            map: registry_get("fatou", &Params::new()).unwrap(),
            entry: EntryRegion::HalfPlane(HalfPlane::right(2.0)),
            budget: 100,
            big_radius: 1e6,
        };
        assert_eq!(membership(&fatou, Complex64::new(10.0, 0.0)), Membership::InU);
        assert_eq!(membership(&tan_domain(), Complex64::new(0.0, -5.0)), Membership::NotInU);
        assert_eq!(membership(&tan_domain(), Complex64::new(FRAC_PI_2, 0.0)), Membership::NotInU);
    }

    #[test]
    fn half_strip_is_invariant_for_newton_map() {
        let d = OracleDomain {
            map: registry_get("baker-dominguez", &Params::new()).unwrap(),
            entry: EntryRegion::HalfStrip { axis: HalfPlane::right(0.0), center: 0.0, half_width: FRAC_PI_2 },
            budget: 200,
            big_radius: 1e6,
        };
        d.validate(200, 50, 1).unwrap();
        let bad = OracleDomain { entry: EntryRegion::HalfPlane(HalfPlane::right(0.0)), ..d };
        assert!(bad.validate(200, 50, 1).is_err());
    }

    #[test]
    fn exact_disc_law() {
        let n = 20_000;
        let mut right = 0;
        for i in 0..n {
            let s = wos_sample_with(&DomainModel::UnitDisc, Complex64::new(0.5, 0.0), 1e-9, &mut sample_rng(5, i)).unwrap();
            assert!((s.boundary_point.norm() - 1.0).abs() < 1e-12);
            if s.boundary_point.re > 0.0 {
                right += 1;
            }
        }
        let expected = 2.0 / PI * 3f64.atan();
        assert!((right as f64 / n as f64 - expected).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn oracle_walk_on_right_half_plane() {
        // Orbits of 2z enter {Re > 1} exactly when Re z > 0.
        let d = OracleDomain {
            map: MapSpec::from_kind("affine", MapKind::AffineModel { lambda: Complex64::new(2.0, 0.0) }),
            entry: EntryRegion::HalfPlane(HalfPlane::right(1.0)),
            budget: 60,
            big_radius: 1e12,
        };
        let dom = DomainModel::OracleDomain(d);
        let ys: Vec<f64> = (0..300)
            .map(|i| {
                let s = wos_sample_with(&dom, Complex64::new(1.0, 0.0), 1e-4, &mut sample_rng(9, i)).unwrap();
                assert!(s.boundary_point.re.abs() < 1e-3 && s.terminal_radius < 1e-4);
                s.boundary_point.im
            })
            .collect();
        let ks = ks_statistic(&ys, |y| 0.5 + y.atan() / PI);
        assert!(ks < 1.628 / (300f64).sqrt() * 1.5, "{ks}");
    }

    #[test]
    fn fate_examples() {
        let tan = registry_get("tan", &Params::new()).unwrap();
        let opts = FateOptions {
            iter_budget: 1_000_000,
            escape_radius: 1e12,
            escape_window: 3,
            target_set: TargetSet::Interval { lo: -1.0, hi: 1.0 },
            min_returns: 10,
        };
        assert_eq!(boundary_fate(&tan, Complex64::new(FRAC_PI_2, 0.0), &opts).fate, Fate::PoleHit);
        let aff = MapSpec::from_kind("affine", MapKind::AffineModel { lambda: Complex64::new(2.0, 0.0) });
        let o = boundary_fate(&aff, Complex64::new(0.0, 0.3), &FateOptions { escape_radius: 1e6, ..opts });
        assert_eq!(o.fate, Fate::Escaping);
        let o = boundary_fate(&tan, Complex64::new(0.5, 0.0), &opts);
        assert!(matches!(o.fate, Fate::Recurrent | Fate::Undefined));
    }

    #[test]
    fn report_counts_and_determinism() {
        let aff = MapSpec::from_kind("affine", MapKind::AffineModel { lambda: Complex64::new(2.0, 0.0) });
        let dom = DomainModel::HalfPlane(HalfPlane::right(0.0));
        let opts = FateOptions {
            iter_budget: 1000,
            escape_radius: 1e6,
            escape_window: 3,
            target_set: TargetSet::Disk { center: Complex64::new(0.0, 0.0), radius: 0.1 },
            min_returns: 10,
        };
        let a = dichotomy_experiment(&aff, &dom, Complex64::new(1.0, 0.0), 50, &opts, 1e-9, 4).unwrap();
        let b = dichotomy_experiment(&aff, &dom, Complex64::new(1.0, 0.0), 50, &opts, 1e-9, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.escaping + a.recurrent + a.pole_hit + a.undefined, a.n_samples);
        assert_eq!(a.escaping, 50);
        assert_eq!(a.to_csv().lines().count(), 52);
    }

    #[test]
    fn coverage() {
        let pts: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert_eq!(net_coverage(&pts, 0.0, 1.0, 0.1), 1.0);
        assert_eq!(net_coverage(&pts[..50], 0.0, 1.0, 0.1), 0.5);
    }
}
