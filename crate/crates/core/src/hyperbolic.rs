//! Hyperbolic distances on the unit disc (density `2/(1-|z|²)`), on
//! half-planes (density `1/dist(z, ∂H)`), upper bounds for general domains,
//! and the step sequences `d_n = ρ(f^{n+1}(z), f^n(z))`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::quad::adaptive_simpson;
use crate::maps::{default_pole_eps, DiscPoint, EvalError, MapSpec};

/// `{z : Re(z · conj(direction)) > offset}` with `|direction| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub direction: Complex64,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(direction: Complex64, offset: f64) -> Result<Self, HyperbolicError> {
        if (direction.norm() - 1.0).abs() > 1e-12 || !offset.is_finite() {
            return Err(HyperbolicError::InvalidModel(format!(
                "half-plane direction {direction} must have unit modulus and finite offset"
            )));
        }
        Ok(Self { direction: direction / direction.norm(), offset })
    }

    /// `{Re(z/a) > c}` for any non-zero `a`.
    pub fn from_translation(a: Complex64, c: f64) -> Self {
        Self { direction: a / a.norm(), offset: c * a.norm() }
    }

    pub fn right(offset: f64) -> Self {
        Self { direction: Complex64::new(1.0, 0.0), offset }
    }

    pub fn upper(offset: f64) -> Self {
        Self { direction: Complex64::new(0.0, 1.0), offset }
    }

    pub fn signed_distance(&self, z: Complex64) -> f64 {
        (z * self.direction.conj()).re - self.offset
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.signed_distance(z) > 0.0
    }

    /// Affine map onto the right half-plane `{Re w > 0}`.
    pub fn to_right(&self, z: Complex64) -> Complex64 {
        z * self.direction.conj() - self.offset
    }
}

/// Cayley transform of the right half-plane onto the disc.
pub fn cayley(w: Complex64) -> Complex64 {
    (w - 1.0) / (w + 1.0)
}

pub fn cayley_inverse(z: Complex64) -> Complex64 {
    (1.0 + z) / (1.0 - z)
}

/// A positive lower bound on `dist(z, ∂U)`; non-positive values mean `z ∉ U`.
#[derive(Clone)]
pub struct DistanceEstimator {
    label: String,
    f: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>,
}

impl DistanceEstimator {
    pub fn new(label: impl Into<String>, f: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn estimate(&self, z: Complex64) -> f64 {
        (self.f)(z)
    }
}

impl fmt::Debug for DistanceEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistanceEstimator").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone)]
pub enum MetricModel {
    Disc,
    HalfPlane(HalfPlane),
    /// Integrates `2/dist` along segments: an upper bound for `ρ_U` only.
    DomainUpperBound(DistanceEstimator),
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MetricRepr<'a> {
    Disc,
    HalfPlane { direction: Complex64, offset: f64 },
    DomainUpperBound { estimator: &'a str },
}

impl Serialize for MetricModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricModel::Disc => MetricRepr::Disc,
            MetricModel::HalfPlane(h) => MetricRepr::HalfPlane { direction: h.direction, offset: h.offset },
            MetricModel::DomainUpperBound(e) => MetricRepr::DomainUpperBound { estimator: e.label() },
        }
        .serialize(s)
    }
}

impl MetricModel {
    pub fn is_exact(&self) -> bool {
        !matches!(self, MetricModel::DomainUpperBound(_))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            MetricModel::Disc => z.norm_sqr() < 1.0,
            MetricModel::HalfPlane(h) => h.contains(z),
            MetricModel::DomainUpperBound(e) => e.estimate(z) > 0.0,
        }
    }

    pub fn distance(&self, z1: Complex64, z2: Complex64) -> Result<f64, HyperbolicError> {
        match self {
            MetricModel::Disc => dist_disc(z1, z2),
            MetricModel::HalfPlane(h) => dist_halfplane(h, z1, z2),
            MetricModel::DomainUpperBound(e) => dist_domain_upper(e, z1, z2).map(|b| b.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperbolicError {
    #[error("point {0} is not inside the model domain")]
    DomainViolation(Complex64),
    #[error("orbit left the model domain at index {index}")]
    OrbitLeftDomain { index: usize },
    #[error("distance estimate is not positive at {0}")]
    SegmentLeavesDomain(Complex64),
    #[error("evaluation failed at index {index}: {source}")]
    Eval { index: usize, source: EvalError },
    #[error("defect 1-|z|² fell below working precision at index {index}")]
    PrecisionExhausted { index: usize },
    #[error("invalid metric model: {0}")]
    InvalidModel(String),
}

/// `2 artanh t` with `t² = Δ²/(Δ² + D)`, written as
/// `2 log1p(t) + log1p(Δ²/D)` so that no `1 - t` is ever formed.
fn rho_from(delta_sqr: f64, d: f64) -> f64 {
    if delta_sqr == 0.0 {
        return 0.0;
    }
    let t = (delta_sqr / (delta_sqr + d)).sqrt();
    2.0 * t.ln_1p() + (delta_sqr / d).ln_1p()
}

pub fn dist_disc(z1: Complex64, z2: Complex64) -> Result<f64, HyperbolicError> {
    let defect = |z: Complex64| {
        let r = z.norm();
        if r < 1.0 {
            Ok((1.0 - r) * (1.0 + r))
        } else {
            Err(HyperbolicError::DomainViolation(z))
        }
    };
    let (d1, d2) = (defect(z1)?, defect(z2)?);
    Ok(rho_from((z1 - z2).norm_sqr(), d1 * d2))
}

/// Disc distance using the tracked defects of both points.
pub fn dist_disc_points(p: &DiscPoint, q: &DiscPoint) -> f64 {
    let delta = (p.z - q.z).to_c64().norm_sqr();
    rho_from(delta, p.defect * q.defect)
}

pub fn dist_halfplane(h: &HalfPlane, z1: Complex64, z2: Complex64) -> Result<f64, HyperbolicError> {
    let (x1, x2) = (h.signed_distance(z1), h.signed_distance(z2));
    if !(x1 > 0.0) {
        return Err(HyperbolicError::DomainViolation(z1));
    }
    if !(x2 > 0.0) {
        return Err(HyperbolicError::DomainViolation(z2));
    }
    Ok(rho_from((z1 - z2).norm_sqr(), 4.0 * x1 * x2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub value: f64,
    pub quad_error: f64,
    pub evaluations: usize,
}

pub const QUAD_TOL: f64 = 1e-9;
pub const QUAD_MAX_EVALS: usize = 1 << 14;

/// `∫_{[z1,z2]} 2|dz|/dist(z, ∂U)`, an upper bound for `ρ_U(z1, z2)`.
pub fn dist_domain_upper(
    est: &DistanceEstimator,
    z1: Complex64,
    z2: Complex64,
) -> Result<UpperBound, HyperbolicError> {
    let len = (z2 - z1).norm();
    let g = |t: f64| {
        let z = z1 + (z2 - z1) * t;
        let r = est.estimate(z);
        if r > 0.0 {
            Ok(2.0 * len / r)
        } else {
            Err(HyperbolicError::SegmentLeavesDomain(z))
        }
    };
    if len == 0.0 {
        g(0.0)?;
        return Ok(UpperBound { value: 0.0, quad_error: 0.0, evaluations: 1 });
    }
    let q = adaptive_simpson(g, 0.0, 1.0, QUAD_TOL, QUAD_MAX_EVALS)?;
    Ok(UpperBound { value: q.value, quad_error: q.error, evaluations: q.evaluations })
}

#[derive(Debug, Clone, Serialize)]
pub struct StepSequence {
    pub d: Vec<f64>,
    pub n_offset: usize,
    pub metric: MetricModel,
    pub is_upper_bound: bool,
}

impl StepSequence {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// `(n, d_n)` pairs.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.d.iter().enumerate().map(move |(i, &d)| (i + self.n_offset, d))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "# n: step index; d_n: hyperbolic distance between f^(n+1)(z0) and f^n(z0) in nats; n*d_n: product\n",
        );
        if self.is_upper_bound {
            out.push_str("# d_n values are upper bounds (2/dist density)\n");
        }
        out.push_str("n,d_n,n*d_n\n");
        for (n, d) in self.indexed() {
            out.push_str(&format!("{n},{d:e},{:e}\n", n as f64 * d));
        }
        out
    }
}

/// Smallest defect `1-|z|²` at which a double-double disc orbit is trusted.
pub const DEFECT_FLOOR: f64 = 1e-27;
/// Bound on the accumulated error of a disc step sequence.
pub const STEP_ACCURACY: f64 = 1e-12;

/// `d[n] = ρ(f^{n+1}(z0), f^n(z0))` for `n = 0..N`.
pub fn step_sequence(
    map: &MapSpec,
    z0: Complex64,
    metric: &MetricModel,
    n: usize,
) -> Result<StepSequence, HyperbolicError> {
    if !metric.contains(z0) {
        return Err(HyperbolicError::DomainViolation(z0));
    }
    let d = match (metric, map.blaschke()) {
        (MetricModel::Disc, Some(b)) if b.degree() == 1 => {
            // Disc automorphisms are isometries: every step has the first step's length.
            let z1 = map.eval(z0).map_err(|source| HyperbolicError::Eval { index: 0, source })?;
            vec![dist_disc(z0, z1)?; n]
        }
        (MetricModel::Disc, Some(b)) => {
            // Rounding of each double-double step, measured hyperbolically.
            // Errors never grow under a self-map of the disc, so they add up.
            let unit = 16.0 * b.degree() as f64 * 2f64.powi(-104);
            let mut drift = 0.0;
            let mut p = DiscPoint::new(z0);
            let mut d = Vec::with_capacity(n);
            for k in 0..n {
                let q = b.step_disc(p);
                drift += 2.0 * unit / q.defect.max(f64::MIN_POSITIVE);
                if !(q.defect > DEFECT_FLOOR) || !q.z.is_finite() || 2.0 * drift > STEP_ACCURACY {
                    return Err(HyperbolicError::PrecisionExhausted { index: k + 1 });
                }
                d.push(dist_disc_points(&p, &q));
                p = q;
            }
            d
        }
        _ => {
            let mut z = z0;
            let mut d = Vec::with_capacity(n);
            for k in 0..n {
                let w = map
                    .eval_with(z, default_pole_eps(z))
                    .map_err(|source| HyperbolicError::Eval { index: k, source })?;
                if !metric.contains(w) {
                    return Err(HyperbolicError::OrbitLeftDomain { index: k + 1 });
                }
                d.push(metric.distance(z, w)?);
                z = w;
            }
            d
        }
    };
    Ok(StepSequence { d, n_offset: 0, metric: metric.clone(), is_upper_bound: !metric.is_exact() })
}
