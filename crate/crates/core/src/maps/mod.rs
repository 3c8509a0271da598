//! Registered plane maps and inner functions, their evaluation, and
//! pole-aware orbit iteration.

mod blaschke;
mod eval;
mod orbit;
mod registry;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blaschke::{Blaschke, DiscPoint};
pub use eval::default_pole_eps;
pub use orbit::{iterate, IterateOptions, OrbitRecord, Termination};
pub use registry::{catalog, registry_get, CatalogEntry, ParamValue, Params};

/// Plane coordinates. Finite unless a value is explicitly documented as ∞.
pub type ComplexValue = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    /// `z + 1 + e^{-z}`
    Fatou,
    /// `z + e^{-z}`
    BakerDominguez,
    /// `z + tan z`
    Tan,
    /// `z + i + tan z`
    Absorb,
    /// `z - Σ_{n=0}^{terms} 2z/(z² - n^δ)`, `1 < δ < 2`.
    ManeTruncated { delta: f64, terms: usize },
    /// `(z + a)/(1 + a z)`, `0 < a < 1`; boundary fixed points ±1.
    MobiusDisc { a: f64 },
    /// Cayley conjugate of `ω ↦ ω + i` on the right half-plane, fixing 1.
    ParabolicMobiusDisc,
    BlaschkeFinite { zeros: Vec<ComplexValue>, rotation: ComplexValue },
    /// `λ z`
    AffineModel { lambda: ComplexValue },
    /// `2z + e^{-z}`, a hyperbolic-regime test map.
    DoublingExp,
}

/// How pole locations are determined for a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleRule {
    /// Entire map.
    None,
    /// Poles exactly at `π/2 + kπ`.
    TanLattice,
    /// Poles detected from the magnitude of rational denominators.
    Denominator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    pub kind: MapKind,
    /// Translation constant `a` in `f(z) = z + a + h(z)` when the map has one.
    pub baker_direction: Option<ComplexValue>,
    pub poles: PoleRule,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("pole at distance {distance:e}")]
    Pole { distance: f64 },
    #[error("result overflows the floating range")]
    Overflow,
    #[error("|z|² = {modulus_sqr} is outside the truncation range (< {limit})")]
    OutsideTruncation { modulus_sqr: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },
}

impl MapSpec {
    /// Wraps a kind with the pole rule and Baker direction it implies.
    pub fn from_kind(name: impl Into<String>, kind: MapKind) -> Self {
        let poles = match &kind {
            MapKind::Tan | MapKind::Absorb => PoleRule::TanLattice,
            MapKind::ManeTruncated { .. }
            | MapKind::MobiusDisc { .. }
            | MapKind::ParabolicMobiusDisc
            | MapKind::BlaschkeFinite { .. } => PoleRule::Denominator,
            _ => PoleRule::None,
        };
        let baker_direction = match &kind {
            MapKind::Fatou => Some(Complex64::new(1.0, 0.0)),
            MapKind::Tan => Some(Complex64::new(0.0, 1.0)),
            MapKind::Absorb => Some(Complex64::new(0.0, 2.0)),
            _ => None,
        };
        Self { name: name.into(), kind, baker_direction, poles }
    }

    /// True for the maps whose coefficients are real, so that
    /// `f(conj z) = conj f(z)` and the real line is invariant.
    pub fn has_real_coefficients(&self) -> bool {
        match &self.kind {
            MapKind::Fatou
            | MapKind::BakerDominguez
            | MapKind::Tan
            | MapKind::ManeTruncated { .. }
            | MapKind::MobiusDisc { .. }
            | MapKind::DoublingExp => true,
            MapKind::AffineModel { lambda } => lambda.im == 0.0,
            MapKind::BlaschkeFinite { zeros, rotation } => {
                rotation.im == 0.0 && {
                    // Real coefficients iff zeros are closed under conjugation.
                    let mut used = vec![false; zeros.len()];
                    zeros.iter().all(|a| {
                        zeros.iter().enumerate().any(|(j, b)| {
                            if !used[j] && *b == a.conj() {
                                used[j] = true;
                                true
                            } else {
                                false
                            }
                        })
                    })
                }
            }
            MapKind::Absorb | MapKind::ParabolicMobiusDisc => false,
        }
    }

    /// Canonical Blaschke form for the inner kinds.
    pub fn blaschke(&self) -> Option<Blaschke> {
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            MapKind::MobiusDisc { a } => Some(Blaschke::new(vec![Complex64::new(-a, 0.0)], one)),
            // C∘T∘C⁻¹ with C(ω) = (ω-1)/(ω+1), T(ω) = ω + i gives
            // ((2-i)z + i)/(2 + i - iz) = λ(z - c)/(1 - c̄z).
            MapKind::ParabolicMobiusDisc => Some(Blaschke::new(
                vec![Complex64::new(0.2, -0.4)],
                Complex64::new(0.6, -0.8),
            )),
            MapKind::BlaschkeFinite { zeros, rotation } => Some(Blaschke::new(zeros.clone(), *rotation)),
            _ => None,
        }
    }

    pub fn is_inner(&self) -> bool {
        self.blaschke().is_some()
    }
}
