use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexValue, MapError, MapKind, MapSpec};

/// A configuration value: a number, a string (complex literals such as
/// `"1-2i"`, or a flag such as `"+"`), or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
    List(Vec<ParamValue>),
}

pub type Params = BTreeMap<String, ParamValue>;

impl ParamValue {
    /// Reads a complex number from `3`, `"3-4i"`, or `[3, -4]`.
    pub fn as_complex(&self) -> Option<ComplexValue> {
        match self {
            ParamValue::Number(x) => Some(Complex64::new(*x, 0.0)),
            ParamValue::Text(s) => {
                let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
                compact.parse::<Complex64>().ok()
            }
            ParamValue::List(items) => match items.as_slice() {
                [ParamValue::Number(re), ParamValue::Number(im)] => Some(Complex64::new(*re, *im)),
                _ => None,
            },
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(x) => Some(*x),
            ParamValue::Text(s) => s.trim().parse().ok(),
            ParamValue::List(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub params: &'static str,
    pub provenance: &'static str,
}

impl std::fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {} ({})", self.name, self.formula, self.provenance)?;
        if !self.params.is_empty() {
            write!(f, " [params: {}]", self.params)?;
        }
        Ok(())
    }
}

const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "fatou",
        formula: "z+1+e^{-z}",
        params: "",
        provenance: "Fatou's completely invariant Baker domain, translation a=1",
    },
    CatalogEntry {
        name: "baker-dominguez",
        formula: "z+e^{-z}",
        params: "",
        provenance: "Newton map of e^{-e^z}, degree-2 doubly parabolic Baker domains",
    },
    CatalogEntry {
        name: "tan",
        formula: "z+tan z",
        params: "half_plane: \"+\" | \"-\"",
        provenance: "Doering-Mane example, Baker domains Im z > 0 and Im z < 0, a=±i",
    },
    CatalogEntry {
        name: "absorb",
        formula: "z+i+tan z",
        params: "",
        provenance: "Newton map with an infinite-degree absorbing Baker domain, a=2i",
    },
    CatalogEntry {
        name: "mane",
        formula: "z-sum_{n=0}^{N} 2z/(z^2-n^delta)",
        params: "delta in (1,2), terms N >= 1",
        provenance: "Aaronson / Doering-Mane series, truncated",
    },
    CatalogEntry {
        name: "mobius",
        formula: "(z+a)/(1+az)",
        params: "a in (0,1), default 0.5",
        provenance: "hyperbolic disc automorphism, Denjoy-Wolff point 1",
    },
    CatalogEntry {
        name: "parabolic-mobius",
        formula: "((2-i)z+i)/(2+i-iz)",
        params: "",
        provenance: "Cayley conjugate of w -> w+i, simply parabolic",
    },
    CatalogEntry {
        name: "blaschke",
        formula: "rotation * prod (z-a_k)/(1-conj(a_k) z)",
        params: "zeros: list of complex in the disc, rotation: unit complex (default 1)",
        provenance: "finite Blaschke product; zeros +-i/sqrt(3) give (3z^2+1)/(z^2+3)",
    },
    CatalogEntry {
        name: "affine",
        formula: "lambda z",
        params: "lambda: complex, default 2",
        provenance: "hyperbolic model map on a half-plane",
    },
    CatalogEntry {
        name: "doubling",
        formula: "2z+e^{-z}",
        params: "",
        provenance: "hyperbolic-regime test map, no Baker-domain provenance",
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    CATALOG
}

fn invalid(field: &str, reason: impl Into<String>) -> MapError {
    MapError::InvalidParam { field: field.to_string(), reason: reason.into() }
}

struct ParamReader<'a> {
    params: &'a Params,
    allowed: &'static [&'static str],
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a Params, allowed: &'static [&'static str]) -> Result<Self, MapError> {
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(invalid(k, "not a parameter of this map"));
        }
        Ok(Self { params, allowed })
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, MapError> {
        debug_assert!(self.allowed.contains(&key));
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| invalid(key, "expected a real number")),
        }
    }

    fn complex_or(&self, key: &str, default: Complex64) -> Result<Complex64, MapError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_complex().ok_or_else(|| invalid(key, "expected a complex number")),
        }
    }
}

/// Builds a validated [`MapSpec`] from a registered name and parameters.
pub fn registry_get(name: &str, params: &Params) -> Result<MapSpec, MapError> {
    let one = Complex64::new(1.0, 0.0);
    let kind = match name {
        "fatou" => {
            ParamReader::new(params, &[])?;
            MapKind::Fatou
        }
        "baker-dominguez" => {
            ParamReader::new(params, &[])?;
            MapKind::BakerDominguez
        }
        "tan" => {
            ParamReader::new(params, &["half_plane"])?;
            let upper = match params.get("half_plane") {
                None => true,
                Some(ParamValue::Text(s)) if s == "+" => true,
                Some(ParamValue::Text(s)) if s == "-" => false,
                Some(_) => return Err(invalid("half_plane", "expected \"+\" or \"-\"")),
            };
            let mut spec = MapSpec::from_kind(name, MapKind::Tan);
            spec.baker_direction = Some(Complex64::new(0.0, if upper { 1.0 } else { -1.0 }));
            return Ok(spec);
        }
        "absorb" => {
            ParamReader::new(params, &[])?;
            MapKind::Absorb
        }
        "mane" => {
            let r = ParamReader::new(params, &["delta", "terms"])?;
            let delta = r.f64_or("delta", 1.5)?;
            if !(delta > 1.0 && delta < 2.0) {
                return Err(invalid("delta", format!("{delta} is not in (1, 2)")));
            }
            let terms = r.f64_or("terms", 1000.0)?;
            if !(terms >= 1.0 && terms.fract() == 0.0) {
                return Err(invalid("terms", "expected an integer >= 1"));
            }
            MapKind::ManeTruncated { delta, terms: terms as usize }
        }
        "mobius" => {
            let r = ParamReader::new(params, &["a"])?;
            let a = r.f64_or("a", 0.5)?;
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid("a", format!("{a} is not in (0, 1)")));
            }
            MapKind::MobiusDisc { a }
        }
        "parabolic-mobius" => {
            ParamReader::new(params, &[])?;
            MapKind::ParabolicMobiusDisc
        }
        "blaschke" => {
            let r = ParamReader::new(params, &["zeros", "rotation"])?;
            let zeros = match params.get("zeros") {
                Some(ParamValue::List(items)) if !items.is_empty() => items
                    .iter()
                    .map(|v| v.as_complex().ok_or_else(|| invalid("zeros", "expected complex entries")))
                    .collect::<Result<Vec<_>, _>>()?,
                Some(_) => return Err(invalid("zeros", "expected a non-empty list")),
                None => return Err(invalid("zeros", "required")),
            };
            if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
                return Err(invalid("zeros", format!("{a} is not inside the unit disc")));
            }
            let rotation = r.complex_or("rotation", one)?;
            if (rotation.norm() - 1.0).abs() > 1e-12 {
                return Err(invalid("rotation", "must have unit modulus"));
            }
            MapKind::BlaschkeFinite { zeros, rotation: rotation / rotation.norm() }
        }
        "affine" => {
            let r = ParamReader::new(params, &["lambda"])?;
            let lambda = r.complex_or("lambda", Complex64::new(2.0, 0.0))?;
            if !(lambda.norm() > 0.0) || !lambda.re.is_finite() || !lambda.im.is_finite() {
                return Err(invalid("lambda", "must be finite and non-zero"));
            }
            MapKind::AffineModel { lambda }
        }
        "doubling" => {
            ParamReader::new(params, &[])?;
            MapKind::DoublingExp
        }
        other => return Err(MapError::UnknownMap(other.to_string())),
    };
    Ok(MapSpec::from_kind(name, kind))
}
