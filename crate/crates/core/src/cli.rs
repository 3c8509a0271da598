//! Batch experiment runner: JSON configuration, dispatch to the library
//! operations, structured reports and CSV plot data.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::classify::{
    aaronson_verdict, classify_plane, gauss_divergence, prop_d_verify, rippon_stallard_check, thm_c_fit, thresholds,
    SeriesSample, GAUSS_B, GAUSS_R, MIN_STEPS_THM_C,
};
use crate::harmonic::{dichotomy_experiment, wos_sample_with, DomainModel, EntryRegion, FateOptions, OracleDomain, TargetSet};
use crate::hyperbolic::{step_sequence, HalfPlane, MetricModel, StepSequence};
use crate::inner::{
    boundary_gaps, check_mu_invariance_with, find_denjoy_wolff, mu_p, mu_p_quadrature, recurrence_stats, CircleArc,
    Precision,
};
use crate::maps::{iterate, registry_get, IterateOptions, MapSpec, Params};
use crate::rng::sample_rng;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("compute error: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn compute_err(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Orbit,
    Steps,
    Classify,
    InnerCheck,
    MuInvariance,
    Sample,
    Dichotomy,
    VerifyPropd,
    SeriesTest,
}

/// Complex numbers in configs: a number, a string such as `"10+0i"`, or a
/// pair `[re, im]`. They are echoed as pairs.
mod cx {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Pair([f64; 2]),
        Text(String),
    }

    pub fn parse(s: &str) -> Option<Complex64> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        t.parse::<Complex64>().ok()
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Complex64::new(x, 0.0)),
            Repr::Pair([re, im]) => Ok(Complex64::new(re, im)),
            Repr::Text(s) => parse(&s).ok_or_else(|| serde::de::Error::custom(format!("cannot parse `{s}` as complex"))),
        }
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
            z.map(|z| [z.re, z.im]).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex64>, D::Error> {
            super::deserialize(d).map(Some)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Unit disc for inner maps, otherwise `{Re(z ā/|a|) > 0}` for the
    /// map's translation constant `a`.
    Auto,
    Disc,
    HalfPlane {
        #[serde(with = "cx")]
        direction: Complex64,
        offset: f64,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Auto
    }
}

impl ModelConfig {
    fn resolve(self, map: &MapSpec) -> Result<ModelConfig, CliError> {
        match self {
            ModelConfig::Auto if map.is_inner() => Ok(ModelConfig::Disc),
            ModelConfig::Auto => match map.baker_direction {
                Some(a) => Ok(ModelConfig::HalfPlane { direction: a / a.norm(), offset: 0.0 }),
                None => Err(config_err(format!("map `{}` has no Baker direction; give the model explicitly", map.name))),
            },
            ModelConfig::HalfPlane { direction, offset } => {
                HalfPlane::new(direction, offset).map_err(config_err)?;
                Ok(self)
            }
            ModelConfig::Disc => Ok(self),
        }
    }

    fn half_plane(self) -> Option<HalfPlane> {
        match self {
            ModelConfig::HalfPlane { direction, offset } => HalfPlane::new(direction, offset).ok(),
            _ => None,
        }
    }

    fn metric(self) -> MetricModel {
        match self.half_plane() {
            Some(h) => MetricModel::HalfPlane(h),
            None => MetricModel::Disc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Model {
        #[serde(default)]
        model: ModelConfig,
    },
    /// Walk-on-spheres against the membership oracle of the configured map.
    Oracle { entry: EntryRegion, budget: usize, big_radius: f64 },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Model { model: ModelConfig::Auto }
    }
}

impl DomainConfig {
    fn resolve(self, map: Option<&MapSpec>) -> Result<(DomainConfig, DomainModel), CliError> {
        match self {
            DomainConfig::Model { model } => {
                let model = match (model, map) {
                    (ModelConfig::Auto, Some(m)) => model.resolve(m)?,
                    (ModelConfig::Auto, None) => ModelConfig::Disc,
                    (m, _) => m,
                };
                let dm = match model.half_plane() {
                    Some(h) => DomainModel::HalfPlane(h),
                    None if model == ModelConfig::Disc => DomainModel::UnitDisc,
                    None => return Err(config_err("invalid half-plane model")),
                };
                Ok((DomainConfig::Model { model }, dm))
            }
            DomainConfig::Oracle { entry, budget, big_radius } => {
                let map = map.ok_or_else(|| config_err("oracle domains need a map"))?;
                if budget == 0 || !(big_radius > 0.0) {
                    return Err(config_err("oracle domain needs budget >= 1 and big_radius > 0"));
                }
                Ok((self, DomainModel::OracleDomain(OracleDomain { map: map.clone(), entry, budget, big_radius })))
            }
        }
    }
}

fn default_point(model: &DomainModel) -> Complex64 {
    match model {
        DomainModel::UnitDisc => Complex64::new(0.0, 0.0),
        DomainModel::HalfPlane(h) => h.direction * (h.offset + 1.0),
        DomainModel::OracleDomain(d) => match d.entry {
            EntryRegion::HalfPlane(h) => h.direction * (h.offset + 1.0),
            EntryRegion::HalfStrip { axis, center, .. } => axis.direction * Complex64::new(axis.offset + 1.0, center),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSettings {
    #[serde(with = "cx")]
    pub z0: Complex64,
    pub budget: usize,
    pub escape_radius: f64,
    pub escape_window: usize,
    pub pole_eps: Option<f64>,
    pub precision_threshold: f64,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            z0: Complex64::new(0.0, 0.0),
            budget: 1000,
            escape_radius: 1e12,
            escape_window: 3,
            pole_eps: None,
            precision_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepsSettings {
    #[serde(with = "cx")]
    pub z0: Complex64,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub metric: ModelConfig,
}

impl Default for StepsSettings {
    fn default() -> Self {
        Self { z0: Complex64::new(0.0, 0.0), n: 1000, metric: ModelConfig::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceConfig {
    /// Target arc `[start, end)` in radians.
    pub target: [f64; 2],
    pub n_samples: usize,
    pub budget: usize,
    pub min_returns: usize,
    #[serde(default = "double_precision")]
    pub precision: Precision,
}

fn double_precision() -> Precision {
    Precision::Double
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerCheckSettings {
    #[serde(with = "cx")]
    pub w0: Complex64,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub recurrence: Option<RecurrenceConfig>,
}

impl Default for InnerCheckSettings {
    fn default() -> Self {
        Self { w0: Complex64::new(0.0, 0.0), n: 10_000, recurrence: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuInvarianceSettings {
    /// Explicit arcs `[start, end)`.
    pub arcs: Vec<[f64; 2]>,
    /// Additional seeded arcs kept `margin` radians away from `p`.
    pub random_arcs: usize,
    pub margin: f64,
    pub quad_tol: f64,
}

impl Default for MuInvarianceSettings {
    fn default() -> Self {
        Self { arcs: Vec::new(), random_arcs: 20, margin: 0.1, quad_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSettings {
    pub domain: DomainConfig,
    #[serde(with = "cx::opt")]
    pub basepoint: Option<Complex64>,
    pub n_samples: usize,
    pub eps_boundary: f64,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self { domain: DomainConfig::default(), basepoint: None, n_samples: 1000, eps_boundary: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DichotomySettings {
    pub domain: DomainConfig,
    #[serde(with = "cx::opt")]
    pub basepoint: Option<Complex64>,
    pub n_samples: usize,
    pub iter_budget: usize,
    pub escape_radius: f64,
    pub escape_window: usize,
    pub target: TargetSet,
    pub min_returns: usize,
    pub eps_boundary: f64,
}

impl Default for DichotomySettings {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            basepoint: None,
            n_samples: 200,
            iter_budget: 100_000,
            escape_radius: 1e8,
            escape_window: 3,
            target: TargetSet::Interval { lo: -1.0, hi: 1.0 },
            min_returns: 10,
            eps_boundary: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropDSettings {
    pub c0: f64,
    pub c1: f64,
    pub r: f64,
    pub z_samples: usize,
    pub n_max: usize,
}

impl Default for PropDSettings {
    fn default() -> Self {
        Self { c0: 0.55, c1: 2.0, r: 2.0, z_samples: 2000, n_max: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesConfig {
    /// `a_n = c n^{-p}`.
    Power { p: f64, #[serde(default = "one")] c: f64 },
    /// `a_n = 1/(n ln n)`.
    NLogN,
    /// `a_n = 1/n + c n^{-p}`.
    Corrected { c: f64, p: f64 },
    Explicit { terms: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSettings {
    pub series: SeriesConfig,
    /// Index of the first term.
    pub start: usize,
    /// Number of terms for formula series.
    pub len: usize,
    pub gauss_r: f64,
    pub gauss_b: f64,
}

impl Default for SeriesSettings {
    fn default() -> Self {
        Self { series: SeriesConfig::Power { p: 1.0, c: 1.0 }, start: 1, len: 10_000, gauss_r: GAUSS_R, gauss_b: GAUSS_B }
    }
}

impl SeriesSettings {
    fn sample(&self) -> Result<SeriesSample, CliError> {
        let (start, len) = (self.start, self.len);
        let s = match &self.series {
            SeriesConfig::Power { p, c } => SeriesSample::from_fn(start.max(1), len, |n| c * n.powf(-p)),
            SeriesConfig::NLogN => SeriesSample::from_fn(start.max(2), len, |n| 1.0 / (n * n.ln())),
            SeriesConfig::Corrected { c, p } => SeriesSample::from_fn(start.max(1), len, |n| 1.0 / n + c * n.powf(-p)),
            SeriesConfig::Explicit { terms } => SeriesSample::new(terms.clone(), start),
        };
        if s.a.is_empty() {
            return Err(config_err("series has no terms"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Settings {
    Orbit(OrbitSettings),
    Steps(StepsSettings),
    InnerCheck(InnerCheckSettings),
    MuInvariance(MuInvarianceSettings),
    Sample(SampleSettings),
    Dichotomy(DichotomySettings),
    PropD(PropDSettings),
    Series(SeriesSettings),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub map: Option<MapConfig>,
    pub seed: u64,
    pub output: OutputPaths,
    pub settings: Settings,
    spec: Option<MapSpec>,
}

fn take<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str) -> Result<Option<T>, CliError> {
    obj.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| config_err(format!("`{key}`: {e}"))))
        .transpose()
}

fn settings<T: DeserializeOwned>(rest: Map<String, Value>) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(rest)).map_err(config_err)
}

impl ExperimentConfig {
    /// Parses and validates a JSON document. The keys `experiment`, `map`,
    /// `params`, `seed` and `output` are shared; all others belong to the
    /// experiment and unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(config_err)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let Value::Object(mut obj) = value else {
            return Err(config_err("config must be a JSON object"));
        };
        let experiment: Experiment = take(&mut obj, "experiment")?.ok_or_else(|| config_err("missing `experiment`"))?;
        let map = match obj.remove("map") {
            None => None,
            Some(Value::String(name)) => Some(MapConfig { name, params: Params::new() }),
            Some(v) => Some(serde_json::from_value::<MapConfig>(v).map_err(|e| config_err(format!("`map`: {e}")))?),
        };
        let extra: Option<Params> = take(&mut obj, "params")?;
        let map = match (map, extra) {
            (Some(mut m), Some(p)) => {
                m.params.extend(p);
                Some(m)
            }
            (None, Some(_)) => return Err(config_err("`params` given without `map`")),
            (m, None) => m,
        };
        let seed: u64 = take(&mut obj, "seed")?.unwrap_or(0);
        let output: OutputPaths = take(&mut obj, "output")?.unwrap_or_default();
        let spec = map
            .as_ref()
            .map(|m| registry_get(&m.name, &m.params).map_err(config_err))
            .transpose()?;
        let needs_map = !matches!(experiment, Experiment::SeriesTest | Experiment::Sample);
        if needs_map && spec.is_none() {
            return Err(config_err(format!("experiment `{}` needs a `map`", experiment.name())));
        }
        let settings = match experiment {
            Experiment::Orbit => Settings::Orbit(settings(obj)?),
            Experiment::Steps | Experiment::Classify => {
                let mut s: StepsSettings = settings(obj)?;
                s.metric = s.metric.resolve(spec.as_ref().expect("checked"))?;
                Settings::Steps(s)
            }
            Experiment::InnerCheck | Experiment::MuInvariance => {
                if !spec.as_ref().is_some_and(MapSpec::is_inner) {
                    return Err(config_err(format!("experiment `{}` needs an inner map", experiment.name())));
                }
                if experiment == Experiment::InnerCheck {
                    Settings::InnerCheck(settings(obj)?)
                } else {
                    Settings::MuInvariance(settings(obj)?)
                }
            }
            Experiment::Sample => {
                let mut s: SampleSettings = settings(obj)?;
                let (d, model) = s.domain.resolve(spec.as_ref())?;
                s.domain = d;
                s.basepoint = Some(s.basepoint.unwrap_or_else(|| default_point(&model)));
                Settings::Sample(s)
            }
            Experiment::Dichotomy => {
                let mut s: DichotomySettings = settings(obj)?;
                let (d, model) = s.domain.resolve(spec.as_ref())?;
                s.domain = d;
                s.basepoint = Some(s.basepoint.unwrap_or_else(|| default_point(&model)));
                Settings::Dichotomy(s)
            }
            Experiment::VerifyPropd => Settings::PropD(settings(obj)?),
            Experiment::SeriesTest => {
                let s: SeriesSettings = settings(obj)?;
                s.sample()?;
                Settings::Series(s)
            }
        };
        Ok(Self { experiment, map, seed, output, settings, spec })
    }

    /// The configuration with every default filled in.
    pub fn resolved(&self) -> Value {
        json!({
            "experiment": self.experiment,
            "map": self.map,
            "seed": self.seed,
            "output": self.output,
            "settings": self.settings,
        })
    }

    fn spec(&self) -> &MapSpec {
        self.spec.as_ref().expect("validated config has a map")
    }
}

impl Experiment {
    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub experiment: Experiment,
    pub config: Value,
    pub seed: u64,
    pub thresholds: Value,
    pub result: Value,
    /// The only field that varies between identical runs.
    pub timing: Timing,
}

impl RunReport {
    /// The report without its timing, for determinism comparisons.
    pub fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        if let Value::Object(o) = &mut v {
            o.remove("timing");
        }
        v
    }
}

/// A finished run: the report and optional CSV plot data.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub csv: Option<String>,
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn z0_csv(points: &[Complex64]) -> String {
    let mut s = String::from("# n: iteration index; re, im: coordinates of f^n(z0); modulus: |f^n(z0)|\nn,re,im,modulus\n");
    for (n, z) in points.iter().enumerate() {
        s.push_str(&format!("{n},{:e},{:e},{:e}\n", z.re, z.im, z.norm()));
    }
    s
}

/// Runs a validated configuration on the current rayon pool.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let (result, csv) = dispatch(cfg)?;
    let report = RunReport {
        version: VERSION.to_string(),
        experiment: cfg.experiment,
        config: cfg.resolved(),
        seed: cfg.seed,
        thresholds: thresholds(),
        result,
        timing: Timing { wall_seconds: start.elapsed().as_secs_f64() },
    };
    Ok(RunOutput { report, csv })
}

/// Runs on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput, CliError> {
    match threads {
        None => run(cfg),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(compute_err)?
            .install(|| run(cfg)),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<(Value, Option<String>), CliError> {
    match (&cfg.settings, cfg.experiment) {
        (Settings::Orbit(s), _) => {
            let mut opts = IterateOptions::new(s.budget, s.escape_radius)
                .escape_window(s.escape_window)
                .precision_threshold(s.precision_threshold);
            if let Some(e) = s.pole_eps {
                opts = opts.pole_eps(e);
            }
            let rec = iterate(cfg.spec(), s.z0, &opts).ok_or_else(|| config_err("need budget >= 1 and escape_radius > 0"))?;
            let csv = z0_csv(&rec.points);
            Ok((json!({ "orbit": rec, "rippon_stallard": rippon_stallard_check(&rec) }), Some(csv)))
        }
        (Settings::Steps(s), Experiment::Steps) => {
            let steps = step_sequence(cfg.spec(), s.z0, &s.metric.metric(), s.n).map_err(compute_err)?;
            let csv = steps.to_csv();
            Ok((json!({ "steps": summarize_steps(&steps) }), Some(csv)))
        }
        (Settings::Steps(s), _) => classify(cfg.spec(), s),
        (Settings::InnerCheck(s), _) => inner_check(cfg.spec(), s, cfg.seed),
        (Settings::MuInvariance(s), _) => mu_invariance(cfg.spec(), s, cfg.seed),
        (Settings::Sample(s), _) => sample(cfg.spec.as_ref(), s, cfg.seed),
        (Settings::Dichotomy(s), _) => {
            let (_, model) = s.domain.resolve(cfg.spec.as_ref())?;
            let opts = FateOptions {
                iter_budget: s.iter_budget,
                escape_radius: s.escape_radius,
                escape_window: s.escape_window,
                target_set: s.target,
                min_returns: s.min_returns,
            };
            let basepoint = s.basepoint.unwrap_or_else(|| default_point(&model));
            let rep = dichotomy_experiment(cfg.spec(), &model, basepoint, s.n_samples, &opts, s.eps_boundary, cfg.seed)
                .map_err(compute_err)?;
            let csv = rep.to_csv();
            let fractions = json!({
                "escaping": rep.fraction(crate::harmonic::Fate::Escaping),
                "recurrent": rep.fraction(crate::harmonic::Fate::Recurrent),
                "pole_hit": rep.fraction(crate::harmonic::Fate::PoleHit),
                "undefined": rep.fraction(crate::harmonic::Fate::Undefined),
            });
            Ok((json!({ "fate_report": rep, "fractions": fractions }), Some(csv)))
        }
        (Settings::PropD(s), _) => {
            let rep = prop_d_verify(cfg.spec(), s.c0, s.c1, s.r, s.z_samples, s.n_max, cfg.seed).map_err(compute_err)?;
            Ok((json!({ "prop_d": rep }), None))
        }
        (Settings::Series(s), _) => series_test(s),
    }
}

fn summarize_steps(steps: &StepSequence) -> Value {
    let last = steps.indexed().last();
    json!({
        "metric": steps.metric,
        "is_upper_bound": steps.is_upper_bound,
        "n_offset": steps.n_offset,
        "len": steps.len(),
        "last": last.map(|(n, d)| json!({ "n": n, "d_n": d, "n_d_n": n as f64 * d })),
        "d": steps.d,
    })
}

fn classify(map: &MapSpec, s: &StepsSettings) -> Result<(Value, Option<String>), CliError> {
    let metric = s.metric.metric();
    let class = classify_plane(map, s.z0, &metric, s.n).map_err(compute_err)?;
    let mut out = json!({ "classification": class });
    if !map.is_inner() {
        let steps = step_sequence(map, s.z0, &metric, s.n).map_err(compute_err)?;
        if steps.len() >= MIN_STEPS_THM_C {
            out["thm_c"] = to_value(thm_c_fit(&steps).map_err(compute_err)?);
        }
        if let Some(rec) = iterate(map, s.z0, &IterateOptions::new(s.n, f64::INFINITY)) {
            out["rippon_stallard"] = to_value(rippon_stallard_check(&rec));
        }
        return Ok((out, Some(steps.to_csv())));
    }
    Ok((out, None))
}

fn inner_check(map: &MapSpec, s: &InnerCheckSettings, seed: u64) -> Result<(Value, Option<String>), CliError> {
    let dw = find_denjoy_wolff(map, s.w0, s.n).map_err(compute_err)?;
    let b = map.blaschke().expect("inner map");
    let gaps = boundary_gaps(&b, s.w0, s.n);
    let sample = SeriesSample::new(gaps.clone(), 0);
    let mut out = json!({ "denjoy_wolff": dw, "gap_series": aaronson_verdict(&sample) });
    if let Some(r) = s.recurrence {
        let arc = CircleArc::new(r.target[0], r.target[1]).map_err(config_err)?;
        let st = recurrence_stats(map, &arc, r.n_samples, r.budget, r.min_returns, seed, r.precision)
            .map_err(compute_err)?;
        out["recurrence"] = to_value(st);
    }
    let mut csv = String::from("# n: iteration index; gap: 1-|g^n(w0)|\nn,gap\n");
    for (n, a) in gaps.iter().enumerate() {
        csv.push_str(&format!("{n},{a:e}\n"));
    }
    Ok((out, Some(csv)))
}

/// Random arc avoiding the `margin`-neighbourhood of the angle `theta_p`.
fn random_arc(rng: &mut impl Rng, theta_p: f64, margin: f64) -> Option<CircleArc> {
    let room = TAU - 2.0 * margin;
    if !(room > 0.0) {
        return None;
    }
    let mut u = [rng.gen_range(0.0..room), rng.gen_range(0.0..room)];
    u.sort_by(f64::total_cmp);
    if u[1] - u[0] < 1e-6 {
        u[1] = (u[0] + 1e-3).min(room);
    }
    CircleArc::new(theta_p + margin + u[0], theta_p + margin + u[1]).ok()
}

fn mu_invariance(map: &MapSpec, s: &MuInvarianceSettings, seed: u64) -> Result<(Value, Option<String>), CliError> {
    let dw = find_denjoy_wolff(map, Complex64::new(0.0, 0.0), crate::inner::DW_ITERATIONS).map_err(compute_err)?;
    let mut arcs = s
        .arcs
        .iter()
        .map(|[a, b]| CircleArc::new(*a, *b).map_err(config_err))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = sample_rng(seed, 0);
    for _ in 0..s.random_arcs {
        arcs.push(random_arc(&mut rng, dw.p.arg(), s.margin).ok_or_else(|| config_err("margin leaves no room"))?);
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut csv = String::from("# start, end: arc in radians; lhs: mu_p of the preimage; rhs: q mu_p(arc); rel_err: relative difference; quad_gap: closed form vs quadrature\nstart,end,lhs,rhs,rel_err,quad_gap\n");
    for arc in &arcs {
        let m = check_mu_invariance_with(map, &dw, arc).map_err(compute_err)?;
        let closed = mu_p(arc, dw.p);
        let quad = mu_p_quadrature(arc, dw.p, s.quad_tol);
        let quad_gap = if closed.infinite { 0.0 } else { (closed.value - quad.value).abs() / closed.value };
        worst = worst.max(m.rel_err);
        csv.push_str(&format!("{},{},{:e},{:e},{:e},{:e}\n", arc.start_angle, arc.end_angle, m.lhs, m.rhs, m.rel_err, quad_gap));
        rows.push(json!({ "arc": arc, "check": m, "quadrature": quad, "quad_gap": quad_gap }));
    }
    Ok((json!({ "p": dw.p, "q": dw.q, "arcs": rows, "max_rel_err": worst }), Some(csv)))
}

fn sample(map: Option<&MapSpec>, s: &SampleSettings, seed: u64) -> Result<(Value, Option<String>), CliError> {
    use rayon::prelude::*;
    let (_, model) = s.domain.resolve(map)?;
    let basepoint = s.basepoint.unwrap_or_else(|| default_point(&model));
    let samples = (0..s.n_samples as u64)
        .into_par_iter()
        .map(|i| wos_sample_with(&model, basepoint, s.eps_boundary, &mut sample_rng(seed, i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(compute_err)?;
    let mut csv = String::from("# sample_id: index of the seeded stream; re, im: boundary point; walk_steps: jumps of the walk\nsample_id,re,im,walk_steps\n");
    for (i, h) in samples.iter().enumerate() {
        csv.push_str(&format!("{i},{:e},{:e},{}\n", h.boundary_point.re, h.boundary_point.im, h.walk_steps));
    }
    let mean_steps = samples.iter().map(|h| h.walk_steps as f64).sum::<f64>() / samples.len().max(1) as f64;
    Ok((json!({ "n_samples": samples.len(), "mean_walk_steps": mean_steps, "samples": samples }), Some(csv)))
}

fn series_test(s: &SeriesSettings) -> Result<(Value, Option<String>), CliError> {
    let sample = s.sample()?;
    let gauss = gauss_divergence(&sample, s.gauss_r, s.gauss_b).map_err(compute_err)?;
    let mut out = json!({ "gauss": gauss, "aaronson": aaronson_verdict(&sample) });
    if sample.a.len() >= MIN_STEPS_THM_C {
        let steps = StepSequence {
            d: sample.a.clone(),
            n_offset: sample.n_offset,
            metric: MetricModel::Disc,
            is_upper_bound: false,
        };
        out["thm_c"] = to_value(thm_c_fit(&steps).map_err(compute_err)?);
    }
    Ok((out, None))
}

/// Writes the JSON report and CSV data. Explicit paths in the config win;
/// otherwise `report.json` and `data.csv` go to `out_dir` when given.
pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput, out_dir: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let place = |explicit: &Option<PathBuf>, default: &str| -> Option<PathBuf> {
        match (explicit, out_dir) {
            (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
            (Some(p), _) => Some(p.clone()),
            (None, Some(d)) => Some(d.join(default)),
            (None, None) => None,
        }
    };
    let mut written = Vec::new();
    let write = |path: &Path, body: &str| -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| compute_err(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, body).map_err(|e| compute_err(format!("{}: {e}", path.display())))
    };
    if let Some(p) = place(&cfg.output.json, "report.json") {
        let body = serde_json::to_string_pretty(&out.report).map_err(compute_err)?;
        write(&p, &body)?;
        written.push(p);
    }
    if let (Some(csv), Some(p)) = (&out.csv, place(&cfg.output.csv, "data.csv")) {
        write(&p, csv)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys_and_maps() {
        let e = ExperimentConfig::from_json(r#"{"experiment":"steps","map":"fatou","z0":"10","bogus":1}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::from_json(r#"{"experiment":"steps","map":"nope"}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::from_json(r#"{"experiment":"inner-check","map":"fatou"}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(ExperimentConfig::from_json("[1]").is_err());
    }

    #[test]
    fn defaults_are_resolved_in_echo() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"steps","map":"fatou","z0":"10+0i","N":50}"#).unwrap();
        let echo = c.resolved();
        assert_eq!(echo["settings"]["metric"]["kind"], "half_plane");
        assert_eq!(echo["settings"]["z0"], json!([10.0, 0.0]));
        assert_eq!(echo["seed"], 0);
    }

    #[test]
    fn map_params_in_either_place() {
        let a = ExperimentConfig::from_json(r#"{"experiment":"inner-check","map":{"name":"mobius","params":{"a":0.25}},"N":100}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"experiment":"inner-check","map":"mobius","params":{"a":0.25},"N":100}"#).unwrap();
        assert_eq!(a.resolved(), b.resolved());
    }

    #[test]
    fn steps_report_round_trips() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"steps","map":"fatou","z0":"10+0i","N":200}"#).unwrap();
        let out = run(&c).unwrap();
        let text = serde_json::to_string(&out.report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, out.report);
        let csv = out.csv.unwrap();
        assert!(csv.starts_with('#'));
        assert!(csv.lines().nth(1).unwrap().starts_with("n,d_n,n*d_n"));
    }

    #[test]
    fn compute_errors_exit_three() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"steps","map":"fatou","z0":"-10","N":20}"#).unwrap();
        assert_eq!(run(&c).unwrap_err().exit_code(), 3);
    }
}
