//! Run configuration: a single TOML file describing the physical problem,
//! the discretization, solver options and outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohesive::{CohesiveLaw, LoadingProfile, ScalarFn};
use crate::discretization::{Mesh, SystemState};
use crate::error::{ConfigIssue, Error, Result};
use crate::evolution::{InitialFields, LoadProfile, LoadProgram, Problem, TimePartition};
use crate::materials::{DamageDissipation, ElasticModulus, LayerMaterial, Materials};
use crate::solver::{minimize_alpha, IncrementData, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub layer1: LayerConfig,
    pub layer2: LayerConfig,
    pub law: LawConfig,
    pub load: LoadProfile,
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub length: f64,
    pub n_elems: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub modulus: ModulusConfig,
    pub dissipation: DissipationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulusConfig {
    Power { a: f64, b: f64 },
    Constant { value: f64 },
    Polynomial { coef: Vec<f64> },
}

/// `w(y) = linear * y + quadratic * y^2 / 2`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationConfig {
    pub linear: f64,
    #[serde(default)]
    pub quadratic: f64,
}

/// Exactly one of the blocks must be present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parabolic: Option<ProfileParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponential: Option<ProfileParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separable: Option<SeparableParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileParams {
    pub c: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableParams {
    pub phi1: ScalarFn,
    pub phi2: ScalarFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub final_time: f64,
    pub n_steps: usize,
    /// Explicit partition; overrides `n_steps` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

/// Nodal profile on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant {
        value: f64,
    },
    /// Linear from `left` at `x = 0` to `right` at `x = L`.
    Affine {
        left: f64,
        right: f64,
    },
    /// Piecewise linear through `(x, values)`, constant outside.
    Tabulated {
        x: Vec<f64>,
        values: Vec<f64>,
    },
    /// `amplitude cos^2(pi (x - center) / width)` on `|x - center| < width / 2`, zero elsewhere.
    Bump {
        center: f64,
        width: f64,
        amplitude: f64,
    },
}

impl FieldConfig {
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Self::Constant { value } if !value.is_finite() => {
                out.push("value must be finite".into())
            }
            Self::Affine { left, right } if !left.is_finite() || !right.is_finite() => {
                out.push("end values must be finite".into())
            }
            Self::Tabulated { x, values } => {
                if x.is_empty() || x.len() != values.len() {
                    out.push(format!(
                        "x and values need equal nonzero length (got {} and {})",
                        x.len(),
                        values.len()
                    ));
                } else if x.windows(2).any(|w| !(w[1] > w[0])) {
                    out.push("x must increase strictly".into());
                }
                if x.iter().chain(values).any(|v| !v.is_finite()) {
                    out.push("samples must be finite".into());
                }
            }
            Self::Bump {
                center,
                width,
                amplitude,
            } if !(*width > 0.0) || !center.is_finite() || !amplitude.is_finite() => {
                out.push("bump needs finite center and amplitude and positive width".into());
            }
            _ => {}
        }
        out
    }

    /// Value at `x` in `[0, length]`.
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Affine { left, right } => left + (right - left) * x / length,
            Self::Tabulated { x: xs, values } => {
                if x <= xs[0] {
                    return values[0];
                }
                for k in 1..xs.len() {
                    if x <= xs[k] {
                        let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                        return values[k - 1] + s * (values[k] - values[k - 1]);
                    }
                }
                values[values.len() - 1]
            }
            Self::Bump {
                center,
                width,
                amplitude,
            } => {
                let r = (x - center) / width;
                if r.abs() < 0.5 {
                    amplitude * (std::f64::consts::PI * r).cos().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    /// Range of the profile over `[0, L]`, used for bound checks.
    fn range(&self) -> (f64, f64) {
        match self {
            Self::Constant { value } => (*value, *value),
            Self::Affine { left, right } => (left.min(*right), left.max(*right)),
            Self::Tabulated { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(*v), b.max(*v))
                }),
            Self::Bump { amplitude, .. } => (amplitude.min(0.0), amplitude.max(0.0)),
        }
    }

    fn nodal(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.nodes()
            .iter()
            .map(|&x| self.eval(x, mesh.length))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Displacement of both layers; defaults to the affine field matching the load at `t = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<FieldConfig>,
    /// Damage of both layers; defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u1: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u2: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<FieldConfig>,
    /// Replace the damage by the minimizer of the damage energy above it (with `u` frozen).
    #[serde(default)]
    pub relax_damage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Steps with a snapshot; empty means first and last.
    pub snapshots: Vec<usize>,
    /// 0 quiet, 1 summary, 2 per step.
    pub verbosity: u8,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshots: Vec::new(),
            verbosity: 1,
        }
    }
}

/// One-parameter sweep: `parameter` is a dotted path into this file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parses and validates; every semantic problem is reported, not just the first.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let config = deserialize(text)?;
    config.validate()?;
    Ok(config)
}

fn deserialize(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| Error::Config(vec![ConfigIssue::new("", e.message())]))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        Error::Config(vec![ConfigIssue::new(path, e.into_inner().message())])
    })
}

pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("configuration serializes")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let g = &self.geometry;
        if !(g.length > 0.0 && g.length.is_finite()) {
            out.push(ConfigIssue::new(
                "geometry.length",
                "must be positive and finite",
            ));
        }
        if g.n_elems < 2 {
            out.push(ConfigIssue::new(
                "geometry.n_elems",
                "need at least 2 elements",
            ));
        }
        for (name, layer) in [("layer1", &self.layer1), ("layer2", &self.layer2)] {
            if let Err(e) = layer.modulus.build() {
                out.push(ConfigIssue::new(format!("{name}.modulus"), e.to_string()));
            }
            if let Err(e) = layer.dissipation.build() {
                out.push(ConfigIssue::new(
                    format!("{name}.dissipation"),
                    e.to_string(),
                ));
            }
        }
        match self.law.present().as_slice() {
            [] => out.push(ConfigIssue::new(
                "law",
                "one of parabolic, exponential or separable is required",
            )),
            [_] => {
                if let Err(e) = self.law.build() {
                    out.push(ConfigIssue::new(
                        format!("law.{}", self.law.present()[0]),
                        e.to_string(),
                    ));
                }
            }
            many => out.push(ConfigIssue::new(
                "law",
                format!("ambiguous: blocks {} are all present", many.join(", ")),
            )),
        }
        let load = LoadProgram::new(self.load.clone(), self.time.final_time);
        if let Err(e) = &load {
            out.push(ConfigIssue::new("load", e.to_string()));
        }
        if !(self.time.final_time > 0.0 && self.time.final_time.is_finite()) {
            out.push(ConfigIssue::new(
                "time.final_time",
                "must be positive and finite",
            ));
        } else if let Err(e) = self.partition() {
            let path = if self.time.times.is_some() {
                "time.times"
            } else {
                "time.n_steps"
            };
            out.push(ConfigIssue::new(path, e.to_string()));
        }
        for (field, message) in self.solver.problems() {
            out.push(ConfigIssue::new(format!("solver.{field}"), message));
        }
        let init = &self.initial;
        for (name, field) in [("u", &init.u), ("u1", &init.u1), ("u2", &init.u2)] {
            if let Some(f) = field {
                for p in f.problems() {
                    out.push(ConfigIssue::new(format!("initial.{name}"), p));
                }
            }
        }
        for (name, field) in [
            ("alpha", &init.alpha),
            ("alpha1", &init.alpha1),
            ("alpha2", &init.alpha2),
        ] {
            if let Some(f) = field {
                let problems = f.problems();
                let clean = problems.is_empty();
                for p in problems {
                    out.push(ConfigIssue::new(format!("initial.{name}"), p));
                }
                if clean {
                    let (lo, hi) = f.range();
                    if lo < 0.0 || hi > 1.0 {
                        out.push(ConfigIssue::new(
                            format!("initial.{name}"),
                            format!("damage must lie in [0, 1], got range [{lo}, {hi}]"),
                        ));
                    }
                }
            }
        }
        if out.is_empty() {
            if let Ok(load) = &load {
                let u0 = load.u_bar(0.0);
                for (name, field) in [("u", &init.u), ("u1", &init.u1), ("u2", &init.u2)] {
                    if let Some(f) = field {
                        let (left, right) = (f.eval(0.0, g.length), f.eval(g.length, g.length));
                        if left != 0.0 || (right - u0).abs() > 1e-12 * (1.0 + u0.abs()) {
                            out.push(ConfigIssue::new(
                                format!("initial.{name}"),
                                format!("boundary values ({left}, {right}) must be (0, {u0}) to match the load"),
                            ));
                        }
                    }
                }
            }
        }
        let n_steps = self.partition().map(|p| p.n_steps()).unwrap_or(usize::MAX);
        if let Some(k) = self.output.snapshots.iter().find(|k| **k > n_steps) {
            out.push(ConfigIssue::new(
                "output.snapshots",
                format!("step {k} exceeds the {n_steps} steps of the run"),
            ));
        }
        if self.output.verbosity > 2 {
            out.push(ConfigIssue::new("output.verbosity", "must be 0, 1 or 2"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                out.push(ConfigIssue::new("sweep.values", "need at least one value"));
            }
            if self.with_parameter(&sweep.parameter, 0.0).is_err() {
                out.push(ConfigIssue::new(
                    "sweep.parameter",
                    format!("no numeric entry at {}", sweep.parameter),
                ));
            }
        }
        out
    }

    pub fn partition(&self) -> Result<TimePartition> {
        match &self.time.times {
            Some(times) => TimePartition::from_times(times.clone(), self.time.final_time),
            None => TimePartition::uniform(self.time.n_steps, self.time.final_time),
        }
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::new(self.geometry.length, self.geometry.n_elems)
    }

    pub fn materials(&self) -> Result<Materials> {
        let layer = |c: &LayerConfig| -> Result<LayerMaterial> {
            Ok(LayerMaterial {
                modulus: c.modulus.build()?,
                dissipation: c.dissipation.build()?,
            })
        };
        Ok([layer(&self.layer1)?, layer(&self.layer2)?])
    }

    /// Steps written as snapshots.
    pub fn snapshot_steps(&self, n_steps: usize) -> Vec<usize> {
        let mut steps = if self.output.snapshots.is_empty() {
            vec![0, n_steps]
        } else {
            self.output.snapshots.clone()
        };
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    /// Validated problem ready for `run_evolution`.
    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let mesh = self.mesh()?;
        let materials = self.materials()?;
        let law = self.law.build()?;
        let load = LoadProgram::new(self.load.clone(), self.time.final_time)?;
        let init = &self.initial;
        let u0 = load.u_bar(0.0);
        let default_u = FieldConfig::Affine {
            left: 0.0,
            right: u0,
        };
        let zero = FieldConfig::Constant { value: 0.0 };
        let pick =
            |own: &Option<FieldConfig>, shared: &Option<FieldConfig>, fallback: &FieldConfig| {
                own.as_ref()
                    .or(shared.as_ref())
                    .unwrap_or(fallback)
                    .nodal(&mesh)
            };
        let mut initial = InitialFields {
            u1: pick(&init.u1, &init.u, &default_u),
            u2: pick(&init.u2, &init.u, &default_u),
            alpha1: pick(&init.alpha1, &init.alpha, &zero),
            alpha2: pick(&init.alpha2, &init.alpha, &zero),
        };
        if init.relax_damage {
            relax_damage(&mesh, &law, &materials, &self.solver, &mut initial);
        }
        Ok(Problem {
            mesh,
            materials,
            law,
            load,
            partition: self.partition()?,
            solver: self.solver.clone(),
            initial,
            seed: self.seed,
        })
    }

    /// Copy with the numeric entry at dotted `path` replaced by `value`.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<RunConfig> {
        let fail = |msg: &str| Error::Config(vec![ConfigIssue::new(path, msg)]);
        let mut root = toml::Value::try_from(self).map_err(|e| fail(&e.to_string()))?;
        let mut node = &mut root;
        for key in path.split('.') {
            node = match node {
                toml::Value::Table(t) => t.get_mut(key).ok_or_else(|| fail("no such key"))?,
                toml::Value::Array(a) => {
                    let i: usize = key.parse().map_err(|_| fail("array index expected"))?;
                    a.get_mut(i).ok_or_else(|| fail("index out of range"))?
                }
                _ => return Err(fail("path runs through a scalar")),
            };
        }
        *node = match node {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => {
                toml::Value::Integer(value as i64)
            }
            _ => return Err(fail("entry is not numeric")),
        };
        let text = toml::to_string(&root).map_err(|e| fail(&e.to_string()))?;
        deserialize(&text)
    }
}

/// Minimizes the damage energy over `alpha >= alpha0` with the initial displacements frozen.
fn relax_damage(
    mesh: &Mesh,
    law: &CohesiveLaw,
    materials: &Materials,
    opts: &SolverOptions,
    init: &mut InitialFields,
) {
    let mut state = SystemState::zeros(mesh.n_nodes());
    state.u1 = init.u1.clone();
    state.u2 = init.u2.clone();
    state.alpha1 = init.alpha1.clone();
    state.alpha2 = init.alpha2.clone();
    let slip = state.slip();
    let data = IncrementData {
        mesh,
        law,
        materials,
        floor: &slip,
        lower: [&init.alpha1, &init.alpha2],
    };
    minimize_alpha(&data, &mut state, opts);
    init.alpha1 = state.alpha1;
    init.alpha2 = state.alpha2;
}

impl ModulusConfig {
    pub fn build(&self) -> Result<ElasticModulus> {
        match self {
            Self::Power { a, b } => ElasticModulus::power(*a, *b),
            Self::Constant { value } => ElasticModulus::constant(*value),
            Self::Polynomial { coef } => ElasticModulus::polynomial(coef.clone()),
        }
    }
}

impl DissipationConfig {
    pub fn build(&self) -> Result<DamageDissipation> {
        DamageDissipation::new(self.linear, self.quadratic)
    }
}

impl LawConfig {
    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.parabolic.is_some() {
            v.push("parabolic");
        }
        if self.exponential.is_some() {
            v.push("exponential");
        }
        if self.separable.is_some() {
            v.push("separable");
        }
        v
    }

    pub fn build(&self) -> Result<CohesiveLaw> {
        match (&self.parabolic, &self.exponential, &self.separable) {
            (Some(p), None, None) => {
                CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(p.c, p.k)?)
            }
            (None, Some(p), None) => {
                CohesiveLaw::quadratic_unloading(LoadingProfile::exponential(p.c, p.k)?)
            }
            (None, None, Some(s)) => CohesiveLaw::separable(s.phi1.clone(), s.phi2.clone()),
            _ => Err(Error::Config(vec![ConfigIssue::new(
                "law",
                "exactly one law block is required",
            )])),
        }
    }
}
