//! Run configuration: TOML in, fully resolved [`RunConfig`] out.
//!
//! Every default is filled in at parse time and the resolved form can be
//! written back with [`RunConfig::to_toml`]; re-parsing it yields the same
//! `RunConfig`.

use std::f64::consts::PI;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::params::{map_atomic, map_optical, AtomicBeamSpec, Epsilon, OpticalBeamSpec, ParaxialParams, C_SI, HBAR_SI};
use crate::profile::Profile;
use crate::solver::field::{make_gaussian, GaussianBeam, TransverseField};
use crate::solver::{default_du, GridSpec};

pub const DEFAULT_N: usize = 256;
pub const DEFAULT_EXTENT_SIGMAS: f64 = 16.0;
pub const DEFAULT_RECORD_STRIDE: usize = 10;
pub const DEFAULT_TOLERANCE_W2: f64 = 1e-2;
pub const DEFAULT_TOLERANCE_MI4: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    fn at(section: &str, e: impl std::fmt::Display) -> Self {
        ConfigError(format!("[{section}] {e}"))
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub enum BeamSource {
    Gaussian(GaussianBeam),
    /// Field in the snapshot binary layout.
    FieldFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Medium {
    Optical(OpticalBeamSpec),
    Atomic(AtomicBeamSpec),
    Generic(ParaxialParams),
}

impl Medium {
    pub fn params(&self) -> crate::Result<ParaxialParams> {
        match self {
            Medium::Optical(s) => map_optical(s),
            Medium::Atomic(s) => map_atomic(s),
            Medium::Generic(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub u_start: f64,
    pub u_span: f64,
    pub snapshots: Vec<f64>,
    pub tolerance_w2: f64,
    pub tolerance_mi4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted key into the configuration, e.g. `generic.gamma`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TofSection {
    /// `(τ, w²)` pairs; must include `τ = 0`.
    pub samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beam: BeamSource,
    pub medium: Medium,
    pub grid: GridSpec,
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    pub tof: Option<TofSection>,
}

/// Profiles may be written as a bare number (constant) or a table with `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileInput {
    Number(f64),
    Full(Profile),
}

impl From<ProfileInput> for Profile {
    fn from(p: ProfileInput) -> Profile {
        match p {
            ProfileInput::Number(v) => Profile::constant(v),
            ProfileInput::Full(p) => p,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeam {
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    centroid: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tilt: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvature_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    field_file: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptical {
    epsilon_r0: f64,
    omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<ProfileInput>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtomic {
    mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hbar: Option<f64>,
    n1d: f64,
    a_s: f64,
    omega_perp: ProfileInput,
    #[serde(skip_serializing_if = "Option::is_none")]
    flux: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeneric {
    k: f64,
    epsilon: i64,
    gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<ProfileInput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    du: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_stride: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    u_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_span: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshots: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance_w2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance_mi4: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    beam: RawBeam,
    #[serde(skip_serializing_if = "Option::is_none")]
    optical: Option<RawOptical>,
    #[serde(skip_serializing_if = "Option::is_none")]
    atomic: Option<RawAtomic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generic: Option<RawGeneric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<RawRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tof: Option<TofSection>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("beam", &["sigma", "centroid", "tilt", "curvature_radius", "field_file"]),
    ("optical", &["epsilon_r0", "omega", "c", "chi3", "beta"]),
    (
        "atomic",
        &["mass", "hbar", "n1d", "a_s", "omega_perp", "flux", "energy"],
    ),
    ("generic", &["k", "epsilon", "gamma", "alpha"]),
    ("grid", &["n", "extent", "du", "record_stride"]),
    (
        "run",
        &["u_start", "u_span", "snapshots", "tolerance_w2", "tolerance_mi4"],
    ),
    ("sweep", &["parameter", "values"]),
    ("tof", &["samples"]),
];

const PROFILE_KEYS: &[(&str, &str)] = &[("optical", "beta"), ("atomic", "omega_perp"), ("generic", "alpha")];

fn profile_fields(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "constant" => &["value"],
        "linear" => &["start", "slope"],
        "sinusoidal" => &["offset", "amplitude", "angular_frequency", "phase"],
        "sinusoidal_squared" => &["mean_sq", "depth", "angular_frequency", "phase"],
        "quadratic" => &["offset", "center", "curvature"],
        "piecewise_constant" => &["breaks", "values"],
        "tabulated" => &["u", "values"],
        _ => return None,
    })
}

/// Every key of `table` that the schema does not know, as dotted paths.
fn unknown_keys(table: &Table) -> Vec<String> {
    let mut out = Vec::new();
    for (name, value) in table {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            out.push(name.clone());
            continue;
        };
        let Value::Table(section) = value else { continue };
        for (key, v) in section {
            if !keys.contains(&key.as_str()) {
                out.push(format!("{name}.{key}"));
                continue;
            }
            let is_profile = PROFILE_KEYS.iter().any(|(s, k)| s == name && k == key);
            if let (true, Value::Table(p)) = (is_profile, v) {
                let allowed = p.get("kind").and_then(Value::as_str).and_then(profile_fields);
                for field in p.keys().filter(|f| *f != "kind") {
                    if allowed.is_some_and(|a| !a.contains(&field.as_str())) {
                        out.push(format!("{name}.{key}.{field}"));
                    }
                }
            }
        }
    }
    out
}

pub fn load_table(path: &Path) -> CResult<Table> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// Reads, validates and resolves a configuration file. Relative field-file
/// paths are taken relative to the file's directory.
pub fn parse_config(path: &Path) -> CResult<RunConfig> {
    let table = load_table(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_table(table, base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> CResult<RunConfig> {
    let table = text.parse::<Table>().map_err(|e| ConfigError(e.to_string()))?;
    resolve_table(table, base_dir)
}

pub fn resolve_table(table: Table, base_dir: &Path) -> CResult<RunConfig> {
    let unknown = unknown_keys(&table);
    if !unknown.is_empty() {
        return Err(ConfigError(format!("unknown keys: {}", unknown.join(", "))));
    }
    let raw: RawConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(e.to_string()))?;
    resolve(raw, base_dir)
}

fn resolve(raw: RawConfig, base_dir: &Path) -> CResult<RunConfig> {
    let present: Vec<&str> = [
        raw.optical.as_ref().map(|_| "optical"),
        raw.atomic.as_ref().map(|_| "atomic"),
        raw.generic.as_ref().map(|_| "generic"),
    ]
    .into_iter()
    .flatten()
    .collect();
    if present.len() != 1 {
        return Err(ConfigError(format!(
            "exactly one of [optical], [atomic], [generic] is required, found {}",
            if present.is_empty() {
                "none".to_string()
            } else {
                present.join(", ")
            }
        )));
    }

    let medium = if let Some(o) = raw.optical {
        Medium::Optical(OpticalBeamSpec {
            epsilon_r0: o.epsilon_r0,
            omega: o.omega,
            c: o.c.unwrap_or(C_SI),
            chi3: o.chi3.unwrap_or(0.0),
            beta: o.beta.map(Profile::from).unwrap_or_default(),
        })
    } else if let Some(a) = raw.atomic {
        Medium::Atomic(AtomicBeamSpec {
            mass: a.mass,
            hbar: a.hbar.unwrap_or(HBAR_SI),
            n1d: a.n1d,
            a_s: a.a_s,
            omega_perp: a.omega_perp.into(),
            flux: a.flux,
            energy: a.energy,
        })
    } else {
        let g = raw.generic.expect("one medium present");
        let epsilon = Epsilon::try_from(g.epsilon).map_err(|e| ConfigError::at("generic", e))?;
        let alpha = g.alpha.map(Profile::from).unwrap_or_default();
        Medium::Generic(ParaxialParams::new(g.k, epsilon, g.gamma, alpha).map_err(|e| ConfigError::at("generic", e))?)
    };
    let section = present[0];
    let params = medium.params().map_err(|e| ConfigError::at(section, e))?;

    let beam = match (raw.beam.sigma, raw.beam.field_file) {
        (Some(_), Some(_)) => return Err(ConfigError::at("beam", "sigma and field_file are mutually exclusive")),
        (None, None) => return Err(ConfigError::at("beam", "one of sigma or field_file is required")),
        (Some(sigma), None) => BeamSource::Gaussian(GaussianBeam {
            sigma,
            centroid: raw.beam.centroid.unwrap_or([0.0, 0.0]),
            tilt: raw.beam.tilt.unwrap_or([0.0, 0.0]),
            curvature_radius: raw.beam.curvature_radius,
        }),
        (None, Some(path)) => {
            if raw.beam.centroid.is_some() || raw.beam.tilt.is_some() || raw.beam.curvature_radius.is_some() {
                return Err(ConfigError::at(
                    "beam",
                    "centroid, tilt and curvature_radius apply only to sigma beams",
                ));
            }
            let path = if path.is_absolute() { path } else { base_dir.join(path) };
            if !path.is_file() {
                return Err(ConfigError::at(
                    "beam",
                    format!("field_file {} does not exist", path.display()),
                ));
            }
            BeamSource::FieldFile(path)
        }
    };

    let rg = raw.grid.unwrap_or_default();
    let rr = raw.run.unwrap_or_default();
    let u_start = rr.u_start.unwrap_or(0.0);

    // The field is needed to default the extent (from σ), the span and du.
    let (field, n, extent) = match &beam {
        BeamSource::Gaussian(b) => {
            let n = rg.n.unwrap_or(DEFAULT_N);
            let extent = rg.extent.unwrap_or(DEFAULT_EXTENT_SIGMAS * b.sigma);
            let probe = GridSpec {
                n,
                extent,
                du: 1.0,
                record_stride: 1,
            };
            let f = make_gaussian(b, &probe, params.k).map_err(|e| ConfigError::at("grid", e))?;
            (f, n, extent)
        }
        BeamSource::FieldFile(path) => {
            let f = read_field(path).map_err(|e| ConfigError::at("beam", e))?;
            if rg.n.is_some_and(|n| n != f.n()) || rg.extent.is_some_and(|l| l != f.extent()) {
                return Err(ConfigError::at("grid", "n and extent must match the field file"));
            }
            let (n, l) = (f.n(), f.extent());
            (f, n, l)
        }
    };

    let u_span = match rr.u_span {
        Some(s) => s,
        None => {
            let a0 = params.alpha.value(u_start);
            if a0 > 0.0 {
                2.0 * PI / a0
            } else {
                let sigma2 = match &beam {
                    BeamSource::Gaussian(b) => b.sigma * b.sigma,
                    BeamSource::FieldFile(_) => {
                        crate::moments::compute_moments(&field, &params, u_start)
                            .map_err(|e| ConfigError::at("beam", e))?
                            .w2
                    }
                };
                3.0 * params.k * sigma2
            }
        }
    };
    if !(u_span.is_finite() && u_span >= 0.0) {
        return Err(ConfigError::at("run", format!("u_span must be >= 0, got {u_span}")));
    }
    params
        .validate_span(u_start, u_start + u_span)
        .map_err(|e| ConfigError::at(section, e))?;

    let du = match rg.du {
        Some(du) => du,
        None => {
            let du =
                default_du(&field, &params, (u_start, u_start + u_span)).map_err(|e| ConfigError::at("grid", e))?;
            du.min(u_span.max(f64::MIN_POSITIVE))
        }
    };
    let grid = GridSpec {
        n,
        extent,
        du,
        record_stride: rg.record_stride.unwrap_or(DEFAULT_RECORD_STRIDE),
    };
    grid.validate().map_err(|e| ConfigError::at("grid", e))?;

    let run = RunSection {
        u_start,
        u_span,
        snapshots: rr.snapshots.unwrap_or_default(),
        tolerance_w2: rr.tolerance_w2.unwrap_or(DEFAULT_TOLERANCE_W2),
        tolerance_mi4: rr.tolerance_mi4.unwrap_or(DEFAULT_TOLERANCE_MI4),
    };
    if let Some(s) = run
        .snapshots
        .iter()
        .find(|s| !(**s >= u_start && **s <= u_start + u_span))
    {
        return Err(ConfigError::at("run", format!("snapshot u = {s} outside the span")));
    }
    if !(run.tolerance_w2 > 0.0 && run.tolerance_mi4 > 0.0) {
        return Err(ConfigError::at("run", "tolerances must be positive"));
    }
    if let Some(s) = &raw.sweep {
        if s.values.is_empty() {
            return Err(ConfigError::at("sweep", "values must not be empty"));
        }
        if !s.parameter.contains('.') {
            return Err(ConfigError::at(
                "sweep",
                "parameter must be a dotted key such as generic.gamma",
            ));
        }
    }

    Ok(RunConfig {
        beam,
        medium,
        grid,
        run,
        sweep: raw.sweep,
        tof: raw.tof,
    })
}

pub fn read_field(path: &Path) -> crate::Result<TransverseField> {
    let (f, _) = TransverseField::read_binary(std::io::BufReader::new(File::open(path)?))?;
    f.check_normalized()?;
    Ok(f)
}

impl RunConfig {
    pub fn params(&self) -> crate::Result<ParaxialParams> {
        self.medium.params()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.run.u_start, self.run.u_start + self.run.u_span)
    }

    /// The resolved configuration as TOML; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        let prof = |p: &Profile| Some(ProfileInput::Full(p.clone()));
        let beam = match &self.beam {
            BeamSource::Gaussian(b) => RawBeam {
                sigma: Some(b.sigma),
                centroid: Some(b.centroid),
                tilt: Some(b.tilt),
                curvature_radius: b.curvature_radius,
                field_file: None,
            },
            BeamSource::FieldFile(p) => RawBeam {
                field_file: Some(p.clone()),
                ..RawBeam::default()
            },
        };
        let (mut optical, mut atomic, mut generic) = (None, None, None);
        match &self.medium {
            Medium::Optical(o) => {
                optical = Some(RawOptical {
                    epsilon_r0: o.epsilon_r0,
                    omega: o.omega,
                    c: Some(o.c),
                    chi3: Some(o.chi3),
                    beta: prof(&o.beta),
                })
            }
            Medium::Atomic(a) => {
                atomic = Some(RawAtomic {
                    mass: a.mass,
                    hbar: Some(a.hbar),
                    n1d: a.n1d,
                    a_s: a.a_s,
                    omega_perp: ProfileInput::Full(a.omega_perp.clone()),
                    flux: a.flux,
                    energy: a.energy,
                })
            }
            Medium::Generic(p) => {
                generic = Some(RawGeneric {
                    k: p.k,
                    epsilon: p.epsilon.into(),
                    gamma: p.gamma,
                    alpha: prof(&p.alpha),
                })
            }
        }
        let raw = RawConfig {
            beam,
            optical,
            atomic,
            generic,
            grid: Some(RawGrid {
                n: Some(self.grid.n),
                extent: Some(self.grid.extent),
                du: Some(self.grid.du),
                record_stride: Some(self.grid.record_stride),
            }),
            run: Some(RawRun {
                u_start: Some(self.run.u_start),
                u_span: Some(self.run.u_span),
                snapshots: Some(self.run.snapshots.clone()),
                tolerance_w2: Some(self.run.tolerance_w2),
                tolerance_mi4: Some(self.run.tolerance_mi4),
            }),
            sweep: self.sweep.clone(),
            tof: self.tof.clone(),
        };
        toml::to_string(&raw).expect("configuration serializes")
    }
}

/// Sets a dotted key (`section.key`) in a raw configuration table.
pub fn set_dotted(table: &mut Table, key: &str, value: f64) -> CResult<()> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| ConfigError::at("sweep", format!("parameter {key} is not a dotted key")))?;
    let known = SECTIONS
        .iter()
        .find(|(s, _)| *s == section)
        .is_some_and(|(_, keys)| keys.contains(&field));
    if !known {
        return Err(ConfigError::at("sweep", format!("unknown parameter {key}")));
    }
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(t) = entry else {
        return Err(ConfigError::at("sweep", format!("{section} is not a section")));
    };
    let v = match (field, section) {
        ("n" | "record_stride", "grid") | ("epsilon", "generic") => Value::Integer(value as i64),
        _ => Value::Float(value),
    };
    t.insert(field.to_string(), v);
    Ok(())
}
