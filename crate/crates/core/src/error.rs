use thiserror::Error;

/// Errors raised by the analytic and numerical routines of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("classical turning point at z = {z:e}: E - U = {gap:e} <= 0")]
    TurningPoint { z: f64, gap: f64 },

    #[error("WKB approximation invalid at z = {z:e}: validity margin {margin:e} <= 1")]
    WkbInvalid { z: f64, margin: f64 },

    #[error("gravitational sag undefined for omega_perp = 0; use the linear-potential (centered) moments instead")]
    ZeroTrapFrequency,

    #[error("field not normalized: norm = {norm}")]
    Normalization { norm: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate beam: {0}")]
    DegenerateBeam(String),

    #[error("self-trapping threshold requires attractive interactions (a_s < 0), got a_s = {0:e}")]
    NotAttractive(f64),

    #[error("collapse regime: M_I^4 = {0:e} <= 0, complex curvature undefined")]
    CollapseRegime(f64),

    #[error("singular propagation: |C q1 + D| = {0:e}")]
    SingularPropagation(f64),

    #[error("thin element (B = 0): the propagator kernel is a delta distribution")]
    ThinElement,

    #[error("grid too coarse: sigma = {sigma} < 4 dx = {min}")]
    GridTooCoarse { sigma: f64, min: f64 },

    #[error("grid too small: extent {extent} < 8 sigma = {min}")]
    GridTooSmall { extent: f64, min: f64 },

    #[error("field reached the domain boundary at u = {u:e} (edge/peak = {ratio:e})")]
    DomainOverflow { u: f64, ratio: f64 },

    #[error("numerical instability (non-finite field) at u = {u:e}")]
    Instability { u: f64 },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
