//! Coefficients of the generic paraxial equation
//!
//! ```text
//! 2ik ∂ψ/∂u = −ε Δ⊥ψ + γ|ψ|²ψ + ε k² α²(u) r² ψ
//! ```
//!
//! and the mappings from optical (Kerr, graded-index) and atomic (guided atom
//! laser) descriptions onto it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s (exact).
pub const C_SI: f64 = 299_792_458.0;
/// Standard gravity, m/s².
pub const G_SI: f64 = 9.806_65;

/// Physical constants used when building specs. `natural()` sets ħ = c = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub hbar: f64,
    pub c: f64,
}

impl Units {
    pub fn si() -> Self {
        Units { hbar: HBAR_SI, c: C_SI }
    }

    pub fn natural() -> Self {
        Units { hbar: 1.0, c: 1.0 }
    }
}

/// Sign of the kinetic term: −1 for optics, +1 for atom optics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Epsilon {
    Minus,
    Plus,
}

impl Epsilon {
    pub fn value(self) -> f64 {
        match self {
            Epsilon::Minus => -1.0,
            Epsilon::Plus => 1.0,
        }
    }
}

impl TryFrom<i64> for Epsilon {
    type Error = String;
    fn try_from(v: i64) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Epsilon::Plus),
            -1 => Ok(Epsilon::Minus),
            _ => Err(format!("epsilon must be +1 or -1, got {v}")),
        }
    }
}

impl From<Epsilon> for i64 {
    fn from(e: Epsilon) -> i64 {
        match e {
            Epsilon::Minus => -1,
            Epsilon::Plus => 1,
        }
    }
}

/// Which physical coordinate plays the role of `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisLabel {
    /// Optical propagation distance z.
    ZAxis,
    /// Atomic classical transit time τ.
    TauAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaxialParams {
    pub k: f64,
    pub epsilon: Epsilon,
    pub gamma: f64,
    pub alpha: Profile,
    pub axis: AxisLabel,
}

impl ParaxialParams {
    pub fn new(k: f64, epsilon: Epsilon, gamma: f64, alpha: Profile) -> Result<Self> {
        let p = ParaxialParams {
            k,
            epsilon,
            gamma,
            alpha,
            axis: match epsilon {
                Epsilon::Minus => AxisLabel::ZAxis,
                Epsilon::Plus => AxisLabel::TauAxis,
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidSpec(format!("k must be positive, got {}", self.k)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidSpec("gamma must be finite".into()));
        }
        self.alpha.validate()
    }

    /// Validates α(u) ≥ 0 and finite over the propagation span.
    pub fn validate_span(&self, start: f64, end: f64) -> Result<()> {
        self.validate()?;
        self.alpha.check_nonnegative_on(start.min(end), start.max(end))
    }

    pub fn eps(&self) -> f64 {
        self.epsilon.value()
    }

    /// Same equation rescaled so that `k = 1`: u → u/k keeps γ and α·u fixed.
    pub fn rescaled_to_unit_k(&self) -> (ParaxialParams, f64) {
        let scale = self.k;
        let alpha = rescale_profile(&self.alpha, scale);
        (
            ParaxialParams {
                k: 1.0,
                epsilon: self.epsilon,
                gamma: self.gamma,
                alpha,
                axis: self.axis,
            },
            scale,
        )
    }
}

/// Profile `g(u') = s · f(s u')`, so that `g(u/s) · (u/s) = f(u) · u`.
fn rescale_profile(p: &Profile, s: f64) -> Profile {
    match p {
        Profile::Constant { value } => Profile::Constant { value: value * s },
        Profile::Linear { start, slope } => Profile::Linear {
            start: start * s,
            slope: slope * s * s,
        },
        Profile::Sinusoidal {
            offset,
            amplitude,
            angular_frequency,
            phase,
        } => Profile::Sinusoidal {
            offset: offset * s,
            amplitude: amplitude * s,
            angular_frequency: angular_frequency * s,
            phase: *phase,
        },
        Profile::SinusoidalSquared {
            mean_sq,
            depth,
            angular_frequency,
            phase,
        } => Profile::SinusoidalSquared {
            mean_sq: mean_sq * s * s,
            depth: *depth,
            angular_frequency: angular_frequency * s,
            phase: *phase,
        },
        Profile::Quadratic {
            offset,
            center,
            curvature,
        } => Profile::Quadratic {
            offset: offset * s,
            center: center / s,
            curvature: curvature * s * s * s,
        },
        Profile::PiecewiseConstant { breaks, values } => Profile::PiecewiseConstant {
            breaks: breaks.iter().map(|b| b / s).collect(),
            values: values.iter().map(|v| v * s).collect(),
        },
        Profile::Tabulated { u, values } => Profile::Tabulated {
            u: u.iter().map(|x| x / s).collect(),
            values: values.iter().map(|v| v * s).collect(),
        },
    }
}

/// Optical beam in a Kerr medium with graded index `ε_r = ε_r0 (1 − β²(z) r²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalBeamSpec {
    pub epsilon_r0: f64,
    pub omega: f64,
    pub c: f64,
    pub chi3: f64,
    pub beta: Profile,
}

/// Guided atom-laser beam with uniform linear density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicBeamSpec {
    pub mass: f64,
    pub hbar: f64,
    pub n1d: f64,
    pub a_s: f64,
    pub omega_perp: Profile,
    /// Atomic flux through a transverse plane (atoms/s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<f64>,
    /// Total energy E of the longitudinal motion (J).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

impl AtomicBeamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidSpec(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidSpec(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.n1d.is_finite() && self.n1d >= 0.0) {
            return Err(Error::InvalidSpec(format!("n1d must be >= 0, got {}", self.n1d)));
        }
        if !self.a_s.is_finite() {
            return Err(Error::InvalidSpec("a_s must be finite".into()));
        }
        self.omega_perp.validate()
    }

    /// k = m/ħ
    pub fn wavenumber(&self) -> f64 {
        self.mass / self.hbar
    }
}

/// Maps an optical beam onto the generic equation (u = z, ε = −1).
pub fn map_optical(spec: &OpticalBeamSpec) -> Result<ParaxialParams> {
    if !(spec.epsilon_r0.is_finite() && spec.epsilon_r0 > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "epsilon_r0 must be positive, got {}",
            spec.epsilon_r0
        )));
    }
    if !(spec.omega.is_finite() && spec.omega > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "omega must be positive, got {}",
            spec.omega
        )));
    }
    if !(spec.c.is_finite() && spec.c > 0.0) {
        return Err(Error::InvalidSpec(format!("c must be positive, got {}", spec.c)));
    }
    if !spec.chi3.is_finite() {
        return Err(Error::InvalidSpec("chi3 must be finite".into()));
    }
    spec.beta.validate()?;
    let k = spec.epsilon_r0.sqrt() * spec.omega / spec.c;
    Ok(ParaxialParams {
        k,
        epsilon: Epsilon::Minus,
        gamma: spec.chi3 * k * k / spec.epsilon_r0,
        alpha: spec.beta.clone(),
        axis: AxisLabel::ZAxis,
    })
}

/// Maps a guided atomic beam onto the generic equation (u = τ, ε = +1).
///
/// Assumes the linear density is uniform along the beam, i.e. no significant
/// longitudinal potential; see [`crate::longitudinal::density_variation`].
pub fn map_atomic(spec: &AtomicBeamSpec) -> Result<ParaxialParams> {
    spec.validate()?;
    Ok(ParaxialParams {
        k: spec.wavenumber(),
        epsilon: Epsilon::Plus,
        gamma: 8.0 * PI * spec.n1d * spec.a_s,
        alpha: spec.omega_perp.clone(),
        axis: AxisLabel::TauAxis,
    })
}
