//! Longitudinal profiles `u ↦ f(u)` used for the quadratic coefficient α(u),
//! the optical index profile β(z), the atomic trap frequency ω⊥(τ) and the
//! longitudinal potential U∥(z).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real function of the propagation coordinate.
///
/// Built-in closed forms carry analytic derivatives. `Tabulated` samples are
/// linearly interpolated and clamped to their end values outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `start + slope * u`
    Linear {
        start: f64,
        slope: f64,
    },
    /// `offset + amplitude * sin(angular_frequency * u + phase)`
    Sinusoidal {
        offset: f64,
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
    },
    /// Square modulated sinusoidally: `f(u)^2 = mean_sq * (1 + depth * sin(angular_frequency * u + phase))`.
    SinusoidalSquared {
        mean_sq: f64,
        depth: f64,
        angular_frequency: f64,
        phase: f64,
    },
    /// `offset + curvature * (u - center)^2 / 2`
    Quadratic {
        offset: f64,
        center: f64,
        curvature: f64,
    },
    /// `values[i]` on `[breaks[i-1], breaks[i])`; right-continuous at breaks.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    Tabulated {
        u: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn zero() -> Self {
        Profile::Constant { value: 0.0 }
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Profile::PiecewiseConstant { breaks, values };
        p.validate()?;
        Ok(p)
    }

    pub fn tabulated(u: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Profile::Tabulated { u, values };
        p.validate()?;
        Ok(p)
    }

    /// Structural checks: finite parameters, sorted tables, matching lengths.
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Profile::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidSpec("profile value must be finite".into()));
                }
            }
            Profile::Linear { start, slope } => {
                if !finite(&[*start, *slope]) {
                    return Err(Error::InvalidSpec("linear profile must be finite".into()));
                }
            }
            Profile::Sinusoidal {
                offset,
                amplitude,
                angular_frequency,
                phase,
            } => {
                if !finite(&[*offset, *amplitude, *angular_frequency, *phase]) {
                    return Err(Error::InvalidSpec("sinusoidal profile must be finite".into()));
                }
            }
            Profile::SinusoidalSquared {
                mean_sq,
                depth,
                angular_frequency,
                phase,
            } => {
                if !finite(&[*mean_sq, *depth, *angular_frequency, *phase]) {
                    return Err(Error::InvalidSpec("sinusoidal profile must be finite".into()));
                }
                if *mean_sq < 0.0 || depth.abs() > 1.0 {
                    return Err(Error::InvalidSpec(
                        "sinusoidal_squared needs mean_sq >= 0 and |depth| <= 1".into(),
                    ));
                }
            }
            Profile::Quadratic {
                offset,
                center,
                curvature,
            } => {
                if !finite(&[*offset, *center, *curvature]) {
                    return Err(Error::InvalidSpec("quadratic profile must be finite".into()));
                }
            }
            Profile::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::InvalidSpec(format!(
                        "piecewise profile needs len(values) = len(breaks) + 1, got {} and {}",
                        values.len(),
                        breaks.len()
                    )));
                }
                if !finite(breaks) || !finite(values) {
                    return Err(Error::InvalidSpec("piecewise profile must be finite".into()));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSpec(
                        "piecewise breaks must be strictly increasing".into(),
                    ));
                }
            }
            Profile::Tabulated { u, values } => {
                if u.len() != values.len() || u.len() < 2 {
                    return Err(Error::InvalidSpec(
                        "tabulated profile needs >= 2 samples of matching length".into(),
                    ));
                }
                if !finite(u) || !finite(values) {
                    return Err(Error::InvalidSpec("tabulated profile must be finite".into()));
                }
                if u.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSpec(
                        "tabulated abscissae must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Linear { start, slope } => start + slope * u,
            Profile::Sinusoidal {
                offset,
                amplitude,
                angular_frequency,
                phase,
            } => offset + amplitude * (angular_frequency * u + phase).sin(),
            Profile::SinusoidalSquared { .. } => self.squared(u).max(0.0).sqrt(),
            Profile::Quadratic {
                offset,
                center,
                curvature,
            } => offset + 0.5 * curvature * (u - center).powi(2),
            Profile::PiecewiseConstant { breaks, values } => {
                let idx = breaks.partition_point(|&b| b <= u);
                values[idx]
            }
            Profile::Tabulated { u: xs, values } => interpolate(xs, values, u),
        }
    }

    pub fn squared(&self, u: f64) -> f64 {
        match self {
            Profile::SinusoidalSquared {
                mean_sq,
                depth,
                angular_frequency,
                phase,
            } => mean_sq * (1.0 + depth * (angular_frequency * u + phase).sin()),
            _ => self.value(u).powi(2),
        }
    }

    /// Analytic derivative of the profile, `None` for tabulated data.
    ///
    /// Piecewise-constant profiles report zero; their jumps are exposed by
    /// [`Profile::breakpoints`].
    pub fn derivative(&self, u: f64) -> Option<f64> {
        match self {
            Profile::Constant { .. } | Profile::PiecewiseConstant { .. } => Some(0.0),
            Profile::Linear { slope, .. } => Some(*slope),
            Profile::Sinusoidal {
                amplitude,
                angular_frequency,
                phase,
                ..
            } => Some(amplitude * angular_frequency * (angular_frequency * u + phase).cos()),
            Profile::SinusoidalSquared { .. } => {
                let v = self.value(u);
                if v > 0.0 {
                    self.squared_derivative(u).map(|d| d / (2.0 * v))
                } else {
                    None
                }
            }
            Profile::Quadratic { center, curvature, .. } => Some(curvature * (u - center)),
            Profile::Tabulated { .. } => None,
        }
    }

    /// Derivative with a central-difference fallback of half-width `h`.
    pub fn derivative_or_fd(&self, u: f64, h: f64) -> f64 {
        self.derivative(u)
            .unwrap_or_else(|| (self.value(u + h) - self.value(u - h)) / (2.0 * h))
    }

    /// Analytic `d f² / du`, `None` for tabulated data.
    pub fn squared_derivative(&self, u: f64) -> Option<f64> {
        match self {
            Profile::SinusoidalSquared {
                mean_sq,
                depth,
                angular_frequency,
                phase,
            } => Some(mean_sq * depth * angular_frequency * (angular_frequency * u + phase).cos()),
            Profile::Tabulated { .. } => None,
            _ => self.derivative(u).map(|d| 2.0 * self.value(u) * d),
        }
    }

    pub fn squared_derivative_or_fd(&self, u: f64, h: f64) -> f64 {
        self.squared_derivative(u)
            .unwrap_or_else(|| (self.squared(u + h) - self.squared(u - h)) / (2.0 * h))
    }

    /// Locations of jump discontinuities.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Profile::PiecewiseConstant { breaks, .. } => breaks,
            _ => &[],
        }
    }

    /// `Some(value)` when the profile is constant everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Profile::Constant { value } => Some(*value),
            Profile::Linear { start, slope } if *slope == 0.0 => Some(*start),
            Profile::Sinusoidal { offset, amplitude, .. } if *amplitude == 0.0 => Some(*offset),
            Profile::SinusoidalSquared { mean_sq, depth, .. } if *depth == 0.0 => Some(mean_sq.sqrt()),
            Profile::Quadratic { offset, curvature, .. } if *curvature == 0.0 => Some(*offset),
            Profile::PiecewiseConstant { values, .. } if values.windows(2).all(|w| w[0] == w[1]) => Some(values[0]),
            Profile::Tabulated { values, .. } if values.windows(2).all(|w| w[0] == w[1]) => Some(values[0]),
            _ => None,
        }
    }

    /// Sampled maximum of `|f|` on `[a, b]` (table knots and breaks included).
    pub fn max_abs_on(&self, a: f64, b: f64) -> f64 {
        const SAMPLES: usize = 2048;
        let mut m = self.value(a).abs().max(self.value(b).abs());
        for i in 0..=SAMPLES {
            let u = a + (b - a) * i as f64 / SAMPLES as f64;
            m = m.max(self.value(u).abs());
        }
        match self {
            Profile::Tabulated { u, values } => {
                for (x, v) in u.iter().zip(values) {
                    if *x >= a && *x <= b {
                        m = m.max(v.abs());
                    }
                }
            }
            Profile::PiecewiseConstant { breaks, .. } => {
                for x in breaks {
                    if *x >= a && *x <= b {
                        m = m.max(self.value(*x).abs());
                    }
                }
            }
            _ => {}
        }
        m
    }

    /// Checks `f(u) >= 0` and finiteness across `[a, b]`, as required of α(u).
    pub fn check_nonnegative_on(&self, a: f64, b: f64) -> Result<()> {
        self.validate()?;
        const SAMPLES: usize = 2048;
        for i in 0..=SAMPLES {
            let u = a + (b - a) * i as f64 / SAMPLES as f64;
            let v = self.value(u);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "profile must be finite and non-negative on [{a}, {b}], got {v} at u = {u}"
                )));
            }
        }
        if let Profile::Tabulated { values, .. } | Profile::PiecewiseConstant { values, .. } = self {
            if values.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidSpec("profile values must be non-negative".into()));
            }
        }
        Ok(())
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::zero()
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}
