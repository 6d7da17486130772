//! Longitudinal motion of a guided atomic beam: WKB solution, the z → τ
//! transform, and gravity handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::AtomicBeamSpec;
use crate::profile::Profile;
use crate::quad::{adaptive_simpson, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalPotential {
    /// U∥(z) in J.
    pub u_par: Profile,
    /// Reference coordinate where τ and the WKB phase vanish.
    pub z0: f64,
}

impl LongitudinalPotential {
    pub fn flat(z0: f64) -> Self {
        LongitudinalPotential {
            u_par: Profile::zero(),
            z0,
        }
    }
}

fn energy(spec: &AtomicBeamSpec) -> Result<f64> {
    spec.energy
        .ok_or_else(|| Error::InvalidSpec("atomic spec needs `energy` for longitudinal motion".into()))
}

/// Classical momentum `p(z) = sqrt(2m (E − U∥(z)))`.
pub fn momentum(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, z: f64) -> Result<f64> {
    let gap = energy(spec)? - pot.u_par.value(z);
    if !(gap > 0.0) {
        return Err(Error::TurningPoint { z, gap });
    }
    Ok((2.0 * spec.mass * gap).sqrt())
}

/// Samples `E − U∥` on `[z0, z]` and fails on the first forbidden point.
fn check_allowed(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, z: f64) -> Result<()> {
    const SAMPLES: usize = 1024;
    let e = energy(spec)?;
    let mut points: Vec<f64> = (0..=SAMPLES)
        .map(|i| pot.z0 + (z - pot.z0) * i as f64 / SAMPLES as f64)
        .collect();
    let (lo, hi) = (pot.z0.min(z), pot.z0.max(z));
    if let Profile::Tabulated { u, .. } = &pot.u_par {
        points.extend(u.iter().copied().filter(|x| *x >= lo && *x <= hi));
    }
    // Interior minimum of the gap for a parabola.
    if let Profile::Quadratic { center, .. } = &pot.u_par {
        if *center >= lo && *center <= hi {
            points.push(*center);
        }
    }
    for zz in points {
        let gap = e - pot.u_par.value(zz);
        if !(gap > 0.0) {
            return Err(Error::TurningPoint { z: zz, gap });
        }
    }
    Ok(())
}

/// Classical transit time `τ(z) = ∫_{z0}^{z} m / p(z') dz'`.
pub fn tau_of_z(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, z: f64) -> Result<f64> {
    tau_of_z_with_tol(pot, spec, z, DEFAULT_TOLERANCE)
}

pub fn tau_of_z_with_tol(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, z: f64, tol: f64) -> Result<f64> {
    spec.validate()?;
    check_allowed(pot, spec, z)?;
    let e = energy(spec)?;
    let m = spec.mass;
    Ok(adaptive_simpson(
        |zz| m / (2.0 * m * (e - pot.u_par.value(zz))).sqrt(),
        pot.z0,
        z,
        tol,
    ))
}

/// WKB longitudinal wave `sqrt(m F / p(z)) exp(i/ħ ∫ p dz)` as `(amplitude, phase)`.
///
/// The squared amplitude is the linear density `n1D(z) = m F / p(z)`.
pub fn wkb_longitudinal(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, z: f64) -> Result<(f64, f64)> {
    wkb_longitudinal_with_tol(pot, spec, z, DEFAULT_TOLERANCE)
}

pub fn wkb_longitudinal_with_tol(
    pot: &LongitudinalPotential,
    spec: &AtomicBeamSpec,
    z: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    spec.validate()?;
    let flux = spec
        .flux
        .ok_or_else(|| Error::InvalidSpec("atomic spec needs `flux` for the WKB amplitude".into()))?;
    check_allowed(pot, spec, z)?;
    let margin = wkb_validity(pot, spec, z)?;
    if !(margin > 1.0) {
        return Err(Error::WkbInvalid { z, margin });
    }
    let e = energy(spec)?;
    let m = spec.mass;
    let hbar = spec.hbar;
    let p = momentum(pot, spec, z)?;
    let amplitude = (m * flux / p).sqrt();
    let phase = adaptive_simpson(|zz| (2.0 * m * (e - pot.u_par.value(zz))).sqrt() / hbar, pot.z0, z, tol);
    Ok((amplitude, phase))
}

/// Ratio `sqrt(8m) (E − U∥)^{3/2} / (ħ |dU∥/dz|)`; values ≫ 1 mean WKB holds.
///
/// Returns `+∞` where the potential is locally flat.
pub fn wkb_validity(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, z: f64) -> Result<f64> {
    let gap = energy(spec)? - pot.u_par.value(z);
    if !(gap > 0.0) {
        return Err(Error::TurningPoint { z, gap });
    }
    let h = 1e-6 * z.abs().max(1e-6);
    let slope = pot.u_par.derivative_or_fd(z, h).abs();
    if slope == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((8.0 * spec.mass).sqrt() * gap.powf(1.5) / (spec.hbar * slope))
}

/// Maximum relative variation of `n1D = m F / p(z)` over `[za, zb]`.
///
/// The nonlinear moment and ABCD laws need a uniform linear density; this is
/// the diagnostic reported for that precondition. Acceptance thresholds are
/// left to the caller.
pub fn density_variation(pot: &LongitudinalPotential, spec: &AtomicBeamSpec, za: f64, zb: f64) -> Result<f64> {
    const SAMPLES: usize = 512;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..=SAMPLES {
        let z = za + (zb - za) * i as f64 / SAMPLES as f64;
        let inv_p = 1.0 / momentum(pot, spec, z)?;
        lo = lo.min(inv_p);
        hi = hi.max(inv_p);
    }
    Ok((hi - lo) / lo)
}

/// Vertical offset `g / ω⊥²` of the trap minimum under gravity.
///
/// Moments should be taken about `(0, −sag)`, i.e. with `y' = y + sag`.
pub fn gravitational_sag(g: f64, omega_perp: f64) -> Result<f64> {
    if omega_perp == 0.0 {
        return Err(Error::ZeroTrapFrequency);
    }
    if !(omega_perp.is_finite() && g.is_finite()) || omega_perp < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sag needs finite g and omega_perp > 0, got g = {g}, omega_perp = {omega_perp}"
        )));
    }
    Ok(g / (omega_perp * omega_perp))
}
