use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{Error, Result};

/// Tolerance on the unit norm of a transverse field.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Maximum edge/peak magnitude ratio on the outer two-cell frame.
pub const EDGE_TOLERANCE: f64 = 1e-6;

/// Complex transverse amplitude on an `n × n` periodic grid of side `extent`.
///
/// Sample `(ix, iy)` sits at `((ix − n/2) dx, (iy − n/2) dx)` and is stored at
/// `values[iy * n + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseField {
    values: Vec<Complex64>,
    n: usize,
    extent: f64,
}

impl TransverseField {
    pub fn from_values(values: Vec<Complex64>, n: usize, extent: f64) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "field needs n*n = {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "extent must be positive, got {extent}"
            )));
        }
        Ok(TransverseField { values, n, extent })
    }

    /// Samples `f(x, y)` on the grid without normalizing.
    pub fn from_fn(n: usize, extent: f64, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let dx = extent / n as f64;
        let half = (n / 2) as f64;
        let values = (0..n * n)
            .map(|i| {
                let x = ((i % n) as f64 - half) * dx;
                let y = ((i / n) as f64 - half) * dx;
                f(x, y)
            })
            .collect();
        Self::from_values(values, n, extent)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dx()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// 1D grid coordinate of index `j`.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.dx()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_area()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Normalization { norm });
        }
        let s = 1.0 / norm.sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    pub fn check_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE || !norm.is_finite() {
            return Err(Error::Normalization { norm });
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude on the outer two-cell frame divided by the peak.
    pub fn edge_ratio(&self) -> f64 {
        let n = self.n;
        let on_frame = |j: usize| j < 2 || j >= n - 2;
        let mut edge = 0.0f64;
        for iy in 0..n {
            let row = &self.values[iy * n..(iy + 1) * n];
            if on_frame(iy) {
                edge = row.iter().map(|v| v.norm()).fold(edge, f64::max);
            } else {
                for ix in [0, 1, n - 2, n - 1] {
                    edge = edge.max(row[ix].norm());
                }
            }
        }
        let peak = self.peak();
        if peak == 0.0 {
            return f64::INFINITY;
        }
        edge / peak
    }

    pub fn check_boundary(&self, u: f64) -> Result<()> {
        let ratio = self.edge_ratio();
        if !(ratio < EDGE_TOLERANCE) {
            return Err(Error::DomainOverflow { u, ratio });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Multiplies by `exp(i phase)`.
    pub fn with_global_phase(mut self, phase: f64) -> Self {
        let p = Complex64::from_polar(1.0, phase);
        self.values.iter_mut().for_each(|v| *v *= p);
        self
    }

    /// Writes the snapshot layout: little-endian `u64 n`, `f64 extent`,
    /// `f64 u`, then `n²` row-major `(re, im)` pairs of `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W, u: f64) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 16 * self.values.len());
        buf.extend_from_slice(&(self.n as u64).to_le_bytes());
        buf.extend_from_slice(&self.extent.to_le_bytes());
        buf.extend_from_slice(&u.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads the snapshot layout; returns the field and its `u`.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(Self, f64)> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 24 {
            return Err(Error::Io("field file shorter than its header".into()));
        }
        let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().unwrap() };
        let n = u64::from_le_bytes(word(0)) as usize;
        let extent = f64::from_le_bytes(word(8));
        let u = f64::from_le_bytes(word(16));
        let expected = n
            .checked_mul(n)
            .and_then(|m| m.checked_mul(16))
            .and_then(|m| m.checked_add(24))
            .ok_or_else(|| Error::Io(format!("field header has absurd n = {n}")))?;
        if bytes.len() != expected {
            return Err(Error::Io(format!(
                "field file size {} does not match header (n = {n}, expected {expected})",
                bytes.len()
            )));
        }
        let values = (0..n * n)
            .map(|i| {
                let o = 24 + 16 * i;
                Complex64::new(f64::from_le_bytes(word(o)), f64::from_le_bytes(word(o + 8)))
            })
            .collect();
        Ok((Self::from_values(values, n, extent)?, u))
    }
}

/// Parameters of a Gaussian input beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    pub sigma: f64,
    #[serde(default)]
    pub centroid: [f64; 2],
    /// Transverse wavevector `p` of the tilt phase `exp(i p·(r − r0))`.
    #[serde(default)]
    pub tilt: [f64; 2],
    /// Radius of the curvature phase `exp(i k |r − r0|² / 2R)`; `None` is flat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_radius: Option<f64>,
}

impl GaussianBeam {
    pub fn waist(sigma: f64) -> Self {
        GaussianBeam {
            sigma,
            centroid: [0.0, 0.0],
            tilt: [0.0, 0.0],
            curvature_radius: None,
        }
    }
}

/// Normalized `exp(−|r−r0|²/2σ² + i k |r−r0|²/2R + i p·(r−r0))` on the grid.
///
/// The curvature phase is imposed literally; under ε = −1 the width-based
/// radius read back from the moments is `−R`.
pub fn make_gaussian(beam: &GaussianBeam, grid: &GridSpec, k: f64) -> Result<TransverseField> {
    let sigma = beam.sigma;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    grid.validate()?;
    let dx = grid.extent / grid.n as f64;
    if sigma < 4.0 * dx {
        return Err(Error::GridTooCoarse { sigma, min: 4.0 * dx });
    }
    if grid.extent < 8.0 * sigma {
        return Err(Error::GridTooSmall {
            extent: grid.extent,
            min: 8.0 * sigma,
        });
    }
    let inv_r = match beam.curvature_radius {
        Some(r) if r.is_infinite() => 0.0,
        Some(r) if r == 0.0 || !r.is_finite() => {
            return Err(Error::InvalidParameter(format!(
                "curvature radius must be nonzero, got {r}"
            )))
        }
        Some(r) => 1.0 / r,
        None => 0.0,
    };
    let [x0, y0] = beam.centroid;
    let [px, py] = beam.tilt;
    let mut field = TransverseField::from_fn(grid.n, grid.extent, |x, y| {
        let (dx, dy) = (x - x0, y - y0);
        let r2 = dx * dx + dy * dy;
        let amp = (-r2 / (2.0 * sigma * sigma)).exp();
        let phase = 0.5 * k * r2 * inv_r + px * dx + py * dy;
        Complex64::from_polar(amp, phase)
    })?;
    field.normalize()?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, extent: f64) -> GridSpec {
        GridSpec {
            n,
            extent,
            du: 1e-3,
            record_stride: 1,
        }
    }

    #[test]
    fn gaussian_is_normalized_and_contained() {
        let f = make_gaussian(&GaussianBeam::waist(1.0), &grid(128, 16.0), 1.0).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-14);
        assert!(f.edge_ratio() < 1e-6);
    }

    #[test]
    fn resolution_and_extent_guards() {
        let g = grid(64, 16.0);
        assert!(matches!(
            make_gaussian(&GaussianBeam::waist(0.5), &g, 1.0),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(matches!(
            make_gaussian(&GaussianBeam::waist(2.5), &g, 1.0),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn binary_layout_round_trip() {
        let f = make_gaussian(&GaussianBeam::waist(1.0), &grid(64, 12.0), 1.0).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf, 0.25).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 64 * 64);
        assert_eq!(&buf[0..8], &64u64.to_le_bytes());
        assert_eq!(&buf[8..16], &12.0f64.to_le_bytes());
        assert_eq!(&buf[16..24], &0.25f64.to_le_bytes());
        let (g, u) = TransverseField::read_binary(&buf[..]).unwrap();
        assert_eq!(u, 0.25);
        assert_eq!(g, f);
        assert!(TransverseField::read_binary(&buf[..100]).is_err());
    }

    #[test]
    fn edge_ratio_detects_wraparound() {
        let f = TransverseField::from_fn(64, 8.0, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert!(f.check_boundary(0.0).is_err());
    }
}
