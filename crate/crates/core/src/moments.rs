//! Second-order moments of the transverse field and the exact laws they obey.
//!
//! The dilation generator `Q̂ = (p̂·r̂ + r̂·p̂)/2ħ`, the free Hamiltonian
//! `Ĥ₀ = εK̂ + V̂` and the trap term `Û = k²α²r̂²` close under commutation, so
//! `⟨r²⟩` obeys a third-order linear ODE whose coefficients do not involve γ,
//! and `M_I⁴ = ε⟨r²⟩⟨Ĥ₀⟩ − ⟨Q̂⟩²` is conserved for any α(u).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Epsilon, ParaxialParams};
use crate::profile::Profile;
use crate::solver::field::TransverseField;
use crate::solver::spectral::Spectral2d;

/// Tolerance on `|⟨Q⟩₀|` for laws that require a beam at its waist.
pub const WAIST_Q_TOLERANCE: f64 = 1e-6;

/// Expectation values of a normalized transverse field at one `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// ⟨r²⟩ about the moment origin.
    pub r2: f64,
    /// ⟨Q̂⟩ about the moment origin.
    pub q: f64,
    /// ⟨K̂⟩ = ∫|∇⊥ψ|².
    pub k_exp: f64,
    /// ⟨V̂⟩ = (γ/2)∫|ψ|⁴.
    pub v_exp: f64,
    /// ⟨Û⟩ = k²α²⟨r²⟩.
    pub u_exp: f64,
    /// ⟨Ĥ₀⟩ = ε⟨K̂⟩ + ⟨V̂⟩.
    pub h0: f64,
    /// (⟨x⟩, ⟨y⟩) relative to the moment origin.
    pub centroid: [f64; 2],
    /// Mean transverse wavevector ⟨−i∇⊥⟩.
    pub mean_wavevector: [f64; 2],
    /// Centered width ⟨x²⟩ − ⟨x⟩² + ⟨y²⟩ − ⟨y⟩².
    pub w2: f64,
    pub epsilon: Epsilon,
}

impl MomentSet {
    /// ⟨Q̂⟩ about the centroid in the frame moving with the mean wavevector.
    pub fn q_centered(&self) -> f64 {
        self.q - self.centroid[0] * self.mean_wavevector[0] - self.centroid[1] * self.mean_wavevector[1]
    }

    /// ⟨K̂⟩ with the mean transverse wavevector removed.
    pub fn k_centered(&self) -> f64 {
        self.k_exp - self.mean_wavevector[0].powi(2) - self.mean_wavevector[1].powi(2)
    }

    /// ⟨Ĥ₀⟩ in the centered frame.
    pub fn h0_centered(&self) -> f64 {
        self.epsilon.value() * self.k_centered() + self.v_exp
    }

    /// Consistency of the stored redundant entries.
    pub fn check_invariants(&self) -> Result<()> {
        let scale = self.k_exp.abs() + self.v_exp.abs();
        if (self.h0 - (self.epsilon.value() * self.k_exp + self.v_exp)).abs() > 1e-12 * scale.max(1e-300) {
            return Err(Error::Precondition("H0 != eps K + V".into()));
        }
        if self.r2 < 0.0 || self.k_exp < 0.0 || self.w2 > self.r2 * (1.0 + 1e-12) {
            return Err(Error::Precondition("moment positivity violated".into()));
        }
        Ok(())
    }
}

/// Reusable FFT state for repeated moment evaluations on one grid.
#[derive(Debug)]
pub struct MomentEngine {
    spectral: Spectral2d,
    extent: f64,
    spectrum: Vec<Complex64>,
    gx: Vec<Complex64>,
    gy: Vec<Complex64>,
}

impl MomentEngine {
    pub fn new(n: usize, extent: f64) -> Self {
        let zeros = vec![Complex64::new(0.0, 0.0); n * n];
        MomentEngine {
            spectral: Spectral2d::new(n, extent),
            extent,
            spectrum: zeros.clone(),
            gx: zeros.clone(),
            gy: zeros,
        }
    }

    pub fn for_field(field: &TransverseField) -> Self {
        Self::new(field.n(), field.extent())
    }

    fn check_grid(&self, field: &TransverseField) -> Result<()> {
        if field.n() != self.spectral.n() || field.extent() != self.extent {
            return Err(Error::InvalidParameter(
                "moment engine built for a different grid".into(),
            ));
        }
        Ok(())
    }

    pub fn compute(&mut self, field: &TransverseField, params: &ParaxialParams, u: f64) -> Result<MomentSet> {
        self.compute_about(field, params, u, [0.0, 0.0])
    }

    /// Moments with positions measured from `origin`.
    pub fn compute_about(
        &mut self,
        field: &TransverseField,
        params: &ParaxialParams,
        u: f64,
        origin: [f64; 2],
    ) -> Result<MomentSet> {
        self.check_grid(field)?;
        field.check_normalized()?;
        let n = field.n();
        let da = field.cell_area();
        let psi = field.values();

        let mut r2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut rho2 = 0.0;
        for iy in 0..n {
            let y = field.coord(iy) - origin[1];
            for ix in 0..n {
                let x = field.coord(ix) - origin[0];
                let rho = psi[iy * n + ix].norm_sqr();
                r2 += rho * (x * x + y * y);
                cx += rho * x;
                cy += rho * y;
                rho2 += rho * rho;
            }
        }
        r2 *= da;
        cx *= da;
        cy *= da;
        let v_exp = 0.5 * params.gamma * rho2 * da;

        self.spectrum.copy_from_slice(psi);
        self.spectral.forward(&mut self.spectrum);
        let spec_norm = da / (n * n) as f64;
        let mut k_exp = 0.0;
        let mut px = 0.0;
        let mut py = 0.0;
        let ny = n / 2;
        for (idx, s) in self.spectrum.iter().enumerate() {
            let (kx, ky) = self.spectral.kx_ky(idx);
            let p = s.norm_sqr();
            k_exp += (kx * kx + ky * ky) * p;
            px += kx * p;
            py += ky * p;
            let (ikx, iky) = (idx / n, idx % n);
            let i = Complex64::new(0.0, 1.0);
            self.gx[idx] = if ikx == ny {
                Complex64::new(0.0, 0.0)
            } else {
                i * kx * s
            };
            self.gy[idx] = if iky == ny {
                Complex64::new(0.0, 0.0)
            } else {
                i * ky * s
            };
        }
        k_exp *= spec_norm;
        px *= spec_norm;
        py *= spec_norm;

        self.spectral.inverse(&mut self.gx);
        self.spectral.inverse(&mut self.gy);
        let mut q = 0.0;
        for iy in 0..n {
            let y = field.coord(iy) - origin[1];
            for ix in 0..n {
                let x = field.coord(ix) - origin[0];
                let idx = iy * n + ix;
                q += (psi[idx].conj() * (x * self.gx[idx] + y * self.gy[idx])).im;
            }
        }
        q *= da;

        let eps = params.eps();
        let u_exp = params.k * params.k * params.alpha.squared(u) * r2;
        Ok(MomentSet {
            r2,
            q,
            k_exp,
            v_exp,
            u_exp,
            h0: eps * k_exp + v_exp,
            centroid: [cx, cy],
            mean_wavevector: [px, py],
            w2: r2 - cx * cx - cy * cy,
            epsilon: params.epsilon,
        })
    }

    /// ⟨(p̂·r̂ + r̂·p̂)/2ħ⟩ evaluated literally, `(−i/2)∫ψ*(r·∇ψ + ∇·(rψ))`.
    ///
    /// For a normalized field the real part equals [`MomentSet::q`] and the
    /// imaginary part vanishes (hermiticity).
    pub fn symmetrized_q(&mut self, field: &TransverseField) -> Result<Complex64> {
        self.check_grid(field)?;
        let n = field.n();
        let da = field.cell_area();
        let psi = field.values();
        let i = Complex64::new(0.0, 1.0);
        let ny = n / 2;

        // r·∇ψ
        self.spectrum.copy_from_slice(psi);
        self.spectral.forward(&mut self.spectrum);
        for (idx, s) in self.spectrum.iter().enumerate() {
            let (kx, ky) = self.spectral.kx_ky(idx);
            let (ikx, iky) = (idx / n, idx % n);
            self.gx[idx] = if ikx == ny { 0.0.into() } else { i * kx * s };
            self.gy[idx] = if iky == ny { 0.0.into() } else { i * ky * s };
        }
        self.spectral.inverse(&mut self.gx);
        self.spectral.inverse(&mut self.gy);
        let mut first = Complex64::new(0.0, 0.0);
        for iy in 0..n {
            let y = field.coord(iy);
            for ix in 0..n {
                let x = field.coord(ix);
                let idx = iy * n + ix;
                first += psi[idx].conj() * (x * self.gx[idx] + y * self.gy[idx]);
            }
        }

        // ∇·(rψ)
        for iy in 0..n {
            for ix in 0..n {
                let idx = iy * n + ix;
                self.gx[idx] = field.coord(ix) * psi[idx];
                self.gy[idx] = field.coord(iy) * psi[idx];
            }
        }
        self.spectral.forward(&mut self.gx);
        self.spectral.forward(&mut self.gy);
        for idx in 0..n * n {
            let (kx, ky) = self.spectral.kx_ky(idx);
            let (ikx, iky) = (idx / n, idx % n);
            let dx = if ikx == ny { 0.0.into() } else { i * kx * self.gx[idx] };
            let dy = if iky == ny { 0.0.into() } else { i * ky * self.gy[idx] };
            self.spectrum[idx] = dx + dy;
        }
        self.spectral.inverse(&mut self.spectrum);
        let second: Complex64 = psi.iter().zip(&self.spectrum).map(|(p, d)| p.conj() * d).sum();

        Ok(-0.5 * i * (first + second) * da)
    }
}

/// Grid moments of a normalized field; see [`MomentEngine`] for repeated use.
pub fn compute_moments(field: &TransverseField, params: &ParaxialParams, u: f64) -> Result<MomentSet> {
    MomentEngine::for_field(field).compute(field, params, u)
}

/// Moments about a shifted origin, e.g. `(0, −sag)` for a beam sagging under gravity.
pub fn compute_moments_about(
    field: &TransverseField,
    params: &ParaxialParams,
    u: f64,
    origin: [f64; 2],
) -> Result<MomentSet> {
    MomentEngine::for_field(field).compute_about(field, params, u, origin)
}

/// `(d⟨r²⟩/du, d²⟨r²⟩/du²)` from the closed moment system, with ⟨Û⟩ at `u`.
pub fn ehrenfest_derivatives(m: &MomentSet, params: &ParaxialParams, u: f64) -> (f64, f64) {
    let eps = params.eps();
    let k = params.k;
    let u_exp = k * k * params.alpha.squared(u) * m.r2;
    (2.0 * eps / k * m.q, 2.0 * eps / (k * k) * (m.h0 - eps * u_exp))
}

fn require_free(params: &ParaxialParams) -> Result<()> {
    match params.alpha.as_constant() {
        Some(0.0) => Ok(()),
        _ => Err(Error::Precondition(
            "free expansion law requires alpha = 0 over the span".into(),
        )),
    }
}

/// Parabolic free expansion `⟨r²⟩(u) = (ε/k²)⟨Ĥ₀⟩u² + (2ε/k)⟨Q̂⟩₀u + ⟨r²⟩₀`.
pub fn free_expansion_r2(m0: &MomentSet, params: &ParaxialParams, u: f64) -> Result<f64> {
    require_free(params)?;
    let eps = params.eps();
    let k = params.k;
    Ok(eps / (k * k) * m0.h0 * u * u + 2.0 * eps / k * m0.q * u + m0.r2)
}

/// Time-of-flight width `w²(τ) = (1/k²)(⟨K̂⟩₀ + ⟨V̂⟩₀)τ² + w²(0)` of an atomic
/// beam released at its waist: the free expansion law with `⟨Q̂⟩₀ = 0`.
/// Uses centered moments, so a uniform linear potential (gravity) does not
/// change the law.
pub fn tof_width(m0: &MomentSet, k: f64, tau: f64) -> Result<f64> {
    if m0.epsilon != Epsilon::Plus {
        return Err(Error::Precondition(
            "time-of-flight law is for atomic beams (eps = +1)".into(),
        ));
    }
    if m0.q_centered().abs() > WAIST_Q_TOLERANCE {
        return Err(Error::Precondition(format!(
            "time-of-flight law needs <Q>_0 = 0, got {:e}",
            m0.q_centered()
        )));
    }
    Ok(tof_slope(m0, k) * tau * tau + m0.w2)
}

/// Coefficient of τ² in [`tof_width`].
pub fn tof_slope(m0: &MomentSet, k: f64) -> f64 {
    (m0.k_centered() + m0.v_exp) / (k * k)
}

/// Relative overestimate of the velocity dispersion when interactions are
/// ignored in a time-of-flight fit: `⟨V̂⟩₀ / ⟨K̂⟩₀`.
pub fn velocity_dispersion_error(m0: &MomentSet) -> Result<f64> {
    let k = m0.k_centered();
    if !(k > 0.0) {
        return Err(Error::DegenerateBeam(format!("<K>_0 = {k:e}")));
    }
    Ok(m0.v_exp / k)
}

/// `M_I⁴ = ε⟨r²⟩⟨Ĥ₀⟩ − ⟨Q̂⟩²`; negative values signal the collapse regime.
pub fn quality_factor(m: &MomentSet, epsilon: Epsilon) -> f64 {
    epsilon.value() * m.r2 * m.h0 - m.q * m.q
}

/// Quality factor built from the centered width `w²` and centered `⟨Q̂⟩`,
/// `⟨Ĥ₀⟩`. Coincides with [`quality_factor`] for centered beams and stays
/// invariant for off-axis beams in linear or quadratic potentials.
pub fn centered_quality_factor(m: &MomentSet, epsilon: Epsilon) -> f64 {
    let q = m.q_centered();
    epsilon.value() * m.w2 * m.h0_centered() - q * q
}

/// Critical linear density `1/(2|a_s|)` at which a Gaussian beam reaches `M_I = 0`.
pub fn self_trapping_threshold(a_s: f64) -> Result<f64> {
    if !(a_s < 0.0) {
        return Err(Error::NotAttractive(a_s));
    }
    Ok(1.0 / (2.0 * a_s.abs()))
}

/// Velocity dispersions inferred from a time-of-flight width record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofAnalysis {
    /// Least-squares coefficient of τ² in `w²(τ) − w²(0)`.
    pub slope: f64,
    pub w2_initial: f64,
    /// `(w²(τ) − w²(0))/τ²`: all expansion attributed to kinetic energy.
    pub dv2_free: f64,
    /// `(w²(τ) − w²(0))/τ² − ⟨V̂⟩₀/k²`.
    pub dv2_interacting: f64,
    /// `⟨V̂⟩₀/⟨K̂⟩₀` of the model field.
    pub ratio: f64,
    /// `dv2_free / dv2_interacting`.
    pub overestimation: f64,
}

/// Inverts the time-of-flight law. `samples` are `(τ, w²)` pairs and must
/// contain the `τ = 0` width and at least one `τ > 0`; several `τ > 0` points
/// are combined by a least-squares fit through the origin in `τ²`.
/// `m0` is the model of the released field, used for `⟨V̂⟩₀` and `⟨K̂⟩₀`.
pub fn tof_analysis(samples: &[(f64, f64)], m0: &MomentSet, k: f64) -> Result<TofAnalysis> {
    if samples
        .iter()
        .any(|(t, w)| !(t.is_finite() && w.is_finite()) || *t < 0.0)
    {
        return Err(Error::InvalidParameter(
            "time-of-flight samples must be finite with tau >= 0".into(),
        ));
    }
    let w2_initial = samples
        .iter()
        .find(|(t, _)| *t == 0.0)
        .map(|(_, w)| *w)
        .ok_or_else(|| Error::Precondition("time-of-flight samples need the tau = 0 width".into()))?;
    let (num, den) = samples
        .iter()
        .filter(|(t, _)| *t > 0.0)
        .fold((0.0, 0.0), |(n, d), (t, w)| {
            (n + t * t * (w - w2_initial), d + t.powi(4))
        });
    if den == 0.0 {
        return Err(Error::DegenerateBeam("no time-of-flight sample with tau > 0".into()));
    }
    let ratio = velocity_dispersion_error(m0)?;
    let slope = num / den;
    let dv2_free = slope;
    let dv2_interacting = dv2_free - m0.v_exp / (k * k);
    Ok(TofAnalysis {
        slope,
        w2_initial,
        dv2_free,
        dv2_interacting,
        ratio,
        overestimation: dv2_free / dv2_interacting,
    })
}

/// One recorded point of a moment trajectory; one CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub u: f64,
    pub r2: f64,
    pub w2: f64,
    pub q: f64,
    /// Absent for trajectories reconstructed from the moment ODE.
    pub k_exp: Option<f64>,
    pub v_exp: Option<f64>,
    pub u_exp: f64,
    pub h0: f64,
    pub mi4: f64,
    /// 1/R from the centered moments, `εQ_c/(k w²)`.
    pub inv_r: f64,
}

impl TrajectorySample {
    pub fn from_moments(u: f64, m: &MomentSet, k: f64) -> Self {
        TrajectorySample {
            u,
            r2: m.r2,
            w2: m.w2,
            q: m.q,
            k_exp: Some(m.k_exp),
            v_exp: Some(m.v_exp),
            u_exp: m.u_exp,
            h0: m.h0,
            mi4: quality_factor(m, m.epsilon),
            inv_r: m.epsilon.value() * m.q_centered() / (k * m.w2),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentTrajectory {
    samples: Vec<TrajectorySample>,
}

impl MomentTrajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample; `u` must be strictly increasing.
    pub fn push(&mut self, s: TrajectorySample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.u > last.u) {
                return Err(Error::Precondition(format!(
                    "trajectory u must increase: {} after {}",
                    s.u, last.u
                )));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn us(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.u).collect()
    }

    /// Largest `|M_I⁴(u) − M_I⁴(u₀)| / |M_I⁴(u₀)|`.
    pub fn max_mi4_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let scale = first.mi4.abs().max(f64::MIN_POSITIVE);
        self.samples
            .iter()
            .map(|s| (s.mi4 - first.mi4).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Angular frequency of an oscillation from the zero crossings of its
/// derivative, linearly interpolated and averaged over all crossings.
///
/// Needs at least seven crossings (three full periods).
pub fn oscillation_frequency(us: &[f64], derivative: &[f64]) -> Result<f64> {
    if us.len() != derivative.len() {
        return Err(Error::InvalidParameter("length mismatch".into()));
    }
    let mut crossings = Vec::new();
    for i in 1..us.len() {
        let (a, b) = (derivative[i - 1], derivative[i]);
        if a == 0.0 && i == 1 {
            crossings.push(us[0]);
        }
        if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
            if b == 0.0 {
                crossings.push(us[i]);
            } else {
                let t = a / (a - b);
                crossings.push(us[i - 1] + t * (us[i] - us[i - 1]));
            }
        }
    }
    crossings.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if crossings.len() < 7 {
        return Err(Error::Precondition(format!(
            "need >= 7 derivative zero crossings (3 periods), found {}",
            crossings.len()
        )));
    }
    let spacing = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Ok(std::f64::consts::PI / spacing)
}

/// Splits `[a, b]` at the profile's jump points.
pub(crate) fn segments(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    cuts.push(b);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// α² restricted to one segment: piecewise-constant profiles use the
/// segment's own value so that the endpoint evaluations never see the jump.
pub(crate) fn segment_alpha_sq<'a>(profile: &'a Profile, a: f64, b: f64) -> impl Fn(f64) -> f64 + 'a {
    let frozen = if profile.breakpoints().is_empty() {
        None
    } else {
        Some(profile.squared(0.5 * (a + b)))
    };
    move |u| frozen.unwrap_or_else(|| profile.squared(u))
}

/// Uniform step count for a segment, never exceeding `step`.
pub(crate) fn step_count(len: f64, step: f64) -> usize {
    ((len / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrator for `y''' = −4α² y' − 2 (α²)' y` with `y = ⟨r²⟩`.
struct ThirdOrder<'a> {
    profile: &'a Profile,
    fd_step: f64,
}

impl ThirdOrder<'_> {
    fn rhs(&self, alpha_sq: &dyn Fn(f64) -> f64, u: f64, y: [f64; 3]) -> [f64; 3] {
        let a2 = alpha_sq(u);
        let da2 = if self.profile.breakpoints().is_empty() {
            self.profile.squared_derivative_or_fd(u, self.fd_step)
        } else {
            0.0
        };
        [y[1], y[2], -4.0 * a2 * y[1] - 2.0 * da2 * y[0]]
    }

    fn rk4(&self, alpha_sq: &dyn Fn(f64) -> f64, u: f64, h: f64, y: [f64; 3]) -> [f64; 3] {
        let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
        let k1 = self.rhs(alpha_sq, u, y);
        let k2 = self.rhs(alpha_sq, u + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = self.rhs(alpha_sq, u + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = self.rhs(alpha_sq, u + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }
}

fn ode_seed(r2: f64, q: f64, h0: f64, params: &ParaxialParams, u: f64) -> [f64; 3] {
    let eps = params.eps();
    let k = params.k;
    let u_exp = k * k * params.alpha.squared(u) * r2;
    [r2, 2.0 * eps / k * q, 2.0 * eps / (k * k) * (h0 - eps * u_exp)]
}

fn ode_sample(u: f64, full: [f64; 3], centered: [f64; 3], params: &ParaxialParams, alpha_sq: f64) -> TrajectorySample {
    let eps = params.eps();
    let k = params.k;
    let q = k * full[1] / (2.0 * eps);
    let u_exp = k * k * alpha_sq * full[0];
    let h0 = k * k * full[2] / (2.0 * eps) + eps * u_exp;
    let qc = k * centered[1] / (2.0 * eps);
    TrajectorySample {
        u,
        r2: full[0],
        w2: centered[0],
        q,
        k_exp: None,
        v_exp: None,
        u_exp,
        h0,
        mi4: eps * full[0] * h0 - q * q,
        inv_r: eps * qc / (k * centered[0]),
    }
}

/// Integrates the closed third-order moment law from `m0` over `span` with a
/// fixed-step RK4, recording every step.
///
/// The state is `(⟨r²⟩, d⟨r²⟩/du, d²⟨r²⟩/du²)`; a second copy seeded with the
/// centered moments tracks `w²`. Jumps of a piecewise-constant α² are applied
/// exactly: `d²⟨r²⟩/du²` jumps by `−2 Δα² ⟨r²⟩`. `d(α²)/du` is analytic for
/// built-in profiles and a central difference of width `step` for tables.
pub fn moment_ode_solve(
    m0: &MomentSet,
    params: &ParaxialParams,
    span: (f64, f64),
    step: f64,
) -> Result<MomentTrajectory> {
    let mut traj = MomentTrajectory::new();
    moment_ode_run(m0, params, span, step, &[], &mut |s| {
        traj.push(s)?;
        Ok(())
    })?;
    Ok(traj)
}

/// Like [`moment_ode_solve`] but records only at the requested `points`
/// (sorted, inside `span`); steps are shortened to land on them exactly.
pub fn moment_ode_at(
    m0: &MomentSet,
    params: &ParaxialParams,
    u0: f64,
    points: &[f64],
    step: f64,
) -> Result<MomentTrajectory> {
    let Some(&end) = points.last() else {
        return Ok(MomentTrajectory::new());
    };
    if points.windows(2).any(|w| w[1] < w[0]) || points[0] < u0 {
        return Err(Error::InvalidParameter("sample points must be sorted and >= u0".into()));
    }
    let mut traj = MomentTrajectory::new();
    let mut pending = points.iter().peekable();
    moment_ode_run(m0, params, (u0, end), step, points, &mut |s| {
        while let Some(&&p) = pending.peek() {
            if (p - s.u).abs() <= 1e-12 * (1.0 + p.abs()) {
                pending.next();
                if traj.samples().last().is_none_or(|l| s.u > l.u) {
                    traj.push(TrajectorySample { u: p, ..s })?;
                }
            } else {
                break;
            }
        }
        Ok(())
    })?;
    Ok(traj)
}

fn moment_ode_run(
    m0: &MomentSet,
    params: &ParaxialParams,
    span: (f64, f64),
    step: f64,
    extra_cuts: &[f64],
    emit: &mut dyn FnMut(TrajectorySample) -> Result<()>,
) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let (u0, u1) = span;
    if !(u1 >= u0) {
        return Err(Error::InvalidParameter("span must satisfy end >= start".into()));
    }
    params.validate_span(u0, u1)?;
    let profile = &params.alpha;
    let integ = ThirdOrder { profile, fd_step: step };
    let mut full = ode_seed(m0.r2, m0.q, m0.h0, params, u0);
    let mut centered = ode_seed(m0.w2, m0.q_centered(), m0.h0_centered(), params, u0);
    emit(ode_sample(u0, full, centered, params, profile.squared(u0)))?;

    let mut cuts: Vec<f64> = profile.breakpoints().to_vec();
    cuts.extend_from_slice(extra_cuts);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let jumps = profile.breakpoints();
    for (a, b) in segments(u0, u1, &cuts) {
        if jumps.contains(&a) && a > u0 {
            // α² jumps at `a`; the left value is the previous segment's.
            let left = profile.squared(a - 1e-9 * (1.0 + a.abs()).max(step * 1e-6));
            let right = profile.squared(a);
            full[2] -= 2.0 * (right - left) * full[0];
            centered[2] -= 2.0 * (right - left) * centered[0];
        }
        let alpha_sq = segment_alpha_sq(profile, a, b);
        let n = step_count(b - a, step);
        let h = (b - a) / n as f64;
        for i in 0..n {
            let u = a + i as f64 * h;
            full = integ.rk4(&alpha_sq, u, h, full);
            centered = integ.rk4(&alpha_sq, u, h, centered);
            let un = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
            emit(ode_sample(un, full, centered, params, alpha_sq(un)))?;
        }
    }
    Ok(())
}
