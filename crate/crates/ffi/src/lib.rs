//! C ABI for the paraxial toolkit.
//!
//! Every fallible call returns a [`PxStatus`] and writes its result through an
//! out pointer. On failure the message is kept per thread and can be read with
//! [`px_last_error`]. Handles (`PxField`, `PxProfile`, `PxRecord`) are opaque
//! and owned by the caller once returned; release them with the matching
//! `*_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! documents: handles must come from this library and not be freed yet, out
//! pointers must be writable, and `(ptr, len)` pairs must describe readable
//! arrays of that length. Null pointers are reported as
//! `PxStatus::NullPointer` rather than dereferenced.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use paraxial::abcd::{self, InverseCurvature, RayMatrix};
use paraxial::moments::{self, MomentSet, TrajectorySample};
use paraxial::params::{Epsilon, ParaxialParams};
use paraxial::profile::Profile;
use paraxial::solver::field::{make_gaussian, GaussianBeam, TransverseField};
use paraxial::solver::{split_step_propagate, GridSpec, PropagationRecord};
use paraxial::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    /// Collapse regime or degenerate beam: the quantity is undefined.
    Degenerate = 4,
    /// The field reached the domain boundary.
    DomainOverflow = 5,
    /// Non-finite field during propagation.
    Instability = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

impl From<&Error> for PxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidSpec(_)
            | Error::InvalidParameter(_)
            | Error::GridTooCoarse { .. }
            | Error::GridTooSmall { .. }
            | Error::Normalization { .. }
            | Error::NotAttractive(_)
            | Error::ZeroTrapFrequency
            | Error::ThinElement => PxStatus::InvalidArgument,
            Error::Precondition(_) | Error::TurningPoint { .. } | Error::WkbInvalid { .. } => PxStatus::Precondition,
            Error::DegenerateBeam(_) | Error::CollapseRegime(_) | Error::SingularPropagation(_) => PxStatus::Degenerate,
            Error::DomainOverflow { .. } => PxStatus::DomainOverflow,
            Error::Instability { .. } => PxStatus::Instability,
            Error::Io(_) => PxStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PxStatus::from(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(PxStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PxStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PxStatus::Internal
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn epsilon(e: i32) -> Result<Epsilon, Failure> {
    Epsilon::try_from(i64::from(e)).map_err(|m| Failure(PxStatus::InvalidArgument, m))
}

/// Message of the last failed call on this thread, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn px_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn px_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Longitudinal profile α(u).
pub struct PxProfile(Profile);

/// Sampled transverse field on a square periodic grid.
pub struct PxField(TransverseField);

/// Result of a propagation run.
pub struct PxRecord(PropagationRecord);

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

#[no_mangle]
pub unsafe extern "C" fn px_profile_constant(value: f64, out_profile: *mut *mut PxProfile) -> PxStatus {
    guard(|| {
        let o = out(out_profile, "out_profile")?;
        let p = Profile::constant(value);
        p.validate()?;
        *o = boxed(PxProfile(p));
        Ok(())
    })
}

/// `values[i]` on `[breaks[i-1], breaks[i])`; needs `n_values = n_breaks + 1`.
#[no_mangle]
pub unsafe extern "C" fn px_profile_piecewise(
    breaks: *const f64,
    n_breaks: usize,
    values: *const f64,
    n_values: usize,
    out_profile: *mut *mut PxProfile,
) -> PxStatus {
    guard(|| {
        let o = out(out_profile, "out_profile")?;
        let b = slice(breaks, n_breaks, "breaks")?.to_vec();
        let v = slice(values, n_values, "values")?.to_vec();
        *o = boxed(PxProfile(Profile::piecewise(b, v)?));
        Ok(())
    })
}

/// `α²(u) = mean_sq (1 + depth sin(angular_frequency u + phase))`.
#[no_mangle]
pub unsafe extern "C" fn px_profile_sinusoidal_squared(
    mean_sq: f64,
    depth: f64,
    angular_frequency: f64,
    phase: f64,
    out_profile: *mut *mut PxProfile,
) -> PxStatus {
    guard(|| {
        let o = out(out_profile, "out_profile")?;
        let p = Profile::SinusoidalSquared {
            mean_sq,
            depth,
            angular_frequency,
            phase,
        };
        p.validate()?;
        *o = boxed(PxProfile(p));
        Ok(())
    })
}

/// Linear interpolation of `(u[i], values[i])`, clamped outside the table.
#[no_mangle]
pub unsafe extern "C" fn px_profile_tabulated(
    u: *const f64,
    values: *const f64,
    len: usize,
    out_profile: *mut *mut PxProfile,
) -> PxStatus {
    guard(|| {
        let o = out(out_profile, "out_profile")?;
        let us = slice(u, len, "u")?.to_vec();
        let vs = slice(values, len, "values")?.to_vec();
        *o = boxed(PxProfile(Profile::tabulated(us, vs)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_profile_free(profile: *mut PxProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Coefficients of `2ik ∂ψ/∂u = −εΔψ + γ|ψ|²ψ + εk²α²(u)r²ψ`.
/// `epsilon` is +1 (atomic) or −1 (optical); `alpha` is borrowed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PxParams {
    pub k: f64,
    pub epsilon: i32,
    pub gamma: f64,
    pub alpha: *const PxProfile,
}

unsafe fn params(p: *const PxParams) -> Result<ParaxialParams, Failure> {
    let p = arg(p, "params")?;
    let alpha = arg(p.alpha, "params.alpha")?;
    Ok(ParaxialParams::new(p.k, epsilon(p.epsilon)?, p.gamma, alpha.0.clone())?)
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PxGrid {
    /// Points per side, a power of two ≥ 64.
    pub n: usize,
    pub extent: f64,
    pub du: f64,
    pub record_stride: usize,
}

impl From<PxGrid> for GridSpec {
    fn from(g: PxGrid) -> Self {
        GridSpec {
            n: g.n,
            extent: g.extent,
            du: g.du,
            record_stride: g.record_stride,
        }
    }
}

/// Normalized Gaussian `exp(−r²/2σ² + ikr²/2R)` centered on the grid.
/// `curvature_radius = 0` means a flat phase.
#[no_mangle]
pub unsafe extern "C" fn px_field_gaussian(
    grid: *const PxGrid,
    sigma: f64,
    k: f64,
    curvature_radius: f64,
    out_field: *mut *mut PxField,
) -> PxStatus {
    guard(|| {
        let o = out(out_field, "out_field")?;
        let g: GridSpec = (*arg(grid, "grid")?).into();
        let beam = GaussianBeam {
            curvature_radius: (curvature_radius != 0.0).then_some(curvature_radius),
            ..GaussianBeam::waist(sigma)
        };
        *o = boxed(PxField(make_gaussian(&beam, &g, k)?));
        Ok(())
    })
}

/// Field from `n*n` row-major samples given as interleaved (re, im) pairs,
/// `2*n*n` doubles. The field is normalized.
#[no_mangle]
pub unsafe extern "C" fn px_field_from_samples(
    n: usize,
    extent: f64,
    re_im: *const f64,
    out_field: *mut *mut PxField,
) -> PxStatus {
    guard(|| {
        let o = out(out_field, "out_field")?;
        let len = n
            .checked_mul(n)
            .and_then(|m| m.checked_mul(2))
            .ok_or_else(|| Failure(PxStatus::InvalidArgument, "grid too large".into()))?;
        let data = slice(re_im, len, "re_im")?;
        let values = data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let mut f = TransverseField::from_values(values, n, extent)?;
        f.normalize()?;
        *o = boxed(PxField(f));
        Ok(())
    })
}

/// Copies the samples as interleaved (re, im) pairs into `re_im`, which
/// holds `capacity` doubles; `out_len` receives `2*n*n`.
#[no_mangle]
pub unsafe extern "C" fn px_field_samples(
    field: *const PxField,
    re_im: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> PxStatus {
    guard(|| {
        let f = &arg(field, "field")?.0;
        let needed = 2 * f.values().len();
        *out(out_len, "out_len")? = needed;
        if capacity < needed {
            return Err(Failure(
                PxStatus::InvalidArgument,
                format!("buffer holds {capacity} doubles, {needed} needed"),
            ));
        }
        if re_im.is_null() {
            return Err(null("re_im"));
        }
        let buf = std::slice::from_raw_parts_mut(re_im, needed);
        for (c, v) in buf.chunks_exact_mut(2).zip(f.values()) {
            c[0] = v.re;
            c[1] = v.im;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_field_free(field: *mut PxField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PxMoments {
    pub r2: f64,
    pub q: f64,
    pub k_exp: f64,
    pub v_exp: f64,
    pub u_exp: f64,
    pub h0: f64,
    pub w2: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub mean_kx: f64,
    pub mean_ky: f64,
    pub epsilon: i32,
}

impl From<&MomentSet> for PxMoments {
    fn from(m: &MomentSet) -> Self {
        PxMoments {
            r2: m.r2,
            q: m.q,
            k_exp: m.k_exp,
            v_exp: m.v_exp,
            u_exp: m.u_exp,
            h0: m.h0,
            w2: m.w2,
            centroid_x: m.centroid[0],
            centroid_y: m.centroid[1],
            mean_kx: m.mean_wavevector[0],
            mean_ky: m.mean_wavevector[1],
            epsilon: i64::from(m.epsilon) as i32,
        }
    }
}

fn moment_set(m: &PxMoments) -> Result<MomentSet, Failure> {
    Ok(MomentSet {
        r2: m.r2,
        q: m.q,
        k_exp: m.k_exp,
        v_exp: m.v_exp,
        u_exp: m.u_exp,
        h0: m.h0,
        centroid: [m.centroid_x, m.centroid_y],
        mean_wavevector: [m.mean_kx, m.mean_ky],
        w2: m.w2,
        epsilon: epsilon(m.epsilon)?,
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_field_moments(
    field: *const PxField,
    params: *const PxParams,
    u: f64,
    out_moments: *mut PxMoments,
) -> PxStatus {
    guard(|| {
        let o = out(out_moments, "out_moments")?;
        let f = &arg(field, "field")?.0;
        let p = self::params(params)?;
        *o = PxMoments::from(&moments::compute_moments(f, &p, u)?);
        Ok(())
    })
}

/// `M_I⁴ = ε⟨r²⟩⟨Ĥ₀⟩ − ⟨Q̂⟩²`.
#[no_mangle]
pub unsafe extern "C" fn px_quality_factor(m: *const PxMoments, out_mi4: *mut f64) -> PxStatus {
    guard(|| {
        let o = out(out_mi4, "out_mi4")?;
        let ms = moment_set(arg(m, "moments")?)?;
        *o = moments::quality_factor(&ms, ms.epsilon);
        Ok(())
    })
}

/// Linear density `1/(2|a_s|)` at which a Gaussian reaches `M_I = 0`.
#[no_mangle]
pub unsafe extern "C" fn px_self_trapping_threshold(a_s: f64, out_n1d: *mut f64) -> PxStatus {
    guard(|| {
        *out(out_n1d, "out_n1d")? = moments::self_trapping_threshold(a_s)?;
        Ok(())
    })
}

/// Runs the split-step solver from `u0` to `u1`.
#[no_mangle]
pub unsafe extern "C" fn px_propagate(
    field: *const PxField,
    params: *const PxParams,
    grid: *const PxGrid,
    u0: f64,
    u1: f64,
    out_record: *mut *mut PxRecord,
) -> PxStatus {
    guard(|| {
        let o = out(out_record, "out_record")?;
        let f = &arg(field, "field")?.0;
        let p = self::params(params)?;
        let g: GridSpec = (*arg(grid, "grid")?).into();
        *o = boxed(PxRecord(split_step_propagate(f, &p, &g, (u0, u1))?));
        Ok(())
    })
}

/// One recorded sample. `k_exp` and `v_exp` are NaN when not available.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PxSample {
    pub u: f64,
    pub r2: f64,
    pub w2: f64,
    pub q: f64,
    pub k_exp: f64,
    pub v_exp: f64,
    pub u_exp: f64,
    pub h0: f64,
    pub mi4: f64,
    pub inv_r: f64,
}

impl From<&TrajectorySample> for PxSample {
    fn from(s: &TrajectorySample) -> Self {
        PxSample {
            u: s.u,
            r2: s.r2,
            w2: s.w2,
            q: s.q,
            k_exp: s.k_exp.unwrap_or(f64::NAN),
            v_exp: s.v_exp.unwrap_or(f64::NAN),
            u_exp: s.u_exp,
            h0: s.h0,
            mi4: s.mi4,
            inv_r: s.inv_r,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PxDiagnostics {
    pub steps: usize,
    pub max_norm_drift_per_step: f64,
    pub norm_drift: f64,
    /// NaN unless α is constant.
    pub energy_drift: f64,
    pub mi4_drift: f64,
    pub collapse_regime: bool,
}

/// Number of recorded samples; 0 for a null record.
#[no_mangle]
pub unsafe extern "C" fn px_record_len(record: *const PxRecord) -> usize {
    record.as_ref().map_or(0, |r| r.0.trajectory.len())
}

#[no_mangle]
pub unsafe extern "C" fn px_record_sample(
    record: *const PxRecord,
    index: usize,
    out_sample: *mut PxSample,
) -> PxStatus {
    guard(|| {
        let o = out(out_sample, "out_sample")?;
        let r = &arg(record, "record")?.0;
        let s = r.trajectory.samples().get(index).ok_or_else(|| {
            Failure(
                PxStatus::InvalidArgument,
                format!("sample {index} out of range ({} recorded)", r.trajectory.len()),
            )
        })?;
        *o = PxSample::from(s);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_record_diagnostics(record: *const PxRecord, out_diag: *mut PxDiagnostics) -> PxStatus {
    guard(|| {
        let o = out(out_diag, "out_diag")?;
        let d = arg(record, "record")?.0.diagnostics;
        *o = PxDiagnostics {
            steps: d.steps,
            max_norm_drift_per_step: d.max_norm_drift_per_step,
            norm_drift: d.norm_drift,
            energy_drift: d.energy_drift.unwrap_or(f64::NAN),
            mi4_drift: d.mi4_drift,
            collapse_regime: d.collapse_regime,
        };
        Ok(())
    })
}

/// Copy of the field at the end of the run, as a new handle.
#[no_mangle]
pub unsafe extern "C" fn px_record_final_field(record: *const PxRecord, out_field: *mut *mut PxField) -> PxStatus {
    guard(|| {
        let o = out(out_field, "out_field")?;
        *o = boxed(PxField(arg(record, "record")?.0.final_field.clone()));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_record_free(record: *mut PxRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Ray matrix `[[a, b], [c, d]]` with unit determinant.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PxMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<RayMatrix> for PxMatrix {
    fn from(m: RayMatrix) -> Self {
        PxMatrix {
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
        }
    }
}

fn ray(m: &PxMatrix) -> Result<RayMatrix, Failure> {
    Ok(RayMatrix::new(m.a, m.b, m.c, m.d)?)
}

#[no_mangle]
pub unsafe extern "C" fn px_free_matrix(u: f64, out_matrix: *mut PxMatrix) -> PxStatus {
    guard(|| {
        *out(out_matrix, "out_matrix")? = abcd::free_matrix(u).into();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_harmonic_matrix(alpha: f64, u: f64, out_matrix: *mut PxMatrix) -> PxStatus {
    guard(|| {
        *out(out_matrix, "out_matrix")? = abcd::harmonic_matrix(alpha, u)?.into();
        Ok(())
    })
}

/// `m2 · m1`: first `m1`, then `m2`.
#[no_mangle]
pub unsafe extern "C" fn px_compose(m2: *const PxMatrix, m1: *const PxMatrix, out_matrix: *mut PxMatrix) -> PxStatus {
    guard(|| {
        let o = out(out_matrix, "out_matrix")?;
        let (a, b) = (ray(arg(m2, "m2")?)?, ray(arg(m1, "m1")?)?);
        *o = abcd::compose(&a, &b).into();
        Ok(())
    })
}

/// Integrates `M′ = [[0, 1], [−α², 0]] M` from the identity over `[u0, u1]`.
#[no_mangle]
pub unsafe extern "C" fn px_matrix_ode(
    alpha: *const PxProfile,
    u0: f64,
    u1: f64,
    step: f64,
    out_matrix: *mut PxMatrix,
) -> PxStatus {
    guard(|| {
        let o = out(out_matrix, "out_matrix")?;
        let p = &arg(alpha, "alpha")?.0;
        *o = abcd::matrix_ode(p, (u0, u1), step)?.into();
        Ok(())
    })
}

/// `1/q = 1/R + i·imag` with `imag = M_I²/(k w²)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PxInverseQ {
    pub inv_r: f64,
    pub imag: f64,
}

impl From<InverseCurvature> for PxInverseQ {
    fn from(q: InverseCurvature) -> Self {
        PxInverseQ {
            inv_r: q.inv_r,
            imag: q.imag,
        }
    }
}

fn inverse_q(q: &PxInverseQ) -> Result<InverseCurvature, Failure> {
    Ok(InverseCurvature::new(q.inv_r, q.imag)?)
}

/// Complex curvature of a beam from its moments and `M_I⁴`.
#[no_mangle]
pub unsafe extern "C" fn px_q_from_moments(m: *const PxMoments, mi4: f64, k: f64, out_q: *mut PxInverseQ) -> PxStatus {
    guard(|| {
        let o = out(out_q, "out_q")?;
        let ms = moment_set(arg(m, "moments")?)?;
        *o = abcd::q_from_moments(&ms, mi4, k, ms.epsilon)?.into();
        Ok(())
    })
}

/// Möbius action of a ray matrix on `q`.
#[no_mangle]
pub unsafe extern "C" fn px_propagate_q(q: *const PxInverseQ, m: *const PxMatrix, out_q: *mut PxInverseQ) -> PxStatus {
    guard(|| {
        let o = out(out_q, "out_q")?;
        let q = inverse_q(arg(q, "q")?)?;
        *o = abcd::propagate_q(&q, &ray(arg(m, "m")?)?)?.into();
        Ok(())
    })
}

/// `w² = M_I²/(k·imag)`.
#[no_mangle]
pub unsafe extern "C" fn px_q_width2(q: *const PxInverseQ, mi4: f64, k: f64, out_w2: *mut f64) -> PxStatus {
    guard(|| {
        let o = out(out_w2, "out_w2")?;
        *o = inverse_q(arg(q, "q")?)?.width2(mi4, k);
        Ok(())
    })
}
