//! Ray matrices and the complex-curvature law.
//!
//! `1/q = 1/R + i M_I²/(k w²)` is propagated by the Möbius map
//! `1/q₂ = (C + D/q₁)/(A + B/q₁)`, which is the usual `q₂ = (Aq₁ + B)/(Cq₁ + D)`
//! written on the inverse so that a waist (1/R = 0) stays finite. The matrix
//! follows `d/du [A B; C D] = [0 1; −α²(u) 0]·[A B; C D]` from the identity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::moments::{segment_alpha_sq, segments, step_count, MomentSet};
use crate::params::Epsilon;
use crate::profile::Profile;

/// Determinant tolerance enforced on construction.
pub const DET_TOLERANCE: f64 = 1e-9;

/// 2×2 real ray matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = RayMatrix { a, b, c, d };
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::InvalidParameter("ray matrix entries must be finite".into()));
        }
        if m.det_drift() > DET_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "ray matrix determinant {} is not 1",
                m.det()
            )));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        RayMatrix {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn det_drift(&self) -> f64 {
        (self.det() - 1.0).abs()
    }

    fn mul(&self, rhs: &RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// Scales all entries by `det^{−1/2}`.
    fn renormalized(self) -> RayMatrix {
        let det = self.det();
        if det > 0.0 {
            let s = det.sqrt().recip();
            RayMatrix {
                a: self.a * s,
                b: self.b * s,
                c: self.c * s,
                d: self.d * s,
            }
        } else {
            self
        }
    }

    pub fn max_abs_diff(&self, other: &RayMatrix) -> f64 {
        [self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Free propagation over `u`: `[[1, u], [0, 1]]`.
pub fn free_matrix(u: f64) -> RayMatrix {
    RayMatrix {
        a: 1.0,
        b: u,
        c: 0.0,
        d: 1.0,
    }
}

/// Propagation over `u` in a constant quadratic potential of strength `α₀`.
pub fn harmonic_matrix(alpha0: f64, u: f64) -> Result<RayMatrix> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "harmonic matrix needs alpha0 > 0, got {alpha0} (use free_matrix for 0)"
        )));
    }
    let (s, c) = (alpha0 * u).sin_cos();
    Ok(RayMatrix {
        a: c,
        b: s / alpha0,
        c: -alpha0 * s,
        d: c,
    })
}

/// Matrix of `m1` followed by `m2`, i.e. the product `m2·m1`.
///
/// The product is rescaled by `det^{−1/2}` so that long chains keep a unit
/// determinant to rounding.
pub fn compose(m2: &RayMatrix, m1: &RayMatrix) -> RayMatrix {
    m2.mul(m1).renormalized()
}

/// Integrates the ray-matrix ODE from the identity at `span.0` to `span.1`.
pub fn matrix_ode(alpha: &Profile, span: (f64, f64), step: f64) -> Result<RayMatrix> {
    let mut it = MatrixIntegrator::new(alpha, span.0, step)?;
    it.advance_to(span.1)?;
    Ok(it.matrix())
}

/// Ray-matrix ODE state that can be advanced to successive `u` values.
///
/// Uses fixed-step RK4 split at the profile's jump points, with the step
/// shortened uniformly per segment; every step is renormalized to unit
/// determinant.
#[derive(Debug, Clone)]
pub struct MatrixIntegrator<'a> {
    alpha: &'a Profile,
    u: f64,
    m: RayMatrix,
    step: f64,
}

impl<'a> MatrixIntegrator<'a> {
    pub fn new(alpha: &'a Profile, u0: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
        }
        alpha.validate()?;
        Ok(MatrixIntegrator {
            alpha,
            u: u0,
            m: RayMatrix::identity(),
            step,
        })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn matrix(&self) -> RayMatrix {
        self.m
    }

    pub fn advance_to(&mut self, u1: f64) -> Result<RayMatrix> {
        if u1 < self.u {
            return Err(Error::InvalidParameter(format!(
                "cannot integrate backwards from {} to {u1}",
                self.u
            )));
        }
        self.alpha.check_nonnegative_on(self.u, u1)?;
        for (a, b) in segments(self.u, u1, self.alpha.breakpoints()) {
            let alpha_sq = segment_alpha_sq(self.alpha, a, b);
            let n = step_count(b - a, self.step);
            let h = (b - a) / n as f64;
            for i in 0..n {
                self.m = rk4_matrix(&alpha_sq, a + i as f64 * h, h, self.m).renormalized();
            }
        }
        self.u = u1;
        Ok(self.m)
    }
}

fn rk4_matrix(alpha_sq: &dyn Fn(f64) -> f64, u: f64, h: f64, m: RayMatrix) -> RayMatrix {
    let f = |u: f64, m: &RayMatrix| {
        let a2 = alpha_sq(u);
        RayMatrix {
            a: m.c,
            b: m.d,
            c: -a2 * m.a,
            d: -a2 * m.b,
        }
    };
    let axpy = |m: &RayMatrix, k: &RayMatrix, s: f64| RayMatrix {
        a: m.a + s * k.a,
        b: m.b + s * k.b,
        c: m.c + s * k.c,
        d: m.d + s * k.d,
    };
    let k1 = f(u, &m);
    let k2 = f(u + 0.5 * h, &axpy(&m, &k1, 0.5 * h));
    let k3 = f(u + 0.5 * h, &axpy(&m, &k2, 0.5 * h));
    let k4 = f(u + h, &axpy(&m, &k3, h));
    RayMatrix {
        a: m.a + h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a),
        b: m.b + h / 6.0 * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b),
        c: m.c + h / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
        d: m.d + h / 6.0 * (k1.d + 2.0 * k2.d + 2.0 * k3.d + k4.d),
    }
}

/// `1/q = 1/R + i M_I²/(k w²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseCurvature {
    pub inv_r: f64,
    pub imag: f64,
}

impl InverseCurvature {
    pub fn new(inv_r: f64, imag: f64) -> Result<Self> {
        if !(imag > 0.0 && imag.is_finite() && inv_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "1/q needs a positive finite imaginary part, got {inv_r} + {imag}i"
            )));
        }
        Ok(InverseCurvature { inv_r, imag })
    }

    /// Waist of width `w²` with quality factor `M_I⁴`.
    pub fn waist(w2: f64, mi4: f64, k: f64) -> Result<Self> {
        Self::new(0.0, mi4.sqrt() / (k * w2))
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.inv_r, self.imag)
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn q(&self) -> Complex64 {
        self.as_complex().inv()
    }

    /// `w² = M_I²/(k·Im(1/q))`.
    pub fn width2(&self, mi4: f64, k: f64) -> f64 {
        mi4.sqrt() / (k * self.imag)
    }
}

/// Möbius action of `m` on `q`.
pub fn propagate_q(q1: &InverseCurvature, m: &RayMatrix) -> Result<InverseCurvature> {
    let p = q1.as_complex();
    let den = m.a + m.b * p;
    if !(den.norm() > 1e-300) {
        return Err(Error::SingularPropagation(den.norm()));
    }
    let p2 = (m.c + m.d * p) / den;
    if !(p2.im > 0.0) || !p2.re.is_finite() {
        return Err(Error::SingularPropagation(den.norm()));
    }
    Ok(InverseCurvature {
        inv_r: p2.re,
        imag: p2.im,
    })
}

/// `1/q` of a beam from its centered moments: `1/R = εQ_c/(k w²)` and
/// `Im(1/q) = √M_I⁴/(k w²)`.
pub fn q_from_moments(m: &MomentSet, mi4: f64, k: f64, epsilon: Epsilon) -> Result<InverseCurvature> {
    if !(mi4 > 0.0) {
        return Err(Error::CollapseRegime(mi4));
    }
    if !(m.w2 > 0.0) {
        return Err(Error::DegenerateBeam(format!("w2 = {}", m.w2)));
    }
    InverseCurvature::new(epsilon.value() * m.q_centered() / (k * m.w2), mi4.sqrt() / (k * m.w2))
}

/// Result of propagating a linear Gaussian beam through a ray matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussian {
    pub q2: InverseCurvature,
    /// Output width with `M_I = 1`.
    pub w2: f64,
    /// Per-axis complex amplitude ratio `(A + B/q₁)^{−1/2}` on the principal
    /// branch; a 2D isotropic field picks up its square.
    pub amplitude: Complex64,
}

/// `1/q` of the field's own Gaussian phase `exp(±ikr²/2q)`.
///
/// For ε = +1 the field is `exp(ikr²/2q)` and this is the moment `1/q`; for
/// ε = −1 the field is `exp(−ikr²/2q)`, whose `1/q` is the complex conjugate.
pub fn field_inverse_q(q: &InverseCurvature, epsilon: Epsilon) -> Complex64 {
    match epsilon {
        Epsilon::Plus => q.as_complex(),
        Epsilon::Minus => q.as_complex().conj(),
    }
}

/// Linear (γ = 0) Gaussian propagation: q-law, width and amplitude factor.
pub fn linear_gaussian_propagate(
    q1: &InverseCurvature,
    m: &RayMatrix,
    k: f64,
    epsilon: Epsilon,
) -> Result<LinearGaussian> {
    let q2 = propagate_q(q1, m)?;
    let z = m.a + m.b * field_inverse_q(q1, epsilon);
    Ok(LinearGaussian {
        q2,
        w2: q2.width2(1.0, k),
        amplitude: z.sqrt().inv(),
    })
}

/// Follows `(A + B/q₁)^{−1/2}` along a path of matrices, choosing at each
/// point the square-root branch closest to the previous value. Starts at 1,
/// the identity's value.
#[derive(Debug, Clone)]
pub struct AmplitudeTracker {
    q1: Complex64,
    last: Complex64,
}

impl AmplitudeTracker {
    pub fn new(q1: &InverseCurvature, epsilon: Epsilon) -> Self {
        AmplitudeTracker {
            q1: field_inverse_q(q1, epsilon),
            last: Complex64::new(1.0, 0.0),
        }
    }

    pub fn next(&mut self, m: &RayMatrix) -> Complex64 {
        let v = (m.a + m.b * self.q1).sqrt().inv();
        self.last = if (v - self.last).norm() <= (-v - self.last).norm() {
            v
        } else {
            -v
        };
        self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFlavor {
    /// ε = −1 convention.
    Optical,
    /// ε = +1 convention.
    Atomic,
}

/// One-dimensional propagator `K(x, x′)` for `ψ₂(x) = ∫K(x, x′)ψ₁(x′)dx′`:
///
/// ```text
/// optical: √(ik/2πB) exp(−(ik/2B)(A x′² − 2 x′ x + D x²))
/// atomic:  √(k/2πiB) exp(+(ik/2B)(A x′² − 2 x′ x + D x²))
/// ```
///
/// The atomic prefactor is the complex conjugate of the optical one, so both
/// kernels tend to δ(x − x′) as B → 0⁺. Principal square roots.
pub fn propagator_kernel(x: f64, x_in: f64, m: &RayMatrix, k: f64, flavor: KernelFlavor) -> Result<Complex64> {
    if m.b == 0.0 {
        return Err(Error::ThinElement);
    }
    let quad = m.a * x_in * x_in - 2.0 * x_in * x + m.d * x * x;
    let i = Complex64::new(0.0, 1.0);
    let base = k / (2.0 * PI * m.b);
    let (pref, sign) = match flavor {
        KernelFlavor::Optical => ((i * base).sqrt(), -1.0),
        KernelFlavor::Atomic => ((-i * base).sqrt(), 1.0),
    };
    Ok(pref * Complex64::from_polar(1.0, sign * k * quad / (2.0 * m.b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &RayMatrix, b: &RayMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) < tol
    }

    #[test]
    fn constructors() {
        assert!(RayMatrix::new(1.0, 2.0, 0.0, 1.0).is_ok());
        assert!(RayMatrix::new(2.0, 0.0, 0.0, 1.0).is_err());
        assert!(RayMatrix::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
        assert_eq!(free_matrix(0.0), RayMatrix::identity());
        let m = free_matrix(3.0);
        assert_eq!((m.b, m.det()), (3.0, 1.0));
        assert!(harmonic_matrix(0.0, 1.0).is_err());
        assert!(harmonic_matrix(-1.0, 1.0).is_err());
    }

    #[test]
    fn harmonic_special_points() {
        let a = 1.7;
        let full = harmonic_matrix(a, 2.0 * PI / a).unwrap();
        assert!(close(&full, &RayMatrix::identity(), 1e-14));
        let quarter = harmonic_matrix(a, 0.5 * PI / a).unwrap();
        assert!(close(
            &quarter,
            &RayMatrix {
                a: 0.0,
                b: 1.0 / a,
                c: -a,
                d: 0.0
            },
            1e-14
        ));
        let half = harmonic_matrix(a, PI / a).unwrap();
        assert!(close(
            &half,
            &RayMatrix {
                a: -1.0,
                b: 0.0,
                c: 0.0,
                d: -1.0
            },
            1e-14
        ));
        let q = InverseCurvature::new(0.3, 0.8).unwrap();
        let q2 = propagate_q(&q, &half).unwrap();
        assert!((q2.inv_r - q.inv_r).abs() < 1e-14 && (q2.imag - q.imag).abs() < 1e-14);
    }

    #[test]
    fn group_laws() {
        assert!(close(
            &compose(&free_matrix(1.2), &free_matrix(0.7)),
            &free_matrix(1.9),
            1e-15
        ));
        let h = |u| harmonic_matrix(0.9, u).unwrap();
        assert!(close(&compose(&h(0.4), &h(1.1)), &h(1.5), 1e-14));
        let m = h(0.3);
        assert_eq!(compose(&RayMatrix::identity(), &m), m);
    }

    #[test]
    fn det_survives_a_million_compositions() {
        // Golden-ratio sequence of steps: the product stays on the bounded
        // one-parameter subgroup, so it can be checked against the closed form.
        let alpha = 1.3;
        let golden = 0.618_033_988_749_894_9;
        let mut m = RayMatrix::identity();
        let mut total = 0.0;
        for i in 0..1_000_000u64 {
            let u = ((i as f64 * golden).fract() - 0.5) * 2.0;
            total += u;
            m = compose(&harmonic_matrix(alpha, u).unwrap(), &m);
        }
        assert!(m.det_drift() < 1e-6);
        assert!(close(&m, &harmonic_matrix(alpha, total).unwrap(), 1e-6));
    }

    #[test]
    fn matrix_ode_reductions() {
        let free = matrix_ode(&Profile::zero(), (0.0, 2.5), 1e-3).unwrap();
        assert!(close(&free, &free_matrix(2.5), 1e-10));
        let h = matrix_ode(&Profile::constant(0.8), (0.0, 5.0), 1e-3).unwrap();
        assert!(close(&h, &harmonic_matrix(0.8, 5.0).unwrap(), 1e-8));
        let pw = Profile::piecewise(vec![1.0, 2.2], vec![0.5, 1.5, 0.9]).unwrap();
        let m = matrix_ode(&pw, (0.0, 3.0), 1e-3).unwrap();
        let oracle = compose(
            &harmonic_matrix(0.9, 0.8).unwrap(),
            &compose(&harmonic_matrix(1.5, 1.2).unwrap(), &harmonic_matrix(0.5, 1.0).unwrap()),
        );
        assert!(close(&m, &oracle, 1e-8));
        assert!(matrix_ode(&Profile::zero(), (0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn integrator_advances_in_pieces() {
        let p = Profile::constant(1.1);
        let mut it = MatrixIntegrator::new(&p, 0.0, 1e-3).unwrap();
        it.advance_to(1.0).unwrap();
        let m = it.advance_to(2.0).unwrap();
        assert!(close(&m, &harmonic_matrix(1.1, 2.0).unwrap(), 1e-10));
        assert!(it.advance_to(1.0).is_err());
    }

    #[test]
    fn free_q_shift() {
        // q₂ = q₁ + u
        let q1 = InverseCurvature::new(0.2, 0.5).unwrap();
        let q2 = propagate_q(&q1, &free_matrix(1.7)).unwrap();
        assert!((q2.q() - (q1.q() + 1.7)).norm() < 1e-13);
    }

    #[test]
    fn quarter_period_waist_exchange() {
        let (k, mi4, w1, alpha) = (2.0, 1.6, 0.7, 1.3);
        let q1 = InverseCurvature::waist(w1, mi4, k).unwrap();
        let q2 = propagate_q(&q1, &harmonic_matrix(alpha, 0.5 * PI / alpha).unwrap()).unwrap();
        assert!(q2.inv_r.abs() < 1e-12);
        // w₂² = w₁²(B M_I²/(k w₁²))² with A = 0, B = 1/α
        let expected = mi4 / (k * k * alpha * alpha * w1);
        assert!((q2.width2(mi4, k) - expected).abs() < 1e-12);
    }

    #[test]
    fn q_from_moments_values() {
        let m = MomentSet {
            r2: 1.0,
            q: 0.0,
            k_exp: 1.0,
            v_exp: 0.0,
            u_exp: 0.0,
            h0: 1.0,
            centroid: [0.0, 0.0],
            mean_wavevector: [0.0, 0.0],
            w2: 1.0,
            epsilon: Epsilon::Plus,
        };
        let q = q_from_moments(&m, 1.0, 1.0, Epsilon::Plus).unwrap();
        assert_eq!((q.inv_r, q.imag), (0.0, 1.0));
        let a = q_from_moments(&MomentSet { q: 0.4, ..m }, 1.2, 1.0, Epsilon::Plus).unwrap();
        let b = q_from_moments(&MomentSet { q: -0.4, ..m }, 1.2, 1.0, Epsilon::Plus).unwrap();
        assert_eq!(a.inv_r, -b.inv_r);
        assert_eq!(a.imag, b.imag);
        assert!(matches!(
            q_from_moments(&m, 0.0, 1.0, Epsilon::Plus),
            Err(Error::CollapseRegime(_))
        ));
    }

    #[test]
    fn linear_free_width_law() {
        // With the 1/e² intensity radius w_o² = 2w²: w_o²(u) = w_o²(0)(1 + (2u/(k w_o²(0)))²).
        let k = 3.0;
        let w1 = 0.8;
        let q1 = InverseCurvature::waist(w1, 1.0, k).unwrap();
        for eps in [Epsilon::Minus, Epsilon::Plus] {
            for u in [0.0, 0.5, 2.0] {
                let out = linear_gaussian_propagate(&q1, &free_matrix(u), k, eps).unwrap();
                let wo = 2.0 * w1;
                let expected = wo * (1.0 + (2.0 * u / (k * wo)).powi(2));
                assert!((2.0 * out.w2 - expected).abs() < 1e-12);
            }
        }
        let id = linear_gaussian_propagate(&q1, &RayMatrix::identity(), k, Epsilon::Plus).unwrap();
        assert_eq!(id.q2, q1);
        assert_eq!(id.amplitude, Complex64::new(1.0, 0.0));
        let period = harmonic_matrix(0.6, 2.0 * PI / 0.6).unwrap();
        let out = linear_gaussian_propagate(&q1, &period, k, Epsilon::Minus).unwrap();
        assert!((out.q2.as_complex() - q1.as_complex()).norm() < 1e-12);
        assert!((out.amplitude.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_tracker_is_continuous_past_the_cut() {
        let q1 = InverseCurvature::waist(1.0, 1.0, 1.0).unwrap();
        let alpha = 1.0;
        let mut t = AmplitudeTracker::new(&q1, Epsilon::Plus);
        let mut prev = Complex64::new(1.0, 0.0);
        for i in 1..=4000 {
            let u = i as f64 * 2.0 * PI / 4000.0 * 2.0;
            let v = t.next(&harmonic_matrix(alpha, u).unwrap());
            assert!((v - prev).norm() < 0.01);
            prev = v;
        }
        // ground mode: (A + B/q)^{-1/2} = e^{−iαu/2}, back to 1 after two periods
        assert!((prev - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    /// Trapezoid convolution of `f` with the kernel at output point `x`.
    fn convolve(f: &dyn Fn(f64) -> Complex64, x: f64, m: &RayMatrix, k: f64, flavor: KernelFlavor) -> Complex64 {
        convolve_n(f, x, m, k, flavor, 24_000)
    }

    fn convolve_n(
        f: &dyn Fn(f64) -> Complex64,
        x: f64,
        m: &RayMatrix,
        k: f64,
        flavor: KernelFlavor,
        n: usize,
    ) -> Complex64 {
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|j| {
                let xi = lo + j as f64 * h;
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                w * propagator_kernel(x, xi, m, k, flavor).unwrap() * f(xi)
            })
            .sum::<Complex64>()
            * h
    }

    /// 1D Gaussian `exp(±ikx²/2q)` as seen by the field for each flavor.
    fn gaussian_1d(p: Complex64, k: f64, flavor: KernelFlavor) -> impl Fn(f64) -> Complex64 {
        let s = match flavor {
            KernelFlavor::Atomic => 1.0,
            KernelFlavor::Optical => -1.0,
        };
        move |x| (Complex64::new(0.0, s * k * x * x / 2.0) * p).exp()
    }

    #[test]
    fn kernel_convolution_matches_q_law() {
        let k = 1.5;
        let q1 = InverseCurvature::new(0.1, 0.9).unwrap();
        for (flavor, eps) in [
            (KernelFlavor::Atomic, Epsilon::Plus),
            (KernelFlavor::Optical, Epsilon::Minus),
        ] {
            for m in [free_matrix(1.3), harmonic_matrix(0.7, 1.9).unwrap()] {
                let out = linear_gaussian_propagate(&q1, &m, k, eps).unwrap();
                let f_in = gaussian_1d(field_inverse_q(&q1, eps), k, flavor);
                let f_out = gaussian_1d(field_inverse_q(&out.q2, eps), k, flavor);
                for x in [-1.0, 0.0, 0.4, 1.7] {
                    let num = convolve(&f_in, x, &m, k, flavor);
                    let exact = out.amplitude * f_out(x);
                    assert!((num - exact).norm() < 1e-6, "{flavor:?} x={x}: {num} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn separable_2d_kernel_matches_per_axis_q_laws() {
        let k = 1.0;
        let (ax, ay, u) = (0.6, 1.1, 0.9);
        let mx = harmonic_matrix(ax, u).unwrap();
        let my = harmonic_matrix(ay, u).unwrap();
        let qx = InverseCurvature::new(0.0, 1.0).unwrap();
        let qy = InverseCurvature::new(0.2, 0.6).unwrap();
        let flavor = KernelFlavor::Atomic;
        let ox = linear_gaussian_propagate(&qx, &mx, k, Epsilon::Plus).unwrap();
        let oy = linear_gaussian_propagate(&qy, &my, k, Epsilon::Plus).unwrap();
        let fx = gaussian_1d(qx.as_complex(), k, flavor);
        let fy = gaussian_1d(qy.as_complex(), k, flavor);
        let (lo, n) = (-9.0, 300);
        let h = -2.0 * lo / n as f64;
        for (x, y) in [(0.0, 0.0), (0.5, -0.7), (-1.2, 0.3)] {
            let mut sum = Complex64::new(0.0, 0.0);
            for jy in 0..=n {
                let yi = lo + jy as f64 * h;
                let wy = if jy == 0 || jy == n { 0.5 } else { 1.0 };
                let ky = propagator_kernel(y, yi, &my, k, flavor).unwrap() * fy(yi) * wy;
                for jx in 0..=n {
                    let xi = lo + jx as f64 * h;
                    let wx = if jx == 0 || jx == n { 0.5 } else { 1.0 };
                    sum += propagator_kernel(x, xi, &mx, k, flavor).unwrap() * fx(xi) * wx * ky;
                }
            }
            sum *= h * h;
            let exact = ox.amplitude
                * gaussian_1d(ox.q2.as_complex(), k, flavor)(x)
                * oy.amplitude
                * gaussian_1d(oy.q2.as_complex(), k, flavor)(y);
            assert!((sum - exact).norm() < 1e-6, "{sum} vs {exact}");
        }
    }

    #[test]
    fn kernel_delta_limit() {
        let f = |x: f64| Complex64::new(1.0 + 0.5 * x, 0.2 * x) * (-(x - 0.3).powi(2)).exp();
        for flavor in [KernelFlavor::Atomic, KernelFlavor::Optical] {
            let mut errs = Vec::new();
            for u in [1e-1, 1e-2, 1e-3] {
                let v = convolve_n(&f, 0.5, &free_matrix(u), 1.0, flavor, 200_000);
                errs.push((v - f(0.5)).norm());
            }
            // error is O(u): the kernel reproduces f as u → 0⁺
            assert!(
                errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1],
                "{flavor:?}: {errs:?}"
            );
            assert!(errs[2] < 2e-3, "{flavor:?}: {errs:?}");
        }
    }

    #[test]
    fn kernel_symmetric_when_a_equals_d() {
        let m = harmonic_matrix(0.8, 1.1).unwrap();
        for flavor in [KernelFlavor::Atomic, KernelFlavor::Optical] {
            let a = propagator_kernel(0.3, -1.2, &m, 2.0, flavor).unwrap();
            let b = propagator_kernel(-1.2, 0.3, &m, 2.0, flavor).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
        assert!(matches!(
            propagator_kernel(0.0, 0.0, &RayMatrix::identity(), 1.0, KernelFlavor::Atomic),
            Err(Error::ThinElement)
        ));
    }

    fn arb_matrix() -> impl Strategy<Value = RayMatrix> {
        prop_oneof![
            (-3.0..3.0f64).prop_map(free_matrix),
            (0.1..2.0f64, -4.0..4.0f64).prop_map(|(a, u)| harmonic_matrix(a, u).unwrap()),
        ]
    }

    fn arb_q() -> impl Strategy<Value = InverseCurvature> {
        (-2.0..2.0f64, 0.05..3.0f64).prop_map(|(r, i)| InverseCurvature::new(r, i).unwrap())
    }

    proptest! {
        #[test]
        fn mobius_consistency(q in arb_q(), m1 in arb_matrix(), m2 in arb_matrix()) {
            let chained = propagate_q(&propagate_q(&q, &m1).unwrap(), &m2).unwrap();
            let direct = propagate_q(&q, &compose(&m2, &m1)).unwrap();
            let scale = 1.0 + chained.as_complex().norm();
            prop_assert!((chained.as_complex() - direct.as_complex()).norm() < 1e-12 * scale);
        }

        #[test]
        fn q_law_satisfies_input_output_relations(
            q in arb_q(), m in arb_matrix(), mi4 in 0.2..5.0f64, k in 0.5..3.0f64
        ) {
            // w₂² = w₁²[(A + B/R₁)² + (B M_I²/(k w₁²))²]
            // w₂²/R₂ = w₁²[(A + B/R₁)(C + D/R₁) + B D M_I⁴/(k² w₁⁴)]
            let w1 = q.width2(mi4, k);
            let t = mi4.sqrt() / (k * w1);
            let w2 = w1 * ((m.a + m.b * q.inv_r).powi(2) + (m.b * t).powi(2));
            let w2_over_r = w1 * ((m.a + m.b * q.inv_r) * (m.c + m.d * q.inv_r) + m.b * m.d * t * t);
            let out = propagate_q(&q, &m).unwrap();
            let got = out.width2(mi4, k);
            prop_assert!((got - w2).abs() < 1e-9 * (1.0 + w2));
            prop_assert!((got * out.inv_r - w2_over_r).abs() < 1e-9 * (1.0 + w2_over_r.abs() + w2));
        }

        #[test]
        fn det_preserved_by_short_chains(ms in proptest::collection::vec(arb_matrix(), 1..50)) {
            let m = ms.iter().fold(RayMatrix::identity(), |acc, m| compose(m, &acc));
            // rounding in ad − bc scales with the entries
            let scale = (m.a * m.d).abs() + (m.b * m.c).abs();
            prop_assert!(m.det_drift() < 1e-12 * scale.max(1.0));
        }

        #[test]
        fn q_stays_physical(q in arb_q(), m in arb_matrix()) {
            prop_assert!(propagate_q(&q, &m).unwrap().imag > 0.0);
        }
    }
}
