//! Split-step spectral propagation of
//!
//! ```text
//! 2ik ∂ψ/∂u = −ε Δ⊥ψ + γ|ψ|²ψ + ε k² α²(u) r² ψ
//! ```
//!
//! Strang splitting: half a step of pointwise phase, a full kinetic step in
//! Fourier space, half a step of pointwise phase. Adjacent pointwise halves are
//! fused into one pass (|ψ| is untouched by a phase, so the nonlinear phase of
//! the fused pass is exact) and the field is only brought back in sync when it
//! is observed.

pub mod field;
pub mod spectral;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{segments, step_count, MomentEngine, MomentTrajectory, TrajectorySample};
use crate::params::ParaxialParams;
use field::TransverseField;
use spectral::Spectral2d;

/// Largest phase any pointwise or physical kinetic factor may add in one step
/// under the default step rule.
pub const MAX_PHASE_PER_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per side, a power of two ≥ 64.
    pub n: usize,
    /// Side length L.
    pub extent: f64,
    /// Step in u; segments are split uniformly so no step exceeds it.
    pub du: f64,
    /// Steps between recorded moment samples.
    pub record_stride: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 64 || !self.n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid n must be a power of two >= 64, got {}",
                self.n
            )));
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid extent must be positive, got {}",
                self.extent
            )));
        }
        if !(self.du.is_finite() && self.du > 0.0) {
            return Err(Error::InvalidParameter(format!("du must be positive, got {}", self.du)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n as f64
    }
}

/// Step size keeping every phase increment below [`MAX_PHASE_PER_STEP`].
///
/// Counts the nonlinear phase at the field peak, the trap phase at the grid
/// corner for the largest α on the span, and the physical kinetic phase
/// ⟨K̂⟩/2k. Grid-scale kinetic phases are not counted: the kinetic factor is
/// exact in Fourier space.
pub fn default_du(field: &TransverseField, params: &ParaxialParams, span: (f64, f64)) -> Result<f64> {
    let k = params.k;
    let peak2 = field.peak().powi(2);
    let half = field.extent() / 2.0;
    let r2_corner = 2.0 * half * half;
    let alpha_max = params.alpha.max_abs_on(span.0.min(span.1), span.0.max(span.1));
    let k_exp = MomentEngine::for_field(field).compute(field, params, span.0)?.k_exp;
    let theta = params.gamma.abs() * peak2 + k * k * alpha_max * alpha_max * r2_corner + k_exp;
    if !(theta > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * MAX_PHASE_PER_STEP * k / theta)
}

#[derive(Debug, Clone, Default)]
pub struct PropagateOptions {
    /// u values at which to keep a copy of the field; steps land on them exactly.
    pub snapshots: Vec<f64>,
    /// Origin for the recorded moments (e.g. `(0, −g/ω⊥²)`).
    pub moment_origin: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub u: f64,
    pub field: TransverseField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest |Δnorm| across a single step.
    pub max_norm_drift_per_step: f64,
    /// |norm(end) − norm(start)|.
    pub norm_drift: f64,
    /// Relative drift of ⟨H⟩ over the run; only defined for constant α.
    pub energy_drift: Option<f64>,
    /// Largest relative drift of M_I⁴ across the recorded samples.
    pub mi4_drift: f64,
    /// M_I⁴ ≤ 0 at the start: the attractive collapse regime.
    pub collapse_regime: bool,
}

#[derive(Debug, Clone)]
pub struct PropagationRecord {
    pub trajectory: MomentTrajectory,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    pub final_field: TransverseField,
    pub final_u: f64,
}

/// `⟨Ĥ⟩ = ε⟨K̂⟩ + ⟨V̂⟩ + ε⟨Û⟩`.
pub fn effective_energy(field: &TransverseField, params: &ParaxialParams, u: f64) -> Result<f64> {
    let m = MomentEngine::for_field(field).compute(field, params, u)?;
    Ok(m.h0 + params.eps() * m.u_exp)
}

/// Propagates `field0` from `span.0` to `span.1`, recording moments every
/// `grid.record_stride` steps plus the first and last step.
pub fn split_step_propagate(
    field0: &TransverseField,
    params: &ParaxialParams,
    grid: &GridSpec,
    span: (f64, f64),
) -> Result<PropagationRecord> {
    split_step_propagate_with(field0, params, grid, span, &PropagateOptions::default())
}

pub fn split_step_propagate_with(
    field0: &TransverseField,
    params: &ParaxialParams,
    grid: &GridSpec,
    span: (f64, f64),
    options: &PropagateOptions,
) -> Result<PropagationRecord> {
    grid.validate()?;
    let (u0, u1) = span;
    if !(u0.is_finite() && u1.is_finite() && u1 >= u0) {
        return Err(Error::InvalidParameter(format!("invalid span [{u0}, {u1}]")));
    }
    params.validate_span(u0, u1)?;
    if field0.n() != grid.n || field0.extent() != grid.extent {
        return Err(Error::InvalidParameter(format!(
            "field grid (n = {}, L = {}) does not match grid spec (n = {}, L = {})",
            field0.n(),
            field0.extent(),
            grid.n,
            grid.extent
        )));
    }
    field0.check_normalized()?;
    field0.check_boundary(u0)?;
    if let Some(bad) = options.snapshots.iter().find(|s| !(**s >= u0 && **s <= u1)) {
        return Err(Error::InvalidParameter(format!("snapshot u = {bad} outside span")));
    }

    let mut state = Stepper::new(field0.clone(), params);
    let mut engine = MomentEngine::for_field(field0);
    let mut trajectory = MomentTrajectory::new();
    let mut snapshots = Vec::new();
    let origin = options.moment_origin;
    let k = params.k;

    let record = |engine: &mut MomentEngine, f: &TransverseField, u: f64, t: &mut MomentTrajectory| -> Result<()> {
        let m = engine.compute_about(f, params, u, origin)?;
        t.push(TrajectorySample::from_moments(u, &m, k))
    };

    record(&mut engine, &state.field, u0, &mut trajectory)?;
    let mut snap_targets: Vec<f64> = options.snapshots.clone();
    snap_targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let take_snaps = |targets: &[f64], u: f64, f: &TransverseField, out: &mut Vec<Snapshot>| {
        for &t in targets {
            if t == u {
                out.push(Snapshot { u, field: f.clone() });
            }
        }
    };
    take_snaps(&snap_targets, u0, &state.field, &mut snapshots);

    let norm0 = field0.norm();
    let mut max_step_drift = 0.0f64;
    let mut steps = 0usize;

    let plan = step_plan(params, grid, span, &snap_targets);
    let total_steps: usize = plan.iter().map(|s| s.2).sum();

    let mut last_norm = norm0;
    for (a, b, n_steps) in plan {
        let h = (b - a) / n_steps as f64;
        state.set_step(h);
        for i in 0..n_steps {
            let u = a + i as f64 * h;
            let un = if i + 1 == n_steps { b } else { a + (i + 1) as f64 * h };
            state.step(u, h);
            steps += 1;

            let (norm, peak, edge) = state.field_stats();
            if !norm.is_finite() || !peak.is_finite() {
                return Err(Error::Instability { u: un });
            }
            max_step_drift = max_step_drift.max((norm - last_norm).abs());
            last_norm = norm;
            let ratio = if peak > 0.0 { edge / peak } else { f64::INFINITY };
            if !(ratio < field::EDGE_TOLERANCE) {
                return Err(Error::DomainOverflow { u: un, ratio });
            }

            let at_snap = i + 1 == n_steps && snap_targets.contains(&b);
            if is_recorded(steps, total_steps, grid.record_stride, at_snap) {
                state.sync(un);
                record(&mut engine, &state.field, un, &mut trajectory)?;
                if at_snap {
                    take_snaps(&snap_targets, b, &state.field, &mut snapshots);
                }
            }
        }
    }
    state.sync(u1);

    let samples = trajectory.samples();
    let energy_drift = params.alpha.as_constant().map(|_| {
        let e = |s: &TrajectorySample| s.h0 + params.eps() * s.u_exp;
        let e0 = e(&samples[0]);
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        samples.iter().map(|s| (e(s) - e0).abs() / scale).fold(0.0, f64::max)
    });
    let first = samples[0];
    let diagnostics = Diagnostics {
        steps,
        max_norm_drift_per_step: max_step_drift,
        norm_drift: (state.field.norm() - norm0).abs(),
        energy_drift,
        mi4_drift: trajectory.max_mi4_drift(),
        collapse_regime: first.mi4 <= 0.0,
    };
    Ok(PropagationRecord {
        trajectory,
        snapshots,
        diagnostics,
        final_field: state.field,
        final_u: u1,
    })
}

/// Segments `(start, end, steps)` between profile jumps and snapshot points.
fn step_plan(params: &ParaxialParams, grid: &GridSpec, span: (f64, f64), snaps: &[f64]) -> Vec<(f64, f64, usize)> {
    let (u0, u1) = span;
    if !(u1 > u0) {
        return Vec::new();
    }
    let mut cuts: Vec<f64> = params.alpha.breakpoints().to_vec();
    cuts.extend_from_slice(snaps);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    segments(u0, u1, &cuts)
        .into_iter()
        .map(|(a, b)| (a, b, step_count(b - a, grid.du)))
        .collect()
}

fn is_recorded(step: usize, total: usize, stride: usize, at_snapshot: bool) -> bool {
    step.is_multiple_of(stride) || step == total || at_snapshot
}

/// The u values at which [`split_step_propagate_with`] records moments.
pub fn record_schedule(params: &ParaxialParams, grid: &GridSpec, span: (f64, f64), snapshots: &[f64]) -> Vec<f64> {
    let plan = step_plan(params, grid, span, snapshots);
    let total: usize = plan.iter().map(|s| s.2).sum();
    let mut out = vec![span.0];
    let mut step = 0;
    for (a, b, n) in plan {
        let h = (b - a) / n as f64;
        for i in 0..n {
            step += 1;
            let un = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
            if is_recorded(step, total, grid.record_stride, i + 1 == n && snapshots.contains(&b)) {
                out.push(un);
            }
        }
    }
    out
}

/// One propagation in progress. `pending` holds the trap phase owed from the
/// second half of the last step (and the nonlinear half-phase weight) that has
/// not been applied yet.
struct Stepper<'a> {
    field: TransverseField,
    params: &'a ParaxialParams,
    spectral: Spectral2d,
    k_sq: Vec<f64>,
    r_sq: Vec<f64>,
    kinetic: Vec<Complex64>,
    kinetic_h: f64,
    /// (nonlinear weight, trap weight) not yet applied: phase is
    /// −(γ|ψ|² w_nl + ε k² r² w_trap) / 2k.
    pending: Option<(f64, f64)>,
}

impl<'a> Stepper<'a> {
    fn new(field: TransverseField, params: &'a ParaxialParams) -> Self {
        let n = field.n();
        let spectral = Spectral2d::new(n, field.extent());
        let k_sq = spectral.k_squared();
        let mut r_sq = vec![0.0; n * n];
        for iy in 0..n {
            let y = field.coord(iy);
            for ix in 0..n {
                let x = field.coord(ix);
                r_sq[iy * n + ix] = x * x + y * y;
            }
        }
        Stepper {
            field,
            params,
            spectral,
            k_sq,
            r_sq,
            kinetic: Vec::new(),
            kinetic_h: f64::NAN,
            pending: None,
        }
    }

    fn set_step(&mut self, h: f64) {
        if h == self.kinetic_h {
            return;
        }
        let n = self.field.n();
        let scale = 1.0 / (n * n) as f64;
        let c = -self.params.eps() * h / (2.0 * self.params.k);
        self.kinetic = self.k_sq.iter().map(|&q| Complex64::from_polar(scale, c * q)).collect();
        self.kinetic_h = h;
    }

    /// Multiplies by `exp(−i(γ|ψ|² w_nl + ε k² r² w_trap)/2k)`.
    fn apply_phase(&mut self, w_nl: f64, w_trap: f64) {
        let n = self.field.n();
        let inv2k = 0.5 / self.params.k;
        let a = -self.params.gamma * w_nl * inv2k;
        let b = -self.params.eps() * self.params.k * self.params.k * w_trap * inv2k;
        let r_sq = &self.r_sq;
        self.field
            .values_mut()
            .par_chunks_mut(n)
            .zip(r_sq.par_chunks(n))
            .for_each(|(row, rs)| {
                for (v, &r2) in row.iter_mut().zip(rs) {
                    let theta = a * v.norm_sqr() + b * r2;
                    *v *= Complex64::new(theta.cos(), theta.sin());
                }
            });
    }

    /// Advances from `u` by `h`, leaving the closing half-phase pending.
    fn step(&mut self, u: f64, h: f64) {
        let alpha = &self.params.alpha;
        let first_trap = alpha.squared(u + 0.25 * h) * 0.5 * h;
        let (w_nl, w_trap) = match self.pending.take() {
            Some((nl, tr)) => (nl + 0.5 * h, tr + first_trap),
            None => (0.5 * h, first_trap),
        };
        self.apply_phase(w_nl, w_trap);

        let data = self.field.values_mut();
        self.spectral.forward(data);
        data.par_iter_mut()
            .zip(self.kinetic.par_iter())
            .for_each(|(v, f)| *v *= f);
        self.spectral.inverse_unnormalized(data);

        self.pending = Some((0.5 * h, alpha.squared(u + 0.75 * h) * 0.5 * h));
    }

    /// Applies any pending half-phase so the field is the solution at `u`.
    fn sync(&mut self, _u: f64) {
        if let Some((nl, tr)) = self.pending.take() {
            self.apply_phase(nl, tr);
        }
    }

    /// (norm, peak |ψ|, max |ψ| on the outer two-cell frame).
    fn field_stats(&self) -> (f64, f64, f64) {
        let n = self.field.n();
        let da = self.field.cell_area();
        let (sum, peak, edge) = self
            .field
            .values()
            .par_chunks(n)
            .enumerate()
            .map(|(iy, row)| {
                let frame_row = iy < 2 || iy >= n - 2;
                let mut s = 0.0;
                let mut p = 0.0f64;
                let mut e = 0.0f64;
                for (ix, v) in row.iter().enumerate() {
                    let m2 = v.norm_sqr();
                    s += m2;
                    p = p.max(m2);
                    if frame_row || ix < 2 || ix >= n - 2 {
                        e = e.max(m2);
                    }
                }
                (s, p, e)
            })
            .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1), a.2.max(b.2)));
        (sum * da, peak.sqrt(), edge.sqrt())
    }
}
