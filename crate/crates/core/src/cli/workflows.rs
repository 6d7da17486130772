//! The batch workflows behind the CLI subcommands.
//!
//! Each `run_*` function is pure computation on a [`RunConfig`]; the
//! `execute` entry point adds file output and the exit-code policy.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use toml::Table;

use super::config::{read_field, resolve_table, set_dotted, BeamSource, ConfigError, Medium, RunConfig};
use super::output::{table_csv, trajectory_csv, write_atomic, write_json};
use crate::abcd::{propagate_q, q_from_moments, MatrixIntegrator};
use crate::moments::{
    centered_quality_factor, compute_moments, moment_ode_at, quality_factor, tof_analysis, MomentSet, MomentTrajectory,
    TofAnalysis,
};
use crate::params::{Epsilon, ParaxialParams};
use crate::solver::field::{make_gaussian, TransverseField};
use crate::solver::{
    record_schedule, split_step_propagate_with, Diagnostics, GridSpec, PropagateOptions, PropagationRecord,
};

/// Largest per-step norm change accepted before a run counts as violating
/// norm conservation.
pub const NORM_STEP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    /// A sweep point failed; carries that point's exit code.
    #[error("sweep point {index} ({parameter} = {value}): {message}")]
    SweepPoint {
        index: usize,
        parameter: String,
        value: f64,
        code: i32,
        message: String,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
            RunError::SweepPoint { code, .. } => *code,
        }
    }
}

/// Exit code for a completed run whose checks failed.
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Summary of the initial field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialState {
    pub moments: MomentSet,
    pub mi4: f64,
    pub mi4_centered: f64,
    pub collapse_regime: bool,
    /// `ħ√⟨K̂⟩/√(2mE)` for atomic beams with a longitudinal energy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paraxiality_ratio: Option<f64>,
}

/// Everything a workflow needs, built from a resolved config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: ParaxialParams,
    pub field: TransverseField,
    pub grid: GridSpec,
    pub span: (f64, f64),
    pub initial: InitialState,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, RunError> {
    let params = cfg.params().map_err(|e| ConfigError(e.to_string()))?;
    let field = match &cfg.beam {
        BeamSource::Gaussian(b) => make_gaussian(b, &cfg.grid, params.k).map_err(|e| ConfigError(e.to_string()))?,
        BeamSource::FieldFile(p) => read_field(p).map_err(|e| ConfigError(e.to_string()))?,
    };
    let span = cfg.span();
    let moments = compute_moments(&field, &params, span.0)?;
    let mi4 = quality_factor(&moments, params.epsilon);
    let paraxiality_ratio = match &cfg.medium {
        Medium::Atomic(a) => a
            .energy
            .map(|e| a.hbar * moments.k_exp.sqrt() / (2.0 * a.mass * e).sqrt()),
        _ => None,
    };
    Ok(Prepared {
        initial: InitialState {
            moments,
            mi4,
            mi4_centered: centered_quality_factor(&moments, params.epsilon),
            collapse_regime: mi4 <= 0.0,
            paraxiality_ratio,
        },
        params,
        field,
        grid: cfg.grid,
        span,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagateReport {
    pub workflow: &'static str,
    pub span: (f64, f64),
    pub initial: InitialState,
    pub diagnostics: Diagnostics,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn run_propagate(cfg: &RunConfig) -> Result<(PropagationRecord, PropagateReport), RunError> {
    let p = prepare(cfg)?;
    let opts = PropagateOptions {
        snapshots: cfg.run.snapshots.clone(),
        ..Default::default()
    };
    let record = split_step_propagate_with(&p.field, &p.params, &p.grid, p.span, &opts)?;
    let d = record.diagnostics;
    let checks = vec![
        Check::at_most("mi4_drift", d.mi4_drift, cfg.run.tolerance_mi4),
        Check::at_most("norm_drift_per_step", d.max_norm_drift_per_step, NORM_STEP_TOLERANCE),
    ];
    let report = PropagateReport {
        workflow: "propagate",
        span: p.span,
        initial: p.initial,
        diagnostics: d,
        pass: all_pass(&checks),
        checks,
    };
    Ok((record, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub workflow: &'static str,
    pub span: (f64, f64),
    pub initial: InitialState,
    /// Angular frequency of the ⟨r²⟩ oscillation, `2α₀`, for constant α.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillation_frequency: Option<f64>,
    pub final_w2_abcd: Option<f64>,
    pub final_w2_moment_ode: f64,
}

/// Moment-ODE trajectory on the solver's recording schedule.
pub fn run_predict(cfg: &RunConfig) -> Result<(MomentTrajectory, PredictReport), RunError> {
    let p = prepare(cfg)?;
    let points = record_schedule(&p.params, &p.grid, p.span, &cfg.run.snapshots);
    let traj = moment_ode_at(&p.initial.moments, &p.params, p.span.0, &points, p.grid.du)?;
    let abcd = abcd_widths(&p, &[p.span.1]).ok().map(|w| w[0]);
    let report = PredictReport {
        workflow: "predict",
        span: p.span,
        oscillation_frequency: p.params.alpha.as_constant().filter(|a| *a > 0.0).map(|a| 2.0 * a),
        final_w2_abcd: abcd,
        final_w2_moment_ode: traj.samples().last().map_or(f64::NAN, |s| s.w2),
        initial: p.initial,
    };
    Ok((traj, report))
}

/// q-law widths at `points` from the initial moments.
fn abcd_widths(p: &Prepared, points: &[f64]) -> crate::Result<Vec<f64>> {
    let mi4 = p.initial.mi4_centered;
    let q0 = q_from_moments(&p.initial.moments, mi4, p.params.k, p.params.epsilon)?;
    let mut integ = MatrixIntegrator::new(&p.params.alpha, p.span.0, p.grid.du)?;
    points
        .iter()
        .map(|&u| {
            let m = integ.advance_to(u)?;
            Ok(propagate_q(&q0, &m)?.width2(mi4, p.params.k))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub u: f64,
    pub w2_numeric: f64,
    pub w2_abcd: f64,
    pub rel_err_w2: f64,
    pub r2_numeric: f64,
    pub r2_moment_ode: f64,
    pub rel_err_r2: f64,
    pub mi4_numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub workflow: &'static str,
    pub span: (f64, f64),
    pub initial: InitialState,
    pub samples: usize,
    pub max_rel_err_w2: f64,
    pub max_rel_err_r2: f64,
    pub mi4_drift: f64,
    pub diagnostics: Diagnostics,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
}

pub const COMPARISON_HEADER: &[&str] = &[
    "u",
    "w2_numeric",
    "w2_abcd",
    "rel_err_w2",
    "r2_numeric",
    "r2_moment_ode",
    "rel_err_r2",
    "MI4",
];

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        table_csv(
            COMPARISON_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.u,
                    r.w2_numeric,
                    r.w2_abcd,
                    r.rel_err_w2,
                    r.r2_numeric,
                    r.r2_moment_ode,
                    r.rel_err_r2,
                    r.mi4_numeric,
                ]
            }),
        )
    }
}

/// Solver against the q-law and the moment ODE, evaluated concurrently on the
/// same schedule.
pub fn run_compare(cfg: &RunConfig) -> Result<(ComparisonReport, PropagationRecord), RunError> {
    let p = prepare(cfg)?;
    let points = record_schedule(&p.params, &p.grid, p.span, &cfg.run.snapshots);
    let opts = PropagateOptions {
        snapshots: cfg.run.snapshots.clone(),
        ..Default::default()
    };
    let (numeric, analytic) = rayon::join(
        || split_step_propagate_with(&p.field, &p.params, &p.grid, p.span, &opts),
        || -> crate::Result<_> {
            let w2 = abcd_widths(&p, &points)?;
            let ode = moment_ode_at(&p.initial.moments, &p.params, p.span.0, &points, p.grid.du)?;
            Ok((w2, ode))
        },
    );
    let record = numeric?;
    let (w2_abcd, ode) = analytic?;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let rows: Vec<ComparisonRow> = record
        .trajectory
        .samples()
        .iter()
        .zip(w2_abcd.iter().zip(ode.samples()))
        .map(|(s, (&wa, o))| ComparisonRow {
            u: s.u,
            w2_numeric: s.w2,
            w2_abcd: wa,
            rel_err_w2: rel(wa, s.w2),
            r2_numeric: s.r2,
            r2_moment_ode: o.r2,
            rel_err_r2: rel(o.r2, s.r2),
            mi4_numeric: s.mi4,
        })
        .collect();
    let max = |f: fn(&ComparisonRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let max_rel_err_w2 = max(|r| r.rel_err_w2);
    let max_rel_err_r2 = max(|r| r.rel_err_r2);
    let mi4_drift = record.diagnostics.mi4_drift;
    let checks = vec![
        Check::at_most("max_rel_err_w2", max_rel_err_w2, cfg.run.tolerance_w2),
        Check::at_most("mi4_drift", mi4_drift, cfg.run.tolerance_mi4),
    ];
    let summary = ComparisonSummary {
        workflow: "compare",
        span: p.span,
        initial: p.initial,
        samples: rows.len(),
        max_rel_err_w2,
        max_rel_err_r2,
        mi4_drift,
        diagnostics: record.diagnostics,
        pass: all_pass(&checks),
        checks,
    };
    Ok((ComparisonReport { rows, summary }, record))
}

#[derive(Debug, Clone, Serialize)]
pub struct TofReport {
    pub workflow: &'static str,
    pub initial: InitialState,
    pub analysis: TofAnalysis,
}

/// Time-of-flight inversion of the `[tof]` samples against the configured
/// beam model. Analytic only: no propagation.
pub fn run_tof(cfg: &RunConfig) -> Result<TofReport, RunError> {
    let tof = cfg
        .tof
        .as_ref()
        .ok_or_else(|| ConfigError("[tof] section with samples is required".into()))?;
    let p = prepare(cfg)?;
    if p.params.epsilon != Epsilon::Plus {
        return Err(ConfigError("time-of-flight analysis needs an atomic (eps = +1) medium".into()).into());
    }
    let samples: Vec<(f64, f64)> = tof.samples.iter().map(|s| (s[0], s[1])).collect();
    let analysis = tof_analysis(&samples, &p.initial.moments, p.params.k)?;
    Ok(TofReport {
        workflow: "analyze-tof",
        initial: p.initial,
        analysis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workflow {
    Propagate,
    Predict,
    Compare,
    Sweep,
    AnalyzeTof,
}

/// Result of a workflow that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub message: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            EXIT_INVARIANT
        }
    }
}

fn write_snapshots(out: &Path, record: &PropagationRecord) -> Result<(), RunError> {
    for (i, s) in record.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        s.field.write_binary(&mut buf, s.u)?;
        write_atomic(&out.join(format!("field_{i:04}.bin")), &buf)?;
    }
    Ok(())
}

/// Runs `workflow` for the configuration file at `config` and writes its
/// outputs under `out`.
pub fn execute(workflow: Workflow, config: &Path, out: &Path) -> Result<Outcome, RunError> {
    let table = super::config::load_table(config)?;
    let base = config.parent().unwrap_or(Path::new(".")).to_path_buf();
    if workflow == Workflow::Sweep {
        return run_sweep(&table, &base, out);
    }
    let cfg = resolve_table(table, &base)?;
    execute_resolved(workflow, &cfg, out)
}

pub fn execute_resolved(workflow: Workflow, cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("config.resolved.toml"), cfg.to_toml().as_bytes())?;
    match workflow {
        Workflow::Propagate => {
            let (record, report) = run_propagate(cfg)?;
            write_atomic(
                &out.join("trajectory.csv"),
                trajectory_csv(&record.trajectory).as_bytes(),
            )?;
            write_snapshots(out, &record)?;
            write_json(&out.join("report.json"), &report)?;
            Ok(Outcome {
                pass: report.pass,
                message: format!(
                    "propagated {} steps, M_I^4 drift {:.3e}",
                    report.diagnostics.steps, report.diagnostics.mi4_drift
                ),
            })
        }
        Workflow::Predict => {
            let (traj, report) = run_predict(cfg)?;
            write_atomic(&out.join("trajectory.csv"), trajectory_csv(&traj).as_bytes())?;
            write_json(&out.join("report.json"), &report)?;
            Ok(Outcome {
                pass: true,
                message: format!("predicted {} samples", traj.len()),
            })
        }
        Workflow::Compare => {
            let (report, record) = run_compare(cfg)?;
            write_atomic(
                &out.join("trajectory.csv"),
                trajectory_csv(&record.trajectory).as_bytes(),
            )?;
            write_atomic(&out.join("comparison.csv"), report.to_csv().as_bytes())?;
            write_snapshots(out, &record)?;
            write_json(&out.join("report.json"), &report.summary)?;
            Ok(Outcome {
                pass: report.summary.pass,
                message: format!(
                    "max relative w2 error {:.3e}, M_I^4 drift {:.3e}",
                    report.summary.max_rel_err_w2, report.summary.mi4_drift
                ),
            })
        }
        Workflow::AnalyzeTof => {
            let report = run_tof(cfg)?;
            write_json(&out.join("report.json"), &report)?;
            Ok(Outcome {
                pass: true,
                message: format!(
                    "free estimate overestimates the velocity dispersion by a factor {:.6}",
                    report.analysis.overestimation
                ),
            })
        }
        Workflow::Sweep => Err(ConfigError("sweep needs the unresolved configuration table".into()).into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepIndex {
    pub parameter: String,
    pub points: Vec<SweepPoint>,
}

/// Runs `compare` for every value of the `[sweep]` parameter, concurrently,
/// into `out/point_XXXX/`, and writes `out/index.json`.
pub fn run_sweep(table: &Table, base: &Path, out: &Path) -> Result<Outcome, RunError> {
    let cfg = resolve_table(table.clone(), base)?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| ConfigError("[sweep] section is required".into()))?;
    let mut point_table = table.clone();
    point_table.remove("sweep");
    // Validate the key once up front so a typo is a config error.
    set_dotted(&mut point_table.clone(), &sweep.parameter, sweep.values[0])?;

    std::fs::create_dir_all(out)?;
    let points: Vec<SweepPoint> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let rel = PathBuf::from(format!("point_{index:04}"));
            let dir = out.join(&rel);
            let result = (|| {
                let mut t = point_table.clone();
                set_dotted(&mut t, &sweep.parameter, value)?;
                let c = resolve_table(t, base)?;
                execute_resolved(Workflow::Compare, &c, &dir)
            })();
            let (exit_code, message) = match result {
                Ok(o) => (o.exit_code(), o.message),
                Err(e) => (e.exit_code(), e.to_string()),
            };
            SweepPoint {
                index,
                value,
                dir: rel,
                exit_code,
                message,
            }
        })
        .collect();
    let worst = points.iter().map(|p| p.exit_code).max().unwrap_or(0);
    let failed = points.iter().filter(|p| p.exit_code != 0).count();
    let index = SweepIndex {
        parameter: sweep.parameter,
        points,
    };
    write_json(&out.join("index.json"), &index)?;
    match worst {
        0 => Ok(Outcome {
            pass: true,
            message: format!("{} sweep points passed", index.points.len()),
        }),
        EXIT_INVARIANT => Ok(Outcome {
            pass: false,
            message: format!("{failed} of {} sweep points failed their checks", index.points.len()),
        }),
        _ => {
            let first = index
                .points
                .iter()
                .find(|p| p.exit_code == worst)
                .expect("worst exists");
            Err(RunError::SweepPoint {
                index: first.index,
                parameter: index.parameter.clone(),
                value: first.value,
                code: worst,
                message: first.message.clone(),
            })
        }
    }
}
