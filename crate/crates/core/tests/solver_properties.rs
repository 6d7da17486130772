use num_complex::Complex64;
use paraxial::abcd::{harmonic_matrix, linear_gaussian_propagate, q_from_moments};
use paraxial::moments::{compute_moments, free_expansion_r2, quality_factor, tof_width};
use paraxial::params::{Epsilon, ParaxialParams};
use paraxial::profile::Profile;
use paraxial::solver::field::{make_gaussian, GaussianBeam, TransverseField};
use paraxial::solver::{effective_energy, split_step_propagate, GridSpec};

fn params(eps: Epsilon, gamma: f64, alpha: Profile) -> ParaxialParams {
    ParaxialParams::new(1.0, eps, gamma, alpha).unwrap()
}

fn grid(n: usize, extent: f64, du: f64, stride: usize) -> GridSpec {
    GridSpec {
        n,
        extent,
        du,
        record_stride: stride,
    }
}

fn gaussian(beam: GaussianBeam, g: &GridSpec) -> TransverseField {
    make_gaussian(&beam, g, 1.0).unwrap()
}

fn max_abs_diff(a: &TransverseField, b: &TransverseField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn norm_drift_per_step() {
    for eps in [Epsilon::Plus, Epsilon::Minus] {
        let p = params(eps, 2.0, Profile::constant(0.5));
        let g = grid(128, 24.0, 0.002, 50);
        let f = gaussian(GaussianBeam::waist(1.0), &g);
        let rec = split_step_propagate(&f, &p, &g, (0.0, 1.0)).unwrap();
        assert_eq!(rec.diagnostics.steps, 500);
        assert!(rec.diagnostics.max_norm_drift_per_step < 1e-12);
    }
}

#[test]
fn second_order_in_du() {
    let alpha = Profile::SinusoidalSquared {
        mean_sq: 0.5,
        depth: 0.3,
        angular_frequency: 3.0,
        phase: 0.0,
    };
    let p = params(Epsilon::Plus, 3.0, alpha);
    let run = |du: f64| {
        let g = grid(64, 16.0, du, 1000);
        let f = gaussian(GaussianBeam::waist(1.0), &g);
        split_step_propagate(&f, &p, &g, (0.0, 1.0)).unwrap().final_field
    };
    let reference = run(1.0 / 1280.0);
    let coarse = max_abs_diff(&run(1.0 / 20.0), &reference);
    let fine = max_abs_diff(&run(1.0 / 40.0), &reference);
    let ratio = coarse / fine;
    assert!(
        (3.5..=4.5).contains(&ratio),
        "error ratio {ratio} ({coarse:e} / {fine:e})"
    );
}

#[test]
fn ehrenfest_finite_differences() {
    for eps in [Epsilon::Plus, Epsilon::Minus] {
        let p = params(eps, 2.0, Profile::constant(0.6));
        let g = grid(128, 24.0, 1e-3, 2);
        let beam = GaussianBeam {
            curvature_radius: Some(3.0),
            ..GaussianBeam::waist(1.0)
        };
        let rec = split_step_propagate(&gaussian(beam, &g), &p, &g, (0.0, 1.0)).unwrap();
        let s = rec.trajectory.samples();
        for w in s.windows(3) {
            let h = w[2].u - w[0].u;
            let fd = (w[2].r2 - w[0].r2) / h;
            let law = 2.0 * p.eps() / p.k * w[1].q;
            // O(h²) truncation of the centered difference.
            assert!(
                (fd - law).abs() < 1e-5 * (1.0 + law.abs()),
                "u = {}: {fd} vs {law}",
                w[1].u
            );
        }
    }
}

#[test]
fn dilatation_covariance() {
    let lambda = 1.5;
    let base = params(Epsilon::Minus, 2.0, Profile::constant(0.5));
    let scaled = params(Epsilon::Minus, 2.0, Profile::constant(0.5 / (lambda * lambda)));
    let g = grid(64, 16.0, 0.005, 20);
    let gl = grid(64, 16.0 * lambda, 0.005 * lambda * lambda, 20);
    let beam = GaussianBeam {
        tilt: [0.3, 0.0],
        ..GaussianBeam::waist(1.0)
    };
    let f = gaussian(beam.clone(), &g);
    let fl = gaussian(
        GaussianBeam {
            sigma: lambda,
            tilt: [0.3 / lambda, 0.0],
            ..beam
        },
        &gl,
    );
    let a = split_step_propagate(&f, &base, &g, (0.0, 1.0)).unwrap();
    let b = split_step_propagate(&fl, &scaled, &gl, (0.0, lambda * lambda)).unwrap();
    let dilated: Vec<Complex64> = a.final_field.values().iter().map(|v| v / lambda).collect();
    let diff = dilated
        .iter()
        .zip(b.final_field.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-10 * a.final_field.peak(), "{diff:e}");
    for (sa, sb) in a.trajectory.samples().iter().zip(b.trajectory.samples()) {
        assert!((sb.r2 - lambda * lambda * sa.r2).abs() < 1e-9 * sb.r2);
    }
}

#[test]
fn linear_ground_state_keeps_its_width() {
    let alpha = 0.8;
    for eps in [Epsilon::Plus, Epsilon::Minus] {
        let p = params(eps, 0.0, Profile::constant(alpha));
        let sigma = (1.0 / alpha).sqrt();
        let g = grid(64, 16.0 * sigma, 0.002, 25);
        let period = std::f64::consts::PI / alpha;
        let rec = split_step_propagate(&gaussian(GaussianBeam::waist(sigma), &g), &p, &g, (0.0, period)).unwrap();
        let r0 = rec.trajectory.samples()[0].r2;
        for s in rec.trajectory.samples() {
            assert!((s.r2 - r0).abs() < 1e-3 * r0, "u = {}: {}", s.u, s.r2);
        }
    }
}

#[test]
fn energy_conserved_over_ten_thousand_steps() {
    let p = params(Epsilon::Plus, 3.0, Profile::constant(0.7));
    let g = grid(128, 24.0, 1e-3, 500);
    let f = gaussian(GaussianBeam::waist(1.0), &g);
    let rec = split_step_propagate(&f, &p, &g, (0.0, 10.0)).unwrap();
    assert_eq!(rec.diagnostics.steps, 10_000);
    let drift = rec.diagnostics.energy_drift.unwrap();
    assert!(drift < 1e-5, "energy drift {drift:e}");
    let e0 = effective_energy(&f, &p, 0.0).unwrap();
    let e1 = effective_energy(&rec.final_field, &p, 10.0).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-5);
}

#[test]
fn linear_run_matches_gaussian_closed_form() {
    let alpha = 0.7;
    for eps in [Epsilon::Plus, Epsilon::Minus] {
        let p = params(eps, 0.0, Profile::constant(alpha));
        let g = grid(128, 20.0, 2e-3, 100);
        let beam = GaussianBeam {
            curvature_radius: Some(-2.5),
            ..GaussianBeam::waist(1.2)
        };
        let f = gaussian(beam, &g);
        let m0 = compute_moments(&f, &p, 0.0).unwrap();
        let q1 = q_from_moments(&m0, quality_factor(&m0, eps), 1.0, eps).unwrap();
        let rec = split_step_propagate(&f, &p, &g, (0.0, 4.0)).unwrap();
        for s in rec.trajectory.samples() {
            let lg = linear_gaussian_propagate(&q1, &harmonic_matrix(alpha, s.u).unwrap(), 1.0, eps).unwrap();
            assert!(
                (s.w2 - lg.w2).abs() < 1e-4 * lg.w2,
                "u = {}: {} vs {}",
                s.u,
                s.w2,
                lg.w2
            );
        }
        let lg = linear_gaussian_propagate(&q1, &harmonic_matrix(alpha, 4.0).unwrap(), 1.0, eps).unwrap();
        let peak = f.peak() * lg.amplitude.norm_sqr();
        assert!((rec.final_field.peak() - peak).abs() < 1e-4 * peak);
    }
}

#[test]
fn free_runs_follow_the_parabola() {
    for (eps, gamma) in [(Epsilon::Plus, 2.0), (Epsilon::Minus, 4.0), (Epsilon::Plus, 0.0)] {
        let p = params(eps, gamma, Profile::zero());
        let g = grid(256, 56.0, 2e-3, 50);
        let f = gaussian(GaussianBeam::waist(1.0), &g);
        let m0 = compute_moments(&f, &p, 0.0).unwrap();
        let rec = split_step_propagate(&f, &p, &g, (0.0, 3.0)).unwrap();
        for s in rec.trajectory.samples() {
            let r2 = free_expansion_r2(&m0, &p, s.u).unwrap();
            assert!((s.r2 - r2).abs() < 1e-3 * r2, "u = {}: {} vs {}", s.u, s.r2, r2);
        }
    }
}

#[test]
fn released_atomic_beam_follows_the_tof_law() {
    let gamma = 8.0 * std::f64::consts::PI * 0.09;
    let p = params(Epsilon::Plus, gamma, Profile::zero());
    let g = grid(256, 40.0, 2e-3, 50);
    let beam = GaussianBeam {
        centroid: [0.0, -1.0],
        tilt: [0.0, -0.4],
        ..GaussianBeam::waist(1.0)
    };
    let f = gaussian(beam, &g);
    let m0 = compute_moments(&f, &p, 0.0).unwrap();
    let rec = split_step_propagate(&f, &p, &g, (0.0, 2.0)).unwrap();
    for s in rec.trajectory.samples() {
        let w2 = tof_width(&m0, 1.0, s.u).unwrap();
        assert!((s.w2 - w2).abs() < 1e-4 * w2, "u = {}: {} vs {}", s.u, s.w2, w2);
    }
}
