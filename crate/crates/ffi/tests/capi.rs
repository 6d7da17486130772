use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use paraxial_ffi::*;

fn last_error() -> String {
    let p = px_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grid() -> PxGrid {
    PxGrid {
        n: 64,
        extent: 16.0,
        du: 0.01,
        record_stride: 10,
    }
}

#[test]
fn propagate_and_read_back() {
    unsafe {
        let mut alpha = ptr::null_mut();
        assert_eq!(px_profile_constant(0.8, &mut alpha), PxStatus::Ok);
        let params = PxParams {
            k: 1.0,
            epsilon: 1,
            gamma: 3.0,
            alpha,
        };
        let g = grid();
        let mut field = ptr::null_mut();
        assert_eq!(px_field_gaussian(&g, 1.0, 1.0, 0.0, &mut field), PxStatus::Ok);
        let mut m0 = PxMoments::default();
        assert_eq!(px_field_moments(field, &params, 0.0, &mut m0), PxStatus::Ok);
        assert!((m0.r2 - 1.0).abs() < 1e-9);

        let mut rec = ptr::null_mut();
        assert_eq!(px_propagate(field, &params, &g, 0.0, 1.0, &mut rec), PxStatus::Ok);
        assert_eq!(px_record_len(rec), 11);
        let mut s = PxSample::default();
        assert_eq!(px_record_sample(rec, 10, &mut s), PxStatus::Ok);
        assert!((s.u - 1.0).abs() < 1e-12);
        assert_eq!(px_record_sample(rec, 11, &mut s), PxStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let mut d = PxDiagnostics::default();
        assert_eq!(px_record_diagnostics(rec, &mut d), PxStatus::Ok);
        assert_eq!(d.steps, 100);
        assert!(d.mi4_drift < 1e-6);
        assert!(d.energy_drift.is_finite());

        let mut last = ptr::null_mut();
        assert_eq!(px_record_final_field(rec, &mut last), PxStatus::Ok);
        let mut len = 0;
        assert_eq!(
            px_field_samples(last, ptr::null_mut(), 0, &mut len),
            PxStatus::InvalidArgument
        );
        assert_eq!(len, 2 * 64 * 64);
        let mut buf = vec![0.0; len];
        assert_eq!(px_field_samples(last, buf.as_mut_ptr(), len, &mut len), PxStatus::Ok);
        let mut copy = ptr::null_mut();
        assert_eq!(px_field_from_samples(64, 16.0, buf.as_ptr(), &mut copy), PxStatus::Ok);
        let mut m1 = PxMoments::default();
        assert_eq!(px_field_moments(copy, &params, 1.0, &mut m1), PxStatus::Ok);
        assert!((m1.r2 - s.r2).abs() < 1e-10 * s.r2);

        px_field_free(copy);
        px_field_free(last);
        px_record_free(rec);
        px_field_free(field);
        px_profile_free(alpha);
    }
}

#[test]
fn matrices_and_q_law() {
    unsafe {
        let (mut h1, mut h2, mut h, mut c) = Default::default();
        assert_eq!(px_harmonic_matrix(0.9, 0.4, &mut h1), PxStatus::Ok);
        assert_eq!(px_harmonic_matrix(0.9, 0.7, &mut h2), PxStatus::Ok);
        assert_eq!(px_harmonic_matrix(0.9, 1.1, &mut h), PxStatus::Ok);
        assert_eq!(px_compose(&h2, &h1, &mut c), PxStatus::Ok);
        let PxMatrix { a, b, c: cc, d } = c;
        assert!((a - h.a).abs() + (b - h.b).abs() + (cc - h.c).abs() + (d - h.d).abs() < 1e-12);

        let mut alpha = ptr::null_mut();
        assert_eq!(px_profile_constant(0.9, &mut alpha), PxStatus::Ok);
        let mut ode = PxMatrix::default();
        assert_eq!(px_matrix_ode(alpha, 0.0, 1.1, 1e-3, &mut ode), PxStatus::Ok);
        assert!((ode.b - h.b).abs() < 1e-8);
        px_profile_free(alpha);

        let q = PxInverseQ { inv_r: 0.0, imag: 1.0 };
        let mut f = PxMatrix::default();
        assert_eq!(px_free_matrix(2.0, &mut f), PxStatus::Ok);
        let mut q2 = PxInverseQ::default();
        assert_eq!(px_propagate_q(&q, &f, &mut q2), PxStatus::Ok);
        let mut w2 = 0.0;
        assert_eq!(px_q_width2(&q2, 1.0, 1.0, &mut w2), PxStatus::Ok);
        assert!((w2 - 5.0).abs() < 1e-12);

        let bad = PxMatrix {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
        };
        assert_eq!(px_propagate_q(&q, &bad, &mut q2), PxStatus::InvalidArgument);
        assert!(last_error().contains("det"));
    }
}

#[test]
fn scalar_helpers_and_errors() {
    unsafe {
        let mut n = 0.0;
        assert_eq!(px_self_trapping_threshold(-0.25, &mut n), PxStatus::Ok);
        assert_eq!(n, 2.0);
        assert_eq!(px_self_trapping_threshold(0.25, &mut n), PxStatus::InvalidArgument);

        let m = PxMoments {
            r2: 1.0,
            k_exp: 1.0,
            h0: 1.18,
            w2: 1.0,
            epsilon: 1,
            ..Default::default()
        };
        let mut mi4 = 0.0;
        assert_eq!(px_quality_factor(&m, &mut mi4), PxStatus::Ok);
        assert!((mi4 - 1.18).abs() < 1e-15);
        let bad = PxMoments { epsilon: 0, ..m };
        assert_eq!(px_quality_factor(&bad, &mut mi4), PxStatus::InvalidArgument);
        assert_eq!(px_quality_factor(ptr::null(), &mut mi4), PxStatus::NullPointer);
        assert!(last_error().contains("moments is null"));

        let mut p = ptr::null_mut();
        assert_eq!(
            px_profile_piecewise([1.0].as_ptr(), 1, [0.5].as_ptr(), 1, &mut p),
            PxStatus::InvalidArgument
        );
        assert!(p.is_null());
        let params = PxParams {
            k: 1.0,
            epsilon: 1,
            gamma: 0.0,
            alpha: ptr::null(),
        };
        let mut field = ptr::null_mut();
        assert_eq!(px_field_gaussian(&grid(), 1.0, 1.0, 0.0, &mut field), PxStatus::Ok);
        let mut rec = ptr::null_mut();
        assert_eq!(
            px_propagate(field, &params, &grid(), 0.0, 1.0, &mut rec),
            PxStatus::NullPointer
        );
        assert_eq!(px_record_len(ptr::null()), 0);
        px_field_free(field);
        px_field_free(ptr::null_mut());
    }
    assert!(!unsafe { CStr::from_ptr(px_version()) }.to_bytes().is_empty());
}

/// Target directory holding the built static library.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = artifact_dir().join("libparaxial_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(cc)
        .arg(crate_dir.join("examples/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("q-law"));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
