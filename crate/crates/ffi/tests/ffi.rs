use std::ffi::{c_char, CString};
use std::ptr;

use wigner_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { wigner_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn free_solver() -> *mut WignerSolver {
    let name = CString::new("free").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { wigner_solver_from_preset(name.as_ptr(), &mut s) },
        WignerStatus::Ok
    );
    assert!(!s.is_null());
    s
}

#[test]
fn preset_solver_steps_and_conserves_mass() {
    let s = free_solver();
    let (mut t, mut nx, mut n, mut dt) = (0.0, 0usize, 0usize, 0.0);
    unsafe {
        assert_eq!(
            wigner_solver_info(s, &mut t, &mut nx, &mut n, &mut dt),
            WignerStatus::Ok
        );
        assert_eq!((t, nx, n), (0.0, 600, 16));

        let mut m0 = WignerMoments::default();
        assert_eq!(wigner_solver_moments(s, &mut m0), WignerStatus::Ok);
        assert_eq!(wigner_solver_step(s, 20), WignerStatus::Ok);
        let mut m1 = WignerMoments::default();
        assert_eq!(wigner_solver_moments(s, &mut m1), WignerStatus::Ok);
        assert!((m1.time - 20.0 * dt).abs() < 1e-12);
        assert!((m1.mass - m0.mass).abs() < 1e-12);
        // free streaming widens the packet
        assert!(m1.var_x > m0.var_x);

        let mut rho = vec![0.0; nx];
        assert_eq!(
            wigner_solver_density(s, rho.as_mut_ptr(), rho.len()),
            WignerStatus::Ok
        );
        let mut xs = vec![0.0; nx];
        assert_eq!(
            wigner_solver_x_grid(s, xs.as_mut_ptr(), xs.len()),
            WignerStatus::Ok
        );
        let dx = xs[1] - xs[0];
        let total: f64 = rho.iter().sum::<f64>() * dx;
        assert!((total - m1.mass).abs() < 1e-12);

        let mut coeffs = vec![0.0; nx * n];
        assert_eq!(
            wigner_solver_coefficients(s, coeffs.as_mut_ptr(), coeffs.len()),
            WignerStatus::Ok
        );
        assert!(coeffs.iter().all(|c| c.is_finite()));
        wigner_solver_free(s);
    }
}

#[test]
fn stepping_in_pieces_matches_one_call() {
    let a = free_solver();
    let b = free_solver();
    unsafe {
        assert_eq!(wigner_solver_step(a, 10), WignerStatus::Ok);
        for _ in 0..5 {
            assert_eq!(wigner_solver_step(b, 2), WignerStatus::Ok);
        }
        let mut ca = vec![0.0; 600 * 16];
        let mut cb = ca.clone();
        wigner_solver_coefficients(a, ca.as_mut_ptr(), ca.len());
        wigner_solver_coefficients(b, cb.as_mut_ptr(), cb.len());
        let diff = ca
            .iter()
            .zip(&cb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-13, "{diff:e}");
        wigner_solver_free(a);
        wigner_solver_free(b);
    }
}

#[test]
fn toml_constructor_and_error_codes() {
    let text = CString::new(wigner_core::config::preset_text("harmonic").unwrap()).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            wigner_solver_from_toml(text.as_ptr(), &mut s),
            WignerStatus::Ok
        );
        let mut small = [0.0; 3];
        assert_eq!(
            wigner_solver_density(s, small.as_mut_ptr(), 3),
            WignerStatus::BufferTooSmall
        );
        assert!(last_error().contains("needed"));
        assert_eq!(
            wigner_solver_density(s, ptr::null_mut(), 1000),
            WignerStatus::NullPointer
        );
        wigner_solver_free(s);

        let bad = CString::new("[basis]\nn_basis = 4\n").unwrap();
        let mut s = ptr::dangling_mut();
        assert_eq!(
            wigner_solver_from_toml(bad.as_ptr(), &mut s),
            WignerStatus::Config
        );
        assert!(s.is_null());
        assert!(last_error().contains("potential"), "{}", last_error());

        let unknown = CString::new("nope").unwrap();
        assert_eq!(
            wigner_solver_from_preset(unknown.as_ptr(), &mut s),
            WignerStatus::Config
        );
        assert_eq!(
            wigner_solver_from_preset(ptr::null(), &mut s),
            WignerStatus::NullPointer
        );
        assert_eq!(
            wigner_solver_from_preset(unknown.as_ptr(), ptr::null_mut()),
            WignerStatus::NullPointer
        );
        assert_eq!(
            wigner_solver_step(ptr::null_mut(), 1),
            WignerStatus::NullPointer
        );

        let invalid = [0xffu8 as c_char, 0];
        assert_eq!(
            wigner_solver_from_preset(invalid.as_ptr(), &mut s),
            WignerStatus::InvalidUtf8
        );

        // a successful call clears the message
        let name = CString::new("free").unwrap();
        assert_eq!(
            wigner_solver_from_preset(name.as_ptr(), &mut s),
            WignerStatus::Ok
        );
        assert_eq!(wigner_last_error(ptr::null_mut(), 0), 0);
        wigner_solver_free(s);
        wigner_solver_free(ptr::null_mut());
    }
}

#[test]
fn last_error_truncates_and_reports_length() {
    let unknown = CString::new("nope").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        wigner_solver_from_preset(unknown.as_ptr(), &mut s);
        let full = wigner_last_error(ptr::null_mut(), 0);
        assert!(full > 8);
        let mut buf = [1 as c_char; 5];
        assert_eq!(wigner_last_error(buf.as_mut_ptr(), buf.len()), full);
        assert_eq!(buf[4], 0);
    }
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/wigner.h");
    for name in [
        "wigner_solver_from_toml",
        "wigner_solver_from_preset",
        "wigner_solver_free",
        "wigner_solver_step",
        "wigner_solver_info",
        "wigner_solver_x_grid",
        "wigner_solver_density",
        "wigner_solver_coefficients",
        "wigner_solver_moments",
        "wigner_last_error",
        "typedef struct WignerSolver WignerSolver;",
        "WIGNER_STATUS_BUFFER_TOO_SMALL = 6",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
