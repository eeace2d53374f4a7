use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use robex::Model;
use robex_ffi::*;

/// Class 1 scores `3·x0 + 4·x1`, class 0 is constant zero.
fn three_four_json() -> CString {
    let model = Model::linear(&[vec![0.0, 0.0], vec![3.0, 4.0]], &[0.0, 0.0]).unwrap();
    CString::new(model.to_json()).unwrap()
}

struct Handle(*mut RobexModel);

impl Handle {
    fn from_json(text: &CString) -> Handle {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { robex_model_from_json(text.as_ptr(), &mut h) }, RobexStatus::Ok);
        assert!(!h.is_null());
        Handle(h)
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { robex_model_free(self.0) }
    }
}

fn last_error() -> String {
    let p = robex_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn load_query_and_predict() {
    let json = three_four_json();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, json.as_bytes()).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut raw = ptr::null_mut();
    assert_eq!(unsafe { robex_model_load(cpath.as_ptr(), &mut raw) }, RobexStatus::Ok);
    let m = Handle(raw);
    unsafe {
        assert_eq!(robex_model_input_dim(m.0), 2);
        assert_eq!(robex_model_num_classes(m.0), 2);
        let x = [1.0, 1.0];
        let mut logits = [f64::NAN; 2];
        assert_eq!(
            robex_model_forward(m.0, x.as_ptr(), 2, logits.as_mut_ptr(), 2),
            RobexStatus::Ok
        );
        assert_eq!(logits, [0.0, 7.0]);
        let mut class = 9;
        assert_eq!(robex_model_predict(m.0, x.as_ptr(), 2, &mut class), RobexStatus::Ok);
        assert_eq!(class, 1);
        assert_eq!(robex_model_input_dim(ptr::null()), 0);
    }
}

#[test]
fn min_perturbation_through_the_abi() {
    let m = Handle::from_json(&three_four_json());
    let x = [1.0, 1.0];
    let mut cfg = robex_attack_config_default();
    cfg.eps_cap = 100.0;
    for (subset, want) in [(&[0usize, 1][..], 1.4), (&[0][..], 7.0 / 3.0)] {
        let (mut norm, mut success, mut capped) = (0.0, false, true);
        let mut delta = [f64::NAN; 2];
        let status = unsafe {
            robex_min_perturbation(
                m.0,
                x.as_ptr(),
                2,
                subset.as_ptr(),
                subset.len(),
                -1,
                &cfg,
                &mut norm,
                &mut success,
                &mut capped,
                delta.as_mut_ptr(),
                2,
            )
        };
        assert_eq!(status, RobexStatus::Ok);
        assert!(success && !capped);
        assert!(norm >= want - 1e-9 && norm <= 1.02 * want, "{norm} vs {want}");
        assert!((delta[0].hypot(delta[1]) - norm).abs() < 1e-12);
        if subset.len() == 1 {
            assert_eq!(delta[1], 0.0);
        }
    }

    let mut norm = 0.0;
    let status = unsafe {
        robex_min_perturbation(
            m.0,
            x.as_ptr(),
            2,
            ptr::null(),
            0,
            -1,
            ptr::null(),
            &mut norm,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, RobexStatus::InvalidArgument);
    assert!(last_error().contains("empty"), "{}", last_error());

    let status = unsafe {
        robex_min_perturbation(
            m.0,
            x.as_ptr(),
            2,
            [0usize].as_ptr(),
            1,
            1,
            ptr::null(),
            &mut norm,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, RobexStatus::Ok);
    assert_eq!(norm, 0.0);
}

#[test]
fn attributions_through_the_abi() {
    let m = Handle::from_json(&three_four_json());
    let x = [1.0, 2.0];
    let base = [0.0, 0.0];
    let mut scores = [f64::NAN; 2];
    let mut ranking = [9usize; 2];
    let status = unsafe {
        robex_attribution(
            m.0,
            RobexMethod::Ig,
            x.as_ptr(),
            2,
            base.as_ptr(),
            10,
            0,
            scores.as_mut_ptr(),
            2,
            ranking.as_mut_ptr(),
            2,
        )
    };
    assert_eq!(status, RobexStatus::Ok);
    assert_eq!(scores, [3.0, 8.0]);
    assert_eq!(ranking, [1, 0]);

    let status = unsafe {
        robex_attribution(
            m.0,
            RobexMethod::Grad,
            x.as_ptr(),
            2,
            ptr::null(),
            0,
            0,
            scores.as_mut_ptr(),
            2,
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, RobexStatus::Ok);
    assert_eq!(scores, [3.0, 4.0]);

    let status = unsafe {
        robex_attribution(
            m.0,
            RobexMethod::Loo,
            x.as_ptr(),
            2,
            ptr::null(),
            0,
            0,
            scores.as_mut_ptr(),
            2,
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, RobexStatus::NullPointer);
    assert!(last_error().contains("baseline"));

    let status = unsafe {
        robex_attribution(
            m.0,
            RobexMethod::Grad,
            x.as_ptr(),
            2,
            ptr::null(),
            0,
            0,
            scores.as_mut_ptr(),
            1,
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, RobexStatus::InvalidArgument);
}

#[test]
fn auc_through_the_abi() {
    let mut out = 0.0;
    let xs = [0.0, 1.0];
    let ys = [3.0, 3.0];
    assert_eq!(
        unsafe { robex_auc(xs.as_ptr(), ys.as_ptr(), 2, &mut out) },
        RobexStatus::Ok
    );
    assert_eq!(out, 3.0);
    assert_eq!(
        unsafe { robex_auc(xs.as_ptr(), ys.as_ptr(), 1, &mut out) },
        RobexStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { robex_auc(ptr::null(), ys.as_ptr(), 2, &mut out) },
        RobexStatus::NullPointer
    );
}

#[test]
fn error_codes_and_messages() {
    let m = Handle::from_json(&three_four_json());
    let mut class = 0;
    let short = [1.0];
    assert_eq!(
        unsafe { robex_model_predict(m.0, short.as_ptr(), 1, &mut class) },
        RobexStatus::InvalidArgument
    );
    assert!(last_error().contains('x'));
    assert_eq!(
        unsafe { robex_model_predict(ptr::null(), short.as_ptr(), 1, &mut class) },
        RobexStatus::NullPointer
    );
    assert!(last_error().contains("model"));

    let missing = CString::new("/nonexistent/robex/model.json").unwrap();
    let mut raw = ptr::null_mut();
    assert_eq!(unsafe { robex_model_load(missing.as_ptr(), &mut raw) }, RobexStatus::Io);
    assert!(raw.is_null());
    let bad = CString::new("{\"layers\": 3}").unwrap();
    assert_eq!(
        unsafe { robex_model_from_json(bad.as_ptr(), &mut raw) },
        RobexStatus::Io
    );
    assert!(raw.is_null());
    unsafe { robex_model_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_abi_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/robex.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "robex_model_load",
        "robex_model_free",
        "robex_min_perturbation",
        "robex_attribution",
        "robex_auc",
        "robex_last_error",
        "ROBEX_STATUS_NULL_POINTER",
        "typedef struct RobexModel RobexModel",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; header syntax not checked");
        return;
    };
    assert!(status.success());
}

#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // Cargo refreshes the static library next to the test binary in deps/.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap();
    if !lib_dir.join("librobex_ffi.a").exists() {
        eprintln!("static library not built; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let Ok(out) = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(lib_dir.join("librobex_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let norm: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!((1.4..=1.4 * 1.02).contains(&norm), "{norm}");
}
