use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fillinglab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        fl_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn ball_round_trip() {
    let name = CString::new("FIX1").unwrap();
    let mut g = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(fl_group_new(name.as_ptr(), &mut g), FlStatus::Ok);
        let mut p = 0usize;
        assert_eq!(fl_group_peripherals(g, &mut p), FlStatus::Ok);
        assert_eq!(p, 1);
        assert_eq!(fl_ball_new(g, 4, &mut b), FlStatus::Ok);
        let mut n = 0usize;
        assert_eq!(fl_ball_len(b, &mut n), FlStatus::Ok);
        assert_eq!(n, 301);
        let mut d = 0u32;
        assert_eq!(fl_ball_distance(b, 0, 0, &mut d), FlStatus::Ok);
        assert_eq!(d, 0);
        assert_eq!(fl_ball_distance(b, 0, n, &mut d), FlStatus::OutOfRange);
        let slopes = [64i64];
        let mut t = 99u32;
        assert_eq!(fl_truncation_depth(g, slopes.as_ptr(), 1, 0, &mut t), FlStatus::Ok);
        assert_eq!(t, 2);
        fl_ball_free(b);
        fl_group_free(g);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("FIX9").unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(fl_group_new(bad.as_ptr(), &mut g), FlStatus::UnknownFixture);
        assert!(g.is_null());
        assert!(last_error().contains("FIX9"));
        assert_eq!(fl_group_new(ptr::null(), &mut g), FlStatus::NullPointer);
        let mut n = 0usize;
        assert_eq!(fl_ball_len(ptr::null(), &mut n), FlStatus::NullPointer);
        let cfg = CString::new("fixture = FIX1\ncolour = red\n").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(fl_scenario_run(cfg.as_ptr(), &mut r), FlStatus::Parse);
        assert!(last_error().contains("colour"));
    }
}

#[test]
fn scenario_json() {
    let cfg = CString::new("fixture = FIX1\nradius = 3\nseed = 5\n").unwrap();
    let mut r = ptr::null_mut();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(fl_scenario_run(cfg.as_ptr(), &mut r), FlStatus::Ok);
        assert_eq!(fl_report_json(r, &mut s), FlStatus::Ok);
        let json = CStr::from_ptr(s).to_str().unwrap().to_string();
        assert!(json.contains("\"seed\": 5"));
        assert!(!json.contains("timings"));
        fl_string_free(s);
        fl_report_free(r);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fillinglab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["fl_group_new", "fl_ball_distance", "fl_scenario_run", "fl_string_free", "FL_STATUS_BUDGET"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile_dir();
    let src = dir.join("use.c");
    std::fs::write(&src, "#include \"fillinglab.h\"\nint main(void) { FlGroup *g = 0; return fl_group_new(\"FIX1\", &g) == FL_STATUS_OK ? 0 : 1; }\n").unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .expect("a C compiler");
    assert!(status.success());
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("ffi-header");
    std::fs::create_dir_all(&d).unwrap();
    d
}
