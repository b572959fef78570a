use std::ffi::{CStr, CString};
use std::ptr;

use lvct_ffi::*;

fn last_error() -> String {
    let p = lvct_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn phantom_radon_cut_merge_fbp_roundtrip() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(lvct_shepp_logan(32, &mut img), LvctStatus::Ok);
        let (mut w, mut h) = (0, 0);
        assert_eq!(lvct_image_dims(img, &mut w, &mut h), LvctStatus::Ok);
        assert_eq!((w, h), (32, 32));

        let mut sino = ptr::null_mut();
        assert_eq!(lvct_radon(img, 180, 32, &mut sino), LvctStatus::Ok);
        let mut masked = ptr::null_mut();
        assert_eq!(lvct_cut(sino, LvctCutMode::Rear, 60.0, &mut masked), LvctStatus::Ok);
        let mut mask = vec![9u8; 180];
        assert_eq!(lvct_masked_mask(masked, mask.as_mut_ptr(), 180), LvctStatus::Ok);
        assert!(mask[..120].iter().all(|&b| b == 1) && mask[120..].iter().all(|&b| b == 0));

        let mut merged = ptr::null_mut();
        assert_eq!(lvct_merge_radon(masked, LvctFilter::RamLak, &mut merged), LvctStatus::Ok);
        let mut cut_sino = ptr::null_mut();
        assert_eq!(lvct_masked_sinogram(masked, &mut cut_sino), LvctStatus::Ok);
        let (mut nd, mut na) = (0, 0);
        assert_eq!(lvct_sinogram_dims(merged, &mut nd, &mut na), LvctStatus::Ok);
        assert_eq!((nd, na), (32, 180));

        // valid views survive merging unchanged
        let mut a = vec![0.0; nd * na];
        let mut b = vec![0.0; nd * na];
        assert_eq!(lvct_sinogram_data(merged, a.as_mut_ptr(), a.len()), LvctStatus::Ok);
        assert_eq!(lvct_sinogram_data(cut_sino, b.as_mut_ptr(), b.len()), LvctStatus::Ok);
        for d in 0..nd {
            for k in 0..120 {
                assert_eq!(a[d * na + k], b[d * na + k]);
            }
        }

        let (mut rec_mr, mut rec_cr, mut rec_sart) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(lvct_fbp(merged, LvctFilter::RamLak, 32, &mut rec_mr), LvctStatus::Ok);
        assert_eq!(lvct_fbp(cut_sino, LvctFilter::RamLak, 32, &mut rec_cr), LvctStatus::Ok);
        assert_eq!(lvct_sart_tv(cut_sino, mask.as_ptr(), 5, 32, &mut rec_sart), LvctStatus::Ok);
        let (mut p, mut s) = (0.0, 0.0);
        assert_eq!(lvct_metrics(rec_mr, img, &mut p, &mut s), LvctStatus::Ok);
        assert!(p.is_finite() && s > -1.0 && s <= 1.0);
        let (mut p2, mut s2) = (0.0, 0.0);
        assert_eq!(lvct_metrics(img, img, &mut p2, &mut s2), LvctStatus::Ok);
        assert_eq!(s2, 1.0);

        let mut pix = vec![0.0; 32 * 32];
        assert_eq!(lvct_image_data(rec_sart, pix.as_mut_ptr(), pix.len()), LvctStatus::Ok);
        assert!(pix.iter().all(|v| v.is_finite()));

        for i in [img, rec_mr, rec_cr, rec_sart] {
            lvct_image_free(i);
        }
        for s in [sino, merged, cut_sino] {
            lvct_sinogram_free(s);
        }
        lvct_masked_free(masked);
    }
}

#[test]
fn image_roundtrip_and_buffer_checks() {
    unsafe {
        let data: Vec<f64> = (0..12).map(|v| v as f64 / 11.0).collect();
        let mut img = ptr::null_mut();
        assert_eq!(lvct_image_new(4, 3, data.as_ptr(), &mut img), LvctStatus::Ok);
        let mut back = vec![0.0; 12];
        assert_eq!(lvct_image_data(img, back.as_mut_ptr(), 12), LvctStatus::Ok);
        assert_eq!(back, data);
        assert_eq!(lvct_image_data(img, back.as_mut_ptr(), 11), LvctStatus::ShapeMismatch);
        assert!(last_error().contains("buffer holds 11"));
        lvct_image_free(img);
        lvct_image_free(ptr::null_mut());
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(lvct_shepp_logan(0, &mut img), LvctStatus::InvalidArgument);
        assert!(img.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(lvct_shepp_logan(32, ptr::null_mut()), LvctStatus::NullPointer);
        assert!(last_error().contains("null pointer"));
        assert_eq!(lvct_image_new(2, 2, ptr::null(), &mut img), LvctStatus::NullPointer);
        let nan = [f64::NAN; 4];
        assert_eq!(lvct_image_new(2, 2, nan.as_ptr(), &mut img), LvctStatus::NonFinite);

        let mut sino = ptr::null_mut();
        let zeros = [0.0; 8 * 12];
        assert_eq!(lvct_sinogram_new(8, 12, zeros.as_ptr(), &mut sino), LvctStatus::Ok);
        let mut masked = ptr::null_mut();
        assert_eq!(lvct_cut(sino, LvctCutMode::Middle, 180.0, &mut masked), LvctStatus::InvalidArgument);
        lvct_sinogram_free(sino);

        let missing = CString::new("/nonexistent/lvct.toml").unwrap();
        let (mut p, mut s) = (0.0, 0.0);
        assert_eq!(lvct_run_pipeline(missing.as_ptr(), &mut p, &mut s), LvctStatus::Io);
        assert_eq!(lvct_run_pipeline(ptr::null(), &mut p, &mut s), LvctStatus::NullPointer);
    }
}

#[test]
fn pipeline_without_checkpoints_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, "[geometry]\nsize = 32\nn_angles = 30\nn_detectors = 32\n").unwrap();
    let c = CString::new(path.to_string_lossy().as_bytes()).unwrap();
    let (mut p, mut s) = (0.0, 0.0);
    assert_eq!(unsafe { lvct_run_pipeline(c.as_ptr(), &mut p, &mut s) }, LvctStatus::Config);
    assert!(last_error().contains("stage1"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/lvct.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else { return };
    if !cc.status.success() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("use.c");
    std::fs::write(
        &c,
        "#include \"lvct.h\"\nint main(void) { LvctImage *img = 0; LvctStatus s = lvct_shepp_logan(32, &img); \
         lvct_image_free(img); return s == LVCT_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&c)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
