//! C ABI over lvct-core.
//!
//! Objects are opaque handles created by `lvct_*_new` / producer calls and
//! released with the matching `lvct_*_free`. Every fallible call returns an
//! `LvctStatus`; on failure `lvct_last_error` describes the most recent error
//! on the calling thread. Images are row-major `height x width`, sinograms
//! `n_detectors x n_angles` on a uniform 180-degree grid.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lvct_core::limited_view::{cut, merge_radon, CutMode, MaskedSinogram};
use lvct_core::metrics::MetricReport;
use lvct_core::phantom::shepp_logan;
use lvct_core::pipeline::{run_pipeline, PipelineConfig};
use lvct_core::tomo::{
    degree_grid, fbp_reconstruct, radon_forward, sart_tv_reconstruct, FilterKind, ImageSlice, SartTvConfig, Sinogram,
};
use lvct_core::Error;

/// Result codes. Non-zero values match the `lvct` CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvctStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 3,
    BadMagic = 4,
    Truncated = 5,
    DimOverflow = 6,
    Format = 7,
    InvalidArgument = 8,
    ShapeMismatch = 9,
    NonFinite = 10,
    Config = 11,
    MissingCheckpoint = 12,
    GeometryMismatch = 13,
    Diverged = 14,
    GradCheck = 15,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvctCutMode {
    Rear = 0,
    Middle = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvctFilter {
    RamLak = 0,
    SheppLogan = 1,
    Hann = 2,
}

pub struct LvctImage(ImageSlice);
pub struct LvctSinogram(Sinogram);
pub struct LvctMasked(MaskedSinogram);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LvctStatus {
    use LvctStatus as S;
    match e {
        Error::Io { .. } => S::Io,
        Error::BadMagic { .. } => S::BadMagic,
        Error::Truncated { .. } => S::Truncated,
        Error::DimOverflow { .. } => S::DimOverflow,
        Error::Format(_) => S::Format,
        Error::InvalidArgument(_) => S::InvalidArgument,
        Error::ShapeMismatch(_) => S::ShapeMismatch,
        Error::NonFinite(_) => S::NonFinite,
        Error::Config(_) => S::Config,
        Error::MissingCheckpoint(_) => S::MissingCheckpoint,
        Error::GeometryMismatch(_) => S::GeometryMismatch,
        Error::Diverged(_) => S::Diverged,
        Error::GradCheck(_) => S::GradCheck,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LvctStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LvctStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LvctStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            LvctStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    if len != src.len() {
        return Err(Error::ShapeMismatch(format!("buffer holds {len}, need {}", src.len())).into());
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

fn filter(f: LvctFilter) -> FilterKind {
    match f {
        LvctFilter::RamLak => FilterKind::RamLak,
        LvctFilter::SheppLogan => FilterKind::SheppLogan,
        LvctFilter::Hann => FilterKind::Hann,
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lvct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `data` must point to `width * height` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_image_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut LvctImage,
) -> LvctStatus {
    guard(|| {
        let v = slice(data, width.saturating_mul(height), "data")?.to_vec();
        put(out, LvctImage(ImageSlice::new(width, height, v)?))
    })
}

/// # Safety
/// `img` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lvct_image_free(img: *mut LvctImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `img` must be a live handle; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_image_dims(img: *const LvctImage, width: *mut usize, height: *mut usize) -> LvctStatus {
    guard(|| {
        let i = &get(img, "img")?.0;
        if width.is_null() || height.is_null() {
            return Err(Fail::Null("width/height"));
        }
        *width = i.width();
        *height = i.height();
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lvct_image_data(img: *const LvctImage, out: *mut f64, len: usize) -> LvctStatus {
    guard(|| copy_out(get(img, "img")?.0.data(), out, len))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_shepp_logan(size: usize, out: *mut *mut LvctImage) -> LvctStatus {
    guard(|| put(out, LvctImage(shepp_logan(size)?)))
}

/// # Safety
/// `data` must point to `n_detectors * n_angles` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_sinogram_new(
    n_detectors: usize,
    n_angles: usize,
    data: *const f64,
    out: *mut *mut LvctSinogram,
) -> LvctStatus {
    guard(|| {
        let v = slice(data, n_detectors.saturating_mul(n_angles), "data")?.to_vec();
        put(out, LvctSinogram(Sinogram::new(n_detectors, degree_grid(n_angles), v)?))
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lvct_sinogram_free(s: *mut LvctSinogram) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_sinogram_dims(
    s: *const LvctSinogram,
    n_detectors: *mut usize,
    n_angles: *mut usize,
) -> LvctStatus {
    guard(|| {
        let s = &get(s, "sinogram")?.0;
        if n_detectors.is_null() || n_angles.is_null() {
            return Err(Fail::Null("n_detectors/n_angles"));
        }
        *n_detectors = s.n_detectors();
        *n_angles = s.n_angles();
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lvct_sinogram_data(s: *const LvctSinogram, out: *mut f64, len: usize) -> LvctStatus {
    guard(|| copy_out(get(s, "sinogram")?.0.data(), out, len))
}

/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_radon(
    img: *const LvctImage,
    n_angles: usize,
    n_detectors: usize,
    out: *mut *mut LvctSinogram,
) -> LvctStatus {
    guard(|| {
        let s = radon_forward(&get(img, "img")?.0, &degree_grid(n_angles), n_detectors)?;
        put(out, LvctSinogram(s))
    })
}

/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_fbp(
    s: *const LvctSinogram,
    kind: LvctFilter,
    size: usize,
    out: *mut *mut LvctImage,
) -> LvctStatus {
    guard(|| put(out, LvctImage(fbp_reconstruct(&get(s, "sinogram")?.0, filter(kind), size, size)?)))
}

/// SART-TV with default parameters apart from `iterations`. `valid` is
/// either NULL (all views) or `n_angles` bytes, non-zero for measured views.
///
/// # Safety
/// `s` must be a live handle; `valid` as above; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_sart_tv(
    s: *const LvctSinogram,
    valid: *const u8,
    iterations: usize,
    size: usize,
    out: *mut *mut LvctImage,
) -> LvctStatus {
    guard(|| {
        let s = &get(s, "sinogram")?.0;
        let mask: Option<Vec<bool>> = if valid.is_null() {
            None
        } else {
            Some(slice(valid, s.n_angles(), "valid")?.iter().map(|&b| b != 0).collect())
        };
        let cfg = SartTvConfig { n_iterations: iterations, ..Default::default() };
        put(out, LvctImage(sart_tv_reconstruct(s, mask.as_deref(), &cfg, size, size)?.image))
    })
}

/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_cut(
    s: *const LvctSinogram,
    mode: LvctCutMode,
    degrees: f64,
    out: *mut *mut LvctMasked,
) -> LvctStatus {
    guard(|| {
        let mode = match mode {
            LvctCutMode::Rear => CutMode::Rear,
            LvctCutMode::Middle => CutMode::Middle,
        };
        put(out, LvctMasked(cut(&get(s, "sinogram")?.0, mode, degrees)?))
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lvct_masked_free(m: *mut LvctMasked) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Copy of the zero-filled sinogram.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_masked_sinogram(m: *const LvctMasked, out: *mut *mut LvctSinogram) -> LvctStatus {
    guard(|| put(out, LvctSinogram(get(m, "masked")?.0.sino().clone())))
}

/// Mask as `n_angles` bytes, 1 for measured views.
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lvct_masked_mask(m: *const LvctMasked, out: *mut u8, len: usize) -> LvctStatus {
    guard(|| {
        let bytes: Vec<u8> = get(m, "masked")?.0.mask().valid().iter().map(|&v| v as u8).collect();
        copy_out(&bytes, out, len)
    })
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_merge_radon(
    m: *const LvctMasked,
    kind: LvctFilter,
    out: *mut *mut LvctSinogram,
) -> LvctStatus {
    guard(|| put(out, LvctSinogram(merge_radon(&get(m, "masked")?.0, filter(kind))?)))
}

/// PSNR (peak 1) and SSIM of `test` against `reference`.
///
/// # Safety
/// Both handles must be live; `psnr` and `ssim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_metrics(
    test: *const LvctImage,
    reference: *const LvctImage,
    psnr: *mut f64,
    ssim: *mut f64,
) -> LvctStatus {
    guard(|| {
        let m = MetricReport::compare(&get(test, "test")?.0, &get(reference, "reference")?.0)?;
        if psnr.is_null() || ssim.is_null() {
            return Err(Fail::Null("psnr/ssim"));
        }
        *psnr = m.psnr;
        *ssim = m.ssim;
        Ok(())
    })
}

/// Run the configured three-stage pipeline and report the mean metrics.
///
/// # Safety
/// `config_path` must be a NUL-terminated path; `psnr` and `ssim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvct_run_pipeline(config_path: *const c_char, psnr: *mut f64, ssim: *mut f64) -> LvctStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(Fail::Null("config_path"));
        }
        let path = PathBuf::from(CStr::from_ptr(config_path).to_string_lossy().into_owned());
        let cfg = PipelineConfig::load(&path)?.with_env_seed()?;
        if psnr.is_null() || ssim.is_null() {
            return Err(Fail::Null("psnr/ssim"));
        }
        let r = run_pipeline(&cfg)?;
        *psnr = r.mean.psnr;
        *ssim = r.mean.ssim;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_matches_cli_exit_code() {
        let io = || std::io::Error::other("x");
        let errors = [
            Error::Io { path: "p".into(), source: io() },
            Error::BadMagic { path: "p".into(), expected: "LVCT1" },
            Error::Truncated { path: "p".into(), detail: String::new() },
            Error::DimOverflow { path: "p".into(), detail: String::new() },
            Error::Format(String::new()),
            Error::InvalidArgument(String::new()),
            Error::ShapeMismatch(String::new()),
            Error::NonFinite(String::new()),
            Error::Config(String::new()),
            Error::MissingCheckpoint("p".into()),
            Error::GeometryMismatch(String::new()),
            Error::Diverged(String::new()),
            Error::GradCheck(String::new()),
        ];
        for e in &errors {
            assert_eq!(status_of(e) as i32, e.code(), "{}", e.kind());
        }
    }
}
