//! C ABI for the natsteg library.
//!
//! All functions return `NsStatus`; results come back through out-pointers
//! to opaque handles that must be released with the matching `*_free`.
//! Handles are not thread-safe; the last error message is thread-local.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::ptr;

use natsteg::develop::plan_embed;
use natsteg::noise::diff_model;
use natsteg::plan::DevelopPlan;
use natsteg::stego::{change_probs, embed_raw, payload_entropy};
use natsteg::{Error, NoiseModel, Raster16, StegoParams};

/// Status codes; nonzero values match the CLI exit-code categories.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    NsOk = 0,
    /// Invalid argument or null pointer.
    NsErrArg = 2,
    /// File I/O or format error.
    NsErrIo = 3,
    /// Noise-model violation.
    NsErrModel = 4,
    /// Verification failure.
    NsErrVerify = 5,
}

pub struct NsRaster(Raster16);
pub struct NsModel(NoiseModel);
pub struct NsParams(StegoParams);
pub struct NsProbMap(natsteg::ChangeProbMap);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(e: Error) -> NsStatus {
    let status = match &e {
        Error::InvalidArgument(_) => NsStatus::NsErrArg,
        Error::Io { .. } | Error::Format(_) => NsStatus::NsErrIo,
        Error::ModelViolation(_) => NsStatus::NsErrModel,
        Error::Verification(_) => NsStatus::NsErrVerify,
    };
    LAST_ERROR.with(|s| *s.borrow_mut() = e.to_string());
    status
}

fn fail_arg(msg: &str) -> NsStatus {
    LAST_ERROR.with(|s| *s.borrow_mut() = msg.to_string());
    NsStatus::NsErrArg
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn ns_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|s| {
        let msg = s.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

unsafe fn path_from(ptr_: *const c_char) -> Result<PathBuf, NsStatus> {
    if ptr_.is_null() {
        return Err(fail_arg("null path"));
    }
    match CStr::from_ptr(ptr_).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail_arg("path is not valid UTF-8")),
    }
}

macro_rules! out_write {
    ($out:expr, $val:expr) => {{
        if $out.is_null() {
            return fail_arg("null out pointer");
        }
        *$out = $val;
        NsStatus::NsOk
    }};
}

macro_rules! deref {
    ($h:expr) => {{
        match $h.as_ref() {
            Some(v) => &v.0,
            None => return fail_arg("null handle"),
        }
    }};
}

// ---- rasters ----

/// Reads a PGM/PPM file (8- or 16-bit).
#[no_mangle]
pub unsafe extern "C" fn ns_raster_read(path: *const c_char, out: *mut *mut NsRaster) -> NsStatus {
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match natsteg::raster::read_raster(&path) {
        Ok(r) => out_write!(out, Box::into_raw(Box::new(NsRaster(r)))),
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_raster_write(r: *const NsRaster, path: *const c_char) -> NsStatus {
    let r = deref!(r);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match natsteg::raster::write_raster(r, &path) {
        Ok(()) => NsStatus::NsOk,
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_raster_width(r: *const NsRaster, out: *mut usize) -> NsStatus {
    let r = deref!(r);
    out_write!(out, r.width)
}

#[no_mangle]
pub unsafe extern "C" fn ns_raster_height(r: *const NsRaster, out: *mut usize) -> NsStatus {
    let r = deref!(r);
    out_write!(out, r.height)
}

#[no_mangle]
pub unsafe extern "C" fn ns_raster_channels(r: *const NsRaster, out: *mut usize) -> NsStatus {
    let r = deref!(r);
    out_write!(out, r.channels)
}

#[no_mangle]
pub unsafe extern "C" fn ns_raster_bit_depth(r: *const NsRaster, out: *mut u8) -> NsStatus {
    let r = deref!(r);
    out_write!(out, r.bit_depth)
}

/// Sample at (x, y, channel).
#[no_mangle]
pub unsafe extern "C" fn ns_raster_get(
    r: *const NsRaster,
    x: usize,
    y: usize,
    channel: usize,
    out: *mut u16,
) -> NsStatus {
    let r = deref!(r);
    if x >= r.width || y >= r.height || channel >= r.channels {
        return fail_arg("sample index out of range");
    }
    out_write!(out, r.get(x, y, channel))
}

#[no_mangle]
pub unsafe extern "C" fn ns_raster_free(r: *mut NsRaster) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

// ---- noise models ----

#[no_mangle]
pub unsafe extern "C" fn ns_model_new(a: f64, b: f64, out: *mut *mut NsModel) -> NsStatus {
    match NoiseModel::new(a, b, "") {
        Ok(m) => out_write!(out, Box::into_raw(Box::new(NsModel(m)))),
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_model_load(path: *const c_char, out: *mut *mut NsModel) -> NsStatus {
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match NoiseModel::load(&path) {
        Ok(m) => out_write!(out, Box::into_raw(Box::new(NsModel(m)))),
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_model_save(m: *const NsModel, path: *const c_char) -> NsStatus {
    let m = deref!(m);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match m.save(&path) {
        Ok(()) => NsStatus::NsOk,
        Err(e) => fail(e),
    }
}

/// Slope of the noise-variance line on normalized intensity.
#[no_mangle]
pub unsafe extern "C" fn ns_model_a(m: *const NsModel, out: *mut f64) -> NsStatus {
    let m = deref!(m);
    out_write!(out, m.a)
}

/// Intercept of the noise-variance line.
#[no_mangle]
pub unsafe extern "C" fn ns_model_b(m: *const NsModel, out: *mut f64) -> NsStatus {
    let m = deref!(m);
    out_write!(out, m.b)
}

#[no_mangle]
pub unsafe extern "C" fn ns_model_free(m: *mut NsModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

// ---- embedding parameters ----

/// Difference model between a source and a noisier target, scaled to the
/// given output bit depth (8 or 16).
#[no_mangle]
pub unsafe extern "C" fn ns_params_from_models(
    source: *const NsModel,
    target: *const NsModel,
    bit_depth: u8,
    out: *mut *mut NsParams,
) -> NsStatus {
    let m1 = deref!(source);
    let m2 = deref!(target);
    match diff_model(m1, m2, bit_depth) {
        Ok(p) => out_write!(out, Box::into_raw(Box::new(NsParams(p)))),
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_params_load(path: *const c_char, out: *mut *mut NsParams) -> NsStatus {
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match StegoParams::load(&path) {
        Ok(p) => out_write!(out, Box::into_raw(Box::new(NsParams(p)))),
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_params_save(p: *const NsParams, path: *const c_char) -> NsStatus {
    let p = deref!(p);
    let path = match path_from(path) {
        Ok(pa) => pa,
        Err(s) => return s,
    };
    match p.save(&path) {
        Ok(()) => NsStatus::NsOk,
        Err(e) => fail(e),
    }
}

/// Wets the minimum-code pixels in addition to the saturation rule.
#[no_mangle]
pub unsafe extern "C" fn ns_params_set_wet_dark(p: *mut NsParams, wet_dark: bool) -> NsStatus {
    match p.as_mut() {
        Some(p) => {
            p.0.wet_dark = wet_dark;
            NsStatus::NsOk
        }
        None => fail_arg("null handle"),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ns_params_free(p: *mut NsParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// ---- change probabilities and embedding ----

/// Per-pixel change probabilities for the quantization-only pipeline.
/// `k_max = 0` derives the support bound from the variance.
#[no_mangle]
pub unsafe extern "C" fn ns_probs_compute(
    cover: *const NsRaster,
    params: *const NsParams,
    k_max: usize,
    out: *mut *mut NsProbMap,
) -> NsStatus {
    let cover = deref!(cover);
    let params = deref!(params);
    let k = if k_max == 0 { None } else { Some(k_max) };
    match change_probs(cover, params, k) {
        Ok(m) => out_write!(out, Box::into_raw(Box::new(NsProbMap(m)))),
        Err(e) => fail(e),
    }
}

/// Total payload in bits and the per-pixel rate.
#[no_mangle]
pub unsafe extern "C" fn ns_probs_payload(
    m: *const NsProbMap,
    out_bits: *mut f64,
    out_bpp: *mut f64,
) -> NsStatus {
    let m = deref!(m);
    if out_bits.is_null() || out_bpp.is_null() {
        return fail_arg("null out pointer");
    }
    let (bits, bpp) = payload_entropy(m);
    *out_bits = bits;
    *out_bpp = bpp;
    NsStatus::NsOk
}

#[no_mangle]
pub unsafe extern "C" fn ns_probs_free(m: *mut NsProbMap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Runs a developing plan (inline grammar, e.g. "downsample box 2;
/// quantize8") with embedding and returns the developed stego raster.
#[no_mangle]
pub unsafe extern "C" fn ns_embed_plan(
    cover: *const NsRaster,
    params: *const NsParams,
    plan: *const c_char,
    seed: u64,
    out: *mut *mut NsRaster,
) -> NsStatus {
    let cover = deref!(cover);
    let params = deref!(params);
    if plan.is_null() {
        return fail_arg("null plan");
    }
    let plan_text = match CStr::from_ptr(plan).to_str() {
        Ok(s) => s,
        Err(_) => return fail_arg("plan is not valid UTF-8"),
    };
    let plan = match DevelopPlan::parse(plan_text) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match plan_embed(cover, params, &plan, seed, None) {
        Ok(r) => out_write!(out, Box::into_raw(Box::new(NsRaster(r.stego)))),
        Err(e) => fail(e),
    }
}

/// Adds the raw-domain stego signal without developing; output keeps the
/// cover's bit depth.
#[no_mangle]
pub unsafe extern "C" fn ns_embed_raw(
    cover: *const NsRaster,
    params: *const NsParams,
    seed: u64,
    out: *mut *mut NsRaster,
) -> NsStatus {
    let cover = deref!(cover);
    let params = deref!(params);
    match embed_raw(cover, params, seed) {
        Ok(r) => out_write!(out, Box::into_raw(Box::new(NsRaster(r)))),
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_the_c_surface() {
        let dir = std::env::temp_dir().join(format!("nsffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cover_path = dir.join("c.pgm");
        let samples: Vec<u16> = (0..256).map(|i| 20000 + 90 * i as u16).collect();
        let cover = Raster16::from_samples(16, 16, 1, 16, samples).unwrap();
        natsteg::raster::write_raster(&cover, &cover_path).unwrap();

        unsafe {
            let cpath = std::ffi::CString::new(cover_path.to_str().unwrap()).unwrap();
            let mut r: *mut NsRaster = ptr::null_mut();
            assert_eq!(ns_raster_read(cpath.as_ptr(), &mut r), NsStatus::NsOk);
            let mut w = 0usize;
            ns_raster_width(r, &mut w);
            assert_eq!(w, 16);

            let mut m1: *mut NsModel = ptr::null_mut();
            let mut m2: *mut NsModel = ptr::null_mut();
            assert_eq!(ns_model_new(8.36e-5, 1.11e-6, &mut m1), NsStatus::NsOk);
            assert_eq!(ns_model_new(10.46e-5, 1.95e-6, &mut m2), NsStatus::NsOk);
            let mut p: *mut NsParams = ptr::null_mut();
            assert_eq!(ns_params_from_models(m1, m2, 16, &mut p), NsStatus::NsOk);

            let mut probs: *mut NsProbMap = ptr::null_mut();
            assert_eq!(ns_probs_compute(r, p, 0, &mut probs), NsStatus::NsOk);
            let (mut bits, mut bpp) = (0.0, 0.0);
            assert_eq!(ns_probs_payload(probs, &mut bits, &mut bpp), NsStatus::NsOk);
            assert!(bits > 0.0 && bpp > 0.0);

            let plan = std::ffi::CString::new("quantize8").unwrap();
            let mut s1: *mut NsRaster = ptr::null_mut();
            let mut s2: *mut NsRaster = ptr::null_mut();
            assert_eq!(ns_embed_plan(r, p, plan.as_ptr(), 42, &mut s1), NsStatus::NsOk);
            assert_eq!(ns_embed_plan(r, p, plan.as_ptr(), 42, &mut s2), NsStatus::NsOk);
            assert_eq!((*s1).0, (*s2).0);

            ns_raster_free(s1);
            ns_raster_free(s2);
            ns_probs_free(probs);
            ns_params_free(p);
            ns_model_free(m1);
            ns_model_free(m2);
            ns_raster_free(r);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn errors_set_message_and_status() {
        unsafe {
            let bad = std::ffi::CString::new("/definitely/missing.pgm").unwrap();
            let mut r: *mut NsRaster = ptr::null_mut();
            assert_eq!(ns_raster_read(bad.as_ptr(), &mut r), NsStatus::NsErrIo);
            let mut buf = [0 as c_char; 256];
            let n = ns_last_error(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);

            let mut m: *mut NsModel = ptr::null_mut();
            assert_eq!(ns_model_new(-1.0, 0.0, &mut m), NsStatus::NsErrModel);
        }
    }
}
