//! C interface to `framerestore`.
//!
//! Objects are opaque handles created by `fr_*_new`-style constructors and
//! released with the matching `fr_*_free`. Every fallible call returns an
//! [`FrStatus`]; on failure a message is available from
//! [`fr_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use framerestore::experiment::{run_experiment, ExperimentConfig};
use framerestore::framelet::{FilterBank, FrameCoefficients, Framelet, FrameletKind};
use framerestore::image::{add_gaussian_noise, psnr, shepp_logan, Image, NoiseSpec, PsnrMode};
use framerestore::operators::{
    fanbeam_build, gaussian_kernel, BlurOperator, Boundary, FanBeamGeometry, LinearOperator,
    ScaledIdentity,
};
use framerestore::pd::{pd_solve, PdConfig, PdInit, Problem};
use framerestore::prox::{hard_threshold, FeasibleSet, ThresholdVector};
use framerestore::RestoreError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Parse = 4,
    Io = 5,
    Config = 6,
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrPsnrMode {
    Ct = 0,
    Gray255 = 1,
    Peak255 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrWavelet {
    Haar = 0,
    PiecewiseLinear = 1,
    PiecewiseCubic = 2,
    Identity = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrBoundary {
    Symmetric = 0,
    Periodic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrSetKind {
    All = 0,
    LowerBounded = 1,
    Box = 2,
}

/// Feasible set for the restored image; `upper` is ignored unless `kind`
/// is `Box`, `lower` is ignored for `All`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FrFeasibleSet {
    pub kind: FrSetKind,
    pub lower: f64,
    pub upper: f64,
}

pub struct FrImage(Image);
pub struct FrFramelet(Framelet);
pub struct FrCoefficients(FrameCoefficients);
pub struct FrOperator(Box<dyn LinearOperator>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &RestoreError) -> FrStatus {
    match err {
        RestoreError::Parse { .. } => FrStatus::Parse,
        RestoreError::DimensionMismatch { .. } => FrStatus::DimensionMismatch,
        RestoreError::InvalidArgument(_) => FrStatus::InvalidArgument,
        RestoreError::NotPositiveDefinite { .. } => FrStatus::Numerical,
        RestoreError::Config(_) | RestoreError::Json(_) => FrStatus::Config,
        RestoreError::Io(_) | RestoreError::Csv(_) => FrStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(RestoreError),
}

impl From<RestoreError> for Fail {
    fn from(e: RestoreError) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FrStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn bad(msg: &str) -> Fail {
    Fail::Lib(RestoreError::InvalidArgument(msg.into()))
}

impl From<FrPsnrMode> for PsnrMode {
    fn from(m: FrPsnrMode) -> Self {
        match m {
            FrPsnrMode::Ct => PsnrMode::Ct,
            FrPsnrMode::Gray255 => PsnrMode::Gray255,
            FrPsnrMode::Peak255 => PsnrMode::Peak255,
        }
    }
}

impl From<FrWavelet> for FrameletKind {
    fn from(w: FrWavelet) -> Self {
        match w {
            FrWavelet::Haar => FrameletKind::Haar,
            FrWavelet::PiecewiseLinear => FrameletKind::PiecewiseLinear,
            FrWavelet::PiecewiseCubic => FrameletKind::PiecewiseCubic,
            FrWavelet::Identity => FrameletKind::Identity,
        }
    }
}

impl From<FrBoundary> for Boundary {
    fn from(b: FrBoundary) -> Self {
        match b {
            FrBoundary::Symmetric => Boundary::Symmetric,
            FrBoundary::Periodic => Boundary::Periodic,
        }
    }
}

impl From<FrFeasibleSet> for FeasibleSet {
    fn from(s: FrFeasibleSet) -> Self {
        match s.kind {
            FrSetKind::All => FeasibleSet::All,
            FrSetKind::LowerBounded => FeasibleSet::LowerBounded { lb: s.lower },
            FrSetKind::Box => FeasibleSet::Box {
                lb: s.lower,
                ub: s.upper,
            },
        }
    }
}

/// Message for the most recent failure on this thread, or null if the last
/// call succeeded. Valid until the next call into this library.
#[no_mangle]
pub extern "C" fn fr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `width * height` row-major pixels from `data`.
#[no_mangle]
pub unsafe extern "C" fn fr_image_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut FrImage,
) -> FrStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| bad("image size overflows"))?;
        let pixels = slice(data, n, "data")?.to_vec();
        put(out, FrImage(Image::new(width, height, pixels)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_image_free(img: *mut FrImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fr_image_width(img: *const FrImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

#[no_mangle]
pub unsafe extern "C" fn fr_image_height(img: *const FrImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Borrowed pointer to the row-major pixels, valid while `img` lives.
#[no_mangle]
pub unsafe extern "C" fn fr_image_data(img: *const FrImage) -> *const f64 {
    img.as_ref().map_or(ptr::null(), |i| i.0.pixels().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn fr_psnr(
    img: *const FrImage,
    reference: *const FrImage,
    mode: FrPsnrMode,
    out: *mut f64,
) -> FrStatus {
    guard(|| {
        let v = psnr(
            &deref(img, "img")?.0,
            &deref(reference, "reference")?.0,
            mode.into(),
        )?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_add_gaussian_noise(
    img: *const FrImage,
    sigma: f64,
    seed: u64,
    out: *mut *mut FrImage,
) -> FrStatus {
    guard(|| {
        let spec = NoiseSpec::new(sigma, seed)?;
        put(
            out,
            FrImage(add_gaussian_noise(&deref(img, "img")?.0, spec)),
        )
    })
}

/// Modified Shepp-Logan phantom, values in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn fr_phantom(size: usize, out: *mut *mut FrImage) -> FrStatus {
    guard(|| put(out, FrImage(shepp_logan(size)?)))
}

#[no_mangle]
pub unsafe extern "C" fn fr_framelet_new(
    wavelet: FrWavelet,
    levels: usize,
    width: usize,
    height: usize,
    boundary: FrBoundary,
    out: *mut *mut FrFramelet,
) -> FrStatus {
    guard(|| {
        let frame = Framelet::new(
            FilterBank::new(wavelet.into())?,
            levels,
            width,
            height,
            boundary.into(),
        )?;
        put(out, FrFramelet(frame))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_framelet_free(frame: *mut FrFramelet) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fr_decompose(
    frame: *const FrFramelet,
    img: *const FrImage,
    out: *mut *mut FrCoefficients,
) -> FrStatus {
    guard(|| {
        let frame = &deref(frame, "frame")?.0;
        let img = &deref(img, "img")?.0;
        if img.width() != frame.width() || img.height() != frame.height() {
            return Err(Fail::Lib(RestoreError::DimensionMismatch {
                expected: format!("{}x{}", frame.width(), frame.height()),
                got: format!("{}x{}", img.width(), img.height()),
            }));
        }
        put(out, FrCoefficients(frame.decompose(img.pixels())))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_reconstruct(
    frame: *const FrFramelet,
    coeffs: *const FrCoefficients,
    out: *mut *mut FrImage,
) -> FrStatus {
    guard(|| {
        let frame = &deref(frame, "frame")?.0;
        let u = frame.reconstruct(&deref(coeffs, "coeffs")?.0)?;
        put(out, FrImage(Image::new(frame.width(), frame.height(), u)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_coefficients_free(coeffs: *mut FrCoefficients) {
    if !coeffs.is_null() {
        drop(Box::from_raw(coeffs));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fr_coefficients_len(coeffs: *const FrCoefficients) -> usize {
    coeffs.as_ref().map_or(0, |c| c.0.len())
}

/// Borrowed mutable pointer to the plane-major coefficient array.
#[no_mangle]
pub unsafe extern "C" fn fr_coefficients_data(coeffs: *mut FrCoefficients) -> *mut f64 {
    coeffs
        .as_mut()
        .map_or(ptr::null_mut(), |c| c.0.as_mut_slice().as_mut_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn fr_coefficients_count_nonzero(coeffs: *const FrCoefficients) -> usize {
    coeffs.as_ref().map_or(0, |c| c.0.count_nonzero())
}

/// Zeroes, in place, every coefficient with magnitude at most `threshold`.
#[no_mangle]
pub unsafe extern "C" fn fr_hard_threshold(
    coeffs: *mut FrCoefficients,
    threshold: f64,
) -> FrStatus {
    guard(|| {
        let c = &mut coeffs.as_mut().ok_or(Fail::Null("coeffs"))?.0;
        let t = ThresholdVector::new(vec![threshold; c.num_planes()])?;
        *c = hard_threshold(c, &t)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_operator_identity(n: usize, out: *mut *mut FrOperator) -> FrStatus {
    guard(|| put(out, FrOperator(Box::new(ScaledIdentity::identity(n)))))
}

/// Normalized `size x size` Gaussian blur with symmetric boundary handling.
#[no_mangle]
pub unsafe extern "C" fn fr_operator_gaussian_blur(
    width: usize,
    height: usize,
    size: usize,
    std: f64,
    out: *mut *mut FrOperator,
) -> FrStatus {
    guard(|| {
        let op = BlurOperator::new(
            width,
            height,
            gaussian_kernel(size, std)?,
            Boundary::Symmetric,
        );
        put(out, FrOperator(Box::new(op)))
    })
}

/// Fan-beam projection matrix for a `side x side` grid with the default
/// geometry (360 views, `2 * side` detectors).
#[no_mangle]
pub unsafe extern "C" fn fr_operator_fanbeam(side: usize, out: *mut *mut FrOperator) -> FrStatus {
    guard(|| {
        put(
            out,
            FrOperator(Box::new(fanbeam_build(&FanBeamGeometry::default_for(
                side,
            ))?)),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn fr_operator_free(op: *mut FrOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fr_operator_input_len(op: *const FrOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.input_len())
}

#[no_mangle]
pub unsafe extern "C" fn fr_operator_output_len(op: *const FrOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.output_len())
}

/// `out = A x`; `x` has `input_len` entries and `out` has `output_len`.
#[no_mangle]
pub unsafe extern "C" fn fr_operator_apply(
    op: *const FrOperator,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> FrStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        if x_len != op.input_len() || out_len != op.output_len() {
            return Err(Fail::Lib(RestoreError::DimensionMismatch {
                expected: format!("{} -> {}", op.input_len(), op.output_len()),
                got: format!("{x_len} -> {out_len}"),
            }));
        }
        let x = slice(x, x_len, "x")?;
        if out.is_null() && out_len > 0 {
            return Err(Fail::Null("out"));
        }
        let y = op.apply_vec(x);
        ptr::copy_nonoverlapping(y.as_ptr(), out, out_len);
        Ok(())
    })
}

/// Penalty decomposition restoration of the measurements `f`.
///
/// `lambda` holds one weight or one per level. `rho0` and `delta` set the
/// penalty schedule; the other solver settings take library defaults.
/// `converged` (nullable) receives 1 if the outer stopping rule was met.
#[no_mangle]
pub unsafe extern "C" fn fr_pd_solve(
    op: *const FrOperator,
    frame: *const FrFramelet,
    f: *const f64,
    f_len: usize,
    lambda: *const f64,
    lambda_len: usize,
    set: FrFeasibleSet,
    rho0: f64,
    delta: f64,
    out: *mut *mut FrImage,
    converged: *mut i32,
) -> FrStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        let frame = &deref(frame, "frame")?.0;
        let f = slice(f, f_len, "f")?;
        let lambda = slice(lambda, lambda_len, "lambda")?;
        let problem = Problem::new(op.as_ref(), frame, f, lambda, set.into())?;
        let cfg = PdConfig {
            rho0,
            delta,
            ..PdConfig::default()
        };
        cfg.validate()?;
        let rep = pd_solve(&problem, &cfg, &PdInit::default())?;
        if let Some(c) = converged.as_mut() {
            *c = rep.converged as i32;
        }
        put(
            out,
            FrImage(Image::new(frame.width(), frame.height(), rep.u)?),
        )
    })
}

/// Runs a full experiment from a JSON config (same schema as the CLI).
/// Any of the output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn fr_run_experiment_json(
    config_json: *const c_char,
    psnr_db: *mut f64,
    restored: *mut *mut FrImage,
    converged: *mut i32,
) -> FrStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(Fail::Null("config_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|_| Fail::Lib(RestoreError::Config("config is not UTF-8".into())))?;
        let cfg = ExperimentConfig::from_json(text)?;
        let res = run_experiment(&cfg)?;
        if let Some(p) = psnr_db.as_mut() {
            *p = res.row.psnr_db;
        }
        if let Some(c) = converged.as_mut() {
            *c = res.converged as i32;
        }
        if !restored.is_null() {
            put(restored, FrImage(res.restored))?;
        }
        Ok(())
    })
}
